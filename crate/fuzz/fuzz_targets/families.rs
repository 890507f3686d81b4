// SPDX-License-Identifier: Apache-2.0
#![no_main]

use libfuzzer_sys::fuzz_target;
use tempolake::family::{parse_families, write_families};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(fams) = parse_families(text) else { return };
    let again = parse_families(&write_families(&fams)).expect("written families reparse");
    assert_eq!(again, fams);
});
