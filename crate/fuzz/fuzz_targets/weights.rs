// SPDX-License-Identifier: Apache-2.0
#![no_main]

use libfuzzer_sys::fuzz_target;
use tempolake::family::{parse_weights, write_weights};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok((w, seed)) = parse_weights(text) else { return };
    assert!(w.is_finite());
    assert_eq!(
        parse_weights(&write_weights(&w, seed)).expect("written weights reparse"),
        (w, seed)
    );
});
