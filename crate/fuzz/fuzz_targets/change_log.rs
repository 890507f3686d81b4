// SPDX-License-Identifier: Apache-2.0
#![no_main]

use libfuzzer_sys::fuzz_target;
use tempolake::change::{invert_log, parse_log, write_log};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(log) = parse_log(text) else { return };
    let again = parse_log(&write_log(&log)).expect("written log reparses");
    assert_eq!(again, log);
    let _ = log.validate();
    let _ = invert_log(&log);
});
