// SPDX-License-Identifier: Apache-2.0
#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use tempolake::query::{decouple, parse_query};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // `table` names a file to read; keep the fuzzer off the filesystem.
    if text.lines().any(|l| l.trim_start().starts_with("table")) {
        return;
    }
    if let Ok(q) = parse_query(text, Path::new("/nonexistent")) {
        let _ = decouple(&q);
    }
});
