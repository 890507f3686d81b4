// SPDX-License-Identifier: Apache-2.0
#![no_main]

use libfuzzer_sys::fuzz_target;
use tempolake::table::{parse_records, write_records, Table};

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = parse_records(data) {
        let again = parse_records(write_records(&records).as_bytes()).expect("written records reparse");
        assert_eq!(again, records);
    }
    let Ok(t) = Table::from_csv("fuzz", data) else { return };
    // Rendering then parsing under the inferred types is lossless.
    let back = Table::from_csv_typed("fuzz", t.to_csv().as_bytes(), t.col_types()).expect("rendered table reparses");
    assert!(back.content_eq(&t));
});
