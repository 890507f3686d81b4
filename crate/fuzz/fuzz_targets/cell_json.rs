// SPDX-License-Identifier: Apache-2.0
#![no_main]

use libfuzzer_sys::fuzz_target;
use tempolake::table::CellValue;

fuzz_target!(|data: &[u8]| {
    let Ok(cell) = serde_json::from_slice::<CellValue>(data) else {
        return;
    };
    let text = serde_json::to_string(&cell).expect("cells serialize");
    assert_eq!(
        serde_json::from_str::<CellValue>(&text).expect("serialized cell reparses"),
        cell
    );
});
