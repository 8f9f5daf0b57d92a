#![no_main]

use ble_txpc::SummaryDocument;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(doc) = SummaryDocument::parse(text) else { return };
    let json = doc.to_json().expect("summary serializes");
    let again = SummaryDocument::parse(&json).expect("written summary parses");
    assert_eq!(json, again.to_json().unwrap());
});
