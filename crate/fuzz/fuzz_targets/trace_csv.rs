#![no_main]

use ble_txpc::report::{parse_trace, trace_to_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(rows) = parse_trace(text) else { return };
    let written = trace_to_csv(&rows);
    let again = parse_trace(&written).expect("written trace parses");
    assert_eq!(written, trace_to_csv(&again));
});
