#![no_main]

use libfuzzer_sys::fuzz_target;
use qkf::io::{measurement_line, parse_measurement_line, parse_measurement_lines};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match parse_measurement_lines(text) {
        Ok(records) => {
            for rec in records {
                let again = parse_measurement_line(&measurement_line(&rec)).expect("re-parse of written line");
                assert_eq!(again, rec);
            }
        }
        Err(e) => assert!(e.line >= 1 && e.line <= text.lines().count()),
    }
});
