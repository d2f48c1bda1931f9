#![no_main]

use libfuzzer_sys::fuzz_target;
use qkf::io::{parse_scenario, scenario_to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_scenario(text) {
        // Anything accepted must survive a write/read cycle unchanged.
        let again = parse_scenario(&scenario_to_json(&cfg)).expect("re-parse of written config");
        assert_eq!(again, cfg);
    }
});
