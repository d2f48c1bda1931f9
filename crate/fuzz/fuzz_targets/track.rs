#![no_main]

//! Parsed measurement files fed through both filters must never panic.

use libfuzzer_sys::fuzz_target;
use qkf::io::parse_measurement_lines;
use qkf::sim::builtin_scenario;
use qkf::{Diagnostics, FilterKind};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(records) = parse_measurement_lines(text) else { return };
    let cfg = builtin_scenario("moderate").unwrap();
    let filter_cfg = cfg.filter_config();
    for kind in [FilterKind::Sequential, FilterKind::Batch] {
        let mut est = cfg.prior;
        let mut diag = Diagnostics::default();
        for rec in records.iter().take(64) {
            est = kind.step(&est, &rec.measurements, &cfg.motion, &filter_cfg, &mut diag);
        }
    }
});
