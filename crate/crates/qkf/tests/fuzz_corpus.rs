//! Replays the checked-in fuzz corpus through the parsers on stable Rust,
//! with the same assertions the fuzz targets make, plus a few thousand
//! seeded random mutations of every seed.

use std::fs;
use std::path::PathBuf;

use qkf::io;
use qkf::sim::builtin_scenario;
use qkf::{Diagnostics, FilterKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus(target: &str) -> Vec<String> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "empty corpus for {target}");
    files.iter().map(|p| fs::read_to_string(p).unwrap()).collect()
}

const TOKENS: &[&str] = &[
    "1e308", "-1e308", "0", "-0.0", "NaN", "null", "[]", "[[1]]", "{}", ",", "\"", "\n", "18446744073709551616",
    "-1", "1e-320", "3.0", "[[0.0,0.0]]",
];

fn mutate(seed: &str, rng: &mut ChaCha8Rng) -> String {
    let mut bytes = seed.as_bytes().to_vec();
    for _ in 0..rng.random_range(1..4) {
        let at = rng.random_range(0..=bytes.len());
        match rng.random_range(0..4) {
            0 if at < bytes.len() => {
                bytes.remove(at);
            }
            1 if at < bytes.len() => bytes[at] = rng.random(),
            2 => {
                let tok = TOKENS[rng.random_range(0..TOKENS.len())];
                bytes.splice(at..at, tok.bytes());
            }
            _ => {
                // Replace the number starting near `at` with a token.
                let start = bytes[at..].iter().position(|b| b.is_ascii_digit()).map(|p| p + at);
                if let Some(s) = start {
                    let end = bytes[s..].iter().position(|b| !(b.is_ascii_digit() || b".e-".contains(b))).map_or(bytes.len(), |p| p + s);
                    let tok = TOKENS[rng.random_range(0..TOKENS.len())];
                    bytes.splice(s..end, tok.bytes());
                }
            }
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

fn exercise(target: &str, check: impl Fn(&str)) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF022);
    for seed in corpus(target) {
        check(&seed);
        for _ in 0..1000 {
            check(&mutate(&seed, &mut rng));
        }
    }
}

fn check_scenario(text: &str) {
    if let Ok(cfg) = io::parse_scenario(text) {
        assert_eq!(io::parse_scenario(&io::scenario_to_json(&cfg)).unwrap(), cfg);
    }
}

fn check_measurements(text: &str) {
    match io::parse_measurement_lines(text) {
        Ok(records) => {
            for rec in records {
                assert_eq!(io::parse_measurement_line(&io::measurement_line(&rec)).unwrap(), rec);
            }
        }
        Err(e) => assert!(e.line >= 1 && e.line <= text.lines().count()),
    }
}

fn check_estimates(text: &str) {
    match io::parse_estimate_lines(text) {
        Ok(records) => {
            for rec in records {
                assert_eq!(io::parse_estimate_line(&io::estimate_line(&rec)).unwrap(), rec);
            }
        }
        Err(e) => assert!(e.line >= 1 && e.line <= text.lines().count()),
    }
}

fn check_manifest(text: &str) {
    if let Ok(m) = io::parse_manifest(text) {
        let _ = m.scenario();
        io::parse_manifest(&m.to_json()).unwrap();
    }
}

fn check_track(text: &str) {
    let Ok(records) = io::parse_measurement_lines(text) else { return };
    let cfg = builtin_scenario("moderate").unwrap();
    let filter_cfg = cfg.filter_config();
    for kind in [FilterKind::Sequential, FilterKind::Batch] {
        let mut est = cfg.prior;
        let mut diag = Diagnostics::default();
        for rec in records.iter().take(64) {
            est = kind.step(&est, &rec.measurements, &cfg.motion, &filter_cfg, &mut diag);
        }
    }
}

#[test]
fn scenario_config_corpus() {
    exercise("scenario_config", check_scenario);
    assert!(corpus("scenario_config").iter().any(|t| io::parse_scenario(t).is_ok()));
}

#[test]
fn measurement_lines_corpus() {
    exercise("measurement_lines", check_measurements);
}

#[test]
fn estimate_lines_corpus() {
    exercise("estimate_lines", check_estimates);
}

#[test]
fn manifest_corpus() {
    exercise("manifest", check_manifest);
}

#[test]
fn track_corpus() {
    exercise("track", check_track);
}
