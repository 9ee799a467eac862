#![no_main]

use libfuzzer_sys::fuzz_target;
use tandem_cli::grid::{parse_grid, MAX_POINTS};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = parse_grid(text) {
        assert!(!g.is_empty() && g.len() <= MAX_POINTS);
        assert!(g.iter().all(|x| x.is_finite()));
    }
});
