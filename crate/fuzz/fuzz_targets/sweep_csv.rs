#![no_main]

use libfuzzer_sys::fuzz_target;
use tandem_core::csvio::parse_sweep_csv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = parse_sweep_csv(text) {
        if let Some(best) = t.argmax {
            assert!(t.rows.iter().any(|r| r.a == best.a && r.b == best.b));
        }
    }
});
