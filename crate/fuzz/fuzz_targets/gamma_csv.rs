#![no_main]

use libfuzzer_sys::fuzz_target;
use tandem_core::csvio::{check_gamma_rows, parse_gamma_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_gamma_csv(text) {
        assert!(!rows.is_empty());
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.k, i);
        }
        let _ = check_gamma_rows(&rows, 0.1, None);
    }
});
