#![no_main]

use libfuzzer_sys::fuzz_target;
use tandem_cli::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_toml_str(text) {
        if let Ok(p) = cfg.model() {
            assert!(p.q > 0.0 && p.c1 > 0.0 && p.c2 > 0.0);
        }
    }
});
