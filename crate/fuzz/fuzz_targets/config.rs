#![no_main]

use emd_cli::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::parse(text) {
        // the canonical form is a fixed point
        let again = ExperimentConfig::parse(&cfg.canonical()).unwrap();
        assert_eq!(again.canonical(), cfg.canonical());
    }
});
