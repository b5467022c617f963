#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(rows) = emd_cli::records::parse_records(text) {
            assert!(rows.iter().all(|r| r.rmse.is_finite() && r.rmse >= 0.0));
        }
    }
});
