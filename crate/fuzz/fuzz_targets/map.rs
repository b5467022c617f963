#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(template) = emd_core::parse_map("fuzz.csv", text) {
            // every household sits on a cell of the parsed grid
            let n = template.landscape.len();
            assert!(template.initial_households.iter().all(|h| h.farm_cell < n));
        }
    }
});
