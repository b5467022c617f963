#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = emd_gp::parse_checkpoint(text) {
        assert_eq!(emd_gp::parse_checkpoint(&c.to_text()).unwrap(), c);
    }
});
