#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(pv) = emd_core::parse_presence(text) {
        // canonical text reparses to the same presence
        let again = emd_core::parse_presence(&emd_core::text::format_presence(&pv)).unwrap();
        assert_eq!(again, pv);
    }
    if let Ok(rule) = emd_core::parse_rule(text) {
        assert!(rule.check_typing_within(emd_core::DepthBounds::new(1, usize::MAX)));
    }
});
