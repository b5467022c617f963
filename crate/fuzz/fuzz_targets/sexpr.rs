#![no_main]

use emd_core::SocialConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rule) = emd_core::rule::parse_sexpr(SocialConfig::All, text) {
        let shown = rule.expr.display(emd_core::rule::rule_primitives()).to_string();
        let again = emd_core::rule::parse_sexpr(SocialConfig::All, &shown).unwrap();
        assert_eq!(again.presence_vector(), rule.presence_vector());
    }
});
