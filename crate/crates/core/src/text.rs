//! Canonical rule text: `argmax[<S>](<signed-coefficient sum>)`.
//!
//! ```text
//! rule    = "argmax[" social "](" body ")"
//! social  = "S_All" | "S_Fam" | "S_Neigh" | "S_Perf"
//! body    = "0" | term { ("+" | "-") term }
//! term    = [ "-" ] [ digits [ "*" ] ] factor
//! factor  = "F_Dist" | "F_Dry" | "F_Qual" | "F_Yield" | "F_Water"
//!         | "F_Soc" | "F_HAge" | "F_HAgri" | "F_Mig"
//! ```
//!
//! [`format_rule`] writes every nonzero factor once, in canonical factor
//! order, with an explicit coefficient (`-1*F_Dist + 2*F_Mig`). The parser
//! also accepts omitted coefficients, `5F_Soc`, repeated factors (summed)
//! and arbitrary whitespace.

use crate::factor::{Factor, SocialConfig};
use crate::rule::{Presence, PresenceVector, RuleTree};
use crate::RuleError;

pub fn format_presence(pv: &PresenceVector) -> String {
    let mut body = String::new();
    for f in Factor::ALL {
        let c = pv.counts.get(f);
        if c == 0 {
            continue;
        }
        if body.is_empty() {
            body.push_str(&format!("{c}*{}", f.name()));
        } else if c > 0 {
            body.push_str(&format!(" + {c}*{}", f.name()));
        } else {
            body.push_str(&format!(" - {}*{}", -c, f.name()));
        }
    }
    if body.is_empty() {
        body.push('0');
    }
    format!("argmax[{}]({body})", pv.social.name())
}

pub fn format_rule(rule: &RuleTree) -> String {
    format_presence(&rule.presence_vector())
}

/// Parse rule text into its social configuration and net presence.
pub fn parse_presence(text: &str) -> Result<PresenceVector, RuleError> {
    let err = |msg: &str| RuleError::Syntax(format!("{msg} in `{text}`"));
    let s = text.trim();
    let rest = s.strip_prefix("argmax").ok_or_else(|| err("expected `argmax`"))?;
    let rest = rest.trim_start().strip_prefix('[').ok_or_else(|| err("expected `[`"))?;
    let close = rest.find(']').ok_or_else(|| err("expected `]`"))?;
    let social: SocialConfig = rest[..close].trim().parse().map_err(|e: String| err(&e))?;
    let rest = rest[close + 1..].trim_start();
    let body = rest
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| err("expected parenthesised body"))?;

    let mut counts = Presence::default();
    let body = body.trim();
    if body == "0" {
        return Ok(PresenceVector { social, counts });
    }
    let mut cur = Cursor { s: body.as_bytes(), i: 0 };
    let mut first = true;
    loop {
        cur.skip_ws();
        if cur.done() {
            if first {
                return Err(err("empty body"));
            }
            break;
        }
        let mut sign = 1i32;
        if !first {
            match cur.bump() {
                Some(b'+') => {}
                Some(b'-') => sign = -1,
                _ => return Err(err("expected `+` or `-` between terms")),
            }
            cur.skip_ws();
        }
        if cur.peek() == Some(b'-') {
            cur.bump();
            sign = -sign;
            cur.skip_ws();
        }
        let coef = match cur.digits() {
            Some(d) => {
                let v: i32 = d.parse().map_err(|_| err("coefficient out of range"))?;
                cur.skip_ws();
                if cur.peek() == Some(b'*') {
                    cur.bump();
                    cur.skip_ws();
                }
                v
            }
            None => 1,
        };
        let name = cur.ident();
        if name.is_empty() {
            // a lone integer term such as the zero marker is not a factor
            return Err(err("expected factor name"));
        }
        let factor: Factor = name.parse().map_err(|e: String| err(&e))?;
        let delta = coef.checked_mul(sign).ok_or_else(|| err("coefficient out of range"))?;
        let slot = &mut counts.0[factor.index()];
        *slot = slot.checked_add(delta).ok_or_else(|| err("coefficient out of range"))?;
        first = false;
    }
    Ok(PresenceVector { social, counts })
}

/// Parse rule text and materialize a typed tree with that presence.
pub fn parse_rule(text: &str) -> Result<RuleTree, RuleError> {
    let pv = parse_presence(text)?;
    RuleTree::from_presence(pv.social, &pv.counts)
}

struct Cursor<'a> {
    s: &'a [u8],
    i: usize,
}

impl Cursor<'_> {
    fn done(&self) -> bool {
        self.i >= self.s.len()
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.i).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.i += 1;
        Some(b)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|b| b.is_ascii_whitespace()) {
            self.i += 1;
        }
    }

    fn digits(&mut self) -> Option<&str> {
        let start = self.i;
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.i += 1;
        }
        (self.i > start).then(|| std::str::from_utf8(&self.s[start..self.i]).unwrap())
    }

    fn ident(&mut self) -> &str {
        let start = self.i;
        while self.peek().is_some_and(|b| b.is_ascii_alphanumeric() || b == b'_') {
            self.i += 1;
        }
        std::str::from_utf8(&self.s[start..self.i]).unwrap()
    }
}
