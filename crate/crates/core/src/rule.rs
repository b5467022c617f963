//! Farm-plot selection rules: a social selector plus a score-typed
//! expression over the nine factors and the binary operators `+` and `-`.

use std::fmt;
use std::ops::{Add, Index, Sub};
use std::sync::OnceLock;

use crate::factor::{Factor, SocialConfig, FACTOR_COUNT};
use crate::typed::{check_typing, DepthBounds, Expr, PrimId, PrimitiveKind, PrimitiveSet};
use crate::RuleError;

pub const ADD: PrimId = PrimId(FACTOR_COUNT as u16);
pub const SUB: PrimId = PrimId(FACTOR_COUNT as u16 + 1);

/// The factor language: one semantic type `score`, the nine factor
/// terminals (ids `0..9` in [`Factor::ALL`] order) and `+`, `-`.
pub fn rule_primitives() -> &'static PrimitiveSet {
    static SET: OnceLock<PrimitiveSet> = OnceLock::new();
    SET.get_or_init(|| {
        let mut set = PrimitiveSet::new("score");
        let score = set.root_type();
        for f in Factor::ALL {
            set.add_primitive(f.name(), vec![], score, PrimitiveKind::Factor);
        }
        set.add_primitive("+", vec![score, score], score, PrimitiveKind::Operator);
        set.add_primitive("-", vec![score, score], score, PrimitiveKind::Operator);
        set
    })
}

pub fn factor_prim(f: Factor) -> PrimId {
    PrimId(f.index() as u16)
}

pub fn prim_factor(id: PrimId) -> Option<Factor> {
    Factor::from_index(id.0 as usize)
}

/// Signed net coefficient of every factor in a rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Presence(pub [i32; FACTOR_COUNT]);

impl Presence {
    pub fn get(&self, f: Factor) -> i32 {
        self.0[f.index()]
    }

    pub fn set(&mut self, f: Factor, v: i32) {
        self.0[f.index()] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn from_pairs(pairs: &[(Factor, i32)]) -> Self {
        let mut p = Presence::default();
        for &(f, c) in pairs {
            p.0[f.index()] += c;
        }
        p
    }
}

impl Index<Factor> for Presence {
    type Output = i32;

    fn index(&self, f: Factor) -> &i32 {
        &self.0[f.index()]
    }
}

impl Add for Presence {
    type Output = Presence;

    fn add(mut self, rhs: Presence) -> Presence {
        self.0.iter_mut().zip(rhs.0).for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for Presence {
    type Output = Presence;

    fn sub(mut self, rhs: Presence) -> Presence {
        self.0.iter_mut().zip(rhs.0).for_each(|(a, b)| *a -= b);
        self
    }
}

/// A rule's presence together with its social configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PresenceVector {
    pub social: SocialConfig,
    pub counts: Presence,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleTree {
    pub social: SocialConfig,
    pub expr: Expr,
}

impl RuleTree {
    pub fn new(social: SocialConfig, expr: Expr) -> Self {
        Self { social, expr }
    }

    /// Typing and the default depth bounds `[4, 10]`.
    pub fn check_typing(&self) -> bool {
        check_typing(rule_primitives(), &self.expr, DepthBounds::default())
    }

    pub fn check_typing_within(&self, bounds: DepthBounds) -> bool {
        check_typing(rule_primitives(), &self.expr, bounds)
    }

    pub fn depth(&self) -> usize {
        self.expr.depth(rule_primitives())
    }

    /// Net signed count of each factor terminal; the sign flips on the
    /// right operand of every `-`.
    pub fn presence(&self) -> Presence {
        let set = rule_primitives();
        let mut counts = Presence::default();
        // sign of each still-open operand slot, innermost last
        let mut pending: Vec<i32> = vec![1];
        for &id in self.expr.nodes() {
            let Some(sign) = pending.pop() else { break };
            if let Some(f) = prim_factor(id) {
                counts.0[f.index()] += sign;
            } else if id == ADD {
                pending.push(sign);
                pending.push(sign);
            } else if id == SUB {
                debug_assert_eq!(set.signature(id).arity(), 2);
                // right operand is consumed after the left
                pending.push(-sign);
                pending.push(sign);
            }
        }
        counts
    }

    pub fn presence_vector(&self) -> PresenceVector {
        PresenceVector {
            social: self.social,
            counts: self.presence(),
        }
    }

    /// Recursive evaluation of the expression over per-factor sub-scores.
    pub fn score(&self, subscores: &[f64; FACTOR_COUNT]) -> f64 {
        fn go(nodes: &[PrimId], pos: &mut usize, s: &[f64; FACTOR_COUNT]) -> f64 {
            let id = nodes[*pos];
            *pos += 1;
            if let Some(f) = prim_factor(id) {
                return s[f.index()];
            }
            let left = go(nodes, pos, s);
            let right = go(nodes, pos, s);
            if id == ADD {
                left + right
            } else {
                left - right
            }
        }
        let mut pos = 0;
        go(self.expr.nodes(), &mut pos, subscores)
    }

    /// Build a well-typed tree with the given net presence and a depth
    /// inside the default bounds.
    ///
    /// Positive and negative terms go into two balanced sums joined by `-`.
    /// Cancelling pairs `+F ... -F` pad shallow trees up to the minimum
    /// depth without changing the presence.
    pub fn from_presence(social: SocialConfig, presence: &Presence) -> Result<RuleTree, RuleError> {
        let bounds = DepthBounds::default();
        let mut pos: Vec<Factor> = Vec::new();
        let mut neg: Vec<Factor> = Vec::new();
        for f in Factor::ALL {
            let c = presence.get(f);
            let target = if c > 0 { &mut pos } else { &mut neg };
            target.extend(std::iter::repeat(f).take(c.unsigned_abs() as usize));
        }
        // each side can hold at most 2^(max-2) leaves
        let side_cap = 1usize << (bounds.max - 2);
        if pos.len() > side_cap || neg.len() > side_cap {
            return Err(RuleError::TooLarge {
                terms: pos.len() + neg.len(),
            });
        }
        let pad = pos.first().or(neg.first()).copied().unwrap_or(Factor::Dist);
        if pos.is_empty() {
            pos.push(pad);
            neg.push(pad);
        }
        loop {
            let expr = join(&pos, &neg);
            let tree = RuleTree::new(social, expr);
            let depth = tree.depth();
            if depth >= bounds.min {
                if depth > bounds.max {
                    return Err(RuleError::TooLarge {
                        terms: pos.len() + neg.len(),
                    });
                }
                return Ok(tree);
            }
            pos.push(pad);
            neg.push(pad);
        }
    }
}

fn balanced_sum(terms: &[Factor], out: &mut Vec<PrimId>) {
    if terms.len() == 1 {
        out.push(factor_prim(terms[0]));
        return;
    }
    let mid = terms.len().div_ceil(2);
    out.push(ADD);
    balanced_sum(&terms[..mid], out);
    balanced_sum(&terms[mid..], out);
}

fn join(pos: &[Factor], neg: &[Factor]) -> Expr {
    let mut nodes = Vec::with_capacity(2 * (pos.len() + neg.len()));
    if neg.is_empty() {
        balanced_sum(pos, &mut nodes);
    } else {
        nodes.push(SUB);
        balanced_sum(pos, &mut nodes);
        balanced_sum(neg, &mut nodes);
    }
    Expr(nodes)
}

impl fmt::Display for RuleTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::text::format_rule(self))
    }
}

/// Parse an s-expression such as `(+ F_Qual (- F_Dist F_Dry))`.
pub fn parse_sexpr(social: SocialConfig, text: &str) -> Result<RuleTree, RuleError> {
    let set = rule_primitives();
    let spaced = text.replace('(', " ( ").replace(')', " ) ");
    let mut nodes = Vec::new();
    for tok in spaced.split_whitespace() {
        match tok {
            "(" | ")" => {}
            name => nodes.push(
                set.find(name)
                    .ok_or_else(|| RuleError::Syntax(format!("unknown primitive `{name}`")))?,
            ),
        }
    }
    let tree = RuleTree::new(social, Expr(nodes));
    if !check_typing(set, &tree.expr, DepthBounds::new(1, usize::MAX)) {
        return Err(RuleError::Syntax(format!("ill-typed expression `{text}`")));
    }
    Ok(tree)
}
