//! Typed tree construction and variation over any [`PrimitiveSet`].
//!
//! Depths count nodes, so a lone terminal has depth 1. Every operator
//! returns a well-typed tree within the requested bounds, falling back to
//! its input when no legal result exists.

use emd_core::rule::rule_primitives;
use emd_core::typed::SemType;
use emd_core::{check_typing, DepthBounds, Expr, PrimId, PrimitiveSet, RuleTree, SocialConfig};
use rand::seq::SliceRandom;
use rand::Rng;

/// Attempts made by rejection loops before giving up.
const RETRIES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builder {
    /// Leaves may appear at any level in `[min, max]`.
    Grow,
    /// Every leaf sits exactly at `max`.
    Full,
}

/// Build one subtree of type `t` in prefix order. `None` if the set has
/// no primitive that can close a branch at the required level.
pub fn build(
    set: &PrimitiveSet,
    t: SemType,
    min: usize,
    max: usize,
    builder: Builder,
    rng: &mut impl Rng,
) -> Option<Vec<PrimId>> {
    fn go(
        set: &PrimitiveSet,
        t: SemType,
        level: usize,
        min: usize,
        max: usize,
        builder: Builder,
        rng: &mut impl Rng,
        out: &mut Vec<PrimId>,
    ) -> Option<()> {
        let terms = set.terminals_of(t);
        let funcs = set.functions_of(t);
        let want_terminal = if level >= max {
            true
        } else if funcs.is_empty() {
            true
        } else if terms.is_empty() {
            false
        } else {
            match builder {
                Builder::Full => false,
                Builder::Grow if level < min => false,
                Builder::Grow => rng.gen_range(0..terms.len() + funcs.len()) < terms.len(),
            }
        };
        let id = if want_terminal {
            *terms.choose(rng)?
        } else {
            *funcs.choose(rng)?
        };
        out.push(id);
        for &p in &set.signature(id).param_types {
            go(set, p, level + 1, min, max, builder, rng, out)?;
        }
        Some(())
    }
    let mut out = Vec::new();
    go(set, t, 1, min, max, builder, rng, &mut out)?;
    Some(out)
}

/// Root-typed tree whose depth lies in `bounds`, resampled until it does.
pub fn build_tree(
    set: &PrimitiveSet,
    bounds: DepthBounds,
    target: usize,
    builder: Builder,
    rng: &mut impl Rng,
) -> Option<Expr> {
    for _ in 0..RETRIES {
        if let Some(nodes) = build(set, set.root_type(), bounds.min, target, builder, rng) {
            let e = Expr(nodes);
            if check_typing(set, &e, bounds) {
                return Some(e);
            }
        }
    }
    None
}

/// Half-and-half: even slots grow, odd slots full, target depth uniform in
/// the bounds.
pub fn half_and_half(
    set: &PrimitiveSet,
    bounds: DepthBounds,
    count: usize,
    rng: &mut impl Rng,
) -> Option<Vec<Expr>> {
    (0..count)
        .map(|i| {
            let builder = if i % 2 == 0 { Builder::Grow } else { Builder::Full };
            loop {
                let target = rng.gen_range(bounds.min..=bounds.max);
                if let Some(e) = build_tree(set, bounds, target, builder, rng) {
                    return Some(e);
                }
                // a full tree at this target may be unbuildable; grow widens the search
                if let Some(e) = build_tree(set, bounds, target, Builder::Grow, rng) {
                    return Some(e);
                }
                if bounds.min == bounds.max {
                    return None;
                }
            }
        })
        .collect()
}

/// Non-root node indices of `e` grouped by return type.
fn typed_points(set: &PrimitiveSet, e: &Expr) -> Vec<(SemType, usize)> {
    (1..e.len()).map(|i| (e.node_type(set, i), i)).collect()
}

/// Types that occur below the root in both trees, ascending.
pub fn common_types(set: &PrimitiveSet, a: &Expr, b: &Expr) -> Vec<SemType> {
    let ta: std::collections::BTreeSet<_> = typed_points(set, a).into_iter().map(|p| p.0).collect();
    let tb: std::collections::BTreeSet<_> = typed_points(set, b).into_iter().map(|p| p.0).collect();
    ta.intersection(&tb).copied().collect()
}

/// Swap subtrees rooted at two non-root nodes of a type chosen uniformly
/// from `common_types`. A child outside `bounds` is replaced by its parent.
pub fn crossover(
    set: &PrimitiveSet,
    a: &Expr,
    b: &Expr,
    bounds: DepthBounds,
    rng: &mut impl Rng,
) -> (Expr, Expr) {
    let types = common_types(set, a, b);
    let Some(&t) = types.choose(rng) else {
        return (a.clone(), b.clone());
    };
    crossover_at_type(set, a, b, t, bounds, rng)
}

fn crossover_at_type(
    set: &PrimitiveSet,
    a: &Expr,
    b: &Expr,
    t: SemType,
    bounds: DepthBounds,
    rng: &mut impl Rng,
) -> (Expr, Expr) {
    let pick = |e: &Expr, rng: &mut _| -> usize {
        let points: Vec<usize> = typed_points(set, e).into_iter().filter(|p| p.0 == t).map(|p| p.1).collect();
        *points.choose(rng).expect("type occurs in tree")
    };
    let ia = pick(a, rng);
    let ib = pick(b, rng);
    let ea = a.subtree_end(set, ia).expect("well-formed");
    let eb = b.subtree_end(set, ib).expect("well-formed");
    let ca = a.replace_subtree(set, ia, &b.0[ib..eb]);
    let cb = b.replace_subtree(set, ib, &a.0[ia..ea]);
    let keep = |child: Expr, parent: &Expr| if check_typing(set, &child, bounds) { child } else { parent.clone() };
    (keep(ca, a), keep(cb, b))
}

/// Replace the subtree at a uniformly chosen node with a freshly grown
/// subtree of the same type. Returns the input if no in-bounds
/// replacement is found.
pub fn mutate(set: &PrimitiveSet, e: &Expr, bounds: DepthBounds, rng: &mut impl Rng) -> Expr {
    let levels = e.levels(set);
    for _ in 0..RETRIES {
        let i = rng.gen_range(0..e.len());
        let room = bounds.max + 1 - levels[i].min(bounds.max);
        let Some(sub) = build(set, e.node_type(set, i), 1, room, Builder::Grow, rng) else {
            continue;
        };
        let out = e.replace_subtree(set, i, &sub);
        if check_typing(set, &out, bounds) {
            return out;
        }
    }
    e.clone()
}

fn random_social(rng: &mut impl Rng) -> SocialConfig {
    SocialConfig::ALL[rng.gen_range(0..SocialConfig::ALL.len())]
}

/// A different social selector, uniform over the other three.
pub fn other_social(current: SocialConfig, rng: &mut impl Rng) -> SocialConfig {
    let others: Vec<SocialConfig> = SocialConfig::ALL.iter().copied().filter(|&s| s != current).collect();
    *others.choose(rng).expect("four selectors")
}

/// Half-and-half rule population with uniformly drawn selectors.
pub fn init_rules(bounds: DepthBounds, count: usize, rng: &mut impl Rng) -> Vec<RuleTree> {
    let exprs = half_and_half(rule_primitives(), bounds, count, rng).expect("rule primitives build at every depth");
    exprs.into_iter().map(|e| RuleTree::new(random_social(rng), e)).collect()
}

/// Rule crossover. The selector acts as one more typed swap point, so it
/// is exchanged with the same chance as any shared expression type.
pub fn crossover_rules(a: &RuleTree, b: &RuleTree, bounds: DepthBounds, rng: &mut impl Rng) -> (RuleTree, RuleTree) {
    let set = rule_primitives();
    let types = common_types(set, &a.expr, &b.expr);
    let k = rng.gen_range(0..=types.len());
    if k == types.len() {
        return (RuleTree::new(b.social, a.expr.clone()), RuleTree::new(a.social, b.expr.clone()));
    }
    let (ea, eb) = crossover_at_type(set, &a.expr, &b.expr, types[k], bounds, rng);
    (RuleTree::new(a.social, ea), RuleTree::new(b.social, eb))
}

/// Rule mutation: with probability `social_rate` the selector changes,
/// otherwise a subtree is regrown.
pub fn mutate_rule(r: &RuleTree, bounds: DepthBounds, social_rate: f64, rng: &mut impl Rng) -> RuleTree {
    if rng.gen_bool(social_rate) {
        RuleTree::new(other_social(r.social, rng), r.expr.clone())
    } else {
        RuleTree::new(r.social, mutate(rule_primitives(), &r.expr, bounds, rng))
    }
}
