use emd_core::rule::rule_primitives;
use emd_core::typed::{PrimitiveKind, SemType};
use emd_core::{check_typing, DepthBounds, Expr, PrimitiveSet, RuleTree, SocialConfig};
use emd_gp::ops::{self, Builder};
use emd_gp::{init_population, GpConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn population(size: usize, seed: u64) -> Vec<RuleTree> {
    init_population(&GpConfig { population_size: size, seed, ..GpConfig::default() }, 0)
}

#[test]
fn initial_population_is_typed() {
    let pop = population(50, 1);
    assert_eq!(pop.len(), 50);
    for r in &pop {
        assert!(r.check_typing(), "{r}");
        assert!((4..=10).contains(&r.depth()));
    }
    // both builders are used: full trees of depth d have 2^d - 1 nodes
    let full = pop.iter().filter(|r| r.expr.len() == (1 << r.depth()) - 1).count();
    assert!(full >= 25, "{full}");
    assert_eq!(pop, population(50, 1));
    assert_ne!(pop, population(50, 2));
}

#[test]
fn selectors_are_drawn_uniformly() {
    let pop = population(2000, 3);
    for s in SocialConfig::ALL {
        let n = pop.iter().filter(|r| r.social == s).count();
        assert!((400..600).contains(&n), "{s}: {n}");
    }
}

#[test]
fn collapsed_depth_range() {
    let cfg = GpConfig { population_size: 40, depth_min: 4, depth_max: 4, ..GpConfig::default() };
    let pop = init_population(&cfg, 0);
    assert!(pop.iter().all(|r| r.depth() == 4));
}

#[test]
fn thousand_crossovers_stay_typed() {
    let pop = population(100, 5);
    let mut r = rng(6);
    let bounds = DepthBounds::default();
    let mut swapped = 0;
    for i in 0..1000 {
        let a = &pop[i % 100];
        let b = &pop[(i * 7 + 3) % 100];
        let (c, d) = ops::crossover_rules(a, b, bounds, &mut r);
        for child in [&c, &d] {
            assert!(child.check_typing(), "{child}");
            assert!((4..=10).contains(&child.depth()));
        }
        swapped += usize::from(c.expr != a.expr);
    }
    assert!(swapped > 300, "{swapped}");
}

#[test]
fn crossover_is_deterministic() {
    let pop = population(2, 8);
    let once = |s| ops::crossover_rules(&pop[0], &pop[1], DepthBounds::default(), &mut rng(s));
    assert_eq!(once(1), once(1));
}

/// Root type `score`; `wrap_flag: flag -> score` and `wrap_num: num -> score`.
fn two_branch_set() -> (PrimitiveSet, Expr, Expr) {
    let mut set = PrimitiveSet::new("score");
    let flag = set.add_type("flag");
    let num = set.add_type("num");
    let score = SemType(0);
    let t = set.add_primitive("t", vec![], flag, PrimitiveKind::Factor);
    let one = set.add_primitive("one", vec![], num, PrimitiveKind::Factor);
    let wf = set.add_primitive("wrap_flag", vec![flag], score, PrimitiveKind::Operator);
    let wn = set.add_primitive("wrap_num", vec![num], score, PrimitiveKind::Operator);
    (set, Expr(vec![wf, t]), Expr(vec![wn, one]))
}

#[test]
fn no_shared_type_returns_parents() {
    let (set, a, b) = two_branch_set();
    let bounds = DepthBounds::new(1, 10);
    assert!(check_typing(&set, &a, bounds) && check_typing(&set, &b, bounds));
    assert!(ops::common_types(&set, &a, &b).is_empty());
    for s in 0..20 {
        assert_eq!(ops::crossover(&set, &a, &b, bounds, &mut rng(s)), (a.clone(), b.clone()));
    }
}

#[test]
fn crossover_only_swaps_matching_types() {
    let (set, a, _) = two_branch_set();
    let bounds = DepthBounds::new(1, 10);
    let mut r = rng(1);
    let (c, d) = ops::crossover(&set, &a, &a, bounds, &mut r);
    assert!(check_typing(&set, &c, bounds) && check_typing(&set, &d, bounds));
}

#[test]
fn thousand_mutations_stay_typed() {
    let pop = population(50, 9);
    let mut r = rng(10);
    let mut changed = 0;
    for i in 0..1000 {
        let m = ops::mutate_rule(&pop[i % 50], DepthBounds::default(), 0.1, &mut r);
        assert!(m.check_typing(), "{m}");
        changed += usize::from(m != pop[i % 50]);
    }
    assert!(changed > 700, "{changed}");
}

#[test]
fn mutating_a_terminal_yields_typed_tree() {
    // depth-4 tree; any replacement at a leaf must keep depth within bounds
    let set = rule_primitives();
    let e = ops::build_tree(set, DepthBounds::new(4, 4), 4, Builder::Full, &mut rng(0)).unwrap();
    for s in 0..200 {
        let m = ops::mutate(set, &e, DepthBounds::default(), &mut rng(s));
        assert!(check_typing(set, &m, DepthBounds::default()));
    }
}

#[test]
fn mutation_is_deterministic() {
    let pop = population(1, 4);
    let once = |s| ops::mutate_rule(&pop[0], DepthBounds::default(), 0.1, &mut rng(s));
    assert_eq!(once(3), once(3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn variation_closure(seed in any::<u64>(), min in 1usize..6, extra in 0usize..5) {
        let bounds = DepthBounds::new(min, min + extra);
        let mut r = rng(seed);
        let pop = ops::init_rules(bounds, 6, &mut r);
        for p in &pop {
            prop_assert!(p.check_typing_within(bounds));
        }
        let (a, b) = ops::crossover_rules(&pop[0], &pop[1], bounds, &mut r);
        let m = ops::mutate_rule(&pop[2], bounds, 0.5, &mut r);
        for t in [a, b, m] {
            prop_assert!(t.check_typing_within(bounds), "{}", t);
        }
    }
}
