//! Strongly-typed primitive sets and prefix-encoded expression trees.
//!
//! An [`Expr`] stores primitives in prefix (pre-order) layout, so every
//! subtree is a contiguous slice. A child may occupy parameter slot `k` of
//! its parent only when its return type equals the parent's `k`-th
//! parameter type.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SemType(pub u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimId(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimitiveKind {
    Factor,
    Operator,
    SocialConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorSignature {
    pub name: String,
    pub param_types: Vec<SemType>,
    pub return_type: SemType,
    pub kind: PrimitiveKind,
}

impl FactorSignature {
    pub fn arity(&self) -> usize {
        self.param_types.len()
    }

    /// Whether `child` may be attached at parameter slot `slot`.
    pub fn accepts(&self, slot: usize, child: &FactorSignature) -> bool {
        self.param_types.get(slot) == Some(&child.return_type)
    }
}

/// Inclusive bounds on tree depth, counted in nodes along the longest
/// root-to-leaf path (a lone terminal has depth 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DepthBounds {
    pub min: usize,
    pub max: usize,
}

impl DepthBounds {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, depth: usize) -> bool {
        (self.min..=self.max).contains(&depth)
    }
}

impl Default for DepthBounds {
    fn default() -> Self {
        Self::new(4, 10)
    }
}

#[derive(Debug, Clone)]
pub struct PrimitiveSet {
    type_names: Vec<String>,
    prims: Vec<FactorSignature>,
    root_type: SemType,
}

impl PrimitiveSet {
    pub fn new(root_type_name: &str) -> Self {
        Self {
            type_names: vec![root_type_name.to_string()],
            prims: Vec::new(),
            root_type: SemType(0),
        }
    }

    pub fn add_type(&mut self, name: &str) -> SemType {
        self.type_names.push(name.to_string());
        SemType((self.type_names.len() - 1) as u8)
    }

    pub fn add_primitive(
        &mut self,
        name: &str,
        param_types: Vec<SemType>,
        return_type: SemType,
        kind: PrimitiveKind,
    ) -> PrimId {
        self.prims.push(FactorSignature {
            name: name.to_string(),
            param_types,
            return_type,
            kind,
        });
        PrimId((self.prims.len() - 1) as u16)
    }

    pub fn root_type(&self) -> SemType {
        self.root_type
    }

    pub fn type_name(&self, t: SemType) -> &str {
        &self.type_names[t.0 as usize]
    }

    pub fn signature(&self, id: PrimId) -> &FactorSignature {
        &self.prims[id.0 as usize]
    }

    pub fn get(&self, id: PrimId) -> Option<&FactorSignature> {
        self.prims.get(id.0 as usize)
    }

    pub fn len(&self) -> usize {
        self.prims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prims.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = PrimId> + '_ {
        (0..self.prims.len()).map(|i| PrimId(i as u16))
    }

    pub fn terminals_of(&self, t: SemType) -> Vec<PrimId> {
        self.ids()
            .filter(|&id| {
                let s = self.signature(id);
                s.return_type == t && s.arity() == 0
            })
            .collect()
    }

    pub fn functions_of(&self, t: SemType) -> Vec<PrimId> {
        self.ids()
            .filter(|&id| {
                let s = self.signature(id);
                s.return_type == t && s.arity() > 0
            })
            .collect()
    }

    pub fn find(&self, name: &str) -> Option<PrimId> {
        self.ids().find(|&id| self.signature(id).name == name)
    }
}

/// A tree of primitives in prefix order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Expr(pub Vec<PrimId>);

impl Expr {
    pub fn nodes(&self) -> &[PrimId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index one past the end of the subtree rooted at `start`, or `None`
    /// if the encoding runs out of nodes first.
    pub fn subtree_end(&self, set: &PrimitiveSet, start: usize) -> Option<usize> {
        let mut open = 1usize;
        let mut i = start;
        while open > 0 {
            let id = *self.0.get(i)?;
            open = open - 1 + set.get(id)?.arity();
            i += 1;
        }
        Some(i)
    }

    /// Level of every node (root = 1). Assumes a structurally complete tree.
    pub fn levels(&self, set: &PrimitiveSet) -> Vec<usize> {
        let mut levels = Vec::with_capacity(self.0.len());
        // stack of (level, remaining children) for open parents
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for &id in &self.0 {
            let level = stack.last().map_or(1, |&(l, _)| l + 1);
            levels.push(level);
            if let Some(top) = stack.last_mut() {
                top.1 -= 1;
            }
            while matches!(stack.last(), Some(&(_, 0))) {
                stack.pop();
            }
            let arity = set.signature(id).arity();
            if arity > 0 {
                stack.push((level, arity));
            }
        }
        levels
    }

    pub fn depth(&self, set: &PrimitiveSet) -> usize {
        self.levels(set).into_iter().max().unwrap_or(0)
    }

    /// Return type of the node at `index`.
    pub fn node_type(&self, set: &PrimitiveSet, index: usize) -> SemType {
        set.signature(self.0[index]).return_type
    }

    /// Replace the subtree at `start` with `replacement`.
    pub fn replace_subtree(&self, set: &PrimitiveSet, start: usize, replacement: &[PrimId]) -> Expr {
        let end = self.subtree_end(set, start).expect("well-formed expression");
        let mut nodes = Vec::with_capacity(self.0.len() - (end - start) + replacement.len());
        nodes.extend_from_slice(&self.0[..start]);
        nodes.extend_from_slice(replacement);
        nodes.extend_from_slice(&self.0[end..]);
        Expr(nodes)
    }

    pub fn display<'a>(&'a self, set: &'a PrimitiveSet) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, set }
    }
}

/// Structural and type check: every edge obeys the slot typing rule, the
/// root returns the set's root type, no node is missing or left over, and
/// the depth lies within `bounds`.
pub fn check_typing(set: &PrimitiveSet, expr: &Expr, bounds: DepthBounds) -> bool {
    fn walk(
        set: &PrimitiveSet,
        nodes: &[PrimId],
        pos: &mut usize,
        expected: SemType,
        level: usize,
        max_level: &mut usize,
    ) -> bool {
        let Some(&id) = nodes.get(*pos) else {
            return false;
        };
        let Some(sig) = set.get(id) else {
            return false;
        };
        if sig.return_type != expected || sig.kind == PrimitiveKind::SocialConfig {
            return false;
        }
        *pos += 1;
        *max_level = (*max_level).max(level);
        sig.param_types
            .iter()
            .all(|&t| walk(set, nodes, pos, t, level + 1, max_level))
    }

    let mut pos = 0;
    let mut depth = 0;
    walk(set, &expr.0, &mut pos, set.root_type(), 1, &mut depth)
        && pos == expr.0.len()
        && bounds.contains(depth)
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    set: &'a PrimitiveSet,
}

impl fmt::Display for ExprDisplay<'_> {
    /// S-expression form, e.g. `(+ F_Qual (- F_Dist F_Dry))`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(
            d: &ExprDisplay<'_>,
            pos: &mut usize,
            f: &mut fmt::Formatter<'_>,
        ) -> fmt::Result {
            let Some(&id) = d.expr.0.get(*pos) else {
                return f.write_str("?");
            };
            *pos += 1;
            let sig = d.set.signature(id);
            if sig.arity() == 0 {
                return f.write_str(&sig.name);
            }
            write!(f, "({}", sig.name)?;
            for _ in 0..sig.arity() {
                f.write_str(" ")?;
                go(d, pos, f)?;
            }
            f.write_str(")")
        }
        let mut pos = 0;
        go(self, &mut pos, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (PrimitiveSet, PrimId, PrimId, PrimId) {
        let mut set = PrimitiveSet::new("num");
        let num = set.root_type();
        let x = set.add_primitive("x", vec![], num, PrimitiveKind::Factor);
        let add = set.add_primitive("+", vec![num, num], num, PrimitiveKind::Operator);
        let flag = set.add_type("flag");
        let t = set.add_primitive("t", vec![], flag, PrimitiveKind::Factor);
        (set, x, add, t)
    }

    #[test]
    fn subtree_end_and_levels() {
        let (set, x, add, _) = toy();
        // (+ x (+ x x))
        let e = Expr(vec![add, x, add, x, x]);
        assert_eq!(e.subtree_end(&set, 0), Some(5));
        assert_eq!(e.subtree_end(&set, 1), Some(2));
        assert_eq!(e.subtree_end(&set, 2), Some(5));
        assert_eq!(e.levels(&set), vec![1, 2, 2, 3, 3]);
        assert_eq!(e.depth(&set), 3);
        assert_eq!(e.display(&set).to_string(), "(+ x (+ x x))");
    }

    #[test]
    fn typing_rejects_wrong_slot_type_and_arity() {
        let (set, x, add, t) = toy();
        let any = DepthBounds::new(1, 10);
        assert!(check_typing(&set, &Expr(vec![add, x, x]), any));
        assert!(!check_typing(&set, &Expr(vec![add, x, t]), any));
        assert!(!check_typing(&set, &Expr(vec![add, x]), any));
        assert!(!check_typing(&set, &Expr(vec![add, x, x, x]), any));
        assert!(!check_typing(&set, &Expr(vec![t]), any));
        assert!(!check_typing(&set, &Expr(vec![]), any));
        assert!(!check_typing(&set, &Expr(vec![PrimId(99)]), any));
    }

    #[test]
    fn typing_enforces_depth_bounds() {
        let (set, x, add, _) = toy();
        let e = Expr(vec![add, x, x]);
        assert!(check_typing(&set, &e, DepthBounds::new(2, 2)));
        assert!(!check_typing(&set, &e, DepthBounds::new(3, 10)));
        assert!(!check_typing(&set, &e, DepthBounds::new(1, 1)));
    }

    #[test]
    fn replace_subtree_splices() {
        let (set, x, add, _) = toy();
        let e = Expr(vec![add, x, x]);
        let r = e.replace_subtree(&set, 2, &[add, x, x]);
        assert_eq!(r, Expr(vec![add, x, add, x, x]));
    }
}
