//! Reduced ordered BDD manager.
//!
//! Hash-consed node store with the reduce rules folded into [`BddManager::mk`]:
//! no node ever has `low == high`, and no two stored nodes share
//! `(level, low, high)`, so every function has exactly one root handle per
//! manager and order. Nodes store their *level* (position in the current
//! order), which is what makes [`BddManager::swap_adjacent`] a local
//! operation: the two affected levels are rewritten in place and every
//! existing [`NodeId`] keeps representing the same Boolean function.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::cnf::{Cnf, Literal, VarId};

/// Handle to a node inside one manager. Handles are meaningless across
/// managers; indexing with a foreign handle panics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

/// The terminal for constant false.
pub const TERM0: NodeId = NodeId(0);
/// The terminal for constant true.
pub const TERM1: NodeId = NodeId(1);

impl NodeId {
    pub fn is_terminal(self) -> bool {
        self.0 <= 1
    }

    fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Sentinel level for terminals; compares greater than every decision level.
const TERMINAL_LEVEL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BddNode {
    pub level: u32,
    pub low: NodeId,
    pub high: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoolOp {
    And,
    Or,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BddError {
    #[error("order is not a permutation of 1..={n}: {detail}")]
    NotAPermutation { n: u32, detail: String },
    #[error("manager has {manager} variables, formula has {formula}")]
    VarCountMismatch { manager: u32, formula: u32 },
    #[error("bad order file line {line}: {content:?}")]
    BadOrderFile { line: usize, content: String },
    #[error("raw node {index}: {reason}")]
    BadRawNode { index: usize, reason: String },
}

/// Checks that `order` is a permutation of `1..=n`.
pub fn validate_order(n: u32, order: &[VarId]) -> Result<(), BddError> {
    if order.len() != n as usize {
        return Err(BddError::NotAPermutation {
            n,
            detail: format!("length {} != {}", order.len(), n),
        });
    }
    let mut seen = vec![false; n as usize + 1];
    for v in order {
        if v.0 < 1 || v.0 > n {
            return Err(BddError::NotAPermutation { n, detail: format!("variable {v} out of range") });
        }
        if seen[v.0 as usize] {
            return Err(BddError::NotAPermutation { n, detail: format!("variable {v} repeated") });
        }
        seen[v.0 as usize] = true;
    }
    Ok(())
}

/// Reduced ordered BDD store with a level-to-variable order.
#[derive(Debug)]
pub struct BddManager {
    /// level -> variable deciding at that level
    order: Vec<VarId>,
    /// variable index (1-based) -> level; slot 0 unused
    level_of: Vec<u32>,
    /// node store; indices 0 and 1 are the terminals
    nodes: Vec<BddNode>,
    /// (level, low, high) -> node, for all non-terminal stored nodes
    unique: HashMap<(u32, NodeId, NodeId), NodeId>,
    /// memo for apply; entries stay valid across reordering because handles
    /// keep their function
    apply_cache: HashMap<(BoolOp, NodeId, NodeId), NodeId>,
    not_cache: HashMap<NodeId, NodeId>,
}

impl BddManager {
    /// Creates an empty manager over `num_vars` variables decided in `order`
    /// (top level first).
    pub fn new(num_vars: u32, order: &[VarId]) -> Result<Self, BddError> {
        validate_order(num_vars, order)?;
        let mut level_of = vec![0u32; num_vars as usize + 1];
        for (lvl, v) in order.iter().enumerate() {
            level_of[v.0 as usize] = lvl as u32;
        }
        let terminal = BddNode { level: TERMINAL_LEVEL, low: TERM0, high: TERM0 };
        Ok(BddManager {
            order: order.to_vec(),
            level_of,
            nodes: vec![terminal, terminal],
            unique: HashMap::new(),
            apply_cache: HashMap::new(),
            not_cache: HashMap::new(),
        })
    }

    /// Manager with the identity order `1, 2, ..., n`.
    pub fn with_identity_order(num_vars: u32) -> Self {
        let order: Vec<VarId> = (1..=num_vars).map(VarId).collect();
        BddManager::new(num_vars, &order).expect("identity order is a permutation")
    }

    pub fn num_vars(&self) -> u32 {
        self.order.len() as u32
    }

    /// Current order, top level first.
    pub fn order(&self) -> &[VarId] {
        &self.order
    }

    pub fn level_of(&self, var: VarId) -> u32 {
        assert!(var.0 >= 1 && var.0 <= self.num_vars(), "variable {var} out of range");
        self.level_of[var.0 as usize]
    }

    pub fn var_at_level(&self, level: u32) -> VarId {
        self.order[level as usize]
    }

    pub fn node(&self, id: NodeId) -> BddNode {
        self.nodes[id.idx()]
    }

    /// Number of stored nodes including terminals and unreachable leftovers.
    pub fn store_len(&self) -> usize {
        self.nodes.len()
    }

    fn level(&self, id: NodeId) -> u32 {
        self.nodes[id.idx()].level
    }

    /// Find-or-create with the reduce rules folded in: `low == high` returns
    /// `low` unchanged, identical `(level, low, high)` requests return the
    /// identical handle. Panics if the children violate orderedness.
    pub fn mk(&mut self, level: u32, low: NodeId, high: NodeId) -> NodeId {
        if low == high {
            return low;
        }
        assert!(
            (level as usize) < self.order.len(),
            "mk: level {level} out of range"
        );
        assert!(
            self.level(low) > level && self.level(high) > level,
            "mk: children must sit strictly below level {level}"
        );
        let key = (level, low, high);
        if let Some(&id) = self.unique.get(&key) {
            return id;
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(BddNode { level, low, high });
        self.unique.insert(key, id);
        id
    }

    /// The single-variable function `v`.
    pub fn var(&mut self, v: VarId) -> NodeId {
        let level = self.level_of(v);
        self.mk(level, TERM0, TERM1)
    }

    /// The function of one literal.
    pub fn literal(&mut self, lit: Literal) -> NodeId {
        let level = self.level_of(lit.var);
        if lit.positive {
            self.mk(level, TERM0, TERM1)
        } else {
            self.mk(level, TERM1, TERM0)
        }
    }

    /// Boolean combination of two functions under the manager's order.
    pub fn apply(&mut self, op: BoolOp, f: NodeId, g: NodeId) -> NodeId {
        assert!(f.idx() < self.nodes.len() && g.idx() < self.nodes.len(), "foreign node handle");
        if let Some(t) = terminal_case(op, f, g) {
            return t;
        }
        // ops are commutative; canonicalize the key
        let key = if f <= g { (op, f, g) } else { (op, g, f) };
        if let Some(&r) = self.apply_cache.get(&key) {
            return r;
        }
        let (lf, lg) = (self.level(f), self.level(g));
        let top = lf.min(lg);
        let (f0, f1) = if lf == top {
            let n = self.nodes[f.idx()];
            (n.low, n.high)
        } else {
            (f, f)
        };
        let (g0, g1) = if lg == top {
            let n = self.nodes[g.idx()];
            (n.low, n.high)
        } else {
            (g, g)
        };
        let low = self.apply(op, f0, g0);
        let high = self.apply(op, f1, g1);
        let r = self.mk(top, low, high);
        self.apply_cache.insert(key, r);
        r
    }

    /// Negation (no complement edges; builds the dual diagram).
    pub fn not(&mut self, f: NodeId) -> NodeId {
        if f == TERM0 {
            return TERM1;
        }
        if f == TERM1 {
            return TERM0;
        }
        if let Some(&r) = self.not_cache.get(&f) {
            return r;
        }
        let n = self.nodes[f.idx()];
        let low = self.not(n.low);
        let high = self.not(n.high);
        let r = self.mk(n.level, low, high);
        self.not_cache.insert(f, r);
        r
    }

    /// OBDD of the conjunction of clause disjunctions. Clauses are combined
    /// in a balanced binary tree to bound intermediate growth.
    pub fn build_cnf(&mut self, cnf: &Cnf) -> Result<NodeId, BddError> {
        if cnf.num_vars() != self.num_vars() {
            return Err(BddError::VarCountMismatch {
                manager: self.num_vars(),
                formula: cnf.num_vars(),
            });
        }
        let mut clause_nodes = Vec::with_capacity(cnf.clauses().len());
        for clause in cnf.clauses() {
            let mut node = TERM0;
            for &lit in clause {
                let l = self.literal(lit);
                node = self.apply(BoolOp::Or, node, l);
            }
            clause_nodes.push(node);
        }
        Ok(self.conj_balanced(&clause_nodes))
    }

    fn conj_balanced(&mut self, items: &[NodeId]) -> NodeId {
        match items.len() {
            0 => TERM1,
            1 => items[0],
            n => {
                let (a, b) = items.split_at(n / 2);
                let left = self.conj_balanced(a);
                let right = self.conj_balanced(b);
                self.apply(BoolOp::And, left, right)
            }
        }
    }

    /// Count of distinct nodes reachable from `root`, terminals included.
    pub fn size(&self, root: NodeId) -> u64 {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![root];
        let mut count = 0u64;
        while let Some(id) = stack.pop() {
            if seen[id.idx()] {
                continue;
            }
            seen[id.idx()] = true;
            count += 1;
            if !id.is_terminal() {
                let n = self.nodes[id.idx()];
                stack.push(n.low);
                stack.push(n.high);
            }
        }
        count
    }

    /// Nodes reachable from `root` at each level (index = level). Terminals
    /// excluded. Drives the sifting heuristic.
    pub fn level_profile(&self, root: NodeId) -> Vec<u64> {
        let mut profile = vec![0u64; self.order.len()];
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            if seen[id.idx()] || id.is_terminal() {
                continue;
            }
            seen[id.idx()] = true;
            let n = self.nodes[id.idx()];
            profile[n.level as usize] += 1;
            stack.push(n.low);
            stack.push(n.high);
        }
        profile
    }

    /// Function value under a truth assignment (`assignment[i]` is the value
    /// of variable `i+1`).
    pub fn eval(&self, root: NodeId, assignment: &[bool]) -> bool {
        assert_eq!(assignment.len(), self.order.len(), "assignment length");
        let mut id = root;
        while !id.is_terminal() {
            let n = self.nodes[id.idx()];
            let var = self.order[n.level as usize];
            id = if assignment[(var.0 - 1) as usize] { n.high } else { n.low };
        }
        id == TERM1
    }

    /// Exchanges the variables at `level` and `level + 1`, rewriting the two
    /// affected levels in place. Every existing handle keeps representing the
    /// same function.
    ///
    /// Nodes at the upper level that do not depend on the rising variable
    /// sink one level unchanged; the rest are re-expanded around the rising
    /// variable with fresh or shared nodes at the lower level. Nodes at the
    /// lower level rise unchanged (some may become unreachable; there is no
    /// garbage collection).
    pub fn swap_adjacent(&mut self, level: u32) {
        let n = self.order.len() as u32;
        assert!(level + 1 < n, "swap_adjacent: level {level} out of range (n = {n})");
        let x = level;
        let y = level + 1;

        // snapshot the upper level; raise lower-level nodes to x
        let mut old_upper: Vec<usize> = Vec::new();
        for idx in 2..self.nodes.len() {
            let l = self.nodes[idx].level;
            if l == x {
                old_upper.push(idx);
            } else if l == y {
                // children are at levels >= x+2, so rising preserves order
                self.nodes[idx].level = x;
            }
        }
        // after the raise, a child at level x is exactly an old lower-level
        // node (old upper-level nodes are never children of their own level)

        let mut table_y: HashMap<(NodeId, NodeId), NodeId> = HashMap::new();
        let mut dependent: Vec<usize> = Vec::new();
        for &idx in &old_upper {
            let node = self.nodes[idx];
            let low_rises = !node.low.is_terminal() && self.level(node.low) == x;
            let high_rises = !node.high.is_terminal() && self.level(node.high) == x;
            if low_rises || high_rises {
                dependent.push(idx);
            } else {
                self.nodes[idx].level = y;
                table_y.insert((node.low, node.high), NodeId(idx as u32));
            }
        }

        for idx in dependent {
            let node = self.nodes[idx];
            let (f00, f01) = self.cofactor_pair(node.low, x);
            let (f10, f11) = self.cofactor_pair(node.high, x);
            let new_low = self.mk_local(y, f00, f10, &mut table_y);
            let new_high = self.mk_local(y, f01, f11, &mut table_y);
            debug_assert_ne!(new_low, new_high, "re-expansion cannot produce a redundant node");
            self.nodes[idx] = BddNode { level: x, low: new_low, high: new_high };
        }

        let u = self.order[x as usize];
        let v = self.order[y as usize];
        self.order.swap(x as usize, y as usize);
        self.level_of[u.0 as usize] = y;
        self.level_of[v.0 as usize] = x;
        self.rebuild_unique_table();
    }

    /// Children of `child` split on the variable rising to `upper`, or the
    /// node itself twice when it does not test that variable.
    fn cofactor_pair(&self, child: NodeId, upper: u32) -> (NodeId, NodeId) {
        if !child.is_terminal() && self.level(child) == upper {
            let n = self.nodes[child.idx()];
            (n.low, n.high)
        } else {
            (child, child)
        }
    }

    fn mk_local(
        &mut self,
        level: u32,
        low: NodeId,
        high: NodeId,
        table: &mut HashMap<(NodeId, NodeId), NodeId>,
    ) -> NodeId {
        if low == high {
            return low;
        }
        if let Some(&id) = table.get(&(low, high)) {
            return id;
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(BddNode { level, low, high });
        table.insert((low, high), id);
        id
    }

    fn rebuild_unique_table(&mut self) {
        self.unique.clear();
        for idx in 2..self.nodes.len() {
            let n = self.nodes[idx];
            let prev = self.unique.insert((n.level, n.low, n.high), NodeId(idx as u32));
            debug_assert!(prev.is_none(), "duplicate (level, low, high) in store");
        }
    }

    /// Realizes an arbitrary target order through adjacent swaps,
    /// bubble-sort style.
    pub fn reorder_to(&mut self, target: &[VarId]) -> Result<(), BddError> {
        validate_order(self.num_vars(), target)?;
        for pos in 0..target.len() {
            let mut cur = self.level_of(target[pos]) as usize;
            while cur > pos {
                self.swap_adjacent((cur - 1) as u32);
                cur -= 1;
            }
        }
        debug_assert_eq!(self.order, target);
        Ok(())
    }

    /// Imports an externally described ordered BDD, applying the reduce rules
    /// (redundant-test elimination and node sharing) on the way in.
    pub fn reduce_import(&mut self, raw: &RawBdd) -> Result<NodeId, BddError> {
        let mut memo: Vec<Option<NodeId>> = vec![None; raw.nodes.len()];
        self.import_ref(raw, raw.root, &mut memo)
    }

    fn import_ref(
        &mut self,
        raw: &RawBdd,
        r: RawRef,
        memo: &mut Vec<Option<NodeId>>,
    ) -> Result<NodeId, BddError> {
        let index = match r {
            RawRef::Term0 => return Ok(TERM0),
            RawRef::Term1 => return Ok(TERM1),
            RawRef::Node(i) => i,
        };
        let raw_node = *raw
            .nodes
            .get(index)
            .ok_or_else(|| BddError::BadRawNode { index, reason: "reference out of bounds".into() })?;
        if let Some(id) = memo[index] {
            return Ok(id);
        }
        if raw_node.level as usize >= self.order.len() {
            return Err(BddError::BadRawNode { index, reason: format!("level {} out of range", raw_node.level) });
        }
        for child in [raw_node.low, raw_node.high] {
            if let RawRef::Node(c) = child {
                let cl = raw
                    .nodes
                    .get(c)
                    .ok_or_else(|| BddError::BadRawNode { index, reason: "child out of bounds".into() })?
                    .level;
                if cl <= raw_node.level {
                    return Err(BddError::BadRawNode {
                        index,
                        reason: format!("child level {cl} not below {}", raw_node.level),
                    });
                }
            }
        }
        let low = self.import_ref(raw, raw_node.low, memo)?;
        let high = self.import_ref(raw, raw_node.high, memo)?;
        let id = self.mk(raw_node.level, low, high);
        memo[index] = Some(id);
        Ok(id)
    }

    /// GraphViz rendering: decision nodes labeled with their variable, dotted
    /// low edges, solid high edges, terminals as boxes.
    pub fn to_dot(&self, root: NodeId) -> String {
        let mut out = String::from("digraph bdd {\n  rankdir=TB;\n");
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![root];
        let mut by_level: Vec<Vec<NodeId>> = vec![Vec::new(); self.order.len()];
        let mut terminals = Vec::new();
        let mut edges = String::new();
        while let Some(id) = stack.pop() {
            if seen[id.idx()] {
                continue;
            }
            seen[id.idx()] = true;
            if id.is_terminal() {
                terminals.push(id);
                continue;
            }
            let n = self.nodes[id.idx()];
            by_level[n.level as usize].push(id);
            let _ = writeln!(edges, "  n{} -> n{} [style=dotted];", id.0, n.low.0);
            let _ = writeln!(edges, "  n{} -> n{} [style=solid];", id.0, n.high.0);
            stack.push(n.low);
            stack.push(n.high);
        }
        for t in terminals {
            let _ = writeln!(out, "  n{} [shape=box,label=\"{}\"];", t.0, t.0);
        }
        for (lvl, ids) in by_level.iter().enumerate() {
            if ids.is_empty() {
                continue;
            }
            let var = self.order[lvl];
            let mut ids = ids.clone();
            ids.sort_unstable();
            for id in &ids {
                let _ = writeln!(out, "  n{} [shape=circle,label=\"x{}\"];", id.0, var.0);
            }
            let rank: Vec<String> = ids.iter().map(|id| format!("n{}", id.0)).collect();
            let _ = writeln!(out, "  {{ rank=same; {}; }}", rank.join("; "));
        }
        out.push_str(&edges);
        out.push_str("}\n");
        out
    }

    /// Panics if a store invariant is violated. Test aid.
    pub fn check_invariants(&self) {
        for idx in 2..self.nodes.len() {
            let n = self.nodes[idx];
            assert!((n.level as usize) < self.order.len(), "node {idx}: bad level");
            assert_ne!(n.low, n.high, "node {idx}: redundant test");
            assert!(
                self.level(n.low) > n.level && self.level(n.high) > n.level,
                "node {idx}: orderedness violated"
            );
            assert_eq!(
                self.unique.get(&(n.level, n.low, n.high)),
                Some(&NodeId(idx as u32)),
                "node {idx}: unique table out of sync"
            );
        }
        let mut seen = vec![false; self.order.len() + 1];
        for v in &self.order {
            assert!(!seen[v.0 as usize], "order is not a permutation");
            seen[v.0 as usize] = true;
            assert_eq!(self.order[self.level_of(*v) as usize], *v, "level_of out of sync");
        }
    }
}

fn terminal_case(op: BoolOp, f: NodeId, g: NodeId) -> Option<NodeId> {
    if f == g {
        return Some(f);
    }
    match op {
        BoolOp::And => {
            if f == TERM0 || g == TERM0 {
                Some(TERM0)
            } else if f == TERM1 {
                Some(g)
            } else if g == TERM1 {
                Some(f)
            } else {
                None
            }
        }
        BoolOp::Or => {
            if f == TERM1 || g == TERM1 {
                Some(TERM1)
            } else if f == TERM0 {
                Some(g)
            } else if g == TERM0 {
                Some(f)
            } else {
                None
            }
        }
    }
}

/// Reference inside a [`RawBdd`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawRef {
    Term0,
    Term1,
    Node(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct RawNode {
    pub level: u32,
    pub low: RawRef,
    pub high: RawRef,
}

/// An externally described ordered BDD, possibly unreduced, for
/// [`BddManager::reduce_import`].
#[derive(Debug, Clone)]
pub struct RawBdd {
    pub nodes: Vec<RawNode>,
    pub root: RawRef,
}

/// Parses an order file: one variable per line, top level first. Blank lines
/// and `#` comments are ignored.
pub fn parse_order(text: &str) -> Result<Vec<VarId>, BddError> {
    let mut order = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: u32 = line
            .parse()
            .map_err(|_| BddError::BadOrderFile { line: i + 1, content: line.to_string() })?;
        if v == 0 {
            return Err(BddError::BadOrderFile { line: i + 1, content: line.to_string() });
        }
        order.push(VarId(v));
    }
    Ok(order)
}

/// Renders an order file accepted by [`parse_order`].
pub fn format_order(order: &[VarId]) -> String {
    let mut out = String::new();
    for v in order {
        let _ = writeln!(out, "{}", v.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::parse_dimacs;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn identity(n: u32) -> Vec<VarId> {
        (1..=n).map(VarId).collect()
    }

    /// The paper's interleaved order for the chain function, 1-based.
    fn interleaved(n: u32) -> Vec<VarId> {
        let mut order: Vec<VarId> = (1..=n).step_by(2).map(VarId).collect();
        order.extend((2..=n).step_by(2).map(VarId));
        order
    }

    /// x1 x2 | x3 x4 | ... as direct apply calls.
    fn chain(mgr: &mut BddManager, n: u32) -> NodeId {
        let mut acc = TERM0;
        for i in (1..=n).step_by(2) {
            let a = mgr.var(VarId(i));
            let b = mgr.var(VarId(i + 1));
            let pair = mgr.apply(BoolOp::And, a, b);
            acc = mgr.apply(BoolOp::Or, acc, pair);
        }
        acc
    }

    fn random_cnf(num_vars: u32, num_clauses: usize, rng: &mut impl Rng) -> Cnf {
        let mut clauses = Vec::new();
        for _ in 0..num_clauses {
            let width = rng.gen_range(1..=3).min(num_vars as usize);
            let mut vars: Vec<u32> = Vec::new();
            while vars.len() < width {
                let v = rng.gen_range(1..=num_vars);
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
            clauses.push(
                vars.into_iter()
                    .map(|v| Literal { var: VarId(v), positive: rng.gen_bool(0.5) })
                    .collect(),
            );
        }
        Cnf::new(num_vars, clauses).unwrap().normalize()
    }

    fn random_order(n: u32, rng: &mut impl Rng) -> Vec<VarId> {
        use rand::seq::SliceRandom;
        let mut order = identity(n);
        order.shuffle(rng);
        order
    }

    #[test]
    fn new_manager_validates_order() {
        assert!(BddManager::new(6, &identity(6)).is_ok());
        assert!(BddManager::new(6, &interleaved(6)).is_ok());
        let err = BddManager::new(2, &[VarId(1), VarId(1)]).unwrap_err();
        assert!(matches!(err, BddError::NotAPermutation { .. }));
    }

    #[test]
    fn mk_applies_reduce_rules() {
        let mut mgr = BddManager::with_identity_order(2);
        let x = mgr.var(VarId(2));
        assert_eq!(mgr.mk(0, x, x), x);
        let a = mgr.mk(0, x, TERM1);
        let b = mgr.mk(0, x, TERM1);
        assert_eq!(a, b);
    }

    #[test]
    fn var_built_twice_is_one_node() {
        let mut mgr = BddManager::with_identity_order(2);
        let before = mgr.store_len();
        let a = mgr.var(VarId(1));
        let b = mgr.var(VarId(1));
        assert_eq!(a, b);
        assert_eq!(mgr.store_len(), before + 1);
    }

    #[test]
    #[should_panic(expected = "children must sit strictly below")]
    fn mk_rejects_orderedness_violation() {
        let mut mgr = BddManager::with_identity_order(3);
        let top = mgr.var(VarId(1));
        mgr.mk(2, top, TERM1);
    }

    #[test]
    fn apply_identities() {
        let mut mgr = BddManager::with_identity_order(4);
        let c = random_cnf(4, 5, &mut ChaCha12Rng::seed_from_u64(1));
        let f = mgr.build_cnf(&c).unwrap();
        assert_eq!(mgr.apply(BoolOp::And, f, TERM1), f);
        let nf = mgr.not(f);
        assert_eq!(mgr.apply(BoolOp::Or, f, nf), TERM1);
        assert_eq!(mgr.apply(BoolOp::And, f, nf), TERM0);
    }

    #[test]
    fn apply_matches_truth_table_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..50 {
            let mut mgr = BddManager::new(6, &random_order(6, &mut rng)).unwrap();
            let cf = random_cnf(6, 6, &mut rng);
            let cg = random_cnf(6, 6, &mut rng);
            let f = mgr.build_cnf(&cf).unwrap();
            let g = mgr.build_cnf(&cg).unwrap();
            let fg_and = mgr.apply(BoolOp::And, f, g);
            let fg_or = mgr.apply(BoolOp::Or, f, g);
            let nf = mgr.not(f);
            for bits in 0..(1u32 << 6) {
                let assignment: Vec<bool> = (0..6).map(|i| bits >> i & 1 == 1).collect();
                let (vf, vg) = (mgr.eval(f, &assignment), mgr.eval(g, &assignment));
                assert_eq!(mgr.eval(fg_and, &assignment), vf && vg);
                assert_eq!(mgr.eval(fg_or, &assignment), vf || vg);
                assert_eq!(mgr.eval(nf, &assignment), !vf);
                assert_eq!(vf, cf.eval(&assignment));
            }
        }
    }

    #[test]
    fn build_cnf_edge_cases() {
        let mut mgr = BddManager::with_identity_order(3);
        let empty = Cnf::new(3, vec![]).unwrap();
        assert_eq!(mgr.build_cnf(&empty).unwrap(), TERM1);
        let single = parse_dimacs("p cnf 3 1\n1 0\n").unwrap();
        let root = mgr.build_cnf(&single).unwrap();
        assert_eq!(mgr.size(root), 3);
        let mismatch = parse_dimacs("p cnf 2 1\n1 0\n").unwrap();
        assert!(matches!(
            mgr.build_cnf(&mismatch).unwrap_err(),
            BddError::VarCountMismatch { .. }
        ));
    }

    #[test]
    fn chain_sizes_match_both_orders() {
        for n in [6u32, 8, 12] {
            let mut mgr = BddManager::with_identity_order(n);
            let root = chain(&mut mgr, n);
            assert_eq!(mgr.size(root), u64::from(n) + 2, "natural order, n = {n}");

            let mut mgr = BddManager::new(n, &interleaved(n)).unwrap();
            let root = chain(&mut mgr, n);
            assert_eq!(mgr.size(root), 1u64 << (n / 2 + 1), "interleaved order, n = {n}");
        }
    }

    #[test]
    fn size_of_terminal_is_one() {
        let mgr = BddManager::with_identity_order(1);
        assert_eq!(mgr.size(TERM1), 1);
        assert_eq!(mgr.size(TERM0), 1);
    }

    #[test]
    fn eval_chain_all_zeros_is_false() {
        let mut mgr = BddManager::with_identity_order(6);
        let root = chain(&mut mgr, 6);
        assert!(!mgr.eval(root, &[false; 6]));
        assert!(mgr.eval(TERM1, &[false; 6]));
    }

    #[test]
    fn swap_is_an_involution() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let c = random_cnf(7, 10, &mut rng);
        let mut mgr = BddManager::with_identity_order(7);
        let root = mgr.build_cnf(&c).unwrap();
        let order_before = mgr.order().to_vec();
        let size_before = mgr.size(root);
        for level in 0..6 {
            mgr.swap_adjacent(level);
            mgr.swap_adjacent(level);
            mgr.check_invariants();
            assert_eq!(mgr.order(), &order_before[..]);
            assert_eq!(mgr.size(root), size_before);
        }
    }

    #[test]
    fn swap_matches_rebuild_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..100 {
            let c = random_cnf(7, 10, &mut rng);
            let order = random_order(7, &mut rng);
            let mut mgr = BddManager::new(7, &order).unwrap();
            let root = mgr.build_cnf(&c).unwrap();
            let level = rng.gen_range(0..6);
            mgr.swap_adjacent(level);
            mgr.check_invariants();

            let mut fresh = BddManager::new(7, mgr.order()).unwrap();
            let fresh_root = fresh.build_cnf(&c).unwrap();
            assert_eq!(mgr.size(root), fresh.size(fresh_root));
            for bits in 0..(1u32 << 7) {
                let assignment: Vec<bool> = (0..7).map(|i| bits >> i & 1 == 1).collect();
                assert_eq!(mgr.eval(root, &assignment), c.eval(&assignment));
            }
        }
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn swap_rejects_last_level() {
        let mut mgr = BddManager::with_identity_order(3);
        mgr.swap_adjacent(2);
    }

    #[test]
    fn reorder_to_realizes_targets() {
        let mut mgr = BddManager::with_identity_order(6);
        let root = chain(&mut mgr, 6);
        let natural = mgr.order().to_vec();
        mgr.reorder_to(&natural).unwrap(); // no-op
        assert_eq!(mgr.size(root), 8);
        mgr.reorder_to(&interleaved(6)).unwrap();
        assert_eq!(mgr.size(root), 16);
        mgr.reorder_to(&natural).unwrap();
        assert_eq!(mgr.size(root), 8);
        assert!(mgr.reorder_to(&identity(5)).is_err());
    }

    #[test]
    fn reorder_matches_rebuild_on_random_instances() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..100 {
            let c = random_cnf(7, 9, &mut rng);
            let mut mgr = BddManager::with_identity_order(7);
            let root = mgr.build_cnf(&c).unwrap();
            let target = random_order(7, &mut rng);
            mgr.reorder_to(&target).unwrap();
            mgr.check_invariants();
            let mut fresh = BddManager::new(7, &target).unwrap();
            let fresh_root = fresh.build_cnf(&c).unwrap();
            assert_eq!(mgr.size(root), fresh.size(fresh_root));
        }
    }

    #[test]
    fn canonicity_under_clause_permutation() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        for _ in 0..20 {
            let c = random_cnf(6, 8, &mut rng);
            let mut permuted: Vec<_> = c.clauses().to_vec();
            use rand::seq::SliceRandom;
            permuted.shuffle(&mut rng);
            let cp = Cnf::new(6, permuted).unwrap();
            let mut mgr = BddManager::with_identity_order(6);
            let a = mgr.build_cnf(&c).unwrap();
            let b = mgr.build_cnf(&cp).unwrap();
            assert_eq!(a, b, "same function must hash-cons to the same root");
        }
    }

    #[test]
    fn reduce_import_collapses_redundancy() {
        let mut mgr = BddManager::with_identity_order(3);
        // two copies of the x3 node plus a redundant x2 test
        let raw = RawBdd {
            nodes: vec![
                RawNode { level: 2, low: RawRef::Term0, high: RawRef::Term1 }, // x3
                RawNode { level: 2, low: RawRef::Term0, high: RawRef::Term1 }, // x3 (dup)
                RawNode { level: 1, low: RawRef::Node(0), high: RawRef::Node(1) }, // redundant
                RawNode { level: 0, low: RawRef::Node(2), high: RawRef::Term1 },
            ],
            root: RawRef::Node(3),
        };
        let root = mgr.reduce_import(&raw).unwrap();
        // x1 ? 1 : x3  ->  nodes x1, x3 and both terminals
        assert_eq!(mgr.size(root), 4);
        let direct = {
            let x3 = mgr.var(VarId(3));
            mgr.mk(0, x3, TERM1)
        };
        assert_eq!(root, direct);
    }

    #[test]
    fn reduce_import_rejects_bad_levels() {
        let mut mgr = BddManager::with_identity_order(2);
        let raw = RawBdd {
            nodes: vec![
                RawNode { level: 1, low: RawRef::Term0, high: RawRef::Term1 },
                RawNode { level: 1, low: RawRef::Node(0), high: RawRef::Term1 },
            ],
            root: RawRef::Node(1),
        };
        assert!(matches!(
            mgr.reduce_import(&raw).unwrap_err(),
            BddError::BadRawNode { .. }
        ));
    }

    #[test]
    fn dot_export_smoke() {
        let mut mgr = BddManager::with_identity_order(2);
        let a = mgr.var(VarId(1));
        let b = mgr.var(VarId(2));
        let f = mgr.apply(BoolOp::And, a, b);
        let dot = mgr.to_dot(f);
        assert!(dot.contains("style=dotted"));
        assert!(dot.contains("style=solid"));
        assert!(dot.contains("label=\"x1\""));
        assert!(dot.contains("rank=same"));
    }

    #[test]
    fn order_file_roundtrip() {
        let order = interleaved(6);
        let text = format_order(&order);
        assert_eq!(parse_order(&text).unwrap(), order);
        assert!(parse_order("1\nbogus\n").is_err());
        assert_eq!(parse_order("# top first\n1\n\n2\n").unwrap(), identity(2));
    }
}
