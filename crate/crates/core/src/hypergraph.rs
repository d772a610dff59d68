//! 3-uniform hypergraph encoding of 3-CNF formulas.
//!
//! Every clause becomes one ordered hyperedge over variable nodes, padded
//! with the single ⊥ node so that each edge has exactly three positions; the
//! literal polarities (with `0` for padding) form the edge's sign type.
//! Neighborhoods are cyclic: inside an edge `(a, b, c)` the node `b` sees
//! `a` on its left and `c` on its right, `c` sees `(b, a)`, and `a` sees
//! `(c, b)`. The derived graph and its reverse split those pairs into two
//! ordinary directed graphs carrying the left and right halves of the
//! message computation.

use std::collections::HashSet;
use std::fmt;
use std::fmt::Write as _;

use crate::cnf::{Cnf, VarId};

/// Default width of the handcrafted one-hot features.
pub const D_FEAT_DEFAULT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
    /// Marks a ⊥ padding position.
    Zero,
}

impl Sign {
    pub fn to_char(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
            Sign::Zero => '0',
        }
    }

    pub fn from_char(c: char) -> Option<Sign> {
        match c {
            '+' => Some(Sign::Plus),
            '-' => Some(Sign::Minus),
            '0' => Some(Sign::Zero),
            _ => None,
        }
    }
}

/// Per-edge sign type; zeros occupy a (possibly empty) suffix.
pub type SignTriple = [Sign; 3];

pub fn triple_to_string(t: &SignTriple) -> String {
    t.iter().map(|s| s.to_char()).collect()
}

pub fn triple_from_str(s: &str) -> Option<SignTriple> {
    let mut chars = s.chars();
    let t = [
        Sign::from_char(chars.next()?)?,
        Sign::from_char(chars.next()?)?,
        Sign::from_char(chars.next()?)?,
    ];
    if chars.next().is_some() {
        return None;
    }
    Some(t)
}

/// A hypergraph node: a variable or the single ⊥ padding node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HNode {
    Bottom,
    Var(VarId),
}

impl fmt::Display for HNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HNode::Bottom => write!(f, "0"),
            HNode::Var(v) => write!(f, "{}", v.0),
        }
    }
}

/// Ordered node triple with its sign type. Position `i` is ⊥ exactly when
/// `ty[i]` is [`Sign::Zero`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HyperEdge {
    pub nodes: [HNode; 3],
    pub ty: SignTriple,
}

/// 3-uniform hypergraph over `num_vars` variable nodes plus ⊥.
#[derive(Debug, Clone)]
pub struct Hypergraph3 {
    num_vars: u32,
    edges: Vec<HyperEdge>,
}

impl Hypergraph3 {
    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    /// Node count including ⊥.
    pub fn num_nodes(&self) -> usize {
        self.num_vars as usize + 1
    }

    pub fn edges(&self) -> &[HyperEdge] {
        &self.edges
    }

    /// Dense index: ⊥ is 0, variable `v` is `v`.
    pub fn node_index(&self, node: HNode) -> usize {
        match node {
            HNode::Bottom => 0,
            HNode::Var(v) => {
                debug_assert!(v.0 >= 1 && v.0 <= self.num_vars);
                v.0 as usize
            }
        }
    }

    pub fn index_node(&self, index: usize) -> HNode {
        debug_assert!(index < self.num_nodes());
        if index == 0 {
            HNode::Bottom
        } else {
            HNode::Var(VarId(index as u32))
        }
    }

    /// One line per edge: `a b c TYPE`, ⊥ printed as 0.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                e.nodes[0],
                e.nodes[1],
                e.nodes[2],
                triple_to_string(&e.ty)
            );
        }
        out
    }
}

/// Encodes a formula: clause `(l1, l2, l3)` becomes the edge of its variables
/// in literal order; shorter clauses are padded with ⊥ and sign 0. Edges
/// repeating both node tuple and type are dropped after the first.
pub fn cnf_to_hypergraph(cnf: &Cnf) -> Hypergraph3 {
    let mut edges = Vec::with_capacity(cnf.clauses().len());
    let mut seen: HashSet<HyperEdge> = HashSet::new();
    for clause in cnf.clauses() {
        let mut nodes = [HNode::Bottom; 3];
        let mut ty = [Sign::Zero; 3];
        for (i, lit) in clause.iter().enumerate() {
            nodes[i] = HNode::Var(lit.var);
            ty[i] = if lit.positive { Sign::Plus } else { Sign::Minus };
        }
        let edge = HyperEdge { nodes, ty };
        if seen.insert(edge) {
            edges.push(edge);
        }
    }
    Hypergraph3 { num_vars: cnf.num_vars(), edges }
}

/// Handcrafted per-node features: ranks for all variables and the one-hot
/// embedding rule (⊥ and out-of-range ranks map to the zero vector).
#[derive(Debug, Clone)]
pub struct FeatureAssignment {
    /// `rank[v - 1]` is variable v's position in the frequency sort.
    rank: Vec<usize>,
    d_feat: usize,
}

impl FeatureAssignment {
    pub fn d_feat(&self) -> usize {
        self.d_feat
    }

    pub fn num_vars(&self) -> u32 {
        self.rank.len() as u32
    }

    pub fn rank_of(&self, v: VarId) -> usize {
        self.rank[(v.0 - 1) as usize]
    }

    /// The feature vector `a` of a node, length `d_feat`.
    pub fn feature(&self, node: HNode) -> Vec<f64> {
        let mut a = vec![0.0; self.d_feat];
        if let HNode::Var(v) = node {
            let r = self.rank_of(v);
            if r < self.d_feat {
                a[r] = 1.0;
            }
        }
        a
    }
}

/// Ranks variables by (total occurrences desc, positive occurrences desc,
/// `VarId` asc) — the frequency order — and fixes the one-hot width.
pub fn feature_rank(cnf: &Cnf, d_feat: usize) -> FeatureAssignment {
    assert!(d_feat >= 1, "d_feat must be positive");
    let order = cnf.frequency_order();
    let mut rank = vec![0usize; cnf.num_vars() as usize];
    for (r, v) in order.iter().enumerate() {
        rank[(v.0 - 1) as usize] = r;
    }
    FeatureAssignment { rank, d_feat }
}

/// One neighbor contribution: the focus node's cyclic predecessor and
/// successor inside an edge, with the focus-centered sign key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbor {
    pub left: HNode,
    pub right: HNode,
    /// Signs of (left, focus, right): the edge type rotated so the focus
    /// sits in the middle.
    pub key: SignTriple,
}

/// Focus-centered key for position `i` of an edge: signs of
/// (predecessor, focus, successor).
pub fn focus_key(ty: &SignTriple, i: usize) -> SignTriple {
    [ty[(i + 2) % 3], ty[i], ty[(i + 1) % 3]]
}

/// The multiset NBR_H(v): for each edge `(a, b, c)`, `b` sees `(a, c)`,
/// `c` sees `(b, a)`, and `a` sees `(c, b)`. A node occupying several
/// positions (⊥ in padded edges) contributes once per position.
pub fn nbr_h(hg: &Hypergraph3, v: HNode) -> Vec<Neighbor> {
    let mut out = Vec::new();
    for e in hg.edges() {
        for i in 0..3 {
            if e.nodes[i] == v {
                out.push(Neighbor {
                    left: e.nodes[(i + 2) % 3],
                    right: e.nodes[(i + 1) % 3],
                    key: focus_key(&e.ty, i),
                });
            }
        }
    }
    out
}

/// One arc of a derived graph, annotated with the receiving end's
/// focus-centered key and the owning edge's index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivedArc {
    pub src: HNode,
    pub dst: HNode,
    pub key: SignTriple,
    pub edge_index: usize,
}

/// Splits the hypergraph into the derived graph G (arcs predecessor→focus,
/// carrying the left message blocks) and its reverse G_rev (successor→focus,
/// right blocks). Together the two arc sets reproduce [`nbr_h`] exactly.
pub fn derived_graphs(hg: &Hypergraph3) -> (Vec<DerivedArc>, Vec<DerivedArc>) {
    let mut g = Vec::with_capacity(hg.edges().len() * 3);
    let mut g_rev = Vec::with_capacity(hg.edges().len() * 3);
    for (edge_index, e) in hg.edges().iter().enumerate() {
        for i in 0..3 {
            let key = focus_key(&e.ty, i);
            g.push(DerivedArc { src: e.nodes[(i + 2) % 3], dst: e.nodes[i], key, edge_index });
            g_rev.push(DerivedArc { src: e.nodes[(i + 1) % 3], dst: e.nodes[i], key, edge_index });
        }
    }
    (g, g_rev)
}
