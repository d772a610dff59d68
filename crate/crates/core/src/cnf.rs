//! 3-CNF formulas: DIMACS parsing, normalization, seeded mutation, emission.
//!
//! A [`Cnf`] holds clauses of at most three signed literals. Clause order and
//! within-clause literal order are preserved from the input because they
//! determine the hyperedge tuples of the hypergraph encoding.

use std::collections::HashSet;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A Boolean variable, 1-based per the DIMACS convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub u32);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A signed occurrence of a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub var: VarId,
    pub positive: bool,
}

impl Literal {
    pub fn pos(var: u32) -> Self {
        Literal { var: VarId(var), positive: true }
    }

    pub fn neg(var: u32) -> Self {
        Literal { var: VarId(var), positive: false }
    }

    /// Signed DIMACS integer; never 0.
    pub fn to_dimacs(self) -> i64 {
        let v = i64::from(self.var.0);
        if self.positive {
            v
        } else {
            -v
        }
    }

    pub fn from_dimacs(lit: i64) -> Self {
        debug_assert!(lit != 0);
        Literal { var: VarId(lit.unsigned_abs() as u32), positive: lit > 0 }
    }

    pub fn negated(self) -> Self {
        Literal { var: self.var, positive: !self.positive }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A disjunction of literals. At most 3 distinct variables.
pub type Clause = Vec<Literal>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CnfError {
    #[error("malformed DIMACS header: {0}")]
    MalformedHeader(String),
    #[error("bad token {token:?} in clause data")]
    BadToken { token: String },
    #[error("clause {clause}: literal {lit} out of range (num_vars = {num_vars})")]
    LiteralOutOfRange { clause: usize, lit: i64, num_vars: u32 },
    #[error("clause {clause}: more than 3 distinct variables")]
    TooManyVariables { clause: usize },
    #[error("clause {clause}: empty clause (unsatisfiable by syntax)")]
    EmptyClause { clause: usize },
    #[error("clause {clause}: variable {var} occurs more than once (tautological or duplicated)")]
    DuplicateVariable { clause: usize, var: VarId },
    #[error("header declares {declared} clauses but {found} were found")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error("mutation count k = {k} outside 1..=3")]
    MutationCountOutOfRange { k: usize },
    #[error("formula has {have} literal occurrences, mutation needs {need}")]
    TooFewLiteralOccurrences { have: usize, need: usize },
}

/// A 3-CNF formula.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cnf {
    num_vars: u32,
    clauses: Vec<Clause>,
}

impl Cnf {
    /// Builds a formula from raw clauses. Clauses may still contain duplicate
    /// literals or tautologies (cleaned by [`Cnf::normalize`]), but every
    /// variable must be in range and no clause may span more than 3 distinct
    /// variables.
    pub fn new(num_vars: u32, clauses: Vec<Clause>) -> Result<Self, CnfError> {
        for (i, clause) in clauses.iter().enumerate() {
            let no = i + 1;
            if clause.is_empty() {
                return Err(CnfError::EmptyClause { clause: no });
            }
            let mut vars: Vec<VarId> = clause.iter().map(|l| l.var).collect();
            vars.sort_unstable();
            vars.dedup();
            if vars.len() > 3 {
                return Err(CnfError::TooManyVariables { clause: no });
            }
            for lit in clause {
                if lit.var.0 < 1 || lit.var.0 > num_vars {
                    return Err(CnfError::LiteralOutOfRange {
                        clause: no,
                        lit: lit.to_dimacs(),
                        num_vars,
                    });
                }
            }
        }
        Ok(Cnf { num_vars, clauses })
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn num_literal_occurrences(&self) -> usize {
        self.clauses.iter().map(|c| c.len()).sum()
    }

    /// Per-variable `(total, positive)` occurrence counts, indexed `0..num_vars`
    /// for variables `1..=num_vars`.
    pub fn occurrence_counts(&self) -> Vec<(usize, usize)> {
        let mut counts = vec![(0usize, 0usize); self.num_vars as usize];
        for clause in &self.clauses {
            for lit in clause {
                let slot = &mut counts[(lit.var.0 - 1) as usize];
                slot.0 += 1;
                if lit.positive {
                    slot.1 += 1;
                }
            }
        }
        counts
    }

    /// Variables sorted by total occurrences descending, then positive
    /// occurrences descending, then `VarId` ascending. Used both as the
    /// feature-rank order and as a non-random starting order.
    pub fn frequency_order(&self) -> Vec<VarId> {
        let counts = self.occurrence_counts();
        let mut order: Vec<VarId> = self.vars().collect();
        order.sort_by(|a, b| {
            let (ta, pa) = counts[(a.0 - 1) as usize];
            let (tb, pb) = counts[(b.0 - 1) as usize];
            tb.cmp(&ta).then(pb.cmp(&pa)).then(a.0.cmp(&b.0))
        });
        order
    }

    /// All variables of the formula, `1..=num_vars`.
    pub fn vars(&self) -> impl Iterator<Item = VarId> {
        (1..=self.num_vars).map(VarId)
    }

    /// Evaluates the formula under a truth assignment (`assignment[i]` is the
    /// value of variable `i+1`). Brute-force oracle for the BDD tests.
    pub fn eval(&self, assignment: &[bool]) -> bool {
        assert_eq!(assignment.len(), self.num_vars as usize, "assignment length");
        self.clauses.iter().all(|clause| {
            clause
                .iter()
                .any(|l| assignment[(l.var.0 - 1) as usize] == l.positive)
        })
    }

    /// Removes duplicate literals within a clause (keeping the first
    /// occurrence), drops clauses containing both `x` and `!x`, and drops
    /// exact-duplicate clauses (same literal multiset) after the first.
    /// Clause order is otherwise preserved. Idempotent.
    pub fn normalize(&self) -> Cnf {
        let mut seen: HashSet<Vec<(u32, bool)>> = HashSet::new();
        let mut out: Vec<Clause> = Vec::with_capacity(self.clauses.len());
        'clauses: for clause in &self.clauses {
            let mut kept: Clause = Vec::with_capacity(clause.len());
            for lit in clause {
                match kept.iter().find(|k| k.var == lit.var) {
                    Some(k) if k.positive != lit.positive => continue 'clauses, // tautology
                    Some(_) => {}                                               // duplicate literal
                    None => kept.push(*lit),
                }
            }
            let mut key: Vec<(u32, bool)> = kept.iter().map(|l| (l.var.0, l.positive)).collect();
            key.sort_unstable();
            if seen.insert(key) {
                out.push(kept);
            }
        }
        Cnf { num_vars: self.num_vars, clauses: out }
    }

    /// Flips the sign of `k` distinct literal occurrences chosen uniformly by
    /// the seeded generator, then re-normalizes. Deterministic for a fixed
    /// `(cnf, k, seed)`.
    pub fn mutate(&self, k: usize, seed: u64) -> Result<Cnf, CnfError> {
        if !(1..=3).contains(&k) {
            return Err(CnfError::MutationCountOutOfRange { k });
        }
        let total = self.num_literal_occurrences();
        if total < k {
            return Err(CnfError::TooFewLiteralOccurrences { have: total, need: k });
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, total, k).into_vec();
        picks.sort_unstable();
        let mut mutated = self.clone();
        let mut offset = 0usize;
        let mut pick_iter = picks.into_iter().peekable();
        for clause in &mut mutated.clauses {
            for (j, lit) in clause.iter_mut().enumerate() {
                if pick_iter.peek() == Some(&(offset + j)) {
                    *lit = lit.negated();
                    pick_iter.next();
                }
            }
            offset += clause.len();
        }
        Ok(mutated.normalize())
    }

    /// Renders the formula in DIMACS CNF. Inverse of [`parse_dimacs`] on
    /// normalized formulas.
    pub fn emit_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for clause in &self.clauses {
            for lit in clause {
                out.push_str(&lit.to_dimacs().to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }
}

/// Parses DIMACS CNF text: `c` comment lines, one `p cnf <nv> <nc>` header,
/// clauses as 0-terminated integer lists (clauses may span lines).
///
/// Rejects empty clauses, clauses with more than 3 distinct variables, and
/// clauses mentioning a variable twice; those must not reach the hypergraph
/// encoder, and a file that contains them is reported rather than silently
/// repaired.
pub fn parse_dimacs(text: &str) -> Result<Cnf, CnfError> {
    let mut header: Option<(u32, usize)> = None;
    let mut body: Vec<&str> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('p') {
            if header.is_some() {
                return Err(CnfError::MalformedHeader("duplicate header".into()));
            }
            let fields: Vec<&str> = rest.split_whitespace().collect();
            match fields.as_slice() {
                ["cnf", nv, nc] => {
                    let nv: u32 = nv
                        .parse()
                        .map_err(|_| CnfError::MalformedHeader(line.to_string()))?;
                    let nc: usize = nc
                        .parse()
                        .map_err(|_| CnfError::MalformedHeader(line.to_string()))?;
                    if nv == 0 {
                        return Err(CnfError::MalformedHeader("num_vars must be >= 1".into()));
                    }
                    header = Some((nv, nc));
                }
                _ => return Err(CnfError::MalformedHeader(line.to_string())),
            }
            continue;
        }
        if header.is_none() {
            return Err(CnfError::MalformedHeader(format!(
                "clause data before header: {line}"
            )));
        }
        body.push(line);
    }
    let (num_vars, declared) = header.ok_or_else(|| CnfError::MalformedHeader("missing".into()))?;

    let mut clauses: Vec<Clause> = Vec::with_capacity(declared);
    let mut current: Clause = Vec::new();
    for token in body.iter().flat_map(|l| l.split_whitespace()) {
        let lit: i64 = token
            .parse()
            .map_err(|_| CnfError::BadToken { token: token.to_string() })?;
        let clause_no = clauses.len() + 1;
        if lit == 0 {
            if current.is_empty() {
                return Err(CnfError::EmptyClause { clause: clause_no });
            }
            clauses.push(std::mem::take(&mut current));
            continue;
        }
        if lit.unsigned_abs() > u64::from(num_vars) {
            return Err(CnfError::LiteralOutOfRange { clause: clause_no, lit, num_vars });
        }
        let literal = Literal::from_dimacs(lit);
        if current.iter().any(|l| l.var == literal.var) {
            return Err(CnfError::DuplicateVariable { clause: clause_no, var: literal.var });
        }
        if current.len() == 3 {
            return Err(CnfError::TooManyVariables { clause: clause_no });
        }
        current.push(literal);
    }
    if !current.is_empty() {
        return Err(CnfError::BadToken { token: "missing clause terminator".into() });
    }
    if clauses.len() != declared {
        return Err(CnfError::ClauseCountMismatch { declared, found: clauses.len() });
    }
    Cnf::new(num_vars, clauses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn lits(spec: &[i64]) -> Clause {
        spec.iter().map(|&l| Literal::from_dimacs(l)).collect()
    }

    fn cnf(num_vars: u32, clauses: &[&[i64]]) -> Cnf {
        Cnf::new(num_vars, clauses.iter().map(|c| lits(c)).collect()).unwrap()
    }

    /// Random normalized CNF with up to 3 distinct vars per clause.
    fn random_normalized(num_vars: u32, num_clauses: usize, rng: &mut impl Rng) -> Cnf {
        let mut clauses = Vec::with_capacity(num_clauses);
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

    #[test]
    fn parse_worked_example() {
        let c = parse_dimacs("p cnf 3 2\n1 2 0\n-1 2 3 0\n").unwrap();
        assert_eq!(c.num_vars(), 3);
        assert_eq!(c.clauses(), cnf(3, &[&[1, 2], &[-1, 2, 3]]).clauses());
    }

    #[test]
    fn parse_minimal_formula() {
        let c = parse_dimacs("p cnf 1 1\n1 0\n").unwrap();
        assert_eq!(c.num_vars(), 1);
        assert_eq!(c.clauses(), &[lits(&[1])]);
    }

    #[test]
    fn frequency_order_sorts_by_count_then_sign_then_id() {
        // var 2: 2 total / 2 positive; var 1: 2 total / 1 positive; var 3: 1/1
        let c = cnf(3, &[&[1, 2], &[-1, 2, 3]]);
        assert_eq!(c.frequency_order(), vec![VarId(2), VarId(1), VarId(3)]);
        // all counts equal -> VarId ascending
        let c = cnf(3, &[&[1], &[2], &[3]]);
        assert_eq!(c.frequency_order(), vec![VarId(1), VarId(2), VarId(3)]);
        // unmentioned variables trail, ordered by id
        let c = cnf(4, &[&[3]]);
        assert_eq!(
            c.frequency_order(),
            vec![VarId(3), VarId(1), VarId(2), VarId(4)]
        );
    }

    #[test]
    fn parse_rejects_duplicate_variable_clause() {
        let err = parse_dimacs("p cnf 2 1\n1 -1 2 0\n").unwrap_err();
        assert_eq!(err, CnfError::DuplicateVariable { clause: 1, var: VarId(1) });
    }

    #[test]
    fn parse_rejects_wide_clause() {
        let err = parse_dimacs("p cnf 4 1\n1 2 3 4 0\n").unwrap_err();
        assert_eq!(err, CnfError::TooManyVariables { clause: 1 });
    }

    #[test]
    fn parse_rejects_empty_clause_and_range() {
        assert_eq!(
            parse_dimacs("p cnf 2 1\n0\n").unwrap_err(),
            CnfError::EmptyClause { clause: 1 }
        );
        assert_eq!(
            parse_dimacs("p cnf 2 1\n1 3 0\n").unwrap_err(),
            CnfError::LiteralOutOfRange { clause: 1, lit: 3, num_vars: 2 }
        );
    }

    #[test]
    fn parse_rejects_count_mismatch_and_bad_header() {
        assert_eq!(
            parse_dimacs("p cnf 2 2\n1 0\n").unwrap_err(),
            CnfError::ClauseCountMismatch { declared: 2, found: 1 }
        );
        assert!(matches!(
            parse_dimacs("p dnf 2 1\n1 0\n").unwrap_err(),
            CnfError::MalformedHeader(_)
        ));
        assert!(matches!(
            parse_dimacs("1 0\n").unwrap_err(),
            CnfError::MalformedHeader(_)
        ));
    }

    #[test]
    fn parse_accepts_comments_and_multiline_clauses() {
        let c = parse_dimacs("c a comment\np cnf 3 2\nc mid\n1 2\n0\n-1 2 3 0\n").unwrap();
        assert_eq!(c.clauses().len(), 2);
    }

    #[test]
    fn normalize_dedups_literals() {
        let c = cnf(2, &[&[1, 1, 2]]).normalize();
        assert_eq!(c.clauses(), &[lits(&[1, 2])]);
    }

    #[test]
    fn normalize_drops_tautologies() {
        let c = cnf(2, &[&[1, -1, 2]]).normalize();
        assert!(c.clauses().is_empty());
    }

    #[test]
    fn normalize_drops_duplicate_clauses() {
        let c = cnf(2, &[&[1, 2], &[1, 2]]).normalize();
        assert_eq!(c.clauses(), &[lits(&[1, 2])]);
        // same literal multiset in a different order is also a duplicate
        let c = cnf(2, &[&[1, 2], &[2, 1]]).normalize();
        assert_eq!(c.clauses(), &[lits(&[1, 2])]);
    }

    #[test]
    fn normalize_is_idempotent() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..50 {
            let c = random_normalized(6, 10, &mut rng);
            assert_eq!(c.normalize(), c);
        }
    }

    #[test]
    fn mutate_single_forced_flip() {
        let c = cnf(2, &[&[1, 2]]);
        let m = c.mutate(1, 0).unwrap();
        // exactly one of the two occurrences flipped
        let flips: usize = m
            .clauses()[0]
            .iter()
            .zip(&c.clauses()[0])
            .filter(|(a, b)| a.positive != b.positive)
            .count();
        assert_eq!(flips, 1);
        assert_eq!(m.num_vars(), 2);
    }

    #[test]
    fn mutate_rejects_bad_k() {
        let c = cnf(2, &[&[1, 2]]);
        assert_eq!(c.mutate(0, 1).unwrap_err(), CnfError::MutationCountOutOfRange { k: 0 });
        assert_eq!(c.mutate(4, 1).unwrap_err(), CnfError::MutationCountOutOfRange { k: 4 });
    }

    #[test]
    fn mutate_rejects_empty_formula() {
        let c = Cnf::new(2, vec![]).unwrap();
        assert_eq!(
            c.mutate(1, 1).unwrap_err(),
            CnfError::TooFewLiteralOccurrences { have: 0, need: 1 }
        );
    }

    #[test]
    fn mutate_is_deterministic_and_preserves_num_vars() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for seed in 0..30u64 {
            let c = random_normalized(8, 12, &mut rng);
            let k = (seed % 3 + 1) as usize;
            let a = c.mutate(k, seed).unwrap();
            let b = c.mutate(k, seed).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.num_vars(), c.num_vars());
        }
    }

    #[test]
    fn emit_worked_examples() {
        assert_eq!(
            cnf(3, &[&[1, 2], &[-1, 2, 3]]).emit_dimacs(),
            "p cnf 3 2\n1 2 0\n-1 2 3 0\n"
        );
        assert_eq!(cnf(1, &[&[1]]).emit_dimacs(), "p cnf 1 1\n1 0\n");
    }

    #[test]
    fn parse_emit_roundtrip_on_random_formulas() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for _ in 0..100 {
            let c = random_normalized(9, 14, &mut rng);
            assert_eq!(parse_dimacs(&c.emit_dimacs()).unwrap(), c);
        }
    }
}
