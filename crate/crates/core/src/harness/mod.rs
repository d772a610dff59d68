//! Experiment plumbing: chain-family and random corpora, dataset generation
//! with GA labeling, train/test splitting, the evaluation and benchmark
//! drivers, and the key=value config format the CLI accepts.

mod bench;
mod dataset;

pub use bench::{
    bench, evaluate, evaluate_with, Algo, BenchCell, BenchConfig, BenchReport, BenchRow,
    BenchSummary, EvalReport, EvalRow,
};
pub use dataset::{
    gen_dataset, read_dataset, split, to_train_samples, write_dataset, LabeledSample,
};

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::bdd::{BddError, BddManager, BoolOp, NodeId};
use crate::cnf::{Clause, Cnf, CnfError, Literal, VarId};
use crate::hmpnn::HmpnnError;
use crate::reorder::ReorderError;

/// Largest chain the pure 3-CNF expansion covers: n/2 ≤ 3 disjuncts keep
/// every distributed clause within three literals.
pub const CHAIN_CNF_MAX: u32 = 6;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("chain formulas need an even number of variables, got {0}")]
    OddChain(u32),
    #[error(
        "chain({n}) exceeds the 3-CNF expansion limit of {max} variables; \
         build its OBDD directly instead"
    )]
    ChainTooLarge { n: u32, max: u32 },
    #[error("seed {seed_id}: only {got} distinct mutants found of {wanted} requested")]
    MutantExhaustion { seed_id: String, wanted: usize, got: usize },
    #[error("split of {len} samples at fraction {fraction} leaves one side empty")]
    DegenerateSplit { len: usize, fraction: f64 },
    #[error("dataset line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error("config line {line}: expected key=value, got {content:?}")]
    BadConfig { line: usize, content: String },
    #[error("benchmarking `predict` requires a model")]
    MissingModel,
    #[error(transparent)]
    Cnf(#[from] CnfError),
    #[error(transparent)]
    Bdd(#[from] BddError),
    #[error(transparent)]
    Reorder(#[from] ReorderError),
    #[error(transparent)]
    Model(#[from] HmpnnError),
}

/// The chain formula x₁x₂ ∨ x₃x₄ ∨ … ∨ x_{n−1}x_n as a pure 3-CNF, via the
/// product-of-sums expansion: one clause per way of picking an element from
/// each pair. Only n ≤ [`CHAIN_CNF_MAX`] keeps every clause within three
/// literals; the OBDD of larger chains comes from [`chain_obdd`].
pub fn synth_chain(n: u32) -> Result<Cnf, HarnessError> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(HarnessError::OddChain(n));
    }
    if n > CHAIN_CNF_MAX {
        return Err(HarnessError::ChainTooLarge { n, max: CHAIN_CNF_MAX });
    }
    let pairs = n / 2;
    let mut clauses: Vec<Clause> = Vec::with_capacity(1 << pairs);
    for choice in 0..(1u32 << pairs) {
        let clause: Clause = (0..pairs)
            .map(|p| Literal::pos(2 * p + 1 + ((choice >> p) & 1)))
            .collect();
        clauses.push(clause);
    }
    Ok(Cnf::new(n, clauses).expect("chain expansion is well-formed"))
}

/// The order x₁, x₂, …, x_n: both variables of each pair adjacent, giving
/// the linear-size chain OBDD.
pub fn chain_natural_order(n: u32) -> Vec<VarId> {
    (1..=n).map(VarId).collect()
}

/// The order x₁, x₃, …, x₂, x₄, …: pairs split across the two halves,
/// giving the exponential-size chain OBDD.
pub fn chain_interleaved_order(n: u32) -> Vec<VarId> {
    (1..=n).step_by(2).chain((2..=n).step_by(2)).map(VarId).collect()
}

/// OBDD of the chain function for any even n, built directly from the DNF
/// by conjunction/disjunction — no CNF expansion, so it scales past
/// [`CHAIN_CNF_MAX`]. Returns the manager and the root.
pub fn chain_obdd(n: u32, order: &[VarId]) -> Result<(BddManager, NodeId), HarnessError> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(HarnessError::OddChain(n));
    }
    let mut mgr = BddManager::new(n, order)?;
    let mut root = crate::bdd::TERM0;
    for p in 0..n / 2 {
        let a = mgr.var(VarId(2 * p + 1));
        let b = mgr.var(VarId(2 * p + 2));
        let pair = mgr.apply(BoolOp::And, a, b);
        root = mgr.apply(BoolOp::Or, root, pair);
    }
    Ok((mgr, root))
}

/// Seeded random 3-CNF: every clause has exactly three distinct variables
/// with independent random polarities. Duplicate clauses are allowed, as in
/// random-SAT corpora; `Cnf::normalize` collapses them if needed.
pub fn random_cnf(num_vars: u32, num_clauses: usize, seed: u64) -> Cnf {
    assert!(num_vars >= 3, "3-literal clauses need at least three variables");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut clauses: Vec<Clause> = Vec::with_capacity(num_clauses);
    for _ in 0..num_clauses {
        let mut vars = [0u32; 3];
        let mut picked = 0;
        while picked < 3 {
            let v = rng.gen_range(1..=num_vars);
            if !vars[..picked].contains(&v) {
                vars[picked] = v;
                picked += 1;
            }
        }
        clauses.push(
            vars.iter()
                .map(|&v| if rng.gen_bool(0.5) { Literal::pos(v) } else { Literal::neg(v) })
                .collect(),
        );
    }
    Cnf::new(num_vars, clauses).expect("random clauses are well-formed")
}

/// The chain-family seed formulas available as pure 3-CNF.
pub fn chain_family_seeds() -> Vec<Cnf> {
    [2, 4, 6].map(|n| synth_chain(n).expect("chain sizes are even and small")).to_vec()
}

/// Parses the simple `key=value` config format: one pair per line, `#`
/// starts a comment, blank lines are skipped, whitespace around keys and
/// values is trimmed. Later duplicates overwrite earlier ones.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, HarnessError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| HarnessError::BadConfig {
            line: i + 1,
            content: raw.trim().to_string(),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(HarnessError::BadConfig { line: i + 1, content: raw.trim().to_string() });
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}
