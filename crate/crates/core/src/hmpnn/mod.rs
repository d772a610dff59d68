//! Message-passing neural network lifted to the 3-uniform hypergraph
//! encoding of a CNF: per-sign-type message matrices split into left/right
//! blocks, layered GRU updates with residual inputs, a depth-vector readout,
//! the angle loss with exact hand-written gradients, and ADAM training.
//!
//! Everything is dense 64-bit arithmetic with fixed iteration orders, so
//! seeded runs are reproducible to the bit.

mod backward;
mod forward;
mod linalg;
mod model;
mod train;

pub use backward::{gradient_check, gradients};
pub use forward::{forward, init_state, messages, messages_via_derived, predict, Trace};
pub use linalg::Mat;
pub use model::{
    gru_update, load_model, save_model, GruCell, GruStep, LayerParams, LayerSpec, Model,
    ModelConfig, Readout, CHECKPOINT_VERSION,
};
pub use train::{train, TrainConfig, TrainSample};

use std::collections::BTreeSet;

use thiserror::Error;

use linalg::{dot, norm};

use crate::bdd::validate_order;
use crate::cnf::VarId;
use crate::hypergraph::{focus_key, Hypergraph3, SignTriple};

/// Cosine clamp half-width used in the loss gradient: the derivative factor
/// −1/√(1−c²) is evaluated at c clamped into [−1+ε, 1−ε] so it stays finite
/// at aligned and antipodal pairs.
pub const COS_CLAMP_EPS: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum HmpnnError {
    /// The instance contains a sign key the model was not trained with.
    #[error("sign key {key} is not in the model vocabulary (train/test vocabulary mismatch)")]
    VocabMiss { key: String },
    /// The angle to a zero vector is undefined.
    #[error("angle loss is undefined for a zero-norm depth vector")]
    ZeroNorm,
    #[error("feature width {d_feat} exceeds state width {h}")]
    FeatureTooWide { d_feat: usize, h: usize },
    #[error("checkpoint version {found} is unsupported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("corrupt model: {0}")]
    Corrupt(String),
    #[error("training requires a non-empty dataset")]
    EmptyDataset,
}

/// Per-variable real scores, ⊥ excluded; `values()[i]` belongs to variable
/// `i+1`. Sorting variables by ascending score yields the predicted order.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthVector {
    values: Vec<f64>,
}

impl DepthVector {
    pub fn new(values: Vec<f64>) -> DepthVector {
        DepthVector { values }
    }

    pub fn num_vars(&self) -> u32 {
        self.values.len() as u32
    }

    pub fn get(&self, v: VarId) -> f64 {
        self.values[(v.0 - 1) as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Angle between two depth vectors, in degrees, in [0, 180].
///
/// This is arccos of the cosine similarity, but evaluated as
/// `2·atan2(‖u−w‖, ‖u+w‖)` on the normalized vectors: algebraically the same
/// angle, yet exact at the endpoints, where forming the cosine first loses
/// ~1e−6 degrees to rounding (arccos is infinitely steep at ±1). Identical
/// inputs give exactly 0 and negated inputs exactly 180.
pub fn angle_loss(y: &DepthVector, y_star: &DepthVector) -> Result<f64, HmpnnError> {
    let (y, ys) = (y.values(), y_star.values());
    assert_eq!(y.len(), ys.len(), "depth vectors must cover the same variables");
    let (ny, ns) = (norm(y), norm(ys));
    if ny == 0.0 || ns == 0.0 {
        return Err(HmpnnError::ZeroNorm);
    }
    let mut diff2 = 0.0;
    let mut sum2 = 0.0;
    for (a, b) in y.iter().zip(ys) {
        let (u, w) = (a / ny, b / ns);
        diff2 += (u - w) * (u - w);
        sum2 += (u + w) * (u + w);
    }
    Ok(2.0 * diff2.sqrt().atan2(sum2.sqrt()) * (180.0 / std::f64::consts::PI))
}

/// The loss together with its gradient w.r.t. `y`.
///
/// The gradient uses d(arccos c)/dc = −1/√(1−c²) with the cosine clamped
/// into [−1+ε, 1−ε] (ε = [`COS_CLAMP_EPS`]) inside the square root only, so
/// it is finite everywhere, including at y = y* where it vanishes.
pub fn angle_loss_grad(
    y: &DepthVector,
    y_star: &DepthVector,
) -> Result<(f64, Vec<f64>), HmpnnError> {
    let loss = angle_loss(y, y_star)?;
    let (yv, ys) = (y.values(), y_star.values());
    let (ny, ns) = (norm(yv), norm(ys));
    let c = dot(yv, ys) / (ny * ns);
    let cg = c.clamp(-1.0 + COS_CLAMP_EPS, 1.0 - COS_CLAMP_EPS);
    let scale = -(180.0 / std::f64::consts::PI) / (1.0 - cg * cg).sqrt();
    let grad = yv
        .iter()
        .zip(ys)
        .map(|(a, b)| scale * (b / (ny * ns) - c * a / (ny * ny)))
        .collect();
    Ok((loss, grad))
}

/// Variables sorted by ascending depth, exact ties broken by ascending
/// variable id. The result is the predicted variable order.
pub fn depth_to_order(y: &DepthVector) -> Vec<VarId> {
    assert!(y.values().iter().all(|v| v.is_finite()), "depth values must be finite");
    let mut vars: Vec<u32> = (1..=y.num_vars()).collect();
    vars.sort_by(|&a, &b| {
        let (da, db) = (y.get(VarId(a)), y.get(VarId(b)));
        da.partial_cmp(&db).expect("finite depths compare").then(a.cmp(&b))
    });
    vars.into_iter().map(VarId).collect()
}

/// Training label for an order: the variable at position i gets depth i+1,
/// so `depth_to_order(target_depths(o)) == o`.
pub fn target_depths(order: &[VarId]) -> DepthVector {
    validate_order(order.len() as u32, order).expect("target order must be a permutation");
    let mut values = vec![0.0; order.len()];
    for (i, v) in order.iter().enumerate() {
        values[(v.0 - 1) as usize] = (i + 1) as f64;
    }
    DepthVector::new(values)
}

/// Every focus-centered sign key occurring in the given hypergraphs, sorted
/// and deduplicated — the vocabulary a model must carry to run on them.
pub fn vocab_of<'a>(hgs: impl IntoIterator<Item = &'a Hypergraph3>) -> Vec<SignTriple> {
    let mut set = BTreeSet::new();
    for hg in hgs {
        for edge in hg.edges() {
            for i in 0..3 {
                set.insert(focus_key(&edge.ty, i));
            }
        }
    }
    set.into_iter().collect()
}

#[cfg(test)]
pub(crate) mod testutil {
    use rand::Rng;
    use rand_chacha::ChaCha12Rng;

    use crate::cnf::{Clause, Cnf, Literal};

    /// Random CNF with clauses of 1–3 literals over distinct variables.
    pub fn rand_cnf(rng: &mut ChaCha12Rng, num_vars: u32, num_clauses: usize) -> Cnf {
        loop {
            let mut clauses: Vec<Clause> = Vec::with_capacity(num_clauses);
            for _ in 0..num_clauses {
                let width = rng.gen_range(1..=3usize).min(num_vars as usize);
                let mut vars: Vec<u32> = (1..=num_vars).collect();
                for i in 0..width {
                    let j = rng.gen_range(i..vars.len());
                    vars.swap(i, j);
                }
                clauses.push(
                    vars[..width]
                        .iter()
                        .map(|&v| if rng.gen_bool(0.5) { Literal::pos(v) } else { Literal::neg(v) })
                        .collect(),
                );
            }
            if let Ok(cnf) = Cnf::new(num_vars, clauses) {
                return cnf;
            }
        }
    }

    pub fn rand_states(rng: &mut ChaCha12Rng, num_nodes: usize, h: usize) -> Vec<Vec<f64>> {
        (0..num_nodes).map(|_| (0..h).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    }
}
