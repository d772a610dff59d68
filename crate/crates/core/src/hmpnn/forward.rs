//! Forward pass: initial states, hyperedge message aggregation, layered GRU
//! propagation with residual inputs, and the depth readout.
//!
//! Message contributions are summed in a canonical order — sorted by
//! (left index, right index, key) — so outputs are bitwise reproducible and
//! invariant under clause permutation of the source formula.

use super::linalg::Mat;
use super::model::{GruStep, Model};
use super::{DepthVector, HmpnnError};
use crate::hypergraph::{
    derived_graphs, nbr_h, triple_to_string, FeatureAssignment, Hypergraph3, SignTriple,
};

/// Initial node states: the handcrafted feature zero-padded to width `h`
/// (⊥ starts at the origin). Indexed by the hypergraph's node index.
pub fn init_state(
    hg: &Hypergraph3,
    feats: &FeatureAssignment,
    h: usize,
) -> Result<Vec<Vec<f64>>, HmpnnError> {
    let d = feats.d_feat();
    if d > h {
        return Err(HmpnnError::FeatureTooWide { d_feat: d, h });
    }
    let mut states = Vec::with_capacity(hg.num_nodes());
    for i in 0..hg.num_nodes() {
        let mut s = feats.feature(hg.index_node(i));
        s.resize(h, 0.0);
        states.push(s);
    }
    Ok(states)
}

/// Per-node neighbor contributions resolved against a model vocabulary and
/// sorted canonically. Built once per (hypergraph, model) pair.
pub(crate) struct Prepared {
    /// `contribs[v]` = sorted (left index, right index, vocab key index).
    pub contribs: Vec<Vec<(usize, usize, usize)>>,
}

impl Prepared {
    pub fn build(hg: &Hypergraph3, model: &Model) -> Result<Prepared, HmpnnError> {
        let mut contribs = Vec::with_capacity(hg.num_nodes());
        for i in 0..hg.num_nodes() {
            let node = hg.index_node(i);
            let mut list = Vec::new();
            for nb in nbr_h(hg, node) {
                let key = model
                    .vocab_index(&nb.key)
                    .ok_or_else(|| miss(&nb.key))?;
                list.push((hg.node_index(nb.left), hg.node_index(nb.right), key));
            }
            list.sort_unstable();
            contribs.push(list);
        }
        Ok(Prepared { contribs })
    }
}

fn miss(key: &SignTriple) -> HmpnnError {
    HmpnnError::VocabMiss { key: triple_to_string(key) }
}

/// `m_v = λ̂ Σ_{(l,r,k)} (L_k h_l + R_k h_r)` with `λ̂ = 1/|NBR_H(v)|`;
/// isolated nodes get the zero message.
pub(crate) fn messages_prepared(
    msg_mats: &[Mat],
    prepared: &Prepared,
    states: &[Vec<f64>],
    h: usize,
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(prepared.contribs.len());
    for list in &prepared.contribs {
        let mut acc = vec![0.0; h];
        for &(l, r, k) in list {
            let mat = &msg_mats[k];
            mat.matvec_half_acc(0, &states[l], &mut acc);
            mat.matvec_half_acc(1, &states[r], &mut acc);
        }
        if !list.is_empty() {
            let lambda = 1.0 / list.len() as f64;
            for x in acc.iter_mut() {
                *x *= lambda;
            }
        }
        out.push(acc);
    }
    out
}

/// Public entry: aggregated messages for one layer's matrices.
pub fn messages(
    model: &Model,
    layer: usize,
    hg: &Hypergraph3,
    states: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, HmpnnError> {
    assert!(layer < model.layers.len(), "layer index");
    assert_eq!(states.len(), hg.num_nodes(), "one state per node");
    let prepared = Prepared::build(hg, model)?;
    Ok(messages_prepared(&model.layers[layer].msg, &prepared, states, model.h))
}

/// The same quantity computed the decomposed way: a left-block pass over the
/// derived graph G plus a right-block pass over its reverse, then the same
/// average. Exists to check the decomposition identity numerically.
pub fn messages_via_derived(
    model: &Model,
    layer: usize,
    hg: &Hypergraph3,
    states: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, HmpnnError> {
    assert!(layer < model.layers.len(), "layer index");
    assert_eq!(states.len(), hg.num_nodes(), "one state per node");
    let mats = &model.layers[layer].msg;
    let (g, g_rev) = derived_graphs(hg);
    let mut forward_part = vec![vec![0.0; model.h]; hg.num_nodes()];
    let mut backward_part = vec![vec![0.0; model.h]; hg.num_nodes()];
    let mut counts = vec![0usize; hg.num_nodes()];
    for arc in &g {
        let k = model.vocab_index(&arc.key).ok_or_else(|| miss(&arc.key))?;
        let dst = hg.node_index(arc.dst);
        mats[k].matvec_half_acc(0, &states[hg.node_index(arc.src)], &mut forward_part[dst]);
        counts[dst] += 1;
    }
    for arc in &g_rev {
        let k = model.vocab_index(&arc.key).ok_or_else(|| miss(&arc.key))?;
        let dst = hg.node_index(arc.dst);
        mats[k].matvec_half_acc(1, &states[hg.node_index(arc.src)], &mut backward_part[dst]);
    }
    let mut out = forward_part;
    for (v, part) in out.iter_mut().enumerate() {
        for (a, b) in part.iter_mut().zip(&backward_part[v]) {
            *a += b;
        }
        if counts[v] > 0 {
            let lambda = 1.0 / counts[v] as f64;
            for a in part.iter_mut() {
                *a *= lambda;
            }
        }
    }
    Ok(out)
}

/// One recorded timestep: the states it read, the GRU inputs it formed
/// (whose first h entries are the messages), and the gate activations.
pub(crate) struct StepTrace {
    pub h_in: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub gru: Vec<GruStep>,
}

pub(crate) struct LayerTrace {
    pub steps: Vec<StepTrace>,
    pub finals: Vec<Vec<f64>>,
}

pub(crate) struct ReadoutTrace {
    /// `[h_v; a_v]`
    pub c: Vec<f64>,
    /// tanh of the hidden layer
    pub t: Vec<f64>,
}

/// Everything the backward pass needs from one forward run.
pub struct Trace {
    pub(crate) prepared: Prepared,
    pub(crate) layers: Vec<LayerTrace>,
    pub(crate) readout: Vec<ReadoutTrace>,
}

/// Runs the network over one instance, returning the depth vector for the
/// variable nodes and the full trace.
pub fn forward(
    model: &Model,
    hg: &Hypergraph3,
    feats: &FeatureAssignment,
) -> Result<(DepthVector, Trace), HmpnnError> {
    assert_eq!(feats.d_feat(), model.d_feat, "feature width must match the model");
    assert_eq!(feats.num_vars(), hg.num_vars(), "features cover the hypergraph");
    let h = model.h;
    let prepared = Prepared::build(hg, model)?;
    let mut states = init_state(hg, feats, h)?;
    let mut layer_traces: Vec<LayerTrace> = Vec::with_capacity(model.layers.len());

    for layer in &model.layers {
        let mut steps = Vec::with_capacity(layer.spec.timesteps);
        for _ in 0..layer.spec.timesteps {
            let m = messages_prepared(&layer.msg, &prepared, &states, h);
            let mut xs = Vec::with_capacity(states.len());
            let mut gru_steps = Vec::with_capacity(states.len());
            let mut next = Vec::with_capacity(states.len());
            for v in 0..states.len() {
                let mut x = m[v].clone();
                for &src in &layer.spec.residual_sources {
                    x.extend_from_slice(&layer_traces[src].finals[v]);
                }
                let (out, step) = layer.gru.step(&states[v], &x);
                xs.push(x);
                gru_steps.push(step);
                next.push(out);
            }
            steps.push(StepTrace { h_in: states, x: xs, gru: gru_steps });
            states = next;
        }
        layer_traces.push(LayerTrace { steps, finals: states.clone() });
    }

    // readout over variable nodes only
    let n = hg.num_vars() as usize;
    let mut y = Vec::with_capacity(n);
    let mut readout_traces = Vec::with_capacity(n);
    let r = &model.readout;
    for v in 1..=n {
        let idx = v; // node index of variable v
        let mut c = states[idx].clone();
        c.extend_from_slice(&feats.feature(hg.index_node(idx)));
        let mut u = r.w1.matvec(&c);
        for (ui, bi) in u.iter_mut().zip(&r.b1) {
            *ui += bi;
        }
        let t: Vec<f64> = u.iter().map(|a| a.tanh()).collect();
        let mut out = r.b2;
        for (wi, ti) in r.w2.iter().zip(&t) {
            out += wi * ti;
        }
        y.push(out);
        readout_traces.push(ReadoutTrace { c, t });
    }

    Ok((
        DepthVector::new(y),
        Trace { prepared, layers: layer_traces, readout: readout_traces },
    ))
}

/// Forward without the trace.
pub fn predict(
    model: &Model,
    hg: &Hypergraph3,
    feats: &FeatureAssignment,
) -> Result<DepthVector, HmpnnError> {
    forward(model, hg, feats).map(|(y, _)| y)
}
