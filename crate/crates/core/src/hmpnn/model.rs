//! Network parameters: per-type message matrices, GRU cells, the readout
//! MLP, seeded initialization, flat packing for the optimizer, and the
//! checkpoint format.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{sigmoid, Mat};
use super::HmpnnError;
use crate::hypergraph::{triple_from_str, triple_to_string, SignTriple};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Standard GRU cell over state width `h` and input width `d_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruCell {
    pub wz: Mat,
    pub uz: Mat,
    pub bz: Vec<f64>,
    pub wr: Mat,
    pub ur: Mat,
    pub br: Vec<f64>,
    pub wh: Mat,
    pub uh: Mat,
    pub bh: Vec<f64>,
}

/// Intermediates of one GRU application, retained for the backward pass.
#[derive(Debug, Clone)]
pub struct GruStep {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub htilde: Vec<f64>,
}

impl GruCell {
    pub fn state_dim(&self) -> usize {
        self.uz.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.wz.cols()
    }

    /// `z = σ(Wz x + Uz h + bz); r = σ(Wr x + Ur h + br);`
    /// `h̃ = tanh(Wh x + Uh (r⊙h) + bh); h′ = (1−z)⊙h + z⊙h̃`.
    pub fn step(&self, h: &[f64], x: &[f64]) -> (Vec<f64>, GruStep) {
        let dim = self.state_dim();
        assert_eq!(h.len(), dim, "gru state width");
        let mut az = self.wz.matvec(x);
        let mut ar = self.wr.matvec(x);
        let uzh = self.uz.matvec(h);
        let urh = self.ur.matvec(h);
        let mut z = vec![0.0; dim];
        let mut r = vec![0.0; dim];
        for i in 0..dim {
            az[i] += uzh[i] + self.bz[i];
            ar[i] += urh[i] + self.br[i];
            z[i] = sigmoid(az[i]);
            r[i] = sigmoid(ar[i]);
        }
        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        let mut ah = self.wh.matvec(x);
        let uhrh = self.uh.matvec(&rh);
        let mut htilde = vec![0.0; dim];
        let mut out = vec![0.0; dim];
        for i in 0..dim {
            ah[i] += uhrh[i] + self.bh[i];
            htilde[i] = ah[i].tanh();
            out[i] = (1.0 - z[i]) * h[i] + z[i] * htilde[i];
        }
        (out, GruStep { z, r, htilde })
    }
}

/// Free-function form of the GRU update (the step without the trace).
pub fn gru_update(cell: &GruCell, state: &[f64], input: &[f64]) -> Vec<f64> {
    cell.step(state, input).0
}

/// Wiring of one layer: how long it propagates and which earlier layers'
/// final states are concatenated into its GRU input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub timesteps: usize,
    pub residual_sources: Vec<usize>,
}

/// Parameters of one layer: an h×2h message matrix per vocabulary key
/// (columns split `[L | R]`) and the GRU cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub spec: LayerSpec,
    /// Indexed parallel to the model vocabulary.
    pub msg: Vec<Mat>,
    pub gru: GruCell,
}

/// 2-layer readout MLP: `y = w2 · tanh(W1 [h_v; a_v] + b1) + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub h: usize,
    pub d_feat: usize,
    pub layers: Vec<LayerSpec>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            h: 64,
            d_feat: 64,
            layers: vec![
                LayerSpec { timesteps: 2, residual_sources: vec![] },
                LayerSpec { timesteps: 2, residual_sources: vec![] },
                LayerSpec { timesteps: 1, residual_sources: vec![0] },
                LayerSpec { timesteps: 2, residual_sources: vec![] },
                LayerSpec { timesteps: 1, residual_sources: vec![0, 2] },
            ],
        }
    }
}

impl ModelConfig {
    /// The default wiring at a custom width (features as wide as the state).
    pub fn with_width(h: usize) -> Self {
        ModelConfig { h, d_feat: h, ..ModelConfig::default() }
    }
}

/// The full predictor. The vocabulary is frozen at construction; every
/// sign key a forward pass meets must be present.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub h: usize,
    pub d_feat: usize,
    /// Sorted, deduplicated sign keys.
    pub vocab: Vec<SignTriple>,
    pub layers: Vec<LayerParams>,
    pub readout: Readout,
}

impl Model {
    /// Fresh model with weights drawn uniformly from
    /// `(-1/√fan_in, 1/√fan_in)` and zero biases, deterministically from
    /// the seed. The vocabulary is sorted and deduplicated.
    pub fn new(cfg: &ModelConfig, vocab: &[SignTriple], seed: u64) -> Result<Model, HmpnnError> {
        validate_config(cfg)?;
        let mut vocab = vocab.to_vec();
        vocab.sort_unstable();
        vocab.dedup();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let init_mat = |rows: usize, cols: usize, rng: &mut ChaCha12Rng| {
            let bound = 1.0 / (cols as f64).sqrt();
            Mat::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound))
        };
        let h = cfg.h;
        let mut layers = Vec::with_capacity(cfg.layers.len());
        for spec in &cfg.layers {
            let d_in = h * (1 + spec.residual_sources.len());
            let msg: Vec<Mat> = (0..vocab.len()).map(|_| init_mat(h, 2 * h, &mut rng)).collect();
            let gru = GruCell {
                wz: init_mat(h, d_in, &mut rng),
                uz: init_mat(h, h, &mut rng),
                bz: vec![0.0; h],
                wr: init_mat(h, d_in, &mut rng),
                ur: init_mat(h, h, &mut rng),
                br: vec![0.0; h],
                wh: init_mat(h, d_in, &mut rng),
                uh: init_mat(h, h, &mut rng),
                bh: vec![0.0; h],
            };
            layers.push(LayerParams { spec: spec.clone(), msg, gru });
        }
        let readout = Readout {
            w1: init_mat(h, h + cfg.d_feat, &mut rng),
            b1: vec![0.0; h],
            w2: {
                let bound = 1.0 / (h as f64).sqrt();
                (0..h).map(|_| rng.gen_range(-bound..bound)).collect()
            },
            b2: 0.0,
        };
        Ok(Model { h, d_feat: cfg.d_feat, vocab, layers, readout })
    }

    /// Same shapes, all parameters zero — the gradient container.
    pub fn zeros_like(&self) -> Model {
        let mut m = self.clone();
        m.for_each_param_mut(&mut |slice| slice.fill(0.0));
        m
    }

    pub fn vocab_index(&self, key: &SignTriple) -> Option<usize> {
        self.vocab.binary_search(key).ok()
    }

    pub fn num_params(&self) -> usize {
        self.pack().len()
    }

    /// Canonical flat view of every parameter, in a fixed order.
    pub fn pack(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        let mut this = self.clone();
        this.for_each_param_mut(&mut |slice| flat.extend_from_slice(slice));
        flat
    }

    /// Inverse of [`Model::pack`].
    pub fn unpack(&mut self, flat: &[f64]) {
        let mut offset = 0;
        self.for_each_param_mut(&mut |slice| {
            slice.copy_from_slice(&flat[offset..offset + slice.len()]);
            offset += slice.len();
        });
        assert_eq!(offset, flat.len(), "flat parameter vector length");
    }

    /// Visits every parameter tensor in the canonical (pack) order.
    fn for_each_param_mut(&mut self, f: &mut impl FnMut(&mut [f64])) {
        for layer in &mut self.layers {
            for m in &mut layer.msg {
                f(m.data_mut());
            }
            let g = &mut layer.gru;
            f(g.wz.data_mut());
            f(g.uz.data_mut());
            f(&mut g.bz);
            f(g.wr.data_mut());
            f(g.ur.data_mut());
            f(&mut g.br);
            f(g.wh.data_mut());
            f(g.uh.data_mut());
            f(&mut g.bh);
        }
        f(self.readout.w1.data_mut());
        f(&mut self.readout.b1);
        f(&mut self.readout.w2);
        f(std::slice::from_mut(&mut self.readout.b2));
    }
}

fn validate_config(cfg: &ModelConfig) -> Result<(), HmpnnError> {
    if cfg.h == 0 || cfg.d_feat == 0 {
        return Err(HmpnnError::Corrupt("h and d_feat must be positive".into()));
    }
    if cfg.d_feat > cfg.h {
        return Err(HmpnnError::FeatureTooWide { d_feat: cfg.d_feat, h: cfg.h });
    }
    if cfg.layers.is_empty() {
        return Err(HmpnnError::Corrupt("at least one layer required".into()));
    }
    for (k, spec) in cfg.layers.iter().enumerate() {
        if spec.timesteps == 0 {
            return Err(HmpnnError::Corrupt(format!("layer {k}: timesteps must be >= 1")));
        }
        if spec.residual_sources.iter().any(|&s| s >= k) {
            return Err(HmpnnError::Corrupt(format!(
                "layer {k}: residual sources must reference earlier layers"
            )));
        }
    }
    Ok(())
}

/// Full structural check; every load and construction funnels through this.
fn validate_model(m: &Model) -> Result<(), HmpnnError> {
    validate_config(&ModelConfig {
        h: m.h,
        d_feat: m.d_feat,
        layers: m.layers.iter().map(|l| l.spec.clone()).collect(),
    })?;
    if m.vocab.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HmpnnError::Corrupt("vocab must be sorted and unique".into()));
    }
    let h = m.h;
    let bad = |what: &str| Err(HmpnnError::Corrupt(what.to_string()));
    let sound = |mat: &Mat, rows: usize, cols: usize| {
        mat.is_consistent() && mat.rows() == rows && mat.cols() == cols
    };
    for (k, layer) in m.layers.iter().enumerate() {
        if layer.msg.len() != m.vocab.len() {
            return bad(&format!("layer {k}: one message matrix per vocab key required"));
        }
        if !layer.msg.iter().all(|mat| sound(mat, h, 2 * h)) {
            return bad(&format!("layer {k}: message matrices must be {h}x{}", 2 * h));
        }
        let d_in = h * (1 + layer.spec.residual_sources.len());
        let g = &layer.gru;
        let w_ok = [&g.wz, &g.wr, &g.wh].iter().all(|w| sound(w, h, d_in));
        let u_ok = [&g.uz, &g.ur, &g.uh].iter().all(|u| sound(u, h, h));
        let b_ok = [&g.bz, &g.br, &g.bh].iter().all(|b| b.len() == h);
        if !(w_ok && u_ok && b_ok) {
            return bad(&format!("layer {k}: GRU shapes do not match h={h}, d_in={d_in}"));
        }
    }
    let r = &m.readout;
    if !sound(&r.w1, h, h + m.d_feat) || r.b1.len() != h || r.w2.len() != h {
        return bad("readout shapes do not match h and d_feat");
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    h: usize,
    d_feat: usize,
    vocab: Vec<String>,
    layers: Vec<LayerParams>,
    readout: Readout,
}

/// Renders the model as a self-describing versioned text checkpoint
/// (structured JSON; matrices row-major at full precision, vocabulary keys
/// sorted lexicographically).
pub fn save_model(model: &Model) -> String {
    let ckpt = Checkpoint {
        version: CHECKPOINT_VERSION,
        h: model.h,
        d_feat: model.d_feat,
        vocab: model.vocab.iter().map(triple_to_string).collect(),
        layers: model.layers.clone(),
        readout: model.readout.clone(),
    };
    serde_json::to_string_pretty(&ckpt).expect("checkpoint serialization is infallible")
}

/// Parses and validates a checkpoint produced by [`save_model`].
pub fn load_model(text: &str) -> Result<Model, HmpnnError> {
    let ckpt: Checkpoint =
        serde_json::from_str(text).map_err(|e| HmpnnError::Corrupt(e.to_string()))?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(HmpnnError::Version { found: ckpt.version, expected: CHECKPOINT_VERSION });
    }
    let mut vocab = Vec::with_capacity(ckpt.vocab.len());
    for s in &ckpt.vocab {
        vocab.push(
            triple_from_str(s)
                .ok_or_else(|| HmpnnError::Corrupt(format!("bad vocab key {s:?}")))?,
        );
    }
    let model = Model {
        h: ckpt.h,
        d_feat: ckpt.d_feat,
        vocab,
        layers: ckpt.layers,
        readout: ckpt.readout,
    };
    validate_model(&model)?;
    Ok(model)
}
