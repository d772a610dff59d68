//! Hand-written reverse-mode differentiation of the forward pass, plus a
//! finite-difference checker for it.
//!
//! The backward walk mirrors the forward trace exactly: readout first, then
//! layers in reverse. `d_finals[k]` collects every downstream gradient that
//! reaches layer k's final states — from the readout (last layer only), from
//! residual reads by later layers, and from the first timestep of layer k+1 —
//! and is complete by the time layer k itself is processed, because all of
//! those sources live in strictly later layers.

use super::forward::{forward, Trace};
use super::linalg::add_assign;
use super::model::{GruCell, GruStep, Model};
use super::{angle_loss_grad, DepthVector, HmpnnError};
use crate::hypergraph::{FeatureAssignment, Hypergraph3};

/// Loss and parameter gradients for one labelled instance. The gradient is
/// returned as a model-shaped container (`zeros_like` + accumulation).
pub fn gradients(
    model: &Model,
    hg: &Hypergraph3,
    feats: &FeatureAssignment,
    y_star: &DepthVector,
) -> Result<(f64, Model), HmpnnError> {
    let (y, trace) = forward(model, hg, feats)?;
    assert_eq!(
        y_star.num_vars(),
        y.num_vars(),
        "target depth vector must cover the same variables"
    );
    let (loss, dy) = angle_loss_grad(&y, y_star)?;
    let mut grads = model.zeros_like();
    backprop(model, hg, feats, &trace, &dy, &mut grads);
    Ok((loss, grads))
}

fn backprop(
    model: &Model,
    hg: &Hypergraph3,
    feats: &FeatureAssignment,
    trace: &Trace,
    dy: &[f64],
    grads: &mut Model,
) {
    let h = model.h;
    let n = hg.num_vars() as usize;
    let num_nodes = hg.num_nodes();
    let num_layers = model.layers.len();
    let _ = feats;

    // --- readout backward: gradient w.r.t. the last layer's final states ---
    let mut d_last = vec![vec![0.0; h]; num_nodes];
    for v in 1..=n {
        let rt = &trace.readout[v - 1];
        let dyv = dy[v - 1];
        let r = &model.readout;
        let gr = &mut grads.readout;
        gr.b2 += dyv;
        for (gw, t) in gr.w2.iter_mut().zip(&rt.t) {
            *gw += dyv * t;
        }
        // u = W1 c + b1, t = tanh(u), y = w2·t + b2
        let du: Vec<f64> =
            r.w2.iter().zip(&rt.t).map(|(w, t)| dyv * w * (1.0 - t * t)).collect();
        gr.w1.add_outer(&du, &rt.c);
        add_assign(&mut gr.b1, &du);
        let mut dc = vec![0.0; r.w1.cols()];
        r.w1.t_matvec_acc(&du, &mut dc);
        // c = [h_v; a_v]; the feature half is constant.
        for i in 0..h {
            d_last[v][i] += dc[i];
        }
    }

    // --- layers in reverse ---
    let mut d_finals: Vec<Vec<Vec<f64>>> = vec![vec![vec![0.0; h]; num_nodes]; num_layers];
    d_finals[num_layers - 1] = d_last;

    for k in (0..num_layers).rev() {
        let layer = &model.layers[k];
        let lt = &trace.layers[k];
        // Gradient w.r.t. the states flowing out of the current timestep;
        // starts at the layer's final states.
        let mut d_h = std::mem::take(&mut d_finals[k]);

        for st in lt.steps.iter().rev() {
            let mut d_h_in = vec![vec![0.0; h]; num_nodes];
            let mut d_m = vec![Vec::new(); num_nodes];

            for v in 0..num_nodes {
                let (dh_state, dx) = gru_backward(
                    &layer.gru,
                    &mut grads.layers[k].gru,
                    &st.h_in[v],
                    &st.x[v],
                    &st.gru[v],
                    &d_h[v],
                );
                add_assign(&mut d_h_in[v], &dh_state);
                // Split dx into the message segment and the residual segments.
                d_m[v] = dx[..h].to_vec();
                for (j, &src) in layer.spec.residual_sources.iter().enumerate() {
                    let seg = &dx[h * (1 + j)..h * (2 + j)];
                    add_assign(&mut d_finals[src][v], seg);
                }
            }

            // Message backward in the same canonical contribution order.
            for v in 0..num_nodes {
                let list = &trace.prepared.contribs[v];
                if list.is_empty() {
                    continue;
                }
                let lambda = 1.0 / list.len() as f64;
                let dm: Vec<f64> = d_m[v].iter().map(|a| a * lambda).collect();
                for &(l, r, key) in list {
                    let gm = &mut grads.layers[k].msg[key];
                    gm.add_outer_half(0, &dm, &st.h_in[l]);
                    gm.add_outer_half(1, &dm, &st.h_in[r]);
                    let mat = &layer.msg[key];
                    mat.t_matvec_half_acc(0, &dm, &mut d_h_in[l]);
                    mat.t_matvec_half_acc(1, &dm, &mut d_h_in[r]);
                }
            }

            d_h = d_h_in;
        }

        // The first timestep read the previous layer's final states (the
        // handcrafted initial states for k = 0, which carry no parameters).
        if k > 0 {
            for v in 0..num_nodes {
                add_assign(&mut d_finals[k - 1][v], &d_h[v]);
            }
        }
    }
}

/// Reverse of one GRU step. Returns (d state, d input) and accumulates the
/// parameter gradients into `g`.
fn gru_backward(
    cell: &GruCell,
    g: &mut GruCell,
    hv: &[f64],
    xv: &[f64],
    st: &GruStep,
    d_out: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let dim = hv.len();
    let mut dh = vec![0.0; dim];
    let mut daz = vec![0.0; dim];
    let mut dar = vec![0.0; dim];
    let mut dah = vec![0.0; dim];
    // h′ = (1−z)⊙h + z⊙h̃
    for i in 0..dim {
        let (z, ht) = (st.z[i], st.htilde[i]);
        let dz = d_out[i] * (ht - hv[i]);
        let dht = d_out[i] * z;
        dh[i] = d_out[i] * (1.0 - z);
        dah[i] = dht * (1.0 - ht * ht);
        daz[i] = dz * z * (1.0 - z);
    }
    // h̃ = tanh(Wh x + Uh (r⊙h) + bh)
    let mut d_rh = vec![0.0; dim];
    cell.uh.t_matvec_acc(&dah, &mut d_rh);
    for i in 0..dim {
        let dr = d_rh[i] * hv[i];
        dh[i] += d_rh[i] * st.r[i];
        dar[i] = dr * st.r[i] * (1.0 - st.r[i]);
    }
    // Parameter gradients.
    let rh: Vec<f64> = st.r.iter().zip(hv).map(|(a, b)| a * b).collect();
    g.wz.add_outer(&daz, xv);
    g.uz.add_outer(&daz, hv);
    add_assign(&mut g.bz, &daz);
    g.wr.add_outer(&dar, xv);
    g.ur.add_outer(&dar, hv);
    add_assign(&mut g.br, &dar);
    g.wh.add_outer(&dah, xv);
    g.uh.add_outer(&dah, &rh);
    add_assign(&mut g.bh, &dah);
    // Input and remaining state paths.
    let mut dx = vec![0.0; xv.len()];
    cell.wz.t_matvec_acc(&daz, &mut dx);
    cell.wr.t_matvec_acc(&dar, &mut dx);
    cell.wh.t_matvec_acc(&dah, &mut dx);
    cell.uz.t_matvec_acc(&daz, &mut dh);
    cell.ur.t_matvec_acc(&dar, &mut dh);
    (dh, dx)
}

/// Compares the analytic gradient against central finite differences over
/// every parameter. Returns the worst relative discrepancy, where the
/// denominator is floored at 0.01 so near-zero entries compare absolutely.
pub fn gradient_check(
    model: &Model,
    hg: &Hypergraph3,
    feats: &FeatureAssignment,
    y_star: &DepthVector,
    step: f64,
) -> Result<f64, HmpnnError> {
    let (_, analytic) = gradients(model, hg, feats, y_star)?;
    let analytic = analytic.pack();
    let base = model.pack();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let mut flat = base.clone();
        flat[i] = base[i] + step;
        probe.unpack(&flat);
        let up = eval_loss(&probe, hg, feats, y_star)?;
        flat[i] = base[i] - step;
        probe.unpack(&flat);
        let down = eval_loss(&probe, hg, feats, y_star)?;
        let numeric = (up - down) / (2.0 * step);
        let a = analytic[i];
        let rel = (a - numeric).abs() / (0.01f64).max(a.abs()).max(numeric.abs());
        if rel > worst {
            worst = rel;
        }
    }
    Ok(worst)
}

fn eval_loss(
    model: &Model,
    hg: &Hypergraph3,
    feats: &FeatureAssignment,
    y_star: &DepthVector,
) -> Result<f64, HmpnnError> {
    let (y, _) = forward(model, hg, feats)?;
    super::angle_loss(&y, y_star)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    use super::super::model::{LayerSpec, Model, ModelConfig};
    use super::super::testutil::rand_cnf;
    use super::super::{predict, target_depths, vocab_of};
    use super::*;
    use crate::cnf::{Cnf, Literal, VarId};
    use crate::hypergraph::{cnf_to_hypergraph, feature_rank};
    use crate::hypergraph::Sign::Minus;

    fn three_var_cnf() -> Cnf {
        Cnf::new(
            3,
            vec![
                vec![Literal::pos(1), Literal::neg(2), Literal::pos(3)],
                vec![Literal::pos(2), Literal::pos(3)],
                vec![Literal::neg(1)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn finite_differences_confirm_the_gradients_on_a_single_layer() {
        let cnf = three_var_cnf();
        let hg = cnf_to_hypergraph(&cnf);
        let feats = feature_rank(&cnf, 4);
        let cfg = ModelConfig {
            h: 4,
            d_feat: 4,
            layers: vec![LayerSpec { timesteps: 1, residual_sources: vec![] }],
        };
        let model = Model::new(&cfg, &vocab_of([&hg]), 17).unwrap();
        let y_star = target_depths(&[VarId(2), VarId(3), VarId(1)]);
        let worst = gradient_check(&model, &hg, &feats, &y_star, 1e-5).unwrap();
        assert!(worst <= 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn finite_differences_confirm_the_gradients_through_residuals() {
        // Multiple timesteps and two residual readers of layer 0 exercise
        // every accumulation path in the backward bookkeeping.
        let cnf = three_var_cnf();
        let hg = cnf_to_hypergraph(&cnf);
        let feats = feature_rank(&cnf, 3);
        let cfg = ModelConfig {
            h: 3,
            d_feat: 3,
            layers: vec![
                LayerSpec { timesteps: 2, residual_sources: vec![] },
                LayerSpec { timesteps: 1, residual_sources: vec![0] },
                LayerSpec { timesteps: 2, residual_sources: vec![0, 1] },
            ],
        };
        let model = Model::new(&cfg, &vocab_of([&hg]), 19).unwrap();
        let y_star = target_depths(&[VarId(3), VarId(1), VarId(2)]);
        let worst = gradient_check(&model, &hg, &feats, &y_star, 1e-5).unwrap();
        assert!(worst <= 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn finite_differences_confirm_the_gradients_on_random_instances() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for round in 0..5 {
            let cnf = rand_cnf(&mut rng, 4, 5);
            let hg = cnf_to_hypergraph(&cnf);
            let feats = feature_rank(&cnf, 3);
            let cfg = ModelConfig {
                h: 3,
                d_feat: 3,
                layers: vec![
                    LayerSpec { timesteps: 2, residual_sources: vec![] },
                    LayerSpec { timesteps: 1, residual_sources: vec![0] },
                ],
            };
            let model = Model::new(&cfg, &vocab_of([&hg]), 100 + round).unwrap();
            let y_star = target_depths(&[VarId(4), VarId(2), VarId(1), VarId(3)]);
            let worst = gradient_check(&model, &hg, &feats, &y_star, 1e-5).unwrap();
            assert!(worst <= 1e-4, "round {round}: worst relative error {worst}");
        }
    }

    #[test]
    fn unused_sign_keys_get_exactly_zero_gradient() {
        // All-positive instance, but the vocabulary also carries (−,−,−).
        let cnf =
            Cnf::new(3, vec![vec![Literal::pos(1), Literal::pos(2), Literal::pos(3)]]).unwrap();
        let hg = cnf_to_hypergraph(&cnf);
        let feats = feature_rank(&cnf, 3);
        let mut vocab = vocab_of([&hg]);
        let unused = [Minus, Minus, Minus];
        vocab.push(unused);
        let cfg = ModelConfig {
            h: 3,
            d_feat: 3,
            layers: vec![LayerSpec { timesteps: 2, residual_sources: vec![] }],
        };
        let model = Model::new(&cfg, &vocab, 29).unwrap();
        let y_star = target_depths(&[VarId(1), VarId(3), VarId(2)]);
        let (_, grads) = gradients(&model, &hg, &feats, &y_star).unwrap();
        let idx = model.vocab_index(&unused).unwrap();
        for layer in &grads.layers {
            assert!(layer.msg[idx].data().iter().all(|&g| g == 0.0));
        }
        // The used key, by contrast, accumulates something.
        let used = model.vocab_index(&crate::hypergraph::focus_key(
            &hg.edges()[0].ty,
            0,
        ))
        .unwrap();
        assert!(grads.layers[0].msg[used].data().iter().any(|&g| g != 0.0));
    }

    #[test]
    fn gradient_at_the_target_is_finite() {
        let cnf = three_var_cnf();
        let hg = cnf_to_hypergraph(&cnf);
        let feats = feature_rank(&cnf, 3);
        let cfg = ModelConfig {
            h: 3,
            d_feat: 3,
            layers: vec![LayerSpec { timesteps: 1, residual_sources: vec![] }],
        };
        let model = Model::new(&cfg, &vocab_of([&hg]), 37).unwrap();
        // The model's own output as the target: zero loss, and the ε-clamp
        // keeps the arccos factor (hence every gradient) finite and tiny.
        let y_star = predict(&model, &hg, &feats).unwrap();
        let (loss, grads) = gradients(&model, &hg, &feats, &y_star).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.pack().iter().all(|&g| g.is_finite() && g.abs() <= 1e-8));
    }

    #[test]
    fn gradients_are_deterministic() {
        let cnf = three_var_cnf();
        let hg = cnf_to_hypergraph(&cnf);
        let feats = feature_rank(&cnf, 4);
        let model =
            Model::new(&ModelConfig::with_width(4), &vocab_of([&hg]), 41).unwrap();
        let y_star = target_depths(&[VarId(2), VarId(1), VarId(3)]);
        let (l1, g1) = gradients(&model, &hg, &feats, &y_star).unwrap();
        let (l2, g2) = gradients(&model, &hg, &feats, &y_star).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(g1.pack(), g2.pack());
    }
}
