//! Multilayer perceptron mapping time to the four normalized compartments,
//! with exact propagation of the time-tangent needed by the ODE residual.
//!
//! The network input is scaled time `t / t_scale` so hidden activations stay
//! well-conditioned over a multi-week horizon; the tangent seed carries the
//! matching `1 / t_scale` chain-rule factor, so `du_dt` is always in per-day
//! units. Hidden layers are tanh, the output layer is identity: the model is
//! allowed to predict negative compartments, and only the logical loss
//! penalizes it for doing so.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tape::{NodeId, Tape};

/// Compartment order of the 4-dimensional network output.
pub const COMPARTMENTS: [&str; 4] = ["s", "e", "i", "r"];
/// Index of the infected compartment in the output vector.
pub const I_COMP: usize = 2;

/// Flat parameter vector plus the architecture that interprets it.
///
/// Layout per layer: all weights (output-major: unit `j`'s `n_in` weights
/// are contiguous), then the layer's biases. Total length is
/// `sum((n_in + 1) * n_out)` over layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub layer_sizes: Vec<usize>,
    pub theta: Vec<f64>,
}

impl NetworkParams {
    /// Glorot-uniform weights, zero biases, reproducible under `seed`.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = Vec::with_capacity(param_count(layer_sizes));
        for win in layer_sizes.windows(2) {
            let (n_in, n_out) = (win[0], win[1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            for _ in 0..n_in * n_out {
                theta.push(rng.random_range(-limit..limit));
            }
            theta.extend(std::iter::repeat_n(0.0, n_out));
        }
        Ok(NetworkParams { layer_sizes: layer_sizes.to_vec(), theta })
    }

    /// Same architecture with a caller-provided flat vector.
    pub fn from_theta(layer_sizes: &[usize], theta: Vec<f64>) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        if theta.len() != param_count(layer_sizes) {
            return Err(Error::Config(format!(
                "theta length {} does not match architecture ({} expected)",
                theta.len(),
                param_count(layer_sizes)
            )));
        }
        Ok(NetworkParams { layer_sizes: layer_sizes.to_vec(), theta })
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.layer_sizes)
    }

    /// Plain `f64` forward pass. Mirrors the tape forward op-for-op (same
    /// accumulation order), so values agree bitwise with graph evaluation.
    pub fn eval(&self, t_days: f64, t_scale: f64) -> [f64; 4] {
        let sizes = &self.layer_sizes;
        let mut act = vec![t_days / t_scale];
        let mut off = 0;
        for (l, win) in sizes.windows(2).enumerate() {
            let (n_in, n_out) = (win[0], win[1]);
            let last = l + 2 == sizes.len();
            let mut next = Vec::with_capacity(n_out);
            for j in 0..n_out {
                let mut acc = self.theta[off + n_in * n_out + j];
                for (i, &a) in act.iter().enumerate() {
                    acc += self.theta[off + j * n_in + i] * a;
                }
                next.push(if last { acc } else { acc.tanh() });
            }
            act = next;
            off += (n_in + 1) * n_out;
        }
        [act[0], act[1], act[2], act[3]]
    }

    /// Writes the snapshot as JSON (`layer_sizes` + flat `theta`).
    pub fn save_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, self).map_err(|e| Error::Io(e.into()))?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn load_json<R: Read>(r: R) -> Result<Self> {
        let p: NetworkParams =
            serde_json::from_reader(r).map_err(|e| Error::Parse(format!("params json: {e}")))?;
        NetworkParams::from_theta(&p.layer_sizes, p.theta)
    }

    pub fn save_file(&self, path: &Path) -> Result<()> {
        self.save_json(std::fs::File::create(path)?)
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        Self::load_json(std::fs::File::open(path)?)
    }
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::Config("need at least input and output layers".into()));
    }
    if layer_sizes[0] != 1 {
        return Err(Error::Config(format!("input width must be 1, got {}", layer_sizes[0])));
    }
    if *layer_sizes.last().unwrap() != 4 {
        return Err(Error::Config(format!(
            "output width must be 4 (S,E,I,R), got {}",
            layer_sizes.last().unwrap()
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::Config("zero-width layer".into()));
    }
    Ok(())
}

pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

/// Network output and its exact time derivative, as graph nodes.
#[derive(Clone, Copy, Debug)]
pub struct TangentOutput {
    pub u: [NodeId; 4],
    pub du_dt: [NodeId; 4],
}

/// A network whose parameters already live on a tape as leaves.
/// Construction order of the leaves must match the flat theta layout.
pub struct TapedNet<'a> {
    pub layer_sizes: &'a [usize],
    pub theta: &'a [NodeId],
    pub t_scale: f64,
}

impl<'a> TapedNet<'a> {
    pub fn new(layer_sizes: &'a [usize], theta: &'a [NodeId], t_scale: f64) -> Self {
        debug_assert_eq!(theta.len(), param_count(layer_sizes));
        TapedNet { layer_sizes, theta, t_scale }
    }

    /// Graph nodes for (S,E,I,R)(t); differentiable w.r.t. theta.
    pub fn forward(&self, tape: &mut Tape, t_days: f64) -> [NodeId; 4] {
        let mut act = vec![tape.constant(t_days / self.t_scale)];
        let mut off = 0;
        let sizes = self.layer_sizes;
        for (l, win) in sizes.windows(2).enumerate() {
            let (n_in, n_out) = (win[0], win[1]);
            let last = l + 2 == sizes.len();
            let mut next = Vec::with_capacity(n_out);
            for j in 0..n_out {
                let mut acc = self.theta[off + n_in * n_out + j];
                for (i, &a) in act.iter().enumerate() {
                    let p = tape.mul(self.theta[off + j * n_in + i], a);
                    acc = tape.add(acc, p);
                }
                next.push(if last { acc } else { tape.tanh(acc) });
            }
            act = next;
            off += (n_in + 1) * n_out;
        }
        [act[0], act[1], act[2], act[3]]
    }

    /// Propagates the pair (z, dz/dt) through every layer: affine maps to
    /// (Wz + b, W dz), tanh to (tanh z, (1 - tanh^2 z) dz). The tangent is
    /// seeded with d(t/t_scale)/dt = 1/t_scale. Both components stay on the
    /// tape, so gradients of residuals built from them reach theta.
    pub fn forward_with_tangent(&self, tape: &mut Tape, t_days: f64) -> TangentOutput {
        let sizes = self.layer_sizes;
        let one = tape.constant(1.0);
        let mut act = vec![tape.constant(t_days / self.t_scale)];
        let mut tan = vec![tape.constant(1.0 / self.t_scale)];
        let mut off = 0;
        for (l, win) in sizes.windows(2).enumerate() {
            let (n_in, n_out) = (win[0], win[1]);
            let last = l + 2 == sizes.len();
            let mut next = Vec::with_capacity(n_out);
            let mut next_tan = Vec::with_capacity(n_out);
            for j in 0..n_out {
                let mut acc = self.theta[off + n_in * n_out + j];
                let mut dacc: Option<NodeId> = None;
                for i in 0..n_in {
                    let w = self.theta[off + j * n_in + i];
                    let p = tape.mul(w, act[i]);
                    acc = tape.add(acc, p);
                    let dp = tape.mul(w, tan[i]);
                    dacc = Some(match dacc {
                        Some(d) => tape.add(d, dp),
                        None => dp,
                    });
                }
                let dz = dacc.expect("layer with zero inputs");
                if last {
                    next.push(acc);
                    next_tan.push(dz);
                } else {
                    let y = tape.tanh(acc);
                    let y2 = tape.square(y);
                    let sech2 = tape.sub(one, y2);
                    next.push(y);
                    next_tan.push(tape.mul(sech2, dz));
                }
            }
            act = next;
            tan = next_tan;
            off += (n_in + 1) * n_out;
        }
        TangentOutput {
            u: [act[0], act[1], act[2], act[3]],
            du_dt: [tan[0], tan[1], tan[2], tan[3]],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taped_values(p: &NetworkParams, t: f64, t_scale: f64) -> [f64; 4] {
        let mut tape = Tape::new();
        let theta = tape.vars(&p.theta);
        let net = TapedNet::new(&p.layer_sizes, &theta, t_scale);
        let out = net.forward(&mut tape, t);
        out.map(|n| tape.value(n))
    }

    #[test]
    fn param_count_formula() {
        // sum((n_in + 1) * n_out): 2*32 + 33*32 + 33*4 = 1252.
        assert_eq!(param_count(&[1, 32, 32, 4]), 1252);
        assert_eq!(param_count(&[1, 4]), 8);
        let p = NetworkParams::init(&[1, 32, 32, 4], 0).unwrap();
        assert_eq!(p.theta.len(), 1252);
    }

    #[test]
    fn init_is_seed_deterministic() {
        let a = NetworkParams::init(&[1, 8, 4], 3).unwrap();
        let b = NetworkParams::init(&[1, 8, 4], 3).unwrap();
        assert_eq!(a, b);
        let c = NetworkParams::init(&[1, 8, 4], 4).unwrap();
        let linf = a
            .theta
            .iter()
            .zip(&c.theta)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        assert!(linf > 0.0);
    }

    #[test]
    fn init_rejects_malformed_sizes() {
        assert!(matches!(NetworkParams::init(&[2, 4], 0), Err(Error::Config(_))));
        assert!(matches!(NetworkParams::init(&[1, 3], 0), Err(Error::Config(_))));
        assert!(matches!(NetworkParams::init(&[1], 0), Err(Error::Config(_))));
        assert!(matches!(NetworkParams::init(&[1, 0, 4], 0), Err(Error::Config(_))));
    }

    #[test]
    fn forward_finite_and_deterministic() {
        let p = NetworkParams::init(&[1, 16, 16, 4], 1).unwrap();
        for &t in &[0.0, 13.7, 100.0] {
            let a = taped_values(&p, t, 100.0);
            let b = taped_values(&p, t, 100.0);
            assert!(a.iter().all(|v| v.is_finite()));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn forward_is_continuous_at_tiny_offsets() {
        let p = NetworkParams::init(&[1, 32, 32, 4], 5).unwrap();
        let a = taped_values(&p, 0.0, 100.0);
        let b = taped_values(&p, 1e-9, 100.0);
        for k in 0..4 {
            assert!((a[k] - b[k]).abs() <= 1e-6);
        }
    }

    #[test]
    fn eval_matches_taped_forward() {
        let p = NetworkParams::init(&[1, 8, 8, 4], 11).unwrap();
        for &t in &[0.0, 7.5, 42.0, 100.0] {
            let taped = taped_values(&p, t, 100.0);
            let plain = p.eval(t, 100.0);
            assert_eq!(taped, plain);
        }
    }

    #[test]
    fn single_linear_layer_tangent_is_weight() {
        // u_j = w_j * t + b_j with t_scale = 1 => du_dt = w_j exactly.
        let theta = vec![0.3, -0.7, 1.1, 0.0, 0.5, 0.5, 0.5, 0.5];
        let p = NetworkParams::from_theta(&[1, 4], theta.clone()).unwrap();
        let mut tape = Tape::new();
        let nodes = tape.vars(&p.theta);
        let net = TapedNet::new(&p.layer_sizes, &nodes, 1.0);
        let out = net.forward_with_tangent(&mut tape, 2.0);
        for j in 0..4 {
            assert_eq!(tape.value(out.du_dt[j]), theta[j]);
            assert_eq!(tape.value(out.u[j]), theta[j] * 2.0 + theta[4 + j]);
        }
    }

    #[test]
    fn constant_network_has_zero_tangent() {
        // Zero all weights into the output layer: u is constant in t.
        let mut p = NetworkParams::init(&[1, 6, 4], 2).unwrap();
        let off = (1 + 1) * 6;
        for w in &mut p.theta[off..off + 6 * 4] {
            *w = 0.0;
        }
        let mut tape = Tape::new();
        let nodes = tape.vars(&p.theta);
        let net = TapedNet::new(&p.layer_sizes, &nodes, 100.0);
        let out = net.forward_with_tangent(&mut tape, 33.0);
        for j in 0..4 {
            assert_eq!(tape.value(out.du_dt[j]), 0.0);
        }
    }

    #[test]
    fn tangent_matches_finite_difference_in_time() {
        // 50-point grid x 10 random networks, relative error <= 1e-6.
        let t_scale = 100.0;
        for seed in 0..10 {
            let p = NetworkParams::init(&[1, 10, 10, 4], seed).unwrap();
            for k in 0..50 {
                let t = 1.0 + 98.0 * (k as f64) / 49.0;
                let h = 1e-5;
                let up = p.eval(t + h, t_scale);
                let um = p.eval(t - h, t_scale);
                let mut tape = Tape::new();
                let nodes = tape.vars(&p.theta);
                let net = TapedNet::new(&p.layer_sizes, &nodes, t_scale);
                let out = net.forward_with_tangent(&mut tape, t);
                for j in 0..4 {
                    let fd = (up[j] - um[j]) / (2.0 * h);
                    let got = tape.value(out.du_dt[j]);
                    let tol = 1e-6 * fd.abs().max(got.abs()).max(1e-4);
                    assert!((got - fd).abs() <= tol, "seed {seed} t {t} comp {j}: {got} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn tangent_values_match_plain_forward() {
        let p = NetworkParams::init(&[1, 12, 4], 9).unwrap();
        let mut tape = Tape::new();
        let nodes = tape.vars(&p.theta);
        let net = TapedNet::new(&p.layer_sizes, &nodes, 50.0);
        let out = net.forward_with_tangent(&mut tape, 17.0);
        let plain = net.forward(&mut tape, 17.0);
        for (a, b) in out.u.iter().zip(&plain) {
            assert_eq!(tape.value(*a), tape.value(*b));
        }
    }

    #[test]
    fn residual_gradient_wrt_theta_matches_fd() {
        // grad_theta of sum over a few points of ||(u, du_dt)||^2 composite,
        // against central differences over theta; 1e-4 relative.
        let sizes = [1usize, 6, 4];
        let p = NetworkParams::init(&sizes, 13).unwrap();
        let t_scale = 10.0;
        let ts = [1.0, 4.0, 8.5];
        let objective = |theta: &[f64]| -> f64 {
            let mut tape = Tape::new();
            let nodes = tape.vars(theta);
            let net = TapedNet::new(&sizes, &nodes, t_scale);
            let mut total = 0.0;
            for &t in &ts {
                let o = net.forward_with_tangent(&mut tape, t);
                for j in 0..4 {
                    total += tape.value(o.u[j]).powi(2) + tape.value(o.du_dt[j]).powi(2);
                }
            }
            total
        };
        let mut tape = Tape::new();
        let nodes = tape.vars(&p.theta);
        let net = TapedNet::new(&sizes, &nodes, t_scale);
        let mut parts = Vec::new();
        for &t in &ts {
            let o = net.forward_with_tangent(&mut tape, t);
            for j in 0..4 {
                let a = tape.square(o.u[j]);
                let b = tape.square(o.du_dt[j]);
                parts.push(tape.add(a, b));
            }
        }
        let root = tape.sum(&parts);
        let got = tape.backward(root);
        let h = 1e-6;
        for k in 0..p.theta.len() {
            let mut tp = p.theta.clone();
            let mut tm = p.theta.clone();
            tp[k] += h;
            tm[k] -= h;
            let fd = (objective(&tp) - objective(&tm)) / (2.0 * h);
            let tol = 1e-4 * fd.abs().max(got[k].abs()).max(1e-6);
            assert!((got[k] - fd).abs() <= tol, "theta[{k}]: {} vs {}", got[k], fd);
        }
    }

    #[test]
    fn snapshot_round_trips() {
        let p = NetworkParams::init(&[1, 8, 4], 21).unwrap();
        let mut buf = Vec::new();
        p.save_json(&mut buf).unwrap();
        let q = NetworkParams::load_json(buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }
}
