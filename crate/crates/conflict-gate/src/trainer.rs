//! The training loop: per-loss gradients, weight update, parameter step,
//! trace recording.
//!
//! Every step builds three independent graphs over identical parameter
//! values (one per loss) and runs one backward pass on each; the per-loss
//! gradients are what the weighting geometry consumes. The extra cost over
//! a single total-loss pass is a constant factor, acceptable at this scale.
//!
//! "Theory mode" (alpha = 0, plain gradient descent) disables the EMA so
//! the descent and rate checks in [`crate::analysis`] are exactly
//! assertable; Adam with alpha = 0.9 is the experiment default.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{data_loss, logic_loss, ode_loss};
use crate::net::{param_count, NetworkParams, TapedNet};
use crate::seir::{CollocationGrid, Dataset, RateNodes, SeirParams};
use crate::tape::{softplus, NodeId, Tape};
use crate::weighting::{combine, dot, norm, GateState, GradientDiagnostics};

/// Physics-weight selection policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Constant lambda_phy for the whole run.
    Fixed { lambda_phy: f64 },
    /// Magnitude balancing: the gated update with the gate forced to 1.
    Lra,
    /// Conflict-gated gradient scaling.
    Cggs,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Fixed { .. } => "fixed",
            Strategy::Lra => "lra",
            Strategy::Cggs => "cggs",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Gd { eta: f64 },
    Adam { eta: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn eta(&self) -> f64 {
        match *self {
            Optimizer::Gd { eta } => eta,
            Optimizer::Adam { eta, .. } => eta,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Gd { .. } => "gd",
            Optimizer::Adam { .. } => "adam",
        }
    }

    pub fn default_adam() -> Self {
        Optimizer::Adam { eta: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Full description of one run. Serialized alongside results so traces can
/// be re-verified without guessing the configuration that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub strategy: Strategy,
    pub optimizer: Optimizer,
    pub steps: usize,
    pub seed: u64,
    pub layer_sizes: Vec<usize>,
    pub grid_points: usize,
    pub t_horizon: f64,
    /// EMA momentum of the adaptive weight; 0 disables smoothing.
    pub alpha: f64,
    /// Gate sharpness.
    pub kappa: f64,
    /// Regularizer in the magnitude ratio and the cosine denominator.
    pub epsilon: f64,
    pub lambda_logic: f64,
    /// Train (beta, sigma, gamma) jointly with theta, kept positive through
    /// a softplus reparameterization.
    pub inverse_mode: bool,
    /// Test hook: pins the conflict gate to a constant factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_override: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            strategy: Strategy::Cggs,
            optimizer: Optimizer::default_adam(),
            steps: 2000,
            seed: 0,
            layer_sizes: vec![1, 32, 32, 4],
            grid_points: 200,
            t_horizon: 100.0,
            alpha: 0.9,
            kappa: 5.0,
            epsilon: 1e-8,
            lambda_logic: 1.0,
            inverse_mode: false,
            gate_override: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if self.optimizer.eta() <= 0.0 || self.optimizer.eta().is_nan() {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Config("alpha must be in [0, 1)".into()));
        }
        if self.kappa < 0.0 || self.epsilon <= 0.0 {
            return Err(Error::Config("kappa must be >= 0 and epsilon > 0".into()));
        }
        if self.grid_points < 2 {
            return Err(Error::Config("grid needs at least 2 points".into()));
        }
        Ok(())
    }

    /// Alpha = 0 plus plain gradient descent at the given rate.
    pub fn theory_mode(mut self, eta: f64) -> Self {
        self.alpha = 0.0;
        self.optimizer = Optimizer::Gd { eta };
        self
    }

    pub fn is_theory_mode(&self) -> bool {
        self.alpha == 0.0 && matches!(self.optimizer, Optimizer::Gd { .. })
    }
}

/// One row of the training trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub l_data: f64,
    pub l_ode: f64,
    pub l_logic: f64,
    pub lambda_hat: f64,
    pub s_cos: f64,
    pub norm_data: f64,
    pub norm_phy: f64,
    /// <d, g_data> for the step's final update direction d.
    pub descent_inner: f64,
    pub d_norm: f64,
    /// Not part of the CSV contract; NaN on traces loaded from disk.
    pub norm_logic: f64,
}

impl TraceRecord {
    /// Whether the logical term was inactive this step. On loaded traces
    /// (no norm_logic) an exactly-zero logical loss is an equivalent proxy:
    /// with the ReLU partial at 0 defined as 0, l_logic == 0 forces
    /// g_logic == 0.
    pub fn logic_inactive(&self) -> bool {
        if self.norm_logic.is_nan() {
            self.l_logic == 0.0
        } else {
            self.norm_logic < 1e-12
        }
    }
}

/// Step-indexed record of one run plus the final parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    pub final_theta: Vec<f64>,
    /// (beta, sigma, gamma) recovered by inverse mode, if enabled.
    pub recovered_rates: Option<[f64; 3]>,
    /// Present on traces produced in-process; None when loaded from CSV.
    pub config: Option<TrainConfig>,
}

pub const TRACE_HEADER: [&str; 10] = [
    "step",
    "l_data",
    "l_ode",
    "l_logic",
    "lambda_hat",
    "s_cos",
    "norm_data",
    "norm_phy",
    "descent_inner",
    "d_norm",
];

impl TrainTrace {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(TRACE_HEADER).map_err(|e| Error::Parse(e.to_string()))?;
        for r in &self.records {
            wtr.serialize((
                r.step,
                r.l_data,
                r.l_ode,
                r.l_logic,
                r.lambda_hat,
                r.s_cos,
                r.norm_data,
                r.norm_phy,
                r.descent_inner,
                r.d_norm,
            ))
            .map_err(|e| Error::Parse(e.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<TrainTrace> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers().map_err(|e| Error::Parse(format!("header: {e}")))?;
        if headers.iter().collect::<Vec<_>>() != TRACE_HEADER {
            return Err(Error::Parse(format!("unexpected trace header {headers:?}")));
        }
        let mut records = Vec::new();
        type Row = (usize, f64, f64, f64, f64, f64, f64, f64, f64, f64);
        for (k, rec) in rdr.deserialize::<Row>().enumerate() {
            let (step, l_data, l_ode, l_logic, lambda_hat, s_cos, norm_data, norm_phy, descent_inner, d_norm) =
                rec.map_err(|e| Error::Parse(format!("row {}: {e}", k + 1)))?;
            records.push(TraceRecord {
                step,
                l_data,
                l_ode,
                l_logic,
                lambda_hat,
                s_cos,
                norm_data,
                norm_phy,
                descent_inner,
                d_norm,
                norm_logic: f64::NAN,
            });
        }
        if records.is_empty() {
            return Err(Error::Parse("trace has no rows".into()));
        }
        for (k, r) in records.iter().enumerate() {
            if r.step != k {
                return Err(Error::Validation(format!(
                    "step indices not contiguous: row {k} has step {}",
                    r.step
                )));
            }
        }
        Ok(TrainTrace { records, final_theta: Vec::new(), recovered_rates: None, config: None })
    }

    pub fn load_csv(path: &Path) -> Result<TrainTrace> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Loss values read off the step's graphs.
#[derive(Clone, Copy, Debug)]
pub struct LossValues {
    pub l_data: f64,
    pub l_ode: f64,
    pub l_logic: f64,
}

/// Everything a step consumes besides the trainable state.
pub struct StepInputs<'a> {
    pub dataset: &'a Dataset,
    pub grid: &'a CollocationGrid,
    pub seir: &'a SeirParams,
}

/// Elementwise parameter steppers.
#[derive(Clone, Debug)]
pub enum OptimizerState {
    Gd { eta: f64 },
    Adam { eta: f64, beta1: f64, beta2: f64, eps: f64, m: Vec<f64>, v: Vec<f64>, t: usize },
}

impl OptimizerState {
    pub fn new(opt: &Optimizer, dim: usize) -> Self {
        match *opt {
            Optimizer::Gd { eta } => OptimizerState::Gd { eta },
            Optimizer::Adam { eta, beta1, beta2, eps } => OptimizerState::Adam {
                eta,
                beta1,
                beta2,
                eps,
                m: vec![0.0; dim],
                v: vec![0.0; dim],
                t: 0,
            },
        }
    }

    /// theta <- theta - eta * (preconditioned) d.
    pub fn apply(&mut self, theta: &mut [f64], d: &[f64]) {
        match self {
            OptimizerState::Gd { eta } => {
                for (p, &g) in theta.iter_mut().zip(d) {
                    *p -= *eta * g;
                }
            }
            OptimizerState::Adam { eta, beta1, beta2, eps, m, v, t } => {
                *t += 1;
                let bc1 = 1.0 - beta1.powi(*t as i32);
                let bc2 = 1.0 - beta2.powi(*t as i32);
                for k in 0..theta.len() {
                    m[k] = *beta1 * m[k] + (1.0 - *beta1) * d[k];
                    v[k] = *beta2 * v[k] + (1.0 - *beta2) * d[k] * d[k];
                    let m_hat = m[k] / bc1;
                    let v_hat = v[k] / bc2;
                    theta[k] -= *eta * m_hat / (v_hat.sqrt() + *eps);
                }
            }
        }
    }
}

/// Mutable state threaded through the loop.
pub struct TrainState {
    /// Network parameters followed by the raw (pre-softplus) rates when
    /// inverse mode is on.
    pub theta_all: Vec<f64>,
    pub n_net: usize,
    pub gate: GateState,
    pub optimizer: OptimizerState,
}

fn build_leaves(
    tape: &mut Tape,
    theta_all: &[f64],
    n_net: usize,
) -> (Vec<NodeId>, Option<[NodeId; 3]>) {
    let theta_nodes = tape.vars(&theta_all[..n_net]);
    let rate_raw = if theta_all.len() > n_net {
        let r: Vec<NodeId> = tape.vars(&theta_all[n_net..]);
        Some([r[0], r[1], r[2]])
    } else {
        None
    };
    (theta_nodes, rate_raw)
}

fn rate_nodes(
    tape: &mut Tape,
    raw: Option<[NodeId; 3]>,
    seir: &SeirParams,
) -> Result<RateNodes> {
    match raw {
        None => Ok(RateNodes {
            beta: tape.constant(seir.beta),
            sigma: tape.constant(seir.sigma),
            gamma: tape.constant(seir.gamma),
        }),
        Some(raws) => {
            // softplus keeps the effective rates positive for any raw value.
            let one = tape.constant(1.0);
            let mut out = [raws[0]; 3];
            for (slot, raw) in out.iter_mut().zip(raws) {
                let e = tape.exp(raw);
                let s = tape.add(one, e);
                *slot = tape.ln(s)?;
            }
            Ok(RateNodes { beta: out[0], sigma: out[1], gamma: out[2] })
        }
    }
}

/// Three separate backward passes from independently built graphs over
/// identical parameter values. The diagnostics depend on the parameters
/// only, never on the weighting strategy.
pub fn compute_gradients(
    tape: &mut Tape,
    layer_sizes: &[usize],
    theta_all: &[f64],
    t_scale: f64,
    epsilon: f64,
    inputs: &StepInputs,
) -> Result<(LossValues, GradientDiagnostics)> {
    let n_net = param_count(layer_sizes);

    tape.clear();
    let (theta_nodes, _) = build_leaves(tape, theta_all, n_net);
    let net = TapedNet::new(layer_sizes, &theta_nodes, t_scale);
    let root = data_loss(&net, tape, inputs.dataset)?;
    let l_data = tape.value(root);
    let g_data = tape.backward(root);

    tape.clear();
    let (theta_nodes, raw) = build_leaves(tape, theta_all, n_net);
    let net = TapedNet::new(layer_sizes, &theta_nodes, t_scale);
    let rates = rate_nodes(tape, raw, inputs.seir)?;
    let root = ode_loss(&net, tape, inputs.grid, &rates);
    let l_ode = tape.value(root);
    let g_phy = tape.backward(root);

    tape.clear();
    let (theta_nodes, _) = build_leaves(tape, theta_all, n_net);
    let net = TapedNet::new(layer_sizes, &theta_nodes, t_scale);
    let root = logic_loss(&net, tape, inputs.grid);
    let l_logic = tape.value(root);
    let g_logic = tape.backward(root);

    let diag = GradientDiagnostics::compute(g_data, g_phy, g_logic, epsilon)?;
    Ok((LossValues { l_data, l_ode, l_logic }, diag))
}

/// One iteration: gradients, strategy update, combine, optimizer step.
pub fn train_step(
    state: &mut TrainState,
    config: &TrainConfig,
    inputs: &StepInputs,
    tape: &mut Tape,
    step: usize,
) -> Result<TraceRecord> {
    let (losses, diag) = compute_gradients(
        tape,
        &config.layer_sizes,
        &state.theta_all,
        config.t_horizon,
        config.epsilon,
        inputs,
    )?;

    let lambda_phy = match config.strategy {
        Strategy::Fixed { lambda_phy } => lambda_phy,
        Strategy::Lra => {
            state.gate.lra_update(&diag);
            state.gate.lambda_hat
        }
        Strategy::Cggs => {
            match config.gate_override {
                Some(gate) => state.gate.cggs_update_with_gate(&diag, gate),
                None => state.gate.cggs_update(&diag),
            }
            state.gate.lambda_hat
        }
    };

    let d = combine(&diag, lambda_phy, config.lambda_logic);
    let record = TraceRecord {
        step,
        l_data: losses.l_data,
        l_ode: losses.l_ode,
        l_logic: losses.l_logic,
        lambda_hat: lambda_phy,
        s_cos: diag.s_cos,
        norm_data: diag.norm_data,
        norm_phy: diag.norm_phy,
        descent_inner: dot(&d, &diag.g_data),
        d_norm: norm(&d),
        norm_logic: diag.norm_logic,
    };
    if d.iter().any(|v| !v.is_finite()) {
        // Fail fast, preserve evidence.
        return Err(Error::Numerical(format!(
            "non-finite update direction at step {step}; last record: {record:?}"
        )));
    }
    state.optimizer.apply(&mut state.theta_all, &d);
    Ok(record)
}

fn softplus_inverse(y: f64) -> Result<f64> {
    if y <= 0.0 || y.is_nan() {
        return Err(Error::Config(format!("rate {y} not invertible through softplus")));
    }
    // ln(e^y - 1), stable for small y via expm1.
    Ok(y.exp_m1().ln())
}

/// Runs the full loop. Deterministic under (config, dataset): two identical
/// invocations produce bitwise-identical traces.
pub fn run(
    config: &TrainConfig,
    dataset: &Dataset,
    grid: &CollocationGrid,
    seir: &SeirParams,
) -> Result<TrainTrace> {
    let params = NetworkParams::init(&config.layer_sizes, config.seed)?;
    run_from(config, &params, dataset, grid, seir)
}

/// As [`run`], starting from a caller-provided snapshot instead of seed
/// initialization.
pub fn run_from(
    config: &TrainConfig,
    params: &NetworkParams,
    dataset: &Dataset,
    grid: &CollocationGrid,
    seir: &SeirParams,
) -> Result<TrainTrace> {
    config.validate()?;
    if params.layer_sizes != config.layer_sizes {
        return Err(Error::Config(format!(
            "snapshot architecture {:?} does not match configured {:?}",
            params.layer_sizes, config.layer_sizes
        )));
    }
    let params = params.clone();
    let n_net = params.theta.len();
    let mut theta_all = params.theta;
    if config.inverse_mode {
        theta_all.push(softplus_inverse(seir.beta)?);
        theta_all.push(softplus_inverse(seir.sigma)?);
        theta_all.push(softplus_inverse(seir.gamma)?);
    }
    let dim = theta_all.len();
    let mut state = TrainState {
        theta_all,
        n_net,
        gate: GateState::new(config.alpha, config.kappa, config.epsilon, config.lambda_logic),
        optimizer: OptimizerState::new(&config.optimizer, dim),
    };
    let inputs = StepInputs { dataset, grid, seir };
    let mut tape = Tape::new();
    let mut records = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        records.push(train_step(&mut state, config, &inputs, &mut tape, step)?);
    }
    let recovered_rates = config.inverse_mode.then(|| {
        [
            softplus(state.theta_all[n_net]),
            softplus(state.theta_all[n_net + 1]),
            softplus(state.theta_all[n_net + 2]),
        ]
    });
    state.theta_all.truncate(n_net);
    Ok(TrainTrace {
        records,
        final_theta: state.theta_all,
        recovered_rates,
        config: Some(config.clone()),
    })
}

/// The trained network as reusable parameters.
pub fn final_params(config: &TrainConfig, trace: &TrainTrace) -> Result<NetworkParams> {
    NetworkParams::from_theta(&config.layer_sizes, trace.final_theta.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seir::{self, default_initial_state};
    use crate::tape::sigmoid;

    fn small_config(strategy: Strategy) -> TrainConfig {
        TrainConfig {
            strategy,
            optimizer: Optimizer::default_adam(),
            steps: 10,
            seed: 3,
            layer_sizes: vec![1, 8, 4],
            grid_points: 25,
            ..TrainConfig::default()
        }
    }

    fn small_inputs() -> (Dataset, CollocationGrid, SeirParams) {
        let sp = SeirParams::default();
        let truth = seir::rk4_simulate(&sp, &default_initial_state(), 100.0, 0.1).unwrap();
        let ds = seir::generate_dataset(&truth, 20, 0.05, 42).unwrap();
        let grid = CollocationGrid::uniform(100.0, 25).unwrap();
        (ds, grid, sp)
    }

    #[test]
    fn diagnostics_do_not_depend_on_strategy() {
        let (ds, grid, sp) = small_inputs();
        let traces: Vec<TrainTrace> = [
            Strategy::Fixed { lambda_phy: 1.0 },
            Strategy::Lra,
            Strategy::Cggs,
        ]
        .into_iter()
        .map(|s| run(&small_config(s), &ds, &grid, &sp).unwrap())
        .collect();
        // Gradient geometry of step 0 precedes any weighting.
        for t in &traces[1..] {
            assert_eq!(t.records[0].s_cos, traces[0].records[0].s_cos);
            assert_eq!(t.records[0].norm_data, traces[0].records[0].norm_data);
            assert_eq!(t.records[0].norm_phy, traces[0].records[0].norm_phy);
        }
    }

    #[test]
    fn zero_network_on_zero_data_has_zero_data_gradient() {
        let sizes = vec![1usize, 6, 4];
        let theta = vec![0.0; param_count(&sizes)];
        let ds = Dataset {
            observations: vec![(10.0, 0.0), (20.0, 0.0), (50.0, 0.0)],
            noise_sigma: 0.0,
            seed: 0,
        };
        let grid = CollocationGrid::uniform(100.0, 10).unwrap();
        let sp = SeirParams::default();
        let mut tape = Tape::new();
        let (_, diag) = compute_gradients(
            &mut tape,
            &sizes,
            &theta,
            100.0,
            1e-8,
            &StepInputs { dataset: &ds, grid: &grid, seir: &sp },
        )
        .unwrap();
        assert!(diag.g_data.iter().all(|&g| g == 0.0));
        assert_eq!(diag.norm_data, 0.0);
    }

    #[test]
    fn data_gradient_matches_finite_differences() {
        let sizes = vec![1usize, 6, 4];
        let (ds, grid, sp) = small_inputs();
        let params = NetworkParams::init(&sizes, 5).unwrap();
        let mut tape = Tape::new();
        let inputs = StepInputs { dataset: &ds, grid: &grid, seir: &sp };
        let (_, diag) =
            compute_gradients(&mut tape, &sizes, &params.theta, 100.0, 1e-8, &inputs).unwrap();
        let eval = |theta: &[f64]| {
            let mut tape = Tape::new();
            let nodes = tape.vars(theta);
            let net = TapedNet::new(&sizes, &nodes, 100.0);
            let root = data_loss(&net, &mut tape, &ds).unwrap();
            tape.value(root)
        };
        let h = 1e-6;
        for k in 0..params.theta.len() {
            let mut tp = params.theta.clone();
            let mut tm = params.theta.clone();
            tp[k] += h;
            tm[k] -= h;
            let fd = (eval(&tp) - eval(&tm)) / (2.0 * h);
            let tol = 1e-5 * fd.abs().max(diag.g_data[k].abs()).max(1e-8);
            assert!((diag.g_data[k] - fd).abs() <= tol, "theta[{k}]");
        }
    }

    #[test]
    fn fixed_weight_stalls_on_injected_antiparallel_gradients() {
        // Synthetic injection of g_data = -c * g_phy with lambda_phy = c:
        // the combined direction is exactly zero, so theta does not move.
        let c = 1.75;
        let g_phy = vec![0.2, -0.9, 1.4, 0.05];
        let g_data: Vec<f64> = g_phy.iter().map(|v| -c * v).collect();
        let diag = GradientDiagnostics::compute(
            g_data.clone(),
            g_phy,
            vec![0.0; 4],
            1e-8,
        )
        .unwrap();
        let d = combine(&diag, c, 1.0);
        let mut theta = vec![1.0, 2.0, 3.0, 4.0];
        let before = theta.clone();
        OptimizerState::Gd { eta: 0.1 }.apply(&mut theta, &d);
        assert_eq!(theta, before);

        // The gated update escapes: |theta' - theta| >= eta (1 - sigmoid(-kappa)) |g_data|.
        let kappa = 5.0;
        let eta = 0.1;
        let mut gate = GateState::new(0.0, kappa, 1e-8, 1.0);
        gate.cggs_update(&diag);
        let d = combine(&diag, gate.lambda_hat, 1.0);
        let mut theta = before.clone();
        OptimizerState::Gd { eta }.apply(&mut theta, &d);
        let moved: f64 = theta
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(moved >= eta * (1.0 - sigmoid(-kappa)) * norm(&diag.g_data) * (1.0 - 1e-9));
    }

    #[test]
    fn gd_step_is_exact() {
        let d = vec![1.0, -2.0, 0.5];
        let mut theta = vec![10.0, 10.0, 10.0];
        OptimizerState::Gd { eta: 0.25 }.apply(&mut theta, &d);
        assert_eq!(theta, vec![9.75, 10.5, 9.875]);
    }

    #[test]
    fn single_step_run_has_single_record() {
        let (ds, grid, sp) = small_inputs();
        let mut cfg = small_config(Strategy::Cggs);
        cfg.steps = 1;
        let trace = run(&cfg, &ds, &grid, &sp).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].step, 0);
        assert_eq!(trace.final_theta.len(), param_count(&cfg.layer_sizes));
    }

    #[test]
    fn runs_are_bitwise_deterministic() {
        let (ds, grid, sp) = small_inputs();
        let cfg = small_config(Strategy::Cggs);
        let a = run(&cfg, &ds, &grid, &sp).unwrap();
        let b = run(&cfg, &ds, &grid, &sp).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forced_gate_reproduces_lra_bitwise() {
        let (ds, grid, sp) = small_inputs();
        let mut cggs = small_config(Strategy::Cggs);
        cggs.steps = 40;
        cggs.gate_override = Some(1.0);
        let mut lra = small_config(Strategy::Lra);
        lra.steps = 40;
        let a = run(&cggs, &ds, &grid, &sp).unwrap();
        let b = run(&lra, &ds, &grid, &sp).unwrap();
        assert_eq!(a.records.len(), b.records.len());
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.lambda_hat.to_bits(), rb.lambda_hat.to_bits());
            assert_eq!(ra.l_data.to_bits(), rb.l_data.to_bits());
            assert_eq!(ra.d_norm.to_bits(), rb.d_norm.to_bits());
        }
        assert_eq!(a.final_theta, b.final_theta);
    }

    #[test]
    fn exploding_rate_aborts_with_numerical_error() {
        let (ds, grid, sp) = small_inputs();
        let mut cfg = small_config(Strategy::Fixed { lambda_phy: 1.0 });
        cfg.optimizer = Optimizer::Gd { eta: 1e12 };
        cfg.steps = 50;
        let err = run(&cfg, &ds, &grid, &sp).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)), "got {err:?}");
    }

    #[test]
    fn trace_csv_round_trips() {
        let (ds, grid, sp) = small_inputs();
        let cfg = small_config(Strategy::Lra);
        let trace = run(&cfg, &ds, &grid, &sp).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let back = TrainTrace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.records.len(), trace.records.len());
        for (a, b) in trace.records.iter().zip(&back.records) {
            assert_eq!(a.l_data.to_bits(), b.l_data.to_bits());
            assert_eq!(a.s_cos.to_bits(), b.s_cos.to_bits());
            assert_eq!(a.descent_inner.to_bits(), b.descent_inner.to_bits());
        }
        // Byte-identical re-serialization.
        let mut buf2 = Vec::new();
        back.write_csv(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn trace_csv_rejects_non_contiguous_steps() {
        let text = "step,l_data,l_ode,l_logic,lambda_hat,s_cos,norm_data,norm_phy,descent_inner,d_norm\n0,1,1,0,1,0,1,1,1,1\n2,1,1,0,1,0,1,1,1,1\n";
        assert!(matches!(
            TrainTrace::read_csv(text.as_bytes()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn inverse_mode_keeps_rates_positive_and_stable() {
        // Clean data, rates initialized at the truth: they must stay
        // positive and move by <= 5% over a short run.
        let sp = SeirParams::default();
        let truth = seir::rk4_simulate(&sp, &default_initial_state(), 100.0, 0.1).unwrap();
        let ds = seir::generate_dataset(&truth, 20, 0.0, 1).unwrap();
        let grid = CollocationGrid::uniform(100.0, 25).unwrap();
        let mut cfg = small_config(Strategy::Cggs);
        cfg.inverse_mode = true;
        cfg.steps = 2000;
        cfg.layer_sizes = vec![1, 16, 16, 4];
        cfg.grid_points = 50;
        cfg.optimizer = Optimizer::Gd { eta: 1e-3 };
        let trace = run(&cfg, &ds, &grid, &sp).unwrap();
        let rates = trace.recovered_rates.unwrap();
        let want = [sp.beta, sp.sigma, sp.gamma];
        for (got, want) in rates.iter().zip(want) {
            assert!(*got > 0.0);
            let drift = (got - want).abs() / want;
            println!("rate {got} vs {want}: drift {drift:.4}");
            assert!(drift <= 0.05, "rate {got} vs {want}");
        }
    }

    #[test]
    fn softplus_reparameterization_is_positive_everywhere() {
        for raw in [-50.0, -5.0, 0.0, 3.0, 40.0] {
            assert!(softplus(raw) > 0.0);
        }
        // Round trip through the inverse at the experiment rates.
        for rate in [1.0, 0.2, 0.14] {
            let raw = softplus_inverse(rate).unwrap();
            assert!((softplus(raw) - rate).abs() <= 1e-12);
        }
        assert!(softplus_inverse(0.0).is_err());
    }

    #[test]
    fn ode_gradient_wrt_beta_matches_finite_differences() {
        // Inverse mode: derivative of the physics loss w.r.t. the raw beta
        // leaf against central differences.
        let sizes = vec![1usize, 6, 4];
        let sp = SeirParams::default();
        let truth = seir::rk4_simulate(&sp, &default_initial_state(), 100.0, 0.1).unwrap();
        let ds = seir::generate_dataset(&truth, 10, 0.0, 2).unwrap();
        let grid = CollocationGrid::uniform(100.0, 15).unwrap();
        let inputs = StepInputs { dataset: &ds, grid: &grid, seir: &sp };
        let params = NetworkParams::init(&sizes, 8).unwrap();
        let n_net = params.theta.len();
        let mut theta_all = params.theta.clone();
        theta_all.push(softplus_inverse(sp.beta).unwrap());
        theta_all.push(softplus_inverse(sp.sigma).unwrap());
        theta_all.push(softplus_inverse(sp.gamma).unwrap());

        let ode_value = |theta_all: &[f64]| {
            let mut tape = Tape::new();
            let (nodes, raw) = build_leaves(&mut tape, theta_all, n_net);
            let net = TapedNet::new(&sizes, &nodes, 100.0);
            let rates = rate_nodes(&mut tape, raw, &sp).unwrap();
            let root = ode_loss(&net, &mut tape, &grid, &rates);
            tape.value(root)
        };
        let mut tape = Tape::new();
        let (_, diag) =
            compute_gradients(&mut tape, &sizes, &theta_all, 100.0, 1e-8, &inputs).unwrap();
        let h = 1e-6;
        for k in n_net..n_net + 3 {
            let mut tp = theta_all.clone();
            let mut tm = theta_all.clone();
            tp[k] += h;
            tm[k] -= h;
            let fd = (ode_value(&tp) - ode_value(&tm)) / (2.0 * h);
            let got = diag.g_phy[k];
            let tol = 1e-5 * fd.abs().max(got.abs()).max(1e-9);
            assert!((got - fd).abs() <= tol, "rate leaf {k}: {got} vs {fd}");
        }
    }
}
