//! Executable theory: the descent constant, the deadlock construction,
//! trace verdicts, and experiment metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::data_loss;
use crate::net::{NetworkParams, TapedNet, I_COMP};
use crate::seir::{Dataset, SeirState};
use crate::tape::{sigmoid, Tape};
use crate::trainer::{Optimizer, TrainTrace};
use crate::weighting::{combine, cosine, norm, GateState, GradientDiagnostics};

/// Worst-case interference constant of the gate and the descent constant
/// it implies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentConstants {
    pub kappa: f64,
    /// max over s in the unit interval of s / (1 + e^(kappa s)).
    pub m_kappa: f64,
    /// Location of that maximum.
    pub s_star: f64,
    /// 1 - m_kappa; at least 1/2 for any kappa >= 0.
    pub c: f64,
}

fn interference(kappa: f64, s: f64) -> f64 {
    s / (1.0 + (kappa * s).exp())
}

/// Golden-section maximization of the interference curve on [0, 1].
/// The curve is unimodal there (its log-derivative crosses zero once),
/// so the bracket converges; `m_kappa_grid_scan` is the blunt cross-check.
pub fn compute_m_kappa(kappa: f64) -> DescentConstants {
    assert!(kappa >= 0.0, "kappa must be non-negative");
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = interference(kappa, x1);
    let mut f2 = interference(kappa, x2);
    while b - a > 1e-12 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = interference(kappa, x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = interference(kappa, x1);
        }
    }
    let s_star = 0.5 * (a + b);
    let m_kappa = interference(kappa, s_star);
    DescentConstants { kappa, m_kappa, s_star, c: 1.0 - m_kappa }
}

/// Dense grid scan over [0, 1]; returns (argmax, max).
pub fn m_kappa_grid_scan(kappa: f64, n: usize) -> (f64, f64) {
    let mut best = (0.0, 0.0);
    for k in 0..=n {
        let s = k as f64 / n as f64;
        let f = interference(kappa, s);
        if f > best.1 {
            best = (s, f);
        }
    }
    best
}

/// Outcome of one deadlock construction: anti-parallel gradients where the
/// magnitude-balanced weight cancels the update exactly while the gated
/// update stays within a whisker of pure data descent.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeadlockReport {
    pub c: f64,
    pub kappa: f64,
    pub dim: usize,
    pub seed: u64,
    /// Magnitude-balanced weight; equals c by construction.
    pub lambda_std: f64,
    /// |g_data + lambda_std * g_phy| / |g_data|.
    pub fixed_update_ratio: f64,
    /// Convex coefficient certifying Pareto stationarity.
    pub pareto_alpha: f64,
    /// |alpha g_data + (1-alpha) g_phy| / |g_data|.
    pub pareto_residual_ratio: f64,
    /// |d| / |g_data| for the gated update.
    pub cggs_direction_ratio: f64,
    /// |d - g_data| / |g_data| for the gated update.
    pub cggs_deviation_ratio: f64,
    pub fixed_stalls: bool,
    pub pareto_certified: bool,
    pub cggs_escapes: bool,
    pub pass: bool,
}

/// Builds g_phy random nonzero and g_data = -c * g_phy, then evaluates the
/// fixed-weight, Pareto, and gated behaviours.
pub fn deadlock_demo(c: f64, kappa: f64, dim: usize, seed: u64) -> Result<DeadlockReport> {
    if c <= 0.0 || c.is_nan() {
        return Err(Error::Validation("conflict ratio c must be positive".into()));
    }
    if dim == 0 {
        return Err(Error::Validation("dimension must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g_phy: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    if norm(&g_phy) == 0.0 {
        g_phy[0] = 1.0;
    }
    let g_data: Vec<f64> = g_phy.iter().map(|v| -c * v).collect();
    let nd = norm(&g_data);
    let np = norm(&g_phy);

    let lambda_std = nd / np;
    let fixed: Vec<f64> = g_data.iter().zip(&g_phy).map(|(d, p)| d + lambda_std * p).collect();
    let fixed_update_ratio = norm(&fixed) / nd;

    let pareto_alpha = 1.0 / (1.0 + c);
    let pareto: Vec<f64> = g_data
        .iter()
        .zip(&g_phy)
        .map(|(d, p)| pareto_alpha * d + (1.0 - pareto_alpha) * p)
        .collect();
    let pareto_residual_ratio = norm(&pareto) / nd;

    let epsilon = 1e-8;
    let diag = GradientDiagnostics::compute(g_data.clone(), g_phy, vec![0.0; dim], epsilon)?;
    let mut gate = GateState::new(0.0, kappa, epsilon, 1.0);
    gate.cggs_update(&diag);
    let d = combine(&diag, gate.lambda_hat, 0.0);
    let cggs_direction_ratio = norm(&d) / nd;
    let dev: Vec<f64> = d.iter().zip(&g_data).map(|(a, b)| a - b).collect();
    let cggs_deviation_ratio = norm(&dev) / nd;

    let suppression = sigmoid(-kappa);
    let fixed_stalls = fixed_update_ratio <= 1e-12;
    let pareto_certified = pareto_residual_ratio <= 1e-12;
    let cggs_escapes = cggs_deviation_ratio <= suppression * (1.0 + 1e-9)
        && cggs_direction_ratio >= 1.0 - suppression * (1.0 + 1e-9);
    Ok(DeadlockReport {
        c,
        kappa,
        dim,
        seed,
        lambda_std,
        fixed_update_ratio,
        pareto_alpha,
        pareto_residual_ratio,
        cggs_direction_ratio,
        cggs_deviation_ratio,
        fixed_stalls,
        pareto_certified,
        cggs_escapes,
        pass: fixed_stalls && pareto_certified && cggs_escapes,
    })
}

/// Which checks to run over a trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyMode {
    /// Per-step sufficient-descent inequality only.
    Descent,
    /// Descent plus the summed convergence envelope; requires an
    /// alpha = 0, plain-GD trace.
    Full,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TheoremCheck {
    /// min over steps of norm_data^2.
    pub lhs: f64,
    /// 2 (l_data(0) - min l_data) / (c * eta * T).
    pub bound: f64,
    pub initial_l_data: f64,
    pub min_l_data: f64,
    pub c: f64,
    pub eta: f64,
    pub steps: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerdictReport {
    pub m_kappa: f64,
    pub descent_checked: usize,
    pub descent_passed: usize,
    pub descent_pass_rate: f64,
    /// Steps where the inequality failed.
    pub descent_violations: Vec<usize>,
    /// Steps skipped because the logical gradient was active.
    pub skipped_logic_active: usize,
    /// Steps skipped because |g_data||g_phy| <= epsilon, where the descent
    /// bound's derivation does not apply.
    pub skipped_vanishing: usize,
    /// Observed gradient-norm bound over the trace (reported, not assumed).
    pub g_hat: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem: Option<TheoremCheck>,
    pub pass: bool,
}

/// Per-step descent verdicts, plus the end-of-run rate envelope in
/// [`VerifyMode::Full`]. The envelope uses the observed minimum data loss
/// as the infimum surrogate, which only makes the bound harder to satisfy.
pub fn verify_trace(
    trace: &TrainTrace,
    constants: &DescentConstants,
    mode: VerifyMode,
) -> Result<VerdictReport> {
    if trace.records.is_empty() {
        return Err(Error::Validation("empty trace".into()));
    }
    let epsilon = trace.config.as_ref().map(|c| c.epsilon).unwrap_or(1e-8);
    let mut checked = 0usize;
    let mut passed = 0usize;
    let mut violations = Vec::new();
    let mut skipped_logic = 0usize;
    let mut skipped_vanishing = 0usize;
    let mut g_hat = 0.0f64;
    for r in &trace.records {
        g_hat = g_hat.max(r.norm_data).max(r.norm_phy);
        if !r.logic_inactive() {
            skipped_logic += 1;
            continue;
        }
        if r.norm_data * r.norm_phy <= epsilon {
            skipped_vanishing += 1;
            continue;
        }
        checked += 1;
        let floor = constants.c * r.norm_data * r.norm_data;
        let descent_ok = r.descent_inner >= floor - 1e-12 * floor.abs();
        let step_ok = r.d_norm <= 2.0 * r.norm_data * (1.0 + 1e-12);
        if descent_ok && step_ok {
            passed += 1;
        } else {
            violations.push(r.step);
        }
    }

    let theorem = match mode {
        VerifyMode::Descent => None,
        VerifyMode::Full => {
            let config = trace.config.as_ref().ok_or_else(|| {
                Error::Mode("rate check needs the run configuration (metrics.json)".into())
            })?;
            let eta = match config.optimizer {
                Optimizer::Gd { eta } => eta,
                Optimizer::Adam { .. } => {
                    return Err(Error::Mode(
                        "rate envelope is only valid for plain gradient descent".into(),
                    ))
                }
            };
            if config.alpha != 0.0 {
                return Err(Error::Mode(
                    "rate envelope is only valid for the instantaneous weight (alpha = 0)".into(),
                ));
            }
            Some(theorem_envelope(
                trace.records.iter().map(|r| (r.l_data, r.norm_data)),
                constants.c,
                eta,
            ))
        }
    };

    let pass = violations.is_empty() && theorem.map(|t| t.pass).unwrap_or(true);
    Ok(VerdictReport {
        m_kappa: constants.m_kappa,
        descent_checked: checked,
        descent_passed: passed,
        descent_pass_rate: if checked == 0 { 1.0 } else { passed as f64 / checked as f64 },
        descent_violations: violations,
        skipped_logic_active: skipped_logic,
        skipped_vanishing,
        g_hat,
        theorem,
        pass,
    })
}

/// The summed descent inequality: min |g|^2 <= 2 (L0 - L_min) / (c eta T).
pub fn theorem_envelope(
    records: impl Iterator<Item = (f64, f64)>,
    c: f64,
    eta: f64,
) -> TheoremCheck {
    let mut initial = f64::NAN;
    let mut min_l = f64::INFINITY;
    let mut min_grad_sq = f64::INFINITY;
    let mut steps = 0usize;
    for (l_data, norm_data) in records {
        if steps == 0 {
            initial = l_data;
        }
        min_l = min_l.min(l_data);
        min_grad_sq = min_grad_sq.min(norm_data * norm_data);
        steps += 1;
    }
    let bound = 2.0 * (initial - min_l) / (c * eta * steps as f64);
    TheoremCheck {
        lhs: min_grad_sq,
        bound,
        initial_l_data: initial,
        min_l_data: min_l,
        c,
        eta,
        steps,
        pass: min_grad_sq <= bound * (1.0 + 1e-12),
    }
}

/// Fit quality of a trained network against the ground truth, plus the
/// two-phase weight statistics.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExperimentMetrics {
    /// |max_t i_pred - max_t i_true| / max_t i_true.
    pub peak_value_error: f64,
    /// Days between the predicted and true peak times.
    pub peak_time_error: f64,
    pub final_l_data: f64,
    /// Median adaptive weight over steps [0, 250).
    pub phase_median_early: Option<f64>,
    /// Median adaptive weight over steps [400, 600].
    pub phase_median_late: Option<f64>,
}

pub const PHASE_EARLY: (usize, usize) = (0, 250);
pub const PHASE_LATE: (usize, usize) = (400, 600);

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

/// Relative error of the predicted infection peak height and the absolute
/// time offset of its location, both curves sampled on `times`.
pub fn peak_errors(times: &[f64], pred_i: &[f64], true_i: &[f64]) -> (f64, f64) {
    assert_eq!(times.len(), pred_i.len());
    assert_eq!(times.len(), true_i.len());
    let mut peak_true = (0.0f64, f64::NEG_INFINITY);
    let mut peak_pred = (0.0f64, f64::NEG_INFINITY);
    for ((&t, &p), &y) in times.iter().zip(pred_i).zip(true_i) {
        if y > peak_true.1 {
            peak_true = (t, y);
        }
        if p > peak_pred.1 {
            peak_pred = (t, p);
        }
    }
    (
        (peak_pred.1 - peak_true.1).abs() / peak_true.1,
        (peak_pred.0 - peak_true.0).abs(),
    )
}

pub fn experiment_metrics(
    trace: &TrainTrace,
    params: &NetworkParams,
    truth: &[SeirState],
    t_scale: f64,
) -> ExperimentMetrics {
    let times: Vec<f64> = truth.iter().map(|st| st.t).collect();
    let true_i: Vec<f64> = truth.iter().map(|st| st.i).collect();
    let pred_i: Vec<f64> =
        truth.iter().map(|st| params.eval(st.t, t_scale)[I_COMP]).collect();
    let (peak_value_error, peak_time_error) = peak_errors(&times, &pred_i, &true_i);
    let mut early: Vec<f64> = trace
        .records
        .iter()
        .filter(|r| r.step >= PHASE_EARLY.0 && r.step < PHASE_EARLY.1)
        .map(|r| r.lambda_hat)
        .collect();
    let mut late: Vec<f64> = trace
        .records
        .iter()
        .filter(|r| r.step >= PHASE_LATE.0 && r.step <= PHASE_LATE.1)
        .map(|r| r.lambda_hat)
        .collect();
    ExperimentMetrics {
        peak_value_error,
        peak_time_error,
        final_l_data: trace.records.last().map(|r| r.l_data).unwrap_or(f64::NAN),
        phase_median_early: median(&mut early),
        phase_median_late: median(&mut late),
    }
}

/// Empirical Lipschitz estimate of the data-loss gradient: the largest
/// secant slope over random nearby parameter pairs. Pairs are spread over
/// several perturbation radii up to unit size, since training excursions
/// see far more curvature than an infinitesimal neighbourhood of the
/// initialization. Used only to pick a safe eta for theory-mode runs.
pub fn estimate_curvature(
    params: &NetworkParams,
    dataset: &Dataset,
    t_scale: f64,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    const SCALES: [f64; 4] = [1e-2, 1e-1, 3e-1, 1.0];
    let gradient = |theta: &[f64]| -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let nodes = tape.vars(theta);
        let net = TapedNet::new(&params.layer_sizes, &nodes, t_scale);
        let root = data_loss(&net, &mut tape, dataset)?;
        Ok(tape.backward(root))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut l_hat = 0.0f64;
    for k in 0..pairs {
        let scale = SCALES[k % SCALES.len()];
        let perturb = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            params
                .theta
                .iter()
                .map(|&v| v + scale * rng.random_range(-1.0..1.0))
                .collect()
        };
        let t1 = perturb(&mut rng);
        let t2 = perturb(&mut rng);
        let g1 = gradient(&t1)?;
        let g2 = gradient(&t2)?;
        let dg: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a - b).collect();
        let dt: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| a - b).collect();
        let dist = norm(&dt);
        if dist > 0.0 {
            l_hat = l_hat.max(norm(&dg) / dist);
        }
    }
    Ok(l_hat)
}

/// Learning rate prescribed by the rate theorem, eta = c / (4 L).
pub fn theory_eta(constants: &DescentConstants, l_hat: f64) -> f64 {
    constants.c / (4.0 * l_hat.max(f64::MIN_POSITIVE))
}

/// The rate envelope exercised on a two-parameter smooth toy pair where
/// the data objective's smoothness constant is known analytically (L = 1).
/// Returns the envelope check of an alpha = 0 gated GD run.
pub fn toy_theorem_check(kappa: f64, steps: usize) -> TheoremCheck {
    let l_smooth = 1.0;
    let constants = compute_m_kappa(kappa);
    let eta = constants.c / (4.0 * l_smooth);
    // L_data = (1 - cos t1) + t2^2 / 2, L_phy shifted and offset so the
    // gradients genuinely conflict along the trajectory.
    let g_data = |t: &[f64; 2]| [t[0].sin(), t[1]];
    let l_data = |t: &[f64; 2]| (1.0 - t[0].cos()) + 0.5 * t[1] * t[1];
    let g_phy = |t: &[f64; 2]| [(t[0] - 1.5).sin(), t[1] - 1.0];
    let mut theta = [2.5f64, -1.0];
    let epsilon = 1e-8;
    let mut history = Vec::with_capacity(steps);
    for _ in 0..steps {
        let gd = g_data(&theta);
        let gp = g_phy(&theta);
        let nd = norm(&gd);
        let np = norm(&gp);
        let s = cosine(&gd, &gp, epsilon).expect("equal dims");
        let lambda = nd / (np + epsilon) * sigmoid(kappa * s);
        let d = [gd[0] + lambda * gp[0], gd[1] + lambda * gp[1]];
        history.push((l_data(&theta), nd));
        theta[0] -= eta * d[0];
        theta[1] -= eta * d[1];
    }
    theorem_envelope(history.into_iter(), constants.c, eta)
}
