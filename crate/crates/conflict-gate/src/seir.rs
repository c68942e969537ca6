//! SEIR ground truth, the ODE residual, and dataset handling.
//!
//! All dynamics are in N-normalized units: compartments are population
//! fractions, so the S*I/N interaction term becomes s*i. The classical
//! fourth-order Runge-Kutta integrator provides the ground truth that
//! experiments sample from; the residual is the same vector field written
//! as tape nodes against a network's output and time-tangent.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tape::{NodeId, Tape};

/// Epidemiological rates. `population` is in persons, the rates in 1/day.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeirParams {
    pub population: f64,
    pub beta: f64,
    pub sigma: f64,
    pub gamma: f64,
}

impl SeirParams {
    pub fn validate(&self) -> Result<()> {
        if self.population <= 0.0 || self.population.is_nan() {
            return Err(Error::Validation("population must be positive".into()));
        }
        if self.beta < 0.0 || self.sigma < 0.0 || self.gamma < 0.0 {
            return Err(Error::Validation("rates must be non-negative".into()));
        }
        Ok(())
    }
}

/// The synthetic outbreak used throughout the experiments: N=1000,
/// beta=1.0, sigma=0.2, gamma=0.14.
impl Default for SeirParams {
    fn default() -> Self {
        SeirParams { population: 1000.0, beta: 1.0, sigma: 0.2, gamma: 0.14 }
    }
}

/// Normalized compartment fractions at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeirState {
    pub t: f64,
    pub s: f64,
    pub e: f64,
    pub i: f64,
    pub r: f64,
}

impl SeirState {
    pub fn new(t: f64, s: f64, e: f64, i: f64, r: f64) -> Self {
        SeirState { t, s, e, i, r }
    }

    pub fn fractions(&self) -> [f64; 4] {
        [self.s, self.e, self.i, self.r]
    }
}

/// One infected per thousand, everyone else susceptible.
pub fn default_initial_state() -> SeirState {
    SeirState::new(0.0, 0.999, 0.0, 0.001, 0.0)
}

#[inline]
fn deriv(p: &SeirParams, y: [f64; 4]) -> [f64; 4] {
    let [s, e, i, _r] = y;
    let infection = p.beta * s * i;
    [
        -infection,
        infection - p.sigma * e,
        p.sigma * e - p.gamma * i,
        p.gamma * i,
    ]
}

/// Classical RK4 trajectory at t = 0, dt, 2dt, ..., covering `t_end`.
///
/// Conservation |s+e+i+r - 1| <= 1e-10 is enforced at every step, and any
/// component leaving [-1e-9, 1+1e-9] aborts with a `Numerical` error.
pub fn rk4_simulate(
    params: &SeirParams,
    init: &SeirState,
    t_end: f64,
    dt: f64,
) -> Result<Vec<SeirState>> {
    params.validate()?;
    if dt <= 0.0 || dt.is_nan() || !t_end.is_finite() || t_end < 0.0 {
        return Err(Error::Validation(format!("bad time grid: t_end={t_end}, dt={dt}")));
    }
    let y0 = init.fractions();
    if y0.iter().any(|&v| v < -1e-12) {
        return Err(Error::Validation("initial compartments must be non-negative".into()));
    }
    if (y0.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Validation("initial compartments must sum to 1".into()));
    }

    let n_steps = (t_end / dt).round() as usize;
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut y = y0;
    out.push(SeirState::new(0.0, y[0], y[1], y[2], y[3]));
    for k in 0..n_steps {
        let k1 = deriv(params, y);
        let k2 = deriv(params, axpy(&y, &k1, dt / 2.0));
        let k3 = deriv(params, axpy(&y, &k2, dt / 2.0));
        let k4 = deriv(params, axpy(&y, &k3, dt));
        for c in 0..4 {
            y[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        let t = (k + 1) as f64 * dt;
        check_state(t, &y)?;
        out.push(SeirState::new(t, y[0], y[1], y[2], y[3]));
    }
    Ok(out)
}

#[inline]
fn axpy(y: &[f64; 4], k: &[f64; 4], a: f64) -> [f64; 4] {
    [y[0] + a * k[0], y[1] + a * k[1], y[2] + a * k[2], y[3] + a * k[3]]
}

fn check_state(t: f64, y: &[f64; 4]) -> Result<()> {
    let sum: f64 = y.iter().sum();
    if (sum - 1.0).abs() > 1e-10 {
        return Err(Error::Numerical(format!("conservation violated at t={t}: sum={sum}")));
    }
    for (c, &v) in y.iter().enumerate() {
        if !v.is_finite() || !(-1e-9..=1.0 + 1e-9).contains(&v) {
            return Err(Error::Numerical(format!(
                "compartment {c} out of range at t={t}: {v}"
            )));
        }
    }
    Ok(())
}

/// SEIR vector field at trajectory states, for residual-zero checks.
pub fn analytic_derivative(params: &SeirParams, state: &SeirState) -> [f64; 4] {
    deriv(params, state.fractions())
}

/// The four-component ODE residual as tape nodes, rates given as constants.
///
/// Returns (ds/dt + b*s*i, de/dt - b*s*i + sig*e, di/dt - sig*e + g*i,
/// dr/dt - g*i) in normalized units.
pub fn residual(
    tape: &mut Tape,
    u: &[NodeId; 4],
    du_dt: &[NodeId; 4],
    params: &SeirParams,
) -> [NodeId; 4] {
    let beta = tape.constant(params.beta);
    let sigma = tape.constant(params.sigma);
    let gamma = tape.constant(params.gamma);
    residual_with_rates(tape, u, du_dt, &RateNodes { beta, sigma, gamma })
}

/// Rates as graph nodes, so they can be trainable leaves in inverse mode.
#[derive(Clone, Copy, Debug)]
pub struct RateNodes {
    pub beta: NodeId,
    pub sigma: NodeId,
    pub gamma: NodeId,
}

pub fn residual_with_rates(
    tape: &mut Tape,
    u: &[NodeId; 4],
    du_dt: &[NodeId; 4],
    rates: &RateNodes,
) -> [NodeId; 4] {
    let [s, e, i, _r] = *u;
    let si = tape.mul(s, i);
    let infection = tape.mul(rates.beta, si);
    let incubation = tape.mul(rates.sigma, e);
    let recovery = tape.mul(rates.gamma, i);
    let f0 = tape.add(du_dt[0], infection);
    let t1 = tape.sub(du_dt[1], infection);
    let f1 = tape.add(t1, incubation);
    let t2 = tape.sub(du_dt[2], incubation);
    let f2 = tape.add(t2, recovery);
    let f3 = tape.sub(du_dt[3], recovery);
    [f0, f1, f2, f3]
}

/// Sparse noisy observations of the infected fraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// (t in days, observed infected fraction), times strictly increasing.
    pub observations: Vec<(f64, f64)>,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Samples `n_points` times uniformly without replacement from the
/// trajectory grid, sorted, and adds N(0, noise_sigma) to the infected
/// fraction. Noise is in normalized units.
pub fn generate_dataset(
    trajectory: &[SeirState],
    n_points: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_points == 0 || n_points > trajectory.len() {
        return Err(Error::Validation(format!(
            "n_points={} out of range for trajectory of {} states",
            n_points,
            trajectory.len()
        )));
    }
    if noise_sigma < 0.0 {
        return Err(Error::Validation("noise_sigma must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, trajectory.len(), n_points).into_vec();
    idx.sort_unstable();
    let observations = if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma)
            .map_err(|e| Error::Validation(format!("noise distribution: {e}")))?;
        idx.iter()
            .map(|&k| (trajectory[k].t, trajectory[k].i + normal.sample(&mut rng)))
            .collect()
    } else {
        idx.iter().map(|&k| (trajectory[k].t, trajectory[k].i)).collect()
    };
    Ok(Dataset { observations, noise_sigma, seed })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// CSV with a provenance comment line, then header `t,i_obs`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# meta: noise_sigma={} seed={}", self.noise_sigma, self.seed)?;
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "i_obs"]).map_err(csv_io)?;
        for &(t, i) in &self.observations {
            wtr.serialize((t, i)).map_err(csv_io)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Parses and validates a dataset CSV (`t,i_obs`; `#` lines are comments).
/// Times must be strictly increasing and within [0, t_horizon].
pub fn load_dataset<R: Read>(r: R, t_horizon: f64) -> Result<Dataset> {
    let mut text = String::new();
    let mut r = r;
    r.read_to_string(&mut text)?;
    let mut noise_sigma = 0.0;
    let mut seed = 0u64;
    for line in text.lines().filter(|l| l.starts_with('#')) {
        for tok in line.trim_start_matches('#').split_whitespace() {
            if let Some(v) = tok.strip_prefix("noise_sigma=") {
                noise_sigma = v.parse().map_err(|_| Error::Parse("bad noise_sigma".into()))?;
            } else if let Some(v) = tok.strip_prefix("seed=") {
                seed = v.parse().map_err(|_| Error::Parse("bad seed".into()))?;
            }
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::Parse(format!("header: {e}")))?;
    if headers.iter().collect::<Vec<_>>() != ["t", "i_obs"] {
        return Err(Error::Parse(format!("expected header t,i_obs, got {headers:?}")));
    }
    let mut observations = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("row {}: {e}", row + 1)))?;
        if rec.len() != 2 {
            return Err(Error::Parse(format!("row {}: expected 2 fields", row + 1)));
        }
        let t: f64 = rec[0].parse().map_err(|_| Error::Parse(format!("row {}: bad t", row + 1)))?;
        let i: f64 =
            rec[1].parse().map_err(|_| Error::Parse(format!("row {}: bad i_obs", row + 1)))?;
        observations.push((t, i));
    }
    if observations.is_empty() {
        return Err(Error::Parse("no observation rows".into()));
    }
    for w in observations.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::Validation(format!(
                "times not strictly increasing at t={}",
                w[1].0
            )));
        }
    }
    for &(t, i) in &observations {
        if !(0.0..=t_horizon).contains(&t) {
            return Err(Error::Validation(format!("time {t} outside [0, {t_horizon}]")));
        }
        if !i.is_finite() {
            return Err(Error::Validation(format!("non-finite observation at t={t}")));
        }
    }
    Ok(Dataset { observations, noise_sigma, seed })
}

pub fn load_dataset_file(path: &Path, t_horizon: f64) -> Result<Dataset> {
    load_dataset(std::fs::File::open(path)?, t_horizon)
}

/// Uniform collocation grid over [0, t_horizon].
#[derive(Clone, Debug, PartialEq)]
pub struct CollocationGrid {
    pub points: Vec<f64>,
    pub spacing: f64,
}

impl CollocationGrid {
    /// `n` uniformly spaced points from 0 to `t_horizon` inclusive.
    pub fn uniform(t_horizon: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Validation("collocation grid needs at least 2 points".into()));
        }
        if t_horizon <= 0.0 || t_horizon.is_nan() {
            return Err(Error::Validation("t_horizon must be positive".into()));
        }
        let spacing = t_horizon / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|k| k as f64 * spacing).collect();
        *points.last_mut().unwrap() = t_horizon;
        Ok(CollocationGrid { points, spacing })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn t_horizon(&self) -> f64 {
        *self.points.last().unwrap()
    }
}

/// Trajectory CSV `t,s,e,i,r`.
pub fn write_trajectory_csv<W: Write>(traj: &[SeirState], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["t", "s", "e", "i", "r"]).map_err(csv_io)?;
    for st in traj {
        wtr.serialize((st.t, st.s, st.e, st.i, st.r)).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn load_trajectory<R: Read>(r: R) -> Result<Vec<SeirState>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers().map_err(|e| Error::Parse(format!("header: {e}")))?;
    if headers.iter().collect::<Vec<_>>() != ["t", "s", "e", "i", "r"] {
        return Err(Error::Parse(format!("expected header t,s,e,i,r, got {headers:?}")));
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.deserialize::<(f64, f64, f64, f64, f64)>().enumerate() {
        let (t, s, e, i, r) = rec.map_err(|e| Error::Parse(format!("row {}: {e}", row + 1)))?;
        out.push(SeirState::new(t, s, e, i, r));
    }
    if out.is_empty() {
        return Err(Error::Parse("no trajectory rows".into()));
    }
    Ok(out)
}

fn csv_io(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_setup() -> (SeirParams, SeirState) {
        (SeirParams::default(), default_initial_state())
    }

    #[test]
    fn zero_beta_freezes_susceptible() {
        let params = SeirParams { beta: 0.0, ..SeirParams::default() };
        let traj = rk4_simulate(&params, &default_initial_state(), 50.0, 0.1).unwrap();
        for st in &traj {
            assert_eq!(st.s, 0.999);
        }
    }

    #[test]
    fn paper_params_give_unimodal_infection_curve() {
        let (params, init) = paper_setup();
        let traj = rk4_simulate(&params, &init, 100.0, 0.01).unwrap();
        let peak = traj
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.i.total_cmp(&b.1.i))
            .map(|(k, _)| k)
            .unwrap();
        assert!(peak > 0 && peak < traj.len() - 1, "peak must be interior");
        // One epidemic wave. With e(0) = 0 the infection count decays for
        // the first day while the exposed pool fills, so unimodality is
        // checked from the pre-peak minimum: rise to the peak, fall after.
        let trough = traj[..=peak]
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.i.total_cmp(&b.1.i))
            .map(|(k, _)| k)
            .unwrap();
        for w in traj[trough..=peak].windows(2) {
            assert!(w[1].i >= w[0].i - 1e-12);
        }
        for w in traj[peak..].windows(2) {
            assert!(w[1].i <= w[0].i + 1e-12);
        }
    }

    #[test]
    fn conservation_and_monotone_r() {
        let (params, init) = paper_setup();
        let traj = rk4_simulate(&params, &init, 100.0, 0.1).unwrap();
        for st in &traj {
            assert!((st.s + st.e + st.i + st.r - 1.0).abs() <= 1e-10);
            assert!(st.s >= -1e-12 && st.e >= -1e-12 && st.i >= -1e-12 && st.r >= -1e-12);
        }
        for w in traj.windows(2) {
            assert!(w[1].r >= w[0].r - 1e-12);
        }
    }

    #[test]
    fn oversized_step_reports_numerical_error() {
        // dt far above the stability limit blows the state out of range.
        let params = SeirParams { beta: 50.0, sigma: 30.0, gamma: 20.0, ..SeirParams::default() };
        let init = SeirState::new(0.0, 0.5, 0.2, 0.2, 0.1);
        let err = rk4_simulate(&params, &init, 100.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn rk4_fourth_order_richardson() {
        // Error vs a dt/10 reference must shrink ~16x when dt halves.
        let (params, init) = paper_setup();
        let reference = rk4_simulate(&params, &init, 50.0, 0.025).unwrap();
        let err_at = |dt: f64| -> f64 {
            let traj = rk4_simulate(&params, &init, 50.0, dt).unwrap();
            let stride = (dt / 0.025).round() as usize;
            traj.iter()
                .enumerate()
                .map(|(k, st)| {
                    let r = &reference[k * stride];
                    (st.s - r.s).abs().max((st.e - r.e).abs()).max((st.i - r.i).abs())
                })
                .fold(0.0, f64::max)
        };
        let e1 = err_at(0.5);
        let e2 = err_at(0.25);
        let order = (e1 / e2).log2();
        assert!((3.5..=4.5).contains(&order), "observed order {order}");
    }

    #[test]
    fn residual_vanishes_on_truth_trajectory() {
        // Defining property: the vector field at RK4 states is in the
        // residual's kernel.
        let (params, init) = paper_setup();
        let traj = rk4_simulate(&params, &init, 100.0, 0.5).unwrap();
        for st in &traj {
            let du = analytic_derivative(&params, st);
            let mut tape = Tape::new();
            let u = st.fractions().map(|v| tape.var(v));
            let dud = du.map(|v| tape.constant(v));
            let f = residual(&mut tape, &u, &dud, &params);
            for comp in f {
                assert!(tape.value(comp).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn residual_hand_oracle() {
        // u = (0.5, 0.2, 0.2, 0.1), du = 0, beta=1, sigma=0.2, gamma=0.14:
        //   f0 = 0 + 1*0.5*0.2            =  0.1
        //   f1 = 0 - 0.1 + 0.2*0.2        = -0.06
        //   f2 = 0 - 0.04 + 0.14*0.2      = -0.012
        //   f3 = 0 - 0.14*0.2             = -0.028
        let params = SeirParams::default();
        let mut tape = Tape::new();
        let u = [0.5, 0.2, 0.2, 0.1].map(|v| tape.var(v));
        let zero = tape.constant(0.0);
        let du = [zero; 4];
        let f = residual(&mut tape, &u, &du, &params);
        let got = f.map(|n| tape.value(n));
        let want = [0.1, -0.06, -0.012, -0.028];
        for k in 0..4 {
            assert!((got[k] - want[k]).abs() <= 1e-15, "component {k}: {} vs {}", got[k], want[k]);
        }
    }

    #[test]
    fn residual_of_zero_state_is_zero() {
        let params = SeirParams::default();
        let mut tape = Tape::new();
        let zero = tape.constant(0.0);
        let u = [zero; 4];
        let du = [zero; 4];
        let f = residual(&mut tape, &u, &du, &params);
        for comp in f {
            assert_eq!(tape.value(comp), 0.0);
        }
    }

    #[test]
    fn dataset_without_noise_lies_on_truth() {
        let (params, init) = paper_setup();
        let traj = rk4_simulate(&params, &init, 100.0, 0.1).unwrap();
        let ds = generate_dataset(&traj, 20, 0.0, 7).unwrap();
        assert_eq!(ds.len(), 20);
        for &(t, i_obs) in &ds.observations {
            let k = (t / 0.1).round() as usize;
            assert_eq!(traj[k].t, t);
            assert_eq!(traj[k].i, i_obs);
        }
        for w in ds.observations.windows(2) {
            assert!(w[1].0 > w[0].0);
        }
    }

    #[test]
    fn dataset_is_seed_deterministic() {
        let (params, init) = paper_setup();
        let traj = rk4_simulate(&params, &init, 100.0, 0.1).unwrap();
        let a = generate_dataset(&traj, 20, 0.05, 11).unwrap();
        let b = generate_dataset(&traj, 20, 0.05, 11).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&traj, 20, 0.05, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_is_unbiased_over_many_draws() {
        // Law of large numbers: mean of (i_obs - i_true) over 1e4 draws is
        // 0 within 3*sigma/sqrt(1e4).
        let (params, init) = paper_setup();
        let traj = rk4_simulate(&params, &init, 100.0, 0.1).unwrap();
        let noise_sigma = 0.05;
        let mut acc = 0.0;
        let mut count = 0usize;
        for seed in 0..500u64 {
            let ds = generate_dataset(&traj, 20, noise_sigma, seed).unwrap();
            for &(t, i_obs) in &ds.observations {
                let k = (t / 0.1).round() as usize;
                acc += i_obs - traj[k].i;
                count += 1;
            }
        }
        assert_eq!(count, 10_000);
        let mean = acc / count as f64;
        assert!(mean.abs() <= 3.0 * noise_sigma / 100.0, "mean {mean}");
    }

    #[test]
    fn dataset_csv_round_trips() {
        let (params, init) = paper_setup();
        let traj = rk4_simulate(&params, &init, 100.0, 0.1).unwrap();
        let ds = generate_dataset(&traj, 20, 0.05, 3).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = load_dataset(buf.as_slice(), 100.0).unwrap();
        assert_eq!(ds, back);
        // Round trip is bit-identical at the byte level too.
        let mut buf2 = Vec::new();
        back.write_csv(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn load_rejects_bad_input() {
        assert!(matches!(load_dataset(&b""[..], 100.0), Err(Error::Parse(_))));
        assert!(matches!(load_dataset(&b"t,i_obs\n"[..], 100.0), Err(Error::Parse(_))));
        let unsorted = b"t,i_obs\n5.0,0.1\n2.0,0.2\n";
        assert!(matches!(load_dataset(&unsorted[..], 100.0), Err(Error::Validation(_))));
        let out_of_range = b"t,i_obs\n5.0,0.1\n200.0,0.2\n";
        assert!(matches!(load_dataset(&out_of_range[..], 100.0), Err(Error::Validation(_))));
        let bad_header = b"time,obs\n1.0,0.1\n";
        assert!(matches!(load_dataset(&bad_header[..], 100.0), Err(Error::Parse(_))));
        let malformed = b"t,i_obs\n1.0,abc\n";
        assert!(matches!(load_dataset(&malformed[..], 100.0), Err(Error::Parse(_))));
    }

    #[test]
    fn grid_covers_horizon_uniformly() {
        let g = CollocationGrid::uniform(100.0, 200).unwrap();
        assert_eq!(g.len(), 200);
        assert_eq!(g.points[0], 0.0);
        assert_eq!(g.t_horizon(), 100.0);
        for w in g.points.windows(2) {
            assert!((w[1] - w[0] - g.spacing).abs() < 1e-9);
        }
        assert!(CollocationGrid::uniform(100.0, 1).is_err());
    }

    #[test]
    fn trajectory_csv_round_trips() {
        let (params, init) = paper_setup();
        let traj = rk4_simulate(&params, &init, 10.0, 0.5).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let back = load_trajectory(buf.as_slice()).unwrap();
        assert_eq!(traj, back);
    }
}
