//! Deterministic robustness probes under rate perturbation.
//!
//! A perturbation plan fixes a nominal rate vector, a Euclidean ball
//! radius, a trial count, a seed, and a family of initial conditions in one
//! compatibility class. Sampling is counter-based: trial i derives its own
//! RNG stream from (seed, i), so results do not depend on execution order
//! and trials can run in parallel while reducing in index order.

use crate::balance::toric_membership;
use crate::dynamics::{integrate, integrate_variable, IntegratorConfig, Trajectory};
use crate::kinetics::{RateAssignment, RateSchedule};
use crate::network::{ensure_positive, ReactionNetwork, StoichAnalysis, COMPATIBILITY_TOL};
use crate::{CrnError, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

/// Two converged limits count as the same attractor when their relative
/// Euclidean gap is at most this.
pub const LIMIT_MATCH_TOL: f64 = 1e-5;

/// A deterministic perturbation experiment.
#[derive(Debug, Clone)]
pub struct PerturbationPlan {
    pub kappa_star: RateAssignment,
    /// Euclidean ball radius around `kappa_star`; must stay below the
    /// smallest nominal rate so every sample is positive. Zero is allowed
    /// and reproduces the nominal rates in every trial.
    pub eps: f64,
    pub trials: usize,
    pub seed: u64,
    /// Positive states, all in one compatibility class.
    pub initial_conditions: Vec<DVector<f64>>,
    pub cfg: IntegratorConfig,
}

impl PerturbationPlan {
    pub fn validate(&self, net: &ReactionNetwork, stoich: &StoichAnalysis) -> Result<()> {
        if self.kappa_star.kappa().len() != net.num_reactions() {
            return Err(CrnError::RateMismatch {
                msg: format!(
                    "{} rates for {} reactions",
                    self.kappa_star.kappa().len(),
                    net.num_reactions()
                ),
            });
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(CrnError::InvalidPlan { msg: format!("eps must be >= 0, got {}", self.eps) });
        }
        if self.eps >= self.kappa_star.min() {
            return Err(CrnError::InvalidPlan {
                msg: format!(
                    "eps {} must stay below the smallest nominal rate {}",
                    self.eps,
                    self.kappa_star.min()
                ),
            });
        }
        if self.trials == 0 {
            return Err(CrnError::InvalidPlan { msg: "plan needs at least one trial".into() });
        }
        if self.initial_conditions.is_empty() {
            return Err(CrnError::InvalidPlan { msg: "plan needs at least one initial condition".into() });
        }
        if !(self.cfg.t_end > 0.0) {
            return Err(CrnError::InvalidPlan { msg: "plan integration span must be positive".into() });
        }
        let first = &self.initial_conditions[0];
        for (i, ic) in self.initial_conditions.iter().enumerate() {
            ensure_positive(ic)?;
            if ic.len() != net.num_species() {
                return Err(CrnError::ShapeMismatch {
                    msg: format!("initial condition {i} has wrong dimension"),
                });
            }
            let residual = stoich.conserved_residual(&(ic - first));
            if residual > COMPATIBILITY_TOL {
                return Err(CrnError::InvalidPlan {
                    msg: format!(
                        "initial conditions 0 and {i} lie in different compatibility classes \
                         (conserved mismatch {residual:.3e})"
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Draws trial `trial`'s rate vector: uniform over the closed Euclidean
/// ball of radius `eps` around the nominal rates, via a normalized
/// Gaussian direction and a radius transform. Fully determined by
/// (seed, trial).
pub fn perturb_sample(plan: &PerturbationPlan, trial: usize) -> RateAssignment {
    let kappa_star = plan.kappa_star.kappa();
    let r = kappa_star.len();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    rng.set_stream(trial as u64 + 1);
    let dir: Vec<f64> = (0..r).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = dir.iter().map(|g| g * g).sum::<f64>().sqrt();
    let u: f64 = rng.gen();
    let radius = plan.eps * u.powf(1.0 / r as f64);
    let scale = if norm > 0.0 { radius / norm } else { 0.0 };
    let mut delta: Vec<f64> = dir.iter().map(|g| g * scale).collect();
    // Guard the ball bound against roundoff in the normalization.
    let delta_norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
    if delta_norm > plan.eps {
        let shrink = plan.eps / delta_norm * (1.0 - 1e-14);
        for d in &mut delta {
            *d *= shrink;
        }
    }
    let kappa: Vec<f64> = kappa_star.iter().zip(&delta).map(|(k, d)| k + d).collect();
    plan.kappa_star.with_values(kappa).expect("ball radius below min rate keeps rates positive")
}

/// Default initial-condition family: the anchor, then multiplicative
/// nudges exp(+-scale * basis direction) projected back onto the anchor's
/// compatibility class, with the scale halved each full round until
/// `count` states exist.
pub fn default_initial_conditions(
    stoich: &StoichAnalysis,
    x0: &DVector<f64>,
    count: usize,
) -> Result<Vec<DVector<f64>>> {
    ensure_positive(x0)?;
    let mut out = vec![x0.clone()];
    if count <= 1 {
        out.truncate(count.max(1));
        return Ok(out);
    }
    if stoich.dim_s == 0 {
        return Err(CrnError::InvalidPlan {
            msg: "compatibility class is a single point; cannot vary initial conditions".into(),
        });
    }
    let projector = &stoich.basis * stoich.basis.transpose();
    let mut scale = 0.5;
    while out.len() < count {
        for j in 0..stoich.dim_s {
            for sign in [1.0, -1.0] {
                if out.len() == count {
                    break;
                }
                let dir = stoich.basis.column(j);
                let nudged = DVector::from_fn(x0.len(), |i, _| x0[i] * (sign * scale * dir[i]).exp());
                let mut cand = x0 + &projector * (&nudged - x0);
                let mut guard = 0;
                while cand.iter().any(|&v| !(v > 0.0)) && guard < 60 {
                    cand = x0 + (&cand - x0) * 0.5;
                    guard += 1;
                }
                if cand.iter().all(|&v| v > 0.0) {
                    out.push(cand);
                }
            }
        }
        scale *= 0.5;
        if scale < 1e-12 {
            return Err(CrnError::InvalidPlan {
                msg: "could not generate enough positive in-class initial conditions".into(),
            });
        }
    }
    Ok(out)
}

/// Why a trial failed to produce a usable verdict.
#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrialStatus {
    Conclusive,
    /// At least one run reached t_end without passing the convergence test.
    NoConvergence { ic_index: usize },
    /// An integration run failed outright.
    IntegrationFailed { ic_index: usize, detail: String },
}

/// One trial of the stability probe.
#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub kappa: Vec<f64>,
    pub status: TrialStatus,
    /// Converged limit per initial condition (in plan order).
    pub limits: Vec<Option<Vec<f64>>>,
    /// Largest relative gap between any two limits.
    pub max_pairwise_gap: Option<f64>,
    /// Componentwise mean of the limits: the attractor estimate for kappa.
    pub mean_limit: Option<Vec<f64>>,
}

/// Aggregate verdict of the stability probe.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityVerdict {
    pub trials: Vec<TrialResult>,
    /// True when every trial is conclusive and its limits agree pairwise
    /// within `limit_tol`.
    pub all_unique: bool,
    pub limit_tol: f64,
}

/// For each sampled rate vector, integrates every initial condition to its
/// limit and checks that all limits agree: evidence that the perturbed
/// system still has a single attractor per compatibility class. Requires
/// the nominal rates to be complex-balanced.
pub fn global_stability_probe(
    net: &ReactionNetwork,
    stoich: &StoichAnalysis,
    plan: &PerturbationPlan,
) -> Result<StabilityVerdict> {
    plan.validate(net, stoich)?;
    let toric = toric_membership(net, &plan.kappa_star, stoich)?;
    if !toric.member {
        return Err(CrnError::NotComplexBalanced {
            residual: toric.residual,
            tol: crate::balance::TORIC_TOL,
        });
    }
    let mut cfg = plan.cfg.clone();
    cfg.detect_convergence = true;
    cfg.stop_at_convergence = true;

    let trials: Vec<TrialResult> = (0..plan.trials)
        .into_par_iter()
        .map(|trial| run_trial(net, stoich, plan, &cfg, trial))
        .collect();
    let all_unique = trials.iter().all(|t| {
        t.status == TrialStatus::Conclusive
            && t.max_pairwise_gap.map(|g| g <= LIMIT_MATCH_TOL).unwrap_or(false)
    });
    Ok(StabilityVerdict { trials, all_unique, limit_tol: LIMIT_MATCH_TOL })
}

fn run_trial(
    net: &ReactionNetwork,
    stoich: &StoichAnalysis,
    plan: &PerturbationPlan,
    cfg: &IntegratorConfig,
    trial: usize,
) -> TrialResult {
    let kappa = perturb_sample(plan, trial);
    let mut limits: Vec<Option<Vec<f64>>> = vec![None; plan.initial_conditions.len()];
    let mut status = TrialStatus::Conclusive;
    for (i, ic) in plan.initial_conditions.iter().enumerate() {
        match integrate(net, &kappa, stoich, ic, cfg) {
            Ok(traj) => {
                if traj.termination.is_failure() {
                    status = TrialStatus::IntegrationFailed {
                        ic_index: i,
                        detail: format!("{:?}", traj.termination),
                    };
                    break;
                }
                match traj.converged_to {
                    Some(limit) => limits[i] = Some(limit.as_slice().to_vec()),
                    None => {
                        status = TrialStatus::NoConvergence { ic_index: i };
                        break;
                    }
                }
            }
            Err(e) => {
                status = TrialStatus::IntegrationFailed { ic_index: i, detail: e.to_string() };
                break;
            }
        }
    }
    let (max_pairwise_gap, mean_limit) = if status == TrialStatus::Conclusive {
        let pts: Vec<&Vec<f64>> = limits.iter().map(|l| l.as_ref().unwrap()).collect();
        let mut max_gap = 0.0f64;
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                max_gap = max_gap.max(relative_gap(pts[a], pts[b]));
            }
        }
        let n = pts[0].len();
        let mean: Vec<f64> = (0..n)
            .map(|i| pts.iter().map(|p| p[i]).sum::<f64>() / pts.len() as f64)
            .collect();
        (Some(max_gap), Some(mean))
    } else {
        (None, None)
    };
    TrialResult { kappa: kappa.kappa().to_vec(), status, limits, max_pairwise_gap, mean_limit }
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-300)
}

/// Componentwise late-time envelope across all trials and starts.
#[derive(Debug, Clone, Serialize)]
pub struct PermanenceEnvelope {
    /// Samples at t >= this enter the envelope.
    pub window_start: f64,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    /// Smallest envelope coordinate: distance to the extinction boundary.
    pub margin_to_boundary: f64,
}

/// Integrates every (trial, initial condition) pair over the full span and
/// collects the componentwise min/max of all samples in the trailing
/// window (second half of the span by default). A strictly positive margin
/// is numerical evidence of permanence under the sampled perturbations.
pub fn permanence_probe(
    net: &ReactionNetwork,
    stoich: &StoichAnalysis,
    plan: &PerturbationPlan,
    window_fraction: Option<f64>,
) -> Result<PermanenceEnvelope> {
    plan.validate(net, stoich)?;
    if !stoich.weakly_reversible {
        return Err(CrnError::NotWeaklyReversible {
            msg: "permanence probe expects a weakly reversible network".into(),
        });
    }
    let frac = window_fraction.unwrap_or(0.5);
    if !(frac > 0.0 && frac < 1.0) {
        return Err(CrnError::InvalidPlan {
            msg: format!("window fraction must lie in (0, 1), got {frac}"),
        });
    }
    let mut cfg = plan.cfg.clone();
    cfg.detect_convergence = false;
    cfg.stop_at_convergence = false;
    let window_start = cfg.t_end * (1.0 - frac);

    let runs: Vec<Result<Vec<Trajectory>>> = (0..plan.trials)
        .into_par_iter()
        .map(|trial| {
            let kappa = perturb_sample(plan, trial);
            plan.initial_conditions
                .iter()
                .map(|ic| {
                    let traj = integrate(net, &kappa, stoich, ic, &cfg)?;
                    if traj.termination.is_failure() {
                        return Err(CrnError::IntegrationFailure {
                            msg: format!(
                                "trial {trial} with rates {:?} ended in {:?}",
                                kappa.kappa(),
                                traj.termination
                            ),
                        });
                    }
                    Ok(traj)
                })
                .collect()
        })
        .collect();

    envelope_from_runs(net.num_species(), window_start, runs)
}

/// Variable-rate flavor of the permanence probe: each trial drives every
/// edge with a deterministic sinusoid kappa_e(t) = kappa*_e + eps sin(w t + p),
/// staying inside the plan's ball bound at all times.
pub fn permanence_probe_variable(
    net: &ReactionNetwork,
    stoich: &StoichAnalysis,
    plan: &PerturbationPlan,
    window_fraction: Option<f64>,
) -> Result<PermanenceEnvelope> {
    plan.validate(net, stoich)?;
    if !stoich.weakly_reversible {
        return Err(CrnError::NotWeaklyReversible {
            msg: "permanence probe expects a weakly reversible network".into(),
        });
    }
    let frac = window_fraction.unwrap_or(0.5);
    let mut cfg = plan.cfg.clone();
    cfg.detect_convergence = false;
    cfg.stop_at_convergence = false;
    let window_start = cfg.t_end * (1.0 - frac);

    let kappa_star = plan.kappa_star.kappa().to_vec();
    let lo = plan.kappa_star.min() - plan.eps;
    let hi = kappa_star.iter().cloned().fold(0.0f64, f64::max) + plan.eps;
    let band_eps = (lo.min(1.0 / hi) * (1.0 - 1e-9)).min(1.0 - 1e-9);

    let runs: Vec<Result<Vec<Trajectory>>> = (0..plan.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
            rng.set_stream((trial as u64) | (1 << 32));
            let funcs: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>> = kappa_star
                .iter()
                .map(|&ks| {
                    let omega = 0.5 + 1.5 * rng.gen::<f64>();
                    let phase = std::f64::consts::TAU * rng.gen::<f64>();
                    let amp = plan.eps;
                    Box::new(move |t: f64| ks + amp * (omega * t + phase).sin())
                        as Box<dyn Fn(f64) -> f64 + Send + Sync>
                })
                .collect();
            let schedule = RateSchedule::new(net, funcs, band_eps)?;
            plan.initial_conditions
                .iter()
                .map(|ic| {
                    let traj = integrate_variable(net, &schedule, stoich, ic, &cfg)?;
                    if traj.termination.is_failure() {
                        return Err(CrnError::IntegrationFailure {
                            msg: format!("variable trial {trial} ended in {:?}", traj.termination),
                        });
                    }
                    Ok(traj)
                })
                .collect()
        })
        .collect();

    envelope_from_runs(net.num_species(), window_start, runs)
}

fn envelope_from_runs(
    n: usize,
    window_start: f64,
    runs: Vec<Result<Vec<Trajectory>>>,
) -> Result<PermanenceEnvelope> {
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for run in runs {
        for traj in run? {
            for (t, x) in traj.times.iter().zip(&traj.states) {
                if *t < window_start {
                    continue;
                }
                for i in 0..n {
                    lo[i] = lo[i].min(x[i]);
                    hi[i] = hi[i].max(x[i]);
                }
            }
        }
    }
    if lo.iter().any(|v| !v.is_finite()) {
        return Err(CrnError::Internal {
            msg: "no trajectory samples fell inside the permanence window".into(),
        });
    }
    let margin = lo.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(PermanenceEnvelope { window_start, box_lo: lo, box_hi: hi, margin_to_boundary: margin })
}

/// Stability class of one steady state in the scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRoot {
    pub x: f64,
    pub eigenvalue: f64,
    pub stability: Stability,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    pub kappa1: f64,
    pub kappa2: f64,
    pub roots: Vec<ScanRoot>,
}

/// One-species bifurcation scan over the four-vertex ladder
/// 0 <-> X, 2X <-> 3X with the rate symmetry k4 = k1, k3 = k2.
///
/// For each (k1, k2) pair the positive real roots of the steady-state
/// polynomial are found from companion-matrix eigenvalues, polished by
/// Newton, and classified by the sign of the scalar Jacobian.
pub fn bifurcation_scan_1d(
    net: &ReactionNetwork,
    grid: &[(f64, f64)],
) -> Result<Vec<ScanPoint>> {
    let edge_order = ladder_edge_order(net)?;
    let mut out = Vec::with_capacity(grid.len());
    for &(k1, k2) in grid {
        if !(k1 > 0.0 && k2 > 0.0) {
            return Err(CrnError::InvalidPlan {
                msg: format!("scan rates must be positive, got ({k1}, {k2})"),
            });
        }
        // Rate per edge: 0->X gets k1, X->0 gets k2, 2X->3X gets k3 = k2,
        // 3X->2X gets k4 = k1.
        let mut kappa = vec![0.0; 4];
        kappa[edge_order[0]] = k1;
        kappa[edge_order[1]] = k2;
        kappa[edge_order[2]] = k2;
        kappa[edge_order[3]] = k1;
        let coeffs = steady_state_polynomial(net, &kappa);
        let roots = positive_real_roots(&coeffs);
        let dcoeffs = derivative(&coeffs);
        let scan_roots = roots
            .into_iter()
            .map(|x| {
                let eigenvalue = eval_poly(&dcoeffs, x);
                let stability = if eigenvalue < -1e-12 {
                    Stability::Stable
                } else if eigenvalue > 1e-12 {
                    Stability::Unstable
                } else {
                    Stability::Marginal
                };
                ScanRoot { x, eigenvalue, stability }
            })
            .collect();
        out.push(ScanPoint { kappa1: k1, kappa2: k2, roots: scan_roots });
    }
    Ok(out)
}

/// Validates the ladder shape and maps the roles (0->X, X->0, 2X->3X,
/// 3X->2X) to edge indices.
fn ladder_edge_order(net: &ReactionNetwork) -> Result<[usize; 4]> {
    let fail = |msg: &str| CrnError::UnsupportedShape { msg: msg.into() };
    if net.num_species() != 1 {
        return Err(fail("scan expects exactly one species"));
    }
    if net.num_complexes() != 4 || net.num_reactions() != 4 {
        return Err(fail("scan expects four complexes (0, X, 2X, 3X) and four reactions"));
    }
    let coord = |v: usize| net.complexes()[v].coords[0];
    let mut order = [usize::MAX; 4];
    for (e, r) in net.reactions().iter().enumerate() {
        let pair = (coord(r.source), coord(r.target));
        let role = match pair {
            (0.0, 1.0) => 0,
            (1.0, 0.0) => 1,
            (2.0, 3.0) => 2,
            (3.0, 2.0) => 3,
            _ => return Err(fail("scan expects exactly the reactions 0 <-> X and 2X <-> 3X")),
        };
        if order[role] != usize::MAX {
            return Err(fail("duplicate reaction role"));
        }
        order[role] = e;
    }
    if order.iter().any(|&e| e == usize::MAX) {
        return Err(fail("scan expects exactly the reactions 0 <-> X and 2X <-> 3X"));
    }
    Ok(order)
}

/// Coefficients (ascending degree) of the one-species steady-state
/// polynomial sum_e kappa_e (y_tgt - y_src) x^{y_src}.
fn steady_state_polynomial(net: &ReactionNetwork, kappa: &[f64]) -> Vec<f64> {
    let mut coeffs = Vec::new();
    for (e, r) in net.reactions().iter().enumerate() {
        let src = net.complexes()[r.source].coords[0];
        let tgt = net.complexes()[r.target].coords[0];
        let deg = src as usize;
        if coeffs.len() <= deg {
            coeffs.resize(deg + 1, 0.0);
        }
        coeffs[deg] += kappa[e] * (tgt - src);
    }
    coeffs
}

fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs.iter().enumerate().skip(1).map(|(d, &c)| c * d as f64).collect()
}

fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Positive real roots from companion-matrix eigenvalues, Newton-polished,
/// deduplicated, ascending.
fn positive_real_roots(coeffs: &[f64]) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    while c.last().map(|&v| v == 0.0).unwrap_or(false) {
        c.pop();
    }
    let deg = c.len().saturating_sub(1);
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let comp = DMatrix::from_fn(deg, deg, |i, j| {
        if j + 1 == deg {
            -c[i] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let eig = comp.complex_eigenvalues();
    let dcoeffs = derivative(&c);
    let mut roots: Vec<f64> = Vec::new();
    for z in eig.iter() {
        if z.im.abs() > 1e-8 * z.re.abs().max(1.0) {
            continue;
        }
        let mut x = z.re;
        for _ in 0..3 {
            let d = eval_poly(&dcoeffs, x);
            if d.abs() < 1e-300 {
                break;
            }
            x -= eval_poly(&c, x) / d;
        }
        if x > 0.0 {
            roots.push(x);
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|b, a| (*b - *a).abs() <= 1e-6 * a.abs().max(1.0));
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{analyze, parse_network};
    use approx::assert_relative_eq;

    fn cubic_exchange() -> ReactionNetwork {
        parse_network("3X -> X+Y+Z\nX+Y+Z -> 3Z\n3Z -> 3X\n3Z -> 3Y\n3Y -> 3X\n").unwrap()
    }

    fn ladder() -> ReactionNetwork {
        parse_network("0 <-> X\n2X <-> 3X\n").unwrap()
    }

    fn demo_plan(net: &ReactionNetwork, stoich: &StoichAnalysis) -> PerturbationPlan {
        let kappa_star =
            RateAssignment::new(net, vec![1.0, 2.0, 2.0, 2.0, 1.0]).unwrap();
        let x0 = DVector::from_vec(vec![2.0, 2f64.powf(2.0 / 3.0), 2f64.powf(1.0 / 3.0)]);
        let initial_conditions = default_initial_conditions(stoich, &x0, 3).unwrap();
        let mut cfg = IntegratorConfig::new(60.0);
        cfg.rel_tol = 1e-9;
        cfg.abs_tol = 1e-11;
        PerturbationPlan { kappa_star, eps: 0.05, trials: 4, seed: 7, initial_conditions, cfg }
    }

    #[test]
    fn samples_stay_in_ball_and_repeat_exactly() {
        let net = cubic_exchange();
        let stoich = analyze(&net).unwrap();
        let plan = demo_plan(&net, &stoich);
        for trial in 0..200 {
            let a = perturb_sample(&plan, trial);
            let b = perturb_sample(&plan, trial);
            assert_eq!(a.kappa(), b.kappa());
            let dist: f64 = a
                .kappa()
                .iter()
                .zip(plan.kappa_star.kappa())
                .map(|(s, k)| (s - k) * (s - k))
                .sum::<f64>()
                .sqrt();
            assert!(dist <= plan.eps, "trial {trial} left the ball: {dist}");
            assert!(a.kappa().iter().all(|&k| k > 0.0));
        }
        // Distinct trials see distinct samples.
        let a = perturb_sample(&plan, 0);
        let b = perturb_sample(&plan, 1);
        assert_ne!(a.kappa(), b.kappa());
    }

    #[test]
    fn zero_radius_reproduces_nominal_rates() {
        let net = cubic_exchange();
        let stoich = analyze(&net).unwrap();
        let mut plan = demo_plan(&net, &stoich);
        plan.eps = 0.0;
        let s = perturb_sample(&plan, 3);
        assert_eq!(s.kappa(), plan.kappa_star.kappa());
    }

    #[test]
    fn plan_validation_rejects_bad_radius_and_mixed_classes() {
        let net = cubic_exchange();
        let stoich = analyze(&net).unwrap();
        let mut plan = demo_plan(&net, &stoich);
        plan.eps = 1.0; // equals the smallest nominal rate
        assert!(matches!(plan.validate(&net, &stoich), Err(CrnError::InvalidPlan { .. })));
        let mut plan = demo_plan(&net, &stoich);
        plan.initial_conditions.push(DVector::from_vec(vec![1.0, 1.0, 1.0]));
        assert!(matches!(plan.validate(&net, &stoich), Err(CrnError::InvalidPlan { .. })));
    }

    #[test]
    fn initial_conditions_share_the_class_and_differ() {
        let net = cubic_exchange();
        let stoich = analyze(&net).unwrap();
        let x0 = DVector::from_vec(vec![2.0, 2f64.powf(2.0 / 3.0), 2f64.powf(1.0 / 3.0)]);
        let ics = default_initial_conditions(&stoich, &x0, 5).unwrap();
        assert_eq!(ics.len(), 5);
        for ic in &ics[1..] {
            assert!(stoich.conserved_residual(&(ic - &x0)) <= 1e-10);
            assert!((ic - &x0).norm() > 1e-3);
        }
    }

    #[test]
    fn stability_probe_sees_single_attractor() {
        let net = cubic_exchange();
        let stoich = analyze(&net).unwrap();
        let plan = demo_plan(&net, &stoich);
        let verdict = global_stability_probe(&net, &stoich, &plan).unwrap();
        assert!(verdict.all_unique, "trials: {:?}",
            verdict.trials.iter().map(|t| (&t.status, t.max_pairwise_gap)).collect::<Vec<_>>());
        assert_eq!(verdict.trials.len(), plan.trials);
    }

    #[test]
    fn probe_requires_balanced_nominal_rates() {
        let net = cubic_exchange();
        let stoich = analyze(&net).unwrap();
        let mut plan = demo_plan(&net, &stoich);
        plan.kappa_star = RateAssignment::new(&net, vec![1.0; 5]).unwrap();
        assert!(matches!(
            global_stability_probe(&net, &stoich, &plan),
            Err(CrnError::NotComplexBalanced { .. })
        ));
    }

    #[test]
    fn permanence_envelope_is_positive_and_bounded() {
        let net = cubic_exchange();
        let stoich = analyze(&net).unwrap();
        let mut plan = demo_plan(&net, &stoich);
        plan.trials = 3;
        plan.cfg = IntegratorConfig::new(30.0);
        let env = permanence_probe(&net, &stoich, &plan, None).unwrap();
        assert!(env.margin_to_boundary > 0.0);
        assert!(env.box_hi.iter().all(|v| v.is_finite()));
        assert_relative_eq!(env.window_start, 15.0);
    }

    #[test]
    fn variable_rate_envelope_stays_positive_and_repeats() {
        let net = cubic_exchange();
        let stoich = analyze(&net).unwrap();
        let mut plan = demo_plan(&net, &stoich);
        plan.trials = 3;
        plan.cfg = IntegratorConfig::new(30.0);
        let a = permanence_probe_variable(&net, &stoich, &plan, None).unwrap();
        assert!(a.margin_to_boundary > 0.0);
        assert!(a.box_hi.iter().all(|v| v.is_finite()));
        assert_relative_eq!(a.window_start, 15.0);
        // Sinusoid frequencies and phases are seeded per trial, so the
        // whole envelope reproduces bitwise.
        let b = permanence_probe_variable(&net, &stoich, &plan, None).unwrap();
        assert_eq!(a.box_lo, b.box_lo);
        assert_eq!(a.box_hi, b.box_hi);
    }

    #[test]
    fn scan_reports_the_fold() {
        let net = ladder();
        let grid: Vec<(f64, f64)> = vec![(1.0, 2.0), (1.0, 3.1), (1.0, 5.0)];
        let points = bifurcation_scan_1d(&net, &grid).unwrap();
        assert_eq!(points[0].roots.len(), 1);
        assert_eq!(points[1].roots.len(), 3);
        assert_eq!(points[2].roots.len(), 3);
        // x = 1 is always a root; its eigenvalue is k2 - 3 k1.
        for p in &points {
            let at_one = p.roots.iter().find(|r| (r.x - 1.0).abs() < 1e-9).unwrap();
            assert_relative_eq!(at_one.eigenvalue, p.kappa2 - 3.0 * p.kappa1, epsilon = 1e-10);
        }
        assert_eq!(points[0].roots[0].stability, Stability::Stable);
        assert_eq!(points[1].roots[1].stability, Stability::Unstable);
    }

    #[test]
    fn scan_rejects_other_networks() {
        let net = cubic_exchange();
        assert!(matches!(
            bifurcation_scan_1d(&net, &[(1.0, 1.0)]),
            Err(CrnError::UnsupportedShape { .. })
        ));
    }
}
