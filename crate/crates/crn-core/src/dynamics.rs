//! Trajectory integration.
//!
//! Embedded Dormand-Prince 5(4) pair with PI step-size control. Positivity
//! is preserved by step rejection: any stage or proposed state with a
//! non-positive component rejects the step and halves it, so trajectories
//! never evaluate the vector field outside the open positive orthant.
//! Each accepted sample updates the running conservation drift (projection
//! of x(t) - x(0) onto the conserved directions) and, when enabled, a
//! trailing-window convergence test.

use crate::kinetics::{rhs_unchecked, RateAssignment, RateSchedule};
use crate::network::{ensure_positive, ReactionNetwork, StoichAnalysis};
use crate::{CrnError, Result};
use nalgebra::DVector;
use std::collections::VecDeque;

/// Integration settings. `t_end` is the only field without a serviceable
/// general default.
#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step size, if any.
    pub max_step: Option<f64>,
    /// Take constant steps of this size instead of adaptive control.
    /// Positivity rejection still halves below it. Used for step-size
    /// convergence studies.
    pub fixed_step: Option<f64>,
    /// Track the trailing-window convergence test.
    pub detect_convergence: bool,
    /// End the run once the convergence test fires.
    pub stop_at_convergence: bool,
    /// Trailing window length; defaults to 5% of `t_end`.
    pub convergence_window: Option<f64>,
    /// Relative sup-norm variation bound over the trailing window.
    pub convergence_eps: f64,
    /// Hard cap on accepted plus rejected steps.
    pub max_steps: usize,
}

impl IntegratorConfig {
    pub fn new(t_end: f64) -> Self {
        IntegratorConfig {
            t_end,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: None,
            fixed_step: None,
            detect_convergence: true,
            stop_at_convergence: false,
            convergence_window: None,
            convergence_eps: 1e-9,
            max_steps: 4_000_000,
        }
    }

    fn window(&self) -> f64 {
        self.convergence_window.unwrap_or(0.05 * self.t_end)
    }
}

/// Besides the state variation bound, convergence requires the vector
/// field itself to be small: |f|_inf <= 1e-6 * max(1, |x|_inf).
const CONV_RHS_FACTOR: f64 = 1e-6;

/// How an integration run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    CompletedSpan,
    Converged { t: f64 },
    /// Error control pushed the step below the floor.
    StepSizeUnderflow { t: f64 },
    /// Positivity could not be maintained above the minimum step; the
    /// trajectory is heading into the boundary faster than the step floor.
    PositivityFailure { t: f64 },
    StepBudgetExhausted { t: f64 },
}

impl Termination {
    pub fn is_failure(&self) -> bool {
        matches!(
            self,
            Termination::StepSizeUnderflow { .. }
                | Termination::PositivityFailure { .. }
                | Termination::StepBudgetExhausted { .. }
        )
    }
}

/// An accepted-step sample path plus run diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// max over samples of |P^T (x(t) - x(0))|.
    pub conservation_drift: f64,
    /// Set once the convergence test fires; the state it fired at.
    pub converged_to: Option<DVector<f64>>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub termination: Termination,
}

impl Trajectory {
    pub fn last_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds at least the initial state")
    }

    /// CSV rows `t,<species...>` with shortest round-trip float formatting.
    pub fn write_csv<W: std::io::Write>(
        &self,
        net: &ReactionNetwork,
        out: &mut W,
    ) -> std::io::Result<()> {
        write!(out, "t")?;
        for s in net.species() {
            write!(out, ",{s}")?;
        }
        writeln!(out)?;
        for (t, x) in self.times.iter().zip(&self.states) {
            write!(out, "{t}")?;
            for v in x.iter() {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates the autonomous mass-action system from `x0`.
pub fn integrate(
    net: &ReactionNetwork,
    rates: &RateAssignment,
    stoich: &StoichAnalysis,
    x0: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let kappa = rates.kappa();
    run(stoich, x0, cfg, cfg.detect_convergence, move |_t, x, out| {
        rhs_unchecked(net, kappa, x, out);
        Ok(())
    })
}

/// Integrates under a bounded rate schedule. The trailing-window
/// convergence test is disabled: with time-varying rates a limit need not
/// exist, so `converged_to` stays `None`.
pub fn integrate_variable(
    net: &ReactionNetwork,
    schedule: &RateSchedule,
    stoich: &StoichAnalysis,
    x0: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    run(stoich, x0, cfg, false, |t, x, out| {
        let kappa = schedule.eval(t)?;
        rhs_unchecked(net, &kappa, x, out);
        Ok(())
    })
}

fn run<F>(
    stoich: &StoichAnalysis,
    x0: &DVector<f64>,
    cfg: &IntegratorConfig,
    detect_convergence: bool,
    mut field: F,
) -> Result<Trajectory>
where
    F: FnMut(f64, &DVector<f64>, &mut DVector<f64>) -> Result<()>,
{
    ensure_positive(x0)?;
    if !(cfg.t_end >= 0.0) || !cfg.t_end.is_finite() {
        return Err(CrnError::InvalidPlan { msg: format!("t_end must be finite and >= 0, got {}", cfg.t_end) });
    }
    if let Some(h) = cfg.fixed_step {
        if !(h > 0.0) {
            return Err(CrnError::InvalidPlan { msg: format!("fixed_step must be positive, got {h}") });
        }
    }
    let n = x0.len();
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.clone()],
        conservation_drift: 0.0,
        converged_to: None,
        accepted_steps: 0,
        rejected_steps: 0,
        termination: Termination::CompletedSpan,
    };
    if cfg.t_end == 0.0 {
        return Ok(traj);
    }

    let mut t = 0.0;
    let mut x = x0.clone();
    let mut k: Vec<DVector<f64>> = (0..7).map(|_| DVector::zeros(n)).collect();
    field(0.0, &x, &mut k[0])?;

    let max_step = cfg.max_step.unwrap_or(f64::INFINITY);
    let mut h = match cfg.fixed_step {
        Some(h) => h.min(cfg.t_end),
        None => initial_step(&x, &k[0], cfg).min(max_step).min(cfg.t_end),
    };

    // PI controller state (Hairer's dopri5 constants).
    const SAFE: f64 = 0.9;
    const BETA: f64 = 0.04;
    const EXPO1: f64 = 0.2 - BETA * 0.75;
    const FACC1: f64 = 5.0; // max shrink factor per step
    const FACC2: f64 = 0.1; // max growth factor is 1/FACC2
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;
    let mut last_reject_positivity = false;

    let window = cfg.window();
    let mut recent: VecDeque<(f64, DVector<f64>)> = VecDeque::new();
    recent.push_back((0.0, x.clone()));

    let mut stage = DVector::zeros(n);
    let mut y5 = DVector::zeros(n);
    let mut f_new = DVector::zeros(n);

    let mut steps_taken = 0usize;
    'outer: while t < cfg.t_end {
        if steps_taken >= cfg.max_steps {
            traj.termination = Termination::StepBudgetExhausted { t };
            break;
        }
        steps_taken += 1;
        let h_floor = 1e-13 * t.abs().max(1.0);
        if h < h_floor || t + h == t {
            traj.termination = if last_reject_positivity {
                Termination::PositivityFailure { t }
            } else {
                Termination::StepSizeUnderflow { t }
            };
            break;
        }
        let h_here = h.min(cfg.t_end - t);

        // Stages 2..6, then the FSAL stage at the proposed state.
        let mut positive = true;
        for s in 1..6 {
            let a: &[f64] = match s {
                1 => &A2,
                2 => &A3,
                3 => &A4,
                4 => &A5,
                _ => &A6,
            };
            stage.copy_from(&x);
            for (j, &aj) in a.iter().enumerate() {
                if aj != 0.0 {
                    stage.axpy(h_here * aj, &k[j], 1.0);
                }
            }
            if stage.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                positive = false;
                break;
            }
            let (lo, hi) = k.split_at_mut(s);
            let _ = lo;
            field(t + C[s] * h_here, &stage, &mut hi[0])?;
        }
        if positive {
            y5.copy_from(&x);
            for (j, &bj) in B.iter().enumerate() {
                if bj != 0.0 {
                    y5.axpy(h_here * bj, &k[j], 1.0);
                }
            }
            if y5.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                positive = false;
            }
        }
        if !positive {
            traj.rejected_steps += 1;
            last_rejected = true;
            last_reject_positivity = true;
            h = h_here * 0.5;
            continue;
        }
        field(t + h_here, &y5, &mut f_new)?;
        k[6].copy_from(&f_new);

        // Embedded error estimate against the mixed tolerance.
        let mut err_sq = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, &ej) in E.iter().enumerate() {
                if ej != 0.0 {
                    e += ej * k[j][i];
                }
            }
            e *= h_here;
            let sc = cfg.abs_tol + cfg.rel_tol * x[i].abs().max(y5[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let err = (err_sq / n as f64).sqrt();

        let accept = cfg.fixed_step.is_some() || err <= 1.0;
        if !accept {
            traj.rejected_steps += 1;
            let fac11 = err.powf(EXPO1);
            h = h_here / (fac11 / SAFE).min(FACC1);
            last_rejected = true;
            last_reject_positivity = false;
            continue;
        }

        // Accept.
        t += h_here;
        x.copy_from(&y5);
        k.swap(0, 6); // FSAL
        traj.accepted_steps += 1;
        traj.times.push(t);
        traj.states.push(x.clone());
        let drift = stoich.conserved_residual(&(&x - x0));
        if drift > traj.conservation_drift {
            traj.conservation_drift = drift;
        }

        if detect_convergence && traj.converged_to.is_none() {
            recent.push_back((t, x.clone()));
            while recent.len() >= 2 && recent[1].0 <= t - window {
                recent.pop_front();
            }
            let covered = recent.front().map(|(t0, _)| *t0 <= t - window).unwrap_or(false);
            if covered && converged_here(&recent, &x, cfg.convergence_eps) {
                let fnorm = k[0].amax();
                if fnorm <= CONV_RHS_FACTOR * x.amax().max(1.0) {
                    traj.converged_to = Some(x.clone());
                    if cfg.stop_at_convergence {
                        traj.termination = Termination::Converged { t };
                        break 'outer;
                    }
                }
            }
        }

        if cfg.fixed_step.is_none() {
            let err_b = err.max(1e-10);
            let fac11 = err_b.powf(EXPO1);
            let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(FACC2, FACC1);
            let mut h_new = h_here / fac;
            if last_rejected {
                h_new = h_new.min(h_here);
            }
            h = h_new.min(max_step);
            facold = err_b.max(1e-4);
        } else {
            h = cfg.fixed_step.unwrap();
        }
        last_rejected = false;
        last_reject_positivity = false;
    }
    Ok(traj)
}

fn converged_here(recent: &VecDeque<(f64, DVector<f64>)>, x: &DVector<f64>, eps: f64) -> bool {
    let scale = x.amax().max(1e-300);
    recent
        .iter()
        .all(|(_, s)| {
            let mut dev = 0.0f64;
            for i in 0..x.len() {
                dev = dev.max((s[i] - x[i]).abs());
            }
            dev <= eps * scale
        })
}

/// Conservative first step from the scaled norms of the state and slope.
fn initial_step(x: &DVector<f64>, f: &DVector<f64>, cfg: &IntegratorConfig) -> f64 {
    let n = x.len() as f64;
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..x.len() {
        let sc = cfg.abs_tol + cfg.rel_tol * x[i].abs();
        d0 += (x[i] / sc) * (x[i] / sc);
        d1 += (f[i] / sc) * (f[i] / sc);
    }
    d0 = (d0 / n).sqrt();
    d1 = (d1 / n).sqrt();
    if d1 > 1e-10 {
        (0.01 * d0 / d1).max(1e-10)
    } else {
        (1e-6 * cfg.t_end).max(1e-10)
    }
}

/// Descent audit of the relative-entropy Lyapunov function along a
/// trajectory: each sampled value may exceed its predecessor by at most
/// 1e-9 * V + 1e-12.
#[derive(Debug, Clone)]
pub struct DescentReport {
    pub monotone: bool,
    /// Largest raw increase V_{k+1} - V_k over the sample path (0 if none).
    pub max_increase: f64,
    /// Sample index of the first slack violation, if any.
    pub first_violation: Option<usize>,
}

pub fn lyapunov_descent_check(
    traj: &Trajectory,
    x_star: &DVector<f64>,
) -> Result<DescentReport> {
    let ctx = crate::kinetics::LyapunovContext::new(x_star.clone())?;
    let mut prev: Option<f64> = None;
    let mut max_increase = 0.0f64;
    let mut first_violation = None;
    for (idx, state) in traj.states.iter().enumerate() {
        let v = ctx.value(state)?;
        if let Some(pv) = prev {
            let increase = v - pv;
            if increase > max_increase {
                max_increase = increase;
            }
            if increase > 1e-9 * pv.abs() + 1e-12 && first_violation.is_none() {
                first_violation = Some(idx);
            }
        }
        prev = Some(v);
    }
    Ok(DescentReport { monotone: first_violation.is_none(), max_increase, first_violation })
}
