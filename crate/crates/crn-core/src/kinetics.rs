//! Mass-action kinetics: rate assignments, bounded rate schedules, the
//! polynomial right-hand side, its analytic Jacobian, and the relative
//! entropy Lyapunov function used around complex-balanced steady states.

use crate::network::{ensure_positive, ReactionNetwork};
use crate::{CrnError, Result};
use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;

/// Strictly positive rate constants, one per reaction in edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct RateAssignment {
    kappa: Vec<f64>,
}

impl RateAssignment {
    pub fn new(net: &ReactionNetwork, kappa: Vec<f64>) -> Result<Self> {
        if kappa.len() != net.num_reactions() {
            return Err(CrnError::RateMismatch {
                msg: format!(
                    "{} rates given for {} reactions",
                    kappa.len(),
                    net.num_reactions()
                ),
            });
        }
        for (e, &k) in kappa.iter().enumerate() {
            if !(k > 0.0) || !k.is_finite() {
                return Err(CrnError::NonPositiveRate { edge: e, value: k });
            }
        }
        Ok(RateAssignment { kappa })
    }

    /// Builds an assignment from a map keyed by canonical reaction text.
    /// The keys must cover the edge set exactly.
    pub fn from_named(net: &ReactionNetwork, named: &HashMap<String, f64>) -> Result<Self> {
        let mut kappa = Vec::with_capacity(net.num_reactions());
        let mut used = std::collections::HashSet::new();
        let mut missing = Vec::new();
        for e in 0..net.num_reactions() {
            let key = net.reaction_string(e);
            match named.get(&key) {
                Some(&v) => kappa.push(v),
                None => missing.push(key.clone()),
            }
            used.insert(key);
        }
        let mut unknown: Vec<&String> =
            named.keys().filter(|k| !used.contains(k.as_str())).collect();
        unknown.sort();
        if !missing.is_empty() || !unknown.is_empty() {
            let mut parts = Vec::new();
            if !missing.is_empty() {
                parts.push(format!("missing rates for [{}]", missing.join("; ")));
            }
            if !unknown.is_empty() {
                let names: Vec<String> = unknown.iter().map(|s| s.to_string()).collect();
                parts.push(format!("unknown reactions [{}]", names.join("; ")));
            }
            return Err(CrnError::RateMismatch { msg: parts.join(", ") });
        }
        Self::new(net, kappa)
    }

    /// Replaces the rate values, keeping this assignment's length as the
    /// shape check. Used by samplers that already hold a valid assignment.
    pub fn with_values(&self, kappa: Vec<f64>) -> Result<Self> {
        if kappa.len() != self.kappa.len() {
            return Err(CrnError::RateMismatch {
                msg: format!("{} rates given for {}", kappa.len(), self.kappa.len()),
            });
        }
        for (e, &k) in kappa.iter().enumerate() {
            if !(k > 0.0) || !k.is_finite() {
                return Err(CrnError::NonPositiveRate { edge: e, value: k });
            }
        }
        Ok(RateAssignment { kappa })
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn min(&self) -> f64 {
        self.kappa.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn norm(&self) -> f64 {
        self.kappa.iter().map(|k| k * k).sum::<f64>().sqrt()
    }
}

/// Time-dependent rates: one bounded function per edge, with every value
/// required to stay inside [eps, 1/eps].
pub struct RateSchedule {
    funcs: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
    eps: f64,
}

impl RateSchedule {
    pub fn new(
        net: &ReactionNetwork,
        funcs: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
        eps: f64,
    ) -> Result<Self> {
        if funcs.len() != net.num_reactions() {
            return Err(CrnError::RateMismatch {
                msg: format!(
                    "{} schedule entries given for {} reactions",
                    funcs.len(),
                    net.num_reactions()
                ),
            });
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(CrnError::InvalidPlan {
                msg: format!("schedule bound eps must lie in (0, 1), got {eps}"),
            });
        }
        Ok(RateSchedule { funcs, eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Evaluates all edge rates at time `t`, enforcing the band.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let hi = 1.0 / self.eps;
        self.funcs
            .iter()
            .enumerate()
            .map(|(e, f)| {
                let v = f(t);
                if !v.is_finite() || v < self.eps || v > hi {
                    Err(CrnError::ScheduleOutOfBounds { edge: e, t, value: v, lo: self.eps, hi })
                } else {
                    Ok(v)
                }
            })
            .collect()
    }
}

/// x^y with 0^0 = 1; integer exponents go through binary exponentiation.
pub fn monomial(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = 1.0;
    for (&xi, &yi) in x.iter().zip(y) {
        if yi == 0.0 {
            continue;
        }
        if yi.fract() == 0.0 && yi.abs() <= i32::MAX as f64 {
            acc *= xi.powi(yi as i32);
        } else {
            acc *= xi.powf(yi);
        }
    }
    acc
}

/// Mass-action right-hand side at a strictly positive state.
pub fn rhs(net: &ReactionNetwork, rates: &RateAssignment, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_dims(net, rates.kappa.len(), x)?;
    ensure_positive(x)?;
    let mut out = DVector::zeros(net.num_species());
    rhs_unchecked(net, &rates.kappa, x, &mut out);
    Ok(out)
}

/// Right-hand side under a rate schedule at time `t`.
pub fn rhs_variable(
    net: &ReactionNetwork,
    schedule: &RateSchedule,
    t: f64,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let kappa = schedule.eval(t)?;
    check_dims(net, kappa.len(), x)?;
    ensure_positive(x)?;
    let mut out = DVector::zeros(net.num_species());
    rhs_unchecked(net, &kappa, x, &mut out);
    Ok(out)
}

/// Core accumulation without validity checks; `x` must be positive enough
/// for the monomials to be finite.
pub(crate) fn rhs_unchecked(
    net: &ReactionNetwork,
    kappa: &[f64],
    x: &DVector<f64>,
    out: &mut DVector<f64>,
) {
    out.fill(0.0);
    let xs = x.as_slice();
    for (e, r) in net.reactions().iter().enumerate() {
        let src = &net.complexes()[r.source].coords;
        let tgt = &net.complexes()[r.target].coords;
        let flux = kappa[e] * monomial(xs, src);
        for i in 0..out.len() {
            out[i] += flux * (tgt[i] - src[i]);
        }
    }
}

/// Analytic Jacobian of the right-hand side:
/// d/dx_k of kappa * x^y is kappa * y_k * x^y / x_k for positive x.
pub fn jacobian(
    net: &ReactionNetwork,
    rates: &RateAssignment,
    x: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    check_dims(net, rates.kappa.len(), x)?;
    ensure_positive(x)?;
    let n = net.num_species();
    let xs = x.as_slice();
    let mut jac = DMatrix::zeros(n, n);
    for (e, r) in net.reactions().iter().enumerate() {
        let src = &net.complexes()[r.source].coords;
        let tgt = &net.complexes()[r.target].coords;
        let flux = rates.kappa[e] * monomial(xs, src);
        for k in 0..n {
            if src[k] == 0.0 {
                continue;
            }
            let dflux = flux * src[k] / xs[k];
            for i in 0..n {
                jac[(i, k)] += dflux * (tgt[i] - src[i]);
            }
        }
    }
    Ok(jac)
}

fn check_dims(net: &ReactionNetwork, rate_len: usize, x: &DVector<f64>) -> Result<()> {
    if rate_len != net.num_reactions() {
        return Err(CrnError::RateMismatch {
            msg: format!("{} rates for {} reactions", rate_len, net.num_reactions()),
        });
    }
    if x.len() != net.num_species() {
        return Err(CrnError::ShapeMismatch {
            msg: format!("state has {} components, expected {}", x.len(), net.num_species()),
        });
    }
    Ok(())
}

/// Relative entropy of a state against a fixed positive reference:
/// V(x) = sum_i x_i (ln x_i - ln x*_i - 1) + x*_i.
/// V is zero exactly at x* and strictly convex on the positive orthant.
#[derive(Debug, Clone)]
pub struct LyapunovContext {
    x_star: DVector<f64>,
}

impl LyapunovContext {
    pub fn new(x_star: DVector<f64>) -> Result<Self> {
        ensure_positive(&x_star)?;
        Ok(LyapunovContext { x_star })
    }

    pub fn x_star(&self) -> &DVector<f64> {
        &self.x_star
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.check(x)?;
        let mut v = 0.0;
        for i in 0..x.len() {
            v += x[i] * (x[i].ln() - self.x_star[i].ln() - 1.0) + self.x_star[i];
        }
        Ok(v)
    }

    /// Gradient ln x - ln x*.
    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x)?;
        Ok(DVector::from_fn(x.len(), |i, _| x[i].ln() - self.x_star[i].ln()))
    }

    /// Lie derivative of V along the mass-action field at `x`.
    pub fn lie_derivative(
        &self,
        net: &ReactionNetwork,
        rates: &RateAssignment,
        x: &DVector<f64>,
    ) -> Result<f64> {
        let g = self.gradient(x)?;
        let f = rhs(net, rates, x)?;
        Ok(g.dot(&f))
    }

    fn check(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.x_star.len() {
            return Err(CrnError::ShapeMismatch {
                msg: format!("state has {} components, expected {}", x.len(), self.x_star.len()),
            });
        }
        ensure_positive(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::parse_network;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn cubic_exchange() -> ReactionNetwork {
        parse_network("3X -> X+Y+Z\nX+Y+Z -> 3Z\n3Z -> 3X\n3Z -> 3Y\n3Y -> 3X\n").unwrap()
    }

    #[test]
    fn rhs_at_unit_state_with_unit_rates() {
        let net = cubic_exchange();
        let rates = RateAssignment::new(&net, vec![1.0; 5]).unwrap();
        let x = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let f = rhs(&net, &rates, &x).unwrap();
        assert_abs_diff_eq!(f[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f[2], -3.0, epsilon = 1e-14);
    }

    #[test]
    fn rhs_rejects_nonpositive_state_and_bad_rates() {
        let net = cubic_exchange();
        let rates = RateAssignment::new(&net, vec![1.0; 5]).unwrap();
        let x = DVector::from_vec(vec![1.0, 0.0, 1.0]);
        assert!(matches!(rhs(&net, &rates, &x), Err(CrnError::NonPositiveState { .. })));
        assert!(matches!(
            RateAssignment::new(&net, vec![1.0; 4]),
            Err(CrnError::RateMismatch { .. })
        ));
        assert!(matches!(
            RateAssignment::new(&net, vec![1.0, 1.0, 0.0, 1.0, 1.0]),
            Err(CrnError::NonPositiveRate { edge: 2, .. })
        ));
    }

    #[test]
    fn named_rates_must_cover_edges_exactly() {
        let net = cubic_exchange();
        let mut named = HashMap::new();
        for e in 0..net.num_reactions() {
            named.insert(net.reaction_string(e), 1.0 + e as f64);
        }
        let rates = RateAssignment::from_named(&net, &named).unwrap();
        assert_eq!(rates.kappa(), &[1.0, 2.0, 3.0, 4.0, 5.0]);

        named.remove("3Z -> 3Y");
        assert!(matches!(
            RateAssignment::from_named(&net, &named),
            Err(CrnError::RateMismatch { .. })
        ));
        named.insert("3Z -> 3Y".into(), 4.0);
        named.insert("5Z -> X".into(), 1.0);
        assert!(matches!(
            RateAssignment::from_named(&net, &named),
            Err(CrnError::RateMismatch { .. })
        ));
    }

    #[test]
    fn scalar_jacobian_matches_closed_form() {
        // 0 <-> X, 2X <-> 3X with unit rates: f = 1 - x + x^2 - x^3,
        // f'(1) = -1 + 2 - 3 = -2.
        let net = parse_network("0 <-> X\n2X <-> 3X\n").unwrap();
        let rates = RateAssignment::new(&net, vec![1.0; 4]).unwrap();
        let x = DVector::from_vec(vec![1.0]);
        let j = jacobian(&net, &rates, &x).unwrap();
        assert_abs_diff_eq!(j[(0, 0)], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn schedule_band_is_enforced() {
        let net = parse_network("A <-> B\n").unwrap();
        let funcs: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>> =
            vec![Box::new(|t: f64| 1.0 + 0.5 * t.sin()), Box::new(|t: f64| 8.0 + 4.0 * t)];
        let sched = RateSchedule::new(&net, funcs, 0.1).unwrap();
        assert!(sched.eval(0.0).is_ok());
        // Second edge leaves [0.1, 10] for t > 0.5.
        let err = sched.eval(1.0).unwrap_err();
        assert!(matches!(err, CrnError::ScheduleOutOfBounds { edge: 1, .. }));
    }

    #[test]
    fn lyapunov_value_gradient_and_zero_at_reference() {
        let ctx = LyapunovContext::new(DVector::from_vec(vec![1.0])).unwrap();
        let e = DVector::from_vec(vec![std::f64::consts::E]);
        assert_relative_eq!(ctx.value(&e).unwrap(), 1.0, max_relative = 1e-14);
        assert_abs_diff_eq!(ctx.value(ctx.x_star()).unwrap(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(ctx.gradient(&e).unwrap()[0], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn monomial_handles_zero_base_and_integer_exponents() {
        assert_eq!(monomial(&[0.0], &[0.0]), 1.0);
        assert_eq!(monomial(&[0.0], &[2.0]), 0.0);
        assert_eq!(monomial(&[2.0, 3.0], &[3.0, 1.0]), 24.0);
        assert_relative_eq!(monomial(&[4.0], &[1.5]), 8.0, max_relative = 1e-14);
    }
}
