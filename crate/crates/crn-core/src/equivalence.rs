//! Dynamical equivalence of mass-action systems.
//!
//! Two networks with rates induce the same ODE exactly when their
//! right-hand sides agree as polynomial maps. Coefficients are accumulated
//! in exact rational arithmetic (every f64 is a dyadic rational), so two
//! systems built from the same floats compare equal with no tolerance at
//! all; a float-level fallback gap is reported for systems that agree only
//! approximately.

use crate::kinetics::RateAssignment;
use crate::network::{parse_network, ReactionNetwork};
use crate::{CrnError, Result};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;

/// Monomial exponents keyed by the f64 bit patterns of the source complex
/// coordinates, so non-integer exponents from real-mode networks key
/// exactly.
type Exponent = Vec<u64>;

/// The right-hand side of a mass-action system as a map from monomials to
/// exact per-species coefficient vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialMap {
    pub species: Vec<String>,
    terms: BTreeMap<Exponent, Vec<BigRational>>,
}

impl PolynomialMap {
    /// Accumulates kappa_e * (y_tgt - y_src) onto the monomial x^{y_src}
    /// for every reaction, in exact arithmetic, dropping terms that cancel
    /// to zero.
    pub fn from_system(net: &ReactionNetwork, rates: &RateAssignment) -> Result<Self> {
        if rates.kappa().len() != net.num_reactions() {
            return Err(CrnError::RateMismatch {
                msg: format!(
                    "{} rates for {} reactions",
                    rates.kappa().len(),
                    net.num_reactions()
                ),
            });
        }
        let n = net.num_species();
        let mut terms: BTreeMap<Exponent, Vec<BigRational>> = BTreeMap::new();
        for (e, r) in net.reactions().iter().enumerate() {
            let kappa = BigRational::from_float(rates.kappa()[e]).ok_or_else(|| {
                CrnError::Internal { msg: format!("rate {} is not finite", rates.kappa()[e]) }
            })?;
            let src = &net.complexes()[r.source].coords;
            let tgt = &net.complexes()[r.target].coords;
            let key: Exponent = src.iter().map(|c| c.to_bits()).collect();
            let entry = terms.entry(key).or_insert_with(|| vec![BigRational::zero(); n]);
            for i in 0..n {
                let delta = BigRational::from_float(tgt[i]).unwrap()
                    - BigRational::from_float(src[i]).unwrap();
                entry[i] += &kappa * delta;
            }
        }
        terms.retain(|_, coeffs| coeffs.iter().any(|c| !c.is_zero()));
        Ok(PolynomialMap { species: net.species().to_vec(), terms })
    }

    /// Renames this map's species axes into `order`, which must be a
    /// permutation of them.
    pub fn reorder_species(&self, order: &[String]) -> Result<Self> {
        if order.len() != self.species.len() {
            return Err(CrnError::SpeciesMismatch {
                msg: format!("{} species vs {}", self.species.len(), order.len()),
            });
        }
        let perm: Vec<usize> = order
            .iter()
            .map(|name| {
                self.species.iter().position(|s| s == name).ok_or_else(|| {
                    CrnError::SpeciesMismatch { msg: format!("species {name} missing") }
                })
            })
            .collect::<Result<_>>()?;
        let terms = self
            .terms
            .iter()
            .map(|(key, coeffs)| {
                let new_key: Exponent = perm.iter().map(|&i| key[i]).collect();
                let new_coeffs: Vec<BigRational> =
                    perm.iter().map(|&i| coeffs[i].clone()).collect();
                (new_key, new_coeffs)
            })
            .collect();
        Ok(PolynomialMap { species: order.to_vec(), terms })
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }
}

/// Relative coefficient gap below which two inexact right-hand sides
/// still count as the same system.
pub const COEFF_GAP_TOL: f64 = 1e-12;

/// Exact-or-near equivalence verdict for two mass-action systems.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub equivalent: bool,
    /// True when the polynomial maps agree as exact rationals.
    pub exact: bool,
    /// Largest relative coefficient gap (0 when exact).
    pub max_coeff_gap: f64,
}

/// Compares the induced ODE right-hand sides. Species sets must match by
/// name; orders may differ. Exact rational equality wins outright;
/// otherwise the verdict is the float-level relative gap against 1e-12.
pub fn dynamically_equivalent(
    net_a: &ReactionNetwork,
    rates_a: &RateAssignment,
    net_b: &ReactionNetwork,
    rates_b: &RateAssignment,
) -> Result<EquivalenceReport> {
    let pa = PolynomialMap::from_system(net_a, rates_a)?;
    let pb = PolynomialMap::from_system(net_b, rates_b)?;
    let mut sa = pa.species.clone();
    let mut sb = pb.species.clone();
    sa.sort();
    sb.sort();
    if sa != sb {
        return Err(CrnError::SpeciesMismatch {
            msg: format!("species sets differ: {:?} vs {:?}", pa.species, pb.species),
        });
    }
    let pb = pb.reorder_species(&pa.species)?;
    if pa.terms == pb.terms {
        return Ok(EquivalenceReport { equivalent: true, exact: true, max_coeff_gap: 0.0 });
    }
    // Near-miss path: measure the largest relative coefficient gap.
    let mut keys: Vec<&Exponent> = pa.terms.keys().collect();
    for k in pb.terms.keys() {
        if !pa.terms.contains_key(k) {
            keys.push(k);
        }
    }
    let n = pa.species.len();
    let zero = vec![BigRational::zero(); n];
    let mut scale = BigRational::zero();
    let mut max_abs_gap = BigRational::zero();
    for key in keys {
        let ca = pa.terms.get(key).unwrap_or(&zero);
        let cb = pb.terms.get(key).unwrap_or(&zero);
        for i in 0..n {
            let gap = (&ca[i] - &cb[i]).abs();
            if gap > max_abs_gap {
                max_abs_gap = gap;
            }
            for c in [&ca[i], &cb[i]] {
                let a = c.abs();
                if a > scale {
                    scale = a;
                }
            }
        }
    }
    let gap = if scale.is_zero() {
        0.0
    } else {
        (max_abs_gap / scale).to_f64().unwrap_or(f64::INFINITY)
    };
    Ok(EquivalenceReport { equivalent: gap <= COEFF_GAP_TOL, exact: false, max_coeff_gap: gap })
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exposes a map's terms as floats for reporting: (exponents, coefficients)
/// rows in key order.
pub fn polynomial_rows(map: &PolynomialMap) -> Vec<(Vec<f64>, Vec<f64>)> {
    map.terms
        .iter()
        .map(|(key, coeffs)| {
            (
                key.iter().map(|&b| f64::from_bits(b)).collect(),
                coeffs.iter().map(rational_to_f64).collect(),
            )
        })
        .collect()
}

/// Square flow on (X, Y): the cycle 0 -> X -> X+Y -> Y -> 0 plus the
/// diagonal feed 0 -> X+Y. Rates bind in that edge order.
pub fn square_flow() -> ReactionNetwork {
    parse_network("0 -> X\nX -> X+Y\nX+Y -> Y\nY -> 0\n0 -> X+Y\n").unwrap()
}

/// Square flow with the extra feed 0 -> Y appended as a sixth edge.
pub fn square_flow_extended() -> ReactionNetwork {
    parse_network("0 -> X\nX -> X+Y\nX+Y -> Y\nY -> 0\n0 -> X+Y\n0 -> Y\n").unwrap()
}

/// Outcome of rewriting a five-rate extended system into the four-vertex
/// square flow with the same dynamics.
#[derive(Debug, Clone, PartialEq)]
pub enum Reparameterization {
    /// All six rewritten rates are strictly positive.
    Feasible { k1: f64, k5: f64, k6: f64 },
    /// A rewritten rate degenerates to zero: the rewrite exists only as a
    /// limit.
    Boundary { k1: f64, k5: f64, k6: f64 },
    /// No nonnegative rewrite exists.
    Infeasible,
}

/// Splits the feeds of the square flow run at rates (a1, k2, k3, k4, a5)
/// into six rates (k1, k2, k3, k4, k5, k6) of the extended network with
/// identical dynamics and a complex-balanced profile. The quadratic picks
/// k1 = (-a5 + sqrt(a5^2 + 4 (a1 + a5) r)) / 2 with r = k2 k4 / k3, then
/// k5 = (a1 + a5) - k1 and k6 = a5 - k5 close the two feed sums exactly.
pub fn split_feeds_balanced(
    a1: f64,
    a5: f64,
    k2: f64,
    k3: f64,
    k4: f64,
) -> Result<Reparameterization> {
    for (name, v) in [("a1", a1), ("a5", a5), ("k2", k2), ("k3", k3), ("k4", k4)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(CrnError::InvalidPlan {
                msg: format!("rate {name} must be positive and finite, got {v}"),
            });
        }
    }
    let ratio = k2 * k4 / k3;
    let disc = a5 * a5 + 4.0 * (a1 + a5) * ratio;
    let k1 = (-a5 + disc.sqrt()) / 2.0;
    let k5 = (a1 + a5) - k1;
    let k6 = a5 - k5;
    if k1 > 0.0 && k5 > 0.0 && k6 > 0.0 {
        Ok(Reparameterization::Feasible { k1, k5, k6 })
    } else if k1 >= 0.0 && k5 >= 0.0 && k6 >= 0.0 {
        Ok(Reparameterization::Boundary { k1, k5, k6 })
    } else {
        Ok(Reparameterization::Infeasible)
    }
}

/// Where a square-flow rate choice sits relative to complex balance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbRegion {
    /// k2 k4 / k3 equals a1: the four-vertex system is itself
    /// complex-balanced.
    OnToricLocus,
    /// a1 < k2 k4 / k3 < a1 + 2 a5: not balanced as given, but dynamically
    /// equivalent to a balanced six-rate extension.
    InsideStrip,
    /// No equivalent balanced extension with positive rates.
    Outside,
}

/// Classifies (a1, k2, k3, k4, a5) and, inside the strip, checks the
/// rewrite end to end: the six-rate system must be dynamically equivalent
/// to the five-rate one and complex-balanced.
pub fn cb_region_probe(a1: f64, a5: f64, k2: f64, k3: f64, k4: f64) -> Result<CbRegion> {
    let ratio = k2 * k4 / k3;
    if (ratio - a1).abs() <= 1e-10 * ratio.abs().max(a1.abs()).max(1.0) {
        return Ok(CbRegion::OnToricLocus);
    }
    if !(ratio > a1 && ratio < a1 + 2.0 * a5) {
        return Ok(CbRegion::Outside);
    }
    let repar = split_feeds_balanced(a1, a5, k2, k3, k4)?;
    let (k1, k5, k6) = match repar {
        Reparameterization::Feasible { k1, k5, k6 } => (k1, k5, k6),
        other => {
            return Err(CrnError::Internal {
                msg: format!("strip interior produced non-feasible rewrite {other:?}"),
            })
        }
    };
    let base = square_flow();
    let ext = square_flow_extended();
    let rates_base = RateAssignment::new(&base, vec![a1, k2, k3, k4, a5])?;
    let rates_ext = RateAssignment::new(&ext, vec![k1, k2, k3, k4, k5, k6])?;
    let report = dynamically_equivalent(&base, &rates_base, &ext, &rates_ext)?;
    if !report.equivalent {
        return Err(CrnError::Internal {
            msg: format!("rewrite is not dynamically equivalent (gap {})", report.max_coeff_gap),
        });
    }
    let stoich = crate::network::analyze(&ext)?;
    let toric = toric_check(&ext, &rates_ext, &stoich)?;
    if !toric {
        return Err(CrnError::Internal {
            msg: "rewritten system failed the balance check inside the strip".into(),
        });
    }
    Ok(CbRegion::InsideStrip)
}

fn toric_check(
    net: &ReactionNetwork,
    rates: &RateAssignment,
    stoich: &crate::network::StoichAnalysis,
) -> Result<bool> {
    Ok(crate::balance::toric_membership(net, rates, stoich)?.member)
}
