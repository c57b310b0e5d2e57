//! Complex balancing.
//!
//! A positive state is complex-balanced when at every vertex the mass-action
//! inflow equals the outflow. The per-vertex spanning-tree constants K_i
//! (sum over spanning in-trees rooted at i of the edge-rate product,
//! computed as principal minors of the per-class Laplacian) characterize
//! when such a state exists: the rates admit one exactly when ln K lies in
//! the span of the species-exponent columns plus the per-class constants.

use crate::kinetics::{monomial, rhs, RateAssignment};
use crate::linalg;
use crate::network::{ensure_positive, ReactionNetwork, StoichAnalysis};
use crate::{CrnError, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Acceptance threshold for the log-space toric membership residual.
pub const TORIC_TOL: f64 = 1e-8;

/// Newton solve limits for the in-class steady-state solve.
const NEWTON_MAX_ITERS: usize = 50;
const NEWTON_STEP_TOL: f64 = 1e-12;

/// Relative tolerance on the right-hand side when certifying a solved
/// steady state (relative to the one-sided flux scale).
const STEADY_RHS_TOL: f64 = 1e-10;

/// Per-vertex net flow (inflow minus outflow) at a positive state.
pub fn cb_residual(
    net: &ReactionNetwork,
    rates: &RateAssignment,
    x: &DVector<f64>,
) -> Result<Vec<f64>> {
    ensure_positive(x)?;
    if x.len() != net.num_species() {
        return Err(CrnError::ShapeMismatch {
            msg: format!("state has {} components, expected {}", x.len(), net.num_species()),
        });
    }
    let xs = x.as_slice();
    let phi: Vec<f64> =
        net.complexes().iter().map(|c| monomial(xs, &c.coords)).collect();
    let mut res = vec![0.0; net.num_complexes()];
    for (e, r) in net.reactions().iter().enumerate() {
        let flux = rates.kappa()[e] * phi[r.source];
        res[r.target] += flux;
        res[r.source] -= flux;
    }
    Ok(res)
}

/// Spanning-tree constants of a weakly reversible network, one per vertex.
#[derive(Debug, Clone)]
pub struct TreeConstants {
    pub values: Vec<f64>,
}

/// Computes K_i per vertex as the (i, i) principal minor of the restricted
/// per-class Laplacian D_out - A^T. For strongly connected classes every
/// K_i is strictly positive, and within each class K spans the kernel of
/// the restricted Laplacian.
pub fn tree_constants(
    net: &ReactionNetwork,
    rates: &RateAssignment,
    stoich: &StoichAnalysis,
) -> Result<TreeConstants> {
    if !stoich.weakly_reversible {
        return Err(CrnError::NotWeaklyReversible {
            msg: "tree constants are defined for weakly reversible networks".into(),
        });
    }
    if rates.kappa().len() != net.num_reactions() {
        return Err(CrnError::RateMismatch {
            msg: format!("{} rates for {} reactions", rates.kappa().len(), net.num_reactions()),
        });
    }
    let mut values = vec![0.0; net.num_complexes()];
    let mut local = vec![usize::MAX; net.num_complexes()];
    for class in &stoich.linkage_classes {
        let p = class.len();
        for (a, &v) in class.iter().enumerate() {
            local[v] = a;
        }
        // Column-based Laplacian: column b carries the outflow of vertex b.
        let mut lap = DMatrix::zeros(p, p);
        for (e, r) in net.reactions().iter().enumerate() {
            let (a, b) = (local[r.target], local[r.source]);
            if a == usize::MAX || b == usize::MAX {
                continue;
            }
            let k = rates.kappa()[e];
            lap[(a, b)] -= k;
            lap[(b, b)] += k;
        }
        for (a, &v) in class.iter().enumerate() {
            let k = if p <= 7 {
                linalg::det_minor(&lap, a)
            } else {
                linalg::det(&lap.clone().remove_row(a).remove_column(a))
            };
            if !(k > 0.0) {
                return Err(CrnError::Internal {
                    msg: format!("tree constant at vertex {v} is {k}, expected positive"),
                });
            }
            values[v] = k;
        }
        // Reset the scratch map so the next class skips this one's edges.
        for &v in class {
            local[v] = usize::MAX;
        }
    }
    Ok(TreeConstants { values })
}

/// Outcome of the toric membership test.
#[derive(Debug, Clone)]
pub struct ToricReport {
    pub member: bool,
    /// Log-space least-squares residual of ln K against the admissible span.
    pub residual: f64,
    pub tree: TreeConstants,
}

/// Tests whether the rates admit a complex-balanced state: ln K must lie in
/// span(columns of Y^T) + span(per-class indicators), within `TORIC_TOL`.
pub fn toric_membership(
    net: &ReactionNetwork,
    rates: &RateAssignment,
    stoich: &StoichAnalysis,
) -> Result<ToricReport> {
    let tree = tree_constants(net, rates, stoich)?;
    let ln_k = DVector::from_iterator(tree.values.len(), tree.values.iter().map(|k| k.ln()));
    let b = membership_matrix(net, stoich, true);
    let (_, residual) = linalg::least_squares(&b, &ln_k);
    Ok(ToricReport { member: residual <= TORIC_TOL, residual, tree })
}

/// Rows are [y_i^T | class indicators]; the indicator block is optional.
fn membership_matrix(
    net: &ReactionNetwork,
    stoich: &StoichAnalysis,
    with_indicators: bool,
) -> DMatrix<f64> {
    let m = net.num_complexes();
    let n = net.num_species();
    let l = if with_indicators { stoich.linkage_classes.len() } else { 0 };
    DMatrix::from_fn(m, n + l, |i, j| {
        if j < n {
            net.complexes()[i].coords[j]
        } else if stoich.class_of[i] == j - n {
            1.0
        } else {
            0.0
        }
    })
}

/// A certified complex-balanced steady state inside one compatibility class.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub x: DVector<f64>,
    pub newton_iterations: usize,
    /// Right-hand-side norm at the solution, relative to the flux scale.
    pub rhs_relative: f64,
    /// Conserved-direction mismatch against the anchoring state.
    pub class_residual: f64,
}

/// Solves for the complex-balanced steady state in the positive
/// compatibility class of `x0`.
///
/// A reference steady state comes from the log-space solve of
/// Y^T w = ln K (per-class constants fixed at one when that is consistent,
/// free otherwise); damped Newton then moves along exp(S-perp) to match the
/// conserved coordinates of `x0`.
pub fn solve_cb_steady_state(
    net: &ReactionNetwork,
    rates: &RateAssignment,
    stoich: &StoichAnalysis,
    x0: &DVector<f64>,
) -> Result<SteadyState> {
    ensure_positive(x0)?;
    if x0.len() != net.num_species() {
        return Err(CrnError::ShapeMismatch {
            msg: format!("anchor has {} components, expected {}", x0.len(), net.num_species()),
        });
    }
    let toric = toric_membership(net, rates, stoich)?;
    if !toric.member {
        return Err(CrnError::NotComplexBalanced { residual: toric.residual, tol: TORIC_TOL });
    }
    let x_ref = reference_steady_state(net, stoich, &toric.tree);

    let n = net.num_species();
    let q = n - stoich.dim_s;
    let p = &stoich.perp;
    let target = p.transpose() * x0;

    let state_from = |u: &DVector<f64>| -> DVector<f64> {
        let v = p * u;
        DVector::from_fn(n, |i, _| x_ref[i] * v[i].exp())
    };

    let mut u = DVector::zeros(q);
    let mut iterations = 0;
    if q > 0 {
        let mut x = state_from(&u);
        let mut g = p.transpose() * &x - &target;
        loop {
            if iterations >= NEWTON_MAX_ITERS {
                return Err(CrnError::SolveDidNotConverge {
                    iterations,
                    residual: g.norm(),
                });
            }
            iterations += 1;
            // J = P^T diag(x) P is symmetric positive definite for x > 0.
            let jac = p.transpose() * DMatrix::from_diagonal(&x) * p;
            let step = match jac.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => match jac.lu().solve(&(-&g)) {
                    Some(s) => s,
                    None => {
                        return Err(CrnError::SolveDidNotConverge {
                            iterations,
                            residual: g.norm(),
                        })
                    }
                },
            };
            let g_norm = g.norm();
            let mut lambda = 1.0;
            let (next_u, next_x, next_g) = loop {
                let cand_u = &u + &step * lambda;
                let cand_x = state_from(&cand_u);
                let cand_g = p.transpose() * &cand_x - &target;
                if cand_g.norm() <= g_norm || lambda < 1e-8 {
                    break (cand_u, cand_x, cand_g);
                }
                lambda *= 0.5;
            };
            let moved = (&next_u - &u).norm();
            u = next_u;
            x = next_x;
            g = next_g;
            if moved < NEWTON_STEP_TOL {
                break;
            }
        }
    }
    let x_star = state_from(&u);

    let f = rhs(net, rates, &x_star)?;
    let scale = flux_scale(net, rates, &x_star);
    let rhs_relative = f.norm() / scale;
    let class_residual = stoich.conserved_residual(&(&x_star - x0));
    if rhs_relative > STEADY_RHS_TOL {
        return Err(CrnError::SolveDidNotConverge { iterations, residual: rhs_relative });
    }
    Ok(SteadyState { x: x_star, newton_iterations: iterations, rhs_relative, class_residual })
}

/// One-sided flux magnitude Sum_e kappa_e x^{y_src} |y_tgt - y_src|; the
/// natural scale against which a residual right-hand side is judged.
pub fn flux_scale(net: &ReactionNetwork, rates: &RateAssignment, x: &DVector<f64>) -> f64 {
    let xs = x.as_slice();
    let mut scale = 0.0;
    for (e, r) in net.reactions().iter().enumerate() {
        let flux = rates.kappa()[e] * monomial(xs, &net.complexes()[r.source].coords);
        scale += flux * net.reaction_vector(e).norm();
    }
    scale.max(f64::MIN_POSITIVE)
}

/// Positive state solving Y^T ln x = ln K + per-class constants. Prefers
/// the representative with all class constants equal to one when ln K lies
/// in the span of Y^T alone.
fn reference_steady_state(
    net: &ReactionNetwork,
    stoich: &StoichAnalysis,
    tree: &TreeConstants,
) -> DVector<f64> {
    let n = net.num_species();
    let ln_k = DVector::from_iterator(tree.values.len(), tree.values.iter().map(|k| k.ln()));
    let plain = membership_matrix(net, stoich, false);
    let (w, residual) = linalg::least_squares(&plain, &ln_k);
    let w = if residual <= TORIC_TOL {
        w
    } else {
        let joint = membership_matrix(net, stoich, true);
        let (theta, _) = linalg::least_squares(&joint, &ln_k);
        theta.rows(0, n).into_owned()
    };
    DVector::from_fn(n, |i, _| w[i].exp())
}

/// Eigenvalue partition of the Jacobian at a steady state.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    /// Eigenvalues as (re, im), sorted by real part then imaginary part.
    pub eigenvalues: Vec<(f64, f64)>,
    /// Indices with |Re| <= 1e-8.
    pub centre_count: usize,
    pub stable_count: usize,
    pub unstable_count: usize,
    /// n - dim S: centre multiplicity forced by conservation at
    /// complex-balanced steady states.
    pub expected_centre: usize,
    /// True when the partition matches the complex-balanced pattern:
    /// expected_centre centre eigenvalues and the rest strictly stable.
    pub cb_pattern: bool,
}

const CENTRE_TOL: f64 = 1e-8;

/// Computes the eigenvalue partition of the mass-action Jacobian at
/// `x_star`, which must be a steady state.
pub fn linear_stability(
    net: &ReactionNetwork,
    rates: &RateAssignment,
    stoich: &StoichAnalysis,
    x_star: &DVector<f64>,
) -> Result<SpectrumReport> {
    let f = rhs(net, rates, x_star)?;
    let scale = flux_scale(net, rates, x_star);
    let rel = f.norm() / scale;
    if rel > 1e-8 {
        return Err(CrnError::NotSteadyState { norm: rel, tol: 1e-8 });
    }
    let jac = crate::kinetics::jacobian(net, rates, x_star)?;
    let eig = jac.complex_eigenvalues();
    let mut eigenvalues: Vec<(f64, f64)> = eig.iter().map(|c| (c.re, c.im)).collect();
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    let centre_count = eigenvalues.iter().filter(|(re, _)| re.abs() <= CENTRE_TOL).count();
    let stable_count = eigenvalues.iter().filter(|(re, _)| *re < -CENTRE_TOL).count();
    let unstable_count = eigenvalues.iter().filter(|(re, _)| *re > CENTRE_TOL).count();
    let expected_centre = net.num_species() - stoich.dim_s;
    let cb_pattern = centre_count == expected_centre && unstable_count == 0;
    Ok(SpectrumReport {
        eigenvalues,
        centre_count,
        stable_count,
        unstable_count,
        expected_centre,
        cb_pattern,
    })
}

/// Full complex-balancing report for one rate assignment.
#[derive(Debug, Clone, Serialize)]
pub struct CbReport {
    pub weakly_reversible: bool,
    pub deficiency: usize,
    pub tree_constants: Vec<f64>,
    pub toric_residual: f64,
    pub is_complex_balanced: bool,
    /// Representative steady state (class constants fixed at one when
    /// consistent); other steady states differ by exp(S-perp) scalings.
    pub steady_state: Option<Vec<f64>>,
    pub per_vertex_residuals: Option<Vec<f64>>,
    pub spectrum: Option<SpectrumReport>,
}

/// Assembles the complex-balancing verdict: tree constants, toric
/// membership, a representative steady state when one exists, its
/// per-vertex residuals, and the stability spectrum there.
pub fn cb_report(
    net: &ReactionNetwork,
    rates: &RateAssignment,
    stoich: &StoichAnalysis,
) -> Result<CbReport> {
    let toric = toric_membership(net, rates, stoich)?;
    let mut report = CbReport {
        weakly_reversible: stoich.weakly_reversible,
        deficiency: stoich.deficiency,
        tree_constants: toric.tree.values.clone(),
        toric_residual: toric.residual,
        is_complex_balanced: toric.member,
        steady_state: None,
        per_vertex_residuals: None,
        spectrum: None,
    };
    if toric.member {
        let x_ref = reference_steady_state(net, stoich, &toric.tree);
        report.per_vertex_residuals = Some(cb_residual(net, rates, &x_ref)?);
        report.spectrum = Some(linear_stability(net, rates, stoich, &x_ref)?);
        report.steady_state = Some(x_ref.as_slice().to_vec());
    }
    Ok(report)
}
