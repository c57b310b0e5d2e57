//! Property tests over randomly generated weakly reversible systems.

mod common;

use crn_core::balance::tree_constants;
use crn_core::equivalence::dynamically_equivalent;
use crn_core::kinetics::{rhs, LyapunovContext, RateAssignment};
use crn_core::network::{analyze, parse_network, Complex, Reaction, ReactionNetwork};
use crn_core::robustness::{perturb_sample, PerturbationPlan};
use crn_core::dynamics::IntegratorConfig;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, ..ProptestConfig::default() }
}

/// Plain Gaussian elimination rank with partial pivoting, as a third
/// route beside the library's exact and SVD ranks.
fn ge_rank(rows: Vec<Vec<f64>>) -> usize {
    let mut a = rows;
    let nrows = a.len();
    if nrows == 0 {
        return 0;
    }
    let ncols = a[0].len();
    let mut rank = 0;
    let mut row = 0;
    for col in 0..ncols {
        let Some(p) = (row..nrows)
            .filter(|&r| a[r][col].abs() > 1e-9)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
        else {
            continue;
        };
        a.swap(row, p);
        for r in 0..nrows {
            if r != row && a[r][col].abs() > 0.0 {
                let f = a[r][col] / a[row][col];
                for c in 0..ncols {
                    a[r][c] -= f * a[row][c];
                }
            }
        }
        rank += 1;
        row += 1;
        if row == nrows {
            break;
        }
    }
    rank
}

proptest! {
    #![proptest_config(cases(96))]

    /// The vector field always points inside the stoichiometric subspace,
    /// so conserved directions see exactly zero flux.
    #[test]
    fn rhs_lies_in_the_stoichiometric_subspace(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (net, rates) = common::random_wr_network(&mut rng);
        let stoich = analyze(&net).unwrap();
        for _ in 0..5 {
            let x = common::random_state(&mut rng, net.num_species());
            let f = rhs(&net, &rates, &x).unwrap();
            let leak = stoich.conserved_residual(&f);
            prop_assert!(leak <= 1e-12 * f.norm().max(1.0), "leak {leak}");
        }
    }

    /// Printing a network and parsing it back preserves the system: same
    /// species set, same complexes per reaction matched by species name.
    /// The parser assigns species indices by first appearance, so storage
    /// order may legitimately differ from a programmatically built net.
    #[test]
    fn parse_print_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (net, _) = common::random_wr_network(&mut rng);
        let reparsed = parse_network(&net.to_text()).unwrap();
        let mut sa = net.species().to_vec();
        let mut sb = reparsed.species().to_vec();
        sa.sort();
        sb.sort();
        prop_assert_eq!(sa, sb);
        prop_assert_eq!(net.num_complexes(), reparsed.num_complexes());
        prop_assert_eq!(net.num_reactions(), reparsed.num_reactions());
        let perm: Vec<usize> = net
            .species()
            .iter()
            .map(|s| reparsed.species().iter().position(|t| t == s).unwrap())
            .collect();
        for e in 0..net.num_reactions() {
            let (a, b) = (net.reactions()[e], reparsed.reactions()[e]);
            for (orig, re) in [(a.source, b.source), (a.target, b.target)] {
                for i in 0..net.num_species() {
                    prop_assert_eq!(
                        net.complexes()[orig].coords[i],
                        reparsed.complexes()[re].coords[perm[i]]
                    );
                }
            }
        }
        // Once in first-appearance order the round trip is a fixed point.
        prop_assert_eq!(reparsed.to_text(), parse_network(&reparsed.to_text()).unwrap().to_text());
    }

    /// Deficiency from the analysis equals m - l - rank with the rank
    /// recomputed by plain elimination, and is never negative.
    #[test]
    fn deficiency_formula_holds(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (net, _) = common::random_wr_network(&mut rng);
        let stoich = analyze(&net).unwrap();
        let rm = net.reaction_matrix();
        let rows: Vec<Vec<f64>> =
            (0..rm.nrows()).map(|i| (0..rm.ncols()).map(|j| rm[(i, j)]).collect()).collect();
        let rank = ge_rank(rows);
        prop_assert_eq!(stoich.dim_s, rank);
        prop_assert_eq!(
            stoich.deficiency,
            net.num_complexes() - stoich.linkage_classes.len() - rank
        );
    }

    /// Within every linkage class the column Laplacian annihilates the
    /// tree-constant vector.
    #[test]
    fn laplacian_annihilates_tree_constants(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (net, rates) = common::random_wr_network(&mut rng);
        let stoich = analyze(&net).unwrap();
        let k = tree_constants(&net, &rates, &stoich).unwrap();
        for class in &stoich.linkage_classes {
            for &v in class {
                // Row v of L K: inflow sum minus outflow sum at vertex v.
                let mut acc = 0.0;
                let mut scale = 0.0;
                for (e, r) in net.reactions().iter().enumerate() {
                    if r.target == v {
                        acc += rates.kappa()[e] * k.values[r.source];
                        scale += rates.kappa()[e] * k.values[r.source];
                    }
                    if r.source == v {
                        acc -= rates.kappa()[e] * k.values[v];
                        scale += rates.kappa()[e] * k.values[v];
                    }
                }
                prop_assert!(acc.abs() <= 1e-10 * scale.max(1e-300), "residual {acc}");
            }
        }
    }

    /// V is strictly convex: the chord lies above the graph by at least
    /// the quadratic slack from the 1/max curvature bound.
    #[test]
    fn lyapunov_is_strictly_convex(seed in any::<u64>(), lambda in 0.05f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=4usize);
        let v = LyapunovContext::new(common::random_state(&mut rng, n)).unwrap();
        let x = common::random_state(&mut rng, n);
        let y = common::random_state(&mut rng, n);
        let mid = &x * lambda + &y * (1.0 - lambda);
        let chord = lambda * v.value(&x).unwrap() + (1.0 - lambda) * v.value(&y).unwrap();
        let margin: f64 = (0..n)
            .map(|i| {
                lambda * (1.0 - lambda) * (x[i] - y[i]).powi(2) / (2.0 * x[i].max(y[i]))
            })
            .sum();
        let graph = v.value(&mid).unwrap();
        let slack = 1e-12 * (1.0 + chord.abs() + graph.abs());
        prop_assert!(
            graph <= chord - margin + slack,
            "graph {graph}, chord {chord}, margin {margin}"
        );
    }

    /// V is nonnegative and vanishes exactly at the reference point.
    #[test]
    fn lyapunov_nonnegative_with_zero_at_reference(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=4usize);
        let x_star = common::random_state(&mut rng, n);
        let v = LyapunovContext::new(x_star.clone()).unwrap();
        prop_assert!(v.value(&x_star).unwrap().abs() <= 1e-14 * x_star.norm());
        for _ in 0..5 {
            let x = common::random_state(&mut rng, n);
            prop_assert!(v.value(&x).unwrap() >= -1e-14 * x.norm());
        }
    }

    /// Dynamical equivalence is reflexive, symmetric, and blind to the
    /// storage order of species.
    #[test]
    fn equivalence_relation_properties(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (net, rates) = common::random_wr_network(&mut rng);
        let self_rep = dynamically_equivalent(&net, &rates, &net, &rates).unwrap();
        prop_assert!(self_rep.equivalent && self_rep.exact);

        // The same system with species stored in reverse order.
        let order: Vec<usize> = (0..net.num_species()).rev().collect();
        let species: Vec<String> =
            order.iter().map(|&i| net.species()[i].clone()).collect();
        let complexes: Vec<Complex> = net
            .complexes()
            .iter()
            .map(|c| Complex { coords: order.iter().map(|&i| c.coords[i]).collect() })
            .collect();
        let reactions: Vec<Reaction> = net.reactions().to_vec();
        let permuted = ReactionNetwork::new(species, complexes, reactions).unwrap();
        let p_rates = RateAssignment::new(&permuted, rates.kappa().to_vec()).unwrap();
        let fwd = dynamically_equivalent(&net, &rates, &permuted, &p_rates).unwrap();
        let rev = dynamically_equivalent(&permuted, &p_rates, &net, &rates).unwrap();
        prop_assert!(fwd.equivalent && fwd.exact);
        prop_assert!(rev.equivalent && rev.exact);

        // Nudging one rate breaks equivalence both ways.
        let mut bumped = rates.kappa().to_vec();
        bumped[0] *= 1.0 + 1e-6;
        let b_rates = RateAssignment::new(&net, bumped).unwrap();
        let fwd = dynamically_equivalent(&net, &rates, &net, &b_rates).unwrap();
        let rev = dynamically_equivalent(&net, &b_rates, &net, &rates).unwrap();
        prop_assert_eq!(fwd.equivalent, rev.equivalent);
        prop_assert!(!fwd.equivalent);
    }
}

proptest! {
    #![proptest_config(cases(48))]

    /// Perturbation samples stay inside the requested ball, stay positive,
    /// and depend only on (seed, trial).
    #[test]
    fn perturbation_samples_stay_in_ball(
        seed in any::<u64>(),
        eps_frac in 0.0f64..0.95,
        trial in 0usize..64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (net, rates) = common::random_wr_network(&mut rng);
        let stoich = analyze(&net).unwrap();
        let eps = eps_frac * rates.min();
        let plan = PerturbationPlan {
            kappa_star: rates.clone(),
            eps,
            trials: trial + 1,
            seed,
            initial_conditions: vec![DVector::from_element(net.num_species(), 1.0)],
            cfg: IntegratorConfig::new(1.0),
        };
        plan.validate(&net, &stoich).unwrap();
        let a = perturb_sample(&plan, trial);
        let b = perturb_sample(&plan, trial);
        prop_assert_eq!(a.kappa(), b.kappa());
        let dist: f64 = a
            .kappa()
            .iter()
            .zip(rates.kappa())
            .map(|(s, k)| (s - k) * (s - k))
            .sum::<f64>()
            .sqrt();
        prop_assert!(dist <= eps, "sample left the ball: {} > {}", dist, eps);
        prop_assert!(a.kappa().iter().all(|&k| k > 0.0));
    }
}
