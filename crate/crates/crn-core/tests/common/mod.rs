//! Oracles and generators shared by the integration tests. Everything here
//! recomputes its target quantity by a route independent of the library:
//! finite differences instead of the analytic Jacobian, direct tree
//! enumeration instead of Laplacian minors.

// Each test binary uses its own slice of these helpers.
#![allow(dead_code)]

use crn_core::kinetics::{rhs, RateAssignment};
use crn_core::network::{Complex, Reaction, ReactionNetwork};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Central finite-difference Jacobian of the mass-action right-hand side
/// at a positive state.
pub fn fd_jacobian(
    net: &ReactionNetwork,
    rates: &RateAssignment,
    x: &DVector<f64>,
) -> DMatrix<f64> {
    let n = x.len();
    let mut j = DMatrix::zeros(n, n);
    for k in 0..n {
        let h = 1e-5 * x[k].max(1e-2);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        let fp = rhs(net, rates, &xp).unwrap();
        let fm = rhs(net, rates, &xm).unwrap();
        for i in 0..n {
            j[(i, k)] = (fp[i] - fm[i]) / (xp[k] - xm[k]);
        }
    }
    j
}

/// Sum over spanning in-trees rooted at `root`, within the root's weakly
/// connected component, of the product of integer edge weights. Exhausts
/// every assignment of one out-edge per non-root component vertex and
/// keeps those whose chains all reach the root.
pub fn in_tree_sum(num_vertices: usize, edges: &[(usize, usize, i64)], root: usize) -> i128 {
    assert!(num_vertices <= 8, "enumeration oracle is for small digraphs");
    let mut in_comp: u8 = 1 << root;
    loop {
        let before = in_comp;
        for &(s, t, _) in edges {
            if in_comp & ((1 << s) | (1 << t)) != 0 {
                in_comp |= (1 << s) | (1 << t);
            }
        }
        if in_comp == before {
            break;
        }
    }
    let members: Vec<usize> =
        (0..num_vertices).filter(|&v| v != root && in_comp & (1 << v) != 0).collect();
    let mut pos_of = [usize::MAX; 8];
    for (p, &v) in members.iter().enumerate() {
        pos_of[v] = p;
    }
    let choices: Vec<Vec<(usize, i64)>> = members
        .iter()
        .map(|&v| edges.iter().filter(|e| e.0 == v).map(|e| (e.1, e.2)).collect())
        .collect();
    if choices.iter().any(|c| c.is_empty()) {
        return 0;
    }
    let mut idx = vec![0usize; members.len()];
    let mut total = 0i128;
    'combos: loop {
        // The assignment is a spanning in-tree iff every chain of chosen
        // out-edges reaches the root (no cycle among the members).
        let mut reaches: u8 = 1 << root;
        let mut valid = true;
        'check: for &m in &members {
            let mut path = [0usize; 8];
            let mut path_len = 0;
            let mut cur = m;
            while reaches & (1 << cur) == 0 {
                if path[..path_len].contains(&cur) {
                    valid = false;
                    break 'check;
                }
                path[path_len] = cur;
                path_len += 1;
                cur = choices[pos_of[cur]][idx[pos_of[cur]]].0;
            }
            for &p in &path[..path_len] {
                reaches |= 1 << p;
            }
        }
        if valid {
            let mut prod = 1i128;
            for (p, &i) in idx.iter().enumerate() {
                prod *= choices[p][i].1 as i128;
            }
            total += prod;
        }
        let mut p = 0;
        loop {
            if p == idx.len() {
                break 'combos;
            }
            idx[p] += 1;
            if idx[p] < choices[p].len() {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
    }
    total
}

/// Random weakly reversible network: distinct small-integer complexes
/// joined in a cycle, plus chords. Chords never break weak reversibility
/// because adding edges to a strongly connected digraph keeps it strongly
/// connected.
pub fn random_wr_network<R: Rng>(rng: &mut R) -> (ReactionNetwork, RateAssignment) {
    let n = rng.gen_range(1..=3usize);
    // Coordinates live in {0, 1, 2}, so n species admit at most 3^n
    // distinct complexes.
    let max_m = 3usize.pow(n as u32).min(6);
    let m = rng.gen_range(3..=max_m);
    let mut complexes: Vec<Complex> = Vec::new();
    let mut keys = std::collections::HashSet::new();
    while complexes.len() < m {
        let coords: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=2) as f64).collect();
        let key: Vec<u64> = coords.iter().map(|c| c.to_bits()).collect();
        if keys.insert(key) {
            complexes.push(Complex { coords });
        }
    }
    // A species no complex mentions cannot survive a print/parse round
    // trip (the text format has no standalone declarations), so compact
    // those columns away. Distinctness is preserved: dropped columns are
    // zero in every complex.
    let used: Vec<usize> =
        (0..n).filter(|&i| complexes.iter().any(|c| c.coords[i] != 0.0)).collect();
    if used.len() < n {
        for c in &mut complexes {
            c.coords = used.iter().map(|&i| c.coords[i]).collect();
        }
    }
    let n = used.len();
    let mut reactions: Vec<Reaction> = (0..m)
        .map(|v| Reaction { source: v, target: (v + 1) % m })
        .collect();
    let chords = rng.gen_range(0..=m);
    for _ in 0..chords {
        let s = rng.gen_range(0..m);
        let t = rng.gen_range(0..m);
        if s == t || reactions.iter().any(|r| r.source == s && r.target == t) {
            continue;
        }
        reactions.push(Reaction { source: s, target: t });
    }
    let species = (0..n).map(|i| format!("S{i}")).collect();
    let net = ReactionNetwork::new(species, complexes, reactions).unwrap();
    let kappa: Vec<f64> = (0..net.num_reactions())
        .map(|_| 2f64.powf(rng.gen_range(-1.0..1.0)))
        .collect();
    let rates = RateAssignment::new(&net, kappa).unwrap();
    (net, rates)
}

/// Random positive state with components log-uniform in about [0.3, 3].
pub fn random_state<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| 3f64.powf(rng.gen_range(-1.0..1.0)))
}
