//! Network representation and structural analysis.
//!
//! Vertices are complexes: nonnegative real vectors over a fixed species
//! universe. Reactions are directed edges between distinct vertices. The
//! structural report collects linkage classes, strong components, weak
//! reversibility, an orthonormal basis of the stoichiometric subspace S,
//! and the deficiency m - l - dim S.

mod parse;

pub use parse::{parse_network, parse_network_with, ValidationMode};

use crate::linalg;
use crate::{CrnError, Result};
use nalgebra::{DMatrix, DVector};

/// Tolerance for membership in a positive stoichiometric compatibility
/// class: the candidate's projection onto the conserved directions must
/// match the anchor's within this bound.
pub const COMPATIBILITY_TOL: f64 = 1e-10;

/// A complex: one vertex of the reaction graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Complex {
    pub coords: Vec<f64>,
}

impl Complex {
    pub fn new(coords: Vec<f64>) -> Self {
        Complex { coords }
    }

    fn bit_key(&self) -> Vec<u64> {
        self.coords.iter().map(|c| c.to_bits()).collect()
    }
}

/// A reaction: a directed edge between two vertex indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reaction {
    pub source: usize,
    pub target: usize,
}

/// A reaction network over a fixed ordered species universe.
#[derive(Debug, Clone)]
pub struct ReactionNetwork {
    species: Vec<String>,
    complexes: Vec<Complex>,
    reactions: Vec<Reaction>,
}

impl ReactionNetwork {
    /// Builds a network and checks the graph invariants: coordinate lengths,
    /// nonnegative finite entries, no duplicate vertices, no self-loops, no
    /// duplicate edges, no isolated vertices.
    pub fn new(
        species: Vec<String>,
        complexes: Vec<Complex>,
        reactions: Vec<Reaction>,
    ) -> Result<Self> {
        let n = species.len();
        if reactions.is_empty() {
            return Err(CrnError::InvalidNetwork { msg: "network has no reactions".into() });
        }
        let mut seen_keys = std::collections::HashSet::new();
        for (i, c) in complexes.iter().enumerate() {
            if c.coords.len() != n {
                return Err(CrnError::InvalidNetwork {
                    msg: format!("complex {i} has {} coordinates, expected {n}", c.coords.len()),
                });
            }
            if c.coords.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(CrnError::InvalidNetwork {
                    msg: format!("complex {i} has a negative or non-finite coordinate"),
                });
            }
            if !seen_keys.insert(c.bit_key()) {
                return Err(CrnError::InvalidNetwork {
                    msg: format!("duplicate vertex at index {i}"),
                });
            }
        }
        let m = complexes.len();
        let mut seen_edges = std::collections::HashSet::new();
        let mut touched = vec![false; m];
        for (e, r) in reactions.iter().enumerate() {
            if r.source >= m || r.target >= m {
                return Err(CrnError::InvalidNetwork {
                    msg: format!("reaction {e} references a vertex out of range"),
                });
            }
            if r.source == r.target {
                return Err(CrnError::InvalidNetwork {
                    msg: format!("reaction {e} is a self-loop"),
                });
            }
            if !seen_edges.insert((r.source, r.target)) {
                return Err(CrnError::InvalidNetwork {
                    msg: format!("duplicate edge at reaction {e}"),
                });
            }
            touched[r.source] = true;
            touched[r.target] = true;
        }
        if let Some(i) = touched.iter().position(|&t| !t) {
            return Err(CrnError::InvalidNetwork { msg: format!("vertex {i} is isolated") });
        }
        Ok(ReactionNetwork { species, complexes, reactions })
    }

    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    pub fn num_complexes(&self) -> usize {
        self.complexes.len()
    }

    pub fn num_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn complexes(&self) -> &[Complex] {
        &self.complexes
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    /// Reaction vector y_target - y_source of edge `e`.
    pub fn reaction_vector(&self, e: usize) -> DVector<f64> {
        let r = self.reactions[e];
        let src = &self.complexes[r.source].coords;
        let tgt = &self.complexes[r.target].coords;
        DVector::from_iterator(src.len(), src.iter().zip(tgt).map(|(s, t)| t - s))
    }

    /// Matrix whose columns are the reaction vectors, in edge order.
    pub fn reaction_matrix(&self) -> DMatrix<f64> {
        let n = self.num_species();
        let r = self.num_reactions();
        DMatrix::from_fn(n, r, |i, e| {
            let re = self.reactions[e];
            self.complexes[re.target].coords[i] - self.complexes[re.source].coords[i]
        })
    }

    /// True when every vertex coordinate is an exact integer.
    pub fn has_integer_coords(&self) -> bool {
        self.complexes
            .iter()
            .all(|c| c.coords.iter().all(|v| v.fract() == 0.0 && v.abs() < 2f64.powi(53)))
    }

    /// Canonical text of one complex: positive-coefficient terms joined by
    /// "+" in species order, unit coefficients omitted, "0" for the zero
    /// complex.
    pub fn complex_string(&self, v: usize) -> String {
        let coords = &self.complexes[v].coords;
        let mut parts = Vec::new();
        for (k, &c) in coords.iter().enumerate() {
            if c > 0.0 {
                if c == 1.0 {
                    parts.push(self.species[k].clone());
                } else {
                    parts.push(format!("{}{}", c, self.species[k]));
                }
            }
        }
        if parts.is_empty() {
            "0".to_string()
        } else {
            parts.join("+")
        }
    }

    /// Canonical text of one reaction, e.g. `3X -> X+Y+Z`. Rate files key
    /// their entries by exactly this string.
    pub fn reaction_string(&self, e: usize) -> String {
        let r = self.reactions[e];
        format!("{} -> {}", self.complex_string(r.source), self.complex_string(r.target))
    }

    /// Canonical printout: one reaction per line, in edge order. Parsing the
    /// result reproduces the network (species order, vertex coordinates,
    /// edge order).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in 0..self.num_reactions() {
            out.push_str(&self.reaction_string(e));
            out.push('\n');
        }
        out
    }
}

/// How the rank of the stoichiometric subspace is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankMode {
    /// Exact integer elimination when all coordinates are integers,
    /// singular values otherwise.
    #[default]
    Auto,
    /// Force exact integer elimination; requires integer coordinates.
    ExactInteger,
    /// Force the singular-value path with threshold 1e-9 * sigma_max.
    Svd,
}

/// Structural report for one network.
#[derive(Debug, Clone)]
pub struct StoichAnalysis {
    /// Linkage classes (connected components of the underlying undirected
    /// graph), each a vertex list; classes and members in discovery order.
    pub linkage_classes: Vec<Vec<usize>>,
    /// Class index of each vertex.
    pub class_of: Vec<usize>,
    /// Strongly connected components, members sorted ascending.
    pub strong_components: Vec<Vec<usize>>,
    /// True when every linkage class is strongly connected.
    pub weakly_reversible: bool,
    /// dim S, the rank of the reaction-vector span.
    pub dim_s: usize,
    /// Deficiency m - l - dim S.
    pub deficiency: usize,
    /// Orthonormal basis of S, one column per dimension (n x dim_s).
    pub basis: DMatrix<f64>,
    /// Orthonormal basis of the orthogonal complement of S (n x (n - dim_s)).
    pub perp: DMatrix<f64>,
}

impl StoichAnalysis {
    /// Norm of the projection of `v` onto the conserved directions.
    pub fn conserved_residual(&self, v: &DVector<f64>) -> f64 {
        if self.perp.ncols() == 0 {
            0.0
        } else {
            (self.perp.transpose() * v).norm()
        }
    }
}

/// Runs the structural analysis with the default rank mode.
pub fn analyze(net: &ReactionNetwork) -> Result<StoichAnalysis> {
    analyze_with(net, RankMode::Auto)
}

/// Runs the structural analysis with an explicit rank mode.
pub fn analyze_with(net: &ReactionNetwork, mode: RankMode) -> Result<StoichAnalysis> {
    let m = net.num_complexes();
    let (linkage_classes, class_of) = linkage_classes(net);
    let strong_components = strong_components(net);
    // Weak reversibility: every edge stays inside one strong component.
    let mut comp_of = vec![0usize; m];
    for (ci, comp) in strong_components.iter().enumerate() {
        for &v in comp {
            comp_of[v] = ci;
        }
    }
    let weakly_reversible =
        net.reactions().iter().all(|r| comp_of[r.source] == comp_of[r.target]);

    let reaction_matrix = net.reaction_matrix();
    let use_exact = match mode {
        RankMode::Auto => net.has_integer_coords(),
        RankMode::ExactInteger => {
            if !net.has_integer_coords() {
                return Err(CrnError::InvalidNetwork {
                    msg: "exact integer rank requested for non-integer coordinates".into(),
                });
            }
            true
        }
        RankMode::Svd => false,
    };
    let dim_s = if use_exact {
        linalg::integer_rank(&reaction_matrix)
    } else {
        linalg::svd_rank(&reaction_matrix)
    };
    let (basis, perp) = linalg::orthonormal_split(&reaction_matrix, dim_s);

    let l = linkage_classes.len();
    if m < l + dim_s {
        return Err(CrnError::Internal {
            msg: format!("negative deficiency: m={m}, l={l}, dim_s={dim_s}"),
        });
    }
    let deficiency = m - l - dim_s;

    Ok(StoichAnalysis {
        linkage_classes,
        class_of,
        strong_components,
        weakly_reversible,
        dim_s,
        deficiency,
        basis,
        perp,
    })
}

fn linkage_classes(net: &ReactionNetwork) -> (Vec<Vec<usize>>, Vec<usize>) {
    let m = net.num_complexes();
    let mut adj = vec![Vec::new(); m];
    for r in net.reactions() {
        adj[r.source].push(r.target);
        adj[r.target].push(r.source);
    }
    let mut class_of = vec![usize::MAX; m];
    let mut classes = Vec::new();
    for start in 0..m {
        if class_of[start] != usize::MAX {
            continue;
        }
        let id = classes.len();
        let mut members = Vec::new();
        let mut stack = vec![start];
        class_of[start] = id;
        while let Some(v) = stack.pop() {
            members.push(v);
            for &w in &adj[v] {
                if class_of[w] == usize::MAX {
                    class_of[w] = id;
                    stack.push(w);
                }
            }
        }
        members.sort_unstable();
        classes.push(members);
    }
    (classes, class_of)
}

/// Kosaraju's algorithm; iterative to keep deep paths off the call stack.
fn strong_components(net: &ReactionNetwork) -> Vec<Vec<usize>> {
    let m = net.num_complexes();
    let mut fwd = vec![Vec::new(); m];
    let mut rev = vec![Vec::new(); m];
    for r in net.reactions() {
        fwd[r.source].push(r.target);
        rev[r.target].push(r.source);
    }
    // First pass: vertices by finish time.
    let mut visited = vec![false; m];
    let mut order = Vec::with_capacity(m);
    for start in 0..m {
        if visited[start] {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        visited[start] = true;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < fwd[v].len() {
                let w = fwd[v][*next];
                *next += 1;
                if !visited[w] {
                    visited[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
                stack.pop();
            }
        }
    }
    // Second pass over the reversed graph in reverse finish order.
    let mut comp_of = vec![usize::MAX; m];
    let mut components = Vec::new();
    for &start in order.iter().rev() {
        if comp_of[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = Vec::new();
        let mut stack = vec![start];
        comp_of[start] = id;
        while let Some(v) = stack.pop() {
            members.push(v);
            for &w in &rev[v] {
                if comp_of[w] == usize::MAX {
                    comp_of[w] = id;
                    stack.push(w);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

/// Tests whether `x` lies in the positive compatibility class of `x0`,
/// i.e. x - x0 is in S and x is strictly positive.
pub fn compatibility_class_membership(
    stoich: &StoichAnalysis,
    x0: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<bool> {
    ensure_positive(x0)?;
    ensure_positive(x)?;
    let diff = x - x0;
    Ok(stoich.conserved_residual(&diff) <= COMPATIBILITY_TOL)
}

pub(crate) fn ensure_positive(x: &DVector<f64>) -> Result<()> {
    for (i, &v) in x.iter().enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            return Err(CrnError::NonPositiveState { index: i, value: v });
        }
    }
    Ok(())
}
