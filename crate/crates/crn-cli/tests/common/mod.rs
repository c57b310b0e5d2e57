//! Shared by the CLI behavior tests and the acceptance suite: binary
//! invocation, a JSON Schema subset validator for the shipped schemas, and
//! oracles that recompute library results by an independent route.
#![allow(dead_code)]

use crn_core::kinetics::{rhs, RateAssignment};
use crn_core::network::{Complex, Reaction, ReactionNetwork};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::Command;

pub fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub struct CmdOut {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the built `crn` binary with the given arguments.
pub fn crn(args: &[&str]) -> CmdOut {
    crn_env(args, &[])
}

pub fn crn_env(args: &[&str], envs: &[(&str, &str)]) -> CmdOut {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_crn"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    CmdOut {
        code: out.status.code().expect("binary exits normally"),
        stdout: String::from_utf8(out.stdout).expect("utf-8 stdout"),
        stderr: String::from_utf8(out.stderr).expect("utf-8 stderr"),
    }
}

pub fn load_schema(name: &str) -> Value {
    let path = repo_path("schemas").join(name);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    serde_json::from_str(&text).expect("schema parses")
}

/// Validates `doc` against the subset of JSON Schema the shipped schemas
/// use: type (single or list), enum, properties / required /
/// additionalProperties, items, minItems, maxItems.
pub fn validate_schema(schema: &Value, doc: &Value) -> Result<(), String> {
    validate_at(schema, doc, "$")
}

fn validate_at(schema: &Value, doc: &Value, path: &str) -> Result<(), String> {
    let obj = schema.as_object().ok_or_else(|| format!("{path}: schema is not an object"))?;

    if let Some(allowed) = obj.get("enum") {
        let options = allowed.as_array().expect("enum is an array");
        if !options.contains(doc) {
            return Err(format!("{path}: {doc} not in {options:?}"));
        }
    }
    if let Some(ty) = obj.get("type") {
        let names: Vec<&str> = match ty {
            Value::String(s) => vec![s.as_str()],
            Value::Array(items) => items.iter().map(|v| v.as_str().expect("type name")).collect(),
            _ => return Err(format!("{path}: malformed type")),
        };
        if !names.iter().any(|n| type_matches(n, doc)) {
            return Err(format!("{path}: expected {names:?}, got {doc}"));
        }
    }
    if let Value::Object(fields) = doc {
        if let Some(required) = obj.get("required").and_then(Value::as_array) {
            for name in required {
                let name = name.as_str().expect("required entry");
                if !fields.contains_key(name) {
                    return Err(format!("{path}: missing required field {name:?}"));
                }
            }
        }
        let props = obj.get("properties").and_then(Value::as_object);
        if let Some(props) = props {
            for (name, sub) in fields {
                match props.get(name) {
                    Some(subschema) => {
                        validate_at(subschema, sub, &format!("{path}.{name}"))?;
                    }
                    None => {
                        if obj.get("additionalProperties") == Some(&Value::Bool(false)) {
                            return Err(format!("{path}: unexpected field {name:?}"));
                        }
                    }
                }
            }
        }
    }
    if let Value::Array(items) = doc {
        if let Some(min) = obj.get("minItems").and_then(Value::as_u64) {
            if (items.len() as u64) < min {
                return Err(format!("{path}: fewer than {min} items"));
            }
        }
        if let Some(max) = obj.get("maxItems").and_then(Value::as_u64) {
            if (items.len() as u64) > max {
                return Err(format!("{path}: more than {max} items"));
            }
        }
        if let Some(item_schema) = obj.get("items") {
            for (i, item) in items.iter().enumerate() {
                validate_at(item_schema, item, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}

fn type_matches(name: &str, doc: &Value) -> bool {
    match name {
        "object" => doc.is_object(),
        "array" => doc.is_array(),
        "string" => doc.is_string(),
        "boolean" => doc.is_boolean(),
        "null" => doc.is_null(),
        "number" => doc.is_number(),
        "integer" => {
            doc.is_i64() || doc.is_u64() || doc.as_f64().map(|f| f.fract() == 0.0).unwrap_or(false)
        }
        _ => false,
    }
}

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

/// Ordered vertex pairs (i, j), i != j, in a fixed order so a bit mask
/// addresses edge sets.
pub fn pair_table(k: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..k {
        for j in 0..k {
            if i != j {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Weak reversibility of the masked digraph (every edge inside a strongly
/// connected component) plus the requirement that every vertex carries an
/// edge; vertex subsets are covered by the smaller sweeps.
pub fn mask_is_weakly_reversible(k: usize, pairs: &[(usize, usize)], mask: u32) -> bool {
    let mut reach = [0u8; 5];
    let mut touched: u8 = 0;
    for (b, &(s, t)) in pairs.iter().enumerate() {
        if mask & (1 << b) != 0 {
            reach[s] |= 1 << t;
            touched |= (1 << s) | (1 << t);
        }
    }
    if touched != (1u8 << k) - 1 {
        return false;
    }
    for via in 0..k {
        for from in 0..k {
            if reach[from] & (1 << via) != 0 {
                reach[from] |= reach[via];
            }
        }
    }
    pairs
        .iter()
        .enumerate()
        .all(|(b, &(s, t))| mask & (1 << b) == 0 || reach[t] & (1 << s) != 0)
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
    let mut reactions: Vec<Reaction> =
        (0..m).map(|v| Reaction { source: v, target: (v + 1) % m }).collect();
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
