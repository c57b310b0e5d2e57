//! The six subcommands. Each takes its parsed flags, runs the library,
//! writes one document, and returns the process exit code.

use crate::util::{
    load_network, load_rates, parse_grid, parse_state, write_json, write_text, Failure,
    EXIT_INCONCLUSIVE, EXIT_NEGATIVE, EXIT_NUMERICAL, EXIT_USAGE,
};
use clap::Args;
use crn_core::balance::{cb_report, CbReport, TORIC_TOL};
use crn_core::dynamics::{integrate, IntegratorConfig, Termination, Trajectory};
use crn_core::equivalence::{
    cb_region_probe, dynamically_equivalent, split_feeds_balanced, CbRegion, Reparameterization,
    COEFF_GAP_TOL,
};
use crn_core::network::ReactionNetwork;
use crn_core::robustness::{
    bifurcation_scan_1d, default_initial_conditions, global_stability_probe, permanence_probe,
    PermanenceEnvelope, PerturbationPlan, ScanPoint, StabilityVerdict, TrialStatus,
    LIMIT_MATCH_TOL,
};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Reaction network file
    #[arg(long)]
    net: PathBuf,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct AnalyzeDoc {
    command: &'static str,
    species: Vec<String>,
    reactions: Vec<String>,
    num_species: usize,
    num_complexes: usize,
    num_reactions: usize,
    num_linkage_classes: usize,
    dim_stoichiometric_subspace: usize,
    deficiency: usize,
    conserved_dimension: usize,
    weakly_reversible: bool,
    linkage_classes: Vec<Vec<String>>,
}

pub fn run_analyze(args: &AnalyzeArgs) -> Result<i32, Failure> {
    let (net, stoich) = load_network(&args.net)?;
    let doc = AnalyzeDoc {
        command: "analyze",
        species: net.species().to_vec(),
        reactions: (0..net.num_reactions()).map(|e| net.reaction_string(e)).collect(),
        num_species: net.num_species(),
        num_complexes: net.num_complexes(),
        num_reactions: net.num_reactions(),
        num_linkage_classes: stoich.linkage_classes.len(),
        dim_stoichiometric_subspace: stoich.dim_s,
        deficiency: stoich.deficiency,
        conserved_dimension: net.num_species() - stoich.dim_s,
        weakly_reversible: stoich.weakly_reversible,
        linkage_classes: stoich
            .linkage_classes
            .iter()
            .map(|c| c.iter().map(|&v| net.complex_string(v)).collect())
            .collect(),
    };
    write_json(&doc, args.out.as_ref())?;
    Ok(0)
}

#[derive(Args, Debug)]
pub struct CheckCbArgs {
    #[arg(long)]
    net: PathBuf,
    /// Rates: JSON file path or inline JSON ({"0 -> X": 1.0, ...} or [1.0, ...])
    #[arg(long)]
    rates: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct CheckCbDoc {
    command: &'static str,
    toric_tolerance: f64,
    report: CbReport,
}

pub fn run_check_cb(args: &CheckCbArgs) -> Result<i32, Failure> {
    let (net, stoich) = load_network(&args.net)?;
    let rates = load_rates(&net, &args.rates)?;
    if !stoich.weakly_reversible {
        return Err(Failure::usage(
            "network is not weakly reversible: complex balancing requires every \
             reaction to lie in a directed cycle",
        ));
    }
    let report = cb_report(&net, &rates, &stoich)?;
    let balanced = report.is_complex_balanced;
    let doc = CheckCbDoc { command: "check-cb", toric_tolerance: TORIC_TOL, report };
    write_json(&doc, args.out.as_ref())?;
    Ok(if balanced { 0 } else { EXIT_NEGATIVE })
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    rates: String,
    /// Initial state, comma-separated in species order
    #[arg(long)]
    x0: String,
    #[arg(long, value_name = "T")]
    t_end: f64,
    #[arg(long, default_value_t = 1e-8)]
    rel_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    abs_tol: f64,
    /// Upper bound on the step size
    #[arg(long)]
    max_step: Option<f64>,
    /// End the run as soon as the trailing-window convergence test fires
    #[arg(long)]
    stop_at_convergence: bool,
    /// json: one document with trajectory and metadata; csv: trajectory
    /// rows, metadata as a separate JSON document
    #[arg(long, default_value = "json", value_parser = ["json", "csv"])]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct TerminationDoc {
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
}

impl TerminationDoc {
    fn from(term: &Termination) -> Self {
        match term {
            Termination::CompletedSpan => TerminationDoc { kind: "completed_span", t: None },
            Termination::Converged { t } => TerminationDoc { kind: "converged", t: Some(*t) },
            Termination::StepSizeUnderflow { t } => {
                TerminationDoc { kind: "step_size_underflow", t: Some(*t) }
            }
            Termination::PositivityFailure { t } => {
                TerminationDoc { kind: "positivity_failure", t: Some(*t) }
            }
            Termination::StepBudgetExhausted { t } => {
                TerminationDoc { kind: "step_budget_exhausted", t: Some(*t) }
            }
        }
    }
}

#[derive(Serialize)]
struct SimulateParams {
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_step: Option<f64>,
    stop_at_convergence: bool,
}

#[derive(Serialize)]
struct SimulateDoc {
    command: &'static str,
    species: Vec<String>,
    parameters: SimulateParams,
    termination: TerminationDoc,
    accepted_steps: usize,
    rejected_steps: usize,
    conservation_drift: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    converged_to: Option<Vec<f64>>,
    final_time: f64,
    final_state: Vec<f64>,
    num_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    times: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    states: Option<Vec<Vec<f64>>>,
}

fn simulate_doc(
    net: &ReactionNetwork,
    args: &SimulateArgs,
    traj: &Trajectory,
    with_samples: bool,
) -> SimulateDoc {
    SimulateDoc {
        command: "simulate",
        species: net.species().to_vec(),
        parameters: SimulateParams {
            t_end: args.t_end,
            rel_tol: args.rel_tol,
            abs_tol: args.abs_tol,
            max_step: args.max_step,
            stop_at_convergence: args.stop_at_convergence,
        },
        termination: TerminationDoc::from(&traj.termination),
        accepted_steps: traj.accepted_steps,
        rejected_steps: traj.rejected_steps,
        conservation_drift: traj.conservation_drift,
        converged_to: traj.converged_to.as_ref().map(|x| x.as_slice().to_vec()),
        final_time: traj.last_time(),
        final_state: traj.last_state().as_slice().to_vec(),
        num_samples: traj.times.len(),
        times: if with_samples { Some(traj.times.clone()) } else { None },
        states: if with_samples {
            Some(traj.states.iter().map(|x| x.as_slice().to_vec()).collect())
        } else {
            None
        },
    }
}

pub fn run_simulate(args: &SimulateArgs) -> Result<i32, Failure> {
    let (net, stoich) = load_network(&args.net)?;
    let rates = load_rates(&net, &args.rates)?;
    let x0 = parse_state(&args.x0, net.num_species())?;
    let mut cfg = IntegratorConfig::new(args.t_end);
    cfg.rel_tol = args.rel_tol;
    cfg.abs_tol = args.abs_tol;
    cfg.max_step = args.max_step;
    cfg.stop_at_convergence = args.stop_at_convergence;
    let traj = integrate(&net, &rates, &stoich, &x0, &cfg)?;

    // A failed run still writes whatever trajectory prefix exists.
    if args.format == "csv" {
        let mut csv = Vec::new();
        traj.write_csv(&net, &mut csv)
            .map_err(|e| Failure { code: EXIT_NUMERICAL, message: e.to_string() })?;
        let csv = String::from_utf8(csv).expect("csv output is ascii");
        let meta = simulate_doc(&net, args, &traj, false);
        match &args.out {
            Some(path) => {
                write_text(&csv, Some(path))?;
                write_json(&meta, Some(&path.with_extension("meta.json")))?;
            }
            None => {
                write_text(&csv, None)?;
                let text = serde_json::to_string_pretty(&meta).expect("serializable doc");
                eprintln!("{text}");
            }
        }
    } else {
        let doc = simulate_doc(&net, args, &traj, true);
        write_json(&doc, args.out.as_ref())?;
    }
    Ok(if traj.termination.is_failure() { EXIT_NUMERICAL } else { 0 })
}

#[derive(Args, Debug)]
pub struct PerturbArgs {
    #[arg(long)]
    net: PathBuf,
    /// Nominal rates; must be complex-balanced
    #[arg(long)]
    rates: String,
    /// Euclidean ball radius around the nominal rates
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Anchor state; defaults to the representative steady state
    #[arg(long)]
    x0: Option<String>,
    /// Number of initial conditions spread over the anchor's class
    #[arg(long, default_value_t = 5)]
    num_ics: usize,
    #[arg(long, default_value_t = 50.0, value_name = "T")]
    t_end: f64,
    #[arg(long, default_value_t = 1e-8)]
    rel_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    abs_tol: f64,
    /// Trailing fraction of the span that feeds the permanence envelope
    #[arg(long, default_value_t = 0.5)]
    window_fraction: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct PerturbParams {
    eps: f64,
    trials: usize,
    seed: u64,
    num_initial_conditions: usize,
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
    window_fraction: f64,
    limit_tolerance: f64,
}

#[derive(Serialize)]
struct PerturbDoc {
    command: &'static str,
    species: Vec<String>,
    reactions: Vec<String>,
    nominal_rates: Vec<f64>,
    parameters: PerturbParams,
    initial_conditions: Vec<Vec<f64>>,
    stability: StabilityVerdict,
    permanence: PermanenceEnvelope,
    verdict: &'static str,
}

pub fn run_perturb(args: &PerturbArgs) -> Result<i32, Failure> {
    let (net, stoich) = load_network(&args.net)?;
    let rates = load_rates(&net, &args.rates)?;

    // The probe itself rejects unbalanced rates; checking up front turns
    // that into the precondition exit code and supplies the default anchor.
    let report = cb_report(&net, &rates, &stoich).map_err(precondition)?;
    if !report.is_complex_balanced {
        return Err(Failure::usage(format!(
            "nominal rates are not complex-balanced (toric residual {:.3e} exceeds {:.0e})",
            report.toric_residual, TORIC_TOL
        )));
    }
    let anchor = match &args.x0 {
        Some(spec) => parse_state(spec, net.num_species())?,
        None => nalgebra::DVector::from_vec(
            report.steady_state.clone().expect("balanced report carries a steady state"),
        ),
    };
    let initial_conditions = default_initial_conditions(&stoich, &anchor, args.num_ics)?;

    let mut cfg = IntegratorConfig::new(args.t_end);
    cfg.rel_tol = args.rel_tol;
    cfg.abs_tol = args.abs_tol;
    let plan = PerturbationPlan {
        kappa_star: rates,
        eps: args.eps,
        trials: args.trials,
        seed: args.seed,
        initial_conditions,
        cfg,
    };
    let stability = global_stability_probe(&net, &stoich, &plan)?;
    let permanence = permanence_probe(&net, &stoich, &plan, Some(args.window_fraction))?;

    let mut failed = Vec::new();
    let mut inconclusive = Vec::new();
    for (i, trial) in stability.trials.iter().enumerate() {
        match &trial.status {
            TrialStatus::Conclusive => {}
            TrialStatus::NoConvergence { .. } => inconclusive.push(i),
            TrialStatus::IntegrationFailed { .. } => failed.push(i),
        }
    }
    let (verdict, code) = if !failed.is_empty() {
        ("integration_failed", EXIT_NUMERICAL)
    } else if !inconclusive.is_empty() {
        ("inconclusive", EXIT_INCONCLUSIVE)
    } else if !stability.all_unique {
        ("multiple_attractors", EXIT_NEGATIVE)
    } else if !(permanence.margin_to_boundary > 0.0) {
        ("no_permanence_margin", EXIT_NEGATIVE)
    } else {
        ("unique_and_permanent", 0)
    };

    let doc = PerturbDoc {
        command: "perturb",
        species: net.species().to_vec(),
        reactions: (0..net.num_reactions()).map(|e| net.reaction_string(e)).collect(),
        nominal_rates: plan.kappa_star.kappa().to_vec(),
        parameters: PerturbParams {
            eps: args.eps,
            trials: args.trials,
            seed: args.seed,
            num_initial_conditions: plan.initial_conditions.len(),
            t_end: args.t_end,
            rel_tol: args.rel_tol,
            abs_tol: args.abs_tol,
            window_fraction: args.window_fraction,
            limit_tolerance: LIMIT_MATCH_TOL,
        },
        initial_conditions: plan
            .initial_conditions
            .iter()
            .map(|x| x.as_slice().to_vec())
            .collect(),
        stability,
        permanence,
        verdict,
    };
    write_json(&doc, args.out.as_ref())?;
    if !inconclusive.is_empty() {
        eprintln!("inconclusive trials (no convergence before t_end): {inconclusive:?}");
    }
    if !failed.is_empty() {
        eprintln!("failed trials: {failed:?}");
    }
    Ok(code)
}

/// Perturb treats every setup error, balance included, as a precondition.
fn precondition(e: crn_core::CrnError) -> Failure {
    let mut f = Failure::from(e);
    if f.code == EXIT_NEGATIVE {
        f.code = EXIT_USAGE;
    }
    f
}

#[derive(Args, Debug)]
pub struct BifurcateArgs {
    /// Network with the shape 0 <-> X, 2X <-> 3X
    #[arg(long)]
    net: PathBuf,
    /// Birth-rate values: value, comma list, or lo:hi:count
    #[arg(long)]
    k1: String,
    /// Autocatalytic-rate values: value, comma list, or lo:hi:count
    #[arg(long)]
    k2: String,
    /// csv: one row per steady state; json: one point per (k1, k2) pair
    #[arg(long, default_value = "csv", value_parser = ["json", "csv"])]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct BifurcateDoc {
    command: &'static str,
    points: Vec<ScanPoint>,
}

pub fn run_bifurcate(args: &BifurcateArgs) -> Result<i32, Failure> {
    let (net, _) = load_network(&args.net)?;
    let k1s = parse_grid(&args.k1)?;
    let k2s = parse_grid(&args.k2)?;
    let grid: Vec<(f64, f64)> =
        k1s.iter().flat_map(|&a| k2s.iter().map(move |&b| (a, b))).collect();
    let points = bifurcation_scan_1d(&net, &grid)?;
    if args.format == "csv" {
        let mut csv = String::from("kappa1,kappa2,root,eigenvalue,stability\n");
        for p in &points {
            for r in &p.roots {
                let stability = match r.stability {
                    crn_core::robustness::Stability::Stable => "stable",
                    crn_core::robustness::Stability::Unstable => "unstable",
                    crn_core::robustness::Stability::Marginal => "marginal",
                };
                csv.push_str(&format!(
                    "{},{},{},{},{stability}\n",
                    p.kappa1, p.kappa2, r.x, r.eigenvalue
                ));
            }
        }
        write_text(&csv, args.out.as_ref())?;
    } else {
        write_json(&BifurcateDoc { command: "bifurcate", points }, args.out.as_ref())?;
    }
    Ok(0)
}

#[derive(Args, Debug)]
pub struct EquivArgs {
    /// First network (pairwise mode)
    #[arg(long, requires = "rates", conflicts_with_all = ["region", "sweep"])]
    net: Option<PathBuf>,
    #[arg(long)]
    rates: Option<String>,
    /// Second network (pairwise mode)
    #[arg(long, requires = "net")]
    net_b: Option<PathBuf>,
    #[arg(long, requires = "net_b")]
    rates_b: Option<String>,
    /// Classify one square-flow parameter point "a1,a5,k2,k3,k4"
    #[arg(long, conflicts_with = "sweep")]
    region: Option<String>,
    /// Sweep the (k3, k4) grid at fixed --a1 --a5 --k2, emitting CSV
    #[arg(long)]
    sweep: bool,
    #[arg(long, requires = "sweep")]
    a1: Option<f64>,
    #[arg(long, requires = "sweep")]
    a5: Option<f64>,
    #[arg(long, requires = "sweep")]
    k2: Option<f64>,
    /// Grid over the third rate: value, comma list, or lo:hi:count
    #[arg(long, requires = "sweep")]
    k3: Option<String>,
    /// Grid over the fourth rate: value, comma list, or lo:hi:count
    #[arg(long, requires = "sweep")]
    k4: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct EquivPairwiseDoc {
    command: &'static str,
    mode: &'static str,
    tolerance: f64,
    equivalent: bool,
    exact: bool,
    max_coeff_gap: f64,
}

#[derive(Serialize)]
struct ReparDoc {
    kappa1: f64,
    kappa5: f64,
    kappa6: f64,
}

#[derive(Serialize)]
struct EquivRegionDoc {
    command: &'static str,
    mode: &'static str,
    a1: f64,
    a5: f64,
    kappa2: f64,
    kappa3: f64,
    kappa4: f64,
    ratio: f64,
    verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    reparameterization: Option<ReparDoc>,
}

fn region_verdict(region: &CbRegion) -> &'static str {
    match region {
        CbRegion::OnToricLocus => "on_toric_locus",
        CbRegion::InsideStrip => "inside_strip",
        CbRegion::Outside => "outside",
    }
}

pub fn run_equiv(args: &EquivArgs) -> Result<i32, Failure> {
    if args.sweep {
        return run_equiv_sweep(args);
    }
    if let Some(point) = &args.region {
        return run_equiv_region(point, args);
    }
    let (Some(net_a), Some(rates_a), Some(net_b), Some(rates_b)) =
        (&args.net, &args.rates, &args.net_b, &args.rates_b)
    else {
        return Err(Failure::usage(
            "equiv needs --net/--rates/--net-b/--rates-b, or --region, or --sweep",
        ));
    };
    let (na, _) = load_network(net_a)?;
    let ka = load_rates(&na, rates_a)?;
    let (nb, _) = load_network(net_b)?;
    let kb = load_rates(&nb, rates_b)?;
    let report = dynamically_equivalent(&na, &ka, &nb, &kb)?;
    let doc = EquivPairwiseDoc {
        command: "equiv",
        mode: "pairwise",
        tolerance: COEFF_GAP_TOL,
        equivalent: report.equivalent,
        exact: report.exact,
        max_coeff_gap: report.max_coeff_gap,
    };
    write_json(&doc, args.out.as_ref())?;
    Ok(if report.equivalent { 0 } else { EXIT_NEGATIVE })
}

fn run_equiv_region(point: &str, args: &EquivArgs) -> Result<i32, Failure> {
    let vals = crate::util::parse_float_list(point)?;
    let [a1, a5, k2, k3, k4] = vals[..] else {
        return Err(Failure::usage("--region needs five values: a1,a5,k2,k3,k4"));
    };
    let region = cb_region_probe(a1, a5, k2, k3, k4)?;
    let reparameterization = match region {
        CbRegion::InsideStrip | CbRegion::OnToricLocus => {
            match split_feeds_balanced(a1, a5, k2, k3, k4)? {
                Reparameterization::Feasible { k1, k5, k6 }
                | Reparameterization::Boundary { k1, k5, k6 } => {
                    Some(ReparDoc { kappa1: k1, kappa5: k5, kappa6: k6 })
                }
                Reparameterization::Infeasible => None,
            }
        }
        CbRegion::Outside => None,
    };
    let doc = EquivRegionDoc {
        command: "equiv",
        mode: "region",
        a1,
        a5,
        kappa2: k2,
        kappa3: k3,
        kappa4: k4,
        ratio: k2 * k4 / k3,
        verdict: region_verdict(&region),
        reparameterization,
    };
    write_json(&doc, args.out.as_ref())?;
    Ok(if matches!(region, CbRegion::Outside) { EXIT_NEGATIVE } else { 0 })
}

fn run_equiv_sweep(args: &EquivArgs) -> Result<i32, Failure> {
    let (Some(a1), Some(a5), Some(k2), Some(k3spec), Some(k4spec)) =
        (args.a1, args.a5, args.k2, &args.k3, &args.k4)
    else {
        return Err(Failure::usage("--sweep needs --a1, --a5, --k2, --k3, --k4"));
    };
    let k3s = parse_grid(k3spec)?;
    let k4s = parse_grid(k4spec)?;
    let mut csv = String::from("kappa3,kappa4,ratio,verdict\n");
    for &k3 in &k3s {
        for &k4 in &k4s {
            let region = cb_region_probe(a1, a5, k2, k3, k4)?;
            let ratio = k2 * k4 / k3;
            csv.push_str(&format!("{k3},{k4},{ratio},{}\n", region_verdict(&region)));
        }
    }
    write_text(&csv, args.out.as_ref())?;
    Ok(0)
}
