//! `dperm`: benchmark harness for differentially private convex ERM.
//!
//! Subcommands: `run` (single experiment), `sweep` (grid sweep with CSV and
//! optional SVG output), `sample-test` (grid-walk diagnostics against the
//! exact oracle), `lowerbound` (hard-instance envelope), `accept` (the
//! acceptance battery).

use clap::{Args, Parser, Subcommand};
use dperm_core::accept;
use dperm_core::geometry::{ConvexBody, ConvexSet};
use dperm_core::harness::{
    render_line_chart, run_experiment, ExperimentConfig, InstanceKind, MechanismId, RunMode,
};
use dperm_core::losses::Loss;
use dperm_core::lowerbounds;
use dperm_core::mechanisms::{ExactExpMech, ExactMechLimits};
use dperm_core::sampler::{oracle::StationaryOracle, GridWalkSpec, WeightCache};
use dperm_core::solver::excess_risk_given;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dperm", version, about = "Differentially private convex ERM benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a single experiment (scalar axes) and print or write CSV rows.
    Run(ExpArgs),
    /// Sweep a grid of n/p/eps/delta/h values.
    Sweep(ExpArgs),
    /// Grid-walk sampler diagnostics against the exact stationary oracle.
    SampleTest(SampleTestArgs),
    /// Evaluate the exact exponential mechanism on hard-instance families
    /// and fit the lower-bound envelope constant.
    Lowerbound(LowerboundArgs),
    /// Run the acceptance suite (one verdict line per criterion).
    Accept(AcceptArgs),
}

#[derive(Args, Debug, Default, Clone)]
struct ExpArgs {
    /// Mechanism id (noise-gd-lip, noise-gd-sc, exp-exact, exp-eff,
    /// loc-exp-exact, loc-exp-eff, gauss-loc, obj-pert-gamma, obj-pert-gauss)
    #[arg(long)]
    mechanism: Option<String>,
    /// Instance source: linear, quadratic, huber-d1, huber-d2, csv:<path>
    #[arg(long)]
    instance: Option<String>,
    /// Loss for csv instances: linear, squared, hinge, huber-hinge:<h>,
    /// median, pos-part, huber-pos-part:<h>
    #[arg(long)]
    loss: Option<String>,
    /// Body for csv instances: ball:<radius> or box:<w1,w2,...>
    #[arg(long)]
    body: Option<String>,
    /// Dataset sizes (comma-separated for sweeps)
    #[arg(long)]
    n: Option<String>,
    /// Dimensions
    #[arg(long)]
    p: Option<String>,
    /// Privacy epsilon values
    #[arg(long)]
    eps: Option<String>,
    /// Privacy delta values
    #[arg(long)]
    delta: Option<String>,
    /// Huberization widths (huber instances only)
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// strict or heuristic[:steps]
    #[arg(long)]
    mode: Option<String>,
    /// Objective-perturbation regularizer (defaults to beta/(2 eps))
    #[arg(long)]
    ridge: Option<f64>,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render mean-risk-vs-n SVG charts to this path
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Key-value config file mirroring these flags; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SampleTestArgs {
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// Lattice resolution override (cells per axis)
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    eps_tilde: f64,
    /// Lipschitz constant of the log-weight
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Log-weight shape: uniform or slope
    #[arg(long, default_value = "slope")]
    weight: String,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 1.0)]
    c_mix: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args, Debug)]
struct LowerboundArgs {
    #[arg(long, default_value = "4,8")]
    p: String,
    #[arg(long, default_value = "0.5,1.0")]
    eps: String,
    #[arg(long, default_value = "50,100")]
    n: String,
    #[arg(long, default_value_t = 400)]
    trials: usize,
    #[arg(long, default_value_t = 11)]
    seed: u64,
}

#[derive(Args, Debug)]
struct AcceptArgs {
    /// Run a single criterion (1..=10)
    #[arg(long)]
    only: Option<usize>,
    /// Print per-check details
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run(a) => experiment(a, false),
        Cmd::Sweep(a) => experiment(a, true),
        Cmd::SampleTest(a) => sample_test(a),
        Cmd::Lowerbound(a) => lowerbound(a),
        Cmd::Accept(a) => return accept_cmd(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Parse `key = value` lines; `#` starts a comment.
fn read_config_file(path: &PathBuf) -> Result<HashMap<String, String>, dperm_core::Error> {
    let text = std::fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            dperm_core::Error::Parse(format!("config line {}: expected key = value", i + 1))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn merge_config(args: &mut ExpArgs) -> Result<(), dperm_core::Error> {
    let Some(path) = args.config.clone() else {
        return Ok(());
    };
    let file = read_config_file(&path)?;
    let fill = |slot: &mut Option<String>, key: &str| {
        if slot.is_none() {
            if let Some(v) = file.get(key) {
                *slot = Some(v.clone());
            }
        }
    };
    fill(&mut args.mechanism, "mechanism");
    fill(&mut args.instance, "instance");
    fill(&mut args.loss, "loss");
    fill(&mut args.body, "body");
    fill(&mut args.n, "n");
    fill(&mut args.p, "p");
    fill(&mut args.eps, "eps");
    fill(&mut args.delta, "delta");
    fill(&mut args.h, "h");
    fill(&mut args.mode, "mode");
    if args.trials.is_none() {
        if let Some(v) = file.get("trials") {
            args.trials = Some(v.parse().map_err(|_| bad("trials", v))?);
        }
    }
    if args.seed.is_none() {
        if let Some(v) = file.get("seed") {
            args.seed = Some(v.parse().map_err(|_| bad("seed", v))?);
        }
    }
    if args.ridge.is_none() {
        if let Some(v) = file.get("ridge") {
            args.ridge = Some(v.parse().map_err(|_| bad("ridge", v))?);
        }
    }
    if args.out.is_none() {
        if let Some(v) = file.get("out") {
            args.out = Some(PathBuf::from(v));
        }
    }
    Ok(())
}

fn bad(key: &str, v: &str) -> dperm_core::Error {
    dperm_core::Error::Parse(format!("bad value {v:?} for {key}"))
}

fn parse_list<T: std::str::FromStr>(s: &str, key: &str) -> Result<Vec<T>, dperm_core::Error> {
    s.split(',')
        .map(|f| f.trim().parse::<T>().map_err(|_| bad(key, f)))
        .collect()
}

fn parse_body(s: &str, dim: usize) -> Result<ConvexBody, dperm_core::Error> {
    if let Some(r) = s.strip_prefix("ball:") {
        let radius: f64 = r.parse().map_err(|_| bad("body", s))?;
        return ConvexBody::ball(dim, radius);
    }
    if let Some(ws) = s.strip_prefix("box:") {
        return ConvexBody::centered_box(parse_list(ws, "body")?);
    }
    Err(dperm_core::Error::Parse(format!(
        "unknown body {s:?}; expected ball:<radius> or box:<w1,w2,...>"
    )))
}

fn parse_loss(s: &str, body: &ConvexBody) -> Result<Loss, dperm_core::Error> {
    let out_radius = body
        .bounding_half_widths()
        .iter()
        .map(|w| w * w)
        .sum::<f64>()
        .sqrt();
    Ok(match s {
        "linear" => Loss::linear(),
        "squared" => Loss::squared_distance(out_radius),
        "hinge" => Loss::hinge(1.0),
        "median" => Loss::euclidean_median(),
        "pos-part" => Loss::pos_part(1.0),
        other => {
            if let Some(h) = other.strip_prefix("huber-hinge:") {
                Loss::huberized_hinge(h.parse().map_err(|_| bad("loss", other))?, 1.0)?
            } else if let Some(h) = other.strip_prefix("huber-pos-part:") {
                Loss::huberized_pos_part(h.parse().map_err(|_| bad("loss", other))?, 1.0)?
            } else {
                return Err(dperm_core::Error::Parse(format!("unknown loss {other:?}")));
            }
        }
    })
}

fn build_config(
    mut args: ExpArgs,
    sweep: bool,
) -> Result<(ExperimentConfig, ExpArgs), dperm_core::Error> {
    merge_config(&mut args)?;
    let mech = MechanismId::parse(args.mechanism.as_deref().unwrap_or("noise-gd-sc"))?;
    let ns: Vec<usize> = parse_list(args.n.as_deref().unwrap_or("100"), "n")?;
    let ps: Vec<usize> = parse_list(args.p.as_deref().unwrap_or("2"), "p")?;
    let instance_str = args.instance.clone().unwrap_or_else(|| "quadratic".into());
    let (loss, body) = if instance_str.starts_with("csv:") {
        let dim = ps[0];
        let body = parse_body(
            args.body
                .as_deref()
                .ok_or_else(|| dperm_core::Error::Parse("csv instances need --body".into()))?,
            dim,
        )?;
        let loss = parse_loss(
            args.loss
                .as_deref()
                .ok_or_else(|| dperm_core::Error::Parse("csv instances need --loss".into()))?,
            &body,
        )?;
        (Some(loss), Some(body))
    } else {
        (None, None)
    };
    let instance = InstanceKind::parse(&instance_str, loss, body)?;

    let mut config = ExperimentConfig::new(mech, instance);
    config.ns = ns;
    config.ps = ps;
    config.epsilons = parse_list(args.eps.as_deref().unwrap_or("1.0"), "eps")?;
    config.deltas = parse_list(args.delta.as_deref().unwrap_or("1e-6"), "delta")?;
    if let Some(h) = &args.h {
        config.hs = parse_list(h, "h")?;
    }
    config.trials = args.trials.unwrap_or(1);
    config.seed = args.seed.unwrap_or(0);
    config.mode = RunMode::parse(args.mode.as_deref().unwrap_or("strict"))?;
    config.ridge = args.ridge;

    if !sweep {
        let single = config.ns.len() == 1
            && config.ps.len() == 1
            && config.epsilons.len() == 1
            && config.deltas.len() == 1
            && config.hs.len() == 1;
        if !single {
            return Err(dperm_core::Error::Parse(
                "run takes scalar axes; use sweep for lists".into(),
            ));
        }
    }
    Ok((config, args))
}

fn experiment(args: ExpArgs, sweep: bool) -> Result<(), dperm_core::Error> {
    let (config, args) = build_config(args, sweep)?;
    let result = run_experiment(&config)?;
    let csv = result.to_csv();
    match &args.out {
        Some(path) => {
            std::fs::write(path, &csv)?;
            eprintln!("wrote {} rows to {}", result.rows.len(), path.display());
        }
        None => print!("{csv}"),
    }
    if let Some(svg_path) = &args.svg {
        // one series per (p, eps, delta, h) combination, mean risk vs n
        let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for row in result.rows.iter().filter(|r| r.row_type == "summary") {
            if let Some(mean) = row.excess_risk {
                let label = format!("p={} eps={} delta={}", row.p, row.eps, row.delta);
                match series.iter_mut().find(|(l, _)| *l == label) {
                    Some((_, pts)) => pts.push((row.n as f64, mean)),
                    None => series.push((label, vec![(row.n as f64, mean)])),
                }
            }
        }
        let svg = render_line_chart(
            &format!("{} on {}", config.mechanism, config.instance.label()),
            "n",
            "mean excess risk",
            &series,
        );
        std::fs::write(svg_path, svg)?;
        eprintln!("wrote chart to {}", svg_path.display());
    }
    Ok(())
}

fn sample_test(args: SampleTestArgs) -> Result<(), dperm_core::Error> {
    let mut spec = GridWalkSpec::new(args.p, 1.0, args.eta, args.eps_tilde, args.c_mix)?;
    if let Some(cells) = args.cells {
        spec = spec.with_cells_per_axis(cells);
    }
    let slope = args.weight == "slope";
    let mut lw = move |c: &[f64]| Ok(if slope { -c[0] } else { 0.0 });
    println!(
        "grid walk: p={} cells/axis={} gamma={:.4} formula steps={}",
        spec.dim, spec.cells_per_axis, spec.gamma, spec.steps
    );
    let oracle = StationaryOracle::build(&spec, &mut lw)?;
    println!(
        "detailed balance residual: {:.3e}",
        oracle.detailed_balance_residual()?
    );
    println!(
        "min holding probability:   {:.4}",
        oracle.min_holding_probability()?
    );
    let d = oracle.dist_inf_after(spec.steps)?;
    println!(
        "Dist_inf after formula steps: {:.6} (target {:.4})",
        d,
        args.eps_tilde / 2.0
    );
    match oracle.certified_steps(args.eps_tilde, 1 << 24)? {
        Some(t) => println!("certified steps (power of two): {t}"),
        None => println!("certified steps: not reached within 2^24"),
    }

    // empirical cell frequencies vs the stationary law
    let pi = oracle.stationary();
    let mut counts = vec![0usize; oracle.num_cells()];
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut cache = WeightCache::new();
    for _ in 0..args.samples {
        let cell = dperm_core::sampler::walk_final_cell(&spec, &mut lw, &mut cache, &mut rng)?;
        let idx = oracle.cell_index(&cell).expect("cell enumerated");
        counts[idx] += 1;
    }
    println!("cell  pi(exact)   freq(empirical)  log-ratio");
    let stride = (oracle.num_cells() / 32).max(1);
    for (i, c) in counts.iter().enumerate() {
        if i % stride != 0 {
            continue;
        }
        let f = *c as f64 / args.samples as f64;
        println!(
            "{i:4}  {:.6}    {:.6}         {:+.4}",
            pi[i],
            f,
            (f / pi[i]).ln()
        );
    }
    Ok(())
}

fn lowerbound(args: LowerboundArgs) -> Result<(), dperm_core::Error> {
    let ps: Vec<usize> = parse_list(&args.p, "p")?;
    let epss: Vec<f64> = parse_list(&args.eps, "eps")?;
    let ns: Vec<usize> = parse_list(&args.n, "n")?;
    let limits = ExactMechLimits::default()
        .with_max_dim(8)
        .with_max_cells(1 << 22);
    println!("exact exponential mechanism on linear hard instances");
    println!(
        "{:<24} {:>12} {:>12} {:>10}",
        "point", "mean excess", "min(n,p/e)", "c_lb"
    );
    let mut cs = Vec::new();
    for &p in &ps {
        for &eps in &epss {
            for &n in &ns {
                let datasets = (args.trials / 50).max(1);
                let draws = (args.trials / datasets).max(1);
                let mut acc = 0.0;
                let mut count = 0;
                for d in 0..datasets {
                    let mut rng = ChaCha8Rng::seed_from_u64(
                        args.seed ^ (p as u64 * 0x9E37 + n as u64 * 0x79B9 + d as u64),
                    );
                    let inst = lowerbounds::linear_instance(n, p, eps, &mut rng)?;
                    let opt = inst.loss.total(&inst.optimum, &inst.data)?;
                    let mech =
                        ExactExpMech::build(&inst.data, &inst.loss, &inst.body, eps, &limits)?;
                    for _ in 0..draws {
                        let theta = mech.sample(&inst.body, &mut rng);
                        acc += excess_risk_given(&theta, &inst.loss, &inst.data, opt, 1e-6)?;
                        count += 1;
                    }
                }
                let mean = acc / count as f64;
                let floor = (n as f64).min(p as f64 / eps);
                let c = mean / floor;
                cs.push(c);
                println!("p={p:<3} eps={eps:<5} n={n:<8} {mean:>12.4} {floor:>12.3} {c:>10.4}");
            }
        }
    }
    let cmin = cs.iter().cloned().fold(f64::INFINITY, f64::min);
    let cmax = cs.iter().cloned().fold(0.0f64, f64::max);
    println!(
        "fitted c_lb spread: {:.3} (min {cmin:.4}, max {cmax:.4})",
        cmax / cmin
    );
    Ok(())
}

fn accept_cmd(args: AcceptArgs) -> ExitCode {
    let reports = match args.only {
        Some(1) => vec![accept::criterion_1_geometry_losses()],
        Some(2) => vec![accept::criterion_2_privacy_calculators()],
        Some(3) => vec![accept::criterion_3_sampler_exactness()],
        Some(4) => vec![accept::criterion_4_init_samp_landing()],
        Some(5) => vec![accept::criterion_5_noise_gd_trends()],
        Some(6) => vec![accept::criterion_6_exp_mech_utility()],
        Some(7) => vec![accept::criterion_7_localization()],
        Some(8) => vec![accept::criterion_8_huberization()],
        Some(9) => vec![accept::criterion_9_lowerbound_envelope()],
        Some(10) => vec![accept::criterion_10_determinism()],
        Some(other) => {
            eprintln!("error: no criterion {other}; expected 1..=10");
            return ExitCode::FAILURE;
        }
        None => accept::run_all(),
    };
    let mut all_pass = true;
    for r in &reports {
        println!("{}", r.line());
        if args.verbose || !r.pass {
            for d in &r.details {
                println!("    {d}");
            }
        }
        all_pass &= r.pass;
    }
    if all_pass {
        println!("acceptance: all {} criteria passed", reports.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILURES present");
        ExitCode::FAILURE
    }
}
