//! Acceptance battery: ten end-to-end criteria combining exact-formula
//! checks, oracle equivalence on enumerable instances, and scaled-down
//! trend/envelope experiments. Each criterion reports pass/fail with
//! details and is independently runnable (the CLI `accept` subcommand and
//! the `acceptance` integration test both drive these).

use crate::geometry::{ConvexBody, ConvexSet};
use crate::harness::{run_experiment, ExperimentConfig, InstanceKind, MechanismId};
use crate::linalg;
use crate::losses::{Dataset, Loss, Record, TotalLoss};
use crate::lowerbounds;
use crate::mechanisms::{
    localized_exp_mech, out_pert, EffExpMech, ExactExpMech, ExactMechLimits, InnerMech,
};
use crate::objective::{Objective, Scaled};
use crate::privacy;
use crate::sampler::{
    cube_grid_walk_dense, dense_weight_table, init_samp_spec, make_log_weight,
    oracle::StationaryOracle, GridWalkSpec, SamplerOptions,
};
use crate::solver::excess_risk_given;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Mixing-constant used by the sampler-exactness criterion. The mixing-time
/// formula is asymptotic; on the enumerable acceptance instances this
/// constant is verified against transition-matrix powering rather than
/// trusted.
pub const ACCEPT_C_MIX: f64 = 8.0;

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub details: Vec<String>,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:2} {:<28} ({:.1}s / budget {:.0}s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.budget_seconds
        )
    }
}

struct Check {
    pass: bool,
    details: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check {
            pass: true,
            details: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, msg: String) {
        if !ok {
            self.pass = false;
        }
        self.details.push(format!("{} {msg}", if ok { "ok  " } else { "FAIL" }));
    }
}

fn finish(
    id: usize,
    name: &'static str,
    budget_seconds: f64,
    start: std::time::Instant,
    check: Check,
) -> CriterionReport {
    CriterionReport {
        id,
        name,
        pass: check.pass,
        details: check.details,
        seconds: start.elapsed().as_secs_f64(),
        budget_seconds,
    }
}

/// Criterion 1: geometry and loss correctness on randomized cases.
pub fn criterion_1_geometry_losses() -> CriterionReport {
    let start = std::time::Instant::now();
    let mut check = Check::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC1);

    let bodies = [
        ConvexBody::unit_ball(3).unwrap(),
        ConvexBody::centered_box(vec![1.0, 2.0, 0.5]).unwrap(),
        ConvexBody::unit_ball(3)
            .unwrap()
            .intersect_ball(&[0.3, 0.1, 0.0], 0.9)
            .unwrap(),
    ];

    // projection optimality on 1000 (point, competitor) pairs per body
    let mut proj_fails = 0usize;
    for body in &bodies {
        for _ in 0..1000 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let px = body.project(&x);
            let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let inside = body.project(&y);
            if !body.contains(&px)
                || linalg::dist(&px, &x) > linalg::dist(&inside, &x) + 1e-9
            {
                proj_fails += 1;
            }
        }
    }
    check.require(proj_fails == 0, format!("projection optimality: {proj_fails}/3000 failures"));

    // gauge positive homogeneity on 10^4 cases
    let mut gauge_fails = 0usize;
    for body in &bodies {
        for _ in 0..3334 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let c: f64 = rng.gen_range(0.1..4.0);
            let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
            let g1 = body.gauge(&cx).unwrap();
            let g2 = c * body.gauge(&x).unwrap();
            if (g1 - g2).abs() > 1e-9 * g2.max(1.0) {
                gauge_fails += 1;
            }
        }
    }
    check.require(gauge_fails == 0, format!("gauge homogeneity: {gauge_fails}/10002 failures"));

    // subgradients vs central finite differences (rel err <= 1e-5)
    let losses = [
        Loss::linear(),
        Loss::squared_distance(1.0),
        Loss::huberized_hinge(0.25, 1.0).unwrap(),
    ];
    let mut fd_fails = 0usize;
    for loss in &losses {
        for _ in 0..100 {
            let feats: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let rec = if loss.requires_label() {
                Record::labeled(feats, if rng.gen::<bool>() { 1.0 } else { -1.0 })
            } else {
                Record::plain(feats)
            };
            let theta: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.8..0.8)).collect();
            let g = loss.subgrad(&theta, &rec).unwrap();
            let scale = linalg::norm(&g).max(1.0);
            for j in 0..3 {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[j] += 1e-6;
                tm[j] -= 1e-6;
                let fd = (loss.eval(&tp, &rec).unwrap() - loss.eval(&tm, &rec).unwrap()) / 2e-6;
                if (fd - g[j]).abs() > 1e-5 * scale {
                    fd_fails += 1;
                }
            }
        }
    }
    check.require(fd_fails == 0, format!("finite differences: {fd_fails}/900 failures"));

    // convexity midpoint checks
    let all_losses = [
        Loss::linear(),
        Loss::squared_distance(1.0),
        Loss::hinge(1.0),
        Loss::euclidean_median(),
        Loss::pos_part(1.0),
    ];
    let mut cvx_fails = 0usize;
    for loss in &all_losses {
        for _ in 0..1000 {
            let feats: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let rec = if loss.requires_label() {
                Record::labeled(feats, if rng.gen::<bool>() { 1.0 } else { -1.0 })
            } else {
                Record::plain(feats)
            };
            let a: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let lhs = loss.eval(&mid, &rec).unwrap();
            let rhs = 0.5 * (loss.eval(&a, &rec).unwrap() + loss.eval(&b, &rec).unwrap());
            if lhs > rhs + 1e-9 {
                cvx_fails += 1;
            }
        }
    }
    check.require(cvx_fails == 0, format!("convexity midpoints: {cvx_fails}/5000 failures"));

    finish(1, "geometry and losses", 30.0, start, check)
}

/// Criterion 2: privacy calculators against independent evaluation; audit
/// passes at calibration and fails at half variance.
pub fn criterion_2_privacy_calculators() -> CriterionReport {
    let start = std::time::Instant::now();
    let mut check = Check::new();

    // independent evaluations, factored through logs
    let sigma_oracle = |l: f64, n: f64, eps: f64, delta: f64| -> f64 {
        ((32.0f64).ln() + 2.0 * l.ln() + 2.0 * n.ln() + (n / delta).ln().ln()
            + (1.0 / delta).ln().ln()
            - 2.0 * eps.ln())
        .exp()
    };
    let comp_oracle = |e: f64, t: f64, d: f64| -> f64 {
        (2.0 * t * (1.0 / d).ln()).sqrt() * e + t * e * (e.exp() - 1.0)
    };

    let mut worst_rel: f64 = 0.0;
    let mut points = 0;
    for &l in &[0.5, 1.0, 2.0, 5.0] {
        for &n in &[10usize, 100, 1000, 10_000, 100_000] {
            for &eps in &[0.1, 0.5, 1.0, 2.0, 5.0] {
                for &delta in &[1e-8, 1e-6, 1e-4, 1e-3] {
                    points += 1;
                    let got = privacy::noise_gd_sigma_sq(l, n, eps, delta).unwrap();
                    let want = sigma_oracle(l, n as f64, eps, delta);
                    worst_rel = worst_rel.max((got - want).abs() / want);
                }
            }
        }
    }
    check.require(
        worst_rel <= 1e-12,
        format!("sigma^2 vs independent evaluation on {points} points: max rel err {worst_rel:.2e}"),
    );

    let mut worst_comp: f64 = 0.0;
    for &e in &[1e-4, 1e-2, 0.1, 0.5] {
        for &t in &[1u64, 10, 100, 10_000, 1_000_000] {
            for &d in &[1e-8, 1e-6, 1e-3] {
                let got = privacy::strong_composition(e, t, d).unwrap();
                let want = comp_oracle(e, t as f64, d);
                worst_comp = worst_comp.max((got - want).abs() / want.max(1e-300));
            }
        }
    }
    check.require(
        worst_comp <= 1e-12,
        format!("strong composition: max rel err {worst_comp:.2e}"),
    );

    let mut worst_amp: f64 = 0.0;
    for &e in &[0.1, 0.5, 1.0] {
        for &g in &[1e-4, 1e-2, 0.5] {
            let got = privacy::subsample_amplification(e, g).unwrap();
            worst_amp = worst_amp.max((got - 2.0 * g * e).abs() / (2.0 * g * e));
        }
    }
    check.require(
        worst_amp <= 1e-12,
        format!("subsampling amplification: max rel err {worst_amp:.2e}"),
    );

    let audit = privacy::noise_gd_privacy_check(1.0, 100, 1.0, 1e-6);
    check.require(audit.is_ok(), "audit passes at paper calibration".into());
    if let Ok(a) = audit {
        let half = privacy::audit_noise_gd(1.0, 100, 1.0, 1e-6, a.sigma_sq / 2.0).unwrap();
        check.require(!half.pass, format!("audit fails at sigma^2/2 (ratio {:.3})", half.slack_ratio));
    }

    finish(2, "privacy calculators", 5.0, start, check)
}

/// Criterion 3: sampler exactness on enumerable grids, and empirical
/// eff_samp frequencies within the multiplicative guarantee.
pub fn criterion_3_sampler_exactness() -> CriterionReport {
    let start = std::time::Instant::now();
    let mut check = Check::new();

    // Lemma-style exactness: lazy kernel detailed balance and formula-budget
    // mixing, certified by matrix powering, on 1-D and 2-D exponential-weight
    // grids at eps~ in {0.25, 0.5}.
    for dim in [1usize, 2] {
        for eps_tilde in [0.25f64, 0.5] {
            let spec = GridWalkSpec::new(dim, 1.0, 1.0, eps_tilde, ACCEPT_C_MIX).unwrap();
            let cells = spec.num_cells().unwrap();
            assert!(cells <= 1000, "acceptance grids stay enumerable");
            let mut lw = |c: &[f64]| Ok(-c[0]);
            let oracle = StationaryOracle::build(&spec, &mut lw).unwrap();
            let db = oracle.detailed_balance_residual().unwrap();
            check.require(
                db < 1e-12,
                format!("p={dim} eps~={eps_tilde}: detailed balance residual {db:.2e}"),
            );
            let hold = oracle.min_holding_probability().unwrap();
            check.require(hold >= 0.5, format!("p={dim} eps~={eps_tilde}: min holding prob {hold}"));
            let d = oracle.dist_inf_after(spec.steps).unwrap();
            check.require(
                d <= eps_tilde / 2.0,
                format!(
                    "p={dim} eps~={eps_tilde}: Dist_inf {d:.4} <= {:.3} after {} steps ({} cells)",
                    eps_tilde / 2.0,
                    spec.steps,
                    cells
                ),
            );
        }
    }

    // empirical eff_samp frequencies on a 1-D instance: multiplicative e^eps~
    // with 99% confidence at 1e5 samples
    struct Slope;
    impl Objective for Slope {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &[f64]) -> f64 {
            x[0]
        }
        fn subgrad(&self, _x: &[f64]) -> Vec<f64> {
            vec![1.0]
        }
        fn lipschitz(&self) -> f64 {
            1.0
        }
        fn smoothness(&self) -> Option<f64> {
            Some(0.0)
        }
    }
    let seg = ConvexBody::interval(1.0).unwrap();
    let eps_tilde = 0.5;
    let cells = 16usize;
    let probe = SamplerOptions::heuristic(1).with_cells_per_axis(cells);
    let (spec, alpha) = init_samp_spec(&seg, 1.0, eps_tilde / 4.0, &probe).unwrap();
    let mut lw = make_log_weight(&seg, &Slope, 1.0, alpha, 1e-6);
    let oracle = StationaryOracle::build(&spec, &mut lw).unwrap();
    let steps = oracle
        .certified_steps(spec.eps_tilde, 1 << 22)
        .unwrap()
        .expect("1-D acceptance instance must certify");
    let opts = SamplerOptions::heuristic(steps).with_cells_per_axis(cells);
    let n = 100_000;
    let bins = 8;
    let mut counts = vec![0usize; bins];
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC3);
    let mut cache = crate::sampler::WeightCache::new();
    for _ in 0..n {
        let x = crate::sampler::eff_samp(&seg, &Slope, 1.0, eps_tilde, &opts, &mut cache, &mut rng)
            .unwrap();
        let b = (((x[0] + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    // exact bin masses of the target e^{-x} on [-1, 1]
    let z = 1.0f64.exp() - (-1.0f64).exp();
    let mut worst_margin = f64::NEG_INFINITY;
    let mut worst_msg = String::new();
    for b in 0..bins {
        let lo = -1.0 + 2.0 * b as f64 / bins as f64;
        let hi = lo + 2.0 / bins as f64;
        let mass = ((-lo).exp() - (-hi).exp()) / z;
        let got = counts[b] as f64 / n as f64;
        let stat = 3.0 * ((1.0 - mass) / (n as f64 * mass)).sqrt();
        let ratio = (got / mass).ln().abs();
        if ratio - (eps_tilde + stat) > worst_margin {
            worst_margin = ratio - (eps_tilde + stat);
            worst_msg = format!("bin {b}: |log ratio| {ratio:.3}, budget {:.3}", eps_tilde + stat);
        }
    }
    check.require(
        worst_margin <= 0.0,
        format!("eff_samp 1-D law within e^eps~ of the target ({worst_msg})"),
    );

    finish(3, "sampler exactness", 600.0, start, check)
}

/// Criterion 4: initial-sampler in-body probability at the formula step
/// budget (c_mix = 1), for zero and linear losses at p in {1, 2}.
pub fn criterion_4_init_samp_landing() -> CriterionReport {
    let start = std::time::Instant::now();
    let mut check = Check::new();

    struct LinearF(usize);
    impl Objective for LinearF {
        fn dim(&self) -> usize {
            self.0
        }
        fn value(&self, x: &[f64]) -> f64 {
            x[0]
        }
        fn subgrad(&self, x: &[f64]) -> Vec<f64> {
            let mut g = vec![0.0; x.len()];
            g[0] = 1.0;
            g
        }
        fn lipschitz(&self) -> f64 {
            1.0
        }
        fn smoothness(&self) -> Option<f64> {
            Some(0.0)
        }
    }
    struct ZeroF(usize);
    impl Objective for ZeroF {
        fn dim(&self) -> usize {
            self.0
        }
        fn value(&self, _x: &[f64]) -> f64 {
            0.0
        }
        fn subgrad(&self, x: &[f64]) -> Vec<f64> {
            vec![0.0; x.len()]
        }
        fn lipschitz(&self) -> f64 {
            0.0
        }
        fn smoothness(&self) -> Option<f64> {
            Some(0.0)
        }
    }

    let eps_tilde = 0.5;
    let runs = 1000usize;
    for p in [1usize, 2] {
        let body = ConvexBody::unit_ball(p).unwrap();
        for (label, eta, f) in [
            ("f = 0", 0.0, None),
            ("linear f", 1.0, Some(())),
        ] {
            let strict = SamplerOptions::default();
            let rate = {
                let zero = ZeroF(p);
                let lin = LinearF(p);
                let obj: &dyn Objective = if f.is_none() { &zero } else { &lin };
                let (spec, alpha) = init_samp_spec(&body, eta, eps_tilde, &strict).unwrap();
                let mut lw = make_log_weight(&body, obj, eta, alpha, 1e-6);
                let table = dense_weight_table(&spec, &mut lw).unwrap();
                let inside: usize = (0..runs)
                    .into_par_iter()
                    .map(|i| {
                        let mut rng = ChaCha8Rng::seed_from_u64(0xACC4_0000 + i as u64);
                        let x = cube_grid_walk_dense(&spec, &table, &mut rng);
                        usize::from(body.contains(&x))
                    })
                    .sum();
                inside as f64 / runs as f64
            };
            check.require(
                rate >= 0.45,
                format!("p={p}, {label}: in-body rate {rate:.3} >= 0.45"),
            );
        }
    }

    finish(4, "initial sampler landing", 600.0, start, check)
}

/// Criterion 5: noisy SGD utility trends under strong convexity.
pub fn criterion_5_noise_gd_trends() -> CriterionReport {
    let start = std::time::Instant::now();
    let mut check = Check::new();

    let eps = 1.0;
    let delta = 1e-5;
    let loss = Loss::squared_distance(1.0);
    let l = loss.lipschitz();
    let delta_sc = loss.strong_convexity();
    for p in [2usize, 5] {
        let mut cfg =
            ExperimentConfig::new(MechanismId::NoiseGdStronglyConvex, InstanceKind::Quadratic);
        cfg.ns = vec![200, 400, 800];
        cfg.ps = vec![p];
        cfg.epsilons = vec![eps];
        cfg.deltas = vec![delta];
        cfg.trials = 100;
        cfg.seed = 0xACC5 + p as u64;
        let res = run_experiment(&cfg).unwrap();
        let mut means = Vec::new();
        let mut sems = Vec::new();
        for (g, &n) in cfg.ns.iter().enumerate() {
            let mean = res.summary_mean(g).expect("all trials succeed");
            let sem = res.summary_sem(g).unwrap_or(0.0);
            let a = (n as f64 / delta).ln();
            let b = (1.0 / delta).ln();
            let bound =
                10.0 * l * l * a * a * p as f64 * b / (n as f64 * delta_sc * eps * eps);
            check.require(
                mean <= bound,
                format!("p={p} n={n}: mean excess {mean:.2} <= 10x theorem bound {bound:.2}"),
            );
            means.push(mean);
            sems.push(sem);
        }
        let mut violations = 0;
        for i in 1..means.len() {
            let slack = (sems[i] * sems[i] + sems[i - 1] * sems[i - 1]).sqrt();
            if means[i] > means[i - 1] + slack {
                violations += 1;
            }
        }
        check.require(
            violations <= 1,
            format!("p={p}: risk decreasing in n ({violations} violations; means {means:?})"),
        );
    }

    finish(5, "noisy SGD utility trends", 1200.0, start, check)
}

/// Criterion 6: exponential-mechanism utility bound and the
/// efficient-vs-exact 1-D agreement.
pub fn criterion_6_exp_mech_utility() -> CriterionReport {
    let start = std::time::Instant::now();
    let mut check = Check::new();

    // utility envelope on linear hard instances
    for eps in [0.5f64, 1.0] {
        let mut cfg = ExperimentConfig::new(MechanismId::ExpMechExact, InstanceKind::Linear);
        cfg.ns = vec![100];
        cfg.ps = vec![2];
        cfg.epsilons = vec![eps];
        cfg.trials = 200;
        cfg.seed = 0xACC6;
        let res = run_experiment(&cfg).unwrap();
        let mean = res.summary_mean(0).expect("all trials succeed");
        let p = 2.0f64;
        let bound = 10.0 * (p * 1.0 * 2.0 / eps) * ((p + 1.0) * 3.0f64.ln() + 1.0);
        check.require(
            mean <= bound,
            format!("eps={eps}: mean excess {mean:.3} <= 10x peeling bound {bound:.1}"),
        );
    }

    // 1-D agreement: efficient empirical law vs the exact mechanism's
    // analytic lattice masses, binned
    let seg = ConvexBody::interval(1.0).unwrap();
    let data = Dataset::new(vec![
        Record::plain(vec![0.9]),
        Record::plain(vec![0.8]),
        Record::plain(vec![0.6]),
        Record::plain(vec![-0.5]),
        Record::plain(vec![0.4]),
        Record::plain(vec![-0.2]),
    ])
    .unwrap();
    let loss = Loss::linear();
    let eps = 1.0;
    let exact = ExactExpMech::build(&data, &loss, &seg, eps, &ExactMechLimits::default()).unwrap();

    let bins = 8usize;
    let mut exact_bins = vec![0.0f64; bins];
    let masses = exact.masses();
    for (i, m) in masses.iter().enumerate() {
        let x = exact.center(i)[0];
        let b = (((x + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1);
        exact_bins[b] += m;
    }

    let cells = 24usize;
    let probe = SamplerOptions::heuristic(1).with_cells_per_axis(cells);
    let mut eff = EffExpMech::new(&data, &loss, &seg, eps, probe).unwrap();
    let eta = eff.eta();
    let (spec, alpha) = init_samp_spec(&seg, eta, eps / 12.0, &probe).unwrap();
    let total = TotalLoss::new(&loss, &data);
    let scale = eps / (6.0 * loss.lipschitz() * seg.l2_diameter());
    let scaled = Scaled { inner: &total, scale };
    let mut lw = make_log_weight(&seg, &scaled, eta, alpha, 1e-6);
    let oracle = StationaryOracle::build(&spec, &mut lw).unwrap();
    let steps = oracle
        .certified_steps(spec.eps_tilde, 1 << 22)
        .unwrap()
        .expect("1-D agreement instance must certify");
    eff = EffExpMech::new(
        &data,
        &loss,
        &seg,
        eps,
        SamplerOptions::heuristic(steps).with_cells_per_axis(cells),
    )
    .unwrap();

    let n = 100_000;
    let mut counts = vec![0usize; bins];
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC6_0001);
    let mut feasible = true;
    for _ in 0..n {
        let x = eff.sample(&mut rng).unwrap();
        feasible &= seg.contains(&x);
        let b = (((x[0] + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    check.require(feasible, "efficient variant always lands in the body".into());
    let mut worst = f64::NEG_INFINITY;
    let mut worst_msg = String::new();
    for b in 0..bins {
        let fe = exact_bins[b];
        let ff = counts[b] as f64 / n as f64;
        let stat = 3.0 * ((1.0 - fe) / (n as f64 * fe)).sqrt();
        let disc = eta * 2.0 / cells as f64 + exact.achieved_dist_bound;
        let budget = eps / 3.0 + disc + stat;
        let ratio = (ff / fe).ln().abs();
        if ratio - budget > worst {
            worst = ratio - budget;
            worst_msg = format!("bin {b}: |log ratio| {ratio:.3} budget {budget:.3}");
        }
    }
    check.require(worst <= 0.0, format!("1-D agreement: worst margin {worst:.3} ({worst_msg})"));

    finish(6, "exponential mechanism utility", 1200.0, start, check)
}

/// Criterion 7: localization beats the plain exponential mechanism at
/// matched budget, and the localized set covers the true minimizer.
pub fn criterion_7_localization() -> CriterionReport {
    let start = std::time::Instant::now();
    let mut check = Check::new();

    let trials = 200usize;
    let limits = ExactMechLimits::default().with_max_cells(1 << 20);
    let results: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(0xACC7_0000 + t as u64);
            let inst = lowerbounds::quadratic_instance(500, 2, 1.0, &mut rng).unwrap();
            let opt_value = inst.loss.total(&inst.optimum, &inst.data).unwrap();
            let plain = ExactExpMech::build(&inst.data, &inst.loss, &inst.body, 1.0, &limits)
                .unwrap()
                .sample(&inst.body, &mut rng);
            let plain_er =
                excess_risk_given(&plain, &inst.loss, &inst.data, opt_value, 1e-6).unwrap();
            let loc = localized_exp_mech(
                &inst.data,
                &inst.loss,
                &inst.body,
                1.0,
                &InnerMech::Exact(limits),
                &mut rng,
            )
            .unwrap();
            let loc_er =
                excess_risk_given(&loc.theta, &inst.loss, &inst.data, opt_value, 1e-6).unwrap();
            (plain_er, loc_er)
        })
        .collect();
    let mean_plain = results.iter().map(|r| r.0).sum::<f64>() / trials as f64;
    let mean_loc = results.iter().map(|r| r.1).sum::<f64>() / trials as f64;
    check.require(
        mean_loc < mean_plain,
        format!("localized mean excess {mean_loc:.3} < plain {mean_plain:.3} at matched eps"),
    );

    // coverage of the true minimizer at n = 100
    let covered: usize = (0..1000usize)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(0xACC7_8000 + t as u64);
            let inst = lowerbounds::quadratic_instance(100, 2, 1.0, &mut rng).unwrap();
            let zeta = 3.0 * (100.0f64).ln();
            let res =
                out_pert(&inst.data, &inst.loss, &inst.body, 0.5, zeta, &mut rng).unwrap();
            usize::from(res.localized.contains(&res.theta_star))
        })
        .sum();
    let rate = covered as f64 / 1000.0;
    check.require(rate >= 0.99, format!("theta* coverage of C_0: {rate:.3} >= 0.99"));

    finish(7, "localization", 900.0, start, check)
}

/// Criterion 8: huberized objective perturbation pays the square-root-n
/// price: the best-over-h excess risk on the worse of D1/D2 grows by about
/// sqrt(10) when n grows tenfold.
pub fn criterion_8_huberization() -> CriterionReport {
    let start = std::time::Instant::now();
    let mut check = Check::new();

    let eps = 0.5;
    let delta = 1e-6;
    let trials = 30usize;
    let hs: Vec<f64> = (4..=11).map(|k| 2.0f64.powi(-k)).collect();

    let best_for = |n: usize, seed: u64| -> f64 {
        let mut best = f64::INFINITY;
        for (hi, &h) in hs.iter().enumerate() {
            let mut worse: f64 = 0.0;
            for (ii, inst) in [InstanceKind::HuberD1, InstanceKind::HuberD2]
                .into_iter()
                .enumerate()
            {
                let mut cfg = ExperimentConfig::new(MechanismId::ObjPertGaussian, inst);
                cfg.ns = vec![n];
                cfg.ps = vec![1];
                cfg.epsilons = vec![eps];
                cfg.deltas = vec![delta];
                cfg.hs = vec![h];
                cfg.trials = trials;
                cfg.seed = seed + (hi * 2 + ii) as u64;
                let res = run_experiment(&cfg).unwrap();
                let mean = res.summary_mean(0).expect("objective perturbation runs");
                worse = worse.max(mean);
            }
            best = best.min(worse);
        }
        best
    };

    let m_small = best_for(3_000, 0xACC8_0000);
    let m_large = best_for(30_000, 0xACC8_9000);
    let ratio = m_large / m_small;
    let lo = 10.0f64.sqrt() / 1.5;
    let hi = 1.5 * 10.0f64.sqrt();
    check.require(
        ratio >= lo && ratio <= hi,
        format!(
            "min-over-h worst-case risk grows {ratio:.2}x from n=3e3 ({m_small:.2}) to n=3e4 \
             ({m_large:.2}); window [{lo:.2}, {hi:.2}]"
        ),
    );

    finish(8, "huberization lower bound", 600.0, start, check)
}

/// Criterion 9: lower-bound envelope on linear hard instances. The exact
/// exponential mechanism (the certifiably eps-DP mechanism runnable at this
/// scale) must sit above `c_lb * min(n, p/eps)` with a stable constant.
pub fn criterion_9_lowerbound_envelope() -> CriterionReport {
    let start = std::time::Instant::now();
    let mut check = Check::new();

    let datasets = 40usize;
    let draws = 50usize;
    let mut grid = Vec::new();
    for &p in &[4usize, 8] {
        for &eps in &[0.5f64, 1.0] {
            for &n in &[50usize, 100] {
                grid.push((p, eps, n));
            }
        }
    }
    let ratios: Vec<(String, f64)> = grid
        .par_iter()
        .map(|&(p, eps, n)| {
            let limits = ExactMechLimits::default()
                .with_max_dim(8)
                .with_max_cells(1 << 22);
            let mut acc = 0.0;
            let mut count = 0usize;
            for d in 0..datasets {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(0xACC9_0000 + (p * 1000 + n + d) as u64 * 7919);
                let inst = lowerbounds::linear_instance(n, p, eps, &mut rng).unwrap();
                let opt_value = inst.loss.total(&inst.optimum, &inst.data).unwrap();
                let mech =
                    ExactExpMech::build(&inst.data, &inst.loss, &inst.body, eps, &limits)
                        .unwrap();
                for _ in 0..draws {
                    let theta = mech.sample(&inst.body, &mut rng);
                    acc += excess_risk_given(&theta, &inst.loss, &inst.data, opt_value, 1e-6)
                        .unwrap();
                    count += 1;
                }
            }
            let mean = acc / count as f64;
            let floor = (n as f64).min(p as f64 / eps);
            (format!("p={p} eps={eps} n={n}"), mean / floor)
        })
        .collect();

    let cs: Vec<f64> = ratios.iter().map(|r| r.1).collect();
    let c_min = cs.iter().cloned().fold(f64::INFINITY, f64::min);
    let c_max = cs.iter().cloned().fold(0.0f64, f64::max);
    check.require(c_min > 0.0, format!("fitted c_lb positive everywhere (min {c_min:.4})"));
    check.require(
        c_max / c_min <= 4.0,
        format!("c_lb stable within x4: spread {:.3} (min {c_min:.4}, max {c_max:.4})", c_max / c_min),
    );
    for (label, c) in &ratios {
        check.details.push(format!("     {label}: c_lb = {c:.4}"));
    }

    finish(9, "lower-bound envelope", 900.0, start, check)
}

/// Criterion 10: determinism and CSV schema.
pub fn criterion_10_determinism() -> CriterionReport {
    let start = std::time::Instant::now();
    let mut check = Check::new();

    let mut cfg = ExperimentConfig::new(MechanismId::NoiseGdStronglyConvex, InstanceKind::Quadratic);
    cfg.ns = vec![50, 100];
    cfg.ps = vec![2];
    cfg.trials = 4;
    cfg.deltas = vec![1e-5];
    cfg.seed = 0xACCA;
    let a = run_experiment(&cfg).unwrap().to_csv_deterministic();
    let b = run_experiment(&cfg).unwrap().to_csv_deterministic();
    check.require(
        a == b,
        "repeated seeded sweeps are byte-identical (wall-clock column masked)".into(),
    );

    let ncols = crate::harness::CSV_HEADER.split(',').count();
    let mut schema_ok = true;
    for (i, line) in a.lines().enumerate() {
        if i == 0 {
            schema_ok &= line == crate::harness::CSV_HEADER;
        } else {
            schema_ok &= line.split(',').count() == ncols;
        }
    }
    check.require(schema_ok, format!("CSV schema validated ({ncols} columns)"));

    // floats round-trip at 17 significant digits
    let val = std::f64::consts::LN_2 * 1e-3;
    let roundtrip: f64 = crate::harness::format_float(val).parse().unwrap();
    check.require(roundtrip == val, "float serialization is lossless".into());

    finish(10, "determinism and schema", 60.0, start, check)
}

/// Run every criterion in order.
pub fn run_all() -> Vec<CriterionReport> {
    vec![
        criterion_1_geometry_losses(),
        criterion_2_privacy_calculators(),
        criterion_3_sampler_exactness(),
        criterion_4_init_samp_landing(),
        criterion_5_noise_gd_trends(),
        criterion_6_exp_mech_utility(),
        criterion_7_localization(),
        criterion_8_huberization(),
        criterion_9_lowerbound_envelope(),
        criterion_10_determinism(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrupted_sigma_fails_the_audit_criterion() {
        // the audit half of criterion 2, inverted: halving the calibrated
        // variance must flip the verdict
        let audit = privacy::noise_gd_privacy_check(1.0, 200, 0.5, 1e-7).unwrap();
        assert!(audit.pass);
        let bad = privacy::audit_noise_gd(1.0, 200, 0.5, 1e-7, audit.sigma_sq / 2.0).unwrap();
        assert!(!bad.pass);
    }

    #[test]
    fn strict_mode_rejects_tiny_override() {
        // a steps_override of 1 is only reachable through heuristic mode,
        // which is never privacy-labeled
        let opts = SamplerOptions::heuristic(1);
        assert!(!opts.mode.is_strict());
        let out = crate::mechanisms::exp_mech_efficient(
            &Dataset::new(vec![Record::plain(vec![0.1])]).unwrap(),
            &Loss::linear(),
            &ConvexBody::interval(1.0).unwrap(),
            1.0,
            opts,
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        assert!(!out.private);
    }
}
