//! Experiment harness: seeded sweeps over mechanisms and instance grids,
//! deterministic CSV output, generalization measurement, and static SVG
//! charts.
//!
//! Trials are embarrassingly parallel; every trial derives its RNG stream
//! from `(master seed, grid index, trial index)`, and rows are emitted in
//! grid-then-trial order regardless of completion order, so repeated runs of
//! the same config are byte-identical.

use crate::error::{Error, Result};
use crate::geometry::{ConvexBody, ConvexSet};
use crate::linalg;
use crate::losses::{Dataset, Loss, Record, TotalLoss};
use crate::lowerbounds;
use crate::mechanisms::{
    exp_mech_efficient, exp_mech_exact, gauss_out_pert_localize, localized_exp_mech, noise_gd,
    objective_perturbation, ExactMechLimits, InnerMech, MechOutput, NoiseGdConfig, ObjPertNoise,
};
use crate::privacy::PrivacyParams;
use crate::sampler::SamplerOptions;
use crate::solver::{excess_risk_given, minimize, SolverSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;

/// Serialize a float with 17 significant digits (lossless for f64).
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Per-trial seed derived from the master seed and the grid coordinates.
pub fn trial_seed(master: u64, grid_index: u64, trial: u64) -> u64 {
    splitmix64(
        splitmix64(master ^ splitmix64(grid_index)) ^ splitmix64(trial ^ 0xA5A5_A5A5_0000_0001),
    )
}

pub fn trial_rng(master: u64, grid_index: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(master, grid_index, trial))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MechanismId {
    NoiseGdLipschitz,
    NoiseGdStronglyConvex,
    ExpMechExact,
    ExpMechEfficient,
    LocalizedExpExact,
    LocalizedExpEfficient,
    GaussLocalized,
    ObjPertGamma,
    ObjPertGaussian,
}

impl MechanismId {
    pub const ALL: [MechanismId; 9] = [
        MechanismId::NoiseGdLipschitz,
        MechanismId::NoiseGdStronglyConvex,
        MechanismId::ExpMechExact,
        MechanismId::ExpMechEfficient,
        MechanismId::LocalizedExpExact,
        MechanismId::LocalizedExpEfficient,
        MechanismId::GaussLocalized,
        MechanismId::ObjPertGamma,
        MechanismId::ObjPertGaussian,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "noise-gd-lip" => MechanismId::NoiseGdLipschitz,
            "noise-gd-sc" => MechanismId::NoiseGdStronglyConvex,
            "exp-exact" => MechanismId::ExpMechExact,
            "exp-eff" => MechanismId::ExpMechEfficient,
            "loc-exp-exact" => MechanismId::LocalizedExpExact,
            "loc-exp-eff" => MechanismId::LocalizedExpEfficient,
            "gauss-loc" => MechanismId::GaussLocalized,
            "obj-pert-gamma" => MechanismId::ObjPertGamma,
            "obj-pert-gauss" => MechanismId::ObjPertGaussian,
            other => {
                return Err(Error::Parse(format!(
                    "unknown mechanism {other:?}; expected one of noise-gd-lip, noise-gd-sc, \
                     exp-exact, exp-eff, loc-exp-exact, loc-exp-eff, gauss-loc, \
                     obj-pert-gamma, obj-pert-gauss"
                )))
            }
        })
    }
}

impl fmt::Display for MechanismId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MechanismId::NoiseGdLipschitz => "noise-gd-lip",
            MechanismId::NoiseGdStronglyConvex => "noise-gd-sc",
            MechanismId::ExpMechExact => "exp-exact",
            MechanismId::ExpMechEfficient => "exp-eff",
            MechanismId::LocalizedExpExact => "loc-exp-exact",
            MechanismId::LocalizedExpEfficient => "loc-exp-eff",
            MechanismId::GaussLocalized => "gauss-loc",
            MechanismId::ObjPertGamma => "obj-pert-gamma",
            MechanismId::ObjPertGaussian => "obj-pert-gauss",
        };
        f.write_str(s)
    }
}

/// Where trial datasets come from.
#[derive(Debug, Clone)]
pub enum InstanceKind {
    /// Linear-loss packing family on the unit ball.
    Linear,
    /// Squared-distance packing family on the unit ball.
    Quadratic,
    /// Huberization counterexample dataset `D1` (mechanism loss huberized,
    /// risk measured with the unsmoothed loss).
    HuberD1,
    /// Huberization counterexample dataset `D2`.
    HuberD2,
    /// Fixed dataset from a CSV file with an explicit loss and body.
    Csv {
        path: String,
        loss: Loss,
        body: ConvexBody,
    },
}

impl InstanceKind {
    pub fn parse(s: &str, loss: Option<Loss>, body: Option<ConvexBody>) -> Result<Self> {
        Ok(match s {
            "linear" => InstanceKind::Linear,
            "quadratic" => InstanceKind::Quadratic,
            "huber-d1" => InstanceKind::HuberD1,
            "huber-d2" => InstanceKind::HuberD2,
            other => {
                if let Some(path) = other.strip_prefix("csv:") {
                    InstanceKind::Csv {
                        path: path.to_string(),
                        loss: loss
                            .ok_or_else(|| Error::Parse("csv instances need --loss".into()))?,
                        body: body
                            .ok_or_else(|| Error::Parse("csv instances need --body".into()))?,
                    }
                } else {
                    return Err(Error::Parse(format!(
                        "unknown instance {other:?}; expected linear, quadratic, huber-d1, \
                         huber-d2, or csv:<path>"
                    )));
                }
            }
        })
    }

    pub fn label(&self) -> String {
        match self {
            InstanceKind::Linear => "linear".into(),
            InstanceKind::Quadratic => "quadratic".into(),
            InstanceKind::HuberD1 => "huber-d1".into(),
            InstanceKind::HuberD2 => "huber-d2".into(),
            InstanceKind::Csv { path, .. } => format!("csv:{path}"),
        }
    }
}

/// Strict (privacy-labeled) or heuristic sampler budgets for mechanisms that
/// run the grid walk.
#[derive(Debug, Clone, Copy)]
pub enum RunMode {
    Strict {
        max_steps: Option<u64>,
    },
    Heuristic {
        steps: u64,
        cells_per_axis: Option<usize>,
    },
}

impl RunMode {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "strict" {
            return Ok(RunMode::Strict {
                max_steps: Some(50_000_000),
            });
        }
        if let Some(rest) = s.strip_prefix("heuristic") {
            let steps = rest
                .strip_prefix(':')
                .unwrap_or("100000")
                .parse::<u64>()
                .map_err(|_| Error::Parse(format!("bad heuristic step count in {s:?}")))?;
            return Ok(RunMode::Heuristic {
                steps,
                cells_per_axis: None,
            });
        }
        Err(Error::Parse(format!(
            "unknown mode {s:?}; expected strict or heuristic[:steps]"
        )))
    }

    pub fn sampler_options(&self) -> SamplerOptions {
        match *self {
            RunMode::Strict { max_steps } => SamplerOptions {
                max_steps,
                ..Default::default()
            },
            RunMode::Heuristic {
                steps,
                cells_per_axis,
            } => {
                let mut o = SamplerOptions::heuristic(steps);
                o.cells_per_axis = cells_per_axis;
                o
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mechanism: MechanismId,
    pub instance: InstanceKind,
    pub ns: Vec<usize>,
    pub ps: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Huberization widths; a single NaN placeholder for other instances.
    pub hs: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub mode: RunMode,
    /// Explicit objective-perturbation regularizer; `None` selects the floor
    /// `beta / (2 eps)`.
    pub ridge: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(mechanism: MechanismId, instance: InstanceKind) -> Self {
        ExperimentConfig {
            mechanism,
            instance,
            ns: vec![100],
            ps: vec![2],
            epsilons: vec![1.0],
            deltas: vec![1e-6],
            hs: vec![f64::NAN],
            trials: 1,
            seed: 0,
            mode: RunMode::Strict {
                max_steps: Some(50_000_000),
            },
            ridge: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.ns.is_empty()
            || self.ps.is_empty()
            || self.epsilons.is_empty()
            || self.deltas.is_empty()
            || self.hs.is_empty()
        {
            return Err(Error::invalid("sweep axes must be non-empty"));
        }
        Ok(())
    }

    fn grid(&self) -> Vec<GridPoint> {
        let mut pts = Vec::new();
        for &n in &self.ns {
            for &p in &self.ps {
                for &eps in &self.epsilons {
                    for &delta in &self.deltas {
                        for &h in &self.hs {
                            pts.push(GridPoint { n, p, eps, delta, h });
                        }
                    }
                }
            }
        }
        pts
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GridPoint {
    pub n: usize,
    pub p: usize,
    pub eps: f64,
    pub delta: f64,
    pub h: f64,
}

/// A prepared trial problem: dataset, mechanism loss, evaluation loss, body,
/// and the optimal total-loss value for excess-risk measurement.
struct TrialProblem {
    data: Dataset,
    mech_loss: Loss,
    eval_loss: Loss,
    body: ConvexBody,
    opt_value: f64,
    opt_tolerance: f64,
}

fn prepare_problem(
    kind: &InstanceKind,
    gp: &GridPoint,
    rng: &mut ChaCha8Rng,
) -> Result<TrialProblem> {
    match kind {
        InstanceKind::Linear => {
            let inst = lowerbounds::linear_instance(gp.n, gp.p, gp.eps, rng)?;
            let opt_value = inst.loss.total(&inst.optimum, &inst.data)?;
            Ok(TrialProblem {
                opt_value,
                opt_tolerance: 1e-9 * gp.n as f64,
                mech_loss: inst.loss.clone(),
                eval_loss: inst.loss,
                data: inst.data,
                body: inst.body,
            })
        }
        InstanceKind::Quadratic => {
            let inst = lowerbounds::quadratic_instance(gp.n, gp.p, gp.eps, rng)?;
            let opt_value = inst.loss.total(&inst.optimum, &inst.data)?;
            Ok(TrialProblem {
                opt_value,
                opt_tolerance: 1e-9 * gp.n as f64,
                mech_loss: inst.loss.clone(),
                eval_loss: inst.loss,
                data: inst.data,
                body: inst.body,
            })
        }
        InstanceKind::HuberD1 | InstanceKind::HuberD2 => {
            if !(gp.h > 0.0) {
                return Err(Error::invalid(
                    "huberization instances need an --h sweep value",
                ));
            }
            let (d1, d2) = lowerbounds::huberization_instances(gp.n, gp.h)?;
            let data = if matches!(kind, InstanceKind::HuberD1) { d1 } else { d2 };
            let body = lowerbounds::huberization_body();
            let mech_loss = Loss::huberized_pos_part(gp.h, 1.0)?;
            let eval_loss = Loss::pos_part(1.0);
            // piecewise-linear 1-D total: breakpoints and endpoints are exact
            let mut opt_value = f64::INFINITY;
            for t in [-2.0, -1.0, 1.0, 2.0] {
                opt_value = opt_value.min(eval_loss.total(&[t], &data)?);
            }
            Ok(TrialProblem {
                data,
                mech_loss,
                eval_loss,
                body,
                opt_value,
                opt_tolerance: 1e-9 * gp.n as f64,
            })
        }
        InstanceKind::Csv { path, loss, body } => {
            let data =
                Dataset::from_csv_path(std::path::Path::new(path), loss.requires_label())?;
            let settings = SolverSettings::default();
            let min = minimize(loss, &data, body, &settings)?;
            let total = TotalLoss::new(loss, &data);
            let tol = settings.resolve_tolerance(&total, body);
            Ok(TrialProblem {
                data,
                mech_loss: loss.clone(),
                eval_loss: loss.clone(),
                body: body.clone(),
                opt_value: min.value,
                opt_tolerance: tol,
            })
        }
    }
}

/// Dispatch one mechanism run.
#[allow(clippy::too_many_arguments)]
pub fn run_mechanism(
    mechanism: MechanismId,
    data: &Dataset,
    loss: &Loss,
    body: &ConvexBody,
    eps: f64,
    delta: f64,
    mode: &RunMode,
    ridge: Option<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<MechOutput> {
    match mechanism {
        MechanismId::NoiseGdLipschitz => noise_gd(
            data,
            loss,
            body,
            PrivacyParams::new(eps, delta)?,
            &NoiseGdConfig::lipschitz(),
            rng,
        ),
        MechanismId::NoiseGdStronglyConvex => noise_gd(
            data,
            loss,
            body,
            PrivacyParams::new(eps, delta)?,
            &NoiseGdConfig::strongly_convex(),
            rng,
        ),
        MechanismId::ExpMechExact => {
            exp_mech_exact(data, loss, body, eps, &ExactMechLimits::default(), rng)
        }
        MechanismId::ExpMechEfficient => {
            exp_mech_efficient(data, loss, body, eps, mode.sampler_options(), rng)
        }
        MechanismId::LocalizedExpExact => localized_exp_mech(
            data,
            loss,
            body,
            eps,
            &InnerMech::Exact(ExactMechLimits::default()),
            rng,
        ),
        MechanismId::LocalizedExpEfficient => localized_exp_mech(
            data,
            loss,
            body,
            eps,
            &InnerMech::Efficient(mode.sampler_options()),
            rng,
        ),
        MechanismId::GaussLocalized => gauss_out_pert_localize(
            data,
            loss,
            body,
            PrivacyParams::new(eps, delta)?,
            &NoiseGdConfig::strongly_convex(),
            rng,
        ),
        MechanismId::ObjPertGamma | MechanismId::ObjPertGaussian => {
            let beta = loss.smoothness().ok_or_else(|| {
                Error::PreconditionViolation("objective perturbation needs a smooth loss".into())
            })?;
            let reg = ridge.unwrap_or(beta / (2.0 * eps));
            let noise = if mechanism == MechanismId::ObjPertGamma {
                ObjPertNoise::Gamma
            } else {
                ObjPertNoise::Gaussian { delta }
            };
            objective_perturbation(data, loss, body, reg, eps, noise, rng).map(|(out, _)| out)
        }
    }
}

/// One CSV row; summary rows aggregate a grid point.
#[derive(Debug, Clone)]
pub struct Row {
    pub mechanism: String,
    pub instance: String,
    pub n: usize,
    pub p: usize,
    pub eps: f64,
    pub delta: f64,
    pub h: f64,
    pub grid_index: usize,
    pub row_type: &'static str,
    pub trial: Option<usize>,
    pub seed: Option<u64>,
    pub status: String,
    pub excess_risk: Option<f64>,
    pub stderr: Option<f64>,
    pub runtime_ms: f64,
    pub private: bool,
    pub audit_ok: Option<bool>,
}

pub const CSV_HEADER: &str = "mechanism,instance,n,p,eps,delta,h,grid_index,row_type,trial,\
seed,status,excess_risk,stderr,runtime_ms,private,audit_ok";

impl Row {
    pub fn to_csv(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.mechanism,
            self.instance,
            self.n,
            self.p,
            format_float(self.eps),
            format_float(self.delta),
            if self.h.is_nan() {
                String::new()
            } else {
                format_float(self.h)
            },
            self.grid_index,
            self.row_type,
            self.trial.map(|t| t.to_string()).unwrap_or_default(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.status,
            fmt_opt(self.excess_risk),
            fmt_opt(self.stderr),
            format_float(self.runtime_ms),
            self.private,
            self.audit_ok.map(|b| b.to_string()).unwrap_or_default(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<Row>,
}

impl ExperimentResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.to_csv());
            out.push('\n');
        }
        out
    }

    /// CSV with the wall-clock column masked: every other field is a pure
    /// function of the config and master seed, so this form is byte-identical
    /// across repeated runs.
    pub fn to_csv_deterministic(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let mut masked = r.clone();
            masked.runtime_ms = 0.0;
            out.push_str(&masked.to_csv());
            out.push('\n');
        }
        out
    }

    /// Mean excess risk of the summary row for a grid index.
    pub fn summary_mean(&self, grid_index: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.row_type == "summary" && r.grid_index == grid_index)
            .and_then(|r| r.excess_risk)
    }

    pub fn summary_sem(&self, grid_index: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.row_type == "summary" && r.grid_index == grid_index)
            .and_then(|r| r.stderr)
    }
}

/// Run the full sweep: one row per (grid point, trial) plus a summary row per
/// grid point. Trial errors are recorded in their rows; the sweep continues.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let grid = config.grid();
    let mech_label = config.mechanism.to_string();
    let inst_label = config.instance.label();

    let trials: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..config.trials).map(move |t| (g, t)))
        .collect();

    let results: Vec<Row> = trials
        .par_iter()
        .map(|&(g, t)| {
            let gp = &grid[g];
            let start = std::time::Instant::now();
            let seed = trial_seed(config.seed, g as u64, t as u64);
            let mut rng = trial_rng(config.seed, g as u64, t as u64);
            let outcome = prepare_problem(&config.instance, gp, &mut rng).and_then(|prob| {
                let out = run_mechanism(
                    config.mechanism,
                    &prob.data,
                    &prob.mech_loss,
                    &prob.body,
                    gp.eps,
                    gp.delta,
                    &config.mode,
                    config.ridge,
                    &mut rng,
                )?;
                let er = excess_risk_given(
                    &out.theta,
                    &prob.eval_loss,
                    &prob.data,
                    prob.opt_value,
                    prob.opt_tolerance,
                )?;
                Ok((out, er))
            });
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            let mut row = Row {
                mechanism: mech_label.clone(),
                instance: inst_label.clone(),
                n: gp.n,
                p: gp.p,
                eps: gp.eps,
                delta: gp.delta,
                h: gp.h,
                grid_index: g,
                row_type: "trial",
                trial: Some(t),
                seed: Some(seed),
                status: "ok".into(),
                excess_risk: None,
                stderr: None,
                runtime_ms,
                private: false,
                audit_ok: None,
            };
            match outcome {
                Ok((out, er)) => {
                    row.excess_risk = Some(er);
                    row.private = out.private;
                    row.audit_ok = out.audit.map(|a| a.pass);
                }
                Err(e) => {
                    row.status = format!("error: {e}").replace(',', ";");
                }
            }
            row
        })
        .collect();

    // deterministic order plus per-grid summaries
    let mut rows = Vec::with_capacity(results.len() + grid.len());
    for (g, gp) in grid.iter().enumerate() {
        let mut ok_vals = Vec::new();
        let mut errors = 0usize;
        let mut total_ms = 0.0;
        let mut all_private = true;
        let mut audit_all: Option<bool> = None;
        for (i, &(gg, _)) in trials.iter().enumerate() {
            if gg != g {
                continue;
            }
            let row = &results[i];
            rows.push(row.clone());
            total_ms += row.runtime_ms;
            if row.status == "ok" {
                ok_vals.push(row.excess_risk.unwrap());
                all_private &= row.private;
                if let Some(a) = row.audit_ok {
                    audit_all = Some(audit_all.unwrap_or(true) && a);
                }
            } else {
                errors += 1;
            }
        }
        let mean = if ok_vals.is_empty() {
            None
        } else {
            Some(ok_vals.iter().sum::<f64>() / ok_vals.len() as f64)
        };
        let sem = mean.filter(|_| ok_vals.len() > 1).map(|m| {
            let var = ok_vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
                / (ok_vals.len() - 1) as f64;
            (var / ok_vals.len() as f64).sqrt()
        });
        rows.push(Row {
            mechanism: mech_label.clone(),
            instance: inst_label.clone(),
            n: gp.n,
            p: gp.p,
            eps: gp.eps,
            delta: gp.delta,
            h: gp.h,
            grid_index: g,
            row_type: "summary",
            trial: None,
            seed: None,
            status: if errors == 0 {
                "ok".into()
            } else {
                format!("errors:{errors}")
            },
            excess_risk: mean,
            stderr: sem,
            runtime_ms: total_ms,
            private: all_private,
            audit_ok: audit_all,
        });
    }
    Ok(ExperimentResult { rows })
}

/// Feature distribution for generalization measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureDist {
    /// Independent `+-1/sqrt(p)` coordinates.
    SignVectors,
    /// Independent Gaussian coordinates scaled to unit expected norm.
    Gaussian,
}

impl FeatureDist {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "signs" => Ok(FeatureDist::SignVectors),
            "gaussian" => Ok(FeatureDist::Gaussian),
            other => Err(Error::Parse(format!(
                "unknown distribution {other:?}; expected signs or gaussian"
            ))),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, p: usize, rng: &mut R) -> Vec<f64> {
        use rand_distr::Distribution;
        let s = 1.0 / (p as f64).sqrt();
        match self {
            FeatureDist::SignVectors => (0..p)
                .map(|_| if rng.gen::<bool>() { s } else { -s })
                .collect(),
            FeatureDist::Gaussian => (0..p)
                .map(|_| {
                    let v: f64 = rand_distr::StandardNormal.sample(rng);
                    v * s
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneralizationRow {
    pub mechanism: String,
    pub dist: &'static str,
    pub n: usize,
    pub p: usize,
    pub eps: f64,
    pub delta: f64,
    pub ridge: f64,
    pub trial: usize,
    pub seed: u64,
    /// Excess empirical risk on the training set (total-loss units).
    pub empirical_excess: f64,
    /// Per-example excess true risk estimated on the held-out sample.
    pub true_excess: f64,
    /// `true_excess - empirical_excess / n`.
    pub generalization_gap: f64,
    /// `(ridge/2) |C|_2^2`, the regularization term of the excess-risk
    /// decomposition.
    pub ridge_term: f64,
    /// Reference value of the square-root-rate generalization bound.
    pub bound_value: f64,
}

pub const GENERALIZATION_CSV_HEADER: &str =
    "mechanism,dist,n,p,eps,delta,ridge,trial,seed,empirical_excess,true_excess,\
generalization_gap,ridge_term,bound_value";

impl GeneralizationRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.mechanism,
            self.dist,
            self.n,
            self.p,
            format_float(self.eps),
            format_float(self.delta),
            format_float(self.ridge),
            self.trial,
            self.seed,
            format_float(self.empirical_excess),
            format_float(self.true_excess),
            format_float(self.generalization_gap),
            format_float(self.ridge_term),
            format_float(self.bound_value),
        )
    }
}

#[derive(Debug, Clone)]
pub struct GeneralizationConfig {
    pub mechanism: MechanismId,
    pub dist: FeatureDist,
    pub loss: Loss,
    pub body: ConvexBody,
    pub n: usize,
    pub p: usize,
    pub eps: f64,
    pub delta: f64,
    /// Per-example ridge added to the trained loss (0 disables).
    pub ridge: f64,
    pub trials: usize,
    pub eval_samples: usize,
    pub seed: u64,
    pub mode: RunMode,
}

/// Train on `n` fresh samples per trial, then estimate the true excess risk
/// on a large held-out sample: held-out mean loss of the trained point minus
/// the held-out empirical minimum over the body.
pub fn generalization_report(config: &GeneralizationConfig) -> Result<Vec<GeneralizationRow>> {
    if config.trials == 0 || config.eval_samples == 0 {
        return Err(Error::invalid("trials and eval_samples must be positive"));
    }
    let out_radius = config
        .body
        .bounding_half_widths()
        .iter()
        .map(|w| w * w)
        .sum::<f64>()
        .sqrt();
    let trained_loss = if config.ridge > 0.0 {
        config.loss.clone().with_ridge(config.ridge, out_radius)?
    } else {
        config.loss.clone()
    };

    // Shared held-out sample: one large draw per config keeps trial noise on
    // the training side where it belongs.
    let mut eval_rng = trial_rng(config.seed, u64::MAX, 0);
    let eval_data = sample_dataset(config, config.eval_samples, &mut eval_rng)?;
    let settings = SolverSettings::default();
    let eval_min = minimize(&config.loss, &eval_data, &config.body, &settings)?;
    let eval_n = config.eval_samples as f64;

    let diam = config.body.l2_diameter();
    let ridge_term = 0.5 * config.ridge * diam * diam;
    // square-root-rate reference bound at confidence 0.9
    let gamma = 0.1;
    let bound_value = (config.p as f64).sqrt()
        * (config.loss.lipschitz() + diam)
        * diam
        * (config.n as f64).ln().powf(0.25)
        / (config.n as f64 * config.eps * gamma).sqrt();

    let rows: Vec<Result<GeneralizationRow>> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(config.seed, 0, t as u64);
            let mut rng = trial_rng(config.seed, 0, t as u64);
            let train = sample_dataset(config, config.n, &mut rng)?;
            let out = run_mechanism(
                config.mechanism,
                &train,
                &trained_loss,
                &config.body,
                config.eps,
                config.delta,
                &config.mode,
                None,
                &mut rng,
            )?;
            let train_min = minimize(&config.loss, &train, &config.body, &settings)?;
            let total = TotalLoss::new(&config.loss, &train);
            let tol = settings.resolve_tolerance(&total, &config.body);
            let empirical_excess =
                excess_risk_given(&out.theta, &config.loss, &train, train_min.value, tol)?;
            let true_excess = (config.loss.total(&out.theta, &eval_data)? - eval_min.value)
                .max(0.0)
                / eval_n;
            Ok(GeneralizationRow {
                mechanism: config.mechanism.to_string(),
                dist: match config.dist {
                    FeatureDist::SignVectors => "signs",
                    FeatureDist::Gaussian => "gaussian",
                },
                n: config.n,
                p: config.p,
                eps: config.eps,
                delta: config.delta,
                ridge: config.ridge,
                trial: t,
                seed,
                empirical_excess,
                true_excess,
                generalization_gap: true_excess - empirical_excess / config.n as f64,
                ridge_term,
                bound_value,
            })
        })
        .collect();
    rows.into_iter().collect()
}

fn sample_dataset(
    config: &GeneralizationConfig,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Dataset> {
    // labels, when needed, from a fixed separator with 10% flip noise
    let sep: Vec<f64> = {
        let mut dir = vec![0.0; config.p];
        dir[0] = 1.0;
        dir
    };
    let recs: Vec<Record> = (0..n)
        .map(|_| {
            let x = config.dist.sample(config.p, rng);
            if config.loss.requires_label() {
                let margin = linalg::dot(&sep, &x);
                let flip = rng.gen::<f64>() < 0.1;
                let y = if (margin >= 0.0) ^ flip { 1.0 } else { -1.0 };
                Record::labeled(x, y)
            } else {
                Record::plain(x)
            }
        })
        .collect();
    Dataset::new(recs)
}

/// Minimal static SVG line chart (one polyline per series, linear axes).
pub fn render_line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const M: f64 = 60.0;
    let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, pts)| pts.clone()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in &all {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !x0.is_finite() || x0 == x1 {
        x1 = x0 + 1.0;
    }
    if !y0.is_finite() || y0 == y1 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{title}</text>\n\
         <line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{x_label}</text>\n\
         <text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" \
         transform=\"rotate(-90 16 {})\">{y_label}</text>\n",
        W / 2.0,
        H - M,
        W - M,
        H - M,
        H - M,
        W / 2.0,
        H - 16.0,
        H / 2.0,
        H / 2.0,
    );
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = colors[i % colors.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{label}</text>\n",
            path.join(" "),
            W - M + 4.0,
            M + 16.0 * i as f64,
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{M}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n",
        H - M + 14.0,
        format_sig(x0),
        W - M,
        H - M + 14.0,
        format_sig(x1),
        M - 4.0,
        H - M,
        format_sig(y0),
        M - 4.0,
        M + 4.0,
        format_sig(y1),
    ));
    svg.push_str("</svg>\n");
    svg
}

fn format_sig(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 0.01 && v.abs() < 10_000.0 {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}
