//! Hard-instance generators: packing datasets over `{-1/sqrt(p), 1/sqrt(p)}^p`
//! for 1-way marginals, the linear- and quadratic-loss families built on
//! them, and the 1-D one-sided-loss datasets on which huberized objective
//! perturbation provably incurs large excess risk.

use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::linalg;
use crate::losses::{Dataset, Loss, Record};
use rand::Rng;

/// Default number of family members kept per instance family.
pub const DEFAULT_FAMILY_SIZE: usize = 64;

/// Minimum pairwise distance of packing points.
pub const PACKING_MIN_DISTANCE: f64 = 0.125;

/// Well-separated sign vectors in `{-1/sqrt(p), +1/sqrt(p)}^p`.
#[derive(Debug, Clone)]
pub struct PackingFamily {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub min_pairwise_distance: f64,
    /// Rejected candidates during construction (expected 0 for `K << 2^{p/2}`).
    pub retries: usize,
}

/// Sample `k` random sign vectors, resampling until all pairwise distances
/// reach 1/8. The comparison budget is `1000 k^2`; exceeding it fails with
/// `PackingFailure`.
pub fn packing_points<R: Rng + ?Sized>(p: usize, k: usize, rng: &mut R) -> Result<PackingFamily> {
    if p == 0 || k == 0 {
        return Err(Error::invalid("packing needs p >= 1 and k >= 1"));
    }
    if k > 1 << 16 {
        return Err(Error::invalid("packing capped at 2^16 points"));
    }
    let cap = (2.0f64).powf(p as f64 / 2.0);
    if (k as f64) > cap {
        return Err(Error::invalid(format!(
            "packing of {k} points needs k <= 2^(p/2) = {cap:.0} at p = {p}"
        )));
    }
    let scale = 1.0 / (p as f64).sqrt();
    let draw = |rng: &mut R| -> Vec<f64> {
        (0..p)
            .map(|_| if rng.gen::<bool>() { scale } else { -scale })
            .collect()
    };
    let budget = 1000usize.saturating_mul(k).saturating_mul(k);
    let mut comparisons = 0usize;
    let mut retries = 0usize;
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut min_dist = f64::INFINITY;
    while points.len() < k {
        let cand = draw(rng);
        let mut ok = true;
        for q in &points {
            comparisons += 1;
            if comparisons > budget {
                return Err(Error::PackingFailure(format!(
                    "exceeded {budget} comparisons placing {k} points in dimension {p}; \
                     try a smaller family"
                )));
            }
            let d = linalg::dist(&cand, q);
            if d < PACKING_MIN_DISTANCE {
                ok = false;
                break;
            }
            min_dist = min_dist.min(d);
        }
        if ok {
            points.push(cand);
        } else {
            retries += 1;
        }
    }
    Ok(PackingFamily {
        dim: p,
        points,
        min_pairwise_distance: if k > 1 { min_dist } else { f64::INFINITY },
        retries,
    })
}

/// Which branch of the construction produced the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceRegime {
    /// `n <= n*`: n copies of one packing point.
    Pure,
    /// `n > n*`: n* packing copies padded with cancelling `+-c` fillers.
    Padded,
}

/// One sampled member of a hard-instance family, with its closed-form
/// optimum data.
#[derive(Debug, Clone)]
pub struct HardInstance {
    pub data: Dataset,
    pub loss: Loss,
    pub body: ConvexBody,
    /// Minimizer of the total loss over the body.
    pub optimum: Vec<f64>,
    /// `M = ||sum_i d_i||_2`.
    pub sum_norm: f64,
    pub regime: InstanceRegime,
    /// Number of packing copies (`min(n, n*)`).
    pub n_star: usize,
}

/// Threshold `n* = max(1, round(p / (20 eps)))` between the pure and padded
/// regimes.
pub fn packing_threshold(p: usize, eps: f64) -> usize {
    ((p as f64 / (20.0 * eps)).round() as usize).max(1)
}

fn build_packing_dataset<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    eps: f64,
    rng: &mut R,
) -> Result<(Dataset, f64, InstanceRegime, usize)> {
    if n == 0 || p == 0 || !(eps > 0.0) {
        return Err(Error::invalid("instance needs n, p >= 1 and eps > 0"));
    }
    let k = ((2.0f64).powf(p as f64 / 2.0).floor() as usize).clamp(1, DEFAULT_FAMILY_SIZE);
    let family = packing_points(p, k, rng)?;
    let n_star = packing_threshold(p, eps).min(n);
    let scale = 1.0 / (p as f64).sqrt();
    let filler = vec![scale; p]; // all-plus padding vector

    // Retry the member draw if the padded sum degenerates (the member can
    // cancel the odd filler).
    for _ in 0..64 {
        let member = family.points[rng.gen_range(0..family.points.len())].clone();
        let mut records: Vec<Record> = Vec::with_capacity(n);
        for _ in 0..n_star {
            records.push(Record::plain(member.clone()));
        }
        let pad = n - n_star;
        let plus = pad.div_ceil(2);
        for i in 0..pad {
            let sign = if i < plus { 1.0 } else { -1.0 };
            records.push(Record::plain(filler.iter().map(|v| sign * v).collect()));
        }
        let data = Dataset::new(records)?;
        let sum_norm = linalg::norm(&data.feature_sum());
        if sum_norm >= 0.5 {
            let regime = if n <= n_star {
                InstanceRegime::Pure
            } else {
                InstanceRegime::Padded
            };
            return Ok((data, sum_norm, regime, n_star));
        }
    }
    Err(Error::NumericalFailure(
        "could not draw a family member with non-degenerate feature sum".into(),
    ))
}

/// Linear-loss hard instance on the unit ball: a uniformly chosen family
/// member with `theta* = sum d_i / ||sum d_i||` and
/// `M in [min(n, n*) - 1, min(n, n*) + 1]`.
pub fn linear_instance<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    eps: f64,
    rng: &mut R,
) -> Result<HardInstance> {
    let (data, sum_norm, regime, n_star) = build_packing_dataset(n, p, eps, rng)?;
    let sum = data.feature_sum();
    let optimum: Vec<f64> = sum.iter().map(|v| v / sum_norm).collect();
    Ok(HardInstance {
        data,
        loss: Loss::linear(),
        body: ConvexBody::unit_ball(p)?,
        optimum,
        sum_norm,
        regime,
        n_star,
    })
}

/// Squared-distance hard instance on the unit ball: same dataset family,
/// `theta* = q(D)`.
pub fn quadratic_instance<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    eps: f64,
    rng: &mut R,
) -> Result<HardInstance> {
    let (data, sum_norm, regime, n_star) = build_packing_dataset(n, p, eps, rng)?;
    let optimum = data.mean();
    Ok(HardInstance {
        data,
        loss: Loss::squared_distance(1.0),
        body: ConvexBody::unit_ball(p)?,
        optimum,
        sum_norm,
        regime,
        n_star,
    })
}

/// The two 1-D datasets of the huberization counterexample, over the interval
/// body `[-2, 2]` with the one-sided residual loss:
/// `D1` has `round(n/3)` records `(x=-1, y=1)` and the rest `(x=1, y=-1)`;
/// `D2` has `max(round(n/2 - 1/(32h)), 0)` records `(x=-1, y=1)` and the rest
/// `(x=1, y=1)`.
pub fn huberization_instances(n: usize, h: f64) -> Result<(Dataset, Dataset)> {
    if n == 0 || !(h > 0.0) {
        return Err(Error::invalid("huberization instances need n >= 1 and h > 0"));
    }
    let third = ((n as f64) / 3.0).round() as usize;
    let mut d1 = Vec::with_capacity(n);
    for _ in 0..third {
        d1.push(Record::labeled(vec![-1.0], 1.0));
    }
    for _ in third..n {
        d1.push(Record::labeled(vec![1.0], -1.0));
    }

    let k1f = n as f64 / 2.0 - 1.0 / (32.0 * h);
    let k1 = (k1f.round().max(0.0) as usize).min(n);
    let mut d2 = Vec::with_capacity(n);
    for _ in 0..k1 {
        d2.push(Record::labeled(vec![-1.0], 1.0));
    }
    for _ in k1..n {
        d2.push(Record::labeled(vec![1.0], 1.0));
    }
    Ok((Dataset::new(d1)?, Dataset::new(d2)?))
}

/// Body on which the huberization instances are optimized.
pub fn huberization_body() -> ConvexBody {
    ConvexBody::interval(2.0).expect("static interval")
}

/// `||estimate - q(D)||_2` where `q(D)` is the exact 1-way marginal.
pub fn marginal_error(estimate: &[f64], data: &Dataset) -> Result<f64> {
    if estimate.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: estimate.len(),
        });
    }
    Ok(linalg::dist(estimate, &data.mean()))
}
