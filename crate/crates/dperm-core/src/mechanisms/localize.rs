//! Output perturbation and localization for strongly convex losses.
//!
//! The localization step releases a noisy minimizer `theta_0` and the small
//! ball-intersection `C_0` around it, then runs a generic private optimizer
//! on `C_0` at the remaining budget. The strong convexity of the loss keeps
//! the minimizer's sensitivity, and hence the required noise and the
//! localized diameter, of order `Lp/(Delta eps n)`.

use super::exp_mech::{ExactExpMech, ExactMechLimits};
use super::noise_gd::{noise_gd, NoiseGdConfig};
use super::{BudgetLedger, MechOutput};
use crate::error::{Error, Result};
use crate::geometry::{uniform_direction, ConvexBody, ConvexSet};
use crate::linalg;
use crate::losses::{Dataset, Loss, TotalLoss};
use crate::objective::{Objective, Recentered, Scaled};
use crate::privacy::PrivacyParams;
use crate::sampler::{eff_samp, SamplerOptions, WeightCache};
use crate::solver::{minimize, SolverSettings};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};

/// Norm drawn from `Gamma(shape p, scale)` with a uniform direction, i.e.
/// density proportional to `exp(-||b|| / scale)`.
pub fn gamma_norm_noise<R: Rng + ?Sized>(p: usize, scale: f64, rng: &mut R) -> Result<Vec<f64>> {
    let gamma = Gamma::new(p as f64, scale).map_err(|e| Error::invalid(e.to_string()))?;
    let norm = gamma.sample(rng);
    let mut dir = uniform_direction(p, rng);
    linalg::scale(&mut dir, norm);
    Ok(dir)
}

#[derive(Debug, Clone)]
pub struct OutPertResult {
    /// Noisy projected minimizer.
    pub theta0: Vec<f64>,
    /// `C_0 = { theta in C : ||theta - theta0|| <= radius }`.
    pub localized: ConvexBody,
    pub radius: f64,
    /// Exact minimizer (kept for diagnostics; not a private quantity).
    pub theta_star: Vec<f64>,
    pub noise_norm: f64,
}

/// Output perturbation with an explicit noise vector (deterministic core,
/// used directly by tests).
pub fn out_pert_with_noise(
    data: &Dataset,
    loss: &Loss,
    body: &ConvexBody,
    eps: f64,
    zeta: f64,
    noise: &[f64],
) -> Result<OutPertResult> {
    let delta_sc = loss.strong_convexity();
    if delta_sc <= 0.0 {
        return Err(Error::PreconditionViolation(
            "output perturbation requires a strongly convex loss".into(),
        ));
    }
    if !(eps > 0.0) || !(zeta > 0.0) {
        return Err(Error::invalid("output perturbation needs eps > 0 and zeta > 0"));
    }
    let n = data.len() as f64;
    let l = loss.lipschitz();
    let settings = SolverSettings::default()
        .with_tolerance(1e-9 * n * l * body.l2_diameter());
    let min = minimize(loss, data, body, &settings)?;
    if !min.certified {
        return Err(Error::NumericalFailure(
            "exact solver did not certify the minimizer".into(),
        ));
    }
    let theta0 = body.project(&linalg::add(&min.point, noise));
    let p = body.dim() as f64;
    let radius = zeta * 2.0 * l * p / (delta_sc * eps * n);
    let localized = body.intersect_ball(&theta0, radius)?;
    Ok(OutPertResult {
        theta0,
        localized,
        radius,
        theta_star: min.point,
        noise_norm: linalg::norm(noise),
    })
}

/// Output perturbation: noise density `prop exp(-(n Delta eps / 2L) ||b||)`,
/// i.e. `||b|| ~ Gamma(p, 2L/(n Delta eps))`.
pub fn out_pert<R: Rng + ?Sized>(
    data: &Dataset,
    loss: &Loss,
    body: &ConvexBody,
    eps: f64,
    zeta: f64,
    rng: &mut R,
) -> Result<OutPertResult> {
    let delta_sc = loss.strong_convexity();
    if delta_sc <= 0.0 {
        return Err(Error::PreconditionViolation(
            "output perturbation requires a strongly convex loss".into(),
        ));
    }
    let scale = 2.0 * loss.lipschitz() / (data.len() as f64 * delta_sc * eps);
    let noise = gamma_norm_noise(body.dim(), scale, rng)?;
    out_pert_with_noise(data, loss, body, eps, zeta, &noise)
}

/// Inner optimizer run on the localized set.
#[derive(Debug, Clone, Copy)]
pub enum InnerMech {
    /// Exact exponential mechanism directly on `C_0` (no isotropy needed).
    Exact(ExactMechLimits),
    /// Efficient sampler on `C_0` recentered at `theta_0` and rescaled so its
    /// inscribed ball is the unit ball.
    Efficient(SamplerOptions),
}

/// The localized cap recentered and rescaled into isotropic position:
/// `phi -> theta0 + scale * phi` maps the unit ball into `C_0`.
pub struct RecenteredCap {
    cap: ConvexBody,
    center: Vec<f64>,
    scale: f64,
}

impl RecenteredCap {
    pub fn new(cap: ConvexBody, center: Vec<f64>, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::invalid("recentering scale must be positive"));
        }
        Ok(RecenteredCap { cap, center, scale })
    }

    pub fn to_original(&self, phi: &[f64]) -> Vec<f64> {
        phi.iter()
            .zip(&self.center)
            .map(|(v, c)| c + self.scale * v)
            .collect()
    }

    fn from_original(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.center)
            .map(|(v, c)| (v - c) / self.scale)
            .collect()
    }
}

impl ConvexSet for RecenteredCap {
    fn dim(&self) -> usize {
        self.cap.dim()
    }
    fn contains(&self, x: &[f64]) -> bool {
        self.cap.contains(&self.to_original(x))
    }
    fn project(&self, x: &[f64]) -> Vec<f64> {
        // projection commutes with translation and uniform scaling
        self.from_original(&self.cap.project(&self.to_original(x)))
    }
    fn l2_diameter(&self) -> f64 {
        self.cap.l2_diameter() / self.scale
    }
    fn bounding_half_widths(&self) -> Vec<f64> {
        self.axis_extents()
            .iter()
            .map(|(lo, hi)| lo.abs().max(hi.abs()))
            .collect()
    }
    fn axis_extents(&self) -> Vec<(f64, f64)> {
        self.cap
            .axis_extents()
            .iter()
            .zip(&self.center)
            .map(|((lo, hi), c)| ((lo - c) / self.scale, (hi - c) / self.scale))
            .collect()
    }
    fn inscribed_radius_at(&self, x: &[f64]) -> f64 {
        self.cap.inscribed_radius_at(&self.to_original(x)) / self.scale
    }
}

/// Localization composition for strongly convex losses: output perturbation
/// at `eps/2` with radius parameter `zeta = 3 ln n`, then an exponential
/// mechanism at `eps/2` on the localized set.
pub fn localized_exp_mech<R: Rng + ?Sized>(
    data: &Dataset,
    loss: &Loss,
    body: &ConvexBody,
    eps: f64,
    inner: &InnerMech,
    rng: &mut R,
) -> Result<MechOutput> {
    if data.len() < 2 {
        return Err(Error::invalid("localization needs n >= 2"));
    }
    let zeta = 3.0 * (data.len() as f64).ln();
    let stage = out_pert(data, loss, body, eps / 2.0, zeta, rng)?;

    let mut budget = BudgetLedger::default();
    budget.push("output perturbation", (1, 2), (0, 1));
    budget.push("exponential mechanism", (1, 2), (0, 1));

    match inner {
        InnerMech::Exact(limits) => {
            let mech = ExactExpMech::build(data, loss, &stage.localized, eps / 2.0, limits)?;
            let theta = mech.sample(&stage.localized, rng);
            let mut out = MechOutput::new(theta, budget);
            out.notes.push(format!(
                "localized radius {:.3e}, lattice {} points",
                stage.radius,
                mech.support_size()
            ));
            Ok(out)
        }
        InnerMech::Efficient(opts) => {
            // isotropic position: recenter at theta0 and rescale by the
            // inscribed-ball radius there
            let rho = body
                .inscribed_radius_at(&stage.theta0)
                .min(stage.radius);
            if rho <= 1e-9 {
                return Err(Error::NumericalFailure(
                    "noisy minimizer landed on the boundary; localized cap has no \
                     inscribed ball (use the exact inner mechanism)"
                        .into(),
                ));
            }
            let cap = RecenteredCap::new(stage.localized.clone(), stage.theta0.clone(), rho)?;
            let total = TotalLoss::new(loss, data);
            let half_eps = eps / 2.0;
            let scale = half_eps / (6.0 * loss.lipschitz() * stage.localized.l2_diameter());
            let scaled = Scaled {
                inner: &total,
                scale,
            };
            let recentered = Recentered {
                inner: &scaled,
                center: stage.theta0.clone(),
                scale: rho,
            };
            let eta = recentered.lipschitz();
            let mut cache = WeightCache::new();
            let phi = eff_samp(&cap, &recentered, eta, half_eps / 3.0, opts, &mut cache, rng)?;
            let theta = stage.localized.project(&cap.to_original(&phi));
            let mut out = MechOutput::new(theta, budget);
            out.notes.push(format!(
                "localized radius {:.3e}, rescale {rho:.3e}",
                stage.radius
            ));
            if !opts.mode.is_strict() {
                out = out.non_private("heuristic sampler step budget");
            }
            Ok(out)
        }
    }
}

/// Radius of the Gaussian localized set, `zeta * sigma0 * sqrt(p)` with
/// `sigma0^2 = 4 L^2 ln(1/delta) / (Delta^2 eps^2 n^2)`.
pub fn gauss_localization_radius(
    l: f64,
    delta_sc: f64,
    n: usize,
    eps: f64,
    delta: f64,
    p: usize,
    zeta: f64,
) -> f64 {
    let sigma0 =
        (4.0 * l * l * (1.0 / delta).ln() / (delta_sc * delta_sc * eps * eps * (n * n) as f64))
            .sqrt();
    zeta * sigma0 * (p as f64).sqrt()
}

/// `(eps, delta)` localization: Gaussian output perturbation at
/// `(eps/2, delta/2)` with `zeta = sqrt(3 ln n)`, then the supplied
/// noisy-gradient configuration on the localized set at `(eps/2, delta/2)`.
pub fn gauss_out_pert_localize<R: Rng + ?Sized>(
    data: &Dataset,
    loss: &Loss,
    body: &ConvexBody,
    privacy: PrivacyParams,
    inner: &NoiseGdConfig,
    rng: &mut R,
) -> Result<MechOutput> {
    privacy.require_positive_delta()?;
    let delta_sc = loss.strong_convexity();
    if delta_sc <= 0.0 {
        return Err(Error::PreconditionViolation(
            "Gaussian localization requires a strongly convex loss".into(),
        ));
    }
    if data.len() < 2 {
        return Err(Error::invalid("localization needs n >= 2"));
    }
    let n = data.len();
    let (half_eps, half_delta) = (privacy.epsilon / 2.0, privacy.delta / 2.0);
    let l = loss.lipschitz();
    let sigma0 = (4.0 * l * l * (1.0 / half_delta).ln()
        / (delta_sc * delta_sc * half_eps * half_eps * (n * n) as f64))
        .sqrt();
    let normal = Normal::new(0.0, sigma0).map_err(|e| Error::invalid(e.to_string()))?;
    let noise: Vec<f64> = (0..body.dim()).map(|_| normal.sample(rng)).collect();

    let settings =
        SolverSettings::default().with_tolerance(1e-9 * n as f64 * l * body.l2_diameter());
    let min = minimize(loss, data, body, &settings)?;
    let theta0 = body.project(&linalg::add(&min.point, &noise));
    let zeta = (3.0 * (n as f64).ln()).sqrt();
    let radius = zeta * sigma0 * (body.dim() as f64).sqrt();
    let localized = body.intersect_ball(&theta0, radius)?;

    let stage2 = noise_gd(
        data,
        loss,
        &localized,
        PrivacyParams::new(half_eps, half_delta)?,
        inner,
        rng,
    )?;

    let mut budget = BudgetLedger::default();
    budget.push("gaussian output perturbation", (1, 2), (1, 2));
    budget.push("noisy sgd", (1, 2), (1, 2));
    let mut out = MechOutput::new(stage2.theta, budget);
    out.audit = stage2.audit;
    out.private = stage2.private;
    out.notes = stage2.notes;
    out.notes.push(format!("localized radius {radius:.3e}"));
    Ok(out)
}
