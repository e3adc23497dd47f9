//! Private ERM mechanisms: noisy stochastic gradient descent, exponential
//! sampling (exact reference and efficient grid-walk variant), output
//! perturbation with localization, objective perturbation, and the
//! high-probability boosting wrapper.
//!
//! Every run returns a [`MechOutput`]: the private point plus an exact
//! rational budget ledger, a privacy label (false whenever a heuristic step
//! budget or a test-only noise override was used), and free-form notes the
//! harness copies into reports.

mod boost;
mod exp_mech;
mod localize;
mod noise_gd;
mod obj_pert;

pub use boost::{boost_high_prob, SubMechanism};
pub use exp_mech::{
    exp_mech_efficient, exp_mech_exact, EffExpMech, ExactExpMech, ExactMechLimits,
};
pub use localize::{
    gamma_norm_noise, gauss_localization_radius, gauss_out_pert_localize, localized_exp_mech,
    out_pert, out_pert_with_noise, InnerMech, OutPertResult, RecenteredCap,
};
pub use noise_gd::{noise_gd, GradientMode, LearningRate, NoiseGdConfig};
pub use obj_pert::{gaussian_obj_noise, objective_perturbation, ObjPertNoise, ObjPertReport};

use crate::privacy::NoiseGdAudit;

/// One stage of budget spending, stored as exact fractions of the declared
/// `(epsilon, delta)`.
#[derive(Debug, Clone)]
pub struct BudgetStage {
    pub label: &'static str,
    /// Fraction of the declared epsilon spent, as `num/den`.
    pub eps_frac: (u64, u64),
    /// Fraction of the declared delta spent, as `num/den`.
    pub delta_frac: (u64, u64),
}

/// Exact-arithmetic ledger of per-stage budget fractions.
#[derive(Debug, Clone, Default)]
pub struct BudgetLedger {
    stages: Vec<BudgetStage>,
}

fn frac_sum_le_one(fracs: impl Iterator<Item = (u64, u64)>) -> bool {
    // sum of num/den <= 1 over a common denominator, in integer arithmetic
    let mut num: u128 = 0;
    let mut den: u128 = 1;
    for (n, d) in fracs {
        assert!(d > 0);
        let (n, d) = (n as u128, d as u128);
        num = num * d + n * den;
        den *= d;
        let g = gcd(num.max(1), den);
        num /= g;
        den /= g;
    }
    num <= den
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

impl BudgetLedger {
    pub fn single(label: &'static str) -> Self {
        let mut ledger = BudgetLedger::default();
        ledger.push(label, (1, 1), (1, 1));
        ledger
    }

    pub fn push(&mut self, label: &'static str, eps_frac: (u64, u64), delta_frac: (u64, u64)) {
        self.stages.push(BudgetStage {
            label,
            eps_frac,
            delta_frac,
        });
    }

    pub fn stages(&self) -> &[BudgetStage] {
        &self.stages
    }

    /// True when the recorded stage fractions sum to at most the declared
    /// budget in both coordinates (exact integer arithmetic).
    pub fn within_budget(&self) -> bool {
        frac_sum_le_one(self.stages.iter().map(|s| s.eps_frac))
            && frac_sum_le_one(self.stages.iter().map(|s| s.delta_frac))
    }
}

/// Result of one mechanism run.
#[derive(Debug, Clone)]
pub struct MechOutput {
    pub theta: Vec<f64>,
    pub budget: BudgetLedger,
    /// True when the run provides its declared differential-privacy
    /// guarantee: strict sampler budgets, no noise overrides.
    pub private: bool,
    pub notes: Vec<String>,
    /// Calibration audit, for the gradient-descent mechanisms.
    pub audit: Option<NoiseGdAudit>,
}

impl MechOutput {
    pub(crate) fn new(theta: Vec<f64>, budget: BudgetLedger) -> Self {
        MechOutput {
            theta,
            budget,
            private: true,
            notes: Vec::new(),
            audit: None,
        }
    }

    pub(crate) fn non_private(mut self, note: impl Into<String>) -> Self {
        self.private = false;
        self.notes.push(note.into());
        self
    }
}
