//! Expectation-to-high-probability boosting: run the underlying mechanism
//! `k = ceil(ln(2/rho))` times at `(eps/(2k), delta/k)` and select among the
//! candidates with a finite exponential mechanism at the remaining `eps/2`.
//! The even epsilon split between runs and selection keeps the composed
//! budget within `(eps, delta)`.

use super::{BudgetLedger, MechOutput};
use crate::error::{Error, Result};
use crate::geometry::ConvexSet;
use crate::losses::{Dataset, Loss};
use rand::{Rng, RngCore};

/// A configured mechanism runnable at a given sub-budget.
pub type SubMechanism<'a> =
    dyn FnMut(f64, f64, &mut dyn RngCore) -> Result<Vec<f64>> + 'a;

pub fn boost_high_prob<R: Rng>(
    run: &mut SubMechanism<'_>,
    data: &Dataset,
    loss: &Loss,
    set: &dyn ConvexSet,
    eps: f64,
    delta: f64,
    rho: f64,
    rng: &mut R,
) -> Result<MechOutput> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid(format!("rho must lie in (0,1), got {rho}")));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let k = ((2.0 / rho).ln().ceil() as u64).max(1);
    let run_eps = eps / (2 * k) as f64;
    let run_delta = delta / k as f64;

    let mut budget = BudgetLedger::default();
    let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(k as usize);
    let mut any_note = Vec::new();
    for i in 0..k {
        let theta = run(run_eps, run_delta, rng)?;
        if theta.len() != set.dim() {
            return Err(Error::DimensionMismatch {
                expected: set.dim(),
                got: theta.len(),
            });
        }
        candidates.push(theta);
        budget.push("boosted run", (1, 2 * k), (1, k));
        if i == 0 {
            any_note.push(format!("boosting with k = {k} candidates"));
        }
    }

    // Finite exponential mechanism over the candidates: utility -L(theta; D),
    // sensitivity L |C|_2, at budget eps/2.
    let sens = loss.lipschitz() * set.l2_diameter();
    let exps: Vec<f64> = candidates
        .iter()
        .map(|t| loss.total(t, data))
        .collect::<Result<Vec<_>>>()?
        .iter()
        .map(|v| -(eps / 2.0) * v / (2.0 * sens))
        .collect();
    let m = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = exps.iter().map(|e| (e - m).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u: f64 = rng.gen::<f64>() * total;
    let mut chosen = candidates.len() - 1;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            chosen = i;
            break;
        }
        u -= w;
    }
    budget.push("candidate selection", (1, 2), (0, 1));

    let mut out = MechOutput::new(candidates.swap_remove(chosen), budget);
    out.notes = any_note;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexBody;
    use crate::losses::Record;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_candidate_is_returned() {
        // rho large enough that k = 1
        let data = Dataset::new(vec![Record::plain(vec![0.5, 0.0])]).unwrap();
        let loss = Loss::linear();
        let ball = ConvexBody::unit_ball(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(601);
        let mut runner =
            |_e: f64, _d: f64, _r: &mut dyn RngCore| -> Result<Vec<f64>> { Ok(vec![0.25, 0.1]) };
        let out = boost_high_prob(&mut runner, &data, &loss, &ball, 1.0, 1e-6, 0.75, &mut rng)
            .unwrap();
        assert_eq!(out.theta, vec![0.25, 0.1]);
        assert!(out.budget.within_budget());
    }

    #[test]
    fn equal_losses_select_uniformly() {
        // zero-sum dataset makes the linear total loss identically zero, so
        // all candidates tie and selection must be uniform
        let s = 1.0 / (2.0f64).sqrt();
        let data = Dataset::new(vec![
            Record::plain(vec![s, s]),
            Record::plain(vec![-s, -s]),
        ])
        .unwrap();
        let loss = Loss::linear();
        let ball = ConvexBody::unit_ball(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(607);
        // k = ceil(ln(2/0.05)) = 4 distinct candidates per boosted run
        let cands = [
            vec![0.5, 0.0],
            vec![-0.5, 0.0],
            vec![0.0, 0.5],
            vec![0.0, -0.5],
        ];
        let mut counts = [0usize; 4];
        let trials = 20_000;
        for _ in 0..trials {
            let mut i = 0usize;
            let mut runner = |_e: f64, _d: f64, _r: &mut dyn RngCore| -> Result<Vec<f64>> {
                let c = cands[i % 4].clone();
                i += 1;
                Ok(c)
            };
            let out =
                boost_high_prob(&mut runner, &data, &loss, &ball, 1.0, 1e-6, 0.05, &mut rng)
                    .unwrap();
            let j = cands.iter().position(|c| *c == out.theta).unwrap();
            counts[j] += 1;
        }
        let expect = trials as f64 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expect).powi(2) / expect)
            .sum();
        const CHI2_3_999: f64 = 16.266;
        assert!(chi2 < CHI2_3_999, "chi2 {chi2}, counts {counts:?}");
    }

    #[test]
    fn budget_splits_exactly() {
        let data = Dataset::new(vec![Record::plain(vec![0.1, 0.1])]).unwrap();
        let loss = Loss::linear();
        let ball = ConvexBody::unit_ball(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(613);
        let mut budgets = Vec::new();
        let mut runner = |e: f64, d: f64, _r: &mut dyn RngCore| -> Result<Vec<f64>> {
            budgets.push((e, d));
            Ok(vec![0.0, 0.0])
        };
        let out = boost_high_prob(&mut runner, &data, &loss, &ball, 1.0, 1e-5, 0.01, &mut rng)
            .unwrap();
        // k = ceil(ln 200) = 6
        assert_eq!(budgets.len(), 6);
        for (e, d) in budgets {
            assert!((e - 1.0 / 12.0).abs() < 1e-15);
            assert!((d - 1e-5 / 6.0).abs() < 1e-20);
        }
        assert!(out.budget.within_budget());
    }

    #[test]
    fn rejects_bad_rho() {
        let data = Dataset::new(vec![Record::plain(vec![0.0, 0.0])]).unwrap();
        let loss = Loss::linear();
        let ball = ConvexBody::unit_ball(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(617);
        let mut runner =
            |_e: f64, _d: f64, _r: &mut dyn RngCore| -> Result<Vec<f64>> { Ok(vec![0.0, 0.0]) };
        assert!(
            boost_high_prob(&mut runner, &data, &loss, &ball, 1.0, 1e-6, 1.5, &mut rng).is_err()
        );
    }
}
