//! Exact reference computations for enumerable grid walks: stationary law,
//! dense transition matrix, distribution after t steps, and certified step
//! counts. Test infrastructure; never on a privacy-critical path.

use super::GridWalkSpec;
use crate::error::{Error, Result};
use std::collections::HashMap;

/// Cell cap for stationary-law enumeration.
pub const MAX_ORACLE_CELLS: u128 = 1_000_000;

/// Cell cap for dense transition-matrix work (powering is cubic).
pub const MAX_DENSE_CELLS: usize = 2048;

pub struct StationaryOracle {
    spec: GridWalkSpec,
    cells: Vec<Vec<u16>>,
    index: HashMap<Vec<u16>, usize>,
    log_weights: Vec<f64>,
}

impl StationaryOracle {
    /// Enumerate the full lattice and evaluate the log-weight everywhere.
    pub fn build(
        spec: &GridWalkSpec,
        log_weight: &mut dyn FnMut(&[f64]) -> Result<f64>,
    ) -> Result<Self> {
        let total = spec
            .num_cells()
            .filter(|&n| n <= MAX_ORACLE_CELLS)
            .ok_or_else(|| {
                Error::OracleTooLarge(format!(
                    "grid has {:?} cells; oracle cap is {MAX_ORACLE_CELLS}",
                    spec.num_cells()
                ))
            })? as usize;

        let mut cells = Vec::with_capacity(total);
        let mut idx = vec![0u16; spec.dim];
        loop {
            cells.push(idx.clone());
            // odometer increment
            let mut j = 0;
            loop {
                if j == spec.dim {
                    break;
                }
                idx[j] += 1;
                if (idx[j] as usize) < spec.cells_per_axis {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == spec.dim {
                break;
            }
        }
        debug_assert_eq!(cells.len(), total);

        let mut log_weights = Vec::with_capacity(total);
        for c in &cells {
            let lw = log_weight(&spec.cell_center(c))?;
            if !lw.is_finite() {
                return Err(Error::InvalidWeight(format!("log-weight {lw} at {c:?}")));
            }
            log_weights.push(lw);
        }
        let index: HashMap<Vec<u16>, usize> = cells
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, c)| (c, i))
            .collect();
        Ok(StationaryOracle {
            spec: spec.clone(),
            cells,
            index,
            log_weights,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[Vec<u16>] {
        &self.cells
    }

    pub fn cell_index(&self, cell: &[u16]) -> Option<usize> {
        self.index.get(cell).copied()
    }

    /// Exact stationary law `pi = F / sum F` via log-sum-exp.
    pub fn stationary(&self) -> Vec<f64> {
        let m = self
            .log_weights
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut pi: Vec<f64> = self.log_weights.iter().map(|lw| (lw - m).exp()).collect();
        let z: f64 = pi.iter().sum();
        for v in pi.iter_mut() {
            *v /= z;
        }
        pi
    }

    /// Dense row-major transition matrix of the lazy Metropolis kernel.
    pub fn transition_matrix(&self) -> Result<Vec<f64>> {
        let k = self.cells.len();
        if k > MAX_DENSE_CELLS {
            return Err(Error::OracleTooLarge(format!(
                "{k} cells exceed the dense-matrix cap {MAX_DENSE_CELLS}"
            )));
        }
        let p = self.spec.dim;
        let m = self.spec.cells_per_axis as i64;
        let prop = 0.5 / (2.0 * p as f64); // holding 1/2, then uniform over 2p proposals
        let mut mat = vec![0.0f64; k * k];
        for (u, cell) in self.cells.iter().enumerate() {
            let mut stay = 0.5f64;
            for axis in 0..p {
                for dir in [-1i64, 1] {
                    let kk = cell[axis] as i64 + dir;
                    if kk < 0 || kk >= m {
                        stay += prop; // rejected out-of-cube proposal
                        continue;
                    }
                    let mut nb = cell.clone();
                    nb[axis] = kk as u16;
                    let v = self.index[&nb];
                    let acc = (self.log_weights[v] - self.log_weights[u]).min(0.0).exp();
                    mat[u * k + v] += prop * acc;
                    stay += prop * (1.0 - acc);
                }
            }
            mat[u * k + u] += stay;
        }
        Ok(mat)
    }

    /// Max over cells of `pi_u * P(u,v) - pi_v * P(v,u)` (should vanish).
    pub fn detailed_balance_residual(&self) -> Result<f64> {
        let k = self.cells.len();
        let p = self.transition_matrix()?;
        let pi = self.stationary();
        let mut worst: f64 = 0.0;
        for u in 0..k {
            for v in 0..k {
                let a = pi[u] * p[u * k + v];
                let b = pi[v] * p[v * k + u];
                worst = worst.max((a - b).abs() / a.max(b).max(1e-300));
            }
        }
        Ok(worst)
    }

    pub fn min_holding_probability(&self) -> Result<f64> {
        let k = self.cells.len();
        let p = self.transition_matrix()?;
        Ok((0..k).map(|u| p[u * k + u]).fold(f64::INFINITY, f64::min))
    }

    /// `max_u Dist_inf(e_u P^t, pi)` via binary matrix powering.
    pub fn dist_inf_after(&self, steps: u64) -> Result<f64> {
        let pt = self.matrix_power(steps)?;
        let pi = self.stationary();
        Ok(dist_inf_rows(&pt, &pi, self.cells.len()))
    }

    /// Smallest power-of-two step count whose matrix power certifies
    /// `Dist_inf <= eps_tilde / 2` from every start, or `None` within `cap`.
    pub fn certified_steps(&self, eps_tilde: f64, cap: u64) -> Result<Option<u64>> {
        let pi = self.stationary();
        let k = self.cells.len();
        let mut pow = self.transition_matrix()?; // P^(2^j), incrementally squared
        let mut t = 1u64;
        while t <= cap {
            let worst = dist_inf_rows(&pow, &pi, k);
            if worst <= eps_tilde / 2.0 {
                return Ok(Some(t));
            }
            if t > cap / 2 {
                break;
            }
            pow = mat_mul(&pow, &pow, k);
            t *= 2;
        }
        Ok(None)
    }

    fn matrix_power(&self, steps: u64) -> Result<Vec<f64>> {
        let k = self.cells.len();
        let base = self.transition_matrix()?;
        let mut result: Option<Vec<f64>> = None;
        let mut sq = base;
        let mut rem = steps;
        loop {
            if rem & 1 == 1 {
                result = Some(match result {
                    None => sq.clone(),
                    Some(r) => mat_mul(&r, &sq, k),
                });
            }
            rem >>= 1;
            if rem == 0 {
                break;
            }
            sq = mat_mul(&sq, &sq, k);
        }
        Ok(result.unwrap_or_else(|| identity(k)))
    }
}

fn dist_inf_rows(pt: &[f64], pi: &[f64], k: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for u in 0..k {
        for v in 0..k {
            let q = pt[u * k + v];
            if q <= 0.0 {
                return f64::INFINITY;
            }
            worst = worst.max((q / pi[v]).ln().abs());
        }
    }
    worst
}

fn identity(k: usize) -> Vec<f64> {
    let mut m = vec![0.0; k * k];
    for i in 0..k {
        m[i * k + i] = 1.0;
    }
    m
}

fn mat_mul(a: &[f64], b: &[f64], k: usize) -> Vec<f64> {
    let mut c = vec![0.0f64; k * k];
    for i in 0..k {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * k..(i + 1) * k];
        for (l, &al) in arow.iter().enumerate() {
            if al == 0.0 {
                continue;
            }
            let brow = &b[l * k..(l + 1) * k];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += al * bv;
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(cells: usize) -> GridWalkSpec {
        GridWalkSpec::new(1, 1.0, 1.0, 0.5, 1.0)
            .unwrap()
            .with_cells_per_axis(cells)
    }

    #[test]
    fn stationary_constant_weight_is_uniform() {
        let spec = small_spec(7);
        let mut lw = |_c: &[f64]| Ok(0.0);
        let oracle = StationaryOracle::build(&spec, &mut lw).unwrap();
        for v in oracle.stationary() {
            assert!((v - 1.0 / 7.0).abs() < 1e-14);
        }
    }

    #[test]
    fn stationary_two_cells_normalization() {
        let spec = small_spec(2);
        // weights (1, e): pi = (1/(1+e), e/(1+e))
        let mut lw = |c: &[f64]| Ok(if c[0] < 0.0 { 0.0 } else { 1.0 });
        let oracle = StationaryOracle::build(&spec, &mut lw).unwrap();
        let pi = oracle.stationary();
        let e = std::f64::consts::E;
        assert!((pi[0] - 1.0 / (1.0 + e)).abs() < 1e-14);
        assert!((pi[1] - e / (1.0 + e)).abs() < 1e-14);
    }

    #[test]
    fn stationary_gaussian_2d_matches_direct_sum() {
        let spec = GridWalkSpec::new(2, 1.0, 1.0, 0.5, 1.0)
            .unwrap()
            .with_cells_per_axis(3);
        let mut lw = |c: &[f64]| Ok(-(c[0] * c[0] + c[1] * c[1]));
        let oracle = StationaryOracle::build(&spec, &mut lw).unwrap();
        let pi = oracle.stationary();
        // direct summation
        let mut weights = Vec::new();
        for cell in oracle.cells() {
            let c = spec.cell_center(cell);
            weights.push((-(c[0] * c[0] + c[1] * c[1])).exp());
        }
        let z: f64 = weights.iter().sum();
        for (a, w) in pi.iter().zip(&weights) {
            assert!((a - w / z).abs() < 1e-12);
        }
    }

    #[test]
    fn detailed_balance_and_laziness() {
        for cells in [2usize, 5, 9] {
            let spec = small_spec(cells);
            let mut lw = |c: &[f64]| Ok(-1.7 * c[0]);
            let oracle = StationaryOracle::build(&spec, &mut lw).unwrap();
            assert!(oracle.detailed_balance_residual().unwrap() < 1e-12);
            assert!(oracle.min_holding_probability().unwrap() >= 0.5);
        }
        let spec2 = GridWalkSpec::new(2, 1.0, 1.0, 0.5, 1.0)
            .unwrap()
            .with_cells_per_axis(3);
        let mut lw = |c: &[f64]| Ok(-c[0] + 0.5 * c[1]);
        let oracle = StationaryOracle::build(&spec2, &mut lw).unwrap();
        assert!(oracle.detailed_balance_residual().unwrap() < 1e-12);
        assert!(oracle.min_holding_probability().unwrap() >= 0.5);
    }

    #[test]
    fn rows_of_matrix_are_stochastic() {
        let spec = small_spec(6);
        let mut lw = |c: &[f64]| Ok(c[0].sin());
        let oracle = StationaryOracle::build(&spec, &mut lw).unwrap();
        let k = oracle.num_cells();
        let p = oracle.transition_matrix().unwrap();
        for u in 0..k {
            let s: f64 = p[u * k..(u + 1) * k].iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn powering_converges_to_stationary() {
        let spec = small_spec(8);
        let mut lw = |c: &[f64]| Ok(-c[0]);
        let oracle = StationaryOracle::build(&spec, &mut lw).unwrap();
        let d1 = oracle.dist_inf_after(8).unwrap();
        let d2 = oracle.dist_inf_after(512).unwrap();
        assert!(d2 < d1);
        let t = oracle.certified_steps(0.5, 1 << 20).unwrap().unwrap();
        assert!(oracle.dist_inf_after(t).unwrap() <= 0.25);
    }

    #[test]
    fn oracle_cell_cap() {
        let spec = GridWalkSpec::new(3, 1.0, 1.0, 0.5, 1.0)
            .unwrap()
            .with_cells_per_axis(101);
        let mut lw = |_c: &[f64]| Ok(0.0);
        assert!(matches!(
            StationaryOracle::build(&spec, &mut lw),
            Err(Error::OracleTooLarge(_))
        ));
    }
}
