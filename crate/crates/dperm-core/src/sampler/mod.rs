//! Log-concave sampling over convex bodies with a multiplicative-distance
//! guarantee.
//!
//! The pipeline is: enclose the body in a cube, extend the (scaled) loss to
//! the cube as a convex Lipschitz function, down-weight the region outside
//! the body with a gauge penalty, run a lazy Metropolis grid walk on a
//! `gamma`-spaced lattice of cell centers, and jitter the final cell
//! uniformly. A retry loop ([`eff_samp`]) turns the constant-probability
//! landing guarantee of [`init_samp`] into a sampler that always returns a
//! point of the body, with law within `Dist_inf <= eps_tilde` of
//! `exp(-f) / int_C exp(-f)`.
//!
//! Step budgets: `Strict` mode takes the mixing-time formula (with a
//! configurable leading constant, default 1); only strict-mode runs may be
//! labeled private. `Heuristic` mode takes a user-supplied step count for
//! fast experimentation and is propagated as non-private by the mechanisms.
//! The [`oracle`] module computes exact stationary laws and transition-matrix
//! powers on enumerable grids, which is how step counts are certified in
//! tests.

pub mod oracle;

use crate::error::{Error, Result};
use crate::geometry::{self, ConvexSet};
use crate::losses::lipschitz_extension_eval;
use crate::objective::Objective;
use rand::Rng;
use std::collections::HashMap;

/// Leading constant applied to the mixing-time formula in strict mode.
pub const DEFAULT_C_MIX: f64 = 1.0;

/// `ceil(c_mix * (eta^2 tau^2 / eps~^2) * p^3 * max(p ln(eta tau p / eps~), eta tau))`
///
/// Saturates at `u64::MAX`; combine with [`SamplerOptions::max_steps`] to
/// reject budgets that are astronomically large for the problem size.
pub fn walk_mixing_steps(eta: f64, tau: f64, p: usize, eps_tilde: f64, c_mix: f64) -> u64 {
    assert!(eta > 0.0 && tau > 0.0 && p >= 1 && eps_tilde > 0.0 && c_mix > 0.0);
    let pf = p as f64;
    let log_term = (eta * tau * pf / eps_tilde).ln();
    let inner = (pf * log_term).max(eta * tau);
    let steps = c_mix * (eta * eta * tau * tau / (eps_tilde * eps_tilde)) * pf.powi(3) * inner;
    if !steps.is_finite() || steps >= u64::MAX as f64 {
        u64::MAX
    } else {
        steps.ceil() as u64
    }
}

/// Number of sampling attempts in the retry loop of [`eff_samp`]:
/// `ceil(4 eta |C|_2 + p ln(|C|_2) + ln(1/(1 - e^{-eps~/4})))`, at least 1.
pub fn eff_samp_retries(eta: f64, l2_diameter: f64, p: usize, eps_tilde: f64) -> u64 {
    let m = 4.0 * eta * l2_diameter
        + p as f64 * l2_diameter.ln()
        + (1.0 / (-(-eps_tilde / 4.0).exp_m1())).ln();
    m.ceil().max(1.0) as u64
}

/// Gauge-penalty scale of the initial sampler:
/// `alpha = 3 e^{2 eps~} (eta |C|_2 + p)`.
pub fn gauge_penalty_scale(eta: f64, l2_diameter: f64, p: usize, eps_tilde: f64) -> f64 {
    3.0 * (2.0 * eps_tilde).exp() * (eta * l2_diameter + p as f64)
}

/// A grid-walk configuration over a centered cube.
///
/// The lattice has `cells_per_axis` cells per axis whose centers sit at
/// `(k + 1/2) gamma` offsets from the cube corner; `gamma` is the formula
/// spacing `eps~ / (2 eta sqrt(p))` rounded down so the cells tile the cube
/// exactly.
#[derive(Debug, Clone)]
pub struct GridWalkSpec {
    pub dim: usize,
    /// Half-width of the enclosing cube (edge `tau = 2 * half_width`).
    pub half_width: f64,
    /// Lipschitz bound of the log-weight.
    pub eta: f64,
    pub eps_tilde: f64,
    pub cells_per_axis: usize,
    /// Actual spacing `tau / cells_per_axis`.
    pub gamma: f64,
    pub steps: u64,
}

impl GridWalkSpec {
    pub fn new(dim: usize, half_width: f64, eta: f64, eps_tilde: f64, c_mix: f64) -> Result<Self> {
        if dim == 0 || !(half_width > 0.0) || !(eta > 0.0) || !(eps_tilde > 0.0) {
            return Err(Error::invalid("grid walk parameters must be positive"));
        }
        let tau = 2.0 * half_width;
        let gamma_formula = eps_tilde / (2.0 * eta * (dim as f64).sqrt());
        let cells = (tau / gamma_formula).ceil().max(1.0);
        if cells > 65_535.0 {
            return Err(Error::OracleTooLarge(format!(
                "grid needs {cells} cells per axis; refusing beyond 65535"
            )));
        }
        let cells_per_axis = cells as usize;
        Ok(GridWalkSpec {
            dim,
            half_width,
            eta,
            eps_tilde,
            cells_per_axis,
            gamma: tau / cells_per_axis as f64,
            steps: walk_mixing_steps(eta, tau, dim, eps_tilde, c_mix),
        })
    }

    /// Override the step budget (heuristic mode, or certified counts).
    pub fn with_steps(mut self, steps: u64) -> Self {
        self.steps = steps;
        self
    }

    /// Override the lattice resolution (test grids); the spacing is
    /// recomputed, the step budget kept.
    pub fn with_cells_per_axis(mut self, cells: usize) -> Self {
        assert!(cells >= 1 && cells <= 65_535);
        self.cells_per_axis = cells;
        self.gamma = 2.0 * self.half_width / cells as f64;
        self
    }

    pub fn cell_center(&self, idx: &[u16]) -> Vec<f64> {
        idx.iter()
            .map(|&k| -self.half_width + (k as f64 + 0.5) * self.gamma)
            .collect()
    }

    /// Total number of lattice cells, if it fits in a u128.
    pub fn num_cells(&self) -> Option<u128> {
        (self.cells_per_axis as u128).checked_pow(self.dim as u32)
    }

    /// Index of the cell containing the origin.
    fn origin_cell(&self) -> Vec<u16> {
        let k = ((self.half_width / self.gamma) as usize).min(self.cells_per_axis - 1);
        vec![k as u16; self.dim]
    }
}

/// Memoized log-weights keyed by lattice cell. Valid for one fixed
/// (body, objective, eta, eps_tilde, resolution) configuration.
#[derive(Debug, Default)]
pub struct WeightCache {
    map: HashMap<Vec<u16>, f64>,
}

impl WeightCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    fn get_or_compute(
        &mut self,
        idx: &[u16],
        center: &[f64],
        f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    ) -> Result<f64> {
        if let Some(&v) = self.map.get(idx) {
            return Ok(v);
        }
        let v = f(center)?;
        if !v.is_finite() {
            return Err(Error::InvalidWeight(format!(
                "log-weight {v} at cell {idx:?}"
            )));
        }
        self.map.insert(idx.to_vec(), v);
        Ok(v)
    }
}

/// Lazy Metropolis grid walk. Holds with probability 1/2, otherwise proposes
/// a uniformly random axis neighbor, rejecting in place proposals that leave
/// the cube; acceptance probability `min(1, F(v)/F(u))`. Returns the final
/// cell center plus an independent uniform jitter within its cell.
pub fn cube_grid_walk<R: Rng + ?Sized>(
    spec: &GridWalkSpec,
    log_weight: &mut dyn FnMut(&[f64]) -> Result<f64>,
    cache: &mut WeightCache,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let cell = walk_final_cell(spec, log_weight, cache, rng)?;
    Ok(jitter_cell(spec, &cell, rng))
}

fn jitter_cell<R: Rng + ?Sized>(spec: &GridWalkSpec, cell: &[u16], rng: &mut R) -> Vec<f64> {
    let mut point = spec.cell_center(cell);
    for x in point.iter_mut() {
        *x += rng.gen_range(-0.5..0.5) * spec.gamma;
        *x = x.clamp(-spec.half_width, spec.half_width);
    }
    point
}

/// Evaluate the log-weight on every lattice cell, axis 0 fastest (the same
/// order as the stationary oracle). Enables the allocation-free dense walk
/// used by high-volume experiments.
pub fn dense_weight_table(
    spec: &GridWalkSpec,
    log_weight: &mut dyn FnMut(&[f64]) -> Result<f64>,
) -> Result<Vec<f64>> {
    let total = spec
        .num_cells()
        .filter(|&n| n <= (1 << 26))
        .ok_or_else(|| {
            Error::OracleTooLarge(format!(
                "dense table of {:?} cells exceeds the 2^26 cap",
                spec.num_cells()
            ))
        })? as usize;
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0u16; spec.dim];
    loop {
        let lw = log_weight(&spec.cell_center(&idx))?;
        if !lw.is_finite() {
            return Err(Error::InvalidWeight(format!("log-weight {lw} at {idx:?}")));
        }
        weights.push(lw);
        let mut j = 0;
        loop {
            if j == spec.dim {
                return Ok(weights);
            }
            idx[j] += 1;
            if (idx[j] as usize) < spec.cells_per_axis {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// The grid walk against a precomputed dense weight table (read-only, so
/// independent walks can share it across threads). Returns the final cell.
///
/// Hot path for formula-budget experiments. Two exact shortcuts keep the
/// per-step cost down: lazy holds leave the state unchanged, so the number of
/// active (proposal) steps is drawn once as `Binomial(steps, 1/2)`; and for
/// power-of-two dimensions the axis/direction bits come from a shared bit
/// buffer (one u64 feeds up to 64 proposals in 1-D). Both reproduce the lazy
/// kernel's law exactly.
pub fn walk_final_cell_dense<R: Rng + ?Sized>(
    spec: &GridWalkSpec,
    weights: &[f64],
    rng: &mut R,
) -> Vec<u16> {
    use rand_distr::Distribution;
    let p = spec.dim;
    let m = spec.cells_per_axis;
    debug_assert_eq!(weights.len(), m.pow(p as u32));
    let mut strides = vec![1usize; p];
    for j in 1..p {
        strides[j] = strides[j - 1] * m;
    }
    let mut cell = spec.origin_cell();
    let mut lin: usize = cell
        .iter()
        .zip(&strides)
        .map(|(&k, s)| k as usize * s)
        .sum();
    let mut cur_lw = weights[lin];

    let active = rand_distr::Binomial::new(spec.steps, 0.5)
        .expect("valid binomial")
        .sample(rng);
    let pow2 = p.is_power_of_two();
    let bits_per_step = if pow2 { p.trailing_zeros() + 1 } else { 0 };
    let mut buf: u64 = 0;
    let mut buf_left: u32 = 0;
    for _ in 0..active {
        let (axis, dir): (usize, i64) = if pow2 {
            if buf_left < bits_per_step {
                buf = rng.next_u64();
                buf_left = 64;
            }
            let dir = if buf & 1 == 0 { 1 } else { -1 };
            let axis = ((buf >> 1) & (p as u64 - 1)) as usize;
            buf >>= bits_per_step;
            buf_left -= bits_per_step;
            (axis, dir)
        } else {
            let bits = rng.next_u64();
            (
                ((bits >> 1) % p as u64) as usize, // bias at most p / 2^63
                if bits & 1 == 0 { 1 } else { -1 },
            )
        };
        let k = cell[axis] as i64 + dir;
        if k < 0 || k >= m as i64 {
            continue;
        }
        let nlin = (lin as i64 + dir * strides[axis] as i64) as usize;
        let lw = weights[nlin];
        if lw >= cur_lw || rng.gen::<f64>() < (lw - cur_lw).exp() {
            cell[axis] = k as u16;
            lin = nlin;
            cur_lw = lw;
        }
    }
    cell
}

/// Dense-table walk with the jitter step.
pub fn cube_grid_walk_dense<R: Rng + ?Sized>(
    spec: &GridWalkSpec,
    weights: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    let cell = walk_final_cell_dense(spec, weights, rng);
    jitter_cell(spec, &cell, rng)
}

/// The walk without the jitter step; used by cell-frequency tests.
pub fn walk_final_cell<R: Rng + ?Sized>(
    spec: &GridWalkSpec,
    log_weight: &mut dyn FnMut(&[f64]) -> Result<f64>,
    cache: &mut WeightCache,
    rng: &mut R,
) -> Result<Vec<u16>> {
    let p = spec.dim;
    let m = spec.cells_per_axis as i64;
    let mut cell = spec.origin_cell();
    let mut cur_lw = cache.get_or_compute(&cell, &spec.cell_center(&cell), log_weight)?;

    let mut neighbor = cell.clone();
    for _ in 0..spec.steps {
        if rng.gen_bool(0.5) {
            continue; // lazy hold
        }
        let axis = rng.gen_range(0..p);
        let dir: i64 = if rng.gen_bool(0.5) { 1 } else { -1 };
        let k = cell[axis] as i64 + dir;
        if k < 0 || k >= m {
            continue; // proposal leaves the cube: reject in place
        }
        neighbor.clone_from(&cell);
        neighbor[axis] = k as u16;
        let lw = cache.get_or_compute(&neighbor, &spec.cell_center(&neighbor), log_weight)?;
        if lw >= cur_lw || rng.gen::<f64>() < (lw - cur_lw).exp() {
            std::mem::swap(&mut cell, &mut neighbor);
            cur_lw = lw;
        }
    }
    Ok(cell)
}

/// Step-budget policy for the samplers.
#[derive(Debug, Clone, Copy)]
pub enum StepMode {
    /// Formula mixing time scaled by `c_mix`; eligible for privacy labels.
    Strict { c_mix: f64 },
    /// User-supplied step count; runs are labeled non-private.
    Heuristic { steps: u64 },
}

impl StepMode {
    pub fn is_strict(&self) -> bool {
        matches!(self, StepMode::Strict { .. })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SamplerOptions {
    pub mode: StepMode,
    /// Reject configurations whose step budget exceeds this cap.
    pub max_steps: Option<u64>,
    /// Scale of the Lipschitz-extension tolerance `tol * (1 + |f|)`.
    pub extension_tol: f64,
    /// Override the lattice resolution. Only honored in heuristic mode;
    /// test harnesses pair it with oracle-certified step counts.
    pub cells_per_axis: Option<usize>,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions {
            mode: StepMode::Strict { c_mix: DEFAULT_C_MIX },
            max_steps: None,
            extension_tol: 1e-6,
            cells_per_axis: None,
        }
    }
}

impl SamplerOptions {
    pub fn heuristic(steps: u64) -> Self {
        SamplerOptions {
            mode: StepMode::Heuristic { steps },
            ..Default::default()
        }
    }

    pub fn with_cells_per_axis(mut self, cells: usize) -> Self {
        self.cells_per_axis = Some(cells);
        self
    }
}

/// The grid-walk spec the initial sampler would run for this configuration,
/// along with the gauge-penalty scale; exposed so test oracles can enumerate
/// exactly the chain the sampler uses.
pub fn init_samp_spec(
    set: &dyn ConvexSet,
    eta: f64,
    eps_tilde: f64,
    opts: &SamplerOptions,
) -> Result<(GridWalkSpec, f64)> {
    if !(eta >= 0.0) || !(eps_tilde > 0.0) {
        return Err(Error::invalid("init sampler needs eta >= 0 and eps_tilde > 0"));
    }
    if !unit_ball_inside(set) {
        return Err(Error::PreconditionViolation(
            "initial sampler requires a body containing the unit ball".into(),
        ));
    }
    let alpha = gauge_penalty_scale(eta, set.l2_diameter(), set.dim(), eps_tilde);
    // Origin-centered cube enclosing the body; for symmetric bodies its edge
    // is the L-infinity diameter.
    let half_width = set
        .bounding_half_widths()
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    let walk_eta = eta + alpha;
    let mut spec = GridWalkSpec::new(set.dim(), half_width, walk_eta, eps_tilde / 2.0, 1.0)?;
    match opts.mode {
        StepMode::Strict { c_mix } => {
            spec.steps =
                walk_mixing_steps(walk_eta, 2.0 * half_width, set.dim(), eps_tilde / 2.0, c_mix);
        }
        StepMode::Heuristic { steps } => {
            spec.steps = steps;
            if let Some(cells) = opts.cells_per_axis {
                spec = spec.with_cells_per_axis(cells);
            }
        }
    }
    if let Some(cap) = opts.max_steps {
        if spec.steps > cap {
            return Err(Error::BudgetExceeded(format!(
                "walk needs {} steps, cap is {cap}; use heuristic mode or raise the cap",
                spec.steps
            )));
        }
    }
    Ok((spec, alpha))
}

/// `B ⊆ C` check via gauge probes along axes and the two main diagonals.
fn unit_ball_inside(set: &dyn ConvexSet) -> bool {
    let p = set.dim();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for j in 0..p {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        dirs.push(e.clone());
        e[j] = -1.0;
        dirs.push(e);
    }
    let diag = vec![1.0 / (p as f64).sqrt(); p];
    dirs.push(diag.iter().map(|v| -v).collect());
    dirs.push(diag);
    dirs.iter()
        .all(|d| matches!(set.gauge(d), Ok(g) if g <= 1.0 + 1e-9))
}

/// One attempt of the probabilistic log-concave sampler: samples the cube
/// under `F = exp(-f_bar - psi_bar_alpha)`; the result lands in the body with
/// probability at least 1/2, and conditioned on landing its law is within
/// `Dist_inf <= eps_tilde` of `exp(-f)` normalized over the body.
///
/// `f` must be convex and `eta`-Lipschitz on the body, which must contain the
/// unit ball.
pub fn init_samp<R: Rng + ?Sized>(
    set: &dyn ConvexSet,
    f: &dyn Objective,
    eta: f64,
    eps_tilde: f64,
    opts: &SamplerOptions,
    cache: &mut WeightCache,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let (spec, alpha) = init_samp_spec(set, eta, eps_tilde, opts)?;
    let mut log_weight = make_log_weight(set, f, eta, alpha, opts.extension_tol);
    cube_grid_walk(&spec, &mut log_weight, cache, rng)
}

/// Build the log-weight `-f_bar(theta) - psi_bar_alpha(theta)` with the
/// in-body shortcut `f_bar = f`, `psi_bar = 0`.
pub fn make_log_weight<'a>(
    set: &'a dyn ConvexSet,
    f: &'a dyn Objective,
    eta: f64,
    alpha: f64,
    extension_tol: f64,
) -> impl FnMut(&[f64]) -> Result<f64> + 'a {
    move |theta: &[f64]| -> Result<f64> {
        if set.contains(theta) {
            return Ok(-f.value(theta));
        }
        let anchor = set.project(theta);
        let tol = extension_tol * (1.0 + f.value(&anchor).abs());
        let fbar = if eta > 0.0 {
            lipschitz_extension_eval(f, set, eta, theta, tol)?
        } else {
            f.value(&anchor)
        };
        let penalty = set.gauge_penalty(theta, alpha)?;
        Ok(-fbar - penalty)
    }
}

/// Log-concave sampling over the body with probability 1: retries
/// [`init_samp`] (at guarantee `eps_tilde/4`) up to
/// [`eff_samp_retries`] times and falls back to a uniform unit-ball sample.
/// The output law is within `Dist_inf <= eps_tilde` of `exp(-f)` normalized
/// over the body.
pub fn eff_samp<R: Rng + ?Sized>(
    set: &dyn ConvexSet,
    f: &dyn Objective,
    eta: f64,
    eps_tilde: f64,
    opts: &SamplerOptions,
    cache: &mut WeightCache,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let retries = eff_samp_retries(eta, set.l2_diameter(), set.dim(), eps_tilde);
    for _ in 0..retries {
        let theta = init_samp(set, f, eta, eps_tilde / 4.0, opts, cache, rng)?;
        if set.contains(&theta) {
            return Ok(theta);
        }
    }
    Ok(geometry::uniform_ball_sample(set.dim(), rng))
}
