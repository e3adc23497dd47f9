//! Convex feasible sets: membership, Euclidean projection, Minkowski gauge,
//! bounding boxes and ball intersections.
//!
//! Three concrete kinds cover every experiment in this crate (origin-centered
//! balls, centered boxes, and a body intersected with a Euclidean ball). The
//! [`ConvexSet`] trait is the oracle interface the samplers and mechanisms
//! actually consume, so callers can plug in their own membership + projection
//! oracles (polytopes, recentered caps, ...) without touching the rest of the
//! library.

use crate::error::{Error, Result};
use crate::linalg;
use rand::Rng;

/// Absolute boundary tolerance for membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Exit tolerance for Dykstra alternating projections.
pub const DYKSTRA_TOL: f64 = 1e-10;

/// Sweep cap for Dykstra alternating projections.
pub const DYKSTRA_MAX_SWEEPS: usize = 10_000;

/// Bisection tolerance for gauge evaluation on bodies without a closed form.
pub const GAUGE_BISECT_TOL: f64 = 1e-10;

/// Membership + projection oracle for a bounded convex set containing the
/// origin.
///
/// `gauge` has a generic bisection default; kinds with a closed form override
/// it. Diameters are Euclidean (`l2_diameter`) and per-axis half-widths of the
/// tightest centered box (`bounding_half_widths`).
pub trait ConvexSet {
    fn dim(&self) -> usize;

    fn contains(&self, x: &[f64]) -> bool;

    /// Euclidean projection: the unique nearest point of the set.
    fn project(&self, x: &[f64]) -> Vec<f64>;

    /// Euclidean diameter of the set.
    fn l2_diameter(&self) -> f64;

    /// Half-widths of the tightest origin-centered box containing the set.
    fn bounding_half_widths(&self) -> Vec<f64>;

    /// Per-axis `[lo, hi]` extent bounds of the set.
    ///
    /// The default derives them from the centered bounding box; kinds that
    /// know tighter asymmetric extents override this.
    fn axis_extents(&self) -> Vec<(f64, f64)> {
        self.bounding_half_widths()
            .into_iter()
            .map(|w| (-w, w))
            .collect()
    }

    /// Minkowski gauge `psi(x) = inf { r > 0 : x in r * set }`.
    ///
    /// Requires the origin in the interior. The default bisects on `r` using
    /// the membership oracle, which is correct for any star-shaped set around
    /// the origin.
    fn gauge(&self, x: &[f64]) -> Result<f64> {
        gauge_by_bisection(self, x)
    }

    /// `psi_bar_alpha(x) = alpha * max(0, gauge(x) - 1)`: zero on the set,
    /// `alpha`-Lipschitz outside when the set contains the unit ball.
    fn gauge_penalty(&self, x: &[f64], alpha: f64) -> Result<f64> {
        if !(alpha > 0.0) {
            return Err(Error::invalid(format!(
                "gauge penalty scale must be positive, got {alpha}"
            )));
        }
        Ok(alpha * (self.gauge(x)? - 1.0).max(0.0))
    }

    /// L-infinity diameter: the largest per-axis extent.
    fn linf_diameter(&self) -> f64 {
        self.axis_extents()
            .iter()
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max)
    }

    /// Radius of the largest ball centered at `x` contained in the set, or
    /// 0 when `x` is on the boundary / outside.
    fn inscribed_radius_at(&self, x: &[f64]) -> f64;
}

fn gauge_by_bisection<S: ConvexSet + ?Sized>(set: &S, x: &[f64]) -> Result<f64> {
    if !linalg::all_finite(x) {
        return Err(Error::invalid("gauge of a non-finite point"));
    }
    if linalg::norm(x) == 0.0 {
        return Ok(0.0);
    }
    if !set.contains(&vec![0.0; x.len()]) {
        return Err(Error::InvalidBody(
            "gauge requires the origin inside the body".into(),
        ));
    }
    // Bracket: grow hi until x is in hi * set.
    let mut hi = 1.0f64;
    let scaled = |r: f64| -> Vec<f64> { x.iter().map(|v| v / r).collect() };
    let mut doublings = 0;
    while !set.contains(&scaled(hi)) {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::InvalidBody(
                "gauge bracket did not close; body does not absorb the point".into(),
            ));
        }
    }
    let mut lo = 0.0f64;
    while hi - lo > GAUGE_BISECT_TOL * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid > 0.0 && set.contains(&scaled(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Concrete body kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum BodyKind {
    /// `{ x : ||x||_2 <= radius }`
    Ball { radius: f64 },
    /// `{ x : |x_j| <= half_widths[j] }`
    Box { half_widths: Vec<f64> },
    /// `base  intersected with  { x : ||x - center||_2 <= radius }`
    BallIntersection {
        base: Box<ConvexBody>,
        center: Vec<f64>,
        radius: f64,
    },
}

/// A bounded convex set containing the origin.
///
/// Immutable after construction; all operations are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexBody {
    dim: usize,
    kind: BodyKind,
}

impl ConvexBody {
    /// Origin-centered Euclidean ball of the given radius.
    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("body dimension must be positive"));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(ConvexBody {
            dim,
            kind: BodyKind::Ball { radius },
        })
    }

    /// Unit ball.
    pub fn unit_ball(dim: usize) -> Result<Self> {
        Self::ball(dim, 1.0)
    }

    /// Origin-centered box with per-axis half-widths.
    pub fn centered_box(half_widths: Vec<f64>) -> Result<Self> {
        if half_widths.is_empty() {
            return Err(Error::invalid("box needs at least one axis"));
        }
        if half_widths.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid("box half-widths must be positive and finite"));
        }
        Ok(ConvexBody {
            dim: half_widths.len(),
            kind: BodyKind::Box { half_widths },
        })
    }

    /// 1-D interval `[-w, w]`.
    pub fn interval(half_width: f64) -> Result<Self> {
        Self::centered_box(vec![half_width])
    }

    /// Intersect this body with the ball `{ x : ||x - center|| <= radius }`.
    ///
    /// Fails with `EmptyBody` when the intersection is empty, i.e. when the
    /// center is farther than `radius` from the body. When the cap ball is an
    /// origin-centered ball already inside a ball body, the result collapses
    /// to the plain smaller ball.
    pub fn intersect_ball(&self, center: &[f64], radius: f64) -> Result<ConvexBody> {
        if center.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: center.len(),
            });
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("cap radius must be positive, got {radius}")));
        }
        let nearest = self.project(center);
        if linalg::dist(&nearest, center) > radius + MEMBERSHIP_TOL {
            return Err(Error::EmptyBody(format!(
                "cap ball at distance {} from the body exceeds radius {radius}",
                linalg::dist(&nearest, center)
            )));
        }
        if let BodyKind::Ball { radius: base_r } = self.kind {
            let centered = linalg::norm(center) == 0.0;
            if centered && radius <= base_r {
                return ConvexBody::ball(self.dim, radius);
            }
            if centered && radius >= base_r {
                return Ok(self.clone());
            }
        }
        Ok(ConvexBody {
            dim: self.dim,
            kind: BodyKind::BallIntersection {
                base: Box::new(self.clone()),
                center: center.to_vec(),
                radius,
            },
        })
    }

    pub fn kind(&self) -> &BodyKind {
        &self.kind
    }

    /// Tightest origin-centered box containing the body.
    ///
    /// For symmetric kinds (balls and centered boxes) the largest edge equals
    /// the L-infinity diameter, which is the cube edge the grid walk encloses
    /// the body with.
    pub fn bounding_box(&self) -> ConvexBody {
        ConvexBody::centered_box(self.bounding_half_widths())
            .expect("bounding half-widths of a valid body are positive")
    }

    /// True when the unit ball sits inside the body (checked analytically per
    /// kind), i.e. the body is in isotropic position up to the outer `p B`
    /// containment, which is reported as a warning only.
    pub fn contains_unit_ball(&self) -> bool {
        match &self.kind {
            BodyKind::Ball { radius } => *radius >= 1.0 - MEMBERSHIP_TOL,
            BodyKind::Box { half_widths } => {
                half_widths.iter().all(|w| *w >= 1.0 - MEMBERSHIP_TOL)
            }
            BodyKind::BallIntersection { base, center, radius } => {
                base.contains_unit_ball() && linalg::norm(center) + 1.0 <= radius + MEMBERSHIP_TOL
            }
        }
    }

    /// Isotropy report used by the efficient sampler: the `B subseteq C`
    /// containment is enforced, `||C||_2 <= 2p` only warned about.
    pub fn isotropy(&self) -> IsotropyReport {
        IsotropyReport {
            contains_unit_ball: self.contains_unit_ball(),
            l2_diameter: self.l2_diameter(),
            diameter_warning: self.l2_diameter() > 2.0 * self.dim as f64 + MEMBERSHIP_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IsotropyReport {
    pub contains_unit_ball: bool,
    pub l2_diameter: f64,
    /// Set when the diameter exceeds the `2p` cap expected of isotropic
    /// position.
    pub diameter_warning: bool,
}

impl ConvexSet for ConvexBody {
    fn dim(&self) -> usize {
        self.dim
    }

    fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim {
            return false;
        }
        match &self.kind {
            BodyKind::Ball { radius } => linalg::norm(x) <= radius + MEMBERSHIP_TOL,
            BodyKind::Box { half_widths } => x
                .iter()
                .zip(half_widths)
                .all(|(v, w)| v.abs() <= w + MEMBERSHIP_TOL),
            BodyKind::BallIntersection { base, center, radius } => {
                base.contains(x) && linalg::dist(x, center) <= radius + MEMBERSHIP_TOL
            }
        }
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "projection dimension mismatch");
        assert!(linalg::all_finite(x), "projection of a non-finite point");
        match &self.kind {
            BodyKind::Ball { radius } => project_ball(x, &vec![0.0; self.dim], *radius),
            BodyKind::Box { half_widths } => x
                .iter()
                .zip(half_widths)
                .map(|(v, w)| v.clamp(-w, *w))
                .collect(),
            BodyKind::BallIntersection { base, center, radius } => {
                dykstra_project(x, base, center, *radius)
            }
        }
    }

    fn l2_diameter(&self) -> f64 {
        match &self.kind {
            BodyKind::Ball { radius } => 2.0 * radius,
            BodyKind::Box { half_widths } => 2.0 * linalg::norm(half_widths),
            BodyKind::BallIntersection { base, radius, .. } => {
                base.l2_diameter().min(2.0 * radius)
            }
        }
    }

    fn bounding_half_widths(&self) -> Vec<f64> {
        self.axis_extents()
            .iter()
            .map(|(lo, hi)| lo.abs().max(hi.abs()))
            .collect()
    }

    fn axis_extents(&self) -> Vec<(f64, f64)> {
        match &self.kind {
            BodyKind::Ball { radius } => vec![(-radius, *radius); self.dim],
            BodyKind::Box { half_widths } => half_widths.iter().map(|w| (-w, *w)).collect(),
            BodyKind::BallIntersection { base, center, radius } => base
                .axis_extents()
                .iter()
                .zip(center)
                .map(|((lo, hi), c)| (lo.max(c - radius), hi.min(c + radius)))
                .collect(),
        }
    }

    fn gauge(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !linalg::all_finite(x) {
            return Err(Error::invalid("gauge of a non-finite point"));
        }
        match &self.kind {
            BodyKind::Ball { radius } => Ok(linalg::norm(x) / radius),
            BodyKind::Box { half_widths } => Ok(x
                .iter()
                .zip(half_widths)
                .map(|(v, w)| v.abs() / w)
                .fold(0.0, f64::max)),
            // No closed form for a cap; bisection on the membership oracle.
            BodyKind::BallIntersection { .. } => gauge_by_bisection(self, x),
        }
    }

    fn inscribed_radius_at(&self, x: &[f64]) -> f64 {
        match &self.kind {
            BodyKind::Ball { radius } => (radius - linalg::norm(x)).max(0.0),
            BodyKind::Box { half_widths } => x
                .iter()
                .zip(half_widths)
                .map(|(v, w)| w - v.abs())
                .fold(f64::INFINITY, f64::min)
                .max(0.0),
            BodyKind::BallIntersection { base, center, radius } => base
                .inscribed_radius_at(x)
                .min((radius - linalg::dist(x, center)).max(0.0)),
        }
    }
}

fn project_ball(x: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    let d = linalg::dist(x, center);
    if d <= radius {
        return x.to_vec();
    }
    let scale = radius / d;
    x.iter()
        .zip(center)
        .map(|(v, c)| c + (v - c) * scale)
        .collect()
}

/// Dykstra alternating projections onto `base  cap  ball(center, radius)`.
///
/// Exact in the limit for intersections of convex sets; we run to
/// `DYKSTRA_TOL` movement per sweep or `DYKSTRA_MAX_SWEEPS`.
fn dykstra_project(x: &[f64], base: &ConvexBody, center: &[f64], radius: f64) -> Vec<f64> {
    let mut z = x.to_vec();
    let mut p = vec![0.0; x.len()];
    let mut q = vec![0.0; x.len()];
    for _ in 0..DYKSTRA_MAX_SWEEPS {
        let zp = linalg::add(&z, &p);
        let y = base.project(&zp);
        p = linalg::sub(&zp, &y);
        let yq = linalg::add(&y, &q);
        let znew = project_ball(&yq, center, radius);
        q = linalg::sub(&yq, &znew);
        let moved = linalg::dist(&z, &znew);
        z = znew;
        if moved < DYKSTRA_TOL {
            break;
        }
    }
    z
}

/// Uniform direction on the unit sphere (normalized Gaussian vector).
pub fn uniform_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    use rand_distr::Distribution;
    assert!(dim >= 1, "uniform direction needs dim >= 1");
    loop {
        let dir: Vec<f64> = (0..dim)
            .map(|_| rand_distr::StandardNormal.sample(rng))
            .collect();
        let n = linalg::norm(&dir);
        if n > 0.0 {
            return dir.iter().map(|v| v / n).collect();
        }
    }
}

/// Uniform sample from the unit ball: Gaussian direction, radius `U^(1/p)`.
pub fn uniform_ball_sample<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    let mut dir = uniform_direction(dim, rng);
    let r: f64 = rng.gen::<f64>().powf(1.0 / dim as f64);
    linalg::scale(&mut dir, r);
    dir
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn project_ball_radial() {
        let b = ConvexBody::unit_ball(2).unwrap();
        assert_eq!(b.project(&[2.0, 0.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn project_box_clamps() {
        let b = ConvexBody::centered_box(vec![1.0, 1.0]).unwrap();
        assert_eq!(b.project(&[0.5, 3.0]), vec![0.5, 1.0]);
    }

    #[test]
    fn project_cap_matches_analytic_point() {
        // Intersection of the unit ball and a small ball centered at (0.9, 0):
        // the nearest point to (2, 0) is the cap-ball boundary point (0.95, 0).
        let b = ConvexBody::unit_ball(2)
            .unwrap()
            .intersect_ball(&[0.9, 0.0], 0.05)
            .unwrap();
        let p = b.project(&[2.0, 0.0]);
        assert!((p[0] - 0.95).abs() < 1e-9, "got {p:?}");
        assert!(p[1].abs() < 1e-9);
    }

    #[test]
    fn projection_is_idempotent() {
        let bodies = [
            ConvexBody::unit_ball(3).unwrap(),
            ConvexBody::centered_box(vec![1.0, 2.0, 0.5]).unwrap(),
            ConvexBody::unit_ball(3)
                .unwrap()
                .intersect_ball(&[0.4, 0.0, 0.0], 0.8)
                .unwrap(),
        ];
        let mut r = rng(7);
        for body in &bodies {
            for _ in 0..200 {
                let x: Vec<f64> = (0..3).map(|_| r.gen_range(-3.0..3.0)).collect();
                let p1 = body.project(&x);
                let p2 = body.project(&p1);
                assert!(linalg::dist(&p1, &p2) < 1e-12);
                assert!(body.contains(&p1));
            }
        }
    }

    #[test]
    fn projection_optimality_sampled() {
        let bodies = [
            ConvexBody::unit_ball(2).unwrap(),
            ConvexBody::centered_box(vec![1.0, 2.0]).unwrap(),
            ConvexBody::unit_ball(2)
                .unwrap()
                .intersect_ball(&[0.5, 0.1], 0.7)
                .unwrap(),
        ];
        let mut r = rng(11);
        for body in &bodies {
            for _ in 0..1000 {
                let x: Vec<f64> = (0..2).map(|_| r.gen_range(-4.0..4.0)).collect();
                let p = body.project(&x);
                // any feasible competitor is no closer
                let y = body.project(&[r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)]);
                assert!(linalg::dist(&p, &x) <= linalg::dist(&y, &x) + 1e-9);
            }
        }
    }

    #[test]
    fn gauge_closed_forms() {
        let ball = ConvexBody::unit_ball(2).unwrap();
        assert!((ball.gauge(&[0.5, 0.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!((ball.gauge(&[3.0, 4.0]).unwrap() - 5.0).abs() < 1e-12);
        let bx = ConvexBody::centered_box(vec![1.0, 2.0]).unwrap();
        assert!((bx.gauge(&[0.5, 1.0]).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(ball.gauge(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn gauge_bisection_matches_closed_form_on_caps() {
        // A centered cap that is just a smaller ball: bisection vs norm.
        let cap = ConvexBody {
            dim: 2,
            kind: BodyKind::BallIntersection {
                base: Box::new(ConvexBody::unit_ball(2).unwrap()),
                center: vec![0.0, 0.0],
                radius: 0.5,
            },
        };
        let mut r = rng(3);
        for _ in 0..100 {
            let x = [r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)];
            let g = cap.gauge(&x).unwrap();
            let want = linalg::norm(&x) / 0.5;
            // bisection accuracy is limited by the 1e-9 membership tolerance
            assert!((g - want).abs() < 1e-7 * want.max(1.0), "gauge {g} vs {want}");
        }
    }

    #[test]
    fn gauge_is_positively_homogeneous() {
        let bodies = [
            ConvexBody::unit_ball(3).unwrap(),
            ConvexBody::centered_box(vec![1.0, 2.0, 3.0]).unwrap(),
            ConvexBody::unit_ball(3)
                .unwrap()
                .intersect_ball(&[0.2, 0.2, 0.0], 1.5)
                .unwrap(),
        ];
        let mut r = rng(5);
        for body in &bodies {
            for _ in 0..300 {
                let x: Vec<f64> = (0..3).map(|_| r.gen_range(-2.0..2.0)).collect();
                let c: f64 = r.gen_range(0.1..5.0);
                let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
                let g1 = body.gauge(&cx).unwrap();
                let g2 = c * body.gauge(&x).unwrap();
                assert!((g1 - g2).abs() <= 1e-9 * g2.max(1.0), "{g1} vs {g2}");
            }
        }
    }

    #[test]
    fn gauge_penalty_examples() {
        let ball = ConvexBody::unit_ball(2).unwrap();
        assert!((ball.gauge_penalty(&[3.0, 0.0], 2.0).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(ball.gauge_penalty(&[0.3, 0.2], 5.0).unwrap(), 0.0);
        let seg = ConvexBody::interval(1.0).unwrap();
        assert!((seg.gauge_penalty(&[1.5], 10.0).unwrap() - 5.0).abs() < 1e-12);
        assert!(ball.gauge_penalty(&[1.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn gauge_penalty_is_alpha_lipschitz() {
        let body = ConvexBody::ball(2, 1.5).unwrap(); // contains the unit ball
        let alpha = 3.0;
        let mut r = rng(13);
        for _ in 0..1000 {
            let x = [r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0)];
            let y = [r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0)];
            let fx = body.gauge_penalty(&x, alpha).unwrap();
            let fy = body.gauge_penalty(&y, alpha).unwrap();
            assert!((fx - fy).abs() <= alpha * linalg::dist(&x, &y) + 1e-9);
        }
    }

    #[test]
    fn bounding_box_kinds() {
        let ball = ConvexBody::unit_ball(2).unwrap();
        assert_eq!(ball.bounding_half_widths(), vec![1.0, 1.0]);
        assert_eq!(ball.linf_diameter(), 2.0);

        let bx = ConvexBody::centered_box(vec![1.0, 3.0]).unwrap();
        assert_eq!(bx.bounding_box(), bx);

        let ball3 = ConvexBody::ball(3, 2.0).unwrap();
        assert_eq!(ball3.bounding_half_widths(), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn bounding_box_contains_boundary_samples() {
        let body = ConvexBody::unit_ball(3)
            .unwrap()
            .intersect_ball(&[0.3, -0.2, 0.0], 1.0)
            .unwrap();
        let cube = body.bounding_box();
        let mut r = rng(17);
        for _ in 0..2000 {
            let x: Vec<f64> = (0..3).map(|_| r.gen_range(-2.0..2.0)).collect();
            let p = body.project(&x); // on or in the body
            assert!(cube.contains(&p));
        }
    }

    #[test]
    fn linf_diameter_bounded_by_l2() {
        for body in [
            ConvexBody::unit_ball(4).unwrap(),
            ConvexBody::centered_box(vec![1.0, 3.0]).unwrap(),
            ConvexBody::unit_ball(2)
                .unwrap()
                .intersect_ball(&[0.2, 0.0], 0.9)
                .unwrap(),
        ] {
            assert!(body.linf_diameter() <= body.l2_diameter() + 1e-12);
            assert!(body.l2_diameter() > 0.0);
        }
    }

    #[test]
    fn intersect_ball_cases() {
        let ball = ConvexBody::unit_ball(2).unwrap();
        // centered cap collapses to the smaller ball
        let small = ball.intersect_ball(&[0.0, 0.0], 0.3).unwrap();
        assert_eq!(small, ConvexBody::ball(2, 0.3).unwrap());

        // 1-D interval capped near the right end
        let seg = ConvexBody::interval(1.0).unwrap();
        let capped = seg.intersect_ball(&[0.9], 0.5).unwrap();
        assert!(capped.contains(&[0.5]));
        assert!(capped.contains(&[1.0]));
        assert!(!capped.contains(&[0.3]));
        assert!(!capped.contains(&[1.2]));

        // empty intersection
        assert!(matches!(
            ball.intersect_ball(&[5.0, 0.0], 0.1),
            Err(Error::EmptyBody(_))
        ));
    }

    #[test]
    fn intersect_ball_membership_is_conjunction() {
        let base = ConvexBody::centered_box(vec![1.0, 1.0]).unwrap();
        let center = [0.6, 0.2];
        let radius = 0.7;
        let cap = base.intersect_ball(&center, radius).unwrap();
        let mut r = rng(23);
        for _ in 0..10_000 {
            let x = [r.gen_range(-1.5..1.5), r.gen_range(-1.5..1.5)];
            let want = base.contains(&x) && linalg::dist(&x, &center) <= radius + MEMBERSHIP_TOL;
            assert_eq!(cap.contains(&x), want, "at {x:?}");
        }
    }

    #[test]
    fn intersect_ball_diameter_cap() {
        let base = ConvexBody::unit_ball(2).unwrap();
        let cap = base.intersect_ball(&[0.5, 0.0], 0.2).unwrap();
        assert!(cap.l2_diameter() <= 0.4 + 1e-12);
    }

    #[test]
    fn uniform_ball_sample_radial_mass() {
        let mut r = rng(29);
        let n = 100_000;
        for (dim, want) in [(1usize, 0.5f64), (2, 0.25), (3, 0.125)] {
            let mut inside = 0usize;
            let mut sum = 0.0;
            for _ in 0..n {
                let x = uniform_ball_sample(dim, &mut r);
                let nrm = linalg::norm(&x);
                assert!(nrm <= 1.0 + 1e-12);
                if nrm <= 0.5 {
                    inside += 1;
                }
                sum += x[0];
            }
            let frac = inside as f64 / n as f64;
            assert!((frac - want).abs() < 0.01, "dim {dim}: frac {frac} want {want}");
            assert!((sum / n as f64).abs() < 0.01, "dim {dim}: mean {}", sum / n as f64);
        }
    }

    #[test]
    fn uniform_ball_sample_angular_uniformity_2d() {
        // chi^2 over 12 angular bins; crit value for df=11 at 0.999.
        let mut r = rng(31);
        let n = 120_000usize;
        let mut counts = [0usize; 12];
        for _ in 0..n {
            let x = uniform_ball_sample(2, &mut r);
            let ang = x[1].atan2(x[0]) + std::f64::consts::PI;
            let bin = ((ang / (2.0 * std::f64::consts::PI) * 12.0) as usize).min(11);
            counts[bin] += 1;
        }
        let expect = n as f64 / 12.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expect).powi(2) / expect)
            .sum();
        const CHI2_11_999: f64 = 31.264;
        assert!(chi2 < CHI2_11_999, "chi2 {chi2}");
    }

    #[test]
    fn uniform_ball_radial_cdf_chi2() {
        // radial CDF is r^p: 10 equiprobable shells, chi^2 df=9 at 0.999.
        const CHI2_9_999: f64 = 27.877;
        let mut r = rng(37);
        for dim in [2usize, 3] {
            let n = 100_000usize;
            let mut counts = [0usize; 10];
            for _ in 0..n {
                let x = uniform_ball_sample(dim, &mut r);
                let u = linalg::norm(&x).powi(dim as i32); // uniform in [0,1]
                counts[((u * 10.0) as usize).min(9)] += 1;
            }
            let expect = n as f64 / 10.0;
            let chi2: f64 = counts
                .iter()
                .map(|&c| (c as f64 - expect).powi(2) / expect)
                .sum();
            assert!(chi2 < CHI2_9_999, "dim {dim} chi2 {chi2}");
        }
    }

    #[test]
    fn isotropy_report() {
        let iso = ConvexBody::ball(2, 1.5).unwrap().isotropy();
        assert!(iso.contains_unit_ball);
        assert!(!iso.diameter_warning);
        let not_iso = ConvexBody::ball(2, 0.5).unwrap().isotropy();
        assert!(!not_iso.contains_unit_ball);
        let wide = ConvexBody::ball(2, 10.0).unwrap().isotropy();
        assert!(wide.diameter_warning);
    }

    #[test]
    fn inscribed_radius() {
        let ball = ConvexBody::unit_ball(2).unwrap();
        assert!((ball.inscribed_radius_at(&[0.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!((ball.inscribed_radius_at(&[0.5, 0.0]) - 0.5).abs() < 1e-12);
        let bx = ConvexBody::centered_box(vec![1.0, 2.0]).unwrap();
        assert!((bx.inscribed_radius_at(&[0.5, 0.0]) - 0.5).abs() < 1e-12);
        assert_eq!(ball.inscribed_radius_at(&[1.5, 0.0]), 0.0);
    }

    #[test]
    fn invalid_constructions() {
        assert!(ConvexBody::ball(0, 1.0).is_err());
        assert!(ConvexBody::ball(2, -1.0).is_err());
        assert!(ConvexBody::centered_box(vec![]).is_err());
        assert!(ConvexBody::centered_box(vec![1.0, 0.0]).is_err());
    }
}
