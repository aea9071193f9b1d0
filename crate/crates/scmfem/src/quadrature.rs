//! Numerical integration: symmetric triangle rules, composite corner rules
//! for integrands with an `r^alpha` factor at the origin, and the graded
//! one-dimensional boundary rule that resolves boundary integrands of the
//! form `r^(delta-1)` with tiny positive `delta`.

use crate::mesh::BoundaryEdge;
use crate::{Error, Result};

/// Relative tail target for the layered corner rule.
const CORNER_TAIL: f64 = 1e-12;
/// Layer-count clamp for the corner rule.
const CORNER_MIN_LAYERS: usize = 8;
const CORNER_MAX_LAYERS: usize = 600;
/// Hard cap on graded-rule segments (guards degenerate marching).
const MAX_SEGMENTS: usize = 5_000_000;

/// Gauss-Legendre nodes and weights on [0, 1]; weights sum to 1.
pub fn gauss1d(n: usize) -> Result<Vec<(f64, f64)>> {
    let s = |x: f64| x.sqrt();
    let on11: Vec<(f64, f64)> = match n {
        1 => vec![(0.0, 2.0)],
        2 => {
            let x = 1.0 / s(3.0);
            vec![(-x, 1.0), (x, 1.0)]
        }
        3 => {
            let x = s(3.0 / 5.0);
            vec![(-x, 5.0 / 9.0), (0.0, 8.0 / 9.0), (x, 5.0 / 9.0)]
        }
        4 => {
            let x1 = s(3.0 / 7.0 - 2.0 / 7.0 * s(6.0 / 5.0));
            let x2 = s(3.0 / 7.0 + 2.0 / 7.0 * s(6.0 / 5.0));
            let w1 = (18.0 + s(30.0)) / 36.0;
            let w2 = (18.0 - s(30.0)) / 36.0;
            vec![(-x2, w2), (-x1, w1), (x1, w1), (x2, w2)]
        }
        5 => {
            let x1 = s(5.0 - 2.0 * s(10.0 / 7.0)) / 3.0;
            let x2 = s(5.0 + 2.0 * s(10.0 / 7.0)) / 3.0;
            let w0 = 128.0 / 225.0;
            let w1 = (322.0 + 13.0 * s(70.0)) / 900.0;
            let w2 = (322.0 - 13.0 * s(70.0)) / 900.0;
            vec![(-x2, w2), (-x1, w1), (0.0, w0), (x1, w1), (x2, w2)]
        }
        _ => return Err(Error::UnsupportedOrder(n as u32)),
    };
    Ok(on11
        .into_iter()
        .map(|(x, w)| (0.5 * (1.0 + x), 0.5 * w))
        .collect())
}

/// A symmetric quadrature rule on the reference triangle in barycentric
/// form; weights sum to 1 and the rule is applied as `area * sum w f(p)`.
#[derive(Debug, Clone)]
pub struct TriRule {
    pub order: u32,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Builds the rule of the requested polynomial exactness degree.
///
/// Supported: 1 (centroid), 2 (edge midpoints), 3 (six permutations of the
/// roots of 60t^3 - 60t^2 + 15t - 1), 5 (the classical 7-point rule), 7 (a
/// 20-point conical-product rule, positive weights).
pub fn tri_rule(order: u32) -> Result<TriRule> {
    let (points, weights): (Vec<[f64; 3]>, Vec<f64>) = match order {
        1 => (vec![[1.0 / 3.0; 3]], vec![1.0]),
        2 => (
            vec![
                [0.5, 0.5, 0.0],
                [0.0, 0.5, 0.5],
                [0.5, 0.0, 0.5],
            ],
            vec![1.0 / 3.0; 3],
        ),
        3 => {
            // Roots of 60t^3 - 60t^2 + 15t - 1 via the trigonometric cubic
            // formula; they sum to 1, so each permutation is barycentric.
            let phi = (4.0f64 / 5.0).acos() / 3.0;
            let root =
                |k: f64| 1.0 / 3.0 + (1.0 / 3.0) * (phi - 2.0 * std::f64::consts::PI * k / 3.0).cos();
            let (a, b, c) = (root(0.0), root(1.0), root(2.0));
            (
                vec![
                    [a, b, c],
                    [a, c, b],
                    [b, a, c],
                    [b, c, a],
                    [c, a, b],
                    [c, b, a],
                ],
                vec![1.0 / 6.0; 6],
            )
        }
        5 => {
            let s15 = 15.0f64.sqrt();
            let a = (6.0 - s15) / 21.0;
            let b = (6.0 + s15) / 21.0;
            let wa = (155.0 - s15) / 1200.0;
            let wb = (155.0 + s15) / 1200.0;
            let mut pts = vec![[1.0 / 3.0; 3]];
            let mut wts = vec![9.0 / 40.0];
            for (t, w) in [(a, wa), (b, wb)] {
                for p in [
                    [1.0 - 2.0 * t, t, t],
                    [t, 1.0 - 2.0 * t, t],
                    [t, t, 1.0 - 2.0 * t],
                ] {
                    pts.push(p);
                    wts.push(w);
                }
            }
            (pts, wts)
        }
        7 => {
            // Conical product: x = s, y = t(1-s) with Jacobian (1-s) maps
            // [0,1]^2 onto the triangle; degree-7 monomials need degree 8 in
            // s (Jacobian included) and 7 in t, covered by 5- and 4-point
            // Gauss.  Weights stay positive.
            let gs = gauss1d(5)?;
            let gt = gauss1d(4)?;
            let mut pts = Vec::with_capacity(20);
            let mut wts = Vec::with_capacity(20);
            for &(s, ws) in &gs {
                for &(t, wt) in &gt {
                    let x = s;
                    let y = t * (1.0 - s);
                    pts.push([1.0 - x - y, x, y]);
                    wts.push(2.0 * ws * wt * (1.0 - s));
                }
            }
            (pts, wts)
        }
        other => return Err(Error::UnsupportedOrder(other)),
    };
    Ok(TriRule {
        order,
        points,
        weights,
    })
}

/// Integrates `f` over the physical triangle `tri` with `rule`.
pub fn integrate_triangle(
    f: &dyn Fn([f64; 2]) -> f64,
    tri: [[f64; 2]; 3],
    rule: &TriRule,
) -> Result<f64> {
    let area = 0.5
        * ((tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1])
            - (tri[2][0] - tri[0][0]) * (tri[1][1] - tri[0][1]));
    let mut sum = 0.0;
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let x = p[0] * tri[0][0] + p[1] * tri[1][0] + p[2] * tri[2][0];
        let y = p[0] * tri[0][1] + p[1] * tri[1][1] + p[2] * tri[2][1];
        let v = f([x, y]);
        if !v.is_finite() {
            return Err(Error::NonFiniteSample(x, y));
        }
        sum += w * v;
    }
    Ok(area * sum)
}

/// Number of geometric layers so the `rho^L / (1 - rho)` tail of an
/// `r^alpha` integrand drops below the relative target.
pub fn corner_layers(alpha: f64) -> Result<usize> {
    if !(alpha > -2.0) {
        return Err(Error::NonIntegrable(alpha));
    }
    let rho = 2.0f64.powf(-(alpha + 2.0));
    let l = if rho <= 0.0 {
        CORNER_MIN_LAYERS
    } else {
        ((CORNER_TAIL * (1.0 - rho)).ln() / rho.ln()).ceil() as usize
    };
    Ok(l.clamp(CORNER_MIN_LAYERS, CORNER_MAX_LAYERS))
}

/// Integrates `f ~ r^alpha` near `tri[0]`, which must be the origin, by
/// splitting the triangle into geometrically shrinking layers (factor 2
/// toward the corner) and applying the degree-7 rule on each trapezoid
/// half.  The innermost triangle below the last layer is dropped; the layer
/// count makes that tail irrelevant at the stated `alpha`.
pub fn integrate_corner_triangle(
    f: &dyn Fn([f64; 2]) -> f64,
    tri: [[f64; 2]; 3],
    alpha: f64,
) -> Result<f64> {
    integrate_corner_triangle_with_depth(f, tri, alpha, corner_layers(alpha)?)
}

/// Cells stop splitting once their diameter is below this fraction of
/// their distance from the origin; the fixed-order rule then resolves a
/// radial power factor to ~1e-10 relative per cell.
const SPLIT_RATIO: f64 = 0.25;
const SPLIT_DEPTH: u32 = 12;

/// Degree-7 rule with recursive quadrisection until every cell is small
/// against its distance from the origin.  Keeps a fixed-order rule
/// accurate on integrands with an `r^alpha` factor whose scale changes
/// across the cell; the cell must not contain the origin.
pub(crate) fn composite_triangle(
    f: &dyn Fn([f64; 2]) -> f64,
    tri: [[f64; 2]; 3],
    rule: &TriRule,
    depth: u32,
) -> Result<f64> {
    let d_min = tri
        .iter()
        .map(|v| v[0].hypot(v[1]))
        .fold(f64::INFINITY, f64::min);
    let diam = (0..3)
        .map(|i| {
            let a = tri[i];
            let b = tri[(i + 1) % 3];
            (a[0] - b[0]).hypot(a[1] - b[1])
        })
        .fold(0.0, f64::max);
    if depth == 0 || diam <= SPLIT_RATIO * d_min {
        return integrate_triangle(f, tri, rule);
    }
    let mid = |a: [f64; 2], b: [f64; 2]| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    let m01 = mid(tri[0], tri[1]);
    let m12 = mid(tri[1], tri[2]);
    let m20 = mid(tri[2], tri[0]);
    let mut sum = 0.0;
    for child in [
        [tri[0], m01, m20],
        [m01, tri[1], m12],
        [m20, m12, tri[2]],
        [m01, m12, m20],
    ] {
        sum += composite_triangle(f, child, rule, depth - 1)?;
    }
    Ok(sum)
}

/// [`integrate_corner_triangle`] with an explicit layer count, for
/// depth-doubling stability checks.
pub fn integrate_corner_triangle_with_depth(
    f: &dyn Fn([f64; 2]) -> f64,
    tri: [[f64; 2]; 3],
    alpha: f64,
    layers: usize,
) -> Result<f64> {
    if !(alpha > -2.0) {
        return Err(Error::NonIntegrable(alpha));
    }
    let diam = (tri[1][0] - tri[0][0])
        .hypot(tri[1][1] - tri[0][1])
        .max((tri[2][0] - tri[0][0]).hypot(tri[2][1] - tri[0][1]));
    if tri[0][0].hypot(tri[0][1]) > 1e-14 * diam.max(1.0) {
        return Err(Error::NotACornerTriangle);
    }
    // Layers below ~2^-1000/|alpha| would push r^alpha outside f64 range;
    // their mass is far below the tail target for every alpha >= -1.9.
    let float_safe = ((f64::MAX_EXP as f64 - 60.0) / alpha.abs().max(0.5)) as usize;
    let layers = layers.clamp(1, float_safe);
    let rule = tri_rule(7)?;
    let scale = |p: [f64; 2], a: f64| [a * p[0], a * p[1]];
    // Smallest layers first: contributions grow geometrically outward.
    let mut sum = 0.0;
    for k in (0..layers).rev() {
        let outer = 2.0f64.powi(-(k as i32));
        let inner = 0.5 * outer;
        let p1o = scale(tri[1], outer);
        let p2o = scale(tri[2], outer);
        let p1i = scale(tri[1], inner);
        let p2i = scale(tri[2], inner);
        sum += composite_triangle(f, [p1i, p1o, p2o], &rule, SPLIT_DEPTH)?;
        sum += composite_triangle(f, [p1i, p2o, p2i], &rule, SPLIT_DEPTH)?;
    }
    Ok(sum)
}

/// One quadrature sample of the graded boundary rule.
///
/// `edge` are the mesh node indices of the parent boundary edge in walk
/// order, `t` the arclength fraction from `edge.0` toward `edge.1`, and
/// `normal` the unit outward normal of that edge.
#[derive(Debug, Clone, Copy)]
pub struct BoundarySample {
    pub point: [f64; 2],
    pub weight: f64,
    pub r: f64,
    pub edge: (usize, usize),
    pub t: f64,
    pub normal: [f64; 2],
}

/// Composite one-point rule on the boundary, graded toward the corner.
#[derive(Debug, Clone)]
pub struct GradedBoundaryRule {
    pub samples: Vec<BoundarySample>,
    pub mu: f64,
    pub radius: f64,
    pub h: f64,
}

impl GradedBoundaryRule {
    /// Sum of weights, i.e. the rule applied to 1.
    pub fn total_weight(&self) -> f64 {
        self.samples.iter().map(|s| s.weight).sum()
    }

    /// Applies the rule to a pointwise integrand.
    pub fn integrate(&self, f: &dyn Fn(&BoundarySample) -> f64) -> Result<f64> {
        let mut sum = 0.0;
        for s in &self.samples {
            let v = f(s);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample(s.point[0], s.point[1]));
            }
            sum += s.weight * v;
        }
        Ok(sum)
    }
}

/// Builds the graded boundary rule over the given boundary edges.
///
/// Each edge closer to the corner than `radius` is partitioned by marching
/// from its near endpoint: the corner-touching edges start with a segment of
/// length `h^(1/mu)` and every further segment has length `h * r^(1-mu)`
/// evaluated at its start (capped at the edge end, and at the remaining
/// length once `r >= radius`).  Every segment carries one midpoint sample.
/// Edges entirely at distance `radius` or more keep a single midpoint.
///
/// The `h^(1/mu)` corner segment is kept at its exact length even when that
/// is far below machine scale: for near-critical integrands most of the
/// integral lives at such radii, and the sample values stay finite in f64.
/// A relative floor on the marching step only guarantees termination.
pub fn graded_boundary_rule(
    edges: &[BoundaryEdge],
    h: f64,
    mu: f64,
    radius: f64,
) -> Result<GradedBoundaryRule> {
    if !(mu > 0.0 && mu <= 1.0) || !mu.is_finite() {
        return Err(Error::InvalidGrading(mu));
    }
    if !(radius > 0.0 && radius <= 2.0f64.sqrt()) || !radius.is_finite() {
        return Err(Error::InvalidGradingRadius(radius));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidMeshSize(h));
    }
    let mut samples = Vec::new();
    for e in edges {
        let (mut pa, mut pb) = (e.pa, e.pb);
        let (ra, rb) = (pa[0].hypot(pa[1]), pb[0].hypot(pb[1]));
        let swapped = rb < ra;
        if swapped {
            std::mem::swap(&mut pa, &mut pb);
        }
        let d = [pb[0] - pa[0], pb[1] - pa[1]];
        let len = e.length;
        // Outward normal from the walk orientation (domain on the left).
        let dw = [e.pb[0] - e.pa[0], e.pb[1] - e.pa[1]];
        let normal = [dw[1] / len, -dw[0] / len];
        let r_near = ra.min(rb);
        let mut cuts: Vec<f64> = vec![0.0];
        if r_near >= radius {
            cuts.push(len);
        } else {
            let mut s = 0.0;
            if r_near == 0.0 {
                s = h.powf(1.0 / mu).min(len);
                cuts.push(s);
            }
            while s < len {
                if samples.len() + cuts.len() > MAX_SEGMENTS {
                    return Err(Error::QuadratureUnstable(h));
                }
                let p = [pa[0] + d[0] * (s / len), pa[1] + d[1] * (s / len)];
                let r = p[0].hypot(p[1]);
                let step = if r >= radius {
                    len - s
                } else {
                    (h * r.powf(1.0 - mu)).max(s * 1e-14).max(1e-300)
                };
                s = (s + step).min(len);
                cuts.push(s);
            }
        }
        for w in cuts.windows(2) {
            let (s0, s1) = (w[0], w[1]);
            if s1 <= s0 {
                continue;
            }
            let sm = 0.5 * (s0 + s1);
            let point = [pa[0] + d[0] * (sm / len), pa[1] + d[1] * (sm / len)];
            let t_walk = if swapped { 1.0 - sm / len } else { sm / len };
            samples.push(BoundarySample {
                point,
                weight: s1 - s0,
                r: point[0].hypot(point[1]),
                edge: (e.a, e.b),
                t: t_walk,
                normal,
            });
        }
    }
    Ok(GradedBoundaryRule {
        samples,
        mu,
        radius,
        h,
    })
}

/// The same partition with every segment split into `k` equal pieces;
/// used for quadrature-depth stability checks.
pub fn refine_boundary_rule(rule: &GradedBoundaryRule, k: usize) -> GradedBoundaryRule {
    assert!(k >= 1);
    let mut samples = Vec::with_capacity(rule.samples.len() * k);
    for s in &rule.samples {
        // Reconstruct the segment from its midpoint sample; the walk tangent
        // is the outward normal rotated back.  `t` is kept from the parent
        // sample (the refined rule only serves norm stability checks).
        let tang = [-s.normal[1], s.normal[0]];
        let w = s.weight / k as f64;
        for j in 0..k {
            let off = (j as f64 + 0.5) * w - 0.5 * s.weight;
            let point = [s.point[0] + tang[0] * off, s.point[1] + tang[1] * off];
            samples.push(BoundarySample {
                point,
                weight: w,
                r: point[0].hypot(point[1]),
                edge: s.edge,
                t: s.t,
                normal: s.normal,
            });
        }
    }
    GradedBoundaryRule {
        samples,
        mu: rule.mu,
        radius: rule.radius,
        h: rule.h,
    }
}

/// Exact integral of x^a y^b over the reference triangle; the standard
/// closed form a! b! / (a+b+2)!.
#[cfg(test)]
fn monomial_exact(a: u32, b: u32) -> f64 {
    let fact = |n: u32| (1..=n as u64).product::<u64>() as f64;
    fact(a) * fact(b) / fact(a + b + 2)
}
