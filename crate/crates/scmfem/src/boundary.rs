//! Boundary datum regularization: the L2(Gamma) projection of a prescribed
//! trace onto the piecewise-linear boundary space, with singularity-aware
//! quadrature for the right-hand side.

use crate::fem::{cg_solve, SparseMatrix};
use crate::mesh::TriMesh;
use crate::quadrature::{gauss1d, BoundarySample, GradedBoundaryRule};
use crate::{Error, Result};
use std::sync::Arc;

/// A pointwise boundary trace in Cartesian coordinates.
pub type BoundaryTrace = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

/// The regularized boundary datum: the original trace together with its
/// projection coefficients over the boundary nodes in walk order.
#[derive(Clone)]
pub struct BoundaryDatum {
    source: BoundaryTrace,
    projected: Vec<f64>,
    l2_norm_estimate: f64,
}

impl BoundaryDatum {
    pub fn source(&self) -> &BoundaryTrace {
        &self.source
    }

    /// Coefficients over boundary nodes, ordered like `mesh.boundary()`.
    pub fn projected(&self) -> &[f64] {
        &self.projected
    }

    /// Graded-rule estimate of the trace's L2(Gamma) norm.  For traces with
    /// near-critical corner blowup this is informational: most of the mass
    /// can sit at radii no floating-point quadrature resolves.
    pub fn l2_norm_estimate(&self) -> f64 {
        self.l2_norm_estimate
    }
}

/// Exact boundary mass matrix over boundary nodes in walk order: cyclic
/// tridiagonal, each edge of length L contributing (L/6)[[2,1],[1,2]].
pub fn boundary_mass(mesh: &TriMesh) -> SparseMatrix {
    let n = mesh.boundary().len();
    let mut triplets = Vec::with_capacity(4 * n);
    for (i, edge) in mesh.boundary_edges().iter().enumerate() {
        let j = (i + 1) % n;
        let l = edge.length;
        triplets.push((i, i, l / 3.0));
        triplets.push((j, j, l / 3.0));
        triplets.push((i, j, l / 6.0));
        triplets.push((j, i, l / 6.0));
    }
    SparseMatrix::from_triplets(n, triplets, true)
}

/// L2(Gamma) norm of a pointwise trace under the graded boundary rule.
pub fn boundary_l2_norm(u: &dyn Fn([f64; 2]) -> f64, rule: &GradedBoundaryRule) -> Result<f64> {
    let sq = rule.integrate(&|s: &BoundarySample| {
        let v = u(s.point);
        v * v
    })?;
    Ok(sq.sqrt())
}

/// Two-point Gauss samples on the arc segment underlying a one-point
/// graded-rule sample: returns (point, weight, walk fraction) pairs.
fn split_gauss2(s: &BoundarySample, edge_len: f64) -> [([f64; 2], f64, f64); 2] {
    let tangent = [-s.normal[1], s.normal[0]];
    let off = 0.5 * s.weight / 3f64.sqrt();
    let half = 0.5 * s.weight;
    [-off, off].map(|d| {
        (
            [s.point[0] + d * tangent[0], s.point[1] + d * tangent[1]],
            half,
            s.t + d / edge_len,
        )
    })
}

/// Right-hand side (u, hat_i) over boundary nodes: the graded partition
/// with two-point Gauss per segment on the corner-adjacent edges, plain
/// two-point (order-3) Gauss on every other edge.
fn projection_rhs(
    mesh: &TriMesh,
    u: &dyn Fn([f64; 2]) -> f64,
    graded: &GradedBoundaryRule,
) -> Result<Vec<f64>> {
    let n = mesh.boundary().len();
    let edges = mesh.boundary_edges();
    let gauss = gauss1d(2)?;
    let mut b = vec![0.0; n];
    let mut add = |i: usize, j: usize, p: [f64; 2], w: f64, t: f64| -> Result<()> {
        let v = u(p);
        if !v.is_finite() {
            return Err(Error::NonFiniteSample(p[0], p[1]));
        }
        b[i] += w * v * (1.0 - t);
        b[j] += w * v * t;
        Ok(())
    };
    for (i, edge) in edges.iter().enumerate() {
        let j = (i + 1) % n;
        if edge.r_min == 0.0 {
            for s in graded.samples.iter().filter(|s| s.edge == (edge.a, edge.b)) {
                for (p, w, t) in split_gauss2(s, edge.length) {
                    add(i, j, p, w, t)?;
                }
            }
        } else {
            for &(t, w) in &gauss {
                let p = [
                    edge.pa[0] + (edge.pb[0] - edge.pa[0]) * t,
                    edge.pa[1] + (edge.pb[1] - edge.pa[1]) * t,
                ];
                add(i, j, p, edge.length * w, t)?;
            }
        }
    }
    Ok(b)
}

/// Projects the trace `u` onto the piecewise-linear boundary space in
/// L2(Gamma): solves the cyclic tridiagonal system M c = b.
pub fn l2_project_boundary(
    u: BoundaryTrace,
    mesh: &TriMesh,
    graded: &GradedBoundaryRule,
) -> Result<BoundaryDatum> {
    let mass = boundary_mass(mesh);
    let b = projection_rhs(mesh, u.as_ref(), graded)?;
    let projected = cg_solve(&mass, &b, 1e-13)?;
    let l2_norm_estimate = boundary_l2_norm(u.as_ref(), graded)?;
    Ok(BoundaryDatum {
        source: u,
        projected,
        l2_norm_estimate,
    })
}

/// Graded-rule evaluation of ||u - u^h||_{L2(Gamma)} for a projected datum.
pub fn boundary_l2_error(
    datum: &BoundaryDatum,
    mesh: &TriMesh,
    rule: &GradedBoundaryRule,
) -> Result<f64> {
    let pos = mesh.boundary_positions();
    let c = &datum.projected;
    let u = datum.source.as_ref();
    let sq = rule.integrate(&|s: &BoundarySample| {
        let (i, j) = (pos[&s.edge.0], pos[&s.edge.1]);
        let uh = c[i] * (1.0 - s.t) + c[j] * s.t;
        let d = u(s.point) - uh;
        d * d
    })?;
    Ok(sq.sqrt())
}
