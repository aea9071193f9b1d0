//! The dual singular complement pipeline: the discrete dual singular
//! function, its augmented adjoint pair, and the correction coefficients
//! that combine into the corrected solution.

use crate::boundary::BoundaryDatum;
use crate::domain::{PolygonalDomain, SingularKind, SingularTerm};
use crate::fem::{
    assemble_load, assemble_mass, assemble_stiffness, lift_boundary, solve_dirichlet_assembled,
    FeFunction, SparseMatrix,
};
use crate::mesh::TriMesh;
use crate::quadrature::{integrate_corner_triangle, tri_rule, GradedBoundaryRule};
use crate::{Error, Result};
use std::sync::Arc;

/// A finite element function augmented by an explicit corner term
/// `coefficient * r^(sign lambda) sin(lambda theta)`.
#[derive(Clone)]
pub struct AugmentedFunction {
    pub fe_part: FeFunction,
    pub singular: SingularTerm,
}

impl AugmentedFunction {
    /// Pointwise value; `None` outside the mesh.
    pub fn eval(&self, domain: &PolygonalDomain, p: [f64; 2]) -> Option<f64> {
        self.fe_part
            .eval(p)
            .map(|v| v + self.singular.eval(domain, p))
    }

    /// Value at a point known to lie in mesh element `e`.
    pub fn eval_in_element(&self, domain: &PolygonalDomain, e: usize, p: [f64; 2]) -> f64 {
        self.fe_part.eval_in_element(e, p) + self.singular.eval(domain, p)
    }

    /// Nodal values over the boundary walk, singular trace included (0 at
    /// the corner, where the trace limit along both legs vanishes).
    pub fn boundary_nodal_values(&self, domain: &PolygonalDomain) -> Vec<f64> {
        let mesh = self.fe_part.mesh();
        mesh.boundary()
            .iter()
            .map(|&n| {
                let sing = if n == mesh.corner_node() {
                    0.0
                } else {
                    self.singular.eval(domain, mesh.nodes()[n])
                };
                self.fe_part.coeffs()[n] + sing
            })
            .collect()
    }
}

/// The scalar outputs of the correction pipeline.
#[derive(Debug, Clone, Copy)]
pub struct CorrectionCoefficients {
    pub beta_h: f64,
    pub gamma_h: f64,
    pub alpha_h: f64,
    pub delta_h: f64,
    /// `||p_s^h||^2` over the domain, the shared denominator.
    pub ps_norm_sq: f64,
}

/// Barycentric coordinates of `p` in the triangle `tri`.
fn bary(tri: &[[f64; 2]; 3], p: [f64; 2]) -> [f64; 3] {
    let [a, b, c] = tri;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Precomputed per-mesh quantities shared by the correction operations:
/// mass and stiffness matrices, the cross loads `(hat_i, r^-lambda sin)`,
/// and the mesh integral of the squared dual singular term.
pub struct SingularContext {
    mesh: Arc<TriMesh>,
    domain: PolygonalDomain,
    mass: SparseMatrix,
    stiffness: SparseMatrix,
    dual_load: Vec<f64>,
    dual_norm_sq: f64,
}

impl SingularContext {
    pub fn new(mesh: Arc<TriMesh>, domain: &PolygonalDomain) -> Result<Self> {
        if domain.lambda() >= 1.0 {
            return Err(Error::ConvexCorner(domain.omega()));
        }
        let mass = assemble_mass(&mesh)?;
        let stiffness = assemble_stiffness(&mesh)?;
        let unit_dual = SingularTerm::dual(1.0);
        let dual_load = cross_load(&mesh, domain, &unit_dual)?;
        let dual_norm_sq = term_norm_sq(&mesh, domain, &unit_dual)?;
        Ok(Self {
            mesh: mesh.clone(),
            domain: domain.clone(),
            mass,
            stiffness,
            dual_load,
            dual_norm_sq,
        })
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn domain(&self) -> &PolygonalDomain {
        &self.domain
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    /// `(v, r^-lambda sin(lambda theta))` for a finite element function.
    pub fn cross_dual(&self, v: &FeFunction) -> f64 {
        self.dual_load
            .iter()
            .zip(v.coeffs())
            .map(|(w, c)| w * c)
            .sum()
    }

    /// `||fe + c r^-lambda sin||^2` for a dual-type augmented function.
    pub fn augmented_norm_sq(&self, f: &AugmentedFunction) -> Result<f64> {
        if f.singular.kind != SingularKind::Dual {
            return Err(Error::InvalidConfig(
                "augmented norm context only holds dual-term integrals".into(),
            ));
        }
        let c = f.singular.coefficient;
        let fe = &f.fe_part;
        let n = self.mass.bilinear(fe.coeffs(), fe.coeffs())
            + 2.0 * c * self.cross_dual(fe)
            + c * c * self.dual_norm_sq;
        if !(n > 0.0) && !(c == 0.0 && fe.coeffs().iter().all(|&x| x == 0.0)) {
            return Err(Error::DegenerateSingularNorm(n));
        }
        Ok(n)
    }
}

/// Load vector `(hat_i, term)` over all mesh nodes: the corner-aware rule
/// on elements touching the origin, degree-7 Gauss elsewhere.
fn cross_load(mesh: &TriMesh, domain: &PolygonalDomain, term: &SingularTerm) -> Result<Vec<f64>> {
    let rule = tri_rule(7)?;
    let alpha = term.kind.sign() * domain.lambda();
    let mut w = vec![0.0; mesh.nodes().len()];
    for (e, el) in mesh.elements().iter().enumerate() {
        let coords = mesh.element_coords(e);
        if mesh.is_corner_element(e) {
            let c = (0..3)
                .find(|&k| el[k] == mesh.corner_node())
                .expect("corner element without corner node");
            let tri = [coords[c], coords[(c + 1) % 3], coords[(c + 2) % 3]];
            for j in 0..3 {
                let f = |p: [f64; 2]| bary(&tri, p)[j] * term.eval(domain, p);
                w[el[(c + j) % 3]] += integrate_corner_triangle(&f, tri, alpha)?;
            }
        } else {
            let area = mesh.element_area(e);
            for (bc, &wk) in rule.points.iter().zip(&rule.weights) {
                let p = [
                    bc[0] * coords[0][0] + bc[1] * coords[1][0] + bc[2] * coords[2][0],
                    bc[0] * coords[0][1] + bc[1] * coords[1][1] + bc[2] * coords[2][1],
                ];
                let v = term.eval(domain, p);
                if !v.is_finite() {
                    return Err(Error::NonFiniteSample(p[0], p[1]));
                }
                for j in 0..3 {
                    w[el[j]] += area * wk * bc[j] * v;
                }
            }
        }
    }
    Ok(w)
}

/// Mesh integral of `term^2`: corner-aware near the origin, degree-7 Gauss
/// elsewhere.
fn term_norm_sq(mesh: &TriMesh, domain: &PolygonalDomain, term: &SingularTerm) -> Result<f64> {
    let rule = tri_rule(7)?;
    let alpha = 2.0 * term.kind.sign() * domain.lambda();
    let mut total = 0.0;
    for (e, el) in mesh.elements().iter().enumerate() {
        let coords = mesh.element_coords(e);
        if mesh.is_corner_element(e) {
            let c = (0..3)
                .find(|&k| el[k] == mesh.corner_node())
                .expect("corner element without corner node");
            let tri = [coords[c], coords[(c + 1) % 3], coords[(c + 2) % 3]];
            let f = |p: [f64; 2]| {
                let v = term.eval(domain, p);
                v * v
            };
            total += integrate_corner_triangle(&f, tri, alpha)?;
        } else {
            let area = mesh.element_area(e);
            for (bc, &wk) in rule.points.iter().zip(&rule.weights) {
                let p = [
                    bc[0] * coords[0][0] + bc[1] * coords[1][0] + bc[2] * coords[2][0],
                    bc[0] * coords[0][1] + bc[1] * coords[1][1] + bc[2] * coords[2][1],
                ];
                let v = term.eval(domain, p);
                if !v.is_finite() {
                    return Err(Error::NonFiniteSample(p[0], p[1]));
                }
                total += area * wk * v * v;
            }
        }
    }
    Ok(total)
}

/// Nodal boundary values of a singular term along the walk (0 at the
/// corner, where the trace limit along both legs vanishes).
fn singular_trace_values(
    mesh: &TriMesh,
    domain: &PolygonalDomain,
    term: &SingularTerm,
) -> Vec<f64> {
    mesh.boundary()
        .iter()
        .map(|&n| {
            if n == mesh.corner_node() {
                0.0
            } else {
                term.eval(domain, mesh.nodes()[n])
            }
        })
        .collect()
}

/// The discrete dual singular function `p_s^h`: nodal lifting of the dual
/// trace, a discrete-harmonic correction, and the explicit dual term.
pub fn compute_dual_singular(ctx: &SingularContext, tol: f64) -> Result<AugmentedFunction> {
    let term = SingularTerm::dual(1.0);
    let g = singular_trace_values(&ctx.mesh, &ctx.domain, &term);
    let r_h = lift_boundary(&ctx.mesh, &g);
    let rhs = ctx.stiffness.matvec(r_h.coeffs());
    let zero = vec![0.0; g.len()];
    let p_star = solve_dirichlet_assembled(&ctx.mesh, &ctx.stiffness, &rhs, &zero, tol)?;
    let mut fe_part = p_star;
    fe_part.axpy(-1.0, &r_h);
    Ok(AugmentedFunction {
        fe_part,
        singular: term,
    })
}

/// `beta_h = ||p_s^h||^2 / pi`.
pub fn compute_beta(ctx: &SingularContext, ps: &AugmentedFunction) -> Result<f64> {
    Ok(ctx.augmented_norm_sq(ps)? / std::f64::consts::PI)
}

/// The augmented adjoint approximation `phi_s^h`: solves the discrete
/// problem driven by `p_s^h` and the primal singular lifting.
pub fn compute_phi(
    ctx: &SingularContext,
    ps: &AugmentedFunction,
    beta_h: f64,
    tol: f64,
) -> Result<AugmentedFunction> {
    let primal = SingularTerm::primal(1.0);
    let g = singular_trace_values(&ctx.mesh, &ctx.domain, &primal);
    let s_h = lift_boundary(&ctx.mesh, &g);
    let mut rhs = ctx.mass.matvec(ps.fe_part.coeffs());
    let c = ps.singular.coefficient;
    let ks = ctx.stiffness.matvec(s_h.coeffs());
    for ((r, w), k) in rhs.iter_mut().zip(&ctx.dual_load).zip(&ks) {
        *r += c * w + beta_h * k;
    }
    let zero = vec![0.0; g.len()];
    let phi_star = solve_dirichlet_assembled(&ctx.mesh, &ctx.stiffness, &rhs, &zero, tol)?;
    let mut fe_part = phi_star;
    fe_part.axpy(-beta_h, &s_h);
    Ok(AugmentedFunction {
        fe_part,
        singular: SingularTerm::primal(beta_h),
    })
}

/// `gamma_h = (y_h, p_s^h) / ||p_s^h||^2`.
pub fn compute_gamma(
    ctx: &SingularContext,
    y_h: &FeFunction,
    ps: &AugmentedFunction,
) -> Result<f64> {
    let den = ctx.augmented_norm_sq(ps)?;
    if den <= 0.0 {
        return Err(Error::DegenerateSingularNorm(den));
    }
    let num = ctx.mass.bilinear(y_h.coeffs(), ps.fe_part.coeffs())
        + ps.singular.coefficient * ctx.cross_dual(y_h);
    Ok(num / den)
}

/// `(f, term)` over the mesh for a pointwise source.
fn cross_source(
    mesh: &TriMesh,
    domain: &PolygonalDomain,
    f: &dyn Fn([f64; 2]) -> f64,
    term: &SingularTerm,
) -> Result<f64> {
    let rule = tri_rule(7)?;
    let alpha = term.kind.sign() * domain.lambda();
    let mut total = 0.0;
    for e in 0..mesh.elements().len() {
        let coords = mesh.element_coords(e);
        if mesh.is_corner_element(e) {
            let el = mesh.elements()[e];
            let c = (0..3)
                .find(|&k| el[k] == mesh.corner_node())
                .expect("corner element without corner node");
            let tri = [coords[c], coords[(c + 1) % 3], coords[(c + 2) % 3]];
            let g = |p: [f64; 2]| f(p) * term.eval(domain, p);
            total += integrate_corner_triangle(&g, tri, alpha)?;
        } else {
            let area = mesh.element_area(e);
            for (bc, &wk) in rule.points.iter().zip(&rule.weights) {
                let p = [
                    bc[0] * coords[0][0] + bc[1] * coords[1][0] + bc[2] * coords[2][0],
                    bc[0] * coords[0][1] + bc[1] * coords[1][1] + bc[2] * coords[2][1],
                ];
                let v = f(p) * term.eval(domain, p);
                if !v.is_finite() {
                    return Err(Error::NonFiniteSample(p[0], p[1]));
                }
                total += area * wk * v;
            }
        }
    }
    Ok(total)
}

/// The explicit correction coefficient.
///
/// Numerator: `(B_h u^h, p_s^h) - (grad B_h u^h, grad phi~_h)
/// - beta_h (u, d_n(r^lambda sin(lambda theta)))_Gamma + (f, phi_s^h)`,
/// with the boundary term integrating the original trace `u` under the
/// one-point graded rule.  The denominator is `||p_s^h||^2`; passing
/// `denominator_squared` squares it instead (an alternative normalization
/// of the formula; dimensionally inconsistent, kept only for comparison runs).
#[allow(clippy::too_many_arguments)]
pub fn compute_alpha(
    ctx: &SingularContext,
    datum: &BoundaryDatum,
    f: Option<&dyn Fn([f64; 2]) -> f64>,
    ps: &AugmentedFunction,
    phi: &AugmentedFunction,
    beta_h: f64,
    graded: &GradedBoundaryRule,
    denominator_squared: bool,
) -> Result<f64> {
    let lift = lift_boundary(&ctx.mesh, datum.projected());
    let volume = ctx.mass.bilinear(lift.coeffs(), ps.fe_part.coeffs())
        + ps.singular.coefficient * ctx.cross_dual(&lift);
    let energy = ctx
        .stiffness
        .bilinear(lift.coeffs(), phi.fe_part.coeffs());
    let u = datum.source().clone();
    let domain = &ctx.domain;
    let flux = graded.integrate(&|s| u(s.point) * domain.normal_derivative_primal(s.point, s.normal))?;
    let mut numerator = volume - energy - beta_h * flux;
    if let Some(f) = f {
        let load = assemble_load(&ctx.mesh, f)?;
        numerator += load
            .iter()
            .zip(phi.fe_part.coeffs())
            .map(|(a, b)| a * b)
            .sum::<f64>();
        numerator +=
            phi.singular.coefficient * cross_source(&ctx.mesh, domain, f, &SingularTerm::primal(1.0))?;
    }
    let norm_sq = ctx.augmented_norm_sq(ps)?;
    if norm_sq <= 0.0 {
        return Err(Error::DegenerateSingularNorm(norm_sq));
    }
    let den = if denominator_squared {
        norm_sq * norm_sq
    } else {
        norm_sq
    };
    Ok(numerator / den)
}

/// Assembles the corrected solution `z_h = y_h + delta_h p~_h
/// + delta_h r^-lambda sin(lambda theta)`.
pub fn corrected_solution(
    y_h: &FeFunction,
    ps: &AugmentedFunction,
    coeffs: &CorrectionCoefficients,
) -> Result<AugmentedFunction> {
    if !Arc::ptr_eq(y_h.mesh(), ps.fe_part.mesh()) {
        return Err(Error::MeshMismatch);
    }
    let mut fe_part = y_h.clone();
    fe_part.axpy(coeffs.delta_h, &ps.fe_part);
    Ok(AugmentedFunction {
        fe_part,
        singular: SingularTerm::dual(coeffs.delta_h * ps.singular.coefficient),
    })
}
