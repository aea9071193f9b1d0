//! Convergence-study harness: test cases, L2 error evaluation against a
//! reference solution, EOC computation, the level driver, and the CSV
//! surface.

use crate::boundary::{l2_project_boundary, BoundaryTrace};
use crate::domain::{PolygonalDomain, SingularTerm};
use crate::fem::{assemble_load, assemble_stiffness, solve_dirichlet_assembled};
use crate::mesh::TriMesh;
use crate::quadrature::{
    composite_triangle, corner_layers, graded_boundary_rule, integrate_corner_triangle_with_depth,
    tri_rule,
};
use crate::singular::{
    compute_alpha, compute_beta, compute_dual_singular, compute_gamma, compute_phi,
    corrected_solution, AugmentedFunction, CorrectionCoefficients, SingularContext,
};
use crate::{Error, Result};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

/// A scalar field on the closed domain (source terms, reference solutions).
pub type ScalarField = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

/// One experiment: boundary datum, optional source, optional reference
/// solution, and the worst radial exponent of the reference near the
/// corner (used to pick the quadrature class for the error integral).
#[derive(Clone)]
pub struct Case {
    pub name: &'static str,
    pub f: Option<ScalarField>,
    pub u: BoundaryTrace,
    pub exact: Option<ScalarField>,
    pub singular_strength: f64,
}

impl Case {
    /// Largest finite-difference Laplacian of the reference solution over
    /// interior sample points; `None` unless the case claims a harmonic
    /// reference (exact present, no source).
    pub fn harmonic_defect(&self, domain: &PolygonalDomain) -> Option<f64> {
        let exact = self.exact.as_ref()?;
        if self.f.is_some() {
            return None;
        }
        let step = 1e-3;
        let mut worst = 0.0f64;
        for k in 0..8 {
            let th = domain.omega() * (k as f64 + 0.5) / 8.0;
            let r = 0.45;
            let p = [r * th.cos(), r * th.sin()];
            let lap = (exact([p[0] + step, p[1]])
                + exact([p[0] - step, p[1]])
                + exact([p[0], p[1] + step])
                + exact([p[0], p[1] - step])
                - 4.0 * exact(p))
                / (step * step);
            worst = worst.max(lap.abs());
        }
        Some(worst)
    }
}

/// The singular benchmark: `y = r^-0.4999 sin(-0.4999 theta)` is harmonic,
/// so `f = 0` and the datum is the trace of `y` itself.
pub fn corner_case(omega: f64) -> Result<Case> {
    if !(omega > std::f64::consts::PI && omega < 2.0 * std::f64::consts::PI) {
        return Err(Error::InvalidConfig(format!(
            "benchmark needs a reentrant angle, got omega = {omega}"
        )));
    }
    let y: ScalarField = Arc::new(|p: [f64; 2]| {
        let r = p[0].hypot(p[1]);
        let mut th = p[1].atan2(p[0]);
        if th < 0.0 {
            th += 2.0 * std::f64::consts::PI;
        }
        r.powf(-0.4999) * (-0.4999 * th).sin()
    });
    Ok(Case {
        name: "corner",
        f: None,
        u: y.clone(),
        exact: Some(y),
        singular_strength: -0.4999,
    })
}

/// Smooth harmonic reference `x1 * x2`: no corner singularity, so the
/// solver should recover nearly full second-order L2 convergence.
pub fn smooth_case() -> Case {
    let y: ScalarField = Arc::new(|p: [f64; 2]| p[0] * p[1]);
    Case {
        name: "smooth",
        f: None,
        u: y.clone(),
        exact: Some(y),
        singular_strength: 0.0,
    }
}

/// Zero datum and source: everything downstream must vanish identically.
pub fn zero_case() -> Case {
    let z: ScalarField = Arc::new(|_| 0.0);
    Case {
        name: "zero",
        f: None,
        u: z.clone(),
        exact: Some(z),
        singular_strength: 0.0,
    }
}

/// Which discrete solution the error is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Corrected solution with the dual singular complement.
    Scm,
    /// Plain Galerkin solution of the lifted Dirichlet problem.
    Standard,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Scm => "scm",
            Method::Standard => "standard",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scm" => Ok(Method::Scm),
            "standard" => Ok(Method::Standard),
            other => Err(Error::InvalidConfig(format!(
                "unknown method '{other}' (expected scm or standard)"
            ))),
        }
    }
}

/// One line of the convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: u32,
    pub h_nominal: f64,
    pub h_measured: f64,
    pub dofs: usize,
    pub method: Method,
    /// NaN marks a level that failed; the run keeps going.
    pub error_l2: f64,
    pub eoc: Option<f64>,
    pub runtime_ms: u64,
}

/// `ln(e_prev/e_next) / ln(h_prev/h_next)`.
pub fn eoc(e_prev: f64, e_next: f64, h_prev: f64, h_next: f64) -> Result<f64> {
    for (label, v) in [
        ("e_prev", e_prev),
        ("e_next", e_next),
        ("h_prev", h_prev),
        ("h_next", h_next),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "eoc needs positive finite inputs, got {label} = {v}"
            )));
        }
    }
    Ok((e_prev / e_next).ln() / (h_prev / h_next).ln())
}

/// `||exact - approx||_{L2}` over the mesh of `approx`.
///
/// Elements away from the corner use a composite degree-7 rule; elements
/// touching the corner use the layered radial rule for the integrand class
/// `r^singular_class`.  The corner contribution is recomputed at doubled
/// layer depth; a relative shift above 1e-4 marks the result unusable.
pub fn l2_error(
    domain: &PolygonalDomain,
    approx: &AugmentedFunction,
    exact: &dyn Fn([f64; 2]) -> f64,
    singular_class: f64,
) -> Result<f64> {
    let mesh = approx.fe_part.mesh().clone();
    let rule = tri_rule(7)?;
    let layers = corner_layers(singular_class)?;
    let mut away = 0.0;
    let mut corner = 0.0;
    let mut corner_deep = 0.0;
    for e in 0..mesh.elements().len() {
        let coords = mesh.element_coords(e);
        let g = |p: [f64; 2]| {
            let d = exact(p) - approx.eval_in_element(domain, e, p);
            d * d
        };
        if mesh.is_corner_element(e) {
            let el = mesh.elements()[e];
            let c = (0..3)
                .find(|&k| el[k] == mesh.corner_node())
                .expect("corner element without corner node");
            let tri = [coords[c], coords[(c + 1) % 3], coords[(c + 2) % 3]];
            corner += integrate_corner_triangle_with_depth(&g, tri, singular_class, layers)?;
            corner_deep +=
                integrate_corner_triangle_with_depth(&g, tri, singular_class, 2 * layers)?;
        } else {
            away += composite_triangle(&g, coords, &rule, 8)?;
        }
    }
    let total = (away + corner_deep).max(0.0).sqrt();
    let reference = (away + corner).max(0.0).sqrt();
    let shift = if total == 0.0 && reference == 0.0 {
        0.0
    } else {
        (total - reference).abs() / total.max(f64::MIN_POSITIVE)
    };
    if shift > 1e-4 {
        return Err(Error::QuadratureUnstable(shift));
    }
    Ok(total)
}

/// Configuration of one convergence run.
#[derive(Clone)]
pub struct RunConfig {
    pub omega: f64,
    pub levels: u32,
    pub h0: f64,
    /// Grading strength for the boundary rule; `None` picks `2 pi / omega - 1`.
    pub mu: Option<f64>,
    pub grading_radius: f64,
    pub method: Method,
    pub tol: f64,
    pub case: Case,
    /// Square the normalization of the explicit coefficient (alternative
    /// normalization; see [`compute_alpha`]).
    pub alpha_denominator_squared: bool,
    /// Dump each level's mesh as a text file into this directory.
    pub mesh_dump: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(omega: f64, method: Method, case: Case) -> Self {
        Self {
            omega,
            levels: 6,
            h0: 0.25,
            mu: None,
            grading_radius: 0.1,
            method,
            tol: 1e-12,
            case,
            alpha_denominator_squared: false,
            mesh_dump: None,
        }
    }

    pub fn grading_mu(&self) -> f64 {
        self.mu
            .unwrap_or(2.0 * std::f64::consts::PI / self.omega - 1.0)
    }
}

/// Rows plus the levels that failed (their rows carry a NaN error).
pub struct RunOutcome {
    pub rows: Vec<ConvergenceRow>,
    pub failures: Vec<(u32, Error)>,
}

fn run_level(
    config: &RunConfig,
    domain: &PolygonalDomain,
    mesh: &Arc<TriMesh>,
    h_nominal: f64,
) -> Result<f64> {
    let graded = graded_boundary_rule(
        &mesh.boundary_edges(),
        h_nominal,
        config.grading_mu(),
        config.grading_radius,
    )?;
    let datum = l2_project_boundary(config.case.u.clone(), mesh, &graded)?;
    let source: Option<&dyn Fn([f64; 2]) -> f64> = config.case.f.as_deref().map(|f| f as _);
    let exact = config
        .case
        .exact
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("case has no reference solution".into()))?;
    let class = 2.0 * config.case.singular_strength.min(-domain.lambda());
    let approx = match config.method {
        Method::Standard => {
            let stiffness = assemble_stiffness(mesh)?;
            let rhs = match source {
                Some(f) => assemble_load(mesh, f)?,
                None => vec![0.0; mesh.nodes().len()],
            };
            let y_h =
                solve_dirichlet_assembled(mesh, &stiffness, &rhs, datum.projected(), config.tol)?;
            AugmentedFunction {
                fe_part: y_h,
                singular: SingularTerm::dual(0.0),
            }
        }
        Method::Scm => {
            let ctx = SingularContext::new(mesh.clone(), domain)?;
            let rhs = match source {
                Some(f) => assemble_load(mesh, f)?,
                None => vec![0.0; mesh.nodes().len()],
            };
            let y_h = solve_dirichlet_assembled(
                mesh,
                ctx.stiffness(),
                &rhs,
                datum.projected(),
                config.tol,
            )?;
            let ps = compute_dual_singular(&ctx, config.tol)?;
            let beta_h = compute_beta(&ctx, &ps)?;
            let phi = compute_phi(&ctx, &ps, beta_h, config.tol)?;
            let gamma_h = compute_gamma(&ctx, &y_h, &ps)?;
            let alpha_h = compute_alpha(
                &ctx,
                &datum,
                source,
                &ps,
                &phi,
                beta_h,
                &graded,
                config.alpha_denominator_squared,
            )?;
            let coeffs = CorrectionCoefficients {
                beta_h,
                gamma_h,
                alpha_h,
                delta_h: alpha_h - gamma_h,
                ps_norm_sq: ctx.augmented_norm_sq(&ps)?,
            };
            corrected_solution(&y_h, &ps, &coeffs)?
        }
    };
    l2_error(domain, &approx, exact, class)
}

/// Runs the convergence study level by level, handing each finished row to
/// `emit` as soon as it exists.  A failing level contributes a NaN row and
/// the refinement continues.
pub fn run_convergence(
    config: &RunConfig,
    emit: &mut dyn FnMut(&ConvergenceRow),
) -> Result<RunOutcome> {
    let domain = PolygonalDomain::new(config.omega)?;
    if config.levels == 0 {
        return Err(Error::InvalidConfig("levels must be at least 1".into()));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    let mut failures = Vec::new();
    let mut mesh: Option<Arc<TriMesh>> = None;
    for level in 0..config.levels {
        let start = Instant::now();
        let current = match &mesh {
            None => Arc::new(TriMesh::initial(&domain, config.h0)?),
            Some(prev) => Arc::new(prev.refine_uniform()?),
        };
        if let Some(dir) = &config.mesh_dump {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("mesh_level_{level}.txt")), current.to_text())?;
        }
        let h_nominal = config.h0 / f64::powi(2.0, level as i32);
        let row = match run_level(config, &domain, &current, h_nominal) {
            Ok(error_l2) => {
                let eoc_val = rows.last().and_then(|prev| {
                    eoc(prev.error_l2, error_l2, prev.h_nominal, h_nominal).ok()
                });
                ConvergenceRow {
                    level,
                    h_nominal,
                    h_measured: current.size(),
                    dofs: current.nodes().len(),
                    method: config.method,
                    error_l2,
                    eoc: eoc_val,
                    runtime_ms: start.elapsed().as_millis() as u64,
                }
            }
            Err(e) => {
                failures.push((level, e));
                ConvergenceRow {
                    level,
                    h_nominal,
                    h_measured: current.size(),
                    dofs: current.nodes().len(),
                    method: config.method,
                    error_l2: f64::NAN,
                    eoc: None,
                    runtime_ms: start.elapsed().as_millis() as u64,
                }
            }
        };
        emit(&row);
        rows.push(row);
        mesh = Some(current);
    }
    Ok(RunOutcome { rows, failures })
}

pub const CSV_HEADER: &str = "level,h_nominal,h_measured,dofs,method,error_l2,eoc,runtime_ms";

/// Serializes rows with the fixed header; floats keep their shortest
/// round-trip form, a missing EOC stays blank.
pub fn emit_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let eoc_field = r.eoc.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.level, r.h_nominal, r.h_measured, r.dofs, r.method, r.error_l2, eoc_field, r.runtime_ms
        ));
    }
    out
}

/// Inverse of [`emit_csv`]; rejects a wrong header or malformed rows.
pub fn parse_csv(text: &str) -> Result<Vec<ConvergenceRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::CsvFormat(format!(
                "bad header: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::CsvFormat(format!(
                "row {}: expected 8 fields, got {}",
                k + 1,
                fields.len()
            )));
        }
        let field_err =
            |name: &str, v: &str| Error::CsvFormat(format!("row {}: bad {name} '{v}'", k + 1));
        rows.push(ConvergenceRow {
            level: fields[0].parse().map_err(|_| field_err("level", fields[0]))?,
            h_nominal: fields[1]
                .parse()
                .map_err(|_| field_err("h_nominal", fields[1]))?,
            h_measured: fields[2]
                .parse()
                .map_err(|_| field_err("h_measured", fields[2]))?,
            dofs: fields[3].parse().map_err(|_| field_err("dofs", fields[3]))?,
            method: fields[4].parse()?,
            error_l2: fields[5]
                .parse()
                .map_err(|_| field_err("error_l2", fields[5]))?,
            eoc: if fields[6].is_empty() {
                None
            } else {
                Some(fields[6].parse().map_err(|_| field_err("eoc", fields[6]))?)
            },
            runtime_ms: fields[7]
                .parse()
                .map_err(|_| field_err("runtime_ms", fields[7]))?,
        });
    }
    Ok(rows)
}
