//! P1 finite element machinery: sparse assembly, boundary lifting, the
//! Dirichlet solve, and a Jacobi-preconditioned conjugate gradient solver.

use crate::mesh::TriMesh;
use crate::quadrature::{integrate_triangle, tri_rule};
use crate::{Error, Result};
use std::sync::Arc;

/// Compressed-row sparse matrix.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    /// Builds CSR from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>, symmetric: bool) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut last = None;
        for (r, c, v) in triplets {
            debug_assert!(r < n && c < n);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
            symmetric,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut s = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                s += v * x[c];
            }
            y[i] = s;
        }
        y
    }

    /// x^T A y.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Extracts the block of rows/columns with `keep[i]`; returns the block
    /// and the new-to-old index map.
    pub fn restrict(&self, keep: &[bool]) -> (SparseMatrix, Vec<usize>) {
        assert_eq!(keep.len(), self.n);
        let map: Vec<usize> = (0..self.n).filter(|&i| keep[i]).collect();
        let mut old_to_new = vec![usize::MAX; self.n];
        for (new, &old) in map.iter().enumerate() {
            old_to_new[old] = new;
        }
        let mut triplets = Vec::new();
        for (new_r, &old_r) in map.iter().enumerate() {
            let (cols, vals) = self.row(old_r);
            for (&c, &v) in cols.iter().zip(vals) {
                if keep[c] {
                    triplets.push((new_r, old_to_new[c], v));
                }
            }
        }
        (
            SparseMatrix::from_triplets(map.len(), triplets, self.symmetric),
            map,
        )
    }
}

/// Stiffness matrix (∇u, ∇v) for P1 elements.
pub fn assemble_stiffness(mesh: &TriMesh) -> Result<SparseMatrix> {
    let n = mesh.nodes().len();
    let mut triplets = Vec::with_capacity(9 * mesh.elements().len());
    for (e, el) in mesh.elements().iter().enumerate() {
        let area = mesh.element_area(e);
        if area <= 1e-14 {
            return Err(Error::DegenerateElement(e, area));
        }
        let [p0, p1, p2] = mesh.element_coords(e);
        // Edge-normal covectors: grad(lambda_i) = b_i / (2 area).
        let b = [
            [p1[1] - p2[1], p2[0] - p1[0]],
            [p2[1] - p0[1], p0[0] - p2[0]],
            [p0[1] - p1[1], p1[0] - p0[0]],
        ];
        for i in 0..3 {
            for j in 0..3 {
                let k = (b[i][0] * b[j][0] + b[i][1] * b[j][1]) / (4.0 * area);
                triplets.push((el[i], el[j], k));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(n, triplets, true))
}

/// Mass matrix (u, v) for P1 elements (exact, consistent).
pub fn assemble_mass(mesh: &TriMesh) -> Result<SparseMatrix> {
    let n = mesh.nodes().len();
    let mut triplets = Vec::with_capacity(9 * mesh.elements().len());
    for (e, el) in mesh.elements().iter().enumerate() {
        let area = mesh.element_area(e);
        if area <= 1e-14 {
            return Err(Error::DegenerateElement(e, area));
        }
        for i in 0..3 {
            for j in 0..3 {
                let m = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                triplets.push((el[i], el[j], m));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(n, triplets, true))
}

/// Load vector (f, v_i) with the degree-5 rule per element.
pub fn assemble_load(mesh: &TriMesh, f: &dyn Fn([f64; 2]) -> f64) -> Result<Vec<f64>> {
    let rule = tri_rule(5)?;
    let mut load = vec![0.0; mesh.nodes().len()];
    for (e, el) in mesh.elements().iter().enumerate() {
        let tri = mesh.element_coords(e);
        for i in 0..3 {
            let tri_i = tri;
            let fi = |p: [f64; 2]| {
                // hat function of local vertex i via barycentric coordinates
                let det = (tri_i[1][0] - tri_i[0][0]) * (tri_i[2][1] - tri_i[0][1])
                    - (tri_i[2][0] - tri_i[0][0]) * (tri_i[1][1] - tri_i[0][1]);
                let l = match i {
                    0 => ((tri_i[1][0] - p[0]) * (tri_i[2][1] - p[1])
                        - (tri_i[2][0] - p[0]) * (tri_i[1][1] - p[1]))
                        / det,
                    1 => ((tri_i[2][0] - p[0]) * (tri_i[0][1] - p[1])
                        - (tri_i[0][0] - p[0]) * (tri_i[2][1] - p[1]))
                        / det,
                    _ => ((tri_i[0][0] - p[0]) * (tri_i[1][1] - p[1])
                        - (tri_i[1][0] - p[0]) * (tri_i[0][1] - p[1]))
                        / det,
                };
                f(p) * l
            };
            load[el[i]] += integrate_triangle(&fi, tri, &rule)?;
        }
    }
    Ok(load)
}

/// A P1 finite element function: one coefficient per mesh node.
#[derive(Debug, Clone)]
pub struct FeFunction {
    mesh: Arc<TriMesh>,
    coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn new(mesh: Arc<TriMesh>, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), mesh.nodes().len());
        Self { mesh, coeffs }
    }

    pub fn zero(mesh: Arc<TriMesh>) -> Self {
        let n = mesh.nodes().len();
        Self::new(mesh, vec![0.0; n])
    }

    /// Nodal interpolant of a pointwise function.
    pub fn interpolate(mesh: Arc<TriMesh>, f: &dyn Fn([f64; 2]) -> f64) -> Self {
        let coeffs = mesh.nodes().iter().map(|&p| f(p)).collect();
        Self::new(mesh, coeffs)
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Barycentric coordinates of `p` in element `e`.
    fn barycentric(&self, e: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.mesh.element_coords(e);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Evaluation at a point known to lie in element `e`.
    pub fn eval_in_element(&self, e: usize, p: [f64; 2]) -> f64 {
        let el = self.mesh.elements()[e];
        let l = self.barycentric(e, p);
        l[0] * self.coeffs[el[0]] + l[1] * self.coeffs[el[1]] + l[2] * self.coeffs[el[2]]
    }

    /// Pointwise evaluation; `None` outside the mesh.
    pub fn eval(&self, p: [f64; 2]) -> Option<f64> {
        let tol = -1e-12;
        for (e, el) in self.mesh.elements().iter().enumerate() {
            let l = self.barycentric(e, p);
            if l.iter().all(|&x| x >= tol) {
                return Some(l[0] * self.coeffs[el[0]] + l[1] * self.coeffs[el[1]] + l[2] * self.coeffs[el[2]]);
            }
        }
        None
    }

    /// Exact L2 norm squared, element by element.
    pub fn l2_norm_sq(&self) -> f64 {
        let mut total = 0.0;
        for (e, el) in self.mesh.elements().iter().enumerate() {
            let area = self.mesh.element_area(e);
            let v = [self.coeffs[el[0]], self.coeffs[el[1]], self.coeffs[el[2]]];
            let s = v[0] + v[1] + v[2];
            total += area / 12.0 * (s * s + v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        }
        total
    }

    /// Exact H1 seminorm squared (gradients are constant per element).
    pub fn h1_seminorm_sq(&self) -> f64 {
        let mut total = 0.0;
        for (e, el) in self.mesh.elements().iter().enumerate() {
            let area = self.mesh.element_area(e);
            let [p0, p1, p2] = self.mesh.element_coords(e);
            let b = [
                [p1[1] - p2[1], p2[0] - p1[0]],
                [p2[1] - p0[1], p0[0] - p2[0]],
                [p0[1] - p1[1], p1[0] - p0[0]],
            ];
            let mut g = [0.0, 0.0];
            for i in 0..3 {
                g[0] += self.coeffs[el[i]] * b[i][0];
                g[1] += self.coeffs[el[i]] * b[i][1];
            }
            let inv = 1.0 / (2.0 * area);
            total += area * (g[0] * g[0] + g[1] * g[1]) * inv * inv;
        }
        total
    }

    /// Constant gradient of the function on element `e`.
    pub fn gradient_on(&self, e: usize) -> [f64; 2] {
        let el = self.mesh.elements()[e];
        let area = self.mesh.element_area(e);
        let [p0, p1, p2] = self.mesh.element_coords(e);
        let b = [
            [p1[1] - p2[1], p2[0] - p1[0]],
            [p2[1] - p0[1], p0[0] - p2[0]],
            [p0[1] - p1[1], p1[0] - p0[0]],
        ];
        let mut g = [0.0, 0.0];
        for i in 0..3 {
            g[0] += self.coeffs[el[i]] * b[i][0];
            g[1] += self.coeffs[el[i]] * b[i][1];
        }
        [g[0] / (2.0 * area), g[1] / (2.0 * area)]
    }

    /// Value at the quadrature point given by barycentric coordinates.
    pub fn value_at_bary(&self, e: usize, l: [f64; 3]) -> f64 {
        let el = self.mesh.elements()[e];
        l[0] * self.coeffs[el[0]] + l[1] * self.coeffs[el[1]] + l[2] * self.coeffs[el[2]]
    }

    pub fn axpy(&mut self, a: f64, other: &FeFunction) {
        assert!(Arc::ptr_eq(&self.mesh, &other.mesh) || self.coeffs.len() == other.coeffs.len());
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }
}

/// Nodal boundary lifting: boundary nodes take the given walk-ordered
/// values, interior nodes are 0.
pub fn lift_boundary(mesh: &Arc<TriMesh>, g: &[f64]) -> FeFunction {
    assert_eq!(g.len(), mesh.boundary().len());
    let mut coeffs = vec![0.0; mesh.nodes().len()];
    for (pos, &node) in mesh.boundary().iter().enumerate() {
        coeffs[node] = g[pos];
    }
    FeFunction::new(mesh.clone(), coeffs)
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients on an SPD matrix; converges to
/// relative residual `tol`, iteration cap `20 * sqrt(n)` by default.
pub fn cg_solve(a: &SparseMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    cg_solve_observed(a, b, tol, None, &mut |_, _| {}).map(|(x, _)| x)
}

/// [`cg_solve`] with an iteration observer (used by tests to track the
/// energy functional) and an optional iteration cap override.
pub fn cg_solve_observed(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: Option<usize>,
    observe: &mut dyn FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.n();
    assert_eq!(b.len(), n);
    let norm_b = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_b == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveStats {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let cap = max_iter.unwrap_or_else(|| (20.0 * (n as f64).sqrt()).ceil() as usize + 30);
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut res = norm_b;
    for it in 0..cap {
        res = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if res <= tol * norm_b {
            return Ok((
                x,
                SolveStats {
                    iterations: it,
                    residual: res / norm_b,
                },
            ));
        }
        let ap = a.matvec(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::SolverDiverged {
                iterations: it,
                residual: res / norm_b,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        observe(it, &x);
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverDiverged {
        iterations: cap,
        residual: res / norm_b,
    })
}

/// Solves the Dirichlet problem: find the P1 function with the given
/// boundary nodal values whose interior rows satisfy the Galerkin stiffness
/// system.  Block elimination keeps the solved system SPD.
pub fn solve_dirichlet(
    mesh: &Arc<TriMesh>,
    load: Option<&dyn Fn([f64; 2]) -> f64>,
    g: &[f64],
    tol: f64,
) -> Result<FeFunction> {
    let stiffness = assemble_stiffness(mesh)?;
    let rhs = match load {
        Some(f) => assemble_load(mesh, f)?,
        None => vec![0.0; mesh.nodes().len()],
    };
    solve_dirichlet_assembled(mesh, &stiffness, &rhs, g, tol)
}

/// [`solve_dirichlet`] with a preassembled stiffness matrix and load vector.
pub fn solve_dirichlet_assembled(
    mesh: &Arc<TriMesh>,
    stiffness: &SparseMatrix,
    rhs: &[f64],
    g: &[f64],
    tol: f64,
) -> Result<FeFunction> {
    let n = mesh.nodes().len();
    let lifted = lift_boundary(mesh, g);
    let k_lift = stiffness.matvec(lifted.coeffs());
    let mut keep = vec![true; n];
    for &node in mesh.boundary() {
        keep[node] = false;
    }
    let (interior, map) = stiffness.restrict(&keep);
    let b: Vec<f64> = map.iter().map(|&i| rhs[i] - k_lift[i]).collect();
    let x = cg_solve(&interior, &b, tol)?;
    let mut coeffs = lifted.coeffs().to_vec();
    for (new, &old) in map.iter().enumerate() {
        coeffs[old] += x[new];
    }
    Ok(FeFunction::new(mesh.clone(), coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::PolygonalDomain;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    fn l_mesh(h: f64) -> Arc<TriMesh> {
        let d = PolygonalDomain::new(3.0 * PI / 2.0).unwrap();
        Arc::new(TriMesh::initial(&d, h).unwrap())
    }

    #[test]
    fn reference_element_stiffness() {
        let text = "nodes 3 elements 1 boundary 3\n0 0\n1 0\n0 1\n0 1 2\n0\n1\n2\n";
        let mesh = TriMesh::from_text(text).unwrap();
        let k = assemble_stiffness(&mesh).unwrap();
        let want = [
            [1.0, -0.5, -0.5],
            [-0.5, 0.5, 0.0],
            [-0.5, 0.0, 0.5],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(k.get(i, j), want[i][j], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn reference_element_mass() {
        let text = "nodes 3 elements 1 boundary 3\n0 0\n1 0\n0 1\n0 1 2\n0\n1\n2\n";
        let mesh = TriMesh::from_text(text).unwrap();
        let m = assemble_mass(&mesh).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = 0.5 / 12.0 * if i == j { 2.0 } else { 1.0 };
                assert_abs_diff_eq!(m.get(i, j), want, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let mesh = l_mesh(0.25);
        let k = assemble_stiffness(&mesh).unwrap();
        for i in 0..k.n() {
            let (_, vals) = k.row(i);
            let s: f64 = vals.iter().sum();
            assert_abs_diff_eq!(s, 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn stiffness_energy_of_linear_equals_area() {
        let mesh = l_mesh(0.25);
        let d = PolygonalDomain::new(3.0 * PI / 2.0).unwrap();
        let k = assemble_stiffness(&mesh).unwrap();
        let x1 = FeFunction::interpolate(mesh.clone(), &|p| p[0]);
        let energy = k.bilinear(x1.coeffs(), x1.coeffs());
        assert_relative_eq!(energy, d.area(), max_relative = 1e-12);
        assert_relative_eq!(x1.h1_seminorm_sq(), d.area(), max_relative = 1e-12);
    }

    #[test]
    fn mass_total_is_domain_area() {
        for omega_deg in [270.0, 355.0] {
            let d = PolygonalDomain::new(omega_deg * PI / 180.0).unwrap();
            let mesh = Arc::new(TriMesh::initial(&d, 0.25).unwrap());
            let m = assemble_mass(&mesh).unwrap();
            let ones = vec![1.0; m.n()];
            assert_relative_eq!(m.bilinear(&ones, &ones), d.area(), max_relative = 1e-12);
            // entries nonnegative, row sums are the lumped nodal areas
            let lumped = m.matvec(&ones);
            assert!(lumped.iter().all(|&a| a > 0.0));
            assert!(m.row(0).1.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn fe_function_l2_matches_mass_matrix() {
        let mesh = l_mesh(0.5);
        let m = assemble_mass(&mesh).unwrap();
        let f = FeFunction::interpolate(mesh.clone(), &|p| 0.3 * p[0] - p[1] + 0.7);
        assert_relative_eq!(
            f.l2_norm_sq(),
            m.bilinear(f.coeffs(), f.coeffs()),
            max_relative = 1e-13
        );
    }

    #[test]
    fn eval_interpolates_linears_exactly() {
        let mesh = l_mesh(0.5);
        let f = FeFunction::interpolate(mesh.clone(), &|p| 2.0 * p[0] + 3.0 * p[1] - 1.0);
        let mut state = 7u64;
        let mut rng = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let d = PolygonalDomain::new(3.0 * PI / 2.0).unwrap();
        let mut tested = 0;
        while tested < 50 {
            let p = [2.0 * rng() - 1.0, 2.0 * rng() - 1.0];
            if !d.contains(p) {
                continue;
            }
            let got = f.eval(p).expect("point inside the domain");
            assert_relative_eq!(got, 2.0 * p[0] + 3.0 * p[1] - 1.0, epsilon = 1e-11);
            tested += 1;
        }
        assert!(f.eval([5.0, 5.0]).is_none());
    }

    #[test]
    fn cg_diagonal_system() {
        let triplets = (0..6).map(|i| (i, i, (i + 1) as f64)).collect();
        let a = SparseMatrix::from_triplets(6, triplets, true);
        let b: Vec<f64> = (0..6).map(|i| (i as f64) - 2.0).collect();
        let x = cg_solve(&a, &b, 1e-14).unwrap();
        for i in 0..6 {
            assert_relative_eq!(x[i], b[i] / (i + 1) as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn cg_matches_direct_elimination_on_tridiagonal() {
        // 1D Laplacian, n = 10, b = ones; reference by the Thomas algorithm.
        let n = 10;
        let mut triplets = Vec::new();
        for i in 0..n {
            triplets.push((i, i, 2.0));
            if i > 0 {
                triplets.push((i, i - 1, -1.0));
                triplets.push((i - 1, i, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(n, triplets, true);
        let b = vec![1.0; n];
        let x = cg_solve(&a, &b, 1e-14).unwrap();
        // Thomas elimination
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = -1.0 / 2.0;
        d[0] = 1.0 / 2.0;
        for i in 1..n {
            let m = 2.0 - (-1.0) * c[i - 1];
            c[i] = -1.0 / m;
            d[i] = (1.0 - (-1.0) * d[i - 1]) / m;
        }
        let mut want = vec![0.0; n];
        want[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            want[i] = d[i] - c[i] * want[i + 1];
        }
        for i in 0..n {
            assert_relative_eq!(x[i], want[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn cg_energy_decreases_monotonically() {
        let mesh = l_mesh(0.25);
        let k = assemble_stiffness(&mesh).unwrap();
        let mut keep = vec![true; k.n()];
        for &b in mesh.boundary() {
            keep[b] = false;
        }
        let (a, _) = k.restrict(&keep);
        let b: Vec<f64> = (0..a.n()).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
        let mut energies = Vec::new();
        let (_, stats) = cg_solve_observed(&a, &b, 1e-12, None, &mut |_, x| {
            let e = 0.5 * a.bilinear(x, x) - b.iter().zip(x).map(|(u, v)| u * v).sum::<f64>();
            energies.push(e);
        })
        .unwrap();
        assert!(stats.residual <= 1e-12);
        for w in energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
    }

    #[test]
    fn cg_reports_nonconvergence() {
        // indefinite matrix makes p^T A p go nonpositive
        let triplets = vec![(0, 0, 1.0), (1, 1, -1.0)];
        let a = SparseMatrix::from_triplets(2, triplets, true);
        let res = cg_solve(&a, &[1.0, 1.0], 1e-14);
        assert!(matches!(res, Err(Error::SolverDiverged { .. })));
    }

    #[test]
    fn dirichlet_reproduces_linear_functions() {
        let mesh = l_mesh(0.25);
        let g: Vec<f64> = mesh
            .boundary()
            .iter()
            .map(|&n| mesh.nodes()[n][0])
            .collect();
        let y = solve_dirichlet(&mesh, None, &g, 1e-12).unwrap();
        let exact = FeFunction::interpolate(mesh.clone(), &|p| p[0]);
        for (a, b) in y.coeffs().iter().zip(exact.coeffs()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn dirichlet_zero_data_zero_solution() {
        let mesh = l_mesh(0.25);
        let g = vec![0.0; mesh.boundary().len()];
        let y = solve_dirichlet(&mesh, None, &g, 1e-12).unwrap();
        assert!(y.coeffs().iter().all(|&c| c.abs() <= 1e-14));
    }

    #[test]
    fn dirichlet_galerkin_orthogonality() {
        let mesh = l_mesh(0.125);
        let g: Vec<f64> = mesh
            .boundary()
            .iter()
            .map(|&n| {
                let p = mesh.nodes()[n];
                p[0] * p[1]
            })
            .collect();
        let tol = 1e-12;
        let y = solve_dirichlet(&mesh, None, &g, tol).unwrap();
        let k = assemble_stiffness(&mesh).unwrap();
        let residual = k.matvec(y.coeffs());
        let scale = residual.iter().map(|r| r * r).sum::<f64>().sqrt();
        for (i, &r) in residual.iter().enumerate() {
            if !mesh.is_boundary_node(i) {
                assert!(
                    r.abs() <= 10.0 * tol * scale.max(1.0),
                    "interior residual {r} at node {i}"
                );
            }
        }
    }

    #[test]
    fn discrete_maximum_principle_on_initial_mesh() {
        // Right-isosceles NVB meshes are non-obtuse, so f=0 with g >= 0
        // cannot undershoot.
        let mesh = l_mesh(0.25);
        let mut state = 99u64;
        let mut rng = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let g: Vec<f64> = (0..mesh.boundary().len()).map(|_| rng()).collect();
        let y = solve_dirichlet(&mesh, None, &g, 1e-12).unwrap();
        let min = y.coeffs().iter().cloned().fold(f64::MAX, f64::min);
        assert!(min >= -1e-10, "undershoot {min}");
    }

    #[test]
    fn lift_boundary_rim_and_scaling() {
        let mesh = l_mesh(0.25);
        let ones = vec![1.0; mesh.boundary().len()];
        let lifted = lift_boundary(&mesh, &ones);
        for (i, &c) in lifted.coeffs().iter().enumerate() {
            let want = if mesh.is_boundary_node(i) { 1.0 } else { 0.0 };
            assert_eq!(c, want);
        }
        // H1 energy of the rim function grows like 1/h across levels
        let mut prev = lifted.h1_seminorm_sq();
        let mut mesh_l = mesh;
        for _ in 0..3 {
            mesh_l = Arc::new(mesh_l.refine_uniform().unwrap());
            let ones = vec![1.0; mesh_l.boundary().len()];
            let e = lift_boundary(&mesh_l, &ones).h1_seminorm_sq();
            let ratio = e / prev;
            assert!(
                (1.5..=2.8).contains(&ratio),
                "rim energy ratio {ratio} outside [1.5, 2.8]"
            );
            prev = e;
        }
    }

    #[test]
    fn load_vector_of_constant_sums_to_area() {
        let mesh = l_mesh(0.25);
        let d = PolygonalDomain::new(3.0 * PI / 2.0).unwrap();
        let load = assemble_load(&mesh, &|_| 1.0).unwrap();
        let total: f64 = load.iter().sum();
        assert_relative_eq!(total, d.area(), max_relative = 1e-12);
    }

    #[test]
    fn restrict_extracts_interior_block() {
        let mesh = l_mesh(0.5);
        let k = assemble_stiffness(&mesh).unwrap();
        let mut keep = vec![true; k.n()];
        for &b in mesh.boundary() {
            keep[b] = false;
        }
        let (a, map) = k.restrict(&keep);
        assert_eq!(a.n(), map.len());
        for (new_i, &old_i) in map.iter().enumerate() {
            for (new_j, &old_j) in map.iter().enumerate() {
                assert_eq!(a.get(new_i, new_j), k.get(old_i, old_j));
            }
        }
    }

    #[test]
    fn smooth_harmonic_error_shrinks_fast() {
        // g = trace of the harmonic x*y: the true L2 error contracts by
        // about 4 per level (second order); assert at least 2.8 as a floor.
        let d = PolygonalDomain::new(3.0 * PI / 2.0).unwrap();
        let rule = tri_rule(5).unwrap();
        let mut mesh = Arc::new(TriMesh::initial(&d, 0.25).unwrap());
        let mut errors = Vec::new();
        for _ in 0..3 {
            let g: Vec<f64> = mesh
                .boundary()
                .iter()
                .map(|&n| {
                    let p = mesh.nodes()[n];
                    p[0] * p[1]
                })
                .collect();
            let y = solve_dirichlet(&mesh, None, &g, 1e-12).unwrap();
            let mut err_sq = 0.0;
            for e in 0..mesh.elements().len() {
                let tri = mesh.element_coords(e);
                let f = |p: [f64; 2]| {
                    let v = y.eval_in_element(e, p);
                    let d = v - p[0] * p[1];
                    d * d
                };
                err_sq += integrate_triangle(&f, tri, &rule).unwrap();
            }
            errors.push(err_sq.sqrt());
            mesh = Arc::new(mesh.refine_uniform().unwrap());
        }
        assert!(errors[0] / errors[1] > 2.8, "ratios {errors:?}");
        assert!(errors[1] / errors[2] > 2.8, "ratios {errors:?}");
    }
}
