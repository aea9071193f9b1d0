//! Conforming triangulations of the cut-square domains.
//!
//! Meshes start from the fan of the polygon around the corner (valid because
//! the domain is star-shaped with respect to the origin) and refine by newest
//! vertex bisection.  An element stores which of its edges is the refinement
//! edge; bisection inserts the midpoint of that edge and hands the two
//! children refinement edges opposite the new vertex, which keeps the number
//! of similarity classes, and hence the minimum angle, bounded.

use crate::domain::PolygonalDomain;
use crate::{Error, Result};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

/// Safety cap on size-reduction passes in [`TriMesh::initial`].
const MAX_SIZE_PASSES: usize = 500;

/// One boundary edge of a mesh, in boundary-walk order.
///
/// `r_min` is the distance of the nearer endpoint to the corner.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub pa: [f64; 2],
    pub pb: [f64; 2],
    pub length: f64,
    pub r_min: f64,
}

/// A conforming triangle mesh with newest-vertex-bisection bookkeeping.
#[derive(Debug, Clone)]
pub struct TriMesh {
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    /// Per element: index `e` in 0..3 meaning the edge from vertex `e` to
    /// vertex `e+1 (mod 3)` is the refinement edge.
    refinement_edge: Vec<u8>,
    /// Closed boundary polyline, counterclockwise, starting at the corner.
    boundary: Vec<usize>,
    corner_node: usize,
    /// For nodes created by the most recent refinement: the endpoints of the
    /// bisected edge, indices into the parent mesh.
    parents: Vec<Option<(usize, usize)>>,
    h: f64,
    level: u32,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

impl TriMesh {
    /// Fan triangulation of the domain, bisected until the mesh size is at
    /// most `h0`.
    pub fn initial(domain: &PolygonalDomain, h0: f64) -> Result<Self> {
        if !(h0 > 0.0 && h0 <= 2.0f64.sqrt() + 1e-12) || !h0.is_finite() {
            return Err(Error::InvalidMeshSize(h0));
        }
        let nodes: Vec<[f64; 2]> = domain.vertices().to_vec();
        let n = nodes.len();
        let mut elements = Vec::with_capacity(n - 2);
        for i in 1..n - 1 {
            elements.push([0, i, i + 1]);
        }
        let refinement_edge = elements.iter().map(|el| seed_edge(&nodes, el)).collect();
        let mut mesh = Self {
            parents: vec![None; nodes.len()],
            boundary: Vec::new(),
            corner_node: 0,
            h: 0.0,
            level: 0,
            nodes,
            elements,
            refinement_edge,
        };
        mesh.h = mesh.max_diameter();
        mesh.rebuild_boundary()?;
        let mut passes = 0;
        while mesh.h > h0 {
            passes += 1;
            if passes > MAX_SIZE_PASSES {
                return Err(Error::RefinementStalled);
            }
            let marked: BTreeSet<(usize, usize)> = mesh
                .elements
                .iter()
                .zip(&mesh.refinement_edge)
                .filter(|(el, _)| mesh.diameter_of(el) > h0)
                .map(|(el, &re)| {
                    edge_key(el[re as usize], el[(re as usize + 1) % 3])
                })
                .collect();
            mesh = mesh.bisect_marked(marked)?;
        }
        mesh.level = 0;
        mesh.parents = vec![None; mesh.nodes.len()];
        Ok(mesh)
    }

    /// One uniform refinement sweep: every element is bisected twice (its two
    /// children once more each), quartering every element and halving `h`.
    pub fn refine_uniform(&self) -> Result<Self> {
        let mut marked = BTreeSet::new();
        for el in &self.elements {
            for k in 0..3 {
                marked.insert(edge_key(el[k], el[(k + 1) % 3]));
            }
        }
        let mut fine = self.bisect_marked(marked)?;
        fine.level = self.level + 1;
        Ok(fine)
    }

    /// Bisects the marked edges plus whatever conformity closure demands.
    fn bisect_marked(&self, mut marked: BTreeSet<(usize, usize)>) -> Result<Self> {
        // Closure: an element with any marked edge must have its refinement
        // edge marked, so hanging nodes cannot survive.
        loop {
            let mut changed = false;
            for (el, &re) in self.elements.iter().zip(&self.refinement_edge) {
                let rkey = edge_key(el[re as usize], el[(re as usize + 1) % 3]);
                if marked.contains(&rkey) {
                    continue;
                }
                let any = (0..3).any(|k| marked.contains(&edge_key(el[k], el[(k + 1) % 3])));
                if any {
                    marked.insert(rkey);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        let mut nodes = self.nodes.clone();
        let mut parents: Vec<Option<(usize, usize)>> = vec![None; self.nodes.len()];
        let mut midpoint = BTreeMap::new();
        for &(a, b) in &marked {
            let m = [
                0.5 * (self.nodes[a][0] + self.nodes[b][0]),
                0.5 * (self.nodes[a][1] + self.nodes[b][1]),
            ];
            midpoint.insert((a, b), nodes.len());
            nodes.push(m);
            parents.push(Some((a, b)));
        }

        let mut elements = Vec::with_capacity(self.elements.len() * 2);
        let mut refinement_edge = Vec::with_capacity(self.elements.len() * 2);
        for (el, &re) in self.elements.iter().zip(&self.refinement_edge) {
            cut(*el, re, &midpoint, &mut elements, &mut refinement_edge);
        }

        let mut mesh = Self {
            nodes,
            elements,
            refinement_edge,
            boundary: Vec::new(),
            corner_node: self.corner_node,
            parents,
            h: 0.0,
            level: self.level,
        };
        mesh.h = mesh.max_diameter();
        mesh.rebuild_boundary()?;
        Ok(mesh)
    }

    /// Maximum element diameter.
    pub fn size(&self) -> f64 {
        self.h
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn refinement_edges(&self) -> &[u8] {
        &self.refinement_edge
    }

    /// Boundary polyline node indices, counterclockwise, `boundary()[0]` is
    /// the corner node; the closing edge back to the corner is implicit.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn corner_node(&self) -> usize {
        self.corner_node
    }

    pub fn is_boundary_node(&self, i: usize) -> bool {
        self.boundary_positions().contains_key(&i)
    }

    /// Map node index -> position in the boundary polyline.
    pub fn boundary_positions(&self) -> HashMap<usize, usize> {
        self.boundary
            .iter()
            .enumerate()
            .map(|(pos, &n)| (n, pos))
            .collect()
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 2]; 3] {
        let el = self.elements[e];
        [self.nodes[el[0]], self.nodes[el[1]], self.nodes[el[2]]]
    }

    pub fn element_area(&self, e: usize) -> f64 {
        let [a, b, c] = self.element_coords(e);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// True if one vertex of element `e` is the corner node.
    pub fn is_corner_element(&self, e: usize) -> bool {
        self.elements[e].contains(&self.corner_node)
    }

    fn diameter_of(&self, el: &[usize; 3]) -> f64 {
        let mut d: f64 = 0.0;
        for k in 0..3 {
            d = d.max(dist(self.nodes[el[k]], self.nodes[el[(k + 1) % 3]]));
        }
        d
    }

    pub fn element_diameter(&self, e: usize) -> f64 {
        self.diameter_of(&self.elements[e])
    }

    fn max_diameter(&self) -> f64 {
        self.elements
            .iter()
            .map(|el| self.diameter_of(el))
            .fold(0.0, f64::max)
    }

    /// Boundary edges in polyline order, including the closing edge.
    pub fn boundary_edges(&self) -> Vec<BoundaryEdge> {
        let n = self.boundary.len();
        (0..n)
            .map(|i| {
                let a = self.boundary[i];
                let b = self.boundary[(i + 1) % n];
                let (pa, pb) = (self.nodes[a], self.nodes[b]);
                BoundaryEdge {
                    a,
                    b,
                    pa,
                    pb,
                    length: dist(pa, pb),
                    r_min: pa[0].hypot(pa[1]).min(pb[0].hypot(pb[1])),
                }
            })
            .collect()
    }

    /// Interpolates nodal values from the parent mesh onto this mesh: new
    /// nodes are edge midpoints, so P1 interpolation is the parent-endpoint
    /// average.
    pub fn prolong_from(&self, parent_values: &[f64]) -> Vec<f64> {
        let m = parent_values.len();
        let mut out = vec![0.0; self.nodes.len()];
        out[..m].copy_from_slice(parent_values);
        for i in m..self.nodes.len() {
            let (a, b) = self.parents[i].expect("new node without parent edge");
            assert!(a < m && b < m, "parent indices outside the parent mesh");
            out[i] = 0.5 * (out[a] + out[b]);
        }
        out
    }

    fn rebuild_boundary(&mut self) -> Result<()> {
        let mut count: HashMap<(usize, usize), u32> = HashMap::new();
        for el in &self.elements {
            for k in 0..3 {
                *count.entry(edge_key(el[k], el[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
        for (&(a, b), &c) in &count {
            if c == 1 {
                adj.entry(a).or_default().push(b);
                adj.entry(b).or_default().push(a);
            } else if c > 2 {
                return Err(Error::MeshFormat(format!(
                    "edge ({a}, {b}) shared by {c} elements"
                )));
            }
        }
        let start = self.corner_node;
        let nbrs = adj
            .get(&start)
            .ok_or_else(|| Error::MeshFormat("corner node not on the boundary".into()))?;
        if nbrs.len() != 2 {
            return Err(Error::MeshFormat("boundary is not a single closed walk".into()));
        }
        // Leave the corner along the theta = 0 ray: smaller polar angle first.
        let angle = |n: usize| {
            let p = self.nodes[n];
            let mut t = p[1].atan2(p[0]);
            if t < 0.0 {
                t += 2.0 * std::f64::consts::PI;
            }
            if t > 2.0 * std::f64::consts::PI - 1e-12 {
                t = 0.0;
            }
            t
        };
        let first = if angle(nbrs[0]) <= angle(nbrs[1]) {
            nbrs[0]
        } else {
            nbrs[1]
        };
        let mut walk = vec![start, first];
        loop {
            let cur = *walk.last().unwrap();
            let prev = walk[walk.len() - 2];
            let next_nbrs = &adj[&cur];
            let next = if next_nbrs[0] == prev {
                next_nbrs[1]
            } else {
                next_nbrs[0]
            };
            if next == start {
                break;
            }
            walk.push(next);
            if walk.len() > adj.len() {
                return Err(Error::MeshFormat("boundary walk does not close".into()));
            }
        }
        if walk.len() != adj.len() {
            return Err(Error::MeshFormat("boundary has more than one component".into()));
        }
        self.boundary = walk;
        Ok(())
    }

    /// Structural checks used by tests: conformity, orientation, closed
    /// boundary, Euler relation for a simply connected triangulation.
    pub fn validate(&self) -> Result<()> {
        for (e, _) in self.elements.iter().enumerate() {
            let area = self.element_area(e);
            if area <= 1e-14 {
                return Err(Error::DegenerateElement(e, area));
            }
        }
        let mut edges = HashMap::new();
        for el in &self.elements {
            for k in 0..3 {
                *edges.entry(edge_key(el[k], el[(k + 1) % 3])).or_insert(0u32) += 1;
            }
        }
        let nb_boundary_edges = edges.values().filter(|&&c| c == 1).count();
        if nb_boundary_edges != self.boundary.len() {
            return Err(Error::MeshFormat("boundary length mismatch".into()));
        }
        let v = self.nodes.len() as i64;
        let e = edges.len() as i64;
        let f = self.elements.len() as i64;
        if v - e + f != 1 {
            return Err(Error::MeshFormat(format!("euler defect {}", v - e + f)));
        }
        if self.boundary.first() != Some(&self.corner_node) {
            return Err(Error::MeshFormat("boundary must start at the corner".into()));
        }
        Ok(())
    }

    /// Plain-text serialization: a header line, then node coordinates,
    /// element triples and the boundary polyline, one entry per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "nodes {} elements {} boundary {}",
            self.nodes.len(),
            self.elements.len(),
            self.boundary.len()
        )
        .unwrap();
        for p in &self.nodes {
            writeln!(s, "{} {}", p[0], p[1]).unwrap();
        }
        for el in &self.elements {
            writeln!(s, "{} {} {}", el[0], el[1], el[2]).unwrap();
        }
        for b in &self.boundary {
            writeln!(s, "{}", b).unwrap();
        }
        s
    }

    /// Parses the [`TriMesh::to_text`] format.  Refinement edges are reseeded
    /// (longest edge, ties to the lexicographically smallest node pair) and
    /// the level restarts at 0.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::MeshFormat("empty input".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 6 || parts[0] != "nodes" || parts[2] != "elements" || parts[4] != "boundary"
        {
            return Err(Error::MeshFormat(format!("bad header: {header}")));
        }
        let bad = |what: &str| Error::MeshFormat(format!("bad {what}"));
        let n: usize = parts[1].parse().map_err(|_| bad("node count"))?;
        let m: usize = parts[3].parse().map_err(|_| bad("element count"))?;
        let b: usize = parts[5].parse().map_err(|_| bad("boundary count"))?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| bad("node line"))?;
            let mut it = line.split_whitespace();
            let x: f64 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad("node coordinate"))?;
            let y: f64 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad("node coordinate"))?;
            nodes.push([x, y]);
        }
        let mut elements = Vec::with_capacity(m);
        for _ in 0..m {
            let line = lines.next().ok_or_else(|| bad("element line"))?;
            let mut it = line.split_whitespace();
            let mut el = [0usize; 3];
            for v in &mut el {
                *v = it
                    .next()
                    .and_then(|t| t.parse().ok())
                    .filter(|&i: &usize| i < n)
                    .ok_or_else(|| bad("element index"))?;
            }
            elements.push(el);
        }
        let mut boundary = Vec::with_capacity(b);
        for _ in 0..b {
            let line = lines.next().ok_or_else(|| bad("boundary line"))?;
            let idx: usize = line
                .trim()
                .parse()
                .ok()
                .filter(|&i: &usize| i < n)
                .ok_or_else(|| bad("boundary index"))?;
            boundary.push(idx);
        }
        let refinement_edge = elements.iter().map(|el| seed_edge(&nodes, el)).collect();
        let corner_node = *boundary
            .first()
            .ok_or_else(|| Error::MeshFormat("empty boundary".into()))?;
        let mut mesh = Self {
            parents: vec![None; nodes.len()],
            h: 0.0,
            level: 0,
            corner_node,
            nodes,
            elements,
            refinement_edge,
            boundary,
        };
        mesh.h = mesh.max_diameter();
        mesh.validate()?;
        Ok(mesh)
    }
}

/// Refinement-edge seed: the longest edge, ties broken by the smallest sorted
/// node pair.
fn seed_edge(nodes: &[[f64; 2]], el: &[usize; 3]) -> u8 {
    let mut best = 0u8;
    let mut best_len = -1.0;
    let mut best_key = (usize::MAX, usize::MAX);
    for k in 0..3u8 {
        let (a, b) = (el[k as usize], el[(k as usize + 1) % 3]);
        let len = dist(nodes[a], nodes[b]);
        let key = edge_key(a, b);
        if len > best_len + 1e-14 || ((len - best_len).abs() <= 1e-14 && key < best_key) {
            best = k;
            best_len = len;
            best_key = key;
        }
    }
    best
}

/// Recursively splits an element at the midpoints present in `midpoint`.
///
/// With the refinement edge rotated to the front, the children of `(a, b, c)`
/// are `(a, m, c)` and `(m, b, c)`; their refinement edges are the original
/// outer edges `(c, a)` and `(b, c)`, so the recursion depth is at most two.
fn cut(
    el: [usize; 3],
    re: u8,
    midpoint: &BTreeMap<(usize, usize), usize>,
    out_el: &mut Vec<[usize; 3]>,
    out_re: &mut Vec<u8>,
) {
    let a = el[re as usize];
    let b = el[(re as usize + 1) % 3];
    let c = el[(re as usize + 2) % 3];
    match midpoint.get(&edge_key(a, b)) {
        None => {
            out_el.push(el);
            out_re.push(re);
        }
        Some(&m) => {
            cut([a, m, c], 2, midpoint, out_el, out_re);
            cut([m, b, c], 1, midpoint, out_el, out_re);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn l_domain() -> PolygonalDomain {
        PolygonalDomain::new(3.0 * PI / 2.0).unwrap()
    }

    fn shoelace(nodes: &[[f64; 2]], poly: &[usize]) -> f64 {
        let n = poly.len();
        let mut twice = 0.0;
        for i in 0..n {
            let p = nodes[poly[i]];
            let q = nodes[poly[(i + 1) % n]];
            twice += p[0] * q[1] - q[0] * p[1];
        }
        0.5 * twice
    }

    #[test]
    fn quadrant_fan_is_two_triangles() {
        let d = PolygonalDomain::new(PI / 2.0).unwrap();
        let m = TriMesh::initial(&d, 2.0f64.sqrt()).unwrap();
        assert_eq!(m.elements().len(), 2);
        assert_relative_eq!(m.size(), 2.0f64.sqrt(), epsilon = 1e-15);
        m.validate().unwrap();
    }

    #[test]
    fn l_fan_at_sqrt2_size() {
        // The raw 6-vertex fan has 4 triangles with h = 2; one bisection pass
        // of the two oversized fan triangles reaches h = sqrt(2).
        let d = l_domain();
        let m = TriMesh::initial(&d, 2.0f64.sqrt()).unwrap();
        assert_eq!(m.elements().len(), 6);
        assert_relative_eq!(m.size(), 2.0f64.sqrt(), epsilon = 1e-15);
        m.validate().unwrap();
    }

    #[test]
    fn element_areas_sum_to_polygon_area() {
        for deg in [90.0, 270.0, 355.0] {
            let d = PolygonalDomain::new(deg * PI / 180.0).unwrap();
            let m = TriMesh::initial(&d, 0.25).unwrap();
            let total: f64 = (0..m.elements().len()).map(|e| m.element_area(e)).sum();
            assert_relative_eq!(total, d.area(), max_relative = 1e-12);
            let boundary_area = shoelace(m.nodes(), m.boundary());
            assert_relative_eq!(boundary_area, d.area(), max_relative = 1e-12);
        }
    }

    #[test]
    fn initial_size_hits_quarter_exactly() {
        let d = l_domain();
        let m = TriMesh::initial(&d, 0.25).unwrap();
        assert_eq!(m.size(), 0.25);
        assert_eq!(m.level(), 0);
    }

    #[test]
    fn rejects_bad_target_size() {
        let d = l_domain();
        assert!(TriMesh::initial(&d, 0.0).is_err());
        assert!(TriMesh::initial(&d, -0.5).is_err());
        assert!(TriMesh::initial(&d, 2.0).is_err());
    }

    #[test]
    fn uniform_sweep_quarters_the_quadrant_fan() {
        let d = PolygonalDomain::new(PI / 2.0).unwrap();
        let m = TriMesh::initial(&d, 2.0f64.sqrt()).unwrap();
        let f = m.refine_uniform().unwrap();
        assert_eq!(f.elements().len(), 8);
        assert_eq!(f.level(), 1);
        f.validate().unwrap();
    }

    #[test]
    fn uniform_sweep_halves_single_triangle_size() {
        // One right triangle with legs 1: the seed cuts the hypotenuse, and a
        // full sweep ends at h = sqrt(2)/2.
        let text = "nodes 3 elements 1 boundary 3\n0 0\n1 0\n0 1\n0 1 2\n0\n1\n2\n";
        let m = TriMesh::from_text(text).unwrap();
        assert_relative_eq!(m.size(), 2.0f64.sqrt(), epsilon = 1e-15);
        let f = m.refine_uniform().unwrap();
        assert_eq!(f.elements().len(), 4);
        assert_relative_eq!(f.size(), 2.0f64.sqrt() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn size_halves_per_level() {
        let d = l_domain();
        let mut m = TriMesh::initial(&d, 0.25).unwrap();
        for _ in 0..3 {
            let f = m.refine_uniform().unwrap();
            let ratio = f.size() / m.size();
            assert!(
                (0.45..=0.55).contains(&ratio),
                "size ratio {ratio} outside [0.45, 0.55]"
            );
            assert!(f.nodes().len() > m.nodes().len());
            m = f;
        }
    }

    #[test]
    fn counts_grow_fourfold() {
        let d = l_domain();
        let m = TriMesh::initial(&d, 0.25).unwrap();
        let f = m.refine_uniform().unwrap();
        assert_eq!(f.elements().len(), 4 * m.elements().len());
    }

    #[test]
    fn refinement_is_deterministic() {
        let d = PolygonalDomain::new(355.0 * PI / 180.0).unwrap();
        let a = TriMesh::initial(&d, 0.25).unwrap().refine_uniform().unwrap();
        let b = TriMesh::initial(&d, 0.25).unwrap().refine_uniform().unwrap();
        assert_eq!(a.nodes().len(), b.nodes().len());
        assert_eq!(a.elements(), b.elements());
        for (p, q) in a.nodes().iter().zip(b.nodes()) {
            assert_eq!(p, q);
        }
        assert_eq!(a.boundary(), b.boundary());
    }

    #[test]
    fn min_angle_stays_bounded() {
        fn min_angle(m: &TriMesh) -> f64 {
            let mut best = f64::MAX;
            for e in 0..m.elements().len() {
                let [a, b, c] = m.element_coords(e);
                for (p, q, r) in [(a, b, c), (b, c, a), (c, a, b)] {
                    let u = [q[0] - p[0], q[1] - p[1]];
                    let v = [r[0] - p[0], r[1] - p[1]];
                    let dot = u[0] * v[0] + u[1] * v[1];
                    let cross = u[0] * v[1] - u[1] * v[0];
                    best = best.min(cross.atan2(dot).abs());
                }
            }
            best
        }
        let d = l_domain();
        let mut m = TriMesh::initial(&d, 2.0f64.sqrt()).unwrap();
        let initial = min_angle(&m);
        for _ in 0..6 {
            m = m.refine_uniform().unwrap();
            assert!(min_angle(&m) >= initial / 2.0 - 1e-12);
        }
        m.validate().unwrap();
    }

    #[test]
    fn boundary_walk_starts_at_corner_toward_positive_axis() {
        let d = l_domain();
        let m = TriMesh::initial(&d, 0.25).unwrap();
        assert_eq!(m.boundary()[0], m.corner_node());
        let first = m.nodes()[m.boundary()[1]];
        assert!(first[0] > 0.0 && first[1].abs() < 1e-14);
        // Counterclockwise: positive enclosed area.
        assert!(shoelace(m.nodes(), m.boundary()) > 0.0);
    }

    #[test]
    fn boundary_edges_have_two_corner_adjacent_entries() {
        let d = l_domain();
        let m = TriMesh::initial(&d, 0.25).unwrap();
        let edges = m.boundary_edges();
        let corner_adjacent = edges.iter().filter(|e| e.r_min == 0.0).count();
        assert_eq!(corner_adjacent, 2);
        let total: f64 = edges.iter().map(|e| e.length).sum();
        assert_relative_eq!(total, d.perimeter(), max_relative = 1e-12);
    }

    #[test]
    fn prolongation_reproduces_linear_functions() {
        let d = l_domain();
        let m = TriMesh::initial(&d, 0.5).unwrap();
        let f = m.refine_uniform().unwrap();
        let lin = |p: [f64; 2]| 0.3 + 1.7 * p[0] - 0.9 * p[1];
        let coarse: Vec<f64> = m.nodes().iter().map(|&p| lin(p)).collect();
        let fine = f.prolong_from(&coarse);
        for (i, &p) in f.nodes().iter().enumerate() {
            assert_relative_eq!(fine[i], lin(p), epsilon = 1e-13);
        }
    }

    #[test]
    fn text_round_trip() {
        let d = PolygonalDomain::new(355.0 * PI / 180.0).unwrap();
        let m = TriMesh::initial(&d, 0.5).unwrap();
        let text = m.to_text();
        let back = TriMesh::from_text(&text).unwrap();
        assert_eq!(m.nodes().len(), back.nodes().len());
        for (p, q) in m.nodes().iter().zip(back.nodes()) {
            assert_eq!(p, q);
        }
        assert_eq!(m.elements(), back.elements());
        assert_eq!(m.boundary(), back.boundary());
        assert_eq!(m.size(), back.size());
    }

    #[test]
    fn from_text_rejects_malformed_input() {
        assert!(TriMesh::from_text("").is_err());
        assert!(TriMesh::from_text("nodes 3 elements 1\n").is_err());
        assert!(TriMesh::from_text("nodes 1 elements 0 boundary 0\n0 0\n").is_err());
        let out_of_range = "nodes 3 elements 1 boundary 3\n0 0\n1 0\n0 1\n0 1 7\n0\n1\n2\n";
        assert!(TriMesh::from_text(out_of_range).is_err());
    }

    #[test]
    fn validate_catches_degenerate_elements() {
        let text = "nodes 3 elements 1 boundary 3\n0 0\n1 0\n2 0\n0 1 2\n0\n1\n2\n";
        assert!(TriMesh::from_text(text).is_err());
    }
}
