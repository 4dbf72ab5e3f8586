//! Triangle meshes: OFF input, area-weighted vertex normals and a UV sphere.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::Array2;
use swing_core::igraph::PointCloud;

use crate::BenchError;

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: PointCloud,
    pub faces: Vec<[usize; 3]>,
    /// Unit vertex normals, `N × 3`.
    pub normals: Array2<f64>,
}

fn mesh_err(line: usize, message: impl Into<String>) -> BenchError {
    BenchError::Mesh { line, message: message.into() }
}

impl Mesh {
    /// Builds a mesh and computes its vertex normals.
    pub fn new(vertices: PointCloud, faces: Vec<[usize; 3]>) -> Result<Self, BenchError> {
        if vertices.dim() != 3 {
            return Err(BenchError::Config(format!("mesh vertices must be 3-D, got {}", vertices.dim())));
        }
        let n = vertices.len();
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&v| v >= n)) {
            return Err(BenchError::Config(format!("face {f:?} indexes past {n} vertices")));
        }
        let normals = compute_vertex_normals(&vertices, &faces);
        Ok(Self { vertices, faces, normals })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() == 0
    }

    pub fn normal(&self, i: usize) -> [f64; 3] {
        let r = self.normals.row(i);
        [r[0], r[1], r[2]]
    }

    /// OFF text. Faces with more than three corners are fan-triangulated.
    pub fn parse_off(text: &str) -> Result<Self, BenchError> {
        // (line number, tokens) of every non-blank, non-comment line
        let mut lines = text.lines().enumerate().filter_map(|(i, l)| {
            let l = l.split('#').next().unwrap_or("").trim();
            (!l.is_empty()).then(|| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
        });

        let (line, mut head) = lines.next().ok_or_else(|| mesh_err(1, "empty file"))?;
        if head[0] != "OFF" {
            return Err(mesh_err(line, format!("expected OFF header, found {:?}", head[0])));
        }
        head.remove(0);
        let (line, counts) = if head.is_empty() {
            lines.next().ok_or_else(|| mesh_err(line, "missing element counts"))?
        } else {
            (line, head)
        };
        if counts.len() < 2 {
            return Err(mesh_err(line, "expected vertex and face counts"));
        }
        let count = |s: &str| s.parse::<usize>().map_err(|_| mesh_err(line, format!("bad count {s:?}")));
        let (nv, nf) = (count(counts[0])?, count(counts[1])?);

        let mut points = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (line, tok) = lines.next().ok_or_else(|| mesh_err(0, format!("expected {nv} vertices")))?;
            if tok.len() < 3 {
                return Err(mesh_err(line, "vertex needs three coordinates"));
            }
            let xyz = tok[..3]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| mesh_err(line, format!("bad coordinate {s:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            points.push(xyz);
        }

        let mut faces = Vec::with_capacity(nf);
        for _ in 0..nf {
            let (line, tok) = lines.next().ok_or_else(|| mesh_err(0, format!("expected {nf} faces")))?;
            let idx = tok
                .iter()
                .map(|s| s.parse::<usize>().map_err(|_| mesh_err(line, format!("bad index {s:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let k = idx[0];
            if k < 3 || idx.len() < k + 1 {
                return Err(mesh_err(line, format!("face declares {k} corners")));
            }
            let corners = &idx[1..=k];
            if let Some(&bad) = corners.iter().find(|&&v| v >= nv) {
                return Err(mesh_err(line, format!("vertex index {bad} out of range")));
            }
            for j in 1..k - 1 {
                faces.push([corners[0], corners[j], corners[j + 1]]);
            }
        }
        if nv == 0 {
            return Err(mesh_err(line, "mesh has no vertices"));
        }
        let vertices = PointCloud::new(points)?;
        Self::new(vertices, faces)
    }

    pub fn load_off(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        Self::parse_off(&std::fs::read_to_string(path)?)
    }

    pub fn to_off(&self) -> String {
        let mut s = format!("OFF\n{} {} 0\n", self.len(), self.faces.len());
        for p in self.vertices.iter() {
            s.push_str(&format!("{:?} {:?} {:?}\n", p[0], p[1], p[2]));
        }
        for f in &self.faces {
            s.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
        }
        s
    }
}

fn sub(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Sum of incident face normals weighted by face area, normalized. Vertices
/// without a non-degenerate incident face get a zero normal.
pub fn compute_vertex_normals(vertices: &PointCloud, faces: &[[usize; 3]]) -> Array2<f64> {
    let mut acc = Array2::<f64>::zeros((vertices.len(), 3));
    for f in faces {
        let (a, b, c) = (vertices.point(f[0]), vertices.point(f[1]), vertices.point(f[2]));
        // |cross| is twice the area, so the raw cross product is area-weighted
        let n = cross(sub(b, a), sub(c, a));
        for &v in f {
            for k in 0..3 {
                acc[[v, k]] += n[k];
            }
        }
    }
    for mut row in acc.rows_mut() {
        let len = row.dot(&row).sqrt();
        if len > 0.0 {
            row /= len;
        }
    }
    acc
}

/// UV sphere: `rings` latitude rings of `slices` vertices at polar angles
/// `π(k+1)/(rings+1)` plus two poles. Faces wind outward.
pub fn uv_sphere(rings: usize, slices: usize, radius: f64) -> Result<Mesh, BenchError> {
    if rings < 1 || slices < 3 {
        return Err(BenchError::Config("uv sphere needs at least 1 ring and 3 slices".into()));
    }
    let mut points = Vec::with_capacity(rings * slices + 2);
    for k in 0..rings {
        let theta = PI * (k + 1) as f64 / (rings + 1) as f64;
        for s in 0..slices {
            let phi = 2.0 * PI * s as f64 / slices as f64;
            points.push(vec![
                radius * theta.sin() * phi.cos(),
                radius * theta.sin() * phi.sin(),
                radius * theta.cos(),
            ]);
        }
    }
    let (north, south) = (rings * slices, rings * slices + 1);
    points.push(vec![0.0, 0.0, radius]);
    points.push(vec![0.0, 0.0, -radius]);
    let id = |k: usize, s: usize| k * slices + s % slices;
    let mut faces = Vec::new();
    for k in 0..rings - 1 {
        for s in 0..slices {
            faces.push([id(k, s), id(k + 1, s), id(k + 1, s + 1)]);
            faces.push([id(k, s), id(k + 1, s + 1), id(k, s + 1)]);
        }
    }
    for s in 0..slices {
        faces.push([north, id(0, s), id(0, s + 1)]);
        faces.push([south, id(rings - 1, s + 1), id(rings - 1, s)]);
    }
    Mesh::new(PointCloud::new(points)?, faces)
}

/// `n` points on a Fibonacci spiral over the sphere, triangulated by their
/// convex hull.
pub fn fibonacci_sphere(n: usize, radius: f64) -> Result<Mesh, BenchError> {
    if n < 4 {
        return Err(BenchError::Config("a closed sphere mesh needs at least 4 vertices".into()));
    }
    let golden = PI * (3.0 - 5f64.sqrt());
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            vec![radius * rho * phi.cos(), radius * rho * phi.sin(), radius * z]
        })
        .collect();
    let faces = convex_hull(&points)?;
    Mesh::new(PointCloud::new(points)?, faces)
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Incremental convex hull of points in general position; faces wind
/// outward. `O(n · faces)`.
fn convex_hull(p: &[Vec<f64>]) -> Result<Vec<[usize; 3]>, BenchError> {
    let n = p.len();
    let scale = p.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let eps = 1e-12 * scale * scale * scale;
    let normal = |f: &[usize; 3]| cross(sub(&p[f[1]], &p[f[0]]), sub(&p[f[2]], &p[f[0]]));
    let above = |f: &[usize; 3], q: usize| dot3(normal(f), sub(&p[q], &p[f[0]]));

    // initial tetrahedron from the first four affinely independent points
    let (a, b) = (0, 1);
    let c = (2..n)
        .find(|&c| {
            let x = cross(sub(&p[b], &p[a]), sub(&p[c], &p[a]));
            dot3(x, x).sqrt() > eps
        })
        .ok_or_else(|| BenchError::Config("points are collinear".into()))?;
    let d = (2..n)
        .find(|&d| d != c && above(&[a, b, c], d).abs() > eps)
        .ok_or_else(|| BenchError::Config("points are coplanar".into()))?;
    let mut faces: Vec<[usize; 3]> = if above(&[a, b, c], d) > 0.0 {
        vec![[a, c, b], [a, b, d], [b, c, d], [c, a, d]]
    } else {
        vec![[a, b, c], [a, d, b], [b, d, c], [c, d, a]]
    };

    for q in 0..n {
        if [a, b, c, d].contains(&q) {
            continue;
        }
        let visible: Vec<bool> = faces.iter().map(|f| above(f, q) > eps).collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let edges: std::collections::HashSet<(usize, usize)> = faces
            .iter()
            .zip(&visible)
            .filter(|(_, &v)| v)
            .flat_map(|(f, _)| [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])])
            .collect();
        let horizon: Vec<(usize, usize)> = edges.iter().copied().filter(|&(u, v)| !edges.contains(&(v, u))).collect();
        let mut keep: Vec<[usize; 3]> = faces.iter().zip(&visible).filter(|(_, &v)| !v).map(|(f, _)| *f).collect();
        keep.extend(horizon.into_iter().map(|(u, v)| [u, v, q]));
        faces = keep;
    }
    Ok(faces)
}

/// Flat `side × side` grid in the `z = 0` plane with spacing `h`.
pub fn flat_patch(side: usize, h: f64) -> Result<Mesh, BenchError> {
    if side < 2 {
        return Err(BenchError::Config("patch needs at least 2 vertices per side".into()));
    }
    let points = (0..side * side).map(|i| vec![(i % side) as f64 * h, (i / side) as f64 * h, 0.0]).collect();
    let mut faces = Vec::new();
    for y in 0..side - 1 {
        for x in 0..side - 1 {
            let v = y * side + x;
            faces.push([v, v + 1, v + side + 1]);
            faces.push([v, v + side + 1, v + side]);
        }
    }
    Mesh::new(PointCloud::new(points)?, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ICOSAHEDRON: &str = "OFF
# unit icosahedron
12 20 30
0 0.5257311121191336 0.85065080835204
0 0.5257311121191336 -0.85065080835204
0 -0.5257311121191336 0.85065080835204
0 -0.5257311121191336 -0.85065080835204
0.5257311121191336 0.85065080835204 0
0.5257311121191336 -0.85065080835204 0
-0.5257311121191336 0.85065080835204 0
-0.5257311121191336 -0.85065080835204 0
0.85065080835204 0 0.5257311121191336
0.85065080835204 0 -0.5257311121191336
-0.85065080835204 0 0.5257311121191336
-0.85065080835204 0 -0.5257311121191336
3 0 2 8
3 0 8 4
3 0 4 6
3 0 6 10
3 0 10 2
3 3 1 9
3 3 9 5
3 3 5 7
3 3 7 11
3 3 11 1
3 2 5 8
3 8 5 9
3 8 9 4
3 4 9 1
3 4 1 6
3 6 1 11
3 6 11 10
3 10 11 7
3 10 7 2
3 2 7 5
";

    #[test]
    fn icosahedron_counts_and_normals() {
        let m = Mesh::parse_off(ICOSAHEDRON).unwrap();
        assert_eq!(m.len(), 12);
        assert_eq!(m.faces.len(), 20);
        // vertex normals of a regular solid point along the vertex
        for (i, p) in m.vertices.iter().enumerate() {
            let n = m.normal(i);
            let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            let cos: f64 = n.iter().zip(p).map(|(a, b)| a * b / r).sum();
            assert!(cos > 1.0 - 1e-12, "vertex {i}: {cos}");
        }
    }

    #[test]
    fn empty_and_malformed_files_are_errors() {
        assert!(matches!(Mesh::parse_off(""), Err(BenchError::Mesh { .. })));
        assert!(matches!(Mesh::parse_off("# only a comment\n"), Err(BenchError::Mesh { .. })));
        match Mesh::parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1\n3 0 1 2\n") {
            Err(BenchError::Mesh { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        match Mesh::parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n") {
            Err(BenchError::Mesh { line, .. }) => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_with_counts_and_quads() {
        let m = Mesh::parse_off("OFF 4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n").unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
        for i in 0..4 {
            assert_eq!(m.normal(i), [0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn off_round_trip() {
        let m = uv_sphere(4, 6, 2.0).unwrap();
        let back = Mesh::parse_off(&m.to_off()).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.faces, m.faces);
    }

    #[test]
    fn sphere_normals_are_radial() {
        let m = uv_sphere(30, 40, 1.0).unwrap();
        let worst = (0..m.len())
            .map(|i| {
                let n = m.normal(i);
                let cos: f64 = n.iter().zip(m.vertices.point(i)).map(|(a, b)| a * b).sum();
                cos.clamp(-1.0, 1.0).acos().to_degrees()
            })
            .fold(0.0, f64::max);
        assert!(worst < 5.0, "worst angle {worst}°");
    }

    #[test]
    fn fibonacci_sphere_is_a_closed_radial_mesh() {
        let m = fibonacci_sphere(500, 1.0).unwrap();
        assert_eq!(m.len(), 500);
        // Euler: a closed triangulated sphere has 2V - 4 faces
        assert_eq!(m.faces.len(), 2 * 500 - 4);
        for i in 0..m.len() {
            let cos: f64 = m.normal(i).iter().zip(m.vertices.point(i)).map(|(a, b)| a * b).sum();
            assert!(cos > 5f64.to_radians().cos(), "vertex {i}: {cos}");
        }
        let norms: Vec<f64> = m.normals.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
        assert!(norms.iter().all(|n| (n - 1.0).abs() < 1e-12));
    }
}
