//! Intrinsic triangle meshes of closed oriented surfaces.
//!
//! A mesh is combinatorics (triangles as vertex triples) plus one positive length per
//! edge. Embedding coordinates, when present, are carried for export only; every
//! geometric quantity is computed from the edge lengths.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    n_vertices: usize,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_lengths: Vec<f64>,
    /// `tri_edges[t][k]` is the edge opposite corner `k` of triangle `t`.
    tri_edges: Vec<[usize; 3]>,
    edge_index: HashMap<(usize, usize), usize>,
    positions: Option<Vec<[f64; 3]>>,
}

/// Input formats understood by [`load_mesh`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    /// `OFF` header, counts line, vertex coordinates, `3 a b c` faces.
    Off,
    /// `INTRINSIC` header, counts line `V F E`, `F` face lines, `E` lines `a b length`.
    EdgeLengths,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl TriangleMesh {
    /// Builds and validates a mesh; `length(a, b)` is queried once per undirected edge.
    pub fn new<F>(n_vertices: usize, triangles: Vec<[usize; 3]>, mut length: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Result<f64>,
    {
        let mut edges = Vec::new();
        let mut edge_index = HashMap::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= n_vertices {
                    return Err(Error::InvalidMesh(format!(
                        "triangle {t} references vertex {v} >= {n_vertices}"
                    )));
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} is degenerate: {tri:?}")));
            }
            let mut te = [0usize; 3];
            for k in 0..3 {
                let (a, b) = key(tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let next = edges.len();
                let e = *edge_index.entry((a, b)).or_insert(next);
                if e == next {
                    edges.push([a, b]);
                }
                te[k] = e;
            }
            tri_edges.push(te);
        }
        let mut edge_lengths = Vec::with_capacity(edges.len());
        for &[a, b] in &edges {
            let l = length(a, b)?;
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidMesh(format!("edge ({a}, {b}) has length {l}")));
            }
            edge_lengths.push(l);
        }
        let mesh = TriangleMesh {
            n_vertices,
            triangles,
            edges,
            edge_lengths,
            tri_edges,
            edge_index,
            positions: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn with_positions(mut self, positions: Vec<[f64; 3]>) -> Result<Self> {
        if positions.len() != self.n_vertices {
            return Err(Error::InvalidMesh("position count does not match vertex count".into()));
        }
        self.positions = Some(positions);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        // Each undirected edge must carry exactly two opposite half-edges.
        let mut half: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                *half.entry((tri[k], tri[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        for &[a, b] in &self.edges {
            let ab = half.get(&(a, b)).copied().unwrap_or(0);
            let ba = half.get(&(b, a)).copied().unwrap_or(0);
            if ab + ba != 2 {
                return Err(Error::NonManifoldEdge { a, b, count: ab + ba });
            }
            if ab != 1 {
                return Err(Error::InvalidMesh(format!(
                    "edge ({a}, {b}) is traversed twice in the same direction (non-orientable or inconsistent orientation)"
                )));
            }
        }

        // Vertex links must be single cycles.
        let mut link: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.n_vertices];
        for tri in &self.triangles {
            for k in 0..3 {
                link[tri[k]].push((tri[(k + 1) % 3], tri[(k + 2) % 3]));
            }
        }
        for (v, arcs) in link.iter().enumerate() {
            if arcs.is_empty() {
                return Err(Error::InvalidMesh(format!("vertex {v} is not used by any triangle")));
            }
            let next: HashMap<usize, usize> = arcs.iter().copied().collect();
            if next.len() != arcs.len() {
                return Err(Error::InvalidMesh(format!("link of vertex {v} is not a cycle")));
            }
            let start = arcs[0].0;
            let mut cur = start;
            let mut steps = 0;
            loop {
                cur = match next.get(&cur) {
                    Some(&n) => n,
                    None => {
                        return Err(Error::InvalidMesh(format!("link of vertex {v} is open")))
                    }
                };
                steps += 1;
                if cur == start || steps > arcs.len() {
                    break;
                }
            }
            if cur != start || steps != arcs.len() {
                return Err(Error::InvalidMesh(format!(
                    "link of vertex {v} is not a single cycle"
                )));
            }
        }

        for (t, te) in self.tri_edges.iter().enumerate() {
            let l = te.map(|e| self.edge_lengths[e]);
            for k in 0..3 {
                if l[k] >= l[(k + 1) % 3] + l[(k + 2) % 3] {
                    return Err(Error::InvalidMesh(format!(
                        "triangle {t} violates the triangle inequality: {l:?}"
                    )));
                }
            }
        }

        let chi = self.euler_characteristic();
        if chi % 2 != 0 {
            return Err(Error::InvalidMesh(format!("odd Euler characteristic {chi}")));
        }
        Ok(())
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_lengths(&self) -> &[f64] {
        &self.edge_lengths
    }

    pub fn tri_edges(&self) -> &[[usize; 3]] {
        &self.tri_edges
    }

    pub fn positions(&self) -> Option<&[[f64; 3]]> {
        self.positions.as_deref()
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&key(a, b)).copied()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    pub fn genus(&self) -> i64 {
        (2 - self.euler_characteristic()) / 2
    }

    pub fn triangle_lengths(&self, t: usize) -> [f64; 3] {
        self.tri_edges[t].map(|e| self.edge_lengths[e])
    }

    /// Interior angles at the three corners.
    pub fn triangle_angles(&self, t: usize) -> [f64; 3] {
        let l = self.triangle_lengths(t);
        let mut out = [0.0; 3];
        for k in 0..3 {
            let (a, b, c) = (l[k], l[(k + 1) % 3], l[(k + 2) % 3]);
            let cos = ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0);
            out[k] = cos.acos();
        }
        out
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let mut l = self.triangle_lengths(t);
        l.sort_by(|x, y| y.total_cmp(x));
        let (a, b, c) = (l[0], l[1], l[2]);
        // Kahan's stable Heron formula (a >= b >= c).
        0.25 * ((a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))).max(0.0).sqrt()
    }

    /// Vertex-to-vertex adjacency with edge ids, sorted by neighbour id.
    pub fn vertex_neighbors(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n_vertices];
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            adj[a].push((b, e));
            adj[b].push((a, e));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Triangles on the two sides of each edge.
    pub fn edge_triangles(&self) -> Vec<[usize; 2]> {
        let mut out = vec![[usize::MAX; 2]; self.edges.len()];
        for (t, te) in self.tri_edges.iter().enumerate() {
            for &e in te {
                let slot = if out[e][0] == usize::MAX { 0 } else { 1 };
                out[e][slot] = t;
            }
        }
        out
    }

    /// Serializes in the intrinsic face-list + edge-length format.
    pub fn to_intrinsic_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "INTRINSIC");
        let _ = writeln!(s, "{} {} {}", self.n_vertices, self.triangles.len(), self.edges.len());
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            let _ = writeln!(s, "{a} {b} {:.16e}", self.edge_lengths[e]);
        }
        s
    }
}

fn tokens(source: &str) -> Vec<(usize, Vec<&str>)> {
    source
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, t)| !t.is_empty())
        .collect()
}

fn parse_num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse { line, msg: format!("cannot parse '{s}'") })
}

/// Parses a mesh description. Genus < 2 is allowed here; uniformization refuses it later.
pub fn load_mesh(source: &str, format: MeshFormat) -> Result<TriangleMesh> {
    let lines = tokens(source);
    let mut it = lines.iter();
    let header = match format {
        MeshFormat::Off => "OFF",
        MeshFormat::EdgeLengths => "INTRINSIC",
    };
    let mut next = it.next().ok_or(Error::Parse { line: 0, msg: "empty input".into() })?;
    if next.1[0] == header {
        if next.1.len() != 1 {
            return Err(Error::Parse { line: next.0, msg: "header must be on its own line".into() });
        }
        next = it.next().ok_or(Error::Parse { line: next.0, msg: "missing counts".into() })?;
    } else if format == MeshFormat::EdgeLengths {
        return Err(Error::Parse { line: next.0, msg: format!("expected '{header}' header") });
    }
    let (cline, counts) = next;
    if counts.len() < 2 {
        return Err(Error::Parse { line: *cline, msg: "counts line needs at least V F".into() });
    }
    let nv: usize = parse_num(*cline, counts[0])?;
    let nf: usize = parse_num(*cline, counts[1])?;

    let mut take = |what: &str| {
        it.next().ok_or(Error::Parse { line: *cline, msg: format!("unexpected end of input reading {what}") })
    };

    match format {
        MeshFormat::Off => {
            let mut pos = Vec::with_capacity(nv);
            for _ in 0..nv {
                let (ln, t) = take("vertices")?;
                if t.len() < 3 {
                    return Err(Error::Parse { line: *ln, msg: "vertex needs 3 coordinates".into() });
                }
                pos.push([parse_num(*ln, t[0])?, parse_num(*ln, t[1])?, parse_num(*ln, t[2])?]);
            }
            let mut tris = Vec::with_capacity(nf);
            for _ in 0..nf {
                let (ln, t) = take("faces")?;
                if t.len() != 4 || t[0] != "3" {
                    return Err(Error::Parse { line: *ln, msg: "only triangular faces '3 a b c' are supported".into() });
                }
                tris.push([parse_num(*ln, t[1])?, parse_num(*ln, t[2])?, parse_num(*ln, t[3])?]);
            }
            let p = pos.clone();
            let mesh = TriangleMesh::new(nv, tris, |a, b| {
                let d: f64 = (0..3).map(|k: usize| (p[a][k] - p[b][k]) * (p[a][k] - p[b][k])).sum::<f64>();
                Ok(d.sqrt())
            })?;
            mesh.with_positions(pos)
        }
        MeshFormat::EdgeLengths => {
            let ne: usize = match counts.get(2) {
                Some(s) => parse_num(*cline, s)?,
                None => return Err(Error::Parse { line: *cline, msg: "counts line needs V F E".into() }),
            };
            let mut tris = Vec::with_capacity(nf);
            for _ in 0..nf {
                let (ln, t) = take("faces")?;
                if t.len() != 3 {
                    return Err(Error::Parse { line: *ln, msg: "face needs 3 vertex ids".into() });
                }
                tris.push([parse_num(*ln, t[0])?, parse_num(*ln, t[1])?, parse_num(*ln, t[2])?]);
            }
            let mut lengths = HashMap::with_capacity(ne);
            for _ in 0..ne {
                let (ln, t) = take("edge lengths")?;
                if t.len() != 3 {
                    return Err(Error::Parse { line: *ln, msg: "edge line needs 'a b length'".into() });
                }
                let a: usize = parse_num(*ln, t[0])?;
                let b: usize = parse_num(*ln, t[1])?;
                let l: f64 = parse_num(*ln, t[2])?;
                lengths.insert(key(a, b), l);
            }
            TriangleMesh::new(nv, tris, |a, b| {
                lengths
                    .get(&key(a, b))
                    .copied()
                    .ok_or_else(|| Error::InvalidMesh(format!("no length given for edge ({a}, {b})")))
            })
        }
    }
}

/// Periodic `n x n` grid on the unit square, each cell split along its diagonal.
pub fn flat_torus(n: usize) -> Result<TriangleMesh> {
    if n < 3 {
        return Err(Error::Precondition("flat-torus needs n >= 3".into()));
    }
    let id = |i: usize, j: usize| (i % n) + n * (j % n);
    let mut tris = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            tris.push([v00, v10, v11]);
            tris.push([v00, v11, v01]);
        }
    }
    let h = 1.0 / n as f64;
    let mesh = TriangleMesh::new(n * n, tris, |a, b| {
        let (ai, aj) = (a % n, a / n);
        let (bi, bj) = (b % n, b / n);
        let di = ai.abs_diff(bi).min(n - ai.abs_diff(bi));
        let dj = aj.abs_diff(bj).min(n - aj.abs_diff(bj));
        Ok(h * ((di * di + dj * dj) as f64).sqrt())
    })?;
    let pos = (0..n * n).map(|v| [(v % n) as f64 * h, (v / n) as f64 * h, 0.0]).collect();
    mesh.with_positions(pos)
}

fn poincare_distance(z: Complex64, w: Complex64) -> f64 {
    let r = ((z - w) / (Complex64::new(1.0, 0.0) - z.conj() * w)).norm();
    2.0 * r.min(1.0 - 1e-16).atanh()
}

#[derive(Hash, PartialEq, Eq, Clone, Copy)]
enum OctKey {
    Center,
    Corner,
    Side(usize, usize),
    Radial(usize, usize),
    Interior(usize, usize, usize),
}

/// Refined regular hyperbolic octagon with interior angles pi/4 and opposite sides
/// identified (the Bolza surface, genus 2).
///
/// The octagon is fanned from its centre into eight triangles, each subdivided into
/// `n^2` triangles on a lattice in the Poincare chart, then made intrinsically
/// Delaunay by edge flips. Edge lengths are hyperbolic distances, so the mesh is
/// already close to curvature -1. Positions are the
/// Poincare-disc coordinates of the first copy of each vertex.
pub fn regular_octagon_genus2(n: usize) -> Result<TriangleMesh> {
    if n < 3 {
        return Err(Error::Precondition("regular-octagon-genus2 needs n >= 3".into()));
    }
    let cot = 1.0 / (PI / 8.0).tan();
    let circumradius = (cot * cot).acosh();
    let rp = (circumradius / 2.0).tanh();
    let corner = |k: usize| Complex64::from_polar(rp, (k % 8) as f64 * PI / 4.0);

    // Linear subdivision of the straight triangle (0, P_k, P_k+1) in the conformal
    // Poincare chart, pushed radially so the chord lands on the geodesic side.
    let half = PI / 8.0;
    let chord_dist = rp * half.cos();
    let circle_c = (rp * rp + 1.0) / (2.0 * rp * half.cos());
    let lattice = |k: usize, i: usize, j: usize| -> Complex64 {
        if i == 0 {
            return Complex64::new(0.0, 0.0);
        }
        let p = (corner(k) * (i - j) as f64 + corner(k + 1) * j as f64) / n as f64;
        let mid = (2 * k + 1) as f64 * half;
        let phi = p.arg() - mid;
        let phi = phi - (phi / (2.0 * PI)).round() * 2.0 * PI;
        let chord = chord_dist / phi.cos();
        let b = circle_c * phi.cos();
        let arc = b - (b * b - 1.0).sqrt();
        let frac = p.norm() / chord;
        let scale = 1.0 + (arc / chord - 1.0) * frac * frac;
        p * scale
    };
    let key_of = |k: usize, i: usize, j: usize| -> OctKey {
        if i == 0 {
            OctKey::Center
        } else if i == n && (j == 0 || j == n) {
            OctKey::Corner
        } else if i == n {
            if k < 4 {
                OctKey::Side(k, j)
            } else {
                OctKey::Side(k - 4, n - j)
            }
        } else if j == 0 {
            OctKey::Radial(k, i)
        } else if j == i {
            OctKey::Radial((k + 1) % 8, i)
        } else {
            OctKey::Interior(k, i, j)
        }
    };

    let mut ids: HashMap<OctKey, usize> = HashMap::new();
    let mut pos: Vec<[f64; 3]> = Vec::new();
    let mut lengths: HashMap<(usize, usize), f64> = HashMap::new();
    let mut tris = Vec::with_capacity(8 * n * n);
    for k in 0..8 {
        let vid = |i: usize, j: usize, ids: &mut HashMap<OctKey, usize>, pos: &mut Vec<[f64; 3]>| {
            let next = pos.len();
            let id = *ids.entry(key_of(k, i, j)).or_insert(next);
            if id == next {
                let z = lattice(k, i, j);
                pos.push([z.re, z.im, 0.0]);
            }
            id
        };
        for i in 0..n {
            for j in 0..=i {
                let corners = [[(i, j), (i + 1, j), (i + 1, j + 1)]]
                    .into_iter()
                    .chain((j < i).then_some([(i, j), (i + 1, j + 1), (i, j + 1)]));
                for c in corners {
                    let v = c.map(|(a, b)| vid(a, b, &mut ids, &mut pos));
                    for m in 0..3 {
                        let (p, q) = (c[m], c[(m + 1) % 3]);
                        let d = poincare_distance(lattice(k, p.0, p.1), lattice(k, q.0, q.1));
                        lengths.entry(key(v[m], v[(m + 1) % 3])).or_insert(d);
                    }
                    tris.push(v);
                }
            }
        }
    }
    let nv = pos.len();
    let tris = intrinsic_delaunay(tris, &mut lengths);
    let mesh = TriangleMesh::new(nv, tris, |a, b| {
        lengths
            .get(&key(a, b))
            .copied()
            .ok_or_else(|| Error::InvalidMesh(format!("missing length for ({a}, {b})")))
    })?;
    mesh.with_positions(pos)
}

fn corner_angle(opposite: f64, b: f64, c: f64) -> f64 {
    ((b * b + c * c - opposite * opposite) / (2.0 * b * c)).clamp(-1.0, 1.0).acos()
}

/// Lawson edge flips on an intrinsic triangulation until every interior angle pair
/// opposite an edge sums to at most pi. Flips that would duplicate an existing edge
/// are skipped, so the result stays a simplicial complex.
fn intrinsic_delaunay(
    mut tris: Vec<[usize; 3]>,
    lengths: &mut HashMap<(usize, usize), f64>,
) -> Vec<[usize; 3]> {
    let mut half: HashMap<(usize, usize), usize> = HashMap::new();
    for (t, tri) in tris.iter().enumerate() {
        for k in 0..3 {
            half.insert((tri[k], tri[(k + 1) % 3]), t);
        }
    }
    let mut queue: std::collections::VecDeque<(usize, usize)> = {
        let mut e: Vec<_> = lengths.keys().copied().collect();
        e.sort_unstable();
        e.into()
    };
    let len = |l: &HashMap<(usize, usize), f64>, a: usize, b: usize| l[&key(a, b)];
    let third = |tri: &[usize; 3], a: usize, b: usize| -> usize {
        *tri.iter().find(|&&v| v != a && v != b).expect("triangle has three vertices")
    };
    while let Some((a, b)) = queue.pop_front() {
        let (Some(&t1), Some(&t2)) = (half.get(&(a, b)), half.get(&(b, a))) else {
            continue;
        };
        let c = third(&tris[t1], a, b);
        let d = third(&tris[t2], a, b);
        if c == d || lengths.contains_key(&key(c, d)) {
            continue;
        }
        let (lab, lbc, lca) = (len(lengths, a, b), len(lengths, b, c), len(lengths, c, a));
        let (lad, ldb) = (len(lengths, a, d), len(lengths, d, b));
        let alpha = corner_angle(lab, lbc, lca);
        let beta = corner_angle(lab, lad, ldb);
        if alpha + beta <= PI + 1e-12 {
            continue;
        }
        let xc = (lab * lab + lca * lca - lbc * lbc) / (2.0 * lab);
        let yc = (lca * lca - xc * xc).max(0.0).sqrt();
        let xd = (lab * lab + lad * lad - ldb * ldb) / (2.0 * lab);
        let yd = -(lad * lad - xd * xd).max(0.0).sqrt();
        let lcd = ((xc - xd).powi(2) + (yc - yd).powi(2)).sqrt();

        // t1 = a->b->c and t2 = b->a->d become a->d->c and d->b->c.
        for tri in [tris[t1], tris[t2]] {
            for k in 0..3 {
                half.remove(&(tri[k], tri[(k + 1) % 3]));
            }
        }
        tris[t1] = [a, d, c];
        tris[t2] = [d, b, c];
        for t in [t1, t2] {
            let tri = tris[t];
            for k in 0..3 {
                half.insert((tri[k], tri[(k + 1) % 3]), t);
            }
        }
        lengths.remove(&key(a, b));
        lengths.insert(key(c, d), lcd);
        queue.extend([key(a, d), key(d, b), key(b, c), key(c, a)]);
    }
    tris
}

/// Built-in generators addressable by name, e.g. `regular-octagon-genus2(8)`.
pub fn generate(spec: &str) -> Result<TriangleMesh> {
    let spec = spec.trim();
    let (name, arg) = match (spec.find('('), spec.strip_suffix(')')) {
        (Some(open), Some(body)) => (&spec[..open], &body[open + 1..]),
        _ => return Err(Error::Precondition(format!("generator '{spec}' must look like name(n)"))),
    };
    let n: usize = arg
        .trim()
        .parse()
        .map_err(|_| Error::Precondition(format!("generator argument '{arg}' is not an integer")))?;
    match name {
        "regular-octagon-genus2" => regular_octagon_genus2(n),
        "flat-torus" => flat_torus(n),
        other => Err(Error::Precondition(format!("unknown generator '{other}'"))),
    }
}
