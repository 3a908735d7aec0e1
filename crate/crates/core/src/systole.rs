//! Tree-cotree decomposition, integral cohomology classes and a systole estimate.
//!
//! Edges are oriented from the smaller to the larger vertex id. A 1-cochain assigns
//! an integer to each oriented edge; it is closed when its sum around every
//! triangle (taken with the triangle's orientation) vanishes.

use std::cmp::Ordering as CmpOrdering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;

use num_integer::Integer;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::surface::HyperbolicSurface;

/// Oriented edges `(edge, +1 | -1)` forming a closed loop.
pub type EdgeLoop = Vec<(usize, i64)>;

#[derive(Debug, Clone)]
pub struct TreeCotree {
    /// Edges of the primal spanning tree.
    pub tree: Vec<bool>,
    /// Edges dual to the spanning tree of faces.
    pub cotree: Vec<bool>,
    /// The `2g` remaining edges.
    pub generators: Vec<usize>,
    parent_edge: Vec<Option<usize>>,
    parent_vertex: Vec<usize>,
    depth: Vec<usize>,
}

/// Sign with which triangle `t` traverses the edge opposite its corner `k`.
fn face_sign(mesh: &TriangleMesh, t: usize, k: usize) -> i64 {
    let tri = mesh.triangles()[t];
    if tri[(k + 1) % 3] < tri[(k + 2) % 3] {
        1
    } else {
        -1
    }
}

impl TreeCotree {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let nv = mesh.n_vertices();
        let ne = mesh.n_edges();
        let adj = mesh.vertex_neighbors();
        let mut tree = vec![false; ne];
        let mut parent_edge = vec![None; nv];
        let mut parent_vertex = vec![usize::MAX; nv];
        let mut depth = vec![0usize; nv];
        let mut seen = vec![false; nv];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        parent_vertex[0] = 0;
        while let Some(v) = queue.pop_front() {
            for &(w, e) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    tree[e] = true;
                    parent_edge[w] = Some(e);
                    parent_vertex[w] = v;
                    depth[w] = depth[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        let edge_tris = mesh.edge_triangles();
        let mut cotree = vec![false; ne];
        let nt = mesh.n_triangles();
        let mut seen_t = vec![false; nt];
        let mut queue = VecDeque::from([0usize]);
        seen_t[0] = true;
        while let Some(t) = queue.pop_front() {
            for &e in &mesh.tri_edges()[t] {
                if tree[e] {
                    continue;
                }
                let [a, b] = edge_tris[e];
                let other = if a == t { b } else { a };
                if !seen_t[other] {
                    seen_t[other] = true;
                    cotree[e] = true;
                    queue.push_back(other);
                }
            }
        }
        let generators = (0..ne).filter(|&e| !tree[e] && !cotree[e]).collect();
        TreeCotree { tree, cotree, generators, parent_edge, parent_vertex, depth }
    }

    /// Oriented tree path from `v` up to the root.
    fn path_to_root(&self, mesh: &TriangleMesh, mut v: usize) -> EdgeLoop {
        let mut out = Vec::new();
        while let Some(e) = self.parent_edge[v] {
            let p = self.parent_vertex[v];
            let [a, _] = mesh.edges()[e];
            out.push((e, if a == v { 1 } else { -1 }));
            v = p;
        }
        out
    }

    /// Fundamental cycles of the generator edges: a basis of first homology.
    pub fn homology_basis(&self, mesh: &TriangleMesh) -> Vec<EdgeLoop> {
        self.generators
            .iter()
            .map(|&g| {
                let [a, b] = mesh.edges()[g];
                // root -> a, a -> b, b -> root
                let mut lp: EdgeLoop = self.path_to_root(mesh, a).into_iter().rev().map(|(e, s)| (e, -s)).collect();
                lp.push((g, 1));
                lp.extend(self.path_to_root(mesh, b));
                lp
            })
            .collect()
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }
}

/// Integral 1-cochain on the oriented edges of a mesh.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cocycle {
    pub values: Vec<i64>,
}

impl Cocycle {
    /// Value on an edge traversed from `from` to its other endpoint.
    pub fn along(&self, mesh: &TriangleMesh, e: usize, from: usize) -> i64 {
        if mesh.edges()[e][0] == from {
            self.values[e]
        } else {
            -self.values[e]
        }
    }

    pub fn evaluate(&self, lp: &[(usize, i64)]) -> i64 {
        lp.iter().map(|&(e, s)| s * self.values[e]).sum()
    }

    pub fn is_closed(&self, mesh: &TriangleMesh) -> bool {
        self.values.len() == mesh.n_edges()
            && (0..mesh.n_triangles()).all(|t| {
                (0..3).map(|k| face_sign(mesh, t, k) * self.values[mesh.tri_edges()[t][k]]).sum::<i64>() == 0
            })
    }

    /// Closed, and its periods on a homology basis have gcd 1.
    pub fn is_primitive(&self, mesh: &TriangleMesh) -> bool {
        if !self.is_closed(mesh) {
            return false;
        }
        let tc = TreeCotree::new(mesh);
        let g = tc.homology_basis(mesh).iter().fold(0i64, |acc, lp| acc.gcd(&self.evaluate(lp)));
        g == 1
    }
}

/// Closed cochains dual to the generator edges: `omega_i(cycle_j) = delta_ij`.
pub fn cohomology_basis(mesh: &TriangleMesh) -> Vec<Cocycle> {
    let tc = TreeCotree::new(mesh);
    let edge_tris = mesh.edge_triangles();
    // dual-tree BFS order with the parent edge of every face
    let nt = mesh.n_triangles();
    let mut order = Vec::with_capacity(nt);
    let mut parent = vec![usize::MAX; nt];
    let mut seen = vec![false; nt];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(t) = queue.pop_front() {
        order.push(t);
        for &e in &mesh.tri_edges()[t] {
            if !tc.cotree[e] {
                continue;
            }
            let [a, b] = edge_tris[e];
            let other = if a == t { b } else { a };
            if !seen[other] {
                seen[other] = true;
                parent[other] = e;
                queue.push_back(other);
            }
        }
    }
    tc.generators
        .iter()
        .map(|&g| {
            let mut values = vec![0i64; mesh.n_edges()];
            values[g] = 1;
            // leaves first: each face fixes the value of the edge to its parent
            for &t in order.iter().rev().filter(|&&t| t != 0) {
                let pe = parent[t];
                let mut sum = 0i64;
                let mut sign = 0i64;
                for k in 0..3 {
                    let e = mesh.tri_edges()[t][k];
                    if e == pe {
                        sign = face_sign(mesh, t, k);
                    } else {
                        sum += face_sign(mesh, t, k) * values[e];
                    }
                }
                values[pe] = -sum * sign;
            }
            Cocycle { values }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SystoleSource {
    User,
    /// Length of an explicit nontrivial edge loop: an upper bound.
    Estimate,
}

impl fmt::Display for SystoleSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystoleSource::User => write!(f, "user"),
            SystoleSource::Estimate => write!(f, "upper-bound estimate"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Systole {
    pub value: f64,
    pub source: SystoleSource,
    /// Vertex sequence of the realizing loop (empty for user values).
    pub loop_vertices: Vec<usize>,
}

impl Systole {
    pub fn user(value: f64) -> Self {
        Systole { value, source: SystoleSource::User, loop_vertices: vec![] }
    }
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> CmpOrdering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<CmpOrdering> {
        Some(self.cmp(other))
    }
}

struct RootResult {
    length: f64,
    root: usize,
    edge: usize,
}

/// Shortest nontrivial loop through `root` closed by one non-tree edge.
fn shortest_loop_at(
    mesh: &TriangleMesh,
    adj: &[Vec<(usize, usize)>],
    lengths: &[f64],
    cocycles: &[Cocycle],
    root: usize,
) -> (Option<RootResult>, Vec<Option<usize>>) {
    let nv = mesh.n_vertices();
    let h = cocycles.len();
    let mut dist = vec![f64::INFINITY; nv];
    let mut pred: Vec<Option<usize>> = vec![None; nv];
    let mut potential = vec![0i64; nv * h];
    let mut done = vec![false; nv];
    dist[root] = 0.0;
    let mut heap = BinaryHeap::from([HeapItem(0.0, root)]);
    while let Some(HeapItem(d, v)) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        if let Some(e) = pred[v] {
            let [a, b] = mesh.edges()[e];
            let p = if a == v { b } else { a };
            for i in 0..h {
                potential[v * h + i] = potential[p * h + i] + cocycles[i].along(mesh, e, p);
            }
        }
        for &(w, e) in &adj[v] {
            let nd = d + lengths[e];
            if nd < dist[w] {
                dist[w] = nd;
                pred[w] = Some(e);
                heap.push(HeapItem(nd, w));
            }
        }
    }
    let mut best: Option<RootResult> = None;
    for (e, &[a, b]) in mesh.edges().iter().enumerate() {
        if pred[a] == Some(e) || pred[b] == Some(e) {
            continue;
        }
        let nontrivial = (0..h).any(|i| potential[a * h + i] + cocycles[i].values[e] - potential[b * h + i] != 0);
        if !nontrivial {
            continue;
        }
        let len = dist[a] + lengths[e] + dist[b];
        if best.as_ref().map_or(true, |r| len < r.length) {
            best = Some(RootResult { length: len, root, edge: e });
        }
    }
    (best, pred)
}

/// Shortest homologically nontrivial edge loop under the given edge lengths.
pub fn shortest_nontrivial_loop(mesh: &TriangleMesh, lengths: &[f64]) -> Result<Systole> {
    if mesh.genus() < 1 {
        return Err(Error::Precondition("surface has no nontrivial loops".into()));
    }
    let adj = mesh.vertex_neighbors();
    let cocycles = cohomology_basis(mesh);
    let best = (0..mesh.n_vertices())
        .into_par_iter()
        .filter_map(|r| shortest_loop_at(mesh, &adj, lengths, &cocycles, r).0)
        .reduce_with(|a, b| {
            if (b.length, b.root) < (a.length, a.root) {
                b
            } else {
                a
            }
        })
        .ok_or_else(|| Error::Precondition("no nontrivial loop found".into()))?;
    let (_, pred) = shortest_loop_at(mesh, &adj, lengths, &cocycles, best.root);
    let walk = |mut v: usize| {
        let mut path = vec![v];
        while let Some(e) = pred[v] {
            let [a, b] = mesh.edges()[e];
            v = if a == v { b } else { a };
            path.push(v);
        }
        path
    };
    let [a, b] = mesh.edges()[best.edge];
    let mut loop_vertices: Vec<usize> = walk(a).into_iter().rev().collect();
    loop_vertices.extend(walk(b));
    Ok(Systole { value: best.length, source: SystoleSource::Estimate, loop_vertices })
}

impl HyperbolicSurface {
    /// The user value when given, else the upper-bound edge-loop estimate.
    pub fn systole(&self, override_value: Option<f64>) -> Result<Systole> {
        match override_value {
            Some(v) if v > 0.0 => Ok(Systole::user(v)),
            Some(v) => Err(Error::Precondition(format!("systole override must be positive, got {v}"))),
            None => shortest_nontrivial_loop(self.mesh(), &self.metric_edge_lengths()),
        }
    }
}
