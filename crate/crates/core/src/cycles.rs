//! Tightening representative loops of degree-1 classes.
//!
//! The move used here replaces two consecutive cycle edges `(u, v), (v, w)`
//! by `(u, w)` whenever the triangle `{u, v, w}` is in the complex. That adds
//! the triangle's boundary to the cycle, so the homology class never changes.
//! This is a greedy heuristic; the result is short but not necessarily the
//! shortest loop in the class.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::f2::{BitVec, EchelonBasis};
use crate::persistence::Barcode;
use crate::rips::{Filtration, Vertices};

pub type Edge = (u32, u32);

#[derive(Debug, Error)]
pub enum CycleError {
    #[error("no finite interval in degree {0}")]
    NoFiniteInterval(usize),
    #[error("vertex {0} has odd degree; the edges do not form a cycle")]
    NotACycle(u32),
    #[error("edge ({0}, {1}) is not in the complex at this filtration value")]
    EdgesMissing(u32, u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TightCycle {
    /// Sorted edges `(low, high)`.
    pub edges: Vec<Edge>,
    pub length: usize,
    pub filtration_value: f64,
}

impl TightCycle {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,v\n");
        for (u, v) in &self.edges {
            let _ = writeln!(out, "{u},{v}");
        }
        out
    }

    pub fn vertices(&self) -> BTreeSet<u32> {
        self.edges.iter().flat_map(|&(u, v)| [u, v]).collect()
    }
}

/// Midpoint of the longest finite interval of `degree` (earliest birth on ties).
pub fn midpoint_filtration(b: &Barcode, degree: usize) -> Result<f64, CycleError> {
    let mut best: Option<(f64, f64)> = None;
    for i in b.in_degree(degree).filter(|i| i.is_finite()) {
        let better = match best {
            None => true,
            Some((bb, bd)) => {
                let (len, best_len) = (i.death - i.birth, bd - bb);
                len > best_len || (len == best_len && i.birth < bb)
            }
        };
        if better {
            best = Some((i.birth, i.death));
        }
    }
    best.map(|(b, d)| 0.5 * (b + d))
        .ok_or(CycleError::NoFiniteInterval(degree))
}

fn edge(u: u32, v: u32) -> Edge {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Reduces an edge multiset mod 2.
pub fn normalize_chain(edges: &[Edge]) -> BTreeSet<Edge> {
    let mut set = BTreeSet::new();
    for &(u, v) in edges {
        let e = edge(u, v);
        if !set.remove(&e) {
            set.insert(e);
        }
    }
    set
}

/// Edges of a degree-1 representative given as vertex lists.
pub fn edges_of(representative: &[Vertices]) -> Vec<Edge> {
    representative
        .iter()
        .filter(|s| s.len() == 2)
        .map(|s| edge(s[0], s[1]))
        .collect()
}

fn check_cycle(edges: &BTreeSet<Edge>) -> Result<(), CycleError> {
    let mut degree: BTreeMap<u32, usize> = BTreeMap::new();
    for &(u, v) in edges {
        *degree.entry(u).or_default() += 1;
        *degree.entry(v).or_default() += 1;
    }
    match degree.into_iter().find(|&(_, d)| d % 2 == 1) {
        Some((v, _)) => Err(CycleError::NotACycle(v)),
        None => Ok(()),
    }
}

/// Edges and triangles of the complex at `value`.
struct Complex {
    edges: HashSet<Edge>,
    triangles: HashSet<[u32; 3]>,
}

impl Complex {
    fn at(f: &Filtration, value: f64) -> Self {
        let mut edges = HashSet::new();
        let mut triangles = HashSet::new();
        for s in f.prefix_at(value) {
            match s.vertices.len() {
                2 => {
                    edges.insert((s.vertices[0], s.vertices[1]));
                }
                3 => {
                    triangles.insert([s.vertices[0], s.vertices[1], s.vertices[2]]);
                }
                _ => {}
            }
        }
        Self { edges, triangles }
    }

    fn has_triangle(&self, a: u32, b: u32, c: u32) -> bool {
        let mut t = [a, b, c];
        t.sort_unstable();
        self.triangles.contains(&t)
    }
}

/// Shortens `seed` by triangle moves at filtration value `value`.
///
/// Vertices are scanned in increasing order; at each vertex the first pair
/// of cycle neighbors spanning a triangle is replaced, until no pair at that
/// vertex qualifies. A round is one full scan; the loop stops after a round
/// with no move or after `max_rounds` rounds.
pub fn tighten_cycle(
    f: &Filtration,
    value: f64,
    seed: &[Edge],
    max_rounds: usize,
) -> Result<TightCycle, CycleError> {
    let complex = Complex::at(f, value);
    let mut cycle = normalize_chain(seed);
    check_cycle(&cycle)?;
    if let Some(&(u, v)) = cycle.iter().find(|e| !complex.edges.contains(e)) {
        return Err(CycleError::EdgesMissing(u, v));
    }

    for _ in 0..max_rounds {
        let mut moved = false;
        let vertices: Vec<u32> = cycle.iter().flat_map(|&(u, v)| [u, v]).collect::<BTreeSet<_>>().into_iter().collect();
        for v in vertices {
            while let Some((u, w)) = first_move(&cycle, &complex, v) {
                for e in [edge(u, v), edge(v, w), edge(u, w)] {
                    if !cycle.remove(&e) {
                        cycle.insert(e);
                    }
                }
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    let edges: Vec<Edge> = cycle.into_iter().collect();
    Ok(TightCycle {
        length: edges.len(),
        edges,
        filtration_value: value,
    })
}

fn first_move(cycle: &BTreeSet<Edge>, complex: &Complex, v: u32) -> Option<(u32, u32)> {
    let neighbors: Vec<u32> = cycle
        .iter()
        .filter_map(|&(a, b)| {
            if a == v {
                Some(b)
            } else if b == v {
                Some(a)
            } else {
                None
            }
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    for (i, &u) in neighbors.iter().enumerate() {
        for &w in &neighbors[i + 1..] {
            if complex.has_triangle(u, v, w) {
                return Some((u, w));
            }
        }
    }
    None
}

/// Whether the Z/2 sum of `a` and `b` is a sum of triangle boundaries at
/// `value`, i.e. whether the two cycles are homologous there.
pub fn homologous_at(f: &Filtration, value: f64, a: &[Edge], b: &[Edge]) -> bool {
    let complex = Complex::at(f, value);
    let mut index: HashMap<Edge, usize> = HashMap::new();
    let mut edges: Vec<Edge> = complex.edges.iter().copied().collect();
    edges.sort_unstable();
    for (i, &e) in edges.iter().enumerate() {
        index.insert(e, i);
    }
    let mut diff = normalize_chain(a);
    for e in normalize_chain(b) {
        if !diff.remove(&e) {
            diff.insert(e);
        }
    }
    let Some(target) = diff
        .iter()
        .map(|e| index.get(e).copied())
        .collect::<Option<Vec<usize>>>()
    else {
        return false;
    };
    let mut basis = EchelonBasis::new();
    let mut triangles: Vec<[u32; 3]> = complex.triangles.iter().copied().collect();
    triangles.sort_unstable();
    for [x, y, z] in triangles {
        let boundary = [(x, y), (x, z), (y, z)].map(|e| index[&e]);
        basis.insert(BitVec::from_indices(edges.len(), boundary));
    }
    basis.contains(BitVec::from_indices(edges.len(), target))
}

/// Hop distance in the 1-skeleton at `value` from each marked vertex to the
/// nearest cycle vertex; `None` when unreachable.
pub fn vertex_proximity(
    f: &Filtration,
    value: f64,
    cycle: &TightCycle,
    marked: &[u32],
) -> Vec<(u32, Option<usize>)> {
    let complex = Complex::at(f, value);
    let mut adjacency: HashMap<u32, Vec<u32>> = HashMap::new();
    for &(u, v) in &complex.edges {
        adjacency.entry(u).or_default().push(v);
        adjacency.entry(v).or_default().push(u);
    }
    let mut hops: HashMap<u32, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    for v in cycle.vertices() {
        hops.insert(v, 0);
        queue.push_back(v);
    }
    while let Some(v) = queue.pop_front() {
        let next = hops[&v] + 1;
        for &w in adjacency.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
            if !hops.contains_key(&w) {
                hops.insert(w, next);
                queue.push_back(w);
            }
        }
    }
    marked.iter().map(|&v| (v, hops.get(&v).copied())).collect()
}

pub fn proximity_csv(report: &[(u32, Option<usize>)]) -> String {
    let mut out = String::from("vertex,hops\n");
    for (v, h) in report {
        match h {
            Some(h) => {
                let _ = writeln!(out, "{v},{h}");
            }
            None => {
                let _ = writeln!(out, "{v},inf");
            }
        }
    }
    out
}
