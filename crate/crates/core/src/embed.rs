//! Native (chain-free) embeddings of a problem graph into a host graph.
//!
//! [`find_one`] is a backtracking subgraph monomorphism search: pattern
//! vertices are placed one at a time, each onto a host vertex adjacent to
//! the images of its already-placed neighbours. [`pack_disjoint`] then
//! greedily collects vertex-disjoint embeddings, so several copies of a
//! small problem can be sampled in parallel on one host. Results are
//! checked by [`verify_embedding`], which shares no code with the search.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::IsingModel;
use crate::rng::{rng_for, TaskRng};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    num_vertices: usize,
    /// Sorted, each pair stored once with u < v.
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

impl UndirectedGraph {
    pub fn new(num_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut list = Vec::new();
        for (u, v) in edges {
            if u >= num_vertices || v >= num_vertices {
                return Err(Error::InvalidModel(format!("edge ({u}, {v}) out of range for {num_vertices} vertices")));
            }
            if u == v {
                return Err(Error::InvalidModel(format!("self-loop at vertex {u}")));
            }
            list.push((u.min(v), u.max(v)));
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidModel(format!("duplicate edge ({}, {})", w[0].0, w[0].1)));
        }
        let mut adj = vec![Vec::new(); num_vertices];
        for &(u, v) in &list {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj.iter_mut().for_each(|a| a.sort_unstable());
        Ok(UndirectedGraph { num_vertices, edges: list, adj })
    }

    /// The interaction graph of a model.
    pub fn from_model(model: &IsingModel) -> Self {
        Self::new(model.num_spins(), model.edges()).expect("model couplings form a simple graph")
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// Parses the text format: a "V E" header line, then E lines "u v".
    /// Blank lines and lines starting with '#' are skipped.
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut edges = Vec::new();
        for (k, line) in input.lines().enumerate() {
            let line = line?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = text.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("line {}: '{s}' is not a nonnegative integer", k + 1)))
            };
            if fields.len() != 2 {
                return Err(Error::Parse(format!("line {}: expected two integers, found '{text}'", k + 1)));
            }
            let (a, b) = (parse(fields[0])?, parse(fields[1])?);
            if header.is_none() {
                header = Some((a, b));
            } else {
                edges.push((a, b));
            }
        }
        let (v, e) = header.ok_or_else(|| Error::Parse("missing 'V E' header line".into()))?;
        if edges.len() != e {
            return Err(Error::Parse(format!("header declares {e} edges but {} were listed", edges.len())));
        }
        Self::new(v, edges)
    }

    pub fn from_text_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_text(std::io::BufReader::new(file))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.num_vertices, self.edges.len());
        for (u, v) in &self.edges {
            writeln!(out, "{u} {v}").expect("writing to a String");
        }
        out
    }

    fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }
}

/// Image of each pattern vertex in the host: `map[p]` hosts pattern vertex p.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    pub map: Vec<usize>,
}

impl Embedding {
    pub fn image(&self) -> impl Iterator<Item = usize> + '_ {
        self.map.iter().copied()
    }
}

/// Checks injectivity and edge preservation from the raw edge lists.
pub fn verify_embedding(pattern: &UndirectedGraph, host: &UndirectedGraph, emb: &Embedding) -> std::result::Result<(), String> {
    if emb.map.len() != pattern.num_vertices {
        return Err(format!("map covers {} of {} pattern vertices", emb.map.len(), pattern.num_vertices));
    }
    let mut seen = HashSet::new();
    for (p, &h) in emb.map.iter().enumerate() {
        if h >= host.num_vertices {
            return Err(format!("pattern vertex {p} maps outside the host ({h})"));
        }
        if !seen.insert(h) {
            return Err(format!("host vertex {h} is used twice"));
        }
    }
    let host_edges: HashSet<(usize, usize)> = host.edges.iter().copied().collect();
    for &(a, b) in &pattern.edges {
        let (x, y) = (emb.map[a], emb.map[b]);
        if !host_edges.contains(&(x.min(y), x.max(y))) {
            return Err(format!("pattern edge ({a}, {b}) maps to non-edge ({x}, {y})"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    Found(Embedding),
    /// The search space was exhausted: no embedding avoids the forbidden set.
    NotFound,
    /// The node budget ran out first.
    Unknown,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Shuffle candidate order with this seed; `None` tries candidates in
    /// vertex-index order.
    pub seed: Option<u64>,
    /// Maximum number of tentative placements.
    pub node_budget: Option<u64>,
}

struct Search<'a> {
    pattern: &'a UndirectedGraph,
    host: &'a UndirectedGraph,
    allowed: Vec<bool>,
    /// Degree of each host vertex within the allowed subgraph.
    host_degree: Vec<usize>,
    /// Allowed-subgraph neighbour degrees, sorted descending.
    host_profile: Vec<Vec<usize>>,
    pattern_profile: Vec<Vec<usize>>,
    order: Vec<usize>,
    map: Vec<Option<usize>>,
    used: Vec<bool>,
    nodes: u64,
    budget: u64,
    rng: Option<TaskRng>,
}

fn descending(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable_by(|a, b| b.cmp(a));
    v
}

impl<'a> Search<'a> {
    fn new(pattern: &'a UndirectedGraph, host: &'a UndirectedGraph, forbidden: &HashSet<usize>, opts: SearchOptions) -> Self {
        let allowed: Vec<bool> = (0..host.num_vertices).map(|v| !forbidden.contains(&v)).collect();
        let host_degree: Vec<usize> = (0..host.num_vertices)
            .map(|v| if allowed[v] { host.adj[v].iter().filter(|&&w| allowed[w]).count() } else { 0 })
            .collect();
        let host_profile = (0..host.num_vertices)
            .map(|v| {
                if allowed[v] {
                    descending(host.adj[v].iter().filter(|&&w| allowed[w]).map(|&w| host_degree[w]).collect())
                } else {
                    Vec::new()
                }
            })
            .collect();
        let pattern_profile = (0..pattern.num_vertices)
            .map(|u| descending(pattern.adj[u].iter().map(|&w| pattern.degree(w)).collect()))
            .collect();
        Search {
            pattern,
            host,
            allowed,
            host_degree,
            host_profile,
            pattern_profile,
            order: placement_order(pattern),
            map: vec![None; pattern.num_vertices],
            used: vec![false; host.num_vertices],
            nodes: 0,
            budget: opts.node_budget.unwrap_or(u64::MAX),
            rng: opts.seed.map(|s| rng_for(s, 0)),
        }
    }

    /// Degree and neighbour-degree-sequence dominance.
    fn compatible(&self, u: usize, v: usize) -> bool {
        if !self.allowed[v] || self.used[v] || self.host_degree[v] < self.pattern.degree(u) {
            return false;
        }
        self.pattern_profile[u].iter().zip(&self.host_profile[v]).all(|(p, h)| p <= h)
    }

    fn candidates(&mut self, u: usize) -> Vec<usize> {
        let anchor = self.pattern.adj[u].iter().find_map(|&w| self.map[w]);
        let mut out: Vec<usize> = match anchor {
            Some(a) => self.host.adj[a].clone(),
            None => (0..self.host.num_vertices).collect(),
        };
        out.retain(|&v| {
            self.compatible(u, v)
                && self.pattern.adj[u].iter().all(|&w| self.map[w].is_none_or(|x| self.host.has_edge(x, v)))
        });
        if let Some(rng) = self.rng.as_mut() {
            out.shuffle(rng);
        }
        out
    }

    /// `Some(true)` found, `Some(false)` exhausted, `None` out of budget.
    fn extend(&mut self, depth: usize) -> Option<bool> {
        if depth == self.order.len() {
            return Some(true);
        }
        let u = self.order[depth];
        for v in self.candidates(u) {
            self.nodes += 1;
            if self.nodes > self.budget {
                return None;
            }
            self.map[u] = Some(v);
            self.used[v] = true;
            match self.extend(depth + 1) {
                Some(false) => {}
                done => return done,
            }
            self.map[u] = None;
            self.used[v] = false;
        }
        Some(false)
    }
}

/// Highest degree first, then repeatedly the vertex with the most placed
/// neighbours (ties by degree, then index), so each new vertex is as
/// constrained as possible.
fn placement_order(pattern: &UndirectedGraph) -> Vec<usize> {
    let n = pattern.num_vertices;
    let mut placed = vec![false; n];
    let mut links = vec![0usize; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let next = (0..n)
            .filter(|&u| !placed[u])
            .max_by(|&a, &b| {
                (links[a], pattern.degree(a), std::cmp::Reverse(a)).cmp(&(links[b], pattern.degree(b), std::cmp::Reverse(b)))
            })
            .expect("an unplaced vertex remains");
        placed[next] = true;
        order.push(next);
        for &w in &pattern.adj[next] {
            links[w] += 1;
        }
    }
    order
}

/// Searches for one embedding of `pattern` into `host` that avoids every
/// vertex in `forbidden`.
pub fn find_one(
    pattern: &UndirectedGraph,
    host: &UndirectedGraph,
    forbidden: &HashSet<usize>,
    opts: SearchOptions,
) -> Result<SearchOutcome> {
    if pattern.num_vertices > host.num_vertices {
        return Err(Error::domain(format!(
            "pattern has {} vertices but host only {}",
            pattern.num_vertices, host.num_vertices
        )));
    }
    let mut search = Search::new(pattern, host, forbidden, opts);
    Ok(match search.extend(0) {
        Some(true) => SearchOutcome::Found(Embedding {
            map: search.map.into_iter().map(|m| m.expect("every vertex placed")).collect(),
        }),
        Some(false) => SearchOutcome::NotFound,
        None => SearchOutcome::Unknown,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackingResult {
    pub pattern_vertices: usize,
    pub host_vertices: usize,
    pub embeddings: Vec<Embedding>,
    pub used_vertices: BTreeSet<usize>,
    /// False when the last search ran out of budget, so more embeddings
    /// might still fit.
    pub exhausted: bool,
}

impl PackingResult {
    pub fn count(&self) -> usize {
        self.embeddings.len()
    }
}

/// Greedy packing: find an embedding, forbid its vertices, repeat. The
/// count is a lower bound on the largest disjoint packing.
pub fn pack_disjoint(pattern: &UndirectedGraph, host: &UndirectedGraph, opts: SearchOptions) -> Result<PackingResult> {
    let mut forbidden = HashSet::new();
    let mut embeddings = Vec::new();
    let exhausted = loop {
        if pattern.num_vertices == 0 || host.num_vertices - forbidden.len() < pattern.num_vertices {
            break true;
        }
        match find_one(pattern, host, &forbidden, opts)? {
            SearchOutcome::Found(e) => {
                forbidden.extend(e.image());
                embeddings.push(e);
            }
            SearchOutcome::NotFound => break true,
            SearchOutcome::Unknown => break false,
        }
    };
    Ok(PackingResult {
        pattern_vertices: pattern.num_vertices,
        host_vertices: host.num_vertices,
        embeddings,
        used_vertices: forbidden.into_iter().collect(),
        exhausted,
    })
}

/// Checks every embedding and their pairwise disjointness.
pub fn verify_packing(pattern: &UndirectedGraph, host: &UndirectedGraph, packing: &PackingResult) -> std::result::Result<(), String> {
    let mut seen = HashSet::new();
    for (k, e) in packing.embeddings.iter().enumerate() {
        verify_embedding(pattern, host, e).map_err(|m| format!("embedding {k}: {m}"))?;
        for v in e.image() {
            if !seen.insert(v) {
                return Err(format!("embedding {k} reuses host vertex {v}"));
            }
        }
    }
    Ok(())
}
