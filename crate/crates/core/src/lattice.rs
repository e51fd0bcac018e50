//! Finite site graphs with graph distance, balls and fattened regions.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Chain,
    Ring,
    Torus { lx: usize, ly: usize },
}

/// A finite graph with all-pairs distances and its ball-volume constant.
///
/// Sites are `0..n`. Torus site `(x, y)` has index `x + lx * y`.
#[derive(Debug, Clone)]
pub struct SiteGraph {
    kind: GraphKind,
    adjacency: Vec<Vec<usize>>,
    dist: Vec<Vec<usize>>,
    dimension: usize,
    c_vol: f64,
}

impl SiteGraph {
    fn from_edges(kind: GraphKind, n: usize, edges: &[(usize, usize)], dimension: usize) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a != b && !adjacency[a].contains(&b) {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for nb in &mut adjacency {
            nb.sort_unstable();
        }
        let dist = (0..n).map(|s| bfs(&adjacency, s)).collect();
        let mut g = SiteGraph {
            kind,
            adjacency,
            dist,
            dimension,
            c_vol: 1.0,
        };
        g.c_vol = g.minimal_volume_constant();
        g
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn n_sites(&self) -> usize {
        self.adjacency.len()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Smallest `C` with `|B_x(r)| <= C (r+1)^D` for all `x` and `r`.
    pub fn c_vol(&self) -> f64 {
        self.c_vol
    }

    pub fn neighbours(&self, x: usize) -> &[usize] {
        &self.adjacency[x]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, nb) in self.adjacency.iter().enumerate() {
            for &b in nb {
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn distance(&self, x: usize, y: usize) -> usize {
        self.dist[x][y]
    }

    pub fn diameter(&self) -> usize {
        self.dist.iter().flatten().copied().max().unwrap_or(0)
    }

    pub fn ball_size(&self, x: usize, r: usize) -> usize {
        self.dist[x].iter().filter(|&&d| d <= r).count()
    }

    pub fn ball(&self, x: usize, r: usize) -> Region {
        let sites = (0..self.n_sites()).filter(|&y| self.dist[x][y] <= r).collect();
        Region::from_sorted(self, sites)
    }

    /// Distance from a site to a region; `usize::MAX` for the empty region.
    pub fn distance_to(&self, x: usize, region: &Region) -> usize {
        region.sites().iter().map(|&y| self.dist[x][y]).min().unwrap_or(usize::MAX)
    }

    pub fn distance_between(&self, a: &Region, b: &Region) -> usize {
        a.sites().iter().map(|&x| self.distance_to(x, b)).min().unwrap_or(usize::MAX)
    }

    /// Torus coordinates of a site, or `None` for chains and rings.
    pub fn coordinates(&self, site: usize) -> Option<(usize, usize)> {
        match self.kind {
            GraphKind::Torus { lx, .. } => Some((site % lx, site / lx)),
            _ => None,
        }
    }

    fn minimal_volume_constant(&self) -> f64 {
        let n = self.n_sites();
        let diam = self.diameter();
        let mut c = 1.0f64;
        for x in 0..n {
            for r in 0..=diam {
                let ratio = self.ball_size(x, r) as f64 / ((r + 1) as f64).powi(self.dimension as i32);
                c = c.max(ratio);
            }
        }
        c
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_sites() {
            return Err(Error::SiteOutOfRange {
                site,
                n_sites: self.n_sites(),
            });
        }
        Ok(())
    }
}

fn bfs(adjacency: &[Vec<usize>], source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adjacency.len()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(x) = queue.pop_front() {
        for &y in &adjacency[x] {
            if dist[y] == usize::MAX {
                dist[y] = dist[x] + 1;
                queue.push_back(y);
            }
        }
    }
    dist
}

/// Open chain (`periodic = false`) or ring of `n` sites.
pub fn build_chain(n: usize, periodic: bool) -> Result<SiteGraph> {
    if n == 0 {
        return Err(Error::InvalidParameter("chain needs at least one site".into()));
    }
    let mut edges: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    if periodic && n > 2 {
        edges.push((n - 1, 0));
    }
    let kind = if periodic { GraphKind::Ring } else { GraphKind::Chain };
    Ok(SiteGraph::from_edges(kind, n, &edges, 1))
}

/// Periodic `lx` by `ly` square lattice with row-major site order.
pub fn build_torus(lx: usize, ly: usize) -> Result<SiteGraph> {
    if lx < 2 || ly < 2 {
        return Err(Error::InvalidParameter(format!(
            "torus sides must be at least 2, got {lx}x{ly}"
        )));
    }
    let idx = |x: usize, y: usize| x + lx * y;
    let mut edges = Vec::new();
    for y in 0..ly {
        for x in 0..lx {
            edges.push((idx(x, y), idx((x + 1) % lx, y)));
            edges.push((idx(x, y), idx(x, (y + 1) % ly)));
        }
    }
    Ok(SiteGraph::from_edges(GraphKind::Torus { lx, ly }, lx * ly, &edges, 2))
}

/// A sorted set of distinct sites of a graph, with its cached diameter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Region {
    sites: Vec<usize>,
    diameter: usize,
}

impl Region {
    pub fn new(g: &SiteGraph, sites: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut sites: Vec<usize> = sites.into_iter().collect();
        sites.sort_unstable();
        sites.dedup();
        for &s in &sites {
            g.check_site(s)?;
        }
        Ok(Region::from_sorted(g, sites))
    }

    fn from_sorted(g: &SiteGraph, sites: Vec<usize>) -> Self {
        let mut diameter = 0;
        for (i, &a) in sites.iter().enumerate() {
            for &b in &sites[i + 1..] {
                diameter = diameter.max(g.distance(a, b));
            }
        }
        Region { sites, diameter }
    }

    pub fn all(g: &SiteGraph) -> Self {
        Region::from_sorted(g, (0..g.n_sites()).collect())
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn diameter(&self) -> usize {
        self.diameter
    }

    pub fn contains(&self, site: usize) -> bool {
        self.sites.binary_search(&site).is_ok()
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.sites.iter().all(|&s| other.contains(s))
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.sites.iter().all(|&s| !other.contains(s))
    }

    pub fn complement(&self, g: &SiteGraph) -> Region {
        let sites = (0..g.n_sites()).filter(|&s| !self.contains(s)).collect();
        Region::from_sorted(g, sites)
    }

    pub fn union(&self, g: &SiteGraph, other: &Region) -> Region {
        let mut sites = self.sites.clone();
        sites.extend_from_slice(&other.sites);
        sites.sort_unstable();
        sites.dedup();
        Region::from_sorted(g, sites)
    }
}

/// All sites within distance `k` of `x`.
pub fn fatten(g: &SiteGraph, x: &Region, k: usize) -> Result<Region> {
    if x.is_empty() {
        return Err(Error::InvalidParameter("cannot fatten an empty region".into()));
    }
    let sites = (0..g.n_sites()).filter(|&y| g.distance_to(y, x) <= k).collect();
    Ok(Region::from_sorted(g, sites))
}

/// A constant `C` with `|Z|^k e^{-b diam Z} <= C` on every graph whose balls
/// obey `|B_x(r)| <= c_vol (r+1)^D`.
///
/// For `b <= D` this is the closed form `c_vol^k (kD/e)^{kD} b^{-kD} e^b`;
/// otherwise the supremum over integer radii is evaluated directly.
pub fn volume_constant(b: f64, k: f64, dimension: usize, c_vol: f64) -> Result<f64> {
    if !(b > 0.0) || !(k > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "volume constant needs b > 0 and k > 0, got b = {b}, k = {k}"
        )));
    }
    let d = dimension as f64;
    let kd = k * d;
    if b <= d {
        return Ok(c_vol.powf(k) * (kd / std::f64::consts::E).powf(kd) * b.powf(-kd) * b.exp());
    }
    let n_star = (kd / b - 1.0).max(0.0);
    let candidates = [0.0, n_star.floor(), n_star.ceil()];
    let sup = candidates
        .iter()
        .map(|&n| (n + 1.0).powf(kd) * (-b * n).exp())
        .fold(0.0f64, f64::max);
    Ok(c_vol.powf(k) * sup)
}
