//! Topology metrics: degree, local clustering and shortest paths.

use std::collections::VecDeque;

use serde::Serialize;

use crate::formation::Network;

/// Path length assigned to unreachable node pairs.
pub const FAKE_PATH_LENGTH: usize = 90;

/// Mean, population standard deviation, max and min of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub min: f64,
}

impl Summary {
    /// All-zero for an empty sample.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self::default();
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

pub fn degrees(net: &Network) -> Vec<usize> {
    (0..net.node_count()).map(|i| net.degree(i)).collect()
}

pub fn degree_summary(net: &Network) -> Summary {
    Summary::of(degrees(net).into_iter().map(|d| d as f64))
}

/// Local clustering coefficient; zero for nodes with fewer than two neighbours.
pub fn clustering_coefficients(net: &Network) -> Vec<f64> {
    (0..net.node_count())
        .map(|i| {
            let nb = net.neighbors(i);
            let k = nb.len();
            if k < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (a, &u) in nb.iter().enumerate() {
                for &v in &nb[a + 1..] {
                    if net.has_edge(u, v) {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (k * (k - 1)) as f64
        })
        .collect()
}

pub fn clustering_summary(net: &Network) -> Summary {
    Summary::of(clustering_coefficients(net))
}

/// BFS hop distances from `source`; `None` for unreachable nodes.
pub fn bfs_distances(net: &Network, source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; net.node_count()];
    let mut queue = VecDeque::new();
    dist[source] = Some(0);
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap_or(0) + 1;
        for &v in net.neighbors(u) {
            if dist[v].is_none() {
                dist[v] = Some(d);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// All-pairs shortest path lengths, unreachable pairs set to the fake length.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPaths {
    n: usize,
    lengths: Vec<Option<usize>>,
    fake_length: usize,
}

impl ShortestPaths {
    pub fn compute(net: &Network) -> Self {
        Self::with_fake_length(net, FAKE_PATH_LENGTH)
    }

    pub fn with_fake_length(net: &Network, fake_length: usize) -> Self {
        let n = net.node_count();
        let mut lengths = Vec::with_capacity(n * n);
        for s in 0..n {
            lengths.extend(bfs_distances(net, s));
        }
        Self { n, lengths, fake_length }
    }

    pub fn get(&self, u: usize, v: usize) -> usize {
        self.lengths[u * self.n + v].unwrap_or(self.fake_length)
    }

    pub fn is_reachable(&self, u: usize, v: usize) -> bool {
        self.lengths[u * self.n + v].is_some()
    }

    fn unordered(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j)))
    }

    /// Unreachable unordered pairs.
    pub fn fake_pairs(&self) -> usize {
        self.unordered().filter(|&(i, j)| !self.is_reachable(i, j)).count()
    }

    /// Unreachable ordered pairs, i.e. twice [`Self::fake_pairs`].
    pub fn fake_ordered_pairs(&self) -> usize {
        2 * self.fake_pairs()
    }

    /// Summary over unordered pairs, fake lengths included.
    pub fn summary(&self) -> Summary {
        Summary::of(self.unordered().map(|(i, j)| self.get(i, j) as f64))
    }
}

/// One row of a topology report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologySummary {
    pub nodes: usize,
    pub connected_nodes: usize,
    pub isolated_nodes: usize,
    pub edges: usize,
    pub degree: Summary,
    pub clustering: Summary,
    pub path_length: Summary,
    pub fake_paths: usize,
    pub fake_paths_ordered: usize,
}

impl TopologySummary {
    pub fn of(net: &Network) -> Self {
        let isolated = (0..net.node_count()).filter(|&i| net.degree(i) == 0).count();
        let paths = ShortestPaths::compute(net);
        Self {
            nodes: net.node_count(),
            connected_nodes: net.node_count() - isolated,
            isolated_nodes: isolated,
            edges: net.edge_count(),
            degree: degree_summary(net),
            clustering: clustering_summary(net),
            path_length: paths.summary(),
            fake_paths: paths.fake_pairs(),
            fake_paths_ordered: paths.fake_ordered_pairs(),
        }
    }
}
