//! Rank-based network formation.
//!
//! Every unordered node pair draws an encounter indicator and a noise term;
//! encountered pairs are scored and the `edge_budget` best become edges.
//! Draws come from two independent ChaCha streams keyed by the formation
//! seed and are consumed in pair-id order, so a fixed seed reproduces the
//! same network bit for bit and encounter sets are nested across rates.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::RepresentationPrinciple;
use crate::population::{NodeFeatures, Population};
use crate::scoring::{self, Evaluator, PreferenceProfile};

pub const DEFAULT_ENCOUNTER_RATE: f64 = 0.8;
pub const DEFAULT_NOISE_SIGMA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormationConfig {
    pub encounter_rate: f64,
    pub edge_budget: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for FormationConfig {
    fn default() -> Self {
        Self { encounter_rate: DEFAULT_ENCOUNTER_RATE, edge_budget: 0, noise_sigma: DEFAULT_NOISE_SIGMA, seed: 0 }
    }
}

impl FormationConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.encounter_rate) {
            return Err(Error::Config(format!("encounter rate {} outside [0, 1]", self.encounter_rate)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("noise sigma {} must be >= 0", self.noise_sigma)));
        }
        let max = pair_count(n);
        if self.edge_budget > max {
            return Err(Error::Config(format!("edge budget {} exceeds the {max} possible pairs", self.edge_budget)));
        }
        Ok(())
    }
}

pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Representation principle and preference profile of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRules {
    pub principle: RepresentationPrinciple,
    pub profile: PreferenceProfile,
}

impl NodeRules {
    pub fn new(principle: RepresentationPrinciple, profile: PreferenceProfile) -> Result<Self> {
        profile.check_dims(&principle)?;
        Ok(Self { principle, profile })
    }
}

/// Rules shared by the whole population or given node by node.
#[derive(Debug, Clone, PartialEq)]
pub enum RuleSet {
    Uniform(NodeRules),
    PerNode(Vec<NodeRules>),
}

impl RuleSet {
    fn get(&self, i: usize) -> &NodeRules {
        match self {
            RuleSet::Uniform(r) => r,
            RuleSet::PerNode(v) => &v[i],
        }
    }
}

/// Pre-generated random draws for all pairs of an `n`-node population.
#[derive(Debug, Clone)]
pub struct FormationDraws {
    n: usize,
    uniforms: Vec<f64>,
    normals: Vec<f64>,
}

impl FormationDraws {
    pub fn generate(n: usize, seed: u64) -> Self {
        let pairs = pair_count(n);
        let mut enc = ChaCha8Rng::seed_from_u64(seed);
        let mut noise = ChaCha8Rng::seed_from_u64(seed);
        noise.set_stream(1);
        let uniforms = (0..pairs).map(|_| enc.random::<f64>()).collect();
        let normals = (0..pairs).map(|_| noise.sample::<f64, _>(StandardNormal)).collect();
        Self { n, uniforms, normals }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Uniform draw of pair `k`; the pair meets when it is below the rate.
    pub fn encounter_draw(&self, pair: usize) -> f64 {
        self.uniforms[pair]
    }

    pub fn encountered(&self, pair: usize, rate: f64) -> bool {
        self.uniforms[pair] < rate
    }

    pub fn standard_normal(&self, pair: usize) -> f64 {
        self.normals[pair]
    }
}

/// Undirected simple graph over nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Network {
    /// Builds a graph, normalising each edge to `(min, max)` and rejecting
    /// self-loops, duplicates and out-of-range ids.
    pub fn from_edges(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut list: Vec<(usize, usize)> = Vec::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::InvalidInput(format!("self-loop on node {u}")));
            }
            if u >= node_count || v >= node_count {
                return Err(Error::InvalidInput(format!("edge ({u}, {v}) outside {node_count} nodes")));
            }
            list.push((u.min(v), u.max(v)));
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!("duplicate edge {:?}", w[0])));
        }
        let mut adjacency = vec![Vec::new(); node_count];
        for &(u, v) in &list {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(Self { node_count, edges: list, adjacency })
    }

    pub fn empty(node_count: usize) -> Self {
        Self { node_count, edges: Vec::new(), adjacency: vec![Vec::new(); node_count] }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn write_edge_list<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "u,v")?;
        for (u, v) in &self.edges {
            writeln!(w, "{u},{v}")?;
        }
        Ok(())
    }
}

/// A formed network and how it relates to the requested budget.
#[derive(Debug, Clone)]
pub struct Formation {
    pub network: Network,
    pub encountered_pairs: usize,
    pub requested_edges: usize,
}

impl Formation {
    /// Number of requested edges that could not be placed.
    pub fn shortfall(&self) -> Option<usize> {
        let missing = self.requested_edges.saturating_sub(self.network.edge_count());
        (missing > 0).then_some(missing)
    }
}

pub fn form_network(pop: &Population, rules: &RuleSet, cfg: &FormationConfig) -> Result<Formation> {
    let draws = FormationDraws::generate(pop.len(), cfg.seed);
    form_network_with_draws(pop, rules, cfg, &draws)
}

/// Forms a network from pre-generated draws; `cfg.seed` is ignored.
pub fn form_network_with_draws(
    pop: &Population,
    rules: &RuleSet,
    cfg: &FormationConfig,
    draws: &FormationDraws,
) -> Result<Formation> {
    let n = pop.len();
    cfg.validate(n)?;
    if draws.node_count() != n {
        return Err(Error::Config(format!("draws cover {} nodes, population has {n}", draws.node_count())));
    }
    if let RuleSet::PerNode(v) = rules {
        if v.len() != n {
            return Err(Error::Config(format!("{} rule sets for {n} nodes", v.len())));
        }
    }
    for i in 0..if matches!(rules, RuleSet::Uniform(_)) { 1.min(n) } else { n } {
        let r = rules.get(i);
        r.profile.check_dims(&r.principle)?;
    }

    let nodes = pop.nodes();
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(pair_count(n));
    match rules {
        RuleSet::Uniform(r) => {
            let scorer = UniformScorer::new(nodes, r);
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if draws.encountered(k, cfg.encounter_rate) {
                        let noise = cfg.noise_sigma * draws.standard_normal(k);
                        scored.push((scorer.score(i, j, noise), k));
                    }
                    k += 1;
                }
            }
        }
        RuleSet::PerNode(_) => {
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if draws.encountered(k, cfg.encounter_rate) {
                        let (ri, rj) = (rules.get(i), rules.get(j));
                        let a = Evaluator::new(&nodes[i], &ri.principle, &ri.profile);
                        let b = Evaluator::new(&nodes[j], &rj.principle, &rj.profile);
                        let s = scoring::pair_score(&a, &b, cfg.noise_sigma, true, draws.standard_normal(k))?;
                        scored.push((s, k));
                    }
                    k += 1;
                }
            }
        }
    }

    let encountered_pairs = scored.len();
    let keep = cfg.edge_budget.min(encountered_pairs);
    let by_rank = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if keep < scored.len() && keep > 0 {
        scored.select_nth_unstable_by(keep - 1, by_rank);
    }
    scored.truncate(keep);

    let pair_index = PairIndex::new(n);
    let network = Network::from_edges(n, scored.iter().map(|&(_, k)| pair_index.pair(k)))?;
    Ok(Formation { network, encountered_pairs, requested_edges: cfg.edge_budget })
}

/// Maps pair ids (lexicographic over `i < j`) back to node pairs.
struct PairIndex {
    row_start: Vec<usize>,
}

impl PairIndex {
    fn new(n: usize) -> Self {
        let mut row_start = Vec::with_capacity(n);
        let mut acc = 0;
        for i in 0..n {
            row_start.push(acc);
            acc += n - i - 1;
        }
        Self { row_start }
    }

    fn pair(&self, k: usize) -> (usize, usize) {
        let i = self.row_start.partition_point(|&s| s <= k) - 1;
        (i, i + 1 + k - self.row_start[i])
    }
}

/// Scores pairs under one shared rule set. Feature values are integral, so
/// the homophily term only depends on the (age, sex) difference and is
/// tabulated once.
struct UniformScorer {
    value_terms: Vec<f64>,
    homophily: Vec<f64>,
    ages: Vec<usize>,
    sexes: Vec<usize>,
}

impl UniformScorer {
    fn new(nodes: &[NodeFeatures], rules: &NodeRules) -> Self {
        let coef_p = rules.profile.value_coefficients();
        let coef_h = rules.profile.difference_coefficients();
        let mut buf = Vec::new();
        let value_terms = nodes
            .iter()
            .map(|node| {
                buf.clear();
                rules.principle.unfold_node_into(node, &mut buf);
                buf.iter().zip(&coef_p).map(|(x, c)| x * c).sum()
            })
            .collect();
        let max_age = nodes.iter().map(|n| n.age as usize).max().unwrap_or(0);
        let mut homophily = Vec::with_capacity((max_age + 1) * 2);
        let origin = NodeFeatures::new(0, 0, crate::population::Sex::Female);
        for dage in 0..=max_age {
            for sex in [crate::population::Sex::Female, crate::population::Sex::Male] {
                let probe = NodeFeatures::new(0, dage as u8, sex);
                buf.clear();
                rules.principle.unfold_node_difference_into(&probe, &origin, &mut buf);
                let one_side: f64 = buf.iter().zip(&coef_h).map(|(x, c)| x * c).sum();
                homophily.push(one_side + one_side);
            }
        }
        Self {
            value_terms,
            homophily,
            ages: nodes.iter().map(|n| n.age as usize).collect(),
            sexes: nodes.iter().map(|n| n.sex.index()).collect(),
        }
    }

    #[inline]
    fn score(&self, i: usize, j: usize, noise: f64) -> f64 {
        let pa = self.value_terms[j] + self.value_terms[i];
        let dage = self.ages[i].abs_diff(self.ages[j]);
        let dsex = self.sexes[i].abs_diff(self.sexes[j]);
        scoring::combine(pa, self.homophily[dage * 2 + dsex], noise, true)
    }
}
