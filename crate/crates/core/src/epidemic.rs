//! Discrete-time SI spreading from a single seed and People-at-Risk metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formation::Network;
use crate::metrics::{bfs_distances, FAKE_PATH_LENGTH};
use crate::population::{Grouping, Population};

pub const DEFAULT_TRANSMISSIBILITY: f64 = 0.8;
pub const DEFAULT_MAX_STEPS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedRule {
    MaxDegree,
    Node(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    pub gamma: f64,
    pub eta: f64,
    pub seed_rule: SeedRule,
    pub rng_seed: u64,
    pub max_steps: usize,
}

impl Default for EpidemicParams {
    fn default() -> Self {
        Self::si(DEFAULT_TRANSMISSIBILITY, 0)
    }
}

impl EpidemicParams {
    /// Susceptible-infected process: no recovery, max-degree seed.
    pub fn si(gamma: f64, rng_seed: u64) -> Self {
        Self { gamma, eta: 0.0, seed_rule: SeedRule::MaxDegree, rng_seed, max_steps: DEFAULT_MAX_STEPS }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("eta", self.eta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Highest-degree node, lowest id on ties.
pub fn select_seed(net: &Network) -> Result<usize> {
    if net.node_count() == 0 {
        return Err(Error::InvalidInput("cannot seed an empty network".into()));
    }
    let mut best = 0;
    for i in 1..net.node_count() {
        if net.degree(i) > net.degree(best) {
            best = i;
        }
    }
    Ok(best)
}

/// Chance that a healthy node with `k` infected neighbours gets infected.
pub fn infection_probability(gamma: f64, k: usize) -> f64 {
    1.0 - (1.0 - gamma).powi(k as i32)
}

/// One synchronous update. Healthy nodes draw against the infection
/// probability of their infected neighbour count; infected nodes recover
/// with probability `eta` (never when `eta` is 0).
pub fn step_infection<R: Rng>(infected: &[bool], net: &Network, gamma: f64, eta: f64, rng: &mut R) -> Vec<bool> {
    let mut next = infected.to_vec();
    for v in 0..net.node_count() {
        if infected[v] {
            if eta > 0.0 && rng.random::<f64>() < eta {
                next[v] = false;
            }
            continue;
        }
        let k = net.neighbors(v).iter().filter(|&&u| infected[u]).count();
        if k > 0 && rng.random::<f64>() < infection_probability(gamma, k) {
            next[v] = true;
        }
    }
    next
}

/// Outcome of one spreading run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpidemicTrace {
    pub seed: usize,
    /// Step of first infection; `None` if never infected.
    pub infection_time: Vec<Option<usize>>,
    /// Hops from the seed, the fake path length when unreachable.
    pub distance: Vec<usize>,
    /// Infected count after each step, starting with step 0.
    pub infected_per_step: Vec<usize>,
}

pub fn run_si(net: &Network, params: &EpidemicParams) -> Result<EpidemicTrace> {
    params.validate()?;
    let seed = match params.seed_rule {
        SeedRule::MaxDegree => select_seed(net)?,
        SeedRule::Node(id) if id < net.node_count() => id,
        SeedRule::Node(id) => return Err(Error::InvalidParameter(format!("seed node {id} not in network"))),
    };
    let n = net.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut infected = vec![false; n];
    infected[seed] = true;
    let mut infection_time = vec![None; n];
    infection_time[seed] = Some(0);
    let mut infected_per_step = vec![1];

    for t in 1..=params.max_steps {
        let exposed = (0..n).any(|v| !infected[v] && net.neighbors(v).iter().any(|&u| infected[u]));
        if !exposed {
            break;
        }
        infected = step_infection(&infected, net, params.gamma, params.eta, &mut rng);
        for v in 0..n {
            if infected[v] && infection_time[v].is_none() {
                infection_time[v] = Some(t);
            }
        }
        infected_per_step.push(infected.iter().filter(|&&x| x).count());
    }

    let distance = bfs_distances(net, seed).into_iter().map(|d| d.unwrap_or(FAKE_PATH_LENGTH)).collect();
    Ok(EpidemicTrace { seed, infection_time, distance, infected_per_step })
}

impl EpidemicTrace {
    pub fn node_count(&self) -> usize {
        self.infection_time.len()
    }

    fn at_risk(&self, v: usize, t: usize, d: usize) -> bool {
        matches!(self.infection_time[v], Some(s) if s <= t) && self.distance[v] <= d
    }

    fn check_query(t: usize, d: usize) -> Result<()> {
        if d > t {
            return Err(Error::InvalidQuery(format!("distance {d} exceeds time horizon {t}")));
        }
        Ok(())
    }

    /// Share of nodes infected by step `t` within `d` hops of the seed.
    pub fn par(&self, t: usize, d: usize) -> Result<f64> {
        Self::check_query(t, d)?;
        let n = self.node_count();
        Ok((0..n).filter(|&v| self.at_risk(v, t, d)).count() as f64 / n as f64)
    }

    /// Share of nodes ever infected.
    pub fn terminal_par(&self) -> f64 {
        self.infection_time.iter().filter(|t| t.is_some()).count() as f64 / self.node_count() as f64
    }

    /// PaR within each age-decade and sex group; `None` for empty groups.
    pub fn par_by_group(&self, pop: &Population, t: usize, d: usize) -> Result<Vec<Option<f64>>> {
        Self::check_query(t, d)?;
        if pop.len() != self.node_count() {
            return Err(Error::InvalidInput(format!("trace covers {} nodes, population {}", self.node_count(), pop.len())));
        }
        let grouping = Grouping::AgeDecadeSex;
        let mut hits = vec![0usize; grouping.len()];
        let mut sizes = vec![0usize; grouping.len()];
        for node in pop.nodes() {
            let g = grouping.index(node);
            sizes[g] += 1;
            if self.at_risk(node.id, t, d) {
                hits[g] += 1;
            }
        }
        Ok(hits.iter().zip(&sizes).map(|(&h, &s)| (s > 0).then(|| h as f64 / s as f64)).collect())
    }

    /// `(T, D, PaR)` for every `0 <= D <= T <= max_t`.
    pub fn par_surface(&self, max_t: usize) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for t in 0..=max_t {
            for d in 0..=t {
                out.push((t, d, self.par(t, d).expect("d <= t")));
            }
        }
        out
    }

    pub fn write_csv<W: std::io::Write>(&self, pop: &Population, mut w: W) -> std::io::Result<()> {
        writeln!(w, "node,age,sex,distance,infection_time")?;
        for node in pop.nodes() {
            let time = self.infection_time[node.id].map_or(String::new(), |t| t.to_string());
            writeln!(w, "{},{},{},{},{}", node.id, node.age, node.sex, self.distance[node.id], time)?;
        }
        Ok(())
    }
}
