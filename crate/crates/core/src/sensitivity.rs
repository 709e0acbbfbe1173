//! Variogram-based global sensitivity analysis on star samples.
//!
//! Inputs live in the unit hypercube. Each star has a Latin-hypercube
//! centre and one ray per dimension: the grid `c_d mod Δh + kΔh` across
//! `[0, 1]` with all other coordinates held at the centre. Directional
//! variograms, their integrals over lag ranges, and a total-order index are
//! estimated from the same responses.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::latin_hypercube;

pub const IVARS_SCALES: [f64; 3] = [0.1, 0.3, 0.5];
pub const DEFAULT_SELECTED: usize = 6;
const LAG_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarsConfig {
    pub stars: usize,
    pub delta_h: f64,
    pub seed: u64,
}

impl Default for VarsConfig {
    fn default() -> Self {
        Self { stars: 50, delta_h: 0.1, seed: 0 }
    }
}

impl VarsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stars < 2 {
            return Err(Error::InsufficientResolution(format!("{} stars; at least 2 needed", self.stars)));
        }
        if !(self.delta_h > 0.0 && self.delta_h <= 0.5) {
            return Err(Error::InvalidParameter(format!("lag resolution {} outside (0, 0.5]", self.delta_h)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarSample {
    pub center: Vec<f64>,
    /// `rays[d]` are the points along dimension `d`, in increasing order.
    pub rays: Vec<Vec<Vec<f64>>>,
}

fn ray_positions(c: f64, delta_h: f64) -> Vec<f64> {
    let offset = c.rem_euclid(delta_h);
    let centre_k = ((c - offset) / delta_h).round() as i64;
    let mut out = Vec::new();
    let mut k = 0i64;
    loop {
        let x = if k == centre_k { c } else { offset + k as f64 * delta_h };
        if x > 1.0 + 1e-12 {
            break;
        }
        out.push(x.min(1.0));
        k += 1;
    }
    out
}

pub fn generate_stars(dims: usize, cfg: &VarsConfig) -> Result<Vec<StarSample>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let centres = latin_hypercube(cfg.stars, dims, &mut rng);
    Ok(centres
        .into_iter()
        .map(|center| {
            let rays = (0..dims)
                .map(|d| {
                    ray_positions(center[d], cfg.delta_h)
                        .into_iter()
                        .map(|x| {
                            let mut p = center.clone();
                            p[d] = x;
                            p
                        })
                        .collect()
                })
                .collect();
            StarSample { center, rays }
        })
        .collect())
}

/// Objective values at every ray point of every star.
#[derive(Debug, Clone, PartialEq)]
pub struct StarResponses {
    delta_h: f64,
    /// `values[star][dim][k]`
    values: Vec<Vec<Vec<f64>>>,
}

impl StarResponses {
    pub fn evaluate<F>(stars: &[StarSample], delta_h: f64, objective: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync,
    {
        let points: Vec<(usize, usize, &[f64])> = stars
            .iter()
            .enumerate()
            .flat_map(|(s, star)| {
                star.rays.iter().enumerate().flat_map(move |(d, ray)| ray.iter().map(move |p| (s, d, p.as_slice())))
            })
            .collect();
        let ys: Vec<f64> = points.par_iter().map(|(_, _, p)| objective(p)).collect::<Result<_>>()?;
        let mut values: Vec<Vec<Vec<f64>>> =
            stars.iter().map(|s| s.rays.iter().map(|r| Vec::with_capacity(r.len())).collect()).collect();
        for (&(s, d, _), y) in points.iter().zip(ys) {
            values[s][d].push(y);
        }
        Ok(Self { delta_h, values })
    }

    pub fn dims(&self) -> usize {
        self.values.first().map_or(0, |s| s.len())
    }

    fn lag_steps(&self, h: f64) -> Result<usize> {
        let k = (h / self.delta_h).round();
        if k < 1.0 || (k * self.delta_h - h).abs() > LAG_TOLERANCE {
            return Err(Error::InsufficientResolution(format!("lag {h} is not a positive multiple of {}", self.delta_h)));
        }
        Ok(k as usize)
    }

    /// `γ_d(h)`: half the mean squared response change over same-ray pairs `h` apart.
    pub fn variogram(&self, dim: usize, h: f64) -> Result<f64> {
        let k = self.lag_steps(h)?;
        let (mut sum, mut count) = (0.0, 0usize);
        for star in &self.values {
            let ray = &star[dim];
            for i in 0..ray.len().saturating_sub(k) {
                sum += (ray[i + k] - ray[i]).powi(2);
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::InsufficientResolution(format!("no point pairs at lag {h}")));
        }
        Ok(0.5 * sum / count as f64)
    }

    /// Trapezoid integral of the variogram over `[0, scale]`, with `γ(0) = 0`.
    pub fn ivars(&self, dim: usize, scale: f64) -> Result<f64> {
        let m = self.lag_steps(scale)?;
        let mut total = 0.0;
        let mut prev = 0.0;
        for k in 1..=m {
            let g = self.variogram(dim, k as f64 * self.delta_h)?;
            total += 0.5 * (prev + g) * self.delta_h;
            prev = g;
        }
        Ok(total)
    }

    /// Mean within-ray variance along `dim` over the variance of all responses.
    pub fn sobol_total(&self, dim: usize) -> Result<f64> {
        if self.values.len() < 2 {
            return Err(Error::InsufficientResolution("at least two stars needed".into()));
        }
        let all: Vec<f64> = self.values.iter().flatten().flatten().copied().collect();
        let total = variance(&all);
        if total <= 0.0 {
            return Err(Error::UndefinedIndex("responses have zero variance".into()));
        }
        let within: f64 = self.values.iter().map(|s| variance(&s[dim])).sum::<f64>() / self.values.len() as f64;
        Ok(within / total)
    }
}

fn variance(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Sensitivity metrics of one parameter, larger meaning more influential.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterSensitivity {
    pub name: String,
    pub ivars10: f64,
    pub ivars30: f64,
    pub ivars50: f64,
    pub sobol: f64,
    /// Dense ranks for ivars10, ivars30, ivars50 and sobol, 1 = most influential.
    pub ranks: [usize; 4],
    pub mean_rank: f64,
    pub aggregated_rank: usize,
    pub selected: bool,
}

impl ParameterSensitivity {
    fn metrics(&self) -> [f64; 4] {
        [self.ivars10, self.ivars30, self.ivars50, self.sobol]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    /// In input order.
    pub parameters: Vec<ParameterSensitivity>,
}

impl SensitivityReport {
    /// Names of the selected parameters, best first.
    pub fn selected(&self) -> Vec<&str> {
        let mut sel: Vec<&ParameterSensitivity> = self.parameters.iter().filter(|p| p.selected).collect();
        sel.sort_by_key(|p| p.aggregated_rank);
        sel.into_iter().map(|p| p.name.as_str()).collect()
    }

    pub fn selected_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.parameters.len()).filter(|&i| self.parameters[i].selected).collect();
        idx.sort_by_key(|&i| self.parameters[i].aggregated_rank);
        idx
    }

    /// Parameter indices ordered by a single metric (0..4), best first.
    pub fn order_by_metric(&self, metric: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.parameters.len()).collect();
        idx.sort_by(|&a, &b| {
            self.parameters[a].ranks[metric]
                .cmp(&self.parameters[b].ranks[metric])
                .then_with(|| self.parameters[a].name.cmp(&self.parameters[b].name))
        });
        idx
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "parameter,ivars10,ivars30,ivars50,sobol,log10_ivars10,log10_ivars30,log10_ivars50,log10_sobol,\
             rank_ivars10,rank_ivars30,rank_ivars50,rank_sobol,mean_rank,aggregated_rank,selected"
        )?;
        for p in &self.parameters {
            let m = p.metrics();
            let logs: Vec<String> = m.iter().map(|v| format!("{}", v.log10())).collect();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                p.name,
                m[0],
                m[1],
                m[2],
                m[3],
                logs.join(","),
                p.ranks[0],
                p.ranks[1],
                p.ranks[2],
                p.ranks[3],
                p.mean_rank,
                p.aggregated_rank,
                p.selected,
            )?;
        }
        Ok(())
    }
}

/// Dense ranks, largest value ranked 1.
fn dense_ranks(values: &[f64]) -> Vec<usize> {
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(|a, b| b.total_cmp(a));
    distinct.dedup();
    values.iter().map(|v| distinct.iter().position(|d| d == v).unwrap() + 1).collect()
}

/// Ranks every metric, averages the ranks and selects the best `top`
/// parameters, ties broken by name.
pub fn rank_and_select(names: &[String], metrics: &[[f64; 4]], top: usize) -> Result<SensitivityReport> {
    if names.len() != metrics.len() {
        return Err(Error::InvalidInput(format!("{} names for {} metric rows", names.len(), metrics.len())));
    }
    let d = names.len();
    let per_metric: Vec<Vec<usize>> =
        (0..4).map(|m| dense_ranks(&metrics.iter().map(|row| row[m]).collect::<Vec<_>>())).collect();
    let mut params: Vec<ParameterSensitivity> = (0..d)
        .map(|i| {
            let ranks = [per_metric[0][i], per_metric[1][i], per_metric[2][i], per_metric[3][i]];
            ParameterSensitivity {
                name: names[i].clone(),
                ivars10: metrics[i][0],
                ivars30: metrics[i][1],
                ivars50: metrics[i][2],
                sobol: metrics[i][3],
                ranks,
                mean_rank: ranks.iter().sum::<usize>() as f64 / 4.0,
                aggregated_rank: 0,
                selected: false,
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| params[a].mean_rank.total_cmp(&params[b].mean_rank).then_with(|| params[a].name.cmp(&params[b].name)));
    for (pos, &i) in order.iter().enumerate() {
        params[i].aggregated_rank = pos + 1;
        params[i].selected = pos < top;
    }
    Ok(SensitivityReport { parameters: params })
}

/// Full analysis of an objective over the unit hypercube.
pub fn analyse<F>(names: &[String], objective: F, cfg: &VarsConfig, top: usize) -> Result<SensitivityReport>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let stars = generate_stars(names.len(), cfg)?;
    let responses = StarResponses::evaluate(&stars, cfg.delta_h, objective)?;
    let metrics: Vec<[f64; 4]> = (0..names.len())
        .map(|d| {
            Ok([
                responses.ivars(d, IVARS_SCALES[0])?,
                responses.ivars(d, IVARS_SCALES[1])?,
                responses.ivars(d, IVARS_SCALES[2])?,
                responses.sobol_total(d)?,
            ])
        })
        .collect::<Result<_>>()?;
    rank_and_select(names, &metrics, top)
}
