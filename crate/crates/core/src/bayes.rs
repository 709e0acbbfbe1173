//! Box-constrained Bayesian minimisation.
//!
//! Inputs are rescaled to the unit cube and outputs standardised. The
//! surrogate is a Gaussian process with a squared-exponential kernel and one
//! length scale per dimension; hyperparameters maximise the log marginal
//! likelihood (Adam on log-parameters, warm-started between iterations).
//! New points maximise expected improvement over a random candidate pool
//! mixed with perturbations of the best points seen.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::sampling::latin_hypercube;

/// Candidates stay strictly below the upper bound.
const UPPER_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    pub budget: usize,
    pub seed: u64,
    /// Size of the initial design including the initialisation point.
    pub initial_design: Option<usize>,
    pub xi: f64,
    pub candidates: usize,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self { budget: 100, seed: 0, initial_design: None, xi: 0.01, candidates: 1024 }
    }
}

impl BoConfig {
    fn initial_size(&self, dims: usize) -> usize {
        let n = self.initial_design.unwrap_or_else(|| (2 * dims).clamp(5, (self.budget / 4).max(5)));
        n.clamp(1, self.budget)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoResult {
    pub best_x: Vec<f64>,
    pub best_y: f64,
    /// Every evaluation in order.
    pub evaluations: Vec<(Vec<f64>, f64)>,
}

impl BoResult {
    /// Running minimum after each evaluation.
    pub fn running_min(&self) -> Vec<f64> {
        self.evaluations
            .iter()
            .scan(f64::INFINITY, |best, (_, y)| {
                *best = best.min(*y);
                Some(*best)
            })
            .collect()
    }
}

struct Scaler<'a> {
    lower: &'a [f64],
    upper: &'a [f64],
}

impl Scaler<'_> {
    fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(self.upper))
            .map(|(&v, (&lo, &hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }

    fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(self.lower.iter().zip(self.upper)).map(|(&t, (&lo, &hi))| lo + t * (hi - lo)).collect()
    }
}

/// Minimises `objective` over `[lower, upper]`, starting with `init`.
/// Never calls the objective more than `cfg.budget` times.
pub fn minimize<F>(lower: &[f64], upper: &[f64], init: &[f64], cfg: &BoConfig, objective: F) -> Result<BoResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let d = lower.len();
    if d == 0 {
        return Err(Error::InvalidParameter("empty parameter space".into()));
    }
    if upper.len() != d || init.len() != d {
        return Err(Error::InvalidParameter("bounds and initial point differ in length".into()));
    }
    if cfg.budget == 0 {
        return Err(Error::InvalidParameter("budget must be at least 1".into()));
    }
    for i in 0..d {
        if !(lower[i] <= upper[i]) {
            return Err(Error::InvalidParameter(format!("bound {i}: {} > {}", lower[i], upper[i])));
        }
        if !(lower[i] <= init[i] && init[i] <= upper[i]) {
            return Err(Error::OutOfBounds(format!("initial value {} outside [{}, {}]", init[i], lower[i], upper[i])));
        }
    }
    let scaler = Scaler { lower, upper };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let call = |x: &[f64]| objective(x).map_err(|e| Error::Objective { params: x.to_vec(), source: Box::new(e) });

    let n_init = cfg.initial_size(d);
    let mut design = vec![scaler.to_unit(init)];
    design.extend(latin_hypercube(n_init - 1, d, &mut rng).into_iter().map(|u| clamp_unit(u)));
    let mut xs: Vec<Vec<f64>> = design.iter().map(|u| scaler.from_unit(u)).collect();
    xs[0] = init.to_vec();
    let ys: Vec<f64> = xs.par_iter().map(|x| call(x)).collect::<Result<_>>()?;

    let mut units = design;
    let mut evaluations: Vec<(Vec<f64>, f64)> = xs.into_iter().zip(ys).collect();
    let mut hyper: Option<Vec<f64>> = None;

    while evaluations.len() < cfg.budget {
        let y: Vec<f64> = evaluations.iter().map(|e| e.1).collect();
        let (ys, _, _) = standardise(&y);
        let gp = Gp::fit(&units, &ys, hyper.as_deref());
        hyper = Some(gp.log_params.clone());
        let best_y = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let u = propose(&gp, &units, &ys, best_y, cfg, &mut rng);
        let x = scaler.from_unit(&u);
        let v = call(&x)?;
        units.push(u);
        evaluations.push((x, v));
    }

    let (best_x, best_y) = evaluations
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(x, y)| (x.clone(), *y))
        .expect("at least one evaluation");
    Ok(BoResult { best_x, best_y, evaluations })
}

fn clamp_unit(mut u: Vec<f64>) -> Vec<f64> {
    for v in &mut u {
        *v = v.clamp(0.0, 1.0 - UPPER_MARGIN);
    }
    u
}

fn standardise(y: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let sd = if sd > 1e-12 { sd } else { 1.0 };
    (y.iter().map(|v| (v - mean) / sd).collect(), mean, sd)
}

fn propose(gp: &Gp, units: &[Vec<f64>], ys: &[f64], best_y: f64, cfg: &BoConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = units[0].len();
    let mut ranked: Vec<usize> = (0..ys.len()).collect();
    ranked.sort_by(|&a, &b| ys[a].total_cmp(&ys[b]));
    let elite: Vec<&Vec<f64>> = ranked.iter().take(5).map(|&i| &units[i]).collect();

    let total = cfg.candidates.max(2);
    let n_uniform = total / 5;
    let mut pool: Vec<Vec<f64>> = (0..n_uniform).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    for _ in 0..total - n_uniform {
        let base = if rng.random::<f64>() < 0.6 { elite[0] } else { elite[rng.random_range(0..elite.len())] };
        pool.push(perturb(base, rng));
    }

    let score = |u: &[f64]| gp.expected_improvement(u, best_y, cfg.xi);
    let mut best = pool.into_iter().map(|u| clamp_unit(u)).map(|u| (score(&u), u)).max_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
    for _ in 0..cfg.candidates / 8 {
        let u = clamp_unit(best.1.iter().map(|&v| v + 0.02 * rng.sample::<f64, _>(StandardNormal)).collect());
        let s = score(&u);
        if s > best.0 {
            best = (s, u);
        }
    }

    let duplicate = units.iter().any(|p| p.iter().zip(&best.1).all(|(a, b)| (a - b).abs() < 1e-12));
    if duplicate || !(best.0 > 0.0) {
        return clamp_unit((0..d).map(|_| rng.random::<f64>()).collect());
    }
    best.1
}

/// Gaussian perturbation of a random subset of coordinates.
fn perturb(base: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = base.len();
    let scale = [0.05, 0.1, 0.2, 0.35][rng.random_range(0..4)];
    let p_move = if rng.random::<f64>() < 0.5 { 1.0 } else { (2.0 / d as f64).min(1.0) };
    let mut u = base.to_vec();
    let mut moved = false;
    for v in &mut u {
        if rng.random::<f64>() < p_move {
            *v += scale * rng.sample::<f64, _>(StandardNormal);
            moved = true;
        }
    }
    if !moved {
        let k = rng.random_range(0..d);
        u[k] += scale * rng.sample::<f64, _>(StandardNormal);
    }
    u
}

/// Log-parameter bounds: signal variance, length scales, noise variance.
const LOG_SIGNAL: (f64, f64) = (-3.0, 3.0);
const LOG_LENGTH: (f64, f64) = (-3.5, 2.3);
const LOG_NOISE: (f64, f64) = (-13.8, -0.7);
const JITTER: f64 = 1e-8;

struct Gp {
    x: Vec<Vec<f64>>,
    /// `[ln s², ln ℓ_1 .. ln ℓ_d, ln σ_n²]`
    log_params: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl Gp {
    fn fit(x: &[Vec<f64>], y: &[f64], warm: Option<&[f64]>) -> Self {
        let n = x.len();
        let d = x[0].len();
        let mut sq = vec![vec![0.0; n * n]; d];
        for a in 0..n {
            for b in 0..n {
                for k in 0..d {
                    sq[k][a * n + b] = (x[a][k] - x[b][k]).powi(2);
                }
            }
        }
        let yv = DVector::from_column_slice(y);
        let (mut theta, iters) = match warm {
            Some(w) if w.len() == d + 2 => (w.to_vec(), 25),
            _ => {
                let mut t = vec![0.0; d + 2];
                for v in &mut t[1..=d] {
                    *v = (0.5f64 * (d as f64).sqrt()).ln().clamp(LOG_LENGTH.0, LOG_LENGTH.1);
                }
                t[d + 1] = (1e-3f64).ln();
                (t, 120)
            }
        };

        let (lr, b1, b2, eps) = (0.05, 0.9, 0.999, 1e-8);
        let mut m = vec![0.0; d + 2];
        let mut v = vec![0.0; d + 2];
        for it in 1..=iters {
            let Some(grad) = lml_gradient(&theta, &sq, &yv, n) else { break };
            for k in 0..d + 2 {
                m[k] = b1 * m[k] + (1.0 - b1) * grad[k];
                v[k] = b2 * v[k] + (1.0 - b2) * grad[k] * grad[k];
                let mh = m[k] / (1.0 - b1.powi(it));
                let vh = v[k] / (1.0 - b2.powi(it));
                theta[k] += lr * mh / (vh.sqrt() + eps);
            }
            clamp_theta(&mut theta);
        }

        let (chol, _) = factor(&theta, &sq, n).unwrap_or_else(|| {
            theta[d + 1] = LOG_NOISE.1;
            factor(&theta, &sq, n).expect("kernel matrix with large noise is positive definite")
        });
        let alpha = chol.solve(&yv);
        Self { x: x.to_vec(), log_params: theta, chol, alpha }
    }

    fn expected_improvement(&self, u: &[f64], best: f64, xi: f64) -> f64 {
        let d = u.len();
        let s2 = self.log_params[0].exp();
        let inv_l2: Vec<f64> = self.log_params[1..=d].iter().map(|l| (-2.0 * l).exp()).collect();
        let k = DVector::from_iterator(
            self.x.len(),
            self.x.iter().map(|p| {
                let r: f64 = p.iter().zip(u).zip(&inv_l2).map(|((a, b), w)| (a - b).powi(2) * w).sum();
                s2 * (-0.5 * r).exp()
            }),
        );
        let mean = k.dot(&self.alpha);
        let w = self.chol.l_dirty().solve_lower_triangular(&k).unwrap_or_else(|| DVector::zeros(k.len()));
        let var = (s2 - w.norm_squared()).max(1e-18);
        let sd = var.sqrt();
        let imp = best - mean - xi;
        let z = imp / sd;
        let normal = Normal::standard();
        imp * normal.cdf(z) + sd * normal.pdf(z)
    }
}

fn clamp_theta(theta: &mut [f64]) {
    let d = theta.len() - 2;
    theta[0] = theta[0].clamp(LOG_SIGNAL.0, LOG_SIGNAL.1);
    for v in &mut theta[1..=d] {
        *v = v.clamp(LOG_LENGTH.0, LOG_LENGTH.1);
    }
    theta[d + 1] = theta[d + 1].clamp(LOG_NOISE.0, LOG_NOISE.1);
}

/// Cholesky factor of the kernel matrix and the signal part.
fn factor(theta: &[f64], sq: &[Vec<f64>], n: usize) -> Option<(Cholesky<f64, Dyn>, DMatrix<f64>)> {
    let d = sq.len();
    let s2 = theta[0].exp();
    let noise = theta[d + 1].exp();
    let inv_l2: Vec<f64> = theta[1..=d].iter().map(|l| (-2.0 * l).exp()).collect();
    let mut kf = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..=a {
            let idx = a * n + b;
            let r: f64 = (0..d).map(|k| sq[k][idx] * inv_l2[k]).sum();
            let v = s2 * (-0.5 * r).exp();
            kf[(a, b)] = v;
            kf[(b, a)] = v;
        }
    }
    let mut k = kf.clone();
    for i in 0..n {
        k[(i, i)] += noise + JITTER;
    }
    Cholesky::new(k).map(|c| (c, kf))
}

/// Gradient of the log marginal likelihood with respect to the log-parameters.
fn lml_gradient(theta: &[f64], sq: &[Vec<f64>], y: &DVector<f64>, n: usize) -> Option<Vec<f64>> {
    let d = sq.len();
    let (chol, kf) = factor(theta, sq, n)?;
    let alpha = chol.solve(y);
    let kinv = chol.inverse();
    let inv_l2: Vec<f64> = theta[1..=d].iter().map(|l| (-2.0 * l).exp()).collect();
    let mut grad = vec![0.0; d + 2];
    let mut trace = 0.0;
    for a in 0..n {
        for b in 0..n {
            let w = alpha[a] * alpha[b] - kinv[(a, b)];
            let wk = w * kf[(a, b)];
            grad[0] += wk;
            for k in 0..d {
                grad[k + 1] += wk * sq[k][a * n + b] * inv_l2[k];
            }
            if a == b {
                trace += w;
            }
        }
    }
    for g in &mut grad[..=d] {
        *g *= 0.5;
    }
    grad[d + 1] = 0.5 * theta[d + 1].exp() * trace;
    Some(grad)
}
