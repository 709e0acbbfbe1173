//! Preferential-attachment and homophily scoring of node pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::RepresentationPrinciple;
use crate::population::NodeFeatures;

/// Negative, neutral or positive preference for one unfolded dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Trinity {
    Negative,
    Neutral,
    Positive,
}

impl Trinity {
    pub fn value(self) -> f64 {
        match self {
            Trinity::Negative => -1.0,
            Trinity::Neutral => 0.0,
            Trinity::Positive => 1.0,
        }
    }

    /// Thresholds a relaxed sign in `[-1, 1]` at ±0.33.
    pub fn from_relaxed(x: f64) -> Self {
        if x > 0.33 {
            Trinity::Positive
        } else if x < -0.33 {
            Trinity::Negative
        } else {
            Trinity::Neutral
        }
    }
}

impl From<Trinity> for i8 {
    fn from(t: Trinity) -> i8 {
        t.value() as i8
    }
}

impl TryFrom<i8> for Trinity {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        match v {
            -1 => Ok(Trinity::Negative),
            0 => Ok(Trinity::Neutral),
            1 => Ok(Trinity::Positive),
            other => Err(Error::InvalidParameter(format!("preference sign {other} not in {{-1, 0, 1}}"))),
        }
    }
}

/// Preference signs and weights over unfolded features (`p`, `w_p`) and
/// unfolded feature differences (`h`, `w_h`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile")]
pub struct PreferenceProfile {
    p: Vec<Trinity>,
    w_p: Vec<f64>,
    h: Vec<Trinity>,
    w_h: Vec<f64>,
}

#[derive(Deserialize)]
struct RawProfile {
    p: Vec<Trinity>,
    w_p: Vec<f64>,
    h: Vec<Trinity>,
    w_h: Vec<f64>,
}

impl TryFrom<RawProfile> for PreferenceProfile {
    type Error = Error;

    fn try_from(raw: RawProfile) -> Result<Self> {
        PreferenceProfile::new(raw.p, raw.w_p, raw.h, raw.w_h)
    }
}

impl PreferenceProfile {
    pub fn new(p: Vec<Trinity>, w_p: Vec<f64>, h: Vec<Trinity>, w_h: Vec<f64>) -> Result<Self> {
        if p.len() != w_p.len() || h.len() != w_h.len() {
            return Err(Error::Config(format!(
                "preference lengths disagree: p={} w_p={} h={} w_h={}",
                p.len(),
                w_p.len(),
                h.len(),
                w_h.len()
            )));
        }
        if let Some(w) = w_p.iter().chain(&w_h).find(|w| !(**w > 0.0 && **w <= 1.0)) {
            return Err(Error::InvalidParameter(format!("preference weight {w} outside (0, 1]")));
        }
        Ok(Self { p, w_p, h, w_h })
    }

    /// All-neutral profile with unit weights.
    pub fn neutral(z: usize, z_h: usize) -> Self {
        Self { p: vec![Trinity::Neutral; z], w_p: vec![1.0; z], h: vec![Trinity::Neutral; z_h], w_h: vec![1.0; z_h] }
    }

    pub fn p(&self) -> &[Trinity] {
        &self.p
    }

    pub fn w_p(&self) -> &[f64] {
        &self.w_p
    }

    pub fn h(&self) -> &[Trinity] {
        &self.h
    }

    pub fn w_h(&self) -> &[f64] {
        &self.w_h
    }

    pub fn value_dim(&self) -> usize {
        self.p.len()
    }

    pub fn difference_dim(&self) -> usize {
        self.h.len()
    }

    /// `p ⊙ w_p`
    pub fn value_coefficients(&self) -> Vec<f64> {
        self.p.iter().zip(&self.w_p).map(|(s, w)| s.value() * w).collect()
    }

    /// `h ⊙ w_h`
    pub fn difference_coefficients(&self) -> Vec<f64> {
        self.h.iter().zip(&self.w_h).map(|(s, w)| s.value() * w).collect()
    }

    /// Multiplies every weight by `c`; the result may leave `(0, 1]`, so it
    /// skips validation. Used for scale-invariance checks.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            p: self.p.clone(),
            w_p: self.w_p.iter().map(|w| w * c).collect(),
            h: self.h.clone(),
            w_h: self.w_h.iter().map(|w| w * c).collect(),
        }
    }

    pub fn check_dims(&self, principle: &RepresentationPrinciple) -> Result<()> {
        if self.p.len() != principle.value_dim() || self.h.len() != principle.difference_dim() {
            return Err(Error::Config(format!(
                "profile dimensions ({}, {}) do not match principle ({}, {})",
                self.p.len(),
                self.h.len(),
                principle.value_dim(),
                principle.difference_dim()
            )));
        }
        Ok(())
    }
}

/// A node together with the rules it evaluates others by.
#[derive(Debug, Clone, Copy)]
pub struct Evaluator<'a> {
    pub node: &'a NodeFeatures,
    pub principle: &'a RepresentationPrinciple,
    pub profile: &'a PreferenceProfile,
}

impl<'a> Evaluator<'a> {
    pub fn new(node: &'a NodeFeatures, principle: &'a RepresentationPrinciple, profile: &'a PreferenceProfile) -> Self {
        Self { node, principle, profile }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preference of `a` for `b`'s unfolded features plus the converse.
pub fn pa_score(a: &Evaluator<'_>, b: &Evaluator<'_>) -> Result<f64> {
    a.profile.check_dims(a.principle)?;
    b.profile.check_dims(b.principle)?;
    let b_seen_by_a = a.principle.unfold_node(b.node);
    let a_seen_by_b = b.principle.unfold_node(a.node);
    Ok(dot(&b_seen_by_a, &a.profile.value_coefficients()) + dot(&a_seen_by_b, &b.profile.value_coefficients()))
}

/// Preference of each node for the pair's unfolded feature differences.
pub fn homophily_score(a: &Evaluator<'_>, b: &Evaluator<'_>) -> Result<f64> {
    a.profile.check_dims(a.principle)?;
    b.profile.check_dims(b.principle)?;
    let diff_a = a.principle.unfold_node_difference(a.node, b.node);
    let diff_b = b.principle.unfold_node_difference(b.node, a.node);
    Ok(dot(&diff_a, &a.profile.difference_coefficients()) + dot(&diff_b, &b.profile.difference_coefficients()))
}

/// Combines precomputed component scores: `(pa/2 + hom/2 + noise) * I`.
#[inline]
pub fn combine(pa: f64, homophily: f64, noise: f64, encountered: bool) -> f64 {
    if encountered {
        0.5 * pa + 0.5 * homophily + noise
    } else {
        0.0
    }
}

/// Full pair score with noise `noise_sigma * standard_normal`.
pub fn pair_score(
    a: &Evaluator<'_>,
    b: &Evaluator<'_>,
    noise_sigma: f64,
    encountered: bool,
    standard_normal: f64,
) -> Result<f64> {
    if !(noise_sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise sigma {noise_sigma} must be >= 0")));
    }
    let pa = pa_score(a, b)?;
    let hom = homophily_score(a, b)?;
    Ok(combine(pa, hom, noise_sigma * standard_normal, encountered))
}
