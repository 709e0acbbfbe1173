//! Crisp and fuzzy feature representation.
//!
//! A feature value (or the absolute difference between two nodes' values) is
//! either passed through unchanged or unfolded into its membership degrees
//! over an ordered set of Gaussian membership functions. A
//! [`RepresentationPrinciple`] records that choice per feature and fixes the
//! layout of the unfolded vectors consumed by [`crate::scoring`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{Feature, NodeFeatures};

/// Gaussian membership function `exp(-0.5 ((x - mu) / sigma)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMembership")]
pub struct MembershipFunction {
    mu: f64,
    sigma: f64,
}

#[derive(Deserialize)]
struct RawMembership {
    mu: f64,
    sigma: f64,
}

impl TryFrom<RawMembership> for MembershipFunction {
    type Error = Error;

    fn try_from(raw: RawMembership) -> Result<Self> {
        MembershipFunction::new(raw.mu, raw.sigma)
    }
}

impl MembershipFunction {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidParameter(format!("membership centre {mu} is not finite")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("membership spread {sigma} must be > 0")));
        }
        Ok(Self { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Membership degree of `x`, without input validation.
    #[inline]
    pub fn degree(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        (-0.5 * z * z).exp()
    }
}

/// Membership degree of `x` in `mf`; rejects non-finite inputs.
pub fn membership_degree(x: f64, mf: &MembershipFunction) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("feature value {x} is not finite")));
    }
    Ok(mf.degree(x))
}

/// Ordered Gaussian fuzzy sets over a value range.
///
/// Centres must be strictly increasing but may lie outside `domain`; the
/// domain only records the range the partition was laid out over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPartition")]
pub struct FuzzyPartition {
    sets: Vec<MembershipFunction>,
    domain: (f64, f64),
}

#[derive(Deserialize)]
struct RawPartition {
    sets: Vec<MembershipFunction>,
    domain: (f64, f64),
}

impl TryFrom<RawPartition> for FuzzyPartition {
    type Error = Error;

    fn try_from(raw: RawPartition) -> Result<Self> {
        FuzzyPartition::new(raw.sets, raw.domain)
    }
}

impl FuzzyPartition {
    pub fn new(sets: Vec<MembershipFunction>, domain: (f64, f64)) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::InvalidParameter("a fuzzy partition needs at least one set".into()));
        }
        if !(domain.0.is_finite() && domain.1.is_finite() && domain.0 < domain.1) {
            return Err(Error::InvalidParameter(format!("invalid partition domain {domain:?}")));
        }
        if let Some(w) = sets.windows(2).find(|w| w[0].mu >= w[1].mu) {
            return Err(Error::InvalidParameter(format!(
                "membership centres must be strictly increasing ({} then {})",
                w[0].mu, w[1].mu
            )));
        }
        Ok(Self { sets, domain })
    }

    /// Builds a partition from parallel centre and spread lists.
    pub fn from_parameters(mus: &[f64], sigmas: &[f64], domain: (f64, f64)) -> Result<Self> {
        if mus.len() != sigmas.len() {
            return Err(Error::InvalidParameter(format!(
                "{} centres but {} spreads",
                mus.len(),
                sigmas.len()
            )));
        }
        let sets = mus
            .iter()
            .zip(sigmas)
            .map(|(&mu, &sigma)| MembershipFunction::new(mu, sigma))
            .collect::<Result<Vec<_>>>()?;
        Self::new(sets, domain)
    }

    pub fn sets(&self) -> &[MembershipFunction] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn mus(&self) -> Vec<f64> {
        self.sets.iter().map(|s| s.mu).collect()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.sets.iter().map(|s| s.sigma).collect()
    }

    /// Distance between neighbouring default centres; the full domain width
    /// for a single set.
    pub fn default_spacing(&self) -> f64 {
        let width = self.domain.1 - self.domain.0;
        if self.sets.len() > 1 {
            width / (self.sets.len() - 1) as f64
        } else {
            width
        }
    }

    /// Appends the membership degree of `x` in every set, in order.
    pub fn degrees_into(&self, x: f64, out: &mut Vec<f64>) {
        out.extend(self.sets.iter().map(|s| s.degree(x)));
    }

    pub fn degrees(&self, x: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.sets.len());
        self.degrees_into(x, &mut out);
        out
    }
}

/// Equally spaced partition over `domain` with a common spread.
///
/// With one set the centre sits at the domain's lower bound.
pub fn default_partition(n_sets: usize, domain: (f64, f64), sigma: f64) -> Result<FuzzyPartition> {
    if n_sets < 1 {
        return Err(Error::InvalidParameter("n_sets must be at least 1".into()));
    }
    let (lo, hi) = domain;
    let mus: Vec<f64> = if n_sets == 1 {
        vec![lo]
    } else {
        let step = (hi - lo) / (n_sets - 1) as f64;
        (0..n_sets)
            .map(|i| if i + 1 == n_sets { hi } else { lo + step * i as f64 })
            .collect()
    };
    FuzzyPartition::from_parameters(&mus, &vec![sigma; n_sets], domain)
}

/// How one feature is perceived: crisp or fuzzy, separately for the value and
/// for differences between nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRepresentation {
    pub feature: Feature,
    /// `Some` when values are unfolded into membership degrees.
    pub value: Option<FuzzyPartition>,
    /// `Some` when differences are unfolded into membership degrees.
    pub difference: Option<FuzzyPartition>,
}

impl FeatureRepresentation {
    pub fn crisp(feature: Feature) -> Self {
        Self { feature, value: None, difference: None }
    }

    pub fn fuzzy(feature: Feature, value: FuzzyPartition, difference: FuzzyPartition) -> Self {
        Self { feature, value: Some(value), difference: Some(difference) }
    }

    pub fn value_dim(&self) -> usize {
        self.value.as_ref().map_or(1, FuzzyPartition::len)
    }

    pub fn difference_dim(&self) -> usize {
        self.difference.as_ref().map_or(1, FuzzyPartition::len)
    }
}

/// Per-feature representation choices, in feature order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RepresentationPrinciple {
    features: Vec<FeatureRepresentation>,
}

impl RepresentationPrinciple {
    pub fn new(features: Vec<FeatureRepresentation>) -> Self {
        Self { features }
    }

    /// Principle with no features at all (pure random encounters).
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn features(&self) -> &[FeatureRepresentation] {
        &self.features
    }

    pub fn features_mut(&mut self) -> &mut [FeatureRepresentation] {
        &mut self.features
    }

    /// Length `z` of unfolded feature vectors.
    pub fn value_dim(&self) -> usize {
        self.features.iter().map(FeatureRepresentation::value_dim).sum()
    }

    /// Length `z_h` of unfolded difference vectors.
    pub fn difference_dim(&self) -> usize {
        self.features.iter().map(FeatureRepresentation::difference_dim).sum()
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.features.len() {
            return Err(Error::Config(format!(
                "principle covers {} features but {} values were given",
                self.features.len(),
                got
            )));
        }
        Ok(())
    }

    /// Unfolds a raw feature vector into its evaluation vector of length `z`.
    pub fn unfold_values(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check_len(values.len())?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("feature value {v} is not finite")));
        }
        let mut out = Vec::with_capacity(self.value_dim());
        for (rep, &v) in self.features.iter().zip(values) {
            match &rep.value {
                Some(partition) => partition.degrees_into(v, &mut out),
                None => out.push(v),
            }
        }
        Ok(out)
    }

    /// Unfolds the absolute per-feature differences of two raw feature vectors.
    pub fn unfold_difference_values(&self, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        self.check_len(a.len())?;
        self.check_len(b.len())?;
        if let Some(v) = a.iter().chain(b).find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("feature value {v} is not finite")));
        }
        let mut out = Vec::with_capacity(self.difference_dim());
        self.push_differences(a.iter().zip(b).map(|(x, y)| (x - y).abs()), &mut out);
        Ok(out)
    }

    fn push_differences(&self, deltas: impl Iterator<Item = f64>, out: &mut Vec<f64>) {
        for (rep, d) in self.features.iter().zip(deltas) {
            match &rep.difference {
                Some(partition) => partition.degrees_into(d, out),
                None => out.push(d),
            }
        }
    }

    /// Unfolded feature vector of a node as perceived under this principle.
    pub fn unfold_node(&self, node: &NodeFeatures) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.value_dim());
        self.unfold_node_into(node, &mut out);
        out
    }

    pub fn unfold_node_into(&self, node: &NodeFeatures, out: &mut Vec<f64>) {
        for rep in &self.features {
            let v = node.value(rep.feature);
            match &rep.value {
                Some(partition) => partition.degrees_into(v, out),
                None => out.push(v),
            }
        }
    }

    /// Unfolded difference vector of a node pair; symmetric in its arguments.
    pub fn unfold_node_difference(&self, a: &NodeFeatures, b: &NodeFeatures) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.difference_dim());
        self.unfold_node_difference_into(a, b, &mut out);
        out
    }

    pub fn unfold_node_difference_into(&self, a: &NodeFeatures, b: &NodeFeatures, out: &mut Vec<f64>) {
        let deltas = self.features.iter().map(|rep| (a.value(rep.feature) - b.value(rep.feature)).abs());
        self.push_differences(deltas, out);
    }

    /// Labels of the unfolded feature dimensions, e.g. `Age_f 1`, `Sex`.
    pub fn value_labels(&self) -> Vec<String> {
        self.labels(|rep| rep.value.as_ref(), "")
    }

    /// Labels of the unfolded difference dimensions, e.g. `ΔAge_f 1`, `ΔSex`.
    pub fn difference_labels(&self) -> Vec<String> {
        self.labels(|rep| rep.difference.as_ref(), "Δ")
    }

    fn labels(&self, partition: impl Fn(&FeatureRepresentation) -> Option<&FuzzyPartition>, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        for rep in &self.features {
            let name = rep.feature.label();
            match partition(rep) {
                Some(p) => out.extend((1..=p.len()).map(|i| format!("{prefix}{name}_f {i}"))),
                None => out.push(format!("{prefix}{name}")),
            }
        }
        out
    }
}

/// Unfolds a node's features under `principle`.
pub fn unfold_feature_vector(features: &[f64], principle: &RepresentationPrinciple) -> Result<Vec<f64>> {
    principle.unfold_values(features)
}

/// Unfolds the feature differences of two nodes under `principle`.
pub fn unfold_difference_vector(a: &[f64], b: &[f64], principle: &RepresentationPrinciple) -> Result<Vec<f64>> {
    principle.unfold_difference_values(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const AGE_DOMAIN: (f64, f64) = (0.0, 90.0);

    fn fuzzy_age(p_sets: usize, h_sets: usize) -> RepresentationPrinciple {
        RepresentationPrinciple::new(vec![
            FeatureRepresentation::fuzzy(
                Feature::Age,
                default_partition(p_sets, AGE_DOMAIN, 5.0).unwrap(),
                default_partition(h_sets, AGE_DOMAIN, 5.0).unwrap(),
            ),
            FeatureRepresentation::crisp(Feature::Sex),
        ])
    }

    #[test]
    fn membership_at_centre_is_one() {
        let mf = MembershipFunction::new(0.0, 5.0).unwrap();
        assert_eq!(membership_degree(0.0, &mf).unwrap(), 1.0);
    }

    #[test]
    fn membership_three_spreads_out() {
        // exp(-4.5) evaluated at 30 digits
        let mf = MembershipFunction::new(0.0, 5.0).unwrap();
        let got = membership_degree(15.0, &mf).unwrap();
        assert!((got - 0.011_108_996_538_242_306).abs() < 1e-15);
    }

    #[test]
    fn membership_rejects_bad_inputs() {
        assert!(MembershipFunction::new(0.0, 0.0).is_err());
        assert!(MembershipFunction::new(0.0, -1.0).is_err());
        assert!(MembershipFunction::new(f64::NAN, 1.0).is_err());
        let mf = MembershipFunction::new(0.0, 5.0).unwrap();
        assert!(membership_degree(f64::INFINITY, &mf).is_err());
    }

    #[test]
    fn default_partitions() {
        let seven = default_partition(7, AGE_DOMAIN, 5.0).unwrap();
        assert_eq!(seven.mus(), vec![0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0]);
        assert!(seven.sigmas().iter().all(|&s| s == 5.0));
        assert_eq!(default_partition(2, AGE_DOMAIN, 5.0).unwrap().mus(), vec![0.0, 90.0]);
        assert_eq!(default_partition(4, AGE_DOMAIN, 5.0).unwrap().mus(), vec![0.0, 30.0, 60.0, 90.0]);
        assert_eq!(default_partition(1, AGE_DOMAIN, 5.0).unwrap().mus(), vec![0.0]);
        assert!(default_partition(0, AGE_DOMAIN, 5.0).is_err());
    }

    #[test]
    fn partition_requires_increasing_centres() {
        let a = MembershipFunction::new(10.0, 1.0).unwrap();
        let b = MembershipFunction::new(10.0, 2.0).unwrap();
        assert!(FuzzyPartition::new(vec![a, b], AGE_DOMAIN).is_err());
        assert!(FuzzyPartition::new(vec![], AGE_DOMAIN).is_err());
        // centres outside the domain are allowed
        let neg = MembershipFunction::new(-0.4198, 4.65).unwrap();
        assert!(FuzzyPartition::new(vec![neg, b], AGE_DOMAIN).is_ok());
    }

    #[test]
    fn unfold_fuzzy_age_crisp_sex() {
        let principle = fuzzy_age(7, 7);
        let v = unfold_feature_vector(&[30.0, 1.0], &principle).unwrap();
        assert_eq!(v.len(), 8);
        assert_eq!(v[2], 1.0);
        assert_eq!(v[7], 1.0);
    }

    #[test]
    fn unfold_all_crisp_is_identity() {
        let principle = RepresentationPrinciple::new(vec![
            FeatureRepresentation::crisp(Feature::Age),
            FeatureRepresentation::crisp(Feature::Sex),
        ]);
        assert_eq!(unfold_feature_vector(&[42.0, 0.0], &principle).unwrap(), vec![42.0, 0.0]);
    }

    #[test]
    fn unfold_single_narrow_set() {
        let partition = FuzzyPartition::from_parameters(&[0.0], &[4.65], AGE_DOMAIN).unwrap();
        let principle = RepresentationPrinciple::new(vec![FeatureRepresentation {
            feature: Feature::Age,
            value: Some(partition),
            difference: None,
        }]);
        let v = unfold_feature_vector(&[22.0], &principle).unwrap();
        // mpmath: exp(-0.5 (22/4.65)^2)
        assert!((v[0] - 1.378_340_365_613_365_6e-5).abs() < 1e-18);
    }

    #[test]
    fn unfold_dimension_mismatch() {
        let principle = fuzzy_age(7, 7);
        assert!(matches!(unfold_feature_vector(&[30.0], &principle), Err(Error::Config(_))));
        assert!(matches!(unfold_difference_vector(&[1.0, 0.0], &[2.0], &principle), Err(Error::Config(_))));
    }

    #[test]
    fn unfold_difference_examples() {
        let principle = fuzzy_age(7, 7);
        let same = unfold_difference_vector(&[50.0, 1.0], &[50.0, 1.0], &principle).unwrap();
        assert_eq!(same[0], 1.0);
        let d = unfold_difference_vector(&[60.0, 1.0], &[30.0, 0.0], &principle).unwrap();
        assert_eq!(d[2], 1.0);
        assert_eq!(d[1], (-4.5f64).exp());
        assert_eq!(d[3], (-4.5f64).exp());
        assert_eq!(d[7], 1.0);
    }

    #[test]
    fn labels_follow_layout() {
        let principle = fuzzy_age(2, 3);
        assert_eq!(principle.value_labels(), vec!["Age_f 1", "Age_f 2", "Sex"]);
        assert_eq!(principle.difference_labels(), vec!["ΔAge_f 1", "ΔAge_f 2", "ΔAge_f 3", "ΔSex"]);
    }

    #[test]
    fn partition_serde_validates() {
        let json = r#"{"sets":[{"mu":0.0,"sigma":5.0},{"mu":45.0,"sigma":5.0}],"domain":[0.0,90.0]}"#;
        let p: FuzzyPartition = serde_json::from_str(json).unwrap();
        assert_eq!(p.mus(), vec![0.0, 45.0]);
        let unordered = r#"{"sets":[{"mu":45.0,"sigma":5.0},{"mu":0.0,"sigma":5.0}],"domain":[0.0,90.0]}"#;
        assert!(serde_json::from_str::<FuzzyPartition>(unordered).is_err());
        let bad_sigma = r#"{"sets":[{"mu":0.0,"sigma":0.0}],"domain":[0.0,90.0]}"#;
        assert!(serde_json::from_str::<FuzzyPartition>(bad_sigma).is_err());
    }

    fn arb_principle() -> impl Strategy<Value = RepresentationPrinciple> {
        let rep = (any::<bool>(), 1usize..=10, any::<bool>(), 1usize..=10, any::<bool>()).prop_map(
            |(fuzzy_v, lv, fuzzy_d, ld, age)| {
                let feature = if age { Feature::Age } else { Feature::Sex };
                FeatureRepresentation {
                    feature,
                    value: fuzzy_v.then(|| default_partition(lv, AGE_DOMAIN, 5.0).unwrap()),
                    difference: fuzzy_d.then(|| default_partition(ld, AGE_DOMAIN, 5.0).unwrap()),
                }
            },
        );
        prop::collection::vec(rep, 0..5).prop_map(RepresentationPrinciple::new)
    }

    proptest! {
        #[test]
        fn unfolded_lengths_match_dimensions(principle in arb_principle(), x in 0.0f64..90.0, y in 0.0f64..90.0) {
            let k = principle.features().len();
            let a = vec![x; k];
            let b = vec![y; k];
            let z: usize = principle.features().iter().map(|f| f.value.as_ref().map_or(1, |p| p.len())).sum();
            let zh: usize = principle.features().iter().map(|f| f.difference.as_ref().map_or(1, |p| p.len())).sum();
            prop_assert_eq!(principle.unfold_values(&a).unwrap().len(), z);
            prop_assert_eq!(principle.unfold_difference_values(&a, &b).unwrap().len(), zh);
        }

        #[test]
        fn membership_in_unit_interval(offset in -35.0f64..35.0, mu in -20.0f64..110.0, sigma in 1.0f64..9.0) {
            let d = MembershipFunction::new(mu, sigma).unwrap().degree(mu + offset);
            prop_assert!(d > 0.0 && d <= 1.0);
        }

        #[test]
        fn membership_symmetric_and_decaying(mu in -20.0f64..110.0, sigma in 1.0f64..9.0, d in 0.0f64..20.0, extra in 0.01f64..5.0) {
            let mf = MembershipFunction::new(mu, sigma).unwrap();
            let (up, down) = (mf.degree(mu + d), mf.degree(mu - d));
            prop_assert!((up - down).abs() <= 1e-12 * up.max(down));
            prop_assert!(mf.degree(mu + d + extra) < mf.degree(mu + d));
        }

        #[test]
        fn difference_unfolding_symmetric(principle in arb_principle(), x in 0.0f64..90.0, y in 0.0f64..90.0) {
            let k = principle.features().len();
            let a = vec![x; k];
            let b = vec![y; k];
            prop_assert_eq!(
                principle.unfold_difference_values(&a, &b).unwrap(),
                principle.unfold_difference_values(&b, &a).unwrap()
            );
        }
    }
}
