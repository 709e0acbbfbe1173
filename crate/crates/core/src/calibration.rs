//! Model families, their parameter spaces and the calibration workflow:
//! family comparison, a grid over fuzzy-set counts, sensitivity screening of
//! membership-function parameters and refinement of the most influential ones.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{self, BoConfig};
use crate::contact::{eu_distance, matrix_from_network, ContactMatrix};
use crate::error::{Error, Result};
use crate::formation::{form_network_with_draws, Formation, FormationConfig, FormationDraws, NodeRules, RuleSet};
use crate::fuzzy::{default_partition, FeatureRepresentation, FuzzyPartition, RepresentationPrinciple};
use crate::population::{Feature, Population, MAX_AGE};
use crate::scoring::{PreferenceProfile, Trinity};
use crate::sensitivity::{self, SensitivityReport, VarsConfig};

pub const AGE_DOMAIN: (f64, f64) = (0.0, MAX_AGE as f64);
pub const DEFAULT_SIGMA: f64 = 5.0;
pub const DEFAULT_SET_COUNT: usize = 7;
pub const SIGMA_BOUNDS: (f64, f64) = (1.0, 9.0);
pub const WEIGHT_BOUNDS: (f64, f64) = (1e-3, 1.0);
pub const INITIAL_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelFamily {
    Random,
    AgeCrisp,
    AgeFuzzy,
    AgeCrispSexCrisp,
    AgeFuzzySexCrisp,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 5] = [
        ModelFamily::Random,
        ModelFamily::AgeCrisp,
        ModelFamily::AgeFuzzy,
        ModelFamily::AgeCrispSexCrisp,
        ModelFamily::AgeFuzzySexCrisp,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ModelFamily::Random => "RN",
            ModelFamily::AgeCrisp => "HN-A_c",
            ModelFamily::AgeFuzzy => "HN-A_f",
            ModelFamily::AgeCrispSexCrisp => "HN-A_c-S_c",
            ModelFamily::AgeFuzzySexCrisp => "HN-A_f-S_c",
        }
    }

    pub fn has_age(self) -> bool {
        self != ModelFamily::Random
    }

    pub fn fuzzy_age(self) -> bool {
        matches!(self, ModelFamily::AgeFuzzy | ModelFamily::AgeFuzzySexCrisp)
    }

    pub fn has_sex(self) -> bool {
        matches!(self, ModelFamily::AgeCrispSexCrisp | ModelFamily::AgeFuzzySexCrisp)
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelFamily::ALL
            .into_iter()
            .find(|f| f.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown model family {s:?}")))
    }
}

impl TryFrom<String> for ModelFamily {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelFamily> for String {
    fn from(f: ModelFamily) -> String {
        f.tag().to_string()
    }
}

/// Fuzzy-set counts for age values and age differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetCounts {
    pub value: usize,
    pub difference: usize,
}

impl Default for SetCounts {
    fn default() -> Self {
        Self { value: DEFAULT_SET_COUNT, difference: DEFAULT_SET_COUNT }
    }
}

/// What a parameter controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum ParameterKind {
    ValueSign(usize),
    ValueWeight(usize),
    DifferenceSign(usize),
    DifferenceWeight(usize),
    ValueMu(usize),
    ValueSigma(usize),
    DifferenceMu(usize),
    DifferenceSigma(usize),
}

impl ParameterKind {
    pub fn is_preference(self) -> bool {
        matches!(
            self,
            ParameterKind::ValueSign(_)
                | ParameterKind::ValueWeight(_)
                | ParameterKind::DifferenceSign(_)
                | ParameterKind::DifferenceWeight(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parameter {
    pub name: String,
    pub kind: ParameterKind,
    pub lower: f64,
    pub upper: f64,
    pub init: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterSpace {
    params: Vec<Parameter>,
}

impl ParameterSpace {
    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    pub fn init(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.init).collect()
    }

    pub fn indices(&self, pred: impl Fn(ParameterKind) -> bool) -> Vec<usize> {
        (0..self.params.len()).filter(|&i| pred(self.params[i].kind)).collect()
    }

    pub fn preference_indices(&self) -> Vec<usize> {
        self.indices(ParameterKind::is_preference)
    }

    pub fn partition_indices(&self) -> Vec<usize> {
        self.indices(|k| !k.is_preference())
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.params.len() {
            return Err(Error::OutOfBounds(format!("{} values for {} parameters", x.len(), self.params.len())));
        }
        for (p, &v) in self.params.iter().zip(x) {
            if !(p.lower <= v && v <= p.upper) {
                return Err(Error::OutOfBounds(format!("{} = {v} outside [{}, {}]", p.name, p.lower, p.upper)));
            }
        }
        Ok(())
    }
}

/// Centre bounds for a default partition: each centre may move by half the
/// default spacing, so neighbouring ranges meet but do not overlap.
pub fn mu_bounds(partition: &FuzzyPartition) -> Vec<(f64, f64)> {
    let half = partition.default_spacing() / 2.0;
    partition.mus().into_iter().map(|m| (m - half, m + half)).collect()
}

/// A model family with its fuzzy-set counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    family: ModelFamily,
    sets: SetCounts,
    base: RepresentationPrinciple,
    space: ParameterSpace,
}

impl Model {
    pub fn new(family: ModelFamily, sets: SetCounts) -> Result<Self> {
        let mut features = Vec::new();
        if family.has_age() {
            features.push(if family.fuzzy_age() {
                FeatureRepresentation::fuzzy(
                    Feature::Age,
                    default_partition(sets.value, AGE_DOMAIN, DEFAULT_SIGMA)?,
                    default_partition(sets.difference, AGE_DOMAIN, DEFAULT_SIGMA)?,
                )
            } else {
                FeatureRepresentation::crisp(Feature::Age)
            });
        }
        if family.has_sex() {
            features.push(FeatureRepresentation::crisp(Feature::Sex));
        }
        let base = RepresentationPrinciple::new(features);

        let mut params = Vec::new();
        let pref = |params: &mut Vec<Parameter>, label: &str, sign: ParameterKind, weight: ParameterKind, role: &str| {
            params.push(Parameter { name: format!("{role}_sign[{label}]"), kind: sign, lower: -1.0, upper: 1.0, init: 0.0 });
            params.push(Parameter {
                name: format!("{role}_weight[{label}]"),
                kind: weight,
                lower: WEIGHT_BOUNDS.0,
                upper: WEIGHT_BOUNDS.1,
                init: INITIAL_WEIGHT,
            });
        };
        for (i, label) in base.value_labels().iter().enumerate() {
            pref(&mut params, label, ParameterKind::ValueSign(i), ParameterKind::ValueWeight(i), "value");
        }
        for (i, label) in base.difference_labels().iter().enumerate() {
            pref(&mut params, label, ParameterKind::DifferenceSign(i), ParameterKind::DifferenceWeight(i), "difference");
        }
        if let Some(age) = base.features().iter().find(|r| r.feature == Feature::Age) {
            let blocks = [
                (age.value.as_ref(), "value", ParameterKind::ValueMu as fn(usize) -> ParameterKind, ParameterKind::ValueSigma as fn(usize) -> ParameterKind),
                (age.difference.as_ref(), "difference", ParameterKind::DifferenceMu, ParameterKind::DifferenceSigma),
            ];
            for (partition, role, mu_kind, sigma_kind) in blocks {
                let Some(partition) = partition else { continue };
                for (i, ((lo, hi), set)) in mu_bounds(partition).into_iter().zip(partition.sets()).enumerate() {
                    params.push(Parameter { name: format!("{role}_mu[{}]", i + 1), kind: mu_kind(i), lower: lo, upper: hi, init: set.mu() });
                    params.push(Parameter {
                        name: format!("{role}_sigma[{}]", i + 1),
                        kind: sigma_kind(i),
                        lower: SIGMA_BOUNDS.0,
                        upper: SIGMA_BOUNDS.1,
                        init: set.sigma(),
                    });
                }
            }
        }
        Ok(Self { family, sets, base, space: ParameterSpace { params } })
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn sets(&self) -> SetCounts {
        self.sets
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    /// Node rules encoded by a full parameter vector.
    pub fn rules(&self, x: &[f64]) -> Result<NodeRules> {
        self.space.check(x)?;
        let mut principle = self.base.clone();
        let (mut p, mut w_p, mut h, mut w_h) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut value_mu = Vec::new();
        let mut value_sigma = Vec::new();
        let mut diff_mu = Vec::new();
        let mut diff_sigma = Vec::new();
        for (param, &v) in self.space.params.iter().zip(x) {
            match param.kind {
                ParameterKind::ValueSign(_) => p.push(Trinity::from_relaxed(v)),
                ParameterKind::ValueWeight(_) => w_p.push(v),
                ParameterKind::DifferenceSign(_) => h.push(Trinity::from_relaxed(v)),
                ParameterKind::DifferenceWeight(_) => w_h.push(v),
                ParameterKind::ValueMu(_) => value_mu.push(v),
                ParameterKind::ValueSigma(_) => value_sigma.push(v),
                ParameterKind::DifferenceMu(_) => diff_mu.push(v),
                ParameterKind::DifferenceSigma(_) => diff_sigma.push(v),
            }
        }
        if let Some(age) = principle.features_mut().iter_mut().find(|r| r.feature == Feature::Age) {
            if age.value.is_some() {
                age.value = Some(FuzzyPartition::from_parameters(&value_mu, &value_sigma, AGE_DOMAIN)?);
            }
            if age.difference.is_some() {
                age.difference = Some(FuzzyPartition::from_parameters(&diff_mu, &diff_sigma, AGE_DOMAIN)?);
            }
        }
        NodeRules::new(principle, PreferenceProfile::new(p, w_p, h, w_h)?)
    }
}

/// A target matrix, a population and a fixed formation seed: everything
/// needed to score parameter vectors deterministically.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pop: &'a Population,
    target: &'a ContactMatrix,
    formation: FormationConfig,
    draws: FormationDraws,
}

impl<'a> Problem<'a> {
    pub fn new(pop: &'a Population, target: &'a ContactMatrix, formation: FormationConfig) -> Result<Self> {
        formation.validate(pop.len())?;
        target.bins().counts(pop)?;
        let draws = FormationDraws::generate(pop.len(), formation.seed);
        Ok(Self { pop, target, formation, draws })
    }

    pub fn population(&self) -> &Population {
        self.pop
    }

    pub fn target(&self) -> &ContactMatrix {
        self.target
    }

    pub fn formation(&self) -> &FormationConfig {
        &self.formation
    }

    pub fn simulate(&self, model: &Model, x: &[f64]) -> Result<(Formation, ContactMatrix)> {
        let rules = RuleSet::Uniform(model.rules(x)?);
        let formation = form_network_with_draws(self.pop, &rules, &self.formation, &self.draws)?;
        let matrix = matrix_from_network(&formation.network, self.pop, self.target.bins())?;
        Ok((formation, matrix))
    }

    /// EU distance between the simulated and the target matrix.
    pub fn evaluate(&self, model: &Model, x: &[f64]) -> Result<f64> {
        let (_, matrix) = self.simulate(model, x)?;
        eu_distance(&matrix, self.target)
    }
}

/// Scores one parameter vector against a target.
pub fn evaluate_candidate(
    model: &Model,
    params: &[f64],
    target: &ContactMatrix,
    pop: &Population,
    formation: &FormationConfig,
) -> Result<f64> {
    Problem::new(pop, target, *formation)?.evaluate(model, params)
}

/// Recreated matrix of a model run, for building synthetic targets.
pub fn synthetic_target(model: &Model, params: &[f64], pop: &Population, formation: &FormationConfig) -> Result<ContactMatrix> {
    let rules = RuleSet::Uniform(model.rules(params)?);
    let draws = FormationDraws::generate(pop.len(), formation.seed);
    let net = form_network_with_draws(pop, &rules, formation, &draws)?.network;
    matrix_from_network(&net, pop, &crate::contact::AgeBins::decades())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub family: ModelFamily,
    pub sets: SetCounts,
    pub param_names: Vec<String>,
    pub best_params: Vec<f64>,
    pub best_eu: f64,
    pub eval_count: usize,
    /// Full parameter vectors and their EU distances, in evaluation order.
    pub trace: Vec<(Vec<f64>, f64)>,
    pub runtime_seconds: f64,
}

impl CalibrationResult {
    pub fn initial_eu(&self) -> f64 {
        self.trace[0].1
    }
}

/// Optimises the `free` coordinates of `base`, holding the rest fixed. The
/// first evaluation is `base` itself.
pub fn calibrate(problem: &Problem<'_>, model: &Model, base: &[f64], free: &[usize], bo: &BoConfig) -> Result<CalibrationResult> {
    model.space().check(base)?;
    let start = Instant::now();
    let params = model.space().params();
    let full = |sub: &[f64]| {
        let mut x = base.to_vec();
        for (&i, &v) in free.iter().zip(sub) {
            x[i] = v;
        }
        x
    };
    let trace: Vec<(Vec<f64>, f64)> = if free.is_empty() {
        vec![(base.to_vec(), problem.evaluate(model, base)?)]
    } else {
        let lower: Vec<f64> = free.iter().map(|&i| params[i].lower).collect();
        let upper: Vec<f64> = free.iter().map(|&i| params[i].upper).collect();
        let init: Vec<f64> = free.iter().map(|&i| base[i]).collect();
        let result = bayes::minimize(&lower, &upper, &init, bo, |sub| problem.evaluate(model, &full(sub)))?;
        result.evaluations.into_iter().map(|(sub, y)| (full(&sub), y)).collect()
    };
    let (best_params, best_eu) =
        trace.iter().min_by(|a, b| a.1.total_cmp(&b.1)).map(|(x, y)| (x.clone(), *y)).expect("non-empty trace");
    Ok(CalibrationResult {
        family: model.family(),
        sets: model.sets(),
        param_names: model.space().names(),
        best_params,
        best_eu,
        eval_count: trace.len(),
        trace,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Optimises preference signs and weights from the neutral initialisation
/// with partitions at their defaults.
pub fn calibrate_preferences(problem: &Problem<'_>, model: &Model, bo: &BoConfig) -> Result<CalibrationResult> {
    calibrate(problem, model, &model.space().init(), &model.space().preference_indices(), bo)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub value_counts: Vec<usize>,
    pub difference_counts: Vec<usize>,
    /// `eu[i][j]` for `value_counts[i]` and `difference_counts[j]`.
    pub eu: Vec<Vec<f64>>,
    pub best: SetCounts,
    pub best_eu: f64,
    pub best_result: CalibrationResult,
}

impl GridResult {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "value_sets,difference_sets,eu")?;
        for (i, &p) in self.value_counts.iter().enumerate() {
            for (j, &h) in self.difference_counts.iter().enumerate() {
                writeln!(w, "{p},{h},{}", self.eu[i][j])?;
            }
        }
        Ok(())
    }
}

/// Calibrates preferences of the fuzzy age and crisp sex family for every
/// pair of set counts. Cell `k` uses optimiser seed `inner.seed + k`.
pub fn grid_search_fuzzy_sets(
    problem: &Problem<'_>,
    value_counts: &[usize],
    difference_counts: &[usize],
    inner: &BoConfig,
) -> Result<GridResult> {
    if value_counts.is_empty() || difference_counts.is_empty() {
        return Err(Error::Config("empty fuzzy-set grid".into()));
    }
    let cells: Vec<(usize, usize)> =
        value_counts.iter().flat_map(|&p| difference_counts.iter().map(move |&h| (p, h))).collect();
    let results: Vec<CalibrationResult> = cells
        .par_iter()
        .enumerate()
        .map(|(k, &(p, h))| {
            let model = Model::new(ModelFamily::AgeFuzzySexCrisp, SetCounts { value: p, difference: h })?;
            calibrate_preferences(problem, &model, &BoConfig { seed: inner.seed.wrapping_add(k as u64), ..*inner })
        })
        .collect::<Result<_>>()?;
    let eu: Vec<Vec<f64>> = results.chunks(difference_counts.len()).map(|row| row.iter().map(|r| r.best_eu).collect()).collect();
    let best_k = (0..results.len()).min_by(|&a, &b| results[a].best_eu.total_cmp(&results[b].best_eu)).unwrap();
    let (p, h) = cells[best_k];
    Ok(GridResult {
        value_counts: value_counts.to_vec(),
        difference_counts: difference_counts.to_vec(),
        eu,
        best: SetCounts { value: p, difference: h },
        best_eu: results[best_k].best_eu,
        best_result: results[best_k].clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyComparison {
    pub family: ModelFamily,
    pub best_eu: f64,
    pub eval_count: usize,
    pub runtime_seconds: f64,
    pub result: CalibrationResult,
}

/// Calibrates each family's preferences under the same budget. The random
/// family has no parameters and is evaluated once.
pub fn compare_model_families(
    problem: &Problem<'_>,
    families: &[ModelFamily],
    sets: SetCounts,
    bo: &BoConfig,
) -> Result<Vec<FamilyComparison>> {
    families
        .iter()
        .map(|&family| {
            let model = Model::new(family, sets)?;
            let result = calibrate_preferences(problem, &model, bo)?;
            Ok(FamilyComparison {
                family,
                best_eu: result.best_eu,
                eval_count: result.eval_count,
                runtime_seconds: result.runtime_seconds,
                result,
            })
        })
        .collect()
}

/// Variogram analysis of the membership-function parameters around `base`.
/// Returns the report and the parameter indices it refers to.
pub fn partition_sensitivity(
    problem: &Problem<'_>,
    model: &Model,
    base: &[f64],
    vars: &VarsConfig,
    top: usize,
) -> Result<(SensitivityReport, Vec<usize>)> {
    model.space().check(base)?;
    let idx = model.space().partition_indices();
    if idx.is_empty() {
        return Err(Error::Config(format!("{} has no membership-function parameters", model.family())));
    }
    let params = model.space().params();
    let names: Vec<String> = idx.iter().map(|&i| params[i].name.clone()).collect();
    let objective = |u: &[f64]| {
        let mut x = base.to_vec();
        for (&i, &t) in idx.iter().zip(u) {
            // keep adjacent centre ranges from touching
            let t = t.min(1.0 - 1e-9);
            x[i] = params[i].lower + t * (params[i].upper - params[i].lower);
        }
        problem.evaluate(model, &x)
    };
    let report = sensitivity::analyse(&names, objective, vars, top)?;
    Ok((report, idx))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub families: Vec<ModelFamily>,
    pub family_budget: usize,
    pub value_counts: Vec<usize>,
    pub difference_counts: Vec<usize>,
    pub grid_budget: usize,
    pub refine_budget: usize,
    pub vars: VarsConfig,
    pub top: usize,
    pub selected_budget: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            families: ModelFamily::ALL.to_vec(),
            family_budget: 100,
            value_counts: (1..=10).collect(),
            difference_counts: (1..=10).collect(),
            grid_budget: 25,
            refine_budget: 100,
            vars: VarsConfig::default(),
            top: sensitivity::DEFAULT_SELECTED,
            selected_budget: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub families: Vec<FamilyComparison>,
    pub grid: GridResult,
    pub refined: CalibrationResult,
    pub sensitivity: SensitivityReport,
    pub selected: Vec<String>,
    pub optimised: CalibrationResult,
}

impl PipelineReport {
    /// Best model found by the whole workflow.
    pub fn final_result(&self) -> &CalibrationResult {
        if self.optimised.best_eu <= self.refined.best_eu {
            &self.optimised
        } else {
            &self.refined
        }
    }
}

/// Family comparison, set-count grid, full-budget preference refinement at
/// the best cell, sensitivity screening and optimisation of the most
/// influential membership-function parameters.
pub fn run_pipeline(problem: &Problem<'_>, cfg: &PipelineConfig) -> Result<PipelineReport> {
    let bo = |budget: usize, offset: u64| BoConfig { budget, seed: cfg.seed.wrapping_add(offset), ..BoConfig::default() };
    let families = compare_model_families(problem, &cfg.families, SetCounts::default(), &bo(cfg.family_budget, 0))?;
    let grid = grid_search_fuzzy_sets(problem, &cfg.value_counts, &cfg.difference_counts, &bo(cfg.grid_budget, 1_000))?;

    let model = Model::new(ModelFamily::AgeFuzzySexCrisp, grid.best)?;
    let refined = calibrate_preferences(problem, &model, &bo(cfg.refine_budget, 2_000))?;
    let base = if refined.best_eu <= grid.best_eu { &refined.best_params } else { &grid.best_result.best_params };
    let vars = VarsConfig { seed: cfg.vars.seed.wrapping_add(cfg.seed), ..cfg.vars };
    let (sensitivity, idx) = partition_sensitivity(problem, &model, base, &vars, cfg.top)?;
    let selected: Vec<usize> = sensitivity.selected_indices().into_iter().map(|k| idx[k]).collect();
    let optimised = calibrate(problem, &model, base, &selected, &bo(cfg.selected_budget, 3_000))?;
    Ok(PipelineReport {
        selected: selected.iter().map(|&i| model.space().params()[i].name.clone()).collect(),
        families,
        grid,
        refined,
        sensitivity,
        optimised,
    })
}
