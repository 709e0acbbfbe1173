//! Batch configuration: one TOML file with a `[defaults]` table and one
//! `[[country]]` block per country. Country keys override defaults, and
//! `--set key=value` flags override both.

use std::path::{Path, PathBuf};

use dtcns::calibration::{ModelFamily, SetCounts};
use dtcns::epidemic::{DEFAULT_MAX_STEPS, DEFAULT_TRANSMISSIBILITY};
use dtcns::formation::{DEFAULT_ENCOUNTER_RATE, DEFAULT_NOISE_SIGMA};
use dtcns::sensitivity::{VarsConfig, DEFAULT_SELECTED};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

/// Keys accepted in `[defaults]`, in country blocks and by `--set`.
pub const SETTING_KEYS: &[&str] = &[
    "n",
    "encounter_rate",
    "noise_sigma",
    "edge_budget",
    "population_seed",
    "formation_seed",
    "epidemic_seed",
    "optimizer_seed",
    "sensitivity_seed",
    "family",
    "families",
    "sets",
    "value_counts",
    "difference_counts",
    "budget",
    "grid_budget",
    "top",
    "stars",
    "delta_h",
    "hill_q",
    "gamma",
    "max_steps",
    "par_steps",
    "par_hops",
];

const COUNTRY_KEYS: &[&str] = &["name", "pyramid", "matrix"];

#[derive(Debug, Clone, Default, Deserialize)]
struct Settings {
    n: Option<usize>,
    encounter_rate: Option<f64>,
    noise_sigma: Option<f64>,
    edge_budget: Option<usize>,
    population_seed: Option<u64>,
    formation_seed: Option<u64>,
    epidemic_seed: Option<u64>,
    optimizer_seed: Option<u64>,
    sensitivity_seed: Option<u64>,
    family: Option<ModelFamily>,
    families: Option<Vec<ModelFamily>>,
    sets: Option<SetChoice>,
    value_counts: Option<Vec<usize>>,
    difference_counts: Option<Vec<usize>>,
    budget: Option<usize>,
    grid_budget: Option<usize>,
    top: Option<usize>,
    stars: Option<usize>,
    delta_h: Option<f64>,
    hill_q: Option<Vec<f64>>,
    gamma: Option<f64>,
    max_steps: Option<usize>,
    par_steps: Option<usize>,
    par_hops: Option<usize>,
}

/// Fuzzy-set counts: searched over a grid, or fixed as `[value, difference]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SetChoice {
    Fixed([usize; 2]),
    Named(GridKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKeyword {
    Grid,
}

impl SetChoice {
    pub fn fixed(self) -> Option<SetCounts> {
        match self {
            SetChoice::Fixed([value, difference]) => Some(SetCounts { value, difference }),
            SetChoice::Named(GridKeyword::Grid) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Seeds {
    pub population: u64,
    pub formation: u64,
    pub epidemic: u64,
    pub optimizer: u64,
    pub sensitivity: u64,
}

/// Fully resolved settings for one country.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub country: String,
    pub pyramid: PathBuf,
    pub matrix: PathBuf,
    pub n: usize,
    pub encounter_rate: f64,
    pub noise_sigma: f64,
    /// Derived from the target matrix when absent.
    pub edge_budget: Option<usize>,
    pub seeds: Seeds,
    pub family: ModelFamily,
    pub families: Vec<ModelFamily>,
    pub sets: SetChoice,
    pub value_counts: Vec<usize>,
    pub difference_counts: Vec<usize>,
    pub budget: usize,
    pub grid_budget: usize,
    pub top: usize,
    pub vars: VarsConfig,
    pub hill_q: Vec<f64>,
    pub gamma: f64,
    pub max_steps: usize,
    pub par_steps: usize,
    pub par_hops: usize,
    pub output: PathBuf,
}

impl RunConfig {
    /// Set counts used when no grid search result is available.
    pub fn working_sets(&self) -> SetCounts {
        self.sets.fixed().unwrap_or_default()
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(format!("{}: {msg}", self.country)));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.encounter_rate) {
            return bad(format!("encounter_rate {} outside [0, 1]", self.encounter_rate));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma {} must be >= 0", self.noise_sigma));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if self.budget == 0 || self.grid_budget == 0 {
            return bad("optimisation budgets must be at least 1".into());
        }
        if self.families.is_empty() {
            return bad("families is empty".into());
        }
        let counts_ok = |c: &[usize]| !c.is_empty() && c.iter().all(|&k| k >= 1);
        if !counts_ok(&self.value_counts) || !counts_ok(&self.difference_counts) {
            return bad("set-count ranges must be non-empty and >= 1".into());
        }
        if let SetChoice::Fixed([p, h]) = self.sets {
            if p == 0 || h == 0 {
                return bad("fixed set counts must be >= 1".into());
            }
        }
        if self.hill_q.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            return bad("hill_q orders must be finite and >= 0".into());
        }
        if self.par_hops > self.par_steps {
            return bad(format!("par_hops {} exceeds par_steps {}", self.par_hops, self.par_steps));
        }
        if let Err(e) = self.vars.validate() {
            return bad(e.to_string());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// `key=value` pairs; values are TOML literals or bare strings.
    pub set: Vec<String>,
    pub countries: Vec<String>,
    pub output: Option<PathBuf>,
}

/// Reads, merges and validates the configuration. File paths are resolved
/// against the config file's directory.
pub fn load(path: &Path, overrides: &Overrides) -> Result<Vec<RunConfig>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse(&text, base, overrides)
}

pub fn parse(text: &str, base: &Path, overrides: &Overrides) -> Result<Vec<RunConfig>, CliError> {
    let mut root: Table = toml::from_str(text).map_err(|e: toml::de::Error| CliError::Parse(format!("config: {e}")))?;

    for key in root.keys() {
        if !["output", "defaults", "country"].contains(&key.as_str()) {
            return Err(CliError::Config(format!("unknown top-level key {key:?}")));
        }
    }
    let defaults = match root.remove("defaults") {
        Some(Value::Table(t)) => t,
        Some(_) => return Err(CliError::Config("[defaults] must be a table".into())),
        None => Table::new(),
    };
    check_keys(&defaults, SETTING_KEYS, "[defaults]")?;
    let mut forced = Table::new();
    for kv in &overrides.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects key=value, got {kv:?}")))?;
        let k = k.trim();
        if !SETTING_KEYS.contains(&k) {
            return Err(CliError::Config(format!("--set: unknown key {k:?}")));
        }
        forced.insert(k.to_string(), literal(v.trim()));
    }

    let output = match (&overrides.output, root.get("output")) {
        (Some(o), _) => o.clone(),
        (None, Some(Value::String(s))) => base.join(s),
        (None, Some(_)) => return Err(CliError::Config("output must be a string".into())),
        (None, None) => PathBuf::from("output"),
    };

    let blocks = match root.remove("country") {
        Some(Value::Array(a)) => a,
        _ => return Err(CliError::Config("no [[country]] blocks".into())),
    };
    let mut runs = Vec::new();
    for block in blocks {
        let Value::Table(mut table) = block else {
            return Err(CliError::Config("country entries must be tables".into()));
        };
        let name = match table.remove("name") {
            Some(Value::String(s)) if !s.trim().is_empty() => s,
            _ => return Err(CliError::Config("country block without a name".into())),
        };
        let keys: Vec<&str> = SETTING_KEYS.iter().chain(COUNTRY_KEYS).copied().collect();
        check_keys(&table, &keys, &name)?;
        let file = |key: &str, table: &mut Table| match table.remove(key) {
            Some(Value::String(s)) => Ok(base.join(s)),
            _ => Err(CliError::Config(format!("{name}: missing {key} path"))),
        };
        let pyramid = file("pyramid", &mut table)?;
        let matrix = file("matrix", &mut table)?;

        let mut merged = defaults.clone();
        merged.extend(table);
        merged.extend(forced.clone());
        let settings: Settings =
            Value::Table(merged).try_into().map_err(|e: toml::de::Error| CliError::Config(format!("{name}: {e}")))?;
        runs.push(resolve(name, pyramid, matrix, settings, &output));
    }

    if !overrides.countries.is_empty() {
        for c in &overrides.countries {
            if !runs.iter().any(|r| r.country.eq_ignore_ascii_case(c)) {
                return Err(CliError::Config(format!("--country {c:?} is not in the config")));
            }
        }
        runs.retain(|r| overrides.countries.iter().any(|c| r.country.eq_ignore_ascii_case(c)));
    }
    let mut seen = std::collections::HashSet::new();
    for r in &runs {
        if !seen.insert(r.country.to_lowercase()) {
            return Err(CliError::Config(format!("country {:?} listed twice", r.country)));
        }
        r.validate()?;
    }
    Ok(runs)
}

fn check_keys(table: &Table, allowed: &[&str], context: &str) -> Result<(), CliError> {
    match table.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(CliError::Config(format!("{context}: unknown key {k:?}"))),
        None => Ok(()),
    }
}

/// Parses a TOML literal, falling back to a plain string.
fn literal(v: &str) -> Value {
    toml::from_str::<Table>(&format!("x = {v}"))
        .ok()
        .and_then(|mut t| t.remove("x"))
        .unwrap_or_else(|| Value::String(v.to_string()))
}

fn resolve(country: String, pyramid: PathBuf, matrix: PathBuf, s: Settings, output: &Path) -> RunConfig {
    let vars_default = VarsConfig::default();
    let dir = output.join(dir_name(&country));
    RunConfig {
        pyramid,
        matrix,
        n: s.n.unwrap_or(90),
        encounter_rate: s.encounter_rate.unwrap_or(DEFAULT_ENCOUNTER_RATE),
        noise_sigma: s.noise_sigma.unwrap_or(DEFAULT_NOISE_SIGMA),
        edge_budget: s.edge_budget,
        seeds: Seeds {
            population: s.population_seed.unwrap_or(1),
            formation: s.formation_seed.unwrap_or(2),
            epidemic: s.epidemic_seed.unwrap_or(3),
            optimizer: s.optimizer_seed.unwrap_or(4),
            sensitivity: s.sensitivity_seed.unwrap_or(5),
        },
        family: s.family.unwrap_or(ModelFamily::AgeFuzzySexCrisp),
        families: s.families.unwrap_or_else(|| ModelFamily::ALL.to_vec()),
        sets: s.sets.unwrap_or(SetChoice::Named(GridKeyword::Grid)),
        value_counts: s.value_counts.unwrap_or_else(|| (1..=10).collect()),
        difference_counts: s.difference_counts.unwrap_or_else(|| (1..=10).collect()),
        budget: s.budget.unwrap_or(100),
        grid_budget: s.grid_budget.unwrap_or(25),
        top: s.top.unwrap_or(DEFAULT_SELECTED),
        vars: VarsConfig {
            stars: s.stars.unwrap_or(vars_default.stars),
            delta_h: s.delta_h.unwrap_or(vars_default.delta_h),
            seed: s.sensitivity_seed.unwrap_or(5),
        },
        hill_q: s.hill_q.unwrap_or_else(|| vec![0.0, 1.0, 2.0]),
        gamma: s.gamma.unwrap_or(DEFAULT_TRANSMISSIBILITY),
        max_steps: s.max_steps.unwrap_or(DEFAULT_MAX_STEPS),
        par_steps: s.par_steps.unwrap_or(1),
        par_hops: s.par_hops.unwrap_or(1),
        output: dir,
        country,
    }
}

/// Lower-case, filesystem-safe directory name for a country label.
pub fn dir_name(country: &str) -> String {
    country
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}
