//! Node features sampled from age & sex pyramids, and Hill-number diversity.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound (exclusive) of simulated ages.
pub const MAX_AGE: u8 = 90;
/// Number of ten-year age classes over `[0, 90)`.
pub const AGE_DECADES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Female = 0,
    Male = 1,
}

impl Sex {
    pub fn as_f64(self) -> f64 {
        self as u8 as f64
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sex::Female => "female",
            Sex::Male => "male",
        })
    }
}

impl FromStr for Sex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "female" | "f" | "0" => Ok(Sex::Female),
            "male" | "m" | "1" => Ok(Sex::Male),
            other => Err(Error::InvalidInput(format!("unknown sex '{other}'"))),
        }
    }
}

/// Node attributes known to the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Age,
    Sex,
}

impl Feature {
    pub fn label(self) -> &'static str {
        match self {
            Feature::Age => "Age",
            Feature::Sex => "Sex",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeFeatures {
    pub id: usize,
    pub age: u8,
    pub sex: Sex,
}

impl NodeFeatures {
    pub fn new(id: usize, age: u8, sex: Sex) -> Self {
        Self { id, age, sex }
    }

    pub fn value(&self, feature: Feature) -> f64 {
        match feature {
            Feature::Age => self.age as f64,
            Feature::Sex => self.sex.as_f64(),
        }
    }

    /// Ten-year age class, clamped to the last class.
    pub fn decade(&self) -> usize {
        (self.age as usize / 10).min(AGE_DECADES - 1)
    }

    /// Index of the node's (age decade × sex) group, `decade * 2 + sex`.
    pub fn group(&self) -> usize {
        self.decade() * 2 + self.sex.index()
    }
}

/// One row of an age & sex pyramid: share of the population with
/// `age_lo <= age < age_hi` and the given sex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidBin {
    pub age_lo: u8,
    pub age_hi: u8,
    pub sex: Sex,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgeSexPyramid {
    country: String,
    bins: Vec<PyramidBin>,
}

impl AgeSexPyramid {
    pub fn new(country: impl Into<String>, bins: Vec<PyramidBin>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::Config("age & sex pyramid has no bins".into()));
        }
        for b in &bins {
            if !(b.share.is_finite() && b.share >= 0.0) {
                return Err(Error::Config(format!("negative or non-finite share {}", b.share)));
            }
            if b.age_lo >= b.age_hi || b.age_hi > MAX_AGE {
                return Err(Error::Config(format!("bad age bin [{}, {})", b.age_lo, b.age_hi)));
            }
        }
        let total: f64 = bins.iter().map(|b| b.share).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("pyramid shares sum to {total}, expected 1")));
        }
        for sex in [Sex::Female, Sex::Male] {
            let mut ranges: Vec<(u8, u8)> =
                bins.iter().filter(|b| b.sex == sex).map(|b| (b.age_lo, b.age_hi)).collect();
            ranges.sort_unstable();
            let mut next = 0;
            for (lo, hi) in ranges {
                if lo != next {
                    return Err(Error::Config(format!("{sex} bins do not tile [0, {MAX_AGE}) at age {next}")));
                }
                next = hi;
            }
            if next != MAX_AGE {
                return Err(Error::Config(format!("{sex} bins do not tile [0, {MAX_AGE}) at age {next}")));
            }
        }
        Ok(Self { country: country.into(), bins })
    }

    /// Reads `country,age_lo,age_hi,sex,share` rows with a header line.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            country: String,
            age_lo: u8,
            age_hi: u8,
            sex: String,
            share: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut country = None;
        let mut bins = Vec::new();
        for (i, rec) in rdr.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let row = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
            let sex = row.sex.parse().map_err(|e: Error| Error::Parse { line, message: e.to_string() })?;
            match &country {
                None => country = Some(row.country),
                Some(c) if *c != row.country => {
                    return Err(Error::Parse {
                        line,
                        message: format!("mixed countries '{c}' and '{}'", row.country),
                    })
                }
                Some(_) => {}
            }
            bins.push(PyramidBin { age_lo: row.age_lo, age_hi: row.age_hi, sex, share: row.share });
        }
        Self::new(country.unwrap_or_default(), bins)
    }

    pub fn country(&self) -> &str {
        &self.country
    }

    pub fn bins(&self) -> &[PyramidBin] {
        &self.bins
    }

    /// Shares per (decade × sex) group; bins spanning several decades are
    /// split in proportion to the years they cover.
    pub fn group_shares(&self) -> [f64; 2 * AGE_DECADES] {
        let mut shares = [0.0; 2 * AGE_DECADES];
        for b in &self.bins {
            let width = (b.age_hi - b.age_lo) as f64;
            for d in 0..AGE_DECADES {
                let lo = (d * 10) as u8;
                let overlap = b.age_hi.min(lo + 10).saturating_sub(b.age_lo.max(lo));
                if overlap > 0 {
                    shares[d * 2 + b.sex.index()] += b.share * overlap as f64 / width;
                }
            }
        }
        shares
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    country: String,
    nodes: Vec<NodeFeatures>,
}

impl Population {
    /// Wraps nodes whose ids must be `0..n` in order.
    pub fn new(country: impl Into<String>, nodes: Vec<NodeFeatures>) -> Result<Self> {
        if let Some((i, n)) = nodes.iter().enumerate().find(|(i, n)| n.id != *i) {
            return Err(Error::InvalidInput(format!("node at position {i} has id {}", n.id)));
        }
        if let Some(n) = nodes.iter().find(|n| n.age >= MAX_AGE) {
            return Err(Error::InvalidInput(format!("node {} has age {} outside [0, 89]", n.id, n.age)));
        }
        Ok(Self { country: country.into(), nodes })
    }

    pub fn country(&self) -> &str {
        &self.country
    }

    pub fn nodes(&self) -> &[NodeFeatures] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Writes `id,age,sex` rows with a header.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "id,age,sex")?;
        for n in &self.nodes {
            writeln!(w, "{},{},{}", n.id, n.age, n.sex.as_f64() as u8)?;
        }
        Ok(())
    }

    pub fn from_csv<R: Read>(country: impl Into<String>, reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            id: usize,
            age: u8,
            sex: String,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut nodes = Vec::new();
        for (i, rec) in rdr.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let row = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
            let sex = row.sex.parse().map_err(|e: Error| Error::Parse { line, message: e.to_string() })?;
            nodes.push(NodeFeatures::new(row.id, row.age, sex));
        }
        Self::new(country, nodes)
    }
}

/// Splits `n` into integer parts proportional to `weights` using the
/// largest-remainder rule; ties go to the lower index.
pub fn largest_remainder(weights: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Samples `n` nodes: group sizes follow the pyramid's (decade × sex) shares,
/// ages are uniform integers within each decade.
pub fn sample_population(pyramid: &AgeSexPyramid, n: usize, seed: u64) -> Result<Population> {
    if n == 0 {
        return Err(Error::InvalidParameter("population size must be at least 1".into()));
    }
    let counts = largest_remainder(&pyramid.group_shares(), n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::with_capacity(n);
    for (group, &count) in counts.iter().enumerate() {
        let decade = (group / 2) as u8;
        let sex = if group % 2 == 0 { Sex::Female } else { Sex::Male };
        for _ in 0..count {
            let age = rng.random_range(decade * 10..decade * 10 + 10);
            nodes.push(NodeFeatures::new(nodes.len(), age, sex));
        }
    }
    Population::new(pyramid.country(), nodes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grouping {
    AgeDecade,
    Sex,
    AgeDecadeSex,
}

impl Grouping {
    pub fn len(self) -> usize {
        match self {
            Grouping::AgeDecade => AGE_DECADES,
            Grouping::Sex => 2,
            Grouping::AgeDecadeSex => 2 * AGE_DECADES,
        }
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn index(self, node: &NodeFeatures) -> usize {
        match self {
            Grouping::AgeDecade => node.decade(),
            Grouping::Sex => node.sex.index(),
            Grouping::AgeDecadeSex => node.group(),
        }
    }

    /// Human-readable group labels, e.g. `30-39 male`.
    pub fn labels(self) -> Vec<String> {
        let decade = |d: usize| format!("{}-{}", d * 10, d * 10 + 9);
        match self {
            Grouping::AgeDecade => (0..AGE_DECADES).map(decade).collect(),
            Grouping::Sex => vec!["female".into(), "male".into()],
            Grouping::AgeDecadeSex => (0..2 * AGE_DECADES)
                .map(|g| format!("{} {}", decade(g / 2), if g % 2 == 0 { "female" } else { "male" }))
                .collect(),
        }
    }
}

pub fn group_counts(pop: &Population, grouping: Grouping) -> Vec<usize> {
    let mut counts = vec![0; grouping.len()];
    for node in pop.nodes() {
        counts[grouping.index(node)] += 1;
    }
    counts
}

/// Hill number of order `q` over group counts; zero counts are ignored and
/// `q = 1` uses the Shannon limit.
pub fn hill_number(counts: &[usize], q: f64) -> Result<f64> {
    if !(q.is_finite() && q >= 0.0) {
        return Err(Error::InvalidParameter(format!("Hill order {q} must be finite and >= 0")));
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidInput("Hill number needs at least one positive count".into()));
    }
    let props = counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 / total as f64);
    if (q - 1.0).abs() < 1e-12 {
        let entropy: f64 = props.map(|p| -p * p.ln()).sum();
        Ok(entropy.exp())
    } else {
        let sum: f64 = props.map(|p| p.powf(q)).sum();
        Ok((sum.ln() / (1.0 - q)).exp())
    }
}
