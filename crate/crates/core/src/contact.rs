//! Age-binned contact matrices: ingestion, reciprocity adjustment,
//! recreation from a network and the Frobenius distance used as the
//! calibration objective.

use std::io::Read;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formation::Network;
use crate::population::{Population, MAX_AGE};

/// Contiguous integer age bins `[edges[i], edges[i + 1])`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgeBins {
    edges: Vec<u32>,
}

impl AgeBins {
    pub fn new(edges: Vec<u32>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::InvalidInput("age bins need at least two edges".into()));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!("age bin edges {edges:?} not strictly increasing")));
        }
        Ok(Self { edges })
    }

    /// Nine ten-year bins over `[0, 90)`.
    pub fn decades() -> Self {
        Self { edges: (0..=MAX_AGE as u32).step_by(10).collect() }
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edges(&self) -> &[u32] {
        &self.edges
    }

    pub fn index(&self, age: u32) -> Option<usize> {
        if age < self.edges[0] || age >= *self.edges.last().unwrap() {
            return None;
        }
        Some(self.edges.partition_point(|&e| e <= age) - 1)
    }

    /// Labels of the form `lo-hi` with an inclusive upper age.
    pub fn labels(&self) -> Vec<String> {
        self.edges.windows(2).map(|w| format!("{}-{}", w[0], w[1] - 1)).collect()
    }

    fn from_labels(labels: &[&str]) -> Result<Self> {
        let mut edges = Vec::with_capacity(labels.len() + 1);
        for (k, label) in labels.iter().enumerate() {
            let bad = || Error::Parse { line: 1, message: format!("bin label {label:?} is not of the form lo-hi") };
            let (lo, hi) = label.split_once('-').ok_or_else(bad)?;
            let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
            let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
            if k == 0 {
                edges.push(lo);
            } else if *edges.last().unwrap() != lo {
                return Err(Error::Parse { line: 1, message: format!("bin {label:?} does not continue the previous bin") });
            }
            edges.push(hi + 1);
        }
        Self::new(edges).map_err(|e| Error::Parse { line: 1, message: e.to_string() })
    }

    /// Number of population members per bin.
    pub fn counts(&self, pop: &Population) -> Result<Vec<f64>> {
        let mut counts = vec![0.0; self.len()];
        for node in pop.nodes() {
            let b = self
                .index(node.age as u32)
                .ok_or_else(|| Error::InvalidInput(format!("age {} of node {} outside the bins", node.age, node.id)))?;
            counts[b] += 1.0;
        }
        Ok(counts)
    }
}

/// Average contacts per person between age bins, with bin populations.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactMatrix {
    bins: AgeBins,
    m: DMatrix<f64>,
    pop_sizes: Vec<f64>,
}

impl ContactMatrix {
    pub fn new(bins: AgeBins, m: DMatrix<f64>, pop_sizes: Vec<f64>) -> Result<Self> {
        let k = bins.len();
        if m.nrows() != k || m.ncols() != k || pop_sizes.len() != k {
            return Err(Error::InvalidInput(format!(
                "matrix {}x{} with {} population sizes does not fit {k} bins",
                m.nrows(),
                m.ncols(),
                pop_sizes.len()
            )));
        }
        if m.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInput("contact rates must be finite and >= 0".into()));
        }
        if pop_sizes.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInput("population sizes must be finite and >= 0".into()));
        }
        Ok(Self { bins, m, pop_sizes })
    }

    pub fn zeros(bins: AgeBins, pop_sizes: Vec<f64>) -> Result<Self> {
        let k = bins.len();
        Self::new(bins, DMatrix::zeros(k, k), pop_sizes)
    }

    pub fn bins(&self) -> &AgeBins {
        &self.bins
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn pop_sizes(&self) -> &[f64] {
        &self.pop_sizes
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// `Σ_ij m_ij N_i`.
    pub fn total_contacts(&self) -> f64 {
        (0..self.bins.len()).map(|i| self.m.row(i).sum() * self.pop_sizes[i]).sum()
    }

    /// Reads `bin,<labels...>,pop_size` delimited text.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols.len() < 3 || cols[0] != "bin" || cols[cols.len() - 1] != "pop_size" {
            return Err(Error::Parse { line: 1, message: "expected header bin,<labels...>,pop_size".into() });
        }
        let labels = &cols[1..cols.len() - 1];
        let bins = AgeBins::from_labels(labels)?;
        let k = bins.len();
        let mut m = DMatrix::zeros(k, k);
        let mut pop_sizes = vec![0.0; k];
        let mut rows = 0;
        for (i, record) in rdr.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| Error::Parse { line, message: e.to_string() })?;
            if i >= k {
                return Err(Error::Parse { line, message: format!("more than {k} rows") });
            }
            if record.len() != k + 2 {
                return Err(Error::Parse { line, message: format!("expected {} fields, found {}", k + 2, record.len()) });
            }
            if &record[0] != labels[i] {
                return Err(Error::Parse { line, message: format!("row label {:?} should be {:?}", &record[0], labels[i]) });
            }
            for j in 0..=k {
                let v: f64 = record[j + 1]
                    .parse()
                    .map_err(|_| Error::Parse { line, message: format!("non-numeric value {:?}", &record[j + 1]) })?;
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::Parse { line, message: format!("value {v} must be finite and >= 0") });
                }
                if j < k {
                    m[(i, j)] = v;
                } else {
                    pop_sizes[i] = v;
                }
            }
            rows += 1;
        }
        if rows != k {
            return Err(Error::Parse { line: rows + 2, message: format!("expected {k} rows, found {rows}") });
        }
        Self::new(bins, m, pop_sizes)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let labels = self.bins.labels();
        writeln!(w, "bin,{},pop_size", labels.join(","))?;
        for (i, label) in labels.iter().enumerate() {
            let row: Vec<String> = self.m.row(i).iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{label},{},{}", row.join(","), self.pop_sizes[i])?;
        }
        Ok(())
    }

    /// Enforces `m_ij N_i = m_ji N_j` using the matrix's own bin populations.
    pub fn reciprocal_adjust(&self) -> Result<Self> {
        let k = self.bins.len();
        let n = &self.pop_sizes;
        for i in 0..k {
            if n[i] == 0.0 {
                let touched = (0..k).any(|j| self.m[(i, j)] != 0.0 || (n[j] > 0.0 && self.m[(j, i)] != 0.0));
                if touched {
                    return Err(Error::DegenerateBin { bin: i });
                }
            }
        }
        Ok(self.symmetrised(n))
    }

    /// Applies the reciprocity equation with the given bin populations and
    /// adopts them. Bins with no members get zero rows and columns.
    pub fn rescale_to_population(&self, counts: &[f64]) -> Result<Self> {
        let k = self.bins.len();
        if counts.len() != k {
            return Err(Error::InvalidInput(format!("{} counts for {k} bins", counts.len())));
        }
        if counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidInput("population counts must be finite and >= 0".into()));
        }
        Ok(self.symmetrised(counts))
    }

    fn symmetrised(&self, n: &[f64]) -> Self {
        let k = self.bins.len();
        let mut m = DMatrix::zeros(k, k);
        for i in 0..k {
            if n[i] == 0.0 {
                continue;
            }
            for j in 0..k {
                if n[j] == 0.0 {
                    continue;
                }
                m[(i, j)] = (self.m[(i, j)] * n[i] + self.m[(j, i)] * n[j]) / (2.0 * n[i]);
            }
        }
        Self { bins: self.bins.clone(), m, pop_sizes: n.to_vec() }
    }

    /// Reciprocity-adjusts with the survey populations, then rescales to
    /// the simulated population's bin counts.
    pub fn prepare_target(&self, pop: &Population) -> Result<Self> {
        let counts = self.bins.counts(pop)?;
        self.reciprocal_adjust()?.rescale_to_population(&counts)
    }
}

/// Contact matrix of a simulated network. Each edge counts once from each
/// endpoint, so an edge inside a bin adds two contacts to that bin.
pub fn matrix_from_network(net: &Network, pop: &Population, bins: &AgeBins) -> Result<ContactMatrix> {
    if net.node_count() != pop.len() {
        return Err(Error::InvalidInput(format!("network has {} nodes, population {}", net.node_count(), pop.len())));
    }
    let node_bins: Vec<usize> = pop
        .nodes()
        .iter()
        .map(|n| bins.index(n.age as u32).ok_or_else(|| Error::InvalidInput(format!("age {} outside the bins", n.age))))
        .collect::<Result<_>>()?;
    let counts = bins.counts(pop)?;
    let k = bins.len();
    let mut m = DMatrix::zeros(k, k);
    for &(u, v) in net.edges() {
        let (bu, bv) = (node_bins[u], node_bins[v]);
        m[(bu, bv)] += 1.0;
        m[(bv, bu)] += 1.0;
    }
    for i in 0..k {
        if counts[i] > 0.0 {
            m.row_mut(i).scale_mut(1.0 / counts[i]);
        }
    }
    ContactMatrix::new(bins.clone(), m, counts)
}

/// Frobenius distance between two matrices on the same bins.
pub fn eu_distance(a: &ContactMatrix, b: &ContactMatrix) -> Result<f64> {
    if a.bins != b.bins {
        return Err(Error::InvalidInput("contact matrices use different bins".into()));
    }
    Ok((&a.m - &b.m).norm())
}

/// `round(Σ_ij m_ij N_i / 2)` with `N_i` the population's bin counts.
pub fn derive_edge_budget(target: &ContactMatrix, pop: &Population) -> Result<usize> {
    let counts = target.bins.counts(pop)?;
    let total: f64 = (0..target.bins.len()).map(|i| target.m.row(i).sum() * counts[i]).sum();
    Ok((total / 2.0).round() as usize)
}
