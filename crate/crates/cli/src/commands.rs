//! The pipeline stages behind each subcommand, one country at a time.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dtcns::calibration::{run_pipeline, CalibrationResult, Model, ModelFamily, PipelineConfig, PipelineReport, Problem, SetCounts};
use dtcns::contact::{derive_edge_budget, AgeBins, ContactMatrix};
use dtcns::epidemic::{run_si, EpidemicParams, EpidemicTrace, SeedRule};
use dtcns::formation::{Formation, FormationConfig};
use dtcns::metrics::{clustering_coefficients, ShortestPaths, TopologySummary};
use dtcns::population::{group_counts, hill_number, sample_population, AgeSexPyramid, Grouping, Population, Sex};
use dtcns::sensitivity::SensitivityReport;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::svg;

pub const CALIBRATION_FILE: &str = "calibration.json";

/// Calibrated parameters as stored in `calibration.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub family: ModelFamily,
    pub sets: SetCounts,
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    pub eu: f64,
}

impl FittedModel {
    fn from_result(r: &CalibrationResult) -> Self {
        Self { family: r.family, sets: r.sets, param_names: r.param_names.clone(), params: r.best_params.clone(), eu: r.best_eu }
    }

    fn model(&self) -> dtcns::Result<Model> {
        let model = Model::new(self.family, self.sets)?;
        if model.space().names() != self.param_names {
            return Err(dtcns::Error::Config(format!(
                "parameter names do not match the {} model with {}/{} sets",
                self.family, self.sets.value, self.sets.difference
            )));
        }
        model.space().check(&self.params)?;
        Ok(model)
    }
}

/// A country's inputs, read and checked before anything is written.
pub struct Country {
    pub cfg: RunConfig,
    pub population: Population,
    pub target: ContactMatrix,
    pub edge_budget: usize,
    /// Parameters from an earlier `calibrate` run, if any.
    pub fitted: Option<FittedModel>,
}

impl Country {
    pub fn load(cfg: RunConfig) -> Result<Self, CliError> {
        let name = cfg.country.clone();
        let open = |p: &Path| {
            fs::File::open(p).map_err(|e| CliError::Config(format!("{name}: cannot open {}: {e}", p.display())))
        };
        let pyramid = AgeSexPyramid::from_csv(open(&cfg.pyramid)?)
            .map_err(|e| CliError::from_input(format!("{name}: {}", cfg.pyramid.display()), e))?;
        let survey = ContactMatrix::from_csv(open(&cfg.matrix)?)
            .map_err(|e| CliError::from_input(format!("{name}: {}", cfg.matrix.display()), e))?;
        if survey.bins() != &AgeBins::decades() {
            return Err(CliError::Config(format!("{name}: contact matrix must use ten-year bins 0-9 .. 80-89")));
        }
        let population = sample_population(&pyramid, cfg.n, cfg.seeds.population)
            .map_err(|e| CliError::from_input(name.clone(), e))?;
        let target = survey.prepare_target(&population).map_err(|e| CliError::from_input(name.clone(), e))?;
        let edge_budget = match cfg.edge_budget {
            Some(b) => b,
            None => derive_edge_budget(&target, &population).map_err(|e| CliError::from_input(name.clone(), e))?,
        };
        let formation = FormationConfig {
            encounter_rate: cfg.encounter_rate,
            edge_budget,
            noise_sigma: cfg.noise_sigma,
            seed: cfg.seeds.formation,
        };
        formation.validate(cfg.n).map_err(|e| CliError::Config(format!("{name}: {e}")))?;

        let stored = cfg.output.join(CALIBRATION_FILE);
        let fitted = if stored.exists() {
            let text = fs::read_to_string(&stored)
                .map_err(|e| CliError::Config(format!("{name}: cannot read {}: {e}", stored.display())))?;
            let fitted: FittedModel = serde_json::from_str(&text)
                .map_err(|e| CliError::Parse(format!("{name}: {}: {e}", stored.display())))?;
            fitted.model().map_err(|e| CliError::Config(format!("{name}: {}: {e}", stored.display())))?;
            Some(fitted)
        } else {
            None
        };
        Ok(Self { cfg, population, target, edge_budget, fitted })
    }

    pub fn name(&self) -> &str {
        &self.cfg.country
    }

    pub fn formation(&self) -> FormationConfig {
        FormationConfig {
            encounter_rate: self.cfg.encounter_rate,
            edge_budget: self.edge_budget,
            noise_sigma: self.cfg.noise_sigma,
            seed: self.cfg.seeds.formation,
        }
    }

    fn problem(&self) -> Result<Problem<'_>> {
        Ok(Problem::new(&self.population, &self.target, self.formation())?)
    }

    /// Stored calibration, or the configured family at its neutral point.
    fn model(&self) -> Result<(Model, Vec<f64>)> {
        match &self.fitted {
            Some(f) => Ok((f.model()?, f.params.clone())),
            None => {
                warn!("[{}] no {CALIBRATION_FILE}; using the neutral {} model", self.name(), self.cfg.family);
                let model = Model::new(self.cfg.family, self.cfg.working_sets())?;
                let x = model.space().init();
                Ok((model, x))
            }
        }
    }

    fn out(&self) -> Result<Out> {
        Out::create(&self.cfg.output)
    }
}

struct Out {
    dir: PathBuf,
}

impl Out {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
    }

    fn text(&self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }
}

/// Hill profile over q in [0, 5].
const HILL_PROFILE_STEPS: usize = 20;

const GROUPINGS: [(Grouping, &str); 3] =
    [(Grouping::AgeDecade, "age"), (Grouping::Sex, "sex"), (Grouping::AgeDecadeSex, "age_sex")];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HillRow {
    pub grouping: String,
    pub q: f64,
    pub hill: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationReport {
    pub country: String,
    pub nodes: usize,
    pub hill: Vec<HillRow>,
}

pub fn population(c: &Country) -> Result<PopulationReport> {
    let out = c.out()?;
    out.text("population.csv", |w| c.population.write_csv(w))?;
    let mut hill = Vec::new();
    for (grouping, label) in GROUPINGS {
        let counts = group_counts(&c.population, grouping);
        for &q in &c.cfg.hill_q {
            hill.push(HillRow { grouping: label.into(), q, hill: hill_number(&counts, q)? });
        }
    }
    out.text("hill_numbers.csv", |w| {
        writeln!(w, "grouping,q,hill")?;
        for r in &hill {
            writeln!(w, "{},{},{}", r.grouping, r.q, r.hill)?;
        }
        Ok(())
    })?;
    out.text("hill_profile.csv", |w| {
        writeln!(w, "q,age,sex,age_sex")?;
        let counts: Vec<Vec<usize>> = GROUPINGS.iter().map(|&(g, _)| group_counts(&c.population, g)).collect();
        for step in 0..=HILL_PROFILE_STEPS {
            let q = step as f64 * 5.0 / HILL_PROFILE_STEPS as f64;
            let row = counts.iter().map(|k| hill_number(k, q)).collect::<dtcns::Result<Vec<_>>>().map_err(std::io::Error::other)?;
            writeln!(w, "{q},{},{},{}", row[0], row[1], row[2])?;
        }
        Ok(())
    })?;
    let report = PopulationReport { country: c.name().into(), nodes: c.population.len(), hill };
    out.json("population.json", &report)?;

    let counts = group_counts(&c.population, Grouping::AgeDecadeSex);
    let values: Vec<Option<f64>> = counts.iter().map(|&k| Some(k as f64)).collect();
    let title = format!("{}: nodes per age and sex group", c.name());
    out.write("population.svg", svg::bar_chart(&title, "nodes", &Grouping::AgeDecadeSex.labels(), &values).as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub country: String,
    pub model: String,
    pub calibrated: bool,
    pub eu: f64,
    pub requested_edges: usize,
    pub encountered_pairs: usize,
    pub topology: TopologySummary,
}

pub fn simulate(c: &Country) -> Result<SimulationReport> {
    let (model, x) = c.model()?;
    let problem = c.problem()?;
    let (formation, recreated) = problem.simulate(&model, &x)?;
    let eu = dtcns::contact::eu_distance(&recreated, &c.target)?;
    let net = &formation.network;
    if net.edge_count() == 0 {
        warn!("[{}] the network has no edges", c.name());
    }
    if let Some(short) = formation.shortfall() {
        warn!("[{}] only {} pairs met; {short} requested edges could not be placed", c.name(), formation.encountered_pairs);
    }

    let out = c.out()?;
    out.text("edges.csv", |w| net.write_edge_list(w))?;
    let topology = TopologySummary::of(net);
    out.text("topology.csv", |w| write_topology(w, &[(c.name(), &topology)]))?;
    write_node_metrics(&out, c, &formation)?;

    for (name, m, title) in [("recreated_matrix", &recreated, "recreated"), ("target_matrix", &c.target, "target")] {
        out.text(&format!("{name}.csv"), |w| m.write_csv(w))?;
        let labels = m.bins().labels();
        let rows: Vec<Vec<f64>> = (0..labels.len()).map(|i| (0..labels.len()).map(|j| m.get(i, j)).collect()).collect();
        let t = format!("{}: {title} contacts per person", c.name());
        out.write(&format!("{name}.svg"), svg::heatmap(&t, "contact age", "participant age", &labels, &labels, &rows).as_bytes())?;
    }

    let report = SimulationReport {
        country: c.name().into(),
        model: format!("{} {}/{}", model.family(), model.sets().value, model.sets().difference),
        calibrated: c.fitted.is_some(),
        eu,
        requested_edges: formation.requested_edges,
        encountered_pairs: formation.encountered_pairs,
        topology,
    };
    out.json("topology.json", &report)?;
    Ok(report)
}

pub fn write_topology<W: Write>(mut w: W, rows: &[(&str, &TopologySummary)]) -> std::io::Result<()> {
    writeln!(
        w,
        "country,nodes,connected_nodes,isolated_nodes,edges,\
         degree_mean,degree_std,degree_max,degree_min,\
         clustering_mean,clustering_std,clustering_max,clustering_min,\
         path_mean,path_std,path_max,path_min,fake_paths,fake_paths_ordered"
    )?;
    for (name, t) in rows {
        write!(w, "{name},{},{},{},{}", t.nodes, t.connected_nodes, t.isolated_nodes, t.edges)?;
        for s in [&t.degree, &t.clustering, &t.path_length] {
            write!(w, ",{},{},{},{}", s.mean, s.std, s.max, s.min)?;
        }
        writeln!(w, ",{},{}", t.fake_paths, t.fake_paths_ordered)?;
    }
    Ok(())
}

/// Per-node metrics and their distributions split by sex.
fn write_node_metrics(out: &Out, c: &Country, formation: &Formation) -> Result<()> {
    let net = &formation.network;
    let n = net.node_count();
    let clustering = clustering_coefficients(net);
    let paths = ShortestPaths::compute(net);
    let nodes = c.population.nodes();
    let mean_path = |u: usize| {
        if n < 2 {
            return 0.0;
        }
        (0..n).filter(|&v| v != u).map(|v| paths.get(u, v) as f64).sum::<f64>() / (n - 1) as f64
    };
    out.text("node_metrics.csv", |w| {
        writeln!(w, "node,age,sex,degree,clustering,mean_path_length,unreachable")?;
        for node in nodes {
            let u = node.id;
            let unreachable = (0..n).filter(|&v| v != u && !paths.is_reachable(u, v)).count();
            writeln!(w, "{u},{},{},{},{},{},{unreachable}", node.age, node.sex, net.degree(u), clustering[u], mean_path(u))?;
        }
        Ok(())
    })?;

    let by_sex = |values: &dyn Fn(usize) -> Vec<usize>, len: usize| {
        let mut hist = vec![[0usize; 2]; len];
        for node in nodes {
            for k in values(node.id) {
                hist[k][node.sex.index()] += 1;
            }
        }
        hist
    };
    let max_degree = (0..n).map(|u| net.degree(u)).max().unwrap_or(0);
    let degree = by_sex(&|u| vec![net.degree(u)], max_degree + 1);
    out.text("degree_distribution.csv", |w| {
        writeln!(w, "degree,{},{}", Sex::Female, Sex::Male)?;
        for (k, h) in degree.iter().enumerate() {
            writeln!(w, "{k},{},{}", h[0], h[1])?;
        }
        Ok(())
    })?;
    let cc = by_sex(&|u| vec![((clustering[u] * 10.0).floor() as usize).min(9)], 10);
    out.text("clustering_distribution.csv", |w| {
        writeln!(w, "bin_lo,bin_hi,{},{}", Sex::Female, Sex::Male)?;
        for (k, h) in cc.iter().enumerate() {
            writeln!(w, "{:.1},{:.1},{},{}", k as f64 / 10.0, (k + 1) as f64 / 10.0, h[0], h[1])?;
        }
        Ok(())
    })?;
    let max_len = (0..n).flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v))).map(|(u, v)| paths.get(u, v)).max().unwrap_or(0);
    let lengths = by_sex(&|u| (0..n).filter(|&v| v != u).map(|v| paths.get(u, v)).collect(), max_len + 1);
    out.text("path_length_distribution.csv", |w| {
        writeln!(w, "length,{},{}", Sex::Female, Sex::Male)?;
        for (k, h) in lengths.iter().enumerate() {
            if h[0] + h[1] > 0 {
                writeln!(w, "{k},{},{}", h[0], h[1])?;
            }
        }
        Ok(())
    })?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyRow {
    pub family: ModelFamily,
    pub eu: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub country: String,
    pub edge_budget: usize,
    pub families: Vec<FamilyRow>,
    pub grid_best: SetCounts,
    pub grid_best_eu: f64,
    pub refined_eu: f64,
    pub selected: Vec<String>,
    pub optimised_eu: f64,
    pub initial_eu: f64,
    pub final_eu: f64,
    pub fitted: FittedModel,
}

pub fn calibrate(c: &Country) -> Result<(CalibrationReport, FittedModel)> {
    let cfg = &c.cfg;
    let (value_counts, difference_counts) = match cfg.sets.fixed() {
        Some(s) => (vec![s.value], vec![s.difference]),
        None => (cfg.value_counts.clone(), cfg.difference_counts.clone()),
    };
    let pipeline = PipelineConfig {
        families: cfg.families.clone(),
        family_budget: cfg.budget,
        value_counts,
        difference_counts,
        grid_budget: cfg.grid_budget,
        refine_budget: cfg.budget,
        vars: cfg.vars,
        top: cfg.top,
        selected_budget: cfg.budget,
        seed: cfg.seeds.optimizer,
    };
    let problem = c.problem()?;
    info!("[{}] calibrating against {} edges", c.name(), c.edge_budget);
    let report = run_pipeline(&problem, &pipeline).with_context(|| format!("calibrating {}", c.name()))?;
    let fitted = FittedModel::from_result(report.final_result());
    info!("[{}] calibration done, EU {:.4}", c.name(), fitted.eu);

    let out = c.out()?;
    write_calibration(&out, c, &report)?;
    write_sensitivity(&out, c.name(), &report.sensitivity)?;
    out.json(CALIBRATION_FILE, &fitted)?;

    let summary = CalibrationReport {
        country: c.name().into(),
        edge_budget: c.edge_budget,
        families: report
            .families
            .iter()
            .map(|f| FamilyRow { family: f.family, eu: f.best_eu, evaluations: f.eval_count })
            .collect(),
        grid_best: report.grid.best,
        grid_best_eu: report.grid.best_eu,
        refined_eu: report.refined.best_eu,
        selected: report.selected.clone(),
        optimised_eu: report.optimised.best_eu,
        initial_eu: report.refined.initial_eu(),
        final_eu: fitted.eu,
        fitted: fitted.clone(),
    };
    out.json("calibration_report.json", &summary)?;
    Ok((summary, fitted))
}

fn write_calibration(out: &Out, c: &Country, r: &PipelineReport) -> Result<()> {
    out.text("families.csv", |w| {
        writeln!(w, "family,eu,evaluations")?;
        for f in &r.families {
            writeln!(w, "{},{},{}", f.family, f.best_eu, f.eval_count)?;
        }
        Ok(())
    })?;
    out.text("grid_eu.csv", |w| r.grid.write_csv(w))?;
    let rows: Vec<String> = r.grid.value_counts.iter().map(|k| k.to_string()).collect();
    let cols: Vec<String> = r.grid.difference_counts.iter().map(|k| k.to_string()).collect();
    let title = format!("{}: EU distance by fuzzy-set counts", c.name());
    out.write("grid_eu.svg", svg::heatmap(&title, "difference sets", "value sets", &rows, &cols, &r.grid.eu).as_bytes())?;

    out.text("calibration_trace.csv", |w| {
        writeln!(w, "stage,evaluation,eu,best_eu")?;
        let stages: Vec<(&str, &CalibrationResult)> = r
            .families
            .iter()
            .map(|f| (f.family.tag(), &f.result))
            .chain([("refined", &r.refined), ("selected", &r.optimised)])
            .collect();
        for (stage, result) in stages {
            let mut best = f64::INFINITY;
            for (k, (_, eu)) in result.trace.iter().enumerate() {
                best = best.min(*eu);
                writeln!(w, "{stage},{},{eu},{best}", k + 1)?;
            }
        }
        Ok(())
    })?;

    // Wall-clock times differ between runs, so they are kept apart from
    // the reproducible outputs.
    #[derive(Serialize)]
    struct Timing<'a> {
        stage: &'a str,
        seconds: f64,
    }
    let mut timings: Vec<Timing> =
        r.families.iter().map(|f| Timing { stage: f.family.tag(), seconds: f.runtime_seconds }).collect();
    timings.push(Timing { stage: "refined", seconds: r.refined.runtime_seconds });
    timings.push(Timing { stage: "selected", seconds: r.optimised.runtime_seconds });
    out.json("timings.json", &timings)
}

fn write_sensitivity(out: &Out, country: &str, report: &SensitivityReport) -> Result<()> {
    out.text("sensitivity.csv", |w| report.write_csv(w))?;
    out.json("sensitivity.json", report)?;
    let labels: Vec<String> = report.parameters.iter().map(|p| p.name.clone()).collect();
    let values: Vec<Option<f64>> = report.parameters.iter().map(|p| Some(p.ivars50)).collect();
    let title = format!("{country}: IVARS50 of membership-function parameters");
    out.write("sensitivity.svg", svg::bar_chart(&title, "IVARS50", &labels, &values).as_bytes())
}

pub fn sensitivity(c: &Country) -> Result<SensitivityReport> {
    let (model, x) = c.model()?;
    let problem = c.problem()?;
    let vars = dtcns::sensitivity::VarsConfig { seed: c.cfg.seeds.sensitivity, ..c.cfg.vars };
    let (report, _) = dtcns::calibration::partition_sensitivity(&problem, &model, &x, &vars, c.cfg.top)
        .with_context(|| format!("sensitivity analysis for {}", c.name()))?;
    write_sensitivity(&c.out()?, c.name(), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpidemicReport {
    pub country: String,
    pub seed_node: usize,
    pub terminal_par: f64,
    pub infected_per_step: Vec<usize>,
    pub par_steps: usize,
    pub par_hops: usize,
    pub par: f64,
}

pub fn epidemic(c: &Country) -> Result<(EpidemicReport, EpidemicTrace)> {
    let (model, x) = c.model()?;
    let (formation, _) = c.problem()?.simulate(&model, &x)?;
    let params = EpidemicParams {
        gamma: c.cfg.gamma,
        eta: 0.0,
        seed_rule: SeedRule::MaxDegree,
        rng_seed: c.cfg.seeds.epidemic,
        max_steps: c.cfg.max_steps,
    };
    let trace = run_si(&formation.network, &params)?;
    let (t, d) = (c.cfg.par_steps, c.cfg.par_hops);

    let out = c.out()?;
    out.text("epidemic_trace.csv", |w| trace.write_csv(&c.population, w))?;
    out.text("par_surface.csv", |w| {
        writeln!(w, "T,D,par")?;
        for (t, d, v) in trace.par_surface(c.cfg.max_steps) {
            writeln!(w, "{t},{d},{v}")?;
        }
        Ok(())
    })?;
    let groups = trace.par_by_group(&c.population, t, d)?;
    let sizes = group_counts(&c.population, Grouping::AgeDecadeSex);
    let labels = Grouping::AgeDecadeSex.labels();
    out.text("par_groups.csv", |w| {
        writeln!(w, "group,size,par")?;
        for ((label, size), v) in labels.iter().zip(&sizes).zip(&groups) {
            writeln!(w, "{label},{size},{}", v.map_or(String::new(), |v| v.to_string()))?;
        }
        Ok(())
    })?;
    let title = format!("{}: PaR({t},{d}) by age and sex", c.name());
    out.write("par_groups.svg", svg::bar_chart(&title, "PaR", &labels, &groups).as_bytes())?;

    let report = EpidemicReport {
        country: c.name().into(),
        seed_node: trace.seed,
        terminal_par: trace.terminal_par(),
        infected_per_step: trace.infected_per_step.clone(),
        par_steps: t,
        par_hops: d,
        par: trace.par(t, d)?,
    };
    out.json("epidemic.json", &report)?;
    Ok((report, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountrySummary {
    pub country: String,
    pub nodes: usize,
    pub hill_age_sex: Vec<HillRow>,
    pub edges: usize,
    pub final_eu: f64,
    pub fake_paths: usize,
    pub terminal_par: f64,
    pub topology: TopologySummary,
}

/// Population, calibration, simulation and epidemic for one country.
pub fn report(mut c: Country) -> Result<CountrySummary> {
    info!("[{}] population", c.name());
    let pop = population(&c)?;
    let (cal, fitted) = calibrate(&c)?;
    c.fitted = Some(fitted);
    info!("[{}] simulating", c.name());
    let sim = simulate(&c)?;
    info!("[{}] spreading", c.name());
    let (epi, _) = epidemic(&c)?;
    Ok(CountrySummary {
        country: c.name().into(),
        nodes: pop.nodes,
        hill_age_sex: pop.hill.into_iter().filter(|r| r.grouping == "age_sex").collect(),
        edges: sim.topology.edges,
        final_eu: cal.final_eu,
        fake_paths: sim.topology.fake_paths,
        terminal_par: epi.terminal_par,
        topology: sim.topology,
    })
}

/// Cross-country tables written to the output root.
pub fn write_batch_summary(root: &Path, rows: &[CountrySummary]) -> Result<()> {
    let out = Out::create(root)?;
    out.text("summary.csv", |w| {
        writeln!(w, "country,nodes,edges,final_eu,fake_paths,terminal_par")?;
        for r in rows {
            writeln!(w, "{},{},{},{},{},{}", r.country, r.nodes, r.edges, r.final_eu, r.fake_paths, r.terminal_par)?;
        }
        Ok(())
    })?;
    out.json("summary.json", rows)?;
    let topo: Vec<(&str, &TopologySummary)> = rows.iter().map(|r| (r.country.as_str(), &r.topology)).collect();
    out.text("topology.csv", |w| write_topology(w, &topo))?;
    out.text("hill_numbers.csv", |w| {
        writeln!(w, "country,q,hill_age_sex")?;
        for r in rows {
            for h in &r.hill_age_sex {
                writeln!(w, "{},{},{}", r.country, h.q, h.hill)?;
            }
        }
        Ok(())
    })?;
    let labels: Vec<String> = rows.iter().map(|r| r.country.clone()).collect();
    let par: Vec<Option<f64>> = rows.iter().map(|r| Some(r.terminal_par)).collect();
    out.write("terminal_par.svg", svg::bar_chart("Terminal PaR by country", "PaR", &labels, &par).as_bytes())
}
