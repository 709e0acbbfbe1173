//! Acceptance criteria 1-10. Each prints one PASS/FAIL line; the test fails
//! if any criterion fails.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use dtcns::bayes::BoConfig;
use dtcns::calibration::*;
use dtcns::contact::{AgeBins, ContactMatrix};
use dtcns::epidemic::{run_si, EpidemicParams, SeedRule};
use dtcns::formation::{form_network, FormationConfig, Network, RuleSet};
use dtcns::fuzzy::{membership_degree, FeatureRepresentation, FuzzyPartition, MembershipFunction, RepresentationPrinciple};
use dtcns::metrics::{bfs_distances, clustering_coefficients, ShortestPaths, TopologySummary, FAKE_PATH_LENGTH};
use dtcns::population::{hill_number, sample_population, AgeSexPyramid, Feature, NodeFeatures, Population, PyramidBin, Sex};
use dtcns::sensitivity::{generate_stars, StarResponses, VarsConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn random_graph(rng: &mut ChaCha8Rng, max_n: usize) -> Network {
    let n = rng.random_range(1..=max_n);
    let p: f64 = rng.random_range(0.02..0.4);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Network::from_edges(n, edges).unwrap()
}

fn random_population(n: usize, rng: &mut ChaCha8Rng) -> Population {
    let nodes = (0..n)
        .map(|i| NodeFeatures::new(i, rng.random_range(0..90), if rng.random::<bool>() { Sex::Male } else { Sex::Female }))
        .collect();
    Population::new("R", nodes).unwrap()
}

fn membership_math() -> Outcome {
    let start = Instant::now();
    let mf = MembershipFunction::new(0.0, 5.0).unwrap();
    let at_centre = membership_degree(0.0, &mf).unwrap();
    let at_three_sigma = membership_degree(15.0, &mf).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut lengths_ok = true;
    for _ in 0..1000 {
        let mut features = Vec::new();
        let mut z = 0;
        let mut zh = 0;
        for feature in [Feature::Age, Feature::Sex] {
            if rng.random::<f64>() < 0.2 {
                continue;
            }
            if rng.random::<bool>() {
                let mut part = || {
                    let k = rng.random_range(1..=10);
                    let mut mus: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..90.0)).collect();
                    mus.sort_by(f64::total_cmp);
                    let sigmas: Vec<f64> = (0..k).map(|_| rng.random_range(1.0..9.0)).collect();
                    FuzzyPartition::from_parameters(&mus, &sigmas, (0.0, 90.0)).unwrap()
                };
                let (v, d) = (part(), part());
                z += v.len();
                zh += d.len();
                features.push(FeatureRepresentation::fuzzy(feature, v, d));
            } else {
                z += 1;
                zh += 1;
                features.push(FeatureRepresentation::crisp(feature));
            }
        }
        let principle = RepresentationPrinciple::new(features);
        let a = NodeFeatures::new(0, rng.random_range(0..90), Sex::Female);
        let b = NodeFeatures::new(1, rng.random_range(0..90), Sex::Male);
        lengths_ok &= principle.unfold_node(&a).len() == z && principle.unfold_node_difference(&a, &b).len() == zh;
    }
    let elapsed = start.elapsed();
    let pass = at_centre == 1.0
        && (at_three_sigma - (-4.5f64).exp()).abs() < 1e-12
        && lengths_ok
        && elapsed < Duration::from_secs(1);
    outcome(pass, format!("degree(0)={at_centre}, degree(15)={at_three_sigma:e}, lengths ok {lengths_ok}, {elapsed:.2?}"))
}

fn reciprocity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_sym = 0.0f64;
    let mut worst_idem = 0.0f64;
    let mut worst_total = 0.0f64;
    for _ in 0..1000 {
        let edges: Vec<u32> = (0..=rng.random_range(2..10)).map(|k| k * 10).collect();
        let bins = AgeBins::new(edges).unwrap();
        let k = bins.len();
        let m = DMatrix::from_fn(k, k, |_, _| rng.random_range(0.0..8.0));
        let pops: Vec<f64> = (0..k).map(|_| rng.random_range(1.0..1e6)).collect();
        let cm = ContactMatrix::new(bins, m, pops.clone()).unwrap();
        let adj = cm.reciprocal_adjust().unwrap();
        for i in 0..k {
            for j in 0..k {
                let (a, b) = (adj.get(i, j) * pops[i], adj.get(j, i) * pops[j]);
                worst_sym = worst_sym.max((a - b).abs() / a.abs().max(b.abs()).max(1e-300));
            }
        }
        let again = adj.reciprocal_adjust().unwrap();
        for i in 0..k {
            for j in 0..k {
                worst_idem = worst_idem.max((again.get(i, j) - adj.get(i, j)).abs() / adj.get(i, j).abs().max(1.0));
            }
        }
        worst_total = worst_total.max((adj.total_contacts() - cm.total_contacts()).abs() / cm.total_contacts());
    }
    let pass = worst_sym <= 1e-9 && worst_idem <= 1e-12 && worst_total <= 1e-9;
    outcome(pass, format!("reciprocity {worst_sym:.1e}, idempotence {worst_idem:.1e}, total {worst_total:.1e}"))
}

fn formation() -> Outcome {
    let model = Model::new(ModelFamily::AgeFuzzySexCrisp, SetCounts::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ok = true;
    for trial in 0..20 {
        let n = rng.random_range(5..60);
        let pop = random_population(n, &mut rng);
        let x: Vec<f64> = model.space().params().iter().map(|p| rng.random_range(p.lower..p.upper)).collect();
        let rules = RuleSet::Uniform(model.rules(&x).unwrap());
        let pairs = n * (n - 1) / 2;
        let cfg = FormationConfig {
            encounter_rate: rng.random_range(0.05..1.0),
            edge_budget: rng.random_range(0..=pairs),
            seed: trial,
            ..FormationConfig::default()
        };
        let f = form_network(&pop, &rules, &cfg).unwrap();
        let degrees: usize = (0..n).map(|i| f.network.degree(i)).sum();
        ok &= f.network.edge_count() == cfg.edge_budget.min(f.encountered_pairs);
        ok &= degrees == 2 * f.network.edge_count();
        let silent = form_network(&pop, &rules, &FormationConfig { encounter_rate: 0.0, ..cfg }).unwrap();
        ok &= silent.network.edge_count() == 0;
    }

    let pop = random_population(90, &mut rng);
    let x: Vec<f64> = model.space().params().iter().map(|p| rng.random_range(p.lower..p.upper)).collect();
    let rules = RuleSet::Uniform(model.rules(&x).unwrap());
    let cfg = FormationConfig { edge_budget: 793, seed: 99, ..FormationConfig::default() };
    let start = Instant::now();
    let first = form_network(&pop, &rules, &cfg).unwrap();
    let elapsed = start.elapsed();
    let repeat_ok = (0..5).all(|_| form_network(&pop, &rules, &cfg).unwrap().network.edges() == first.network.edges());
    let pass = ok && repeat_ok && first.network.edge_count() == 793 && elapsed < Duration::from_secs(1);
    outcome(pass, format!("counts ok {ok}, repeatable {repeat_ok}, 90 nodes / 793 edges in {elapsed:.2?}"))
}

fn topology_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ok = true;
    for _ in 0..100 {
        let net = random_graph(&mut rng, 30);
        let n = net.node_count();
        let mut a = vec![vec![false; n]; n];
        for &(u, v) in net.edges() {
            a[u][v] = true;
            a[v][u] = true;
        }
        let cc = clustering_coefficients(&net);
        for i in 0..n {
            let nb: Vec<usize> = (0..n).filter(|&j| a[i][j]).collect();
            let k = nb.len();
            let closed = nb.iter().flat_map(|&u| nb.iter().map(move |&v| (u, v))).filter(|&(u, v)| a[u][v]).count();
            let expected = if k < 2 { 0.0 } else { closed as f64 / (k * (k - 1)) as f64 };
            ok &= cc[i] == expected;
        }
        let mut d: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0 } else if a[i][j] { 1 } else { usize::MAX }).collect())
            .collect();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] != usize::MAX && d[k][j] != usize::MAX {
                        d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
                    }
                }
            }
        }
        let paths = ShortestPaths::compute(&net);
        let mut fake = 0;
        for i in 0..n {
            for j in 0..n {
                let expected = if d[i][j] == usize::MAX { FAKE_PATH_LENGTH } else { d[i][j] };
                ok &= paths.get(i, j) == expected;
                if i < j && d[i][j] == usize::MAX {
                    fake += 1;
                }
            }
        }
        ok &= TopologySummary::of(&net).fake_paths == fake;
    }
    outcome(ok, "100 random graphs, n <= 30")
}

fn hill_numbers() -> Outcome {
    let mut worst = 0.0f64;
    for k in 1..=20 {
        for q in [0.0, 0.5, 1.0, 2.0, 5.0] {
            worst = worst.max((hill_number(&vec![4; k], q).unwrap() - k as f64).abs());
        }
    }
    let counts = [5, 1, 12, 7, 3];
    let one = hill_number(&counts, 1.0).unwrap();
    let gap = [1.0 - 1e-6, 1.0 + 1e-6].iter().map(|&q| (hill_number(&counts, q).unwrap() - one).abs()).fold(0.0, f64::max);
    outcome(worst < 1e-9 && gap < 1e-4, format!("uniform error {worst:.1e}, q=1 continuity gap {gap:.1e}"))
}

fn fixture_pyramid(country: &str) -> AgeSexPyramid {
    let path = fixtures().join(format!("{}_pyramid.csv", country.to_lowercase()));
    AgeSexPyramid::from_csv(std::fs::File::open(path).unwrap()).unwrap()
}

fn fixture_matrix(country: &str) -> ContactMatrix {
    let path = fixtures().join(format!("{}_matrix.csv", country.to_lowercase()));
    ContactMatrix::from_csv(std::fs::File::open(path).unwrap()).unwrap()
}

const COUNTRIES: [&str; 6] = ["Belgium", "Finland", "Germany", "Italy", "Luxembourg", "Poland"];

fn epidemic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut bfs_ok = true;
    for k in 0..100 {
        let net = random_graph(&mut rng, 30);
        let n = net.node_count();
        let source = rng.random_range(0..n);
        let params = EpidemicParams { gamma: 1.0, seed_rule: SeedRule::Node(source), rng_seed: k, max_steps: n, ..EpidemicParams::default() };
        let trace = run_si(&net, &params).unwrap();
        bfs_ok &= trace.infection_time == bfs_distances(&net, source);
    }

    let star = Network::from_edges(11, (1..11).map(|i| (0, i))).unwrap();
    let runs = 100_000;
    let mut infected = 0usize;
    for r in 0..runs {
        let params = EpidemicParams { seed_rule: SeedRule::Node(0), rng_seed: r, max_steps: 1, ..EpidemicParams::si(0.8, r) };
        infected += run_si(&star, &params).unwrap().infected_per_step[1] - 1;
    }
    let mean = infected as f64 / runs as f64;

    let mut monotone = true;
    for country in COUNTRIES {
        let pop = sample_population(&fixture_pyramid(country), 90, 11).unwrap();
        let target = fixture_matrix(country).prepare_target(&pop).unwrap();
        let budget = dtcns::contact::derive_edge_budget(&target, &pop).unwrap();
        let model = Model::new(ModelFamily::AgeFuzzySexCrisp, SetCounts::default()).unwrap();
        for seed in 0..5 {
            let x: Vec<f64> = model.space().params().iter().map(|p| rng.random_range(p.lower..p.upper)).collect();
            let cfg = FormationConfig { edge_budget: budget, seed, ..FormationConfig::default() };
            let f = form_network(&pop, &RuleSet::Uniform(model.rules(&x).unwrap()), &cfg).unwrap();
            let trace = run_si(&f.network, &EpidemicParams::si(0.8, seed)).unwrap();
            let max_t = 6;
            for t in 0..=max_t {
                for d in 0..=t {
                    let v = trace.par(t, d).unwrap();
                    if t < max_t {
                        monotone &= trace.par(t + 1, d).unwrap() >= v;
                    }
                    if d < t {
                        monotone &= trace.par(t, d + 1).unwrap() >= v;
                    }
                }
            }
        }
    }
    let pass = bfs_ok && (mean - 8.0).abs() <= 0.1 && monotone;
    outcome(pass, format!("BFS equivalence {bfs_ok}, star mean {mean:.4} (expect 8), PaR monotone {monotone}"))
}

fn sensitivity() -> Outcome {
    let a = [5.0, 3.0, 1.0, 0.0];
    let f = |x: &[f64]| -> dtcns::Result<f64> { Ok(x.iter().zip(&a).map(|(x, a)| x * a).sum()) };
    let mut ranked = 0;
    let mut ivars_monotone = true;
    let mut worst_variogram = 0.0f64;
    for seed in 0..10 {
        let cfg = VarsConfig { stars: 50, delta_h: 0.1, seed };
        let stars = generate_stars(4, &cfg).unwrap();
        let resp = StarResponses::evaluate(&stars, cfg.delta_h, f).unwrap();
        let metric = |d: usize| -> [f64; 4] {
            [resp.ivars(d, 0.1).unwrap(), resp.ivars(d, 0.3).unwrap(), resp.ivars(d, 0.5).unwrap(), resp.sobol_total(d).unwrap()]
        };
        let m: Vec<[f64; 4]> = (0..4).map(metric).collect();
        if (0..4).all(|k| m[0][k] > m[1][k] && m[1][k] > m[2][k] && m[2][k] > m[3][k]) {
            ranked += 1;
        }
        for row in &m {
            ivars_monotone &= row[0] <= row[1] && row[1] <= row[2];
        }
        for (d, &ad) in a.iter().enumerate() {
            for k in 1..=5 {
                let h = k as f64 * 0.1;
                let expected = ad * ad * h * h / 2.0;
                worst_variogram = worst_variogram.max((resp.variogram(d, h).unwrap() - expected).abs());
            }
        }
    }
    let pass = ranked == 10 && ivars_monotone && worst_variogram < 1e-9;
    outcome(pass, format!("ranked {ranked}/10, IVARS monotone {ivars_monotone}, variogram error {worst_variogram:.1e}"))
}

fn recovery_pyramid() -> AgeSexPyramid {
    let shares = [0.11, 0.11, 0.12, 0.13, 0.14, 0.14, 0.12, 0.08, 0.05];
    let bins = shares
        .iter()
        .enumerate()
        .flat_map(|(d, &s)| {
            let d = d as u8;
            [Sex::Female, Sex::Male].map(|sex| PyramidBin { age_lo: d * 10, age_hi: d * 10 + 10, sex, share: s / 2.0 })
        })
        .collect();
    AgeSexPyramid::new("Synthetic", bins).unwrap()
}

/// Known preferences of the fuzzy age & crisp sex family with 1/4 sets.
fn generating_point(model: &Model) -> Vec<f64> {
    let mut x = model.space().init();
    for (i, p) in model.space().params().iter().enumerate() {
        x[i] = match p.kind {
            ParameterKind::ValueSign(0) => -1.0,
            ParameterKind::ValueWeight(0) => 0.6,
            ParameterKind::ValueSign(1) => 1.0,
            ParameterKind::ValueWeight(1) => 0.3,
            ParameterKind::DifferenceSign(0) => 1.0,
            ParameterKind::DifferenceWeight(0) => 1.0,
            ParameterKind::DifferenceSign(1) => 1.0,
            ParameterKind::DifferenceWeight(1) => 0.8,
            ParameterKind::DifferenceSign(3) => -1.0,
            ParameterKind::DifferenceWeight(3) => 0.5,
            ParameterKind::DifferenceSign(4) => -1.0,
            ParameterKind::DifferenceWeight(4) => 0.4,
            _ => x[i],
        };
    }
    x
}

fn generating_model() -> Model {
    Model::new(ModelFamily::AgeFuzzySexCrisp, SetCounts { value: 1, difference: 4 }).unwrap()
}

fn synthetic(pop_seed: u64, formation_seed: u64) -> (Population, ContactMatrix, FormationConfig) {
    let model = generating_model();
    let pop = sample_population(&recovery_pyramid(), 90, pop_seed).unwrap();
    let f = FormationConfig { edge_budget: 614, seed: formation_seed, ..FormationConfig::default() };
    let target = synthetic_target(&model, &generating_point(&model), &pop, &f).unwrap();
    (pop, target, f)
}

fn calibration_recovery() -> Outcome {
    let start = Instant::now();
    let model = generating_model();
    let counts: Vec<usize> = (1..=10).collect();
    let mut grid_hits = 0;
    let mut picks = Vec::new();
    for s in 0..10u64 {
        let (pop, target, f) = synthetic(300 + s, 400 + s);
        let problem = Problem::new(&pop, &target, f).unwrap();
        let g = grid_search_fuzzy_sets(&problem, &counts, &counts, &BoConfig { budget: 25, seed: s * 1000, ..BoConfig::default() })
            .unwrap();
        if g.best.value.abs_diff(1) <= 1 && g.best.difference.abs_diff(4) <= 1 {
            grid_hits += 1;
        }
        picks.push(format!("{}/{}", g.best.value, g.best.difference));
    }

    let mut halved = 0;
    for s in 0..20u64 {
        let (pop, target, f) = synthetic(100 + s, 200 + s);
        let problem = Problem::new(&pop, &target, f).unwrap();
        let r = calibrate_preferences(&problem, &model, &BoConfig { budget: 100, seed: s, ..BoConfig::default() }).unwrap();
        if r.best_eu <= 0.5 * r.initial_eu() {
            halved += 1;
        }
    }

    let (pop, target, f) = synthetic(7, 8);
    let exact = evaluate_candidate(&model, &generating_point(&model), &target, &pop, &f).unwrap();
    let elapsed = start.elapsed();

    let pass = grid_hits >= 8 && halved >= 18 && exact == 0.0 && elapsed < Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "(a) grid within one cell of 1/4 in {grid_hits}/10 (picked {}); (b) EU halved in {halved}/20; (c) EU at generator {exact}; {elapsed:.1?}",
            picks.join(" ")
        ),
    )
}

fn family_ordering() -> Outcome {
    let mut ordered = 0;
    let mut fuzzy_slower = 0;
    for s in 0..10u64 {
        let (pop, target, f) = synthetic(500 + s, 600 + s);
        let problem = Problem::new(&pop, &target, f).unwrap();
        let rows =
            compare_model_families(&problem, &ModelFamily::ALL, SetCounts::default(), &BoConfig { budget: 100, seed: s, ..BoConfig::default() })
                .unwrap();
        let row = |fam| rows.iter().find(|r| r.family == fam).unwrap();
        let eu = |fam| row(fam).best_eu;
        if eu(ModelFamily::AgeFuzzySexCrisp) <= eu(ModelFamily::AgeCrispSexCrisp)
            && eu(ModelFamily::AgeCrispSexCrisp) <= eu(ModelFamily::AgeCrisp)
            && rows.iter().all(|r| r.best_eu <= eu(ModelFamily::Random))
        {
            ordered += 1;
        }
        if row(ModelFamily::AgeFuzzySexCrisp).runtime_seconds > row(ModelFamily::AgeCrispSexCrisp).runtime_seconds {
            fuzzy_slower += 1;
        }
    }
    outcome(ordered >= 8, format!("ordering held in {ordered}/10 (fuzzy slower than crisp in {fuzzy_slower}/10)"))
}

const COUNTRY_FILES: &[&str] = &[
    "population.csv",
    "population.json",
    "population.svg",
    "hill_numbers.csv",
    "hill_profile.csv",
    "families.csv",
    "grid_eu.csv",
    "grid_eu.svg",
    "calibration_trace.csv",
    "calibration.json",
    "calibration_report.json",
    "timings.json",
    "sensitivity.csv",
    "sensitivity.json",
    "sensitivity.svg",
    "edges.csv",
    "topology.csv",
    "topology.json",
    "node_metrics.csv",
    "degree_distribution.csv",
    "clustering_distribution.csv",
    "path_length_distribution.csv",
    "recreated_matrix.csv",
    "recreated_matrix.svg",
    "target_matrix.csv",
    "target_matrix.svg",
    "epidemic_trace.csv",
    "par_surface.csv",
    "par_groups.csv",
    "par_groups.svg",
    "epidemic.json",
];

const ROOT_FILES: &[&str] = &["summary.csv", "summary.json", "topology.csv", "hill_numbers.csv", "terminal_par.svg"];

fn end_to_end() -> Outcome {
    let out = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_dtcns"))
        .args(["--config"])
        .arg(fixtures().join("countries.toml"))
        .arg("--output")
        .arg(out.path())
        .arg("report-all")
        .env("RUST_LOG", "warn")
        .status()
        .unwrap();
    let elapsed = start.elapsed();
    if !status.success() {
        return outcome(false, format!("report-all exited with {status}"));
    }
    let mut missing = Vec::new();
    for f in ROOT_FILES {
        if !out.path().join(f).is_file() {
            missing.push(f.to_string());
        }
    }
    for c in COUNTRIES {
        for f in COUNTRY_FILES {
            let p = out.path().join(c.to_lowercase()).join(f);
            if !p.is_file() {
                missing.push(format!("{}/{f}", c.to_lowercase()));
            }
        }
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("summary.json")).unwrap()).unwrap();
    let row = |name: &str| summary.as_array().unwrap().iter().find(|r| r["country"] == name).unwrap().clone();
    let (fi, pl) = (row("Finland"), row("Poland"));
    let fake = (fi["fake_paths"].as_u64().unwrap(), pl["fake_paths"].as_u64().unwrap());
    let par = (fi["terminal_par"].as_f64().unwrap(), pl["terminal_par"].as_f64().unwrap());
    let edges = (fi["edges"].as_u64().unwrap(), pl["edges"].as_u64().unwrap());
    let pass = missing.is_empty() && elapsed < Duration::from_secs(300) && fake.0 > fake.1 && par.0 < par.1 && edges == (336, 793);
    outcome(
        pass,
        format!(
            "{elapsed:.1?}, missing {missing:?}, fake paths Finland {} vs Poland {}, terminal PaR {:.3} vs {:.3}",
            fake.0, fake.1, par.0, par.1
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 membership math", membership_math),
        ("2 reciprocity", reciprocity),
        ("3 formation", formation),
        ("4 topology oracles", topology_oracles),
        ("5 Hill numbers", hill_numbers),
        ("6 epidemic", epidemic),
        ("7 sensitivity", sensitivity),
        ("8 calibration recovery", calibration_recovery),
        ("9 model-family ordering", family_ordering),
        ("10 end-to-end", end_to_end),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let o = run();
        let line = format!("{} criterion {name}: {}\n", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        // bypass the test harness capture so the lines always show
        let _ = std::io::stderr().write_all(line.as_bytes());
        if !o.pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
