use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn dtcns(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dtcns"));
    cmd.args(args).env_remove("DTCNS_OUTPUT").env("RUST_LOG", "warn");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture_config() -> String {
    fixtures().join("countries.toml").display().to_string()
}

/// A one-country config in `dir` using the given pyramid and Belgium's matrix.
fn single_country(dir: &Path, pyramid: &Path) -> PathBuf {
    let cfg = dir.join("run.toml");
    let text = format!(
        "[[country]]\nname = \"Test\"\npyramid = {:?}\nmatrix = {:?}\n",
        pyramid.display().to_string(),
        fixtures().join("belgium_matrix.csv").display().to_string()
    );
    fs::write(&cfg, text).unwrap();
    cfg
}

fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    files
}

#[test]
fn uniform_pyramid_gives_two_equally_likely_sexes() {
    let dir = tempfile::tempdir().unwrap();
    let pyramid = dir.path().join("uniform.csv");
    let mut text = String::from("country,age_lo,age_hi,sex,share\n");
    for d in 0..9 {
        for sex in ["female", "male"] {
            text.push_str(&format!("Test,{},{},{sex},{}\n", d * 10, d * 10 + 10, 1.0 / 18.0));
        }
    }
    fs::write(&pyramid, text).unwrap();
    let cfg = single_country(dir.path(), &pyramid);
    let out = dir.path().join("out");
    let o = run(dtcns(&["-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(), "population"]).env("RUST_LOG", "error"));
    assert!(o.status.success(), "{}", stderr(&o));

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("test/population.json")).unwrap()).unwrap();
    let sex_q2 = report["hill"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["grouping"] == "sex" && r["q"] == 2.0)
        .unwrap();
    assert_eq!(sex_q2["hill"].as_f64().unwrap(), 2.0);
}

#[test]
fn missing_input_fails_before_writing_anything() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = single_country(dir.path(), &dir.path().join("nowhere.csv"));
    let out = dir.path().join("out");
    let o = run(&mut dtcns(&["-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(), "population"]));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere.csv"));
    assert!(!out.exists());
}

#[test]
fn malformed_pyramid_is_a_parse_error_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let pyramid = dir.path().join("bad.csv");
    fs::write(&pyramid, "country,age_lo,age_hi,sex,share\nTest,0,10,female,0.5\nTest,0,10,male,lots\n").unwrap();
    let cfg = single_country(dir.path(), &pyramid);
    let out = dir.path().join("out");
    let o = run(&mut dtcns(&["-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(), "population"]));
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn exit_codes_separate_config_parse_and_runtime_failures() {
    let dir = tempfile::tempdir().unwrap();

    let broken = dir.path().join("broken.toml");
    fs::write(&broken, "[defaults\nn = 90\n").unwrap();
    let o = run(&mut dtcns(&["-c", broken.to_str().unwrap(), "population"]));
    assert_eq!(o.status.code(), Some(3));

    let o = run(&mut dtcns(&["-c", &fixture_config(), "--set", "no_such_key=1", "population"]));
    assert_eq!(o.status.code(), Some(2));

    let o = run(&mut dtcns(&["-c", &fixture_config(), "--set", "edge_budget=5000", "simulate"]));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    // the output root is a regular file, so creating country directories fails
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = run(&mut dtcns(&["-c", &fixture_config(), "-o", blocker.to_str().unwrap(), "--country", "Italy", "population"]));
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn no_encounters_give_an_empty_network_and_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&mut dtcns(&[
        "-c",
        &fixture_config(),
        "-o",
        dir.path().to_str().unwrap(),
        "--country",
        "Luxembourg",
        "--set",
        "encounter_rate=0",
        "simulate",
    ]));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("no edges"), "{}", stderr(&o));
    let edges = fs::read_to_string(dir.path().join("luxembourg/edges.csv")).unwrap();
    assert_eq!(edges.lines().count(), 1);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("luxembourg/topology.json")).unwrap()).unwrap();
    assert_eq!(report["topology"]["edges"], 0);
    assert_eq!(report["topology"]["fake_paths"], 90 * 89 / 2);
}

#[test]
fn belgium_budget_gives_the_reported_average_degree() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&mut dtcns(&["-c", &fixture_config(), "-o", dir.path().to_str().unwrap(), "--country", "Belgium", "simulate"]));
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("belgium/topology.json")).unwrap()).unwrap();
    assert_eq!(report["topology"]["edges"], 614);
    let mean = report["topology"]["degree"]["mean"].as_f64().unwrap();
    assert!((mean - 13.64).abs() < 0.005, "{mean}");
}

#[test]
fn belgium_is_the_most_diverse_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&mut dtcns(&["-c", &fixture_config(), "-o", dir.path().to_str().unwrap(), "population"]));
    assert!(o.status.success(), "{}", stderr(&o));
    let hill = |country: &str, q: f64| -> f64 {
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(country).join("population.json")).unwrap()).unwrap();
        report["hill"]
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["grouping"] == "age_sex" && r["q"] == q)
            .unwrap()["hill"]
            .as_f64()
            .unwrap()
    };
    for q in [1.0, 2.0] {
        let belgium = hill("belgium", q);
        for other in ["finland", "germany", "italy", "luxembourg", "poland"] {
            assert!(belgium > hill(other, q), "q={q}: belgium {belgium} vs {other} {}", hill(other, q));
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let light = [
        "--set",
        "budget=6",
        "--set",
        "grid_budget=3",
        "--set",
        "value_counts=[1, 2]",
        "--set",
        "difference_counts=[3, 4]",
        "--set",
        "stars=2",
        "--set",
        "top=3",
    ];
    let outputs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let (cfg, out) = (fixture_config(), dir.path().display().to_string());
            let mut args = vec!["-c", &cfg, "-o", &out, "--country", "Germany"];
            args.extend(light);
            for sub in ["population", "calibrate", "simulate", "epidemic"] {
                let mut a = args.clone();
                a.push(sub);
                let o = run(&mut dtcns(&a));
                assert!(o.status.success(), "{sub}: {}", stderr(&o));
            }
            let mut files = read_tree(dir.path());
            assert!(files.remove(Path::new("germany/timings.json")).is_some());
            files
        })
        .collect();
    assert_eq!(outputs[0].keys().collect::<Vec<_>>(), outputs[1].keys().collect::<Vec<_>>());
    for (name, bytes) in &outputs[0] {
        assert!(bytes == &outputs[1][name], "{} differs between runs", name.display());
    }
    assert!(outputs[0].contains_key(Path::new("germany/calibration.json")));
}

#[test]
fn output_root_can_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dtcns(&["-c", &fixture_config(), "--country", "Poland", "population"]).env("DTCNS_OUTPUT", dir.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("poland/population.csv").is_file());
}
