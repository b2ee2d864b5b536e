use std::path::Path;
use std::process::{Command, Output};

use essbn::asymptotics::{sweep, write_sweep_csv, SweepData};
use essbn::format::fmt12;
use essbn::{
    exhaustive_search, preset_network, render_report, run_experiment, sample, score_structure, Dataset,
    ExperimentConfig, GeneratorPreset, ReportFormat, ScoreSpec,
};

fn essbn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_essbn")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const ONE_BINARY: &str = r#"{"variables":[{"name":"x1","cardinality":2}],"parents":[[]]}"#;

#[test]
fn score_single_row_bdeu() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", "x1\n0\n");
    let net = write(dir.path(), "n.json", ONE_BINARY);
    let out = essbn(&["score", "--data", &data, "--network", &net, "--score", "bdeu", "--alpha", "1.0"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let first = text.lines().next().unwrap();
    assert_eq!(first, fmt12(0.5f64.ln()));
    assert!(first.starts_with("-0.693147"));

    let out = essbn(&["score", "--data", &data, "--network", &net, "--score", "bdeu", "--alpha", "1.0", "--log10"]);
    assert_eq!(stdout(&out).lines().next().unwrap(), fmt12(0.5f64.log10()));
}

#[test]
fn score_matches_library_and_decomposes() {
    let dir = tempfile::tempdir().unwrap();
    let net = preset_network(GeneratorPreset::G3);
    let data = sample(&net, 400, 17).unwrap();
    let path = write(dir.path(), "d.csv", &data.to_csv_string());
    let out = essbn(&["score", "--data", &path, "--network", "g3", "--score", "bdeu", "--alpha", "3", "--decompose"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    let lib = score_structure(&data, net.dag(), &ScoreSpec::bdeu(3.0)).unwrap();
    assert_eq!(lines[0], fmt12(lib.total));
    assert_eq!(lines[4], format!("x4\tx2,x3\t{}", fmt12(lib.families[3].log_score)));
    let value = |l: &str| l.split('\t').nth(1).unwrap().parse::<f64>().unwrap();
    let prior = value(lines[6]);
    let lik = value(lines[7]);
    assert!(lines[6].starts_with("prior\t") && lines[7].starts_with("likelihood\t"));
    assert!((prior + lik - lib.total).abs() < 1e-9 * lib.total.abs());

    for (kind, spec) in [("ml", ScoreSpec::ml()), ("bic", ScoreSpec::bic())] {
        let out = essbn(&["score", "--data", &path, "--network", "g3", "--score", kind]);
        let lib = score_structure(&data, net.dag(), &spec).unwrap().total;
        assert_eq!(stdout(&out).lines().next().unwrap(), fmt12(lib));
    }
}

#[test]
fn search_reports_full_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample(&preset_network(GeneratorPreset::G1), 1000, 2).unwrap();
    let path = write(dir.path(), "d.csv", &data.to_csv_string());
    let out_path = dir.path().join("r.json");
    let out = essbn(&[
        "search", "--data", &path, "--cards", "2,2,2,2,2", "--score", "nip-bic", "--alpha", "1", "--top", "3",
        "--out", out_path.to_str().unwrap(), "--jobs", "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["examined"], 29281);
    let lib = exhaustive_search(&data, &ScoreSpec::nip_bic(1.0)).unwrap();
    assert_eq!(v["best"], serde_json::json!(lib.best_dag.parent_sets()));
    assert_eq!(fmt12(v["score"].as_f64().unwrap()), fmt12(lib.best_score));
    assert_eq!(v["top"].as_array().unwrap().len(), 3);
    assert_eq!(v["top"][0]["dag"], v["best"]);
}

#[test]
fn sample_matches_library() {
    let out = essbn(&["sample", "--network", "g5", "--n", "250", "--seed", "9"]);
    assert!(out.status.success());
    let lib = sample(&preset_network(GeneratorPreset::G5), 250, 9).unwrap();
    assert_eq!(stdout(&out), lib.to_csv_string());
}

#[test]
fn asymptotics_matches_library() {
    let out = essbn(&["asymptotics", "--network", "g2", "--generate-n", "50,500", "--seed", "4", "--alphas", "0.1,10"]);
    assert!(out.status.success());
    let net = preset_network(GeneratorPreset::G2);
    let reports = sweep(
        net.dag(),
        SweepData::Generated { network: &net, n_grid: &[50, 500], seed: 4 },
        &[0.1f64, 10.0],
    )
    .unwrap();
    let mut expected = Vec::new();
    write_sweep_csv(&reports, &mut expected).unwrap();
    assert_eq!(out.stdout, expected);

    let dir = tempfile::tempdir().unwrap();
    let data = sample(&net, 120, 1).unwrap();
    let path = write(dir.path(), "d.csv", &data.to_csv_string());
    let out = essbn(&["asymptotics", "--network", "g2", "--data", &path, "--alphas", "1"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 2);
    assert!(stdout(&out).lines().nth(1).unwrap().starts_with("1,120,"));
}

#[test]
fn experiment_matches_library_at_any_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_text = r#"{"generator":"g2","sample_sizes":[50,100],"repetitions":3,"master_seed":12,
        "scores":[{"kind":"bdeu","alpha":1},{"kind":"nip-bic","alpha":0.1},{"kind":"ml"}]}"#;
    let cfg_path = write(dir.path(), "cfg.json", cfg_text);
    let report = run_experiment(&ExperimentConfig::from_json_str(cfg_text).unwrap()).unwrap();
    for (format, kind) in [("csv", ReportFormat::Csv), ("markdown", ReportFormat::Markdown)] {
        let mut outputs = Vec::new();
        for jobs in ["1", "4"] {
            let out_path = dir.path().join(format!("r{jobs}.{format}"));
            let out = essbn(&[
                "experiment", "--config", &cfg_path, "--out", out_path.to_str().unwrap(), "--format", format, "--jobs", jobs,
            ]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            outputs.push(std::fs::read_to_string(&out_path).unwrap());
            let log = std::fs::read_to_string(format!("{}.log", out_path.display())).unwrap();
            assert_eq!(log, report.run_log());
        }
        assert_eq!(outputs[0], outputs[1]);
        assert_eq!(outputs[0], render_report(&report, kind));
    }
}

#[test]
fn experiment_resolves_generator_file_next_to_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("net.json"), preset_network(GeneratorPreset::G1).to_json_string().unwrap()).unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"generator":"net.json","sample_sizes":[30],"repetitions":1,"scores":[{"kind":"bic"}]}"#);
    let out = essbn(&["experiment", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("generator,n,BIC +,BIC -,BIC O\nnet.json,30,"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", "x1\n0\n");
    let net = write(dir.path(), "n.json", ONE_BINARY);

    let missing_alpha = essbn(&["score", "--data", &data, "--network", &net, "--score", "bdeu"]);
    assert_eq!(missing_alpha.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing_alpha.stderr).contains("--alpha"));

    let unknown = essbn(&["score", "--data", &data, "--network", &net, "--score", "bic", "--bogus"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert_eq!(essbn(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(essbn(&["--help"]).status.code(), Some(0));
    assert_eq!(essbn(&["--version"]).status.code(), Some(0));

    let negative = essbn(&["score", "--data", &data, "--network", &net, "--score", "bdeu", "--alpha=-1"]);
    assert_eq!(negative.status.code(), Some(1));

    let bad_cell = write(dir.path(), "bad.csv", "x1\n7\n");
    assert_eq!(essbn(&["score", "--data", &bad_cell, "--network", &net, "--score", "bic"]).status.code(), Some(2));
    let absent = dir.path().join("absent.csv");
    let out = essbn(&["score", "--data", absent.to_str().unwrap(), "--network", &net, "--score", "bic"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));

    let seven = Dataset::new(vec![2; 7]).unwrap();
    let seven_path = write(dir.path(), "seven.csv", &seven.to_csv_string());
    let out = essbn(&["search", "--data", &seven_path, "--cards", "2,2,2,2,2,2,2", "--score", "bic"]);
    assert_eq!(out.status.code(), Some(3));
}
