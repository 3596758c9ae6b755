use std::path::Path;
use std::process::Command;

use esds_cli::config::RunConfig;
use esds_cli::protocol::{load_motion, run_corpus, run_motion, CorpusSummary};
use esds_cli::synth::{gen_synthetic, Shape};

fn esds() -> Command {
    Command::new(env!("CARGO_BIN_EXE_esds"))
}

fn synth(dir: &Path, shapes: &[Shape]) {
    for &s in shapes {
        gen_synthetic(&dir.join(s.name()), s, 3, 400, 2.0, 1).unwrap();
    }
}

#[test]
fn synth_then_run_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let out = tmp.path().join("out");
    let status = esds()
        .args(["synth", "--shape", "line,arc", "--demos", "3", "--samples", "300", "-o"])
        .arg(&corpus)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(corpus.join("arc/corpus.json").is_file());

    let status =
        esds().args(["run", "--jobs", "1", "--k", "2,3", "--corpus"]).arg(&corpus).arg("-o").arg(&out).output().unwrap().status;
    assert!(status.success());
    for f in ["report.json", "report.csv", "plots/arc.svg", "plots/line.svg", "rollouts/arc_demo1.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["motions"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.starts_with("motion,sea,vrmse,training_time,k_selected,converged"));
    assert!(csv.lines().any(|l| l.starts_with("mean,")));
}

#[test]
fn sweep_writes_one_row_per_cap() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &[Shape::Arc]);
    let out = tmp.path().join("sweep");
    let status = esds()
        .args(["sweep", "--k", "3", "--sbar", "0,10,1000", "--corpus"])
        .arg(tmp.path().join("arc"))
        .arg("-o")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn bad_input_exits_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let status =
        esds().args(["run", "--corpus"]).arg(tmp.path().join("nowhere")).arg("-o").arg(tmp.path()).output().unwrap().status;
    assert_eq!(status.code(), Some(2));
    let status = esds().args(["sweep", "--sbar", "auto", "--corpus"]).arg(tmp.path()).output().unwrap().status;
    assert_eq!(status.code(), Some(2));
}

#[test]
fn broken_motion_is_isolated_and_exits_with_code_one() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &[Shape::Line]);
    let bad = tmp.path().join("bad");
    std::fs::create_dir(&bad).unwrap();
    std::fs::write(bad.join("corpus.json"), r#"{"name":"bad","dim":2,"goal":[0,0],"files":["gone.csv"]}"#).unwrap();
    let out = tmp.path().join("out");
    let status =
        esds().args(["run", "--no-plots", "--k", "2", "--corpus"]).arg(tmp.path()).arg("-o").arg(&out).output().unwrap().status;
    assert_eq!(status.code(), Some(1));
    assert!(out.join("report.json").is_file());
}

#[test]
fn line_corpus_is_reproduced_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &[Shape::Line]);
    let config = RunConfig { corpus: tmp.path().to_path_buf(), k_candidates: vec![1], ..RunConfig::default() };
    let outcomes = run_corpus(&config).unwrap();
    let summary = CorpusSummary::from_outcomes(&outcomes);
    assert!(summary.failures.is_empty());
    let report = &summary.motions[0];
    assert_eq!(report.k_selected, 1);
    assert!(report.sea < 1e-6, "{}", report.sea);
    assert!(report.vrmse < 1e-6, "{}", report.vrmse);
    assert!(report.all_converged());
}

#[test]
fn mixtures_beat_a_single_component_on_the_s_curve() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &[Shape::Scurve]);
    let dir = tmp.path().join("scurve");
    let sea = |k: usize| {
        let config = RunConfig { corpus: dir.clone(), k_candidates: vec![k], ..RunConfig::default() };
        run_motion(&config, load_motion(&config, &dir).unwrap()).unwrap().report.sea
    };
    let (one, five) = (sea(1), sea(5));
    assert!(five < one, "K=5 {five} vs K=1 {one}");
}

#[test]
fn aggregate_spans_the_motions() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), &[Shape::Line, Shape::Arc]);
    let config = RunConfig { corpus: tmp.path().to_path_buf(), k_candidates: vec![3], ..RunConfig::default() };
    let summary = CorpusSummary::from_outcomes(&run_corpus(&config).unwrap());
    let agg = summary.aggregate.unwrap();
    let seas: Vec<f64> = summary.motions.iter().map(|m| m.sea).collect();
    assert_eq!(agg.sea.min, seas.iter().copied().fold(f64::INFINITY, f64::min));
    assert_eq!(agg.sea.max, seas.iter().copied().fold(0.0, f64::max));
    assert!((agg.sea.mean - seas.iter().sum::<f64>() / 2.0).abs() < 1e-9);
}
