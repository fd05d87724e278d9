use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mpsa::datagen::cartoon_image;
use mpsa::denoise::write_pgm;
use mpsa::metrics::ari;
use mpsa::mixture::deserialize;
use mpsa::Composition;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

const PLANAR_SPEC: &str = r#"
n = 1000
types = ["1,1", "2", "2"]
weights = [0.4, 0.3, 0.3]
mean_bound = 8.0
lambda1 = [1.0, 0.5, 0.1]
snr = 0.01
"#;

fn mpsa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpsa")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mpsa(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn exit_code(args: &[&str]) -> (i32, String) {
    let out = mpsa(args);
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let (header, rows) = csv_rows(path);
    let k = header.iter().position(|h| h == name).unwrap();
    rows.into_iter().map(|r| r[k].clone()).collect()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    /// Samples the planar three-component dataset.
    fn planar(&self, seed: &str) -> PathBuf {
        let spec = self.write("spec.toml", PLANAR_SPEC);
        let data = self.path(&format!("data{seed}.csv"));
        ok(&["generate", s(&spec), "--out", s(&data), "--seed", seed]);
        data
    }
}

#[test]
fn generate_writes_data_and_truth() {
    let ws = Workspace::new();
    let data = ws.planar("4");
    let (header, rows) = csv_rows(&data);
    assert_eq!(header, ["x1", "x2", "label"]);
    assert_eq!(rows.len(), 1000);
    let truth = deserialize(&std::fs::read_to_string(ws.path("data4.truth.json")).unwrap()).unwrap();
    assert_eq!(truth.kappa(), 13);

    let again = ws.path("again.csv");
    let spec = ws.path("spec.toml");
    ok(&["generate", s(&spec), "--out", s(&again), "--seed", "4"]);
    assert_eq!(std::fs::read(&data).unwrap(), std::fs::read(&again).unwrap());

    for (k, w) in [0.4f64, 0.3, 0.3].iter().enumerate() {
        let hits = rows.iter().filter(|r| r[2] == (k + 1).to_string()).count() as f64;
        let se = (1000.0 * w * (1.0 - w)).sqrt();
        assert!((hits - 1000.0 * w).abs() <= 4.0 * se, "label {}: {hits}", k + 1);
    }
}

#[test]
fn generate_rejects_bad_specs() {
    let ws = Workspace::new();
    let spec = ws.write("bad.toml", &PLANAR_SPEC.replace("mean_bound", "mean_bonud"));
    let (code, err) = exit_code(&["generate", s(&spec), "--out", s(&ws.path("d.csv"))]);
    assert_eq!(code, 1);
    assert!(err.contains("mean_bonud"), "{err}");
    assert!(!ws.path("d.csv").exists());
}

#[test]
fn fit_with_spherical_preset_and_trace() {
    let ws = Workspace::new();
    let data = ws.planar("1");
    let model = ws.path("model.json");
    let trace = ws.path("trace.csv");
    ok(&["fit", s(&data), "-c", "3", "--types", "p", "--out", s(&model), "--trace", s(&trace)]);
    let fitted = deserialize(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert!(fitted.compositions().iter().all(|g| *g == Composition::spherical(2)));

    ok(&["fit", s(&data), "-c", "3", "--out", s(&model), "--trace", s(&trace), "--seed", "1"]);
    let pll: Vec<f64> = column(&trace, "penalized_ll").iter().map(|v| v.parse().unwrap()).collect();
    assert!(!pll.is_empty());
    assert!(pll.windows(2).all(|w| w[1] >= w[0] - 1e-8));
    let (header, _) = csv_rows(&trace);
    assert_eq!(header, ["iteration", "penalized_ll", "kappa", "compositions"]);
}

#[test]
fn config_file_and_flag_precedence() {
    let ws = Workspace::new();
    let data = ws.planar("2");
    let config = ws.write("run.toml", "[fit]\ncomponents = 3\ntypes = \"full\"\nmax_iter = 5\n");
    let model = ws.path("m.json");
    ok(&["fit", s(&data), "--config", s(&config), "--out", s(&model)]);
    let fitted = deserialize(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(fitted.n_components(), 3);
    assert!(fitted.compositions().iter().all(|g| *g == Composition::full(2)));

    ok(&["fit", s(&data), "--config", s(&config), "--types", "spherical", "-c", "2", "--out", s(&model)]);
    let fitted = deserialize(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(fitted.n_components(), 2);
    assert!(fitted.compositions().iter().all(|g| *g == Composition::spherical(2)));

    let bad = ws.write("bad.toml", "[fit]\ncomponents = 3\nstrategies = \"h\"\n");
    let (code, err) = exit_code(&["fit", s(&data), "--config", s(&bad), "--out", s(&model)]);
    assert_eq!(code, 1);
    assert!(err.contains("strategies"), "{err}");
}

#[test]
fn exit_codes() {
    let ws = Workspace::new();
    let out = ws.path("m.json");
    assert_eq!(exit_code(&["fit"]).0, 1);
    assert_eq!(exit_code(&["frobnicate"]).0, 1);
    assert_eq!(exit_code(&["--help"]).0, 0);
    assert_eq!(exit_code(&["fit", s(&ws.path("missing.csv")), "-c", "2", "--out", s(&out)]).0, 2);

    let broken = ws.write("broken.csv", "x1,x2\n1,2\n3,4\n5,nan?\n");
    let (code, err) = exit_code(&["fit", s(&broken), "-c", "1", "--out", s(&out)]);
    assert_eq!(code, 2);
    assert!(err.contains("line 4"), "{err}");

    let data = ws.planar("3");
    assert_eq!(exit_code(&["fit", s(&data), "-c", "2", "--alpha", "much", "--out", s(&out)]).0, 1);
    assert_eq!(exit_code(&["fit", s(&data), "-c", "2", "--strategy", "sideways", "--out", s(&out)]).0, 1);
    assert_eq!(exit_code(&["fit", s(&data), "-c", "2", "--types", "1,2", "--out", s(&out)]).0, 1);

    let flat = ws.write("flat.csv", "x1\n1\n1\n1\n1\n");
    assert_eq!(exit_code(&["fit", s(&flat), "-c", "2", "--out", s(&out)]).0, 2);
    assert!(!out.exists());
}

#[test]
fn cluster_reports_ari() {
    let ws = Workspace::new();
    let spec = ws.write(
        "sep.toml",
        "n = 300\ntypes = [\"3\", \"3\"]\nmeans = [[0.0, 0.0, 0.0], [50.0, 50.0, 50.0]]\nlambda1 = 1.0\nsnr = 1.0\n",
    );
    let data = ws.path("sep.csv");
    let model = ws.path("sep.json");
    let labels = ws.path("labels.csv");
    ok(&["generate", s(&spec), "--out", s(&data), "--seed", "5"]);
    ok(&["fit", s(&data), "-c", "2", "--out", s(&model)]);
    let stdout = ok(&["cluster", s(&data), "--model", s(&model), "--out", s(&labels)]);
    assert_eq!(stdout.trim(), "ARI 1");
    assert_eq!(column(&labels, "label").len(), 300);

    let planar = ws.planar("6");
    ok(&["fit", s(&planar), "-c", "3", "--out", s(&model)]);
    let stdout = ok(&["cluster", s(&planar), "--model", s(&model), "--out", s(&labels), "--truth", s(&planar)]);
    let printed: f64 = stdout.trim().strip_prefix("ARI ").unwrap().parse().unwrap();
    let parse = |v: Vec<String>| v.iter().map(|l| l.parse::<usize>().unwrap()).collect::<Vec<_>>();
    let expected = ari(&parse(column(&planar, "label")), &parse(column(&labels, "label"))).unwrap();
    assert_eq!(printed, expected);

    let wrong_dim = ws.write("wide.csv", "x1,x2,x3\n1,2,3\n");
    assert_eq!(exit_code(&["cluster", s(&wrong_dim), "--model", s(&model), "--out", s(&labels)]).0, 2);
}

#[test]
fn denoise_end_to_end() {
    let ws = Workspace::new();
    let clean = ws.path("clean.pgm");
    write_pgm(&cartoon_image(40, 40, &mut ChaCha8Rng::seed_from_u64(3)), &clean).unwrap();
    let (out, report, map) = (ws.path("out.pgm"), ws.path("report.json"), ws.path("map.csv"));
    let args = [
        "denoise",
        s(&clean),
        "--add-noise",
        "0.1",
        "-s",
        "4",
        "-c",
        "2",
        "--out",
        s(&out),
        "--report",
        s(&report),
        "--patch-map",
        s(&map),
    ];
    ok(&args);
    let text = std::fs::read_to_string(&report).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(doc["psnr"].as_f64().unwrap() > doc["noisy_psnr"].as_f64().unwrap());
    assert_eq!(doc["compositions"].as_array().unwrap().len(), 2);
    assert!(doc["sigma2_estimated"].as_bool().unwrap());
    assert_eq!(column(&map, "kappa").len(), 37 * 37);

    let first = std::fs::read(&out).unwrap();
    ok(&args);
    assert_eq!(std::fs::read(&out).unwrap(), first);

    let (code, err) = exit_code(&["denoise", s(&clean), "--supervised", "--out", s(&out)]);
    assert_eq!(code, 1);
    assert!(err.contains("sigma"), "{err}");
    assert_eq!(exit_code(&["denoise", s(&clean), "--method", "hdmi", "--out", s(&out)]).0, 1);

    let garbage = ws.write("bad.pgm", "P5\n4 4\n0\n");
    assert_eq!(exit_code(&["denoise", s(&garbage), "--out", s(&out)]).0, 2);
}

#[test]
fn benchmark_single_repetition_has_zero_spread() {
    let ws = Workspace::new();
    let out = ws.path("bench.csv");
    ok(&["benchmark", "clustering-mpsa10", "-r", "1", "--models", "mpsa-h,gmm-s", "--out", s(&out)]);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header[..4], ["suite", "model", "repetitions", "penalized_ll_mean"]);
    assert_eq!(rows.len(), 2);
    let std_col = header.iter().position(|h| h == "penalized_ll_std").unwrap();
    assert!(rows.iter().all(|r| r[std_col] == "0"));
    assert_eq!(exit_code(&["benchmark", "nonsense", "--out", s(&out)]).0, 1);
}

#[test]
fn benchmark_mpsa10_ordering() {
    let ws = Workspace::new();
    let out = ws.path("bench.csv");
    ok(&["benchmark", "mpsa10", "--models", "mpsa-h,gmm-f,gmm-s", "--out", s(&out)]);
    let means: Vec<f64> = column(&out, "penalized_ll_mean").iter().map(|v| v.parse().unwrap()).collect();
    assert!(means[0] > means[1] && means[0] > means[2], "{means:?}");
}

#[test]
fn benchmark_csv_suite_uses_folds() {
    let ws = Workspace::new();
    let data = ws.planar("7");
    let out = ws.path("bench.csv");
    ok(&["benchmark", "csv", "--data", s(&data), "-r", "5", "--models", "mpsa-h", "--out", s(&out)]);
    let (_, rows) = csv_rows(&out);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][2], "5");
    assert_eq!(exit_code(&["benchmark", "csv", "--out", s(&out)]).0, 1);
}
