use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use modecast_cli::report::{parse_modes, parse_predictions};
use modecast_cli::{load_csv, Manifest, RunConfig};
use modecast_core::neural::from_checkpoint_str;
use modecast_core::pipeline::{aggregate, synthetic_benchmark, PipelineConfig};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn modecast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modecast"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("MODECAST_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fixtures_match_their_sources() {
    let bench = load_csv(&fixture("synthetic_benchmark.csv")).unwrap();
    assert_eq!(bench.values(), synthetic_benchmark().values());
    let cfg = RunConfig::load(&fixture("benchmark.toml")).unwrap();
    assert_eq!(cfg.to_pipeline().unwrap(), PipelineConfig::benchmark());
    let reference = RunConfig::load(&fixture("reference.toml")).unwrap();
    assert_eq!(reference, RunConfig::default());
    let cpi = load_csv(&fixture("germany_cpi_style.csv")).unwrap();
    assert_eq!(cpi.name(), "CPALTT01DEM661S");
    assert_eq!(cpi.len(), 768);
}

#[test]
fn decompose_cpi_into_ten_ascending_modes() {
    let out = tempfile::tempdir().unwrap();
    let o = modecast(&["decompose", "-i", s(&fixture("germany_cpi_style.csv")), "--modes", "10", "-o", s(out.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let modes = parse_modes(&std::fs::read_to_string(out.path().join("modes.csv")).unwrap()).unwrap();
    assert_eq!(modes.len(), 10);
    assert!(modes.iter().all(|m| m.len() == 768));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("modes.json")).unwrap()).unwrap();
    let omegas: Vec<f64> = meta["omegas"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(omegas.len(), 10);
    assert!(omegas.windows(2).all(|w| w[0] <= w[1]), "{omegas:?}");
    assert!(out.path().join("manifest.json").exists());
}

#[test]
fn forecast_columns_sum_exactly_and_rerun_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (first, second) = (dir.path().join("a"), dir.path().join("b"));
    let input = dir.path().join("cpi.csv");
    std::fs::copy(fixture("germany_cpi_style.csv"), &input).unwrap();
    let o = modecast(&[
        "forecast", "-i", s(&input), "-c", s(&fixture("smoke.toml")), "--steps", "8", "-o", s(&first),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let text = std::fs::read_to_string(first.join("predictions.csv")).unwrap();
    assert!(text.starts_with("step,actual,predicted,mode_1,mode_2,mode_3\n"));
    let t = parse_predictions(&text).unwrap();
    assert_eq!(t.predicted.len(), 8);
    for s in 0..8 {
        let row: Vec<f64> = t.modes.iter().map(|m| m[s]).collect();
        assert_eq!(aggregate(&row).to_bits(), t.predicted[s].to_bits(), "step {s}");
    }
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(first.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics[0]["model"], "VMD-GARCH-LSTM");
    assert_eq!(metrics[0]["horizon"], 8);

    let manifest = first.join("manifest.json");
    let m = Manifest::load(&manifest).unwrap();
    assert_eq!(m.seeds.as_ref().unwrap().training, 0);
    assert!(m.outputs.iter().any(|f| f.name == "predictions.csv"));
    let o = modecast(&["rerun", "--manifest", s(&manifest), "-o", s(&second)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["predictions.csv", "metrics.json", "metrics.txt", "manifest.json"] {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(second.join(f)).unwrap(), "{f}");
    }

    // A changed input is refused rather than silently rerun.
    let mut text = std::fs::read_to_string(&input).unwrap();
    text.push_str("2024-01-01,130.0\n");
    std::fs::write(&input, text).unwrap();
    let o = modecast(&["rerun", "--manifest", s(&manifest), "-o", s(&dir.path().join("c"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("changed"));
}

#[test]
fn compare_writes_nine_rows_per_horizon() {
    let out = tempfile::tempdir().unwrap();
    let o = modecast(&[
        "compare", "-i", s(&fixture("germany_cpi_style.csv")), "-c", s(&fixture("smoke.toml")),
        "--horizons", "10", "-o", s(out.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), 9);
    let mut models: Vec<&str> = rows.iter().map(|r| r["model"].as_str().unwrap()).collect();
    models.sort();
    models.dedup();
    assert_eq!(models.len(), 9);
    for r in &rows {
        assert_eq!(r["horizon"], 10);
        assert!(r["rmse"].as_f64().unwrap() >= r["mae"].as_f64().unwrap());
        assert!(r["mape_percent"].as_f64().is_some());
    }
    let table = String::from_utf8_lossy(&o.stdout);
    assert_eq!(table.lines().filter(|l| l.contains("LSTM") || l.contains("GRU") || l.contains("RNN")).count(), 9);
    assert!(out.path().join("predictions/VMD-GARCH-GRU.csv").exists());
}

#[test]
fn garch_fit_train_and_plot_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixture("germany_cpi_style.csv");
    let smoke = fixture("smoke.toml");

    let g = dir.path().join("garch");
    let o = modecast(&["garch-fit", "-i", s(&input), "-c", s(&smoke), "-o", s(&g)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for k in 1..=3 {
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(g.join(format!("garch/mode_{k}.json"))).unwrap()).unwrap();
        assert!(v["volatility"]["method"].is_string());
        let sigma = std::fs::read_to_string(g.join(format!("garch/sigma_mode_{k}.csv"))).unwrap();
        assert!(sigma.starts_with("t,sigma\n"));
        // 85% of 768 training points.
        assert_eq!(sigma.lines().count(), 1 + 652);
    }

    let t = dir.path().join("train");
    let o = modecast(&["train", "-i", s(&input), "-c", s(&smoke), "--variant", "vmd_nn", "--cell", "gru", "-o", s(&t)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for k in 1..=3 {
        let text = std::fs::read_to_string(t.join(format!("checkpoints/mode_{k}.ckpt"))).unwrap();
        let net = from_checkpoint_str(&text).unwrap();
        assert_eq!(net.config().hidden, 4);
    }
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(t.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["model"], "VMD-GRU");

    let f = dir.path().join("fc");
    let o = modecast(&["forecast", "-i", s(&input), "-c", s(&smoke), "--steps", "5", "--variant", "nn_only", "-o", s(&f)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let p = dir.path().join("plots");
    let o = modecast(&[
        "plot", "--predictions", s(&f.join("predictions.csv")), "--modes", s(&g.join("modes.csv")), "-o", s(&p),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let forecast = std::fs::read_to_string(p.join("forecast.svg")).unwrap();
    assert_eq!(forecast.matches("<polyline").count(), 2);
    assert_eq!(forecast.matches(r#"data-points="5""#).count(), 2);
    let modes = std::fs::read_to_string(p.join("modes.svg")).unwrap();
    assert_eq!(modes.matches("<polyline").count(), 3);
    assert_eq!(modes.matches(r#"data-points="768""#).count(), 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");

    // Usage.
    assert_eq!(modecast(&["decompose"]).status.code(), Some(1));
    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(&bad_cfg, "[vmd]\nalpah = 3.0\n").unwrap();
    let o = modecast(&["decompose", "-i", s(&fixture("germany_cpi_style.csv")), "-c", s(&bad_cfg), "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("vmd.alpah"), "{}", stderr(&o));
    let o = modecast(&["decompose", "-i", s(&fixture("germany_cpi_style.csv")), "--modes", "0", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("modes"));

    // Data.
    let o = modecast(&["decompose", "-i", s(&dir.path().join("missing.csv")), "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let bad_csv = dir.path().join("bad.csv");
    std::fs::write(&bad_csv, "date,value\n1970-01-01,1\n1970-02-01,abc\n").unwrap();
    let o = modecast(&["decompose", "-i", s(&bad_csv), "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    let o = modecast(&[
        "forecast", "-i", s(&fixture("germany_cpi_style.csv")), "-c", s(&fixture("smoke.toml")),
        "--steps", "500", "-o", s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("500"));

    // Help.
    assert_eq!(modecast(&["--help"]).status.code(), Some(0));
}

#[test]
fn fetch_honours_cache_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let (env_dir, flag_dir) = (dir.path().join("env"), dir.path().join("flag"));
    std::fs::create_dir_all(&env_dir).unwrap();
    std::fs::copy(fixture("germany_cpi_style.csv"), env_dir.join("CPALTT01DEM661S.csv")).unwrap();
    let unreachable = "http://127.0.0.1:9/graph/fredgraph.csv";

    // Cached in the environment directory: no request is made.
    let o = Command::new(env!("CARGO_BIN_EXE_modecast"))
        .args(["fetch", "--series", "CPALTT01DEM661S", "--endpoint", unreachable])
        .env("MODECAST_CACHE_DIR", &env_dir)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("(cached)"));

    // The flag wins over the environment; nothing is cached there, so the
    // unreachable endpoint is hit and reported.
    let o = Command::new(env!("CARGO_BIN_EXE_modecast"))
        .args(["fetch", "--series", "CPALTT01DEM661S", "--endpoint", unreachable, "--cache-dir", s(&flag_dir), "--timeout-secs", "2"])
        .env("MODECAST_CACHE_DIR", &env_dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot reach"), "{}", stderr(&o));
}
