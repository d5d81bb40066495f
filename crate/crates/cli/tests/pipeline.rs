use std::path::{Path, PathBuf};
use std::process::Command;

use romes_cli::commands::{self, TrainValidateReport, MODEL_FILE, REPORT_FILE};
use romes_cli::manifest::RunManifest;
use romes_cli::{CliError, ExperimentConfig};
use tempfile::TempDir;

const SMALL: &str = r#"
schema_version = 1
seed = 3

[mesh]
divisions = 9

[greedy]
candidates = 20
tol = 0.5
max_dim = 20

[duals]
tolerances = [1.0, 0.1]
max_dim = 20
points = [{ x = 0.3333333333333333, y = 0.3333333333333333 }, { node = 40 }]

[[samples]]
name = "main"
total = 60
train = 20

[[samples]]
name = "dual"
total = 40
train = 20
validation = 10

[[surrogates]]
name = "energy"
indicator = "log-residual-euclid"
error = "energy"
transformation = "log"

[[surrogates]]
name = "compliant-mf"
indicator = "system-inputs"
error = "compliant-output"
transformation = "identity"

[[surrogates]]
name = "x1-dwr"
table = "dual"
indicator = "dual-weighted-residual"
output = "x1"
level = 0.1
error = "output"
transformation = "identity"
regressor = "rvm"

[validation]
omegas = [0.5, 0.9]
rigor_levels = [0.5, 0.9]
sweep = [10, 20]
histogram_bins = 8

[regression]
gp_starts = 2
gp_max_iter = 200
rvm_max_order = 2
rvm_max_sweeps = 200
"#;

fn small() -> ExperimentConfig {
    ExperimentConfig::from_toml(SMALL).unwrap()
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

fn offline_and_sample(config: &ExperimentConfig) -> TempDir {
    let dir = TempDir::new().unwrap();
    commands::offline(config, dir.path()).unwrap();
    commands::sample(config, dir.path(), None).unwrap();
    dir
}

fn with_sweep(config: &ExperimentConfig, sweep: &[usize]) -> ExperimentConfig {
    let mut c = config.clone();
    c.validation.sweep = sweep.to_vec();
    c
}

fn romes(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_romes")).args(args).env("RUST_LOG", "error").output().unwrap()
}

#[test]
fn offline_manifest_records_basis_dimensions() {
    let config = small();
    let dir = TempDir::new().unwrap();
    let m = commands::offline(&config, dir.path()).unwrap();
    let on_disk = RunManifest::read(&RunManifest::path(dir.path(), "offline")).unwrap();
    assert_eq!(m, on_disk);
    assert_eq!(m.stage, "offline");
    assert_eq!(m.seed, 3);
    assert_eq!(m.config_hash, config.hash());
    assert_eq!(m.software_version, env!("CARGO_PKG_VERSION"));
    let p = m.summary["primal"]["dim"].as_u64().unwrap();
    assert!((1..=20).contains(&p));
    assert_eq!(m.summary["duals"].as_array().unwrap().len(), 4);

    let model = romes::ReducedModel::from_json(&String::from_utf8(read(dir.path().join(MODEL_FILE))).unwrap()).unwrap();
    assert_eq!(model.dim() as u64, p);
    assert_eq!(model.mesh_divisions, Some(9));
    let history = String::from_utf8(read(dir.path().join("greedy_history.csv"))).unwrap();
    assert_eq!(history.lines().filter(|l| l.starts_with("primal,")).count() as u64, p);
}

#[test]
fn rerun_with_same_config_is_bitwise_identical() {
    let config = small();
    let a = offline_and_sample(&config);
    let b = offline_and_sample(&config);
    for name in [MODEL_FILE, "greedy_history.csv", "samples_main.csv", "samples_dual.csv"] {
        assert!(read(a.path().join(name)) == read(b.path().join(name)), "{name} differs");
    }
    let ma = RunManifest::read(&RunManifest::path(a.path(), "sample")).unwrap();
    let mb = RunManifest::read(&RunManifest::path(b.path(), "sample")).unwrap();
    assert_eq!(ma.config_hash, mb.config_hash);
    assert_eq!(ma.summary["model_sha256"], mb.summary["model_sha256"]);
    assert_eq!(ma.summary["sets"], mb.summary["sets"]);
}

#[test]
fn seed_override_changes_candidates_and_hash() {
    let config = small();
    let mut other = config.clone();
    other.seed = 4;
    assert_ne!(config.hash(), other.hash());
    let a = commands::draw_points(&config, 5, config.seed);
    let b = commands::draw_points(&other, 5, other.seed);
    assert_ne!(a, b);
}

#[test]
fn sample_sets_respect_split_sizes_and_zero_rows() {
    let mut config = small();
    config.samples.push(romes_cli::config::SampleSetConfig { name: "empty".into(), total: 0, train: 0, validation: None });
    let dir = offline_and_sample(&config);
    let table = |name: &str| {
        let f = std::fs::File::open(dir.path().join(format!("samples_{name}.csv"))).unwrap();
        romes::surrogate::SampleTable::read_csv(f).unwrap()
    };
    use romes::surrogate::Split;
    let main = table("main");
    assert_eq!(main.indices(Split::Train).len(), 20);
    assert_eq!(main.indices(Split::Validation).len(), 40);
    assert!(main.split_is_disjoint());
    let dual = table("dual");
    assert_eq!(dual.rows.len(), 30);
    assert_eq!(dual.dual_keys.len(), 4);

    let text = String::from_utf8(read(dir.path().join("samples_empty.csv"))).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("mu_1,"));
    assert!(table("empty").rows.is_empty());
}

#[test]
fn manifests_list_existing_artifacts() {
    let config = small();
    let dir = offline_and_sample(&config);
    commands::train_validate(&config, dir.path(), None).unwrap();
    commands::report(&config, dir.path(), &[]).unwrap();
    for stage in ["offline", "sample", "train-validate", "report"] {
        let m = RunManifest::read(&RunManifest::path(dir.path(), stage)).unwrap();
        assert_eq!(m.stage, stage);
        assert!(!m.artifacts.is_empty());
        assert!(!m.timings.is_empty());
        for a in &m.artifacts {
            assert!(dir.path().join(a).is_file(), "{stage}: missing {a}");
        }
    }
    let tv = RunManifest::read(&RunManifest::path(dir.path(), "train-validate")).unwrap();
    for name in ["energy", "compliant-mf", "x1-dwr"] {
        for prefix in ["curves", "coverage", "histogram"] {
            assert!(tv.artifacts.contains(&format!("{prefix}_{name}.csv")));
        }
        assert!(tv.artifacts.contains(&format!("surrogate_{name}.json")));
    }
}

#[test]
fn train_validate_reads_only_sample_tables() {
    let config = small();
    let stage1 = offline_and_sample(&config);
    let tables = TempDir::new().unwrap();
    for name in ["samples_main.csv", "samples_dual.csv"] {
        std::fs::copy(stage1.path().join(name), tables.path().join(name)).unwrap();
    }
    drop(stage1);
    let out = TempDir::new().unwrap();
    commands::train_validate(&config, out.path(), Some(tables.path())).unwrap();
    let report = TrainValidateReport::read(&out.path().join(REPORT_FILE)).unwrap();
    assert_eq!(report.entries.len(), 3);
    assert!(report.skipped.is_empty(), "{:?}", report.skipped);
    for e in &report.entries {
        assert_eq!(e.runs.iter().map(|r| r.n).collect::<Vec<_>>(), vec![10, 20]);
    }
    let energy = report.entries.iter().find(|e| e.name == "energy").unwrap();
    assert_eq!(energy.runs[0].report.n_validation, 40);
    let dual = report.entries.iter().find(|e| e.name == "x1-dwr").unwrap();
    assert_eq!(dual.runs[0].report.n_validation, 10);
    assert!(!out.path().join(MODEL_FILE).exists());
}

#[test]
fn missing_sample_table_is_an_input_error() {
    let config = small();
    let dir = TempDir::new().unwrap();
    assert!(matches!(commands::train_validate(&config, dir.path(), None), Err(CliError::Input(_))));
    assert!(matches!(commands::sample(&config, dir.path(), None), Err(CliError::Input(_))));
}

#[test]
fn sample_rejects_model_built_for_another_config() {
    let config = small();
    let dir = TempDir::new().unwrap();
    commands::offline(&config, dir.path()).unwrap();
    let mut other = config.clone();
    other.duals.tolerances = vec![1.0];
    assert!(matches!(commands::sample(&other, dir.path(), None), Err(CliError::Input(_))));
}

fn sweep_reports(config: &ExperimentConfig, tables: &Path, sweeps: &[&[usize]]) -> Vec<PathBuf> {
    sweeps
        .iter()
        .enumerate()
        .map(|(i, sweep)| {
            let out = tables.join(format!("run{i}"));
            commands::train_validate(&with_sweep(config, sweep), &out, Some(tables)).unwrap();
            out
        })
        .collect()
}

#[test]
fn sweep_runs_are_independent_of_the_other_sizes() {
    let config = small();
    let dir = offline_and_sample(&config);
    let outs = sweep_reports(&config, dir.path(), &[&[10, 20], &[20]]);
    let full = TrainValidateReport::read(&outs[0].join(REPORT_FILE)).unwrap();
    let single = TrainValidateReport::read(&outs[1].join(REPORT_FILE)).unwrap();
    assert_eq!(full.experiment_hash, single.experiment_hash);
    assert_ne!(full.config_hashes, single.config_hashes);
    for e in &single.entries {
        let f = full.entries.iter().find(|x| x.name == e.name).unwrap();
        assert_eq!(e.runs[0], f.runs[1], "{}", e.name);
    }
}

#[test]
fn report_merges_disjoint_sweeps_and_is_idempotent() {
    let config = small();
    let dir = offline_and_sample(&config);
    let outs = sweep_reports(&config, dir.path(), &[&[10], &[20], &[10, 20]]);
    let merged_dir = dir.path().join("merged");
    commands::report(&config, &merged_dir, &outs[..2]).unwrap();
    let merged = TrainValidateReport::read(&merged_dir.join("summary.json")).unwrap();
    let full = TrainValidateReport::read(&outs[2].join(REPORT_FILE)).unwrap();
    assert_eq!(merged.entries, full.entries);
    assert_eq!(merged.config_hashes.len(), 2);

    let again_dir = dir.path().join("again");
    let summary = merged_dir.join("summary.json");
    commands::report(&config, &again_dir, &[summary.clone(), summary.clone(), outs[0].clone()]).unwrap();
    assert!(read(&summary) == read(again_dir.join("summary.json")));
    assert!(read(merged_dir.join("summary.txt")) == read(again_dir.join("summary.txt")));
    let text = String::from_utf8(read(again_dir.join("summary.txt"))).unwrap();
    assert!(text.contains("x1-dwr (table dual)"));
}

#[test]
fn report_rejects_foreign_or_conflicting_inputs() {
    let config = small();
    let dir = offline_and_sample(&config);
    let outs = sweep_reports(&config, dir.path(), &[&[10]]);
    let path = outs[0].join(REPORT_FILE);
    let original: serde_json::Value = serde_json::from_slice(&read(&path)).unwrap();
    let write_variant = |name: &str, edit: &dyn Fn(&mut serde_json::Value)| {
        let mut v = original.clone();
        edit(&mut v);
        let p = dir.path().join(name);
        std::fs::write(&p, serde_json::to_vec(&v).unwrap()).unwrap();
        p
    };
    let out = dir.path().join("rep");

    let foreign = write_variant("foreign.json", &|v| v["experiment_hash"] = "0".repeat(64).into());
    assert!(matches!(commands::report(&config, &out, &[path.clone(), foreign]), Err(CliError::Input(_))));

    let version = write_variant("version.json", &|v| v["schema_version"] = 2.into());
    assert!(matches!(commands::report(&config, &out, &[version]), Err(CliError::Input(_))));

    let conflict = write_variant("conflict.json", &|v| {
        v["entries"][0]["runs"][0]["report"]["noise_variance"] = 123.0.into();
    });
    assert!(matches!(commands::report(&config, &out, &[path.clone(), conflict]), Err(CliError::Input(_))));

    assert!(matches!(commands::report(&config, &out, &[dir.path().join("nope.json")]), Err(CliError::Input(_))));
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema_version = 1\n[mesh]\ndivisions = 10\n").unwrap();
    let r = romes(&["--config", bad.to_str().unwrap(), "--out", out, "offline"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("divisions"));

    let r = romes(&["--config", dir.path().join("absent.toml").to_str().unwrap(), "offline"]);
    assert_eq!(r.status.code(), Some(2));

    let r = romes(&["--out", out, "sample"]);
    assert_eq!(r.status.code(), Some(2));

    let extreme = dir.path().join("extreme.toml");
    std::fs::write(
        &extreme,
        "schema_version = 1\n[mesh]\ndivisions = 3\n[parameters]\nlower = 1e-300\nupper = 1e300\nsampling = \"log-uniform\"\n\
         [greedy]\ncandidates = 5\ntol = 1.0\nmax_dim = 5\n",
    )
    .unwrap();
    let r = romes(&["--config", extreme.to_str().unwrap(), "--out", out, "offline"]);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));

    let file = dir.path().join("file");
    std::fs::write(&file, "").unwrap();
    let small = dir.path().join("small.toml");
    std::fs::write(&small, SMALL).unwrap();
    let r = romes(&["--config", small.to_str().unwrap(), "--out", file.to_str().unwrap(), "offline"]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn cli_runs_the_pipeline_with_seed_and_threads() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");
    let base = ["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "7", "--threads", "2"];
    for stage in ["offline", "sample", "train-validate", "report"] {
        let r = romes(&[&base[..], &[stage]].concat());
        assert!(r.status.success(), "{stage}: {}", String::from_utf8_lossy(&r.stderr));
    }
    let m = RunManifest::read(&RunManifest::path(&out, "report")).unwrap();
    assert_eq!(m.seed, 7);
    let mut expected = small();
    expected.seed = 7;
    assert_eq!(m.config_hash, expected.hash());

    let r = romes(&["--config", cfg.to_str().unwrap(), "print-config"]);
    assert!(r.status.success());
    let printed = ExperimentConfig::from_toml(&String::from_utf8(r.stdout).unwrap()).unwrap();
    assert_eq!(printed, small());
}

#[test]
fn shipped_config_is_the_default() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/thermal_block.toml");
    assert_eq!(ExperimentConfig::load(&path).unwrap(), ExperimentConfig::default());
}
