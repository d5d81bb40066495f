//! The four pipeline stages. Each stage reads only the files of the stage
//! before it plus the config, and writes a manifest next to its artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use romes::reduced_basis::{greedy_build, greedy_build_dual, DualKey, GreedyReport, GreedySettings};
use romes::surrogate::{
    collect_samples, histogram, validate, ErrorSurrogate, SampleTable, Split, SurrogateSpec, ValidationReport,
    ValidationSettings,
};
use romes::thermal::{AffineOperator, InputPoint, TriangularMesh};
use romes::ReducedModel;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{ExperimentConfig, Sampling};
use crate::error::{CliError, Result};
use crate::manifest::{sha256_hex, Recorder, RunManifest};

pub const MODEL_FILE: &str = "reduced_model.json";
pub const REPORT_FILE: &str = "report.json";
pub const REPORT_VERSION: u32 = 1;

pub fn samples_file(name: &str) -> String {
    format!("samples_{name}.csv")
}

/// High-fidelity operator with the configured point outputs registered.
pub fn build_operator(config: &ExperimentConfig) -> Result<(TriangularMesh, AffineOperator<f64>)> {
    let mesh = TriangularMesh::build(config.mesh.divisions)?;
    let mut op = AffineOperator::assemble(&mesh)?.with_parameter_box(config.parameter_box());
    for (point, id) in config.duals.points.iter().zip(config.point_ids()) {
        let node = point.node(&mesh)?;
        op.register_point_output(&mesh, &id, node)?;
    }
    Ok((mesh, op))
}

/// `n` inputs drawn from the configured distribution.
pub fn draw_points(config: &ExperimentConfig, n: usize, seed: u64) -> Vec<InputPoint<f64>> {
    let b = config.parameter_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| match config.parameters.sampling {
            Sampling::Uniform => b.sample_uniform(&mut rng),
            Sampling::LogUniform => b.sample_log_uniform(&mut rng),
        })
        .collect()
}

fn dual_keys(config: &ExperimentConfig) -> Vec<DualKey> {
    config
        .point_ids()
        .into_iter()
        .flat_map(|output| config.duals.tolerances.iter().map(move |&level| DualKey { output: output.clone(), level }))
        .collect()
}

fn history_rows(csv: &mut String, kind: &str, key: Option<&DualKey>, report: &GreedyReport<f64>) {
    let (output, level) = key.map_or((String::new(), String::new()), |k| (k.output.clone(), k.level.to_string()));
    for (step, (cand, bound)) in report.selected.iter().zip(&report.max_bound_history).enumerate() {
        let _ = writeln!(csv, "{kind},{output},{level},{},{cand},{bound}", step + 1);
    }
}

/// Greedy primal basis plus one dual basis per point output and tolerance.
pub fn offline(config: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    let mut rec = Recorder::new("offline", out)?;
    let (_, op) = rec.time("assemble", || build_operator(config))?;
    let candidates = draw_points(config, config.greedy.candidates, config.seed);
    let settings = GreedySettings { tol: config.greedy.tol, max_dim: config.greedy.max_dim, seed: config.seed };
    let (primal, report) = rec.time("greedy_primal", || Ok(greedy_build(&op, &candidates, &settings)?))?;
    log::info!("primal basis: {} vectors (converged: {})", primal.dim(), report.converged);

    let mut history = String::from("kind,output,level,step,candidate,max_bound\n");
    history_rows(&mut history, "primal", None, &report);
    let mut model = ReducedModel::new(&op, primal)?;
    model.mesh_divisions = Some(config.mesh.divisions);
    let mut duals = Vec::new();
    for key in dual_keys(config) {
        let settings = GreedySettings { tol: key.level, max_dim: config.duals.max_dim, seed: config.seed };
        let (system, report) =
            rec.time("greedy_dual", || Ok(greedy_build_dual(&op, &key.output, &candidates, &settings)?))?;
        log::info!("dual basis {} at {}: {} vectors", key.output, key.level, system.dim());
        history_rows(&mut history, "dual", Some(&key), &report);
        duals.push(json!({"output": key.output, "level": key.level, "dim": system.dim(), "converged": report.converged}));
        model.add_dual(&op, key, system)?;
    }
    rec.write(MODEL_FILE, model.to_json()?.as_bytes())?;
    rec.write("greedy_history.csv", history.as_bytes())?;
    let summary = json!({
        "n_dofs": op.n(),
        "primal": {
            "dim": model.dim(),
            "converged": report.converged,
            "final_max_bound": report.max_bound_history.last(),
        },
        "duals": duals,
    });
    rec.finish(config, summary)
}

/// The model and the SHA-256 of its file.
fn read_model(path: &Path) -> Result<(ReducedModel, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    let model = ReducedModel::from_json(&text).map_err(|e| CliError::input(path, e))?;
    Ok((model, sha256_hex(text.as_bytes())))
}

fn check_model(model: &ReducedModel, op: &AffineOperator<f64>, config: &ExperimentConfig, path: &Path) -> Result<()> {
    let mismatch = |what: String| Err(CliError::input(path, format!("model does not match the config: {what}")));
    if model.mesh_divisions != Some(config.mesh.divisions) {
        return mismatch(format!("mesh divisions {:?} vs {}", model.mesh_divisions, config.mesh.divisions));
    }
    if model.n_dofs != op.n() {
        return mismatch(format!("{} vs {} degrees of freedom", model.n_dofs, op.n()));
    }
    if model.parameter_box != config.parameter_box() {
        return mismatch("parameter box".into());
    }
    let ids: Vec<&str> = model.outputs.iter().map(|o| o.id.as_str()).collect();
    let expected: Vec<&str> = op.outputs.iter().map(|o| o.id.as_str()).collect();
    if ids != expected {
        return mismatch(format!("outputs {ids:?} vs {expected:?}"));
    }
    let mut have: Vec<DualKey> = model.duals.iter().map(|d| d.key.clone()).collect();
    let mut want = dual_keys(config);
    for keys in [&mut have, &mut want] {
        keys.sort_by(|a, b| a.output.cmp(&b.output).then(a.level.total_cmp(&b.level)));
    }
    if have != want {
        return mismatch("dual bases".into());
    }
    Ok(())
}

/// High-fidelity and reduced solves on every configured sample set.
pub fn sample(config: &ExperimentConfig, out: &Path, model_path: Option<&Path>) -> Result<RunManifest> {
    let model_path = model_path.map_or_else(|| out.join(MODEL_FILE), Path::to_path_buf);
    let (model, model_hash) = read_model(&model_path)?;
    let mut rec = Recorder::new("sample", out)?;
    let (_, op) = rec.time("assemble", || build_operator(config))?;
    check_model(&model, &op, config, &model_path)?;

    let mut sets = Vec::new();
    for (j, set) in config.samples.iter().enumerate() {
        let mut points = draw_points(config, set.total, config.seed + 1 + j as u64);
        points.truncate(set.train + set.validation());
        let table = rec.time("solve", || Ok(collect_samples(&op, &model, &points, set.train)?))?;
        let failed = table.indices(Split::Failed).len();
        if failed > 0 {
            log::warn!("sample set {}: {failed} failed rows", set.name);
        }
        let mut bytes = Vec::new();
        table.write_csv(&mut bytes)?;
        rec.write(&samples_file(&set.name), &bytes)?;
        sets.push(json!({
            "name": set.name,
            "rows": table.rows.len(),
            "train": table.indices(Split::Train).len(),
            "validation": table.indices(Split::Validation).len(),
            "failed": failed,
        }));
    }
    rec.finish(config, json!({
        "model": model_path.display().to_string(),
        "model_sha256": model_hash,
        "reduced_dim": model.dim(),
        "sets": sets,
    }))
}

/// Validation of one surrogate at one training size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub n: usize,
    pub report: ValidationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub name: String,
    pub table: String,
    pub spec: SurrogateSpec,
    /// Sorted by `n`.
    pub runs: Vec<SweepRun>,
}

/// A run that could not be trained on the available data.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SkippedRun {
    pub name: String,
    pub n: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainValidateReport {
    pub schema_version: u32,
    /// Config hash without the training-size sweep; reports merge only if equal.
    pub experiment_hash: String,
    /// Full hashes of every config that contributed runs.
    pub config_hashes: Vec<String>,
    pub entries: Vec<ReportEntry>,
    pub skipped: Vec<SkippedRun>,
}

impl TrainValidateReport {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::input(path, e))?;
        match value.get("schema_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(REPORT_VERSION) => {}
            v => return Err(CliError::input(path, format!("report schema version {v:?}, expected {REPORT_VERSION}"))),
        }
        serde_json::from_value(value).map_err(|e| CliError::input(path, e))
    }

    /// Adds the runs of `other`. Runs present in both must agree.
    pub fn merge(&mut self, other: Self) -> Result<()> {
        if other.schema_version != self.schema_version {
            return Err(CliError::Input("report schema versions differ".into()));
        }
        if other.experiment_hash != self.experiment_hash {
            return Err(CliError::Input(format!(
                "reports come from different experiments ({} vs {})",
                self.experiment_hash, other.experiment_hash
            )));
        }
        for h in other.config_hashes {
            if !self.config_hashes.contains(&h) {
                self.config_hashes.push(h);
            }
        }
        self.config_hashes.sort();
        for entry in other.entries {
            let Some(mine) = self.entries.iter_mut().find(|e| e.name == entry.name) else {
                self.entries.push(entry);
                continue;
            };
            if mine.spec != entry.spec || mine.table != entry.table {
                return Err(CliError::Input(format!("surrogate '{}' is defined differently", entry.name)));
            }
            for run in entry.runs {
                match mine.runs.iter().find(|r| r.n == run.n) {
                    Some(r) if *r == run => {}
                    Some(_) => {
                        return Err(CliError::Input(format!("conflicting results for '{}' at N = {}", entry.name, run.n)))
                    }
                    None => mine.runs.push(run),
                }
            }
            mine.runs.sort_by_key(|r| r.n);
        }
        self.entries.sort_by(|a, b| a.name.cmp(&b.name));
        self.skipped.extend(other.skipped);
        self.skipped.sort();
        self.skipped.dedup();
        Ok(())
    }
}

/// Training failures that reflect the data rather than the numerics.
fn is_data_incompatible(e: &romes::Error) -> bool {
    use romes::Error as E;
    matches!(
        e,
        E::NonPositiveErrors(_) | E::Incompatible(_) | E::InsufficientData(_) | E::UnknownOutput(_) | E::DegenerateFeature(_)
    )
}

fn read_table(path: &Path) -> Result<SampleTable> {
    let file = std::fs::File::open(path).map_err(|e| CliError::input(path, e))?;
    SampleTable::read_csv(std::io::BufReader::new(file)).map_err(|e| CliError::input(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn curves_csv(entry: &ReportEntry, rigor: &[f64]) -> String {
    let mut s = String::from("n,n_train,n_validation,deviation_mean,deviation_std,noise_variance");
    for c in rigor {
        let _ = write!(s, ",effectivity_mean_{c},effectivity_median_{c},overestimation_{c}");
    }
    s.push_str(",improvement_mean,improvement_median,bound_effectivity_mean,uniform_improvement_mean,uniform_improvement_median\n");
    for run in &entry.runs {
        let r = &run.report;
        let d = r.deviation_stats;
        let _ = write!(
            s,
            "{},{},{},{},{},{}",
            run.n,
            r.n_train,
            r.n_validation,
            opt(d.map(|d| d.mean)),
            opt(d.map(|d| d.std)),
            r.noise_variance
        );
        for c in rigor {
            let e = r.rigor.iter().find(|e| e.c == *c);
            let eff = e.and_then(|e| e.effectivity);
            let _ = write!(
                s,
                ",{},{},{}",
                opt(eff.map(|x| x.mean)),
                opt(eff.map(|x| x.median)),
                opt(e.map(|e| e.overestimation_frequency))
            );
        }
        let u = r.uniform_baseline.as_ref().and_then(|u| u.improvement);
        let _ = writeln!(
            s,
            ",{},{},{},{},{}",
            opt(r.improvement.map(|x| x.mean)),
            opt(r.improvement.map(|x| x.median)),
            opt(r.bound_effectivity.map(|x| x.mean)),
            opt(u.map(|x| x.mean)),
            opt(u.map(|x| x.median))
        );
    }
    s
}

fn coverage_csv(entry: &ReportEntry) -> String {
    let mut s = String::from("n,omega,observed_full,observed_noise_only,count\n");
    for run in &entry.runs {
        for c in &run.report.coverage {
            let _ = writeln!(s, "{},{},{},{},{}", run.n, c.omega, c.observed_full, c.observed_noise_only, c.count);
        }
    }
    s
}

/// Deviation histogram per run, with the zero-mean normal density of the
/// mean inferred noise variance at each bin center for comparison.
fn histogram_csv(entry: &ReportEntry, bins: usize) -> String {
    let mut s = String::from("n,lower,upper,count,density,normal_density\n");
    for run in &entry.runs {
        let r = &run.report;
        let total = r.deviations.len() as f64;
        let var = r.noise_variance;
        for b in histogram(&r.deviations, bins) {
            let width = b.upper - b.lower;
            let mid = 0.5 * (b.lower + b.upper);
            let normal = (-mid * mid / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
            let _ = writeln!(s, "{},{},{},{},{},{}", run.n, b.lower, b.upper, b.count, b.count as f64 / (total * width), normal);
        }
    }
    s
}

/// Trains every configured surrogate at every sweep size and validates it.
/// Reads only the sample tables; the high-fidelity model is never built.
pub fn train_validate(config: &ExperimentConfig, out: &Path, samples_dir: Option<&Path>) -> Result<RunManifest> {
    let dir = samples_dir.unwrap_or(out).to_path_buf();
    let mut rec = Recorder::new("train-validate", out)?;
    let mut tables = BTreeMap::new();
    for s in &config.surrogates {
        let name = config.table_of(s);
        if !tables.contains_key(name) {
            let table = rec.time("read", || read_table(&dir.join(samples_file(name))))?;
            tables.insert(name.to_string(), table);
        }
    }
    let settings =
        ValidationSettings { omegas: config.validation.omegas.clone(), rigor_levels: config.validation.rigor_levels.clone() };
    let mut sweep = config.validation.sweep.clone();
    sweep.sort_unstable();
    sweep.dedup();

    let jobs: Vec<(usize, usize)> = (0..config.surrogates.len()).flat_map(|i| sweep.iter().map(move |&n| (i, n))).collect();
    type Job = (usize, usize, std::result::Result<(SweepRun, ErrorSurrogate), String>);
    let results: Vec<Job> = rec.time("train_validate", || {
        jobs.par_iter()
            .map(|&(i, n)| {
                let s = &config.surrogates[i];
                let spec = config.surrogate_spec(s)?;
                let table = &tables[config.table_of(s)];
                if table.indices(Split::Validation).is_empty() {
                    return Ok((i, n, Err("no validation rows".to_string())));
                }
                let trained = match ErrorSurrogate::train(table, &spec, Some(n)) {
                    Ok(t) => t,
                    Err(e) if is_data_incompatible(&e) => return Ok((i, n, Err(e.to_string()))),
                    Err(e) => return Err(e.into()),
                };
                let report = validate(&trained, table, &settings)?;
                Ok((i, n, Ok((SweepRun { n, report }, trained))))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut entries: Vec<ReportEntry> = Vec::new();
    let mut skipped = Vec::new();
    let mut largest: BTreeMap<usize, ErrorSurrogate> = BTreeMap::new();
    for (i, n, result) in results {
        let s = &config.surrogates[i];
        match result {
            Ok((run, trained)) => {
                largest.insert(i, trained);
                match entries.iter_mut().find(|e| e.name == s.name) {
                    Some(e) => e.runs.push(run),
                    None => entries.push(ReportEntry {
                        name: s.name.clone(),
                        table: config.table_of(s).to_string(),
                        spec: config.surrogate_spec(s)?,
                        runs: vec![run],
                    }),
                }
            }
            Err(reason) => {
                log::warn!("surrogate '{}' at N = {n} skipped: {reason}", s.name);
                skipped.push(SkippedRun { name: s.name.clone(), n, reason });
            }
        }
    }
    for (i, trained) in &largest {
        rec.write(&format!("surrogate_{}.json", config.surrogates[*i].name), trained.to_json()?.as_bytes())?;
    }
    for e in &entries {
        rec.write(&format!("curves_{}.csv", e.name), curves_csv(e, &config.validation.rigor_levels).as_bytes())?;
        rec.write(&format!("coverage_{}.csv", e.name), coverage_csv(e).as_bytes())?;
        rec.write(&format!("histogram_{}.csv", e.name), histogram_csv(e, config.validation.histogram_bins).as_bytes())?;
    }
    entries.sort_by(|a, b| a.name.cmp(&b.name));
    skipped.sort();
    let summary = json!({
        "surrogates": entries.iter().map(|e| json!({"name": e.name, "runs": e.runs.len()})).collect::<Vec<_>>(),
        "skipped": skipped.len(),
    });
    let report = TrainValidateReport {
        schema_version: REPORT_VERSION,
        experiment_hash: config.experiment_hash(),
        config_hashes: vec![config.hash()],
        entries,
        skipped,
    };
    rec.write(REPORT_FILE, serde_json::to_string_pretty(&report).expect("report serializes").as_bytes())?;
    rec.finish(config, summary)
}

fn report_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(REPORT_FILE)
    } else {
        p.to_path_buf()
    }
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

fn summary_text(report: &TrainValidateReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "experiment {}", report.experiment_hash);
    for e in &report.entries {
        let _ = writeln!(s, "\n{} (table {})", e.name, e.table);
        let _ = writeln!(s, "{:>6} {:>6} {:>10} {:>10} {:>10} {:>24} {:>24} {:>10}", "N", "n_val", "dev_mean", "dev_std", "noise_var", "eff_mean (per c)", "over_freq (per c)", "I_median");
        for run in &e.runs {
            let r = &run.report;
            let eff: Vec<String> = r.rigor.iter().map(|x| fmt(x.effectivity.map(|s| s.mean))).collect();
            let over: Vec<String> = r.rigor.iter().map(|x| format!("{:.4}", x.overestimation_frequency)).collect();
            let _ = writeln!(
                s,
                "{:>6} {:>6} {:>10} {:>10} {:>10.4} {:>24} {:>24} {:>10}",
                run.n,
                r.n_validation,
                fmt(r.deviation_stats.map(|d| d.mean)),
                fmt(r.deviation_stats.map(|d| d.std)),
                r.noise_variance,
                eff.join("/"),
                over.join("/"),
                fmt(r.improvement.map(|i| i.median)),
            );
        }
    }
    for k in &report.skipped {
        let _ = writeln!(s, "\nskipped {} at N = {}: {}", k.name, k.n, k.reason);
    }
    s
}

/// Merges train-validate reports (files or directories holding `report.json`)
/// into `summary.json` and `summary.txt`.
pub fn report(config: &ExperimentConfig, out: &Path, inputs: &[PathBuf]) -> Result<RunManifest> {
    let inputs: Vec<PathBuf> = if inputs.is_empty() { vec![out.join(REPORT_FILE)] } else { inputs.iter().map(|p| report_path(p)).collect() };
    let mut rec = Recorder::new("report", out)?;
    let merged = rec.time("merge", || {
        let mut merged: Option<TrainValidateReport> = None;
        for path in &inputs {
            let r = TrainValidateReport::read(path)?;
            match merged.as_mut() {
                None => {
                    let mut empty =
                        TrainValidateReport { entries: Vec::new(), skipped: Vec::new(), config_hashes: Vec::new(), ..r.clone() };
                    empty.merge(r)?;
                    merged = Some(empty);
                }
                Some(m) => m.merge(r)?,
            }
        }
        Ok(merged.expect("at least one input"))
    })?;
    rec.write("summary.json", serde_json::to_string_pretty(&merged).expect("report serializes").as_bytes())?;
    rec.write("summary.txt", summary_text(&merged).as_bytes())?;
    let summary = json!({
        "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "experiment_hash": merged.experiment_hash,
        "entries": merged.entries.len(),
        "runs": merged.entries.iter().map(|e| e.runs.len()).sum::<usize>(),
    });
    rec.finish(config, summary)
}
