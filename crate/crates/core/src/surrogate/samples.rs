use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduced_basis::{DualKey, ReducedModel};
use crate::scalar::dot;
use crate::thermal::{AffineOperator, InputPoint, NormKind, COMPLIANT_OUTPUT, N_BLOCKS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Validation,
    /// High-fidelity or reduced solve failed; excluded everywhere.
    Failed,
}

impl Split {
    fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Validation => "validation",
            Self::Failed => "failed",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "validation" => Ok(Self::Validation),
            "failed" => Ok(Self::Failed),
            _ => Err(Error::Format(format!("unknown split '{s}'"))),
        }
    }
}

/// Indicators, true errors and bounds at one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub mu: Vec<f64>,
    pub residual_euclid: f64,
    pub residual_riesz: f64,
    /// Dual-weighted residuals, aligned with [`SampleTable::dual_keys`].
    pub dwr: Vec<f64>,
    pub err_energy: f64,
    pub err_xnorm: f64,
    pub err_output_compliant: f64,
    /// Signed point-output errors, aligned with [`SampleTable::output_ids`].
    pub err_outputs: Vec<f64>,
    pub bound_energy: f64,
    pub bound_energy_lb: f64,
    pub bound_xnorm: f64,
    pub bound_xnorm_lb: f64,
    pub bound_output: f64,
    pub bound_output_lb: f64,
    pub reduced_compliant: f64,
    /// Reduced point outputs, aligned with [`SampleTable::output_ids`].
    pub reduced_outputs: Vec<f64>,
    pub split: Split,
}

impl SampleRow {
    fn failed(mu: Vec<f64>, n_dual: usize, n_out: usize) -> Self {
        let nan = f64::NAN;
        Self {
            mu,
            residual_euclid: nan,
            residual_riesz: nan,
            dwr: vec![nan; n_dual],
            err_energy: nan,
            err_xnorm: nan,
            err_output_compliant: nan,
            err_outputs: vec![nan; n_out],
            bound_energy: nan,
            bound_energy_lb: nan,
            bound_xnorm: nan,
            bound_xnorm_lb: nan,
            bound_output: nan,
            bound_output_lb: nan,
            reduced_compliant: nan,
            reduced_outputs: vec![nan; n_out],
            split: Split::Failed,
        }
    }

    pub fn input(&self) -> Result<InputPoint<f64>> {
        InputPoint::new(self.mu.clone())
    }
}

/// Sample rows plus the ids their per-output columns refer to.
///
/// Point output `k` (1-based) is written as column `err_output_k` and must
/// be registered under the id `x{k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleTable {
    pub output_ids: Vec<String>,
    pub dual_keys: Vec<DualKey>,
    pub rows: Vec<SampleRow>,
}

impl SampleTable {
    pub fn output_index(&self, id: &str) -> Result<usize> {
        self.output_ids.iter().position(|o| o == id).ok_or_else(|| Error::UnknownOutput(id.to_string()))
    }

    pub fn dual_index(&self, key: &DualKey) -> Result<usize> {
        self.dual_keys
            .iter()
            .position(|k| k == key)
            .ok_or_else(|| Error::UnknownOutput(format!("{} (dual level {})", key.output, key.level)))
    }

    /// Row indices with the given split, in table order.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.rows.iter().enumerate().filter(|(_, r)| r.split == split).map(|(i, _)| i).collect()
    }

    /// Whether no validation input equals a training input.
    pub fn split_is_disjoint(&self) -> bool {
        let train: Vec<&Vec<f64>> = self.rows.iter().filter(|r| r.split == Split::Train).map(|r| &r.mu).collect();
        self.rows.iter().filter(|r| r.split == Split::Validation).all(|r| !train.contains(&&r.mu))
    }

    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = (1..=N_BLOCKS).map(|i| format!("mu_{i}")).collect();
        h.push("rho_res_euclid".into());
        h.push("rho_res_riesz".into());
        for key in &self.dual_keys {
            h.push(format!("rho_dwr_{}_{}", key.output, key.level));
        }
        h.push("err_energy".into());
        h.push("err_xnorm".into());
        h.push("err_output_compliant".into());
        for k in 1..=self.output_ids.len() {
            h.push(format!("err_output_{k}"));
        }
        for name in ["bound_energy", "bound_energy_lb", "bound_xnorm", "bound_xnorm_lb", "bound_output", "bound_output_lb"] {
            h.push(name.into());
        }
        h.push("red_output_compliant".into());
        for k in 1..=self.output_ids.len() {
            h.push(format!("red_output_{k}"));
        }
        h.push("split".into());
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.header())?;
        for r in &self.rows {
            let mut rec: Vec<String> = r.mu.iter().map(|v| v.to_string()).collect();
            let nums = [r.residual_euclid, r.residual_riesz]
                .into_iter()
                .chain(r.dwr.iter().copied())
                .chain([r.err_energy, r.err_xnorm, r.err_output_compliant])
                .chain(r.err_outputs.iter().copied())
                .chain([r.bound_energy, r.bound_energy_lb, r.bound_xnorm, r.bound_xnorm_lb, r.bound_output, r.bound_output_lb])
                .chain([r.reduced_compliant])
                .chain(r.reduced_outputs.iter().copied());
            rec.extend(nums.map(|v| v.to_string()));
            rec.push(r.split.as_str().into());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut dual_keys = Vec::new();
        let mut n_out = 0;
        for h in &header {
            if let Some(rest) = h.strip_prefix("rho_dwr_") {
                let (output, level) = rest
                    .rsplit_once('_')
                    .ok_or_else(|| Error::Format(format!("bad dual column '{h}'")))?;
                let level = level.parse().map_err(|_| Error::Format(format!("bad dual level in '{h}'")))?;
                dual_keys.push(DualKey { output: output.to_string(), level });
            }
            if h.strip_prefix("err_output_").is_some_and(|k| k.parse::<usize>().is_ok()) {
                n_out += 1;
            }
        }
        let table = Self { output_ids: (1..=n_out).map(|k| format!("x{k}")).collect(), dual_keys, rows: Vec::new() };
        if table.header() != header {
            return Err(Error::Format("unexpected sample table header".into()));
        }
        let n_dual = table.dual_keys.len();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Format(format!("missing column {i}")))?
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("column {}: {e}", header[i])))
            };
            let mut c = 0;
            let mut take = |n: usize| -> Result<Vec<f64>> {
                let v = (c..c + n).map(num).collect::<Result<Vec<_>>>()?;
                c += n;
                Ok(v)
            };
            let mu = take(N_BLOCKS)?;
            let res = take(2)?;
            let dwr = take(n_dual)?;
            let errs = take(3)?;
            let err_outputs = take(n_out)?;
            let b = take(6)?;
            let red_c = take(1)?;
            let reduced_outputs = take(n_out)?;
            let split = Split::parse(rec.get(c).ok_or_else(|| Error::Format("missing split".into()))?)?;
            rows.push(SampleRow {
                mu,
                residual_euclid: res[0],
                residual_riesz: res[1],
                dwr,
                err_energy: errs[0],
                err_xnorm: errs[1],
                err_output_compliant: errs[2],
                err_outputs,
                bound_energy: b[0],
                bound_energy_lb: b[1],
                bound_xnorm: b[2],
                bound_xnorm_lb: b[3],
                bound_output: b[4],
                bound_output_lb: b[5],
                reduced_compliant: red_c[0],
                reduced_outputs,
                split,
            });
        }
        Ok(Self { rows, ..table })
    }
}

fn sample_row(
    op: &AffineOperator<f64>,
    model: &ReducedModel<f64>,
    output_ids: &[String],
    dual_keys: &[DualKey],
    mu: &InputPoint<f64>,
    split: Split,
) -> Result<SampleRow> {
    let u = op.solve(mu)?;
    let st = model.evaluate(mu)?;
    let mut e = model.reconstruct(&st);
    e.iter_mut().zip(&u).for_each(|(a, b)| *a = b - *a);
    let mut err_outputs = Vec::with_capacity(output_ids.len());
    let mut reduced_outputs = Vec::with_capacity(output_ids.len());
    for id in output_ids {
        err_outputs.push(dot(&op.output(id)?.vector, &e));
        reduced_outputs.push(model.output(&st, id)?);
    }
    let dwr = dual_keys
        .iter()
        .map(|k| model.dual_weighted_residual(model.dual(&k.output, k.level)?, &st))
        .collect::<Result<Vec<_>>>()?;
    let b = st.bounds;
    Ok(SampleRow {
        mu: mu.values().to_vec(),
        residual_euclid: b.residual_euclid,
        residual_riesz: b.residual_riesz,
        dwr,
        err_energy: op.norm(NormKind::Energy(mu), &e)?,
        err_xnorm: op.norm(NormKind::X, &e)?,
        err_output_compliant: dot(&op.rhs, &e),
        err_outputs,
        bound_energy: b.energy,
        bound_energy_lb: b.energy_lb,
        bound_xnorm: b.x_norm,
        bound_xnorm_lb: b.x_norm_lb,
        bound_output: b.output,
        bound_output_lb: b.output_lb,
        reduced_compliant: model.output(&st, COMPLIANT_OUTPUT)?,
        reduced_outputs,
        split,
    })
}

/// High-fidelity and reduced solves at every point; the first `n_train`
/// rows form the training split, the rest validation. Rows whose solves
/// fail are kept as [`Split::Failed`] with a warning.
pub fn collect_samples(
    op: &AffineOperator<f64>,
    model: &ReducedModel<f64>,
    points: &[InputPoint<f64>],
    n_train: usize,
) -> Result<SampleTable> {
    if n_train > points.len() {
        return Err(Error::InvalidInput(format!("{n_train} training rows of {} samples", points.len())));
    }
    let output_ids = op.point_output_ids();
    for (k, id) in output_ids.iter().enumerate() {
        if *id != format!("x{}", k + 1) {
            return Err(Error::Incompatible(format!("point output '{id}' must be registered as x{}", k + 1)));
        }
    }
    let mut dual_keys: Vec<DualKey> = model.duals.iter().map(|d| d.key.clone()).collect();
    dual_keys.sort_by(|a, b| a.output.cmp(&b.output).then(a.level.total_cmp(&b.level)));
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(i, mu)| {
            let split = if i < n_train { Split::Train } else { Split::Validation };
            sample_row(op, model, &output_ids, &dual_keys, mu, split).unwrap_or_else(|e| {
                log::warn!("sample {i} failed: {e}");
                SampleRow::failed(mu.values().to_vec(), dual_keys.len(), output_ids.len())
            })
        })
        .collect();
    Ok(SampleTable { output_ids, dual_keys, rows })
}
