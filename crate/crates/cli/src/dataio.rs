//! CSV ingestion and emission.
//!
//! Dataset files carry a header row. Labeled/vector datasets use
//! `y,x1,...,xd` (the `y` column holds {0,1} labels for logistic models
//! and is ignored otherwise); log-normal data is a single `x` column.
//! Sample dumps use `iter,x1,...,xd` plus `v1,...,vd` when velocities are
//! emitted. All output goes through Rust's shortest round-trip float
//! formatting, so identical runs produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use vrlmc_core::potentials::{GaussianTarget, LogNormalModel, LogisticRegressionModel};
use vrlmc_core::samplers::ChainOutput;

use crate::CliError;

/// Which model family a dataset feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Gaussian,
    Logistic,
    LogNormal,
}

impl ModelKind {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        match name.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(ModelKind::Gaussian),
            "logistic" => Ok(ModelKind::Logistic),
            "lognormal" | "log-normal" => Ok(ModelKind::LogNormal),
            other => Err(CliError::config(format!(
                "unknown model kind `{other}` (expected gaussian, logistic, or lognormal)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Gaussian => "gaussian",
            ModelKind::Logistic => "logistic",
            ModelKind::LogNormal => "lognormal",
        }
    }
}

/// A parsed dataset, not yet bound to model hyperparameters.
#[derive(Clone, Debug)]
pub struct RawDataset {
    pub kind: ModelKind,
    /// Row-major `n × dim` features (`dim == 1` for log-normal).
    pub features: Vec<f64>,
    /// Labels; populated for logistic data, zeros otherwise.
    pub labels: Vec<u8>,
    pub rows: usize,
    pub dim: usize,
}

impl RawDataset {
    pub fn from_logistic(model: &LogisticRegressionModel) -> Self {
        use vrlmc_core::potentials::SumPotential;
        let rows = model.num_components();
        let dim = model.dim();
        let mut features = Vec::with_capacity(rows * dim);
        let mut labels = Vec::with_capacity(rows);
        for i in 0..rows {
            features.extend_from_slice(model.row(i));
            labels.push(model.label(i));
        }
        Self {
            kind: ModelKind::Logistic,
            features,
            labels,
            rows,
            dim,
        }
    }

    pub fn from_gaussian(model: &GaussianTarget) -> Self {
        use vrlmc_core::potentials::SumPotential;
        let rows = model.num_components();
        let dim = model.dim();
        let mut features = Vec::with_capacity(rows * dim);
        for i in 0..rows {
            features.extend_from_slice(model.data_row(i));
        }
        Self {
            kind: ModelKind::Gaussian,
            features,
            labels: vec![0; rows],
            rows,
            dim,
        }
    }

    pub fn from_lognormal(model: &LogNormalModel) -> Self {
        let data = model.data().to_vec();
        let rows = data.len();
        Self {
            kind: ModelKind::LogNormal,
            features: data,
            labels: vec![0; rows],
            rows,
            dim: 1,
        }
    }

    /// The subset of rows named by `indices`, in order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(&self.features[i * self.dim..(i + 1) * self.dim]);
            labels.push(self.labels[i]);
        }
        Self {
            kind: self.kind,
            features,
            labels,
            rows: indices.len(),
            dim: self.dim,
        }
    }

    pub fn into_logistic(self, prior_variance: f64) -> Result<LogisticRegressionModel, CliError> {
        if self.kind != ModelKind::Logistic {
            return Err(CliError::config("dataset is not logistic"));
        }
        Ok(LogisticRegressionModel::new(
            self.features,
            self.labels,
            self.dim,
            prior_variance,
        ))
    }

    pub fn into_gaussian(self, noise_scale: f64) -> Result<GaussianTarget, CliError> {
        if self.kind == ModelKind::LogNormal {
            return Err(CliError::config("dataset is log-normal, not vector-valued"));
        }
        Ok(GaussianTarget::new(self.features, self.dim, noise_scale))
    }

    pub fn into_lognormal(self) -> Result<LogNormalModel, CliError> {
        if self.kind != ModelKind::LogNormal {
            return Err(CliError::config("dataset is not log-normal"));
        }
        LogNormalModel::new(self.features).map_err(CliError::Config)
    }
}

fn parse_float(field: &str, line: usize, column: &str) -> Result<f64, CliError> {
    field.trim().parse::<f64>().map_err(|_| {
        CliError::config(format!("line {line}: column `{column}`: bad number `{field}`"))
    })
}

/// Loads a dataset CSV of the given kind. Errors name the offending line.
pub fn load_dataset(path: &Path, kind: ModelKind) -> Result<RawDataset, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(CliError::config("dataset file is empty"));
    };
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();

    if kind == ModelKind::LogNormal {
        if columns != ["x"] {
            return Err(CliError::config(format!(
                "log-normal header must be `x`, got `{header}`"
            )));
        }
        let mut features = Vec::new();
        for (idx, raw) in lines {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let value = parse_float(raw, line, "x")?;
            if !(value > 0.0) {
                return Err(CliError::config(format!(
                    "line {line}: log-normal data must be strictly positive, got {value}"
                )));
            }
            features.push(value);
        }
        if features.is_empty() {
            return Err(CliError::config("dataset has no data rows"));
        }
        let rows = features.len();
        return Ok(RawDataset {
            kind,
            features,
            labels: vec![0; rows],
            rows,
            dim: 1,
        });
    }

    if columns.len() < 2 || columns[0] != "y" {
        return Err(CliError::config(format!(
            "header must be `y,x1,...,xd`, got `{header}`"
        )));
    }
    for (j, name) in columns[1..].iter().enumerate() {
        let expected = format!("x{}", j + 1);
        if *name != expected {
            return Err(CliError::config(format!(
                "header column {} must be `{expected}`, got `{name}`",
                j + 2
            )));
        }
    }
    let dim = columns.len() - 1;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(CliError::config(format!(
                "line {line}: expected {} fields, got {}",
                dim + 1,
                fields.len()
            )));
        }
        let label = match kind {
            ModelKind::Logistic => match fields[0].trim() {
                "0" => 0u8,
                "1" => 1u8,
                other => {
                    return Err(CliError::config(format!(
                        "line {line}: label must be 0 or 1, got `{other}`"
                    )));
                }
            },
            _ => 0u8,
        };
        labels.push(label);
        for (j, field) in fields[1..].iter().enumerate() {
            features.push(parse_float(field, line, &format!("x{}", j + 1))?);
        }
    }
    if labels.is_empty() {
        return Err(CliError::config("dataset has no data rows"));
    }
    let rows = labels.len();
    Ok(RawDataset {
        kind,
        features,
        labels,
        rows,
        dim,
    })
}

/// Writes a dataset CSV in the schema `load_dataset` expects.
pub fn write_dataset(path: &Path, dataset: &RawDataset) -> Result<(), CliError> {
    let mut out = String::new();
    if dataset.kind == ModelKind::LogNormal {
        out.push_str("x\n");
        for &v in &dataset.features {
            let _ = writeln!(out, "{v}");
        }
    } else {
        out.push('y');
        for j in 1..=dataset.dim {
            let _ = write!(out, ",x{j}");
        }
        out.push('\n');
        for i in 0..dataset.rows {
            let _ = write!(out, "{}", dataset.labels[i]);
            for j in 0..dataset.dim {
                let _ = write!(out, ",{}", dataset.features[i * dataset.dim + j]);
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes kept iterates as `iter,x1,...,xd[,v1,...,vd]`. The `iter`
/// column is the absolute chain iteration of each kept row.
pub fn write_samples(path: &Path, output: &ChainOutput) -> Result<(), CliError> {
    let d = output.samples.cols();
    let mut out = String::new();
    out.push_str("iter");
    for j in 1..=d {
        let _ = write!(out, ",x{j}");
    }
    if output.velocities.is_some() {
        for j in 1..=d {
            let _ = write!(out, ",v{j}");
        }
    }
    out.push('\n');
    for r in 0..output.samples.rows() {
        let iteration = output.burn_in + r * output.thin;
        let _ = write!(out, "{iteration}");
        for &v in output.samples.row(r) {
            let _ = write!(out, ",{v}");
        }
        if let Some(vel) = &output.velocities {
            for &v in vel.row(r) {
                let _ = write!(out, ",{v}");
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes a parameter vector as a one-row CSV with header `x1,...,xd`.
pub fn write_vector(path: &Path, vector: &[f64]) -> Result<(), CliError> {
    let mut out = String::new();
    for j in 1..=vector.len() {
        if j > 1 {
            out.push(',');
        }
        let _ = write!(out, "x{j}");
    }
    out.push('\n');
    for (j, &v) in vector.iter().enumerate() {
        if j > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a one-row vector CSV written by [`write_vector`].
pub fn load_vector(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let _header = lines
        .next()
        .ok_or_else(|| CliError::config("vector file is empty"))?;
    let row = lines
        .next()
        .ok_or_else(|| CliError::config("vector file has no data row"))?;
    row.split(',')
        .enumerate()
        .map(|(j, f)| parse_float(f, 2, &format!("x{}", j + 1)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_path(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("vrlmc-dataio-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn logistic_round_trip_is_bit_identical() {
        let model = LogisticRegressionModel::synthesize(7, 3, 1.0, 1.0, 2);
        let dataset = RawDataset::from_logistic(&model);
        let path = temp_path("logistic.csv");
        write_dataset(&path, &dataset).unwrap();
        let loaded = load_dataset(&path, ModelKind::Logistic).unwrap();
        assert_eq!(loaded.rows, 7);
        assert_eq!(loaded.dim, 3);
        assert_eq!(loaded.features, dataset.features);
        assert_eq!(loaded.labels, dataset.labels);
    }

    #[test]
    fn lognormal_round_trip() {
        let model = LogNormalModel::synthesize(5, 0.2, 0.9, 3);
        let dataset = RawDataset::from_lognormal(&model);
        let path = temp_path("lognormal.csv");
        write_dataset(&path, &dataset).unwrap();
        let loaded = load_dataset(&path, ModelKind::LogNormal).unwrap();
        assert_eq!(loaded.features, dataset.features);
    }

    #[test]
    fn bad_label_names_the_line() {
        let path = temp_path("badlabel.csv");
        std::fs::write(&path, "y,x1\n0,1.5\n2,0.3\n").unwrap();
        let err = load_dataset(&path, ModelKind::Logistic).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(err.to_string().contains("label"), "{err}");
    }

    #[test]
    fn nonpositive_lognormal_rejected() {
        let path = temp_path("badln.csv");
        std::fs::write(&path, "x\n1.0\n-2.0\n").unwrap();
        let err = load_dataset(&path, ModelKind::LogNormal).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn vector_round_trip() {
        let path = temp_path("vec.csv");
        write_vector(&path, &[1.5, -0.25, 3.0]).unwrap();
        assert_eq!(load_vector(&path).unwrap(), vec![1.5, -0.25, 3.0]);
    }
}
