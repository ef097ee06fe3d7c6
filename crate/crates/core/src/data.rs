//! Synthetic dataset generation on the unit sphere and CSV ingestion.

use crate::error::{Error, Result};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write as IoWrite};

/// A labeled dataset: unit-norm rows `x_i` and labels `y_i in {-1, +1}`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// How inputs are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Distribution {
    /// Standard normal vector normalized to unit length (uniform on the
    /// sphere, exactly isotropic with `E[x x^T] = I/d`).
    SphereUniform,
    /// `N(0, I/d)` draw, then renormalized.
    GaussianNormalized,
}

/// How labels are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LabelRule {
    /// Independent fair signs.
    RandomSign,
    /// `y = sign(w*^T x)` for a hidden unit teacher `w*`; samples with
    /// `|w*^T x| < margin` are rejected, keeping the sphere marginal
    /// uniform outside the margin band.
    LinearTeacher { margin: f64 },
}

/// Specification of a synthetic dataset.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub d: usize,
    pub distribution: Distribution,
    pub label_rule: LabelRule,
    pub seed: u64,
}

fn unit_gaussian_row(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    loop {
        let mut row: Vec<f64> = (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for v in row.iter_mut() {
                *v /= norm;
            }
            return row;
        }
    }
}

/// Generates a dataset per `spec`; deterministic given the seed.
pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    if spec.n < 1 || spec.d < 2 {
        return Err(Error::Input(format!(
            "generation requires N >= 1 and d >= 2, got N={}, d={}",
            spec.n, spec.d
        )));
    }
    if let LabelRule::LinearTeacher { margin } = spec.label_rule {
        if !(0.0..1.0).contains(&margin) {
            return Err(Error::Input(format!("teacher margin must lie in [0,1), got {margin}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let scale = match spec.distribution {
        Distribution::SphereUniform => 1.0,
        Distribution::GaussianNormalized => (1.0 / spec.d as f64).sqrt(),
    };
    let teacher: Option<Vec<f64>> = match spec.label_rule {
        LabelRule::LinearTeacher { .. } => Some(unit_gaussian_row(&mut rng, spec.d, 1.0)),
        LabelRule::RandomSign => None,
    };

    let mut rows: Vec<f64> = Vec::with_capacity(spec.n * spec.d);
    let mut labels: Vec<f64> = Vec::with_capacity(spec.n);
    let mut draws = 0usize;
    let max_draws = 100 * spec.n;
    while labels.len() < spec.n {
        draws += 1;
        if draws > max_draws {
            return Err(Error::Input(format!(
                "rejection sampling exceeded {max_draws} draws; the margin is too large for d={}",
                spec.d
            )));
        }
        let row = unit_gaussian_row(&mut rng, spec.d, scale);
        match (&spec.label_rule, &teacher) {
            (LabelRule::RandomSign, _) => {
                labels.push(if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
                rows.extend_from_slice(&row);
            }
            (LabelRule::LinearTeacher { margin }, Some(w)) => {
                let proj: f64 = row.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
                if proj.abs() < *margin {
                    continue;
                }
                labels.push(proj.signum());
                rows.extend_from_slice(&row);
            }
            _ => unreachable!(),
        }
    }
    let x = Array2::from_shape_vec((spec.n, spec.d), rows)
        .map_err(|e| Error::Input(format!("shape error: {e}")))?;
    Ok(Dataset { x, y: labels })
}

/// Diagnostics from [`load_csv`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LoadReport {
    /// Largest `|original row norm - 1|` seen before renormalization.
    pub max_renorm_delta: f64,
    /// True when file labels were `{0, 1}` and were mapped to `{-1, +1}`.
    pub mapped_zero_one_labels: bool,
}

/// Loads a dataset from CSV: one sample per row, features first, label in
/// the last column. Labels may be `{-1, +1}` or `{0, 1}` (mapped). Rows are
/// L2-normalized on load; the report records the largest correction.
pub fn load_csv(reader: impl BufRead, skip_header: bool) -> Result<(Dataset, LoadReport)> {
    let mut rows: Vec<f64> = Vec::new();
    let mut raw_labels: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    let mut report = LoadReport::default();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if idx == 0 && skip_header {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(Error::Input(format!("row {idx}: need at least one feature and a label")));
        }
        let parsed: Vec<f64> = fields
            .iter()
            .enumerate()
            .map(|(col, f)| {
                f.trim().parse::<f64>().map_err(|e| {
                    Error::Input(format!("row {idx}, column {col}: parse failure: {e}"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let d = parsed.len() - 1;
        match width {
            None => width = Some(d),
            Some(w) if w != d => {
                return Err(Error::Input(format!(
                    "row {idx}: expected {w} features, found {d}"
                )));
            }
            _ => {}
        }
        let mut feats = parsed[..d].to_vec();
        let norm = feats.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::Input(format!("row {idx}: zero feature vector cannot be normalized")));
        }
        report.max_renorm_delta = report.max_renorm_delta.max((norm - 1.0).abs());
        for v in feats.iter_mut() {
            *v /= norm;
        }
        rows.extend_from_slice(&feats);
        raw_labels.push(parsed[d]);
    }

    let d = width.ok_or_else(|| Error::Input("empty CSV: no samples".into()))?;
    let n = raw_labels.len();

    let all_pm1 = raw_labels.iter().all(|&v| v == 1.0 || v == -1.0);
    let all_01 = raw_labels.iter().all(|&v| v == 0.0 || v == 1.0);
    let has_zero = raw_labels.iter().any(|&v| v == 0.0);
    let y: Vec<f64> = if all_pm1 {
        raw_labels
    } else if all_01 && has_zero {
        report.mapped_zero_one_labels = true;
        raw_labels.iter().map(|&v| if v == 0.0 { -1.0 } else { 1.0 }).collect()
    } else {
        return Err(Error::Input(
            "labels must be {-1,+1} or {0,1} in the last column".into(),
        ));
    };

    let x = Array2::from_shape_vec((n, d), rows)
        .map_err(|e| Error::Input(format!("shape error: {e}")))?;
    Ok((Dataset { x, y }, report))
}

/// Writes a dataset as CSV (features then label, no header).
pub fn save_csv(w: &mut impl IoWrite, data: &Dataset) -> Result<()> {
    for (row, &label) in data.x.outer_iter().zip(data.y.iter()) {
        let mut fields: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        fields.push(format!("{label}"));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}
