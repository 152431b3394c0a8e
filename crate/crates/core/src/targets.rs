//! Posterior targets: Bayesian logistic regression with an isotropic Gaussian
//! prior, the simulated-data generator, CSV ingestion, and a Monte Carlo
//! estimate of the per-datum Fisher information.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{check_finite, check_len, Error, Result};
use crate::linalg::{axpy, dot, SymMatrix};
use crate::precompute::QuadraticReference;
use crate::rng::RngStream;

/// Default prior variance; also the simulated-data prior `N(0, 25 I)`.
pub const DEFAULT_PRIOR_VARIANCE: f64 = 25.0;

/// A log-density `∝ exp(-U(θ))` with derivatives.
///
/// The `eval_*` methods do no validation; they are the hot path inside the
/// integrators, where non-finite states are caught as divergences instead.
pub trait Target: Sync {
    fn dim(&self) -> usize;
    fn eval_potential(&self, theta: &[f64]) -> f64;
    fn eval_gradient(&self, theta: &[f64], out: &mut [f64]);
    fn eval_hessian(&self, theta: &[f64]) -> SymMatrix;

    /// Log-likelihood without the prior, when the target has one.
    fn log_likelihood(&self, _theta: &[f64]) -> Option<f64> {
        None
    }
}

/// `log(1 + exp(z))` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary-label design with the intercept column prepended: row `i` of
/// `design` is `x̃ᵢ = [1, xᵢᵀ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    design: Vec<f64>,
    labels: Vec<u8>,
}

impl Dataset {
    /// Builds a dataset from raw feature rows (`n × (d−1)`, row-major) and
    /// labels in `{0, 1}`; the intercept column is prepended here.
    pub fn from_features(n: usize, d_minus_1: usize, features: &[f64], labels: Vec<u8>) -> Result<Self> {
        check_len(n * d_minus_1, features.len())?;
        check_len(n, labels.len())?;
        if n == 0 {
            return Err(Error::InvalidArgument("dataset has no rows".into()));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::InvalidArgument(format!("label {bad} is not in {{0,1}}")));
        }
        check_finite(features, "features")?;
        let d = d_minus_1 + 1;
        let mut design = Vec::with_capacity(n * d);
        for row in features.chunks_exact(d_minus_1.max(1)).take(n) {
            design.push(1.0);
            if d_minus_1 > 0 {
                design.extend_from_slice(row);
            }
        }
        if d_minus_1 == 0 {
            design.resize(n, 1.0);
        }
        Ok(Self { n, d, design, labels })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Parameter dimension `d` (features plus intercept).
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.design[i * self.d..(i + 1) * self.d]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn design(&self) -> &[f64] {
        &self.design
    }
}

/// Logistic-regression posterior with prior `N(0, prior_variance · I)`.
#[derive(Debug, Clone)]
pub struct LogisticPosterior {
    data: Dataset,
    prior_variance: f64,
}

impl LogisticPosterior {
    pub fn new(data: Dataset, prior_variance: f64) -> Result<Self> {
        if !(prior_variance > 0.0) || !prior_variance.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "prior variance must be positive, got {prior_variance}"
            )));
        }
        Ok(Self { data, prior_variance })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn prior_variance(&self) -> f64 {
        self.prior_variance
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        check_len(self.data.d, theta.len())?;
        check_finite(theta, "θ")
    }

    /// `U(θ)`: negative log-likelihood plus `θᵀθ / (2 v)`.
    pub fn potential(&self, theta: &[f64]) -> Result<f64> {
        self.check(theta)?;
        Ok(self.eval_potential(theta))
    }

    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check(theta)?;
        let mut g = vec![0.0; self.data.d];
        self.eval_gradient(theta, &mut g);
        Ok(g)
    }

    pub fn hessian(&self, theta: &[f64]) -> Result<SymMatrix> {
        self.check(theta)?;
        Ok(self.eval_hessian(theta))
    }

    fn neg_log_likelihood(&self, theta: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.data.n {
            let z = dot(self.data.row(i), theta);
            s += if self.data.labels[i] == 1 {
                softplus(-z)
            } else {
                softplus(z)
            };
        }
        s
    }

    /// SHA-256 over the design, labels and prior variance; keys the
    /// on-disk reference cache.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.data.n as u64).to_le_bytes());
        h.update((self.data.d as u64).to_le_bytes());
        for v in &self.data.design {
            h.update(v.to_le_bytes());
        }
        h.update(&self.data.labels);
        h.update(self.prior_variance.to_le_bytes());
        hex::encode(h.finalize())
    }
}

impl Target for LogisticPosterior {
    fn dim(&self) -> usize {
        self.data.d
    }

    fn eval_potential(&self, theta: &[f64]) -> f64 {
        self.neg_log_likelihood(theta) + dot(theta, theta) / (2.0 * self.prior_variance)
    }

    fn eval_gradient(&self, theta: &[f64], out: &mut [f64]) {
        let inv_v = 1.0 / self.prior_variance;
        for (o, t) in out.iter_mut().zip(theta) {
            *o = t * inv_v;
        }
        for i in 0..self.data.n {
            let row = self.data.row(i);
            let r = sigmoid(dot(row, theta)) - f64::from(self.data.labels[i]);
            axpy(r, row, out);
        }
    }

    fn eval_hessian(&self, theta: &[f64]) -> SymMatrix {
        let d = self.data.d;
        let mut h = vec![0.0; d * d];
        for i in 0..self.data.n {
            let row = self.data.row(i);
            let s = sigmoid(dot(row, theta));
            let w = s * (1.0 - s);
            for a in 0..d {
                let wa = w * row[a];
                let ha = &mut h[a * d..a * d + a + 1];
                for (hb, xb) in ha.iter_mut().zip(row) {
                    *hb += wa * xb;
                }
            }
        }
        let inv_v = 1.0 / self.prior_variance;
        for a in 0..d {
            h[a * d + a] += inv_v;
            for b in 0..a {
                h[b * d + a] = h[a * d + b];
            }
        }
        SymMatrix::new(d, h).expect("square by construction")
    }

    fn log_likelihood(&self, theta: &[f64]) -> Option<f64> {
        Some(-self.neg_log_likelihood(theta))
    }
}

/// Gaussian target `U(θ) = ½ (θ−μ)ᵀ P (θ−μ)`.
#[derive(Debug, Clone)]
pub struct GaussianTarget {
    mean: Vec<f64>,
    precision: SymMatrix,
}

impl GaussianTarget {
    pub fn new(mean: Vec<f64>, precision: SymMatrix) -> Result<Self> {
        check_len(precision.dim(), mean.len())?;
        Ok(Self { mean, precision })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn precision(&self) -> &SymMatrix {
        &self.precision
    }

    fn centered(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().zip(&self.mean).map(|(t, m)| t - m).collect()
    }
}

impl Target for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn eval_potential(&self, theta: &[f64]) -> f64 {
        self.precision.half_quadratic(&self.centered(theta))
    }

    fn eval_gradient(&self, theta: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.precision.mul_vec(&self.centered(theta)));
    }

    fn eval_hessian(&self, _theta: &[f64]) -> SymMatrix {
        self.precision.clone()
    }
}

/// `U = U0 + U1` where `U0(θ) = ½ (θ−θ*)ᵀ J (θ−θ*)` is the quadratic
/// reference at the mode.
pub struct SplitPotential<'a, T: Target + ?Sized> {
    pub target: &'a T,
    pub reference: &'a QuadraticReference,
}

impl<'a, T: Target + ?Sized> SplitPotential<'a, T> {
    pub fn new(target: &'a T, reference: &'a QuadraticReference) -> Self {
        Self { target, reference }
    }

    pub fn u0(&self, theta: &[f64]) -> f64 {
        self.reference.hessian().half_quadratic(&self.reference.offset(theta))
    }

    pub fn grad_u0(&self, theta: &[f64]) -> Vec<f64> {
        self.reference.hessian().mul_vec(&self.reference.offset(theta))
    }

    pub fn u1(&self, theta: &[f64]) -> f64 {
        self.target.eval_potential(theta) - self.u0(theta)
    }

    /// `∇U1(θ) = ∇U(θ) − J (θ − θ*)`.
    pub fn grad_u1(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; theta.len()];
        self.target.eval_gradient(theta, &mut g);
        let g0 = self.grad_u0(theta);
        for (gi, g0i) in g.iter_mut().zip(g0) {
            *gi -= g0i;
        }
        g
    }
}

/// Feature variance `σⱼ²` of the simulated design (1-based `j`).
pub fn simdata_feature_variance(j: usize) -> f64 {
    match j {
        0..=5 => 25.0,
        6..=10 => 1.0,
        _ => 0.04,
    }
}

/// Simulated dataset together with the parameters that generated it.
#[derive(Debug, Clone)]
pub struct SimData {
    pub dataset: Dataset,
    pub true_theta: Vec<f64>,
}

/// Draws `θ̂ ~ N(0, γ² I)` (intercept included), then for each row
/// `xⱼ ~ N(0, σⱼ²)` followed by `yᵢ ~ Bernoulli(σ(θ̂ᵀx̃ᵢ))`. With a fixed seed
/// the first `m` rows of an `n`-row draw equal an `m`-row draw.
pub fn generate_simdata(stream: &mut RngStream, n: usize, d_minus_1: usize, gamma2: f64) -> Result<SimData> {
    if n == 0 || d_minus_1 == 0 {
        return Err(Error::InvalidArgument("simulated data needs n ≥ 1 and d−1 ≥ 1".into()));
    }
    if !(gamma2 > 0.0) {
        return Err(Error::InvalidArgument(format!("γ² must be positive, got {gamma2}")));
    }
    let gamma = gamma2.sqrt();
    let true_theta: Vec<f64> = (0..=d_minus_1).map(|_| gamma * stream.standard_normal()).collect();
    let sds: Vec<f64> = (1..=d_minus_1).map(|j| simdata_feature_variance(j).sqrt()).collect();
    let mut features = Vec::with_capacity(n * d_minus_1);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let start = features.len();
        for sd in &sds {
            features.push(sd * stream.standard_normal());
        }
        let z = true_theta[0] + dot(&true_theta[1..], &features[start..]);
        labels.push(u8::from(stream.bernoulli(sigmoid(z))?));
    }
    Ok(SimData {
        dataset: Dataset::from_features(n, d_minus_1, &features, labels)?,
        true_theta,
    })
}

/// Monte Carlo estimate of the per-datum Fisher information at `θ̂`,
/// `E[σ(1−σ) x̃x̃ᵀ]`, with fresh design rows `xⱼ ~ N(0, feature_variances[j])`.
pub fn fisher_info_mc(
    true_theta: &[f64],
    stream: &mut RngStream,
    n_mc: usize,
    feature_variances: &[f64],
) -> Result<SymMatrix> {
    check_len(true_theta.len(), feature_variances.len() + 1)?;
    if n_mc == 0 {
        return Err(Error::InvalidArgument("n_mc must be at least 1".into()));
    }
    let d = true_theta.len();
    let sds: Vec<f64> = feature_variances.iter().map(|v| v.sqrt()).collect();
    let mut acc = vec![0.0; d * d];
    let mut x = vec![1.0; d];
    for _ in 0..n_mc {
        for (xj, sd) in x[1..].iter_mut().zip(&sds) {
            *xj = sd * stream.standard_normal();
        }
        let s = sigmoid(dot(&x, true_theta));
        let w = s * (1.0 - s);
        for a in 0..d {
            let wa = w * x[a];
            for b in 0..=a {
                acc[a * d + b] += wa * x[b];
            }
        }
    }
    let scale = 1.0 / n_mc as f64;
    for a in 0..d {
        for b in 0..=a {
            acc[a * d + b] *= scale;
            acc[b * d + a] = acc[a * d + b];
        }
    }
    SymMatrix::new(d, acc)
}

/// Optional JSON sidecar describing a dataset file.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct DatasetManifest {
    /// CSV path, relative to the manifest's directory.
    pub file: PathBuf,
    /// Zero-based label column; defaults to the last column.
    #[serde(default)]
    pub label_column: Option<usize>,
    /// Raw label → class. Defaults to `"0" → 0`, `"1" → 1`.
    #[serde(default)]
    pub class_map: Option<BTreeMap<String, u8>>,
    /// Whether the first row is a header; auto-detected when absent.
    #[serde(default)]
    pub header: Option<bool>,
}

/// Loads a CSV dataset, or a JSON manifest pointing at one.
///
/// Rows are `d−1` numeric features plus one label column (last by default).
/// A first row that does not parse as numbers is treated as a header.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let manifest: DatasetManifest = serde_json::from_str(&fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        load_csv(&base.join(&manifest.file), &manifest)
    } else {
        load_csv(
            path,
            &DatasetManifest {
                file: path.to_path_buf(),
                ..Default::default()
            },
        )
    }
}

fn load_csv(path: &Path, manifest: &DatasetManifest) -> Result<Dataset> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(fs::File::open(path)?);

    let map_label = |raw: &str| -> Option<u8> {
        match &manifest.class_map {
            Some(m) => m.get(raw).copied(),
            None => match raw.parse::<f64>() {
                Ok(v) if v == 0.0 => Some(0),
                Ok(v) if v == 1.0 => Some(1),
                _ => None,
            },
        }
    };

    let mut width: Option<usize> = None;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let w = record.len();
        if w < 2 {
            return Err(parse_err(line, "need at least one feature and a label".into()));
        }
        let label_col = manifest.label_column.unwrap_or(w - 1);
        if label_col >= w {
            return Err(parse_err(line, format!("label column {label_col} out of range")));
        }
        let is_header_row = first
            && manifest.header.unwrap_or_else(|| {
                record
                    .iter()
                    .enumerate()
                    .any(|(k, f)| k != label_col && f.parse::<f64>().is_err())
                    || map_label(&record[label_col]).is_none()
            });
        first = false;
        if is_header_row {
            continue;
        }
        match width {
            None => width = Some(w),
            Some(expected) if expected != w => {
                return Err(parse_err(line, format!("ragged row: {w} columns, expected {expected}")));
            }
            _ => {}
        }
        for (k, f) in record.iter().enumerate() {
            if k == label_col {
                continue;
            }
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(line, format!("column {k}: '{f}' is not a number")))?;
            features.push(v);
        }
        let raw = &record[label_col];
        labels.push(map_label(raw).ok_or_else(|| parse_err(line, format!("label '{raw}' is not binary")))?);
    }
    let width = width.ok_or_else(|| parse_err(0, "no data rows".into()))?;
    Dataset::from_features(labels.len(), width - 1, &features, labels)
}
