//! Least-squares SVM with an RBF kernel.
//!
//! Binary models solve the bordered system
//!
//! ```text
//! [ 0   1ᵀ        ] [b]   [0]
//! [ 1   K + I/γ   ] [β] = [y]
//! ```
//!
//! which is the usual LS-SVM classifier system rewritten with `β_i = α_i y_i`;
//! the decision value is `f(x) = Σ β_i k(x_i, x) + b`. One-class models drop
//! the bias and fit `f ≡ 1` on the positives, `(K + I/γ) β = 1`, so `f`
//! decays to 0 away from the data; their score is `2f − 1`.
//!
//! Inputs are standardized with statistics of the training set, stored in
//! the model.

mod grid;

use std::path::Path;
use std::sync::Once;

use faer::prelude::*;
use faer::Mat;

pub use grid::{
    cv_accuracy, cv_accuracy_one_class, grid_search, grid_search_one_class, log_grid, stratified_folds,
    GridChoice, GridSpec,
};

use crate::binfmt::{RecordReader, RecordWriter};
use crate::complexity::ZScoreStats;
use crate::error::{Error, Result};

const MODEL_MAGIC: &[u8; 4] = b"SVLS";
const MODEL_VERSION: u32 = 1;
/// Largest accepted relative residual of the solved linear system.
pub const MAX_RELATIVE_RESIDUAL: f64 = 1e-6;

static SEQUENTIAL_LINALG: Once = Once::new();

/// Dense kernels run single-threaded; parallelism lives at the model level,
/// which also keeps results independent of the thread count.
pub(crate) fn init_linalg() {
    SEQUENTIAL_LINALG.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Binary,
    OneClass,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LssvmModel {
    pub mode: Mode,
    pub sigma: f64,
    pub gamma: f64,
    pub input_dim: usize,
    pub scaling: ZScoreStats,
    /// Standardized training inputs.
    pub training_inputs: Vec<Vec<f64>>,
    /// Kernel expansion coefficients (`β` above).
    pub alphas: Vec<f64>,
    pub bias: f64,
    /// Relative residual of the training solve.
    pub residual: f64,
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `exp(−‖x − y‖² / (2σ²))`.
pub fn rbf_kernel(x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimMismatch { expected: x.len(), got: y.len() });
    }
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("kernel width must be positive, got {sigma}")));
    }
    Ok((-sq_dist(x, y) / (2.0 * sigma * sigma)).exp())
}

pub(crate) fn sq_dist_matrix(z: &[Vec<f64>]) -> Vec<f64> {
    let n = z.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = sq_dist(&z[i], &z[j]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

fn check_inputs(x: &[Vec<f64>]) -> Result<usize> {
    let dim = x.first().map_or(0, Vec::len);
    if let Some(bad) = x.iter().find(|r| r.len() != dim) {
        return Err(Error::DimMismatch { expected: dim, got: bad.len() });
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData("non-finite classifier input".into()));
    }
    Ok(dim)
}

fn check_hyper(sigma: f64, gamma: f64) -> Result<()> {
    if !(sigma > 0.0 && gamma > 0.0 && sigma.is_finite() && gamma.is_finite()) {
        return Err(Error::Config(format!("invalid hyperparameters sigma={sigma} gamma={gamma}")));
    }
    Ok(())
}

/// Solves the training system on already standardized inputs.
/// Returns `(coefficients, bias, relative residual)`.
pub(crate) fn solve_standardized(
    z: &[Vec<f64>],
    y: &[f64],
    sigma: f64,
    gamma: f64,
    mode: Mode,
) -> Result<(Vec<f64>, f64, f64)> {
    init_linalg();
    let n = z.len();
    let d = sq_dist_matrix(z);
    let scale = -1.0 / (2.0 * sigma * sigma);
    let kernel = |i: usize, j: usize| if i == j { 1.0 + 1.0 / gamma } else { (d[i * n + j] * scale).exp() };

    let (a, rhs) = match mode {
        Mode::Binary => {
            let a = Mat::<f64>::from_fn(n + 1, n + 1, |i, j| match (i, j) {
                (0, 0) => 0.0,
                (0, _) | (_, 0) => 1.0,
                _ => kernel(i - 1, j - 1),
            });
            let rhs = Mat::<f64>::from_fn(n + 1, 1, |i, _| if i == 0 { 0.0 } else { y[i - 1] });
            (a, rhs)
        }
        Mode::OneClass => (Mat::<f64>::from_fn(n, n, kernel), Mat::<f64>::from_fn(n, 1, |_, _| 1.0)),
    };
    let sol = a.partial_piv_lu().solve(&rhs);
    let resid = &a * &sol - &rhs;
    let rhs_norm = rhs.norm_l2();
    let residual = resid.norm_l2() / if rhs_norm > 0.0 { rhs_norm } else { 1.0 };
    let values: Vec<f64> = (0..sol.nrows()).map(|i| sol[(i, 0)]).collect();
    if values.iter().any(|v| !v.is_finite()) || !(residual < MAX_RELATIVE_RESIDUAL) {
        return Err(Error::SingularSystem(format!("relative residual {residual:e}")));
    }
    Ok(match mode {
        Mode::Binary => (values[1..].to_vec(), values[0], residual),
        Mode::OneClass => (values, 0.0, residual),
    })
}

impl LssvmModel {
    /// Binary model; labels must be ±1 with both classes present.
    pub fn train(x: &[Vec<f64>], y: &[f64], sigma: f64, gamma: f64) -> Result<Self> {
        check_hyper(sigma, gamma)?;
        if x.len() != y.len() {
            return Err(Error::InsufficientData(format!("{} inputs but {} labels", x.len(), y.len())));
        }
        if x.len() < 2 {
            return Err(Error::InsufficientData("binary training needs at least two examples".into()));
        }
        if y.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::Config("labels must be +1 or -1".into()));
        }
        if !(y.contains(&1.0) && y.contains(&-1.0)) {
            return Err(Error::InsufficientData("binary training needs both classes".into()));
        }
        Self::fit(x, y, sigma, gamma, Mode::Binary)
    }

    /// One-class model on positives only.
    pub fn train_one_class(x: &[Vec<f64>], sigma: f64, gamma: f64) -> Result<Self> {
        check_hyper(sigma, gamma)?;
        if x.is_empty() {
            return Err(Error::InsufficientData("one-class training needs data".into()));
        }
        Self::fit(x, &vec![1.0; x.len()], sigma, gamma, Mode::OneClass)
    }

    fn fit(x: &[Vec<f64>], y: &[f64], sigma: f64, gamma: f64, mode: Mode) -> Result<Self> {
        let input_dim = check_inputs(x)?;
        let scaling = ZScoreStats::fit(x);
        let z = scaling.apply_all(x);
        let (alphas, bias, residual) = solve_standardized(&z, y, sigma, gamma, mode)?;
        Ok(Self { mode, sigma, gamma, input_dim, scaling, training_inputs: z, alphas, bias, residual })
    }

    /// Raw decision value `f(x)`.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim {
            return Err(Error::DimMismatch { expected: self.input_dim, got: x.len() });
        }
        let z = self.scaling.apply(x);
        let scale = -1.0 / (2.0 * self.sigma * self.sigma);
        let f = self
            .training_inputs
            .iter()
            .zip(&self.alphas)
            .map(|(t, a)| a * (sq_dist(t, &z) * scale).exp())
            .sum::<f64>()
            + self.bias;
        Ok(f)
    }

    /// Binary: `f(x)`. One-class: `2 f(x) − 1`.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        let f = self.decision(x)?;
        Ok(match self.mode {
            Mode::Binary => f,
            Mode::OneClass => 2.0 * f - 1.0,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = RecordWriter::new(MODEL_MAGIC, MODEL_VERSION);
        w.put_u64(match self.mode {
            Mode::Binary => 0,
            Mode::OneClass => 1,
        });
        w.put_u64(self.input_dim as u64)
            .put_u64(self.training_inputs.len() as u64)
            .put_f64(self.sigma)
            .put_f64(self.gamma)
            .put_f64(self.bias)
            .put_f64(self.residual)
            .put_f64s(&self.scaling.mean)
            .put_f64s(&self.scaling.std)
            .put_f64s(&self.alphas);
        for row in &self.training_inputs {
            w.put_f64s(row);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = RecordReader::new(bytes, MODEL_MAGIC)?;
        if r.version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {}", r.version)));
        }
        let mode = match r.get_u64()? {
            0 => Mode::Binary,
            1 => Mode::OneClass,
            m => return Err(Error::Format(format!("unknown model mode {m}"))),
        };
        let input_dim = r.get_u64()? as usize;
        let n = r.get_u64()? as usize;
        let sigma = r.get_f64()?;
        let gamma = r.get_f64()?;
        let bias = r.get_f64()?;
        let residual = r.get_f64()?;
        let mean = r.get_f64s()?;
        let std = r.get_f64s()?;
        let alphas = r.get_f64s()?;
        if alphas.len() != n || mean.len() != input_dim || std.len() != input_dim {
            return Err(Error::Format("model arrays disagree with header".into()));
        }
        let training_inputs = (0..n).map(|_| r.get_f64s()).collect::<Result<Vec<_>>>()?;
        if training_inputs.iter().any(|t| t.len() != input_dim) {
            return Err(Error::Format("training input of wrong dimension".into()));
        }
        r.finish()?;
        Ok(Self {
            mode,
            sigma,
            gamma,
            input_dim,
            scaling: ZScoreStats { mean, std },
            training_inputs,
            alphas,
            bias,
            residual,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
