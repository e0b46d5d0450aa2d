//! Mercer kernels and Gram-matrix assembly.
//!
//! Two kernels come from the simulation setup (`MinPlusOne` for the
//! first-order Sobolev space on [0,1], `WendlandG3` for its compactly
//! supported radial counterpart on [0,1]^3); the Gaussian kernel is an
//! extra for harness flexibility.

use nalgebra::DMatrix;

use crate::error::{KgdError, Result};
use crate::spectral::KernelMatrix;

pub const DEFAULT_GAUSSIAN_BANDWIDTH: f64 = 0.2;

/// Which Mercer kernel to use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    /// K(x, x') = 1 + min(x, x') on [0,1]; one-dimensional inputs only.
    MinPlusOne,
    /// K(x, x') = (1 - r)^4 (4r + 1) with r = ||x - x'||_2, zero for r >= 1.
    WendlandG3,
    /// K(x, x') = exp(-r^2 / (2 h^2)) with bandwidth h.
    Gaussian { bandwidth: f64 },
}

/// A kernel together with the input dimension it operates on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    kind: KernelKind,
    input_dim: usize,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, input_dim: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(KgdError::Input("input_dim must be >= 1".into()));
        }
        match kind {
            KernelKind::MinPlusOne if input_dim != 1 => {
                return Err(KgdError::Input(format!(
                    "MinPlusOne kernel requires input_dim = 1, got {input_dim}"
                )));
            }
            KernelKind::Gaussian { bandwidth } if !(bandwidth > 0.0) => {
                return Err(KgdError::Input(format!(
                    "Gaussian bandwidth must be positive, got {bandwidth}"
                )));
            }
            _ => {}
        }
        Ok(Self { kind, input_dim })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// kappa^2 = sup_x K(x, x) over the unit cube, in closed form per kernel.
    pub fn kappa_sq(&self) -> f64 {
        match self.kind {
            // K(x, x) = 1 + x <= 2 on [0,1]
            KernelKind::MinPlusOne => 2.0,
            // g3(0) = 1
            KernelKind::WendlandG3 => 1.0,
            // exp(0) = 1
            KernelKind::Gaussian { .. } => 1.0,
        }
    }

    /// Largest gradient-descent step size with guaranteed convergence.
    pub fn max_step_size(&self) -> f64 {
        1.0 / self.kappa_sq()
    }

    /// Evaluate K(x, x').
    pub fn eval(&self, x: &[f64], x_other: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim || x_other.len() != self.input_dim {
            return Err(KgdError::Input(format!(
                "point dimension mismatch: kernel expects {}, got {} and {}",
                self.input_dim,
                x.len(),
                x_other.len()
            )));
        }
        Ok(match self.kind {
            KernelKind::MinPlusOne => 1.0 + x[0].min(x_other[0]),
            KernelKind::WendlandG3 => wendland_g3(l2_distance(x, x_other)),
            KernelKind::Gaussian { bandwidth } => {
                let r = l2_distance(x, x_other);
                (-r * r / (2.0 * bandwidth * bandwidth)).exp()
            }
        })
    }
}

/// g3(r) = (1 - r)^4 (4r + 1) on [0, 1], identically zero beyond.
pub fn wendland_g3(r: f64) -> f64 {
    if r >= 1.0 {
        return 0.0;
    }
    let s = 1.0 - r;
    let s2 = s * s;
    s2 * s2 * (4.0 * r + 1.0)
}

fn l2_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// eval_kernel as a free function; forwards to [`KernelSpec::eval`].
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], x_other: &[f64]) -> Result<f64> {
    spec.eval(x, x_other)
}

/// A training sample: points in [0,1]^d with matching outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(KgdError::Input("dataset must contain at least one sample".into()));
        }
        if inputs.len() != outputs.len() {
            return Err(KgdError::Input(format!(
                "inputs ({}) and outputs ({}) must have equal length",
                inputs.len(),
                outputs.len()
            )));
        }
        let dim = inputs[0].len();
        if dim == 0 {
            return Err(KgdError::Input("input points must have dimension >= 1".into()));
        }
        for (i, p) in inputs.iter().enumerate() {
            if p.len() != dim {
                return Err(KgdError::Input(format!(
                    "input {} has dimension {}, expected {}",
                    i,
                    p.len(),
                    dim
                )));
            }
            for &coord in p {
                if !(0.0..=1.0).contains(&coord) {
                    return Err(KgdError::Input(format!(
                        "input {i} has coordinate {coord} outside [0,1]"
                    )));
                }
            }
        }
        for (i, &y) in outputs.iter().enumerate() {
            if !y.is_finite() {
                return Err(KgdError::Input(format!("output {i} is not finite")));
            }
        }
        Ok(Self { inputs, outputs })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    /// New dataset from the samples at `indices` (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let inputs = indices.iter().map(|&i| self.inputs[i].clone()).collect();
        let outputs = indices.iter().map(|&i| self.outputs[i]).collect();
        Dataset::new(inputs, outputs)
    }
}

/// Assemble the n x n Gram matrix entries K(x_i, x_j).
///
/// Entries are evaluated independently, once per (i, j) pair with the
/// upper triangle mirrored, so the matrix is symmetric to the last bit.
pub fn gram_entries(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = points.len();
    if n == 0 {
        return Err(KgdError::Input("need at least one point".into()));
    }
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = spec.eval(&points[i], &points[j])?;
            if !v.is_finite() {
                return Err(KgdError::Numeric(format!(
                    "kernel value at ({i}, {j}) is not finite: {v}"
                )));
            }
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Cross Gram matrix G[i, j] = K(train[j], eval[i]), for batch prediction.
pub fn cross_gram(
    spec: &KernelSpec,
    train_points: &[Vec<f64>],
    eval_points: &[Vec<f64>],
) -> Result<DMatrix<f64>> {
    let mut g = DMatrix::zeros(eval_points.len(), train_points.len());
    for (i, x) in eval_points.iter().enumerate() {
        for (j, z) in train_points.iter().enumerate() {
            g[(i, j)] = spec.eval(z, x)?;
        }
    }
    Ok(g)
}

/// Gram matrix with its cached eigendecomposition.
pub fn build_kernel_matrix(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<KernelMatrix> {
    KernelMatrix::from_entries(gram_entries(spec, points)?)
}
