//! The kernel gradient-descent coefficient iteration, increment norms,
//! prediction, and the spectral closed form used as a test oracle.
//!
//! Production code always advances by the O(n^2) coefficient recursion
//!
//! ```text
//! c_{t+1} = c_t - (beta / n) (K c_t - y),    c_0 = 0,
//! ```
//!
//! which is exactly what the stopping rules instrument. The closed-form
//! spectral filter exists so tests can check the recursion against an
//! independent route.

use nalgebra::DVector;

use crate::error::{KgdError, Result};
use crate::kernels::KernelSpec;
use crate::spectral::KernelMatrix;

/// Coefficient state of a KGD run.
#[derive(Debug, Clone)]
pub struct KgdState {
    coeffs: DVector<f64>,
    prev_coeffs: DVector<f64>,
    t: usize,
    beta: f64,
}

impl KgdState {
    /// Fresh state at t = 0 with all-zero coefficients.
    ///
    /// `beta` must satisfy 0 < beta <= 1/kappa_sq; larger steps lose the
    /// descent guarantee.
    pub fn new(n: usize, beta: f64, kappa_sq: f64) -> Result<Self> {
        if n == 0 {
            return Err(KgdError::Input("state dimension must be >= 1".into()));
        }
        if !(beta > 0.0) || beta > 1.0 / kappa_sq {
            return Err(KgdError::Input(format!(
                "step size {beta} outside (0, {}]",
                1.0 / kappa_sq
            )));
        }
        Ok(Self {
            coeffs: DVector::zeros(n),
            prev_coeffs: DVector::zeros(0),
            t: 0,
            beta,
        })
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    /// Coefficients of the previous iterate; empty at t = 0.
    pub fn prev_coeffs(&self) -> &DVector<f64> {
        &self.prev_coeffs
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// One gradient step: c <- c - (beta/n) (K c - y).
    pub fn step(&mut self, matrix: &KernelMatrix, y: &DVector<f64>) -> Result<()> {
        let n = matrix.n();
        if self.coeffs.len() != n || y.len() != n {
            return Err(KgdError::Input(format!(
                "dimension mismatch: state {}, matrix {}, y {}",
                self.coeffs.len(),
                n,
                y.len()
            )));
        }
        let mut grad = matrix.entries() * &self.coeffs;
        grad -= y;
        let mut next = self.coeffs.clone();
        next.axpy(-self.beta / n as f64, &grad, 1.0);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(KgdError::Numeric(format!(
                "diverging iteration: non-finite coefficients at t = {}",
                self.t + 1
            )));
        }
        self.prev_coeffs = std::mem::replace(&mut self.coeffs, next);
        self.t += 1;
        Ok(())
    }
}

/// Functional form of [`KgdState::step`].
pub fn kgd_step(mut state: KgdState, matrix: &KernelMatrix, y: &DVector<f64>) -> Result<KgdState> {
    state.step(matrix, y)?;
    Ok(state)
}

/// Spectral filter g_t(u) = (1 - (1 - beta u)^t) / u, with g_t(0) = beta t
/// by continuity.
fn gd_filter(u: f64, t: usize, beta: f64) -> f64 {
    if t == 0 {
        return 0.0;
    }
    if u == 0.0 {
        return beta * t as f64;
    }
    let bu = beta * u;
    if bu >= 1.0 {
        // only reachable when beta u rounds to >= 1; the power term vanishes
        (1.0 - (1.0 - bu).powi(t as i32)) / u
    } else {
        // (1 - bu)^t = exp(t ln(1 - bu)), evaluated without cancellation
        -((t as f64) * (-bu).ln_1p()).exp_m1() / u
    }
}

/// Coefficients after t iterations via the eigendecomposition:
/// c_t = (1/n) V diag(g_t(sigma_i / n)) V^T y.
///
/// Test oracle only; production paths use the recursion.
pub fn kgd_closed_form(
    matrix: &KernelMatrix,
    y: &DVector<f64>,
    t: usize,
    beta: f64,
) -> DVector<f64> {
    let n = matrix.n();
    assert_eq!(y.len(), n, "y length must match matrix size");
    let z = matrix.eigvecs().transpose() * y;
    let filtered = DVector::from_iterator(
        n,
        z.iter()
            .zip(matrix.eigvals().iter())
            .map(|(&zi, &sigma)| gd_filter(sigma / n as f64, t, beta) * zi / n as f64),
    );
    matrix.eigvecs() * filtered
}

/// The two norms of the increment f_{t+1} - f_t expressed through its
/// coefficient difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementNorms {
    /// ||f_{t+1} - f_t||_D = sqrt((1/n) delta^T K^2 delta)
    pub d_norm: f64,
    /// ||f_{t+1} - f_t||_K = sqrt(delta^T K delta)
    pub k_norm: f64,
}

/// Quadratic-form norms of the coefficient increment `cur - prev`.
///
/// Tiny negative quadratic forms (within -1e-12 ||delta||^2 trace) are
/// rounding noise and clamp to zero; anything below that is an error.
pub fn increment_norms(
    prev: &DVector<f64>,
    cur: &DVector<f64>,
    matrix: &KernelMatrix,
) -> Result<IncrementNorms> {
    let n = matrix.n();
    if prev.len() != n || cur.len() != n {
        return Err(KgdError::Input(format!(
            "dimension mismatch: vectors {} and {}, matrix {}",
            prev.len(),
            cur.len(),
            n
        )));
    }
    let delta = cur - prev;
    let k_delta = matrix.entries() * &delta;
    let k_sq = delta.dot(&k_delta);
    let d_sq = k_delta.norm_squared() / n as f64;
    let clamp = 1e-12 * delta.norm_squared() * matrix.trace();
    let k_sq = clamp_quadratic(k_sq, clamp, "K-norm")?;
    let d_sq = clamp_quadratic(d_sq, clamp, "D-norm")?;
    Ok(IncrementNorms {
        d_norm: d_sq.sqrt(),
        k_norm: k_sq.sqrt(),
    })
}

fn clamp_quadratic(value: f64, clamp: f64, label: &str) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -clamp {
        Ok(0.0)
    } else {
        Err(KgdError::Numeric(format!(
            "{label} quadratic form {value} below clamp threshold -{clamp}"
        )))
    }
}

/// Evaluate f(x) = sum_i c_i K(x_i, x).
pub fn predict(
    spec: &KernelSpec,
    train_inputs: &[Vec<f64>],
    coeffs: &DVector<f64>,
    x: &[f64],
) -> Result<f64> {
    if train_inputs.len() != coeffs.len() {
        return Err(KgdError::Input(format!(
            "coefficient count {} does not match training point count {}",
            coeffs.len(),
            train_inputs.len()
        )));
    }
    let mut acc = 0.0;
    for (xi, &c) in train_inputs.iter().zip(coeffs.iter()) {
        acc += c * spec.eval(xi, x)?;
    }
    Ok(acc)
}

/// Cached KGD run: coefficient iterates c_t and their Gram images K c_t,
/// extended lazily as stopping rules scan forward.
///
/// K c_t holds the fitted values f_t(x_i), so oracle/hold-out style scans
/// and pairwise iterate distances are O(n) per query once cached.
pub struct KgdTrace<'a> {
    matrix: &'a KernelMatrix,
    y: DVector<f64>,
    beta: f64,
    coeffs: Vec<DVector<f64>>,
    fitted: Vec<DVector<f64>>,
    incr: Vec<IncrementNorms>,
}

impl<'a> KgdTrace<'a> {
    pub fn new(matrix: &'a KernelMatrix, y: DVector<f64>, beta: f64, kappa_sq: f64) -> Result<Self> {
        if y.len() != matrix.n() {
            return Err(KgdError::Input(format!(
                "y length {} does not match matrix size {}",
                y.len(),
                matrix.n()
            )));
        }
        if !(beta > 0.0) || beta > 1.0 / kappa_sq {
            return Err(KgdError::Input(format!(
                "step size {beta} outside (0, {}]",
                1.0 / kappa_sq
            )));
        }
        let n = matrix.n();
        Ok(Self {
            matrix,
            y,
            beta,
            coeffs: vec![DVector::zeros(n)],
            fitted: vec![DVector::zeros(n)],
            incr: Vec::new(),
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn matrix(&self) -> &KernelMatrix {
        self.matrix
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Extend the recursion so that c_0..c_t are available.
    pub fn ensure_iterates(&mut self, t: usize) -> Result<()> {
        let n = self.matrix.n() as f64;
        while self.coeffs.len() <= t {
            let cur = self.coeffs.last().expect("trace holds c_0");
            let fit = self.fitted.last().expect("trace holds K c_0");
            let mut next = cur.clone();
            next.axpy(-self.beta / n, &(fit - &self.y), 1.0);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(KgdError::Numeric(format!(
                    "diverging iteration: non-finite coefficients at t = {}",
                    self.coeffs.len()
                )));
            }
            let next_fit = self.matrix.entries() * &next;
            self.coeffs.push(next);
            self.fitted.push(next_fit);
        }
        Ok(())
    }

    /// Coefficients c_t (requires `ensure_iterates(t)` first).
    pub fn coeffs(&self, t: usize) -> &DVector<f64> {
        &self.coeffs[t]
    }

    /// Fitted values K c_t at the training points.
    pub fn fitted(&self, t: usize) -> &DVector<f64> {
        &self.fitted[t]
    }

    /// Increment norms between c_t and c_{t+1}.
    pub fn increment(&mut self, t: usize) -> Result<IncrementNorms> {
        self.ensure_iterates(t + 1)?;
        while self.incr.len() <= t {
            let k = self.incr.len();
            let norms = increment_norms(&self.coeffs[k], &self.coeffs[k + 1], self.matrix)?;
            self.incr.push(norms);
        }
        Ok(self.incr[t])
    }

    /// ||f_{t2} - f_{t1}||_D via cached fitted values.
    pub fn d_distance(&self, t1: usize, t2: usize) -> f64 {
        let diff = &self.fitted[t2] - &self.fitted[t1];
        (diff.norm_squared() / self.matrix.n() as f64).sqrt()
    }

    /// ||f_{t2} - f_{t1}||_K^2 via cached iterates; rounding noise clamps to 0.
    pub fn k_distance_sq(&self, t1: usize, t2: usize) -> f64 {
        let dc = &self.coeffs[t2] - &self.coeffs[t1];
        let df = &self.fitted[t2] - &self.fitted[t1];
        dc.dot(&df).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{build_kernel_matrix, KernelKind, KernelSpec};

    fn small_problem() -> (KernelSpec, KernelMatrix, DVector<f64>) {
        let spec = KernelSpec::new(KernelKind::MinPlusOne, 1).unwrap();
        let points: Vec<Vec<f64>> = [0.1, 0.35, 0.6, 0.85].iter().map(|&x| vec![x]).collect();
        let matrix = build_kernel_matrix(&spec, &points).unwrap();
        let y = DVector::from_vec(vec![0.4, -0.2, 0.9, 0.1]);
        (spec, matrix, y)
    }

    #[test]
    fn first_step_is_scaled_data() {
        let (spec, matrix, y) = small_problem();
        let beta = spec.max_step_size();
        let mut state = KgdState::new(4, beta, spec.kappa_sq()).unwrap();
        state.step(&matrix, &y).unwrap();
        let expected = &y * (beta / 4.0);
        assert!((state.coeffs() - expected).norm() < 1e-15);
        assert_eq!(state.t(), 1);
        assert_eq!(state.prev_coeffs(), &DVector::<f64>::zeros(4));
    }

    #[test]
    fn zero_data_is_fixed_point() {
        let (spec, matrix, _) = small_problem();
        let y = DVector::zeros(4);
        let mut state = KgdState::new(4, 0.5, spec.kappa_sq()).unwrap();
        for _ in 0..10 {
            state.step(&matrix, &y).unwrap();
        }
        assert_eq!(state.coeffs().norm(), 0.0);
    }

    #[test]
    fn step_size_bound_enforced() {
        assert!(KgdState::new(3, 0.51, 2.0).is_err());
        assert!(KgdState::new(3, 0.5, 2.0).is_ok());
        assert!(KgdState::new(3, 0.0, 2.0).is_err());
    }

    #[test]
    fn closed_form_edge_cases() {
        let (spec, matrix, y) = small_problem();
        let beta = spec.max_step_size();
        let c0 = kgd_closed_form(&matrix, &y, 0, beta);
        assert_eq!(c0.norm(), 0.0);
        let c1 = kgd_closed_form(&matrix, &y, 1, beta);
        let expected = &y * (beta / 4.0);
        assert!((c1 - expected).norm() < 1e-12);
    }

    #[test]
    fn increment_norms_zero_and_scalar() {
        let (_, matrix, _) = small_problem();
        let v = DVector::from_vec(vec![0.3, -0.1, 0.2, 0.0]);
        let norms = increment_norms(&v, &v, &matrix).unwrap();
        assert_eq!((norms.d_norm, norms.k_norm), (0.0, 0.0));

        // n = 1, K = [k], delta = [a]: k_norm = |a| sqrt(k), d_norm = |a| k
        let spec = KernelSpec::new(KernelKind::MinPlusOne, 1).unwrap();
        let matrix = build_kernel_matrix(&spec, &[vec![0.5]]).unwrap();
        let k = 1.5;
        let a = -0.7_f64;
        let norms = increment_norms(
            &DVector::zeros(1),
            &DVector::from_vec(vec![a]),
            &matrix,
        )
        .unwrap();
        assert!((norms.k_norm - a.abs() * k.sqrt()).abs() < 1e-15);
        assert!((norms.d_norm - a.abs() * k).abs() < 1e-15);
    }

    #[test]
    fn predict_trivial_cases() {
        let spec = KernelSpec::new(KernelKind::MinPlusOne, 1).unwrap();
        let pts = vec![vec![0.2], vec![0.8]];
        let zero = DVector::zeros(2);
        assert_eq!(predict(&spec, &pts, &zero, &[0.5]).unwrap(), 0.0);

        let one = DVector::from_vec(vec![1.0]);
        let v = predict(&spec, &pts[..1], &one, &[0.2]).unwrap();
        assert_eq!(v, 1.2);
    }

    #[test]
    fn training_residual_nonincreasing() {
        let (spec, matrix, y) = small_problem();
        let mut state = KgdState::new(4, spec.max_step_size(), spec.kappa_sq()).unwrap();
        let mut last = (matrix.entries() * state.coeffs() - &y).norm();
        for _ in 0..200 {
            state.step(&matrix, &y).unwrap();
            let res = (matrix.entries() * state.coeffs() - &y).norm();
            assert!(res <= last + 1e-12);
            last = res;
        }
    }

    #[test]
    fn trace_matches_state_iteration() {
        let (spec, matrix, y) = small_problem();
        let beta = spec.max_step_size();
        let mut trace = KgdTrace::new(&matrix, y.clone(), beta, spec.kappa_sq()).unwrap();
        trace.ensure_iterates(25).unwrap();
        let mut state = KgdState::new(4, beta, spec.kappa_sq()).unwrap();
        for t in 0..=25 {
            assert!((trace.coeffs(t) - state.coeffs()).norm() < 1e-14);
            if t < 25 {
                state.step(&matrix, &y).unwrap();
            }
        }
        // fitted values agree with a fresh matvec
        let f = matrix.entries() * trace.coeffs(25);
        assert!((trace.fitted(25) - f).norm() < 1e-13);
    }
}
