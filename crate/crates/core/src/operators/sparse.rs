use nalgebra::DMatrix;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::{Result, WarpError};

/// Sparse `y = A x` over the CSR arrays.
pub fn csr_matvec(a: &CsrMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let offsets = a.row_offsets();
    let cols = a.col_indices();
    let vals = a.values();
    (0..a.nrows())
        .map(|i| {
            (offsets[i]..offsets[i + 1])
                .map(|k| vals[k] * x[cols[k]])
                .sum()
        })
        .collect()
}

/// Largest `|A_ij - A_ji|`.
pub fn asymmetry(a: &CsrMatrix<f64>) -> f64 {
    let diff = a - &a.transpose();
    diff.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Largest `|A_ij|`.
pub fn max_abs(a: &CsrMatrix<f64>) -> f64 {
    a.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Multiplies row `i` by `factors[i]`.
pub fn scale_rows(a: &CsrMatrix<f64>, factors: &[f64]) -> CsrMatrix<f64> {
    let mut out = a.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        for v in row.values_mut() {
            *v *= factors[i];
        }
    }
    out
}

pub fn diagonal(values: &[f64]) -> CsrMatrix<f64> {
    let n = values.len();
    let mut coo = CooMatrix::new(n, n);
    for (i, &v) in values.iter().enumerate() {
        coo.push(i, i, v);
    }
    CsrMatrix::from(&coo)
}

/// Accumulates directed couplings `d_xy ≥ 0` and turns them into a Laplacian form.
///
/// The form uses `c_xy = ½(d_xy + d_yx)` off the diagonal (with a minus sign)
/// and `Σ_y c_xy` on it, so rows sum to zero and the quadratic form is
/// `½ Σ c_xy (ξ_x − ξ_y)²`.  Self couplings cancel and are dropped.
#[derive(Debug, Clone)]
pub struct CouplingBuilder {
    n: usize,
    coo: CooMatrix<f64>,
}

impl CouplingBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            coo: CooMatrix::new(n, n),
        }
    }

    pub fn add(&mut self, x: usize, y: usize, d: f64) {
        if x != y && d != 0.0 {
            self.coo.push(x, y, d);
        }
    }

    /// The Laplacian form and the largest `|d_xy − d_yx|`.
    pub fn finish(self) -> (CsrMatrix<f64>, f64) {
        let d = CsrMatrix::from(&self.coo);
        let defect = asymmetry(&d);
        let c = (&d + &d.transpose()) * 0.5;
        let degrees = csr_matvec(&c, &vec![1.0; self.n]);
        (&diagonal(&degrees) - &c, defect)
    }
}

/// Weighted symmetric operator `T = W⁻¹A` stored through its form matrix `A = W·T`.
///
/// `A` is symmetric, so `T` is self-adjoint for `⟨ξ, η⟩_W = Σ w_x ξ_x η_x`
/// and the eigenproblem is `A ξ = λ W ξ`.
#[derive(Debug, Clone)]
pub struct SymmetricOperator {
    pub form: CsrMatrix<f64>,
    pub weights: Vec<f64>,
    /// Largest entry of the antisymmetric part removed during assembly.
    pub symmetry_defect: f64,
    pub symmetry_checked: bool,
    pub notes: Vec<String>,
}

impl SymmetricOperator {
    /// Symmetrizes `form` as `(A + Aᵀ)/2`, recording the defect.
    pub fn from_form(form: CsrMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        if form.nrows() != form.ncols() || form.nrows() != weights.len() {
            return Err(WarpError::Domain(format!(
                "form is {}x{} but there are {} weights",
                form.nrows(),
                form.ncols(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0)) || form.values().iter().any(|v| !v.is_finite()) {
            return Err(WarpError::Domain("weights must be positive and entries finite".into()));
        }
        let defect = asymmetry(&form);
        let form = if defect > 0.0 {
            (&form + &form.transpose()) * 0.5
        } else {
            form
        };
        Ok(Self {
            form,
            weights,
            symmetry_defect: defect,
            symmetry_checked: true,
            notes: Vec::new(),
        })
    }

    /// An already symmetric form with a known defect.
    pub(crate) fn from_symmetric(form: CsrMatrix<f64>, weights: Vec<f64>, defect: f64) -> Self {
        Self {
            form,
            weights,
            symmetry_defect: defect,
            symmetry_checked: true,
            notes: Vec::new(),
        }
    }

    pub fn zero(weights: Vec<f64>) -> Self {
        let n = weights.len();
        Self::from_symmetric(CsrMatrix::zeros(n, n), weights, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `A ξ`.
    pub fn form_apply(&self, xi: &[f64]) -> Vec<f64> {
        csr_matvec(&self.form, xi)
    }

    /// `T ξ = W⁻¹ A ξ`.
    pub fn apply(&self, xi: &[f64]) -> Vec<f64> {
        self.form_apply(xi)
            .into_iter()
            .zip(&self.weights)
            .map(|(v, w)| v / w)
            .collect()
    }

    /// `⟨ξ, Tξ⟩_W = ξᵀ A ξ`.
    pub fn quadratic(&self, xi: &[f64]) -> f64 {
        self.form_apply(xi).iter().zip(xi).map(|(a, b)| a * b).sum()
    }

    /// `⟨ξ, ξ⟩_W`.
    pub fn weighted_norm_sq(&self, xi: &[f64]) -> f64 {
        xi.iter().zip(&self.weights).map(|(x, w)| w * x * x).sum()
    }

    pub fn rayleigh(&self, xi: &[f64]) -> f64 {
        self.quadratic(xi) / self.weighted_norm_sq(xi)
    }

    /// The operator matrix `T = W⁻¹ A` (not symmetric unless the weights are equal).
    pub fn operator_matrix(&self) -> CsrMatrix<f64> {
        let inv: Vec<f64> = self.weights.iter().map(|w| 1.0 / w).collect();
        scale_rows(&self.form, &inv)
    }

    pub fn to_dense_form(&self) -> DMatrix<f64> {
        DMatrix::from(&self.form)
    }

    /// Largest `|(T 1)(x)|`; zero for Laplacians.
    pub fn constant_defect(&self) -> f64 {
        self.apply(&vec![1.0; self.dim()])
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Gershgorin bound on `‖W^{-1/2} A W^{-1/2}‖`.
    pub fn norm_bound(&self) -> f64 {
        let offsets = self.form.row_offsets();
        let cols = self.form.col_indices();
        let vals = self.form.values();
        let s: Vec<f64> = self.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
        (0..self.dim())
            .map(|i| {
                (offsets[i]..offsets[i + 1])
                    .map(|k| (vals[k] * s[i] * s[cols[k]]).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}
