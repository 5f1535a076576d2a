use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::operators::SymmetricOperator;
use crate::spaces::rng_for;
use crate::{Result, WarpError};

/// Problems up to this dimension are solved densely by the `auto` solver.
pub const DENSE_LIMIT: usize = 4000;

/// Relative residual the iterative solver converges to.
const LANCZOS_TOL: f64 = 1e-10;

/// Lowest eigenpairs of `A ξ = λ W ξ`.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// `W`-orthonormal eigenvectors, one per value.
    pub vectors: Vec<Vec<f64>>,
    /// `‖W^{-1/2}(Aξ − λWξ)‖` for each pair.
    pub residuals: Vec<f64>,
    /// Gershgorin bound on `‖W^{-1/2} A W^{-1/2}‖`.
    pub norm: f64,
    pub solver: &'static str,
}

/// A way of computing the bottom of a weighted symmetric spectrum.
pub trait EigenSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    /// Eigenvalues and `W`-orthonormal eigenvectors of the `k` smallest pairs.
    fn lowest(&self, op: &SymmetricOperator, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)>;
}

/// Solvers selectable by name.
pub struct SolverRegistry {
    solvers: Vec<Box<dyn EigenSolver>>,
}

impl SolverRegistry {
    pub fn empty() -> Self {
        Self { solvers: Vec::new() }
    }

    /// `dense`, `lanczos` and `auto`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(DenseSolver));
        r.register(Box::new(LanczosSolver::default()));
        r.register(Box::new(AutoSolver::default()));
        r
    }

    /// Adds a solver, replacing one with the same name.
    pub fn register(&mut self, solver: Box<dyn EigenSolver>) {
        self.solvers.retain(|s| s.name() != solver.name());
        self.solvers.push(solver);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.solvers.iter().map(|s| s.name()).collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn EigenSolver> {
        self.solvers
            .iter()
            .find(|s| s.name() == name)
            .map(|s| s.as_ref())
            .ok_or_else(|| WarpError::Unknown {
                kind: "eigensolver",
                name: name.into(),
                known: self.names().join(", "),
            })
    }
}

impl Default for SolverRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Solves with `solver` and attaches residuals computed from the sparse form.
pub fn solve(op: &SymmetricOperator, k: usize, solver: &dyn EigenSolver) -> Result<Eigenpairs> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(WarpError::Precondition(format!(
            "asked for {k} eigenpairs of a {n}-dimensional operator"
        )));
    }
    let (values, vectors) = solver.lowest(op, k)?;
    let residuals = values
        .iter()
        .zip(&vectors)
        .map(|(&l, xi)| residual(op, l, xi))
        .collect();
    Ok(Eigenpairs {
        values,
        vectors,
        residuals,
        norm: op.norm_bound(),
        solver: solver.name(),
    })
}

/// `‖W^{-1/2}(Aξ − λWξ)‖`, equal to `‖Tξ − λξ‖_W`.
pub fn residual(op: &SymmetricOperator, lambda: f64, xi: &[f64]) -> f64 {
    op.form_apply(xi)
        .iter()
        .zip(xi)
        .zip(&op.weights)
        .map(|((a, x), w)| (a - lambda * w * x).powi(2) / w)
        .sum::<f64>()
        .sqrt()
}

/// `W^{-1/2}`.
fn inv_sqrt_weights(op: &SymmetricOperator) -> Vec<f64> {
    op.weights.iter().map(|w| 1.0 / w.sqrt()).collect()
}

/// `v ↦ W^{-1/2} A W^{-1/2} v`.
fn scaled_apply(op: &SymmetricOperator, s: &[f64], v: &[f64]) -> Vec<f64> {
    let x: Vec<f64> = v.iter().zip(s).map(|(a, b)| a * b).collect();
    op.form_apply(&x).iter().zip(s).map(|(a, b)| a * b).collect()
}

/// Full eigendecomposition of `W^{-1/2} A W^{-1/2}`.
pub struct DenseSolver;

impl EigenSolver for DenseSolver {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn summary(&self) -> &'static str {
        "full symmetric eigendecomposition of the weight-normalized form"
    }

    fn lowest(&self, op: &SymmetricOperator, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let n = op.dim();
        let s = inv_sqrt_weights(op);
        let mut b = op.to_dense_form();
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] *= s[i] * s[j];
            }
        }
        let eig = SymmetricEigen::new(b);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &c| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[c]));
        let values = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = order[..k]
            .iter()
            .map(|&i| eig.eigenvectors.column(i).iter().zip(&s).map(|(v, si)| v * si).collect())
            .collect();
        Ok((values, vectors))
    }
}

/// Block Lanczos on `(B + σI)⁻¹` with full reorthogonalization, where
/// `B = W^{-1/2} A W^{-1/2}` and the inner solves use conjugate gradients.
///
/// Ritz pairs come from a Rayleigh–Ritz projection of `B` itself, so inexact
/// inner solves slow convergence but do not bias the eigenvalues.  The block
/// start resolves eigenvalues of multiplicity up to the block size.
pub struct LanczosSolver {
    pub block: usize,
    /// Shift `σ` as a fraction of the norm bound.
    pub shift: f64,
    pub max_basis: usize,
    pub seed: u64,
}

impl Default for LanczosSolver {
    fn default() -> Self {
        Self {
            block: 8,
            shift: 1e-2,
            max_basis: 1200,
            seed: 0,
        }
    }
}

impl EigenSolver for LanczosSolver {
    fn name(&self) -> &'static str {
        "lanczos"
    }

    fn summary(&self) -> &'static str {
        "shift-invert block Lanczos with full reorthogonalization"
    }

    fn lowest(&self, op: &SymmetricOperator, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let n = op.dim();
        let s = inv_sqrt_weights(op);
        let norm = op.norm_bound();
        if norm == 0.0 {
            let vectors = (0..k)
                .map(|i| (0..n).map(|j| if i == j { s[j] } else { 0.0 }).collect())
                .collect();
            return Ok((vec![0.0; k], vectors));
        }
        let shift = self.shift * norm;
        let b_apply = |v: &[f64]| scaled_apply(op, &s, v);
        let mut rng = rng_for(self.seed, 0);
        let max_basis = self.max_basis.max(3 * k + 2 * self.block).min(n);

        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut images: Vec<Vec<f64>> = Vec::new();
        let mut projected: Vec<Vec<f64>> = Vec::new();
        let mut block: Vec<Vec<f64>> = (0..self.block)
            .map(|_| (0..n).map(|_| rng.gen::<f64>() - 0.5).collect())
            .collect();
        let mut best = vec![f64::INFINITY; k];
        loop {
            let before = basis.len();
            for mut v in block.drain(..) {
                if basis.len() == max_basis {
                    break;
                }
                if orthonormalize(&mut v, &basis) {
                    let bv = b_apply(&v);
                    let mut row: Vec<f64> = basis.iter().map(|q| dot(q, &bv)).collect();
                    row.push(dot(&v, &bv));
                    projected.push(row);
                    images.push(bv);
                    basis.push(v);
                }
            }
            let grew = basis.len() > before;
            if basis.len() >= k {
                let (values, vectors, residuals) = rayleigh_ritz(&basis, &images, &projected, k);
                best = residuals.clone();
                let converged = residuals.iter().all(|r| *r <= LANCZOS_TOL * norm);
                if converged || basis.len() == n {
                    let vectors = vectors
                        .into_iter()
                        .map(|v| v.iter().zip(&s).map(|(a, b)| a * b).collect())
                        .collect();
                    return Ok((values, vectors));
                }
            }
            if basis.len() == max_basis {
                break;
            }
            // Next block: inverse-shifted images of the newest vectors, or
            // fresh random vectors when the Krylov space has closed up.
            block = if grew {
                basis[before..]
                    .iter()
                    .map(|v| conjugate_gradient(&b_apply, shift, v))
                    .collect()
            } else {
                (0..self.block)
                    .map(|_| (0..n).map(|_| rng.gen::<f64>() - 0.5).collect())
                    .collect()
            };
        }
        Err(WarpError::NonConvergence {
            iterations: basis.len(),
            residuals: best,
        })
    }
}

/// Orthogonalizes `v` against `basis` twice and normalizes it; false if it
/// lies in the span.
fn orthonormalize(v: &mut [f64], basis: &[Vec<f64>]) -> bool {
    let start = norm2(v);
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, v);
            for (a, b) in v.iter_mut().zip(q) {
                *a -= c * b;
            }
        }
    }
    let n = norm2(v);
    if !(n > 1e-10 * start) || n == 0.0 {
        return false;
    }
    for a in v.iter_mut() {
        *a /= n;
    }
    true
}

/// Ritz pairs of `B` on `span(basis)`.  `projected[i][j] = ⟨q_j, B q_i⟩` for `j < i`
/// plus the diagonal.
fn rayleigh_ritz(
    basis: &[Vec<f64>],
    images: &[Vec<f64>],
    projected: &[Vec<f64>],
    k: usize,
) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let m = basis.len();
    let h = DMatrix::from_fn(m, m, |i, j| if j <= i { projected[i][j] } else { projected[j][i] });
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let n = basis[0].len();
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for &c in &order[..k] {
        let y: DVector<f64> = eig.eigenvectors.column(c).into_owned();
        let theta = eig.eigenvalues[c];
        let mut v = vec![0.0; n];
        let mut bv = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                v[i] += yj * basis[j][i];
                bv[i] += yj * images[j][i];
            }
        }
        let res = bv.iter().zip(&v).map(|(a, b)| (a - theta * b).powi(2)).sum::<f64>().sqrt();
        values.push(theta);
        vectors.push(v);
        residuals.push(res);
    }
    (values, vectors, residuals)
}

/// Approximate `(B + shift·I)⁻¹ b` for positive semidefinite `B`.
fn conjugate_gradient(apply: &dyn Fn(&[f64]) -> Vec<f64>, shift: f64, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = 1e-24 * rr;
    for _ in 0..n.clamp(50, 5000) {
        if rr <= target {
            break;
        }
        let mut ap = apply(&p);
        for (a, q) in ap.iter_mut().zip(&p) {
            *a += shift * q;
        }
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let next = dot(&r, &r);
        let beta = next / rr;
        rr = next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    x
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Dense below [`DENSE_LIMIT`], Lanczos above.
#[derive(Default)]
pub struct AutoSolver {
    lanczos: LanczosSolver,
}

impl EigenSolver for AutoSolver {
    fn name(&self) -> &'static str {
        "auto"
    }

    fn summary(&self) -> &'static str {
        "dense up to 4000 unknowns, Lanczos beyond"
    }

    fn lowest(&self, op: &SymmetricOperator, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if op.dim() <= DENSE_LIMIT {
            DenseSolver.lowest(op, k)
        } else {
            self.lanczos.lowest(op, k)
        }
    }
}
