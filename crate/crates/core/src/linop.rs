//! The linearized operator `L = S''(phi)` and its gauge transform
//! `L~ = e^{-i eta} L e^{i eta}`, which acts on `w = f + i g` through real
//! blocks:
//!
//! ```text
//! L~ w = L11 f + L12 g + Phi^4 f / 4  +  i (L21 f + L22 g)
//! L11 = -d^2 + U,  U = (w - c^2/4) + (3/2) c Phi^2 - (15/16) gamma Phi^4
//! L22 = -d^2 + V,  V = (w - c^2/4) + (c/2) Phi^2 - (3/16) gamma Phi^4
//! L12 =  (1/2) Phi^2 d - (1/2) Phi Phi'
//! L21 = -(1/2) Phi^2 d - (3/2) Phi Phi'
//! ```
//!
//! Dense assembly uses periodic spectral differentiation matrices so that it
//! agrees with the FFT-based matrix-free path up to symmetrization.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::field::{random_smooth, ComplexField, I};
use crate::grid::Grid;
use crate::par::{self, Exec};
use crate::soliton::{Regime, Soliton};

/// `L v` evaluated matrix-free with spectral derivatives.
pub fn apply_l(sol: &Soliton, v: &ComplexField) -> Result<ComplexField> {
    sol.grid().same_as(v.grid())?;
    let p = &sol.params;
    let (b, w, c) = (p.b, p.omega, p.c);
    let vx = v.derivative();
    let vxx = v.second_derivative();
    let out = (0..v.values().len())
        .map(|j| {
            let phi = sol.phi.values()[j];
            let dphi = sol.phi_prime.values()[j];
            let vj = v.values()[j];
            let m2 = phi.norm_sqr();
            let re = (phi * vj.conj()).re;
            -vxx.values()[j] + w * vj + c * I * vx.values()[j]
                - I * m2 * vx.values()[j]
                - 2.0 * I * re * dphi
                - b * m2 * m2 * vj
                - 4.0 * b * m2 * re * phi
        })
        .collect();
    Ok(v.with_values(out))
}

/// `L~ w = e^{-i eta} L (e^{i eta} w)`, matrix-free.
pub fn apply_ltilde(sol: &Soliton, w: &ComplexField) -> Result<ComplexField> {
    Ok(sol.to_tilde(&apply_l(sol, &sol.from_tilde(w))?))
}

/// Periodic first-derivative matrix (Nyquist mode dropped), row-major.
pub fn d1_matrix(grid: &Grid) -> Vec<f64> {
    let n = grid.n();
    let s = PI / grid.half_width();
    let mut m = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            if j != k {
                let d = j as isize - k as isize;
                let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                m[j * n + k] = s * 0.5 * sign / (d as f64 * PI / n as f64).tan();
            }
        }
    }
    m
}

/// Periodic second-derivative matrix (Nyquist mode kept), row-major.
pub fn d2_matrix(grid: &Grid) -> Vec<f64> {
    let n = grid.n();
    let s = PI / grid.half_width();
    let s2 = s * s;
    let nf = n as f64;
    let mut m = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            let d = j as isize - k as isize;
            m[j * n + k] = if d == 0 {
                -s2 * (nf * nf / 12.0 + 1.0 / 6.0)
            } else {
                let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let sn = (d as f64 * PI / nf).sin();
                -s2 * 0.5 * sign / (sn * sn)
            };
        }
    }
    m
}

/// Dense discretization of `L~` on `(Re w, Im w)`.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    pub soliton: Soliton,
    /// `-D2 + diag(U)`, without the `Phi^4/4` coupling.
    pub l11: DMatrix<f64>,
    /// Symmetrized `2n x 2n` matrix of the full operator.
    pub full: DMatrix<f64>,
    pub u_pot: Vec<f64>,
    pub v_pot: Vec<f64>,
    pub phi4_quarter: Vec<f64>,
    /// `max |M - M^T|` before symmetrization. Entrywise this is O(1): the
    /// off-diagonal blocks only agree in their action on resolved fields.
    pub asymmetry: f64,
}

impl BlockOperator {
    pub fn n(&self) -> usize {
        self.soliton.grid().n()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.soliton.grid()
    }

    pub fn l12(&self) -> DMatrix<f64> {
        let n = self.n();
        self.full.view((0, n), (n, n)).into_owned()
    }

    pub fn l21(&self) -> DMatrix<f64> {
        let n = self.n();
        self.full.view((n, 0), (n, n)).into_owned()
    }

    pub fn l22(&self) -> DMatrix<f64> {
        let n = self.n();
        self.full.view((n, n), (n, n)).into_owned()
    }

    /// Dense `L~ w`.
    pub fn apply(&self, w: &ComplexField) -> ComplexField {
        let y = &self.full * stack(w);
        unstack(w.grid(), &y)
    }

    /// `<L~ w, w>` from the dense matrix.
    pub fn quadratic_form(&self, w: &ComplexField) -> f64 {
        let x = stack(w);
        (&self.full * &x).dot(&x) * self.grid().dx()
    }
}

fn stack(w: &ComplexField) -> DVector<f64> {
    let n = w.values().len();
    DVector::from_fn(2 * n, |i, _| {
        if i < n {
            w.values()[i].re
        } else {
            w.values()[i - n].im
        }
    })
}

fn unstack(grid: &Arc<Grid>, x: &DVector<f64>) -> ComplexField {
    let n = grid.n();
    ComplexField::new(
        grid.clone(),
        (0..n).map(|i| Complex64::new(x[i], x[i + n])).collect(),
    )
}

fn potentials(sol: &Soliton) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let p = &sol.params;
    let base = p.omega - 0.25 * p.c * p.c;
    let mut u = Vec::with_capacity(sol.profile.len());
    let mut v = Vec::with_capacity(sol.profile.len());
    let mut q = Vec::with_capacity(sol.profile.len());
    for &f in &sol.profile {
        let f2 = f * f;
        let f4 = f2 * f2;
        u.push(base + 1.5 * p.c * f2 - 15.0 / 16.0 * p.gamma * f4);
        v.push(base + 0.5 * p.c * f2 - 3.0 / 16.0 * p.gamma * f4);
        q.push(0.25 * f4);
    }
    (u, v, q)
}

/// Assemble the dense block operator. Rows are filled in parallel under
/// [`Exec::Parallel`].
pub fn assemble_ltilde(sol: &Soliton, exec: Exec) -> BlockOperator {
    let grid = sol.grid();
    let n = grid.n();
    let d1 = d1_matrix(grid);
    let d2 = d2_matrix(grid);
    let (u_pot, v_pot, phi4_quarter) = potentials(sol);
    let phi = &sol.profile;
    let dphi = &sol.profile_prime;
    let m = 2 * n;

    let mut rows = vec![0.0; m * m];
    par::fill_rows(exec, &mut rows, m, |i, row| {
        if i < n {
            let a = 0.5 * phi[i] * phi[i];
            for k in 0..n {
                row[k] = -d2[i * n + k];
                row[n + k] = a * d1[i * n + k];
            }
            row[i] += u_pot[i] + phi4_quarter[i];
            row[n + i] -= 0.5 * phi[i] * dphi[i];
        } else {
            let r = i - n;
            let a = 0.5 * phi[r] * phi[r];
            for k in 0..n {
                row[k] = -a * d1[r * n + k];
                row[n + k] = -d2[r * n + k];
            }
            row[r] -= 1.5 * phi[r] * dphi[r];
            row[n + r] += v_pot[r];
        }
    });

    // Column-major read of a row-major buffer gives M^T; symmetrizing
    // makes the distinction moot.
    let mut full = DMatrix::from_vec(m, m, rows);
    let mut asymmetry = 0.0_f64;
    for j in 0..m {
        for i in 0..j {
            let (a, b) = (full[(i, j)], full[(j, i)]);
            asymmetry = asymmetry.max((a - b).abs());
            let s = 0.5 * (a + b);
            full[(i, j)] = s;
            full[(j, i)] = s;
        }
    }

    let mut l11 = DMatrix::from_fn(n, n, |i, k| -d2[i * n + k]);
    for i in 0..n {
        l11[(i, i)] += u_pot[i];
    }

    BlockOperator {
        soliton: sol.clone(),
        l11,
        full,
        u_pot,
        v_pot,
        phi4_quarter,
        asymmetry,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectralConfig {
    pub gap: f64,
    pub kernel_tol: f64,
    /// Enforce the (1 negative, 2 kernel, 0 unresolved) signature.
    pub classify: bool,
}

impl SpectralConfig {
    pub fn for_omega(omega: f64) -> Self {
        SpectralConfig {
            gap: 1e-3 * omega,
            kernel_tol: 1e-6 * omega,
            classify: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Signature {
    pub negative: usize,
    pub kernel: usize,
    pub unresolved: usize,
    pub positive: usize,
}

#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Columns are `l^2`-unit eigenvectors of the symmetrized matrix, in the
    /// same order as `eigenvalues`.
    vectors: DMatrix<f64>,
    grid: Arc<Grid>,
    pub signature: Signature,
    pub negative_index: Option<usize>,
    pub kernel_indices: Vec<usize>,
    /// `e^{i eta}` times the unit negative eigenvector (physical frame).
    pub chi: Option<ComplexField>,
    pub lambda_neg: Option<f64>,
    /// Smallest eigenvalue above `gap`.
    pub lowest_positive: Option<f64>,
    pub config: SpectralConfig,
}

impl SpectralData {
    /// Eigenvector `j` as an `L^2`-unit field in the tilde frame.
    pub fn eigenvector(&self, j: usize) -> ComplexField {
        let s = 1.0 / self.grid.dx().sqrt();
        let col = self.vectors.column(j).into_owned() * s;
        unstack(&self.grid, &col)
    }

    pub fn kernel_vectors(&self) -> Vec<ComplexField> {
        self.kernel_indices.iter().map(|&j| self.eigenvector(j)).collect()
    }
}

/// Fix the arbitrary sign of a real eigenvector: positive real part at the
/// node of largest `|Re|`.
fn fix_sign(w: ComplexField) -> ComplexField {
    let (_, at) = w
        .values()
        .iter()
        .enumerate()
        .fold((0.0, 0), |(m, a), (j, z)| if z.re.abs() > m { (z.re.abs(), j) } else { (m, a) });
    if w.values()[at].re < 0.0 {
        w.scale(-1.0)
    } else {
        w
    }
}

/// Full symmetric eigendecomposition plus classification.
pub fn spectral_decompose(op: &BlockOperator, cfg: SpectralConfig) -> Result<SpectralData> {
    let eig = SymmetricEigen::new(op.full.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |i, j| {
        eig.eigenvectors[(i, order[j])]
    });

    let mut sig = Signature {
        negative: 0,
        kernel: 0,
        unresolved: 0,
        positive: 0,
    };
    let mut kernel_indices = Vec::new();
    for (j, &l) in eigenvalues.iter().enumerate() {
        if l < -cfg.gap {
            sig.negative += 1;
        } else if l.abs() < cfg.kernel_tol {
            sig.kernel += 1;
            kernel_indices.push(j);
        } else if l > cfg.gap {
            sig.positive += 1;
        } else {
            sig.unresolved += 1;
        }
    }

    let classify = cfg.classify && op.soliton.params.regime == Regime::Interior;
    if classify && (sig.negative != 1 || sig.kernel != 2 || sig.unresolved != 0) {
        return Err(LabError::Classification {
            negative: sig.negative,
            kernel: sig.kernel,
            unresolved: sig.unresolved,
            lowest: eigenvalues.iter().take(6).copied().collect(),
        });
    }

    let grid = op.grid().clone();
    let mut sd = SpectralData {
        lowest_positive: eigenvalues.iter().copied().find(|&l| l > cfg.gap),
        eigenvalues,
        vectors,
        grid,
        signature: sig,
        negative_index: None,
        kernel_indices,
        chi: None,
        lambda_neg: None,
        config: cfg,
    };
    if sig.negative >= 1 {
        sd.negative_index = Some(0);
        sd.lambda_neg = Some(sd.eigenvalues[0]);
        let w = fix_sign(sd.eigenvector(0));
        sd.chi = Some(op.soliton.from_tilde(&w));
    }
    Ok(sd)
}

/// Orthonormal basis (real `L^2`) of the span of `vs`, modified Gram-Schmidt.
pub fn orthonormalize(vs: &[ComplexField]) -> Vec<ComplexField> {
    let mut out: Vec<ComplexField> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                w = &w - &q.scale(w.dot(q));
            }
        }
        let nrm = w.norm_l2();
        if nrm > 0.0 {
            out.push(w.scale(1.0 / nrm));
        }
    }
    out
}

/// Largest principal angle between two subspaces of equal dimension.
pub fn max_principal_angle(a: &[ComplexField], b: &[ComplexField]) -> f64 {
    let qa = orthonormalize(a);
    let qb = orthonormalize(b);
    let k = qa.len();
    // residuals of qa after projection onto span(qb)
    let res: Vec<ComplexField> = qa
        .iter()
        .map(|q| {
            let mut r = q.clone();
            for p in &qb {
                r = &r - &p.scale(q.dot(p));
            }
            r
        })
        .collect();
    let gram = DMatrix::from_fn(k, k, |i, j| res[i].dot(&res[j]));
    let top = SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .fold(0.0_f64, |m, &l| m.max(l));
    top.max(0.0).sqrt().min(1.0).asin()
}

/// The analytic kernel pair `{i Phi, Phi' - (i/4) Phi^3}` of `L~`.
pub fn analytic_kernel(sol: &Soliton) -> [ComplexField; 2] {
    let g = sol.grid();
    let re0 = vec![0.0; g.n()];
    let cube: Vec<f64> = sol.profile.iter().map(|f| -0.25 * f * f * f).collect();
    [
        ComplexField::from_parts(g, &re0, &sol.profile),
        ComplexField::from_parts(g, &sol.profile_prime, &cube),
    ]
}

/// Largest principal angle between the numerical kernel and the analytic pair.
pub fn kernel_angle(sd: &SpectralData, sol: &Soliton) -> f64 {
    max_principal_angle(&sd.kernel_vectors(), &analytic_kernel(sol))
}

pub const POSITIVITY_FLOOR: f64 = 1e-250;

/// `(<L~ w, w>, <L11 f, f> + (1/4) ||Phi^2 f + 2 Phi d(Phi^{-1} g)||^2)` for
/// `w = f + i g` in the tilde frame.
///
/// `Phi d(g/Phi)` is expanded as `g' - g Phi'/Phi` with the analytic
/// logarithmic derivative, so no spectral derivative of a quotient is taken.
pub fn quadratic_form_identity(op: &BlockOperator, w: &ComplexField) -> Result<(f64, f64)> {
    op.grid().same_as(w.grid())?;
    let sol = &op.soliton;
    let min = sol.profile.iter().copied().fold(f64::INFINITY, f64::min);
    if min < POSITIVITY_FLOOR {
        return Err(LabError::PositivityFloor {
            min,
            floor: POSITIVITY_FLOOR,
        });
    }
    let grid = op.grid();
    let dx = grid.dx();
    let f = DVector::from_vec(w.re());
    let g = w.im();
    let gx = grid.derivative_real(&g);

    let direct = op.quadratic_form(w);
    let l11ff = (&op.l11 * &f).dot(&f) * dx;
    let sq: f64 = (0..g.len())
        .map(|j| {
            let p = sol.profile[j];
            let logd = sol.profile_prime[j] / p;
            let t = p * p * f[j] + 2.0 * (gx[j] - g[j] * logd);
            t * t
        })
        .sum::<f64>()
        * dx;
    Ok((direct, l11ff + 0.25 * sq))
}

/// Negative direction `chi* = chi11 + i chi12` of `L~` with `chi12 = -(1/2)
/// Phi int_{-inf}^x Phi chi11`, where `chi11` is the ground state of `L11`
/// (unit `L^2`, positive at the center). Returns `(chi*, lambda11)`.
pub fn build_chi_star(op: &BlockOperator) -> (ComplexField, f64) {
    let grid = op.grid();
    let eig = SymmetricEigen::new(op.l11.clone());
    let (j0, &lam) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let s = 1.0 / grid.dx().sqrt();
    let mut chi11: Vec<f64> = eig.eigenvectors.column(j0).iter().map(|v| v * s).collect();
    if chi11[grid.center()] < 0.0 {
        chi11.iter_mut().for_each(|v| *v = -*v);
    }
    let prof = &op.soliton.profile;
    let integrand: Vec<f64> = prof.iter().zip(&chi11).map(|(p, c)| p * c).collect();
    let cum = grid.cumulative_integral_real(&integrand);
    let chi12: Vec<f64> = prof.iter().zip(&cum).map(|(p, q)| -0.5 * p * q).collect();
    (ComplexField::from_parts(grid, &chi11, &chi12), lam)
}

/// Project `p` onto the positive spectral subspace: remove the negative and
/// kernel directions (physical frame).
pub fn project_positive(sd: &SpectralData, sol: &Soliton, p: &ComplexField) -> ComplexField {
    let mut dirs: Vec<ComplexField> = sd
        .kernel_vectors()
        .iter()
        .map(|w| sol.from_tilde(w))
        .collect();
    if let Some(chi) = &sd.chi {
        dirs.push(chi.clone());
    }
    let basis = orthonormalize(&dirs);
    let mut out = p.clone();
    for _ in 0..2 {
        for q in &basis {
            out = &out - &q.scale(out.dot(q));
        }
    }
    out
}

/// `<L p, p> / ||p||_{H^1}^2`.
pub fn coercivity_ratio(sol: &Soliton, p: &ComplexField) -> Result<f64> {
    Ok(apply_l(sol, p)?.dot(p) / p.norm_h1_sq())
}

/// Minimum coercivity ratio over `trials` random smooth fields projected
/// onto the positive subspace. Trials run under `exec`.
pub fn coercivity_probe(
    sd: &SpectralData,
    sol: &Soliton,
    trials: usize,
    seed: u64,
    exec: Exec,
) -> Result<f64> {
    let ratios = par::map_range(exec, trials, |t| {
        let p = random_smooth(sol.grid(), seed.wrapping_add(t as u64));
        coercivity_ratio(sol, &project_positive(sd, sol, &p))
    });
    ratios
        .into_iter()
        .try_fold(f64::INFINITY, |m, r| r.map(|r| m.min(r)))
}
