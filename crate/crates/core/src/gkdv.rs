//! Cross-check kit for the quintic gKdV / critical NLS ground state
//! `Q(x) = 3^{1/4} sech^{1/2}(2x)`, which solves `-Q'' + Q - Q^5 = 0`.
//!
//! Only static objects live here: the linearized operator
//! `L v = -v'' + v - 5 Q^4 v`, its identities, the functional
//! `J = int eps(y) int_{-inf}^y Lambda Q`, and the sharp Gagliardo-Nirenberg
//! inequality `(1/6)||f||_6^6 <= (1/2)(M(f)/M(Q))^2 ||f'||^2`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::field::random_smooth;
use crate::grid::Grid;
use crate::linop::d2_matrix;

/// `M(Q) = sqrt(3) pi / 2`.
pub fn mass_q_exact() -> f64 {
    3f64.sqrt() * PI / 2.0
}

#[derive(Debug, Clone)]
pub struct GkdvProfile {
    grid: Arc<Grid>,
    pub q: Vec<f64>,
    pub q_prime: Vec<f64>,
    pub q_cubed: Vec<f64>,
    /// `Lambda Q = Q/2 + y Q'`.
    pub lambda_q: Vec<f64>,
}

impl GkdvProfile {
    pub fn new(grid: &Arc<Grid>) -> Self {
        let c = 3f64.powf(0.25);
        let q: Vec<f64> = grid.nodes().iter().map(|&x| c / (2.0 * x).cosh().sqrt()).collect();
        let q_prime: Vec<f64> = grid
            .nodes()
            .iter()
            .zip(&q)
            .map(|(&x, &v)| -v * (2.0 * x).tanh())
            .collect();
        let q_cubed = q.iter().map(|v| v * v * v).collect();
        let lambda_q = grid
            .nodes()
            .iter()
            .zip(q.iter().zip(&q_prime))
            .map(|(&x, (&v, &d))| 0.5 * v + x * d)
            .collect();
        GkdvProfile {
            grid: grid.clone(),
            q,
            q_prime,
            q_cubed,
            lambda_q,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.grid.n() {
            return Err(LabError::GridMismatch {
                expected_n: self.grid.n(),
                expected_hw: self.grid.half_width(),
                got_n: v.len(),
                got_hw: f64::NAN,
            });
        }
        Ok(())
    }

    fn l2(&self, v: &[f64]) -> f64 {
        self.grid.integrate(&v.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt()
    }
}

/// `L v = -v'' + v - 5 Q^4 v`, spectrally.
pub fn apply_l_gkdv(p: &GkdvProfile, v: &[f64]) -> Result<Vec<f64>> {
    p.check(v)?;
    let vxx = p.grid.second_derivative_real(v);
    Ok(v.iter()
        .zip(&vxx)
        .zip(&p.q)
        .map(|((&v, &d), &q)| -d + v - 5.0 * q.powi(4) * v)
        .collect())
}

/// `J = int eps(y) (int_{-inf}^y Lambda Q) dy`. The inner integral does not
/// vanish at `+inf` (it tends to `-(1/2) int Q`), so `eps` must decay inside
/// the box.
pub fn j_functional(eps: &[f64], p: &GkdvProfile) -> Result<f64> {
    p.check(eps)?;
    let cum = p.grid.cumulative_integral_real(&p.lambda_q);
    Ok(p.grid.integrate(&eps.iter().zip(&cum).map(|(a, b)| a * b).collect::<Vec<_>>()))
}

/// `(left, right)` of the sharp Gagliardo-Nirenberg inequality, with the
/// exact `M(Q)`.
pub fn gn_inequality_probe(f: &[f64], p: &GkdvProfile) -> Result<(f64, f64)> {
    p.check(f)?;
    let g = &p.grid;
    let fx = g.derivative_real(f);
    let l6 = g.integrate(&f.iter().map(|v| v.powi(6)).collect::<Vec<_>>());
    let m = g.integrate(&f.iter().map(|v| v * v).collect::<Vec<_>>());
    let grad = g.integrate(&fx.iter().map(|v| v * v).collect::<Vec<_>>());
    let r = m / mass_q_exact();
    Ok((l6 / 6.0, 0.5 * r * r * grad))
}

/// `E(f) = (1/2)||f'||^2 - (1/6)||f||_6^6`.
pub fn energy(f: &[f64], p: &GkdvProfile) -> Result<f64> {
    let (l6, _) = gn_inequality_probe(f, p)?;
    let fx = p.grid.derivative_real(f);
    Ok(0.5 * p.grid.integrate(&fx.iter().map(|v| v * v).collect::<Vec<_>>()) - l6)
}

/// Dense symmetric eigenvalues of `L`, ascending.
pub fn eigenvalues(p: &GkdvProfile) -> Vec<f64> {
    let n = p.grid.n();
    let d2 = d2_matrix(&p.grid);
    let m = DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { 1.0 - 5.0 * p.q[i].powi(4) } else { 0.0 };
        -0.5 * (d2[i * n + j] + d2[j * n + i]) + diag
    });
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[derive(Debug, Clone, Serialize)]
pub struct GkdvIdentities {
    pub n: usize,
    pub half_width: f64,
    /// `||L Q^3 + 8 Q^3|| / ||Q^3||`.
    pub lq3: f64,
    /// `||L Lambda Q + 2 Q|| / ||Q||`.
    pub llq: f64,
    /// `||L Q'|| / ||Q'||`.
    pub kernel: f64,
    /// `E(Q)`.
    pub energy_q: f64,
    pub mass_q: f64,
    pub mass_q_exact: f64,
    /// `|left - right| / right` of the GN probe at `f = Q`.
    pub gn_equality_gap: f64,
    /// Smallest `right - left` over the random probe fields (relative).
    pub gn_min_margin: f64,
    pub gn_trials: usize,
    /// `(1/4)(int Q)^2`, the constant in the `J` rate identity.
    pub rate_constant: f64,
    pub negative_count: usize,
    pub kernel_count: usize,
    pub lowest_eigenvalue: f64,
}

/// Residual table for the identities, plus dense eigen counts with `gap`
/// and `kernel_tol` thresholds.
pub fn identity_suite(p: &GkdvProfile, trials: usize, seed: u64, kernel_tol: f64) -> Result<GkdvIdentities> {
    let g = &p.grid;
    let rel = |a: &[f64], b: &[f64], scale: f64| -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + scale * y).collect();
        p.l2(&d) / p.l2(b)
    };
    let lq3 = rel(&apply_l_gkdv(p, &p.q_cubed)?, &p.q_cubed, 8.0);
    let llq = rel(&apply_l_gkdv(p, &p.lambda_q)?, &p.q, 2.0);
    let kernel = rel(&apply_l_gkdv(p, &p.q_prime)?, &p.q_prime, 0.0);
    let (l, r) = gn_inequality_probe(&p.q, p)?;
    let mut margin = f64::INFINITY;
    for t in 0..trials {
        let f = random_smooth(g, seed.wrapping_add(t as u64)).re();
        let (l, r) = gn_inequality_probe(&f, p)?;
        margin = margin.min((r - l) / r);
    }
    let int_q = g.integrate(&p.q);
    let ev = eigenvalues(p);
    Ok(GkdvIdentities {
        n: g.n(),
        half_width: g.half_width(),
        lq3,
        llq,
        kernel,
        energy_q: energy(&p.q, p)?,
        mass_q: p.l2(&p.q).powi(2),
        mass_q_exact: mass_q_exact(),
        gn_equality_gap: (l - r).abs() / r,
        gn_min_margin: margin,
        gn_trials: trials,
        rate_constant: 0.25 * int_q * int_q,
        negative_count: ev.iter().filter(|&&e| e < -kernel_tol).count(),
        kernel_count: ev.iter().filter(|&&e| e.abs() <= kernel_tol).count(),
        lowest_eigenvalue: ev[0],
    })
}
