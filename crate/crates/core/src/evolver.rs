//! Integrating-factor RK4 for
//!
//! ```text
//! u_t = i u_xx - |u|^2 u_x + i b |u|^4 u
//! ```
//!
//! The linear phase `e^{-i k^2 t}` is applied exactly in Fourier space; the
//! nonlinearity is evaluated pseudospectrally and its spectrum truncated to
//! `|k| <= dealias * k_max`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::ComplexField;
use crate::grid::Grid;
use crate::soliton::{conserved, ConservedTriple};

pub const BLOWUP_FACTOR: f64 = 1e3;
pub const TAIL_BUDGET: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_end: f64,
    pub dealias: f64,
    pub record_every: usize,
    pub window_fraction: f64,
    /// Keep every recorded field in the trajectory (memory: one field per record).
    pub keep_snapshots: bool,
}

impl EvolveConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        EvolveConfig {
            dt,
            t_end,
            dealias: 2.0 / 3.0,
            record_every: 1,
            window_fraction: 0.8,
            keep_snapshots: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LabError::InvalidConfig(m.into()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be non-negative");
        }
        if !(self.dealias > 0.0 && self.dealias <= 1.0) {
            return bad("dealias must lie in (0, 1]");
        }
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return bad("window_fraction must lie in (0, 1]");
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1");
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// One fixed-step IFRK4 integrator. Negative `dt` integrates backwards.
pub struct Stepper {
    grid: Arc<Grid>,
    dt: f64,
    b: f64,
    e_full: Vec<Complex64>,
    e_half: Vec<Complex64>,
    mask: Vec<bool>,
    ik: Vec<Complex64>,
}

impl Stepper {
    pub fn new(grid: &Arc<Grid>, dt: f64, b: f64, dealias: f64) -> Self {
        let k = grid.wavenumbers();
        let cut = dealias * grid.k_max() * (1.0 + 1e-12);
        Stepper {
            grid: grid.clone(),
            dt,
            b,
            e_full: k.iter().map(|&k| Complex64::from_polar(1.0, -k * k * dt)).collect(),
            e_half: k.iter().map(|&k| Complex64::from_polar(1.0, -0.5 * k * k * dt)).collect(),
            mask: k.iter().map(|&k| k.abs() <= cut).collect(),
            ik: (0..grid.n()).map(|j| grid.d1_symbol(j)).collect(),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Dealiased spectrum of `-|v|^2 v_x + i b |v|^4 v`.
    fn nonlinear(&self, vhat: &[Complex64]) -> Vec<Complex64> {
        let g = &self.grid;
        let v = g.inverse(vhat);
        let vx_hat: Vec<Complex64> = vhat.iter().zip(&self.ik).map(|(a, b)| a * b).collect();
        let vx = g.inverse(&vx_hat);
        let mut nl: Vec<Complex64> = v
            .iter()
            .zip(&vx)
            .map(|(&z, &dz)| {
                let m2 = z.norm_sqr();
                -m2 * dz + Complex64::new(0.0, self.b * m2 * m2) * z
            })
            .collect();
        g.forward_in_place(&mut nl);
        for (z, &keep) in nl.iter_mut().zip(&self.mask) {
            if !keep {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        nl
    }

    /// Advance a spectrum by one step.
    pub fn step_spectrum(&self, u: &[Complex64]) -> Vec<Complex64> {
        let h = self.dt;
        let n = u.len();
        let (e, eh) = (&self.e_full, &self.e_half);
        let k1 = self.nonlinear(u);
        let a: Vec<Complex64> = (0..n).map(|j| eh[j] * (u[j] + 0.5 * h * k1[j])).collect();
        let k2 = self.nonlinear(&a);
        let bb: Vec<Complex64> = (0..n).map(|j| eh[j] * u[j] + 0.5 * h * k2[j]).collect();
        let k3 = self.nonlinear(&bb);
        let cc: Vec<Complex64> = (0..n).map(|j| e[j] * u[j] + h * eh[j] * k3[j]).collect();
        let k4 = self.nonlinear(&cc);
        (0..n)
            .map(|j| {
                e[j] * u[j] + h / 6.0 * (e[j] * k1[j] + 2.0 * eh[j] * (k2[j] + k3[j]) + k4[j])
            })
            .collect()
    }

    pub fn step(&self, u: &ComplexField) -> ComplexField {
        let s = self.step_spectrum(&self.grid.forward(u.values()));
        u.with_values(self.grid.inverse(&s))
    }

    /// `||u_x||_{L^2}^2` from a spectrum.
    fn grad_sq(&self, s: &[Complex64]) -> f64 {
        let g = &self.grid;
        s.iter()
            .zip(&self.ik)
            .map(|(z, k)| z.norm_sqr() * k.norm_sqr())
            .sum::<f64>()
            * g.dx()
            / g.n() as f64
    }
}

/// Single step with the default 2/3 dealiasing.
pub fn step(u: &ComplexField, dt: f64, b: f64) -> Result<ComplexField> {
    let out = Stepper::new(u.grid(), dt, b, 2.0 / 3.0).step(u);
    if out.values().iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(out)
    } else {
        Err(LabError::Integration {
            time: dt,
            reason: "non-finite values".into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Empty unless `keep_snapshots` was set.
    pub snapshots: Vec<ComplexField>,
    pub conserved: Vec<ConservedTriple>,
    pub b: f64,
    /// An observer asked to stop before `t_end`.
    pub stopped: bool,
}

impl Trajectory {
    /// Largest `|Q(t) - Q(0)| / max(|Q(0)|, M(0))` for `Q = E, M, P`.
    pub fn max_relative_drift(&self) -> [f64; 3] {
        let Some(first) = self.conserved.first() else {
            return [0.0; 3];
        };
        let scale = |q: f64| q.abs().max(first.mass).max(f64::MIN_POSITIVE);
        let mut out = [0.0_f64; 3];
        for c in &self.conserved {
            out[0] = out[0].max((c.energy - first.energy).abs() / scale(first.energy));
            out[1] = out[1].max((c.mass - first.mass).abs() / scale(first.mass));
            out[2] = out[2].max((c.momentum - first.momentum).abs() / scale(first.momentum));
        }
        out
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// Integrate from `u0` to `cfg.t_end`. The observer sees `(t, u, conserved)`
/// at `t = 0`, every `record_every` steps and at the last step, and may stop
/// the run.
pub fn evolve<F>(u0: &ComplexField, cfg: &EvolveConfig, b: f64, mut observer: F) -> Result<Trajectory>
where
    F: FnMut(f64, &ComplexField, &ConservedTriple) -> Flow,
{
    cfg.validate()?;
    if u0.values().iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(LabError::Integration {
            time: 0.0,
            reason: "initial data is not finite".into(),
        });
    }
    let grid = u0.grid().clone();
    let stepper = Stepper::new(&grid, cfg.dt, b, cfg.dealias);
    let steps = cfg.steps();
    let mut traj = Trajectory {
        times: Vec::new(),
        snapshots: Vec::new(),
        conserved: Vec::new(),
        b,
        stopped: false,
    };

    let mut spec = grid.forward(u0.values());
    let g0 = stepper.grad_sq(&spec).sqrt();
    let limit = BLOWUP_FACTOR * g0.max(f64::MIN_POSITIVE);

    let mut record = |t: f64, u: ComplexField, traj: &mut Trajectory| {
        let q = conserved(&u, b);
        let flow = observer(t, &u, &q);
        traj.times.push(t);
        traj.conserved.push(q);
        if cfg.keep_snapshots {
            traj.snapshots.push(u);
        }
        flow
    };

    if record(0.0, u0.clone(), &mut traj) == Flow::Stop {
        traj.stopped = true;
        return Ok(traj);
    }
    for k in 1..=steps {
        spec = stepper.step_spectrum(&spec);
        let t = k as f64 * cfg.dt;
        let gn = stepper.grad_sq(&spec).sqrt();
        if !gn.is_finite() {
            return Err(LabError::Integration {
                time: t,
                reason: "non-finite values".into(),
            });
        }
        if gn > limit {
            return Err(LabError::Integration {
                time: t,
                reason: format!("||u_x|| = {gn:e} exceeds {BLOWUP_FACTOR}x its initial value"),
            });
        }
        if k % cfg.record_every == 0 || k == steps {
            let u = u0.with_values(grid.inverse(&spec));
            if record(t, u, &mut traj) == Flow::Stop {
                traj.stopped = k < steps;
                break;
            }
        }
    }
    Ok(traj)
}

/// Fraction of the mass of `u` outside `|x| <= frac * L`.
pub fn tail_fraction(u: &ComplexField, frac: f64) -> f64 {
    let cut = frac * u.grid().half_width();
    let (mut out, mut all) = (0.0, 0.0);
    for (z, &x) in u.values().iter().zip(u.grid().nodes()) {
        let m = z.norm_sqr();
        all += m;
        if x.abs() > cut {
            out += m;
        }
    }
    if all > 0.0 {
        out / all
    } else {
        0.0
    }
}

fn windowed(u: &ComplexField, frac: f64, f: impl Fn(f64, Complex64, Complex64) -> f64) -> f64 {
    let cut = frac * u.grid().half_width();
    let ux = u.derivative();
    u.values()
        .iter()
        .zip(ux.values())
        .zip(u.grid().nodes())
        .filter(|(_, &x)| x.abs() <= cut)
        .map(|((&z, &dz), &x)| f(x, z, dz))
        .sum::<f64>()
        * u.grid().dx()
}

/// `Im int_W x u_x conj(u)`.
pub fn virial_moment(u: &ComplexField, frac: f64) -> f64 {
    windowed(u, frac, |x, z, dz| x * (dz * z.conj()).im)
}

/// `int_W x^2 |u|^2`.
pub fn variance(u: &ComplexField, frac: f64) -> f64 {
    windowed(u, frac, |x, z, _| x * x * z.norm_sqr())
}

/// `4 Im int_W x u_x conj(u) + int_W x |u|^4`.
pub fn variance_rhs(u: &ComplexField, frac: f64) -> f64 {
    4.0 * virial_moment(u, frac) + windowed(u, frac, |x, z, _| x * z.norm_sqr().powi(2))
}

fn check_window(traj: &Trajectory, frac: f64) -> Result<()> {
    if traj.snapshots.len() < 3 {
        return Err(LabError::Diagnostic(
            "rate checks need at least three stored snapshots".into(),
        ));
    }
    let leak = traj
        .snapshots
        .iter()
        .map(|u| tail_fraction(u, frac))
        .fold(0.0, f64::max);
    if leak > TAIL_BUDGET {
        return Err(LabError::WindowBudget {
            leak,
            budget: TAIL_BUDGET,
        });
    }
    Ok(())
}

/// Least-squares slope of `y` against `t`.
pub fn ls_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let num: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let den: f64 = t.iter().map(|a| (a - tm) * (a - tm)).sum();
    num / den
}

/// `(d/dt Im int_W x u_x conj(u), 4 E(u0))`; the left side is the
/// least-squares slope over the stored snapshots.
pub fn virial_rate_check(traj: &Trajectory, cfg: &EvolveConfig) -> Result<(f64, f64)> {
    check_window(traj, cfg.window_fraction)?;
    let v: Vec<f64> = traj
        .snapshots
        .iter()
        .map(|u| virial_moment(u, cfg.window_fraction))
        .collect();
    Ok((ls_slope(&traj.times, &v), 4.0 * traj.conserved[0].energy))
}

/// `(d/dt int_W x^2 |u|^2, 4 Im int_W x u_x conj(u) + int_W x |u|^4)` at the
/// middle stored snapshot; the derivative is a central difference (fourth
/// order when five points are available).
pub fn variance_rate_check(traj: &Trajectory, cfg: &EvolveConfig) -> Result<(f64, f64)> {
    check_window(traj, cfg.window_fraction)?;
    let f = cfg.window_fraction;
    let s = &traj.snapshots;
    let t = &traj.times;
    let m = s.len() / 2;
    let var = |i: usize| variance(&s[i], f);
    let deriv = if m >= 2 && m + 2 < s.len() {
        let h = t[m + 1] - t[m];
        (-var(m + 2) + 8.0 * var(m + 1) - 8.0 * var(m - 1) + var(m - 2)) / (12.0 * h)
    } else {
        (var(m + 1) - var(m - 1)) / (t[m + 1] - t[m - 1])
    };
    Ok((deriv, variance_rhs(&s[m], f)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::{classify_params, Soliton};

    #[test]
    fn config_validation() {
        assert!(EvolveConfig::new(1e-3, 1.0).validate().is_ok());
        assert!(EvolveConfig::new(0.0, 1.0).validate().is_err());
        let mut c = EvolveConfig::new(1e-3, 1.0);
        c.dealias = 1.5;
        assert!(c.validate().is_err());
        c.dealias = 0.5;
        c.window_fraction = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = Grid::new(64, 10.0).unwrap();
        let z = ComplexField::zeros(&g);
        let tr = evolve(&z, &EvolveConfig::new(1e-2, 0.1), 1.0, |_, _, _| Flow::Continue).unwrap();
        assert!(tr.snapshots.iter().all(|u| u.max_abs() == 0.0));
        assert_eq!(tr.times.len(), 11);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn linear_evolution_is_exact() {
        // tiny amplitude: dispersion only, exact phase e^{-i k^2 t}
        let g = Grid::new(256, 20.0).unwrap();
        let u0 = ComplexField::from_fn(&g, |x| Complex64::new(1e-6 * (-x * x).exp(), 0.0));
        let t = 0.5;
        let tr = evolve(&u0, &EvolveConfig::new(0.05, t), 0.0, |_, _, _| Flow::Continue).unwrap();
        // int e^{-x^2} e^{ikx} -> Gaussian spreads as (1 + 4it)^{-1/2} e^{-x^2/(1+4it)}
        let exact = ComplexField::from_fn(&g, |x| {
            let d = Complex64::new(1.0, 4.0 * t);
            1e-6 * (-(x * x) / d).exp() / d.sqrt()
        });
        let err = (tr.snapshots.last().unwrap() - &exact).max_abs();
        assert!(err < 1e-15, "{err}");
    }

    #[test]
    fn observer_can_stop() {
        let g = Grid::new(64, 10.0).unwrap();
        let u0 = ComplexField::from_fn(&g, |x| Complex64::new((-x * x).exp(), 0.0));
        let tr = evolve(&u0, &EvolveConfig::new(1e-2, 1.0), 0.0, |t, _, _| {
            if t >= 0.05 {
                Flow::Stop
            } else {
                Flow::Continue
            }
        })
        .unwrap();
        assert!(tr.stopped);
        assert_eq!(tr.times.len(), 6);
    }

    #[test]
    fn gauge_covariance() {
        let g = Grid::new(128, 15.0).unwrap();
        let u0 = ComplexField::from_fn(&g, |x| Complex64::from_polar((-x * x).exp(), 0.3 * x));
        let rot = Complex64::from_polar(1.0, 0.7);
        let cfg = EvolveConfig::new(1e-2, 0.2);
        let a = evolve(&u0, &cfg, 0.5, |_, _, _| Flow::Continue).unwrap();
        let b = evolve(&(&u0 * rot), &cfg, 0.5, |_, _, _| Flow::Continue).unwrap();
        let d = (&(a.snapshots.last().unwrap() * rot) - b.snapshots.last().unwrap()).max_abs();
        assert!(d < 1e-13, "{d}");
    }

    #[test]
    fn soliton_moves_rigidly() {
        let g = Grid::new(512, 30.0).unwrap();
        let p = classify_params(1.0, 1.0, 0.5);
        let s = Soliton::new(p, &g).unwrap();
        let t = 0.2;
        let tr = evolve(&s.phi, &EvolveConfig::new(2e-3, t), p.b, |_, _, _| Flow::Continue).unwrap();
        let exact = &s.phi.translate(p.c * t) * Complex64::from_polar(1.0, p.omega * t);
        let err = (tr.snapshots.last().unwrap() - &exact).max_abs();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn window_budget_is_enforced() {
        let g = Grid::new(128, 10.0).unwrap();
        let u0 = ComplexField::from_fn(&g, |x| Complex64::new((-x * x / 40.0).exp(), 0.0));
        let cfg = EvolveConfig::new(1e-2, 0.03);
        let tr = evolve(&u0, &cfg, 0.0, |_, _, _| Flow::Continue).unwrap();
        assert!(matches!(
            virial_rate_check(&tr, &cfg),
            Err(LabError::WindowBudget { .. })
        ));
    }

    #[test]
    fn even_data_has_no_quartic_variance_term() {
        let g = Grid::new(128, 10.0).unwrap();
        let u0 = ComplexField::from_fn(&g, |x| Complex64::new((-x * x).exp(), 0.0));
        let f = 0.8;
        let q = windowed(&u0, f, |x, z, _| x * z.norm_sqr().powi(2));
        assert!(q.abs() < 1e-15);
        assert!(virial_moment(&u0, f).abs() < 1e-15);
    }
}
