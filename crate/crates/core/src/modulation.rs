//! Modulation decomposition
//!
//! ```text
//! eps = lambda^{1/2} e^{-i theta} u(lambda y + x) - phi,
//! (eps, chi) = (eps, i phi) = (eps, phi') = 0,
//! ```
//!
//! solved by damped Newton with the analytic Jacobian columns
//! `Lambda v / lambda`, `-i v`, `v_y / lambda` (`v = eps + phi`), plus the
//! error functionals, rate diagnostics and the Lyapunov functional
//! `(eps, i Lambda phi)` evaluated along tracked trajectories.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::evolver::{ls_slope, virial_moment, Flow, Trajectory};
use crate::field::{apply_lambda, ComplexField};
use crate::linop::apply_l;
use crate::soliton::{conserved, ConservedTriple, Soliton};

pub const MAX_ITER: usize = 50;
pub const MAX_HALVINGS: usize = 5;
pub const LAMBDA_BOUND: f64 = 0.5;

/// Fixed data for decomposing around one soliton.
#[derive(Debug, Clone)]
pub struct Modulator {
    pub sol: Soliton,
    pub chi: ComplexField,
    i_phi: ComplexField,
    /// `i Lambda phi`
    i_lambda_phi: ComplexField,
    /// `2 omega phi + c i phi'`
    forcing: ComplexField,
    /// `(phi, chi)`
    phi_chi: f64,
    phi_conserved: ConservedTriple,
    pub newton_tol: f64,
    pub lambda_bound: f64,
    /// Window fraction for the x-weighted J-relation check.
    pub window_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct ModulationState {
    pub lambda: f64,
    pub theta: f64,
    pub xshift: f64,
    pub eps: ComplexField,
    /// `[(eps, chi), (eps, i phi), (eps, phi')]`
    pub residuals: [f64; 3],
    pub iterations: usize,
}

impl Modulator {
    pub fn new(sol: &Soliton, chi: &ComplexField) -> Result<Self> {
        sol.grid().same_as(chi.grid())?;
        let p = sol.params;
        let i_phi = sol.phi.times_i();
        let forcing = &sol.phi.scale(2.0 * p.omega) + &sol.phi_prime.times_i().scale(p.c);
        Ok(Modulator {
            sol: sol.clone(),
            chi: chi.clone(),
            i_lambda_phi: sol.lambda_phi.times_i(),
            phi_chi: sol.phi.dot(chi),
            phi_conserved: conserved(&sol.phi, p.b),
            newton_tol: 1e-10 * sol.phi.norm_l2(),
            lambda_bound: LAMBDA_BOUND,
            window_fraction: 0.8,
            i_phi,
            forcing,
        })
    }

    /// `v = lambda^{1/2} e^{-i theta} u(lambda y + x)`.
    pub fn modulated(&self, u: &ComplexField, lambda: f64, theta: f64, x: f64) -> ComplexField {
        let f = Complex64::from_polar(lambda.sqrt(), -theta);
        &u.resample(lambda, x) * f
    }

    fn residual_of(&self, v: &ComplexField) -> Vector3<f64> {
        Vector3::new(
            v.dot(&self.chi) - self.phi_chi,
            v.dot(&self.i_phi),
            v.dot(&self.sol.phi_prime),
        )
    }

    /// Newton solve from `guess = (lambda, theta, x)`. Once the residual is
    /// below `newton_tol`, one more step is taken if it helps.
    pub fn decompose(&self, u: &ComplexField, guess: (f64, f64, f64)) -> Result<ModulationState> {
        self.sol.grid().same_as(u.grid())?;
        let (l, th, x) = guess;
        let v = self.modulated(u, l, th, x);
        let f = self.residual_of(&v);
        let mut cur = (l, th, x, v, f);
        let mut it = 0;
        while cur.4.amax() >= self.newton_tol {
            if it == MAX_ITER {
                return Err(LabError::NewtonFailed {
                    iterations: it,
                    residual: cur.4.amax(),
                });
            }
            it += 1;
            match self.newton_step(u, &cur) {
                Some(next) => cur = next,
                None => {
                    return Err(LabError::NewtonFailed {
                        iterations: it,
                        residual: cur.4.amax(),
                    })
                }
            }
        }
        if let Some(next) = self.newton_step(u, &cur) {
            cur = next;
        }
        let (l, th, x, v, f) = cur;
        if (l - 1.0).abs() >= self.lambda_bound {
            return Err(LabError::LambdaOutOfRange {
                lambda: l,
                bound: self.lambda_bound,
            });
        }
        Ok(ModulationState {
            lambda: l,
            theta: th,
            xshift: x,
            eps: &v - &self.sol.phi,
            residuals: [f[0], f[1], f[2]],
            iterations: it,
        })
    }

    /// One backtracking Newton step; `None` if no trial step reduces `|F|`.
    #[allow(clippy::type_complexity)]
    fn newton_step(
        &self,
        u: &ComplexField,
        cur: &(f64, f64, f64, ComplexField, Vector3<f64>),
    ) -> Option<(f64, f64, f64, ComplexField, Vector3<f64>)> {
        let (l, th, x, v, f) = cur;
        let vy = v.derivative();
        let cols = [apply_lambda(v).scale(1.0 / l), v.times_i().scale(-1.0), vy.scale(1.0 / l)];
        let dirs = [&self.chi, &self.i_phi, &self.sol.phi_prime];
        let jac = Matrix3::from_fn(|i, j| cols[j].dot(dirs[i]));
        let step = jac.lu().solve(&(-f))?;
        let mut t = 1.0;
        for _ in 0..=MAX_HALVINGS {
            let (lt, tht, xt) = (l + t * step[0], th + t * step[1], x + t * step[2]);
            if lt > 0.0 {
                let vt = self.modulated(u, lt, tht, xt);
                let ft = self.residual_of(&vt);
                if ft.norm() < f.norm() {
                    return Some((lt, tht, xt, vt, ft));
                }
            }
            t *= 0.5;
        }
        None
    }

    /// `(eps, i Lambda phi)`.
    pub fn lyapunov(&self, eps: &ComplexField) -> f64 {
        eps.dot(&self.i_lambda_phi)
    }

    /// `(eps, 2 omega phi + c i phi')`.
    pub fn forcing(&self, eps: &ComplexField) -> f64 {
        eps.dot(&self.forcing)
    }

    pub fn error_functionals(&self, eps: &ComplexField) -> ErrorFunctionals {
        error_functionals_with(&self.sol, &self.phi_conserved, eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorFunctionals {
    pub energy: f64,
    pub mass: f64,
    pub momentum: f64,
    pub action: f64,
}

fn error_functionals_with(sol: &Soliton, base: &ConservedTriple, eps: &ComplexField) -> ErrorFunctionals {
    let p = sol.params;
    let q = conserved(&(&sol.phi + eps), p.b);
    let (e, m, pm) = (q.energy - base.energy, q.mass - base.mass, q.momentum - base.momentum);
    ErrorFunctionals {
        energy: e,
        mass: m,
        momentum: pm,
        action: e + 0.5 * p.omega * m + 0.5 * p.c * pm,
    }
}

/// `E(phi + eps) - E(phi)` and likewise for `M`, `P`, `S`, by direct evaluation.
pub fn error_functionals(eps: &ComplexField, sol: &Soliton) -> ErrorFunctionals {
    error_functionals_with(sol, &conserved(&sol.phi, sol.params.b), eps)
}

/// `(eps, i Lambda phi)`.
pub fn lyapunov(eps: &ComplexField, sol: &Soliton) -> f64 {
    eps.dot(&sol.lambda_phi.times_i())
}

/// `|S_e(delta eps1) - (1/2) delta^2 <L eps1, eps1>|` for each `delta`.
pub fn taylor_remainders(sol: &Soliton, eps1: &ComplexField, deltas: &[f64]) -> Result<Vec<f64>> {
    let quad = 0.5 * apply_l(sol, eps1)?.dot(eps1);
    let base = conserved(&sol.phi, sol.params.b);
    Ok(deltas
        .iter()
        .map(|&d| (error_functionals_with(sol, &base, &eps1.scale(d)).action - d * d * quad).abs())
        .collect())
}

/// Log-log slope of `values` against `deltas`.
pub fn loglog_slope(deltas: &[f64], values: &[f64]) -> f64 {
    let lx: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    ls_slope(&lx, &ly)
}

/// One tracked sample.
#[derive(Debug, Clone, Serialize)]
pub struct TrackRow {
    pub t: f64,
    pub s: f64,
    pub lambda: f64,
    pub theta: f64,
    pub x: f64,
    pub eps_l2: f64,
    pub eps_h1: f64,
    pub lyapunov: f64,
    pub e_e: f64,
    pub m_e: f64,
    pub p_e: f64,
    pub s_e: f64,
    pub res_chi: f64,
    pub res_iphi: f64,
    pub res_phip: f64,
    /// `(eps, 2 omega phi + c i phi')`
    pub forcing: f64,
    /// `J[eps] - (2 (eps, i Lambda phi) + J[u] + x P(u))` on the window.
    pub j_residual: f64,
}

pub const TRACK_COLUMNS: [&str; 17] = [
    "t", "s", "lambda", "theta", "x", "eps_l2", "eps_h1", "lyapunov", "E_e", "M_e", "P_e", "S_e",
    "res_chi", "res_iphi", "res_phip", "forcing", "j_residual",
];

impl TrackRow {
    pub fn values(&self) -> [f64; 17] {
        [
            self.t, self.s, self.lambda, self.theta, self.x, self.eps_l2, self.eps_h1, self.lyapunov,
            self.e_e, self.m_e, self.p_e, self.s_e, self.res_chi, self.res_iphi, self.res_phip,
            self.forcing, self.j_residual,
        ]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulationTrack {
    pub rows: Vec<TrackRow>,
    /// Index (into the samples offered) of the first failed decomposition.
    pub exit_index: Option<usize>,
    pub exit_reason: Option<String>,
    pub omega: f64,
    pub c: f64,
    /// `2 omega (eps0, phi) + c (eps0, i phi')`, with `c (eps0, i phi')` kept
    /// separately so the leading forcing can be rebuilt as `lambda` varies.
    pub eps0_phi: f64,
    pub eps0_iphip: f64,
}

impl ModulationTrack {
    pub fn column(&self, f: impl Fn(&TrackRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }
}

/// Incremental tracker, driven sample by sample (usually from an evolve
/// observer). Warm starts advance `theta` by `omega dt` and `x` by `c dt`.
pub struct Tracker<'a> {
    pub modulator: &'a Modulator,
    guess: (f64, f64, f64),
    last_t: Option<f64>,
    offered: usize,
    pub track: ModulationTrack,
}

impl<'a> Tracker<'a> {
    pub fn new(modulator: &'a Modulator) -> Self {
        let p = modulator.sol.params;
        Tracker {
            modulator,
            guess: (1.0, 0.0, 0.0),
            last_t: None,
            offered: 0,
            track: ModulationTrack {
                rows: Vec::new(),
                exit_index: None,
                exit_reason: None,
                omega: p.omega,
                c: p.c,
                eps0_phi: f64::NAN,
                eps0_iphip: f64::NAN,
            },
        }
    }

    pub fn exited(&self) -> bool {
        self.track.exit_index.is_some()
    }

    pub fn last(&self) -> Option<&TrackRow> {
        self.track.rows.last()
    }

    /// Decompose `u` at time `t`. Returns `Flow::Stop` once a decomposition
    /// fails; the failure is recorded as the exit marker.
    pub fn push(&mut self, t: f64, u: &ComplexField, q: &ConservedTriple) -> Flow {
        if self.exited() {
            return Flow::Stop;
        }
        let m = self.modulator;
        let p = m.sol.params;
        let idx = self.offered;
        self.offered += 1;
        let guess = match self.last_t {
            Some(t0) => {
                let dt = t - t0;
                (self.guess.0, self.guess.1 + p.omega * dt, self.guess.2 + p.c * dt)
            }
            None => self.guess,
        };
        let st = match m.decompose(u, guess) {
            Ok(st) => st,
            Err(e) => {
                self.track.exit_index = Some(idx);
                self.track.exit_reason = Some(e.to_string());
                return Flow::Stop;
            }
        };
        let s = match (self.last_t, self.track.rows.last()) {
            (Some(t0), Some(prev)) => {
                prev.s + 0.5 * (t - t0) * (1.0 / (prev.lambda * prev.lambda) + 1.0 / (st.lambda * st.lambda))
            }
            _ => 0.0,
        };
        if self.track.rows.is_empty() {
            self.track.eps0_phi = st.eps.dot(&m.sol.phi);
            self.track.eps0_iphip = st.eps.dot(&m.sol.phi_prime.times_i());
        }
        let ef = m.error_functionals(&st.eps);
        let lyap = m.lyapunov(&st.eps);
        let wf = m.window_fraction;
        let j_residual = virial_moment(&st.eps, wf) - (2.0 * lyap + virial_moment(u, wf) + st.xshift * q.momentum);
        self.track.rows.push(TrackRow {
            t,
            s,
            lambda: st.lambda,
            theta: st.theta,
            x: st.xshift,
            eps_l2: st.eps.norm_l2(),
            eps_h1: st.eps.norm_h1(),
            lyapunov: lyap,
            e_e: ef.energy,
            m_e: ef.mass,
            p_e: ef.momentum,
            s_e: ef.action,
            res_chi: st.residuals[0],
            res_iphi: st.residuals[1],
            res_phip: st.residuals[2],
            forcing: m.forcing(&st.eps),
            j_residual,
        });
        self.guess = (st.lambda, st.theta, st.xshift);
        self.last_t = Some(t);
        Flow::Continue
    }
}

/// Track every stored snapshot of a trajectory.
pub fn track(traj: &Trajectory, modulator: &Modulator) -> ModulationTrack {
    let mut tr = Tracker::new(modulator);
    for ((&t, u), q) in traj.times.iter().zip(&traj.snapshots).zip(&traj.conserved) {
        if tr.push(t, u, q) == Flow::Stop {
            break;
        }
    }
    tr.track
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingReport {
    /// `max |M_e(s) - M_e(0)| / |M_e(0)|`
    pub mass: f64,
    /// `max |P_e(s) - lambda P_e(0)| / |P_e(0)|`
    pub momentum: f64,
    /// `max |E_e(s) - lambda^2 E_e(0)| / |E_e(0)|`
    pub energy: f64,
}

/// Relative discrepancies of `M_e = M_e(0)`, `P_e = lambda P_e(0)`,
/// `E_e = lambda^2 E_e(0)` along the track (valid when `E(phi) = P(phi) = 0`).
pub fn scaling_laws_check(trk: &ModulationTrack) -> ScalingReport {
    let Some(r0) = trk.rows.first() else {
        return ScalingReport {
            mass: 0.0,
            momentum: 0.0,
            energy: 0.0,
        };
    };
    let rel = |a: f64, b: f64| if b != 0.0 { (a / b).abs() } else { a.abs() };
    let mut rep = ScalingReport {
        mass: 0.0,
        momentum: 0.0,
        energy: 0.0,
    };
    for r in &trk.rows {
        rep.mass = rep.mass.max(rel(r.m_e - r0.m_e, r0.m_e));
        rep.momentum = rep.momentum.max(rel(r.p_e - r.lambda * r0.p_e, r0.p_e));
        rep.energy = rep.energy.max(rel(r.e_e - r.lambda * r.lambda * r0.e_e, r0.e_e));
    }
    rep
}

/// Central differences of `y` in `s` at interior samples.
fn central_diff(s: &[f64], y: &[f64]) -> Vec<f64> {
    (1..s.len().saturating_sub(1))
        .map(|k| {
            let (h0, h1) = (s[k] - s[k - 1], s[k + 1] - s[k]);
            // second-order on non-uniform spacing
            (h0 * h0 * (y[k + 1] - y[k]) + h1 * h1 * (y[k] - y[k - 1])) / (h0 * h1 * (h0 + h1))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    /// `lambda_s / lambda`, `theta_s - omega`, `x_s / lambda - c` at interior samples.
    pub lambda_rate: Vec<f64>,
    pub theta_rate: Vec<f64>,
    pub x_rate: Vec<f64>,
    /// `(|lambda_s/lambda| + |theta_s - omega| + |x_s/lambda - c|) / ||eps||_{L^2}`
    pub ratio: Vec<f64>,
    pub max_ratio: f64,
    /// Largest jump of `theta` between consecutive samples.
    pub max_theta_jump: f64,
}

pub fn parameter_rate_probe(trk: &ModulationTrack) -> Result<RateReport> {
    if trk.rows.len() < 3 {
        return Err(LabError::Diagnostic("rate probe needs at least three samples".into()));
    }
    let s = trk.column(|r| r.s);
    let lam = trk.column(|r| r.lambda);
    let th = trk.column(|r| r.theta);
    let x = trk.column(|r| r.x);
    let dl = central_diff(&s, &lam);
    let dth = central_diff(&s, &th);
    let dx = central_diff(&s, &x);
    let mut rep = RateReport {
        lambda_rate: Vec::new(),
        theta_rate: Vec::new(),
        x_rate: Vec::new(),
        ratio: Vec::new(),
        max_ratio: 0.0,
        max_theta_jump: th.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max),
    };
    for k in 0..dl.len() {
        let r = &trk.rows[k + 1];
        let a = dl[k] / r.lambda;
        let b = dth[k] - trk.omega;
        let c = dx[k] / r.lambda - trk.c;
        rep.lambda_rate.push(a);
        rep.theta_rate.push(b);
        rep.x_rate.push(c);
        let q = (a.abs() + b.abs() + c.abs()) / r.eps_l2;
        rep.max_ratio = rep.max_ratio.max(q);
        rep.ratio.push(q);
    }
    Ok(rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovRateReport {
    /// `d/ds (eps, i Lambda phi)` at interior samples.
    pub rate: Vec<f64>,
    /// `(eps, 2 omega phi + c i phi')` at the same samples.
    pub forcing: Vec<f64>,
    /// `2 omega (eps0, phi) + c lambda (eps0, i phi')`.
    pub leading: Vec<f64>,
    /// `max |rate - forcing| / ||eps||_{H^1}^2`
    pub max_forcing_ratio: f64,
    /// `max |rate - leading| / ||eps||_{H^1}^2`
    pub max_leading_ratio: f64,
    pub min_rate: f64,
    pub max_j_residual: f64,
}

pub fn lyapunov_rate_check(trk: &ModulationTrack) -> Result<LyapunovRateReport> {
    if trk.rows.len() < 3 {
        return Err(LabError::Diagnostic("rate check needs at least three samples".into()));
    }
    let s = trk.column(|r| r.s);
    let ly = trk.column(|r| r.lyapunov);
    let rate = central_diff(&s, &ly);
    let mut rep = LyapunovRateReport {
        forcing: Vec::new(),
        leading: Vec::new(),
        max_forcing_ratio: 0.0,
        max_leading_ratio: 0.0,
        min_rate: rate.iter().copied().fold(f64::INFINITY, f64::min),
        max_j_residual: trk.rows.iter().map(|r| r.j_residual.abs()).fold(0.0, f64::max),
        rate,
    };
    for (k, &d) in rep.rate.iter().enumerate() {
        let r = &trk.rows[k + 1];
        let lead = 2.0 * trk.omega * trk.eps0_phi + trk.c * r.lambda * trk.eps0_iphip;
        let h1 = r.eps_h1 * r.eps_h1;
        rep.max_forcing_ratio = rep.max_forcing_ratio.max((d - r.forcing).abs() / h1);
        rep.max_leading_ratio = rep.max_leading_ratio.max((d - lead).abs() / h1);
        rep.forcing.push(r.forcing);
        rep.leading.push(lead);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::random_smooth;
    use crate::grid::Grid;
    use crate::linop::{assemble_ltilde, spectral_decompose, SpectralConfig};
    use crate::par::Exec;
    use crate::soliton::classify_params;
    use std::sync::{Arc, OnceLock};

    fn setup() -> &'static (Arc<Grid>, Modulator) {
        static CELL: OnceLock<(Arc<Grid>, Modulator)> = OnceLock::new();
        CELL.get_or_init(|| {
            let g = Grid::new(512, 25.0).unwrap();
            let s = Soliton::new(classify_params(1.0, 1.0, 0.4), &g).unwrap();
            let op = assemble_ltilde(&s, Exec::Parallel);
            let sd = spectral_decompose(&op, SpectralConfig::for_omega(1.0)).unwrap();
            let m = Modulator::new(&s, sd.chi.as_ref().unwrap()).unwrap();
            (g, m)
        })
    }

    #[test]
    fn soliton_decomposes_to_identity() {
        let (_, m) = setup();
        let st = m.decompose(&m.sol.phi, (1.0, 0.0, 0.0)).unwrap();
        assert_eq!(st.iterations, 0);
        assert_eq!((st.lambda, st.theta, st.xshift), (1.0, 0.0, 0.0));
        assert_eq!(st.eps.max_abs(), 0.0);
    }

    #[test]
    fn recovers_symmetry_parameters() {
        let (_, m) = setup();
        let (l0, th0, x0) = (1.08, 0.3, -0.4);
        // u(z) = l0^{-1/2} e^{i th0} phi((z - x0)/l0)
        let u = &m.sol.phi.resample(1.0 / l0, -x0 / l0) * Complex64::from_polar(l0.powf(-0.5), th0);
        let st = m.decompose(&u, (1.0, 0.0, 0.0)).unwrap();
        assert!((st.lambda - l0).abs() < 1e-8);
        assert!((st.theta - th0).abs() < 1e-8);
        assert!((st.xshift - x0).abs() < 1e-8);
        assert!(st.eps.norm_l2() < 1e-8);
        assert!(st.residuals.iter().all(|r| r.abs() < m.newton_tol));
    }

    #[test]
    fn gauge_and_translation_equivariance() {
        let (g, m) = setup();
        let u = &m.sol.phi + &random_smooth(g, 3).scale(0.01);
        let a = m.decompose(&u, (1.0, 0.0, 0.0)).unwrap();
        let ug = &u * Complex64::from_polar(1.0, 0.5);
        let b = m.decompose(&ug, (1.0, 0.5, 0.0)).unwrap();
        assert!((b.theta - a.theta - 0.5).abs() < 1e-9);
        assert!((b.lambda - a.lambda).abs() < 1e-9);
        assert!((b.eps.norm_l2() - a.eps.norm_l2()).abs() < 1e-9);
        let ut = u.translate(0.7);
        let c = m.decompose(&ut, (1.0, 0.0, 0.7)).unwrap();
        assert!((c.xshift - a.xshift - 0.7).abs() < 1e-9);
        assert!((c.theta - a.theta).abs() < 1e-9);
    }

    #[test]
    fn far_state_is_rejected() {
        let (g, m) = setup();
        let u = ComplexField::zeros(g);
        assert!(m.decompose(&u, (1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn mass_error_is_exact_quadratic() {
        let (g, m) = setup();
        let bump = ComplexField::from_fn(g, |x| Complex64::new((-(x - 0.5) * (x - 0.5)).exp(), 0.0));
        let d = 0.01;
        let ef = error_functionals(&bump.scale(d), &m.sol);
        let exact = 2.0 * d * m.sol.phi.dot(&bump) + d * d * bump.norm_l2_sq();
        assert!((ef.mass - exact).abs() < 1e-14);
        let z = error_functionals(&ComplexField::zeros(g), &m.sol);
        assert_eq!((z.energy, z.mass, z.momentum, z.action), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn lyapunov_properties() {
        let (g, m) = setup();
        let ilp = m.sol.lambda_phi.times_i();
        assert!((lyapunov(&ilp, &m.sol) - m.sol.lambda_phi.norm_l2_sq()).abs() < 1e-12);
        let e = random_smooth(g, 9);
        let a = lyapunov(&e, &m.sol);
        // Im int eps conj(Lambda phi), second quadrature path
        let b: f64 = e
            .values()
            .iter()
            .zip(m.sol.lambda_phi.values())
            .map(|(x, y)| (x * y.conj()).im)
            .sum::<f64>()
            * g.dx();
        assert!((a - b).abs() < 1e-13);
        assert!(a.abs() <= m.sol.lambda_phi.norm_l2() * e.norm_l2());
    }

    #[test]
    fn central_diff_exact_on_quadratics() {
        let s = [0.0, 0.1, 0.25, 0.5];
        let y: Vec<f64> = s.iter().map(|t| 3.0 * t * t - t).collect();
        let d = central_diff(&s, &y);
        assert!((d[0] - (6.0 * 0.1 - 1.0)).abs() < 1e-12);
        assert!((d[1] - (6.0 * 0.25 - 1.0)).abs() < 1e-12);
    }
}
