//! End-to-end instability experiment at a degenerate soliton: build data
//! `u0 = phi + eps0` with `eps0` orthogonal to `{chi, i phi, phi', i phi'}`,
//! evolve, track the modulation, and watch the Lyapunov functional push the
//! solution out of the tube
//!
//! ```text
//! U_alpha = { u : inf_{theta, y} ||u - e^{i theta} phi(. - y)||_{H^1} < alpha }.
//! ```

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::evolver::{evolve, EvolveConfig, Flow};
use crate::field::ComplexField;
use crate::grid::Grid;
use crate::linop::{assemble_ltilde, orthonormalize, spectral_decompose, SpectralConfig, SpectralData};
use crate::modulation::{Modulator, Tracker};
use crate::par::{self, Exec};
use crate::soliton::{conserved, ConservedTriple, Regime, Soliton, SolitonParams};

#[derive(Debug, Clone)]
pub struct UnstableData {
    pub u0: ComplexField,
    pub eps0: ComplexField,
    /// `(eps0, chi), (eps0, i phi), (eps0, phi'), (eps0, i phi')`
    pub orthogonality: [f64; 4],
    /// `(eps0, phi)`
    pub eps0_phi: f64,
}

/// `u0 = phi + delta eps1 / ||eps1||_{H^1}`, where `eps1` is the seed (default
/// `phi`) with `{chi, i phi, phi', i phi'}` projected out.
pub fn build_unstable_data(
    sol: &Soliton,
    chi: &ComplexField,
    delta: f64,
    seed: Option<&ComplexField>,
) -> Result<UnstableData> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(LabError::InvalidConfig("delta must be positive".into()));
    }
    let i_phip = sol.phi_prime.times_i();
    let i_phi = sol.phi.times_i();
    let dirs = [chi.clone(), i_phi.clone(), sol.phi_prime.clone(), i_phip.clone()];
    let basis = orthonormalize(&dirs);
    let mut e1 = seed.cloned().unwrap_or_else(|| sol.phi.clone());
    sol.grid().same_as(e1.grid())?;
    for _ in 0..2 {
        for q in &basis {
            e1 = &e1 - &q.scale(e1.dot(q));
        }
    }
    let overlap = e1.dot(&sol.phi);
    let seed_norm = seed.map_or_else(|| sol.phi.norm_l2(), |s| s.norm_l2());
    if e1.norm_l2() <= 1e-8 * seed_norm || overlap.abs() <= 1e-8 * e1.norm_l2() * sol.phi.norm_l2() {
        return Err(LabError::DegenerateSeed { overlap });
    }
    let eps0 = e1.scale(delta / e1.norm_h1());
    let orthogonality = [
        eps0.dot(chi),
        eps0.dot(&i_phi),
        eps0.dot(&sol.phi_prime),
        eps0.dot(&i_phip),
    ];
    Ok(UnstableData {
        u0: &sol.phi + &eps0,
        eps0_phi: eps0.dot(&sol.phi),
        orthogonality,
        eps0,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TubeDistance {
    pub distance: f64,
    pub theta: f64,
    pub shift: f64,
}

/// `inf_{theta, y} ||u - e^{i theta} phi(. - y)||_{H^1}`.
///
/// The `H^1` pairing `C(y) = <u, phi(. - y)>` is evaluated at every grid
/// shift with one FFT; the optimal phase is `arg C(y)`, and the best shift
/// is refined by bisection on `d|C|^2/dy`.
pub fn tube_distance(u: &ComplexField, sol: &Soliton) -> Result<TubeDistance> {
    sol.grid().same_as(u.grid())?;
    let g = u.grid();
    let n = g.n();
    let uh = g.forward(u.values());
    let ph = g.forward(sol.phi.values());
    let weight: Vec<f64> = (0..n).map(|m| 1.0 + g.d1_symbol(m).norm_sqr()).collect();
    let mut a: Vec<Complex64> = (0..n).map(|m| weight[m] * uh[m] * ph[m].conj()).collect();
    a[n / 2] = Complex64::new(0.0, 0.0);
    let c_grid = g.inverse(&a);
    let shift_of = |j: usize| {
        let j = j as f64;
        let jj = if j < n as f64 / 2.0 { j } else { j - n as f64 };
        jj * g.dx()
    };
    let best = (0..n)
        .max_by(|&i, &j| c_grid[i].norm().total_cmp(&c_grid[j].norm()))
        .unwrap_or(0);
    let k = g.wavenumbers();
    let c_at = |y: f64| -> Complex64 {
        a.iter()
            .zip(k)
            .map(|(z, &km)| z * Complex64::from_polar(1.0, km * y))
            .sum::<Complex64>()
    };
    // d|C|^2/dy = 2 Re(conj(C) C') changes sign at the maximum; bisect it.
    let slope = |y: f64| -> f64 {
        let (mut c, mut dc) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for (z, &km) in a.iter().zip(k) {
            let t = z * Complex64::from_polar(1.0, km * y);
            c += t;
            dc += Complex64::new(0.0, km) * t;
        }
        (c.conj() * dc).re
    };
    let (mut lo, mut hi) = (shift_of(best) - g.dx(), shift_of(best) + g.dx());
    let y = if slope(lo) > 0.0 && slope(hi) < 0.0 {
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    } else {
        shift_of(best)
    };
    let theta = c_at(y).arg();
    let rot = Complex64::from_polar(1.0, theta);
    let d2: f64 = (0..n)
        .map(|m| {
            let target = rot * ph[m] * Complex64::from_polar(1.0, -k[m] * y);
            weight[m] * (uh[m] - target).norm_sqr()
        })
        .sum::<f64>()
        * g.dx()
        / n as f64;
    Ok(TubeDistance {
        distance: d2.max(0.0).sqrt(),
        theta,
        shift: y,
    })
}

/// Soliton, its spectral data and negative direction, computed once.
#[derive(Debug, Clone)]
pub struct Setup {
    pub sol: Soliton,
    /// Spectral data on the grid where `chi` was computed (see
    /// [`Setup::with_chi_grid`]).
    pub spectral: SpectralData,
    pub chi: ComplexField,
}

impl Setup {
    pub fn new(params: SolitonParams, grid: &Arc<Grid>, exec: Exec) -> Result<Self> {
        let sol = Soliton::new(params, grid)?;
        let spectral = decompose(&sol, exec)?;
        let chi = chi_of(&spectral)?;
        Ok(Setup { sol, spectral, chi })
    }

    /// Like [`Setup::new`], but the dense eigenproblem is solved on a grid
    /// with `chi_n` nodes and the same box; `chi` is carried to `grid` by
    /// band-limited interpolation in the tilde frame, where it is smooth and
    /// decaying. Costs `O(chi_n^3)` instead of `O(n^3)`.
    pub fn with_chi_grid(params: SolitonParams, grid: &Arc<Grid>, chi_n: usize, exec: Exec) -> Result<Self> {
        if chi_n >= grid.n() {
            return Self::new(params, grid, exec);
        }
        let coarse = Grid::new(chi_n, grid.half_width())?;
        let csol = Soliton::new(params, &coarse)?;
        let spectral = decompose(&csol, exec)?;
        let spec = coarse.forward(csol.to_tilde(&chi_of(&spectral)?).values());
        let vals = par::map(exec, grid.nodes(), |&x| coarse.evaluate_at(&spec, x));
        let sol = Soliton::new(params, grid)?;
        let chi = sol.from_tilde(&ComplexField::new(grid.clone(), vals));
        let chi = chi.scale(1.0 / chi.norm_l2());
        Ok(Setup { sol, spectral, chi })
    }
}

fn decompose(sol: &Soliton, exec: Exec) -> Result<SpectralData> {
    let mut cfg = SpectralConfig::for_omega(sol.params.omega);
    cfg.classify = sol.params.regime == Regime::Interior;
    spectral_decompose(&assemble_ltilde(sol, exec), cfg)
}

fn chi_of(sd: &SpectralData) -> Result<ComplexField> {
    sd.chi
        .clone()
        .ok_or_else(|| LabError::Diagnostic("no negative direction found".into()))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct InstabilityConfig {
    /// `||eps0||_{H^1}`.
    pub delta: f64,
    /// Tube radius.
    pub alpha: f64,
    /// `+1` for `(eps0, phi) > 0`, `-1` flips the seed.
    pub sign: f64,
    pub evolve: EvolveConfig,
    /// Tolerance in the strict-increase test of the Lyapunov series.
    pub slope_tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InstabilityReport {
    pub params: SolitonParams,
    pub n: usize,
    pub half_width: f64,
    pub dt: f64,
    pub delta: f64,
    pub alpha: f64,
    pub sign: f64,
    /// `b = 0` or endpoint runs are outside the asserted setting.
    pub exploratory: bool,
    pub eps0_phi: f64,
    pub orthogonality: [f64; 4],
    pub u0: ConservedTriple,
    pub phi: ConservedTriple,
    /// Interpolated first time the tube distance reaches `alpha`.
    pub exit_time: Option<f64>,
    pub exit_s: Option<f64>,
    pub times: Vec<f64>,
    pub s: Vec<f64>,
    pub lyapunov_series: Vec<f64>,
    pub tube_distance_series: Vec<f64>,
    pub eps_l2_series: Vec<f64>,
    /// Lyapunov series moves strictly in the direction of `sign` (within
    /// `slope_tol`) until exit.
    pub monotone: bool,
    /// `sign * d/ds` of the Lyapunov series.
    pub initial_slope: f64,
    pub min_slope: f64,
    /// `|(eps, i Lambda phi)| <= ||Lambda phi|| ||eps||` at every sample.
    pub ceiling_ok: bool,
    /// `(||Lambda phi|| max ||eps|| - sign L(0)) / min_slope`: latest `s` at
    /// which the growth could still fit under the ceiling.
    pub ceiling_horizon_s: f64,
    pub decomposition_exit: Option<String>,
}

impl InstabilityReport {
    pub fn slope_ratio(&self) -> f64 {
        self.min_slope / self.initial_slope
    }
}

fn slopes(s: &[f64], y: &[f64], sign: f64) -> Vec<f64> {
    s.windows(2)
        .zip(y.windows(2))
        .map(|(a, b)| sign * (b[1] - b[0]) / (a[1] - a[0]))
        .collect()
}

/// Build data, evolve, track and certify the exit.
pub fn run_instability(setup: &Setup, cfg: &InstabilityConfig) -> Result<InstabilityReport> {
    let sol = &setup.sol;
    let p = sol.params;
    let seed = sol.phi.scale(cfg.sign.signum());
    let data = build_unstable_data(sol, &setup.chi, cfg.delta, Some(&seed))?;
    let modulator = Modulator::new(sol, &setup.chi)?;
    let mut tracker = Tracker::new(&modulator);
    let mut ecfg = cfg.evolve;
    ecfg.keep_snapshots = false;

    let mut dist: Vec<f64> = Vec::new();
    let mut dist_err: Option<LabError> = None;
    evolve(&data.u0, &ecfg, p.b, |t, u, q| {
        let d = match tube_distance(u, sol) {
            Ok(d) => d.distance,
            Err(e) => {
                dist_err = Some(e);
                return Flow::Stop;
            }
        };
        if tracker.push(t, u, q) == Flow::Stop {
            return Flow::Stop;
        }
        dist.push(d);
        if d >= cfg.alpha {
            Flow::Stop
        } else {
            Flow::Continue
        }
    })?;
    if let Some(e) = dist_err {
        return Err(e);
    }
    let trk = tracker.track;
    let rows = &trk.rows;
    let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let s: Vec<f64> = rows.iter().map(|r| r.s).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.lyapunov).collect();
    let eps_l2: Vec<f64> = rows.iter().map(|r| r.eps_l2).collect();
    let dist = dist[..rows.len()].to_vec();

    let exit = dist.iter().position(|&d| d >= cfg.alpha);
    let (exit_time, exit_s) = match exit {
        Some(0) => (Some(0.0), Some(0.0)),
        Some(k) => {
            let w = (cfg.alpha - dist[k - 1]) / (dist[k] - dist[k - 1]);
            (
                Some(times[k - 1] + w * (times[k] - times[k - 1])),
                Some(s[k - 1] + w * (s[k] - s[k - 1])),
            )
        }
        None => (None, None),
    };
    let in_tube = exit.unwrap_or(rows.len());
    let sign = cfg.sign.signum();
    let sl = slopes(&s[..in_tube.min(s.len())], &ly[..in_tube.min(ly.len())], sign);
    let monotone = ly[..in_tube]
        .windows(2)
        .all(|w| sign * (w[1] - w[0]) > -cfg.slope_tol);
    let initial_slope = sl.first().copied().unwrap_or(f64::NAN);
    let min_slope = sl.iter().copied().fold(f64::INFINITY, f64::min);
    let lp = sol.lambda_phi.norm_l2();
    let ceiling_ok = ly
        .iter()
        .zip(&eps_l2)
        .all(|(l, e)| l.abs() <= lp * e * (1.0 + 1e-12));
    let eps_max = eps_l2.iter().copied().fold(0.0, f64::max);
    let ceiling_horizon_s = (lp * eps_max - sign * ly.first().copied().unwrap_or(0.0)) / min_slope;

    Ok(InstabilityReport {
        params: p,
        n: sol.grid().n(),
        half_width: sol.grid().half_width(),
        dt: cfg.evolve.dt,
        delta: cfg.delta,
        alpha: cfg.alpha,
        sign,
        exploratory: p.b <= 0.0 || p.regime != Regime::Interior,
        eps0_phi: data.eps0_phi,
        orthogonality: data.orthogonality,
        u0: conserved(&data.u0, p.b),
        phi: conserved(&sol.phi, p.b),
        exit_time,
        exit_s,
        times,
        s,
        lyapunov_series: ly,
        tube_distance_series: dist,
        eps_l2_series: eps_l2,
        monotone,
        initial_slope,
        min_slope,
        ceiling_ok,
        ceiling_horizon_s,
        decomposition_exit: trk.exit_reason.clone(),
    })
}

/// Independent runs over several configurations, fanned out under `exec`.
pub fn run_sweep(setup: &Setup, cfgs: &[InstabilityConfig], exec: Exec) -> Vec<Result<InstabilityReport>> {
    par::map(exec, cfgs, |c| run_instability(setup, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::random_smooth;
    use crate::soliton::classify_params;
    use std::sync::OnceLock;

    fn setup() -> &'static Setup {
        static CELL: OnceLock<Setup> = OnceLock::new();
        CELL.get_or_init(|| {
            let g = Grid::new(512, 25.0).unwrap();
            Setup::new(classify_params(1.0, 1.0, 0.5402726126), &g, Exec::Parallel).unwrap()
        })
    }

    #[test]
    fn unstable_data_is_orthogonal() {
        let st = setup();
        let d = build_unstable_data(&st.sol, &st.chi, 1e-2, None).unwrap();
        assert!(d.orthogonality.iter().all(|r| r.abs() < 1e-10));
        assert!((d.eps0.norm_h1() - 1e-2).abs() < 1e-14);
        assert!(d.eps0_phi > 0.0);
    }

    #[test]
    fn degenerate_seed_is_rejected() {
        let st = setup();
        let seed = st.sol.phi.times_i();
        assert!(matches!(
            build_unstable_data(&st.sol, &st.chi, 1e-2, Some(&seed)),
            Err(LabError::DegenerateSeed { .. })
        ));
    }

    #[test]
    fn tube_distance_on_orbit_is_zero() {
        let st = setup();
        let phi = &st.sol.phi;
        assert!(tube_distance(phi, &st.sol).unwrap().distance < 1e-10);
        let u = &phi.translate(1.3) * Complex64::from_polar(1.0, -2.0);
        let d = tube_distance(&u, &st.sol).unwrap();
        assert!(d.distance < 1e-8, "{}", d.distance);
        assert!((d.shift - 1.3).abs() < 1e-8);
    }

    #[test]
    fn interpolated_chi_matches_direct() {
        let st = setup();
        let fine = Grid::new(1024, 25.0).unwrap();
        let interp = Setup::with_chi_grid(st.sol.params, &fine, 512, Exec::Parallel).unwrap();
        assert!((interp.chi.norm_l2() - 1.0).abs() < 1e-12);
        // every other fine node is a coarse node
        let a = interp.sol.to_tilde(&interp.chi);
        let b = st.sol.to_tilde(&st.chi);
        let err = a
            .values()
            .iter()
            .step_by(2)
            .zip(b.values())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn tube_distance_invariance() {
        let st = setup();
        let g = st.sol.grid();
        let u = &st.sol.phi + &random_smooth(g, 5).scale(0.05);
        let a = tube_distance(&u, &st.sol).unwrap().distance;
        let v = &u.translate(-0.9) * Complex64::from_polar(1.0, 0.4);
        let b = tube_distance(&v, &st.sol).unwrap().distance;
        assert!((a - b).abs() < 1e-10);
    }
}
