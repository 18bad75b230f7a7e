//! The two-parameter soliton family `e^{i omega t} phi(x - c t)` of
//!
//! ```text
//! i u_t = -u_xx - i |u|^2 u_x - b |u|^4 u
//! ```
//!
//! Profiles are closed form; the gauge phase `eta` is a cumulative
//! quadrature. Conserved functionals use spectral differentiation and the
//! periodic trapezoid rule.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::{apply_lambda, ComplexField, I};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `-2 sqrt(omega) < c < 2 sqrt(omega)` (or the shorter range when `b <= -3/16`).
    Interior,
    /// `c = 2 sqrt(omega)`, `b > -3/16`: algebraically decaying profile.
    Endpoint,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonParams {
    pub b: f64,
    pub omega: f64,
    pub c: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub regime: Regime,
    pub kappa_star: Option<f64>,
}

impl SolitonParams {
    /// `4 omega - c^2`, the squared exponential decay rate of `Phi^2`.
    pub fn discriminant(&self) -> f64 {
        4.0 * self.omega - self.c * self.c
    }

    pub fn is_admissible(&self) -> bool {
        self.regime != Regime::Invalid
    }

    pub fn require_admissible(&self) -> Result<()> {
        if self.is_admissible() {
            Ok(())
        } else {
            Err(self.invalid(admissible_range(self.b, self.omega)))
        }
    }

    fn invalid(&self, reason: String) -> LabError {
        LabError::InvalidParams {
            b: self.b,
            omega: self.omega,
            c: self.c,
            reason,
        }
    }

    /// Box half-width at which `Phi` has decayed below `budget`. Endpoint
    /// profiles only decay like `1/|x|`, so they get a fixed wide box.
    pub fn suggested_half_width(&self, budget: f64) -> f64 {
        match self.regime {
            Regime::Interior => {
                let a = self.discriminant().sqrt();
                let amp = self.big_a();
                let l = (2.0 / a) * (2.0 * a / (amp.sqrt() * budget)).ln();
                l.max(10.0)
            }
            _ => 200.0,
        }
    }

    fn big_a(&self) -> f64 {
        let d = self.discriminant();
        (self.c * self.c + self.gamma * d).sqrt()
    }
}

pub fn gamma_of(b: f64) -> f64 {
    1.0 + 16.0 / 3.0 * b
}

pub fn kappa_star_of(b: f64) -> Option<f64> {
    (b <= -3.0 / 16.0).then(|| ((3.0 + 16.0 * b) / (16.0 * b)).sqrt())
}

fn admissible_range(b: f64, omega: f64) -> String {
    let s = 2.0 * omega.max(0.0).sqrt();
    match kappa_star_of(b) {
        None => format!("admissible range is -{s} < c <= {s} (omega > 0)"),
        Some(ks) => format!("admissible range is -{s} < c < {} (omega > 0)", -ks * s),
    }
}

/// Classify `(b, omega, c)` into interior / endpoint / invalid.
pub fn classify_params(b: f64, omega: f64, c: f64) -> SolitonParams {
    let gamma = gamma_of(b);
    let kappa_star = kappa_star_of(b);
    let (kappa, regime) = if omega.is_nan() || omega <= 0.0 || !b.is_finite() || !c.is_finite() {
        (f64::NAN, Regime::Invalid)
    } else {
        let s = 2.0 * omega.sqrt();
        let kappa = c / s;
        let regime = match kappa_star {
            None => {
                if (c - s).abs() <= 1e-14 * s {
                    Regime::Endpoint
                } else if -s < c && c < s {
                    Regime::Interior
                } else {
                    Regime::Invalid
                }
            }
            Some(ks) => {
                if -s < c && c < -ks * s {
                    Regime::Interior
                } else {
                    Regime::Invalid
                }
            }
        };
        (kappa, regime)
    };
    SolitonParams {
        b,
        omega,
        c,
        gamma,
        kappa,
        regime,
        kappa_star,
    }
}

/// `(Phi^2, (Phi^2)')` at a point, overflow-free in the interior case.
fn phi_sq_and_slope(p: &SolitonParams, x: f64) -> (f64, f64) {
    match p.regime {
        Regime::Interior => {
            let d = p.discriminant();
            let a = d.sqrt();
            let big_a = p.big_a();
            let e = (-a * x.abs()).exp();
            let de = 0.5 * big_a * (1.0 + e * e) - p.c * e;
            let sq = 2.0 * d * e / de;
            let slope = -2.0 * d * big_a * a * x.signum() * 0.5 * (1.0 - e * e) * e / (de * de);
            (sq, slope)
        }
        Regime::Endpoint => {
            let c = p.c;
            let den = (c * x) * (c * x) + p.gamma;
            (4.0 * c / den, -8.0 * c * c * c * x / (den * den))
        }
        Regime::Invalid => (f64::NAN, f64::NAN),
    }
}

/// Positive even profile `Phi_{omega,c}` on the grid.
pub fn profile_phi(params: &SolitonParams, grid: &Grid) -> Result<Vec<f64>> {
    params.require_admissible()?;
    Ok(grid
        .nodes()
        .iter()
        .map(|&x| phi_sq_and_slope(params, x).0.sqrt())
        .collect())
}

/// Analytic `Phi'` on the grid.
pub fn profile_phi_prime(params: &SolitonParams, grid: &Grid) -> Result<Vec<f64>> {
    params.require_admissible()?;
    Ok(grid
        .nodes()
        .iter()
        .map(|&x| {
            let (sq, slope) = phi_sq_and_slope(params, x);
            if sq > 0.0 {
                slope / (2.0 * sq.sqrt())
            } else {
                0.0
            }
        })
        .collect())
}

/// Gauge phase `eta(x) = (c/2) x - (1/4) int_{-inf}^x Phi^2`.
///
/// Interior profiles: spectral cumulative quadrature from the left box
/// edge; the tail beyond it is below the decay budget and dropped.
/// Endpoint profiles: the antiderivative of `4c/((cx)^2 + gamma)` is
/// elementary and used on the whole line.
pub fn phase_eta(params: &SolitonParams, grid: &Grid) -> Result<Vec<f64>> {
    params.require_admissible()?;
    let half_c = 0.5 * params.c;
    match params.regime {
        Regime::Endpoint => {
            let sg = params.gamma.sqrt();
            Ok(grid
                .nodes()
                .iter()
                .map(|&x| half_c * x - ((params.c * x / sg).atan() + 0.5 * PI) / sg)
                .collect())
        }
        _ => {
            let sq: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|&x| phi_sq_and_slope(params, x).0)
                .collect();
            let cum = grid.cumulative_integral_real(&sq);
            Ok(grid
                .nodes()
                .iter()
                .zip(&cum)
                .map(|(&x, &q)| half_c * x - 0.25 * q)
                .collect())
        }
    }
}

/// `phi = Phi e^{i eta}`.
pub fn soliton_phi(params: &SolitonParams, grid: &Arc<Grid>) -> Result<ComplexField> {
    let prof = profile_phi(params, grid)?;
    let eta = phase_eta(params, grid)?;
    Ok(ComplexField::new(
        grid.clone(),
        prof.iter()
            .zip(&eta)
            .map(|(&r, &t)| Complex64::from_polar(r, t))
            .collect(),
    ))
}

/// Everything downstream modules need about one soliton, sampled once.
#[derive(Debug, Clone)]
pub struct Soliton {
    pub params: SolitonParams,
    grid: Arc<Grid>,
    /// `Phi`
    pub profile: Vec<f64>,
    /// `Phi'`
    pub profile_prime: Vec<f64>,
    pub eta: Vec<f64>,
    pub phi: ComplexField,
    /// `phi'` from the analytic profile derivative and `eta' = c/2 - Phi^2/4`.
    pub phi_prime: ComplexField,
    pub lambda_phi: ComplexField,
}

impl Soliton {
    pub fn new(params: SolitonParams, grid: &Arc<Grid>) -> Result<Self> {
        let profile = profile_phi(&params, grid)?;
        let profile_prime = profile_phi_prime(&params, grid)?;
        let eta = phase_eta(&params, grid)?;
        let phi = ComplexField::new(
            grid.clone(),
            profile
                .iter()
                .zip(&eta)
                .map(|(&r, &t)| Complex64::from_polar(r, t))
                .collect(),
        );
        let phi_prime = ComplexField::new(
            grid.clone(),
            (0..grid.n())
                .map(|j| {
                    let r = profile[j];
                    let deta = 0.5 * params.c - 0.25 * r * r;
                    Complex64::from_polar(1.0, eta[j]) * Complex64::new(profile_prime[j], deta * r)
                })
                .collect(),
        );
        let lambda_phi = ComplexField::new(
            grid.clone(),
            phi.values()
                .iter()
                .zip(phi_prime.values())
                .zip(grid.nodes())
                .map(|((&p, &dp), &y)| 0.5 * p + y * dp)
                .collect(),
        );
        Ok(Soliton {
            params,
            grid: grid.clone(),
            profile,
            profile_prime,
            eta,
            phi,
            phi_prime,
            lambda_phi,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// `e^{i eta} w`: tilde frame to physical frame.
    pub fn from_tilde(&self, w: &ComplexField) -> ComplexField {
        w.with_values(
            w.values()
                .iter()
                .zip(&self.eta)
                .map(|(&z, &t)| z * Complex64::from_polar(1.0, t))
                .collect(),
        )
    }

    /// `e^{-i eta} v`: physical frame to tilde frame.
    pub fn to_tilde(&self, v: &ComplexField) -> ComplexField {
        v.with_values(
            v.values()
                .iter()
                .zip(&self.eta)
                .map(|(&z, &t)| z * Complex64::from_polar(1.0, -t))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservedTriple {
    pub energy: f64,
    pub mass: f64,
    pub momentum: f64,
}

/// Energy, mass and momentum of `u` for the quintic coefficient `b`.
pub fn conserved(u: &ComplexField, b: f64) -> ConservedTriple {
    let ux = u.derivative();
    let g = u.grid();
    let mut kin = 0.0;
    let mut cubic = 0.0;
    let mut sextic = 0.0;
    let mut mass = 0.0;
    let mut mom = 0.0;
    for (z, dz) in u.values().iter().zip(ux.values()) {
        let m2 = z.norm_sqr();
        let cross = (dz * z.conj()).im;
        kin += dz.norm_sqr();
        cubic += m2 * cross;
        sextic += m2 * m2 * m2;
        mass += m2;
        mom += cross;
    }
    let dx = g.dx();
    // (i|u|^2 u_x, u) = -int |u|^2 Im(u_x conj u)
    ConservedTriple {
        energy: dx * (0.5 * kin + 0.25 * cubic - b / 6.0 * sextic),
        mass: dx * mass,
        momentum: -dx * mom,
    }
}

/// Mass of the profile outside `[-L, L]`. At the endpoint the profile decays
/// algebraically, `Phi^2 = 4c / ((cx)^2 + gamma)`, so the tail is
/// `(8/sqrt(gamma)) (pi/2 - atan(cL/sqrt(gamma)))`; in the interior it is
/// exponentially small and reported as zero.
pub fn tail_mass(params: &SolitonParams, half_width: f64) -> f64 {
    match params.regime {
        Regime::Endpoint => {
            let sg = params.gamma.sqrt();
            8.0 / sg * (0.5 * PI - (params.c * half_width / sg).atan())
        }
        _ => 0.0,
    }
}

/// `M(phi)` on the grid plus [`tail_mass`].
pub fn mass_with_tail(params: &SolitonParams, grid: &Grid) -> Result<f64> {
    let phi = profile_phi(params, grid)?;
    Ok(grid.integrate(&phi.iter().map(|f| f * f).collect::<Vec<_>>()) + tail_mass(params, grid.half_width()))
}

/// Action `S_{omega,c}(v) = E + omega/2 M + c/2 P`.
pub fn action(u: &ComplexField, params: &SolitonParams) -> f64 {
    let t = conserved(u, params.b);
    t.energy + 0.5 * params.omega * t.mass + 0.5 * params.c * t.momentum
}

/// Max-norm residuals of the stationary equations for `phi` and for `Phi`.
pub fn stationary_residual(params: &SolitonParams, grid: &Arc<Grid>) -> Result<(f64, f64)> {
    let phi = soliton_phi(params, grid)?;
    let (b, w, c) = (params.b, params.omega, params.c);
    let d1 = phi.derivative();
    let d2 = phi.second_derivative();
    let r_complex = (0..grid.n())
        .map(|j| {
            let p = phi.values()[j];
            let m2 = p.norm_sqr();
            (-d2.values()[j] + w * p + c * I * d1.values()[j]
                - I * m2 * d1.values()[j]
                - b * m2 * m2 * p)
                .norm()
        })
        .fold(0.0, f64::max);

    let prof = profile_phi(params, grid)?;
    let pp = grid.second_derivative_real(&prof);
    let r_real = prof
        .iter()
        .zip(&pp)
        .map(|(&f, &f2)| {
            (-f2 + (w - 0.25 * c * c) * f + 0.5 * c * f.powi(3)
                - 3.0 / 16.0 * params.gamma * f.powi(5))
            .abs()
        })
        .fold(0.0, f64::max);
    Ok((r_complex, r_real))
}

/// Momentum of `phi_{1, 2 kappa}` on `grid`.
pub fn normalized_momentum(b: f64, kappa: f64, grid: &Arc<Grid>) -> Result<f64> {
    let p = classify_params(b, 1.0, 2.0 * kappa);
    Ok(conserved(&soliton_phi(&p, grid)?, b).momentum)
}

pub const KAPPA0_UPPER: f64 = 1.0 - 1e-6;
pub const KAPPA0_TOL: f64 = 1e-12;

/// The degenerate speed ratio `kappa_0(b)` at which the normalized soliton
/// has zero momentum (and zero energy).
///
/// Bisection on the grid momentum over `[0, 1 - 1e-6]`. At `b = 0` the
/// momentum stays positive up to the algebraic endpoint and `1` is
/// returned.
pub fn find_kappa0(b: f64, grid: &Arc<Grid>) -> Result<f64> {
    if b < 0.0 || !b.is_finite() {
        return Err(LabError::InvalidParams {
            b,
            omega: 1.0,
            c: f64::NAN,
            reason: "kappa_0 is defined for b >= 0".into(),
        });
    }
    if b == 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, KAPPA0_UPPER);
    let p_lo = normalized_momentum(b, lo, grid)?;
    let p_hi = normalized_momentum(b, hi, grid)?;
    if !(p_lo > 0.0 && p_hi < 0.0) {
        return Err(LabError::NoBracket { b, lo, hi });
    }
    while hi - lo > KAPPA0_TOL {
        let mid = 0.5 * (lo + hi);
        if normalized_momentum(b, mid, grid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k0 = 0.5 * (lo + hi);
    let p = classify_params(b, 1.0, 2.0 * k0);
    let t = conserved(&soliton_phi(&p, grid)?, b);
    if t.energy.abs() > 1e-6 * t.mass.max(1.0) {
        return Err(LabError::Diagnostic(format!(
            "kappa_0 = {k0} has momentum zero but energy {:e}; grid too coarse or box too small",
            t.energy
        )));
    }
    Ok(k0)
}

/// Max-norm discrepancy between `phi_{omega, 2 kappa sqrt(omega)}(x)` and
/// `omega^{1/4} phi_{1, 2 kappa}(sqrt(omega) x)`, over nodes where the
/// rescaled point stays inside the box.
pub fn scaling_check(b: f64, kappa: f64, omega: f64, grid: &Arc<Grid>) -> Result<f64> {
    let p_w = classify_params(b, omega, 2.0 * kappa * omega.sqrt());
    let p_1 = classify_params(b, 1.0, 2.0 * kappa);
    let lhs = soliton_phi(&p_w, grid)?;
    let rhs = soliton_phi(&p_1, grid)?
        .resample(omega.sqrt(), 0.0)
        .scale(omega.powf(0.25));
    let reach = grid.half_width() / omega.sqrt().max(1.0);
    Ok(grid
        .nodes()
        .iter()
        .zip(lhs.values().iter().zip(rhs.values()))
        .filter(|(x, _)| x.abs() < reach)
        .map(|(_, (a, b))| (a - b).norm())
        .fold(0.0, f64::max))
}

/// `d(omega, c) = S_{omega,c}(phi_{omega,c})` on `grid`.
pub fn action_value(b: f64, omega: f64, c: f64, grid: &Arc<Grid>) -> Result<f64> {
    let p = classify_params(b, omega, c);
    Ok(action(&soliton_phi(&p, grid)?, &p))
}

/// Closed-form right-hand side `-2P / (sqrt(4w - c^2) (c^2 + gamma (4w - c^2)))`.
pub fn hessian_det_closed_form(params: &SolitonParams, momentum: f64) -> f64 {
    let d = params.discriminant();
    -2.0 * momentum / (d.sqrt() * (params.c * params.c + params.gamma * d))
}

fn hessian_at_step(b: f64, w: f64, c: f64, h: f64, grid: &Arc<Grid>) -> Result<[f64; 3]> {
    let d = |dw: f64, dc: f64| action_value(b, w + dw, c + dc, grid);
    let d0 = d(0.0, 0.0)?;
    let dww = (d(h, 0.0)? - 2.0 * d0 + d(-h, 0.0)?) / (h * h);
    let dcc = (d(0.0, h)? - 2.0 * d0 + d(0.0, -h)?) / (h * h);
    let dwc = (d(h, h)? - d(h, -h)? - d(-h, h)? + d(-h, -h)?) / (4.0 * h * h);
    Ok([dww, dcc, dwc])
}

/// `(finite-difference det d''(omega, c), closed-form right-hand side)`.
///
/// Central differences at `h` and `h/2` combined by one Richardson step.
pub fn action_hessian_det(params: &SolitonParams, h: f64, grid: &Arc<Grid>) -> Result<(f64, f64)> {
    if params.regime != Regime::Interior {
        return Err(params.invalid("Hessian check needs an interior soliton".into()));
    }
    let margin = (2.0 * params.omega.sqrt() - params.c.abs()).min(params.omega);
    if h.is_nan() || h <= 0.0 || margin < 2.0 * h {
        return Err(LabError::StepTooLarge { h, margin });
    }
    let (b, w, c) = (params.b, params.omega, params.c);
    let coarse = hessian_at_step(b, w, c, h, grid)?;
    let fine = hessian_at_step(b, w, c, 0.5 * h, grid)?;
    let r: Vec<f64> = (0..3).map(|i| (4.0 * fine[i] - coarse[i]) / 3.0).collect();
    let det = r[0] * r[1] - r[2] * r[2];
    let p = conserved(&soliton_phi(params, grid)?, b).momentum;
    Ok((det, hessian_det_closed_form(params, p)))
}

/// `Lambda f = f/2 + y f_y` (re-exported here for the soliton-facing API).
pub fn lambda_of(f: &ComplexField) -> ComplexField {
    apply_lambda(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, l: f64) -> Arc<Grid> {
        Grid::new(n, l).unwrap()
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_params(0.0, 1.0, 2.0).regime, Regime::Endpoint);
        assert_eq!(classify_params(0.0, 1.0, 3.0).regime, Regime::Invalid);
        assert_eq!(classify_params(0.0, 1.0, -2.0).regime, Regime::Invalid);
        assert_eq!(classify_params(1.0, 1.0, 0.5).regime, Regime::Interior);
        let p = classify_params(-1.0, 1.0, 0.0);
        assert_eq!(p.regime, Regime::Invalid);
        let ks = p.kappa_star.unwrap();
        assert!((ks - 13f64.sqrt() / 4.0).abs() < 1e-15);
        assert!(ks > 0.0 && ks < 1.0);
        assert_eq!(classify_params(-1.0, 1.0, -1.9).regime, Regime::Interior);
        assert_eq!(classify_params(-1.0, 1.0, 2.0).regime, Regime::Invalid);
        assert_eq!(classify_params(0.3, 0.0, 0.0).regime, Regime::Invalid);
        assert_eq!(classify_params(0.3, 1.0, 0.0).gamma, 1.0 + 16.0 / 3.0 * 0.3);
    }

    #[test]
    fn profile_anchor_values() {
        let g = grid(256, 20.0);
        let c0 = g.center();
        let p = profile_phi(&classify_params(0.0, 1.0, 0.0), &g).unwrap();
        assert!((p[c0] - 2.0).abs() < 1e-14);
        let p = profile_phi(&classify_params(0.0, 1.0, 2.0), &g).unwrap();
        assert!((p[c0] - 8f64.sqrt()).abs() < 1e-14);
        assert!(profile_phi(&classify_params(0.0, 1.0, 3.0), &g).is_err());
    }

    #[test]
    fn profile_is_even_and_decays() {
        let g = grid(1024, 30.0);
        let p = profile_phi(&classify_params(1.0, 1.0, 0.3), &g).unwrap();
        let n = g.n();
        for j in 1..n / 2 {
            assert_eq!(p[n / 2 + j], p[n / 2 - j]);
        }
        assert!(p[0] < 1e-10);
        assert!(p.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn profile_derivative_matches_spectral() {
        let g = grid(1024, 30.0);
        let pr = classify_params(1.0, 1.0, 0.54);
        let p = profile_phi(&pr, &g).unwrap();
        let dp = profile_phi_prime(&pr, &g).unwrap();
        let spec = g.derivative_real(&p);
        for (a, b) in dp.iter().zip(&spec) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn eta_anchor_values() {
        let g = grid(1024, 30.0);
        let p = classify_params(0.0, 1.0, 0.0);
        let eta = phase_eta(&p, &g).unwrap();
        assert!((eta[g.center()] + PI / 4.0).abs() < 1e-12);
        let pr = classify_params(1.0, 1.0, 0.6);
        let eta = phase_eta(&pr, &g).unwrap();
        let m: f64 = g.integrate(&profile_phi(&pr, &g).unwrap().iter().map(|v| v * v).collect::<Vec<_>>());
        assert!((eta[g.center()] + m / 8.0).abs() < 1e-12);
        // slope tends to c/2 at the box edges
        let slope = (eta[1] - eta[0]) / g.dx();
        assert!((slope - 0.3).abs() < 1e-10);
    }

    #[test]
    fn eta_endpoint_closed_form_total() {
        let g = grid(1024, 50.0);
        let p = classify_params(0.0, 1.0, 2.0);
        let eta = phase_eta(&p, &g).unwrap();
        // eta(0) = -(1/8) * 4 pi
        assert!((eta[g.center()] + PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn soliton_modulus_is_profile() {
        let g = grid(512, 25.0);
        let pr = classify_params(0.5, 1.3, -0.4);
        let phi = soliton_phi(&pr, &g).unwrap();
        let prof = profile_phi(&pr, &g).unwrap();
        for (z, r) in phi.values().iter().zip(&prof) {
            assert!((z.norm() - r).abs() < 1e-14);
        }
        let m_phi = conserved(&phi, pr.b).mass;
        let m_prof = g.integrate(&prof.iter().map(|v| v * v).collect::<Vec<_>>());
        assert!((m_phi - m_prof).abs() < 1e-12);
    }

    #[test]
    fn conserved_of_zero_and_gaussian() {
        let g = grid(256, 15.0);
        let z = ComplexField::zeros(&g);
        let t = conserved(&z, 1.0);
        assert_eq!((t.energy, t.mass, t.momentum), (0.0, 0.0, 0.0));
        let u = ComplexField::from_fn(&g, |x| Complex64::new((-x * x).exp(), 0.0));
        let t = conserved(&u, 0.0);
        assert!(t.momentum.abs() < 1e-15);
        assert!((t.mass - (PI / 2.0).sqrt()).abs() < 1e-13);
        // E = (1/2) int 4 x^2 e^{-2x^2} = sqrt(pi/2)/2 at b = 0
        assert!((t.energy - 0.5 * (PI / 2.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn residuals_small_and_detect_perturbation() {
        let g = grid(2048, 30.0);
        let (r1, r2) = stationary_residual(&classify_params(0.0, 1.0, 0.0), &g).unwrap();
        assert!(r1 < 1e-8 && r2 < 1e-8, "{r1} {r2}");
        // perturbed profile is not a solution
        let pr = classify_params(1.0, 1.0, 0.0);
        let prof: Vec<f64> = profile_phi(&pr, &g).unwrap().iter().map(|v| 1.01 * v).collect();
        let pp = g.second_derivative_real(&prof);
        let r = prof
            .iter()
            .zip(&pp)
            .map(|(&f, &f2)| (-f2 + f - 3.0 / 16.0 * pr.gamma * f.powi(5)).abs())
            .fold(0.0, f64::max);
        assert!(r > 1e-2);
    }

    #[test]
    fn kappa0_at_zero_and_bad_input() {
        let g = grid(256, 30.0);
        assert_eq!(find_kappa0(0.0, &g).unwrap(), 1.0);
        assert!(find_kappa0(-0.5, &g).is_err());
    }

    #[test]
    fn scaling_identity_is_exact() {
        let g = grid(512, 30.0);
        assert_eq!(scaling_check(1.0, 0.2, 1.0, &g).unwrap(), 0.0);
    }

    #[test]
    fn hessian_step_guard() {
        let g = grid(256, 30.0);
        let p = classify_params(0.0, 1.0, 1.999);
        assert!(matches!(
            action_hessian_det(&p, 1e-3, &g),
            Err(LabError::StepTooLarge { .. })
        ));
        let e = classify_params(0.0, 1.0, 2.0);
        assert!(action_hessian_det(&e, 1e-3, &g).is_err());
    }

    #[test]
    fn endpoint_mass_is_4pi_with_tail() {
        let p = classify_params(0.0, 1.0, 2.0);
        let g = Grid::new(8192, 400.0).unwrap();
        let m = mass_with_tail(&p, &g).unwrap();
        assert!((m / (4.0 * PI) - 1.0).abs() < 1e-4, "{m}");
        // the tail alone is O(1/L)
        let t = tail_mass(&p, 400.0);
        assert!((t - 8.0 / (2.0 * 400.0)).abs() < 1e-6);
        assert_eq!(tail_mass(&classify_params(1.0, 1.0, 0.5), 30.0), 0.0);
    }
}
