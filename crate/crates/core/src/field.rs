use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::Grid;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Complex samples on a [`Grid`]. Inner products are the real `L^2`
/// pairing `(v, w) = Re int v conj(w)`.
#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), grid.n(), "field length must match grid");
        ComplexField { grid, values }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::new(grid.clone(), vec![Complex64::new(0.0, 0.0); grid.n()])
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Self::new(grid.clone(), values)
    }

    pub fn from_real(grid: &Arc<Grid>, re: &[f64]) -> Self {
        Self::new(
            grid.clone(),
            re.iter().map(|&r| Complex64::new(r, 0.0)).collect(),
        )
    }

    pub fn from_parts(grid: &Arc<Grid>, re: &[f64], im: &[f64]) -> Self {
        Self::new(
            grid.clone(),
            re.iter()
                .zip(im)
                .map(|(&a, &b)| Complex64::new(a, b))
                .collect(),
        )
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.im).collect()
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    pub fn check_grid(&self, other: &ComplexField) -> Result<()> {
        self.grid.same_as(&other.grid)
    }

    pub fn with_values(&self, values: Vec<Complex64>) -> Self {
        Self::new(self.grid.clone(), values)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        self.with_values(self.values.iter().map(|&z| f(z)).collect())
    }

    /// Pointwise combination; panics on length mismatch.
    pub fn zip_map(&self, other: &ComplexField, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn times_i(&self) -> Self {
        self.map(|z| z * I)
    }

    pub fn derivative(&self) -> Self {
        self.with_values(self.grid.derivative(&self.values))
    }

    pub fn second_derivative(&self) -> Self {
        self.with_values(self.grid.second_derivative(&self.values))
    }

    /// Real `L^2` inner product `Re int v conj(w)`.
    pub fn dot(&self, other: &ComplexField) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum();
        s * self.grid.dx()
    }

    pub fn norm_l2_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_l2_sq().sqrt()
    }

    /// `||v||_{L2}^2 + ||v_x||_{L2}^2`, evaluated in Fourier space.
    pub fn norm_h1_sq(&self) -> f64 {
        let spec = self.grid.forward(&self.values);
        let g = &self.grid;
        let s: f64 = spec
            .iter()
            .enumerate()
            .map(|(j, z)| (1.0 + g.d1_symbol(j).norm_sqr()) * z.norm_sqr())
            .sum();
        s * g.dx() / g.n() as f64
    }

    pub fn norm_h1(&self) -> f64 {
        self.norm_h1_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Band-limited evaluation of `v(y) = self(scale*y + shift)` on the same grid.
    pub fn resample(&self, scale: f64, shift: f64) -> Self {
        self.with_values(self.grid.resample(&self.values, scale, shift))
    }

    /// Exact translation `self(x - shift)` by a Fourier phase factor.
    pub fn translate(&self, shift: f64) -> Self {
        self.resample(1.0, -shift)
    }

    /// Weight every sample by a real function of the node coordinate.
    pub fn weighted(&self, w: impl Fn(f64) -> f64) -> Self {
        self.with_values(
            self.values
                .iter()
                .zip(self.grid.nodes())
                .map(|(&z, &x)| z * w(x))
                .collect(),
        )
    }
}

impl Add for &ComplexField {
    type Output = ComplexField;
    fn add(self, rhs: &ComplexField) -> ComplexField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &ComplexField {
    type Output = ComplexField;
    fn sub(self, rhs: &ComplexField) -> ComplexField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &ComplexField {
    type Output = ComplexField;
    fn mul(self, rhs: f64) -> ComplexField {
        self.scale(rhs)
    }
}

impl Mul<Complex64> for &ComplexField {
    type Output = ComplexField;
    fn mul(self, rhs: Complex64) -> ComplexField {
        self.map(|z| z * rhs)
    }
}

impl Neg for &ComplexField {
    type Output = ComplexField;
    fn neg(self) -> ComplexField {
        self.scale(-1.0)
    }
}

/// Scaling generator `f/2 + y f_y`.
pub fn apply_lambda(f: &ComplexField) -> ComplexField {
    let df = f.derivative();
    f.with_values(
        f.values()
            .iter()
            .zip(df.values())
            .zip(f.grid().nodes())
            .map(|((&v, &dv), &y)| 0.5 * v + y * dv)
            .collect(),
    )
}

/// Random smooth, rapidly decaying test field: three Gaussian wave packets
/// with random centers in `[-3, 3]`, widths in `[0.5, 1.5]`, carriers in
/// `[-2, 2]` and complex amplitudes. Deterministic in `seed`.
pub fn random_smooth(grid: &Arc<Grid>, seed: u64) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let packets: Vec<(f64, f64, f64, Complex64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(-3.0..3.0),
                rng.random_range(0.5..1.5),
                rng.random_range(-2.0..2.0),
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            )
        })
        .collect();
    ComplexField::from_fn(grid, |x| {
        packets
            .iter()
            .map(|&(x0, w, k, a)| {
                let y = (x - x0) / w;
                a * (-y * y).exp() * Complex64::from_polar(1.0, k * x)
            })
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_norms() {
        let g = Grid::new(256, 12.0).unwrap();
        let u = ComplexField::from_fn(&g, |x| Complex64::new((-x * x).exp(), 0.0));
        // int e^{-2x^2} = sqrt(pi/2), int 4x^2 e^{-2x^2} = sqrt(pi/2)
        let m = (PI / 2.0).sqrt();
        assert!((u.norm_l2_sq() - m).abs() < 1e-13);
        assert!((u.norm_h1_sq() - 2.0 * m).abs() < 1e-12);
    }

    #[test]
    fn lambda_is_skew() {
        let g = Grid::new(256, 12.0).unwrap();
        let f = ComplexField::from_fn(&g, |x| Complex64::new((-(x - 0.4) * (x - 0.4)).exp(), 0.0));
        let h = ComplexField::from_fn(&g, |x| Complex64::from_polar((-x * x / 2.0).exp(), 0.3 * x));
        assert!(apply_lambda(&f).dot(&f).abs() < 1e-12);
        let lhs = apply_lambda(&f).dot(&h);
        let rhs = -f.dot(&apply_lambda(&h));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn lambda_matches_scaling_derivative() {
        // d/dl l^{1/2} f(l y) at l = 1, by central differences in l
        let g = Grid::new(256, 12.0).unwrap();
        let f = |x: f64| 1.7 * (-x * x).exp();
        let lf = apply_lambda(&ComplexField::from_fn(&g, |x| Complex64::new(f(x), 0.0)));
        let h: f64 = 1e-5;
        for (j, &y) in g.nodes().iter().enumerate().step_by(5) {
            let p = (1.0 + h).sqrt() * f((1.0 + h) * y);
            let m = (1.0 - h).sqrt() * f((1.0 - h) * y);
            let fd = (p - m) / (2.0 * h);
            assert!((lf.values()[j].re - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn lambda_preserves_parity() {
        let g = Grid::new(128, 10.0).unwrap();
        let f = ComplexField::from_fn(&g, |x| Complex64::new((-x * x).exp() * (1.0 + x * x), 0.0));
        let lf = apply_lambda(&f);
        let n = g.n();
        for j in 1..n / 2 {
            assert!((lf.values()[n / 2 + j] - lf.values()[n / 2 - j]).norm() < 1e-12);
        }
    }
}
