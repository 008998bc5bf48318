//! Truncated Fourier series on the torus.
//!
//! A field of order `P` stores every coefficient on the cube `[-P, P]^D`,
//! densely and in lexicographic mode order. Three-dimensional fields carry
//! the frequencies `(l, m, n)` of `(theta, x1, x2)`; two-dimensional fields
//! carry `(m, n)`. The last two axes are always the spatial ones.

mod dft;
mod grid;
pub mod snapshot;

pub use dft::{
    dft_coefficients2, dft_coefficients2_vec, dft_coefficients3, dft_coefficients3_vec,
    dft_real_samples, RealDft2,
};
pub use grid::{
    eval_on_grid, eval_on_grid_complex, eval_profile_on_grid, ComplexGrid, GridField, GridSpec,
};

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;

pub type Complex = Complex64;

/// Relative tolerance for the Hermitian symmetry check behind `real_valued`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// A `(theta, x1, x2)` frequency triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mode3 {
    pub l: i32,
    pub m: i32,
    pub n: i32,
}

impl Mode3 {
    pub const fn new(l: i32, m: i32, n: i32) -> Self {
        Mode3 { l, m, n }
    }
}

impl From<[i32; 3]> for Mode3 {
    fn from(k: [i32; 3]) -> Self {
        Mode3::new(k[0], k[1], k[2])
    }
}

impl From<Mode3> for [i32; 3] {
    fn from(k: Mode3) -> Self {
        [k.l, k.m, k.n]
    }
}

impl fmt::Display for Mode3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.l, self.m, self.n)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField<const D: usize> {
    order: usize,
    t: f64,
    real_valued: bool,
    coeffs: Vec<Complex>,
}

pub type SpectralField3 = SpectralField<3>;
pub type SpectralField2 = SpectralField<2>;

impl<const D: usize> SpectralField<D> {
    pub fn zeros(order: usize, t: f64) -> Self {
        let side = 2 * order + 1;
        SpectralField {
            order,
            t,
            real_valued: false,
            coeffs: vec![Complex::new(0.0, 0.0); side.pow(D as u32)],
        }
    }

    pub fn from_coeffs(order: usize, t: f64, coeffs: Vec<Complex>) -> Result<Self> {
        let expected = (2 * order + 1).pow(D as u32);
        if coeffs.len() != expected {
            return Err(Error::param(format!(
                "expected {expected} coefficients for order {order}, got {}",
                coeffs.len()
            )));
        }
        let field = SpectralField {
            order,
            t,
            real_valued: false,
            coeffs,
        };
        field.check_finite()?;
        Ok(field)
    }

    /// Single coefficient `value` at `mode`, zero elsewhere.
    pub fn delta(order: usize, t: f64, mode: [i32; D], value: Complex) -> Result<Self> {
        let mut f = Self::zeros(order, t);
        let idx = f
            .index_of(mode)
            .ok_or_else(|| Error::param(format!("mode {mode:?} outside order {order}")))?;
        f.coeffs[idx] = value;
        Ok(f)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn side(&self) -> usize {
        2 * self.order + 1
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn set_t(&mut self, t: f64) {
        self.t = t;
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[Complex] {
        &self.coeffs
    }

    /// Mutable access clears the `real_valued` flag; re-mark after editing.
    pub fn coeffs_mut(&mut self) -> &mut [Complex] {
        self.real_valued = false;
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex> {
        self.coeffs
    }

    pub fn index_of(&self, mode: [i32; D]) -> Option<usize> {
        let p = self.order as i32;
        let side = self.side();
        let mut idx = 0usize;
        for &k in &mode {
            if k < -p || k > p {
                return None;
            }
            idx = idx * side + (k + p) as usize;
        }
        Some(idx)
    }

    pub fn mode_of(&self, mut index: usize) -> [i32; D] {
        let side = self.side();
        let p = self.order as i32;
        let mut mode = [0i32; D];
        for d in (0..D).rev() {
            mode[d] = (index % side) as i32 - p;
            index /= side;
        }
        mode
    }

    /// Coefficient at `mode`, zero outside the truncation cube.
    pub fn at(&self, mode: [i32; D]) -> Complex {
        self.index_of(mode)
            .map_or(Complex::new(0.0, 0.0), |i| self.coeffs[i])
    }

    pub fn set(&mut self, mode: [i32; D], value: Complex) -> Result<()> {
        let idx = self
            .index_of(mode)
            .ok_or_else(|| Error::param(format!("mode {mode:?} outside order {}", self.order)))?;
        self.real_valued = false;
        self.coeffs[idx] = value;
        Ok(())
    }

    pub fn modes(&self) -> impl Iterator<Item = ([i32; D], Complex)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, &c)| (self.mode_of(i), c))
    }

    pub fn check_finite(&self) -> Result<()> {
        match self
            .coeffs
            .iter()
            .position(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            Some(index) => Err(Error::InvalidField { index }),
            None => Ok(()),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Parseval norm `sqrt(sum |c|^2)`.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |c(-k) - conj(c(k))|` over all modes.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.coeffs.len();
        // Lexicographic storage maps -k to the mirrored index.
        (0..n)
            .map(|i| (self.coeffs[n - 1 - i] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_real_valued(&self) -> bool {
        self.real_valued
    }

    /// Flags the field as representing a real function after checking
    /// Hermitian symmetry to `HERMITIAN_TOL * max|c|`.
    pub fn mark_real_valued(self) -> Result<Self> {
        self.mark_real_valued_within(HERMITIAN_TOL)
    }

    /// Same with a caller-chosen relative tolerance.
    pub fn mark_real_valued_within(mut self, rel_tol: f64) -> Result<Self> {
        let defect = self.hermitian_defect();
        let tolerance = rel_tol * self.max_abs();
        if defect > tolerance {
            return Err(Error::NotReal {
                residue: defect,
                tolerance,
            });
        }
        self.real_valued = true;
        Ok(self)
    }

    pub fn scaled(&self, s: Complex) -> Self {
        SpectralField {
            order: self.order,
            t: self.t,
            real_valued: self.real_valued && s.im == 0.0,
            coeffs: self.coeffs.iter().map(|&c| c * s).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: Complex, other: &Self, b: Complex) -> Result<Self> {
        self.same_order(other)?;
        Ok(SpectralField {
            order: self.order,
            t: self.t,
            real_valued: false,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
        })
    }

    /// Re-truncates (or zero-pads) to another order.
    pub fn resized(&self, order: usize) -> Self {
        let mut out = Self::zeros(order, self.t);
        for i in 0..out.coeffs.len() {
            out.coeffs[i] = self.at(out.mode_of(i));
        }
        out.real_valued = self.real_valued;
        out
    }

    fn same_order(&self, other: &Self) -> Result<()> {
        if self.order != other.order {
            return Err(Error::OrderMismatch {
                left: self.order,
                right: other.order,
            });
        }
        Ok(())
    }
}

/// Spatial gradient `2i*pi*(m, n) * A(.., m, n)` acting on the last two axes.
pub fn gradient_coeffs<const D: usize>(a: &SpectralField<D>) -> Result<[SpectralField<D>; 2]> {
    a.check_finite()?;
    let mut gx = SpectralField::zeros(a.order, a.t);
    let mut gy = SpectralField::zeros(a.order, a.t);
    let two_pi_i = Complex::new(0.0, 2.0 * PI);
    for (i, &c) in a.coeffs.iter().enumerate() {
        let k = a.mode_of(i);
        gx.coeffs[i] = two_pi_i * f64::from(k[D - 2]) * c;
        gy.coeffs[i] = two_pi_i * f64::from(k[D - 1]) * c;
    }
    Ok([gx, gy])
}

/// Product of two truncated series, re-truncated to the common order.
/// Index pairs whose sum leaves the cube are dropped.
pub fn truncated_convolve<const D: usize>(
    a: &SpectralField<D>,
    b: &SpectralField<D>,
) -> Result<SpectralField<D>> {
    a.same_order(b)?;
    let p = a.order as i32;
    let mut out = SpectralField::zeros(a.order, a.t);
    for (ia, &ca) in a.coeffs.iter().enumerate() {
        if ca.re == 0.0 && ca.im == 0.0 {
            continue;
        }
        let ka = a.mode_of(ia);
        for (ib, &cb) in b.coeffs.iter().enumerate() {
            let kb = b.mode_of(ib);
            let mut sum = [0i32; D];
            let mut inside = true;
            for d in 0..D {
                sum[d] = ka[d] + kb[d];
                inside &= sum[d].abs() <= p;
            }
            if inside {
                let io = out.index_of(sum).expect("mode inside cube");
                out.coeffs[io] += ca * cb;
            }
        }
    }
    Ok(out)
}

/// Evaluates the theta dependence at `theta0`, leaving a spatial field.
pub fn slice_theta(z: &SpectralField3, theta0: f64) -> SpectralField2 {
    let p = z.order as i32;
    let side = z.side();
    let mut out = SpectralField2::zeros(z.order, z.t);
    for l in -p..=p {
        let phase = Complex::from_polar(1.0, 2.0 * PI * f64::from(l) * theta0);
        let base = ((l + p) as usize) * side * side;
        for (o, &c) in out
            .coeffs
            .iter_mut()
            .zip(&z.coeffs[base..base + side * side])
        {
            *o += c * phase;
        }
    }
    if z.real_valued {
        // Slices of a real profile are real; keep the flag when the check passes.
        if let Ok(marked) = out.clone().mark_real_valued() {
            return marked;
        }
    }
    out
}

/// L2 norm of the modes discarded when truncating `z` to `inner`.
pub fn tail_norm(z: &SpectralField3, inner: usize) -> Result<f64> {
    if inner >= z.order {
        return Err(Error::param(format!(
            "inner order {inner} must be below the field order {}",
            z.order
        )));
    }
    let inner = inner as i32;
    Ok(z.modes()
        .filter(|(k, _)| k.iter().any(|c| c.abs() > inner))
        .map(|(_, c)| c.norm_sqr())
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    pub(crate) fn random_field3(order: usize, seed: u64) -> SpectralField3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = SpectralField3::zeros(order, 0.0);
        for v in f.coeffs_mut() {
            *v = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        f
    }

    fn hermitian(f: &SpectralField3) -> SpectralField3 {
        let n = f.len();
        let coeffs: Vec<_> = (0..n)
            .map(|i| 0.5 * (f.coeffs[i] + f.coeffs[n - 1 - i].conj()))
            .collect();
        SpectralField3::from_coeffs(f.order, f.t, coeffs).unwrap()
    }

    #[test]
    fn index_roundtrip() {
        let f = SpectralField3::zeros(3, 0.0);
        for i in 0..f.len() {
            assert_eq!(f.index_of(f.mode_of(i)), Some(i));
        }
        assert_eq!(f.mode_of(0), [-3, -3, -3]);
        assert_eq!(f.index_of([4, 0, 0]), None);
    }

    #[test]
    fn gradient_of_single_mode() {
        let a = SpectralField3::delta(3, 0.0, [0, 1, 2], c(1.0, 0.0)).unwrap();
        let [gx, gy] = gradient_coeffs(&a).unwrap();
        assert_eq!(gx.at([0, 1, 2]), c(0.0, 2.0 * PI));
        assert_eq!(gy.at([0, 1, 2]), c(0.0, 4.0 * PI));
        assert_eq!(gx.max_abs(), 2.0 * PI);

        let a = SpectralField3::delta(5, 0.0, [5, 0, 0], c(1.0, 0.0)).unwrap();
        let [gx, gy] = gradient_coeffs(&a).unwrap();
        assert_eq!(gx.max_abs(), 0.0);
        assert_eq!(gy.max_abs(), 0.0);

        let [gx, gy] = gradient_coeffs(&SpectralField3::zeros(2, 0.0)).unwrap();
        assert_eq!(gx.max_abs() + gy.max_abs(), 0.0);
    }

    #[test]
    fn gradient_rejects_non_finite() {
        let mut a = SpectralField3::zeros(1, 0.0);
        a.coeffs_mut()[3] = c(f64::NAN, 0.0);
        assert!(matches!(gradient_coeffs(&a), Err(Error::InvalidField { index: 3 })));
    }

    #[test]
    fn convolution_identity_is_exact() {
        let b = random_field3(3, 7);
        let delta = SpectralField3::delta(3, 0.0, [0, 0, 0], c(1.0, 0.0)).unwrap();
        let out = truncated_convolve(&delta, &b).unwrap();
        assert_eq!(out.coeffs(), b.coeffs());
    }

    #[test]
    fn convolution_adds_modes() {
        let a = SpectralField3::delta(2, 0.0, [0, 1, 0], c(2.0, 0.0)).unwrap();
        let b = SpectralField3::delta(2, 0.0, [0, 0, 1], c(3.0, 0.0)).unwrap();
        let out = truncated_convolve(&a, &b).unwrap();
        assert_eq!(out.at([0, 1, 1]), c(6.0, 0.0));
        assert_eq!(out.max_abs(), 6.0);
    }

    #[test]
    fn convolution_truncates_at_boundary() {
        let a = SpectralField3::delta(1, 0.0, [0, 1, 0], c(1.0, 0.0)).unwrap();
        let out = truncated_convolve(&a, &a).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }

    #[test]
    fn convolution_order_mismatch() {
        let a = SpectralField3::zeros(1, 0.0);
        let b = SpectralField3::zeros(2, 0.0);
        assert!(matches!(
            truncated_convolve(&a, &b),
            Err(Error::OrderMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn convolution_matches_brute_force() {
        let a = random_field3(2, 1);
        let b = random_field3(2, 2);
        let out = truncated_convolve(&a, &b).unwrap();
        let p = 2;
        for l in -p..=p {
            for m in -p..=p {
                for n in -p..=p {
                    let mut s = c(0.0, 0.0);
                    for i in -p..=p {
                        for j in -p..=p {
                            for k in -p..=p {
                                s += a.at([i, j, k]) * b.at([l - i, m - j, n - k]);
                            }
                        }
                    }
                    assert!((s - out.at([l, m, n])).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn slice_of_theta_independent_profile() {
        let mut z = SpectralField3::zeros(2, 0.0);
        z.set([0, 1, -1], c(0.3, 0.1)).unwrap();
        z.set([0, 0, 2], c(-1.0, 0.5)).unwrap();
        for theta in [0.0, 0.17, 0.5, 0.9] {
            let s = slice_theta(&z, theta);
            assert_eq!(s.at([1, -1]), c(0.3, 0.1));
            assert_eq!(s.at([0, 2]), c(-1.0, 0.5));
        }
    }

    #[test]
    fn slice_phase_flip() {
        let z = SpectralField3::delta(2, 0.0, [1, 1, 0], c(0.7, -0.2)).unwrap();
        assert_eq!(slice_theta(&z, 0.0).at([1, 0]), c(0.7, -0.2));
        let half = slice_theta(&z, 0.5).at([1, 0]);
        assert!((half - c(-0.7, 0.2)).norm() < 1e-15);
    }

    #[test]
    fn tail_norm_cases() {
        let z = SpectralField3::delta(3, 0.0, [0, 0, 0], c(5.0, 0.0)).unwrap();
        assert_eq!(tail_norm(&z, 2).unwrap(), 0.0);
        let z = SpectralField3::delta(3, 0.0, [3, 0, 0], c(2.0, 0.0)).unwrap();
        assert_eq!(tail_norm(&z, 2).unwrap(), 2.0);
        assert!(tail_norm(&z, 3).is_err());

        let z = random_field3(3, 11);
        let brute: f64 = (-3i32..=3)
            .flat_map(|l| (-3i32..=3).flat_map(move |m| (-3i32..=3).map(move |n| [l, m, n])))
            .filter(|k| k.iter().map(|x| x.abs()).max().unwrap() > 1)
            .map(|k| z.at(k).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!((tail_norm(&z, 1).unwrap() - brute).abs() < 1e-13);
    }

    #[test]
    fn hermitian_flag_is_checked() {
        let z = random_field3(2, 3);
        assert!(z.clone().mark_real_valued().is_err());
        let h = hermitian(&z).mark_real_valued().unwrap();
        assert!(h.is_real_valued());
        assert!(h.hermitian_defect() <= 1e-15);
    }

    #[test]
    fn resize_pads_and_truncates() {
        let z = random_field3(2, 5);
        let big = z.resized(4);
        assert_eq!(big.at([2, -2, 1]), z.at([2, -2, 1]));
        assert_eq!(big.at([3, 0, 0]), c(0.0, 0.0));
        assert_eq!(big.resized(2), z);
    }
}
