//! Coefficient extraction by the uniform-grid DFT (trapezoidal rule).

use super::grid::unit_roots;
use super::{Complex, SpectralField, SpectralField2, SpectralField3};
use crate::error::{Error, Result};

fn check_quadrature(order: usize, nq: usize) -> Result<()> {
    if nq < 4 * order + 2 {
        return Err(Error::param(format!(
            "quadrature with {nq} points per axis is too coarse for order {order} (need {})",
            4 * order + 2
        )));
    }
    Ok(())
}

/// Transforms real samples on the uniform grid `[nq; D]` (row-major, last
/// axis fastest) into coefficients of order `order`.
pub fn dft_real_samples<const D: usize>(
    samples: &[f64],
    nq: usize,
    order: usize,
    t: f64,
) -> Result<SpectralField<D>> {
    check_quadrature(order, nq)?;
    let expected = nq.pow(D as u32);
    if samples.len() != expected {
        return Err(Error::ShapeMismatch {
            left: expected,
            right: samples.len(),
        });
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        let mut point = vec![0.0; D];
        let mut rest = i;
        for d in (0..D).rev() {
            point[d] = (rest % nq) as f64 / nq as f64;
            rest /= nq;
        }
        return Err(Error::InvalidSample { point });
    }

    let side = 2 * order + 1;
    let p = order as i64;
    let roots = unit_roots(nq, -1.0);
    let scale = 1.0 / nq as f64;
    let mut shape = vec![nq; D];
    let mut data: Vec<Complex> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
    for d in 0..D {
        let outer: usize = shape[..d].iter().product();
        let inner: usize = shape[d + 1..].iter().product();
        let mut next = vec![Complex::new(0.0, 0.0); outer * side * inner];
        for o in 0..outer {
            for (ik, k) in (-p..=p).enumerate() {
                let dst = &mut next[(o * side + ik) * inner..(o * side + ik + 1) * inner];
                for q in 0..nq {
                    let w = roots[(k * q as i64).rem_euclid(nq as i64) as usize] * scale;
                    let src = &data[(o * nq + q) * inner..(o * nq + q + 1) * inner];
                    for (a, &b) in dst.iter_mut().zip(src) {
                        *a += w * b;
                    }
                }
            }
        }
        data = next;
        shape[d] = side;
    }
    SpectralField::<D>::from_coeffs(order, t, data)?.mark_real_valued()
}

fn sample_grid<const D: usize, V>(
    nq: usize,
    mut eval: impl FnMut([f64; D]) -> V,
) -> Vec<V> {
    let total = nq.pow(D as u32);
    let h = 1.0 / nq as f64;
    (0..total)
        .map(|i| {
            let mut pt = [0.0; D];
            let mut rest = i;
            for d in (0..D).rev() {
                pt[d] = (rest % nq) as f64 * h;
                rest /= nq;
            }
            eval(pt)
        })
        .collect()
}

/// Coefficients of a real sampler of `(theta, x1, x2)`.
pub fn dft_coefficients3(
    sampler: impl Fn(f64, f64, f64) -> f64,
    order: usize,
    nq: usize,
    t: f64,
) -> Result<SpectralField3> {
    check_quadrature(order, nq)?;
    let samples = sample_grid::<3, _>(nq, |p| sampler(p[0], p[1], p[2]));
    dft_real_samples(&samples, nq, order, t)
}

/// Per-component coefficients of a vector sampler of `(theta, x1, x2)`.
pub fn dft_coefficients3_vec(
    sampler: impl Fn(f64, f64, f64) -> [f64; 2],
    order: usize,
    nq: usize,
    t: f64,
) -> Result<[SpectralField3; 2]> {
    check_quadrature(order, nq)?;
    let samples = sample_grid::<3, _>(nq, |p| sampler(p[0], p[1], p[2]));
    let first: Vec<f64> = samples.iter().map(|v| v[0]).collect();
    let second: Vec<f64> = samples.iter().map(|v| v[1]).collect();
    Ok([
        dft_real_samples(&first, nq, order, t)?,
        dft_real_samples(&second, nq, order, t)?,
    ])
}

pub fn dft_coefficients2(
    sampler: impl Fn(f64, f64) -> f64,
    order: usize,
    nq: usize,
    t: f64,
) -> Result<SpectralField2> {
    check_quadrature(order, nq)?;
    let samples = sample_grid::<2, _>(nq, |p| sampler(p[0], p[1]));
    dft_real_samples(&samples, nq, order, t)
}

pub fn dft_coefficients2_vec(
    sampler: impl Fn(f64, f64) -> [f64; 2],
    order: usize,
    nq: usize,
    t: f64,
) -> Result<[SpectralField2; 2]> {
    check_quadrature(order, nq)?;
    let samples = sample_grid::<2, _>(nq, |p| sampler(p[0], p[1]));
    let first: Vec<f64> = samples.iter().map(|v| v[0]).collect();
    let second: Vec<f64> = samples.iter().map(|v| v[1]).collect();
    Ok([
        dft_real_samples(&first, nq, order, t)?,
        dft_real_samples(&second, nq, order, t)?,
    ])
}

/// Reusable plan for the 2D real transform on the hot path of the
/// reference integrator. Output is exactly Hermitian.
#[derive(Clone, Debug)]
pub struct RealDft2 {
    n: usize,
    order: usize,
    // cos/sin of 2*pi*k*q/n for k in 0..=order, q in 0..n
    cos: Vec<f64>,
    sin: Vec<f64>,
    roots: Vec<Complex>,
    rows: Vec<Complex>,
}

impl RealDft2 {
    pub fn new(n: usize, order: usize) -> Result<Self> {
        check_quadrature(order, n)?;
        let roots = unit_roots(n, -1.0);
        let mut cos = Vec::with_capacity((order + 1) * n);
        let mut sin = Vec::with_capacity((order + 1) * n);
        for k in 0..=order {
            for q in 0..n {
                let w = roots[(k * q) % n];
                cos.push(w.re);
                sin.push(w.im);
            }
        }
        Ok(RealDft2 {
            n,
            order,
            cos,
            sin,
            roots,
            rows: vec![Complex::new(0.0, 0.0); n * (order + 1)],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Writes the coefficients of `samples` (row-major `n x n`) into `out`.
    pub fn forward(&mut self, samples: &[f64], out: &mut SpectralField2) {
        let n = self.n;
        let p = self.order;
        debug_assert_eq!(samples.len(), n * n);
        debug_assert_eq!(out.order(), p);

        for q1 in 0..n {
            let row = &samples[q1 * n..(q1 + 1) * n];
            for k in 0..=p {
                let cs = &self.cos[k * n..(k + 1) * n];
                let sn = &self.sin[k * n..(k + 1) * n];
                let (re, im) = dot2(row, cs, sn);
                self.rows[q1 * (p + 1) + k] = Complex::new(re, im);
            }
        }

        let scale = 1.0 / (n * n) as f64;
        let side = 2 * p + 1;
        let pi = p as i64;
        let coeffs = out.coeffs_mut();
        for k2 in 0..=p {
            let k1_start = if k2 == 0 { 0 } else { -pi };
            for k1 in k1_start..=pi {
                let mut acc = Complex::new(0.0, 0.0);
                for q1 in 0..n {
                    let w = self.roots[(k1 * q1 as i64).rem_euclid(n as i64) as usize];
                    acc += w * self.rows[q1 * (p + 1) + k2];
                }
                acc *= scale;
                let i_pos = (k1 + pi) as usize * side + (k2 + p);
                let i_neg = (pi - k1) as usize * side + (p - k2);
                coeffs[i_pos] = acc;
                coeffs[i_neg] = acc.conj();
            }
        }
    }
}

impl RealDft2 {
    /// Same as `forward` for samples that do not depend on `x2`;
    /// `column[q1]` is the value on row `q1`.
    pub fn forward_x1_profile(&mut self, column: &[f64], out: &mut SpectralField2) {
        let n = self.n;
        let p = self.order;
        debug_assert_eq!(column.len(), n);
        debug_assert_eq!(out.order(), p);
        let scale = 1.0 / n as f64;
        let side = 2 * p + 1;
        let coeffs = out.coeffs_mut();
        coeffs.fill(Complex::new(0.0, 0.0));
        for k1 in 0..=p {
            let (re, im) = dot2(column, &self.cos[k1 * n..(k1 + 1) * n], &self.sin[k1 * n..(k1 + 1) * n]);
            let acc = Complex::new(re, im) * scale;
            coeffs[(p + k1) * side + p] = acc;
            coeffs[(p - k1) * side + p] = acc.conj();
        }
    }
}

/// `(sum x*c, sum x*s)` with independent lanes so the loop vectorizes.
#[inline]
fn dot2(x: &[f64], c: &[f64], s: &[f64]) -> (f64, f64) {
    let mut ar = [0.0f64; 4];
    let mut ai = [0.0f64; 4];
    let chunks = x.len() / 4;
    for j in 0..chunks {
        for l in 0..4 {
            let i = 4 * j + l;
            ar[l] += x[i] * c[i];
            ai[l] += x[i] * s[i];
        }
    }
    let mut re = (ar[0] + ar[1]) + (ar[2] + ar[3]);
    let mut im = (ai[0] + ai[1]) + (ai[2] + ai[3]);
    for i in 4 * chunks..x.len() {
        re += x[i] * c[i];
        im += x[i] * s[i];
    }
    (re, im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{eval_on_grid, slice_theta, GridSpec};
    use std::f64::consts::PI;

    #[test]
    fn single_theta_harmonic() {
        let f = dft_coefficients3(|th, _, _| (2.0 * PI * th).cos(), 2, 16, 0.0).unwrap();
        for (k, c) in f.modes() {
            let expected = if k == [1, 0, 0] || k == [-1, 0, 0] { 0.5 } else { 0.0 };
            assert!((c - Complex::new(expected, 0.0)).norm() <= 1e-14, "{k:?} {c}");
        }
    }

    #[test]
    fn constant_sampler() {
        let f = dft_coefficients3(|_, _, _| 3.0, 2, 16, 0.0).unwrap();
        assert!((f.at([0, 0, 0]) - Complex::new(3.0, 0.0)).norm() <= 1e-14);
        let rest = f
            .modes()
            .filter(|(k, _)| *k != [0, 0, 0])
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max);
        assert!(rest <= 1e-14);
    }

    #[test]
    fn pure_mode_roundtrip() {
        let [re, im] = dft_coefficients3_vec(
            |_, x1, x2| {
                let ph = 2.0 * PI * (2.0 * x1 + x2);
                [ph.cos(), ph.sin()]
            },
            3,
            16,
            0.0,
        )
        .unwrap();
        let z = re.combine(Complex::new(1.0, 0.0), &im, Complex::new(0.0, 1.0)).unwrap();
        for (k, c) in z.modes() {
            let expected = if k == [0, 2, 1] { 1.0 } else { 0.0 };
            assert!((c - Complex::new(expected, 0.0)).norm() <= 1e-14);
        }
    }

    #[test]
    fn non_finite_sample_reports_point() {
        let err = dft_coefficients2(|x1, _| if x1 > 0.5 { f64::NAN } else { 0.0 }, 1, 8, 0.0)
            .unwrap_err();
        match err {
            Error::InvalidSample { point } => assert!(point[0] > 0.5),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn coarse_quadrature_rejected() {
        assert!(dft_coefficients2(|_, _| 0.0, 4, 16, 0.0).is_err());
    }

    #[test]
    fn fast_plan_matches_generic() {
        let f = |x1: f64, x2: f64| {
            ((2.0 * PI * x1).sin() + 0.3).powi(3) * (1.0 + (2.0 * PI * (x1 - 2.0 * x2)).cos())
        };
        let generic = dft_coefficients2(f, 4, 32, 0.0).unwrap();
        let samples: Vec<f64> = (0..32 * 32)
            .map(|i| f((i / 32) as f64 / 32.0, (i % 32) as f64 / 32.0))
            .collect();
        let mut plan = RealDft2::new(32, 4).unwrap();
        let mut out = SpectralField2::zeros(4, 0.0);
        plan.forward(&samples, &mut out);
        for (a, b) in out.coeffs().iter().zip(generic.coeffs()) {
            assert!((a - b).norm() <= 1e-15, "{a} vs {b}");
        }
        assert_eq!(out.hermitian_defect(), 0.0);
    }

    #[test]
    fn grid_roundtrip() {
        let z3 = crate::spectral::tests::random_field3(3, 4);
        let n = z3.len();
        let coeffs: Vec<_> = (0..n)
            .map(|i| 0.5 * (z3.coeffs()[i] + z3.coeffs()[n - 1 - i].conj()))
            .collect();
        let z3 = SpectralField3::from_coeffs(3, 0.0, coeffs).unwrap();
        let z = slice_theta(&z3, 0.4);
        let g = eval_on_grid(&z, &GridSpec::new(16).unwrap()).unwrap();
        let back = dft_real_samples::<2>(g.values(), 16, 3, 0.0).unwrap();
        let scale = z.max_abs();
        for (a, b) in back.coeffs().iter().zip(z.coeffs()) {
            assert!((a - b).norm() <= 1e-12 * scale);
        }
    }
}
