use super::{slice_theta, Complex, SpectralField2, SpectralField3};
use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Residue (relative to the largest sample) below which imaginary parts are dropped.
pub const REAL_RESIDUE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n: 64 }
    }
}

impl GridSpec {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::param(format!(
                "grid size must be a power of two >= 2, got {n}"
            )));
        }
        Ok(GridSpec { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn check_order(&self, order: usize) -> Result<()> {
        let required = 2 * (2 * order + 1);
        if self.n < required {
            return Err(Error::Aliasing {
                n: self.n,
                order,
                required,
            });
        }
        Ok(())
    }
}

/// Real samples at `x_q = (q1/N, q2/N)`, stored row-major by `q1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    n: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::ShapeMismatch {
                left: n * n,
                right: values.len(),
            });
        }
        Ok(GridField { n, values })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let h = 1.0 / n as f64;
        let values = (0..n * n)
            .map(|i| f((i / n) as f64 * h, (i % n) as f64 * h))
            .collect();
        GridField { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, q1: usize, q2: usize) -> f64 {
        self.values[q1 * self.n + q2]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexGrid {
    pub n: usize,
    pub values: Vec<Complex>,
}

impl ComplexGrid {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Drops the imaginary part once it is below `REAL_RESIDUE_TOL` relative.
    pub fn into_real(self) -> Result<GridField> {
        let residue = self.max_imag();
        let tolerance = REAL_RESIDUE_TOL * self.max_abs();
        if residue > tolerance {
            return Err(Error::NotReal { residue, tolerance });
        }
        Ok(GridField {
            n: self.n,
            values: self.values.into_iter().map(|v| v.re).collect(),
        })
    }
}

/// `table[j] = exp(2i*pi*j/n)`; phases are reduced to an exact integer
/// index before lookup.
pub(crate) fn unit_roots(n: usize, sign: f64) -> Vec<Complex> {
    (0..n)
        .map(|j| Complex::from_polar(1.0, sign * 2.0 * PI * j as f64 / n as f64))
        .collect()
}

/// Sums the 2D series at every grid point (separable: first over `m`, then `n`).
pub fn eval_on_grid_complex(field: &SpectralField2, grid: &GridSpec) -> Result<ComplexGrid> {
    field.check_finite()?;
    grid.check_order(field.order())?;
    let n = grid.n();
    let p = field.order() as i64;
    let side = field.side();
    let roots = unit_roots(n, 1.0);
    let root = |k: i64, q: usize| roots[(k * q as i64).rem_euclid(n as i64) as usize];

    // partial[q1][n] = sum_m c(m, n) e^{2i pi m q1 / N}
    let mut partial = vec![Complex::new(0.0, 0.0); n * side];
    let coeffs = field.coeffs();
    for q1 in 0..n {
        let row = &mut partial[q1 * side..(q1 + 1) * side];
        for (im, m) in (-p..=p).enumerate() {
            let w = root(m, q1);
            for (r, &c) in row.iter_mut().zip(&coeffs[im * side..(im + 1) * side]) {
                *r += w * c;
            }
        }
    }
    let mut values = vec![Complex::new(0.0, 0.0); n * n];
    for q1 in 0..n {
        let row = &partial[q1 * side..(q1 + 1) * side];
        for q2 in 0..n {
            values[q1 * n + q2] = row
                .iter()
                .zip(-p..=p)
                .map(|(&c, k)| c * root(k, q2))
                .sum();
        }
    }
    Ok(ComplexGrid { n, values })
}

pub fn eval_on_grid(field: &SpectralField2, grid: &GridSpec) -> Result<GridField> {
    eval_on_grid_complex(field, grid)?.into_real()
}

/// Profile evaluated at the fast phase `theta`.
pub fn eval_profile_on_grid(
    field: &SpectralField3,
    theta: f64,
    grid: &GridSpec,
) -> Result<GridField> {
    field.check_finite()?;
    eval_on_grid(&slice_theta(field, theta), grid)
}
