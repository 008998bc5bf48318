//! Truncated Fourier system for the two-scale profile `Z(t, theta, x)` at a
//! fixed parameter time, and its dense solve.

use crate::coefficients::{CoefficientSet, LimitCoefficients};
use crate::error::{Error, Result};
use crate::spectral::{Complex, Mode3, SpectralField3};
use lax::{layout::MatrixLayout, Lapack, NormType, Transpose};
use std::f64::consts::PI;

/// Condition estimates above this are reported as a warning.
pub const ILL_CONDITIONED: f64 = 1e12;

/// Relative Hermitian defect below which solver output is flagged real.
pub const REALITY_TOL: f64 = 1e-9;

/// Default quadrature for the coefficient spectra at order `P`.
pub fn default_quadrature(order: usize) -> usize {
    8 * order.max(8)
}

/// Dense system over the modes of the `(2P+1)^3` cube, stored column-major.
#[derive(Clone, Debug)]
pub struct LimitSystem {
    order: usize,
    t: f64,
    matrix: Vec<Complex>,
    rhs: Vec<Complex>,
    gauged: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GaugeSpec {
    pub mean_value: Complex,
}

impl GaugeSpec {
    pub fn real(mean: f64) -> Self {
        GaugeSpec {
            mean_value: Complex::new(mean, 0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveDiagnostics {
    /// `|Ax - b|_inf / (|A|_inf |x|_inf + |b|_inf)`
    pub residual: f64,
    /// 1-norm condition estimate.
    pub cond: f64,
    pub warning: Option<String>,
}

impl SolveDiagnostics {
    pub fn comment(&self) -> String {
        format!("residual={:e} cond={:e}", self.residual, self.cond)
    }
}

#[derive(Clone, Debug)]
pub struct LimitSolution {
    pub profile: SpectralField3,
    pub diagnostics: SolveDiagnostics,
}

impl LimitSystem {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn rhs(&self) -> &[Complex] {
        &self.rhs
    }

    pub fn is_gauged(&self) -> bool {
        self.gauged
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex {
        self.matrix[col * self.dim() + row]
    }

    pub fn index_of(&self, mode: Mode3) -> Option<usize> {
        SpectralField3::zeros(self.order, self.t).index_of(mode.into())
    }

    pub fn mode_of(&self, index: usize) -> Mode3 {
        SpectralField3::zeros(self.order, self.t)
            .mode_of(index)
            .into()
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn row_max_abs(&self, row: usize) -> f64 {
        (0..self.dim())
            .map(|c| self.entry(row, c).norm())
            .fold(0.0, f64::max)
    }

    pub fn col_max_abs(&self, col: usize) -> f64 {
        let n = self.dim();
        self.matrix[col * n..(col + 1) * n]
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    fn mean_index(&self) -> usize {
        self.dim() / 2
    }

    /// `y = A x`
    pub fn apply(&self, x: &[Complex]) -> Vec<Complex> {
        let n = self.dim();
        let mut y = vec![Complex::new(0.0, 0.0); n];
        for (col, &xj) in self.matrix.chunks_exact(n).zip(x) {
            if xj == Complex::new(0.0, 0.0) {
                continue;
            }
            for (yi, &a) in y.iter_mut().zip(col) {
                *yi += a * xj;
            }
        }
        y
    }
}

/// Builds the system from precomputed coefficient spectra of order `P`.
pub fn assemble_from(coeffs: &LimitCoefficients, t: f64) -> Result<LimitSystem> {
    let order = coeffs.a.order();
    for f in [&coeffs.a_grad[0], &coeffs.a_grad[1], &coeffs.div_c] {
        if f.order() != order {
            return Err(Error::OrderMismatch {
                left: order,
                right: f.order(),
            });
        }
    }
    let p = order as i32;
    let s = 2 * order + 1;
    let n = s * s * s;
    let a = coeffs.a.coeffs();
    let [g1, g2] = [coeffs.a_grad[0].coeffs(), coeffs.a_grad[1].coeffs()];
    let two_i_pi = Complex::new(0.0, 2.0 * PI);
    let mut matrix = vec![Complex::new(0.0, 0.0); n * n];
    let idx = |l: i32, m: i32, k: i32| -> usize {
        (((l + p) as usize * s) + (m + p) as usize) * s + (k + p) as usize
    };
    let mode = |i: usize| -> [i32; 3] {
        [
            (i / (s * s)) as i32 - p,
            ((i / s) % s) as i32 - p,
            (i % s) as i32 - p,
        ]
    };
    for j in 0..n {
        let [lc, mc, nc] = mode(j);
        let (mf, nf) = (f64::from(mc), f64::from(nc));
        let w = 4.0 * PI * PI * (mf * mf + nf * nf);
        let col = &mut matrix[j * n..(j + 1) * n];
        for l in (lc - p).max(-p)..=(lc + p).min(p) {
            for m in (mc - p).max(-p)..=(mc + p).min(p) {
                let base = idx(l, m, 0);
                let dbase = idx(l - lc, m - mc, 0);
                for k in (nc - p).max(-p)..=(nc + p).min(p) {
                    let d = (dbase as i64 + i64::from(k - nc)) as usize;
                    let grad = g1[d] * mf + g2[d] * nf;
                    col[(base as i64 + i64::from(k)) as usize] += a[d] * w - two_i_pi * grad;
                }
            }
        }
        col[j] += two_i_pi * f64::from(lc);
    }
    Ok(LimitSystem {
        order,
        t,
        matrix,
        rhs: coeffs.div_c.coeffs().to_vec(),
        gauged: false,
    })
}

pub fn assemble(set: &CoefficientSet, t: f64, order: usize, nq: usize) -> Result<LimitSystem> {
    let coeffs = set.limit_coefficients(t, order, nq)?;
    assemble_from(&coeffs, t)
}

/// Replaces the mean-mode equation by `Z_000 = gauge.mean_value`.
pub fn apply_gauge(mut sys: LimitSystem, gauge: GaugeSpec) -> LimitSystem {
    let n = sys.dim();
    let r = sys.mean_index();
    for col in 0..n {
        sys.matrix[col * n + r] = Complex::new(0.0, 0.0);
    }
    sys.matrix[r * n + r] = Complex::new(1.0, 0.0);
    sys.rhs[r] = gauge.mean_value;
    sys.gauged = true;
    sys
}

fn backend(e: lax::error::Error) -> Error {
    Error::Backend(e.to_string())
}

/// Dense LU with partial pivoting, residual check and 1-norm condition estimate.
pub fn solve(sys: &LimitSystem) -> Result<LimitSolution> {
    if !sys.gauged {
        return Err(Error::param("limit system must be gauged before solving"));
    }
    let n = sys.dim();
    let layout = MatrixLayout::F {
        col: n as i32,
        lda: n as i32,
    };
    let anorm = Complex::opnorm(NormType::One, layout, &sys.matrix);
    let mut lu = sys.matrix.clone();
    let pivot = match Complex::lu(layout, &mut lu) {
        Ok(p) => p,
        Err(lax::error::Error::LapackComputationalFailure { return_code }) => {
            let pivot = (return_code - 1) as usize;
            return Err(Error::Singular {
                pivot,
                mode: sys.mode_of(pivot),
            });
        }
        Err(e) => return Err(backend(e)),
    };
    let tiny = n as f64 * f64::EPSILON * anorm;
    if let Some(pivot) = (0..n).find(|&i| lu[i * n + i].norm() <= tiny) {
        return Err(Error::Singular {
            pivot,
            mode: sys.mode_of(pivot),
        });
    }
    let rcond = Complex::rcond(layout, &lu, anorm).map_err(backend)?;
    let cond = if rcond > 0.0 { 1.0 / rcond } else { f64::INFINITY };
    let mut x = sys.rhs.clone();
    Complex::solve(layout, Transpose::No, &lu, &pivot, &mut x).map_err(backend)?;
    drop(lu);

    let ax = sys.apply(&x);
    let inf = |v: &[Complex]| v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let num = inf(&ax
        .iter()
        .zip(&sys.rhs)
        .map(|(a, b)| a - b)
        .collect::<Vec<_>>());
    let a_inf = Complex::opnorm(NormType::Infinity, layout, &sys.matrix);
    let den = a_inf * inf(&x) + inf(&sys.rhs);
    let residual = if den > 0.0 { num / den } else { num };

    let warning = (cond > ILL_CONDITIONED).then(|| {
        let msg = format!("ill-conditioned limit system (cond ~ {cond:e}) at t={}", sys.t);
        log::warn!("{msg}");
        msg
    });
    let mut profile = SpectralField3::from_coeffs(sys.order, sys.t, x)?;
    if profile.hermitian_defect() <= REALITY_TOL * profile.max_abs() {
        profile = profile.mark_real_valued_within(REALITY_TOL)?;
    }
    Ok(LimitSolution {
        profile,
        diagnostics: SolveDiagnostics {
            residual,
            cond,
            warning,
        },
    })
}

/// Coefficient spectra, assembly, gauge and solve in one call.
pub fn solve_profile(
    set: &CoefficientSet,
    t: f64,
    order: usize,
    nq: usize,
    gauge: GaugeSpec,
) -> Result<LimitSolution> {
    solve(&apply_gauge(assemble(set, t, order, nq)?, gauge))
}
