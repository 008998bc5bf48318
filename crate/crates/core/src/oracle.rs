//! Brute-force finite-difference solvers used to cross-check the spectral
//! ones: a Crank–Nicolson march in theta to the periodic regime for the
//! limit equation, and an explicit method of lines for the oscillating
//! problem. Both use second-order flux-form differences on an `N x N`
//! periodic grid.

use crate::coefficients::{fast_phase, CoefficientSet, GridSamples};
use crate::error::{Error, Result};
use crate::spectral::snapshot::format_float;
use crate::spectral::GridField;
use std::fmt::Write as _;
use std::path::Path;

pub const MAX_PERIODS: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct FdGrid {
    pub n: usize,
    /// Step in theta (limit march) or in t (reference).
    pub step: f64,
    pub values: GridField,
    /// Whole periods marched, or time steps taken.
    pub iterations: usize,
}

impl FdGrid {
    pub fn to_csv(&self) -> String {
        let n = self.n;
        let mut out = format!("# N={n}\n");
        for i in 0..n {
            for j in 0..n {
                let _ = writeln!(out, "{i} {j} {}", format_float(self.values.get(i, j)));
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Face diffusivities and face fluxes on the staggered grid.
struct Staggered {
    n: usize,
    /// `A` on faces `(i+1/2, j)` and `(i, j+1/2)`.
    ax: Vec<f64>,
    ay: Vec<f64>,
    /// `C1` on `(i+1/2, j)`, `C2` on `(i, j+1/2)`.
    cx: Vec<f64>,
    cy: Vec<f64>,
    buf: GridSamples,
}

impl Staggered {
    fn new(n: usize) -> Self {
        Staggered {
            n,
            ax: vec![0.0; n * n],
            ay: vec![0.0; n * n],
            cx: vec![0.0; n * n],
            cy: vec![0.0; n * n],
            buf: GridSamples::default(),
        }
    }

    /// Samples on the doubled grid so nodes and faces are both grid points.
    fn refresh(&mut self, set: &CoefficientSet, t: f64, theta: f64, weight: f64) -> Result<()> {
        let n = self.n;
        let m = 2 * n;
        let column = set.is_x2_invariant();
        if column {
            set.sample_x1_profile(t, theta, weight, m, &mut self.buf)?;
        } else {
            set.sample_grid(t, theta, weight, m, &mut self.buf)?;
        }
        let cols = if column { 1 } else { m };
        let at = |v: &[f64], r: usize, c: usize| v[(r % m) * cols + if column { 0 } else { c % m }];
        let b = &self.buf;
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                let node = at(&b.a, 2 * i, 2 * j);
                self.ax[k] = 0.5 * (node + at(&b.a, 2 * i + 2, 2 * j));
                self.ay[k] = 0.5 * (node + at(&b.a, 2 * i, 2 * j + 2));
                self.cx[k] = at(&b.c1, 2 * i + 1, 2 * j);
                self.cy[k] = at(&b.c2, 2 * i, 2 * j + 1);
            }
        }
        for v in [&self.ax, &self.ay, &self.cx, &self.cy] {
            if let Some(k) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::InvalidSample {
                    point: vec![t, theta, (k / n) as f64 / n as f64, (k % n) as f64 / n as f64],
                });
            }
        }
        Ok(())
    }

    fn max_a(&self) -> f64 {
        self.ax.iter().chain(&self.ay).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `out = div(A grad z)`
    fn diffusion(&self, z: &[f64], out: &mut [f64]) {
        let n = self.n;
        let inv_h2 = (n * n) as f64;
        for i in 0..n {
            let ip = (i + 1) % n;
            let im = (i + n - 1) % n;
            for j in 0..n {
                let jp = (j + 1) % n;
                let jm = (j + n - 1) % n;
                let k = i * n + j;
                let zc = z[k];
                let flux = self.ax[k] * (z[ip * n + j] - zc) - self.ax[im * n + j] * (zc - z[im * n + j])
                    + self.ay[k] * (z[i * n + jp] - zc)
                    - self.ay[i * n + jm] * (zc - z[i * n + jm]);
                out[k] = flux * inv_h2;
            }
        }
    }

    /// `out = div C`
    fn source(&self, out: &mut [f64]) {
        let n = self.n;
        let inv_h = n as f64;
        for i in 0..n {
            let im = (i + n - 1) % n;
            for j in 0..n {
                let jm = (j + n - 1) % n;
                let k = i * n + j;
                out[k] = (self.cx[k] - self.cx[im * n + j] + self.cy[k] - self.cy[i * n + jm]) * inv_h;
            }
        }
    }

    /// Diagonal of `-div(A grad .)`.
    fn diffusion_diag(&self, out: &mut [f64]) {
        let n = self.n;
        let inv_h2 = (n * n) as f64;
        for i in 0..n {
            let im = (i + n - 1) % n;
            for j in 0..n {
                let jm = (j + n - 1) % n;
                let k = i * n + j;
                out[k] = (self.ax[k] + self.ax[im * n + j] + self.ay[k] + self.ay[i * n + jm]) * inv_h2;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `(I - s*L) x = b` by Jacobi-preconditioned conjugate gradients.
fn cg_solve(op: &Staggered, s: f64, b: &[f64], x: &mut [f64], tol: f64) -> Result<usize> {
    let len = b.len();
    let mut diag = vec![0.0; len];
    op.diffusion_diag(&mut diag);
    for d in diag.iter_mut() {
        *d = 1.0 + s * *d;
    }
    let mut lx = vec![0.0; len];
    let apply = |v: &[f64], out: &mut [f64], lx: &mut [f64]| {
        op.diffusion(v, lx);
        for ((o, &vi), &l) in out.iter_mut().zip(v).zip(lx.iter()) {
            *o = vi - s * l;
        }
    };
    let mut r = vec![0.0; len];
    apply(x, &mut r, &mut lx);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let b_norm = dot(b, b).sqrt().max(f64::MIN_POSITIVE);
    let mut zv: Vec<f64> = r.iter().zip(&diag).map(|(ri, d)| ri / d).collect();
    let mut p = zv.clone();
    let mut rz = dot(&r, &zv);
    let mut ap = vec![0.0; len];
    for it in 0..10 * len {
        if dot(&r, &r).sqrt() <= tol * b_norm {
            return Ok(it);
        }
        apply(&p, &mut ap, &mut lx);
        let alpha = rz / dot(&p, &ap);
        for k in 0..len {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        for k in 0..len {
            zv[k] = r[k] / diag[k];
        }
        let rz_new = dot(&r, &zv);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..len {
            p[k] = zv[k] + beta * p[k];
        }
    }
    Err(Error::NonConvergence {
        periods: 0,
        defect: dot(&r, &r).sqrt() / b_norm,
    })
}

fn check_grid(n: usize) -> Result<()> {
    if n < 32 {
        return Err(Error::param(format!("oracle grids need N >= 32, got {n}")));
    }
    Ok(())
}

/// Marches `dZ/dtheta = div(A~ grad Z) + div C~` with Crank–Nicolson over
/// whole periods from zero until the period map is stationary, and returns
/// `Z(theta = 0)` with mean `gauge`.
pub fn cn_limit_march(
    set: &CoefficientSet,
    t: f64,
    n: usize,
    dtheta: f64,
    tol_period: f64,
    gauge: f64,
) -> Result<FdGrid> {
    check_grid(n)?;
    if !(dtheta > 0.0 && dtheta <= 1.0 / 256.0) {
        return Err(Error::param(format!("theta step must lie in (0, 1/256], got {dtheta}")));
    }
    if !(tol_period > 0.0) {
        return Err(Error::param("period tolerance must be positive"));
    }
    let steps = (1.0 / dtheta).round() as usize;
    let dth = 1.0 / steps as f64;
    let len = n * n;
    // Coefficients for one full period, reused by every sweep.
    let mut per_step: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::with_capacity(steps);
    let mut stag = Staggered::new(n);
    for s in 0..steps {
        stag.refresh(set, t, s as f64 * dth, 0.0)?;
        per_step.push((stag.ax.clone(), stag.ay.clone(), stag.cx.clone(), stag.cy.clone()));
    }
    let load = |stag: &mut Staggered, s: usize| {
        let c = &per_step[s % steps];
        stag.ax.copy_from_slice(&c.0);
        stag.ay.copy_from_slice(&c.1);
        stag.cx.copy_from_slice(&c.2);
        stag.cy.copy_from_slice(&c.3);
    };

    let mut z = vec![gauge; len];
    let mut lz = vec![0.0; len];
    let mut src_old = vec![0.0; len];
    let mut src_new = vec![0.0; len];
    let mut rhs = vec![0.0; len];
    let half = 0.5 * dth;
    let mut defect = f64::INFINITY;
    for period in 1..=MAX_PERIODS {
        let start = z.clone();
        load(&mut stag, 0);
        stag.diffusion(&z, &mut lz);
        stag.source(&mut src_old);
        for s in 0..steps {
            for k in 0..len {
                rhs[k] = z[k] + half * (lz[k] + src_old[k]);
            }
            load(&mut stag, s + 1);
            stag.source(&mut src_new);
            for k in 0..len {
                rhs[k] += half * src_new[k];
            }
            cg_solve(&stag, half, &rhs, &mut z, 1e-14)?;
            stag.diffusion(&z, &mut lz);
            std::mem::swap(&mut src_old, &mut src_new);
        }
        let mean = z.iter().sum::<f64>() / len as f64;
        for v in z.iter_mut() {
            *v += gauge - mean;
        }
        defect = (z
            .iter()
            .zip(&start)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / len as f64)
            .sqrt();
        if defect <= tol_period {
            return Ok(FdGrid {
                n,
                step: dth,
                values: GridField::new(n, z)?,
                iterations: period,
            });
        }
    }
    Err(Error::NonConvergence {
        periods: MAX_PERIODS,
        defect,
    })
}

/// Smallest `epsilon` the explicit reference oracle accepts.
pub const FD_MIN_EPSILON: f64 = 0.05;

/// Explicit Heun method of lines for
/// `dz/dt = (1/eps) (div(A^eps grad z) + div C^eps)` from `z0` at `t = 0`.
/// Without `dt` the step is half the stability bound.
pub fn fd_reference_solve(
    set: &CoefficientSet,
    epsilon: f64,
    z0: &GridField,
    t_end: f64,
    dt: Option<f64>,
) -> Result<FdGrid> {
    let n = z0.n();
    check_grid(n)?;
    fast_phase(epsilon, 0.0)?;
    if epsilon < FD_MIN_EPSILON {
        return Err(Error::param(format!(
            "finite-difference oracle needs epsilon >= {FD_MIN_EPSILON}, got {epsilon}"
        )));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::param(format!("final time must be positive, got {t_end}")));
    }
    let h = 1.0 / n as f64;
    let max_a = crate::reference_solver::estimate_max_a(set, epsilon, 0.0, t_end, 2 * n)?;
    let bound = h * h * epsilon / (4.0 * max_a.max(f64::MIN_POSITIVE));
    let dt_req = match dt {
        Some(d) if d > bound => {
            return Err(Error::param(format!(
                "time step {d:e} violates the stability bound {bound:e}"
            )))
        }
        Some(d) if d > 0.0 => d,
        Some(d) => return Err(Error::param(format!("time step must be positive, got {d}"))),
        None => 0.5 * bound,
    };
    let steps = (t_end / dt_req).ceil() as usize;
    let dt = t_end / steps as f64;
    let len = n * n;
    let mut stag = Staggered::new(n);
    let mut z = z0.values().to_vec();
    let mut k1 = vec![0.0; len];
    let mut k2 = vec![0.0; len];
    let mut src = vec![0.0; len];
    let mut stage = vec![0.0; len];
    let inv = 1.0 / epsilon;
    let mut eval = |stag: &mut Staggered, t: f64, z: &[f64], out: &mut [f64]| -> Result<()> {
        stag.refresh(set, t, fast_phase(epsilon, t)?, epsilon)?;
        if stag.max_a() > max_a * (1.0 + 1e-9) {
            log::warn!("diffusion above the sampled bound at t={t}");
        }
        stag.diffusion(z, out);
        stag.source(&mut src);
        for (o, s) in out.iter_mut().zip(&src) {
            *o = (*o + s) * inv;
        }
        Ok(())
    };
    for s in 0..steps {
        let t = s as f64 * dt;
        eval(&mut stag, t, &z, &mut k1)?;
        for k in 0..len {
            stage[k] = z[k] + dt * k1[k];
        }
        eval(&mut stag, t + dt, &stage, &mut k2)?;
        for k in 0..len {
            z[k] += 0.5 * dt * (k1[k] + k2[k]);
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { t: t + dt });
        }
    }
    Ok(FdGrid {
        n,
        step: dt,
        values: GridField::new(n, z)?,
        iterations: steps,
    })
}
