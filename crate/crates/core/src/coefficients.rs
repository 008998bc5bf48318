//! Water velocity, bedload laws and the diffusion/advection coefficients
//! they induce, both pointwise and as truncated Fourier spectra.

use crate::error::{Error, Result};
use crate::spectral::{
    dft_real_samples, gradient_coeffs, Complex, RealDft2, SpectralField2, SpectralField3,
};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex};

/// Below this speed the direction `U/|U|` is replaced by zero.
pub const SPEED_EPS: f64 = 1e-14;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type VelocitySampler = Arc<dyn Fn(f64, f64, [f64; 2]) -> [f64; 2] + Send + Sync>;
pub type HeightSampler = Arc<dyn Fn(f64, f64, [f64; 2]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum TransportLaw {
    /// `g(u) = u^3`
    Cubic,
    Custom { name: String, g: ScalarFn },
}

impl fmt::Debug for TransportLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransportLaw::Cubic => f.write_str("Cubic"),
            TransportLaw::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl TransportLaw {
    pub fn name(&self) -> &str {
        match self {
            TransportLaw::Cubic => "cubic",
            TransportLaw::Custom { name, .. } => name,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            TransportLaw::Cubic => u * u * u,
            TransportLaw::Custom { g, .. } => g(u),
        }
    }

    /// `(g(r), g(r)/r)` from the squared speed; the second entry is zero
    /// below `SPEED_EPS`.
    #[inline]
    fn with_direction(&self, r2: f64) -> (f64, f64) {
        let r = r2.sqrt();
        match self {
            TransportLaw::Cubic => {
                let over_r = if r > SPEED_EPS { r2 } else { 0.0 };
                (r2 * r, over_r)
            }
            TransportLaw::Custom { g, .. } => {
                let gr = g(r);
                (gr, if r > SPEED_EPS { gr / r } else { 0.0 })
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct BedloadLaws {
    a: f64,
    b: f64,
    c: f64,
    g_a: TransportLaw,
    g_c: TransportLaw,
}

impl Default for BedloadLaws {
    fn default() -> Self {
        Self::cubic()
    }
}

impl BedloadLaws {
    pub fn new(a: f64, b: f64, c: f64, g_a: TransportLaw, g_c: TransportLaw) -> Result<Self> {
        if !(a > 0.0 && c > 0.0 && b >= 0.0) || !(a.is_finite() && b.is_finite() && c.is_finite())
        {
            return Err(Error::param(format!(
                "transport constants need a > 0, c > 0, b >= 0 (got a={a}, b={b}, c={c})"
            )));
        }
        Ok(BedloadLaws { a, b, c, g_a, g_c })
    }

    /// `g_a = g_c = u^3`, `a = c = 1`, `b = 0`.
    pub fn cubic() -> Self {
        BedloadLaws {
            a: 1.0,
            b: 0.0,
            c: 1.0,
            g_a: TransportLaw::Cubic,
            g_c: TransportLaw::Cubic,
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn g_a(&self) -> &TransportLaw {
        &self.g_a
    }
    pub fn g_c(&self) -> &TransportLaw {
        &self.g_c
    }
}

/// Breakpoints `theta_i = (i + 1) / 10` of the tidal cycle, `i = 1..=8`.
pub const TIDAL_BREAKPOINTS: [f64; 8] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Clone)]
pub enum VelocityField {
    /// `sin(pi x1) sin(2 pi theta) e1`
    ShearSine,
    /// Piecewise tidal cycle: slack water, flood ramp, flood peak, ebb.
    TidalPiecewise { u_thr: f64 },
    Custom(VelocitySampler),
}

impl fmt::Debug for VelocityField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VelocityField::ShearSine => f.write_str("ShearSine"),
            VelocityField::TidalPiecewise { u_thr } => write!(f, "TidalPiecewise(u_thr={u_thr})"),
            VelocityField::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Reduces theta to `[0, 1]`, keeping exactly 1 on the closing branch.
fn phase(theta: f64) -> f64 {
    if (0.0..=1.0).contains(&theta) {
        theta
    } else {
        theta.rem_euclid(1.0)
    }
}

fn bump(s: f64) -> f64 {
    s * (1.0 - s)
}

/// Tidal cycle at a phase: `(base, peak)` with `U = base*e2 + peak*psi(t, x)`.
fn tidal_profile(u_thr: f64, theta: f64) -> (f64, f64) {
    let [t1, t2, t3, t4, t5, t6, t7, t8] = TIDAL_BREAKPOINTS;
    let th = phase(theta);
    if th <= t1 {
        (0.0, 0.0)
    } else if th <= t2 {
        ((th - t1) / (t2 - t1) * u_thr, 0.0)
    } else if th <= t3 {
        (u_thr, bump((th - t2) / (t3 - t2)))
    } else if th <= t4 {
        ((t4 - th) / (t4 - t3) * u_thr, 0.0)
    } else if th <= t5 {
        (0.0, 0.0)
    } else if th <= t6 {
        (-(th - t5) / (t6 - t5) * u_thr, 0.0)
    } else if th <= t7 {
        (-u_thr, -bump((th - t6) / (t7 - t6)))
    } else if th <= t8 {
        (-(t8 - th) / (t8 - t7) * u_thr, 0.0)
    } else {
        (0.0, 0.0)
    }
}

fn tidal_psi(u_thr: f64, t: f64, x1: f64) -> [f64; 2] {
    let amp = 1.0 + (PI * t / 30.0).sin();
    [amp * 0.1 * (1.0 + (2.0 * PI * x1).sin()), amp * u_thr]
}

fn shear_row(x1: f64) -> f64 {
    (PI * x1.rem_euclid(1.0)).sin()
}

impl VelocityField {
    pub fn tidal(u_thr: f64) -> Result<Self> {
        if !(u_thr > 0.0 && u_thr.is_finite()) {
            return Err(Error::param(format!("U_thr must be positive, got {u_thr}")));
        }
        Ok(VelocityField::TidalPiecewise { u_thr })
    }

    pub fn eval(&self, t: f64, theta: f64, x: [f64; 2]) -> Result<[f64; 2]> {
        let u = match self {
            VelocityField::ShearSine => [shear_row(x[0]) * (2.0 * PI * theta).sin(), 0.0],
            VelocityField::TidalPiecewise { u_thr } => {
                let (base, peak) = tidal_profile(*u_thr, theta);
                let mut u = [0.0, base];
                if peak != 0.0 {
                    let psi = tidal_psi(*u_thr, t, x[0]);
                    u[0] += peak * psi[0];
                    u[1] += peak * psi[1];
                }
                u
            }
            VelocityField::Custom(f) => f(t, theta, x),
        };
        if !(u[0].is_finite() && u[1].is_finite()) {
            return Err(Error::InvalidSample {
                point: vec![t, theta, x[0], x[1]],
            });
        }
        Ok(u)
    }

    /// Samples both components at `x = (q1/n, q2/n)` for `q1 < n`, `q2 < cols`,
    /// stored row-major.
    fn sample_grid(
        &self,
        t: f64,
        theta: f64,
        n: usize,
        cols: usize,
        u1: &mut [f64],
        u2: &mut [f64],
    ) -> Result<()> {
        let h = 1.0 / n as f64;
        match self {
            VelocityField::ShearSine => {
                let s = (2.0 * PI * theta).sin();
                for q1 in 0..n {
                    let v = shear_row(q1 as f64 * h) * s;
                    u1[q1 * cols..(q1 + 1) * cols].fill(v);
                    u2[q1 * cols..(q1 + 1) * cols].fill(0.0);
                }
            }
            VelocityField::TidalPiecewise { u_thr } => {
                let (base, peak) = tidal_profile(*u_thr, theta);
                for q1 in 0..n {
                    let mut v = [0.0, base];
                    if peak != 0.0 {
                        let psi = tidal_psi(*u_thr, t, q1 as f64 * h);
                        v[0] += peak * psi[0];
                        v[1] += peak * psi[1];
                    }
                    u1[q1 * cols..(q1 + 1) * cols].fill(v[0]);
                    u2[q1 * cols..(q1 + 1) * cols].fill(v[1]);
                }
            }
            VelocityField::Custom(_) => {
                for q1 in 0..n {
                    for q2 in 0..cols {
                        let v = self.eval(t, theta, [q1 as f64 * h, q2 as f64 * h])?;
                        u1[q1 * cols + q2] = v[0];
                        u2[q1 * cols + q2] = v[1];
                    }
                }
            }
        }
        Ok(())
    }

    /// True when the field never depends on `x2`.
    pub fn is_x2_invariant(&self) -> bool {
        !matches!(self, VelocityField::Custom(_))
    }
}

#[derive(Clone, Default)]
pub enum WaterHeight {
    #[default]
    Zero,
    Constant(f64),
    Custom(HeightSampler),
}

impl fmt::Debug for WaterHeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WaterHeight::Zero => f.write_str("Zero"),
            WaterHeight::Constant(v) => write!(f, "Constant({v})"),
            WaterHeight::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl WaterHeight {
    pub fn eval(&self, t: f64, theta: f64, x: [f64; 2]) -> Result<f64> {
        let v = match self {
            WaterHeight::Zero => 0.0,
            WaterHeight::Constant(v) => *v,
            WaterHeight::Custom(f) => f(t, theta, x),
        };
        if !v.is_finite() {
            return Err(Error::InvalidSample {
                point: vec![t, theta, x[0], x[1]],
            });
        }
        Ok(v)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, WaterHeight::Zero)
    }
}

/// Pointwise coefficient values at one `(t, theta, x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointCoefficients {
    pub a_tilde: f64,
    pub c_tilde: [f64; 2],
    pub a1: f64,
    pub c1: [f64; 2],
}

/// Spectra of the limit-problem coefficients at one parameter time.
#[derive(Clone, Debug)]
pub struct LimitCoefficients {
    pub a: SpectralField3,
    pub a_grad: [SpectralField3; 2],
    pub c: [SpectralField3; 2],
    pub div_c: SpectralField3,
}

/// Spectra of `A^eps(t, .)` and `C^eps(t, .)` at one instant.
#[derive(Clone, Debug)]
pub struct SliceCoefficients {
    pub a: SpectralField2,
    pub a_grad: [SpectralField2; 2],
    pub c: [SpectralField2; 2],
    pub div_c: SpectralField2,
}

/// `2i*pi*(m*C1 + n*C2)` mode by mode.
pub fn spectral_divergence<const D: usize>(
    c: &[crate::spectral::SpectralField<D>; 2],
) -> Result<crate::spectral::SpectralField<D>> {
    let [gx, _] = gradient_coeffs(&c[0])?;
    let [_, gy] = gradient_coeffs(&c[1])?;
    gx.combine(Complex::new(1.0, 0.0), &gy, Complex::new(1.0, 0.0))
}

type CacheKey = (u64, usize, usize);

pub struct CoefficientSet {
    laws: BedloadLaws,
    velocity: VelocityField,
    height: WaterHeight,
    cache: Mutex<HashMap<CacheKey, Arc<LimitCoefficients>>>,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("laws", &self.laws)
            .field("velocity", &self.velocity)
            .field("height", &self.height)
            .finish()
    }
}

impl Clone for CoefficientSet {
    fn clone(&self) -> Self {
        CoefficientSet::new(self.laws.clone(), self.velocity.clone(), self.height.clone())
    }
}

impl CoefficientSet {
    pub fn new(laws: BedloadLaws, velocity: VelocityField, height: WaterHeight) -> Self {
        CoefficientSet {
            laws,
            velocity,
            height,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn laws(&self) -> &BedloadLaws {
        &self.laws
    }
    pub fn velocity(&self) -> &VelocityField {
        &self.velocity
    }
    pub fn height(&self) -> &WaterHeight {
        &self.height
    }

    #[inline]
    fn combine(&self, u: [f64; 2], m: f64) -> PointCoefficients {
        let r2 = u[0] * u[0] + u[1] * u[1];
        let (ga, _) = self.laws.g_a.with_direction(r2);
        let (_, gc_over_r) = self.laws.g_c.with_direction(r2);
        let dir = [gc_over_r * u[0], gc_over_r * u[1]];
        let bm = self.laws.b * m;
        PointCoefficients {
            a_tilde: self.laws.a * ga,
            c_tilde: [self.laws.c * dir[0], self.laws.c * dir[1]],
            a1: -self.laws.a * bm * ga,
            c1: [-self.laws.c * bm * dir[0], -self.laws.c * bm * dir[1]],
        }
    }

    pub fn eval_point(&self, t: f64, theta: f64, x: [f64; 2]) -> Result<PointCoefficients> {
        let u = self.velocity.eval(t, theta, x)?;
        let m = self.height.eval(t, theta, x)?;
        Ok(self.combine(u, m))
    }

    pub fn eval_u(&self, t: f64, theta: f64, x: [f64; 2]) -> Result<[f64; 2]> {
        self.velocity.eval(t, theta, x)
    }

    /// `a * g_a(|U|)`
    pub fn eval_a_tilde(&self, t: f64, theta: f64, x: [f64; 2]) -> Result<f64> {
        Ok(self.eval_point(t, theta, x)?.a_tilde)
    }

    /// `c * g_c(|U|) * U/|U|`, zero where the flow is at rest.
    pub fn eval_c_tilde(&self, t: f64, theta: f64, x: [f64; 2]) -> Result<[f64; 2]> {
        Ok(self.eval_point(t, theta, x)?.c_tilde)
    }

    pub fn eval_a1_c1(&self, t: f64, theta: f64, x: [f64; 2]) -> Result<(f64, [f64; 2])> {
        let p = self.eval_point(t, theta, x)?;
        Ok((p.a1, p.c1))
    }

    pub fn eval_a_eps(&self, epsilon: f64, t: f64, x: [f64; 2]) -> Result<f64> {
        let theta = fast_phase(epsilon, t)?;
        let p = self.eval_point(t, theta, x)?;
        Ok(p.a_tilde + epsilon * p.a1)
    }

    pub fn eval_c_eps(&self, epsilon: f64, t: f64, x: [f64; 2]) -> Result<[f64; 2]> {
        let theta = fast_phase(epsilon, t)?;
        let p = self.eval_point(t, theta, x)?;
        Ok([
            p.c_tilde[0] + epsilon * p.c1[0],
            p.c_tilde[1] + epsilon * p.c1[1],
        ])
    }

    /// True when neither the flow nor the water height depend on `x2`.
    pub fn is_x2_invariant(&self) -> bool {
        self.velocity.is_x2_invariant() && !matches!(self.height, WaterHeight::Custom(_))
    }

    /// Fills `a`, `c1`, `c2` on the `n x n` grid with
    /// `A~ + weight*A~1` and `C~ + weight*C~1` at fixed `(t, theta)`.
    pub fn sample_grid(
        &self,
        t: f64,
        theta: f64,
        weight: f64,
        n: usize,
        buf: &mut GridSamples,
    ) -> Result<()> {
        self.sample(t, theta, weight, n, n, buf)
    }

    /// Like `sample_grid` on the single column `x2 = 0`.
    pub fn sample_x1_profile(
        &self,
        t: f64,
        theta: f64,
        weight: f64,
        n: usize,
        buf: &mut GridSamples,
    ) -> Result<()> {
        self.sample(t, theta, weight, n, 1, buf)
    }

    fn sample(
        &self,
        t: f64,
        theta: f64,
        weight: f64,
        n: usize,
        cols: usize,
        buf: &mut GridSamples,
    ) -> Result<()> {
        buf.resize(n * cols);
        self.velocity
            .sample_grid(t, theta, n, cols, &mut buf.u1, &mut buf.u2)?;
        let h = 1.0 / n as f64;
        let zero_height = self.height.is_zero();
        for i in 0..n * cols {
            let m = if zero_height {
                0.0
            } else {
                self.height
                    .eval(t, theta, [(i / cols) as f64 * h, (i % cols) as f64 * h])?
            };
            let p = self.combine([buf.u1[i], buf.u2[i]], m);
            buf.a[i] = p.a_tilde + weight * p.a1;
            buf.c1[i] = p.c_tilde[0] + weight * p.c1[0];
            buf.c2[i] = p.c_tilde[1] + weight * p.c1[1];
        }
        Ok(())
    }

    /// Spectra of `A~`, `grad A~`, `C~` and `div C~` over `(theta, x)`,
    /// cached per `(t, order, nq)`.
    pub fn limit_coefficients(
        &self,
        t: f64,
        order: usize,
        nq: usize,
    ) -> Result<Arc<LimitCoefficients>> {
        let key = (t.to_bits(), order, nq);
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(hit) = cache.get(&key) {
            return Ok(Arc::clone(hit));
        }
        let computed = Arc::new(self.compute_limit_coefficients(t, order, nq)?);
        cache.insert(key, Arc::clone(&computed));
        Ok(computed)
    }

    fn compute_limit_coefficients(
        &self,
        t: f64,
        order: usize,
        nq: usize,
    ) -> Result<LimitCoefficients> {
        let plane = nq * nq;
        let mut a = vec![0.0; nq * plane];
        let mut c1 = vec![0.0; nq * plane];
        let mut c2 = vec![0.0; nq * plane];
        let mut buf = GridSamples::default();
        for p in 0..nq {
            let theta = p as f64 / nq as f64;
            self.sample_grid(t, theta, 0.0, nq, &mut buf)?;
            a[p * plane..(p + 1) * plane].copy_from_slice(&buf.a);
            c1[p * plane..(p + 1) * plane].copy_from_slice(&buf.c1);
            c2[p * plane..(p + 1) * plane].copy_from_slice(&buf.c2);
        }
        let a = dft_real_samples::<3>(&a, nq, order, t)?;
        let c = [
            dft_real_samples::<3>(&c1, nq, order, t)?,
            dft_real_samples::<3>(&c2, nq, order, t)?,
        ];
        let a_grad = gradient_coeffs(&a)?;
        let div_c = spectral_divergence(&c)?;
        Ok(LimitCoefficients {
            a,
            a_grad,
            c,
            div_c,
        })
    }

    /// Spectra of `A^eps(t, .)`, `grad A^eps` and `div C^eps` at the phase `t/eps`.
    pub fn slice_coefficients(
        &self,
        epsilon: f64,
        t: f64,
        order: usize,
        nq: usize,
    ) -> Result<SliceCoefficients> {
        let mut ws = SliceWorkspace::new(nq, order)?;
        ws.compute(self, epsilon, t)?;
        let a = ws.a.clone();
        let c = ws.c.clone();
        let a_grad = gradient_coeffs(&a)?;
        let div_c = spectral_divergence(&c)?;
        Ok(SliceCoefficients {
            a,
            a_grad,
            c,
            div_c,
        })
    }
}

/// `(t / eps) mod 1`.
pub fn fast_phase(epsilon: f64, t: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok((t / epsilon).rem_euclid(1.0))
}

#[derive(Clone, Debug, Default)]
pub struct GridSamples {
    pub a: Vec<f64>,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
}

impl GridSamples {
    fn resize(&mut self, len: usize) {
        for v in [
            &mut self.a,
            &mut self.c1,
            &mut self.c2,
            &mut self.u1,
            &mut self.u2,
        ] {
            v.resize(len, 0.0);
        }
    }
}

/// Reusable buffers for the per-stage coefficient refresh of the
/// reference integrator.
#[derive(Clone, Debug)]
pub struct SliceWorkspace {
    plan: RealDft2,
    samples: GridSamples,
    pub a: SpectralField2,
    pub c: [SpectralField2; 2],
}

impl SliceWorkspace {
    pub fn new(nq: usize, order: usize) -> Result<Self> {
        Ok(SliceWorkspace {
            plan: RealDft2::new(nq, order)?,
            samples: GridSamples::default(),
            a: SpectralField2::zeros(order, 0.0),
            c: [
                SpectralField2::zeros(order, 0.0),
                SpectralField2::zeros(order, 0.0),
            ],
        })
    }

    pub fn compute(&mut self, set: &CoefficientSet, epsilon: f64, t: f64) -> Result<()> {
        let theta = fast_phase(epsilon, t)?;
        let n = self.plan.n();
        let profile = set.is_x2_invariant();
        let cols = if profile {
            set.sample_x1_profile(t, theta, epsilon, n, &mut self.samples)?;
            1
        } else {
            set.sample_grid(t, theta, epsilon, n, &mut self.samples)?;
            n
        };
        for v in [&self.samples.a, &self.samples.c1, &self.samples.c2] {
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::InvalidSample {
                    point: vec![
                        t,
                        theta,
                        (i / cols) as f64 / n as f64,
                        (i % cols) as f64 / n as f64,
                    ],
                });
            }
        }
        let [c1, c2] = &mut self.c;
        if profile {
            self.plan.forward_x1_profile(&self.samples.a, &mut self.a);
            self.plan.forward_x1_profile(&self.samples.c1, c1);
            self.plan.forward_x1_profile(&self.samples.c2, c2);
        } else {
            self.plan.forward(&self.samples.a, &mut self.a);
            self.plan.forward(&self.samples.c1, c1);
            self.plan.forward(&self.samples.c2, c2);
        }
        for f in [&mut self.a, c1, c2] {
            f.set_t(t);
        }
        Ok(())
    }

    /// Largest `|A^eps|` among the samples of the last `compute`.
    pub fn max_a(&self) -> f64 {
        self.samples.a.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A hypothesis that failed on the sampled lattice, with where it failed.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub hypothesis: &'static str,
    pub witness: Vec<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisReport {
    /// Sampled bound on the laws, the flow and their derivatives.
    pub d_estimate: f64,
    pub u_thr_used: f64,
    /// Infimum of `A~` over the sampled threshold window.
    pub g_thr_estimate: f64,
    /// Largest sampled phase window on which `|U| >= U_thr` everywhere.
    pub window: Option<(f64, f64)>,
    pub periodicity_defect: f64,
    pub inf_a_tilde: f64,
    pub violations: Vec<Violation>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, hypothesis: &str) -> bool {
        self.violations.iter().any(|v| v.hypothesis == hypothesis)
    }
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "d_estimate={:e}", self.d_estimate)?;
        writeln!(f, "u_thr_used={}", self.u_thr_used)?;
        writeln!(f, "g_thr_estimate={:e}", self.g_thr_estimate)?;
        match self.window {
            Some((lo, hi)) => writeln!(f, "window=[{lo}, {hi}]")?,
            None => writeln!(f, "window=none")?,
        }
        writeln!(f, "periodicity_defect={:e}", self.periodicity_defect)?;
        writeln!(f, "inf_a_tilde={:e}", self.inf_a_tilde)?;
        writeln!(f, "violations={}", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {} at {:?}: {}", v.hypothesis, v.witness, v.detail)?;
        }
        Ok(())
    }
}

pub const LAW_ORDERING: &str = "law-ordering";
pub const LAW_ORIGIN: &str = "law-origin";
pub const LAW_BOUNDED: &str = "law-bounded";
pub const LAW_THRESHOLD: &str = "law-threshold";
pub const FLOW_PERIODIC: &str = "flow-periodic";
pub const FLOW_QUIESCENT: &str = "flow-quiescent";
pub const FLOW_WINDOW: &str = "flow-window";
pub const DIFFUSION_POSITIVE: &str = "diffusion-positive";

/// Samples the structural assumptions behind the two-scale limit and
/// reports which of them hold. Never fails on a violated hypothesis.
pub fn check_hypotheses(set: &CoefficientSet, density: usize) -> Result<HypothesisReport> {
    if density < 16 {
        return Err(Error::param(format!(
            "sample density must be at least 16 per axis, got {density}"
        )));
    }
    let laws = &set.laws;
    let mut violations = Vec::new();

    // Laws on a log-spaced speed grid 1e-6 ..= 1e6.
    let speeds: Vec<f64> = (0..8 * density)
        .map(|k| 10f64.powf(-6.0 + 12.0 * k as f64 / (8 * density - 1) as f64))
        .collect();
    let deriv = |g: &TransportLaw, u: f64| {
        let h = 1e-6 * u.max(1e-3);
        (g.eval(u + h) - g.eval((u - h).max(0.0))) / (u + h - (u - h).max(0.0))
    };
    let law_sup = |g: &TransportLaw| {
        let mut sup_all = 0.0f64;
        let mut sup_low = 0.0f64;
        for &u in &speeds {
            let v = g.eval(u).abs() + deriv(g, u).abs();
            sup_all = sup_all.max(v);
            if u <= 1e5 {
                sup_low = sup_low.max(v);
            }
        }
        (sup_all, sup_low)
    };
    let (sup_a, sup_a_low) = law_sup(&laws.g_a);
    let (sup_c, sup_c_low) = law_sup(&laws.g_c);
    for (name, sup, low) in [("g_a", sup_a, sup_a_low), ("g_c", sup_c, sup_c_low)] {
        if !sup.is_finite() || sup > 2.0 * low {
            violations.push(Violation {
                hypothesis: LAW_BOUNDED,
                witness: vec![1e6],
                detail: format!("sup |{name}| + |{name}'| still growing: {sup:e} vs {low:e} at 1e5"),
            });
        }
    }
    if let Some(&u) = speeds.iter().find(|&&u| {
        let (ga, gc) = (laws.g_a.eval(u), laws.g_c.eval(u));
        !(ga >= gc && gc >= 0.0)
    }) {
        violations.push(Violation {
            hypothesis: LAW_ORDERING,
            witness: vec![u],
            detail: "g_a >= g_c >= 0 fails".into(),
        });
    }
    let h0 = 1e-6;
    let gc0 = laws.g_c.eval(0.0);
    let gc0_slope = (laws.g_c.eval(h0) - gc0) / h0;
    if gc0.abs() > 1e-12 || gc0_slope.abs() > 1e-4 {
        violations.push(Violation {
            hypothesis: LAW_ORIGIN,
            witness: vec![0.0],
            detail: format!("g_c(0) = {gc0:e}, g_c'(0) ~ {gc0_slope:e}"),
        });
    }

    let u_thr = match set.velocity {
        VelocityField::TidalPiecewise { u_thr } => u_thr,
        _ => 0.0,
    };
    let law_floor = speeds
        .iter()
        .filter(|&&u| u >= u_thr)
        .map(|&u| laws.g_a.eval(u))
        .fold(f64::INFINITY, f64::min);
    if !(law_floor > 0.0) {
        violations.push(Violation {
            hypothesis: LAW_THRESHOLD,
            witness: vec![u_thr],
            detail: format!("inf g_a over u >= U_thr is {law_floor:e}"),
        });
    }

    // Flow on a (t, theta, x) lattice.
    let step = 1.0 / density as f64;
    let dh = 1e-6;
    let mut d_flow = 0.0f64;
    let mut periodicity_defect = 0.0f64;
    let mut inf_a = f64::INFINITY;
    let mut inf_a_witness = vec![];
    let mut quiescent_witness: Option<Vec<f64>> = None;
    // per theta index: does |U| >= U_thr hold at every sampled (t, x)?
    let mut above = vec![true; density];
    let mut a_at_theta = vec![f64::INFINITY; density];
    for it in 0..density {
        let t = it as f64 * step;
        for iq1 in 0..density {
            for iq2 in 0..density {
                let x = [iq1 as f64 * step, iq2 as f64 * step];
                let u0 = set.velocity.eval(t, 0.0, x)?;
                let u1 = set.velocity.eval(t, 1.0, x)?;
                let m0 = set.height.eval(t, 0.0, x)?;
                let m1 = set.height.eval(t, 1.0, x)?;
                periodicity_defect = periodicity_defect
                    .max((u0[0] - u1[0]).abs())
                    .max((u0[1] - u1[1]).abs())
                    .max((m0 - m1).abs());
                for (ith, flag) in above.iter_mut().enumerate() {
                    // offset the phase lattice so samples avoid branch points
                    let theta = (ith as f64 + 0.5) * step;
                    let u = set.velocity.eval(t, theta, x)?;
                    let speed = (u[0] * u[0] + u[1] * u[1]).sqrt();
                    let a = set.eval_a_tilde(t, theta, x)?;
                    if a < inf_a {
                        inf_a = a;
                        inf_a_witness = vec![t, theta, x[0], x[1]];
                    }
                    a_at_theta[ith] = a_at_theta[ith].min(a);
                    if speed < u_thr {
                        *flag = false;
                    }
                    let du_t = set.velocity.eval(t + dh, theta, x)?;
                    let du_x1 = set.velocity.eval(t, theta, [x[0] + dh, x[1]])?;
                    let du_x2 = set.velocity.eval(t, theta, [x[0], x[1] + dh])?;
                    let du_th = set.velocity.eval(t, theta + dh, x)?;
                    let rate = |v: [f64; 2]| ((v[0] - u[0]).hypot(v[1] - u[1])) / dh;
                    let (rt, rx1, rx2, rth) = (rate(du_t), rate(du_x1), rate(du_x2), rate(du_th));
                    d_flow = d_flow.max(speed).max(rt).max(rx1).max(rx2).max(rth);
                    if speed <= u_thr
                        && (rt > 1e-6 || rx1 > 1e-6 || rx2 > 1e-6)
                        && quiescent_witness.is_none()
                    {
                        quiescent_witness = Some(vec![t, theta, x[0], x[1]]);
                    }
                }
            }
        }
    }
    if periodicity_defect > 1e-12 {
        violations.push(Violation {
            hypothesis: FLOW_PERIODIC,
            witness: vec![],
            detail: format!("|U(t,0,x) - U(t,1,x)| up to {periodicity_defect:e}"),
        });
    }
    if let Some(w) = quiescent_witness {
        violations.push(Violation {
            hypothesis: FLOW_QUIESCENT,
            witness: w,
            detail: "flow below threshold is not frozen in t and x".into(),
        });
    }

    // Longest run of consecutive phases above threshold.
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for (i, &ok) in above.iter().chain(std::iter::once(&false)).enumerate() {
        match (ok, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if best.is_none_or(|(bs, be)| i - s > be - bs) {
                    best = Some((s, i));
                }
                start = None;
            }
            _ => {}
        }
    }
    let window = best.map(|(s, e)| ((s as f64 + 0.5) * step, (e as f64 - 0.5) * step));
    let g_thr_estimate = match best {
        Some((s, e)) => a_at_theta[s..e].iter().copied().fold(f64::INFINITY, f64::min),
        None => 0.0,
    };
    if best.is_none() {
        violations.push(Violation {
            hypothesis: FLOW_WINDOW,
            witness: vec![u_thr],
            detail: "no phase window with |U| >= U_thr everywhere".into(),
        });
    }
    if !(inf_a > 0.0) {
        violations.push(Violation {
            hypothesis: DIFFUSION_POSITIVE,
            witness: inf_a_witness,
            detail: format!("inf A~ = {inf_a:e}"),
        });
    }

    let d_estimate = [sup_a, sup_c, d_flow]
        .into_iter()
        .fold(0.0f64, f64::max);
    Ok(HypothesisReport {
        d_estimate,
        u_thr_used: u_thr,
        g_thr_estimate,
        window,
        periodicity_defect,
        inf_a_tilde: inf_a,
        violations,
    })
}
