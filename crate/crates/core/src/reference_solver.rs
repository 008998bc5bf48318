//! Fourier-mode ODE system for the oscillating problem `z^eps(t, x)`,
//! integrated with an adaptive explicit Runge–Kutta pair.

use crate::coefficients::{fast_phase, CoefficientSet, GridSamples, SliceWorkspace};
use crate::error::{Error, FailedRun, Result};
use crate::integrator::{dopri5, HaltReason, IntegrationStats, OdeSystem, StepControl};
use crate::limit_solver::{solve_profile, GaugeSpec, REALITY_TOL};
use crate::spectral::{
    dft_coefficients2, slice_theta, snapshot::write_snapshot, Complex, SpectralField2,
};
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceState {
    pub t: f64,
    pub z: SpectralField2,
    pub epsilon: f64,
}

impl ReferenceState {
    pub fn new(z: SpectralField2, epsilon: f64) -> Result<Self> {
        fast_phase(epsilon, 0.0)?;
        Ok(ReferenceState {
            t: z.t(),
            z,
            epsilon,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    /// Safety factor of the explicit stability cap.
    pub safety: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-8,
            atol: 1e-10,
            h_init: None,
            h_max: f64::INFINITY,
            safety: 0.9,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.h_max > 0.0) {
            return Err(Error::param(format!(
                "tolerances and h_max must be positive (rtol={}, atol={}, h_max={})",
                self.rtol, self.atol, self.h_max
            )));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::param(format!("safety must lie in (0, 1], got {}", self.safety)));
        }
        Ok(())
    }

    /// `safety * eps / (4 pi^2 * 2 P^2 * max|A| + 1)`
    pub fn stability_cap(&self, epsilon: f64, order: usize, max_a: f64) -> f64 {
        let p = order as f64;
        self.safety * epsilon / (4.0 * PI * PI * 2.0 * p * p * max_a + 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<SpectralField2>,
    pub stats: IntegrationStats,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t()).collect()
    }

    pub fn at(&self, t: f64) -> Option<&SpectralField2> {
        self.snapshots.iter().find(|s| s.t() == t)
    }

    pub fn last(&self) -> &SpectralField2 {
        self.snapshots.last().expect("a trajectory holds at least one snapshot")
    }
}

/// Writes one `z_t<t>.spec` file per snapshot and `summary.txt`.
pub fn write_trajectory(dir: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let summary = traj.stats.summary();
    for s in &traj.snapshots {
        write_snapshot(dir.join(format!("z_t{}.spec", s.t())), s, &[summary.clone()])?;
    }
    std::fs::write(dir.join("summary.txt"), format!("{summary}\n"))?;
    Ok(())
}

pub type InitialSampler = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum InitialCondition {
    /// `sum amplitude * cos(2 pi (m x1 + n x2))`
    Cosines(Vec<(f64, [i32; 2])>),
    Constant(f64),
    Sampler { f: InitialSampler, nq: usize },
    /// `Z(0, 0, .)` from the limit problem, gauged to zero mean.
    WellPrepared { nq: usize },
}

impl fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialCondition::Cosines(terms) => write!(f, "Cosines({terms:?})"),
            InitialCondition::Constant(v) => write!(f, "Constant({v})"),
            InitialCondition::Sampler { nq, .. } => write!(f, "Sampler(nq={nq})"),
            InitialCondition::WellPrepared { nq } => write!(f, "WellPrepared(nq={nq})"),
        }
    }
}

impl InitialCondition {
    /// `cos 2 pi x1 + cos 4 pi x1`
    pub fn two_cosines() -> Self {
        InitialCondition::Cosines(vec![(1.0, [1, 0]), (1.0, [2, 0])])
    }
}

/// Fourier coefficients of the initial seabed at order `P`; modes beyond
/// the cube are dropped.
pub fn project_initial(
    ic: &InitialCondition,
    order: usize,
    set: &CoefficientSet,
) -> Result<SpectralField2> {
    match ic {
        InitialCondition::Cosines(terms) => {
            let mut z = SpectralField2::zeros(order, 0.0);
            for &(amp, [m, n]) in terms {
                if !amp.is_finite() {
                    return Err(Error::param("cosine amplitude must be finite"));
                }
                if [m, n] == [0, 0] {
                    z.set([0, 0], z.at([0, 0]) + Complex::new(amp, 0.0))?;
                    continue;
                }
                for k in [[m, n], [-m, -n]] {
                    if z.index_of(k).is_some() {
                        z.set(k, z.at(k) + Complex::new(0.5 * amp, 0.0))?;
                    }
                }
            }
            z.mark_real_valued()
        }
        InitialCondition::Constant(v) => {
            SpectralField2::delta(order, 0.0, [0, 0], Complex::new(*v, 0.0))?.mark_real_valued()
        }
        InitialCondition::Sampler { f, nq } => dft_coefficients2(|x1, x2| f(x1, x2), order, *nq, 0.0),
        InitialCondition::WellPrepared { nq } => {
            let sol = solve_profile(set, 0.0, order, *nq, GaugeSpec::default())?;
            let mut z = slice_theta(&sol.profile, 0.0);
            z.set_t(0.0);
            Ok(z)
        }
    }
}

/// Right-hand side of the mode system in divergence form:
/// `dz_k/dt = (2 i pi k / eps) . (sum_k' A(k-k') 2 i pi k' z(k') + C_k)`.
pub struct ReferenceRhs<'a> {
    set: &'a CoefficientSet,
    epsilon: f64,
    order: usize,
    ws: SliceWorkspace,
    cached_t: Option<u64>,
    nonzero_a: Vec<([i32; 2], Complex)>,
    div_c: Vec<Complex>,
    evals: usize,
}

impl<'a> ReferenceRhs<'a> {
    pub fn new(set: &'a CoefficientSet, epsilon: f64, order: usize, nq: usize) -> Result<Self> {
        fast_phase(epsilon, 0.0)?;
        Ok(ReferenceRhs {
            set,
            epsilon,
            order,
            ws: SliceWorkspace::new(nq, order)?,
            cached_t: None,
            nonzero_a: Vec::new(),
            div_c: vec![Complex::new(0.0, 0.0); (2 * order + 1).pow(2)],
            evals: 0,
        })
    }

    /// Number of coefficient refreshes so far.
    pub fn evaluations(&self) -> usize {
        self.evals
    }

    fn refresh(&mut self, t: f64) -> Result<()> {
        if self.cached_t == Some(t.to_bits()) {
            return Ok(());
        }
        self.ws.compute(self.set, self.epsilon, t)?;
        self.evals += 1;
        let a = &self.ws.a;
        self.nonzero_a.clear();
        self.nonzero_a.extend(a.modes().filter(|(_, c)| c.re != 0.0 || c.im != 0.0));
        let two_i_pi = Complex::new(0.0, 2.0 * PI);
        for (i, ((k, c1), c2)) in self.ws.c[0]
            .modes()
            .zip(self.ws.c[1].coeffs())
            .enumerate()
        {
            self.div_c[i] = two_i_pi * (c1 * f64::from(k[0]) + c2 * f64::from(k[1]));
        }
        self.cached_t = Some(t.to_bits());
        Ok(())
    }

    pub fn eval_into(&mut self, t: f64, z: &[Complex], dz: &mut [Complex]) -> Result<()> {
        self.refresh(t)?;
        let p = self.order as i32;
        let side = (2 * p + 1) as usize;
        let at = |k1: i32, k2: i32| (k1 + p) as usize * side + (k2 + p) as usize;
        dz.fill(Complex::new(0.0, 0.0));
        for &([d1, d2], a) in &self.nonzero_a {
            for k1 in (-p).max(d1 - p)..=p.min(d1 + p) {
                let j1 = k1 - d1;
                for k2 in (-p).max(d2 - p)..=p.min(d2 + p) {
                    let j2 = k2 - d2;
                    let w = f64::from(k1 * j1 + k2 * j2);
                    if w != 0.0 {
                        dz[at(k1, k2)] += a * z[at(j1, j2)] * w;
                    }
                }
            }
        }
        let diff = -4.0 * PI * PI;
        let inv = 1.0 / self.epsilon;
        for (d, &c) in dz.iter_mut().zip(&self.div_c) {
            *d = (*d * diff + c) * inv;
        }
        Ok(())
    }

    /// Largest `|A^eps|` seen at the last refresh.
    pub fn last_max_a(&self) -> f64 {
        self.ws.max_a()
    }
}

impl OdeSystem for ReferenceRhs<'_> {
    fn dim(&self) -> usize {
        self.div_c.len()
    }

    fn eval(&mut self, t: f64, y: &[Complex], dy: &mut [Complex]) -> Result<()> {
        self.eval_into(t, y, dy)
    }
}

/// Time derivative of the state's coefficients.
pub fn rhs(state: &ReferenceState, set: &CoefficientSet, nq: usize) -> Result<SpectralField2> {
    let mut f = ReferenceRhs::new(set, state.epsilon, state.z.order(), nq)?;
    let mut dz = vec![Complex::new(0.0, 0.0); state.z.len()];
    f.eval_into(state.t, state.z.coeffs(), &mut dz)?;
    SpectralField2::from_coeffs(state.z.order(), state.t, dz)
}

/// Sampled `sup |A^eps|` over `[t0, t_end]` and a full tidal period.
pub fn estimate_max_a(
    set: &CoefficientSet,
    epsilon: f64,
    t0: f64,
    t_end: f64,
    nq: usize,
) -> Result<f64> {
    let mut buf = GridSamples::default();
    let mut sup = 0.0f64;
    for it in 0..=8 {
        let t = t0 + (t_end - t0) * it as f64 / 8.0;
        for ith in 0..64 {
            let theta = ith as f64 / 64.0;
            if set.is_x2_invariant() {
                set.sample_x1_profile(t, theta, epsilon, nq, &mut buf)?;
            } else {
                set.sample_grid(t, theta, epsilon, nq, &mut buf)?;
            }
            sup = buf.a.iter().fold(sup, |m, v| m.max(v.abs()));
        }
    }
    Ok(sup)
}

/// Integrates from `state0.t` to `t_end`, recording snapshots at `state0.t`,
/// each requested output time and `t_end`.
pub fn integrate(
    state0: &ReferenceState,
    set: &CoefficientSet,
    nq: usize,
    t_end: f64,
    config: &IntegratorConfig,
    output_times: &[f64],
) -> Result<Trajectory> {
    config.validate()?;
    let t0 = state0.t;
    if !(t_end > t0) || !t_end.is_finite() {
        return Err(Error::param(format!("final time {t_end} must exceed the start {t0}")));
    }
    state0.z.check_finite()?;
    let mut outs: Vec<f64> = output_times.to_vec();
    if let Some(&bad) = outs.iter().find(|&&o| !(o >= t0 && o <= t_end)) {
        return Err(Error::param(format!("output time {bad} outside [{t0}, {t_end}]")));
    }
    outs.push(t_end);
    outs.sort_by(f64::total_cmp);
    outs.dedup();
    outs.retain(|&o| o > t0);

    let order = state0.z.order();
    let eps = state0.epsilon;
    let max_a = estimate_max_a(set, eps, t0, t_end, nq)?;
    let ctl = StepControl {
        rtol: config.rtol,
        atol: config.atol,
        h_init: config.h_init,
        h_max: config.h_max,
        h_cap: config.stability_cap(eps, order, max_a),
        max_steps: config.max_steps,
    };
    let mut sys = ReferenceRhs::new(set, eps, order, nq)?;
    let real = state0.z.is_real_valued();
    let mut snapshots = vec![state0.z.clone()];
    let mut pending: Result<()> = Ok(());
    let run = dopri5(&mut sys, t0, state0.z.coeffs(), t_end, &outs, &ctl, |t, y| {
        if pending.is_err() {
            return;
        }
        match SpectralField2::from_coeffs(order, t, y.to_vec()) {
            Ok(f) => snapshots.push(f),
            Err(e) => pending = Err(e),
        }
    });
    let stats = match run {
        Ok((_, stats)) => stats,
        Err(halt) => {
            let last_state = SpectralField2::from_coeffs(
                order,
                halt.t,
                halt.y.into_iter()
                    .map(|c| if c.re.is_finite() && c.im.is_finite() { c } else { Complex::new(f64::NAN, f64::NAN) })
                    .collect(),
            )
            .unwrap_or_else(|_| SpectralField2::zeros(order, halt.t));
            let failed = |reason: &str| Error::IntegrationFailure {
                reason: reason.to_string(),
                run: Box::new(FailedRun {
                    t: halt.t,
                    accepted: halt.stats.accepted,
                    rejected: halt.stats.rejected,
                    last_state: last_state.clone(),
                }),
            };
            return Err(match halt.reason {
                HaltReason::MaxSteps => failed("maximum number of steps exceeded"),
                HaltReason::StepUnderflow => failed("step size underflow"),
                HaltReason::NonFinite => Error::Divergence { t: halt.t },
                HaltReason::System(e) => e,
            });
        }
    };
    pending?;
    if real {
        for s in snapshots.iter_mut().skip(1) {
            if s.hermitian_defect() <= REALITY_TOL * s.max_abs() {
                *s = s.clone().mark_real_valued_within(REALITY_TOL)?;
            }
        }
    }
    log::debug!("reference run eps={eps} P={order}: {}", stats.summary());
    Ok(Trajectory { snapshots, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{BedloadLaws, VelocityField, WaterHeight};
    use crate::spectral::GridSpec;

    fn shear() -> CoefficientSet {
        CoefficientSet::new(BedloadLaws::cubic(), VelocityField::ShearSine, WaterHeight::Zero)
    }

    /// Uniform flow: `A = alpha` and a constant `C` with zero divergence.
    fn constant_a(alpha: f64) -> CoefficientSet {
        let u = alpha.cbrt();
        CoefficientSet::new(
            BedloadLaws::cubic(),
            VelocityField::Custom(Arc::new(move |_, _, _| [u, 0.0])),
            WaterHeight::Zero,
        )
    }

    fn random_state(order: usize, seed: u64) -> SpectralField2 {
        let z3 = crate::spectral::tests::random_field3(order, seed);
        slice_theta(&z3, 0.0)
    }

    #[test]
    fn initial_cosines() {
        let z = project_initial(&InitialCondition::two_cosines(), 4, &shear()).unwrap();
        for (k, c) in z.modes() {
            let expect = if matches!(k, [1, 0] | [-1, 0] | [2, 0] | [-2, 0]) { 0.5 } else { 0.0 };
            assert_eq!(c, Complex::new(expect, 0.0));
        }
        assert!(z.is_real_valued());
        let c = project_initial(&InitialCondition::Constant(7.0), 2, &shear()).unwrap();
        assert_eq!(c.at([0, 0]), Complex::new(7.0, 0.0));
        assert_eq!(c.max_abs(), 7.0);
    }

    #[test]
    fn initial_sampler_matches_cosines() {
        let f: InitialSampler = Arc::new(|x1, _| (2.0 * PI * x1).cos() + (4.0 * PI * x1).cos());
        let z = project_initial(&InitialCondition::Sampler { f, nq: 32 }, 4, &shear()).unwrap();
        let exact = project_initial(&InitialCondition::two_cosines(), 4, &shear()).unwrap();
        for (a, b) in z.coeffs().iter().zip(exact.coeffs()) {
            assert!((a - b).norm() <= 1e-15);
        }
    }

    #[test]
    fn well_prepared_is_the_profile_slice() {
        let set = shear();
        let z = project_initial(&InitialCondition::WellPrepared { nq: 32 }, 3, &set).unwrap();
        let prof = solve_profile(&set, 0.0, 3, 32, GaugeSpec::default()).unwrap().profile;
        let grid = GridSpec::new(16).unwrap();
        let g1 = crate::spectral::eval_on_grid(&z, &grid).unwrap();
        let g2 = crate::spectral::eval_profile_on_grid(&prof, 0.0, &grid).unwrap();
        for (a, b) in g1.values().iter().zip(g2.values()) {
            assert!((a - b).abs() <= 1e-13);
        }
    }

    #[test]
    fn diagonal_rhs_for_constant_diffusion() {
        let alpha = 2.0;
        let eps = 0.1;
        let z = random_state(3, 5);
        let state = ReferenceState::new(z.clone(), eps).unwrap();
        let dz = rhs(&state, &constant_a(alpha), 32).unwrap();
        for ((k, d), c) in dz.modes().zip(z.coeffs()) {
            let rate = -4.0 * PI * PI * alpha * f64::from(k[0] * k[0] + k[1] * k[1]) / eps;
            assert!((d - c * rate).norm() <= 1e-11 * (1.0 + (c * rate).norm()), "{k:?}");
        }
    }

    #[test]
    fn zero_state_without_source_is_steady() {
        let state = ReferenceState::new(SpectralField2::zeros(3, 0.0), 0.1).unwrap();
        let dz = rhs(&state, &constant_a(1.0), 32).unwrap();
        assert!(dz.max_abs() <= 1e-13);
    }

    /// The gradient form: `sum 2 i pi Agrad(k-k').k' z(k') - 4 pi^2 sum A(k-k')|k'|^2 z(k') + C_k`.
    fn gradient_form(set: &CoefficientSet, eps: f64, t: f64, z: &SpectralField2, nq: usize) -> SpectralField2 {
        let sc = set.slice_coefficients(eps, t, z.order(), nq).unwrap();
        let p = z.order() as i32;
        let mut out = SpectralField2::zeros(z.order(), t);
        let two_i_pi = Complex::new(0.0, 2.0 * PI);
        for (k, _) in z.modes() {
            let mut acc = sc.div_c.at(k);
            for m in -p..=p {
                for n in -p..=p {
                    let d = [k[0] - m, k[1] - n];
                    let zk = z.at([m, n]);
                    acc += two_i_pi * (sc.a_grad[0].at(d) * f64::from(m) + sc.a_grad[1].at(d) * f64::from(n)) * zk;
                    acc -= 4.0 * PI * PI * sc.a.at(d) * f64::from(m * m + n * n) * zk;
                }
            }
            out.set(k, acc / eps).unwrap();
        }
        out
    }

    #[test]
    fn divergence_form_matches_gradient_form() {
        let z = random_state(4, 21);
        for set in [shear(), CoefficientSet::new(BedloadLaws::cubic(), VelocityField::tidal(1.0).unwrap(), WaterHeight::Zero)] {
            for t in [0.0123, 0.33, 0.7777] {
                let mut zt = z.clone();
                zt.set_t(t);
                let state = ReferenceState::new(zt.clone(), 0.01).unwrap();
                let fast = rhs(&state, &set, 64).unwrap();
                let slow = gradient_form(&set, 0.01, t, &zt, 64);
                let scale = slow.max_abs();
                for (a, b) in fast.coeffs().iter().zip(slow.coeffs()) {
                    assert!((a - b).norm() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn mean_mode_derivative_vanishes() {
        for seed in 0..6 {
            let z = random_state(4, 100 + seed);
            let state = ReferenceState::new(z, 0.02).unwrap();
            let dz = rhs(&state, &shear(), 64).unwrap();
            assert!(dz.at([0, 0]).norm() <= 1e-12 * dz.max_abs());
        }
    }

    #[test]
    fn analytic_decay() {
        let (alpha, eps, t_end) = (1.0, 0.1, 0.01);
        let z0 = SpectralField2::delta(2, 0.0, [1, 0], Complex::new(1.0, 0.0)).unwrap();
        let state = ReferenceState::new(z0, eps).unwrap();
        let cfg = IntegratorConfig::default();
        let traj = integrate(&state, &constant_a(alpha), 32, t_end, &cfg, &[0.005]).unwrap();
        assert_eq!(traj.times(), vec![0.0, 0.005, 0.01]);
        let exact = (-4.0 * PI * PI * alpha * t_end / eps).exp();
        let got = traj.last().at([1, 0]);
        assert!((got.re - exact).abs() <= 1e-6 * exact);
        assert!((got.re - exact).abs() <= 1e2 * cfg.rtol * exact);
        assert!(got.im.abs() <= 1e-12);
    }

    #[test]
    fn zero_data_stays_zero() {
        let state = ReferenceState::new(SpectralField2::zeros(2, 0.0), 0.1).unwrap();
        let traj = integrate(&state, &constant_a(1.0), 32, 0.05, &IntegratorConfig::default(), &[]).unwrap();
        assert!(traj.last().max_abs() <= 1e-15);
        assert_eq!(traj.times(), vec![0.0, 0.05]);
    }

    #[test]
    fn mass_and_symmetry_preserved() {
        let set = shear();
        let z0 = project_initial(&InitialCondition::two_cosines(), 4, &set).unwrap();
        let state = ReferenceState::new(z0.clone(), 0.05).unwrap();
        let traj = integrate(&state, &set, 64, 0.2, &IntegratorConfig::default(), &[0.05, 0.1]).unwrap();
        for s in &traj.snapshots {
            assert!((s.at([0, 0]) - z0.at([0, 0])).norm() <= 1e-10);
            assert!(s.hermitian_defect() <= 1e-9 * s.max_abs());
        }
        assert!(traj.last().is_real_valued());
    }

    #[test]
    fn tighter_tolerance_is_self_consistent() {
        let set = CoefficientSet::new(BedloadLaws::cubic(), VelocityField::tidal(1.0).unwrap(), WaterHeight::Zero);
        let z0 = project_initial(&InitialCondition::two_cosines(), 3, &set).unwrap();
        let state = ReferenceState::new(z0, 0.1).unwrap();
        let loose = IntegratorConfig { rtol: 1e-6, atol: 1e-8, ..Default::default() };
        let tight = IntegratorConfig { rtol: 5e-7, atol: 5e-9, ..Default::default() };
        let a = integrate(&state, &set, 32, 0.3, &loose, &[]).unwrap();
        let b = integrate(&state, &set, 32, 0.3, &tight, &[]).unwrap();
        let diff = a.last().combine(Complex::new(1.0, 0.0), b.last(), Complex::new(-1.0, 0.0)).unwrap();
        assert!(diff.max_abs() <= 10.0 * loose.rtol * a.last().max_abs().max(1.0));
    }

    #[test]
    fn smaller_epsilon_needs_more_steps() {
        let set = shear();
        let z0 = project_initial(&InitialCondition::two_cosines(), 2, &set).unwrap();
        let run = |eps: f64| {
            let state = ReferenceState::new(z0.clone(), eps).unwrap();
            integrate(&state, &set, 32, 0.1, &IntegratorConfig::default(), &[]).unwrap().stats.accepted
        };
        let (coarse, fine) = (run(0.1), run(0.05));
        assert!(fine as f64 >= 1.2 * coarse as f64, "{coarse} {fine}");
    }

    #[test]
    fn invalid_requests() {
        let state = ReferenceState::new(SpectralField2::zeros(1, 0.0), 0.1).unwrap();
        let set = shear();
        let cfg = IntegratorConfig::default();
        assert!(integrate(&state, &set, 32, 0.0, &cfg, &[]).is_err());
        assert!(integrate(&state, &set, 32, 1.0, &cfg, &[1.5]).is_err());
        assert!(ReferenceState::new(SpectralField2::zeros(1, 0.0), 0.0).is_err());
        let bad = IntegratorConfig { rtol: 0.0, ..cfg };
        assert!(integrate(&state, &set, 32, 1.0, &bad, &[]).is_err());
    }

    #[test]
    fn max_steps_reports_last_state() {
        let set = shear();
        let z0 = project_initial(&InitialCondition::two_cosines(), 2, &set).unwrap();
        let state = ReferenceState::new(z0, 0.01).unwrap();
        let cfg = IntegratorConfig { max_steps: 20, ..Default::default() };
        match integrate(&state, &set, 32, 1.0, &cfg, &[]) {
            Err(Error::IntegrationFailure { run, .. }) => {
                assert_eq!(run.accepted, 20);
                assert!(run.t > 0.0);
                assert!((run.last_state.at([1, 0]).norm()) > 0.0);
            }
            other => panic!("expected integration failure, got {other:?}"),
        }
    }

    #[test]
    fn trajectory_files() {
        let set = shear();
        let z0 = project_initial(&InitialCondition::two_cosines(), 2, &set).unwrap();
        let state = ReferenceState::new(z0, 0.1).unwrap();
        let traj = integrate(&state, &set, 32, 0.05, &IntegratorConfig::default(), &[0.025]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_trajectory(dir.path(), &traj).unwrap();
        let back = crate::spectral::snapshot::read_snapshot(dir.path().join("z_t0.025.spec")).unwrap();
        let crate::spectral::snapshot::Snapshot::Slice(back) = back.snapshot else { panic!("wrong kind") };
        assert_eq!(back.t(), 0.025);
        assert_eq!(back.coeffs(), traj.snapshots[1].coeffs());
        let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(summary.starts_with("accepted="));
    }
}
