//! Discrepancy norms between the reference solution and the sliced limit
//! profile, epsilon sweeps, P-tail studies and heatmap export.

use crate::coefficients::{fast_phase, CoefficientSet};
use crate::error::{Error, Result};
use crate::limit_solver::{default_quadrature, solve_profile, GaugeSpec};
use crate::reference_solver::{
    integrate, project_initial, InitialCondition, IntegratorConfig, ReferenceState,
};
use crate::spectral::{eval_on_grid, slice_theta, GridField, GridSpec, SpectralField2};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

/// Mean-normalized discrepancy norms on a grid.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

pub fn error_norms(a: &GridField, b: &GridField) -> Result<Norms> {
    if a.n() != b.n() {
        return Err(Error::ShapeMismatch {
            left: a.n(),
            right: b.n(),
        });
    }
    let count = a.values().len() as f64;
    let mut norms = Norms::default();
    let mut sq = 0.0;
    for (x, y) in a.values().iter().zip(b.values()) {
        let d = (x - y).abs();
        norms.l1 += d;
        sq += d * d;
        norms.linf = norms.linf.max(d);
    }
    norms.l1 /= count;
    norms.l2 = (sq / count).sqrt();
    Ok(norms)
}

/// Gauge for the limit profile in comparisons.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Gauge {
    /// The spatial mean of the initial seabed, which the reference conserves.
    #[default]
    MeanOfInitial,
    Value(f64),
}

impl Gauge {
    pub fn resolve(self, z0: &SpectralField2) -> GaugeSpec {
        match self {
            Gauge::MeanOfInitial => GaugeSpec::real(z0.at([0, 0]).re),
            Gauge::Value(v) => GaugeSpec::real(v),
        }
    }
}

/// Discretization settings shared by comparisons and sweeps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompareOptions {
    /// Quadrature points per axis; `None` means `default_quadrature(P)`.
    pub nq: Option<usize>,
    pub grid: GridSpec,
    pub integrator: IntegratorConfig,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            nq: None,
            grid: GridSpec::default(),
            integrator: IntegratorConfig::default(),
        }
    }
}

impl CompareOptions {
    pub fn quadrature(&self, order: usize) -> usize {
        self.nq.unwrap_or_else(|| default_quadrature(order))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub epsilon: f64,
    pub order: usize,
    pub t: f64,
    pub norms: Norms,
    /// Wall time of the reference run plus this row's limit solve.
    pub runtime_s: f64,
    /// Accepted steps of the reference run.
    pub steps: usize,
    pub rejected: usize,
    pub error: Option<String>,
}

impl ErrorReport {
    fn failed(epsilon: f64, order: usize, t: f64, runtime_s: f64, err: &Error) -> Self {
        ErrorReport {
            epsilon,
            order,
            t,
            norms: Norms {
                l1: f64::NAN,
                l2: f64::NAN,
                linf: f64::NAN,
            },
            runtime_s,
            steps: 0,
            rejected: 0,
            error: Some(err.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn csv_row(&self) -> String {
        let head = format!("{},{},{}", self.epsilon, self.order, self.t);
        match &self.error {
            None => format!(
                "{head},{:e},{:e},{:e},{:.3},{}",
                self.norms.l1, self.norms.l2, self.norms.linf, self.runtime_s, self.steps
            ),
            Some(msg) => format!(
                "{head},,,,{:.3},{},error={}",
                self.runtime_s,
                self.steps,
                msg.replace([',', '\n'], ";")
            ),
        }
    }
}

pub const CSV_COLUMNS: &str = "epsilon,P,t,l1,l2,linf,runtime_s,steps";

/// One reference run for `(epsilon, P)` compared with the limit profile at
/// every time in `times`. Failures become error rows.
pub fn compare_times(
    set: &CoefficientSet,
    epsilon: f64,
    order: usize,
    times: &[f64],
    z0: &InitialCondition,
    gauge: Gauge,
    opts: &CompareOptions,
) -> Vec<ErrorReport> {
    let start = Instant::now();
    match compare_run(set, epsilon, order, times, z0, gauge, opts, start) {
        Ok(rows) => rows,
        Err(e) => {
            log::warn!("comparison eps={epsilon} P={order} failed: {e}");
            let secs = start.elapsed().as_secs_f64();
            times
                .iter()
                .map(|&t| ErrorReport::failed(epsilon, order, t, secs, &e))
                .collect()
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn compare_run(
    set: &CoefficientSet,
    epsilon: f64,
    order: usize,
    times: &[f64],
    z0: &InitialCondition,
    gauge: Gauge,
    opts: &CompareOptions,
    start: Instant,
) -> Result<Vec<ErrorReport>> {
    opts.grid.check_order(order)?;
    if times.is_empty() {
        return Err(Error::param("no comparison times given"));
    }
    if let Some(&bad) = times.iter().find(|&&t| !(t >= 0.0 && t.is_finite())) {
        return Err(Error::param(format!("comparison time {bad} must be finite and >= 0")));
    }
    let nq = opts.quadrature(order);
    let init = project_initial(z0, order, set)?;
    let state = ReferenceState::new(init.clone(), epsilon)?;
    let t_end = times.iter().cloned().fold(0.0, f64::max);
    let outputs: Vec<f64> = times.iter().cloned().filter(|&t| t > 0.0).collect();
    let traj = if t_end > 0.0 {
        Some(integrate(&state, set, nq, t_end, &opts.integrator, &outputs)?)
    } else {
        None
    };
    let run_secs = start.elapsed().as_secs_f64();
    let (steps, rejected) = traj
        .as_ref()
        .map_or((0, 0), |tr| (tr.stats.accepted, tr.stats.rejected));
    let spec = gauge.resolve(&init);
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let row_start = Instant::now();
        let row = (|| -> Result<ErrorReport> {
            let z_ref = match &traj {
                Some(tr) if t > 0.0 => tr
                    .at(t)
                    .ok_or_else(|| Error::param(format!("no snapshot at t={t}")))?,
                _ => &init,
            };
            let limit = solve_profile(set, t, order, nq, spec)?;
            let slice = slice_theta(&limit.profile, fast_phase(epsilon, t)?);
            let norms = error_norms(
                &eval_on_grid(z_ref, &opts.grid)?,
                &eval_on_grid(&slice, &opts.grid)?,
            )?;
            Ok(ErrorReport {
                epsilon,
                order,
                t,
                norms,
                runtime_s: run_secs + row_start.elapsed().as_secs_f64(),
                steps,
                rejected,
                error: None,
            })
        })();
        rows.push(row.unwrap_or_else(|e| {
            ErrorReport::failed(
                epsilon,
                order,
                t,
                run_secs + row_start.elapsed().as_secs_f64(),
                &e,
            )
        }));
    }
    Ok(rows)
}

/// `|z^eps_P(t) - Z_P(t, t/eps, .)|` on the evaluation grid.
pub fn compare_at(
    set: &CoefficientSet,
    epsilon: f64,
    order: usize,
    t: f64,
    z0: &InitialCondition,
    gauge: Gauge,
    opts: &CompareOptions,
) -> ErrorReport {
    compare_times(set, epsilon, order, &[t], z0, gauge, opts)
        .pop()
        .expect("one row per time")
}

#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub epsilons: Vec<f64>,
    pub orders: Vec<usize>,
    pub times: Vec<f64>,
    pub initial: InitialCondition,
    pub gauge: Gauge,
    pub options: CompareOptions,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() || self.orders.is_empty() || self.times.is_empty() {
            return Err(Error::param("sweep needs at least one epsilon, P and time"));
        }
        if let Some(e) = self.epsilons.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::param(format!("sweep epsilon {e} must be positive")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<ErrorReport>,
}

impl SweepReport {
    /// `#` lines from `meta`, the column header, then one line per row.
    pub fn to_csv(&self, meta: &[String]) -> String {
        let mut out = String::new();
        for m in meta {
            let _ = writeln!(out, "# {m}");
        }
        let _ = writeln!(out, "{CSV_COLUMNS}");
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.csv_row());
        }
        out
    }

    pub fn find(&self, epsilon: f64, order: usize, t: f64) -> Option<&ErrorReport> {
        self.rows
            .iter()
            .find(|r| r.epsilon == epsilon && r.order == order && r.t == t)
    }
}

/// Rows ordered by epsilon, then P, then t, in plan order.
pub fn epsilon_sweep(set: &CoefficientSet, plan: &SweepPlan) -> Result<SweepReport> {
    plan.validate()?;
    let mut rows = Vec::new();
    for &eps in &plan.epsilons {
        for &order in &plan.orders {
            log::info!("sweep eps={eps} P={order}");
            rows.extend(compare_times(
                set,
                eps,
                order,
                &plan.times,
                &plan.initial,
                plan.gauge,
                &plan.options,
            ));
        }
    }
    Ok(SweepReport { rows })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailRow {
    pub order: usize,
    pub rel_l2_gap: f64,
}

/// `|Z_P - Z_Pref|_2 / |Z_Pref|_2` with `Pref` the largest order. The norm
/// is taken on the `(theta, x)` grid through discrete Parseval, which is
/// exact for any grid finer than `2 Pref + 1` points per axis.
pub fn p_tail_study(
    set: &CoefficientSet,
    t: f64,
    orders: &[usize],
    nq: Option<usize>,
    gauge: f64,
) -> Result<Vec<TailRow>> {
    if orders.is_empty() || orders.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("P list must be non-empty and strictly increasing"));
    }
    let p_ref = *orders.last().expect("non-empty");
    let quad = |p: usize| nq.unwrap_or_else(|| default_quadrature(p));
    let reference = solve_profile(set, t, p_ref, quad(p_ref), GaugeSpec::real(gauge))?.profile;
    let ref_norm = reference.l2_norm();
    let mut rows = Vec::with_capacity(orders.len());
    for &p in orders {
        let gap = if p == p_ref {
            0.0
        } else {
            let z = solve_profile(set, t, p, quad(p), GaugeSpec::real(gauge))?.profile.resized(p_ref);
            z.combine(1.0.into(), &reference, (-1.0).into())?.l2_norm()
        };
        rows.push(TailRow {
            order: p,
            rel_l2_gap: if ref_norm > 0.0 { gap / ref_norm } else { gap },
        });
    }
    Ok(rows)
}

pub fn tail_csv(rows: &[TailRow]) -> String {
    let mut out = String::from("P,rel_l2_gap\n");
    for r in rows {
        let _ = writeln!(out, "{},{:e}", r.order, r.rel_l2_gap);
    }
    out
}

/// Plain graymap (P2) with 255 levels, linear between the field's extremes.
/// Row `q1 = 0` is written first.
pub fn to_pgm(field: &GridField) -> String {
    let n = field.n();
    let (lo, hi) = field
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let mut out = format!("P2\n# min={lo:e} max={hi:e}\n{n} {n}\n255\n");
    for q1 in 0..n {
        let line: Vec<String> = (0..n)
            .map(|q2| {
                let v = field.get(q1, q2);
                let level = if span > 0.0 { ((v - lo) / span * 255.0).round() } else { 0.0 };
                (level as u8).to_string()
            })
            .collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

/// One line per `q1`, comma separated over `q2`.
pub fn to_grid_csv(field: &GridField) -> String {
    let n = field.n();
    let mut out = format!("# N={n}\n");
    for q1 in 0..n {
        let line: Vec<String> = (0..n).map(|q2| format!("{:e}", field.get(q1, q2))).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

/// Writes `<stem>.pgm` and `<stem>.csv`.
pub fn write_heatmap(field: &GridField, stem: impl AsRef<Path>) -> Result<()> {
    let stem = stem.as_ref();
    std::fs::write(stem.with_extension("pgm"), to_pgm(field))?;
    std::fs::write(stem.with_extension("csv"), to_grid_csv(field))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{BedloadLaws, VelocityField, WaterHeight};
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn norms_of_identical_and_offset_fields() {
        let a = GridField::from_fn(16, |x1, x2| (2.0 * PI * x1).sin() * x2);
        assert_eq!(error_norms(&a, &a).unwrap(), Norms::default());
        let b = GridField::from_fn(16, |x1, x2| (2.0 * PI * x1).sin() * x2 + 1.0);
        let n = error_norms(&a, &b).unwrap();
        for v in [n.l1, n.l2, n.linf] {
            assert!((v - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn norms_of_a_cosine() {
        let a = GridField::from_fn(64, |x1, _| (2.0 * PI * x1).cos());
        let z = GridField::from_fn(64, |_, _| 0.0);
        let n = error_norms(&a, &z).unwrap();
        // mean of |cos| is 2/pi; the 64-point rule is exact to O(1/N^2)
        assert!((n.l1 - 2.0 / PI).abs() <= 1e-3);
        assert!((n.l2 - 0.5f64.sqrt()).abs() <= 1e-14);
        assert!((n.linf - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn norms_reject_mismatched_grids() {
        let a = GridField::from_fn(8, |_, _| 0.0);
        let b = GridField::from_fn(16, |_, _| 0.0);
        assert!(matches!(error_norms(&a, &b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn error_rows_keep_the_columns() {
        let r = ErrorReport::failed(0.1, 4, 1.0, 0.5, &Error::param("bad, worse"));
        let row = r.csv_row();
        assert_eq!(row, "0.1,4,1,,,,0.500,0,error=invalid parameter: bad; worse");
        assert_eq!(row.split(',').count(), CSV_COLUMNS.split(',').count() + 1);
    }

    #[test]
    fn tail_of_a_single_order_is_zero() {
        let set = CoefficientSet::new(BedloadLaws::cubic(), VelocityField::ShearSine, WaterHeight::Zero);
        let rows = p_tail_study(&set, 1.0, &[2], Some(32), 0.0).unwrap();
        assert_eq!(rows, vec![TailRow { order: 2, rel_l2_gap: 0.0 }]);
        assert!(p_tail_study(&set, 1.0, &[4, 2], None, 0.0).is_err());
    }

    #[test]
    fn tail_vanishes_for_band_limited_data() {
        // |U| = 1 so A = 1, and div C = -2 pi sin(2 pi (theta + x1)).
        let set = CoefficientSet::new(
            BedloadLaws::cubic(),
            VelocityField::Custom(Arc::new(|_, th, x| {
                let phi = 2.0 * PI * (th + x[0]);
                [phi.cos(), phi.sin()]
            })),
            WaterHeight::Zero,
        );
        let rows = p_tail_study(&set, 0.0, &[1, 2, 3], Some(32), 0.0).unwrap();
        assert!(rows.iter().all(|r| r.rel_l2_gap <= 1e-12), "{rows:?}");
    }

    #[test]
    fn pgm_scales_to_the_extremes() {
        let f = GridField::new(2, vec![0.0, 1.0, 0.5, 0.25]).unwrap();
        let pgm = to_pgm(&f);
        let body: Vec<&str> = pgm.lines().skip(4).collect();
        assert!(pgm.starts_with("P2\n"));
        assert_eq!(body, vec!["0 255", "128 64"]);
        let flat = to_pgm(&GridField::new(2, vec![3.0; 4]).unwrap());
        assert!(flat.ends_with("0 0\n0 0\n"));
        assert_eq!(to_grid_csv(&f), "# N=2\n0e0,1e0\n5e-1,2.5e-1\n");
    }
}
