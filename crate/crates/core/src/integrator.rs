//! Dormand–Prince 5(4) with FSAL, a PI step controller, an external step
//! cap and cubic Hermite dense output.

use crate::error::{Error, Result};
use crate::spectral::Complex;

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn eval(&mut self, t: f64, y: &[Complex], dy: &mut [Complex]) -> Result<()>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    /// Hard upper bound on every step, e.g. from explicit stability.
    pub h_cap: f64,
    pub max_steps: usize,
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rtol > 0.0
            && self.atol > 0.0
            && self.h_max > 0.0
            && self.h_cap > 0.0
            && self.max_steps > 0
            && self.h_init.is_none_or(|h| h > 0.0);
        if !ok {
            return Err(Error::param(format!("invalid step control {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub h_min: f64,
    pub h_max: f64,
}

impl IntegrationStats {
    pub fn summary(&self) -> String {
        format!(
            "accepted={} rejected={} h_min={:e} h_max={:e}",
            self.accepted, self.rejected, self.h_min, self.h_max
        )
    }

    fn record(&mut self, h: f64) {
        if self.accepted == 0 {
            self.h_min = h;
            self.h_max = h;
        } else {
            self.h_min = self.h_min.min(h);
            self.h_max = self.h_max.max(h);
        }
        self.accepted += 1;
    }
}

#[derive(Debug)]
pub enum HaltReason {
    MaxSteps,
    NonFinite,
    StepUnderflow,
    System(Error),
}

/// Why and where an integration stopped early.
#[derive(Debug)]
pub struct Halt {
    pub reason: HaltReason,
    pub t: f64,
    pub y: Vec<Complex>,
    pub stats: IntegrationStats,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - 0.75 * BETA;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

fn combine(y: &[Complex], h: f64, coeffs: &[f64], k: &[Vec<Complex>], out: &mut [Complex]) {
    out.copy_from_slice(y);
    for (&a, ki) in coeffs.iter().zip(k) {
        if a == 0.0 {
            continue;
        }
        let ha = h * a;
        for (o, &v) in out.iter_mut().zip(ki) {
            *o += v * ha;
        }
    }
}

fn hermite(y0: &[Complex], f0: &[Complex], y1: &[Complex], f1: &[Complex], h: f64, s: f64) -> Vec<Complex> {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = (s3 - 2.0 * s2 + s) * h;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = (s3 - s2) * h;
    (0..y0.len())
        .map(|i| y0[i] * h00 + f0[i] * h10 + y1[i] * h01 + f1[i] * h11)
        .collect()
}

/// Integrates from `t0` to `t_end`, calling `output` at each of the sorted
/// `outputs` in `(t0, t_end]`. The state at `t_end` is returned.
pub fn dopri5<S: OdeSystem>(
    sys: &mut S,
    t0: f64,
    y0: &[Complex],
    t_end: f64,
    outputs: &[f64],
    ctl: &StepControl,
    mut output: impl FnMut(f64, &[Complex]),
) -> std::result::Result<(Vec<Complex>, IntegrationStats), Halt> {
    let n = y0.len();
    let mut stats = IntegrationStats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let halt = |reason, t, y: &[Complex], stats| Halt {
        reason,
        t,
        y: y.to_vec(),
        stats,
    };
    let zero = Complex::new(0.0, 0.0);
    let mut k: Vec<Vec<Complex>> = vec![vec![zero; n]; 7];
    let mut stage = vec![zero; n];
    let mut y_new = vec![zero; n];
    if let Err(e) = sys.eval(t, &y, &mut k[0]) {
        return Err(halt(HaltReason::System(e), t, &y, stats));
    }
    let mut next_out = outputs.iter().position(|&o| o > t0).unwrap_or(outputs.len());
    let span = t_end - t0;
    if span <= 0.0 {
        return Ok((y, stats));
    }

    let h_limit = ctl.h_max.min(ctl.h_cap);
    let mut h = match ctl.h_init {
        Some(h) => h,
        None => {
            let wnorm = |v: &[Complex]| {
                (v.iter()
                    .zip(&y)
                    .map(|(a, b)| (a.norm() / (ctl.atol + ctl.rtol * b.norm())).powi(2))
                    .sum::<f64>()
                    / n.max(1) as f64)
                    .sqrt()
            };
            let d0 = wnorm(&y);
            let d1 = wnorm(&k[0]);
            if d0 < 1e-5 || d1 < 1e-5 {
                1e-6 * span
            } else {
                0.01 * d0 / d1
            }
        }
    }
    .min(h_limit)
    .min(span);

    let mut err_old: f64 = 1e-4;
    let mut last_rejected = false;
    let mut steps = 0usize;
    loop {
        if steps >= ctl.max_steps {
            return Err(halt(HaltReason::MaxSteps, t, &y, stats));
        }
        steps += 1;
        let last = t + h >= t_end - 1e-14 * t_end.abs().max(1.0);
        if last {
            h = t_end - t;
        }
        if h <= 1e-14 * t.abs().max(span) {
            return Err(halt(HaltReason::StepUnderflow, t, &y, stats));
        }
        let rows: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
        for (s, a) in rows.iter().enumerate() {
            combine(&y, h, a, &k[..=s], &mut stage);
            let (done, rest) = k.split_at_mut(s + 1);
            let _ = done;
            if let Err(e) = sys.eval(t + C[s + 1] * h, &stage, &mut rest[0]) {
                return Err(halt(HaltReason::System(e), t, &y, stats));
            }
        }
        combine(&y, h, &B, &k[..6], &mut y_new);
        let t_new = if last { t_end } else { t + h };
        {
            let (_, rest) = k.split_at_mut(6);
            if let Err(e) = sys.eval(t_new, &y_new, &mut rest[0]) {
                return Err(halt(HaltReason::System(e), t, &y, stats));
            }
        }
        let mut acc = 0.0;
        for i in 0..n {
            let mut e = zero;
            for (s, &es) in E.iter().enumerate() {
                if es != 0.0 {
                    e += k[s][i] * es;
                }
            }
            let sc = ctl.atol + ctl.rtol * y[i].norm().max(y_new[i].norm());
            acc += (e.norm() * h / sc).powi(2);
        }
        let err = (acc / n.max(1) as f64).sqrt();
        if !err.is_finite() || y_new.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            if err.is_finite() || h <= 1e-14 * span {
                return Err(halt(HaltReason::NonFinite, t, &y, stats));
            }
            // try again with a much smaller step before giving up
            stats.rejected += 1;
            h *= FAC_MIN;
            last_rejected = true;
            continue;
        }

        let fac11 = err.powf(EXPO);
        if err <= 1.0 {
            let fac = (fac11 / err_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            err_old = err.max(1e-4);
            stats.record(h);
            while next_out < outputs.len() && outputs[next_out] <= t_new {
                let to = outputs[next_out];
                if to == t_new {
                    output(to, &y_new);
                } else {
                    let s = (to - t) / h;
                    output(to, &hermite(&y, &k[0], &y_new, &k[6], h, s));
                }
                next_out += 1;
            }
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            if last {
                return Ok((y, stats));
            }
            h = h_new.min(h_limit);
            last_rejected = false;
        } else {
            stats.rejected += 1;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay {
        rates: Vec<Complex>,
        evals: usize,
    }

    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            self.rates.len()
        }
        fn eval(&mut self, _t: f64, y: &[Complex], dy: &mut [Complex]) -> Result<()> {
            self.evals += 1;
            for ((d, &v), &r) in dy.iter_mut().zip(y).zip(&self.rates) {
                *d = r * v;
            }
            Ok(())
        }
    }

    struct Forced;

    impl OdeSystem for Forced {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&mut self, t: f64, _y: &[Complex], dy: &mut [Complex]) -> Result<()> {
            dy[0] = Complex::new((10.0 * t).cos(), 0.0);
            Ok(())
        }
    }

    fn ctl(rtol: f64) -> StepControl {
        StepControl {
            rtol,
            atol: rtol * 1e-2,
            h_init: None,
            h_max: f64::INFINITY,
            h_cap: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }

    #[test]
    fn exponential_decay_and_rotation() {
        let mut sys = Decay {
            rates: vec![Complex::new(-3.0, 0.0), Complex::new(-0.5, 4.0)],
            evals: 0,
        };
        let y0 = [Complex::new(1.0, 0.0), Complex::new(0.5, -0.2)];
        let (y, stats) = dopri5(&mut sys, 0.0, &y0, 2.0, &[], &ctl(1e-10), |_, _| {}).unwrap();
        for i in 0..2 {
            let exact = y0[i] * (sys.rates[i] * 2.0).exp();
            assert!((y[i] - exact).norm() <= 1e-8 * y0[i].norm());
        }
        assert_eq!(sys.evals, 1 + 6 * (stats.accepted + stats.rejected));
    }

    #[test]
    fn dense_output_hits_requested_times() {
        let mut seen = vec![];
        let outs = [0.1, 0.35, 1.0, 1.5];
        let (y, _) = dopri5(&mut Forced, 0.0, &[Complex::new(0.0, 0.0)], 1.5, &outs, &ctl(1e-10), |t, y| {
            seen.push((t, y[0].re))
        })
        .unwrap();
        assert_eq!(seen.iter().map(|s| s.0).collect::<Vec<_>>(), outs);
        for (t, v) in seen {
            assert!((v - (10.0 * t).sin() / 10.0).abs() <= 1e-6, "t={t}");
        }
        assert!((y[0].re - (15.0f64).sin() / 10.0).abs() <= 1e-9);
    }

    #[test]
    fn step_cap_is_respected() {
        let mut c = ctl(1e-6);
        c.h_cap = 1e-3;
        let (_, stats) = dopri5(&mut Forced, 0.0, &[Complex::new(0.0, 0.0)], 0.5, &[], &c, |_, _| {}).unwrap();
        assert!(stats.h_max <= 1e-3);
        assert!(stats.accepted >= 500);
    }

    #[test]
    fn max_steps_halts_with_state() {
        let mut c = ctl(1e-6);
        c.h_cap = 1e-3;
        c.max_steps = 10;
        let err = dopri5(&mut Forced, 0.0, &[Complex::new(0.0, 0.0)], 1.0, &[], &c, |_, _| {}).unwrap_err();
        assert!(matches!(err.reason, HaltReason::MaxSteps));
        assert!(err.t > 0.0 && err.t < 1.0);
        assert_eq!(err.stats.accepted, 10);
    }

    #[test]
    fn blow_up_is_detected() {
        let mut sys = Decay {
            rates: vec![Complex::new(800.0, 0.0)],
            evals: 0,
        };
        let r = dopri5(&mut sys, 0.0, &[Complex::new(1.0, 0.0)], 10.0, &[], &ctl(1e-6), |_, _| {});
        let halt = r.unwrap_err();
        assert!(matches!(halt.reason, HaltReason::NonFinite | HaltReason::MaxSteps | HaltReason::StepUnderflow));
    }
}
