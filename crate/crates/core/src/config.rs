//! Run configuration: TOML with fixed sections, validated before any solver
//! work. Unknown keys are rejected.

use crate::analysis::{CompareOptions, Gauge, SweepPlan};
use crate::coefficients::{BedloadLaws, CoefficientSet, TransportLaw, VelocityField, WaterHeight};
use crate::error::{Error, Result};
use crate::reference_solver::{InitialCondition, IntegratorConfig};
use crate::spectral::GridSpec;
use evalexpr::{ContextWithMutableVariables, HashMapContext, Node, Value};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityKind {
    ShearSine,
    TidalPiecewise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    pub velocity: VelocityKind,
    pub u_thr: f64,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection {
            velocity: VelocityKind::ShearSine,
            u_thr: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LawSection {
    /// Only `cubic` (`g(u) = u^3`) is available from configuration files.
    pub law: String,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for LawSection {
    fn default() -> Self {
        LawSection {
            law: "cubic".into(),
            a: 1.0,
            b: 0.0,
            c: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeightSection {
    /// `zero` or `constant`
    pub kind: String,
    pub value: f64,
}

impl Default for HeightSection {
    fn default() -> Self {
        HeightSection {
            kind: "zero".into(),
            value: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationSection {
    pub order: usize,
    /// Extra orders for sweeps; empty means `[order]`.
    pub orders: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nq: Option<usize>,
    pub grid: usize,
}

impl Default for DiscretizationSection {
    fn default() -> Self {
        DiscretizationSection {
            order: 4,
            orders: Vec::new(),
            nq: None,
            grid: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub epsilon: f64,
    /// Sweep list; empty means `[epsilon]`.
    pub epsilons: Vec<f64>,
    pub t_end: f64,
    /// Output and comparison times; empty means `[t_end]`.
    pub times: Vec<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            epsilon: 0.01,
            epsilons: Vec::new(),
            t_end: 1.0,
            times: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    /// `cosines`, `constant`, `well_prepared` or `expression`
    pub kind: String,
    /// `[amplitude, m, n]` triples for `cosines`.
    pub terms: Vec<[f64; 3]>,
    pub value: f64,
    /// Expression in `x1`, `x2` (and `pi`) for `expression`.
    pub expression: String,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            kind: "cosines".into(),
            terms: vec![[1.0, 1.0, 0.0], [1.0, 2.0, 0.0]],
            value: 0.0,
            expression: String::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaugeSection {
    /// `mean_of_initial` or `value`
    pub mode: String,
    pub value: f64,
}

impl Default for GaugeSection {
    fn default() -> Self {
        GaugeSection {
            mode: "mean_of_initial".into(),
            value: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub rtol: f64,
    pub atol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_init: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_max: Option<f64>,
    pub safety: f64,
    pub max_steps: usize,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let d = IntegratorConfig::default();
        IntegratorSection {
            rtol: d.rtol,
            atol: d.atol,
            h_init: None,
            h_max: None,
            safety: d.safety,
            max_steps: d.max_steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub n: usize,
    pub dtheta: f64,
    pub tol_period: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            n: 64,
            dtheta: 1.0 / 512.0,
            tol_period: 1e-10,
        }
    }
}

/// Thresholds for `compare --assert`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssertSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linf_max: Option<f64>,
    /// Relative L2 bound for `--oracle` checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_rel_l2_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub flow: FlowSection,
    pub laws: LawSection,
    pub height: HeightSection,
    pub discretization: DiscretizationSection,
    pub run: RunSection,
    pub initial: InitialSection,
    pub gauge: GaugeSection,
    pub integrator: IntegratorSection,
    pub oracle: OracleSection,
    #[serde(rename = "assert")]
    pub thresholds: AssertSection,
    pub output: OutputSection,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Parses a `--set` value as a TOML value, falling back to a bare string.
fn parse_override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{assignment}` is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(config_err(format!("bad override key `{key}`")));
    }
    let mut node = table;
    for part in &path[..path.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("override `{key}`: `{part}` is not a section")))?;
    }
    node.insert(path[path.len() - 1].to_string(), parse_override_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    /// Parses `text`, applies `key=value` overrides (dotted keys) and validates.
    pub fn parse_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| config_err(format!("{e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = table.try_into().map_err(|e| config_err(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with(text, &[])
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_with(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the normalized configuration.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_toml().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.coefficient_set()?;
        self.initial_condition()?;
        self.gauge()?;
        self.integrator()?.validate().map_err(|e| config_err(e.to_string()))?;
        let d = &self.discretization;
        let grid = GridSpec::new(d.grid).map_err(|e| config_err(e.to_string()))?;
        for &p in self.orders().iter() {
            grid.check_order(p).map_err(|e| config_err(e.to_string()))?;
            if let Some(nq) = d.nq {
                if nq < 4 * p + 2 {
                    return Err(config_err(format!("nq = {nq} is below 4P+2 for P = {p}")));
                }
            }
        }
        for &e in self.epsilons().iter() {
            if !(e > 0.0 && e.is_finite()) {
                return Err(config_err(format!("epsilon must be positive, got {e}")));
            }
        }
        let r = &self.run;
        if !(r.t_end > 0.0 && r.t_end.is_finite()) {
            return Err(config_err(format!("t_end must be positive, got {}", r.t_end)));
        }
        if let Some(t) = self.times().iter().find(|&&t| !(t >= 0.0 && t <= r.t_end)) {
            return Err(config_err(format!("time {t} outside [0, t_end]")));
        }
        let o = &self.oracle;
        if o.n < 32 || !(o.dtheta > 0.0 && o.dtheta <= 1.0 / 256.0) || !(o.tol_period > 0.0) {
            return Err(config_err("oracle needs n >= 32, 0 < dtheta <= 1/256, tol_period > 0"));
        }
        Ok(())
    }

    pub fn coefficient_set(&self) -> Result<CoefficientSet> {
        let l = &self.laws;
        let law = match l.law.as_str() {
            "cubic" => TransportLaw::Cubic,
            other => return Err(config_err(format!("unknown law `{other}` (expected cubic)"))),
        };
        let laws = BedloadLaws::new(l.a, l.b, l.c, law.clone(), law)
            .map_err(|e| config_err(e.to_string()))?;
        let velocity = match self.flow.velocity {
            VelocityKind::ShearSine => VelocityField::ShearSine,
            VelocityKind::TidalPiecewise => {
                VelocityField::tidal(self.flow.u_thr).map_err(|e| config_err(e.to_string()))?
            }
        };
        let height = match self.height.kind.as_str() {
            "zero" => WaterHeight::Zero,
            "constant" if self.height.value.is_finite() => WaterHeight::Constant(self.height.value),
            other => return Err(config_err(format!("bad water height `{other}`"))),
        };
        Ok(CoefficientSet::new(laws, velocity, height))
    }

    pub fn initial_condition(&self) -> Result<InitialCondition> {
        let i = &self.initial;
        let nq = self.quadrature(self.discretization.order);
        match i.kind.as_str() {
            "cosines" => {
                let mut terms = Vec::with_capacity(i.terms.len());
                for &[amp, m, n] in &i.terms {
                    if m.fract() != 0.0 || n.fract() != 0.0 || !amp.is_finite() {
                        return Err(config_err(format!("bad cosine term [{amp}, {m}, {n}]")));
                    }
                    terms.push((amp, [m as i32, n as i32]));
                }
                Ok(InitialCondition::Cosines(terms))
            }
            "constant" if i.value.is_finite() => Ok(InitialCondition::Constant(i.value)),
            "well_prepared" => Ok(InitialCondition::WellPrepared { nq }),
            "expression" => Ok(InitialCondition::Sampler {
                f: expression_sampler(&i.expression)?,
                nq: nq.max(64),
            }),
            other => Err(config_err(format!("bad initial condition `{other}`"))),
        }
    }

    pub fn gauge(&self) -> Result<Gauge> {
        match self.gauge.mode.as_str() {
            "mean_of_initial" => Ok(Gauge::MeanOfInitial),
            "value" if self.gauge.value.is_finite() => Ok(Gauge::Value(self.gauge.value)),
            other => Err(config_err(format!("bad gauge mode `{other}`"))),
        }
    }

    pub fn integrator(&self) -> Result<IntegratorConfig> {
        let s = &self.integrator;
        let cfg = IntegratorConfig {
            rtol: s.rtol,
            atol: s.atol,
            h_init: s.h_init,
            h_max: s.h_max.unwrap_or(f64::INFINITY),
            safety: s.safety,
            max_steps: s.max_steps,
        };
        Ok(cfg)
    }

    pub fn quadrature(&self, order: usize) -> usize {
        self.discretization
            .nq
            .unwrap_or_else(|| crate::limit_solver::default_quadrature(order))
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.discretization.grid).expect("validated")
    }

    pub fn orders(&self) -> Vec<usize> {
        let d = &self.discretization;
        if d.orders.is_empty() {
            vec![d.order]
        } else {
            d.orders.clone()
        }
    }

    pub fn epsilons(&self) -> Vec<f64> {
        if self.run.epsilons.is_empty() {
            vec![self.run.epsilon]
        } else {
            self.run.epsilons.clone()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        if self.run.times.is_empty() {
            vec![self.run.t_end]
        } else {
            self.run.times.clone()
        }
    }

    pub fn compare_options(&self) -> Result<CompareOptions> {
        Ok(CompareOptions {
            nq: self.discretization.nq,
            grid: self.grid(),
            integrator: self.integrator()?,
        })
    }

    pub fn sweep_plan(&self) -> Result<SweepPlan> {
        Ok(SweepPlan {
            epsilons: self.epsilons(),
            orders: self.orders(),
            times: self.times(),
            initial: self.initial_condition()?,
            gauge: self.gauge()?,
            options: self.compare_options()?,
        })
    }
}

/// Real function of `x1`, `x2` from an arithmetic expression; `pi` and the
/// `math::` functions are available.
pub fn expression_sampler(expr: &str) -> Result<Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>> {
    let node: Node = evalexpr::build_operator_tree(expr)
        .map_err(|e| config_err(format!("expression `{expr}`: {e}")))?;
    let eval = move |x1: f64, x2: f64| -> std::result::Result<f64, String> {
        let mut ctx = HashMapContext::new();
        for (name, v) in [("x1", x1), ("x2", x2), ("pi", std::f64::consts::PI)] {
            ctx.set_value(name.into(), Value::Float(v)).map_err(|e| e.to_string())?;
        }
        match node.eval_with_context(&ctx).map_err(|e| e.to_string())? {
            Value::Float(v) => Ok(v),
            Value::Int(v) => Ok(v as f64),
            other => Err(format!("expression gave {other:?}")),
        }
    };
    // Probe once so bad variables surface as configuration errors.
    eval(0.25, 0.5).map_err(|e| config_err(format!("expression `{expr}`: {e}")))?;
    Ok(Arc::new(move |x1, x2| eval(x1, x2).unwrap_or(f64::NAN)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.times(), vec![1.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::parse("[run]\nepsilonn = 0.1\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("[nope]\n"), Err(Error::Config(_))));
    }

    #[test]
    fn overrides_apply_after_parsing() {
        let cfg = RunConfig::parse_with(
            "[run]\nepsilon = 0.1\n",
            &[
                "run.epsilon=0.02".into(),
                "flow.velocity=tidal_piecewise".into(),
                "run.times=[0.5, 1.0]".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.run.epsilon, 0.02);
        assert_eq!(cfg.flow.velocity, VelocityKind::TidalPiecewise);
        assert_eq!(cfg.times(), vec![0.5, 1.0]);
        assert!(RunConfig::parse_with("", &["noequals".into()]).is_err());
        assert!(RunConfig::parse_with("", &["run.bogus=1".into()]).is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for text in [
            "[run]\nepsilon = -1.0\n",
            "[laws]\na = 0.0\n",
            "[discretization]\norder = 40\n",
            "[discretization]\nnq = 8\n",
            "[run]\ntimes = [2.0]\n",
            "[initial]\nkind = \"expression\"\nexpression = \"y + 1\"\n",
            "[gauge]\nmode = \"median\"\n",
        ] {
            assert!(matches!(RunConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn round_trip_is_idempotent() {
        let text = "[flow]\nvelocity = \"tidal_piecewise\"\nu_thr = 0.8\n[run]\nepsilons = [0.1, 0.005]\n";
        let once = RunConfig::parse(text).unwrap().to_toml();
        let twice = RunConfig::parse(&once).unwrap().to_toml();
        assert_eq!(once, twice);
        assert_eq!(RunConfig::parse(&once).unwrap().digest(), RunConfig::parse(text).unwrap().digest());
    }

    #[test]
    fn expressions_sample() {
        let f = expression_sampler("math::cos(2 * pi * x1) + x2").unwrap();
        assert!((f(0.0, 0.5) - 1.5).abs() <= 1e-15);
        assert!((f(0.5, 0.0) + 1.0).abs() <= 1e-15);
    }
}
