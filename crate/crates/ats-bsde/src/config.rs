//! TOML experiment configuration and its resolution into solver types.
//!
//! Every quantity the experiments leave open (horizon, envelope tolerance,
//! resolution) is a required field; only the quantization layout and the
//! implicit-solver options have defaults.

use std::fs;
use std::path::Path;

use ats_core::diagnostics::{EnvelopeRegime, ReferencePolicy};
use ats_core::model::{presets, Coefficients, DriverSpec, ForwardSpec, GrowthCondition, ProblemSpec, TerminalSpec};
use ats_core::quantize::{GridPolicy, NodeSchedule, TransitionMode};
use ats_core::solver::{ImplicitOptions, SchemeKind};
use ats_core::timegrid::{BaseGrid, GridKind};
use serde::{Deserialize, Serialize};

use crate::ConfigError;

type Result<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Option<ProblemBlock>,
    pub grid: Option<GridBlock>,
    #[serde(default)]
    pub quantize: QuantizeBlock,
    pub scheme: Option<SchemeBlock>,
    pub stability: Option<StabilityBlock>,
    pub compare: Option<CompareBlock>,
    pub convergence: Option<ConvergenceBlock>,
    pub validate: Option<ValidateBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    /// `damped_cubic`, `pure_cubic` or `custom`.
    pub preset: String,
    pub horizon: Option<f64>,
    /// Terminal cap for `damped_cubic`.
    pub cap: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub driver: Option<DriverBlock>,
    pub terminal: Option<TerminalBlock>,
    pub forward: Option<ForwardBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverBlock {
    /// `cubic_damped`, `pure_cubic`, `cubic_unstable` or `cubic`.
    pub kind: String,
    pub linear: Option<f64>,
    pub cubic: Option<f64>,
    pub z_coupling: Option<f64>,
    /// Growth radius `K`.
    pub radius: Option<f64>,
    /// Growth-condition rate; defaults to the value derived for the preset.
    pub rate: Option<f64>,
    /// Output dimension `k`.
    pub k: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalBlock {
    /// `capped_square`, `square` or `zero`.
    pub kind: String,
    pub cap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardBlock {
    pub drift: Vec<f64>,
    /// Row-major `d x d`.
    pub diffusion: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub kind: String,
    pub n: Option<usize>,
    /// Terminal bound `C` of `ats_comparison`; defaults to `sup |g|`.
    pub bound: Option<f64>,
    /// Base family of `ats_refined` and `ats_trunc_terminal`.
    pub base: Option<String>,
    pub l0: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizeBlock {
    /// `analytic` or `mc`.
    pub mode: String,
    pub samples: usize,
    pub seed: u64,
    pub q: f64,
    pub width_factor: f64,
    pub drift_bound: f64,
    pub diffusion_bound: f64,
    /// `linear` (`m_i = per_step * i`) or `constant` (`m_i = m`).
    pub schedule: String,
    pub per_step: usize,
    pub m: Option<usize>,
}

impl Default for QuantizeBlock {
    fn default() -> Self {
        let p = GridPolicy::standard();
        QuantizeBlock {
            mode: "analytic".into(),
            samples: 100_000,
            seed: 0,
            q: p.q,
            width_factor: p.width_factor,
            drift_bound: p.drift_bound,
            diffusion_bound: p.diffusion_bound,
            schedule: "linear".into(),
            per_step: 1,
            m: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeBlock {
    /// `explicit_ats`, `explicit_uniform`, `implicit_uniform` or
    /// `explicit_trunc_terminal`.
    pub kind: String,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub l0: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityBlock {
    /// `one_d`, `multi` or `gmongr`; follows the grid kind when absent.
    pub regime: Option<String>,
    /// Relative allowance for quantization bias, e.g. 0.05.
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareBlock {
    /// `shift`: terminal `g + shift` against `g`; `zero`: `g` against `0`.
    pub against: String,
    pub shift: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceBlock {
    pub n_list: Vec<usize>,
    /// `average` (implicit/explicit uniform average) or `fine`.
    pub reference: String,
    pub n_ref: usize,
    #[serde(default)]
    pub sandwich: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateBlock {
    /// Driver preset to audit; the problem driver when absent.
    pub driver: Option<String>,
    pub samples: usize,
    pub box_half_width: f64,
    pub tolerance: f64,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: String,
    /// `summary`, `tables` (adds full value tables) or `chain` (adds the
    /// transition dump too).
    pub dump: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            dir: "out".into(),
            dump: "summary".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DumpLevel {
    Summary,
    Tables,
    Chain,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical TOML form; hashing this text identifies a run.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let block = self
            .problem
            .as_ref()
            .ok_or_else(|| ConfigError("missing [problem] block".into()))?;
        resolve_problem(block)
    }

    pub fn grid_kind(&self, problem: &ProblemSpec) -> Result<GridKind> {
        let g = self
            .grid
            .as_ref()
            .ok_or_else(|| ConfigError("missing [grid] block".into()))?;
        resolve_grid_kind(g, problem)
    }

    pub fn n(&self) -> Result<usize> {
        match self.grid.as_ref().and_then(|g| g.n) {
            Some(n) if n >= 1 => Ok(n),
            Some(_) => err("grid.n must be at least 1"),
            None => err("grid.n is required"),
        }
    }

    pub fn scheme(&self) -> Result<SchemeKind> {
        let s = self
            .scheme
            .as_ref()
            .ok_or_else(|| ConfigError("missing [scheme] block".into()))?;
        resolve_scheme(s)
    }

    pub fn policy(&self) -> Result<GridPolicy> {
        let q = &self.quantize;
        let schedule = match q.schedule.as_str() {
            "linear" if q.per_step >= 1 => NodeSchedule::Linear { per_step: q.per_step },
            "linear" => return err("quantize.per_step must be at least 1"),
            "constant" => match q.m {
                Some(m) if m >= 1 => NodeSchedule::Constant { m },
                _ => return err("quantize.schedule = \"constant\" needs quantize.m >= 1"),
            },
            other => {
                return err(format!(
                    "unknown quantize.schedule {other:?}; expected linear or constant"
                ))
            }
        };
        for (name, v) in [
            ("q", q.q),
            ("width_factor", q.width_factor),
            ("diffusion_bound", q.diffusion_bound),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return err(format!("quantize.{name} must be positive and finite, got {v}"));
            }
        }
        if !(q.drift_bound >= 0.0 && q.drift_bound.is_finite()) {
            return err("quantize.drift_bound must be non-negative and finite");
        }
        Ok(GridPolicy {
            drift_bound: q.drift_bound,
            width_factor: q.width_factor,
            diffusion_bound: q.diffusion_bound,
            q: q.q,
            schedule,
        })
    }

    pub fn mode(&self) -> Result<TransitionMode> {
        let q = &self.quantize;
        match q.mode.as_str() {
            "analytic" => Ok(TransitionMode::Analytic1d),
            "mc" if q.samples >= 1 => Ok(TransitionMode::MonteCarlo {
                samples: q.samples,
                seed: q.seed,
            }),
            "mc" => err("quantize.samples must be at least 1"),
            other => err(format!("unknown quantize.mode {other:?}; expected analytic or mc")),
        }
    }

    pub fn dump(&self) -> Result<DumpLevel> {
        match self.output.dump.as_str() {
            "summary" => Ok(DumpLevel::Summary),
            "tables" => Ok(DumpLevel::Tables),
            "chain" => Ok(DumpLevel::Chain),
            other => err(format!(
                "unknown output.dump {other:?}; expected summary, tables or chain"
            )),
        }
    }

    pub fn stability(&self, kind: &GridKind) -> Result<(EnvelopeRegime, f64)> {
        let s = self
            .stability
            .as_ref()
            .ok_or_else(|| ConfigError("missing [stability] block".into()))?;
        let regime = match s.regime.as_deref() {
            Some("one_d") => EnvelopeRegime::OneD,
            Some("multi") => EnvelopeRegime::Multi,
            Some("gmongr") => EnvelopeRegime::MonotoneGrowth,
            Some(other) => {
                return err(format!(
                    "unknown stability.regime {other:?}; expected one_d, multi or gmongr"
                ))
            }
            None => match kind {
                GridKind::AtsMulti | GridKind::AtsRefined { base: BaseGrid::Multi } => EnvelopeRegime::Multi,
                GridKind::AtsMonotoneGrowth
                | GridKind::AtsTruncTerminal {
                    base: BaseGrid::MonotoneGrowth,
                    ..
                } => EnvelopeRegime::MonotoneGrowth,
                _ => EnvelopeRegime::OneD,
            },
        };
        match s.tolerance {
            Some(t) if t >= 0.0 && t.is_finite() => Ok((regime, t)),
            Some(t) => err(format!("stability.tolerance must be non-negative, got {t}")),
            None => err("stability.tolerance is required (relative quantization allowance, e.g. 0.05)"),
        }
    }

    pub fn reference(&self) -> Result<(Vec<usize>, ReferencePolicy, bool)> {
        let c = self
            .convergence
            .as_ref()
            .ok_or_else(|| ConfigError("missing [convergence] block".into()))?;
        if c.n_list.is_empty() || c.n_list.windows(2).any(|w| w[0] >= w[1]) || c.n_list[0] == 0 {
            return err("convergence.n_list must be non-empty, positive and strictly increasing");
        }
        let policy = match c.reference.as_str() {
            "average" => ReferencePolicy::ImplicitExplicitAverage { n_ref: c.n_ref },
            "fine" => ReferencePolicy::FineGrid { n_ref: c.n_ref },
            other => {
                return err(format!(
                    "unknown convergence.reference {other:?}; expected average or fine"
                ))
            }
        };
        if c.n_ref == 0 {
            return err("convergence.n_ref must be at least 1");
        }
        Ok((c.n_list.clone(), policy, c.sandwich))
    }
}

fn resolve_problem(b: &ProblemBlock) -> Result<ProblemSpec> {
    let horizon = match b.horizon {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return err(format!("problem.horizon must be positive and finite, got {t}")),
        None => return err("problem.horizon (T) is required; the experiments do not fix it"),
    };
    let caps = presets::STUDIED_CAPS.map(|c| c.to_string()).join(", ");
    let core = |r: ats_core::Result<ProblemSpec>| r.map_err(|e| ConfigError(e.to_string()));
    match b.preset.as_str() {
        "damped_cubic" => {
            reject_inline(b, "damped_cubic")?;
            let cap = b.cap.ok_or_else(|| {
                ConfigError(format!(
                    "preset damped_cubic needs problem.cap; the studied values are c in {{{caps}}}"
                ))
            })?;
            core(presets::damped_cubic_problem(horizon, cap))
        }
        "pure_cubic" => {
            reject_inline(b, "pure_cubic")?;
            if b.cap.is_some() {
                return err(format!(
                    "preset pure_cubic fixes the cap at {}; remove problem.cap",
                    presets::PURE_CUBIC_CAP
                ));
            }
            core(presets::pure_cubic_problem(horizon))
        }
        "custom" => {
            let x0 = b.x0.clone().unwrap_or_else(|| vec![0.0]);
            let d = x0.len();
            let forward = match &b.forward {
                None => ForwardSpec::brownian(x0),
                Some(f) => ForwardSpec::new(
                    x0,
                    Coefficients::Constant {
                        drift: f.drift.clone(),
                        diffusion: f.diffusion.clone(),
                    },
                ),
            }
            .map_err(|e| ConfigError(e.to_string()))?;
            let driver = resolve_driver(
                b.driver
                    .as_ref()
                    .ok_or_else(|| ConfigError("custom problem needs [problem.driver]".into()))?,
                d,
            )?;
            let t = b
                .terminal
                .as_ref()
                .ok_or_else(|| ConfigError("custom problem needs [problem.terminal]".into()))?;
            let terminal = resolve_terminal(t, driver.k, d)?;
            core(ProblemSpec::new(horizon, forward, driver, terminal))
        }
        other => err(format!(
            "unknown problem preset {other:?}; expected damped_cubic, pure_cubic or custom"
        )),
    }
}

fn reject_inline(b: &ProblemBlock, name: &str) -> Result<()> {
    if b.x0.is_some() || b.driver.is_some() || b.terminal.is_some() || b.forward.is_some() {
        return err(format!(
            "preset {name} fixes x0, driver, terminal and forward; use preset = \"custom\" to set them"
        ));
    }
    Ok(())
}

/// Driver presets by name, for `custom` problems and the validate subcommand.
pub fn resolve_driver(b: &DriverBlock, d: usize) -> Result<DriverSpec> {
    let core = |r: ats_core::Result<DriverSpec>| r.map_err(|e| ConfigError(e.to_string()));
    let one_d = |name: &str| {
        if d != 1 || b.k.unwrap_or(1) != 1 {
            return err(format!(
                "driver preset {name} is scalar; use kind = \"cubic\" for k, d > 1"
            ));
        }
        Ok(())
    };
    match b.kind.as_str() {
        "cubic_damped" => {
            one_d("cubic_damped")?;
            Ok(presets::cubic_damped())
        }
        "pure_cubic" => {
            one_d("pure_cubic")?;
            Ok(presets::pure_cubic(b.radius))
        }
        "cubic_unstable" => {
            one_d("cubic_unstable")?;
            let k = b
                .radius
                .ok_or_else(|| ConfigError("cubic_unstable needs driver.radius K > 1".into()))?;
            core(presets::cubic_unstable(k))
        }
        "cubic" => {
            let linear = b
                .linear
                .ok_or_else(|| ConfigError("cubic driver needs driver.linear".into()))?;
            let cubic = b
                .cubic
                .ok_or_else(|| ConfigError("cubic driver needs driver.cubic".into()))?;
            let growth = match (b.radius, b.rate) {
                (Some(radius), Some(rate)) => Some(GrowthCondition { radius, rate }),
                (None, None) => None,
                _ => return err("a growth condition needs both driver.radius and driver.rate"),
            };
            core(DriverSpec::cubic_family(
                linear,
                cubic,
                b.z_coupling.unwrap_or(0.0),
                growth,
                b.k.unwrap_or(1),
                d,
            ))
        }
        other => err(format!(
            "unknown driver {other:?}; expected cubic_damped, pure_cubic, cubic_unstable or cubic"
        )),
    }
}

fn resolve_terminal(b: &TerminalBlock, k: usize, d: usize) -> Result<TerminalSpec> {
    let r = match b.kind.as_str() {
        "capped_square" => {
            let cap = b
                .cap
                .ok_or_else(|| ConfigError("capped_square terminal needs terminal.cap".into()))?;
            TerminalSpec::capped_square(cap, k, d)
        }
        "square" => TerminalSpec::square(k, d),
        "zero" => TerminalSpec::zero(k, d),
        other => {
            return err(format!(
                "unknown terminal {other:?}; expected capped_square, square or zero"
            ))
        }
    };
    r.map_err(|e| ConfigError(e.to_string()))
}

fn resolve_base(name: Option<&str>, g: &GridBlock, problem: &ProblemSpec) -> Result<BaseGrid> {
    match name {
        Some("one_d") => Ok(BaseGrid::OneD),
        Some("multi") => Ok(BaseGrid::Multi),
        Some("comparison") => Ok(BaseGrid::Comparison {
            bound: g.bound.unwrap_or(problem.terminal.sup_norm),
        }),
        Some("gmongr") => Ok(BaseGrid::MonotoneGrowth),
        Some(other) => err(format!(
            "unknown grid.base {other:?}; expected one_d, multi, comparison or gmongr"
        )),
        None => err("grid.base is required for this grid kind"),
    }
}

fn resolve_grid_kind(g: &GridBlock, problem: &ProblemSpec) -> Result<GridKind> {
    Ok(match g.kind.as_str() {
        "uniform" => GridKind::Uniform,
        "ats_1d" => GridKind::Ats1d,
        "ats_multi" => GridKind::AtsMulti,
        "ats_comparison" => GridKind::AtsComparison { bound: g.bound.unwrap_or(problem.terminal.sup_norm) },
        "ats_refined" => GridKind::AtsRefined { base: resolve_base(g.base.as_deref(), g, problem)? },
        "ats_gmongr" => GridKind::AtsMonotoneGrowth,
        "ats_trunc_terminal" => GridKind::AtsTruncTerminal {
            base: resolve_base(g.base.as_deref(), g, problem)?,
            l0: g.l0.ok_or_else(|| ConfigError("ats_trunc_terminal needs grid.l0".into()))?,
            alpha: g.alpha.ok_or_else(|| ConfigError("ats_trunc_terminal needs grid.alpha".into()))?,
        },
        other => {
            return err(format!(
                "unknown grid.kind {other:?}; expected uniform, ats_1d, ats_multi, ats_comparison, ats_refined, ats_gmongr or ats_trunc_terminal"
            ))
        }
    })
}

fn resolve_scheme(s: &SchemeBlock) -> Result<SchemeKind> {
    Ok(match s.kind.as_str() {
        "explicit_ats" => SchemeKind::ExplicitAts,
        "explicit_uniform" => SchemeKind::ExplicitUniform,
        "implicit_uniform" => {
            let d = ImplicitOptions::default();
            SchemeKind::ImplicitUniform(ImplicitOptions {
                tol: s.tol.unwrap_or(d.tol),
                max_iter: s.max_iter.unwrap_or(d.max_iter),
                ..d
            })
        }
        "explicit_trunc_terminal" => SchemeKind::ExplicitTruncTerminal {
            l0: s.l0.ok_or_else(|| ConfigError("explicit_trunc_terminal needs scheme.l0".into()))?,
            alpha: s.alpha.ok_or_else(|| ConfigError("explicit_trunc_terminal needs scheme.alpha".into()))?,
        },
        other => {
            return err(format!(
                "unknown scheme.kind {other:?}; expected explicit_ats, explicit_uniform, implicit_uniform or explicit_trunc_terminal"
            ))
        }
    })
}
