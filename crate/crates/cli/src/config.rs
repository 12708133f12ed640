//! TOML run configurations and the bundled presets.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use padic_hardy_core::hardy::{McConfig, MultilinearParams, ShellWeight, SlotParams};
use padic_hardy_core::herz::MorreyHerzParams;
use padic_hardy_core::padic::{PadicContext, ShellIndex};
use padic_hardy_core::radial::{RadialFunction, ToleranceSpec};
use padic_hardy_core::sharpness::SharpnessConfig;
use padic_hardy_core::{hardy::ConstantKind, Error};

/// Failure with the process exit code it maps to: 2 for configuration
/// problems, 3 for divergent or uncertifiable requests, 4 for tolerance
/// violations.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn tolerance(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }

    pub fn from_core(e: Error) -> Self {
        let code = match e {
            Error::DivergentSeries { .. }
            | Error::TruncationCap { .. }
            | Error::InconclusiveSup { .. }
            | Error::PrecisionExhausted
            | Error::Overflow { .. } => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub fn core_err(e: Error) -> Failure {
    Failure::from_core(e)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextConfig {
    pub p: u64,
    pub n: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplyConfig {
    /// Output shell window `[lo, hi]`.
    pub shells: [ShellIndex; 2],
    pub inputs: Vec<RadialFunction>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormConfig {
    /// One of `lq`, `herz`, `morrey-herz`.
    pub space: String,
    pub alpha: Option<f64>,
    pub q: Option<f64>,
    pub r: Option<f64>,
    pub lambda: Option<f64>,
    pub function: RadialFunction,
}

/// One acceptance expectation inside a preset, consumed by `verify-all`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExpectCheck {
    /// The characteristic constant matches a pinned value.
    Constant { value: f64, rel_tol: f64 },
    /// The Monte-Carlo estimate sits within `max_sigma` total standard
    /// errors of the analytic constant.
    Mc { max_sigma: f64 },
    /// Every sweep ratio respects the constant and the finest grid point
    /// closes most of the gap.
    Sharpness {
        #[serde(default = "default_final_gap")]
        max_final_gap: f64,
    },
    /// The extremal-family ratio reproduces the constant exactly.
    MhExact {
        case: Option<String>,
        rel_tol: f64,
    },
    /// The constant must be reported as divergent.
    Divergent,
}

fn default_final_gap() -> f64 {
    0.02
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kind: ConstantKind,
    pub context: ContextConfig,
    pub slots: Vec<SlotParams>,
    /// Optional explicit aggregate target; derived from the slots when
    /// absent.
    pub target: Option<MorreyHerzParams>,
    pub weight: Option<ShellWeight>,
    pub mc: Option<McConfig>,
    pub sharpness: Option<SharpnessConfig>,
    pub tolerance: Option<ToleranceSpec>,
    pub apply: Option<ApplyConfig>,
    pub norm: Option<NormConfig>,
    #[serde(default)]
    pub expect: Vec<ExpectCheck>,
}

impl RunConfig {
    pub fn from_toml(source: &str, origin: &str) -> Result<Self, Failure> {
        toml::from_str(source)
            .map_err(|e| Failure::config(format!("{origin}: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self, Failure> {
        let source = fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&source, &path.display().to_string())
    }

    pub fn padic_context(&self) -> Result<PadicContext, Failure> {
        PadicContext::new(self.context.p, self.context.n).map_err(core_err)
    }

    pub fn params(&self) -> Result<MultilinearParams, Failure> {
        match self.target {
            Some(target) => MultilinearParams::with_aggregates(self.slots.clone(), target),
            None => MultilinearParams::from_slots(self.slots.clone()),
        }
        .map_err(core_err)
    }

    pub fn shell_weight(&self) -> Result<ShellWeight, Failure> {
        match &self.weight {
            Some(w) => {
                if w.m() != self.slots.len() {
                    return Err(Failure::config(format!(
                        "weight has {} slots but {} slot parameter sets are given",
                        w.m(),
                        self.slots.len()
                    )));
                }
                Ok(w.clone())
            }
            None => Ok(ShellWeight::one(self.slots.len())),
        }
    }

    pub fn tolerance_spec(&self) -> ToleranceSpec {
        self.tolerance.unwrap_or_default()
    }
}

/// Preset names and their TOML sources compiled into the binary.
pub const EMBEDDED_PRESETS: &[(&str, &str)] = &[
    (
        "herz_forward_canonical",
        include_str!("../presets/herz_forward_canonical.toml"),
    ),
    (
        "herz_dual_canonical",
        include_str!("../presets/herz_dual_canonical.toml"),
    ),
    (
        "mh_forward_distinct",
        include_str!("../presets/mh_forward_distinct.toml"),
    ),
    (
        "mh_forward_equal",
        include_str!("../presets/mh_forward_equal.toml"),
    ),
    (
        "mh_forward_mixed",
        include_str!("../presets/mh_forward_mixed.toml"),
    ),
    (
        "mh_dual_distinct",
        include_str!("../presets/mh_dual_distinct.toml"),
    ),
    (
        "mh_dual_equal",
        include_str!("../presets/mh_dual_equal.toml"),
    ),
    (
        "mh_dual_mixed",
        include_str!("../presets/mh_dual_mixed.toml"),
    ),
    (
        "negative_divergent",
        include_str!("../presets/negative_divergent.toml"),
    ),
];

pub fn load_preset(name: &str) -> Result<RunConfig, Failure> {
    for (preset, source) in EMBEDDED_PRESETS {
        if *preset == name {
            return RunConfig::from_toml(source, &format!("preset {name}"));
        }
    }
    let known: Vec<&str> = EMBEDDED_PRESETS.iter().map(|(n, _)| *n).collect();
    Err(Failure::config(format!(
        "unknown preset {name:?}; bundled presets: {}",
        known.join(", ")
    )))
}

/// Collect `(name, source)` pairs for verify-all: an explicit directory,
/// the `PADIC_HARDY_PRESETS` directory, or the embedded set.
pub fn preset_sources(dir: Option<&Path>) -> Result<Vec<(String, String)>, Failure> {
    let dir: Option<PathBuf> = match dir {
        Some(d) => Some(d.to_path_buf()),
        None => std::env::var_os("PADIC_HARDY_PRESETS").map(PathBuf::from),
    };
    let Some(dir) = dir else {
        return Ok(EMBEDDED_PRESETS
            .iter()
            .map(|(n, s)| (n.to_string(), s.to_string()))
            .collect());
    };
    let entries = fs::read_dir(&dir)
        .map_err(|e| Failure::config(format!("{}: {e}", dir.display())))?;
    let mut sources = Vec::new();
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    for path in paths {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let source = fs::read_to_string(&path)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        sources.push((name, source));
    }
    if sources.is_empty() {
        return Err(Failure::config(format!(
            "no .toml presets found in {}",
            dir.display()
        )));
    }
    Ok(sources)
}
