//! Command-line runner for weighted Hardy averaging on p-adic Herz and
//! Morrey-Herz spaces.
//!
//! Exit codes: 0 success, 2 configuration or usage problem, 3 divergent
//! or uncertifiable computation, 4 tolerance violation.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use padic_hardy_core::hardy::{
    apply_dual_hardy, apply_hardy, char_const, mc_char_const, ConstantKind, McConfig,
    MultilinearParams, ShellWeight,
};
use padic_hardy_core::herz::{herz_norm, lq_norm, morrey_herz_norm, HerzParams, MorreyHerzParams};
use padic_hardy_core::padic::PadicContext;
use padic_hardy_core::sharpness::{
    herz_sweep, morrey_herz_ratio, SharpnessConfig, SHARPNESS_BOUND_SLACK,
};
use padic_hardy_core::Error;

use config::{core_err, load_preset, preset_sources, ExpectCheck, Failure, RunConfig};
use output::{
    ApplyRecord, ConstantRecord, Format, McRecord, MorreyRecord, NormRecord, Report, SweepRecord,
};

#[derive(Parser)]
#[command(
    name = "padic-hardy",
    version,
    about = "Weighted Hardy averaging on p-adic shell spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Path to a TOML run configuration.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Name of a bundled preset.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Write the report to this file instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Override the Monte-Carlo seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig, Failure> {
        match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::from_path(path),
            (None, Some(name)) => load_preset(name),
            (None, None) => Err(Failure::config(
                "either --config <PATH> or --preset <NAME> is required",
            )),
        }
    }

    fn mc_config(&self, config: &RunConfig) -> Option<McConfig> {
        match (config.mc, self.seed) {
            (Some(mut mc), Some(seed)) => {
                mc.seed = seed;
                Some(mc)
            }
            (Some(mc), None) => Some(mc),
            (None, Some(seed)) => Some(McConfig {
                seed,
                ..McConfig::default()
            }),
            (None, None) => None,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the characteristic constant of the configured operator.
    Constant(RunArgs),
    /// Apply the averaging operator to the configured radial inputs.
    Apply(RunArgs),
    /// Evaluate a shell-space norm of the configured function.
    Norm(RunArgs),
    /// Run the extremal-family ratio study against the constant.
    Sharpness(RunArgs),
    /// Cross-check the constant against stratified sampling.
    McCheck {
        #[command(flatten)]
        args: RunArgs,
        /// Largest tolerated deviation in total standard errors.
        #[arg(long, default_value_t = 4.0)]
        max_sigma: f64,
    },
    /// Run every expectation block across a preset collection.
    VerifyAll {
        /// Directory of .toml presets; defaults to $PADIC_HARDY_PRESETS,
        /// then to the bundled set.
        dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Constant(args) => run_constant(args),
        Command::Apply(args) => run_apply(args),
        Command::Norm(args) => run_norm(args),
        Command::Sharpness(args) => run_sharpness(args),
        Command::McCheck { args, max_sigma } => run_mc_check(args, *max_sigma),
        Command::VerifyAll { dir } => run_verify_all(dir.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

struct Setup {
    ctx: PadicContext,
    params: MultilinearParams,
    weight: ShellWeight,
}

fn setup(config: &RunConfig) -> Result<Setup, Failure> {
    Ok(Setup {
        ctx: config.padic_context()?,
        params: config.params()?,
        weight: config.shell_weight()?,
    })
}

fn run_constant(args: &RunArgs) -> Result<(), Failure> {
    let config = args.load()?;
    let s = setup(&config)?;
    let c = char_const(config.kind, s.ctx, &s.weight, &s.params).map_err(core_err)?;
    let record = ConstantRecord::new(config.kind, s.ctx.p(), s.ctx.n(), &c);
    Report::Constant(record).emit(args.format, args.out.as_deref())
}

fn run_apply(args: &RunArgs) -> Result<(), Failure> {
    let config = args.load()?;
    let s = setup(&config)?;
    let apply = config
        .apply
        .as_ref()
        .ok_or_else(|| Failure::config("the apply subcommand needs an [apply] section"))?;
    let [lo, hi] = apply.shells;
    if lo > hi {
        return Err(Failure::config(format!(
            "shell window [{lo}, {hi}] is empty"
        )));
    }
    for (i, f) in apply.inputs.iter().enumerate() {
        if f.context() != s.ctx {
            return Err(Failure::config(format!(
                "input {i} lives on Q_{}^{} but the run context is Q_{}^{}",
                f.context().p(),
                f.context().n(),
                s.ctx.p(),
                s.ctx.n()
            )));
        }
    }
    let result = match config.kind.operator() {
        padic_hardy_core::hardy::OperatorKind::Forward => {
            apply_hardy(&s.weight, &apply.inputs, lo..=hi)
        }
        padic_hardy_core::hardy::OperatorKind::Dual => {
            apply_dual_hardy(&s.weight, &apply.inputs, lo..=hi)
        }
    }
    .map_err(core_err)?;
    Report::Apply(ApplyRecord::new(&result)).emit(args.format, args.out.as_deref())
}

fn run_norm(args: &RunArgs) -> Result<(), Failure> {
    let config = args.load()?;
    let ctx = config.padic_context()?;
    let norm = config
        .norm
        .as_ref()
        .ok_or_else(|| Failure::config("the norm subcommand needs a [norm] section"))?;
    if norm.function.context() != ctx {
        return Err(Failure::config(
            "the [norm] function does not live on the configured context",
        ));
    }
    let need = |field: Option<f64>, name: &str| {
        field.ok_or_else(|| Failure::config(format!("[norm] space {:?} needs {name}", norm.space)))
    };
    let record = match norm.space.as_str() {
        "lq" => {
            let q = need(norm.q, "q")?;
            NormRecord::plain("lq", lq_norm(&norm.function, q).map_err(core_err)?)
        }
        "herz" => {
            let params = HerzParams {
                alpha: need(norm.alpha, "alpha")?,
                q: need(norm.q, "q")?,
                r: need(norm.r, "r")?,
            };
            NormRecord::plain("herz", herz_norm(&norm.function, &params).map_err(core_err)?)
        }
        "morrey-herz" => {
            let params = MorreyHerzParams {
                alpha: need(norm.alpha, "alpha")?,
                q: need(norm.q, "q")?,
                r: need(norm.r, "r")?,
                lambda: need(norm.lambda, "lambda")?,
            };
            let value = morrey_herz_norm(&norm.function, &params, &config.tolerance_spec())
                .map_err(core_err)?;
            NormRecord::windowed("morrey-herz", &value)?
        }
        other => {
            return Err(Failure::config(format!(
                "unknown norm space {other:?}; use lq, herz, or morrey-herz"
            )))
        }
    };
    Report::Norm(record).emit(args.format, args.out.as_deref())
}

fn sharpness_config(config: &RunConfig) -> SharpnessConfig {
    match (config.sharpness, config.tolerance) {
        (Some(s), _) => s,
        (None, Some(tol)) => SharpnessConfig {
            tol,
            ..SharpnessConfig::default()
        },
        (None, None) => SharpnessConfig::default(),
    }
}

fn run_sharpness(args: &RunArgs) -> Result<(), Failure> {
    let config = args.load()?;
    let s = setup(&config)?;
    match config.kind {
        ConstantKind::Herz | ConstantKind::HerzDual => {
            let sweep = herz_sweep(
                config.kind.operator(),
                s.ctx,
                &s.weight,
                &s.params,
                &sharpness_config(&config),
            )
            .map_err(core_err)?;
            let record = SweepRecord::new(config.kind, &sweep);
            Report::Sweep(record, &sweep).emit(args.format, args.out.as_deref())?;
            if sweep.all_bounded() {
                Ok(())
            } else {
                Err(Failure::tolerance(
                    "an extremal ratio exceeded the constant",
                ))
            }
        }
        ConstantKind::MorreyHerz | ConstantKind::MorreyHerzDual => {
            let report = morrey_herz_ratio(
                config.kind.operator(),
                s.ctx,
                &s.weight,
                &s.params,
                &config.tolerance_spec(),
            )
            .map_err(core_err)?;
            let record = MorreyRecord::new(&report)?;
            let gap = report.relative_gap;
            Report::Morrey(record).emit(args.format, args.out.as_deref())?;
            if gap.abs() <= SHARPNESS_BOUND_SLACK {
                Ok(())
            } else {
                Err(Failure::tolerance(format!(
                    "extremal ratio misses the constant by a relative {gap:.3e}"
                )))
            }
        }
    }
}

fn run_mc_check(args: &RunArgs, max_sigma: f64) -> Result<(), Failure> {
    let config = args.load()?;
    let s = setup(&config)?;
    let mc = args.mc_config(&config).ok_or_else(|| {
        Failure::config("mc-check needs an [mc] section in the configuration or --seed")
    })?;
    let constant = char_const(config.kind, s.ctx, &s.weight, &s.params).map_err(core_err)?;
    let estimate =
        mc_char_const(config.kind, s.ctx, &s.weight, &s.params, &mc).map_err(core_err)?;
    let record = McRecord::new(&estimate, constant.value);
    let sigma = record.sigma;
    Report::Mc(record).emit(args.format, args.out.as_deref())?;
    if sigma <= max_sigma {
        Ok(())
    } else {
        Err(Failure::tolerance(format!(
            "estimate deviates from the constant by {sigma:.3} standard errors (allowed {max_sigma})"
        )))
    }
}

fn check_label(check: &ExpectCheck) -> &'static str {
    match check {
        ExpectCheck::Constant { .. } => "constant",
        ExpectCheck::Mc { .. } => "mc",
        ExpectCheck::Sharpness { .. } => "sharpness",
        ExpectCheck::MhExact { .. } => "mh-exact",
        ExpectCheck::Divergent => "divergent",
    }
}

/// Run one expectation; `Ok` carries the pass detail, `Err` the failure
/// reason.
fn run_expect(config: &RunConfig, s: &Setup, check: &ExpectCheck) -> Result<String, String> {
    match check {
        ExpectCheck::Constant { value, rel_tol } => {
            let c = char_const(config.kind, s.ctx, &s.weight, &s.params)
                .map_err(|e| format!("constant evaluation failed: {e}"))?;
            let rel = (c.value - value).abs() / value.abs().max(f64::MIN_POSITIVE);
            if rel <= *rel_tol {
                Ok(format!("constant {:.9e}, relative deviation {rel:.2e}", c.value))
            } else {
                Err(format!(
                    "constant {:.12e} vs pinned {value:.12e}, relative deviation {rel:.2e} > {rel_tol:.2e}",
                    c.value
                ))
            }
        }
        ExpectCheck::Mc { max_sigma } => {
            let c = char_const(config.kind, s.ctx, &s.weight, &s.params)
                .map_err(|e| format!("constant evaluation failed: {e}"))?;
            let mc = config.mc.unwrap_or_default();
            let est = mc_char_const(config.kind, s.ctx, &s.weight, &s.params, &mc)
                .map_err(|e| format!("sampling failed: {e}"))?;
            let record = McRecord::new(&est, c.value);
            if record.sigma <= *max_sigma {
                Ok(format!(
                    "estimate {:.9e} within {:.3} sigma (allowed {max_sigma})",
                    est.estimate, record.sigma
                ))
            } else {
                Err(format!(
                    "estimate {:.9e} deviates by {:.3} sigma (allowed {max_sigma})",
                    est.estimate, record.sigma
                ))
            }
        }
        ExpectCheck::Sharpness { max_final_gap } => {
            if !matches!(config.kind, ConstantKind::Herz | ConstantKind::HerzDual) {
                return Err("the sweep check applies to the unwindowed families".into());
            }
            let sweep = herz_sweep(
                config.kind.operator(),
                s.ctx,
                &s.weight,
                &s.params,
                &sharpness_config(config),
            )
            .map_err(|e| format!("sweep failed: {e}"))?;
            if !sweep.all_bounded() {
                return Err("a ratio exceeded the constant".into());
            }
            let gap = sweep.final_gap();
            if gap <= *max_final_gap {
                Ok(format!(
                    "{} ratios bounded, final gap {gap:.3e}",
                    sweep.rows.len()
                ))
            } else {
                Err(format!(
                    "final gap {gap:.3e} above the allowed {max_final_gap:.3e}"
                ))
            }
        }
        ExpectCheck::MhExact { case, rel_tol } => {
            if !matches!(
                config.kind,
                ConstantKind::MorreyHerz | ConstantKind::MorreyHerzDual
            ) {
                return Err("the exactness check applies to the windowed families".into());
            }
            let report = morrey_herz_ratio(
                config.kind.operator(),
                s.ctx,
                &s.weight,
                &s.params,
                &config.tolerance_spec(),
            )
            .map_err(|e| format!("ratio evaluation failed: {e}"))?;
            let got_case = serde_json::to_value(report.case)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            if let Some(want) = case {
                if *want != got_case {
                    return Err(format!("case {got_case} but expected {want}"));
                }
            }
            if report.relative_gap <= *rel_tol {
                Ok(format!(
                    "case {got_case}, ratio {:.9e}, relative gap {:.2e}",
                    report.ratio, report.relative_gap
                ))
            } else {
                Err(format!(
                    "relative gap {:.2e} above the allowed {rel_tol:.2e}",
                    report.relative_gap
                ))
            }
        }
        ExpectCheck::Divergent => {
            match char_const(config.kind, s.ctx, &s.weight, &s.params) {
                Err(Error::DivergentSeries { .. }) => Ok("divergence detected".into()),
                Err(e) => Err(format!("failed for another reason: {e}")),
                Ok(c) => Err(format!(
                    "expected divergence but the constant evaluated to {:.9e}",
                    c.value
                )),
            }
        }
    }
}

fn run_verify_all(dir: Option<&Path>) -> Result<(), Failure> {
    let sources = preset_sources(dir)?;
    let mut total = 0usize;
    let mut failed = 0usize;
    for (name, source) in &sources {
        let config = RunConfig::from_toml(source, name)?;
        let s = setup(&config)?;
        for check in &config.expect {
            total += 1;
            match run_expect(&config, &s, check) {
                Ok(detail) => {
                    println!("[verify] {name} :: {}: PASS ({detail})", check_label(check));
                }
                Err(reason) => {
                    failed += 1;
                    println!("[verify] {name} :: {}: FAIL ({reason})", check_label(check));
                }
            }
        }
    }
    println!("verify-all: {}/{} checks passed", total - failed, total);
    if failed > 0 {
        Err(Failure::tolerance(format!(
            "{failed} of {total} checks failed"
        )))
    } else {
        Ok(())
    }
}
