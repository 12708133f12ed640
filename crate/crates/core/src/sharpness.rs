//! Extremal families showing the characteristic constants are the exact
//! operator norms.
//!
//! On Herz spaces the family `f_{i,eps} = |x|^(-(alpha_i + n/q_i + eps))`,
//! truncated to `|x| >= 1`, drives the operator-to-input norm ratio up to
//! the characteristic constant as `eps -> 0`; [`herz_ratio`] evaluates that
//! ratio with certified truncation and [`herz_sweep`] tabulates it on the
//! dyadic grid `eps = 2^-l`. On Morrey-Herz spaces the single function
//! `f_i = |x|^(-(alpha_i + n/q_i - lambda_i))` attains the constant exactly
//! when the exponents split evenly, and [`morrey_herz_ratio`] verifies that
//! identity by applying the operator and renormalising.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardy::{
    apply_dual_hardy, apply_hardy, char_const, ConstantKind, MultilinearParams, OperatorKind,
    ShellWeight, SlotParams,
};
use crate::herz::{morrey_herz_norm, MorreyHerzParams};
use crate::padic::PadicContext;
use crate::radial::{RadialFunction, ToleranceSpec};
use crate::series::Accum;

/// Slack used when checking computed ratios against the constant: the
/// bound `ratio <= constant * (1 + SHARPNESS_BOUND_SLACK)` must hold on
/// every grid point.
pub const SHARPNESS_BOUND_SLACK: f64 = 1e-9;

/// Grid resolution for [`herz_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SharpnessConfig {
    /// The sweep evaluates `eps = 2^-l` for `l = 0..=levels`.
    pub levels: u32,
    pub tol: ToleranceSpec,
}

impl Default for SharpnessConfig {
    fn default() -> Self {
        Self {
            levels: 12,
            tol: ToleranceSpec::default(),
        }
    }
}

/// `|x|^(-(alpha + n/q + eps))` on `|x| >= 1`, the near-critical input
/// family for the Herz-space bound.
pub fn herz_extremal(ctx: PadicContext, slot: &SlotParams, epsilon: f64) -> Result<RadialFunction> {
    slot.validate()?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    let n = ctx.n() as f64;
    RadialFunction::power_law(ctx, 1.0, -(slot.alpha + n / slot.q + epsilon), Some(0), None)
}

/// `|x|^(-(alpha + n/q - lambda))` on all shells, the exact extremal for
/// the Morrey-Herz bound.
pub fn mh_extremal(ctx: PadicContext, slot: &SlotParams) -> Result<RadialFunction> {
    slot.validate()?;
    let n = ctx.n() as f64;
    RadialFunction::power_law(
        ctx,
        1.0,
        slot.lambda - slot.alpha - n / slot.q,
        None,
        None,
    )
}

/// Ratio of the output norm to the product of input norms at one value of
/// the family parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub epsilon: f64,
    pub ratio: f64,
}

fn ensure_nonnegative_weight(weight: &ShellWeight) -> Result<()> {
    let slots_ok = weight
        .slots()
        .map(|ss| ss.iter().all(|s| s.coeff >= 0.0))
        .unwrap_or(true);
    let table_ok = weight.table().values().all(|&w| w >= 0.0);
    if slots_ok && table_ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(
            "norm-ratio analysis needs a nonnegative weight".into(),
        ))
    }
}

struct RatioSetup {
    n: f64,
    frac: f64,
    /// alpha_i + n/q_i per slot
    a: Vec<f64>,
    /// aggregate alpha + n/q
    agg: f64,
    r: f64,
    q: f64,
}

fn ratio_setup(
    ctx: PadicContext,
    weight: &ShellWeight,
    params: &MultilinearParams,
) -> Result<RatioSetup> {
    ensure_nonnegative_weight(weight)?;
    params.ensure_balanced()?;
    if weight.m() != params.m() {
        return Err(Error::InvalidParameter(format!(
            "weight has {} slots but the parameters describe {}",
            weight.m(),
            params.m()
        )));
    }
    let n = ctx.n() as f64;
    let target = params.target();
    Ok(RatioSetup {
        n,
        frac: ctx.unit_sphere_fraction(),
        a: params.slots().iter().map(|s| s.alpha + n / s.q).collect(),
        agg: target.alpha + n / target.q,
        r: target.r,
        q: target.q,
    })
}

/// Product of the closed-form input norms
/// `(1 - p^-n)^(1/q_i) / (1 - p^(-r_i eps))^(1/r_i)`.
fn extremal_norm_product(ctx: PadicContext, params: &MultilinearParams, epsilon: f64) -> f64 {
    let frac = ctx.unit_sphere_fraction();
    params
        .slots()
        .iter()
        .map(|s| frac.powf(1.0 / s.q) / (1.0 - ctx.powf(-s.r * epsilon)).powf(1.0 / s.r))
        .product()
}

fn herz_ratio_forward(
    ctx: PadicContext,
    weight: &ShellWeight,
    params: &MultilinearParams,
    epsilon: f64,
    tol: &ToleranceSpec,
) -> Result<f64> {
    let set = ratio_setup(ctx, weight, params)?;
    let m = params.m();
    // the constant must converge; this also certifies the ratio series
    char_const(ConstantKind::Herz, ctx, weight, params)?;

    // separable slot partial sums s_i(k) = c_i (1-p^-n) sum_{j<=k} x_i^j
    let sep: Option<Vec<(f64, f64)>> = weight
        .slots()
        .filter(|ss| ss.iter().all(|s| s.coeff > 0.0))
        .map(|ss| {
            ss.iter()
                .zip(&set.a)
                .map(|(s, &ai)| (s.coeff * set.frac, ctx.powf(ai + epsilon - s.beta - set.n)))
                .collect()
        });
    // table corrections become visible once k reaches the largest index
    let mut pending: Vec<(i64, f64)> = weight
        .table()
        .iter()
        .map(|(j, &w)| {
            let mut v = w;
            for (&ji, &ai) in j.iter().zip(&set.a) {
                v *= ctx.powf(ji as f64 * (ai + epsilon - set.n)) * set.frac;
            }
            (j.iter().copied().max().unwrap_or(0) as i64, v)
        })
        .collect();
    pending.sort_by_key(|&(k, _)| k);
    let reach = weight.table_reach().unwrap_or(0) as i64;

    let shell_decay = ctx.powf(-set.r * m as f64 * epsilon);
    let mut slot_sums: Vec<f64> = vec![0.0; m];
    let mut slot_pows: Vec<f64> = vec![1.0; m];
    let mut pending_at = 0usize;
    let mut table_level = 0.0;
    let mut weight_pow = 1.0;
    let mut total = Accum::new();
    let mut k: i64 = 0;
    loop {
        if k as usize >= tol.max_terms {
            return Err(Error::TruncationCap {
                max_terms: tol.max_terms,
            });
        }
        if let Some(bases) = &sep {
            for (i, &(c, x)) in bases.iter().enumerate() {
                slot_sums[i] += c * slot_pows[i];
                slot_pows[i] *= x;
            }
        }
        while pending_at < pending.len() && pending[pending_at].0 <= k {
            table_level += pending[pending_at].1;
            pending_at += 1;
        }
        let sep_part: f64 = if sep.is_some() {
            slot_sums.iter().product()
        } else {
            0.0
        };
        let level = sep_part + table_level;
        let term = weight_pow * level.powf(set.r);
        total.add(term);
        weight_pow *= shell_decay;

        if k >= reach {
            // beyond this shell the correction level is frozen, so the slot
            // growth ratios bound every later term by a geometric series
            let growth = match &sep {
                Some(bases) => bases
                    .iter()
                    .enumerate()
                    .map(|(i, &(c, _))| (slot_sums[i] + c * slot_pows[i]) / slot_sums[i])
                    .product::<f64>(),
                None => 1.0,
            };
            let theta = shell_decay * growth.powf(set.r);
            if theta < 1.0 {
                let tail = term * theta / (1.0 - theta);
                if tail <= tol.rel_tail * total.value() || total.value() == 0.0 {
                    break;
                }
            }
        }
        k += 1;
    }

    let num = (set.frac.powf(set.r / set.q) * total.value()).powf(1.0 / set.r);
    Ok(num / extremal_norm_product(ctx, params, epsilon))
}

fn herz_ratio_dual(
    ctx: PadicContext,
    weight: &ShellWeight,
    params: &MultilinearParams,
    epsilon: f64,
) -> Result<f64> {
    let set = ratio_setup(ctx, weight, params)?;
    let m = params.m() as f64;
    char_const(ConstantKind::HerzDual, ctx, weight, params)?;

    // level constants of the output: on shells k >= 0 the output is
    // p^(-k (agg + m eps)) times (separable + table) levels
    let sep_levels: Option<Vec<f64>> = weight
        .slots()
        .filter(|ss| ss.iter().all(|s| s.coeff > 0.0))
        .map(|ss| {
            ss.iter()
                .zip(&set.a)
                .map(|(s, &ai)| {
                    s.coeff * set.frac / (1.0 - ctx.powf(-(ai + epsilon + s.beta)))
                })
                .collect()
        });
    let c_sep: f64 = sep_levels.as_ref().map_or(0.0, |v| v.iter().product());
    let mut c_tab = Accum::new();
    for (j, &w) in weight.table() {
        let mut v = w;
        for (&ji, &ai) in j.iter().zip(&set.a) {
            v *= ctx.powf(-(ji as f64) * (ai + epsilon)) * set.frac;
        }
        c_tab.add(v);
    }
    let c_total = c_sep + c_tab.value();

    // nonnegative shells: a single geometric series in p^(-r m eps)
    let mut num_r = Accum::new();
    num_r.add(c_total.powf(set.r) / (1.0 - ctx.powf(-set.r * m * epsilon)));

    // shells below every table index: pure separable tails, decaying
    // upward at the rate r (alpha + n/q + sum beta_i)
    let beta_sum: f64 = weight
        .slots()
        .map(|ss| ss.iter().map(|s| s.beta).sum())
        .unwrap_or(0.0);
    let visible_from = weight
        .table()
        .keys()
        .map(|j| j.iter().copied().min().unwrap_or(0))
        .max()
        .unwrap_or(0) as i64;
    if c_sep > 0.0 {
        let far_rate = set.r * (set.agg + beta_sum);
        if far_rate <= 0.0 {
            return Err(Error::DivergentSeries {
                reason: format!(
                    "the output norm diverges over small shells: \
                     r (alpha + n/q + sum beta_i) = {far_rate} <= 0"
                ),
            });
        }
        // sum of p^(k far_rate) over k <= -(visible_from + 1)
        num_r.add(
            c_sep.powf(set.r) * ctx.powf(-(visible_from + 1) as f64 * far_rate)
                / (1.0 - ctx.powf(-far_rate)),
        );
    }

    // intermediate negative shells where part of the table still acts
    for k in -visible_from..0 {
        let mut level = c_sep * ctx.powf(k as f64 * beta_sum);
        for (j, &w) in weight.table() {
            if j.iter().copied().min().unwrap_or(0) as i64 >= -k {
                let mut v = w;
                for (&ji, &ai) in j.iter().zip(&set.a) {
                    v *= ctx.powf(-((k + ji as i64) as f64) * (ai + epsilon)) * set.frac;
                }
                level += v;
            }
        }
        num_r.add(ctx.powf(k as f64 * set.r * set.agg) * level.powf(set.r));
    }

    let num = (set.frac.powf(set.r / set.q) * num_r.value()).powf(1.0 / set.r);
    Ok(num / extremal_norm_product(ctx, params, epsilon))
}

/// Output-to-input norm ratio of the operator on the near-critical family
/// at parameter `epsilon`. The forward form is summed with a certified
/// geometric tail bound; the dual form is evaluated in closed form.
pub fn herz_ratio(
    kind: OperatorKind,
    ctx: PadicContext,
    weight: &ShellWeight,
    params: &MultilinearParams,
    epsilon: f64,
    tol: &ToleranceSpec,
) -> Result<RatioPoint> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    let ratio = match kind {
        OperatorKind::Forward => herz_ratio_forward(ctx, weight, params, epsilon, tol)?,
        OperatorKind::Dual => herz_ratio_dual(ctx, weight, params, epsilon)?,
    };
    Ok(RatioPoint { epsilon, ratio })
}

/// One grid point of a sharpness sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub level: u32,
    pub epsilon: f64,
    pub ratio: f64,
    /// `(constant - ratio) / constant`
    pub relative_gap: f64,
    pub bound_satisfied: bool,
}

/// Ratios across the dyadic grid, together with the constant they
/// approach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: OperatorKind,
    pub constant: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn all_bounded(&self) -> bool {
        self.rows.iter().all(|r| r.bound_satisfied)
    }

    /// Relative gap at the finest grid point.
    pub fn final_gap(&self) -> f64 {
        self.rows.last().map(|r| r.relative_gap).unwrap_or(f64::NAN)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("epsilon,ratio,constant,relative_gap,status\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{:.8e},{:.8e},{:.8e},{:.8e},{}\n",
                row.epsilon,
                row.ratio,
                self.constant,
                row.relative_gap,
                if row.bound_satisfied { "ok" } else { "violated" }
            ));
        }
        out
    }
}

/// Evaluate [`herz_ratio`] on `eps = 2^-l` for `l = 0..=levels` and check
/// each point against the characteristic constant.
pub fn herz_sweep(
    kind: OperatorKind,
    ctx: PadicContext,
    weight: &ShellWeight,
    params: &MultilinearParams,
    config: &SharpnessConfig,
) -> Result<SweepReport> {
    let constant_kind = match kind {
        OperatorKind::Forward => ConstantKind::Herz,
        OperatorKind::Dual => ConstantKind::HerzDual,
    };
    let constant = char_const(constant_kind, ctx, weight, params)?.value;
    let mut rows = Vec::with_capacity(config.levels as usize + 1);
    for level in 0..=config.levels {
        let epsilon = 0.5f64.powi(level as i32);
        let point = herz_ratio(kind, ctx, weight, params, epsilon, &config.tol)?;
        let relative_gap = if constant > 0.0 {
            (constant - point.ratio) / constant
        } else {
            0.0
        };
        rows.push(SweepRow {
            level,
            epsilon,
            ratio: point.ratio,
            relative_gap,
            bound_satisfied: point.ratio <= constant * (1.0 + SHARPNESS_BOUND_SLACK),
        });
    }
    Ok(SweepReport {
        kind,
        constant,
        rows,
    })
}

/// Classification of a Morrey-Herz exactness check by how each slot sits
/// relative to the critical line `alpha_i = lambda_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExactnessCase {
    AllDistinct,
    AllEqual,
    Mixed,
}

/// Result of applying the operator to the Morrey-Herz extremal family and
/// renormalising.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MhRatioReport {
    pub case: ExactnessCase,
    pub ratio: f64,
    pub constant: f64,
    /// `|ratio - constant| / constant`
    pub relative_gap: f64,
    /// Decay exponent recovered from the operator output; the output is
    /// checked to be the pure power `|x|^extracted_exponent`.
    pub extracted_exponent: f64,
    pub warnings: Vec<String>,
}

fn classify_case(params: &MultilinearParams) -> (ExactnessCase, Vec<String>) {
    const CASE_EPS: f64 = 1e-12;
    const NEAR_EPS: f64 = 1e-9;
    let mut warnings = Vec::new();
    let mut equal = 0usize;
    for (i, s) in params.slots().iter().enumerate() {
        let d = (s.alpha - s.lambda).abs();
        if d <= CASE_EPS {
            equal += 1;
        } else if d <= NEAR_EPS {
            warnings.push(format!(
                "slot {i} sits within {d:.2e} of alpha = lambda; its case \
                 classification may be unstable"
            ));
        }
    }
    let case = if equal == params.m() {
        ExactnessCase::AllEqual
    } else if equal == 0 {
        ExactnessCase::AllDistinct
    } else {
        ExactnessCase::Mixed
    };
    (case, warnings)
}

/// Apply the operator to the extremal family `|x|^(-(alpha_i + n/q_i -
/// lambda_i))`, verify the output is again a pure power, and return the
/// norm ratio. Under the split `q_i = m q`, `r_i = m r`, `lambda_i =
/// lambda / m` the ratio equals the characteristic constant exactly.
pub fn morrey_herz_ratio(
    kind: OperatorKind,
    ctx: PadicContext,
    weight: &ShellWeight,
    params: &MultilinearParams,
    tol: &ToleranceSpec,
) -> Result<MhRatioReport> {
    ensure_nonnegative_weight(weight)?;
    params.ensure_balanced()?;
    params.ensure_exactness_split()?;
    let constant_kind = match kind {
        OperatorKind::Forward => ConstantKind::MorreyHerz,
        OperatorKind::Dual => ConstantKind::MorreyHerzDual,
    };
    let constant = char_const(constant_kind, ctx, weight, params)?.value;

    let inputs: Vec<RadialFunction> = params
        .slots()
        .iter()
        .map(|s| mh_extremal(ctx, s))
        .collect::<Result<_>>()?;
    let reach = weight.table_reach().unwrap_or(0) as i64 + 16;
    let out = match kind {
        OperatorKind::Forward => apply_hardy(weight, &inputs, -reach..=reach)?,
        OperatorKind::Dual => apply_dual_hardy(weight, &inputs, -reach..=reach)?,
    };
    if let Some(&k) = out.divergent_shells.first() {
        return Err(Error::DivergentSeries {
            reason: format!("the operator output diverges on shell {k}"),
        });
    }

    let target = params.target();
    let n = ctx.n() as f64;
    let exponent = target.lambda - target.alpha - n / target.q;
    let scale = out.value_at(0).ok_or_else(|| {
        Error::InvalidParameter("the output window does not contain shell 0".into())
    })?;
    for v in &out.values {
        let want = scale * ctx.powf(v.shell as f64 * exponent);
        if (v.value - want).abs() > 1e-12 * want.abs().max(v.value.abs()) {
            return Err(Error::InvalidParameter(format!(
                "operator output deviates from a pure power law on shell {}: \
                 {} vs {}",
                v.shell, v.value, want
            )));
        }
    }

    let output = RadialFunction::power_law(ctx, scale, exponent, None, None)?;
    let num = morrey_herz_norm(&output, &target, tol)?.value;
    let mut den = 1.0;
    for (f, s) in inputs.iter().zip(params.slots()) {
        let slot_space = MorreyHerzParams::new(s.alpha, s.q, s.r, s.lambda)?;
        den *= morrey_herz_norm(f, &slot_space, tol)?.value;
    }
    let ratio = num / den;
    let (case, warnings) = classify_case(params);
    Ok(MhRatioReport {
        case,
        ratio,
        constant,
        relative_gap: (ratio - constant).abs() / constant,
        extracted_exponent: exponent,
        warnings,
    })
}
