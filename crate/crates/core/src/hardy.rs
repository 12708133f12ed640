//! Weighted multilinear Hardy averaging operators on radial functions.
//!
//! The forward operator averages each input over the balls below the
//! evaluation shell,
//!
//! ```text
//! H(f_1, ..., f_m)(k) = sum_{j in N^m} w(j) * prod_i f_i(k - j_i) * p^(-j_i*n) * (1 - p^-n),
//! ```
//!
//! while the dual operator reaches upward with plain sphere fractions,
//!
//! ```text
//! H*(f_1, ..., f_m)(k) = sum_{j in N^m} w(j) * prod_i f_i(k + j_i) * (1 - p^-n).
//! ```
//!
//! The shell weight w is described by an optional separable part
//! `prod_i c_i p^(-beta_i*j_i)` plus a finite table of multi-index
//! corrections; everything downstream (operator values, characteristic
//! constants, Monte-Carlo strata) is driven by that descriptor. All slot
//! series are geometric, so convergence is decided analytically and
//! divergent requests fail loudly.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::sync::Arc;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::herz::MorreyHerzParams;
use crate::padic::{sample_sphere, PadicContext, PadicVector, ShellIndex};
use crate::radial::RadialFunction;
use crate::series::Accum;

/// Direction of the averaging: downward over smaller shells (forward) or
/// upward over larger shells (dual).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    Forward,
    Dual,
}

/// One factor `coeff * p^(-beta * j)` of a separable shell weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerWeightSlot {
    pub coeff: f64,
    pub beta: f64,
}

/// Pointwise weight used by the Monte-Carlo estimator; receives the m
/// sampled argument vectors.
pub type PointwiseWeight = dyn Fn(&[PadicVector]) -> f64 + Send + Sync;

/// Weight on shell multi-indices `j in N^m`: a separable power part plus a
/// finite table of additive corrections, and optionally a pointwise
/// evaluator for Monte-Carlo runs with genuinely non-radial weights.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "ShellWeightRepr", into = "ShellWeightRepr")]
pub struct ShellWeight {
    m: usize,
    slots: Vec<PowerWeightSlot>,
    table: BTreeMap<Vec<u32>, f64>,
    #[serde(skip)]
    pointwise: Option<Arc<PointwiseWeight>>,
}

impl fmt::Debug for ShellWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShellWeight")
            .field("m", &self.m)
            .field("slots", &self.slots)
            .field("table", &self.table)
            .field("pointwise", &self.pointwise.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl ShellWeight {
    /// The constant weight 1 on every multi-index.
    pub fn one(m: usize) -> Self {
        Self::separable(vec![PowerWeightSlot { coeff: 1.0, beta: 0.0 }; m])
            .expect("unit slots are valid")
    }

    /// Product weight `prod_i coeff_i * p^(-beta_i * j_i)`.
    pub fn separable(slots: Vec<PowerWeightSlot>) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::InvalidParameter(
                "a shell weight needs at least one slot".into(),
            ));
        }
        if slots
            .iter()
            .any(|s| !s.coeff.is_finite() || !s.beta.is_finite())
        {
            return Err(Error::InvalidParameter(
                "weight slot parameters must be finite".into(),
            ));
        }
        Ok(Self {
            m: slots.len(),
            slots,
            table: BTreeMap::new(),
            pointwise: None,
        })
    }

    /// Weight supported on finitely many multi-indices.
    pub fn from_table(
        m: usize,
        entries: impl IntoIterator<Item = (Vec<u32>, f64)>,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter(
                "a shell weight needs at least one slot".into(),
            ));
        }
        let weight = Self {
            m,
            slots: Vec::new(),
            table: BTreeMap::new(),
            pointwise: None,
        };
        weight.with_table(entries)
    }

    /// Add finite corrections on top of the existing description.
    pub fn with_table(
        mut self,
        entries: impl IntoIterator<Item = (Vec<u32>, f64)>,
    ) -> Result<Self> {
        for (j, w) in entries {
            if j.len() != self.m {
                return Err(Error::InvalidParameter(format!(
                    "table index {:?} has arity {}, weight has {} slots",
                    j,
                    j.len(),
                    self.m
                )));
            }
            if !w.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "table weight at {j:?} is not finite"
                )));
            }
            if self.table.insert(j.clone(), w).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "duplicate table index {j:?}"
                )));
            }
        }
        Ok(self)
    }

    /// Attach a pointwise evaluator for Monte-Carlo sampling. The shell
    /// descriptor must still dominate the evaluator in absolute value for
    /// the certified tail bound to stay valid.
    pub fn with_pointwise(mut self, f: Arc<PointwiseWeight>) -> Self {
        self.pointwise = Some(f);
        self
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn slots(&self) -> Option<&[PowerWeightSlot]> {
        if self.slots.is_empty() {
            None
        } else {
            Some(&self.slots)
        }
    }

    pub fn table(&self) -> &BTreeMap<Vec<u32>, f64> {
        &self.table
    }

    pub fn pointwise(&self) -> Option<&Arc<PointwiseWeight>> {
        self.pointwise.as_ref()
    }

    /// Shell-level value `w(j)`.
    pub fn psi_bar(&self, ctx: PadicContext, j: &[u32]) -> f64 {
        debug_assert_eq!(j.len(), self.m);
        let mut v = 0.0;
        if !self.slots.is_empty() {
            let mut prod = 1.0;
            for (slot, &ji) in self.slots.iter().zip(j) {
                prod *= slot.coeff * ctx.powf(-(ji as f64) * slot.beta);
            }
            v += prod;
        }
        if let Some(&w) = self.table.get(j) {
            v += w;
        }
        v
    }

    /// Largest coordinate appearing in the table, or None if the table is
    /// empty.
    pub fn table_reach(&self) -> Option<u32> {
        self.table
            .keys()
            .flat_map(|j| j.iter().copied())
            .max()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WeightEntry {
    index: Vec<u32>,
    weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ShellWeightRepr {
    m: usize,
    #[serde(default)]
    slots: Vec<PowerWeightSlot>,
    #[serde(default)]
    table: Vec<WeightEntry>,
}

impl TryFrom<ShellWeightRepr> for ShellWeight {
    type Error = Error;

    fn try_from(repr: ShellWeightRepr) -> Result<Self> {
        let base = if repr.slots.is_empty() {
            ShellWeight {
                m: repr.m,
                slots: Vec::new(),
                table: BTreeMap::new(),
                pointwise: None,
            }
        } else {
            if repr.slots.len() != repr.m {
                return Err(Error::InvalidParameter(format!(
                    "{} weight slots declared for arity {}",
                    repr.slots.len(),
                    repr.m
                )));
            }
            ShellWeight::separable(repr.slots)?
        };
        if repr.m == 0 {
            return Err(Error::InvalidParameter(
                "a shell weight needs at least one slot".into(),
            ));
        }
        base.with_table(repr.table.into_iter().map(|e| (e.index, e.weight)))
    }
}

impl From<ShellWeight> for ShellWeightRepr {
    fn from(w: ShellWeight) -> Self {
        Self {
            m: w.m,
            slots: w.slots,
            table: w
                .table
                .into_iter()
                .map(|(index, weight)| WeightEntry { index, weight })
                .collect(),
        }
    }
}

/// Input-side exponents for one operator argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotParams {
    pub alpha: f64,
    pub q: f64,
    pub r: f64,
    #[serde(default)]
    pub lambda: f64,
}

impl SlotParams {
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "slot alpha must be finite, got {}",
                self.alpha
            )));
        }
        for (name, v) in [("q", self.q), ("r", self.r)] {
            if !v.is_finite() || v <= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "slot {name} must lie in (1, inf), got {v}"
                )));
            }
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "slot lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Per-slot exponents together with the aggregate target space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MultilinearParamsRepr", into = "MultilinearParamsRepr")]
pub struct MultilinearParams {
    slots: Vec<SlotParams>,
    target: MorreyHerzParams,
}

impl MultilinearParams {
    /// Derive the target from the slots by the balance identities
    /// `alpha = sum alpha_i`, `1/q = sum 1/q_i`, `1/r = sum 1/r_i`,
    /// `lambda = sum lambda_i`.
    pub fn from_slots(slots: Vec<SlotParams>) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one slot is required".into(),
            ));
        }
        for s in &slots {
            s.validate()?;
        }
        let target = MorreyHerzParams {
            alpha: slots.iter().map(|s| s.alpha).sum(),
            q: 1.0 / slots.iter().map(|s| 1.0 / s.q).sum::<f64>(),
            r: 1.0 / slots.iter().map(|s| 1.0 / s.r).sum::<f64>(),
            lambda: slots.iter().map(|s| s.lambda).sum(),
        };
        Ok(Self { slots, target })
    }

    /// Keep an explicitly provided target; use [`Self::validate_balance`]
    /// to see how far it sits from the derived one.
    pub fn with_aggregates(slots: Vec<SlotParams>, target: MorreyHerzParams) -> Result<Self> {
        let derived = Self::from_slots(slots)?;
        target.validate()?;
        Ok(Self { target, ..derived })
    }

    pub fn slots(&self) -> &[SlotParams] {
        &self.slots
    }

    pub fn m(&self) -> usize {
        self.slots.len()
    }

    pub fn target(&self) -> MorreyHerzParams {
        self.target
    }

    /// Human-readable list of violated balance identities; empty when the
    /// target matches the slot sums.
    pub fn validate_balance(&self) -> Vec<String> {
        const TOL: f64 = 1e-12;
        let mut issues = Vec::new();
        let mut check = |name: &str, got: f64, want: f64| {
            if (got - want).abs() > TOL * got.abs().max(want.abs()).max(1.0) {
                issues.push(format!("{name}: target has {got}, slots sum to {want}"));
            }
        };
        check(
            "alpha",
            self.target.alpha,
            self.slots.iter().map(|s| s.alpha).sum(),
        );
        check(
            "1/q",
            1.0 / self.target.q,
            self.slots.iter().map(|s| 1.0 / s.q).sum(),
        );
        check(
            "1/r",
            1.0 / self.target.r,
            self.slots.iter().map(|s| 1.0 / s.r).sum(),
        );
        check(
            "lambda",
            self.target.lambda,
            self.slots.iter().map(|s| s.lambda).sum(),
        );
        issues
    }

    pub fn ensure_balanced(&self) -> Result<()> {
        let issues = self.validate_balance();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::BalanceViolation(issues.join("; ")))
        }
    }

    /// Largest relative deviation from the split `q_i = m q`, `r_i = m r`,
    /// `lambda_i = lambda / m` that the exactness statements assume.
    pub fn split_deviation(&self) -> f64 {
        let m = self.m() as f64;
        let mut dev = 0.0f64;
        for s in &self.slots {
            let rel = |got: f64, want: f64| (got - want).abs() / want.abs().max(1.0);
            dev = dev.max(rel(s.q, m * self.target.q));
            dev = dev.max(rel(s.r, m * self.target.r));
            dev = dev.max(rel(s.lambda, self.target.lambda / m));
        }
        dev
    }

    /// Split check including `alpha_i = alpha / m`, the fully symmetric
    /// configuration.
    pub fn symmetric_split_deviation(&self) -> f64 {
        let m = self.m() as f64;
        let mut dev = self.split_deviation();
        for s in &self.slots {
            dev = dev.max((s.alpha - self.target.alpha / m).abs() / self.target.alpha.abs().max(1.0));
        }
        dev
    }

    pub fn ensure_exactness_split(&self) -> Result<()> {
        const TOL: f64 = 1e-12;
        let dev = self.split_deviation();
        if dev > TOL {
            return Err(Error::SplitViolation(format!(
                "slots deviate from q_i = m*q, r_i = m*r, lambda_i = lambda/m by {dev:.3e}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MultilinearParamsRepr {
    slots: Vec<SlotParams>,
    #[serde(default)]
    target: Option<MorreyHerzParams>,
}

impl TryFrom<MultilinearParamsRepr> for MultilinearParams {
    type Error = Error;

    fn try_from(repr: MultilinearParamsRepr) -> Result<Self> {
        match repr.target {
            Some(target) => MultilinearParams::with_aggregates(repr.slots, target),
            None => MultilinearParams::from_slots(repr.slots),
        }
    }
}

impl From<MultilinearParams> for MultilinearParamsRepr {
    fn from(p: MultilinearParams) -> Self {
        Self {
            slots: p.slots,
            target: Some(p.target),
        }
    }
}

/// Operator output on one shell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellValue {
    pub shell: ShellIndex,
    pub value: f64,
}

/// Operator output over a shell window. Shells whose defining series
/// diverges are listed separately instead of carrying a fake value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorResult {
    pub kind: OperatorKind,
    pub values: Vec<ShellValue>,
    pub divergent_shells: Vec<ShellIndex>,
}

impl OperatorResult {
    pub fn value_at(&self, shell: ShellIndex) -> Option<f64> {
        self.values
            .iter()
            .find(|v| v.shell == shell)
            .map(|v| v.value)
    }
}

fn check_operator_inputs(weight: &ShellWeight, inputs: &[RadialFunction]) -> Result<PadicContext> {
    let first = inputs.first().ok_or_else(|| {
        Error::InvalidParameter("the operator needs at least one input".into())
    })?;
    let ctx = first.context();
    if inputs.len() != weight.m() {
        return Err(Error::InvalidParameter(format!(
            "weight has {} slots but {} inputs were given",
            weight.m(),
            inputs.len()
        )));
    }
    if inputs.iter().any(|f| f.context() != ctx) {
        return Err(Error::ContextMismatch);
    }
    Ok(ctx)
}

fn apply_impl(
    kind: OperatorKind,
    weight: &ShellWeight,
    inputs: &[RadialFunction],
    shells: RangeInclusive<ShellIndex>,
) -> Result<OperatorResult> {
    let ctx = check_operator_inputs(weight, inputs)?;
    let frac = ctx.unit_sphere_fraction();
    let n = ctx.n() as f64;
    let mut result = OperatorResult {
        kind,
        values: Vec::new(),
        divergent_shells: Vec::new(),
    };
    'shells: for k in shells {
        let mut total = Accum::new();
        // a zero coefficient annihilates the whole separable series, so no
        // other slot needs to converge in that case
        if let Some(slots) = weight.slots().filter(|ss| ss.iter().all(|s| s.coeff != 0.0)) {
            let mut prod = 1.0;
            for (slot, f) in slots.iter().zip(inputs) {
                let averaged = match kind {
                    OperatorKind::Forward => f.discounted_lower_sum(k, slot.beta + n),
                    OperatorKind::Dual => f.discounted_upper_sum(k, slot.beta),
                };
                match averaged {
                    Ok(v) => prod *= slot.coeff * frac * v,
                    Err(Error::DivergentSeries { .. }) => {
                        result.divergent_shells.push(k);
                        continue 'shells;
                    }
                    Err(e) => return Err(e),
                }
            }
            total.add(prod);
        }
        for (j, &w) in weight.table() {
            let mut term = w;
            for (i, f) in inputs.iter().enumerate() {
                let ji = j[i] as i64;
                let (arg, mu) = match kind {
                    OperatorKind::Forward => (k - ji, ctx.powf(-(ji as f64) * n) * frac),
                    OperatorKind::Dual => (k + ji, frac),
                };
                term *= f.evaluate(arg) * mu;
            }
            total.add(term);
        }
        result.values.push(ShellValue {
            shell: k,
            value: total.value(),
        });
    }
    Ok(result)
}

/// Forward averaging operator over a window of output shells.
pub fn apply_hardy(
    weight: &ShellWeight,
    inputs: &[RadialFunction],
    shells: RangeInclusive<ShellIndex>,
) -> Result<OperatorResult> {
    apply_impl(OperatorKind::Forward, weight, inputs, shells)
}

/// Dual (upward) averaging operator over a window of output shells.
pub fn apply_dual_hardy(
    weight: &ShellWeight,
    inputs: &[RadialFunction],
    shells: RangeInclusive<ShellIndex>,
) -> Result<OperatorResult> {
    apply_impl(OperatorKind::Dual, weight, inputs, shells)
}

/// Which characteristic constant to evaluate: the operator direction
/// paired with the input-space family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantKind {
    Herz,
    HerzDual,
    MorreyHerz,
    MorreyHerzDual,
}

impl ConstantKind {
    pub fn operator(self) -> OperatorKind {
        match self {
            ConstantKind::Herz | ConstantKind::MorreyHerz => OperatorKind::Forward,
            ConstantKind::HerzDual | ConstantKind::MorreyHerzDual => OperatorKind::Dual,
        }
    }
}

/// Per-slot geometric rate `u_i`: the constant is
/// `sum_j w(j) * prod_i p^(j_i * u_i) * (1 - p^-n)`.
pub fn slot_rates(kind: ConstantKind, ctx: PadicContext, params: &MultilinearParams) -> Vec<f64> {
    let n = ctx.n() as f64;
    params
        .slots()
        .iter()
        .map(|s| match kind {
            ConstantKind::Herz => s.alpha + n / s.q - n,
            ConstantKind::HerzDual => -(s.alpha + n / s.q),
            ConstantKind::MorreyHerz => s.alpha + n / s.q - s.lambda - n,
            ConstantKind::MorreyHerzDual => -(s.alpha - s.lambda + n / s.q),
        })
        .collect()
}

/// Characteristic constant split into its separable slot factors and the
/// finite table correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharConstant {
    pub value: f64,
    pub per_slot: Vec<f64>,
    pub table_part: f64,
}

/// Evaluate the characteristic constant for the given space family.
/// Divergence of any slot series is detected from its rate before
/// anything is summed.
pub fn char_const(
    kind: ConstantKind,
    ctx: PadicContext,
    weight: &ShellWeight,
    params: &MultilinearParams,
) -> Result<CharConstant> {
    if weight.m() != params.m() {
        return Err(Error::InvalidParameter(format!(
            "weight has {} slots but the parameters describe {}",
            weight.m(),
            params.m()
        )));
    }
    for s in params.slots() {
        s.validate()?;
    }
    let rates = slot_rates(kind, ctx, params);
    let frac = ctx.unit_sphere_fraction();

    let mut per_slot = Vec::new();
    if let Some(slots) = weight.slots() {
        if slots.iter().any(|s| s.coeff == 0.0) {
            // the separable series vanishes identically
            per_slot = vec![0.0; slots.len()];
        } else {
            for (i, (slot, &u)) in slots.iter().zip(&rates).enumerate() {
                let rate = u - slot.beta;
                if rate >= 0.0 {
                    return Err(Error::DivergentSeries {
                        reason: format!(
                            "slot {i} series has term ratio p^{rate} >= 1; \
                             the characteristic constant is infinite"
                        ),
                    });
                }
                per_slot.push(slot.coeff * frac / (1.0 - ctx.powf(rate)));
            }
        }
    }

    let mut table_part = Accum::new();
    for (j, &w) in weight.table() {
        let mut term = w;
        for (&ji, &u) in j.iter().zip(&rates) {
            term *= ctx.powf(ji as f64 * u) * frac;
        }
        table_part.add(term);
    }
    let table_part = table_part.value();

    let sep: f64 = if per_slot.is_empty() {
        0.0
    } else {
        per_slot.iter().product()
    };
    Ok(CharConstant {
        value: sep + table_part,
        per_slot,
        table_part,
    })
}

/// Stratified Monte-Carlo estimation setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub samples_per_stratum: usize,
    /// Strata cover multi-indices in `[0, max_shell]^m`; everything beyond
    /// enters the certified tail bound.
    pub max_shell: u32,
    pub seed: u64,
    pub digit_depth: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples_per_stratum: 200,
            max_shell: 12,
            seed: 0,
            digit_depth: 16,
        }
    }
}

/// Monte-Carlo estimate with its two error components: sampling noise and
/// the analytic bound on the mass outside the sampled strata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stat_stderr: f64,
    pub tail_bound: f64,
    pub total_stderr: f64,
    pub strata: usize,
    pub samples: usize,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Estimate the characteristic constant by integrating the weight over
/// spheres: each stratum `j` carries the exact mass
/// `prod_i p^(j_i * u_i) * (1 - p^-n)` and the weight is averaged over
/// Haar-uniform sphere samples. The part of the sum beyond the sampled
/// box is bounded in closed form from the shell descriptor, so the
/// reported uncertainty is statistical noise plus that analytic tail.
pub fn mc_char_const(
    kind: ConstantKind,
    ctx: PadicContext,
    weight: &ShellWeight,
    params: &MultilinearParams,
    config: &McConfig,
) -> Result<McEstimate> {
    if weight.m() != params.m() {
        return Err(Error::InvalidParameter(format!(
            "weight has {} slots but the parameters describe {}",
            weight.m(),
            params.m()
        )));
    }
    if config.samples_per_stratum == 0 || config.digit_depth == 0 {
        return Err(Error::McUnavailable(
            "samples_per_stratum and digit_depth must be positive".into(),
        ));
    }
    let rates = slot_rates(kind, ctx, params);
    let frac = ctx.unit_sphere_fraction();
    let m = weight.m();
    let jmax = config.max_shell;

    // analytic convergence check and closed-form tail of the separable part
    let mut tail_bound = 0.0;
    if let Some(slots) = weight.slots() {
        if slots.iter().all(|s| s.coeff != 0.0) {
            let mut full = 1.0;
            let mut boxed = 1.0;
            for (i, (slot, &u)) in slots.iter().zip(&rates).enumerate() {
                let rate = u - slot.beta;
                if rate >= 0.0 {
                    return Err(Error::DivergentSeries {
                        reason: format!(
                            "slot {i} series has term ratio p^{rate} >= 1; \
                             the characteristic constant is infinite"
                        ),
                    });
                }
                let x = ctx.powf(rate);
                let c = slot.coeff.abs() * frac;
                full *= c / (1.0 - x);
                boxed *= c * (1.0 - x.powi(jmax as i32 + 1)) / (1.0 - x);
            }
            tail_bound += (full - boxed).max(0.0);
        }
    }
    // table entries beyond the box are bounded exactly rather than sampled
    for (j, &w) in weight.table() {
        if j.iter().any(|&ji| ji > jmax) {
            let mut term = w.abs();
            for (&ji, &u) in j.iter().zip(&rates) {
                term *= ctx.powf(ji as f64 * u) * frac;
            }
            tail_bound += term;
        }
    }

    let strata_count = (jmax as usize + 1).pow(m as u32);
    let mut index = vec![0u32; m];
    let mut estimate = Accum::new();
    let mut variance = Accum::new();
    for stratum in 0..strata_count {
        // exact stratum mass
        let mut mass = 1.0;
        for (&ji, &u) in index.iter().zip(&rates) {
            mass *= ctx.powf(ji as f64 * u) * frac;
        }
        let mut rng =
            ChaCha8Rng::seed_from_u64(splitmix64(config.seed ^ splitmix64(stratum as u64)));
        let n_samples = config.samples_per_stratum;
        let mut mean = 0.0;
        let mut msq = 0.0;
        for s in 0..n_samples {
            let points: Vec<PadicVector> = index
                .iter()
                .map(|&ji| sample_sphere(ctx, -(ji as i64), &mut rng, config.digit_depth))
                .collect();
            let value = match weight.pointwise() {
                Some(f) => f(&points),
                None => weight.psi_bar(ctx, &index),
            };
            // Welford running moments
            let delta = value - mean;
            mean += delta / (s + 1) as f64;
            msq += delta * (value - mean);
        }
        estimate.add(mass * mean);
        if n_samples > 1 {
            let sample_var = msq / (n_samples - 1) as f64;
            variance.add(mass * mass * sample_var / n_samples as f64);
        }

        // advance the multi-index odometer
        for d in index.iter_mut() {
            if *d < jmax {
                *d += 1;
                break;
            }
            *d = 0;
        }
    }

    let stat_stderr = variance.value().max(0.0).sqrt();
    Ok(McEstimate {
        estimate: estimate.value(),
        stat_stderr,
        tail_bound,
        total_stderr: stat_stderr + tail_bound,
        strata: strata_count,
        samples: strata_count * config.samples_per_stratum,
    })
}
