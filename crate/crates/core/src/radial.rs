//! Radial step functions on Q_p^n.
//!
//! A radial function is constant on each sphere `S_k`, so it is determined
//! by its shell values. This module represents such functions as a finite
//! table of exceptional shells plus power-law segments `c * p^(k*e)` over
//! shell ranges that may be unbounded on either side. Norms and integrals
//! of these functions reduce to geometric sums, evaluated in closed form
//! by [`crate::series::geometric_sum`]; divergence is detected
//! analytically rather than by truncation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{PadicContext, ShellIndex};
use crate::series::{geometric_sum, Accum};

/// Truncation policy for series without a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    /// Stop once a certified bound on the remaining tail drops below this
    /// fraction of the accumulated value.
    pub rel_tail: f64,
    /// Hard cap on summed terms; exceeding it is an error, not a silent
    /// truncation.
    pub max_terms: usize,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            rel_tail: 1e-14,
            max_terms: 100_000,
        }
    }
}

/// Shell values `coeff * p^(shell * exponent)` on `lo..=hi`; a missing
/// bound leaves that side unbounded. Equivalently the restriction of
/// `coeff * |x|^exponent` to an annulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSegment {
    pub coeff: f64,
    pub exponent: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<ShellIndex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<ShellIndex>,
}

impl PowerSegment {
    pub fn new(coeff: f64, exponent: f64, lo: Option<ShellIndex>, hi: Option<ShellIndex>) -> Self {
        Self {
            coeff,
            exponent,
            lo,
            hi,
        }
    }

    pub fn contains(&self, k: ShellIndex) -> bool {
        self.lo.is_none_or(|l| k >= l) && self.hi.is_none_or(|h| k <= h)
    }

    fn is_empty(&self) -> bool {
        matches!((self.lo, self.hi), (Some(l), Some(h)) if l > h)
    }

    fn validate(&self) -> Result<()> {
        if !self.coeff.is_finite() || !self.exponent.is_finite() {
            return Err(Error::InvalidParameter(
                "segment coefficient and exponent must be finite".into(),
            ));
        }
        if self.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "segment range {:?}..={:?} is empty",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

fn ranges_intersect(
    a: (Option<i64>, Option<i64>),
    b: (Option<i64>, Option<i64>),
) -> Option<ShellIndex> {
    let lo = match (a.0, b.0) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, y) => x.or(y),
    };
    let hi = match (a.1, b.1) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    };
    match (lo, hi) {
        (Some(l), Some(h)) if l > h => None,
        (Some(l), _) => Some(l),
        (None, Some(h)) => Some(h),
        (None, None) => Some(0),
    }
}

/// A function of the shell index alone: a finite table of exceptional
/// shells plus disjoint power-law segments, zero elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RadialFunctionRepr", into = "RadialFunctionRepr")]
pub struct RadialFunction {
    ctx: PadicContext,
    table: BTreeMap<ShellIndex, f64>,
    segments: Vec<PowerSegment>,
}

impl RadialFunction {
    /// The zero function.
    pub fn zero(ctx: PadicContext) -> Self {
        Self {
            ctx,
            table: BTreeMap::new(),
            segments: Vec::new(),
        }
    }

    pub fn from_table(
        ctx: PadicContext,
        entries: impl IntoIterator<Item = (ShellIndex, f64)>,
    ) -> Result<Self> {
        Self::from_parts(ctx, entries, [])
    }

    /// `coeff * |x|^exponent` on the shell range `lo..=hi`.
    pub fn power_law(
        ctx: PadicContext,
        coeff: f64,
        exponent: f64,
        lo: Option<ShellIndex>,
        hi: Option<ShellIndex>,
    ) -> Result<Self> {
        Self::from_parts(ctx, [], [PowerSegment::new(coeff, exponent, lo, hi)])
    }

    /// Indicator of the sphere `S_k`.
    pub fn indicator_shell(ctx: PadicContext, k: ShellIndex) -> Self {
        Self::from_table(ctx, [(k, 1.0)]).expect("single entry cannot clash")
    }

    /// Indicator of the ball `|x|_p <= p^gamma`.
    pub fn indicator_ball(ctx: PadicContext, gamma: ShellIndex) -> Self {
        Self::power_law(ctx, 1.0, 0.0, None, Some(gamma)).expect("single segment cannot clash")
    }

    /// Assemble from a table and segments, rejecting any shell covered by
    /// two pieces.
    pub fn from_parts(
        ctx: PadicContext,
        entries: impl IntoIterator<Item = (ShellIndex, f64)>,
        segments: impl IntoIterator<Item = PowerSegment>,
    ) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (k, v) in entries {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "table value at shell {k} is not finite"
                )));
            }
            if table.insert(k, v).is_some() {
                return Err(Error::OverlappingPieces { k });
            }
        }
        let segments: Vec<PowerSegment> = segments.into_iter().collect();
        for seg in &segments {
            seg.validate()?;
        }
        for (i, a) in segments.iter().enumerate() {
            for b in &segments[i + 1..] {
                if let Some(k) = ranges_intersect((a.lo, a.hi), (b.lo, b.hi)) {
                    return Err(Error::OverlappingPieces { k });
                }
            }
            if let Some(&k) = table.keys().find(|&&k| a.contains(k)) {
                return Err(Error::OverlappingPieces { k });
            }
        }
        Ok(Self {
            ctx,
            table,
            segments,
        })
    }

    pub fn context(&self) -> PadicContext {
        self.ctx
    }

    pub fn table(&self) -> &BTreeMap<ShellIndex, f64> {
        &self.table
    }

    pub fn segments(&self) -> &[PowerSegment] {
        &self.segments
    }

    pub fn is_zero(&self) -> bool {
        self.table.values().all(|&v| v == 0.0)
            && self.segments.iter().all(|s| s.coeff == 0.0)
    }

    /// Value on the sphere `S_k`.
    pub fn evaluate(&self, k: ShellIndex) -> f64 {
        if let Some(&v) = self.table.get(&k) {
            return v;
        }
        for seg in &self.segments {
            if seg.contains(k) {
                return seg.coeff * self.ctx.powf(k as f64 * seg.exponent);
            }
        }
        0.0
    }

    /// Pointwise scaling by `c`.
    pub fn scale(&self, c: f64) -> Self {
        Self {
            ctx: self.ctx,
            table: self.table.iter().map(|(&k, &v)| (k, c * v)).collect(),
            segments: self
                .segments
                .iter()
                .map(|s| PowerSegment::new(c * s.coeff, s.exponent, s.lo, s.hi))
                .collect(),
        }
    }

    /// Shell translation: returns g with `g(k) = f(k - s)`, the dilation
    /// of f by `p^-s`.
    pub fn shift(&self, s: i64) -> Self {
        Self {
            ctx: self.ctx,
            table: self.table.iter().map(|(&k, &v)| (k + s, v)).collect(),
            segments: self
                .segments
                .iter()
                .map(|seg| {
                    PowerSegment::new(
                        seg.coeff * self.ctx.powf(-(s as f64) * seg.exponent),
                        seg.exponent,
                        seg.lo.map(|l| l + s),
                        seg.hi.map(|h| h + s),
                    )
                })
                .collect(),
        }
    }

    /// Haar integral over the ball `B_gamma`:
    /// `sum_{k <= gamma} f(k) |S_k|`.
    pub fn ball_integral(&self, gamma: ShellIndex) -> Result<f64> {
        self.integral_up_to(Some(gamma))
    }

    /// Haar integral over all of Q_p^n.
    pub fn integral(&self) -> Result<f64> {
        self.integral_up_to(None)
    }

    fn integral_up_to(&self, gamma: Option<ShellIndex>) -> Result<f64> {
        let frac = self.ctx.unit_sphere_fraction();
        let n = self.ctx.n() as f64;
        let mut acc = Accum::new();
        for (&k, &v) in &self.table {
            if gamma.is_none_or(|g| k <= g) {
                acc.add(v * self.ctx.powf(k as f64 * n) * frac);
            }
        }
        for seg in &self.segments {
            let hi = match (seg.hi, gamma) {
                (Some(h), Some(g)) => Some(h.min(g)),
                (h, g) => h.or(g),
            };
            if let (Some(l), Some(h)) = (seg.lo, hi) {
                if l > h {
                    continue;
                }
            }
            acc.add(geometric_sum(
                self.ctx.pf(),
                seg.coeff * frac,
                seg.exponent + n,
                seg.lo,
                hi,
            )?);
        }
        Ok(acc.value())
    }

    /// L^q norm of f restricted to the ball `B_gamma`:
    /// `(sum_{k <= gamma} |f(k)|^q |S_k|)^(1/q)`.
    pub fn restrict_norm(&self, gamma: ShellIndex, q: f64) -> Result<f64> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "integrability exponent q must be a positive finite number, got {q}"
            )));
        }
        let frac = self.ctx.unit_sphere_fraction();
        let n = self.ctx.n() as f64;
        let mut acc = Accum::new();
        for (&k, &v) in &self.table {
            if k <= gamma {
                acc.add(v.abs().powf(q) * self.ctx.powf(k as f64 * n) * frac);
            }
        }
        for seg in &self.segments {
            let hi = Some(seg.hi.map_or(gamma, |h| h.min(gamma)));
            if let Some(l) = seg.lo {
                if l > gamma {
                    continue;
                }
            }
            acc.add(geometric_sum(
                self.ctx.pf(),
                seg.coeff.abs().powf(q) * frac,
                q * seg.exponent + n,
                seg.lo,
                hi,
            )?);
        }
        Ok(acc.value().powf(1.0 / q))
    }

    /// `sum_{m <= k} f(m) * p^((m - k) * rate)`: the geometrically
    /// discounted mass of f at and below shell k. With `rate = beta + n`
    /// this is, up to the factor `(1 - p^-n)`, the averaging integral
    /// `sum_{j >= 0} f(k - j) p^(-j beta) p^(-j n)`.
    pub fn discounted_lower_sum(&self, k: ShellIndex, rate: f64) -> Result<f64> {
        let mut acc = Accum::new();
        for (&m, &v) in &self.table {
            if m <= k {
                acc.add(v * self.ctx.powf((m - k) as f64 * rate));
            }
        }
        for seg in &self.segments {
            let hi = Some(seg.hi.map_or(k, |h| h.min(k)));
            if let Some(l) = seg.lo {
                if l > k {
                    continue;
                }
            }
            acc.add(geometric_sum(
                self.ctx.pf(),
                seg.coeff * self.ctx.powf(-(k as f64) * rate),
                seg.exponent + rate,
                seg.lo,
                hi,
            )?);
        }
        Ok(acc.value())
    }

    /// `sum_{m >= k} f(m) * p^(-(m - k) * rate)`: the discounted mass of
    /// f at and above shell k, the shell form of the adjoint averaging
    /// integral `sum_{j >= 0} f(k + j) p^(-j rate)`.
    pub fn discounted_upper_sum(&self, k: ShellIndex, rate: f64) -> Result<f64> {
        let mut acc = Accum::new();
        for (&m, &v) in &self.table {
            if m >= k {
                acc.add(v * self.ctx.powf(-((m - k) as f64) * rate));
            }
        }
        for seg in &self.segments {
            let lo = Some(seg.lo.map_or(k, |l| l.max(k)));
            if let Some(h) = seg.hi {
                if h < k {
                    continue;
                }
            }
            acc.add(geometric_sum(
                self.ctx.pf(),
                seg.coeff * self.ctx.powf(k as f64 * rate),
                seg.exponent - rate,
                lo,
                seg.hi,
            )?);
        }
        Ok(acc.value())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableEntry {
    shell: ShellIndex,
    value: f64,
}

/// Wire form: context fields are inlined and the table is a list, which
/// keeps the type representable in TOML as well as JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RadialFunctionRepr {
    p: u64,
    n: u32,
    #[serde(default)]
    table: Vec<TableEntry>,
    #[serde(default)]
    segments: Vec<PowerSegment>,
}

impl TryFrom<RadialFunctionRepr> for RadialFunction {
    type Error = Error;

    fn try_from(repr: RadialFunctionRepr) -> Result<Self> {
        let ctx = PadicContext::new(repr.p, repr.n)?;
        RadialFunction::from_parts(
            ctx,
            repr.table.into_iter().map(|e| (e.shell, e.value)),
            repr.segments,
        )
    }
}

impl From<RadialFunction> for RadialFunctionRepr {
    fn from(f: RadialFunction) -> Self {
        Self {
            p: f.ctx.p(),
            n: f.ctx.n(),
            table: f
                .table
                .into_iter()
                .map(|(shell, value)| TableEntry { shell, value })
                .collect(),
            segments: f.segments,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(p: u64, n: u32) -> PadicContext {
        PadicContext::new(p, n).unwrap()
    }

    #[test]
    fn power_law_evaluates_as_norm_power() {
        let f = RadialFunction::power_law(ctx(2, 1), 3.0, -0.5, Some(0), None).unwrap();
        assert_eq!(f.evaluate(4), 3.0 * 0.25);
        assert_eq!(f.evaluate(0), 3.0);
        assert_eq!(f.evaluate(-1), 0.0, "outside the segment range");
    }

    #[test]
    fn table_wins_nothing_overlaps() {
        let f = RadialFunction::from_parts(
            ctx(3, 1),
            [(5, 7.0)],
            [PowerSegment::new(1.0, 0.0, None, Some(4))],
        )
        .unwrap();
        assert_eq!(f.evaluate(5), 7.0);
        assert_eq!(f.evaluate(4), 1.0);
        assert_eq!(f.evaluate(6), 0.0);
    }

    #[test]
    fn overlapping_segments_are_rejected() {
        let r = RadialFunction::from_parts(
            ctx(2, 1),
            [],
            [
                PowerSegment::new(1.0, 0.0, Some(0), Some(5)),
                PowerSegment::new(2.0, 1.0, Some(5), None),
            ],
        );
        assert_eq!(r, Err(Error::OverlappingPieces { k: 5 }));

        let r = RadialFunction::from_parts(
            ctx(2, 1),
            [],
            [
                PowerSegment::new(1.0, 0.0, None, Some(3)),
                PowerSegment::new(2.0, 1.0, None, Some(-3)),
            ],
        );
        assert!(matches!(r, Err(Error::OverlappingPieces { .. })));
    }

    #[test]
    fn table_entry_inside_segment_is_rejected() {
        let r = RadialFunction::from_parts(
            ctx(2, 1),
            [(2, 1.5)],
            [PowerSegment::new(1.0, 0.0, Some(0), None)],
        );
        assert_eq!(r, Err(Error::OverlappingPieces { k: 2 }));
    }

    #[test]
    fn duplicate_table_shells_are_rejected() {
        let r = RadialFunction::from_table(ctx(2, 1), [(1, 1.0), (1, 2.0)]);
        assert_eq!(r, Err(Error::OverlappingPieces { k: 1 }));
    }

    #[test]
    fn ball_integral_matches_closed_form() {
        // integral over Z_2 of |x|^(-1/2): sum_{j>=0} 2^(j/2) 2^(-j) / 2
        let f = RadialFunction::power_law(ctx(2, 1), 1.0, -0.5, None, Some(0)).unwrap();
        let got = f.ball_integral(0).unwrap();
        let want = 0.5 / (1.0 - 0.5f64.sqrt());
        assert!((got - want).abs() < 1e-14 * want);
        assert!((got - 1.7071067811865475).abs() < 1e-12);
    }

    #[test]
    fn integral_of_ball_indicator_is_its_measure() {
        let c = ctx(3, 2);
        let f = RadialFunction::indicator_ball(c, 2);
        assert!((f.integral().unwrap() - c.ball_measure(2).unwrap()).abs() < 1e-9);
        let g = RadialFunction::indicator_shell(c, -1);
        assert!((g.integral().unwrap() - c.sphere_measure(-1).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn constant_function_has_divergent_integral() {
        let f = RadialFunction::power_law(ctx(2, 1), 1.0, 0.0, None, None).unwrap();
        assert!(matches!(f.integral(), Err(Error::DivergentSeries { .. })));
    }

    #[test]
    fn restrict_norm_matches_brute_force() {
        let c = ctx(3, 2);
        let f = RadialFunction::from_parts(
            c,
            [(1, 2.0)],
            [PowerSegment::new(1.5, -0.25, None, Some(0))],
        )
        .unwrap();
        let q = 2.5;
        for gamma in [0i64, 1, 5] {
            let mut brute = 0.0;
            for k in -300..=gamma {
                brute += f.evaluate(k).abs().powf(q) * c.sphere_measure(k).unwrap();
            }
            let got = f.restrict_norm(gamma, q).unwrap();
            assert!(
                (got - brute.powf(1.0 / q)).abs() < 1e-12 * brute.powf(1.0 / q),
                "gamma {gamma}"
            );
        }
    }

    #[test]
    fn restrict_norm_diverges_for_critical_exponent() {
        // |x|^(-n/q) is exactly the borderline non-integrable power
        let c = ctx(2, 1);
        let f = RadialFunction::power_law(c, 1.0, -0.5, None, Some(0)).unwrap();
        assert!(matches!(
            f.restrict_norm(0, 2.0),
            Err(Error::DivergentSeries { .. })
        ));
    }

    #[test]
    fn discounted_sums_match_brute_force() {
        let c = ctx(2, 1);
        let f = RadialFunction::from_parts(
            c,
            [(3, -1.0)],
            [
                PowerSegment::new(1.0, -0.5, Some(0), Some(2)),
                PowerSegment::new(0.5, 0.25, Some(6), None),
            ],
        )
        .unwrap();
        for k in [-2i64, 0, 3, 7] {
            let mut lower = 0.0;
            for m in -200..=k {
                lower += f.evaluate(m) * c.powf((m - k) as f64 * 1.75);
            }
            let got = f.discounted_lower_sum(k, 1.75).unwrap();
            assert!((got - lower).abs() < 1e-12 * (1.0 + lower.abs()), "k {k}");

            let mut upper = 0.0;
            for m in k..=400 {
                upper += f.evaluate(m) * c.powf(-((m - k) as f64) * 0.75);
            }
            let got = f.discounted_upper_sum(k, 0.75).unwrap();
            assert!((got - upper).abs() < 1e-10 * (1.0 + upper.abs()), "k {k}");
        }
    }

    #[test]
    fn discounted_sum_divergence_is_signalled() {
        let c = ctx(2, 1);
        // growth 2^(-m) toward minus infinity beats discount 2^(0.5 m)
        let f = RadialFunction::power_law(c, 1.0, -1.0, None, Some(0)).unwrap();
        assert!(matches!(
            f.discounted_lower_sum(0, 0.5),
            Err(Error::DivergentSeries { .. })
        ));
        let g = RadialFunction::power_law(c, 1.0, 1.0, Some(0), None).unwrap();
        assert!(matches!(
            g.discounted_upper_sum(0, 0.5),
            Err(Error::DivergentSeries { .. })
        ));
    }

    #[test]
    fn shift_translates_shells() {
        let f = RadialFunction::from_parts(
            ctx(2, 1),
            [(0, 2.0)],
            [PowerSegment::new(1.0, -0.5, Some(1), None)],
        )
        .unwrap();
        let g = f.shift(3);
        for k in -4..10 {
            assert!(
                (g.evaluate(k) - f.evaluate(k - 3)).abs() < 1e-15,
                "shell {k}"
            );
        }
    }

    #[test]
    fn scale_multiplies_everywhere() {
        let f = RadialFunction::from_parts(
            ctx(3, 1),
            [(2, 5.0)],
            [PowerSegment::new(1.0, 1.0, None, Some(0))],
        )
        .unwrap();
        let g = f.scale(-2.0);
        for k in -5..5 {
            assert_eq!(g.evaluate(k), -2.0 * f.evaluate(k));
        }
    }

    #[test]
    fn serde_roundtrip_json_and_toml() {
        let f = RadialFunction::from_parts(
            ctx(5, 2),
            [(-1, 0.25)],
            [PowerSegment::new(2.0, -1.5, Some(0), None)],
        )
        .unwrap();
        let json = serde_json::to_string(&f).unwrap();
        let back: RadialFunction = serde_json::from_str(&json).unwrap();
        assert_eq!(f, back);

        let toml_repr = toml::to_string(&f).unwrap();
        let back: RadialFunction = toml::from_str(&toml_repr).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn serde_rejects_overlaps() {
        let src = r#"
            p = 2
            n = 1
            table = [{ shell = 1, value = 1.0 }]
            [[segments]]
            coeff = 1.0
            exponent = 0.0
            lo = 0
        "#;
        let r: std::result::Result<RadialFunction, _> = toml::from_str(src);
        assert!(r.is_err());
    }
}
