//! End-to-end checks of the shipped guarantees. Each test exercises one
//! numbered criterion and prints a single verdict line; run with
//! `cargo test --test acceptance -- --nocapture` to see them all.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use padic_hardy_core::hardy::{
    apply_dual_hardy, apply_hardy, char_const, mc_char_const, ConstantKind, McConfig,
    MultilinearParams, OperatorKind, PowerWeightSlot, ShellWeight, SlotParams,
};
use padic_hardy_core::herz::{herz_norm, lq_norm, morrey_herz_norm, HerzParams, MorreyHerzParams};
use padic_hardy_core::padic::{sample_unit_with, PadicContext, SamplerConfig};
use padic_hardy_core::radial::{RadialFunction, ToleranceSpec};
use padic_hardy_core::sharpness::{
    herz_sweep, mh_extremal, morrey_herz_ratio, ExactnessCase, SharpnessConfig,
};
use padic_hardy_core::Error;

/// Pinned tolerances for every criterion below.
const REL_CONSTANT: f64 = 1e-9;
const REL_EXACT: f64 = 1e-9;
const REL_IDENTITY: f64 = 1e-12;
const BOUND_SLACK: f64 = 1e-9;
const MC_SIGMA: f64 = 3.0;
const SWEEP_FINAL_GAP: f64 = 0.02;

struct Criterion {
    label: &'static str,
    start: Instant,
    budget_ms: u128,
    passed: bool,
}

impl Criterion {
    fn start(label: &'static str, budget_ms: u128) -> Self {
        Self {
            label,
            start: Instant::now(),
            budget_ms,
            passed: false,
        }
    }

    fn pass(mut self) {
        let elapsed = self.start.elapsed().as_millis();
        assert!(
            elapsed <= self.budget_ms,
            "{} exceeded its time budget: {elapsed} ms > {} ms",
            self.label,
            self.budget_ms
        );
        self.passed = true;
        println!("[acceptance] {}: PASS ({elapsed} ms)", self.label);
    }
}

impl Drop for Criterion {
    fn drop(&mut self) {
        if !self.passed {
            println!("[acceptance] {}: FAIL", self.label);
        }
    }
}

fn ctx(p: u64, n: u32) -> PadicContext {
    PadicContext::new(p, n).unwrap()
}

fn canonical_forward() -> MultilinearParams {
    MultilinearParams::from_slots(vec![
        SlotParams { alpha: 0.0, q: 2.0, r: 4.0, lambda: 0.0 },
        SlotParams { alpha: 0.0, q: 2.0, r: 4.0, lambda: 0.0 },
    ])
    .unwrap()
}

fn canonical_dual() -> MultilinearParams {
    MultilinearParams::from_slots(vec![
        SlotParams { alpha: 0.25, q: 2.0, r: 4.0, lambda: 0.0 },
        SlotParams { alpha: 0.25, q: 2.0, r: 4.0, lambda: 0.0 },
    ])
    .unwrap()
}

fn morrey_cases() -> [(MultilinearParams, ExactnessCase); 3] {
    let slot = |alpha: f64| SlotParams { alpha, q: 2.0, r: 4.0, lambda: 0.125 };
    [
        (
            MultilinearParams::from_slots(vec![slot(0.25), slot(0.25)]).unwrap(),
            ExactnessCase::AllDistinct,
        ),
        (
            MultilinearParams::from_slots(vec![slot(0.125), slot(0.125)]).unwrap(),
            ExactnessCase::AllEqual,
        ),
        (
            MultilinearParams::from_slots(vec![slot(0.125), slot(0.25)]).unwrap(),
            ExactnessCase::Mixed,
        ),
    ]
}

#[test]
fn c01_norms_are_ultrametric() {
    let crit = Criterion::start("C1 ultrametric norm inequality", 1_000);
    for &p in &[2u64, 3, 5, 7] {
        let c = ctx(p, 1);
        let config = SamplerConfig { digit_depth: 24 };
        let samples = sample_unit_with(c, 20_000, 0xC1 + p, &config);
        let mut distinct_pairs = 0usize;
        for (i, pair) in samples.chunks_exact(2).enumerate() {
            let shift = (i % 11) as i64 - 5;
            let x = pair[0].components()[0].scaled_by_p_power(shift);
            let y = pair[1].components()[0].clone();
            let bound = x.norm().max(y.norm());
            match x.add(&y) {
                Ok(z) => {
                    assert!(
                        z.norm() <= bound,
                        "p={p}: |x+y| = {} > max(|x|,|y|) = {bound}",
                        z.norm()
                    );
                    if x.norm() != y.norm() {
                        distinct_pairs += 1;
                        assert_eq!(
                            z.norm(),
                            bound,
                            "p={p}: differing norms must make the inequality an equality"
                        );
                    }
                }
                Err(Error::PrecisionExhausted) => {
                    // full cancellation: the sum is smaller than either
                    // operand resolves, consistent with the bound
                    assert_eq!(x.norm(), y.norm());
                }
                Err(e) => panic!("unexpected error: {e}"),
            }
        }
        assert!(
            distinct_pairs > 2_000,
            "p={p}: the equality branch was barely exercised ({distinct_pairs} pairs)"
        );
    }
    crit.pass();
}

#[test]
fn c02_measures_telescope_and_the_sampler_matches_them() {
    let crit = Criterion::start("C2 ball/sphere measures and sampler", 5_000);
    for &(p, n) in &[(2u64, 1u32), (3, 1), (5, 2), (7, 3)] {
        let c = ctx(p, n);
        for gamma in -20..=20i64 {
            let ball = c.ball_measure(gamma).unwrap();
            let below = c.ball_measure(gamma - 1).unwrap();
            let sphere = c.sphere_measure(gamma).unwrap();
            assert!(
                (ball - below - sphere).abs() <= REL_IDENTITY * ball,
                "p={p}, n={n}, gamma={gamma}"
            );
            assert!((sphere / ball - c.unit_sphere_fraction()).abs() <= REL_IDENTITY);
        }
    }
    // shell frequencies of the unit-ball sampler against the exact
    // sphere fractions, all within four binomial standard deviations
    let total = 100_000usize;
    for &(p, n) in &[(2u64, 1u32), (3, 2)] {
        let c = ctx(p, n);
        let samples = sample_unit_with(c, total, 0xC2, &SamplerConfig { digit_depth: 16 });
        let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
        for v in &samples {
            if let Ok(shell) = v.shell_of() {
                *counts.entry(shell).or_default() += 1;
            }
        }
        for j in 0..=8i64 {
            let prob = c.powf(-(j as f64) * n as f64) * c.unit_sphere_fraction();
            let expected = total as f64 * prob;
            let sigma = (total as f64 * prob * (1.0 - prob)).sqrt();
            let observed = counts.get(&(-j)).copied().unwrap_or(0) as f64;
            assert!(
                (observed - expected).abs() <= 4.0 * sigma,
                "p={p}, n={n}, shell -{j}: observed {observed}, expected {expected} +- {sigma}"
            );
        }
    }
    crit.pass();
}

#[test]
fn c03_forward_constant_and_monte_carlo_agree() {
    let crit = Criterion::start("C3 forward constant vs Monte-Carlo", 10_000);
    let c = ctx(2, 1);
    let weight = ShellWeight::one(2);
    let params = canonical_forward();
    let constant = char_const(ConstantKind::Herz, c, &weight, &params).unwrap();
    assert!(
        (constant.value - 2.914213562).abs() <= REL_CONSTANT,
        "constant {}",
        constant.value
    );
    for s in &constant.per_slot {
        assert!((s - 1.7071067811865475).abs() <= 1e-12);
    }
    let est = mc_char_const(
        ConstantKind::Herz,
        c,
        &weight,
        &params,
        &McConfig {
            samples_per_stratum: 200,
            max_shell: 12,
            seed: 2024,
            digit_depth: 16,
        },
    )
    .unwrap();
    assert!(
        (est.estimate - constant.value).abs() <= MC_SIGMA * est.total_stderr,
        "estimate {} vs {} with stderr {}",
        est.estimate,
        constant.value,
        est.total_stderr
    );
    crit.pass();
}

#[test]
fn c04_forward_ratios_approach_the_constant_from_below() {
    let crit = Criterion::start("C4 forward sharpness sweep", 30_000);
    let c = ctx(2, 1);
    let report = herz_sweep(
        OperatorKind::Forward,
        c,
        &ShellWeight::one(2),
        &canonical_forward(),
        &SharpnessConfig::default(),
    )
    .unwrap();
    assert_eq!(report.rows.len(), 13);
    for row in &report.rows {
        assert!(
            row.ratio <= report.constant * (1.0 + BOUND_SLACK),
            "level {}: ratio {} above constant {}",
            row.level,
            row.ratio,
            report.constant
        );
    }
    assert!(
        report.final_gap() <= SWEEP_FINAL_GAP && report.final_gap() >= 0.0,
        "final gap {}",
        report.final_gap()
    );
    crit.pass();
}

#[test]
fn c05_forward_morrey_ratios_are_exact() {
    let crit = Criterion::start("C5 forward Morrey exactness", 10_000);
    let c = ctx(2, 1);
    let weight = ShellWeight::one(2);
    for (params, case) in morrey_cases() {
        let report = morrey_herz_ratio(
            OperatorKind::Forward,
            c,
            &weight,
            &params,
            &ToleranceSpec::default(),
        )
        .unwrap();
        assert_eq!(report.case, case);
        assert!(
            report.relative_gap <= REL_EXACT,
            "{case:?}: ratio {} vs constant {}",
            report.ratio,
            report.constant
        );
    }
    crit.pass();
}

#[test]
fn c06_dual_suite_repeats_the_forward_guarantees() {
    let crit = Criterion::start("C6 dual constants, sweep, exactness", 30_000);
    let c = ctx(2, 1);
    let weight = ShellWeight::one(2);

    let params = canonical_dual();
    let constant = char_const(ConstantKind::HerzDual, c, &weight, &params).unwrap();
    assert!(
        (constant.value - 1.5211783723).abs() <= REL_CONSTANT,
        "dual constant {}",
        constant.value
    );
    let est = mc_char_const(
        ConstantKind::HerzDual,
        c,
        &weight,
        &params,
        &McConfig {
            samples_per_stratum: 200,
            max_shell: 12,
            seed: 2025,
            digit_depth: 16,
        },
    )
    .unwrap();
    assert!((est.estimate - constant.value).abs() <= MC_SIGMA * est.total_stderr);

    let report = herz_sweep(
        OperatorKind::Dual,
        c,
        &weight,
        &params,
        &SharpnessConfig::default(),
    )
    .unwrap();
    assert!(report.all_bounded());
    assert!(report.final_gap() <= SWEEP_FINAL_GAP && report.final_gap() >= 0.0);

    for (params, case) in morrey_cases() {
        let report = morrey_herz_ratio(
            OperatorKind::Dual,
            c,
            &weight,
            &params,
            &ToleranceSpec::default(),
        )
        .unwrap();
        assert_eq!(report.case, case);
        assert!(
            report.relative_gap <= REL_EXACT,
            "dual {case:?}: ratio {} vs constant {}",
            report.ratio,
            report.constant
        );
    }
    crit.pass();
}

#[test]
fn c07_norm_identities_hold_in_closed_form() {
    let crit = Criterion::start("C7 closed-form norm identities", 10_000);
    let c = ctx(2, 1);

    // integral of |x|^(-1/2) over the unit ball
    let f = RadialFunction::power_law(c, 1.0, -0.5, None, Some(0)).unwrap();
    let integral = f.ball_integral(0).unwrap();
    assert!((integral - 1.7071067811865475).abs() <= 1e-12);

    // truncated norms of a global power law against the geometric series
    let g = RadialFunction::power_law(c, 1.0, -0.3, None, None).unwrap();
    let q = 2.0;
    let rate: f64 = q * (-0.3) + 1.0;
    for gamma in 0..=20i64 {
        let got = g.restrict_norm(gamma, q).unwrap();
        let want = (c.unit_sphere_fraction() * c.powf(gamma as f64 * rate)
            / (1.0 - c.powf(-rate)))
        .powf(1.0 / q);
        assert!(
            (got - want).abs() <= REL_IDENTITY * want,
            "gamma {gamma}: {got} vs {want}"
        );
    }

    // norms of the critical power family
    let slot = SlotParams { alpha: 0.25, q: 2.0, r: 4.0, lambda: 0.125 };
    let f = mh_extremal(c, &slot).unwrap();
    let space = MorreyHerzParams::new(0.25, 2.0, 4.0, 0.125).unwrap();
    let got = morrey_herz_norm(&f, &space, &ToleranceSpec::default()).unwrap();
    assert!((got.value - 0.9611865232676157).abs() <= REL_EXACT);
    let slot = SlotParams { alpha: 0.5, q: 2.0, r: 2.0, lambda: 0.5 };
    let f = mh_extremal(c, &slot).unwrap();
    let space = MorreyHerzParams::new(0.5, 2.0, 2.0, 0.5).unwrap();
    let got = morrey_herz_norm(&f, &space, &ToleranceSpec::default()).unwrap();
    assert!((got.value - 1.0).abs() <= REL_EXACT);

    // the shell aggregation ends with an outer 1/r power: the norm is the
    // rooted value of the dense sum, not the sum itself
    let h = RadialFunction::from_table(c, [(0, 2.0), (1, 1.0), (3, 0.5)]).unwrap();
    let space = HerzParams::new(0.2, 2.0, 3.0).unwrap();
    let r = 3.0;
    let mut dense = 0.0;
    for (&k, &v) in h.table() {
        let sphere = c.sphere_measure(k).unwrap();
        dense += c.powf(k as f64 * 0.2 * r) * (v.abs() * sphere.powf(1.0 / 2.0)).powf(r);
    }
    let norm = herz_norm(&h, &space).unwrap();
    assert!((norm - dense.powf(1.0 / r)).abs() <= REL_IDENTITY * norm);
    assert!(
        (norm - dense).abs() > 0.5 * dense.max(norm),
        "rooted and unrooted aggregates must be visibly different here"
    );
    crit.pass();
}

#[test]
fn c08_space_identities_hold_on_random_functions() {
    let crit = Criterion::start("C8 norm family identities", 10_000);
    let mut rng = ChaCha8Rng::seed_from_u64(0xC8);
    for case in 0..50 {
        let p = [2u64, 3, 5, 7][rng.random_range(0..4)];
        let n = rng.random_range(1..=2u32);
        let c = ctx(p, n);
        let entries: BTreeMap<i64, f64> = (0..rng.random_range(1..=6usize))
            .map(|_| (rng.random_range(-8..=8i64), rng.random_range(-3.0..3.0)))
            .collect();
        let f = RadialFunction::from_table(c, entries).unwrap();

        let q = rng.random_range(1.05..4.0);
        let lq = lq_norm(&f, q).unwrap();
        let herz_as_lq = herz_norm(&f, &HerzParams::new(0.0, q, q).unwrap()).unwrap();
        assert!(
            (lq - herz_as_lq).abs() <= REL_IDENTITY * (1.0 + lq),
            "case {case}: {lq} vs {herz_as_lq}"
        );

        let alpha = rng.random_range(-0.5..0.5);
        let r = rng.random_range(1.05..4.0);
        let herz = herz_norm(&f, &HerzParams::new(alpha, q, r).unwrap()).unwrap();
        let mh = morrey_herz_norm(
            &f,
            &MorreyHerzParams::new(alpha, q, r, 0.0).unwrap(),
            &ToleranceSpec::default(),
        )
        .unwrap();
        assert!(
            (herz - mh.value).abs() <= REL_IDENTITY * (1.0 + herz),
            "case {case}: {herz} vs {}",
            mh.value
        );
    }
    crit.pass();
}

#[test]
fn c09_random_configurations_respect_the_norm_bound() {
    let crit = Criterion::start("C9 norm inequality on random configurations", 60_000);
    let mut rng = ChaCha8Rng::seed_from_u64(0xC9);
    for case in 0..100 {
        let p = [2u64, 3, 5, 7][rng.random_range(0..4)];
        let n = rng.random_range(1..=2u32);
        let c = ctx(p, n);
        let nf = n as f64;
        let m = rng.random_range(1..=3usize);
        let kind = if case % 2 == 0 {
            OperatorKind::Forward
        } else {
            OperatorKind::Dual
        };

        let mut slots = Vec::new();
        let mut wslots = Vec::new();
        for _ in 0..m {
            let alpha = rng.random_range(-0.4..0.9);
            let q = rng.random_range(1.2..4.0);
            let r = rng.random_range(1.2..4.0);
            slots.push(SlotParams { alpha, q, r, lambda: 0.0 });
            let u = match kind {
                OperatorKind::Forward => alpha + nf / q - nf,
                OperatorKind::Dual => -(alpha + nf / q),
            };
            wslots.push(PowerWeightSlot {
                coeff: rng.random_range(0.1..2.0),
                beta: u.max(0.0) + rng.random_range(0.05..1.0),
            });
        }
        let params = MultilinearParams::from_slots(slots).unwrap();
        let mut weight = ShellWeight::separable(wslots).unwrap();
        if rng.random_bool(0.5) {
            let j: Vec<u32> = (0..m).map(|_| rng.random_range(0..4u32)).collect();
            weight = weight.with_table([(j, rng.random_range(0.0..1.0))]).unwrap();
        }

        let constant_kind = match kind {
            OperatorKind::Forward => ConstantKind::Herz,
            OperatorKind::Dual => ConstantKind::HerzDual,
        };
        let constant = char_const(constant_kind, c, &weight, &params).unwrap().value;

        let inputs: Vec<RadialFunction> = (0..m)
            .map(|_| {
                let entries: BTreeMap<i64, f64> = (0..rng.random_range(1..=5usize))
                    .map(|_| (rng.random_range(-6..=6i64), rng.random_range(-2.0..2.0)))
                    .collect();
                RadialFunction::from_table(c, entries).unwrap()
            })
            .collect();

        let out = match kind {
            OperatorKind::Forward => apply_hardy(&weight, &inputs, -20..=56).unwrap(),
            OperatorKind::Dual => apply_dual_hardy(&weight, &inputs, -20..=56).unwrap(),
        };
        assert!(out.divergent_shells.is_empty());
        let windowed =
            RadialFunction::from_table(c, out.values.iter().map(|v| (v.shell, v.value)))
                .unwrap();

        let target = params.target();
        let num = herz_norm(
            &windowed,
            &HerzParams::new(target.alpha, target.q, target.r).unwrap(),
        )
        .unwrap();
        let den: f64 = inputs
            .iter()
            .zip(params.slots())
            .map(|(f, s)| herz_norm(f, &HerzParams::new(s.alpha, s.q, s.r).unwrap()).unwrap())
            .product();
        assert!(
            num <= constant * den * (1.0 + BOUND_SLACK),
            "case {case} ({kind:?}, p={p}, n={n}, m={m}): \
             output norm {num} exceeds {constant} * {den}"
        );
    }
    crit.pass();
}

#[test]
fn c10_divergent_requests_fail_loudly() {
    let crit = Criterion::start("C10 divergence is signalled, never truncated", 5_000);
    let c = ctx(2, 1);

    // critical forward rate: alpha + n/q = n
    let params = MultilinearParams::from_slots(vec![
        SlotParams { alpha: 0.5, q: 2.0, r: 4.0, lambda: 0.0 },
        SlotParams { alpha: 0.5, q: 2.0, r: 4.0, lambda: 0.0 },
    ])
    .unwrap();
    let got = char_const(ConstantKind::Herz, c, &ShellWeight::one(2), &params);
    assert!(matches!(got, Err(Error::DivergentSeries { .. })));

    // critical dual rate: alpha + n/q = 0
    let params = MultilinearParams::from_slots(vec![SlotParams {
        alpha: -0.5,
        q: 2.0,
        r: 2.0,
        lambda: 0.0,
    }])
    .unwrap();
    let got = char_const(ConstantKind::HerzDual, c, &ShellWeight::one(1), &params);
    assert!(matches!(got, Err(Error::DivergentSeries { .. })));

    // a function with no decay has no Herz norm at these exponents
    let flat = RadialFunction::power_law(c, 1.0, 0.0, None, None).unwrap();
    let got = herz_norm(&flat, &HerzParams::new(0.0, 2.0, 2.0).unwrap());
    assert!(matches!(got, Err(Error::DivergentSeries { .. })));

    // forward averaging of |x|^(-n) diverges on every shell
    let f = RadialFunction::power_law(c, 1.0, -1.0, None, Some(0)).unwrap();
    let out = apply_hardy(&ShellWeight::one(1), &[f], 0..=3).unwrap();
    assert_eq!(out.divergent_shells, vec![0, 1, 2, 3]);

    // growing functions have no bounded-window norm blocks either
    let growing = RadialFunction::power_law(c, 1.0, 0.5, None, None).unwrap();
    let got = morrey_herz_norm(
        &growing,
        &MorreyHerzParams::new(0.0, 2.0, 2.0, 0.1).unwrap(),
        &ToleranceSpec::default(),
    );
    assert!(matches!(got, Err(Error::DivergentSeries { .. })));
    crit.pass();
}
