//! Summation kernels: compensated accumulation and closed-form geometric
//! sums over integer shell ranges.
//!
//! Every infinite sum in this crate reduces to sums of the shape
//! `sum_k coeff * p^(k*rate)` over an integer interval that may be
//! unbounded on either side. Convergence is decided from the sign of
//! `rate` before anything is added up, so divergence always surfaces as
//! an [`Error::DivergentSeries`] instead of a runaway loop.

use crate::error::{Error, Result};

/// Neumaier-compensated accumulator. Keeps the error of long sums near one
/// ulp independently of the term count, which the 1e-12 identity checks
/// rely on.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accum {
    sum: f64,
    comp: f64,
}

impl Accum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator of terms.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut acc = Accum::new();
    for t in terms {
        acc.add(t);
    }
    acc.value()
}

/// Closed-form value of `sum_{k=lo}^{hi} coeff * base^(k*rate)` where the
/// bounds are integers and `None` means unbounded on that side.
///
/// Returns 0 for an empty range or a zero coefficient, and
/// [`Error::DivergentSeries`] when an unbounded side fails the ratio test
/// (`base^rate >= 1` toward +inf, `<= 1` toward -inf).
pub fn geometric_sum(
    base: f64,
    coeff: f64,
    rate: f64,
    lo: Option<i64>,
    hi: Option<i64>,
) -> Result<f64> {
    if !(base > 1.0) || !coeff.is_finite() || !rate.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "geometric sum needs base > 1 and finite coefficient/rate, got base {base}, coeff {coeff}, rate {rate}"
        )));
    }
    if coeff == 0.0 {
        return Ok(0.0);
    }
    if let (Some(a), Some(b)) = (lo, hi) {
        if a > b {
            return Ok(0.0);
        }
    }
    // log of the per-step ratio base^rate
    let step = rate * base.ln();
    let finish = |v: f64| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Overflow {
                context: "geometric sum",
            })
        }
    };
    match (lo, hi) {
        (Some(a), Some(b)) => {
            let count = (b - a + 1) as f64;
            if step == 0.0 {
                return finish(coeff * count);
            }
            // sum = coeff * x^a * (1 - x^count) / (1 - x), via expm1 for
            // stability when x is close to 1
            let lead = (a as f64 * step).exp();
            let ratio = (count * step).exp_m1() / step.exp_m1();
            finish(coeff * lead * ratio)
        }
        (Some(a), None) => {
            if step >= 0.0 {
                return Err(Error::DivergentSeries {
                    reason: format!(
                        "term ratio {base}^{rate} >= 1 on a shell range unbounded above"
                    ),
                });
            }
            let lead = (a as f64 * step).exp();
            finish(coeff * lead / -step.exp_m1())
        }
        (None, Some(b)) => {
            if step <= 0.0 {
                return Err(Error::DivergentSeries {
                    reason: format!(
                        "term ratio {base}^{rate} <= 1 on a shell range unbounded below"
                    ),
                });
            }
            let lead = (b as f64 * step).exp();
            finish(coeff * lead / -(-step).exp_m1())
        }
        (None, None) => Err(Error::DivergentSeries {
            reason: "constant-rate series over all shells".into(),
        }),
    }
}
