//! Finite-precision p-adic scalars and vectors.
//!
//! A nonzero scalar is stored in canonical series form: an integer
//! valuation `v` and base-p digits `b_0, b_1, ...` with `b_0 != 0`, so the
//! value is `p^v * sum_j b_j p^j`. The digit window is the working
//! precision; additions that cancel the whole window report
//! [`Error::PrecisionExhausted`] instead of inventing a valuation.
//!
//! Vectors carry the max norm, so the shell index of a nonzero vector is
//! the negative of the smallest component valuation. Haar measure is
//! normalized so the unit ball Z_p^n has measure 1, giving balls measure
//! `p^(n*gamma)` and spheres `p^(n*gamma) * (1 - p^-n)`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shells are indexed by the base-p logarithm of the norm: the sphere
/// `S_k` holds the points with `|x|_p = p^k`.
pub type ShellIndex = i64;

/// Default number of stored digits for scalars produced by constructors
/// and the sampler.
pub const DEFAULT_PRECISION: usize = 64;

const MAX_PRIME: u64 = (1 << 31) - 1;

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    if p % 2 == 0 {
        return p == 2;
    }
    let mut d = 3;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// The ambient space Q_p^n: a prime p and a dimension n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PadicContext {
    p: u64,
    n: u32,
}

impl PadicContext {
    pub fn new(p: u64, n: u32) -> Result<Self> {
        if p > MAX_PRIME || !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if n == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self { p, n })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// p as an f64, the base of every closed-form power in this crate.
    pub fn pf(&self) -> f64 {
        self.p as f64
    }

    /// `p^t` for a real exponent t.
    pub fn powf(&self, t: f64) -> f64 {
        self.pf().powf(t)
    }

    /// Fraction of the unit ball taken by the unit sphere: `1 - p^-n`.
    pub fn unit_sphere_fraction(&self) -> f64 {
        1.0 - self.pf().powi(-(self.n as i32))
    }

    /// Haar measure of the ball `|x|_p <= p^gamma`, namely `p^(n*gamma)`.
    pub fn ball_measure(&self, gamma: ShellIndex) -> Result<f64> {
        let e = self.n as i64 * gamma;
        if e.abs() > 32_000 {
            return Err(Error::Overflow {
                context: "ball measure exponent",
            });
        }
        let v = self.pf().powi(e as i32);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Overflow {
                context: "ball measure",
            })
        }
    }

    /// Haar measure of the sphere `|x|_p = p^gamma`, namely
    /// `p^(n*gamma) * (1 - p^-n)`.
    pub fn sphere_measure(&self, gamma: ShellIndex) -> Result<f64> {
        Ok(self.ball_measure(gamma)? * self.unit_sphere_fraction())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum ScalarRepr {
    Zero,
    /// valuation plus digits with `digits[0] != 0`; `digits.len()` is the
    /// working precision
    Unit { valuation: i64, digits: Vec<u32> },
}

/// A p-adic number at finite precision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PadicScalar {
    ctx: PadicContext,
    repr: ScalarRepr,
}

impl PadicScalar {
    pub fn zero(ctx: PadicContext) -> Self {
        Self {
            ctx,
            repr: ScalarRepr::Zero,
        }
    }

    /// Build from raw canonical parts. The first digit must be nonzero and
    /// all digits must lie below p.
    pub fn from_parts(ctx: PadicContext, valuation: i64, digits: Vec<u32>) -> Result<Self> {
        if digits.is_empty() {
            return Err(Error::InvalidParameter("empty digit window".into()));
        }
        if digits[0] == 0 {
            return Err(Error::InvalidParameter(
                "leading digit of a canonical scalar must be nonzero".into(),
            ));
        }
        if digits.iter().any(|&d| d as u64 >= ctx.p) {
            return Err(Error::InvalidParameter(format!(
                "digits must lie in [0, {})",
                ctx.p
            )));
        }
        Ok(Self {
            ctx,
            repr: ScalarRepr::Unit { valuation, digits },
        })
    }

    pub fn from_integer(ctx: PadicContext, value: i64) -> Self {
        Self::from_rational(ctx, value, 1, DEFAULT_PRECISION)
            .expect("integer expansion cannot fail")
    }

    /// Expand `num/den` to `precision` digits. Denominator zero is
    /// rejected; powers of p are moved into the valuation and the
    /// remaining unit is expanded by p-adic long division, which yields
    /// the canonical nonnegative-digit series for negative values too.
    pub fn from_rational(
        ctx: PadicContext,
        num: i64,
        den: i64,
        precision: usize,
    ) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidParameter("denominator is zero".into()));
        }
        if precision == 0 {
            return Err(Error::InvalidParameter("precision must be positive".into()));
        }
        if num == 0 {
            return Ok(Self::zero(ctx));
        }
        let p = ctx.p as i128;
        let mut n = num as i128;
        let mut d = den as i128;
        let mut val: i64 = 0;
        while n % p == 0 {
            n /= p;
            val += 1;
        }
        while d % p == 0 {
            d /= p;
            val -= 1;
        }
        let d_inv = mod_inverse(d, p);
        let mut digits = Vec::with_capacity(precision);
        for _ in 0..precision {
            let digit = ((n % p) * d_inv).rem_euclid(p);
            digits.push(digit as u32);
            n = (n - digit * d) / p;
        }
        debug_assert_ne!(digits[0], 0, "unit part must have a nonzero first digit");
        Ok(Self {
            ctx,
            repr: ScalarRepr::Unit {
                valuation: val,
                digits,
            },
        })
    }

    pub fn context(&self) -> PadicContext {
        self.ctx
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.repr, ScalarRepr::Zero)
    }

    /// The p-adic valuation; `None` marks the zero element, whose
    /// valuation is +infinity by convention.
    pub fn valuation(&self) -> Option<i64> {
        match &self.repr {
            ScalarRepr::Zero => None,
            ScalarRepr::Unit { valuation, .. } => Some(*valuation),
        }
    }

    /// `|x|_p = p^(-valuation)`; zero has norm 0.
    pub fn norm(&self) -> f64 {
        match self.valuation() {
            None => 0.0,
            Some(v) => self.ctx.pf().powi(-v as i32),
        }
    }

    pub fn digits(&self) -> &[u32] {
        match &self.repr {
            ScalarRepr::Zero => &[],
            ScalarRepr::Unit { digits, .. } => digits,
        }
    }

    pub fn precision(&self) -> usize {
        self.digits().len()
    }

    fn digit_at(&self, position: i64) -> u32 {
        match &self.repr {
            ScalarRepr::Zero => 0,
            ScalarRepr::Unit { valuation, digits } => {
                let idx = position - valuation;
                if idx < 0 || idx as usize >= digits.len() {
                    0
                } else {
                    digits[idx as usize]
                }
            }
        }
    }

    /// Digit-wise sum with carry over the overlap of the two precision
    /// windows. Full cancellation inside the window is
    /// [`Error::PrecisionExhausted`]: the true valuation of the sum lies
    /// beyond what the operands can resolve.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.ctx != other.ctx {
            return Err(Error::ContextMismatch);
        }
        let (xv, yv) = match (self.valuation(), other.valuation()) {
            (None, _) => return Ok(other.clone()),
            (_, None) => return Ok(self.clone()),
            (Some(a), Some(b)) => (a, b),
        };
        let p = self.ctx.p;
        let start = xv.min(yv);
        let end = (xv + self.precision() as i64).min(yv + other.precision() as i64);
        let mut window = Vec::with_capacity((end - start) as usize);
        let mut carry = 0u64;
        for pos in start..end {
            let s = self.digit_at(pos) as u64 + other.digit_at(pos) as u64 + carry;
            window.push((s % p) as u32);
            carry = s / p;
        }
        match window.iter().position(|&d| d != 0) {
            None => Err(Error::PrecisionExhausted),
            Some(first) => Ok(Self {
                ctx: self.ctx,
                repr: ScalarRepr::Unit {
                    valuation: start + first as i64,
                    digits: window.split_off(first),
                },
            }),
        }
    }

    /// Additive inverse at the same precision.
    pub fn neg(&self) -> Self {
        match &self.repr {
            ScalarRepr::Zero => self.clone(),
            ScalarRepr::Unit { valuation, digits } => {
                let p = self.ctx.p as u32;
                let negated = digits
                    .iter()
                    .enumerate()
                    .map(|(j, &d)| if j == 0 { p - d } else { p - 1 - d })
                    .collect();
                Self {
                    ctx: self.ctx,
                    repr: ScalarRepr::Unit {
                        valuation: *valuation,
                        digits: negated,
                    },
                }
            }
        }
    }

    /// Product; valuations add exactly and the digit window shrinks to the
    /// smaller operand precision.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.ctx != other.ctx {
            return Err(Error::ContextMismatch);
        }
        let (xv, yv) = match (self.valuation(), other.valuation()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Ok(Self::zero(self.ctx)),
        };
        let p = self.ctx.p as u128;
        let width = self.precision().min(other.precision());
        let xd = self.digits();
        let yd = other.digits();
        let mut digits = Vec::with_capacity(width);
        let mut carry: u128 = 0;
        for t in 0..width {
            let mut acc = carry;
            for i in 0..=t {
                let j = t - i;
                if i < xd.len() && j < yd.len() {
                    acc += xd[i] as u128 * yd[j] as u128;
                }
            }
            digits.push((acc % p) as u32);
            carry = acc / p;
        }
        debug_assert_ne!(digits[0], 0, "product of units is a unit");
        Ok(Self {
            ctx: self.ctx,
            repr: ScalarRepr::Unit {
                valuation: xv + yv,
                digits,
            },
        })
    }

    /// Multiply by `p^e`: shifts the valuation, digits unchanged.
    pub fn scaled_by_p_power(&self, e: i64) -> Self {
        match &self.repr {
            ScalarRepr::Zero => self.clone(),
            ScalarRepr::Unit { valuation, digits } => Self {
                ctx: self.ctx,
                repr: ScalarRepr::Unit {
                    valuation: valuation + e,
                    digits: digits.clone(),
                },
            },
        }
    }
}

fn mod_inverse(a: i128, p: i128) -> i128 {
    // extended Euclid on (a mod p, p); p is prime so the inverse exists
    let mut r0 = a.rem_euclid(p);
    let mut r1 = p;
    let mut s0: i128 = 1;
    let mut s1: i128 = 0;
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    debug_assert_eq!(r0, 1, "inverse exists modulo a prime");
    s0.rem_euclid(p)
}

/// A point of Q_p^n with the max norm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PadicVector {
    components: Vec<PadicScalar>,
}

impl PadicVector {
    pub fn new(components: Vec<PadicScalar>) -> Result<Self> {
        let first = components.first().ok_or(Error::ZeroDimension)?;
        let ctx = first.context();
        if components.len() != ctx.n() as usize {
            return Err(Error::InvalidParameter(format!(
                "expected {} components for this context, got {}",
                ctx.n(),
                components.len()
            )));
        }
        if components.iter().any(|c| c.context() != ctx) {
            return Err(Error::ContextMismatch);
        }
        Ok(Self { components })
    }

    pub fn context(&self) -> PadicContext {
        self.components[0].context()
    }

    pub fn components(&self) -> &[PadicScalar] {
        &self.components
    }

    /// Smallest component valuation; `None` for the zero vector.
    pub fn valuation(&self) -> Option<i64> {
        self.components.iter().filter_map(|c| c.valuation()).min()
    }

    /// `|x|_p = max_i |x_i|_p = p^(-min_i valuation)`.
    pub fn norm(&self) -> f64 {
        match self.valuation() {
            None => 0.0,
            Some(v) => self.context().pf().powi(-v as i32),
        }
    }

    /// Index k of the sphere `S_k` containing the vector.
    pub fn shell_of(&self) -> Result<ShellIndex> {
        self.valuation().map(|v| -v).ok_or(Error::ZeroVector)
    }

    /// Multiply every component by `p^e`, moving the vector `e` shells
    /// down.
    pub fn scaled_by_p_power(&self, e: i64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| c.scaled_by_p_power(e))
                .collect(),
        }
    }
}

/// Digit depth used when sampling scalars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub digit_depth: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            digit_depth: DEFAULT_PRECISION,
        }
    }
}

fn scalar_from_digit_stream(ctx: PadicContext, stream: Vec<u32>) -> PadicScalar {
    match stream.iter().position(|&d| d != 0) {
        None => PadicScalar::zero(ctx),
        Some(first) => {
            let digits = stream[first..].to_vec();
            PadicScalar {
                ctx,
                repr: ScalarRepr::Unit {
                    valuation: first as i64,
                    digits,
                },
            }
        }
    }
}

fn sample_ball_scalar<R: Rng>(ctx: PadicContext, rng: &mut R, depth: usize) -> PadicScalar {
    let p = ctx.p();
    let stream: Vec<u32> = (0..depth).map(|_| rng.random_range(0..p) as u32).collect();
    scalar_from_digit_stream(ctx, stream)
}

/// Haar-uniform sample from the unit ball Z_p^n: every digit of every
/// component is uniform on `[0, p)`. The induced shell distribution is
/// `P(shell = -j) = p^(-j*n) * (1 - p^-n)`.
pub fn sample_unit(ctx: PadicContext, count: usize, seed: u64) -> Vec<PadicVector> {
    sample_unit_with(ctx, count, seed, &SamplerConfig::default())
}

pub fn sample_unit_with(
    ctx: PadicContext,
    count: usize,
    seed: u64,
    config: &SamplerConfig,
) -> Vec<PadicVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let comps = (0..ctx.n())
                .map(|_| sample_ball_scalar(ctx, &mut rng, config.digit_depth))
                .collect();
            PadicVector { components: comps }
        })
        .collect()
}

/// Haar-uniform sample from the sphere `S_shell`: a unit-ball sample
/// conditioned on norm 1 (rejection on the leading digit vector), scaled
/// to the requested shell.
pub fn sample_sphere<R: Rng>(
    ctx: PadicContext,
    shell: ShellIndex,
    rng: &mut R,
    depth: usize,
) -> PadicVector {
    let p = ctx.p();
    let n = ctx.n() as usize;
    let mut leading = vec![0u32; n];
    loop {
        for d in leading.iter_mut() {
            *d = rng.random_range(0..p) as u32;
        }
        if leading.iter().any(|&d| d != 0) {
            break;
        }
    }
    let components = leading
        .iter()
        .map(|&lead| {
            let mut stream = Vec::with_capacity(depth);
            stream.push(lead);
            for _ in 1..depth {
                stream.push(rng.random_range(0..p) as u32);
            }
            scalar_from_digit_stream(ctx, stream)
        })
        .collect();
    PadicVector { components }.scaled_by_p_power(-shell)
}
