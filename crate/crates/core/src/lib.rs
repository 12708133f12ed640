//! Radial analysis over the p-adic vector space Q_p^n.
//!
//! The crate provides:
//!
//! - [`padic`]: finite-precision p-adic scalars and vectors, valuations,
//!   Haar measures of balls and spheres, and a seeded Haar sampler for the
//!   unit ball Z_p^n.
//! - [`radial`]: radial functions represented by a finite shell table plus
//!   power-law segments, with exact geometric-series integration.
//! - [`herz`]: shell-weighted norms (L^q on a shell, Herz, Morrey-Herz).
//! - [`hardy`]: the weighted multilinear Hardy averaging operator, its dual,
//!   the four characteristic constants attached to the norm inequalities,
//!   and a stratified Monte-Carlo cross-check of those constants.
//! - [`sharpness`]: extremal families showing the characteristic constants
//!   are the exact operator norms, with a sweep harness for the
//!   epsilon-family on Herz spaces and exact ratio checks on Morrey-Herz
//!   spaces.
//!
//! All series are evaluated either in closed form (geometric sums) or by
//! truncation with a certified geometric tail bound controlled by
//! [`radial::ToleranceSpec`]. Divergence is detected analytically from the
//! term ratios before any summation, never by silent truncation.

pub mod error;
pub mod hardy;
pub mod herz;
pub mod padic;
pub mod radial;
pub mod series;
pub mod sharpness;

pub use error::{Error, Result};
pub use hardy::{
    apply_dual_hardy, apply_hardy, char_const, mc_char_const, CharConstant, ConstantKind,
    McConfig, McEstimate, MultilinearParams, OperatorKind, OperatorResult, PowerWeightSlot,
    ShellValue, ShellWeight, SlotParams,
};
pub use herz::{herz_norm, lq_norm, morrey_herz_norm, HerzParams, MhNorm, MorreyHerzParams};
pub use padic::{PadicContext, PadicScalar, PadicVector, ShellIndex};
pub use radial::{PowerSegment, RadialFunction, ToleranceSpec};
pub use sharpness::{
    herz_extremal, herz_ratio, herz_sweep, mh_extremal, morrey_herz_ratio, ExactnessCase,
    MhRatioReport, RatioPoint, SharpnessConfig, SweepReport, SweepRow, SHARPNESS_BOUND_SLACK,
};
