//! Numerics for flow-kick dynamical systems: periodically kicked ODE flows,
//! their fixed points and stability, and the continuation of branches and
//! bifurcation curves in disturbance-parameter space.
//!
//! A flow-kick system alternates two phases: the state flows for time `tau`
//! under an undisturbed vector field `f`, then receives an instantaneous kick
//! `tau * r(u; lambda)` built from a disturbance rate function `r`. One cycle
//! is the map `Phi(x) = phi_tau(x) + tau * r(phi_tau(x); lambda)`. Letting
//! `tau -> 0` at a fixed rate recovers the continuously disturbed ODE
//! `x' = f(x) + r(x; lambda)`, so every quantity here is also defined at
//! `tau = 0` through a desingularized residual.
//!
//! Module map:
//! - [`dynamics`]: system definitions, adaptive integration, the flow-kick
//!   map, orbits, and the desingularized fixed-point residual.
//! - [`numdiff`]: central-difference derivatives of maps.
//! - [`equilibria`]: Newton solvers, small dense eigenvalues, stability tags.
//! - [`continuation`]: pseudo-arclength branches, bifurcation detection, and
//!   two-parameter saddle-node / Neimark-Sacker / transcritical curves.
//! - [`models`]: built-in example systems with analytic oracles.
//! - [`exprsys`]: a small expression language for user-defined systems.

pub mod continuation;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod exprsys;
pub mod linalg;
pub mod models;
pub mod numdiff;

mod ode;

use std::fmt::{Debug, Display, LowerExp};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Scalar type the whole crate is generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Debug
        + Display
        + LowerExp
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` constant to the working scalar type.
#[inline]
pub(crate) fn c<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

pub use error::{FkError, Result};

pub type SystemDef64 = dynamics::SystemDef<f64>;
pub type SystemDef32 = dynamics::SystemDef<f32>;
pub type FixedPointRecord64 = equilibria::FixedPointRecord<f64>;
pub type Branch64 = continuation::Branch<f64>;
pub type BifurcationPoint64 = continuation::BifurcationPoint<f64>;
pub type StabilityGrid64 = continuation::StabilityGrid<f64>;
