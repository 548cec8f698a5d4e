//! System definitions, flows, the flow-kick map, orbits, and the
//! desingularized fixed-point residual.
//!
//! One disturbance cycle flows the state for time `tau` under the undisturbed
//! field `f`, then applies the kick `tau * r(u; lambda)` at the arrival point:
//! `Phi(x) = phi_tau(x) + tau * r(phi_tau(x); lambda)`. The residual
//! `(Phi(x) - x) / tau` extends continuously to `f(x) + r(x; lambda)` at
//! `tau = 0`, which is what lets fixed points and bifurcations be continued
//! all the way down to the continuously disturbed ODE.

use std::sync::Arc;

use crate::error::{FkError, Result};
use crate::ode::{dopri5, IntegratorOpts};
use crate::{c, Scalar};

/// Vector field: writes `f(x)` into the output slice.
pub type FieldFn<T> = Arc<dyn Fn(&[T], &mut [T]) + Send + Sync>;
/// Parameterized disturbance rate: writes `r(x; lambda)` into the output.
pub type RateFn<T> = Arc<dyn Fn(&[T], T, &mut [T]) + Send + Sync>;
/// Exact flow oracle: returns `phi_t(x)`.
pub type FlowOracle<T> = Arc<dyn Fn(&[T], T) -> Vec<T> + Send + Sync>;

/// Default integration tolerance (absolute and relative).
pub const DEFAULT_TOL: f64 = 1e-10;

/// Axis-aligned box of valid states; coordinates may be infinite.
#[derive(Debug, Clone)]
pub struct DomainBox<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Scalar> DomainBox<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Self {
        assert_eq!(lo.len(), hi.len());
        DomainBox { lo, hi }
    }

    /// Closed-box membership; boundary states count as inside.
    pub fn contains(&self, x: &[T]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&xi, (&lo, &hi))| xi >= lo && xi <= hi)
    }
}

/// An undisturbed vector field together with its parameterized disturbance
/// rate. Immutable after construction; all operations on it are pure.
#[derive(Clone)]
pub struct SystemDef<T> {
    dim: usize,
    f: FieldFn<T>,
    r: RateFn<T>,
    name: String,
    state_names: Vec<String>,
    pub domain_hint: Option<DomainBox<T>>,
    pub analytic_flow: Option<FlowOracle<T>>,
}

impl<T: Scalar> SystemDef<T> {
    pub fn new(dim: usize, f: FieldFn<T>, r: RateFn<T>) -> Self {
        assert!(dim > 0, "dimension must be positive");
        SystemDef {
            dim,
            f,
            r,
            name: "custom".into(),
            state_names: (1..=dim).map(|i| format!("x_{i}")).collect(),
            domain_hint: None,
            analytic_flow: None,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_state_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.dim);
        self.state_names = names;
        self
    }

    pub fn with_domain(mut self, domain: DomainBox<T>) -> Self {
        assert_eq!(domain.lo.len(), self.dim);
        self.domain_hint = Some(domain);
        self
    }

    pub fn with_analytic_flow(mut self, oracle: FlowOracle<T>) -> Self {
        self.analytic_flow = Some(oracle);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    /// Evaluates the undisturbed field `f(x)`.
    pub fn eval_f(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        (self.f)(x, &mut out);
        out
    }

    /// Evaluates the disturbance rate `r(x; lambda)`.
    pub fn eval_r(&self, x: &[T], lambda: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        (self.r)(x, lambda, &mut out);
        out
    }

    /// Evaluates the continuous-analog field `f(x) + r(x; lambda)`.
    pub fn eval_continuous(&self, x: &[T], lambda: T) -> Vec<T> {
        let f = self.eval_f(x);
        let r = self.eval_r(x, lambda);
        f.iter().zip(&r).map(|(&a, &b)| a + b).collect()
    }

    pub fn in_domain(&self, x: &[T]) -> bool {
        self.domain_hint
            .as_ref()
            .map(|d| d.contains(x))
            .unwrap_or(true)
    }
}

impl<T> std::fmt::Debug for SystemDef<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemDef")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish()
    }
}

/// Disturbance coordinates: flow time `tau` between kicks and disturbance
/// rate parameter `lambda`. The kick magnitude is the derived quantity
/// `kappa = tau * r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceParams<T> {
    pub tau: T,
    pub lambda: T,
}

impl<T: Scalar> DisturbanceParams<T> {
    /// `tau = 0` is legal only for desingularized and continuous-analog
    /// operations, never for iterating the map itself.
    pub fn new(tau: T, lambda: T) -> Result<Self> {
        if tau < T::zero() || !tau.is_finite() {
            return Err(FkError::Invalid(format!(
                "flow time tau must be >= 0, got {tau}"
            )));
        }
        Ok(DisturbanceParams { tau, lambda })
    }

    /// Builds parameters from a scalar kick magnitude via `lambda = kappa / tau`.
    pub fn from_kick(tau: T, kappa: T) -> Result<Self> {
        if tau <= T::zero() {
            return Err(FkError::Invalid(
                "kick coordinates need tau > 0 to recover lambda = kappa / tau".into(),
            ));
        }
        Self::new(tau, kappa / tau)
    }

    /// Scalar kick magnitude for constant-rate disturbances.
    pub fn kappa(&self) -> T {
        self.tau * self.lambda
    }
}

/// One disturbance cycle of an orbit.
#[derive(Debug, Clone)]
pub struct OrbitCycle<T> {
    pub cycle: usize,
    /// State after flowing for `tau`, before the kick: `phi_tau(x_k)`.
    pub pre_kick: Vec<T>,
    /// State after the kick: `x_{k+1} = pre_kick + tau * r(pre_kick; lambda)`.
    pub post_kick: Vec<T>,
    /// Dense flow sub-samples `(t_local, state)` for plotting, if requested.
    pub flow_samples: Vec<(T, Vec<T>)>,
}

/// Iterated flow-kick trajectory.
#[derive(Debug, Clone)]
pub struct Orbit<T> {
    pub x0: Vec<T>,
    pub params: DisturbanceParams<T>,
    pub cycles: Vec<OrbitCycle<T>>,
    /// Cycle index at which the state left the domain hint, if it did;
    /// iteration stops at that point.
    pub domain_exit: Option<usize>,
}

impl<T: Scalar> Orbit<T> {
    /// Post-kick state after the last completed cycle.
    pub fn last_state(&self) -> &[T] {
        self.cycles
            .last()
            .map(|cyc| cyc.post_kick.as_slice())
            .unwrap_or(&self.x0)
    }
}

/// Flows `x0` for time `t` under the undisturbed field with local error
/// control at `tol`.
pub fn flow<T: Scalar>(sys: &SystemDef<T>, x0: &[T], t: T, tol: T) -> Result<Vec<T>> {
    check_state(sys, x0)?;
    if tol <= T::zero() {
        return Err(FkError::Invalid("tolerance must be positive".into()));
    }
    let opts = IntegratorOpts::with_tol(tol);
    let f = &sys.f;
    let out = dopri5(|y, dy| f(y, dy), x0, t, &opts, &[])?;
    Ok(out.y_end)
}

/// Like [`flow`], also sampling the trajectory at `n_samples` evenly spaced
/// interior times (endpoints included), via the integrator's dense output.
pub fn flow_sampled<T: Scalar>(
    sys: &SystemDef<T>,
    x0: &[T],
    t: T,
    tol: T,
    n_samples: usize,
) -> Result<Vec<(T, Vec<T>)>> {
    check_state(sys, x0)?;
    let opts = IntegratorOpts::with_tol(tol);
    let times: Vec<T> = (0..n_samples)
        .map(|i| t * c::<T>(i as f64) / c::<T>((n_samples.max(2) - 1) as f64))
        .collect();
    let f = &sys.f;
    let out = dopri5(|y, dy| f(y, dy), x0, t, &opts, &times)?;
    let mut result: Vec<(T, Vec<T>)> = times.into_iter().zip(out.samples).collect();
    if let Some(last) = result.last_mut() {
        last.1 = out.y_end;
    }
    Ok(result)
}

/// Flows `x0` and reports the state at several times from one integration
/// (dense output), so differences between the returned states carry no
/// step-control noise. `times` must be sorted ascending; the last entry sets
/// the integration span.
pub fn flow_at_times<T: Scalar>(
    sys: &SystemDef<T>,
    x0: &[T],
    times: &[T],
    tol: T,
) -> Result<Vec<Vec<T>>> {
    check_state(sys, x0)?;
    let t_end = *times.last().ok_or_else(|| {
        FkError::Invalid("flow_at_times needs at least one time".into())
    })?;
    let opts = IntegratorOpts::with_tol(tol);
    let f = &sys.f;
    let out = dopri5(|y, dy| f(y, dy), x0, t_end, &opts, times)?;
    let mut samples = out.samples;
    if let Some(last) = samples.last_mut() {
        *last = out.y_end;
    }
    Ok(samples)
}

/// Flows the exact oracle if the system has one.
pub fn flow_exact<T: Scalar>(sys: &SystemDef<T>, x0: &[T], t: T) -> Result<Vec<T>> {
    check_state(sys, x0)?;
    let oracle = sys
        .analytic_flow
        .as_ref()
        .ok_or_else(|| FkError::Invalid(format!("model '{}' has no analytic flow", sys.name)))?;
    let y = oracle(x0, t);
    if y.iter().any(|v| !v.is_finite()) {
        return Err(FkError::Divergence {
            t: t.to_f64().unwrap_or(f64::NAN),
            state: x0.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
            norm: f64::INFINITY,
        });
    }
    Ok(y)
}

/// Flows several initial states as one stacked system sharing a single
/// adaptive step sequence. Differencing the results of one batch gives much
/// cleaner derivatives than differencing independent integrations, because
/// step-control decisions cancel between stencil points.
pub fn flow_batch<T: Scalar>(
    sys: &SystemDef<T>,
    xs: &[Vec<T>],
    t: T,
    tol: T,
) -> Result<Vec<Vec<T>>> {
    let n = sys.dim;
    for x in xs {
        check_state(sys, x)?;
    }
    if xs.is_empty() {
        return Ok(Vec::new());
    }
    let stacked: Vec<T> = xs.iter().flat_map(|x| x.iter().copied()).collect();
    let opts = IntegratorOpts::for_stencil(tol);
    let f = &sys.f;
    let rhs = |y: &[T], dy: &mut [T]| {
        for (yb, dyb) in y.chunks(n).zip(dy.chunks_mut(n)) {
            f(yb, dyb);
        }
    };
    let out = dopri5(rhs, &stacked, t, &opts, &[])?;
    Ok(out.y_end.chunks(n).map(|ch| ch.to_vec()).collect())
}

/// Applies the kick at `u`: `u + tau * r(u; lambda)`.
pub fn apply_kick<T: Scalar>(sys: &SystemDef<T>, u: &[T], p: &DisturbanceParams<T>) -> Vec<T> {
    let r = sys.eval_r(u, p.lambda);
    u.iter().zip(&r).map(|(&ui, &ri)| ui + p.tau * ri).collect()
}

/// One cycle of the flow-kick map: `Phi(x) = phi_tau(x) + tau * r(phi_tau(x); lambda)`.
/// Requires `tau > 0`; use [`desingularized_residual`] at `tau = 0`.
pub fn flow_kick<T: Scalar>(
    sys: &SystemDef<T>,
    x: &[T],
    p: &DisturbanceParams<T>,
    tol: T,
) -> Result<Vec<T>> {
    if p.tau <= T::zero() {
        return Err(FkError::Invalid(
            "flow_kick requires tau > 0; the tau = 0 map is the identity".into(),
        ));
    }
    let pre = flow(sys, x, p.tau, tol)?;
    Ok(apply_kick(sys, &pre, p))
}

/// Flow-kick map on a batch of states with one shared step sequence.
pub fn flow_kick_batch<T: Scalar>(
    sys: &SystemDef<T>,
    xs: &[Vec<T>],
    p: &DisturbanceParams<T>,
    tol: T,
) -> Result<Vec<Vec<T>>> {
    if p.tau <= T::zero() {
        return Err(FkError::Invalid("flow_kick requires tau > 0".into()));
    }
    let pres = flow_batch(sys, xs, p.tau, tol)?;
    Ok(pres.iter().map(|pre| apply_kick(sys, pre, p)).collect())
}

/// Iterates the flow-kick map for `n_cycles`, stopping early with a
/// domain-exit flag if the state leaves the domain hint.
pub fn iterate_orbit<T: Scalar>(
    sys: &SystemDef<T>,
    x0: &[T],
    p: &DisturbanceParams<T>,
    n_cycles: usize,
    tol: T,
) -> Result<Orbit<T>> {
    iterate_orbit_sampled(sys, x0, p, n_cycles, tol, 0)
}

/// Like [`iterate_orbit`], recording `subsamples` dense flow states per cycle
/// for plotting (0 disables).
pub fn iterate_orbit_sampled<T: Scalar>(
    sys: &SystemDef<T>,
    x0: &[T],
    p: &DisturbanceParams<T>,
    n_cycles: usize,
    tol: T,
    subsamples: usize,
) -> Result<Orbit<T>> {
    if n_cycles < 1 {
        return Err(FkError::Invalid("n_cycles must be >= 1".into()));
    }
    if p.tau <= T::zero() {
        return Err(FkError::Invalid("orbit iteration requires tau > 0".into()));
    }
    check_state(sys, x0)?;

    let mut orbit = Orbit {
        x0: x0.to_vec(),
        params: *p,
        cycles: Vec::with_capacity(n_cycles),
        domain_exit: None,
    };
    let mut x = x0.to_vec();
    for cycle in 0..n_cycles {
        if !sys.in_domain(&x) {
            orbit.domain_exit = Some(cycle);
            break;
        }
        let (pre, flow_samples) = if subsamples > 0 {
            let samples = flow_sampled(sys, &x, p.tau, tol, subsamples)?;
            let pre = samples
                .last()
                .map(|(_, s)| s.clone())
                .expect("non-empty samples");
            (pre, samples)
        } else {
            (flow(sys, &x, p.tau, tol)?, Vec::new())
        };
        let post = apply_kick(sys, &pre, p);
        x = post.clone();
        let exits = !sys.in_domain(&pre) || !sys.in_domain(&post);
        orbit.cycles.push(OrbitCycle {
            cycle,
            pre_kick: pre,
            post_kick: post,
            flow_samples,
        });
        if exits {
            orbit.domain_exit = Some(cycle);
            break;
        }
    }
    Ok(orbit)
}

// Below this tau the direct difference quotient loses too many digits to
// cancellation; switch to the continuous field plus a linear-in-tau
// correction estimated by one Richardson step at a safe offset.
const DESING_SWITCH: f64 = 1e-8;
const RICHARDSON_H: f64 = 1e-6;

/// Fixed-point residual that is well defined down to `tau = 0`:
/// `(Phi(x) - x) / tau` for `tau > 0`, and exactly `f(x) + r(x; lambda)` at
/// `tau = 0`. Zeros are flow-kick fixed points (continuous equilibria at
/// `tau = 0`), and the function is continuous in `tau` at 0.
pub fn desingularized_residual<T: Scalar>(
    sys: &SystemDef<T>,
    tau: T,
    x: &[T],
    lambda: T,
    tol: T,
) -> Result<Vec<T>> {
    if tau < T::zero() {
        return Err(FkError::Invalid("tau must be >= 0".into()));
    }
    if tau == T::zero() {
        return Ok(sys.eval_continuous(x, lambda));
    }
    if tau < c(DESING_SWITCH) {
        let g0 = sys.eval_continuous(x, lambda);
        let h = c::<T>(RICHARDSON_H);
        let gh = residual_quotient(sys, h, x, lambda, tol)?;
        return Ok(g0
            .iter()
            .zip(&gh)
            .map(|(&g0i, &ghi)| g0i + tau * ((ghi - g0i) / h))
            .collect());
    }
    residual_quotient(sys, tau, x, lambda, tol)
}

fn residual_quotient<T: Scalar>(
    sys: &SystemDef<T>,
    tau: T,
    x: &[T],
    lambda: T,
    tol: T,
) -> Result<Vec<T>> {
    let p = DisturbanceParams { tau, lambda };
    let phi = flow_kick(sys, x, &p, tol)?;
    Ok(phi
        .iter()
        .zip(x)
        .map(|(&pi, &xi)| (pi - xi) / tau)
        .collect())
}

/// Desingularized residual on a batch of states with one shared adaptive
/// step sequence (the stencil workhorse for Jacobians).
pub fn desingularized_residual_batch<T: Scalar>(
    sys: &SystemDef<T>,
    tau: T,
    xs: &[Vec<T>],
    lambda: T,
    tol: T,
) -> Result<Vec<Vec<T>>> {
    if tau < T::zero() {
        return Err(FkError::Invalid("tau must be >= 0".into()));
    }
    if tau == T::zero() {
        return Ok(xs.iter().map(|x| sys.eval_continuous(x, lambda)).collect());
    }
    if tau < c(DESING_SWITCH) {
        return xs
            .iter()
            .map(|x| desingularized_residual(sys, tau, x, lambda, tol))
            .collect();
    }
    let p = DisturbanceParams { tau, lambda };
    let phis = flow_kick_batch(sys, xs, &p, tol)?;
    Ok(phis
        .iter()
        .zip(xs)
        .map(|(phi, x)| {
            phi.iter()
                .zip(x.iter())
                .map(|(&pi, &xi)| (pi - xi) / tau)
                .collect()
        })
        .collect())
}

fn check_state<T: Scalar>(sys: &SystemDef<T>, x: &[T]) -> Result<()> {
    if x.len() != sys.dim {
        return Err(FkError::Invalid(format!(
            "state has length {}, system '{}' has dimension {}",
            x.len(),
            sys.name,
            sys.dim
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(FkError::Invalid("state has non-finite entries".into()));
    }
    Ok(())
}

/// Max-norm distance between two states.
pub fn max_abs_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs())
        .fold(T::zero(), T::max)
}
