//! Pseudo-arclength continuation of fixed-point branches, bifurcation
//! detection via test functions, two-parameter continuation of saddle-node
//! and Neimark-Sacker curves in `(tau, lambda)`, transcritical curves at
//! invariant fixed points, and stability-diagram grid scans.
//!
//! Everything runs on the desingularized residual, so branches and curves may
//! be seeded at `tau = 0` and ODE bifurcations are literal curve endpoints
//! rather than extrapolations.

use rayon::prelude::*;

use crate::dynamics::{self, DisturbanceParams, SystemDef};
use crate::equilibria::{self, FixedPointRecord, Stability, EPS_HYP};
use crate::error::{FkError, Result};
use crate::linalg::{dist, dot, norm, Mat};
use crate::numdiff::{
    self, desing_jacobian_x, desing_second_deriv_xx, flow_kick_jacobian,
    flow_kick_second_deriv_xx, StencilConfig,
};
use crate::{c, Scalar};

/// Which disturbance parameter a branch varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeParam {
    Tau,
    Lambda,
}

/// Why a branch stopped on its forward end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchTermination {
    /// Free parameter reached the window boundary without folding.
    RangeEnd,
    /// Branch folded at least once and then left the window.
    FoldBeyondWindow,
    /// Corrector kept failing after step bisection.
    Divergence,
    /// State left the domain hint.
    DomainExit,
    /// Step budget exhausted inside the window.
    MaxSteps,
}

/// Step-size policy for predictor-corrector continuation.
#[derive(Debug, Clone, Copy)]
pub struct StepControl<T> {
    pub initial: T,
    pub min: T,
    pub max: T,
    pub max_steps: usize,
    pub corrector_tol: T,
    pub corrector_max_iter: usize,
    pub flow_tol: T,
    pub stencil: StencilConfig<T>,
}

impl<T: Scalar> Default for StepControl<T> {
    fn default() -> Self {
        StepControl {
            initial: c(1e-2),
            min: c(1e-5),
            max: c(0.1),
            max_steps: 600,
            corrector_tol: c(1e-10),
            corrector_max_iter: 14,
            flow_tol: c(dynamics::DEFAULT_TOL),
            stencil: StencilConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BifurcationType {
    SaddleNode,
    Transcritical,
    NeimarkSacker,
    Hopf,
}

impl std::fmt::Display for BifurcationType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BifurcationType::SaddleNode => "SN",
            BifurcationType::Transcritical => "TC",
            BifurcationType::NeimarkSacker => "NS",
            BifurcationType::Hopf => "Hopf",
        };
        f.write_str(s)
    }
}

/// Diagnostic values of the defining test functions at a bifurcation point.
/// Which fields are set depends on the bifurcation type.
#[derive(Debug, Clone)]
pub struct TestValues<T> {
    /// Residual of the nonhyperbolicity condition (the refined test
    /// function), e.g. `det(D Phi - I)` at a saddle-node.
    pub nonhyperbolicity: T,
    /// Derivative of the map in the bifurcation parameter projected on the
    /// left null vector (saddle-node transversality).
    pub transversality: Option<T>,
    /// Second derivative along the null direction projected on the left null
    /// vector (quadratic dominance).
    pub quadratic_dominance: Option<T>,
    /// `|d Phi / d lambda|` at transcritical points (non-transversality).
    pub lambda_derivative: Option<T>,
    /// Transverse entry of `d^2 Phi / dx dlambda` at transcritical points.
    pub mixed_partial: Option<T>,
}

impl<T: Scalar> Default for TestValues<T> {
    fn default() -> Self {
        TestValues {
            nonhyperbolicity: T::zero(),
            transversality: None,
            quadratic_dominance: None,
            lambda_derivative: None,
            mixed_partial: None,
        }
    }
}

/// A located bifurcation with its diagnostics.
#[derive(Debug, Clone)]
pub struct BifurcationPoint<T> {
    pub btype: BifurcationType,
    pub x: Vec<T>,
    pub tau: T,
    pub lambda: T,
    pub test_values: TestValues<T>,
    /// Set when refinement stopped before reaching its target residual.
    pub low_confidence: bool,
}

/// Ordered continuation samples of fixed points along one free parameter.
#[derive(Debug, Clone)]
pub struct Branch<T> {
    pub free: FreeParam,
    /// Value of the parameter held fixed.
    pub fixed_other: T,
    pub points: Vec<FixedPointRecord<T>>,
    pub events: Vec<BifurcationPoint<T>>,
    pub termination: BranchTermination,
    /// Termination of the backward-direction end, when both were walked.
    pub termination_backward: Option<BranchTermination>,
    /// Number of parameter folds traversed.
    pub folds: usize,
}

impl<T: Scalar> Branch<T> {
    /// Free-parameter value of a branch point.
    pub fn param_of(&self, rec: &FixedPointRecord<T>) -> T {
        match self.free {
            FreeParam::Tau => rec.tau,
            FreeParam::Lambda => rec.lambda,
        }
    }
}

/// Why a two-parameter curve stopped on one end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveTermination {
    /// Left the `(tau, lambda)` window.
    Window,
    /// Reached `tau = 0` and closed on the ODE bifurcation point.
    TauZero,
    /// Complex-pair guard failed (Neimark-Sacker only).
    Resonance,
    /// Corrector failure at minimal step.
    Divergence,
    MaxSteps,
}

/// Two-parameter bifurcation curve in `(tau, lambda)`.
#[derive(Debug, Clone)]
pub struct ParamCurve<T> {
    pub points: Vec<BifurcationPoint<T>>,
    pub termination_backward: CurveTermination,
    pub termination_forward: CurveTermination,
}

// ---------------------------------------------------------------------------
// augmented one-parameter system: u = [x..., p]
// ---------------------------------------------------------------------------

struct AugBranch<'a, T> {
    sys: &'a SystemDef<T>,
    free: FreeParam,
    fixed_other: T,
    step: &'a StepControl<T>,
}

impl<'a, T: Scalar> AugBranch<'a, T> {
    fn n(&self) -> usize {
        self.sys.dim()
    }

    fn params_at(&self, p: T) -> (T, T) {
        match self.free {
            FreeParam::Tau => (p, self.fixed_other),
            FreeParam::Lambda => (self.fixed_other, p),
        }
    }

    fn residual(&self, u: &[T]) -> Result<Vec<T>> {
        let n = self.n();
        let (tau, lambda) = self.params_at(u[n]);
        if tau < T::zero() {
            return Err(FkError::Invalid("tau < 0 during continuation".into()));
        }
        dynamics::desingularized_residual(self.sys, tau, &u[..n], lambda, self.step.flow_tol)
    }

    /// Extended Jacobian `[dG/dx | dG/dp]`, n x (n + 1). State columns come
    /// from one batched stencil; the parameter column is a central (or
    /// one-sided at `tau = 0`) difference.
    fn ext_jacobian(&self, u: &[T]) -> Result<Mat<T>> {
        let n = self.n();
        let (tau, lambda) = self.params_at(u[n]);
        let a = desing_jacobian_x(
            self.sys,
            tau,
            &u[..n],
            lambda,
            self.step.flow_tol,
            &self.step.stencil,
        )?;
        let p = u[n];
        let h = match self.free {
            // Differencing in tau divides quotient rounding noise of order
            // eps/tau by the step; a larger floor keeps the column usable
            // near tau = 0.
            FreeParam::Tau => self.step.stencil.step_for(p).max(c(1e-4)),
            FreeParam::Lambda => self.step.stencil.step_for(p),
        };
        let (p_hi, p_lo) = if self.free == FreeParam::Tau && p - h < T::zero() {
            (p + h, p)
        } else {
            (p + h, p - h)
        };
        let (tau_hi, lam_hi) = self.params_at(p_hi);
        let (tau_lo, lam_lo) = self.params_at(p_lo);
        let g_hi =
            dynamics::desingularized_residual(self.sys, tau_hi, &u[..n], lam_hi, self.step.flow_tol)?;
        let g_lo =
            dynamics::desingularized_residual(self.sys, tau_lo, &u[..n], lam_lo, self.step.flow_tol)?;
        let denom = p_hi - p_lo;
        let mut jac = Mat::zeros(n, n + 1);
        for i in 0..n {
            for j in 0..n {
                jac[(i, j)] = a[(i, j)];
            }
            jac[(i, n)] = (g_hi[i] - g_lo[i]) / denom;
        }
        Ok(jac)
    }

    /// Corrector: Newton steps constrained to the hyperplane through the
    /// prediction orthogonal to the tangent.
    fn correct(&self, u_pred: &[T], tangent: &[T]) -> Result<Option<Vec<T>>> {
        let n = self.n();
        let mut u = u_pred.to_vec();
        for _ in 0..self.step.corrector_max_iter {
            let g = match self.residual(&u) {
                Ok(g) => g,
                Err(_) => return Ok(None),
            };
            if norm(&g) <= self.step.corrector_tol {
                return Ok(Some(u));
            }
            let jac = match self.ext_jacobian(&u) {
                Ok(j) => j,
                Err(_) => return Ok(None),
            };
            let mut bordered = Mat::zeros(n + 1, n + 1);
            for i in 0..n {
                for j in 0..=n {
                    bordered[(i, j)] = jac[(i, j)];
                }
            }
            for j in 0..=n {
                bordered[(n, j)] = tangent[j];
            }
            let mut rhs = vec![T::zero(); n + 1];
            for i in 0..n {
                rhs[i] = -g[i];
            }
            let pinned: T = (0..=n).map(|j| tangent[j] * (u[j] - u_pred[j])).fold(
                T::zero(),
                |acc, v| acc + v,
            );
            rhs[n] = -pinned;
            let delta = match bordered.solve(&rhs) {
                Ok(d) => d,
                Err(_) => return Ok(None),
            };
            if delta.iter().any(|v| !v.is_finite()) {
                return Ok(None);
            }
            for j in 0..=n {
                u[j] += delta[j];
            }
            if self.free == FreeParam::Tau && u[n] < T::zero() {
                // clamp at the tau = 0 wall; window logic decides what next
                u[n] = T::zero();
            }
        }
        match self.residual(&u) {
            Ok(g) if norm(&g) <= self.step.corrector_tol * c(10.0) => Ok(Some(u)),
            _ => Ok(None),
        }
    }

    /// Unit tangent spanning the nullspace of the extended Jacobian, via a
    /// bordered solve with a few fallback border directions.
    fn tangent(&self, u: &[T]) -> Result<Vec<T>> {
        let n = self.n();
        let jac = self.ext_jacobian(u)?;
        tangent_from_ext_jacobian(&jac, n)
    }

    /// Newton in `x` with the free parameter frozen (window boundaries,
    /// seed polishing).
    fn solve_frozen(&self, p: T, x_guess: &[T]) -> Result<Vec<T>> {
        let (tau, lambda) = self.params_at(p);
        let dp = DisturbanceParams { tau, lambda };
        let opts = equilibria::NewtonOptions {
            tol: self.step.corrector_tol,
            max_iter: 30,
            flow_tol: self.step.flow_tol,
            stencil: self.step.stencil,
            eps_hyp: c(EPS_HYP),
        };
        let (rec, _) = equilibria::newton_fixed_point_with(self.sys, &dp, x_guess, &opts)?;
        Ok(rec.x)
    }

    fn record_at(&self, u: &[T]) -> Result<FixedPointRecord<T>> {
        let n = self.n();
        let (tau, lambda) = self.params_at(u[n]);
        let dp = DisturbanceParams { tau, lambda };
        let a = desing_jacobian_x(
            self.sys,
            tau,
            &u[..n],
            lambda,
            self.step.flow_tol,
            &self.step.stencil,
        )?;
        let g = self.residual(u)?;
        equilibria::record_from_jacobian(self.sys, &dp, u[..n].to_vec(), norm(&g), &a, c(EPS_HYP))
    }
}

fn tangent_from_ext_jacobian<T: Scalar>(jac: &Mat<T>, n: usize) -> Result<Vec<T>> {
    // Border candidates: parameter direction first, then each state axis.
    let mut candidates: Vec<usize> = vec![n];
    candidates.extend(0..n);
    for border in candidates {
        let mut bordered = Mat::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..=n {
                bordered[(i, j)] = jac[(i, j)];
            }
        }
        bordered[(n, border)] = T::one();
        let mut rhs = vec![T::zero(); n + 1];
        rhs[n] = T::one();
        if let Ok(t) = bordered.solve(&rhs) {
            let nrm = norm(&t);
            if nrm > c(1e-12) && t.iter().all(|v| v.is_finite()) {
                return Ok(t.into_iter().map(|v| v / nrm).collect());
            }
        }
    }
    Err(FkError::Continuation(
        "could not compute a branch tangent".into(),
    ))
}

// ---------------------------------------------------------------------------
// one-parameter branch continuation
// ---------------------------------------------------------------------------

/// Continues the fixed-point branch through `seed` over `window` in the free
/// parameter. Seeds at `tau = 0` are legal: the continuation starts from the
/// continuous equilibrium through the desingularized residual. Folds are
/// traversed; the branch walks both directions from the seed and events are
/// populated by [`detect_bifurcations`].
pub fn continue_branch<T: Scalar>(
    sys: &SystemDef<T>,
    seed: &FixedPointRecord<T>,
    free: FreeParam,
    window: (T, T),
    step: &StepControl<T>,
) -> Result<Branch<T>> {
    let (lo, hi) = window;
    if lo >= hi {
        return Err(FkError::Invalid("empty continuation window".into()));
    }
    if free == FreeParam::Tau && lo < T::zero() {
        return Err(FkError::Invalid("tau window must start at >= 0".into()));
    }
    let n = sys.dim();
    if seed.x.len() != n {
        return Err(FkError::Invalid("seed dimension mismatch".into()));
    }
    let (p_seed, fixed_other) = match free {
        FreeParam::Tau => (seed.tau, seed.lambda),
        FreeParam::Lambda => (seed.lambda, seed.tau),
    };
    if p_seed < lo || p_seed > hi {
        return Err(FkError::Invalid(
            "window does not contain the seed's free-parameter value".into(),
        ));
    }
    let aug = AugBranch {
        sys,
        free,
        fixed_other,
        step,
    };

    // Polish the seed so the branch starts from a genuinely converged point.
    let x0 = aug.solve_frozen(p_seed, &seed.x)?;
    let mut u0 = x0;
    u0.push(p_seed);

    let mut t0 = aug.tangent(&u0)?;
    if t0[n] < T::zero() {
        for v in t0.iter_mut() {
            *v = -*v;
        }
    }

    let eps_edge = c::<T>(1e-12) * (T::one() + hi.abs());
    let run_fwd = hi - p_seed > eps_edge || t0[n].abs() < c(1e-9);
    let run_bwd = p_seed - lo > eps_edge;

    let forward = walk_direction(&aug, &u0, &t0, (lo, hi), true)?;
    let backward = if run_bwd {
        let t_back: Vec<T> = t0.iter().map(|&v| -v).collect();
        Some(walk_direction(&aug, &u0, &t_back, (lo, hi), run_fwd)?)
    } else {
        None
    };

    let mut points = Vec::new();
    let mut folds = 0usize;
    let mut termination_backward = None;
    if let Some(back) = backward {
        folds += back.folds;
        termination_backward = Some(back.termination);
        points.extend(back.points.into_iter().rev());
    }
    points.push(aug.record_at(&u0)?);
    folds += forward.folds;
    points.extend(forward.points);

    let mut branch = Branch {
        free,
        fixed_other,
        points,
        events: Vec::new(),
        termination: forward.termination,
        termination_backward,
        folds,
    };
    branch.events = detect_bifurcations(sys, &branch, step)?;
    Ok(branch)
}

struct DirectionResult<T> {
    points: Vec<FixedPointRecord<T>>,
    termination: BranchTermination,
    folds: usize,
}

fn walk_direction<T: Scalar>(
    aug: &AugBranch<'_, T>,
    u0: &[T],
    t0: &[T],
    window: (T, T),
    _other_direction_runs: bool,
) -> Result<DirectionResult<T>> {
    let n = aug.n();
    let (lo, hi) = window;
    let step = aug.step;
    let mut points = Vec::new();
    let mut u_prev = u0.to_vec();
    let mut t_prev = t0.to_vec();
    let mut h = step.initial;
    let mut folds = 0usize;
    let mut termination = BranchTermination::MaxSteps;

    for _ in 0..step.max_steps {
        let u_pred: Vec<T> = u_prev
            .iter()
            .zip(&t_prev)
            .map(|(&u, &t)| u + h * t)
            .collect();
        // Predictor crossing the window: land exactly on the boundary.
        let p_pred = u_pred[n];
        if p_pred < lo || p_pred > hi {
            let boundary = if p_pred < lo { lo } else { hi };
            if let Ok(xb) = aug.solve_frozen(boundary, &u_prev[..n]) {
                let mut ub = xb;
                ub.push(boundary);
                if let Ok(rec) = aug.record_at(&ub) {
                    points.push(rec);
                }
                let termination = if folds > 0 {
                    BranchTermination::FoldBeyondWindow
                } else {
                    BranchTermination::RangeEnd
                };
                return Ok(DirectionResult {
                    points,
                    termination,
                    folds,
                });
            }
            // Boundary solve failed; shrink toward it instead.
            h *= c(0.5);
            if h < step.min {
                return Ok(DirectionResult {
                    points,
                    termination: BranchTermination::Divergence,
                    folds,
                });
            }
            continue;
        }
        match aug.correct(&u_pred, &t_prev)? {
            Some(u_new) => {
                let p_new = u_new[n];
                if p_new < lo - c(1e-14) || p_new > hi + c(1e-14) {
                    // Land exactly on the boundary and stop this direction.
                    let boundary = if p_new < lo { lo } else { hi };
                    if let Ok(xb) = aug.solve_frozen(boundary, &u_new[..n]) {
                        let mut ub = xb;
                        ub.push(boundary);
                        if let Ok(rec) = aug.record_at(&ub) {
                            points.push(rec);
                        }
                    }
                    termination = if folds > 0 {
                        BranchTermination::FoldBeyondWindow
                    } else {
                        BranchTermination::RangeEnd
                    };
                    return Ok(DirectionResult {
                        points,
                        termination,
                        folds,
                    });
                }
                if !aug.sys.in_domain(&u_new[..n]) {
                    termination = BranchTermination::DomainExit;
                    return Ok(DirectionResult {
                        points,
                        termination,
                        folds,
                    });
                }
                let mut t_new = match aug.tangent(&u_new) {
                    Ok(t) => t,
                    Err(_) => {
                        termination = BranchTermination::Divergence;
                        return Ok(DirectionResult {
                            points,
                            termination,
                            folds,
                        });
                    }
                };
                if dot(&t_new, &t_prev) < T::zero() {
                    for v in t_new.iter_mut() {
                        *v = -*v;
                    }
                }
                if t_new[n] * t_prev[n] < T::zero() {
                    folds += 1;
                }
                points.push(aug.record_at(&u_new)?);
                u_prev = u_new;
                t_prev = t_new;
                h = (h * c(2.0)).min(step.max);
            }
            None => {
                h *= c(0.5);
                if h < step.min {
                    termination = BranchTermination::Divergence;
                    break;
                }
            }
        }
    }
    Ok(DirectionResult {
        points,
        termination,
        folds,
    })
}

// ---------------------------------------------------------------------------
// test functions and bifurcation detection
// ---------------------------------------------------------------------------

fn trace2<T: Scalar>(a: &Mat<T>) -> T {
    a[(0, 0)] + a[(1, 1)]
}

/// Desingularized saddle-node test: `det(A)` with `A = (D Phi - I)/tau`
/// (equals `det D[f + r]` at `tau = 0`). Shares its sign with the literal
/// map test `det(D Phi - I) = tau^n det(A)` for `tau > 0`.
fn psi_sn_desing<T: Scalar>(a: &Mat<T>) -> T {
    a.det()
}

/// Literal saddle-node test at the point: `det(D Phi - I)` for maps,
/// `det D[f + r]` for the continuous analog.
fn psi_sn_literal<T: Scalar>(a: &Mat<T>, tau: T) -> T {
    if tau > T::zero() {
        let n = a.rows as i32;
        tau.powi(n) * a.det()
    } else {
        a.det()
    }
}

/// Desingularized Neimark-Sacker test (n = 2):
/// `(det(D Phi) - 1)/tau = tr(A) + tau det(A)`; the Hopf test `tr D[f + r]`
/// at `tau = 0`.
fn psi_ns_desing<T: Scalar>(a: &Mat<T>, tau: T) -> T {
    trace2(a) + tau * a.det()
}

/// Literal Neimark-Sacker test: `det(D Phi) - 1`.
fn psi_ns_literal<T: Scalar>(a: &Mat<T>, tau: T) -> T {
    if tau > T::zero() {
        tau * psi_ns_desing(a, tau)
    } else {
        psi_ns_desing(a, tau)
    }
}

/// Whether the residual Jacobian has a complex eigenvalue pair (n = 2).
fn has_complex_pair<T: Scalar>(a: &Mat<T>) -> bool {
    let tr = trace2(a);
    tr * tr - c::<T>(4.0) * a.det() < T::zero()
}

/// Scans the branch for sign changes of the saddle-node and (n = 2)
/// Neimark-Sacker test functions, refines each bracket by bisection on
/// arclength to `|psi| < 1e-8`, and evaluates the auxiliary conditions at
/// every located point. Refinement that stalls flags the event
/// `low_confidence` instead of dropping it.
pub fn detect_bifurcations<T: Scalar>(
    sys: &SystemDef<T>,
    branch: &Branch<T>,
    step: &StepControl<T>,
) -> Result<Vec<BifurcationPoint<T>>> {
    if branch.points.len() < 2 {
        return Err(FkError::Invalid(
            "bifurcation detection needs at least 2 branch points".into(),
        ));
    }
    let n = sys.dim();
    let aug = AugBranch {
        sys,
        free: branch.free,
        fixed_other: branch.fixed_other,
        step,
    };

    // Residual Jacobian per point.
    let mut mats = Vec::with_capacity(branch.points.len());
    for rec in &branch.points {
        let a = desing_jacobian_x(sys, rec.tau, &rec.x, rec.lambda, step.flow_tol, &step.stencil)?;
        mats.push(a);
    }

    let mut events = Vec::new();
    for i in 0..branch.points.len() - 1 {
        let (ra, rb) = (&branch.points[i], &branch.points[i + 1]);
        let (ma, mb) = (&mats[i], &mats[i + 1]);
        let sn_a = psi_sn_desing(ma);
        let sn_b = psi_sn_desing(mb);
        if sn_a * sn_b < T::zero() {
            events.push(refine_event(
                &aug,
                ra,
                rb,
                EventKind::SaddleNode,
                step,
            )?);
        }
        if n == 2 && has_complex_pair(ma) && has_complex_pair(mb) {
            let ns_a = psi_ns_desing(ma, ra.tau);
            let ns_b = psi_ns_desing(mb, rb.tau);
            if ns_a * ns_b < T::zero() {
                events.push(refine_event(
                    &aug,
                    ra,
                    rb,
                    EventKind::NeimarkSacker,
                    step,
                )?);
            }
        }
    }
    Ok(events)
}

#[derive(Clone, Copy, PartialEq)]
enum EventKind {
    SaddleNode,
    NeimarkSacker,
}

/// Bisection on arclength between two bracketing branch points, correcting
/// back onto the branch at each trial, until the literal test function drops
/// below 1e-8.
fn refine_event<T: Scalar>(
    aug: &AugBranch<'_, T>,
    ra: &FixedPointRecord<T>,
    rb: &FixedPointRecord<T>,
    kind: EventKind,
    step: &StepControl<T>,
) -> Result<BifurcationPoint<T>> {
    let n = aug.n();
    let target = c::<T>(1e-8);
    let to_u = |rec: &FixedPointRecord<T>| -> Vec<T> {
        let mut u = rec.x.clone();
        u.push(match aug.free {
            FreeParam::Tau => rec.tau,
            FreeParam::Lambda => rec.lambda,
        });
        u
    };
    let mut u_lo = to_u(ra);
    let mut u_hi = to_u(rb);

    let psi_desing_at = |u: &[T]| -> Result<(T, Mat<T>)> {
        let (tau, lambda) = aug.params_at(u[n]);
        let a = desing_jacobian_x(aug.sys, tau, &u[..n], lambda, step.flow_tol, &step.stencil)?;
        let v = match kind {
            EventKind::SaddleNode => psi_sn_desing(&a),
            EventKind::NeimarkSacker => psi_ns_desing(&a, tau),
        };
        Ok((v, a))
    };

    let (mut psi_lo, _) = psi_desing_at(&u_lo)?;
    let (psi_hi, _) = psi_desing_at(&u_hi)?;
    if psi_lo * psi_hi > T::zero() {
        // Bracket evaporated after re-evaluation (can happen right at a
        // window edge); report the closer endpoint as low confidence.
        let u = if psi_lo.abs() < psi_hi.abs() { u_lo } else { u_hi };
        return build_event(aug, &u, kind, step, true);
    }

    let secant: Vec<T> = {
        let diff: Vec<T> = u_hi.iter().zip(&u_lo).map(|(&b, &a)| b - a).collect();
        let nrm = norm(&diff);
        diff.into_iter().map(|v| v / nrm.max(c(1e-300))).collect()
    };

    let mut best_u = if psi_lo.abs() < psi_hi.abs() {
        u_lo.clone()
    } else {
        u_hi.clone()
    };
    let mut best_abs = psi_lo.abs().min(psi_hi.abs());
    let mut converged = false;

    for _ in 0..80 {
        let mid: Vec<T> = u_lo
            .iter()
            .zip(&u_hi)
            .map(|(&a, &b)| (a + b) * c(0.5))
            .collect();
        let corrected = match aug.correct(&mid, &secant)? {
            Some(u) => u,
            None => mid, // keep bisecting on the raw segment
        };
        let (psi_mid, a_mid) = psi_desing_at(&corrected)?;
        let (tau_mid, _) = aug.params_at(corrected[n]);
        let literal = match kind {
            EventKind::SaddleNode => psi_sn_literal(&a_mid, tau_mid),
            EventKind::NeimarkSacker => psi_ns_literal(&a_mid, tau_mid),
        };
        if psi_mid.abs() < best_abs {
            best_abs = psi_mid.abs();
            best_u = corrected.clone();
        }
        if literal.abs() < target {
            best_u = corrected;
            converged = true;
            break;
        }
        if psi_mid * psi_lo <= T::zero() {
            u_hi = corrected;
        } else {
            u_lo = corrected;
            psi_lo = psi_mid;
        }
    }
    build_event(aug, &best_u, kind, step, !converged)
}

/// Assembles a bifurcation point with its Table-style diagnostics.
fn build_event<T: Scalar>(
    aug: &AugBranch<'_, T>,
    u: &[T],
    kind: EventKind,
    step: &StepControl<T>,
    low_confidence: bool,
) -> Result<BifurcationPoint<T>> {
    let n = aug.n();
    let (tau, lambda) = aug.params_at(u[n]);
    let x = &u[..n];
    let a = desing_jacobian_x(aug.sys, tau, x, lambda, step.flow_tol, &step.stencil)?;

    let (btype, test_values) = match kind {
        EventKind::SaddleNode => {
            let tv = sn_diagnostics(aug, u, &a, step)?;
            (BifurcationType::SaddleNode, tv)
        }
        EventKind::NeimarkSacker => {
            let btype = if tau > T::zero() {
                BifurcationType::NeimarkSacker
            } else {
                BifurcationType::Hopf
            };
            let tv = TestValues {
                nonhyperbolicity: psi_ns_literal(&a, tau).abs(),
                ..TestValues::default()
            };
            (btype, tv)
        }
    };
    Ok(BifurcationPoint {
        btype,
        x: x.to_vec(),
        tau,
        lambda,
        test_values,
        low_confidence,
    })
}

/// Saddle-node auxiliary conditions: transversality in the free parameter and
/// quadratic dominance along the null direction, both projected on the left
/// null vector of the singular Jacobian.
fn sn_diagnostics<T: Scalar>(
    aug: &AugBranch<'_, T>,
    u: &[T],
    a: &Mat<T>,
    step: &StepControl<T>,
) -> Result<TestValues<T>> {
    let n = aug.n();
    let (tau, lambda) = aug.params_at(u[n]);
    let x = &u[..n];
    let v = a.null_vector();
    let w = a.transpose().null_vector();

    let transversality = if tau > T::zero() {
        let p = DisturbanceParams { tau, lambda };
        match aug.free {
            FreeParam::Lambda => {
                let sys = aug.sys;
                let tol = step.flow_tol;
                let family = |xx: &[T], l: T| {
                    dynamics::flow_kick(sys, xx, &DisturbanceParams { tau, lambda: l }, tol)
                };
                let d = numdiff::deriv_lambda(family, x, lambda, &step.stencil)?;
                dot(&w, &d)
            }
            FreeParam::Tau => {
                let d = dphi_dtau(aug.sys, x, &p, step)?;
                dot(&w, &d)
            }
        }
    } else {
        // Continuous analog: derivative of f + r in lambda.
        let sys = aug.sys;
        let family = |xx: &[T], l: T| Ok(sys.eval_continuous(xx, l));
        let d = numdiff::deriv_lambda(family, x, lambda, &step.stencil)?;
        dot(&w, &d)
    };

    // w . D^2[v, v] accumulated over the symmetric stencil.
    let mut quad = T::zero();
    for i in 0..n {
        for j in i..n {
            let d2 = if tau > T::zero() {
                let p = DisturbanceParams { tau, lambda };
                flow_kick_second_deriv_xx(aug.sys, x, &p, i, j, step.flow_tol, &step.stencil)?
            } else {
                desing_second_deriv_xx(
                    aug.sys,
                    tau,
                    x,
                    lambda,
                    i,
                    j,
                    step.flow_tol,
                    &step.stencil,
                )?
            };
            let factor = if i == j { T::one() } else { c(2.0) };
            quad += factor * v[i] * v[j] * dot(&w, &d2);
        }
    }

    Ok(TestValues {
        nonhyperbolicity: psi_sn_literal(a, tau).abs(),
        transversality: Some(transversality),
        quadratic_dominance: Some(quad),
        ..TestValues::default()
    })
}

/// `d Phi / d tau` by central difference, with both flow endpoints read off
/// one dense integration so their errors cancel.
fn dphi_dtau<T: Scalar>(
    sys: &SystemDef<T>,
    x: &[T],
    p: &DisturbanceParams<T>,
    step: &StepControl<T>,
) -> Result<Vec<T>> {
    let h = step.stencil.step_for(p.tau);
    let (t_lo, t_hi) = (p.tau - h, p.tau + h);
    let states = dynamics::flow_at_times(sys, x, &[t_lo, t_hi], step.flow_tol)?;
    let phi_lo = dynamics::apply_kick(sys, &states[0], &DisturbanceParams { tau: t_lo, ..*p });
    let phi_hi = dynamics::apply_kick(sys, &states[1], &DisturbanceParams { tau: t_hi, ..*p });
    let denom = c::<T>(2.0) * h;
    Ok(phi_hi
        .iter()
        .zip(&phi_lo)
        .map(|(&a, &b)| (a - b) / denom)
        .collect())
}

// ---------------------------------------------------------------------------
// two-parameter curves: u = [x..., tau, lambda]
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq)]
enum CurveKind {
    SaddleNode,
    NeimarkSacker,
}

/// Rectangular window in the disturbance parameter plane.
#[derive(Debug, Clone, Copy)]
pub struct CurveWindow<T> {
    pub tau: (T, T),
    pub lambda: (T, T),
}

struct AugCurve<'a, T> {
    sys: &'a SystemDef<T>,
    kind: CurveKind,
    step: &'a StepControl<T>,
}

impl<'a, T: Scalar> AugCurve<'a, T> {
    fn n(&self) -> usize {
        self.sys.dim()
    }

    /// Residual `[G(x, tau, lambda); psi(x, tau, lambda)]`, length n + 1.
    fn residual(&self, u: &[T]) -> Result<Vec<T>> {
        let n = self.n();
        let (tau, lambda) = (u[n], u[n + 1]);
        if tau < T::zero() {
            return Err(FkError::Invalid("tau < 0 on curve".into()));
        }
        let mut g =
            dynamics::desingularized_residual(self.sys, tau, &u[..n], lambda, self.step.flow_tol)?;
        let a = desing_jacobian_x(
            self.sys,
            tau,
            &u[..n],
            lambda,
            self.step.flow_tol,
            &self.step.stencil,
        )?;
        let psi = match self.kind {
            CurveKind::SaddleNode => psi_sn_desing(&a),
            CurveKind::NeimarkSacker => psi_ns_desing(&a, tau),
        };
        g.push(psi);
        Ok(g)
    }

    /// Full (n + 1) x (n + 2) Jacobian of the augmented residual by central
    /// differences over every unknown (one-sided in tau at the tau = 0 wall).
    fn ext_jacobian(&self, u: &[T]) -> Result<Mat<T>> {
        let n = self.n();
        let mut jac = Mat::zeros(n + 1, n + 2);
        for j in 0..n + 2 {
            let h = if j == n {
                // tau column: see AugBranch::ext_jacobian
                self.step.stencil.step_for(u[j]).max(c(1e-4))
            } else {
                self.step.stencil.step_for(u[j])
            };
            let mut up = u.to_vec();
            let mut um = u.to_vec();
            up[j] += h;
            um[j] -= h;
            if j == n && um[j] < T::zero() {
                um[j] = T::zero();
            }
            let denom = up[j] - um[j];
            let gp = self.residual(&up)?;
            let gm = self.residual(&um)?;
            for i in 0..=n {
                jac[(i, j)] = (gp[i] - gm[i]) / denom;
            }
        }
        Ok(jac)
    }

    fn correct(&self, u_pred: &[T], tangent: &[T]) -> Result<Option<Vec<T>>> {
        let n = self.n();
        let m = n + 2;
        let mut u = u_pred.to_vec();
        for _ in 0..self.step.corrector_max_iter {
            let g = match self.residual(&u) {
                Ok(g) => g,
                Err(_) => return Ok(None),
            };
            if norm(&g) <= self.step.corrector_tol {
                return Ok(Some(u));
            }
            let jac = match self.ext_jacobian(&u) {
                Ok(j) => j,
                Err(_) => return Ok(None),
            };
            let mut bordered = Mat::zeros(m, m);
            for i in 0..n + 1 {
                for j in 0..m {
                    bordered[(i, j)] = jac[(i, j)];
                }
            }
            for j in 0..m {
                bordered[(n + 1, j)] = tangent[j];
            }
            let mut rhs = vec![T::zero(); m];
            for i in 0..n + 1 {
                rhs[i] = -g[i];
            }
            let pinned: T = (0..m)
                .map(|j| tangent[j] * (u[j] - u_pred[j]))
                .fold(T::zero(), |acc, v| acc + v);
            rhs[n + 1] = -pinned;
            let delta = match bordered.solve(&rhs) {
                Ok(d) => d,
                Err(_) => return Ok(None),
            };
            if delta.iter().any(|v| !v.is_finite()) {
                return Ok(None);
            }
            for j in 0..m {
                u[j] += delta[j];
            }
            if u[n] < T::zero() {
                u[n] = T::zero();
            }
        }
        match self.residual(&u) {
            Ok(g) if norm(&g) <= self.step.corrector_tol * c(10.0) => Ok(Some(u)),
            _ => Ok(None),
        }
    }

    fn tangent(&self, u: &[T]) -> Result<Vec<T>> {
        let n = self.n();
        let jac = self.ext_jacobian(u)?;
        // Bordered solve on the (n+1) x (n+2) system.
        let m = n + 2;
        let mut candidates: Vec<usize> = vec![n, n + 1];
        candidates.extend(0..n);
        for border in candidates {
            let mut bordered = Mat::zeros(m, m);
            for i in 0..n + 1 {
                for j in 0..m {
                    bordered[(i, j)] = jac[(i, j)];
                }
            }
            bordered[(n + 1, border)] = T::one();
            let mut rhs = vec![T::zero(); m];
            rhs[n + 1] = T::one();
            if let Ok(t) = bordered.solve(&rhs) {
                let nrm = norm(&t);
                if nrm > c(1e-12) && t.iter().all(|v| v.is_finite()) {
                    return Ok(t.into_iter().map(|v| v / nrm).collect());
                }
            }
        }
        Err(FkError::Continuation("could not compute a curve tangent".into()))
    }

    /// Newton in `(x, lambda)` with `tau` frozen at 0: the ODE bifurcation
    /// point that terminates the curve.
    fn solve_tau_zero(&self, guess: &[T]) -> Result<Vec<T>> {
        let n = self.n();
        let mut v: Vec<T> = guess[..n].to_vec();
        v.push(guess[n + 1]); // lambda
        for _ in 0..40 {
            let mut u = v[..n].to_vec();
            u.push(T::zero());
            u.push(v[n]);
            let g = self.residual(&u)?;
            if norm(&g) <= self.step.corrector_tol {
                return Ok(u);
            }
            let full = self.ext_jacobian(&u)?;
            // Square system: drop the tau column.
            let mut jac = Mat::zeros(n + 1, n + 1);
            for i in 0..n + 1 {
                for j in 0..n {
                    jac[(i, j)] = full[(i, j)];
                }
                jac[(i, n)] = full[(i, n + 1)];
            }
            let rhs: Vec<T> = g.iter().map(|&x| -x).collect();
            let delta = jac.solve(&rhs)?;
            for j in 0..=n {
                v[j] += delta[j];
            }
        }
        Err(FkError::Continuation(
            "tau = 0 endpoint solve did not converge".into(),
        ))
    }

    fn in_window(&self, u: &[T], w: &CurveWindow<T>) -> bool {
        let n = self.n();
        let (tau, lambda) = (u[n], u[n + 1]);
        tau >= w.tau.0 - c(1e-14)
            && tau <= w.tau.1 + c(1e-14)
            && lambda >= w.lambda.0 - c(1e-14)
            && lambda <= w.lambda.1 + c(1e-14)
    }

    /// Point diagnostics in the desingularized sense.
    fn diagnostics(&self, u: &[T]) -> Result<BifurcationPoint<T>> {
        let n = self.n();
        let (tau, lambda) = (u[n], u[n + 1]);
        let x = &u[..n];
        let a = desing_jacobian_x(self.sys, tau, x, lambda, self.step.flow_tol, &self.step.stencil)?;
        match self.kind {
            CurveKind::SaddleNode => {
                let v = a.null_vector();
                let w = a.transpose().null_vector();
                let sys = self.sys;
                let tol = self.step.flow_tol;
                let family = |xx: &[T], l: T| {
                    dynamics::desingularized_residual(sys, tau, xx, l, tol)
                };
                let dlam = numdiff::deriv_lambda(family, x, lambda, &self.step.stencil)?;
                let transversality = dot(&w, &dlam);
                let mut quad = T::zero();
                for i in 0..n {
                    for j in i..n {
                        let d2 = desing_second_deriv_xx(
                            sys,
                            tau,
                            x,
                            lambda,
                            i,
                            j,
                            tol,
                            &self.step.stencil,
                        )?;
                        let factor = if i == j { T::one() } else { c(2.0) };
                        quad += factor * v[i] * v[j] * dot(&w, &d2);
                    }
                }
                Ok(BifurcationPoint {
                    btype: BifurcationType::SaddleNode,
                    x: x.to_vec(),
                    tau,
                    lambda,
                    test_values: TestValues {
                        nonhyperbolicity: psi_sn_desing(&a).abs(),
                        transversality: Some(transversality),
                        quadratic_dominance: Some(quad),
                        ..TestValues::default()
                    },
                    low_confidence: false,
                })
            }
            CurveKind::NeimarkSacker => {
                let btype = if tau > T::zero() {
                    BifurcationType::NeimarkSacker
                } else {
                    BifurcationType::Hopf
                };
                Ok(BifurcationPoint {
                    btype,
                    x: x.to_vec(),
                    tau,
                    lambda,
                    test_values: TestValues {
                        nonhyperbolicity: psi_ns_literal(&a, tau).abs(),
                        ..TestValues::default()
                    },
                    low_confidence: false,
                })
            }
        }
    }

    /// Complex-pair guard for Neimark-Sacker curves.
    fn guard_ok(&self, u: &[T]) -> Result<bool> {
        if self.kind != CurveKind::NeimarkSacker {
            return Ok(true);
        }
        let n = self.n();
        let a = desing_jacobian_x(
            self.sys,
            u[n],
            &u[..n],
            u[n + 1],
            self.step.flow_tol,
            &self.step.stencil,
        )?;
        Ok(has_complex_pair(&a))
    }
}

/// Continues a saddle-node curve through `(tau, lambda)` space from a
/// converged SN event. The desingularized augmented system keeps the curve
/// well defined at `tau = 0`, where it lands exactly on the ODE saddle-node.
pub fn continue_sn_curve<T: Scalar>(
    sys: &SystemDef<T>,
    seed: &BifurcationPoint<T>,
    window: &CurveWindow<T>,
    step: &StepControl<T>,
) -> Result<ParamCurve<T>> {
    continue_curve(sys, seed, window, step, CurveKind::SaddleNode)
}

/// Continues a Neimark-Sacker curve (n = 2) with the complex-pair guard;
/// a guard violation terminates the direction with a resonance flag.
pub fn continue_ns_curve<T: Scalar>(
    sys: &SystemDef<T>,
    seed: &BifurcationPoint<T>,
    window: &CurveWindow<T>,
    step: &StepControl<T>,
) -> Result<ParamCurve<T>> {
    if sys.dim() != 2 {
        return Err(FkError::Invalid(
            "Neimark-Sacker continuation is implemented for n = 2".into(),
        ));
    }
    continue_curve(sys, seed, window, step, CurveKind::NeimarkSacker)
}

fn continue_curve<T: Scalar>(
    sys: &SystemDef<T>,
    seed: &BifurcationPoint<T>,
    window: &CurveWindow<T>,
    step: &StepControl<T>,
    kind: CurveKind,
) -> Result<ParamCurve<T>> {
    let n = sys.dim();
    if window.tau.0 < T::zero() {
        return Err(FkError::Invalid("curve tau window must be >= 0".into()));
    }
    let aug = AugCurve { sys, kind, step };

    // Polish the seed onto the curve manifold. Seeds sitting on the tau = 0
    // wall are solved there directly (exact field evaluations, no quotient
    // noise); interior seeds get the bordered corrector.
    let mut u0 = seed.x.clone();
    u0.push(seed.tau);
    u0.push(seed.lambda);
    let u0 = if seed.tau <= c(1e-10) {
        aug.solve_tau_zero(&u0)?
    } else {
        let t_seed = aug.tangent(&u0)?;
        match aug.correct(&u0, &t_seed)? {
            Some(u) => u,
            None => {
                return Err(FkError::Continuation(
                    "seed does not converge onto the bifurcation curve".into(),
                ))
            }
        }
    };

    let mut t0 = aug.tangent(&u0)?;
    // Orient the forward direction toward increasing tau.
    if t0[n] < T::zero() {
        for v in t0.iter_mut() {
            *v = -*v;
        }
    }

    let at_tau_zero = u0[n] <= c(1e-12);
    let forward = walk_curve(&aug, &u0, &t0, window)?;
    let (backward_pts, term_back) = if at_tau_zero {
        (Vec::new(), CurveTermination::TauZero)
    } else {
        let t_back: Vec<T> = t0.iter().map(|&v| -v).collect();
        let back = walk_curve(&aug, &u0, &t_back, window)?;
        (back.0, back.1)
    };

    let mut points = Vec::new();
    for u in backward_pts.into_iter().rev() {
        points.push(aug.diagnostics(&u)?);
    }
    points.push(aug.diagnostics(&u0)?);
    for u in forward.0 {
        points.push(aug.diagnostics(&u)?);
    }
    Ok(ParamCurve {
        points,
        termination_backward: term_back,
        termination_forward: forward.1,
    })
}

fn walk_curve<T: Scalar>(
    aug: &AugCurve<'_, T>,
    u0: &[T],
    t0: &[T],
    window: &CurveWindow<T>,
) -> Result<(Vec<Vec<T>>, CurveTermination)> {
    let n = aug.n();
    let step = aug.step;
    let mut points: Vec<Vec<T>> = Vec::new();
    let mut u_prev = u0.to_vec();
    let mut t_prev = t0.to_vec();
    let mut h = step.initial;

    for _ in 0..step.max_steps {
        let u_pred: Vec<T> = u_prev
            .iter()
            .zip(&t_prev)
            .map(|(&u, &t)| u + h * t)
            .collect();
        let hits_tau_wall = u_pred[n] < T::zero();
        let corrected = if hits_tau_wall {
            None
        } else {
            aug.correct(&u_pred, &t_prev)?
        };
        match corrected {
            Some(u_new) => {
                if u_new[n] <= c(1e-12) {
                    // Close the curve on the ODE bifurcation at tau = 0.
                    if let Ok(end) = aug.solve_tau_zero(&u_new) {
                        points.push(end);
                    } else {
                        points.push(u_new);
                    }
                    return Ok((points, CurveTermination::TauZero));
                }
                if !aug.in_window(&u_new, window) {
                    points.push(u_new);
                    return Ok((points, CurveTermination::Window));
                }
                if !aug.guard_ok(&u_new)? {
                    return Ok((points, CurveTermination::Resonance));
                }
                let mut t_new = match aug.tangent(&u_new) {
                    Ok(t) => t,
                    Err(_) => return Ok((points, CurveTermination::Divergence)),
                };
                if dot(&t_new, &t_prev) < T::zero() {
                    for v in t_new.iter_mut() {
                        *v = -*v;
                    }
                }
                points.push(u_new.clone());
                u_prev = u_new;
                t_prev = t_new;
                h = (h * c(2.0)).min(step.max);
            }
            None => {
                // Try to land exactly on tau = 0 before giving up.
                if u_pred[n] < step.min {
                    if let Ok(end) = aug.solve_tau_zero(&u_prev) {
                        points.push(end);
                        return Ok((points, CurveTermination::TauZero));
                    }
                }
                h *= c(0.5);
                if h < step.min {
                    return Ok((points, CurveTermination::Divergence));
                }
            }
        }
    }
    Ok((points, CurveTermination::MaxSteps))
}

// ---------------------------------------------------------------------------
// transcritical curves at invariant fixed points
// ---------------------------------------------------------------------------

/// Traces the transcritical curve `lambda_TC(tau)` at a fixed point that
/// stays fixed for all `(tau, lambda)` (a declared invariant point, verified
/// numerically at the seed). For each `tau` on a grid, the scalar condition
/// "transverse eigenvalue of `D Phi` equals 1" is solved for `lambda` by
/// bracketed bisection; `tau` values whose bracket holds no root are skipped
/// with a warning entry.
pub fn tc_curve_at_invariant<T: Scalar>(
    sys: &SystemDef<T>,
    x_inv: &[T],
    invariant_dirs: &[usize],
    tau_window: (T, T),
    n_samples: usize,
    lambda_window: (T, T),
    step: &StepControl<T>,
) -> Result<TcCurve<T>> {
    let n = sys.dim();
    if x_inv.len() != n {
        return Err(FkError::Invalid("invariant point dimension mismatch".into()));
    }
    if tau_window.0 <= T::zero() || tau_window.1 <= tau_window.0 {
        return Err(FkError::Invalid("tau window must be positive and increasing".into()));
    }
    if n_samples < 1 {
        return Err(FkError::Invalid("need at least one tau sample".into()));
    }
    let transverse: Vec<usize> = (0..n).filter(|i| !invariant_dirs.contains(i)).collect();
    if transverse.is_empty() {
        return Err(FkError::Invalid("no transverse direction left".into()));
    }

    // Verify invariance at the seed corner.
    let lam_mid = (lambda_window.0 + lambda_window.1) * c(0.5);
    let p_seed = DisturbanceParams {
        tau: tau_window.0,
        lambda: lam_mid,
    };
    let image = dynamics::flow_kick(sys, x_inv, &p_seed, step.flow_tol)?;
    if dynamics::max_abs_diff(&image, x_inv) > c(1e-7) {
        return Err(FkError::Invalid(
            "x_inv is not a fixed point of the flow-kick map at the seed parameters".into(),
        ));
    }

    let psi = |tau: T, lambda: T| -> Result<T> {
        let p = DisturbanceParams { tau, lambda };
        let jac = flow_kick_jacobian(sys, x_inv, &p, step.flow_tol, &step.stencil)?;
        // det(J_TT - I) over the transverse block: zero exactly when a
        // transverse eigenvalue hits 1.
        let m = transverse.len();
        let mut block = Mat::zeros(m, m);
        for (bi, &i) in transverse.iter().enumerate() {
            for (bj, &j) in transverse.iter().enumerate() {
                let id = if i == j { T::one() } else { T::zero() };
                block[(bi, bj)] = jac[(i, j)] - id;
            }
        }
        Ok(block.det())
    };

    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for k in 0..n_samples {
        let frac = if n_samples == 1 {
            T::zero()
        } else {
            c::<T>(k as f64) / c::<T>((n_samples - 1) as f64)
        };
        let tau = tau_window.0 + (tau_window.1 - tau_window.0) * frac;

        // Bracket scan over the lambda window.
        let scan = 24usize;
        let mut bracket = None;
        let mut prev_l = lambda_window.0;
        let mut prev_v = psi(tau, prev_l)?;
        for s in 1..=scan {
            let l = lambda_window.0
                + (lambda_window.1 - lambda_window.0) * c::<T>(s as f64) / c::<T>(scan as f64);
            let v = psi(tau, l)?;
            if prev_v * v <= T::zero() && (prev_v != T::zero() || v != T::zero()) {
                bracket = Some((prev_l, prev_v, l, v));
                break;
            }
            prev_l = l;
            prev_v = v;
        }
        let Some((mut lo, mut flo, mut hi, _fhi)) = bracket else {
            skipped.push(tau);
            continue;
        };
        // Bisection to near machine precision.
        for _ in 0..100 {
            let mid = (lo + hi) * c(0.5);
            let fmid = psi(tau, mid)?;
            if fmid == T::zero() || (hi - lo) * c::<T>(0.5) < c(1e-14) {
                lo = mid;
                break;
            }
            if flo * fmid < T::zero() {
                hi = mid;
            } else {
                lo = mid;
                flo = fmid;
            }
        }
        let lambda = (lo + hi) * c(0.5);

        // Table diagnostics at the located point.
        let p = DisturbanceParams { tau, lambda };
        let tol = step.flow_tol;
        let family =
            |xx: &[T], l: T| dynamics::flow_kick(sys, xx, &DisturbanceParams { tau, lambda: l }, tol);
        let dlam = numdiff::deriv_lambda(family, x_inv, lambda, &step.stencil)?;
        let mixed = numdiff::mixed_partial_x_lambda(family, x_inv, lambda, &step.stencil)?;
        let t0 = transverse[0];
        let d2 = flow_kick_second_deriv_xx(sys, x_inv, &p, t0, t0, tol, &step.stencil)?;
        points.push(BifurcationPoint {
            btype: BifurcationType::Transcritical,
            x: x_inv.to_vec(),
            tau,
            lambda,
            test_values: TestValues {
                nonhyperbolicity: psi(tau, lambda)?.abs(),
                lambda_derivative: Some(norm(&dlam)),
                mixed_partial: Some(mixed[(t0, t0)]),
                quadratic_dominance: Some(d2[t0]),
                ..TestValues::default()
            },
            low_confidence: false,
        });
    }
    Ok(TcCurve {
        points,
        skipped_taus: skipped,
    })
}

/// Transcritical curve samples plus the `tau` values whose lambda bracket
/// held no root.
#[derive(Debug, Clone)]
pub struct TcCurve<T> {
    pub points: Vec<BifurcationPoint<T>>,
    pub skipped_taus: Vec<T>,
}

// ---------------------------------------------------------------------------
// stability grid
// ---------------------------------------------------------------------------

/// Meaning of the grid's second axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondAxis {
    Lambda,
    /// Kick magnitude; converted per cell via `lambda = kappa / tau`.
    Kappa,
}

/// One grid cell: the deduplicated fixed points found there.
#[derive(Debug, Clone)]
pub struct CellRecord<T> {
    pub tau: T,
    pub lambda: T,
    pub fixed_points: Vec<FixedPointRecord<T>>,
    /// Newton starts that failed to converge in this cell.
    pub failures: usize,
}

impl<T: Scalar> CellRecord<T> {
    pub fn count(&self) -> usize {
        self.fixed_points.len()
    }

    pub fn count_with(&self, s: Stability) -> usize {
        self.fixed_points
            .iter()
            .filter(|rec| rec.stability == s)
            .count()
    }
}

/// Classification of `(tau, lambda-or-kappa)` cells by the fixed points found
/// from multi-start Newton.
#[derive(Debug, Clone)]
pub struct StabilityGrid<T> {
    pub tau_axis: Vec<T>,
    pub second_axis: Vec<T>,
    pub axis_kind: SecondAxis,
    /// Row-major: `cells[i * second_axis.len() + j]` for `(tau_i, v_j)`.
    pub cells: Vec<CellRecord<T>>,
}

impl<T: Scalar> StabilityGrid<T> {
    pub fn cell(&self, i_tau: usize, j_second: usize) -> &CellRecord<T> {
        &self.cells[i_tau * self.second_axis.len() + j_second]
    }
}

/// Scans the grid. Per cell, Newton runs from the continuous equilibria found
/// at the cell's lambda plus the user seeds; converged in-domain fixed points
/// are deduplicated by `dedupe_radius` and classified. Cells are independent
/// and evaluated in parallel; results merge deterministically by cell index.
pub fn stability_grid<T: Scalar>(
    sys: &SystemDef<T>,
    tau_axis: &[T],
    second_axis: &[T],
    axis_kind: SecondAxis,
    seeds: &[Vec<T>],
    dedupe_radius: T,
    step: &StepControl<T>,
) -> Result<StabilityGrid<T>> {
    if tau_axis.windows(2).any(|w| w[0] >= w[1])
        || second_axis.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(FkError::Invalid("grid axes must be strictly increasing".into()));
    }
    if tau_axis.iter().any(|&t| t <= T::zero()) {
        return Err(FkError::Invalid("grid tau values must be > 0".into()));
    }
    if seeds.is_empty() {
        return Err(FkError::Invalid("grid needs at least one seed state".into()));
    }

    let indices: Vec<(usize, usize)> = (0..tau_axis.len())
        .flat_map(|i| (0..second_axis.len()).map(move |j| (i, j)))
        .collect();
    let cells: Vec<CellRecord<T>> = indices
        .par_iter()
        .map(|&(i, j)| {
            let tau = tau_axis[i];
            let lambda = match axis_kind {
                SecondAxis::Lambda => second_axis[j],
                SecondAxis::Kappa => second_axis[j] / tau,
            };
            scan_cell(sys, tau, lambda, seeds, dedupe_radius, step)
        })
        .collect();

    Ok(StabilityGrid {
        tau_axis: tau_axis.to_vec(),
        second_axis: second_axis.to_vec(),
        axis_kind,
        cells,
    })
}

fn scan_cell<T: Scalar>(
    sys: &SystemDef<T>,
    tau: T,
    lambda: T,
    seeds: &[Vec<T>],
    dedupe_radius: T,
    step: &StepControl<T>,
) -> CellRecord<T> {
    let opts = equilibria::NewtonOptions {
        tol: step.corrector_tol,
        max_iter: 30,
        flow_tol: step.flow_tol,
        stencil: step.stencil,
        eps_hyp: c(EPS_HYP),
    };
    let mut failures = 0usize;

    // Continuous equilibria at this lambda first: cheap, honest starting set.
    let p0 = DisturbanceParams {
        tau: T::zero(),
        lambda,
    };
    let mut starts: Vec<Vec<T>> = Vec::new();
    for seed in seeds {
        if let Ok((rec, _)) = equilibria::newton_fixed_point_with(sys, &p0, seed, &opts) {
            starts.push(rec.x);
        }
    }
    starts.extend(seeds.iter().cloned());

    let p = DisturbanceParams { tau, lambda };
    let mut found: Vec<FixedPointRecord<T>> = Vec::new();
    for start in &starts {
        match equilibria::newton_fixed_point_with(sys, &p, start, &opts) {
            Ok((rec, _)) => {
                if !sys.in_domain(&rec.x) {
                    continue;
                }
                if found.iter().all(|f| dist(&f.x, &rec.x) > dedupe_radius) {
                    found.push(rec);
                }
            }
            Err(_) => failures += 1,
        }
    }
    CellRecord {
        tau,
        lambda,
        fixed_points: found,
        failures,
    }
}
