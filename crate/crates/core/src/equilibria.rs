//! Newton solvers for continuous equilibria and flow-kick fixed points,
//! eigenvalues of small dense matrices, and stability classification.
//!
//! Fixed points at any `tau >= 0` are zeros of the desingularized residual,
//! so one solver covers both the flow-kick map (`tau > 0`) and its continuous
//! analog (`tau = 0`). Stability comes from the Jacobian spectrum: moduli
//! against the unit circle for maps, real parts against zero for the ODE.
//! The two spectra are tied by `mu_i = 1 + tau * lambda_i`, which
//! [`eigenvalue_relation_check`] verifies as an identity.

use num_complex::Complex;

use crate::dynamics::{DisturbanceParams, SystemDef};
use crate::error::{FkError, Result};
use crate::linalg::{norm, Mat};
use crate::numdiff::{desing_jacobian_x, StencilConfig};
use crate::{c, Scalar};

/// Hyperbolicity band: eigenvalues within this distance of the unit circle
/// (or imaginary axis) are tagged nonhyperbolic.
pub const EPS_HYP: f64 = 1e-6;

/// Largest dimension the polynomial eigenvalue routines support.
pub const MAX_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    Saddle,
    Nonhyperbolic,
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Saddle => "saddle",
            Stability::Nonhyperbolic => "nonhyperbolic",
        };
        f.write_str(s)
    }
}

/// Whether a record describes a continuous equilibrium or a flow-kick fixed
/// point; decides which stability convention applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointKind {
    Continuous,
    FlowKick,
}

/// A converged fixed point with its disturbance parameters, spectrum, and
/// stability tag. `tau = 0` records the continuous analog; eigenvalues are
/// then those of `D[f + r]` rather than of the map Jacobian.
#[derive(Debug, Clone)]
pub struct FixedPointRecord<T> {
    pub x: Vec<T>,
    pub tau: T,
    pub lambda: T,
    pub eigenvalues: Vec<Complex<T>>,
    pub stability: Stability,
    /// Norm of the desingularized residual at `x`.
    pub residual_norm: T,
    pub kind: FixedPointKind,
}

impl<T: Scalar> FixedPointRecord<T> {
    pub fn params(&self) -> DisturbanceParams<T> {
        DisturbanceParams {
            tau: self.tau,
            lambda: self.lambda,
        }
    }
}

/// Eigenvalues of a dense matrix, `n <= 4`.
///
/// n = 1 reads the entry, n = 2 uses the quadratic formula, n = 3 and 4 build
/// the characteristic polynomial by the Faddeev-LeVerrier recurrence and run
/// a Durand-Kerner root iteration.
pub fn eigenvalues<T: Scalar>(a: &Mat<T>) -> Result<Vec<Complex<T>>> {
    assert_eq!(a.rows, a.cols, "eigenvalues of a non-square matrix");
    let n = a.rows;
    match n {
        0 => Ok(Vec::new()),
        1 => Ok(vec![Complex::new(a[(0, 0)], T::zero())]),
        2 => {
            let tr = a[(0, 0)] + a[(1, 1)];
            let det = a.det();
            let half = c::<T>(0.5);
            let disc = tr * tr - c::<T>(4.0) * det;
            if disc >= T::zero() {
                let s = disc.sqrt();
                Ok(vec![
                    Complex::new((tr + s) * half, T::zero()),
                    Complex::new((tr - s) * half, T::zero()),
                ])
            } else {
                let s = (-disc).sqrt() * half;
                Ok(vec![
                    Complex::new(tr * half, s),
                    Complex::new(tr * half, -s),
                ])
            }
        }
        3 | 4 => {
            let coeffs = characteristic_coefficients(a);
            Ok(durand_kerner(&coeffs))
        }
        _ => Err(FkError::UnsupportedDimension { n }),
    }
}

/// Monic characteristic polynomial coefficients `[c_0, ..., c_{n-1}]` with
/// `p(x) = x^n + c_{n-1} x^{n-1} + ... + c_0`, via Faddeev-LeVerrier.
fn characteristic_coefficients<T: Scalar>(a: &Mat<T>) -> Vec<T> {
    let n = a.rows;
    let mut m = Mat::zeros(n, n);
    let mut coeffs = vec![T::zero(); n];
    let mut cprev = T::one();
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = T::zero();
                for l in 0..n {
                    s += a[(i, l)] * m[(l, j)];
                }
                next[(i, j)] = s;
            }
        }
        for i in 0..n {
            next[(i, i)] += cprev;
        }
        m = next;
        // c_{n-k} = -tr(A M_k) / k
        let mut tr = T::zero();
        for i in 0..n {
            let mut s = T::zero();
            for l in 0..n {
                s += a[(i, l)] * m[(l, i)];
            }
            tr += s;
        }
        let ck = -tr / c::<T>(k as f64);
        coeffs[n - k] = ck;
        cprev = ck;
    }
    coeffs
}

/// All roots of a monic polynomial by Durand-Kerner iteration.
fn durand_kerner<T: Scalar>(coeffs: &[T]) -> Vec<Complex<T>> {
    let n = coeffs.len();
    let eval = |z: Complex<T>| -> Complex<T> {
        let mut p = Complex::new(T::one(), T::zero());
        for &ck in coeffs.iter().rev() {
            p = p * z + Complex::new(ck, T::zero());
        }
        p
    };
    // Initial guesses on a circle sized by the coefficients, rotated off the
    // real axis so conjugate-symmetric traps are avoided.
    let radius = coeffs
        .iter()
        .fold(T::one(), |acc, &ck| acc.max(ck.abs()))
        + T::one();
    let mut roots: Vec<Complex<T>> = (0..n)
        .map(|k| {
            let angle =
                c::<T>(2.0) * T::PI() * c::<T>(k as f64) / c::<T>(n as f64) + c::<T>(0.4);
            Complex::new(radius * angle.cos(), radius * angle.sin())
        })
        .collect();
    let tol = c::<T>(1e-14) * radius;
    for _ in 0..200 {
        let mut max_delta = T::zero();
        for i in 0..n {
            let mut denom = Complex::new(T::one(), T::zero());
            for j in 0..n {
                if j != i {
                    denom = denom * (roots[i] - roots[j]);
                }
            }
            if denom.norm() == T::zero() {
                continue;
            }
            let delta = eval(roots[i]) / denom;
            roots[i] = roots[i] - delta;
            max_delta = max_delta.max(delta.norm());
        }
        if max_delta < tol {
            break;
        }
    }
    // Strip conjugate noise from essentially-real roots.
    for root in &mut roots {
        if root.im.abs() < c::<T>(1e-12) * (T::one() + root.re.abs()) {
            root.im = T::zero();
        }
    }
    roots
}

/// Classifies a spectrum. Map case compares moduli to the unit circle,
/// continuous case compares real parts to zero; anything within `eps_hyp`
/// of the boundary is nonhyperbolic.
pub fn classify_stability<T: Scalar>(
    eigs: &[Complex<T>],
    kind: FixedPointKind,
    eps_hyp: T,
) -> Stability {
    assert!(!eigs.is_empty(), "classification needs eigenvalues");
    let indicator = |e: &Complex<T>| -> T {
        match kind {
            FixedPointKind::FlowKick => e.norm() - T::one(),
            FixedPointKind::Continuous => e.re,
        }
    };
    let mut any_neg = false;
    let mut any_pos = false;
    for e in eigs {
        let v = indicator(e);
        if v.abs() <= eps_hyp {
            return Stability::Nonhyperbolic;
        }
        if v < T::zero() {
            any_neg = true;
        } else {
            any_pos = true;
        }
    }
    match (any_neg, any_pos) {
        (true, false) => Stability::Stable,
        (false, true) => Stability::Unstable,
        _ => Stability::Saddle,
    }
}

/// Solver knobs for [`newton_fixed_point`].
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions<T> {
    /// Residual norm declaring convergence.
    pub tol: T,
    pub max_iter: usize,
    /// Integration tolerance used inside residual evaluations.
    pub flow_tol: T,
    pub stencil: StencilConfig<T>,
    pub eps_hyp: T,
}

impl<T: Scalar> Default for NewtonOptions<T> {
    fn default() -> Self {
        NewtonOptions {
            tol: c(1e-10),
            max_iter: 40,
            flow_tol: c(crate::dynamics::DEFAULT_TOL),
            stencil: StencilConfig::default(),
            eps_hyp: c(EPS_HYP),
        }
    }
}

/// Newton iteration on the desingularized residual. `tau = 0` solves
/// `f + r = 0` (the continuous analog); `tau > 0` finds flow-kick fixed
/// points. The step is halved up to 8 times whenever the residual norm fails
/// to decrease, which keeps the iteration alive near folds.
pub fn newton_fixed_point<T: Scalar>(
    sys: &SystemDef<T>,
    p: &DisturbanceParams<T>,
    x_guess: &[T],
    tol: T,
    max_iter: usize,
) -> Result<FixedPointRecord<T>> {
    let opts = NewtonOptions {
        tol,
        max_iter,
        ..NewtonOptions::default()
    };
    newton_fixed_point_with(sys, p, x_guess, &opts).map(|(rec, _)| rec)
}

/// Full-control variant returning the residual-norm history alongside the
/// record (used by convergence-rate tests).
pub fn newton_fixed_point_with<T: Scalar>(
    sys: &SystemDef<T>,
    p: &DisturbanceParams<T>,
    x_guess: &[T],
    opts: &NewtonOptions<T>,
) -> Result<(FixedPointRecord<T>, Vec<T>)> {
    if p.tau < T::zero() {
        return Err(FkError::Invalid("tau must be >= 0".into()));
    }
    let residual = |x: &[T]| -> Result<Vec<T>> {
        crate::dynamics::desingularized_residual(sys, p.tau, x, p.lambda, opts.flow_tol)
    };

    let mut x = x_guess.to_vec();
    let mut g = residual(&x)?;
    let mut gnorm = norm(&g);
    let mut history = vec![gnorm];

    let mut iters = 0usize;
    while gnorm > opts.tol {
        if iters >= opts.max_iter {
            return Err(FkError::NoFixedPoint {
                iters,
                residual: gnorm.to_f64().unwrap_or(f64::NAN),
                last: x.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
            });
        }
        iters += 1;

        let jac = desing_jacobian_x(sys, p.tau, &x, p.lambda, opts.flow_tol, &opts.stencil)?;
        let neg_g: Vec<T> = g.iter().map(|&v| -v).collect();
        let delta = jac.solve(&neg_g).map_err(|_| FkError::NearBifurcation {
            at: x.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
        })?;

        let mut scale = T::one();
        let mut accepted = false;
        for _ in 0..=8 {
            let trial: Vec<T> = x
                .iter()
                .zip(&delta)
                .map(|(&xi, &di)| xi + scale * di)
                .collect();
            if let Ok(gt) = residual(&trial) {
                let gt_norm = norm(&gt);
                if gt_norm < gnorm || gt_norm <= opts.tol {
                    x = trial;
                    g = gt;
                    gnorm = gt_norm;
                    accepted = true;
                    break;
                }
            }
            scale *= c::<T>(0.5);
        }
        if !accepted {
            return Err(FkError::NoFixedPoint {
                iters,
                residual: gnorm.to_f64().unwrap_or(f64::NAN),
                last: x.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
            });
        }
        history.push(gnorm);
    }

    // The residual Jacobian at the solution is A = (D Phi - I) / tau, so the
    // map Jacobian D Phi = I + tau A comes from the same stencil for free.
    let a = desing_jacobian_x(sys, p.tau, &x, p.lambda, opts.flow_tol, &opts.stencil)?;
    let record = record_from_jacobian(sys, p, x, gnorm, &a, opts.eps_hyp)?;
    Ok((record, history))
}

/// Builds a record from a converged point and its residual Jacobian.
pub(crate) fn record_from_jacobian<T: Scalar>(
    sys: &SystemDef<T>,
    p: &DisturbanceParams<T>,
    x: Vec<T>,
    residual_norm: T,
    residual_jacobian: &Mat<T>,
    eps_hyp: T,
) -> Result<FixedPointRecord<T>> {
    let n = sys.dim();
    if n > MAX_DIM {
        return Err(FkError::UnsupportedDimension { n });
    }
    let (kind, eigs) = if p.tau > T::zero() {
        (
            FixedPointKind::FlowKick,
            eigenvalues(&map_jacobian_from_residual(residual_jacobian, p.tau))?,
        )
    } else {
        (FixedPointKind::Continuous, eigenvalues(residual_jacobian)?)
    };
    let stability = classify_stability(&eigs, kind, eps_hyp);
    Ok(FixedPointRecord {
        x,
        tau: p.tau,
        lambda: p.lambda,
        eigenvalues: eigs,
        stability,
        residual_norm,
        kind,
    })
}

/// `D Phi = I + tau A` from the residual Jacobian `A`.
pub(crate) fn map_jacobian_from_residual<T: Scalar>(a: &Mat<T>, tau: T) -> Mat<T> {
    let n = a.rows;
    let mut dphi = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { T::one() } else { T::zero() };
            dphi[(i, j)] = id + tau * a[(i, j)];
        }
    }
    dphi
}

/// Outcome of [`eigenvalue_relation_check`].
#[derive(Debug, Clone)]
pub struct RelationReport<T> {
    /// `max_i |mu_i - (1 + tau lambda_i)|` after nearest pairing.
    pub max_discrepancy: T,
    /// Matched pairs `(mu_i, 1 + tau lambda_i)`.
    pub pairs: Vec<(Complex<T>, Complex<T>)>,
}

/// Verifies the spectral identity between the map Jacobian `D Phi` and the
/// residual Jacobian `A = (D Phi - I) / tau` at a converged flow-kick fixed
/// point: each eigenvalue pair satisfies `mu = 1 + tau lambda` up to pairing
/// and round-off.
pub fn eigenvalue_relation_check<T: Scalar>(
    sys: &SystemDef<T>,
    rec: &FixedPointRecord<T>,
    cfg: &StencilConfig<T>,
) -> Result<RelationReport<T>> {
    if rec.tau <= T::zero() {
        return Err(FkError::Invalid(
            "relation check needs a flow-kick fixed point with tau > 0".into(),
        ));
    }
    let p = rec.params();
    let a = desing_jacobian_x(
        sys,
        p.tau,
        &rec.x,
        p.lambda,
        c(crate::dynamics::DEFAULT_TOL),
        cfg,
    )?;
    let mus = eigenvalues(&map_jacobian_from_residual(&a, p.tau))?;
    let one = Complex::new(T::one(), T::zero());
    let tau_c = Complex::new(p.tau, T::zero());
    let predicted: Vec<Complex<T>> = eigenvalues(&a)?
        .into_iter()
        .map(|lam| one + tau_c * lam)
        .collect();

    // Greedy nearest pairing in the complex plane.
    let mut remaining = predicted;
    let mut pairs = Vec::with_capacity(mus.len());
    let mut max_disc = T::zero();
    for &mu in &mus {
        let best_idx = remaining
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (mu - *a)
                    .norm()
                    .partial_cmp(&(mu - *b).norm())
                    .unwrap()
            })
            .map(|(i, _)| i)
            .expect("same multiplicity");
        let matched = remaining.swap_remove(best_idx);
        max_disc = max_disc.max((mu - matched).norm());
        pairs.push((mu, matched));
    }
    Ok(RelationReport {
        max_discrepancy: max_disc,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{self, LogisticDisturbance};

    fn complex_sorted(mut v: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        v.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        v
    }

    #[test]
    fn eigenvalues_2x2_real() {
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![-2.0, -3.0]]);
        let e = complex_sorted(eigenvalues(&a).unwrap());
        assert!((e[0].re + 2.0).abs() < 1e-12 && e[0].im.abs() < 1e-12);
        assert!((e[1].re + 1.0).abs() < 1e-12 && e[1].im.abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_rotation_matrix() {
        let a = Mat::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        let e = complex_sorted(eigenvalues(&a).unwrap());
        assert!(e[0].re.abs() < 1e-12 && (e[0].im + 1.0).abs() < 1e-12);
        assert!(e[1].re.abs() < 1e-12 && (e[1].im - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_1x1_and_dim_cap() {
        let a = Mat::from_rows(&[vec![3.25]]);
        let e = eigenvalues(&a).unwrap();
        assert_eq!(e[0], Complex::new(3.25, 0.0));
        let big = Mat::<f64>::zeros(5, 5);
        assert!(matches!(
            eigenvalues(&big),
            Err(FkError::UnsupportedDimension { n: 5 })
        ));
    }

    #[test]
    fn eigenvalues_4x4_companion() {
        // companion matrix of (x^2 + 1)(x - 2)(x + 3) = x^4 + x^3 - 5x^2 + x - 6
        let a = Mat::from_rows(&[
            vec![0.0, 0.0, 0.0, 6.0],
            vec![1.0, 0.0, 0.0, -1.0],
            vec![0.0, 1.0, 0.0, 5.0],
            vec![0.0, 0.0, 1.0, -1.0],
        ]);
        let e = complex_sorted(eigenvalues(&a).unwrap());
        assert!((e[0].re + 3.0).abs() < 1e-9);
        assert!((e[1].im + 1.0).abs() < 1e-9 && e[1].re.abs() < 1e-9);
        assert!((e[2].im - 1.0).abs() < 1e-9 && e[2].re.abs() < 1e-9);
        assert!((e[3].re - 2.0).abs() < 1e-9);
    }

    #[test]
    fn classify_examples() {
        let map = FixedPointKind::FlowKick;
        let ode = FixedPointKind::Continuous;
        let eps = 1e-6;
        let eig = |re: f64, im: f64| Complex::new(re, im);
        assert_eq!(
            classify_stability(&[eig(0.9, 0.0), eig(0.5, 0.0)], map, eps),
            Stability::Stable
        );
        assert_eq!(
            classify_stability(&[eig(1.0, 0.0)], map, eps),
            Stability::Nonhyperbolic
        );
        assert_eq!(
            classify_stability(&[eig(-0.3, 0.2), eig(-0.3, -0.2)], ode, eps),
            Stability::Stable
        );
        assert_eq!(
            classify_stability(&[eig(1.2, 0.0), eig(0.5, 0.0)], map, eps),
            Stability::Saddle
        );
        assert_eq!(
            classify_stability(&[eig(1.2, 0.0), eig(2.0, 0.0)], map, eps),
            Stability::Unstable
        );
    }

    #[test]
    fn logistic_continuous_roots_from_both_guesses() {
        let entry = models::make_logistic::<f64>(LogisticDisturbance::ConstantRate);
        let p = DisturbanceParams::new(0.0, -0.24).unwrap();
        let stable = newton_fixed_point(&entry.system, &p, &[0.7], 1e-12, 40).unwrap();
        assert!((stable.x[0] - 0.6).abs() < 1e-10);
        assert_eq!(stable.stability, Stability::Stable);
        assert_eq!(stable.kind, FixedPointKind::Continuous);

        let unstable = newton_fixed_point(&entry.system, &p, &[0.3], 1e-12, 40).unwrap();
        assert!((unstable.x[0] - 0.4).abs() < 1e-10);
        assert_eq!(unstable.stability, Stability::Unstable);
    }

    #[test]
    fn logistic_flow_kick_roots_match_closed_form() {
        let entry = models::make_logistic::<f64>(LogisticDisturbance::ConstantRate);
        let p = DisturbanceParams::new(0.4, -0.24).unwrap();
        let oracle = models::logistic_flow_kick_fixed_points(0.4, -0.24);

        let stable = newton_fixed_point(&entry.system, &p, &[0.7], 1e-11, 40).unwrap();
        assert!((stable.x[0] - oracle[0]).abs() < 1e-8, "{}", stable.x[0]);
        assert_eq!(stable.stability, Stability::Stable);

        let unstable = newton_fixed_point(&entry.system, &p, &[0.3], 1e-11, 40).unwrap();
        assert!((unstable.x[0] - oracle[1]).abs() < 1e-8);
        assert_eq!(unstable.stability, Stability::Unstable);
    }

    #[test]
    fn klausmeier_barren_found_from_nearby_guess() {
        let entry = models::make_klausmeier(0.75f64);
        let p = DisturbanceParams::new(1.0, 2.0).unwrap();
        let oracle = models::klausmeier_barren_fixed_point(&p).unwrap();
        let rec = newton_fixed_point(&entry.system, &p, &[0.0, 2.0], 1e-11, 60).unwrap();
        assert!(crate::dynamics::max_abs_diff(&rec.x, &oracle) < 1e-8);
        assert_eq!(rec.stability, Stability::Stable);
    }

    #[test]
    fn newton_reports_no_fixed_point_when_none_exists() {
        let entry = models::make_logistic::<f64>(LogisticDisturbance::ConstantRate);
        // tau = 2.5, kappa = -0.6 destroys both fixed points
        let p = DisturbanceParams::from_kick(2.5, -0.6).unwrap();
        assert!(newton_fixed_point(&entry.system, &p, &[0.5], 1e-11, 30).is_err());
    }

    #[test]
    fn newton_converges_quadratically_away_from_folds() {
        let entry = models::make_logistic::<f64>(LogisticDisturbance::ConstantRate);
        let p = DisturbanceParams::new(0.4, -0.24).unwrap();
        let opts = NewtonOptions {
            tol: 1e-13,
            ..NewtonOptions::default()
        };
        let (_, history) = newton_fixed_point_with(&entry.system, &p, &[0.75], &opts).unwrap();
        assert!(history.len() >= 3, "history too short: {history:?}");
        // once inside the quadratic basin and above the integrator noise
        // floor, r_{k+1} <= C r_k^2
        let mut checked = false;
        for w in history.windows(2) {
            let (r1, r2) = (w[0], w[1]);
            if r1 < 1e-3 && r1 > 1e-8 {
                let ratio = r2 / (r1 * r1);
                assert!(ratio < 1e4, "quadratic-rate constant too large: {ratio}");
                checked = true;
            }
        }
        assert!(checked, "no pair in the testable window: {history:?}");
    }

    #[test]
    fn relation_check_is_tight_at_fixed_points() {
        let entry = models::make_logistic::<f64>(LogisticDisturbance::ConstantRate);
        let p = DisturbanceParams::new(0.4, -0.24).unwrap();
        let rec = newton_fixed_point(&entry.system, &p, &[0.7], 1e-11, 40).unwrap();
        let rep =
            eigenvalue_relation_check(&entry.system, &rec, &StencilConfig::default()).unwrap();
        assert!(rep.max_discrepancy < 1e-10, "{}", rep.max_discrepancy);

        let pp = models::make_predator_prey::<f64>();
        let p2 = DisturbanceParams::new(1.0, 0.2).unwrap();
        let guess = models::predprey_coexistence_equilibrium(0.2f64).unwrap();
        let rec2 = newton_fixed_point(&pp.system, &p2, &guess, 1e-10, 60).unwrap();
        let rep2 =
            eigenvalue_relation_check(&pp.system, &rec2, &StencilConfig::default()).unwrap();
        assert!(rep2.max_discrepancy < 1e-8, "{}", rep2.max_discrepancy);
    }
}
