//! Central-difference derivatives of maps, up to mixed second order.
//!
//! All downstream derivatives (map Jacobians, bifurcation test functions)
//! come from 2nd-order central stencils on perturbed inputs rather than
//! automatic differentiation or variational equations.

use crate::error::{FkError, Result};
use crate::linalg::Mat;
use crate::{c, Scalar};

/// Step-size policy for the stencils: per-coordinate step
/// `h = max(h_rel * |x_j|, h_abs_floor)`.
#[derive(Debug, Clone, Copy)]
pub struct StencilConfig<T> {
    pub h_rel: T,
    pub h_abs_floor: T,
}

impl<T: Scalar> Default for StencilConfig<T> {
    fn default() -> Self {
        StencilConfig {
            h_rel: c(1e-5),
            h_abs_floor: c(1e-7),
        }
    }
}

impl<T: Scalar> StencilConfig<T> {
    pub fn new(h_rel: T, h_abs_floor: T) -> Self {
        assert!(h_rel > T::zero() && h_abs_floor > T::zero());
        StencilConfig { h_rel, h_abs_floor }
    }

    pub fn step_for(&self, coord: T) -> T {
        (self.h_rel * coord.abs()).max(self.h_abs_floor)
    }
}

fn to_f64_vec<T: Scalar>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()
}

fn eval_at<T, F>(map: &F, point: Vec<T>) -> Result<Vec<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> Result<Vec<T>>,
{
    map(&point).map_err(|e| e.at_stencil(to_f64_vec(&point)))
}

/// Jacobian of `map` at `x`: entry `(i, j) = [map(x + h e_j)_i - map(x - h e_j)_i] / (2h)`.
pub fn jacobian_x<T, F>(map: F, x: &[T], cfg: &StencilConfig<T>) -> Result<Mat<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> Result<Vec<T>>,
{
    let n = x.len();
    let mut columns: Vec<Vec<T>> = Vec::with_capacity(n);
    for j in 0..n {
        let h = cfg.step_for(x[j]);
        let mut xp = x.to_vec();
        xp[j] += h;
        let mut xm = x.to_vec();
        xm[j] -= h;
        let fp = eval_at(&map, xp)?;
        let fm = eval_at(&map, xm)?;
        let two_h = c::<T>(2.0) * h;
        columns.push(fp.iter().zip(&fm).map(|(&p, &m)| (p - m) / two_h).collect());
    }
    let m = columns[0].len();
    let mut jac = Mat::zeros(m, n);
    for (j, col) in columns.iter().enumerate() {
        for i in 0..m {
            jac[(i, j)] = col[i];
        }
    }
    Ok(jac)
}

/// Second derivative `d^2 map / dx_i dx_j` as a vector of components.
/// Symmetric in `(i, j)` by construction: the same stencil is used for both
/// orders. Diagonal uses the 3-point stencil, off-diagonal the 4-point one.
pub fn second_deriv_xx<T, F>(
    map: F,
    x: &[T],
    i: usize,
    j: usize,
    cfg: &StencilConfig<T>,
) -> Result<Vec<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> Result<Vec<T>>,
{
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    let hi = cfg.step_for(x[i]);
    let hj = cfg.step_for(x[j]);
    if i == j {
        let mut xp = x.to_vec();
        xp[i] += hi;
        let mut xm = x.to_vec();
        xm[i] -= hi;
        let fp = eval_at(&map, xp)?;
        let f0 = eval_at(&map, x.to_vec())?;
        let fm = eval_at(&map, xm)?;
        let h2 = hi * hi;
        Ok(fp
            .iter()
            .zip(&f0)
            .zip(&fm)
            .map(|((&p, &z), &m)| (p - c::<T>(2.0) * z + m) / h2)
            .collect())
    } else {
        let mut xpp = x.to_vec();
        xpp[i] += hi;
        xpp[j] += hj;
        let mut xpm = x.to_vec();
        xpm[i] += hi;
        xpm[j] -= hj;
        let mut xmp = x.to_vec();
        xmp[i] -= hi;
        xmp[j] += hj;
        let mut xmm = x.to_vec();
        xmm[i] -= hi;
        xmm[j] -= hj;
        let fpp = eval_at(&map, xpp)?;
        let fpm = eval_at(&map, xpm)?;
        let fmp = eval_at(&map, xmp)?;
        let fmm = eval_at(&map, xmm)?;
        let denom = c::<T>(4.0) * hi * hj;
        Ok((0..fpp.len())
            .map(|k| (fpp[k] - fpm[k] - fmp[k] + fmm[k]) / denom)
            .collect())
    }
}

/// Central difference of a parameterized map family in its parameter.
pub fn deriv_lambda<T, F>(
    map_family: F,
    x: &[T],
    lambda: T,
    cfg: &StencilConfig<T>,
) -> Result<Vec<T>>
where
    T: Scalar,
    F: Fn(&[T], T) -> Result<Vec<T>>,
{
    let h = cfg.step_for(lambda);
    let fp = map_family(x, lambda + h).map_err(|e| e.at_stencil(to_f64_vec(x)))?;
    let fm = map_family(x, lambda - h).map_err(|e| e.at_stencil(to_f64_vec(x)))?;
    let two_h = c::<T>(2.0) * h;
    Ok(fp.iter().zip(&fm).map(|(&p, &m)| (p - m) / two_h).collect())
}

/// Mixed partial `d^2 map / dx_j dlambda` via the 4-point stencil;
/// entry `(i, j)` of the result.
pub fn mixed_partial_x_lambda<T, F>(
    map_family: F,
    x: &[T],
    lambda: T,
    cfg: &StencilConfig<T>,
) -> Result<Mat<T>>
where
    T: Scalar,
    F: Fn(&[T], T) -> Result<Vec<T>>,
{
    let n = x.len();
    let hl = cfg.step_for(lambda);
    let mut columns: Vec<Vec<T>> = Vec::with_capacity(n);
    for j in 0..n {
        let hx = cfg.step_for(x[j]);
        let mut xp = x.to_vec();
        xp[j] += hx;
        let mut xm = x.to_vec();
        xm[j] -= hx;
        let fpp = map_family(&xp, lambda + hl).map_err(|e| e.at_stencil(to_f64_vec(&xp)))?;
        let fpm = map_family(&xp, lambda - hl).map_err(|e| e.at_stencil(to_f64_vec(&xp)))?;
        let fmp = map_family(&xm, lambda + hl).map_err(|e| e.at_stencil(to_f64_vec(&xm)))?;
        let fmm = map_family(&xm, lambda - hl).map_err(|e| e.at_stencil(to_f64_vec(&xm)))?;
        let denom = c::<T>(4.0) * hx * hl;
        columns.push(
            (0..fpp.len())
                .map(|k| (fpp[k] - fpm[k] - fmp[k] + fmm[k]) / denom)
                .collect(),
        );
    }
    let m = columns[0].len();
    let mut out = Mat::zeros(m, n);
    for (j, col) in columns.iter().enumerate() {
        for i in 0..m {
            out[(i, j)] = col[i];
        }
    }
    Ok(out)
}

/// Jacobian of the flow-kick map `Phi(.; tau, lambda)` at `x`, with all
/// stencil flows integrated as one batch so step-control noise cancels
/// between the perturbed trajectories. Falls back to the desingularized
/// field Jacobian relation at `tau = 0` is NOT done here; callers use
/// [`desing_jacobian_x`] for that.
pub fn flow_kick_jacobian<T: Scalar>(
    sys: &crate::dynamics::SystemDef<T>,
    x: &[T],
    p: &crate::dynamics::DisturbanceParams<T>,
    tol: T,
    cfg: &StencilConfig<T>,
) -> Result<Mat<T>> {
    if p.tau <= T::zero() {
        return Err(FkError::Invalid(
            "flow_kick_jacobian needs tau > 0; use desing_jacobian_x at tau = 0".into(),
        ));
    }
    let n = x.len();
    let mut stencil: Vec<Vec<T>> = Vec::with_capacity(2 * n);
    let mut steps: Vec<T> = Vec::with_capacity(n);
    for j in 0..n {
        let h = cfg.step_for(x[j]);
        steps.push(h);
        let mut xp = x.to_vec();
        xp[j] += h;
        let mut xm = x.to_vec();
        xm[j] -= h;
        stencil.push(xp);
        stencil.push(xm);
    }
    let images = crate::dynamics::flow_kick_batch(sys, &stencil, p, tol)
        .map_err(|e| e.at_stencil(to_f64_vec(x)))?;
    let mut jac = Mat::zeros(n, n);
    for j in 0..n {
        let two_h = c::<T>(2.0) * steps[j];
        let fp = &images[2 * j];
        let fm = &images[2 * j + 1];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / two_h;
        }
    }
    Ok(jac)
}

/// Jacobian of the desingularized residual at `(tau, x, lambda)`, batched the
/// same way. At `tau = 0` this is the Jacobian of `f + r` computed from plain
/// field evaluations.
pub fn desing_jacobian_x<T: Scalar>(
    sys: &crate::dynamics::SystemDef<T>,
    tau: T,
    x: &[T],
    lambda: T,
    tol: T,
    cfg: &StencilConfig<T>,
) -> Result<Mat<T>> {
    let n = x.len();
    let mut stencil: Vec<Vec<T>> = Vec::with_capacity(2 * n);
    let mut steps: Vec<T> = Vec::with_capacity(n);
    for j in 0..n {
        let h = cfg.step_for(x[j]);
        steps.push(h);
        let mut xp = x.to_vec();
        xp[j] += h;
        let mut xm = x.to_vec();
        xm[j] -= h;
        stencil.push(xp);
        stencil.push(xm);
    }
    let images = crate::dynamics::desingularized_residual_batch(sys, tau, &stencil, lambda, tol)
        .map_err(|e| e.at_stencil(to_f64_vec(x)))?;
    let mut jac = Mat::zeros(n, n);
    for j in 0..n {
        let two_h = c::<T>(2.0) * steps[j];
        let fp = &images[2 * j];
        let fm = &images[2 * j + 1];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / two_h;
        }
    }
    Ok(jac)
}

/// Second derivative of the flow-kick map in state directions `(i, j)` with
/// the whole stencil integrated as one batch. Second differences divide by
/// `h^2`, so uncorrelated per-point integration error would swamp the result;
/// the shared step sequence keeps it at the rounding floor.
pub fn flow_kick_second_deriv_xx<T: Scalar>(
    sys: &crate::dynamics::SystemDef<T>,
    x: &[T],
    p: &crate::dynamics::DisturbanceParams<T>,
    i: usize,
    j: usize,
    tol: T,
    cfg: &StencilConfig<T>,
) -> Result<Vec<T>> {
    let stencil = second_deriv_stencil(x, i, j, cfg);
    let images = crate::dynamics::flow_kick_batch(sys, &stencil.points, p, tol)
        .map_err(|e| e.at_stencil(to_f64_vec(x)))?;
    Ok(stencil.combine(&images))
}

/// Batched second derivative of the desingularized residual; exact field
/// evaluations at `tau = 0`.
#[allow(clippy::too_many_arguments)]
pub fn desing_second_deriv_xx<T: Scalar>(
    sys: &crate::dynamics::SystemDef<T>,
    tau: T,
    x: &[T],
    lambda: T,
    i: usize,
    j: usize,
    tol: T,
    cfg: &StencilConfig<T>,
) -> Result<Vec<T>> {
    let stencil = second_deriv_stencil(x, i, j, cfg);
    let images =
        crate::dynamics::desingularized_residual_batch(sys, tau, &stencil.points, lambda, tol)
            .map_err(|e| e.at_stencil(to_f64_vec(x)))?;
    Ok(stencil.combine(&images))
}

struct SecondDerivStencil<T> {
    points: Vec<Vec<T>>,
    weights: Vec<T>,
    scale: T,
}

impl<T: Scalar> SecondDerivStencil<T> {
    fn combine(&self, images: &[Vec<T>]) -> Vec<T> {
        let n = images[0].len();
        (0..n)
            .map(|k| {
                images
                    .iter()
                    .zip(&self.weights)
                    .fold(T::zero(), |acc, (img, &w)| acc + w * img[k])
                    / self.scale
            })
            .collect()
    }
}

fn second_deriv_stencil<T: Scalar>(
    x: &[T],
    i: usize,
    j: usize,
    cfg: &StencilConfig<T>,
) -> SecondDerivStencil<T> {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    let hi = cfg.step_for(x[i]);
    let hj = cfg.step_for(x[j]);
    if i == j {
        let mut xp = x.to_vec();
        xp[i] += hi;
        let mut xm = x.to_vec();
        xm[i] -= hi;
        SecondDerivStencil {
            points: vec![xp, x.to_vec(), xm],
            weights: vec![T::one(), -c::<T>(2.0), T::one()],
            scale: hi * hi,
        }
    } else {
        let mut pts = Vec::with_capacity(4);
        for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let mut pt = x.to_vec();
            pt[i] += c::<T>(si) * hi;
            pt[j] += c::<T>(sj) * hj;
            pts.push(pt);
        }
        SecondDerivStencil {
            points: pts,
            weights: vec![T::one(), -T::one(), -T::one(), T::one()],
            scale: c::<T>(4.0) * hi * hj,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{self, DisturbanceParams};
    use crate::models::{self, LogisticDisturbance};

    fn cfg() -> StencilConfig<f64> {
        StencilConfig::default()
    }

    #[test]
    fn identity_map_gives_identity_jacobian() {
        let jac = jacobian_x(|x: &[f64]| Ok(x.to_vec()), &[0.3, -1.2, 7.0], &cfg()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((jac[(i, j)] - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quadratic_map_jacobian() {
        let map = |x: &[f64]| Ok(vec![x[0] * x[0], x[1]]);
        let jac = jacobian_x(map, &[3.0, 1.0], &cfg()).unwrap();
        assert!((jac[(0, 0)] - 6.0).abs() < 1e-6);
        assert!(jac[(0, 1)].abs() < 1e-8);
        assert!(jac[(1, 0)].abs() < 1e-8);
        assert!((jac[(1, 1)] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn logistic_map_jacobian_matches_closed_form_and_is_contracting() {
        let entry = models::make_logistic::<f64>(LogisticDisturbance::ConstantRate);
        let p = DisturbanceParams::new(0.4, -0.24).unwrap();
        let fp = models::logistic_flow_kick_fixed_points(0.4, -0.24);
        let x_stable = fp[0];
        let jac = flow_kick_jacobian(&entry.system, &[x_stable], &p, 1e-10, &cfg()).unwrap();
        let mu = jac[(0, 0)];
        let oracle = models::logistic_flow_kick_derivative(x_stable, 0.4);
        assert!((mu - oracle).abs() < 1e-6, "mu {mu} vs oracle {oracle}");
        assert!(mu.abs() < 1.0);
    }

    #[test]
    fn second_derivative_scalar_square() {
        let map = |x: &[f64]| Ok(vec![x[0] * x[0]]);
        let d2 = second_deriv_xx(map, &[1.7], 0, 0, &cfg()).unwrap();
        assert!((d2[0] - 2.0).abs() < 1e-4);
    }

    #[test]
    fn second_derivative_of_linear_map_vanishes() {
        let map = |x: &[f64]| Ok(vec![2.0 * x[0] - x[1], 0.5 * x[1]]);
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let d2 = second_deriv_xx(map, &[0.4, -0.9], i, j, &cfg()).unwrap();
            assert!(d2.iter().all(|v| v.abs() < 1e-4), "({i},{j}): {d2:?}");
        }
    }

    #[test]
    fn second_derivative_symmetry_is_exact() {
        let map = |x: &[f64]| Ok(vec![(x[0] * x[1]).sin(), x[0] * x[0] * x[1]]);
        let d_ij = second_deriv_xx(map, &[0.7, 0.3], 0, 1, &cfg()).unwrap();
        let d_ji = second_deriv_xx(map, &[0.7, 0.3], 1, 0, &cfg()).unwrap();
        assert_eq!(d_ij, d_ji);
    }

    #[test]
    fn lambda_derivative_of_constant_rate_kick_is_tau() {
        let entry = models::make_logistic::<f64>(LogisticDisturbance::ConstantRate);
        let sys = entry.system.clone();
        let tau = 0.7;
        let family = move |x: &[f64], lambda: f64| {
            let p = DisturbanceParams::new(tau, lambda).unwrap();
            dynamics::flow_kick(&sys, x, &p, 1e-10)
        };
        let d = deriv_lambda(family, &[0.5], -0.1, &cfg()).unwrap();
        // flow does not depend on lambda, so the quotient is exactly tau
        assert!((d[0] - tau).abs() < 1e-8);
    }

    #[test]
    fn lambda_derivative_vanishes_when_rate_ignores_lambda() {
        let family = |x: &[f64], _lambda: f64| Ok(vec![x[0] * 2.0]);
        let d = deriv_lambda(family, &[0.5], 0.3, &cfg()).unwrap();
        assert_eq!(d[0], 0.0);
    }

    #[test]
    fn lambda_derivative_on_invariant_predator_axis_vanishes() {
        let entry = models::make_predator_prey::<f64>();
        let sys = entry.system.clone();
        let family = move |x: &[f64], lambda: f64| {
            let p = DisturbanceParams::new(1.0, lambda).unwrap();
            dynamics::flow_kick(&sys, x, &p, 1e-10)
        };
        let d = deriv_lambda(family, &[4.0, 0.0], 0.2, &cfg()).unwrap();
        assert!(d[0].abs() < 1e-12 && d[1].abs() < 1e-12);
    }

    #[test]
    fn mixed_partial_at_the_invariant_predator_axis() {
        // At (4, 0) the kick is -tau*lambda*y, so d2Phi_2/dy dlambda =
        // -tau * dphi_2/dy = -tau * e^{a tau}; nonzero and stable under
        // stencil refinement.
        let entry = models::make_predator_prey::<f64>();
        let sys = entry.system.clone();
        let tau = 1.0;
        let lambda = models::ansatz_tc_lambda(tau).unwrap();
        let family = {
            let sys = sys.clone();
            move |x: &[f64], l: f64| {
                dynamics::flow_kick(&sys, x, &DisturbanceParams::new(tau, l).unwrap(), 1e-10)
            }
        };
        let coarse = mixed_partial_x_lambda(&family, &[4.0, 0.0], lambda, &cfg()).unwrap();
        let fine_cfg = StencilConfig::new(1e-6, 1e-8);
        let fine = mixed_partial_x_lambda(&family, &[4.0, 0.0], lambda, &fine_cfg).unwrap();
        let a = models::predprey_transverse_rate::<f64>();
        let oracle = -tau * (a * tau).exp();
        assert!(coarse[(1, 1)].abs() > 1e-4);
        assert!((coarse[(1, 1)] - oracle).abs() < 1e-5, "{}", coarse[(1, 1)]);
        assert!((fine[(1, 1)] - coarse[(1, 1)]).abs() < 1e-5);
    }

    #[test]
    fn mixed_partial_of_bilinear_map() {
        let family = |x: &[f64], lambda: f64| Ok(vec![lambda * x[0]]);
        let m = mixed_partial_x_lambda(family, &[2.3], 0.7, &cfg()).unwrap();
        assert!((m[(0, 0)] - 1.0).abs() < 1e-6);

        let indep = |x: &[f64], _l: f64| Ok(vec![x[0] * x[0]]);
        let m0 = mixed_partial_x_lambda(indep, &[2.3], 0.7, &cfg()).unwrap();
        assert!(m0[(0, 0)].abs() < 1e-6);
    }

    #[test]
    fn jacobian_halving_h_converges_second_order() {
        let map = |x: &[f64]| Ok(vec![(x[0]).exp() + (2.0 * x[0]).sin()]);
        let x = [0.6];
        let exact = 0.6f64.exp() + 2.0 * (1.2f64).cos();
        let mut errs = Vec::new();
        for k in 0..3 {
            let h = 1e-2 / 2f64.powi(k);
            let cfg = StencilConfig::new(h, h * 1e-3);
            let jac = jacobian_x(map, &x, &cfg).unwrap();
            errs.push((jac[(0, 0)] - exact).abs());
        }
        // each halving should cut the error by roughly 4
        assert!(errs[1] < errs[0] / 2.5);
        assert!(errs[2] < errs[1] / 2.5);
    }

    #[test]
    fn batched_second_derivative_of_logistic_map_near_fold() {
        // closed form: Phi''(x) = -2 a e^tau / (1 + a x)^3 with a = e^tau - 1
        let entry = models::make_logistic::<f64>(LogisticDisturbance::ConstantRate);
        let (tau, lambda, x) = (0.4, -0.24916998656238954, 0.450_166_002_687_522_1);
        let p = DisturbanceParams::new(tau, lambda).unwrap();
        let d2 =
            flow_kick_second_deriv_xx(&entry.system, &[x], &p, 0, 0, 1e-10, &cfg()).unwrap();
        let a = tau.exp() - 1.0;
        let oracle = -2.0 * a * tau.exp() / (1.0 + a * x).powi(3);
        assert!((d2[0] - oracle).abs() < 1e-4, "{} vs {}", d2[0], oracle);
        assert!(d2[0].abs() > 1e-4);
    }

    #[test]
    fn desing_jacobian_at_zero_tau_matches_continuous_field() {
        let entry = models::make_logistic::<f64>(LogisticDisturbance::ConstantRate);
        let jac = desing_jacobian_x(&entry.system, 0.0, &[0.6], -0.24, 1e-10, &cfg()).unwrap();
        // d/dx [x(1-x) + lambda] = 1 - 2x
        assert!((jac[(0, 0)] - (1.0 - 1.2)).abs() < 1e-5);
    }

    #[test]
    fn stencil_failures_carry_the_offending_point() {
        let map = |x: &[f64]| {
            if x[0] > 1.0 {
                Err(crate::FkError::Invalid("outside".into()))
            } else {
                Ok(x.to_vec())
            }
        };
        let err = jacobian_x(map, &[1.0 - 1e-9], &cfg()).unwrap_err();
        assert!(matches!(err, crate::FkError::Stencil { .. }));
    }
}
