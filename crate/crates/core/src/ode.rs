//! Embedded Dormand-Prince 5(4) integrator with adaptive steps and dense
//! output. Explicit and non-stiff by design; the example systems are smooth
//! and mild.

use crate::error::{FkError, Result};
use crate::{c, Scalar};

// Classic DOPRI5 tableau.
const A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Stage times (unused directly: every system here is autonomous).
#[allow(dead_code)]
const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output weights for the 5th-order interpolant.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

pub struct IntegratorOpts<T> {
    pub atol: T,
    pub rtol: T,
    pub max_steps: usize,
    /// Abort with a divergence error once the state norm exceeds this bound.
    pub divergence_bound: T,
}

impl<T: Scalar> IntegratorOpts<T> {
    pub fn with_tol(tol: T) -> Self {
        IntegratorOpts {
            atol: tol,
            rtol: tol,
            max_steps: 100_000,
            divergence_bound: c(1e8),
        }
    }

    /// Relative-dominated control for stencil batches: trajectories passing
    /// within `h` of zero must still be resolved to relative accuracy or the
    /// differenced derivative loses most of its digits.
    pub fn for_stencil(tol: T) -> Self {
        IntegratorOpts {
            atol: tol * c(1e-4),
            rtol: tol,
            max_steps: 100_000,
            divergence_bound: c(1e8),
        }
    }
}

/// Result of one integration: the endpoint plus any requested interior
/// samples, in the order the sample times were given.
#[derive(Debug)]
pub struct Integration<T> {
    pub y_end: Vec<T>,
    pub samples: Vec<Vec<T>>,
}

/// Integrates `y' = rhs(y)` from `y0` over `[0, t_end]`, sampling the dense
/// interpolant at `sample_times` (must be sorted ascending, within range).
pub fn dopri5<T, F>(
    mut rhs: F,
    y0: &[T],
    t_end: T,
    opts: &IntegratorOpts<T>,
    sample_times: &[T],
) -> Result<Integration<T>>
where
    T: Scalar,
    F: FnMut(&[T], &mut [T]),
{
    let n = y0.len();
    if t_end < T::zero() {
        return Err(FkError::Invalid("flow time must be >= 0".into()));
    }
    if t_end == T::zero() {
        let samples = sample_times.iter().map(|_| y0.to_vec()).collect();
        return Ok(Integration {
            y_end: y0.to_vec(),
            samples,
        });
    }

    let mut t = T::zero();
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<T>> = vec![vec![T::zero(); n]; 7];
    rhs(&y, &mut k[0]);

    let mut h = initial_step(&y, &k[0], t_end, opts);
    let mut samples = vec![Vec::new(); sample_times.len()];
    let mut next_sample = 0usize;
    // Emit any samples sitting exactly at t = 0.
    while next_sample < sample_times.len() && sample_times[next_sample] <= T::zero() {
        samples[next_sample] = y.clone();
        next_sample += 1;
    }

    let safe = c::<T>(0.9);
    let fac_min = c::<T>(0.2);
    let fac_max = c::<T>(10.0);
    let expo = T::one() / c::<T>(5.0);
    let mut y_stage = vec![T::zero(); n];
    let mut steps = 0usize;

    loop {
        if steps >= opts.max_steps {
            return Err(FkError::MaxSteps {
                t: t.to_f64().unwrap_or(f64::NAN),
                max_steps: opts.max_steps,
            });
        }
        steps += 1;

        // Step underflow means the controller cannot make progress; a tiny
        // final step that merely lands on t_end is fine.
        if h <= T::epsilon() * (t.abs() + T::one()) && t + h < t_end {
            return Err(FkError::Stiffness {
                t: t.to_f64().unwrap_or(f64::NAN),
            });
        }
        let mut last = false;
        if t + h >= t_end {
            h = t_end - t;
            last = true;
        }

        // Stages 2..7 (k[0] holds f at the step start, FSAL).
        for s in 1..7 {
            for i in 0..n {
                let mut acc = T::zero();
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = c::<T>(A[s - 1][j]);
                    if a != T::zero() {
                        acc += a * kj[i];
                    }
                }
                y_stage[i] = y[i] + h * acc;
            }
            let (_, tail) = k.split_at_mut(s);
            rhs(&y_stage, &mut tail[0]);
        }
        // 5th-order solution is the 7th stage argument (b == A[5]).
        let y_new = y_stage.clone();

        // Embedded error estimate.
        let mut err = T::zero();
        for i in 0..n {
            let sk = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            let mut e = T::zero();
            for (j, kj) in k.iter().enumerate() {
                let ej = c::<T>(E[j]);
                if ej != T::zero() {
                    e += ej * kj[i];
                }
            }
            let scaled = h * e / sk;
            err += scaled * scaled;
        }
        err = (err / c::<T>(n as f64)).sqrt();

        if err <= T::one() {
            // Accepted step.
            let t_new = t + h;

            if next_sample < sample_times.len() {
                // Dense output coefficients for this interval.
                let mut cont: [Vec<T>; 5] = Default::default();
                let mut d_sum = vec![T::zero(); n];
                for i in 0..n {
                    let mut s = T::zero();
                    for (j, kj) in k.iter().enumerate() {
                        let dj = c::<T>(D[j]);
                        if dj != T::zero() {
                            s += dj * kj[i];
                        }
                    }
                    d_sum[i] = s;
                }
                let ydiff: Vec<T> = (0..n).map(|i| y_new[i] - y[i]).collect();
                let bspl: Vec<T> = (0..n).map(|i| h * k[0][i] - ydiff[i]).collect();
                cont[0] = y.clone();
                cont[1] = ydiff.clone();
                cont[2] = bspl.clone();
                cont[3] = (0..n).map(|i| ydiff[i] - h * k[6][i] - bspl[i]).collect();
                cont[4] = d_sum.iter().map(|&s| h * s).collect();

                while next_sample < sample_times.len() && sample_times[next_sample] <= t_new {
                    let ts = sample_times[next_sample];
                    let s = (ts - t) / h;
                    let s1 = T::one() - s;
                    let out: Vec<T> = (0..n)
                        .map(|i| {
                            cont[0][i]
                                + s * (cont[1][i]
                                    + s1 * (cont[2][i]
                                        + s * (cont[3][i] + s1 * cont[4][i])))
                        })
                        .collect();
                    samples[next_sample] = out;
                    next_sample += 1;
                }
            }

            t = t_new;
            k[0] = k[6].clone(); // FSAL
            y = y_new;

            let ynorm = crate::linalg::norm(&y);
            if !ynorm.is_finite() || ynorm > opts.divergence_bound {
                return Err(FkError::Divergence {
                    t: t.to_f64().unwrap_or(f64::NAN),
                    state: y.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
                    norm: ynorm.to_f64().unwrap_or(f64::INFINITY),
                });
            }

            if last {
                return Ok(Integration { y_end: y, samples });
            }
            let fac = (safe / err.powf(expo)).min(fac_max).max(fac_min);
            h *= fac;
        } else {
            // Rejected: shrink and retry.
            if !err.is_finite() {
                let ynorm = crate::linalg::norm(&y_stage);
                if !ynorm.is_finite() || ynorm > opts.divergence_bound {
                    return Err(FkError::Divergence {
                        t: t.to_f64().unwrap_or(f64::NAN),
                        state: y.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
                        norm: ynorm.to_f64().unwrap_or(f64::INFINITY),
                    });
                }
                h *= fac_min;
            } else {
                let fac = (safe / err.powf(expo)).max(fac_min);
                h *= fac;
            }
        }
    }
}

/// Step-size guess from the scale of the initial derivative.
fn initial_step<T: Scalar>(y0: &[T], f0: &[T], t_end: T, opts: &IntegratorOpts<T>) -> T {
    let mut d0 = T::zero();
    let mut d1 = T::zero();
    for i in 0..y0.len() {
        let sk = opts.atol + opts.rtol * y0[i].abs();
        let a = y0[i] / sk;
        let b = f0[i] / sk;
        d0 += a * a;
        d1 += b * b;
    }
    d0 = (d0 / c::<T>(y0.len() as f64)).sqrt();
    d1 = (d1 / c::<T>(y0.len() as f64)).sqrt();
    let h0 = if d0 < c(1e-5) || d1 < c(1e-5) {
        c::<T>(1e-6)
    } else {
        c::<T>(0.01) * (d0 / d1)
    };
    h0.min(t_end)
}
