//! Built-in example systems with analytic oracles.
//!
//! Three models: the harvested logistic population, a nonspatial
//! vegetation-water model with precipitation delivered as kicks, and a
//! predator-prey system with proportional predator harvesting. Each entry
//! carries closed forms used as independent oracles in tests, plus annotated
//! reference constants.

use std::sync::Arc;

use crate::dynamics::{DisturbanceParams, DomainBox, SystemDef};
use crate::error::{FkError, Result};
use crate::{c, Scalar};

/// How a reference value in the catalog was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueSource {
    /// Exact closed form evaluated here.
    Analytic,
    /// Constant reported in the literature at limited precision.
    Reported,
}

/// A named reference constant with its tolerance and provenance.
#[derive(Debug, Clone)]
pub struct KnownValue<T> {
    pub key: &'static str,
    pub value: T,
    pub tol: T,
    pub source: ValueSource,
}

/// Map from the disturbance parameter to the continuous-system equilibria.
pub type EquilibriaOracle<T> = Arc<dyn Fn(T) -> Vec<Vec<T>> + Send + Sync>;

/// A catalog entry: the system plus printable equations, reference values,
/// and an equilibria oracle used to seed grids and tests.
#[derive(Clone)]
pub struct ModelCatalogEntry<T> {
    pub name: &'static str,
    pub description: &'static str,
    /// Builder parameters baked into this instance, e.g. `m` for the
    /// vegetation model.
    pub params: Vec<(&'static str, T)>,
    pub system: SystemDef<T>,
    /// Human-readable equations (flow lines then kick-rate lines).
    pub equations: Vec<&'static str>,
    pub known_values: Vec<KnownValue<T>>,
    pub continuous_equilibria: Option<EquilibriaOracle<T>>,
    /// True for variants added here for testing rather than taken from the
    /// source models.
    pub non_reference_variant: bool,
}

impl<T> std::fmt::Debug for ModelCatalogEntry<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelCatalogEntry")
            .field("name", &self.name)
            .finish()
    }
}

/// Disturbance mode for the logistic model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogisticDisturbance {
    /// Constant-rate harvest: `r(x; lambda) = lambda`.
    ConstantRate,
    /// Proportional harvest: `r(x; lambda) = -lambda * x`. Keeps `x = 0`
    /// invariant, which is what transcritical continuation needs.
    ProportionalRate,
}

/// Closed-form logistic flow `x e^t / (1 + x (e^t - 1))`.
pub fn logistic_flow<T: Scalar>(x: T, t: T) -> T {
    let et = t.exp();
    x * et / (T::one() + x * (et - T::one()))
}

/// Equilibria of `x(1 - x) + lambda = 0`, i.e. `(1 +- sqrt(1 + 4 lambda)) / 2`.
pub fn logistic_continuous_equilibria<T: Scalar>(lambda: T) -> Vec<T> {
    let disc = T::one() + c::<T>(4.0) * lambda;
    if disc < T::zero() {
        return Vec::new();
    }
    let s = disc.sqrt();
    let half = c::<T>(0.5);
    vec![(T::one() + s) * half, (T::one() - s) * half]
}

/// Closed-form fixed points of the constant-rate logistic flow-kick map,
/// from `x^2 - x (1 + tau lambda) - tau lambda / (e^tau - 1) = 0`.
pub fn logistic_flow_kick_fixed_points<T: Scalar>(tau: T, lambda: T) -> Vec<T> {
    let a = tau.exp() - T::one();
    let b = T::one() + tau * lambda;
    let q = -tau * lambda / a;
    let disc = b * b - c::<T>(4.0) * q;
    if disc < T::zero() {
        return Vec::new();
    }
    let s = disc.sqrt();
    let half = c::<T>(0.5);
    vec![(b + s) * half, (b - s) * half]
}

/// Derivative of the constant-rate logistic flow-kick map,
/// `e^tau / (1 + (e^tau - 1) x)^2`.
pub fn logistic_flow_kick_derivative<T: Scalar>(x: T, tau: T) -> T {
    let et = tau.exp();
    let den = T::one() + (et - T::one()) * x;
    et / (den * den)
}

/// Logistic growth `x' = x(1 - x)` under the chosen disturbance mode.
pub fn make_logistic<T: Scalar>(mode: LogisticDisturbance) -> ModelCatalogEntry<T> {
    let f = Arc::new(|x: &[T], out: &mut [T]| {
        out[0] = x[0] * (T::one() - x[0]);
    });
    let (r, r_eq, name): (crate::dynamics::RateFn<T>, _, _) = match mode {
        LogisticDisturbance::ConstantRate => (
            Arc::new(|_x: &[T], lambda: T, out: &mut [T]| {
                out[0] = lambda;
            }),
            "r_x = lambda",
            "logistic",
        ),
        LogisticDisturbance::ProportionalRate => (
            Arc::new(|x: &[T], lambda: T, out: &mut [T]| {
                out[0] = -lambda * x[0];
            }),
            "r_x = -lambda * x",
            "logistic-prop",
        ),
    };
    let system = SystemDef::new(1, f, r)
        .with_name(name)
        .with_state_names(vec!["x".into()])
        .with_domain(DomainBox::new(vec![T::zero()], vec![T::infinity()]))
        .with_analytic_flow(Arc::new(|x: &[T], t: T| vec![logistic_flow(x[0], t)]));

    let (known_values, continuous_equilibria): (Vec<KnownValue<T>>, EquilibriaOracle<T>) =
        match mode {
            LogisticDisturbance::ConstantRate => (
                vec![
                    KnownValue {
                        key: "sn_lambda_continuous",
                        value: c(-0.25),
                        tol: c(1e-12),
                        source: ValueSource::Analytic,
                    },
                    KnownValue {
                        key: "sn_x_continuous",
                        value: c(0.5),
                        tol: c(1e-12),
                        source: ValueSource::Analytic,
                    },
                    KnownValue {
                        key: "fold_tau_at_lambda_-0.24",
                        value: c(1.4),
                        tol: c(0.1),
                        source: ValueSource::Reported,
                    },
                ],
                Arc::new(|lambda: T| {
                    logistic_continuous_equilibria(lambda)
                        .into_iter()
                        .map(|x| vec![x])
                        .collect()
                }),
            ),
            LogisticDisturbance::ProportionalRate => (
                vec![KnownValue {
                    key: "tc_lambda_continuous",
                    value: T::one(),
                    tol: c(1e-12),
                    source: ValueSource::Analytic,
                }],
                Arc::new(|lambda: T| vec![vec![T::zero()], vec![T::one() - lambda]]),
            ),
        };

    ModelCatalogEntry {
        name,
        description: "logistic growth with harvest disturbance",
        params: Vec::new(),
        system,
        equations: vec!["x' = x * (1 - x)", r_eq],
        known_values,
        continuous_equilibria: Some(continuous_equilibria),
        non_reference_variant: matches!(mode, LogisticDisturbance::ProportionalRate),
    }
}

/// Barren equilibrium `(0, lambda)` of the continuous vegetation model.
pub fn klausmeier_barren_equilibrium<T: Scalar>(lambda: T) -> Vec<T> {
    vec![T::zero(), lambda]
}

/// Barren flow-kick fixed point `(0, tau lambda / (1 - e^{-tau}))`.
pub fn klausmeier_barren_fixed_point<T: Scalar>(p: &DisturbanceParams<T>) -> Result<Vec<T>> {
    if p.tau <= T::zero() {
        return Err(FkError::Invalid("barren fixed point needs tau > 0".into()));
    }
    let den = T::one() - (-p.tau).exp();
    Ok(vec![T::zero(), p.tau * p.lambda / den])
}

/// Vegetated equilibria `((lambda +- s)/(2m), (lambda -+ s)/2)` with
/// `s = sqrt(lambda^2 - 4 m^2)`; `None` below the fold `lambda = 2m`.
pub fn klausmeier_vegetated_equilibria<T: Scalar>(m: T, lambda: T) -> Option<(Vec<T>, Vec<T>)> {
    let disc = lambda * lambda - c::<T>(4.0) * m * m;
    if disc < T::zero() {
        return None;
    }
    let s = disc.sqrt();
    let two = c::<T>(2.0);
    let hi = vec![(lambda + s) / (two * m), (lambda - s) / two];
    let lo = vec![(lambda - s) / (two * m), (lambda + s) / two];
    Some((hi, lo))
}

/// Nonspatial vegetation-water model. The flow is rain-free; precipitation
/// arrives as the kick `tau * (0, lambda)`.
pub fn make_klausmeier<T: Scalar>(m: T) -> ModelCatalogEntry<T> {
    let f = Arc::new(move |x: &[T], out: &mut [T]| {
        out[0] = x[1] * x[0] * x[0] - m * x[0];
        out[1] = -x[1] * x[0] * x[0] - x[1];
    });
    let r: crate::dynamics::RateFn<T> = Arc::new(|_x: &[T], lambda: T, out: &mut [T]| {
        out[0] = T::zero();
        out[1] = lambda;
    });
    let system = SystemDef::new(2, f, r)
        .with_name("klausmeier")
        .with_state_names(vec!["x1".into(), "x2".into()])
        .with_domain(DomainBox::new(
            vec![T::zero(), T::zero()],
            vec![T::infinity(), T::infinity()],
        ));

    let m_capture = m;
    ModelCatalogEntry {
        name: "klausmeier",
        description: "nonspatial vegetation-water dynamics with precipitation kicks",
        params: vec![("m", m)],
        system,
        equations: vec![
            "x1' = x2 * x1^2 - m * x1",
            "x2' = -x2 * x1^2 - x2",
            "r_x1 = 0",
            "r_x2 = lambda",
        ],
        known_values: vec![KnownValue {
            key: "sn_lambda_continuous",
            value: c::<T>(2.0) * m,
            tol: c(1e-12),
            source: ValueSource::Analytic,
        }],
        continuous_equilibria: Some(Arc::new(move |lambda: T| {
            let mut eqs = vec![klausmeier_barren_equilibrium(lambda)];
            if let Some((hi, lo)) = klausmeier_vegetated_equilibria(m_capture, lambda) {
                eqs.push(hi);
                eqs.push(lo);
            }
            eqs
        })),
        non_reference_variant: false,
    }
}

/// Growth rate of small predator populations at the prey-only point `(4, 0)`:
/// `a = 1/2 - e^{-2}`. Also the harvesting rate of the continuous
/// transcritical bifurcation there.
pub fn predprey_transverse_rate<T: Scalar>() -> T {
    c::<T>(0.5) - (-c::<T>(2.0)).exp()
}

/// Harvest rate that makes `(4, 0)` nonhyperbolic for the flow-kick map:
/// solves `lambda tau = 1 - e^{-a tau}` for the given `tau`.
pub fn ansatz_tc_lambda<T: Scalar>(tau: T) -> Result<T> {
    if tau <= T::zero() {
        return Err(FkError::Invalid("ansatz curve needs tau > 0".into()));
    }
    let a = predprey_transverse_rate::<T>();
    // exp_m1 keeps the small-tau limit accurate
    Ok(-(-a * tau).exp_m1() / tau)
}

/// Predator-prey dynamics with saturating predation and proportional
/// predator harvest kicks `tau * (0, -lambda y)`.
pub fn make_predator_prey<T: Scalar>() -> ModelCatalogEntry<T> {
    let f = Arc::new(|x: &[T], out: &mut [T]| {
        let half = c::<T>(0.5);
        out[0] = x[0] * (T::one() - x[0] / c::<T>(4.0))
            - half * x[1] * (T::one() - (-c::<T>(1.5) * x[0]).exp());
        out[1] = -half * x[1] + x[1] * (T::one() - (-half * x[0]).exp());
    });
    let r: crate::dynamics::RateFn<T> = Arc::new(|x: &[T], lambda: T, out: &mut [T]| {
        out[0] = T::zero();
        out[1] = -lambda * x[1];
    });
    let system = SystemDef::new(2, f, r)
        .with_name("predprey")
        .with_state_names(vec!["x".into(), "y".into()])
        .with_domain(DomainBox::new(
            vec![T::zero(), T::zero()],
            vec![T::infinity(), T::infinity()],
        ));

    ModelCatalogEntry {
        name: "predprey",
        description: "predator-prey dynamics with proportional predator harvest kicks",
        params: Vec::new(),
        system,
        equations: vec![
            "x' = x * (1 - x / 4) - 0.5 * y * (1 - exp(-1.5 * x))",
            "y' = -0.5 * y + y * (1 - exp(-0.5 * x))",
            "r_x = 0",
            "r_y = -lambda * y",
        ],
        known_values: vec![
            KnownValue {
                key: "hopf_lambda",
                value: c(0.089),
                tol: c(0.005),
                source: ValueSource::Reported,
            },
            KnownValue {
                key: "tc_lambda",
                value: c(0.365),
                tol: c(0.005),
                source: ValueSource::Reported,
            },
            KnownValue {
                key: "tc_lambda_analytic",
                value: predprey_transverse_rate(),
                tol: c(1e-12),
                source: ValueSource::Analytic,
            },
        ],
        continuous_equilibria: Some(Arc::new(|lambda: T| {
            let mut eqs = vec![vec![T::zero(), T::zero()], vec![c(4.0), T::zero()]];
            if let Some(coex) = predprey_coexistence_equilibrium(lambda) {
                eqs.push(coex);
            }
            eqs
        })),
        non_reference_variant: false,
    }
}

/// Interior equilibrium of the continuously harvested predator-prey system,
/// from `e^{-x/2} = 1/2 - lambda`.
pub fn predprey_coexistence_equilibrium<T: Scalar>(lambda: T) -> Option<Vec<T>> {
    let half = c::<T>(0.5);
    let arg = half - lambda;
    if arg <= T::zero() || arg >= T::one() {
        return None;
    }
    let x = -c::<T>(2.0) * arg.ln();
    let denom = half * (T::one() - (-c::<T>(1.5) * x).exp());
    if denom == T::zero() {
        return None;
    }
    let y = x * (T::one() - x / c::<T>(4.0)) / denom;
    Some(vec![x, y])
}

/// All built-in models at their reference parameters.
pub fn catalog<T: Scalar>() -> Vec<ModelCatalogEntry<T>> {
    vec![
        make_logistic(LogisticDisturbance::ConstantRate),
        make_logistic(LogisticDisturbance::ProportionalRate),
        make_klausmeier(c(0.75)),
        make_predator_prey(),
    ]
}

/// Looks a model up by catalog name; `m` overrides the vegetation-model
/// mortality when given.
pub fn by_name<T: Scalar>(name: &str, m: Option<T>) -> Result<ModelCatalogEntry<T>> {
    match name {
        "logistic" => Ok(make_logistic(LogisticDisturbance::ConstantRate)),
        "logistic-prop" => Ok(make_logistic(LogisticDisturbance::ProportionalRate)),
        "klausmeier" => Ok(make_klausmeier(m.unwrap_or_else(|| c(0.75)))),
        "predprey" => Ok(make_predator_prey()),
        other => Err(FkError::Invalid(format!(
            "unknown model '{other}'; available: logistic, logistic-prop, klausmeier, predprey"
        ))),
    }
}
