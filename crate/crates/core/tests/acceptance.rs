//! Acceptance suite: one test per claim the library is expected to
//! reproduce, each printing a pass line with the measured values.
//!
//! Expected values come from independent oracles computed inside this file
//! (closed forms, bisection scans) or from reference constants carried by
//! the model catalog, never from the code path under test.

#![allow(clippy::type_complexity)]

use flowkick_core::continuation::{
    self, BifurcationType, CurveTermination, CurveWindow, FreeParam, SecondAxis, StepControl,
};
use flowkick_core::dynamics::{self, DisturbanceParams};
use flowkick_core::equilibria::{
    self, eigenvalues, newton_fixed_point, FixedPointKind, Stability,
};
use flowkick_core::linalg::{dist, norm};
use flowkick_core::models::{self, LogisticDisturbance};
use flowkick_core::numdiff::{desing_jacobian_x, StencilConfig};

const TOL: f64 = 1e-10;

fn step() -> StepControl<f64> {
    StepControl::default()
}

/// Deterministic uniform draws for multi-start tests.
struct Lcg(u64);

impl Lcg {
    fn next_f64(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Bisection on a scalar function with a sign-changing bracket.
fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let mut flo = f(lo);
    assert!(
        flo * f(hi) < 0.0,
        "oracle bracket [{lo}, {hi}] does not change sign"
    );
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if flo * fm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// 1. logistic fixed points at the two marked disturbance patterns
// ---------------------------------------------------------------------------

#[test]
fn c01_logistic_fixed_points() {
    let entry = models::make_logistic::<f64>(LogisticDisturbance::ConstantRate);
    let sys = &entry.system;

    // Independent bisection oracle on the closed-form fixed-point equation
    // phi_tau(x) + tau*lambda - x = 0.
    let (tau, lambda) = (0.4, -0.24);
    let psi = |x: f64| models::logistic_flow(x, tau) + tau * lambda - x;
    let root_lo = bisect(psi, 0.30, 0.45, 80);
    let root_hi = bisect(psi, 0.45, 0.70, 80);

    // Multi-start Newton.
    let p = DisturbanceParams::new(tau, lambda).unwrap();
    let mut rng = Lcg(20240801);
    let mut found: Vec<equilibria::FixedPointRecord<f64>> = Vec::new();
    for _ in 0..20 {
        let guess = rng.range(0.0, 1.5);
        if let Ok(rec) = newton_fixed_point(sys, &p, &[guess], 1e-11, 40) {
            if rec.x[0] > 0.0
                && rec.x[0] < 1.5
                && found.iter().all(|f| (f.x[0] - rec.x[0]).abs() > 1e-6)
            {
                found.push(rec);
            }
        }
    }
    found.sort_by(|a, b| a.x[0].partial_cmp(&b.x[0]).unwrap());
    assert_eq!(found.len(), 2, "expected exactly two fixed points in (0, 1.5)");
    assert!((found[0].x[0] - root_lo).abs() < 1e-6);
    assert!((found[1].x[0] - root_hi).abs() < 1e-6);
    assert!(found[1].x[0] > 0.5 && found[1].x[0] < 0.7, "stable near 0.6");
    assert!(found[0].x[0] > 0.3 && found[0].x[0] < 0.5, "unstable near 0.4");
    assert_eq!(found[1].stability, Stability::Stable);
    assert_eq!(found[0].stability, Stability::Unstable);

    // tau = 2.5, kappa = -0.6: both fixed points destroyed.
    let p2 = DisturbanceParams::from_kick(2.5, -0.6).unwrap();
    let mut rng = Lcg(20240802);
    let mut found2 = 0usize;
    for _ in 0..20 {
        let guess = rng.range(0.0, 1.5);
        if let Ok(rec) = newton_fixed_point(sys, &p2, &[guess], 1e-11, 40) {
            if sys.in_domain(&rec.x) {
                found2 += 1;
            }
        }
    }
    assert_eq!(found2, 0, "no fixed points survive at (2.5, -0.6)");

    println!(
        "acceptance c01 logistic fixed points: pass (stable {:.8}, unstable {:.8}, none at tau=2.5)",
        found[1].x[0], found[0].x[0]
    );
}

// ---------------------------------------------------------------------------
// 2. logistic saddle-node curve reaches the continuous fold at tau -> 0
// ---------------------------------------------------------------------------

#[test]
fn c02_logistic_sn_curve_tau_zero_endpoint() {
    let entry = models::make_logistic::<f64>(LogisticDisturbance::ConstantRate);
    let sys = &entry.system;
    let st = step();

    // Seed event: SN on a lambda sweep at small tau.
    let p = DisturbanceParams::new(0.2, -0.2).unwrap();
    let seed_fp = newton_fixed_point(sys, &p, &[0.7], 1e-11, 40).unwrap();
    let branch =
        continuation::continue_branch(sys, &seed_fp, FreeParam::Lambda, (-0.3, 0.0), &st).unwrap();
    let sn = branch
        .events
        .iter()
        .find(|e| e.btype == BifurcationType::SaddleNode)
        .expect("SN event on the small-tau sweep");

    let window = CurveWindow {
        tau: (0.0, 3.0),
        lambda: (-0.3, 0.0),
    };
    let curve = continuation::continue_sn_curve(sys, sn, &window, &st).unwrap();
    assert_eq!(curve.termination_backward, CurveTermination::TauZero);
    let endpoint = curve.points.first().unwrap();
    assert!(endpoint.tau <= 1e-12);
    assert!(
        (endpoint.lambda + 0.25).abs() < 1e-3,
        "lambda endpoint {}",
        endpoint.lambda
    );
    assert!(
        (endpoint.x[0] - 0.5).abs() < 1e-3,
        "x endpoint {}",
        endpoint.x[0]
    );
    println!(
        "acceptance c02 SN curve tau->0 endpoint: pass (lambda {:.8}, x {:.8})",
        endpoint.lambda, endpoint.x[0]
    );
}

// ---------------------------------------------------------------------------
// 3. logistic branch over tau folds near 1.4, matching a dense-scan oracle
// ---------------------------------------------------------------------------

#[test]
fn c03_logistic_fold_in_tau() {
    let entry = models::make_logistic::<f64>(LogisticDisturbance::ConstantRate);
    let sys = &entry.system;
    let lambda = -0.24;

    // Oracle: fixed points exist while the closed-form discriminant
    // (1 + tau*lambda)^2 + 4 tau lambda / (e^tau - 1) is positive; the fold
    // is its root. Dense scan brackets it, bisection refines.
    let disc = |t: f64| (1.0 + t * lambda).powi(2) + 4.0 * t * lambda / (t.exp() - 1.0);
    let mut bracket = None;
    let scan: Vec<f64> = (1..=300).map(|i| i as f64 * 0.01).collect();
    for w in scan.windows(2) {
        if disc(w[0]) * disc(w[1]) < 0.0 {
            bracket = Some((w[0], w[1]));
            break;
        }
    }
    let (blo, bhi) = bracket.expect("oracle bracket");
    let tau_oracle = bisect(disc, blo, bhi, 80);

    let p0 = DisturbanceParams::new(0.0, lambda).unwrap();
    let seed = newton_fixed_point(sys, &p0, &[0.7], 1e-11, 40).unwrap();
    let branch =
        continuation::continue_branch(sys, &seed, FreeParam::Tau, (0.0, 3.0), &step()).unwrap();
    let sn = branch
        .events
        .iter()
        .find(|e| e.btype == BifurcationType::SaddleNode)
        .expect("fold event");
    assert!((sn.tau - 1.4).abs() <= 0.1, "fold at tau {}", sn.tau);
    assert!(
        (sn.tau - tau_oracle).abs() < 1e-4,
        "fold {} vs oracle {}",
        sn.tau,
        tau_oracle
    );
    println!(
        "acceptance c03 logistic fold in tau: pass (tau {:.6} vs oracle {:.6})",
        sn.tau, tau_oracle
    );
}

// ---------------------------------------------------------------------------
// 4. vegetation-water model: continuous SN, closed forms, rising SN curve
// ---------------------------------------------------------------------------

#[test]
fn c04_klausmeier() {
    let m = 0.75;
    let entry = models::make_klausmeier(m);
    let sys = &entry.system;
    let st = step();

    // Continuous SN at lambda = 2m.
    let (hi, _) = models::klausmeier_vegetated_equilibria(m, 2.0).unwrap();
    let p0 = DisturbanceParams::new(0.0, 2.0).unwrap();
    let seed = newton_fixed_point(sys, &p0, &hi, 1e-11, 60).unwrap();
    let branch =
        continuation::continue_branch(sys, &seed, FreeParam::Lambda, (1.2, 2.5), &st).unwrap();
    let sn = branch
        .events
        .iter()
        .find(|e| e.btype == BifurcationType::SaddleNode)
        .expect("continuous SN");
    assert!(
        (sn.lambda - 1.5).abs() < 1e-6,
        "SN lambda {} vs 2m = 1.5",
        sn.lambda
    );

    // Vegetated equilibria match the closed form.
    let mut worst_veg = 0.0f64;
    for lambda in [1.6, 2.0, 2.4] {
        let (hi_eq, lo_eq) = models::klausmeier_vegetated_equilibria(m, lambda).unwrap();
        let p = DisturbanceParams::new(0.0, lambda).unwrap();
        for oracle in [hi_eq, lo_eq] {
            let guess: Vec<f64> = oracle.iter().map(|v| v + 1e-3).collect();
            let rec = newton_fixed_point(sys, &p, &guess, 1e-12, 60).unwrap();
            worst_veg = worst_veg.max(dynamics::max_abs_diff(&rec.x, &oracle));
        }
    }
    assert!(worst_veg < 1e-8, "vegetated equilibria worst {worst_veg}");

    // Barren flow-kick fixed point matches tau*lambda / (1 - e^{-tau}).
    let mut rng = Lcg(20240804);
    let mut worst_barren = 0.0f64;
    for _ in 0..20 {
        let p = DisturbanceParams::new(rng.range(0.1, 2.5), rng.range(0.5, 3.0)).unwrap();
        let oracle = models::klausmeier_barren_fixed_point(&p).unwrap();
        let rec = newton_fixed_point(sys, &p, &[0.0, p.lambda], 1e-12, 60).unwrap();
        worst_barren = worst_barren.max(dynamics::max_abs_diff(&rec.x, &oracle));
    }
    assert!(worst_barren < 1e-8, "barren worst {worst_barren}");

    // SN curve from (0, 1.5): lambda strictly increasing over tau in
    // [0.05, 2].
    let window = CurveWindow {
        tau: (0.0, 2.2),
        lambda: (1.2, 6.0),
    };
    let curve = continuation::continue_sn_curve(sys, sn, &window, &st).unwrap();
    let mut pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| p.tau >= 0.05 && p.tau <= 2.0)
        .map(|p| (p.tau, p.lambda))
        .collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    assert!(pts.len() >= 8, "curve too sparse: {} points", pts.len());
    for w in pts.windows(2) {
        assert!(
            w[1].1 > w[0].1,
            "lambda_SN not strictly increasing: {:?} -> {:?}",
            w[0],
            w[1]
        );
    }
    println!(
        "acceptance c04 klausmeier: pass (SN lambda {:.9}, worst veg {:.1e}, worst barren {:.1e}, {} rising curve points)",
        sn.lambda, worst_veg, worst_barren, pts.len()
    );
}

// ---------------------------------------------------------------------------
// 5. predator-prey: Hopf, TC, NS curve endpoint, ansatz, predator crash
// ---------------------------------------------------------------------------

#[test]
fn c05_predator_prey() {
    let entry = models::make_predator_prey::<f64>();
    let sys = &entry.system;
    let st = step();
    let cfg = StencilConfig::default();

    // Hopf on the continuous coexistence branch.
    let p0 = DisturbanceParams::new(0.0, 0.2).unwrap();
    let guess = models::predprey_coexistence_equilibrium(0.2f64).unwrap();
    let seed = newton_fixed_point(sys, &p0, &guess, 1e-11, 60).unwrap();
    let branch =
        continuation::continue_branch(sys, &seed, FreeParam::Lambda, (0.02, 0.35), &st).unwrap();
    let hopf = branch
        .events
        .iter()
        .find(|e| e.btype == BifurcationType::Hopf)
        .expect("Hopf event");
    assert!(
        (hopf.lambda - 0.089).abs() < 0.005,
        "Hopf lambda {}",
        hopf.lambda
    );

    // Continuous transcritical at (4, 0): the transverse eigenvalue of
    // D[f + r] crosses zero.
    let transverse_rate = |lambda: f64| {
        let jac = desing_jacobian_x(sys, 0.0, &[4.0, 0.0], lambda, TOL, &cfg).unwrap();
        jac[(1, 1)]
    };
    let tc_lambda = bisect(transverse_rate, 0.2, 0.5, 80);
    assert!((tc_lambda - 0.365).abs() < 0.005, "TC lambda {tc_lambda}");

    // NS curve seeded from a small-tau sweep; tau -> 0 endpoint near Hopf.
    let p_small = DisturbanceParams::new(0.05, 0.2).unwrap();
    let seed_small = newton_fixed_point(sys, &p_small, &guess, 1e-11, 60).unwrap();
    let sweep =
        continuation::continue_branch(sys, &seed_small, FreeParam::Lambda, (0.02, 0.35), &st)
            .unwrap();
    let ns = sweep
        .events
        .iter()
        .find(|e| e.btype == BifurcationType::NeimarkSacker)
        .expect("NS event at tau = 0.05");
    let window = CurveWindow {
        tau: (0.0, 1.1),
        lambda: (0.0, 0.4),
    };
    let curve = continuation::continue_ns_curve(sys, ns, &window, &st).unwrap();
    assert_eq!(curve.termination_backward, CurveTermination::TauZero);
    let endpoint = curve.points.first().unwrap();
    assert!(
        (endpoint.lambda - hopf.lambda).abs() < 0.005,
        "NS endpoint {} vs Hopf {}",
        endpoint.lambda,
        hopf.lambda
    );
    let tau_max = curve.points.iter().map(|p| p.tau).fold(0.0, f64::max);
    assert!(tau_max >= 1.0, "NS curve should extend to tau = 1, got {tau_max}");

    // Transcritical curve at (4, 0) matches the closed-form condition.
    let tc = continuation::tc_curve_at_invariant(
        sys,
        &[4.0, 0.0],
        &[0],
        (0.5, 2.0),
        4,
        (0.05, 0.6),
        &st,
    )
    .unwrap();
    let mut worst_tc = 0.0f64;
    for target in [0.5, 1.0, 2.0] {
        let pt = tc
            .points
            .iter()
            .find(|p| (p.tau - target).abs() < 1e-9)
            .unwrap_or_else(|| panic!("tc sample at tau = {target}"));
        let oracle = models::ansatz_tc_lambda(pt.tau).unwrap();
        worst_tc = worst_tc.max((pt.lambda - oracle).abs());
    }
    assert!(worst_tc < 1e-6, "tc curve vs condition worst {worst_tc}");

    // Longer flow times flip the prediction to predator crash.
    let p_g = DisturbanceParams::new(4.0, 0.2).unwrap();
    let orbit = dynamics::iterate_orbit(sys, &[2.0, 1.0], &p_g, 500, TOL).unwrap();
    let crash = orbit
        .cycles
        .iter()
        .find(|cyc| cyc.post_kick[1].abs() < 1e-3);
    assert!(crash.is_some(), "predators should crash within 500 cycles");

    println!(
        "acceptance c05 predator-prey: pass (Hopf {:.6}, TC {:.6}, NS endpoint {:.6}, ansatz worst {:.1e}, crash at cycle {})",
        hopf.lambda,
        tc_lambda,
        endpoint.lambda,
        worst_tc,
        crash.unwrap().cycle
    );
}

// ---------------------------------------------------------------------------
// 6. continuous limit: first-order convergence of the residual
// ---------------------------------------------------------------------------

#[test]
fn c06_continuous_limit_order() {
    let cases: Vec<(&str, dynamics::SystemDef<f64>, f64, Vec<(f64, f64)>)> = vec![
        (
            "logistic",
            models::make_logistic(LogisticDisturbance::ConstantRate).system,
            -0.24,
            vec![(0.1, 1.4)],
        ),
        (
            "klausmeier",
            models::make_klausmeier(0.75).system,
            2.0,
            // moderate states: the vegetation term x2 x1^2 leaves the
            // asymptotic-in-tau regime quickly for large biomass
            vec![(0.2, 1.2), (0.2, 1.2)],
        ),
        (
            "predprey",
            models::make_predator_prey().system,
            0.2,
            vec![(0.5, 3.0), (0.4, 2.0)],
        ),
    ];
    let taus = [0.1, 0.05, 0.025, 0.0125];
    let mut rng = Lcg(20240806);
    let mut worst_order = f64::INFINITY;
    for (name, sys, lambda, boxes) in &cases {
        for trial in 0..5 {
            let x: Vec<f64> = boxes.iter().map(|&(lo, hi)| rng.range(lo, hi)).collect();
            let g0 = sys.eval_continuous(&x, *lambda);
            let errs: Vec<f64> = taus
                .iter()
                .map(|&tau| {
                    let g = dynamics::desingularized_residual(sys, tau, &x, *lambda, TOL).unwrap();
                    let diff: Vec<f64> = g.iter().zip(&g0).map(|(a, b)| a - b).collect();
                    norm(&diff)
                })
                .collect();
            if errs[0] < 1e-10 {
                // residual already flat in tau at this state; order undefined
                continue;
            }
            // least-squares slope of log(err) against log(tau)
            let lx: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
            let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
            let mx = lx.iter().sum::<f64>() / 4.0;
            let my = ly.iter().sum::<f64>() / 4.0;
            let slope = lx
                .iter()
                .zip(&ly)
                .map(|(x, y)| (x - mx) * (y - my))
                .sum::<f64>()
                / lx.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
            assert!(
                slope >= 0.9,
                "{name} trial {trial} at {x:?}: fitted order {slope} (errors {errs:?})"
            );
            worst_order = worst_order.min(slope);
        }
    }
    println!("acceptance c06 continuous-limit order: pass (worst fitted order {worst_order:.3})");
}

// ---------------------------------------------------------------------------
// 7. stability inheritance along tau grids up to the recorded tau-bar
// ---------------------------------------------------------------------------

#[test]
fn c07_stability_inheritance() {
    // tau-bar values found empirically per model; each grid stays inside the
    // window where the continued fixed point keeps its hyperbolicity.
    let cases: Vec<(&str, dynamics::SystemDef<f64>, f64, Vec<Vec<f64>>, f64)> = vec![
        (
            "logistic",
            models::make_logistic(LogisticDisturbance::ConstantRate).system,
            -0.24,
            vec![vec![0.6], vec![0.4]],
            1.0,
        ),
        (
            "klausmeier",
            models::make_klausmeier(0.75).system,
            2.0,
            {
                let (hi, lo) = models::klausmeier_vegetated_equilibria(0.75, 2.0).unwrap();
                vec![vec![0.0, 2.0], hi, lo]
            },
            0.75,
        ),
        (
            "predprey",
            models::make_predator_prey().system,
            0.2,
            vec![
                vec![0.0, 0.0],
                vec![4.0, 0.0],
                models::predprey_coexistence_equilibrium(0.2).unwrap(),
            ],
            1.0,
        ),
    ];
    let cfg = StencilConfig::default();
    let mut checked = 0usize;
    for (name, sys, lambda, equilibria_list, tau_bar) in &cases {
        for eq_guess in equilibria_list {
            let p0 = DisturbanceParams::new(0.0, *lambda).unwrap();
            let base = newton_fixed_point(sys, &p0, eq_guess, 1e-11, 60).unwrap();
            if base.stability == Stability::Nonhyperbolic {
                continue;
            }
            let mut x_prev = base.x.clone();
            for k in 1..=10 {
                let tau = tau_bar * k as f64 / 10.0;
                let p = DisturbanceParams::new(tau, *lambda).unwrap();
                let rec = newton_fixed_point(sys, &p, &x_prev, 1e-10, 60)
                    .unwrap_or_else(|e| panic!("{name} tau {tau}: {e}"));
                assert_eq!(
                    rec.stability, base.stability,
                    "{name} at tau {tau}: {:?} vs {:?} at tau = 0",
                    rec.stability, base.stability
                );
                // sign(|mu_i| - 1) = sign(Re lambda_i(A)) under nearest
                // pairing of the two spectra
                let a = desing_jacobian_x(sys, tau, &rec.x, *lambda, TOL, &cfg).unwrap();
                let a_eigs = eigenvalues(&a).unwrap();
                for mu in &rec.eigenvalues {
                    let lam = a_eigs
                        .iter()
                        .min_by(|p, q| {
                            let dp = (*mu - (1.0 + tau * *p)).norm();
                            let dq = (*mu - (1.0 + tau * *q)).norm();
                            dp.partial_cmp(&dq).unwrap()
                        })
                        .unwrap();
                    assert!(
                        (mu.norm() - 1.0).signum() == lam.re.signum(),
                        "{name} tau {tau}: |mu| - 1 = {} vs Re lambda = {}",
                        mu.norm() - 1.0,
                        lam.re
                    );
                }
                x_prev = rec.x;
                checked += 1;
            }
        }
    }
    println!("acceptance c07 stability inheritance: pass ({checked} grid points)");
}

// ---------------------------------------------------------------------------
// 8. eigenvalue relation mu = 1 + tau lambda at random fixed points
// ---------------------------------------------------------------------------

#[test]
fn c08_eigenvalue_relation() {
    let cfg = StencilConfig::default();
    let mut rng = Lcg(20240808);
    let mut worst = 0.0f64;
    let mut count = 0usize;

    let logistic = models::make_logistic::<f64>(LogisticDisturbance::ConstantRate);
    while count < 8 {
        let p = DisturbanceParams::new(rng.range(0.1, 1.0), rng.range(-0.2, -0.05)).unwrap();
        if let Ok(rec) = newton_fixed_point(&logistic.system, &p, &[0.7], 1e-11, 40) {
            let rep = equilibria::eigenvalue_relation_check(&logistic.system, &rec, &cfg).unwrap();
            worst = worst.max(rep.max_discrepancy);
            count += 1;
        }
    }

    let klausmeier = models::make_klausmeier(0.75f64);
    for _ in 0..6 {
        let p = DisturbanceParams::new(rng.range(0.2, 2.0), rng.range(0.8, 3.0)).unwrap();
        let rec =
            newton_fixed_point(&klausmeier.system, &p, &[0.0, p.lambda], 1e-11, 60).unwrap();
        let rep = equilibria::eigenvalue_relation_check(&klausmeier.system, &rec, &cfg).unwrap();
        worst = worst.max(rep.max_discrepancy);
        count += 1;
    }

    let predprey = models::make_predator_prey::<f64>();
    let mut done = 0usize;
    while done < 6 {
        let p = DisturbanceParams::new(rng.range(0.1, 0.9), rng.range(0.12, 0.28)).unwrap();
        let guess = models::predprey_coexistence_equilibrium(p.lambda).unwrap();
        if let Ok(rec) = newton_fixed_point(&predprey.system, &p, &guess, 1e-10, 60) {
            let rep = equilibria::eigenvalue_relation_check(&predprey.system, &rec, &cfg).unwrap();
            worst = worst.max(rep.max_discrepancy);
            done += 1;
            count += 1;
        }
    }

    assert!(count >= 20);
    assert!(worst < 1e-8, "worst discrepancy {worst}");
    println!("acceptance c08 eigenvalue relation: pass ({count} points, worst {worst:.2e})");
}

// ---------------------------------------------------------------------------
// 9. oracle equivalence: numerical flow and parsed systems
// ---------------------------------------------------------------------------

const LOGISTIC_TEXT: &str = "\
[states]
x
[flow]
x' = x*(1-x)
[kickrate]
r_x = lambda
";

const KLAUSMEIER_TEXT: &str = "\
[states]
x1, x2
[params]
m = 0.75
[flow]
x1' = x2*x1^2 - m*x1
x2' = -x2*x1^2 - x2
[kickrate]
r_x1 = 0
r_x2 = lambda
";

#[test]
fn c09_oracle_equivalence() {
    let entry = models::make_logistic::<f64>(LogisticDisturbance::ConstantRate);
    let sys = &entry.system;
    let mut rng = Lcg(20240809);
    let mut worst_flow = 0.0f64;
    for _ in 0..40 {
        let x0 = rng.range(0.02, 1.48);
        let t = rng.range(0.0, 3.0);
        let numeric = dynamics::flow(sys, &[x0], t, TOL).unwrap();
        let exact = models::logistic_flow(x0, t);
        worst_flow = worst_flow.max((numeric[0] - exact).abs());
    }
    assert!(worst_flow < 1e-8, "flow vs closed form worst {worst_flow}");

    let parsed_log = flowkick_core::exprsys::parse_system::<f64>(LOGISTIC_TEXT).unwrap();
    let parsed_klaus = flowkick_core::exprsys::parse_system::<f64>(KLAUSMEIER_TEXT).unwrap();
    let builtin_klaus = models::make_klausmeier(0.75f64);
    let mut worst_eval = 0.0f64;
    for _ in 0..100 {
        let x1 = [rng.range(-1.0, 2.0)];
        let lambda = rng.range(-1.0, 1.0);
        let d_f = (parsed_log.eval_f(&x1)[0] - sys.eval_f(&x1)[0]).abs();
        let d_r = (parsed_log.eval_r(&x1, lambda)[0] - sys.eval_r(&x1, lambda)[0]).abs();
        worst_eval = worst_eval.max(d_f).max(d_r);

        let x2 = [rng.range(0.0, 3.0), rng.range(0.0, 3.0)];
        let pf = parsed_klaus.eval_f(&x2);
        let bf = builtin_klaus.system.eval_f(&x2);
        for k in 0..2 {
            worst_eval = worst_eval.max((pf[k] - bf[k]).abs() / (1.0 + bf[k].abs()));
        }
        let pr = parsed_klaus.eval_r(&x2, lambda);
        let br = builtin_klaus.system.eval_r(&x2, lambda);
        for k in 0..2 {
            worst_eval = worst_eval.max((pr[k] - br[k]).abs());
        }
    }
    assert!(worst_eval < 1e-12, "parsed vs builtin worst {worst_eval}");
    println!(
        "acceptance c09 oracle equivalence: pass (flow worst {worst_flow:.2e}, parse worst {worst_eval:.2e})"
    );
}

// ---------------------------------------------------------------------------
// 10. test-function diagnostics at every emitted SN and TC
// ---------------------------------------------------------------------------

#[test]
fn c10_table_diagnostics() {
    let st = step();
    let mut sn_events: Vec<continuation::BifurcationPoint<f64>> = Vec::new();

    // SN events from branches: lambda sweep at tau = 0.4 and tau fold sweep.
    let logistic = models::make_logistic::<f64>(LogisticDisturbance::ConstantRate);
    let p = DisturbanceParams::new(0.4, -0.24).unwrap();
    let rec = newton_fixed_point(&logistic.system, &p, &[0.7], 1e-11, 40).unwrap();
    let b1 =
        continuation::continue_branch(&logistic.system, &rec, FreeParam::Lambda, (-0.3, 0.0), &st)
            .unwrap();
    sn_events.extend(b1.events.iter().cloned());

    let p0 = DisturbanceParams::new(0.0, -0.24).unwrap();
    let rec0 = newton_fixed_point(&logistic.system, &p0, &[0.7], 1e-11, 40).unwrap();
    let b2 = continuation::continue_branch(&logistic.system, &rec0, FreeParam::Tau, (0.0, 3.0), &st)
        .unwrap();
    sn_events.extend(b2.events.iter().cloned());

    // SN curve points: logistic and the vegetation model.
    let seed_sn = b1
        .events
        .iter()
        .find(|e| e.btype == BifurcationType::SaddleNode)
        .unwrap();
    let curve1 = continuation::continue_sn_curve(
        &logistic.system,
        seed_sn,
        &CurveWindow {
            tau: (0.0, 2.5),
            lambda: (-0.3, 0.0),
        },
        &st,
    )
    .unwrap();
    sn_events.extend(sample(&curve1.points, 8));

    let klausmeier = models::make_klausmeier(0.75f64);
    let (hi, _) = models::klausmeier_vegetated_equilibria(0.75, 2.0).unwrap();
    let pk = DisturbanceParams::new(0.0, 2.0).unwrap();
    let rk = newton_fixed_point(&klausmeier.system, &pk, &hi, 1e-11, 60).unwrap();
    let bk =
        continuation::continue_branch(&klausmeier.system, &rk, FreeParam::Lambda, (1.2, 2.5), &st)
            .unwrap();
    sn_events.extend(bk.events.iter().cloned());
    let seed_k = bk
        .events
        .iter()
        .find(|e| e.btype == BifurcationType::SaddleNode)
        .unwrap();
    let curve2 = continuation::continue_sn_curve(
        &klausmeier.system,
        seed_k,
        &CurveWindow {
            tau: (0.0, 2.2),
            lambda: (1.2, 6.0),
        },
        &st,
    )
    .unwrap();
    sn_events.extend(sample(&curve2.points, 8));

    let sn_count = sn_events
        .iter()
        .filter(|e| e.btype == BifurcationType::SaddleNode)
        .count();
    assert!(sn_count >= 18, "expected a healthy SN sample, got {sn_count}");
    for ev in &sn_events {
        if ev.btype != BifurcationType::SaddleNode {
            continue;
        }
        assert!(
            ev.test_values.nonhyperbolicity < 1e-8,
            "SN at ({}, {}): psi {}",
            ev.tau,
            ev.lambda,
            ev.test_values.nonhyperbolicity
        );
        let tv = ev.test_values.transversality.expect("SN transversality");
        assert!(
            tv.abs() > 1e-4,
            "SN at ({}, {}): transversality {tv}",
            ev.tau,
            ev.lambda
        );
        let qd = ev
            .test_values
            .quadratic_dominance
            .expect("SN quadratic dominance");
        assert!(
            qd.abs() > 1e-4,
            "SN at ({}, {}): quadratic dominance {qd}",
            ev.tau,
            ev.lambda
        );
    }

    // TC points: predator-prey at (4, 0) and the proportional-harvest
    // logistic at x = 0.
    let mut tc_points: Vec<continuation::BifurcationPoint<f64>> = Vec::new();
    let predprey = models::make_predator_prey::<f64>();
    let tc1 = continuation::tc_curve_at_invariant(
        &predprey.system,
        &[4.0, 0.0],
        &[0],
        (0.5, 2.0),
        6,
        (0.05, 0.6),
        &st,
    )
    .unwrap();
    tc_points.extend(tc1.points);
    let prop = models::make_logistic::<f64>(LogisticDisturbance::ProportionalRate);
    let tc2 = continuation::tc_curve_at_invariant(
        &prop.system,
        &[0.0],
        &[],
        (0.5, 2.0),
        6,
        (0.1, 1.5),
        &st,
    )
    .unwrap();
    tc_points.extend(tc2.points);

    assert!(tc_points.len() >= 12);
    for pt in &tc_points {
        assert!(
            pt.test_values.nonhyperbolicity < 1e-8,
            "TC at tau {}: nonhyperbolicity {}",
            pt.tau,
            pt.test_values.nonhyperbolicity
        );
        let dl = pt.test_values.lambda_derivative.expect("TC dPhi/dlambda");
        assert!(dl < 1e-8, "TC at tau {}: |dPhi/dlambda| {dl}", pt.tau);
        let mp = pt.test_values.mixed_partial.expect("TC mixed partial");
        assert!(mp.abs() > 1e-4, "TC at tau {}: mixed partial {mp}", pt.tau);
    }

    println!(
        "acceptance c10 table diagnostics: pass ({} SN, {} TC points)",
        sn_count,
        tc_points.len()
    );
}

fn sample<T: Clone>(v: &[T], n: usize) -> Vec<T> {
    if v.len() <= n {
        return v.to_vec();
    }
    (0..n)
        .map(|i| v[i * (v.len() - 1) / (n - 1)].clone())
        .collect()
}

// ---------------------------------------------------------------------------
// supporting invariants exercised alongside the numbered criteria
// ---------------------------------------------------------------------------

/// Marked disturbance patterns from the stability diagram fall on opposite
/// sides of the saddle-node curve.
#[test]
fn separatrix_sides_of_the_sn_curve() {
    let entry = models::make_logistic::<f64>(LogisticDisturbance::ConstantRate);
    let sys = &entry.system;
    let st = step();
    let p = DisturbanceParams::new(0.2, -0.2).unwrap();
    let rec = newton_fixed_point(sys, &p, &[0.7], 1e-11, 40).unwrap();
    let b = continuation::continue_branch(sys, &rec, FreeParam::Lambda, (-0.3, 0.0), &st).unwrap();
    let sn = b
        .events
        .iter()
        .find(|e| e.btype == BifurcationType::SaddleNode)
        .unwrap();
    let curve = continuation::continue_sn_curve(
        sys,
        sn,
        &CurveWindow {
            tau: (0.0, 3.0),
            lambda: (-0.3, 0.0),
        },
        &st,
    )
    .unwrap();
    // lambda_SN at a given tau by interpolation along the curve
    let lambda_sn_at = |tau: f64| -> f64 {
        let mut pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.tau, p.lambda)).collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let i = pts.partition_point(|&(t, _)| t < tau).clamp(1, pts.len() - 1);
        let (t0, l0) = pts[i - 1];
        let (t1, l1) = pts[i];
        l0 + (l1 - l0) * (tau - t0) / (t1 - t0)
    };
    let lambda = -0.24;
    let side_b = lambda - lambda_sn_at(0.4); // pattern of the recovering panel
    let side_c = lambda - lambda_sn_at(2.5); // pattern of the collapsing panel
    assert!(
        side_b > 0.0 && side_c < 0.0,
        "sides {side_b} / {side_c} should straddle the curve"
    );
    println!("separatrix property: pass ({side_b:.4} vs {side_c:.4})");
}

/// Fixed-point counts from the grid agree with the closed-form count along
/// every cell of a 10x10 logistic grid.
#[test]
fn grid_counts_match_branch_fold_oracle() {
    let entry = models::make_logistic::<f64>(LogisticDisturbance::ConstantRate);
    let sys = &entry.system;
    let tau_axis: Vec<f64> = (0..10).map(|i| 0.2 + 1.1 * i as f64 / 9.0).collect();
    let lambda_axis: Vec<f64> = (0..10).map(|j| -0.26 + 0.24 * j as f64 / 9.0).collect();
    let seeds: Vec<Vec<f64>> = [0.2, 0.35, 0.5, 0.65, 0.8, 1.0]
        .iter()
        .map(|&v| vec![v])
        .collect();
    let grid = continuation::stability_grid(
        sys,
        &tau_axis,
        &lambda_axis,
        SecondAxis::Lambda,
        &seeds,
        1e-4,
        &step(),
    )
    .unwrap();
    for (i, &tau) in tau_axis.iter().enumerate() {
        for (j, &lambda) in lambda_axis.iter().enumerate() {
            let oracle: usize = models::logistic_flow_kick_fixed_points(tau, lambda)
                .into_iter()
                .filter(|&x| x >= 0.0)
                .count();
            let got = grid.cell(i, j).count();
            assert_eq!(
                got, oracle,
                "cell (tau {tau}, lambda {lambda}): {got} vs closed-form {oracle}"
            );
        }
    }
    println!("grid/fold agreement: pass (100 cells)");
}

/// Re-solving any branch point from its own state reproduces it.
#[test]
fn branch_points_are_self_consistent() {
    let entry = models::make_logistic::<f64>(LogisticDisturbance::ConstantRate);
    let sys = &entry.system;
    let p0 = DisturbanceParams::new(0.0, -0.24).unwrap();
    let seed = newton_fixed_point(sys, &p0, &[0.7], 1e-11, 40).unwrap();
    let branch =
        continuation::continue_branch(sys, &seed, FreeParam::Tau, (0.0, 3.0), &step()).unwrap();
    for rec in branch.points.iter().step_by(4) {
        let re = newton_fixed_point(sys, &rec.params(), &rec.x, 1e-10, 40).unwrap();
        assert!(
            dist(&re.x, &rec.x) <= 1e-10,
            "tau {}: moved {:.2e}",
            rec.tau,
            dist(&re.x, &rec.x)
        );
    }
    println!("branch self-consistency: pass");
}

/// Transcritical curves extrapolate to the continuous bifurcation rate.
#[test]
fn tc_curves_limit_to_the_continuous_rate() {
    let st = step();
    // predator-prey at (4, 0)
    let predprey = models::make_predator_prey::<f64>();
    let tc = continuation::tc_curve_at_invariant(
        &predprey.system,
        &[4.0, 0.0],
        &[0],
        (0.01, 0.02),
        2,
        (0.05, 0.6),
        &st,
    )
    .unwrap();
    let l1 = tc.points[0].lambda; // tau = 0.01
    let l2 = tc.points[1].lambda; // tau = 0.02
    let extrapolated = 2.0 * l1 - l2;
    let target = models::predprey_transverse_rate::<f64>();
    assert!(
        (extrapolated - target).abs() < 1e-3,
        "predprey: {extrapolated} vs {target}"
    );

    // proportional-harvest logistic at x = 0: continuous rate 1
    let prop = models::make_logistic::<f64>(LogisticDisturbance::ProportionalRate);
    let tc2 = continuation::tc_curve_at_invariant(
        &prop.system,
        &[0.0],
        &[],
        (0.01, 0.02),
        2,
        (0.5, 1.5),
        &st,
    )
    .unwrap();
    let e2 = 2.0 * tc2.points[0].lambda - tc2.points[1].lambda;
    assert!((e2 - 1.0).abs() < 1e-3, "proportional logistic: {e2} vs 1");
    println!(
        "tc continuous limits: pass (predprey {extrapolated:.6} vs {target:.6}, logistic {e2:.6} vs 1)"
    );
}

/// Crossing the Neimark-Sacker curve in tau flips the coexistence stability.
#[test]
fn ns_crossing_flips_stability() {
    let entry = models::make_predator_prey::<f64>();
    let sys = &entry.system;
    let st = step();
    let guess = models::predprey_coexistence_equilibrium(0.2f64).unwrap();
    let p_small = DisturbanceParams::new(0.05, 0.2).unwrap();
    let seed = newton_fixed_point(sys, &p_small, &guess, 1e-11, 60).unwrap();
    let sweep =
        continuation::continue_branch(sys, &seed, FreeParam::Lambda, (0.02, 0.35), &st).unwrap();
    let ns = sweep
        .events
        .iter()
        .find(|e| e.btype == BifurcationType::NeimarkSacker)
        .expect("NS event");
    // On the curve |mu| = 1; at fixed lambda, stepping tau across the curve
    // flips the side of the unit circle.
    let curve = continuation::continue_ns_curve(
        sys,
        ns,
        &CurveWindow {
            tau: (0.0, 1.1),
            lambda: (0.0, 0.4),
        },
        &st,
    )
    .unwrap();
    let mid = &curve.points[curve.points.len() / 2];
    assert!(mid.tau > 0.02, "need an interior curve point");
    // moduli on the curve itself stay on the unit circle
    let p_on = DisturbanceParams::new(mid.tau, mid.lambda).unwrap();
    let rec_on = newton_fixed_point(sys, &p_on, &mid.x, 1e-10, 60).unwrap();
    for mu in &rec_on.eigenvalues {
        assert!((mu.norm() - 1.0).abs() < 1e-6, "|mu| = {}", mu.norm());
        assert!(mu.im != 0.0, "NS pair must be complex");
    }
    assert_eq!(rec_on.kind, FixedPointKind::FlowKick);
    // either side of the curve in lambda (the curve is flat in tau here, so
    // lambda is the transverse direction with good margin)
    let below = DisturbanceParams::new(mid.tau, mid.lambda - 0.02).unwrap();
    let above = DisturbanceParams::new(mid.tau, mid.lambda + 0.02).unwrap();
    let rec_below = newton_fixed_point(sys, &below, &mid.x, 1e-10, 60).unwrap();
    let rec_above = newton_fixed_point(sys, &above, &mid.x, 1e-10, 60).unwrap();
    assert_ne!(
        rec_below.stability, rec_above.stability,
        "stability must flip across the NS curve"
    );
    println!(
        "ns crossing flips stability: pass ({:?} -> {:?})",
        rec_below.stability, rec_above.stability
    );
}
