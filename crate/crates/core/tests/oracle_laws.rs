//! Independent Monte Carlo verification of the first-passage laws and risk
//! routes that the unit tests pin only analytically. The two-sided exit
//! oracle below is deliberately self-contained (plain Euler grid with
//! Brownian-bridge barrier checks) so that it shares no path-tracking code
//! with the library engine.

use levydd::drawdown;
use levydd::fluctuation::{self, ExitQuery};
use levydd::mc::{self, Levels, SimConfig, StableScheme};
use levydd::process::ProcessSpec;
use levydd::risk::{Horizon, PriceModel, RiskAnalytics, RiskQuery};
use levydd::scale::ScaleEngine;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn sim_cfg(n: usize, seed: u64) -> SimConfig {
    SimConfig {
        dt: 1e-3,
        n_paths: n,
        seed,
        t_max: 200.0,
        stable_scheme: StableScheme::default(),
    }
}

// Self-contained two-sided exit oracle for the exponential jump diffusion:
// E_x[e^{-q T}; exit at the top / bottom / bottom by creeping].
fn jde_two_sided_oracle(
    (mu, sig2, lam, eta): (f64, f64, f64, f64),
    (u, v, x, q): (f64, f64, f64, f64),
    n: usize,
    seed: u64,
) -> (f64, f64, f64, f64, f64) {
    let dt = 5e-5;
    let mut top = (0.0, 0.0);
    let mut bottom = (0.0, 0.0);
    let mut creep = (0.0, 0.0);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let mut pos = x;
        let mut t = 0.0f64;
        let mut next_jump = -(1.0 - rng.random::<f64>()).ln() / lam;
        let (w_top, w_bot, w_creep) = loop {
            let seg_end = (t + dt).min(next_jump);
            let seg = seg_end - t;
            let z: f64 = rng.sample(StandardNormal);
            let x1 = pos + mu * seg + (sig2 * seg).sqrt() * z;
            let d = x1 - pos;
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            let bmax = 0.5 * (pos + x1 + (d * d - 2.0 * sig2 * seg * (1.0f64 - u1).ln()).sqrt());
            let bmin = 0.5 * (pos + x1 - (d * d - 2.0 * sig2 * seg * (1.0f64 - u2).ln()).sqrt());
            let tm = t + 0.5 * seg;
            if bmax > v && bmin < u {
                if bmax - v > u - bmin {
                    break ((-q * tm).exp(), 0.0, 0.0);
                }
                break (0.0, (-q * tm).exp(), (-q * tm).exp());
            }
            if bmax > v {
                break ((-q * tm).exp(), 0.0, 0.0);
            }
            if bmin < u {
                break (0.0, (-q * tm).exp(), (-q * tm).exp());
            }
            pos = x1;
            t = seg_end;
            if t >= next_jump {
                pos += (1.0 - rng.random::<f64>()).ln() / eta;
                if pos < u {
                    break (0.0, (-q * t).exp(), 0.0);
                }
                if pos > v {
                    break ((-q * t).exp(), 0.0, 0.0);
                }
                next_jump = t - (1.0 - rng.random::<f64>()).ln() / lam;
            }
            if t > 500.0 {
                break (0.0, 0.0, 0.0);
            }
        };
        top = (top.0 + w_top, top.1 + w_top * w_top);
        bottom = (bottom.0 + w_bot, bottom.1 + w_bot * w_bot);
        creep = (creep.0 + w_creep, creep.1 + w_creep * w_creep);
    }
    let nf = n as f64;
    let se = |s: (f64, f64)| ((s.1 / nf - (s.0 / nf).powi(2)).max(0.0) / nf).sqrt();
    (
        top.0 / nf,
        se(top),
        bottom.0 / nf,
        creep.0 / nf,
        se(creep).max(se(bottom)),
    )
}

#[test]
fn two_sided_exit_and_creeping_match_oracle() {
    let params = (0.5, 1.0, 1.0, 2.0);
    let spec = ProcessSpec::jump_diffusion(params.0, params.1, params.2, params.3).unwrap();
    let engine = ScaleEngine::closed(spec);
    let query = ExitQuery::new(0.0, 1.0, 0.5, 0.3).unwrap();
    let up = fluctuation::exit_up(&engine, &query).unwrap();
    let down = fluctuation::exit_down(&engine, &query).unwrap();
    let creep = fluctuation::creep_two_sided(&engine, &query).unwrap();
    let (mc_up, se_up, mc_down, mc_creep, se_creep) =
        jde_two_sided_oracle(params, (0.0, 1.0, 0.5, 0.3), 120_000, 2024);
    assert!(
        (up - mc_up).abs() < 3.0 * se_up + 1e-3,
        "exit_up {up} vs MC {mc_up} (se {se_up})"
    );
    assert!(
        (down - mc_down).abs() < 3.0 * se_up + 1e-3,
        "exit_down {down} vs MC {mc_down}"
    );
    assert!(creep < down);
    assert!(
        (creep - mc_creep).abs() < 5.0 * se_creep + 2e-3,
        "creep_two_sided {creep} vs MC {mc_creep} (se {se_creep})"
    );
}

#[test]
fn taua_laplace_stable_matches_cms_increments() {
    let spec = ProcessSpec::stable(1.5, 1.0).unwrap();
    let engine = ScaleEngine::closed(spec);
    let exact = fluctuation::taua_laplace(&engine, 0.2, 1.0).unwrap();
    let cfg = SimConfig {
        dt: 2.5e-4,
        n_paths: 150_000,
        seed: 5,
        t_max: 200.0,
        stable_scheme: StableScheme::ChambersMallowsStuck,
    };
    let est = mc::estimate(
        mc::simulate(&spec, &cfg, Levels::drawdown_only(1.0).unwrap()),
        |p| (-0.2 * p.tau_a).exp(),
    );
    assert!(
        (exact - est.value).abs() < 3.0 * est.std_error + 2e-3,
        "taua stable: formula {exact} vs CMS MC {} +- {}",
        est.value,
        est.std_error
    );
}

#[test]
fn sextuple_overshoot_density_matches_histogram() {
    // Joint density of (X̄, Y_pre, overshoot) in a box around
    // (v, y, h) = (0.5, 0.6, 0.3) at q = r = 0, u = −∞.
    let spec = ProcessSpec::jump_diffusion(0.2, 1.0, 1.0, 2.0).unwrap();
    let engine = ScaleEngine::closed(spec);
    let (v0, y0, h0) = (0.5, 0.6, 0.3);
    let d = 0.06;
    let cfg = sim_cfg(400_000, 31);
    let levels = Levels::drawdown_only(1.0).unwrap();
    let est = mc::estimate_many(
        &spec,
        &cfg,
        levels,
        &[&move |p: &mc::PathFunctionals| {
            let inside = !p.creep_flag
                && (p.x_bar - v0).abs() < d
                && (p.y_pre - y0).abs() < d
                && (p.overshoot - h0).abs() < d;
            if inside {
                1.0
            } else {
                0.0
            }
        }],
    )
    .remove(0);
    let mc_density = est.value / (2.0 * d).powi(3);
    let mc_se = est.std_error / (2.0 * d).powi(3);

    // Box average of the analytic density (the density varies over the box).
    let mut acc = 0.0;
    let steps = 6;
    for i in 0..steps {
        for j in 0..steps {
            for k in 0..steps {
                let v = v0 - d + 2.0 * d * (i as f64 + 0.5) / steps as f64;
                let y = y0 - d + 2.0 * d * (j as f64 + 0.5) / steps as f64;
                let h = h0 - d + 2.0 * d * (k as f64 + 0.5) / steps as f64;
                let q = drawdown::SextupleQuery::new(0.0, 1.0, 0.0, 0.0, None, v, y, h).unwrap();
                acc += drawdown::sextuple_overshoot_density(&engine, &q)
                    .unwrap()
                    .value;
            }
        }
    }
    let analytic = acc / (steps * steps * steps) as f64;
    assert!(
        (analytic - mc_density).abs() < 3.0 * mc_se + 0.02 * analytic,
        "sextuple density {analytic} vs MC {mc_density} +- {mc_se}"
    );
}

#[test]
fn hat_tau_joint_laplace_matches_mc() {
    let spec = ProcessSpec::brownian(0.0, 1.0).unwrap();
    let engine = ScaleEngine::closed(spec);
    let (a, q, theta) = (1.0, 0.3, 1.0);
    let exact = drawdown::hat_tau_y_joint_laplace(&engine, a, q, theta).unwrap();
    let cfg = sim_cfg(200_000, 77);
    let est = mc::estimate(
        mc::simulate(&spec, &cfg, Levels::new(f64::INFINITY, a).unwrap()),
        |p| (-q * p.hat_tau_b - theta * p.y_at_hat).exp(),
    );
    assert!(
        (exact - est.value).abs() < 3.0 * est.std_error + 1e-3,
        "joint transform {exact} vs MC {} +- {}",
        est.value,
        est.std_error
    );
}

#[test]
fn joint_tau_hat_y_matches_mc_jde() {
    let spec = ProcessSpec::jump_diffusion(0.2, 1.0, 1.0, 2.0).unwrap();
    let engine = ScaleEngine::closed(spec);
    let (a, q, b) = (1.0, 0.2, 0.5);
    let exact = drawdown::joint_tau_hat_y(&engine, a, q, b).unwrap();
    let cfg = sim_cfg(200_000, 78);
    let est = mc::estimate(
        mc::simulate(&spec, &cfg, Levels::drawdown_only(a).unwrap()),
        |p| {
            if p.hat_y_at_tau > b {
                (-q * p.tau_a).exp()
            } else {
                0.0
            }
        },
    );
    assert!(
        (exact - est.value).abs() < 5.0 * est.std_error + 2e-3,
        "E[e^(-q tau); hatY > b] = {exact} vs MC {} +- {}",
        est.value,
        est.std_error
    );
}

#[test]
fn time_laplace_new_min_matches_mc_drifted_bm() {
    let spec = ProcessSpec::brownian(0.3, 1.0).unwrap();
    let engine = ScaleEngine::closed(spec);
    let (a, q) = (1.0, 0.5);
    let exact = drawdown::time_laplace_new_min(&engine, a, q).unwrap();
    // ∫ e^{-qt} P[τ_a < t, new min] dt = E[e^{-q τ_a}; new min]/q.
    let cfg = sim_cfg(200_000, 79);
    let est = mc::estimate(
        mc::simulate(&spec, &cfg, Levels::drawdown_only(a).unwrap()),
        |p| {
            if p.new_min_at_tau {
                (-q * p.tau_a).exp() / q
            } else {
                0.0
            }
        },
    );
    assert!(
        (exact - est.value).abs() < 5.0 * est.std_error + 2e-3,
        "new-min transform {exact} vs MC {} +- {}",
        est.value,
        est.std_error
    );
    // And the rally-side twin.
    let exact_max = drawdown::time_laplace_new_max(&engine, a, q).unwrap();
    let est_max = mc::estimate(
        mc::simulate(&spec, &cfg, Levels::new(f64::INFINITY, a).unwrap()),
        |p| {
            if p.new_max_at_hat {
                (-q * p.hat_tau_b).exp() / q
            } else {
                0.0
            }
        },
    );
    assert!(
        (exact_max - est_max.value).abs() < 5.0 * est_max.std_error + 2e-3,
        "new-max transform {exact_max} vs MC {} +- {}",
        est_max.value,
        est_max.std_error
    );
}

#[test]
fn rally_cdf_2d_inversion_matches_mc() {
    // P[Y_{τ̂_b} ≤ u, τ̂_b < t] for driftless Brownian at b = 1,
    // (u, t) = (0.5, 1): iterated inversion against simulation.
    let spec = ProcessSpec::brownian(0.0, 1.0).unwrap();
    let model = PriceModel::new(spec, 1.0).unwrap();
    let analytics = RiskAnalytics::with_defaults(model).unwrap();
    let b = 1.0;
    let inv = analytics.rally_drawdown_cdf(b, 0.5, 1.0).unwrap();

    let cfg = sim_cfg(400_000, 80);
    let est = mc::estimate(
        mc::simulate(&spec, &cfg, Levels::new(f64::INFINITY, b).unwrap()),
        |p| {
            if p.y_at_hat <= 0.5 && p.hat_tau_b < 1.0 {
                1.0
            } else {
                0.0
            }
        },
    );
    assert!(
        (inv.value - est.value).abs() < 3.0 * est.std_error + 3e-3,
        "2d inversion {} vs MC {} +- {}",
        inv.value,
        est.value,
        est.std_error
    );
}

#[test]
fn expected_drawdown_routes_agree() {
    // The published overshoot-corrected transform against the
    // last-supremum factorization route, on real transform arguments.
    let spec = ProcessSpec::brownian(0.05, 0.04).unwrap();
    let model = PriceModel::new(spec, 100.0).unwrap();
    let engine = ScaleEngine::closed(spec);
    let a = 0.25f64;
    let psi1 = spec.psi(1.0);
    for q in [psi1 + 0.5, psi1 + 1.5] {
        // Route 1: the integral transform used by expected_drawdown_at_d.
        let lam0 = engine.lambda_ratio(0.0, a).unwrap();
        let lamq = engine.lambda_ratio(q, a).unwrap();
        let h = |x: f64| 1.0 - (1.0 - psi1 / q) * (-x).exp();
        let i1 = levydd::quad::integrate(|x| h(x) * engine.w(q, x).unwrap(), 0.0, a, 1e-12).unwrap();
        let i2 = levydd::quad::integrate(
            |x| h(x) * engine.w_prime(q, x, levydd::scale::Side::Right).unwrap(),
            0.0,
            a,
            1e-12,
        )
        .unwrap() + h(0.0) * engine.w(q, 0.0).unwrap();
        let route1 = 100.0 * lamq / (lamq - 1.0) * i1 - 100.0 / (lamq - 1.0) * (i2 - 1.0 / q);
        // Route 2: E[e^{-q Ḡ + X̄}] {E[e^{-q(τ-Ḡ)}] − e^{-a} G(1, q)(λ_q/λ_0)}/q
        // with G the overshoot transform.
        let taua = fluctuation::taua_laplace(&engine, q, a).unwrap();
        let zq = engine.z(q, a).unwrap();
        let wq = engine.w(q, a).unwrap();
        let _ = taua;
        let part_tail = (lamq / lam0) * (zq - q * wq / lamq);
        let g1 = drawdown::tau_overshoot_laplace(&engine, a, q, 1.0).unwrap();
        let part_tail_y = (lamq / lam0) * (-a).exp() * g1;
        let front = lam0 / (lamq - 1.0);
        let route2 = 100.0 * front * (part_tail - part_tail_y) / q;
        let rel = ((route1 - route2) / route2).abs();
        assert!(rel < 1e-8, "expected-drawdown routes differ: {route1} vs {route2}");
    }
    // And the time-domain value against simulation at T = 1.
    let analytics = RiskAnalytics::with_defaults(model).unwrap();
    let query = RiskQuery::drawdown_only(1.0 - (-a).exp(), Horizon::Finite(1.0)).unwrap();
    let vt = analytics.expected_drawdown_at_d(&query).unwrap().value;
    let cfg = sim_cfg(200_000, 81);
    let est = mc::estimate(
        mc::simulate(&spec, &cfg, Levels::drawdown_only(a).unwrap()),
        |p| {
            if p.tau_a < 1.0 {
                100.0 * (p.x_bar.exp() - (p.x_bar - a - p.overshoot).exp())
            } else {
                0.0
            }
        },
    );
    assert!(
        (vt - est.value).abs() < 4.0 * est.std_error + 2e-3 * est.value,
        "expected drawdown {vt} vs MC {} +- {}",
        est.value,
        est.std_error
    );
}

#[test]
fn min_law_joint_event_matches_formula_jde() {
    // The W(z)/W(a) law of the drawdown trough governs the event where the
    // supremum has reached a − z as well; spot-check three z values.
    let spec = ProcessSpec::jump_diffusion(0.2, 1.0, 1.0, 2.0).unwrap();
    let engine = ScaleEngine::closed(spec);
    let a = 1.0;
    let cfg = sim_cfg(200_000, 82);
    let paths: Vec<(f64, f64)> = mc::simulate(&spec, &cfg, Levels::drawdown_only(a).unwrap())
        .map(|p| (-p.x_low_pre, p.x_bar))
        .collect();
    for z in [0.25, 0.5, 0.75] {
        let emp = paths
            .iter()
            .filter(|(trough, xbar)| *trough <= z && *xbar >= a - z)
            .count() as f64
            / paths.len() as f64;
        let theory = drawdown::min_before_tau_cdf(&engine, a, z).unwrap();
        let se = (theory * (1.0 - theory) / paths.len() as f64).sqrt();
        assert!(
            (emp - theory).abs() < 4.0 * se + 2e-3,
            "z={z}: joint event {emp} vs W(z)/W(a) {theory}"
        );
    }
}
