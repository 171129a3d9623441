//! First-passage building blocks: two-sided exit identities, creeping
//! transforms, the Laplace transform of the drawdown passage time τ_a, the
//! resolvent of the drawdown process killed on exceeding a, the creeping
//! coefficient Δ^{(q)}(a), and the measure-level consistency checks built
//! from them.

use crate::error::{Error, Result};
use crate::quad;
use crate::scale::ScaleEngine;
use crate::special;

/// Two-sided exit query: start at x inside [u, v], discount q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitQuery {
    pub u: f64,
    pub v: f64,
    pub x: f64,
    pub q: f64,
}

impl ExitQuery {
    pub fn new(u: f64, v: f64, x: f64, q: f64) -> Result<Self> {
        if !(u < v) {
            return Err(Error::invalid("exit query requires u < v"));
        }
        if !(x >= u && x <= v) {
            return Err(Error::invalid("exit query requires x in [u, v]"));
        }
        if !(q >= 0.0) {
            return Err(Error::invalid("exit query requires q >= 0"));
        }
        Ok(ExitQuery { u, v, x, q })
    }
}

/// E_x[e^{−qT}; X exits [u,v] at the top] = W^{(q)}(x−u)/W^{(q)}(v−u).
pub fn exit_up(engine: &ScaleEngine, query: &ExitQuery) -> Result<f64> {
    let num = engine.w(query.q, query.x - query.u)?;
    let den = engine.w(query.q, query.v - query.u)?;
    Ok(num / den)
}

/// E_x[e^{−qT}; X exits [u,v] at the bottom]
/// = Z^{(q)}(x−u) − Z^{(q)}(v−u) W^{(q)}(x−u)/W^{(q)}(v−u).
pub fn exit_down(engine: &ScaleEngine, query: &ExitQuery) -> Result<f64> {
    let zx = engine.z(query.q, query.x - query.u)?;
    let zv = engine.z(query.q, query.v - query.u)?;
    Ok(zx - zv * exit_up(engine, query)?)
}

// W^{(q)'}_+ extended to the boundary; for σ² > 0 the value at 0+ is 2/σ².
fn w_prime_plus(engine: &ScaleEngine, q: f64, x: f64) -> Result<f64> {
    engine.w_prime_right(q, x)
}

/// Downward creeping over the one-sided barrier u ≤ x:
/// E_x[e^{−q T_u^-}; X_{T_u^-} = u] = (σ²/2)(W^{(q)'}(x−u) − Φ(q) W^{(q)}(x−u)),
/// understood as zero when σ = 0.
pub fn creep_one_sided(engine: &ScaleEngine, u_level: f64, x: f64, q: f64) -> Result<f64> {
    if !(u_level <= x) {
        return Err(Error::invalid("creep_one_sided requires u_level <= x"));
    }
    let sigma2 = engine.spec().gaussian_coeff();
    if sigma2 == 0.0 {
        return Ok(0.0);
    }
    let d = x - u_level;
    let phi = engine.spec().phi(q)?;
    Ok(0.5 * sigma2 * (w_prime_plus(engine, q, d)? - phi * engine.w(q, d)?))
}

/// Creeping through the bottom of [u, v]:
/// (σ²/2)(W^{(q)'}(x−u) − (W^{(q)'}(v−u)/W^{(q)}(v−u)) W^{(q)}(x−u));
/// zero when σ = 0.
pub fn creep_two_sided(engine: &ScaleEngine, query: &ExitQuery) -> Result<f64> {
    let sigma2 = engine.spec().gaussian_coeff();
    if sigma2 == 0.0 {
        return Ok(0.0);
    }
    let dv = query.v - query.u;
    let dx = query.x - query.u;
    let lam = engine.lambda_ratio(query.q, dv)?;
    Ok(0.5 * sigma2 * (w_prime_plus(engine, query.q, dx)? - lam * engine.w(query.q, dx)?))
}

/// E[e^{−q τ_a}] = Z^{(q)}(a) − q W^{(q)}(a)² / W^{(q)'}_+(a).
pub fn taua_laplace(engine: &ScaleEngine, q: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::invalid("taua_laplace requires a > 0"));
    }
    if q == 0.0 {
        return Ok(1.0);
    }
    let w = engine.w(q, a)?;
    let wp = w_prime_plus(engine, q, a)?;
    Ok(engine.z(q, a)? - q * w * w / wp)
}

/// Density/atom decomposition of the killed-drawdown resolvent at y ∈ [0, a]:
/// density λ(a,q)⁻¹ W^{(q)'}(y) − W^{(q)}(y), plus an atom
/// λ(a,q)⁻¹ W^{(q)}(0) at y = 0 (nonzero only under bounded variation).
#[derive(Debug, Clone, Copy)]
pub struct ResolventValue {
    pub density: f64,
    pub atom_at_zero: f64,
}

pub fn resolvent_density(engine: &ScaleEngine, q: f64, a: f64, y: f64) -> Result<ResolventValue> {
    if !(a > 0.0 && (0.0..=a).contains(&y)) {
        return Err(Error::invalid("resolvent_density requires 0 <= y <= a"));
    }
    let lam_inv = 1.0 / engine.lambda_ratio(q, a)?;
    let density = lam_inv * w_prime_plus(engine, q, y)? - engine.w(q, y)?;
    let atom_at_zero = lam_inv * engine.w(q, 0.0)?;
    Ok(ResolventValue { density, atom_at_zero })
}

/// Creeping part of the drawdown first passage:
/// Δ^{(q)}(a) = (σ²/2)[W^{(q)'}(a) − λ(a,q)⁻¹ W^{(q)''}(a)], zero when σ = 0.
pub fn delta_creep(engine: &ScaleEngine, q: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::invalid("delta_creep requires a > 0"));
    }
    let sigma2 = engine.spec().gaussian_coeff();
    if sigma2 == 0.0 {
        return Ok(0.0);
    }
    let lam_inv = 1.0 / engine.lambda_ratio(q, a)?;
    Ok(0.5 * sigma2 * (engine.w_prime(q, a, crate::scale::Side::Right)? - lam_inv * engine.w_second(q, a)?))
}

// ∫_0^∞ e^{−rate·h} Λ-density(y − a − h) dh for y < a. With rate = 0 this is
// the plain tail Λ((−∞, y−a)); for the exponential-jump family it stays in
// closed form; for the stable families it reduces to an incomplete gamma of
// negative index, reached by downward recurrence.
fn weighted_jump_tail(engine: &ScaleEngine, a: f64, y: f64, rate: f64) -> Result<f64> {
    let spec = engine.spec();
    let s = a - y;
    if s <= 0.0 {
        // Boundary y = a: the full jump mass (weighted) for finite-activity
        // families, +inf for the stable densities.
        return match *spec.family() {
            crate::process::Family::JumpDiffusionExp { lambda, eta, .. } => {
                Ok(lambda * eta / (eta + rate))
            }
            _ => Ok(f64::INFINITY),
        };
    }
    if rate == 0.0 {
        return spec.levy_tail(-s);
    }
    match *spec.family() {
        crate::process::Family::JumpDiffusionExp { lambda, eta, .. } => {
            Ok(lambda * eta * (-eta * s).exp() / (eta + rate))
        }
        crate::process::Family::StableNeg { alpha, sigma }
        | crate::process::Family::StableDrift { alpha, sigma, .. } => {
            // c ∫_s^∞ e^{−rate(w−s)} w^{−1−α} dw = c e^{rate·s} rate^α Γ(−α, rate·s)
            let c = crate::process::ProcessSpec::stable_density_constant(alpha, sigma);
            let x = rate * s;
            if x > 600.0 {
                // e^x Γ(−α, x) ≍ x^{−α−1}(1 − (α+1)/x + (α+1)(α+2)/x²)
                let corr = 1.0 - (alpha + 1.0) / x + (alpha + 1.0) * (alpha + 2.0) / (x * x);
                return Ok(c * rate.powf(alpha) * x.powf(-alpha - 1.0) * corr);
            }
            // Γ(−α, x) from Γ(2−α, x) by two downward recurrence steps.
            let g2 = special::incomplete_gamma(2.0 - alpha, x);
            let g1 = (g2 - x.powf(1.0 - alpha) * (-x).exp()) / (1.0 - alpha);
            let g0 = (g1 - x.powf(-alpha) * (-x).exp()) / (-alpha);
            Ok(c * rate.powf(alpha) * x.exp() * g0)
        }
        crate::process::Family::BrownianDrift { .. } => {
            Err(Error::UnsupportedFamily("no jump part".into()))
        }
    }
}

/// Mass of the measure ν^j restricted by an exponential weight in the
/// overshoot variable:
/// ν(rate) = ∫_0^∞ e^{−h·rate} ∫_0^a R_a^{(q)}(dy) Λ(y − a − dh).
/// `rate = 0` gives the ν⁰ mass of the sextuple decomposition; at
/// `rate = λ(a,q)` it is the ν¹ mass entering the overshoot transform.
pub fn nu_mass(engine: &ScaleEngine, q: f64, a: f64, rate: f64) -> Result<f64> {
    if !(a > 0.0 && q >= 0.0 && rate >= 0.0) {
        return Err(Error::invalid("nu_mass requires a > 0, q >= 0, rate >= 0"));
    }
    if !engine.spec().has_jumps() {
        return Ok(0.0);
    }
    let lam_inv = 1.0 / engine.lambda_ratio(q, a)?;
    let rdens = |y: f64| -> f64 {
        let wp = engine.w_prime_right(q, y).unwrap_or(f64::NAN);
        lam_inv * wp - engine.w(q, y).unwrap_or(f64::NAN)
    };
    let tail = |y: f64| weighted_jump_tail(engine, a, y, rate).unwrap_or(f64::NAN);

    let stable_like = matches!(
        engine.spec().family(),
        crate::process::Family::StableNeg { .. } | crate::process::Family::StableDrift { .. }
    );
    let density_part = if stable_like {
        // Integrable endpoint singularities at both ends: the resolvent
        // density behaves like y^{α−2} at 0, and the jump tail like
        // (a−y)^{−α} at a (where the density itself vanishes linearly).
        let alpha = match *engine.spec().family() {
            crate::process::Family::StableNeg { alpha, .. } => alpha,
            crate::process::Family::StableDrift { alpha, .. } => alpha,
            _ => unreachable!(),
        };
        let lower = quad::integrate_power_endpoint(
            |y| rdens(y) * tail(y),
            0.5 * a,
            alpha - 2.0,
            1e-8,
        )?;
        let upper = quad::integrate_power_endpoint(
            |s| rdens(a - s) * tail(a - s),
            0.5 * a,
            1.0 - alpha,
            1e-8,
        )?;
        lower + upper
    } else {
        quad::integrate(|y| rdens(y) * tail(y), 0.0, a, 1e-9)?
    };

    let atom = lam_inv * engine.w(q, 0.0)?;
    let atom_part = if atom > 0.0 { atom * tail(0.0) } else { 0.0 };
    Ok(density_part + atom_part)
}

/// The paper-level consistency constant
/// c(a) = ∫∫ R_a^{(0)}(dy) Λ(y−a−dh) + Δ^{(0)}(a), which must equal one.
pub fn normalization_c(engine: &ScaleEngine, a: f64) -> Result<f64> {
    let jump_mass = if engine.spec().has_jumps() {
        nu_mass(engine, 0.0, a, 0.0)?
    } else {
        0.0
    };
    Ok(jump_mass + delta_creep(engine, 0.0, a)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::ProcessSpec;
    use approx::assert_relative_eq;

    fn bm(mu: f64, sigma2: f64) -> ScaleEngine {
        ScaleEngine::closed(ProcessSpec::brownian(mu, sigma2).unwrap())
    }

    fn stable() -> ScaleEngine {
        ScaleEngine::closed(ProcessSpec::stable(1.5, 1.0).unwrap())
    }

    fn jde() -> ScaleEngine {
        ScaleEngine::closed(ProcessSpec::jump_diffusion(0.2, 1.0, 1.0, 2.0).unwrap())
    }

    #[test]
    fn exit_probabilities_reference() {
        let e = bm(0.0, 1.0);
        let q = ExitQuery::new(0.0, 2.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(exit_up(&e, &q).unwrap(), 0.5, max_relative = 1e-13);
        assert_relative_eq!(exit_down(&e, &q).unwrap(), 0.5, max_relative = 1e-12);
        // x = v exits at the top immediately.
        let top = ExitQuery::new(0.0, 2.0, 2.0, 0.7).unwrap();
        assert_relative_eq!(exit_up(&e, &top).unwrap(), 1.0, max_relative = 1e-12);
        // x = u with unbounded variation: exits below immediately.
        let bot = ExitQuery::new(0.0, 2.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(exit_up(&e, &bot).unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(exit_down(&e, &bot).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn exit_query_validation() {
        assert!(ExitQuery::new(1.0, 0.0, 0.5, 0.0).is_err());
        assert!(ExitQuery::new(0.0, 1.0, 2.0, 0.0).is_err());
        assert!(ExitQuery::new(0.0, 1.0, 0.5, -0.1).is_err());
    }

    proptest::proptest! {
        #[test]
        fn exit_up_down_complement_at_q0(
            idx in 0usize..3,
            x in 0.0f64..1.0,
            width in 0.5f64..3.0
        ) {
            let engines = [bm(-0.2, 1.0), stable(), jde()];
            let e = &engines[idx];
            let q = ExitQuery::new(0.0, width, x * width, 0.0).unwrap();
            let up = exit_up(e, &q).unwrap();
            let down = exit_down(e, &q).unwrap();
            proptest::prop_assert!((up + down - 1.0).abs() < 1e-10);
            proptest::prop_assert!((0.0..=1.0 + 1e-12).contains(&up));
        }

        #[test]
        fn exit_up_monotone_in_x(x1 in 0.05f64..0.95, x2 in 0.05f64..0.95) {
            let e = jde();
            let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
            let q1 = ExitQuery::new(0.0, 1.0, lo, 0.3).unwrap();
            let q2 = ExitQuery::new(0.0, 1.0, hi, 0.3).unwrap();
            proptest::prop_assert!(exit_up(&e, &q1).unwrap() <= exit_up(&e, &q2).unwrap() + 1e-12);
            proptest::prop_assert!(exit_down(&e, &q1).unwrap() >= exit_down(&e, &q2).unwrap() - 1e-12);
        }
    }

    #[test]
    fn creeping_identities() {
        // Pure-jump process never creeps.
        assert_eq!(creep_one_sided(&stable(), 0.0, 1.0, 0.5).unwrap(), 0.0);
        let q = ExitQuery::new(0.0, 2.0, 1.0, 0.0).unwrap();
        assert_eq!(creep_two_sided(&stable(), &q).unwrap(), 0.0);
        // Continuous paths: the boundary is hit by creeping, so at x = u the
        // transform is 1.
        assert_relative_eq!(creep_one_sided(&bm(0.3, 1.7), 0.5, 0.5, 0.0).unwrap(), 1.0, max_relative = 1e-12);
        // Drifted Brownian: creeping transform equals the hitting
        // probability e^{−2μ(x−u)/σ²}.
        assert_relative_eq!(
            creep_one_sided(&bm(1.0, 2.0), 0.0, 1.0, 0.0).unwrap(),
            (-1.0f64).exp(),
            max_relative = 1e-12
        );
        // All down-crossings of a diffusion creep: equals exit_down.
        let e = bm(0.0, 1.0);
        assert_relative_eq!(
            creep_two_sided(&e, &q).unwrap(),
            exit_down(&e, &q).unwrap(),
            max_relative = 1e-11
        );
        // Mixed jump diffusion: creeping is a strict part of exit_down.
        let ej = jde();
        let cr = creep_two_sided(&ej, &q).unwrap();
        assert!(cr > 0.0 && cr < exit_down(&ej, &q).unwrap());
    }

    #[test]
    fn taua_reference_values() {
        let e = bm(0.0, 1.0);
        assert_relative_eq!(taua_laplace(&e, 0.0, 1.0).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(
            taua_laplace(&e, 0.5, 1.0).unwrap(),
            0.648_054_273_663_885_4,
            max_relative = 1e-12
        );
        // Laplace transforms decrease in q and stay in (0, 1].
        let mut prev = 1.0;
        for i in 1..=10 {
            let v = taua_laplace(&e, 0.3 * i as f64, 1.0).unwrap();
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
    }

    #[test]
    fn taua_completely_monotone_differences() {
        // Successive finite differences alternate in sign on a q-grid.
        let e = jde();
        let h = 0.25;
        let vals: Vec<f64> = (0..12)
            .map(|i| taua_laplace(&e, 0.1 + h * i as f64, 1.0).unwrap())
            .collect();
        let d1: Vec<f64> = vals.windows(2).map(|w| w[1] - w[0]).collect();
        let d2: Vec<f64> = d1.windows(2).map(|w| w[1] - w[0]).collect();
        let d3: Vec<f64> = d2.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(d1.iter().all(|&v| v < 0.0));
        assert!(d2.iter().all(|&v| v > 0.0));
        assert!(d3.iter().all(|&v| v < 0.0));
    }

    #[test]
    fn resolvent_reference_and_mass() {
        let e = bm(0.0, 1.0);
        let r = resolvent_density(&e, 0.0, 1.0, 0.5).unwrap();
        assert_relative_eq!(r.density, 1.0, max_relative = 1e-11);
        assert_relative_eq!(r.atom_at_zero, 0.0, epsilon = 1e-12);
        // ∫ density + atom = λ⁻¹ W(a) − ∫_0^a W.
        let lam_inv = 1.0 / e.lambda_ratio(0.0, 1.0).unwrap();
        let mass = quad::integrate(|y| resolvent_density(&e, 0.0, 1.0, y).unwrap().density, 0.0, 1.0, 1e-11)
            .unwrap()
            + r.atom_at_zero;
        let expect = lam_inv * e.w(0.0, 1.0).unwrap() - e.w_int(0.0, 1.0).unwrap();
        assert_relative_eq!(mass, expect, max_relative = 1e-9);
        assert!(mass >= 0.0);
        // Bounded variation carries an atom at zero.
        let ebv = ScaleEngine::closed(ProcessSpec::jump_diffusion(0.5, 0.0, 1.0, 2.0).unwrap());
        let rbv = resolvent_density(&ebv, 0.3, 1.0, 0.0).unwrap();
        assert!(rbv.atom_at_zero > 0.0);
    }

    #[test]
    fn delta_creep_values() {
        assert_eq!(delta_creep(&stable(), 0.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(delta_creep(&bm(0.0, 1.0), 0.0, 1.0).unwrap(), 1.0, max_relative = 1e-12);
        // Creeping is certain for continuous paths at q = 0, any drift.
        assert_relative_eq!(delta_creep(&bm(0.7, 1.3), 0.0, 2.0).unwrap(), 1.0, max_relative = 1e-11);
        let d = delta_creep(&jde(), 0.0, 1.0).unwrap();
        assert!(d > 0.0 && d < 1.0);
    }

    #[test]
    fn normalization_is_one() {
        assert_relative_eq!(normalization_c(&bm(0.4, 1.1), 1.0).unwrap(), 1.0, max_relative = 1e-11);
        assert_relative_eq!(normalization_c(&jde(), 1.0).unwrap(), 1.0, max_relative = 1e-4);
        assert_relative_eq!(normalization_c(&stable(), 1.0).unwrap(), 1.0, max_relative = 1e-3);
    }

    #[test]
    fn nu_masses_decompose_taua() {
        // ν⁰(0,∞) + Δ^{(q)}(a) = E[e^{−qτ_a}].
        for q in [0.0, 0.5] {
            let e = jde();
            let lhs = nu_mass(&e, q, 1.0, 0.0).unwrap() + delta_creep(&e, q, 1.0).unwrap();
            assert_relative_eq!(lhs, taua_laplace(&e, q, 1.0).unwrap(), max_relative = 1e-4);
        }
        let es = stable();
        let lhs = nu_mass(&es, 0.2, 1.0, 0.0).unwrap();
        assert_relative_eq!(lhs, taua_laplace(&es, 0.2, 1.0).unwrap(), max_relative = 1e-3);
    }
}
