//! The drawdown first-passage laws: the sextuple law of the drawdown process
//! (time, last-supremum time, supremum, infimum, undershoot, overshoot), the
//! quadruple law of the rally process, and their marginals — all expressed
//! through scale functions.
//!
//! Densities are the canonical surface: the resolvent factor is read in
//! density form with the atom at zero reported separately, and the creeping
//! event carries its own term. Queries violating the parameter restrictions
//! are legal and return zero mass.

use crate::error::{Error, Result};
use crate::fluctuation;
use crate::quad;
use crate::scale::{ScaleEngine, Side};
use std::io::Write;

/// Joint query for the sextuple law. `u = None` encodes an unrestricted
/// infimum (u = −∞); `v` is the supremum coordinate, `y` the position just
/// before the crossing, `h` the overshoot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SextupleQuery {
    pub x: f64,
    pub a: f64,
    pub q: f64,
    pub r: f64,
    pub u: Option<f64>,
    pub v: f64,
    pub y: f64,
    pub h: f64,
}

impl SextupleQuery {
    pub fn new(x: f64, a: f64, q: f64, r: f64, u: Option<f64>, v: f64, y: f64, h: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::invalid("sextuple query requires a > 0"));
        }
        if !(q >= 0.0 && r >= 0.0) {
            return Err(Error::invalid("sextuple query requires q, r >= 0"));
        }
        Ok(SextupleQuery { x, a, q, r, u, v, y, h })
    }

    // Parameter restrictions of the sextuple law; outside them the law
    // carries no mass.
    fn in_support(&self, with_overshoot: bool) -> bool {
        let base = match self.u {
            Some(u) => {
                if !(u <= self.x) {
                    return false;
                }
                self.x.max(u + self.a)
            }
            None => self.x,
        };
        if self.v < base {
            return false;
        }
        if with_overshoot {
            if !(self.y >= 0.0 && self.y <= self.a) {
                return false;
            }
            if self.h <= 0.0 {
                return false;
            }
            if let Some(u) = self.u {
                if self.h > self.v - u - self.a {
                    return false;
                }
            }
        }
        true
    }

    fn f_argument(&self) -> f64 {
        let base = match self.u {
            Some(u) => self.x.max(u + self.a),
            None => self.x,
        };
        self.v - base
    }
}

/// A factored law evaluation: the value together with its named
/// multiplicative components, whose product reproduces the value.
#[derive(Debug, Clone)]
pub struct LawValue {
    pub value: f64,
    pub components: Vec<(&'static str, f64)>,
}

impl LawValue {
    fn from_components(components: Vec<(&'static str, f64)>) -> Self {
        let value = components.iter().map(|(_, v)| v).product();
        LawValue { value, components }
    }

    fn zero() -> Self {
        LawValue {
            value: 0.0,
            components: vec![("support", 0.0)],
        }
    }
}

// Common factor F_{q+r,q,a}(w) = λ(a,q) e^{−w λ(a,q+r)}.
fn f_factor(engine: &ScaleEngine, a: f64, q: f64, r: f64, w: f64) -> Result<f64> {
    let lam_q = engine.lambda_ratio(q, a)?;
    let lam_qr = if r == 0.0 { lam_q } else { engine.lambda_ratio(q + r, a)? };
    Ok(lam_q * (-w * lam_qr).exp())
}

fn entry_factor(engine: &ScaleEngine, query: &SextupleQuery) -> Result<f64> {
    match query.u {
        None => Ok(1.0),
        Some(u) => {
            let num = engine.w(query.q + query.r, (query.x - u).min(query.a))?;
            let den = engine.w(query.q + query.r, query.a)?;
            Ok(num / den)
        }
    }
}

/// Joint density in (v, y, h) of the overshoot part of the sextuple law,
/// with the time pair (τ_a, Ḡ_{τ_a}) transformed at rates (q, r).
pub fn sextuple_overshoot_density(engine: &ScaleEngine, query: &SextupleQuery) -> Result<LawValue> {
    if !query.in_support(true) {
        return Ok(LawValue::zero());
    }
    if !engine.spec().has_jumps() {
        // No jump part: the overshoot law is identically zero.
        return Ok(LawValue {
            value: 0.0,
            components: vec![
                ("entry_factor", entry_factor(engine, query)?),
                ("F_factor", f_factor(engine, query.a, query.q, query.r, query.f_argument())?),
                ("jump_factor", 0.0),
            ],
        });
    }
    let entry = entry_factor(engine, query)?;
    let f = f_factor(engine, query.a, query.q, query.r, query.f_argument())?;
    let res = fluctuation::resolvent_density(engine, query.q, query.a, query.y)?;
    let jump = engine.spec().levy_density(query.y - query.a - query.h)?;
    Ok(LawValue::from_components(vec![
        ("entry_factor", entry),
        ("F_factor", f),
        ("resolvent_factor", res.density),
        ("jump_factor", jump),
    ]))
}

/// Density in v of the creeping part of the sextuple law (the overshoot
/// coordinates are ignored); zero without a Gaussian component.
pub fn sextuple_creep_density(engine: &ScaleEngine, query: &SextupleQuery) -> Result<LawValue> {
    if !query.in_support(false) {
        return Ok(LawValue::zero());
    }
    let delta = fluctuation::delta_creep(engine, query.q, query.a)?;
    if delta == 0.0 {
        return Ok(LawValue {
            value: 0.0,
            components: vec![("creep_factor", 0.0)],
        });
    }
    let entry = entry_factor(engine, query)?;
    let f = f_factor(engine, query.a, query.q, query.r, query.f_argument())?;
    Ok(LawValue::from_components(vec![
        ("entry_factor", entry),
        ("F_factor", f),
        ("creep_factor", delta),
    ]))
}

/// P(x − X̲_{τ_a−} ≤ z) = W(z ∧ a)/W(a).
pub fn min_before_tau_cdf(engine: &ScaleEngine, a: f64, z: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::invalid("min_before_tau_cdf requires a > 0"));
    }
    if z < 0.0 {
        return Ok(0.0);
    }
    Ok(engine.w(0.0, z.min(a))? / engine.w(0.0, a)?)
}

/// P(X̄_{τ_a} − x ≥ z) = exp(−z W'_+(a)/W(a)).
pub fn sup_at_tau_ccdf(engine: &ScaleEngine, a: f64, z: f64) -> Result<f64> {
    if !(a > 0.0 && z >= 0.0) {
        return Err(Error::invalid("sup_at_tau_ccdf requires a > 0 and z >= 0"));
    }
    Ok((-z * engine.lambda_ratio(0.0, a)?).exp())
}

/// The quadruple-law transform of the rally process:
/// E_x[e^{−q τ̂_a − r G̲_{τ̂_a} + u X̲_{τ̂_a}}; X̄_{τ̂_a} < v]
/// = (W^{(q+r)}(a)/W^{(q)}(a)) [e^{−u(a−x)} Z_u^{(p)}(a+x−v)/Z_u^{(p)}(a)
///   − e^{−u(a−v)} W^{(q+r)}(a+x−v)/W^{(q+r)}(a)], with p = q + r − ψ(u).
pub fn quadruple_transform(
    engine: &ScaleEngine,
    x: f64,
    a: f64,
    q: f64,
    r: f64,
    u: f64,
    v: f64,
) -> Result<f64> {
    if !(a > 0.0 && q >= 0.0 && r >= 0.0 && u >= 0.0 && v >= 0.0) {
        return Err(Error::invalid(
            "quadruple_transform requires a > 0 and q, r, u, v >= 0",
        ));
    }
    let p = q + r - engine.spec().psi(u);
    let w_qr_a = engine.w(q + r, a)?;
    let ratio = w_qr_a / engine.w(q, a)?;
    let arg = a + x - v;
    let z_num = engine.z_tilted(u, p, arg)?;
    let z_den = engine.z_tilted(u, p, a)?;
    let w_num = engine.w(q + r, arg)?;
    Ok(ratio * ((-u * (a - x)).exp() * z_num / z_den - (-u * (a - v)).exp() * w_num / w_qr_a))
}

/// E[e^{−q τ̂_a + u X̲_{τ̂_a}}] = e^{−au} / Z_u^{(q−ψ(u))}(a).
pub fn hat_tau_joint_min_laplace(engine: &ScaleEngine, a: f64, q: f64, u: f64) -> Result<f64> {
    if !(a > 0.0 && q >= 0.0 && u >= 0.0) {
        return Err(Error::invalid(
            "hat_tau_joint_min_laplace requires a > 0 and q, u >= 0",
        ));
    }
    let p = q - engine.spec().psi(u);
    Ok((-a * u).exp() / engine.z_tilted(u, p, a)?)
}

/// cdf of X̄_{τ̂_a} − x: P(X̄_{τ̂_a} − x ≤ z) = 1 − W((a−z) ∧ a)/W(a); the
/// only possible atom sits at z = a with mass W(0)/W(a).
pub fn max_at_hat_tau_cdf(engine: &ScaleEngine, a: f64, z: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::invalid("max_at_hat_tau_cdf requires a > 0"));
    }
    Ok(1.0 - engine.w(0.0, (a - z).min(a))? / engine.w(0.0, a)?)
}

/// Joint transform of the drawdown passage time and overshoot:
/// E[e^{−q τ_a − θ(Y_{τ_a} − a)}]
/// = e^{θa}(1 − θ/λ(a,q)) Z_θ^{(q−ψ(θ))}(a) + (ψ(θ) − q) W^{(q)}(a)/λ(a,q).
///
/// Derived through the Esscher tilt at θ: under the tilted measure the pair
/// (τ_a, X̄_{τ_a}) factorizes into the tilted passage transform and an
/// exponential supremum with rate λ(a,q) − θ; undoing the tilt produces the
/// expression above, which is free of 0/0 at θ = λ(a,q).
pub fn tau_overshoot_laplace(engine: &ScaleEngine, a: f64, q: f64, theta: f64) -> Result<f64> {
    if !(a > 0.0 && q >= 0.0 && theta >= 0.0) {
        return Err(Error::invalid(
            "tau_overshoot_laplace requires a > 0 and q, theta >= 0",
        ));
    }
    let lam = engine.lambda_ratio(q, a)?;
    let p = q - engine.spec().psi(theta);
    let z_t = engine.z_tilted(theta, p, a)?;
    Ok((theta * a).exp() * (1.0 - theta / lam) * z_t - p * engine.w(q, a)? / lam)
}

/// M_{q,a}: the overshoot transform at the self-consistent rate λ(a,q),
/// where the tilted Z-term of [`tau_overshoot_laplace`] drops out:
/// M_{q,a} = (ψ(λ(a,q)) − q) W^{(q)}(a)² / W^{(q)'}_+(a).
pub fn m_factor(engine: &ScaleEngine, a: f64, q: f64) -> Result<f64> {
    if !(a > 0.0 && q >= 0.0) {
        return Err(Error::invalid("m_factor requires a > 0, q >= 0"));
    }
    let lam = engine.lambda_ratio(q, a)?;
    let w = engine.w(q, a)?;
    let wp = engine.w_prime(q, a, Side::Right)?;
    Ok((engine.spec().psi(lam) - q) * w * w / wp)
}

/// E[e^{−q τ_a}; Ŷ_{τ_a} > b]
/// = e^{−b λ(a,q)} [1 − λ(a,q) ∫_0^a W^{(q)}/W^{(q)}(a)] M_{q,a}.
pub fn joint_tau_hat_y(engine: &ScaleEngine, a: f64, q: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && q >= 0.0 && b >= 0.0) {
        return Err(Error::invalid("joint_tau_hat_y requires a > 0, q >= 0, b >= 0"));
    }
    let lam = engine.lambda_ratio(q, a)?;
    let frac = lam * engine.w_int(q, a)? / engine.w(q, a)?;
    Ok((-b * lam).exp() * (1.0 - frac) * m_factor(engine, a, q)?)
}

/// Atom of Ŷ_{τ_a} at zero: P[Ŷ_{τ_a} = 0] = 1 − (1 − λ(a,0)∫W/W(a)) M_{0,a}.
pub fn hat_y_atom(engine: &ScaleEngine, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::invalid("hat_y_atom requires a > 0"));
    }
    let lam = engine.lambda_ratio(0.0, a)?;
    let frac = lam * engine.w_int(0.0, a)? / engine.w(0.0, a)?;
    Ok(1.0 - (1.0 - frac) * m_factor(engine, a, 0.0)?)
}

/// Atom of Y_{τ̂_a} at zero: P[Y_{τ̂_a} = 0] = 1 − W'_+(a)/W(a)² ∫_0^a W.
pub fn y_at_hat_tau_atom(engine: &ScaleEngine, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::invalid("y_at_hat_tau_atom requires a > 0"));
    }
    let lam = engine.lambda_ratio(0.0, a)?;
    Ok(1.0 - lam * engine.w_int(0.0, a)? / engine.w(0.0, a)?)
}

/// E[e^{−q τ̂_a − θ Y_{τ̂_a}}]
/// = 1 − ((q − ψ(θ)) e^{−aθ}/Z_θ^{(q−ψ(θ))}(a) + θ/W^{(q)}(a)) ∫_0^a W^{(q)}.
pub fn hat_tau_y_joint_laplace(engine: &ScaleEngine, a: f64, q: f64, theta: f64) -> Result<f64> {
    if !(a > 0.0 && q >= 0.0 && theta >= 0.0) {
        return Err(Error::invalid(
            "hat_tau_y_joint_laplace requires a > 0 and q, theta >= 0",
        ));
    }
    let p = q - engine.spec().psi(theta);
    let z_t = engine.z_tilted(theta, p, a)?;
    let term = p * (-a * theta).exp() / z_t + theta / engine.w(q, a)?;
    Ok(1.0 - term * engine.w_int(q, a)?)
}

/// Alternative route to the same transform through the semi-infinite scale
/// integrals, valid for θ > Φ(q):
/// 1 − [∫_0^∞ e^{−θz} W'_+(a+z) dz / ∫_0^∞ e^{−θz} W(a+z) dz] ∫_0^a W / W(a).
pub fn hat_tau_y_joint_laplace_alt(
    engine: &ScaleEngine,
    a: f64,
    q: f64,
    theta: f64,
) -> Result<f64> {
    let phi = engine.spec().phi(q)?;
    if !(theta > phi) {
        return Err(Error::invalid(format!(
            "alternative transform requires theta > Phi(q) = {phi}"
        )));
    }
    let rate = theta - phi;
    let scale_hint = engine.w(q, a)?.max(1.0);
    let num = quad::integrate_to_inf(
        |z| (-theta * z).exp() * engine.w_prime(q, a + z, Side::Right).unwrap_or(f64::NAN),
        0.0,
        rate,
        1e-9 * scale_hint,
    )?;
    let den = quad::integrate_to_inf(
        |z| (-theta * z).exp() * engine.w(q, a + z).unwrap_or(f64::NAN),
        0.0,
        rate,
        1e-9 * scale_hint,
    )?;
    Ok(1.0 - (num / den) * engine.w_int(q, a)? / engine.w(q, a)?)
}

/// Laplace transform in q of t ↦ P[τ_a < t, τ_a = G̲_{τ_a}] (the drawdown
/// time sets a new infimum). This is the complement, within
/// E[e^{−qτ_a}], of the strictly-positive part of the Ŷ_{τ_a} law.
pub fn time_laplace_new_min(engine: &ScaleEngine, a: f64, q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::invalid("time_laplace_new_min requires q > 0"));
    }
    let total = fluctuation::taua_laplace(engine, q, a)?;
    Ok((total - joint_tau_hat_y(engine, a, q, 0.0)?) / q)
}

/// Laplace transform in q of t ↦ P[τ̂_a < t, τ̂_a = Ḡ_{τ̂_a}] (the rally
/// time sets a new supremum):
/// q⁻¹ {1 − λ(a,q) ∫_0^a W^{(q)}/W^{(q)}(a)}.
pub fn time_laplace_new_max(engine: &ScaleEngine, a: f64, q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::invalid("time_laplace_new_max requires q > 0"));
    }
    let lam = engine.lambda_ratio(q, a)?;
    Ok((1.0 - lam * engine.w_int(q, a)? / engine.w(q, a)?) / q)
}

/// Batch CSV export of sextuple-law evaluations: one row per query with the
/// query coordinates, the factored components and the value.
pub fn export_law_csv<W: Write>(
    engine: &ScaleEngine,
    queries: &[SextupleQuery],
    out: &mut W,
) -> Result<()> {
    let header = "x,a,q,r,u,v,y,h,kind,entry_factor,F_factor,resolvent_factor,jump_or_creep_factor,value";
    writeln!(out, "{header}").map_err(|e| Error::Numerical(e.to_string()))?;
    let mut write_row = |q: &SextupleQuery, kind: &str, law: &LawValue| -> Result<()> {
        let find = |name: &str| {
            law.components
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| *v)
                .unwrap_or(f64::NAN)
        };
        let u_str = q.u.map_or("-inf".to_string(), |u| u.to_string());
        let tailname = if kind == "overshoot" { "jump_factor" } else { "creep_factor" };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            q.x,
            q.a,
            q.q,
            q.r,
            u_str,
            q.v,
            q.y,
            q.h,
            kind,
            find("entry_factor"),
            find("F_factor"),
            find("resolvent_factor"),
            find(tailname),
            law.value
        )
        .map_err(|e| Error::Numerical(e.to_string()))
    };
    for q in queries {
        let over = sextuple_overshoot_density(engine, q)?;
        write_row(q, "overshoot", &over)?;
        let creep = sextuple_creep_density(engine, q)?;
        write_row(q, "creep", &creep)?;
    }
    Ok(())
}
