//! Exponential-Levy risk analytics: the price S = S0·e^X, relative
//! drawdown/rally levels mapped through a = −log(1−α), b = log(1+β), and
//! the four desk quantities — probability of a new minimum at the first
//! drawdown epoch, probability of a new maximum at the first rally epoch,
//! the expected drawdown size at that epoch, and the probability that a
//! drawdown precedes a rally — each with closed-form, Laplace-inversion and
//! Monte Carlo routes as appropriate.

use crate::drawdown;
use crate::error::{Error, Result};
use crate::laplace::{self, InversionConfig};
use crate::mc;
use crate::process::{Family, ProcessSpec};
use crate::quad;
use crate::scale::ScaleEngine;
use crate::special::{self, SeriesTolerance};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Exponential-Levy price model S_t = S0 · exp(X_t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceModel {
    pub spec: ProcessSpec,
    pub s0: f64,
}

impl PriceModel {
    pub fn new(spec: ProcessSpec, s0: f64) -> Result<Self> {
        if !(s0 > 0.0) {
            return Err(Error::invalid("PriceModel requires S0 > 0"));
        }
        Ok(PriceModel { spec, s0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Horizon {
    Infinite,
    Finite(f64),
}

impl Horizon {
    fn finite(&self) -> Option<f64> {
        match self {
            Horizon::Infinite => None,
            Horizon::Finite(t) => Some(*t),
        }
    }
}

/// A relative drawdown/drawup query: drawdown fraction α ∈ (0,1), drawup
/// fraction β > 0, and the time horizon. The log-levels are
/// a = −log(1−α) and b = log(1+β).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskQuery {
    pub alpha: f64,
    pub beta: f64,
    pub horizon: Horizon,
}

impl RiskQuery {
    pub fn new(alpha: f64, beta: f64, horizon: Horizon) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1)"));
        }
        if !(beta > 0.0) {
            return Err(Error::invalid("beta must be positive"));
        }
        if let Horizon::Finite(t) = horizon {
            if !(t > 0.0) {
                return Err(Error::invalid("finite horizon must be positive"));
            }
        }
        Ok(RiskQuery { alpha, beta, horizon })
    }

    pub fn drawdown_only(alpha: f64, horizon: Horizon) -> Result<Self> {
        Self::new(alpha, 1.0, horizon)
    }

    /// Log drawdown level a = −log(1−α).
    pub fn a(&self) -> f64 {
        -(1.0 - self.alpha).ln()
    }

    /// Log drawup level b = log(1+β).
    pub fn b(&self) -> f64 {
        self.beta.ln_1p()
    }
}

/// Output record of a risk query.
#[derive(Debug, Clone, Serialize)]
pub struct RiskReport {
    pub quantity: String,
    pub query: RiskQuery,
    pub value: f64,
    pub error_estimate: f64,
    pub method: String,
    pub evaluations: usize,
}

/// Numerical configuration bundle for the analytics layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    pub inversion: InversionConfig,
    pub series: SeriesTolerance,
    pub sim: mc::SimConfig,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            inversion: InversionConfig::new(crate::laplace::InversionMethod::EulerSummation, 41, 10)
                .expect("valid default"),
            series: SeriesTolerance::default(),
            sim: mc::SimConfig::default(),
        }
    }
}

/// The analytics front end for one price model.
pub struct RiskAnalytics {
    model: PriceModel,
    engine: ScaleEngine,
    numerics: Numerics,
}

impl RiskAnalytics {
    pub fn new(model: PriceModel, numerics: Numerics) -> Result<Self> {
        let engine = ScaleEngine::closed(model.spec).with_tolerance(numerics.series);
        Ok(RiskAnalytics { model, engine, numerics })
    }

    pub fn with_defaults(model: PriceModel) -> Result<Self> {
        Self::new(model, Numerics::default())
    }

    pub fn engine(&self) -> &ScaleEngine {
        &self.engine
    }

    pub fn model(&self) -> &PriceModel {
        &self.model
    }

    pub fn numerics(&self) -> &Numerics {
        &self.numerics
    }

    // ---- complex-q building blocks shared by the inversion routes ----

    fn taua_c(&self, q: Complex64, a: f64) -> Result<Complex64> {
        self.engine.taua_transform_c(q, a)
    }

    // 1 − E[e^{−qτ_a}] without cancellation at either end of the q-range:
    // for small |q| through the exact algebra q(W²/W' − ∫W).
    fn one_minus_taua_c(&self, q: Complex64, a: f64) -> Result<Complex64> {
        if q.norm() <= 0.5 {
            let w = self.engine.w_c(q, a)?;
            let wp = self.engine.w_prime_c(q, a)?;
            Ok(q * (w * w / wp - self.engine.w_int_c(q, a)?))
        } else {
            Ok(1.0 - self.taua_c(q, a)?)
        }
    }

    // Laplace transform (in q) of t ↦ P[τ_a < t, τ_a = G̲_{τ_a}]. The
    // λ-tilted overshoot factor combines with the exponential Ŷ-law into
    // taua/q − (1 − taua)(ψ(λ) − q)/q², λ = W'_+(a)/W(a).
    fn new_min_transform_c(&self, q: Complex64, a: f64) -> Result<Complex64> {
        let lam = self.engine.w_prime_c(q, a)? / self.engine.w_c(q, a)?;
        let taua = self.taua_c(q, a)?;
        let one_minus = self.one_minus_taua_c(q, a)?;
        Ok(taua / q - one_minus * (self.model.spec.psi_c(lam) - q) / (q * q))
    }

    // Laplace transform (in q) of t ↦ P[τ̂_b < t, τ̂_b = Ḡ_{τ̂_b}]:
    // algebraically λ(1 − E[e^{−qτ_b}])/(q² W^{(q)}(b)).
    fn new_max_transform_c(&self, q: Complex64, b: f64) -> Result<Complex64> {
        let w = self.engine.w_c(q, b)?;
        let lam = self.engine.w_prime_c(q, b)? / w;
        Ok(lam * self.one_minus_taua_c(q, b)? / (q * q * w))
    }

    // Z_θ^{(q−ψ(θ))}(x) for complex (θ, q).
    fn z_theta_c(&self, theta: Complex64, q: Complex64, x: f64) -> Result<Complex64> {
        let p = q - self.model.spec.psi_c(theta);
        self.engine.z_tilted_c(theta, p, q, x)
    }

    /// Probability that the price attains a new all-time minimum at the
    /// first (100α)% drawdown, on {D_α < T}.
    pub fn prob_new_min_at_drawdown(&self, query: &RiskQuery) -> Result<RiskReport> {
        let a = query.a();
        match query.horizon.finite() {
            None => {
                let value = drawdown::hat_y_atom(&self.engine, a)?;
                Ok(self.report("prob_new_min_at_drawdown", query, value, 1e-10, "scale-fn", 4))
            }
            Some(t) => {
                let inv = laplace::invert(|q| self.new_min_transform_c(q, a), t, &self.numerics.inversion)?;
                Ok(self.report(
                    "prob_new_min_at_drawdown",
                    query,
                    inv.value,
                    inv.error_estimate,
                    "laplace-inversion",
                    inv.evaluations,
                ))
            }
        }
    }

    /// Probability that the price attains a new all-time maximum at the
    /// first (100β)% rally, on {U_β < T}.
    pub fn prob_new_max_at_drawup(&self, query: &RiskQuery) -> Result<RiskReport> {
        let b = query.b();
        match query.horizon.finite() {
            None => {
                let value = drawdown::y_at_hat_tau_atom(&self.engine, b)?;
                Ok(self.report("prob_new_max_at_drawup", query, value, 1e-10, "scale-fn", 3))
            }
            Some(t) => {
                let inv = laplace::invert(|q| self.new_max_transform_c(q, b), t, &self.numerics.inversion)?;
                Ok(self.report(
                    "prob_new_max_at_drawup",
                    query,
                    inv.value,
                    inv.error_estimate,
                    "laplace-inversion",
                    inv.evaluations,
                ))
            }
        }
    }

    /// Expected absolute drawdown of the price at D_α on {D_α < T}:
    /// E[(S̄_{D_α} − S_{D_α}) 1{D_α < T}].
    pub fn expected_drawdown_at_d(&self, query: &RiskQuery) -> Result<RiskReport> {
        let t = query.horizon.finite().ok_or_else(|| {
            Error::invalid("expected_drawdown_at_d requires a finite horizon")
        })?;
        let a = query.a();
        let psi1 = self.model.spec.psi(1.0);
        // The q-contour must run strictly right of ψ(1).
        let shift = psi1.max(0.0) + 1.0;
        let s0 = self.model.s0;
        let transform = |q: Complex64| -> Result<Complex64> {
            let lam = self.engine.w_prime_c(q, a)? / self.engine.w_c(q, a)?;
            let h = |x: f64| 1.0 - (1.0 - psi1 / q) * (-x).exp();
            let p = self.w_endpoint_power();
            let i1 = quad::integrate_power_endpoint_c(
                |x| h(x) * self.engine.w_c(q, x).unwrap_or(Complex64::new(f64::NAN, 0.0)),
                a,
                p,
                1e-10,
            )?;
            // Stieltjes part: ∫ h dW = ∫ h W' dx + h(0) W(0+).
            let i2 = quad::integrate_power_endpoint_c(
                |x| h(x) * self.engine.w_prime_c(q, x).unwrap_or(Complex64::new(f64::NAN, 0.0)),
                a,
                (p - 1.0).max(-0.5),
                1e-10,
            )? + h(0.0) * self.engine.w_c(q, 0.0)?;
            let one = Complex64::new(1.0, 0.0);
            Ok(lam / (lam - 1.0) * i1 * s0 - (i2 - one / q) * s0 / (lam - 1.0))
        };
        let inv = laplace::invert_shifted(transform, t, shift, &self.numerics.inversion)?;
        Ok(self.report(
            "expected_drawdown_at_d",
            query,
            inv.value,
            inv.error_estimate,
            "laplace-inversion",
            inv.evaluations,
        ))
    }

    fn w_endpoint_power(&self) -> f64 {
        match *self.model.spec.family() {
            Family::StableNeg { alpha, .. } if alpha < 2.0 => alpha - 1.0,
            Family::StableDrift { alpha, .. } => alpha - 1.0,
            _ => 1.0,
        }
    }

    /// Probability that a (100α)% drawdown happens before a (100β)% rally.
    ///
    /// Infinite horizon: one report with P[τ_a < τ̂_b] = 1 − P[Y_{τ̂_b} ≤ a−b]
    /// (requires a ≥ b). Finite horizon: the transform of
    /// P[τ̂_b < τ_a ∧ t] is inverted for the rally-first probability, the
    /// drawdown-time distribution gives P[τ_a < T], and — because those two
    /// do not determine P[τ_a < τ̂_b, τ_a < T] — a clearly-labelled
    /// simulation estimate of the drawdown-first probability completes the
    /// answer.
    pub fn drawdown_before_rally(&self, query: &RiskQuery) -> Result<Vec<RiskReport>> {
        let a = query.a();
        let b = query.b();
        let same_level = (a - b).abs() <= 1e-12 * a.max(1.0);
        if a < b && !same_level {
            return Err(Error::invalid(
                "drawdown_before_rally requires a >= b (drawdown at least as large as the rally in log scale)",
            ));
        }
        match query.horizon.finite() {
            None => {
                let report = if same_level {
                    let value = 1.0 - drawdown::y_at_hat_tau_atom(&self.engine, a)?;
                    self.report("prob_dd_before_rally", query, value, 1e-10, "scale-fn", 3)
                } else {
                    let phi0 = self.model.spec.phi(0.0)?;
                    let w_b = self.engine.w(0.0, b)?;
                    let int_w = self.engine.w_int(0.0, b)?;
                    let transform = |theta: Complex64| -> Result<Complex64> {
                        let z_t = self.engine.z_theta0_c(theta, b)?;
                        let psi_t = self.model.spec.psi_c(theta);
                        let term = psi_t * (-b * theta).exp() / z_t - theta / w_b;
                        Ok((1.0 + term * int_w) / theta)
                    };
                    // The stable-drift series form needs the contour right
                    // of (|mu|/sigma^alpha)^{1/(alpha-1)}.
                    let shift = match *self.model.spec.family() {
                        Family::StableDrift { mu, sigma, alpha } if mu != 0.0 => {
                            (phi0 + 1.0).max(((mu.abs() / sigma.powf(alpha)) / 0.8).powf(1.0 / (alpha - 1.0)))
                        }
                        _ => phi0 + 1.0,
                    };
                    let inv = laplace::invert_shifted(transform, a - b, shift, &self.numerics.inversion)?;
                    self.report(
                        "prob_dd_before_rally",
                        query,
                        1.0 - inv.value,
                        inv.error_estimate,
                        "laplace-inversion",
                        inv.evaluations,
                    )
                };
                Ok(vec![report])
            }
            Some(t) => {
                let mut reports = Vec::new();
                // Rally-first within the horizon.
                let rally_first = if same_level {
                    let inv = laplace::invert(|q| self.new_max_transform_c(q, b), t, &self.numerics.inversion)?;
                    self.report(
                        "prob_rally_before_dd_within_horizon",
                        query,
                        inv.value,
                        inv.error_estimate,
                        "laplace-inversion",
                        inv.evaluations,
                    )
                } else {
                    let transform = |theta: Complex64, q: Complex64| -> Result<Complex64> {
                        let z_t = self.z_theta_c(theta, q, b)?;
                        let psi_t = self.model.spec.psi_c(theta);
                        let w_b = self.engine.w_c(q, b)?;
                        let int_w = self.engine.w_int_c(q, b)?;
                        let term = (psi_t - q) * (-b * theta).exp() / z_t - theta / w_b;
                        Ok((1.0 + term * int_w) / (q * theta))
                    };
                    let inv = laplace::invert_2d(transform, a - b, t, &self.numerics.inversion)?;
                    self.report(
                        "prob_rally_before_dd_within_horizon",
                        query,
                        inv.value,
                        inv.error_estimate,
                        "laplace-inversion-2d",
                        inv.evaluations,
                    )
                };
                reports.push(rally_first);
                // Drawdown within the horizon.
                let inv = laplace::invert(|q| Ok(self.taua_c(q, a)? / q), t, &self.numerics.inversion)?;
                reports.push(self.report(
                    "prob_dd_within_horizon",
                    query,
                    inv.value,
                    inv.error_estimate,
                    "laplace-inversion",
                    inv.evaluations,
                ));
                // Drawdown-first within the horizon: not determined by the
                // transforms above; estimated by simulation.
                let sim = self.numerics.sim;
                let levels = mc::Levels::new(a, b)?;
                let est = mc::estimate_many(
                    &self.model.spec,
                    &sim,
                    levels,
                    &[&|p: &mc::PathFunctionals| {
                        if p.tau_a < p.hat_tau_b && p.tau_a < t {
                            1.0
                        } else {
                            0.0
                        }
                    }],
                )
                .remove(0);
                reports.push(self.report(
                    "prob_dd_before_rally_within_horizon",
                    query,
                    est.value,
                    est.std_error,
                    "simulation",
                    est.n,
                ));
                Ok(reports)
            }
        }
    }

    /// Joint cdf P[Y_{τ̂_b} ≤ u, τ̂_b < t] of the drawdown position at the
    /// rally passage and the passage time, by iterated Laplace inversion of
    /// its double transform.
    pub fn rally_drawdown_cdf(&self, b: f64, u: f64, t: f64) -> Result<RiskReport> {
        if !(b > 0.0 && u > 0.0 && t > 0.0) {
            return Err(Error::invalid("rally_drawdown_cdf requires b, u, t > 0"));
        }
        let transform = |theta: Complex64, q: Complex64| -> Result<Complex64> {
            let z_t = self.z_theta_c(theta, q, b)?;
            let psi_t = self.model.spec.psi_c(theta);
            let w_b = self.engine.w_c(q, b)?;
            let int_w = self.engine.w_int_c(q, b)?;
            let term = (psi_t - q) * (-b * theta).exp() / z_t - theta / w_b;
            Ok((1.0 + term * int_w) / (q * theta))
        };
        let inv = laplace::invert_2d(transform, u, t, &self.numerics.inversion)?;
        let query = RiskQuery::new(0.5, b.exp_m1(), Horizon::Finite(t))?;
        Ok(self.report(
            "rally_drawdown_cdf",
            &query,
            inv.value,
            inv.error_estimate,
            "laplace-inversion-2d",
            inv.evaluations,
        ))
    }

    /// Crash probability in the stable-with-drift model: the chance of a
    /// (100·x_dd)% drawdown before a (100·y_up)% rally, via inversion of the
    /// incomplete-gamma series transform.
    pub fn carr_wu_crash_prob(&self, x_dd: f64, y_up: f64) -> Result<RiskReport> {
        let (mu, sigma, alpha) = match *self.model.spec.family() {
            Family::StableDrift { mu, sigma, alpha } => (mu, sigma, alpha),
            _ => {
                return Err(Error::UnsupportedFamily(
                    "carr_wu_crash_prob applies to the StableDrift family".into(),
                ))
            }
        };
        if mu == 0.0 {
            return Err(Error::invalid("carr_wu_crash_prob requires mu != 0"));
        }
        let query = RiskQuery::new(x_dd, y_up, Horizon::Infinite)?;
        let a = query.a();
        let b = query.b();
        if (a - b).abs() <= 1e-12 * a.max(1.0) {
            return self.carr_wu_symmetric(x_dd);
        }
        if a < b {
            return Err(Error::invalid("carr_wu_crash_prob requires a > b"));
        }
        let w_b = self.engine.w(0.0, b)?;
        let int_w = self.engine.w_int(0.0, b)?;
        // Keep the series argument |μ/(σθ^{...})^{α−1}| under 0.8 on the
        // whole contour by shifting it right.
        let sig_a = sigma.powf(alpha);
        let rho_shift = ((mu.abs() / sig_a) / 0.8).powf(1.0 / (alpha - 1.0));
        let shift = (self.model.spec.phi(0.0)? + 1.0).max(rho_shift);
        let transform = |theta: Complex64| -> Result<Complex64> {
            // Σ_{n≥1} (−μ/(σ^α θ^{α−1}))ⁿ Q(n(α−1)+1, bθ)
            let tfac = -mu / (sig_a * theta.powf(alpha - 1.0));
            let mut term = Complex64::new(1.0, 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 1..5000 {
                term *= tfac;
                let s = n as f64 * (alpha - 1.0) + 1.0;
                let q_reg = special::upper_gamma_regularized_c(s, b * theta)?;
                let add = term * q_reg;
                acc += add;
                if add.norm() < 1e-14 * acc.norm().max(1e-30) && n > 3 {
                    break;
                }
                if n == 4999 {
                    return Err(Error::NonConvergence(
                        "carr_wu_crash_prob series did not converge on the contour".into(),
                    ));
                }
            }
            let one = Complex64::new(1.0, 0.0);
            Ok(one / theta - (mu * (-b * theta).exp() / acc + 1.0 / w_b) * int_w)
        };
        let inv = laplace::invert_shifted(transform, a - b, shift, &self.numerics.inversion)?;
        Ok(self.report(
            "carr_wu_crash_prob",
            &query,
            1.0 - inv.value,
            inv.error_estimate,
            "laplace-inversion",
            inv.evaluations,
        ))
    }

    /// Closed form for the symmetric case a = b (drawdown (100x)% before a
    /// rally of the level-matched size x/(1−x)):
    /// P = (α−1) A E'_{α−1,1}(−A) (1 − E_{α−1,2}(−A)) / (1 − E_{α−1,1}(−A))²
    /// with A = (μ/σ^α) a^{α−1}.
    pub fn carr_wu_symmetric(&self, x_dd: f64) -> Result<RiskReport> {
        let (mu, sigma, alpha) = match *self.model.spec.family() {
            Family::StableDrift { mu, sigma, alpha } => (mu, sigma, alpha),
            _ => {
                return Err(Error::UnsupportedFamily(
                    "carr_wu_symmetric applies to the StableDrift family".into(),
                ))
            }
        };
        let beta_eq = x_dd / (1.0 - x_dd);
        let query = RiskQuery::new(x_dd, beta_eq, Horizon::Infinite)?;
        let a = query.a();
        if mu == 0.0 {
            // Driftless limit: the pure-stable scale-function route gives
            // (α−1)/α independently of a and σ.
            return Ok(self.report(
                "carr_wu_symmetric",
                &query,
                (alpha - 1.0) / alpha,
                1e-14,
                "scale-fn-limit",
                0,
            ));
        }
        let tol = self.numerics.series;
        let big_a = mu / sigma.powf(alpha) * a.powf(alpha - 1.0);
        let e1 = special::mittag_leffler(alpha - 1.0, 1.0, -big_a, &tol)?;
        let e2 = special::mittag_leffler(alpha - 1.0, 2.0, -big_a, &tol)?;
        let e1p = special::mittag_leffler_prime(alpha - 1.0, 1.0, -big_a, &tol)?;
        let value = (alpha - 1.0) * big_a * e1p * (1.0 - e2) / ((1.0 - e1) * (1.0 - e1));
        Ok(self.report("carr_wu_symmetric", &query, value, 1e-11, "closed-form", 3))
    }

    fn report(
        &self,
        quantity: &str,
        query: &RiskQuery,
        value: f64,
        error_estimate: f64,
        method: &str,
        evaluations: usize,
    ) -> RiskReport {
        RiskReport {
            quantity: quantity.to_string(),
            query: *query,
            value,
            error_estimate,
            method: method.to_string(),
            evaluations,
        }
    }
}

/// CSV batch serialization of risk reports.
pub fn reports_to_csv(reports: &[RiskReport]) -> String {
    let mut out = String::from("quantity,alpha,beta,horizon,value,error_estimate,method,evaluations\n");
    for r in reports {
        let horizon = match r.query.horizon {
            Horizon::Infinite => "inf".to_string(),
            Horizon::Finite(t) => t.to_string(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.quantity,
            r.query.alpha,
            r.query.beta,
            horizon,
            r.value,
            r.error_estimate,
            r.method,
            r.evaluations
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bm_model(mu: f64, sigma2: f64) -> PriceModel {
        PriceModel::new(ProcessSpec::brownian(mu, sigma2).unwrap(), 100.0).unwrap()
    }

    fn quick_numerics() -> Numerics {
        let mut n = Numerics::default();
        n.sim = mc::SimConfig {
            dt: 2e-3,
            n_paths: 20_000,
            seed: 11,
            t_max: 100.0,
            stable_scheme: mc::StableScheme::default(),
        };
        n
    }

    #[test]
    fn level_mapping_is_exact() {
        let q = RiskQuery::new(0.2, 0.25, Horizon::Infinite).unwrap();
        assert_relative_eq!((q.a()).exp(), 1.0 / 0.8, max_relative = 1e-15);
        assert_relative_eq!((q.b()).exp(), 1.25, max_relative = 1e-15);
        assert!(RiskQuery::new(1.2, 0.2, Horizon::Infinite).is_err());
        assert!(RiskQuery::new(0.2, -0.1, Horizon::Infinite).is_err());
        assert!(RiskQuery::new(0.2, 0.1, Horizon::Finite(-1.0)).is_err());
    }

    #[test]
    fn new_min_probability_driftless_bm() {
        let ra = RiskAnalytics::new(bm_model(0.0, 1.0), quick_numerics()).unwrap();
        // T → ∞ gives 1/2 by symmetry.
        let q = RiskQuery::drawdown_only(1.0 - (-1.0f64).exp(), Horizon::Infinite).unwrap();
        let r = ra.prob_new_min_at_drawdown(&q).unwrap();
        assert_relative_eq!(r.value, 0.5, max_relative = 1e-9);
        // Small T: the probability collapses.
        let q = RiskQuery::drawdown_only(1.0 - (-1.0f64).exp(), Horizon::Finite(0.05)).unwrap();
        let r = ra.prob_new_min_at_drawdown(&q).unwrap();
        assert!(r.value.abs() < 1e-4, "got {}", r.value);
        // Growing in T towards the infinite-horizon value.
        let v1 = ra
            .prob_new_min_at_drawdown(&RiskQuery::drawdown_only(0.3, Horizon::Finite(0.5)).unwrap())
            .unwrap()
            .value;
        let v2 = ra
            .prob_new_min_at_drawdown(&RiskQuery::drawdown_only(0.3, Horizon::Finite(2.0)).unwrap())
            .unwrap()
            .value;
        let vinf = ra
            .prob_new_min_at_drawdown(&RiskQuery::drawdown_only(0.3, Horizon::Infinite).unwrap())
            .unwrap()
            .value;
        assert!(v1 < v2 && v2 < vinf + 1e-9);
    }

    #[test]
    fn new_min_probability_matches_mc_jde() {
        let model = PriceModel::new(ProcessSpec::jump_diffusion(0.2, 1.0, 1.0, 2.0).unwrap(), 1.0).unwrap();
        let num = quick_numerics();
        let ra = RiskAnalytics::new(model, num).unwrap();
        let query = RiskQuery::drawdown_only(0.2, Horizon::Finite(1.0)).unwrap();
        let analytic = ra.prob_new_min_at_drawdown(&query).unwrap();
        let a = query.a();
        let est = mc::estimate_many(
            &model.spec,
            &num.sim,
            mc::Levels::drawdown_only(a).unwrap(),
            &[&|p: &mc::PathFunctionals| {
                if p.tau_a < 1.0 && p.new_min_at_tau {
                    1.0
                } else {
                    0.0
                }
            }],
        )
        .remove(0);
        assert!(
            (analytic.value - est.value).abs() < 5.0 * est.std_error + 2e-3,
            "analytic {} vs mc {} +- {}",
            analytic.value,
            est.value,
            est.std_error
        );
    }

    #[test]
    fn new_max_probability_matches_mc_drifted_bm() {
        let model = PriceModel::new(ProcessSpec::brownian(0.3, 1.0).unwrap(), 1.0).unwrap();
        let num = quick_numerics();
        let ra = RiskAnalytics::new(model, num).unwrap();
        let query = RiskQuery::new(0.5, 0.25, Horizon::Finite(1.0)).unwrap();
        let analytic = ra.prob_new_max_at_drawup(&query).unwrap();
        let b = query.b();
        let est = mc::estimate_many(
            &model.spec,
            &num.sim,
            mc::Levels::new(f64::INFINITY, b).unwrap(),
            &[&|p: &mc::PathFunctionals| {
                if p.hat_tau_b < 1.0 && p.new_max_at_hat {
                    1.0
                } else {
                    0.0
                }
            }],
        )
        .remove(0);
        assert!(
            (analytic.value - est.value).abs() < 5.0 * est.std_error + 2e-3,
            "analytic {} vs mc {} +- {}",
            analytic.value,
            est.value,
            est.std_error
        );
        // Driftless infinite-horizon symmetry.
        let ra0 = RiskAnalytics::new(bm_model(0.0, 1.0), quick_numerics()).unwrap();
        let r = ra0
            .prob_new_max_at_drawup(&RiskQuery::new(0.3, 0.25, Horizon::Infinite).unwrap())
            .unwrap();
        assert_relative_eq!(r.value, 0.5, max_relative = 1e-9);
    }

    #[test]
    fn expected_drawdown_monotone_and_mc() {
        let model = PriceModel::new(ProcessSpec::brownian(0.05, 0.04).unwrap(), 100.0).unwrap();
        let num = quick_numerics();
        let ra = RiskAnalytics::new(model, num).unwrap();
        let q1 = RiskQuery::drawdown_only(0.1, Horizon::Finite(0.5)).unwrap();
        let q2 = RiskQuery::drawdown_only(0.1, Horizon::Finite(1.0)).unwrap();
        let v1 = ra.expected_drawdown_at_d(&q1).unwrap().value;
        let v2 = ra.expected_drawdown_at_d(&q2).unwrap().value;
        assert!(v1 > 0.0 && v1 <= v2 + 1e-9, "v1={v1} v2={v2}");

        // Monte Carlo cross-check: E[(S̄−S) at τ_a; τ_a < T].
        let a = q2.a();
        let est = mc::estimate_many(
            &model.spec,
            &num.sim,
            mc::Levels::drawdown_only(a).unwrap(),
            &[&|p: &mc::PathFunctionals| {
                if p.tau_a < 1.0 {
                    let s_bar = 100.0 * p.x_bar.exp();
                    let s_at = 100.0 * (p.x_bar - a - p.overshoot).exp();
                    s_bar - s_at
                } else {
                    0.0
                }
            }],
        )
        .remove(0);
        assert!(
            (v2 - est.value).abs() < 4.0 * est.std_error + 2e-3 * est.value.abs(),
            "analytic {v2} vs mc {} +- {}",
            est.value,
            est.std_error
        );
        // Infinite horizon is rejected for this quantity.
        assert!(ra
            .expected_drawdown_at_d(&RiskQuery::drawdown_only(0.1, Horizon::Infinite).unwrap())
            .is_err());
    }

    #[test]
    fn drawdown_before_rally_symmetric_bm() {
        let ra = RiskAnalytics::new(bm_model(0.0, 1.0), quick_numerics()).unwrap();
        // α and β chosen so that a = b.
        let alpha = 0.25;
        let beta = alpha / (1.0 - alpha);
        let q = RiskQuery::new(alpha, beta, Horizon::Infinite).unwrap();
        let r = ra.drawdown_before_rally(&q).unwrap();
        assert_eq!(r.len(), 1);
        assert_relative_eq!(r[0].value, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn drawdown_before_rally_drifted_closed_form() {
        let (mu, sigma2) = (0.4, 1.3);
        let ra = RiskAnalytics::new(bm_model(mu, sigma2), quick_numerics()).unwrap();
        let alpha = 0.3;
        let beta = alpha / (1.0 - alpha);
        let q = RiskQuery::new(alpha, beta, Horizon::Infinite).unwrap();
        let a = q.a();
        let nu = 2.0 * mu / sigma2;
        let expect = ((-a * nu).exp() - 1.0 + a * nu)
            / (((a * mu / sigma2).exp() - (-a * mu / sigma2).exp()).powi(2));
        let r = ra.drawdown_before_rally(&q).unwrap();
        assert_relative_eq!(r[0].value, expect, max_relative = 1e-10);
    }

    #[test]
    fn drawdown_before_rally_generic_vs_mc_jde() {
        let model = PriceModel::new(ProcessSpec::jump_diffusion(0.2, 1.0, 1.0, 2.0).unwrap(), 1.0).unwrap();
        let num = quick_numerics();
        let ra = RiskAnalytics::new(model, num).unwrap();
        let q = RiskQuery::new(0.35, 0.25, Horizon::Infinite).unwrap();
        let r = ra.drawdown_before_rally(&q).unwrap();
        let est = mc::estimate_many(
            &model.spec,
            &num.sim,
            mc::Levels::new(q.a(), q.b()).unwrap(),
            &[&|p: &mc::PathFunctionals| if p.tau_a < p.hat_tau_b { 1.0 } else { 0.0 }],
        )
        .remove(0);
        assert!(
            (r[0].value - est.value).abs() < 4.0 * est.std_error + 2e-3,
            "analytic {} vs mc {} +- {}",
            r[0].value,
            est.value,
            est.std_error
        );
        // a < b is rejected.
        assert!(ra
            .drawdown_before_rally(&RiskQuery::new(0.1, 0.5, Horizon::Infinite).unwrap())
            .is_err());
    }

    #[test]
    fn drawdown_before_rally_finite_horizon_reports() {
        let ra = RiskAnalytics::new(bm_model(0.0, 1.0), quick_numerics()).unwrap();
        let q = RiskQuery::new(0.33, 0.25, Horizon::Finite(1.0)).unwrap();
        let reports = ra.drawdown_before_rally(&q).unwrap();
        assert_eq!(reports.len(), 3);
        assert_eq!(reports[0].quantity, "prob_rally_before_dd_within_horizon");
        assert_eq!(reports[1].quantity, "prob_dd_within_horizon");
        assert_eq!(reports[2].quantity, "prob_dd_before_rally_within_horizon");
        assert_eq!(reports[2].method, "simulation");
        // Consistency: dd-first + rally-first ≤ ... and each within [0,1].
        for r in &reports {
            assert!(r.value >= -1e-6 && r.value <= 1.0 + 1e-6, "{} = {}", r.quantity, r.value);
        }
        // The rally-first MC cross-check.
        let est = mc::estimate_many(
            &ra.model.spec,
            &ra.numerics.sim,
            mc::Levels::new(q.a(), q.b()).unwrap(),
            &[&|p: &mc::PathFunctionals| {
                if p.hat_tau_b < p.tau_a && p.hat_tau_b < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }],
        )
        .remove(0);
        assert!(
            (reports[0].value - est.value).abs() < 5.0 * est.std_error + 5e-3,
            "2d inversion {} vs mc {} +- {}",
            reports[0].value,
            est.value,
            est.std_error
        );
        // dd-first + rally-first complement against dd∧rally within T.
        let both = mc::estimate_many(
            &ra.model.spec,
            &ra.numerics.sim,
            mc::Levels::new(q.a(), q.b()).unwrap(),
            &[&|p: &mc::PathFunctionals| {
                if p.tau_a.min(p.hat_tau_b) < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }],
        )
        .remove(0);
        let sum = reports[0].value + reports[2].value;
        assert!((sum - both.value).abs() < 6.0 * both.std_error + 5e-3);
    }

    #[test]
    fn carr_wu_routes_agree() {
        let spec = ProcessSpec::stable_drift(0.1, 0.3, 1.5).unwrap();
        let model = PriceModel::new(spec, 1.0).unwrap();
        let ra = RiskAnalytics::new(model, quick_numerics()).unwrap();
        // Symmetric closed form against the generic scale-function route.
        let x = 0.3;
        let sym = ra.carr_wu_symmetric(x).unwrap();
        let a = -(1.0f64 - x).ln();
        let eng = ScaleEngine::closed(spec);
        let generic = 1.0 - drawdown::y_at_hat_tau_atom(&eng, a).unwrap();
        assert_relative_eq!(sym.value, generic, max_relative = 1e-9);
        // Asymmetric: series-transform route against the generic route.
        let q = RiskQuery::new(0.35, 0.2, Horizon::Infinite).unwrap();
        let crash = ra.carr_wu_crash_prob(0.35, 0.2).unwrap();
        let generic = ra.drawdown_before_rally(&q).unwrap();
        assert_relative_eq!(crash.value, generic[0].value, max_relative = 1e-5);
    }

    #[test]
    fn carr_wu_symmetric_limits() {
        // α → 2 approaches the Brownian closed form.
        let spec = ProcessSpec::stable_drift(0.05, 0.2, 1.999).unwrap();
        let ra = RiskAnalytics::new(PriceModel::new(spec, 1.0).unwrap(), quick_numerics()).unwrap();
        let x = 0.3;
        let v = ra.carr_wu_symmetric(x).unwrap().value;
        // Brownian with drift μ and coefficient 2σ².
        let (mu, sigma2) = (0.05, 2.0 * 0.2 * 0.2);
        let a = -(1.0f64 - x).ln();
        let nu = 2.0 * mu / sigma2;
        let bmv = ((-a * nu).exp() - 1.0 + a * nu)
            / (((a * mu / sigma2).exp() - (-a * mu / sigma2).exp()).powi(2));
        assert!((v - bmv).abs() / bmv < 1e-2, "{v} vs {bmv}");
        // A → 0 recovers the driftless stable value (α−1)/α.
        let spec = ProcessSpec::stable_drift(1e-9, 0.3, 1.5).unwrap();
        let ra = RiskAnalytics::new(PriceModel::new(spec, 1.0).unwrap(), quick_numerics()).unwrap();
        let v = ra.carr_wu_symmetric(0.2).unwrap().value;
        assert_relative_eq!(v, 0.5 / 1.5, max_relative = 1e-5);
        // μ = 0 exactly routes to the same limit.
        let spec = ProcessSpec::stable_drift(0.0, 0.3, 1.5).unwrap();
        let ra = RiskAnalytics::new(PriceModel::new(spec, 1.0).unwrap(), quick_numerics()).unwrap();
        assert_relative_eq!(
            ra.carr_wu_symmetric(0.2).unwrap().value,
            1.0 / 3.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn reports_serialize() {
        let ra = RiskAnalytics::new(bm_model(0.0, 1.0), quick_numerics()).unwrap();
        let q = RiskQuery::drawdown_only(0.3, Horizon::Infinite).unwrap();
        let r = ra.prob_new_min_at_drawdown(&q).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"quantity\""));
        assert!(json.contains("\"value\""));
        assert!(json.contains("\"error_estimate\""));
        assert!(json.contains("\"method\""));
        assert!(json.contains("\"evaluations\""));
        let csv = reports_to_csv(&[r]);
        assert!(csv.starts_with("quantity,alpha,beta,horizon,"));
        assert_eq!(csv.lines().count(), 2);
    }
}
