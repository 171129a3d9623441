//! Evaluation of the q-scale functions W^{(q)} and Z^{(q)}, their
//! derivatives, integrals and Esscher-tilted variants, through
//! interchangeable backends:
//!
//! * `ClosedForm` — two-exponential form for Brownian motion with drift,
//!   Mittag-Leffler series for the stable families, partial fractions over
//!   the roots of ψ(θ) = q for the exponential jump diffusion;
//! * `MittagLefflerSeries` — the stable-family series backends only;
//! * `LaplaceInversion` — numerical inversion of (ψ(θ) − q)⁻¹ on a contour
//!   shifted right of Φ(q);
//! * `ConvolutionSeries` — W^{(q)} = Σ_k q^k W^{★(k+1)} by trapezoidal
//!   convolution of the 0-scale function.
//!
//! Conventions: W^{(q)}(x) = 0 for x < 0 and Z^{(q)}(x) = 1 for x ≤ 0.
//! Indices q are real and nonnegative on the public surface; the complex-q
//! evaluators used by inversion contours are crate-internal.

use crate::error::{Error, Result};
use crate::laplace::{self, InversionConfig};
use crate::process::{Family, ProcessSpec};
use crate::quad;
use crate::special::{self, SeriesTolerance};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    ClosedForm,
    MittagLefflerSeries,
    LaplaceInversion,
    ConvolutionSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Scale-function evaluator for one process specification.
#[derive(Debug, Clone)]
pub struct ScaleEngine {
    spec: ProcessSpec,
    backend: Backend,
    inv_cfg: InversionConfig,
    tol: SeriesTolerance,
    conv_step: f64,
    cache: Option<ScaleTable>,
}

impl ScaleEngine {
    pub fn new(spec: ProcessSpec, backend: Backend) -> Result<Self> {
        if backend == Backend::MittagLefflerSeries
            && !matches!(
                spec.family(),
                Family::StableNeg { .. } | Family::StableDrift { .. }
            )
        {
            return Err(Error::UnsupportedFamily(
                "the Mittag-Leffler series backend covers only the stable families".into(),
            ));
        }
        Ok(ScaleEngine {
            spec,
            backend,
            inv_cfg: InversionConfig::default(),
            tol: SeriesTolerance::default(),
            conv_step: 1e-3,
            cache: None,
        })
    }

    /// Closed-form backend; available for every built-in family.
    pub fn closed(spec: ProcessSpec) -> Self {
        ScaleEngine::new(spec, Backend::ClosedForm).expect("closed form is always available")
    }

    pub fn with_inversion(mut self, cfg: InversionConfig) -> Self {
        self.inv_cfg = cfg;
        self
    }

    pub fn with_tolerance(mut self, tol: SeriesTolerance) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_conv_step(mut self, step: f64) -> Self {
        self.conv_step = step;
        self
    }

    /// Precompute a (q, grid) table. Interpolated lookups are opt-in; with
    /// `interpolate = false` the cache only short-circuits exact grid hits.
    pub fn with_cache(mut self, q: f64, xs: &[f64], interpolate: bool) -> Result<Self> {
        let table = self.table(q, xs, interpolate)?;
        self.cache = Some(table);
        Ok(self)
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn tolerance(&self) -> &SeriesTolerance {
        &self.tol
    }

    /// W^{(q)}(x); zero for x < 0.
    pub fn w(&self, q: f64, x: f64) -> Result<f64> {
        check_q(q)?;
        if x < 0.0 {
            return Ok(0.0);
        }
        if let Some(cache) = &self.cache {
            if let Some(v) = cache.lookup_w(q, x) {
                return Ok(v);
            }
        }
        match self.backend {
            Backend::ClosedForm | Backend::MittagLefflerSeries => {
                let v = self.w_analytic_c(Complex64::new(q, 0.0), x)?;
                Ok(v.re)
            }
            Backend::LaplaceInversion => self.w_inversion(q, x),
            Backend::ConvolutionSeries => self.w_conv_series(q, x, self.conv_step),
        }
    }

    /// The stable-with-drift series form of W^{(q)} (two-index
    /// Mittag-Leffler). Requires the StableDrift family with nonzero drift.
    pub fn w_carr_wu(&self, q: f64, x: f64) -> Result<f64> {
        check_q(q)?;
        let (mu, sigma, alpha) = match *self.spec.family() {
            Family::StableDrift { mu, sigma, alpha } => (mu, sigma, alpha),
            _ => {
                return Err(Error::UnsupportedFamily(
                    "w_carr_wu applies to the StableDrift family".into(),
                ))
            }
        };
        if mu == 0.0 {
            return Err(Error::UnsupportedFamily(
                "w_carr_wu needs mu != 0; use the StableNeg closed form instead".into(),
            ));
        }
        if x < 0.0 {
            return Ok(0.0);
        }
        let y = -(mu / sigma.powf(alpha)) * x.powf(alpha - 1.0);
        let z = -q * x / mu;
        let e = special::two_index_ml(alpha - 1.0, 1.0, 1.0, y, z, &self.tol)?;
        Ok((1.0 - e) / mu)
    }

    /// Truncated convolution series W^{(q)}(x) = Σ_k q^k W^{★(k+1)}(x) on a
    /// uniform grid of the given step. The series is entire in q; terms are
    /// added until they fall below the series tolerance.
    pub fn w_conv_series(&self, q: f64, x: f64, grid_step: f64) -> Result<f64> {
        check_q(q)?;
        if !(grid_step > 0.0) {
            return Err(Error::invalid("grid_step must be positive"));
        }
        if x < 0.0 {
            return Ok(0.0);
        }
        if x == 0.0 {
            return Ok(self.w_analytic_c(Complex64::new(0.0, 0.0), 0.0)?.re);
        }
        let n = ((x / grid_step).round() as usize).max(8);
        let h = x / n as f64;
        let w0: Vec<f64> = (0..=n)
            .map(|i| self.w_analytic_c(Complex64::new(0.0, 0.0), i as f64 * h).map(|v| v.re))
            .collect::<Result<_>>()?;
        if q == 0.0 {
            return Ok(w0[n]);
        }
        // The stable 0-scale functions behave like coeff·s^{α−1} at zero;
        // the last convolution cell needs its analytic value, otherwise the
        // trapezoid rule caps accuracy at O(h^{α}).
        let endpoint = match *self.spec.family() {
            Family::StableNeg { alpha, sigma } if alpha < 2.0 => Some((
                alpha - 1.0,
                sigma.powf(-alpha) / crate::special::gamma(alpha),
            )),
            Family::StableDrift { alpha, sigma, .. } => Some((
                alpha - 1.0,
                sigma.powf(-alpha) / crate::special::gamma(alpha),
            )),
            _ => None,
        };
        let mut conv = w0.clone();
        let mut total = w0[n];
        let mut qk = 1.0;
        let mut prev_term = f64::INFINITY;
        let mut grew = 0usize;
        for _k in 1..200 {
            conv = convolve_trapezoid(&conv, &w0, h, endpoint);
            qk *= q;
            let term = qk * conv[n];
            total += term;
            if term.abs() < self.tol.abs_tol() * total.abs().max(1.0) {
                return Ok(total);
            }
            if term.abs() > prev_term {
                grew += 1;
                if grew > 25 {
                    return Err(Error::NonConvergence(
                        "convolution series terms keep growing".into(),
                    ));
                }
            } else {
                grew = 0;
            }
            prev_term = term.abs();
        }
        Err(Error::NonConvergence(
            "convolution series did not converge within 200 terms".into(),
        ))
    }

    /// One-sided derivative of W^{(q)} at x > 0.
    pub fn w_prime(&self, q: f64, x: f64, side: Side) -> Result<f64> {
        check_q(q)?;
        if !(x > 0.0) {
            return Err(Error::invalid("w_prime requires x > 0"));
        }
        match self.backend {
            Backend::ClosedForm | Backend::MittagLefflerSeries => {
                Ok(self.w_prime_analytic_c(Complex64::new(q, 0.0), x)?.re)
            }
            _ => {
                // One-sided finite difference of order 2.
                let h = (1e-6 * x).max(1e-6);
                let (s, h) = match side {
                    Side::Right => (1.0, h),
                    Side::Left => (-1.0, h.min(x / 2.0)),
                };
                let w0 = self.w(q, x)?;
                let w1 = self.w(q, x + s * h)?;
                let w2 = self.w(q, x + 2.0 * s * h)?;
                Ok(s * (-3.0 * w0 + 4.0 * w1 - w2) / (2.0 * h))
            }
        }
    }

    /// Second derivative of W^{(q)} at x > 0; requires a Gaussian component.
    pub fn w_second(&self, q: f64, x: f64) -> Result<f64> {
        check_q(q)?;
        if self.spec.gaussian_coeff() == 0.0 {
            return Err(Error::UnsupportedFamily(
                "second derivative not guaranteed without a Gaussian component".into(),
            ));
        }
        if !(x > 0.0) {
            return Err(Error::invalid("w_second requires x > 0"));
        }
        match self.backend {
            Backend::ClosedForm | Backend::MittagLefflerSeries => {
                Ok(self.w_second_analytic_c(Complex64::new(q, 0.0), x)?.re)
            }
            _ => {
                let h = 1e-4 * x.max(1.0);
                let h = h.min(x / 2.0);
                let wm = self.w(q, x - h)?;
                let w0 = self.w(q, x)?;
                let wp = self.w(q, x + h)?;
                Ok((wp - 2.0 * w0 + wm) / (h * h))
            }
        }
    }

    /// Z^{(q)}(x) = 1 + q ∫_0^x W^{(q)}; equal to 1 for x ≤ 0.
    pub fn z(&self, q: f64, x: f64) -> Result<f64> {
        check_q(q)?;
        if x <= 0.0 || q == 0.0 {
            return Ok(1.0);
        }
        Ok(1.0 + q * self.w_int(q, x)?)
    }

    /// ∫_0^a W^{(q)}(z) dz for a > 0.
    pub fn w_int(&self, q: f64, a: f64) -> Result<f64> {
        check_q(q)?;
        if !(a > 0.0) {
            return Err(Error::invalid("w_int requires a > 0"));
        }
        match self.backend {
            Backend::ClosedForm | Backend::MittagLefflerSeries => {
                Ok(self.w_int_analytic_c(Complex64::new(q, 0.0), a)?.re)
            }
            _ => {
                // Composite quadrature after taming the x^{α-1} endpoint.
                let p = self.w_endpoint_power();
                quad::integrate_power_endpoint(
                    |z| self.w(q, z).unwrap_or(f64::NAN),
                    a,
                    p,
                    1e-9 * (1.0 + a),
                )
            }
        }
    }

    /// λ(a, q) = W^{(q)'}_+(a) / W^{(q)}(a).
    pub fn lambda_ratio(&self, q: f64, a: f64) -> Result<f64> {
        if !(a > 0.0) {
            return Err(Error::invalid("lambda_ratio requires a > 0"));
        }
        let w = self.w(q, a)?;
        if !(w > 0.0) {
            return Err(Error::Numerical(format!(
                "lambda_ratio degenerate: W^{{({q})}}({a}) = {w}"
            )));
        }
        Ok(self.w_prime(q, a, Side::Right)? / w)
    }

    /// Tilted scale function W_u^{(p)}(x) = e^{−ux} W^{(p + ψ(u))}(x).
    pub fn w_tilted(&self, u: f64, p: f64, x: f64) -> Result<f64> {
        let q = self.untilted_index(u, p)?;
        Ok((-u * x).exp() * self.w(q, x)?)
    }

    /// Tilted companion Z_u^{(p)}(x) = 1 + p ∫_0^x e^{−uz} W^{(p+ψ(u))}(z) dz.
    pub fn z_tilted(&self, u: f64, p: f64, x: f64) -> Result<f64> {
        let q = self.untilted_index(u, p)?;
        if x <= 0.0 {
            return Ok(1.0);
        }
        let integral = match self.backend {
            Backend::ClosedForm | Backend::MittagLefflerSeries
                if matches!(
                    self.spec.family(),
                    Family::BrownianDrift { .. } | Family::JumpDiffusionExp { .. }
                ) =>
            {
                self.w_exp_int_c(Complex64::new(q, 0.0), Complex64::new(u, 0.0), x)?.re
            }
            _ => quad::integrate_power_endpoint(
                |z| (-u * z).exp() * self.w(q, z).unwrap_or(f64::NAN),
                x,
                self.w_endpoint_power(),
                1e-10 * (1.0 + x),
            )?,
        };
        Ok(1.0 + p * integral)
    }

    fn untilted_index(&self, u: f64, p: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return Err(Error::invalid("tilt parameter u must be nonnegative"));
        }
        let q = p + self.spec.psi(u);
        if q < -1e-9 {
            return Err(Error::invalid(format!(
                "tilted index p = {p} requires p + psi(u) >= 0 (got {q})"
            )));
        }
        Ok(q.max(0.0))
    }

    /// Derivative at a of x ↦ e^{−ux} W^{(p+ψ(u))}(x) (right side).
    pub fn w_tilted_prime(&self, u: f64, p: f64, x: f64) -> Result<f64> {
        let q = self.untilted_index(u, p)?;
        Ok((-u * x).exp() * (self.w_prime(q, x, Side::Right)? - u * self.w(q, x)?))
    }

    // Right derivative allowing x = 0 (finite for the diffusion and
    // bounded-variation families, +inf for the stable ones).
    pub(crate) fn w_prime_right(&self, q: f64, x: f64) -> Result<f64> {
        if x > 0.0 {
            return self.w_prime(q, x, Side::Right);
        }
        match self.backend {
            Backend::ClosedForm | Backend::MittagLefflerSeries => {
                Ok(self.w_prime_analytic_c(Complex64::new(q, 0.0), 0.0)?.re)
            }
            _ => {
                let h = 1e-6;
                let w0 = self.w(q, 0.0)?;
                let w1 = self.w(q, h)?;
                let w2 = self.w(q, 2.0 * h)?;
                Ok((-3.0 * w0 + 4.0 * w1 - w2) / (2.0 * h))
            }
        }
    }

    // ---- complex-q internals (inversion contours) ----

    pub(crate) fn w_c(&self, q: Complex64, x: f64) -> Result<Complex64> {
        if x < 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        self.w_analytic_c(q, x)
    }

    pub(crate) fn w_prime_c(&self, q: Complex64, x: f64) -> Result<Complex64> {
        self.w_prime_analytic_c(q, x)
    }

    pub(crate) fn w_int_c(&self, q: Complex64, a: f64) -> Result<Complex64> {
        if a <= 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        self.w_int_analytic_c(q, a)
    }

    /// E[e^{−qτ_a}] for complex q, in forms that avoid the catastrophic
    /// cancellation of Z − qW²/W' when |q| is large (inversion contours at
    /// short horizons). For the Brownian part the combination collapses to
    /// e^{ka}/(ka sinhc(ca) + cosh(ca)); for the rational-cumulant family
    /// the exponentially large diagonal terms cancel symbolically, leaving
    /// only root cross-terms.
    pub(crate) fn taua_transform_c(&self, q: Complex64, a: f64) -> Result<Complex64> {
        match *self.spec.family() {
            Family::BrownianDrift { mu, sigma2 } => Ok(bm_taua(mu, sigma2, q, a)),
            Family::StableNeg { alpha, sigma } if alpha == 2.0 => {
                Ok(bm_taua(0.0, 2.0 * sigma * sigma, q, a))
            }
            Family::JumpDiffusionExp { mu, sigma2, lambda, eta } => {
                if lambda == 0.0 {
                    return Ok(bm_taua(mu, sigma2, q, a));
                }
                let mix = self.jde_terms(mu, sigma2, lambda, eta, q)?;
                if mix.pair.is_some() {
                    // Nearly coincident roots only arise at small |q|,
                    // where the plain combination is accurate.
                    return self.taua_plain_c(q, a);
                }
                let mut num = Complex64::new(0.0, 0.0);
                for (i, &(wi, ri)) in mix.simple.iter().enumerate() {
                    for &(wj, rj) in mix.simple.iter().skip(i + 1) {
                        let d = ri - rj;
                        num += wi * wj * d * d / (ri * rj) * ((ri + rj) * a).exp();
                    }
                }
                Ok(q * num / mix.eval_prime(a))
            }
            _ => self.taua_plain_c(q, a),
        }
    }

    fn taua_plain_c(&self, q: Complex64, a: f64) -> Result<Complex64> {
        let w = self.w_c(q, a)?;
        let wp = self.w_prime_c(q, a)?;
        let z = 1.0 + q * self.w_int_c(q, a)?;
        Ok(z - q * w * w / wp)
    }

    /// ∫_0^x e^{−uz} W^{(q)}(z) dz for complex (q, u): exact for the
    /// exponential-mixture families (essential on inversion contours where
    /// the integrand oscillates rapidly), quadrature otherwise.
    pub(crate) fn w_exp_int_c(&self, q: Complex64, u: Complex64, x: f64) -> Result<Complex64> {
        if x <= 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        match *self.spec.family() {
            Family::BrownianDrift { mu, sigma2 } => Ok(bm_w_exp_int(mu, sigma2, q, u, x)),
            Family::StableNeg { alpha, sigma } if alpha == 2.0 => {
                Ok(bm_w_exp_int(0.0, 2.0 * sigma * sigma, q, u, x))
            }
            Family::JumpDiffusionExp { mu, sigma2, lambda, eta } => {
                if lambda == 0.0 {
                    return Ok(bm_w_exp_int(mu, sigma2, q, u, x));
                }
                let mix = self.jde_terms(mu, sigma2, lambda, eta, q)?;
                let mut acc = Complex64::new(0.0, 0.0);
                for &(w, r) in &mix.simple {
                    acc += w * eint(r - u, x);
                }
                if let Some((a0, b0, rho)) = mix.pair {
                    acc += a0 * eint(rho - u, x) + b0 * int_z1_exp(rho - u, x);
                }
                Ok(acc)
            }
            _ => quad::integrate_power_endpoint_c(
                |z| {
                    let w = self.w_c(q, z).unwrap_or(Complex64::new(f64::NAN, 0.0));
                    (-u * z).exp() * w
                },
                x,
                self.w_endpoint_power(),
                1e-10 * (1.0 + x),
            ),
        }
    }

    /// Z_u^{(p)} with complex tilt u and complex index p, the untilted index
    /// q = p + ψ(u) being supplied by the caller.
    pub(crate) fn z_tilted_c(&self, u: Complex64, p: Complex64, q: Complex64, x: f64) -> Result<Complex64> {
        if x <= 0.0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        Ok(1.0 + p * self.w_exp_int_c(q, u, x)?)
    }

    /// Z_θ^{(−ψ(θ))}(b) = 1 − ψ(θ) ∫_0^b e^{−θz} W(z) dz on complex
    /// contours. The stable families reduce exactly to regularized
    /// incomplete gamma functions; the naive form 1 − ψ·∫ loses all digits
    /// at large |θ| (the product tends to −1), so those reductions matter.
    pub(crate) fn z_theta0_c(&self, theta: Complex64, b: f64) -> Result<Complex64> {
        match *self.spec.family() {
            Family::StableNeg { alpha, sigma } if alpha < 2.0 => {
                let _ = sigma;
                special::upper_gamma_regularized_c(alpha, theta * b)
            }
            Family::StableDrift { mu, sigma, alpha } if mu != 0.0 => {
                // Q(β+1, θb) + Σ_{n≥1} tⁿ [Q((n+1)β+1, θb) − Q(nβ+1, θb)]
                // with t = −μ/(σ^α θ^{α−1}); needs |t| < 1 on the contour.
                let beta = alpha - 1.0;
                let t = -mu / (sigma.powf(alpha) * theta.powf(beta));
                if t.norm() >= 0.95 {
                    return Err(Error::NonConvergence(
                        "z_theta0_c series needs the contour right of (|mu|/sigma^alpha)^{1/(alpha-1)}".into(),
                    ));
                }
                let x = theta * b;
                let mut q_prev = special::upper_gamma_regularized_c(beta + 1.0, x)?;
                let mut acc = q_prev;
                let mut tn = Complex64::new(1.0, 0.0);
                for n in 1..3000 {
                    let q_next = special::upper_gamma_regularized_c((n as f64 + 1.0) * beta + 1.0, x)?;
                    tn *= t;
                    let add = tn * (q_next - q_prev);
                    acc += add;
                    q_prev = q_next;
                    if add.norm() < 1e-14 * acc.norm().max(1e-280) && n > 3 {
                        return Ok(acc);
                    }
                }
                Err(Error::NonConvergence("z_theta0_c series did not converge".into()))
            }
            _ => {
                let zero = Complex64::new(0.0, 0.0);
                Ok(1.0 - self.spec.psi_c(theta) * self.w_exp_int_c(zero, theta, b)?)
            }
        }
    }

    // Power of the leading x^p behaviour of W at 0+, used to choose endpoint
    // substitutions in quadrature.
    fn w_endpoint_power(&self) -> f64 {
        match *self.spec.family() {
            Family::StableNeg { alpha, .. } if alpha < 2.0 => alpha - 1.0,
            Family::StableDrift { alpha, .. } => alpha - 1.0,
            _ => 1.0,
        }
    }

    fn w_inversion(&self, q: f64, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(self.w_analytic_c(Complex64::new(0.0, 0.0), 0.0)?.re);
        }
        let shift = self.spec.phi(q)? + 1.0;
        let spec = self.spec;
        let inv = laplace::invert_shifted(
            move |s| {
                let d = spec.psi_c(s) - q;
                Ok(1.0 / d)
            },
            x,
            shift,
            &self.inv_cfg,
        )?;
        Ok(inv.value)
    }

    // ---- analytic evaluation core ----

    fn w_analytic_c(&self, q: Complex64, x: f64) -> Result<Complex64> {
        match *self.spec.family() {
            Family::BrownianDrift { mu, sigma2 } => Ok(bm_w(mu, sigma2, q, x)),
            Family::StableNeg { alpha, sigma } => {
                if alpha == 2.0 {
                    Ok(bm_w(0.0, 2.0 * sigma * sigma, q, x))
                } else {
                    self.stable_w(sigma, alpha, q, x)
                }
            }
            Family::StableDrift { mu, sigma, alpha } => {
                if mu == 0.0 {
                    self.stable_w(sigma, alpha, q, x)
                } else {
                    self.stable_drift_w(mu, sigma, alpha, q, x)
                }
            }
            Family::JumpDiffusionExp { mu, sigma2, lambda, eta } => {
                if lambda == 0.0 {
                    Ok(bm_w(mu, sigma2, q, x))
                } else {
                    Ok(self.jde_terms(mu, sigma2, lambda, eta, q)?.eval(x))
                }
            }
        }
    }

    fn w_prime_analytic_c(&self, q: Complex64, x: f64) -> Result<Complex64> {
        match *self.spec.family() {
            Family::BrownianDrift { mu, sigma2 } => Ok(bm_w_prime(mu, sigma2, q, x)),
            Family::StableNeg { alpha, sigma } => {
                if alpha == 2.0 {
                    Ok(bm_w_prime(0.0, 2.0 * sigma * sigma, q, x))
                } else {
                    self.stable_w_prime(sigma, alpha, q, x)
                }
            }
            Family::StableDrift { mu, sigma, alpha } => {
                if mu == 0.0 {
                    self.stable_w_prime(sigma, alpha, q, x)
                } else {
                    let (y, z) = carr_wu_args(mu, sigma, alpha, q, x);
                    let s = special::two_index_ml_weighted(alpha - 1.0, 1.0, 1.0, y, z, &self.tol)?;
                    Ok(-s / (mu * x))
                }
            }
            Family::JumpDiffusionExp { mu, sigma2, lambda, eta } => {
                if lambda == 0.0 {
                    Ok(bm_w_prime(mu, sigma2, q, x))
                } else {
                    Ok(self.jde_terms(mu, sigma2, lambda, eta, q)?.eval_prime(x))
                }
            }
        }
    }

    fn w_second_analytic_c(&self, q: Complex64, x: f64) -> Result<Complex64> {
        match *self.spec.family() {
            Family::BrownianDrift { mu, sigma2 } => Ok(bm_w_second(mu, sigma2, q, x)),
            Family::StableNeg { alpha, sigma } if alpha == 2.0 => {
                Ok(bm_w_second(0.0, 2.0 * sigma * sigma, q, x))
            }
            Family::JumpDiffusionExp { mu, sigma2, lambda, eta } => {
                if lambda == 0.0 {
                    Ok(bm_w_second(mu, sigma2, q, x))
                } else {
                    Ok(self.jde_terms(mu, sigma2, lambda, eta, q)?.eval_second(x))
                }
            }
            _ => Err(Error::UnsupportedFamily(
                "second derivative not guaranteed without a Gaussian component".into(),
            )),
        }
    }

    fn w_int_analytic_c(&self, q: Complex64, a: f64) -> Result<Complex64> {
        match *self.spec.family() {
            Family::BrownianDrift { mu, sigma2 } => Ok(bm_w_int(mu, sigma2, q, a)),
            Family::StableNeg { alpha, sigma } => {
                if alpha == 2.0 {
                    Ok(bm_w_int(0.0, 2.0 * sigma * sigma, q, a))
                } else {
                    self.stable_w_int(sigma, alpha, q, a)
                }
            }
            Family::StableDrift { mu, sigma, alpha } => {
                if mu == 0.0 {
                    self.stable_w_int(sigma, alpha, q, a)
                } else {
                    let (y, z) = carr_wu_args(mu, sigma, alpha, q, a);
                    let e = special::two_index_ml_c(alpha - 1.0, 2.0, 1.0, y, z, &self.tol)?;
                    Ok((1.0 - e) * (a / mu))
                }
            }
            Family::JumpDiffusionExp { mu, sigma2, lambda, eta } => {
                if lambda == 0.0 {
                    Ok(bm_w_int(mu, sigma2, q, a))
                } else {
                    Ok(self.jde_terms(mu, sigma2, lambda, eta, q)?.eval_int(a))
                }
            }
        }
    }

    // W^{(q)}(x) = σ^{-α} x^{α-1} E_{α,α}((q/σ^α) x^α) for ψ(θ) = (σθ)^α.
    fn stable_w(&self, sigma: f64, alpha: f64, q: Complex64, x: f64) -> Result<Complex64> {
        let c0 = sigma.powf(-alpha);
        if x == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let w = q * c0 * x.powf(alpha);
        let e = special::mittag_leffler_c(alpha, alpha, w, &self.tol)?;
        Ok(e * c0 * x.powf(alpha - 1.0))
    }

    // Termwise derivative: σ^{-α} x^{α-2} E_{α,α-1}((q/σ^α) x^α).
    fn stable_w_prime(&self, sigma: f64, alpha: f64, q: Complex64, x: f64) -> Result<Complex64> {
        let c0 = sigma.powf(-alpha);
        let w = q * c0 * x.powf(alpha);
        let e = special::mittag_leffler_c(alpha, alpha - 1.0, w, &self.tol)?;
        Ok(e * c0 * x.powf(alpha - 2.0))
    }

    // Termwise integral: σ^{-α} x^{α} E_{α,α+1}((q/σ^α) x^α).
    fn stable_w_int(&self, sigma: f64, alpha: f64, q: Complex64, a: f64) -> Result<Complex64> {
        let c0 = sigma.powf(-alpha);
        let w = q * c0 * a.powf(alpha);
        let e = special::mittag_leffler_c(alpha, alpha + 1.0, w, &self.tol)?;
        Ok(e * c0 * a.powf(alpha))
    }

    fn stable_drift_w(&self, mu: f64, sigma: f64, alpha: f64, q: Complex64, x: f64) -> Result<Complex64> {
        if x == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let (y, z) = carr_wu_args(mu, sigma, alpha, q, x);
        let e = special::two_index_ml_c(alpha - 1.0, 1.0, 1.0, y, z, &self.tol)?;
        Ok((1.0 - e) / mu)
    }

    fn jde_terms(&self, mu: f64, sigma2: f64, lambda: f64, eta: f64, q: Complex64) -> Result<ExpMixture> {
        // Roots of (ψ(θ) − q)(η + θ), a polynomial of degree 2 or 3.
        let roots = if sigma2 > 0.0 {
            solve_cubic(
                Complex64::new(0.5 * sigma2, 0.0),
                Complex64::new(mu + 0.5 * sigma2 * eta, 0.0),
                Complex64::new(mu * eta - lambda, 0.0) - q,
                -q * eta,
            )
        } else {
            solve_quadratic(
                Complex64::new(mu, 0.0),
                Complex64::new(mu * eta - lambda, 0.0) - q,
                -q * eta,
            )
        };
        let lead = if sigma2 > 0.0 { 0.5 * sigma2 } else { mu };
        ExpMixture::from_roots(&roots, eta, lead)
    }

    /// Tabulate (x, q, W, W'_+, Z) on a grid; deterministic ascending order.
    pub fn table(&self, q: f64, xs: &[f64], interpolate: bool) -> Result<ScaleTable> {
        let mut xs = xs.to_vec();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        let mut w = Vec::with_capacity(xs.len());
        let mut wp = Vec::with_capacity(xs.len());
        let mut z = Vec::with_capacity(xs.len());
        for &x in &xs {
            w.push(self.w(q, x)?);
            wp.push(if x > 0.0 {
                self.w_prime(q, x, Side::Right)?
            } else {
                f64::NAN
            });
            z.push(self.z(q, x)?);
        }
        Ok(ScaleTable { q, xs, w, wp, z, interpolate })
    }
}

// Trapezoidal convolution (f ⋆ g)(x_i) on a shared uniform grid. When g
// carries a power kink g(u) ≈ coeff·u^p at zero, the final cell
// [x_i − h, x_i] is integrated analytically instead.
fn convolve_trapezoid(f: &[f64], g: &[f64], h: f64, g_endpoint: Option<(f64, f64)>) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for i in 1..n {
        let mut acc = 0.5 * (f[0] * g[i] + f[i] * g[0]);
        for j in 1..i {
            acc += f[j] * g[i - j];
        }
        let mut v = acc * h;
        if let Some((p, coeff)) = g_endpoint {
            // Replace the trapezoid's last cell 0.5h(f_{i-1}g_1 + f_i g_0)
            // by ∫_0^h f(x_i − u) coeff u^p du to first order in f.
            let trap = 0.5 * h * (f[i - 1] * g[1] + f[i] * g[0]);
            let hp = coeff * h.powf(p + 1.0);
            let exact = hp * (f[i] / (p + 1.0) - (f[i] - f[i - 1]) * (p + 1.0) / ((p + 1.0) * (p + 2.0)));
            v += exact - trap;
        }
        out[i] = v;
    }
    out
}

fn check_q(q: f64) -> Result<()> {
    if !(q >= 0.0) {
        return Err(Error::invalid("scale-function index q must be >= 0"));
    }
    Ok(())
}

fn carr_wu_args(mu: f64, sigma: f64, alpha: f64, q: Complex64, x: f64) -> (Complex64, Complex64) {
    let y = Complex64::new(-(mu / sigma.powf(alpha)) * x.powf(alpha - 1.0), 0.0);
    let z = -q * x / mu;
    (y, z)
}

/// Precomputed scale-function table, exportable as CSV with columns
/// `x,q,W,W_prime_plus,Z`.
#[derive(Debug, Clone)]
pub struct ScaleTable {
    q: f64,
    xs: Vec<f64>,
    w: Vec<f64>,
    wp: Vec<f64>,
    z: Vec<f64>,
    interpolate: bool,
}

impl ScaleTable {
    fn lookup_w(&self, q: f64, x: f64) -> Option<f64> {
        if q != self.q {
            return None;
        }
        match self.xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => Some(self.w[i]),
            Err(i) => {
                if !self.interpolate || i == 0 || i >= self.xs.len() {
                    None
                } else {
                    let (x0, x1) = (self.xs[i - 1], self.xs[i]);
                    let t = (x - x0) / (x1 - x0);
                    Some(self.w[i - 1] * (1.0 - t) + self.w[i] * t)
                }
            }
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64, f64, f64)> + '_ {
        self.xs
            .iter()
            .enumerate()
            .map(move |(i, &x)| (x, self.q, self.w[i], self.wp[i], self.z[i]))
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "x,q,W,W_prime_plus,Z")?;
        for (x, q, w, wp, z) in self.rows() {
            writeln!(out, "{x},{q},{w},{wp},{z}")?;
        }
        Ok(())
    }
}

// ---- Brownian-with-drift closed forms (entire in q) ----

fn sinhc(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        1.0 + z2 * (1.0 / 6.0) + z2 * z2 * (1.0 / 120.0)
    } else {
        z.sinh() / z
    }
}

fn bm_kc(mu: f64, sigma2: f64, q: Complex64) -> (f64, Complex64) {
    let k = -mu / sigma2;
    let c = (Complex64::new(mu * mu, 0.0) + 2.0 * sigma2 * q).sqrt() / sigma2;
    (k, c)
}

fn bm_w(mu: f64, sigma2: f64, q: Complex64, x: f64) -> Complex64 {
    let (k, c) = bm_kc(mu, sigma2, q);
    (k * x).exp() * (2.0 / sigma2) * x * sinhc(c * x)
}

fn bm_w_prime(mu: f64, sigma2: f64, q: Complex64, x: f64) -> Complex64 {
    let (k, c) = bm_kc(mu, sigma2, q);
    let cx = c * x;
    (k * x).exp() * (2.0 / sigma2) * (k * x * sinhc(cx) + cx.cosh())
}

fn bm_w_second(mu: f64, sigma2: f64, q: Complex64, x: f64) -> Complex64 {
    let (k, c) = bm_kc(mu, sigma2, q);
    let cx = c * x;
    let sh = x * sinhc(cx); // sinh(cx)/c
    (k * x).exp() * (2.0 / sigma2) * (k * k * sh + 2.0 * k * cx.cosh() + c * c * sh)
}

// ∫_0^x z e^{kz} dz with a stable small-argument series.
fn int_z1_exp(k: Complex64, x: f64) -> Complex64 {
    if (k * x).norm() < 0.5 {
        int_zn_exp(1, k, x)
    } else {
        let kx = k * x;
        (kx.exp() * (kx - 1.0) + 1.0) / (k * k)
    }
}

fn int_z3_exp(k: Complex64, x: f64) -> Complex64 {
    if (k * x).norm() < 0.5 {
        int_zn_exp(3, k, x)
    } else {
        let x2 = x * x;
        let k2 = k * k;
        (k * x).exp() * (x2 * x / k - 3.0 * x2 / k2 + 6.0 * x / (k2 * k) - 6.0 / (k2 * k2))
            + 6.0 / (k2 * k2)
    }
}

fn bm_w_exp_int(mu: f64, sigma2: f64, q: Complex64, u: Complex64, x: f64) -> Complex64 {
    let (k, c) = bm_kc(mu, sigma2, q);
    let kc = k - u;
    if (c * x).norm() >= 1e-4 {
        (eint(kc + c, x) - eint(kc - c, x)) / (sigma2 * c)
    } else {
        (int_z1_exp(kc, x) + c * c * int_z3_exp(kc, x) * (1.0 / 6.0)) * (2.0 / sigma2)
    }
}

fn bm_taua(mu: f64, sigma2: f64, q: Complex64, a: f64) -> Complex64 {
    let (k, c) = bm_kc(mu, sigma2, q);
    let ca = c * a;
    (k * a).exp() / (k * a * sinhc(ca) + ca.cosh())
}

fn bm_w_int(mu: f64, sigma2: f64, q: Complex64, x: f64) -> Complex64 {
    let (k, c) = bm_kc(mu, sigma2, q);
    let kc = Complex64::new(k, 0.0);
    if (c * x).norm() >= 1e-4 {
        (eint(kc + c, x) - eint(kc - c, x)) / (sigma2 * c)
    } else {
        // Both c and k are small here; integrate the series in c.
        let i1 = int_zn_exp(1, kc, x);
        let i3 = int_zn_exp(3, kc, x);
        (i1 + c * c * i3 * (1.0 / 6.0)) * (2.0 / sigma2)
    }
}

// ∫_0^x e^{θz} dz, stable for small |θx|.
fn eint(theta: Complex64, x: f64) -> Complex64 {
    let tx = theta * x;
    if tx.norm() < 1e-4 {
        x * (1.0 + tx * 0.5 + tx * tx * (1.0 / 6.0) + tx * tx * tx * (1.0 / 24.0))
    } else {
        (tx.exp() - 1.0) / theta
    }
}

// ∫_0^x z^n e^{kz} dz via the series x^{n+1} Σ_j (kx)^j / (j! (n+1+j)).
fn int_zn_exp(n: u32, k: Complex64, x: f64) -> Complex64 {
    let kx = k * x;
    debug_assert!(kx.norm() < 1.0);
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term / (n as f64 + 1.0);
    for j in 1..60 {
        term = term * kx / j as f64;
        let add = term / (n as f64 + 1.0 + j as f64);
        sum += add;
        if add.norm() < 1e-17 * sum.norm() {
            break;
        }
    }
    sum * x.powi(n as i32 + 1)
}

// ---- rational-cumulant partial fractions (jump diffusion) ----

// W^{(q)} as Σ w_i e^{r_i x}, with a collapsed pair term (A + Bx) e^{ρx}
// when two roots nearly coincide.
struct ExpMixture {
    simple: Vec<(Complex64, Complex64)>, // (weight, root)
    pair: Option<(Complex64, Complex64, Complex64)>, // (A, B, rho)
}

impl ExpMixture {
    fn from_roots(roots: &[Complex64], eta: f64, lead: f64) -> Result<Self> {
        let scale = roots.iter().map(|r| r.norm()).fold(1.0f64, f64::max);
        // Detect a nearly coincident pair.
        let mut pair_idx: Option<(usize, usize)> = None;
        'outer: for i in 0..roots.len() {
            for j in (i + 1)..roots.len() {
                if (roots[i] - roots[j]).norm() < 1e-5 * scale {
                    pair_idx = Some((i, j));
                    break 'outer;
                }
            }
        }
        let num = |th: Complex64| th + eta;
        match pair_idx {
            None => {
                let mut simple = Vec::with_capacity(roots.len());
                for (i, &ri) in roots.iter().enumerate() {
                    let mut dp = Complex64::new(lead, 0.0);
                    for (j, &rj) in roots.iter().enumerate() {
                        if i != j {
                            dp *= ri - rj;
                        }
                    }
                    if dp.norm() == 0.0 {
                        return Err(Error::Numerical("degenerate cumulant roots".into()));
                    }
                    simple.push((num(ri) / dp, ri));
                }
                Ok(ExpMixture { simple, pair: None })
            }
            Some((i, j)) => {
                let rho = (roots[i] + roots[j]) * 0.5;
                let mut simple = Vec::new();
                let mut others = Vec::new();
                for (k, &rk) in roots.iter().enumerate() {
                    if k != i && k != j {
                        others.push(rk);
                    }
                }
                // g(θ) = (η+θ) / (lead Π_{others}(θ − r_k)); the pair
                // contributes e^{ρx}(g'(ρ) + x g(ρ)).
                let mut denom = Complex64::new(lead, 0.0);
                let mut dlog = Complex64::new(0.0, 0.0);
                for &rk in &others {
                    denom *= rho - rk;
                    dlog += 1.0 / (rho - rk);
                }
                let g = num(rho) / denom;
                let gp = g * (1.0 / num(rho) - dlog);
                for &rk in &others {
                    let mut dp = Complex64::new(lead, 0.0) * (rk - rho) * (rk - rho);
                    for &rm in &others {
                        if rm != rk {
                            dp *= rk - rm;
                        }
                    }
                    simple.push((num(rk) / dp, rk));
                }
                Ok(ExpMixture {
                    simple,
                    pair: Some((gp, g, rho)),
                })
            }
        }
    }

    fn eval(&self, x: f64) -> Complex64 {
        let mut v = Complex64::new(0.0, 0.0);
        for &(w, r) in &self.simple {
            v += w * (r * x).exp();
        }
        if let Some((a, b, rho)) = self.pair {
            v += (rho * x).exp() * (a + b * x);
        }
        v
    }

    fn eval_prime(&self, x: f64) -> Complex64 {
        let mut v = Complex64::new(0.0, 0.0);
        for &(w, r) in &self.simple {
            v += w * r * (r * x).exp();
        }
        if let Some((a, b, rho)) = self.pair {
            v += (rho * x).exp() * (rho * a + b + rho * b * x);
        }
        v
    }

    fn eval_second(&self, x: f64) -> Complex64 {
        let mut v = Complex64::new(0.0, 0.0);
        for &(w, r) in &self.simple {
            v += w * r * r * (r * x).exp();
        }
        if let Some((a, b, rho)) = self.pair {
            v += (rho * x).exp() * (rho * rho * a + 2.0 * rho * b + rho * rho * b * x);
        }
        v
    }

    fn eval_int(&self, x: f64) -> Complex64 {
        let mut v = Complex64::new(0.0, 0.0);
        for &(w, r) in &self.simple {
            v += w * eint(r, x);
        }
        if let Some((a, b, rho)) = self.pair {
            v += a * eint(rho, x)
                + b * if rho.norm() * x < 0.5 {
                    int_zn_exp(1, rho, x)
                } else {
                    ((rho * x).exp() * (rho * x - 1.0) + 1.0) / (rho * rho)
                };
        }
        v
    }
}

fn solve_quadratic(a: Complex64, b: Complex64, c: Complex64) -> Vec<Complex64> {
    let disc = (b * b - 4.0 * a * c).sqrt();
    // Avoid cancellation: pick the larger-magnitude numerator first.
    let qn = if (b + disc).norm() > (b - disc).norm() {
        -(b + disc) * 0.5
    } else {
        -(b - disc) * 0.5
    };
    if qn.norm() == 0.0 {
        return vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
    }
    vec![qn / a, c / qn]
}

fn solve_cubic(a3: Complex64, a2: Complex64, a1: Complex64, a0: Complex64) -> Vec<Complex64> {
    let b = a2 / a3;
    let c = a1 / a3;
    let d = a0 / a3;
    let p = c - b * b / 3.0;
    let q0 = b * b * b * (2.0 / 27.0) - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let disc = (q0 * q0 * 0.25 + p * p * p / 27.0).sqrt();
    let mut u = (-q0 * 0.5 + disc).powf(1.0 / 3.0);
    if u.norm() < 1e-12 {
        u = (-q0 * 0.5 - disc).powf(1.0 / 3.0);
    }
    let roots = if u.norm() < 1e-300 {
        vec![shift, shift, shift]
    } else {
        let omega = Complex64::new(-0.5, 0.5 * 3.0f64.sqrt());
        (0..3)
            .map(|k| {
                let uk = u * omega.powu(k);
                uk - p / (uk * 3.0) + shift
            })
            .collect()
    };
    // Newton polish on the original cubic.
    roots
        .into_iter()
        .map(|mut r| {
            for _ in 0..3 {
                let f = ((a3 * r + a2) * r + a1) * r + a0;
                let df = (a3 * 3.0 * r + a2 * 2.0) * r + a1;
                if df.norm() > 0.0 {
                    let step = f / df;
                    if step.norm().is_finite() {
                        r -= step;
                    }
                }
            }
            r
        })
        .collect()
}
