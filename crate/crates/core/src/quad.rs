//! Adaptive quadrature used throughout the library: Simpson subdivision with
//! Richardson extrapolation, in real and complex flavours, plus helpers for
//! semi-infinite integrals with exponential decay and for endpoint
//! power-law singularities.

use crate::error::{Error, Result};
use num_complex::Complex64;

pub trait Scalar: Copy + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self> {
    fn zero() -> Self;
    fn scale(self, f: f64) -> Self;
    fn norm(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn scale(self, f: f64) -> Self {
        self * f
    }
    fn norm(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn scale(self, f: f64) -> Self {
        self * f
    }
    fn norm(self) -> f64 {
        num_complex::Complex::norm(self)
    }
}

const MAX_DEPTH: u32 = 52;

#[allow(clippy::too_many_arguments)]
fn simpson_step<T: Scalar, F: Fn(f64) -> T>(
    f: &F,
    a: f64,
    b: f64,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: f64,
    global_tol: f64,
    depth: u32,
    budget: &std::cell::Cell<u32>,
) -> Result<T> {
    if budget.get() == 0 {
        return Err(Error::Numerical(
            "quadrature evaluation budget exhausted".into(),
        ));
    }
    budget.set(budget.get() - 1);
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let h6 = (b - a) / 12.0;
    let left = (fa + flm.scale(4.0) + fm).scale(h6);
    let right = (fm + frm.scale(4.0) + fb).scale(h6);
    let s2 = left + right;
    let err = (s2 - whole).norm();
    if err < 15.0 * tol || depth == 0 {
        // At exhausted depth accept anything already negligible on the
        // global scale; otherwise report the failure.
        if depth == 0 && err > 15.0 * global_tol {
            return Err(Error::Numerical(format!(
                "quadrature failed to converge on [{a}, {b}] (residual {err:.3e})"
            )));
        }
        // Richardson extrapolation of the two Simpson levels.
        return Ok(s2 + (s2 - whole).scale(1.0 / 15.0));
    }
    let half_tol = (tol / 2.0).max(1e-16 * s2.norm());
    let l = simpson_step(f, a, m, fa, flm, fm, left, half_tol, global_tol, depth - 1, budget)?;
    let r = simpson_step(f, m, b, fm, frm, fb, right, half_tol, global_tol, depth - 1, budget)?;
    Ok(l + r)
}

fn adaptive<T: Scalar, F: Fn(f64) -> T>(f: &F, a: f64, b: f64, tol: f64) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (fa + fm.scale(4.0) + fb).scale((b - a) / 6.0);
    let tol = tol.max(1e-15);
    let budget = std::cell::Cell::new(400_000u32);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, tol, MAX_DEPTH, &budget)
}

/// ∫_a^b f, absolute tolerance `tol` (adaptive Simpson).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    adaptive(&f, a, b, tol)
}

/// Complex-valued version of [`integrate`].
pub fn integrate_c<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, tol: f64) -> Result<Complex64> {
    adaptive(&f, a, b, tol)
}

/// ∫_0^b f where f behaves like `x^p` (p > −1, possibly non-smooth) at the
/// left endpoint. Substitutes `x = u^m` with integer `m` chosen so that the
/// transformed integrand has a bounded derivative near zero.
pub fn integrate_power_endpoint<F: Fn(f64) -> f64>(f: F, b: f64, p: f64, tol: f64) -> Result<f64> {
    if b <= 0.0 {
        return Ok(0.0);
    }
    let m = power_substitution_order(p);
    let mf = m as f64;
    let g = |u: f64| {
        if u == 0.0 && m > 1 {
            // The substitution makes the integrand vanish at zero.
            return 0.0;
        }
        let x = u.powi(m);
        f(x) * mf * u.powi(m - 1)
    };
    adaptive(&g, 0.0, b.powf(1.0 / mf), tol)
}

/// Complex version of [`integrate_power_endpoint`].
pub fn integrate_power_endpoint_c<F: Fn(f64) -> Complex64>(
    f: F,
    b: f64,
    p: f64,
    tol: f64,
) -> Result<Complex64> {
    if b <= 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let m = power_substitution_order(p);
    let mf = m as f64;
    let g = |u: f64| {
        if u == 0.0 && m > 1 {
            return Complex64::new(0.0, 0.0);
        }
        let x = u.powi(m);
        f(x) * (mf * u.powi(m - 1))
    };
    adaptive(&g, 0.0, b.powf(1.0 / mf), tol)
}

fn power_substitution_order(p: f64) -> i32 {
    if p >= 1.0 {
        return 1;
    }
    // Need m(p+1) - 1 >= 1, i.e. m >= 2/(p+1).
    ((2.0 / (p + 1.0)).ceil() as i32).clamp(1, 64)
}

/// ∫_a^∞ f for integrands with (roughly) exponential decay at rate `rate`.
/// Integrates unit chunks until both the last chunk and the a-priori tail
/// bound drop below the tolerance.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, rate: f64, tol: f64) -> Result<f64> {
    if rate <= 0.0 {
        return Err(Error::Numerical(
            "semi-infinite quadrature needs a positive decay rate".into(),
        ));
    }
    let step = (1.0f64 / rate).clamp(0.25, 8.0);
    let mut total = 0.0;
    let mut lo = a;
    let mut quiet = 0usize;
    for _ in 0..4000 {
        let hi = lo + step;
        let chunk = adaptive(&f, lo, hi, tol / 8.0)?;
        total += chunk;
        lo = hi;
        if chunk.abs() < tol / 4.0 {
            quiet += 1;
            // Geometric tail with the supplied rate: chunk/(e^{rate*step}-1).
            let tail = chunk.abs() / (rate * step).exp_m1().max(1e-12);
            if quiet >= 2 && tail < tol {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::Numerical(
        "semi-infinite quadrature did not reach its tolerance".into(),
    ))
}
