//! Quadrature engine.
//!
//! Three rules cover everything the lab integrates:
//!
//! * a midpoint rule in the angle variable after the cosine substitution
//!   `x = c + r cos(theta)`, which removes inverse-square-root endpoint
//!   singularities of band and gap integrands and converges spectrally for
//!   analytic integrands; node counts double until two successive values
//!   agree to the requested relative tolerance;
//! * a tanh-sinh (double-exponential) rule for pieces whose endpoints carry
//!   declared algebraic or logarithmic singularities (density power factors,
//!   log integrands split at their root);
//! * Chebyshev series via a direct DCT on cosine-clustered nodes, used both
//!   to represent the smooth part of equilibrium densities and to integrate
//!   in-band logarithmic kernels through closed-form Chebyshev log moments.

use crate::error::{Error, Result};
use crate::real::Real;

/// Convergence policy shared by the adaptive rules.
#[derive(Clone, Debug)]
pub struct QuadCfg {
    /// Relative agreement between successive refinements.
    pub rel_tol: f64,
    /// Doubling cap for the midpoint rule (max nodes = start << max_doublings).
    pub max_doublings: u32,
    /// Level cap for tanh-sinh refinement.
    pub max_de_level: u32,
}

impl Default for QuadCfg {
    fn default() -> Self {
        QuadCfg {
            rel_tol: 1e-13,
            max_doublings: 14,
            max_de_level: 12,
        }
    }
}

impl QuadCfg {
    /// Tolerance tightened for extended precision runs: truncation stays at
    /// the configured level but never looser than the binary64 default.
    pub fn for_digits(digits: u32) -> Self {
        let mut cfg = QuadCfg::default();
        if digits > 15 {
            // keep roughly `digits - 20` correct digits, floor at the default
            let d = (digits.saturating_sub(20)).max(13);
            cfg.rel_tol = 10f64.powi(-(d as i32));
            cfg.max_de_level = 14;
            cfg.max_doublings = 16;
        }
        cfg
    }
}

/// Midpoint rule for `(pi/n) * sum f(theta_j)`, `theta_j = (j+1/2) pi / n`.
///
/// This is `\int_0^pi f(theta) dtheta`; with `f(theta) = g(c + r cos theta)`
/// it is the cosine-substitution image of a band or gap integral against the
/// weight `1/sqrt((x-a)(b-x))` (up to the factor `r` the caller owns).
pub fn midpoint_theta<R: Real, F: Fn(&R) -> R>(f: &F, n: usize, template: &R) -> (R, R) {
    let pi = template.pi();
    let h = pi.clone() / template.val(n as f64);
    let mut sum = template.val(0.0);
    let mut abs_sum = template.val(0.0);
    for j in 0..n {
        let theta = h.clone() * template.val(j as f64 + 0.5);
        let v = f(&theta);
        abs_sum += v.clone().abs();
        sum += v;
    }
    (sum * &h, abs_sum * &h)
}

/// Doubling driver for [`midpoint_theta`]. Returns the value and the node
/// count that achieved agreement.
pub fn adaptive_theta<R: Real, F: Fn(&R) -> R>(
    f: &F,
    start: usize,
    cfg: &QuadCfg,
    template: &R,
    what: &str,
) -> Result<(R, usize)> {
    let tol = template.val(cfg.rel_tol);
    let mut n = start.max(4);
    let (mut prev, _) = midpoint_theta(f, n, template);
    let mut last = prev.clone();
    for _ in 0..cfg.max_doublings {
        n *= 2;
        let (cur, cur_abs) = midpoint_theta(f, n, template);
        let delta = (cur.clone() - &prev).abs();
        let scale = crate::real::rmax(cur_abs.clone(), template.val(f64::MIN_POSITIVE));
        if delta <= tol.clone() * &scale {
            return Ok((cur, n));
        }
        last = cur.clone();
        prev = cur;
    }
    Err(Error::non_convergence(
        format!("{what} (midpoint theta rule, {n} nodes)"),
        prev.to_f64(),
        last.to_f64(),
    ))
}

/// Tanh-sinh rule on (a, b) for integrands with possible endpoint
/// singularities. The integrand receives exact distances to both endpoints,
/// `g(x, x - a, b - x)`, so that factors like `(x-a)^gamma` or `log(b-x)`
/// keep full accuracy deep in the endpoint regions.
pub fn tanh_sinh<R: Real, G: Fn(&R, &R, &R) -> R>(
    g: &G,
    a: &R,
    b: &R,
    cfg: &QuadCfg,
    what: &str,
) -> Result<R> {
    let template = a;
    let half = template.val(0.5);
    let r = (b.clone() - a) * &half;
    let pi_half = template.pi() * &half;
    let tol = template.val(cfg.rel_tol);
    let tiny = template.val(f64::MIN_POSITIVE).val(1e-290);

    // term at abscissa t: weight w(t) * g(x(t), x-a, b-x), plus mirrored -t
    let term_pair = |t: &R| -> (R, bool) {
        let u = pi_half.clone() * t.clone().sinh();
        let e2u = (u.clone() * template.val(2.0)).exp();
        if !e2u.is_finite_val() || e2u.is_zero() {
            return (template.val(0.0), true);
        }
        let denom_p = e2u.clone() + template.val(1.0);
        // distances from the two endpoints at +t and (mirrored) at -t
        let d_far = (r.clone() * template.val(2.0)) * &e2u / &denom_p;
        let d_near = r.clone() * template.val(2.0) / &denom_p;
        if d_near <= tiny {
            return (template.val(0.0), true);
        }
        let w = pi_half.clone() * t.clone().cosh() * &r * template.val(4.0) * &e2u
            / (denom_p.clone() * &denom_p);
        if w.is_zero() {
            return (template.val(0.0), true);
        }
        let x_plus = a.clone() + &d_far;
        let x_minus = a.clone() + &d_near;
        let v_plus = g(&x_plus, &d_far, &d_near);
        let v_minus = g(&x_minus, &d_near, &d_far);
        ((v_plus + v_minus) * w, false)
    };

    let center = {
        let x0 = (a.clone() + b) * &half;
        let da = x0.clone() - a;
        let db = b.clone() - &x0;
        g(&x0, &da, &db) * &pi_half * &r
    };

    // level 0: h = 1, nodes at integer t plus the center point
    let mut h = template.val(1.0);
    let mut abs_sum = center.clone().abs();
    let mut sum = center;
    let mut k = 1i64;
    loop {
        let t = h.clone() * template.val(k as f64);
        let (v, stop) = term_pair(&t);
        abs_sum += v.clone().abs();
        sum += v;
        if stop || k > 64 {
            break;
        }
        k += 1;
    }
    let mut estimate = sum.clone() * &h;

    for level in 1..=cfg.max_de_level {
        h = h * &half;
        // new nodes: odd multiples of the refined h
        let mut k = 1i64;
        loop {
            let t = h.clone() * template.val(k as f64);
            let (v, stop) = term_pair(&t);
            abs_sum += v.clone().abs();
            sum += v;
            if stop || k > (1 << 22) {
                break;
            }
            k += 2;
        }
        let new_estimate = sum.clone() * &h;
        let delta = (new_estimate.clone() - &estimate).abs();
        // scale against the total-variation estimate so that integrals whose
        // true value is zero still converge
        let scale = crate::real::rmax(
            crate::real::rmax(new_estimate.clone().abs(), abs_sum.clone() * &h),
            template.val(1e-300),
        );
        if level >= 3 && delta <= tol.clone() * &scale {
            return Ok(new_estimate);
        }
        estimate = new_estimate;
    }
    Err(Error::non_convergence(
        format!("{what} (tanh-sinh rule)"),
        estimate.to_f64(),
        estimate.to_f64(),
    ))
}

/// Chebyshev coefficients of a smooth function on [-1, 1] sampled at the
/// cosine-clustered nodes `s_j = cos((j+1/2) pi / n)`:
/// `F(s) = c_0 + sum_{k>=1} c_k T_k(s)`.
pub fn chebyshev_coeffs<R: Real, F: Fn(&R) -> R>(f: &F, n: usize, template: &R) -> Vec<R> {
    let pi = template.pi();
    let h = pi / template.val(n as f64);
    let mut values = Vec::with_capacity(n);
    let mut cosines = Vec::with_capacity(n);
    for j in 0..n {
        let theta = h.clone() * template.val(j as f64 + 0.5);
        let s = theta.clone().cos();
        values.push(f(&s));
        cosines.push(s);
    }
    let mut coeffs = Vec::with_capacity(n);
    let inv_n = template.val(1.0) / template.val(n as f64);
    let two_inv_n = template.val(2.0) * &inv_n;
    // k = 0
    let mut c0 = template.val(0.0);
    for v in &values {
        c0 += v;
    }
    coeffs.push(c0 * &inv_n);
    // T_k(s_j) by recurrence in k for each j
    let mut t_prev: Vec<R> = vec![template.val(1.0); n];
    let mut t_cur: Vec<R> = cosines.clone();
    for _k in 1..n {
        let mut ck = template.val(0.0);
        for j in 0..n {
            ck += t_cur[j].clone() * &values[j];
        }
        coeffs.push(ck * &two_inv_n);
        // advance recurrence T_{k+1} = 2 s T_k - T_{k-1}
        for j in 0..n {
            let next =
                cosines[j].clone() * &t_cur[j] * template.val(2.0) - t_prev[j].clone();
            t_prev[j] = std::mem::replace(&mut t_cur[j], next);
        }
    }
    coeffs
}

/// Doubling driver for [`chebyshev_coeffs`]: grows the node count until the
/// trailing eighth of the coefficients is negligible against the largest.
pub fn adaptive_chebyshev_coeffs<R: Real, F: Fn(&R) -> R>(
    f: &F,
    start: usize,
    cfg: &QuadCfg,
    template: &R,
    what: &str,
) -> Result<Vec<R>> {
    let mut n = start.max(16);
    let tol = template.val(cfg.rel_tol);
    for _ in 0..=cfg.max_doublings {
        let coeffs = chebyshev_coeffs(f, n, template);
        let mut largest = template.val(0.0);
        for c in &coeffs {
            largest = crate::real::rmax(largest, c.clone().abs());
        }
        let tail_start = n - (n / 8).max(2);
        let mut tail = template.val(0.0);
        for c in &coeffs[tail_start..] {
            tail = crate::real::rmax(tail, c.clone().abs());
        }
        if largest.is_zero() || tail <= tol.clone() * &largest {
            return Ok(coeffs);
        }
        n *= 2;
    }
    Err(Error::non_convergence(
        format!("{what} (chebyshev expansion, {n} nodes)"),
        f64::NAN,
        f64::NAN,
    ))
}

/// Gauss-Legendre nodes and weights on (-1, 1), by Newton iteration on the
/// Legendre recurrence from Chebyshev initial guesses. Exact for polynomials
/// of degree <= 2n-1; used for Lebesgue-weight band integrals where the
/// cosine-substitution midpoint rule would only converge algebraically.
pub fn gauss_legendre<R: Real>(n: usize, template: &R) -> (Vec<R>, Vec<R>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let one = template.val(1.0);
    let two = template.val(2.0);
    // Newton: quadratic convergence doubles correct digits each step
    let iterations = 6 + template.digits() / 10;
    for i in 0..n {
        let guess = (template.pi() * template.val((i as f64 + 0.75) / (n as f64 + 0.5))).cos();
        let mut x = guess;
        let mut dp = template.val(0.0);
        for _ in 0..iterations {
            // P_n(x) and P_n'(x) by the three-term recurrence
            let mut p_prev = one.clone();
            let mut p_cur = x.clone();
            for k in 1..n {
                let kf = template.val(k as f64);
                let next = ((two.clone() * &kf + &one) * &x * &p_cur
                    - kf.clone() * &p_prev)
                    / template.val(k as f64 + 1.0);
                p_prev = std::mem::replace(&mut p_cur, next);
            }
            let p_n = if n == 0 { one.clone() } else { p_cur.clone() };
            dp = template.val(n as f64) * (x.clone() * &p_cur - &p_prev)
                / (x.clone() * &x - &one);
            let step = p_n / &dp;
            x -= step;
        }
        let w = two.clone() / ((one.clone() - x.clone() * &x) * dp.clone() * &dp);
        nodes.push(x);
        weights.push(w);
    }
    (nodes, weights)
}

/// Clenshaw evaluation of `c_0 + sum c_k T_k(s)`.
pub fn clenshaw<R: Real>(coeffs: &[R], s: &R) -> R {
    if coeffs.is_empty() {
        return s.val(0.0);
    }
    let two_s = s.clone() + s;
    let mut b1 = s.val(0.0);
    let mut b2 = s.val(0.0);
    for c in coeffs.iter().skip(1).rev() {
        let next = two_s.clone() * &b1 - b2 + c;
        b2 = std::mem::replace(&mut b1, next);
    }
    coeffs[0].clone() + s.clone() * &b1 - b2
}

/// `sum_{k>=1} c_k T_k(sigma) / k`, the series part of the in-band Chebyshev
/// log moments: for sigma, s in [-1,1],
/// `(1/pi) \int log|sigma - s| T_k(s) / sqrt(1-s^2) ds` equals `-log 2` for
/// k = 0 and `-T_k(sigma)/(2k) * 2 = -T_k(sigma)/k` against the expansion
/// `F = c_0 + sum c_k T_k`, so
/// `(1/pi) \int F(s) log|sigma-s|/sqrt(1-s^2) ds
///      = -c_0 log 2 - sum_{k>=1} c_k T_k(sigma)/k`.
pub fn log_moment_series<R: Real>(coeffs: &[R], sigma: &R) -> R {
    let mut sum = sigma.val(0.0);
    if coeffs.len() < 2 {
        return sum;
    }
    let mut t_prev = sigma.val(1.0);
    let mut t_cur = sigma.clone();
    for (k, c) in coeffs.iter().enumerate().skip(1) {
        sum += t_cur.clone() * c / sigma.val(k as f64);
        let next = sigma.clone() * &t_cur * sigma.val(2.0) - t_prev.clone();
        t_prev = std::mem::replace(&mut t_cur, next);
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::MpReal;

    #[test]
    fn midpoint_integrates_even_periodic() {
        // \int_0^pi exp(cos theta) dtheta = pi I_0(1); the rule is spectral
        // for integrands of the form g(cos theta)
        let cfg = QuadCfg::default();
        let f = |theta: &f64| theta.cos().exp();
        let (value, _) = adaptive_theta(&f, 16, &cfg, &0.0f64, "exp(cos)").unwrap();
        let expect = std::f64::consts::PI * 1.2660658777520084;
        assert!((value - expect).abs() < 1e-12, "value = {value}");
    }

    #[test]
    fn midpoint_cosine_substitution_arcsine_weight() {
        // \int_{-1}^{1} x^2 / sqrt(1-x^2) dx = pi/2
        let cfg = QuadCfg::default();
        let f = |theta: &f64| theta.cos().powi(2);
        let (value, _) = adaptive_theta(&f, 16, &cfg, &0.0f64, "x^2 weight").unwrap();
        assert!((value - std::f64::consts::FRAC_PI_2).abs() < 1e-13);
    }

    #[test]
    fn tanh_sinh_log_singularity() {
        // \int_0^1 log(1/x) dx = 1
        let cfg = QuadCfg::default();
        let g = |_x: &f64, da: &f64, _db: &f64| -da.ln();
        let v = tanh_sinh(&g, &0.0f64, &1.0f64, &cfg, "log").unwrap();
        assert!((v - 1.0).abs() < 1e-13, "v = {v}");
    }

    #[test]
    fn tanh_sinh_inverse_sqrt() {
        // \int_0^1 x^{-1/2} dx = 2
        let cfg = QuadCfg::default();
        let g = |_x: &f64, da: &f64, _db: &f64| 1.0 / da.sqrt();
        let v = tanh_sinh(&g, &0.0f64, &1.0f64, &cfg, "rsqrt").unwrap();
        assert!((v - 2.0).abs() < 1e-12, "v = {v}");
    }

    #[test]
    fn tanh_sinh_both_endpoints_singular() {
        // \int_{-1}^{1} 1/sqrt(1-x^2) dx = pi
        let cfg = QuadCfg::default();
        let g = |_x: &f64, da: &f64, db: &f64| 1.0 / (da * db).sqrt();
        let v = tanh_sinh(&g, &-1.0f64, &1.0f64, &cfg, "arcsine").unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-12, "v = {v}");
    }

    #[test]
    fn tanh_sinh_extended_precision() {
        // \int_0^1 log(1/x) dx = 1 at 50 digits
        let cfg = QuadCfg::for_digits(50);
        let zero = MpReal::with_digits(50, 0.0);
        let one = MpReal::with_digits(50, 1.0);
        let g = |_x: &MpReal, da: &MpReal, _db: &MpReal| -(da.clone().ln());
        let v = tanh_sinh(&g, &zero, &one, &cfg, "log mp").unwrap();
        let err = (v - one.clone()).abs();
        assert!(err < one.val(1e-28), "err = {err}");
    }

    #[test]
    fn gauss_legendre_exactness() {
        // GL(12) integrates x^22 exactly: \int_{-1}^1 x^22 dx = 2/23
        let (nodes, weights) = gauss_legendre(12, &0.0f64);
        let value: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| x.powi(22) * w)
            .sum();
        assert!((value - 2.0 / 23.0).abs() < 1e-14, "value = {value}");
        let total: f64 = weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_extended() {
        let t = MpReal::with_digits(50, 0.0);
        let (nodes, weights) = gauss_legendre(8, &t);
        let mut value = t.val(0.0);
        for (x, w) in nodes.iter().zip(&weights) {
            value += x.clone().powi(10) * w;
        }
        let expect = t.val(2.0) / t.val(11.0);
        assert!((value - expect).abs() < t.val(1e-45));
    }

    #[test]
    fn dct_recovers_polynomial() {
        let f = |s: &f64| 3.0 + 2.0 * s + (2.0 * s * s - 1.0); // 3 + 2 T1 + T2
        let coeffs = chebyshev_coeffs(&f, 32, &0.0f64);
        assert!((coeffs[0] - 3.0).abs() < 1e-14);
        assert!((coeffs[1] - 2.0).abs() < 1e-14);
        assert!((coeffs[2] - 1.0).abs() < 1e-14);
        for c in &coeffs[3..] {
            assert!(c.abs() < 1e-13);
        }
    }

    #[test]
    fn clenshaw_matches_series() {
        let coeffs = vec![1.0f64, -0.5, 0.25, 0.125];
        let s = 0.3f64;
        let direct = 1.0 - 0.5 * s + 0.25 * (2.0 * s * s - 1.0)
            + 0.125 * (4.0 * s * s * s - 3.0 * s);
        assert!((clenshaw(&coeffs, &s) - direct).abs() < 1e-15);
    }

    #[test]
    fn log_moments_reproduce_interval_potential() {
        // For F = 1 the in-band potential of mu_[-1,1] is -log 2 everywhere:
        // -c_0 log 2 - series = -log 2 when the series is empty.
        let coeffs = vec![1.0f64];
        for sigma in [-0.9, -0.3, 0.0, 0.47, 1.0] {
            let series = log_moment_series(&coeffs, &sigma);
            let value = -(2.0f64.ln()) * coeffs[0] - series;
            assert!((value + 2.0f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn log_moments_against_tanh_sinh() {
        // (1/pi) \int F(s) log|sigma - s| / sqrt(1-s^2) ds for F = 1 + s/2 + s^2
        // computed once by closed-form moments and once by splitting at sigma
        // with the DE rule.
        let f = |s: f64| 1.0 + 0.5 * s + s * s;
        let coeffs = chebyshev_coeffs(&|s: &f64| f(*s), 64, &0.0f64);
        let sigma = 0.37f64;
        let closed = -coeffs[0] * 2.0f64.ln() - log_moment_series(&coeffs, &sigma);

        let cfg = QuadCfg::default();
        let integrand_left = |s: &f64, da: &f64, db: &f64| {
            // da = s + 1, db = sigma - s on the left piece
            f(*s) * db.ln() / (da * (1.0 - s)).sqrt()
        };
        let integrand_right = |s: &f64, da: &f64, db: &f64| {
            // da = s - sigma, db = 1 - s on the right piece
            f(*s) * da.ln() / ((1.0 + s) * db).sqrt()
        };
        let left = tanh_sinh(&integrand_left, &-1.0f64, &sigma, &cfg, "left").unwrap();
        let right = tanh_sinh(&integrand_right, &sigma, &1.0f64, &cfg, "right").unwrap();
        let brute = (left + right) / std::f64::consts::PI;
        assert!(
            (closed - brute).abs() < 1e-11,
            "closed = {closed}, brute = {brute}"
        );
    }
}
