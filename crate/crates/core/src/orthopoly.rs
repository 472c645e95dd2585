//! Monic orthogonal polynomials, their norms, and Widom factors.
//!
//! Real-line measures go through the discretized Stieltjes procedure on a
//! global quadrature distributed over bands; circle measures go through a
//! Levinson-type recursion on trigonometric moments. Norms and Widom factors
//! are carried in the log domain throughout: `Cap(K)^n` and the recurrence
//! products leave the binary64 range near n = 40 on small sets.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::measures::{self, DensitySpec, MeasureSpec};
use crate::potential::EquilibriumData;
use crate::quad::QuadCfg;
use crate::real::{rmax, Real};

/// Recurrence data and capacity-normalized norms for one measure.
#[derive(Clone, Debug)]
pub enum OrthoKind<R: Real> {
    /// Three-term recurrence `p_{k+1} = (x - a_{k+1}) p_k - b_k p_{k-1}`
    /// with `a` and `b` 1-indexed: `a[k-1] = a_k`, `b[k-1] = b_k` and
    /// `log ||P_n||^2 = sum_{k<=n} log b_k`.
    RealLine { a: Vec<R>, b: Vec<R> },
    /// Verblunsky coefficients as (re, im):
    /// `log ||P_n||^2 = sum_{k<n} log(1 - |alpha_k|^2)`.
    Circle { verblunsky: Vec<(R, R)> },
}

#[derive(Clone, Debug)]
pub struct OrthoResult<R: Real> {
    pub n_max: usize,
    pub kind: OrthoKind<R>,
    /// `log ||P_n||^2` for n = 0..=n_max.
    pub log_norm_sq: Vec<R>,
    /// `log W_n = log||P_n|| - n log Cap` for n = 0..=n_max.
    pub widom_log: Vec<R>,
    /// Set when the coefficients came from the Gram-determinant fallback
    /// (complex atoms), which yields norms but no recurrence.
    pub gram_fallback: bool,
}

impl<R: Real> OrthoResult<R> {
    /// Widom factors `W_n`, n = 0..=n_max, with `W_0 = 1`.
    pub fn widom_factors(&self) -> Vec<R> {
        self.widom_log.iter().map(|w| w.clone().exp()).collect()
    }

    pub fn norm(&self, n: usize) -> R {
        (self.log_norm_sq[n].clone() * self.log_norm_sq[n].val(0.5)).exp()
    }
}

/// Agreement required between two quadrature resolutions of the recurrence
/// coefficients.
const STABILITY_TOL: f64 = 1e-11;

/// Monic orthogonal polynomial recurrence through degree `n`.
pub fn recurrence<R: Real>(mu: &MeasureSpec<R>, n: usize) -> Result<OrthoResult<R>> {
    if n < 1 {
        return Err(Error::validation("recurrence needs n >= 1"));
    }
    if mu.base().set().is_circle() {
        return circle_recurrence(mu, n);
    }
    if !mu.atoms().all_real() {
        return gram_norms(mu, n);
    }
    let log_cap = mu.base().log_capacity();
    let degree = 2 * n + 2;
    let (nodes, weights) = real_line_nodes(mu, degree)?;
    let (a, b) = stieltjes_verified(mu, degree, n, &nodes, &weights)?;
    Ok(assemble_real(a, b, log_cap))
}

fn assemble_real<R: Real>(a: Vec<R>, b: Vec<R>, log_cap: R) -> OrthoResult<R> {
    let n = b.len();
    let template = log_cap.val(0.0);
    let mut log_norm_sq = Vec::with_capacity(n + 1);
    log_norm_sq.push(template.val(0.0));
    for k in 0..n {
        let prev = log_norm_sq[k].clone();
        log_norm_sq.push(prev + b[k].clone().ln());
    }
    let widom_log = widom_from_norms(&log_norm_sq, &log_cap);
    OrthoResult {
        n_max: n,
        kind: OrthoKind::RealLine { a, b },
        log_norm_sq,
        widom_log,
        gram_fallback: false,
    }
}

fn widom_from_norms<R: Real>(log_norm_sq: &[R], log_cap: &R) -> Vec<R> {
    log_norm_sq
        .iter()
        .enumerate()
        .map(|(k, l)| l.clone() * l.val(0.5) - log_cap.clone() * l.val(k as f64))
        .collect()
}

/// Widom factors `W_n(mu)`, n = 0..=N.
pub fn widom_factors<R: Real>(mu: &MeasureSpec<R>, n: usize) -> Result<Vec<R>> {
    Ok(recurrence(mu, n)?.widom_factors())
}

/// Discrete nodes for the continuous part plus real atoms.
fn real_line_nodes<R: Real>(mu: &MeasureSpec<R>, degree: usize) -> Result<(Vec<R>, Vec<R>)> {
    let (mut nodes, mut weights) = measures::discrete_measure(mu, degree)?;
    let template = mu.normalization().val(0.0);
    for atom in &mu.atoms().atoms {
        nodes.push(template.val(atom.re));
        weights.push(template.val(atom.mass) * mu.normalization());
    }
    Ok((nodes, weights))
}

/// Stieltjes with a stability check: the coefficients must agree with a
/// refined quadrature to `STABILITY_TOL`, otherwise the resolution doubles.
fn stieltjes_verified<R: Real>(
    mu: &MeasureSpec<R>,
    degree: usize,
    n: usize,
    nodes: &[R],
    weights: &[R],
) -> Result<(Vec<R>, Vec<R>)> {
    let mut coarse = stieltjes(nodes, weights, n)?;
    let mut factor = 2usize;
    for _ in 0..3 {
        let (nodes2, weights2) = real_line_nodes(mu, degree * factor)?;
        let fine = stieltjes(&nodes2, &weights2, n)?;
        if recurrence_agrees(&coarse, &fine) {
            return Ok(fine);
        }
        coarse = fine;
        factor *= 2;
    }
    Err(Error::non_convergence(
        "recurrence coefficients vs quadrature refinement",
        coarse.1.last().map(|b| b.to_f64()).unwrap_or(f64::NAN),
        f64::NAN,
    ))
}

fn recurrence_agrees<R: Real>(x: &(Vec<R>, Vec<R>), y: &(Vec<R>, Vec<R>)) -> bool {
    let template = x.1[0].val(0.0);
    let tol = template.val(STABILITY_TOL);
    // b_k live on the squared x-scale, a_k on the x-scale; tiny entries
    // (symmetric sets have a_k = 0) are compared against the family scale
    let mut b_scale = template.val(1e-300);
    for v in x.1.iter().chain(y.1.iter()) {
        b_scale = rmax(b_scale, v.clone().abs());
    }
    let mut a_scale = b_scale.clone().sqrt();
    for v in x.0.iter().chain(y.0.iter()) {
        a_scale = rmax(a_scale, v.clone().abs());
    }
    for (u, v) in x.0.iter().zip(&y.0) {
        if (u.clone() - v).abs() > tol.clone() * &a_scale {
            return false;
        }
    }
    for (u, v) in x.1.iter().zip(&y.1) {
        if (u.clone() - v).abs() > tol.clone() * &b_scale {
            return false;
        }
    }
    true
}

/// The discretized Stieltjes procedure: three-term recurrence coefficients
/// of the discrete measure `sum w_i delta_{x_i}`.
fn stieltjes<R: Real>(nodes: &[R], weights: &[R], n: usize) -> Result<(Vec<R>, Vec<R>)> {
    let m = nodes.len();
    if m < n + 1 {
        return Err(Error::validation(format!(
            "need at least {} support points for degree {n}, got {m}",
            n + 1
        )));
    }
    let template = nodes[0].val(0.0);
    let mut p_prev: Vec<R> = vec![template.val(0.0); m];
    let mut p_cur: Vec<R> = vec![template.val(1.0); m];
    let mut norm_sq = template.val(0.0);
    for w in weights {
        norm_sq += w;
    }
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut b_last = template.val(0.0);
    for k in 0..n {
        let mut xp = template.val(0.0);
        for i in 0..m {
            xp += nodes[i].clone() * &p_cur[i] * &p_cur[i] * &weights[i];
        }
        let a_k = xp / &norm_sq;
        let mut next_norm_sq = template.val(0.0);
        for i in 0..m {
            let mut next = (nodes[i].clone() - &a_k) * &p_cur[i];
            if k > 0 {
                next -= b_last.clone() * &p_prev[i];
            }
            next_norm_sq += next.clone() * &next * &weights[i];
            p_prev[i] = std::mem::replace(&mut p_cur[i], next);
        }
        let b_k = next_norm_sq.clone() / &norm_sq;
        if !(b_k > template.val(0.0)) || !b_k.is_finite_val() {
            return Err(Error::non_convergence(
                format!(
                    "loss of positivity in b_{} (raise the working precision)",
                    k + 1
                ),
                b_k.to_f64(),
                norm_sq.to_f64(),
            ));
        }
        a.push(a_k);
        b.push(b_k.clone());
        b_last = b_k;
        norm_sq = next_norm_sq;
    }
    Ok((a, b))
}

// ---------------------------------------------------------------------------
// Circle: trigonometric moments and the Szego recursion
// ---------------------------------------------------------------------------

/// Minimal complex pair used by the circle recursion and the Gram fallback.
#[derive(Clone, Debug)]
struct Cx<R> {
    re: R,
    im: R,
}

impl<R: Real> Cx<R> {
    fn zero(t: &R) -> Self {
        Cx {
            re: t.val(0.0),
            im: t.val(0.0),
        }
    }
    fn real(v: R) -> Self {
        let im = v.val(0.0);
        Cx { re: v, im }
    }
    fn add(&self, o: &Self) -> Self {
        Cx {
            re: self.re.clone() + &o.re,
            im: self.im.clone() + &o.im,
        }
    }
    fn sub(&self, o: &Self) -> Self {
        Cx {
            re: self.re.clone() - &o.re,
            im: self.im.clone() - &o.im,
        }
    }
    fn mul(&self, o: &Self) -> Self {
        Cx {
            re: self.re.clone() * &o.re - self.im.clone() * &o.im,
            im: self.re.clone() * &o.im + self.im.clone() * &o.re,
        }
    }
    fn conj(&self) -> Self {
        Cx {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }
    fn scale(&self, s: &R) -> Self {
        Cx {
            re: self.re.clone() * s,
            im: self.im.clone() * s,
        }
    }
    fn abs_sq(&self) -> R {
        self.re.clone() * &self.re + self.im.clone() * &self.im
    }
}

/// Trigonometric moments `c_k = \int e^{-ik theta} d mu(theta)`, k = 0..=n,
/// for the normalized circle measure, with grid/net doubling until stable.
fn circle_moments<R: Real>(mu: &MeasureSpec<R>, n: usize) -> Result<Vec<Cx<R>>> {
    let template = mu.normalization().val(0.0);
    let cfg = QuadCfg::for_digits(mu.base().digits());
    let tol = template.val(cfg.rel_tol.max(1e-15));
    let eval = |res: u32| -> Vec<Cx<R>> {
        let (thetas, weights) = measures::circle_node_set(mu.density(), res, &template);
        let mut c: Vec<Cx<R>> = (0..=n).map(|_| Cx::zero(&template)).collect();
        for (theta, w) in thetas.iter().zip(&weights) {
            let w = w.clone() * mu.normalization();
            // e^{-ik theta} by repeated multiplication
            let base = Cx {
                re: theta.clone().cos(),
                im: -(theta.clone().sin()),
            };
            let mut cur = Cx {
                re: template.val(1.0),
                im: template.val(0.0),
            };
            for ck in c.iter_mut() {
                *ck = ck.add(&cur.scale(&w));
                cur = cur.mul(&base);
            }
        }
        c
    };
    let mut res = 0;
    let mut prev = eval(res);
    for _ in 0..8 {
        res += 1;
        let cur = eval(res);
        let mut ok = true;
        for (p, c) in prev.iter().zip(&cur) {
            let delta = p.sub(c).abs_sq();
            if delta > tol.clone() * &tol {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::non_convergence(
        "trigonometric moments",
        prev[0].re.to_f64(),
        f64::NAN,
    ))
}

/// Szego recursion on moments: monic OPUC coefficients and Verblunsky
/// parameters.
fn circle_recurrence<R: Real>(mu: &MeasureSpec<R>, n: usize) -> Result<OrthoResult<R>> {
    let template = mu.normalization().val(0.0);
    let c = circle_moments(mu, n)?;
    // c_{-m} = conj(c_m)
    let moment = |m: i64| -> Cx<R> {
        if m >= 0 {
            c[m as usize].clone()
        } else {
            c[(-m) as usize].conj()
        }
    };
    let inner = |f: &[Cx<R>], g: &[Cx<R>]| -> Cx<R> {
        let mut acc = Cx::zero(&template);
        for (j, fj) in f.iter().enumerate() {
            for (k, gk) in g.iter().enumerate() {
                acc = acc.add(&fj.mul(&gk.conj()).mul(&moment(k as i64 - j as i64)));
            }
        }
        acc
    };

    let mut phi: Vec<Cx<R>> = vec![Cx::real(template.val(1.0))];
    let mut norm_sq = c[0].re.clone();
    let mut log_norm_sq = vec![norm_sq.clone().ln()];
    let mut verblunsky = Vec::with_capacity(n);
    let one = template.val(1.0);
    for _deg in 0..n {
        let mut z_phi = vec![Cx::zero(&template)];
        z_phi.extend(phi.iter().cloned());
        let phi_star: Vec<Cx<R>> = phi.iter().rev().map(|p| p.conj()).collect();
        let alpha_bar = {
            let num = inner(&z_phi, &phi_star);
            let inv = one.clone() / &norm_sq;
            num.scale(&inv)
        };
        let asq = alpha_bar.abs_sq();
        if !(asq < one) {
            return Err(Error::non_convergence(
                "Verblunsky coefficient left the unit disk (raise precision)",
                asq.to_f64(),
                norm_sq.to_f64(),
            ));
        }
        let mut next = Vec::with_capacity(phi.len() + 1);
        for k in 0..z_phi.len() {
            let correction = if k < phi_star.len() {
                phi_star[k].mul(&alpha_bar)
            } else {
                Cx::zero(&template)
            };
            next.push(z_phi[k].sub(&correction));
        }
        phi = next;
        norm_sq = norm_sq * (one.clone() - &asq);
        log_norm_sq.push(norm_sq.clone().ln());
        let alpha = alpha_bar.conj();
        verblunsky.push((alpha.re, alpha.im));
    }
    // Cap(circle) = 1: widom_log = (1/2) log norm^2
    let widom_log = log_norm_sq
        .iter()
        .map(|l| l.clone() * template.val(0.5))
        .collect();
    Ok(OrthoResult {
        n_max: n,
        kind: OrthoKind::Circle { verblunsky },
        log_norm_sq,
        widom_log,
        gram_fallback: false,
    })
}

// ---------------------------------------------------------------------------
// Gram fallback for complex atoms
// ---------------------------------------------------------------------------

/// Cap on the Gram-determinant fallback degree.
pub const GRAM_FALLBACK_MAX_DEGREE: usize = 20;

/// Modified Gram-Schmidt (with reorthogonalization) on the monomial basis
/// over the discrete support, for measures whose atoms leave the real line.
/// Produces norms and Widom factors; there is no three-term recurrence.
fn gram_norms<R: Real>(mu: &MeasureSpec<R>, n: usize) -> Result<OrthoResult<R>> {
    if n > GRAM_FALLBACK_MAX_DEGREE {
        return Err(Error::validation(format!(
            "complex atoms limit the Gram fallback to degree {GRAM_FALLBACK_MAX_DEGREE}, requested {n}"
        )));
    }
    let template = mu.normalization().val(0.0);
    let degree = 2 * n + 2;
    let (nodes, weights) = measures::discrete_measure(mu, degree)?;
    let mut zs: Vec<Cx<R>> = nodes.into_iter().map(Cx::real).collect();
    let mut ws = weights;
    for atom in &mu.atoms().atoms {
        zs.push(Cx {
            re: template.val(atom.re),
            im: template.val(atom.im),
        });
        ws.push(template.val(atom.mass) * mu.normalization());
    }
    let m = zs.len();
    let dot = |f: &[Cx<R>], g: &[Cx<R>]| -> Cx<R> {
        let mut acc = Cx::zero(&template);
        for i in 0..m {
            acc = acc.add(&f[i].mul(&g[i].conj()).scale(&ws[i]));
        }
        acc
    };

    // orthonormal basis vectors e_0..e_{k-1} as value arrays
    let mut basis: Vec<Vec<Cx<R>>> = Vec::with_capacity(n);
    let mut log_norm_sq = Vec::with_capacity(n + 1);
    let mut monomial: Vec<Cx<R>> = vec![Cx::real(template.val(1.0)); m];
    for k in 0..=n {
        if k > 0 {
            for i in 0..m {
                monomial[i] = monomial[i].mul(&zs[i]);
            }
        }
        let mut v = monomial.clone();
        for _pass in 0..2 {
            for e in &basis {
                let coeff = dot(&v, e);
                for i in 0..m {
                    v[i] = v[i].sub(&e[i].mul(&coeff));
                }
            }
        }
        let nsq = dot(&v, &v).re;
        if !(nsq > template.val(0.0)) || !nsq.is_finite_val() {
            return Err(Error::non_convergence(
                format!("Gram fallback lost positivity at degree {k} (raise precision)"),
                nsq.to_f64(),
                f64::NAN,
            ));
        }
        log_norm_sq.push(nsq.clone().ln());
        let inv_norm = template.val(1.0) / nsq.sqrt();
        let e: Vec<Cx<R>> = v.iter().map(|x| x.scale(&inv_norm)).collect();
        basis.push(e);
    }
    let log_cap = mu.base().log_capacity();
    let widom_log = widom_from_norms(&log_norm_sq, &log_cap);
    Ok(OrthoResult {
        n_max: n,
        kind: OrthoKind::RealLine {
            a: Vec::new(),
            b: Vec::new(),
        },
        log_norm_sq,
        widom_log,
        gram_fallback: true,
    })
}

// ---------------------------------------------------------------------------
// Lebesgue-weight recurrences (interval limit and Cantor-Lebesgue studies)
// ---------------------------------------------------------------------------

/// Recurrence for `d mu = f(x) dx` (normalized internally) on the bands of
/// `eq`, where f is a density grammar w.r.t. Lebesgue measure.
pub fn recurrence_lebesgue<R: Real>(
    eq: &EquilibriumData<R>,
    density: &DensitySpec,
    n: usize,
) -> Result<OrthoResult<R>> {
    let degree = 2 * n + 2;
    let run = |deg: usize| -> Result<(Vec<R>, Vec<R>)> {
        let (nodes, weights) = measures::lebesgue_discrete(eq, density, deg)?;
        let mut total = nodes[0].val(0.0);
        for w in &weights {
            total += w;
        }
        let weights: Vec<R> = weights.into_iter().map(|w| w / &total).collect();
        stieltjes(&nodes, &weights, n)
    };
    let coarse = run(degree)?;
    let fine = run(degree * 2)?;
    if !recurrence_agrees(&coarse, &fine) {
        let finer = run(degree * 4)?;
        if !recurrence_agrees(&fine, &finer) {
            return Err(Error::non_convergence(
                "Lebesgue recurrence vs quadrature refinement",
                fine.1.last().map(|b| b.to_f64()).unwrap_or(f64::NAN),
                finer.1.last().map(|b| b.to_f64()).unwrap_or(f64::NAN),
            ));
        }
        return Ok(assemble_real(finer.0, finer.1, eq.log_capacity()));
    }
    Ok(assemble_real(fine.0, fine.1, eq.log_capacity()))
}

/// Recurrence for the band-uniform measure: equal mass per band with uniform
/// density on each band (the stage-m Cantor-Lebesgue approximation).
pub fn recurrence_band_uniform<R: Real>(
    eq: &EquilibriumData<R>,
    n: usize,
) -> Result<OrthoResult<R>> {
    let degree = 2 * n + 2;
    let run = |deg: usize| -> Result<(Vec<R>, Vec<R>)> {
        let (nodes, weights) = measures::band_uniform_discrete(eq, deg)?;
        stieltjes(&nodes, &weights, n)
    };
    let coarse = run(degree)?;
    let fine = run(degree * 2)?;
    if !recurrence_agrees(&coarse, &fine) {
        return Err(Error::non_convergence(
            "band-uniform recurrence vs quadrature refinement",
            f64::NAN,
            f64::NAN,
        ));
    }
    Ok(assemble_real(fine.0, fine.1, eq.log_capacity()))
}

// ---------------------------------------------------------------------------
// Minimality of the monic orthogonal polynomial
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct MinimalityReport<R> {
    pub trials: usize,
    pub degree: usize,
    /// min over trials of ||Q|| - ||P_n||; nonnegative up to quadrature noise.
    pub min_margin: R,
    pub p_norm: R,
}

/// Check `||Q|| >= ||P_n||` for random monic perturbations
/// `Q = P_n + sum_{k<n} u_k x^k`, `u_k` uniform in [-2, 2].
pub fn minimality_check<R: Real>(
    mu: &MeasureSpec<R>,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<MinimalityReport<R>> {
    if trials < 1 {
        return Err(Error::validation("minimality check needs trials >= 1"));
    }
    let template = mu.normalization().val(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if mu.base().set().is_circle() {
        let c = circle_moments(mu, n)?;
        let moment = |m: i64| -> Cx<R> {
            if m >= 0 {
                c[m as usize].clone()
            } else {
                c[(-m) as usize].conj()
            }
        };
        let norm_sq = |coeffs: &[Cx<R>]| -> R {
            let mut acc = Cx::zero(&template);
            for (j, fj) in coeffs.iter().enumerate() {
                for (k, gk) in coeffs.iter().enumerate() {
                    acc = acc.add(&fj.mul(&gk.conj()).mul(&moment(k as i64 - j as i64)));
                }
            }
            acc.re
        };
        // monic OPUC coefficients from the recursion
        let ortho = circle_recurrence(mu, n)?;
        let p_coeffs = {
            // rebuild Phi_n from the Verblunsky parameters
            let alphas = match &ortho.kind {
                OrthoKind::Circle { verblunsky } => verblunsky.clone(),
                _ => unreachable!(),
            };
            let mut phi: Vec<Cx<R>> = vec![Cx::real(template.val(1.0))];
            for (re, im) in alphas {
                let alpha_bar = Cx { re, im: -im };
                let mut z_phi = vec![Cx::zero(&template)];
                z_phi.extend(phi.iter().cloned());
                let phi_star: Vec<Cx<R>> = phi.iter().rev().map(|p| p.conj()).collect();
                let mut next = Vec::with_capacity(z_phi.len());
                for k in 0..z_phi.len() {
                    let corr = if k < phi_star.len() {
                        phi_star[k].mul(&alpha_bar)
                    } else {
                        Cx::zero(&template)
                    };
                    next.push(z_phi[k].sub(&corr));
                }
                phi = next;
            }
            phi
        };
        let p_norm = norm_sq(&p_coeffs).sqrt();
        let mut min_margin: Option<R> = None;
        for _ in 0..trials {
            let mut q = p_coeffs.clone();
            for coeff in q.iter_mut().take(n) {
                let dre: f64 = rng.random_range(-2.0..2.0);
                let dim: f64 = rng.random_range(-2.0..2.0);
                *coeff = coeff.add(&Cx {
                    re: template.val(dre),
                    im: template.val(dim),
                });
            }
            let margin = norm_sq(&q).sqrt() - &p_norm;
            min_margin = Some(match min_margin {
                None => margin,
                Some(cur) => {
                    if margin < cur {
                        margin
                    } else {
                        cur
                    }
                }
            });
        }
        return Ok(MinimalityReport {
            trials,
            degree: n,
            min_margin: min_margin.expect("trials >= 1"),
            p_norm,
        });
    }

    let degree = 2 * n + 2;
    let (nodes, weights) = real_line_nodes(mu, degree)?;
    let (a, b) = stieltjes(&nodes, &weights, n)?;
    // monomial coefficients of P_n via the recurrence
    let mut prev = vec![template.val(0.0); n + 1];
    let mut cur = vec![template.val(0.0); n + 1];
    cur[0] = template.val(1.0);
    for k in 0..n {
        let mut next = vec![template.val(0.0); n + 1];
        for j in 0..=k {
            next[j + 1] += cur[j].clone();
            next[j] -= a[k].clone() * &cur[j];
            if k > 0 {
                next[j] -= b[k - 1].clone() * &prev[j];
            }
        }
        prev = std::mem::replace(&mut cur, next);
    }
    let norm_of = |coeffs: &[R]| -> R {
        let mut acc = template.val(0.0);
        for (x, w) in nodes.iter().zip(&weights) {
            let mut v = template.val(0.0);
            for c in coeffs.iter().rev() {
                v = v * x + c;
            }
            acc += v.clone() * &v * w;
        }
        acc.sqrt()
    };
    let p_norm = norm_of(&cur);
    let mut min_margin: Option<R> = None;
    for _ in 0..trials {
        let mut q = cur.clone();
        for coeff in q.iter_mut().take(n) {
            let d: f64 = rng.random_range(-2.0..2.0);
            *coeff += template.val(d);
        }
        let margin = norm_of(&q) - &p_norm;
        min_margin = Some(match min_margin {
            None => margin,
            Some(best) => {
                if margin < best {
                    margin
                } else {
                    best
                }
            }
        });
    }
    Ok(MinimalityReport {
        trials,
        degree: n,
        min_margin: min_margin.expect("trials >= 1"),
        p_norm,
    })
}

/// `||P_n||^2` by direct quadrature of `|P_n|^2` (consistency oracle for the
/// recurrence product formula).
pub fn direct_norm_sq<R: Real>(mu: &MeasureSpec<R>, n: usize) -> Result<R> {
    let template = mu.normalization().val(0.0);
    let degree = 2 * n + 2;
    let (nodes, weights) = real_line_nodes(mu, degree * 2)?;
    let (a, b) = stieltjes(&nodes, &weights, n)?;
    let pn = |x: &R| -> R {
        let mut prev = template.val(0.0);
        let mut cur = template.val(1.0);
        for k in 0..n {
            let mut next = (x.clone() - &a[k]) * &cur;
            if k > 0 {
                next -= b[k - 1].clone() * &prev;
            }
            prev = std::mem::replace(&mut cur, next);
        }
        cur
    };
    let sq = |x: &R| {
        let v = pn(x);
        v.clone() * &v
    };
    crate::measures::integrate(mu, sq, &[])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{equilibrium_as_measure, normalize, AtomList};
    use crate::potential::equilibrium_measure;
    use crate::sets::{interval_union_from_f64, CompactSetSpec};

    fn chebyshev_measure() -> MeasureSpec<f64> {
        let set = interval_union_from_f64(&[(-1.0, 1.0)]).unwrap();
        let eq: EquilibriumData<f64> = equilibrium_measure(&set, 0).unwrap();
        equilibrium_as_measure(&eq).unwrap()
    }

    #[test]
    fn chebyshev_recurrence_coefficients() {
        // a_k = 0, b_1 = 1/2, b_k = 1/4 for k >= 2
        let mu = chebyshev_measure();
        let r = recurrence(&mu, 8).unwrap();
        match &r.kind {
            OrthoKind::RealLine { a, b } => {
                for ak in a {
                    assert!(ak.abs() < 1e-12, "a = {ak}");
                }
                assert!((b[0] - 0.5).abs() < 1e-12, "b1 = {}", b[0]);
                for bk in &b[1..] {
                    assert!((bk - 0.25).abs() < 1e-12, "b = {bk}");
                }
            }
            _ => panic!("expected real-line recurrence"),
        }
    }

    #[test]
    fn chebyshev_widom_factors() {
        // W_n^2 = 2 for n >= 1
        let mu = chebyshev_measure();
        let w = widom_factors(&mu, 12).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-13);
        for wn in &w[1..] {
            assert!((wn * wn - 2.0).abs() < 1e-11, "W^2 = {}", wn * wn);
        }
    }

    #[test]
    fn circle_lebesgue_all_zero_verblunsky() {
        let eq: EquilibriumData<f64> = equilibrium_measure(&CompactSetSpec::circle(), 0).unwrap();
        let mu = equilibrium_as_measure(&eq).unwrap();
        let r = recurrence(&mu, 16).unwrap();
        match &r.kind {
            OrthoKind::Circle { verblunsky } => {
                for (re, im) in verblunsky {
                    assert!(re.abs() < 1e-14 && im.abs() < 1e-14);
                }
            }
            _ => panic!("expected circle recurrence"),
        }
        for w in r.widom_factors() {
            assert!((w - 1.0).abs() < 1e-13, "W = {w}");
        }
    }

    #[test]
    fn circle_one_minus_cos_norms() {
        // ||P_n||^2 = (n+2)/(2(n+1)) for w = 1 - cos theta
        let eq: EquilibriumData<f64> = equilibrium_measure(&CompactSetSpec::circle(), 0).unwrap();
        let density = DensitySpec {
            const_factor: 0.5,
            powers: vec![(0.0, 2.0)],
            exp_poly: vec![],
        };
        let mu = normalize(&eq, density, AtomList::empty()).unwrap();
        let r = recurrence(&mu, 16).unwrap();
        for n in 1..=16usize {
            let expect = ((n as f64 + 2.0) / (2.0 * (n as f64 + 1.0))).ln();
            assert!(
                (r.log_norm_sq[n] - expect).abs() < 1e-10,
                "n = {n}: {} vs {expect}",
                r.log_norm_sq[n]
            );
        }
        // alpha_n = -1/(n+2) up to phase convention: check moduli
        match &r.kind {
            OrthoKind::Circle { verblunsky } => {
                for (k, (re, im)) in verblunsky.iter().enumerate() {
                    let modulus = (re * re + im * im).sqrt();
                    let expect = 1.0 / (k as f64 + 2.0);
                    assert!(
                        (modulus - expect).abs() < 1e-10,
                        "alpha_{k} modulus {modulus} vs {expect}"
                    );
                }
            }
            _ => panic!("expected circle recurrence"),
        }
    }

    #[test]
    fn symmetric_set_zero_a() {
        let set = interval_union_from_f64(&[(-1.0, -0.5), (0.5, 1.0)]).unwrap();
        let eq: EquilibriumData<f64> = equilibrium_measure(&set, 0).unwrap();
        let mu = equilibrium_as_measure(&eq).unwrap();
        let r = recurrence(&mu, 10).unwrap();
        match &r.kind {
            OrthoKind::RealLine { a, .. } => {
                for ak in a {
                    assert!(ak.abs() < 1e-11, "a = {ak}");
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn legendre_norms_and_widom() {
        // f = 1/2 on [-1,1]: monic Legendre, b_k = k^2/(4k^2-1),
        // W_n^2 = prod 4k^2/(4k^2-1) (Wallis, increasing toward pi/2)
        let set = interval_union_from_f64(&[(-1.0, 1.0)]).unwrap();
        let eq: EquilibriumData<f64> = equilibrium_measure(&set, 0).unwrap();
        let density = DensitySpec::constant(0.5);
        let r = recurrence_lebesgue(&eq, &density, 12).unwrap();
        match &r.kind {
            OrthoKind::RealLine { b, .. } => {
                for (k, bk) in b.iter().enumerate() {
                    let kk = (k + 1) as f64;
                    let expect = kk * kk / (4.0 * kk * kk - 1.0);
                    assert!(
                        (bk - expect).abs() < 1e-11,
                        "b_{} = {bk} vs {expect}",
                        k + 1
                    );
                }
            }
            _ => unreachable!(),
        }
        let w = r.widom_factors();
        let mut expect = 1.0f64;
        for k in 1..=12usize {
            let kk = k as f64;
            expect *= 4.0 * kk * kk / (4.0 * kk * kk - 1.0);
            assert!(
                (w[k] * w[k] - expect).abs() < 1e-10,
                "W_{k}^2 = {} vs {expect}",
                w[k] * w[k]
            );
        }
    }

    #[test]
    fn minimality_chebyshev() {
        let mu = chebyshev_measure();
        let report = minimality_check(&mu, 7, 100, 12345).unwrap();
        assert!(
            report.min_margin >= -1e-10,
            "margin = {}",
            report.min_margin
        );
    }

    #[test]
    fn minimality_circle_monomial_perturbation() {
        // || z^n + 0.5 ||^2 = 1.25 for Lebesgue: margin sqrt(1.25) - 1
        let eq: EquilibriumData<f64> = equilibrium_measure(&CompactSetSpec::circle(), 0).unwrap();
        let mu = equilibrium_as_measure(&eq).unwrap();
        let report = minimality_check(&mu, 5, 50, 7).unwrap();
        assert!(report.min_margin >= -1e-12);
        assert!((report.p_norm - 1.0).abs() < 1e-13);
    }

    #[test]
    fn atom_outside_increases_norm() {
        // || P ||^2_{mu + atom} >= continuous-part norm for the same P
        let set = interval_union_from_f64(&[(-1.0, 1.0)]).unwrap();
        let eq: EquilibriumData<f64> = equilibrium_measure(&set, 0).unwrap();
        let with_atom = normalize(
            &eq,
            DensitySpec::one(),
            AtomList::real(&[(2.0, 0.3)]),
        )
        .unwrap();
        let r = recurrence(&with_atom, 6).unwrap();
        assert_eq!(r.log_norm_sq.len(), 7);
        for n in 1..=6 {
            assert!(r.log_norm_sq[n].is_finite());
        }
    }

    #[test]
    fn gram_fallback_complex_atom() {
        let set = interval_union_from_f64(&[(-1.0, 1.0)]).unwrap();
        let eq: EquilibriumData<f64> = equilibrium_measure(&set, 0).unwrap();
        let mu = normalize(
            &eq,
            DensitySpec::one(),
            AtomList {
                atoms: vec![crate::measures::Atom {
                    re: 0.0,
                    im: 1.0,
                    mass: 0.5,
                }],
            },
        )
        .unwrap();
        let r = recurrence(&mu, 6).unwrap();
        assert!(r.gram_fallback);
        // Theorem bound sanity: W_n^2 >= e^M with M <= log(1/2) here
        for n in 0..=6usize {
            assert!(r.log_norm_sq[n].is_finite());
        }
        assert!(recurrence(&mu, GRAM_FALLBACK_MAX_DEGREE + 1).is_err());
    }

    #[test]
    fn norm_product_matches_direct_quadrature() {
        let mu = chebyshev_measure();
        let r = recurrence(&mu, 8).unwrap();
        for n in [2usize, 5, 8] {
            let direct = direct_norm_sq(&mu, n).unwrap();
            let from_product = r.log_norm_sq[n].exp();
            assert!(
                ((direct - from_product) / from_product).abs() < 1e-8,
                "n = {n}: direct {direct} vs product {from_product}"
            );
        }
    }
}
