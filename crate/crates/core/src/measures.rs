//! Unit Borel measures `d mu = h d mu_K + mu_s` with a finite atomic
//! singular part, quadrature against them, and Szego integrals.
//!
//! The density grammar is `h(x) = c * prod |x - r_i|^{g_i} * exp(poly(x))`,
//! which keeps `\int log h d mu_K` finite by construction and tells the
//! quadrature exactly where the non-smooth points sit. On the unit circle
//! the same data is read as `h(theta) = c * prod |2 sin((theta - r_i)/2)|^{g_i}
//! * exp(poly(cos theta))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{BandGeom, EquilibriumData};
use crate::quad::{adaptive_theta, gauss_legendre, tanh_sinh, QuadCfg};
use crate::real::Real;
use crate::sets::CompactSetSpec;

/// Maximum number of atoms in the singular part.
pub const MAX_ATOMS: usize = 64;

/// Density grammar w.r.t. the equilibrium measure (or w.r.t. theta on the
/// circle): constant x power factors x exponential of a polynomial.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DensitySpec {
    #[serde(rename = "const")]
    pub const_factor: f64,
    /// (root, exponent) pairs for factors `|x - root|^exponent`.
    #[serde(default)]
    pub powers: Vec<(f64, f64)>,
    /// Coefficients `c_0 + c_1 x + ...` of the polynomial inside the
    /// exponential.
    #[serde(default)]
    pub exp_poly: Vec<f64>,
}

impl DensitySpec {
    pub fn one() -> Self {
        DensitySpec {
            const_factor: 1.0,
            powers: Vec::new(),
            exp_poly: Vec::new(),
        }
    }

    pub fn constant(c: f64) -> Self {
        DensitySpec {
            const_factor: c,
            powers: Vec::new(),
            exp_poly: Vec::new(),
        }
    }

    /// Grammar validation against a set: positive constant, exponents
    /// nonnegative at interior roots, exponents > -1/2 at band endpoints.
    pub fn validate(&self, set: &CompactSetSpec) -> Result<()> {
        if !(self.const_factor > 0.0 && self.const_factor.is_finite()) {
            return Err(Error::validation("density constant must be positive"));
        }
        for &(root, exponent) in &self.powers {
            if !root.is_finite() || !exponent.is_finite() {
                return Err(Error::validation("non-finite power factor"));
            }
            if set.is_circle() {
                if exponent < 0.0 {
                    return Err(Error::validation(
                        "circle density exponents must be nonnegative",
                    ));
                }
                continue;
            }
            let on_endpoint = set
                .bands()
                .iter()
                .any(|b| root == b.lo_f64() || root == b.hi_f64());
            let interior = !on_endpoint
                && set
                    .bands()
                    .iter()
                    .any(|b| root > b.lo_f64() && root < b.hi_f64());
            if on_endpoint {
                if exponent <= -0.5 {
                    return Err(Error::validation(format!(
                        "endpoint exponent {exponent} at {root} must be > -1/2"
                    )));
                }
            } else if interior && exponent < 0.0 {
                return Err(Error::validation(format!(
                    "interior exponent {exponent} at {root} must be >= 0"
                )));
            }
        }
        for c in &self.exp_poly {
            if !c.is_finite() {
                return Err(Error::validation("non-finite exp_poly coefficient"));
            }
        }
        Ok(())
    }

    fn poly_at<R: Real>(&self, x: &R) -> R {
        let mut acc = x.val(0.0);
        for c in self.exp_poly.iter().rev() {
            acc = acc * x + x.val(*c);
        }
        acc
    }

    /// Density value on a real set (no distance substitutions).
    pub fn eval<R: Real>(&self, x: &R) -> R {
        let mut v = x.val(self.const_factor);
        for &(root, exponent) in &self.powers {
            let d = (x.clone() - x.val(root)).abs();
            v *= power(d, exponent);
        }
        if !self.exp_poly.is_empty() {
            v *= self.poly_at(x).exp();
        }
        v
    }

    /// Density value on the circle at angle theta.
    pub fn eval_circle<R: Real>(&self, theta: &R) -> R {
        let mut v = theta.val(self.const_factor);
        for &(root, exponent) in &self.powers {
            let half_diff = (theta.clone() - theta.val(root)) * theta.val(0.5);
            let d = (half_diff.sin() * theta.val(2.0)).abs();
            v *= power(d, exponent);
        }
        if !self.exp_poly.is_empty() {
            v *= self.poly_at(&theta.clone().cos()).exp();
        }
        v
    }

}

fn power<R: Real>(base: R, exponent: f64) -> R {
    if exponent == 0.0 {
        return base.val(1.0);
    }
    if exponent == 1.0 {
        return base;
    }
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        return base.powi(exponent as i32);
    }
    let e = base.val(exponent);
    base.powf(&e)
}

/// A point mass. Locations may be complex; real-line recurrence paths
/// require `im == 0`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Atom {
    pub re: f64,
    pub im: f64,
    pub mass: f64,
}

/// Finitely many point masses (the singular part `mu_s`).
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct AtomList {
    pub atoms: Vec<Atom>,
}

impl AtomList {
    pub fn empty() -> Self {
        AtomList { atoms: Vec::new() }
    }

    pub fn real(points: &[(f64, f64)]) -> Self {
        AtomList {
            atoms: points
                .iter()
                .map(|&(x, m)| Atom {
                    re: x,
                    im: 0.0,
                    mass: m,
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms.len() > MAX_ATOMS {
            return Err(Error::validation(format!(
                "at most {MAX_ATOMS} atoms supported, got {}",
                self.atoms.len()
            )));
        }
        for a in &self.atoms {
            if !(a.mass > 0.0 && a.mass.is_finite()) {
                return Err(Error::validation("atom masses must be positive"));
            }
            if !a.re.is_finite() || !a.im.is_finite() {
                return Err(Error::validation("atom locations must be finite"));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn all_real(&self) -> bool {
        self.atoms.iter().all(|a| a.im == 0.0)
    }

    fn raw_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }
}

/// A normalized unit measure `h d mu_K + mu_s` over a base set.
#[derive(Clone, Debug)]
pub struct MeasureSpec<R: Real> {
    base: EquilibriumData<R>,
    density: DensitySpec,
    atoms: AtomList,
    normalization: R,
    continuous_mass: R,
    atomic_mass: R,
}

impl<R: Real> MeasureSpec<R> {
    pub fn base(&self) -> &EquilibriumData<R> {
        &self.base
    }

    pub fn density(&self) -> &DensitySpec {
        &self.density
    }

    pub fn atoms(&self) -> &AtomList {
        &self.atoms
    }

    pub fn normalization(&self) -> R {
        self.normalization.clone()
    }

    /// Normalized mass of the continuous part.
    pub fn continuous_mass(&self) -> R {
        self.continuous_mass.clone()
    }

    /// Normalized mass of the atomic part.
    pub fn atomic_mass(&self) -> R {
        self.atomic_mass.clone()
    }

    fn template(&self) -> R {
        self.normalization.val(0.0)
    }
}

/// Scale a density-plus-atoms pair into a unit measure over `base`.
pub fn normalize<R: Real>(
    base: &EquilibriumData<R>,
    density: DensitySpec,
    atoms: AtomList,
) -> Result<MeasureSpec<R>> {
    density.validate(base.set())?;
    atoms.validate()?;
    if base.set().is_circle() && !atoms.is_empty() {
        return Err(Error::validation(
            "atoms are supported on interval-union sets only",
        ));
    }
    let template = R::seed(base.digits(), 0.0);
    let raw_cont = integrate_h_mu_k(base, &density)?;
    let raw_atoms = template.val(atoms.raw_mass());
    let total = raw_cont.clone() + &raw_atoms;
    if !(total > template.val(0.0)) || !total.is_finite_val() {
        return Err(Error::validation(format!(
            "total unnormalized mass {} must be finite and positive",
            total.to_f64()
        )));
    }
    let normalization = template.val(1.0) / &total;
    Ok(MeasureSpec {
        base: base.clone(),
        density,
        atoms,
        continuous_mass: raw_cont * &normalization,
        atomic_mass: raw_atoms * &normalization,
        normalization,
    })
}

/// The equilibrium measure itself as a MeasureSpec (h = 1, no atoms).
pub fn equilibrium_as_measure<R: Real>(base: &EquilibriumData<R>) -> Result<MeasureSpec<R>> {
    normalize(base, DensitySpec::one(), AtomList::empty())
}

/// In-band splitting plan for singular quadrature: split points are density
/// roots strictly inside the band whose exponent is not a nonnegative even
/// integer... smoothness of `|x - r|^g` in the angle variable also fails at
/// band endpoints for non-integer g, which forces the tanh-sinh path.
fn band_pieces<R: Real>(
    band: &BandGeom<R>,
    density: &DensitySpec,
    extra_splits: &[f64],
) -> (Vec<f64>, bool) {
    let lo = band.lo.to_f64();
    let hi = band.hi.to_f64();
    let mut splits: Vec<f64> = Vec::new();
    let mut needs_de = false;
    for &(root, exponent) in &density.powers {
        if exponent == 0.0 {
            continue;
        }
        let is_integer = exponent.fract() == 0.0 && exponent >= 0.0;
        if root > lo && root < hi {
            if !(is_integer && exponent as i64 % 2 == 0) {
                splits.push(root);
                needs_de = true;
            }
        } else if (root == lo || root == hi) && !is_integer {
            needs_de = true;
        }
    }
    for &s in extra_splits {
        if s > lo && s < hi {
            splits.push(s);
            needs_de = true;
        }
    }
    splits.sort_by(|a, b| a.partial_cmp(b).unwrap());
    splits.dedup();
    (splits, needs_de)
}

/// `\int h d mu_K` over the base set (unnormalized).
fn integrate_h_mu_k<R: Real>(base: &EquilibriumData<R>, density: &DensitySpec) -> Result<R> {
    integrate_against_mu_k(base, density, &|_x: &R| None, &[])
}

/// Workhorse: `\int f(x) h(x) d mu_K(x)` (unnormalized h), where `f` may
/// return None to mean "1" (saves work for mass integrals). Split points in
/// `extra_splits` are treated as declared integrable singularities of f.
fn integrate_against_mu_k<R: Real>(
    base: &EquilibriumData<R>,
    density: &DensitySpec,
    f: &impl Fn(&R) -> Option<R>,
    extra_splits: &[f64],
) -> Result<R> {
    let template = R::seed(base.digits(), 0.0);
    let cfg = QuadCfg::for_digits(base.digits());
    if base.set().is_circle() {
        return circle_integral(base, density, f, extra_splits);
    }
    let mut total = template.val(0.0);
    let pi = template.pi();
    for (b, band) in base.bands().iter().enumerate() {
        let (splits, needs_de) = band_pieces(band, density, extra_splits);
        if !needs_de {
            // smooth path: cosine substitution over the whole band
            let integrand = |theta: &R| {
                let s = theta.clone().cos();
                let x = band.x_of_s(&s);
                let mut v = base.density_factor(b, &s) * density.eval(&x);
                if let Some(fx) = f(&x) {
                    v *= fx;
                }
                v
            };
            let (value, _) = adaptive_theta(&integrand, 64, &cfg, &template, "band h-integral")?;
            total += value / &pi;
        } else {
            // split at in-band singular points; each piece by tanh-sinh with
            // exact endpoint distances fed to the singular factors
            let mut cuts = vec![band.lo.to_f64()];
            cuts.extend(splits.iter().copied());
            cuts.push(band.hi.to_f64());
            for w in cuts.windows(2) {
                let u = if w[0] == band.lo.to_f64() {
                    band.lo.clone()
                } else {
                    template.val(w[0])
                };
                let v = if w[1] == band.hi.to_f64() {
                    band.hi.clone()
                } else {
                    template.val(w[1])
                };
                let u_f64 = w[0];
                let v_f64 = w[1];
                let integrand = |x: &R, da: &R, db: &R| {
                    let mut val = density_with_distances(density, x, u_f64, da, v_f64, db);
                    val *= mu_k_weight_with_distances(base, b, x, &u, da, &v, db);
                    if let Some(fx) = f(x) {
                        val *= fx;
                    }
                    val
                };
                let piece = tanh_sinh(&integrand, &u, &v, &cfg, "singular band piece")?;
                total += piece;
            }
        }
    }
    Ok(total)
}

/// Density value where factors rooted exactly at the active piece endpoints
/// use the quadrature-provided distances.
fn density_with_distances<R: Real>(
    density: &DensitySpec,
    x: &R,
    u: f64,
    da: &R,
    v: f64,
    db: &R,
) -> R {
    let mut val = x.val(density.const_factor);
    for &(root, exponent) in &density.powers {
        let d = if root == u {
            da.clone()
        } else if root == v {
            db.clone()
        } else {
            (x.clone() - x.val(root)).abs()
        };
        val *= power(d, exponent);
    }
    if !density.exp_poly.is_empty() {
        let mut acc = x.val(0.0);
        for c in density.exp_poly.iter().rev() {
            acc = acc * x + x.val(*c);
        }
        val *= acc.exp();
    }
    val
}

/// Equilibrium density `|Q|/(pi sqrt|R|)` with the band-endpoint factors
/// replaced by exact distances when the piece endpoint is a band endpoint.
fn mu_k_weight_with_distances<R: Real>(
    base: &EquilibriumData<R>,
    band_idx: usize,
    x: &R,
    u: &R,
    da: &R,
    v: &R,
    db: &R,
) -> R {
    let mut prod = x.val(1.0);
    for (i, other) in base.bands().iter().enumerate() {
        for e in [&other.lo, &other.hi] {
            let d = if i == band_idx && *e == *u {
                da.clone()
            } else if i == band_idx && *e == *v {
                db.clone()
            } else {
                (x.clone() - e).abs()
            };
            prod *= d;
        }
    }
    base.q_abs_at(x) / (x.pi() * prod.sqrt())
}

fn circle_integral<R: Real>(
    base: &EquilibriumData<R>,
    density: &DensitySpec,
    f: &impl Fn(&R) -> Option<R>,
    extra_splits: &[f64],
) -> Result<R> {
    let template = R::seed(base.digits(), 0.0);
    let cfg = QuadCfg::for_digits(base.digits());
    let two_pi = template.pi() * template.val(2.0);
    // singular angles: power-factor roots with non-even exponents, plus
    // declared splits
    let mut splits: Vec<f64> = Vec::new();
    for &(root, exponent) in &density.powers {
        if exponent == 0.0 {
            continue;
        }
        let even = exponent.fract() == 0.0 && (exponent as i64) % 2 == 0;
        if !even {
            splits.push(root.rem_euclid(std::f64::consts::TAU));
        }
    }
    splits.extend(
        extra_splits
            .iter()
            .map(|s| s.rem_euclid(std::f64::consts::TAU)),
    );
    splits.sort_by(|a, b| a.partial_cmp(b).unwrap());
    splits.dedup();
    if splits.is_empty() {
        // periodic trapezoid = midpoint over [0, 2pi): map through theta in
        // [0, pi] twice for reuse of the adaptive midpoint driver
        let integrand = |t: &R| {
            let theta = t.clone() * template.val(2.0);
            let mut val = density.eval_circle(&theta);
            if let Some(ft) = f(&theta) {
                val *= ft;
            }
            val
        };
        let (value, _) = adaptive_theta(&integrand, 128, &cfg, &template, "circle density")?;
        return Ok(value * template.val(2.0) / &two_pi);
    }
    // integrate between consecutive singular angles with tanh-sinh
    let mut cuts = splits.clone();
    cuts.push(splits[0] + std::f64::consts::TAU);
    let mut total = template.val(0.0);
    for w in cuts.windows(2) {
        let u = template.val(w[0]);
        let v = template.val(w[1]);
        let u_f64 = w[0];
        let v_f64 = w[1];
        let integrand = |theta: &R, da: &R, db: &R| {
            let mut val = circle_density_with_distances(density, theta, u_f64, da, v_f64, db);
            if let Some(ft) = f(theta) {
                val *= ft;
            }
            val
        };
        total += tanh_sinh(&integrand, &u, &v, &cfg, "circle singular piece")?;
    }
    Ok(total / two_pi)
}

fn circle_density_with_distances<R: Real>(
    density: &DensitySpec,
    theta: &R,
    u: f64,
    da: &R,
    v: f64,
    db: &R,
) -> R {
    let tau = std::f64::consts::TAU;
    let mut val = theta.val(density.const_factor);
    for &(root, exponent) in &density.powers {
        let r_mod = root.rem_euclid(tau);
        // |2 sin((theta - r)/2)| with the exact angular distance at piece ends
        let angle = if angles_match(r_mod, u.rem_euclid(tau)) {
            da.clone()
        } else if angles_match(r_mod, v.rem_euclid(tau)) {
            db.clone()
        } else {
            theta.clone() - theta.val(root)
        };
        let d = ((angle * theta.val(0.5)).sin() * theta.val(2.0)).abs();
        val *= power(d, exponent);
    }
    if !density.exp_poly.is_empty() {
        let mut acc = theta.val(0.0);
        let c = theta.clone().cos();
        for coef in density.exp_poly.iter().rev() {
            acc = acc * &c + theta.val(*coef);
        }
        val *= acc.exp();
    }
    val
}

fn angles_match(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-14 || (a - b).abs() > std::f64::consts::TAU - 1e-14
}

/// `\int f d mu` for a normalized measure: adaptive quadrature on the
/// continuous part plus an exact atom sum. Integrable singularities of `f`
/// at known real points are declared through `singular_points`.
pub fn integrate<R: Real>(
    mu: &MeasureSpec<R>,
    f: impl Fn(&R) -> R,
    singular_points: &[f64],
) -> Result<R> {
    if !mu.atoms.all_real() {
        return Err(Error::validation(
            "integrate supports real atom locations only (complex atoms feed the Gram path)",
        ));
    }
    let wrapped = |x: &R| Some(f(x));
    let cont = integrate_against_mu_k(&mu.base, &mu.density, &wrapped, singular_points)?;
    let mut total = cont * &mu.normalization;
    let template = mu.template();
    for atom in &mu.atoms.atoms {
        let x = template.val(atom.re);
        total += f(&x) * template.val(atom.mass) * &mu.normalization;
    }
    Ok(total)
}

/// The Szego integral of a measure: `M = \int log(normalization * h) d mu_K`,
/// or the explicit minus-infinity sentinel.
#[derive(Clone, Debug, PartialEq)]
pub enum SzegoIntegral<R> {
    Finite(R),
    MinusInfinity,
}

impl<R: Real> SzegoIntegral<R> {
    pub fn finite(&self) -> Option<&R> {
        match self {
            SzegoIntegral::Finite(v) => Some(v),
            SzegoIntegral::MinusInfinity => None,
        }
    }
}

/// `\int log(h) d mu_K` for a grammar density, by termwise quadrature:
/// `log h = log c + sum g_i log|x - r_i| + poly(x)`. The logarithmic terms
/// integrate through the singularity-aware potential path (in-band Chebyshev
/// log moments), the smooth remainder through the band rule.
pub fn log_density_integral_mu_k<R: Real>(
    base: &EquilibriumData<R>,
    density: &DensitySpec,
) -> Result<R> {
    let template = R::seed(base.digits(), 0.0);
    let mut m = template.val(density.const_factor.ln());

    if base.set().is_circle() {
        // power factors: g_i * (1/2pi) \int log|2 sin((theta - r)/2)| dtheta
        let cfg = QuadCfg::for_digits(base.digits());
        for &(root, exponent) in &density.powers {
            if exponent == 0.0 {
                continue;
            }
            let u = template.val(root);
            let v = template.val(root + std::f64::consts::TAU);
            let integrand = |theta: &R, da: &R, db: &R| {
                // distance to the root measured from either end of the cut
                let angle = if da <= db { da.clone() } else { db.clone() };
                let d = ((angle * theta.val(0.5)).sin() * theta.val(2.0)).abs();
                d.ln()
            };
            let li = tanh_sinh(&integrand, &u, &v, &cfg, "circle log factor")?;
            m += li * template.val(exponent) / (template.pi() * template.val(2.0));
        }
        if !density.exp_poly.is_empty() {
            let integrand = |t: &R| {
                let theta = t.clone() * template.val(2.0);
                let c = theta.cos();
                let mut acc = template.val(0.0);
                for coef in density.exp_poly.iter().rev() {
                    acc = acc * &c + template.val(*coef);
                }
                acc
            };
            let (value, _) =
                adaptive_theta(&integrand, 128, &cfg, &template, "circle exp-poly term")?;
            m += value / template.pi();
        }
        return Ok(m);
    }

    // real sets: log-potential terms at the density roots
    for &(root, exponent) in &density.powers {
        if exponent == 0.0 {
            continue;
        }
        let u = base.log_potential(&template.val(root))?;
        m += u * template.val(exponent);
    }
    if !density.exp_poly.is_empty() {
        let smooth = |x: &R| Some(density.poly_at(x));
        let poly_term = integrate_against_mu_k(base, &DensitySpec::one(), &smooth, &[])?;
        m += poly_term;
    }
    Ok(m)
}

/// Compute `M = \int log(normalization * h) d mu_K`, or the explicit
/// minus-infinity sentinel. The grammar keeps M finite by construction; the
/// sentinel is reserved for degenerate densities.
pub fn szego_integral<R: Real>(mu: &MeasureSpec<R>) -> Result<SzegoIntegral<R>> {
    let m = log_density_integral_mu_k(&mu.base, &mu.density)?;
    Ok(SzegoIntegral::Finite(mu.normalization.clone().ln() + m))
}

// ---------------------------------------------------------------------------
// Discrete representation for orthogonalization
// ---------------------------------------------------------------------------

/// tanh-sinh net depth for singular pieces, scaled with the polynomial
/// degree the caller needs to integrate and the working precision.
fn de_level_for(degree: usize, digits: u32) -> u32 {
    let base: u32 = if digits > 15 { 8 } else { 6 };
    base + u32::from(degree > 100) + u32::from(degree > 200)
}

/// Per-band node count: resolves the density expansion, covers polynomial
/// degree `degree`, and distributes at least `4 * degree` nodes over bands
/// proportionally to band mass.
fn band_node_count<R: Real>(base: &EquilibriumData<R>, b: usize, degree: usize) -> usize {
    let mass_share = (4.0 * degree as f64 * base.band_masses()[b].to_f64()).ceil() as usize;
    (degree + base.band_expansion_len(b) + 8)
        .max(mass_share)
        .max(32)
}

/// Nodes and nonnegative weights representing the normalized continuous part
/// `norm * h d mu_K`, accurate for polynomial integrands up to `degree`.
pub fn discrete_measure<R: Real>(mu: &MeasureSpec<R>, degree: usize) -> Result<(Vec<R>, Vec<R>)> {
    let base = &mu.base;
    let template = mu.template();
    if base.set().is_circle() {
        return Err(Error::internal(
            "circle measures use trigonometric moments, not a real node set",
        ));
    }
    let density = &mu.density;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (b, band) in base.bands().iter().enumerate() {
        let (splits, needs_de) = band_pieces(band, density, &[]);
        if !needs_de {
            let n = band_node_count(base, b, degree);
            let pi = template.pi();
            let h_step = pi.clone() / template.val(n as f64);
            let inv_n = template.val(1.0 / n as f64);
            for j in 0..n {
                let theta = h_step.clone() * template.val(j as f64 + 0.5);
                let s = theta.cos();
                let x = band.x_of_s(&s);
                let w = base.density_factor(b, &s) * density.eval(&x) * &inv_n
                    * &mu.normalization;
                nodes.push(x);
                weights.push(w);
            }
        } else {
            let mut cuts = vec![band.lo.to_f64()];
            cuts.extend(splits.iter().copied());
            cuts.push(band.hi.to_f64());
            let level = de_level_for(degree, base.digits());
            for w in cuts.windows(2) {
                let u = if w[0] == band.lo.to_f64() {
                    band.lo.clone()
                } else {
                    template.val(w[0])
                };
                let v = if w[1] == band.hi.to_f64() {
                    band.hi.clone()
                } else {
                    template.val(w[1])
                };
                let (mut xs, mut ws) = de_nodes(&u, &v, level, &template);
                for (x, wq) in xs.iter().zip(ws.iter_mut()) {
                    // wq carries the DE weight; multiply density and mu_K parts
                    let da = x.clone() - &u;
                    let db = v.clone() - x;
                    let mut val =
                        density_with_distances(density, x, w[0], &da, w[1], &db);
                    val *= mu_k_weight_with_distances(base, b, x, &u, &da, &v, &db);
                    *wq *= val * &mu.normalization;
                }
                nodes.append(&mut xs);
                weights.append(&mut ws);
            }
        }
    }
    Ok((nodes, weights))
}

/// Splitting rules for densities taken w.r.t. Lebesgue measure: endpoint
/// exponents must exceed -1; any power factor that is not an even polynomial
/// one forces the tanh-sinh path on the affected pieces.
fn lebesgue_band_plan<R: Real>(
    band: &BandGeom<R>,
    density: &DensitySpec,
) -> Result<(Vec<f64>, bool)> {
    let lo = band.lo.to_f64();
    let hi = band.hi.to_f64();
    let mut splits = Vec::new();
    let mut needs_de = false;
    for &(root, exponent) in &density.powers {
        if exponent == 0.0 {
            continue;
        }
        let nonneg_integer = exponent.fract() == 0.0 && exponent >= 0.0;
        if root == lo || root == hi {
            if exponent <= -1.0 {
                return Err(Error::validation(format!(
                    "Lebesgue density endpoint exponent {exponent} at {root} must be > -1"
                )));
            }
            if !nonneg_integer {
                needs_de = true;
            }
        } else if root > lo && root < hi {
            if exponent < 0.0 {
                return Err(Error::validation(format!(
                    "Lebesgue density interior exponent {exponent} at {root} must be >= 0"
                )));
            }
            if !(nonneg_integer && exponent as i64 % 2 == 0) {
                splits.push(root);
                needs_de = true;
            }
        }
    }
    splits.sort_by(|a, b| a.partial_cmp(b).unwrap());
    splits.dedup();
    Ok((splits, needs_de))
}

/// Unnormalized nodes and weights for `f(x) dx` over the bands of `eq`,
/// accurate for polynomial integrands up to `degree`: Gauss-Legendre on
/// smooth bands, tanh-sinh pieces around singular density points.
pub fn lebesgue_discrete<R: Real>(
    eq: &EquilibriumData<R>,
    density: &DensitySpec,
    degree: usize,
) -> Result<(Vec<R>, Vec<R>)> {
    let template = R::seed(eq.digits(), 0.0);
    if eq.set().is_circle() {
        return Err(Error::validation(
            "Lebesgue-density recurrences are defined on interval unions",
        ));
    }
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let gl_size = degree / 2 + 16;
    let (gl_nodes, gl_weights) = gauss_legendre(gl_size, &template);
    for band in eq.bands() {
        let (splits, needs_de) = lebesgue_band_plan(band, density)?;
        if !needs_de {
            for (s, w) in gl_nodes.iter().zip(&gl_weights) {
                let x = band.x_of_s(s);
                let wq = w.clone() * &band.radius * density.eval(&x);
                nodes.push(x);
                weights.push(wq);
            }
        } else {
            let mut cuts = vec![band.lo.to_f64()];
            cuts.extend(splits.iter().copied());
            cuts.push(band.hi.to_f64());
            let level = de_level_for(degree, eq.digits());
            for w in cuts.windows(2) {
                let u = if w[0] == band.lo.to_f64() {
                    band.lo.clone()
                } else {
                    template.val(w[0])
                };
                let v = if w[1] == band.hi.to_f64() {
                    band.hi.clone()
                } else {
                    template.val(w[1])
                };
                let (mut xs, mut ws) = de_nodes(&u, &v, level, &template);
                for (x, wq) in xs.iter().zip(ws.iter_mut()) {
                    let da = x.clone() - &u;
                    let db = v.clone() - x;
                    *wq *= density_with_distances(density, x, w[0], &da, w[1], &db);
                }
                nodes.append(&mut xs);
                weights.append(&mut ws);
            }
        }
    }
    Ok((nodes, weights))
}

/// Discrete representation of the band-uniform measure: equal mass per band,
/// uniform density within each band.
pub fn band_uniform_discrete<R: Real>(
    eq: &EquilibriumData<R>,
    degree: usize,
) -> Result<(Vec<R>, Vec<R>)> {
    let template = R::seed(eq.digits(), 0.0);
    let p = eq.bands().len();
    if p == 0 {
        return Err(Error::validation(
            "band-uniform measures are defined on interval unions",
        ));
    }
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let gl_size = degree / 2 + 16;
    let (gl_nodes, gl_weights) = gauss_legendre(gl_size, &template);
    let inv_bands = template.val(1.0 / p as f64);
    for band in eq.bands() {
        // mass 1/p spread uniformly: d nu = dx / (p * len), and the affine
        // map contributes r = len/2, so each weight is w * (1/2p)
        for (s, w) in gl_nodes.iter().zip(&gl_weights) {
            nodes.push(band.x_of_s(s));
            weights.push(w.clone() * &inv_bands * template.val(0.5));
        }
    }
    Ok((nodes, weights))
}

/// Circle nodes and weights for the unnormalized measure `w(theta) dtheta/2pi`
/// at refinement `res` (each step doubles the effective resolution).
pub(crate) fn circle_node_set<R: Real>(
    density: &DensitySpec,
    res: u32,
    template: &R,
) -> (Vec<R>, Vec<R>) {
    let tau = std::f64::consts::TAU;
    let mut singular: Vec<f64> = density
        .powers
        .iter()
        .filter(|(_, e)| {
            *e != 0.0 && !(e.fract() == 0.0 && (*e as i64) % 2 == 0)
        })
        .map(|(r, _)| r.rem_euclid(tau))
        .collect();
    singular.sort_by(|a, b| a.partial_cmp(b).unwrap());
    singular.dedup();
    if singular.is_empty() {
        let m = 256usize << res;
        let step = template.pi() * template.val(2.0 / m as f64);
        let inv_m = template.val(1.0 / m as f64);
        let mut thetas = Vec::with_capacity(m);
        let mut ws = Vec::with_capacity(m);
        for j in 0..m {
            let theta = step.clone() * template.val(j as f64 + 0.5);
            let w = density.eval_circle(&theta) * &inv_m;
            thetas.push(theta);
            ws.push(w);
        }
        return (thetas, ws);
    }
    let level = 5 + res;
    let mut cuts = singular.clone();
    cuts.push(singular[0] + tau);
    let two_pi = template.pi() * template.val(2.0);
    let mut thetas = Vec::new();
    let mut ws = Vec::new();
    for w in cuts.windows(2) {
        let u = template.val(w[0]);
        let v = template.val(w[1]);
        let (mut ts, mut wq) = de_nodes(&u, &v, level, template);
        for (t, q) in ts.iter().zip(wq.iter_mut()) {
            let da = t.clone() - &u;
            let db = v.clone() - t;
            *q *= circle_density_with_distances(density, t, w[0], &da, w[1], &db) / &two_pi;
        }
        thetas.append(&mut ts);
        ws.append(&mut wq);
    }
    (thetas, ws)
}

/// Plain tanh-sinh node/weight net on (a, b) at a fixed level. Distances are
/// regenerated by the caller; nodes here are just abscissae and DE weights.
fn de_nodes<R: Real>(a: &R, b: &R, level: u32, template: &R) -> (Vec<R>, Vec<R>) {
    let half = template.val(0.5);
    let r = (b.clone() - a) * &half;
    let m = (a.clone() + b) * &half;
    let pi_half = template.pi() * &half;
    let h = template.val(1.0 / (1u64 << level) as f64);
    let mut nodes = vec![m];
    let mut weights = vec![pi_half.clone() * &r * &h];
    let mut k = 1i64;
    loop {
        let t = h.clone() * template.val(k as f64);
        let u = pi_half.clone() * t.clone().sinh();
        let e2u = (u.clone() * template.val(2.0)).exp();
        if !e2u.is_finite_val() {
            break;
        }
        let denom = e2u.clone() + template.val(1.0);
        let d_near = r.clone() * template.val(2.0) / &denom;
        if d_near <= template.val(1e-280) || d_near.is_zero() {
            break;
        }
        let d_far = (b.clone() - a) - &d_near;
        let w = pi_half.clone() * t.cosh() * &r * template.val(4.0) * &e2u
            / (denom.clone() * &denom)
            * &h;
        if w.is_zero() {
            break;
        }
        nodes.push(a.clone() + &d_far);
        weights.push(w.clone());
        nodes.push(a.clone() + &d_near);
        weights.push(w);
        k += 1;
    }
    (nodes, weights)
}

// ---------------------------------------------------------------------------
// JSON wire format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct MeasureFile {
    set: serde_json::Value,
    density: DensitySpec,
    #[serde(default)]
    atoms: Vec<Vec<f64>>,
}

/// Parse the measure file format:
/// `{"set":…, "density":{"const":c,"powers":[[r,g],…],"exp_poly":[…]}, "atoms":[[x,m],…]}`.
pub fn load_measure_file(text: &str) -> Result<(CompactSetSpec, DensitySpec, AtomList)> {
    let file: MeasureFile = serde_json::from_str(text)
        .map_err(|e| Error::validation(format!("bad measure file: {e}")))?;
    let set = CompactSetSpec::from_json(&file.set.to_string())?;
    let mut atoms = Vec::new();
    for entry in &file.atoms {
        match entry.len() {
            2 => atoms.push(Atom {
                re: entry[0],
                im: 0.0,
                mass: entry[1],
            }),
            3 => atoms.push(Atom {
                re: entry[0],
                im: entry[1],
                mass: entry[2],
            }),
            n => {
                return Err(Error::validation(format!(
                    "atom entries are [x, mass] pairs (or [re, im, mass]), got {n} numbers"
                )))
            }
        }
    }
    Ok((set, file.density, AtomList { atoms }))
}

pub fn measure_to_json(set: &CompactSetSpec, density: &DensitySpec, atoms: &AtomList) -> String {
    let file = MeasureFile {
        set: serde_json::from_str(&set.to_json()).expect("set json is valid"),
        density: density.clone(),
        atoms: atoms
            .atoms
            .iter()
            .map(|a| {
                if a.im == 0.0 {
                    vec![a.re, a.mass]
                } else {
                    vec![a.re, a.im, a.mass]
                }
            })
            .collect(),
    };
    serde_json::to_string(&file).expect("measure serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::equilibrium_measure;
    use crate::sets::interval_union_from_f64;

    fn chebyshev_base() -> EquilibriumData<f64> {
        let set = interval_union_from_f64(&[(-1.0, 1.0)]).unwrap();
        equilibrium_measure(&set, 0).unwrap()
    }

    #[test]
    fn normalize_equilibrium_is_identity() {
        let base = chebyshev_base();
        let mu = equilibrium_as_measure(&base).unwrap();
        assert!((mu.normalization() - 1.0).abs() < 1e-13);
        assert!((mu.continuous_mass() - 1.0).abs() < 1e-13);
        assert_eq!(mu.atomic_mass(), 0.0);
    }

    #[test]
    fn normalize_with_atom_splits_mass() {
        let base = chebyshev_base();
        let mu = normalize(
            &base,
            DensitySpec::one(),
            AtomList::real(&[(5.0, 1.0)]),
        )
        .unwrap();
        assert!((mu.normalization() - 0.5).abs() < 1e-13);
        assert!((mu.continuous_mass() - 0.5).abs() < 1e-13);
        assert!((mu.atomic_mass() - 0.5).abs() < 1e-13);
    }

    #[test]
    fn normalize_abs_x_density() {
        // \int |x| d mu_[-1,1] = 2/pi, so the normalization is pi/2
        let base = chebyshev_base();
        let density = DensitySpec {
            const_factor: 1.0,
            powers: vec![(0.0, 1.0)],
            exp_poly: vec![],
        };
        let mu = normalize(&base, density, AtomList::empty()).unwrap();
        let expect = std::f64::consts::FRAC_PI_2;
        assert!(
            (mu.normalization() - expect).abs() < 1e-12,
            "norm = {}",
            mu.normalization()
        );
    }

    #[test]
    fn integrate_unit_and_odd_and_moment() {
        let base = chebyshev_base();
        let mu = equilibrium_as_measure(&base).unwrap();
        let one = integrate(&mu, |x: &f64| x.val(1.0), &[]).unwrap();
        assert!((one - 1.0).abs() < 1e-13);
        let odd = integrate(&mu, |x: &f64| *x, &[]).unwrap();
        assert!(odd.abs() < 1e-13);
        // Chebyshev moment: \int x^2 d mu = 1/2
        let m2 = integrate(&mu, |x: &f64| x * x, &[]).unwrap();
        assert!((m2 - 0.5).abs() < 1e-13, "m2 = {m2}");
    }

    #[test]
    fn szego_integral_equilibrium_zero() {
        let base = chebyshev_base();
        let mu = equilibrium_as_measure(&base).unwrap();
        let m = szego_integral(&mu).unwrap();
        let v = *m.finite().unwrap();
        assert!(v.abs() < 1e-12, "M = {v}");
    }

    #[test]
    fn szego_integral_abs_x() {
        // h = (pi/2)|x| after normalization: M = log(pi/2) - log 2
        let base = chebyshev_base();
        let density = DensitySpec {
            const_factor: 1.0,
            powers: vec![(0.0, 1.0)],
            exp_poly: vec![],
        };
        let mu = normalize(&base, density, AtomList::empty()).unwrap();
        let m = *szego_integral(&mu).unwrap().finite().unwrap();
        let expect = (std::f64::consts::FRAC_PI_2).ln() - 2.0f64.ln();
        assert!((m - expect).abs() < 1e-11, "M = {m}, expect {expect}");
    }

    #[test]
    fn szego_integral_circle_one_minus_cos() {
        // w = 1 - cos theta = (1/2)|2 sin(theta/2)|^2: M = -log 2
        let base: EquilibriumData<f64> =
            equilibrium_measure(&CompactSetSpec::circle(), 0).unwrap();
        let density = DensitySpec {
            const_factor: 0.5,
            powers: vec![(0.0, 2.0)],
            exp_poly: vec![],
        };
        let mu = normalize(&base, density, AtomList::empty()).unwrap();
        assert!(
            (mu.normalization() - 1.0).abs() < 1e-12,
            "1 - cos is already unit: norm = {}",
            mu.normalization()
        );
        let m = *szego_integral(&mu).unwrap().finite().unwrap();
        assert!((m + 2.0f64.ln()).abs() < 1e-10, "M = {m}");
    }

    #[test]
    fn atom_shifts_szego_by_log_remaining_mass() {
        // M' = M + log(1 - atomic mass) when atoms rescale the continuous part
        let base = chebyshev_base();
        let mu0 = equilibrium_as_measure(&base).unwrap();
        let m0 = *szego_integral(&mu0).unwrap().finite().unwrap();
        let mu1 = normalize(
            &base,
            DensitySpec::one(),
            AtomList::real(&[(3.0, 0.25)]),
        )
        .unwrap();
        let m1 = *szego_integral(&mu1).unwrap().finite().unwrap();
        let shift = (1.0 - mu1.atomic_mass()).ln();
        assert!(
            (m1 - (m0 + shift)).abs() < 1e-12,
            "m1 = {m1}, m0 + shift = {}",
            m0 + shift
        );
    }

    #[test]
    fn sqrt_singular_density_integrates() {
        // h = |x|^{1/2}: \int |x|^{1/2} d mu_[-1,1] has the closed form
        // 2/pi * B(3/4, 1/2) / ... checked against a dense reference value
        let base = chebyshev_base();
        let density = DensitySpec {
            const_factor: 1.0,
            powers: vec![(0.0, 0.5)],
            exp_poly: vec![],
        };
        let mu = normalize(&base, density, AtomList::empty()).unwrap();
        let one = integrate(&mu, |x: &f64| x.val(1.0), &[]).unwrap();
        assert!((one - 1.0).abs() < 1e-12, "unit mass check: {one}");
    }

    #[test]
    fn endpoint_negative_exponent_allowed() {
        let base = chebyshev_base();
        let density = DensitySpec {
            const_factor: 1.0,
            powers: vec![(1.0, -0.25)],
            exp_poly: vec![],
        };
        let mu = normalize(&base, density, AtomList::empty()).unwrap();
        let one = integrate(&mu, |x: &f64| x.val(1.0), &[]).unwrap();
        assert!((one - 1.0).abs() < 1e-11, "unit mass check: {one}");
    }

    #[test]
    fn interior_negative_exponent_rejected() {
        let base = chebyshev_base();
        let density = DensitySpec {
            const_factor: 1.0,
            powers: vec![(0.3, -0.25)],
            exp_poly: vec![],
        };
        assert!(normalize(&base, density, AtomList::empty()).is_err());
    }

    #[test]
    fn measure_file_roundtrip() {
        let text = r#"{"set":{"kind":"intervals","bands":[[-1.0,1.0]]},
                       "density":{"const":1.0,"powers":[[0.0,1.0]],"exp_poly":[0.0,1.0]},
                       "atoms":[[2.0,0.5]]}"#;
        let (set, density, atoms) = load_measure_file(text).unwrap();
        assert_eq!(set.num_bands(), 1);
        assert_eq!(density.powers.len(), 1);
        assert_eq!(atoms.atoms.len(), 1);
        let back = measure_to_json(&set, &density, &atoms);
        let (set2, density2, atoms2) = load_measure_file(&back).unwrap();
        assert_eq!(set, set2);
        assert_eq!(density, density2);
        assert_eq!(atoms, atoms2);
    }
}
