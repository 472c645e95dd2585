//! Equilibrium measure, capacity, Green function, critical points,
//! Parreau-Widom sum, band masses, and rational dependence of band masses.
//!
//! For a union of p bands the equilibrium density has the finite-gap form
//! `rho(x) = |Q(x)| / (pi sqrt(|R(x)|))` with `R(x) = prod (x-a_j)(x-b_j)`
//! over all band endpoints and Q monic of degree p-1 fixed by the p-1 linear
//! conditions `\int_{gap_j} Q(t)/sqrt(|R(t)|) dt = 0`. Q is represented in
//! the Chebyshev basis of the convex hull, which keeps the linear system
//! well conditioned even for Cantor-stage sets with dozens of bands.


use crate::error::{Error, Result};
use crate::quad::{
    adaptive_chebyshev_coeffs, adaptive_theta, clenshaw, log_moment_series,
    QuadCfg,
};
use crate::real::{rmax, Real};
use crate::sets::CompactSetSpec;

/// Spec default node count for gap integrals.
const GAP_QUAD_START: usize = 256;
/// Abscissa tolerance for bisections (gap zeros, critical points).
const BISECTION_TOL: f64 = 1e-12;
/// Band masses must sum to one within this tolerance.
const MASS_SUM_TOL: f64 = 1e-12;
/// Green values this close to zero on K are clamped to zero.
const GREEN_CLAMP: f64 = 1e-10;
/// Default height bound for the rational-dependence search.
pub const DEFAULT_HEIGHT_BOUND: u32 = 20;
/// Cap on the exhaustive integer search size.
const HEIGHT_SEARCH_CAP: u128 = 100_000_000;

/// Geometry of one band mapped to [-1, 1].
#[derive(Clone, Debug)]
pub struct BandGeom<R> {
    pub lo: R,
    pub hi: R,
    pub center: R,
    pub radius: R,
}

impl<R: Real> BandGeom<R> {
    pub(crate) fn new(lo: R, hi: R) -> Self {
        let half = lo.val(0.5);
        let center = (lo.clone() + &hi) * &half;
        let radius = (hi.clone() - &lo) * &half;
        BandGeom {
            lo,
            hi,
            center,
            radius,
        }
    }

    pub fn x_of_s(&self, s: &R) -> R {
        self.center.clone() + self.radius.clone() * s
    }

    pub fn s_of_x(&self, x: &R) -> R {
        (x.clone() - &self.center) / &self.radius
    }

    fn contains(&self, x: &R) -> bool {
        *x >= self.lo && *x <= self.hi
    }
}

/// Capacity, equilibrium-density parameters, band masses, and Robin constant
/// of a compact set, with enough cached structure (Q and per-band Chebyshev
/// expansions of the smooth density factor) to evaluate potentials,
/// derivatives, and discrete quadratures against the equilibrium measure.
#[derive(Clone, Debug)]
pub struct EquilibriumData<R: Real> {
    set: CompactSetSpec,
    digits: u32,
    bands: Vec<BandGeom<R>>,
    /// Q in the Chebyshev basis of the hull; `[1]` for a single band.
    q_cheb: Vec<R>,
    hull: Option<BandGeom<R>>,
    capacity: R,
    robin: R,
    gap_zeros: Vec<R>,
    band_masses: Vec<R>,
    /// Chebyshev coefficients of `F_b(s) = sign_b Q(x(s)) / G_b(x(s))` per
    /// band; the equilibrium measure restricted to band b is
    /// `(1/pi) F_b(s) ds / sqrt(1-s^2)` and `band_masses[b] = coeffs[0]`.
    band_coeffs: Vec<Vec<R>>,
    /// Largest node count used by the adaptive rules (reporting).
    quad_nodes: usize,
}

impl<R: Real> EquilibriumData<R> {
    pub fn set(&self) -> &CompactSetSpec {
        &self.set
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn capacity(&self) -> R {
        self.capacity.clone()
    }

    pub fn robin_constant(&self) -> R {
        self.robin.clone()
    }

    pub fn log_capacity(&self) -> R {
        -self.robin.clone()
    }

    pub fn gap_zeros(&self) -> &[R] {
        &self.gap_zeros
    }

    pub fn band_masses(&self) -> &[R] {
        &self.band_masses
    }

    pub fn bands(&self) -> &[BandGeom<R>] {
        &self.bands
    }

    pub fn quad_nodes(&self) -> usize {
        self.quad_nodes
    }

    fn template(&self) -> R {
        self.capacity.val(0.0)
    }

    /// `sqrt(prod_{e not an endpoint of band b} |x - e|)`, the smooth part of
    /// `sqrt(|R|)` on band b.
    fn g_factor(&self, skip_band: usize, x: &R) -> R {
        let mut prod = x.val(1.0);
        for (i, band) in self.bands.iter().enumerate() {
            if i == skip_band {
                continue;
            }
            prod *= (x.clone() - &band.lo).abs();
            prod *= (x.clone() - &band.hi).abs();
        }
        prod.sqrt()
    }

    /// Q evaluated through the hull Chebyshev representation.
    fn q_at(&self, x: &R) -> R {
        match &self.hull {
            Some(hull) => clenshaw(&self.q_cheb, &hull.s_of_x(x)),
            None => x.val(1.0),
        }
    }

    /// |Q(x)|, the numerator of the equilibrium density.
    pub fn q_abs_at(&self, x: &R) -> R {
        self.q_at(x).abs()
    }

    /// Length of the resolved Chebyshev expansion of the density factor on
    /// band b (a resolution hint for discrete quadratures).
    pub fn band_expansion_len(&self, band: usize) -> usize {
        self.band_coeffs.get(band).map_or(32, |c| c.len())
    }

    /// Smooth density factor on band b: the equilibrium measure there is
    /// `(1/pi) F_b(s) / sqrt(1-s^2) ds`.
    pub fn density_factor(&self, band: usize, s: &R) -> R {
        let x = self.bands[band].x_of_s(s);
        let sign = if (self.bands.len() - 1 - band) % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        self.q_at(&x) * s.val(sign) / self.g_factor(band, &x)
    }

    /// Nodes and weights of a discrete representation of the equilibrium
    /// measure: per band at least `min_per_band` cosine-clustered nodes,
    /// scaled up with the resolved density expansion.
    pub fn discrete_measure(&self, min_per_band: usize) -> (Vec<R>, Vec<R>) {
        let template = self.template();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let pi = template.pi();
        for (b, band) in self.bands.iter().enumerate() {
            let n = min_per_band.max(2 * self.band_coeffs[b].len()).max(32);
            let h = pi.clone() / template.val(n as f64);
            let inv_n = template.val(1.0 / n as f64);
            for j in 0..n {
                let theta = h.clone() * template.val(j as f64 + 0.5);
                let s = theta.cos();
                let w = self.density_factor(b, &s) * &inv_n;
                nodes.push(band.x_of_s(&s));
                weights.push(w);
            }
        }
        (nodes, weights)
    }

    /// Logarithmic potential `U(x) = \int log|x - t| dmu_K(t)` at a real
    /// point. In-band evaluations go through closed-form Chebyshev log
    /// moments; off-band contributions use the adaptive cosine rule.
    pub fn log_potential(&self, x: &R) -> Result<R> {
        if self.set.is_circle() {
            // U(z) = max(log|z|, 0) for the uniform measure on the circle
            let a = x.clone().abs();
            let one = x.val(1.0);
            return Ok(if a > one { a.ln() } else { x.val(0.0) });
        }
        let cfg = QuadCfg::for_digits(self.digits);
        let mut total = x.val(0.0);
        for (b, band) in self.bands.iter().enumerate() {
            if band.contains(x) {
                let coeffs = &self.band_coeffs[b];
                let sigma = band.s_of_x(x);
                let ln2 = x.val(2.0).ln();
                let in_band = self.band_masses[b].clone() * band.radius.clone().ln()
                    - coeffs[0].clone() * ln2
                    - log_moment_series(coeffs, &sigma);
                total += in_band;
            } else {
                let f = |theta: &R| {
                    let s = theta.clone().cos();
                    let t = band.x_of_s(&s);
                    self.density_factor(b, &s) * (x.clone() - t).abs().ln()
                };
                let (value, _) =
                    adaptive_theta(&f, 64, &cfg, x, "off-band potential contribution")?;
                total += value / x.pi();
            }
        }
        Ok(total)
    }

    /// Potential at a complex point (im != 0 or any point off K).
    pub fn log_potential_complex(&self, re: &R, im: &R) -> Result<R> {
        if im.is_zero() {
            return self.log_potential(re);
        }
        if self.set.is_circle() {
            let r2 = re.clone() * re + im.clone() * im;
            let one = re.val(1.0);
            return Ok(if r2 > one {
                r2.ln() * re.val(0.5)
            } else {
                re.val(0.0)
            });
        }
        let cfg = QuadCfg::for_digits(self.digits);
        let half = re.val(0.5);
        let mut total = re.val(0.0);
        for (b, band) in self.bands.iter().enumerate() {
            let f = |theta: &R| {
                let s = theta.clone().cos();
                let t = band.x_of_s(&s);
                let dx = re.clone() - t;
                let d2 = dx.clone() * &dx + im.clone() * im;
                self.density_factor(b, &s) * d2.ln() * &half
            };
            let (value, _) = adaptive_theta(&f, 64, &cfg, re, "complex potential contribution")?;
            total += value / re.pi();
        }
        Ok(total)
    }

    /// Derivative of the potential at a real point off K, evaluated on a
    /// discrete representation of the measure.
    fn potential_derivative(&self, x: &R, nodes: &[R], weights: &[R]) -> R {
        let mut sum = x.val(0.0);
        for (t, w) in nodes.iter().zip(weights) {
            sum += w.clone() / (x.clone() - t);
        }
        sum
    }
}

/// Compute the equilibrium measure of a compact set.
///
/// `digits` selects the working precision for extended-precision scalars;
/// the binary64 instantiation ignores it. For the unit circle this returns
/// the uniform measure with capacity 1.
pub fn equilibrium_measure<R: Real>(
    set: &CompactSetSpec,
    digits: u32,
) -> Result<EquilibriumData<R>> {
    set.validate()?;
    let template = R::seed(digits, 0.0);
    let cfg = QuadCfg::for_digits(digits);

    if set.is_circle() {
        return Ok(EquilibriumData {
            set: set.clone(),
            digits,
            bands: Vec::new(),
            q_cheb: Vec::new(),
            hull: None,
            capacity: template.val(1.0),
            robin: template.val(0.0),
            gap_zeros: Vec::new(),
            band_masses: Vec::new(),
            band_coeffs: Vec::new(),
            quad_nodes: 0,
        });
    }

    let bands: Vec<BandGeom<R>> = set
        .bands()
        .iter()
        .map(|iv| {
            let (lo, hi) = iv.endpoints_r(&template);
            BandGeom::new(lo, hi)
        })
        .collect();
    let p = bands.len();
    let hull = BandGeom::new(bands[0].lo.clone(), bands[p - 1].hi.clone());

    let mut quad_nodes = 0usize;

    // Q in the hull Chebyshev basis.
    let q_cheb = if p == 1 {
        vec![template.val(1.0)]
    } else {
        // leading coefficient of t^{p-1} in the hull basis: with
        // t = C + Rh s, t^{p-1} = Rh^{p-1} (s^{p-1} + ...) and
        // s^{p-1} = 2^{2-p} T_{p-1}(s) + lower order.
        let lead = hull.radius.clone().powi(p as i32 - 1)
            * template.val(2.0f64).powi(2 - p as i32);
        // gap integral rows I_{j,k} = \int_{gap_j} T_k(s(t)) / sqrt|R(t)| dt
        let mut matrix: Vec<Vec<R>> = Vec::with_capacity(p - 1);
        let mut rhs: Vec<R> = Vec::with_capacity(p - 1);
        for j in 0..p - 1 {
            let (row, nodes_used) = gap_row(&bands, &hull, j, p, &cfg, &template)?;
            quad_nodes = quad_nodes.max(nodes_used);
            let mut a_row = row;
            let last = a_row.pop().expect("row has p entries");
            rhs.push(-(lead.clone() * last));
            matrix.push(a_row);
        }
        let mut coeffs = solve_dense(matrix, rhs)?;
        coeffs.push(lead);
        coeffs
    };

    let mut data = EquilibriumData {
        set: set.clone(),
        digits,
        bands,
        q_cheb,
        hull: Some(hull),
        capacity: template.val(1.0),
        robin: template.val(0.0),
        gap_zeros: Vec::new(),
        band_masses: Vec::new(),
        band_coeffs: Vec::new(),
        quad_nodes,
    };

    // gap zeros: one sign change of Q per gap
    for j in 0..p.saturating_sub(1) {
        let lo = data.bands[j].hi.clone();
        let hi = data.bands[j + 1].lo.clone();
        let f = |x: &R| data.q_at(x);
        let zero = bisect(&f, lo, hi, &template).ok_or_else(|| {
            Error::internal(format!("no sign change of Q in gap {j}: degenerate geometry"))
        })?;
        data.gap_zeros.push(zero);
    }

    // per-band expansion of the smooth density factor
    let mut masses = Vec::with_capacity(p);
    let mut coeffs_all = Vec::with_capacity(p);
    for b in 0..p {
        let f = |s: &R| data.density_factor(b, s);
        let coeffs =
            adaptive_chebyshev_coeffs(&f, 32, &cfg, &template, "band density expansion")?;
        // density nonnegative at quadrature nodes (scale: the band mass)
        let n_check = coeffs.len();
        let floor = -(coeffs[0].clone().abs() * template.val(1e-10))
            - template.val(1e-300);
        let pi = template.pi();
        for jj in 0..n_check {
            let theta =
                pi.clone() * template.val((jj as f64 + 0.5) / n_check as f64);
            let v = data.density_factor(b, &theta.cos());
            if v < floor {
                return Err(Error::internal(format!(
                    "negative equilibrium density on band {b}: {}",
                    v.to_f64()
                )));
            }
        }
        data.quad_nodes = data.quad_nodes.max(coeffs.len());
        masses.push(coeffs[0].clone());
        coeffs_all.push(coeffs);
    }
    let mut mass_sum = template.val(0.0);
    for m in &masses {
        mass_sum += m;
    }
    let mass_err = (mass_sum - template.val(1.0)).abs();
    if mass_err > template.val(MASS_SUM_TOL) {
        return Err(Error::internal(format!(
            "band masses sum off by {}: quadrature failure",
            mass_err.to_f64()
        )));
    }
    data.band_masses = masses;
    data.band_coeffs = coeffs_all;

    // capacity from the potential at the first band's midpoint
    let x0 = data.bands[0].center.clone();
    let log_cap = data.log_potential(&x0)?;
    data.capacity = log_cap.clone().exp();
    data.robin = -log_cap;
    Ok(data)
}

/// Logarithmic capacity of a set (convenience wrapper).
pub fn capacity<R: Real>(set: &CompactSetSpec, digits: u32) -> Result<R> {
    Ok(equilibrium_measure::<R>(set, digits)?.capacity())
}

/// A Green-function evaluation at one point.
#[derive(Clone, Debug)]
pub struct GreenEvaluation<R> {
    pub re: R,
    pub im: R,
    pub value: R,
}

/// Green function of the unbounded complement component with pole at
/// infinity: `g(z) = U(z) - log Cap(K)`, clamped to zero on K.
pub fn green<R: Real>(eq: &EquilibriumData<R>, re: &R, im: &R) -> Result<GreenEvaluation<R>> {
    let u = eq.log_potential_complex(re, im)?;
    let mut value = u - eq.log_capacity();
    let clamp = re.val(GREEN_CLAMP);
    if value.clone().abs() <= clamp {
        let on_set = im.is_zero() && eq.set().contains_point(re.to_f64());
        if on_set || value < re.val(0.0) {
            value = re.val(0.0);
        }
    }
    if value < re.val(-(GREEN_CLAMP)) {
        return Err(Error::internal(format!(
            "green function negative beyond clamp at ({}, {}): {}",
            re.to_f64(),
            im.to_f64(),
            value.to_f64()
        )));
    }
    Ok(GreenEvaluation {
        re: re.clone(),
        im: im.clone(),
        value,
    })
}

/// Critical points of the Green function: one per gap, located by bisection
/// on the sign change of the potential derivative.
pub fn critical_points<R: Real>(eq: &EquilibriumData<R>) -> Result<Vec<R>> {
    if eq.set().is_circle() || eq.bands().len() <= 1 {
        return Ok(Vec::new());
    }
    let template = eq.template();
    let (nodes, weights) = eq.discrete_measure(128);
    let mut points = Vec::new();
    for j in 0..eq.bands().len() - 1 {
        let gap_lo = eq.bands()[j].hi.clone();
        let gap_hi = eq.bands()[j + 1].lo.clone();
        let gap_len = gap_hi.clone() - &gap_lo;
        let f = |x: &R| eq.potential_derivative(x, &nodes, &weights);
        // bracket: derivative is +inf at the left edge, -inf at the right
        let mut bracket = None;
        for shrink in [1e-3, 1e-6, 1e-9, 1e-12] {
            let eps = gap_len.clone() * template.val(shrink);
            let lo = gap_lo.clone() + &eps;
            let hi = gap_hi.clone() - &eps;
            if f(&lo) > template.val(0.0) && f(&hi) < template.val(0.0) {
                bracket = Some((lo, hi));
                break;
            }
        }
        let (lo, hi) = bracket.ok_or_else(|| {
            Error::non_convergence(
                format!("bracketing the critical point in gap {j} (insufficient quadrature precision)"),
                gap_lo.to_f64(),
                gap_hi.to_f64(),
            )
        })?;
        let zero = bisect(&f, lo, hi, &template)
            .ok_or_else(|| Error::internal(format!("bisection lost the sign change in gap {j}")))?;
        points.push(zero);
    }
    Ok(points)
}

/// Parreau-Widom sum: Green values summed over all critical points.
pub fn pw_sum<R: Real>(eq: &EquilibriumData<R>) -> Result<R> {
    let template = eq.template();
    let mut sum = template.val(0.0);
    for c in critical_points(eq)? {
        sum += green(eq, &c, &template.val(0.0))?.value;
    }
    Ok(sum)
}

/// mu_K-mass of each band.
pub fn band_measures<R: Real>(eq: &EquilibriumData<R>) -> Vec<R> {
    eq.band_masses().to_vec()
}

/// Result of the rational-dependence search over band masses.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalDependenceReport {
    pub found: bool,
    /// On success: `[q_0, q_1, ..., q_{l-1}]` with
    /// `sum_{j>=1} q_j mass_j = q_0`.
    pub witness: Option<Vec<i64>>,
    pub height_bound: u32,
}

/// Exhaustive search for an integer relation `sum q_j mu_K(K_j) = q_0`
/// between the band masses and 1, over `|q_j| <= height_bound`.
///
/// Candidates are enumerated by increasing height (max |q_j|), and within a
/// height layer lexicographically with each coordinate ordered
/// `0, 1, -1, 2, -2, ...`; the first hit is reported.
pub fn rational_dependence<R: Real>(
    eq: &EquilibriumData<R>,
    height_bound: u32,
) -> Result<RationalDependenceReport> {
    let masses = eq.band_masses();
    let l = masses.len();
    if l == 0 {
        return Err(Error::validation(
            "rational dependence is defined for interval unions",
        ));
    }
    let h = height_bound as i64;
    if h < 1 {
        return Err(Error::validation("height bound must be >= 1"));
    }
    let candidates = (2u128 * height_bound as u128 + 1).pow((l - 1) as u32);
    if candidates > HEIGHT_SEARCH_CAP {
        return Err(Error::validation(format!(
            "height bound {height_bound} with {l} bands needs {candidates} candidates (cap {HEIGHT_SEARCH_CAP})"
        )));
    }
    let template = eq.template();
    let tol = 1e-9 * height_bound as f64;
    if l == 1 {
        // no q_j to choose: the decomposition condition is empty
        return Ok(RationalDependenceReport {
            found: false,
            witness: None,
            height_bound,
        });
    }

    // coordinate ordering 0, 1, -1, 2, -2, ... shared by all layers
    let order: Vec<i64> = {
        let mut v = vec![0i64];
        for k in 1..=h {
            v.push(k);
            v.push(-k);
        }
        v
    };

    // advance a mixed-radix odometer; false once it wraps around
    fn advance(idx: &mut [usize], base: usize) -> bool {
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < base {
                return true;
            }
            *slot = 0;
        }
        false
    }

    for height in 1..=h {
        let layer: Vec<i64> = order.iter().copied().filter(|q| q.abs() <= height).collect();
        let mut idx = vec![0usize; l - 1];
        loop {
            let qs: Vec<i64> = idx.iter().map(|&i| layer[i]).collect();
            if qs.iter().map(|q| q.abs()).max() == Some(height) {
                let mut sum = template.val(0.0);
                for (q, m) in qs.iter().zip(masses) {
                    sum += m.clone() * template.val(*q as f64);
                }
                let q0 = sum.to_f64().round();
                if q0.abs() <= h as f64 {
                    let diff = (sum - template.val(q0)).abs();
                    if diff <= template.val(tol) {
                        let mut witness = vec![q0 as i64];
                        witness.extend(qs);
                        return Ok(RationalDependenceReport {
                            found: true,
                            witness: Some(witness),
                            height_bound,
                        });
                    }
                }
            }
            if !advance(&mut idx, layer.len()) {
                break;
            }
        }
    }
    Ok(RationalDependenceReport {
        found: false,
        witness: None,
        height_bound,
    })
}

/// Dense Gaussian elimination with partial pivoting.
pub(crate) fn solve_dense<R: Real>(mut a: Vec<Vec<R>>, mut b: Vec<R>) -> Result<Vec<R>> {
    let n = b.len();
    for (row, cols) in a.iter().enumerate() {
        if cols.len() != n {
            return Err(Error::internal(format!(
                "solve_dense: row {row} has {} entries, expected {n}",
                cols.len()
            )));
        }
    }
    for k in 0..n {
        let mut pivot = k;
        let mut best = a[k][k].clone().abs();
        for i in k + 1..n {
            let v = a[i][k].clone().abs();
            if v > best {
                best = v;
                pivot = i;
            }
        }
        if best.is_zero() {
            return Err(Error::internal(
                "singular linear system for the equilibrium density",
            ));
        }
        if pivot != k {
            a.swap(pivot, k);
            b.swap(pivot, k);
        }
        for i in k + 1..n {
            let factor = a[i][k].clone() / &a[k][k];
            for j in k..n {
                let t = factor.clone() * &a[k][j];
                a[i][j] -= t;
            }
            let t = factor * &b[k];
            b[i] -= t;
        }
    }
    let template = b[0].val(0.0);
    let mut x = vec![template; n];
    for k in (0..n).rev() {
        let mut sum = b[k].clone();
        for j in k + 1..n {
            sum -= a[k][j].clone() * &x[j];
        }
        x[k] = sum / &a[k][k];
    }
    Ok(x)
}

/// All gap integrals `I_{j,k}, k = 0..p-1` for gap j, with node doubling
/// until every entry stabilizes.
fn gap_row<R: Real>(
    bands: &[BandGeom<R>],
    hull: &BandGeom<R>,
    j: usize,
    p: usize,
    cfg: &QuadCfg,
    template: &R,
) -> Result<(Vec<R>, usize)> {
    let gap = BandGeom::new(bands[j].hi.clone(), bands[j + 1].lo.clone());
    let eval = |n: usize| -> (Vec<R>, Vec<R>) {
        let pi = template.pi();
        let h = pi / template.val(n as f64);
        let mut sums = vec![template.val(0.0); p];
        let mut abs_sums = vec![template.val(0.0); p];
        for idx in 0..n {
            let theta = h.clone() * template.val(idx as f64 + 0.5);
            let t = gap.x_of_s(&theta.cos());
            // sqrt|R(t)| without the two factors cancelled by the cosine
            // substitution on this gap (band j's hi, band j+1's lo)
            let mut prod = template.val(1.0);
            for (i, band) in bands.iter().enumerate() {
                if i != j + 1 {
                    prod *= (t.clone() - &band.lo).abs();
                }
                if i != j {
                    prod *= (t.clone() - &band.hi).abs();
                }
            }
            let w = template.val(1.0) / prod.sqrt();
            let s_hull = hull.s_of_x(&t);
            // T_k(s_hull) recurrence
            let mut t_prev = template.val(1.0);
            let mut t_cur = s_hull.clone();
            for k in 0..p {
                let tk = if k == 0 { &t_prev } else { &t_cur };
                let term = tk.clone() * &w;
                abs_sums[k] += term.clone().abs();
                sums[k] += term;
                if k > 0 {
                    let next = s_hull.clone() * &t_cur * template.val(2.0) - t_prev.clone();
                    t_prev = std::mem::replace(&mut t_cur, next);
                }
            }
        }
        for k in 0..p {
            sums[k] *= &h;
            abs_sums[k] *= &h;
        }
        (sums, abs_sums)
    };

    let tol = template.val(cfg.rel_tol);
    let mut n = GAP_QUAD_START;
    let (mut prev, _) = eval(n);
    for _ in 0..cfg.max_doublings {
        n *= 2;
        let (cur, cur_abs) = eval(n);
        let mut ok = true;
        for k in 0..p {
            let delta = (cur[k].clone() - &prev[k]).abs();
            let scale = rmax(cur_abs[k].clone(), template.val(f64::MIN_POSITIVE));
            if delta > tol.clone() * &scale {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok((cur, n));
        }
        prev = cur;
    }
    Err(Error::non_convergence(
        format!("gap integrals for gap {j}"),
        prev[0].to_f64(),
        f64::NAN,
    ))
}

/// Bisection for a root of f with a sign change on [lo, hi]. Returns None if
/// the endpoint signs agree.
fn bisect<R: Real, F: Fn(&R) -> R>(f: &F, mut lo: R, mut hi: R, template: &R) -> Option<R> {
    let zero = template.val(0.0);
    let f_lo = f(&lo);
    let f_hi = f(&hi);
    if f_lo.is_zero() {
        return Some(lo);
    }
    if f_hi.is_zero() {
        return Some(hi);
    }
    if (f_lo > zero) == (f_hi > zero) {
        return None;
    }
    let lo_positive = f_lo > zero;
    let tol = template.val(BISECTION_TOL);
    let half = template.val(0.5);
    for _ in 0..200 {
        let mid = (lo.clone() + &hi) * &half;
        if (hi.clone() - &lo).abs() <= tol {
            return Some(mid);
        }
        let fm = f(&mid);
        if fm.is_zero() {
            return Some(mid);
        }
        if (fm > zero) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some((lo + &hi) * &half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::MpReal;
    use crate::sets::{cantor_approximant, interval_union_from_f64};

    fn eq_f64(pairs: &[(f64, f64)]) -> EquilibriumData<f64> {
        let set = interval_union_from_f64(pairs).unwrap();
        equilibrium_measure(&set, 0).unwrap()
    }

    #[test]
    fn single_interval_classics() {
        let eq = eq_f64(&[(-1.0, 1.0)]);
        assert!((eq.capacity() - 0.5).abs() < 1e-14, "cap = {}", eq.capacity());
        assert!((eq.robin_constant() - 2.0f64.ln()).abs() < 1e-14);
        assert_eq!(eq.band_masses().len(), 1);
        assert!((eq.band_masses()[0] - 1.0).abs() < 1e-14);
        assert!(eq.gap_zeros().is_empty());
    }

    #[test]
    fn general_interval_capacity_formula() {
        // Cap([a,b]) = (b-a)/4
        let eq = eq_f64(&[(0.0, 1.0)]);
        assert!((eq.capacity() - 0.25).abs() < 1e-14);
        let eq = eq_f64(&[(-3.0, 5.0)]);
        assert!((eq.capacity() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn circle_trivial() {
        let eq: EquilibriumData<f64> =
            equilibrium_measure(&CompactSetSpec::circle(), 0).unwrap();
        assert_eq!(eq.capacity(), 1.0);
        assert_eq!(eq.robin_constant(), 0.0);
        assert!(eq.band_masses().is_empty());
    }

    #[test]
    fn symmetric_two_bands() {
        let eq = eq_f64(&[(-1.0, -0.5), (0.5, 1.0)]);
        assert_eq!(eq.gap_zeros().len(), 1);
        assert!(eq.gap_zeros()[0].abs() < 1e-12, "zero = {}", eq.gap_zeros()[0]);
        assert!((eq.band_masses()[0] - 0.5).abs() < 1e-13);
        assert!((eq.band_masses()[1] - 0.5).abs() < 1e-13);
        // exact capacity for [-1,-k] u [k,1]: sqrt(1-k^2)/2
        let expect = (1.0f64 - 0.25).sqrt() / 2.0;
        assert!(
            (eq.capacity() - expect).abs() < 1e-13,
            "cap = {}, expect = {expect}",
            eq.capacity()
        );
    }

    #[test]
    fn asymmetric_two_bands_structure() {
        let eq = eq_f64(&[(0.0, 1.0), (2.0, 4.0)]);
        assert_eq!(eq.gap_zeros().len(), 1);
        let z = eq.gap_zeros()[0];
        assert!(z > 1.0 && z < 2.0, "gap zero {z} outside gap");
        // masses asymmetric, sum to one
        let m = eq.band_masses();
        assert!((m[0] + m[1] - 1.0).abs() < 1e-13);
        assert!(m[0] < m[1], "wider band must carry more mass");
    }

    #[test]
    fn mirror_symmetry_masses() {
        // [0,1] u [2,3] is symmetric under x -> 3 - x
        let eq = eq_f64(&[(0.0, 1.0), (2.0, 3.0)]);
        assert!((eq.band_masses()[0] - 0.5).abs() < 1e-13);
        assert!((eq.band_masses()[1] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn green_interval_closed_form() {
        // g(z) = log|z + sqrt(z^2 - 1)| for K = [-1,1]
        let eq = eq_f64(&[(-1.0, 1.0)]);
        let g = green(&eq, &2.0, &0.0).unwrap().value;
        let expect = (2.0 + 3.0f64.sqrt()).ln();
        assert!((g - expect).abs() < 1e-12, "g = {g}, expect = {expect}");
        // far field: g(z) = log|z| - log Cap + O(1/z)
        let g = green(&eq, &1e6, &0.0).unwrap().value;
        let expect = 1e6f64.ln() + 2.0f64.ln();
        assert!((g - expect).abs() < 1e-6);
        // vanishes on K
        let g = green(&eq, &0.25, &0.0).unwrap().value;
        assert_eq!(g, 0.0);
    }

    #[test]
    fn green_complex_point() {
        let eq = eq_f64(&[(-1.0, 1.0)]);
        // g(iy) = log|iy + sqrt((iy)^2 - 1)| = log(y + sqrt(y^2+1))
        let g = green(&eq, &0.0, &1.0).unwrap().value;
        let expect = (1.0 + 2.0f64.sqrt()).ln();
        assert!((g - expect).abs() < 1e-12);
    }

    #[test]
    fn critical_point_symmetric() {
        let eq = eq_f64(&[(-1.0, -0.5), (0.5, 1.0)]);
        let cps = critical_points(&eq).unwrap();
        assert_eq!(cps.len(), 1);
        assert!(cps[0].abs() < 1e-10, "critical point {}", cps[0]);
        // pw sum equals g(0)
        let pw = pw_sum(&eq).unwrap();
        let g0 = green(&eq, &0.0, &0.0).unwrap().value;
        assert!((pw - g0).abs() < 1e-12);
        assert!(pw > 0.0);
    }

    #[test]
    fn no_critical_points_single_band() {
        let eq = eq_f64(&[(-1.0, 1.0)]);
        assert!(critical_points(&eq).unwrap().is_empty());
        assert_eq!(pw_sum(&eq).unwrap(), 0.0);
    }

    #[test]
    fn rational_dependence_symmetric_witness() {
        let eq = eq_f64(&[(-1.0, -0.5), (0.5, 1.0)]);
        let report = rational_dependence(&eq, 20).unwrap();
        assert!(report.found);
        assert_eq!(report.witness, Some(vec![1, 2]));
    }

    #[test]
    fn rational_dependence_single_band_empty() {
        let eq = eq_f64(&[(-1.0, 1.0)]);
        let report = rational_dependence(&eq, 20).unwrap();
        assert!(!report.found);
    }

    #[test]
    fn rational_dependence_height_cap() {
        let eq = eq_f64(&[(0.0, 1.0), (2.0, 3.0), (4.0, 5.0), (6.0, 7.0), (8.0, 9.0)]);
        assert!(rational_dependence(&eq, 200).is_err());
    }

    #[test]
    fn cantor_stage_one_capacity() {
        // exact: Cap([0,1/3] u [2/3,1]) = sqrt(2)/6
        let set = cantor_approximant(1).unwrap();
        let eq: EquilibriumData<f64> = equilibrium_measure(&set, 0).unwrap();
        let expect = 2.0f64.sqrt() / 6.0;
        assert!(
            (eq.capacity() - expect).abs() < 1e-13,
            "cap = {}, exact = {expect}",
            eq.capacity()
        );
        assert!((eq.band_masses()[0] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn extended_precision_interval() {
        let set = interval_union_from_f64(&[(-1.0, 1.0)]).unwrap();
        let eq: EquilibriumData<MpReal> = equilibrium_measure(&set, 50).unwrap();
        let half = MpReal::with_digits(50, 0.5);
        let err = (eq.capacity() - half.clone()).abs();
        assert!(err < half.val(1e-45), "err = {err}");
    }

    #[test]
    fn extended_precision_cantor_two_bands() {
        let set = cantor_approximant(1).unwrap();
        let eq: EquilibriumData<MpReal> = equilibrium_measure(&set, 50).unwrap();
        let t = MpReal::with_digits(50, 0.0);
        let expect = t.val(2.0).sqrt() / t.val(6.0);
        let err = (eq.capacity() - expect).abs();
        assert!(err < t.val(1e-40), "err = {err}");
    }

    #[test]
    fn potential_constant_on_k() {
        // Frostman equality: U = log Cap everywhere on a regular K
        let eq = eq_f64(&[(0.0, 1.0), (2.0, 4.0)]);
        let log_cap = eq.log_capacity();
        for x in [0.1, 0.5, 0.93, 2.2, 3.0, 3.9] {
            let u = eq.log_potential(&x).unwrap();
            assert!(
                (u - log_cap).abs() < 1e-12,
                "U({x}) = {u} vs log cap {log_cap}"
            );
        }
    }
}
