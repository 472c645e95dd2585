//! Chebyshev (minimax monic) polynomials on interval unions via the Remez
//! exchange, with equioscillation certificates and capacity-normalized
//! M-factors.
//!
//! The monic degree-n problem minimizes `||x^n - q||_K` over polynomials q of
//! degree < n, so the optimum equioscillates at n+1 points. On unions the
//! extremal set migrates between bands; each iteration therefore exchanges
//! the full reference against the refined local extrema of the residual
//! (global exchange), which is robust where single-point exchange cycles.

use crate::error::{Error, Result};
use crate::potential::{solve_dense, BandGeom, EquilibriumData};
use crate::quad::clenshaw;
use crate::sets::CompactSetSpec;

/// Remez stopping rule: (max error - levelled error) / levelled error.
const REMEZ_REL_TOL: f64 = 1e-10;
/// Iteration cap; stagnation past this is reported with the best iterate.
const REMEZ_MAX_ITER: usize = 200;
/// Grid density per band: 200 n cosine-clustered points.
const GRID_PER_DEGREE: usize = 200;
/// Default degree cap.
pub const DEGREE_CAP: usize = 64;

#[derive(Clone, Debug)]
pub struct ChebyshevResult {
    pub n: usize,
    /// Monic monomial coefficients, low to high (length n+1, last = 1).
    pub coeffs: Vec<f64>,
    pub sup_norm: f64,
    /// Equioscillation certificate: (abscissa, sign), alternating, with
    /// |T(x_i)| within 1e-8 of the sup norm; n+1 entries.
    pub alternation: Vec<(f64, i8)>,
    /// `sup_norm / Cap(K)^n`, evaluated in the log domain.
    pub m_factor: f64,
    pub iterations: usize,
    /// Levelled error per iteration (nondecreasing up to roundoff).
    pub levelled_history: Vec<f64>,
}

/// Minimax monic polynomial of degree n on the set of `eq`.
pub fn chebyshev_poly(eq: &EquilibriumData<f64>, n: usize) -> Result<ChebyshevResult> {
    if n < 1 {
        return Err(Error::validation("chebyshev_poly needs n >= 1"));
    }
    if n > DEGREE_CAP {
        return Err(Error::validation(format!(
            "degree {n} exceeds the configured cap {DEGREE_CAP}"
        )));
    }
    if eq.set().is_circle() {
        // rotation symmetry forces the monomial z^n
        let mut coeffs = vec![0.0; n + 1];
        coeffs[n] = 1.0;
        return Ok(ChebyshevResult {
            n,
            coeffs,
            sup_norm: 1.0,
            alternation: Vec::new(),
            m_factor: 1.0,
            iterations: 0,
            levelled_history: Vec::new(),
        });
    }
    remez(eq, n)
}

/// `M_{n,K} = ||T_{n,K}||_K / Cap(K)^n`.
pub fn m_factor(eq: &EquilibriumData<f64>, n: usize) -> Result<f64> {
    Ok(chebyshev_poly(eq, n)?.m_factor)
}

struct HullBasis {
    hull: BandGeom<f64>,
    /// x^n in the hull Chebyshev basis, low to high (length n+1).
    target: Vec<f64>,
}

impl HullBasis {
    fn new(eq: &EquilibriumData<f64>, n: usize) -> Self {
        let bands = eq.bands();
        let hull = BandGeom::new(bands[0].lo, bands[bands.len() - 1].hi);
        // multiply-by-x in the T_k(s) basis with x = C + R s:
        // x T_k = C T_k + (R/2)(T_{k+1} + T_{k-1}), T_{-1} := T_1
        let c = hull.center;
        let r = hull.radius;
        let mut cur = vec![1.0f64]; // x^0
        for _ in 0..n {
            let mut next = vec![0.0f64; cur.len() + 1];
            for (k, &a) in cur.iter().enumerate() {
                next[k] += c * a;
                if k == 0 {
                    next[1] += r * a;
                } else {
                    next[k + 1] += 0.5 * r * a;
                    next[k - 1] += 0.5 * r * a;
                }
            }
            cur = next;
        }
        HullBasis { hull, target: cur }
    }

    fn s_of_x(&self, x: f64) -> f64 {
        self.hull.s_of_x(&x)
    }

    /// Residual `x^n - q(x)` where q is given by Chebyshev coefficients.
    fn residual(&self, q: &[f64], x: f64) -> f64 {
        let s = self.s_of_x(x);
        let mut diff: Vec<f64> = self.target.clone();
        for (k, c) in q.iter().enumerate() {
            diff[k] -= c;
        }
        clenshaw(&diff, &s)
    }
}

fn remez(eq: &EquilibriumData<f64>, n: usize) -> Result<ChebyshevResult> {
    let bands = eq.bands();
    let basis = HullBasis::new(eq, n);

    // cosine-clustered grid per band, endpoints included
    let grid: Vec<Vec<f64>> = bands
        .iter()
        .map(|band| {
            let m = GRID_PER_DEGREE * n;
            (0..=m)
                .map(|j| band.x_of_s(&(std::f64::consts::PI * j as f64 / m as f64).cos()))
                .collect()
        })
        .collect();

    let mut reference = initial_reference(eq, n);
    let mut history: Vec<f64> = Vec::new();
    let mut best: Option<(Vec<f64>, f64)> = None;

    for iter in 1..=REMEZ_MAX_ITER {
        let (q, levelled) = solve_reference(&basis, &reference)?;
        let level = levelled.abs();
        history.push(level);

        // locate and refine all residual extrema
        let mut candidates: Vec<(f64, f64)> = Vec::new();
        for (b, points) in grid.iter().enumerate() {
            let vals: Vec<f64> = points.iter().map(|&x| basis.residual(&q, x)).collect();
            for i in 0..points.len() {
                let is_edge = i == 0 || i == points.len() - 1;
                let is_local_max = !is_edge
                    && vals[i].abs() >= vals[i - 1].abs()
                    && vals[i].abs() >= vals[i + 1].abs();
                if !(is_edge || is_local_max) {
                    continue;
                }
                let (lo, hi) = bracket(points, i, &bands[b]);
                let x = golden_max(|x| basis.residual(&q, x).abs(), lo, hi);
                candidates.push((x, basis.residual(&q, x)));
            }
        }
        candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        candidates.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-13 * (1.0 + b.0.abs()));
        let max_err = candidates
            .iter()
            .map(|(_, v)| v.abs())
            .fold(0.0f64, f64::max);

        if best.as_ref().map_or(true, |(_, e)| level > *e) {
            best = Some((q.clone(), level));
        }

        if level > 0.0 && (max_err - level) / level <= REMEZ_REL_TOL {
            return finish(eq, n, &basis, q, level.max(max_err), reference, iter, history);
        }

        // global exchange: lexicographically first maximal alternating
        // subsequence of the refined extrema
        let mut new_ref = alternating_subsequence(&candidates, n + 1);
        if new_ref.len() < n + 1 {
            // merge the old reference back in and retry the selection
            let mut merged = candidates.clone();
            for &x in &reference {
                merged.push((x, basis.residual(&q, x)));
            }
            merged.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            merged.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-13 * (1.0 + b.0.abs()));
            new_ref = alternating_subsequence(&merged, n + 1);
        }
        if new_ref.len() < n + 1 {
            return Err(Error::non_convergence(
                format!("Remez exchange collapsed at degree {n}"),
                level,
                max_err,
            ));
        }
        reference = new_ref;
    }

    let (_q, level) = best.ok_or_else(|| Error::internal("Remez produced no iterate"))?;
    Err(Error::non_convergence(
        format!("Remez exchange stagnated at degree {n} after {REMEZ_MAX_ITER} iterations"),
        level,
        history.last().copied().unwrap_or(f64::NAN),
    ))
}

/// Initial reference: Chebyshev points of the hull snapped to the nearest
/// in-set points, padded to n+1 distinct abscissae if snapping collides.
fn initial_reference(eq: &EquilibriumData<f64>, n: usize) -> Vec<f64> {
    let bands = eq.bands();
    let hull = BandGeom::new(bands[0].lo, bands[bands.len() - 1].hi);
    let snap = |x: f64| -> f64 {
        if eq.set().contains_point(x) {
            return x;
        }
        let mut best = bands[0].lo;
        let mut dist = f64::INFINITY;
        for band in bands {
            for e in [band.lo, band.hi] {
                if (x - e).abs() < dist {
                    dist = (x - e).abs();
                    best = e;
                }
            }
        }
        best
    };
    let mut points: Vec<f64> = (0..=n)
        .map(|j| snap(hull.x_of_s(&(std::f64::consts::PI * j as f64 / n as f64).cos())))
        .collect();
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup();
    // fill collisions with band midpoints and interior samples
    let mut extras: Vec<f64> = Vec::new();
    for band in bands {
        let m = 8 * (n + 1);
        for j in 0..=m {
            extras.push(band.x_of_s(&(std::f64::consts::PI * j as f64 / m as f64).cos()));
        }
    }
    extras.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut k = 0;
    while points.len() < n + 1 && k < extras.len() {
        let x = extras[k];
        if points.iter().all(|&p| (p - x).abs() > 1e-12) {
            points.push(x);
            points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
        k += 1;
    }
    points
}

/// Solve the reference interpolation: q(x_i) + (-1)^i E = x_i^n.
fn solve_reference(basis: &HullBasis, reference: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = reference.len() - 1; // degree
    let mut matrix = Vec::with_capacity(n + 1);
    let mut rhs = Vec::with_capacity(n + 1);
    for (i, &x) in reference.iter().enumerate() {
        let s = basis.s_of_x(x);
        let mut row = Vec::with_capacity(n + 1);
        // T_k(s), k = 0..n-1
        let mut t_prev = 1.0f64;
        let mut t_cur = s;
        for k in 0..n {
            row.push(if k == 0 { t_prev } else { t_cur });
            if k > 0 {
                let next = 2.0 * s * t_cur - t_prev;
                t_prev = t_cur;
                t_cur = next;
            }
        }
        row.push(if i % 2 == 0 { 1.0 } else { -1.0 });
        matrix.push(row);
        rhs.push(clenshaw(&basis.target, &s));
    }
    let mut solution = solve_dense(matrix, rhs)?;
    let e = solution.pop().expect("system has n+2 unknowns");
    Ok((solution, e))
}

fn bracket(points: &[f64], i: usize, band: &BandGeom<f64>) -> (f64, f64) {
    let lo = if i == 0 { band.lo } else { points[i - 1] };
    let hi = if i == points.len() - 1 {
        band.hi
    } else {
        points[i + 1]
    };
    (lo.min(hi), lo.max(hi))
}

/// Golden-section maximization of f on [lo, hi].
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..60 {
        if hi - lo < 1e-14 * (1.0 + lo.abs()) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Lexicographically first maximal alternating subsequence: same-sign runs
/// collapse to their largest-|r| member, then the ends trim to the target
/// length by dropping the smaller end first.
fn alternating_subsequence(candidates: &[(f64, f64)], want: usize) -> Vec<f64> {
    let mut picked: Vec<(f64, f64)> = Vec::new();
    for &(x, v) in candidates {
        if v == 0.0 {
            continue;
        }
        match picked.last() {
            Some(&(_, prev)) if prev.signum() == v.signum() => {
                if v.abs() > prev.abs() {
                    *picked.last_mut().unwrap() = (x, v);
                }
            }
            _ => picked.push((x, v)),
        }
    }
    while picked.len() > want {
        let first = picked.first().unwrap().1.abs();
        let last = picked.last().unwrap().1.abs();
        if first <= last {
            picked.remove(0);
        } else {
            picked.pop();
        }
    }
    picked.into_iter().map(|(x, _)| x).collect()
}

#[allow(clippy::too_many_arguments)]
fn finish(
    eq: &EquilibriumData<f64>,
    n: usize,
    basis: &HullBasis,
    q: Vec<f64>,
    sup_norm: f64,
    reference: Vec<f64>,
    iterations: usize,
    history: Vec<f64>,
) -> Result<ChebyshevResult> {
    // certificate: alternating signs within 1e-8 of the sup norm
    let mut alternation = Vec::with_capacity(reference.len());
    for &x in &reference {
        let v = basis.residual(&q, x);
        alternation.push((x, if v >= 0.0 { 1i8 } else { -1i8 }));
        if v.abs() < sup_norm * (1.0 - 1e-8) {
            return Err(Error::non_convergence(
                format!("equioscillation certificate failed at degree {n}"),
                v.abs(),
                sup_norm,
            ));
        }
    }
    for w in alternation.windows(2) {
        if w[0].1 == w[1].1 {
            return Err(Error::internal(format!(
                "alternation signs failed to alternate at degree {n}"
            )));
        }
    }

    // monomial coefficients of x^n - q via the hull basis
    let mut cheb = basis.target.clone();
    for (k, c) in q.iter().enumerate() {
        cheb[k] -= c;
    }
    let coeffs = chebyshev_to_monomial(&cheb, basis.hull.center, basis.hull.radius);

    let log_m = sup_norm.ln() - (n as f64) * eq.log_capacity();
    Ok(ChebyshevResult {
        n,
        coeffs,
        sup_norm,
        alternation,
        m_factor: log_m.exp(),
        iterations,
        levelled_history: history,
    })
}

/// Convert `sum c_k T_k((x - center)/radius)` to monomial coefficients in x.
fn chebyshev_to_monomial(cheb: &[f64], center: f64, radius: f64) -> Vec<f64> {
    let n = cheb.len();
    // T_k in monomial s-coefficients, computed by recurrence
    let mut s_poly = vec![0.0f64; n];
    let mut t_prev = vec![0.0f64; n];
    let mut t_cur = vec![0.0f64; n];
    t_prev[0] = 1.0;
    if n > 1 {
        t_cur[1] = 1.0;
    }
    for (k, &c) in cheb.iter().enumerate() {
        let t_k = if k == 0 { &t_prev } else { &t_cur };
        for (j, &t) in t_k.iter().enumerate() {
            s_poly[j] += c * t;
        }
        if k > 0 && k + 1 < n {
            let mut next = vec![0.0f64; n];
            for j in 0..n - 1 {
                next[j + 1] += 2.0 * t_cur[j];
            }
            for j in 0..n {
                next[j] -= t_prev[j];
            }
            t_prev = std::mem::replace(&mut t_cur, next);
        }
    }
    // substitute s = (x - center)/radius from the highest coefficient down
    let mut result = vec![0.0f64];
    for &a in s_poly.iter().rev() {
        // result = result * (x - center)/radius + a
        let mut next = vec![0.0f64; result.len() + 1];
        for (j, &r) in result.iter().enumerate() {
            next[j + 1] += r / radius;
            next[j] -= r * center / radius;
        }
        next[0] += a;
        result = next;
    }
    while result.len() > 1 && result.last() == Some(&0.0) {
        result.pop();
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::equilibrium_measure;
    use crate::sets::{cantor_approximant, interval_union_from_f64};

    fn eq_of(pairs: &[(f64, f64)]) -> EquilibriumData<f64> {
        let set = interval_union_from_f64(pairs).unwrap();
        equilibrium_measure(&set, 0).unwrap()
    }

    #[test]
    fn classical_chebyshev_degree_three() {
        // 2^{1-n} T_n on [-1,1]: for n = 3, (4x^3 - 3x)/4, sup norm 1/4
        let eq = eq_of(&[(-1.0, 1.0)]);
        let r = chebyshev_poly(&eq, 3).unwrap();
        assert!((r.sup_norm - 0.25).abs() < 1e-12, "sup = {}", r.sup_norm);
        let expect = [0.0, -0.75, 0.0, 1.0];
        for (c, e) in r.coeffs.iter().zip(expect) {
            assert!((c - e).abs() < 1e-9, "coeffs = {:?}", r.coeffs);
        }
        assert_eq!(r.alternation.len(), 4);
        // M_n = sup / cap^n = 0.25 / 0.5^3 = 2
        assert!((r.m_factor - 2.0).abs() < 1e-10);
    }

    #[test]
    fn interval_m_factor_all_degrees() {
        let eq = eq_of(&[(-1.0, 1.0)]);
        for n in 1..=16 {
            let m = m_factor(&eq, n).unwrap();
            assert!((m - 2.0).abs() < 1e-6, "n = {n}: M = {m}");
        }
    }

    #[test]
    fn circle_short_circuit() {
        let eq: EquilibriumData<f64> =
            equilibrium_measure(&crate::sets::CompactSetSpec::circle(), 0).unwrap();
        let r = chebyshev_poly(&eq, 7).unwrap();
        assert_eq!(r.sup_norm, 1.0);
        assert_eq!(r.m_factor, 1.0);
        assert_eq!(r.coeffs.len(), 8);
        assert_eq!(r.coeffs[7], 1.0);
    }

    #[test]
    fn symmetric_two_band_even_structure() {
        // K = [-1,-1/2] u [1/2,1]: the degree-2 minimax is x^2 - 5/8 with
        // sup norm 3/8 (map u = x^2 onto [1/4,1])
        let eq = eq_of(&[(-1.0, -0.5), (0.5, 1.0)]);
        let r = chebyshev_poly(&eq, 2).unwrap();
        assert!((r.sup_norm - 0.375).abs() < 1e-10, "sup = {}", r.sup_norm);
        assert!(r.coeffs[1].abs() < 1e-10, "odd coefficient {}", r.coeffs[1]);
        assert!((r.coeffs[0] + 0.625).abs() < 1e-9, "c0 = {}", r.coeffs[0]);
    }

    #[test]
    fn levelled_error_monotone() {
        let eq = eq_of(&[(0.0, 1.0), (2.0, 4.0)]);
        let r = chebyshev_poly(&eq, 6).unwrap();
        for w in r.levelled_history.windows(2) {
            assert!(
                w[1] >= w[0] * (1.0 - 1e-9),
                "levelled error decreased: {:?}",
                r.levelled_history
            );
        }
        assert!(r.m_factor >= 1.0 - 1e-9);
    }

    #[test]
    fn cantor_two_m_factors_at_least_one() {
        let set = cantor_approximant(2).unwrap();
        let eq = equilibrium_measure(&set, 0).unwrap();
        for n in 1..=8 {
            let r = chebyshev_poly(&eq, n).unwrap();
            assert!(
                r.m_factor >= 1.0 - 1e-9,
                "n = {n}: M = {} below 1",
                r.m_factor
            );
            assert_eq!(r.alternation.len(), n + 1);
        }
    }

    #[test]
    fn certificate_values_near_sup() {
        let eq = eq_of(&[(-1.0, -0.25), (0.5, 1.5)]);
        let r = chebyshev_poly(&eq, 5).unwrap();
        assert_eq!(r.alternation.len(), 6);
        let mut signs = Vec::new();
        for &(_, s) in &r.alternation {
            signs.push(s);
        }
        for w in signs.windows(2) {
            assert_ne!(w[0], w[1]);
        }
    }
}
