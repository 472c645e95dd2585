//! Theorem-level experiments: the Szego lower bound for Widom factors, the
//! circle and single-interval norm limits, Widom-condition classification,
//! and the Cantor-stage study.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{
    equilibrium_as_measure, log_density_integral_mu_k, szego_integral, DensitySpec, MeasureSpec,
    SzegoIntegral,
};
use crate::orthopoly::{recurrence, recurrence_band_uniform, recurrence_lebesgue};
use crate::potential::{capacity, critical_points, equilibrium_measure, pw_sum};
use crate::real::{MpReal, Real};
use crate::sets::{cantor_approximant, interval_union_from_f64, CompactSetSpec};

/// Relative tolerance for theorem-bound verdicts.
pub const BOUND_REL_TOL: f64 = 1e-8;

/// One verification of `min_n W_n(mu)^2 >= e^M`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub set: String,
    pub measure: String,
    /// Szego integral `M = \int log(dmu/dmu_K) dmu_K`.
    pub m: f64,
    pub e_m: f64,
    pub min_wn_sq: f64,
    pub argmin_n: usize,
    pub n_range: usize,
    /// `min W_n^2 >= e^M (1 - 1e-8)`; false signals a numerical bug, the
    /// inequality is a theorem.
    pub verdict: bool,
}

/// Verify the Szego lower bound for one normalized measure.
pub fn verify_lower_bound<R: Real>(mu: &MeasureSpec<R>, n: usize) -> Result<BoundReport> {
    let m = match szego_integral(mu)? {
        SzegoIntegral::Finite(v) => v,
        SzegoIntegral::MinusInfinity => {
            return Err(Error::validation(
                "the lower bound requires a finite Szego integral",
            ))
        }
    };
    let ortho = recurrence(mu, n)?;
    let factors = ortho.widom_factors();
    let mut min_sq = f64::INFINITY;
    let mut argmin = 1usize;
    for (k, w) in factors.iter().enumerate().skip(1) {
        let sq = w.to_f64() * w.to_f64();
        if sq < min_sq {
            min_sq = sq;
            argmin = k;
        }
    }
    let m_f = m.to_f64();
    let e_m = m_f.exp();
    Ok(BoundReport {
        set: mu.base().set().to_json(),
        measure: format!(
            "density {:?}, atoms {}",
            mu.density(),
            mu.atoms().atoms.len()
        ),
        m: m_f,
        e_m,
        min_wn_sq: min_sq,
        argmin_n: argmin,
        n_range: n,
        verdict: min_sq >= e_m * (1.0 - BOUND_REL_TOL),
    })
}

/// Tail behaviour of a norm sequence against an asymptotic target.
#[derive(Clone, Debug, Serialize)]
pub struct LimitReport {
    pub target: f64,
    /// Values over the last quarter of the computed range.
    pub tail_values: Vec<f64>,
    pub tail_start_n: usize,
    pub final_value: f64,
    pub achieved_rel_err: f64,
}

fn tail_of(values: &[f64]) -> (usize, Vec<f64>) {
    let n = values.len() - 1;
    let start = (3 * n) / 4;
    (start.max(1), values[start.max(1)..].to_vec())
}

/// Szego's circle theorem probe: `||P_n||^2 -> exp(\int log w dtheta/2pi)`.
pub fn circle_szego_limit(w: &DensitySpec, n: usize) -> Result<LimitReport> {
    let base = equilibrium_measure::<f64>(&CompactSetSpec::circle(), 0)?;
    let mu = crate::measures::normalize(&base, w.clone(), crate::measures::AtomList::empty())?;
    let m = match szego_integral(&mu)? {
        SzegoIntegral::Finite(v) => v,
        SzegoIntegral::MinusInfinity => {
            return Err(Error::validation("circle limit needs log w integrable"))
        }
    };
    let target = m.exp();
    let ortho = recurrence(&mu, n)?;
    let norms_sq: Vec<f64> = ortho.log_norm_sq.iter().map(|l| l.exp()).collect();
    let (tail_start_n, tail_values) = tail_of(&norms_sq);
    let final_value = *norms_sq.last().expect("n >= 1");
    Ok(LimitReport {
        target,
        tail_values,
        tail_start_n,
        final_value,
        achieved_rel_err: ((final_value - target) / target).abs(),
    })
}

/// Widom's single-interval limit probe:
/// `W_n(mu)^2 -> 2 pi R(inf) Cap(K)` for `d mu = f dx` on one interval.
pub fn widom_interval_limit(
    interval: (f64, f64),
    f: &DensitySpec,
    n: usize,
) -> Result<LimitReport> {
    let set = interval_union_from_f64(&[interval])?;
    if set.num_bands() != 1 {
        return Err(Error::validation("the interval limit needs a single band"));
    }
    let eq = equilibrium_measure::<f64>(&set, 0)?;
    let log_r_inf = log_density_integral_mu_k(&eq, f)?;
    let r_inf = log_r_inf.exp();
    if !(r_inf > 0.0) {
        return Err(Error::validation("R(inf) must be positive"));
    }
    let target = 2.0 * std::f64::consts::PI * r_inf * eq.capacity();
    let ortho = recurrence_lebesgue(&eq, f, n)?;
    let w_sq: Vec<f64> = ortho
        .widom_log
        .iter()
        .map(|l| (l * 2.0).exp())
        .collect();
    let (tail_start_n, tail_values) = tail_of(&w_sq);
    let final_value = *w_sq.last().expect("n >= 1");
    Ok(LimitReport {
        target,
        tail_values,
        tail_start_n,
        final_value,
        achieved_rel_err: ((final_value - target) / target).abs(),
    })
}

/// Finite-sample proxies for the Widom conditions
/// (ii'): limsup W_n > 0 and (ii''): liminf W_n > 0.
///
/// True limits are not computable from finitely many terms; the proxies take
/// the max/min over a trailing window and flag against half the largest
/// observed value. The `heuristic` field marks this explicitly.
#[derive(Clone, Debug, Serialize)]
pub struct WidomConditionReport {
    pub limsup_proxy: f64,
    pub liminf_proxy: f64,
    pub satisfies_ii_prime: bool,
    pub satisfies_ii_doubleprime: bool,
    pub window: usize,
    pub heuristic: bool,
}

pub fn widom_condition_report(values: &[f64], window: usize) -> Result<WidomConditionReport> {
    if values.is_empty() {
        return Err(Error::validation("widom_condition_report needs values"));
    }
    if window == 0 || window > values.len() {
        return Err(Error::validation(format!(
            "window {window} must be in 1..={}",
            values.len()
        )));
    }
    let tail = &values[values.len() - window..];
    let limsup_proxy = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let liminf_proxy = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_all = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let threshold = 0.5 * max_all;
    Ok(WidomConditionReport {
        limsup_proxy,
        liminf_proxy,
        satisfies_ii_prime: limsup_proxy > threshold,
        satisfies_ii_doubleprime: liminf_proxy > threshold,
        window,
        heuristic: true,
    })
}

/// Which measure family the Cantor study tabulates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CantorMeasure {
    /// The equilibrium measure of each stage set.
    Equilibrium,
    /// Equal mass per band with uniform density: the stage-m approximation
    /// of the Cantor-Lebesgue (Hausdorff) measure.
    CantorLebesgue,
}

#[derive(Clone, Debug, Serialize)]
pub struct CantorRow {
    pub m: u32,
    pub bands: usize,
    pub capacity: f64,
    pub pw_sum: f64,
    pub critical_points: usize,
    pub min_widom: f64,
    pub widom: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CantorStudy {
    pub which: CantorMeasure,
    pub n_max: usize,
    pub precision_digits: u32,
    pub rows: Vec<CantorRow>,
}

/// Tabulate capacity, Parreau-Widom sum, and Widom factors over Cantor
/// construction stages 0..=m_max. No claim is made about the limiting set;
/// the table only reports the computed stages.
pub fn cantor_study(m_max: u32, n: usize, which: CantorMeasure) -> Result<CantorStudy> {
    if m_max > 8 {
        return Err(Error::validation("cantor_study supports m_max <= 8"));
    }
    if n > 40 {
        return Err(Error::validation("cantor_study supports n <= 40"));
    }
    let digits = crate::real::DEFAULT_EXTENDED_DIGITS;
    let mut rows = Vec::with_capacity(m_max as usize + 1);
    for m in 0..=m_max {
        let set = cantor_approximant(m)?;
        let eq = equilibrium_measure::<MpReal>(&set, digits)?;
        let cap = eq.capacity().to_f64();
        let cps = critical_points(&eq)?;
        let pw = pw_sum(&eq)?.to_f64();
        let ortho = match which {
            CantorMeasure::Equilibrium => {
                let mu = equilibrium_as_measure(&eq)?;
                recurrence(&mu, n)?
            }
            CantorMeasure::CantorLebesgue => recurrence_band_uniform(&eq, n)?,
        };
        let widom: Vec<f64> = ortho.widom_factors().iter().map(|w| w.to_f64()).collect();
        let min_widom = widom
            .iter()
            .skip(1)
            .cloned()
            .fold(f64::INFINITY, f64::min);
        rows.push(CantorRow {
            m,
            bands: set.num_bands(),
            capacity: cap,
            pw_sum: pw,
            critical_points: cps.len(),
            min_widom,
            widom,
        });
    }
    Ok(CantorStudy {
        which,
        n_max: n,
        precision_digits: digits,
        rows,
    })
}

/// Convenience: capacity of a set at binary64.
pub fn capacity_f64(set: &CompactSetSpec) -> Result<f64> {
    capacity::<f64>(set, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::AtomList;
    use crate::potential::equilibrium_measure;

    #[test]
    fn bound_holds_for_equilibrium_measure() {
        let set = interval_union_from_f64(&[(-1.0, 1.0)]).unwrap();
        let eq = equilibrium_measure::<f64>(&set, 0).unwrap();
        let mu = equilibrium_as_measure(&eq).unwrap();
        let report = verify_lower_bound(&mu, 20).unwrap();
        assert!(report.verdict, "report: {report:?}");
        assert!(report.m.abs() < 1e-11, "M = {}", report.m);
        // real sets: min W_n^2 = 2 here
        assert!((report.min_wn_sq - 2.0).abs() < 1e-9);
    }

    #[test]
    fn bound_holds_with_abs_x_density() {
        let set = interval_union_from_f64(&[(-1.0, 1.0)]).unwrap();
        let eq = equilibrium_measure::<f64>(&set, 0).unwrap();
        let density = DensitySpec {
            const_factor: 1.0,
            powers: vec![(0.0, 1.0)],
            exp_poly: vec![],
        };
        let mu = crate::measures::normalize(&eq, density, AtomList::empty()).unwrap();
        let report = verify_lower_bound(&mu, 30).unwrap();
        let expect_m = (std::f64::consts::PI / 4.0).ln();
        assert!(
            (report.m - expect_m).abs() < 1e-10,
            "M = {} vs {expect_m}",
            report.m
        );
        assert!(report.verdict);
    }

    #[test]
    fn circle_bound_is_sharp() {
        let base = equilibrium_measure::<f64>(&CompactSetSpec::circle(), 0).unwrap();
        let mu = equilibrium_as_measure(&base).unwrap();
        let report = verify_lower_bound(&mu, 16).unwrap();
        assert!(report.verdict);
        assert!((report.min_wn_sq - 1.0).abs() < 1e-12);
        assert!(report.m.abs() < 1e-13);
    }

    #[test]
    fn circle_limit_one_minus_cos() {
        let w = DensitySpec {
            const_factor: 0.5,
            powers: vec![(0.0, 2.0)],
            exp_poly: vec![],
        };
        let report = circle_szego_limit(&w, 64).unwrap();
        assert!((report.target - 0.5).abs() < 1e-10, "target = {}", report.target);
        // ||P_64||^2 = 66/130
        let expect = 66.0 / 130.0;
        assert!(
            (report.final_value - expect).abs() < 1e-9,
            "final = {} vs {expect}",
            report.final_value
        );
        assert!(report.achieved_rel_err < 0.02);
        // tail is nonincreasing
        for w in report.tail_values.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn interval_limit_chebyshev_weight_exact() {
        // f = 1/(pi sqrt(1-x^2)): R(inf) = 2/pi, target = 2, W_n^2 = 2 always
        let f = DensitySpec {
            const_factor: 1.0 / std::f64::consts::PI,
            powers: vec![(-1.0, -0.5), (1.0, -0.5)],
            exp_poly: vec![],
        };
        let report = widom_interval_limit((-1.0, 1.0), &f, 24).unwrap();
        assert!((report.target - 2.0).abs() < 1e-10, "target = {}", report.target);
        assert!(report.achieved_rel_err < 1e-9, "err = {}", report.achieved_rel_err);
    }

    #[test]
    fn interval_limit_legendre() {
        // f = 1/2: target = pi/2, approach from below like Wallis
        let f = DensitySpec::constant(0.5);
        let report = widom_interval_limit((-1.0, 1.0), &f, 40).unwrap();
        let expect = std::f64::consts::FRAC_PI_2;
        assert!((report.target - expect).abs() < 1e-10);
        assert!(report.achieved_rel_err < 0.05, "err = {}", report.achieved_rel_err);
        for w in report.tail_values.windows(2) {
            assert!(w[1] >= w[0], "tail should increase toward pi/2");
        }
    }

    #[test]
    fn condition_report_classifies() {
        let constant = vec![1.0; 30];
        let r = widom_condition_report(&constant, 8).unwrap();
        assert!(r.satisfies_ii_prime && r.satisfies_ii_doubleprime);
        assert!((r.limsup_proxy - 1.0).abs() < 1e-15);

        let decreasing: Vec<f64> = (1..=60).map(|n| 1.0 / n as f64).collect();
        let r = widom_condition_report(&decreasing, 15).unwrap();
        assert!(!r.satisfies_ii_prime && !r.satisfies_ii_doubleprime);
        assert!(r.heuristic);
    }

    #[test]
    fn cantor_study_stage_zero_is_interval() {
        // stage 0 is [0,1], affine image of [-1,1]: W_n = sqrt(2)
        let study = cantor_study(0, 8, CantorMeasure::Equilibrium).unwrap();
        let row = &study.rows[0];
        assert!((row.capacity - 0.25).abs() < 1e-12);
        assert_eq!(row.pw_sum, 0.0);
        for w in &row.widom[1..] {
            assert!((w * w - 2.0).abs() < 1e-9, "W^2 = {}", w * w);
        }
    }
}
