//! Compact sets: finite unions of real intervals and the unit circle.
//!
//! Interval endpoints are held as exact rationals so that Cantor-stage
//! approximants have exact ternary endpoints at every working precision and
//! set algebra (merging, nesting, total length) is exact.

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Hard limit on the Cantor construction stage (2^m bands).
pub const CANTOR_STAGE_LIMIT: u32 = 12;

/// A nondegenerate closed real interval with exact rational endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interval {
    lo: Rational64,
    hi: Rational64,
}

impl Interval {
    pub fn new(lo: Rational64, hi: Rational64) -> Result<Self> {
        if lo >= hi {
            return Err(Error::validation(format!(
                "degenerate interval [{lo}, {hi}]: requires lo < hi"
            )));
        }
        Ok(Interval { lo, hi })
    }

    /// Exact conversion from binary64 endpoints.
    pub fn from_f64(lo: f64, hi: f64) -> Result<Self> {
        let lo = ratio_from_f64(lo)?;
        let hi = ratio_from_f64(hi)?;
        Interval::new(lo, hi)
    }

    pub fn lo(&self) -> Rational64 {
        self.lo
    }

    pub fn hi(&self) -> Rational64 {
        self.hi
    }

    pub fn lo_f64(&self) -> f64 {
        ratio_to_f64(self.lo)
    }

    pub fn hi_f64(&self) -> f64 {
        ratio_to_f64(self.hi)
    }

    pub fn length(&self) -> Rational64 {
        self.hi - self.lo
    }

    pub fn contains(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn contains_f64(&self, x: f64) -> bool {
        self.lo_f64() <= x && x <= self.hi_f64()
    }

    /// Endpoints rendered at the precision of `template`.
    pub fn endpoints_r<R: Real>(&self, template: &R) -> (R, R) {
        (template.from_ratio(self.lo), template.from_ratio(self.hi))
    }
}

fn ratio_to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Exact dyadic decomposition of a finite f64 into a Rational64.
///
/// Rejects values whose exact form does not fit in i64 (magnitudes beyond
/// ~4e18 or finer than 2^-62); set coordinates at desk scale are far inside
/// this range.
pub fn ratio_from_f64(x: f64) -> Result<Rational64> {
    if !x.is_finite() {
        return Err(Error::validation(format!("non-finite coordinate {x}")));
    }
    if x == 0.0 {
        return Ok(Rational64::new(0, 1));
    }
    let bits = x.to_bits();
    let sign: i64 = if bits >> 63 == 1 { -1 } else { 1 };
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut mant, mut e) = if exp_bits == 0 {
        (frac, -1074i64)
    } else {
        (frac | (1u64 << 52), exp_bits - 1075)
    };
    while mant & 1 == 0 && e < 0 {
        mant >>= 1;
        e += 1;
    }
    if e >= 0 {
        let shifted = (mant as i128) << e;
        let num = i64::try_from(shifted)
            .map_err(|_| Error::validation(format!("coordinate {x} too large for exact form")))?;
        Ok(Rational64::new(sign * num, 1))
    } else {
        if -e > 62 {
            return Err(Error::validation(format!(
                "coordinate {x} too fine-grained for exact form (needs 2^{})",
                -e
            )));
        }
        let den = 1i64 << (-e);
        let num = i64::try_from(mant)
            .map_err(|_| Error::validation(format!("coordinate {x} too large for exact form")))?;
        Ok(Rational64::new(sign * num, den))
    }
}

/// The geometric set K: a sorted union of disjoint closed intervals, or the
/// unit circle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SetKind {
    IntervalUnion(Vec<Interval>),
    UnitCircle,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompactSetSpec {
    kind: SetKind,
}

impl CompactSetSpec {
    pub fn circle() -> Self {
        CompactSetSpec {
            kind: SetKind::UnitCircle,
        }
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn is_circle(&self) -> bool {
        matches!(self.kind, SetKind::UnitCircle)
    }

    /// Bands of an interval union, sorted with strictly positive gaps.
    pub fn bands(&self) -> &[Interval] {
        match &self.kind {
            SetKind::IntervalUnion(bands) => bands,
            SetKind::UnitCircle => &[],
        }
    }

    pub fn num_bands(&self) -> usize {
        self.bands().len()
    }

    /// Bounded complementary intervals between consecutive bands.
    pub fn gaps(&self) -> Vec<(Rational64, Rational64)> {
        let bands = self.bands();
        bands
            .windows(2)
            .map(|w| (w[0].hi(), w[1].lo()))
            .collect()
    }

    pub fn hull(&self) -> Option<(Rational64, Rational64)> {
        let bands = self.bands();
        match (bands.first(), bands.last()) {
            (Some(f), Some(l)) => Some((f.lo(), l.hi())),
            _ => None,
        }
    }

    pub fn diameter_f64(&self) -> f64 {
        match self.hull() {
            Some((lo, hi)) => ratio_to_f64(hi - lo),
            None => 2.0, // unit circle
        }
    }

    pub fn total_length(&self) -> Rational64 {
        self.bands().iter().map(|b| b.length()).sum()
    }

    pub fn contains_point(&self, x: f64) -> bool {
        self.bands().iter().any(|b| b.contains_f64(x))
    }

    /// Image under x -> alpha*x + beta, alpha != 0. Negative alpha reverses
    /// band order.
    pub fn affine_image(&self, alpha: Rational64, beta: Rational64) -> Result<CompactSetSpec> {
        if alpha == Rational64::new(0, 1) {
            return Err(Error::validation("affine map requires alpha != 0"));
        }
        match &self.kind {
            SetKind::UnitCircle => Err(Error::validation(
                "affine images are defined for interval unions only",
            )),
            SetKind::IntervalUnion(bands) => {
                let mut imgs = Vec::with_capacity(bands.len());
                for b in bands {
                    let u = alpha * b.lo() + beta;
                    let v = alpha * b.hi() + beta;
                    let (lo, hi) = if u < v { (u, v) } else { (v, u) };
                    imgs.push(Interval::new(lo, hi)?);
                }
                make_interval_union(imgs)
            }
        }
    }

    /// Validation is idempotent: re-validating a constructed set is a no-op.
    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            SetKind::UnitCircle => Ok(()),
            SetKind::IntervalUnion(bands) => {
                if bands.is_empty() {
                    return Err(Error::validation("interval union needs at least one band"));
                }
                for b in bands {
                    if b.lo() >= b.hi() {
                        return Err(Error::validation("degenerate band"));
                    }
                }
                for w in bands.windows(2) {
                    if w[0].hi() >= w[1].lo() {
                        return Err(Error::validation(
                            "bands must be sorted with strictly positive gaps",
                        ));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Build a validated interval union: sorts the input and merges overlapping
/// or touching intervals into single bands.
pub fn make_interval_union(intervals: Vec<Interval>) -> Result<CompactSetSpec> {
    if intervals.is_empty() {
        return Err(Error::validation("interval list must be nonempty"));
    }
    let mut sorted = intervals;
    sorted.sort_by(|a, b| a.lo().cmp(&b.lo()).then(a.hi().cmp(&b.hi())));
    let mut merged: Vec<Interval> = Vec::with_capacity(sorted.len());
    for iv in sorted {
        match merged.last_mut() {
            Some(last) if iv.lo() <= last.hi() => {
                // overlap or touch: extend the band
                if iv.hi() > last.hi() {
                    *last = Interval::new(last.lo(), iv.hi())?;
                }
            }
            _ => merged.push(iv),
        }
    }
    let spec = CompactSetSpec {
        kind: SetKind::IntervalUnion(merged),
    };
    spec.validate()?;
    Ok(spec)
}

/// Convenience constructor from f64 endpoint pairs.
pub fn interval_union_from_f64(pairs: &[(f64, f64)]) -> Result<CompactSetSpec> {
    let mut ivs = Vec::with_capacity(pairs.len());
    for &(lo, hi) in pairs {
        ivs.push(Interval::from_f64(lo, hi)?);
    }
    make_interval_union(ivs)
}

/// Stage-m approximant of the Cantor ternary set: 2^m bands of length 3^-m,
/// obtained by iterating x -> {x/3, x/3 + 2/3} on [0,1].
pub fn cantor_approximant(m: u32) -> Result<CompactSetSpec> {
    if m > CANTOR_STAGE_LIMIT {
        return Err(Error::validation(format!(
            "cantor stage {m} exceeds limit {CANTOR_STAGE_LIMIT} (band count 2^m)"
        )));
    }
    let third = Rational64::new(1, 3);
    let mut bands = vec![Interval::new(Rational64::new(0, 1), Rational64::new(1, 1))?];
    for _ in 0..m {
        let mut next = Vec::with_capacity(bands.len() * 2);
        for b in &bands {
            let len3 = b.length() * third;
            next.push(Interval::new(b.lo(), b.lo() + len3)?);
            next.push(Interval::new(b.hi() - len3, b.hi())?);
        }
        bands = next;
    }
    make_interval_union(bands)
}

// ---------------------------------------------------------------------------
// JSON wire format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SetFile {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    bands: Option<Vec<[f64; 2]>>,
}

impl CompactSetSpec {
    /// Parse the set specification file format:
    /// `{"kind":"intervals","bands":[[lo,hi],...]}` or `{"kind":"circle"}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: SetFile = serde_json::from_str(text)
            .map_err(|e| Error::validation(format!("bad set file: {e}")))?;
        match file.kind.as_str() {
            "circle" => Ok(CompactSetSpec::circle()),
            "intervals" => {
                let bands = file
                    .bands
                    .ok_or_else(|| Error::validation("intervals set needs a bands array"))?;
                let pairs: Vec<(f64, f64)> = bands.iter().map(|b| (b[0], b[1])).collect();
                interval_union_from_f64(&pairs)
            }
            other => Err(Error::validation(format!("unknown set kind {other:?}"))),
        }
    }

    pub fn to_json(&self) -> String {
        let file = match &self.kind {
            SetKind::UnitCircle => SetFile {
                kind: "circle".into(),
                bands: None,
            },
            SetKind::IntervalUnion(bands) => SetFile {
                kind: "intervals".into(),
                bands: Some(bands.iter().map(|b| [b.lo_f64(), b.hi_f64()]).collect()),
            },
        };
        serde_json::to_string(&file).expect("set serialization cannot fail")
    }
}
