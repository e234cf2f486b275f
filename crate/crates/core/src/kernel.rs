//! Interaction kernels: the finite linear functional of edge local times that
//! drives the walk, together with the classification data derived from it.
//!
//! Edge offsets relative to the walker are half-integers. They are stored
//! doubled ([`HalfOffset`]) so that every key is an odd integer and no
//! floating-point identity issues arise. An absolute edge `{x, x+1}` is
//! identified by its left endpoint `x`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Grid resolution for the Fourier positivity test.
pub const POSITIVITY_GRID: usize = 4096;
/// Minimum of the Fourier transform required for positive definiteness.
pub const POSITIVITY_MARGIN: f64 = 1e-9;
/// Relative tolerance under which a ratio is treated as sitting on a critical value.
const LADDER_TOLERANCE: f64 = 1e-12;

/// `cos(theta)` on the positivity grid over `[0, pi]`.
fn cos_grid() -> &'static [f64] {
    static GRID: std::sync::OnceLock<Vec<f64>> = std::sync::OnceLock::new();
    GRID.get_or_init(|| {
        let last = (POSITIVITY_GRID - 1) as f64;
        (0..POSITIVITY_GRID).map(|i| (PI * i as f64 / last).cos()).collect()
    })
}

fn horner(poly: &[f64], x: f64) -> f64 {
    poly.iter().rev().fold(0.0, |acc, p| acc * x + p)
}

/// Power-basis coefficients of the Chebyshev polynomial `T_m`.
fn chebyshev_power_basis(m: usize) -> Vec<f64> {
    let (mut prev, mut cur) = (vec![1.0], vec![0.0, 1.0]);
    if m == 0 {
        return prev;
    }
    for _ in 1..m {
        let mut next = vec![0.0; cur.len() + 1];
        for (i, v) in cur.iter().enumerate() {
            next[i + 1] += 2.0 * v;
        }
        for (i, v) in prev.iter().enumerate() {
            next[i] -= v;
        }
        prev = std::mem::replace(&mut cur, next);
    }
    cur
}

/// A half-integer edge offset `e`, stored as the odd integer `2e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfOffset(i32);

impl HalfOffset {
    pub fn from_doubled(doubled: i32) -> Result<Self> {
        if doubled.rem_euclid(2) != 1 {
            return Err(Error::InvalidOffset(format!("{doubled}/2")));
        }
        Ok(HalfOffset(doubled))
    }

    /// Offset `k + 1/2`.
    pub fn above(k: i32) -> Self {
        HalfOffset(2 * k + 1)
    }

    pub fn doubled(self) -> i32 {
        self.0
    }

    /// Integer `k` with `self = k + 1/2`.
    pub fn floor(self) -> i64 {
        i64::from((self.0 - 1) >> 1)
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    /// Left endpoint of the edge at this offset from site `position`.
    pub fn edge_from(self, position: i64) -> i64 {
        position + self.floor()
    }

    pub fn mirrored(self) -> Self {
        HalfOffset(-self.0)
    }
}

impl fmt::Display for HalfOffset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2", self.0)
    }
}

impl FromStr for HalfOffset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let doubled = if let Some(num) = t.strip_suffix("/2") {
            num.trim().parse::<i32>().ok()
        } else {
            t.parse::<f64>()
                .ok()
                .filter(|v| (v * 2.0).fract() == 0.0 && v.abs() < 1e9)
                .map(|v| (v * 2.0) as i32)
        };
        doubled
            .ok_or_else(|| Error::InvalidOffset(t.to_string()))
            .and_then(HalfOffset::from_doubled)
    }
}

impl serde::Serialize for HalfOffset {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// A height-invariant drift functional `D(l) = sum_e a_e l(e)`.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionKernel<T> {
    terms: Vec<(HalfOffset, T)>,
    symmetric: bool,
    family: Option<(T, T)>,
}

impl<T: Scalar> InteractionKernel<T> {
    /// The left-right symmetric family with weights `(a, b, -b, -a)` at
    /// offsets `(-3/2, -1/2, 1/2, 3/2)`.
    pub fn new_symmetric(a: T, b: T) -> Result<Self> {
        let terms = [
            (HalfOffset(-3), a.clone()),
            (HalfOffset(-1), b.clone()),
            (HalfOffset(1), -b.clone()),
            (HalfOffset(3), -a.clone()),
        ];
        let mut kernel = Self::new_general(terms)?;
        kernel.family = Some((a, b));
        Ok(kernel)
    }

    /// Builds a kernel from arbitrary weights. Repeated offsets are summed,
    /// zero weights are dropped, and the weights must sum to zero.
    pub fn new_general<I>(coeffs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (HalfOffset, T)>,
    {
        let mut map: BTreeMap<HalfOffset, T> = BTreeMap::new();
        for (offset, w) in coeffs {
            let entry = map.entry(offset).or_insert_with(T::zero);
            *entry = entry.clone() + w;
        }
        let terms: Vec<(HalfOffset, T)> = map.into_iter().filter(|(_, w)| !w.is_zero()).collect();
        if terms.is_empty() {
            return Err(Error::DegenerateKernel);
        }
        let sum = terms.iter().fold(T::zero(), |acc, (_, w)| acc + w.clone());
        let scale = terms.iter().fold(T::zero(), |acc, (_, w)| acc + w.abs());
        if !T::sums_to_zero(&sum, &scale) {
            return Err(Error::HeightInvariance { sum: sum.to_string() });
        }
        let weight_at = |o: HalfOffset| {
            terms
                .binary_search_by_key(&o, |(k, _)| *k)
                .map(|i| terms[i].1.clone())
                .unwrap_or_else(|_| T::zero())
        };
        let symmetric = terms
            .iter()
            .all(|(o, w)| weight_at(o.mirrored()) == -w.clone());
        Ok(InteractionKernel { terms, symmetric, family: None })
    }

    pub fn terms(&self) -> &[(HalfOffset, T)] {
        &self.terms
    }

    pub fn weight(&self, offset: HalfOffset) -> T {
        self.terms
            .iter()
            .find(|(o, _)| *o == offset)
            .map(|(_, w)| w.clone())
            .unwrap_or_else(T::zero)
    }

    /// Leftmost and rightmost offsets with nonzero weight.
    pub fn support(&self) -> (HalfOffset, HalfOffset) {
        (self.terms[0].0, self.terms[self.terms.len() - 1].0)
    }

    /// `a_{-e} = -a_e` for every offset.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// `(a, b)` when the kernel belongs to the symmetric two-parameter family.
    pub fn symmetric_ab(&self) -> Option<(T, T)> {
        if let Some(ab) = &self.family {
            return Some(ab.clone());
        }
        let (lo, hi) = self.support();
        if !self.symmetric || lo.doubled() < -3 || hi.doubled() > 3 {
            return None;
        }
        Some((self.weight(HalfOffset(-3)), self.weight(HalfOffset(-1))))
    }

    /// Evaluates `sum_e a_e value(e)`.
    pub fn evaluate<F>(&self, mut value: F) -> T
    where
        F: FnMut(HalfOffset) -> T,
    {
        self.terms
            .iter()
            .fold(T::zero(), |acc, (o, w)| acc + w.clone() * value(*o))
    }

    /// Coefficients of `P` in increasing degree: entry `i` is the weight at
    /// the `i`-th edge counted from the leftmost support edge. No
    /// normalization is applied.
    pub fn polynomial(&self) -> Vec<T> {
        let (lo, hi) = self.support();
        let len = ((hi.doubled() - lo.doubled()) / 2 + 1) as usize;
        let mut coeffs = vec![T::zero(); len];
        for (o, w) in &self.terms {
            coeffs[((o.doubled() - lo.doubled()) / 2) as usize] = w.clone();
        }
        coeffs
    }

    /// Horner evaluation of the kernel polynomial.
    pub fn eval_polynomial(&self, x: T) -> T {
        self.polynomial()
            .iter()
            .rev()
            .fold(T::zero(), |acc, c| acc * x.clone() + c.clone())
    }

    /// Coefficients `c(x) = sum_{e >= x+1/2} a_e` of the drift written in
    /// gradient variables, `D = sum_x c(x) eta(x)`. Zero entries are omitted.
    pub fn eta_coeffs(&self) -> BTreeMap<i64, T> {
        let (lo, hi) = self.support();
        let mut out = BTreeMap::new();
        let mut tail = T::zero();
        // Walk from the right so that `tail` accumulates sum_{e >= x+1/2}.
        for x in (lo.floor() + 1..=hi.floor()).rev() {
            tail = tail + self.weight(HalfOffset::above(x as i32));
            if !tail.is_zero() {
                out.insert(x, tail.clone());
            }
        }
        out
    }

    /// The Gibbs precision sequence `alpha = -c`.
    pub fn precision(&self) -> BTreeMap<i64, T> {
        self.eta_coeffs().into_iter().map(|(x, c)| (x, -c)).collect()
    }

    /// Power-basis coefficients of the precision symbol
    /// `sum_x alpha(x) cos(theta x)` as a polynomial in `cos(theta)`.
    fn symbol_polynomial(&self) -> Result<Vec<f64>> {
        if !self.symmetric {
            return Err(Error::NotApplicable(
                "positive definiteness is only defined for left-right symmetric kernels".into(),
            ));
        }
        let mut poly: Vec<f64> = Vec::new();
        for (x, a) in self.precision() {
            let basis = chebyshev_power_basis(x.unsigned_abs() as usize);
            if poly.len() < basis.len() {
                poly.resize(basis.len(), 0.0);
            }
            let a = a.to_f64_lossy();
            for (p, t) in poly.iter_mut().zip(&basis) {
                *p += a * t;
            }
        }
        Ok(poly)
    }

    /// Minimum over the positivity grid of `sum_x alpha(x) cos(theta x)`.
    pub fn precision_symbol_min(&self) -> Result<f64> {
        let poly = self.symbol_polynomial()?;
        Ok(cos_grid().iter().map(|&c| horner(&poly, c)).fold(f64::INFINITY, f64::min))
    }

    /// Whether the symbol exceeds [`POSITIVITY_MARGIN`] on the whole grid.
    pub fn is_positive_definite(&self) -> Result<bool> {
        let poly = self.symbol_polynomial()?;
        Ok(cos_grid().iter().all(|&c| horner(&poly, c) > POSITIVITY_MARGIN))
    }

    pub fn classify(&self) -> KernelClassification<T> {
        let predicted_stuck_sites = self
            .symmetric_ab()
            .and_then(|(a, b)| predict_stuck_size(a.to_f64_lossy(), b.to_f64_lossy()));
        KernelClassification {
            polynomial: self.polynomial(),
            is_symmetric: self.symmetric,
            eta_coeffs: self.eta_coeffs(),
            positive_definite: self.is_positive_definite().ok(),
            predicted_stuck_sites,
        }
    }

    /// Same kernel with `f64` weights.
    pub fn to_f64(&self) -> InteractionKernel<f64> {
        InteractionKernel {
            terms: self.terms.iter().map(|(o, w)| (*o, w.to_f64_lossy())).collect(),
            symmetric: self.symmetric,
            family: self
                .family
                .as_ref()
                .map(|(a, b)| (a.to_f64_lossy(), b.to_f64_lossy())),
        }
    }

    /// Literal accepted by [`FromStr`]: `"a,b"` for the symmetric family,
    /// otherwise `"e:w;e:w;..."`.
    pub fn literal(&self) -> String {
        if let Some((a, b)) = &self.family {
            return format!("{a},{b}");
        }
        self.terms
            .iter()
            .map(|(o, w)| format!("{o}:{w}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl<T: Scalar> fmt::Display for InteractionKernel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.literal())
    }
}

impl<T: Scalar> FromStr for InteractionKernel<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let literal = s.trim();
        let bad = |reason: &str| Error::KernelLiteral {
            literal: literal.to_string(),
            reason: reason.to_string(),
        };
        let weight = |w: &str| T::parse_weight(w).ok_or_else(|| bad(&format!("bad weight {w:?}")));
        if literal.contains(':') {
            let mut terms = Vec::new();
            for part in literal.split(';').filter(|p| !p.trim().is_empty()) {
                let (o, w) = part.split_once(':').ok_or_else(|| bad("expected e:w"))?;
                terms.push((o.parse::<HalfOffset>()?, weight(w)?));
            }
            Self::new_general(terms)
        } else if let Some((a, b)) = literal.split_once(',') {
            Self::new_symmetric(weight(a)?, weight(b)?)
        } else {
            Err(bad("expected \"a,b\" or \"e:w;e:w;...\""))
        }
    }
}

/// Everything derived from a kernel that the rest of the toolkit reports.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelClassification<T> {
    pub polynomial: Vec<T>,
    pub is_symmetric: bool,
    pub eta_coeffs: BTreeMap<i64, T>,
    /// `None` for asymmetric kernels, where the notion does not apply.
    pub positive_definite: Option<bool>,
    pub predicted_stuck_sites: Option<u64>,
}

/// `A_k = 1 + 2 cos(2 pi / (k + 2))`.
pub fn critical_ratio(k: u64) -> Result<f64> {
    if k < 1 {
        return Err(Error::Domain("critical ratios are indexed by k >= 1".into()));
    }
    Ok(1.0 + 2.0 * (2.0 * PI / (k as f64 + 2.0)).cos())
}

/// Size `k + 2` of the interval the walk can remain stuck on, when
/// `a < 0 < b` and `b/|a|` lies strictly between `A_k` and `A_{k+1}`.
/// Returns `None` outside those hypotheses, on a critical value, and for
/// ratios `>= 3`.
pub fn predict_stuck_size(a: f64, b: f64) -> Option<u64> {
    if !(a < 0.0 && b > 0.0) {
        return None;
    }
    let ratio = b / -a;
    if !ratio.is_finite() || ratio >= 3.0 {
        return None;
    }
    // Continuous inverse of k -> A_k, then fix up rounding on either side.
    let guess = 2.0 * PI / ((ratio - 1.0) / 2.0).acos() - 2.0;
    if !guess.is_finite() || guess > 1e15 {
        return None;
    }
    let mut k = (guess.floor() as u64).max(1);
    let a_k = |k: u64| critical_ratio(k).expect("k >= 1");
    while k > 1 && a_k(k) >= ratio {
        k -= 1;
    }
    while a_k(k + 1) <= ratio {
        k += 1;
    }
    let near = |r: f64| (ratio - r).abs() <= LADDER_TOLERANCE * 3.0;
    if near(a_k(k)) || near(a_k(k + 1)) {
        return None;
    }
    Some(k + 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    fn off(s: &str) -> HalfOffset {
        s.parse().unwrap()
    }

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn offsets_roundtrip_and_edges() {
        assert_eq!(off("-3/2").doubled(), -3);
        assert_eq!(off("0.5").doubled(), 1);
        assert!("1/1".parse::<HalfOffset>().is_err());
        assert!("2/2".parse::<HalfOffset>().is_err());
        assert_eq!(off("-3/2").edge_from(0), -2);
        assert_eq!(off("-1/2").edge_from(5), 4);
        assert_eq!(off("1/2").edge_from(5), 5);
        assert_eq!(off("3/2").to_string(), "3/2");
    }

    #[test]
    fn symmetric_family_examples() {
        let tsrw = InteractionKernel::new_symmetric(0.0, 1.0).unwrap();
        assert_eq!(tsrw.terms(), &[(off("-1/2"), 1.0), (off("1/2"), -1.0)]);
        assert!(tsrw.is_symmetric());

        let k = InteractionKernel::new_symmetric(-1.0, 3.0).unwrap();
        assert_eq!(
            k.terms(),
            &[(off("-3/2"), -1.0), (off("-1/2"), 3.0), (off("1/2"), -3.0), (off("3/2"), 1.0)]
        );

        assert!(matches!(
            InteractionKernel::new_symmetric(0.0, 0.0),
            Err(Error::DegenerateKernel)
        ));
    }

    #[test]
    fn general_kernel_examples() {
        let half_laplacian = InteractionKernel::new_general([
            (off("-3/2"), -0.5),
            (off("-1/2"), 0.5),
            (off("1/2"), 0.5),
            (off("3/2"), -0.5),
        ])
        .unwrap();
        assert!(!half_laplacian.is_symmetric());

        let sharp =
            InteractionKernel::new_general([(off("-3/2"), -2.0), (off("-1/2"), 1.0), (off("1/2"), 1.0)])
                .unwrap();
        assert!(!sharp.is_symmetric());

        let err = InteractionKernel::new_general([(off("-1/2"), 1.0)]).unwrap_err();
        assert!(matches!(err, Error::HeightInvariance { .. }));
    }

    #[test]
    fn exact_sum_check_for_rationals() {
        // 1/3 - 1/3 is exact in rationals.
        let k = InteractionKernel::new_general([(off("-1/2"), r(1, 3)), (off("1/2"), r(-1, 3))]);
        assert!(k.is_ok());
        let k = InteractionKernel::new_general([(off("-1/2"), r(1, 3)), (off("1/2"), r(-333_333, 1_000_000))]);
        assert!(matches!(k, Err(Error::HeightInvariance { .. })));
    }

    #[test]
    fn polynomial_examples() {
        let tsrw = InteractionKernel::new_symmetric(0i64.into(), r(1, 1)).unwrap();
        assert_eq!(tsrw.polynomial(), vec![r(1, 1), r(-1, 1)]);

        let cubic = InteractionKernel::new_symmetric(r(-1, 1), r(3, 1)).unwrap();
        assert_eq!(cubic.polynomial(), vec![r(-1, 1), r(3, 1), r(-3, 1), r(1, 1)]);
        // -(x - 1)^3 evaluated at 2 is -1.
        assert_eq!(cubic.eval_polynomial(r(2, 1)), r(1, 1));

        let half_laplacian: InteractionKernel<Rational64> =
            "-3/2:-1/2;-1/2:1/2;1/2:1/2;3/2:-1/2".parse().unwrap();
        assert_eq!(
            half_laplacian.polynomial(),
            vec![r(-1, 2), r(1, 2), r(1, 2), r(-1, 2)]
        );
        assert_eq!(half_laplacian.eval_polynomial(r(1, 1)), r(0, 1));
    }

    #[test]
    fn polynomial_keeps_interior_zeros() {
        let k: InteractionKernel<Rational64> = "-3/2:1;3/2:-1".parse().unwrap();
        assert_eq!(k.polynomial(), vec![r(1, 1), r(0, 1), r(0, 1), r(-1, 1)]);
    }

    #[test]
    fn eta_coefficient_examples() {
        let tsrw = InteractionKernel::new_symmetric(0.0, 1.0).unwrap();
        assert_eq!(tsrw.eta_coeffs(), BTreeMap::from([(0, -1.0)]));

        let k = InteractionKernel::new_symmetric(r(2, 1), r(5, 1)).unwrap();
        assert_eq!(
            k.eta_coeffs(),
            BTreeMap::from([(-1, r(-2, 1)), (0, r(-7, 1)), (1, r(-2, 1))])
        );
    }

    #[test]
    fn positive_definiteness_examples() {
        let pd = |a: f64, b: f64| InteractionKernel::new_symmetric(a, b).unwrap().is_positive_definite();
        assert!(pd(0.0, 1.0).unwrap());
        assert!(!pd(-1.0, 3.0).unwrap());
        assert!(!pd(1.0, 0.0).unwrap());
        assert!(!pd(-1.0, 2.0).unwrap()); // ratio 2 <= 3
        assert!(pd(-0.5, 2.0).unwrap());

        let asym: InteractionKernel<f64> = "-3/2:-2;-1/2:1;1/2:1".parse().unwrap();
        assert!(matches!(asym.is_positive_definite(), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn critical_ratio_examples() {
        assert!(critical_ratio(1).unwrap().abs() < 1e-15);
        assert!((critical_ratio(2).unwrap() - 1.0).abs() < 1e-15);
        assert!((critical_ratio(4).unwrap() - 2.0).abs() < 1e-15);
        assert!((critical_ratio(10).unwrap() - (1.0 + 3f64.sqrt())).abs() < 1e-15);
        assert!((critical_ratio(10).unwrap() - 2.7320508).abs() < 1e-7);
        assert!(critical_ratio(0).is_err());
        let mut prev = critical_ratio(1).unwrap();
        for k in 2..2000 {
            let next = critical_ratio(k).unwrap();
            assert!(next > prev && next < 3.0);
            prev = next;
        }
        assert!(3.0 - critical_ratio(1_000_000).unwrap() < 1e-10);
    }

    #[test]
    fn stuck_prediction_examples() {
        assert_eq!(predict_stuck_size(-1.1, 3.0), Some(11));
        assert_eq!(predict_stuck_size(-1.0, 3.0), None);
        assert_eq!(predict_stuck_size(1.0, 1.0), None);
        assert_eq!(predict_stuck_size(-1.0, 1.0), None); // A_2 exactly
        assert_eq!(predict_stuck_size(-1.0, 2.0), None); // A_4 exactly
        assert_eq!(predict_stuck_size(-1.0, 0.5), Some(3));
        assert_eq!(predict_stuck_size(-1.0, 1.5), Some(4));
        let sites = predict_stuck_size(-1.0, 2.999_999).unwrap();
        let k = sites - 2;
        assert!(critical_ratio(k).unwrap() < 2.999_999 && 2.999_999 < critical_ratio(k + 1).unwrap());
    }

    #[test]
    fn literals_roundtrip() {
        let k: InteractionKernel<f64> = "-1.1,3".parse().unwrap();
        assert_eq!(k.symmetric_ab(), Some((-1.1, 3.0)));
        assert_eq!(k.literal(), "-1.1,3");
        let k2: InteractionKernel<f64> = "-3/2:-2;-1/2:1;1/2:1".parse().unwrap();
        assert_eq!(k2.literal(), "-3/2:-2;-1/2:1;1/2:1");
        assert_eq!(k2.literal().parse::<InteractionKernel<f64>>().unwrap(), k2);
        assert!("-1/2:1".parse::<InteractionKernel<f64>>().is_err());
        assert!("garbage".parse::<InteractionKernel<f64>>().is_err());
        let kr: InteractionKernel<Rational64> = "-1.1,3".parse().unwrap();
        assert_eq!(kr.symmetric_ab(), Some((r(-11, 10), r(3, 1))));
    }

    #[test]
    fn general_symmetric_kernel_exposes_family() {
        let k: InteractionKernel<f64> = "-1/2:1;1/2:-1".parse().unwrap();
        assert_eq!(k.symmetric_ab(), Some((0.0, 1.0)));
        assert_eq!(k.classify().positive_definite, Some(true));
        let k: InteractionKernel<f64> = "-1.1,3".parse().unwrap();
        assert_eq!(k.classify().predicted_stuck_sites, Some(11));
    }
}
