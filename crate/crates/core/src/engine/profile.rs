use std::collections::BTreeMap;

/// Real-valued initial profile `L0 = baseline + values`, where `values` is a
/// finite sparse correction keyed by edge left endpoint.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InitialProfile {
    pub baseline: f64,
    pub values: BTreeMap<i64, f64>,
}

impl InitialProfile {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_values<I: IntoIterator<Item = (i64, f64)>>(values: I) -> Self {
        InitialProfile { baseline: 0.0, values: values.into_iter().collect() }
    }

    pub fn at(&self, edge: i64) -> f64 {
        self.baseline + self.values.get(&edge).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.baseline == 0.0 && self.values.values().all(|v| *v == 0.0)
    }

    /// Same profile with every edge raised by `height`.
    pub fn shifted(&self, height: f64) -> Self {
        InitialProfile { baseline: self.baseline + height, values: self.values.clone() }
    }

    /// Reflection `e -> -e` through site `center`.
    pub fn mirrored(&self, center: i64) -> Self {
        InitialProfile {
            baseline: self.baseline,
            values: self.values.iter().map(|(e, v)| (2 * center - e - 1, *v)).collect(),
        }
    }
}

/// Edge local times: integer crossing counts on a dense window that grows by
/// doubling, plus the initial profile cached alongside.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTimeProfile {
    origin: i64,
    counts: Vec<u64>,
    initial_dense: Vec<f64>,
    initial: InitialProfile,
}

impl LocalTimeProfile {
    pub fn new(initial: InitialProfile) -> Self {
        let mut profile = LocalTimeProfile { origin: 0, counts: Vec::new(), initial_dense: Vec::new(), initial };
        profile.cover(-8, 8);
        profile
    }

    pub fn initial(&self) -> &InitialProfile {
        &self.initial
    }

    /// Crossing count of edge `{edge, edge + 1}`.
    pub fn count(&self, edge: i64) -> u64 {
        self.index(edge).map(|i| self.counts[i]).unwrap_or(0)
    }

    /// `L(edge)`: crossings plus initial value.
    pub fn value(&self, edge: i64) -> f64 {
        match self.index(edge) {
            Some(i) => self.counts[i] as f64 + self.initial_dense[i],
            None => self.initial.at(edge),
        }
    }

    /// Sum of all crossing counts; equals the number of steps taken.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Smallest and largest edges with a nonzero count.
    pub fn visited_edges(&self) -> Option<(i64, i64)> {
        let first = self.counts.iter().position(|c| *c > 0)?;
        let last = self.counts.iter().rposition(|c| *c > 0)?;
        Some((self.origin + first as i64, self.origin + last as i64))
    }

    /// `(edge, count, initial value)` over visited edges and the support of
    /// the sparse initial profile, in increasing edge order.
    pub fn rows(&self) -> Vec<(i64, u64, f64)> {
        let mut edges: Vec<i64> = self.initial.values.keys().copied().collect();
        if let Some((lo, hi)) = self.visited_edges() {
            edges.extend(lo..=hi);
        }
        edges.sort_unstable();
        edges.dedup();
        edges.into_iter().map(|e| (e, self.count(e), self.initial.at(e))).collect()
    }

    #[inline]
    fn index(&self, edge: i64) -> Option<usize> {
        let i = edge.checked_sub(self.origin)?;
        (i >= 0 && (i as usize) < self.counts.len()).then_some(i as usize)
    }

    /// Grows the dense window so that it covers `[lo, hi]`.
    pub(crate) fn cover(&mut self, lo: i64, hi: i64) {
        let len = self.counts.len() as i64;
        if !self.counts.is_empty() && lo >= self.origin && hi < self.origin + len {
            return;
        }
        let (cur_lo, cur_hi) = if self.counts.is_empty() { (lo, hi) } else { (self.origin, self.origin + len - 1) };
        let width = (cur_hi - cur_lo + 1).max(16);
        let new_lo = if lo < cur_lo { lo.min(cur_lo - width) } else { cur_lo };
        let new_hi = if hi > cur_hi { hi.max(cur_hi + width) } else { cur_hi };
        let new_len = (new_hi - new_lo + 1) as usize;
        let mut counts = vec![0u64; new_len];
        let shift = (self.origin - new_lo) as usize;
        if !self.counts.is_empty() {
            counts[shift..shift + self.counts.len()].copy_from_slice(&self.counts);
        }
        let initial_dense = (new_lo..=new_hi).map(|e| self.initial.at(e)).collect();
        self.origin = new_lo;
        self.counts = counts;
        self.initial_dense = initial_dense;
    }

    /// Dense read; the caller guarantees coverage.
    #[inline(always)]
    pub(crate) fn value_unchecked(&self, edge: i64) -> f64 {
        let i = (edge - self.origin) as usize;
        self.counts[i] as f64 + self.initial_dense[i]
    }

    #[inline(always)]
    pub(crate) fn increment(&mut self, edge: i64) {
        let i = (edge - self.origin) as usize;
        self.counts[i] += 1;
    }

    /// Adds one crossing, growing the window if needed.
    pub(crate) fn record_crossing(&mut self, edge: i64) {
        self.cover(edge, edge);
        self.increment(edge);
    }

    pub(crate) fn covers(&self, lo: i64, hi: i64) -> bool {
        lo >= self.origin && hi < self.origin + self.counts.len() as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_preserves_counts() {
        let mut p = LocalTimeProfile::new(InitialProfile::from_values([(-1, 1.0), (-2, 1.0)]));
        p.increment(3);
        p.increment(3);
        p.increment(-4);
        p.cover(-1000, 5000);
        assert_eq!(p.count(3), 2);
        assert_eq!(p.count(-4), 1);
        assert_eq!(p.total(), 3);
        assert_eq!(p.value(-1), 1.0);
        assert_eq!(p.value(-2), 1.0);
        assert_eq!(p.value(10_000), 0.0);
        assert_eq!(p.visited_edges(), Some((-4, 3)));
        let rows = p.rows();
        assert_eq!(rows.first(), Some(&(-4, 1, 0.0)));
        assert_eq!(rows.last(), Some(&(3, 2, 0.0)));
        assert_eq!(rows.len(), 8);
    }

    #[test]
    fn mirrored_initial_profile_reflects_edges() {
        let p = InitialProfile::from_values([(-1, 1.0), (-2, 3.0)]);
        let m = p.mirrored(0);
        assert_eq!(m.at(0), 1.0);
        assert_eq!(m.at(1), 3.0);
        assert_eq!(m.mirrored(0), p);
    }
}
