//! Size histograms, Jensen-Shannon divergence and quantile (ICDF) mapping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default histogram resolution for dataset-scale size distributions.
pub const DEFAULT_BINS: usize = 50;

/// Normalized histogram over a scalar size statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeDistribution {
    edges: Vec<f64>,
    masses: Vec<f64>,
}

impl SizeDistribution {
    pub fn new(edges: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() || edges.len() != masses.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "{} edges cannot bound {} bins",
                edges.len(),
                masses.len()
            )));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) || edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidArgument("bin edges must be strictly increasing".into()));
        }
        if masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidArgument("bin masses must be nonnegative".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("bin masses sum to {total}, expected 1")));
        }
        Ok(Self { edges, masses })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn bins(&self) -> usize {
        self.masses.len()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.edges[0], self.edges[self.edges.len() - 1])
    }

    /// Same edges, new masses.
    pub fn with_masses(&self, masses: Vec<f64>) -> Result<Self> {
        Self::new(self.edges.clone(), masses)
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        0.5 * (self.edges[i] + self.edges[i + 1])
    }

    /// Mean computed from bin centers.
    pub fn mean(&self) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .map(|(i, m)| m * self.bin_center(i))
            .sum()
    }

    /// Bin holding `v`. Interior edges belong to the bin on their right and
    /// values outside the range are clamped to the end bins.
    pub fn bin_index(&self, v: f64) -> usize {
        bin_index(&self.edges, v)
    }

    fn same_edges(&self, other: &Self) -> bool {
        self.edges.len() == other.edges.len()
            && self
                .edges
                .iter()
                .zip(&other.edges)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0))
    }
}

fn bin_index(edges: &[f64], v: f64) -> usize {
    let k = edges.len() - 1;
    let lo = edges[0];
    let width = (edges[k] - lo) / k as f64;
    let guess = ((v - lo) / width).floor();
    let mut i = if guess.is_nan() || guess < 0.0 {
        0
    } else {
        (guess as usize).min(k - 1)
    };
    while i + 1 < k && v >= edges[i + 1] {
        i += 1;
    }
    while i > 0 && v < edges[i] {
        i -= 1;
    }
    i
}

/// Equal-width histogram of `values` over `range` (or their own span).
pub fn build_histogram(values: &[f64], k: usize, range: Option<(f64, f64)>) -> Result<SizeDistribution> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot histogram an empty sample".into()));
    }
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {k}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("sample contains non-finite values".into()));
    }
    let (lo, hi) = match range {
        Some((lo, hi)) => {
            if !(lo < hi) {
                return Err(Error::InvalidArgument(format!("empty range [{lo}, {hi}]")));
            }
            (lo, hi)
        }
        None => {
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if lo < hi {
                (lo, hi)
            } else {
                // a single distinct value: give it a unit-wide window
                (lo - 0.5, hi + 0.5)
            }
        }
    };
    let width = (hi - lo) / k as f64;
    let mut edges: Vec<f64> = (0..=k).map(|i| lo + width * i as f64).collect();
    edges[k] = hi;
    let mut counts = vec![0usize; k];
    for &v in values {
        counts[bin_index(&edges, v)] += 1;
    }
    let n = values.len() as f64;
    let masses = counts.into_iter().map(|c| c as f64 / n).collect();
    SizeDistribution::new(edges, masses)
}

/// Jensen-Shannon divergence in bits, so the result lies in `[0, 1]`.
pub fn js_divergence(p: &SizeDistribution, q: &SizeDistribution) -> Result<f64> {
    if !p.same_edges(q) {
        return Err(Error::InvalidArgument(
            "distributions must share identical bin edges".into(),
        ));
    }
    Ok(js_masses(p.masses(), q.masses()))
}

/// Jensen-Shannon divergence (base 2) of two mass vectors of equal length.
pub fn js_masses(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let js: f64 = p.iter().zip(q).map(|(&a, &b)| js_term(a, b)).sum();
    js.clamp(0.0, 1.0)
}

/// Per-bin contribution `½·a·log2(2a/(a+b)) + ½·b·log2(2b/(a+b))`.
pub(crate) fn js_term(a: f64, b: f64) -> f64 {
    let m = a + b;
    if m <= 0.0 {
        return 0.0;
    }
    let part = |x: f64| if x > 0.0 { x * (2.0 * x / m).log2() } else { 0.0 };
    0.5 * (part(a) + part(b))
}

/// Empirical cumulative distribution of a finite sample.
///
/// Stores the distinct sorted values with the fraction of the sample at or
/// below each one. Evaluation uses mid-rank plotting positions joined
/// linearly, which makes [`EmpiricalCdf::cdf`] and
/// [`EmpiricalCdf::quantile`] exact inverses on the sample's span.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    values: Vec<f64>,
    cumulative: Vec<f64>,
    positions: Vec<f64>,
    n: usize,
}

impl EmpiricalCdf {
    pub fn new(sample: &[f64]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::InvalidArgument("empty sample".into()));
        }
        if sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("sample contains non-finite values".into()));
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mut values = Vec::new();
        let mut cumulative = Vec::new();
        let mut positions = Vec::new();
        let mut start = 0;
        while start < n {
            let v = sorted[start];
            let mut end = start;
            while end < n && sorted[end] == v {
                end += 1;
            }
            values.push(v);
            cumulative.push(end as f64 / n as f64);
            positions.push(0.5 * (start + end) as f64 / n as f64);
            start = end;
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(Self {
            values,
            cumulative,
            positions,
            n,
        })
    }

    /// Distinct sample values, ascending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Fraction of the sample at or below each distinct value.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    /// True when the sample holds a single distinct value.
    pub fn is_degenerate(&self) -> bool {
        self.values.len() == 1
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Mid-rank CDF, clamped to the sample span.
    pub fn cdf(&self, v: f64) -> f64 {
        let xs = &self.values;
        let ps = &self.positions;
        if v <= xs[0] {
            return ps[0];
        }
        let last = xs.len() - 1;
        if v >= xs[last] {
            return ps[last];
        }
        let j = xs.partition_point(|x| *x <= v) - 1;
        let t = (v - xs[j]) / (xs[j + 1] - xs[j]);
        ps[j] + t * (ps[j + 1] - ps[j])
    }

    /// Inverse of [`EmpiricalCdf::cdf`]; probabilities outside the
    /// plotting-position span map to the sample extremes.
    pub fn quantile(&self, p: f64) -> f64 {
        let xs = &self.values;
        let ps = &self.positions;
        if p <= ps[0] {
            return xs[0];
        }
        let last = xs.len() - 1;
        if p >= ps[last] {
            return xs[last];
        }
        let j = ps.partition_point(|x| *x <= p) - 1;
        let t = (p - ps[j]) / (ps[j + 1] - ps[j]);
        xs[j] + t * (xs[j + 1] - xs[j])
    }
}

/// Target of a quantile mapping.
#[derive(Debug, Clone, Copy)]
pub enum QuantileTarget<'a> {
    Empirical(&'a EmpiricalCdf),
    /// Continuous uniform distribution on `[lo, hi]`.
    Uniform {
        lo: f64,
        hi: f64,
    },
}

impl QuantileTarget<'_> {
    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            QuantileTarget::Empirical(cdf) => cdf.quantile(p),
            QuantileTarget::Uniform { lo, hi } => lo + p * (hi - lo),
        }
    }

    fn is_degenerate(&self) -> bool {
        match self {
            QuantileTarget::Empirical(cdf) => cdf.is_degenerate(),
            QuantileTarget::Uniform { lo, hi } => lo == hi,
        }
    }
}

/// Transports `value` from the source distribution to the target by
/// matching quantiles: `G⁻¹(F(value))`.
///
/// A degenerate source has every value at mid-rank ½, so everything lands on
/// the target median.
pub fn icdf_map(value: f64, source: &EmpiricalCdf, target: QuantileTarget<'_>) -> f64 {
    target.quantile(source.cdf(value))
}

/// Maps a whole sample, warning once when the source is degenerate.
pub fn icdf_map_all(values: &[f64], source: &EmpiricalCdf, target: QuantileTarget<'_>) -> Vec<f64> {
    if source.is_degenerate() && !target.is_degenerate() {
        log::warn!(
            "degenerate source distribution (single value {}); mapping to target median",
            source.min()
        );
    }
    values.iter().map(|&v| icdf_map(v, source, target)).collect()
}

/// Draws `n` values: a bin by mass, then uniformly inside that bin.
pub fn sample_from_histogram(dist: &SizeDistribution, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with_rng(dist, n, &mut rng)
}

pub fn sample_with_rng<R: Rng + ?Sized>(dist: &SizeDistribution, n: usize, rng: &mut R) -> Vec<f64> {
    let mut cum = Vec::with_capacity(dist.bins());
    let mut acc = 0.0;
    for m in dist.masses() {
        acc += m;
        cum.push(acc);
    }
    let total = acc;
    let last_nonempty = dist.masses().iter().rposition(|m| *m > 0.0).unwrap_or(0);
    (0..n)
        .map(|_| {
            let u = rng.gen::<f64>() * total;
            let i = cum.partition_point(|c| *c <= u).min(last_nonempty);
            let (a, b) = (dist.edges()[i], dist.edges()[i + 1]);
            a + rng.gen::<f64>() * (b - a)
        })
        .collect()
}

/// Arithmetic mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bin(a: f64, b: f64) -> SizeDistribution {
        SizeDistribution::new(vec![0.0, 1.0, 2.0], vec![a, b]).unwrap()
    }

    #[test]
    fn interior_edge_goes_right() {
        let h = build_histogram(&[1.0, 1.0, 1.0, 1.0], 2, Some((0.0, 2.0))).unwrap();
        assert_eq!(h.masses(), &[0.0, 1.0]);
    }

    #[test]
    fn upper_bound_lands_in_last_bin() {
        let h = build_histogram(&[0.0, 2.0], 4, Some((0.0, 2.0))).unwrap();
        assert_eq!(h.masses(), &[0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn split_sample() {
        let h = build_histogram(&[0.5, 1.5], 2, Some((0.0, 2.0))).unwrap();
        assert_eq!(h.masses(), &[0.5, 0.5]);
    }

    #[test]
    fn identical_values_fill_one_bin() {
        for k in [2, 7, 50] {
            let h = build_histogram(&[3.3; 11], k, None).unwrap();
            assert_eq!(h.masses().iter().filter(|m| **m == 1.0).count(), 1);
        }
    }

    #[test]
    fn histogram_argument_errors() {
        assert!(build_histogram(&[], 4, None).is_err());
        assert!(build_histogram(&[1.0], 1, None).is_err());
        assert!(build_histogram(&[1.0], 3, Some((2.0, 2.0))).is_err());
        assert!(build_histogram(&[1.0], 3, Some((3.0, 2.0))).is_err());
    }

    #[test]
    fn js_reference_values() {
        let p = two_bin(0.5, 0.5);
        assert_eq!(js_divergence(&p, &p).unwrap(), 0.0);
        assert!((js_divergence(&two_bin(1.0, 0.0), &two_bin(0.0, 1.0)).unwrap() - 1.0).abs() < 1e-15);
        let q = two_bin(0.75, 0.25);
        assert!((js_divergence(&p, &q).unwrap() - 0.048794).abs() < 1e-5);
    }

    #[test]
    fn js_rejects_mismatched_edges() {
        let a = two_bin(0.5, 0.5);
        let b = SizeDistribution::new(vec![0.0, 1.0, 3.0], vec![0.5, 0.5]).unwrap();
        assert!(js_divergence(&a, &b).is_err());
    }

    #[test]
    fn median_maps_to_median() {
        let src = EmpiricalCdf::new(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let tgt = EmpiricalCdf::new(&[10.0, 20.0, 30.0, 40.0, 50.0]).unwrap();
        assert!((icdf_map(3.0, &src, QuantileTarget::Empirical(&tgt)) - 30.0).abs() < 1e-12);
    }

    #[test]
    fn identity_map() {
        let s: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin() * 4.0 + 9.0).collect();
        let cdf = EmpiricalCdf::new(&s).unwrap();
        for &v in &s {
            assert!((icdf_map(v, &cdf, QuantileTarget::Empirical(&cdf)) - v).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_source_goes_to_target_median() {
        let src = EmpiricalCdf::new(&[2.0, 2.0, 2.0]).unwrap();
        let out = icdf_map_all(&[2.0, 2.0], &src, QuantileTarget::Uniform { lo: 4.0, hi: 8.0 });
        assert_eq!(out, vec![6.0, 6.0]);
    }

    #[test]
    fn cdf_handles_plateaus_with_mid_rank() {
        let cdf = EmpiricalCdf::new(&[1.0, 2.0, 2.0, 2.0, 3.0]).unwrap();
        assert!((cdf.cdf(2.0) - 0.5).abs() < 1e-15);
        assert_eq!(cdf.cumulative(), &[0.2, 0.8, 1.0]);
    }

    #[test]
    fn sampling_basics() {
        let h = two_bin(0.3, 0.7);
        assert!(sample_from_histogram(&h, 0, 1).is_empty());
        let single = SizeDistribution::new(vec![2.0, 5.0], vec![1.0]).unwrap();
        assert!(sample_from_histogram(&single, 500, 9)
            .iter()
            .all(|v| (2.0..=5.0).contains(v)));
        assert_eq!(sample_from_histogram(&h, 64, 3), sample_from_histogram(&h, 64, 3));
    }

    #[test]
    fn sampling_follows_masses() {
        let h = two_bin(0.3, 0.7);
        let s = sample_from_histogram(&h, 100_000, 42);
        let low = s.iter().filter(|v| **v < 1.0).count() as f64 / s.len() as f64;
        assert!((low - 0.3).abs() < 0.01);
    }
}
