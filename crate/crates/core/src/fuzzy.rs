//! Histogram thresholding by crossing of normalized index-of-fuzziness curves.
//!
//! The object subset `B` and background subset `W` are modelled by an
//! S-shaped membership function whose parameters come from the histogram
//! mass of the subset. For each candidate level `t` between the two seed
//! peaks, the fuzziness of `[x_min, t]` (object side) and `[t, x_max]`
//! (background side) is measured; after normalizing the object curve by the
//! ratio of the seed fuzzinesses, the threshold is where the two curves meet.

use thiserror::Error;

use crate::frame::{Histogram, LEVELS};

/// Width of the moving-average smoother used for seed peak detection.
pub const SMOOTHING_WINDOW: usize = 5;
/// Minimum gray-level distance between the object and background seeds.
pub const MIN_PEAK_SEPARATION: usize = 10;
pub const DEFAULT_K_ORDER: u32 = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FuzzyError {
    #[error("no occupied gray level in [{p}, {q}]")]
    EmptySubset { p: u8, q: u8 },
    #[error("membership sequence is empty")]
    EmptyInput,
    #[error("index order must be >= 1")]
    InvalidOrder,
    #[error("histogram lacks two separated peaks: {0}")]
    NoContrast(String),
    #[error("membership parameters are degenerate (c == a)")]
    DegenerateParams,
}

/// Parameters of the S-shaped membership function. `b` is the crossover
/// point (membership 0.5) and always sits midway between `a` and `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembershipParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl MembershipParams {
    /// Builds parameters from the crossover `b` and the upper knee `c`;
    /// `a` follows as `2b - c`.
    pub fn from_center(b: f64, c: f64) -> Self {
        Self { a: 2.0 * b - c, b, c }
    }

    /// Rejects parameters that would collapse the function to a step.
    pub fn checked(self) -> Result<Self, FuzzyError> {
        if self.c == self.a {
            Err(FuzzyError::DegenerateParams)
        } else {
            Ok(self)
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.c == self.a
    }
}

/// Object-side membership. A degenerate function (`c == a`) is a hard step
/// at `b` that still passes through 0.5 at `b`.
pub fn mu_b(x: f64, p: &MembershipParams) -> f64 {
    if p.is_degenerate() {
        return match x.partial_cmp(&p.b) {
            Some(std::cmp::Ordering::Less) => 0.0,
            Some(std::cmp::Ordering::Equal) => 0.5,
            _ => 1.0,
        };
    }
    let span = p.c - p.a;
    if x < p.a {
        0.0
    } else if x <= p.b {
        let r = (x - p.a) / span;
        2.0 * r * r
    } else if x <= p.c {
        let r = (x - p.c) / span;
        1.0 - 2.0 * r * r
    } else {
        1.0
    }
}

pub fn mu_w(x: f64, p: &MembershipParams) -> f64 {
    1.0 - mu_b(x, p)
}

/// S-function parameters for the subset `[p, q]` of `hist`: the crossover is
/// the count-weighted mean level of the subset and the knees are placed so
/// the function spans the whole occupied range of the image.
pub fn membership_params(hist: &Histogram, p: u8, q: u8) -> Result<MembershipParams, FuzzyError> {
    let (lo, hi) = (p.min(q), p.max(q));
    let mut mass = 0u64;
    let mut moment = 0u64;
    for level in lo..=hi {
        let count = hist.count(level);
        mass += count;
        moment += count * u64::from(level);
    }
    if mass == 0 {
        return Err(FuzzyError::EmptySubset { p, q });
    }
    let b = moment as f64 / mass as f64;
    // mass > 0 guarantees both extremes exist
    let x_min = f64::from(hist.min_level().unwrap_or(lo));
    let x_max = f64::from(hist.max_level().unwrap_or(hi));
    let c = b + (b - x_max).abs().max((b - x_min).abs());
    Ok(MembershipParams::from_center(b, c))
}

/// Index of fuzziness of a membership vector: twice the normalized k-norm
/// distance to its nearest crisp set, so the result lies in [0, 1].
pub fn fuzziness_index(memberships: &[f64], k_order: u32) -> Result<f64, FuzzyError> {
    weighted_index(memberships.iter().map(|&m| (m, 1.0)), k_order)
}

/// Like [`fuzziness_index`] but each membership carries a weight (typically
/// its histogram count). Equal weights reproduce the unweighted index.
pub fn fuzziness_index_weighted(
    memberships: &[f64],
    weights: &[f64],
    k_order: u32,
) -> Result<f64, FuzzyError> {
    weighted_index(memberships.iter().copied().zip(weights.iter().copied()), k_order)
}

fn weighted_index(
    items: impl Iterator<Item = (f64, f64)>,
    k_order: u32,
) -> Result<f64, FuzzyError> {
    if k_order == 0 {
        return Err(FuzzyError::InvalidOrder);
    }
    let k = f64::from(k_order);
    let mut total_weight = 0.0;
    let mut sum = 0.0;
    let mut any = false;
    for (mu, w) in items {
        any = true;
        let crisp = if mu >= 0.5 { 1.0 } else { 0.0 };
        sum += w * (mu - crisp).abs().powf(k);
        total_weight += w;
    }
    if !any || total_weight <= 0.0 {
        return Err(FuzzyError::EmptyInput);
    }
    // (2 / n^(1/k)) * (sum)^(1/k) == 2 * (sum / n)^(1/k)
    let psi = 2.0 * (sum / total_weight).powf(1.0 / k);
    Ok(psi.clamp(0.0, 1.0))
}

/// Extreme occupied levels plus the object and background seed limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistogramRegion {
    pub x_min: u8,
    pub x_max: u8,
    /// Upper limit of the object seed (the lower dominant peak).
    pub x_j: u8,
    /// Lower limit of the background seed (the upper dominant peak).
    pub x_r: u8,
}

impl HistogramRegion {
    /// Candidate thresholds, strictly between the seeds.
    pub fn fuzzy_levels(&self) -> std::ops::Range<u8> {
        self.x_j.saturating_add(1)..self.x_r
    }
}

fn smooth(hist: &Histogram) -> [f64; LEVELS] {
    let half = SMOOTHING_WINDOW / 2;
    let bins = hist.bins();
    let mut out = [0.0; LEVELS];
    for (i, slot) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(LEVELS - 1);
        let sum: u64 = bins[lo..=hi].iter().sum();
        *slot = sum as f64 / (hi - lo + 1) as f64;
    }
    out
}

/// Local maxima of a sequence as inclusive index runs `(first, last, value)`,
/// treating a flat run as a single candidate. A run is a peak when it is
/// higher than both neighbours, where running off either end counts as
/// lower. A fully flat sequence has no peak.
fn plateau_peaks(values: &[f64]) -> Vec<(usize, usize, f64)> {
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < values.len() {
        let mut j = i;
        while j + 1 < values.len() && values[j + 1] == values[i] {
            j += 1;
        }
        let v = values[i];
        let left_lower = i == 0 || values[i - 1] < v;
        let right_lower = j + 1 == values.len() || values[j + 1] < v;
        let bounded = i > 0 || j + 1 < values.len();
        if v > 0.0 && left_lower && right_lower && bounded {
            peaks.push((i, j, v));
        }
        i = j + 1;
    }
    peaks
}

/// Locates the object and background seeds as the two dominant peaks of the
/// smoothed histogram that are at least [`MIN_PEAK_SEPARATION`] levels apart.
pub fn seed_regions(hist: &Histogram) -> Result<HistogramRegion, FuzzyError> {
    let (x_min, x_max) = match (hist.min_level(), hist.max_level()) {
        (Some(lo), Some(hi)) if lo < hi => (lo, hi),
        _ => {
            return Err(FuzzyError::NoContrast(
                "fewer than two occupied gray levels".into(),
            ))
        }
    };
    let smoothed = smooth(hist);
    let mut peaks = plateau_peaks(&smoothed);
    let mid2 = |p: &(usize, usize, f64)| p.0 + p.1;
    // tallest first, lower level wins ties
    peaks.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    let Some(first) = peaks.first() else {
        return Err(FuzzyError::NoContrast("histogram has no peak".into()));
    };
    let Some(second) = peaks
        .iter()
        .find(|p| mid2(p).abs_diff(mid2(first)) >= 2 * MIN_PEAK_SEPARATION)
    else {
        return Err(FuzzyError::NoContrast(
            "no second peak at least 10 levels from the first".into(),
        ));
    };
    let (lower, upper) = if mid2(first) < mid2(second) {
        (first, second)
    } else {
        (second, first)
    };
    // an even plateau has two middles; take the inner one on both sides so
    // that mirrored histograms get mirrored seeds
    let (first, second) = (mid2(lower).div_ceil(2), mid2(upper) / 2);
    let clamp = |v: usize| (v as u8).clamp(x_min, x_max);
    let (x_j, x_r) = (clamp(first.min(second)), clamp(first.max(second)));
    if x_r <= x_j + 1 {
        return Err(FuzzyError::NoContrast("seeds leave an empty fuzzy region".into()));
    }
    Ok(HistogramRegion {
        x_min,
        x_max,
        x_j,
        x_r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThresholdOptions {
    pub k_order: u32,
    /// Weight each occupied level by its histogram count instead of counting
    /// every occupied level once.
    pub weighted: bool,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            k_order: DEFAULT_K_ORDER,
            weighted: false,
        }
    }
}

/// Both fuzziness curves over the fuzzy region and the chosen crossing.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzinessCurve {
    pub region: HistogramRegion,
    pub levels: Vec<u8>,
    pub psi_b: Vec<f64>,
    pub psi_w: Vec<f64>,
    /// Ratio of background-seed to object-seed fuzziness, used to scale the
    /// object curve.
    pub alpha: f64,
    pub threshold: u8,
}

impl FuzzinessCurve {
    pub fn normalized_psi_b(&self) -> impl Iterator<Item = f64> + '_ {
        self.psi_b.iter().map(|p| p * self.alpha)
    }
}

struct SubsetFuzziness<'a> {
    hist: &'a Histogram,
    occupied: Vec<u8>,
    weights: Vec<f64>,
    opts: ThresholdOptions,
}

impl SubsetFuzziness<'_> {
    fn psi(&self, p: u8, q: u8) -> Result<f64, FuzzyError> {
        let params = membership_params(self.hist, p, q)?;
        let memberships: Vec<f64> = self
            .occupied
            .iter()
            .map(|&x| mu_b(f64::from(x), &params))
            .collect();
        if self.opts.weighted {
            fuzziness_index_weighted(&memberships, &self.weights, self.opts.k_order)
        } else {
            fuzziness_index(&memberships, self.opts.k_order)
        }
    }
}

/// Index of the smallest gap. The curves only change at occupied levels, so
/// a minimum usually spans a run of equal gaps across an empty stretch of
/// the histogram; the middle of the first such run is returned (lower middle
/// for even lengths).
fn crossing_index(gaps: &[f64]) -> Option<usize> {
    const TIE: f64 = 1e-12;
    let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let start = gaps.iter().position(|&g| g - min <= TIE)?;
    let len = gaps[start..].iter().take_while(|&&g| g - min <= TIE).count();
    Some(start + (len - 1) / 2)
}

/// Picks the gray level where the normalized object curve `alpha * psi_B`
/// meets the background curve `psi_W`.
pub fn compute_threshold(
    hist: &Histogram,
    opts: ThresholdOptions,
) -> Result<(u8, FuzzinessCurve), FuzzyError> {
    if opts.k_order == 0 {
        return Err(FuzzyError::InvalidOrder);
    }
    let region = seed_regions(hist)?;
    let occupied: Vec<u8> = hist.occupied_levels().collect();
    let weights = occupied.iter().map(|&x| hist.count(x) as f64).collect();
    let subsets = SubsetFuzziness {
        hist,
        occupied,
        weights,
        opts,
    };

    // psi_B(W seed) over psi_B(B seed). psi is invariant under mu -> 1 - mu,
    // so the object-side S-function serves both subsets.
    let seed_b = subsets.psi(region.x_min, region.x_j)?;
    let seed_w = subsets.psi(region.x_r, region.x_max)?;
    let alpha = if seed_b > 0.0 && seed_w > 0.0 {
        seed_w / seed_b
    } else {
        1.0
    };

    let levels: Vec<u8> = region.fuzzy_levels().collect();
    let mut psi_b = Vec::with_capacity(levels.len());
    let mut psi_w = Vec::with_capacity(levels.len());
    for &t in &levels {
        psi_b.push(subsets.psi(region.x_min, t)?);
        psi_w.push(subsets.psi(t, region.x_max)?);
    }
    let gaps: Vec<f64> = psi_b
        .iter()
        .zip(&psi_w)
        .map(|(b, w)| (alpha * b - w).abs())
        .collect();
    let threshold = levels[crossing_index(&gaps)
        .ok_or_else(|| FuzzyError::NoContrast("empty fuzzy region".into()))?];
    Ok((
        threshold,
        FuzzinessCurve {
            region,
            levels,
            psi_b,
            psi_w,
            alpha,
            threshold,
        },
    ))
}
