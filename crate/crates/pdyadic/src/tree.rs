//! Finite dyadic tree over `[0,1)`, piecewise-constant functions, averages
//! and the Haar system.
//!
//! The grid is the set of dyadic intervals `[k*2^-j, (k+1)*2^-j)` with
//! `0 <= j <= L` and `0 <= k < 2^j`. Intervals at level `L` are the cells;
//! levels `0..L` are internal. A `CellVector` is a function constant on each
//! cell.
//!
//! Sign convention: for every dyadic interval `I`, `I+` is its LEFT half and
//! `I-` its RIGHT half, and the Haar function `h_I = |I|^{-1/2} (chi_{I+} -
//! chi_{I-})` is positive on the left. This is the single source of truth for
//! the whole crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dyadic interval `[k*2^-j, (k+1)*2^-j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub level: u32,
    pub index: usize,
}

impl std::fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(level {}, index {})", self.level, self.index)
    }
}

impl DyadicInterval {
    pub const ROOT: DyadicInterval = DyadicInterval { level: 0, index: 0 };

    pub fn new(level: u32, index: usize) -> Self {
        DyadicInterval { level, index }
    }

    /// `|I| = 2^-level`.
    pub fn length(&self) -> f64 {
        0.5_f64.powi(self.level as i32)
    }

    /// Left endpoint `k * 2^-j`.
    pub fn left_endpoint(&self) -> f64 {
        self.index as f64 * self.length()
    }

    /// Left half `I+`.
    pub fn left_child(&self) -> DyadicInterval {
        DyadicInterval::new(self.level + 1, 2 * self.index)
    }

    /// Right half `I-`.
    pub fn right_child(&self) -> DyadicInterval {
        DyadicInterval::new(self.level + 1, 2 * self.index + 1)
    }

    pub fn parent(&self) -> Option<DyadicInterval> {
        if self.level == 0 {
            None
        } else {
            Some(DyadicInterval::new(self.level - 1, self.index / 2))
        }
    }

    pub fn contains(&self, other: &DyadicInterval) -> bool {
        other.level >= self.level && (other.index >> (other.level - self.level)) == self.index
    }

    /// Range of cell indices covered by this interval in a tree of `depth`.
    pub fn cell_range(&self, depth: u32) -> std::ops::Range<usize> {
        let shift = depth - self.level;
        (self.index << shift)..((self.index + 1) << shift)
    }

    fn check_in_tree(&self, depth: u32) -> Result<()> {
        if self.level > depth || self.index >= (1usize << self.level) {
            return Err(Error::IntervalOutOfRange {
                interval: *self,
                depth,
            });
        }
        Ok(())
    }
}

/// The finite dyadic tree: internal intervals at levels `0..depth`, cells at
/// level `depth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicTree {
    depth: u32,
}

impl DyadicTree {
    pub fn new(depth: u32) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidValue("tree depth must be >= 1".into()));
        }
        Ok(DyadicTree { depth })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn cell_count(&self) -> usize {
        1usize << self.depth
    }

    /// All internal intervals, top-down (level-major).
    pub fn internal_intervals(&self) -> impl Iterator<Item = DyadicInterval> {
        let depth = self.depth;
        (0..depth).flat_map(|j| (0..(1usize << j)).map(move |k| DyadicInterval::new(j, k)))
    }

    /// All intervals including cells, top-down.
    pub fn all_intervals(&self) -> impl Iterator<Item = DyadicInterval> {
        let depth = self.depth;
        (0..=depth).flat_map(|j| (0..(1usize << j)).map(move |k| DyadicInterval::new(j, k)))
    }
}

/// A real-valued function on `[0,1)`, constant on each of the `2^depth` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellVector {
    depth: u32,
    values: Vec<f64>,
}

impl CellVector {
    pub fn new(depth: u32, values: Vec<f64>) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidValue("depth must be >= 1".into()));
        }
        if values.len() != (1usize << depth) {
            return Err(Error::InvalidValue(format!(
                "expected {} cell values for depth {}, got {}",
                1usize << depth,
                depth,
                values.len()
            )));
        }
        Ok(CellVector { depth, values })
    }

    pub fn zeros(depth: u32) -> Self {
        CellVector {
            depth,
            values: vec![0.0; 1usize << depth],
        }
    }

    pub fn constant(depth: u32, c: f64) -> Self {
        CellVector {
            depth,
            values: vec![c; 1usize << depth],
        }
    }

    /// Indicator of a single cell.
    pub fn cell_indicator(depth: u32, cell: usize) -> Self {
        let mut v = CellVector::zeros(depth);
        v.values[cell] = 1.0;
        v
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> CellVector {
        CellVector {
            depth: self.depth,
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }

    /// `int_0^1 f dx = 2^-L * sum of cell values`.
    pub fn integral(&self) -> f64 {
        pairwise_sum(&self.values) * 0.5_f64.powi(self.depth as i32)
    }

    /// Lebesgue `L^2` inner product on `[0,1)`.
    pub fn inner_product(&self, other: &CellVector) -> Result<f64> {
        check_depths(self.depth, other.depth)?;
        let prods: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .collect();
        Ok(pairwise_sum(&prods) * 0.5_f64.powi(self.depth as i32))
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner_product(self).unwrap().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: CellVector = serde_json::from_str(s)?;
        CellVector::new(raw.depth, raw.values)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("CellVector serialization cannot fail")
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        CellVector::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_file(&self, path: &std::path::Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json())?)
    }
}

/// Exact pairwise summation.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n <= 8 {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(n / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

pub(crate) fn check_depths(left: u32, right: u32) -> Result<()> {
    if left != right {
        return Err(Error::DepthMismatch { left, right });
    }
    Ok(())
}

/// Per-level averages of `f`: `out[j][k] = m_{(j,k)} f` for `0 <= j <= L`,
/// built bottom-up by pairwise aggregation.
pub(crate) fn level_averages(f: &CellVector) -> Vec<Vec<f64>> {
    let depth = f.depth() as usize;
    let mut levels: Vec<Vec<f64>> = vec![Vec::new(); depth + 1];
    levels[depth] = f.values().to_vec();
    for j in (0..depth).rev() {
        let prev = &levels[j + 1];
        levels[j] = (0..(1usize << j))
            .map(|k| 0.5 * (prev[2 * k] + prev[2 * k + 1]))
            .collect();
    }
    levels
}

/// Subtree sums over internal intervals: `out[j][k] = sum of per_interval
/// over all internal I contained in (j,k), including (j,k) itself`.
pub(crate) fn subtree_sums(depth: u32, per_interval: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let depth = depth as usize;
    let mut sums: Vec<Vec<f64>> = vec![Vec::new(); depth];
    for j in (0..depth).rev() {
        sums[j] = (0..(1usize << j))
            .map(|k| {
                let below = if j + 1 < depth {
                    sums[j + 1][2 * k] + sums[j + 1][2 * k + 1]
                } else {
                    0.0
                };
                per_interval[j][k] + below
            })
            .collect();
    }
    sums
}

/// `m_I f` for any interval of the tree (cells included).
pub fn interval_average(f: &CellVector, interval: &DyadicInterval) -> Result<f64> {
    interval.check_in_tree(f.depth())?;
    let range = interval.cell_range(f.depth());
    let n = range.len();
    Ok(pairwise_sum(&f.values()[range]) / n as f64)
}

/// `Delta_I f = m_{I+} f - m_{I-} f` with `I+` the left half.
///
/// Enters every downstream condition only squared, so the sign convention is
/// immaterial there.
pub fn delta(f: &CellVector, interval: &DyadicInterval) -> Result<f64> {
    require_internal(interval, f.depth())?;
    let left = interval_average(f, &interval.left_child())?;
    let right = interval_average(f, &interval.right_child())?;
    Ok(left - right)
}

/// `<f, h_I> = (sqrt(|I|)/2) (m_{I+} f - m_{I-} f)`.
pub fn haar_coefficient(f: &CellVector, interval: &DyadicInterval) -> Result<f64> {
    let d = delta(f, interval)?;
    Ok(0.5 * interval.length().sqrt() * d)
}

fn require_internal(interval: &DyadicInterval, depth: u32) -> Result<()> {
    interval.check_in_tree(depth)?;
    if interval.level >= depth {
        return Err(Error::NotInternal(*interval));
    }
    Ok(())
}

/// Haar coefficients of a `CellVector`: the global mean plus one coefficient
/// per internal interval. Parseval: `int f^2 = mean^2 + sum of coeffs^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarExpansion {
    depth: u32,
    mean: f64,
    // coeffs[j][k] = <f, h_{(j,k)}>, 0 <= j < depth
    coeffs: Vec<Vec<f64>>,
}

impl HaarExpansion {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn coefficient(&self, interval: &DyadicInterval) -> Result<f64> {
        require_internal(interval, self.depth)?;
        Ok(self.coeffs[interval.level as usize][interval.index])
    }

    pub(crate) fn coeff_levels(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn zeros(depth: u32) -> Self {
        HaarExpansion {
            depth,
            mean: 0.0,
            coeffs: (0..depth).map(|j| vec![0.0; 1usize << j]).collect(),
        }
    }

    /// Expansion of a single Haar function `h_I`.
    pub fn haar_function(depth: u32, interval: &DyadicInterval) -> Result<Self> {
        require_internal(interval, depth)?;
        let mut e = HaarExpansion::zeros(depth);
        e.coeffs[interval.level as usize][interval.index] = 1.0;
        Ok(e)
    }

    pub fn set_coefficient(&mut self, interval: &DyadicInterval, value: f64) -> Result<()> {
        require_internal(interval, self.depth)?;
        self.coeffs[interval.level as usize][interval.index] = value;
        Ok(())
    }
}

/// Analysis: all Haar coefficients in one bottom-up pass.
pub fn haar_transform(f: &CellVector) -> HaarExpansion {
    let depth = f.depth();
    let avgs = level_averages(f);
    let coeffs = (0..depth as usize)
        .map(|j| {
            let half_sqrt_len = 0.5 * 0.5_f64.powi(j as i32).sqrt();
            (0..(1usize << j))
                .map(|k| half_sqrt_len * (avgs[j + 1][2 * k] - avgs[j + 1][2 * k + 1]))
                .collect()
        })
        .collect();
    HaarExpansion {
        depth,
        mean: avgs[0][0],
        coeffs,
    }
}

/// Synthesis: top-down accumulation of `mean + sum coeff_I h_I`.
pub fn haar_synthesize(e: &HaarExpansion) -> CellVector {
    let depth = e.depth as usize;
    let mut carry = vec![e.mean];
    for j in 0..depth {
        let scale = ((1u64 << j) as f64).sqrt(); // |I|^{-1/2}
        let mut next = vec![0.0; 1usize << (j + 1)];
        for k in 0..(1usize << j) {
            let h = e.coeffs[j][k] * scale;
            next[2 * k] = carry[k] + h;
            next[2 * k + 1] = carry[k] - h;
        }
        carry = next;
    }
    CellVector {
        depth: e.depth,
        values: carry,
    }
}

/// The Haar function `h_I` itself, as cell values.
pub fn haar_cells(depth: u32, interval: &DyadicInterval) -> Result<CellVector> {
    Ok(haar_synthesize(&HaarExpansion::haar_function(
        depth, interval,
    )?))
}
