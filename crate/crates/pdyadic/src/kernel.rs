//! Perfect dyadic operators from coefficient families.
//!
//! A kernel is the family `{K_I^+, K_I^-}` over internal intervals, where
//! `K_I^+` is the constant value of `K` on `I+ x I-` and `K_I^-` the value on
//! `I- x I+`. The operator acts by
//!
//! `Tf = sum_I K_I^+ f_{I-} chi_{I+} + K_I^- f_{I+} chi_{I-}`,  `f_A = int_A f`,
//!
//! and splits exactly as `T = (T1 - T2 + T3 - T4)/4` into an averaging
//! operator, a paraproduct adjoint, a paraproduct and a martingale transform.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{
    check_depths, haar_transform, level_averages, subtree_sums, CellVector, DyadicInterval,
    DyadicTree, HaarExpansion,
};

/// Relative slack accepted when validating the size condition on load.
const SIZE_TOL: f64 = 1e-12;

/// Coefficient family of a perfect dyadic operator on a tree of fixed depth.
///
/// Size admissibility: `|K_I^+| |I| <= 1` and `|K_I^-| |I| <= 1` for every
/// internal `I` (the pointwise kernel bound `|K(x,y)| <= 1/|x-y|` at the
/// widest separation `|x-y| = |I|` of the off-diagonal block).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelCoeffs {
    depth: u32,
    // [level][index], levels 0..depth
    kplus: Vec<Vec<f64>>,
    kminus: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelEntry {
    pub level: u32,
    pub index: usize,
    pub kplus: f64,
    pub kminus: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelFile {
    pub depth: u32,
    pub entries: Vec<KernelEntry>,
}

/// Which of the four canonical operators of the decomposition to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    /// `T1 f = sum (K+ + K-) |I| m_I f chi_I` (weighted averaging).
    T1,
    /// `T2 f = sum (K+ - K-) sqrt(|I|) <f,h_I> chi_I` (paraproduct adjoint).
    T2,
    /// `T3 f = sum (K+ - K-) |I|^{3/2} m_I f h_I` (paraproduct).
    T3,
    /// `T4 f = sum (K+ + K-) |I| <f,h_I> h_I` (martingale transform).
    T4,
}

impl KernelCoeffs {
    pub fn zeros(depth: u32) -> Result<Self> {
        DyadicTree::new(depth)?;
        Ok(KernelCoeffs {
            depth,
            kplus: (0..depth).map(|j| vec![0.0; 1usize << j]).collect(),
            kminus: (0..depth).map(|j| vec![0.0; 1usize << j]).collect(),
        })
    }

    /// Uniform random coefficients saturating the size condition:
    /// `K_I^{+-} ~ U[-1/|I|, 1/|I|]`.
    pub fn random_uniform(depth: u32, rng: &mut impl Rng) -> Result<Self> {
        let mut k = KernelCoeffs::zeros(depth)?;
        for j in 0..depth as usize {
            let bound = (1u64 << j) as f64; // 1/|I|
            for idx in 0..(1usize << j) {
                k.kplus[j][idx] = rng.gen_range(-bound..=bound);
                k.kminus[j][idx] = rng.gen_range(-bound..=bound);
            }
        }
        Ok(k)
    }

    /// Decay-profile coefficients `K_I^{+-} = sign * c / |I|` with `|c| <= 1`
    /// and independent random signs.
    pub fn random_decay(depth: u32, magnitude: f64, rng: &mut impl Rng) -> Result<Self> {
        if !(0.0..=1.0).contains(&magnitude) {
            return Err(Error::InvalidValue(format!(
                "decay magnitude must lie in [0,1], got {magnitude}"
            )));
        }
        let mut k = KernelCoeffs::zeros(depth)?;
        for j in 0..depth as usize {
            let scale = magnitude * (1u64 << j) as f64;
            for idx in 0..(1usize << j) {
                k.kplus[j][idx] = if rng.gen::<bool>() { scale } else { -scale };
                k.kminus[j][idx] = if rng.gen::<bool>() { scale } else { -scale };
            }
        }
        Ok(k)
    }

    /// Build from sparse entries; absent intervals default to 0. Entries
    /// violating the size condition are rejected unless `allow_unnormalized`.
    pub fn from_entries(
        depth: u32,
        entries: &[KernelEntry],
        allow_unnormalized: bool,
    ) -> Result<Self> {
        let mut k = KernelCoeffs::zeros(depth)?;
        for e in entries {
            let interval = DyadicInterval::new(e.level, e.index);
            if e.level >= depth || e.index >= (1usize << e.level) {
                return Err(Error::IntervalOutOfRange { interval, depth });
            }
            if !e.kplus.is_finite() || !e.kminus.is_finite() {
                return Err(Error::InvalidValue(format!(
                    "non-finite kernel entry at level {} index {}",
                    e.level, e.index
                )));
            }
            if !allow_unnormalized {
                let len = interval.length();
                let magnitude = e.kplus.abs().max(e.kminus.abs()) * len;
                if magnitude > 1.0 + SIZE_TOL {
                    return Err(Error::SizeViolation {
                        interval,
                        magnitude,
                    });
                }
            }
            k.kplus[e.level as usize][e.index] = e.kplus;
            k.kminus[e.level as usize][e.index] = e.kminus;
        }
        Ok(k)
    }

    pub fn to_entries(&self) -> KernelFile {
        let mut entries = Vec::new();
        for j in 0..self.depth as usize {
            for idx in 0..(1usize << j) {
                let (p, m) = (self.kplus[j][idx], self.kminus[j][idx]);
                if p != 0.0 || m != 0.0 {
                    entries.push(KernelEntry {
                        level: j as u32,
                        index: idx,
                        kplus: p,
                        kminus: m,
                    });
                }
            }
        }
        KernelFile {
            depth: self.depth,
            entries,
        }
    }

    pub fn from_json(s: &str, allow_unnormalized: bool) -> Result<Self> {
        let file: KernelFile = serde_json::from_str(s)?;
        KernelCoeffs::from_entries(file.depth, &file.entries, allow_unnormalized)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_entries()).expect("kernel serialization cannot fail")
    }

    pub fn from_file(path: &std::path::Path, allow_unnormalized: bool) -> Result<Self> {
        KernelCoeffs::from_json(&std::fs::read_to_string(path)?, allow_unnormalized)
    }

    pub fn to_file(&self, path: &std::path::Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json())?)
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn tree(&self) -> DyadicTree {
        DyadicTree::new(self.depth).unwrap()
    }

    pub fn kplus(&self, interval: &DyadicInterval) -> f64 {
        self.kplus[interval.level as usize][interval.index]
    }

    pub fn kminus(&self, interval: &DyadicInterval) -> f64 {
        self.kminus[interval.level as usize][interval.index]
    }

    pub fn set(&mut self, interval: &DyadicInterval, kplus: f64, kminus: f64) -> Result<()> {
        if interval.level >= self.depth || interval.index >= (1usize << interval.level) {
            return Err(Error::IntervalOutOfRange {
                interval: *interval,
                depth: self.depth,
            });
        }
        self.kplus[interval.level as usize][interval.index] = kplus;
        self.kminus[interval.level as usize][interval.index] = kminus;
        Ok(())
    }

    /// Global sign flip `K -> -K`.
    pub fn negated(&self) -> KernelCoeffs {
        KernelCoeffs {
            depth: self.depth,
            kplus: self
                .kplus
                .iter()
                .map(|l| l.iter().map(|x| -x).collect())
                .collect(),
            kminus: self
                .kminus
                .iter()
                .map(|l| l.iter().map(|x| -x).collect())
                .collect(),
        }
    }

    /// Largest entrywise difference against another coefficient table.
    pub fn max_abs_diff(&self, other: &KernelCoeffs) -> f64 {
        if self.depth != other.depth {
            return f64::INFINITY;
        }
        let pair_max = |a: &[Vec<f64>], b: &[Vec<f64>]| {
            a.iter()
                .flatten()
                .zip(b.iter().flatten())
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        };
        pair_max(&self.kplus, &other.kplus).max(pair_max(&self.kminus, &other.kminus))
    }

    /// `sup_I |K_I^+ + K_I^-| |I|`, `sup |K_I^+| |I|`, `sup |K_I^-| |I|`.
    pub fn size_constants(&self) -> (f64, f64, f64) {
        let mut sum_c = 0.0f64;
        let mut plus_c = 0.0f64;
        let mut minus_c = 0.0f64;
        for j in 0..self.depth as usize {
            let len = 0.5_f64.powi(j as i32);
            for idx in 0..(1usize << j) {
                let (p, m) = (self.kplus[j][idx], self.kminus[j][idx]);
                sum_c = sum_c.max((p + m).abs() * len);
                plus_c = plus_c.max(p.abs() * len);
                minus_c = minus_c.max(m.abs() * len);
            }
        }
        (sum_c, plus_c, minus_c)
    }

    /// Per-level integrals `f_A = int_A f` of `f` over all intervals.
    fn level_integrals(&self, f: &CellVector) -> Vec<Vec<f64>> {
        let avgs = level_averages(f);
        avgs.iter()
            .enumerate()
            .map(|(j, level)| {
                let len = 0.5_f64.powi(j as i32);
                level.iter().map(|m| m * len).collect()
            })
            .collect()
    }

    /// Top-down accumulation of per-interval contributions that are constant
    /// on each child: `child_value(I, left, right)` returns the constants
    /// added on the left and right halves of `I`.
    fn sweep_down(&self, child_terms: impl Fn(usize, usize) -> (f64, f64)) -> CellVector {
        let depth = self.depth as usize;
        let mut carry = vec![0.0f64];
        for j in 0..depth {
            let mut next = vec![0.0; 1usize << (j + 1)];
            for k in 0..(1usize << j) {
                let (left, right) = child_terms(j, k);
                next[2 * k] = carry[k] + left;
                next[2 * k + 1] = carry[k] + right;
            }
            carry = next;
        }
        CellVector::new(self.depth, carry).unwrap()
    }

    /// Direct application `Tf = sum_I K_I^+ f_{I-} chi_{I+} + K_I^- f_{I+} chi_{I-}`.
    pub fn apply(&self, f: &CellVector) -> Result<CellVector> {
        check_depths(self.depth, f.depth())?;
        let ints = self.level_integrals(f);
        Ok(self.sweep_down(|j, k| {
            let f_left = ints[j + 1][2 * k];
            let f_right = ints[j + 1][2 * k + 1];
            (self.kplus[j][k] * f_right, self.kminus[j][k] * f_left)
        }))
    }

    /// Adjoint application `T*f = sum_I K_I^- f_{I-} chi_{I+} + K_I^+ f_{I+} chi_{I-}`.
    pub fn apply_adjoint(&self, f: &CellVector) -> Result<CellVector> {
        check_depths(self.depth, f.depth())?;
        let ints = self.level_integrals(f);
        Ok(self.sweep_down(|j, k| {
            let f_left = ints[j + 1][2 * k];
            let f_right = ints[j + 1][2 * k + 1];
            (self.kminus[j][k] * f_right, self.kplus[j][k] * f_left)
        }))
    }

    /// One of the four canonical operators, evaluated exactly.
    pub fn apply_component(&self, which: Component, f: &CellVector) -> Result<CellVector> {
        check_depths(self.depth, f.depth())?;
        let avgs = level_averages(f);
        let haar = haar_transform(f);
        let coeffs = haar.coeff_levels();
        Ok(self.sweep_down(|j, k| {
            let len = 0.5_f64.powi(j as i32);
            let sum = self.kplus[j][k] + self.kminus[j][k];
            let diff = self.kplus[j][k] - self.kminus[j][k];
            match which {
                Component::T1 => {
                    let c = sum * len * avgs[j][k];
                    (c, c)
                }
                Component::T2 => {
                    let c = diff * len.sqrt() * coeffs[j][k];
                    (c, c)
                }
                Component::T3 => {
                    // |I|^{3/2} m_I f * h_I = |I| m_I f on I+, -|I| m_I f on I-
                    let c = diff * len * avgs[j][k];
                    (c, -c)
                }
                Component::T4 => {
                    // |I| <f,h_I> * h_I = sqrt(|I|) <f,h_I> signed per child
                    let c = sum * len.sqrt() * coeffs[j][k];
                    (c, -c)
                }
            }
        }))
    }

    /// Max-abs residual of `Tf - (T1 f - T2 f + T3 f - T4 f)/4`; the identity
    /// is algebraic, so this is pure round-off.
    pub fn decomposition_residual(&self, f: &CellVector) -> Result<f64> {
        let direct = self.apply(f)?;
        let t1 = self.apply_component(Component::T1, f)?;
        let t2 = self.apply_component(Component::T2, f)?;
        let t3 = self.apply_component(Component::T3, f)?;
        let t4 = self.apply_component(Component::T4, f)?;
        let max = direct
            .values()
            .iter()
            .enumerate()
            .fold(0.0f64, |m, (i, &d)| {
                let recombined =
                    0.25 * (t1.values()[i] - t2.values()[i] + t3.values()[i] - t4.values()[i]);
                m.max((d - recombined).abs())
            });
        Ok(max)
    }

    /// Closed-form coefficients of `T(1)` and `T*(1)` in the Haar basis.
    pub fn t1_coefficients(&self) -> T1Coefficients {
        let depth = self.depth as usize;
        // subtree sums of s_I = (K+ + K-) |I|^2
        let sums = self.size_weighted_sums();
        let alpha: Vec<Vec<f64>> = (0..depth)
            .map(|j| {
                let inv_sqrt_len = ((1u64 << j) as f64).sqrt();
                (0..(1usize << j))
                    .map(|k| {
                        let (sl, sr) = if j + 1 < depth {
                            (sums[j + 1][2 * k], sums[j + 1][2 * k + 1])
                        } else {
                            (0.0, 0.0)
                        };
                        (sl - sr) * inv_sqrt_len
                    })
                    .collect()
            })
            .collect();
        let beta: Vec<Vec<f64>> = (0..depth)
            .map(|j| {
                let len32 = 0.5_f64.powi(j as i32).powf(1.5);
                (0..(1usize << j))
                    .map(|k| (self.kplus[j][k] - self.kminus[j][k]) * len32)
                    .collect()
            })
            .collect();
        T1Coefficients {
            depth: self.depth,
            alpha,
            beta,
        }
    }

    /// `(K_I^+ + K_I^-) |I|^2` per internal interval.
    pub(crate) fn size_weighted_entries(&self) -> Vec<Vec<f64>> {
        (0..self.depth as usize)
            .map(|j| {
                let len2 = 0.25_f64.powi(j as i32);
                (0..(1usize << j))
                    .map(|k| (self.kplus[j][k] + self.kminus[j][k]) * len2)
                    .collect()
            })
            .collect()
    }

    /// Subtree sums `sum_{I in D(J)} (K_I^+ + K_I^-) |I|^2` per internal `J`.
    pub(crate) fn size_weighted_sums(&self) -> Vec<Vec<f64>> {
        subtree_sums(self.depth, &self.size_weighted_entries())
    }

    /// `<T h_J, h_J>` by the closed form
    /// `(1/(4|J|)) sum_{I in D(J)} (K_I^+ + K_I^-) |I|^2 - (K_J^+ + K_J^-) |J| / 2`.
    pub fn testing_value(&self, interval: &DyadicInterval) -> Result<f64> {
        self.require_internal(interval)?;
        let sums = self.size_weighted_sums();
        let j = interval.level as usize;
        let k = interval.index;
        let len = interval.length();
        Ok(sums[j][k] / (4.0 * len) - 0.5 * (self.kplus[j][k] + self.kminus[j][k]) * len)
    }

    /// Closed-form `<T h_J, h_J>` for every internal interval in one pass.
    pub fn testing_values_all(&self) -> Vec<Vec<f64>> {
        let sums = self.size_weighted_sums();
        (0..self.depth as usize)
            .map(|j| {
                let len = 0.5_f64.powi(j as i32);
                (0..(1usize << j))
                    .map(|k| {
                        sums[j][k] / (4.0 * len)
                            - 0.5 * (self.kplus[j][k] + self.kminus[j][k]) * len
                    })
                    .collect()
            })
            .collect()
    }

    /// Verification mode: `<apply(h_J), h_J>` via cell sums.
    pub fn testing_value_direct(&self, interval: &DyadicInterval) -> Result<f64> {
        let h = crate::tree::haar_cells(self.depth, interval)?;
        let th = self.apply(&h)?;
        th.inner_product(&h)
    }

    fn require_internal(&self, interval: &DyadicInterval) -> Result<()> {
        if interval.index >= (1usize << interval.level) || interval.level > self.depth {
            return Err(Error::IntervalOutOfRange {
                interval: *interval,
                depth: self.depth,
            });
        }
        if interval.level >= self.depth {
            return Err(Error::NotInternal(*interval));
        }
        Ok(())
    }
}

/// Per-interval `alpha_J`, `beta_J` with
/// `<T(1), h_J> = (alpha_J + beta_J)/4` and `<T*(1), h_J> = (alpha_J - beta_J)/4`.
#[derive(Debug, Clone, PartialEq)]
pub struct T1Coefficients {
    depth: u32,
    alpha: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
}

impl T1Coefficients {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn alpha(&self, interval: &DyadicInterval) -> f64 {
        self.alpha[interval.level as usize][interval.index]
    }

    pub fn beta(&self, interval: &DyadicInterval) -> f64 {
        self.beta[interval.level as usize][interval.index]
    }

    /// `<T(1), h_J>`.
    pub fn t1_coeff(&self, interval: &DyadicInterval) -> f64 {
        0.25 * (self.alpha(interval) + self.beta(interval))
    }

    /// `<T*(1), h_J>`.
    pub fn t1star_coeff(&self, interval: &DyadicInterval) -> f64 {
        0.25 * (self.alpha(interval) - self.beta(interval))
    }

    pub(crate) fn beta_levels(&self) -> &[Vec<f64>] {
        &self.beta
    }

    /// Haar expansions of `T(1)` and `T*(1)` from the closed forms.
    pub fn as_expansions(&self) -> (HaarExpansion, HaarExpansion) {
        let mut t1 = HaarExpansion::zeros(self.depth);
        let mut t1s = HaarExpansion::zeros(self.depth);
        for j in 0..self.depth as usize {
            for k in 0..(1usize << j) {
                let i = DyadicInterval::new(j as u32, k);
                t1.set_coefficient(&i, self.t1_coeff(&i)).unwrap();
                t1s.set_coefficient(&i, self.t1star_coeff(&i)).unwrap();
            }
        }
        (t1, t1s)
    }
}
