//! Weights on the dyadic tree and their constants: `A_2^d`, joint `A_2^d`,
//! `A_infty^d`, `RH_1^d`, plus Carleson sequences and weight generators.
//!
//! A `Weight` is a strictly positive `CellVector` with eagerly cached
//! per-interval averages of `w`, `w^-1` (pointwise reciprocal of cell
//! values), `log w` and `w log w`. The piecewise-constant model makes all of
//! these exact.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tree::{level_averages, subtree_sums, CellVector, DyadicInterval, DyadicTree};

/// Cell values are clamped to this range at generation.
pub const WEIGHT_CLAMP: (f64, f64) = (1e-8, 1e8);

#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    cells: CellVector,
    avg_w: Vec<Vec<f64>>,
    avg_winv: Vec<Vec<f64>>,
    avg_logw: Vec<Vec<f64>>,
    avg_wlogw: Vec<Vec<f64>>,
}

impl Weight {
    pub fn new(cells: CellVector) -> Result<Self> {
        for (i, &v) in cells.values().iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidValue(format!(
                    "weight cell {i} must be strictly positive and finite, got {v}"
                )));
            }
        }
        let avg_w = level_averages(&cells);
        let avg_winv = level_averages(&cells.map(|v| 1.0 / v));
        let avg_logw = level_averages(&cells.map(f64::ln));
        let avg_wlogw = level_averages(&cells.map(|v| v * v.ln()));
        Ok(Weight {
            cells,
            avg_w,
            avg_winv,
            avg_logw,
            avg_wlogw,
        })
    }

    pub fn constant(depth: u32, c: f64) -> Result<Self> {
        Weight::new(CellVector::constant(depth, c))
    }

    pub fn depth(&self) -> u32 {
        self.cells.depth()
    }

    pub fn tree(&self) -> DyadicTree {
        DyadicTree::new(self.depth()).unwrap()
    }

    pub fn cells(&self) -> &CellVector {
        &self.cells
    }

    /// Pointwise reciprocal, itself a valid weight.
    pub fn inverse(&self) -> Weight {
        Weight::new(self.cells.map(|v| 1.0 / v)).unwrap()
    }

    pub fn avg(&self, i: &DyadicInterval) -> f64 {
        self.avg_w[i.level as usize][i.index]
    }

    pub fn avg_inv(&self, i: &DyadicInterval) -> f64 {
        self.avg_winv[i.level as usize][i.index]
    }

    pub fn avg_log(&self, i: &DyadicInterval) -> f64 {
        self.avg_logw[i.level as usize][i.index]
    }

    pub fn avg_wlog(&self, i: &DyadicInterval) -> f64 {
        self.avg_wlogw[i.level as usize][i.index]
    }

    /// `Delta_I w = m_{I+} w - m_{I-} w` from the cache.
    pub fn delta(&self, i: &DyadicInterval) -> f64 {
        let j = i.level as usize + 1;
        self.avg_w[j][2 * i.index] - self.avg_w[j][2 * i.index + 1]
    }

    pub(crate) fn avg_levels(&self) -> &[Vec<f64>] {
        &self.avg_w
    }

    pub(crate) fn avg_inv_levels(&self) -> &[Vec<f64>] {
        &self.avg_winv
    }

    pub(crate) fn avg_log_levels(&self) -> &[Vec<f64>] {
        &self.avg_logw
    }

    pub(crate) fn avg_wlog_levels(&self) -> &[Vec<f64>] {
        &self.avg_wlogw
    }

    /// `[w]_{A_2^d} = sup_I m_I w m_I(w^-1)` over all intervals, cells
    /// included.
    pub fn a2_constant(&self) -> f64 {
        self.a2_constant_with_witness().0
    }

    pub fn a2_constant_with_witness(&self) -> (f64, DyadicInterval) {
        max_over_all_intervals(self.depth(), |j, k| {
            self.avg_w[j][k] * self.avg_winv[j][k]
        })
    }

    /// `[w]_{A_infty^d} = sup_I m_I w exp(-m_I(log w))`.
    pub fn ainfty_constant(&self) -> f64 {
        self.ainfty_constant_with_witness().0
    }

    pub fn ainfty_constant_with_witness(&self) -> (f64, DyadicInterval) {
        max_over_all_intervals(self.depth(), |j, k| {
            self.avg_w[j][k] * (-self.avg_logw[j][k]).exp()
        })
    }

    /// `[w]_{RH_1^d} = sup_I m_I((w/m_I w) log(w/m_I w))`, evaluated from the
    /// caches as `[m_I(w log w) - m_I w log m_I w] / m_I w`.
    pub fn rh1_constant(&self) -> f64 {
        self.rh1_constant_with_witness().0
    }

    pub fn rh1_constant_with_witness(&self) -> (f64, DyadicInterval) {
        max_over_all_intervals(self.depth(), |j, k| {
            let m = self.avg_w[j][k];
            (self.avg_wlogw[j][k] - m * m.ln()) / m
        })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Weight::new(CellVector::from_file(path)?)
    }

    pub fn to_file(&self, path: &std::path::Path) -> Result<()> {
        self.cells.to_file(path)
    }
}

fn max_over_all_intervals(depth: u32, value: impl Fn(usize, usize) -> f64) -> (f64, DyadicInterval) {
    let mut best = f64::NEG_INFINITY;
    let mut witness = DyadicInterval::ROOT;
    for j in 0..=depth as usize {
        for k in 0..(1usize << j) {
            let v = value(j, k);
            if v > best {
                best = v;
                witness = DyadicInterval::new(j as u32, k);
            }
        }
    }
    (best, witness)
}

/// A two-weight pair `(v, u)`; `v` is stored through its reciprocal `v^-1`,
/// which is the quantity every condition references.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPair {
    v_inv: Weight,
    u: Weight,
}

impl WeightPair {
    pub fn new(v_inv: Weight, u: Weight) -> Result<Self> {
        crate::tree::check_depths(v_inv.depth(), u.depth())?;
        Ok(WeightPair { v_inv, u })
    }

    pub fn depth(&self) -> u32 {
        self.u.depth()
    }

    pub fn v_inv(&self) -> &Weight {
        &self.v_inv
    }

    pub fn u(&self) -> &Weight {
        &self.u
    }

    /// `[v,u]_{A_2^d} = sup_I m_I(v^-1) m_I u`.
    pub fn joint_a2_constant(&self) -> f64 {
        self.joint_a2_constant_with_witness().0
    }

    pub fn joint_a2_constant_with_witness(&self) -> (f64, DyadicInterval) {
        max_over_all_intervals(self.depth(), |j, k| {
            self.v_inv.avg_levels()[j][k] * self.u.avg_levels()[j][k]
        })
    }
}

/// Weight generator families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    Constant { value: f64 },
    /// Top-down multiplicative martingale: child averages `m_I (1 +- eps_I)`
    /// with `|eps_I| <= delta < 1`.
    Cascade { delta: f64 },
    /// Cell value = exact cell average of `x^alpha`, `alpha in (-1, 1)`.
    Power { alpha: f64 },
}

pub fn generate_weight(depth: u32, kind: WeightKind, rng: &mut impl Rng) -> Result<Weight> {
    DyadicTree::new(depth)?;
    let cells = match kind {
        WeightKind::Constant { value } => {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidValue(format!(
                    "constant weight must be positive, got {value}"
                )));
            }
            CellVector::constant(depth, value)
        }
        WeightKind::Cascade { delta } => {
            if !(0.0..1.0).contains(&delta) {
                return Err(Error::InvalidValue(format!(
                    "cascade delta must lie in [0,1), got {delta}"
                )));
            }
            let mut level = vec![1.0f64];
            for _ in 0..depth {
                let mut next = vec![0.0; level.len() * 2];
                for (k, &m) in level.iter().enumerate() {
                    let eps = rng.gen_range(-delta..=delta);
                    next[2 * k] = m * (1.0 + eps);
                    next[2 * k + 1] = m * (1.0 - eps);
                }
                level = next;
            }
            CellVector::new(
                depth,
                level
                    .into_iter()
                    .map(|v| v.clamp(WEIGHT_CLAMP.0, WEIGHT_CLAMP.1))
                    .collect(),
            )?
        }
        WeightKind::Power { alpha } => {
            if !(-1.0..1.0).contains(&alpha) {
                return Err(Error::InvalidValue(format!(
                    "power exponent must lie in (-1,1), got {alpha}"
                )));
            }
            let n = 1usize << depth;
            let h = 1.0 / n as f64;
            let values = (0..n)
                .map(|k| {
                    if alpha == 0.0 {
                        1.0
                    } else {
                        let a = k as f64 * h;
                        let b = (k + 1) as f64 * h;
                        let a1 = alpha + 1.0;
                        ((b.powf(a1) - a.powf(a1)) / (a1 * h)).clamp(WEIGHT_CLAMP.0, WEIGHT_CLAMP.1)
                    }
                })
                .collect();
            CellVector::new(depth, values)?
        }
    };
    Weight::new(cells)
}

/// A nonnegative sequence over the internal intervals of a tree.
#[derive(Debug, Clone, PartialEq)]
pub struct CarlesonSequence {
    depth: u32,
    // [level][index], levels 0..depth
    values: Vec<Vec<f64>>,
}

impl CarlesonSequence {
    pub fn zeros(depth: u32) -> Result<Self> {
        DyadicTree::new(depth)?;
        Ok(CarlesonSequence {
            depth,
            values: (0..depth).map(|j| vec![0.0; 1usize << j]).collect(),
        })
    }

    pub fn from_levels(depth: u32, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != depth as usize
            || values
                .iter()
                .enumerate()
                .any(|(j, l)| l.len() != (1usize << j))
        {
            return Err(Error::InvalidValue(
                "Carleson sequence shape does not match tree".into(),
            ));
        }
        for level in &values {
            for &v in level {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidValue(format!(
                        "Carleson sequence entries must be nonnegative, got {v}"
                    )));
                }
            }
        }
        Ok(CarlesonSequence { depth, values })
    }

    /// `lambda_I ~ U[0, |I|]`, a natural normalized random family.
    pub fn random(depth: u32, rng: &mut impl Rng) -> Result<Self> {
        let values = (0..depth)
            .map(|j| {
                let len = 0.5_f64.powi(j as i32);
                (0..(1usize << j)).map(|_| rng.gen_range(0.0..=len)).collect()
            })
            .collect();
        CarlesonSequence::from_levels(depth, values)
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn get(&self, i: &DyadicInterval) -> f64 {
        self.values[i.level as usize][i.index]
    }

    pub fn set(&mut self, i: &DyadicInterval, v: f64) -> Result<()> {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidValue(format!(
                "Carleson sequence entries must be nonnegative, got {v}"
            )));
        }
        self.values[i.level as usize][i.index] = v;
        Ok(())
    }

    pub(crate) fn levels(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// The Carleson constant `sup_J (1/|J|) sum_{I in D(J)} lambda_I`, with
    /// subtree sums built in one bottom-up pass.
    pub fn carleson_constant(&self) -> f64 {
        self.carleson_constant_with_witness().0
    }

    pub fn carleson_constant_with_witness(&self) -> (f64, DyadicInterval) {
        let sums = subtree_sums(self.depth, &self.values);
        let mut best = f64::NEG_INFINITY;
        let mut witness = DyadicInterval::ROOT;
        for j in 0..self.depth as usize {
            let inv_len = (1u64 << j) as f64;
            for k in 0..(1usize << j) {
                let v = sums[j][k] * inv_len;
                if v > best {
                    best = v;
                    witness = DyadicInterval::new(j as u32, k);
                }
            }
        }
        (best, witness)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn w21() -> Weight {
        Weight::new(CellVector::new(1, vec![2.0, 1.0]).unwrap()).unwrap()
    }

    #[test]
    fn rejects_nonpositive_cells() {
        assert!(Weight::new(CellVector::new(1, vec![1.0, 0.0]).unwrap()).is_err());
        assert!(Weight::new(CellVector::new(1, vec![1.0, -2.0]).unwrap()).is_err());
        assert!(Weight::new(CellVector::new(1, vec![1.0, f64::INFINITY]).unwrap()).is_err());
    }

    #[test]
    fn a2_examples() {
        assert_eq!(Weight::constant(3, 1.0).unwrap().a2_constant(), 1.0);
        // root: 1.5 * 0.75 = 9/8, cells: 1
        assert_abs_diff_eq!(w21().a2_constant(), 9.0 / 8.0, epsilon = 1e-15);
    }

    #[test]
    fn a2_symmetric_under_inversion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let w = generate_weight(5, WeightKind::Cascade { delta: 0.5 }, &mut rng).unwrap();
            assert_abs_diff_eq!(
                w.a2_constant(),
                w.inverse().a2_constant(),
                epsilon = 1e-9 * w.a2_constant()
            );
        }
    }

    #[test]
    fn joint_a2_examples() {
        let w = w21();
        let pair = WeightPair::new(w.inverse(), w.clone()).unwrap();
        assert_abs_diff_eq!(pair.joint_a2_constant(), w.a2_constant(), epsilon = 1e-15);
        // v^-1 = 1, u = [2,1]: sup over I of m_I u; cells give 2
        let pair2 = WeightPair::new(Weight::constant(1, 1.0).unwrap(), w21()).unwrap();
        assert_abs_diff_eq!(pair2.joint_a2_constant(), 2.0, epsilon = 1e-15);
        let trivial = WeightPair::new(
            Weight::constant(2, 1.0).unwrap(),
            Weight::constant(2, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(trivial.joint_a2_constant(), 1.0);
    }

    #[test]
    fn ainfty_examples() {
        assert_abs_diff_eq!(
            Weight::constant(2, 4.2).unwrap().ainfty_constant(),
            1.0,
            epsilon = 1e-12
        );
        // max(1, 1.5 * e^{-ln(2)/2}) = 1.5/sqrt(2)
        assert_abs_diff_eq!(
            w21().ainfty_constant(),
            1.5 / 2.0_f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn ainfty_below_a2() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let w = generate_weight(6, WeightKind::Cascade { delta: 0.6 }, &mut rng).unwrap();
            let a2 = w.a2_constant();
            let ai = w.ainfty_constant();
            assert!(ai <= a2 + 1e-12 * a2, "ainfty {ai} > a2 {a2}");
            assert!(ai >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn rh1_examples() {
        assert_abs_diff_eq!(
            Weight::constant(2, 3.0).unwrap().rh1_constant(),
            0.0,
            epsilon = 1e-12
        );
        // (1/2)[(4/3)ln(4/3) + (2/3)ln(2/3)]
        let expected = 0.5
            * ((4.0 / 3.0) * (4.0f64 / 3.0).ln() + (2.0 / 3.0) * (2.0f64 / 3.0).ln());
        assert_abs_diff_eq!(w21().rh1_constant(), expected, epsilon = 1e-12);
        assert!((expected - 0.05663).abs() < 1e-4);
    }

    #[test]
    fn jensen_and_nesting_on_generated_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in [
            WeightKind::Cascade { delta: 0.4 },
            WeightKind::Power { alpha: 0.5 },
            WeightKind::Power { alpha: -0.5 },
        ] {
            let w = generate_weight(6, kind, &mut rng).unwrap();
            for i in w.tree().all_intervals() {
                assert!(w.avg(&i) * w.avg_inv(&i) >= 1.0 - 1e-12);
            }
            for i in w.tree().internal_intervals() {
                let l = i.left_child();
                let r = i.right_child();
                for f in [
                    Weight::avg as fn(&Weight, &DyadicInterval) -> f64,
                    Weight::avg_inv,
                    Weight::avg_log,
                    Weight::avg_wlog,
                ] {
                    assert_abs_diff_eq!(
                        f(&w, &i),
                        0.5 * (f(&w, &l) + f(&w, &r)),
                        epsilon = 1e-10 * f(&w, &i).abs().max(1.0)
                    );
                }
            }
        }
    }

    #[test]
    fn power_weight_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w0 = generate_weight(6, WeightKind::Power { alpha: 0.0 }, &mut rng).unwrap();
        assert_eq!(w0.a2_constant(), 1.0);
        // a2 strictly increasing in L and alpha for the power family
        let mut prev = 1.0;
        for depth in [4, 6, 8, 10] {
            let w = generate_weight(depth, WeightKind::Power { alpha: 0.5 }, &mut rng).unwrap();
            let a2 = w.a2_constant();
            assert!(a2 > prev, "a2 {a2} not increasing at depth {depth}");
            prev = a2;
        }
        let mut prev = 1.0;
        for alpha in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let w = generate_weight(8, WeightKind::Power { alpha }, &mut rng).unwrap();
            let a2 = w.a2_constant();
            assert!(a2 > prev, "a2 {a2} not increasing at alpha {alpha}");
            prev = a2;
        }
    }

    #[test]
    fn cascade_reproducible_per_seed() {
        let gen = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            generate_weight(8, WeightKind::Cascade { delta: 0.3 }, &mut rng).unwrap()
        };
        assert_eq!(gen(42), gen(42));
        assert_ne!(gen(42), gen(43));
        assert!(gen(42).a2_constant().is_finite());
    }

    #[test]
    fn invalid_generator_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(generate_weight(4, WeightKind::Cascade { delta: 1.0 }, &mut rng).is_err());
        assert!(generate_weight(4, WeightKind::Power { alpha: 1.0 }, &mut rng).is_err());
        assert!(generate_weight(4, WeightKind::Constant { value: 0.0 }, &mut rng).is_err());
    }

    #[test]
    fn carleson_examples() {
        let depth = 5;
        // lambda_I = |I|: constant = depth (one unit per level of the root subtree)
        let values = (0..depth)
            .map(|j| vec![0.5_f64.powi(j as i32); 1usize << j])
            .collect();
        let lam = CarlesonSequence::from_levels(depth, values).unwrap();
        assert_abs_diff_eq!(lam.carleson_constant(), depth as f64, epsilon = 1e-12);

        assert_eq!(
            CarlesonSequence::zeros(depth).unwrap().carleson_constant(),
            0.0
        );

        let mut root_only = CarlesonSequence::zeros(depth).unwrap();
        root_only.set(&DyadicInterval::ROOT, 1.0).unwrap();
        assert_eq!(root_only.carleson_constant(), 1.0);
    }

    #[test]
    fn carleson_scan_oracle() {
        // brute-force subtree scan agrees with the bottom-up pass
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let depth = 6;
        let lam = CarlesonSequence::random(depth, &mut rng).unwrap();
        let tree = DyadicTree::new(depth).unwrap();
        let mut best = f64::NEG_INFINITY;
        for j_int in tree.internal_intervals() {
            let mut total = 0.0;
            for i in tree.internal_intervals() {
                if j_int.contains(&i) {
                    total += lam.get(&i);
                }
            }
            best = best.max(total / j_int.length());
        }
        assert_abs_diff_eq!(lam.carleson_constant(), best, epsilon = 1e-12);
    }

    #[test]
    fn carleson_rejects_negative() {
        let mut values: Vec<Vec<f64>> = (0..3).map(|j| vec![0.0; 1usize << j]).collect();
        values[1][0] = -0.5;
        assert!(CarlesonSequence::from_levels(3, values).is_err());
    }
}
