//! Perfect dyadic operators on finite dyadic trees: exact four-operator
//! decomposition, closed-form `T(1)` and testing coefficients, weighted
//! condition batteries, and spectral norm measurement.

pub mod campaign;
pub mod conditions;
pub mod error;
pub mod kernel;
pub mod spectral;
pub mod tree;
pub mod weights;

pub use conditions::{
    apply_t0, buckley_sides, buckley_sides_all, check_bilinear_embedding, check_lemma_be,
    check_littleoo, check_t1_implication, check_testing_implication, operator_constants,
    two_weight_battery, two_weight_battery_ainfty, AinftyBatteryReport, BatteryReport,
    ConditionReport, EmbeddingReport, OperatorConstants,
};
pub use error::{Error, Result};
pub use kernel::{Component, KernelCoeffs, T1Coefficients};
pub use spectral::{weighted_norm, DenseOperator};
pub use tree::{CellVector, DyadicInterval, DyadicTree, HaarExpansion};
pub use weights::{generate_weight, CarlesonSequence, Weight, WeightKind, WeightPair};
