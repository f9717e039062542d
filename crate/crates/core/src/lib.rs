pub mod bitset;
pub mod bowen;
pub mod cover;
pub mod dynamics;
pub mod error;
pub mod nilpotent;
pub mod scalar;
pub mod setcover;
pub mod measure;
pub mod linear;
pub mod config;
pub mod experiments;

pub use error::{EntropyError, Result};

pub type MapSpecF64 = dynamics::MapSpec<f64>;
pub type MapSpecF32 = dynamics::MapSpec<f32>;
pub type StatePointF64 = dynamics::StatePoint<f64>;
pub type SquareMatrixF64 = dynamics::SquareMatrix<f64>;
pub type SampleRegionF64 = bowen::SampleRegion<f64>;
pub type CoveringSpecF64 = cover::CoveringSpec<f64>;
pub type InvariantMeasureF64 = measure::InvariantMeasure<f64>;
pub type FinitePartitionF64 = measure::FinitePartition<f64>;
pub type JordanTripleF64 = linear::JordanTriple<f64>;
/// Exact Heisenberg arithmetic over the rationals.
pub type HeisenbergGroupQ = nilpotent::HeisenbergGroupElement<num_rational::Ratio<i128>>;
pub type HeisenbergAlgebraQ = nilpotent::HeisenbergAlgebraElement<num_rational::Ratio<i128>>;
