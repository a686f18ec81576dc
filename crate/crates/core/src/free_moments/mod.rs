//! Exact limiting moments and densities from free probability.
//!
//! The fixed-`d` limit of `Δ` is the law of `d^{-1/2} Σ a_i ⊗ a_i` for free
//! `a_i`; its moments are sums over set partitions of squared mixed moments
//! of free variables, which in turn are sums over noncrossing partitions of
//! free cumulants. As `d` grows the limit becomes the semicircle law.

pub mod cumulants;
pub mod densities;
pub mod partitions;
pub mod quadrature;
pub mod tensor;

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

pub use cumulants::{free_cumulants_to_moments, moments_to_free_cumulants, CumulantSequence, MarginalLaw};
pub use densities::{km_density, km_dilated_cdf, km_dilated_density, semicircle_cdf, semicircle_density, DensitySpec};
pub use partitions::{
    catalan, enumerate_pair_partitions, enumerate_partitions, falling_factorial, is_noncrossing, nc2_count,
    partition_class_count, SetPartition,
};
pub use tensor::{
    free_word_moment, free_word_moment_from_cumulants, predict_limit_moments, tensor_convolution_moment, Regime,
    MAX_MOMENT_ORDER,
};

#[derive(Debug, Serialize)]
struct MomentRow<'a> {
    order: usize,
    predicted: f64,
    regime: &'a str,
}

/// Writes `order,predicted,regime` rows for `moments[p−1]`, `p = 1, 2, …`.
pub fn write_moment_table<W: Write>(out: W, regime: &str, moments: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (i, &predicted) in moments.iter().enumerate() {
        w.serialize(MomentRow { order: i + 1, predicted, regime })?;
    }
    w.flush()?;
    Ok(())
}
