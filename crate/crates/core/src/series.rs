//! Resolution changes for time series.

use crate::error::CoreError;

/// How a series behaves under temporal aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    /// Energy quantities: blocks are summed.
    Demand,
    /// Per-unit quantities such as availability: blocks are averaged.
    CapacityFactor,
}

/// Aggregate `series` into blocks of `factor` consecutive values.
///
/// Demand-like series conserve energy (blocks summed); capacity-factor
/// series average. `factor` must divide the series length.
pub fn aggregate_series(
    series: &[f64],
    factor: usize,
    kind: SeriesKind,
) -> Result<Vec<f64>, CoreError> {
    if factor == 0 || series.len() % factor != 0 {
        return Err(CoreError::LengthMismatch {
            len: series.len(),
            factor,
        });
    }
    let out = series
        .chunks_exact(factor)
        .map(|chunk| {
            let sum: f64 = chunk.iter().sum();
            match kind {
                SeriesKind::Demand => sum,
                SeriesKind::CapacityFactor => sum / factor as f64,
            }
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demand_blocks_are_summed() {
        let out = aggregate_series(&[1.0, 1.0, 1.0, 1.0], 4, SeriesKind::Demand).unwrap();
        assert_eq!(out, vec![4.0]);
    }

    #[test]
    fn capacity_factor_blocks_are_averaged() {
        let out = aggregate_series(&[0.5, 0.5, 0.5, 0.5], 4, SeriesKind::CapacityFactor).unwrap();
        assert_eq!(out, vec![0.5]);
    }

    #[test]
    fn indivisible_length_is_rejected() {
        let err = aggregate_series(&[0.0; 10], 4, SeriesKind::Demand).unwrap_err();
        assert!(matches!(err, CoreError::LengthMismatch { len: 10, factor: 4 }));
    }

    #[test]
    fn energy_is_conserved_for_demand() {
        let series: Vec<f64> = (0..720).map(|i| (i as f64 * 0.37).sin().abs() * 3.5).collect();
        let total: f64 = series.iter().sum();
        for factor in [1, 2, 4, 24, 72] {
            let agg = aggregate_series(&series, factor, SeriesKind::Demand).unwrap();
            let agg_total: f64 = agg.iter().sum();
            assert!(
                (total - agg_total).abs() <= 1e-9 * total.abs(),
                "factor {factor}: {total} vs {agg_total}"
            );
        }
    }
}
