//! Piecewise-linear empirical CDF transform and its inverse.
//!
//! Knots sit at the sorted distinct training values; the k-th of n distinct
//! values (1-based) gets ordinate `k / (n + 1)`, which keeps the image
//! strictly inside (0, 1) so the inverse of a sigmoid output is always
//! defined. Evaluation clamps outside the knot range: the forward map to the
//! boundary ordinates, the inverse to the boundary knots.

use super::{FeatureGridSpec, FEATURE_KIND_COUNT};

#[derive(Debug, thiserror::Error)]
pub enum CdfError {
    #[error("need at least 2 distinct finite values to fit a CDF, got {0}")]
    DegenerateDistribution(usize),

    #[error("non-finite value {0} in CDF training data")]
    NonFinite(f64),

    #[error("coordinate {coordinate}: {source}")]
    Coordinate {
        coordinate: usize,
        #[source]
        source: Box<CdfError>,
    },
}

/// Strictly increasing piecewise-linear CDF approximation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EmpiricalCdf {
    knots: Vec<f64>,
    ordinates: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn fit(values: &[f64]) -> Result<Self, CdfError> {
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(CdfError::NonFinite(bad));
        }
        let mut knots: Vec<f64> = values.to_vec();
        knots.sort_unstable_by(f64::total_cmp);
        knots.dedup();
        if knots.len() < 2 {
            return Err(CdfError::DegenerateDistribution(knots.len()));
        }
        let n = knots.len() as f64;
        let ordinates = (1..=knots.len()).map(|k| k as f64 / (n + 1.0)).collect();
        Ok(Self { knots, ordinates })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn min_knot(&self) -> f64 {
        self.knots[0]
    }

    pub fn max_knot(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Forward map. Exact at knots; linear between; clamped to the boundary
    /// ordinates outside the knot range.
    pub fn transform(&self, x: f64) -> f64 {
        let n = self.knots.len();
        if x <= self.knots[0] {
            return self.ordinates[0];
        }
        if x >= self.knots[n - 1] {
            return self.ordinates[n - 1];
        }
        // first index with knot >= x; x is strictly inside the range here
        let hi = self.knots.partition_point(|&k| k < x);
        if self.knots[hi] == x {
            return self.ordinates[hi];
        }
        let lo = hi - 1;
        let t = (x - self.knots[lo]) / (self.knots[hi] - self.knots[lo]);
        self.ordinates[lo] + t * (self.ordinates[hi] - self.ordinates[lo])
    }

    /// Inverse map. Exact at knot ordinates; clamped to the boundary knots
    /// outside the ordinate range, so any input in (0, 1) yields a finite
    /// value inside the training range.
    pub fn inverse(&self, p: f64) -> f64 {
        let n = self.ordinates.len();
        if p <= self.ordinates[0] {
            return self.knots[0];
        }
        if p >= self.ordinates[n - 1] {
            return self.knots[n - 1];
        }
        let hi = self.ordinates.partition_point(|&o| o < p);
        if self.ordinates[hi] == p {
            return self.knots[hi];
        }
        let lo = hi - 1;
        let t = (p - self.ordinates[lo]) / (self.ordinates[hi] - self.ordinates[lo]);
        self.knots[lo] + t * (self.knots[hi] - self.knots[lo])
    }
}

/// Whether input CDFs are fit per tensor cell or pooled per feature kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdfGranularity {
    /// One CDF per (kind, tau, window) coordinate.
    PerCell,
    /// One CDF per feature kind, fit on all of that kind's cells pooled.
    PerFeatureKind,
}

/// Fitted CDFs for every input coordinate of a tensor layout.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InputCdfSet {
    cdfs: Vec<EmpiricalCdf>,
    /// coordinate -> index into `cdfs`
    col_map: Vec<usize>,
}

impl InputCdfSet {
    /// Fit on training rows laid out as `rows x n_cells` in row-major order.
    pub fn fit(
        rows: &[f64],
        n_cells: usize,
        spec: &FeatureGridSpec,
        granularity: CdfGranularity,
    ) -> Result<Self, CdfError> {
        assert_eq!(n_cells, spec.n_cells());
        assert_eq!(rows.len() % n_cells, 0, "row data not a multiple of the cell count");
        let n_rows = rows.len() / n_cells;
        match granularity {
            CdfGranularity::PerCell => {
                let mut cdfs = Vec::with_capacity(n_cells);
                for c in 0..n_cells {
                    let column: Vec<f64> = (0..n_rows).map(|r| rows[r * n_cells + c]).collect();
                    let cdf = EmpiricalCdf::fit(&column).map_err(|e| CdfError::Coordinate {
                        coordinate: c,
                        source: Box::new(e),
                    })?;
                    cdfs.push(cdf);
                }
                Ok(Self { cdfs, col_map: (0..n_cells).collect() })
            }
            CdfGranularity::PerFeatureKind => {
                let per_kind = n_cells / FEATURE_KIND_COUNT;
                let mut cdfs = Vec::with_capacity(FEATURE_KIND_COUNT);
                for kind in 0..FEATURE_KIND_COUNT {
                    let mut pooled = Vec::with_capacity(n_rows * per_kind);
                    for r in 0..n_rows {
                        let base = r * n_cells + kind * per_kind;
                        pooled.extend_from_slice(&rows[base..base + per_kind]);
                    }
                    let cdf = EmpiricalCdf::fit(&pooled).map_err(|e| CdfError::Coordinate {
                        coordinate: kind,
                        source: Box::new(e),
                    })?;
                    cdfs.push(cdf);
                }
                let col_map = (0..n_cells).map(|c| c / per_kind).collect();
                Ok(Self { cdfs, col_map })
            }
        }
    }

    /// Transform one flattened tensor in place.
    pub fn transform_row(&self, row: &mut [f64]) {
        assert_eq!(row.len(), self.col_map.len());
        for (c, v) in row.iter_mut().enumerate() {
            *v = self.cdfs[self.col_map[c]].transform(*v);
        }
    }

    pub fn n_coordinates(&self) -> usize {
        self.col_map.len()
    }
}

/// Fitted CDFs for the three target coordinates (alpha, beta, residual).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TargetCdfSet {
    pub alpha: EmpiricalCdf,
    pub beta: EmpiricalCdf,
    pub residual: EmpiricalCdf,
}

impl TargetCdfSet {
    pub fn fit(targets: &[[f64; 3]]) -> Result<Self, CdfError> {
        let col = |k: usize| -> Vec<f64> { targets.iter().map(|t| t[k]).collect() };
        let fit_coord = |k: usize| {
            EmpiricalCdf::fit(&col(k)).map_err(|e| CdfError::Coordinate {
                coordinate: k,
                source: Box::new(e),
            })
        };
        Ok(Self { alpha: fit_coord(0)?, beta: fit_coord(1)?, residual: fit_coord(2)? })
    }

    pub fn transform(&self, t: [f64; 3]) -> [f64; 3] {
        [
            self.alpha.transform(t[0]),
            self.beta.transform(t[1]),
            self.residual.transform(t[2]),
        ]
    }

    pub fn inverse(&self, p: [f64; 3]) -> [f64; 3] {
        [self.alpha.inverse(p[0]), self.beta.inverse(p[1]), self.residual.inverse(p[2])]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_point_interpolation() {
        let cdf = EmpiricalCdf::fit(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        // ordinates are 1/5..4/5; midpoint of the 2-3 segment is 0.5
        assert!((cdf.transform(2.5) - 0.5).abs() < 1e-15);
        assert!((cdf.transform(2.0) - 0.4).abs() < 1e-15);
        assert!((cdf.transform(1.0) - 0.2).abs() < 1e-15);
        // clamped outside
        assert_eq!(cdf.transform(0.0), 0.2);
        assert_eq!(cdf.transform(9.0), 0.8);
        assert_eq!(cdf.inverse(0.01), 1.0);
        assert_eq!(cdf.inverse(0.99), 4.0);
    }

    #[test]
    fn roundtrip_on_training_values_is_exact() {
        let values = [3.0, -1.5, 2.0, 2.0, 7.25, 0.125];
        let cdf = EmpiricalCdf::fit(&values).unwrap();
        for &v in &values {
            assert_eq!(cdf.inverse(cdf.transform(v)).to_bits(), v.to_bits());
        }
    }

    #[test]
    fn transformed_training_sample_is_nearly_uniform() {
        // deterministic irrational-rotation sample; all values distinct
        let values: Vec<f64> = (0..500).map(|k| ((k as f64) * 0.61803398875) % 1.0).collect();
        let cdf = EmpiricalCdf::fit(&values).unwrap();
        let mut transformed: Vec<f64> = values.iter().map(|&v| cdf.transform(v)).collect();
        transformed.sort_by(f64::total_cmp);
        let n_distinct = cdf.knots().len() as f64;
        let n = transformed.len() as f64;
        let mut worst: f64 = 0.0;
        for (k, &u) in transformed.iter().enumerate() {
            let above = ((k + 1) as f64 / n - u).abs();
            let below = (k as f64 / n - u).abs();
            worst = worst.max(above).max(below);
        }
        assert!(worst <= 2.0 / (n_distinct + 1.0), "deviation {worst} too large");
    }

    #[test]
    fn degenerate_distribution_rejected() {
        assert!(matches!(
            EmpiricalCdf::fit(&[2.0, 2.0, 2.0]),
            Err(CdfError::DegenerateDistribution(1))
        ));
        assert!(EmpiricalCdf::fit(&[]).is_err());
        assert!(matches!(EmpiricalCdf::fit(&[1.0, f64::NAN]), Err(CdfError::NonFinite(_))));
    }

    #[test]
    fn refit_is_deterministic() {
        let values: Vec<f64> = (0..100).map(|k| ((k * 37) % 100) as f64 * 0.31).collect();
        let a = EmpiricalCdf::fit(&values).unwrap();
        let b = EmpiricalCdf::fit(&values).unwrap();
        assert_eq!(a, b);
        for k in 0..200 {
            let x = k as f64 * 0.17 - 3.0;
            assert_eq!(a.transform(x).to_bits(), b.transform(x).to_bits());
        }
    }

    proptest! {
        #[test]
        fn monotone_and_invertible(
            mut values in proptest::collection::vec(-1e3f64..1e3, 5..60),
            probe in -1.2e3f64..1.2e3,
        ) {
            values.dedup_by(|a, b| a == b);
            prop_assume!({
                let mut v = values.clone();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v.len() >= 2
            });
            let cdf = EmpiricalCdf::fit(&values).unwrap();
            // monotone
            let eps = 1e-6;
            prop_assert!(cdf.transform(probe) <= cdf.transform(probe + eps) + 1e-15);
            // strict inside the knot range
            if probe > cdf.min_knot() && probe + eps < cdf.max_knot() {
                prop_assert!(cdf.transform(probe) < cdf.transform(probe + eps));
            }
            // roundtrip for in-range values
            if probe >= cdf.min_knot() && probe <= cdf.max_knot() {
                let back = cdf.inverse(cdf.transform(probe));
                prop_assert!((back - probe).abs() <= 1e-9 * probe.abs().max(1.0));
            }
            // image strictly inside (0, 1)
            let p = cdf.transform(probe);
            prop_assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn validation_values_clamp_to_training_range() {
        let cdf = EmpiricalCdf::fit(&[1.0, 2.0, 3.0]).unwrap();
        let above = cdf.transform(10.0);
        assert_eq!(above, 3.0 / 4.0); // max ordinate
        assert_eq!(cdf.inverse(above), 3.0);
    }

    #[test]
    fn per_kind_granularity_pools_cells() {
        let spec = FeatureGridSpec::new(vec![1, 2], vec![2, 3]).unwrap();
        let n_cells = spec.n_cells();
        // two rows of distinct values
        let rows: Vec<f64> = (0..2 * n_cells).map(|k| k as f64).collect();
        let per_cell = InputCdfSet::fit(&rows, n_cells, &spec, CdfGranularity::PerCell).unwrap();
        assert_eq!(per_cell.cdfs.len(), n_cells);
        let per_kind =
            InputCdfSet::fit(&rows, n_cells, &spec, CdfGranularity::PerFeatureKind).unwrap();
        assert_eq!(per_kind.cdfs.len(), FEATURE_KIND_COUNT);
        let mut row: Vec<f64> = (0..n_cells).map(|k| k as f64).collect();
        per_kind.transform_row(&mut row);
        assert!(row.iter().all(|&p| p > 0.0 && p < 1.0));
    }
}
