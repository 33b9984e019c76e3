//! Estimators of the loading matrix from (price change, factor change) pairs.

use nalgebra::DMatrix;

/// Loading estimate, `n_stocks` rows of `n_factors` entries.
pub type Loading = Vec<Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    /// Joint least squares over all given pairs.
    LeastSquares,
    /// One simple regression through the origin per (stock, factor) pair.
    Correlation,
    /// Least squares with an L2 penalty on RMS-standardized factors.
    Ridge { lambda: f64 },
}

fn matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let c = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j])
}

fn to_rows(m: &DMatrix<f64>) -> Loading {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Solve `a x = b` for symmetric positive semi-definite `a`, or None when
/// `a` is numerically singular.
fn solve_normal(a: DMatrix<f64>, b: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let k = a.nrows();
    let svd = a.svd(true, true);
    let top = svd.singular_values.max();
    if top <= 0.0 || svd.rank(top * 1e-10) < k {
        return None;
    }
    svd.solve(&b, top * 1e-12).ok()
}

/// Fit `dp ≈ W z` over paired rows. `dp` rows have one entry per stock, `z`
/// rows one per factor. Returns None when the data cannot identify `W`.
pub fn estimate(dp: &[Vec<f64>], z: &[Vec<f64>], estimator: Estimator) -> Option<Loading> {
    if dp.is_empty() || dp.len() != z.len() {
        return None;
    }
    let (y, x) = (matrix(dp), matrix(z));
    let k = x.ncols();
    match estimator {
        Estimator::LeastSquares => {
            let wt = solve_normal(x.transpose() * &x, x.transpose() * &y)?;
            Some(to_rows(&wt.transpose()))
        }
        Estimator::Correlation => {
            let d = y.ncols();
            let mut w = DMatrix::zeros(d, k);
            for f in 0..k {
                let col = x.column(f);
                let ss = col.dot(&col);
                if ss <= 0.0 {
                    return None;
                }
                for s in 0..d {
                    w[(s, f)] = y.column(s).dot(&col) / ss;
                }
            }
            Some(to_rows(&w))
        }
        Estimator::Ridge { lambda } => {
            let n = x.nrows() as f64;
            let scale: Vec<f64> = (0..k).map(|f| (x.column(f).norm_squared() / n).sqrt()).collect();
            if scale.iter().any(|s| *s <= 0.0) {
                return None;
            }
            let xs = DMatrix::from_fn(x.nrows(), k, |i, j| x[(i, j)] / scale[j]);
            let a = xs.transpose() * &xs + DMatrix::identity(k, k) * lambda;
            let wt_std = solve_normal(a, xs.transpose() * &y)?;
            let wt = DMatrix::from_fn(k, y.ncols(), |f, s| wt_std[(f, s)] / scale[f]);
            Some(to_rows(&wt.transpose()))
        }
    }
}

pub fn max_abs_error(a: &Loading, b: &Loading) -> f64 {
    a.iter().zip(b).flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max)
}
