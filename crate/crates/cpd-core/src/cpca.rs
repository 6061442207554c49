//! Composite PCA initialization for CP models.
//!
//! CPCA reads component estimates off a single grouped matricization of the
//! input tensor. For pairwise-symmetric order-2K tensors the grouping is the
//! first K modes, the matricization is symmetric PSD, and the spectrum is an
//! eigendecomposition (or, on the fast path, an SVD of the data matrix whose
//! Gram refolds to the tensor). For general order-N tensors any nonempty
//! proper mode subset works and the spectrum is an SVD. Per-mode factors are
//! then the dominant rank-one directions of the refolded spectral vectors.

use crate::error::{Error, Result};
use crate::model::CPDecomposition;
use crate::spectral::{top_eigs_sym, top_left_singular, top_svd};
use crate::tensor::{DenseTensor, Matrix};

/// Tolerance handed to the iterative eigen/SVD fallbacks for inputs above
/// the dense cutoff; the dense paths ignore it.
const SOLVE_TOL: f64 = 1e-12;

/// Result of a CPCA pass: the estimate plus the spectral intermediates.
#[derive(Debug, Clone)]
pub struct CPCAOutput {
    /// Estimated decomposition; weights descending, factor columns unit norm.
    pub estimate: CPDecomposition,
    /// Left spectral vectors of the grouped unfolding, one column per
    /// component, sign-normalized.
    pub u_hats: Matrix,
    /// Right singular vectors of the grouped unfolding (general path only).
    pub v_hats: Option<Matrix>,
    /// 1-based modes of the grouped unfolding, increasing.
    pub subset: Vec<usize>,
}

/// Minimum gap from any weight to the other weights and to zero. This is the
/// quantity that scales the CPCA perturbation bounds.
pub fn min_eigengap(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::InvalidArgument(
            "eigengap of an empty weight vector".into(),
        ));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("weight vector".into()));
    }
    let mut gap = f64::INFINITY;
    for (j, &wj) in weights.iter().enumerate() {
        let mut g = wj.abs();
        for (i, &wi) in weights.iter().enumerate() {
            if i != j {
                g = g.min((wi - wj).abs());
            }
        }
        gap = gap.min(g);
    }
    Ok(gap)
}

/// CPCA for pairwise-symmetric tensors: modes K+1..2K repeat modes 1..K, so
/// the grouped unfolding over the first half is symmetric and its top-r
/// eigenpairs carry the components.
pub fn cpca_symmetric(t: &DenseTensor, r: usize) -> Result<CPCAOutput> {
    let order = t.order();
    if order < 2 || order % 2 != 0 {
        return Err(Error::ShapeMismatch(format!(
            "pairwise-symmetric CPCA needs an even tensor order, got {order}"
        )));
    }
    let half = order / 2;
    for k in 0..half {
        if t.shape()[k] != t.shape()[half + k] {
            return Err(Error::ShapeMismatch(format!(
                "modes {} and {} have sizes {} and {}; tensor is not pairwise symmetric",
                k + 1,
                half + k + 1,
                t.shape()[k],
                t.shape()[half + k]
            )));
        }
    }
    let base_shape: Vec<usize> = t.shape()[..half].to_vec();
    let subset: Vec<usize> = (1..=half).collect();
    let m = t.unfold_group(&subset)?;
    let eig = top_eigs_sym(&m, r, SOLVE_TOL)?;
    symmetric_output(eig.values, eig.vectors, &base_shape)
}

/// Fast path for covariance models: feed the d x n data matrix whose Gram
/// refolds to the covariance tensor. Squared singular values equal the Gram
/// eigenvalues and left singular vectors equal its eigenvectors, so this
/// agrees with `cpca_symmetric` on the refolded Gram.
pub fn cpca_symmetric_data(data: &Matrix, base_shape: &[usize], r: usize) -> Result<CPCAOutput> {
    if base_shape.is_empty() || base_shape.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "sample shape {base_shape:?} must be nonempty with positive sizes"
        )));
    }
    let d: usize = base_shape.iter().product();
    if data.rows() != d {
        return Err(Error::ShapeMismatch(format!(
            "data matrix has {} rows but the sample shape {:?} vectorizes to {}",
            data.rows(),
            base_shape,
            d
        )));
    }
    let svd = top_svd(data, r, SOLVE_TOL)?;
    let values: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    symmetric_output(values, svd.u, base_shape)
}

fn symmetric_output(values: Vec<f64>, u_hats: Matrix, base_shape: &[usize]) -> Result<CPCAOutput> {
    check_positive_spectrum(&values)?;
    let half = base_shape.len();
    let r = values.len();
    let mut factors: Vec<Matrix> = base_shape.iter().map(|&dk| Matrix::zeros(dk, r)).collect();
    for j in 0..r {
        let refolded = DenseTensor::from_vec(base_shape.to_vec(), u_hats.col(j).to_vec())?;
        for k in 0..half {
            let a = top_left_singular(&refolded.unfold(k + 1)?)?;
            factors[k].set_col(j, &a);
        }
    }
    let estimate = CPDecomposition::new(values, factors, true)?;
    Ok(CPCAOutput {
        estimate,
        u_hats,
        v_hats: None,
        subset: (1..=half).collect(),
    })
}

/// CPCA for general order-N tensors. When `subset` is absent the unfolding
/// subset S is chosen to maximize min(d_S, d/d_S), ties broken by smallest
/// |S| and then lexicographically, so runs are reproducible.
pub fn cpca_general(t: &DenseTensor, r: usize, subset: Option<&[usize]>) -> Result<CPCAOutput> {
    let n = t.order();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "general CPCA needs an order-3 or higher tensor, got order {n}"
        )));
    }
    let row_modes = match subset {
        Some(s) => validate_subset(s, n)?,
        None => auto_subset(t.shape()),
    };
    let col_modes: Vec<usize> = (1..=n).filter(|m| !row_modes.contains(m)).collect();
    let d_s: usize = row_modes.iter().map(|&m| t.shape()[m - 1]).product();
    let d_c: usize = col_modes.iter().map(|&m| t.shape()[m - 1]).product();
    if r > d_s.min(d_c) {
        return Err(Error::InvalidArgument(format!(
            "rank {r} exceeds min(d_S, d/d_S) = {} for subset {row_modes:?}",
            d_s.min(d_c)
        )));
    }
    let m = t.unfold_group(&row_modes)?;
    let svd = top_svd(&m, r, SOLVE_TOL)?;
    check_positive_spectrum(&svd.singular_values)?;
    let mut factors: Vec<Matrix> = t.shape().iter().map(|&dk| Matrix::zeros(dk, r)).collect();
    for j in 0..r {
        extract_side(&mut factors, t.shape(), &row_modes, svd.u.col(j), j)?;
        extract_side(&mut factors, t.shape(), &col_modes, svd.v.col(j), j)?;
    }
    let estimate = CPDecomposition::new(svd.singular_values.clone(), factors, false)?;
    Ok(CPCAOutput {
        estimate,
        u_hats: svd.u,
        v_hats: Some(svd.v),
        subset: row_modes,
    })
}

/// Refold one spectral vector over `modes` and pull the per-mode factor
/// columns out of its mode unfoldings.
fn extract_side(
    factors: &mut [Matrix],
    shape: &[usize],
    modes: &[usize],
    side: &[f64],
    j: usize,
) -> Result<()> {
    let side_shape: Vec<usize> = modes.iter().map(|&m| shape[m - 1]).collect();
    let refolded = DenseTensor::from_vec(side_shape, side.to_vec())?;
    for (pos, &mode) in modes.iter().enumerate() {
        let a = top_left_singular(&refolded.unfold(pos + 1)?)?;
        factors[mode - 1].set_col(j, &a);
    }
    Ok(())
}

/// Spectrum entries at or below this fraction of the leading one are treated
/// as numerically zero, i.e. the requested rank exceeds the matrix rank.
const RANK_TOL: f64 = 1e-12;

fn check_positive_spectrum(values: &[f64]) -> Result<()> {
    let scale = values.first().copied().unwrap_or(0.0);
    for (j, &v) in values.iter().enumerate() {
        if !(v > 0.0) || v <= scale * RANK_TOL {
            return Err(Error::InvalidArgument(format!(
                "rank {} exceeds the numerical rank of the unfolding: component {} has weight {v:.3e}",
                values.len(),
                j + 1
            )));
        }
    }
    Ok(())
}

fn validate_subset(subset: &[usize], order: usize) -> Result<Vec<usize>> {
    if subset.is_empty() || subset.len() >= order {
        return Err(Error::InvalidArgument(format!(
            "mode subset {subset:?} must be nonempty and proper for order {order}"
        )));
    }
    let mut modes = subset.to_vec();
    modes.sort_unstable();
    if modes.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(format!(
            "mode subset {subset:?} has duplicates"
        )));
    }
    if modes[0] < 1 || *modes.last().unwrap() > order {
        return Err(Error::ModeOutOfRange {
            mode: if modes[0] < 1 { modes[0] } else { *modes.last().unwrap() },
            order,
        });
    }
    Ok(modes)
}

fn auto_subset(shape: &[usize]) -> Vec<usize> {
    let n = shape.len();
    let total: usize = shape.iter().product();
    let mut best: Option<(usize, Vec<usize>)> = None;
    for mask in 1..(1usize << n) - 1 {
        let modes: Vec<usize> = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| i + 1)
            .collect();
        let d_s: usize = modes.iter().map(|&m| shape[m - 1]).product();
        let value = d_s.min(total / d_s);
        let better = match &best {
            None => true,
            Some((bv, bm)) => {
                value > *bv
                    || (value == *bv
                        && (modes.len() < bm.len()
                            || (modes.len() == bm.len() && modes < *bm)))
            }
        };
        if better {
            best = Some((value, modes));
        }
    }
    best.expect("order >= 3 has a proper nonempty subset").1
}
