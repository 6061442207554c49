//! Ground-truth CP representations and synthetic data generators.
//!
//! Two data models are covered. The spiked covariance model draws i.i.d.
//! samples X_i = sum_j w_j f_ij (a_j1 x ... x a_jK) + E_i with standard
//! normal scores f_ij and N(0, sigma^2) noise entries; averaging X_i x X_i
//! over the batch yields an order-2K covariance tensor whose CP weights are
//! lambda_j = w_j^2 and whose mode K+k factor equals the mode-k factor (the
//! symmetric-pair layout). The general model adds i.i.d. Gaussian noise to a
//! fixed CP tensor of arbitrary order.
//!
//! All randomness flows through an explicit [`StreamRng`] so batches are
//! reproducible from (seed, stream) alone.

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::tensor::{outer, DenseTensor, Matrix};
use serde::{Deserialize, Serialize};

const UNIT_TOL: f64 = 1e-10;

/// A rank-r CP decomposition with unit-norm factor columns and positive
/// weights sorted in descending order.
///
/// When `symmetric_pair` is set the stored factors describe modes 1..=K of a
/// tensor of order 2K whose mode K+k factor duplicates the mode-k factor;
/// the weights are then the covariance-model lambda_j = w_j^2.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawDecomposition", into = "RawDecomposition")]
pub struct CPDecomposition {
    weights: Vec<f64>,
    factors: Vec<Matrix>,
    symmetric_pair: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawDecomposition {
    weights: Vec<f64>,
    factors: Vec<Matrix>,
    symmetric_pair: bool,
}

impl TryFrom<RawDecomposition> for CPDecomposition {
    type Error = Error;
    fn try_from(raw: RawDecomposition) -> Result<Self> {
        CPDecomposition::new(raw.weights, raw.factors, raw.symmetric_pair)
    }
}

impl From<CPDecomposition> for RawDecomposition {
    fn from(cp: CPDecomposition) -> Self {
        RawDecomposition {
            weights: cp.weights,
            factors: cp.factors,
            symmetric_pair: cp.symmetric_pair,
        }
    }
}

impl CPDecomposition {
    pub fn new(weights: Vec<f64>, factors: Vec<Matrix>, symmetric_pair: bool) -> Result<Self> {
        if weights.is_empty() || factors.is_empty() {
            return Err(Error::InvalidArgument(
                "decomposition needs at least one weight and one mode".into(),
            ));
        }
        let r = weights.len();
        for w in weights.windows(2) {
            if w[1] > w[0] {
                return Err(Error::InvalidArgument(format!(
                    "weights not sorted descending: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        for &w in &weights {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!("weight {w} not positive")));
            }
        }
        for (k, a) in factors.iter().enumerate() {
            if a.cols() != r {
                return Err(Error::ShapeMismatch(format!(
                    "mode {} factor has {} columns, expected rank {r}",
                    k + 1,
                    a.cols()
                )));
            }
            if a.rows() < 1 {
                return Err(Error::ShapeMismatch(format!("mode {} factor is empty", k + 1)));
            }
            for j in 0..r {
                let nrm = crate::tensor::norm2(a.col(j));
                if (nrm - 1.0).abs() > UNIT_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "mode {} column {} has norm {nrm}, expected 1",
                        k + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(CPDecomposition {
            weights,
            factors,
            symmetric_pair,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn symmetric_pair(&self) -> bool {
        self.symmetric_pair
    }

    /// Number of stored factor matrices (K for the symmetric-pair model).
    pub fn sample_order(&self) -> usize {
        self.factors.len()
    }

    /// Order of the composed tensor: 2K under the symmetric-pair layout.
    pub fn order(&self) -> usize {
        if self.symmetric_pair {
            2 * self.factors.len()
        } else {
            self.factors.len()
        }
    }

    /// Factor matrix of the composed tensor's `mode` (1-based), resolving the
    /// symmetric-pair duplication.
    pub fn mode_factor(&self, mode: usize) -> Result<&Matrix> {
        let n = self.order();
        if mode == 0 || mode > n {
            return Err(Error::ModeOutOfRange { mode, order: n });
        }
        let k = self.factors.len();
        let idx = if self.symmetric_pair && mode > k {
            mode - k - 1
        } else {
            mode - 1
        };
        Ok(&self.factors[idx])
    }

    /// Shape of the composed tensor.
    pub fn shape(&self) -> Vec<usize> {
        let base: Vec<usize> = self.factors.iter().map(|a| a.rows()).collect();
        if self.symmetric_pair {
            let mut s = base.clone();
            s.extend_from_slice(&base);
            s
        } else {
            base
        }
    }

    /// The same decomposition in plain layout: a symmetric-pair value gets its
    /// factor list duplicated across modes K+1..=2K, a plain value is cloned
    /// unchanged. Useful when comparing a general-form estimate against a
    /// covariance-model ground truth.
    pub fn expanded(&self) -> CPDecomposition {
        if !self.symmetric_pair {
            return self.clone();
        }
        let mut factors = self.factors.clone();
        factors.extend(self.factors.iter().cloned());
        CPDecomposition {
            weights: self.weights.clone(),
            factors,
            symmetric_pair: false,
        }
    }

    /// Dense tensor sum_j lambda_j (a_j1 x ... x a_jN).
    pub fn compose(&self) -> Result<DenseTensor> {
        let shape = self.shape();
        let mut t = DenseTensor::zeros(shape.clone());
        let n = self.order();
        for j in 0..self.rank() {
            let cols: Vec<&[f64]> = (1..=n)
                .map(|mode| self.mode_factor(mode).map(|a| a.col(j)))
                .collect::<Result<_>>()?;
            let basis = outer(&cols)?;
            t.axpy(self.weights[j], &basis)?;
        }
        Ok(t)
    }
}

/// A batch of i.i.d. order-K sample tensors with its generator provenance.
#[derive(Clone, Debug)]
pub struct SampleBatch {
    samples: Vec<DenseTensor>,
    sigma: f64,
    seed: u64,
    stream: u64,
}

impl SampleBatch {
    pub fn samples(&self) -> &[DenseTensor] {
        &self.samples
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn shape(&self) -> &[usize] {
        self.samples[0].shape()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

/// Random d x r matrix with unit columns and every pairwise inner product
/// exactly `theta`: A = Q C^{1/2} with Q a Haar-distributed orthonormal
/// frame and C the compound-symmetric matrix with unit diagonal and theta
/// off the diagonal. The resulting orthonormality defect is (r-1) theta.
pub fn gen_basis(d: usize, r: usize, theta: f64, rng: &mut StreamRng) -> Result<Matrix> {
    if r == 0 || r > d {
        return Err(Error::InvalidArgument(format!(
            "rank {r} outside 1..={d}"
        )));
    }
    if !(0.0..1.0).contains(&theta) || (r >= 2 && theta >= 1.0 / (r as f64 - 1.0)) {
        return Err(Error::InvalidArgument(format!(
            "coherence target {theta} infeasible for rank {r}"
        )));
    }
    // Haar frame: Gaussian matrix, modified Gram-Schmidt (positive diagonal)
    let mut q = Matrix::zeros(d, r);
    for x in q.data_mut().iter_mut() {
        *x = rng.next_gaussian();
    }
    for j in 0..r {
        for _pass in 0..2 {
            for i in 0..j {
                let c = crate::tensor::dot(q.col(i), q.col(j));
                let prev = q.col(i).to_vec();
                for (x, p) in q.col_mut(j).iter_mut().zip(prev.iter()) {
                    *x -= c * p;
                }
            }
        }
        let nrm = crate::tensor::norm2(q.col(j));
        if nrm < 1e-150 {
            return Err(Error::Numerical("degenerate random frame".into()));
        }
        for x in q.col_mut(j).iter_mut() {
            *x /= nrm;
        }
    }
    if r == 1 {
        return Ok(q);
    }
    // C^{1/2} = sqrt(1-theta) I + ((sqrt(1+(r-1)theta) - sqrt(1-theta))/r) 1 1^T
    let rf = r as f64;
    let a = (1.0 - theta).sqrt();
    let b = ((1.0 + (rf - 1.0) * theta).sqrt() - a) / rf;
    let mut root = Matrix::zeros(r, r);
    for j in 0..r {
        for i in 0..r {
            root.set(i, j, if i == j { a + b } else { b });
        }
    }
    q.matmul(&root)
}

/// Noiseless sample sum_j sqrt(lambda_j) scores[j] (a_j1 x ... x a_jK) for
/// fixed factor scores; the deterministic core of [`gen_spiked_samples`].
pub fn signal_sample(cp: &CPDecomposition, scores: &[f64]) -> Result<DenseTensor> {
    if !cp.symmetric_pair() {
        return Err(Error::InvalidArgument(
            "spiked samples need a symmetric-pair decomposition".into(),
        ));
    }
    if scores.len() != cp.rank() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores for rank {}",
            scores.len(),
            cp.rank()
        )));
    }
    let base: Vec<usize> = cp.factors().iter().map(|a| a.rows()).collect();
    let mut t = DenseTensor::zeros(base.clone());
    for j in 0..cp.rank() {
        let cols: Vec<&[f64]> = cp.factors().iter().map(|a| a.col(j)).collect();
        let basis = outer(&cols)?;
        t.axpy(cp.weights()[j].sqrt() * scores[j], &basis)?;
    }
    Ok(t)
}

/// n i.i.d. spiked-covariance samples. Per sample the generator first draws
/// the r standard normal scores f_ij in component order, then the noise
/// entries in vectorization order; this draw order is part of the
/// reproducibility contract.
pub fn gen_spiked_samples(
    cp: &CPDecomposition,
    n: usize,
    sigma: f64,
    rng: &mut StreamRng,
) -> Result<SampleBatch> {
    if !cp.symmetric_pair() {
        return Err(Error::InvalidArgument(
            "spiked samples need a symmetric-pair decomposition".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level {sigma}")));
    }
    let base: Vec<usize> = cp.factors().iter().map(|a| a.rows()).collect();
    let r = cp.rank();
    // rank-one signal bases, materialized once
    let mut bases = Vec::with_capacity(r);
    for j in 0..r {
        let cols: Vec<&[f64]> = cp.factors().iter().map(|a| a.col(j)).collect();
        bases.push(outer(&cols)?);
    }
    let mut samples = Vec::with_capacity(n);
    let mut scores = vec![0.0; r];
    for _ in 0..n {
        for s in scores.iter_mut() {
            *s = rng.next_gaussian();
        }
        let mut x = DenseTensor::zeros(base.clone());
        if sigma > 0.0 {
            rng.fill_gaussian(x.data_mut());
            for v in x.data_mut().iter_mut() {
                *v *= sigma;
            }
        }
        for j in 0..r {
            x.axpy(cp.weights()[j].sqrt() * scores[j], &bases[j])?;
        }
        samples.push(x);
    }
    Ok(SampleBatch {
        samples,
        sigma,
        seed: rng.seed(),
        stream: rng.stream(),
    })
}

/// Scaled vectorized data matrix (vec(X_1), ..., vec(X_n)) / sqrt(n).
pub fn data_matrix(batch: &SampleBatch) -> Matrix {
    let d = batch.samples[0].len();
    let n = batch.n();
    let scale = 1.0 / (n as f64).sqrt();
    let mut m = Matrix::zeros(d, n);
    for (i, x) in batch.samples.iter().enumerate() {
        let col = m.col_mut(i);
        for (c, v) in col.iter_mut().zip(x.data().iter()) {
            *c = scale * v;
        }
    }
    m
}

/// Empirical covariance tensor n^{-1} sum_i X_i x X_i of order 2K, built as
/// the Gram matrix of [`data_matrix`] refolded, so the grouped unfolding over
/// the first K modes reproduces D D^T exactly.
pub fn covariance_tensor(batch: &SampleBatch) -> Result<DenseTensor> {
    let d = data_matrix(batch);
    let g = d.matmul(&d.transpose())?;
    let mut shape: Vec<usize> = batch.shape().to_vec();
    shape.extend_from_slice(batch.shape());
    DenseTensor::new(shape, g.into_data())
}

/// Composed CP tensor plus i.i.d. N(0, sigma^2) noise on every entry.
pub fn gen_noisy_cp(cp: &CPDecomposition, sigma: f64, rng: &mut StreamRng) -> Result<DenseTensor> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level {sigma}")));
    }
    let mut t = cp.compose()?;
    if sigma > 0.0 {
        let mut noise = vec![0.0; t.len()];
        rng.fill_gaussian(&mut noise);
        for (v, e) in t.data_mut().iter_mut().zip(noise.iter()) {
            *v += sigma * e;
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::gram_delta;

    fn unit(v: Vec<f64>) -> Vec<f64> {
        let n = crate::tensor::norm2(&v);
        v.into_iter().map(|x| x / n).collect()
    }

    #[test]
    fn basis_with_zero_coherence_is_orthonormal() {
        let mut rng = StreamRng::from_seed(11);
        let a = gen_basis(9, 4, 0.0, &mut rng).unwrap();
        let g = a.gram();
        for j in 0..4 {
            for i in 0..4 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((g.get(i, j) - target).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn basis_hits_coherence_target_exactly() {
        let theta = 10f64.powf(-0.5);
        let mut rng = StreamRng::from_seed(12);
        let a = gen_basis(20, 3, theta, &mut rng).unwrap();
        let g = a.gram();
        for j in 0..3 {
            for i in 0..3 {
                if i == j {
                    assert!((g.get(i, j) - 1.0).abs() < 1e-10);
                } else {
                    assert!(
                        (g.get(i, j) - 0.31623).abs() < 1e-5,
                        "off-diagonal {}",
                        g.get(i, j)
                    );
                    assert!((g.get(i, j) - theta).abs() < 1e-10);
                }
            }
        }
        // compound symmetry makes the defect analytic
        let delta = gram_delta(&a).unwrap();
        assert!((delta - 2.0 * theta).abs() < 1e-10);
    }

    #[test]
    fn infeasible_coherence_is_rejected() {
        let mut rng = StreamRng::from_seed(13);
        assert!(gen_basis(10, 3, 0.5, &mut rng).is_err());
        assert!(gen_basis(10, 3, -0.1, &mut rng).is_err());
        assert!(gen_basis(2, 3, 0.1, &mut rng).is_err());
        assert!(gen_basis(10, 3, 0.499, &mut rng).is_ok());
    }

    #[test]
    fn construction_validates_weights_and_columns() {
        let a = Matrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(CPDecomposition::new(vec![1.0, 2.0], vec![a.clone()], false).is_err());
        assert!(CPDecomposition::new(vec![2.0, 0.0], vec![a.clone()], false).is_err());
        let bad = Matrix::new(2, 2, vec![2.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(CPDecomposition::new(vec![2.0, 1.0], vec![bad], false).is_err());
        assert!(CPDecomposition::new(vec![2.0, 1.0], vec![a], false).is_ok());
    }

    #[test]
    fn symmetric_pair_composition_duplicates_modes() {
        let a = Matrix::new(2, 1, unit(vec![3.0, 4.0])).unwrap();
        let b = Matrix::new(3, 1, unit(vec![1.0, 2.0, 2.0])).unwrap();
        let cp = CPDecomposition::new(vec![2.5], vec![a.clone(), b.clone()], true).unwrap();
        assert_eq!(cp.order(), 4);
        assert_eq!(cp.shape(), vec![2, 3, 2, 3]);
        let t = cp.compose().unwrap();
        // entry (i,j,i',j') = 2.5 a_i b_j a_i' b_j'
        let v = t.get(&[1, 2, 0, 1]);
        let want = 2.5 * a.get(1, 0) * b.get(2, 0) * a.get(0, 0) * b.get(1, 0);
        assert!((v - want).abs() < 1e-14);
    }

    #[test]
    fn expanded_matches_the_pair_composition() {
        let mut rng = StreamRng::from_seed(90);
        let factors: Vec<Matrix> = vec![
            gen_basis(3, 2, 0.2, &mut rng).unwrap(),
            gen_basis(4, 2, 0.2, &mut rng).unwrap(),
        ];
        let cp = CPDecomposition::new(vec![2.0, 1.0], factors, true).unwrap();
        let flat = cp.expanded();
        assert!(!flat.symmetric_pair());
        assert_eq!(flat.sample_order(), 4);
        assert_eq!(flat.shape(), cp.shape());
        let diff_norm = {
            let mut t = cp.compose().unwrap();
            t.axpy(-1.0, &flat.compose().unwrap()).unwrap();
            t.hs_norm()
        };
        assert!(diff_norm < 1e-12);
        // plain decompositions expand to themselves
        let plain = flat.expanded();
        assert_eq!(plain.sample_order(), 4);
    }

    #[test]
    fn orthogonal_composition_obeys_pythagoras() {
        let mut rng = StreamRng::from_seed(21);
        let factors: Vec<Matrix> = (0..3)
            .map(|_| gen_basis(6, 2, 0.0, &mut rng).unwrap())
            .collect();
        let weights = vec![3.0, 1.5];
        let cp = CPDecomposition::new(weights.clone(), factors, false).unwrap();
        let t = cp.compose().unwrap();
        let want: f64 = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        assert!((t.hs_norm() - want).abs() < 1e-10);
    }

    #[test]
    fn unit_score_sample_is_the_weighted_basis() {
        let a = Matrix::new(2, 1, unit(vec![1.0, 1.0])).unwrap();
        let b = Matrix::new(2, 1, vec![1.0, 0.0]).unwrap();
        let cp = CPDecomposition::new(vec![4.0], vec![a, b], true).unwrap();
        let x = signal_sample(&cp, &[1.0]).unwrap();
        // w_1 = sqrt(4) = 2, sample = 2 (a x b)
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let want = [2.0 * s, 2.0 * s, 0.0, 0.0];
        for (got, w) in x.data().iter().zip(want.iter()) {
            assert!((got - w).abs() < 1e-14);
        }
    }

    #[test]
    fn batches_are_reproducible_per_stream() {
        let mut rng = StreamRng::from_seed(31);
        let factors = vec![
            gen_basis(4, 2, 0.1, &mut rng).unwrap(),
            gen_basis(5, 2, 0.1, &mut rng).unwrap(),
        ];
        let cp = CPDecomposition::new(vec![2.0, 1.0], factors, true).unwrap();
        let batch = |stream: u64| {
            let mut r = StreamRng::substream(99, stream);
            gen_spiked_samples(&cp, 7, 0.3, &mut r).unwrap()
        };
        let b1 = batch(5);
        let b2 = batch(5);
        let b3 = batch(6);
        for (x, y) in b1.samples().iter().zip(b2.samples().iter()) {
            assert_eq!(x.data(), y.data());
        }
        assert_ne!(b1.samples()[0].data(), b3.samples()[0].data());
        assert_eq!(b1.seed(), 99);
        assert_eq!(b1.stream(), 5);
    }

    #[test]
    fn sample_second_moment_matches_model() {
        // E ||X||^2 = sum lambda + sigma^2 d
        let mut rng = StreamRng::from_seed(41);
        let factors = vec![
            gen_basis(3, 2, 0.2, &mut rng).unwrap(),
            gen_basis(3, 2, 0.2, &mut rng).unwrap(),
        ];
        let cp = CPDecomposition::new(vec![2.0, 1.0], factors, true).unwrap();
        let sigma = 0.5;
        let batch = gen_spiked_samples(&cp, 10_000, sigma, &mut rng).unwrap();
        let sq: Vec<f64> = batch
            .samples()
            .iter()
            .map(|x| x.hs_norm().powi(2))
            .collect();
        let n = sq.len() as f64;
        let mean = sq.iter().sum::<f64>() / n;
        let var = sq.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
        let want = 3.0 + sigma * sigma * 9.0;
        let se = (var / n).sqrt();
        assert!(
            (mean - want).abs() < 5.0 * se,
            "mean {mean} vs {want} (se {se})"
        );
    }

    #[test]
    fn covariance_tensor_is_the_data_gram() {
        let mut rng = StreamRng::from_seed(51);
        let factors = vec![
            gen_basis(3, 2, 0.1, &mut rng).unwrap(),
            gen_basis(4, 2, 0.1, &mut rng).unwrap(),
        ];
        let cp = CPDecomposition::new(vec![2.0, 1.0], factors, true).unwrap();
        let batch = gen_spiked_samples(&cp, 6, 0.4, &mut rng).unwrap();
        let t = covariance_tensor(&batch).unwrap();
        assert_eq!(t.shape(), &[3, 4, 3, 4]);
        let d = data_matrix(&batch);
        let g = d.matmul(&d.transpose()).unwrap();
        let unfolded = t.unfold_group(&[1, 2]).unwrap();
        assert_eq!(unfolded.data(), g.data());
        // Gram eigenvalues are squared singular values of the data matrix
        let eig = crate::spectral::top_eigs_sym(&g, 3, 1e-12).unwrap();
        let svd = crate::spectral::top_svd(&d, 3, 1e-12).unwrap();
        for j in 0..3 {
            assert!((eig.values[j] - svd.singular_values[j].powi(2)).abs() < 1e-10);
        }
    }

    #[test]
    fn single_rank_one_sample_gives_rank_one_covariance() {
        let a = Matrix::new(2, 1, vec![1.0, 0.0]).unwrap();
        let b = Matrix::new(2, 1, unit(vec![1.0, 1.0])).unwrap();
        let cp = CPDecomposition::new(vec![1.0], vec![a, b], true).unwrap();
        let x = signal_sample(&cp, &[1.0]).unwrap();
        let batch = SampleBatch {
            samples: vec![x.clone()],
            sigma: 0.0,
            seed: 0,
            stream: 0,
        };
        let t = covariance_tensor(&batch).unwrap();
        // T = X x X entrywise
        for i in 0..2 {
            for j in 0..2 {
                for i2 in 0..2 {
                    for j2 in 0..2 {
                        let want =
                            x.get(&[i, j]) * x.get(&[i2, j2]);
                        let got = t.get(&[i, j, i2, j2]);
                        assert!((got - want).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn noisy_cp_reduces_to_compose_at_zero_noise() {
        let mut rng = StreamRng::from_seed(61);
        let factors: Vec<Matrix> = (0..3)
            .map(|_| gen_basis(4, 2, 0.1, &mut rng).unwrap())
            .collect();
        let cp = CPDecomposition::new(vec![2.0, 1.0], factors, false).unwrap();
        let t = gen_noisy_cp(&cp, 0.0, &mut rng).unwrap();
        let c = cp.compose().unwrap();
        let diff = t.sub(&c).unwrap();
        assert_eq!(diff.hs_norm(), 0.0);
    }

    #[test]
    fn noisy_cp_entry_variance_matches_sigma() {
        let mut rng = StreamRng::from_seed(62);
        let factors: Vec<Matrix> = (0..2)
            .map(|_| gen_basis(40, 2, 0.1, &mut rng).unwrap())
            .collect();
        let cp = CPDecomposition::new(vec![2.0, 1.0], factors, false).unwrap();
        let sigma = 0.7;
        let t = gen_noisy_cp(&cp, sigma, &mut rng).unwrap();
        let c = cp.compose().unwrap();
        let resid = t.sub(&c).unwrap();
        let m = resid.len() as f64;
        let var = resid.data().iter().map(|x| x * x).sum::<f64>() / m;
        // fourth-moment standard error of the variance estimate
        let se = sigma * sigma * (2.0 / m).sqrt();
        assert!(
            (var - sigma * sigma).abs() < 5.0 * se,
            "variance {var} vs {} (se {se})",
            sigma * sigma
        );
    }

    #[test]
    fn json_round_trip_preserves_the_decomposition() {
        let mut rng = StreamRng::from_seed(71);
        let factors = vec![
            gen_basis(4, 2, 0.2, &mut rng).unwrap(),
            gen_basis(5, 2, 0.2, &mut rng).unwrap(),
        ];
        let cp = CPDecomposition::new(vec![2.0, 1.0], factors, true).unwrap();
        let text = serde_json::to_string(&cp).unwrap();
        let back: CPDecomposition = serde_json::from_str(&text).unwrap();
        assert_eq!(cp.weights(), back.weights());
        assert_eq!(cp.symmetric_pair(), back.symmetric_pair());
        for (a, b) in cp.factors().iter().zip(back.factors().iter()) {
            assert_eq!(a.data(), b.data());
        }
        // tampered documents fail validation on deserialize
        let tampered = text.replace("\"symmetric_pair\":true", "\"symmetric_pair\":true,\"x\":0");
        let _ = tampered; // unknown fields are ignored by default
        let bad = text.replacen("2.0", "0.5", 1);
        assert!(serde_json::from_str::<CPDecomposition>(&bad).is_err());
    }

    #[test]
    fn mode_factor_resolves_the_pair_layout() {
        let a = Matrix::new(2, 1, vec![1.0, 0.0]).unwrap();
        let b = Matrix::new(3, 1, vec![0.0, 1.0, 0.0]).unwrap();
        let cp = CPDecomposition::new(vec![1.0], vec![a.clone(), b.clone()], true).unwrap();
        assert_eq!(cp.mode_factor(1).unwrap().data(), a.data());
        assert_eq!(cp.mode_factor(2).unwrap().data(), b.data());
        assert_eq!(cp.mode_factor(3).unwrap().data(), a.data());
        assert_eq!(cp.mode_factor(4).unwrap().data(), b.data());
        assert!(cp.mode_factor(5).is_err());
    }
}
