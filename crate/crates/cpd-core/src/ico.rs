//! Iterative Concurrent Orthogonalization refinement.
//!
//! Starting from warm-start factors, each sweep visits the modes in order
//! and re-estimates every component's mode-k vector by contracting the
//! tensor with the right inverses of all the other factor matrices, which
//! concurrently cancels the cross-component interference instead of
//! deflating components one at a time. A mode's right inverse is refreshed
//! as soon as its factor matrix has been updated, so later modes in the
//! same sweep contract against the freshest inverses.
//!
//! The pairwise-symmetric variant leaves two matching modes free and takes
//! the top eigenvector of the resulting small matrix; the general variant
//! leaves one mode free and normalizes the resulting vector.

use crate::coherence::{match_components, sin_theta};
use crate::error::{Error, Result};
use crate::model::CPDecomposition;
use crate::spectral::{right_inverse, sign_normalize, top_eigs_sym};
use crate::tensor::{dot, norm2, DenseTensor, Matrix};

/// Tolerance handed to iterative spectral fallbacks; dense paths ignore it.
const SOLVE_TOL: f64 = 1e-12;

/// Refinement options.
#[derive(Debug, Clone)]
pub struct ICOConfig {
    /// Stop once the largest projector update in a sweep is at or below this.
    pub tolerance: f64,
    /// Hard cap on the number of sweeps.
    pub max_sweeps: usize,
    /// Ridge added to the factor Grams before inversion; 0 means exact
    /// inverses with an ill-conditioning check.
    pub ridge: f64,
    /// Record per-(sweep, mode) statistics.
    pub trace: bool,
}

impl Default for ICOConfig {
    fn default() -> Self {
        ICOConfig {
            tolerance: 1e-6,
            max_sweeps: 50,
            ridge: 0.0,
            trace: true,
        }
    }
}

impl ICOConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance {} must be positive",
                self.tolerance
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidArgument(
                "at least one sweep is required".into(),
            ));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::InvalidArgument(format!("ridge {}", self.ridge)));
        }
        Ok(())
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The largest projector update fell to the tolerance.
    Tolerance,
    /// The sweep cap was reached first.
    MaxSweeps,
}

/// One (sweep, mode) record.
#[derive(Debug, Clone)]
pub struct TraceEntry {
    /// 1-based sweep index.
    pub sweep: usize,
    /// 1-based mode index.
    pub mode: usize,
    /// Largest projector update over components at this point.
    pub max_update: f64,
    /// Largest matched sine-theta error against the supplied ground truth
    /// for this mode, when a truth was given.
    pub max_true_error: Option<f64>,
}

/// Iteration log of a refinement run.
#[derive(Debug, Clone)]
pub struct FitTrace {
    pub entries: Vec<TraceEntry>,
    pub sweeps_used: usize,
    pub stop: StopReason,
}

impl FitTrace {
    /// Largest update per sweep, maximized over modes.
    pub fn sweep_max_updates(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for e in &self.entries {
            if e.sweep > out.len() {
                out.resize(e.sweep, 0.0);
            }
            out[e.sweep - 1] = out[e.sweep - 1].max(e.max_update);
        }
        out
    }

    /// CSV rendering with columns sweep, mode, max_update, max_true_error.
    /// The error column is empty when no ground truth was supplied.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("sweep,mode,max_update,max_true_error\n");
        for e in &self.entries {
            let err = e
                .max_true_error
                .map(|x| x.to_string())
                .unwrap_or_default();
            s.push_str(&format!("{},{},{},{}\n", e.sweep, e.mode, e.max_update, err));
        }
        s
    }
}

/// ICO for pairwise-symmetric tensors: modes K+1..2K repeat modes 1..K and
/// share their factors and right inverses. `init` holds the K warm-start
/// factor matrices with unit columns.
pub fn ico_symmetric(
    t: &DenseTensor,
    r: usize,
    init: &[Matrix],
    cfg: &ICOConfig,
) -> Result<(CPDecomposition, FitTrace)> {
    ico_symmetric_traced(t, r, init, cfg, None)
}

/// `ico_symmetric` with matched true errors recorded in the trace.
pub fn ico_symmetric_traced(
    t: &DenseTensor,
    r: usize,
    init: &[Matrix],
    cfg: &ICOConfig,
    truth: Option<&CPDecomposition>,
) -> Result<(CPDecomposition, FitTrace)> {
    cfg.validate()?;
    let half = paired_half(t)?;
    check_init(init, &t.shape()[..half], r)?;
    let tracker = truth.map(|tr| TruthTracker::new(init, tr)).transpose()?;

    let mut factors: Vec<Matrix> = init.to_vec();
    let mut rinv = initial_inverses(&factors, cfg.ridge)?;
    let mut entries = Vec::new();
    let mut stop = StopReason::MaxSweeps;
    let mut sweeps_used = cfg.max_sweeps;

    for m in 1..=cfg.max_sweeps {
        let mut sweep_max = 0.0f64;
        for k in 0..half {
            let mut mode_max = 0.0f64;
            for j in 0..r {
                let small = contract_pair(t, half, k, j, &rinv)?;
                let eig = top_eigs_sym(&small, 1, SOLVE_TOL)?;
                let mut a_new = eig.vectors.col(0).to_vec();
                align_sign(&mut a_new, factors[k].col(j));
                mode_max = mode_max.max(sin_theta(&a_new, factors[k].col(j))?);
                factors[k].set_col(j, &a_new);
            }
            rinv[k] = right_inverse(&factors[k], cfg.ridge)
                .map_err(|e| wrap_right_inverse(e, m, k + 1))?;
            sweep_max = sweep_max.max(mode_max);
            if cfg.trace {
                entries.push(TraceEntry {
                    sweep: m,
                    mode: k + 1,
                    max_update: mode_max,
                    max_true_error: tracker.as_ref().map(|tk| tk.mode_error(&factors, k)),
                });
            }
        }
        if sweep_max <= cfg.tolerance {
            stop = StopReason::Tolerance;
            sweeps_used = m;
            break;
        }
    }

    let mut weights = Vec::with_capacity(r);
    for j in 0..r {
        let mut assign: Vec<(usize, &[f64])> = Vec::with_capacity(2 * half);
        for l in 0..half {
            assign.push((l + 1, rinv[l].col(j)));
            assign.push((half + l + 1, rinv[l].col(j)));
        }
        weights.push(t.contract_modes(&assign)?.scalar_value()?);
    }
    for a in factors.iter_mut() {
        for j in 0..r {
            sign_normalize(a.col_mut(j));
        }
    }
    let estimate = sorted_estimate(weights, factors, true)?;
    Ok((
        estimate,
        FitTrace {
            entries,
            sweeps_used,
            stop,
        },
    ))
}

/// ICO for general order-N tensors. `init` holds one warm-start factor
/// matrix per mode; weights come out as absolute full contractions.
pub fn ico_general(
    t: &DenseTensor,
    r: usize,
    init: &[Matrix],
    cfg: &ICOConfig,
) -> Result<(CPDecomposition, FitTrace)> {
    ico_general_traced(t, r, init, cfg, None)
}

/// `ico_general` with matched true errors recorded in the trace.
pub fn ico_general_traced(
    t: &DenseTensor,
    r: usize,
    init: &[Matrix],
    cfg: &ICOConfig,
    truth: Option<&CPDecomposition>,
) -> Result<(CPDecomposition, FitTrace)> {
    cfg.validate()?;
    let n = t.order();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "refinement needs an order-2 or higher tensor, got order {n}"
        )));
    }
    check_init(init, t.shape(), r)?;
    let tracker = truth.map(|tr| TruthTracker::new(init, tr)).transpose()?;

    let mut factors: Vec<Matrix> = init.to_vec();
    let mut rinv = initial_inverses(&factors, cfg.ridge)?;
    let mut entries = Vec::new();
    let mut stop = StopReason::MaxSweeps;
    let mut sweeps_used = cfg.max_sweeps;

    for m in 1..=cfg.max_sweeps {
        let mut sweep_max = 0.0f64;
        for k in 0..n {
            let mut mode_max = 0.0f64;
            for j in 0..r {
                let assign: Vec<(usize, &[f64])> = (0..n)
                    .filter(|&l| l != k)
                    .map(|l| (l + 1, rinv[l].col(j)))
                    .collect();
                let mut a_new = t.contract_modes(&assign)?.into_data();
                let len = norm2(&a_new);
                if len < 1e-300 {
                    return Err(Error::Degenerate {
                        what: "contraction",
                        sweep: m,
                        component: j + 1,
                        mode: k + 1,
                    });
                }
                for x in a_new.iter_mut() {
                    *x /= len;
                }
                align_sign(&mut a_new, factors[k].col(j));
                mode_max = mode_max.max(sin_theta(&a_new, factors[k].col(j))?);
                factors[k].set_col(j, &a_new);
            }
            rinv[k] = right_inverse(&factors[k], cfg.ridge)
                .map_err(|e| wrap_right_inverse(e, m, k + 1))?;
            sweep_max = sweep_max.max(mode_max);
            if cfg.trace {
                entries.push(TraceEntry {
                    sweep: m,
                    mode: k + 1,
                    max_update: mode_max,
                    max_true_error: tracker.as_ref().map(|tk| tk.mode_error(&factors, k)),
                });
            }
        }
        if sweep_max <= cfg.tolerance {
            stop = StopReason::Tolerance;
            sweeps_used = m;
            break;
        }
    }

    let mut weights = Vec::with_capacity(r);
    for j in 0..r {
        let assign: Vec<(usize, &[f64])> =
            (0..n).map(|l| (l + 1, rinv[l].col(j))).collect();
        weights.push(t.contract_modes(&assign)?.scalar_value()?.abs());
    }
    let estimate = sorted_estimate(weights, factors, false)?;
    Ok((
        estimate,
        FitTrace {
            entries,
            sweeps_used,
            stop,
        },
    ))
}

/// Exactly one sweep of the applicable refinement, for one-step estimator
/// comparisons. The variant is picked from the factor count: one matrix per
/// mode runs the general sweep, one per mode pair the symmetric sweep.
pub fn one_step_update(
    t: &DenseTensor,
    r: usize,
    init: &[Matrix],
    cfg: &ICOConfig,
) -> Result<CPDecomposition> {
    let mut one = cfg.clone();
    one.max_sweeps = 1;
    if init.len() == t.order() {
        Ok(ico_general(t, r, init, &one)?.0)
    } else if init.len() * 2 == t.order() {
        Ok(ico_symmetric(t, r, init, &one)?.0)
    } else {
        Err(Error::ShapeMismatch(format!(
            "{} init factors fit neither an order-{} tensor nor its pairwise-symmetric half",
            init.len(),
            t.order()
        )))
    }
}

fn paired_half(t: &DenseTensor) -> Result<usize> {
    let order = t.order();
    if order < 2 || order % 2 != 0 {
        return Err(Error::ShapeMismatch(format!(
            "pairwise-symmetric refinement needs an even tensor order, got {order}"
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
    Ok(half)
}

pub(crate) fn check_init(init: &[Matrix], shape: &[usize], r: usize) -> Result<()> {
    if init.len() != shape.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} init factors for {} modes",
            init.len(),
            shape.len()
        )));
    }
    for (k, a) in init.iter().enumerate() {
        if a.rows() != shape[k] || a.cols() != r {
            return Err(Error::ShapeMismatch(format!(
                "init factor {} is {}x{}, expected {}x{r}",
                k + 1,
                a.rows(),
                a.cols(),
                shape[k]
            )));
        }
        for j in 0..r {
            let len = norm2(a.col(j));
            if (len - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidArgument(format!(
                    "init factor {} column {} has norm {len}, expected unit",
                    k + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(())
}

fn initial_inverses(factors: &[Matrix], ridge: f64) -> Result<Vec<Matrix>> {
    factors
        .iter()
        .enumerate()
        .map(|(k, a)| right_inverse(a, ridge).map_err(|e| wrap_right_inverse(e, 0, k + 1)))
        .collect()
}

fn wrap_right_inverse(e: Error, sweep: usize, mode: usize) -> Error {
    Error::RightInverse {
        sweep,
        mode,
        source: Box::new(e),
    }
}

/// T contracted on every mode except the pair (k, K+k), as a d_k x d_k
/// matrix; the paired modes share the component's right-inverse column.
fn contract_pair(
    t: &DenseTensor,
    half: usize,
    k: usize,
    j: usize,
    rinv: &[Matrix],
) -> Result<Matrix> {
    let mut assign: Vec<(usize, &[f64])> = Vec::with_capacity(2 * half - 2);
    for l in 0..half {
        if l == k {
            continue;
        }
        assign.push((l + 1, rinv[l].col(j)));
        assign.push((half + l + 1, rinv[l].col(j)));
    }
    t.contract_modes(&assign)?.unfold(1)
}

fn align_sign(v: &mut [f64], prev: &[f64]) {
    if dot(v, prev) < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Re-sort components by weight, descending, and build the estimate.
pub(crate) fn sorted_estimate(
    weights: Vec<f64>,
    factors: Vec<Matrix>,
    symmetric_pair: bool,
) -> Result<CPDecomposition> {
    let r = weights.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
    let sorted_weights: Vec<f64> = order.iter().map(|&j| weights[j]).collect();
    let sorted_factors: Vec<Matrix> = factors
        .iter()
        .map(|a| {
            let mut out = Matrix::zeros(a.rows(), r);
            for (jj, &j) in order.iter().enumerate() {
                out.set_col(jj, a.col(j));
            }
            out
        })
        .collect();
    CPDecomposition::new(sorted_weights, sorted_factors, symmetric_pair)
}

/// Matched-error bookkeeping against a known decomposition: the component
/// permutation is fixed by matching the warm start once, then reused.
struct TruthTracker {
    truth_cols: Vec<Matrix>,
    assigned: Vec<usize>,
}

impl TruthTracker {
    fn new(init: &[Matrix], truth: &CPDecomposition) -> Result<TruthTracker> {
        let r = truth.rank();
        let dummy: Vec<f64> = (0..r).map(|j| (r - j) as f64).collect();
        let init_decomp =
            CPDecomposition::new(dummy, init.to_vec(), truth.symmetric_pair())?;
        let matched = match_components(&init_decomp, truth)?;
        Ok(TruthTracker {
            truth_cols: truth.factors().to_vec(),
            assigned: matched.permutation,
        })
    }

    /// Largest sine-theta over matched components in one mode.
    fn mode_error(&self, factors: &[Matrix], k: usize) -> f64 {
        let mut worst = 0.0f64;
        for (t_idx, &e_idx) in self.assigned.iter().enumerate() {
            let s = sin_theta(factors[k].col(e_idx), self.truth_cols[k].col(t_idx))
                .unwrap_or(f64::NAN);
            worst = worst.max(s);
        }
        worst
    }
}
