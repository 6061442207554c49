//! Monte Carlo certification of the perturbation and coherence inequalities
//! behind the estimators: each check generates hypothesis-compliant random
//! instances, evaluates both sides of the stated bound, and reports the worst
//! margin (bound minus quantity).
//!
//! A margin at or above `-MARGIN_TOL` counts as satisfied. Trials whose
//! hypotheses fail (defect at or above one, perturbation ratio at or above
//! one, or a bound exceeding the a-priori cap of the left side) are vacuous:
//! they are counted and skipped, never treated as passes. Every check is
//! seed-reproducible; trial `i` of a report runs on
//! `StreamRng::substream(master_seed, i)`, so a failure pinpoints the exact
//! instance that produced it.

use rayon::prelude::*;
use serde::Serialize;

use crate::coherence::{coherence_report, sin_theta};
use crate::error::{Error, Result};
use crate::model::{gen_basis, CPDecomposition};
use crate::rng::StreamRng;
use crate::spectral::{right_inverse, top_eigs_sym, top_left_singular, top_svd};
use crate::tensor::{dot, norm2, DenseTensor, Matrix};

/// Floating-point slack on certified margins.
pub const MARGIN_TOL: f64 = 1e-9;

const SOLVE_TOL: f64 = 1e-12;

/// Outcome of one certification run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    /// Which inequality family was exercised (1, 2, 3, 4, 5, 7 or 8).
    pub proposition: usize,
    /// Trials attempted.
    pub trials: usize,
    /// Trials whose hypotheses held and contributed a margin.
    pub compliant: usize,
    /// Vacuous trials, counted but not certified.
    pub skipped: usize,
    /// Master seed; trial `i` runs on `StreamRng::substream(master_seed, i)`.
    pub master_seed: u64,
    /// Smallest margin over compliant trials.
    pub min_margin: Option<f64>,
    /// `(master_seed, trial)` of the first margin below tolerance.
    pub violation: Option<(u64, u64)>,
    pub pass: bool,
}

impl CheckReport {
    /// One-line human-readable summary.
    pub fn summary_line(&self) -> String {
        let margin = match self.min_margin {
            Some(m) => format!("{m:.3e}"),
            None => "n/a".into(),
        };
        format!(
            "prop {}: {} ({} trials, {} compliant, {} vacuous, min margin {})",
            self.proposition,
            if self.pass { "PASS" } else { "FAIL" },
            self.trials,
            self.compliant,
            self.skipped,
            margin,
        )
    }
}

fn build_report(proposition: usize, master_seed: u64, outcomes: &[Option<f64>]) -> CheckReport {
    let mut compliant = 0usize;
    let mut skipped = 0usize;
    let mut min_margin: Option<f64> = None;
    let mut violation = None;
    for (i, outcome) in outcomes.iter().enumerate() {
        match outcome {
            None => skipped += 1,
            Some(m) => {
                compliant += 1;
                if min_margin.is_none_or(|cur| *m < cur) {
                    min_margin = Some(*m);
                }
                if *m < -MARGIN_TOL && violation.is_none() {
                    violation = Some((master_seed, i as u64));
                }
            }
        }
    }
    CheckReport {
        proposition,
        trials: outcomes.len(),
        compliant,
        skipped,
        master_seed,
        min_margin,
        violation,
        pass: compliant > 0 && violation.is_none(),
    }
}

/// Runs `trials` independent instances of `trial` on parallel sub-streams and
/// merges the outcomes in trial order.
fn run_trials<F>(
    proposition: usize,
    trials: usize,
    rng: &mut StreamRng,
    trial: F,
) -> Result<CheckReport>
where
    F: Fn(&mut StreamRng) -> Result<Option<f64>> + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let master_seed = rng.next_u64();
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|i| trial(&mut StreamRng::substream(master_seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(build_report(proposition, master_seed, &outcomes))
}

/// Spectral norm of a symmetric matrix.
fn sym_norm(m: &Matrix) -> Result<f64> {
    let eig = top_eigs_sym(m, m.rows(), SOLVE_TOL)?;
    Ok(eig.values[0].abs().max(eig.values[m.rows() - 1].abs()))
}

/// Spectral norm of an arbitrary matrix through the smaller Gram side.
fn spec_norm(m: &Matrix) -> Result<f64> {
    let gram = if m.rows() <= m.cols() {
        m.matmul(&m.transpose())?
    } else {
        m.t_matmul(m)?
    };
    let eig = top_eigs_sym(&gram, 1, SOLVE_TOL)?;
    Ok(eig.values[0].max(0.0).sqrt())
}

/// Orthonormality defect of the column Gram.
fn gram_defect(a: &Matrix) -> Result<f64> {
    let mut g = a.gram();
    for i in 0..g.rows() {
        let v = g.get(i, i) - 1.0;
        g.set(i, i, v);
    }
    sym_norm(&g)
}

/// Polar factor of a full-column-rank matrix: with thin SVD A = U1 D U2^T,
/// returns U1 U2^T, the closest matrix with orthonormal columns.
fn polar_factor(a: &Matrix) -> Result<Matrix> {
    let svd = top_svd(a, a.cols(), SOLVE_TOL)?;
    svd.u.matmul(&svd.v.transpose())
}

fn random_unit_columns(d: usize, r: usize, rng: &mut StreamRng) -> Matrix {
    let mut a = Matrix::zeros(d, r);
    for j in 0..r {
        let col = rng.unit_vector(d);
        a.set_col(j, &col);
    }
    a
}

fn random_psd(r: usize, rng: &mut StreamRng) -> Result<Matrix> {
    let mut b = Matrix::zeros(r, r);
    for x in b.data_mut().iter_mut() {
        *x = rng.next_gaussian();
    }
    b.t_matmul(&b)
}

fn random_square(r: usize, rng: &mut StreamRng) -> Matrix {
    let mut q = Matrix::zeros(r, r);
    for x in q.data_mut().iter_mut() {
        *x = rng.next_gaussian();
    }
    q
}

/// Unit vector at the given principal angle from `a`, random direction.
fn rotate_column(a: &[f64], angle: f64, rng: &mut StreamRng) -> Vec<f64> {
    if angle == 0.0 {
        return a.to_vec();
    }
    loop {
        let mut w = rng.unit_vector(a.len());
        let c = dot(&w, a);
        for (x, ai) in w.iter_mut().zip(a) {
            *x -= c * ai;
        }
        let n = norm2(&w);
        if n > 1e-8 {
            let (s, co) = angle.sin_cos();
            return a
                .iter()
                .zip(&w)
                .map(|(ai, wi)| co * ai + s * wi / n)
                .collect();
        }
    }
}

/// Near-orthonormal matrix from one of three families: exactly orthonormal,
/// compound-symmetric with random coherence below the feasibility cap, or raw
/// random unit columns.
fn random_frame(d: usize, r: usize, rng: &mut StreamRng) -> Result<Matrix> {
    match rng.below(3) {
        0 => gen_basis(d, r, 0.0, rng),
        1 => {
            let cap = if r > 1 {
                0.95 / (r as f64 - 1.0)
            } else {
                0.5
            };
            let theta = rng.range_f64(0.0, cap);
            gen_basis(d, r, theta, rng)
        }
        _ => Ok(random_unit_columns(d, r, rng)),
    }
}

fn descending_weights(r: usize, rng: &mut StreamRng) -> Vec<f64> {
    let mut w: Vec<f64> = (0..r).map(|_| rng.range_f64(0.3, 1.0)).collect();
    w.sort_by(|a, b| b.total_cmp(a));
    w
}

/// Coherence bound chain: the grouped defect delta_S against its three bound
/// families, the internal relaxations of those bounds, and the range of the
/// leave-two-out mutual coherence.
pub fn check_prop1(trials: usize, rng: &mut StreamRng) -> Result<CheckReport> {
    run_trials(1, trials, rng, |rng| {
        let r = 2 + rng.below(4);
        let kk = 2 + rng.below(3);
        let factors: Vec<Matrix> = (0..kk)
            .map(|_| {
                let d = r + rng.below(13 - r);
                random_frame(d, r, rng)
            })
            .collect::<Result<_>>()?;
        let mut subset: Vec<usize> = (1..=kk).filter(|_| rng.below(2) == 0).collect();
        if subset.is_empty() {
            subset.push(1 + rng.below(kk));
        }
        let rep = coherence_report(&factors, &subset)?;
        let mu_cap = (r as f64).powf(subset.len() as f64 / 2.0 - 1.0).max(1.0);
        let margins = [
            rep.slack_min_mode_delta,
            rep.slack_theta,
            rep.bound_theta_product - rep.bound_theta,
            rep.slack_eta,
            rep.bound_delta_product - rep.bound_eta,
            mu_cap - rep.mu_s,
        ];
        Ok(Some(margins.iter().cloned().fold(f64::INFINITY, f64::min)))
    })
}

/// Symmetric congruence transport: for a frame A with defect delta below one
/// and its polar factor U, the push-forward of any PSD matrix moves by at
/// most delta times its norm.
pub fn check_prop2_transform(trials: usize, rng: &mut StreamRng) -> Result<CheckReport> {
    run_trials(2, trials, rng, |rng| {
        let r = 1 + rng.below(5);
        let d = (r + rng.below(31 - r)).max(2);
        let a = random_frame(d, r, rng)?;
        let delta = gram_defect(&a)?;
        if delta >= 1.0 {
            return Ok(None);
        }
        let u = polar_factor(&a)?;
        let lam = random_psd(r, rng)?;
        let lam_norm = sym_norm(&lam)?;
        let lhs_mat = a
            .matmul(&lam)?
            .matmul(&a.transpose())?
            .sub(&u.matmul(&lam)?.matmul(&u.transpose())?)?;
        let lhs = sym_norm(&lhs_mat)?;
        Ok(Some(delta * lam_norm - lhs))
    })
}

/// Rank-one extraction: the projector error of the top left singular vector
/// of a unit-Frobenius matrix, capped at one half, is controlled by the
/// squared projector distance of the vectorizations.
pub fn check_prop3_rankone(trials: usize, rng: &mut StreamRng) -> Result<CheckReport> {
    run_trials(3, trials, rng, |rng| {
        let d1 = 2 + rng.below(11);
        let d2 = 2 + rng.below(11);
        let a = rng.unit_vector(d1);
        let b = rng.unit_vector(d2);
        let mut m = Matrix::zeros(d1, d2);
        match rng.below(3) {
            0 => {
                for j in 0..d2 {
                    for i in 0..d1 {
                        m.set(i, j, a[i] * b[j]);
                    }
                }
            }
            1 => {
                let eps = 10f64.powf(rng.range_f64(-4.0, -0.5));
                for j in 0..d2 {
                    for i in 0..d1 {
                        m.set(i, j, a[i] * b[j] + eps * rng.next_gaussian());
                    }
                }
            }
            _ => {
                for x in m.data_mut().iter_mut() {
                    *x = rng.next_gaussian();
                }
            }
        }
        let scale = norm2(m.data());
        for x in m.data_mut().iter_mut() {
            *x /= scale;
        }
        let ahat = top_left_singular(&m)?;
        let s = sin_theta(&ahat, &a)?;
        let lhs = (s * s).min(0.5);
        let mut vec_ab = vec![0.0; d1 * d2];
        for j in 0..d2 {
            for i in 0..d1 {
                vec_ab[j * d1 + i] = a[i] * b[j];
            }
        }
        let rhs_dist = sin_theta(m.data(), &vec_ab)?;
        Ok(Some(rhs_dist * rhs_dist - lhs))
    })
}

/// Shared instance for the one-step refinement bounds: true factors, their
/// per-mode defects, perturbed copies, and the target weights.
struct StepInstance {
    weights: Vec<f64>,
    factors: Vec<Matrix>,
    deltas: Vec<f64>,
    tilde: Vec<Matrix>,
    rinv: Option<Vec<Matrix>>,
}

fn step_instance(
    dims: &[usize],
    r: usize,
    psi_angle: f64,
    rng: &mut StreamRng,
) -> Result<StepInstance> {
    let theta_cap = if r > 1 { 0.5 / (r as f64 - 1.0) } else { 0.3 };
    let factors: Vec<Matrix> = dims
        .iter()
        .map(|&d| gen_basis(d, r, rng.range_f64(0.0, theta_cap), rng))
        .collect::<Result<_>>()?;
    let deltas: Vec<f64> = factors
        .iter()
        .map(gram_defect)
        .collect::<Result<_>>()?;
    let tilde: Vec<Matrix> = factors
        .iter()
        .map(|a| {
            let mut out = a.clone();
            for j in 0..a.cols() {
                let col = rotate_column(a.col(j), psi_angle, rng);
                out.set_col(j, &col);
            }
            out
        })
        .collect();
    let rinv = tilde
        .iter()
        .map(|a| right_inverse(a, 0.0))
        .collect::<Result<Vec<_>>>()
        .ok();
    Ok(StepInstance {
        weights: descending_weights(r, rng),
        factors,
        deltas,
        tilde,
        rinv,
    })
}

/// One exact refinement step on a noiseless pairwise-symmetric tensor: the
/// projector error of the updated mode-k component is bounded by
/// 2 (1 + delta_k) (lambda_1/lambda_j) prod_{l != k} (phi_l / (1 - phi_l))^2,
/// with phi_l a normalized carryover ratio of the given-mode perturbations.
pub fn check_prop4_ico_step(trials: usize, rng: &mut StreamRng) -> Result<CheckReport> {
    run_trials(4, trials, rng, |rng| {
        let kk = 2 + rng.below(2);
        let r = 1 + rng.below(3);
        let d_cap = if kk == 2 { 8 } else { 5 };
        let dims: Vec<usize> = (0..kk)
            .map(|_| (r + 1) + rng.below(d_cap - r))
            .collect();
        let psi_target = if rng.below(5) == 0 {
            0.0
        } else {
            10f64.powf(rng.range_f64(-3.0, -0.7))
        };
        let inst = step_instance(&dims, r, psi_target.asin(), rng)?;
        let rinv = match &inst.rinv {
            Some(v) => v,
            None => return Ok(None),
        };
        // measured per-mode projector perturbations and carryover ratios
        let mut phi = vec![None; kk];
        for l in 0..kk {
            let mut psi = 0.0f64;
            for j in 0..r {
                psi = psi.max(sin_theta(inst.tilde[l].col(j), inst.factors[l].col(j))?);
            }
            let denom = ((1.0 - inst.deltas[l]) * (1.0 - 1.0 / (4.0 * r as f64))).sqrt()
                - (r as f64).sqrt() * psi;
            if denom > 0.0 {
                let p = psi / denom;
                if p < 1.0 {
                    phi[l] = Some(p);
                }
            }
        }
        let tstar = CPDecomposition::new(inst.weights.clone(), inst.factors.clone(), true)?
            .compose()?;
        let mut margins = Vec::new();
        for k in 0..kk {
            let mut carry = 1.0f64;
            let mut usable = true;
            for (l, p) in phi.iter().enumerate() {
                if l == k {
                    continue;
                }
                match p {
                    Some(p) => carry *= (p / (1.0 - p)).powi(2),
                    None => usable = false,
                }
            }
            if !usable {
                continue;
            }
            for j in 0..r {
                let rhs =
                    2.0 * (1.0 + inst.deltas[k]) * (inst.weights[0] / inst.weights[j]) * carry;
                if rhs > 1.0 {
                    continue;
                }
                let mut assign: Vec<(usize, &[f64])> = Vec::with_capacity(2 * kk - 2);
                for l in 0..2 * kk {
                    if l == k || l == kk + k {
                        continue;
                    }
                    assign.push((l + 1, rinv[l % kk].col(j)));
                }
                let tjk = tstar.contract_modes(&assign)?.unfold(1)?;
                let top = top_eigs_sym(&tjk, 1, SOLVE_TOL)?;
                let lhs = sin_theta(top.vectors.col(0), inst.factors[k].col(j))?;
                margins.push(rhs - lhs);
            }
        }
        Ok(margins
            .into_iter()
            .reduce(f64::min))
    })
}

/// Asymmetric congruence transport: for frames A and B with defects below
/// one, the push-forward of any square matrix between the polar factors moves
/// by at most sqrt(2) delta times its norm.
pub fn check_prop5_asymmetric(trials: usize, rng: &mut StreamRng) -> Result<CheckReport> {
    run_trials(5, trials, rng, |rng| {
        prop5_margin(rng).map(|o| o.map(|(margin, _rel)| margin))
    })
}

/// One asymmetric-transport trial; returns the absolute margin and the
/// margin relative to the bound, the latter for the tightness probe.
fn prop5_margin(rng: &mut StreamRng) -> Result<Option<(f64, f64)>> {
    let r = 1 + rng.below(5);
    let d1 = (r + rng.below(21 - r)).max(2);
    let d2 = (r + rng.below(21 - r)).max(2);
    let a = random_frame(d1, r, rng)?;
    let b = random_frame(d2, r, rng)?;
    let delta = gram_defect(&a)?.max(gram_defect(&b)?);
    if delta >= 1.0 {
        return Ok(None);
    }
    let u = polar_factor(&a)?;
    let v = polar_factor(&b)?;
    let q = random_square(r, rng);
    let q_norm = spec_norm(&q)?;
    let lhs_mat = a
        .matmul(&q)?
        .matmul(&b.transpose())?
        .sub(&u.matmul(&q)?.matmul(&v.transpose())?)?;
    let lhs = spec_norm(&lhs_mat)?;
    let rhs = 2f64.sqrt() * delta * q_norm;
    let rel = if rhs > 0.0 { (rhs - lhs) / rhs } else { 1.0 };
    Ok(Some((rhs - lhs, rel)))
}

/// One exact refinement step on a noiseless general tensor: chordal bound on
/// the updated component and a relative bound on the contracted weight, both
/// in terms of the carryover ratios phi_l.
pub fn check_prop7_general(trials: usize, rng: &mut StreamRng) -> Result<CheckReport> {
    run_trials(7, trials, rng, |rng| {
        let n = 3 + rng.below(2);
        let r = 1 + rng.below(3);
        let d_cap = if n == 3 { 8 } else { 6 };
        let dims: Vec<usize> = (0..n)
            .map(|_| (r + 1) + rng.below(d_cap - r))
            .collect();
        let psi_target = if rng.below(5) == 0 {
            0.0
        } else {
            10f64.powf(rng.range_f64(-3.0, -0.7))
        };
        // psi here measures chordal distance; pick the rotation angle to match
        let angle = (1.0 - psi_target * psi_target / 2.0).clamp(-1.0, 1.0).acos();
        let inst = step_instance(&dims, r, angle, rng)?;
        let rinv = match &inst.rinv {
            Some(v) => v,
            None => return Ok(None),
        };
        let mut phi = vec![None; n];
        for l in 0..n {
            let mut psi = 0.0f64;
            for j in 0..r {
                let c = dot(inst.tilde[l].col(j), inst.factors[l].col(j)).abs();
                psi = psi.max((2.0 - 2.0 * c).max(0.0).sqrt());
            }
            let denom = (1.0 - inst.deltas[l]).max(0.0).sqrt() - (r as f64).sqrt() * psi;
            if denom > 0.0 {
                let p = psi / denom;
                if p < 1.0 {
                    phi[l] = Some(p);
                }
            }
        }
        let tstar = CPDecomposition::new(inst.weights.clone(), inst.factors.clone(), false)?
            .compose()?;
        let mut margins = Vec::new();
        for k in 0..n {
            let mut carry = 1.0f64;
            let mut usable = true;
            for (l, p) in phi.iter().enumerate() {
                if l == k {
                    continue;
                }
                match p {
                    Some(p) => carry *= (p / (1.0 - p)).powi(2),
                    None => usable = false,
                }
            }
            if !usable {
                continue;
            }
            for j in 0..r {
                let rhs = 2.0
                    * (r as f64 - 1.0)
                    * (1.0 + inst.deltas[k])
                    * (inst.weights[0] / inst.weights[j]).powi(2)
                    * carry;
                if rhs > 2.0 {
                    continue;
                }
                let assign: Vec<(usize, &[f64])> = (0..n)
                    .filter(|&l| l != k)
                    .map(|l| (l + 1, rinv[l].col(j)))
                    .collect();
                let v = tstar.contract_modes(&assign)?.into_data();
                let nv = norm2(&v);
                if nv < 1e-300 {
                    continue;
                }
                let c = (dot(&v, inst.factors[k].col(j)) / nv).abs();
                let lhs = 2.0 - 2.0 * c;
                margins.push(rhs - lhs);
            }
        }
        if phi.iter().all(Option::is_some) {
            let phis: Vec<f64> = phi.iter().map(|p| p.unwrap()).collect();
            let sum: f64 = phis.iter().sum();
            let prod: f64 = phis.iter().product();
            for j in 0..r {
                let assign: Vec<(usize, &[f64])> =
                    (0..n).map(|l| (l + 1, rinv[l].col(j))).collect();
                let lam = tstar.contract_modes(&assign)?.scalar_value()?;
                let lhs = (lam / inst.weights[j] - 1.0).abs();
                let rhs = sum
                    + (r as f64 - 1.0) * (inst.weights[0] / inst.weights[j]) * prod;
                margins.push(rhs - lhs);
            }
        }
        Ok(margins.into_iter().reduce(f64::min))
    })
}

/// Rank-one identifiability of the component span: for order three or higher
/// and all per-mode defects below one, a combination with two or more
/// significant coefficients is never rank-1, while single components are.
pub fn check_prop8_rankone_span(trials: usize, rng: &mut StreamRng) -> Result<CheckReport> {
    run_trials(8, trials, rng, |rng| {
        let n = 3 + rng.below(2);
        let r = 2 + rng.below(3);
        let dims: Vec<usize> = (0..n).map(|_| r + rng.below(9 - r)).collect();
        let theta_cap = 0.8 / (r as f64 - 1.0);
        let factors: Vec<Matrix> = dims
            .iter()
            .map(|&d| gen_basis(d, r, rng.range_f64(0.0, theta_cap), rng))
            .collect::<Result<_>>()?;
        for a in &factors {
            if gram_defect(a)? >= 1.0 {
                return Ok(None);
            }
        }
        let single = rng.below(5) == 0;
        let mut beta = vec![0.0f64; r];
        if single {
            let sign = if rng.below(2) == 0 { 1.0 } else { -1.0 };
            beta[rng.below(r)] = sign * rng.range_f64(0.5, 2.0);
        } else {
            let s = 2 + rng.below(r - 1);
            let mut order: Vec<usize> = (0..r).collect();
            for i in 0..s {
                let j = i + rng.below(r - i);
                order.swap(i, j);
            }
            for (pos, &j) in order.iter().enumerate() {
                let sign = if rng.below(2) == 0 { 1.0 } else { -1.0 };
                beta[j] = sign
                    * if pos < s {
                        rng.range_f64(0.1, 1.0)
                    } else {
                        rng.range_f64(0.0, 0.05)
                    };
            }
        }
        let mut x = DenseTensor::zeros(dims.clone());
        for (j, &bj) in beta.iter().enumerate() {
            if bj == 0.0 {
                continue;
            }
            let cols: Vec<Matrix> = factors
                .iter()
                .map(|a| {
                    let mut m = Matrix::zeros(a.rows(), 1);
                    m.set_col(0, a.col(j));
                    m
                })
                .collect();
            let term = CPDecomposition::new(vec![1.0], cols, false)?.compose()?;
            x.axpy(bj, &term)?;
        }
        let unfold = x.unfold(1)?;
        let gram = unfold.matmul(&unfold.transpose())?;
        let eig = top_eigs_sym(&gram, 2, SOLVE_TOL)?;
        let sigma2 = eig.values[1].max(0.0).sqrt();
        Ok(Some(if single {
            1e-6 - sigma2
        } else {
            sigma2 - 1e-6
        }))
    })
}

/// Proposition identifiers with a certification, in order.
pub const CHECKED_PROPOSITIONS: [usize; 7] = [1, 2, 3, 4, 5, 7, 8];

/// Run one certification by proposition number.
pub fn check_proposition(id: usize, trials: usize, rng: &mut StreamRng) -> Result<CheckReport> {
    match id {
        1 => check_prop1(trials, rng),
        2 => check_prop2_transform(trials, rng),
        3 => check_prop3_rankone(trials, rng),
        4 => check_prop4_ico_step(trials, rng),
        5 => check_prop5_asymmetric(trials, rng),
        7 => check_prop7_general(trials, rng),
        8 => check_prop8_rankone_span(trials, rng),
        _ => Err(Error::InvalidArgument(format!(
            "no certification for proposition {id}; available: {CHECKED_PROPOSITIONS:?}"
        ))),
    }
}

/// All certifications in proposition order.
pub fn check_all(trials: usize, rng: &mut StreamRng) -> Result<Vec<CheckReport>> {
    CHECKED_PROPOSITIONS
        .iter()
        .map(|&id| check_proposition(id, trials, rng))
        .collect()
}
