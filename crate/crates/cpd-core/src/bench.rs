//! Config-driven Monte Carlo benchmark harness.
//!
//! An [`ExperimentConfig`] describes a synthetic-data experiment: a data
//! model (spiked covariance or noisy CP), a grid of signal strengths, a
//! replicate count, and a list of fitting methods. [`run_experiment`] runs
//! every (grid point, replicate) cell on its own RNG sub-stream, fits all
//! requested methods to the *same* generated data (paired comparison), and
//! returns per-row error metrics plus a JSON-ready summary with per-cell
//! error quartiles and per-method runtimes.
//!
//! Reproducibility contract: rows are emitted in canonical (grid point,
//! replicate, method) order and the CSV rendering contains no timing
//! columns, so a rerun with the same config and seed produces byte-identical
//! CSV regardless of thread count or machine speed. Wall-clock numbers are
//! monotonic-clock measurements and live only in the summary.

use crate::baselines::{als_randomized, hosvd_init, ALSConfig};
use crate::coherence::match_components;
use crate::cpca::{cpca_general, cpca_symmetric};
use crate::error::{Error, Result};
use crate::ico::{ico_general, ico_symmetric, ICOConfig};
use crate::model::{covariance_tensor, gen_basis, gen_noisy_cp, gen_spiked_samples, CPDecomposition};
use crate::rng::StreamRng;
use crate::tensor::{DenseTensor, Matrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

/// Sub-streams with this bit set carry method-internal randomness (ALS
/// restarts), keeping the data stream identical across method lists.
const METHOD_STREAM_FLAG: u64 = 1 << 63;

/// Floor applied before taking log10 of an error.
const LOG_FLOOR: f64 = 1e-300;

/// Synthetic data model for an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Order-2K moment tensor averaged over n spiked-covariance samples.
    SpikedCovariance,
    /// Fixed CP tensor plus i.i.d. Gaussian entry noise.
    NoisyCp,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::SpikedCovariance => write!(f, "spiked-covariance"),
            ModelKind::NoisyCp => write!(f, "noisy-cp"),
        }
    }
}

/// Fitting method selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Composite PCA alone.
    Cpca,
    /// Composite PCA followed by ICO until tolerance or the sweep cap.
    CpcaIco,
    /// Composite PCA followed by exactly one ICO sweep.
    CpcaIcoOne,
    /// Per-mode truncated SVD of the unfoldings with least-squares weights.
    Hosvd,
    /// Randomized-restart ALS with clustering initialization.
    Als,
}

impl Method {
    pub fn parse(name: &str) -> Result<Method> {
        match name {
            "cpca" => Ok(Method::Cpca),
            "cpca+ico" => Ok(Method::CpcaIco),
            "cpca+ico1" => Ok(Method::CpcaIcoOne),
            "hosvd" => Ok(Method::Hosvd),
            "als" => Ok(Method::Als),
            _ => Err(Error::Parse(format!(
                "unknown method name {name:?}; known methods are cpca, cpca+ico, \
                 cpca+ico1, hosvd, als"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Cpca => "cpca",
            Method::CpcaIco => "cpca+ico",
            Method::CpcaIcoOne => "cpca+ico1",
            Method::Hosvd => "hosvd",
            Method::Als => "als",
        }
    }

    /// Human-readable label used in summaries.
    pub fn label(self) -> &'static str {
        match self {
            Method::Cpca => "CPCA",
            Method::CpcaIco => "CPCA + ICO",
            Method::CpcaIcoOne => "CPCA + one ICO sweep",
            Method::Hosvd => "HOSVD initialization",
            Method::Als => "ALS (this implementation)",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Optional overrides for the ICO refinement settings in a config file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcoOverrides {
    pub tolerance: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub ridge: Option<f64>,
}

impl IcoOverrides {
    pub fn resolve(&self) -> ICOConfig {
        let base = ICOConfig::default();
        ICOConfig {
            tolerance: self.tolerance.unwrap_or(base.tolerance),
            max_sweeps: self.max_sweeps.unwrap_or(base.max_sweeps),
            ridge: self.ridge.unwrap_or(base.ridge),
            trace: false,
        }
    }
}

/// Optional overrides for the ALS settings in a config file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlsOverrides {
    pub restarts: Option<usize>,
    pub power_iters: Option<usize>,
    pub cluster_threshold: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub tolerance: Option<f64>,
}

impl AlsOverrides {
    pub fn resolve(&self) -> ALSConfig {
        let base = ALSConfig::default();
        ALSConfig {
            restarts: self.restarts.unwrap_or(base.restarts),
            power_iters: self.power_iters.unwrap_or(base.power_iters),
            cluster_threshold: self.cluster_threshold.unwrap_or(base.cluster_threshold),
            max_sweeps: self.max_sweeps.unwrap_or(base.max_sweeps),
            tolerance: self.tolerance.unwrap_or(base.tolerance),
        }
    }
}

fn default_name() -> String {
    "experiment".into()
}

fn default_ratio() -> f64 {
    1.25
}

/// A complete experiment description, loadable from TOML.
///
/// `signal_grid` holds the top signal strength per grid point: w_max for the
/// spiked model (component weights, so the top CP weight is w_max^2) and
/// lambda_max for the noisy CP model. Within a grid point the r component
/// strengths decay geometrically from the top value down to top /
/// `signal_ratio`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub model: ModelKind,
    /// Sample-space mode sizes: K entries for the spiked model (the moment
    /// tensor has order 2K), N entries for the noisy CP model.
    pub dims: Vec<usize>,
    pub rank: usize,
    /// Pairwise coherence target for every ground-truth factor matrix.
    pub theta: f64,
    pub sigma: f64,
    /// Sample count for the spiked model; ignored by noisy-cp.
    #[serde(default)]
    pub samples: usize,
    pub signal_grid: Vec<f64>,
    #[serde(default = "default_ratio")]
    pub signal_ratio: f64,
    pub replicates: usize,
    pub methods: Vec<String>,
    pub seed: u64,
    #[serde(default)]
    pub ico: IcoOverrides,
    #[serde(default)]
    pub als: AlsOverrides,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Parse(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn parsed_methods(&self) -> Result<Vec<Method>> {
        self.methods.iter().map(|m| Method::parse(m)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::InvalidArgument("dims must be nonempty".into()));
        }
        if self.dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidArgument(format!(
                "every mode size must be at least 2, got {:?}",
                self.dims
            )));
        }
        let d_min = *self.dims.iter().min().unwrap();
        if self.rank == 0 || self.rank > d_min {
            return Err(Error::InvalidArgument(format!(
                "rank {} must lie in 1..={d_min} for dims {:?}",
                self.rank, self.dims
            )));
        }
        if !self.theta.is_finite() || self.theta < 0.0 || self.theta >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "coherence target {} must lie in [0, 1)",
                self.theta
            )));
        }
        if self.rank >= 2 && self.theta >= 1.0 / (self.rank as f64 - 1.0) {
            return Err(Error::InvalidArgument(format!(
                "coherence target {} is infeasible for rank {}: equicoherent \
                 frames need theta < 1/(r-1)",
                self.theta, self.rank
            )));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise level {} must be a finite nonnegative number",
                self.sigma
            )));
        }
        if self.model == ModelKind::SpikedCovariance && self.samples == 0 {
            return Err(Error::InvalidArgument(
                "the spiked model needs samples >= 1".into(),
            ));
        }
        if self.model == ModelKind::NoisyCp && self.dims.len() < 2 {
            return Err(Error::InvalidArgument(
                "the noisy CP model needs at least 2 modes".into(),
            ));
        }
        if self.signal_grid.is_empty() {
            return Err(Error::InvalidArgument("signal_grid must be nonempty".into()));
        }
        for &s in &self.signal_grid {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "signal strength {s} must be a finite positive number"
                )));
            }
        }
        if !(self.signal_ratio >= 1.0) || !self.signal_ratio.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "signal_ratio {} must be at least 1",
                self.signal_ratio
            )));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("methods must be nonempty".into()));
        }
        let methods = self.parsed_methods()?;
        self.ico.resolve().validate()?;
        if methods.contains(&Method::Als) {
            self.als.resolve().validate(self.rank)?;
        }
        Ok(())
    }
}

/// One fitted (method, grid point, replicate) outcome.
///
/// `seed` records the RNG sub-stream that generated the replicate's data;
/// together with the config seed it pins down the draw, and all methods in a
/// cell share it (paired design). `wall_ms` is excluded from the CSV
/// rendering so output bytes stay machine-independent.
#[derive(Clone, Debug, Serialize)]
pub struct ResultRow {
    pub method: String,
    pub signal: f64,
    pub replicate: usize,
    pub seed: u64,
    /// Largest matched sine-theta error over components and modes; 1.0 when
    /// the method failed outright.
    pub max_error: f64,
    pub log10_error: f64,
    /// Largest matched relative weight error, capped at 1.
    pub weight_rel_error: f64,
    /// Refinement sweeps consumed (0 for pure initializers).
    pub sweeps: usize,
    pub wall_ms: f64,
}

/// Per-(method, grid point) error statistics over replicates.
#[derive(Clone, Debug, Serialize)]
pub struct CellSummary {
    pub method: String,
    pub signal: f64,
    pub replicates: usize,
    /// Rows whose method failed outright (unit error sentinel).
    pub failures: usize,
    pub median_log10_error: f64,
    pub q1_log10_error: f64,
    pub q3_log10_error: f64,
    pub median_max_error: f64,
    pub median_weight_rel_error: f64,
}

/// Mean and standard deviation of method wall time across all rows.
#[derive(Clone, Debug, Serialize)]
pub struct RuntimeSummary {
    pub method: String,
    pub mean_ms: f64,
    pub sd_ms: f64,
}

/// Methods ranked by median log10 error at one grid point, best first.
/// Every pairwise median comparison can be read off the ranking.
#[derive(Clone, Debug, Serialize)]
pub struct OrderingSummary {
    pub signal: f64,
    pub methods_by_median_log10_error: Vec<String>,
}

/// JSON-ready digest of a finished experiment.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub name: String,
    pub model: String,
    pub seed: u64,
    pub replicates: usize,
    pub labels: BTreeMap<String, String>,
    pub notes: String,
    pub cells: Vec<CellSummary>,
    pub runtime_ms: Vec<RuntimeSummary>,
    pub orderings: Vec<OrderingSummary>,
}

/// Rows in canonical order plus the summary.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Summary,
}

impl ExperimentOutput {
    pub fn csv(&self) -> Result<String> {
        rows_to_csv(&self.rows)
    }

    pub fn summary_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.summary)
            .map_err(|e| Error::Parse(format!("summary serialization: {e}")))
    }
}

/// Render rows as RFC-4180 CSV without the wall-clock column, so identical
/// configs yield identical bytes.
pub fn rows_to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| Error::Parse(format!("csv rendering: {e}"));
    w.write_record([
        "method",
        "signal",
        "replicate",
        "seed",
        "max_error",
        "log10_error",
        "weight_rel_error",
        "sweeps",
    ])
    .map_err(io_err)?;
    for r in rows {
        w.write_record([
            r.method.as_str(),
            &r.signal.to_string(),
            &r.replicate.to_string(),
            &r.seed.to_string(),
            &r.max_error.to_string(),
            &r.log10_error.to_string(),
            &r.weight_rel_error.to_string(),
            &r.sweeps.to_string(),
        ])
        .map_err(io_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Parse(format!("csv rendering: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(format!("csv rendering: {e}")))
}

/// Component strengths at one grid point: geometric decay from `top` down to
/// `top / ratio`, squared for the spiked model where CP weights are w^2.
pub fn signal_weights(model: ModelKind, top: f64, r: usize, ratio: f64) -> Vec<f64> {
    let lo = top / ratio;
    let mut w: Vec<f64> = (0..r)
        .map(|j| {
            if r == 1 {
                top
            } else {
                top * (lo / top).powf(j as f64 / (r as f64 - 1.0))
            }
        })
        .collect();
    if model == ModelKind::SpikedCovariance {
        for x in &mut w {
            *x *= *x;
        }
    }
    w
}

fn cell_stream(cfg: &ExperimentConfig, grid_idx: usize, rep: usize) -> u64 {
    (grid_idx * cfg.replicates + rep) as u64 + 1
}

/// Run every cell of the experiment grid concurrently and collect rows in
/// canonical (grid point, replicate, method) order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let methods = cfg.parsed_methods()?;
    let ico_cfg = cfg.ico.resolve();
    let als_cfg = cfg.als.resolve();

    let cells: Vec<(usize, usize)> = (0..cfg.signal_grid.len())
        .flat_map(|gi| (0..cfg.replicates).map(move |rep| (gi, rep)))
        .collect();
    let per_cell: Vec<Vec<ResultRow>> = cells
        .par_iter()
        .map(|&(gi, rep)| run_cell(cfg, &methods, &ico_cfg, &als_cfg, gi, rep))
        .collect::<Result<_>>()?;
    let rows: Vec<ResultRow> = per_cell.into_iter().flatten().collect();
    let summary = summarize(cfg, &methods, &rows);
    Ok(ExperimentOutput { rows, summary })
}

fn run_cell(
    cfg: &ExperimentConfig,
    methods: &[Method],
    ico_cfg: &ICOConfig,
    als_cfg: &ALSConfig,
    grid_idx: usize,
    rep: usize,
) -> Result<Vec<ResultRow>> {
    let stream = cell_stream(cfg, grid_idx, rep);
    let mut rng = StreamRng::substream(cfg.seed, stream);
    let signal = cfg.signal_grid[grid_idx];
    let weights = signal_weights(cfg.model, signal, cfg.rank, cfg.signal_ratio);
    let factors: Vec<Matrix> = cfg
        .dims
        .iter()
        .map(|&d| gen_basis(d, cfg.rank, cfg.theta, &mut rng))
        .collect::<Result<_>>()?;
    let truth = CPDecomposition::new(
        weights,
        factors,
        cfg.model == ModelKind::SpikedCovariance,
    )?;
    let tensor = match cfg.model {
        ModelKind::SpikedCovariance => {
            let batch = gen_spiked_samples(&truth, cfg.samples, cfg.sigma, &mut rng)?;
            covariance_tensor(&batch)?
        }
        ModelKind::NoisyCp => gen_noisy_cp(&truth, cfg.sigma, &mut rng)?,
    };
    let truth_plain = truth.expanded();

    let mut rows = Vec::with_capacity(methods.len());
    for &method in methods {
        let start = Instant::now();
        let fit = fit_method(method, &tensor, cfg, ico_cfg, als_cfg, stream);
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let (max_error, weight_rel_error, sweeps) = match fit {
            Ok((est, sweeps)) => {
                let reference = if est.symmetric_pair() == truth.symmetric_pair() {
                    &truth
                } else {
                    &truth_plain
                };
                let matched = match_components(&est, reference)?;
                let wrel = matched
                    .weight_rel_errors
                    .iter()
                    .fold(0.0f64, |a, &b| a.max(b));
                (matched.max_error.clamp(0.0, 1.0), wrel.min(1.0), sweeps)
            }
            Err(err) => {
                eprintln!(
                    "{}: {method} failed at signal {signal}, replicate {}: {err}",
                    cfg.name,
                    rep + 1
                );
                (1.0, 1.0, 0)
            }
        };
        rows.push(ResultRow {
            method: method.name().to_string(),
            signal,
            replicate: rep + 1,
            seed: stream,
            max_error,
            log10_error: max_error.max(LOG_FLOOR).log10(),
            weight_rel_error,
            sweeps,
            wall_ms,
        });
    }
    Ok(rows)
}

fn fit_method(
    method: Method,
    tensor: &DenseTensor,
    cfg: &ExperimentConfig,
    ico_cfg: &ICOConfig,
    als_cfg: &ALSConfig,
    stream: u64,
) -> Result<(CPDecomposition, usize)> {
    let r = cfg.rank;
    let symmetric = cfg.model == ModelKind::SpikedCovariance;
    let cpca_fit = |t: &DenseTensor| {
        if symmetric {
            cpca_symmetric(t, r)
        } else {
            cpca_general(t, r, None)
        }
    };
    match method {
        Method::Cpca => Ok((cpca_fit(tensor)?.estimate, 0)),
        Method::CpcaIco | Method::CpcaIcoOne => {
            let init = cpca_fit(tensor)?.estimate.factors().to_vec();
            let local = ICOConfig {
                max_sweeps: if method == Method::CpcaIcoOne {
                    1
                } else {
                    ico_cfg.max_sweeps
                },
                ..ico_cfg.clone()
            };
            let (est, trace) = if symmetric {
                ico_symmetric(tensor, r, &init, &local)?
            } else {
                ico_general(tensor, r, &init, &local)?
            };
            Ok((est, trace.sweeps_used))
        }
        Method::Hosvd => Ok((hosvd_init(tensor, r)?, 0)),
        Method::Als => {
            let mut rng = StreamRng::substream(cfg.seed, stream | METHOD_STREAM_FLAG);
            let (est, trace) = als_randomized(tensor, r, als_cfg, &mut rng)?;
            Ok((est, trace.sweeps_used))
        }
    }
}

/// Interpolated percentile (linear between order statistics) of a sorted
/// slice; `p` in [0, 1].
fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() as f64 - 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn summarize(cfg: &ExperimentConfig, methods: &[Method], rows: &[ResultRow]) -> Summary {
    let mut labels = BTreeMap::new();
    for &m in methods {
        labels.insert(m.name().to_string(), m.label().to_string());
    }

    let mut cells = Vec::new();
    for &signal in &cfg.signal_grid {
        for &m in methods {
            let cell: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.method == m.name() && r.signal == signal)
                .collect();
            let mut logs: Vec<f64> = cell.iter().map(|r| r.log10_error).collect();
            let mut errs: Vec<f64> = cell.iter().map(|r| r.max_error).collect();
            let mut wrels: Vec<f64> = cell.iter().map(|r| r.weight_rel_error).collect();
            logs.sort_by(f64::total_cmp);
            errs.sort_by(f64::total_cmp);
            wrels.sort_by(f64::total_cmp);
            cells.push(CellSummary {
                method: m.name().to_string(),
                signal,
                replicates: cell.len(),
                failures: cell.iter().filter(|r| r.max_error >= 1.0).count(),
                median_log10_error: percentile(&logs, 0.5),
                q1_log10_error: percentile(&logs, 0.25),
                q3_log10_error: percentile(&logs, 0.75),
                median_max_error: percentile(&errs, 0.5),
                median_weight_rel_error: percentile(&wrels, 0.5),
            });
        }
    }

    let runtime_ms = methods
        .iter()
        .map(|&m| {
            let times: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == m.name())
                .map(|r| r.wall_ms)
                .collect();
            let n = times.len().max(1) as f64;
            let mean = times.iter().sum::<f64>() / n;
            let var = if times.len() > 1 {
                times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            RuntimeSummary {
                method: m.name().to_string(),
                mean_ms: mean,
                sd_ms: var.sqrt(),
            }
        })
        .collect();

    let orderings = cfg
        .signal_grid
        .iter()
        .map(|&signal| {
            let mut ranked: Vec<(&CellSummary, usize)> = cells
                .iter()
                .filter(|c| c.signal == signal)
                .zip(0usize..)
                .collect();
            ranked.sort_by(|a, b| {
                f64::total_cmp(&a.0.median_log10_error, &b.0.median_log10_error)
                    .then(a.1.cmp(&b.1))
            });
            OrderingSummary {
                signal,
                methods_by_median_log10_error: ranked
                    .into_iter()
                    .map(|(c, _)| c.method.clone())
                    .collect(),
            }
        })
        .collect();

    Summary {
        name: cfg.name.clone(),
        model: cfg.model.to_string(),
        seed: cfg.seed,
        replicates: cfg.replicates,
        labels,
        notes: "als rows come from this crate's randomized-restart ALS; the \
                orthogonalized ALS variant from the comparison set is not \
                implemented"
            .into(),
        cells,
        runtime_ms,
        orderings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_toml() -> String {
        r#"
            name = "unit"
            model = "noisy-cp"
            dims = [5, 5, 5]
            rank = 2
            theta = 0.2
            sigma = 0.01
            signal_grid = [3.0, 4.0]
            replicates = 2
            methods = ["cpca", "cpca+ico", "hosvd", "als"]
            seed = 77

            [als]
            restarts = 12
            power_iters = 12
        "#
        .to_string()
    }

    #[test]
    fn config_round_trips_from_toml() {
        let cfg = ExperimentConfig::from_toml(&base_toml()).unwrap();
        assert_eq!(cfg.model, ModelKind::NoisyCp);
        assert_eq!(cfg.signal_ratio, 1.25);
        assert_eq!(cfg.als.resolve().restarts, 12);
        assert_eq!(cfg.ico.resolve().max_sweeps, ICOConfig::default().max_sweeps);
        let again = ExperimentConfig::from_toml(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again.methods, cfg.methods);
        assert_eq!(again.seed, cfg.seed);
    }

    #[test]
    fn config_rejects_bad_inputs() {
        let reject = |edit: &dyn Fn(&mut ExperimentConfig), needle: &str| {
            let mut cfg = ExperimentConfig::from_toml(&base_toml()).unwrap();
            edit(&mut cfg);
            let err = cfg.validate().unwrap_err().to_string();
            assert!(err.contains(needle), "{err:?} does not mention {needle:?}");
        };
        reject(&|c| c.methods = vec!["oals".into()], "unknown method");
        reject(
            &|c| {
                c.rank = 3;
                c.theta = 0.6;
            },
            "infeasible",
        );
        reject(&|c| c.signal_grid.clear(), "signal_grid");
        reject(&|c| c.replicates = 0, "replicates");
        reject(
            &|c| {
                c.model = ModelKind::SpikedCovariance;
                c.samples = 0;
            },
            "samples",
        );
        reject(&|c| c.rank = 9, "rank");
        reject(&|c| c.als.restarts = Some(1), "restart");
    }

    #[test]
    fn noiseless_orthogonal_cpca_is_exact() {
        let mut cfg = ExperimentConfig::from_toml(&base_toml()).unwrap();
        cfg.dims = vec![6, 6, 6];
        cfg.theta = 0.0;
        cfg.sigma = 0.0;
        cfg.signal_grid = vec![2.0];
        cfg.replicates = 1;
        cfg.methods = vec!["cpca".into()];
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert!(out.rows[0].max_error <= 1e-10, "{}", out.rows[0].max_error);
    }

    #[test]
    fn csv_bytes_are_reproducible_and_rows_canonical() {
        let cfg = ExperimentConfig::from_toml(&base_toml()).unwrap();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.csv().unwrap(), b.csv().unwrap());

        assert_eq!(a.rows.len(), 2 * 2 * 4);
        let mut i = 0;
        for &signal in &cfg.signal_grid {
            for rep in 1..=cfg.replicates {
                for name in &cfg.methods {
                    let row = &a.rows[i];
                    assert_eq!(row.method, *name);
                    assert_eq!(row.signal, signal);
                    assert_eq!(row.replicate, rep);
                    i += 1;
                }
            }
        }
        let csv = a.csv().unwrap();
        assert!(csv.starts_with("method,signal,replicate,seed,max_error"));
        assert!(!csv.contains("wall"));
    }

    #[test]
    fn methods_within_a_cell_share_the_data_stream() {
        let cfg = ExperimentConfig::from_toml(&base_toml()).unwrap();
        let out = run_experiment(&cfg).unwrap();
        let mut streams = std::collections::BTreeSet::new();
        for chunk in out.rows.chunks(cfg.methods.len()) {
            let seed = chunk[0].seed;
            assert!(chunk.iter().all(|r| r.seed == seed));
            assert!(streams.insert(seed), "cell stream {seed} reused");
        }
    }

    #[test]
    fn failed_method_reports_unit_error() {
        let mut cfg = ExperimentConfig::from_toml(&base_toml()).unwrap();
        // a tiny merge threshold collapses every ALS candidate into one
        // cluster, so clustering cannot find rank distinct groups
        cfg.als.cluster_threshold = Some(1e-6);
        cfg.signal_grid = vec![3.0];
        cfg.replicates = 1;
        let out = run_experiment(&cfg).unwrap();
        let als_row = out.rows.iter().find(|r| r.method == "als").unwrap();
        assert_eq!(als_row.max_error, 1.0);
        assert_eq!(als_row.log10_error, 0.0);
        assert_eq!(als_row.weight_rel_error, 1.0);
        assert_eq!(als_row.sweeps, 0);
        let cpca_row = out.rows.iter().find(|r| r.method == "cpca").unwrap();
        assert!(cpca_row.max_error < 0.5);
        let cell = out
            .summary
            .cells
            .iter()
            .find(|c| c.method == "als")
            .unwrap();
        assert_eq!(cell.failures, 1);
    }

    #[test]
    fn spiked_rows_compare_against_expanded_truth() {
        let cfg = ExperimentConfig::from_toml(
            r#"
                name = "spiked-unit"
                model = "spiked-covariance"
                dims = [6, 6]
                rank = 2
                theta = 0.2
                sigma = 0.5
                samples = 300
                signal_grid = [6.0]
                replicates = 3
                methods = ["cpca", "cpca+ico", "hosvd"]
                seed = 4242

                [ico]
                tolerance = 1e-9
            "#,
        )
        .unwrap();
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.rows.len(), 9);
        for row in &out.rows {
            assert!((0.0..=1.0).contains(&row.max_error), "{row:?}");
            assert!(row.log10_error.is_finite());
            if row.method == "cpca+ico" {
                assert!(row.sweeps >= 1);
            }
        }
        let median = |name: &str| {
            out.summary
                .cells
                .iter()
                .find(|c| c.method == name)
                .unwrap()
                .median_log10_error
        };
        assert!(
            median("cpca+ico") < median("cpca"),
            "ico {} vs cpca {}",
            median("cpca+ico"),
            median("cpca")
        );
    }

    #[test]
    fn summary_ranks_methods_by_median_error() {
        let cfg = ExperimentConfig::from_toml(&base_toml()).unwrap();
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.summary.cells.len(), 2 * 4);
        assert_eq!(out.summary.runtime_ms.len(), 4);
        assert!(out.summary.labels["als"].contains("this implementation"));
        for ord in &out.summary.orderings {
            let med = |name: &str| {
                out.summary
                    .cells
                    .iter()
                    .find(|c| c.method == name && c.signal == ord.signal)
                    .unwrap()
                    .median_log10_error
            };
            for pair in ord.methods_by_median_log10_error.windows(2) {
                assert!(med(&pair[0]) <= med(&pair[1]));
            }
        }
        let json = out.summary_json().unwrap();
        assert!(json.contains("orderings"));
    }

    #[test]
    fn weight_grid_decays_geometrically() {
        let w = signal_weights(ModelKind::NoisyCp, 10.0, 3, 1.25);
        assert!((w[0] - 10.0).abs() < 1e-12);
        assert!((w[2] - 8.0).abs() < 1e-12);
        assert!((w[1] * w[1] - w[0] * w[2]).abs() < 1e-9);
        let lam = signal_weights(ModelKind::SpikedCovariance, 10.0, 3, 1.25);
        assert!((lam[0] - 100.0).abs() < 1e-9);
        assert!((lam[2] - 64.0).abs() < 1e-9);
        let single = signal_weights(ModelKind::NoisyCp, 5.0, 1, 1.25);
        assert_eq!(single, vec![5.0]);
    }
}
