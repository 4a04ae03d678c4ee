//! Replication engine: run R replicates of simulate -> fit nuisances ->
//! sample posterior -> summarize, then aggregate into the standard table row
//! set and persist the result. Everything here works in f64; the generic core
//! does the numerics.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::data::{Dataset, Matrix};
use crate::dgp::{plm_e0, plm_g0, plm_ky0, simulate_kernel_model, simulate_plm, PlmConfig};
use crate::error::{Error, Result};
use crate::nuisance::{
    clamp_propensity, fit_forest, fit_kernel, predictor_from_fn, AtTreatment, Bandwidth,
    ClampSpec, ForestConfig, PredictorHandle,
};
use crate::posterior::{sample_posterior, summarize, PosteriorSummary};
use crate::scores::{AipwScore, NuisanceFit, PartialledOutScore, Score};
use crate::stream::{derive_seed, substream};
use crate::weights::WeightScheme;

/// The true structural coefficient in both simulation designs.
pub const THETA0: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DgpSpec {
    /// Partially linear design with q covariates.
    Plm { q: usize },
    /// Univariate continuous-treatment design.
    KernelModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSpec {
    PartialledOut,
    Aipw,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LearnerSpec {
    Forest {
        #[serde(default)]
        config: ForestConfig,
    },
    Kernel {
        /// Fixed bandwidth; omitted means Silverman's rule.
        #[serde(default)]
        bandwidth: Option<f64>,
    },
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExperimentConfig {
    pub dgp: DgpSpec,
    pub score: ScoreSpec,
    pub learner: LearnerSpec,
    pub n: usize,
    pub replicates: usize,
    pub bootstrap: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    pub master_seed: u64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 || self.bootstrap == 0 {
            return Err(Error::Config(
                "replicates and bootstrap draws must be at least 1".into(),
            ));
        }
        if self.n < 2 {
            return Err(Error::Config("n must be at least 2".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config("level must lie in (0,1)".into()));
        }
        match (self.dgp, self.learner) {
            (DgpSpec::Plm { q }, _) if q < 5 => {
                return Err(Error::Config("plm requires q >= 5".into()))
            }
            (DgpSpec::Plm { .. }, LearnerSpec::Kernel { .. }) => {
                return Err(Error::Config(
                    "the univariate kernel learner only applies to the kernel_model dgp".into(),
                ))
            }
            _ => {}
        }
        if self.dgp == DgpSpec::KernelModel && self.score == ScoreSpec::Aipw {
            return Err(Error::Config(
                "aipw needs a binary treatment; kernel_model has a continuous one".into(),
            ));
        }
        Ok(())
    }
}

/// Per-table aggregate over replicates.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AggregateReport {
    pub avg_post_mean: f64,
    pub emp_freq_mean: f64,
    pub avg_post_var_times_n: f64,
    pub emp_freq_var_times_n: f64,
    pub avg_sandwich_times_n: f64,
    pub avg_cred_interval: (f64, f64),
    pub freq_interval: (f64, f64),
    pub coverage_pct: f64,
    pub rejected_draw_total: usize,
}

impl AggregateReport {
    pub fn is_finite(&self) -> bool {
        [
            self.avg_post_mean,
            self.emp_freq_mean,
            self.avg_post_var_times_n,
            self.emp_freq_var_times_n,
            self.avg_sandwich_times_n,
            self.avg_cred_interval.0,
            self.avg_cred_interval.1,
            self.freq_interval.0,
            self.freq_interval.1,
            self.coverage_pct,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Fits the nuisance functions for one replicate. The standard fitter trains
/// the configured learner; tests inject truth plug-ins through this seam.
pub trait NuisanceFitter: Sync {
    fn fit(&self, data: &Dataset<f64>, cfg: &ExperimentConfig, rep_seed: u64)
        -> Result<NuisanceFit<f64>>;
}

/// Trains the learner named in the config on the replicate's own data.
pub struct StandardFitter;

impl NuisanceFitter for StandardFitter {
    fn fit(
        &self,
        data: &Dataset<f64>,
        cfg: &ExperimentConfig,
        rep_seed: u64,
    ) -> Result<NuisanceFit<f64>> {
        match (cfg.score, cfg.learner) {
            (ScoreSpec::PartialledOut, LearnerSpec::Forest { config }) => {
                let k_y = ForestConfig {
                    seed: derive_seed(rep_seed, 1),
                    ..config
                };
                let e = ForestConfig {
                    seed: derive_seed(rep_seed, 2),
                    ..config
                };
                Ok(NuisanceFit::PartialledOut {
                    k_y: Arc::new(fit_forest(&data.x, &data.y, &k_y)?),
                    e: Arc::new(fit_forest(&data.x, &data.z, &e)?),
                })
            }
            (ScoreSpec::PartialledOut, LearnerSpec::Kernel { bandwidth }) => {
                let bw = match bandwidth {
                    Some(b) => Bandwidth::Fixed(b),
                    None => Bandwidth::Auto,
                };
                let x: Vec<f64> = (0..data.len()).map(|i| data.x.row(i)[0]).collect();
                Ok(NuisanceFit::PartialledOut {
                    k_y: Arc::new(fit_kernel(&x, &data.y, bw)?),
                    e: Arc::new(fit_kernel(&x, &data.z, bw)?),
                })
            }
            (ScoreSpec::Aipw, LearnerSpec::Forest { config }) => {
                // outcome model on the joint (Z, X) feature space, queried at
                // fixed treatment levels
                let n = data.len();
                let q = data.num_covariates();
                let mut joint = Vec::with_capacity(n);
                for i in 0..n {
                    let mut row = Vec::with_capacity(q + 1);
                    row.push(data.z[i]);
                    row.extend_from_slice(data.x.row(i));
                    joint.push(row);
                }
                let joint = Matrix::from_rows(joint)?;
                let mu_cfg = ForestConfig {
                    seed: derive_seed(rep_seed, 1),
                    ..config
                };
                let mu: PredictorHandle<f64> = Arc::new(fit_forest(&joint, &data.y, &mu_cfg)?);
                let e_cfg = ForestConfig {
                    seed: derive_seed(rep_seed, 2),
                    ..config
                };
                let e_raw: PredictorHandle<f64> = Arc::new(fit_forest(&data.x, &data.z, &e_cfg)?);
                Ok(NuisanceFit::Aipw {
                    mu1: Arc::new(AtTreatment::new(Arc::clone(&mu), 1.0)),
                    mu0: Arc::new(AtTreatment::new(mu, 0.0)),
                    e: clamp_propensity(e_raw, ClampSpec::default()),
                })
            }
            (ScoreSpec::Aipw, LearnerSpec::Kernel { .. }) => Err(Error::Config(
                "aipw is only wired to the forest learner".into(),
            )),
        }
    }
}

/// Plugs the data-generating truth in as the nuisance fit.
pub struct TruthFitter;

impl NuisanceFitter for TruthFitter {
    fn fit(
        &self,
        _data: &Dataset<f64>,
        cfg: &ExperimentConfig,
        _rep_seed: u64,
    ) -> Result<NuisanceFit<f64>> {
        match (cfg.dgp, cfg.score) {
            (DgpSpec::Plm { .. }, ScoreSpec::PartialledOut) => Ok(NuisanceFit::PartialledOut {
                k_y: predictor_from_fn(|x: &[f64]| plm_ky0(x, THETA0)),
                e: predictor_from_fn(plm_e0::<f64>),
            }),
            (DgpSpec::Plm { .. }, ScoreSpec::Aipw) => Ok(NuisanceFit::Aipw {
                mu1: predictor_from_fn(|x: &[f64]| THETA0 + plm_g0(x)),
                mu0: predictor_from_fn(plm_g0::<f64>),
                e: predictor_from_fn(plm_e0::<f64>),
            }),
            (DgpSpec::KernelModel, ScoreSpec::PartialledOut) => Ok(NuisanceFit::PartialledOut {
                k_y: predictor_from_fn(|x: &[f64]| THETA0 * x[0].sin() + x[0]),
                e: predictor_from_fn(|x: &[f64]| x[0].sin()),
            }),
            (DgpSpec::KernelModel, ScoreSpec::Aipw) => {
                Err(Error::Config("aipw is undefined for kernel_model".into()))
            }
        }
    }
}

fn simulate(cfg: &ExperimentConfig, rep_seed: u64) -> Result<Dataset<f64>> {
    let mut rng = substream(rep_seed, 0);
    match cfg.dgp {
        DgpSpec::Plm { q } => simulate_plm(&PlmConfig::new(cfg.n, q, THETA0)?, &mut rng),
        DgpSpec::KernelModel => simulate_kernel_model(cfg.n, &mut rng),
    }
}

fn score_of(cfg: &ExperimentConfig) -> &'static dyn Score<f64> {
    match cfg.score {
        ScoreSpec::PartialledOut => &PartialledOutScore,
        ScoreSpec::Aipw => &AipwScore,
    }
}

/// One replicate's summary plus its rejected-draw count.
fn run_replicate(
    cfg: &ExperimentConfig,
    fitter: &dyn NuisanceFitter,
    r: usize,
) -> Result<(PosteriorSummary<f64>, usize)> {
    let rep_seed = derive_seed(cfg.master_seed, r as u64);
    let data = simulate(cfg, rep_seed)?;
    let h = fitter.fit(&data, cfg, rep_seed)?;
    let sample = sample_posterior(
        &data,
        score_of(cfg),
        &h,
        cfg.bootstrap,
        WeightScheme::Dirichlet,
        derive_seed(rep_seed, 100),
    )?;
    let summary = summarize(&sample, cfg.level, Some(THETA0))?;
    Ok((summary, sample.rejected_draws))
}

/// Order-insensitive aggregation of replicate summaries.
pub fn aggregate(
    n: usize,
    level: f64,
    summaries: &[PosteriorSummary<f64>],
    rejected_draw_total: usize,
) -> Result<AggregateReport> {
    let r = summaries.len();
    if r == 0 {
        return Err(Error::invalid("no replicates to aggregate"));
    }
    let rf = r as f64;
    let nf = n as f64;
    let mean_of = |f: &dyn Fn(&PosteriorSummary<f64>) -> f64| {
        summaries.iter().map(f).sum::<f64>() / rf
    };
    let emp_freq_mean = mean_of(&|s| s.theta_hat_n);
    let emp_freq_var = if r > 1 {
        summaries
            .iter()
            .map(|s| (s.theta_hat_n - emp_freq_mean).powi(2))
            .sum::<f64>()
            / (rf - 1.0)
    } else {
        0.0
    };
    let covered = summaries
        .iter()
        .filter(|s| s.covers_true == Some(true))
        .count();
    let report = AggregateReport {
        avg_post_mean: mean_of(&|s| s.post_mean),
        emp_freq_mean,
        avg_post_var_times_n: nf * mean_of(&|s| s.post_var),
        emp_freq_var_times_n: nf * emp_freq_var,
        avg_sandwich_times_n: mean_of(&|s| sandwich_from(s, n, level)),
        avg_cred_interval: (mean_of(&|s| s.cred_lo), mean_of(&|s| s.cred_hi)),
        freq_interval: (mean_of(&|s| s.freq_lo), mean_of(&|s| s.freq_hi)),
        coverage_pct: 100.0 * covered as f64 / rf,
        rejected_draw_total,
    };
    if !report.is_finite() {
        return Err(Error::Internal("aggregate report is not finite".into()));
    }
    Ok(report)
}

/// Sandwich variance (times n, the asymptotic scale) implied by a summary's
/// Wald interval at the given level.
fn sandwich_from(s: &PosteriorSummary<f64>, n: usize, level: f64) -> f64 {
    let z = crate::stats::normal_quantile(1.0 - (1.0 - level) / 2.0).expect("valid quantile");
    let half = (s.freq_hi - s.freq_lo) / 2.0;
    (half / z).powi(2) * n as f64
}

/// Run the full experiment with the standard learner.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<AggregateReport> {
    run_experiment_with(cfg, &StandardFitter)
}

/// Run with an injected nuisance fitter (oracle baselines, tests).
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    fitter: &dyn NuisanceFitter,
) -> Result<AggregateReport> {
    cfg.validate()?;
    let results: Vec<Result<(PosteriorSummary<f64>, usize)>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            run_replicate(cfg, fitter, r).map_err(|e| Error::Replicate {
                replicate: r,
                source: Box::new(e),
            })
        })
        .collect();
    let mut summaries = Vec::with_capacity(cfg.replicates);
    let mut rejected = 0usize;
    for res in results {
        let (s, rej) = res?;
        summaries.push(s);
        rejected += rej;
    }
    aggregate(cfg.n, cfg.level, &summaries, rejected)
}

/// One cell of a dimension sweep.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepCell {
    pub q: usize,
    pub n: usize,
    pub report: AggregateReport,
}

/// Cross product of q_grid x n_grid over the partially linear design. Each
/// cell gets a seed derived from (q, n) so results do not depend on grid
/// order or shape.
pub fn run_dimension_sweep(
    base: &ExperimentConfig,
    q_grid: &[usize],
    n_grid: &[usize],
) -> Result<Vec<SweepCell>> {
    if !matches!(base.dgp, DgpSpec::Plm { .. }) {
        return Err(Error::Config("dimension sweep requires the plm dgp".into()));
    }
    if q_grid.is_empty() || n_grid.is_empty() {
        return Err(Error::Config("sweep grids must be non-empty".into()));
    }
    let mut cells = Vec::with_capacity(q_grid.len() * n_grid.len());
    for &q in q_grid {
        for &n in n_grid {
            let cfg = ExperimentConfig {
                dgp: DgpSpec::Plm { q },
                n,
                master_seed: derive_seed(base.master_seed, ((q as u64) << 32) | n as u64),
                ..base.clone()
            };
            let report = run_experiment(&cfg)?;
            cells.push(SweepCell { q, n, report });
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    TextTable,
    Delimited,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" | "text" | "text-table" => Ok(ReportFormat::TextTable),
            "delimited" | "tsv" => Ok(ReportFormat::Delimited),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::invalid(format!("unknown format '{other}'"))),
        }
    }
}

/// Render a report in the requested format; output is byte-stable for a given
/// report.
pub fn render_report(report: &AggregateReport, format: ReportFormat) -> Result<String> {
    if !report.is_finite() {
        return Err(Error::invalid("refusing to render a non-finite report"));
    }
    match format {
        ReportFormat::TextTable => {
            let rows = [
                (
                    "Average of the Posterior Means",
                    format!("{:.4}", report.avg_post_mean),
                ),
                (
                    "Mean of the Frequentist Estimators",
                    format!("{:.4}", report.emp_freq_mean),
                ),
                (
                    "Average of Posterior Variances (x n)",
                    format!("{:.4}", report.avg_post_var_times_n),
                ),
                (
                    "Empirical Variance of the Frequentist Estimators (x n)",
                    format!("{:.4}", report.emp_freq_var_times_n),
                ),
                (
                    "Average Sandwich Variance (x n)",
                    format!("{:.4}", report.avg_sandwich_times_n),
                ),
                (
                    "Average Bayesian Credible Interval",
                    format!(
                        "({:.4}, {:.4})",
                        report.avg_cred_interval.0, report.avg_cred_interval.1
                    ),
                ),
                (
                    "Frequentist Confidence Interval",
                    format!(
                        "({:.4}, {:.4})",
                        report.freq_interval.0, report.freq_interval.1
                    ),
                ),
                ("Posterior Coverage", format!("{:.2}", report.coverage_pct)),
                (
                    "Rejected Posterior Draws",
                    format!("{}", report.rejected_draw_total),
                ),
            ];
            let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            let mut out = String::new();
            for (k, v) in rows {
                out.push_str(&format!("{k:<width$}  {v}\n"));
            }
            Ok(out)
        }
        ReportFormat::Delimited => {
            let mut out = String::new();
            let mut kv = |k: &str, v: String| {
                out.push_str(k);
                out.push('\t');
                out.push_str(&v);
                out.push('\n');
            };
            kv("avg_post_mean", format!("{:?}", report.avg_post_mean));
            kv("emp_freq_mean", format!("{:?}", report.emp_freq_mean));
            kv(
                "avg_post_var_times_n",
                format!("{:?}", report.avg_post_var_times_n),
            );
            kv(
                "emp_freq_var_times_n",
                format!("{:?}", report.emp_freq_var_times_n),
            );
            kv(
                "avg_sandwich_times_n",
                format!("{:?}", report.avg_sandwich_times_n),
            );
            kv("avg_cred_lo", format!("{:?}", report.avg_cred_interval.0));
            kv("avg_cred_hi", format!("{:?}", report.avg_cred_interval.1));
            kv("freq_lo", format!("{:?}", report.freq_interval.0));
            kv("freq_hi", format!("{:?}", report.freq_interval.1));
            kv("coverage_pct", format!("{:?}", report.coverage_pct));
            kv(
                "rejected_draw_total",
                format!("{}", report.rejected_draw_total),
            );
            Ok(out)
        }
        ReportFormat::Json => serde_json::to_string_pretty(report)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| Error::Internal(format!("report serialization failed: {e}"))),
    }
}

/// Persist a rendered report.
pub fn emit_report(
    report: &AggregateReport,
    format: ReportFormat,
    path: &Path,
) -> Result<()> {
    let text = render_report(report, format)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parse a report previously emitted in JSON format.
pub fn parse_report(path: &Path) -> Result<AggregateReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Load an experiment configuration from a TOML file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg: ExperimentConfig =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}
