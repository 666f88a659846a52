//! Configuration loading, reward-map files, and run artifact emission
//! (step tables, aggregate records, theory reports).

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{sample_prior_field, Kernel, RewardField};
use crate::graph::{build_grid, CoverageModel};
use crate::policy::{OracleKind, PolicyConfig, PolicyKind};
use crate::sim::{regret_series, Environment, GpModelConfig, RunTrace};
use crate::theory::TheoryReport;

pub const SCHEMA_VERSION: u32 = 1;

fn default_alpha() -> f64 {
    1.0 - (-1.0f64).exp()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsSection {
    pub count: usize,
    /// Per-agent sensing radius; a single-element list is broadcast.
    #[serde(default)]
    pub hop_radii: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardFamily {
    GpSample,
    Normal,
    Uniform,
    Sparse,
    File,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardSection {
    pub family: RewardFamily,
    pub sparse_count: usize,
    pub file: Option<PathBuf>,
}

impl Default for RewardSection {
    fn default() -> Self {
        RewardSection {
            family: RewardFamily::GpSample,
            sparse_count: 4,
            file: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    SquaredExponential,
    Diagonal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kernel: KernelKind,
    pub length_scale: f64,
    pub signal_variance: f64,
    pub noise_var: f64,
    pub prior_mean: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kernel: KernelKind::SquaredExponential,
            length_scale: 0.5,
            signal_variance: 1.0,
            noise_var: 0.1,
            prior_mean: 0.0,
        }
    }
}

impl ModelSection {
    pub fn kernel(&self) -> Kernel {
        match self.kernel {
            KernelKind::SquaredExponential => Kernel::SquaredExponential {
                length_scale: self.length_scale,
                signal_variance: self.signal_variance,
            },
            KernelKind::Diagonal => Kernel::Diagonal {
                signal_variance: self.signal_variance,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySection {
    pub kind: PolicyKind,
    pub delta: f64,
    pub alpha: f64,
    pub oracle: OracleKind,
    pub beta_override: Option<f64>,
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection {
            kind: PolicyKind::MacDt,
            delta: 0.1,
            alpha: default_alpha(),
            oracle: OracleKind::Greedy,
            beta_override: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Fixed initial positions; when absent they are drawn per seed.
    pub init_positions: Option<Vec<usize>>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            horizon: 400,
            seeds: vec![0],
            output_dir: PathBuf::from("out"),
            init_positions: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SafetySection {
    pub enabled: bool,
    /// Row-major safety values g(v); negative means unsafe.
    pub hazard: Option<Vec<f64>>,
    pub hazard_file: Option<PathBuf>,
    pub safe_seed: Vec<usize>,
    pub kernel: KernelKind,
    pub signal_variance: f64,
    pub noise_var: f64,
    pub prior_mean: f64,
}

impl Default for SafetySection {
    fn default() -> Self {
        SafetySection {
            enabled: false,
            hazard: None,
            hazard_file: None,
            safe_seed: Vec::new(),
            kernel: KernelKind::Diagonal,
            signal_variance: 1.0,
            noise_var: 0.0,
            prior_mean: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub agents: AgentsSection,
    #[serde(default)]
    pub reward: RewardSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub safety: SafetySection,
}

fn cfg_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.rows == 0 || self.grid.cols == 0 {
            return Err(cfg_err("grid", "rows and cols must be >= 1"));
        }
        if self.agents.count == 0 {
            return Err(cfg_err("agents.count", "at least one agent required"));
        }
        if let Some(radii) = &self.agents.hop_radii {
            if radii.len() != self.agents.count && radii.len() != 1 {
                return Err(cfg_err(
                    "agents.hop_radii",
                    format!(
                        "expected 1 or {} radii, got {}",
                        self.agents.count,
                        radii.len()
                    ),
                ));
            }
        }
        if self.reward.family == RewardFamily::File && self.reward.file.is_none() {
            return Err(cfg_err("reward.file", "file family requires a path"));
        }
        if self.reward.family == RewardFamily::Sparse && self.reward.sparse_count == 0 {
            return Err(cfg_err("reward.sparse_count", "must be >= 1"));
        }
        if self.model.noise_var < 0.0 || self.model.signal_variance <= 0.0 {
            return Err(cfg_err("model", "noise_var >= 0 and signal_variance > 0 required"));
        }
        if self.model.kernel == KernelKind::SquaredExponential && self.model.length_scale <= 0.0 {
            return Err(cfg_err("model.length_scale", "must be > 0"));
        }
        if !(self.policy.delta > 0.0 && self.policy.delta < 1.0) {
            return Err(cfg_err("policy.delta", "must lie in (0, 1)"));
        }
        if !(self.policy.alpha > 0.0 && self.policy.alpha <= 1.0) {
            return Err(cfg_err("policy.alpha", "must lie in (0, 1]"));
        }
        if self.run.horizon == 0 {
            return Err(cfg_err("run.horizon", "must be >= 1"));
        }
        if self.run.seeds.is_empty() {
            return Err(cfg_err("run.seeds", "at least one seed required"));
        }
        let n = self.grid.rows * self.grid.cols;
        if let Some(pos) = &self.run.init_positions {
            if pos.len() != self.agents.count {
                return Err(cfg_err("run.init_positions", "one position per agent"));
            }
            if pos.iter().any(|&p| p >= n) {
                return Err(cfg_err("run.init_positions", "vertex out of range"));
            }
        }
        if self.policy.kind.is_safe_variant() {
            if !self.safety.enabled {
                return Err(cfg_err("safety.enabled", "safe policies require the safety block"));
            }
            if self.safety.hazard.is_none() && self.safety.hazard_file.is_none() {
                return Err(cfg_err("safety", "hazard values or hazard_file required"));
            }
            if self.safety.safe_seed.is_empty() {
                return Err(cfg_err("safety.safe_seed", "at least one seed vertex required"));
            }
            if self.safety.safe_seed.iter().any(|&v| v >= n) {
                return Err(cfg_err("safety.safe_seed", "vertex out of range"));
            }
        }
        if let Some(h) = &self.safety.hazard {
            if h.len() != n {
                return Err(cfg_err("safety.hazard", format!("expected {n} values, got {}", h.len())));
            }
        }
        Ok(())
    }

    pub fn hop_radii(&self) -> Vec<usize> {
        match &self.agents.hop_radii {
            None => vec![1; self.agents.count],
            Some(r) if r.len() == 1 => vec![r[0]; self.agents.count],
            Some(r) => r.clone(),
        }
    }

    pub fn policy_config(&self) -> PolicyConfig {
        PolicyConfig {
            kind: self.policy.kind,
            delta: self.policy.delta,
            alpha: self.policy.alpha,
            oracle: self.policy.oracle,
            beta_override: self.policy.beta_override,
        }
    }

    pub fn gp_model_config(&self) -> GpModelConfig {
        let safety_kernel = match self.safety.kernel {
            KernelKind::SquaredExponential => Kernel::SquaredExponential {
                length_scale: self.model.length_scale,
                signal_variance: self.safety.signal_variance,
            },
            KernelKind::Diagonal => Kernel::Diagonal {
                signal_variance: self.safety.signal_variance,
            },
        };
        GpModelConfig {
            kernel: self.model.kernel(),
            prior_mean: self.model.prior_mean,
            safety_kernel,
            safety_prior_mean: self.safety.prior_mean,
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let config: RunConfig = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Row-major reward (or hazard) values stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFieldFile {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<String>,
}

impl GridFieldFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let file: GridFieldFile =
            serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.values.len() != file.rows * file.cols {
            return Err(Error::Parse(format!(
                "field file holds {} values for a {}x{} grid",
                file.values.len(),
                file.rows,
                file.cols
            )));
        }
        Ok(file)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }
}

/// Loads a stored field and shifts it so the minimum is zero. Dimensions must
/// match the expected grid.
pub fn ingest_reward_grid(path: &Path, rows: usize, cols: usize) -> Result<RewardField> {
    let file = GridFieldFile::read(path)?;
    if file.rows != rows || file.cols != cols {
        return Err(Error::DimensionMismatch {
            file_rows: file.rows,
            file_cols: file.cols,
            rows,
            cols,
        });
    }
    let min = file.values.iter().cloned().fold(f64::INFINITY, f64::min);
    RewardField::new(file.values.iter().map(|v| v - min).collect())
}

/// Draws a reward field for the configured family. Pure function of the rng
/// state, so field generation consumes a well-defined prefix of stream 0.
pub fn generate_field<R: Rng>(config: &RunConfig, rng: &mut R) -> Result<RewardField> {
    let n = config.grid.rows * config.grid.cols;
    let graph = build_grid(config.grid.rows, config.grid.cols)?;
    match config.reward.family {
        RewardFamily::GpSample => sample_prior_field(&config.model.kernel(), &graph, rng),
        RewardFamily::Normal => {
            let raw: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            let min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
            RewardField::new(raw.iter().map(|v| v - min).collect())
        }
        RewardFamily::Uniform => {
            RewardField::new((0..n).map(|_| rng.random_range(0.0..1.0)).collect())
        }
        RewardFamily::Sparse => {
            let k = config.reward.sparse_count.min(n);
            let picks = rand::seq::index::sample(rng, n, k);
            let mut values = vec![0.0; n];
            for v in picks {
                values[v] = 1.0;
            }
            RewardField::new(values)
        }
        RewardFamily::File => {
            let path = config.reward.file.as_ref().expect("validated");
            ingest_reward_grid(path, config.grid.rows, config.grid.cols)
        }
    }
}

/// Instantiates the environment for one seed. Stream 0 of the seed drives
/// field generation then initial positions; the simulator owns stream 1.
pub fn build_environment(config: &RunConfig, seed: u64) -> Result<Environment> {
    config.validate()?;
    let graph = build_grid(config.grid.rows, config.grid.cols)?;
    let cov = CoverageModel::for_graph(&graph, config.hop_radii())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let mut reward = generate_field(config, &mut rng)?;
    if config.safety.enabled {
        let n = graph.vertex_count();
        let hazard = match (&config.safety.hazard, &config.safety.hazard_file) {
            (Some(h), _) => h.clone(),
            (None, Some(path)) => {
                let file = GridFieldFile::read(path)?;
                if file.rows != config.grid.rows || file.cols != config.grid.cols {
                    return Err(Error::DimensionMismatch {
                        file_rows: file.rows,
                        file_cols: file.cols,
                        rows: config.grid.rows,
                        cols: config.grid.cols,
                    });
                }
                file.values
            }
            (None, None) => vec![0.0; n],
        };
        reward.safety = Some(hazard);
    }
    let init_positions = match &config.run.init_positions {
        Some(p) => p.clone(),
        None => {
            let n = graph.vertex_count();
            if config.policy.kind.is_safe_variant() {
                // Safe runs start on the declared safe seed vertices.
                (0..config.agents.count)
                    .map(|i| config.safety.safe_seed[i % config.safety.safe_seed.len()])
                    .collect()
            } else {
                (0..config.agents.count)
                    .map(|_| rng.random_range(0..n))
                    .collect()
            }
        }
    };
    Ok(Environment {
        graph,
        cov,
        reward,
        noise_var: config.model.noise_var,
        safety_noise_var: config.safety.noise_var,
        horizon: config.run.horizon,
        seed,
        init_positions,
        safe_seed: config.safety.safe_seed.clone(),
    })
}

/// Writes the per-run comma-separated step table. Columns are exactly:
/// t, episode, coverage_value, cum_regret, cum_alpha_regret, clean_event.
pub fn step_table(trace: &RunTrace) -> String {
    let plain = regret_series(trace, 1.0);
    let alpha = regret_series(trace, trace.alpha);
    let clean: std::collections::BTreeMap<usize, bool> = trace
        .episodes
        .iter()
        .map(|e| (e.index, e.clean_event))
        .collect();
    let mut out = String::from("t,episode,coverage_value,cum_regret,cum_alpha_regret,clean_event\n");
    for (i, s) in trace.steps.iter().enumerate() {
        let ce = u8::from(*clean.get(&s.episode).unwrap_or(&false));
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.t, s.episode, s.coverage_value, plain[i], alpha[i], ce
        ));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateRecord {
    pub schema_version: u32,
    pub software_version: String,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    pub horizon: usize,
    /// Per-t mean of the cumulative alpha-regret across seeds.
    pub mean_cum_alpha_regret: Vec<f64>,
    /// 95% normal-approximation confidence half-width per t.
    pub ci_half_width: Vec<f64>,
    pub final_regret_per_seed: Vec<f64>,
}

pub fn aggregate(config: &RunConfig, runs: &[(u64, &RunTrace)]) -> Result<AggregateRecord> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("at least one trace required".into()));
    }
    let horizon = runs[0].1.steps.len();
    let series: Vec<Vec<f64>> = runs
        .iter()
        .map(|(_, t)| regret_series(t, t.alpha))
        .collect();
    if series.iter().any(|s| s.len() != horizon) {
        return Err(Error::InvalidArgument("traces have differing horizons".into()));
    }
    let n = runs.len() as f64;
    let mut mean = vec![0.0; horizon];
    let mut ci = vec![0.0; horizon];
    for t in 0..horizon {
        let m: f64 = series.iter().map(|s| s[t]).sum::<f64>() / n;
        mean[t] = m;
        if runs.len() > 1 {
            let var: f64 =
                series.iter().map(|s| (s[t] - m).powi(2)).sum::<f64>() / (n - 1.0);
            ci[t] = 1.96 * (var / n).sqrt();
        }
    }
    Ok(AggregateRecord {
        schema_version: SCHEMA_VERSION,
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        seeds: runs.iter().map(|&(s, _)| s).collect(),
        horizon,
        mean_cum_alpha_regret: mean,
        ci_half_width: ci,
        final_regret_per_seed: series.iter().map(|s| *s.last().unwrap()).collect(),
    })
}

/// Emits all artifacts for a batch of runs: one step table and one theory
/// report per run, plus one aggregate record. Returns the written paths.
pub fn write_outputs(
    config: &RunConfig,
    runs: &[(u64, RunTrace)],
    reports: &[(u64, TheoryReport)],
) -> Result<Vec<PathBuf>> {
    let dir = &config.run.output_dir;
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (seed, trace) in runs {
        let path = dir.join(format!("steps_seed{seed}.csv"));
        fs::write(&path, step_table(trace))?;
        written.push(path);
    }
    for (seed, report) in reports {
        let path = dir.join(format!("theory_seed{seed}.json"));
        let text =
            serde_json::to_string_pretty(report).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(&path, text)?;
        written.push(path);
    }
    let refs: Vec<(u64, &RunTrace)> = runs.iter().map(|(s, t)| (*s, t)).collect();
    let record = aggregate(config, &refs)?;
    let path = dir.join("aggregate.json");
    let text = serde_json::to_string_pretty(&record).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(&path, text)?;
    written.push(path);
    Ok(written)
}
