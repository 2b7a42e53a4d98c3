//! Stage execution for `run`.
//!
//! Stages always execute in the order ingest, filter, describe, estimate,
//! irf, volatility, report. A requested stage whose inputs come from a stage
//! that was not requested recomputes them in memory without writing them, so
//! `--stages describe` emits only the describe artifacts. The one exception
//! is the posterior sample: when `save_chain` left a matching chain under
//! `chain/`, later stages reuse it instead of re-running the sampler.
//!
//! Randomness: every chain draws from `RngStream::new(seed)`, split first by
//! [`ESTIMATE_STREAM`] and then by chain index. No other stage is random.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use tvpsv::cycles::{
    cross_correlation, era_stats, hamilton_filter_panel, per_cycle_stats, phase_trajectory, segment_cycles,
    write_ccf_csv, write_cycles_csv, write_phase_csv, CrossCorrelation, CycleStats, CycleWindow, EraStd,
    PhaseTrajectory, ReportScales, WindowStd,
};
use tvpsv::ingest::{align_panel, load_series_csv, AlignedPanel, RawSeries};
use tvpsv::irf::{posterior_irf, residual_volatility_paths, write_volatility_csv, PosteriorIrf, VolatilityPath};
use tvpsv::kernel::RngStream;
use tvpsv::model::{convergence_diagnostics, prepare, run_chain, ChainStore, ParameterDiagnostics};
use tvpsv::QuarterDate;

use crate::config::{LoadedConfig, RunConfig, Severity};
use crate::error::{from_core, CliError};
use crate::manifest::{write_manifest, Manifest};

/// Stream id reserved for the sampler; chain `c` uses `split(ESTIMATE_STREAM).split(c)`.
pub const ESTIMATE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Filter,
    Describe,
    Estimate,
    Irf,
    Volatility,
    Report,
}

pub const ALL_STAGES: [Stage; 7] = [
    Stage::Ingest,
    Stage::Filter,
    Stage::Describe,
    Stage::Estimate,
    Stage::Irf,
    Stage::Volatility,
    Stage::Report,
];

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Filter => "filter",
            Stage::Describe => "describe",
            Stage::Estimate => "estimate",
            Stage::Irf => "irf",
            Stage::Volatility => "volatility",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses a comma-separated stage list into execution order.
pub fn parse_stages(list: &str) -> Result<Vec<Stage>, CliError> {
    let mut out = Vec::new();
    for token in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let stage = ALL_STAGES
            .iter()
            .copied()
            .find(|s| s.name() == token)
            .ok_or_else(|| {
                CliError::Input(format!(
                    "unknown stage {token:?}; expected one of {}",
                    ALL_STAGES.map(Stage::name).join(", ")
                ))
            })?;
        out.push(stage);
    }
    if out.is_empty() {
        return Err(CliError::Input("empty stage list".into()));
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Stages to execute; empty means all.
    pub stages: Vec<Stage>,
    /// Output directory overriding the config (relative to the working
    /// directory).
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub chains: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            stages: vec![],
            out: None,
            seed: None,
            chains: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

struct Description {
    windows: Vec<CycleWindow>,
    stats: CycleStats,
    eras: Vec<EraStd>,
    ccf: Vec<(String, String, CrossCorrelation)>,
    phases: Vec<PhaseTrajectory>,
}

struct Estimation {
    pooled: ChainStore,
    chains: Vec<ChainStore>,
    /// Per chain; `None` when the chain is too short for diagnostics.
    diagnostics: Vec<Option<Vec<ParameterDiagnostics>>>,
    reused: bool,
}

struct Context<'a> {
    loaded: &'a LoadedConfig,
    config: RunConfig,
    out: PathBuf,
    chains: usize,
    files: Vec<String>,
    panel: Option<AlignedPanel>,
    cyclical: Option<AlignedPanel>,
    description: Option<Description>,
    estimation: Option<Estimation>,
    irf: Option<PosteriorIrf>,
    volatility: Option<Vec<VolatilityPath>>,
}

/// Validates the config and runs the requested stages.
pub fn run(loaded: &LoadedConfig, options: &RunOptions) -> Result<RunOutcome, CliError> {
    let mut config = loaded.config.clone();
    if let Some(seed) = options.seed {
        config.model.seed = seed;
    }
    let errors: Vec<String> = config
        .validate()
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .map(|d| d.to_string())
        .collect();
    if !errors.is_empty() {
        return Err(CliError::Input(format!("invalid config:\n  {}", errors.join("\n  "))));
    }
    if options.chains == 0 {
        return Err(CliError::Input("--chains must be at least 1".into()));
    }
    let out = match &options.out {
        Some(dir) => dir.clone(),
        None => loaded.resolve(&config.output),
    };
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Input(format!("cannot create output directory {}: {e}", out.display())))?;
    let stages = if options.stages.is_empty() {
        ALL_STAGES.to_vec()
    } else {
        options.stages.clone()
    };
    let seed = config.model.seed;
    let mut ctx = Context {
        loaded,
        config,
        out: out.clone(),
        chains: options.chains,
        files: vec![],
        panel: None,
        cyclical: None,
        description: None,
        estimation: None,
        irf: None,
        volatility: None,
    };
    for &stage in &stages {
        ctx.run_stage(stage)?;
    }
    let names = stages.iter().map(|s| s.name().to_string()).collect();
    let manifest = write_manifest(&out, names, seed, &ctx.files)?;
    Ok(RunOutcome { out_dir: out, manifest })
}

fn create(path: &Path, stage: Stage) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::stage(stage, format!("{}: {e}", path.display())))
}

fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "n/a".into()
    }
}

impl Context<'_> {
    fn run_stage(&mut self, stage: Stage) -> Result<(), CliError> {
        match stage {
            Stage::Ingest => {
                self.ensure_panel()?;
                let panel = self.panel.as_ref().expect("panel loaded");
                let path = self.out.join("panel.csv");
                panel.write_csv(create(&path, stage)?).map_err(|e| CliError::stage(stage, e))?;
                self.files.push("panel.csv".into());
            }
            Stage::Filter => {
                self.ensure_cyclical()?;
                let cyc = self.cyclical.as_ref().expect("cyclical panel");
                let path = self.out.join("cyclical.csv");
                cyc.write_csv(create(&path, stage)?).map_err(|e| CliError::stage(stage, e))?;
                self.files.push("cyclical.csv".into());
            }
            Stage::Describe => self.describe_stage()?,
            Stage::Estimate => self.estimate_stage()?,
            Stage::Irf => {
                self.ensure_estimation()?;
                let store = &self.estimation.as_ref().expect("estimation").pooled;
                let irf = posterior_irf(store, &self.config.irf).map_err(|e| CliError::stage(stage, e))?;
                irf.save(&self.out).map_err(|e| CliError::stage(stage, e))?;
                self.files.extend(["irf.csv".to_string(), "irf_density.csv".to_string()]);
                self.irf = Some(irf);
            }
            Stage::Volatility => {
                self.ensure_volatility()?;
                let paths = self.volatility.as_ref().expect("volatility");
                let path = self.out.join("volatility.csv");
                write_volatility_csv(paths, create(&path, stage)?).map_err(|e| CliError::stage(stage, e))?;
                self.files.push("volatility.csv".into());
            }
            Stage::Report => {
                let text = self.report()?;
                std::fs::write(self.out.join("summary.txt"), text)
                    .map_err(|e| CliError::stage(stage, format!("summary.txt: {e}")))?;
                self.files.push("summary.txt".into());
            }
        }
        Ok(())
    }

    fn ensure_panel(&mut self) -> Result<(), CliError> {
        if self.panel.is_some() {
            return Ok(());
        }
        let stage = Stage::Ingest;
        let config = &self.config;
        let order: Vec<&str> = config.variables.iter().map(String::as_str).collect();
        let panel = if let Some(path) = &config.panel {
            let path = self.loaded.resolve(path);
            let panel = AlignedPanel::load_csv(&path).map_err(|e| from_core(stage, e))?;
            panel.select(&order).map_err(|e| from_core(stage, e))?
        } else {
            let mut available: BTreeMap<String, RawSeries> = BTreeMap::new();
            for source in &config.sources {
                let path = self.loaded.resolve(&source.path);
                let series = load_series_csv(&path, &source.columns)
                    .map_err(|e| from_core(stage, e))?
                    .with_id(source.id.clone());
                available.insert(source.id.clone(), clip(&series, config));
            }
            for t in &config.transforms {
                // Inputs are cut to their common span so series with
                // different coverage can be combined.
                let inputs: Vec<&RawSeries> = t.inputs.iter().filter_map(|id| available.get(id)).collect();
                let from = inputs.iter().map(|s| s.start()).max();
                let to = inputs.iter().map(|s| s.end()).min();
                let mut scoped = available.clone();
                if let (Some(from), Some(to)) = (from, to) {
                    for id in &t.inputs {
                        if let Some(s) = available.get(id) {
                            scoped.insert(id.clone(), s.slice(from, to));
                        }
                    }
                }
                let out = t.apply(&scoped).map_err(|e| from_core(stage, e))?;
                available.insert(t.output.clone(), out);
            }
            let series: Vec<RawSeries> = order
                .iter()
                .filter_map(|v| available.get(*v).cloned())
                .collect();
            align_panel(&series, &order).map_err(|e| from_core(stage, e))?
        };
        self.panel = Some(clip_panel(&panel, config).map_err(|e| from_core(stage, e))?);
        Ok(())
    }

    fn ensure_cyclical(&mut self) -> Result<(), CliError> {
        if self.cyclical.is_some() {
            return Ok(());
        }
        self.ensure_panel()?;
        let panel = self.panel.as_ref().expect("panel loaded");
        let stage = Stage::Filter;
        let filtered = if self.config.detrend {
            hamilton_filter_panel(panel, self.config.filter).map_err(|e| CliError::stage(stage, e))?
        } else {
            panel.clone()
        };
        self.cyclical = Some(filtered.scaled(&self.config.scales));
        Ok(())
    }

    fn ensure_description(&mut self) -> Result<(), CliError> {
        if self.description.is_some() {
            return Ok(());
        }
        self.ensure_cyclical()?;
        let cyc = self.cyclical.as_ref().expect("cyclical panel");
        let stage = Stage::Describe;
        let fail = |e| CliError::stage(stage, e);
        let cfg = &self.config;
        let windows = if cfg.peaks.len() >= 2 {
            segment_cycles(&cyc.calendar(), &cfg.peaks, cfg.describe.cycle_extension).map_err(fail)?
        } else {
            vec![]
        };
        let no_scaling = ReportScales::new();
        let stats = per_cycle_stats(cyc, &windows, &no_scaling).map_err(fail)?;
        let eras = era_stats(cyc, &cfg.eras, &no_scaling).map_err(fail)?;
        let vars = cyc.variables();
        let mut ccf = Vec::new();
        for a in 0..vars.len() {
            for b in (a + 1)..vars.len() {
                let x = cyc.column(&vars[a]).expect("column");
                let y = cyc.column(&vars[b]).expect("column");
                let c = cross_correlation(&x, &y, cfg.describe.ccf_max_lag).map_err(fail)?;
                ccf.push((vars[a].clone(), vars[b].clone(), c));
            }
        }
        let mut phases = Vec::new();
        for w in &windows {
            for (x, y) in &cfg.describe.phase_pairs {
                phases.push(phase_trajectory(cyc, w, x, y).map_err(fail)?);
            }
        }
        self.description = Some(Description {
            windows,
            stats,
            eras,
            ccf,
            phases,
        });
        Ok(())
    }

    fn describe_stage(&mut self) -> Result<(), CliError> {
        self.ensure_description()?;
        let stage = Stage::Describe;
        let d = self.description.as_ref().expect("description");
        let mut rows: Vec<WindowStd> = d.stats.stds.clone();
        for era in &self.config.eras {
            for e in d.eras.iter().filter(|e| e.era == era.label) {
                rows.push(WindowStd {
                    window_start: era.start,
                    window_end: era.end,
                    variable: e.variable.clone(),
                    std: e.std,
                });
            }
        }
        write_cycles_csv(&rows, create(&self.out.join("cycles.csv"), stage)?).map_err(|e| CliError::stage(stage, e))?;
        write_ccf_csv(&d.ccf, create(&self.out.join("ccf.csv"), stage)?).map_err(|e| CliError::stage(stage, e))?;
        self.files.extend(["cycles.csv".to_string(), "ccf.csv".to_string()]);
        for p in &d.phases {
            let name = format!(
                "phase_{}_{}_{}_{}.csv",
                p.x_var, p.y_var, p.window.start_peak, p.window.end_peak
            );
            write_phase_csv(p, create(&self.out.join(&name), stage)?).map_err(|e| CliError::stage(stage, e))?;
            self.files.push(name);
        }
        Ok(())
    }

    fn chain_dir(&self, chain: usize) -> PathBuf {
        self.out.join("chain").join(chain.to_string())
    }

    fn chain_rng(&self, chain: usize) -> RngStream {
        RngStream::new(self.config.model.seed)
            .split(ESTIMATE_STREAM)
            .split(chain as u64)
    }

    /// Previously saved chains, if they were produced by this exact
    /// configuration.
    fn saved_chains(&self) -> Option<Vec<ChainStore>> {
        (0..self.chains)
            .map(|c| {
                let store = ChainStore::read_dir(self.chain_dir(c)).ok()?;
                let meta = store.meta();
                let rng = self.chain_rng(c);
                let matches = meta.model == self.config.model
                    && meta.prior == self.config.priors
                    && meta.variables == self.config.variables
                    && meta.seed == rng.seed()
                    && meta.stream == rng.stream();
                matches.then_some(store)
            })
            .collect()
    }

    fn ensure_estimation(&mut self) -> Result<(), CliError> {
        if self.estimation.is_some() {
            return Ok(());
        }
        let (chains, reused) = match self.saved_chains() {
            Some(chains) => (chains, true),
            None => (self.sample()?, false),
        };
        let mut pooled = chains[0].clone();
        for c in &chains[1..] {
            pooled.append(c).map_err(|e| CliError::stage(Stage::Estimate, e))?;
        }
        let diagnostics = chains.iter().map(|c| convergence_diagnostics(c).ok()).collect();
        self.estimation = Some(Estimation {
            pooled,
            chains,
            diagnostics,
            reused,
        });
        Ok(())
    }

    fn sample(&mut self) -> Result<Vec<ChainStore>, CliError> {
        self.ensure_cyclical()?;
        let stage = Stage::Estimate;
        let cyc = self.cyclical.as_ref().expect("cyclical panel");
        let prepared = prepare(cyc, &self.config.model, &self.config.priors).map_err(|e| CliError::stage(stage, e))?;
        (0..self.chains)
            .map(|c| {
                let mut rng = self.chain_rng(c);
                run_chain(&prepared, &self.config.model, &self.config.priors, &mut rng)
                    .map_err(|e| CliError::stage(stage, format!("chain {c}: {e}")))
            })
            .collect()
    }

    fn estimate_stage(&mut self) -> Result<(), CliError> {
        let stage = Stage::Estimate;
        let started = Instant::now();
        self.ensure_estimation()?;
        let est = self.estimation.as_ref().expect("estimation");

        let mut w = csv_writer(&self.out.join("diagnostics.csv"), stage)?;
        let fail = |e: csv::Error| CliError::stage(stage, e);
        w.write_record(["chain", "parameter", "mean", "std", "inefficiency", "geweke_z"]).map_err(fail)?;
        for (c, diags) in est.diagnostics.iter().enumerate() {
            for p in diags.iter().flatten() {
                let d = &p.diagnostics;
                let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
                w.write_record([
                    c.to_string(),
                    p.parameter.clone(),
                    d.mean.to_string(),
                    d.std.to_string(),
                    opt(d.inefficiency),
                    opt(d.geweke_z),
                ])
                .map_err(fail)?;
            }
        }
        w.flush().map_err(|e| CliError::stage(stage, e))?;
        self.files.push("diagnostics.csv".into());

        if self.config.save_chain && !est.reused {
            for (c, store) in est.chains.iter().enumerate() {
                let dir = self.chain_dir(c);
                store.write_dir(&dir).map_err(|e| CliError::stage(stage, e))?;
                for f in ["meta.json", "beta.csv", "a.csv", "h.csv", "hyper.csv", "indicators.csv"] {
                    self.files.push(format!("chain/{c}/{f}"));
                }
            }
        }

        let sampler: Vec<Option<f64>> = est.chains.iter().map(|c| c.wall_time_secs).collect();
        let timing = serde_json::json!({
            "stage_secs": started.elapsed().as_secs_f64(),
            "chain_sampling_secs": sampler,
            "reused_saved_chain": est.reused,
        });
        std::fs::write(
            self.out.join("timing.json"),
            serde_json::to_string_pretty(&timing).expect("json") + "\n",
        )
        .map_err(|e| CliError::stage(stage, e))?;
        self.files.push("timing.json".into());
        Ok(())
    }

    fn ensure_volatility(&mut self) -> Result<(), CliError> {
        if self.volatility.is_some() {
            return Ok(());
        }
        self.ensure_estimation()?;
        let store = &self.estimation.as_ref().expect("estimation").pooled;
        let paths = residual_volatility_paths(store).map_err(|e| CliError::stage(Stage::Volatility, e))?;
        self.volatility = Some(paths);
        Ok(())
    }

    /// Plain-text summary. Posterior sections appear only when the posterior
    /// sample is already available (estimated in this run or saved).
    fn report(&mut self) -> Result<String, CliError> {
        self.ensure_description()?;
        if self.estimation.is_none() {
            if let Some(chains) = self.saved_chains() {
                let mut pooled = chains[0].clone();
                for c in &chains[1..] {
                    pooled.append(c).map_err(|e| CliError::stage(Stage::Report, e))?;
                }
                let diagnostics = chains.iter().map(|c| convergence_diagnostics(c).ok()).collect();
                self.estimation = Some(Estimation {
                    pooled,
                    chains,
                    diagnostics,
                    reused: true,
                });
            }
        }
        if self.estimation.is_some() {
            if self.irf.is_none() {
                let store = &self.estimation.as_ref().expect("estimation").pooled;
                self.irf = Some(posterior_irf(store, &self.config.irf).map_err(|e| CliError::stage(Stage::Report, e))?);
            }
            self.ensure_volatility()?;
        }
        let mut s = String::new();
        self.report_data(&mut s);
        self.report_description(&mut s);
        self.report_estimation(&mut s);
        Ok(s)
    }

    fn report_data(&self, s: &mut String) {
        let panel = self.panel.as_ref().expect("panel loaded");
        let cyc = self.cyclical.as_ref().expect("cyclical panel");
        let _ = writeln!(s, "DATA");
        let _ = writeln!(
            s,
            "  variables (identification order): {}",
            panel.variables().join(", ")
        );
        let _ = writeln!(s, "  panel: {}..{} ({} quarters)", panel.start(), panel.end(), panel.len());
        let detrend = if self.config.detrend {
            format!(
                "Hamilton filter, lookahead {}, lags {}",
                self.config.filter.lookahead, self.config.filter.lags
            )
        } else {
            "none".into()
        };
        let _ = writeln!(s, "  detrending: {detrend}");
        let _ = writeln!(s, "  cyclical sample: {}..{} ({} quarters)", cyc.start(), cyc.end(), cyc.len());
        if !self.config.scales.is_empty() {
            let scales: Vec<String> = self.config.scales.iter().map(|(k, v)| format!("{k} x{v}")).collect();
            let _ = writeln!(s, "  scaling: {}", scales.join(", "));
        }
        let _ = writeln!(s);
    }

    fn report_description(&self, s: &mut String) {
        let d = self.description.as_ref().expect("description");
        let vars = self.config.variables.clone();
        if !d.windows.is_empty() || !d.eras.is_empty() {
            let _ = writeln!(s, "STANDARD DEVIATIONS OF CYCLICAL COMPONENTS");
            let _ = writeln!(s, "  {:<16}{}", "window", pad_all(&vars));
            for w in &d.windows {
                let row: Vec<String> = vars
                    .iter()
                    .map(|v| d.stats.std_of(w.start_peak, v).map_or("n/a".into(), fmt_num))
                    .collect();
                let _ = writeln!(s, "  {:<16}{}", w.label(), pad_all(&row));
            }
            for era in &self.config.eras {
                let row: Vec<String> = vars
                    .iter()
                    .map(|v| {
                        d.eras
                            .iter()
                            .find(|e| e.era == era.label && &e.variable == v)
                            .map_or("n/a".into(), |e| fmt_num(e.std))
                    })
                    .collect();
                let _ = writeln!(s, "  {:<16}{}", era.label, pad_all(&row));
            }
            let _ = writeln!(s);
        }
        if !d.phases.is_empty() {
            let _ = writeln!(s, "PHASE-PLANE CORRELATIONS");
            for p in &d.phases {
                let _ = writeln!(s, "  {} ({}, {}): r = {}", p.window.label(), p.x_var, p.y_var, fmt_num(p.r));
            }
            let _ = writeln!(s);
        }
        if !d.ccf.is_empty() {
            let _ = writeln!(s, "PEAK CROSS-CORRELATIONS (positive lag: first variable leads)");
            for (x, y, c) in &d.ccf {
                let h = c.peak_lag();
                let rho = c.at(h).unwrap_or(f64::NAN);
                let flag = if rho.abs() > c.threshold { "" } else { " (not significant)" };
                let _ = writeln!(s, "  {x} vs {y}: lag {h}, rho = {}{flag}", fmt_num(rho));
            }
            let _ = writeln!(s);
        }
        self.report_reference(s, d);
    }

    fn report_reference(&self, s: &mut String, d: &Description) {
        let refs = &self.config.describe.reference;
        if refs.is_empty() {
            return;
        }
        let tol = self.config.describe.reference_tolerance;
        let mut flagged = Vec::new();
        let mut compared = 0;
        let mut missing = 0;
        for r in refs {
            let window = d.windows.iter().find(|w| w.label() == r.window);
            let got = match window {
                Some(w) => d.stats.std_of(w.start_peak, &r.variable),
                None => d
                    .eras
                    .iter()
                    .find(|e| e.era == r.window && e.variable == r.variable)
                    .map(|e| e.std),
            };
            match got {
                Some(v) => {
                    compared += 1;
                    if (v - r.value).abs() > tol {
                        flagged.push(format!(
                            "  {} {}: {} vs reference {} (diff {:+.3})",
                            r.window,
                            r.variable,
                            fmt_num(v),
                            r.value,
                            v - r.value
                        ));
                    }
                }
                None => missing += 1,
            }
        }
        let _ = writeln!(s, "REFERENCE COMPARISON (tolerance +/-{tol})");
        let _ = writeln!(
            s,
            "  {} of {compared} cells within tolerance; {missing} reference cells not computed",
            compared - flagged.len()
        );
        if !flagged.is_empty() {
            let _ = writeln!(s, "  NOTE: cells outside tolerance:");
            for f in &flagged {
                let _ = writeln!(s, "  {f}");
            }
        }
        let _ = writeln!(s);
    }

    fn report_estimation(&self, s: &mut String) {
        let Some(est) = &self.estimation else {
            let _ = writeln!(s, "POSTERIOR");
            let _ = writeln!(s, "  not available (estimate stage not run and no saved chain)");
            return;
        };
        let m = &self.config.model;
        let store = &est.pooled;
        let _ = writeln!(s, "POSTERIOR");
        let _ = writeln!(
            s,
            "  lags {}, {} sweeps, burn-in {}, thinning {}, seed {}",
            m.lags, m.n_draws, m.burn_in, m.thinning, m.seed
        );
        let _ = writeln!(
            s,
            "  chains {}, retained draws {}, estimation sample {}..{} ({} quarters)",
            est.chains.len(),
            store.len(),
            store.date(0),
            store.date(store.periods() - 1),
            store.periods()
        );
        if m.reject_explosive {
            let _ = writeln!(s, "  explosive fallbacks: {}", store.meta().explosive_fallbacks);
        }
        for (c, diags) in est.diagnostics.iter().enumerate() {
            match diags {
                Some(list) => {
                    let max_ineff = list
                        .iter()
                        .filter_map(|p| p.diagnostics.inefficiency)
                        .fold(f64::NAN, f64::max);
                    let outside = list
                        .iter()
                        .filter(|p| p.diagnostics.geweke_z.is_some_and(|z| z.abs() > 1.96))
                        .count();
                    let _ = writeln!(
                        s,
                        "  chain {c}: max inefficiency {}, {outside} of {} Geweke |z| > 1.96",
                        fmt_num(max_ineff),
                        list.len()
                    );
                }
                None => {
                    let _ = writeln!(s, "  chain {c}: too few draws for convergence diagnostics");
                }
            }
        }
        let _ = writeln!(s);
        if let Some(irf) = &self.irf {
            let horizons = &self.config.irf.horizons;
            let _ = writeln!(s, "IMPULSE RESPONSES (posterior median [p17, p83])");
            let mut dates: Vec<QuarterDate> = irf.cells.iter().map(|c| c.date).collect();
            dates.dedup();
            for date in dates {
                let _ = writeln!(s, "  {date}");
                let mut pairs: Vec<(&str, &str)> = irf
                    .cells
                    .iter()
                    .filter(|c| c.date == date)
                    .map(|c| (c.shock.as_str(), c.response.as_str()))
                    .collect();
                pairs.dedup();
                for (shock, response) in pairs {
                    let cells: Vec<String> = horizons
                        .iter()
                        .filter_map(|&h| irf.cell(date, shock, response, h))
                        .map(|c| {
                            format!(
                                "h{} {} [{}, {}]",
                                c.horizon,
                                fmt_num(c.summary.median),
                                fmt_num(c.summary.p17),
                                fmt_num(c.summary.p83)
                            )
                        })
                        .collect();
                    let _ = writeln!(s, "    {shock} -> {response}: {}", cells.join("; "));
                }
            }
            let _ = writeln!(s);
        }
        if let Some(vol) = &self.volatility {
            let _ = writeln!(s, "RESIDUAL VOLATILITY (posterior median)");
            for p in vol {
                let med: Vec<f64> = p.summaries.iter().map(|b| b.median).collect();
                let (imax, vmax) = med
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
                let (imin, vmin) = med
                    .iter()
                    .enumerate()
                    .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
                let _ = writeln!(
                    s,
                    "  {}: max {} at {}, min {} at {}",
                    p.variable,
                    fmt_num(vmax),
                    p.dates[imax],
                    fmt_num(vmin),
                    p.dates[imin]
                );
            }
            let _ = writeln!(s);
        }
    }
}

fn pad_all(cells: &[String]) -> String {
    cells.iter().map(|c| format!("{c:>12}")).collect()
}

fn csv_writer(path: &Path, stage: Stage) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    Ok(csv::Writer::from_writer(create(path, stage)?))
}

fn clip(series: &RawSeries, config: &RunConfig) -> RawSeries {
    let from = config.sample.start.unwrap_or(series.start());
    let to = config.sample.end.unwrap_or(series.end());
    series.slice(from, to)
}

fn clip_panel(panel: &AlignedPanel, config: &RunConfig) -> tvpsv::Result<AlignedPanel> {
    let from = config.sample.start.unwrap_or(panel.start()).max(panel.start());
    let to = config.sample.end.unwrap_or(panel.end()).min(panel.end());
    if to < from {
        return Err(tvpsv::Error::Alignment(format!(
            "sample {from}..{to} does not overlap the data {}..{}",
            panel.start(),
            panel.end()
        )));
    }
    let lo = (from - panel.start()) as usize;
    let hi = (to - panel.start()) as usize + 1;
    Ok(panel.rows(lo, hi))
}
