//! Run configuration: JSON schema, defaults and validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tvpsv::cycles::{Era, HamiltonSpec};
use tvpsv::ingest::{ColumnMap, TransformKind, TransformSpec};
use tvpsv::irf::IrfRequest;
use tvpsv::model::{ModelSpec, PriorSpec};
use tvpsv::QuarterDate;

use crate::error::CliError;

fn q(year: i32, quarter: u8) -> QuarterDate {
    QuarterDate::new(year, quarter).expect("valid quarter")
}

/// One input file and the columns holding its dates and values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub id: String,
    pub path: PathBuf,
    #[serde(default)]
    pub columns: ColumnMap,
}

impl SourceConfig {
    fn new(id: &str, path: &str, date: &str, value: &str) -> Self {
        Self {
            id: id.into(),
            path: path.into(),
            columns: ColumnMap {
                date: date.into(),
                value: value.into(),
            },
        }
    }
}

/// Inclusive bounds applied to the aligned panel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub start: Option<QuarterDate>,
    pub end: Option<QuarterDate>,
}

/// A reference per-window standard deviation to compare against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValue {
    /// A cycle label (`1969Q4-1973Q4`) or an era label.
    pub window: String,
    pub variable: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescribeConfig {
    /// Quarters appended after each cycle's closing peak.
    pub cycle_extension: i64,
    pub ccf_max_lag: usize,
    /// `(x, y)` variable pairs exported as phase trajectories.
    pub phase_pairs: Vec<(String, String)>,
    pub reference: Vec<ReferenceValue>,
    pub reference_tolerance: f64,
}

impl Default for DescribeConfig {
    fn default() -> Self {
        Self {
            cycle_extension: 4,
            ccf_max_lag: 8,
            phase_pairs: vec![("e".into(), "psi".into())],
            reference: default_reference(),
            reference_tolerance: 0.2,
        }
    }
}

/// Reference standard deviations of the cyclical components, by cycle and
/// era, for the standard four-variable U.S. dataset.
fn default_reference() -> Vec<ReferenceValue> {
    let cycles = [
        "1969Q4-1973Q4",
        "1973Q4-1981Q3",
        "1981Q3-1990Q3",
        "1990Q3-2001Q1",
        "2001Q1-2007Q4",
        "2007Q4-2019Q4",
    ];
    let per_cycle: [(&str, [f64; 6]); 4] = [
        ("psi", [1.11, 0.826, 1.01, 1.00, 1.09, 1.04]),
        ("e", [0.880, 1.29, 1.56, 1.05, 0.718, 1.93]),
        ("g", [17.8, 25.0, 21.9, 11.4, 14.7, 20.9]),
        ("s", [1.07, 1.40, 1.09, 1.04, 1.18, 0.857]),
    ];
    let per_era: [(&str, [f64; 2]); 4] = [
        ("psi", [2.00, 2.05]),
        ("e", [1.49, 1.58]),
        ("g", [21.7, 15.8]),
        ("s", [1.05, 1.04]),
    ];
    let mut out = Vec::new();
    for (var, values) in per_cycle {
        for (window, value) in cycles.iter().zip(values) {
            out.push(ReferenceValue {
                window: window.to_string(),
                variable: var.into(),
                value,
            });
        }
    }
    for (var, values) in per_era {
        for (era, value) in ["post-war", "neoliberal"].iter().zip(values) {
            out.push(ReferenceValue {
                window: era.to_string(),
                variable: var.into(),
                value,
            });
        }
    }
    out
}

/// Everything a pipeline run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Raw input files; ignored when `panel` is set.
    pub sources: Vec<SourceConfig>,
    /// Derived series, applied in order.
    pub transforms: Vec<TransformSpec>,
    /// Panel columns in identification order.
    pub variables: Vec<String>,
    /// A ready-made panel CSV (`date,<variables...>`) used instead of
    /// `sources` and `transforms`.
    pub panel: Option<PathBuf>,
    pub sample: SampleConfig,
    /// Apply the Hamilton filter; when off, the panel is used as-is.
    pub detrend: bool,
    pub filter: HamiltonSpec,
    /// Multipliers applied to the cyclical components before they are
    /// described or estimated (log variables x 100 = percent deviations).
    pub scales: BTreeMap<String, f64>,
    pub peaks: Vec<QuarterDate>,
    pub eras: Vec<Era>,
    pub describe: DescribeConfig,
    pub model: ModelSpec,
    pub priors: PriorSpec,
    pub irf: IrfRequest,
    pub output: PathBuf,
    /// Also write every retained draw under `chain/`.
    pub save_chain: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sources: vec![
                SourceConfig::new("compensation", "data/compensation.csv", "date", "value"),
                SourceConfig::new("net_interest", "data/net_interest.csv", "date", "value"),
                SourceConfig::new("rental_income", "data/rental_income.csv", "date", "value"),
                SourceConfig::new("corporate_profits", "data/corporate_profits.csv", "date", "value"),
                SourceConfig::new("capital_consumption", "data/capital_consumption.csv", "date", "value"),
                SourceConfig::new("residential_investment", "data/residential_investment.csv", "date", "value"),
                SourceConfig::new("UNRATE", "data/UNRATE.csv", "observation_date", "UNRATE"),
                SourceConfig::new("GS10", "data/GS10.csv", "observation_date", "GS10"),
                SourceConfig::new("TB3MS", "data/TB3MS.csv", "observation_date", "TB3MS"),
            ],
            transforms: vec![
                transform(
                    TransformKind::LaborShare,
                    &[
                        "compensation",
                        "net_interest",
                        "rental_income",
                        "corporate_profits",
                        "capital_consumption",
                    ],
                    "labor_share",
                ),
                transform(TransformKind::Log, &["labor_share"], "psi"),
                transform(TransformKind::EmploymentRate, &["UNRATE"], "e"),
                transform(TransformKind::Log, &["residential_investment"], "g"),
                transform(TransformKind::Spread, &["GS10", "TB3MS"], "s"),
            ],
            variables: ["psi", "e", "g", "s"].map(String::from).to_vec(),
            panel: None,
            sample: SampleConfig {
                start: Some(q(1953, 2)),
                end: Some(q(2022, 4)),
            },
            detrend: true,
            filter: HamiltonSpec::default(),
            scales: [("psi".to_string(), 100.0), ("g".to_string(), 100.0)].into(),
            peaks: vec![
                q(1969, 4),
                q(1973, 4),
                q(1981, 3),
                q(1990, 3),
                q(2001, 1),
                q(2007, 4),
                q(2019, 4),
            ],
            eras: vec![
                Era {
                    label: "post-war".into(),
                    start: q(1956, 1),
                    end: q(1984, 4),
                },
                Era {
                    label: "neoliberal".into(),
                    start: q(1985, 1),
                    end: q(2019, 4),
                },
            ],
            describe: DescribeConfig::default(),
            model: ModelSpec::default(),
            priors: PriorSpec::default(),
            irf: IrfRequest::default(),
            output: "out".into(),
            save_chain: false,
        }
    }
}

fn transform(kind: TransformKind, inputs: &[&str], output: &str) -> TransformSpec {
    TransformSpec {
        kind,
        inputs: inputs.iter().map(|s| s.to_string()).collect(),
        output: output.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

/// One validation finding, located by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}: {}", self.field, self.message)
    }
}

fn error(field: impl Into<String>, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        severity: Severity::Error,
        field: field.into(),
        message: message.into(),
    }
}

/// A parsed config plus the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    /// Unknown keys, reported as warnings.
    pub warnings: Vec<Diagnostic>,
}

impl LoadedConfig {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}

/// Parses a config document, collecting unknown keys as warnings.
pub fn parse_config(text: &str) -> Result<(RunConfig, Vec<Diagnostic>), serde_json::Error> {
    let mut unknown = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_ignored::deserialize(&mut de, |path| unknown.push(path.to_string()))?;
    de.end()?;
    let warnings = unknown
        .into_iter()
        .map(|field| Diagnostic {
            severity: Severity::Warning,
            field,
            message: "unknown key ignored".into(),
        })
        .collect();
    Ok((config, warnings))
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
    let (config, warnings) = parse_config(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(LoadedConfig {
        config,
        base_dir,
        warnings,
    })
}

impl RunConfig {
    /// Quarters lost to detrending at the start of the sample.
    pub fn shrinkage(&self) -> usize {
        if self.detrend {
            self.filter.shrinkage()
        } else {
            0
        }
    }

    /// First quarter of the estimation sample implied by the sample start,
    /// filter shrinkage, VAR lags and training sample.
    pub fn estimation_start(&self) -> Option<QuarterDate> {
        let skip = self.shrinkage() + self.model.lags + self.priors.training_size;
        self.sample.start.map(|s| s + skip as i64)
    }

    /// Schema and cross-field checks; does not touch the filesystem.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let k = self.variables.len();
        self.validate_data(&mut out);
        if self.filter.lookahead == 0 {
            out.push(error("filter.lookahead", "must be >= 1"));
        }
        if self.filter.lags == 0 {
            out.push(error("filter.lags", "must be >= 1"));
        }
        for (i, w) in self.peaks.windows(2).enumerate() {
            if w[1] <= w[0] {
                out.push(error(
                    format!("peaks[{}]", i + 1),
                    format!("{} does not follow {}", w[1], w[0]),
                ));
            }
        }
        if let (Some(start), Some(end)) = (self.sample.start, self.sample.end) {
            if end < start {
                out.push(error("sample.end", format!("{end} precedes sample.start {start}")));
            }
            let filtered_start = start + self.shrinkage() as i64;
            for (i, p) in self.peaks.iter().enumerate() {
                if *p < filtered_start || *p > end {
                    out.push(error(
                        format!("peaks[{i}]"),
                        format!("{p} outside the filtered sample {filtered_start}..{end}"),
                    ));
                }
            }
            for (i, era) in self.eras.iter().enumerate() {
                if era.start < filtered_start || era.end > end {
                    out.push(error(
                        format!("eras[{i}]"),
                        format!(
                            "{}..{} outside the filtered sample {filtered_start}..{end}",
                            era.start, era.end
                        ),
                    ));
                }
            }
        }
        for (i, era) in self.eras.iter().enumerate() {
            if era.end < era.start {
                out.push(error(format!("eras[{i}].end"), format!("{} precedes {}", era.end, era.start)));
            }
        }
        if self.describe.cycle_extension < 0 {
            out.push(error("describe.cycle_extension", "must be >= 0"));
        }
        if !(self.describe.reference_tolerance >= 0.0) {
            out.push(error("describe.reference_tolerance", "must be >= 0"));
        }
        for (var, scale) in &self.scales {
            if !(scale.is_finite() && *scale != 0.0) {
                out.push(error(format!("scales.{var}"), "must be finite and nonzero"));
            }
        }
        for (i, (x, y)) in self.describe.phase_pairs.iter().enumerate() {
            for (name, v) in [("0", x), ("1", y)] {
                if !self.variables.contains(v) {
                    out.push(error(
                        format!("describe.phase_pairs[{i}][{name}]"),
                        format!("unknown variable {v:?}"),
                    ));
                }
            }
        }
        self.validate_model(k, &mut out);
        self.validate_irf(&mut out);
        out
    }

    fn validate_data(&self, out: &mut Vec<Diagnostic>) {
        if self.variables.len() < 2 {
            out.push(error("variables", "need at least two variables"));
        }
        let mut seen = BTreeSet::new();
        for (i, v) in self.variables.iter().enumerate() {
            if !seen.insert(v) {
                out.push(error(format!("variables[{i}]"), format!("duplicate variable {v:?}")));
            }
        }
        if self.panel.is_some() {
            return;
        }
        if self.sources.is_empty() {
            out.push(error("sources", "no sources and no panel file"));
        }
        let mut available = BTreeSet::new();
        for (i, s) in self.sources.iter().enumerate() {
            if !available.insert(s.id.clone()) {
                out.push(error(format!("sources[{i}].id"), format!("duplicate id {:?}", s.id)));
            }
        }
        for (i, t) in self.transforms.iter().enumerate() {
            if let Err(e) = t.check_arity() {
                out.push(error(format!("transforms[{i}].inputs"), e.to_string()));
            }
            for (j, input) in t.inputs.iter().enumerate() {
                if !available.contains(input) {
                    out.push(error(
                        format!("transforms[{i}].inputs[{j}]"),
                        format!("{input:?} is neither a source nor an earlier transform output"),
                    ));
                }
            }
            available.insert(t.output.clone());
        }
        for (i, v) in self.variables.iter().enumerate() {
            if !available.contains(v) {
                out.push(error(
                    format!("variables[{i}]"),
                    format!("{v:?} is not produced by any source or transform"),
                ));
            }
        }
    }

    fn validate_model(&self, k: usize, out: &mut Vec<Diagnostic>) {
        let m = &self.model;
        if m.lags == 0 {
            out.push(error("model.lags", "must be >= 1"));
        }
        if m.burn_in >= m.n_draws {
            out.push(error(
                "model.burn_in",
                format!("{} must be below model.n_draws {}", m.burn_in, m.n_draws),
            ));
        }
        if m.thinning == 0 {
            out.push(error("model.thinning", "must be >= 1"));
        }
        if k >= 2 && m.lags > 0 {
            if let Err(e) = self.priors.validate(k, m.lags) {
                out.push(error("priors", e.to_string()));
            }
        }
    }

    fn validate_irf(&self, out: &mut Vec<Diagnostic>) {
        let irf = &self.irf;
        if irf.horizons.is_empty() {
            out.push(error("irf.horizons", "at least one horizon is required"));
        }
        for (i, &h) in irf.horizons.iter().enumerate() {
            if h == 0 {
                out.push(error(format!("irf.horizons[{i}]"), "horizons start at 1 (impact)"));
            }
            if i > 0 && h <= irf.horizons[i - 1] {
                out.push(error(format!("irf.horizons[{i}]"), "horizons must be strictly ascending"));
            }
        }
        if irf.dates.is_empty() {
            out.push(error("irf.dates", "at least one date is required"));
        }
        if let (Some(first), Some(end)) = (self.estimation_start(), self.sample.end) {
            for (i, d) in irf.dates.iter().enumerate() {
                if *d < first || *d > end {
                    out.push(error(
                        format!("irf.dates[{i}]"),
                        format!("{d} outside the estimation sample {first}..{end}"),
                    ));
                }
            }
        }
        for (field, list) in [("irf.shocks", &irf.shocks), ("irf.responses", &irf.responses)] {
            for (i, v) in list.iter().enumerate() {
                if !self.variables.contains(v) {
                    out.push(error(format!("{field}[{i}]"), format!("unknown variable {v:?}")));
                }
            }
        }
    }
}
