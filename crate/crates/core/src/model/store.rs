//! Archive of retained Gibbs draws.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::spec::{ModelSpec, PriorSpec};
use super::state::{free_a_count, GibbsDraw, HyperCovariances, StatePaths};
use crate::error::{Error, Result};
use crate::quarter::{calendar, QuarterDate};

/// Run metadata written to `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub format_version: u32,
    pub crate_version: String,
    pub rng: String,
    pub seed: u64,
    pub stream: u64,
    pub variables: Vec<String>,
    pub lags: usize,
    /// First period of the estimation sample.
    pub start: QuarterDate,
    pub periods: usize,
    pub draws: usize,
    pub model: ModelSpec,
    pub prior: PriorSpec,
    /// Sweeps whose coefficient draw was explosive at every attempt and
    /// which therefore kept the previous path (only with rejection enabled).
    pub explosive_fallbacks: usize,
}

impl StoreMeta {
    pub fn k(&self) -> usize {
        self.variables.len()
    }

    pub fn n_coefficients(&self) -> usize {
        self.k() * self.k() * self.lags
    }

    pub fn n_a(&self) -> usize {
        free_a_count(self.k())
    }

    /// Elements per hyperparameter record: `Q`, the `S` blocks, then `W`.
    pub fn n_hyper(&self) -> usize {
        let k = self.k();
        let nb = self.n_coefficients();
        nb * nb + (1..k).map(|j| j * j).sum::<usize>() + k
    }
}

/// Retained draws in memory, stored densely by draw, period and element.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStore {
    meta: StoreMeta,
    beta: Vec<f64>,
    a: Vec<f64>,
    h: Vec<f64>,
    hyper: Vec<f64>,
    indicators: Vec<u8>,
    /// Elapsed sampling time; kept out of `meta.json` so reruns are
    /// byte-identical.
    pub wall_time_secs: Option<f64>,
}

const FORMAT_VERSION: u32 = 1;
const DRAW_HEADER: [&str; 4] = ["draw_index", "t", "element_index", "value"];

impl ChainStore {
    pub(crate) fn new_meta(
        variables: Vec<String>,
        start: QuarterDate,
        periods: usize,
        model: ModelSpec,
        prior: PriorSpec,
        seed: u64,
        stream: u64,
    ) -> StoreMeta {
        StoreMeta {
            format_version: FORMAT_VERSION,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            rng: crate::kernel::RNG_ALGORITHM.to_string(),
            seed,
            stream,
            variables,
            lags: model.lags,
            start,
            periods,
            draws: 0,
            model,
            prior,
            explosive_fallbacks: 0,
        }
    }

    pub fn empty(meta: StoreMeta) -> Self {
        let mut meta = meta;
        meta.draws = 0;
        Self {
            meta,
            beta: vec![],
            a: vec![],
            h: vec![],
            hyper: vec![],
            indicators: vec![],
            wall_time_secs: None,
        }
    }

    pub fn meta(&self) -> &StoreMeta {
        &self.meta
    }

    pub(crate) fn meta_mut(&mut self) -> &mut StoreMeta {
        &mut self.meta
    }

    pub fn len(&self) -> usize {
        self.meta.draws
    }

    pub fn is_empty(&self) -> bool {
        self.meta.draws == 0
    }

    pub fn k(&self) -> usize {
        self.meta.k()
    }

    pub fn periods(&self) -> usize {
        self.meta.periods
    }

    pub fn dates(&self) -> Vec<QuarterDate> {
        calendar(self.meta.start, self.meta.periods)
    }

    pub fn date(&self, t: usize) -> QuarterDate {
        self.meta.start + t as i64
    }

    /// Index of `date` in the estimation sample.
    pub fn period_of(&self, date: QuarterDate) -> Result<usize> {
        let t = date - self.meta.start;
        if t < 0 || t >= self.meta.periods as i64 {
            return Err(Error::Range(format!(
                "{date} is outside the estimation sample {}..{}",
                self.meta.start,
                self.date(self.meta.periods.saturating_sub(1))
            )));
        }
        Ok(t as usize)
    }

    /// Appends one draw.
    pub fn push(&mut self, draw: &GibbsDraw) -> Result<()> {
        let (k, lags, n) = (self.k(), self.meta.lags, self.meta.periods);
        if draw.paths.len() != n {
            return Err(Error::Dimension(format!(
                "draw has {} periods, store expects {n}",
                draw.paths.len()
            )));
        }
        draw.paths.validate(k, lags)?;
        for t in 0..n {
            self.beta.extend_from_slice(draw.paths.beta[t].as_slice());
            self.a.extend_from_slice(draw.paths.a[t].as_slice());
            self.h.extend_from_slice(draw.paths.h[t].as_slice());
            self.indicators.extend_from_slice(&draw.indicators[t]);
        }
        self.hyper.extend_from_slice(draw.hyper.q.as_slice());
        for b in &draw.hyper.s_blocks {
            self.hyper.extend_from_slice(b.as_slice());
        }
        self.hyper.extend_from_slice(draw.hyper.w.as_slice());
        self.meta.draws += 1;
        Ok(())
    }

    /// Appends every draw of `other`, a chain over the same sample and
    /// model dimensions (for pooling independent chains).
    pub fn append(&mut self, other: &ChainStore) -> Result<()> {
        let (a, b) = (&self.meta, &other.meta);
        if a.variables != b.variables || a.lags != b.lags || a.start != b.start || a.periods != b.periods {
            return Err(Error::Dimension(format!(
                "cannot pool chains over {:?}/{} lags/{}+{} and {:?}/{} lags/{}+{}",
                a.variables, a.lags, a.start, a.periods, b.variables, b.lags, b.start, b.periods
            )));
        }
        self.beta.extend_from_slice(&other.beta);
        self.a.extend_from_slice(&other.a);
        self.h.extend_from_slice(&other.h);
        self.hyper.extend_from_slice(&other.hyper);
        self.indicators.extend_from_slice(&other.indicators);
        self.meta.draws += other.meta.draws;
        self.meta.explosive_fallbacks += other.meta.explosive_fallbacks;
        Ok(())
    }

    fn slot(&self, d: usize, t: usize, width: usize) -> std::ops::Range<usize> {
        let start = (d * self.meta.periods + t) * width;
        start..start + width
    }

    pub fn beta(&self, d: usize, t: usize) -> &[f64] {
        &self.beta[self.slot(d, t, self.meta.n_coefficients())]
    }

    pub fn a(&self, d: usize, t: usize) -> &[f64] {
        &self.a[self.slot(d, t, self.meta.n_a())]
    }

    pub fn h(&self, d: usize, t: usize) -> &[f64] {
        &self.h[self.slot(d, t, self.k())]
    }

    pub fn indicators(&self, d: usize, t: usize) -> &[u8] {
        &self.indicators[self.slot(d, t, self.k())]
    }

    pub fn hyper_raw(&self, d: usize) -> &[f64] {
        let w = self.meta.n_hyper();
        &self.hyper[d * w..(d + 1) * w]
    }

    pub fn hyper(&self, d: usize) -> HyperCovariances {
        let (k, nb) = (self.k(), self.meta.n_coefficients());
        let raw = self.hyper_raw(d);
        let q = DMatrix::from_column_slice(nb, nb, &raw[..nb * nb]);
        let mut off = nb * nb;
        let mut s_blocks = Vec::with_capacity(k.saturating_sub(1));
        for j in 1..k {
            s_blocks.push(DMatrix::from_column_slice(j, j, &raw[off..off + j * j]));
            off += j * j;
        }
        let w = DVector::from_column_slice(&raw[off..off + k]);
        HyperCovariances { q, s_blocks, w }
    }

    pub fn paths(&self, d: usize) -> StatePaths {
        let n = self.meta.periods;
        StatePaths {
            beta: (0..n).map(|t| DVector::from_column_slice(self.beta(d, t))).collect(),
            a: (0..n).map(|t| DVector::from_column_slice(self.a(d, t))).collect(),
            h: (0..n).map(|t| DVector::from_column_slice(self.h(d, t))).collect(),
        }
    }

    pub fn draw(&self, d: usize) -> GibbsDraw {
        GibbsDraw {
            paths: self.paths(d),
            hyper: self.hyper(d),
            indicators: (0..self.meta.periods).map(|t| self.indicators(d, t).to_vec()).collect(),
        }
    }

    /// Checks every stored draw against the state invariants.
    pub fn validate(&self) -> Result<()> {
        let (k, lags) = (self.k(), self.meta.lags);
        for d in 0..self.len() {
            self.draw(d)
                .validate(k, lags)
                .map_err(|e| Error::InvalidParameter(format!("draw {d}: {e}")))?;
        }
        Ok(())
    }

    /// Chain of one scalar across draws.
    pub fn trace(&self, mut f: impl FnMut(&ChainStore, usize) -> f64) -> Vec<f64> {
        (0..self.len()).map(|d| f(self, d)).collect()
    }

    /// Writes `meta.json` and the long-format draw files into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta_path = dir.join("meta.json");
        let text = serde_json::to_string_pretty(&self.meta)?;
        std::fs::write(&meta_path, text + "\n").map_err(|e| Error::io(&meta_path, e))?;
        let n = self.meta.periods;
        let k = self.k();
        let files: [(&str, &[f64], usize, usize); 4] = [
            ("beta.csv", &self.beta, n, self.meta.n_coefficients()),
            ("a.csv", &self.a, n, self.meta.n_a()),
            ("h.csv", &self.h, n, k),
            ("hyper.csv", &self.hyper, 1, self.meta.n_hyper()),
        ];
        for (name, data, periods, width) in files {
            write_long(&dir.join(name), self.len(), periods, width, |i| data[i].to_string())?;
        }
        let ind = &self.indicators;
        write_long(&dir.join("indicators.csv"), self.len(), n, k, |i| ind[i].to_string())
    }

    /// Reads a store written by [`ChainStore::write_dir`].
    pub fn read_dir(dir: impl AsRef<Path>) -> Result<ChainStore> {
        let dir = dir.as_ref();
        let meta_path = dir.join("meta.json");
        let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: StoreMeta = serde_json::from_str(&text)?;
        let (n, draws, k) = (meta.periods, meta.draws, meta.k());
        let beta = read_long(&dir.join("beta.csv"), draws, n, meta.n_coefficients())?;
        let a = read_long(&dir.join("a.csv"), draws, n, meta.n_a())?;
        let h = read_long(&dir.join("h.csv"), draws, n, k)?;
        let hyper = read_long(&dir.join("hyper.csv"), draws, 1, meta.n_hyper())?;
        let indicators = read_long(&dir.join("indicators.csv"), draws, n, k)?
            .into_iter()
            .map(|v| v as u8)
            .collect();
        Ok(ChainStore {
            meta,
            beta,
            a,
            h,
            hyper,
            indicators,
            wall_time_secs: None,
        })
    }
}

fn write_long(
    path: &Path,
    draws: usize,
    periods: usize,
    width: usize,
    value: impl Fn(usize) -> String,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut run = || -> std::io::Result<()> {
        writeln!(w, "{}", DRAW_HEADER.join(","))?;
        let mut i = 0;
        for d in 0..draws {
            for t in 0..periods {
                for e in 0..width {
                    writeln!(w, "{d},{t},{e},{}", value(i))?;
                    i += 1;
                }
            }
        }
        w.flush()
    };
    run().map_err(|e| Error::io(path, e))
}

fn read_long(path: &Path, draws: usize, periods: usize, width: usize) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(err) => Error::io(path, err),
        other => Error::Row {
            path: path.to_path_buf(),
            line: 0,
            message: format!("{other:?}"),
        },
    })?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != DRAW_HEADER {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            column: DRAW_HEADER.join(","),
        });
    }
    let total = draws * periods * width;
    let mut out = vec![f64::NAN; total];
    let mut seen = vec![false; total];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = row as u64 + 2;
        let bad = |message: String| Error::Row {
            path: path.to_path_buf(),
            line,
            message,
        };
        let field = |i: usize| record.get(i).ok_or_else(|| bad(format!("missing field {i}")));
        let idx = |i: usize| -> Result<usize> {
            field(i)?
                .parse::<usize>()
                .map_err(|e| bad(format!("{}: {e}", DRAW_HEADER[i])))
        };
        let (d, t, e) = (idx(0)?, idx(1)?, idx(2)?);
        if d >= draws || t >= periods || e >= width {
            return Err(bad(format!("index ({d}, {t}, {e}) out of range")));
        }
        let v: f64 = field(3)?.parse().map_err(|err| bad(format!("value: {err}")))?;
        let i = (d * periods + t) * width + e;
        if seen[i] {
            return Err(bad(format!("duplicate entry ({d}, {t}, {e})")));
        }
        seen[i] = true;
        out[i] = v;
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::Row {
            path: path.to_path_buf(),
            line: 0,
            message: format!("missing entry at flat index {i}"),
        });
    }
    Ok(out)
}
