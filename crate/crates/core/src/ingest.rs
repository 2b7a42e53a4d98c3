//! Loading quarterly series, constructing the model variables and aligning
//! them into a panel.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quarter::{calendar, parse_quarter, QuarterDate};

/// A gap-free quarterly series.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    id: String,
    start: QuarterDate,
    values: Vec<f64>,
}

impl RawSeries {
    pub fn new(id: impl Into<String>, start: QuarterDate, values: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            start,
            values,
        }
    }

    /// Builds a series from dated observations, which must be strictly
    /// increasing and contiguous.
    pub fn from_observations(
        id: impl Into<String>,
        observations: Vec<(QuarterDate, f64)>,
    ) -> Result<Self> {
        let id = id.into();
        let Some(&(start, _)) = observations.first() else {
            return Err(Error::Length(format!("series {id} has no observations")));
        };
        let mut missing = Vec::new();
        for pair in observations.windows(2) {
            let (prev, next) = (pair[0].0, pair[1].0);
            if next <= prev {
                return Err(Error::Alignment(format!(
                    "series {id}: dates not strictly increasing at {next}"
                )));
            }
            missing.extend((1..next - prev).map(|i| prev + i));
        }
        if !missing.is_empty() {
            return Err(Error::Gap { series: id, missing });
        }
        let values = observations.into_iter().map(|(_, v)| v).collect();
        Ok(Self { id, start, values })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn start(&self) -> QuarterDate {
        self.start
    }

    /// Last quarter; equals `start` for an empty series.
    pub fn end(&self) -> QuarterDate {
        self.start + (self.values.len() as i64 - 1).max(0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn calendar(&self) -> Vec<QuarterDate> {
        calendar(self.start, self.values.len())
    }

    pub fn observations(&self) -> impl Iterator<Item = (QuarterDate, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.start + i as i64, v))
    }

    /// Sub-series over `[from, to]` (inclusive), clipped to the series span.
    pub fn slice(&self, from: QuarterDate, to: QuarterDate) -> RawSeries {
        let lo = (from - self.start).max(0) as usize;
        let hi = ((to - self.start + 1).max(0) as usize).min(self.values.len());
        let lo = lo.min(hi);
        RawSeries {
            id: self.id.clone(),
            start: self.start + lo as i64,
            values: self.values[lo..hi].to_vec(),
        }
    }

    fn map_checked(
        &self,
        id: &str,
        f: impl Fn(f64) -> std::result::Result<f64, String>,
    ) -> Result<RawSeries> {
        let values = self
            .observations()
            .map(|(date, v)| {
                f(v).map_err(|message| Error::Domain {
                    series: self.id.clone(),
                    date,
                    message,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RawSeries::new(id, self.start, values))
    }
}

/// Which CSV columns hold the date and the value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub date: String,
    pub value: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            date: "date".into(),
            value: "value".into(),
        }
    }
}

enum RowDate {
    Quarter(QuarterDate),
    Month(i32, u32),
}

fn parse_row_date(text: &str) -> Option<RowDate> {
    if let Ok(q) = parse_quarter(text) {
        return Some(RowDate::Quarter(q));
    }
    // ISO month dates: YYYY-MM or YYYY-MM-DD.
    let mut parts = text.trim().split('-');
    let year = parts.next()?;
    let month = parts.next()?;
    if let Some(day) = parts.next() {
        day.parse::<u32>().ok().filter(|d| (1..=31).contains(d))?;
    }
    if parts.next().is_some() || year.len() != 4 || month.len() != 2 {
        return None;
    }
    let year = year.parse().ok()?;
    let month = month.parse().ok().filter(|m| (1..=12).contains(m))?;
    Some(RowDate::Month(year, month))
}

/// Loads one series from a CSV file.
///
/// Quarterly rows are taken as-is. Monthly rows (ISO dates) are averaged
/// within each quarter; quarters without all three months are dropped, so
/// partial quarters at either end vanish and interior ones surface as gaps.
pub fn load_series_csv(path: impl AsRef<Path>, columns: &ColumnMap) -> Result<RawSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_series_csv(file, path, &id, columns)
}

/// Reader form of [`load_series_csv`]; `path` is only used in diagnostics.
pub fn read_series_csv(
    reader: impl Read,
    path: &Path,
    id: &str,
    columns: &ColumnMap,
) -> Result<RawSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let date_col = find(&columns.date)?;
    let value_col = find(&columns.value)?;

    let mut quarterly: Vec<(QuarterDate, f64)> = Vec::new();
    let mut monthly: BTreeMap<QuarterDate, Vec<(u32, f64)>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row_err = |message: String| Error::Row {
            path: path.to_path_buf(),
            line,
            message,
        };
        let date_text = record.get(date_col).unwrap_or("");
        let value_text = record.get(value_col).unwrap_or("");
        let value: f64 = value_text
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| row_err(format!("unparsable value {value_text:?}")))?;
        match parse_row_date(date_text) {
            Some(RowDate::Quarter(q)) if monthly.is_empty() => quarterly.push((q, value)),
            Some(RowDate::Month(y, m)) if quarterly.is_empty() => {
                let q = QuarterDate::from_month(y, m)?;
                let months = monthly.entry(q).or_default();
                if months.iter().any(|&(mm, _)| mm == m) {
                    return Err(row_err(format!("duplicate month {date_text}")));
                }
                months.push((m, value));
            }
            Some(_) => return Err(row_err("mixed quarterly and monthly dates".into())),
            None => return Err(row_err(format!("unparsable date {date_text:?}"))),
        }
    }

    if !monthly.is_empty() {
        quarterly = monthly
            .into_iter()
            .filter(|(_, months)| months.len() == 3)
            .map(|(q, months)| (q, months.iter().map(|&(_, v)| v).sum::<f64>() / 3.0))
            .collect();
    }
    RawSeries::from_observations(id, quarterly)
}

fn same_calendar(series: &[&RawSeries]) -> Result<()> {
    let first = series[0];
    for s in &series[1..] {
        if s.start != first.start || s.len() != first.len() {
            return Err(Error::Alignment(format!(
                "{} spans {}..{} but {} spans {}..{}",
                first.id,
                first.start,
                first.end(),
                s.id,
                s.start,
                s.end()
            )));
        }
    }
    Ok(())
}

/// Labor share: compensation over compensation plus net interest, rental
/// income, corporate profits and capital consumption.
pub fn construct_labor_share(
    compensation: &RawSeries,
    net_interest: &RawSeries,
    rental_income: &RawSeries,
    corporate_profits: &RawSeries,
    capital_consumption: &RawSeries,
) -> Result<RawSeries> {
    let parts = [
        compensation,
        net_interest,
        rental_income,
        corporate_profits,
        capital_consumption,
    ];
    same_calendar(&parts)?;
    let values = (0..compensation.len())
        .map(|i| {
            let comp = compensation.values[i];
            let denom: f64 = parts.iter().map(|s| s.values[i]).sum();
            if denom > 0.0 && denom.is_finite() {
                Ok(comp / denom)
            } else {
                Err(Error::Domain {
                    series: "labor_share".into(),
                    date: compensation.start + i as i64,
                    message: format!("nonpositive income denominator {denom}"),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RawSeries::new("psi", compensation.start, values))
}

/// Employment rate as 100 minus the unemployment rate.
pub fn construct_employment_rate(unemployment: &RawSeries) -> Result<RawSeries> {
    unemployment.map_checked("e", |u| {
        if (0.0..=100.0).contains(&u) {
            Ok(100.0 - u)
        } else {
            Err(format!("unemployment rate {u} outside [0, 100]"))
        }
    })
}

/// Long rate minus short rate.
pub fn construct_spread(long_rate: &RawSeries, short_rate: &RawSeries) -> Result<RawSeries> {
    same_calendar(&[long_rate, short_rate])?;
    let values = long_rate
        .values
        .iter()
        .zip(&short_rate.values)
        .map(|(l, s)| l - s)
        .collect();
    Ok(RawSeries::new("s", long_rate.start, values))
}

pub fn log_transform(series: &RawSeries) -> Result<RawSeries> {
    series.map_checked(&series.id, |v| {
        if v > 0.0 {
            Ok(v.ln())
        } else {
            Err(format!("log of nonpositive value {v}"))
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    LaborShare,
    EmploymentRate,
    Spread,
    Log,
    Identity,
}

impl TransformKind {
    fn arity(self) -> usize {
        match self {
            TransformKind::LaborShare => 5,
            TransformKind::Spread => 2,
            _ => 1,
        }
    }
}

/// One derived series: `output = kind(inputs...)`.
///
/// Labor share inputs are ordered compensation, net interest, rental income,
/// corporate profits, capital consumption; spread inputs are long, short.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub inputs: Vec<String>,
    pub output: String,
}

impl TransformSpec {
    pub fn check_arity(&self) -> Result<()> {
        let want = self.kind.arity();
        if self.inputs.len() != want {
            return Err(Error::InvalidParameter(format!(
                "{:?} transform for {} needs {want} inputs, got {}",
                self.kind,
                self.output,
                self.inputs.len()
            )));
        }
        Ok(())
    }

    /// Applies the transform, looking inputs up by id in `available`.
    pub fn apply(&self, available: &BTreeMap<String, RawSeries>) -> Result<RawSeries> {
        self.check_arity()?;
        let inputs = self
            .inputs
            .iter()
            .map(|id| {
                available.get(id).ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "transform {} references unknown series {id}",
                        self.output
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let out = match self.kind {
            TransformKind::LaborShare => {
                construct_labor_share(inputs[0], inputs[1], inputs[2], inputs[3], inputs[4])?
            }
            TransformKind::EmploymentRate => construct_employment_rate(inputs[0])?,
            TransformKind::Spread => construct_spread(inputs[0], inputs[1])?,
            TransformKind::Log => log_transform(inputs[0])?,
            TransformKind::Identity => inputs[0].clone(),
        };
        Ok(out.with_id(self.output.clone()))
    }
}

/// A `T x k` block of quarterly observations over a gap-free calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPanel {
    variables: Vec<String>,
    start: QuarterDate,
    values: DMatrix<f64>,
}

impl AlignedPanel {
    pub fn new(variables: Vec<String>, start: QuarterDate, values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() != variables.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} columns",
                variables.len(),
                values.ncols()
            )));
        }
        Ok(Self {
            variables,
            start,
            values,
        })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn start(&self) -> QuarterDate {
        self.start
    }

    pub fn end(&self) -> QuarterDate {
        self.start + (self.len() as i64 - 1).max(0)
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn k(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn calendar(&self) -> Vec<QuarterDate> {
        calendar(self.start, self.len())
    }

    pub fn date(&self, row: usize) -> QuarterDate {
        self.start + row as i64
    }

    /// Row index of `date`, if inside the panel.
    pub fn row_of(&self, date: QuarterDate) -> Option<usize> {
        let offset = date - self.start;
        (offset >= 0 && (offset as usize) < self.len()).then_some(offset as usize)
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == label)
    }

    pub fn column(&self, label: &str) -> Option<Vec<f64>> {
        self.column_index(label)
            .map(|j| self.values.column(j).iter().copied().collect())
    }

    /// Rows `[from, to)` as a new panel.
    pub fn rows(&self, from: usize, to: usize) -> AlignedPanel {
        AlignedPanel {
            variables: self.variables.clone(),
            start: self.start + from as i64,
            values: self.values.rows(from, to - from).into_owned(),
        }
    }

    /// Columns reordered (and possibly subset) by label.
    pub fn select(&self, order: &[&str]) -> Result<AlignedPanel> {
        let idx = order
            .iter()
            .map(|label| {
                self.column_index(label)
                    .ok_or_else(|| Error::Alignment(format!("panel has no variable {label}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let values = DMatrix::from_fn(self.len(), idx.len(), |r, c| self.values[(r, idx[c])]);
        Ok(AlignedPanel {
            variables: order.iter().map(|s| s.to_string()).collect(),
            start: self.start,
            values,
        })
    }

    pub fn to_series(&self) -> Vec<RawSeries> {
        self.variables
            .iter()
            .enumerate()
            .map(|(j, label)| {
                RawSeries::new(
                    label.clone(),
                    self.start,
                    self.values.column(j).iter().copied().collect(),
                )
            })
            .collect()
    }

    /// Column-wise z-scores (sample standard deviation).
    pub fn standardized(&self) -> AlignedPanel {
        let mut values = self.values.clone();
        let n = self.len() as f64;
        for mut col in values.column_iter_mut() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let sd = var.sqrt();
            col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
        }
        AlignedPanel {
            variables: self.variables.clone(),
            start: self.start,
            values,
        }
    }

    /// Multiplies the named columns by their factors; other columns are
    /// left unchanged.
    pub fn scaled(&self, factors: &BTreeMap<String, f64>) -> AlignedPanel {
        let mut values = self.values.clone();
        for (j, var) in self.variables.iter().enumerate() {
            if let Some(&f) = factors.get(var) {
                values.column_mut(j).scale_mut(f);
            }
        }
        AlignedPanel {
            variables: self.variables.clone(),
            start: self.start,
            values,
        }
    }

    /// Writes `date,<labels...>` CSV with shortest round-trip float formatting.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.variables.iter().cloned());
        w.write_record(&header)?;
        for r in 0..self.len() {
            let mut record = vec![self.date(r).to_string()];
            record.extend(self.values.row(r).iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<panel>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Reads a panel in the format produced by [`AlignedPanel::write_csv`].
    pub fn read_csv(reader: impl Read, path: &Path) -> Result<AlignedPanel> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("date") {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                column: "date".into(),
            });
        }
        let variables: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let k = variables.len();
        let mut rows: Vec<(QuarterDate, Vec<f64>)> = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let row_err = |message: String| Error::Row {
                path: path.to_path_buf(),
                line,
                message,
            };
            let date = parse_quarter(record.get(0).unwrap_or(""))
                .map_err(|e| row_err(e.to_string()))?;
            let vals = (1..=k)
                .map(|c| {
                    let text = record.get(c).unwrap_or("");
                    text.parse::<f64>()
                        .map_err(|_| row_err(format!("unparsable value {text:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push((date, vals));
        }
        let series = RawSeries::from_observations(
            path.display().to_string(),
            rows.iter().map(|(d, _)| (*d, 0.0)).collect(),
        )?;
        let values = DMatrix::from_fn(rows.len(), k, |r, c| rows[r].1[c]);
        AlignedPanel::new(variables, series.start, values)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<AlignedPanel> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, path)
    }
}

/// Restricts the named series to their common span and stacks them as
/// columns in `order`.
pub fn align_panel(series: &[RawSeries], order: &[&str]) -> Result<AlignedPanel> {
    let picked = order
        .iter()
        .map(|label| {
            series
                .iter()
                .find(|s| s.id == *label)
                .ok_or_else(|| Error::Alignment(format!("no series labelled {label}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if picked.is_empty() {
        return Err(Error::Alignment("no series to align".into()));
    }
    let start = picked.iter().map(|s| s.start).max().unwrap();
    let end = picked.iter().map(|s| s.end()).min().unwrap();
    if picked.iter().any(|s| s.is_empty()) || end < start {
        return Err(Error::Alignment(format!(
            "series calendars do not overlap (latest start {start}, earliest end {end})"
        )));
    }
    let len = (end - start + 1) as usize;
    let values = DMatrix::from_fn(len, picked.len(), |r, c| {
        let s = picked[c];
        s.values[(start - s.start) as usize + r]
    });
    AlignedPanel::new(order.iter().map(|s| s.to_string()).collect(), start, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(s: &str) -> QuarterDate {
        parse_quarter(s).unwrap()
    }

    fn series(id: &str, start: &str, values: &[f64]) -> RawSeries {
        RawSeries::new(id, q(start), values.to_vec())
    }

    fn read(text: &str) -> Result<RawSeries> {
        read_series_csv(
            text.as_bytes(),
            Path::new("test.csv"),
            "x",
            &ColumnMap::default(),
        )
    }

    #[test]
    fn monthly_rows_average_within_quarter() {
        let s = read("date,value\n1990-01-01,4.0\n1990-02-01,5.0\n1990-03-01,6.0\n").unwrap();
        assert_eq!(s.start(), q("1990Q1"));
        assert_eq!(s.values(), &[5.0]);
    }

    #[test]
    fn partial_edge_quarters_are_dropped() {
        let s = read(
            "date,value\n1989-12-01,9\n1990-01-01,1\n1990-02-01,2\n1990-03-01,3\n1990-04-01,7\n",
        )
        .unwrap();
        assert_eq!(s.start(), q("1990Q1"));
        assert_eq!(s.values(), &[2.0]);
    }

    #[test]
    fn quarterly_gap_is_reported() {
        match read("date,value\n1990Q1,1\n1990Q3,2\n") {
            Err(Error::Gap { missing, .. }) => assert_eq!(missing, vec![q("1990Q2")]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_column_is_schema_error() {
        let err = read_series_csv(
            "when,value\n1990Q1,1\n".as_bytes(),
            Path::new("f.csv"),
            "x",
            &ColumnMap::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Schema { ref column, .. } if column == "date"));
    }

    #[test]
    fn bad_value_is_row_error() {
        match read("date,value\n1990Q1,1\n1990Q2,.\n") {
            Err(Error::Row { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn full_default_span_has_279_quarters() {
        let mut text = String::from("date,value\n");
        let mut d = q("1953Q2");
        while d <= q("2022Q4") {
            text.push_str(&format!("{d},1.5\n"));
            d = d + 1;
        }
        let s = read(&text).unwrap();
        assert_eq!(s.len(), (2022 - 1953) * 4 + (4 - 2) + 1);
        assert_eq!(s.len(), 279);
        assert_eq!(s.end(), q("2022Q4"));
    }

    #[test]
    fn labor_share_arithmetic() {
        let one = |v: f64| series("c", "2000Q1", &[v]);
        let share = construct_labor_share(&one(100.0), &one(10.0), &one(10.0), &one(20.0), &one(10.0))
            .unwrap();
        assert!((share.values()[0] - 100.0 / 150.0).abs() < 1e-12);
        let share = construct_labor_share(&one(0.0), &one(10.0), &one(10.0), &one(20.0), &one(10.0))
            .unwrap();
        assert_eq!(share.values()[0], 0.0);
        let share = construct_labor_share(&one(60.0), &one(5.0), &one(5.0), &one(20.0), &one(10.0))
            .unwrap();
        assert!((share.values()[0] - 0.60).abs() < 1e-12);
    }

    #[test]
    fn labor_share_errors() {
        let a = series("c", "2000Q1", &[1.0, 2.0]);
        let b = series("n", "2000Q2", &[1.0, 2.0]);
        assert!(matches!(
            construct_labor_share(&a, &b, &a, &a, &a),
            Err(Error::Alignment(_))
        ));
        let z = series("z", "2000Q1", &[1.0, -2.0]);
        let zero = series("0", "2000Q1", &[0.0, 0.0]);
        match construct_labor_share(&zero, &zero, &zero, &zero, &z) {
            Err(Error::Domain { date, .. }) => assert_eq!(date, q("2000Q2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn employment_rate_examples() {
        let e = construct_employment_rate(&series("u", "2000Q1", &[5.8, 0.0, 3.5])).unwrap();
        let expected = [94.2, 100.0, 96.5];
        for (got, want) in e.values().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(construct_employment_rate(&series("u", "2000Q1", &[101.0])).is_err());
        assert!(construct_employment_rate(&series("u", "2000Q1", &[-0.1])).is_err());
    }

    #[test]
    fn spread_examples() {
        let l = series("l", "2000Q1", &[4.0, 2.0, 3.0]);
        let s = series("s", "2000Q1", &[1.0, 2.0, 5.0]);
        assert_eq!(construct_spread(&l, &s).unwrap().values(), &[3.0, 0.0, -2.0]);
        let shifted = series("s", "2000Q2", &[1.0, 2.0, 5.0]);
        assert!(construct_spread(&l, &shifted).is_err());
    }

    #[test]
    fn log_examples() {
        let s = log_transform(&series("g", "2000Q1", &[100.0, 1.0])).unwrap();
        assert!((s.values()[0] - 4.605170).abs() < 1e-6);
        assert_eq!(s.values()[1], 0.0);
        match log_transform(&series("g", "2000Q1", &[1.0, 0.0])) {
            Err(Error::Domain { date, .. }) => assert_eq!(date, q("2000Q2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn transform_arity_is_checked() {
        let spec = TransformSpec {
            kind: TransformKind::Spread,
            inputs: vec!["a".into()],
            output: "s".into(),
        };
        assert!(spec.check_arity().is_err());
    }

    #[test]
    fn align_examples() {
        let a = series("a", "1953Q2", &vec![1.0; 279]);
        let b = series("b", "1954Q1", &vec![2.0; 276]);
        let p = align_panel(&[a.clone(), b], &["b", "a"]).unwrap();
        assert_eq!(p.start(), q("1954Q1"));
        assert_eq!(p.end(), q("2022Q4"));
        assert_eq!(p.variables(), &["b".to_string(), "a".to_string()]);

        let p = align_panel(&[a.clone()], &["a"]).unwrap();
        assert_eq!(p.len(), a.len());

        let c = series("c", "1930Q1", &[1.0; 4]);
        assert!(matches!(align_panel(&[a, c], &["a", "c"]), Err(Error::Alignment(_))));
    }

    #[test]
    fn panel_csv_round_trip_is_exact() {
        let values = DMatrix::from_row_slice(2, 2, &[0.1, -1.0 / 3.0, 1e-300, std::f64::consts::PI]);
        let p = AlignedPanel::new(vec!["psi".into(), "e".into()], q("1956Q1"), values).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("date,psi,e\n1956Q1,"));
        let back = AlignedPanel::read_csv(buf.as_slice(), Path::new("p.csv")).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn scaled_touches_only_named_columns() {
        let values = DMatrix::from_row_slice(2, 2, &[0.01, 1.5, -0.02, 2.5]);
        let p = AlignedPanel::new(vec!["psi".into(), "e".into()], q("1956Q1"), values).unwrap();
        let factors: BTreeMap<String, f64> = [("psi".to_string(), 100.0), ("zz".to_string(), 3.0)].into_iter().collect();
        let s = p.scaled(&factors);
        assert_eq!(s.column("psi").unwrap(), vec![1.0, -2.0]);
        assert_eq!(s.column("e").unwrap(), vec![1.5, 2.5]);
        assert_eq!((s.start(), s.variables()), (p.start(), p.variables()));
    }

    proptest! {
        #[test]
        fn labor_share_in_unit_interval(
            comp in 1e-3f64..1e4,
            rest in proptest::collection::vec(0.0f64..1e4, 4),
        ) {
            let one = |v: f64| series("x", "2000Q1", &[v]);
            let s = construct_labor_share(&one(comp), &one(rest[0]), &one(rest[1]), &one(rest[2]), &one(rest[3])).unwrap();
            let v = s.values()[0];
            prop_assert!(v > 0.0 && v <= 1.0);
        }

        #[test]
        fn align_is_idempotent(
            starts in proptest::collection::vec(0i64..20, 3),
            lens in proptest::collection::vec(25usize..40, 3),
        ) {
            let base = q("1990Q1");
            let all: Vec<RawSeries> = (0..3)
                .map(|i| RawSeries::new(format!("v{i}"), base + starts[i], (0..lens[i]).map(|x| x as f64 + i as f64).collect()))
                .collect();
            let order = ["v2", "v0", "v1"];
            let once = align_panel(&all, &order).unwrap();
            let twice = align_panel(&once.to_series(), &order).unwrap();
            prop_assert_eq!(&once, &twice);
            let cal = once.calendar();
            prop_assert!(cal.windows(2).all(|w| w[1] - w[0] == 1));
        }
    }
}
