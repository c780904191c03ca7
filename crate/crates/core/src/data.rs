//! Monthly return panels in the Fama-French CSV layout, window plans, and
//! the equal-weight target return.
//!
//! Input layout: a header row whose first cell names the date column
//! followed by asset names, then rows `YYYYMM,v1,...,vn` with values in
//! percent. Values are stored in decimal (percent / 100).

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Missing-value sentinels used in the Fama-French library files.
pub const MISSING_SENTINELS: [f64; 2] = [-99.99, -999.0];

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Config(format!("month must be 1..=12, got {month}")));
        }
        Ok(Self { year, month })
    }

    pub fn year(&self) -> i32 {
        self.year
    }
    pub fn month(&self) -> u32 {
        self.month
    }

    fn index(&self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    fn from_index(i: i64) -> Self {
        Self {
            year: i.div_euclid(12) as i32,
            month: (i.rem_euclid(12) + 1) as u32,
        }
    }

    pub fn succ(&self) -> Self {
        self.add_months(1)
    }

    pub fn add_months(&self, k: i64) -> Self {
        Self::from_index(self.index() + k)
    }

    /// Number of months from `self` to `other` (negative if `other` is earlier).
    pub fn months_until(&self, other: YearMonth) -> i64 {
        other.index() - self.index()
    }

    pub fn range_inclusive(self, last: YearMonth) -> impl Iterator<Item = YearMonth> {
        (self.index()..=last.index()).map(Self::from_index)
    }

    /// `MM/YY`, as used in report period labels.
    pub fn short_label(&self) -> String {
        format!("{:02}/{:02}", self.month, self.year.rem_euclid(100))
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() != 6 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::Config(format!("expected YYYYMM, got '{s}'")));
        }
        let year: i32 = s[..4].parse().expect("digits");
        let month: u32 = s[4..].parse().expect("digits");
        YearMonth::new(year, month)
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An inclusive `(start, end)` month range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: YearMonth,
    pub end: YearMonth,
}

impl Window {
    pub fn new(start: YearMonth, end: YearMonth) -> Result<Self> {
        if end < start {
            return Err(Error::Config(format!("window end {end} precedes start {start}")));
        }
        Ok(Self { start, end })
    }

    pub fn months(&self) -> usize {
        (self.start.months_until(self.end) + 1) as usize
    }

    /// `MM/YY-MM/YY`
    pub fn label(&self) -> String {
        format!("{}-{}", self.start.short_label(), self.end.short_label())
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..={}", self.start, self.end)
    }
}

/// Dated `T x n` matrix of decimal returns without missing values.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    dates: Vec<YearMonth>,
    assets: Vec<String>,
    values: DMatrix<f64>,
}

impl ReturnsPanel {
    pub fn new(dates: Vec<YearMonth>, assets: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.shape() != (dates.len(), assets.len()) {
            return Err(Error::Dimension(format!(
                "values are {:?} but there are {} dates and {} assets",
                values.shape(),
                dates.len(),
                assets.len()
            )));
        }
        for w in dates.windows(2) {
            if w[1] != w[0].succ() {
                return Err(Error::MonthGap {
                    line: 0,
                    prev: w[0],
                    next: w[1],
                });
            }
        }
        for j in 0..values.ncols() {
            for i in 0..values.nrows() {
                if !values[(i, j)].is_finite() {
                    return Err(Error::MissingData { row: i, col: j });
                }
            }
        }
        Ok(Self { dates, assets, values })
    }

    pub fn dates(&self) -> &[YearMonth] {
        &self.dates
    }
    pub fn assets(&self) -> &[String] {
        &self.assets
    }
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }
    pub fn len(&self) -> usize {
        self.dates.len()
    }
    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn full_window(&self) -> Option<Window> {
        Some(Window {
            start: *self.dates.first()?,
            end: *self.dates.last()?,
        })
    }

    fn row_range(&self, w: &Window) -> Result<std::ops::Range<usize>> {
        let (first, last) = match (self.dates.first(), self.dates.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => return Err(Error::EmptyWindow),
        };
        if w.start < first || w.end > last || w.end < w.start {
            return Err(Error::WindowOutOfRange {
                start: w.start,
                end: w.end,
                first,
                last,
            });
        }
        let lo = first.months_until(w.start) as usize;
        let hi = first.months_until(w.end) as usize + 1;
        Ok(lo..hi)
    }

    /// Keeps only the named columns, in the given order.
    pub fn select_assets(&self, keep: &[usize]) -> Self {
        let values = self.values.select_columns(keep.iter());
        Self {
            dates: self.dates.clone(),
            assets: keep.iter().map(|&j| self.assets[j].clone()).collect(),
            values,
        }
    }
}

/// Contiguous row slice of the panel covering `window`.
pub fn slice_window(panel: &ReturnsPanel, window: &Window) -> Result<DMatrix<f64>> {
    let rows = panel.row_range(window)?;
    Ok(panel.values.rows(rows.start, rows.len()).into_owned())
}

/// Average monthly return over `window` of the equal-weight portfolio.
pub fn compute_beta(panel: &ReturnsPanel, window: &Window) -> Result<f64> {
    let slice = slice_window(panel, window)?;
    if slice.nrows() == 0 || slice.ncols() == 0 {
        return Err(Error::EmptyWindow);
    }
    let n = slice.ncols() as f64;
    let per_month: Vec<f64> = slice.row_iter().map(|r| r.sum() / n).collect();
    Ok(per_month.iter().sum::<f64>() / per_month.len() as f64)
}

/// What to do with missing-value sentinels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    /// Any sentinel is an error.
    #[default]
    Error,
    /// Drop assets with a sentinel inside the active range.
    DropAssets,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub missing: MissingPolicy,
    /// Rows outside this range are discarded after validation. Required to
    /// scope [`MissingPolicy::DropAssets`]; without it the whole file is active.
    pub active: Option<Window>,
}

fn is_sentinel(v: f64) -> bool {
    MISSING_SENTINELS.iter().any(|s| (v - s).abs() < 1e-9)
}

/// Parses a returns file. Errors carry 1-based line numbers.
pub fn parse_returns_csv<R: Read>(input: R, opts: &ParseOptions) -> Result<ReturnsPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_error(e, 1))?,
        None => return Err(Error::Parse { line: 1, message: "empty input".into() }),
    };
    if header.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "header needs a date column and at least one asset".into(),
        });
    }
    let assets: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = assets.len();

    let mut dates: Vec<YearMonth> = Vec::new();
    let mut lines: Vec<u64> = Vec::new();
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    for (k, rec) in records.enumerate() {
        let fallback_line = k as u64 + 2;
        let rec = rec.map_err(|e| csv_error(e, fallback_line))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(fallback_line);
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        if rec.len() != n + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", n + 1, rec.len()),
            });
        }
        let date: YearMonth = rec[0].parse().map_err(|_| Error::Parse {
            line,
            message: format!("malformed date '{}'", &rec[0]),
        })?;
        if let Some(prev) = dates.last() {
            if date != prev.succ() {
                return Err(Error::MonthGap {
                    line,
                    prev: *prev,
                    next: date,
                });
            }
        }
        let mut row = Vec::with_capacity(n);
        for (j, cell) in rec.iter().skip(1).enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!("non-numeric value '{cell}' in column '{}'", assets[j]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value '{cell}' in column '{}'", assets[j]),
                });
            }
            row.push(if is_sentinel(v) { None } else { Some(v / 100.0) });
        }
        dates.push(date);
        lines.push(line);
        rows.push(row);
    }
    if dates.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "no data rows".into(),
        });
    }

    let (lo, hi) = match opts.active {
        Some(w) => {
            let first = dates[0];
            let last = *dates.last().expect("nonempty");
            if w.start < first || w.end > last {
                return Err(Error::WindowOutOfRange {
                    start: w.start,
                    end: w.end,
                    first,
                    last,
                });
            }
            (first.months_until(w.start) as usize, first.months_until(w.end) as usize + 1)
        }
        None => (0, dates.len()),
    };

    let keep: Vec<usize> = match opts.missing {
        MissingPolicy::Error => {
            for (row, line) in rows[lo..hi].iter().zip(&lines[lo..hi]) {
                if let Some(j) = row.iter().position(Option::is_none) {
                    return Err(Error::MissingSentinel {
                        line: *line,
                        asset: assets[j].clone(),
                    });
                }
            }
            (0..n).collect()
        }
        MissingPolicy::DropAssets => (0..n)
            .filter(|&j| rows[lo..hi].iter().all(|r| r[j].is_some()))
            .collect(),
    };
    if keep.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "every asset has missing values in the active range".into(),
        });
    }

    let t = hi - lo;
    let values = DMatrix::from_fn(t, keep.len(), |i, j| rows[lo + i][keep[j]].expect("checked"));
    ReturnsPanel::new(
        dates[lo..hi].to_vec(),
        keep.iter().map(|&j| assets[j].clone()).collect(),
        values,
    )
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Shortest percent string that parses back to the same decimal value.
fn percent_repr(v: f64) -> String {
    let pct = v * 100.0;
    for prec in 0..=17 {
        let s = format!("{pct:.prec$}");
        if s.parse::<f64>().map(|p| p / 100.0 == v).unwrap_or(false) {
            return s;
        }
    }
    format!("{pct:e}")
}

/// Writes a panel in the input layout (percent values).
pub fn write_returns_csv<W: Write>(panel: &ReturnsPanel, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["Date".to_string()];
    header.extend(panel.assets.iter().cloned());
    w.write_record(&header).map_err(csv_write_error)?;
    for (i, d) in panel.dates.iter().enumerate() {
        let mut rec = vec![d.to_string()];
        rec.extend(panel.values.row(i).iter().map(|&v| percent_repr(v)));
        w.write_record(&rec).map_err(csv_write_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_write_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Extracts one table from a raw Fama-French library file: keeps the
/// header line `header_line` and the data lines `first..=last` (1-based),
/// dropping blank cells left by trailing commas.
pub fn trim_raw_table(raw: &str, header_line: usize, first: usize, last: usize) -> Result<String> {
    let lines: Vec<&str> = raw.lines().collect();
    if header_line == 0 || first == 0 || first > last || last > lines.len() || header_line > lines.len() {
        return Err(Error::Config(format!(
            "row range header={header_line}, data={first}..={last} invalid for a {}-line file",
            lines.len()
        )));
    }
    let clean = |l: &str| -> String {
        l.split(',')
            .map(str::trim)
            .collect::<Vec<_>>()
            .join(",")
            .trim_end_matches(',')
            .to_string()
    };
    let mut header = clean(lines[header_line - 1]);
    if header.starts_with(',') {
        header.insert_str(0, "Date");
    }
    let mut out = header;
    out.push('\n');
    for l in &lines[first - 1..last] {
        out.push_str(&clean(l));
        out.push('\n');
    }
    Ok(out)
}

/// One out-of-sample sub-period and the window its inputs are estimated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubPeriod {
    pub estimation: Window,
    pub evaluation: Window,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub periods: Vec<SubPeriod>,
}

impl WindowPlan {
    /// Six 5-year evaluation periods from 07/1976 to 06/2006. With rolling
    /// estimation each uses the preceding 60 months; otherwise all use
    /// 07/1971-06/1976.
    pub fn six_periods(rolling: bool) -> Self {
        let first_eval = YearMonth { year: 1976, month: 7 };
        Self::consecutive(first_eval, 6, 60, 60, rolling)
    }

    /// `count` back-to-back evaluation windows of `eval_months`, each with an
    /// estimation window of `est_months` ending the month before it (or the
    /// one before the first evaluation window when `rolling` is false).
    pub fn consecutive(first_eval: YearMonth, count: usize, eval_months: usize, est_months: usize, rolling: bool) -> Self {
        let first_est = Window {
            start: first_eval.add_months(-(est_months as i64)),
            end: first_eval.add_months(-1),
        };
        let periods = (0..count)
            .map(|k| {
                let start = first_eval.add_months((k * eval_months) as i64);
                let evaluation = Window {
                    start,
                    end: start.add_months(eval_months as i64 - 1),
                };
                let estimation = if rolling {
                    Window {
                        start: start.add_months(-(est_months as i64)),
                        end: start.add_months(-1),
                    }
                } else {
                    first_est
                };
                SubPeriod { estimation, evaluation }
            })
            .collect();
        Self { periods }
    }

    pub fn validate(&self) -> Result<()> {
        if self.periods.is_empty() {
            return Err(Error::Config("window plan has no periods".into()));
        }
        for p in &self.periods {
            if p.estimation.end >= p.evaluation.start {
                return Err(Error::Config(format!(
                    "estimation window {} overlaps evaluation window {}",
                    p.estimation, p.evaluation
                )));
            }
        }
        for w in self.periods.windows(2) {
            if w[1].evaluation.start <= w[0].evaluation.end {
                return Err(Error::Config("evaluation windows must be ordered and disjoint".into()));
            }
        }
        Ok(())
    }

    /// Union of all evaluation windows when they are contiguous.
    pub fn whole_evaluation(&self) -> Option<Window> {
        Some(Window {
            start: self.periods.first()?.evaluation.start,
            end: self.periods.last()?.evaluation.end,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ym(s: &str) -> YearMonth {
        s.parse().unwrap()
    }

    fn parse(s: &str) -> Result<ReturnsPanel> {
        parse_returns_csv(s.as_bytes(), &ParseOptions::default())
    }

    #[test]
    fn yearmonth_arithmetic() {
        assert_eq!(ym("197612").succ(), ym("197701"));
        assert_eq!(ym("197607").add_months(-60), ym("197107"));
        assert_eq!(ym("197107").months_until(ym("197606")), 59);
        assert!("197613".parse::<YearMonth>().is_err());
        assert!("19761".parse::<YearMonth>().is_err());
        assert_eq!(ym("200106").short_label(), "06/01");
    }

    #[test]
    fn parses_well_formed_file() {
        let p = parse("Date,A,B\n197607,1.5,-2\n197608,0.25,3\n").unwrap();
        assert_eq!(p.assets(), &["A".to_string(), "B".to_string()]);
        assert_eq!(p.dates(), &[ym("197607"), ym("197608")]);
        assert_eq!(p.values(), &DMatrix::from_row_slice(2, 2, &[0.015, -0.02, 0.0025, 0.03]));
    }

    #[test]
    fn tolerates_padding_and_blank_lines() {
        let p = parse(" ,A ,B\n197607,  1.5,  -2\n\n197608, 0.25, 3\n").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.assets()[0], "A");
    }

    #[test]
    fn sentinel_is_rejected_by_default() {
        let err = parse("Date,A,B\n197607,1,2\n197608,-99.99,3\n").unwrap_err();
        match err {
            Error::MissingSentinel { line, asset } => {
                assert_eq!(line, 3);
                assert_eq!(asset, "A");
            }
            e => panic!("unexpected {e:?}"),
        }
        assert!(matches!(
            parse("Date,A,B\n197607,-999,2\n"),
            Err(Error::MissingSentinel { line: 2, .. })
        ));
    }

    #[test]
    fn drop_policy_removes_assets_in_active_range_only() {
        let src = "Date,A,B,C\n197606,-99.99,1,1\n197607,1,2,3\n197608,1,-99.99,3\n";
        let opts = ParseOptions {
            missing: MissingPolicy::DropAssets,
            active: Some(Window::new(ym("197607"), ym("197608")).unwrap()),
        };
        let p = parse_returns_csv(src.as_bytes(), &opts).unwrap();
        assert_eq!(p.assets(), &["A".to_string(), "C".to_string()]);
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn month_gap_names_both_stamps() {
        let err = parse("Date,A\n197607,1\n197609,2\n").unwrap_err();
        match &err {
            Error::MonthGap { line, prev, next } => {
                assert_eq!((*line, *prev, *next), (3, ym("197607"), ym("197609")));
            }
            e => panic!("unexpected {e:?}"),
        }
        let msg = err.to_string();
        assert!(msg.contains("197607") && msg.contains("197609"));
    }

    #[test]
    fn malformed_inputs_report_lines() {
        assert!(matches!(parse("Date,A\n1976-07,1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("Date,A,B\n197607,1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("Date,A\n197607,1\n197608,abc\n"), Err(Error::Parse { line: 3, .. })));
        assert!(parse("").is_err());
        assert!(parse("Date,A\n").is_err());
    }

    fn panel_2x2() -> ReturnsPanel {
        ReturnsPanel::new(
            vec![ym("200001"), ym("200002")],
            vec!["A".into(), "B".into()],
            DMatrix::from_row_slice(2, 2, &[0.01, 0.03, 0.02, 0.04]),
        )
        .unwrap()
    }

    #[test]
    fn beta_examples() {
        let p = panel_2x2();
        let w = p.full_window().unwrap();
        assert!((compute_beta(&p, &w).unwrap() - 0.025).abs() < 1e-15);

        let c = ReturnsPanel::new(
            ym("200001").range_inclusive(ym("200012")).collect(),
            vec!["A".into(), "B".into(), "C".into()],
            DMatrix::from_element(12, 3, 0.007),
        )
        .unwrap();
        assert!((compute_beta(&c, &c.full_window().unwrap()).unwrap() - 0.007).abs() < 1e-15);

        let outside = Window::new(ym("199912"), ym("200001")).unwrap();
        assert!(matches!(compute_beta(&p, &outside), Err(Error::WindowOutOfRange { .. })));
    }

    #[test]
    fn slice_examples() {
        let p = panel_2x2();
        assert_eq!(&slice_window(&p, &p.full_window().unwrap()).unwrap(), p.values());
        let one = slice_window(&p, &Window::new(ym("200002"), ym("200002")).unwrap()).unwrap();
        assert_eq!(one.shape(), (1, 2));
        assert_eq!(one[(0, 1)], 0.04);
        assert!(slice_window(&p, &Window::new(ym("200001"), ym("200003")).unwrap()).is_err());
    }

    #[test]
    fn six_period_plan() {
        let plan = WindowPlan::six_periods(true);
        plan.validate().unwrap();
        assert_eq!(plan.periods.len(), 6);
        assert_eq!(plan.periods[0].estimation, Window::new(ym("197107"), ym("197606")).unwrap());
        assert_eq!(plan.periods[0].evaluation, Window::new(ym("197607"), ym("198106")).unwrap());
        assert_eq!(plan.periods[5].evaluation, Window::new(ym("200107"), ym("200606")).unwrap());
        assert_eq!(plan.periods[5].estimation, Window::new(ym("199607"), ym("200106")).unwrap());
        assert_eq!(plan.whole_evaluation().unwrap().label(), "07/76-06/06");

        let fixed = WindowPlan::six_periods(false);
        assert!(fixed.periods.iter().all(|p| p.estimation == plan.periods[0].estimation));
    }

    #[test]
    fn estimation_slice_for_first_period() {
        let dates: Vec<YearMonth> = ym("197001").range_inclusive(ym("198012")).collect();
        let t = dates.len();
        let values = DMatrix::from_fn(t, 2, |i, j| (i * 2 + j) as f64 * 1e-4);
        let panel = ReturnsPanel::new(dates, vec!["A".into(), "B".into()], values).unwrap();
        let plan = WindowPlan::six_periods(true);
        let s = slice_window(&panel, &plan.periods[0].estimation).unwrap();
        assert_eq!(s.nrows(), 60);
        // 197107 is row 18 of a panel starting 197001
        assert_eq!(s[(0, 0)], panel.values()[(18, 0)]);
        assert_eq!(s[(59, 1)], panel.values()[(77, 1)]);
    }

    #[test]
    fn trims_raw_library_table() {
        let raw = "This file was created ...\n\n  Average Value Weighted Returns -- Monthly\n,Agric,Food ,\n192607,   2.37,   0.12,\n192608,   2.23,   2.68,\n\n  Average Equal Weighted Returns\n";
        let trimmed = trim_raw_table(raw, 4, 5, 6).unwrap();
        assert_eq!(trimmed, "Date,Agric,Food\n192607,2.37,0.12\n192608,2.23,2.68\n");
        let p = parse(&trimmed).unwrap();
        assert_eq!(p.values()[(1, 1)], 0.0268);
        assert!(trim_raw_table(raw, 4, 6, 5).is_err());
    }

    fn arb_panel() -> impl Strategy<Value = ReturnsPanel> {
        (1usize..20, 1usize..6, 1960i32..2000, 1u32..=12).prop_flat_map(|(t, n, y, m)| {
            proptest::collection::vec(-5000i32..5000, t * n).prop_map(move |cents| {
                let start = YearMonth::new(y, m).unwrap();
                let dates: Vec<_> = start.range_inclusive(start.add_months(t as i64 - 1)).collect();
                let values = DMatrix::from_fn(t, n, |i, j| cents[i * n + j] as f64 / 100.0 / 100.0);
                ReturnsPanel::new(dates, (0..n).map(|j| format!("a{j}")).collect(), values).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn csv_round_trip(panel in arb_panel()) {
            let mut buf = Vec::new();
            write_returns_csv(&panel, &mut buf).unwrap();
            let back = parse_returns_csv(buf.as_slice(), &ParseOptions::default()).unwrap();
            prop_assert_eq!(&back, &panel);
            let mut buf2 = Vec::new();
            write_returns_csv(&back, &mut buf2).unwrap();
            prop_assert_eq!(buf, buf2);
        }

        #[test]
        fn adjacent_slices_stack(panel in arb_panel(), cut in 0usize..19) {
            let w = panel.full_window().unwrap();
            let t = panel.len();
            prop_assume!(t >= 2 && cut + 1 < t);
            let mid = w.start.add_months(cut as i64);
            let a = slice_window(&panel, &Window::new(w.start, mid).unwrap()).unwrap();
            let b = slice_window(&panel, &Window::new(mid.succ(), w.end).unwrap()).unwrap();
            let mut stacked = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
            stacked.rows_mut(0, a.nrows()).copy_from(&a);
            stacked.rows_mut(a.nrows(), b.nrows()).copy_from(&b);
            prop_assert_eq!(&stacked, &slice_window(&panel, &w).unwrap());
        }
    }
}
