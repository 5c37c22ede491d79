//! Daily RMM index records: parsing the published text feed, splitting it into
//! train/validation/test windows, and building rolling-window training matrices.

mod fetch;
mod split;

use chrono::{Datelike, Duration, NaiveDate};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub(crate) use fetch::write_atomic;
pub use fetch::{fetch_rmm, FetchOptions, DEFAULT_RMM_URL};
pub use split::{split_dataset, DatasetSplit, SplitConfig};

/// Any magnitude at or above this value is a missing-value sentinel
/// (the feed uses both `999` and `1.E36`).
pub const MISSING_THRESHOLD: f64 = 999.0;

/// Maximum disagreement tolerated between the published amplitude and the
/// norm of the published components (the feed rounds).
pub const AMPLITUDE_TOLERANCE: f64 = 1e-2;

/// One day of the RMM index. `None` marks a missing value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmmRecord {
    pub date: NaiveDate,
    pub rmm1: Option<f64>,
    pub rmm2: Option<f64>,
    pub phase: Option<u8>,
    pub amplitude: Option<f64>,
}

impl RmmRecord {
    pub fn missing(date: NaiveDate) -> Self {
        Self {
            date,
            rmm1: None,
            rmm2: None,
            phase: None,
            amplitude: None,
        }
    }

    /// Builds a complete record, deriving phase and amplitude from the components.
    pub fn from_components(date: NaiveDate, rmm1: f64, rmm2: f64) -> Self {
        let amplitude = rmm1.hypot(rmm2);
        Self {
            date,
            rmm1: Some(rmm1),
            rmm2: Some(rmm2),
            phase: Some(wheeler_hendon_phase(rmm1, rmm2)),
            amplitude: Some(amplitude),
        }
    }

    /// `(rmm1, rmm2)` when both components are present.
    pub fn pair(&self) -> Option<[f64; 2]> {
        Some([self.rmm1?, self.rmm2?])
    }

    pub fn is_missing(&self) -> bool {
        self.pair().is_none()
    }
}

/// Published phase convention: phase 1 starts at 180 degrees and phases advance
/// counter-clockwise in 45 degree sectors.
fn wheeler_hendon_phase(rmm1: f64, rmm2: f64) -> u8 {
    let deg = rmm2.atan2(rmm1).to_degrees();
    let shifted = (deg + 180.0).rem_euclid(360.0);
    ((shifted / 45.0).floor() as u8 % 8) + 1
}

/// A contiguous, strictly date-ordered run of daily records.
///
/// Calendar gaps in the input become explicit missing records, so index `i`
/// always corresponds to `start + i` days.
#[derive(Debug, Clone, PartialEq)]
pub struct RmmSeries {
    records: Vec<RmmRecord>,
}

impl RmmSeries {
    /// Builds a series from records in strictly increasing date order.
    pub fn from_records(records: Vec<RmmRecord>) -> Result<Self> {
        let mut out: Vec<RmmRecord> = Vec::with_capacity(records.len());
        for (i, rec) in records.into_iter().enumerate() {
            if let Some(prev) = out.last() {
                if rec.date <= prev.date {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("date {} does not follow {}", rec.date, prev.date),
                    });
                }
                let mut d = prev.date + Duration::days(1);
                while d < rec.date {
                    out.push(RmmRecord::missing(d));
                    d += Duration::days(1);
                }
            }
            out.push(rec);
        }
        Ok(Self { records: out })
    }

    /// Builds a fully observed series from component pairs starting at `start`.
    pub fn from_pairs(start: NaiveDate, pairs: &[[f64; 2]]) -> Self {
        let records = pairs
            .iter()
            .enumerate()
            .map(|(i, p)| RmmRecord::from_components(start + Duration::days(i as i64), p[0], p[1]))
            .collect();
        Self { records }
    }

    pub fn records(&self) -> &[RmmRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn start(&self) -> Option<NaiveDate> {
        self.records.first().map(|r| r.date)
    }

    pub fn end(&self) -> Option<NaiveDate> {
        self.records.last().map(|r| r.date)
    }

    /// Position of `date` in the series.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let start = self.start()?;
        let offset = (date - start).num_days();
        if offset < 0 || offset as usize >= self.records.len() {
            None
        } else {
            Some(offset as usize)
        }
    }

    pub fn get(&self, date: NaiveDate) -> Option<&RmmRecord> {
        self.index_of(date).map(|i| &self.records[i])
    }

    /// Sub-series on the inclusive date range, or `None` if not fully covered.
    pub fn slice(&self, from: NaiveDate, to: NaiveDate) -> Option<RmmSeries> {
        if to < from {
            return None;
        }
        let i = self.index_of(from)?;
        let j = self.index_of(to)?;
        Some(Self {
            records: self.records[i..=j].to_vec(),
        })
    }

    /// Sub-series by index range.
    pub fn slice_index(&self, range: std::ops::Range<usize>) -> RmmSeries {
        Self {
            records: self.records[range].to_vec(),
        }
    }

    pub fn missing_dates(&self) -> Vec<NaiveDate> {
        self.records
            .iter()
            .filter(|r| r.is_missing())
            .map(|r| r.date)
            .collect()
    }

    /// Component pairs, failing if any day is missing.
    pub fn pairs(&self) -> Result<Vec<[f64; 2]>> {
        let missing = self.missing_dates();
        if !missing.is_empty() {
            return Err(Error::SplitMissing {
                window: "requested".into(),
                dates: missing,
            });
        }
        Ok(self.records.iter().filter_map(|r| r.pair()).collect())
    }

    /// Serializes to the published whitespace-delimited feed format.
    pub fn to_feed_text(&self) -> String {
        let mut s = String::with_capacity(64 * (self.records.len() + 2));
        s.push_str("RMM values written by mjo-gp\n");
        s.push_str(
            "year, month, day, RMM1, RMM2, phase, amplitude.  Missing Value= 1.E36 or 999\n",
        );
        for r in &self.records {
            let num = |v: Option<f64>| v.map_or_else(|| "1.E36".to_string(), |x| format!("{x:?}"));
            let phase = r.phase.map_or_else(|| "999".to_string(), |p| p.to_string());
            s.push_str(&format!(
                "{:>6} {:>2} {:>2} {} {} {} {}\n",
                r.date.year(),
                r.date.month(),
                r.date.day(),
                num(r.rmm1),
                num(r.rmm2),
                phase,
                num(r.amplitude),
            ));
        }
        s
    }
}

fn parse_value(token: &str, line: usize, field: &str) -> Result<Option<f64>> {
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("malformed {field} value {token:?}"),
    })?;
    if !v.is_finite() || v.abs() >= MISSING_THRESHOLD {
        Ok(None)
    } else {
        Ok(Some(v))
    }
}

/// Parses the published RMM text feed.
///
/// A line whose first three tokens are integers is a data line; anything else
/// is treated as a header. Columns are
/// `year month day rmm1 rmm2 phase amplitude [note...]`.
pub fn parse_rmm_text(raw: &str) -> Result<RmmSeries> {
    let mut records = Vec::new();
    let mut prev: Option<NaiveDate> = None;
    for (idx, text) in raw.lines().enumerate() {
        let line = idx + 1;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() < 3 {
            continue;
        }
        let (Ok(year), Ok(month), Ok(day)) = (
            tokens[0].parse::<i32>(),
            tokens[1].parse::<u32>(),
            tokens[2].parse::<u32>(),
        ) else {
            continue;
        };
        if tokens.len() < 7 {
            return Err(Error::Parse {
                line,
                msg: format!("expected at least 7 columns, found {}", tokens.len()),
            });
        }
        let date = NaiveDate::from_ymd_opt(year, month, day).ok_or_else(|| Error::Parse {
            line,
            msg: format!("invalid date {year}-{month}-{day}"),
        })?;
        if let Some(p) = prev {
            if date <= p {
                return Err(Error::Parse {
                    line,
                    msg: format!("date {date} is not after previous date {p}"),
                });
            }
        }
        prev = Some(date);

        let rmm1 = parse_value(tokens[3], line, "RMM1")?;
        let rmm2 = parse_value(tokens[4], line, "RMM2")?;
        let phase = match parse_value(tokens[5], line, "phase")? {
            None => None,
            Some(p) if p.fract() == 0.0 && (1.0..=8.0).contains(&p) => Some(p as u8),
            Some(p) => {
                return Err(Error::Parse {
                    line,
                    msg: format!("phase {p} outside 1..8"),
                })
            }
        };
        let amplitude = parse_value(tokens[6], line, "amplitude")?;
        if let (Some(a), Some(b), Some(amp)) = (rmm1, rmm2, amplitude) {
            if (a.hypot(b) - amp).abs() > AMPLITUDE_TOLERANCE {
                return Err(Error::Parse {
                    line,
                    msg: format!(
                        "amplitude {amp} disagrees with |({a}, {b})| = {}",
                        a.hypot(b)
                    ),
                });
            }
        }
        records.push(RmmRecord {
            date,
            rmm1,
            rmm2,
            phase,
            amplitude,
        });
    }
    RmmSeries::from_records(records)
}

/// Stacked rolling windows and their next-day targets.
///
/// Column `i` of `x` holds days `i..i+L` of RMM1 stacked over the same days of
/// RMM2 (chronological within each block); column `i` of `y` holds day `i+L`.
#[derive(Debug, Clone)]
pub struct TrainingMatrix {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub window_starts: Vec<NaiveDate>,
}

impl TrainingMatrix {
    pub fn lag(&self) -> usize {
        self.x.nrows() / 2
    }

    pub fn samples(&self) -> usize {
        self.x.ncols()
    }
}

/// Builds the first `n` rolling windows of length `lag` from the segment.
pub fn rolling_windows(segment: &RmmSeries, lag: usize, n: usize) -> Result<TrainingMatrix> {
    if lag == 0 || n == 0 {
        return Err(Error::Input(format!(
            "lag and sample count must be positive (lag={lag}, n={n})"
        )));
    }
    let need = lag + n;
    if segment.len() < need {
        return Err(Error::Window {
            need,
            have: segment.len(),
        });
    }
    let used = segment.slice_index(0..need);
    let z = used.pairs()?;
    let start = used.start().expect("non-empty segment");

    let x = DMatrix::from_fn(2 * lag, n, |row, col| {
        let (comp, pos) = (row / lag, row % lag);
        z[col + pos][comp]
    });
    let y = DMatrix::from_fn(2, n, |comp, col| z[col + lag][comp]);
    let window_starts = (0..n).map(|i| start + Duration::days(i as i64)).collect();
    Ok(TrainingMatrix {
        x,
        y,
        window_starts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn parses_a_final_value_line() {
        let s = parse_rmm_text("2012 1 1 0.5 -0.3 5 0.583 FINAL").unwrap();
        let r = s.records()[0];
        assert_eq!(r.date, ymd(2012, 1, 1));
        assert_eq!(r.rmm1, Some(0.5));
        assert_eq!(r.rmm2, Some(-0.3));
        assert_eq!(r.phase, Some(5));
        assert_eq!(r.amplitude, Some(0.583));
    }

    #[test]
    fn sentinels_become_missing() {
        let s = parse_rmm_text("1978 6 2 1.E36 1.E36 999 1.E36").unwrap();
        let r = s.records()[0];
        assert_eq!(r, RmmRecord::missing(ymd(1978, 6, 2)));
        let s = parse_rmm_text("1978 6 2 999 999.0 999 999").unwrap();
        assert!(s.records()[0].is_missing());
    }

    #[test]
    fn header_lines_are_skipped() {
        let raw = "RMM values up to \"real time\".\n\
                   year, month, day, RMM1, RMM2, phase, amplitude.  Missing Value= 1.E36 or 999\n\
                   \x20  1974  6  1  1.63447616E-02 -1.92878786E-02  6  2.52806488E-02 Final_value:__OLR_&_ERA5_winds\n";
        let s = parse_rmm_text(raw).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.records()[0].phase, Some(6));
    }

    #[test]
    fn malformed_field_names_line() {
        let err = parse_rmm_text("header\n2012 1 1 abc -0.3 5 0.583").unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("RMM1"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_monotone_dates_rejected() {
        let raw = "2012 1 2 0.5 -0.3 5 0.583\n2012 1 1 0.5 -0.3 5 0.583\n";
        assert!(matches!(
            parse_rmm_text(raw),
            Err(Error::Parse { line: 2, .. })
        ));
        let dup = "2012 1 1 0.5 -0.3 5 0.583\n2012 1 1 0.5 -0.3 5 0.583\n";
        assert!(matches!(
            parse_rmm_text(dup),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn inconsistent_amplitude_rejected() {
        assert!(parse_rmm_text("2012 1 1 0.5 -0.3 5 0.9").is_err());
    }

    #[test]
    fn gaps_become_explicit_missing_records() {
        let raw = "2012 1 1 0.5 -0.3 5 0.583\n2012 1 4 0.5 -0.3 5 0.583\n";
        let s = parse_rmm_text(raw).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.missing_dates(), vec![ymd(2012, 1, 2), ymd(2012, 1, 3)]);
    }

    #[test]
    fn rolling_windows_small_example() {
        let vals = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let pairs: Vec<[f64; 2]> = vals.iter().map(|&v| [v, v]).collect();
        let s = RmmSeries::from_pairs(ymd(2000, 1, 1), &pairs);
        let tm = rolling_windows(&s, 3, 4).unwrap();
        assert_eq!(tm.x.shape(), (6, 4));
        for i in 0..4 {
            for comp in 0..2 {
                let col: Vec<f64> = (0..3).map(|p| tm.x[(comp * 3 + p, i)]).collect();
                let expect: Vec<f64> = (0..3).map(|p| (i + p + 1) as f64).collect();
                assert_eq!(col, expect);
                assert_eq!(tm.y[(comp, i)], (i + 4) as f64);
            }
        }
        assert_eq!(tm.window_starts[3], ymd(2000, 1, 4));
    }

    #[test]
    fn rolling_windows_smallest_case() {
        let s = RmmSeries::from_pairs(ymd(2000, 1, 1), &[[0.25, 0.25], [-0.5, -0.5]]);
        let tm = rolling_windows(&s, 1, 1).unwrap();
        assert_eq!(tm.x.as_slice(), &[0.25, 0.25]);
        assert_eq!(tm.y.as_slice(), &[-0.5, -0.5]);
    }

    #[test]
    fn rolling_windows_index_arithmetic_on_train_length() {
        // 13880 days from 1979-01-01; L=40, n=10000 uses days 0..=10039.
        let pairs: Vec<[f64; 2]> = (0..13880).map(|i| [i as f64, -(i as f64)]).collect();
        let s = RmmSeries::from_pairs(ymd(1979, 1, 1), &pairs);
        let tm = rolling_windows(&s, 40, 10000).unwrap();
        assert_eq!(tm.x.shape(), (80, 10000));
        assert_eq!(tm.x[(39, 9999)], 10038.0);
        assert_eq!(tm.y[(0, 9999)], 10039.0);
        assert_eq!(tm.y[(1, 9999)], -10039.0);
    }

    #[test]
    fn rolling_windows_too_short() {
        let s = RmmSeries::from_pairs(ymd(2000, 1, 1), &[[0.0, 0.0]; 5]);
        match rolling_windows(&s, 3, 3) {
            Err(Error::Window { need, have }) => assert_eq!((need, have), (6, 5)),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn arb_series() -> impl Strategy<Value = RmmSeries> {
        let rec = prop_oneof![
            1 => Just(None),
            6 => (-4.0f64..4.0, -4.0f64..4.0).prop_map(Some),
        ];
        proptest::collection::vec(rec, 1..60).prop_map(|v| {
            let start = ymd(1990, 2, 27);
            let recs = v
                .into_iter()
                .enumerate()
                .map(|(i, r)| {
                    let d = start + Duration::days(i as i64);
                    match r {
                        Some((a, b)) => RmmRecord::from_components(d, a, b),
                        None => RmmRecord::missing(d),
                    }
                })
                .collect();
            RmmSeries::from_records(recs).unwrap()
        })
    }

    proptest! {
        #[test]
        fn feed_text_round_trips(s in arb_series()) {
            let back = parse_rmm_text(&s.to_feed_text()).unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn windows_satisfy_shift_property(lag in 1usize..6, n in 1usize..12, seed in 0u64..1000) {
            let pairs: Vec<[f64; 2]> = (0..lag + n)
                .map(|i| {
                    let v = ((i as u64 * 2654435761 + seed) % 1000) as f64 / 100.0;
                    [v, -v * 0.5]
                })
                .collect();
            let s = RmmSeries::from_pairs(ymd(2001, 3, 1), &pairs);
            let tm = rolling_windows(&s, lag, n).unwrap();
            for comp in 0..2 {
                for l in 0..lag - 1 {
                    for i in 0..n - 1 {
                        prop_assert_eq!(tm.x[(comp * lag + l + 1, i)], tm.x[(comp * lag + l, i + 1)]);
                    }
                }
            }
        }
    }
}
