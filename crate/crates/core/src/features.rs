//! Ingestion of per-application device-state recordings and their aggregation
//! into one feature vector per application.
//!
//! Input layout (UTF-8 CSV, comma separated, `.` decimal point):
//!
//! ```text
//! app_id,label,phase,tick,<feature columns...>
//! com.example,1,pre,0,...
//! com.example,1,run,1,...
//! ```
//!
//! `label` is `0` (benign) or `1` (malicious), `phase` is `pre` for the snapshot
//! taken before launch (tick 0) and `run` for the snapshots taken every five
//! seconds while the application is exercised. Battery readings and the derived
//! `*Diff` counters are dropped while reading the header.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{BinaryLabel, Dataset, Instance};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Recorded features used for learning: Binder, CPU, Memory, Network and Permissions.
pub const DEFAULT_FEATURES: [&str; 31] = [
    // Binder
    "Transaction",
    "Reply",
    "Acquire",
    "Release",
    "ActiveNodes",
    "TotalNodes",
    "ActiveRef",
    "TotalRef",
    "ActiveDeath",
    "TotalDeath",
    "ActiveTransaction",
    "TotalTransaction",
    "ActiveTransactionComplete",
    "TotalTransactionComplete",
    // CPU
    "User",
    "System",
    "Idle",
    "Other",
    // Memory
    "Active",
    "Inactive",
    "Mapped",
    "FreePages",
    "AnonPages",
    "FilePages",
    "DirtyPages",
    "WritebackPages",
    // Network
    "TotalTXPackets",
    "TotalTXBytes",
    "TotalRXPackets",
    "TotalRXBytes",
    // Permissions
    "TotalPermissions",
];

/// Recorded but never used: battery state (the device was always charging) and
/// counters derivable from other features.
pub const EXCLUDED_FEATURES: [&str; 14] = [
    "IsCharging",
    "Voltage",
    "Temp",
    "Level",
    "LevelDiff",
    "TotalNodesDiff",
    "TotalRefDiff",
    "TotalDeathDiff",
    "TotalTransactionDiff",
    "TotalTransactionCompleteDiff",
    "TotalTXPacketsDiff",
    "TotalTXBytesDiff",
    "TotalRXPacketsDiff",
    "TotalRXBytesDiff",
];

const FIXED_COLUMNS: [&str; 4] = ["app_id", "label", "phase", "tick"];

/// Ordered list of feature names every snapshot must provide.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    names: Vec<String>,
}

impl Default for FeatureSchema {
    fn default() -> Self {
        FeatureSchema {
            names: DEFAULT_FEATURES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl FeatureSchema {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Schema("schema lists no features".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if EXCLUDED_FEATURES.contains(&n.as_str()) {
                return Err(Error::Schema(format!("{n} is an excluded feature")));
            }
            if FIXED_COLUMNS.contains(&n.as_str()) {
                return Err(Error::Schema(format!("{n} is a reserved column name")));
            }
            if !seen.insert(n.as_str()) {
                return Err(Error::Schema(format!("{n} listed twice")));
            }
        }
        Ok(FeatureSchema { names })
    }

    /// One name per non-empty line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        Self::new(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect(),
        )
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Feature values of one device snapshot, aligned with a [`FeatureSchema`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot<T> {
    pub values: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppRecording<T> {
    pub app_id: String,
    pub label: BinaryLabel,
    pub pre_state: StateSnapshot<T>,
    /// Snapshots taken while the application ran, ordered by tick.
    pub series: Vec<StateSnapshot<T>>,
}

/// The six ways of turning a recording into one value per feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AggregationKind {
    Mean,
    MeanDiff,
    MedianDiff,
    MinDiff,
    MaxDiff,
    Std,
}

impl AggregationKind {
    pub const ALL: [AggregationKind; 6] = [
        AggregationKind::Mean,
        AggregationKind::MeanDiff,
        AggregationKind::MedianDiff,
        AggregationKind::MinDiff,
        AggregationKind::MaxDiff,
        AggregationKind::Std,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AggregationKind::Mean => "Mean",
            AggregationKind::MeanDiff => "MeanDiff",
            AggregationKind::MedianDiff => "MedianDiff",
            AggregationKind::MinDiff => "MinDiff",
            AggregationKind::MaxDiff => "MaxDiff",
            AggregationKind::Std => "Std",
        }
    }

    /// File stem used for per-kind dataset files, e.g. `mean_diff`.
    pub fn file_stem(self) -> &'static str {
        match self {
            AggregationKind::Mean => "mean",
            AggregationKind::MeanDiff => "mean_diff",
            AggregationKind::MedianDiff => "median_diff",
            AggregationKind::MinDiff => "min_diff",
            AggregationKind::MaxDiff => "max_diff",
            AggregationKind::Std => "std",
        }
    }
}

impl fmt::Display for AggregationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AggregationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .flat_map(char::to_lowercase)
            .collect();
        AggregationKind::ALL
            .into_iter()
            .find(|k| k.name().to_lowercase() == key)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown feature set {s:?}")))
    }
}

/// A rejected input row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowRejection {
    pub line: u64,
    pub message: String,
}

/// Summary of one ingestion run.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParseReport {
    pub apps_total: usize,
    pub apps_skipped: usize,
    pub rows_rejected: usize,
    pub rejections: Vec<RowRejection>,
    pub skipped_apps: Vec<String>,
}

impl fmt::Display for ParseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} apps, {} skipped, {} rows rejected",
            self.apps_total, self.apps_skipped, self.rows_rejected
        )?;
        if let Some(first) = self.rejections.first() {
            write!(f, " (first at line {}: {})", first.line, first.message)?;
        }
        Ok(())
    }
}

/// Result of reading a recordings file.
#[derive(Debug, Clone)]
pub struct ParsedRecordings<T> {
    pub recordings: Vec<AppRecording<T>>,
    pub report: ParseReport,
}

impl<T> ParsedRecordings<T> {
    /// Fails when any row was rejected; the report is kept inside the error.
    pub fn strict(self) -> std::result::Result<(Vec<AppRecording<T>>, ParseReport), ParseReport> {
        if self.report.rows_rejected > 0 {
            Err(self.report)
        } else {
            Ok((self.recordings, self.report))
        }
    }
}

struct PartialApp<T> {
    label: BinaryLabel,
    first_line: u64,
    pre: Option<StateSnapshot<T>>,
    run: Vec<(u64, StateSnapshot<T>)>,
}

/// Reads recordings from a CSV file. See the module docs for the layout.
pub fn parse_recordings<T: Scalar>(
    path: &Path,
    schema: &FeatureSchema,
) -> Result<ParsedRecordings<T>> {
    let file = std::fs::File::open(path)?;
    parse_recordings_from_reader(file, schema)
}

/// Header errors fail immediately; row errors are collected in the report.
pub fn parse_recordings_from_reader<T: Scalar, R: Read>(
    reader: R,
    schema: &FeatureSchema,
) -> Result<ParsedRecordings<T>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = csv.headers()?.clone();
    for (i, fixed) in FIXED_COLUMNS.iter().enumerate() {
        if header.get(i) != Some(*fixed) {
            return Err(Error::Schema(format!(
                "column {} must be {fixed:?}, found {:?}",
                i + 1,
                header.get(i).unwrap_or("")
            )));
        }
    }
    // header position -> schema slot, None for excluded columns
    let mut slots = Vec::new();
    let mut found = vec![false; schema.len()];
    for name in header.iter().skip(FIXED_COLUMNS.len()) {
        if EXCLUDED_FEATURES.contains(&name) {
            slots.push(None);
            continue;
        }
        match schema.names().iter().position(|n| n == name) {
            Some(k) if !found[k] => {
                found[k] = true;
                slots.push(Some(k));
            }
            Some(_) => return Err(Error::Schema(format!("duplicate column {name:?}"))),
            None => return Err(Error::Schema(format!("unknown feature column {name:?}"))),
        }
    }
    if let Some(k) = found.iter().position(|f| !f) {
        return Err(Error::Schema(format!(
            "missing feature column {:?}",
            schema.names()[k]
        )));
    }

    let mut report = ParseReport::default();
    let mut order: Vec<String> = Vec::new();
    let mut apps: HashMap<String, PartialApp<T>> = HashMap::new();
    let width = header.len();

    for record in csv.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                reject(&mut report, line, e.to_string());
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            reject(
                &mut report,
                line,
                format!("expected {width} fields, found {}", record.len()),
            );
            continue;
        }
        let row = match parse_row::<T>(&record, &slots, schema.len()) {
            Ok(row) => row,
            Err(message) => {
                reject(&mut report, line, message);
                continue;
            }
        };
        let app = apps.entry(row.app_id.clone()).or_insert_with(|| {
            order.push(row.app_id.clone());
            PartialApp {
                label: row.label,
                first_line: line,
                pre: None,
                run: Vec::new(),
            }
        });
        if app.label != row.label {
            reject(
                &mut report,
                line,
                format!(
                    "label {} contradicts line {}",
                    row.label.code(),
                    app.first_line
                ),
            );
            continue;
        }
        match row.phase {
            Phase::Pre => {
                if app.pre.is_some() {
                    reject(
                        &mut report,
                        line,
                        format!("second pre-state row for {}", row.app_id),
                    );
                    continue;
                }
                app.pre = Some(row.snapshot);
            }
            Phase::Run => {
                if app.run.iter().any(|(t, _)| *t == row.tick) {
                    reject(
                        &mut report,
                        line,
                        format!("duplicate tick {} for {}", row.tick, row.app_id),
                    );
                    continue;
                }
                app.run.push((row.tick, row.snapshot));
            }
        }
    }

    report.apps_total = order.len();
    let mut recordings = Vec::with_capacity(order.len());
    for id in order {
        let mut app = apps.remove(&id).expect("recorded app");
        let Some(pre_state) = app.pre.take() else {
            log::warn!("skipping {id}: no pre-state snapshot");
            report.apps_skipped += 1;
            report.skipped_apps.push(id);
            continue;
        };
        if app.run.is_empty() {
            log::warn!("skipping {id}: no interaction snapshots");
            report.apps_skipped += 1;
            report.skipped_apps.push(id);
            continue;
        }
        app.run.sort_by_key(|(t, _)| *t);
        recordings.push(AppRecording {
            app_id: id,
            label: app.label,
            pre_state,
            series: app.run.into_iter().map(|(_, s)| s).collect(),
        });
    }
    Ok(ParsedRecordings { recordings, report })
}

fn reject(report: &mut ParseReport, line: u64, message: String) {
    report.rows_rejected += 1;
    report.rejections.push(RowRejection { line, message });
}

enum Phase {
    Pre,
    Run,
}

struct Row<T> {
    app_id: String,
    label: BinaryLabel,
    phase: Phase,
    tick: u64,
    snapshot: StateSnapshot<T>,
}

fn parse_row<T: Scalar>(
    record: &csv::StringRecord,
    slots: &[Option<usize>],
    dim: usize,
) -> std::result::Result<Row<T>, String> {
    let app_id = record[0].to_string();
    if app_id.is_empty() {
        return Err("empty app_id".into());
    }
    let label = match &record[1] {
        "0" => BinaryLabel::Benign,
        "1" => BinaryLabel::Malicious,
        other => return Err(format!("label must be 0 or 1, found {other:?}")),
    };
    let phase = match &record[2] {
        "pre" => Phase::Pre,
        "run" => Phase::Run,
        other => return Err(format!("phase must be pre or run, found {other:?}")),
    };
    let tick: u64 = record[3].parse().map_err(|_| {
        format!(
            "tick must be a non-negative integer, found {:?}",
            &record[3]
        )
    })?;
    if matches!(phase, Phase::Pre) && tick != 0 {
        return Err(format!("pre-state row must have tick 0, found {tick}"));
    }
    let mut values = vec![T::zero(); dim];
    for (field, slot) in record.iter().skip(FIXED_COLUMNS.len()).zip(slots) {
        let Some(k) = slot else { continue };
        let v: T = field
            .parse()
            .map_err(|_| format!("invalid number {field:?}"))?;
        if !v.is_finite() {
            return Err(format!("non-finite value {field:?}"));
        }
        values[*k] = v;
    }
    Ok(Row {
        app_id,
        label,
        phase,
        tick,
        snapshot: StateSnapshot { values },
    })
}

fn median<T: Scalar>(values: &mut [T]) -> T {
    values.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / T::lit(2.0)
    }
}

fn mean<T: Scalar>(values: &[T]) -> T {
    values.iter().copied().sum::<T>() / T::from_count(values.len())
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
fn sample_std<T: Scalar>(values: &[T]) -> T {
    let n = values.len();
    if n < 2 {
        return T::zero();
    }
    let m = mean(values);
    let ss: T = values.iter().map(|&v| (v - m) * (v - m)).sum();
    (ss / T::from_count(n - 1)).sqrt()
}

/// Aggregates one recording into an instance with the recording's label.
pub fn aggregate<T: Scalar>(rec: &AppRecording<T>, kind: AggregationKind) -> Result<Instance<T>> {
    if rec.series.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "{} has an empty series",
            rec.app_id
        )));
    }
    let dim = rec.pre_state.values.len();
    if let Some(bad) = rec.series.iter().find(|s| s.values.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.values.len(),
        });
    }
    let mut column = Vec::with_capacity(rec.series.len());
    let features = (0..dim)
        .map(|f| {
            column.clear();
            column.extend(rec.series.iter().map(|s| s.values[f]));
            let pre = rec.pre_state.values[f];
            match kind {
                AggregationKind::Mean => mean(&column),
                AggregationKind::MeanDiff => mean(&column) - pre,
                AggregationKind::MedianDiff => median(&mut column) - pre,
                AggregationKind::MinDiff => {
                    column.iter().copied().fold(T::infinity(), T::min) - pre
                }
                AggregationKind::MaxDiff => {
                    column.iter().copied().fold(T::neg_infinity(), T::max) - pre
                }
                AggregationKind::Std => sample_std(&column),
            }
        })
        .collect();
    Ok(Instance::new(rec.app_id.clone(), features, Some(rec.label)))
}

/// One instance per recording, aggregated with `kind`.
pub fn build_feature_dataset<T: Scalar>(
    recs: &[AppRecording<T>],
    kind: AggregationKind,
    schema: &FeatureSchema,
) -> Result<Dataset<T>> {
    if recs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for rec in recs {
        if rec.pre_state.values.len() != schema.len() {
            return Err(Error::Schema(format!(
                "{} has {} features, schema has {}",
                rec.app_id,
                rec.pre_state.values.len(),
                schema.len()
            )));
        }
    }
    let instances = recs
        .iter()
        .map(|r| aggregate(r, kind))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(schema.names().to_vec(), instances)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(series: &[f64], pre: f64) -> AppRecording<f64> {
        AppRecording {
            app_id: "a".into(),
            label: BinaryLabel::Malicious,
            pre_state: StateSnapshot { values: vec![pre] },
            series: series
                .iter()
                .map(|&v| StateSnapshot { values: vec![v] })
                .collect(),
        }
    }

    fn agg(series: &[f64], pre: f64, kind: AggregationKind) -> f64 {
        aggregate(&rec(series, pre), kind).unwrap().features[0]
    }

    #[test]
    fn aggregation_values() {
        use AggregationKind::*;
        assert_eq!(agg(&[3.0, 5.0, 7.0], 2.0, Mean), 5.0);
        assert_eq!(agg(&[3.0, 5.0, 7.0], 2.0, MeanDiff), 3.0);
        assert_eq!(agg(&[3.0, 5.0, 7.0], 2.0, MedianDiff), 3.0);
        assert_eq!(agg(&[7.0, 3.0, 5.0], 2.0, MinDiff), 1.0);
        assert_eq!(agg(&[7.0, 3.0, 5.0], 2.0, MaxDiff), 5.0);
        assert_eq!(agg(&[3.0, 5.0, 7.0], 2.0, Std), 2.0);
        assert_eq!(agg(&[4.0, 1.0, 3.0, 2.0], 0.0, MedianDiff), 2.5);
        assert_eq!(agg(&[4.0], 0.0, Std), 0.0);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in AggregationKind::ALL {
            assert_eq!(k.name().parse::<AggregationKind>().unwrap(), k);
            assert_eq!(k.file_stem().parse::<AggregationKind>().unwrap(), k);
        }
        assert!("median".parse::<AggregationKind>().is_err());
    }

    #[test]
    fn default_schema_drops_battery_and_diff() {
        let schema = FeatureSchema::default();
        assert_eq!(schema.len(), 31);
        for name in schema.names() {
            assert!(!name.ends_with("Diff"));
            assert!(!EXCLUDED_FEATURES.contains(&name.as_str()));
        }
        assert!(FeatureSchema::parse("Voltage\n").is_err());
        assert!(FeatureSchema::parse("User\nUser\n").is_err());
        assert_eq!(
            FeatureSchema::parse("# cpu\nUser\n\nIdle # idle\n")
                .unwrap()
                .len(),
            2
        );
    }

    fn small_schema() -> FeatureSchema {
        FeatureSchema::parse("User\nIdle").unwrap()
    }

    #[test]
    fn parses_two_apps() {
        let text = "app_id,label,phase,tick,User,Voltage,Idle\n\
                    a,1,pre,0,1,9,10\n\
                    a,1,run,2,3,9,20\n\
                    a,1,run,1,2,9,30\n\
                    a,1,run,3,4,9,40\n\
                    b,0,pre,0,0,9,0\n\
                    b,0,run,1,1,9,1\n\
                    b,0,run,2,1,9,1\n\
                    b,0,run,3,1,9,1\n";
        let parsed =
            parse_recordings_from_reader::<f64, _>(text.as_bytes(), &small_schema()).unwrap();
        let (recs, report) = parsed.strict().unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(report.apps_total, 2);
        assert_eq!(recs[0].series.len(), 3);
        // sorted by tick
        assert_eq!(recs[0].series[0].values, vec![2.0, 30.0]);
        assert_eq!(recs[1].label, BinaryLabel::Benign);

        let ds = build_feature_dataset(&recs, AggregationKind::MeanDiff, &small_schema()).unwrap();
        assert_eq!(ds.dimension(), 2);
        assert_eq!(ds.get(0).features, vec![2.0, 20.0]);
        let other = build_feature_dataset(&recs, AggregationKind::Std, &small_schema()).unwrap();
        assert_eq!(
            ds.instances()
                .iter()
                .map(|i| (&i.id, i.label))
                .collect::<Vec<_>>(),
            other
                .instances()
                .iter()
                .map(|i| (&i.id, i.label))
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn app_without_interaction_is_skipped() {
        let text = "app_id,label,phase,tick,User,Idle\n\
                    a,1,pre,0,1,10\n\
                    b,0,pre,0,0,0\n\
                    b,0,run,1,1,1\n";
        let (recs, report) =
            parse_recordings_from_reader::<f64, _>(text.as_bytes(), &small_schema())
                .unwrap()
                .strict()
                .unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(report.apps_skipped, 1);
        assert_eq!(report.skipped_apps, vec!["a".to_string()]);
    }

    #[test]
    fn malformed_rows_carry_line_numbers() {
        let text = "app_id,label,phase,tick,User,Idle\n\
                    a,1,pre,0,1,10\n\
                    a,1,run,1,oops,10\n\
                    a,2,run,2,1,10\n\
                    a,1,run,3,1\n\
                    a,1,run,4,1,1\n";
        let report = parse_recordings_from_reader::<f64, _>(text.as_bytes(), &small_schema())
            .unwrap()
            .strict()
            .unwrap_err();
        assert_eq!(report.rows_rejected, 3);
        let lines: Vec<u64> = report.rejections.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![3, 4, 5]);
        assert!(report.to_string().contains("line 3"));
    }

    #[test]
    fn header_problems_fail_fast() {
        let unknown = "app_id,label,phase,tick,User,Idle,Mystery\n";
        assert!(matches!(
            parse_recordings_from_reader::<f64, _>(unknown.as_bytes(), &small_schema()),
            Err(Error::Schema(m)) if m.contains("Mystery")
        ));
        let missing = "app_id,label,phase,tick,User\n";
        assert!(
            parse_recordings_from_reader::<f64, _>(missing.as_bytes(), &small_schema()).is_err()
        );
        let order = "label,app_id,phase,tick,User,Idle\n";
        assert!(parse_recordings_from_reader::<f64, _>(order.as_bytes(), &small_schema()).is_err());
    }

    #[test]
    fn empty_recording_list_is_an_error() {
        assert!(matches!(
            build_feature_dataset::<f64>(&[], AggregationKind::Mean, &small_schema()),
            Err(Error::EmptyDataset)
        ));
    }
}
