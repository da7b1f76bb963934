//! CSV and JSON writers for experiment reports. Values use fixed precision so
//! reruns with the same seed are byte-identical; undefined cells print `NA`.

use std::io::Write;

use crate::data::BinaryLabel;
use crate::error::Result;

use super::{ExperimentReport, Grouped, MetricsReport, ValidityCurve};

fn fixed(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.decimals$}"))
}

fn percent(v: Option<f64>) -> String {
    fixed(v.map(|x| 100.0 * x), 2)
}

/// Column label of a table delta, e.g. `conf_95` for 0.05.
pub fn confidence_column(delta: f64) -> String {
    format!("conf_{}", ((1.0 - delta) * 100.0).round() as i64)
}

/// `technique,feature_set,accuracy,sensitivity,specificity,f1` with percentages.
pub fn write_metrics_csv<W: Write>(mut w: W, rows: &[(&str, &str, MetricsReport)]) -> Result<()> {
    writeln!(
        w,
        "technique,feature_set,accuracy,sensitivity,specificity,f1"
    )?;
    for (technique, feature_set, m) in rows {
        writeln!(
            w,
            "{technique},{feature_set},{},{},{},{}",
            percent(m.accuracy),
            percent(m.sensitivity),
            percent(m.specificity),
            fixed(m.f1, 4)
        )?;
    }
    Ok(())
}

/// `feature_set,all,malicious,benign`.
pub fn write_ou_csv<W: Write>(mut w: W, rows: &[(&str, Grouped)]) -> Result<()> {
    writeln!(w, "feature_set,all,malicious,benign")?;
    for (feature_set, g) in rows {
        writeln!(
            w,
            "{feature_set},{},{},{}",
            fixed(g.all, 4),
            fixed(g.malicious, 4),
            fixed(g.benign, 4)
        )?;
    }
    Ok(())
}

/// `group,feature_set,conf_95,…`: one block of rows per group (all, malicious, benign).
pub fn write_n_csv<W: Write>(mut w: W, deltas: &[f64], rows: &[(&str, &[Grouped])]) -> Result<()> {
    let header: Vec<String> = deltas.iter().map(|&d| confidence_column(d)).collect();
    writeln!(w, "group,feature_set,{}", header.join(","))?;
    type Field = fn(&Grouped) -> Option<f64>;
    let groups: [(&str, Field); 3] = [
        ("all", |g| g.all),
        ("malicious", |g| g.malicious),
        ("benign", |g| g.benign),
    ];
    for (group, get) in groups {
        for (feature_set, n) in rows {
            let cells: Vec<String> = n.iter().map(|g| fixed(get(g), 4)).collect();
            writeln!(w, "{group},{feature_set},{}", cells.join(","))?;
        }
    }
    Ok(())
}

/// Long format `method,class,delta,error_rate`.
pub fn write_curve_csv<W: Write>(mut w: W, curves: &[(&str, &ValidityCurve)]) -> Result<()> {
    writeln!(w, "method,class,delta,error_rate")?;
    for (method, curve) in curves {
        for label in [BinaryLabel::Malicious, BinaryLabel::Benign] {
            for (d, e) in curve.deltas.iter().zip(&curve.errors[label]) {
                writeln!(w, "{method},{label},{d:.4},{}", fixed(*e, 6))?;
            }
        }
    }
    Ok(())
}

/// Full report, including per-repetition results, as pretty JSON.
pub fn write_summary_json<W: Write>(w: W, report: &ExperimentReport) -> Result<()> {
    serde_json::to_writer_pretty(w, report)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PerClass;

    #[test]
    fn metrics_rows_and_na() {
        let mut out = Vec::new();
        let m = MetricsReport {
            accuracy: Some(0.7679),
            sensitivity: None,
            specificity: Some(1.0),
            f1: Some(0.76811),
        };
        write_metrics_csv(&mut out, &[("RF-LCMICP", "MeanDiff", m)]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "technique,feature_set,accuracy,sensitivity,specificity,f1\nRF-LCMICP,MeanDiff,76.79,NA,100.00,0.7681\n"
        );
    }

    #[test]
    fn confidence_columns() {
        let cols: Vec<_> = [0.05, 0.1, 0.15, 0.2]
            .iter()
            .map(|&d| confidence_column(d))
            .collect();
        assert_eq!(cols, ["conf_95", "conf_90", "conf_85", "conf_80"]);
    }

    #[test]
    fn curve_long_format() {
        let curve = ValidityCurve {
            deltas: vec![0.05],
            errors: PerClass::new(vec![Some(0.04)], vec![None]),
        };
        let mut out = Vec::new();
        write_curve_csv(&mut out, &[("lcmicp", &curve)]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "method,class,delta,error_rate\nlcmicp,malicious,0.0500,NA\nlcmicp,benign,0.0500,0.040000\n"
        );
    }
}
