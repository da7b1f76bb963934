//! `reproduce`: runs the evaluation behind one table or figure and writes its CSVs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use lcmicp::evaluation::report::{
    write_curve_csv, write_metrics_csv, write_n_csv, write_ou_csv, write_summary_json,
};
use lcmicp::evaluation::{run_experiment, ExperimentReport, Grouped};
use lcmicp::features::{build_feature_dataset, parse_recordings};
use lcmicp::io::load_dataset;
use lcmicp::{AggregationKind, Dataset, RngSeed};

use crate::commands::{load_schema, resolve_config};
use crate::config::RunConfig;
use crate::failure::Failure;
use crate::manifest::OutputDir;
use crate::{Artifact, Command, ReproduceArgs};

impl Artifact {
    fn default_imbalance(self) -> u32 {
        match self {
            Artifact::Table3 | Artifact::Table5 | Artifact::Table7 => 10,
            _ => 25,
        }
    }

    fn is_figure(self) -> bool {
        matches!(self, Artifact::Fig1 | Artifact::Fig2)
    }

    fn needs_baseline(self) -> bool {
        matches!(self, Artifact::Table2 | Artifact::Table3 | Artifact::Fig2)
    }
}

enum Source {
    Synthetic(Dataset),
    Directory(std::path::PathBuf),
    Recordings(
        Vec<lcmicp::features::AppRecording<f64>>,
        lcmicp::FeatureSchema,
    ),
}

impl Source {
    fn dataset(&self, kind: Option<AggregationKind>) -> Result<Dataset, Failure> {
        match (self, kind) {
            (Source::Synthetic(d), _) => Ok(d.clone()),
            (Source::Directory(dir), Some(kind)) => {
                let path = dir.join(format!("{}.csv", kind.file_stem()));
                load_dataset(&path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
            }
            (Source::Recordings(recs, schema), Some(kind)) => {
                Ok(build_feature_dataset(recs, kind, schema)?)
            }
            (_, None) => Err(Failure::invariant("real data requires a feature set")),
        }
    }
}

fn open_source(args: &ReproduceArgs, cfg: &RunConfig) -> Result<Source, Failure> {
    if args.synthetic {
        return Ok(Source::Synthetic(
            cfg.synthetic().generate(RngSeed(cfg.seed))?,
        ));
    }
    let path = args
        .data
        .as_deref()
        .ok_or_else(|| Failure::usage("either --data or --synthetic is required"))?;
    if path.is_dir() {
        Ok(Source::Directory(path.to_path_buf()))
    } else {
        let schema = load_schema(args.schema.as_deref())?;
        let (recs, report) = parse_recordings::<f64>(path, &schema)?
            .strict()
            .map_err(|r| Failure::data(format!("rejected rows in {}: {r}", path.display())))?;
        log::info!("ingested {report}");
        Ok(Source::Recordings(recs, schema))
    }
}

fn check_report(r: &ExperimentReport) -> Result<(), Failure> {
    let unit = |v: Option<f64>| v.is_none_or(|x| (0.0..=1.0).contains(&x));
    let groups = |g: &Grouped, hi: f64| {
        [g.all, g.malicious, g.benign]
            .iter()
            .all(|v| v.is_none_or(|x| (0.0..=hi).contains(&x)))
    };
    let mut methods = vec![&r.lcmicp];
    methods.extend(r.rf.as_ref());
    for m in methods {
        let metrics = [
            m.metrics.accuracy,
            m.metrics.sensitivity,
            m.metrics.specificity,
            m.metrics.f1,
        ];
        let curve_ok = m
            .curve
            .errors
            .iter()
            .all(|(_, e)| e.iter().all(|&v| unit(v)));
        let n_ok = m.n.iter().all(|g| groups(g, 2.0))
            && m.n
                .windows(2)
                .zip(r.config.table_deltas.windows(2))
                .all(|(n, d)| {
                    d[0] > d[1] || n[1].all.zip(n[0].all).is_none_or(|(b, a)| b <= a + 1e-12)
                });
        if !metrics.iter().all(|&v| unit(v)) || !curve_ok || !n_ok {
            return Err(Failure::invariant(format!(
                "{} report out of range",
                r.feature_set
            )));
        }
    }
    if !groups(&r.ou, 1.0) {
        return Err(Failure::invariant(format!(
            "{} OU out of range",
            r.feature_set
        )));
    }
    Ok(())
}

pub fn reproduce(
    args: &ReproduceArgs,
    replayed: Option<RunConfig>,
    command: &Command,
) -> Result<(), Failure> {
    let mut cfg = resolve_config(args.config.as_deref(), replayed, args.seed)?;
    if let Some(r) = args.repetitions {
        cfg.repetitions = r;
    }
    if let Some(i) = &args.imbalance {
        cfg.imbalance = Some(
            i.parse()
                .map_err(|_| Failure::usage(format!("invalid --imbalance {i}")))?,
        );
    }
    cfg.imbalance = Some(cfg.imbalance.unwrap_or(args.artifact.default_imbalance()));
    cfg.validate()?;

    let kinds: Vec<Option<AggregationKind>> = if args.synthetic {
        vec![None]
    } else if let Some(name) = &args.feature_set {
        vec![Some(name.parse().map_err(Failure::usage)?)]
    } else if args.artifact.is_figure() {
        vec![Some(AggregationKind::MeanDiff)]
    } else {
        AggregationKind::ALL.iter().copied().map(Some).collect()
    };

    let source = open_source(args, &cfg)?;
    let mut reports = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let data = source.dataset(kind)?;
        let mut exp = cfg.experiment(kind)?;
        exp.baseline = args.artifact.needs_baseline();
        log::info!(
            "{}: {} repetitions",
            exp.feature_set_name(),
            exp.repetitions
        );
        let report = run_experiment(&exp, &data)?;
        check_report(&report)?;
        reports.push(report);
    }

    let mut out = OutputDir::create(&args.out)?;
    write_artifact(args.artifact, &reports, &cfg, &mut out)?;
    let mut w = BufWriter::new(File::create(out.artifact("summary.json"))?);
    for r in &reports {
        write_summary_json(&mut w, r)?;
        writeln!(w)?;
    }
    w.flush()?;
    drop(w);
    let synthetic = args.synthetic.then(|| cfg.synthetic());
    out.finish(command, Some(&cfg), synthetic)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_artifact(
    artifact: Artifact,
    reports: &[ExperimentReport],
    cfg: &RunConfig,
    out: &mut OutputDir,
) -> Result<(), Failure> {
    match artifact {
        Artifact::Table2 | Artifact::Table3 => {
            let mut rows = Vec::new();
            for r in reports {
                rows.push(("RF-LCMICP", r.feature_set.as_str(), r.lcmicp.metrics));
            }
            for r in reports {
                if let Some(rf) = &r.rf {
                    rows.push(("Conventional RF", r.feature_set.as_str(), rf.metrics));
                }
            }
            let mut w = create(&out.artifact("metrics.csv"))?;
            write_metrics_csv(&mut w, &rows)?;
            w.flush()?;
        }
        Artifact::Table4 | Artifact::Table5 => {
            let rows: Vec<_> = reports
                .iter()
                .map(|r| (r.feature_set.as_str(), r.ou))
                .collect();
            let mut w = create(&out.artifact("ou.csv"))?;
            write_ou_csv(&mut w, &rows)?;
            w.flush()?;
        }
        Artifact::Table6 | Artifact::Table7 => {
            let rows: Vec<_> = reports
                .iter()
                .map(|r| (r.feature_set.as_str(), r.lcmicp.n.as_slice()))
                .collect();
            let mut w = create(&out.artifact("n.csv"))?;
            write_n_csv(&mut w, &cfg.table_deltas, &rows)?;
            w.flush()?;
        }
        Artifact::Fig1 | Artifact::Fig2 => {
            for r in reports {
                let (method, curve) = if artifact == Artifact::Fig1 {
                    ("rf-lcmicp", &r.lcmicp.curve)
                } else {
                    let rf =
                        r.rf.as_ref()
                            .ok_or_else(|| Failure::invariant("baseline missing"))?;
                    ("rf", &rf.curve)
                };
                let mut w =
                    create(&out.artifact(&format!("curves_{}.csv", r.feature_set.to_lowercase())))?;
                write_curve_csv(&mut w, &[(method, curve)])?;
                w.flush()?;
            }
        }
    }
    Ok(())
}
