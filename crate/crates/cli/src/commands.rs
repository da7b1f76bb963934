use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use lcmicp::conformal::{prediction_set, uniform, RfLcmicp};
use lcmicp::data::{calibration_split, NormalizationParams};
use lcmicp::features::{build_feature_dataset, parse_recordings};
use lcmicp::io::{load_dataset, load_model, save_dataset, save_model, ModelFile};
use lcmicp::{AggregationKind, BinaryLabel, Dataset, FeatureSchema, RngSeed, Stream};

use crate::config::RunConfig;
use crate::failure::Failure;
use crate::manifest::{self, OutputDir};
use crate::{reproduce, Command, IngestArgs, PredictArgs, TrainArgs};

pub fn dispatch(command: Command) -> Result<(), Failure> {
    dispatch_with(command, None)
}

/// Runs `command`; `config` replaces any config file it names (used by replay).
fn dispatch_with(command: Command, config: Option<RunConfig>) -> Result<(), Failure> {
    match &command {
        Command::Ingest(args) => ingest(args, &command),
        Command::Train(args) => train(args, config, &command),
        Command::Predict(args) => predict(args, &command),
        Command::Reproduce(args) => reproduce::reproduce(args, config, &command),
        Command::Replay(args) => {
            let m = manifest::load(&args.manifest)?;
            let mut recorded = m.command;
            if matches!(recorded, Command::Replay(_)) {
                return Err(Failure::usage("manifest records a replay"));
            }
            if let Some(out) = &args.out {
                recorded.set_out_dir(out.clone());
            }
            dispatch_with(recorded, m.config)
        }
    }
}

/// The file config (or defaults) with the seed flag applied, validated.
pub fn resolve_config(
    file: Option<&Path>,
    replayed: Option<RunConfig>,
    seed: Option<u64>,
) -> Result<RunConfig, Failure> {
    let mut cfg = match (replayed, file) {
        (Some(cfg), _) => cfg,
        (None, Some(path)) => RunConfig::load(path)?,
        (None, None) => RunConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_schema(path: Option<&Path>) -> Result<FeatureSchema, Failure> {
    match path {
        None => Ok(FeatureSchema::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::usage(format!("cannot read schema {}: {e}", p.display())))?;
            FeatureSchema::parse(&text).map_err(Failure::usage)
        }
    }
}

fn ingest(args: &IngestArgs, command: &Command) -> Result<(), Failure> {
    let schema = load_schema(args.schema.as_deref())?;
    let parsed = parse_recordings::<f64>(&args.recordings, &schema)?;
    let mut out = OutputDir::create(&args.out)?;
    let report_path = out.artifact("report.json");
    serde_json::to_writer_pretty(File::create(&report_path)?, &parsed.report)?;
    let failure = match parsed.strict() {
        Err(report) => Some(Failure::data(format!(
            "rejected rows in {}: {report}",
            args.recordings.display()
        ))),
        Ok((recordings, report)) => {
            log::info!("ingested {report}");
            if recordings.is_empty() {
                Some(Failure::data("no usable recordings"))
            } else {
                for kind in AggregationKind::ALL {
                    let data = build_feature_dataset(&recordings, kind, &schema)?;
                    save_dataset(&data, &out.artifact(&format!("{}.csv", kind.file_stem())))?;
                }
                None
            }
        }
    };
    out.finish(command, None, None)?;
    failure.map_or(Ok(()), Err)
}

fn train(args: &TrainArgs, replayed: Option<RunConfig>, command: &Command) -> Result<(), Failure> {
    let cfg = resolve_config(args.config.as_deref(), replayed, args.seed)?;
    let raw: Dataset = load_dataset(&args.dataset)?;
    raw.labels()?;
    let (data, normalization) = if cfg.normalize {
        let params = NormalizationParams::fit(&raw)?;
        (params.apply(&raw)?, Some(params))
    } else {
        (raw, None)
    };
    let forest = cfg.forest();
    forest.tree.resolve_mtry(data.dimension())?;
    let seed = RngSeed(cfg.seed);
    let plan = calibration_split(
        &data,
        cfg.calibration_fraction,
        seed.child(Stream::Calibration, 0),
    )?;
    let model = RfLcmicp::fit(
        &data.subset(&plan.proper_training),
        &data.subset(&plan.calibration),
        &forest,
        cfg.conformal(),
        seed.child(Stream::Forest, 0),
    )?;
    let file = ModelFile::new(data.feature_names().to_vec(), normalization, forest, model);
    let mut out = OutputDir::create(&args.out)?;
    save_model(&file, &out.artifact("model.json"))?;
    out.finish(command, Some(&cfg), None)
}

#[derive(Serialize)]
struct PredictionRecord<'a> {
    app_id: &'a str,
    p_benign: f64,
    p_malicious: f64,
    #[serde(flatten)]
    sets: BTreeMap<String, Vec<BinaryLabel>>,
    forced_label: BinaryLabel,
    confidence: f64,
    credibility: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    alert: Option<bool>,
}

pub const DEFAULT_PREDICT_DELTA: f64 = 0.05;

fn predict(args: &PredictArgs, command: &Command) -> Result<(), Failure> {
    let deltas = if args.delta.is_empty() {
        vec![DEFAULT_PREDICT_DELTA]
    } else {
        args.delta.clone()
    };
    if let Some(d) = deltas.iter().find(|d| !(0.0..1.0).contains(*d)) {
        return Err(Failure::usage(format!("--delta {d} outside [0, 1)")));
    }
    if let Some(t) = args.threshold_malicious_p {
        if !(0.0..=1.0).contains(&t) {
            return Err(Failure::usage(format!(
                "--threshold-malicious-p {t} outside [0, 1]"
            )));
        }
    }
    let model: ModelFile<f64> = load_model(&args.model)?;
    let data: Dataset = load_dataset(&args.instances)?;
    if data.dimension() != model.model.dimension() {
        return Err(Failure::data(format!(
            "instances have {} features, model expects {}",
            data.dimension(),
            model.model.dimension()
        )));
    }
    let mut out = OutputDir::create(&args.out)?;
    let mut w = BufWriter::new(File::create(out.artifact("predictions.jsonl"))?);
    for inst in data.instances() {
        let x = model.prepare(&inst.features)?;
        let pred = model.model.predict(&x)?;
        let p = pred.p_values;
        let sets = deltas
            .iter()
            .map(|&d| (format!("set@{d}"), prediction_set(&p, uniform(d)).labels()))
            .collect();
        let record = PredictionRecord {
            app_id: &inst.id,
            p_benign: p.get(BinaryLabel::Benign),
            p_malicious: p.get(BinaryLabel::Malicious),
            sets,
            forced_label: pred.forced.label,
            confidence: pred.forced.confidence,
            credibility: pred.forced.credibility,
            alert: args
                .threshold_malicious_p
                .map(|t| p.get(BinaryLabel::Malicious) > t),
        };
        serde_json::to_writer(&mut w, &record)?;
        writeln!(w)?;
    }
    w.flush()?;
    drop(w);
    out.finish(command, None, None)
}
