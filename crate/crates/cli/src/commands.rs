use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde_json::json;

use skillsight::analysis::{write_report, FixationParams, RoiSpec};
use skillsight::checkpoint::{file_sha256, write_atomic, write_json_atomic};
use skillsight::dataset;
use skillsight::eval::{evaluate, ClipModel};
use skillsight::gaze::{load_dataset, Recording, Split, DEFAULT_CLIPS, FEATURE_WIDTH};
use skillsight::power::profiles::{full_scale_student, timesformer_base};
use skillsight::power::{power_report, Architecture, ModelEntry, PowerConstants, PowerProfile, Sensor};
use skillsight::student::{train_student as fit_student, StudentCheckpoint, TeacherSource};
use skillsight::synth::{generate_dataset, ClassProfile, SynthTaskSpec};
use skillsight::teacher::{train_teacher as fit_teacher, TeacherCheckpoint};

use crate::config::{self, parse_file};
use crate::manifest::{io_failure, MetricsLog, Run};
use crate::{
    AnalyzeArgs, EvalArgs, Failure, GroupBy, PowerArgs, SplitArg, SynthArgs, TrainStudentArgs, TrainTeacherArgs,
};

pub fn synth(a: SynthArgs, argv: &[String]) -> Result<(), Failure> {
    let mut run = Run::start("synth", argv);
    let mut spec = SynthTaskSpec::new(a.task, a.n, a.seed);
    spec.k_classes = a.k;
    spec.n_subtasks = a.subtasks;
    spec.frames = !a.no_frames;
    if let Some(noise) = a.label_noise {
        spec.label_noise = noise;
    }
    spec.validate()?;
    let profiles: Vec<ClassProfile> = match &a.profiles {
        Some(p) => parse_file(p)?,
        None => spec.default_profiles(),
    };
    let recs = generate_dataset(&spec, &profiles, &a.out)?;
    info!("wrote {} recordings to {}", recs.len(), a.out.display());
    run.seed = Some(spec.seed);
    run.config(&json!({ "spec": spec, "profiles": profiles }));
    run.output(&a.out.join("task.json"));
    run.finish(&a.out)
}

pub fn train_teacher(a: TrainTeacherArgs, argv: &[String]) -> Result<(), Failure> {
    let mut run = Run::start("train-teacher", argv);
    let cfg = config::load(a.config.as_deref())?;
    let data = config::data_dir(a.data, &cfg)?;
    let out = config::out_dir(a.out, &cfg, "teacher")?;
    prepare_out(&out, &data)?;
    let recs = load_dataset(&data)?;

    let mut metrics = MetricsLog::create(out.join("metrics.jsonl"))?;
    let outcome = fit_teacher::<f32>(&recs, cfg.teacher.clone(), |m| metrics.append(m))?;
    let ckpt = TeacherCheckpoint::from_model(&outcome.model, outcome.best_epoch);
    let ckpt_path = out.join("teacher.json");
    ckpt.save(&ckpt_path)?;
    write_json_atomic(
        &out.join("summary.json"),
        &json!({
            "best_epoch": outcome.best_epoch,
            "val_accuracy": outcome.epochs[outcome.best_epoch].val_accuracy,
            "lambdas": ckpt.lambdas,
        }),
    )?;
    info!("best epoch {} -> {}", outcome.best_epoch, ckpt_path.display());

    run.seed = Some(cfg.teacher.seed);
    let mut echo = cfg.clone();
    echo.teacher = ckpt.config.clone();
    echo.data = Some(data);
    echo.out = Some(out.clone());
    run.config(&echo);
    run.output(&ckpt_path);
    run.output(&out.join("metrics.jsonl"));
    run.finish(&out)
}

pub fn train_student(a: TrainStudentArgs, argv: &[String]) -> Result<(), Failure> {
    let mut run = Run::start("train-student", argv);
    let mut cfg = config::load(a.config.as_deref())?;
    if a.no_distill {
        cfg.student.distill = false;
    }
    if a.no_action {
        cfg.student.action = false;
    }
    let data = config::data_dir(a.data, &cfg)?;
    let out = config::out_dir(a.out, &cfg, "student")?;
    prepare_out(&out, &data)?;

    let teacher = if cfg.student.dis_weight() > 0.0 {
        let path = a.teacher.as_ref().ok_or_else(|| {
            Failure::Schema("distillation is enabled: pass --teacher <checkpoint> or --no-distill".into())
        })?;
        let hash = file_sha256(path)?;
        run.inputs.insert("teacher".into(), hash.clone());
        let model = TeacherCheckpoint::load(path)?.into_model::<f32>()?;
        Some((model, hash))
    } else {
        None
    };
    let cache_dir = std::env::var_os("SKILLSIGHT_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|| out.join("cache"));
    let source = teacher.as_ref().map(|(model, hash)| TeacherSource {
        model,
        hash: hash.clone(),
        cache_dir: Some(cache_dir.clone()),
    });

    let recs = load_dataset(&data)?;
    let mut metrics = MetricsLog::create(out.join("metrics.jsonl"))?;
    let outcome = fit_student::<f32>(&recs, source.as_ref(), cfg.student.clone(), |m| metrics.append(m))?;
    let ckpt = StudentCheckpoint::from_model(
        &outcome.model,
        teacher.as_ref().map(|t| t.1.clone()),
        outcome.best_epoch,
    );
    let ckpt_path = out.join("student.json");
    ckpt.save(&ckpt_path)?;
    write_json_atomic(
        &out.join("summary.json"),
        &json!({
            "best_epoch": outcome.best_epoch,
            "val_accuracy": outcome.epochs[outcome.best_epoch].val_accuracy,
            "distill": cfg.student.distill,
            "action": cfg.student.action,
        }),
    )?;
    info!("best epoch {} -> {}", outcome.best_epoch, ckpt_path.display());

    run.seed = Some(cfg.student.seed);
    let mut echo = cfg.clone();
    echo.student = ckpt.config.clone();
    echo.data = Some(data);
    echo.out = Some(out.clone());
    run.config(&echo);
    run.output(&ckpt_path);
    run.output(&out.join("metrics.jsonl"));
    run.finish(&out)
}

pub fn eval(a: EvalArgs, argv: &[String]) -> Result<(), Failure> {
    let mut run = Run::start("eval", argv);
    prepare_out(&a.out, &a.data)?;
    let (model, kind) = load_model(&a.model)?;
    run.inputs.insert(kind.into(), file_sha256(&a.model)?);
    let recs = load_dataset(&a.data)?;
    let reference = dataset::labels(&dataset::split(&recs, Split::Train));
    let selected = select(&recs, a.split);
    if selected.is_empty() {
        return Err(Failure::Runtime("no recordings in the requested split".into()));
    }
    let report = evaluate(model.as_ref(), &selected, DEFAULT_CLIPS, &reference)?;
    info!(
        "{kind} accuracy {:.3} (majority vote {:.3}) on {} recordings",
        report.accuracy, report.majority_vote, report.n
    );
    let path = a.out.join("eval.json");
    write_json_atomic(
        &path,
        &json!({ "model": kind, "split": split_name(a.split), "clips": DEFAULT_CLIPS, "report": report }),
    )?;
    run.config(&json!({ "model": a.model, "data": a.data, "split": split_name(a.split) }));
    run.output(&path);
    run.finish(&a.out)
}

pub fn analyze(a: AnalyzeArgs, argv: &[String]) -> Result<(), Failure> {
    let mut run = Run::start("analyze", argv);
    let roi_path = a.roi_spec.clone().unwrap_or_else(|| a.data.join("rois.json"));
    let roi: RoiSpec = parse_file(&roi_path)?;
    roi.validate()?;
    let mut params = FixationParams::default();
    if let Some(d) = a.dispersion_deg {
        params.dispersion_deg = d;
    }
    if let Some(m) = a.min_fixation_s {
        params.min_fixation_s = m;
    }
    if a.group_by == GroupBy::Pred && a.model.is_none() {
        return Err(Failure::Schema("--group-by pred needs --model".into()));
    }
    prepare_out(&a.out, &a.data)?;
    let recs = select(&load_dataset(&a.data)?, a.split);
    if recs.is_empty() {
        return Err(Failure::Runtime("no recordings in the requested split".into()));
    }
    let labels: Vec<usize> = match (&a.group_by, &a.model) {
        (GroupBy::Pred, Some(path)) => {
            let (model, kind) = load_model(path)?;
            run.inputs.insert(kind.into(), file_sha256(path)?);
            let report = evaluate(model.as_ref(), &recs, DEFAULT_CLIPS, &[])?;
            let preds = a.out.join("predictions.json");
            write_json_atomic(&preds, &report.predictions)?;
            run.output(&preds);
            report.predictions.iter().map(|p| p.predicted).collect()
        }
        _ => recs.iter().map(|r| r.meta.skill).collect(),
    };
    let sequences: Vec<_> = recs.iter().map(|r| &r.gaze).collect();
    write_report(&a.out, &sequences, &labels, &roi, &params)?;
    run.config(&json!({
        "data": a.data,
        "roi_spec": roi,
        "group_by": if a.group_by == GroupBy::Gt { "gt" } else { "pred" },
        "split": split_name(a.split),
        "params": params,
    }));
    run.output(&a.out.join("report.json"));
    run.finish(&a.out)
}

pub fn power(a: PowerArgs, argv: &[String]) -> Result<(), Failure> {
    let mut run = Run::start("power", argv);
    let consts = match &a.config {
        Some(p) => config::load(Some(p))?.power.unwrap_or_default(),
        None => PowerConstants::default(),
    };
    consts.validate()?;
    if a.sensors.len() != 1 && a.sensors.len() != a.arch.len() {
        return Err(Failure::Schema(format!(
            "{} --sensors lists for {} architectures; give one or one per --arch",
            a.sensors.len(),
            a.arch.len()
        )));
    }
    let mut entries = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (i, spec) in a.arch.iter().enumerate() {
        let arch = load_arch(spec, a.k)?;
        let sensors = parse_sensors(&a.sensors[if a.sensors.len() == 1 { 0 } else { i }])?;
        let count = seen.entry(arch.name.clone()).or_insert(0);
        *count += 1;
        let name = if *count == 1 {
            arch.name.clone()
        } else {
            format!("{}#{count}", arch.name)
        };
        entries.push(ModelEntry {
            name,
            profile: PowerProfile::from_arch(&arch, a.interval, &sensors),
            accuracy: None,
        });
    }
    let report = power_report(&entries, &consts)?;

    let (dir, json_path) = if a.out.extension().is_some_and(|e| e == "json") {
        let dir = a
            .out
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf();
        (dir, a.out.clone())
    } else {
        (a.out.clone(), a.out.join("report.json"))
    };
    fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
    let csv_path = json_path.with_extension("csv");
    write_json_atomic(&json_path, &json!({ "constants": consts, "report": report }))?;
    write_atomic(&csv_path, report.to_csv().as_bytes())?;
    for row in &report.rows {
        info!("{}: {:.2} mW", row.name, row.power.total_mw);
    }
    run.config(&json!({ "arch": a.arch, "sensors": a.sensors, "interval_s": a.interval, "constants": consts }));
    run.output(&json_path);
    run.output(&csv_path);
    run.finish(&dir)
}

fn load_arch(spec: &str, k: u64) -> Result<Architecture, Failure> {
    match spec.strip_prefix("builtin:") {
        Some("student-full") => Ok(full_scale_student(FEATURE_WIDTH as u64, k)),
        Some("timesformer-base") => Ok(timesformer_base(16, k)),
        Some(other) => Err(Failure::Schema(format!(
            "unknown builtin architecture `{other}` (student-full, timesformer-base)"
        ))),
        None => {
            let path = Path::new(spec);
            let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            Architecture::from_json(&text).map_err(|e| Failure::Schema(format!("{spec}: {e}")))
        }
    }
}

fn parse_sensors(list: &str) -> Result<Vec<Sensor>, Failure> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty() && *s != "none")
        .map(|s| s.parse::<Sensor>().map_err(Failure::from))
        .collect()
}

/// Reads a checkpoint and decides from its fields whether it is a teacher
/// or a student.
fn load_model(path: &Path) -> Result<(Box<dyn ClipModel>, &'static str), Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| Failure::Runtime(format!("{}: {e}", path.display()));
    if value.get("teacher_dim").is_some() {
        let ckpt: StudentCheckpoint = serde_json::from_value(value).map_err(bad)?;
        Ok((Box::new(ckpt.into_model::<f32>()?), "student"))
    } else if value.get("lambdas").is_some() {
        let ckpt: TeacherCheckpoint = serde_json::from_value(value).map_err(bad)?;
        Ok((Box::new(ckpt.into_model::<f32>()?), "teacher"))
    } else {
        Err(Failure::Runtime(format!(
            "{} is neither a teacher nor a student checkpoint",
            path.display()
        )))
    }
}

fn select(recs: &[Recording], split: SplitArg) -> Vec<Recording> {
    match split {
        SplitArg::Train => dataset::split(recs, Split::Train),
        SplitArg::Val => dataset::split(recs, Split::Val),
        SplitArg::Test => dataset::split(recs, Split::Test),
        SplitArg::All => recs.to_vec(),
    }
}

fn split_name(split: SplitArg) -> &'static str {
    match split {
        SplitArg::Train => "train",
        SplitArg::Val => "val",
        SplitArg::Test => "test",
        SplitArg::All => "all",
    }
}

/// Refuses to write inside the input dataset, then creates `out`.
fn prepare_out(out: &Path, data: &Path) -> Result<(), Failure> {
    let data_c = data.canonicalize().map_err(|e| io_failure(data, e))?;
    let out_abs = out
        .canonicalize()
        .or_else(|_| std::path::absolute(out))
        .map_err(|e| io_failure(out, e))?;
    if out_abs.starts_with(&data_c) {
        return Err(Failure::Schema(format!(
            "output {} lies inside the input dataset {}",
            out.display(),
            data.display()
        )));
    }
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))
}
