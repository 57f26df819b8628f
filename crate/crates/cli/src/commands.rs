use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ndarray::s;
use rayon::prelude::*;
use serde::Serialize;
use subot_core::datamodel::{
    detect_header, generate_toy, load_dataset_csv, load_dataset_csv_with, recording_features, sliding_windows,
    write_dataset_csv, CsvOptions, LabeledDataset, ToyConfig, WindowSpec, FEATURE_NAMES,
};
use subot_core::pipeline::{
    fit_substructures, run_method, transport_stage, AdaptationConfig, AdaptationResult, Method, PipelineError,
    RunReport,
};

use crate::args::{AdaptArgs, BenchmarkArgs, FeaturesArgs, SweepArgs, SweepAxis, SynthArgs, VariantArg};
use crate::config::{merge, resolve, ConfigFile, Resolved};
use crate::output::{cell_text, ensure_dir, strings, write_json, write_table};

fn load_labeled(path: &Path) -> Result<LabeledDataset<f64>> {
    load_dataset_csv(path, true).with_context(|| format!("loading {}", path.display()))
}

/// The target may omit its label column; it is detected from the width.
fn load_pair(source: &Path, target: &Path) -> Result<(LabeledDataset<f64>, LabeledDataset<f64>)> {
    let src = load_labeled(source)?;
    let raw: LabeledDataset<f64> =
        load_dataset_csv(target, false).with_context(|| format!("loading {}", target.display()))?;
    let tgt = if raw.n_features() == src.n_features() + 1 {
        load_labeled(target)?
    } else if raw.n_features() == src.n_features() {
        raw
    } else {
        bail!(
            "{} has {} columns, source {} has {} features",
            target.display(),
            raw.n_features(),
            source.display(),
            src.n_features()
        );
    };
    Ok((src, tgt))
}

fn stage_error(e: PipelineError) -> anyhow::Error {
    anyhow!("stage {}: {e}", e.stage())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |a| a.to_string())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let mut toy = match &args.toy {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("missing file: {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid toy file {}", path.display()))?
        }
        None => ToyConfig::two_class_three_blobs(0),
    };
    if let Some(seed) = args.seed {
        toy.rng_seed = seed;
    }
    if let Some(size) = args.size {
        toy = toy.with_domain_size(size);
    }
    let (source, target) = generate_toy::<f64>(&toy)?;
    ensure_dir(&args.out)?;
    write_dataset_csv(args.out.join("source.csv"), &source)?;
    write_dataset_csv(args.out.join("target.csv"), &target)?;
    write_json(&args.out, "toy.json", &toy)?;
    println!("wrote {} source and {} target rows to {}", source.n_samples(), target.n_samples(), args.out.display());
    Ok(())
}

pub fn features(args: &FeaturesArgs) -> Result<()> {
    let has_header = detect_header(&args.input)?;
    let raw: LabeledDataset<f64> =
        load_dataset_csv_with(&args.input, CsvOptions { has_labels: args.labels, has_header })
            .with_context(|| format!("loading {}", args.input.display()))?;
    let axes = if args.gyro { 6 } else { 3 };
    if raw.n_features() != axes {
        bail!("expected {axes} signal columns, found {}", raw.n_features());
    }
    let x = raw.features();
    let spec = WindowSpec { length: args.window, overlap: args.overlap };
    if !(0.0..1.0).contains(&spec.overlap) {
        bail!("overlap must lie in [0, 1)");
    }
    let gyro = args.gyro.then(|| x.slice(s![.., 3..6]));
    let feats = recording_features(x.slice(s![.., 0..3]), gyro, args.rate, spec)?;

    let mut header: Vec<String> = FEATURE_NAMES.iter().map(|n| format!("acc_{n}")).collect();
    if args.gyro {
        header.extend(FEATURE_NAMES.iter().map(|n| format!("gyro_{n}")));
    }
    let window_labels: Option<Vec<i64>> = raw.labels().map(|labels| {
        let names = raw.label_names().expect("file labels carry names");
        sliding_windows(raw.n_samples(), spec)
            .into_iter()
            .map(|start| {
                let mut counts = vec![0usize; raw.class_count()];
                for &y in &labels[start..start + spec.length] {
                    counts[y] += 1;
                }
                let best = (0..counts.len()).fold(0, |b, c| if counts[c] > counts[b] { c } else { b });
                names[best]
            })
            .collect()
    });
    if window_labels.is_some() {
        header.push("label".into());
    }
    let rows: Vec<Vec<String>> = feats
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = strings(r.iter());
            if let Some(l) = &window_labels {
                row.push(l[i].to_string());
            }
            row
        })
        .collect();
    ensure_dir(&args.out)?;
    write_table(&args.out, "features.csv", &header, &rows)?;
    println!("wrote {} windows x {} features to {}", rows.len(), feats.ncols(), args.out.join("features.csv").display());
    Ok(())
}

#[derive(Serialize)]
struct AdaptDocument<'a> {
    method: Method,
    config: &'a AdaptationConfig,
    report: RunReport,
}

fn label_name(names: Option<&[i64]>, y: usize) -> String {
    names.map_or(y as i64, |n| n[y]).to_string()
}

pub fn write_result_files(
    out: &Path,
    resolved: &Resolved,
    source: &LabeledDataset<f64>,
    result: &AdaptationResult<f64>,
) -> Result<()> {
    ensure_dir(out)?;
    let names = source.label_names();
    let doc = AdaptDocument { method: resolved.method, config: &resolved.config, report: result.report(names) };
    write_json(out, "result.json", &doc)?;

    let rows: Vec<Vec<String>> = result
        .predicted_labels
        .iter()
        .enumerate()
        .map(|(i, &y)| vec![i.to_string(), label_name(names, y), result.target_assignments[i].to_string()])
        .collect();
    write_table(out, "predictions.csv", &strings(["row", "predicted", "substructure"]), &rows)?;

    if let Some(coupling) = &result.coupling {
        let (path, file) = crate::output::create(out, "coupling.csv")?;
        coupling.write_csv(file).with_context(|| format!("cannot write {}", path.display()))?;
        write_json(out, "coupling.json", &coupling.summary())?;
    }
    if let Some(eval) = &result.evaluation {
        let c = eval.confusion.len();
        let mut header = vec!["truth".to_string()];
        header.extend((0..c).map(|p| format!("pred_{}", label_name(names, p))));
        let rows: Vec<Vec<String>> = (0..c)
            .map(|t| std::iter::once(label_name(names, t)).chain(strings(&eval.confusion[t])).collect())
            .collect();
        write_table(out, "confusion.csv", &header, &rows)?;
    }
    let mut timing_rows: Vec<Vec<String>> =
        result.timings.stages().iter().map(|(name, s)| vec![name.to_string(), s.to_string()]).collect();
    timing_rows.push(vec!["total".into(), result.timings.total.to_string()]);
    write_table(out, "timings.csv", &strings(["stage", "seconds"]), &timing_rows)
}

pub fn adapt(args: &AdaptArgs) -> Result<()> {
    let (source, target) = load_pair(&args.source, &args.target)?;
    let resolved = resolve(&args.tuning, args.variant, source.class_count())?;
    let result = run_method(resolved.method, &source, &target, &resolved.config).map_err(stage_error)?;
    write_result_files(&args.out, &resolved, &source, &result)?;

    println!("method: {}", resolved.method);
    println!("accuracy: {}", fmt_opt(result.accuracy()));
    for (name, secs) in result.timings.stages() {
        println!("  {name:<10} {secs:.4}s");
    }
    println!("  {:<10} {:.4}s", "total", result.timings.total);
    if let Some(c) = &result.coupling {
        if !c.converged {
            eprintln!("warning: coupling solver stopped before convergence (residual {:e})", c.residual);
        }
    }
    Ok(())
}

fn task_names(paths: &[PathBuf]) -> Vec<String> {
    let stems: Vec<String> =
        paths.iter().map(|p| p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned())).collect();
    let unique = stems.iter().collect::<BTreeSet<_>>().len() == stems.len() && stems.iter().all(|s| !s.is_empty());
    if unique {
        stems
    } else {
        (0..paths.len()).map(|i| format!("d{i}")).collect()
    }
}

struct TaskOutcome {
    accuracy: Result<f64, String>,
    timings: Option<subot_core::pipeline::StageTimings>,
}

/// Arithmetic mean of the successful cells, `None` when every task failed.
pub fn row_average(cells: &[Option<f64>]) -> Option<f64> {
    let ok: Vec<f64> = cells.iter().flatten().copied().collect();
    (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "ERR".to_string(), |a| a.to_string())
}

pub fn benchmark(args: &BenchmarkArgs) -> Result<()> {
    let datasets: Vec<LabeledDataset<f64>> = args.datasets.iter().map(|p| load_labeled(p)).collect::<Result<_>>()?;
    let names = task_names(&args.datasets);
    let file = match &args.tuning.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let methods: Vec<Method> = if args.methods.is_empty() {
        Method::ALL.to_vec()
    } else {
        let mut seen = Vec::new();
        for m in args.methods.iter().copied().map(Method::from) {
            if !seen.contains(&m) {
                seen.push(m);
            }
        }
        seen
    };
    let pairs: Vec<(usize, usize)> = (0..datasets.len())
        .flat_map(|i| (0..datasets.len()).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let tasks: Vec<(Method, (usize, usize))> =
        methods.iter().flat_map(|&m| pairs.iter().map(move |&p| (m, p))).collect();

    let outcomes: Vec<TaskOutcome> = tasks
        .par_iter()
        .map(|&(method, (i, j))| {
            let arg = variant_arg(method);
            let resolved = merge(&file, &args.tuning, Some(arg), datasets[i].class_count());
            match run_method(method, &datasets[i], &datasets[j], &resolved.config) {
                Ok(r) => TaskOutcome {
                    accuracy: r.accuracy().ok_or_else(|| "target has no labels".to_string()),
                    timings: Some(r.timings),
                },
                Err(e) => TaskOutcome { accuracy: Err(stage_error(e).to_string()), timings: None },
            }
        })
        .collect();

    let task_labels: Vec<String> = pairs.iter().map(|&(i, j)| format!("{}->{}", names[i], names[j])).collect();
    let mut header = vec!["method".to_string()];
    header.extend(task_labels.iter().cloned());
    header.push("AVG".into());

    let mut acc_rows = Vec::new();
    let mut time_rows = Vec::new();
    let mut stage_rows = Vec::new();
    let mut error_rows = Vec::new();
    for (mi, method) in methods.iter().enumerate() {
        let slice = &outcomes[mi * pairs.len()..(mi + 1) * pairs.len()];
        let acc: Vec<Option<f64>> = slice.iter().map(|o| o.accuracy.as_ref().ok().copied()).collect();
        let secs: Vec<Option<f64>> = slice.iter().map(|o| o.timings.map(|t| t.total)).collect();
        let row = |vals: &[Option<f64>]| {
            std::iter::once(method.to_string())
                .chain(vals.iter().map(|v| cell(*v)))
                .chain(std::iter::once(cell(row_average(vals))))
                .collect::<Vec<_>>()
        };
        acc_rows.push(row(&acc));
        time_rows.push(row(&secs));
        for (k, o) in slice.iter().enumerate() {
            if let Some(t) = o.timings {
                for (stage, s) in t.stages() {
                    stage_rows.push(vec![method.to_string(), task_labels[k].clone(), stage.to_string(), s.to_string()]);
                }
            }
            if let Err(msg) = &o.accuracy {
                error_rows.push(vec![method.to_string(), task_labels[k].clone(), cell_text(msg)]);
            }
        }
    }

    ensure_dir(&args.out)?;
    write_table(&args.out, "accuracy.csv", &header, &acc_rows)?;
    write_table(&args.out, "timing.csv", &header, &time_rows)?;
    write_table(&args.out, "stages.csv", &strings(["method", "task", "stage", "seconds"]), &stage_rows)?;
    write_table(&args.out, "errors.csv", &strings(["method", "task", "message"]), &error_rows)?;

    for row in &acc_rows {
        println!("{}", row.join("  "));
    }
    if !error_rows.is_empty() {
        eprintln!("{} task(s) failed; see errors.csv", error_rows.len());
    }
    Ok(())
}

fn variant_arg(m: Method) -> VariantArg {
    match m {
        Method::SotC => VariantArg::SotC,
        Method::SotG => VariantArg::SotG,
        Method::Otda => VariantArg::Otda,
        Method::Nn => VariantArg::Nn,
    }
}

fn with_axis(base: &AdaptationConfig, axis: SweepAxis, value: f64) -> AdaptationConfig {
    let mut cfg = *base;
    match axis {
        SweepAxis::Lambda1 => cfg.ot.lambda1 = value,
        SweepAxis::Lambda => cfg.ot.lambda = value,
        SweepAxis::Eta => cfg.ot.eta = value,
        SweepAxis::KT => cfg.k_t = value as usize,
    }
    cfg
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let (source, target) = load_pair(&args.source, &args.target)?;
    let resolved = resolve(&args.tuning, args.variant, source.class_count())?;
    let method = resolved.method;
    let axis = args.axis;
    match (method, axis) {
        (Method::Nn, _) => bail!("the nn baseline has no parameter to sweep"),
        (Method::Otda, SweepAxis::Lambda1 | SweepAxis::KT) => {
            bail!("otda does not use {}", axis.name())
        }
        _ => {}
    }
    if axis == SweepAxis::KT {
        if let Some(v) = args.values.iter().find(|v| !(v.fract() == 0.0 && **v >= 1.0)) {
            bail!("k_t values must be positive integers, got {v}");
        }
    }

    let sot = matches!(method, Method::SotC | Method::SotG);
    // mixture fits do not depend on the transport parameters: fit once
    let stage = if sot && axis != SweepAxis::KT {
        Some(fit_substructures(&source, &target, &resolved.config).map_err(|e| e.to_string()))
    } else {
        None
    };

    let points: Vec<Result<AdaptationResult<f64>, String>> = args
        .values
        .par_iter()
        .map(|&v| {
            let cfg = with_axis(&resolved.config, axis, v);
            match &stage {
                Some(Ok(st)) => transport_stage(st, &cfg).map_err(|e| stage_error(e).to_string()),
                Some(Err(msg)) => Err(msg.clone()),
                None => run_method(method, &source, &target, &cfg).map_err(|e| stage_error(e).to_string()),
            }
        })
        .collect();

    let rows: Vec<Vec<String>> = args
        .values
        .iter()
        .zip(&points)
        .map(|(&v, p)| {
            let value = if axis == SweepAxis::KT { (v as usize).to_string() } else { v.to_string() };
            match p {
                Ok(r) => vec![value, fmt_opt(r.accuracy()), r.timings.total.to_string(), String::new()],
                Err(msg) => vec![value, "ERR".into(), "ERR".into(), cell_text(msg)],
            }
        })
        .collect();
    ensure_dir(&args.out)?;
    write_table(&args.out, "sweep.csv", &strings([axis.name(), "accuracy", "runtime", "error"]), &rows)?;
    for row in &rows {
        println!("{} = {}: accuracy {}", axis.name(), row[0], row[1]);
    }
    Ok(())
}
