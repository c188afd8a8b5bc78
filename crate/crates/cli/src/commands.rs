use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pcc_core::dataset::{self, load_dataset, load_manifest, load_points, DatasetManifest, ManifestEntry, Split};
use pcc_core::pipeline::{
    classify_batch, estimate_flops, evaluate, load_model, save_model, train_with, ParameterCount,
    PipelineConfig, PipelineModel,
};
use pcc_core::regions::Aggregator;
use pcc_core::synthetic::{shape_dataset, ShapeKind};
use pcc_core::{Dataset, Error, Execution, RegionGroup, Result};

use crate::report::{self, AblationRow};
use crate::{ConfigArgs, Sweep};

pub fn resolve_config(args: &ConfigArgs) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::preset(&args.preset)?;
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config
            .merge_text(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    }
    for kv in &args.overrides {
        config.apply_override(kv)?;
    }
    config.validate()?;
    Ok(config)
}

fn load(path: &Path) -> Result<Dataset> {
    load_dataset(&load_manifest(path)?, Execution::default())
}

/// Re-indexes labels by the model's class names.
fn align_labels(mut data: Dataset, class_names: &[String]) -> Result<Dataset> {
    let map = data
        .class_names
        .iter()
        .map(|name| {
            class_names
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::InvalidInput(format!("class '{name}' is not known to the model")))
        })
        .collect::<Result<Vec<usize>>>()?;
    for s in &mut data.samples {
        s.label = map[s.label];
    }
    data.class_names = class_names.to_vec();
    Ok(data)
}

fn print_or_write(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => report::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn train(train: &Path, model_path: &Path, args: &ConfigArgs, report_path: Option<&Path>) -> Result<()> {
    let config = resolve_config(args)?;
    let t = Instant::now();
    let data = load(train)?;
    let load_time = t.elapsed();
    let outcome = train_with(&data, &config, Execution::default())?;
    save_model(&outcome.model, model_path)?;
    let model = &outcome.model;
    let params = model.parameter_count();

    let mut tsv = String::from("key\tvalue\n");
    let _ = writeln!(tsv, "samples\t{}", data.len());
    let _ = writeln!(tsv, "classes\t{}", model.class_names.len());
    let _ = writeln!(tsv, "feature_len\t{}", model.feature_len());
    let _ = writeln!(tsv, "selected\t{}", model.selected.len());
    tsv.push_str(&report::params_rows(&params));
    let _ = writeln!(tsv, "train_accuracy\t{}", report::fmt_acc(outcome.train_accuracy));
    if let Some(path) = report_path {
        report::write(path, &tsv)?;
    }

    let tm = &outcome.timings;
    println!("trained on {} clouds, {} classes", data.len(), model.class_names.len());
    println!(
        "features: {} -> {} selected",
        model.feature_len(),
        model.selected.len()
    );
    println!(
        "parameters: filter {} + classifier {} = {}",
        params.filter, params.classifier, params.total
    );
    println!("train accuracy: {:.2}%", outcome.train_accuracy * 100.0);
    println!(
        "time: load {:.1?}, saab {:.1?}, features {:.1?}, dft {:.1?}, classifier {:.1?}, total {:.1?}",
        load_time,
        tm.saab,
        tm.features,
        tm.selection,
        tm.classifier,
        tm.total()
    );
    println!("model written to {}", model_path.display());
    Ok(())
}

pub fn eval(model_path: &Path, test: &Path, report_path: Option<&Path>, confusion: Option<&Path>) -> Result<()> {
    let model = load_model(model_path)?;
    let data = align_labels(load(test)?, &model.class_names)?;
    let report = evaluate(&model, &data, Execution::default())?;
    if let Some(path) = report_path {
        report::write(path, &report::eval_tsv(&report, &model.class_names))?;
    }
    if let Some(path) = confusion {
        report::write(path, &report::confusion_tsv(&report, &model.class_names))?;
    }
    print!("{}", report::eval_human(&report, &model.class_names));
    Ok(())
}

fn scores_field(model: &PipelineModel, scores: &[f64]) -> String {
    model
        .classifier
        .class_labels()
        .iter()
        .zip(scores)
        .map(|(&c, s)| format!("{}:{s:.6}", model.class_name(c)))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn predict(model_path: &Path, manifest: Option<&Path>, files: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let model = load_model(model_path)?;
    let labeled = manifest.is_some();
    let mut names: Vec<String> = Vec::new();
    let mut truth: Vec<Option<usize>> = Vec::new();
    let mut clouds = Vec::new();
    if let Some(path) = manifest {
        let data = align_labels(load(path)?, &model.class_names)?;
        for s in data.samples {
            names.push(s.name);
            truth.push(Some(s.label));
            clouds.push(s.cloud);
        }
    }
    let loaded = Execution::default().try_map(files, |f| load_points(f))?;
    for (f, c) in files.iter().zip(loaded) {
        names.push(f.display().to_string());
        truth.push(None);
        clouds.push(c);
    }

    let refs: Vec<_> = clouds.iter().collect();
    let preds = classify_batch(&model, &refs, Execution::default())?;
    let mut tsv = String::from("path\tpredicted\tscores");
    if labeled {
        tsv.push_str("\tlabel\tcorrect");
    }
    tsv.push('\n');
    for ((name, p), t) in names.iter().zip(&preds).zip(&truth) {
        let _ = write!(
            tsv,
            "{name}\t{}\t{}",
            model.class_name(p.class_id),
            scores_field(&model, &p.scores)
        );
        if labeled {
            match t {
                Some(t) => {
                    let _ = write!(tsv, "\t{}\t{}", model.class_names[*t], *t == p.class_id as usize);
                }
                None => tsv.push_str("\t\t"),
            }
        }
        tsv.push('\n');
    }
    print_or_write(&tsv, out)
}

/// Aggregator subsets swept by `ablate`: each aggregator alone, then all
/// seven together.
fn aggregator_cases() -> Vec<(String, Vec<Aggregator>)> {
    let mut cases: Vec<(String, Vec<Aggregator>)> =
        Aggregator::ALL.iter().map(|&a| (a.name().to_string(), vec![a])).collect();
    cases.push(("all".into(), Aggregator::ALL.to_vec()));
    cases
}

fn sweep_cells(base: &PipelineConfig, sweep: Sweep) -> Vec<(&'static str, String, PipelineConfig)> {
    let with = |f: &dyn Fn(&mut PipelineConfig)| {
        let mut c = base.clone();
        f(&mut c);
        c
    };
    match sweep {
        Sweep::Regions => RegionGroup::combinations()
            .into_iter()
            .map(|groups| {
                let name = groups.iter().map(|g| g.name()).collect::<Vec<_>>().join("+");
                ("regions", name, with(&|c| c.regions = groups.clone()))
            })
            .collect(),
        Sweep::K => [16, 32, 64]
            .into_iter()
            .map(|k| ("k", k.to_string(), with(&|c| c.k_neighbors = k)))
            .collect(),
        Sweep::Aggregators => aggregator_cases()
            .into_iter()
            .map(|(name, aggs)| ("aggregators", name, with(&|c| c.aggregators = aggs.clone())))
            .collect(),
        Sweep::Points => [256, 512, 768, 1024]
            .into_iter()
            .map(|n| ("points", n.to_string(), with(&|c| c.num_points = n)))
            .collect(),
        Sweep::All => [Sweep::Regions, Sweep::K, Sweep::Aggregators, Sweep::Points]
            .into_iter()
            .flat_map(|s| sweep_cells(base, s))
            .collect(),
    }
}

pub fn ablate(train: &Path, test: &Path, args: &ConfigArgs, sweeps: &[Sweep], report_path: Option<&Path>) -> Result<()> {
    let base = resolve_config(args)?;
    let train = load(train)?;
    let test = align_labels(load(test)?, &train.class_names)?;
    let sweeps = if sweeps.is_empty() { &[Sweep::Regions][..] } else { sweeps };

    let mut rows = Vec::new();
    for &sweep in sweeps {
        for (name, setting, mut config) in sweep_cells(&base, sweep) {
            // a fixed feature count cannot exceed a smaller ablated dimension
            let dim = config.feature_len();
            if let Some(n) = config.n_features {
                config.n_features = Some(n.min(dim));
            }
            config.validate()?;
            let outcome = train_with(&train, &config, Execution::default())?;
            let report = evaluate(&outcome.model, &test, Execution::default())?;
            eprintln!(
                "{name} {setting}: {:.2}% overall",
                report.overall_accuracy * 100.0
            );
            rows.push(AblationRow {
                sweep: name,
                setting,
                feature_len: dim,
                selected: outcome.model.selected.len(),
                report,
            });
        }
    }
    if let Some(path) = report_path {
        report::write(path, &report::ablation_tsv(&rows))?;
    }
    print!("{}", report::ablation_human(&rows));
    Ok(())
}

pub fn flops(
    args: &ConfigArgs,
    model_path: Option<&Path>,
    points: Option<usize>,
    classes: usize,
    report_path: Option<&Path>,
) -> Result<()> {
    let (config, classes, selected, params) = match model_path {
        Some(path) => {
            let model = load_model(path)?;
            let params = model.parameter_count();
            let classes = model.classifier.classes();
            (model.config.clone(), classes, Some(model.selected.len()), params)
        }
        None => {
            let config = resolve_config(args)?;
            let d = config.n_features.unwrap_or_else(|| config.feature_len());
            (config, classes, None, ParameterCount::for_dims(d, classes))
        }
    };
    let n = points.unwrap_or(config.num_points);
    let report = estimate_flops(&config, n, classes, selected);
    if let Some(path) = report_path {
        report::write(path, &report::flops_tsv(&report, &params))?;
    }
    print!("{}", report::flops_human(&report, &params));
    Ok(())
}

pub fn convert(format: &str, src: &Path, dst: &Path) -> Result<()> {
    let summary = dataset::convert(format.parse()?, src, dst)?;
    println!("converted {} files", summary.files);
    for m in &summary.manifests {
        println!("manifest: {}", m.display());
    }
    Ok(())
}

pub fn synth(out: &Path, train_per_class: usize, test_per_class: usize, points: usize, seed: u64) -> Result<()> {
    if points == 0 {
        return Err(Error::Config("--points must be positive".into()));
    }
    let splits = [
        (Split::Train, "train", train_per_class, seed),
        (Split::Test, "test", test_per_class, seed.wrapping_add(1)),
    ];
    for (split, name, per_class, seed) in splits {
        let data = shape_dataset(&ShapeKind::ALL, per_class, points, seed);
        let mut entries = Vec::with_capacity(data.len());
        for s in &data.samples {
            let rel = PathBuf::from(name)
                .join(&data.class_names[s.label])
                .join(format!("{}.xyz", s.name));
            let path = out.join(&rel);
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            dataset::write_points_text(&s.cloud, &path)?;
            entries.push(ManifestEntry {
                path: rel,
                class_id: s.label,
            });
        }
        let manifest = DatasetManifest {
            root: out.to_path_buf(),
            entries,
            class_names: data.class_names.clone(),
            split: Some(split),
        };
        let path = out.join(format!("{name}.tsv"));
        report::write(&path, &manifest.to_text())?;
        println!("{}: {} clouds", path.display(), manifest.len());
    }
    Ok(())
}
