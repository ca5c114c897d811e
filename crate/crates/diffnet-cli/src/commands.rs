//! Implementations of the CLI verbs.

use std::path::{Path, PathBuf};

use diffnet::checkpoint::{self, checkpoint_of, checkpoint_of_snapshot, CheckpointMeta};
use diffnet::config::{ExperimentConfig, Scale};
use diffnet::data::{Dataset, DatasetId, LabeledImage};
use diffnet::detector::parse_layouts;
use diffnet::metrics::{write_metrics, MetricRecord};
use diffnet::notation::parse_notation;
use diffnet::render as render_mod;
use diffnet::scores::predict;
use diffnet::system::{select_ensemble, EnsembleCandidate, EnsembleSystem, NetworkSystem};
use diffnet::train::{
    detector_signal_cache, evaluate, evaluate_ensemble, run_repetition, ExperimentReport,
    ExperimentSetup, SampleSet,
};
use diffnet::{Error, Result};

use crate::lock::DirLock;
use crate::report::{format_table, RunReport};

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "val",
            Split::Test => "test",
        }
    }
}

pub struct TrainArgs {
    pub config: Option<PathBuf>,
    pub notation: Option<String>,
    pub dataset: Option<DatasetId>,
    pub seeds: Option<Vec<u64>>,
    pub scale: Option<Scale>,
    pub out: Option<PathBuf>,
    pub data_root: Option<PathBuf>,
    pub save_every_epoch: bool,
}

fn resolve_config(args: &TrainArgs) -> Result<ExperimentConfig> {
    let mut config = match (&args.config, &args.notation) {
        (Some(path), _) => ExperimentConfig::from_file(path)?,
        (None, Some(notation)) => {
            let dataset = args.dataset.unwrap_or(DatasetId::Mnist);
            ExperimentConfig::preset(args.scale.unwrap_or(Scale::Desk), dataset, notation)
        }
        (None, None) => {
            return Err(Error::Config(
                "either --config or --notation is required".into(),
            ))
        }
    };
    if let Some(notation) = &args.notation {
        config.notation = notation.clone();
    }
    if let Some(dataset) = args.dataset {
        config.dataset = dataset;
    }
    if let Some(seeds) = &args.seeds {
        config.seeds = seeds.clone();
    }
    if let Some(out) = &args.out {
        config.out_dir = Some(out.clone());
    }
    if let Some(root) = &args.data_root {
        config.data_root = Some(root.clone());
    }
    if args.save_every_epoch {
        config.save_every_epoch = true;
    }
    config.validate()?;
    Ok(config)
}

struct LoadedData {
    dataset: Dataset,
    train_limit: Option<usize>,
    val_limit: Option<usize>,
    test_limit: Option<usize>,
}

impl LoadedData {
    fn load(config: &ExperimentConfig) -> Result<Self> {
        let dataset = Dataset::load(
            config.data_root.as_deref(),
            config.dataset,
            config.split_seed,
        )?;
        Ok(Self {
            dataset,
            train_limit: config.subset.train,
            val_limit: config.subset.validation,
            test_limit: config.subset.test,
        })
    }

    fn images(&self, split: Split) -> Vec<&LabeledImage> {
        match split {
            Split::Train => self.dataset.train_images(self.train_limit),
            Split::Validation => self.dataset.validation_images(self.val_limit),
            Split::Test => self.dataset.test_images(self.test_limit),
        }
    }
}

fn setup_from_config<'a>(
    config: &'a ExperimentConfig,
    spec: &'a diffnet::ArchitectureSpec,
    geometry: &'a diffnet::system::GeometryConfig,
    data: &'a LoadedData,
) -> Result<ExperimentSetup<'a>> {
    let layouts = match &config.layout_path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Some(parse_layouts(&text, spec.grid_size()?, geometry.pitch)?)
        }
        None => None,
    };
    Ok(ExperimentSetup {
        spec,
        geometry,
        encoding: config.encoding_spec(),
        train_images: data.images(Split::Train),
        val_images: data.images(Split::Validation),
        test_images: data.images(Split::Test),
        config: config.train.clone(),
        learnable_coefficients: config.learnable_coefficients,
        layouts,
        keep_epoch_snapshots: config.save_every_epoch,
        on_epoch: None,
    })
}

pub fn train(args: TrainArgs) -> Result<()> {
    let config = resolve_config(&args)?;
    let out_dir = config
        .out_dir
        .clone()
        .ok_or_else(|| Error::Config("an output directory is required (--out)".into()))?;
    let _lock = DirLock::acquire(&out_dir)?;
    checkpoint::write_atomic(&out_dir.join("config.toml"), config.to_toml().as_bytes())?;

    let spec = parse_notation(&config.notation, config.dataset.num_classes())?;
    let geometry = config.geometry.to_geometry();
    let data = LoadedData::load(&config)?;

    println!(
        "training {} on {} ({} train / {} val / {} test), seeds {:?}",
        config.notation,
        config.dataset.dir_name(),
        data.images(Split::Train).len(),
        data.images(Split::Validation).len(),
        data.images(Split::Test).len(),
        config.seeds
    );

    let mut repetitions = Vec::new();
    for &seed in &config.seeds {
        let mut setup = setup_from_config(&config, &spec, &geometry, &data)?;
        setup.on_epoch = Some(Box::new(move |stats, val_accuracy| {
            println!(
                "  seed {seed} epoch {:>3}: loss {:.4}  val {:.2}%  (lr {:.2e}, T {:.3})",
                stats.epoch,
                stats.mean_loss,
                100.0 * val_accuracy,
                stats.learning_rate,
                stats.temperature
            );
        }));
        let (rep, best_system) = run_repetition(&setup, seed)?;
        let seed_dir = out_dir.join(format!("seed{seed}"));

        let mut records = Vec::new();
        for (stats, val_acc) in rep.epoch_stats.iter().zip(&rep.val_history) {
            records.push(MetricRecord {
                epoch: stats.epoch,
                split: "train".into(),
                loss: Some(stats.mean_loss),
                accuracy: None,
                learning_rate: stats.learning_rate,
                temperature: stats.temperature,
            });
            records.push(MetricRecord {
                epoch: stats.epoch,
                split: "val".into(),
                loss: None,
                accuracy: Some(*val_acc),
                learning_rate: stats.learning_rate,
                temperature: stats.temperature,
            });
        }
        write_metrics(&seed_dir.join("metrics.log"), &records)?;

        for snapshot in &rep.snapshots {
            let ckpt = checkpoint_of_snapshot(&best_system, snapshot, &geometry, seed);
            checkpoint::save(&ckpt, &seed_dir.join(format!("epoch{:03}.ckpt", snapshot.epoch)))?;
        }
        let best = checkpoint_of(
            &best_system,
            &geometry,
            CheckpointMeta {
                epoch: rep.best_epoch,
                seed,
                val_accuracy: rep.best_val_accuracy,
            },
        );
        checkpoint::save(&best, &seed_dir.join("best.ckpt"))?;
        println!(
            "seed {seed}: best epoch {} (val {:.2}%), test {:.2}%",
            rep.best_epoch,
            100.0 * rep.best_val_accuracy,
            100.0 * rep.test_accuracy
        );
        repetitions.push(rep);
    }

    let accuracies: Vec<f64> = repetitions.iter().map(|r| r.test_accuracy).collect();
    let mean = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
    let std = if accuracies.len() > 1 {
        (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>()
            / (accuracies.len() - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    let report = ExperimentReport {
        notation: config.notation.clone(),
        repetitions,
        mean_test_accuracy: mean,
        std_test_accuracy: std,
    };
    let run_report = RunReport::new(config.dataset, &report);
    run_report.save(&out_dir.join("report.toml"))?;
    let (table, _) = format_table(std::slice::from_ref(&run_report));
    print!("{table}");
    Ok(())
}

pub struct EvalArgs {
    pub checkpoints: Vec<PathBuf>,
    pub config: Option<PathBuf>,
    pub split: Split,
    pub ensemble: bool,
    pub top_k: usize,
    pub data_root: Option<PathBuf>,
    pub limit: Option<usize>,
}

/// Locate the run config next to a checkpoint: its directory, then the
/// parent (checkpoints live under out_dir/seedN/).
fn sibling_config(checkpoint: &Path) -> Result<PathBuf> {
    let mut dir = checkpoint.parent();
    while let Some(d) = dir {
        let candidate = d.join("config.toml");
        if candidate.exists() {
            return Ok(candidate);
        }
        dir = d.parent();
    }
    Err(Error::Config(format!(
        "no config.toml found near {}; pass --config",
        checkpoint.display()
    )))
}

fn candidate_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "ckpt"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no .ckpt files under {}",
            path.display()
        )));
    }
    Ok(files)
}

fn print_confusion(confusion: &[Vec<usize>]) {
    println!("confusion (rows: true class, cols: predicted):");
    for row in confusion {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:5}")).collect();
        println!("  {}", cells.join(" "));
    }
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let config_path = match &args.config {
        Some(p) => p.clone(),
        None => sibling_config(&args.checkpoints[0])?,
    };
    let mut config = ExperimentConfig::from_file(&config_path)?;
    if let Some(root) = &args.data_root {
        config.data_root = Some(root.clone());
    }
    let data = LoadedData::load(&config)?;
    let encoding = config.encoding_spec();
    let geometry = config.geometry.to_geometry();

    let load_system = |path: &Path| -> Result<NetworkSystem> {
        checkpoint::load(path)?.into_system()
    };

    let images = data.images(args.split);
    let images = match args.limit {
        Some(limit) => images.into_iter().take(limit).collect(),
        None => images,
    };
    let grid = parse_notation(&config.notation, config.dataset.num_classes())?.grid_size()?;
    let samples = SampleSet::new(images, encoding, grid, geometry.pitch);

    if !args.ensemble {
        for path in &args.checkpoints {
            for file in candidate_files(path)? {
                let system = load_system(&file)?;
                let eval = evaluate(&system, &samples)?;
                println!(
                    "{}: {} accuracy {:.2}% ({}/{})",
                    file.display(),
                    args.split.name(),
                    100.0 * eval.accuracy,
                    eval.correct,
                    eval.total
                );
                print_confusion(&eval.confusion);
            }
        }
        return Ok(());
    }

    // ensemble path: expand each argument into that unit's candidate list
    let mut units: Vec<Vec<PathBuf>> = Vec::new();
    for path in &args.checkpoints {
        units.push(candidate_files(path)?);
    }
    let needs_selection = units.iter().any(|u| u.len() > 1);
    let chosen_files: Vec<PathBuf> = if needs_selection {
        let val_images = data.images(Split::Validation);
        let val_labels: Vec<usize> = val_images.iter().map(|i| i.label as usize).collect();
        let val_samples = SampleSet::new(val_images, encoding, grid, geometry.pitch);
        let mut reference = None;
        let mut candidates = Vec::new();
        for unit in &units {
            let mut list = Vec::new();
            for (tag, file) in unit.iter().enumerate() {
                let system = load_system(file)?;
                let solo = evaluate(&system, &val_samples)?;
                let signals = detector_signal_cache(&system, &val_samples)?;
                list.push(EnsembleCandidate {
                    tag,
                    solo_val_accuracy: solo.accuracy,
                    val_signals: signals,
                });
                if reference.is_none() {
                    reference = Some(system);
                }
            }
            candidates.push(list);
        }
        let selection = select_ensemble(
            reference.as_ref().expect("at least one candidate"),
            &candidates,
            &val_labels,
            args.top_k,
        )?;
        println!(
            "selected combination {:?} (validation accuracy {:.2}%)",
            selection.chosen,
            100.0 * selection.val_accuracy
        );
        selection
            .chosen
            .iter()
            .zip(&units)
            .map(|(&i, unit)| unit[i].clone())
            .collect()
    } else {
        units.into_iter().map(|mut u| u.remove(0)).collect()
    };

    let systems: Vec<NetworkSystem> = chosen_files
        .iter()
        .map(|f| load_system(f))
        .collect::<Result<_>>()?;
    let ensemble = EnsembleSystem::new(systems)?;
    let eval = evaluate_ensemble(&ensemble, &samples)?;
    println!(
        "ensemble of {}: {} accuracy {:.2}% ({}/{})",
        chosen_files.len(),
        args.split.name(),
        100.0 * eval.accuracy,
        eval.correct,
        eval.total
    );
    print_confusion(&eval.confusion);
    Ok(())
}

pub fn table(runs: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let mut reports = Vec::new();
    let mut missing = Vec::new();
    for run in runs {
        let path = if run.is_dir() {
            run.join("report.toml")
        } else {
            run.clone()
        };
        if path.exists() {
            reports.push(RunReport::load(&path)?);
        } else {
            missing.push(run.display().to_string());
        }
    }
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "no report found for: {}",
            missing.join(", ")
        )));
    }
    let (table, csv) = format_table(&reports);
    print!("{table}");
    if let Some(out) = out {
        checkpoint::write_atomic(out, csv.as_bytes())?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

pub struct RenderArgs {
    pub checkpoint: PathBuf,
    pub sample: usize,
    pub split: Split,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub data_root: Option<PathBuf>,
}

pub fn render(args: RenderArgs) -> Result<()> {
    let config_path = match &args.config {
        Some(p) => p.clone(),
        None => sibling_config(&args.checkpoint)?,
    };
    let mut config = ExperimentConfig::from_file(&config_path)?;
    if let Some(root) = &args.data_root {
        config.data_root = Some(root.clone());
    }
    let ckpt = checkpoint::load(&args.checkpoint)?;
    let geometry = ckpt.geometry.clone();
    let system = ckpt.into_system()?;
    let data = LoadedData::load(&config)?;
    let images = data.images(args.split);
    let image = *images.get(args.sample).ok_or_else(|| {
        Error::Config(format!(
            "sample {} out of range ({} images in the {} split)",
            args.sample,
            images.len(),
            args.split.name()
        ))
    })?;
    let encoding = config.encoding_spec();
    let input = diffnet::data::encode(image, &encoding, system.grid_size(), geometry.pitch)?;

    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    match encoding.mode {
        diffnet::data::EncodingMode::Amplitude => {
            render_mod::save_intensity_png(&args.out.join("input.png"), &input)?
        }
        diffnet::data::EncodingMode::Phase => render_mod::save_phase_png(
            &args.out.join("input.png"),
            &input,
            encoding.phase_range,
        )?,
    }
    render_mod::save_raw_intensity(
        &args.out.join("input.f64"),
        &input,
        geometry.propagation.wavelength,
        false,
    )?;

    let outputs = system.output_fields(&input)?;
    for (i, (field, layout)) in outputs.iter().zip(system.layouts()).enumerate() {
        render_mod::save_intensity_with_overlay(
            &args.out.join(format!("output_plane_{i}.png")),
            field,
            layout,
        )?;
        render_mod::save_raw_intensity(
            &args.out.join(format!("output_plane_{i}.f64")),
            field,
            geometry.propagation.wavelength,
            true,
        )?;
    }

    let readout = system.forward_readout(&input, 1.0)?;
    render_mod::save_bar_chart(&args.out.join("scores.png"), readout.scores.raw(), 160)?;
    let predicted = predict(&readout.scores);
    println!(
        "sample {} (true class {}): predicted {}",
        args.sample, image.label, predicted
    );
    for (i, signals) in readout.plane_signals.iter().enumerate() {
        let parts: Vec<String> = system.layouts()[i]
            .regions()
            .iter()
            .zip(signals)
            .map(|(r, s)| format!("{}{}={s:.4e}", r.class_id, r.sign))
            .collect();
        println!("plane {i}: {}", parts.join(" "));
    }
    println!("wrote artifacts to {}", args.out.display());
    Ok(())
}

pub fn parse(notation: &str, classes: usize) -> Result<()> {
    let spec = parse_notation(notation, classes)?;
    println!("notation      {}", spec.render());
    println!("form          {}", if spec.split_planes { "split planes" } else { "shared plane" });
    println!(
        "detection     {}",
        if spec.is_differential() {
            "differential"
        } else {
            "non-differential"
        }
    );
    println!("networks      {}", spec.n_networks);
    println!("class groups  {}", spec.groups());
    println!("classes/group {}", spec.classes_per_group());
    println!("layers        {}", spec.layers_per_network);
    println!("neurons/layer {}", spec.neurons_per_layer);
    match spec.grid_size() {
        Ok(side) => println!("layer grid    {side}x{side}"),
        Err(_) => println!("layer grid    (neurons per layer is not a perfect square)"),
    }
    Ok(())
}
