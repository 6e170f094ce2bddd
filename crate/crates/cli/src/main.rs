use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flowmend_core::dataset::{enumerate_pairs, parse_class, synth_sequence, PairStrategy, SynthParams, CLASS_NAMES};
use flowmend_core::flow::{estimate_flow, flow_to_hsv, write_flo, FlowParams, GrayImage};
use flowmend_core::harness::{
    emit_ablation, emit_report, mean_of, read_folds_csv, run_ablation, run_baselines, run_reconstruction_cv,
    run_size_sweep, train_fold_classifier, train_fold_reconstructor, write_sweep_csv, AblationAxis,
    ExperimentManifest, FlowBank,
};
use flowmend_core::numfmt::sig6;
use flowmend_core::occlusion::{apply_occlusion, crop_face, CropGeometry, EyeAnchors, MaskKind, OcclusionMask};
use flowmend_core::{Error, Result};

#[derive(Parser)]
#[command(name = "flowmend", version, about = "Occluded facial-motion reconstruction")]
struct Cli {
    /// Experiment manifest (JSON or TOML), or a flow-parameter file for `flow`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed of the manifest (dataset, folds, networks).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dense flow between two frames, written as .flo plus an HSV preview.
    Flow { prev: PathBuf, next: PathBuf },
    /// Crops a face by its eye anchors and blacks out a region.
    Occlude {
        image: PathBuf,
        /// eyes, mouth, lower_part, or a mask JSON file.
        #[arg(long, default_value = "lower_part")]
        mask: String,
        /// left_x,left_y,right_x,right_y; without it the image is taken as already cropped.
        #[arg(long, value_parser = parse_anchors)]
        anchors: Option<[f64; 4]>,
    },
    /// Lists the 1-based frame pairs a strategy selects.
    Pairs {
        #[arg(long)]
        frames: usize,
        #[arg(long, default_value = "mid_flows")]
        strategy: String,
    },
    /// Writes one synthetic sequence with its anchors and ground-truth apex flow.
    Synth {
        #[arg(long)]
        class: String,
        #[arg(long, default_value_t = 6)]
        frames: usize,
        #[arg(long, default_value_t = 128)]
        size: usize,
    },
    /// Trains the autoencoder of one cross-validation rotation.
    TrainAe {
        #[arg(long, default_value_t = 0)]
        fold: usize,
    },
    /// Trains the classifier of one cross-validation rotation.
    TrainCnn {
        #[arg(long, default_value_t = 0)]
        fold: usize,
    },
    /// Full cross-validation: baselines and, unless disabled, reconstruction.
    Cv {
        #[arg(long)]
        baselines_only: bool,
    },
    /// Grid over one axis: loss, skips or strategy.
    Ablate {
        #[arg(long)]
        axis: String,
    },
    /// Prints the per-fold table and means of a finished run.
    Report {
        /// Directory holding folds.csv; defaults to --out-dir.
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Classifier accuracy across flow sizes and seeds.
    SweepSize {
        #[arg(long, value_delimiter = ',', default_values_t = [16usize, 32, 48, 64])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        seeds: u64,
    },
}

fn manifest(cli: &Cli) -> Result<ExperimentManifest> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("this command needs --config <manifest>".into()))?;
    let mut m = ExperimentManifest::load(path)?;
    if let Some(seed) = cli.seed {
        if let flowmend_core::dataset::DatasetSpec::Synthetic(s) = &mut m.dataset {
            s.seed = seed;
        }
        m.folds.seed = seed;
        m.fold_plan = None;
        m.ae.seed = seed;
        m.cnn.seed = seed;
    }
    Ok(m)
}

fn parse_anchors(s: &str) -> std::result::Result<[f64; 4], String> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|e| e.to_string())?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected 4 comma-separated numbers, got {}", v.len()))
}

fn mask_from(spec: &str) -> Result<OcclusionMask> {
    match spec.parse::<MaskKind>() {
        Ok(kind) if kind != MaskKind::Custom => OcclusionMask::preset(kind),
        _ => OcclusionMask::load(spec),
    }
}

fn out_dir(cli: &Cli) -> Result<&Path> {
    std::fs::create_dir_all(&cli.out_dir)?;
    Ok(&cli.out_dir)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Flow { prev, next } => {
            let params: FlowParams = match &cli.config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)
                    .map_err(|e| Error::Config(format!("{}: {}", p.display(), e)))?,
                None => FlowParams::default(),
            };
            params.validate()?;
            let flow = estimate_flow(&GrayImage::load(prev)?, &GrayImage::load(next)?, &params)?;
            let dir = out_dir(cli)?;
            write_flo(&flow, dir.join("flow.flo"))?;
            flow_to_hsv(&flow).to_rgb().save(dir.join("flow_hsv.png"))?;
            println!("mean |flow| {}", sig6(flow.u().iter().zip(flow.v()).map(|(u, v)| u.hypot(*v)).sum::<f64>() / flow.u().len() as f64));
        }
        Command::Occlude { image, mask, anchors } => {
            let img = GrayImage::load(image)?;
            let mask = mask_from(mask)?;
            let face = match anchors {
                Some(a) => {
                    let anchors = EyeAnchors::new((a[0], a[1]), (a[2], a[3]))?;
                    let crop = crop_face(&img, &anchors, &CropGeometry::default())?;
                    if crop.clamped {
                        eprintln!("warning: crop box clamped to the image");
                    }
                    crop.image
                }
                None => img,
            };
            apply_occlusion(&face, &mask).save(out_dir(cli)?.join("occluded.png"))?;
        }
        Command::Pairs { frames, strategy } => {
            let s: PairStrategy = strategy.parse()?;
            for (p, q) in enumerate_pairs(*frames, s)? {
                println!("{},{}", p, q);
            }
        }
        Command::Synth { class, frames, size } => {
            let c = parse_class(class).map_err(|e| Error::Config(e.to_string()))?;
            let sample = synth_sequence(c, *frames, *size, cli.seed.unwrap_or(0), &SynthParams::default())?;
            let dir = out_dir(cli)?.join(CLASS_NAMES[c]).join(format!("synth{:04}", cli.seed.unwrap_or(0)));
            std::fs::create_dir_all(&dir)?;
            let a = sample.sequence.anchors(1);
            let mut csv = String::from("frame_path,left_x,left_y,right_x,right_y\n");
            for t in 1..=sample.sequence.len() {
                let name = format!("frame_{:04}.png", t);
                sample.sequence.frame(t)?.save(dir.join(&name))?;
                csv.push_str(&format!(
                    "{}/{}/{},{},{},{},{}\n",
                    CLASS_NAMES[c],
                    dir.file_name().and_then(|n| n.to_str()).unwrap_or_default(),
                    name,
                    a.left_eye.0,
                    a.left_eye.1,
                    a.right_eye.0,
                    a.right_eye.1
                ));
            }
            std::fs::write(dir.join("anchors.csv"), csv)?;
            write_flo(&sample.apex_flow, dir.join("apex_truth.flo"))?;
            println!("{}", dir.display());
        }
        Command::TrainAe { fold } => {
            let m = manifest(cli)?;
            check_fold(&m, *fold)?;
            let bank = FlowBank::build(&m, &[m.strategy])?;
            let (ae, history) = train_fold_reconstructor(&bank, &m.ae, m.strategy, *fold)?;
            let dir = out_dir(cli)?;
            ae.save(dir.join(format!("ae_fold{}.ckpt", fold)))?;
            history.write_csv(dir.join(format!("ae_fold{}_history.csv", fold)))?;
            println!("best epoch {} val loss {}", history.best_epoch, history.best_val_loss().map(sig6).unwrap_or_default());
        }
        Command::TrainCnn { fold } => {
            let m = manifest(cli)?;
            check_fold(&m, *fold)?;
            let bank = FlowBank::build(&m, &[])?;
            let (cnn, history) = train_fold_classifier(&bank, &m.cnn, *fold)?;
            let dir = out_dir(cli)?;
            cnn.save(dir.join(format!("cnn_fold{}.ckpt", fold)))?;
            std::fs::write(dir.join(format!("cnn_fold{}_history.csv", fold)), history.to_csv())?;
            println!("best epoch {}", history.best_epoch);
        }
        Command::Cv { baselines_only } => {
            let m = manifest(cli)?;
            let report = if *baselines_only { run_baselines(&m)? } else { run_reconstruction_cv(&m)? };
            emit_report(&report, &m, out_dir(cli)?)?;
            print_summary(&report.folds);
        }
        Command::Ablate { axis } => {
            let m = manifest(cli)?;
            let axis: AblationAxis = axis.parse()?;
            let table = run_ablation(&m, axis)?;
            emit_ablation(&table, &m, out_dir(cli)?)?;
            for row in &table.rows {
                println!("{:<16} {}", row.setting, mean_of(&row.folds, |f| f.reconstructed_accuracy).map(sig6).unwrap_or_default());
            }
        }
        Command::Report { from } => {
            let dir = from.as_ref().unwrap_or(&cli.out_dir);
            print_summary(&read_folds_csv(dir.join("folds.csv"))?);
        }
        Command::SweepSize { sizes, seeds } => {
            let m = manifest(cli)?;
            let seed_list: Vec<u64> = (0..*seeds).map(|s| m.cnn.seed + s).collect();
            let rows = run_size_sweep(&m, sizes, &seed_list)?;
            write_sweep_csv(&rows, out_dir(cli)?.join("sweep_size.csv"))?;
        }
    }
    Ok(())
}

fn check_fold(m: &ExperimentManifest, fold: usize) -> Result<()> {
    let k = m.fold_plan.as_ref().map_or(m.folds.k, |p| p.k);
    if fold >= k {
        return Err(Error::Config(format!("fold {} out of range for k = {}", fold, k)));
    }
    Ok(())
}

fn print_summary(folds: &[flowmend_core::harness::FoldResult]) {
    let opt = |v: Option<f64>| v.map(sig6).unwrap_or_else(|| "-".into());
    println!("fold  clean     occluded  reconstructed");
    for f in folds {
        println!("{:<5} {:<9} {:<9} {}", f.fold, sig6(f.clean_accuracy), sig6(f.occluded_accuracy), opt(f.reconstructed_accuracy));
    }
    println!(
        "mean  {:<9} {:<9} {}",
        opt(mean_of(folds, |f| Some(f.clean_accuracy))),
        opt(mean_of(folds, |f| Some(f.occluded_accuracy))),
        opt(mean_of(folds, |f| f.reconstructed_accuracy))
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
