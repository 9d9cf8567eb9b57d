mod cli;

use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use canopy_core::io::{merge_config, write_atomic, DatasetError, DatasetLayout, RunConfig};
use canopy_core::pipeline::{
    detect_dataset, evaluate_dirs, format_match_dump, label_dataset, segment_dataset, sparsify_dataset, track_dataset,
    PipelineError,
};
use canopy_core::synth::{
    export_dataset, generate_scene, generate_trajectory, ExportOptions, MapOptions, NoiseModel, RenderOptions, SceneSpec,
    SynthError, TrajectorySpec,
};
use canopy_review::{serve, AppState, ReviewError, ReviewSession};
use clap::ArgMatches;
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Review(#[from] ReviewError),
    #[error("{0}")]
    Runtime(String),
}

fn read_text(path: &Path) -> Result<String, DatasetError> {
    std::fs::read_to_string(path).map_err(|e| DatasetError::Config(format!("{}: {e}", path.display())))
}

/// Defaults, then the dataset's `config.txt`, then `--config`, `--set`,
/// per-key flags and `--seed`, in that order.
fn load_config(m: &ArgMatches, layout: &DatasetLayout, keys: &[&str]) -> Result<RunConfig, DatasetError> {
    let mut cfg = RunConfig::default();
    let ds = layout.config();
    if ds.is_file() {
        merge_config(&mut cfg, &read_text(&ds)?)?;
    }
    if let Some(p) = m.get_one::<String>("config") {
        merge_config(&mut cfg, &read_text(Path::new(p))?)?;
    }
    for kv in m.get_many::<String>("set").into_iter().flatten() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| DatasetError::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v)?;
    }
    for key in keys {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    if let Some(seed) = m.get_one::<u64>("seed") {
        cfg.seed = *seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn get<T: Clone + Send + Sync + 'static>(m: &ArgMatches, name: &str) -> T {
    m.get_one::<T>(name).cloned().expect("argument has a default")
}

fn run_synth(m: &ArgMatches, layout: &DatasetLayout, cfg: &RunConfig) -> Result<(), CliError> {
    let scene_spec = SceneSpec {
        seed: cfg.seed,
        n_trees: get(m, "n-trees"),
        area: [get(m, "area-x"), get(m, "area-y")],
        area_start: get(m, "area-start"),
        diameter: [get(m, "min-diameter"), get(m, "max-diameter")],
        height: [get(m, "min-height"), get(m, "max-height")],
        min_spacing: get(m, "min-spacing"),
        ground_margin: get(m, "ground-margin"),
        corridor_half_width: get(m, "corridor-half-width"),
    };
    let traj_spec = TrajectorySpec {
        n_frames: get(m, "frames"),
        speed: get(m, "speed"),
        camera_height: get(m, "camera-height"),
        heading_sigma: get(m, "heading-sigma"),
        max_heading: get(m, "max-heading"),
        clearance: get(m, "clearance"),
        seed: cfg.seed,
    };
    let noise = NoiseModel {
        disparity_sigma: get(m, "disparity-sigma"),
        focal: get(m, "focal"),
        baseline: get(m, "baseline"),
        lateral_sigma: get(m, "lateral-sigma"),
        dropout_prob: get(m, "dropout"),
    };
    let opts = ExportOptions {
        intrinsics: cfg.camera.intrinsics,
        noise,
        render: RenderOptions { max_depth: get(m, "max-depth"), label_range: get(m, "label-range"), pixel_stride: get(m, "pixel-stride") },
        map: MapOptions {
            frame_stride: get(m, "map-stride"),
            max_range: get(m, "map-range"),
            voxel: get(m, "map-voxel"),
            noisy: m.get_flag("noisy-map").then_some(noise),
        },
        seed: cfg.seed,
    };
    let scene = generate_scene(&scene_spec)?;
    let traj = generate_trajectory(&scene, &traj_spec)?;
    export_dataset(&scene, &traj, &opts, &layout.root)?;
    println!("synth: {} trees, {} frames -> {}", scene.trees.len(), traj.len(), layout.root.display());
    Ok(())
}

fn run_review(m: &ArgMatches, layout: &DatasetLayout, cfg: &RunConfig) -> Result<(), CliError> {
    let host: IpAddr = get::<String>(m, "host")
        .parse()
        .map_err(|e| DatasetError::Config(format!("--host: {e}")))?;
    let addr = SocketAddr::new(host, get(m, "port"));
    let ui = m.get_one::<String>("ui").map(PathBuf::from);
    let session = ReviewSession::open(layout.clone())?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
    rt.block_on(serve(AppState::new(session, cfg.review_voxel), addr, ui))
        .map_err(|e| CliError::Runtime(format!("review service: {e}")))
}

fn run(name: &str, m: &ArgMatches) -> Result<(), CliError> {
    let layout = DatasetLayout::new(get::<String>(m, "dataset"));
    let cfg = load_config(m, &layout, cli::subcommand_keys(name))?;
    if let Some(n) = m.get_one::<usize>("threads") {
        rayon::ThreadPoolBuilder::new()
            .num_threads(*n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match name {
        "synth" => run_synth(m, &layout, &cfg)?,
        "segment" => {
            let seg = segment_dataset(&layout, &cfg)?;
            println!("segment: {} clusters", seg.clusters.len());
        }
        "sparsify" => {
            let (n_in, n_out) = sparsify_dataset(&layout, &cfg)?;
            println!("sparsify: {n_in} -> {n_out} points ({:.1}x)", n_in as f64 / n_out.max(1) as f64);
        }
        "label" => {
            let s = label_dataset(&layout, &cfg)?;
            println!("label: {} frames, {} boxes", s.frames, s.boxes);
        }
        "detect-baseline" => {
            let n = detect_dataset(&layout, &cfg)?;
            println!("detect-baseline: {n} detections");
        }
        "track" => {
            let dir = layout.resolve(Path::new(&get::<String>(m, "detections")));
            let n = track_dataset(&layout, &cfg, &dir)?;
            println!("track: {n} track boxes written");
        }
        "evaluate" => {
            let est = layout.resolve(Path::new(&get::<String>(m, "estimates")));
            let gt = layout.resolve(Path::new(&get::<String>(m, "gt")));
            let (stats, results) = evaluate_dirs(&layout, &est, &gt, &cfg)?;
            let csv = stats.to_csv();
            write_atomic(&layout.resolve(Path::new(&get::<String>(m, "report"))), csv.as_bytes())?;
            if let Some(d) = m.get_one::<String>("dump") {
                write_atomic(&layout.resolve(Path::new(d)), format_match_dump(&results).as_bytes())?;
            }
            print!("{csv}");
        }
        "review" => run_review(m, &layout, &cfg)?,
        other => unreachable!("unknown subcommand {other}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CANOPY_LOG", "info")).init();
    let matches = cli::command().get_matches();
    let (name, sub) = matches.subcommand().expect("a subcommand is required");
    match run(name, sub) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
