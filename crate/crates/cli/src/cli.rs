//! Command-line definition.

use canopy_core::io::CONFIG_KEYS;
use canopy_core::synth::{MapOptions, NoiseModel, RenderOptions, SceneSpec, TrajectorySpec};
use clap::{value_parser, Arg, ArgAction, Command};

/// Config keys each subcommand exposes as `--name value` flags.
pub fn subcommand_keys(name: &str) -> &'static [&'static str] {
    match name {
        "synth" => &["camera.fx", "camera.fy", "camera.cx", "camera.cy", "camera.width", "camera.height"],
        "segment" => &[
            "ransac.iterations",
            "ransac.threshold",
            "ground.margin",
            "dbscan.eps",
            "dbscan.min_samples",
            "dbscan.min_cluster_points",
        ],
        "sparsify" => &["sparsify.lines", "sparsify.elev_min", "sparsify.elev_max", "sparsify.azimuth_res", "sparsify.max_range"],
        "label" => &["sparsify.max_range"],
        "detect-baseline" => &[
            "baseline.ransac_iterations",
            "baseline.min_cluster_points",
            "baseline.input",
            "ransac.threshold",
            "ground.margin",
            "dbscan.eps",
            "dbscan.min_samples",
        ],
        "track" => &[
            "tracker.q_x",
            "tracker.q_y",
            "tracker.q_w",
            "tracker.r_x",
            "tracker.r_y",
            "tracker.r_w",
            "tracker.gate_prob",
            "tracker.min_hits",
            "tracker.max_age",
            "tracker.fov_exit_frames",
            "tracker.max_range",
        ],
        "evaluate" => &["eval.cutoff", "eval.bin_width", "eval.max_range"],
        "review" => &["review.voxel"],
        _ => &[],
    }
}

/// `tracker.min_hits` -> `min-hits`.
pub fn flag_name(key: &str) -> String {
    key.rsplit('.').next().unwrap_or(key).replace('_', "-")
}

fn key_arg(key: &'static str) -> Arg {
    let help = CONFIG_KEYS.iter().find(|k| k.key == key).map_or("", |k| k.help);
    Arg::new(key)
        .long(flag_name(key))
        .value_name("VALUE")
        .help(format!("{help} [config: {key}]"))
}

fn common_args(cmd: Command) -> Command {
    cmd.arg(
        Arg::new("dataset")
            .long("dataset")
            .value_name("DIR")
            .required(true)
            .help("dataset directory"),
    )
    .arg(
        Arg::new("config")
            .long("config")
            .value_name("PATH")
            .help("configuration file, applied on top of the dataset's config.txt"),
    )
    .arg(Arg::new("seed").long("seed").value_name("N").value_parser(value_parser!(u64)).help("random seed [config: seed]"))
    .arg(
        Arg::new("threads")
            .long("threads")
            .value_name("N")
            .value_parser(value_parser!(usize))
            .help("worker thread cap (default: all cores)"),
    )
    .arg(
        Arg::new("set")
            .long("set")
            .value_name("KEY=VALUE")
            .action(ArgAction::Append)
            .help("override any config key, e.g. --set dbscan.eps=0.12"),
    )
}

fn num_arg<T: Clone + Send + Sync + std::fmt::Display + 'static>(name: &'static str, help: &'static str, default: T) -> Arg
where
    T: std::str::FromStr,
    <T as std::str::FromStr>::Err: std::error::Error + Send + Sync + 'static,
{
    Arg::new(name)
        .long(name)
        .value_name("VALUE")
        .value_parser(|s: &str| s.parse::<T>().map_err(|e| e.to_string()))
        .default_value(default.to_string())
        .help(help)
}

fn synth_command() -> Command {
    let s = SceneSpec::default();
    let t = TrajectorySpec::default();
    let n = NoiseModel::default();
    let r = RenderOptions::default();
    let m = MapOptions::default();
    Command::new("synth")
        .about("Generate a synthetic forest dataset")
        .arg(num_arg("n-trees", "number of trees", s.n_trees))
        .arg(num_arg("area-x", "forest length along the path (m)", s.area[0]))
        .arg(num_arg("area-y", "forest width across the path (m)", s.area[1]))
        .arg(num_arg("area-start", "distance from the start to the forest edge (m)", s.area_start))
        .arg(num_arg("min-diameter", "smallest trunk diameter (m)", s.diameter[0]))
        .arg(num_arg("max-diameter", "largest trunk diameter (m)", s.diameter[1]))
        .arg(num_arg("min-height", "smallest trunk height (m)", s.height[0]))
        .arg(num_arg("max-height", "largest trunk height (m)", s.height[1]))
        .arg(num_arg("min-spacing", "minimum distance between trunk centers (m)", s.min_spacing))
        .arg(num_arg("ground-margin", "ground extent beyond the forest (m)", s.ground_margin))
        .arg(num_arg("corridor-half-width", "half-width of the tree-free path (m)", s.corridor_half_width))
        .arg(num_arg("frames", "number of frames", t.n_frames))
        .arg(num_arg("speed", "distance per frame (m)", t.speed))
        .arg(num_arg("camera-height", "camera height above ground (m)", t.camera_height))
        .arg(num_arg("heading-sigma", "per-frame heading noise (rad)", t.heading_sigma))
        .arg(num_arg("max-heading", "largest heading deviation (rad)", t.max_heading))
        .arg(num_arg("clearance", "minimum camera distance to any trunk (m)", t.clearance))
        .arg(num_arg("disparity-sigma", "disparity noise (px)", n.disparity_sigma))
        .arg(num_arg("focal", "focal length of the stereo noise model (px)", n.focal))
        .arg(num_arg("baseline", "stereo baseline (m)", n.baseline))
        .arg(num_arg("lateral-sigma", "lateral point jitter (m)", n.lateral_sigma))
        .arg(num_arg("dropout", "per-point dropout probability", n.dropout_prob))
        .arg(num_arg("max-depth", "render depth limit (m)", r.max_depth))
        .arg(num_arg("label-range", "ground-truth visibility range (m)", r.label_range))
        .arg(num_arg("pixel-stride", "render every n-th pixel", r.pixel_stride))
        .arg(num_arg("map-stride", "fuse every n-th frame into the global map", m.frame_stride))
        .arg(num_arg("map-range", "global map point range limit (m)", m.max_range))
        .arg(num_arg("map-voxel", "global map voxel size (m)", m.voxel))
        .arg(
            Arg::new("noisy-map")
                .long("noisy-map")
                .action(ArgAction::SetTrue)
                .help("fuse noisy frames into the global map instead of exact samples"),
        )
}

pub fn command() -> Command {
    let subcommands = [
        synth_command(),
        Command::new("segment").about("Ground removal and clustering of global_map.ply"),
        Command::new("sparsify").about("Reduce dense clouds to scan lines"),
        Command::new("label").about("Per-frame labels from the committed clusters"),
        Command::new("detect-baseline").about("Cluster-only detector on single frames"),
        Command::new("track").about("Track detections over the trajectory").arg(
            Arg::new("detections")
                .long("detections")
                .value_name("DIR")
                .default_value("detections")
                .help("detection directory, relative to the dataset"),
        ),
        Command::new("evaluate")
            .about("Match estimates to ground truth and report range-binned statistics")
            .arg(
                Arg::new("estimates")
                    .long("estimates")
                    .value_name("DIR")
                    .default_value("tracks")
                    .help("estimate label directory, relative to the dataset"),
            )
            .arg(
                Arg::new("gt")
                    .long("gt")
                    .value_name("DIR")
                    .default_value("gt_labels")
                    .help("ground-truth label directory, relative to the dataset"),
            )
            .arg(
                Arg::new("report")
                    .long("report")
                    .value_name("PATH")
                    .default_value("eval_report.csv")
                    .help("CSV report path, relative to the dataset"),
            )
            .arg(Arg::new("dump").long("dump").value_name("PATH").help("per-frame match dump, relative to the dataset")),
        Command::new("review")
            .about("Serve the cluster review API")
            .arg(
                Arg::new("port")
                    .long("port")
                    .value_name("PORT")
                    .value_parser(value_parser!(u16))
                    .default_value("8080")
                    .help("TCP port"),
            )
            .arg(Arg::new("host").long("host").value_name("ADDR").default_value("127.0.0.1").help("bind address"))
            .arg(Arg::new("ui").long("ui").value_name("DIR").help("directory with the review UI's built assets")),
    ];
    let mut cmd = Command::new("canopy")
        .about("Tree labeling, clustering and tracking on stereo point clouds")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for sub in subcommands {
        let name = sub.get_name().to_string();
        let sub = subcommand_keys(&name).iter().fold(common_args(sub), |c, k| c.arg(key_arg(k)));
        cmd = cmd.subcommand(sub);
    }
    cmd
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_is_well_formed() {
        command().debug_assert();
    }

    #[test]
    fn every_key_flag_is_a_known_key() {
        for sub in command().get_subcommands() {
            for k in subcommand_keys(sub.get_name()) {
                assert!(CONFIG_KEYS.iter().any(|c| c.key == *k), "{k}");
            }
        }
        assert_eq!(flag_name("tracker.min_hits"), "min-hits");
    }
}
