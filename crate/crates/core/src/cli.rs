//! Command-line front end. Each subcommand is a thin layer over the library:
//! it resolves the effective [`RunConfig`], calls the module operation and
//! writes CSV output plus a `.config.json` echo next to it.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{
    bin_by_visibility, binned_table, filter_scores, relative_pose_error, rpe_table, RpeNormalizer, Scores, VisibilityPoint,
};
use crate::filters::{dror, dsor, random_subsample, ror, sor, sweep_dsor, FilterMask, SweepScene};
use crate::geometry::Trajectory;
use crate::grid::WindowMode;
use crate::io::{
    format_float, load_pointcloud, load_scan_sequence, load_trajectory, read_csv_table, read_labels, write_atomic, write_csv,
    write_labels, write_pointcloud, write_raw_xyzi, write_trajectory, Cell, CloudFormat, IntensityScale, Label, LidarPoint, Table,
};
use crate::sim::{simulate_sequence, Exposure, LabeledScan, SceneSpec, StormSpec};
use crate::visibility::{timeseries_table, visibility_timeseries, EstimateStatus, StreamingVisibility, VisibilityEstimate, Weighting};

#[derive(Debug, Parser)]
#[command(name = "snowvis", version, about = "Lidar visibility in snowfall, snow filters and trajectory error evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate p-visibility over time from a scan manifest.
    Visibility(VisibilityArgs),
    /// Apply one snow filter to a point cloud.
    Filter(FilterArgs),
    /// Generate labeled synthetic snowstorm scans.
    Simulate(SimulateArgs),
    /// Windowed relative pose error between two trajectories.
    Rpe(RpeArgs),
    /// Bin per-window errors by visibility.
    Correlate(CorrelateArgs),
    /// Run DSOR over a grid of (s, r) values.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON configuration; flags override it and it overrides the defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WindowArg {
    Centered,
    Causal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightingArg {
    Observations,
    Uniform,
}

#[derive(Debug, Args)]
pub struct VisibilityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Scan manifest CSV `timestamp,path[,pose]`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Trajectory file `t tx ty tz qx qy qz qw` placing the scans.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Probability threshold p [method default: 0.5].
    #[arg(long)]
    pub p: Option<f64>,
    /// Averaging radius around the sensor, m [method default: 5].
    #[arg(long)]
    pub radius: Option<f64>,
    /// Time window tau, s [method default: 1].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Grid cell size, m [method default: 0.1].
    #[arg(long)]
    pub cell_size: Option<f64>,
    /// Grid half extent, m [default: 25].
    #[arg(long)]
    pub half_extent: Option<f64>,
    /// Collision area A_c, m² [method default: 0.16].
    #[arg(long)]
    pub collision_area: Option<f64>,
    /// Beam aperture, degrees [method default: 0.085].
    #[arg(long)]
    pub aperture_deg: Option<f64>,
    /// Half height of the z strip, m [method default: 0.5].
    #[arg(long)]
    pub strip_half_height: Option<f64>,
    /// Spacing of estimates, s [default: 1].
    #[arg(long)]
    pub step: Option<f64>,
    /// Window placement [method default: centered; causal with --follow].
    #[arg(long, value_enum)]
    pub window: Option<WindowArg>,
    /// Cell weighting of the local mean [default: observations].
    #[arg(long, value_enum)]
    pub weighting: Option<WeightingArg>,
    /// Exclude cells whose hit ratio exceeds this value (0.95 is a sensible choice) [default: off].
    #[arg(long)]
    pub persistent_hit_ratio: Option<f64>,
    /// Process scans as they are appended to the manifest, with the causal window.
    #[arg(long)]
    pub follow: bool,
    /// With --follow, stop after this many seconds without new scans.
    #[arg(long, default_value_t = 10.0)]
    pub idle_timeout: f64,
    /// With --follow, manifest polling interval in seconds.
    #[arg(long, default_value_t = 0.2)]
    pub poll_interval: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterName {
    Ror,
    Sor,
    Dror,
    Dsor,
    Subsample,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Input cloud (.pcd, .bin or .xyzi).
    #[arg(long)]
    pub input: PathBuf,
    /// Filter to apply.
    #[arg(long, value_enum, required_unless_present_any = ["ror", "sor", "dror", "dsor", "subsample"])]
    pub filter: Option<FilterName>,
    /// Same as `--filter ror`.
    #[arg(long, conflicts_with_all = ["filter", "sor", "dror", "dsor", "subsample"])]
    pub ror: bool,
    /// Same as `--filter sor`.
    #[arg(long, conflicts_with_all = ["filter", "dror", "dsor", "subsample"])]
    pub sor: bool,
    /// Same as `--filter dror`.
    #[arg(long, conflicts_with_all = ["filter", "dsor", "subsample"])]
    pub dror: bool,
    /// Same as `--filter dsor`.
    #[arg(long, conflicts_with_all = ["filter", "subsample"])]
    pub dsor: bool,
    /// Same as `--filter subsample`.
    #[arg(long, conflicts_with_all = ["filter"])]
    pub subsample: bool,
    /// ROR search radius, m [default: 0.1].
    #[arg(long)]
    pub radius: Option<f64>,
    /// ROR/DROR minimum neighbor count [default: 5 for ROR, 3 for DROR].
    #[arg(long)]
    pub min_neighbors: Option<usize>,
    /// SOR/DSOR neighbor count k [default: 10 for SOR, 5 for DSOR].
    #[arg(long)]
    pub k: Option<usize>,
    /// SOR/DSOR standard deviation multiplier; accepts `inf` [default: 1.0 for SOR, 0.01 for DSOR].
    #[arg(long)]
    pub s: Option<f64>,
    /// DSOR range multiplier; accepts `inf` [default: 0.05].
    #[arg(long)]
    pub r: Option<f64>,
    /// DROR azimuth resolution, degrees [default: 0.2].
    #[arg(long)]
    pub azimuth_res_deg: Option<f64>,
    /// DROR radius multiplier [default: 3].
    #[arg(long)]
    pub multiplier: Option<f64>,
    /// DROR minimum search radius, m [default: 0.04].
    #[arg(long)]
    pub min_radius: Option<f64>,
    /// Fraction kept by random subsampling [method default: 0.7].
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Mask CSV path [default: `<out stem>.mask.csv`].
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Per-point label CSV; adds precision and recall to the config echo.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

impl FilterArgs {
    fn name(&self) -> FilterName {
        let flags = [
            (self.ror, FilterName::Ror),
            (self.sor, FilterName::Sor),
            (self.dror, FilterName::Dror),
            (self.dsor, FilterName::Dsor),
            (self.subsample, FilterName::Subsample),
        ];
        self.filter.or_else(|| flags.iter().find(|f| f.0).map(|f| f.1)).expect("clap enforces a filter choice")
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExposureArg {
    Sector,
    Footprint,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Scene JSON (walls, sensor path, lidar) [default: open scene, static sensor].
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Storm JSON (density, region, exposure, gusts).
    #[arg(long, required_unless_present = "lambda")]
    pub storm: Option<PathBuf>,
    /// Constant density in flakes/m², instead of --storm.
    #[arg(long, conflicts_with = "storm")]
    pub lambda: Option<f64>,
    /// Beam exposure model, overriding the storm file.
    #[arg(long, value_enum)]
    pub exposure: Option<ExposureArg>,
    /// Number of scans, overriding the scene file.
    #[arg(long)]
    pub n_scans: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormalizerArg {
    PathLength,
    Displacement,
}

#[derive(Debug, Args)]
pub struct RpeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Ground-truth trajectory `t tx ty tz qx qy qz qw`.
    #[arg(long)]
    pub gt: PathBuf,
    /// Estimated trajectory in the same format.
    #[arg(long)]
    pub est: PathBuf,
    /// Window duration, s [method default: 1].
    #[arg(long)]
    pub window: Option<f64>,
    /// Timestamp association tolerance, s [default: 0.05].
    #[arg(long)]
    pub association_tolerance: Option<f64>,
    /// Minimum ground-truth travel per window, m [default: 0.1].
    #[arg(long)]
    pub min_travel: Option<f64>,
    /// Denominator of the percent error [default: path-length].
    #[arg(long, value_enum)]
    pub normalizer: Option<NormalizerArg>,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Per-window RPE CSV written by `rpe`.
    #[arg(long)]
    pub rpe: PathBuf,
    /// Visibility CSV written by `visibility`.
    #[arg(long)]
    pub vis: PathBuf,
    /// Bin width, m [method default: 2.2].
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Pairing tolerance, s [default: 0.5].
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Input clouds; repeat for several scenes.
    #[arg(long = "input", conflicts_with_all = ["scene", "storm"])]
    pub inputs: Vec<PathBuf>,
    /// Label CSVs aligned with --input, one per cloud.
    #[arg(long = "labels")]
    pub labels: Vec<PathBuf>,
    /// Scene JSON for simulated labeled scans.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Storm JSON for simulated labeled scans.
    #[arg(long)]
    pub storm: Option<PathBuf>,
    /// Comma separated s values; `inf` allowed.
    #[arg(long, value_delimiter = ',', required = true)]
    pub s_values: Vec<f64>,
    /// Comma separated r values; `inf` allowed.
    #[arg(long, value_delimiter = ',', required = true)]
    pub r_values: Vec<f64>,
    /// Neighbor count k [default: 5].
    #[arg(long)]
    pub k: Option<usize>,
}

/// Parse `std::env::args` and run. Returns the process exit code.
pub fn main_with_args() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) => 2,
                _ => 1,
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Visibility(a) => cmd_visibility(&a),
        Command::Filter(a) => cmd_filter(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Rpe(a) => cmd_rpe(&a),
        Command::Correlate(a) => cmd_correlate(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    }
}

fn base_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

/// `<out>.config.json`, or `<dir>/config.json` when `out` is a directory.
pub fn echo_path(out: &Path) -> PathBuf {
    if out.is_dir() {
        return out.join("config.json");
    }
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".config.json");
    out.with_file_name(name)
}

fn write_echo(out: &Path, value: serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(&value).expect("json value serializes") + "\n";
    write_atomic(&echo_path(out), text.as_bytes())?;
    Ok(())
}

fn config_value(cfg: &RunConfig) -> serde_json::Value {
    serde_json::from_str(&cfg.to_json()).expect("config json parses")
}

pub fn resolve_visibility_config(a: &VisibilityArgs) -> Result<RunConfig> {
    let mut cfg = base_config(&a.common)?;
    set(&mut cfg.p, a.p);
    set(&mut cfg.averaging_radius, a.radius);
    set(&mut cfg.window_tau, a.tau);
    set(&mut cfg.cell_size, a.cell_size);
    set(&mut cfg.half_extent, a.half_extent);
    set(&mut cfg.collision_area, a.collision_area);
    set(&mut cfg.aperture_deg, a.aperture_deg);
    set(&mut cfg.strip_half_height, a.strip_half_height);
    set(&mut cfg.step, a.step);
    if let Some(w) = a.window {
        cfg.window_mode = match w {
            WindowArg::Centered => WindowMode::Centered,
            WindowArg::Causal => WindowMode::Causal,
        };
    }
    if a.follow {
        cfg.window_mode = WindowMode::Causal;
    }
    if let Some(w) = a.weighting {
        cfg.weighting = match w {
            WeightingArg::Observations => Weighting::Observations,
            WeightingArg::Uniform => Weighting::Uniform,
        };
    }
    if a.persistent_hit_ratio.is_some() {
        cfg.persistent_hit_ratio = a.persistent_hit_ratio;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_visibility(a: &VisibilityArgs) -> Result<()> {
    let cfg = resolve_visibility_config(a)?;
    let trajectory = a.trajectory.as_deref().map(load_trajectory).transpose()?;
    let series = if a.follow {
        follow_manifest(a, &cfg)?
    } else {
        let scans = load_scan_sequence(&a.manifest, trajectory.as_ref())?.collect_all()?;
        visibility_timeseries(&scans, trajectory.as_ref(), &cfg.grid(), &cfg.beam(), &cfg.visibility(), cfg.step)?
    };
    write_csv(&timeseries_table(&series), &a.common.out)?;
    write_echo(&a.common.out, json!({ "command": "visibility", "config": config_value(&cfg), "follow": a.follow }))
}

/// Poll the manifest, feed new scans to a causal streaming estimator and
/// rewrite the output after every batch, until no scan arrives for
/// `idle_timeout` seconds.
fn follow_manifest(a: &VisibilityArgs, cfg: &RunConfig) -> Result<Vec<VisibilityEstimate<f64>>> {
    let mut stream = StreamingVisibility::new(cfg.grid(), cfg.beam(), cfg.visibility(), cfg.step)?;
    let trajectory = a.trajectory.as_deref().map(load_trajectory).transpose()?;
    let base = a.manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut consumed = 0usize;
    let mut series = Vec::new();
    let mut last_new = Instant::now();
    loop {
        let text = std::fs::read_to_string(&a.manifest).unwrap_or_default();
        // ignore a trailing line that is still being written
        let complete = match text.rfind('\n') {
            Some(i) => &text[..=i],
            None => "",
        };
        let rows = crate::io::parse_manifest_rows(complete, &a.manifest, &base, trajectory.as_ref())?;
        if rows.len() > consumed {
            for row in &rows[consumed..] {
                let scan = load_pointcloud(&row.path, row.format, Some(row.timestamp))?.with_pose(row.pose);
                series.extend(stream.push(scan)?);
            }
            consumed = rows.len();
            write_csv(&timeseries_table(&series), &a.common.out)?;
            last_new = Instant::now();
        } else if last_new.elapsed() >= Duration::from_secs_f64(a.idle_timeout.max(0.0)) {
            break;
        }
        std::thread::sleep(Duration::from_secs_f64(a.poll_interval.max(0.01)));
    }
    if consumed == 0 {
        return Err(crate::visibility::VisibilityError::NoScans.into());
    }
    series.extend(stream.finish()?);
    Ok(series)
}

pub fn resolve_filter_config(a: &FilterArgs) -> Result<RunConfig> {
    let mut cfg = base_config(&a.common)?;
    match a.name() {
        FilterName::Ror => {
            set(&mut cfg.ror.radius, a.radius);
            set(&mut cfg.ror.min_neighbors, a.min_neighbors);
        }
        FilterName::Sor => {
            set(&mut cfg.sor.k, a.k);
            set(&mut cfg.sor.s, a.s);
        }
        FilterName::Dror => {
            set(&mut cfg.dror.azimuth_res, a.azimuth_res_deg.map(f64::to_radians));
            set(&mut cfg.dror.multiplier, a.multiplier);
            set(&mut cfg.dror.min_radius, a.min_radius);
            set(&mut cfg.dror.min_neighbors, a.min_neighbors);
        }
        FilterName::Dsor => {
            set(&mut cfg.dsor.k, a.k);
            set(&mut cfg.dsor.s, a.s);
            set(&mut cfg.dsor.r, a.r);
        }
        FilterName::Subsample => set(&mut cfg.subsample_fraction, a.fraction),
    }
    Ok(cfg)
}

/// Mask of the named filter with the parameters in `cfg`.
pub fn apply_filter(name: FilterName, cloud: &[LidarPoint], cfg: &RunConfig) -> Result<FilterMask> {
    Ok(match name {
        FilterName::Ror => ror(cloud, &cfg.ror)?,
        FilterName::Sor => sor(cloud, &cfg.sor)?,
        FilterName::Dror => dror(cloud, &cfg.dror)?,
        FilterName::Dsor => dsor(cloud, &cfg.dsor)?,
        FilterName::Subsample => random_subsample(cloud.len(), cfg.subsample_fraction, cfg.seed)?,
    })
}

fn cloud_format(path: &Path) -> Result<CloudFormat> {
    CloudFormat::from_path(path)
        .ok_or_else(|| Error::Usage(format!("{}: unknown cloud extension (expected .pcd, .bin or .xyzi)", path.display())))
}

/// Default mask path: `<out stem>.mask.csv` beside the output.
pub fn default_mask_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.mask.csv"))
}

fn mask_table(mask: &FilterMask) -> Table {
    let mut table = Table::new(["inlier"]);
    for &k in mask.inliers() {
        table.push(vec![Cell::Int(k as i64)]);
    }
    table
}

fn scores_value(s: &Scores) -> serde_json::Value {
    json!({ "precision": s.precision, "recall": s.recall, "f1": s.f1 })
}

pub fn cmd_filter(a: &FilterArgs) -> Result<()> {
    let name = a.name();
    let cfg = resolve_filter_config(a)?;
    let in_format = cloud_format(&a.input)?;
    let out_format = cloud_format(&a.common.out)?;
    let scan = load_pointcloud(&a.input, in_format, Some(0.0))?;
    let mask = apply_filter(name, &scan.points, &cfg)?;
    write_pointcloud(&mask.apply(&scan.points), &a.common.out, out_format)?;
    let mask_path = a.mask.clone().unwrap_or_else(|| default_mask_path(&a.common.out));
    write_csv(&mask_table(&mask), &mask_path)?;
    let scores = match &a.labels {
        Some(path) => Some(filter_scores(&mask, &read_labels(path)?)?),
        None => None,
    };
    write_echo(
        &a.common.out,
        json!({
            "command": "filter",
            "filter": format!("{name:?}").to_lowercase(),
            "config": config_value(&cfg),
            "input": a.input,
            "mask": mask_path,
            "kept": mask.kept(),
            "removed": mask.removed(),
            "scores": scores.as_ref().map(scores_value),
        }),
    )
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn resolve_storm(storm: Option<&Path>, lambda: Option<f64>, exposure: Option<ExposureArg>, cfg: &RunConfig, seed: Option<u64>) -> Result<StormSpec> {
    let mut spec = match (storm, lambda) {
        (Some(path), _) => read_json::<StormSpec>(path)?,
        (None, Some(l)) => StormSpec::constant(l, cfg.seed),
        (None, None) => return Err(Error::Usage("give --storm or --lambda".into())),
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    match exposure {
        Some(ExposureArg::Sector) => spec.exposure = Exposure::Sector,
        Some(ExposureArg::Footprint) => spec.exposure = Exposure::Footprint { area: cfg.collision_area, cell_size: cfg.cell_size },
        None => {}
    }
    spec.validate()?;
    Ok(spec)
}

/// Write labeled scans as `scan_NNNNNN.bin` plus label sidecars, a manifest
/// with inline poses and the sensor trajectory.
pub fn write_simulation(dir: &Path, scans: &[LabeledScan]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| crate::io::LoadError::io(dir, e))?;
    let mut manifest = String::from("timestamp,path,pose\n");
    for (i, s) in scans.iter().enumerate() {
        let cloud = format!("scan_{i:06}.bin");
        write_atomic(&dir.join(&cloud), &write_raw_xyzi(&s.scan.points))?;
        write_labels(&s.labels, dir.join(format!("scan_{i:06}.labels.csv")))?;
        let t = s.scan.sensor_pose.translation.vector;
        let q = s.scan.sensor_pose.rotation.quaternion().coords;
        let pose = [t.x, t.y, t.z, q.x, q.y, q.z, q.w].map(format_float).join(" ");
        manifest.push_str(&format!("{},{cloud},{pose}\n", format_float(s.scan.timestamp)));
    }
    write_atomic(&dir.join("manifest.csv"), manifest.as_bytes())?;
    if let Some(traj) = Trajectory::new(scans.iter().map(|s| s.scan.timestamp).collect(), scans.iter().map(|s| s.scan.sensor_pose).collect()) {
        write_trajectory(&traj, dir.join("trajectory.txt"))?;
    }
    Ok(())
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let cfg = base_config(&a.common)?;
    let mut scene = match &a.scene {
        Some(path) => read_json::<SceneSpec>(path)?,
        None => SceneSpec::default(),
    };
    set(&mut scene.n_scans, a.n_scans);
    scene.validate()?;
    let storm = resolve_storm(a.storm.as_deref(), a.lambda, a.exposure, &cfg, a.common.seed)?;
    let scans = simulate_sequence(&scene, &storm)?;
    write_simulation(&a.common.out, &scans)?;
    let snow: usize = scans.iter().map(LabeledScan::snow_count).sum();
    let points: usize = scans.iter().map(|s| s.labels.len()).sum();
    let span = (scans.first().map(|s| s.scan.timestamp), scans.last().map(|s| s.scan.timestamp));
    write_echo(
        &a.common.out,
        json!({
            "command": "simulate",
            "scene": scene,
            "storm": storm,
            "scans": scans.len(),
            "time_span": [span.0, span.1],
            "points": points,
            "snow_points": snow,
        }),
    )
}

pub fn cmd_rpe(a: &RpeArgs) -> Result<()> {
    let mut cfg = base_config(&a.common)?;
    set(&mut cfg.rpe.window, a.window);
    set(&mut cfg.rpe.association_tolerance, a.association_tolerance);
    set(&mut cfg.rpe.min_travel, a.min_travel);
    if let Some(n) = a.normalizer {
        cfg.rpe.normalizer = match n {
            NormalizerArg::PathLength => RpeNormalizer::PathLength,
            NormalizerArg::Displacement => RpeNormalizer::Displacement,
        };
    }
    let gt = load_trajectory(&a.gt)?;
    let est = load_trajectory(&a.est)?;
    let result = relative_pose_error(&gt, &est, &cfg.rpe)?;
    write_csv(&rpe_table(&result), &a.common.out)?;
    let summary = result.summary.map(|s| json!({ "count": s.count, "median": s.median, "q1": s.q1, "q3": s.q3, "mean": s.mean }));
    write_echo(
        &a.common.out,
        json!({
            "command": "rpe",
            "config": config_value(&cfg),
            "windows": result.windows.len(),
            "excluded_low_travel": result.excluded_low_travel,
            "unassociated": result.unassociated,
            "trans_error_pct": summary,
        }),
    )
}

fn column(header: &[String], name: &str, path: &Path) -> Result<usize> {
    header.iter().position(|h| h == name).ok_or_else(|| Error::Usage(format!("{}: missing column '{name}'", path.display())))
}

fn parse_num(v: &str, path: &Path, row: usize) -> Result<f64> {
    v.parse().map_err(|_| Error::Usage(format!("{}: row {row}: '{v}' is not a number", path.display())))
}

/// `(t, trans_error_pct)` pairs from an `rpe` CSV.
pub fn read_rpe_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let (header, rows) = read_csv_table(path)?;
    let (ct, ce) = (column(&header, "t", path)?, column(&header, "trans_error_pct", path)?);
    rows.iter().enumerate().map(|(i, r)| Ok((parse_num(&r[ct], path, i + 1)?, parse_num(&r[ce], path, i + 1)?))).collect()
}

/// Visibility samples from a `visibility` CSV.
pub fn read_visibility_csv(path: &Path) -> Result<Vec<VisibilityPoint>> {
    let (header, rows) = read_csv_table(path)?;
    let (ct, cv, cf) = (column(&header, "t", path)?, column(&header, "v_p", path)?, column(&header, "flag", path)?);
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            let status = EstimateStatus::parse(&r[cf])
                .ok_or_else(|| Error::Usage(format!("{}: row {}: unknown flag '{}'", path.display(), i + 1, r[cf])))?;
            let v_p = if r[cv].is_empty() { None } else { Some(parse_num(&r[cv], path, i + 1)?) };
            Ok(VisibilityPoint { t: parse_num(&r[ct], path, i + 1)?, v_p, status })
        })
        .collect()
}

pub fn cmd_correlate(a: &CorrelateArgs) -> Result<()> {
    let mut cfg = base_config(&a.common)?;
    set(&mut cfg.bin_width, a.bin_width);
    set(&mut cfg.association_tolerance, a.tolerance);
    let errors = read_rpe_csv(&a.rpe)?;
    let vis = read_visibility_csv(&a.vis)?;
    let binned = bin_by_visibility(&errors, &vis, cfg.bin_width, cfg.association_tolerance)?;
    write_csv(&binned_table(&binned), &a.common.out)?;
    write_echo(
        &a.common.out,
        json!({
            "command": "correlate",
            "config": config_value(&cfg),
            "paired": binned.paired,
            "skipped_gaps": binned.skipped_gaps,
            "unpaired": binned.unpaired,
        }),
    )
}

fn opt(v: Option<f64>) -> Cell {
    v.into()
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let mut cfg = base_config(&a.common)?;
    set(&mut cfg.dsor.k, a.k);
    let mut clouds: Vec<Vec<LidarPoint>> = Vec::new();
    let mut labels: Vec<Option<Vec<Label>>> = Vec::new();
    let mut source = json!(null);
    if !a.inputs.is_empty() {
        if !a.labels.is_empty() && a.labels.len() != a.inputs.len() {
            return Err(Error::Usage(format!("{} inputs but {} label files", a.inputs.len(), a.labels.len())));
        }
        for (i, path) in a.inputs.iter().enumerate() {
            clouds.push(crate::io::load_pointcloud_with(path, cloud_format(path)?, Some(0.0), IntensityScale::Auto)?.points);
            labels.push(a.labels.get(i).map(read_labels).transpose()?);
        }
        source = json!({ "inputs": a.inputs, "labels": a.labels });
    } else if let Some(storm_path) = &a.storm {
        let scene = match &a.scene {
            Some(path) => read_json::<SceneSpec>(path)?,
            None => SceneSpec::default(),
        };
        let storm = resolve_storm(Some(storm_path), None, None, &cfg, a.common.seed)?;
        for s in simulate_sequence(&scene, &storm)? {
            clouds.push(s.scan.points);
            labels.push(Some(s.labels));
        }
        source = json!({ "scene": scene, "storm": storm });
    }
    if clouds.is_empty() {
        return Err(Error::Usage("give --input clouds or a --storm to simulate".into()));
    }
    let scenes: Vec<SweepScene<'_>> =
        clouds.iter().zip(&labels).map(|(c, l)| SweepScene { cloud: c, labels: l.as_deref() }).collect();
    let result = sweep_dsor(&scenes, &a.s_values, &a.r_values, cfg.dsor.k)?;
    let mut table = Table::new(["s", "r", "kept_fraction", "precision", "recall", "f1", "best"]);
    for (i, row) in result.rows.iter().enumerate() {
        let sc = row.scores.unwrap_or_default();
        table.push(vec![
            row.s.into(),
            row.r.into(),
            row.kept_fraction.into(),
            opt(sc.precision),
            opt(sc.recall),
            opt(sc.f1),
            Cell::Int((result.best == Some(i)) as i64),
        ]);
    }
    write_csv(&table, &a.common.out)?;
    let best = result.best.map(|i| json!({ "s": result.rows[i].s.to_string(), "r": result.rows[i].r.to_string() }));
    write_echo(&a.common.out, json!({ "command": "sweep", "config": config_value(&cfg), "k": result.k, "source": source, "best": best }))
}
