//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use cplass_core::experiments::{
    consistency_trend, gamma_sweep, power_grid, score_profile, score_surface_2cp, type3_demo, ConsistencySpec,
    GammaSweepSpec, PowerGridSpec, Type3Spec,
};
use cplass_core::seed;
use cplass_core::simulate::{
    simulate_piecewise, simulate_two_state, PiecewiseTruth, Simulated, SwitchingScheme, TwoStateParams,
};
use cplass_core::stats::{
    bootstrap_ensemble, csa, default_grid, kde_grid, max_speed_ecdf, silverman_bandwidth, weighted_kde, Curve,
    SegmentPool, Statistic,
};
use cplass_core::{cplass, ChangepointVector, McmcConfig, ScoreConfig};

use crate::args::*;
use crate::error::{CliError, Result};
use crate::io::{
    read_segmentations, read_trajectory, trace_csv, trajectory_csv, write_text, SegmentationFile, Table,
};
use crate::manifest::{write_with_manifest, RunManifest};

pub struct Context {
    /// Arguments after the program name, recorded in manifests.
    pub args: Vec<String>,
}

impl Context {
    fn manifest(&self, command: &str) -> RunManifest {
        RunManifest::new(command, &self.args)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn execute(cmd: Command, ctx: &Context) -> Result<()> {
    match cmd {
        Command::Simulate(SimulateCmd::Piecewise(a)) => simulate_piecewise_cmd(a, ctx),
        Command::Simulate(SimulateCmd::TwoState(a)) => simulate_two_state_cmd(a, ctx),
        Command::Detect(a) => detect(a, ctx),
        Command::ScoreProfile(a) => profile(a, ctx),
        Command::ScoreSurface(a) => surface(a, ctx),
        Command::Csa(a) => csa_cmd(a, ctx),
        Command::Ecdf(a) => ecdf_cmd(a, ctx),
        Command::Wkde(a) => wkde_cmd(a, ctx),
        Command::Experiment(e) => experiment(e, ctx),
    }
}

fn piecewise_truth(a: &PiecewiseArgs) -> Result<PiecewiseTruth> {
    let mut truth = match a.preset {
        Some(PiecewisePreset::CrossingDiagonals) => PiecewiseTruth::crossing_diagonals(),
        Some(PiecewisePreset::ShortRun) => PiecewiseTruth::short_run(a.sigma.unwrap_or(0.05)),
        Some(PiecewisePreset::ShortPanel) => PiecewiseTruth::short_panel(),
        Some(PiecewisePreset::LongPanel) => PiecewiseTruth::long_panel(),
        Some(PiecewisePreset::Stationary) => PiecewiseTruth::stationary(a.n.unwrap_or(53)),
        Some(PiecewisePreset::FlankedRun) => {
            let (Some(duration), Some(speed)) = (a.duration, a.speed) else {
                return Err(usage("flanked-run needs --duration and --speed"));
            };
            PiecewiseTruth::flanked_run(duration, speed)?
        }
        Some(PiecewisePreset::FixedHorizon) => PiecewiseTruth::fixed_horizon(a.n.unwrap_or(400))?,
        None => {
            let (Some(dt), Some(n), Some(sigma)) = (a.dt, a.n, a.sigma) else {
                return Err(usage("a custom truth needs --dt, --n and --sigma (or choose --preset)"));
            };
            if a.speeds.len() != a.tau.len() + 1 {
                return Err(usage(format!("{} changepoints need {} speeds", a.tau.len(), a.tau.len() + 1)));
            }
            if a.dim == 1 {
                let v = a.speeds.iter().map(|&s| vec![s]).collect();
                PiecewiseTruth::new(a.tau.clone(), v, vec![0.0], sigma, dt, n)?
            } else {
                PiecewiseTruth::planar(a.tau.clone(), &a.speeds, sigma, dt, n)?
            }
        }
    };
    if let Some(s) = a.sigma {
        truth.sigma = s;
        truth.validate()?;
    }
    Ok(truth)
}

fn write_simulation(sim: &Simulated, out: &Path, truth: Option<&Path>, manifest: &RunManifest) -> Result<()> {
    write_with_manifest(out, &trajectory_csv(&sim.trajectory), manifest)?;
    if let Some(p) = truth {
        write_with_manifest(p, &SegmentationFile::new("truth", &sim.truth).to_json(), manifest)?;
    }
    Ok(())
}

fn simulate_piecewise_cmd(a: PiecewiseArgs, ctx: &Context) -> Result<()> {
    let truth = piecewise_truth(&a)?;
    let sim = simulate_piecewise(&truth, a.seed)?;
    write_simulation(&sim, &a.out, a.truth.as_deref(), &ctx.manifest("simulate piecewise").with_seed(a.seed))
}

fn simulate_two_state_cmd(a: TwoStateArgs, ctx: &Context) -> Result<()> {
    let TwoStatePreset::Base = a.preset;
    let scheme = match a.scheme {
        Scheme::PerSegment => SwitchingScheme::PerSegment,
        Scheme::PerStep => SwitchingScheme::PerStep,
    };
    let mut params = TwoStateParams::base().with_scheme(scheme);
    if let Some(n) = a.n {
        params.n = n;
    }
    params.validate()?;
    let sim = simulate_two_state(&params, a.seed)?;
    write_simulation(&sim, &a.out, a.truth.as_deref(), &ctx.manifest("simulate two-state").with_seed(a.seed))
}

fn checked_configs(score: &ScoreArgs, mcmc: &McmcArgs) -> Result<(ScoreConfig, McmcConfig)> {
    let (s, m) = (score.config(), mcmc.config());
    s.validate().map_err(|e| usage(e.to_string()))?;
    m.validate().map_err(|e| usage(e.to_string()))?;
    Ok((s, m))
}

/// Runs one detection and writes its outputs.
fn detect_one(
    input: &Path,
    out: &Path,
    trace: Option<&Path>,
    cfg: &ScoreConfig,
    mcfg: &McmcConfig,
    timing: bool,
    ctx: &Context,
) -> Result<()> {
    let start = Instant::now();
    let traj = read_trajectory(input)?;
    let det = cplass(&traj, cfg, mcfg)?;
    let mut file = SegmentationFile::new("detection", &det.segmentation);
    file.changepoints = Some(det.changepoints.indices());
    file.score = Some(det.score.into());
    file.config = Some(crate::io::ConfigJson { score: cfg.clone(), mcmc: mcfg.clone() });
    file.seed = Some(mcfg.seed);
    let mut manifest = ctx.manifest("detect").with_configs(cfg, mcfg).with_inputs(&[input.to_path_buf()])?;
    if timing {
        manifest.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
    }
    write_with_manifest(out, &file.to_json(), &manifest)?;
    if let Some(t) = trace {
        write_with_manifest(t, &trace_csv(&det.trace), &manifest)?;
    }
    Ok(())
}

/// CSV files of a directory, sorted by file name.
fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let p = entry.map_err(|e| CliError::io(dir, e))?.path();
        if p.is_file() && p.extension().is_some_and(|x| x == "csv") {
            files.push(p);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

fn detect(a: DetectArgs, ctx: &Context) -> Result<()> {
    let (cfg, mcfg) = checked_configs(&a.score, &a.mcmc)?;
    if !a.input.is_dir() {
        return detect_one(&a.input, &a.out, a.trace.as_deref(), &cfg, &mcfg, a.timing, ctx);
    }
    let files = csv_files(&a.input)?;
    if files.is_empty() {
        return Err(CliError::Parse { path: a.input.clone(), line: 0, msg: "no .csv files in directory".into() });
    }
    files
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let stem = f.file_stem().expect("csv file has a name").to_string_lossy().into_owned();
            let m = mcfg.clone().with_seed(seed::derive(mcfg.seed, &[i as u64]));
            let out = a.out.join(format!("{stem}.json"));
            let trace = a.trace.as_ref().map(|d| d.join(format!("{stem}.trace.csv")));
            detect_one(f, &out, trace.as_deref(), &cfg, &m, a.timing, ctx)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

fn profile(a: ProfileArgs, ctx: &Context) -> Result<()> {
    let cfg = a.score.config();
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if a.stride == 0 {
        return Err(usage("--stride must be at least 1"));
    }
    let traj = read_trajectory(&a.input)?;
    let base = ChangepointVector::from_indices(traj.n(), &a.base)?;
    let indices: Vec<usize> = (1..traj.n()).step_by(a.stride).collect();
    let prof = score_profile(&traj, &base, &indices, &cfg)?;
    let mut table = Table::new(&["index", "time", "score", "score_minus_base"])
        .comment(format!("base_score: {}", crate::io::fmt_number(prof.base_score)));
    for &(i, s) in &prof.points {
        table.push_numbers(&[i as f64, traj.grid_time(i), s, s - prof.base_score]);
    }
    let manifest = ctx.manifest("score-profile").with_inputs(&[a.input.clone()])?;
    let mut manifest = manifest;
    manifest.score_config = Some(cfg);
    write_with_manifest(&a.out, &table.render(), &manifest)
}

fn surface(a: SurfaceArgs, ctx: &Context) -> Result<()> {
    let cfg = a.score.config();
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    if a.stride == 0 {
        return Err(usage("--stride must be at least 1"));
    }
    let traj = read_trajectory(&a.input)?;
    let surf = score_surface_2cp(&traj, a.stride, &cfg)?;
    let mut table = Table::new(&["i", "j", "tau_i", "tau_j", "score_minus_empty"])
        .comment(format!("empty_score: {}", crate::io::fmt_number(surf.baseline)));
    for (x, row) in surf.values.iter().enumerate() {
        for (y, v) in row.iter().enumerate() {
            if let Some(v) = v {
                let (i, j) = (surf.indices[x], surf.indices[y]);
                table.push_numbers(&[i as f64, j as f64, traj.grid_time(i), traj.grid_time(j), *v]);
            }
        }
    }
    let mut manifest = ctx.manifest("score-surface").with_inputs(&[a.input.clone()])?;
    manifest.score_config = Some(cfg);
    write_with_manifest(&a.out, &table.render(), &manifest)
}

fn band_quantiles(level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(usage(format!("--level must lie in (0, 1), got {level}")));
    }
    let tail = (1.0 - level) / 2.0;
    Ok((tail, 1.0 - tail))
}

/// Point curve plus optional bootstrap band as a table.
fn curve_table(name: &str, point: &Curve, band: Option<(Vec<f64>, Vec<f64>)>) -> Table {
    let mut header = vec!["speed".to_string(), name.to_string()];
    if band.is_some() {
        header.extend(["band_lo".to_string(), "band_hi".to_string()]);
    }
    let mut table = Table::new(&header);
    for (i, (&s, &v)) in point.grid.iter().zip(&point.values).enumerate() {
        let mut row = vec![s, v];
        if let Some((lo, hi)) = &band {
            row.extend([lo[i], hi[i]]);
        }
        table.push_numbers(&row);
    }
    table
}

fn csa_cmd(a: CsaArgs, ctx: &Context) -> Result<()> {
    let (qlo, qhi) = band_quantiles(a.level)?;
    let segs = read_segmentations(&a.inputs)?;
    let pool = SegmentPool::from_segmentations(&segs)?;
    let grid = default_grid(pool.max_speed());
    let point = csa(&pool, &grid)?;
    let band = if a.boot > 0 {
        Some(bootstrap_ensemble(&segs, &Statistic::Csa { grid }, a.boot, a.seed)?.band(qlo, qhi))
    } else {
        None
    };
    let table = curve_table("csa", &point, band).comment(format!("paths: {}, resamples: {}", segs.len(), a.boot));
    let manifest = ctx.manifest("csa").with_inputs(&a.inputs)?.with_seed(a.seed);
    write_with_manifest(&a.out, &table.render(), &manifest)
}

fn ecdf_cmd(a: EcdfArgs, ctx: &Context) -> Result<()> {
    let (qlo, qhi) = band_quantiles(a.level)?;
    let segs = read_segmentations(&a.inputs)?;
    let ecdf = max_speed_ecdf(&segs, a.min_duration)?;
    let top = ecdf.sample().iter().cloned().fold(0.0, f64::max);
    let grid = default_grid(top);
    let point = ecdf.on_grid(&grid);
    let band = if a.boot > 0 {
        let stat = Statistic::MaxSpeedEcdf { min_duration: a.min_duration, grid };
        Some(bootstrap_ensemble(&segs, &stat, a.boot, a.seed)?.band(qlo, qhi))
    } else {
        None
    };
    let table = curve_table("ecdf", &point, band)
        .comment(format!("paths with a sustained segment: {} of {}", ecdf.len(), segs.len()));
    let manifest = ctx.manifest("ecdf").with_inputs(&a.inputs)?.with_seed(a.seed);
    write_with_manifest(&a.out, &table.render(), &manifest)
}

fn wkde_cmd(a: WkdeArgs, ctx: &Context) -> Result<()> {
    let segs = read_segmentations(&a.inputs)?;
    let pool = SegmentPool::from_segmentations(&segs)?;
    let h = match a.bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(usage(format!("--bandwidth must be positive, got {h}"))),
        None => silverman_bandwidth(&pool)?,
    };
    let kde = weighted_kde(&pool, h, &kde_grid(&pool, h))?;
    let mut table = Table::new(&["speed", "density"]).comment(format!("bandwidth: {h}"));
    for (s, v) in kde.grid.iter().zip(&kde.values) {
        table.push_numbers(&[*s, *v]);
    }
    write_with_manifest(&a.out, &table.render(), &ctx.manifest("wkde").with_inputs(&a.inputs)?)
}

fn write_experiment<T: serde::Serialize>(
    output: &ExperimentOut,
    table: Table,
    result: &T,
    manifest: &RunManifest,
) -> Result<()> {
    write_with_manifest(&output.out, &table.render(), manifest)?;
    if let Some(p) = &output.json {
        let mut s = serde_json::to_string_pretty(result).expect("serializable");
        s.push('\n');
        write_text(p, &s)?;
        write_text(&crate::manifest::sidecar_path(p), &manifest.to_json())?;
    }
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, crate::io::fmt_number)
}

fn experiment(cmd: ExperimentCmd, ctx: &Context) -> Result<()> {
    match cmd {
        ExperimentCmd::GammaSweep { panel, reps, gammas, score, mcmc, output } => {
            let (cfg, mcfg) = checked_configs(&score, &mcmc)?;
            let mut spec = match panel {
                Panel::Short => GammaSweepSpec::short_panel(reps),
                Panel::Long => GammaSweepSpec::long_panel(reps),
            };
            if !gammas.is_empty() {
                spec.gammas = gammas;
            }
            if let Some(g) = spec.gammas.iter().find(|g| !(**g > 1.0)) {
                return Err(usage(format!("every gamma must exceed 1, got {g}")));
            }
            let res = gamma_sweep(&spec, &cfg, &mcfg)?;
            let mut table = Table::new(&["gamma", "speed_penalty", "detection_rate", "false_positive_rate"]);
            for r in &res.rows {
                table.push_numbers(&[r.gamma, r.speed_penalty as u8 as f64, r.detection_rate, r.false_positive_rate]);
            }
            write_experiment(&output, table, &res, &ctx.manifest("experiment gamma-sweep").with_configs(&cfg, &mcfg))
        }
        ExperimentCmd::PowerGrid { reps, durations, speeds, score, mcmc, output } => {
            let (cfg, mcfg) = checked_configs(&score, &mcmc)?;
            let mut spec = PowerGridSpec::full(reps);
            if !durations.is_empty() {
                spec.durations = durations;
            }
            if !speeds.is_empty() {
                spec.speeds = speeds;
            }
            let res = power_grid(&spec, &cfg, &mcfg)?;
            let mut table = Table::new(&["duration", "speed", "p_correct"]);
            for (a, &d) in res.durations.iter().enumerate() {
                for (b, &s) in res.speeds.iter().enumerate() {
                    table.push_numbers(&[d, s, res.p_correct[a][b]]);
                }
            }
            write_experiment(&output, table, &res, &ctx.manifest("experiment power-grid").with_configs(&cfg, &mcfg))
        }
        ExperimentCmd::Consistency { n_values, reps, score, mcmc, output } => {
            let (cfg, mcfg) = checked_configs(&score, &mcmc)?;
            let res = consistency_trend(&ConsistencySpec { n_values, replicates: reps }, &cfg, &mcfg)?;
            let mut table = Table::new(&["n", "iterations", "correct_fraction", "median_location_error"]);
            for r in &res.rows {
                table.push(vec![
                    r.n.to_string(),
                    r.iterations.to_string(),
                    crate::io::fmt_number(r.correct_fraction),
                    opt(r.median_location_error),
                ]);
            }
            write_experiment(&output, table, &res, &ctx.manifest("experiment consistency").with_configs(&cfg, &mcfg))
        }
        ExperimentCmd::Type3Demo { chains, cap, sigma, path_seed, score, mcmc, output } => {
            let (cfg, mcfg) = checked_configs(&score, &mcmc)?;
            let spec = Type3Spec { truth: PiecewiseTruth::short_run(sigma), path_seed, chains, cap, ..Type3Spec::standard() };
            let res = type3_demo(&spec, &cfg, &mcfg)?;
            let mut table = Table::new(&["chain", "full_first_hit", "restricted_first_hit"])
                .comment(format!(
                    "scores: empty {}, first {}, second {}, pair {}",
                    res.score_empty, res.score_first, res.score_second, res.score_pair
                ))
                .comment(format!("medians: full {}, restricted {}", res.full_median, res.restricted_median));
            for (i, (f, r)) in res.full_hits.iter().zip(&res.restricted_hits).enumerate() {
                table.push(vec![i.to_string(), f.to_string(), r.to_string()]);
            }
            write_experiment(&output, table, &res, &ctx.manifest("experiment type3-demo").with_configs(&cfg, &mcfg))
        }
    }
}
