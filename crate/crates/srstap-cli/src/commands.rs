//! Command implementations. Every command is deterministic under a fixed
//! seed and configuration, and every CSV embeds the resolved config hash.

use crate::config::ExperimentConfig;
use crate::snapfile;
use srstap::estimators::{capon_spectrum, lsmi};
use srstap::harness::{
    convergence_rate, range_scan, run_convergence, run_mismatch_sweep, Method,
};
use srstap::jointsr::{joint_recover, simple_average, PowerSpectrum};
use srstap::l1solver::solve_bpdn;
use srstap::scenario::{inject_target, simulate_snapshots, SnapshotSet};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) | CliError::Output { .. } => 4,
        }
    }
}

impl From<snapfile::SnapFileError> for CliError {
    fn from(e: snapfile::SnapFileError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

/// Buffered CSV sink: a file when `--output` is given, stdout otherwise.
fn open_sink(output: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match output {
        Some(p) => {
            let f = std::fs::File::create(p).map_err(|source| CliError::Output {
                path: p.display().to_string(),
                source,
            })?;
            Ok(Box::new(std::io::BufWriter::new(f)))
        }
        None => Ok(Box::new(std::io::BufWriter::new(std::io::stdout()))),
    }
}

fn write_preamble(
    w: &mut dyn Write,
    cfg: &ExperimentConfig,
    command: &str,
) -> std::io::Result<()> {
    writeln!(w, "# srstap {command}")?;
    writeln!(w, "# config_hash={}", cfg.digest())?;
    let p = cfg.params();
    writeln!(
        w,
        "# radar: N={} M={} v={} pri={} lambda={} d={} crab={} noise={}",
        p.n_sensors,
        p.n_pulses,
        p.velocity,
        p.pri,
        p.wavelength,
        p.spacing,
        p.crab_angle_deg,
        p.noise_power
    )?;
    writeln!(
        w,
        "# clutter: extent=[{},{}]deg scatters={} cnr={}dB | grid: rho_s={} rho_d={}",
        cfg.clutter.azimuth_min,
        cfg.clutter.azimuth_max,
        cfg.clutter.n_scatters,
        cfg.clutter.cnr_db,
        cfg.grid.rho_s,
        cfg.grid.rho_d
    )?;
    writeln!(
        w,
        "# solver: epsilon={:.6e} max_iters={} tol={:.1e} rho={}",
        cfg.bpdn().epsilon,
        cfg.solver.max_iters,
        cfg.solver.tol,
        cfg.solver.rho
    )?;
    writeln!(w, "# seed={}", cfg.experiment.seed)?;
    Ok(())
}

fn sink_io(e: std::io::Error) -> CliError {
    CliError::Output {
        path: "<output>".into(),
        source: e,
    }
}

/// Simulate snapshots, optionally inject the configured target, and write
/// the snapshot file plus a sidecar metadata file.
pub fn simulate(cfg: &ExperimentConfig, output: Option<&Path>) -> Result<(), CliError> {
    let output =
        output.ok_or_else(|| CliError::Config("simulate requires --output <path>".into()))?;
    let scenario = cfg.scenario();
    let mut xs = simulate_snapshots(&scenario, cfg.simulate.snapshots, cfg.experiment.seed)
        .map_err(|e| CliError::Config(e.to_string()))?;
    if cfg.simulate.inject_target {
        xs = inject_target(
            &xs,
            &scenario.params,
            &cfg.target_spec(),
            cfg.simulate.target_cell,
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
    }
    snapfile::write(
        output,
        scenario.params.n_sensors,
        scenario.params.n_pulses,
        &xs.data,
    )?;

    let meta_path = output.with_extension("meta.toml");
    let mut meta = String::new();
    meta.push_str(&format!("config_hash = \"{}\"\n", cfg.digest()));
    meta.push_str(&format!("seed = {}\n", cfg.experiment.seed));
    meta.push_str(&format!("snapshots = {}\n", cfg.simulate.snapshots));
    meta.push_str(&format!("label = \"{}\"\n", xs.label));
    meta.push_str(&format!(
        "inject_target = {}\ntarget_cell = {}\n",
        cfg.simulate.inject_target, cfg.simulate.target_cell
    ));
    std::fs::write(&meta_path, meta).map_err(|source| CliError::Output {
        path: meta_path.display().to_string(),
        source,
    })?;
    Ok(())
}

fn load_snapshots(
    cfg: &ExperimentConfig,
    input: Option<&Path>,
) -> Result<SnapshotSet, CliError> {
    let input =
        input.ok_or_else(|| CliError::Config("this command requires --input <path>".into()))?;
    let (n, m, data) = snapfile::read(input)?;
    let p = cfg.params();
    if n != p.n_sensors || m != p.n_pulses {
        return Err(CliError::Data(format!(
            "snapshot file is {n} sensors x {m} pulses but the config says {} x {}",
            p.n_sensors, p.n_pulses
        )));
    }
    Ok(SnapshotSet::from_data(
        data,
        cfg.experiment.seed,
        &format!("file:{}", input.display()),
    ))
}

fn power_rows(
    w: &mut dyn Write,
    method: &str,
    spec: &PowerSpectrum,
    prf: f64,
) -> std::io::Result<()> {
    let db = spec.db_rel_peak();
    for (cell, value) in db.iter().enumerate() {
        let (a, d) = spec.grid.cell_coords(cell);
        let angle = spec.grid.angle_nodes_deg[a];
        let doppler_norm = spec.grid.doppler_nodes_hz[d] / prf;
        match value {
            Some(v) => writeln!(
                w,
                "{method},{angle:.6},{doppler_norm:.6},{v:.6}"
            )?,
            None => writeln!(w, "{method},{angle:.6},{doppler_norm:.6},-999")?,
        }
    }
    Ok(())
}

/// Angle-Doppler spectra from a snapshot file, one CSV row per grid cell per
/// method, dB relative to each method's peak (empty cells -999).
pub fn spectrum(
    cfg: &ExperimentConfig,
    input: Option<&Path>,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let xs = load_snapshots(cfg, input)?;
    let setup = cfg.setup()?;
    let prf = setup.scenario.params.prf();
    let bpdn = cfg.bpdn();

    let mut w = open_sink(output)?;
    write_preamble(&mut *w, cfg, "spectrum").map_err(sink_io)?;
    writeln!(w, "# input snapshots: {}", xs.n_snapshots()).map_err(sink_io)?;
    writeln!(w, "method,angle_deg,doppler_norm,power_db").map_err(sink_io)?;

    for name in &cfg.spectrum.methods {
        match name.as_str() {
            "capon" => {
                let r = lsmi(&xs, setup.beta_l);
                let spec = capon_spectrum(&r, &setup.dict).map_err(numerical)?;
                power_rows(&mut *w, name, &spec, prf).map_err(sink_io)?;
            }
            "sr-single" => {
                let alpha = solve_bpdn(&setup.dict, xs.data.column(0), &bpdn)
                    .map_err(numerical)?;
                let spec = PowerSpectrum {
                    power: alpha.power(),
                    grid: setup.dict.grid.clone(),
                    n_snapshots: 1,
                };
                power_rows(&mut *w, name, &spec, prf).map_err(sink_io)?;
            }
            "sr-average" => {
                let spec = simple_average(&setup.dict, &xs, &bpdn).map_err(numerical)?;
                power_rows(&mut *w, name, &spec, prf).map_err(sink_io)?;
            }
            "sr-joint" => {
                let spec = joint_recover(&setup.dict, &xs, setup.sparsity, &bpdn)
                    .map_err(numerical)?;
                power_rows(&mut *w, name, &spec, prf).map_err(sink_io)?;
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown spectrum method '{other}' (expected capon|sr-single|sr-average|sr-joint)"
                )))
            }
        }
    }
    w.flush().map_err(sink_io)?;
    Ok(())
}

/// Monte Carlo IF_Loss versus snapshot count, plus a convergence-rate
/// summary block.
pub fn convergence(cfg: &ExperimentConfig, output: Option<&Path>) -> Result<(), CliError> {
    let setup = cfg.setup()?;
    let methods = cfg.methods()?;
    let curves = run_convergence(
        &setup,
        &methods,
        &cfg.experiment.snapshot_counts,
        cfg.experiment.trials,
        cfg.experiment.seed,
    )
    .map_err(numerical)?;

    let mut w = open_sink(output)?;
    write_preamble(&mut *w, cfg, "convergence").map_err(sink_io)?;
    writeln!(
        w,
        "# trials={} | IF_Loss averaged in linear power domain, dB at reporting",
        cfg.experiment.trials
    )
    .map_err(sink_io)?;
    writeln!(w, "method,snapshots,mean_ifloss_db,trials,excluded").map_err(sink_io)?;
    for curve in &curves {
        for (i, &l) in curve.snapshot_counts.iter().enumerate() {
            writeln!(
                w,
                "{},{},{:.6},{},{}",
                curve.method, l, curve.mean_ifloss_db[i], curve.trials, curve.excluded[i]
            )
            .map_err(sink_io)?;
        }
    }
    for curve in &curves {
        match convergence_rate(curve) {
            Some(rate) => writeln!(w, "# convergence_rate,{},{}", curve.method, rate),
            None => writeln!(w, "# convergence_rate,{},inf", curve.method),
        }
        .map_err(sink_io)?;
    }
    w.flush().map_err(sink_io)?;
    Ok(())
}

/// IF_Loss versus an assumed-parameter value at fixed snapshot count.
pub fn sweep(cfg: &ExperimentConfig, output: Option<&Path>) -> Result<(), CliError> {
    let setup = cfg.setup()?;
    let methods = cfg.methods()?;
    let parameter = cfg.sweep_parameter()?;
    let result = run_mismatch_sweep(
        &setup,
        &methods,
        parameter,
        &cfg.experiment.sweep_values,
        cfg.experiment.sweep_snapshots,
        cfg.experiment.trials,
        cfg.experiment.seed,
    )
    .map_err(numerical)?;

    let mut w = open_sink(output)?;
    write_preamble(&mut *w, cfg, "sweep").map_err(sink_io)?;
    writeln!(
        w,
        "# parameter={} snapshots={} trials={} | linear-domain averaging",
        result.parameter.tag(),
        result.snapshots,
        result.trials
    )
    .map_err(sink_io)?;
    writeln!(
        w,
        "method,{},mean_ifloss_db,trials,excluded",
        result.parameter.tag()
    )
    .map_err(sink_io)?;
    for (mi, method) in result.methods.iter().enumerate() {
        for (vi, value) in result.values.iter().enumerate() {
            writeln!(
                w,
                "{},{},{:.6},{},{}",
                method, value, result.mean_ifloss_db[mi][vi], result.trials,
                result.excluded[mi][vi]
            )
            .map_err(sink_io)?;
        }
    }
    w.flush().map_err(sink_io)?;
    Ok(())
}

/// Sliding-window adaptive range scan over a snapshot file.
pub fn rangescan(
    cfg: &ExperimentConfig,
    input: Option<&Path>,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let xs = load_snapshots(cfg, input)?;
    let setup = cfg.setup()?;
    let methods: Vec<Method> = cfg
        .rangescan
        .methods
        .iter()
        .map(|m| {
            m.parse::<Method>()
                .map_err(|e| CliError::Config(e.to_string()))
        })
        .collect::<Result<_, _>>()?;

    let mut w = open_sink(output)?;
    write_preamble(&mut *w, cfg, "rangescan").map_err(sink_io)?;
    writeln!(
        w,
        "# window={} guards={} cells={}",
        cfg.rangescan.window,
        cfg.rangescan.guards,
        xs.n_snapshots()
    )
    .map_err(sink_io)?;
    writeln!(w, "method,cell,power_db").map_err(sink_io)?;
    for method in methods {
        let profile = range_scan(
            &setup,
            &xs,
            method,
            cfg.rangescan.window,
            cfg.rangescan.guards,
        )
        .map_err(numerical)?;
        for (cell, db) in profile.iter().enumerate() {
            writeln!(w, "{method},{cell},{db:.6}").map_err(sink_io)?;
        }
    }
    w.flush().map_err(sink_io)?;
    Ok(())
}
