//! `wpres`: wave-packet, phase-shift and pole resonance analysis from one
//! config file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wpres_core::config::RunConfig;
use wpres_core::fit::Method;
use wpres_core::grid::RadialGrid;
use wpres_core::pipeline::{self, SpectrumKind};
use wpres_core::propagator::gaussian_packet;
use wpres_core::{Error, Result};

#[derive(Parser)]
#[command(name = "wpres", version, about = "Locate potential resonances by wave-packet projection, phase shifts and S-matrix poles")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration (defaults are used when omitted)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set window.epsilon_mev=0.0005`
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate the packet to each stop radius and write snapshots plus a run log
    Propagate,
    /// Survey and fine window spectra from snapshots
    Spectrum {
        /// Snapshot CSVs; defaults to the output directory's snapshots at the first stop radius
        #[arg(long = "snapshot")]
        snapshots: Vec<PathBuf>,
    },
    /// Lorentzian fits to fine spectra, merged into resonances.json
    Fit {
        /// Spectrum CSVs; defaults to every fine spectrum in the output directory
        #[arg(long = "spectrum")]
        spectra: Vec<PathBuf>,
    },
    /// Phase-shift scans and dδ/dE resonances
    Phase,
    /// S-matrix poles near the phase-shift resonances
    Poles,
    /// All three routes side by side
    Compare,
    /// Gnuplot script for a CSV artifact
    Plot {
        artifact: PathBuf,
        /// Resonance JSON whose Lorentzians are overlaid on a spectrum
        #[arg(long)]
        fits: Option<PathBuf>,
        /// Write the script here instead of stdout
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Print the effective configuration as TOML
    Config,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::InvalidArgument(_) | Error::Parse { .. } | Error::UnsupportedArtifact(_) => 2,
        Error::Json(_) => 2,
        Error::MissingArtifact(_) => 4,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 4,
        _ => 3,
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let cfg = RunConfig::load(common.config.as_deref(), &common.overrides)?;
    // identical bosons: only even partial waves exist
    if let Some((i, j)) = cfg.j_values.iter().enumerate().find(|(_, j)| *j % 2 == 1) {
        return Err(Error::Config {
            field: format!("j_values[{i}]"),
            message: format!("J = {j} is odd; identical spin-0 nuclei allow even J only"),
        });
    }
    Ok(cfg)
}

fn resonances_path(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.join("resonances.json")
}

fn propagate(cfg: &RunConfig) -> Result<()> {
    let model = cfg.potential_model()?;
    let dir = &cfg.output_dir;
    let mut log = Vec::new();
    for &j in &cfg.j_values {
        let p = pipeline::propagate_partial_wave(cfg, &model, j)?;
        for ((r, s), rec) in p.snapshots.iter().zip(&p.records) {
            let path = pipeline::snapshot_path(dir, j, *r);
            pipeline::write_snapshot(&path, j, *r, s)?;
            println!(
                "J={j} R={r} fm: {} steps, body at {:.2} fm, norm drift {:.2e}, <H> drift {:.2e} -> {}",
                rec.steps,
                rec.body_fm,
                rec.norm_drift,
                rec.energy_drift_rel,
                path.display()
            );
        }
        log.extend(p.records);
    }
    pipeline::write_json(&dir.join("run_log.json"), &log)
}

fn spectrum(cfg: &RunConfig, snapshots: &[PathBuf]) -> Result<()> {
    let model = cfg.potential_model()?;
    let paths: Vec<PathBuf> = if snapshots.is_empty() {
        let r = cfg.propagation.stop_radius_fm[0];
        cfg.j_values.iter().map(|&j| pipeline::snapshot_path(&cfg.output_dir, j, r)).collect()
    } else {
        snapshots.to_vec()
    };
    let spec = cfg.packet_spec()?;
    for path in &paths {
        let (j, stop, state) = pipeline::read_snapshot(path)?;
        let grid = RadialGrid::new(state.psi.grid.r_max(), state.psi.grid.n_points())?;
        let initial = gaussian_packet(&spec, &grid)?;
        for art in pipeline::spectra_for_snapshot(cfg, &model, j, &initial.psi, &state.psi, stop)? {
            let out = pipeline::spectrum_path(&cfg.output_dir, j, art.kind, art.spectrum.r_max);
            pipeline::write_spectrum(&out, &art)?;
            println!("J={j} {} spectrum, R_max {} fm -> {}", art.kind, art.spectrum.r_max, out.display());
        }
    }
    Ok(())
}

fn fine_spectra_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|_| Error::MissingArtifact(dir.to_path_buf()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("spectrum_") && n.contains("_fine_") && n.ends_with(".csv"))
        })
        .collect();
    v.sort();
    if v.is_empty() {
        return Err(Error::MissingArtifact(dir.join("spectrum_J*_fine_R*.csv")));
    }
    Ok(v)
}

fn fit(cfg: &RunConfig, spectra: &[PathBuf]) -> Result<()> {
    let paths = if spectra.is_empty() {
        fine_spectra_in(&cfg.output_dir)?
    } else {
        spectra.to_vec()
    };
    let mut found = Vec::new();
    for path in &paths {
        let art = pipeline::read_spectrum(path)?;
        if art.kind != SpectrumKind::Fine {
            log::warn!("{} is a survey spectrum; fitting it anyway", path.display());
        }
        let rep = pipeline::fit_spectrum(cfg, &art)?;
        let r = &rep.resonance;
        println!(
            "J={} R_max={} fm: E_R = {:.5} ± {:.1e} MeV, Gamma = {:.3} ± {:.3} keV (chi2red {:.3e})",
            r.j,
            art.spectrum.r_max,
            r.e_r,
            r.e_r_err,
            r.gamma_kev,
            r.gamma_err_kev,
            rep.chi2red
        );
        found.push(rep.resonance);
    }
    pipeline::merge_resonances(&resonances_path(cfg), &found)?;
    Ok(())
}

fn phase(cfg: &RunConfig) -> Result<()> {
    let model = cfg.potential_model()?;
    let mut found = Vec::new();
    for &j in &cfg.j_values {
        let curve = pipeline::phase_curve(cfg, &model, j)?;
        let path = pipeline::phase_path(&cfg.output_dir, j);
        pipeline::write_phase(&path, &curve)?;
        pipeline::write_potential(&pipeline::potential_path(&cfg.output_dir, j), &model, cfg, j, 30.0)?;
        let r = pipeline::phase_resonance(cfg, &model, &curve)?;
        println!("J={j}: E_R = {:.5} MeV, Gamma = {:.3} keV -> {}", r.e_r, r.gamma_kev, path.display());
        found.push(r);
    }
    pipeline::merge_resonances(&resonances_path(cfg), &found)?;
    Ok(())
}

fn poles(cfg: &RunConfig) -> Result<()> {
    let model = cfg.potential_model()?;
    let path = resonances_path(cfg);
    let known: Vec<wpres_core::fit::Resonance> = if path.exists() { pipeline::read_json(&path)? } else { Vec::new() };
    let mut found = Vec::new();
    for &j in &cfg.j_values {
        let near = match known.iter().find(|r| r.j == j && r.method == Method::PhaseShift) {
            Some(r) => *r,
            None => {
                let curve = pipeline::phase_curve(cfg, &model, j)?;
                pipeline::phase_resonance(cfg, &model, &curve)?
            }
        };
        let r = pipeline::pole_resonance(cfg, &model, j, &near)?;
        println!("J={j}: pole at E_R = {:.5} MeV, Gamma = {:.3} keV", r.e_r, r.gamma_kev);
        found.push(r);
    }
    pipeline::merge_resonances(&path, &found)?;
    Ok(())
}

fn compare(cfg: &RunConfig) -> Result<()> {
    let c = pipeline::run_compare(cfg)?;
    let table = c.format_table();
    pipeline::write_json(&cfg.output_dir.join("comparison.json"), &c)?;
    pipeline::write_text(&cfg.output_dir.join("comparison.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn plot(artifact: &Path, fits: Option<&Path>, output: Option<&Path>) -> Result<()> {
    let script = pipeline::plot_script(artifact, fits)?;
    match output {
        Some(p) => pipeline::write_text(p, &script),
        None => {
            print!("{script}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Plot { artifact, fits, output } = &cli.command {
        return plot(artifact, fits.as_deref(), output.as_deref());
    }
    let cfg = load_config(&cli.common)?;
    match &cli.command {
        Command::Propagate => propagate(&cfg),
        Command::Spectrum { snapshots } => spectrum(&cfg, snapshots),
        Command::Fit { spectra } => fit(&cfg, spectra),
        Command::Phase => phase(&cfg),
        Command::Poles => poles(&cfg),
        Command::Compare => compare(&cfg),
        Command::Config => {
            print!("{}", cfg.to_toml());
            Ok(())
        }
        Command::Plot { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
