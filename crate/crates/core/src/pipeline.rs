//! End-to-end runs driven by a [`RunConfig`]: propagation snapshots,
//! spectra, fits, phase shifts, poles and the cross-method comparison, with
//! their file formats.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fit::{fit_lorentzian, peak_window, FitReport, Method, Resonance};
use crate::grid::{extend, interior_part, GridFunction, RadialGrid};
use crate::hamiltonian::DiscreteHamiltonian;
use crate::potential::{find_barrier, total_potential, BarrierInfo, PotentialModel};
use crate::propagator::{
    body_position, gaussian_packet, propagate_until, start_beyond_turning_point, StopCondition, WavePacketState,
};
use crate::stationary::{
    find_pole, phase_shift, resonance_from_phase, s_matrix_samples, PhaseShiftCurve,
};
use crate::window::{density_function, EnergySpectrum, Normalization, WindowProjector, WindowSpec, WINDOW_ORDER};

/// Run-log entry for one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    #[serde(rename = "J")]
    pub j: u32,
    pub stop_radius_fm: f64,
    pub steps: usize,
    pub elapsed_s: f64,
    pub body_fm: f64,
    pub norm_drift: f64,
    pub energy_drift_rel: f64,
    pub barrier_radius_fm: f64,
    pub chebyshev_terms: usize,
}

/// Initial packet and outbound snapshots for one partial wave.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub j: u32,
    pub barrier: BarrierInfo,
    pub initial: WavePacketState,
    /// (𝓡, state), in the order of the configured radii.
    pub snapshots: Vec<(f64, WavePacketState)>,
    pub records: Vec<SnapshotRecord>,
}

pub fn propagate_partial_wave(cfg: &RunConfig, model: &PotentialModel, j: u32) -> Result<Propagation> {
    let params = cfg.system;
    let barrier = find_barrier(model, &params, j)?;
    let grid = RadialGrid::new(cfg.grid.r_max_fm, cfg.grid.n_points)?;
    let h = DiscreteHamiltonian::new(grid, model, &params, j);
    let spec = cfg.packet_spec()?;
    let initial = gaussian_packet(&spec, &grid)?;
    let _ = start_beyond_turning_point(&spec, &h);
    let prop = cfg.propagation_spec();
    let terms = crate::propagator::ChebyshevPropagator::new(&h, &prop)?.order() + 1;
    let e0 = h.expectation(&initial.psi)?;
    let mut radii = cfg.propagation.stop_radius_fm.clone();
    radii.sort_by(f64::total_cmp);
    let mut state = initial.clone();
    let mut taken = Vec::new();
    for &r in &radii {
        state = propagate_until(
            state,
            &h,
            &prop,
            StopCondition::Outbound {
                radius: r,
                r_exterior: barrier.radius,
            },
        )?;
        taken.push((r, state.clone()));
    }
    let mut snapshots = Vec::new();
    let mut records = Vec::new();
    for &r in &cfg.propagation.stop_radius_fm {
        let (_, s) = taken.iter().find(|(x, _)| *x == r).expect("radius was propagated");
        records.push(SnapshotRecord {
            j,
            stop_radius_fm: r,
            steps: s.step_count,
            elapsed_s: s.elapsed_time,
            body_fm: body_position(s, barrier.radius)?,
            norm_drift: s.psi.norm() - 1.0,
            energy_drift_rel: (h.expectation(&s.psi)? - e0) / e0,
            barrier_radius_fm: barrier.radius,
            chebyshev_terms: terms,
        });
        snapshots.push((r, s.clone()));
    }
    Ok(Propagation {
        j,
        barrier,
        initial,
        snapshots,
        records,
    })
}

/// Survey or fine spectrum of one partial wave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumArtifact {
    #[serde(rename = "J")]
    pub j: u32,
    pub kind: SpectrumKind,
    pub stop_radius_fm: f64,
    pub spectrum: EnergySpectrum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    Survey,
    Fine,
}

impl std::fmt::Display for SpectrumKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SpectrumKind::Survey => "survey",
            SpectrumKind::Fine => "fine",
        })
    }
}

fn argmax(y: &[f64]) -> Option<usize> {
    y.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
}

/// Effective spectra of the snapshot's interior part (R below the J barrier):
/// a survey on the propagation grid, then fine bins around the survey peak on
/// every analysis grid (zero-padded, no re-propagation).
pub fn spectra_for_snapshot(
    cfg: &RunConfig,
    model: &PotentialModel,
    j: u32,
    initial: &GridFunction,
    snapshot: &GridFunction,
    stop_radius: f64,
) -> Result<Vec<SpectrumArtifact>> {
    let params = cfg.system;
    let barrier = find_barrier(model, &params, j)?;
    let interior = interior_part(snapshot, barrier.radius)?;
    let w = &cfg.window;
    let h = DiscreteHamiltonian::new(snapshot.grid, model, &params, j);
    let proj = WindowProjector::new(&h, w.solver)?;
    let survey_spec = WindowSpec::new(w.survey_epsilon_mev, w.survey_e_lo_mev, w.survey_e_hi_mev)?;
    let survey = proj.effective_spectrum(&interior, initial, &survey_spec)?;
    let d = density_function(&survey);
    let imax = argmax(&d.y).ok_or_else(|| Error::DegenerateInput("empty survey spectrum".into()))?;
    let (lo, hi) = peak_window(&d, imax, w.fine_span_fwhm);
    let mut out = vec![SpectrumArtifact {
        j,
        kind: SpectrumKind::Survey,
        stop_radius_fm: stop_radius,
        spectrum: survey,
    }];
    let fine_spec = WindowSpec::new(w.epsilon_mev, lo.max(w.epsilon_mev), hi)?;
    for &r_max in &w.analysis_r_max_fm {
        let inner = extend(&interior, r_max)?;
        let psi0 = extend(initial, r_max)?;
        let h2 = DiscreteHamiltonian::new(inner.grid, model, &params, j);
        let proj2 = WindowProjector::new(&h2, w.solver)?;
        out.push(SpectrumArtifact {
            j,
            kind: SpectrumKind::Fine,
            stop_radius_fm: stop_radius,
            spectrum: proj2.effective_spectrum(&inner, &psi0, &fine_spec)?,
        });
    }
    Ok(out)
}

/// Lorentzian fit to the dominant peak of a spectrum's density.
pub fn fit_spectrum(cfg: &RunConfig, art: &SpectrumArtifact) -> Result<FitReport> {
    let d = density_function(&art.spectrum);
    let imax = argmax(&d.y).ok_or_else(|| Error::DegenerateInput("empty spectrum".into()))?;
    let window = peak_window(&d, imax, cfg.fit.window_fwhm);
    let mut rep = fit_lorentzian(&d, window, &cfg.fit_options())?;
    rep.resonance.j = art.j;
    rep.resonance.r_max = Some(art.spectrum.r_max);
    Ok(rep)
}

pub fn phase_curve(cfg: &RunConfig, model: &PotentialModel, j: u32) -> Result<PhaseShiftCurve> {
    let s = &cfg.stationary;
    PhaseShiftCurve::scan(
        model,
        &cfg.system,
        j,
        (s.e_lo_mev, s.e_hi_mev),
        s.scan_points,
        &cfg.phase_options(),
    )
}

pub fn phase_resonance(cfg: &RunConfig, model: &PotentialModel, curve: &PhaseShiftCurve) -> Result<Resonance> {
    let opts = cfg.phase_options();
    let phase = |e: f64| phase_shift(model, &cfg.system, curve.j, e, &opts);
    resonance_from_phase(curve, &phase)
}

/// S-matrix pole from S(E) = e^{2iδ} sampled over E_R ± span·Γ of `near`.
pub fn pole_resonance(cfg: &RunConfig, model: &PotentialModel, j: u32, near: &Resonance) -> Result<Resonance> {
    let s = &cfg.stationary;
    let g = near.gamma_mev();
    let half = s.pole_span_widths * g;
    let n = s.pole_samples;
    let energies: Vec<f64> = (0..n)
        .map(|i| near.e_r - half + 2.0 * half * i as f64 / (n - 1) as f64)
        .collect();
    let opts = cfg.phase_options();
    let phase = |e: f64| phase_shift(model, &cfg.system, j, e, &opts);
    let samples = s_matrix_samples(&energies, &phase)?;
    let mut r = find_pole(&samples, s.pole_orders)?;
    r.j = j;
    Ok(r)
}

/// One method's outcome in a comparison row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEntry {
    pub method: Method,
    #[serde(rename = "R_max_fm")]
    pub r_max_fm: Option<f64>,
    pub result: Option<Resonance>,
    pub error: Option<String>,
}

impl MethodEntry {
    fn from_result(method: Method, r_max_fm: Option<f64>, r: Result<Resonance>) -> Self {
        match r {
            Ok(res) => Self {
                method,
                r_max_fm,
                result: Some(res),
                error: None,
            },
            Err(e) => Self {
                method,
                r_max_fm,
                result: None,
                error: Some(e.to_string()),
            },
        }
    }

    fn label(&self) -> String {
        match self.r_max_fm {
            Some(r) => format!("{}@{r}", self.method),
            None => self.method.to_string(),
        }
    }
}

/// Relative differences |a − b|/b of E_R and Γ between two entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub a: String,
    pub b: String,
    pub e_r_rel: f64,
    pub gamma_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    #[serde(rename = "J")]
    pub j: u32,
    pub window_fit: Vec<MethodEntry>,
    pub phase_shift: MethodEntry,
    pub pole: MethodEntry,
    pub discrepancies: Vec<Discrepancy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub stop_radius_fm: f64,
    pub epsilon_mev: f64,
    pub rows: Vec<ComparisonRow>,
}

fn discrepancy(a: &MethodEntry, b: &MethodEntry) -> Option<Discrepancy> {
    let (ra, rb) = (a.result.as_ref()?, b.result.as_ref()?);
    Some(Discrepancy {
        a: a.label(),
        b: b.label(),
        e_r_rel: (ra.e_r - rb.e_r).abs() / rb.e_r.abs(),
        gamma_rel: (ra.gamma_kev - rb.gamma_kev).abs() / rb.gamma_kev.abs(),
    })
}

/// Window-fit entries for every analysis grid, in configured order.
fn window_entries(cfg: &RunConfig, spectra: Result<Vec<SpectrumArtifact>>) -> Vec<MethodEntry> {
    match spectra {
        Ok(arts) => arts
            .iter()
            .filter(|a| a.kind == SpectrumKind::Fine)
            .map(|a| {
                MethodEntry::from_result(
                    Method::WindowFit,
                    Some(a.spectrum.r_max),
                    fit_spectrum(cfg, a).map(|r| r.resonance),
                )
            })
            .collect(),
        Err(e) => cfg
            .window
            .analysis_r_max_fm
            .iter()
            .map(|&r| MethodEntry {
                method: Method::WindowFit,
                r_max_fm: Some(r),
                result: None,
                error: Some(e.to_string()),
            })
            .collect(),
    }
}

/// All three routes for one partial wave.
pub fn compare_partial_wave(cfg: &RunConfig, model: &PotentialModel, j: u32) -> ComparisonRow {
    let stop = cfg.propagation.stop_radius_fm[0];
    let spectra = propagate_partial_wave(cfg, model, j).and_then(|p| {
        let snap = &p.snapshots[0].1;
        spectra_for_snapshot(cfg, model, j, &p.initial.psi, &snap.psi, stop)
    });
    let window_fit = window_entries(cfg, spectra);
    let phase = phase_curve(cfg, model, j).and_then(|c| phase_resonance(cfg, model, &c));
    let pole = match &phase {
        Ok(p) => pole_resonance(cfg, model, j, p),
        Err(e) => Err(Error::NotFound(format!("no phase-shift resonance to sample S(E) around ({e})"))),
    };
    let phase_shift = MethodEntry::from_result(Method::PhaseShift, None, phase);
    let pole = MethodEntry::from_result(Method::Pole, None, pole);
    let mut discrepancies = Vec::new();
    for w in &window_fit {
        discrepancies.extend(discrepancy(w, &pole));
        discrepancies.extend(discrepancy(w, &phase_shift));
    }
    discrepancies.extend(discrepancy(&phase_shift, &pole));
    ComparisonRow {
        j,
        window_fit,
        phase_shift,
        pole,
        discrepancies,
    }
}

/// Table of window-fit, phase-shift and pole resonances for every configured J.
pub fn run_compare(cfg: &RunConfig) -> Result<Comparison> {
    cfg.validate()?;
    let model = cfg.potential_model()?;
    let rows = cfg
        .j_values
        .par_iter()
        .map(|&j| compare_partial_wave(cfg, &model, j))
        .collect();
    Ok(Comparison {
        stop_radius_fm: cfg.propagation.stop_radius_fm[0],
        epsilon_mev: cfg.window.epsilon_mev,
        rows,
    })
}

impl Comparison {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes")
    }

    /// Text layout with one line per method and J.
    pub fn format_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# resonances: window-operator fits (2eps = {} keV, stop radius {} fm), phase shifts, S-matrix poles",
            2e3 * self.epsilon_mev,
            self.stop_radius_fm
        );
        let _ = writeln!(s, "{:>3}  {:<12} {:>9}  {:>22}  {:>20}", "J", "method", "R_max/fm", "E_R/MeV", "Gamma/keV");
        for row in &self.rows {
            for e in row.window_fit.iter().chain([&row.phase_shift, &row.pole]) {
                let rmax = e.r_max_fm.map(|r| format!("{r}")).unwrap_or_else(|| "-".into());
                match (&e.result, &e.error) {
                    (Some(r), _) => {
                        let _ = writeln!(
                            s,
                            "{:>3}  {:<12} {:>9}  {:>10.5} ± {:<9.2e}  {:>8.3} ± {:<9.3}",
                            row.j,
                            e.method.to_string(),
                            rmax,
                            r.e_r,
                            r.e_r_err,
                            r.gamma_kev,
                            r.gamma_err_kev
                        );
                    }
                    (None, err) => {
                        let _ = writeln!(
                            s,
                            "{:>3}  {:<12} {:>9}  error: {}",
                            row.j,
                            e.method.to_string(),
                            rmax,
                            err.as_deref().unwrap_or("unknown")
                        );
                    }
                }
            }
            for d in &row.discrepancies {
                let _ = writeln!(
                    s,
                    "     {} vs {}: dE_R/E_R = {:.2e}, dGamma/Gamma = {:.2e}",
                    d.a, d.b, d.e_r_rel, d.gamma_rel
                );
            }
        }
        s
    }
}

// ---- files ----------------------------------------------------------------

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingArtifact(path.to_path_buf())
        } else {
            Error::Io(e)
        }
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read(path)?)?)
}

/// `# key=value` metadata lines at the top of a CSV.
fn metadata(text: &str) -> Vec<(String, String)> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .flat_map(|l| l.trim_start_matches('#').split(',').map(str::to_string).collect::<Vec<_>>())
        .filter_map(|kv| kv.split_once('=').map(|(k, v)| (k.trim().to_string(), v.trim().to_string())))
        .collect()
}

fn meta_value(meta: &[(String, String)], key: &str, path: &Path) -> Result<String> {
    meta.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.clone())
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("metadata key `{key}` missing"),
        })
}

fn parse_num<T: std::str::FromStr>(s: &str, path: &Path, line: usize) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("`{s}` is not a number"),
    })
}

/// Rows of a CSV body (after metadata and the column header).
fn csv_rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty())
        .skip(1)
        .map(|(i, l)| (i + 1, l.split(',').map(str::trim).collect()))
}

/// Artifact kind recorded in the first metadata line.
pub fn artifact_kind(path: &Path) -> Result<String> {
    let text = read(path)?;
    let meta = metadata(&text);
    meta_value(&meta, "artifact", path)
}

pub fn snapshot_path(dir: &Path, j: u32, stop_radius: f64) -> PathBuf {
    dir.join(format!("snapshot_J{j}_R{stop_radius}.csv"))
}

pub fn write_snapshot(path: &Path, j: u32, stop_radius: f64, state: &WavePacketState) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "# artifact=snapshot, J={j}, stop_radius_fm={stop_radius}, steps={}, t_s={:e}", state.step_count, state.elapsed_time)?;
    writeln!(f, "# units: R in fm, psi in fm^-1/2, density in fm^-1")?;
    writeln!(f, "R_fm,re_psi,im_psi,density")?;
    let g = &state.psi.grid;
    for (i, v) in state.psi.values.iter().enumerate() {
        writeln!(f, "{},{:e},{:e},{:e}", g.point(i), v.re, v.im, v.norm_sqr())?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(u32, f64, WavePacketState)> {
    let text = read(path)?;
    let meta = metadata(&text);
    let j: u32 = parse_num(&meta_value(&meta, "J", path)?, path, 1)?;
    let stop: f64 = parse_num(&meta_value(&meta, "stop_radius_fm", path)?, path, 1)?;
    let steps: usize = parse_num(&meta_value(&meta, "steps", path)?, path, 1)?;
    let t: f64 = parse_num(&meta_value(&meta, "t_s", path)?, path, 1)?;
    let mut r_last = 0.0;
    let mut values = Vec::new();
    for (line, cols) in csv_rows(&text) {
        if cols.len() != 4 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: "expected 4 columns".into(),
            });
        }
        r_last = parse_num(cols[0], path, line)?;
        values.push(Complex64::new(parse_num(cols[1], path, line)?, parse_num(cols[2], path, line)?));
    }
    let grid = RadialGrid::new(r_last, values.len())?;
    Ok((
        j,
        stop,
        WavePacketState {
            psi: GridFunction::new(grid, values)?,
            elapsed_time: t,
            step_count: steps,
        },
    ))
}

pub fn spectrum_path(dir: &Path, j: u32, kind: SpectrumKind, r_max: f64) -> PathBuf {
    dir.join(format!("spectrum_J{j}_{kind}_R{r_max}.csv"))
}

pub fn write_spectrum(path: &Path, art: &SpectrumArtifact) -> Result<()> {
    let s = &art.spectrum;
    let mut f = create(path)?;
    writeln!(
        f,
        "# artifact=spectrum, J={}, kind={}, epsilon_MeV={}, n={}, R_max_fm={}, stop_radius_fm={}, normalization={}, e_lo_MeV={}, e_hi_MeV={}",
        art.j, art.kind, s.spec.epsilon, WINDOW_ORDER, s.r_max, art.stop_radius_fm, s.normalization, s.spec.e_lo, s.spec.e_hi
    )?;
    writeln!(f, "# units: E in MeV, P per bin (dimensionless), P_per_MeV in MeV^-1")?;
    writeln!(f, "E_MeV,P,P_per_MeV,excluded_flag")?;
    let two_eps = 2.0 * s.spec.epsilon;
    for ((e, p), x) in s.centroids().iter().zip(&s.values).zip(&s.excluded) {
        writeln!(f, "{},{:e},{:e},{}", e, p, p / two_eps, u8::from(*x))?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_spectrum(path: &Path) -> Result<SpectrumArtifact> {
    let text = read(path)?;
    let meta = metadata(&text);
    let get = |k: &str| meta_value(&meta, k, path);
    let kind = match get("kind")?.as_str() {
        "survey" => SpectrumKind::Survey,
        "fine" => SpectrumKind::Fine,
        other => return Err(Error::UnsupportedArtifact(format!("spectrum kind `{other}`"))),
    };
    let normalization = match get("normalization")?.as_str() {
        "raw" => Normalization::Raw,
        "effective-normalized" => Normalization::EffectiveNormalized,
        other => return Err(Error::UnsupportedArtifact(format!("normalization `{other}`"))),
    };
    let spec = WindowSpec::new(
        parse_num(&get("epsilon_MeV")?, path, 1)?,
        parse_num(&get("e_lo_MeV")?, path, 1)?,
        parse_num(&get("e_hi_MeV")?, path, 1)?,
    )?;
    let mut values = Vec::new();
    let mut excluded = Vec::new();
    for (line, cols) in csv_rows(&text) {
        if cols.len() != 4 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: "expected 4 columns".into(),
            });
        }
        values.push(parse_num::<f64>(cols[1], path, line)?);
        excluded.push(cols[3] == "1");
    }
    if values.len() != spec.n_bins() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("{} rows for {} bins", values.len(), spec.n_bins()),
        });
    }
    Ok(SpectrumArtifact {
        j: parse_num(&get("J")?, path, 1)?,
        kind,
        stop_radius_fm: parse_num(&get("stop_radius_fm")?, path, 1)?,
        spectrum: EnergySpectrum {
            spec,
            values,
            excluded,
            r_max: parse_num(&get("R_max_fm")?, path, 1)?,
            normalization,
        },
    })
}

pub fn phase_path(dir: &Path, j: u32) -> PathBuf {
    dir.join(format!("phase_J{j}.csv"))
}

pub fn write_phase(path: &Path, curve: &PhaseShiftCurve) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "# artifact=phase, J={}", curve.j)?;
    writeln!(f, "# units: E in MeV, phases in rad, eta dimensionless")?;
    writeln!(f, "E_MeV,delta_rad,delta_unwrapped_rad,eta")?;
    for i in 0..curve.energies.len() {
        writeln!(
            f,
            "{},{:e},{:e},{:e}",
            curve.energies[i], curve.delta[i], curve.delta_unwrapped[i], curve.eta[i]
        )?;
    }
    f.flush()?;
    Ok(())
}

pub fn potential_path(dir: &Path, j: u32) -> PathBuf {
    dir.join(format!("potential_J{j}.csv"))
}

/// V(R) for J on 0.05 fm steps out to `r_max`.
pub fn write_potential(path: &Path, model: &PotentialModel, cfg: &RunConfig, j: u32, r_max: f64) -> Result<()> {
    let mut f = create(path)?;
    writeln!(f, "# artifact=potential, J={j}")?;
    writeln!(f, "# units: R in fm, V in MeV")?;
    writeln!(f, "R_fm,V_MeV")?;
    let n = (r_max / 0.05).round() as usize;
    for i in 1..=n {
        let r = 0.05 * i as f64;
        writeln!(f, "{},{:e}", r, total_potential(model, &cfg.system, j, r)?)?;
    }
    f.flush()?;
    Ok(())
}

// ---- plot scripts -----------------------------------------------------------

fn quoted(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', "''"))
}

/// Least-squares scale of a unit-area Lorentzian against the density within
/// E_R ± 5Γ.
fn overlay_amplitude(spectrum: &EnergySpectrum, e_r: f64, gamma: f64) -> f64 {
    let d = density_function(spectrum);
    let (mut yl, mut ll) = (0.0, 0.0);
    for (&e, &y) in d.x.iter().zip(&d.y) {
        if (e - e_r).abs() <= 5.0 * gamma {
            let l = crate::fit::lorentzian(e, e_r, gamma).unwrap_or(0.0);
            yl += y * l;
            ll += l * l;
        }
    }
    if ll > 0.0 {
        yl / ll
    } else {
        1.0
    }
}

/// Gnuplot script reproducing the figure style of a CSV artifact; `fits`
/// (resonance JSON) adds Lorentzian overlays to density plots.
pub fn plot_script(artifact: &Path, fits: Option<&Path>) -> Result<String> {
    let kind = artifact_kind(artifact)?;
    let data = quoted(artifact);
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key top right");
    match kind.as_str() {
        "spectrum" => {
            let art = read_spectrum(artifact)?;
            match fits {
                None => {
                    let _ = writeln!(s, "set logscale y");
                    let _ = writeln!(s, "set xlabel 'E (MeV)'");
                    let _ = writeln!(s, "set ylabel 'P(E_k)'");
                    let _ = writeln!(
                        s,
                        "plot {data} every ::1 using 1:($4 == 0 ? $2 : 1/0) with steps title 'J = {} spectrum'",
                        art.j
                    );
                }
                Some(fp) => {
                    let res: Vec<Resonance> = read_json(fp)?;
                    let _ = writeln!(s, "set xlabel 'E (MeV)'");
                    let _ = writeln!(s, "set ylabel 'P(E)/2eps (1/MeV)'");
                    let mut plots = vec![format!(
                        "{data} every ::1 using 1:($4 == 0 ? $3 : 1/0) with points pt 7 ps 0.5 title 'density'"
                    )];
                    for (i, r) in res
                        .iter()
                        .filter(|r| r.j == art.j && r.r_max.is_none_or(|x| x == art.spectrum.r_max))
                        .enumerate()
                    {
                        let g = r.gamma_mev();
                        let amp = overlay_amplitude(&art.spectrum, r.e_r, g);
                        let _ = writeln!(s, "f{i}(x) = {amp} * ({g} / 2) / pi / ((x - {}) ** 2 + ({g} / 2) ** 2)", r.e_r);
                        plots.push(format!("f{i}(x) with lines lw 2 title sprintf('E_R = %.4f MeV, Gamma = %.2f keV', {}, {})", r.e_r, r.gamma_kev));
                    }
                    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
                }
            }
        }
        "phase" => {
            let text = read(artifact)?;
            let mut e = Vec::new();
            let mut d = Vec::new();
            for (line, cols) in csv_rows(&text) {
                e.push(parse_num::<f64>(cols[0], artifact, line)?);
                d.push(parse_num::<f64>(cols[2], artifact, line)?);
            }
            let _ = writeln!(s, "set xlabel 'E (MeV)'");
            let _ = writeln!(s, "set ylabel 'delta (rad)'");
            let _ = writeln!(s, "$crossings << EOD");
            let half = std::f64::consts::FRAC_PI_2;
            for i in 0..e.len().saturating_sub(1) {
                let k0 = ((d[i] - half) / std::f64::consts::PI).floor();
                let k1 = ((d[i + 1] - half) / std::f64::consts::PI).floor();
                if k1 > k0 {
                    let level = half + std::f64::consts::PI * k1;
                    let t = (level - d[i]) / (d[i + 1] - d[i]);
                    let _ = writeln!(s, "{} {}", e[i] + t * (e[i + 1] - e[i]), level);
                }
            }
            let _ = writeln!(s, "EOD");
            let _ = writeln!(
                s,
                "plot {data} every ::1 using 1:3 with lines title 'delta', \\\n     $crossings using 1:2 with points pt 6 ps 1.5 title 'delta = pi/2 (mod pi)'"
            );
        }
        "potential" => {
            let _ = writeln!(s, "set xlabel 'R (fm)'");
            let _ = writeln!(s, "set ylabel 'V (MeV)'");
            let _ = writeln!(s, "set xrange [0:20]");
            let _ = writeln!(s, "set yrange [-20:20]");
            let _ = writeln!(s, "plot {data} every ::1 using 1:2 with lines title 'V(R)'");
        }
        "snapshot" => {
            let _ = writeln!(s, "set xlabel 'R (fm)'");
            let _ = writeln!(s, "set ylabel '|psi|^2 (1/fm)'");
            let _ = writeln!(s, "set logscale y");
            let _ = writeln!(s, "plot {data} every ::1 using 1:4 with lines title 'density'");
        }
        other => return Err(Error::UnsupportedArtifact(format!("no plot template for `{other}` artifacts"))),
    }
    Ok(s)
}

/// Replace entries of `path` that share (J, method, R_max) with `new` and
/// write the list back sorted.
pub fn merge_resonances(path: &Path, new: &[Resonance]) -> Result<Vec<Resonance>> {
    let mut all: Vec<Resonance> = if path.exists() { read_json(path)? } else { Vec::new() };
    all.retain(|r| !new.iter().any(|n| n.j == r.j && n.method == r.method && n.r_max == r.r_max));
    all.extend_from_slice(new);
    all.sort_by(|a, b| {
        (a.j, a.method.to_string())
            .cmp(&(b.j, b.method.to_string()))
            .then(a.r_max.unwrap_or(0.0).total_cmp(&b.r_max.unwrap_or(0.0)))
    });
    write_json(path, &all)?;
    Ok(all)
}
