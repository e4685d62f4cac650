//! Experiment driver: flat `key = value` configs, single runs writing a CSV
//! time series plus a manifest, and (γ, χ) sweeps of the time-averaged
//! energy error.
//!
//! Config syntax: one `key = value` per line, `#` starts a comment, lists are
//! comma separated. Unknown or repeated keys are rejected.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::metrics::{
    avg_energy_error, csv_error, csv_writer, fermion_number_error, format_number, fourier_number, nk_double_sum,
    total_number_density, Measurement, Normalization, PauliMeasure, TimeSeries,
};
use crate::models::{
    fock_initial_state, fock_site_vectors, ghz_initial_mpdo, ghz_initial_mps, spin_initial_state, BondHamiltonian,
};
use crate::mpdo::{init_pure_product_mpdo, Mpdo, MpdoMeasure, SuperCircuit};
use crate::mps::{init_product_mps, BrickworkCircuit, MpsMeasure, TensorTrain};
use crate::oracle::{gaussian_trotter, CorrelationMatrix};
use crate::pauli::{ReweightScheme, SchemeKind};
use crate::tensor::TruncationPolicy;
use crate::{Error, Result, C64};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest estimated train footprint a run may allocate.
const MEMORY_LIMIT_BYTES: f64 = 16.0 * (1u64 << 30) as f64;

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

macro_rules! keyword_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(config_err(format!(
                        "unknown {} `{other}` (expected one of: {})",
                        stringify!($name),
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

keyword_enum!(ModelKind { FreeFermion => "free_fermion", Spin => "spin" });
keyword_enum!(Method { MpsTebd => "mps_tebd", MpdoTebd => "mpdo_tebd", Rtebd => "rtebd" });
keyword_enum!(InitialState { FockPattern => "fock_pattern", SpinTilt => "spin_tilt", Ghz => "ghz" });
keyword_enum!(Column {
    Trace => "trace",
    EnergyDensity => "energy_density",
    NTot => "n_tot",
    NErr => "n_err",
    ReNk => "re_n_k",
    N1NLc => "n1nL_c",
    NkSum => "nk_sum",
});

impl Column {
    /// CSV column order.
    pub const ALL: [Column; 7] =
        [Column::Trace, Column::EnergyDensity, Column::NTot, Column::NErr, Column::ReNk, Column::N1NLc, Column::NkSum];

    fn fermionic(self) -> bool {
        !matches!(self, Column::Trace | Column::EnergyDensity)
    }
}

/// Name of the in-band divergence flag column.
pub const DIVERGED_COLUMN: &str = "diverged";

/// Parses `key = value` lines.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(config_err(format!("line {}: empty key", n + 1)));
        }
        if out.iter().any(|(x, _)| x == k) {
            return Err(config_err(format!("line {}: key `{k}` given twice", n + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Replaces or appends `key=value`.
pub fn apply_override(pairs: &mut Vec<(String, String)>, spec: &str) -> Result<()> {
    let (k, v) =
        spec.split_once('=').ok_or_else(|| config_err(format!("override `{spec}` is not of the form key=value")))?;
    let (k, v) = (k.trim().to_string(), v.trim().to_string());
    match pairs.iter_mut().find(|(x, _)| *x == k) {
        Some(p) => p.1 = v,
        None => pairs.push((k, v)),
    }
    Ok(())
}

struct Fields(BTreeMap<String, String>);

impl Fields {
    fn take(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.take(key)
            .map(|v| v.parse::<T>().map_err(|e| config_err(format!("`{key}`: cannot parse `{v}`: {e}"))))
            .transpose()
    }

    fn required<T: FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        self.parse(key)?.ok_or_else(|| config_err(format!("missing required key `{key}`")))
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        self.take(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<T>().map_err(|e| config_err(format!("`{key}`: cannot parse `{s}`: {e}"))))
                    .collect()
            })
            .transpose()
    }

    fn finish(self) -> Result<()> {
        match self.0.keys().next() {
            Some(k) => Err(config_err(format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }
}

/// One simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub method: Method,
    pub scheme: SchemeKind,
    pub len: usize,
    pub chi_max: usize,
    pub gamma: f64,
    pub dt: f64,
    pub t_final: f64,
    pub initial_state: InitialState,
    pub observables: Vec<Column>,
    pub output_path: Option<PathBuf>,
    pub measure_every: usize,
    /// Hopping (free fermions) or ZZ coupling (spin model).
    pub coupling: f64,
    pub hx: f64,
    pub hz: f64,
    /// Wave number for `re_n_k` and `nk_sum`.
    pub k: f64,
    pub sv_cutoff: f64,
    /// Divide MPDO expectation values by the trace.
    pub normalize: bool,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(parse_pairs(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn from_pairs(pairs: Vec<(String, String)>) -> Result<Self> {
        let mut f = Fields(pairs.into_iter().collect());
        let cfg = Self::from_fields(&mut f)?;
        f.finish()?;
        cfg.validated()
    }

    fn from_fields(f: &mut Fields) -> Result<Self> {
        let model: ModelKind = f.required("model")?;
        let method: Method = f.required("method")?;
        let initial_state = f.parse("initial_state")?.unwrap_or(match model {
            ModelKind::FreeFermion => InitialState::FockPattern,
            ModelKind::Spin => InitialState::SpinTilt,
        });
        let default_observables = || {
            let mut v = vec![Column::Trace, Column::EnergyDensity];
            if model == ModelKind::FreeFermion {
                v.push(Column::NTot);
                match initial_state {
                    InitialState::FockPattern => v.extend([Column::NErr, Column::ReNk]),
                    InitialState::Ghz => v.push(Column::N1NLc),
                    InitialState::SpinTilt => v.push(Column::ReNk),
                }
            }
            v
        };
        Ok(Self {
            model,
            method,
            scheme: f.parse("scheme")?.unwrap_or(SchemeKind::Fermionic),
            len: f.required("L")?,
            chi_max: f.required("chi_max")?,
            gamma: f.parse("gamma")?.unwrap_or(1.0),
            dt: f.required("dt")?,
            t_final: f.required("t_final")?,
            initial_state,
            observables: f.list("observables")?.unwrap_or_else(default_observables),
            output_path: f.take("output_path").map(PathBuf::from),
            measure_every: f.parse("measure_every")?.unwrap_or(1),
            coupling: f.parse("J")?.unwrap_or(1.0),
            hx: f.parse("hx")?.unwrap_or(0.9045),
            hz: f.parse("hz")?.unwrap_or(0.8090),
            k: f.parse("k")?.unwrap_or(FRAC_PI_4),
            sv_cutoff: f.parse("sv_cutoff")?.unwrap_or(0.0),
            normalize: f.parse("normalize")?.unwrap_or(true),
        })
    }

    /// Checks ranges and compatibility; forces `γ = 1` for MPDO-TEBD.
    pub fn validated(mut self) -> Result<Self> {
        if self.len < 2 {
            return Err(config_err("L must be at least 2"));
        }
        if self.chi_max < 1 {
            return Err(config_err("chi_max must be at least 1"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(config_err("dt must be a positive number"));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(config_err("t_final must be a non-negative number"));
        }
        let steps = (self.t_final / self.dt).round();
        if (steps * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(1.0) {
            return Err(config_err(format!("t_final = {} is not a multiple of dt = {}", self.t_final, self.dt)));
        }
        if self.measure_every < 1 {
            return Err(config_err("measure_every must be at least 1"));
        }
        if !(self.sv_cutoff >= 0.0) {
            return Err(config_err("sv_cutoff must be non-negative"));
        }
        for x in [self.coupling, self.hx, self.hz, self.k] {
            if !x.is_finite() {
                return Err(config_err("model parameters must be finite"));
            }
        }
        match self.method {
            Method::MpdoTebd => self.gamma = 1.0,
            Method::Rtebd => {
                if !(self.gamma >= 1.0) || !self.gamma.is_finite() {
                    return Err(config_err(format!("rtebd needs gamma ≥ 1, got {}", self.gamma)));
                }
            }
            Method::MpsTebd => {}
        }
        match (self.model, self.initial_state) {
            (ModelKind::Spin, InitialState::Ghz) => {
                return Err(config_err("the ghz initial state is defined for the free_fermion model"))
            }
            (ModelKind::FreeFermion, InitialState::SpinTilt) => {
                return Err(config_err("the spin_tilt initial state is defined for the spin model"))
            }
            _ => {}
        }
        if self.observables.is_empty() {
            return Err(config_err("no observables requested"));
        }
        for c in &self.observables {
            if c.fermionic() && self.model != ModelKind::FreeFermion {
                return Err(config_err(format!("observable `{c}` needs the free_fermion model")));
            }
            if *c == Column::NErr && self.initial_state != InitialState::FockPattern {
                return Err(config_err("n_err needs the fock_pattern initial state (Gaussian reference)"));
            }
        }
        let d = if self.method == Method::MpsTebd { 2.0 } else { 4.0 };
        let bytes = self.len as f64 * (self.chi_max as f64).powi(2) * d * 16.0 * 8.0;
        if bytes > MEMORY_LIMIT_BYTES {
            return Err(Error::Resource(format!(
                "chi_max = {} at L = {} needs about {:.1e} bytes",
                self.chi_max, self.len, bytes
            )));
        }
        Ok(self)
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn is_mpdo(&self) -> bool {
        self.method != Method::MpsTebd
    }

    pub fn reweight_scheme(&self) -> Result<ReweightScheme> {
        match self.method {
            Method::Rtebd => ReweightScheme::new(self.scheme, self.gamma),
            _ => Ok(ReweightScheme::unweighted()),
        }
    }

    pub fn hamiltonian(&self) -> Result<BondHamiltonian> {
        match self.model {
            ModelKind::FreeFermion => BondHamiltonian::free_fermion(self.len, self.coupling),
            ModelKind::Spin => BondHamiltonian::spin(self.len, self.coupling, self.hx, self.hz),
        }
    }

    /// Output columns in canonical order, with `trace` forced on MPDO paths
    /// and the divergence flag appended for normalized MPDO runs.
    pub fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = Column::ALL
            .iter()
            .filter(|c| self.observables.contains(c) || (**c == Column::Trace && self.is_mpdo()))
            .map(|c| c.name().to_string())
            .collect();
        if self.is_mpdo() && self.normalize {
            cols.push(DIVERGED_COLUMN.into());
        }
        cols
    }

    /// Canonical `key = value` echo.
    pub fn to_text(&self) -> String {
        let obs: Vec<&str> = self.observables.iter().map(|c| c.name()).collect();
        let mut s = String::new();
        let mut line = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        line("model", self.model.to_string());
        line("method", self.method.to_string());
        line("scheme", self.scheme.name().to_string());
        line("L", self.len.to_string());
        line("chi_max", self.chi_max.to_string());
        line("gamma", self.gamma.to_string());
        line("dt", self.dt.to_string());
        line("t_final", self.t_final.to_string());
        line("initial_state", self.initial_state.to_string());
        line("observables", obs.join(","));
        if let Some(p) = &self.output_path {
            line("output_path", p.display().to_string());
        }
        line("measure_every", self.measure_every.to_string());
        line("J", self.coupling.to_string());
        line("hx", self.hx.to_string());
        line("hz", self.hz.to_string());
        line("k", self.k.to_string());
        line("sv_cutoff", self.sv_cutoff.to_string());
        line("normalize", self.normalize.to_string());
        s
    }
}

enum Engine {
    Mps(TensorTrain<C64>, BrickworkCircuit<C64>),
    Mpdo(Mpdo, SuperCircuit),
}

/// Result of one simulation.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub series: TimeSeries,
    /// Largest discarded weight of every step.
    pub step_discarded_weight: Vec<f64>,
    pub final_max_bond_dim: usize,
    pub wall_time_s: f64,
    pub diverged_rows: usize,
}

impl RunResult {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.series.column(name)
    }

    pub fn times(&self) -> &[f64] {
        self.series.times()
    }
}

fn build_engine(cfg: &ExperimentConfig) -> Result<Engine> {
    let circuit = cfg.hamiltonian()?.gates(cfg.dt)?;
    let sites = match cfg.initial_state {
        InitialState::FockPattern => Some(fock_site_vectors(&fock_initial_state(cfg.len))),
        InitialState::SpinTilt => Some(spin_initial_state(cfg.len)),
        InitialState::Ghz => None,
    };
    Ok(match cfg.method {
        Method::MpsTebd => {
            let tt = match &sites {
                Some(v) => init_product_mps(v)?,
                None => ghz_initial_mps(cfg.len)?,
            };
            Engine::Mps(tt, circuit)
        }
        Method::MpdoTebd | Method::Rtebd => {
            let scheme = cfg.reweight_scheme()?;
            let m = match &sites {
                Some(v) => init_pure_product_mpdo(v, &scheme)?,
                None => ghz_initial_mpdo(cfg.len, &scheme)?,
            };
            Engine::Mpdo(m, SuperCircuit::new(&circuit, &scheme)?)
        }
    })
}

fn measure_row(
    cfg: &ExperimentConfig,
    source: &dyn PauliMeasure,
    model: &BondHamiltonian,
    exact: Option<&CorrelationMatrix>,
) -> Result<(Vec<f64>, bool)> {
    let normalization = if cfg.normalize { Normalization::ByTrace } else { Normalization::Raw };
    let trace = source.trace();
    let m = match Measurement::new(source, normalization) {
        Ok(m) => m,
        Err(Error::Divergence { .. }) => {
            let row = cfg
                .columns()
                .iter()
                .map(|c| match c.as_str() {
                    "trace" => trace,
                    DIVERGED_COLUMN => 1.0,
                    _ => f64::NAN,
                })
                .collect();
            return Ok((row, true));
        }
        Err(e) => return Err(e),
    };
    let wants = |c: Column| cfg.observables.contains(&c);
    let needs_densities = [Column::NTot, Column::NErr, Column::ReNk].iter().any(|&c| wants(c));
    let dens = if needs_densities { Some(m.densities()?) } else { None };
    let mut row = Vec::new();
    for name in cfg.columns() {
        let v = match name.as_str() {
            "trace" => trace,
            "energy_density" => m.energy_density(model)?,
            "n_tot" => total_number_density(dens.as_ref().expect("densities")),
            "n_err" => {
                let exact = exact.ok_or_else(|| Error::InternalConsistency("missing Gaussian reference".into()))?;
                fermion_number_error(dens.as_ref().expect("densities"), &exact.densities())?
            }
            "re_n_k" => fourier_number(dens.as_ref().expect("densities"), cfg.k).re,
            "n1nL_c" => m.connected_correlation(0, cfg.len - 1)?,
            "nk_sum" => nk_double_sum(&m.correlation_matrix()?, cfg.k).re,
            DIVERGED_COLUMN => 0.0,
            other => return Err(Error::InternalConsistency(format!("unhandled column {other}"))),
        };
        row.push(v);
    }
    Ok((row, false))
}

/// Runs one configured simulation in memory.
pub fn simulate(cfg: &ExperimentConfig) -> Result<RunResult> {
    let cfg = cfg.clone().validated()?;
    let start = Instant::now();
    let model = cfg.hamiltonian()?;
    let mut engine = build_engine(&cfg)?;
    let policy = TruncationPolicy::with_cutoff(cfg.chi_max, cfg.sv_cutoff)?;
    let steps = cfg.steps();

    let mut gaussian = if cfg.observables.contains(&Column::NErr) {
        let occ = fock_initial_state(cfg.len);
        let circuit = cfg.hamiltonian()?.gates(cfg.dt)?;
        // one-step trajectory gives the per-step update; iterate it lazily
        let blocks = gaussian_trotter(&occ, &circuit, 0)?;
        Some((blocks.into_iter().next().expect("initial matrix"), circuit))
    } else {
        None
    };

    let names = cfg.columns();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut series = TimeSeries::new(&name_refs);
    let mut step_discarded_weight = Vec::with_capacity(steps);
    let mut diverged_rows = 0;

    let mut record =
        |step: usize, engine: &Engine, exact: Option<&CorrelationMatrix>, series: &mut TimeSeries| -> Result<()> {
            let (row, diverged) = match engine {
                Engine::Mps(tt, _) => measure_row(&cfg, &MpsMeasure::new(tt)?, &model, exact)?,
                Engine::Mpdo(m, _) => measure_row(&cfg, &MpdoMeasure::new(m), &model, exact)?,
            };
            diverged_rows += usize::from(diverged);
            series.push(step as f64 * cfg.dt, &row)
        };

    record(0, &engine, gaussian.as_ref().map(|g| &g.0), &mut series)?;
    for step in 1..=steps {
        let report = match &mut engine {
            Engine::Mps(tt, circ) => tt.tebd_step(circ, &policy)?,
            Engine::Mpdo(m, circ) => m.rtebd_step(circ, &policy)?,
        };
        step_discarded_weight.push(report.max_discarded_weight);
        if let Some((c, circ)) = gaussian.as_mut() {
            let next = gaussian_step(c, circ)?;
            *c = next;
        }
        if step % cfg.measure_every == 0 || step == steps {
            record(step, &engine, gaussian.as_ref().map(|g| &g.0), &mut series)?;
        }
    }
    let final_max_bond_dim = match &engine {
        Engine::Mps(tt, _) => tt.max_bond_dim(),
        Engine::Mpdo(m, _) => m.max_bond_dim(),
    };
    Ok(RunResult {
        series,
        step_discarded_weight,
        final_max_bond_dim,
        wall_time_s: start.elapsed().as_secs_f64(),
        diverged_rows,
    })
}

fn gaussian_step(c: &CorrelationMatrix, circuit: &BrickworkCircuit<C64>) -> Result<CorrelationMatrix> {
    let mut c = c.clone();
    for g in circuit.gates() {
        c.apply_single_particle(g.bond, &crate::oracle::single_particle_block(&g.op)?);
    }
    Ok(c)
}

/// Manifest path next to a CSV: `out.csv` → `out.manifest`.
pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest")
}

pub fn write_csv(path: &Path, series: &TimeSeries) -> Result<()> {
    series.write_csv(BufWriter::new(fs::File::create(path)?))
}

pub fn manifest_text(cfg: &ExperimentConfig, result: &RunResult) -> String {
    let mut s = format!("toolkit = rtebd\nversion = {VERSION}\n");
    s.push_str(&cfg.to_text());
    s.push_str(&format!("steps = {}\n", cfg.steps()));
    s.push_str(&format!("rows = {}\n", result.series.len()));
    s.push_str(&format!("diverged_rows = {}\n", result.diverged_rows));
    s.push_str(&format!("final_max_bond_dim = {}\n", result.final_max_bond_dim));
    s.push_str(&format!("wall_time_s = {:.3}\n", result.wall_time_s));
    let w: Vec<String> = result.step_discarded_weight.iter().map(|x| format_number(*x)).collect();
    s.push_str(&format!("step_max_discarded_weight = {}\n", w.join(",")));
    s
}

/// Runs a simulation and writes the CSV and manifest when `output_path` is
/// set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    let result = simulate(cfg)?;
    if let Some(path) = &cfg.output_path {
        write_csv(path, &result.series)?;
        fs::write(manifest_path(path), manifest_text(cfg, &result))?;
    }
    Ok(result)
}

/// A (γ, χ) grid over a base configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    pub gammas: Vec<f64>,
    pub chis: Vec<usize>,
    /// Averaging window `T_f` of the energy error.
    pub t_f: f64,
    pub workers: usize,
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(parse_pairs(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn from_pairs(mut pairs: Vec<(String, String)>) -> Result<Self> {
        let mut f = Fields(BTreeMap::new());
        pairs.retain(|(k, v)| {
            let sweep_key = matches!(k.as_str(), "gammas" | "chis" | "t_f" | "workers");
            if sweep_key {
                f.0.insert(k.clone(), v.clone());
            }
            !sweep_key
        });
        let t_f: f64 = f.required("t_f")?;
        // the base run covers the averaging window
        if !pairs.iter().any(|(k, _)| k == "t_final") {
            pairs.push(("t_final".into(), t_f.to_string()));
        }
        for key in ["chi_max", "gamma"] {
            if !pairs.iter().any(|(k, _)| k == key) {
                pairs.push((key.into(), "1".into()));
            }
        }
        let gammas = f.list("gammas")?.ok_or_else(|| config_err("missing required key `gammas`"))?;
        let chis = f.list("chis")?.ok_or_else(|| config_err("missing required key `chis`"))?;
        let workers = f.parse("workers")?.unwrap_or(1);
        f.finish()?;
        let base = ExperimentConfig::from_pairs(pairs)?;
        Self { base, gammas, chis, t_f, workers }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.base.method != Method::Rtebd {
            return Err(config_err("sweeps vary gamma and need method = rtebd"));
        }
        if self.gammas.is_empty() || self.chis.is_empty() {
            return Err(config_err("sweep grids must be non-empty"));
        }
        if let Some(g) = self.gammas.iter().find(|g| !(**g >= 1.0)) {
            return Err(config_err(format!("sweep gamma {g} is below 1")));
        }
        if self.chis.contains(&0) {
            return Err(config_err("sweep chi values must be positive"));
        }
        if !(self.t_f > 0.0) {
            return Err(config_err("t_f must be positive"));
        }
        if self.workers < 1 {
            return Err(config_err("workers must be at least 1"));
        }
        Ok(self)
    }

    /// Configuration of one grid cell.
    pub fn cell_config(&self, gamma: f64, chi: usize) -> Result<ExperimentConfig> {
        let mut cfg = self.base.clone();
        cfg.gamma = gamma;
        cfg.chi_max = chi;
        cfg.t_final = self.t_f;
        cfg.observables = vec![Column::EnergyDensity];
        cfg.output_path = None;
        cfg.validated()
    }

    /// Grid cells in output order: χ outer, γ inner.
    pub fn cells(&self) -> Vec<(f64, usize)> {
        self.chis.iter().flat_map(|&c| self.gammas.iter().map(move |&g| (g, c))).collect()
    }
}

/// One row of a sweep table.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    pub chi: usize,
    pub eps_avg_err: f64,
    /// `ok`, or a failure description.
    pub status: String,
}

/// `avg_energy_error` of one configured run over `[0, t_f]`.
pub fn energy_error_of_run(cfg: &ExperimentConfig, t_f: f64) -> Result<f64> {
    let r = simulate(cfg)?;
    if r.diverged_rows > 0 {
        return Err(Error::Divergence { trace: f64::NAN });
    }
    let eps = r.column(Column::EnergyDensity.name()).expect("energy column");
    avg_energy_error(r.times(), eps, t_f)
}

/// Runs every cell (in parallel with `workers` threads) and returns rows in
/// grid order. Failed cells are reported, not propagated.
pub fn run_gamma_sweep(sweep: &SweepConfig) -> Result<Vec<SweepRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep.workers)
        .build()
        .map_err(|e| Error::Resource(format!("cannot start {} workers: {e}", sweep.workers)))?;
    let cells = sweep.cells();
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|&(gamma, chi)| {
                let outcome = sweep.cell_config(gamma, chi).and_then(|cfg| energy_error_of_run(&cfg, sweep.t_f));
                match outcome {
                    Ok(v) => SweepRow { gamma, chi, eps_avg_err: v, status: "ok".into() },
                    Err(e) => SweepRow { gamma, chi, eps_avg_err: f64::NAN, status: format!("failed: {e}") },
                }
            })
            .collect::<Vec<_>>()
    });
    if let Some(path) = &sweep.base.output_path {
        write_sweep_csv(path, &rows)?;
    }
    Ok(rows)
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv_writer(BufWriter::new(fs::File::create(path)?));
    w.write_record(["gamma", "chi", "eps_avg_err", "status"]).map_err(csv_error)?;
    for r in rows {
        w.write_record([format_number(r.gamma), r.chi.to_string(), format_number(r.eps_avg_err), r.status.clone()])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Process exit code for an error: 2 for configuration problems, 3 for
/// resource and I/O failures, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) => 2,
        Error::Resource(_) | Error::Io(_) => 3,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str =
        "model = free_fermion\nmethod = rtebd\nL = 8\nchi_max = 8\ngamma = 1.5\ndt = 0.08\nt_final = 0.16\n";

    #[test]
    fn parses_with_defaults_and_comments() {
        let cfg = ExperimentConfig::parse(&format!("# header\n{BASE}scheme = bosonic # trailing\n")).unwrap();
        assert_eq!(cfg.scheme, SchemeKind::Bosonic);
        assert_eq!(cfg.initial_state, InitialState::FockPattern);
        assert_eq!(cfg.steps(), 2);
        assert_eq!(cfg.columns(), vec!["trace", "energy_density", "n_tot", "n_err", "re_n_k", "diverged"]);
        let echo = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(echo, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            format!("{BASE}L = 9\n"),
            format!("{BASE}colour = red\n"),
            BASE.replace("gamma = 1.5", "gamma = 0.5"),
            BASE.replace("t_final = 0.16", "t_final = 0.1"),
            BASE.replace("model = free_fermion", "model = spin") + "observables = n_tot\n",
            format!("{BASE}initial_state = spin_tilt\n"),
            BASE.replace("L = 8", "L = 1"),
            format!("{BASE}observables = n_err\ninitial_state = ghz\n"),
            "model = free_fermion\n".to_string(),
            "nonsense line\n".to_string(),
        ] {
            let e = ExperimentConfig::parse(&bad).unwrap_err();
            assert_eq!(exit_code(&e), 2, "{bad}: {e}");
        }
        let huge = ExperimentConfig::parse(&BASE.replace("chi_max = 8", "chi_max = 100000")).unwrap_err();
        assert_eq!(exit_code(&huge), 3);
    }

    #[test]
    fn mpdo_tebd_forces_unit_gamma() {
        let cfg = ExperimentConfig::parse(&BASE.replace("rtebd", "mpdo_tebd")).unwrap();
        assert_eq!(cfg.gamma, 1.0);
        assert!(cfg.reweight_scheme().unwrap().same_basis(&ReweightScheme::unweighted()));
    }

    #[test]
    fn overrides_replace_values() {
        let mut pairs = parse_pairs(BASE).unwrap();
        apply_override(&mut pairs, "chi_max=4").unwrap();
        apply_override(&mut pairs, "scheme = xy").unwrap();
        let cfg = ExperimentConfig::from_pairs(pairs).unwrap();
        assert_eq!(cfg.chi_max, 4);
        assert_eq!(cfg.scheme, SchemeKind::Xy);
        assert!(apply_override(&mut Vec::new(), "novalue").is_err());
    }

    #[test]
    fn row_count_and_measure_every() {
        let cfg = ExperimentConfig::parse(&BASE.replace("t_final = 0.16", "t_final = 0.4")).unwrap();
        assert_eq!(simulate(&cfg).unwrap().series.len(), 6);
        let mut sparse = cfg.clone();
        sparse.measure_every = 2;
        let r = simulate(&sparse).unwrap();
        let t: Vec<f64> = r.times().to_vec();
        assert_eq!(t.len(), 4);
        assert!((t[3] - 0.4).abs() < 1e-15);
        assert_eq!(r.step_discarded_weight.len(), 5);
    }

    #[test]
    fn sweep_parse_and_grid_order() {
        let text = format!("{BASE}gammas = 1.0, 1.5\nchis = 2,4\nt_f = 0.16\nworkers = 2\n");
        let s = SweepConfig::parse(&text).unwrap();
        assert_eq!(s.cells(), vec![(1.0, 2), (1.5, 2), (1.0, 4), (1.5, 4)]);
        assert!(SweepConfig::parse(&text.replace("1.0, 1.5", "0.9")).is_err());
        assert!(SweepConfig::parse(&text.replace("rtebd", "mps_tebd")).is_err());
    }
}
