use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dae::{DaeTriple, Functional, WeightSpec};
use crate::error::{Error, Result};
use crate::heatpde::{self, HeatConfig, HeatReport, PROBE_POINT};
use crate::io::{read_matrix, read_signal, write_columns, write_matrix, write_signal};
use crate::matspace::{Mat, Tol, Vector};
use crate::observer::{design_finite, design_infinite_full, run_finite, run_infinite};
use crate::reduction::{
    assoc_lti, detectability_hautus_check_seeded, impulse_obs_rank_check, is_l_detectable_with,
    is_l_impulse_observable_with, stab_assoc_lti, AssocLti, StabLti, DEFAULT_PROBE_SEED,
};

#[derive(Debug, Parser)]
#[command(
    name = "dae-minimax",
    version,
    about = "Minimax observers for linear DAEs d(Fx)/dt = Ax + f, y = Hx + eta"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory holding F_matrix.txt, A_matrix.txt, H_matrix.txt and the
    /// optional Q0/Q/R weight files.
    #[arg(long, global = true)]
    input_dir: Option<PathBuf>,

    /// Where results and run.json are written.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// Functionals: 1-based unit-vector indices ("1,4,10") or @FILE with
    /// one explicit vector per row.
    #[arg(long, global = true)]
    ell: Option<String>,

    /// Final time t1 (finite-horizon design and estimation, heat demo)
    #[arg(long, global = true)]
    horizon: Option<f64>,

    /// Number of time-grid intervals on [0, horizon]
    #[arg(long, global = true)]
    steps: Option<usize>,

    /// Relative singular-value cutoff for rank decisions
    #[arg(long, global = true)]
    rank_rtol: Option<f64>,

    /// Seed for the randomized rank probes.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// JSON file with defaults for any of the options above.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Horizon {
    Finite,
    Infinite,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Associated LTI system of the adjoint DAE and its stabilizable part.
    Reduce,
    /// Per-functional impulse observability, plus the global rank test.
    CheckObservability,
    /// Per-functional detectability, plus the global Hautus test.
    CheckDetectability,
    /// Finite-horizon observer on [0, horizon].
    DesignFinite,
    /// Infinite-horizon observer matrices Ao, Bo, Co.
    DesignInfinite,
    /// Run an observer on a measured output signal.
    Estimate {
        /// CSV with columns time, y1, .., yp (default: <input-dir>/y.csv).
        #[arg(long)]
        signal: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "infinite")]
        mode: Horizon,
    },
    /// Heat-equation example: assemble, design, simulate, reconstruct.
    HeatDemo,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Reduce => "reduce",
            Command::CheckObservability => "check-observability",
            Command::CheckDetectability => "check-detectability",
            Command::DesignFinite => "design-finite",
            Command::DesignInfinite => "design-infinite",
            Command::Estimate { .. } => "estimate",
            Command::HeatDemo => "heat-demo",
        }
    }
}

/// Optional JSON defaults; command-line flags take precedence.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub input_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub ell: Option<String>,
    pub horizon: Option<f64>,
    pub steps: Option<usize>,
    pub rank_rtol: Option<f64>,
    pub abs_floor: Option<f64>,
    pub stab_margin: Option<f64>,
    pub seed: Option<u64>,
    pub heat: Option<HeatSettings>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatSettings {
    pub n: usize,
    pub nu: usize,
    pub n1: usize,
    pub n2: usize,
    pub c: f64,
}

impl Default for HeatSettings {
    fn default() -> Self {
        let d = HeatConfig::default();
        HeatSettings { n: d.n, nu: d.nu, n1: d.n1, n2: d.n2, c: d.c }
    }
}

/// Resolved settings shared by all commands.
#[derive(Debug, Clone, Serialize)]
struct RunConfig {
    command: String,
    input_dir: Option<PathBuf>,
    output_dir: PathBuf,
    ell: Option<String>,
    horizon: Option<f64>,
    steps: Option<usize>,
    rank_rtol: f64,
    abs_floor: f64,
    stab_margin: f64,
    seed: u64,
    heat: HeatSettings,
}

impl RunConfig {
    fn tol(&self) -> Result<Tol> {
        let mut tol = Tol::new(self.rank_rtol, self.abs_floor)?;
        tol.stab_margin = self.stab_margin;
        Ok(tol)
    }

    fn input_dir(&self) -> Result<&Path> {
        self.input_dir
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("{} needs --input-dir", self.command)))
    }

    fn horizon(&self) -> Result<f64> {
        let h = self
            .horizon
            .ok_or_else(|| Error::InvalidArgument(format!("{} needs --horizon", self.command)))?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {h}")));
        }
        Ok(h)
    }

    fn steps_or(&self, default: usize) -> Result<usize> {
        let s = self.steps.unwrap_or(default);
        if s < 2 {
            return Err(Error::InvalidArgument(format!("steps must be at least 2, got {s}")));
        }
        Ok(s)
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            serde_json::from_str::<ConfigFile>(&text).map_err(|e| Error::Parse {
                file: path.display().to_string(),
                line: e.line(),
                msg: e.to_string(),
            })?
        }
        None => ConfigFile::default(),
    };
    let defaults = Tol::default();
    Ok(RunConfig {
        command: cli.command.name().to_string(),
        input_dir: cli.input_dir.clone().or(file.input_dir),
        output_dir: cli
            .output_dir
            .clone()
            .or(file.output_dir)
            .unwrap_or_else(|| PathBuf::from(".")),
        ell: cli.ell.clone().or(file.ell),
        horizon: cli.horizon.or(file.horizon),
        steps: cli.steps.or(file.steps),
        rank_rtol: cli.rank_rtol.or(file.rank_rtol).unwrap_or(defaults.rank_rtol),
        abs_floor: file.abs_floor.unwrap_or(defaults.abs_floor),
        stab_margin: file.stab_margin.unwrap_or(defaults.stab_margin),
        seed: cli.seed.or(file.seed).unwrap_or(DEFAULT_PROBE_SEED),
        heat: file.heat.unwrap_or_default(),
    })
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli)?;
    let tol = cfg.tol()?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::Io {
        path: cfg.output_dir.display().to_string(),
        source: e,
    })?;
    let summary = match &cli.command {
        Command::Reduce => cmd_reduce(&cfg, &tol)?,
        Command::CheckObservability => cmd_check(&cfg, &tol, false)?,
        Command::CheckDetectability => cmd_check(&cfg, &tol, true)?,
        Command::DesignFinite => cmd_design_finite(&cfg, &tol)?,
        Command::DesignInfinite => cmd_design_infinite(&cfg, &tol)?,
        Command::Estimate { signal, mode } => cmd_estimate(&cfg, &tol, signal.as_deref(), *mode)?,
        Command::HeatDemo => cmd_heat_demo(&cfg, &tol)?,
    };
    let sidecar = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "result": summary,
    });
    write_json(&cfg.output_dir.join("run.json"), &sidecar)
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v).expect("JSON values serialize");
    fs::write(path, text + "\n").map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn load_triple(dir: &Path) -> Result<DaeTriple> {
    let f = read_matrix(&dir.join("F_matrix.txt"))?;
    let a = read_matrix(&dir.join("A_matrix.txt"))?;
    let h = read_matrix(&dir.join("H_matrix.txt"))?;
    DaeTriple::new(f, a, h)
}

fn load_optional(dir: &Path, name: &str) -> Result<Option<Mat>> {
    let path = dir.join(name);
    if path.exists() {
        read_matrix(&path).map(Some)
    } else {
        Ok(None)
    }
}

/// Weights from Q0/Q/R files when present, identity otherwise.
fn load_weights(dir: &Path, d: &DaeTriple) -> Result<WeightSpec> {
    let (m, p) = (d.m(), d.p());
    let q0 = load_optional(dir, "Q0_matrix.txt")?.unwrap_or_else(|| Mat::identity(m, m));
    let q = load_optional(dir, "Q_matrix.txt")?.unwrap_or_else(|| Mat::identity(m, m));
    let r = load_optional(dir, "R_matrix.txt")?.unwrap_or_else(|| Mat::identity(p, p));
    let w = WeightSpec::new(q0, q, r)?;
    w.check_against(d)?;
    Ok(w)
}

/// Parsed functionals with display labels.
struct Ells {
    labels: Vec<String>,
    ells: Vec<Functional>,
}

fn parse_ells(spec: Option<&str>, m: usize, default_all: bool) -> Result<Ells> {
    let Some(spec) = spec else {
        if default_all {
            return Ok(Ells {
                labels: (1..=m).map(|i| format!("e{i}")).collect(),
                ells: (0..m).map(|i| Functional::unit(m, i)).collect::<Result<_>>()?,
            });
        }
        return Err(Error::InvalidArgument("no functionals given; pass --ell".into()));
    };
    let spec = spec.trim();
    if let Some(file) = spec.strip_prefix('@') {
        let rows = read_matrix(Path::new(file))?;
        if rows.nrows() == 0 {
            return Err(Error::InvalidArgument(format!("{file} holds no functionals")));
        }
        if rows.ncols() != m {
            return Err(Error::Dimension(format!(
                "functionals in {file} have length {}, expected {m}",
                rows.ncols()
            )));
        }
        let ells = rows
            .row_iter()
            .map(|r| Functional::new(Vector::from_iterator(m, r.iter().copied())))
            .collect::<Result<Vec<_>>>()?;
        return Ok(Ells {
            labels: (1..=ells.len()).map(|i| format!("l{i}")).collect(),
            ells,
        });
    }
    let mut labels = Vec::new();
    let mut ells = Vec::new();
    for field in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let idx: usize = field
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("functional index {field:?} is not a positive integer")))?;
        if idx == 0 {
            return Err(Error::InvalidArgument("functional indices are 1-based".into()));
        }
        ells.push(Functional::unit(m, idx - 1)?);
        labels.push(format!("e{idx}"));
    }
    if ells.is_empty() {
        return Err(Error::InvalidArgument("empty functional list".into()));
    }
    Ok(Ells { labels, ells })
}

fn write_assoc(dir: &Path, s: &AssocLti) -> Result<()> {
    write_matrix(&dir.join("Aa_matrix.txt"), &s.aa)?;
    write_matrix(&dir.join("Ba_matrix.txt"), &s.ba)?;
    write_matrix(&dir.join("Ca_matrix.txt"), &s.ca)?;
    write_matrix(&dir.join("Da_matrix.txt"), &s.da)?;
    write_matrix(&dir.join("LMAP_matrix.txt"), &s.state_map)
}

fn write_stab(dir: &Path, g: &StabLti) -> Result<()> {
    write_matrix(&dir.join("Ag_matrix.txt"), &g.ag)?;
    write_matrix(&dir.join("Bg_matrix.txt"), &g.bg)?;
    write_matrix(&dir.join("Cg_matrix.txt"), &g.cg)?;
    write_matrix(&dir.join("Dg_matrix.txt"), &g.dg)?;
    write_matrix(&dir.join("LMAPg_matrix.txt"), &g.state_map)
}

fn write_triple(dir: &Path, d: &DaeTriple) -> Result<()> {
    write_matrix(&dir.join("F_matrix.txt"), d.f())?;
    write_matrix(&dir.join("A_matrix.txt"), d.a())?;
    write_matrix(&dir.join("H_matrix.txt"), d.h())
}

fn cmd_reduce(cfg: &RunConfig, tol: &Tol) -> Result<Value> {
    let d = load_triple(cfg.input_dir()?)?;
    let s = assoc_lti(&d, tol)?;
    let g = stab_assoc_lti(&s, tol)?;
    let out = &cfg.output_dir;
    write_triple(out, &d)?;
    write_assoc(out, &s)?;
    write_stab(out, &g)?;
    println!(
        "associated LTI: n_hat = {}, inputs = {}; stabilizable part: dimension {}",
        s.n_hat(),
        s.inputs(),
        g.dim()
    );
    Ok(json!({ "n_hat": s.n_hat(), "inputs": s.inputs(), "stab_dim": g.dim() }))
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn cmd_check(cfg: &RunConfig, tol: &Tol, hautus: bool) -> Result<Value> {
    let d = load_triple(cfg.input_dir()?)?;
    let ells = parse_ells(cfg.ell.as_deref(), d.m(), true)?;
    let s = assoc_lti(&d, tol)?;
    let g = stab_assoc_lti(&s, tol)?;
    let mut verdicts = Vec::new();
    for (label, ell) in ells.labels.iter().zip(&ells.ells) {
        let obs = is_l_impulse_observable_with(&d, &s, ell, tol)?;
        let det = is_l_detectable_with(&d, &s, &g, ell, tol)?;
        println!("{label}: impulse-observable {}, detectable {}", yes_no(obs), yes_no(det));
        verdicts.push(json!({ "ell": label, "impulse_observable": obs, "detectable": det }));
    }
    let mut global = serde_json::Map::new();
    let rank = impulse_obs_rank_check(&d, tol)?;
    println!("rank test for all functionals: {rank:?}");
    global.insert("rank_check".into(), json!(format!("{rank:?}")));
    if hautus {
        let h = detectability_hautus_check_seeded(&d, tol, cfg.seed)?;
        println!("Hautus test for all observable functionals: {}", yes_no(h));
        global.insert("hautus_check".into(), json!(h));
    }
    let summary = json!({ "verdicts": verdicts, "global": global });
    write_json(&cfg.output_dir.join("verdicts.json"), &summary)?;
    Ok(summary)
}

const DEFAULT_FINITE_STEPS: usize = 1000;

fn cmd_design_finite(cfg: &RunConfig, tol: &Tol) -> Result<Value> {
    let dir = cfg.input_dir()?;
    let d = load_triple(dir)?;
    let w = load_weights(dir, &d)?;
    let ells = parse_ells(cfg.ell.as_deref(), d.m(), false)?;
    let t1 = cfg.horizon()?;
    let steps = cfg.steps_or(DEFAULT_FINITE_STEPS)?;
    let out = &cfg.output_dir;
    let mut sigmas = Vec::new();
    let mut first = None;
    for (label, ell) in ells.labels.iter().zip(&ells.ells) {
        let obs = design_finite(&d, &w, ell, t1, steps, tol)?;
        println!("{label}: sigma = {}", obs.sigma);
        sigmas.push(json!({ "ell": label, "sigma": obs.sigma }));
        first.get_or_insert(obs);
    }
    let obs = first.expect("at least one functional");
    write_assoc(out, &obs.assoc)?;
    write_matrix(&out.join("P_matrix.txt"), obs.dre.last())?;
    // Gain schedule K(t), one row per grid point, entries row-major.
    let k0 = &obs.dre.k[0];
    let mut header = vec!["time".to_string()];
    for i in 0..k0.nrows() {
        for j in 0..k0.ncols() {
            header.push(format!("K{}_{}", i + 1, j + 1));
        }
    }
    let time: Vec<f64> = (0..=obs.dre.steps()).map(|k| k as f64 * obs.dre.dt).collect();
    let columns: Vec<Vec<f64>> = (0..k0.nrows())
        .flat_map(|i| (0..k0.ncols()).map(move |j| (i, j)))
        .map(|(i, j)| obs.dre.k.iter().map(|k| k[(i, j)]).collect())
        .collect();
    write_columns(&out.join("K_schedule.csv"), &header, &time, &columns)?;
    let summary = json!({ "horizon": t1, "steps": steps, "sigma": sigmas });
    write_json(&out.join("sigma.json"), &summary)?;
    Ok(summary)
}

fn cmd_design_infinite(cfg: &RunConfig, tol: &Tol) -> Result<Value> {
    let dir = cfg.input_dir()?;
    let d = load_triple(dir)?;
    let w = load_weights(dir, &d)?;
    let ells = parse_ells(cfg.ell.as_deref(), d.m(), false)?;
    let design = design_infinite_full(&d, &w, &ells.ells, tol)?;
    let out = &cfg.output_dir;
    write_assoc(out, &design.assoc)?;
    write_stab(out, &design.stab)?;
    write_matrix(&out.join("P_matrix.txt"), &design.care.p)?;
    write_matrix(&out.join("K_matrix.txt"), &design.care.k)?;
    write_matrix(&out.join("Ao_matrix.txt"), &design.observer.ao)?;
    write_matrix(&out.join("Bo_matrix.txt"), &design.observer.bo)?;
    write_matrix(&out.join("Co_matrix.txt"), &design.observer.co)?;
    let mut sigmas = Vec::new();
    for (label, s) in ells.labels.iter().zip(&design.observer.sigma) {
        println!("{label}: sigma = {s}");
        sigmas.push(json!({ "ell": label, "sigma": s }));
    }
    println!(
        "CARE residual {:.3e}, observer spectral abscissa {:.6}",
        design.care.residual, design.care.closed_loop_abscissa
    );
    let summary = json!({
        "sigma": sigmas,
        "care_residual": design.care.residual,
        "spectral_abscissa": design.care.closed_loop_abscissa,
        "observer_dim": design.observer.ao.nrows(),
    });
    write_json(&out.join("sigma.json"), &summary)?;
    Ok(summary)
}

fn cmd_estimate(cfg: &RunConfig, tol: &Tol, signal: Option<&Path>, mode: Horizon) -> Result<Value> {
    let dir = cfg.input_dir()?;
    let d = load_triple(dir)?;
    let w = load_weights(dir, &d)?;
    let ells = parse_ells(cfg.ell.as_deref(), d.m(), false)?;
    let path = signal.map(Path::to_path_buf).unwrap_or_else(|| dir.join("y.csv"));
    let y = read_signal(&path)?;
    if y.dim() != d.p() {
        return Err(Error::Dimension(format!(
            "{} has {} output columns, the triple has p = {}",
            path.display(),
            y.dim(),
            d.p()
        )));
    }
    let out = &cfg.output_dir;
    let mut header = vec!["time".to_string()];
    header.extend(ells.labels.iter().cloned());
    match mode {
        Horizon::Infinite => {
            let design = design_infinite_full(&d, &w, &ells.ells, tol)?;
            let est = run_infinite(&design.observer, &y)?;
            let time: Vec<f64> = (0..est.len()).map(|k| est.time(k)).collect();
            let cols: Vec<Vec<f64>> = (0..est.dim()).map(|i| est.component(i)).collect();
            write_columns(&out.join("estimate.csv"), &header, &time, &cols)?;
            println!("wrote {} estimate samples", est.len());
            Ok(json!({ "mode": "infinite", "samples": est.len(), "sigma": design.observer.sigma }))
        }
        Horizon::Finite => {
            let t1 = cfg.horizon.unwrap_or(y.end_time());
            let steps = cfg.steps_or(y.len() - 1)?;
            let mut values = Vec::new();
            let mut sigmas = Vec::new();
            for (label, ell) in ells.labels.iter().zip(&ells.ells) {
                let obs = design_finite(&d, &w, ell, t1, steps, tol)?;
                let v = run_finite(&obs, &y)?;
                println!("{label}: estimate at t = {t1}: {v} (sigma = {})", obs.sigma);
                values.push(vec![v]);
                sigmas.push(obs.sigma);
            }
            write_columns(&out.join("estimate.csv"), &header, &[t1], &values)?;
            Ok(json!({ "mode": "finite", "horizon": t1, "sigma": sigmas }))
        }
    }
}

fn heat_config(cfg: &RunConfig) -> Result<HeatConfig> {
    let base = HeatConfig::default();
    let hc = HeatConfig {
        n: cfg.heat.n,
        nu: cfg.heat.nu,
        n1: cfg.heat.n1,
        n2: cfg.heat.n2,
        c: cfg.heat.c,
        horizon: cfg.horizon.unwrap_or(base.horizon),
        steps: cfg.steps.unwrap_or(base.steps),
        q0: None,
    };
    hc.validate()?;
    Ok(hc)
}

fn cmd_heat_demo(cfg: &RunConfig, tol: &Tol) -> Result<Value> {
    let hc = heat_config(cfg)?;
    let report = heatpde::run_demo(&hc, tol)?;
    let (d, w) = heatpde::assemble_dae(&hc)?;
    let out = &cfg.output_dir;
    write_heat_artifacts(out, &d, &w, &report)?;
    for (i, s) in report.sigma().iter().enumerate() {
        println!("e{}: sigma = {s}", i + 1);
    }
    let verdicts: Vec<String> = report
        .detectable
        .iter()
        .enumerate()
        .map(|(i, &b)| format!("e{}:{}", i + 1, yes_no(b)))
        .collect();
    println!("detectable: {}", verdicts.join(" "));
    let summary = heat_summary(&hc, &report);
    write_json(&out.join("heat_report.json"), &summary)?;
    Ok(summary)
}

pub fn heat_summary(hc: &HeatConfig, r: &HeatReport) -> Value {
    let tracking: Vec<Value> = (0..hc.nu)
        .map(|i| json!({ "ell": format!("e{}", i + 1), "relative_l2_error": r.relative_tracking_error(i) }))
        .collect();
    json!({
        "stacked_rank": r.stacked_rank,
        "state_dim": r.state_dim,
        "detectable": r.detectable,
        "sigma": r.sigma(),
        "care_residual": r.design.care.residual,
        "spectral_abscissa": r.design.care.closed_loop_abscissa,
        "tracking": tracking,
        "reconstruction_point": PROBE_POINT,
        "reconstruction_l2": r.reconstruction_norm(),
        "reconstruction_relative_error": r.reconstruction_error(),
    })
}

/// The 21 matrix files plus the traces used for plotting.
pub fn write_heat_artifacts(out: &Path, d: &DaeTriple, w: &WeightSpec, r: &HeatReport) -> Result<()> {
    write_triple(out, d)?;
    write_matrix(&out.join("Q0_matrix.txt"), w.q0())?;
    write_matrix(&out.join("Q_matrix.txt"), w.q())?;
    write_matrix(&out.join("R_matrix.txt"), w.r())?;
    write_assoc(out, &r.design.assoc)?;
    write_stab(out, &r.design.stab)?;
    write_matrix(&out.join("P_matrix.txt"), &r.design.care.p)?;
    write_matrix(&out.join("K_matrix.txt"), &r.design.care.k)?;
    write_matrix(&out.join("Ao_matrix.txt"), &r.design.observer.ao)?;
    write_matrix(&out.join("Bo_matrix.txt"), &r.design.observer.bo)?;
    write_matrix(&out.join("Co_matrix.txt"), &r.design.observer.co)?;

    let fx = &r.truth.fx;
    let time: Vec<f64> = (0..fx.len()).map(|k| fx.time(k)).collect();
    for i in 0..r.estimates.dim() {
        let header = ["time", "truth", "estimate", "error"].map(String::from);
        let cols = vec![fx.component(i), r.estimates.component(i), r.error_trace(i)];
        write_columns(&out.join(format!("trace_e{}.csv", i + 1)), &header, &time, &cols)?;
    }
    let header = ["time", "true", "projected", "estimate"].map(String::from);
    let cols = vec![r.true_trace.clone(), r.projected_trace.clone(), r.recon_trace.clone()];
    write_columns(&out.join("reconstruction.csv"), &header, &time, &cols)?;
    write_signal(&out.join("y_true.csv"), "y", &r.truth.y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ell_parsing() {
        let e = parse_ells(Some("1, 3"), 4, false).unwrap();
        assert_eq!(e.labels, vec!["e1", "e3"]);
        assert_eq!(e.ells[1].ell()[2], 1.0);
        assert!(parse_ells(Some(""), 4, true).is_err());
        assert!(parse_ells(Some("0"), 4, true).is_err());
        assert!(parse_ells(Some("5"), 4, true).is_err());
        assert!(parse_ells(None, 4, false).is_err());
        assert_eq!(parse_ells(None, 3, true).unwrap().ells.len(), 3);
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        assert!(serde_json::from_str::<ConfigFile>(r#"{"horizon": 2.0}"#).is_ok());
        assert!(serde_json::from_str::<ConfigFile>(r#"{"horizn": 2.0}"#).is_err());
    }
}
