//! Command-line front end.
//!
//! Every command reads a TOML [`Profile`] (defaults when `--config` is
//! absent), writes its artifacts to `--out` and finishes with a JSON
//! manifest listing each file and its SHA-256. Artifact names follow
//! `<command>_<param>_<hash>.<ext>`, where the hash covers the resolved
//! profile and the flags, so reruns of an unchanged config overwrite the
//! same files with identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{linspace, static_limits, sweep};
use crate::config::Profile;
use crate::controllers::Controller;
use crate::error::{Error, Result};
use crate::matops::Matrix;
use crate::plant::plant_matrices;
use crate::sim::{
    run_scenario, step_metrics, transfer_limit_search, Axis, LimitAxis, ScenarioConfig, TimeSeries, TransferLimit,
};
use crate::synthesis::{augment, check_controllability, SynthesisReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_UNSTABLE: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Synthesize,
    Simulate,
    Compare,
    Sweep,
    Limits,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synthesize => "synthesize",
            Command::Simulate => "simulate",
            Command::Compare => "compare",
            Command::Sweep => "sweep",
            Command::Limits => "limits",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum ControllerChoice {
    Siso,
    Mimo,
    #[default]
    Both,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "vsc-ctrl", version, about = "Current-controller synthesis, simulation and stability analysis for grid-tied converters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
    /// TOML profile; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = ControllerChoice::Both)]
    pub controller: ControllerChoice,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Exit with status 4 when a run diverges or a sweep finds an unstable point.
    #[arg(long, global = true)]
    pub forbid_instability: bool,
}

#[derive(Clone, Copy, Debug, Subcommand)]
pub enum Sub {
    /// LQR gain synthesis report.
    Synthesize,
    /// Time series of the configured scenario.
    Simulate,
    /// Same scenario under both controllers plus a step-metrics table.
    Compare,
    /// Eigenvalue sweep of the linearized closed loop.
    Sweep,
    /// Static transfer limits, optionally with the simulated search.
    Limits,
}

impl Sub {
    pub fn command(self) -> Command {
        match self {
            Sub::Synthesize => Command::Synthesize,
            Sub::Simulate => Command::Simulate,
            Sub::Compare => Command::Compare,
            Sub::Sweep => Command::Sweep,
            Sub::Limits => Command::Limits,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmittedFile {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub config: Option<String>,
    pub out_dir: String,
    pub files: Vec<EmittedFile>,
}

/// What a command produced and how the process should exit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    pub exit_code: i32,
    pub messages: Vec<String>,
}

/// Exit status for a library error.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Writer {
    dir: PathBuf,
    hash: String,
    command: Command,
    files: Vec<EmittedFile>,
}

impl Writer {
    fn emit(&mut self, param: &str, ext: &str, body: &[u8]) -> Result<PathBuf> {
        let name = format!("{}_{}_{}.{}", self.command.name(), param, self.hash, ext);
        let path = self.dir.join(&name);
        std::fs::write(&path, body)?;
        self.files.push(EmittedFile {
            name,
            sha256: sha256_hex(body),
            bytes: body.len(),
        });
        Ok(path)
    }
}

fn controllers(profile: &Profile, choice: ControllerChoice) -> Result<Vec<Controller>> {
    Ok(match choice {
        ControllerChoice::Siso => vec![profile.siso_controller()],
        ControllerChoice::Mimo => vec![profile.mimo_controller()?],
        ControllerChoice::Both => vec![profile.siso_controller(), profile.mimo_controller()?],
    })
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

fn series_body(ts: &TimeSeries, format: Format) -> Vec<u8> {
    match format {
        Format::Csv => ts.to_csv_string().into_bytes(),
        Format::Json => json_bytes(ts),
    }
}

fn fmt_metric(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v}"),
        Some(v) if v.is_infinite() => "inf".into(),
        _ => "NaN".into(),
    }
}

/// Runs one parsed invocation. Library errors come back as `Err`; use
/// [`exit_code_for`] to turn them into a status.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let profile = match &cli.config {
        Some(p) => Profile::load(p)?,
        None => Profile::default(),
    };
    let command = cli.command.command();
    let mut key = profile.to_toml_string();
    write!(key, "\n#{:?}|{:?}|{:?}|{}", command, cli.controller, cli.format, cli.forbid_instability).unwrap();
    let hash = sha256_hex(key.as_bytes())[..16].to_string();
    std::fs::create_dir_all(&cli.out)?;
    let mut w = Writer {
        dir: cli.out.clone(),
        hash,
        command,
        files: Vec::new(),
    };
    let mut messages = Vec::new();
    let mut exit_code = EXIT_OK;
    let mut unstable = false;

    match command {
        Command::Synthesize => {
            match profile.synthesize() {
                Ok(rep) => {
                    let body = match cli.format {
                        Format::Json => json_bytes(&rep),
                        Format::Csv => synthesis_csv(&rep).into_bytes(),
                    };
                    let ext = if cli.format == Format::Json { "json" } else { "csv" };
                    w.emit("report", ext, &body)?;
                    messages.push(format!(
                        "K_P = {:?}, K_I = {:?}, CARE residual {:.3e}",
                        rep.result.k_p.to_rows(),
                        rep.result.k_i.to_rows(),
                        rep.result.care_residual
                    ));
                    if !rep.result.closed_loop_hurwitz {
                        messages.push("closed loop is not Hurwitz".into());
                        unstable = true;
                    }
                }
                Err(e @ Error::Uncontrollable { .. }) => {
                    let mut plant = plant_matrices(&profile.filter()?, profile.omega_nom())?;
                    if let Some(b) = &profile.mimo.b_override {
                        plant.b = Matrix::try_from(b.clone())?;
                    }
                    let report = check_controllability(&augment(&plant)?)?;
                    let body = json_bytes(&serde_json::json!({
                        "error": e.to_string(),
                        "controllability": report,
                    }));
                    w.emit("report", "json", &body)?;
                    messages.push(e.to_string());
                    exit_code = EXIT_NUMERICAL;
                }
                Err(e) => return Err(e),
            }
        }
        Command::Simulate => {
            for c in controllers(&profile, cli.controller)? {
                let ts = run_scenario(&profile.scenario(c.clone())?)?;
                if ts.diverged {
                    unstable = true;
                    messages.push(format!("{} diverged at t = {:?} s", c.name(), ts.diverged_at));
                }
                let ext = if cli.format == Format::Json { "json" } else { "csv" };
                w.emit(c.name(), ext, &series_body(&ts, cli.format))?;
            }
        }
        Command::Compare => {
            let mut rows = Vec::new();
            for c in [profile.siso_controller(), profile.mimo_controller()?] {
                let cfg = profile.scenario(c.clone())?;
                let ts = run_scenario(&cfg)?;
                if ts.diverged {
                    unstable = true;
                    messages.push(format!("{} diverged at t = {:?} s", c.name(), ts.diverged_at));
                }
                let ext = if cli.format == Format::Json { "json" } else { "csv" };
                w.emit(c.name(), ext, &series_body(&ts, cli.format))?;
                rows.extend(metric_rows(c.name(), &cfg, &ts));
            }
            match cli.format {
                Format::Csv => {
                    let mut s = String::from("controller,axis,step_time,rise,overshoot_pct,settle_5pct,cross_peak,iae\n");
                    for r in &rows {
                        writeln!(
                            s,
                            "{},{},{},{},{},{},{},{}",
                            r.controller,
                            r.axis,
                            r.step_time,
                            fmt_metric(r.rise),
                            fmt_metric(r.overshoot_pct),
                            fmt_metric(r.settle_5pct),
                            fmt_metric(r.cross_peak),
                            fmt_metric(r.iae)
                        )
                        .unwrap();
                    }
                    w.emit("metrics", "csv", s.as_bytes())?;
                }
                Format::Json => {
                    w.emit("metrics", "json", &json_bytes(&rows))?;
                }
            }
        }
        Command::Sweep => {
            let s = &profile.sweep;
            let values = linspace(s.from, s.to, s.points);
            if values.is_empty() {
                return Err(Error::Config("sweep range is empty (points = 0)".into()));
            }
            for c in controllers(&profile, cli.controller)? {
                let template = profile.sweep_template(c.clone())?;
                let res = sweep(s.param, &values, &template)?;
                messages.push(format!(
                    "{} {}: first_unstable = {:?}, unstable points = {}",
                    c.name(),
                    s.param.name(),
                    res.first_unstable,
                    res.unstable_count()
                ));
                if res.first_unstable.is_some() {
                    unstable = true;
                }
                let param = format!("{}-{}", s.param.name(), c.name());
                match cli.format {
                    Format::Csv => {
                        let mut buf = Vec::new();
                        res.write_csv(&mut buf)?;
                        w.emit(&param, "csv", &buf)?;
                    }
                    Format::Json => {
                        w.emit(&param, "json", &json_bytes(&res))?;
                    }
                }
            }
        }
        Command::Limits => {
            let l = &profile.limits;
            let st = static_limits(l.scr, l.xr, l.vg_over_vo)?;
            messages.push(format!("static P_max = {:.4} p.u., Q = {:.4} p.u.", st.p_max_pu, st.q_pu));
            let mut searched = Vec::new();
            if l.search {
                let search = profile.limit_search();
                for c in controllers(&profile, cli.controller)? {
                    let template = profile.scenario(c.clone())?;
                    for axis in [LimitAxis::P, LimitAxis::Q] {
                        let lim = transfer_limit_search(&template, axis, l.scr, l.xr, &search)?;
                        searched.push(SearchRow {
                            controller: c.name().into(),
                            axis,
                            limit: lim,
                        });
                    }
                }
            }
            let body = match cli.format {
                Format::Json => json_bytes(&serde_json::json!({
                    "inputs": { "scr": l.scr, "xr": l.xr, "vg_over_vo": l.vg_over_vo },
                    "static": st,
                    "search": searched,
                })),
                Format::Csv => {
                    let mut s = String::from("quantity,value\n");
                    writeln!(s, "scr,{}", l.scr).unwrap();
                    writeln!(s, "xr,{}", l.xr).unwrap();
                    writeln!(s, "vg_over_vo,{}", l.vg_over_vo).unwrap();
                    writeln!(s, "p_max_pu,{}", st.p_max_pu).unwrap();
                    writeln!(s, "q_pu,{}", st.q_pu).unwrap();
                    for r in &searched {
                        let axis = match r.axis {
                            LimitAxis::P => "p",
                            LimitAxis::Q => "q",
                        };
                        writeln!(s, "{}_{}_limit,{}", r.controller, axis, describe_limit(&r.limit)).unwrap();
                    }
                    s.into_bytes()
                }
            };
            let ext = if cli.format == Format::Json { "json" } else { "csv" };
            w.emit("static", ext, &body)?;
        }
    }

    if unstable && cli.forbid_instability && exit_code == EXIT_OK {
        exit_code = EXIT_UNSTABLE;
    }
    let manifest = RunManifest {
        command,
        config: cli.config.as_ref().map(|p| p.display().to_string()),
        out_dir: cli.out.display().to_string(),
        files: w.files.clone(),
    };
    let manifest_path = cli.out.join(format!("{}_manifest_{}.json", command.name(), w.hash));
    std::fs::write(&manifest_path, json_bytes(&manifest))?;
    Ok(Outcome {
        manifest,
        manifest_path,
        exit_code,
        messages,
    })
}

#[derive(Clone, Debug, Serialize)]
struct SearchRow {
    controller: String,
    axis: LimitAxis,
    limit: TransferLimit,
}

fn describe_limit(l: &TransferLimit) -> String {
    match *l {
        TransferLimit::Point { value } => format!("{value}"),
        TransferLimit::AtLeast { cap } => format!(">={cap}"),
        TransferLimit::Bracket { lo, hi } => format!("[{lo};{hi}]"),
        TransferLimit::Unstable => "unstable".into(),
    }
}

/// One row of the comparison table. `None` marks a metric that is
/// undefined because the window has no step or the run diverged in it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub controller: String,
    pub axis: String,
    pub step_time: f64,
    pub rise: Option<f64>,
    pub overshoot_pct: Option<f64>,
    pub settle_5pct: Option<f64>,
    pub cross_peak: Option<f64>,
    pub iae: Option<f64>,
}

fn metric_rows(name: &str, cfg: &ScenarioConfig, ts: &TimeSeries) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    let mut times: Vec<f64> = cfg.setpoint_schedule.iter().map(|e| e.time).filter(|&t| t > 0.0 && t <= cfg.t_end).collect();
    times.dedup();
    for axis in [Axis::D, Axis::Q] {
        for &t in &times {
            let m = step_metrics(ts, t, axis);
            if matches!(m, Err(Error::NoStep { .. })) {
                continue;
            }
            let m = m.ok();
            rows.push(MetricRow {
                controller: name.into(),
                axis: axis.name().into(),
                step_time: t,
                rise: m.map(|m| m.rise_time_10_90),
                overshoot_pct: m.map(|m| m.overshoot_pct),
                settle_5pct: m.map(|m| m.settling_time_5pct),
                cross_peak: m.map(|m| m.cross_coupling_peak),
                iae: m.map(|m| m.iae),
            });
        }
    }
    if rows.is_empty() {
        rows.push(MetricRow {
            controller: name.into(),
            axis: "none".into(),
            step_time: f64::NAN,
            rise: None,
            overshoot_pct: None,
            settle_5pct: None,
            cross_peak: None,
            iae: None,
        });
    }
    rows
}

fn synthesis_csv(rep: &SynthesisReport) -> String {
    let mut s = String::from("name,row,col,value\n");
    let r = &rep.result;
    for (name, m) in [
        ("a_bar", &rep.system.a_bar),
        ("b_bar", &rep.system.b_bar),
        ("p", &r.p),
        ("k_p", &r.k_p),
        ("k_i", &r.k_i),
    ] {
        for (i, row) in m.to_rows().iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                writeln!(s, "{name},{i},{j},{v}").unwrap();
            }
        }
    }
    writeln!(s, "care_residual,0,0,{}", r.care_residual).unwrap();
    for (k, l) in r.closed_loop.iter().enumerate() {
        writeln!(s, "eig_re,{k},0,{}", l.re).unwrap();
        writeln!(s, "eig_im,{k},0,{}", l.im).unwrap();
    }
    s
}

/// Parses `args`, runs the command and reports to stdout/stderr. Returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(out) => {
            for m in &out.messages {
                println!("{m}");
            }
            for f in &out.manifest.files {
                println!("wrote {}", Path::new(&out.manifest.out_dir).join(&f.name).display());
            }
            println!("manifest {}", out.manifest_path.display());
            out.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
