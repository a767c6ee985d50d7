//! Scenario runner behind the `photonkin` binary.
//!
//! A run reads one JSON scenario, executes a task by composing the library
//! modules, and writes CSV data plus JSON reports into the output directory.
//! Exit status: 0 when every tolerance gate passes, 1 on a tolerance
//! failure, 2 for an invalid configuration, 3 for I/O errors.

use clap::{Parser, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use crate::arrival::{self, default_epsilon};
use crate::dynamics::{self, Lattice, MaxwellSteps};
use crate::error::Error;
use crate::photon_state::{self, HelicityAmplitude, StateSpec};
use crate::polarization::{self, Helicity};
use crate::position_op::{self, CommutatorKind, Derivative, GaussianState, PositionForm, VectorRep};
use crate::sphgrid::{GridParams, MomentumGrid};
use crate::state_io::{self, format_float, AmplitudeDtype};
use crate::{Vec3, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    VerifyFrames,
    VerifyCommutators,
    Evolve,
    MaxwellCheck,
    Arrival,
    KernelCheck,
    PositionDensity,
    /// Schema check only.
    Validate,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::VerifyFrames => "verify-frames",
            Task::VerifyCommutators => "verify-commutators",
            Task::Evolve => "evolve",
            Task::MaxwellCheck => "maxwell-check",
            Task::Arrival => "arrival",
            Task::KernelCheck => "kernel-check",
            Task::PositionDensity => "position-density",
            Task::Validate => "validate",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Task::value_variants().iter().copied().find(|t| t.name() == s)
    }

    fn needs_state(self) -> bool {
        !matches!(self, Task::VerifyFrames | Task::KernelCheck | Task::Validate)
    }
}

#[derive(Debug, Parser)]
#[command(name = "photonkin", version, about = "One-photon kinematics: verification suites and time-of-arrival densities")]
pub struct Args {
    /// Task to run.
    #[arg(value_enum)]
    pub task: Task,
    /// Scenario file (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Seed for random probes; overrides the scenario's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Multiplies every tolerance gate.
    #[arg(long, default_value_t = 1.0)]
    pub tolerance_scale: f64,
}

/// Exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Pass = 0,
    ToleranceFailure = 1,
    ConfigInvalid = 2,
    IoError = 3,
}

/// A problem found while checking a scenario, located by a JSON path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(Vec<Diagnostic>),
    Io(String),
    /// Numerical inadequacy detected before any gate could be evaluated.
    Tolerance(String),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Config(_) => ExitStatus::ConfigInvalid,
            CliError::Io(_) => ExitStatus::IoError,
            CliError::Tolerance(_) => ExitStatus::ToleranceFailure,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(d) => {
                writeln!(f, "invalid configuration:")?;
                for x in d {
                    writeln!(f, "  {x}")?;
                }
                Ok(())
            }
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Tolerance(m) => write!(f, "tolerance failure: {m}"),
        }
    }
}

fn config_error(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config(vec![Diagnostic { path: path.into(), message: message.into() }])
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(e) => CliError::Io(e.to_string()),
            e @ Error::NormLeak { .. } => CliError::Tolerance(e.to_string()),
            e => config_error("$", e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Lattice given by its centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub center: [f64; 3],
    pub spacing: f64,
    pub shape: [usize; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub dt: f64,
    /// Defaults to `10/k_max`.
    pub epsilon: Option<f64>,
    /// Defaults to the grid's `k_max`.
    pub k_max: Option<f64>,
}

/// Optional user expectations turned into extra gates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    pub mean_time: Option<f64>,
    #[serde(default = "default_mean_time_tolerance")]
    pub mean_time_tolerance: f64,
    pub kernel_value: Option<f64>,
    #[serde(default = "default_kernel_tolerance")]
    pub kernel_tolerance: f64,
}

fn default_mean_time_tolerance() -> f64 {
    0.1
}

fn default_kernel_tolerance() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dtype: AmplitudeDtype,
}

/// Where the initial state comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSource {
    Spec(StateSpec),
    /// Sidecar of a binary amplitude file, relative to the scenario file.
    File(PathBuf),
}

/// A parsed, validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub task: Option<Task>,
    pub seed: u64,
    pub grid: GridParams,
    pub state: Option<StateSource>,
    pub z: [f64; 3],
    pub window: Option<(f64, f64)>,
    pub n_t: usize,
    pub t_samples: Vec<f64>,
    pub probes: usize,
    pub lattice: Option<LatticeConfig>,
    pub kernel: KernelConfig,
    pub expect: Expectations,
    pub output: OutputConfig,
}

const TOP_KEYS: &[&str] = &["task", "seed", "grid", "state", "z", "window", "n_t", "t_samples", "probes", "lattice", "kernel", "expect", "output"];
const GRID_KEYS: &[&str] = &["n_k", "n_theta", "n_phi", "k_min", "k_max", "radial_map", "polar_map"];
const STATE_KEYS: &[&str] = &["kind", "center_p", "width", "center_x", "helicity_weights"];

struct Checker {
    diags: Vec<Diagnostic>,
}

impl Checker {
    fn push(&mut self, path: &str, msg: impl Into<String>) {
        self.diags.push(Diagnostic { path: path.into(), message: msg.into() });
    }

    fn unknown_keys(&mut self, path: &str, obj: &Map<String, Value>, known: &[&str]) {
        for k in obj.keys() {
            if !known.contains(&k.as_str()) {
                self.push(&format!("{path}.{k}"), "unknown key");
            }
        }
    }

    fn object<'a>(&mut self, path: &str, v: &'a Value) -> Option<&'a Map<String, Value>> {
        let o = v.as_object();
        if o.is_none() {
            self.push(path, "expected an object");
        }
        o
    }

    fn number(&mut self, path: &str, v: Option<&Value>, required: bool) -> Option<f64> {
        match v {
            None => {
                if required {
                    self.push(path, "missing");
                }
                None
            }
            Some(x) => match x.as_f64() {
                Some(f) if f.is_finite() => Some(f),
                _ => {
                    self.push(path, "expected a finite number");
                    None
                }
            },
        }
    }

    fn count(&mut self, path: &str, v: Option<&Value>, required: bool, min: u64) -> Option<u64> {
        match v {
            None => {
                if required {
                    self.push(path, "missing");
                }
                None
            }
            Some(x) => match x.as_u64() {
                Some(n) if n >= min => Some(n),
                Some(n) => {
                    self.push(path, format!("must be at least {min}, got {n}"));
                    None
                }
                None => {
                    self.push(path, "expected a non-negative integer");
                    None
                }
            },
        }
    }

    fn vec3(&mut self, path: &str, v: Option<&Value>) -> Option<[f64; 3]> {
        let a = v?.as_array().filter(|a| a.len() == 3);
        match a.and_then(|a| a.iter().map(|x| x.as_f64().filter(|f| f.is_finite())).collect::<Option<Vec<_>>>()) {
            Some(x) => Some([x[0], x[1], x[2]]),
            None => {
                self.push(path, "expected three finite numbers");
                None
            }
        }
    }
}

/// Schema and range check of a scenario document. `task` is the task named
/// on the command line, if any.
pub fn check_document(doc: &Value, task: Option<Task>) -> Vec<Diagnostic> {
    let mut c = Checker { diags: Vec::new() };
    let Some(top) = c.object("$", doc) else { return c.diags };
    c.unknown_keys("$", top, TOP_KEYS);

    let mut task = task.filter(|t| *t != Task::Validate);
    if let Some(t) = top.get("task") {
        match t.as_str().and_then(Task::from_name) {
            Some(Task::Validate) | None => c.push("$.task", format!("unknown task {t}")),
            Some(named) => {
                if let Some(cli) = task {
                    if cli != named {
                        c.push("$.task", format!("scenario is for {}, command line asks for {}", named.name(), cli.name()));
                    }
                }
                task = Some(named);
            }
        }
    }
    if let Some(s) = top.get("seed") {
        if s.as_u64().is_none() {
            c.push("$.seed", "expected a non-negative integer");
        }
    }

    let mut k_max = None;
    match top.get("grid") {
        None => c.push("$", "missing \"grid\""),
        Some(g) => {
            if let Some(g) = c.object("$.grid", g) {
                c.unknown_keys("$.grid", g, GRID_KEYS);
                for key in ["n_k", "n_theta", "n_phi"] {
                    c.count(&format!("$.grid.{key}"), g.get(key), true, 2);
                }
                let lo = c.number("$.grid.k_min", g.get("k_min"), true);
                let hi = c.number("$.grid.k_max", g.get("k_max"), true);
                if let Some(lo) = lo {
                    if lo <= 0.0 {
                        c.push("$.grid.k_min", format!("must be positive, got {lo}"));
                    }
                }
                if let (Some(lo), Some(hi)) = (lo, hi) {
                    if hi <= lo {
                        c.push("$.grid.k_max", format!("must exceed k_min ({lo}), got {hi}"));
                    }
                }
                k_max = hi;
                match g.get("radial_map").and_then(|v| v.as_str()) {
                    Some("linear" | "log") => {}
                    Some(other) => c.push("$.grid.radial_map", format!("expected \"linear\" or \"log\", got \"{other}\"")),
                    None => c.push("$.grid.radial_map", "missing"),
                }
                if let Some(pm) = g.get("polar_map") {
                    let ok = pm.as_str() == Some("uniform")
                        || pm.get("north").and_then(|n| n.get("power")).and_then(|p| p.as_u64()).is_some_and(|p| p >= 1);
                    if !ok {
                        c.push("$.grid.polar_map", "expected \"uniform\" or {\"north\": {\"power\": n ≥ 1}}");
                    }
                }
            }
        }
    }

    match top.get("state") {
        None => {
            if task.is_some_and(Task::needs_state) {
                c.push("$", format!("missing \"state\" (required by {})", task.unwrap().name()));
            }
        }
        Some(s) => {
            if let Some(s) = c.object("$.state", s) {
                if s.contains_key("amplitude_file") {
                    c.unknown_keys("$.state", s, &["amplitude_file"]);
                    if !s["amplitude_file"].is_string() {
                        c.push("$.state.amplitude_file", "expected a path");
                    }
                } else {
                    c.unknown_keys("$.state", s, STATE_KEYS);
                    if let Some(w) = c.number("$.state.width", s.get("width"), true) {
                        if w <= 0.0 {
                            c.push("$.state.width", format!("must be positive, got {w}"));
                        }
                    }
                    if s.get("center_p").is_none() {
                        c.push("$.state.center_p", "missing");
                    }
                    c.vec3("$.state.center_p", s.get("center_p"));
                    c.vec3("$.state.center_x", s.get("center_x"));
                    if s.get("helicity_weights").is_none() {
                        c.push("$.state.helicity_weights", "missing");
                    }
                }
            }
        }
    }

    c.vec3("$.z", top.get("z"));
    if let Some(w) = top.get("window") {
        match w.as_array().filter(|a| a.len() == 2).and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?))) {
            Some((a, b)) if a.is_finite() && b.is_finite() && b > a => {}
            _ => c.push("$.window", "expected [t_min, t_max] with t_max > t_min"),
        }
    } else if task == Some(Task::Arrival) {
        c.push("$", "missing \"window\" (required by arrival)");
    }
    c.count("$.n_t", top.get("n_t"), false, 2);
    c.count("$.probes", top.get("probes"), false, 1);
    if let Some(ts) = top.get("t_samples") {
        let ok = ts.as_array().is_some_and(|a| !a.is_empty() && a.iter().all(|x| x.as_f64().is_some_and(f64::is_finite)));
        if !ok {
            c.push("$.t_samples", "expected a non-empty list of finite numbers");
        }
    }
    match top.get("lattice") {
        Some(l) => {
            if let Some(l) = c.object("$.lattice", l) {
                c.unknown_keys("$.lattice", l, &["center", "spacing", "shape"]);
                if l.get("center").is_none() {
                    c.push("$.lattice.center", "missing");
                }
                c.vec3("$.lattice.center", l.get("center"));
                if let Some(h) = c.number("$.lattice.spacing", l.get("spacing"), true) {
                    if h <= 0.0 {
                        c.push("$.lattice.spacing", format!("must be positive, got {h}"));
                    } else if let Some(k) = k_max.filter(|_| task == Some(Task::MaxwellCheck)) {
                        if h > std::f64::consts::PI / k {
                            c.push("$.lattice.spacing", format!("{h} exceeds the Nyquist spacing π/k_max = {}", std::f64::consts::PI / k));
                        }
                    }
                }
                let shape_ok = l.get("shape").and_then(|s| s.as_array()).is_some_and(|a| a.len() == 3 && a.iter().all(|x| x.as_u64().is_some_and(|n| n >= 1)));
                if !shape_ok {
                    c.push("$.lattice.shape", "expected three positive integers");
                }
            }
        }
        None => {
            if task == Some(Task::PositionDensity) {
                c.push("$", "missing \"lattice\" (required by position-density)");
            }
        }
    }
    if let Some(k) = top.get("kernel") {
        if let Some(k) = c.object("$.kernel", k) {
            c.unknown_keys("$.kernel", k, &["dt", "epsilon", "k_max"]);
            c.number("$.kernel.dt", k.get("dt"), false);
            for key in ["epsilon", "k_max"] {
                if let Some(x) = c.number(&format!("$.kernel.{key}"), k.get(key), false) {
                    if x <= 0.0 {
                        c.push(&format!("$.kernel.{key}"), format!("must be positive, got {x}"));
                    }
                }
            }
        }
    }
    if let Some(e) = top.get("expect") {
        if let Some(e) = c.object("$.expect", e) {
            c.unknown_keys("$.expect", e, &["mean_time", "mean_time_tolerance", "kernel_value", "kernel_tolerance"]);
            for key in ["mean_time_tolerance", "kernel_tolerance"] {
                if let Some(x) = c.number(&format!("$.expect.{key}"), e.get(key), false) {
                    if x <= 0.0 {
                        c.push(&format!("$.expect.{key}"), format!("must be positive, got {x}"));
                    }
                }
            }
        }
    }
    if let Some(o) = top.get("output") {
        if let Some(o) = c.object("$.output", o) {
            c.unknown_keys("$.output", o, &["dtype"]);
            if let Some(d) = o.get("dtype") {
                if !matches!(d.as_str(), Some("complex64" | "complex128")) {
                    c.push("$.output.dtype", "expected \"complex64\" or \"complex128\"");
                }
            }
        }
    }
    c.diags
}

fn typed<T: serde::de::DeserializeOwned>(path: &str, v: &Value) -> Result<T, CliError> {
    serde_json::from_value(v.clone()).map_err(|e| config_error(path, e.to_string()))
}

/// Checks and parses a scenario document.
pub fn parse_scenario(doc: &Value, task: Option<Task>) -> Result<ScenarioConfig, CliError> {
    let diags = check_document(doc, task);
    if !diags.is_empty() {
        return Err(CliError::Config(diags));
    }
    let top = doc.as_object().expect("checked");
    let get = |k: &str| top.get(k);
    let grid: GridParams = typed("$.grid", &top["grid"])?;
    let state = match get("state") {
        None => None,
        Some(s) => match s.get("amplitude_file").and_then(|p| p.as_str()) {
            Some(p) => Some(StateSource::File(PathBuf::from(p))),
            None => {
                let spec: StateSpec = typed("$.state", s)?;
                spec.validate().map_err(|e| config_error("$.state", e.to_string()))?;
                Some(StateSource::Spec(spec))
            }
        },
    };
    MomentumGrid::build(grid.clone()).map_err(|e| config_error("$.grid", e.to_string()))?;
    Ok(ScenarioConfig {
        task: get("task").and_then(|t| t.as_str()).and_then(Task::from_name),
        seed: get("seed").and_then(|s| s.as_u64()).unwrap_or(0),
        grid,
        state,
        z: get("z").map(|v| typed("$.z", v)).transpose()?.unwrap_or([0.0; 3]),
        window: get("window").map(|v| typed("$.window", v)).transpose()?,
        n_t: get("n_t").and_then(|v| v.as_u64()).unwrap_or(801) as usize,
        t_samples: get("t_samples").map(|v| typed("$.t_samples", v)).transpose()?.unwrap_or_else(|| vec![0.0, 2.5, 5.0, 7.5, 10.0]),
        probes: get("probes").and_then(|v| v.as_u64()).unwrap_or(16) as usize,
        lattice: get("lattice").map(|v| typed("$.lattice", v)).transpose()?,
        kernel: get("kernel").map(|v| typed("$.kernel", v)).transpose()?.unwrap_or_default(),
        expect: get("expect").map(|v| typed("$.expect", v)).transpose()?.unwrap_or_else(|| typed("$.expect", &Value::Object(Map::new())).unwrap()),
        output: get("output").map(|v| typed("$.output", v)).transpose()?.unwrap_or_default(),
    })
}

/// One tolerance gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Upper bound, or lower bound when `at_least` is set.
    pub tolerance: f64,
    #[serde(default)]
    pub at_least: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub task: String,
    /// SHA-256 of the canonical scenario, seed, tolerance scale and any
    /// referenced amplitude file.
    pub inputs_digest: String,
    pub seed: u64,
    pub tolerance_scale: f64,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub passed: bool,
}

struct Run<'a> {
    cfg: &'a ScenarioConfig,
    base: PathBuf,
    out: PathBuf,
    scale: f64,
    seed: u64,
    checks: Vec<Check>,
    outputs: Vec<String>,
    warnings: Vec<String>,
}

impl Run<'_> {
    fn below(&mut self, name: &str, value: f64, tol: f64) {
        let tolerance = tol * self.scale;
        self.checks.push(Check { name: name.into(), value, tolerance, at_least: false, passed: value <= tolerance });
    }

    /// Lower bounds are not scaled.
    fn above(&mut self, name: &str, value: f64, bound: f64) {
        self.checks.push(Check { name: name.into(), value, tolerance: bound, at_least: true, passed: value >= bound });
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        std::fs::write(self.out.join(name), contents)?;
        self.outputs.push(name.into());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<(), CliError> {
        let s = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
        self.write(name, &(s + "\n"))
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    fn grid(&self) -> Result<Arc<MomentumGrid>, CliError> {
        Ok(MomentumGrid::build(self.cfg.grid.clone())?)
    }

    fn spec(&self, task: Task) -> Result<&StateSpec, CliError> {
        match &self.cfg.state {
            Some(StateSource::Spec(s)) => Ok(s),
            Some(StateSource::File(_)) => Err(config_error("$.state", format!("{} needs an analytic state, not an amplitude file", task.name()))),
            None => Err(config_error("$", format!("missing \"state\" (required by {})", task.name()))),
        }
    }

    fn state(&self, grid: &Arc<MomentumGrid>) -> Result<HelicityAmplitude, CliError> {
        match &self.cfg.state {
            Some(StateSource::Spec(s)) => Ok(photon_state::from_spec(s, grid)?.state),
            Some(StateSource::File(p)) => {
                let psi = state_io::read_amplitudes(&self.base.join(p))?;
                if psi.grid().params() != grid.params() {
                    return Err(config_error("$.state.amplitude_file", "amplitude grid differs from the scenario grid"));
                }
                Ok(psi)
            }
            None => Err(config_error("$", "missing \"state\"")),
        }
    }

    fn lattice(&self, default_center: Vec3) -> Lattice {
        match self.cfg.lattice {
            Some(l) => Lattice::centered(Vec3::from(l.center), l.spacing, l.shape),
            None => Lattice::centered(default_center, 0.5 * std::f64::consts::PI / self.cfg.grid.k_max, [3, 3, 3]),
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

#[derive(Serialize)]
struct FrameSummary {
    samples: usize,
    orthonormality: f64,
    transversality: f64,
    helicity_eigen: f64,
    completeness: f64,
}

fn verify_frames(run: &mut Run) -> Result<(), CliError> {
    let mut rng = run.rng();
    let n = 1000;
    let (mut ortho, mut trans, mut eigen, mut compl) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..n {
        let k = rng.gen_range(0.1..10.0);
        let p = random_unit(&mut rng) * k;
        let e = [polarization::polarization_vector(&p, 1)?.eps, polarization::polarization_vector(&p, -1)?.eps];
        let w = polarization::helicity_matrix(&p)?;
        let pc = p.map(|x| C64::new(x, 0.0));
        for (i, h) in Helicity::BOTH.iter().enumerate() {
            for (j, _) in Helicity::BOTH.iter().enumerate() {
                let dot = e[i].dotc(&e[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                ortho = ortho.max((dot - target).norm());
            }
            trans = trans.max(pc.dotc(&e[i]).norm() / k);
            eigen = eigen.max((w * e[i] - e[i] * C64::new(h.sign(), 0.0)).norm());
        }
        let sum = e[0] * e[0].adjoint() + e[1] * e[1].adjoint();
        let proj = polarization::transverse_projector(&p)?;
        compl = compl.max((sum - proj).norm());
    }
    run.below("orthonormality", ortho, 1e-13);
    run.below("transversality", trans, 1e-13);
    run.below("helicity_eigenrelation", eigen, 1e-13);
    run.below("completeness", compl, 1e-13);
    run.write_json("frames.json", &FrameSummary { samples: n, orthonormality: ortho, transversality: trans, helicity_eigen: eigen, completeness: compl })
}

#[derive(Serialize)]
struct CommutatorSummary {
    reports: Vec<position_op::CommutatorReport>,
    convergence: Vec<(CommutatorKind, position_op::ConvergenceStudy)>,
    compact_vs_expanded: f64,
}

/// Orders are compared at two decimals: the fitted slope of a second-order
/// scheme approaches 2 from below when the `h⁴` term has opposite sign.
fn order_at_reporting_precision(order: f64) -> f64 {
    (order * 100.0).round() / 100.0
}

fn verify_commutators(run: &mut Run) -> Result<(), CliError> {
    let spec = run.spec(Task::VerifyCommutators)?.clone();
    let field = VectorRep(GaussianState(spec.clone()));
    let p0 = spec.p0();
    let mut rng = run.rng();
    let floor = run.cfg.grid.k_min.max(0.05);
    let mut probes = Vec::with_capacity(run.cfg.probes);
    while probes.len() < run.cfg.probes {
        let p = p0 + random_unit(&mut rng) * (spec.width * rng.gen_range(0.0..1.0));
        if p.norm() > floor && p.x.hypot(p.y) > 0.05 * p.norm() {
            probes.push(p);
        }
    }
    // the frame connection varies on the scale of the distance to the polar axis
    let scale = probes.iter().map(|p| p.x.hypot(p.y)).fold(f64::INFINITY, f64::min);
    let fd = Derivative::default_for(scale);
    let form = PositionForm::Expanded;
    let qq = position_op::commutator_check(CommutatorKind::Qq, &field, &probes, form, fd)?;
    let qw = position_op::commutator_check(CommutatorKind::QW, &field, &probes, form, fd)?;
    let qp = position_op::commutator_check(CommutatorKind::Qp, &field, &probes, form, Derivative::Exact)?;
    run.below("qq_residual", qq.residual_max, 1e-5);
    run.below("qw_residual", qw.residual_max, 1e-5);
    run.below("qp_residual", qp.residual_max, 1e-6);
    let steps: Vec<f64> = [0.01, 0.005, 0.0025].iter().map(|s| s * scale).collect();
    let few = &probes[..probes.len().min(6)];
    let mut convergence = Vec::new();
    for kind in [CommutatorKind::Qq, CommutatorKind::QW] {
        let study = position_op::convergence_study(kind, &field, few, form, &steps)?;
        run.above(&format!("{}_order", serde_json::to_value(kind).unwrap().as_str().unwrap()), order_at_reporting_precision(study.order), 2.0);
        convergence.push((kind, study));
    }
    let mut diff = 0.0f64;
    for p in &probes {
        for a in 0..3 {
            let e = position_op::apply_position_vector(&field, a, p, PositionForm::Expanded, Derivative::Exact)?;
            let c = position_op::apply_position_vector(&field, a, p, PositionForm::Compact, Derivative::Exact)?;
            diff = diff.max((e - c).norm() / (1.0 + e.norm()));
        }
    }
    run.below("compact_vs_expanded", diff, 1e-9);
    run.write_json("commutators.json", &CommutatorSummary { reports: vec![qq, qw, qp], convergence, compact_vs_expanded: diff })
}

fn evolve(run: &mut Run) -> Result<(), CliError> {
    let grid = run.grid()?;
    let psi = run.state(&grid)?;
    let n0 = psi.norm_sqr();
    let e0 = dynamics::energy(&psi);
    let ehrenfest = match &run.cfg.state {
        Some(StateSource::Spec(s)) => Some(dynamics::ehrenfest_check(&GaussianState(s.clone()), &grid, &run.cfg.t_samples)?),
        _ => {
            run.warnings.push("amplitude-file state: Ehrenfest check skipped (needs an analytic state)".into());
            None
        }
    };
    let mut csv = String::from("t,norm,energy,x,y,z,predicted_x,predicted_y,predicted_z\n");
    let (mut unit, mut energy) = (0.0f64, 0.0f64);
    let mut last = psi.clone();
    let cfg = run.cfg;
    for (i, &t) in cfg.t_samples.iter().enumerate() {
        let s = dynamics::evolve(&psi, t).state;
        let (n, e) = (s.norm_sqr(), dynamics::energy(&s));
        unit = unit.max((n - n0).abs() / n0);
        energy = energy.max((e - e0).abs() / e0);
        let mut row = vec![t, n, e];
        match &ehrenfest {
            Some(r) => {
                row.extend(r.rows[i].position);
                row.extend(r.rows[i].predicted);
            }
            None => {
                let x = position_op::expectation_position(&s).value;
                row.extend(x);
                row.extend([f64::NAN; 3]);
            }
        }
        csv.push_str(&row.iter().map(|x| format_float(*x)).collect::<Vec<_>>().join(","));
        csv.push('\n');
        last = s;
    }
    run.below("unitarity", unit, 1e-13);
    run.below("energy_conservation", energy, 1e-13);
    if let Some(r) = &ehrenfest {
        run.below("ehrenfest_residual", r.residual_max, 1e-6);
    }
    run.write("evolve.csv", &csv)?;
    if let Some(r) = ehrenfest {
        run.write_json("ehrenfest.json", &r)?;
    }
    let (bin, json) = state_io::write_amplitudes(&last, &run.out, "state_final", run.cfg.output.dtype)?;
    for p in [bin, json] {
        run.outputs.push(p.file_name().unwrap().to_string_lossy().into_owned());
    }
    Ok(())
}

fn maxwell_check(run: &mut Run) -> Result<(), CliError> {
    let grid = run.grid()?;
    let psi = run.state(&grid)?;
    let center = match &run.cfg.state {
        Some(StateSource::Spec(s)) => s.x0(),
        _ => Vec3::zeros(),
    };
    let lattice = run.lattice(center);
    let steps = MaxwellSteps::default_for(run.cfg.grid.k_max);
    let mut reports = Vec::new();
    let cfg = run.cfg;
    for &t in &cfg.t_samples {
        let r = dynamics::maxwell_residual(&psi, &lattice, t, steps)?;
        run.below(&format!("divergence_t={t}"), r.div_residual, 1e-3);
        run.below(&format!("curl_t={t}"), r.curl_residual, 1e-3);
        reports.push(r);
    }
    run.write_json("maxwell.json", &reports)
}

#[derive(Serialize)]
struct ArrivalMeta<'a> {
    z: [f64; 3],
    window: (f64, f64),
    n_t: usize,
    total_probability: f64,
    detected_norm: f64,
    state_norm: f64,
    mean_time: Option<f64>,
    time_operator_mean: f64,
    window_warning: &'a Option<String>,
    normalization: &'a str,
    data: &'a str,
}

fn arrival_task(run: &mut Run) -> Result<(), CliError> {
    let grid = run.grid()?;
    let psi = run.state(&grid)?;
    let z = Vec3::from(run.cfg.z);
    let window = run.cfg.window.ok_or_else(|| config_error("$", "missing \"window\" (required by arrival)"))?;
    let det = arrival::project_detected(&psi, &z);
    let d = arrival::density_of(&det, window, run.cfg.n_t)?;
    let t_mean = det.time_expectation(arrival::RadialDerivative::default());
    let negative = d.density.iter().filter(|p| **p < 0.0).count();
    run.below("negative_density_samples", negative as f64, 0.0);
    run.below("completeness", (d.total_probability - d.detected_norm).abs() / d.detected_norm.max(f64::MIN_POSITIVE), 1e-3);
    if let Some(w) = &d.window_warning {
        run.warnings.push(w.clone());
    }
    if d.mean_time.is_none() {
        run.warnings.push(format!("total probability {:e} below {:e}: mean arrival time undefined", d.total_probability, arrival::MEAN_TIME_THRESHOLD));
    }
    if let Some(target) = run.cfg.expect.mean_time {
        let err = d.mean_time.map_or(f64::INFINITY, |m| (m - target).abs());
        let tol = run.cfg.expect.mean_time_tolerance;
        run.below("mean_time", err, tol);
    }
    run.write("arrival.csv", &d.to_csv())?;
    let meta = ArrivalMeta {
        z: d.z,
        window: d.window,
        n_t: d.t_samples.len(),
        total_probability: d.total_probability,
        detected_norm: d.detected_norm,
        state_norm: psi.norm_sqr(),
        mean_time: d.mean_time,
        time_operator_mean: t_mean.re,
        window_warning: &d.window_warning,
        normalization: &d.normalization,
        data: "arrival.csv",
    };
    run.write_json("arrival.json", &meta)
}

fn kernel_check(run: &mut Run) -> Result<(), CliError> {
    let k_max = run.cfg.kernel.k_max.unwrap_or(run.cfg.grid.k_max);
    let eps = run.cfg.kernel.epsilon.unwrap_or_else(|| default_epsilon(k_max));
    let r = arrival::kernel_overlap(run.cfg.kernel.dt, eps, k_max)?;
    run.below("quadrature_vs_closed_form", (r.quadrature - r.truncated).norm() / r.truncated.norm().max(f64::MIN_POSITIVE), 1e-10);
    if let Some(v) = run.cfg.expect.kernel_value {
        let tol = run.cfg.expect.kernel_tolerance;
        run.below("kernel_value", (r.quadrature.re - v).abs(), tol);
    }
    run.write_json("kernel.json", &r)
}

fn position_density(run: &mut Run) -> Result<(), CliError> {
    let grid = run.grid()?;
    let psi = run.state(&grid)?;
    let lattice = run.lattice(Vec3::zeros());
    let pts = lattice.points();
    let s = photon_state::to_position_rep(&psi, &pts);
    let mut csv = String::from("x,y,z,density_plus,density_minus,density\n");
    for (i, p) in pts.iter().enumerate() {
        let (a, b) = (s.values[0][i].norm_sqr(), s.values[1][i].norm_sqr());
        csv.push_str(&[p.x, p.y, p.z, a, b, a + b].map(format_float).join(","));
        csv.push('\n');
    }
    run.write("position_density.csv", &csv)
}

/// Canonical digest of everything that determines a run's outputs.
pub fn inputs_digest(doc: &Value, task: Task, seed: u64, tolerance_scale: f64, extra: &[u8]) -> String {
    let mut h = Sha256::new();
    // serde_json maps are ordered, so this serialization is canonical
    h.update(serde_json::to_string(doc).unwrap().as_bytes());
    h.update(task.name().as_bytes());
    h.update(seed.to_le_bytes());
    h.update(tolerance_scale.to_le_bytes());
    h.update(extra);
    format!("{:x}", h.finalize())
}

fn read_document(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Err(config_error("$", "empty file, missing \"grid\""));
    }
    serde_json::from_str(&text).map_err(|e| config_error("$", format!("not valid JSON: {e}")))
}

/// `validate`: diagnostics for a scenario file without running it.
pub fn validate(path: &Path) -> Result<(), CliError> {
    let doc = read_document(path)?;
    let cfg = parse_scenario(&doc, None)?;
    if let Some(StateSource::File(p)) = &cfg.state {
        let full = path.parent().unwrap_or(Path::new(".")).join(p);
        if !full.exists() {
            return Err(config_error("$.state.amplitude_file", format!("{} does not exist", full.display())));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Timing {
    task: String,
    wall_seconds: f64,
    threads: usize,
}

/// Executes a task and writes its outputs and `report.json`.
pub fn run(args: &Args) -> Result<RunReport, CliError> {
    if args.task == Task::Validate {
        validate(&args.config)?;
        return Ok(RunReport {
            task: "validate".into(),
            inputs_digest: String::new(),
            seed: 0,
            tolerance_scale: args.tolerance_scale,
            outputs: vec![],
            checks: vec![],
            warnings: vec![],
            passed: true,
        });
    }
    if !(args.tolerance_scale.is_finite() && args.tolerance_scale > 0.0) {
        return Err(config_error("--tolerance-scale", format!("must be positive and finite, got {}", args.tolerance_scale)));
    }
    let started = Instant::now();
    let doc = read_document(&args.config)?;
    let cfg = parse_scenario(&doc, Some(args.task))?;
    let base = args.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut extra = Vec::new();
    if let Some(StateSource::File(p)) = &cfg.state {
        let sidecar = base.join(p);
        extra.extend(std::fs::read(&sidecar).map_err(|e| CliError::Io(format!("{}: {e}", sidecar.display())))?);
    }
    let seed = args.seed.unwrap_or(cfg.seed);
    std::fs::create_dir_all(&args.out)?;
    let mut run = Run {
        cfg: &cfg,
        base,
        out: args.out.clone(),
        scale: args.tolerance_scale,
        seed,
        checks: vec![],
        outputs: vec![],
        warnings: vec![],
    };
    match args.task {
        Task::VerifyFrames => verify_frames(&mut run)?,
        Task::VerifyCommutators => verify_commutators(&mut run)?,
        Task::Evolve => evolve(&mut run)?,
        Task::MaxwellCheck => maxwell_check(&mut run)?,
        Task::Arrival => arrival_task(&mut run)?,
        Task::KernelCheck => kernel_check(&mut run)?,
        Task::PositionDensity => position_density(&mut run)?,
        Task::Validate => unreachable!(),
    }
    let mut outputs = run.outputs.clone();
    outputs.push("report.json".into());
    let report = RunReport {
        task: args.task.name().into(),
        inputs_digest: inputs_digest(&doc, args.task, seed, args.tolerance_scale, &extra),
        seed,
        tolerance_scale: args.tolerance_scale,
        outputs,
        passed: run.checks.iter().all(|c| c.passed),
        checks: run.checks,
        warnings: run.warnings,
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    std::fs::write(args.out.join("report.json"), text)?;
    let timing = Timing { task: report.task.clone(), wall_seconds: started.elapsed().as_secs_f64(), threads: thread_count() };
    std::fs::write(args.out.join("timing.json"), serde_json::to_string_pretty(&timing).unwrap() + "\n")?;
    Ok(report)
}

fn thread_count() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Applies `PHOTONKIN_THREADS` to the global pool.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("PHOTONKIN_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| config_error("PHOTONKIN_THREADS", format!("expected a positive integer, got \"{v}\"")))?;
    #[cfg(feature = "parallel")]
    {
        // a pool built earlier in this process wins; nothing to do then
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

/// Entry point shared by the binary and the tests; returns the exit status.
pub fn main_with(args: &Args) -> ExitStatus {
    if let Err(e) = configure_threads() {
        eprint!("{e}");
        return e.status();
    }
    match run(args) {
        Ok(r) if args.task == Task::Validate => {
            let _ = r;
            println!("ok");
            ExitStatus::Pass
        }
        Ok(r) => {
            for c in &r.checks {
                let rel = if c.at_least { ">=" } else { "<=" };
                println!("{} {}: {:e} {rel} {:e}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
            }
            for w in &r.warnings {
                println!("warning: {w}");
            }
            if r.passed {
                ExitStatus::Pass
            } else {
                ExitStatus::ToleranceFailure
            }
        }
        Err(e) => {
            eprint!("{e}");
            if !matches!(e, CliError::Config(_)) {
                eprintln!();
            }
            e.status()
        }
    }
}
