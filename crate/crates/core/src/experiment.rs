//! Named experiments driven by key-value configs, writing
//! `<name>.report.json` and `<name>.csv`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::classical::{correspondence_compare, region_probability, AxisProfile, PhaseSpaceDensity, COMPARISON_TOL};
use crate::degree::{degree, degree_accounting, fmt_ratio, local_model};
use crate::diagram::{load_diagram, Diagram, KConfiguration};
use crate::fit::{fit_falloff, fit_falloff_with_errors, geometric_grid, FitOptions};
use crate::kinematics::FourVector;
use crate::landau::{channel_momentum, classify_point, sample_surface, solve_landau, SolverOptions};
use crate::transform::{
    boundary_value, forward_t, inverse_f, sample_t0, split_f, Form, HoleSpec, MuForm, ScatteringModel, TransformOptions,
    ConeOptions,
};
use crate::wavepacket::{contour_certificate, falloff_fit, ray_samples, Bump, MomentumWavePacket};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Analyze,
    ScanSurface,
    Falloff,
    Transform,
    McCompare,
    Degree,
}

impl ExperimentKind {
    pub fn required_inputs(&self) -> &'static [&'static str] {
        match self {
            Self::Analyze => &["diagram", "k"],
            Self::ScanSurface => &["diagram"],
            Self::Falloff => &["packet"],
            Self::Transform => &["model"],
            Self::McCompare => &["packet"],
            Self::Degree => &[],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).unwrap();
        f.write_str(s.as_str().unwrap())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: ExperimentKind,
    pub inputs: BTreeMap<String, Vec<PathBuf>>,
    pub options: BTreeMap<String, String>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn new(name: &str, kind: ExperimentKind) -> Self {
        Self { name: name.into(), kind, inputs: BTreeMap::new(), options: BTreeMap::new(), seed: 0, out_dir: PathBuf::from(".") }
    }

    pub fn input(mut self, key: &str, path: impl Into<PathBuf>) -> Self {
        self.inputs.entry(key.into()).or_default().push(path.into());
        self
    }

    pub fn option(mut self, key: &str, value: impl ToString) -> Self {
        self.options.insert(key.into(), value.to_string());
        self
    }

    pub fn report_path(&self) -> PathBuf {
        self.out_dir.join(format!("{}.report.json", self.name))
    }

    pub fn csv_path(&self) -> PathBuf {
        self.out_dir.join(format!("{}.csv", self.name))
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("computation failed: {0}")]
    Compute(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Compute(_) => 1,
        }
    }
}

fn cfg<E: fmt::Display>(e: E) -> RunError {
    RunError::Config(e.to_string())
}

fn comp<E: fmt::Display>(e: E) -> RunError {
    RunError::Compute(e.to_string())
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
        let k = k.trim().to_string();
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(format!("line {}: duplicate key {k}", n + 1));
        }
    }
    Ok(out)
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect()
}

pub fn parse_four(s: &str) -> Result<FourVector, String> {
    match parse_list(s)?.as_slice() {
        &[t, x, y, z] => Ok(FourVector::new(t, x, y, z)),
        v => Err(format!("expected 4 components, got {}", v.len())),
    }
}

/// Options with defaults; every value read is recorded.
#[derive(Debug, Default)]
pub struct Opts {
    given: BTreeMap<String, String>,
    used: BTreeMap<String, String>,
}

impl Opts {
    pub fn new(given: BTreeMap<String, String>) -> Self {
        Self { given, used: BTreeMap::new() }
    }

    fn raw(&mut self, key: &str, default: &str) -> String {
        let v = self.given.get(key).cloned().unwrap_or_else(|| default.to_string());
        self.used.insert(key.into(), v.clone());
        v
    }

    pub fn f64(&mut self, key: &str, default: f64) -> Result<f64, RunError> {
        let v = self.raw(key, &default.to_string());
        v.parse().map_err(|_| RunError::Config(format!("{key}: not a number: {v:?}")))
    }

    pub fn usize(&mut self, key: &str, default: usize) -> Result<usize, RunError> {
        let v = self.raw(key, &default.to_string());
        v.parse().map_err(|_| RunError::Config(format!("{key}: not a count: {v:?}")))
    }

    pub fn string(&mut self, key: &str, default: &str) -> String {
        self.raw(key, default)
    }

    pub fn list(&mut self, key: &str, default: &str) -> Result<Vec<f64>, RunError> {
        let v = self.raw(key, default);
        parse_list(&v).map_err(|e| RunError::Config(format!("{key}: {e}")))
    }

    pub fn four(&mut self, key: &str, default: &str) -> Result<FourVector, RunError> {
        let v = self.raw(key, default);
        parse_four(&v).map_err(|e| RunError::Config(format!("{key}: {e}")))
    }

    /// Errors on keys that were given but never read.
    pub fn finish(self) -> Result<BTreeMap<String, String>, RunError> {
        let unknown: Vec<&String> = self.given.keys().filter(|k| !self.used.contains_key(*k)).collect();
        if !unknown.is_empty() {
            return Err(RunError::Config(format!("unknown options: {unknown:?}")));
        }
        Ok(self.used)
    }
}

/// Packet config: `mass`, `velocity` (3 components), `gamma`, `r1`, `r2`,
/// `spatial_dim`.
pub fn packet_from_kv(kv: &BTreeMap<String, String>) -> Result<MomentumWavePacket, RunError> {
    let mut o = Opts::new(kv.clone());
    let mass = o.f64("mass", 1.0)?;
    let vel = o.list("velocity", "0,0,0")?;
    if vel.len() != 3 {
        return Err(cfg("velocity needs 3 components"));
    }
    let pbar = FourVector::new(mass, 0.0, 0.0, 0.0).boost([vel[0], vel[1], vel[2]]);
    let p = MomentumWavePacket {
        mass,
        pbar: FourVector::on_shell(mass, pbar.spatial()),
        gamma: o.f64("gamma", 0.0)?,
        chi: Bump::new(o.f64("r1", 0.8)?, o.f64("r2", 3.0)?),
        spatial_dim: o.usize("spatial_dim", 3)? as u8,
    };
    o.finish()?;
    p.validate().map_err(cfg)?;
    Ok(p)
}

/// Model config for the transform experiments.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransformConfig {
    pub model: ScatteringModel,
    pub mu: MuForm,
    pub gamma0: f64,
    pub hole: HoleSpec,
}

pub fn model_from_kv(kv: &BTreeMap<String, String>) -> Result<(TransformConfig, BTreeMap<String, String>), RunError> {
    let mut o = Opts::new(kv.clone());
    let l = o.usize("l", 1)?;
    let form = match o.string("form", "bump").as_str() {
        "bump" => Form::Bump,
        "pole" => Form::Pole { q0: o.f64("q0", 0.0)?, eps: o.f64("eps", 0.05)? },
        "log" => Form::Log { q0: o.f64("q0", 0.0)?, eps: o.f64("eps", 0.05)? },
        other => return Err(cfg(format!("unknown form {other:?}"))),
    };
    let envelope = match o.string("envelope", "on").as_str() {
        "on" => Some(Bump::new(o.f64("r1", 0.8)?, o.f64("r2", 1.8)?)),
        "off" => None,
        other => return Err(cfg(format!("envelope must be on or off, got {other:?}"))),
    };
    let model = ScatteringModel { form, l, envelope };
    model.validate().map_err(cfg)?;
    let mu = MuForm::quadratic(&o.list("mu", &vec!["1"; l].join(","))?);
    let gamma0 = o.f64("gamma0", 0.5)?;
    let hole = HoleSpec { center: o.list("hole_center", if l == 1 { "1" } else { "1,0" })?, theta: o.f64("hole_theta", 0.3)? };
    hole.validate(l).map_err(cfg)?;
    let used = o.finish()?;
    Ok((TransformConfig { model, mu, gamma0, hole }, used))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:?}")
    }
}

/// Header row then data rows; NaN written as `nan`.
pub fn emit_plotdata(t: &Table) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&t.header).unwrap();
    for r in &t.rows {
        w.write_record(r.iter().map(|c| match c {
            Cell::Num(v) => fmt_num(*v),
            Cell::Text(s) => s.clone(),
        }))
        .unwrap();
    }
    w.into_inner().unwrap()
}

/// Inverse of [`emit_plotdata`]; fields that parse as numbers become numbers.
pub fn parse_plotdata(bytes: &[u8]) -> Result<Table, csv::Error> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(
            rec?.iter()
                .map(|f| match f {
                    "nan" => Cell::Num(f64::NAN),
                    _ => f.parse::<f64>().map(Cell::Num).unwrap_or_else(|_| Cell::Text(f.into())),
                })
                .collect(),
        );
    }
    Ok(Table { header, rows })
}

#[derive(Debug)]
pub struct Outcome {
    pub report: Value,
    pub table: Table,
    pub report_path: PathBuf,
    pub csv_path: PathBuf,
}

fn read(path: &Path) -> Result<Vec<u8>, RunError> {
    std::fs::read(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
}

fn read_kv(path: &Path) -> Result<BTreeMap<String, String>, RunError> {
    let text = String::from_utf8(read(path)?).map_err(cfg)?;
    parse_kv(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
}

fn load_diag(path: &Path) -> Result<Diagram, RunError> {
    load_diagram(&read(path)?).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
}

fn c2(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

/// Runs the experiment and writes its report and CSV.
pub fn run(spec: &ExperimentSpec) -> Result<Outcome, RunError> {
    for key in spec.kind.required_inputs() {
        match spec.inputs.get(*key) {
            Some(v) if !v.is_empty() => {}
            _ => return Err(RunError::Config(format!("{} needs --{key}", spec.kind))),
        }
        for p in &spec.inputs[*key] {
            if !p.exists() {
                return Err(RunError::Config(format!("missing input file {}", p.display())));
            }
        }
    }
    let first = |k: &str| spec.inputs.get(k).and_then(|v| v.first()).cloned();
    let mut o = Opts::new(spec.options.clone());
    let (result, table, extra_options) = match spec.kind {
        ExperimentKind::Degree => run_degree(&mut o)?,
        ExperimentKind::Analyze => run_analyze(spec, &mut o, &first("diagram").unwrap(), &first("k").unwrap())?,
        ExperimentKind::ScanSurface => run_scan(spec, &mut o, &first("diagram").unwrap())?,
        ExperimentKind::Falloff => run_falloff(&mut o, &first("packet").unwrap())?,
        ExperimentKind::Transform => run_transform(&mut o, &first("model").unwrap())?,
        ExperimentKind::McCompare => run_mc(spec, &mut o, &first("packet").unwrap(), first("diagram"))?,
    };
    let mut options = o.finish()?;
    options.extend(extra_options.into_iter().map(|(k, v)| (format!("file.{k}"), v)));
    let report = json!({
        "name": spec.name,
        "kind": spec.kind,
        "seed": spec.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "inputs": spec.inputs,
        "options": options,
        "result": result,
    });
    std::fs::create_dir_all(&spec.out_dir).map_err(comp)?;
    let mut text = serde_json::to_string_pretty(&report).map_err(comp)?;
    text.push('\n');
    std::fs::write(spec.report_path(), text).map_err(comp)?;
    std::fs::write(spec.csv_path(), emit_plotdata(&table)).map_err(comp)?;
    Ok(Outcome { report, table, report_path: spec.report_path(), csv_path: spec.csv_path() })
}

type Ran = (Value, Table, BTreeMap<String, String>);

fn run_degree(o: &mut Opts) -> Result<Ran, RunError> {
    let nl = o.usize("nl", 1)? as u32;
    let nv = o.usize("nv", 2)? as u32;
    if nv == 0 {
        return Err(cfg("nv must be at least 1"));
    }
    let d = degree(nl, nv);
    let model = local_model(&d);
    let mut t = Table::new(&["nl", "nv", "d", "model"]);
    let kind = serde_json::to_value(model.kind).unwrap()["kind"].as_str().unwrap().to_string();
    t.push(vec![(nl as f64).into(), (nv as f64).into(), fmt_ratio(&d.d).into(), kind.into()]);
    Ok((json!({ "degree": d, "model": model }), t, BTreeMap::new()))
}

fn solver_opts(spec: &ExperimentSpec, o: &mut Opts) -> Result<SolverOptions, RunError> {
    let d = SolverOptions::default();
    Ok(SolverOptions {
        max_iters: o.usize("max_iters", d.max_iters)?,
        starts: o.usize("starts", d.starts)?,
        tol_feas: o.f64("tol_feas", d.tol_feas)?,
        alpha_min: o.f64("alpha_min", d.alpha_min)?,
        seed: spec.seed,
    })
}

fn run_analyze(spec: &ExperimentSpec, o: &mut Opts, diagram: &Path, k: &Path) -> Result<Ran, RunError> {
    let d = load_diag(diagram)?;
    let kc = KConfiguration::from_json(&String::from_utf8(read(k)?).map_err(cfg)?).map_err(cfg)?;
    let mut catalog = vec![d.clone()];
    for p in spec.inputs.get("catalog").into_iter().flatten() {
        catalog.push(load_diag(p)?);
    }
    let opts = solver_opts(spec, o)?;
    kc.check(&d, o.f64("tol_shell", 1e-9)?, o.f64("tol_cons", 1e-9)?).map_err(comp)?;
    let class = classify_point(&catalog, &kc, &opts).map_err(comp)?;
    let mut t = Table::new(&["diagram", "status", "residual", "degenerate"]);
    let mut per = Vec::new();
    for (i, c) in catalog.iter().enumerate() {
        let r = solve_landau(c, &kc, &opts).map_err(comp)?;
        let status = serde_json::to_value(r.status).unwrap();
        t.push(vec![(i as f64).into(), status.as_str().unwrap().into(), r.residual.into(), if r.degenerate { "yes" } else { "no" }.into()]);
        per.push(json!({ "index": i, "result": r }));
    }
    let verdict = match &class {
        crate::landau::Classification::Trivial => "Trivial",
        crate::landau::Classification::Singular { .. } => "Singular",
        crate::landau::Classification::Unknown { .. } => "Unknown",
    };
    Ok((json!({ "verdict": verdict, "classification": class, "diagrams": per, "accounting": degree_accounting(&d) }), t, BTreeMap::new()))
}

fn run_scan(spec: &ExperimentSpec, o: &mut Opts, diagram: &Path) -> Result<Ran, RunError> {
    let d = load_diag(diagram)?;
    let count = o.usize("count", 100)?;
    let opts = solver_opts(spec, o)?;
    let verify = o.string("verify", "yes") == "yes";
    let s = sample_surface(&d, count, spec.seed).map_err(comp)?;
    let mut t = Table::new(&["sample", "line", "t", "x", "y", "z"]);
    let mut worst: f64 = 0.0;
    let mut refeasible = 0;
    for (i, k) in s.samples.iter().enumerate() {
        for (j, p) in k.momenta.iter().enumerate() {
            t.push(vec![(i as f64).into(), (j as f64).into(), p.t.into(), p.x.into(), p.y.into(), p.z.into()]);
        }
        if let [line] = d.internal.as_slice() {
            let m = line.particle.mass;
            worst = worst.max((channel_momentum(&d, k, line.from).lorentz_square() - m * m).abs());
        }
        if verify && solve_landau(&d, k, &opts).map_err(comp)?.feasible {
            refeasible += 1;
        }
    }
    Ok((
        json!({
            "samples": s.samples.len(),
            "attempts": s.attempts,
            "budget_exhausted": s.budget_exhausted,
            "refeasible": if verify { Some(refeasible) } else { None },
            "max_channel_deviation": if d.n_internal() == 1 { Some(worst) } else { None },
        }),
        t,
        BTreeMap::new(),
    ))
}

fn tau_grid(o: &mut Opts, a: f64, b: f64, n: usize) -> Result<Vec<f64>, RunError> {
    let a = o.f64("tau_min", a)?;
    let b = o.f64("tau_max", b)?;
    let n = o.usize("points", n)?;
    if !(0.0 < a && a < b) || n < 4 {
        return Err(cfg("need 0 < tau_min < tau_max and points >= 4"));
    }
    Ok(geometric_grid(a, b, n))
}

fn run_falloff(o: &mut Opts, packet: &Path) -> Result<Ran, RunError> {
    let kv = read_kv(packet)?;
    let p = packet_from_kv(&kv)?;
    let u = o.four("u", "1,0,0,0")?;
    let gamma = o.f64("gamma", p.gamma)?;
    let taus = tau_grid(o, 10.0, 150.0, 24)?;
    let alpha = o.f64("alpha", 0.0)?;
    let run = falloff_fit(&p, u, &taus, gamma).map_err(comp)?;
    let samples = ray_samples(&p.with_gamma(gamma), u, &taus).map_err(comp)?;
    let mut t = Table::new(&["tau", "re", "im", "abs"]);
    for (tau, z) in taus.iter().zip(&samples) {
        t.push(vec![(*tau).into(), z.re.into(), z.im.into(), z.norm().into()]);
    }
    let certificate = if alpha > 0.0 {
        match contour_certificate(&p.with_gamma(gamma), u, alpha) {
            Ok(c) => json!({ "granted": true, "certificate": c, "measured_rate": run.fit.rate() }),
            Err(e) => json!({ "granted": false, "reason": e.to_string() }),
        }
    } else {
        Value::Null
    };
    Ok((json!({ "packet": p, "u": u, "gamma": gamma, "fit": run.fit, "certificate": certificate }), t, kv))
}

fn run_transform(o: &mut Opts, model: &Path) -> Result<Ran, RunError> {
    let kv = read_kv(model)?;
    let (c, used) = model_from_kv(&kv)?;
    let experiment = o.string("experiment", "roundtrip");
    let d = TransformOptions::default();
    let topts = TransformOptions { nodes_per_period: o.f64("nodes_per_period", d.nodes_per_period)?, ..d };
    let (result, t) = match experiment.as_str() {
        "roundtrip" => {
            let tab = sample_t0(&c.model, &c.mu, &topts).map_err(comp)?;
            let r2 = c.model.support_radius().unwrap();
            let n = o.usize("q_points", 41)?;
            let mut worst: f64 = 0.0;
            for i in 0..n {
                let mut q = vec![0.0; c.model.l];
                q[0] = -r2 + 2.0 * r2 * i as f64 / (n - 1).max(1) as f64;
                worst = worst.max((inverse_f(&tab, &q).value - c.model.eval(&q)).norm());
            }
            let mut t = Table::new(&["v", "r", "re_t", "im_t"]);
            if c.model.l == 1 {
                for ((v, _), z) in tab.axis.iter().zip(&tab.values) {
                    t.push(vec![(*v).into(), 0.0.into(), z.re.into(), z.im.into()]);
                }
            }
            (json!({ "radius": tab.radius, "nodes": tab.axis.len(), "edge_ratio": tab.edge_ratio, "max_error": worst }), t)
        }
        "split" => {
            let qs = o.list("q", "-0.2,0,0.2")?;
            let im = o.f64("q_im", 0.0)?;
            let mut t = Table::new(&["re_q", "im_q", "re_f1", "im_f1", "re_f2", "im_f2", "re_direct", "im_direct"]);
            let tab = sample_t0(&c.model, &c.mu, &topts).map_err(comp)?;
            let mut worst: f64 = 0.0;
            let mut rows = Vec::new();
            for q in qs {
                let z = Complex64::new(q, im);
                let s = split_f(&c.model, &c.mu, c.gamma0, &[z], &topts).map_err(comp)?;
                let direct = if im == 0.0 { inverse_f(&tab, &[q]).value } else { c.model.eval_complex(&[z]).unwrap_or(Complex64::new(f64::NAN, f64::NAN)) };
                worst = worst.max((s.total() - direct).norm());
                t.push(vec![q.into(), im.into(), s.f1.re.into(), s.f1.im.into(), s.f2.re.into(), s.f2.im.into(), direct.re.into(), direct.im.into()]);
                rows.push(json!({ "q": c2(z), "f1": c2(s.f1), "f2": c2(s.f2), "direct": c2(direct), "radius": s.radius }));
            }
            (json!({ "points": rows, "max_error": worst }), t)
        }
        "cone" => {
            let qs = o.list("q", "-0.5,0,0.5")?;
            let eta = o.f64("eta", 1e-5)?;
            let bandwidth = o.f64("bandwidth", 2.0)?;
            let co = ConeOptions { bandwidth, ..Default::default() };
            let m = c.model.clone();
            let closed = m.closed_form_t0(&vec![0.0; m.l]).is_some();
            let table = if closed { None } else { Some(sample_t0(&m, &c.mu, &topts).map_err(comp)?) };
            let tf = |v: &[f64]| match &table {
                None => m.closed_form_t0(v).unwrap(),
                Some(_) => forward_t(&m, &c.mu, v, 0.0, &topts).unwrap_or(Complex64::new(f64::NAN, f64::NAN)),
            };
            let mut t = Table::new(&["q", "re_bv", "im_bv", "re_f", "im_f"]);
            let mut worst: f64 = 0.0;
            for q in qs {
                let mut qv = vec![q];
                qv.resize(m.l, 0.0);
                let bv = boundary_value(&tf, m.l, &c.hole, &qv, eta, &co).map_err(comp)?;
                let f = m.eval(&qv);
                worst = worst.max((bv - f).norm());
                t.push(vec![q.into(), bv.re.into(), bv.im.into(), f.re.into(), f.im.into()]);
            }
            (json!({ "max_error": worst, "eta": eta }), t)
        }
        other => return Err(cfg(format!("unknown transform experiment {other:?}"))),
    };
    Ok((json!({ "experiment": experiment, "config": c, "result": result }), t, used))
}

fn run_mc(spec: &ExperimentSpec, o: &mut Opts, packet: &Path, diagram: Option<PathBuf>) -> Result<Ran, RunError> {
    let kv = read_kv(packet)?;
    let p = packet_from_kv(&kv)?;
    let u = o.four("u", "1,0,0,0")?;
    let taus = tau_grid(o, 10.0, 150.0, 16)?;
    let count = o.usize("count", 20_000)?;
    let sigma = o.f64("position_sigma", 1.0)?;
    let radius = o.f64("region_radius", 1.0)?;
    let tol = o.f64("comparison_tol", COMPARISON_TOL)?;
    let accounting = match diagram {
        Some(path) => Some(degree_accounting(&load_diag(&path)?)),
        None => None,
    };
    let quantum = falloff_fit(&p, u, &taus, p.gamma).map_err(comp)?;
    let vel = [u.x / u.t, u.y / u.t, u.z / u.t];
    let est: Vec<_> = taus
        .iter()
        .map(|&t| {
            let rho = PhaseSpaceDensity::from_packet(&p, t, [AxisProfile::Gaussian { sigma }; 3]);
            region_probability(&rho, vel.map(|c| c * t), radius, t, count, spec.seed)
        })
        .collect::<Result<_, _>>()
        .map_err(comp)?;
    let probs: Vec<f64> = est.iter().map(|e| e.probability).collect();
    let errs: Vec<f64> = est.iter().map(|e| e.statistical_error).collect();
    let classical = if p.gamma > 0.0 {
        fit_falloff_with_errors(&taus, &probs, Some(&errs), p.gamma, &FitOptions::default())
    } else {
        fit_falloff(&taus, &probs, 0.0, &FitOptions::default())
    }
    .map_err(comp)?;
    let cmp = correspondence_compare(&classical, &quantum.fit, tol).map_err(comp)?;
    let mut t = Table::new(&["tau", "quantum_abs2", "classical_probability", "classical_error"]);
    for (i, tau) in taus.iter().enumerate() {
        t.push(vec![(*tau).into(), (quantum.magnitudes[i] * quantum.magnitudes[i]).into(), probs[i].into(), errs[i].into()]);
    }
    Ok((
        json!({ "verdict": if cmp.corresponds { "corresponds" } else { "differs" }, "comparison": cmp, "quantum": quantum.fit, "classical": classical, "accounting": accounting }),
        t,
        kv,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_parsing() {
        let kv = parse_kv("# packet\nmass = 2\n\nr1=0.5 # inner\n").unwrap();
        assert_eq!(kv["mass"], "2");
        assert_eq!(kv["r1"], "0.5");
        assert!(parse_kv("a = 1\na = 2").is_err());
        assert!(parse_kv("novalue").is_err());
    }

    #[test]
    fn plotdata_round_trip() {
        let mut t = Table::new(&["a", "b"]);
        assert_eq!(emit_plotdata(&t), b"a,b\n");
        t.push(vec![0.1.into(), f64::NAN.into()]);
        t.push(vec![1e-300.into(), "x,y".into()]);
        let bytes = emit_plotdata(&t);
        assert!(String::from_utf8(bytes.clone()).unwrap().contains("nan"));
        let back = parse_plotdata(&bytes).unwrap();
        assert_eq!(back.header, t.header);
        assert_eq!(back.rows[1], t.rows[1]);
        assert!(matches!(back.rows[0][1], Cell::Num(v) if v.is_nan()));
    }

    #[test]
    fn unknown_option_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = ExperimentSpec::new("d", ExperimentKind::Degree).option("nl", 1).option("bogus", 3);
        s.out_dir = dir.path().into();
        assert_eq!(run(&s).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn degree_report() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = ExperimentSpec::new("pole", ExperimentKind::Degree).option("nl", 1).option("nv", 2);
        s.out_dir = dir.path().into();
        let out = run(&s).unwrap();
        assert_eq!(out.report["result"]["degree"]["d"], "-1");
        let csv = std::fs::read_to_string(out.csv_path).unwrap();
        assert_eq!(csv, "nl,nv,d,model\n1.0,2.0,-1,pole\n");
    }
}
