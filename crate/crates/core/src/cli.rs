//! Batch commands behind the `qsplast` binary: manifests, output files and
//! exit codes.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constitutive::{ElasticModuli, Material};
use crate::error::{Error, Result};
use crate::evolution::{convergence_study, run_evolution, EvolutionRecord, StudyReport, TimeGrid};
use crate::fem::{MaterialSpec, MeshSpec, Scenario};
use crate::material_point::{energy_residual, run_point, StrainHistory};
use crate::solver::SolverConfig;
use crate::tensor::{sym_len, SymTensor};
use crate::verification::{verify_record, CheckRow, VerifyTolerances};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;

/// Names accepted in a manifest's `checks` list.
pub const CHECKS: [&str; 9] = [
    "converged",
    "flow_rule",
    "variational_inequality",
    "yield_residence",
    "normality",
    "min_norm_subgradient",
    "power_balance",
    "energy_inequality",
    "apriori_strain",
];

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonConvergence { .. } | Error::ReturnMapping { .. } => EXIT_NONCONVERGENCE,
        _ => EXIT_CONFIG,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    /// Scenario file, relative to the manifest.
    pub scenario: PathBuf,
    /// Uniform grid with this many steps.
    #[serde(default)]
    pub steps: Option<usize>,
    /// Explicit grid; excludes `steps`.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    /// Step counts for `converge`.
    #[serde(default)]
    pub grids: Vec<usize>,
    /// Output directory, relative to the manifest.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Enabled checks; all when absent.
    #[serde(default)]
    pub checks: Option<Vec<String>>,
}

/// Command-line flags that take precedence over the manifest.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub steps: Option<usize>,
    pub out: Option<PathBuf>,
    pub tol_res: Option<f64>,
    pub force: bool,
    pub emit_plotdata: bool,
}

/// A manifest with paths resolved and overrides applied.
#[derive(Debug, Clone)]
pub struct Job {
    pub scenario_path: PathBuf,
    pub scenario: Scenario,
    pub manifest: RunManifest,
    pub out: PathBuf,
    pub cfg: SolverConfig,
    pub emit_plotdata: bool,
}

impl Job {
    pub fn load(manifest_path: &Path, ov: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(manifest_path)
            .map_err(|e| Error::Config(format!("cannot read manifest {}: {e}", manifest_path.display())))?;
        let manifest: RunManifest = toml::from_str(&text)?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let scenario_path = base.join(&manifest.scenario);
        if !scenario_path.is_file() {
            return Err(Error::Config(format!("scenario {} does not exist", scenario_path.display())));
        }
        let scenario = Scenario::from_file(&scenario_path)?;
        let mut cfg = manifest.solver;
        if let Some(t) = ov.tol_res {
            cfg.tol_res = t;
        }
        cfg.force |= ov.force;
        cfg.validate()?;
        if let Some(names) = &manifest.checks {
            if let Some(bad) = names.iter().find(|n| !CHECKS.contains(&n.as_str())) {
                return Err(Error::Config(format!("unknown check {bad:?}; known: {}", CHECKS.join(", "))));
            }
        }
        let out = match &ov.out {
            Some(o) => o.clone(),
            None => base.join(manifest.out.clone().unwrap_or_else(|| PathBuf::from("out"))),
        };
        let mut manifest = manifest;
        if let Some(k) = ov.steps {
            manifest.steps = Some(k);
            manifest.times = None;
        }
        Ok(Self {
            scenario_path,
            scenario,
            manifest,
            out,
            cfg,
            emit_plotdata: ov.emit_plotdata,
        })
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        match (&self.manifest.steps, &self.manifest.times) {
            (Some(_), Some(_)) => Err(Error::Config("give either steps or times, not both".into())),
            (Some(k), None) => TimeGrid::uniform(self.scenario.t_final(), *k),
            (None, Some(t)) => TimeGrid::new(t.clone()),
            (None, None) => Err(Error::Config("the manifest needs steps or times".into())),
        }
    }

    fn enabled(&self, check: &str) -> bool {
        self.manifest.checks.as_ref().is_none_or(|c| c.iter().any(|n| n == check))
    }
}

/// Outcome of a command: exit code plus a short human summary.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub summary: String,
}

impl Outcome {
    fn from_error(err: &Error) -> Self {
        Self {
            code: exit_code(err),
            summary: format!("error: {err}"),
        }
    }
}

/// Shortest round-trip text; exponent form for very small or large values.
fn fmt(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn write_csv<R: AsRef<[String]>>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.as_ref())?;
    }
    w.flush()?;
    Ok(())
}

fn row<const N: usize>(cells: [&dyn Display; N]) -> Vec<String> {
    cells.iter().map(|c| c.to_string()).collect()
}

pub const ENERGIES_HEADER: [&str; 15] = [
    "step",
    "t",
    "stored",
    "dissipation",
    "load_u",
    "work_sigma_ew",
    "work_sigma_ew_trap",
    "work_load_w",
    "work_load_rate_u",
    "balance_residual",
    "audit",
    "delta_k",
    "iterations",
    "equilibrium_residual",
    "converged",
];

pub fn write_energies(path: &Path, rec: &EvolutionRecord) -> Result<()> {
    let rows = rec.ledger.iter().zip(&rec.reports).enumerate().map(|(i, (l, r))| {
        vec![
            i.to_string(),
            fmt(l.t),
            fmt(l.stored),
            fmt(l.dissipation),
            fmt(l.load_u),
            fmt(l.work_sigma_ew),
            fmt(l.work_sigma_ew_trap),
            fmt(l.work_load_w),
            fmt(l.work_load_rate_u),
            fmt(l.balance_residual),
            fmt(l.audit),
            fmt(rec.delta_k),
            r.iterations.to_string(),
            fmt(r.equilibrium_residual),
            u8::from(r.converged).to_string(),
        ]
    });
    write_csv(path, &ENERGIES_HEADER, rows)
}

pub const FIELDS_HEADER: [&str; 13] = [
    "element", "cx", "cy", "collar", "sxx", "syy", "sxy", "pxx", "pyy", "pxy", "sd_norm", "yield_margin", "yielding",
];

/// Elementwise fields at step `i`; `yielding` marks `σ_D` on the yield
/// surface to within `1e-9` relative.
pub fn write_fields(path: &Path, rec: &EvolutionRecord, sc: &Scenario, i: usize) -> Result<()> {
    let mesh = sc.mesh();
    let rows = (0..mesh.n_elements()).map(|el| {
        let s = rec.sigma[i][el];
        let p = rec.triples[i].p[el].as_sym();
        let c = mesh.centroid(el);
        let ys = &sc.material(el).yield_surface;
        let sd = s.deviator();
        let margin = -ys.violation(&sd);
        let on = margin.abs() <= 1e-9 * (1.0 + ys.r_outer());
        vec![
            el.to_string(),
            fmt(c[0]),
            fmt(c[1]),
            u8::from(mesh.is_collar(el)).to_string(),
            fmt(s.get(0, 0)),
            fmt(s.get(1, 1)),
            fmt(s.get(0, 1)),
            fmt(p.get(0, 0)),
            fmt(p.get(1, 1)),
            fmt(p.get(0, 1)),
            fmt(sd.norm()),
            fmt(margin),
            u8::from(on).to_string(),
        ]
    });
    write_csv(path, &FIELDS_HEADER, rows)
}

pub const VERIFY_HEADER: [&str; 6] = ["check", "step", "element", "value", "tol", "pass"];

pub fn write_verify(path: &Path, rows: &[CheckRow]) -> Result<()> {
    let out = rows.iter().map(|r| {
        vec![
            r.check.clone(),
            r.step.to_string(),
            r.element.map_or(String::new(), |e| e.to_string()),
            fmt(r.value),
            fmt(r.tol),
            u8::from(r.passed).to_string(),
        ]
    });
    write_csv(path, &VERIFY_HEADER, out)
}

pub const STUDY_HEADER: [&str; 8] = [
    "steps",
    "max_step",
    "sigma_cauchy",
    "dissipation_diff",
    "dissipation",
    "max_balance_residual",
    "delta_k",
    "audit_excess",
];

pub fn write_study(path: &Path, rep: &StudyReport) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or(String::new(), fmt);
    let rows = rep.rows.iter().map(|r| {
        vec![
            r.steps.to_string(),
            fmt(r.max_step),
            opt(r.sigma_cauchy),
            opt(r.dissipation_diff),
            fmt(r.dissipation),
            fmt(r.max_balance_residual),
            fmt(r.delta_k),
            fmt(r.audit_excess),
        ]
    });
    write_csv(path, &STUDY_HEADER, rows)
}

/// Long format `series,step,t,value`.
pub fn write_plotdata(path: &Path, rec: &EvolutionRecord) -> Result<()> {
    let mut rows = Vec::new();
    for (i, l) in rec.ledger.iter().enumerate() {
        for (name, v) in [
            ("stored", l.stored),
            ("dissipation", l.dissipation),
            ("load_u", l.load_u),
            ("balance_residual", l.balance_residual),
            ("audit", l.audit),
        ] {
            rows.push(row([&name, &i, &l.t, &v]));
        }
    }
    write_csv(path, &["series", "step", "t", "value"], rows)
}

fn fields_name(i: usize, steps: usize) -> String {
    let w = steps.to_string().len().max(4);
    format!("fields_{i:0w$}.csv")
}

/// Scenario copy next to the outputs, with the mesh inlined as `mesh.txt`,
/// so that `verify` needs nothing else.
fn write_run_inputs(dir: &Path, sc: &Scenario) -> Result<()> {
    let mut spec = sc.spec().clone();
    spec.mesh = MeshSpec::File {
        path: PathBuf::from("mesh.txt"),
    };
    fs::write(dir.join("mesh.txt"), sc.base_mesh().to_text())?;
    let text = toml::to_string(&spec).map_err(|e| Error::Config(format!("cannot serialize scenario: {e}")))?;
    fs::write(dir.join("scenario.toml"), text)?;
    Ok(())
}

fn filter_checks(job: &Job, rows: Vec<CheckRow>) -> Vec<CheckRow> {
    rows.into_iter().filter(|r| job.enabled(&r.check)).collect()
}

fn summarize_checks(rows: &[CheckRow]) -> (bool, String) {
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed).map(|r| r.check.as_str()).collect();
    if failed.is_empty() {
        (true, format!("{} checks passed", rows.len()))
    } else {
        (false, format!("failed checks: {}", failed.join(", ")))
    }
}

pub fn cmd_run(manifest: &Path, ov: &Overrides) -> Outcome {
    let job = match Job::load(manifest, ov) {
        Ok(j) => j,
        Err(e) => return Outcome::from_error(&e),
    };
    match run_job(&job) {
        Ok(o) => o,
        Err(e) => {
            if let Error::NonConvergence { .. } = &e {
                let _ = write_failure(&job.out, &e);
            }
            Outcome::from_error(&e)
        }
    }
}

fn write_failure(dir: &Path, err: &Error) -> Result<()> {
    if let Error::NonConvergence { t, step, triple, report } = err {
        fs::create_dir_all(dir)?;
        let v = serde_json::json!({ "t": t, "step": step, "report": report, "triple": triple });
        fs::write(dir.join("nonconvergence.json"), serde_json::to_string_pretty(&v)?)?;
    }
    Ok(())
}

fn run_job(job: &Job) -> Result<Outcome> {
    let grid = job.grid()?;
    let rec = run_evolution(&job.scenario, &grid, None, job.cfg)?;
    fs::create_dir_all(&job.out)?;
    write_energies(&job.out.join("energies.csv"), &rec)?;
    for i in 0..rec.len() {
        write_fields(&job.out.join(fields_name(i, grid.steps())), &rec, &job.scenario, i)?;
    }
    let rows = filter_checks(job, verify_record(&rec, &job.scenario, &VerifyTolerances::default()));
    write_verify(&job.out.join("verify.csv"), &rows)?;
    write_run_inputs(&job.out, &job.scenario)?;
    fs::write(job.out.join("record.json"), serde_json::to_string(&rec)?)?;
    if job.emit_plotdata {
        write_plotdata(&job.out.join("plotdata.csv"), &rec)?;
    }
    let (ok, msg) = summarize_checks(&rows);
    Ok(Outcome {
        code: if ok { EXIT_OK } else { EXIT_VERIFICATION },
        summary: format!(
            "{} steps, dissipation {}, max balance residual {:e}; {msg}",
            grid.steps(),
            rec.final_dissipation(),
            rec.max_balance_residual()
        ),
    })
}

pub fn cmd_converge(manifest: &Path, ov: &Overrides) -> Outcome {
    let job = match Job::load(manifest, ov) {
        Ok(j) => j,
        Err(e) => return Outcome::from_error(&e),
    };
    match converge_job(&job) {
        Ok(o) => o,
        Err(e) => Outcome::from_error(&e),
    }
}

fn converge_job(job: &Job) -> Result<Outcome> {
    let mut ks = job.manifest.grids.clone();
    ks.sort_unstable();
    ks.dedup();
    if ks.len() < 3 {
        return Err(Error::Config("a convergence study needs at least three distinct grids".into()));
    }
    let grids: Vec<TimeGrid> = ks
        .iter()
        .map(|&k| TimeGrid::uniform(job.scenario.t_final(), k))
        .collect::<Result<_>>()?;
    let (rep, records) = convergence_study(&job.scenario, &grids, None, job.cfg)?;
    fs::create_dir_all(&job.out)?;
    write_study(&job.out.join("study.csv"), &rep)?;
    if job.emit_plotdata {
        let mut rows = Vec::new();
        for (r, rec) in rep.rows.iter().zip(&records) {
            for (i, l) in rec.ledger.iter().enumerate() {
                rows.push(row([&r.steps, &i, &l.t, &l.dissipation, &l.balance_residual]));
            }
        }
        write_csv(
            &job.out.join("plotdata.csv"),
            &["steps", "step", "t", "dissipation", "balance_residual"],
            rows,
        )?;
    }
    let ok = rep.cauchy_decreasing();
    let cauchy: Vec<String> = rep.rows.iter().filter_map(|r| r.sigma_cauchy).map(|v| format!("{v:.3e}")).collect();
    Ok(Outcome {
        code: if ok { EXIT_OK } else { EXIT_VERIFICATION },
        summary: format!(
            "grids {:?}: stress Cauchy norms {} ({})",
            ks,
            cauchy.join(" > "),
            if ok { "strictly decreasing" } else { "NOT strictly decreasing" }
        ),
    })
}

/// Re-audits a finished run directory and rewrites its `verify.csv`.
pub fn cmd_verify(run_dir: &Path) -> Outcome {
    let res = (|| -> Result<Outcome> {
        let sc = Scenario::from_file(&run_dir.join("scenario.toml"))?;
        let text = fs::read_to_string(run_dir.join("record.json"))
            .map_err(|e| Error::Config(format!("no record.json in {}: {e}", run_dir.display())))?;
        let rec: EvolutionRecord = serde_json::from_str(&text)?;
        if rec.triples.iter().any(|t| t.p.len() != sc.mesh().n_elements()) {
            return Err(Error::Config("record does not match the scenario mesh".into()));
        }
        let rows = verify_record(&rec, &sc, &VerifyTolerances::default());
        write_verify(&run_dir.join("verify.csv"), &rows)?;
        let (ok, msg) = summarize_checks(&rows);
        Ok(Outcome {
            code: if ok { EXIT_OK } else { EXIT_VERIFICATION },
            summary: msg,
        })
    })();
    res.unwrap_or_else(|e| Outcome::from_error(&e))
}

/// Reads a strain history `t,<components>`; two-dimensional histories have
/// the columns `t,exx,eyy,exy`, three-dimensional ones
/// `t,exx,eyy,ezz,eyz,exz,exy`.
pub fn read_history(path: &Path) -> Result<StrainHistory> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_path(path)?;
    let ncol = r.headers()?.len();
    let dim = match ncol {
        4 => 2,
        7 => 3,
        n => return Err(Error::InvalidHistory(format!("expected 4 or 7 columns, found {n}"))),
    };
    let (mut times, mut strains) = (Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|c| c.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidHistory(format!("row {}: {e}", line + 1)))?;
        if vals.len() != 1 + sym_len(dim) {
            return Err(Error::InvalidHistory(format!("row {} has {} entries", line + 1, vals.len())));
        }
        times.push(vals[0]);
        strains.push(SymTensor::new(dim, &vals[1..])?);
    }
    StrainHistory::new(times, strains)
}

pub fn read_material(path: &Path) -> Result<Material> {
    let text = fs::read_to_string(path)?;
    let spec: MaterialSpec = toml::from_str(&text)?;
    Ok(Material::new(ElasticModuli::new(spec.mu, spec.kappa)?, spec.yield_spec.build()?))
}

/// Point trace with columns `t`, strain, plastic strain, stress, energies
/// and the energy-balance residual.
pub fn point_trace_csv(material: &Material, history: &StrainHistory) -> Result<String> {
    let rec = run_point(material, history)?;
    let res = energy_residual(&rec);
    let dim = history.dim();
    let names: Vec<&str> = if dim == 2 {
        vec!["xx", "yy", "xy"]
    } else {
        vec!["xx", "yy", "zz", "yz", "xz", "xy"]
    };
    let mut header = vec!["t".to_string()];
    for pre in ["eps_", "p_", "sigma_"] {
        header.extend(names.iter().map(|n| format!("{pre}{n}")));
    }
    header.extend(["stored", "dissipation", "work", "energy_residual"].map(String::from));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for (s, r) in rec.states.iter().zip(res) {
        let mut cells = vec![fmt(s.t)];
        for t in [s.eps, *s.p.as_sym(), s.sigma] {
            cells.extend(t.components().iter().map(|v| fmt(*v)));
        }
        cells.extend([s.stored, s.dissipation, s.work, r].map(fmt));
        w.write_record(&cells)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

/// Writes `point.csv` into `out`, or returns the trace for stdout.
pub fn cmd_point(material: &Path, history: &Path, out: Option<&Path>) -> (Outcome, Option<String>) {
    let res = (|| -> Result<String> {
        let m = read_material(material)?;
        let h = read_history(history)?;
        point_trace_csv(&m, &h)
    })();
    match (res, out) {
        (Err(e), _) => (Outcome::from_error(&e), None),
        (Ok(text), Some(dir)) => {
            let r = fs::create_dir_all(dir).and_then(|_| fs::write(dir.join("point.csv"), &text));
            match r {
                Ok(()) => (
                    Outcome {
                        code: EXIT_OK,
                        summary: format!("wrote {}", dir.join("point.csv").display()),
                    },
                    None,
                ),
                Err(e) => (Outcome::from_error(&e.into()), None),
            }
        }
        (Ok(text), None) => (
            Outcome {
                code: EXIT_OK,
                summary: String::new(),
            },
            Some(text),
        ),
    }
}
