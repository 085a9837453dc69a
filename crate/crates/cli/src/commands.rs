//! Subcommand bodies. Each returns the stdout document and an exit code.

use std::path::{Path, PathBuf};

use hydro_duality::analysis::{
    cap_ordering, property_campaign_with, replay as replay_failure, verify_counts, CampaignOptions, Failure,
};
use hydro_duality::certificates::{closed_form_certificate, closed_form_obstacles, duality_gap};
use hydro_duality::dual::{build_dual, dual_feasible, policy_from_dual, DualCertificate, DualMutation};
use hydro_duality::generate::{generate_tree, GeneratorSpec};
use hydro_duality::model::{is_feasible, DamSystem};
use hydro_duality::primal::{build_primal, extract_policy};
use hydro_duality::tree::{PriceRegime, ScenarioTree};
use hydro_duality::HydroError;
use hydro_lp::{solve as primal_simplex, solve_dual_simplex, write_mps, SolverOptions, Status};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::table;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    NotOptimal(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::NotOptimal(_) => 2,
            CliError::Usage(_) | CliError::Io { .. } => 3,
        }
    }

    fn class(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Validation(_) => "validation",
            CliError::NotOptimal(_) => "not_optimal",
        }
    }

    pub fn to_json(&self) -> String {
        let message = match self {
            CliError::Usage(m) => m.clone(),
            other => other.to_string(),
        };
        pretty(&json!({
            "kind": "error",
            "error": {"code": self.code(), "class": self.class(), "message": message},
        }))
    }
}

impl From<HydroError> for CliError {
    fn from(e: HydroError) -> Self {
        match e {
            HydroError::NotOptimal { .. } => CliError::NotOptimal(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

pub struct Output {
    pub stdout: String,
    pub code: u8,
    pub diagnostics: Vec<String>,
}

impl Output {
    fn json(doc: &Value, code: u8) -> Self {
        Self {
            stdout: pretty(doc),
            code,
            diagnostics: Vec::new(),
        }
    }

    fn with_diagnostics(mut self, lines: Vec<String>) -> Self {
        self.diagnostics = lines;
        self
    }
}

pub struct SolveConfig {
    pub system: PathBuf,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub dump_mps: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Primal,
    Dual,
    Both,
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values serialize")
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

struct Input {
    path: String,
    text: String,
}

impl Input {
    fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(Self {
            path: path.display().to_string(),
            text,
        })
    }

    fn describe(&self) -> Value {
        json!({"path": self.path, "sha256": sha256(&self.text)})
    }
}

fn sha256(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn load_tree(input: &Input) -> Result<ScenarioTree, CliError> {
    ScenarioTree::from_json(&input.text).map_err(|e| CliError::Validation(format!("{}: {e}", input.path)))
}

fn load_system(input: &Input, tree: &ScenarioTree) -> Result<DamSystem, CliError> {
    let sys = DamSystem::from_json(&input.text).map_err(|e| CliError::Validation(format!("{}: {e}", input.path)))?;
    sys.check_tree(tree)
        .map_err(|e| CliError::Validation(format!("{}: {e}", input.path)))?;
    Ok(sys)
}

fn solver_options(tol: Option<f64>) -> Result<SolverOptions, CliError> {
    match tol {
        None => Ok(SolverOptions::default()),
        Some(t) if t.is_finite() && t > 0.0 => Ok(SolverOptions::default().with_tolerance(t)),
        Some(t) => Err(CliError::Usage(format!("--tol must be positive and finite, got {t}"))),
    }
}

fn tree_summary(tree: &ScenarioTree) -> Value {
    let atoms = |f: &hydro_duality::tree::Filtration| (0..tree.stages()).map(|t| f.num_atoms(t)).collect::<Vec<_>>();
    json!({
        "stages": tree.stages(),
        "dams": tree.dams(),
        "scenarios": tree.num_scenarios(),
        "manager_atoms": atoms(tree.manager()),
        "full_atoms": atoms(tree.full()),
        "inflow_nonnegative": tree.inflow_nonnegative(),
        "description": tree.description(),
    })
}

pub fn validate(tree_path: &Path, system_path: Option<&Path>) -> Result<Output, CliError> {
    let input = Input::read(tree_path)?;
    let system_input = system_path.map(Input::read).transpose()?;
    let mut errors = Vec::new();
    let tree = match ScenarioTree::from_json(&input.text) {
        Ok(t) => Some(t),
        Err(e) => {
            errors.push(format!("tree: {e}"));
            None
        }
    };
    let system = system_input.as_ref().map(|si| {
        let mut sys_errors = Vec::new();
        let variant = match DamSystem::from_json(&si.text) {
            Ok(sys) => {
                if let Some(t) = &tree {
                    if let Err(e) = sys.check_tree(t) {
                        sys_errors.push(e.to_string());
                    }
                }
                to_value(&sys.variant)
            }
            Err(e) => {
                sys_errors.push(e.to_string());
                Value::Null
            }
        };
        errors.extend(sys_errors.iter().map(|e| format!("system: {e}")));
        json!({"input": si.describe(), "valid": sys_errors.is_empty(), "variant": variant, "errors": sys_errors})
    });
    let valid = errors.is_empty();
    let doc = json!({
        "kind": "validate",
        "input": input.describe(),
        "valid": valid,
        "errors": errors,
        "tree": tree.as_ref().map(tree_summary),
        "system": system,
    });
    Ok(Output::json(&doc, if valid { 0 } else { 1 }).with_diagnostics(errors))
}

fn dump_mps(dir: &Path, tree: &ScenarioTree, sys: &DamSystem) -> Result<Value, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let primal = dir.join("primal.mps");
    let dual = dir.join("dual.mps");
    write_file(&primal, &write_mps(&build_primal(tree, sys)?.problem))?;
    write_file(&dual, &write_mps(&build_dual(tree, sys)?.problem))?;
    Ok(json!({"primal": primal.display().to_string(), "dual": dual.display().to_string()}))
}

pub fn solve(tree_path: &Path, cfg: &SolveConfig, side: Side) -> Result<Output, CliError> {
    let options = solver_options(cfg.tol)?;
    let tree_in = Input::read(tree_path)?;
    let sys_in = Input::read(&cfg.system)?;
    let tree = load_tree(&tree_in)?;
    let sys = load_system(&sys_in, &tree)?;
    let mps = cfg.dump_mps.as_deref().map(|d| dump_mps(d, &tree, &sys)).transpose()?;
    let mut not_optimal = Vec::new();

    let primal = if side != Side::Dual {
        let lp = build_primal(&tree, &sys)?;
        let sol = primal_simplex(&lp.problem, &options).map_err(HydroError::from)?;
        let (policy, feasible) = if sol.status == Status::Optimal {
            let policy = extract_policy(&sol, &lp.map)?;
            let feasible = is_feasible(&policy, &tree, &sys)?.feasible;
            (Some(policy), Some(feasible))
        } else {
            not_optimal.push(format!("primal LP: solver returned {:?}", sol.status));
            (None, None)
        };
        Some(json!({
            "status": sol.status,
            "objective": (sol.status == Status::Optimal).then_some(sol.objective),
            "iterations": sol.iterations,
            "columns": lp.problem.num_columns(),
            "rows": lp.problem.num_rows(),
            "policy": policy,
            "policy_feasible": feasible,
        }))
    } else {
        None
    };

    let dual = if side != Side::Primal {
        let lp = build_dual(&tree, &sys)?;
        let sol = solve_dual_simplex(&lp.problem, &options).map_err(HydroError::from)?;
        let (cert, feasible, shadow) = if sol.status == Status::Optimal {
            let cert = DualCertificate::from_columns(&tree, &sys, &lp.map, &sol.x)?;
            let feasible = dual_feasible(&cert, &tree, &sys)?.feasible;
            let shadow = policy_from_dual(&sol, &lp)?;
            (Some(cert), Some(feasible), Some(shadow))
        } else {
            not_optimal.push(format!("dual LP: solver returned {:?}", sol.status));
            (None, None, None)
        };
        Some(json!({
            "status": sol.status,
            "objective": (sol.status == Status::Optimal).then_some(sol.objective),
            "iterations": sol.iterations,
            "columns": lp.problem.num_columns(),
            "rows": lp.problem.num_rows(),
            "certificate": cert,
            "certificate_feasible": feasible,
            "shadow_policy": shadow,
        }))
    } else {
        None
    };

    let doc = json!({
        "kind": "solve",
        "tree": tree_in.describe(),
        "system": sys_in.describe(),
        "options": {"solver": to_value(&options), "tol": cfg.tol, "side": side},
        "mps": mps,
        "primal": primal,
        "dual": dual,
    });
    if let Some(out) = &cfg.out {
        write_file(out, &pretty(&doc))?;
    }
    let code = if not_optimal.is_empty() { 0 } else { 2 };
    Ok(Output::json(&doc, code).with_diagnostics(not_optimal))
}

pub fn gap(tree_path: &Path, cfg: &SolveConfig) -> Result<Output, CliError> {
    let options = solver_options(cfg.tol)?;
    let tree_in = Input::read(tree_path)?;
    let sys_in = Input::read(&cfg.system)?;
    let tree = load_tree(&tree_in)?;
    let sys = load_system(&sys_in, &tree)?;
    let mps = cfg.dump_mps.as_deref().map(|d| dump_mps(d, &tree, &sys)).transpose()?;
    let report = duality_gap(&tree, &sys, &options)?;
    let obstacles = closed_form_obstacles(&tree, &sys)?;
    let closed = closed_form_certificate(&tree, &sys)?;
    let doc = json!({
        "kind": "gap",
        "tree": tree_in.describe(),
        "system": sys_in.describe(),
        "options": {"solver": to_value(&options), "tol": cfg.tol},
        "mps": mps,
        "gap": to_value(&report),
        "closed_form": {
            "applies": closed.is_some(),
            "obstacles": obstacles,
            "regime": closed.as_ref().map(|c| c.regime),
            "value": closed.as_ref().map(|c| c.value),
        },
    });
    if let Some(out) = &cfg.out {
        write_file(out, &pretty(&doc))?;
    }
    let diagnostics = if report.gap_ok {
        Vec::new()
    } else {
        vec![format!("relative gap {:e} exceeds tolerance", report.rel_gap)]
    };
    Ok(Output::json(&doc, 0).with_diagnostics(diagnostics))
}

fn overall_regime(per_dam: &[PriceRegime]) -> Value {
    match per_dam.first() {
        Some(first) if per_dam.iter().all(|r| r == first) => to_value(first),
        _ => json!("Mixed"),
    }
}

pub fn classify(tree_path: &Path, system_path: Option<&Path>) -> Result<Output, CliError> {
    let tree_in = Input::read(tree_path)?;
    let tree = load_tree(&tree_in)?;
    let per_dam = tree.classify_price();
    let (system, no_flood, violations, obstacles) = match system_path {
        Some(p) => {
            let sys_in = Input::read(p)?;
            let sys = load_system(&sys_in, &tree)?;
            let nf = tree.check_no_flood(&sys).map_err(HydroError::from)?;
            let obstacles = closed_form_obstacles(&tree, &sys)?;
            (
                Some(sys_in.describe()),
                Some(nf.holds),
                Some(to_value(&nf.violations)),
                Some(obstacles),
            )
        }
        None => (None, None, None, None),
    };
    let doc = json!({
        "kind": "classify",
        "tree": tree_in.describe(),
        "system": system,
        "regime": overall_regime(&per_dam),
        "per_dam": per_dam,
        "inflow_nonnegative": tree.inflow_nonnegative(),
        "no_flood": no_flood,
        "flood_violations": violations,
        "closed_form_obstacles": obstacles,
    });
    Ok(Output::json(&doc, 0))
}

pub fn generate(spec_path: &Path, seed: u64, out: Option<&Path>) -> Result<Output, CliError> {
    let spec_in = Input::read(spec_path)?;
    let spec = GeneratorSpec::from_json(&spec_in.text)?;
    let tree = generate_tree(&spec, seed)?;
    let text = tree.to_json();
    if let Some(p) = out {
        write_file(p, &text)?;
    }
    let embedded: Value = serde_json::from_str(&text).expect("tree JSON parses");
    let doc = json!({
        "kind": "generate",
        "spec": spec_in.describe(),
        "seed": seed,
        "generator": to_value(&spec),
        "out": out.map(|p| p.display().to_string()),
        "sha256": sha256(&text),
        "summary": tree_summary(&tree),
        "tree": if out.is_some() { Value::Null } else { embedded },
    });
    Ok(Output::json(&doc, 0))
}

pub fn report(path: &Path) -> Result<Output, CliError> {
    let input = Input::read(path)?;
    let doc: Value = serde_json::from_str(&input.text)
        .map_err(|e| CliError::Validation(format!("{}: not a JSON report: {e}", input.path)))?;
    let text = table::render(&doc).map_err(CliError::Validation)?;
    Ok(Output {
        stdout: text,
        code: 0,
        diagnostics: Vec::new(),
    })
}

pub fn campaign(
    seed: u64,
    cases: usize,
    pairs: usize,
    mutation: DualMutation,
    skip_lp: bool,
    failures_dir: Option<&Path>,
) -> Result<Output, CliError> {
    let mut options = CampaignOptions::new(cases);
    options.pairs_per_case = pairs;
    options.mutation = mutation;
    options.skip_lp = skip_lp;
    let report = property_campaign_with(seed, &options);
    let mut files = Vec::new();
    if let Some(dir) = failures_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        for (i, f) in report.failures.iter().enumerate() {
            let p = dir.join(format!("failure_{i}.json"));
            write_file(&p, &serde_json::to_string_pretty(f).expect("failure serializes"))?;
            files.push(p.display().to_string());
        }
    }
    let diagnostics = report
        .failures
        .iter()
        .map(|f| format!("case {} {:?}: {}", f.case_index, f.check, f.detail))
        .collect();
    let doc = json!({
        "kind": "campaign",
        "options": to_value(&options),
        "report": to_value(&report),
        "failure_files": failures_dir.map(|_| files),
    });
    Ok(Output::json(&doc, if report.passed { 0 } else { 1 }).with_diagnostics(diagnostics))
}

pub fn replay(path: &Path) -> Result<Output, CliError> {
    let input = Input::read(path)?;
    let failure: Failure = serde_json::from_str(&input.text)
        .map_err(|e| CliError::Validation(format!("{}: not a failure record: {e}", input.path)))?;
    let r = replay_failure(&failure)?;
    let passed = r.result.passed();
    let doc = json!({
        "kind": "replay",
        "input": input.describe(),
        "report": to_value(&r),
    });
    Ok(Output::json(&doc, if passed { 0 } else { 1 }))
}

pub fn counts(tree_path: &Path, system_path: &Path) -> Result<Output, CliError> {
    let tree_in = Input::read(tree_path)?;
    let sys_in = Input::read(system_path)?;
    let tree = load_tree(&tree_in)?;
    let sys = load_system(&sys_in, &tree)?;
    let r = verify_counts(&tree, &sys)?;
    let doc = json!({
        "kind": "counts",
        "tree": tree_in.describe(),
        "system": sys_in.describe(),
        "report": to_value(&r),
    });
    Ok(Output::json(&doc, if r.matches { 0 } else { 1 }))
}

pub fn ordering(tree_path: &Path, system_path: &Path, tol: f64) -> Result<Output, CliError> {
    let tree_in = Input::read(tree_path)?;
    let sys_in = Input::read(system_path)?;
    let tree = load_tree(&tree_in)?;
    let sys = load_system(&sys_in, &tree)?;
    let r = cap_ordering(&tree, &sys, &SolverOptions::default(), tol)?;
    let doc = json!({
        "kind": "ordering",
        "tree": tree_in.describe(),
        "system": sys_in.describe(),
        "tol": tol,
        "report": to_value(&r),
    });
    Ok(Output::json(&doc, 0))
}
