//! The dual LP and dual certificates.
//!
//! One equality row per primal decision, in the primal column order, so the
//! row prices of an optimal dual solve are the primal decisions. For a drain
//! `D_i(t)` on manager atom `A` the row reads
//!
//! ```text
//! P(A)(v_i - γ_i) + Σ_{s>=t, B⊆A} P(B) λ_{i,s}(B) - Σ_{s>t, B⊆A} P(B) w_{i,s}(B)
//!     = ∫_A (S_i(t+1) - α S_i(T)) dP
//! ```
//!
//! `γ` and `v` live on manager atoms; `λ` and `w` live on full atoms, one
//! multiplier per primal level row. Under a total cap a single `v` per
//! `(t, A)` enters every dam's row. The cascade adds a transfer row and a
//! spill row per `(t, A)` with their own box multipliers.

use std::collections::HashMap;

use hydro_lp::{LpProblem, LpSolution, RowKind, Sense, Status, VarStatus};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HydroError, Result};
use crate::model::{DamSystem, DrainPolicy, Variant};
use crate::primal::{decision_objective, Decision, DecisionKind, VariableMap};
use crate::tree::ScenarioTree;

/// Absolute tolerance on the integral form of the dual rows.
pub const DUAL_FEAS_TOL: f64 = 1e-9;
/// Agreement required between the integral and conditional row forms.
pub const FORM_AGREEMENT_TOL: f64 = 1e-12;

/// `α E[Σ_i S_i(T)(V_i(1) + Σ_t R_i(t))]`.
pub fn constant_c(tree: &ScenarioTree, sys: &DamSystem) -> f64 {
    let last = tree.stages() - 1;
    let total: f64 = (0..tree.num_scenarios())
        .map(|k| {
            let per_dam: f64 = (0..sys.n_dams)
                .map(|i| tree.price(last, k, i) * (sys.v1[i] + tree.cumulative_inflow(last, k, i)))
                .sum();
            tree.probs()[k] * per_dam
        })
        .sum();
    sys.alpha * total
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DualFamily {
    Gamma,
    V,
    Lambda,
    W,
    GammaTransfer,
    VTransfer,
    GammaSpill,
    VSpill,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DualVar {
    pub family: DualFamily,
    /// Zero-based stage.
    pub stage: usize,
    /// Full atom for `λ`, `w`; manager atom otherwise.
    pub atom: usize,
    /// `None` for the shared total-cap `v` and the cascade box multipliers.
    pub dam: Option<usize>,
}

/// Column layout of the dual LP.
#[derive(Clone, Debug, PartialEq)]
pub struct DualMap {
    vars: Vec<DualVar>,
    index: HashMap<DualVar, usize>,
}

impl DualMap {
    pub fn new(tree: &ScenarioTree, sys: &DamSystem) -> Self {
        let mut vars = Vec::new();
        let n = sys.n_dams;
        let total_cap = matches!(sys.variant, Variant::TotalCap { .. });
        for t in 0..tree.stages() - 1 {
            let managers = tree.manager().num_atoms(t);
            let fulls = tree.full().num_atoms(t);
            let mut push = |family, atoms: usize, dams: Option<usize>| {
                for atom in 0..atoms {
                    match dams {
                        Some(n) => {
                            for i in 0..n {
                                vars.push(DualVar {
                                    family,
                                    stage: t,
                                    atom,
                                    dam: Some(i),
                                })
                            }
                        }
                        None => vars.push(DualVar {
                            family,
                            stage: t,
                            atom,
                            dam: None,
                        }),
                    }
                }
            };
            push(DualFamily::Gamma, managers, Some(n));
            push(DualFamily::V, managers, if total_cap { None } else { Some(n) });
            push(DualFamily::Lambda, fulls, Some(n));
            push(DualFamily::W, fulls, Some(n));
            if sys.is_cascade() {
                for family in [
                    DualFamily::GammaTransfer,
                    DualFamily::VTransfer,
                    DualFamily::GammaSpill,
                    DualFamily::VSpill,
                ] {
                    push(family, managers, None);
                }
            }
        }
        let index = vars.iter().enumerate().map(|(j, v)| (*v, j)).collect();
        Self { vars, index }
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn vars(&self) -> &[DualVar] {
        &self.vars
    }

    pub fn column_of(&self, var: &DualVar) -> Option<usize> {
        self.index.get(var).copied()
    }
}

/// Cascade box multipliers, each `[t][manager atom]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeMultipliers {
    pub gamma_transfer: Vec<Vec<f64>>,
    pub v_transfer: Vec<Vec<f64>>,
    pub gamma_spill: Vec<Vec<f64>>,
    pub v_spill: Vec<Vec<f64>>,
}

/// Multipliers `y = (γ, v, λ, w)`.
///
/// `gamma` and `v` are `[t][manager atom][dam]` (`v` has one entry per atom
/// under a total cap); `lambda` and `w` are `[t][full atom][dam]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub gamma: Vec<Vec<Vec<f64>>>,
    pub v: Vec<Vec<Vec<f64>>>,
    pub lambda: Vec<Vec<Vec<f64>>>,
    pub w: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub cascade: Option<CascadeMultipliers>,
}

impl DualCertificate {
    pub fn zero(tree: &ScenarioTree, sys: &DamSystem) -> Self {
        let n = sys.n_dams;
        let stages = tree.stages() - 1;
        let on = |atoms: &dyn Fn(usize) -> usize, width: usize| -> Vec<Vec<Vec<f64>>> {
            (0..stages).map(|t| vec![vec![0.0; width]; atoms(t)]).collect()
        };
        let managers = |t| tree.manager().num_atoms(t);
        let fulls = |t| tree.full().num_atoms(t);
        let v_width = if matches!(sys.variant, Variant::TotalCap { .. }) { 1 } else { n };
        let flat = || -> Vec<Vec<f64>> { (0..stages).map(|t| vec![0.0; managers(t)]).collect() };
        Self {
            gamma: on(&managers, n),
            v: on(&managers, v_width),
            lambda: on(&fulls, n),
            w: on(&fulls, n),
            cascade: sys.is_cascade().then(|| CascadeMultipliers {
                gamma_transfer: flat(),
                v_transfer: flat(),
                gamma_spill: flat(),
                v_spill: flat(),
            }),
        }
    }

    pub fn value(&self, var: &DualVar) -> f64 {
        *self.slot(var)
    }

    pub fn set(&mut self, var: &DualVar, value: f64) {
        *self.slot_mut(var) = value;
    }

    fn slot(&self, var: &DualVar) -> &f64 {
        let (t, a, i) = (var.stage, var.atom, var.dam.unwrap_or(0));
        let c = || self.cascade.as_ref().expect("cascade multipliers present");
        match var.family {
            DualFamily::Gamma => &self.gamma[t][a][i],
            DualFamily::V => &self.v[t][a][i],
            DualFamily::Lambda => &self.lambda[t][a][i],
            DualFamily::W => &self.w[t][a][i],
            DualFamily::GammaTransfer => &c().gamma_transfer[t][a],
            DualFamily::VTransfer => &c().v_transfer[t][a],
            DualFamily::GammaSpill => &c().gamma_spill[t][a],
            DualFamily::VSpill => &c().v_spill[t][a],
        }
    }

    fn slot_mut(&mut self, var: &DualVar) -> &mut f64 {
        let (t, a, i) = (var.stage, var.atom, var.dam.unwrap_or(0));
        if matches!(var.family, DualFamily::Gamma | DualFamily::V | DualFamily::Lambda | DualFamily::W) {
            return match var.family {
                DualFamily::Gamma => &mut self.gamma[t][a][i],
                DualFamily::V => &mut self.v[t][a][i],
                DualFamily::Lambda => &mut self.lambda[t][a][i],
                _ => &mut self.w[t][a][i],
            };
        }
        let c = self.cascade.as_mut().expect("cascade multipliers present");
        match var.family {
            DualFamily::GammaTransfer => &mut c.gamma_transfer[t][a],
            DualFamily::VTransfer => &mut c.v_transfer[t][a],
            DualFamily::GammaSpill => &mut c.gamma_spill[t][a],
            _ => &mut c.v_spill[t][a],
        }
    }

    /// Values in dual LP column order.
    pub fn to_columns(&self, map: &DualMap) -> Vec<f64> {
        map.vars().iter().map(|v| self.value(v)).collect()
    }

    pub fn from_columns(tree: &ScenarioTree, sys: &DamSystem, map: &DualMap, values: &[f64]) -> Result<Self> {
        if values.len() != map.len() {
            return Err(HydroError::Dimension(format!(
                "{} values for {} dual columns",
                values.len(),
                map.len()
            )));
        }
        let mut cert = Self::zero(tree, sys);
        for (var, &x) in map.vars().iter().zip(values) {
            cert.set(var, x);
        }
        Ok(cert)
    }

    pub fn check_shape(&self, tree: &ScenarioTree, sys: &DamSystem) -> Result<()> {
        sys.check_tree(tree)?;
        let zero = Self::zero(tree, sys);
        let same3 = |a: &Vec<Vec<Vec<f64>>>, b: &Vec<Vec<Vec<f64>>>| {
            a.len() == b.len()
                && a.iter()
                    .zip(b)
                    .all(|(x, y)| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.len() == q.len()))
        };
        let same2 = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.len() == y.len())
        };
        let cascade_ok = match (&self.cascade, &zero.cascade) {
            (None, None) => true,
            (Some(c), Some(z)) => {
                same2(&c.gamma_transfer, &z.gamma_transfer)
                    && same2(&c.v_transfer, &z.v_transfer)
                    && same2(&c.gamma_spill, &z.gamma_spill)
                    && same2(&c.v_spill, &z.v_spill)
            }
            _ => false,
        };
        if same3(&self.gamma, &zero.gamma)
            && same3(&self.v, &zero.v)
            && same3(&self.lambda, &zero.lambda)
            && same3(&self.w, &zero.w)
            && cascade_ok
        {
            Ok(())
        } else {
            Err(HydroError::Dimension("certificate shape does not match tree and system".into()))
        }
    }

    /// Smallest entry over all families.
    pub fn min_entry(&self) -> f64 {
        let mut all: Vec<f64> = [&self.gamma, &self.v, &self.lambda, &self.w]
            .iter()
            .flat_map(|f| f.iter().flatten().flatten().copied())
            .collect();
        if let Some(c) = &self.cascade {
            for f in [&c.gamma_transfer, &c.v_transfer, &c.gamma_spill, &c.v_spill] {
                all.extend(f.iter().flatten().copied());
            }
        }
        all.into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.min_entry() >= 0.0
    }
}

/// Deliberate defects for mutation-testing the verification harness.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum DualMutation {
    #[default]
    None,
    /// Negates every `λ` coefficient in the drain rows.
    FlipLambdaSign,
    /// Negates every `w` coefficient in the drain rows.
    FlipWSign,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualLp {
    pub problem: LpProblem,
    pub map: DualMap,
    /// Row `j` belongs to primal decision `j`.
    pub primal_map: VariableMap,
}

pub fn build_dual(tree: &ScenarioTree, sys: &DamSystem) -> Result<DualLp> {
    build_dual_with(tree, sys, DualMutation::None)
}

pub fn build_dual_with(tree: &ScenarioTree, sys: &DamSystem, mutation: DualMutation) -> Result<DualLp> {
    sys.check_tree(tree)?;
    let map = DualMap::new(tree, sys);
    let primal_map = VariableMap::new(tree, sys);
    let mut lp = LpProblem::new(Sense::Minimize).with_name("dual");
    for var in map.vars() {
        let cost = dual_cost(tree, sys, var);
        let name = format!(
            "{:?}[t{},a{}{}]",
            var.family,
            var.stage + 1,
            var.atom,
            var.dam.map(|i| format!(",i{}", i + 1)).unwrap_or_default()
        );
        lp.add_column(name, cost, 0.0, f64::INFINITY);
    }
    for d in primal_map.decisions() {
        let mut coeffs: Vec<(usize, f64)> = row_entries(tree, sys, d)
            .into_iter()
            .map(|(var, c)| {
                let flipped = match mutation {
                    DualMutation::None => false,
                    DualMutation::FlipLambdaSign => var.family == DualFamily::Lambda,
                    DualMutation::FlipWSign => var.family == DualFamily::W,
                };
                let c = if flipped && d.kind == DecisionKind::Drain {
                    -c
                } else {
                    c
                };
                (map.column_of(&var).expect("dual column exists"), c)
            })
            .collect();
        coeffs.sort_by_key(|(j, _)| *j);
        let name = format!(
            "row_{:?}[t{},a{}{}]",
            d.kind,
            d.stage + 1,
            d.atom,
            d.dam.map(|i| format!(",i{}", i + 1)).unwrap_or_default()
        );
        lp.add_row(name, coeffs, RowKind::Eq, decision_objective(tree, sys, *d));
    }
    lp.set_objective_constant(constant_c(tree, sys));
    Ok(DualLp {
        problem: lp,
        map,
        primal_map,
    })
}

/// Objective weight of one dual column.
fn dual_cost(tree: &ScenarioTree, sys: &DamSystem, var: &DualVar) -> f64 {
    let t = var.stage;
    match var.family {
        DualFamily::Lambda | DualFamily::W => {
            let atom = &tree.full().atoms(t)[var.atom];
            let i = var.dam.expect("level multipliers carry a dam");
            let level = sys.v1[i] + tree.cumulative_inflow(t, atom[0], i);
            let weight = if var.family == DualFamily::Lambda {
                level
            } else {
                sys.m[i] - level
            };
            tree.prob_of(atom) * weight
        }
        DualFamily::V => {
            let p = tree.prob_of(&tree.manager().atoms(t)[var.atom]);
            match (sys.variant.clone(), var.dam) {
                (Variant::TotalCap { c_tilde }, _) => p * c_tilde,
                (_, Some(i)) => p * sys.b[i],
                _ => unreachable!("per-dam capacity multiplier carries a dam"),
            }
        }
        DualFamily::VTransfer | DualFamily::VSpill => {
            let p = tree.prob_of(&tree.manager().atoms(t)[var.atom]);
            match sys.variant {
                Variant::Cascade { m_transfer, n_out } => {
                    p * if var.family == DualFamily::VTransfer {
                        m_transfer
                    } else {
                        n_out
                    }
                }
                _ => unreachable!("cascade multipliers only exist in the cascade"),
            }
        }
        DualFamily::Gamma | DualFamily::GammaTransfer | DualFamily::GammaSpill => 0.0,
    }
}

/// Coefficients of the dual row belonging to decision `d`.
fn row_entries(tree: &ScenarioTree, sys: &DamSystem, d: &Decision) -> Vec<(DualVar, f64)> {
    let t = d.stage;
    let p_a = tree.prob_of(&tree.manager().atoms(t)[d.atom]);
    let mut out = Vec::new();
    let own = |family, dam| DualVar {
        family,
        stage: t,
        atom: d.atom,
        dam,
    };
    // Full atoms at stage s inside the manager atom of the row.
    let inside = |s: usize| -> Vec<(usize, f64)> {
        tree.full()
            .atoms(s)
            .iter()
            .enumerate()
            .filter(|(_, b)| tree.manager().atom_of(t, b[0]) == d.atom)
            .map(|(j, b)| (j, tree.prob_of(b)))
            .collect()
    };
    let level = |family, s, atom, dam| DualVar {
        family,
        stage: s,
        atom,
        dam: Some(dam),
    };
    match d.kind {
        DecisionKind::Drain => {
            let i = d.dam.expect("drain has a dam");
            out.push((own(DualFamily::Gamma, Some(i)), -p_a));
            let v_dam = if matches!(sys.variant, Variant::TotalCap { .. }) {
                None
            } else {
                Some(i)
            };
            out.push((own(DualFamily::V, v_dam), p_a));
            for s in t..tree.stages() - 1 {
                for (b, p_b) in inside(s) {
                    out.push((level(DualFamily::Lambda, s, b, i), p_b));
                    if s > t {
                        out.push((level(DualFamily::W, s, b, i), -p_b));
                    }
                }
            }
        }
        DecisionKind::Transfer => {
            out.push((own(DualFamily::GammaTransfer, None), -p_a));
            out.push((own(DualFamily::VTransfer, None), p_a));
            for s in t + 1..tree.stages() - 1 {
                for (b, p_b) in inside(s) {
                    out.push((level(DualFamily::Lambda, s, b, 0), p_b));
                    out.push((level(DualFamily::Lambda, s, b, 1), -p_b));
                    out.push((level(DualFamily::W, s, b, 0), -p_b));
                    out.push((level(DualFamily::W, s, b, 1), p_b));
                }
            }
        }
        DecisionKind::Spill => {
            out.push((own(DualFamily::GammaSpill, None), -p_a));
            out.push((own(DualFamily::VSpill, None), p_a));
            for s in t + 1..tree.stages() - 1 {
                for (b, p_b) in inside(s) {
                    out.push((level(DualFamily::Lambda, s, b, 1), p_b));
                    out.push((level(DualFamily::W, s, b, 1), -p_b));
                }
            }
        }
    }
    out
}

/// `C + Σ_t E[λ_t (V(1) + Σ_{s<t} R(s)) + v_t b + w_t (m - V(1) - Σ_{s<t} R(s))]`
/// plus the cascade box terms, evaluated scenario by scenario.
pub fn dual_objective(cert: &DualCertificate, tree: &ScenarioTree, sys: &DamSystem) -> Result<f64> {
    cert.check_shape(tree, sys)?;
    let mut total = constant_c(tree, sys);
    for k in 0..tree.num_scenarios() {
        let p = tree.probs()[k];
        let mut acc = 0.0;
        for t in 0..tree.stages() - 1 {
            let a = tree.manager().atom_of(t, k);
            let b = tree.full().atom_of(t, k);
            for i in 0..sys.n_dams {
                let level = sys.v1[i] + tree.cumulative_inflow(t, k, i);
                acc += cert.lambda[t][b][i] * level + cert.w[t][b][i] * (sys.m[i] - level);
            }
            match sys.variant {
                Variant::TotalCap { c_tilde } => acc += cert.v[t][a][0] * c_tilde,
                _ => {
                    for i in 0..sys.n_dams {
                        acc += cert.v[t][a][i] * sys.b[i];
                    }
                }
            }
            if let (Variant::Cascade { m_transfer, n_out }, Some(c)) = (&sys.variant, &cert.cascade) {
                acc += c.v_transfer[t][a] * m_transfer + c.v_spill[t][a] * n_out;
            }
        }
        total += p * acc;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowResidual {
    pub decision: Decision,
    /// `∫_A (lhs - rhs) dP`.
    pub integral: f64,
    /// `E[lhs - rhs | G_t]` on the row's atom.
    pub conditional: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualFeasibility {
    pub feasible: bool,
    pub nonnegative: bool,
    pub max_residual: f64,
    /// Largest `|integral / P(A) - conditional|`, relative to the row scale.
    pub form_disagreement: f64,
    pub residuals: Vec<RowResidual>,
}

/// Evaluates every dual row in integral form and in conditional-expectation form.
pub fn dual_feasible(cert: &DualCertificate, tree: &ScenarioTree, sys: &DamSystem) -> Result<DualFeasibility> {
    cert.check_shape(tree, sys)?;
    let map = VariableMap::new(tree, sys);
    let mut residuals = Vec::with_capacity(map.len());
    let mut max_residual = 0.0_f64;
    let mut disagreement = 0.0_f64;
    for d in map.decisions() {
        let integral = integral_residual(cert, tree, sys, d);
        let (conditional, scale) = conditional_residual(cert, tree, sys, d);
        let p_a = tree.prob_of(&tree.manager().atoms(d.stage)[d.atom]);
        disagreement = disagreement.max((integral / p_a - conditional).abs() / scale.max(1.0));
        max_residual = max_residual.max(integral.abs());
        residuals.push(RowResidual {
            decision: *d,
            integral,
            conditional,
        });
    }
    let nonnegative = cert.is_nonnegative();
    Ok(DualFeasibility {
        feasible: nonnegative && max_residual <= DUAL_FEAS_TOL,
        nonnegative,
        max_residual,
        form_disagreement: disagreement,
        residuals,
    })
}

/// Row residual summed atom by atom: `P(A)(v - γ) + Σ P(B)(λ, w terms) - ∫_A rhs`.
fn integral_residual(cert: &DualCertificate, tree: &ScenarioTree, sys: &DamSystem, d: &Decision) -> f64 {
    let lhs: f64 = row_entries(tree, sys, d)
        .iter()
        .map(|(var, c)| c * cert.value(var))
        .sum();
    lhs - decision_objective(tree, sys, *d)
}

/// The same row as `E[integrand | G_t]`, integrand assembled per scenario.
/// Returns the residual and the magnitude of its largest term.
fn conditional_residual(cert: &DualCertificate, tree: &ScenarioTree, sys: &DamSystem, d: &Decision) -> (f64, f64) {
    let t = d.stage;
    let last = tree.stages() - 1;
    let a = sys.alpha;
    let lam = |s: usize, k: usize, i: usize| cert.lambda[s][tree.full().atom_of(s, k)][i];
    let w = |s: usize, k: usize, i: usize| cert.w[s][tree.full().atom_of(s, k)][i];
    let mut scale = 0.0_f64;
    let values: Vec<f64> = (0..tree.num_scenarios())
        .map(|k| {
            let terms: Vec<f64> = match d.kind {
                DecisionKind::Drain => {
                    let i = d.dam.expect("drain has a dam");
                    let am = tree.manager().atom_of(t, k);
                    let v = match sys.variant {
                        Variant::TotalCap { .. } => cert.v[t][am][0],
                        _ => cert.v[t][am][i],
                    };
                    let mut terms = vec![
                        v,
                        -cert.gamma[t][am][i],
                        -(tree.price(t + 1, k, i) - a * tree.price(last, k, i)),
                    ];
                    for s in t..last {
                        terms.push(lam(s, k, i));
                        if s > t {
                            terms.push(-w(s, k, i));
                        }
                    }
                    terms
                }
                DecisionKind::Transfer | DecisionKind::Spill => {
                    let am = tree.manager().atom_of(t, k);
                    let c = cert.cascade.as_ref().expect("cascade multipliers present");
                    let mut terms = Vec::new();
                    if d.kind == DecisionKind::Transfer {
                        terms.push(c.v_transfer[t][am]);
                        terms.push(-c.gamma_transfer[t][am]);
                        terms.push(-a * (tree.price(last, k, 1) - tree.price(last, k, 0)));
                        for s in t + 1..last {
                            terms.extend([lam(s, k, 0), -lam(s, k, 1), -w(s, k, 0), w(s, k, 1)]);
                        }
                    } else {
                        terms.push(c.v_spill[t][am]);
                        terms.push(-c.gamma_spill[t][am]);
                        terms.push(a * tree.price(last, k, 1));
                        for s in t + 1..last {
                            terms.extend([lam(s, k, 1), -w(s, k, 1)]);
                        }
                    }
                    terms
                }
            };
            scale = scale.max(terms.iter().fold(0.0_f64, |m, x| m.max(x.abs())));
            terms.iter().sum()
        })
        .collect();
    let cond = tree
        .conditional_expectation(&values, t)
        .expect("values cover every scenario");
    (cond[d.atom], scale)
}

/// Policy recovered from the equality-row prices of an optimal dual solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowPolicy {
    pub policy: DrainPolicy,
    /// Some nonbasic reduced cost is within `1e-9` of zero, so the policy
    /// may be one of several optimal ones.
    pub degenerate: bool,
}

pub fn policy_from_dual(solution: &LpSolution, dual: &DualLp) -> Result<ShadowPolicy> {
    if solution.status != Status::Optimal {
        return Err(HydroError::NotOptimal {
            context: "policy_from_dual".into(),
            status: solution.status,
        });
    }
    let policy = dual.primal_map.policy_from_values(&solution.row_prices)?;
    let degenerate = solution
        .col_status
        .iter()
        .zip(&solution.reduced_costs)
        .any(|(s, r)| *s != VarStatus::Basic && r.abs() <= 1e-9);
    Ok(ShadowPolicy { policy, degenerate })
}

/// Draws `λ, w` uniformly from `[0, scale)` and solves the rows of `dual`
/// for `v, γ` (and the cascade box multipliers), adding a random common
/// offset to each pair. Satisfies the rows of `dual` exactly, whatever they are.
pub fn sample_certificate<R: Rng + ?Sized>(
    dual: &DualLp,
    tree: &ScenarioTree,
    sys: &DamSystem,
    rng: &mut R,
    scale: f64,
) -> DualCertificate {
    let map = &dual.map;
    let mut x = vec![0.0; map.len()];
    for (j, var) in map.vars().iter().enumerate() {
        if matches!(var.family, DualFamily::Lambda | DualFamily::W) {
            x[j] = rng.gen::<f64>() * scale;
        }
    }
    let activity = dual.problem.row_activity(&x);
    let rows = dual.problem.rows();
    // Group rows by the positive-coefficient box column they contain.
    let mut groups: Vec<(usize, Vec<(usize, usize, f64)>)> = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        let mut up = None;
        let mut down = None;
        for &(j, c) in &row.coeffs {
            match map.vars()[j].family {
                DualFamily::V | DualFamily::VTransfer | DualFamily::VSpill => up = Some((j, c)),
                DualFamily::Gamma | DualFamily::GammaTransfer | DualFamily::GammaSpill => down = Some(j),
                _ => {}
            }
        }
        let ((vj, p), gj) = (up.expect("row has a v column"), down.expect("row has a γ column"));
        // Needed: p·(v - γ) = rhs - activity.
        let need = (row.rhs - activity[r]) / p;
        match groups.iter_mut().find(|(col, _)| *col == vj) {
            Some((_, members)) => members.push((gj, r, need)),
            None => groups.push((vj, vec![(gj, r, need)])),
        }
    }
    for (vj, members) in groups {
        let base = members.iter().fold(0.0_f64, |m, &(_, _, need)| m.max(need));
        let offset = rng.gen::<f64>() * scale;
        let v = base + offset;
        x[vj] = v;
        for (gj, _, need) in members {
            x[gj] = v - need;
        }
    }
    DualCertificate::from_columns(tree, sys, map, &x).expect("layout matches")
}
