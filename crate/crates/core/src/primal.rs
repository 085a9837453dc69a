//! The primal LP: the manager's revenue maximization over adapted drains.
//!
//! Columns follow the flat policy layout of [`crate::model`]. Rows are
//! generated per stage and per full-filtration atom (where inflow and
//! price are constant), with the water level eliminated through the
//! telescoped sum:
//!
//! ```text
//! D_i(t) + Σ_{s<t} D_i(s) <= V_i(1) + Σ_{s<t} R_i(s)        (drain within level)
//!        - Σ_{s<t} D_i(s) <= m_i - V_i(1) - Σ_{s<t} R_i(s)  (level within capacity)
//! ```
//!
//! plus one `Σ_i D_i(t) <= C̃` row per manager atom under a total cap.
//! Per stage, all drain-within-level rows come first, then the capacity
//! rows, then the totals. The objective constant
//! `α E[S(T)·(V(1) + Σ_t R(t))]` rides along as the LP's constant term.

use hydro_lp::{LpProblem, LpSolution, RowKind, Sense, Status};
use serde::{Deserialize, Serialize};

use crate::dual::constant_c;
use crate::error::{HydroError, Result};
use crate::model::{DamSystem, DrainPolicy, Variant};
use crate::tree::ScenarioTree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecisionKind {
    Drain,
    Transfer,
    Spill,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Decision {
    pub kind: DecisionKind,
    /// Zero-based stage.
    pub stage: usize,
    /// Manager atom at `stage`.
    pub atom: usize,
    /// Set for drains only.
    pub dam: Option<usize>,
}

/// Bijection between LP columns and labelled decisions.
#[derive(Clone, Debug, PartialEq)]
pub struct VariableMap {
    decisions: Vec<Decision>,
    atoms_per_stage: Vec<usize>,
    n_dams: usize,
    cascade: bool,
}

impl VariableMap {
    pub fn new(tree: &ScenarioTree, sys: &DamSystem) -> Self {
        let cascade = sys.is_cascade();
        let mut decisions = Vec::new();
        let atoms_per_stage: Vec<usize> = (0..tree.stages() - 1).map(|t| tree.manager().num_atoms(t)).collect();
        for (t, &atoms) in atoms_per_stage.iter().enumerate() {
            for a in 0..atoms {
                for i in 0..sys.n_dams {
                    decisions.push(Decision {
                        kind: DecisionKind::Drain,
                        stage: t,
                        atom: a,
                        dam: Some(i),
                    });
                }
                if cascade {
                    for kind in [DecisionKind::Transfer, DecisionKind::Spill] {
                        decisions.push(Decision {
                            kind,
                            stage: t,
                            atom: a,
                            dam: None,
                        });
                    }
                }
            }
        }
        Self {
            decisions,
            atoms_per_stage,
            n_dams: sys.n_dams,
            cascade,
        }
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    pub fn decision(&self, column: usize) -> Decision {
        self.decisions[column]
    }

    /// Column of a decision.
    pub fn column_of(&self, kind: DecisionKind, stage: usize, atom: usize, dam: Option<usize>) -> Option<usize> {
        if stage >= self.atoms_per_stage.len() || atom >= self.atoms_per_stage[stage] {
            return None;
        }
        let per_atom = self.n_dams + if self.cascade { 2 } else { 0 };
        let base: usize = self.atoms_per_stage[..stage].iter().sum::<usize>() * per_atom + atom * per_atom;
        match (kind, dam) {
            (DecisionKind::Drain, Some(i)) if i < self.n_dams => Some(base + i),
            (DecisionKind::Transfer, None) if self.cascade => Some(base + self.n_dams),
            (DecisionKind::Spill, None) if self.cascade => Some(base + self.n_dams + 1),
            _ => None,
        }
    }

    pub fn is_cascade(&self) -> bool {
        self.cascade
    }

    pub fn n_dams(&self) -> usize {
        self.n_dams
    }

    /// Policy whose flat layout is `values`.
    pub fn policy_from_values(&self, values: &[f64]) -> Result<DrainPolicy> {
        if values.len() != self.len() {
            return Err(HydroError::Dimension(format!(
                "{} values for {} decisions",
                values.len(),
                self.len()
            )));
        }
        let mut drain: Vec<Vec<Vec<f64>>> = self
            .atoms_per_stage
            .iter()
            .map(|&a| vec![vec![0.0; self.n_dams]; a])
            .collect();
        let mut transfer: Vec<Vec<f64>> = self.atoms_per_stage.iter().map(|&a| vec![0.0; a]).collect();
        let mut spill = transfer.clone();
        for (d, &v) in self.decisions.iter().zip(values) {
            match d.kind {
                DecisionKind::Drain => drain[d.stage][d.atom][d.dam.expect("drain has a dam")] = v,
                DecisionKind::Transfer => transfer[d.stage][d.atom] = v,
                DecisionKind::Spill => spill[d.stage][d.atom] = v,
            }
        }
        Ok(DrainPolicy {
            drain,
            transfer: self.cascade.then_some(transfer),
            spill: self.cascade.then_some(spill),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowFamily {
    DrainWithinLevel,
    LevelWithinCapacity,
    TotalCapacity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowLabel {
    pub family: RowFamily,
    /// Zero-based stage.
    pub stage: usize,
    /// Full atom for the level rows, manager atom for totals.
    pub atom: usize,
    pub dam: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrimalLp {
    pub problem: LpProblem,
    pub map: VariableMap,
    pub rows: Vec<RowLabel>,
}

/// Objective coefficient of one decision: `∫_A (S_i(t+1) - α S_i(T)) dP` for a
/// drain, `∫_A α (S_2(T) - S_1(T)) dP` for a transfer, `-∫_A α S_2(T) dP` for a spill.
pub fn decision_objective(tree: &ScenarioTree, sys: &DamSystem, d: Decision) -> f64 {
    let last = tree.stages() - 1;
    let atom = &tree.manager().atoms(d.stage)[d.atom];
    let a = sys.alpha;
    atom.iter()
        .map(|&k| {
            let p = tree.probs()[k];
            let integrand = match d.kind {
                DecisionKind::Drain => {
                    let i = d.dam.expect("drain has a dam");
                    tree.price(d.stage + 1, k, i) - a * tree.price(last, k, i)
                }
                DecisionKind::Transfer => a * (tree.price(last, k, 1) - tree.price(last, k, 0)),
                DecisionKind::Spill => -a * tree.price(last, k, 1),
            };
            p * integrand
        })
        .sum()
}

pub fn build_primal(tree: &ScenarioTree, sys: &DamSystem) -> Result<PrimalLp> {
    sys.check_tree(tree)?;
    let map = VariableMap::new(tree, sys);
    let mut lp = LpProblem::new(Sense::Maximize).with_name("primal");
    for (j, d) in map.decisions().iter().enumerate() {
        let (name, upper) = match (d.kind, sys.variant.clone()) {
            (DecisionKind::Drain, _) => {
                let i = d.dam.expect("drain has a dam");
                (format!("D[t{},a{},i{}]", d.stage + 1, d.atom, i + 1), sys.drain_upper(i))
            }
            (DecisionKind::Transfer, Variant::Cascade { m_transfer, .. }) => {
                (format!("Tr[t{},a{}]", d.stage + 1, d.atom), m_transfer)
            }
            (DecisionKind::Spill, Variant::Cascade { n_out, .. }) => (format!("O[t{},a{}]", d.stage + 1, d.atom), n_out),
            _ => unreachable!("transfer and spill only exist in the cascade"),
        };
        let col = lp.add_column(name, decision_objective(tree, sys, *d), 0.0, upper);
        debug_assert_eq!(col, j);
    }

    let cascade = sys.is_cascade();
    let mut rows = Vec::new();
    let col = |kind, s: usize, k: usize, dam| {
        map.column_of(kind, s, tree.manager().atom_of(s, k), dam)
            .expect("decision exists")
    };
    for t in 0..tree.stages() - 1 {
        let full_atoms = tree.full().atoms(t);
        for (b, atom) in full_atoms.iter().enumerate() {
            let k = atom[0];
            for i in 0..sys.n_dams {
                let mut coeffs: Vec<(usize, f64)> = (0..=t)
                    .map(|s| (col(DecisionKind::Drain, s, k, Some(i)), 1.0))
                    .collect();
                if cascade {
                    for s in 0..t {
                        let tr = col(DecisionKind::Transfer, s, k, None);
                        if i == 0 {
                            coeffs.push((tr, 1.0));
                        } else {
                            coeffs.push((tr, -1.0));
                            coeffs.push((col(DecisionKind::Spill, s, k, None), 1.0));
                        }
                    }
                }
                let rhs = sys.v1[i] + tree.cumulative_inflow(t, k, i);
                lp.add_row(format!("DleV[t{},b{},i{}]", t + 1, b, i + 1), coeffs, RowKind::Le, rhs);
                rows.push(RowLabel {
                    family: RowFamily::DrainWithinLevel,
                    stage: t,
                    atom: b,
                    dam: Some(i),
                });
            }
        }
        for (b, atom) in full_atoms.iter().enumerate() {
            let k = atom[0];
            for i in 0..sys.n_dams {
                let mut coeffs: Vec<(usize, f64)> = (0..t)
                    .map(|s| (col(DecisionKind::Drain, s, k, Some(i)), -1.0))
                    .collect();
                if cascade {
                    for s in 0..t {
                        let tr = col(DecisionKind::Transfer, s, k, None);
                        if i == 0 {
                            coeffs.push((tr, -1.0));
                        } else {
                            coeffs.push((tr, 1.0));
                            coeffs.push((col(DecisionKind::Spill, s, k, None), -1.0));
                        }
                    }
                }
                let rhs = sys.m[i] - sys.v1[i] - tree.cumulative_inflow(t, k, i);
                lp.add_row(format!("Vlem[t{},b{},i{}]", t + 1, b, i + 1), coeffs, RowKind::Le, rhs);
                rows.push(RowLabel {
                    family: RowFamily::LevelWithinCapacity,
                    stage: t,
                    atom: b,
                    dam: Some(i),
                });
            }
        }
        if let Variant::TotalCap { c_tilde } = sys.variant {
            for a in 0..tree.manager().num_atoms(t) {
                let coeffs: Vec<(usize, f64)> = (0..sys.n_dams)
                    .map(|i| {
                        (
                            map.column_of(DecisionKind::Drain, t, a, Some(i)).expect("decision exists"),
                            1.0,
                        )
                    })
                    .collect();
                lp.add_row(format!("Total[t{},a{}]", t + 1, a), coeffs, RowKind::Le, c_tilde);
                rows.push(RowLabel {
                    family: RowFamily::TotalCapacity,
                    stage: t,
                    atom: a,
                    dam: None,
                });
            }
        }
    }
    lp.set_objective_constant(constant_c(tree, sys));
    Ok(PrimalLp { problem: lp, map, rows })
}

/// Sizes under the per-scenario accounting (one copy of every decision and
/// constraint per scenario) and under the atom-indexed LP actually built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub per_scenario_variables: usize,
    pub per_scenario_constraints: usize,
    pub per_atom_variables: usize,
    pub per_atom_rows: usize,
}

/// Enumerates the per-scenario constraint set and measures the built LP.
pub fn expand_counts(tree: &ScenarioTree, sys: &DamSystem) -> Result<Counts> {
    let lp = build_primal(tree, sys)?;
    let mut variables = 0;
    let mut constraints = 0;
    for _t in 0..tree.stages() - 1 {
        for _k in 0..tree.num_scenarios() {
            for _i in 0..sys.n_dams {
                variables += 1;
                // D >= 0, D <= V, V <= m
                constraints += 3;
                if !matches!(sys.variant, Variant::TotalCap { .. }) {
                    // D <= b
                    constraints += 1;
                }
            }
            match sys.variant {
                Variant::Individual => {}
                Variant::TotalCap { .. } => constraints += 1,
                Variant::Cascade { .. } => {
                    // transfer and spill, each with two bounds
                    variables += 2;
                    constraints += 4;
                }
            }
        }
    }
    Ok(Counts {
        per_scenario_variables: variables,
        per_scenario_constraints: constraints,
        per_atom_variables: lp.problem.num_columns(),
        per_atom_rows: lp.problem.num_rows(),
    })
}

/// Reads the policy off an optimal primal solution.
pub fn extract_policy(solution: &LpSolution, map: &VariableMap) -> Result<DrainPolicy> {
    if solution.status != Status::Optimal {
        return Err(HydroError::NotOptimal {
            context: "extract_policy".into(),
            status: solution.status,
        });
    }
    map.policy_from_values(&solution.x)
}
