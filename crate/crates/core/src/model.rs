//! Dam systems, drain policies and the primal objective.
//!
//! A [`DrainPolicy`] stores one value per (stage, manager atom, dam), so it
//! is adapted to the manager's information by construction. Its flat
//! layout (stage-major, then atom, then dams, then transfer and spill for
//! the cascade) is the column order of the primal LP and the row order of
//! the dual LP.

use serde::{Deserialize, Serialize};

use crate::error::{HydroError, Result};
use crate::tree::ScenarioTree;

/// Feasibility tolerance shared with the LP solver.
pub const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Variant {
    /// Per-dam production capacity `0 <= D_i(t) <= b_i`.
    Individual,
    /// Shared production cap `Σ_i D_i(t) <= c_tilde`.
    TotalCap { c_tilde: f64 },
    /// Two dams in series: transfer from dam 1 to dam 2 and spill from dam 2.
    Cascade { m_transfer: f64, n_out: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DamSystem {
    pub n_dams: usize,
    pub b: Vec<f64>,
    pub m: Vec<f64>,
    pub v1: Vec<f64>,
    pub alpha: f64,
    pub variant: Variant,
}

impl DamSystem {
    pub fn new(b: Vec<f64>, m: Vec<f64>, v1: Vec<f64>, alpha: f64, variant: Variant) -> Result<Self> {
        let sys = Self {
            n_dams: b.len(),
            b,
            m,
            v1,
            alpha,
            variant,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let sys: Self = serde_json::from_str(text)?;
        sys.validate()?;
        Ok(sys)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HydroError::InvalidSystem(msg));
        let n = self.n_dams;
        if n == 0 {
            return bad("at least one dam is required".into());
        }
        if self.b.len() != n || self.m.len() != n || self.v1.len() != n {
            return bad(format!("b, m and v1 must all have length {n}"));
        }
        if !self.alpha.is_finite() {
            return bad("alpha must be finite".into());
        }
        for i in 0..n {
            let (b, m, v) = (self.b[i], self.m[i], self.v1[i]);
            if !(b.is_finite() && m.is_finite() && v.is_finite()) {
                return bad(format!("dam {i} has non-finite data"));
            }
            if b < 0.0 || m < 0.0 {
                return bad(format!("dam {i}: b and m must be nonnegative"));
            }
            if v < 0.0 || v > m {
                return bad(format!("dam {i}: initial level {v} outside [0, {m}]"));
            }
        }
        match self.variant {
            Variant::Individual => {}
            Variant::TotalCap { c_tilde } => {
                if !(c_tilde.is_finite() && c_tilde >= 0.0) {
                    return bad("c_tilde must be finite and nonnegative".into());
                }
            }
            Variant::Cascade { m_transfer, n_out } => {
                if n != 2 {
                    return bad(format!("the cascade variant needs exactly 2 dams, got {n}"));
                }
                if !(m_transfer.is_finite() && m_transfer > 0.0 && n_out.is_finite() && n_out > 0.0) {
                    return bad("m_transfer and n_out must be finite and positive".into());
                }
            }
        }
        Ok(())
    }

    pub fn is_cascade(&self) -> bool {
        matches!(self.variant, Variant::Cascade { .. })
    }

    /// Upper bound of a drain decision of dam `i`; infinite under a total cap.
    pub fn drain_upper(&self, i: usize) -> f64 {
        match self.variant {
            Variant::TotalCap { .. } => f64::INFINITY,
            _ => self.b[i],
        }
    }

    pub fn check_tree(&self, tree: &ScenarioTree) -> Result<()> {
        self.validate()?;
        if tree.dams() != self.n_dams {
            return Err(HydroError::Dimension(format!(
                "system has {} dams, tree has {}",
                self.n_dams,
                tree.dams()
            )));
        }
        Ok(())
    }

    /// Number of decisions per (stage, atom).
    pub fn decisions_per_atom(&self) -> usize {
        self.n_dams + if self.is_cascade() { 2 } else { 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrainPolicy {
    /// `[t][manager atom][dam]` for `t = 1..T-1`.
    pub drain: Vec<Vec<Vec<f64>>>,
    /// Cascade only: `[t][manager atom]`.
    #[serde(default)]
    pub transfer: Option<Vec<Vec<f64>>>,
    /// Cascade only: `[t][manager atom]`.
    #[serde(default)]
    pub spill: Option<Vec<Vec<f64>>>,
}

impl DrainPolicy {
    pub fn zero(tree: &ScenarioTree, sys: &DamSystem) -> Self {
        let flat = vec![0.0; decision_count(tree, sys)];
        Self::from_flat(tree, sys, &flat).expect("length matches")
    }

    /// Rebuilds a policy from its flat layout.
    pub fn from_flat(tree: &ScenarioTree, sys: &DamSystem, values: &[f64]) -> Result<Self> {
        let expected = decision_count(tree, sys);
        if values.len() != expected {
            return Err(HydroError::Dimension(format!(
                "{} values for {expected} decisions",
                values.len()
            )));
        }
        let cascade = sys.is_cascade();
        let mut drain = Vec::new();
        let mut transfer = Vec::new();
        let mut spill = Vec::new();
        let mut it = values.iter().copied();
        for t in 0..tree.stages() - 1 {
            let mut d_t = Vec::new();
            let mut tr_t = Vec::new();
            let mut sp_t = Vec::new();
            for _ in 0..tree.manager().num_atoms(t) {
                d_t.push((0..sys.n_dams).map(|_| it.next().expect("counted")).collect());
                if cascade {
                    tr_t.push(it.next().expect("counted"));
                    sp_t.push(it.next().expect("counted"));
                }
            }
            drain.push(d_t);
            transfer.push(tr_t);
            spill.push(sp_t);
        }
        Ok(Self {
            drain,
            transfer: cascade.then_some(transfer),
            spill: cascade.then_some(spill),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (t, stage) in self.drain.iter().enumerate() {
            for (a, dams) in stage.iter().enumerate() {
                out.extend_from_slice(dams);
                if let (Some(tr), Some(sp)) = (&self.transfer, &self.spill) {
                    out.push(tr[t][a]);
                    out.push(sp[t][a]);
                }
            }
        }
        out
    }

    pub fn check_shape(&self, tree: &ScenarioTree, sys: &DamSystem) -> Result<()> {
        sys.check_tree(tree)?;
        let err = |msg: &str| Err(HydroError::Dimension(format!("policy shape: {msg}")));
        if self.drain.len() != tree.stages() - 1 {
            return err("wrong number of stages");
        }
        for (t, stage) in self.drain.iter().enumerate() {
            if stage.len() != tree.manager().num_atoms(t) {
                return err("wrong number of atoms");
            }
            if stage.iter().any(|d| d.len() != sys.n_dams) {
                return err("wrong number of dams");
            }
        }
        let cascade_shape = |x: &Option<Vec<Vec<f64>>>| match x {
            None => false,
            Some(v) => {
                v.len() == tree.stages() - 1
                    && v.iter().enumerate().all(|(t, s)| s.len() == tree.manager().num_atoms(t))
            }
        };
        if sys.is_cascade() {
            if !cascade_shape(&self.transfer) || !cascade_shape(&self.spill) {
                return err("cascade policies need transfer and spill per stage and atom");
            }
        } else if self.transfer.is_some() || self.spill.is_some() {
            return err("transfer and spill are only meaningful in the cascade variant");
        }
        Ok(())
    }

    /// `D_i(t)` in scenario `k`.
    pub fn drain_at(&self, tree: &ScenarioTree, t: usize, k: usize, i: usize) -> f64 {
        self.drain[t][tree.manager().atom_of(t, k)][i]
    }

    pub fn transfer_at(&self, tree: &ScenarioTree, t: usize, k: usize) -> f64 {
        self.transfer
            .as_ref()
            .map_or(0.0, |v| v[t][tree.manager().atom_of(t, k)])
    }

    pub fn spill_at(&self, tree: &ScenarioTree, t: usize, k: usize) -> f64 {
        self.spill
            .as_ref()
            .map_or(0.0, |v| v[t][tree.manager().atom_of(t, k)])
    }

    /// `w·self + (1 - w)·other`, entry by entry.
    pub fn blend(&self, other: &Self, w: f64) -> Self {
        let a = self.to_flat();
        let b = other.to_flat();
        let mixed: Vec<f64> = a.iter().zip(&b).map(|(x, y)| w * x + (1.0 - w) * y).collect();
        let mut out = self.clone();
        out.overwrite_from_flat(&mixed);
        out
    }

    fn overwrite_from_flat(&mut self, values: &[f64]) {
        let mut it = values.iter().copied();
        for t in 0..self.drain.len() {
            for a in 0..self.drain[t].len() {
                for d in self.drain[t][a].iter_mut() {
                    *d = it.next().expect("length");
                }
                if let (Some(tr), Some(sp)) = (self.transfer.as_mut(), self.spill.as_mut()) {
                    tr[t][a] = it.next().expect("length");
                    sp[t][a] = it.next().expect("length");
                }
            }
        }
    }
}

/// Number of primal decisions: `Σ_t |G_t atoms| · (N, plus 2 in the cascade)`.
pub fn decision_count(tree: &ScenarioTree, sys: &DamSystem) -> usize {
    (0..tree.stages() - 1)
        .map(|t| tree.manager().num_atoms(t) * sys.decisions_per_atom())
        .sum()
}

/// Levels `V[t][scenario][dam]` for `t = 1..=T` by forward recursion.
pub fn water_levels(policy: &DrainPolicy, tree: &ScenarioTree, sys: &DamSystem) -> Result<Vec<Vec<Vec<f64>>>> {
    policy.check_shape(tree, sys)?;
    let k_count = tree.num_scenarios();
    let n = sys.n_dams;
    let mut levels = vec![vec![sys.v1.clone(); k_count]];
    for t in 0..tree.stages() - 1 {
        let mut next = Vec::with_capacity(k_count);
        for k in 0..k_count {
            let cur = &levels[t][k];
            let mut v: Vec<f64> = (0..n)
                .map(|i| cur[i] + tree.inflow(t, k, i) - policy.drain_at(tree, t, k, i))
                .collect();
            if sys.is_cascade() {
                let tr = policy.transfer_at(tree, t, k);
                v[0] -= tr;
                v[1] += tr - policy.spill_at(tree, t, k);
            }
            next.push(v);
        }
        levels.push(next);
    }
    Ok(levels)
}

/// Same levels from the telescoped sums `V(t) = V(1) + Σ_{s<t} ΔV(s)`.
pub fn water_levels_telescoped(
    policy: &DrainPolicy,
    tree: &ScenarioTree,
    sys: &DamSystem,
) -> Result<Vec<Vec<Vec<f64>>>> {
    policy.check_shape(tree, sys)?;
    let n = sys.n_dams;
    let cascade = sys.is_cascade();
    Ok((0..tree.stages())
        .map(|t| {
            (0..tree.num_scenarios())
                .map(|k| {
                    (0..n)
                        .map(|i| {
                            let r: f64 = (0..t).map(|s| tree.inflow(s, k, i)).sum();
                            let d: f64 = (0..t).map(|s| policy.drain_at(tree, s, k, i)).sum();
                            let mut v = sys.v1[i] + r - d;
                            if cascade {
                                let tr: f64 = (0..t).map(|s| policy.transfer_at(tree, s, k)).sum();
                                let sp: f64 = (0..t).map(|s| policy.spill_at(tree, s, k)).sum();
                                if i == 0 {
                                    v -= tr;
                                } else {
                                    v += tr - sp;
                                }
                            }
                            v
                        })
                        .collect()
                })
                .collect()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    DrainNonnegative,
    DrainCapacity,
    TotalCapacity,
    DrainWithinLevel,
    LevelWithinCapacity,
    TransferNonnegative,
    TransferCapacity,
    SpillNonnegative,
    SpillCapacity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintKind,
    /// One-based stage.
    pub stage: usize,
    pub scenario: String,
    pub dam: Option<usize>,
    /// Negative: the amount by which the constraint is violated.
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn has(&self, kind: ConstraintKind) -> bool {
        self.violations.iter().any(|v| v.constraint == kind)
    }
}

/// Checks every primal constraint scenario by scenario at tolerance [`FEAS_TOL`].
pub fn is_feasible(policy: &DrainPolicy, tree: &ScenarioTree, sys: &DamSystem) -> Result<FeasibilityReport> {
    is_feasible_with_tol(policy, tree, sys, FEAS_TOL)
}

pub fn is_feasible_with_tol(
    policy: &DrainPolicy,
    tree: &ScenarioTree,
    sys: &DamSystem,
    tol: f64,
) -> Result<FeasibilityReport> {
    let levels = water_levels(policy, tree, sys)?;
    let mut violations = Vec::new();
    let mut check = |constraint, t: usize, k: usize, dam, slack: f64| {
        if slack < -tol {
            violations.push(Violation {
                constraint,
                stage: t + 1,
                scenario: tree.ids()[k].clone(),
                dam,
                slack,
            });
        }
    };
    for t in 0..tree.stages() - 1 {
        for k in 0..tree.num_scenarios() {
            let mut total = 0.0;
            for i in 0..sys.n_dams {
                let d = policy.drain_at(tree, t, k, i);
                let v = levels[t][k][i];
                total += d;
                check(ConstraintKind::DrainNonnegative, t, k, Some(i), d);
                if !matches!(sys.variant, Variant::TotalCap { .. }) {
                    check(ConstraintKind::DrainCapacity, t, k, Some(i), sys.b[i] - d);
                }
                check(ConstraintKind::DrainWithinLevel, t, k, Some(i), v - d);
                check(ConstraintKind::LevelWithinCapacity, t, k, Some(i), sys.m[i] - v);
            }
            match sys.variant {
                Variant::TotalCap { c_tilde } => check(ConstraintKind::TotalCapacity, t, k, None, c_tilde - total),
                Variant::Cascade { m_transfer, n_out } => {
                    let tr = policy.transfer_at(tree, t, k);
                    let sp = policy.spill_at(tree, t, k);
                    check(ConstraintKind::TransferNonnegative, t, k, None, tr);
                    check(ConstraintKind::TransferCapacity, t, k, None, m_transfer - tr);
                    check(ConstraintKind::SpillNonnegative, t, k, None, sp);
                    check(ConstraintKind::SpillCapacity, t, k, None, n_out - sp);
                }
                Variant::Individual => {}
            }
        }
    }
    Ok(FeasibilityReport {
        feasible: violations.is_empty(),
        violations,
    })
}

/// `E[Σ_t D(t)·S(t+1) + α V(T)·S(T)]`, defined for any policy of the right shape.
pub fn primal_objective(policy: &DrainPolicy, tree: &ScenarioTree, sys: &DamSystem) -> Result<f64> {
    let levels = water_levels(policy, tree, sys)?;
    let last = tree.stages() - 1;
    let mut total = 0.0;
    for k in 0..tree.num_scenarios() {
        let mut value = 0.0;
        for t in 0..last {
            for i in 0..sys.n_dams {
                value += policy.drain_at(tree, t, k, i) * tree.price(t + 1, k, i);
            }
        }
        for i in 0..sys.n_dams {
            value += sys.alpha * levels[last][k][i] * tree.price(last, k, i);
        }
        total += tree.probs()[k] * value;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Filtration;

    fn chain(v1: f64, inflow: &[f64]) -> (ScenarioTree, DamSystem) {
        let t = inflow.len() + 1;
        let tree = ScenarioTree::new(
            vec!["w".into()],
            vec![1.0],
            Filtration::trivial(t, 1),
            Filtration::trivial(t, 1),
            vec![vec![vec![1.0]]; t],
            inflow.iter().map(|&r| vec![vec![r]]).collect(),
        )
        .unwrap();
        let sys = DamSystem::new(vec![10.0], vec![100.0], vec![v1], 1.0, Variant::Individual).unwrap();
        (tree, sys)
    }

    #[test]
    fn hand_telescoped_levels() {
        let (tree, sys) = chain(5.0, &[2.0, 1.0]);
        let p = DrainPolicy::from_flat(&tree, &sys, &[3.0, 0.0]).unwrap();
        let v = water_levels(&p, &tree, &sys).unwrap();
        let got: Vec<f64> = v.iter().map(|s| s[0][0]).collect();
        assert_eq!(got, vec![5.0, 4.0, 5.0]);
    }

    #[test]
    fn double_violation() {
        let (tree, mut sys) = chain(1.0, &[0.0]);
        sys.b = vec![1.0];
        let p = DrainPolicy::from_flat(&tree, &sys, &[2.0]).unwrap();
        let rep = is_feasible(&p, &tree, &sys).unwrap();
        assert!(!rep.feasible);
        assert!(rep.has(ConstraintKind::DrainCapacity));
        assert!(rep.has(ConstraintKind::DrainWithinLevel));
        assert_eq!(rep.violations.len(), 2);
    }

    #[test]
    fn system_validation() {
        assert!(DamSystem::new(vec![1.0], vec![1.0], vec![2.0], 1.0, Variant::Individual).is_err());
        assert!(DamSystem::new(
            vec![1.0],
            vec![1.0],
            vec![0.5],
            1.0,
            Variant::Cascade {
                m_transfer: 1.0,
                n_out: 1.0
            }
        )
        .is_err());
        let json = r#"{"n_dams":1,"b":[1],"m":[2],"v1":[1],"alpha":1,"variant":{"kind":"TotalCap","c_tilde":3}}"#;
        let sys = DamSystem::from_json(json).unwrap();
        assert_eq!(sys.variant, Variant::TotalCap { c_tilde: 3.0 });
    }
}
