//! Closed-form dual certificates and the duality-gap analyzer.
//!
//! With `α = 1`, nonnegative inflow and no flood risk, the null policy is
//! optimal and the dual optimum is `C = E[S(T)·(V(1) + Σ_t R(t))]`. For
//! martingale prices the zero certificate attains it. For submartingale
//! prices `γ_t = E[S(T) - S(t+1) | G_t]` does. In the cascade with identical
//! prices the spill row is absorbed by `γ_O = E[S_2(T) | G_t]`.

use hydro_lp::{solve, solve_dual_simplex, SolverOptions, Status};
use serde::{Deserialize, Serialize};

use crate::dual::{build_dual, constant_c, dual_feasible, dual_objective, DualCertificate};
use crate::error::{HydroError, Result};
use crate::model::{is_feasible, primal_objective, DamSystem, DrainPolicy, Variant};
use crate::primal::build_primal;
use crate::tree::{PriceRegime, ScenarioTree};

/// Relative gap accepted as "no gap".
pub const GAP_TOL: f64 = 1e-7;
/// Margin kept by the interior policy below its bounds.
pub const INTERIOR_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClosedFormRegime {
    Martingale,
    Submartingale,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub cert: DualCertificate,
    pub value: f64,
    pub regime: ClosedFormRegime,
}

/// Reasons the closed form does not apply; empty when it does.
pub fn closed_form_obstacles(tree: &ScenarioTree, sys: &DamSystem) -> Result<Vec<String>> {
    sys.check_tree(tree)?;
    let mut out = Vec::new();
    if (sys.alpha - 1.0).abs() > 1e-12 {
        out.push(format!("alpha is {}, not 1", sys.alpha));
    }
    if !tree.check_no_flood(sys)?.holds {
        out.push("no-flood condition fails".into());
    }
    if !tree.inflow_nonnegative() {
        out.push("inflow takes negative values".into());
    }
    for (i, r) in tree.classify_price().iter().enumerate() {
        if !matches!(r, PriceRegime::Martingale | PriceRegime::Submartingale) {
            out.push(format!("price of dam {} is {r:?}", i + 1));
        }
    }
    if sys.is_cascade() {
        let same = tree
            .price_table()
            .iter()
            .flatten()
            .all(|s| (s[0] - s[1]).abs() <= 1e-12);
        if !same {
            out.push("cascade dams face different prices".into());
        }
        let last = tree.stages() - 1;
        let s2: Vec<f64> = (0..tree.num_scenarios()).map(|k| tree.price(last, k, 1)).collect();
        for t in 0..last {
            if tree.conditional_expectation(&s2, t)?.iter().any(|&x| x < 0.0) {
                out.push(format!("E[S_2(T) | G_t] is negative at stage {}", t + 1));
                break;
            }
        }
    }
    Ok(out)
}

/// The closed-form dual solution, when its preconditions hold and the
/// resulting certificate passes [`dual_feasible`].
pub fn closed_form_certificate(tree: &ScenarioTree, sys: &DamSystem) -> Result<Option<ClosedForm>> {
    if !closed_form_obstacles(tree, sys)?.is_empty() {
        return Ok(None);
    }
    let regimes = tree.classify_price();
    let regime = if regimes.iter().all(|r| *r == PriceRegime::Martingale) {
        ClosedFormRegime::Martingale
    } else {
        ClosedFormRegime::Submartingale
    };
    let last = tree.stages() - 1;
    let mut cert = DualCertificate::zero(tree, sys);
    for (i, r) in regimes.iter().enumerate() {
        if *r != PriceRegime::Submartingale {
            continue;
        }
        for t in 0..last {
            let diff: Vec<f64> = (0..tree.num_scenarios())
                .map(|k| tree.price(last, k, i) - tree.price(t + 1, k, i))
                .collect();
            for (a, g) in tree.conditional_expectation(&diff, t)?.into_iter().enumerate() {
                cert.gamma[t][a][i] = g.max(0.0);
            }
        }
    }
    if let Some(c) = cert.cascade.as_mut() {
        let s2: Vec<f64> = (0..tree.num_scenarios()).map(|k| tree.price(last, k, 1)).collect();
        for t in 0..last {
            c.gamma_spill[t] = tree.conditional_expectation(&s2, t)?;
        }
    }
    if !dual_feasible(&cert, tree, sys)?.feasible {
        return Ok(None);
    }
    let value = dual_objective(&cert, tree, sys)?;
    Ok(Some(ClosedForm { cert, value, regime }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub primal_opt: f64,
    pub dual_opt: f64,
    pub abs_gap: f64,
    /// `|p - d| / max(1, |p|, |d|)`.
    pub rel_gap: f64,
    pub gap_ok: bool,
    pub primal_status: Status,
    pub dual_status: Status,
    pub primal_iterations: usize,
    pub dual_iterations: usize,
    /// The objective constant carried by both LPs.
    pub constant: f64,
    /// Objective of the interior policy, when it is feasible and inflow is positive.
    pub interior_lower_bound: Option<f64>,
}

/// Solves the primal LP (primal simplex) and the dual LP (dual simplex) and
/// compares their optima.
pub fn duality_gap(tree: &ScenarioTree, sys: &DamSystem, options: &SolverOptions) -> Result<GapReport> {
    let primal = build_primal(tree, sys)?;
    let dual = build_dual(tree, sys)?;
    let ps = solve(&primal.problem, options)?;
    if ps.status != Status::Optimal {
        return Err(HydroError::NotOptimal {
            context: "primal LP".into(),
            status: ps.status,
        });
    }
    let ds = solve_dual_simplex(&dual.problem, options)?;
    if ds.status != Status::Optimal {
        return Err(HydroError::NotOptimal {
            context: "dual LP".into(),
            status: ds.status,
        });
    }
    let (p, d) = (ps.objective, ds.objective);
    let abs_gap = (p - d).abs();
    let rel_gap = abs_gap / 1f64.max(p.abs()).max(d.abs());
    let interior_lower_bound = match interior_policy(tree, sys) {
        Some(policy) => Some(primal_objective(&policy, tree, sys)?),
        None => None,
    };
    Ok(GapReport {
        primal_opt: p,
        dual_opt: d,
        abs_gap,
        rel_gap,
        gap_ok: rel_gap <= GAP_TOL,
        primal_status: ps.status,
        dual_status: ds.status,
        primal_iterations: ps.iterations,
        dual_iterations: ds.iterations,
        constant: constant_c(tree, sys),
        interior_lower_bound,
    })
}

/// `D_i(t) = min{R_i(t) - ε, V_i(1) - ε, b_i - ε}` per atom (with the
/// smallest inflow on the atom and `C̃ / N` in place of `b` under a total
/// cap), clipped at zero. Returned only if inflow is strictly positive and
/// the policy is feasible.
pub fn interior_policy(tree: &ScenarioTree, sys: &DamSystem) -> Option<DrainPolicy> {
    if tree.inflow_table().iter().flatten().flatten().any(|&r| r <= 0.0) {
        return None;
    }
    let mut policy = DrainPolicy::zero(tree, sys);
    let cap = |i: usize| match sys.variant {
        Variant::TotalCap { c_tilde } => c_tilde / sys.n_dams as f64,
        _ => sys.b[i],
    };
    for (t, stage) in policy.drain.iter_mut().enumerate() {
        for (a, dams) in stage.iter_mut().enumerate() {
            let atom = &tree.manager().atoms(t)[a];
            for (i, d) in dams.iter_mut().enumerate() {
                let r = atom
                    .iter()
                    .map(|&k| tree.inflow(t, k, i))
                    .fold(f64::INFINITY, f64::min);
                *d = (r - INTERIOR_EPS)
                    .min(sys.v1[i] - INTERIOR_EPS)
                    .min(cap(i) - INTERIOR_EPS)
                    .max(0.0);
            }
        }
    }
    is_feasible(&policy, tree, sys)
        .ok()
        .filter(|r| r.feasible)
        .map(|_| policy)
}
