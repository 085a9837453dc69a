//! Direct evaluation of the Lagrange function `K(D, y)` and of the dual
//! function `g(y) = sup_D K(D, y)`, independent of the LP builders.
//!
//! `K` is affine in every decision coordinate. Its slope in a coordinate is
//! given analytically by [`coefficient_expressions`] and numerically by
//! [`finite_difference_coefficients`]; the two must match.

use serde::{Deserialize, Serialize};

use crate::dual::{dual_feasible, DualCertificate, DUAL_FEAS_TOL};
use crate::error::{HydroError, Result};
use crate::model::{is_feasible, primal_objective, water_levels, DamSystem, DrainPolicy, Variant};
use crate::primal::{DecisionKind, VariableMap};
use crate::tree::ScenarioTree;

/// Slack allowed in each link of the weak-duality chain.
pub const CHAIN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum SupValue {
    Finite(f64),
    PlusInfinity,
}

impl SupValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            SupValue::Finite(x) => Some(x),
            SupValue::PlusInfinity => None,
        }
    }

    /// `x <= self + tol`.
    pub fn bounds(self, x: f64, tol: f64) -> bool {
        match self {
            SupValue::Finite(g) => x <= g + tol,
            SupValue::PlusInfinity => true,
        }
    }
}

/// `K(D, y)`, summed scenario by scenario with water levels from the recursion.
pub fn lagrange_value(policy: &DrainPolicy, cert: &DualCertificate, tree: &ScenarioTree, sys: &DamSystem) -> Result<f64> {
    cert.check_shape(tree, sys)?;
    let levels = water_levels(policy, tree, sys)?;
    let last = tree.stages() - 1;
    let n = sys.n_dams;
    let mut total = 0.0;
    for k in 0..tree.num_scenarios() {
        let mut acc = 0.0;
        for t in 0..last {
            let a = tree.manager().atom_of(t, k);
            let b = tree.full().atom_of(t, k);
            let d: Vec<f64> = (0..n).map(|i| policy.drain_at(tree, t, k, i)).collect();
            for i in 0..n {
                acc += d[i] * tree.price(t + 1, k, i);
                acc += cert.gamma[t][a][i] * d[i];
                acc += cert.lambda[t][b][i] * (levels[t][k][i] - d[i]);
                acc += cert.w[t][b][i] * (sys.m[i] - levels[t][k][i]);
            }
            match sys.variant {
                Variant::TotalCap { c_tilde } => acc += cert.v[t][a][0] * (c_tilde - d.iter().sum::<f64>()),
                _ => {
                    for i in 0..n {
                        acc += cert.v[t][a][i] * (sys.b[i] - d[i]);
                    }
                }
            }
            if let (Variant::Cascade { m_transfer, n_out }, Some(c)) = (&sys.variant, &cert.cascade) {
                let tr = policy.transfer_at(tree, t, k);
                let sp = policy.spill_at(tree, t, k);
                acc += c.gamma_transfer[t][a] * tr + c.v_transfer[t][a] * (m_transfer - tr);
                acc += c.gamma_spill[t][a] * sp + c.v_spill[t][a] * (n_out - sp);
            }
        }
        for i in 0..n {
            acc += sys.alpha * levels[last][k][i] * tree.price(last, k, i);
        }
        total += tree.probs()[k] * acc;
    }
    Ok(total)
}

/// Slope of `K` in every decision coordinate (flat policy order), from the
/// closed-form expressions
///
/// ```text
/// F̃:  ∫_A {S_i(t+1) - α S_i(T) + γ_i - v_i - λ_{i,t} + Σ_{s>t} (w_{i,s} - λ_{i,s})}
/// K̄:  ∫_A {α(S_2(T) - S_1(T)) + γ_T̄ - v_T̄ + Σ_{s>t} [λ²_s - λ¹_s + w¹_s - w²_s]}
/// G:  ∫_A {-α S_2(T) + γ_O - v_O + Σ_{s>t} (w²_s - λ²_s)}
/// ```
pub fn coefficient_expressions(cert: &DualCertificate, tree: &ScenarioTree, sys: &DamSystem) -> Result<Vec<f64>> {
    coefficients(cert, tree, sys, CascadeForm::Derived)
}

/// As [`coefficient_expressions`], but with alternate transfer and spill
/// slopes: sums over `s < t`, `+ (w² - w¹)` and `+ v_T̄` in the transfer
/// slope. Serves as a negative control, since it disagrees with `K`.
pub fn alternate_cascade_coefficients(cert: &DualCertificate, tree: &ScenarioTree, sys: &DamSystem) -> Result<Vec<f64>> {
    coefficients(cert, tree, sys, CascadeForm::Alternate)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CascadeForm {
    Derived,
    Alternate,
}

fn coefficients(cert: &DualCertificate, tree: &ScenarioTree, sys: &DamSystem, form: CascadeForm) -> Result<Vec<f64>> {
    cert.check_shape(tree, sys)?;
    let map = VariableMap::new(tree, sys);
    let last = tree.stages() - 1;
    let a = sys.alpha;
    let lam = |s: usize, k: usize, i: usize| cert.lambda[s][tree.full().atom_of(s, k)][i];
    let w = |s: usize, k: usize, i: usize| cert.w[s][tree.full().atom_of(s, k)][i];
    let out = map
        .decisions()
        .iter()
        .map(|d| {
            let t = d.stage;
            let atom = &tree.manager().atoms(t)[d.atom];
            atom.iter()
                .map(|&k| {
                    let later = t + 1..last;
                    let earlier = 0..t;
                    let integrand = match d.kind {
                        DecisionKind::Drain => {
                            let i = d.dam.expect("drain has a dam");
                            let v = match sys.variant {
                                Variant::TotalCap { .. } => cert.v[t][d.atom][0],
                                _ => cert.v[t][d.atom][i],
                            };
                            let tail: f64 = later.map(|s| w(s, k, i) - lam(s, k, i)).sum();
                            tree.price(t + 1, k, i) - a * tree.price(last, k, i) + cert.gamma[t][d.atom][i]
                                - v
                                - lam(t, k, i)
                                + tail
                        }
                        DecisionKind::Transfer => {
                            let c = cert.cascade.as_ref().expect("cascade multipliers present");
                            let base = a * (tree.price(last, k, 1) - tree.price(last, k, 0)) + c.gamma_transfer[t][d.atom];
                            match form {
                                CascadeForm::Derived => {
                                    let tail: f64 = later
                                        .map(|s| lam(s, k, 1) - lam(s, k, 0) + w(s, k, 0) - w(s, k, 1))
                                        .sum();
                                    base - c.v_transfer[t][d.atom] + tail
                                }
                                CascadeForm::Alternate => {
                                    let head: f64 = earlier
                                        .map(|s| lam(s, k, 1) - lam(s, k, 0) + w(s, k, 1) - w(s, k, 0))
                                        .sum();
                                    base + c.v_transfer[t][d.atom] + head
                                }
                            }
                        }
                        DecisionKind::Spill => {
                            let c = cert.cascade.as_ref().expect("cascade multipliers present");
                            let range = match form {
                                CascadeForm::Derived => later,
                                CascadeForm::Alternate => earlier,
                            };
                            let tail: f64 = range.map(|s| w(s, k, 1) - lam(s, k, 1)).sum();
                            -a * tree.price(last, k, 1) + c.gamma_spill[t][d.atom] - c.v_spill[t][d.atom] + tail
                        }
                    };
                    tree.probs()[k] * integrand
                })
                .sum()
        })
        .collect();
    Ok(out)
}

/// `K(e_j, y) - K(0, y)` for every decision coordinate `j`. Step 1 is exact
/// because `K` is affine in each coordinate.
pub fn finite_difference_coefficients(cert: &DualCertificate, tree: &ScenarioTree, sys: &DamSystem) -> Result<Vec<f64>> {
    let zero = DrainPolicy::zero(tree, sys);
    let base = lagrange_value(&zero, cert, tree, sys)?;
    let n = zero.to_flat().len();
    let mut flat = vec![0.0; n];
    (0..n)
        .map(|j| {
            flat[j] = 1.0;
            let p = DrainPolicy::from_flat(tree, sys, &flat)?;
            flat[j] = 0.0;
            Ok(lagrange_value(&p, cert, tree, sys)? - base)
        })
        .collect()
}

/// `g(y) = K(0, y) + Σ_j max(0, slope_j) · upper_j`. An unbounded
/// coordinate with positive slope gives [`SupValue::PlusInfinity`].
pub fn sup_over_policy(cert: &DualCertificate, tree: &ScenarioTree, sys: &DamSystem) -> Result<SupValue> {
    let zero = DrainPolicy::zero(tree, sys);
    let base = lagrange_value(&zero, cert, tree, sys)?;
    let slopes = coefficient_expressions(cert, tree, sys)?;
    let map = VariableMap::new(tree, sys);
    let mut total = base;
    for (d, &c) in map.decisions().iter().zip(&slopes) {
        let upper = match (d.kind, &sys.variant) {
            (DecisionKind::Drain, _) => sys.drain_upper(d.dam.expect("drain has a dam")),
            (DecisionKind::Transfer, Variant::Cascade { m_transfer, .. }) => *m_transfer,
            (DecisionKind::Spill, Variant::Cascade { n_out, .. }) => *n_out,
            _ => unreachable!("transfer and spill only exist in the cascade"),
        };
        if upper.is_infinite() {
            if c > DUAL_FEAS_TOL {
                return Ok(SupValue::PlusInfinity);
            }
        } else if c > 0.0 {
            total += c * upper;
        }
    }
    Ok(SupValue::Finite(total))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakDualityReport {
    pub primal: f64,
    pub lagrange: f64,
    pub sup: SupValue,
    pub holds: bool,
}

/// Checks `primal_objective(D) <= K(D, y) <= g(y)` for a feasible policy and
/// a dual-feasible certificate.
pub fn weak_duality_check(
    policy: &DrainPolicy,
    cert: &DualCertificate,
    tree: &ScenarioTree,
    sys: &DamSystem,
) -> Result<WeakDualityReport> {
    let feas = is_feasible(policy, tree, sys)?;
    if !feas.feasible {
        return Err(HydroError::Precondition(format!(
            "policy is infeasible ({} violations)",
            feas.violations.len()
        )));
    }
    let dual = dual_feasible(cert, tree, sys)?;
    if !dual.feasible {
        return Err(HydroError::Precondition(format!(
            "certificate is not dual-feasible (max residual {:.3e}, min entry {:.3e})",
            dual.max_residual,
            cert.min_entry()
        )));
    }
    let primal = primal_objective(policy, tree, sys)?;
    let lagrange = lagrange_value(policy, cert, tree, sys)?;
    let sup = sup_over_policy(cert, tree, sys)?;
    Ok(WeakDualityReport {
        primal,
        lagrange,
        sup,
        holds: primal <= lagrange + CHAIN_TOL && sup.bounds(lagrange, CHAIN_TOL),
    })
}
