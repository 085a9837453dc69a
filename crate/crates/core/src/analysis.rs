//! Verification harness: count formulas, random feasible samplers and a
//! seeded property campaign whose failures can be replayed exactly.

use hydro_lp::{solve, SolverOptions, Status};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certificates::{closed_form_certificate, duality_gap, GAP_TOL};
use crate::dual::{build_dual_with, dual_objective, sample_certificate, DualMutation};
use crate::error::{HydroError, Result};
use crate::generate::{generate_tree, GeneratorSpec, InflowModel, PriceModel};
use crate::lagrange::{sup_over_policy, weak_duality_check, CHAIN_TOL};
use crate::model::{
    is_feasible, primal_objective, water_levels, water_levels_telescoped, DamSystem, DrainPolicy, Variant,
};
use crate::primal::{build_primal, expand_counts};
use crate::tree::ScenarioTree;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub variant: String,
    pub n_dams: usize,
    pub stages: usize,
    pub scenarios: usize,
    pub variables: usize,
    pub constraints: usize,
    pub expected_variables: usize,
    pub expected_constraints: usize,
    /// `constraints - variables`.
    pub surplus: i64,
    pub expected_surplus: i64,
    pub per_atom_variables: usize,
    pub per_atom_rows: usize,
    /// TotalCap constraints minus Individual constraints on the same tree.
    pub total_cap_minus_individual: Option<i64>,
    /// The prose claim that a total cap adds `(N-1)(T-1)|Ω|` constraints.
    pub prose_claim_holds: Option<bool>,
    pub matches: bool,
}

/// Compares the enumerated per-scenario counts with the closed formulas.
pub fn verify_counts(tree: &ScenarioTree, sys: &DamSystem) -> Result<CountReport> {
    let counts = expand_counts(tree, sys)?;
    let (n, t, k) = (sys.n_dams, tree.stages(), tree.num_scenarios());
    let cells = (t - 1) * k;
    let (name, vars, cons) = match sys.variant {
        Variant::Individual => ("Individual", n * cells, 4 * n * cells),
        Variant::TotalCap { .. } => ("TotalCap", n * cells, (3 * n + 1) * cells),
        Variant::Cascade { .. } => ("Cascade", (n + 2) * cells, (4 * n + 4) * cells),
    };
    let (delta, claim) = match sys.variant {
        Variant::TotalCap { .. } => {
            let delta = ((3 * n + 1) * cells) as i64 - (4 * n * cells) as i64;
            (Some(delta), Some(delta == ((n - 1) * cells) as i64))
        }
        _ => (None, None),
    };
    let surplus = counts.per_scenario_constraints as i64 - counts.per_scenario_variables as i64;
    let expected_surplus = cons as i64 - vars as i64;
    Ok(CountReport {
        variant: name.into(),
        n_dams: n,
        stages: t,
        scenarios: k,
        variables: counts.per_scenario_variables,
        constraints: counts.per_scenario_constraints,
        expected_variables: vars,
        expected_constraints: cons,
        surplus,
        expected_surplus,
        per_atom_variables: counts.per_atom_variables,
        per_atom_rows: counts.per_atom_rows,
        total_cap_minus_individual: delta,
        prose_claim_holds: claim,
        matches: counts.per_scenario_variables == vars
            && counts.per_scenario_constraints == cons
            && surplus == expected_surplus,
    })
}

/// Optimal values of one reservoir set under individual caps `b_i` and
/// under a single total cap `C̃ = Σ b_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub individual: f64,
    pub total_cap: f64,
    /// `total_cap <= individual` within the tolerance.
    pub total_below_individual: bool,
    /// `individual <= total_cap` within the tolerance. The total cap only
    /// removes constraints, so this always holds.
    pub individual_below_total: bool,
}

/// Solves `sys` (its cap variant is replaced) with individual caps and with
/// the total cap `Σ b_i`. The tolerance is `tol · max(1, |individual|)`.
pub fn cap_ordering(tree: &ScenarioTree, sys: &DamSystem, options: &SolverOptions, tol: f64) -> Result<OrderingReport> {
    let optimum = |variant: Variant| -> Result<f64> {
        let mut s = sys.clone();
        s.variant = variant;
        let sol = solve(&build_primal(tree, &s)?.problem, options)?;
        if sol.status != Status::Optimal {
            return Err(HydroError::NotOptimal {
                context: "primal LP".into(),
                status: sol.status,
            });
        }
        Ok(sol.objective)
    };
    let individual = optimum(Variant::Individual)?;
    let total_cap = optimum(Variant::TotalCap {
        c_tilde: sys.b.iter().sum(),
    })?;
    let slack = tol * individual.abs().max(1.0);
    Ok(OrderingReport {
        individual,
        total_cap,
        total_below_individual: total_cap <= individual + slack,
        individual_below_total: individual <= total_cap + slack,
    })
}

/// A random policy that respects every primal constraint whenever the
/// sequential bounds allow it; falls back to the null policy otherwise.
pub fn sample_feasible_policy<R: Rng + ?Sized>(tree: &ScenarioTree, sys: &DamSystem, rng: &mut R) -> DrainPolicy {
    let mut policy = DrainPolicy::zero(tree, sys);
    let n = sys.n_dams;
    let last = tree.stages() - 1;
    let mut level: Vec<Vec<f64>> = vec![sys.v1.clone(); tree.num_scenarios()];
    let pick = |lo: f64, hi: f64, rng: &mut R| {
        let lo = lo.max(0.0);
        if hi <= lo {
            lo
        } else {
            lo + rng.gen::<f64>() * (hi - lo)
        }
    };
    for t in 0..last {
        // The level constraint binds at t + 1 only while t + 1 is a decision stage.
        let look = t + 1 < last;
        for (a, atom) in tree.manager().atoms(t).iter().enumerate() {
            let max_over = |f: &dyn Fn(usize) -> f64| atom.iter().map(|&k| f(k)).fold(f64::NEG_INFINITY, f64::max);
            let min_over = |f: &dyn Fn(usize) -> f64| atom.iter().map(|&k| f(k)).fold(f64::INFINITY, f64::min);
            let mut d = vec![0.0; n];
            let mut tr = 0.0;
            let mut sp = 0.0;
            match sys.variant {
                Variant::Cascade { m_transfer, n_out } => {
                    let lo1 = if look {
                        max_over(&|k| level[k][0] + tree.inflow(t, k, 0) - sys.m[0])
                    } else {
                        0.0
                    };
                    d[0] = pick(lo1, sys.b[0].min(min_over(&|k| level[k][0])), rng);
                    let room1 = min_over(&|k| level[k][0] + tree.inflow(t, k, 0) - d[0]);
                    tr = pick(0.0, m_transfer.min(room1), rng);
                    let lo2 = if look {
                        max_over(&|k| level[k][1] + tree.inflow(t, k, 1) + tr - sys.m[1] - n_out)
                    } else {
                        0.0
                    };
                    d[1] = pick(lo2, sys.b[1].min(min_over(&|k| level[k][1])), rng);
                    let lo_o = if look {
                        max_over(&|k| level[k][1] + tree.inflow(t, k, 1) + tr - d[1] - sys.m[1])
                    } else {
                        0.0
                    };
                    let hi_o = n_out.min(min_over(&|k| level[k][1] + tree.inflow(t, k, 1) + tr - d[1]));
                    sp = pick(lo_o, hi_o, rng);
                }
                _ => {
                    let mut budget = match sys.variant {
                        Variant::TotalCap { c_tilde } => c_tilde,
                        _ => f64::INFINITY,
                    };
                    let mut order: Vec<usize> = (0..n).collect();
                    order.shuffle(rng);
                    for i in order {
                        let lo = if look {
                            max_over(&|k| level[k][i] + tree.inflow(t, k, i) - sys.m[i])
                        } else {
                            0.0
                        };
                        let hi = sys.drain_upper(i).min(budget).min(min_over(&|k| level[k][i]));
                        d[i] = pick(lo, hi, rng);
                        budget -= d[i];
                    }
                }
            }
            for &k in atom {
                for i in 0..n {
                    level[k][i] += tree.inflow(t, k, i) - d[i];
                }
                if sys.is_cascade() {
                    level[k][0] -= tr;
                    level[k][1] += tr - sp;
                }
            }
            policy.drain[t][a] = d;
            if let (Some(trs), Some(sps)) = (policy.transfer.as_mut(), policy.spill.as_mut()) {
                trs[t][a] = tr;
                sps[t][a] = sp;
            }
        }
    }
    match is_feasible(&policy, tree, sys) {
        Ok(r) if r.feasible => policy,
        _ => DrainPolicy::zero(tree, sys),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CheckKind {
    WaterBalance,
    Adaptedness,
    WeakDuality,
    DualFunction,
    LpGap,
    ClosedForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: CheckKind,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignOptions {
    pub cases: usize,
    /// Random (policy, certificate) pairs per case.
    pub pairs_per_case: usize,
    pub mutation: DualMutation,
    /// Skip the LP solves (gap and closed-form checks).
    pub skip_lp: bool,
}

impl CampaignOptions {
    pub fn new(cases: usize) -> Self {
        Self {
            cases,
            pairs_per_case: 5,
            mutation: DualMutation::None,
            skip_lp: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub seed: u64,
    pub case_index: usize,
    pub check: CheckKind,
    pub detail: String,
    pub mutation: DualMutation,
    /// Serialized tree of the case.
    pub tree: String,
    pub system: DamSystem,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_index: usize,
    pub checks: Vec<CheckResult>,
}

impl CaseResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub seed: u64,
    pub cases: usize,
    pub checks_run: usize,
    pub checks_passed: usize,
    pub pairs_checked: usize,
    pub passed: bool,
    pub failures: Vec<Failure>,
}

fn case_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// The random tree and system of case `index` under `seed`.
pub fn campaign_case(seed: u64, index: usize) -> Result<(ScenarioTree, DamSystem)> {
    let mut rng = case_rng(seed, index);
    let variant_pick = rng.gen_range(0..3);
    let n = if variant_pick == 2 { 2 } else { rng.gen_range(1..=3) };
    let stages = rng.gen_range(2..=4);
    let mut branching = Vec::new();
    let mut k = 1;
    for _ in 0..stages - 1 {
        let b = rng.gen_range(1..=3).min(32 / k).max(1);
        k *= b;
        branching.push(b);
    }
    let price_model = *[
        PriceModel::MartingaleBinomial,
        PriceModel::SubmartingaleDrift,
        PriceModel::SupermartingaleDrift,
        PriceModel::IidLognormalDiscretized,
    ]
    .choose(&mut rng)
    .expect("nonempty");
    let inflow_model = if rng.gen_bool(0.5) {
        InflowModel::NonnegativeIid
    } else {
        InflowModel::Seasonal
    };
    let coarsen: Vec<usize> = (2..stages).filter(|_| rng.gen_bool(0.4)).collect();
    let spec = GeneratorSpec::new(stages, n, branching, price_model, inflow_model).with_coarsening(coarsen);
    let tree = generate_tree(&spec, rng.gen())?;
    let variant = match variant_pick {
        0 => Variant::Individual,
        1 => Variant::TotalCap { c_tilde: 0.0 },
        _ => Variant::Cascade {
            m_transfer: rng.gen_range(1.0..5.0),
            n_out: rng.gen_range(1.0..5.0),
        },
    };
    let alpha = if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.5..1.0) };
    let sys = if rng.gen_bool(0.5) {
        no_flood_system(&tree, n, alpha, variant, &mut rng)
    } else {
        flood_prone_system(&tree, n, alpha, variant, &mut rng)
    };
    Ok((tree, sys))
}

/// Reservoirs large enough that the null policy never floods.
pub fn no_flood_system<R: Rng + ?Sized>(
    tree: &ScenarioTree,
    n: usize,
    alpha: f64,
    variant: Variant,
    rng: &mut R,
) -> DamSystem {
    let last = tree.stages() - 1;
    let v1: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..10.0)).collect();
    let m: Vec<f64> = (0..n)
        .map(|i| {
            let worst = (0..tree.num_scenarios())
                .flat_map(|k| (0..last).map(move |t| (t, k)))
                .map(|(t, k)| tree.cumulative_inflow(t, k, i))
                .fold(0.0, f64::max);
            v1[i] + worst + rng.gen_range(0.0..5.0)
        })
        .collect();
    let b: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..8.0)).collect();
    finish_system(b, m, v1, alpha, variant)
}

/// Tight reservoirs (`m` at least `1.2 max R`) with `b = m`, so draining
/// the whole level always keeps the system feasible.
pub fn flood_prone_system<R: Rng + ?Sized>(
    tree: &ScenarioTree,
    n: usize,
    alpha: f64,
    variant: Variant,
    rng: &mut R,
) -> DamSystem {
    let m: Vec<f64> = (0..n)
        .map(|i| {
            let max_r = tree
                .inflow_table()
                .iter()
                .flatten()
                .map(|r| r[i])
                .fold(0.0, f64::max);
            (1.2 * max_r).max(1.0) * rng.gen_range(1.0..1.5)
        })
        .collect();
    let v1: Vec<f64> = m.iter().map(|x| x * rng.gen_range(0.2..1.0)).collect();
    let mut sys = finish_system(m.clone(), m, v1, alpha, variant);
    // Coarse information or a shared cap can leave no feasible policy.
    for _ in 0..40 {
        let feasible = build_primal(tree, &sys)
            .ok()
            .and_then(|lp| solve(&lp.problem, &SolverOptions::default()).ok())
            .is_some_and(|s| s.status != Status::Infeasible);
        if feasible {
            break;
        }
        let m: Vec<f64> = sys.m.iter().map(|x| x * 1.25).collect();
        sys = finish_system(m.clone(), m, sys.v1.clone(), alpha, sys.variant.clone());
    }
    sys
}

fn finish_system(b: Vec<f64>, m: Vec<f64>, v1: Vec<f64>, alpha: f64, variant: Variant) -> DamSystem {
    let variant = match variant {
        Variant::TotalCap { .. } => Variant::TotalCap {
            c_tilde: b.iter().sum::<f64>() * 0.75,
        },
        other => other,
    };
    DamSystem::new(b, m, v1, alpha, variant).expect("generated system is valid")
}

/// Runs every check of one case.
pub fn run_case(seed: u64, index: usize, options: &CampaignOptions) -> Result<CaseResult> {
    let (tree, sys) = campaign_case(seed, index)?;
    let mut rng = case_rng(seed ^ 0x5eed, index);
    let mut checks = Vec::new();
    let dual = build_dual_with(&tree, &sys, options.mutation)?;
    let lp = if options.skip_lp {
        None
    } else {
        Some(duality_gap(&tree, &sys, &SolverOptions::default()))
    };

    let mut balance = (true, String::new());
    let mut adapted = (true, String::new());
    let mut chain = (true, String::new());
    let mut dual_fn = (true, String::new());
    for pair in 0..options.pairs_per_case {
        let policy = sample_feasible_policy(&tree, &sys, &mut rng);
        let cert = sample_certificate(&dual, &tree, &sys, &mut rng, 2.0);

        let rec = water_levels(&policy, &tree, &sys)?;
        let tel = water_levels_telescoped(&policy, &tree, &sys)?;
        let worst = rec
            .iter()
            .flatten()
            .flatten()
            .zip(tel.iter().flatten().flatten())
            .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
            .fold(0.0, f64::max);
        if worst > 1e-12 && balance.0 {
            balance = (false, format!("pair {pair}: recursion and telescoped levels differ by {worst:e}"));
        }

        for t in 0..tree.stages() - 1 {
            for atom in tree.manager().atoms(t) {
                for i in 0..sys.n_dams {
                    let first = policy.drain_at(&tree, t, atom[0], i);
                    if atom.iter().any(|&k| policy.drain_at(&tree, t, k, i) != first) && adapted.0 {
                        adapted = (false, format!("pair {pair}: drain not constant on a stage-{} atom", t + 1));
                    }
                }
            }
        }

        let p = primal_objective(&policy, &tree, &sys)?;
        let g = sup_over_policy(&cert, &tree, &sys)?;
        let d = dual_objective(&cert, &tree, &sys)?;
        let lp_bound = match &lp {
            Some(Ok(r)) => r.primal_opt,
            _ => p,
        };
        let verdict = match weak_duality_check(&policy, &cert, &tree, &sys) {
            Err(HydroError::Precondition(msg)) => Err(msg),
            Err(e) => return Err(e),
            Ok(r) if !r.holds => Err(format!("primal {}, K {}, g {:?}", r.primal, r.lagrange, r.sup)),
            Ok(_) if p > d + CHAIN_TOL || lp_bound > d + CHAIN_TOL * d.abs().max(1.0) => Err(format!(
                "dual objective {d} below primal value {p} or LP optimum {lp_bound}"
            )),
            Ok(_) => Ok(()),
        };
        if let (Err(msg), true) = (verdict, chain.0) {
            chain = (false, format!("pair {pair}: {msg}"));
        }
        let g_ok = g.finite().is_some_and(|g| (g - d).abs() <= CHAIN_TOL * d.abs().max(1.0));
        if !g_ok && dual_fn.0 {
            dual_fn = (false, format!("pair {pair}: g(y) = {g:?} but dual objective is {d}"));
        }
    }
    for (check, (passed, detail)) in [
        (CheckKind::WaterBalance, balance),
        (CheckKind::Adaptedness, adapted),
        (CheckKind::WeakDuality, chain),
        (CheckKind::DualFunction, dual_fn),
    ] {
        checks.push(CheckResult { check, passed, detail });
    }

    if let Some(lp) = lp {
        match lp {
            Ok(r) => {
                checks.push(CheckResult {
                    check: CheckKind::LpGap,
                    passed: r.gap_ok,
                    detail: format!("primal {} dual {} rel gap {:e}", r.primal_opt, r.dual_opt, r.rel_gap),
                });
                if let Some(cf) = closed_form_certificate(&tree, &sys)? {
                    let rel = (cf.value - r.primal_opt).abs() / cf.value.abs().max(1.0);
                    checks.push(CheckResult {
                        check: CheckKind::ClosedForm,
                        passed: rel <= GAP_TOL,
                        detail: format!("{:?} closed form {} vs LP {}", cf.regime, cf.value, r.primal_opt),
                    });
                }
            }
            Err(e) => checks.push(CheckResult {
                check: CheckKind::LpGap,
                passed: false,
                detail: e.to_string(),
            }),
        }
    }
    Ok(CaseResult {
        case_index: index,
        checks,
    })
}

pub fn property_campaign(seed: u64, n_cases: usize) -> CampaignReport {
    property_campaign_with(seed, &CampaignOptions::new(n_cases))
}

pub fn property_campaign_with(seed: u64, options: &CampaignOptions) -> CampaignReport {
    let mut report = CampaignReport {
        seed,
        cases: options.cases,
        checks_run: 0,
        checks_passed: 0,
        pairs_checked: 0,
        passed: true,
        failures: Vec::new(),
    };
    for index in 0..options.cases {
        let dump = |check, detail: String| -> Failure {
            let (tree, system) = campaign_case(seed, index).expect("case regenerates");
            Failure {
                seed,
                case_index: index,
                check,
                detail,
                mutation: options.mutation,
                tree: tree.to_json(),
                system,
            }
        };
        match run_case(seed, index, options) {
            Ok(case) => {
                report.pairs_checked += options.pairs_per_case;
                for c in case.checks {
                    report.checks_run += 1;
                    if c.passed {
                        report.checks_passed += 1;
                    } else {
                        report.failures.push(dump(c.check, c.detail));
                    }
                }
            }
            Err(e) => {
                report.checks_run += 1;
                report.failures.push(dump(CheckKind::LpGap, e.to_string()));
            }
        }
    }
    report.passed = report.failures.is_empty();
    report
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub seed: u64,
    pub case_index: usize,
    /// The regenerated case serializes to the recorded dump.
    pub dump_matches: bool,
    pub result: CaseResult,
    /// The recorded check fails again.
    pub reproduced: bool,
}

/// Regenerates a failed case from its `(seed, case index)` and reruns it.
pub fn replay(failure: &Failure) -> Result<ReplayReport> {
    let (tree, sys) = campaign_case(failure.seed, failure.case_index)?;
    let dump_matches = tree.to_json() == failure.tree && sys == failure.system;
    let mut options = CampaignOptions::new(1);
    options.mutation = failure.mutation;
    let result = run_case(failure.seed, failure.case_index, &options)?;
    let reproduced = result.checks.iter().any(|c| c.check == failure.check && !c.passed);
    Ok(ReplayReport {
        seed: failure.seed,
        case_index: failure.case_index,
        dump_matches,
        result,
        reproduced,
    })
}
