//! Acceptance suite: one PASS/FAIL line per criterion.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use hydro_duality::analysis::{cap_ordering, flood_prone_system, no_flood_system, sample_feasible_policy, verify_counts};
use hydro_duality::certificates::{closed_form_certificate, duality_gap};
use hydro_duality::dual::{build_dual, dual_feasible, policy_from_dual, sample_certificate};
use hydro_duality::generate::{generate_tree, GeneratorSpec, InflowModel, PriceModel};
use hydro_duality::lagrange::{coefficient_expressions, finite_difference_coefficients, weak_duality_check};
use hydro_duality::model::{is_feasible_with_tol, primal_objective, DamSystem, Variant};
use hydro_duality::primal::build_primal;
use hydro_duality::tree::ScenarioTree;
use hydro_lp::{brute_force, solve, solve_dual_simplex, BruteMode, LpProblem, SolverOptions, Status, VERTEX_COLUMN_CAP};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn fixture(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    std::fs::read_to_string(p).expect("fixture exists")
}

fn fixture_pairs() -> Vec<(String, ScenarioTree, DamSystem)> {
    [
        ("five_scenario.json", "sys_individual.json"),
        ("five_scenario.json", "sys_totalcap.json"),
        ("five_scenario.json", "sys_flood_prone.json"),
        ("five_scenario_martingale.json", "sys_individual_alpha1.json"),
        ("five_scenario_submartingale.json", "sys_individual_alpha1.json"),
        ("five_scenario_supermartingale.json", "sys_individual.json"),
        ("five_scenario_two_dams.json", "sys_individual_two_dams.json"),
        ("five_scenario_two_dams.json", "sys_totalcap_two_dams.json"),
        ("five_scenario_two_dams.json", "sys_cascade.json"),
    ]
    .iter()
    .map(|(t, s)| {
        (
            format!("{t} + {s}"),
            ScenarioTree::from_json(&fixture(t)).expect("tree fixture parses"),
            DamSystem::from_json(&fixture(s)).expect("system fixture parses"),
        )
    })
    .collect()
}

fn random_branching(rng: &mut ChaCha8Rng, stages: usize, max_k: usize) -> Vec<usize> {
    let mut k = 1;
    (0..stages - 1)
        .map(|_| {
            let b = rng.gen_range(1..=4).min(max_k / k).max(1);
            k *= b;
            b
        })
        .collect()
}

/// Random tree with `T <= 5`, `K <= 32`, `N <= 3` and a matching system.
fn random_instance(rng: &mut ChaCha8Rng) -> (String, ScenarioTree, DamSystem) {
    let variant_pick = rng.gen_range(0..3);
    let n = if variant_pick == 2 { 2 } else { rng.gen_range(1..=3) };
    let stages = rng.gen_range(2..=5);
    let branching = random_branching(rng, stages, 32);
    let model = *[
        PriceModel::MartingaleBinomial,
        PriceModel::SubmartingaleDrift,
        PriceModel::SupermartingaleDrift,
        PriceModel::IidLognormalDiscretized,
    ]
    .choose(rng)
    .unwrap();
    let inflow = if rng.gen_bool(0.5) {
        InflowModel::NonnegativeIid
    } else {
        InflowModel::Seasonal
    };
    let coarsen = (2..stages).filter(|_| rng.gen_bool(0.4)).collect();
    let spec = GeneratorSpec::new(stages, n, branching, model, inflow).with_coarsening(coarsen);
    let seed = rng.gen();
    let tree = generate_tree(&spec, seed).expect("valid spec");
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
        no_flood_system(&tree, n, alpha, variant, rng)
    } else {
        flood_prone_system(&tree, n, alpha, variant, rng)
    };
    (format!("generated {spec:?} seed {seed}"), tree, sys)
}

/// Trees of one price model under an `α = 1` no-flood system.
fn closed_form_instances(model: PriceModel, count: usize, seed: u64) -> Vec<(ScenarioTree, DamSystem)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = rng.gen_range(1..=3);
            let stages = rng.gen_range(2..=5);
            let branching = random_branching(&mut rng, stages, 32);
            let coarsen = (2..stages).filter(|_| rng.gen_bool(0.4)).collect();
            let inflow = if i % 2 == 0 {
                InflowModel::NonnegativeIid
            } else {
                InflowModel::Seasonal
            };
            let spec = GeneratorSpec::new(stages, n, branching, model, inflow).with_coarsening(coarsen);
            let tree = generate_tree(&spec, rng.gen()).expect("valid spec");
            let variant = if i % 3 == 2 {
                Variant::TotalCap { c_tilde: 0.0 }
            } else {
                Variant::Individual
            };
            let sys = no_flood_system(&tree, n, 1.0, variant, &mut rng);
            (tree, sys)
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

fn check_gap(tree: &ScenarioTree, sys: &DamSystem) -> Result<f64, String> {
    let r = duality_gap(tree, sys, &SolverOptions::default()).map_err(|e| e.to_string())?;
    if r.rel_gap <= 1e-7 {
        Ok(r.rel_gap)
    } else {
        Err(format!("primal {} dual {} rel gap {:e}", r.primal_opt, r.dual_opt, r.rel_gap))
    }
}

fn c1_zero_gap() -> Outcome {
    let mut worst = 0.0_f64;
    let mut count = 0;
    for (name, tree, sys) in fixture_pairs() {
        worst = worst.max(check_gap(&tree, &sys).map_err(|e| format!("{name}: {e}"))?);
        count += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..50 {
        let (name, tree, sys) = random_instance(&mut rng);
        worst = worst.max(check_gap(&tree, &sys).map_err(|e| format!("{name}: {e}"))?);
        count += 1;
    }
    Ok(format!("{count} instances, worst relative gap {worst:.2e}"))
}

fn closed_form_check(model: PriceModel, seed: u64) -> Outcome {
    let mut worst = 0.0_f64;
    let instances = closed_form_instances(model, 20, seed);
    for (j, (tree, sys)) in instances.iter().enumerate() {
        let cf = closed_form_certificate(tree, sys)
            .map_err(|e| e.to_string())?
            .ok_or_else(|| format!("tree {j}: no closed form"))?;
        if !dual_feasible(&cf.cert, tree, sys).map_err(|e| e.to_string())?.feasible {
            return Err(format!("tree {j}: certificate is not dual-feasible"));
        }
        let r = duality_gap(tree, sys, &SolverOptions::default()).map_err(|e| e.to_string())?;
        let e = rel(cf.value, r.primal_opt).max(rel(cf.value, r.dual_opt));
        if e > 1e-7 {
            return Err(format!(
                "tree {j}: closed form {} vs primal {} / dual {}",
                cf.value, r.primal_opt, r.dual_opt
            ));
        }
        worst = worst.max(e);
    }
    Ok(format!("{} trees, worst relative deviation {worst:.2e}", instances.len()))
}

fn c2_martingale() -> Outcome {
    closed_form_check(PriceModel::MartingaleBinomial, 202)
}

fn c3_submartingale() -> Outcome {
    closed_form_check(PriceModel::SubmartingaleDrift, 303)
}

fn c4_capacity_independence() -> Outcome {
    let mut worst = 0.0_f64;
    let opts = SolverOptions::default();
    for (j, (tree, sys)) in closed_form_instances(PriceModel::MartingaleBinomial, 20, 202)
        .into_iter()
        .enumerate()
    {
        let mut big = sys.clone();
        big.b.iter_mut().for_each(|x| *x *= 2.0);
        big.m.iter_mut().for_each(|x| *x *= 2.0);
        if let Variant::TotalCap { c_tilde } = &mut big.variant {
            *c_tilde *= 2.0;
        }
        let a = solve(&build_primal(&tree, &sys).map_err(|e| e.to_string())?.problem, &opts)
            .map_err(|e| e.to_string())?;
        let b = solve(&build_primal(&tree, &big).map_err(|e| e.to_string())?.problem, &opts)
            .map_err(|e| e.to_string())?;
        let e = rel(a.objective, b.objective);
        if e > 1e-8 {
            return Err(format!("tree {j}: {} before, {} after doubling", a.objective, b.objective));
        }
        worst = worst.max(e);
    }
    Ok(format!("20 trees, worst relative change {worst:.2e}"))
}

fn c5_weak_duality() -> Outcome {
    let pairs = fixture_pairs();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let duals: Vec<_> = pairs.iter().map(|(_, t, s)| build_dual(t, s).expect("dual builds")).collect();
    let mut min_slack = f64::INFINITY;
    for j in 0..1000 {
        let idx = j % pairs.len();
        let (name, tree, sys) = &pairs[idx];
        let policy = sample_feasible_policy(tree, sys, &mut rng);
        let cert = sample_certificate(&duals[idx], tree, sys, &mut rng, 2.0);
        let r = weak_duality_check(&policy, &cert, tree, sys).map_err(|e| format!("{name}: {e}"))?;
        if !r.holds {
            return Err(format!("{name}: pair {j}: {r:?}"));
        }
        let g = r.sup.finite().ok_or_else(|| format!("{name}: unbounded g"))?;
        min_slack = min_slack.min((r.lagrange - r.primal).min(g - r.lagrange));
    }
    Ok(format!("1000 pairs, smallest link slack {min_slack:.2e}"))
}

fn c6_counts() -> Outcome {
    let combos = [
        (1, 2, 1, false),
        (1, 3, 4, false),
        (2, 3, 4, false),
        (3, 4, 10, false),
        (2, 5, 6, false),
        (2, 3, 4, true),
        (3, 4, 10, true),
        (1, 2, 3, true),
        (3, 2, 8, true),
        (2, 4, 9, true),
    ];
    for (n, t, k, total) in combos {
        let mut branching = vec![1; t - 1];
        branching[0] = k;
        let spec = GeneratorSpec::new(t, n, branching, PriceModel::MartingaleBinomial, InflowModel::NonnegativeIid);
        let tree = generate_tree(&spec, 6).map_err(|e| e.to_string())?;
        let variant = if total {
            Variant::TotalCap { c_tilde: 1.0 }
        } else {
            Variant::Individual
        };
        let sys = DamSystem::new(vec![1.0; n], vec![100.0; n], vec![1.0; n], 1.0, variant).map_err(|e| e.to_string())?;
        let r = verify_counts(&tree, &sys).map_err(|e| e.to_string())?;
        let cons = if total { (3 * n + 1) * (t - 1) * k } else { 4 * n * (t - 1) * k };
        if !r.matches || r.variables != n * (t - 1) * k || r.constraints != cons {
            return Err(format!("N={n} T={t} K={k}: {r:?}"));
        }
    }
    Ok("10 combinations reproduce the formulas exactly".into())
}

fn c7_ordering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let opts = SolverOptions::default();
    let mut violations = Vec::new();
    for j in 0..10 {
        let n = rng.gen_range(2..=3);
        let stages = rng.gen_range(2..=5);
        let branching = random_branching(&mut rng, stages, 32);
        let spec = GeneratorSpec::new(stages, n, branching, PriceModel::IidLognormalDiscretized, InflowModel::Seasonal);
        let tree = generate_tree(&spec, rng.gen()).map_err(|e| e.to_string())?;
        let sys = if j % 2 == 0 {
            no_flood_system(&tree, n, 0.9, Variant::Individual, &mut rng)
        } else {
            flood_prone_system(&tree, n, 0.9, Variant::Individual, &mut rng)
        };
        let r = cap_ordering(&tree, &sys, &opts, 1e-8).map_err(|e| format!("tree {j}: {e}"))?;
        if !r.individual_below_total {
            return Err(format!("tree {j}: relaxation lost value: {r:?}"));
        }
        if !r.total_below_individual {
            violations.push(format!("tree {j}: total cap {:.6} > individual {:.6}", r.total_cap, r.individual));
        }
    }
    if violations.is_empty() {
        Ok("10 trees".into())
    } else {
        Err(format!(
            "{} of 10 trees violate it ({}); individual <= total cap held on all 10",
            violations.len(),
            violations.join("; ")
        ))
    }
}

fn small_lps() -> Vec<(String, LpProblem)> {
    let mut out = Vec::new();
    for (name, tree, sys) in fixture_pairs() {
        let p = build_primal(&tree, &sys).expect("builds").problem;
        let d = build_dual(&tree, &sys).expect("builds").problem;
        out.push((format!("primal {name}"), p));
        out.push((format!("dual {name}"), d));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for _ in 0..30 {
        let stages = rng.gen_range(2..=3);
        let branching: Vec<usize> = (0..stages - 1).map(|_| rng.gen_range(1..=2)).collect();
        let n = rng.gen_range(1..=2);
        let model = [PriceModel::IidLognormalDiscretized, PriceModel::SubmartingaleDrift][rng.gen_range(0..2)];
        let spec = GeneratorSpec::new(stages, n, branching, model, InflowModel::NonnegativeIid);
        let tree = generate_tree(&spec, rng.gen()).expect("valid spec");
        let variant = if rng.gen_bool(0.5) {
            Variant::Individual
        } else {
            Variant::TotalCap { c_tilde: 0.0 }
        };
        let sys = if rng.gen_bool(0.5) {
            no_flood_system(&tree, n, 0.8, variant, &mut rng)
        } else {
            flood_prone_system(&tree, n, 0.8, variant, &mut rng)
        };
        out.push(("generated primal".into(), build_primal(&tree, &sys).expect("builds").problem));
        out.push(("generated dual".into(), build_dual(&tree, &sys).expect("builds").problem));
    }
    out.retain(|(_, p)| p.num_columns() <= VERTEX_COLUMN_CAP);
    out
}

fn c8_oracle() -> Outcome {
    let opts = SolverOptions::default();
    let lps = small_lps();
    let mut worst = 0.0_f64;
    for (name, p) in &lps {
        let a = solve(p, &opts).map_err(|e| e.to_string())?;
        let b = solve_dual_simplex(p, &opts).map_err(|e| e.to_string())?;
        let c = brute_force(p, BruteMode::Vertex).map_err(|e| format!("{name}: {e}"))?;
        if a.status != c.solution.status || b.status != c.solution.status {
            return Err(format!("{name}: {:?} / {:?} / brute {:?}", a.status, b.status, c.solution.status));
        }
        if c.solution.status == Status::Optimal {
            let e = rel(a.objective, c.solution.objective).max(rel(b.objective, c.solution.objective));
            if e > 1e-8 {
                return Err(format!(
                    "{name}: primal simplex {} dual simplex {} brute {}",
                    a.objective, b.objective, c.solution.objective
                ));
            }
            worst = worst.max(e);
        }
    }
    if lps.len() < 20 {
        return Err(format!("only {} small instances", lps.len()));
    }
    Ok(format!("{} instances with at most {VERTEX_COLUMN_CAP} columns, worst deviation {worst:.2e}", lps.len()))
}

fn c9_shadow_policy() -> Outcome {
    let opts = SolverOptions::default();
    let mut instances = fixture_pairs();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    instances.push(random_instance(&mut rng));
    let mut degenerate = 0;
    for (name, tree, sys) in instances.iter().take(10) {
        let dual = build_dual(tree, sys).map_err(|e| e.to_string())?;
        let sol = solve_dual_simplex(&dual.problem, &opts).map_err(|e| e.to_string())?;
        let shadow = policy_from_dual(&sol, &dual).map_err(|e| format!("{name}: {e}"))?;
        degenerate += usize::from(shadow.degenerate);
        let feas = is_feasible_with_tol(&shadow.policy, tree, sys, 1e-7).map_err(|e| e.to_string())?;
        if !feas.feasible {
            return Err(format!("{name}: shadow policy infeasible: {:?}", feas.violations.first()));
        }
        let value = primal_objective(&shadow.policy, tree, sys).map_err(|e| e.to_string())?;
        if rel(value, sol.objective) > 1e-7 {
            return Err(format!("{name}: policy value {value} vs dual optimum {}", sol.objective));
        }
    }
    Ok(format!("10 instances ({degenerate} flagged degenerate)"))
}

fn c10_coefficients() -> Outcome {
    let mut instances = fixture_pairs();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    for _ in 0..6 {
        instances.push(random_instance(&mut rng));
    }
    let duals: Vec<_> = instances.iter().map(|(_, t, s)| build_dual(t, s).expect("builds")).collect();
    let mut worst = 0.0_f64;
    let mut cascade = 0;
    for j in 0..100 {
        let idx = j % instances.len();
        let (name, tree, sys) = &instances[idx];
        let cert = sample_certificate(&duals[idx], tree, sys, &mut rng, 3.0);
        let fd = finite_difference_coefficients(&cert, tree, sys).map_err(|e| e.to_string())?;
        let an = coefficient_expressions(&cert, tree, sys).map_err(|e| e.to_string())?;
        for (a, b) in fd.iter().zip(&an) {
            let e = (a - b).abs();
            if e > 1e-9 {
                return Err(format!("{name}: certificate {j}: finite difference {a} vs expression {b}"));
            }
            worst = worst.max(e);
        }
        cascade += usize::from(sys.is_cascade());
    }
    if cascade == 0 {
        return Err("no cascade certificate drawn".into());
    }
    Ok(format!("100 certificates ({cascade} cascade), worst deviation {worst:.2e}"))
}

/// Criteria that are contradicted by the model itself. They still print
/// FAIL, but do not fail the run.
const DOCUMENTED: &[(usize, &str)] = &[(
    7,
    "a single cap of Σb is a relaxation of the individual caps, so the total-cap optimum is never below the individual one",
)];

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("zero duality gap on fixtures and 50 generated trees", c1_zero_gap),
        ("martingale closed form", c2_martingale),
        ("submartingale closed form", c3_submartingale),
        ("capacity independence under doubling", c4_capacity_independence),
        ("weak duality on 1000 random pairs", c5_weak_duality),
        ("count formulas", c6_counts),
        ("total cap optimum at most the individual-cap optimum", c7_ordering),
        ("simplex methods agree with brute force", c8_oracle),
        ("shadow-price policy", c9_shadow_policy),
        ("coefficient cross-check", c10_coefficients),
    ];
    let start = Instant::now();
    let (mut passed, mut unexpected) = (0, 0);
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        match f() {
            Ok(msg) => {
                passed += 1;
                println!("PASS {:>2} {name}: {msg} ({:.2?})", i + 1, t.elapsed());
            }
            Err(msg) => {
                let note = DOCUMENTED.iter().find(|(c, _)| *c == i + 1);
                println!("FAIL {:>2} {name}: {msg} ({:.2?})", i + 1, t.elapsed());
                match note {
                    Some((_, why)) => println!("        documented: {why}"),
                    None => unexpected += 1,
                }
            }
        }
    }
    println!(
        "{passed} of {} criteria passed, {unexpected} unexpected failures, {:.2?}",
        criteria.len(),
        start.elapsed()
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
