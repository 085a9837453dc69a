//! Exhaustive reference solver for tiny programs.
//!
//! Vertex mode enumerates basic solutions with an SVD-based solve, so it
//! shares no numerical code with the simplex engine. Every column has a
//! finite lower bound, which makes the feasible set pointed: a bounded
//! optimum is attained at a vertex, and unboundedness is decided on the
//! vertices of the recession cone cut by `Σ d = 1`.
//!
//! Grid mode walks a regular lattice of the bounding box and reports the
//! best feasible lattice point. It is only a one-sided estimate.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::LpError;
use crate::problem::{LpProblem, LpSolution, RowKind, Sense, Status, VarStatus};

pub const VERTEX_COLUMN_CAP: usize = 8;
pub const VERTEX_SUBSET_LIMIT: u128 = 5_000_000;
pub const GRID_POINT_LIMIT: u128 = 1 << 24;

const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BruteMode {
    Vertex,
    /// Lattice step `(upper - lower) / 2^resolution_bits` per column.
    Grid { resolution_bits: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BruteForceOutcome {
    /// Row prices and reduced costs are left empty.
    pub solution: LpSolution,
    /// Largest lattice step; zero in vertex mode.
    pub resolution: f64,
    /// True when the reported status and objective are exact.
    pub certified: bool,
    pub points_examined: u128,
}

pub fn brute_force(problem: &LpProblem, mode: BruteMode) -> Result<BruteForceOutcome, LpError> {
    problem.validate()?;
    match mode {
        BruteMode::Vertex => vertex_mode(problem),
        BruteMode::Grid { resolution_bits } => grid_mode(problem, resolution_bits),
    }
}

/// `g·x <= h` or `g·x == h`.
struct Constraint {
    g: Vec<f64>,
    h: f64,
}

fn split_constraints(problem: &LpProblem) -> (Vec<Constraint>, Vec<Constraint>) {
    let n = problem.num_columns();
    let mut eq = Vec::new();
    let mut ineq = Vec::new();
    for row in problem.rows() {
        let mut g = vec![0.0; n];
        for &(j, a) in &row.coeffs {
            g[j] = a;
        }
        let le = match row.kind {
            RowKind::Le => Constraint { g, h: row.rhs },
            RowKind::Ge => Constraint {
                g: g.iter().map(|v| -v).collect(),
                h: -row.rhs,
            },
            RowKind::Eq => {
                eq.push(Constraint { g, h: row.rhs });
                continue;
            }
        };
        if box_max(problem, &le.g) > le.h + FEAS_TOL * (1.0 + le.h.abs()) {
            ineq.push(le);
        }
    }
    for (j, col) in problem.columns().iter().enumerate() {
        let mut g = vec![0.0; n];
        g[j] = -1.0;
        ineq.push(Constraint { g, h: -col.lower });
        if col.upper.is_finite() {
            let mut g = vec![0.0; n];
            g[j] = 1.0;
            ineq.push(Constraint { g, h: col.upper });
        }
    }
    (eq, dedupe(ineq))
}

/// Largest value of `g·x` over the column box.
fn box_max(problem: &LpProblem, g: &[f64]) -> f64 {
    g.iter()
        .zip(problem.columns())
        .map(|(&a, col)| match a {
            a if a > 0.0 => a * col.upper,
            a if a < 0.0 => a * col.lower,
            _ => 0.0,
        })
        .sum()
}

/// Scales each inequality to unit max-norm and keeps the tightest copy of
/// every direction. The feasible set and its recession cone are unchanged.
fn dedupe(ineq: Vec<Constraint>) -> Vec<Constraint> {
    let mut out: Vec<Constraint> = Vec::new();
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    for c in ineq {
        let s = c.g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if s == 0.0 {
            if c.h < -FEAS_TOL {
                out.push(c);
            }
            continue;
        }
        let g: Vec<f64> = c.g.iter().map(|v| v / s).collect();
        let h = c.h / s;
        let key: Vec<u64> = g.iter().map(|v| (v + 0.0).to_bits()).collect();
        match seen.get(&key) {
            Some(&i) => out[i].h = out[i].h.min(h),
            None => {
                seen.insert(key, out.len());
                out.push(Constraint { g, h });
            }
        }
    }
    out
}

fn matrix(rows: &[&Constraint], n: usize) -> (DMatrix<f64>, DVector<f64>) {
    let a = DMatrix::from_fn(rows.len(), n, |i, j| rows[i].g[j]);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.h));
    (a, b)
}

fn numeric_rank(a: &DMatrix<f64>) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let top = sv.iter().fold(0.0_f64, |m, v| m.max(*v));
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&v| v > 1e-10 * top.max(1.0)).count()
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Feasible basic solutions of `{eq: g·x = h, ineq: g·x <= h}` in `R^n`.
fn enumerate_vertices(eq: &[Constraint], ineq: &[Constraint], n: usize) -> Result<(Vec<Vec<f64>>, u128), LpError> {
    let eq_refs: Vec<&Constraint> = eq.iter().collect();
    let (ea, _) = matrix(&eq_refs, n);
    let k = n.saturating_sub(numeric_rank(&ea));
    let subsets = binomial(ineq.len(), k);
    if subsets > VERTEX_SUBSET_LIMIT {
        return Err(LpError::EnumerationTooLarge {
            subsets,
            limit: VERTEX_SUBSET_LIMIT,
        });
    }
    let mut found = Vec::new();
    let mut examined = 0u128;
    let mut pick: Vec<usize> = (0..k).collect();
    if k > ineq.len() {
        return Ok((found, 0));
    }
    loop {
        examined += 1;
        let mut rows = eq_refs.clone();
        rows.extend(pick.iter().map(|&i| &ineq[i]));
        let (a, b) = matrix(&rows, n);
        if let Some(x) = basic_solution(&a, &b, n) {
            let ok_eq = eq.iter().all(|c| (dot(&c.g, &x) - c.h).abs() <= FEAS_TOL * (1.0 + c.h.abs()));
            let ok_in = ineq.iter().all(|c| dot(&c.g, &x) - c.h <= FEAS_TOL * (1.0 + c.h.abs()));
            if ok_eq && ok_in {
                found.push(x);
            }
        }
        // Next combination in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                return Ok((found, examined));
            }
            i -= 1;
            if pick[i] < ineq.len() - k + i {
                pick[i] += 1;
                for t in i + 1..k {
                    pick[t] = pick[t - 1] + 1;
                }
                break;
            }
        }
    }
}

fn basic_solution(a: &DMatrix<f64>, b: &DVector<f64>, n: usize) -> Option<Vec<f64>> {
    if n == 0 {
        return Some(Vec::new());
    }
    if numeric_rank(a) < n {
        return None;
    }
    let svd = a.clone().svd(true, true);
    let x = svd.solve(b, 1e-12).ok()?;
    let resid = a * &x - b;
    let scale = 1.0 + b.amax();
    if resid.amax() > 1e-8 * scale {
        return None;
    }
    Some(x.iter().copied().collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sense_sign(problem: &LpProblem) -> f64 {
    match problem.sense {
        Sense::Minimize => -1.0,
        Sense::Maximize => 1.0,
    }
}

fn point_solution(problem: &LpProblem, status: Status, x: Option<Vec<f64>>, examined: u128) -> LpSolution {
    let n = problem.num_columns();
    let (x, objective) = match x {
        Some(x) => {
            let obj = problem.objective_value(&x);
            (x, obj)
        }
        None => (vec![0.0; n], f64::NAN),
    };
    let col_status = problem
        .columns()
        .iter()
        .zip(&x)
        .map(|(c, &v)| {
            if (v - c.lower).abs() <= FEAS_TOL {
                VarStatus::AtLower
            } else if (v - c.upper).abs() <= FEAS_TOL {
                VarStatus::AtUpper
            } else {
                VarStatus::Basic
            }
        })
        .collect();
    LpSolution {
        status,
        x,
        objective,
        row_prices: Vec::new(),
        reduced_costs: Vec::new(),
        col_status,
        iterations: examined.min(usize::MAX as u128) as usize,
    }
}

fn vertex_mode(problem: &LpProblem) -> Result<BruteForceOutcome, LpError> {
    let n = problem.num_columns();
    if n > VERTEX_COLUMN_CAP {
        return Err(LpError::SizeCap {
            columns: n,
            cap: VERTEX_COLUMN_CAP,
        });
    }
    let (eq, ineq) = split_constraints(problem);
    let (vertices, mut examined) = enumerate_vertices(&eq, &ineq, n)?;
    let s = sense_sign(problem);
    let c: Vec<f64> = problem.columns().iter().map(|col| s * col.obj).collect();
    let best = vertices
        .into_iter()
        .map(|x| (dot(&c, &x), x))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    let Some((_, x)) = best else {
        return Ok(BruteForceOutcome {
            solution: point_solution(problem, Status::Infeasible, None, examined),
            resolution: 0.0,
            certified: true,
            points_examined: examined,
        });
    };

    // Recession directions: homogeneous constraints plus Σ d = 1.
    let mut cone_eq: Vec<Constraint> = eq.iter().map(|c| Constraint { g: c.g.clone(), h: 0.0 }).collect();
    cone_eq.push(Constraint { g: vec![1.0; n], h: 1.0 });
    let cone_in: Vec<Constraint> = ineq.iter().map(|c| Constraint { g: c.g.clone(), h: 0.0 }).collect();
    let (rays, more) = enumerate_vertices(&cone_eq, &cone_in, n)?;
    examined += more;
    let scale = c.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let unbounded = rays.iter().any(|d| dot(&c, d) > 1e-9 * scale);
    let solution = if unbounded {
        point_solution(problem, Status::Unbounded, None, examined)
    } else {
        point_solution(problem, Status::Optimal, Some(x), examined)
    };
    Ok(BruteForceOutcome {
        solution,
        resolution: 0.0,
        certified: true,
        points_examined: examined,
    })
}

fn grid_mode(problem: &LpProblem, bits: u32) -> Result<BruteForceOutcome, LpError> {
    let n = problem.num_columns();
    for (j, col) in problem.columns().iter().enumerate() {
        if !col.upper.is_finite() {
            return Err(LpError::UnboundedBox(j));
        }
    }
    let per_axis: u128 = (1u128 << bits.min(60)) + 1;
    let mut points: u128 = 1;
    for col in problem.columns() {
        let k = if col.upper > col.lower { per_axis } else { 1 };
        points = points.saturating_mul(k);
    }
    if points > GRID_POINT_LIMIT {
        return Err(LpError::GridTooLarge {
            points,
            limit: GRID_POINT_LIMIT,
        });
    }
    let steps: Vec<f64> = problem
        .columns()
        .iter()
        .map(|c| (c.upper - c.lower) / 2f64.powi(bits as i32))
        .collect();
    let counts: Vec<u64> = problem
        .columns()
        .iter()
        .map(|c| if c.upper > c.lower { per_axis as u64 } else { 1 })
        .collect();
    let s = sense_sign(problem);
    let mut idx = vec![0u64; n];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut examined = 0u128;
    loop {
        examined += 1;
        let x: Vec<f64> = problem
            .columns()
            .iter()
            .zip(&idx)
            .zip(&steps)
            .map(|((c, &i), &h)| (c.lower + h * i as f64).min(c.upper))
            .collect();
        let tol = FEAS_TOL * (1.0 + x.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        if problem.max_primal_violation(&x) <= tol {
            let v = s * problem.objective_value(&x);
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, x));
            }
        }
        let mut d = 0;
        loop {
            if d == n {
                let resolution = steps.iter().fold(0.0_f64, |m, v| m.max(*v));
                let (status, x) = match best {
                    Some((_, x)) => (Status::Optimal, Some(x)),
                    None => (Status::Infeasible, None),
                };
                return Ok(BruteForceOutcome {
                    solution: point_solution(problem, status, x, examined),
                    resolution,
                    certified: false,
                    points_examined: examined,
                });
            }
            idx[d] += 1;
            if idx[d] < counts[d] {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}
