//! Bounded-variable revised simplex, primal and dual.
//!
//! Both entry points run the same presolve (empty rows, empty columns,
//! fixed columns) and work on the internal form
//!
//! ```text
//! min c·x   s.t.  A x + s = b,  lower <= x <= upper,  s >= 0 (s == 0 on equality rows)
//! ```
//!
//! where `>=` rows have been negated. The primal method uses a textbook
//! two-phase scheme with artificial columns. The dual method first finds a
//! dual feasible basis by solving the auxiliary box problem (`A x + s = 0`
//! with every one-sided column boxed to `[0, 1]` and every two-sided
//! column fixed at `0`), then iterates on primal infeasibilities.
//!
//! Ratio tests are two-pass (Harris) with the largest pivot preferred among
//! near ties. Bland's rule takes over after a run of degenerate pivots.

use serde::{Deserialize, Serialize};

use crate::error::LpError;
use crate::factor::{BasisFactor, SparseCol, Singular};
use crate::problem::{LpProblem, LpSolution, RowKind, Sense, Status, VarStatus};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    /// Pivot elements below this magnitude are treated as zero.
    pub pivot_tol: f64,
    /// Pivots between fresh factorizations of the basis.
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots before Bland's rule engages.
    pub bland_after: usize,
    /// Defaults to `10_000 * (rows + columns)`.
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-11,
            refactor_interval: 100,
            bland_after: 50,
            max_iterations: None,
        }
    }
}

impl SolverOptions {
    /// Overrides both the feasibility and the optimality tolerance.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.feasibility_tol = tol;
        self.optimality_tol = tol;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Method {
    Primal,
    Dual,
}

/// Solves with the primal simplex method.
pub fn solve(problem: &LpProblem, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    run(problem, opts, Method::Primal)
}

/// Solves with the dual simplex method.
pub fn solve_dual_simplex(problem: &LpProblem, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    run(problem, opts, Method::Dual)
}

fn run(problem: &LpProblem, opts: &SolverOptions, method: Method) -> Result<LpSolution, LpError> {
    problem.validate()?;
    let limit = opts
        .max_iterations
        .unwrap_or(10_000 * (problem.num_rows() + problem.num_columns()).max(1));
    let pre = match presolve(problem, opts) {
        Some(p) => p,
        None => {
            return Ok(LpSolution::without_point(
                Status::Infeasible,
                problem.num_rows(),
                problem.num_columns(),
                0,
            ))
        }
    };
    let outcome = match method {
        Method::Primal => primal_two_phase(pre.std.clone(), opts, limit),
        Method::Dual => dual_method(pre.std.clone(), opts, limit),
    };
    let fail = |status: Status, iterations: usize| {
        Ok(LpSolution::without_point(
            status,
            problem.num_rows(),
            problem.num_columns(),
            iterations,
        ))
    };
    let mut engine = match outcome {
        Outcome::Solved(engine) => engine,
        Outcome::Infeasible(it) => return fail(Status::Infeasible, it),
        Outcome::Unbounded(it) => return fail(Status::Unbounded, it),
        Outcome::Trouble(it) => return fail(Status::IterationLimit, it),
    };
    if pre.unbounded_empty_column {
        return fail(Status::Unbounded, engine.iterations);
    }
    if engine.refactor().is_err() {
        return fail(Status::IterationLimit, engine.iterations);
    }
    let solution = extract(problem, &pre, &engine);
    let kkt = solution.kkt(problem);
    let scale = 1.0 + solution.objective.abs();
    if kkt.primal > opts.feasibility_tol
        || kkt.dual > opts.optimality_tol
        || kkt.complementarity > 1e-8 * scale
    {
        return Ok(LpSolution {
            status: Status::IterationLimit,
            ..solution
        });
    }
    Ok(solution)
}

// ---------------------------------------------------------------------------
// Presolve
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct Standard {
    m: usize,
    n_struct: usize,
    cols: Vec<SparseCol>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
}

struct Presolved {
    std: Standard,
    /// Reduced structural column -> original column.
    col_map: Vec<usize>,
    /// Reduced row -> original row.
    row_map: Vec<usize>,
    /// Per reduced row: `-1` when the original `>=` row was negated.
    row_flip: Vec<f64>,
    /// Per original column: the value assigned by presolve, if removed.
    removed: Vec<Option<(f64, VarStatus)>>,
    unbounded_empty_column: bool,
}

fn presolve(problem: &LpProblem, opts: &SolverOptions) -> Option<Presolved> {
    let sense = match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let n = problem.num_columns();
    let mut removed: Vec<Option<(f64, VarStatus)>> = vec![None; n];
    for (j, col) in problem.columns().iter().enumerate() {
        if col.lower == col.upper {
            removed[j] = Some((col.lower, VarStatus::AtLower));
        }
    }
    // Rows after substituting fixed columns.
    let mut kept_rows = Vec::new();
    for (i, row) in problem.rows().iter().enumerate() {
        let mut rhs = row.rhs;
        let mut live = 0usize;
        for &(j, a) in &row.coeffs {
            match removed[j] {
                Some((v, _)) => rhs -= a * v,
                None => live += 1,
            }
        }
        if live == 0 {
            let tol = opts.feasibility_tol;
            let ok = match row.kind {
                RowKind::Le => 0.0 <= rhs + tol,
                RowKind::Ge => 0.0 >= rhs - tol,
                RowKind::Eq => rhs.abs() <= tol,
            };
            if !ok {
                return None;
            }
        } else {
            kept_rows.push((i, rhs));
        }
    }
    let mut in_kept_row = vec![false; n];
    for &(i, _) in &kept_rows {
        for &(j, _) in &problem.rows()[i].coeffs {
            in_kept_row[j] = true;
        }
    }
    let mut unbounded_empty_column = false;
    for (j, col) in problem.columns().iter().enumerate() {
        if removed[j].is_some() || in_kept_row[j] {
            continue;
        }
        let c = sense * col.obj;
        removed[j] = Some(if c < 0.0 {
            if col.upper.is_finite() {
                (col.upper, VarStatus::AtUpper)
            } else {
                unbounded_empty_column = true;
                (col.lower, VarStatus::AtLower)
            }
        } else {
            (col.lower, VarStatus::AtLower)
        });
    }
    let col_map: Vec<usize> = (0..n).filter(|&j| removed[j].is_none()).collect();
    let mut reduced_index = vec![usize::MAX; n];
    for (k, &j) in col_map.iter().enumerate() {
        reduced_index[j] = k;
    }
    let m = kept_rows.len();
    let n_struct = col_map.len();
    let mut cols: Vec<SparseCol> = vec![Vec::new(); n_struct + m];
    let mut rhs = Vec::with_capacity(m);
    let mut row_map = Vec::with_capacity(m);
    let mut row_flip = Vec::with_capacity(m);
    let mut lower = Vec::with_capacity(n_struct + m);
    let mut upper = Vec::with_capacity(n_struct + m);
    let mut cost = Vec::with_capacity(n_struct + m);
    for &j in &col_map {
        let col = &problem.columns()[j];
        lower.push(col.lower);
        upper.push(col.upper);
        cost.push(sense * col.obj);
    }
    for (r, &(i, b)) in kept_rows.iter().enumerate() {
        let row = &problem.rows()[i];
        let flip = if row.kind == RowKind::Ge { -1.0 } else { 1.0 };
        for &(j, a) in &row.coeffs {
            let k = reduced_index[j];
            if k != usize::MAX {
                cols[k].push((r, flip * a));
            }
        }
        cols[n_struct + r].push((r, 1.0));
        rhs.push(flip * b);
        row_map.push(i);
        row_flip.push(flip);
        lower.push(0.0);
        upper.push(if row.kind == RowKind::Eq { 0.0 } else { f64::INFINITY });
        cost.push(0.0);
    }
    Some(Presolved {
        std: Standard {
            m,
            n_struct,
            cols,
            cost,
            lower,
            upper,
            rhs,
        },
        col_map,
        row_map,
        row_flip,
        removed,
        unbounded_empty_column,
    })
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    Lower,
    Upper,
}

enum LoopEnd {
    Optimal,
    Unbounded,
    Infeasible,
    Limit,
}

enum Outcome {
    Solved(Engine),
    Infeasible(usize),
    Unbounded(usize),
    Trouble(usize),
}

struct Engine {
    sf: Standard,
    opts: SolverOptions,
    basis: Vec<usize>,
    state: Vec<VarState>,
    x: Vec<f64>,
    factor: BasisFactor,
    iterations: usize,
    limit: usize,
    degenerate_run: usize,
}

fn dot(col: &SparseCol, y: &[f64]) -> f64 {
    col.iter().map(|&(i, a)| a * y[i]).sum()
}

impl Engine {
    /// Slack basis, every structural column at its lower bound.
    fn slack_start(sf: Standard, opts: &SolverOptions, limit: usize) -> Result<Self, Singular> {
        let m = sf.m;
        let n = sf.cols.len();
        let mut state = vec![VarState::Lower; n];
        let basis: Vec<usize> = (0..m).map(|i| sf.n_struct + i).collect();
        for (p, &j) in basis.iter().enumerate() {
            state[j] = VarState::Basic(p);
        }
        let x: Vec<f64> = sf.lower.clone();
        let factor = BasisFactor::new(&sf.cols, &basis, opts.pivot_tol)?;
        let mut e = Self {
            sf,
            opts: opts.clone(),
            basis,
            state,
            x,
            factor,
            iterations: 0,
            limit,
            degenerate_run: 0,
        };
        e.recompute_basics();
        Ok(e)
    }

    fn refactor(&mut self) -> Result<(), Singular> {
        self.factor = BasisFactor::new(&self.sf.cols, &self.basis, self.opts.pivot_tol)?;
        self.recompute_basics();
        Ok(())
    }

    fn recompute_basics(&mut self) {
        let mut rhs = self.sf.rhs.clone();
        for (j, col) in self.sf.cols.iter().enumerate() {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let v = self.x[j];
            if v != 0.0 {
                for &(i, a) in col {
                    rhs[i] -= a * v;
                }
            }
        }
        let xb = self.factor.ftran(&self.sf.cols, &rhs);
        for (p, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[p];
        }
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let cb: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
        self.factor.btran(&self.sf.cols, &cb)
    }

    fn column_image(&self, j: usize) -> Vec<f64> {
        let mut dense = vec![0.0; self.sf.m];
        for &(i, a) in &self.sf.cols[j] {
            dense[i] += a;
        }
        self.factor.ftran(&self.sf.cols, &dense)
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.sf.upper[j] - self.sf.lower[j] <= 0.0
    }

    fn replace(&mut self, pos: usize, entering: usize, alpha: &[f64]) -> Result<(), Singular> {
        self.basis[pos] = entering;
        self.state[entering] = VarState::Basic(pos);
        self.factor.push_eta(pos, alpha);
        if self.factor.num_etas() >= self.opts.refactor_interval {
            self.refactor()?;
        }
        Ok(())
    }

    fn note_step(&mut self, step: f64) {
        if step <= 1e-12 {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }
        self.iterations += 1;
    }

    fn bland(&self) -> bool {
        self.degenerate_run >= self.opts.bland_after
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        cost.iter().zip(&self.x).map(|(c, v)| c * v).sum()
    }

    /// Primal simplex from a primal feasible basis.
    fn run_primal(&mut self, cost: &[f64]) -> Result<LoopEnd, Singular> {
        let m = self.sf.m;
        let htol = self.opts.feasibility_tol * 0.1;
        loop {
            if self.iterations >= self.limit {
                return Ok(LoopEnd::Limit);
            }
            let y = self.duals(cost);
            let bland = self.bland();
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.sf.cols.len() {
                let dir = match self.state[j] {
                    VarState::Basic(_) => continue,
                    _ if self.is_fixed(j) => continue,
                    VarState::Lower => 1.0,
                    VarState::Upper => -1.0,
                };
                let d = cost[j] - dot(&self.sf.cols[j], &y);
                let score = -dir * d;
                if score > self.opts.optimality_tol {
                    if bland {
                        entering = Some((j, dir));
                        break;
                    }
                    if score > best {
                        best = score;
                        entering = Some((j, dir));
                    }
                }
            }
            let Some((q, dir)) = entering else {
                return Ok(LoopEnd::Optimal);
            };
            let alpha = self.column_image(q);
            let amax = alpha.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            let ptol = self.opts.pivot_tol.max(1e-9 * amax);

            // Exact ratio for a blocking position, if any.
            let ratio = |p: usize| -> Option<(f64, f64, bool)> {
                let rate = dir * alpha[p];
                let j = self.basis[p];
                if rate > ptol {
                    Some(((self.x[j] - self.sf.lower[j]).max(0.0) / rate, rate, true))
                } else if rate < -ptol && self.sf.upper[j].is_finite() {
                    Some(((self.sf.upper[j] - self.x[j]).max(0.0) / -rate, rate, false))
                } else {
                    None
                }
            };

            let mut leave: Option<(usize, f64, bool)> = None;
            if bland {
                let mut best_ratio = f64::INFINITY;
                for p in 0..m {
                    if let Some((t, _, to_lower)) = ratio(p) {
                        let better = t < best_ratio - 1e-12
                            || (t <= best_ratio + 1e-12
                                && leave.is_some_and(|(lp, _, _)| self.basis[p] < self.basis[lp]));
                        if better {
                            best_ratio = best_ratio.min(t);
                            leave = Some((p, t, to_lower));
                        }
                    }
                }
            } else {
                let mut theta_max = f64::INFINITY;
                for p in 0..m {
                    let rate = dir * alpha[p];
                    let j = self.basis[p];
                    if rate > ptol {
                        theta_max = theta_max.min((self.x[j] - self.sf.lower[j] + htol) / rate);
                    } else if rate < -ptol && self.sf.upper[j].is_finite() {
                        theta_max = theta_max.min((self.sf.upper[j] - self.x[j] + htol) / -rate);
                    }
                }
                let mut best_abs = 0.0;
                for p in 0..m {
                    if let Some((t, rate, to_lower)) = ratio(p) {
                        if t <= theta_max && rate.abs() > best_abs {
                            best_abs = rate.abs();
                            leave = Some((p, t, to_lower));
                        }
                    }
                }
            }

            let range = self.sf.upper[q] - self.sf.lower[q];
            let flip = match leave {
                Some((_, t, _)) => range.is_finite() && range <= t,
                None => range.is_finite(),
            };
            if leave.is_none() && !flip {
                return Ok(LoopEnd::Unbounded);
            }
            let theta = if flip { range } else { leave.map_or(0.0, |l| l.1) };
            if theta > 0.0 {
                self.x[q] += dir * theta;
                for p in 0..m {
                    let j = self.basis[p];
                    self.x[j] -= theta * dir * alpha[p];
                }
            }
            if flip {
                if dir > 0.0 {
                    self.state[q] = VarState::Upper;
                    self.x[q] = self.sf.upper[q];
                } else {
                    self.state[q] = VarState::Lower;
                    self.x[q] = self.sf.lower[q];
                }
            } else {
                let (r, _, to_lower) = leave.expect("checked above");
                let l = self.basis[r];
                if to_lower {
                    self.x[l] = self.sf.lower[l];
                    self.state[l] = VarState::Lower;
                } else {
                    self.x[l] = self.sf.upper[l];
                    self.state[l] = VarState::Upper;
                }
                self.replace(r, q, &alpha)?;
            }
            self.note_step(theta);
        }
    }

    /// Dual simplex from a dual feasible basis.
    fn run_dual(&mut self, cost: &[f64]) -> Result<LoopEnd, Singular> {
        let m = self.sf.m;
        let tol = self.opts.feasibility_tol * 0.1;
        let mut retried_pivot = false;
        loop {
            if self.iterations >= self.limit {
                return Ok(LoopEnd::Limit);
            }
            let bland = self.bland();
            let mut leave: Option<(usize, bool)> = None;
            let mut worst = 0.0;
            for p in 0..m {
                let j = self.basis[p];
                let (viol, to_lower) = if self.x[j] < self.sf.lower[j] - tol {
                    (self.sf.lower[j] - self.x[j], true)
                } else if self.x[j] > self.sf.upper[j] + tol {
                    (self.x[j] - self.sf.upper[j], false)
                } else {
                    continue;
                };
                if bland {
                    if leave.is_none_or(|(lp, _)| j < self.basis[lp]) {
                        leave = Some((p, to_lower));
                    }
                } else if viol > worst {
                    worst = viol;
                    leave = Some((p, to_lower));
                }
            }
            let Some((r, to_lower)) = leave else {
                return Ok(LoopEnd::Optimal);
            };
            let mut unit = vec![0.0; m];
            unit[r] = 1.0;
            let rho = self.factor.btran(&self.sf.cols, &unit);
            let y = self.duals(cost);

            // (column, |alpha_rj|, nonnegative dual ratio numerator)
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            let mut amax = 0.0_f64;
            for j in 0..self.sf.cols.len() {
                let at_lower = match self.state[j] {
                    VarState::Basic(_) => continue,
                    _ if self.is_fixed(j) => continue,
                    VarState::Lower => true,
                    VarState::Upper => false,
                };
                let a = dot(&self.sf.cols[j], &rho);
                amax = amax.max(a.abs());
                // x_r moves up when x_j moves in a direction with -a > 0.
                let eligible = match (to_lower, at_lower) {
                    (true, true) => a < 0.0,
                    (true, false) => a > 0.0,
                    (false, true) => a > 0.0,
                    (false, false) => a < 0.0,
                };
                if !eligible {
                    continue;
                }
                let d = cost[j] - dot(&self.sf.cols[j], &y);
                let num = if at_lower { d.max(0.0) } else { (-d).max(0.0) };
                cands.push((j, a.abs(), num));
            }
            let ptol = self.opts.pivot_tol.max(1e-9 * amax);
            cands.retain(|c| c.1 > ptol);
            if cands.is_empty() {
                return Ok(LoopEnd::Infeasible);
            }
            let q = if bland {
                let mut best: Option<(usize, f64)> = None;
                for &(j, a, num) in &cands {
                    let t = num / a;
                    let better = match best {
                        None => true,
                        Some((bj, bt)) => t < bt - 1e-12 || (t <= bt + 1e-12 && j < bj),
                    };
                    if better {
                        best = Some((j, t));
                    }
                }
                best.expect("nonempty").0
            } else {
                let bound = cands
                    .iter()
                    .map(|&(_, a, num)| (num + self.opts.optimality_tol) / a)
                    .fold(f64::INFINITY, f64::min);
                let mut best: Option<(usize, f64)> = None;
                for &(j, a, num) in &cands {
                    if num / a <= bound && best.is_none_or(|(_, ba)| a > ba) {
                        best = Some((j, a));
                    }
                }
                best.expect("nonempty").0
            };
            let dual_step = cands
                .iter()
                .find(|c| c.0 == q)
                .map_or(0.0, |&(_, a, num)| num / a);

            let alpha = self.column_image(q);
            if alpha[r].abs() <= self.opts.pivot_tol {
                if retried_pivot {
                    return Err(Singular);
                }
                retried_pivot = true;
                self.refactor()?;
                self.iterations += 1;
                continue;
            }
            retried_pivot = false;
            let l = self.basis[r];
            let target = if to_lower { self.sf.lower[l] } else { self.sf.upper[l] };
            let theta = (self.x[l] - target) / alpha[r];
            for p in 0..m {
                let j = self.basis[p];
                self.x[j] -= theta * alpha[p];
            }
            self.x[q] += theta;
            self.x[l] = target;
            self.state[l] = if to_lower { VarState::Lower } else { VarState::Upper };
            self.replace(r, q, &alpha)?;
            self.note_step(dual_step);
        }
    }

    fn dual_infeasibility(&self, cost: &[f64]) -> f64 {
        let y = self.duals(cost);
        let mut worst = 0.0_f64;
        for j in 0..self.sf.cols.len() {
            if self.is_fixed(j) {
                continue;
            }
            let d = cost[j] - dot(&self.sf.cols[j], &y);
            match self.state[j] {
                VarState::Basic(_) => {}
                VarState::Lower => worst = worst.max(-d),
                VarState::Upper => worst = worst.max(d),
            }
        }
        worst
    }
}

fn finish(end: Result<LoopEnd, Singular>, engine: &Engine) -> Option<Outcome> {
    match end {
        Ok(LoopEnd::Optimal) => None,
        Ok(LoopEnd::Unbounded) => Some(Outcome::Unbounded(engine.iterations)),
        Ok(LoopEnd::Infeasible) => Some(Outcome::Infeasible(engine.iterations)),
        Ok(LoopEnd::Limit) | Err(Singular) => Some(Outcome::Trouble(engine.iterations)),
    }
}

fn primal_two_phase(mut sf: Standard, opts: &SolverOptions, limit: usize) -> Outcome {
    // Residuals with every structural column at its lower bound.
    let mut resid = sf.rhs.clone();
    for j in 0..sf.n_struct {
        let v = sf.lower[j];
        if v != 0.0 {
            for &(i, a) in &sf.cols[j] {
                resid[i] -= a * v;
            }
        }
    }
    let n0 = sf.cols.len();
    let mut artificial_rows = Vec::new();
    for (i, &r) in resid.iter().enumerate() {
        let is_eq = sf.upper[sf.n_struct + i] == 0.0;
        let ok = r >= -opts.feasibility_tol && (!is_eq || r.abs() <= opts.feasibility_tol);
        if !ok {
            let sign = if r >= 0.0 { 1.0 } else { -1.0 };
            sf.cols.push(vec![(i, sign)]);
            sf.lower.push(0.0);
            sf.upper.push(f64::INFINITY);
            sf.cost.push(0.0);
            artificial_rows.push(i);
        }
    }
    let mut engine = match Engine::slack_start(sf, opts, limit) {
        Ok(e) => e,
        Err(Singular) => return Outcome::Trouble(0),
    };
    if !artificial_rows.is_empty() {
        for (k, &i) in artificial_rows.iter().enumerate() {
            let art = n0 + k;
            let slack = engine.sf.n_struct + i;
            engine.state[slack] = VarState::Lower;
            engine.x[slack] = 0.0;
            engine.basis[i] = art;
            engine.state[art] = VarState::Basic(i);
        }
        if engine.refactor().is_err() {
            return Outcome::Trouble(0);
        }
        let phase1: Vec<f64> = (0..engine.sf.cols.len())
            .map(|j| if j >= n0 { 1.0 } else { 0.0 })
            .collect();
        let end = engine.run_primal(&phase1);
        if let Some(out) = finish(end, &engine) {
            return out;
        }
        let bnorm = engine.sf.rhs.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let infeasibility: f64 = (n0..engine.sf.cols.len()).map(|j| engine.x[j].max(0.0)).sum();
        if infeasibility > opts.feasibility_tol * (1.0 + bnorm) {
            return Outcome::Infeasible(engine.iterations);
        }
        for j in n0..engine.sf.cols.len() {
            engine.sf.upper[j] = 0.0;
            if !matches!(engine.state[j], VarState::Basic(_)) {
                engine.x[j] = 0.0;
            }
        }
        engine.degenerate_run = 0;
    }
    let cost = engine.sf.cost.clone();
    let end = engine.run_primal(&cost);
    if let Some(out) = finish(end, &engine) {
        return out;
    }
    Outcome::Solved(engine)
}

fn dual_method(sf: Standard, opts: &SolverOptions, limit: usize) -> Outcome {
    let cost = sf.cost.clone();
    // Auxiliary box problem for a dual feasible starting basis.
    let mut aux = sf.clone();
    aux.rhs.iter_mut().for_each(|b| *b = 0.0);
    for j in 0..aux.cols.len() {
        aux.lower[j] = 0.0;
        aux.upper[j] = if sf.upper[j].is_finite() { 0.0 } else { 1.0 };
    }
    let mut aux_engine = match Engine::slack_start(aux, opts, limit) {
        Ok(e) => e,
        Err(Singular) => return Outcome::Trouble(0),
    };
    let end = aux_engine.run_primal(&cost);
    if let Some(out) = finish(end, &aux_engine) {
        return match out {
            Outcome::Unbounded(it) => Outcome::Trouble(it),
            other => other,
        };
    }
    if aux_engine.objective(&cost) < -opts.optimality_tol {
        // No dual feasible basis exists: the problem is unbounded or
        // infeasible. The primal method tells which.
        let spent = aux_engine.iterations;
        return match primal_two_phase(sf, opts, limit.saturating_sub(spent)) {
            Outcome::Solved(e) => Outcome::Trouble(spent + e.iterations),
            Outcome::Infeasible(it) => Outcome::Infeasible(spent + it),
            Outcome::Unbounded(it) => Outcome::Unbounded(spent + it),
            Outcome::Trouble(it) => Outcome::Trouble(spent + it),
        };
    }

    let basis = aux_engine.basis.clone();
    let mut state = aux_engine.state.clone();
    let y = aux_engine.duals(&cost);
    let mut x = sf.lower.clone();
    for j in 0..sf.cols.len() {
        if matches!(state[j], VarState::Basic(_)) {
            continue;
        }
        let d = cost[j] - dot(&sf.cols[j], &y);
        if sf.upper[j].is_finite() && sf.upper[j] > sf.lower[j] && d < 0.0 {
            state[j] = VarState::Upper;
            x[j] = sf.upper[j];
        } else {
            state[j] = VarState::Lower;
        }
    }
    let factor = aux_engine.factor.clone();
    let mut engine = Engine {
        sf,
        opts: opts.clone(),
        basis,
        state,
        x,
        factor,
        iterations: aux_engine.iterations,
        limit,
        degenerate_run: 0,
    };
    if engine.refactor().is_err() {
        return Outcome::Trouble(engine.iterations);
    }
    let end = engine.run_dual(&cost);
    if let Some(out) = finish(end, &engine) {
        return out;
    }
    // Drift can leave small dual infeasibilities; polish with primal pivots.
    if engine.dual_infeasibility(&cost) > opts.optimality_tol {
        engine.degenerate_run = 0;
        let end = engine.run_primal(&cost);
        if let Some(out) = finish(end, &engine) {
            return out;
        }
    }
    Outcome::Solved(engine)
}

fn extract(problem: &LpProblem, pre: &Presolved, engine: &Engine) -> LpSolution {
    let sense = match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let n = problem.num_columns();
    let mut x = vec![0.0; n];
    let mut col_status = vec![VarStatus::AtLower; n];
    for (j, r) in pre.removed.iter().enumerate() {
        if let Some((v, st)) = *r {
            x[j] = v;
            col_status[j] = st;
        }
    }
    for (k, &j) in pre.col_map.iter().enumerate() {
        x[j] = engine.x[k];
        col_status[j] = match engine.state[k] {
            VarState::Basic(_) => VarStatus::Basic,
            VarState::Lower => VarStatus::AtLower,
            VarState::Upper => VarStatus::AtUpper,
        };
    }
    let y = engine.duals(&engine.sf.cost);
    let mut row_prices = vec![0.0; problem.num_rows()];
    for (r, &i) in pre.row_map.iter().enumerate() {
        row_prices[i] = sense * y[r] * pre.row_flip[r];
    }
    let mut reduced_costs: Vec<f64> = problem.columns().iter().map(|c| c.obj).collect();
    for (row, &price) in problem.rows().iter().zip(&row_prices) {
        if price != 0.0 {
            for &(j, a) in &row.coeffs {
                reduced_costs[j] -= price * a;
            }
        }
    }
    for (j, st) in col_status.iter().enumerate() {
        if *st == VarStatus::Basic {
            reduced_costs[j] = 0.0;
        }
    }
    LpSolution {
        status: Status::Optimal,
        objective: problem.objective_value(&x),
        x,
        row_prices,
        reduced_costs,
        col_status,
        iterations: engine.iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::RowKind::*;

    fn both(p: &LpProblem) -> (LpSolution, LpSolution) {
        let o = SolverOptions::default();
        (solve(p, &o).unwrap(), solve_dual_simplex(p, &o).unwrap())
    }

    #[test]
    fn one_variable_max() {
        let mut p = LpProblem::new(Sense::Maximize);
        let x = p.add_column("x", 1.0, 0.0, 2.0);
        p.add_row("c", [(x, 1.0)], Le, 1.0);
        for s in [both(&p).0, both(&p).1] {
            assert_eq!(s.status, Status::Optimal);
            assert!((s.x[0] - 1.0).abs() < 1e-12);
            assert!((s.objective - 1.0).abs() < 1e-12);
            assert!((s.row_prices[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn textbook_min_with_ge_rows() {
        // min 2x + 3y  s.t. x + y >= 4, x + 3y >= 6, x <= 3
        let mut p = LpProblem::new(Sense::Minimize);
        let x = p.add_column("x", 2.0, 0.0, 3.0);
        let y = p.add_column("y", 3.0, 0.0, f64::INFINITY);
        p.add_row("a", [(x, 1.0), (y, 1.0)], Ge, 4.0);
        p.add_row("b", [(x, 1.0), (y, 3.0)], Ge, 6.0);
        let (a, b) = both(&p);
        for s in [a, b] {
            assert_eq!(s.status, Status::Optimal);
            assert!((s.objective - 9.0).abs() < 1e-9, "{}", s.objective);
            let k = s.kkt(&p);
            assert!(k.primal <= 1e-9 && k.dual <= 1e-9 && k.duality_identity <= 1e-9, "{k:?}");
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut p = LpProblem::new(Sense::Maximize);
        let x = p.add_column("x", 1.0, 0.0, f64::INFINITY);
        p.add_row("r", [(x, 1.0)], Ge, 1.0);
        let (a, b) = both(&p);
        assert_eq!(a.status, Status::Unbounded);
        assert_eq!(b.status, Status::Unbounded);

        let mut p = LpProblem::new(Sense::Maximize);
        let x = p.add_column("x", 1.0, 0.0, 5.0);
        p.add_row("r1", [(x, 1.0)], Ge, 3.0);
        p.add_row("r2", [(x, 1.0)], Le, 2.0);
        let (a, b) = both(&p);
        assert_eq!(a.status, Status::Infeasible);
        assert_eq!(b.status, Status::Infeasible);
    }

    #[test]
    fn presolve_handles_empty_and_fixed() {
        let mut p = LpProblem::new(Sense::Minimize);
        let x = p.add_column("x", 1.0, 2.0, 2.0);
        p.add_column("y", -1.0, 0.0, 4.0);
        let z = p.add_column("z", 1.0, 1.0, f64::INFINITY);
        p.add_row("fixed_only", [(x, 1.0)], Le, 5.0);
        p.add_row("empty", [], Ge, -1.0);
        p.add_row("zx", [(z, 1.0), (x, 1.0)], Ge, 4.0);
        let (a, b) = both(&p);
        for s in [a, b] {
            assert_eq!(s.status, Status::Optimal);
            assert_eq!(s.x[0], 2.0);
            assert_eq!(s.x[1], 4.0);
            assert!((s.x[2] - 2.0).abs() < 1e-12);
            assert!((s.objective - 0.0).abs() < 1e-12);
            assert_eq!(s.row_prices[1], 0.0);
        }
        let mut p = LpProblem::new(Sense::Minimize);
        p.add_column("x", 0.0, 0.0, 1.0);
        p.add_row("bad", [], Eq, 1.0);
        assert_eq!(solve(&p, &SolverOptions::default()).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn equality_rows_and_degenerate_vertex() {
        // max x + y s.t. x + y = 1, x - y <= 0, x <= 1, y <= 1 (degenerate at the optimum)
        let mut p = LpProblem::new(Sense::Maximize);
        let x = p.add_column("x", 1.0, 0.0, 1.0);
        let y = p.add_column("y", 1.0, 0.0, 1.0);
        p.add_row("e", [(x, 1.0), (y, 1.0)], Eq, 1.0);
        p.add_row("d", [(x, 1.0), (y, -1.0)], Le, 0.0);
        let (a, b) = both(&p);
        assert!((a.objective - 1.0).abs() < 1e-12);
        assert!((b.objective - 1.0).abs() < 1e-12);
    }
}
