//! Basis factorization for the revised simplex.
//!
//! Basis columns with a single nonzero (slacks, artificials and singleton
//! structurals) are handled directly; the remaining "kernel" block is
//! factored densely with partial pivoting. Pivots between refreshes are
//! kept as a product-form eta file.

pub(crate) type SparseCol = Vec<(usize, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Singular;

/// Dense `PA = LU` with partial pivoting, row-major storage.
#[derive(Debug, Clone)]
pub(crate) struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    /// `perm[i]` is the original row placed at position `i`.
    perm: Vec<usize>,
}

impl DenseLu {
    pub(crate) fn factor(n: usize, mut a: Vec<f64>, pivot_tol: f64) -> Result<Self, Singular> {
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut best = k;
            let mut best_abs = a[k * n + k].abs();
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > best_abs {
                    best = i;
                    best_abs = v;
                }
            }
            if best_abs < pivot_tol {
                return Err(Singular);
            }
            if best != k {
                for c in 0..n {
                    a.swap(k * n + c, best * n + c);
                }
                perm.swap(k, best);
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                if f == 0.0 {
                    continue;
                }
                a[i * n + k] = f;
                for c in k + 1..n {
                    a[i * n + c] -= f * a[k * n + c];
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    /// Solves `A x = b`.
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu[i * n + k] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lu[i * n + k] * x[k];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    /// Solves `Aᵀ x = b`.
    pub(crate) fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        // Uᵀ w = b
        let mut w = b.to_vec();
        for i in 0..n {
            let mut s = w[i];
            for k in 0..i {
                s -= self.lu[k * n + i] * w[k];
            }
            w[i] = s / self.lu[i * n + i];
        }
        // Lᵀ u = w
        for i in (0..n).rev() {
            let mut s = w[i];
            for k in i + 1..n {
                s -= self.lu[k * n + i] * w[k];
            }
            w[i] = s;
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = w[i];
        }
        x
    }
}

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) struct BasisFactor {
    m: usize,
    /// Per basis position: `(row, value)` when the column is a singleton.
    unit: Vec<Option<(usize, f64)>>,
    /// Per row: whether a singleton position covers it.
    owned: Vec<bool>,
    kernel_rows: Vec<usize>,
    kernel_pos: Vec<usize>,
    kernel_cols: Vec<usize>,
    lu: DenseLu,
    etas: Vec<Eta>,
}

impl BasisFactor {
    pub(crate) fn new(cols: &[SparseCol], basis: &[usize], pivot_tol: f64) -> Result<Self, Singular> {
        let m = basis.len();
        let mut unit = vec![None; m];
        let mut owned = vec![false; m];
        let mut kernel_pos = Vec::new();
        for (p, &j) in basis.iter().enumerate() {
            let col = &cols[j];
            if col.len() == 1 && !owned[col[0].0] && col[0].1.abs() >= pivot_tol {
                owned[col[0].0] = true;
                unit[p] = Some(col[0]);
            } else {
                kernel_pos.push(p);
            }
        }
        let kernel_rows: Vec<usize> = (0..m).filter(|&i| !owned[i]).collect();
        if kernel_rows.len() != kernel_pos.len() {
            return Err(Singular);
        }
        let k = kernel_rows.len();
        let mut row_index = vec![usize::MAX; m];
        for (r, &i) in kernel_rows.iter().enumerate() {
            row_index[i] = r;
        }
        let kernel_cols: Vec<usize> = kernel_pos.iter().map(|&p| basis[p]).collect();
        let mut dense = vec![0.0; k * k];
        for (c, &j) in kernel_cols.iter().enumerate() {
            for &(i, a) in &cols[j] {
                let r = row_index[i];
                if r != usize::MAX {
                    dense[r * k + c] += a;
                }
            }
        }
        let lu = DenseLu::factor(k, dense, pivot_tol)?;
        Ok(Self {
            m,
            unit,
            owned,
            kernel_rows,
            kernel_pos,
            kernel_cols,
            lu,
            etas: Vec::new(),
        })
    }

    pub(crate) fn num_etas(&self) -> usize {
        self.etas.len()
    }

    /// Records that basis position `pos` was replaced by a column whose
    /// FTRAN image (before the replacement) is `alpha`.
    pub(crate) fn push_eta(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, a)| i != pos && a.abs() > 1e-16)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            entries,
        });
    }

    /// Solves `B x = rhs`; `rhs` is indexed by row, the result by basis position.
    pub(crate) fn ftran(&self, cols: &[SparseCol], rhs: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.m];
        let z_rhs: Vec<f64> = self.kernel_rows.iter().map(|&i| rhs[i]).collect();
        let z = self.lu.solve(&z_rhs);
        let mut tmp = rhs.to_vec();
        for (c, (&p, &j)) in self.kernel_pos.iter().zip(&self.kernel_cols).enumerate() {
            x[p] = z[c];
            if z[c] != 0.0 {
                for &(i, a) in &cols[j] {
                    tmp[i] -= a * z[c];
                }
            }
        }
        for (p, u) in self.unit.iter().enumerate() {
            if let Some((i, a)) = *u {
                x[p] = tmp[i] / a;
            }
        }
        for eta in &self.etas {
            let xp = x[eta.pos] / eta.pivot;
            x[eta.pos] = xp;
            if xp != 0.0 {
                for &(i, a) in &eta.entries {
                    x[i] -= a * xp;
                }
            }
        }
        x
    }

    /// Solves `yᵀ B = cᵀ`; `c` is indexed by basis position, `y` by row.
    pub(crate) fn btran(&self, cols: &[SparseCol], c: &[f64]) -> Vec<f64> {
        let mut c = c.to_vec();
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.pos];
            for &(i, a) in &eta.entries {
                s -= c[i] * a;
            }
            c[eta.pos] = s / eta.pivot;
        }
        let mut y = vec![0.0; self.m];
        for (p, u) in self.unit.iter().enumerate() {
            if let Some((i, a)) = *u {
                y[i] = c[p] / a;
            }
        }
        let rhs: Vec<f64> = self
            .kernel_pos
            .iter()
            .zip(&self.kernel_cols)
            .map(|(&q, &j)| {
                let mut s = c[q];
                for &(i, a) in &cols[j] {
                    if self.owned[i] {
                        s -= y[i] * a;
                    }
                }
                s
            })
            .collect();
        let z = self.lu.solve_transpose(&rhs);
        for (r, &i) in self.kernel_rows.iter().enumerate() {
            y[i] = z[r];
        }
        y
    }
}
