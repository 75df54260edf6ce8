//! Compressed sparse column matrices and an LDL^T factorization for
//! quasi-definite systems.
//!
//! The factorization follows the up-looking algorithm used by QDLDL: an
//! elimination-tree symbolic pass followed by a pivot-free numeric pass.
//! Quasi-definiteness (enforced through static regularization by the caller)
//! guarantees a signed diagonal D, so no pivoting is required. Tiny pivots
//! are pushed away from zero according to an expected-sign vector.

/// Column-compressed sparse matrix.
#[derive(Debug, Clone)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowind: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CscMatrix {
            nrows,
            ncols,
            colptr: vec![0; ncols + 1],
            rowind: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let (m, _pos) = Self::from_triplets_mapped(nrows, ncols, triplets);
        m
    }

    /// Like [`CscMatrix::from_triplets`] but also returns, for each input
    /// triplet, the index into `values` it was accumulated into. Lets callers
    /// refresh numeric values without redoing the symbolic work.
    pub fn from_triplets_mapped(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> (Self, Vec<usize>) {
        let mut colptr = vec![0usize; ncols + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet out of bounds");
            colptr[c + 1] += 1;
        }
        for c in 0..ncols {
            colptr[c + 1] += colptr[c];
        }
        // Scatter triplet ids into column order.
        let mut next = colptr.clone();
        let mut order = vec![0usize; triplets.len()];
        for (t, &(_, c, _)) in triplets.iter().enumerate() {
            order[next[c]] = t;
            next[c] += 1;
        }
        // Sort each column by row, then merge duplicates.
        let mut rowind = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut pos = vec![0usize; triplets.len()];
        let mut out_colptr = vec![0usize; ncols + 1];
        for c in 0..ncols {
            let ids = &mut order[colptr[c]..colptr[c + 1]];
            ids.sort_by_key(|&t| triplets[t].0);
            let mut last_row = usize::MAX;
            for &t in ids.iter() {
                let (r, _, v) = triplets[t];
                if r == last_row {
                    let k = values.len() - 1;
                    values[k] += v;
                    pos[t] = k;
                } else {
                    pos[t] = values.len();
                    rowind.push(r);
                    values.push(v);
                    last_row = r;
                }
            }
            out_colptr[c + 1] = values.len();
        }
        (
            CscMatrix {
                nrows,
                ncols,
                colptr: out_colptr,
                rowind,
                values,
            },
            pos,
        )
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// y += alpha * A * x
    pub fn axpy(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for c in 0..self.ncols {
            let xc = alpha * x[c];
            if xc == 0.0 {
                continue;
            }
            for p in self.colptr[c]..self.colptr[c + 1] {
                y[self.rowind[p]] += self.values[p] * xc;
            }
        }
    }

    /// y += alpha * A^T * x
    pub fn axpy_transpose(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for c in 0..self.ncols {
            let mut s = 0.0;
            for p in self.colptr[c]..self.colptr[c + 1] {
                s += self.values[p] * x[self.rowind[p]];
            }
            y[c] += alpha * s;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.axpy(1.0, x, &mut y);
        y
    }
}

/// Reverse Cuthill-McKee ordering of a symmetric sparsity pattern.
///
/// `edges` lists index pairs (i, j); self-loops are ignored. Returns `order`
/// with `order[new] = old`. Multi-period KKT systems are block-banded, for
/// which RCM keeps factorization fill low without a full minimum-degree code.
pub fn reverse_cuthill_mckee(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(i, j) in edges {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(|a| a.len()).collect();

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::new();
    let mut seeds: Vec<usize> = (0..n).collect();
    seeds.sort_by_key(|&i| degree[i]);

    for &seed in &seeds {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        queue.push_back(seed);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            nbrs.sort_by_key(|&v| degree[v]);
            for v in nbrs {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// Symbolic structure of the LDL^T factorization (elimination tree and
/// column counts), computed once per sparsity pattern.
pub struct LdlSymbolic {
    n: usize,
    parent: Vec<isize>,
    l_colptr: Vec<usize>,
}

impl LdlSymbolic {
    /// `upper` must hold the upper triangle (including a full diagonal) with
    /// sorted rows per column.
    pub fn analyze(upper: &CscMatrix) -> Self {
        let n = upper.ncols;
        assert_eq!(upper.nrows, n);
        let mut parent = vec![-1isize; n];
        let mut l_nz = vec![0usize; n];
        let mut flag = vec![usize::MAX; n];

        for j in 0..n {
            flag[j] = j;
            for p in upper.colptr[j]..upper.colptr[j + 1] {
                let mut i = upper.rowind[p];
                assert!(i <= j, "matrix must be upper triangular");
                while i != j && flag[i] != j {
                    if parent[i] == -1 {
                        parent[i] = j as isize;
                    }
                    l_nz[i] += 1;
                    flag[i] = j;
                    i = parent[i] as usize;
                }
            }
        }

        let mut l_colptr = vec![0usize; n + 1];
        for j in 0..n {
            l_colptr[j + 1] = l_colptr[j] + l_nz[j];
        }
        LdlSymbolic {
            n,
            parent,
            l_colptr,
        }
    }

    pub fn l_nnz(&self) -> usize {
        self.l_colptr[self.n]
    }
}

/// Numeric LDL^T factor of a quasi-definite matrix.
pub struct LdlFactor {
    n: usize,
    l_colptr: Vec<usize>,
    l_rowind: Vec<usize>,
    l_values: Vec<f64>,
    d: Vec<f64>,
    d_inv: Vec<f64>,
    /// Number of pivots nudged by dynamic regularization.
    pub reg_bumps: usize,
}

impl LdlFactor {
    /// Factors K = L D L^T where `upper` is the upper triangle of K.
    ///
    /// `signs[i]` gives the expected sign of D[i] (+1 or -1); pivots with
    /// magnitude below `eps` are replaced by `signs[i] * eps`.
    pub fn factor(upper: &CscMatrix, sym: &LdlSymbolic, signs: &[i8], eps: f64) -> Self {
        let n = sym.n;
        assert_eq!(upper.ncols, n);
        assert_eq!(signs.len(), n);
        let l_nnz = sym.l_nnz();
        let mut l_rowind = vec![0usize; l_nnz];
        let mut l_values = vec![0.0f64; l_nnz];
        let mut d = vec![0.0f64; n];
        let mut d_inv = vec![0.0f64; n];
        let mut next = sym.l_colptr[..n].to_vec();

        let mut y_val = vec![0.0f64; n];
        let mut y_mark = vec![false; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut reg_bumps = 0usize;

        for k in 0..n {
            let mut nnz_y = 0usize;
            d[k] = 0.0;
            for p in upper.colptr[k]..upper.colptr[k + 1] {
                let i = upper.rowind[p];
                let v = upper.values[p];
                if i == k {
                    d[k] += v;
                    continue;
                }
                y_val[i] += v;
                if !y_mark[i] {
                    // Walk the elimination tree to collect the reach of i.
                    y_mark[i] = true;
                    elim[0] = i;
                    let mut len = 1usize;
                    let mut next_i = sym.parent[i];
                    while next_i != -1 && (next_i as usize) < k {
                        let ni = next_i as usize;
                        if y_mark[ni] {
                            break;
                        }
                        y_mark[ni] = true;
                        elim[len] = ni;
                        len += 1;
                        next_i = sym.parent[ni];
                    }
                    while len > 0 {
                        len -= 1;
                        y_idx[nnz_y] = elim[len];
                        nnz_y += 1;
                    }
                }
            }

            // Process the pattern in topological order (reverse of y_idx).
            for t in (0..nnz_y).rev() {
                let j = y_idx[t];
                let yj = y_val[j];
                y_val[j] = 0.0;
                y_mark[j] = false;
                for p in sym.l_colptr[j]..next[j] {
                    y_val[l_rowind[p]] -= l_values[p] * yj;
                }
                let l_kj = yj * d_inv[j];
                d[k] -= yj * l_kj;
                l_rowind[next[j]] = k;
                l_values[next[j]] = l_kj;
                next[j] += 1;
            }

            let sign = if signs[k] >= 0 { 1.0 } else { -1.0 };
            if d[k].abs() < eps || d[k] * sign < 0.0 {
                d[k] = sign * eps.max(d[k].abs());
                reg_bumps += 1;
            }
            d_inv[k] = 1.0 / d[k];
        }

        LdlFactor {
            n,
            l_colptr: sym.l_colptr.clone(),
            l_rowind,
            l_values,
            d,
            d_inv,
            reg_bumps,
        }
    }

    /// Solves K x = b in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(x.len(), n);
        // L y = b
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.l_colptr[j]..self.l_colptr[j + 1] {
                    x[self.l_rowind[p]] -= self.l_values[p] * xj;
                }
            }
        }
        // D z = y
        for j in 0..n {
            x[j] *= self.d_inv[j];
        }
        // L^T x = z
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in self.l_colptr[j]..self.l_colptr[j + 1] {
                s -= self.l_values[p] * x[self.l_rowind[p]];
            }
            x[j] = s;
        }
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }
}
