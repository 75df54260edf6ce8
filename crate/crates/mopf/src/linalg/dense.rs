//! Dense LU factorization with partial pivoting.
//!
//! The per-period local solver condenses its KKT system into a modest dense
//! symmetric indefinite matrix; LU with partial pivoting is a robust way to
//! solve it without specialised symmetric pivoting.

/// Row-major dense matrix holder for LU factorization.
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    singular: bool,
}

impl DenseLu {
    /// Factorizes an `n x n` row-major matrix in place.
    pub fn factor(n: usize, a: &[f64]) -> Self {
        assert_eq!(a.len(), n * n);
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut singular = false;

        for k in 0..n {
            // Partial pivot: largest magnitude in column k at or below the diagonal.
            let mut piv = k;
            let mut best = lu[k * n + k].abs();
            for i in (k + 1)..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 {
                singular = true;
                continue;
            }
            if piv != k {
                perm.swap(k, piv);
                for j in 0..n {
                    lu.swap(k * n + j, piv * n + j);
                }
            }
            let d = lu[k * n + k];
            for i in (k + 1)..n {
                let m = lu[i * n + k] / d;
                lu[i * n + k] = m;
                if m != 0.0 {
                    for j in (k + 1)..n {
                        lu[i * n + j] -= m * lu[k * n + j];
                    }
                }
            }
        }

        DenseLu {
            n,
            lu,
            perm,
            singular,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Smallest absolute diagonal of U, as a cheap conditioning signal.
    pub fn min_pivot(&self) -> f64 {
        (0..self.n)
            .map(|k| self.lu[k * self.n + k].abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Solves `A x = b`, returning `x`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        // Forward: L y = P b (unit lower triangular).
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        // Backward: U x = y.
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[i * n + j] * x[j];
            }
            let d = self.lu[i * n + i];
            x[i] = if d != 0.0 { s / d } else { 0.0 };
        }
        x
    }
}
