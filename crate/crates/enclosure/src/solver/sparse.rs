use num_complex::Complex64 as C64;

use super::krylov::{LinearOperator, Preconditioner};

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<C64>,
}

impl CsrMatrix {
    /// Builds from per-row (column, value) lists; duplicates are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, C64)>>) -> Self {
        let n = rows.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix { n, indptr, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let row = &self.indices[self.indptr[r]..self.indptr[r + 1]];
        match row.binary_search(&c) {
            Ok(k) => self.values[self.indptr[r] + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        for r in 0..self.n {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.matvec(x, y)
    }
}

/// Incomplete LU with zero fill-in.
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Option<Self> {
        let mut lu = a.clone();
        let n = lu.n;
        let mut diag = vec![usize::MAX; n];
        for r in 0..n {
            for k in lu.indptr[r]..lu.indptr[r + 1] {
                if lu.indices[k] == r {
                    diag[r] = k;
                }
            }
            if diag[r] == usize::MAX {
                return None;
            }
        }
        let mut pos = vec![usize::MAX; n];
        for r in 0..n {
            for k in lu.indptr[r]..lu.indptr[r + 1] {
                pos[lu.indices[k]] = k;
            }
            for k in lu.indptr[r]..lu.indptr[r + 1] {
                let c = lu.indices[k];
                if c >= r {
                    break;
                }
                let piv = lu.values[diag[c]];
                if piv.norm() == 0.0 {
                    return None;
                }
                let f = lu.values[k] / piv;
                lu.values[k] = f;
                for kk in diag[c] + 1..lu.indptr[c + 1] {
                    let cc = lu.indices[kk];
                    if pos[cc] != usize::MAX {
                        let sub = f * lu.values[kk];
                        lu.values[pos[cc]] -= sub;
                    }
                }
            }
            for k in lu.indptr[r]..lu.indptr[r + 1] {
                pos[lu.indices[k]] = usize::MAX;
            }
            if lu.values[diag[r]].norm() == 0.0 {
                return None;
            }
        }
        Some(Ilu0 { lu, diag })
    }
}

impl Preconditioner for Ilu0 {
    fn apply(&self, r: &[C64], z: &mut [C64]) {
        let a = &self.lu;
        for i in 0..a.n {
            let mut acc = r[i];
            for k in a.indptr[i]..self.diag[i] {
                acc -= a.values[k] * z[a.indices[k]];
            }
            z[i] = acc;
        }
        for i in (0..a.n).rev() {
            let mut acc = z[i];
            for k in self.diag[i] + 1..a.indptr[i + 1] {
                acc -= a.values[k] * z[a.indices[k]];
            }
            z[i] = acc / a.values[self.diag[i]];
        }
    }
}
