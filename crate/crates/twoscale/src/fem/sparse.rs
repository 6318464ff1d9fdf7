//! Compressed sparse row matrices and direct factorizations.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use super::FemError;

/// Square or rectangular CSR matrix with sorted, duplicate-free rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Builds from `(row, col, value)` triplets, summing duplicates in a fixed order.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Csr {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        match self.indices[a..b].binary_search(&c) {
            Ok(k) => self.values[a + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `x·(A y)`
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.matvec(y)).map(|(a, b)| a * b).sum()
    }

    /// `a·A + b·B` for matrices of equal shape.
    pub fn axpby(&self, a: f64, other: &Csr, b: f64) -> Csr {
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.nrows {
            trip.extend(self.row(r).map(|(c, v)| (r, c, a * v)));
            trip.extend(other.row(r).map(|(c, v)| (r, c, b * v)));
        }
        Csr::from_triplets(self.nrows, self.ncols, trip)
    }

    /// Submatrix on the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Csr {
        let mut map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            map[c] = k;
        }
        let mut trip = Vec::new();
        for (k, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if map[c] != usize::MAX {
                    trip.push((k, map[c], v));
                }
            }
        }
        Csr::from_triplets(rows.len(), cols.len(), trip)
    }

    /// Largest `|A_ij − A_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>, FemError> {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            trip.extend(self.row(r).map(|(c, v)| Triplet::new(r, c, v)));
        }
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .map_err(|e| FemError::Factorization(format!("{e:?}")))
    }
}

enum Kind {
    Cholesky(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

/// A sparse direct factorization with fill-reducing ordering.
pub struct Factor {
    n: usize,
    kind: Kind,
}

impl std::fmt::Debug for Factor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let k = match self.kind {
            Kind::Cholesky(_) => "cholesky",
            Kind::Lu(_) => "lu",
        };
        write!(f, "Factor({k}, n={})", self.n)
    }
}

impl Factor {
    /// Cholesky factorization; fails on matrices that are not positive definite.
    pub fn cholesky(a: &Csr) -> Result<Self, FemError> {
        let llt = a
            .to_faer()?
            .sp_cholesky(Side::Lower)
            .map_err(|e| FemError::Factorization(format!("cholesky: {e:?}")))?;
        Ok(Factor {
            n: a.nrows,
            kind: Kind::Cholesky(llt),
        })
    }

    /// LU factorization for symmetric indefinite or general square matrices.
    pub fn lu(a: &Csr) -> Result<Self, FemError> {
        let lu = a
            .to_faer()?
            .sp_lu()
            .map_err(|e| FemError::Factorization(format!("lu: {e:?}")))?;
        Ok(Factor {
            n: a.nrows,
            kind: Kind::Lu(lu),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        if rhs.is_empty() {
            return vec![];
        }
        let b = Mat::<f64>::from_fn(self.n, rhs.len(), |i, j| rhs[j][i]);
        let x = match &self.kind {
            Kind::Cholesky(f) => f.solve(&b),
            Kind::Lu(f) => f.solve(&b),
        };
        (0..rhs.len())
            .map(|j| (0..self.n).map(|i| x[(i, j)]).collect())
            .collect()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.solve_many(&[rhs.to_vec()]).pop().unwrap()
    }
}
