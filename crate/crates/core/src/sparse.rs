//! Compressed sparse row storage with sorted columns.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub data: Vec<f64>,
}

/// Coordinate triplets collected during assembly.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    pub rows: Vec<u32>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl Triplets {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        if val != 0.0 {
            self.rows.push(row as u32);
            self.cols.push(col as u32);
            self.vals.push(val);
        }
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn append(&mut self, other: &mut Triplets) {
        self.rows.append(&mut other.rows);
        self.cols.append(&mut other.cols);
        self.vals.append(&mut other.vals);
    }
}

impl Csr {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Csr {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Csr {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n as u32).collect(),
            data: vec![1.0; n],
        }
    }

    /// Compress triplets; duplicates are summed and exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, t: Triplets) -> Result<Self> {
        if ncols > u32::MAX as usize || nrows > u32::MAX as usize {
            return Err(Error::Unsupported(format!(
                "matrix of shape {nrows}x{ncols} exceeds 32-bit indexing"
            )));
        }
        if let Some(bad) = t.rows.iter().zip(&t.cols).find(|(&r, &c)| r as usize >= nrows || c as usize >= ncols) {
            return Err(Error::IndexOutOfRange(format!(
                "entry ({}, {}) outside {nrows}x{ncols}",
                bad.0, bad.1
            )));
        }
        let mut counts = vec![0usize; nrows + 1];
        for &r in &t.rows {
            counts[r as usize + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0u32; t.len()];
        let mut vals = vec![0.0; t.len()];
        for k in 0..t.len() {
            let r = t.rows[k] as usize;
            cols[next[r]] = t.cols[k];
            vals[next[r]] = t.vals[k];
            next[r] += 1;
        }
        drop(t);

        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(cols.len());
        let mut data = Vec::with_capacity(cols.len());
        indptr.push(0);
        let mut row: Vec<(u32, f64)> = Vec::new();
        for i in 0..nrows {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            row.sort_unstable_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    indices.push(c);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Csr {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        })
    }

    /// Build from per-row `(column, value)` lists.
    pub fn from_rows(ncols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut t = Triplets::new();
        for (i, r) in rows.iter().enumerate() {
            for &(j, v) in r {
                t.push(i, j, v);
            }
        }
        Csr::from_triplets(rows.len(), ncols, t)
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.data[a..b])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    pub fn max_row_nnz(&self) -> usize {
        (0..self.nrows).map(|i| self.row_nnz(i)).max().unwrap_or(0)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&(j as u32)) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Max absolute row sum (the induced ∞-norm).
    pub fn max_row_sum(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `Σ_k w_k · M_k` over matrices of equal shape.
    pub fn linear_combination(parts: &[(f64, &Csr)]) -> Result<Csr> {
        let (nrows, ncols) = match parts.first() {
            Some((_, m)) => (m.nrows, m.ncols),
            None => return Err(Error::Domain("empty linear combination".into())),
        };
        if parts.iter().any(|(_, m)| m.nrows != nrows || m.ncols != ncols) {
            return Err(Error::Domain("shape mismatch in linear combination".into()));
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        let mut acc: Vec<(u32, f64)> = Vec::new();
        for i in 0..nrows {
            acc.clear();
            for &(w, m) in parts {
                if w == 0.0 {
                    continue;
                }
                let (c, v) = m.row(i);
                acc.extend(c.iter().zip(v).map(|(&c, &v)| (c, w * v)));
            }
            acc.sort_unstable_by_key(|e| e.0);
            let mut k = 0;
            while k < acc.len() {
                let c = acc[k].0;
                let mut v = 0.0;
                while k < acc.len() && acc[k].0 == c {
                    v += acc[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    indices.push(c);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Csr {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        })
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Csr) -> Result<Csr> {
        if self.ncols != other.nrows {
            return Err(Error::Domain(format!(
                "cannot multiply {}x{} by {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut t = Triplets::new();
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            for (&k, &a) in ca.iter().zip(va) {
                let (cb, vb) = other.row(k as usize);
                for (&j, &b) in cb.iter().zip(vb) {
                    t.push(i, j as usize, a * b);
                }
            }
        }
        Csr::from_triplets(self.nrows, other.ncols, t)
    }

    /// The rows `0..k` of `self`.
    pub fn top_rows(&self, k: usize) -> Csr {
        let k = k.min(self.nrows);
        let end = self.indptr[k];
        Csr {
            nrows: k,
            ncols: self.ncols,
            indptr: self.indptr[..=k].to_vec(),
            indices: self.indices[..end].to_vec(),
            data: self.data[..end].to_vec(),
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                row[j as usize] = x;
            }
        }
        d
    }

    /// `y = A x`, dispatching to the parallel kernel when enabled.
    pub fn spmv(&self, x: &[f64], y: &mut [f64]) {
        crate::par::spmv(self, x, y)
    }
}
