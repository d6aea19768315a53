//! Vector and sparse kernels with a sequential and a rayon implementation.
//! The top-level functions dispatch on the `parallel` feature.

use crate::sparse::Csr;

/// Below this many rows the parallel kernels fall back to the sequential ones.
pub const PAR_MIN_LEN: usize = 4096;

pub mod seq {
    use super::Csr;

    pub fn spmv(a: &Csr, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = a.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, &v)| v * x[c as usize]).sum();
        }
    }

    /// `y = x + c·k`
    pub fn axpy_into(y: &mut [f64], x: &[f64], c: f64, k: &[f64]) {
        for ((y, &x), &k) in y.iter_mut().zip(x).zip(k) {
            *y = x + c * k;
        }
    }

    /// `y += c·(k1 + 2k2 + 2k3 + k4)`
    pub fn rk4_combine(y: &mut [f64], c: f64, k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]) {
        for i in 0..y.len() {
            y[i] += c * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
    }

    pub fn norm_sq(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    pub fn map<T, R, F>(items: &[T], _workers: usize, f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        items.iter().map(f).collect()
    }
}

#[cfg(feature = "parallel")]
pub mod par {
    use rayon::prelude::*;

    use super::{Csr, PAR_MIN_LEN};

    pub fn spmv(a: &Csr, x: &[f64], y: &mut [f64]) {
        if y.len() < PAR_MIN_LEN {
            return super::seq::spmv(a, x, y);
        }
        y.par_iter_mut().enumerate().with_min_len(1024).for_each(|(i, yi)| {
            let (cols, vals) = a.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, &v)| v * x[c as usize]).sum();
        });
    }

    pub fn axpy_into(y: &mut [f64], x: &[f64], c: f64, k: &[f64]) {
        if y.len() < PAR_MIN_LEN {
            return super::seq::axpy_into(y, x, c, k);
        }
        y.par_iter_mut()
            .zip(x.par_iter())
            .zip(k.par_iter())
            .with_min_len(4096)
            .for_each(|((y, &x), &k)| *y = x + c * k);
    }

    pub fn rk4_combine(y: &mut [f64], c: f64, k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]) {
        if y.len() < PAR_MIN_LEN {
            return super::seq::rk4_combine(y, c, k1, k2, k3, k4);
        }
        y.par_iter_mut().enumerate().with_min_len(4096).for_each(|(i, y)| {
            *y += c * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        });
    }

    pub fn norm_sq(x: &[f64]) -> f64 {
        if x.len() < PAR_MIN_LEN {
            return super::seq::norm_sq(x);
        }
        x.par_iter().with_min_len(4096).map(|v| v * v).sum()
    }

    /// Run `f` over `items` on a pool of `workers` threads, keeping input order.
    pub fn map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
            Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
            Err(_) => items.iter().map(f).collect(),
        }
    }
}

#[cfg(feature = "parallel")]
pub use self::par as active;
#[cfg(not(feature = "parallel"))]
pub use self::seq as active;

pub fn spmv(a: &Csr, x: &[f64], y: &mut [f64]) {
    active::spmv(a, x, y)
}

pub fn axpy_into(y: &mut [f64], x: &[f64], c: f64, k: &[f64]) {
    active::axpy_into(y, x, c, k)
}

pub fn rk4_combine(y: &mut [f64], c: f64, k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]) {
    active::rk4_combine(y, c, k1, k2, k3, k4)
}

pub fn norm_sq(x: &[f64]) -> f64 {
    active::norm_sq(x)
}

pub fn norm(x: &[f64]) -> f64 {
    norm_sq(x).sqrt()
}

pub fn map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    active::map(items, workers, f)
}
