//! Ground truth: RK4 on the directly discretized nonlinear PDE, or the
//! closed-form solution sampled on the grid.

use super::rk4::{self, OdeRhs};
use super::check_blocks;
use crate::error::Result;
use crate::grid::Grid;
use crate::pde::QuadraticPDE;
use crate::sparse::Csr;

struct Nonlinear<'a> {
    pde: &'a QuadraticPDE,
    grid: &'a Grid,
}

impl OdeRhs for Nonlinear<'_> {
    fn dim(&self) -> usize {
        self.grid.n
    }

    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&self.pde.rhs(y, self.grid, t)?);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub substeps: usize,
}

pub fn reference_nonlinear_solve(
    pde: &QuadraticPDE,
    grid: &Grid,
    dt: f64,
    t_end: f64,
    substeps: Option<usize>,
) -> Result<Trajectory> {
    let steps = rk4::sample_count(dt, t_end)?;
    let lin = Csr::from_rows(grid.n, &pde.linear.rows(grid, 0.0)?)?;
    let substeps = rk4::choose_substeps(rk4::spectral_radius(&lin), dt, substeps)?;
    let mut y = pde.initial.sample(&grid.points(), 0.0);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let label = ["u".to_string()];
    rk4::integrate(&Nonlinear { pde, grid }, &mut y, dt, steps, substeps, |_, t, y| {
        check_blocks(t, &[crate::par::norm(y)], &label)?;
        times.push(t);
        states.push(y.to_vec());
        Ok(())
    })?;
    Ok(Trajectory { times, states, substeps })
}

/// The exact solution on the grid when the problem has one, otherwise the
/// RK4 reference.
pub fn reference_series(pde: &QuadraticPDE, grid: &Grid, dt: f64, t_end: f64, substeps: Option<usize>) -> Result<Trajectory> {
    match &pde.exact {
        Some(exact) => {
            let steps = rk4::sample_count(dt, t_end)?;
            let xs = grid.points();
            let times: Vec<f64> = (0..=steps).map(|s| s as f64 * dt).collect();
            let states = times.iter().map(|&t| exact.sample(&xs, t)).collect();
            Ok(Trajectory { times, states, substeps: 0 })
        }
        None => reference_nonlinear_solve(pde, grid, dt, t_end, substeps),
    }
}
