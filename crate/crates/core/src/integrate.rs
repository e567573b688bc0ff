//! Implicit Euler trajectories of the adjoint system `ẋ = Aᵀx`, `x(0) = cᵢ`.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::problems::StateSpaceSystem;

#[derive(Debug, Clone)]
pub struct SnapshotSet {
    /// n × k snapshot matrix, trajectories stacked one after another.
    pub x: DMatrix<f64>,
    pub times: Vec<f64>,
}

impl SnapshotSet {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Runs one trajectory per row of `C` and concatenates them, initial states
/// included, into `p·(steps + 1)` columns.
pub fn integrate_adjoint(sys: &StateSpaceSystem, horizon: f64, steps: usize) -> Result<SnapshotSet> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    if steps == 0 {
        return Err(Error::InvalidInput("steps must be at least 1".into()));
    }
    let (n, p) = (sys.n(), sys.p());
    if p == 0 {
        return Err(Error::InvalidInput("no output rows to integrate".into()));
    }
    let dt = horizon / steps as f64;
    let sigma = 1.0 / dt;
    // (I − Δt Aᵀ) x⁺ = x  ⇔  (Aᵀ − σI) x⁺ = −σ x
    let lu = sys.a.shifted_lu(Complex::new(sigma, 0.0))?;

    let mut x = DMatrix::zeros(n, p * (steps + 1));
    let mut current = sys.c.transpose();
    for i in 0..p {
        x.set_column(i * (steps + 1), &current.column(i));
    }
    for s in 1..=steps {
        current = lu.solve_real(&(current * -sigma), true)?;
        for i in 0..p {
            x.set_column(i * (steps + 1) + s, &current.column(i));
        }
    }
    let mut times = Vec::with_capacity(p * (steps + 1));
    for _ in 0..p {
        times.extend((0..=steps).map(|s| s as f64 * dt));
    }
    Ok(SnapshotSet { x, times })
}
