//! Finite-difference LQR instances for `w_t − εΔw + γw_x + γw_y = 1_{Ω_B} u`
//! with output `y = |Ω_C|⁻¹ ∫_{Ω_C} w`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dense::{gain_weight, real_schur};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Axis-aligned closed rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn square(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, lo, hi)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    fn contains_point(&self, x: f64, y: f64, tol: f64) -> bool {
        x >= self.x0 - tol && x <= self.x1 + tol && y >= self.y0 - tol && y <= self.y1 + tol
    }

    fn contains_rect(&self, other: &Rect, tol: f64) -> bool {
        other.x0 >= self.x0 - tol
            && other.x1 <= self.x1 + tol
            && other.y0 >= self.y0 - tol
            && other.y1 <= self.y1 + tol
    }

    fn is_valid(&self) -> bool {
        [self.x0, self.x1, self.y0, self.y1].iter().all(|v| v.is_finite())
            && self.x1 > self.x0
            && self.y1 > self.y0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    pub epsilon: f64,
    pub gamma: f64,
    pub domain: Rect,
    pub omega_b: Rect,
    pub omega_c: Rect,
    pub dx: f64,
}

impl PdeConfig {
    /// Heat equation on the unit square, 441 unknowns.
    pub fn heat() -> Self {
        Self {
            epsilon: 1.0,
            gamma: 0.0,
            domain: Rect::square(0.0, 1.0),
            omega_b: Rect::square(0.2, 0.8),
            omega_c: Rect::square(0.1, 0.9),
            dx: 0.05,
        }
    }

    /// Convection-dominated problem on `[0,2]²` with γ = 50, 441 unknowns.
    pub fn convection_diffusion() -> Self {
        Self {
            epsilon: 1.0,
            gamma: 50.0,
            domain: Rect::square(0.0, 2.0),
            omega_b: Rect::square(0.2, 0.8),
            omega_c: Rect::square(0.1, 0.9),
            dx: 0.1,
        }
    }

    pub fn with_dx(mut self, dx: f64) -> Self {
        self.dx = dx;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be nonnegative, got {}", self.gamma));
        }
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return bad(format!("dx must be positive, got {}", self.dx));
        }
        for (name, r) in [("domain", &self.domain), ("omega_b", &self.omega_b), ("omega_c", &self.omega_c)] {
            if !r.is_valid() {
                return bad(format!("{name} is not a proper rectangle: {r:?}"));
            }
        }
        let tol = 1e-12 * self.scale();
        for (name, r) in [("omega_b", &self.omega_b), ("omega_c", &self.omega_c)] {
            if !self.domain.contains_rect(r, tol) {
                return bad(format!("{name} is not inside the domain"));
            }
        }
        self.nodes_per_side().map(|_| ())
    }

    fn scale(&self) -> f64 {
        let d = &self.domain;
        (d.x1 - d.x0).abs().max((d.y1 - d.y0).abs()).max(1.0)
    }

    /// Unknowns per side: `L/Δx + 1`, placed at `x0 + iΔx`, `i = 0..L/Δx`.
    pub fn nodes_per_side(&self) -> Result<(usize, usize)> {
        let tol = 1e-12 * self.scale();
        let count = |len: f64| -> Result<usize> {
            let k = (len / self.dx).round();
            if k < 1.0 || (k * self.dx - len).abs() > tol {
                return Err(Error::InvalidInput(format!(
                    "dx = {} does not divide edge length {len}",
                    self.dx
                )));
            }
            Ok(k as usize + 1)
        };
        Ok((
            count(self.domain.x1 - self.domain.x0)?,
            count(self.domain.y1 - self.domain.y0)?,
        ))
    }
}

/// Uniform node lattice; unknown `k = j·nx + i` sits at `(x0 + iΔx, y0 + jΔx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = (k % self.nx, k / self.nx);
        (self.x0 + i as f64 * self.dx, self.y0 + j as f64 * self.dx)
    }
}

/// Full-order LQR instance `ẋ = Ax + Bu`, `y = Cx`, cost weight `R`.
#[derive(Debug, Clone)]
pub struct StateSpaceSystem {
    pub a: CsrMatrix,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub r_weight: DMatrix<f64>,
    pub grid: Option<Grid>,
}

impl StateSpaceSystem {
    pub fn new(
        a: CsrMatrix,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        r_weight: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "inconsistent shapes: A {}x{}, B {}x{}, C {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        gain_weight(&b, &r_weight)?;
        Ok(Self {
            a,
            b,
            c,
            r_weight,
            grid: None,
        })
    }

    /// Convenience constructor from dense data with `R = I`.
    pub fn from_dense(a: &DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let m = b.ncols();
        Self::new(CsrMatrix::from_dense(a), b, c, DMatrix::identity(m, m))
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn dense_a(&self) -> DMatrix<f64> {
        self.a.to_dense()
    }

    /// `λ_max((A + Aᵀ)/2)`; negative means passive. Dense, O(n³).
    pub fn passivity_margin(&self) -> f64 {
        let a = self.dense_a();
        let sym = (&a + a.transpose()) * 0.5;
        nalgebra::SymmetricEigen::new(sym)
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest real part of the spectrum of `A`. Dense, O(n³).
    pub fn spectral_abscissa(&self) -> Result<f64> {
        Ok(real_schur(&self.dense_a())?.spectral_abscissa())
    }
}

/// Tridiagonal `ε·D₂ − γ·D₁⁻` on `nodes` points with zero Dirichlet values
/// just outside both ends.
pub fn operator_1d(epsilon: f64, gamma: f64, dx: f64, nodes: usize) -> CsrMatrix {
    let d2 = epsilon / (dx * dx);
    let d1 = gamma / dx;
    let mut t = Vec::with_capacity(3 * nodes);
    for i in 0..nodes {
        t.push((i, i, -2.0 * d2 - d1));
        if i > 0 {
            t.push((i, i - 1, d2 + d1));
        }
        if i + 1 < nodes {
            t.push((i, i + 1, d2));
        }
    }
    CsrMatrix::from_triplets(nodes, nodes, &t)
}

pub fn assemble_system(cfg: &PdeConfig) -> Result<StateSpaceSystem> {
    cfg.validate()?;
    let (nx, ny) = cfg.nodes_per_side()?;
    let grid = Grid {
        nx,
        ny,
        dx: cfg.dx,
        x0: cfg.domain.x0,
        y0: cfg.domain.y0,
    };
    let n = grid.len();

    // Kronecker sum I ⊗ Lx + Ly ⊗ I with k = j·nx + i.
    let lx = operator_1d(cfg.epsilon, cfg.gamma, cfg.dx, nx);
    let ly = operator_1d(cfg.epsilon, cfg.gamma, cfg.dx, ny);
    let mut t = Vec::with_capacity(5 * n);
    for j in 0..ny {
        for (i, ii, v) in lx.triplets() {
            t.push((j * nx + i, j * nx + ii, v));
        }
    }
    for (j, jj, v) in ly.triplets() {
        for i in 0..nx {
            t.push((j * nx + i, jj * nx + i, v));
        }
    }
    let a = CsrMatrix::from_triplets(n, n, &t);

    let tol = 1e-9 * cfg.dx;
    let mut b = DMatrix::zeros(n, 1);
    let mut c = DMatrix::zeros(1, n);
    let weight = cfg.dx * cfg.dx / cfg.omega_c.area();
    let (mut nb, mut nc) = (0, 0);
    for k in 0..n {
        let (x, y) = grid.coords(k);
        if cfg.omega_b.contains_point(x, y, tol) {
            b[(k, 0)] = 1.0;
            nb += 1;
        }
        if cfg.omega_c.contains_point(x, y, tol) {
            c[(0, k)] = weight;
            nc += 1;
        }
    }
    if nb == 0 {
        return Err(Error::EmptyRegion("actuator"));
    }
    if nc == 0 {
        return Err(Error::EmptyRegion("observation"));
    }
    let mut sys = StateSpaceSystem::new(a, b, c, DMatrix::identity(1, 1))?;
    sys.grid = Some(grid);
    Ok(sys)
}

/// `G(s) = C (sI − A)⁻¹ B`.
pub fn eval_transfer(sys: &StateSpaceSystem, s: Complex64) -> Result<DMatrix<Complex64>> {
    let lu = sys.a.shifted_lu(s)?;
    // (A − sI) X = B, so (sI − A)⁻¹ B = −X.
    let x = lu.solve(&sys.b)?;
    let c = sys.c.map(|v| Complex64::new(v, 0.0));
    Ok(-(c * x))
}
