//! Real Schur decomposition by Householder reduction to Hessenberg form
//! followed by Francis implicit double-shift QR sweeps.

use nalgebra::{Complex, DMatrix};

use super::LinalgError;

/// `A = Q T Qᵀ` with `Q` orthogonal and `T` upper quasi-triangular.
#[derive(Debug, Clone)]
pub struct SchurForm {
    pub q: DMatrix<f64>,
    pub t: DMatrix<f64>,
}

impl SchurForm {
    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// Diagonal block boundaries: each entry is `(start, size)` with size 1 or 2.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        diagonal_blocks(&self.t)
    }

    /// Eigenvalues read off the diagonal blocks, in block order.
    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        let mut out = Vec::with_capacity(self.dim());
        for (i, size) in self.blocks() {
            if size == 1 {
                out.push(Complex::new(self.t[(i, i)], 0.0));
            } else {
                let (l1, l2) = block_eigenvalues(
                    self.t[(i, i)],
                    self.t[(i, i + 1)],
                    self.t[(i + 1, i)],
                    self.t[(i + 1, i + 1)],
                );
                out.push(l1);
                out.push(l2);
            }
        }
        out
    }

    /// Largest real part over the spectrum.
    pub fn spectral_abscissa(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn diagonal_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

fn block_eigenvalues(a: f64, b: f64, c: f64, d: f64) -> (Complex<f64>, Complex<f64>) {
    let half_trace = 0.5 * (a + d);
    let p = 0.5 * (a - d);
    let disc = p * p + b * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (
            Complex::new(half_trace + s, 0.0),
            Complex::new(half_trace - s, 0.0),
        )
    } else {
        let s = (-disc).sqrt();
        (
            Complex::new(half_trace, s),
            Complex::new(half_trace, -s),
        )
    }
}

/// Row-major scratch matrix; the sweeps below walk rows and columns alike.
struct Square {
    n: usize,
    data: Vec<f64>,
}

impl Square {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }
    #[inline]
    fn sub(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] -= v;
    }
}

/// Computes the real Schur form of a square matrix.
///
/// Fails with [`LinalgError::SchurNoConvergence`] after `30·n` QR sweeps.
pub fn real_schur(a: &DMatrix<f64>) -> Result<SchurForm, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "schur needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(SchurForm {
            q: DMatrix::zeros(0, 0),
            t: DMatrix::zeros(0, 0),
        });
    }
    let mut h = Square {
        n,
        data: (0..n * n).map(|k| a[(k / n, k % n)]).collect(),
    };
    let mut v = Square {
        n,
        data: vec![0.0; n * n],
    };
    hessenberg(&mut h, &mut v);
    francis(&mut h, &mut v)?;

    let mut t = DMatrix::from_fn(n, n, |i, j| if i > j + 1 { 0.0 } else { h.at(i, j) });
    // Two consecutive nonzero subdiagonals cannot occur in a quasi-triangular matrix.
    for i in 1..n.saturating_sub(1) {
        if t[(i, i - 1)] != 0.0 && t[(i + 1, i)] != 0.0 {
            return Err(LinalgError::SchurNoConvergence { n });
        }
    }
    for i in 0..n {
        for j in 0..i.saturating_sub(1) {
            t[(i, j)] = 0.0;
        }
    }
    let q = DMatrix::from_fn(n, n, |i, j| v.at(i, j));
    Ok(SchurForm { q, t })
}

fn hessenberg(h: &mut Square, v: &mut Square) {
    let n = h.n;
    let high = n - 1;
    let mut ort = vec![0.0; n];
    let mut acc = vec![0.0; n];
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h.at(i, m - 1).abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h.at(i, m - 1) / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        // H ← (I − u uᵀ/hh) H, accumulated row by row.
        acc[m..n].fill(0.0);
        for i in m..=high {
            let row = &h.data[i * n + m..i * n + n];
            for (a, &x) in acc[m..n].iter_mut().zip(row) {
                *a += ort[i] * x;
            }
        }
        for i in m..=high {
            let oi = ort[i] / hh;
            let row = &mut h.data[i * n + m..i * n + n];
            for (x, &a) in row.iter_mut().zip(&acc[m..n]) {
                *x -= oi * a;
            }
        }
        // H ← H (I − u uᵀ/hh).
        for i in 0..=high {
            let row = &mut h.data[i * n + m..=i * n + high];
            let u = &ort[m..=high];
            let f: f64 = row.iter().zip(u).map(|(x, o)| x * o).sum::<f64>() / hh;
            for (x, &o) in row.iter_mut().zip(u) {
                *x -= f * o;
            }
        }
        ort[m] *= scale;
        h.set(m, m - 1, scale * g);
    }

    for i in 0..n {
        v.set(i, i, 1.0);
    }
    for m in (1..high).rev() {
        if h.at(m, m - 1) == 0.0 {
            continue;
        }
        for i in m + 1..=high {
            ort[i] = h.at(i, m - 1);
        }
        acc[m..=high].fill(0.0);
        for i in m..=high {
            let row = &v.data[i * n + m..=i * n + high];
            for (a, &x) in acc[m..=high].iter_mut().zip(row) {
                *a += ort[i] * x;
            }
        }
        let denom = ort[m] * h.at(m, m - 1);
        for i in m..=high {
            let oi = ort[i] / denom;
            let row = &mut v.data[i * n + m..=i * n + high];
            for (x, &a) in row.iter_mut().zip(&acc[m..=high]) {
                *x += oi * a;
            }
        }
    }
    for i in 0..n {
        for j in 0..i.saturating_sub(1) {
            h.set(i, j, 0.0);
        }
    }
}

#[allow(clippy::many_single_char_names)]
fn francis(h: &mut Square, v: &mut Square) -> Result<(), LinalgError> {
    let nn = h.n;
    let eps = f64::EPSILON;
    let max_sweeps = 30 * nn;
    let mut sweeps = 0usize;

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h.at(i, j).abs();
        }
    }

    let mut exshift = 0.0;
    let mut iter = 0usize;
    let mut n = nn as isize - 1;
    let (mut p, mut q, mut r, mut s, mut z);
    let (mut w, mut x, mut y);

    while n >= 0 {
        let nu = n as usize;
        // Look for a single small subdiagonal element.
        let mut l = nu;
        while l > 0 {
            s = h.at(l - 1, l - 1).abs() + h.at(l, l).abs();
            if s == 0.0 {
                s = norm;
            }
            if h.at(l, l - 1).abs() <= eps * s {
                h.set(l, l - 1, 0.0);
                break;
            }
            l -= 1;
        }

        if l == nu {
            // One root.
            let val = h.at(nu, nu) + exshift;
            h.set(nu, nu, val);
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            // Two roots.
            w = h.at(nu, nu - 1) * h.at(nu - 1, nu);
            p = (h.at(nu - 1, nu - 1) - h.at(nu, nu)) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            let hnn = h.at(nu, nu) + exshift;
            h.set(nu, nu, hnn);
            let hmm = h.at(nu - 1, nu - 1) + exshift;
            h.set(nu - 1, nu - 1, hmm);

            if q >= 0.0 {
                // Real pair: rotate to upper triangular.
                z = if p >= 0.0 { p + z } else { p - z };
                x = h.at(nu, nu - 1);
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in nu - 1..nn {
                    z = h.at(nu - 1, j);
                    let hn = h.at(nu, j);
                    h.set(nu - 1, j, q * z + p * hn);
                    h.set(nu, j, q * hn - p * z);
                }
                for i in 0..=nu {
                    z = h.at(i, nu - 1);
                    let hn = h.at(i, nu);
                    h.set(i, nu - 1, q * z + p * hn);
                    h.set(i, nu, q * hn - p * z);
                }
                for i in 0..nn {
                    z = v.at(i, nu - 1);
                    let vn = v.at(i, nu);
                    v.set(i, nu - 1, q * z + p * vn);
                    v.set(i, nu, q * vn - p * z);
                }
                h.set(nu, nu - 1, 0.0);
            }
            n -= 2;
            iter = 0;
        } else {
            sweeps += 1;
            if sweeps > max_sweeps {
                return Err(LinalgError::SchurNoConvergence { n: nn });
            }
            x = h.at(nu, nu);
            y = 0.0;
            w = 0.0;
            if l < nu {
                y = h.at(nu - 1, nu - 1);
                w = h.at(nu, nu - 1) * h.at(nu - 1, nu);
            }

            // Exceptional shifts for stalled sweeps.
            if iter == 10 || iter == 20 {
                exshift += x;
                for i in 0..=nu {
                    h.sub(i, i, x);
                }
                s = h.at(nu, nu - 1).abs() + h.at(nu - 1, nu - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h.sub(i, i, s);
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;

            // Look for two consecutive small subdiagonal elements.
            let mut m = nu - 2;
            loop {
                z = h.at(m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / h.at(m + 1, m) + h.at(m, m + 1);
                q = h.at(m + 1, m + 1) - z - r - s;
                r = h.at(m + 2, m + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h.at(m, m - 1).abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs()
                            * (h.at(m - 1, m - 1).abs() + z.abs() + h.at(m + 1, m + 1).abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in m + 2..=nu {
                h.set(i, i - 2, 0.0);
                if i > m + 2 {
                    h.set(i, i - 3, 0.0);
                }
            }

            // Double QR step on rows l..=n, columns m..=n.
            for k in m..nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h.at(k, k - 1);
                    q = h.at(k + 1, k - 1);
                    r = if notlast { h.at(k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s == 0.0 {
                    continue;
                }
                if k != m {
                    h.set(k, k - 1, -s * x);
                } else if l != m {
                    let val = -h.at(k, k - 1);
                    h.set(k, k - 1, val);
                }
                p += s;
                x = p / s;
                y = q / s;
                z = r / s;
                q /= p;
                r /= p;

                for j in k..nn {
                    let mut pp = h.at(k, j) + q * h.at(k + 1, j);
                    if notlast {
                        pp += r * h.at(k + 2, j);
                        h.sub(k + 2, j, pp * z);
                    }
                    h.sub(k, j, pp * x);
                    h.sub(k + 1, j, pp * y);
                }
                for i in 0..=nu.min(k + 3) {
                    let mut pp = x * h.at(i, k) + y * h.at(i, k + 1);
                    if notlast {
                        pp += z * h.at(i, k + 2);
                        h.sub(i, k + 2, pp * r);
                    }
                    h.sub(i, k, pp);
                    h.sub(i, k + 1, pp * q);
                }
                for i in 0..nn {
                    let mut pp = x * v.at(i, k) + y * v.at(i, k + 1);
                    if notlast {
                        pp += z * v.at(i, k + 2);
                        v.sub(i, k + 2, pp * r);
                    }
                    v.sub(i, k, pp);
                    v.sub(i, k + 1, pp * q);
                }
            }
        }
    }
    Ok(())
}
