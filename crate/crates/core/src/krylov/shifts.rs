//! Greedy adaptive poles for rational Krylov spaces of `Aᵀ`.
//!
//! Candidates live on the boundary of the convex hull of the mirrored Ritz
//! values and two spectral bounds; the pick maximizes
//! `∏|s − σ_j| / ∏|s − θ_j|` over previous poles `σ_j` and Ritz values `θ_j`.

use num_complex::Complex64;

use crate::sparse::CsrMatrix;

/// Sample points per hull edge or interval segment.
pub const POINTS_PER_SEGMENT: usize = 20;

/// `|Re θ| + i·Im θ`.
pub fn mirror(theta: Complex64) -> Complex64 {
    Complex64::new(theta.re.abs(), theta.im)
}

/// Gershgorin bound on the spectral radius of `A`.
pub fn gershgorin_radius(a: &CsrMatrix) -> f64 {
    (0..a.nrows())
        .map(|i| a.row(i).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Mirrored mean of the seed Ritz values.
pub fn initial_shift(seed_ritz: &[Complex64]) -> Complex64 {
    let n = seed_ritz.len().max(1) as f64;
    let mean: Complex64 = seed_ritz.iter().sum::<Complex64>() / n;
    clean(mirror(mean))
}

/// Fixed part of the candidate region: `[s_min, s_max]` on the real axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    pub s_min: f64,
    pub s_max: f64,
}

impl SpectralBounds {
    pub fn new(a: &CsrMatrix, seed_ritz: &[Complex64]) -> Self {
        let s_max = gershgorin_radius(a);
        let s_min = seed_ritz
            .iter()
            .map(|t| t.re.abs())
            .fold(f64::INFINITY, f64::min);
        let s_min = if s_min.is_finite() && s_min > 0.0 {
            s_min.min(s_max)
        } else {
            s_max * 1e-8
        };
        Self { s_min, s_max }
    }
}

/// Next pole. `used` lists every previous pole (conjugates included), each
/// repeated once per basis column it generated.
pub fn next_shift(
    ritz: &[Complex64],
    used: &[Complex64],
    bounds: SpectralBounds,
    last: Option<Complex64>,
) -> Complex64 {
    let candidates = candidate_points(ritz, bounds);
    let scale = candidates.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if candidates.len() < 2 {
        return match last {
            Some(s) => s * 2.0,
            None => candidates.first().copied().unwrap_or(Complex64::new(bounds.s_max, 0.0)),
        };
    }
    let mut best = None;
    let mut best_val = f64::NEG_INFINITY;
    for &s in &candidates {
        let Some(val) = log_objective(s, ritz, used, scale) else {
            continue;
        };
        if val > best_val {
            best_val = val;
            best = Some(s);
        }
    }
    match best {
        Some(s) => clean(s),
        None => last.map_or(Complex64::new(bounds.s_max, 0.0), |s| s * 2.0),
    }
}

fn log_objective(s: Complex64, ritz: &[Complex64], used: &[Complex64], scale: f64) -> Option<f64> {
    let guard = 1e-14 * scale.max(f64::MIN_POSITIVE);
    let mut val = 0.0;
    for &sig in used {
        let d = (s - sig).norm();
        if d <= guard {
            return None;
        }
        val += d.ln();
    }
    for &theta in ritz {
        let d = (s - theta).norm();
        if d <= guard {
            return None;
        }
        val -= d.ln();
    }
    val.is_finite().then_some(val)
}

/// Real shifts for numerically real picks; upper half-plane otherwise.
fn clean(s: Complex64) -> Complex64 {
    if s.im.abs() <= 1e-10 * s.norm() {
        Complex64::new(s.re, 0.0)
    } else {
        Complex64::new(s.re, s.im.abs())
    }
}

/// Sample points on the boundary of the candidate region.
pub fn candidate_points(ritz: &[Complex64], bounds: SpectralBounds) -> Vec<Complex64> {
    let mut pts: Vec<Complex64> = ritz.iter().map(|&t| mirror(t)).collect();
    pts.push(Complex64::new(bounds.s_min, 0.0));
    pts.push(Complex64::new(bounds.s_max, 0.0));
    let scale = pts.iter().map(|p| p.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return vec![Complex64::new(0.0, 0.0)];
    }
    let real = pts.iter().all(|p| p.im.abs() <= 1e-12 * scale);
    let vertices: Vec<(f64, f64)> = if real {
        let mut xs: Vec<f64> = pts.iter().map(|p| p.re).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * scale);
        if xs.len() < 2 {
            return vec![Complex64::new(xs[0], 0.0)];
        }
        let mut out = Vec::new();
        for pair in xs.windows(2) {
            sample_segment((pair[0], 0.0), (pair[1], 0.0), &mut out);
        }
        dedup(&mut out, scale);
        return out;
    } else {
        let mut all: Vec<(f64, f64)> = pts.iter().flat_map(|p| [(p.re, p.im), (p.re, -p.im)]).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        all.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-14 * scale && (a.1 - b.1).abs() <= 1e-14 * scale);
        convex_hull(&all)
    };
    if vertices.len() < 2 {
        return vertices.iter().map(|&(x, y)| Complex64::new(x, y)).collect();
    }
    let mut out = Vec::new();
    for i in 0..vertices.len() {
        let j = (i + 1) % vertices.len();
        sample_segment(vertices[i], vertices[j], &mut out);
    }
    dedup(&mut out, scale);
    out
}

fn sample_segment(a: (f64, f64), b: (f64, f64), out: &mut Vec<Complex64>) {
    let last = (POINTS_PER_SEGMENT - 1) as f64;
    for k in 0..POINTS_PER_SEGMENT {
        let t = k as f64 / last;
        out.push(Complex64::new(a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
    }
}

fn dedup(pts: &mut Vec<Complex64>, scale: f64) {
    let mut kept: Vec<Complex64> = Vec::with_capacity(pts.len());
    for &p in pts.iter() {
        if !kept.iter().any(|q| (p - q).norm() <= 1e-14 * scale) {
            kept.push(p);
        }
    }
    *pts = kept;
}

/// Andrew's monotone chain; input sorted by (x, y), output counter-clockwise.
fn convex_hull(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if pts.len() < 3 {
        return pts.to_vec();
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_ritz_value() {
        let b = SpectralBounds { s_min: 1.0, s_max: 1.0 };
        assert_eq!(next_shift(&[c(-1.0, 0.0)], &[], b, None), c(1.0, 0.0));
        assert_eq!(initial_shift(&[c(-1.0, 0.0)]), c(1.0, 0.0));
    }

    #[test]
    fn interval_without_previous_poles_picks_nearest_end() {
        let b = SpectralBounds { s_min: 1.0, s_max: 4.0 };
        let s = next_shift(&[c(-1.0, 0.0), c(-4.0, 0.0)], &[], b, None);
        assert_eq!(s, c(1.0, 0.0));
    }

    #[test]
    fn previous_pole_repels() {
        let b = SpectralBounds { s_min: 1.0, s_max: 4.0 };
        let ritz = [c(-1.0, 0.0), c(-4.0, 0.0)];
        let s = next_shift(&ritz, &[c(1.0, 0.0)], b, None);
        assert!(s.re > 1.0 && s.im == 0.0);
    }

    #[test]
    fn complex_ritz_pair_gives_conjugate_closed_hull() {
        let b = SpectralBounds { s_min: 0.5, s_max: 10.0 };
        let pts = candidate_points(&[c(-1.0, 3.0), c(-1.0, -3.0)], b);
        for p in &pts {
            assert!(pts.iter().any(|q| (q - p.conj()).norm() < 1e-12));
            assert!(p.re >= 0.5 - 1e-12);
        }
    }

    #[test]
    fn hull_of_square() {
        let pts = [(0.0, 0.0), (0.0, 1.0), (0.5, 0.5), (1.0, 0.0), (1.0, 1.0)];
        assert_eq!(convex_hull(&pts).len(), 4);
    }
}
