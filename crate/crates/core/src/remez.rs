//! Parks-McClellan design of real, even-symmetric (type I/II) FIR filters.
//!
//! Works on the cosine-domain formulation: the zero-phase amplitude
//! `A(f)` of an `N`-tap symmetric filter is a polynomial of degree `r - 1`
//! in `x = cos(2*pi*f)` (times `cos(pi*f)` for even `N`). The exchange
//! iterates the barycentric Lagrange solution on `r + 1` reference points
//! until the reference equioscillates.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

/// One frequency band in cycles/sample, `0 <= lo <= hi <= 0.5`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    pub desired: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RemezError {
    BadBands(String),
    TooFewGridPoints,
    LostAlternation,
    /// The exchange produced non-finite values, typically because the
    /// optimal ripple is below double precision.
    Numerical,
    NotConverged {
        iterations: usize,
    },
}

struct DenseGrid {
    freq: Vec<f64>,
    x: Vec<f64>,
    desired: Vec<f64>,
    weight: Vec<f64>,
    band: Vec<usize>,
}

fn half_order(numtaps: usize) -> usize {
    if numtaps % 2 == 1 {
        numtaps.div_ceil(2)
    } else {
        numtaps / 2
    }
}

fn build_grid(numtaps: usize, bands: &[Band], density: usize) -> Result<DenseGrid, RemezError> {
    if bands.is_empty() {
        return Err(RemezError::BadBands("no bands".into()));
    }
    let mut prev_hi = 0.0;
    for (i, b) in bands.iter().enumerate() {
        if !(b.lo >= 0.0 && b.lo <= b.hi && b.hi <= 0.5) || b.weight <= 0.0 {
            return Err(RemezError::BadBands(format!("band {i}: {b:?}")));
        }
        if i > 0 && b.lo <= prev_hi {
            return Err(RemezError::BadBands("bands overlap".into()));
        }
        prev_hi = b.hi;
    }

    let r = half_order(numtaps);
    let even = numtaps.is_multiple_of(2);
    let delf = 0.5 / (density.max(1) * r) as f64;
    let mut grid = DenseGrid {
        freq: Vec::new(),
        x: Vec::new(),
        desired: Vec::new(),
        weight: Vec::new(),
        band: Vec::new(),
    };
    for (idx, b) in bands.iter().enumerate() {
        // Even-length filters vanish at f = 0.5; keep the grid off it.
        let hi = if even { b.hi.min(0.5 - delf) } else { b.hi };
        if hi < b.lo {
            continue;
        }
        let steps = ((hi - b.lo) / delf).round() as usize;
        for i in 0..=steps {
            let f = if steps == 0 {
                b.lo
            } else {
                b.lo + (hi - b.lo) * i as f64 / steps as f64
            };
            let (d, w) = if even {
                let c = (PI * f).cos();
                (b.desired / c, b.weight * c)
            } else {
                (b.desired, b.weight)
            };
            grid.freq.push(f);
            grid.x.push((2.0 * PI * f).cos());
            grid.desired.push(d);
            grid.weight.push(w);
            grid.band.push(idx);
        }
    }
    if grid.freq.len() < r + 1 {
        return Err(RemezError::TooFewGridPoints);
    }
    Ok(grid)
}

/// Barycentric interpolant through `(nodes, values)`.
struct Interpolant {
    nodes: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl Interpolant {
    fn eval(&self, x: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&xk, &yk), &bk) in self.nodes.iter().zip(&self.values).zip(&self.weights) {
            let dx = x - xk;
            if dx == 0.0 {
                return yk;
            }
            let c = bk / dx;
            num += c * yk;
            den += c;
        }
        num / den
    }
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    // The factor 2 keeps the products near unity for nodes in [-1, 1].
    nodes
        .iter()
        .enumerate()
        .map(|(k, &xk)| {
            let prod: f64 = nodes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, &xj)| 2.0 * (xk - xj))
                .product();
            1.0 / prod
        })
        .collect()
}

/// Local extrema of the weighted error with alternating signs, trimmed to
/// exactly `want` points.
fn select_extrema(err: &[f64], band: &[usize], want: usize) -> Option<Vec<usize>> {
    let n = err.len();
    let mut cand: Vec<usize> = Vec::new();
    for j in 0..n {
        let e = err[j];
        if e == 0.0 {
            continue;
        }
        let s = e.signum();
        let left_ok = j == 0 || band[j - 1] != band[j] || s * e >= s * err[j - 1];
        let right_ok = j + 1 == n || band[j + 1] != band[j] || s * e > s * err[j + 1];
        if left_ok && right_ok {
            cand.push(j);
        }
    }

    let mut alt: Vec<usize> = Vec::with_capacity(cand.len());
    for j in cand {
        match alt.last() {
            Some(&last) if err[last].signum() == err[j].signum() => {
                if err[j].abs() > err[last].abs() {
                    *alt.last_mut().unwrap() = j;
                }
            }
            _ => alt.push(j),
        }
    }

    while alt.len() > want {
        let (k, _) = alt
            .iter()
            .enumerate()
            .min_by(|a, b| err[*a.1].abs().total_cmp(&err[*b.1].abs()))
            .unwrap();
        let last = alt.len() - 1;
        if k == 0 || k == last {
            alt.remove(k);
        } else if alt.len() - want >= 2 {
            // Dropping an interior point joins two same-signed neighbours.
            let keep_left = err[alt[k - 1]].abs() >= err[alt[k + 1]].abs();
            alt.remove(k);
            alt.remove(if keep_left { k } else { k - 1 });
        } else if err[alt[0]].abs() <= err[alt[last]].abs() {
            alt.remove(0);
        } else {
            alt.remove(last);
        }
    }
    (alt.len() == want).then_some(alt)
}

/// Converged cosine-domain solution.
struct Solution {
    interp: Interpolant,
    even: bool,
}

impl Solution {
    /// Zero-phase amplitude at frequency `f` (cycles/sample).
    fn amplitude(&self, f: f64) -> f64 {
        let p = self.interp.eval((2.0 * PI * f).cos());
        if self.even {
            p * (PI * f).cos()
        } else {
            p
        }
    }

    fn taps(&self, numtaps: usize) -> Vec<f64> {
        let nf = numtaps as f64;
        let mid = (nf - 1.0) / 2.0;
        let kmax = if self.even {
            numtaps / 2 - 1
        } else {
            (numtaps - 1) / 2
        };
        let amps: Vec<f64> = (0..=kmax).map(|k| self.amplitude(k as f64 / nf)).collect();
        (0..numtaps)
            .map(|n| {
                let m = n as f64 - mid;
                let tail: f64 = amps
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, a)| 2.0 * a * (2.0 * PI * k as f64 * m / nf).cos())
                    .sum();
                (amps[0] + tail) / nf
            })
            .collect()
    }
}

/// Equiripple weighted-Chebyshev design.
pub fn remez(
    numtaps: usize,
    bands: &[Band],
    grid_density: usize,
    max_iterations: usize,
) -> Result<Vec<f64>, RemezError> {
    if numtaps < 2 {
        return Err(RemezError::BadBands("need at least two taps".into()));
    }
    let grid = build_grid(numtaps, bands, grid_density)?;
    let r = half_order(numtaps);
    let ng = grid.freq.len();
    let mut ext: Vec<usize> = (0..=r).map(|k| k * (ng - 1) / r).collect();
    let mut err = vec![0.0; ng];

    for _ in 0..max_iterations.max(1) {
        let xs: Vec<f64> = ext.iter().map(|&i| grid.x[i]).collect();
        let b = barycentric_weights(&xs);
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, &i) in ext.iter().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            num += b[k] * grid.desired[i];
            den += b[k] * sign / grid.weight[i];
        }
        let delta = if den == 0.0 { 0.0 } else { num / den };
        if !delta.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(RemezError::Numerical);
        }
        let values: Vec<f64> = ext
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                grid.desired[i] - sign * delta / grid.weight[i]
            })
            .collect();
        let solution = Solution {
            interp: Interpolant {
                nodes: xs,
                values,
                weights: b,
            },
            even: numtaps.is_multiple_of(2),
        };

        let mut max_err: f64 = 0.0;
        for (j, e) in err.iter_mut().enumerate() {
            *e = grid.weight[j] * (grid.desired[j] - solution.interp.eval(grid.x[j]));
            max_err = max_err.max(e.abs());
        }
        if !max_err.is_finite() {
            return Err(RemezError::Numerical);
        }
        if max_err <= 1e-12 || max_err - delta.abs() <= 1e-9 * max_err {
            return finite_taps(solution.taps(numtaps));
        }
        let next = select_extrema(&err, &grid.band, r + 1).ok_or(RemezError::LostAlternation)?;
        if next == ext {
            return finite_taps(solution.taps(numtaps));
        }
        ext = next;
    }
    Err(RemezError::NotConverged {
        iterations: max_iterations,
    })
}

fn finite_taps(h: Vec<f64>) -> Result<Vec<f64>, RemezError> {
    if h.iter().all(|v| v.is_finite()) {
        Ok(h)
    } else {
        Err(RemezError::Numerical)
    }
}

/// Weighted least-squares design on the same dense grid and band spec.
pub fn least_squares(
    numtaps: usize,
    bands: &[Band],
    grid_density: usize,
) -> Result<Vec<f64>, RemezError> {
    if numtaps < 2 {
        return Err(RemezError::BadBands("need at least two taps".into()));
    }
    let grid = build_grid(numtaps, bands, grid_density)?;
    let r = half_order(numtaps);
    let even = numtaps.is_multiple_of(2);
    let ng = grid.freq.len();
    let offset = if even { 0.5 } else { 0.0 };

    // The grid stores D/cos and W*cos for even lengths; undo that here so
    // the fit is against the true amplitude.
    let mut a = DMatrix::<f64>::zeros(ng, r);
    let mut rhs = DVector::<f64>::zeros(ng);
    for j in 0..ng {
        let f = grid.freq[j];
        let (d, w) = if even {
            let c = (PI * f).cos();
            (grid.desired[j] * c, grid.weight[j] / c)
        } else {
            (grid.desired[j], grid.weight[j])
        };
        for k in 0..r {
            a[(j, k)] = w * (2.0 * PI * f * (k as f64 + offset)).cos();
        }
        rhs[j] = w * d;
    }
    let coeffs = a
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| RemezError::BadBands(e.to_string()))?;

    let mut h = vec![0.0; numtaps];
    if even {
        let half = numtaps / 2;
        for k in 0..r {
            h[half + k] = coeffs[k] / 2.0;
            h[half - 1 - k] = coeffs[k] / 2.0;
        }
    } else {
        let c = (numtaps - 1) / 2;
        h[c] = coeffs[0];
        for k in 1..r {
            h[c + k] = coeffs[k] / 2.0;
            h[c - k] = coeffs[k] / 2.0;
        }
    }
    Ok(h)
}

/// Zero-phase amplitude of a symmetric filter at `f` cycles/sample.
#[cfg(test)]
pub fn amplitude(h: &[f64], f: f64) -> f64 {
    let mid = (h.len() as f64 - 1.0) / 2.0;
    h.iter()
        .enumerate()
        .map(|(n, &c)| c * (2.0 * PI * f * (n as f64 - mid)).cos())
        .sum()
}
