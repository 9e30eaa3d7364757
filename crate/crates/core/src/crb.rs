//! Cramér-Rao bounds on the angle `u` for a single path.
//!
//! All bounds share the form `sigma^2 / (2 P_s |alpha|^2) / D` where `D` is
//! a Fisher quadratic form in the combiner matrix. Structured variants
//! evaluate `D` from the per-segment beamformers alone, without building
//! the per-snapshot matrix.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::array::{
    manifold_derivative_unchecked, manifold_unchecked, phi_perp_and_projection, AngleU, C64,
};
use crate::error::{Error, Result};

/// Signal and noise powers entering every bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub power: f64,
    pub alpha_sq: f64,
    pub noise_variance: f64,
}

impl LinkBudget {
    /// Unit-power link with the given noise variance.
    pub fn unit(noise_variance: f64) -> Self {
        Self {
            power: 1.0,
            alpha_sq: 1.0,
            noise_variance,
        }
    }

    fn scale(&self) -> f64 {
        self.noise_variance / (2.0 * self.power * self.alpha_sq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrbResult {
    /// Lower bound on the variance of any unbiased estimate of `u`.
    pub bound: f64,
    /// The Fisher quadratic form; zero exactly when the bound is infinite.
    pub fisher_denominator: f64,
    /// Virtual-aperture term, for the sliding scheme only.
    pub g_term: Option<f64>,
}

impl CrbResult {
    fn from_denominator(
        budget: &LinkBudget,
        denom: f64,
        singular: bool,
        g_term: Option<f64>,
    ) -> Self {
        if singular || denom <= 0.0 {
            Self {
                bound: f64::INFINITY,
                fisher_denominator: 0.0,
                g_term,
            }
        } else {
            Self {
                bound: budget.scale() / denom,
                fisher_denominator: denom,
                g_term,
            }
        }
    }

    pub fn is_singular(&self) -> bool {
        self.bound.is_infinite()
    }
}

fn check_columns(w: &DMatrix<C64>) -> Result<()> {
    if w.ncols() == 0 {
        return Err(Error::Empty("beamformer matrix"));
    }
    for (column, c) in w.column_iter().enumerate() {
        let norm = c.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::ColumnNorm { column, norm });
        }
    }
    Ok(())
}

/// Roundoff floor for a Fisher form built from `d`.
fn zero_floor(d: &DVector<C64>) -> f64 {
    1e-14 * d.norm_squared()
}

/// Bound for an arbitrary per-snapshot combiner matrix `W` (`N x L`).
pub fn crb_general(w: &DMatrix<C64>, u: AngleU, budget: &LinkBudget) -> Result<CrbResult> {
    check_columns(w)?;
    let d = manifold_derivative_unchecked(w.nrows(), u.value());
    let denom = (w.adjoint() * &d).norm_squared();
    Ok(CrbResult::from_denominator(
        budget,
        denom,
        denom <= zero_floor(&d),
        None,
    ))
}

/// Bound when each column of `codewords` (`N x L/N_v`) is repeated for
/// `n_v` consecutive snapshots.
pub fn crb_benchmark(
    codewords: &DMatrix<C64>,
    n_v: usize,
    u: AngleU,
    budget: &LinkBudget,
) -> Result<CrbResult> {
    check_columns(codewords)?;
    let d = manifold_derivative_unchecked(codewords.nrows(), u.value());
    let denom = n_v as f64 * (codewords.adjoint() * &d).norm_squared();
    Ok(CrbResult::from_denominator(
        budget,
        denom,
        denom <= n_v as f64 * zero_floor(&d),
        None,
    ))
}

/// Gram quantities `(|F^H dphi|^2, |F^H phi|^2, Im(dphi^H F F^H phi))`.
fn sliding_forms(columns: &DMatrix<C64>, u: f64) -> (f64, f64, f64) {
    let m = columns.nrows();
    let a = columns.adjoint() * manifold_derivative_unchecked(m, u);
    let b = columns.adjoint() * manifold_unchecked(m, u);
    (a.norm_squared(), b.norm_squared(), a.dotc(&b).im)
}

/// Extra Fisher information the slide contributes per segment, for
/// beamformers `columns` (`M x T`) of any norm.
pub fn g_term(columns: &DMatrix<C64>, u: AngleU, n_v: usize) -> f64 {
    let (_, bb, im_ab) = sliding_forms(columns, u.value());
    let k = (n_v as f64 - 1.0).max(0.0);
    PI * PI * k * (2.0 * k + 1.0) / 6.0 * bb - PI * k * im_ab
}

/// Bound for the sliding combiner built from segment beamformers
/// `columns` (`M x L/N_v`, `M = N - N_v + 1`).
pub fn crb_svam(
    columns: &DMatrix<C64>,
    n_v: usize,
    u: AngleU,
    budget: &LinkBudget,
) -> Result<CrbResult> {
    check_columns(columns)?;
    if n_v == 0 {
        return Err(Error::InvalidConfig("N_v must be positive".into()));
    }
    let (aa, _, _) = sliding_forms(columns, u.value());
    let g = g_term(columns, u, n_v);
    let denom = n_v as f64 * (aa + g);
    let n = columns.nrows() + n_v - 1;
    let d = manifold_derivative_unchecked(n, u.value());
    Ok(CrbResult::from_denominator(
        budget,
        denom,
        denom <= zero_floor(&d),
        Some(g),
    ))
}

/// Sufficient condition for a nonnegative virtual-aperture term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GCondition {
    pub holds: bool,
    /// `phi^H F F^H phi / |phi|^2`.
    pub lhs: f64,
    /// `lambda_max(F^H P F) / 4`, `P` projecting onto `span{phi, phi_perp}`.
    pub rhs: f64,
}

pub fn g_sufficient_condition(columns: &DMatrix<C64>, u: AngleU) -> Result<GCondition> {
    let m = columns.nrows();
    let (_, proj) = phi_perp_and_projection(m, u)?;
    let phi = manifold_unchecked(m, u.value());
    let lhs = (columns.adjoint() * &phi).norm_squared() / phi.norm_squared();
    let gram = columns.adjoint() * proj * columns;
    let gram = (&gram + gram.adjoint()) * C64::new(0.5, 0.0);
    let lambda_max = gram
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    let rhs = lambda_max / 4.0;
    Ok(GCondition {
        holds: lhs >= rhs,
        lhs,
        rhs,
    })
}

/// Bound when the path gain is unknown and estimated jointly (conditional
/// model). Infinite whenever `W^H phi` and `W^H dphi` are collinear, which
/// includes `L = 1` and every rank-one `W`.
pub fn crb_unknown_alpha(w: &DMatrix<C64>, u: AngleU, budget: &LinkBudget) -> Result<CrbResult> {
    check_columns(w)?;
    let n = w.nrows();
    let a = w.adjoint() * manifold_derivative_unchecked(n, u.value());
    let b = w.adjoint() * manifold_unchecked(n, u.value());
    let aa = a.norm_squared();
    let bb = b.norm_squared();
    if bb <= 1e-14 * n as f64 * w.ncols() as f64 {
        return Ok(CrbResult::from_denominator(budget, 0.0, true, None));
    }
    let denom = aa - b.dotc(&a).norm_sqr() / bb;
    let singular = denom <= 1e-10 * aa;
    Ok(CrbResult::from_denominator(budget, denom, singular, None))
}
