//! Array geometry and manifold vectors.
//!
//! Angles live in u-space, `u = sin(theta)`, on the half-open interval
//! `[-1, 1)`. A half-wavelength ULA of `N` elements responds to a plane wave
//! from `u` with `phi_N(u)[n] = exp(j*pi*n*u)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Response vector of an array toward one angle.
pub type SteeringVector = DVector<C64>;

/// A direction in u-space, `u in [-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AngleU(f64);

impl AngleU {
    pub fn new(u: f64) -> Result<Self> {
        if (-1.0..1.0).contains(&u) {
            Ok(Self(u))
        } else {
            Err(Error::AngleOutOfRange(u))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Prior angular support `[left, right]`.
///
/// The right edge may sit at `u = 1` so that `[0, 1)` style regions can be
/// expressed; grid points and beam centres always stay strictly below it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionOfInterest {
    left: f64,
    right: f64,
}

impl RegionOfInterest {
    pub fn new(left: f64, right: f64) -> Result<Self> {
        if !(left >= -1.0 && right <= 1.0 && left < right) {
            return Err(Error::InvalidRoi { left, right });
        }
        Ok(Self { left, right })
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.left + self.right)
    }
}

impl Default for RegionOfInterest {
    fn default() -> Self {
        Self {
            left: 0.0,
            right: 1.0,
        }
    }
}

fn check_len(n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(Error::ArrayTooSmall { min, got: n })
    } else {
        Ok(())
    }
}

/// `phi_N(u)`: entry `n` is `exp(j*pi*n*u)`.
pub fn ula_manifold(n: usize, u: AngleU) -> Result<SteeringVector> {
    check_len(n, 1)?;
    Ok(manifold_unchecked(n, u.0))
}

/// Entrywise derivative of [`ula_manifold`] with respect to `u`.
pub fn ula_manifold_derivative(n: usize, u: AngleU) -> Result<DVector<C64>> {
    check_len(n, 1)?;
    Ok(manifold_derivative_unchecked(n, u.0))
}

pub(crate) fn manifold_unchecked(n: usize, u: f64) -> DVector<C64> {
    DVector::from_fn(n, |k, _| C64::from_polar(1.0, PI * k as f64 * u))
}

pub(crate) fn manifold_derivative_unchecked(n: usize, u: f64) -> DVector<C64> {
    DVector::from_fn(n, |k, _| {
        C64::new(0.0, PI * k as f64) * C64::from_polar(1.0, PI * k as f64 * u)
    })
}

/// The centred-index companion `phi_perp_M(u)` of the manifold and the
/// orthogonal projector onto `span{phi_M(u), phi_perp_M(u)}`.
///
/// `phi_perp[n] = (n - (M-1)/2) * exp(j*pi*n*u)`; it is orthogonal to
/// `phi_M(u)` and `d/du phi_M = j*pi*((M-1)/2 * phi_M + phi_perp)`.
pub fn phi_perp_and_projection(m: usize, u: AngleU) -> Result<(DVector<C64>, DMatrix<C64>)> {
    check_len(m, 2)?;
    let phi = manifold_unchecked(m, u.0);
    let half = (m as f64 - 1.0) / 2.0;
    let perp = DVector::from_fn(m, |k, _| phi[k] * (k as f64 - half));
    let phi_norm2 = phi.norm_squared();
    let perp_norm2 = perp.norm_squared();
    let proj = &phi * phi.adjoint() / C64::from(phi_norm2)
        + &perp * perp.adjoint() / C64::from(perp_norm2);
    Ok((perp, proj))
}

/// Sensor positions of a sparse linear array, in half-wavelength units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlaGeometry {
    positions: Vec<usize>,
    aperture: usize,
}

impl SlaGeometry {
    /// `positions` must start at 0, strictly increase and stay below `aperture`.
    pub fn new(positions: Vec<usize>, aperture: usize) -> Result<Self> {
        if positions.first() != Some(&0) {
            return Err(Error::InvalidGeometry("first position must be 0".into()));
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGeometry(
                "positions must be strictly increasing".into(),
            ));
        }
        if *positions.last().unwrap() >= aperture {
            return Err(Error::InvalidGeometry(format!(
                "position {} outside aperture {aperture}",
                positions.last().unwrap()
            )));
        }
        Ok(Self {
            positions,
            aperture,
        })
    }

    /// Contiguous geometry `{0, 1, ..., n_v - 1}`.
    pub fn contiguous(n_v: usize, aperture: usize) -> Result<Self> {
        Self::new((0..n_v).collect(), aperture)
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn aperture(&self) -> usize {
        self.aperture
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn last_position(&self) -> usize {
        *self.positions.last().unwrap()
    }

    /// Binary `N_v x N` matrix selecting the sensor positions.
    pub fn sampling_matrix(&self) -> DMatrix<u8> {
        let mut s = DMatrix::zeros(self.positions.len(), self.aperture);
        for (row, &p) in self.positions.iter().enumerate() {
            s[(row, p)] = 1;
        }
        s
    }

    /// Virtual manifold `S * phi_N(u)`, i.e. `exp(j*pi*P_m*u)` per sensor.
    pub fn manifold(&self, u: AngleU) -> SteeringVector {
        DVector::from_iterator(
            self.positions.len(),
            self.positions
                .iter()
                .map(|&p| C64::from_polar(1.0, PI * p as f64 * u.0)),
        )
    }
}
