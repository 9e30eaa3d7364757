//! Linear-phase FIR beamformers and the binary hierarchical codebook.
//!
//! A beam is a real equiripple lowpass prototype (designed in the spatial
//! frequency `u/2` cycles/sample) modulated to the beam direction.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex;

use crate::array::{AngleU, RegionOfInterest, C64};
use crate::error::{Error, Result};
use crate::remez::{self, Band};

/// Beam center and width, both in `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSpec {
    direction: AngleU,
    beamwidth: f64,
}

impl BeamSpec {
    pub fn new(direction: AngleU, beamwidth: f64) -> Result<Self> {
        if !(beamwidth > 0.0 && beamwidth <= 2.0) {
            return Err(Error::InvalidBeamSpec(format!(
                "beamwidth {beamwidth} outside (0, 2]"
            )));
        }
        Ok(Self {
            direction,
            beamwidth,
        })
    }

    pub fn direction(&self) -> AngleU {
        self.direction
    }

    pub fn beamwidth(&self) -> f64 {
        self.beamwidth
    }

    /// Passband edges before clipping.
    pub fn passband(&self) -> (f64, f64) {
        let c = self.direction.value();
        (c - self.beamwidth / 2.0, c + self.beamwidth / 2.0)
    }

    /// The spec with its passband intersected with `[-1, 1)`.
    pub fn clipped(&self) -> Self {
        let (lo, hi) = self.passband();
        if lo >= -1.0 && hi <= 1.0 {
            return *self;
        }
        let (lo, hi) = (lo.max(-1.0), hi.min(1.0));
        let center = 0.5 * (lo + hi);
        Self {
            direction: AngleU::new(center).unwrap_or(self.direction),
            beamwidth: hi - lo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirDesignParams {
    /// Transition width as a fraction of the beamwidth.
    pub transition_fraction: f64,
    /// Dense-grid points per tap.
    pub grid_density: usize,
    pub max_remez_iterations: usize,
}

impl Default for FirDesignParams {
    fn default() -> Self {
        Self {
            transition_fraction: 0.2,
            grid_density: 16,
            max_remez_iterations: 40,
        }
    }
}

impl FirDesignParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.transition_fraction > 0.0 && self.transition_fraction < 1.0) {
            return Err(Error::InvalidDesign(format!(
                "transition fraction {} outside (0, 1)",
                self.transition_fraction
            )));
        }
        if self.grid_density == 0 || self.max_remez_iterations == 0 {
            return Err(Error::InvalidDesign(
                "grid density and iteration limit must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A unit-norm combiner of length `M` together with the (clipped) spec it
/// was designed for.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    weights: DVector<C64>,
    spec: BeamSpec,
    fallback: bool,
}

impl Beamformer {
    /// Wraps arbitrary weights, normalizing them to unit norm.
    pub fn from_weights(weights: DVector<C64>, spec: BeamSpec) -> Result<Self> {
        let norm = weights.norm();
        if weights.is_empty() || norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidDesign("weights must be nonzero".into()));
        }
        Ok(Self {
            weights: weights / Complex::from(norm),
            spec,
            fallback: false,
        })
    }

    pub fn weights(&self) -> &DVector<C64> {
        &self.weights
    }

    pub fn spec(&self) -> &BeamSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// True when the equiripple design failed and least squares was used.
    pub fn is_fallback(&self) -> bool {
        self.fallback
    }

    pub fn gain(&self, u: AngleU) -> C64 {
        gain_at(&self.weights, u.value())
    }

    /// Writes one tap per line as `real imag`.
    pub fn write_taps(&self, path: &Path) -> Result<()> {
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        for w in self.weights.iter() {
            writeln!(out, "{:.17e} {:.17e}", w.re, w.im).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// `f^H phi_M(u)` for any `u`, without range checks.
pub(crate) fn gain_at(f: &DVector<C64>, u: f64) -> C64 {
    let step = C64::from_polar(1.0, PI * u);
    let mut phase = C64::new(1.0, 0.0);
    let mut acc = C64::new(0.0, 0.0);
    for w in f.iter() {
        acc += w.conj() * phase;
        phase *= step;
    }
    acc
}

/// Complex gain `f^H phi_M(u)` of a beamformer.
pub fn beam_gain(f: &Beamformer, u: AngleU) -> C64 {
    f.gain(u)
}

/// Real symmetric lowpass prototype with passband half-width
/// `half_width` and transition width `transition`, both in `u`.
///
/// Returns the taps and whether the least-squares fallback was used.
pub fn lowpass_prototype(
    m: usize,
    half_width: f64,
    transition: f64,
    params: &FirDesignParams,
) -> Result<(Vec<f64>, bool)> {
    params.validate()?;
    if m == 0 {
        return Err(Error::ArrayTooSmall { min: 1, got: 0 });
    }
    if half_width.is_nan() || transition.is_nan() || half_width <= 0.0 || transition <= 0.0 {
        return Err(Error::InvalidDesign(format!(
            "band edges half-width {half_width}, transition {transition}"
        )));
    }
    if m == 1 {
        return Ok((vec![1.0], false));
    }
    // u maps to u/2 cycles per sample.
    let pass_edge = half_width / 2.0;
    let stop_edge = (half_width + transition) / 2.0;

    if pass_edge >= 0.5 && m % 2 == 1 {
        let mut h = vec![0.0; m];
        h[m / 2] = 1.0;
        return Ok((h, false));
    }
    let pass = Band {
        lo: 0.0,
        hi: pass_edge.min(0.5),
        desired: 1.0,
        weight: 1.0,
    };
    let bands: Vec<Band> = if stop_edge >= 0.5 {
        vec![pass]
    } else {
        vec![
            pass,
            Band {
                lo: stop_edge,
                hi: 0.5,
                desired: 0.0,
                weight: 1.0,
            },
        ]
    };

    // Short filters with narrow bands may leave too few grid points for the
    // reference set; densify before giving up on the exchange.
    let mut density = params.grid_density;
    for _ in 0..4 {
        match remez::remez(m, &bands, density, params.max_remez_iterations) {
            Ok(h) => return Ok((h, false)),
            Err(remez::RemezError::BadBands(msg)) => return Err(Error::InvalidDesign(msg)),
            Err(remez::RemezError::TooFewGridPoints) => density *= 4,
            Err(_) => break,
        }
    }
    remez::least_squares(m, &bands, density)
        .map(|h| (h, true))
        .map_err(|e| Error::InvalidDesign(format!("{e:?}")))
}

/// Transition width in `u` for a beam of width `beamwidth` on `m` taps.
///
/// Very narrow beams get a floor of `2/m` (about one mainlobe width of an
/// `m`-element aperture), otherwise the design loses its passband.
pub fn transition_width(beamwidth: f64, m: usize, params: &FirDesignParams) -> f64 {
    (params.transition_fraction * beamwidth).max(2.0 / m.max(1) as f64)
}

/// Designs a unit-norm steered beamformer of length `m`.
pub fn design_beamformer(spec: BeamSpec, m: usize, params: &FirDesignParams) -> Result<Beamformer> {
    let spec = spec.clipped();
    if m == 1 {
        return Ok(Beamformer {
            weights: DVector::from_element(1, C64::new(1.0, 0.0)),
            spec,
            fallback: false,
        });
    }
    let bw = spec.beamwidth();
    let (proto, fallback) =
        lowpass_prototype(m, bw / 2.0, transition_width(bw, m, params), params)?;
    let center = spec.direction().value();
    let weights = DVector::from_iterator(
        m,
        proto
            .iter()
            .enumerate()
            .map(|(n, &h)| C64::from_polar(h, PI * n as f64 * center)),
    );
    let mut bf = Beamformer::from_weights(weights, spec)?;
    bf.fallback = fallback;
    Ok(bf)
}

/// Node `(level, index)` of the binary codebook.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId {
    pub level: usize,
    pub index: usize,
}

/// Binary tree of beams; level `l` splits the RoI into `2^l` equal spans.
#[derive(Debug, Clone)]
pub struct HierarchicalCodebook {
    roi: RegionOfInterest,
    levels: Vec<Vec<Beamformer>>,
}

impl HierarchicalCodebook {
    pub fn build(
        roi: RegionOfInterest,
        depth: usize,
        m: usize,
        params: &FirDesignParams,
        grid_size: usize,
    ) -> Result<Self> {
        if depth >= usize::BITS as usize - 1 || (1usize << depth) > grid_size {
            return Err(Error::CodebookTooDeep {
                depth,
                grid: grid_size,
            });
        }
        let mut levels = Vec::with_capacity(depth + 1);
        for level in 0..=depth {
            let nodes = (0..1usize << level)
                .map(|k| {
                    let (lo, hi) = node_span(&roi, level, k);
                    let spec = BeamSpec::new(AngleU::new(0.5 * (lo + hi))?, hi - lo)?;
                    design_beamformer(spec, m, params)
                })
                .collect::<Result<Vec<_>>>()?;
            levels.push(nodes);
        }
        Ok(Self { roi, levels })
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn roi(&self) -> &RegionOfInterest {
        &self.roi
    }

    pub fn level(&self, level: usize) -> &[Beamformer] {
        &self.levels[level]
    }

    pub fn node(&self, id: NodeId) -> &Beamformer {
        &self.levels[id.level][id.index]
    }

    pub fn span(&self, id: NodeId) -> (f64, f64) {
        node_span(&self.roi, id.level, id.index)
    }
}

/// Half-open `u`-span `[lo, hi)` of node `k` at `level`.
pub fn node_span(roi: &RegionOfInterest, level: usize, k: usize) -> (f64, f64) {
    let step = roi.width() / (1usize << level) as f64;
    (
        roi.left() + k as f64 * step,
        roi.left() + (k + 1) as f64 * step,
    )
}
