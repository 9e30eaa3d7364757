//! Sliding virtual-array measurements.
//!
//! During segment `t` a single length-`M` beamformer slides one position
//! per snapshot across the physical aperture, so the `N_v` scalar outputs
//! of the segment sample a virtual `N_v`-element array:
//! `y_t = sqrt(P_s) * alpha * beta_t(u) * phi_{N_v}(u) + n_t`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::array::{manifold_unchecked, SlaGeometry, C64};
use crate::channel::{antenna_snapshot, combine, ChannelParams};
use crate::error::{Error, Result};
use crate::filter::{gain_at, Beamformer};
use crate::inference::AngularGrid;

/// Where the virtual sensors sit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VirtualGeometry {
    /// Contiguous half-wavelength virtual ULA.
    Ula,
    /// Virtual sensors at the given positions.
    Sparse(SlaGeometry),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SvamConfig {
    n: usize,
    n_v: usize,
    geometry: VirtualGeometry,
}

impl SvamConfig {
    pub fn ula(n: usize, n_v: usize) -> Result<Self> {
        if n_v == 0 || n_v > n {
            return Err(Error::InvalidConfig(format!(
                "virtual size {n_v} must lie in 1..={n}"
            )));
        }
        Ok(Self {
            n,
            n_v,
            geometry: VirtualGeometry::Ula,
        })
    }

    /// Sparse virtual array; the physical array size is the geometry's aperture.
    pub fn sla(geometry: SlaGeometry) -> Self {
        Self {
            n: geometry.aperture(),
            n_v: geometry.len(),
            geometry: VirtualGeometry::Sparse(geometry),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn geometry(&self) -> &VirtualGeometry {
        &self.geometry
    }

    /// Beamformer length.
    pub fn m(&self) -> usize {
        self.n - self.shift(self.n_v - 1)
    }

    /// Leading zeros of the combiner at snapshot `l`.
    fn shift(&self, l: usize) -> usize {
        let k = l % self.n_v;
        match &self.geometry {
            VirtualGeometry::Ula => k,
            VirtualGeometry::Sparse(g) => g.positions()[k],
        }
    }

    /// Virtual array response toward `u`.
    pub fn virtual_manifold(&self, u: f64) -> DVector<C64> {
        match &self.geometry {
            VirtualGeometry::Ula => manifold_unchecked(self.n_v, u),
            VirtualGeometry::Sparse(g) => DVector::from_iterator(
                g.len(),
                g.positions()
                    .iter()
                    .map(|&p| C64::from_polar(1.0, std::f64::consts::PI * p as f64 * u)),
            ),
        }
    }

    /// Number of segments in `l` snapshots; `N_v` must divide `l`.
    pub fn segments(&self, l: usize) -> Result<usize> {
        if l == 0 || !l.is_multiple_of(self.n_v) {
            return Err(Error::InvalidConfig(format!(
                "training length {l} is not a positive multiple of N_v = {}",
                self.n_v
            )));
        }
        Ok(l / self.n_v)
    }
}

/// Full-aperture combiner for snapshot `l`: `f` zero-padded at the
/// snapshot's slide offset.
pub fn svam_combiner(f: &DVector<C64>, l: usize, config: &SvamConfig) -> Result<DVector<C64>> {
    if f.len() != config.m() {
        return Err(Error::DimensionMismatch {
            expected: config.m(),
            got: f.len(),
        });
    }
    let mut w = DVector::zeros(config.n);
    w.rows_mut(config.shift(l), f.len()).copy_from(f);
    Ok(w)
}

/// Combiner for snapshot `l` under block repetition: column `floor(l/N_v)`
/// of `codewords` (each column is one segment's full-length beamformer).
pub fn benchmark_combiner(codewords: &DMatrix<C64>, l: usize, n_v: usize) -> DVector<C64> {
    codewords.column(l / n_v.max(1)).into_owned()
}

/// Expands segment beamformers (`M x T`) into the per-snapshot combiner
/// matrix (`N x T*N_v`).
pub fn expand_svam(columns: &DMatrix<C64>, config: &SvamConfig) -> Result<DMatrix<C64>> {
    let t = columns.ncols();
    let mut w = DMatrix::zeros(config.n, t * config.n_v);
    for l in 0..t * config.n_v {
        let f = columns.column(l / config.n_v).into_owned();
        w.set_column(l, &svam_combiner(&f, l, config)?);
    }
    Ok(w)
}

/// Repeats each column of `codewords` `n_v` times.
pub fn expand_benchmark(codewords: &DMatrix<C64>, n_v: usize) -> DMatrix<C64> {
    let t = codewords.ncols();
    DMatrix::from_fn(codewords.nrows(), t * n_v, |r, c| codewords[(r, c / n_v)])
}

/// The `N_v` scalar outputs of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMeasurement {
    pub y: DVector<C64>,
    pub t: usize,
}

/// Runs the `N_v` snapshots of segment `t` through the sliding combiner.
pub fn measure_segment<R: Rng + ?Sized>(
    f: &Beamformer,
    params: &ChannelParams,
    config: &SvamConfig,
    t: usize,
    rng: &mut R,
) -> Result<SegmentMeasurement> {
    let y = (0..config.n_v)
        .map(|k| {
            let l = t * config.n_v + k;
            let w = svam_combiner(f.weights(), l, config)?;
            combine(&w, &antenna_snapshot(params, config.n, l, rng))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SegmentMeasurement {
        y: DVector::from_vec(y),
        t,
    })
}

/// Everything measured so far, plus the per-grid-point sufficient
/// statistics the posterior needs.
#[derive(Debug, Clone)]
pub struct MeasurementHistory {
    n_v: usize,
    manifolds: Vec<DVector<C64>>,
    segments: Vec<DVector<C64>>,
    /// `gains[t][i] = beta_t(u_i)`.
    gains: Vec<Vec<C64>>,
    cumulative_gain: Vec<f64>,
    /// `matched[i] = sum_t conj(beta_t(u_i)) * y_t`.
    matched: Vec<DVector<C64>>,
    beamformers: Vec<Beamformer>,
}

impl MeasurementHistory {
    pub fn new(config: &SvamConfig, grid: &AngularGrid) -> Self {
        let manifolds: Vec<_> = grid
            .points()
            .iter()
            .map(|&u| config.virtual_manifold(u))
            .collect();
        let g = manifolds.len();
        Self {
            n_v: config.n_v,
            manifolds,
            segments: Vec::new(),
            gains: Vec::new(),
            cumulative_gain: vec![0.0; g],
            matched: vec![DVector::zeros(config.n_v); g],
            beamformers: Vec::new(),
        }
    }

    /// Appends segment `y_t` measured with beamformer `f_t`.
    pub fn append(
        &mut self,
        y: &SegmentMeasurement,
        f: &Beamformer,
        grid: &AngularGrid,
    ) -> Result<()> {
        if y.y.len() != self.n_v {
            return Err(Error::DimensionMismatch {
                expected: self.n_v,
                got: y.y.len(),
            });
        }
        if grid.len() != self.manifolds.len() {
            return Err(Error::DimensionMismatch {
                expected: self.manifolds.len(),
                got: grid.len(),
            });
        }
        let betas: Vec<C64> = grid
            .points()
            .iter()
            .map(|&u| gain_at(f.weights(), u))
            .collect();
        for (i, b) in betas.iter().enumerate() {
            self.cumulative_gain[i] += b.norm_sqr();
            self.matched[i].axpy(b.conj(), &y.y, C64::new(1.0, 0.0));
        }
        self.gains.push(betas);
        self.segments.push(y.y.clone());
        self.beamformers.push(f.clone());
        Ok(())
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    /// Number of segments recorded.
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn grid_len(&self) -> usize {
        self.manifolds.len()
    }

    pub fn segments(&self) -> &[DVector<C64>] {
        &self.segments
    }

    pub fn beamformers(&self) -> &[Beamformer] {
        &self.beamformers
    }

    /// Virtual manifold at grid point `i`.
    pub fn manifold(&self, i: usize) -> &DVector<C64> {
        &self.manifolds[i]
    }

    /// `beta_t(u_i)`.
    pub fn gain(&self, t: usize, i: usize) -> C64 {
        self.gains[t][i]
    }

    /// `[beta_0(u_i), ..., beta_t(u_i)]`.
    pub fn gain_history(&self, i: usize) -> Vec<C64> {
        self.gains.iter().map(|g| g[i]).collect()
    }

    /// `g_t(u_i) = sum_t |beta_t(u_i)|^2`.
    pub fn cumulative_gain(&self, i: usize) -> f64 {
        self.cumulative_gain[i]
    }

    /// `sum_t conj(beta_t(u_i)) * y_t`.
    pub fn matched_sum(&self, i: usize) -> &DVector<C64> {
        &self.matched[i]
    }

    /// Stacked measurement vector `[y_0; ...; y_t]`.
    pub fn stacked(&self) -> DVector<C64> {
        DVector::from_iterator(
            self.segments.len() * self.n_v,
            self.segments.iter().flat_map(|s| s.iter().copied()),
        )
    }
}
