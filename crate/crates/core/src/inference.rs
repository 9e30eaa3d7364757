//! Grid-based angular posterior.
//!
//! Each grid point `u_i` carries its own complex gain `alpha_i ~ CN(0,
//! gamma_i)`. The hyperparameter `gamma_i` is fit by maximizing the
//! evidence, `alpha_i` is then integrated out under its Gaussian
//! posterior, and the resulting per-point likelihoods are normalized into a
//! pmf over the grid. Because the stacked covariance is a rank-one update
//! of `sigma^2 I`, determinants and quadratic forms reduce to scalars.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::array::{AngleU, RegionOfInterest, C64};
use crate::error::{Error, Result};
use crate::svam::MeasurementHistory;

/// `G` cell-centred points covering the RoI: `u_i = left + (i + 1/2) du`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularGrid {
    roi: RegionOfInterest,
    points: Vec<f64>,
}

impl AngularGrid {
    pub fn new(roi: RegionOfInterest, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Empty("angular grid"));
        }
        let du = roi.width() / size as f64;
        let points = (0..size)
            .map(|i| roi.left() + (i as f64 + 0.5) * du)
            .collect();
        Ok(Self { roi, points })
    }

    pub fn roi(&self) -> &RegionOfInterest {
        &self.roi
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.roi.width() / self.points.len() as f64
    }

    pub fn angle(&self, i: usize) -> AngleU {
        AngleU::new(self.points[i]).expect("grid points lie inside [-1, 1)")
    }

    /// Index of the cell containing `u`, clamped to the grid.
    pub fn cell_of(&self, u: f64) -> usize {
        let k = ((u - self.roi.left()) / self.spacing()).floor();
        (k.max(0.0) as usize).min(self.points.len() - 1)
    }
}

/// Evidence-maximizing prior variances, one per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaEstimates(pub Vec<f64>);

/// Gaussian posterior of each grid point's gain.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaPosterior {
    pub mean: Vec<C64>,
    pub variance: Vec<f64>,
}

/// Normalized probabilities over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorPmf(Vec<f64>);

impl PosteriorPmf {
    pub fn uniform(size: usize) -> Self {
        Self(vec![1.0 / size as f64; size])
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("pmf weights"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::DegeneratePosterior);
        }
        Ok(Self(weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Most probable index; the lowest index wins ties.
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// Total mass over `range`.
    pub fn mass(&self, range: std::ops::Range<usize>) -> f64 {
        self.0[range].iter().sum()
    }
}

/// `phi^H s_i`, the matched statistic for grid point `i`.
fn matched_statistic(history: &MeasurementHistory, i: usize) -> C64 {
    history.manifold(i).dotc(history.matched_sum(i))
}

pub fn gamma_mle(
    history: &MeasurementHistory,
    power: f64,
    noise_variance: f64,
) -> Result<GammaEstimates> {
    if history.is_empty() {
        return Err(Error::Empty("measurement history"));
    }
    let gammas = (0..history.grid_len())
        .map(|i| {
            let gain = history.cumulative_gain(i) * history.manifold(i).norm_squared();
            if gain <= 0.0 || power <= 0.0 {
                return 0.0;
            }
            let energy = matched_statistic(history, i).norm_sqr() / gain;
            ((energy - noise_variance) / (power * gain)).max(0.0)
        })
        .collect();
    Ok(GammaEstimates(gammas))
}

pub fn alpha_posterior(
    history: &MeasurementHistory,
    gamma: &GammaEstimates,
    power: f64,
    noise_variance: f64,
) -> AlphaPosterior {
    let g = history.grid_len();
    let mut mean = vec![C64::new(0.0, 0.0); g];
    let mut variance = vec![0.0; g];
    for i in 0..g {
        let gi = gamma.0[i];
        if gi <= 0.0 {
            continue;
        }
        let gain = history.cumulative_gain(i) * history.manifold(i).norm_squared();
        let denom = power * gi * gain + noise_variance;
        if denom <= 0.0 {
            continue;
        }
        mean[i] = matched_statistic(history, i) * (power.sqrt() * gi / denom);
        variance[i] = gi * noise_variance / denom;
    }
    AlphaPosterior { mean, variance }
}

/// Terms of the approximate likelihood at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodTerms {
    /// `ln det` of the stacked covariance.
    pub log_det: f64,
    /// `e^H Sigma^{-1} e` for the residual about the posterior mean.
    pub quadratic: f64,
    /// Number of stacked scalar measurements.
    pub dim: usize,
}

impl LikelihoodTerms {
    pub fn log_density(&self) -> f64 {
        -(self.dim as f64) * PI.ln() - self.log_det - self.quadratic
    }
}

/// Closed-form covariance terms at grid point `i`.
pub fn likelihood_terms(
    history: &MeasurementHistory,
    posterior: &AlphaPosterior,
    i: usize,
    power: f64,
    noise_variance: f64,
) -> Result<LikelihoodTerms> {
    if noise_variance <= 0.0 {
        return Err(Error::ZeroNoise);
    }
    let phi = history.manifold(i);
    let shift = posterior.mean[i] * power.sqrt();
    let mut residual_energy = 0.0;
    let mut projected = C64::new(0.0, 0.0);
    let mut e = DVector::zeros(phi.len());
    for (t, y) in history.segments().iter().enumerate() {
        let beta = history.gain(t, i);
        e.copy_from(y);
        e.axpy(-(shift * beta), phi, C64::new(1.0, 0.0));
        residual_energy += e.norm_squared();
        projected += beta.conj() * phi.dotc(&e);
    }
    let dim = history.len() * history.n_v();
    let rank_one = power * posterior.variance[i] * history.cumulative_gain(i) * phi.norm_squared();
    let c = rank_one + noise_variance;
    let log_det = c.ln() + (dim as f64 - 1.0) * noise_variance.ln();
    let quadratic = residual_energy / noise_variance
        - power * posterior.variance[i] / noise_variance * projected.norm_sqr() / c;
    Ok(LikelihoodTerms {
        log_det,
        quadratic,
        dim,
    })
}

/// Log of the approximate likelihood at every grid point.
pub fn approx_likelihood(
    history: &MeasurementHistory,
    posterior: &AlphaPosterior,
    power: f64,
    noise_variance: f64,
) -> Result<Vec<f64>> {
    (0..history.grid_len())
        .map(|i| {
            likelihood_terms(history, posterior, i, power, noise_variance).map(|t| t.log_density())
        })
        .collect()
}

/// Normalizes log-likelihoods into a pmf.
pub fn posterior_pmf(log_likelihoods: &[f64]) -> Result<PosteriorPmf> {
    if log_likelihoods.is_empty() {
        return Err(Error::Empty("likelihoods"));
    }
    let peak = log_likelihoods
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::DegeneratePosterior);
    }
    let weights = log_likelihoods
        .iter()
        .map(|&l| if l.is_nan() { 0.0 } else { (l - peak).exp() })
        .collect();
    PosteriorPmf::from_weights(weights)
}

/// One full posterior update from the history.
pub struct PosteriorState {
    pub gamma: GammaEstimates,
    pub alpha: AlphaPosterior,
    pub pmf: PosteriorPmf,
}

pub fn update_posterior(
    history: &MeasurementHistory,
    power: f64,
    noise_variance: f64,
) -> Result<PosteriorState> {
    let gamma = gamma_mle(history, power, noise_variance)?;
    let alpha = alpha_posterior(history, &gamma, power, noise_variance);
    let pmf = posterior_pmf(&approx_likelihood(history, &alpha, power, noise_variance)?)?;
    Ok(PosteriorState { gamma, alpha, pmf })
}

/// Sequential Bayes update with a known gain, given the noiseless
/// combiner responses `responses[i] = w^H phi_N(u_i)`.
pub fn known_alpha_update(
    prior: &PosteriorPmf,
    y: C64,
    responses: &[C64],
    alpha: C64,
    power: f64,
    noise_variance: f64,
) -> Result<PosteriorPmf> {
    if noise_variance <= 0.0 {
        return Err(Error::ZeroNoise);
    }
    if responses.len() != prior.len() {
        return Err(Error::DimensionMismatch {
            expected: prior.len(),
            got: responses.len(),
        });
    }
    let amp = alpha * power.sqrt();
    let logs: Vec<f64> = prior
        .probs()
        .iter()
        .zip(responses)
        .map(|(&p, &r)| {
            if p > 0.0 {
                p.ln() - (y - amp * r).norm_sqr() / noise_variance
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    posterior_pmf(&logs)
}

/// [`known_alpha_update`] for an explicit combiner `w`.
pub fn known_alpha_posterior(
    prior: &PosteriorPmf,
    y: C64,
    w: &DVector<C64>,
    alpha: C64,
    grid: &AngularGrid,
    power: f64,
    noise_variance: f64,
) -> Result<PosteriorPmf> {
    let norm = w.norm();
    if norm > 1.0 + 1e-9 {
        return Err(Error::ColumnNorm { column: 0, norm });
    }
    let responses: Vec<C64> = grid
        .points()
        .iter()
        .map(|&u| crate::filter::gain_at(w, u))
        .collect();
    known_alpha_update(prior, y, &responses, alpha, power, noise_variance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::manifold_unchecked;
    use crate::channel::{complex_normal, ChannelParams};
    use crate::filter::{design_beamformer, BeamSpec, Beamformer, FirDesignParams};
    use crate::svam::{measure_segment, SegmentMeasurement, SvamConfig};
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(g: usize) -> AngularGrid {
        AngularGrid::new(RegionOfInterest::default(), g).unwrap()
    }

    fn beam(c: f64, bw: f64, m: usize) -> Beamformer {
        let spec = BeamSpec::new(AngleU::new(c).unwrap(), bw).unwrap();
        design_beamformer(spec, m, &FirDesignParams::default()).unwrap()
    }

    /// History of `t` noisy segments from a single on-grid path.
    fn history(
        cfg: &SvamConfig,
        grid: &AngularGrid,
        truth: usize,
        t: usize,
        noise: f64,
        seed: u64,
    ) -> MeasurementHistory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params =
            ChannelParams::single_path(1.0, C64::new(0.6, 0.8), grid.angle(truth), noise).unwrap();
        let mut h = MeasurementHistory::new(cfg, grid);
        for k in 0..t {
            let f = beam(0.2 + 0.15 * k as f64, 0.5, cfg.m());
            let seg = measure_segment(&f, &params, cfg, k, &mut rng).unwrap();
            h.append(&seg, &f, grid).unwrap();
        }
        h
    }

    #[test]
    fn grid_layout() {
        let g = grid(64);
        assert_eq!(g.len(), 64);
        assert!((g.points()[0] - 0.5 / 64.0).abs() < 1e-15);
        for w in g.points().windows(2) {
            assert!((w[1] - w[0] - 1.0 / 64.0).abs() < 1e-12);
        }
        assert!(g.points().iter().all(|&u| (0.0..1.0).contains(&u)));
        assert_eq!(g.cell_of(g.points()[17]), 17);
        assert_eq!(g.cell_of(-0.3), 0);
        assert_eq!(g.cell_of(1.5), 63);
    }

    #[test]
    fn zero_data_gives_zero_gamma_and_flat_likelihood() {
        let cfg = SvamConfig::ula(8, 2).unwrap();
        let grid = grid(16);
        let mut h = MeasurementHistory::new(&cfg, &grid);
        for t in 0..3 {
            let seg = SegmentMeasurement {
                y: DVector::zeros(2),
                t,
            };
            h.append(&seg, &beam(0.5, 1.0, cfg.m()), &grid).unwrap();
        }
        let gamma = gamma_mle(&h, 1.0, 0.1).unwrap();
        assert!(gamma.0.iter().all(|&g| g == 0.0));
        let post = alpha_posterior(&h, &gamma, 1.0, 0.1);
        assert!(post.mean.iter().all(|m| *m == C64::new(0.0, 0.0)));
        assert!(post.variance.iter().all(|&v| v == 0.0));
        let ll = approx_likelihood(&h, &post, 1.0, 0.1).unwrap();
        assert!(ll.iter().all(|&l| l == ll[0]));
        let pmf = posterior_pmf(&ll).unwrap();
        assert!(pmf.probs().iter().all(|&p| (p - 1.0 / 16.0).abs() < 1e-15));
    }

    #[test]
    fn noiseless_gamma_and_mean_recover_gain() {
        let cfg = SvamConfig::ula(16, 4).unwrap();
        let grid = grid(32);
        let truth = 11;
        let h = history(&cfg, &grid, truth, 3, 0.0, 1);
        let gamma = gamma_mle(&h, 1.0, 0.0).unwrap();
        assert!((gamma.0[truth] - 1.0).abs() < 1e-12);

        let noise = 0.05;
        let gamma = gamma_mle(&h, 1.0, noise).unwrap();
        let gain = h.cumulative_gain(truth) * 4.0;
        assert!((gamma.0[truth] - (1.0 - noise / gain)).abs() < 1e-12);

        let gamma = gamma_mle(&h, 1.0, 1e-12).unwrap();
        let post = alpha_posterior(&h, &gamma, 1.0, 1e-12);
        assert!((post.mean[truth] - C64::new(0.6, 0.8)).norm() < 1e-9);
    }

    #[test]
    fn posterior_contracts() {
        let cfg = SvamConfig::ula(16, 4).unwrap();
        let grid = grid(32);
        let h = history(&cfg, &grid, 20, 4, 0.5, 2);
        let gamma = gamma_mle(&h, 1.0, 0.5).unwrap();
        let post = alpha_posterior(&h, &gamma, 1.0, 0.5);
        for i in 0..grid.len() {
            assert!(post.variance[i] <= gamma.0[i]);
            if gamma.0[i] > 0.0 && h.cumulative_gain(i) > 0.0 {
                assert!(post.variance[i] < gamma.0[i]);
            }
        }
    }

    #[test]
    fn closed_forms_match_dense_algebra() {
        let cfg = SvamConfig::ula(10, 2).unwrap();
        let grid = grid(8);
        let h = history(&cfg, &grid, 3, 3, 0.3, 3);
        let gamma = gamma_mle(&h, 1.0, 0.3).unwrap();
        let post = alpha_posterior(&h, &gamma, 1.0, 0.3);
        let y = h.stacked();
        for i in 0..grid.len() {
            let terms = likelihood_terms(&h, &post, i, 1.0, 0.3).unwrap();
            let kron = DVector::from_iterator(
                y.len(),
                h.gain_history(i)
                    .into_iter()
                    .flat_map(|b| h.manifold(i).iter().map(move |p| b * p).collect::<Vec<_>>()),
            );
            let cov = &kron * kron.adjoint() * C64::from(post.variance[i])
                + DMatrix::identity(y.len(), y.len()) * C64::from(0.3);
            let e = &y - &kron * post.mean[i];
            let det = cov.clone().determinant().re;
            let quad = e.dotc(&cov.lu().solve(&e).unwrap()).re;
            assert!(((terms.log_det - det.ln()) / det.ln()).abs() < 1e-10);
            assert!(((terms.quadratic - quad) / quad).abs() < 1e-10);
        }
    }

    #[test]
    fn pmf_normalization() {
        let p = posterior_pmf(&[-1000.0, -1000.0, -1000.0, -1000.0]).unwrap();
        assert_eq!(p.probs(), &[0.25; 4]);
        let d = posterior_pmf(&[f64::NEG_INFINITY, -3.0, f64::NEG_INFINITY]).unwrap();
        assert_eq!(d.probs(), &[0.0, 1.0, 0.0]);
        assert!(matches!(
            posterior_pmf(&[f64::NEG_INFINITY; 3]),
            Err(Error::DegeneratePosterior)
        ));
        assert!(posterior_pmf(&[]).is_err());
        // Survives exponents far outside the double range.
        let q = posterior_pmf(&[-1e6, -1e6 + 1.0]).unwrap();
        assert!((q.probs()[1] - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn mode_prefers_lowest_index() {
        let p = PosteriorPmf::from_weights(vec![0.1, 0.4, 0.4, 0.1]).unwrap();
        assert_eq!(p.mode(), 1);
    }

    #[test]
    fn high_snr_pipeline_finds_truth() {
        let cfg = SvamConfig::ula(32, 4).unwrap();
        let grid = grid(32);
        for truth in [0, 7, 19, 31] {
            let h = history(&cfg, &grid, truth, 3, 0.0, 4);
            let state = update_posterior(&h, 1.0, 0.01).unwrap();
            assert_eq!(state.pmf.mode(), truth);
        }
    }

    #[test]
    fn likelihood_rejects_zero_noise() {
        let cfg = SvamConfig::ula(8, 2).unwrap();
        let grid = grid(8);
        let h = history(&cfg, &grid, 3, 1, 0.1, 5);
        let gamma = gamma_mle(&h, 1.0, 0.1).unwrap();
        let post = alpha_posterior(&h, &gamma, 1.0, 0.1);
        assert!(matches!(
            approx_likelihood(&h, &post, 1.0, 0.0),
            Err(Error::ZeroNoise)
        ));
    }

    #[test]
    fn segment_order_does_not_matter() {
        let cfg = SvamConfig::ula(12, 3).unwrap();
        let grid = grid(16);
        let params =
            ChannelParams::single_path(1.0, C64::new(1.0, 0.0), grid.angle(5), 0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let segs: Vec<_> = (0..5)
            .map(|t| {
                let f = beam(0.1 + 0.17 * t as f64, 0.4, cfg.m());
                (measure_segment(&f, &params, &cfg, t, &mut rng).unwrap(), f)
            })
            .collect();
        let run = |order: &[usize]| {
            let mut h = MeasurementHistory::new(&cfg, &grid);
            for &k in order {
                h.append(&segs[k].0, &segs[k].1, &grid).unwrap();
            }
            update_posterior(&h, 1.0, 0.4).unwrap().pmf
        };
        let a = run(&[0, 1, 2, 3, 4]);
        let b = run(&[3, 0, 4, 2, 1]);
        for (x, y) in a.probs().iter().zip(b.probs()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn known_gain_updates() {
        let grid = grid(16);
        let prior = PosteriorPmf::uniform(16);
        let mut e0 = DVector::zeros(8);
        e0[0] = C64::new(1.0, 0.0);
        let alpha = C64::new(0.0, 1.0);
        let same =
            known_alpha_posterior(&prior, C64::new(0.3, 0.1), &e0, alpha, &grid, 1.0, 0.5).unwrap();
        for (a, b) in same.probs().iter().zip(prior.probs()) {
            assert!((a - b).abs() < 1e-15);
        }

        let mut delta = vec![0.0; 16];
        delta[4] = 1.0;
        let delta = PosteriorPmf::from_weights(delta).unwrap();
        let w = manifold_unchecked(8, 0.3) / C64::from(8f64.sqrt());
        let out =
            known_alpha_posterior(&delta, C64::new(5.0, 0.0), &w, alpha, &grid, 1.0, 0.5).unwrap();
        assert_eq!(out, delta);

        let truth = 9;
        let w = manifold_unchecked(8, grid.points()[truth]) / C64::from(8f64.sqrt());
        let y = alpha * w.dotc(&manifold_unchecked(8, grid.points()[truth]));
        let post = known_alpha_posterior(&prior, y, &w, alpha, &grid, 1.0, 0.5).unwrap();
        assert!(post.probs()[truth] > prior.probs()[truth]);
        assert_eq!(post.mode(), truth);

        let loud = &w * C64::from(2.0);
        assert!(known_alpha_posterior(&prior, y, &loud, alpha, &grid, 1.0, 0.5).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn pmf_is_normalized(seed in 0u64..1000, t in 1usize..5, noise in 0.01f64..2.0) {
            let cfg = SvamConfig::ula(12, 3).unwrap();
            let grid = grid(24);
            let h = history(&cfg, &grid, (seed % 24) as usize, t, noise, seed);
            let pmf = update_posterior(&h, 1.0, noise).unwrap().pmf;
            proptest::prop_assert!(pmf.probs().iter().all(|&p| p >= 0.0));
            proptest::prop_assert!((pmf.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn gamma_grows_with_data_scale(seed in 0u64..1000, scale in 1.0f64..5.0) {
            let cfg = SvamConfig::ula(12, 3).unwrap();
            let grid = grid(16);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut small = MeasurementHistory::new(&cfg, &grid);
            let mut big = MeasurementHistory::new(&cfg, &grid);
            for t in 0..3 {
                let y = DVector::from_fn(3, |_, _| complex_normal(&mut rng, 1.0));
                let f = beam(0.2 + 0.3 * t as f64, 0.5, cfg.m());
                small.append(&SegmentMeasurement { y: y.clone(), t }, &f, &grid).unwrap();
                big.append(&SegmentMeasurement { y: y * C64::from(scale), t }, &f, &grid).unwrap();
            }
            let a = gamma_mle(&small, 1.0, 0.3).unwrap();
            let b = gamma_mle(&big, 1.0, 0.3).unwrap();
            for (x, y) in a.0.iter().zip(&b.0) {
                proptest::prop_assert!(y >= x);
            }
        }
    }
}
