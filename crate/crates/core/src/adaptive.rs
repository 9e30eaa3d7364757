//! Closed-loop beam alignment controllers.
//!
//! [`Aligner`] runs the adaptive sliding-beam loop: after every segment it
//! refreshes the grid posterior and picks the next beam either by
//! shrinking/widening a flexible FIR beam around the posterior peak or by
//! walking a binary hierarchical codebook. [`HiepmRunner`] is the
//! known-gain hierarchical posterior matching baseline, in a sliding and a
//! repeating variant.

use nalgebra::DVector;
use rand::Rng;

use crate::array::{manifold_unchecked, AngleU, RegionOfInterest, C64};
use crate::channel::{antenna_snapshot, combine, ChannelParams};
use crate::error::{Error, Result};
use crate::filter::{
    design_beamformer, gain_at, node_span, BeamSpec, Beamformer, FirDesignParams,
    HierarchicalCodebook, NodeId,
};
use crate::inference::{known_alpha_update, update_posterior, AngularGrid, PosteriorPmf};
use crate::svam::{measure_segment, svam_combiner, MeasurementHistory, SvamConfig};

/// How the next beam is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CodebookMode {
    /// Any center and any power-of-two fraction of the initial width.
    #[default]
    Flexible,
    /// Nodes of a binary codebook over the RoI.
    Hierarchical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptConfig {
    /// Physical array size.
    pub n: usize,
    /// Total snapshots.
    pub l: usize,
    /// Virtual array size (snapshots per segment).
    pub n_v: usize,
    pub p_thresh: f64,
    pub bw_initial: f64,
    pub roi: RegionOfInterest,
    pub grid_size: usize,
    pub mode: CodebookMode,
    pub fir: FirDesignParams,
    /// Multiplier on the true noise variance assumed by the posterior.
    pub noise_scale: f64,
    /// Shallowest level the hierarchical search may start at; 0 disables
    /// the deeper start.
    pub hier_min_start_level: usize,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            n: 64,
            l: 120,
            n_v: 4,
            p_thresh: 0.6,
            bw_initial: 1.0,
            roi: RegionOfInterest::default(),
            grid_size: 64,
            mode: CodebookMode::Flexible,
            fir: FirDesignParams::default(),
            noise_scale: 1.0,
            hier_min_start_level: 0,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_v == 0 || self.n_v > self.n {
            return bad(format!("N_v = {} must lie in 1..={}", self.n_v, self.n));
        }
        if self.l == 0 || !self.l.is_multiple_of(self.n_v) {
            return bad(format!("N_v = {} must divide L = {}", self.n_v, self.l));
        }
        if !(self.p_thresh > 0.0 && self.p_thresh < 1.0) {
            return bad(format!("p_thresh {} outside (0, 1)", self.p_thresh));
        }
        if !(self.bw_initial > 0.0 && self.bw_initial <= 2.0) {
            return bad(format!(
                "initial beamwidth {} outside (0, 2]",
                self.bw_initial
            ));
        }
        if self.bw_initial < self.roi.width() {
            return bad("initial beam must cover the RoI".into());
        }
        if self.grid_size == 0 {
            return bad("grid must be nonempty".into());
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return bad(format!("noise scale {}", self.noise_scale));
        }
        if self.mode == CodebookMode::Hierarchical && !self.grid_size.is_power_of_two() {
            return bad("hierarchical mode needs a power-of-two grid".into());
        }
        self.fir.validate()
    }

    pub fn segments(&self) -> usize {
        self.l / self.n_v
    }
}

/// A node of the binary codebook.
pub type HierNode = NodeId;

/// What happened in one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRecord {
    pub t: usize,
    /// Beam used to collect this segment.
    pub spec: BeamSpec,
    /// `|beta_t(u_true)|^2`, linear.
    pub gain_at_truth: f64,
    /// Posterior mass backing the next beam decision.
    pub peak_prob: f64,
    /// Posterior mode after this segment.
    pub mode_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub segments: Vec<SegmentRecord>,
    pub estimate: AngleU,
    pub truth: AngleU,
}

impl TrialRecord {
    pub fn squared_error(&self) -> f64 {
        (self.estimate.value() - self.truth.value()).powi(2)
    }
}

/// Window of `bw_check` around the pmf mode carrying the most mass.
///
/// Returns that mass and the beam centered on the window, kept inside the
/// RoI.
pub fn cumul_peak(
    pmf: &PosteriorPmf,
    bw_check: f64,
    grid: &AngularGrid,
) -> Result<(f64, BeamSpec)> {
    let g = grid.len() as isize;
    let du = grid.spacing();
    let width = ((bw_check / du).round() as isize).clamp(1, g);
    let mode = pmf.mode() as isize;
    let probs = pmf.probs();
    let window_mass = |s: isize| -> f64 {
        let lo = s.max(0) as usize;
        let hi = (s + width).min(g) as usize;
        probs[lo..hi].iter().sum()
    };
    let mut best_start = mode - width + 1;
    let mut best = window_mass(best_start);
    for s in best_start + 1..=mode {
        let m = window_mass(s);
        if m > best {
            best = m;
            best_start = s;
        }
    }
    let roi = grid.roi();
    let center = if bw_check >= roi.width() {
        roi.center()
    } else {
        let c = roi.left() + (best_start as f64 + width as f64 / 2.0) * du;
        c.clamp(roi.left() + bw_check / 2.0, roi.right() - bw_check / 2.0)
    };
    Ok((
        best.min(1.0),
        BeamSpec::new(AngleU::new(center)?, bw_check)?,
    ))
}

/// Halves the current beamwidth, then doubles until the window around the
/// posterior peak holds `p_thresh` of the mass. Falls back to the initial
/// beam once the width reaches `bw_initial`.
pub fn select_next_beam(
    pmf: &PosteriorPmf,
    bw_current: f64,
    p_thresh: f64,
    grid: &AngularGrid,
    bw_initial: f64,
) -> Result<(BeamSpec, f64)> {
    let mut bw_check = (0.5 * bw_current).max(grid.spacing());
    loop {
        if bw_check >= bw_initial {
            let spec = BeamSpec::new(AngleU::new(grid.roi().center())?, bw_initial)?;
            return Ok((spec, 1.0));
        }
        let (peak, spec) = cumul_peak(pmf, bw_check, grid)?;
        if peak >= p_thresh {
            return Ok((spec, peak));
        }
        bw_check *= 2.0;
    }
}

/// Summed pmf mass inside codebook node `(level, k)`.
pub fn node_mass(pmf: &PosteriorPmf, level: usize, k: usize) -> f64 {
    let cells = pmf.len() >> level;
    pmf.mass(k * cells..(k + 1) * cells)
}

/// Starts one level below `l_init` at the node holding the pmf mode and
/// climbs towards the root until a node holds `p_thresh` of the mass.
pub fn hier_beam_search(
    l_init: usize,
    pmf: &PosteriorPmf,
    p_thresh: f64,
    depth: usize,
    min_start_level: usize,
) -> Result<(HierNode, f64)> {
    let g = pmf.len();
    if depth >= usize::BITS as usize || !g.is_multiple_of(1usize << depth) {
        return Err(Error::CodebookTooDeep { depth, grid: g });
    }
    let mut level = (l_init + 1).max(min_start_level).min(depth);
    let mut k = (pmf.mode() << level) / g;
    loop {
        let mass = node_mass(pmf, level, k);
        if mass >= p_thresh || level == 0 {
            return Ok((HierNode { level, index: k }, mass));
        }
        k /= 2;
        level -= 1;
    }
}

/// Reusable per-configuration state for [`Aligner::run`].
#[derive(Debug, Clone)]
pub struct Aligner {
    config: AdaptConfig,
    svam: SvamConfig,
    grid: AngularGrid,
    initial: Beamformer,
    codebook: Option<HierarchicalCodebook>,
}

impl Aligner {
    pub fn new(config: AdaptConfig) -> Result<Self> {
        config.validate()?;
        let svam = SvamConfig::ula(config.n, config.n_v)?;
        let grid = AngularGrid::new(config.roi, config.grid_size)?;
        let m = svam.m();
        let initial = design_beamformer(
            BeamSpec::new(AngleU::new(config.roi.center())?, config.bw_initial)?,
            m,
            &config.fir,
        )?;
        let codebook = match config.mode {
            CodebookMode::Flexible => None,
            CodebookMode::Hierarchical => Some(HierarchicalCodebook::build(
                config.roi,
                config.grid_size.trailing_zeros() as usize,
                m,
                &config.fir,
                config.grid_size,
            )?),
        };
        Ok(Self {
            config,
            svam,
            grid,
            initial,
            codebook,
        })
    }

    pub fn config(&self) -> &AdaptConfig {
        &self.config
    }

    pub fn grid(&self) -> &AngularGrid {
        &self.grid
    }

    /// One training burst against `channel`; the first path is the truth.
    pub fn run<R: Rng + ?Sized>(
        &self,
        channel: &ChannelParams,
        rng: &mut R,
    ) -> Result<TrialRecord> {
        self.run_with(channel, rng, |_, _| {})
    }

    /// Like [`Aligner::run`], calling `observe(t, history)` after every
    /// segment's posterior update.
    pub fn run_with<R, F>(
        &self,
        channel: &ChannelParams,
        rng: &mut R,
        mut observe: F,
    ) -> Result<TrialRecord>
    where
        R: Rng + ?Sized,
        F: FnMut(usize, &crate::inference::PosteriorState),
    {
        let cfg = &self.config;
        let truth = channel.paths()[0].angle;
        let power = channel.power();
        let assumed_noise =
            (channel.noise_variance() * cfg.noise_scale).max(1e-10 * power.max(1e-300));
        let depth = self.codebook.as_ref().map_or(0, |c| c.depth());

        let mut history = MeasurementHistory::new(&self.svam, &self.grid);
        let mut beam = self.initial.clone();
        let mut bw = cfg.bw_initial;
        let mut level = 0;
        let mut segments = Vec::with_capacity(cfg.segments());
        let mut pmf = PosteriorPmf::uniform(self.grid.len());

        for t in 0..cfg.segments() {
            let seg = measure_segment(&beam, channel, &self.svam, t, rng)?;
            history.append(&seg, &beam, &self.grid)?;
            let state = update_posterior(&history, power, assumed_noise)?;
            observe(t, &state);
            pmf = state.pmf;

            let peak_prob;
            let next = match &self.codebook {
                None => {
                    let (spec, peak) =
                        select_next_beam(&pmf, bw, cfg.p_thresh, &self.grid, cfg.bw_initial)?;
                    peak_prob = peak;
                    bw = spec.beamwidth();
                    if bw >= cfg.bw_initial {
                        self.initial.clone()
                    } else {
                        design_beamformer(spec, self.svam.m(), &cfg.fir)?
                    }
                }
                Some(codebook) => {
                    let (node, mass) = hier_beam_search(
                        level,
                        &pmf,
                        cfg.p_thresh,
                        depth,
                        cfg.hier_min_start_level,
                    )?;
                    peak_prob = mass;
                    level = node.level;
                    codebook.node(node).clone()
                }
            };
            segments.push(SegmentRecord {
                t,
                spec: *beam.spec(),
                gain_at_truth: gain_at(beam.weights(), truth.value()).norm_sqr(),
                peak_prob,
                mode_index: pmf.mode(),
            });
            beam = next;
        }
        Ok(TrialRecord {
            segments,
            estimate: self.grid.angle(pmf.mode()),
            truth,
        })
    }
}

/// Runs one adaptive alignment trial; see [`Aligner`].
pub fn run_alignment<R: Rng + ?Sized>(
    config: &AdaptConfig,
    channel: &ChannelParams,
    rng: &mut R,
) -> Result<TrialRecord> {
    Aligner::new(config.clone())?.run(channel, rng)
}

/// How a hiePM codeword is spread over a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HiepmMode {
    /// Full-aperture codeword repeated for `N_v` snapshots.
    Repeat,
    /// Length-`M` codeword slid across the aperture.
    Svam,
}

/// Posterior-matching codeword choice: follow the heavier child while it
/// holds at least half the mass, then take whichever of that node and its
/// heavier child has mass closest to one half.
pub fn posterior_matching_node(pmf: &PosteriorPmf, depth: usize) -> (HierNode, f64) {
    let heavier_child = |node: HierNode| -> (HierNode, f64) {
        let l = node.level + 1;
        let (a, b) = (2 * node.index, 2 * node.index + 1);
        let (ma, mb) = (node_mass(pmf, l, a), node_mass(pmf, l, b));
        if mb > ma {
            (HierNode { level: l, index: b }, mb)
        } else {
            (HierNode { level: l, index: a }, ma)
        }
    };
    let mut node = HierNode { level: 0, index: 0 };
    let mut mass = 1.0;
    while node.level < depth {
        let (child, m) = heavier_child(node);
        if m < 0.5 {
            break;
        }
        node = child;
        mass = m;
    }
    if node.level < depth {
        let (child, m) = heavier_child(node);
        if (m - 0.5).abs() < (mass - 0.5).abs() {
            return (child, m);
        }
    }
    (node, mass)
}

/// Known-gain hierarchical posterior matching over a fixed codebook.
#[derive(Debug, Clone)]
pub struct HiepmRunner {
    n: usize,
    n_v: usize,
    l: usize,
    mode: HiepmMode,
    grid: AngularGrid,
    codebook: HierarchicalCodebook,
    /// `responses[level][k][i] = f^H phi(u_i)` for each codeword.
    responses: Vec<Vec<Vec<C64>>>,
    svam: SvamConfig,
}

impl HiepmRunner {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        n_v: usize,
        l: usize,
        grid_size: usize,
        roi: RegionOfInterest,
        mode: HiepmMode,
        fir: &FirDesignParams,
    ) -> Result<Self> {
        let svam = SvamConfig::ula(n, n_v)?;
        svam.segments(l)?;
        if !grid_size.is_power_of_two() {
            return Err(Error::InvalidConfig(
                "hiePM needs a power-of-two grid".into(),
            ));
        }
        let grid = AngularGrid::new(roi, grid_size)?;
        let len = match mode {
            HiepmMode::Repeat => n,
            HiepmMode::Svam => svam.m(),
        };
        let depth = grid_size.trailing_zeros() as usize;
        let codebook = HierarchicalCodebook::build(roi, depth, len, fir, grid_size)?;
        let responses = (0..=depth)
            .map(|level| {
                codebook
                    .level(level)
                    .iter()
                    .map(|f| {
                        grid.points()
                            .iter()
                            .map(|&u| gain_at(f.weights(), u))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            n,
            n_v,
            l,
            mode,
            grid,
            codebook,
            responses,
            svam,
        })
    }

    pub fn grid(&self) -> &AngularGrid {
        &self.grid
    }

    /// Combiner applied at snapshot `l` for codeword `f`.
    fn combiner(&self, f: &DVector<C64>, l: usize) -> Result<DVector<C64>> {
        match self.mode {
            HiepmMode::Repeat => Ok(f.clone()),
            HiepmMode::Svam => svam_combiner(f, l, &self.svam),
        }
    }

    pub fn run<R: Rng + ?Sized>(
        &self,
        channel: &ChannelParams,
        rng: &mut R,
    ) -> Result<TrialRecord> {
        let truth = channel.paths()[0].angle;
        let alpha = channel.paths()[0].gain;
        let power = channel.power();
        let noise = channel.noise_variance().max(1e-10 * power.max(1e-300));
        let depth = self.codebook.depth();
        let mut pmf = PosteriorPmf::uniform(self.grid.len());
        let mut segments = Vec::with_capacity(self.l / self.n_v);
        let mut responses = vec![C64::new(0.0, 0.0); self.grid.len()];

        for t in 0..self.l / self.n_v {
            let (node, mass) = posterior_matching_node(&pmf, depth);
            let codeword = self.codebook.node(node);
            let base = &self.responses[node.level][node.index];
            let mut truth_gain = 0.0;
            for k in 0..self.n_v {
                let l = t * self.n_v + k;
                let w = self.combiner(codeword.weights(), l)?;
                let y = combine(&w, &antenna_snapshot(channel, self.n, l, rng))?;
                let shift = match self.mode {
                    HiepmMode::Repeat => 0,
                    HiepmMode::Svam => k,
                };
                for (r, (&b, &u)) in responses
                    .iter_mut()
                    .zip(base.iter().zip(self.grid.points()))
                {
                    *r = b * C64::from_polar(1.0, std::f64::consts::PI * shift as f64 * u);
                }
                pmf = known_alpha_update(&pmf, y, &responses, alpha, power, noise)?;
                truth_gain += w
                    .dotc(&manifold_unchecked(self.n, truth.value()))
                    .norm_sqr();
            }
            let (lo, hi) = node_span(self.codebook.roi(), node.level, node.index);
            segments.push(SegmentRecord {
                t,
                spec: BeamSpec::new(AngleU::new(0.5 * (lo + hi))?, hi - lo)?,
                gain_at_truth: truth_gain / self.n_v as f64,
                peak_prob: mass,
                mode_index: pmf.mode(),
            });
        }
        Ok(TrialRecord {
            segments,
            estimate: self.grid.angle(pmf.mode()),
            truth,
        })
    }
}

/// Runs one known-gain hiePM trial.
pub fn run_hiepm_known_alpha<R: Rng + ?Sized>(
    config: &AdaptConfig,
    channel: &ChannelParams,
    rng: &mut R,
    mode: HiepmMode,
) -> Result<TrialRecord> {
    HiepmRunner::new(
        config.n,
        config.n_v,
        config.l,
        config.grid_size,
        config.roi,
        mode,
        &config.fir,
    )?
    .run(channel, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(g: usize) -> AngularGrid {
        AngularGrid::new(RegionOfInterest::default(), g).unwrap()
    }

    fn pmf(w: Vec<f64>) -> PosteriorPmf {
        PosteriorPmf::from_weights(w).unwrap()
    }

    fn delta(g: usize, j: usize) -> PosteriorPmf {
        let mut w = vec![0.0; g];
        w[j] = 1.0;
        pmf(w)
    }

    fn channel(u: f64, noise: f64) -> ChannelParams {
        ChannelParams::single_path(1.0, C64::new(0.0, 1.0), AngleU::new(u).unwrap(), noise).unwrap()
    }

    #[test]
    fn delta_peak_is_captured() {
        let g = grid(64);
        for bw in [1.0 / 64.0, 0.1, 0.3] {
            let (peak, spec) = cumul_peak(&delta(64, 40), bw, &g).unwrap();
            assert_eq!(peak, 1.0);
            let (lo, hi) = spec.passband();
            assert!(lo <= g.points()[40] && g.points()[40] <= hi);
        }
    }

    #[test]
    fn uniform_window_mass() {
        let (peak, spec) = cumul_peak(&PosteriorPmf::uniform(64), 0.25, &grid(64)).unwrap();
        assert!((peak - 0.25).abs() < 1e-12);
        assert_eq!(spec.beamwidth(), 0.25);
    }

    #[test]
    fn bimodal_window_contains_mode() {
        let mut w = vec![0.0; 64];
        w[10] = 0.6;
        w[50] = 0.4;
        let g = grid(64);
        let (peak, spec) = cumul_peak(&pmf(w), 3.0 / 64.0, &g).unwrap();
        assert!(peak >= 0.6);
        let (lo, hi) = spec.passband();
        assert!(lo <= g.points()[10] && g.points()[10] <= hi);
    }

    #[test]
    fn edge_mode_keeps_beam_in_roi() {
        let g = grid(64);
        let (_, spec) = cumul_peak(&delta(64, 0), 0.25, &g).unwrap();
        assert!((spec.passband().0 - 0.0).abs() < 1e-12);
        let (_, spec) = cumul_peak(&delta(64, 63), 0.25, &g).unwrap();
        assert!((spec.passband().1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn confident_posterior_halves_width() {
        let g = grid(64);
        let mut w = vec![0.1 / 60.0; 64];
        for v in w.iter_mut().skip(30).take(4) {
            *v = 0.9 / 4.0;
        }
        let (spec, _) = select_next_beam(&pmf(w), 0.5, 0.6, &g, 1.0).unwrap();
        assert_eq!(spec.beamwidth(), 0.25);
    }

    #[test]
    fn uniform_posterior_resets_to_initial_beam() {
        let (spec, _) =
            select_next_beam(&PosteriorPmf::uniform(64), 0.25, 0.6, &grid(64), 1.0).unwrap();
        assert_eq!(spec.beamwidth(), 1.0);
        assert_eq!(spec.direction().value(), 0.5);
    }

    #[test]
    fn tiny_threshold_always_halves() {
        let g = grid(64);
        let (spec, _) = select_next_beam(&PosteriorPmf::uniform(64), 0.5, 1e-9, &g, 1.0).unwrap();
        assert_eq!(spec.beamwidth(), 0.25);
    }

    #[test]
    fn beam_can_widen_past_current() {
        // Mass spread over a quarter of the RoI while the current beam is
        // an eighth wide.
        let g = grid(64);
        let mut w = vec![0.0; 64];
        for v in w.iter_mut().skip(8).take(16) {
            *v = 1.0;
        }
        let (spec, _) = select_next_beam(&pmf(w), 0.125, 0.9, &g, 1.0).unwrap();
        assert!(spec.beamwidth() > 0.125);
    }

    #[test]
    fn hierarchical_search_examples() {
        // Fully inside one node at level 3.
        let (node, mass) = hier_beam_search(2, &delta(64, 21), 0.9, 6, 0).unwrap();
        assert_eq!(node, HierNode { level: 3, index: 2 });
        assert_eq!(mass, 1.0);

        let (node, _) = hier_beam_search(3, &PosteriorPmf::uniform(64), 0.6, 6, 0).unwrap();
        assert_eq!(node, HierNode { level: 0, index: 0 });

        // 0.55 in the child (cells 0..8), 0.97 in its parent (cells 0..16).
        let mut w = vec![0.03 / 48.0; 64];
        for v in w.iter_mut().take(8) {
            *v = 0.55 / 8.0;
        }
        for v in w.iter_mut().skip(8).take(8) {
            *v = 0.42 / 8.0;
        }
        let (node, mass) = hier_beam_search(2, &pmf(w), 0.9, 6, 0).unwrap();
        assert_eq!(node, HierNode { level: 2, index: 0 });
        assert!((mass - 0.97).abs() < 1e-12);

        let (node, _) = hier_beam_search(0, &delta(64, 21), 0.9, 6, 4).unwrap();
        assert_eq!(node.level, 4);
        assert!(hier_beam_search(0, &delta(48, 1), 0.9, 6, 0).is_err());
    }

    #[test]
    fn posterior_matching_examples() {
        let (node, _) = posterior_matching_node(&PosteriorPmf::uniform(64), 6);
        assert_eq!(node.level, 1);
        let (node, mass) = posterior_matching_node(&delta(64, 37), 6);
        assert_eq!(
            node,
            HierNode {
                level: 6,
                index: 37
            }
        );
        assert_eq!(mass, 1.0);
    }

    #[test]
    fn noiseless_alignment_recovers_truth() {
        let cfg = AdaptConfig {
            n: 32,
            l: 40,
            grid_size: 32,
            ..Default::default()
        };
        let aligner = Aligner::new(cfg.clone()).unwrap();
        for (i, p) in [(5usize, 0.6), (17, 0.9), (30, 0.3)] {
            let u = aligner.grid().points()[i];
            let c = AdaptConfig {
                p_thresh: p,
                ..cfg.clone()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let rec = run_alignment(&c, &channel(u, 0.0), &mut rng).unwrap();
            assert_eq!(rec.estimate.value(), u);
            assert_eq!(rec.segments.len(), 10);
        }
    }

    #[test]
    fn hierarchical_alignment_recovers_truth() {
        let cfg = AdaptConfig {
            n: 32,
            l: 40,
            grid_size: 32,
            mode: CodebookMode::Hierarchical,
            ..Default::default()
        };
        let aligner = Aligner::new(cfg).unwrap();
        let u = aligner.grid().points()[9];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rec = aligner.run(&channel(u, 0.0), &mut rng).unwrap();
        assert_eq!(rec.estimate.value(), u);
    }

    #[test]
    fn alignment_is_deterministic_and_well_formed() {
        let cfg = AdaptConfig {
            n: 32,
            l: 48,
            grid_size: 32,
            ..Default::default()
        };
        let ch = channel(0.3, 0.5);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            run_alignment(&cfg, &ch, &mut rng).unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        assert_eq!(a.segments.len(), 12);
        for (t, s) in a.segments.iter().enumerate() {
            assert_eq!(s.t, t);
            let (lo, hi) = s.spec.clipped().passband();
            assert!(lo >= -1.0 && hi <= 1.0);
            assert!(s.peak_prob > 0.0 && s.peak_prob <= 1.0 + 1e-12);
        }
        assert_eq!(a.segments[0].spec.beamwidth(), 1.0);
    }

    #[test]
    fn hiepm_modes_coincide_without_sliding() {
        let cfg = AdaptConfig {
            n: 16,
            l: 12,
            n_v: 1,
            grid_size: 16,
            ..Default::default()
        };
        let ch = channel(0.4, 0.3);
        let run = |mode| {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            run_hiepm_known_alpha(&cfg, &ch, &mut rng, mode).unwrap()
        };
        assert_eq!(run(HiepmMode::Svam), run(HiepmMode::Repeat));
    }

    #[test]
    fn hiepm_noiseless_recovers_truth() {
        for (n_v, mode) in [
            (1, HiepmMode::Repeat),
            (2, HiepmMode::Svam),
            (2, HiepmMode::Repeat),
        ] {
            let cfg = AdaptConfig {
                n: 32,
                l: 24,
                n_v,
                grid_size: 32,
                ..Default::default()
            };
            let g = grid(32);
            let u = g.points()[22];
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let rec = run_hiepm_known_alpha(&cfg, &channel(u, 1e-4), &mut rng, mode).unwrap();
            assert_eq!(rec.estimate.value(), u, "{n_v} {mode:?}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(AdaptConfig::default().validate().is_ok());
        let bad = [
            AdaptConfig {
                l: 121,
                ..Default::default()
            },
            AdaptConfig {
                p_thresh: 1.0,
                ..Default::default()
            },
            AdaptConfig {
                bw_initial: 0.5,
                ..Default::default()
            },
            AdaptConfig {
                noise_scale: 0.0,
                ..Default::default()
            },
            AdaptConfig {
                n_v: 65,
                l: 130,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn hierarchical_node_contains_mode(seed in 0u64..10_000, l_init in 0usize..6, p in 0.05f64..0.95) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w: Vec<f64> = (0..64).map(|_| rng.random::<f64>().powi(6)).collect();
            let pmf = pmf(w);
            let (node, _) = hier_beam_search(l_init, &pmf, p, 6, 0).unwrap();
            let cells = 64 >> node.level;
            let mode = pmf.mode();
            proptest::prop_assert!(node.index * cells <= mode && mode < (node.index + 1) * cells);
        }

        #[test]
        fn selected_beams_stay_in_space(seed in 0u64..10_000, bw in 0.01f64..1.0, p in 0.05f64..0.95) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w: Vec<f64> = (0..64).map(|_| rng.random::<f64>().powi(4)).collect();
            let g = grid(64);
            let (spec, _) = select_next_beam(&pmf(w), bw, p, &g, 1.0).unwrap();
            let (lo, hi) = spec.passband();
            proptest::prop_assert!(lo >= -1e-12 && hi <= 1.0 + 1e-12);
        }
    }
}
