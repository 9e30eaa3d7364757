//! Monte Carlo experiment drivers and CSV output.
//!
//! Every trial draws its truth and path gain from one ChaCha stream and its
//! noise from another, both keyed by `(seed, trial)`. Sweep points therefore
//! share common random numbers, and a trial's record does not depend on how
//! many trials run alongside it.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::adaptive::{AdaptConfig, Aligner, CodebookMode, HiepmMode, HiepmRunner, TrialRecord};
use crate::array::{AngleU, RegionOfInterest, C64};
use crate::channel::ChannelParams;
use crate::crb::{
    crb_benchmark, crb_general, crb_svam, crb_unknown_alpha, g_sufficient_condition, CrbResult,
    LinkBudget,
};
use crate::error::{Error, Result};
use crate::filter::{design_beamformer, BeamSpec, FirDesignParams, HierarchicalCodebook, NodeId};
use crate::inference::{AngularGrid, PosteriorState};
use crate::svam::{expand_svam, SvamConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RmseVsSnr,
    RmseVsSnapshots,
    GainOverTime,
    NoiseMismatch,
    CodebookCompare,
    CrbSweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::RmseVsSnr => "rmse_vs_snr",
            Self::RmseVsSnapshots => "rmse_vs_snapshots",
            Self::GainOverTime => "gain_over_time",
            Self::NoiseMismatch => "noise_mismatch",
            Self::CodebookCompare => "codebook_compare",
            Self::CrbSweep => "crb_sweep",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Wrap {
            k: ExperimentKind,
        }
        toml::from_str::<Wrap>(&format!("k = \"{s}\""))
            .map(|w| w.k)
            .map_err(|_| Error::InvalidConfig(format!("unknown experiment {s:?}")))
    }
}

/// Alignment strategy evaluated by the RMSE experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Sliding beams with flexible FIR beam selection.
    Adaptive,
    /// Sliding beams restricted to the hierarchical codebook.
    AdaptiveHierarchical,
    /// Known-gain posterior matching with sliding codewords.
    HiepmSvam,
    /// Known-gain posterior matching with repeated full-aperture codewords.
    HiepmRepeat,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::Adaptive => "adaptive",
            Self::AdaptiveHierarchical => "adaptive_hierarchical",
            Self::HiepmSvam => "hiepm_svam",
            Self::HiepmRepeat => "hiepm_repeat",
        }
    }
}

fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::Adaptive]
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub n_v: Vec<usize>,
    pub grid_size: usize,
    pub l: usize,
    pub trials: usize,
    /// Per-antenna SNR in dB; `inf` means noiseless.
    pub snr_db: Vec<f64>,
    pub p_thresh: Vec<f64>,
    pub noise_scale: Vec<f64>,
    pub roi: [f64; 2],
    pub seed: u64,
    pub output: Option<PathBuf>,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    /// Defaults to the RoI width.
    pub bw_initial: Option<f64>,
    pub transition_fraction: f64,
    pub grid_density: usize,
    pub max_remez_iterations: usize,
    pub hier_min_start_level: usize,
    pub bootstrap_resamples: usize,
    /// Angle at which the CRB sweep evaluates its bounds.
    pub crb_u: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let fir = FirDesignParams::default();
        Self {
            experiment: ExperimentKind::RmseVsSnr,
            n: 64,
            n_v: vec![4],
            grid_size: 64,
            l: 120,
            trials: 100,
            snr_db: vec![-10.0],
            p_thresh: vec![0.6],
            noise_scale: vec![1.0],
            roi: [0.0, 1.0],
            seed: 1,
            output: None,
            schemes: default_schemes(),
            bw_initial: None,
            transition_fraction: fir.transition_fraction,
            grid_density: fir.grid_density,
            max_remez_iterations: fir.max_remez_iterations,
            hier_min_start_level: 0,
            bootstrap_resamples: 1000,
            crb_u: 0.3,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn roi(&self) -> Result<RegionOfInterest> {
        RegionOfInterest::new(self.roi[0], self.roi[1])
    }

    pub fn fir(&self) -> FirDesignParams {
        FirDesignParams {
            transition_fraction: self.transition_fraction,
            grid_density: self.grid_density,
            max_remez_iterations: self.max_remez_iterations,
        }
    }

    /// Controller settings for one sweep point.
    pub fn adapt_config(
        &self,
        n_v: usize,
        p_thresh: f64,
        noise_scale: f64,
        mode: CodebookMode,
    ) -> Result<AdaptConfig> {
        let roi = self.roi()?;
        Ok(AdaptConfig {
            n: self.n,
            l: self.l,
            n_v,
            p_thresh,
            bw_initial: self.bw_initial.unwrap_or(roi.width()),
            roi,
            grid_size: self.grid_size,
            mode,
            fir: self.fir(),
            noise_scale,
            hier_min_start_level: self.hier_min_start_level,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.trials == 0 {
            return bad("at least one trial required".into());
        }
        for (name, empty) in [
            ("n_v", self.n_v.is_empty()),
            ("snr_db", self.snr_db.is_empty()),
            ("p_thresh", self.p_thresh.is_empty()),
            ("noise_scale", self.noise_scale.is_empty()),
            ("schemes", self.schemes.is_empty()),
        ] {
            if empty {
                return bad(format!("{name} list is empty"));
            }
        }
        if self
            .snr_db
            .iter()
            .any(|s| s.is_nan() || *s == f64::NEG_INFINITY)
        {
            return bad("SNR values must be finite or +inf".into());
        }
        for &n_v in &self.n_v {
            for &p in &self.p_thresh {
                for &x in &self.noise_scale {
                    self.adapt_config(n_v, p, x, CodebookMode::Flexible)?
                        .validate()?;
                }
            }
        }
        if self.experiment == ExperimentKind::CrbSweep {
            AngleU::new(self.crb_u)?;
        }
        Ok(())
    }
}

/// Noise variance for a per-antenna SNR with unit signal power.
pub fn noise_variance(snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        10f64.powf(-snr_db / 10.0)
    }
}

/// Random streams for trial `trial`: `(truth, noise)`.
pub fn trial_streams(seed: u64, trial: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut truth = ChaCha8Rng::seed_from_u64(seed);
    truth.set_stream(2 * trial);
    let mut noise = ChaCha8Rng::seed_from_u64(seed);
    noise.set_stream(2 * trial + 1);
    (truth, noise)
}

/// Draws an on-grid direction and a unit-modulus gain with uniform phase.
pub fn draw_channel<R: Rng + ?Sized>(
    grid: &AngularGrid,
    noise_variance: f64,
    rng: &mut R,
) -> Result<ChannelParams> {
    let i = rng.random_range(0..grid.len());
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    ChannelParams::single_path(
        1.0,
        C64::from_polar(1.0, phase),
        grid.angle(i),
        noise_variance,
    )
}

/// A ready-to-run scheme at one sweep point.
enum Runner {
    Align(Box<Aligner>),
    Hiepm(Box<HiepmRunner>),
}

impl Runner {
    fn new(
        cfg: &ExperimentConfig,
        scheme: Scheme,
        n_v: usize,
        p: f64,
        noise_scale: f64,
    ) -> Result<Self> {
        let mode = match scheme {
            Scheme::AdaptiveHierarchical => CodebookMode::Hierarchical,
            _ => CodebookMode::Flexible,
        };
        let ac = cfg.adapt_config(n_v, p, noise_scale, mode)?;
        Ok(match scheme {
            Scheme::Adaptive | Scheme::AdaptiveHierarchical => {
                Self::Align(Box::new(Aligner::new(ac)?))
            }
            Scheme::HiepmSvam | Scheme::HiepmRepeat => {
                let mode = if scheme == Scheme::HiepmSvam {
                    HiepmMode::Svam
                } else {
                    HiepmMode::Repeat
                };
                Self::Hiepm(Box::new(HiepmRunner::new(
                    ac.n,
                    ac.n_v,
                    ac.l,
                    ac.grid_size,
                    ac.roi,
                    mode,
                    &ac.fir,
                )?))
            }
        })
    }

    fn grid(&self) -> &AngularGrid {
        match self {
            Self::Align(a) => a.grid(),
            Self::Hiepm(h) => h.grid(),
        }
    }

    fn run(&self, channel: &ChannelParams, rng: &mut ChaCha8Rng) -> Result<TrialRecord> {
        match self {
            Self::Align(a) => a.run(channel, rng),
            Self::Hiepm(h) => h.run(channel, rng),
        }
    }
}

/// Runs `trials` independent trials of one scheme, returned in trial order.
#[allow(clippy::too_many_arguments)]
pub fn run_trials(
    cfg: &ExperimentConfig,
    scheme: Scheme,
    n_v: usize,
    p_thresh: f64,
    noise_scale: f64,
    snr_db: f64,
    trials: usize,
) -> Result<Vec<TrialRecord>> {
    let runner = Runner::new(cfg, scheme, n_v, p_thresh, noise_scale)?;
    let sigma2 = noise_variance(snr_db);
    (0..trials as u64)
        .into_par_iter()
        .map(|q| {
            let (mut truth_rng, mut noise_rng) = trial_streams(cfg.seed, q);
            let channel = draw_channel(runner.grid(), sigma2, &mut truth_rng)?;
            runner.run(&channel, &mut noise_rng)
        })
        .collect()
}

/// Root mean squared error in `u`.
pub fn rmse(estimates: &[AngleU], truths: &[AngleU]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::Empty("estimates"));
    }
    if estimates.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            got: estimates.len(),
        });
    }
    let mse = estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| (e.value() - t.value()).powi(2))
        .sum::<f64>()
        / estimates.len() as f64;
    Ok(mse.sqrt())
}

pub fn records_rmse(records: &[TrialRecord]) -> Result<f64> {
    let (e, t): (Vec<_>, Vec<_>) = records.iter().map(|r| (r.estimate, r.truth)).unzip();
    rmse(&e, &t)
}

/// Percentile bootstrap interval for the RMSE of per-trial squared errors.
pub fn bootstrap_rmse_ci(
    squared_errors: &[f64],
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    if squared_errors.is_empty() {
        return Err(Error::Empty("squared errors"));
    }
    let n = squared_errors.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats: Vec<f64> = (0..resamples.max(1))
        .map(|_| {
            let s: f64 = (0..n).map(|_| squared_errors[rng.random_range(0..n)]).sum();
            (s / n as f64).sqrt()
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let pick =
        |q: f64| stats[((q * (stats.len() - 1) as f64).round() as usize).min(stats.len() - 1)];
    Ok((pick(tail), pick(1.0 - tail)))
}

/// One output value with its sweep coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub experiment: String,
    pub snr_db: Option<f64>,
    pub n_v: Option<usize>,
    pub p_thresh: Option<f64>,
    pub noise_scale: Option<f64>,
    pub t: Option<usize>,
    pub trial_count: Option<usize>,
    pub metric_name: String,
    pub value: f64,
}

fn metric_name(base: &str, scheme: Scheme) -> String {
    if scheme == Scheme::Adaptive {
        base.to_string()
    } else {
        format!("{base}:{}", scheme.name())
    }
}

/// Runs every sweep point of `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MetricRow>> {
    cfg.validate()?;
    let kind = cfg.experiment;
    let row = |snr: f64,
               n_v: usize,
               p: f64,
               x: Option<f64>,
               t: Option<usize>,
               name: String,
               value: f64| MetricRow {
        experiment: kind.name().to_string(),
        snr_db: Some(snr),
        n_v: Some(n_v),
        p_thresh: Some(p),
        noise_scale: x,
        t,
        trial_count: Some(cfg.trials),
        metric_name: name,
        value,
    };
    let mut rows = Vec::new();

    if kind == ExperimentKind::CrbSweep {
        for &snr in &cfg.snr_db {
            for &n_v in &cfg.n_v {
                for (scheme, r) in crb_sweep_point(cfg, n_v, snr)? {
                    let mut m = row(
                        snr,
                        n_v,
                        f64::NAN,
                        None,
                        None,
                        format!("crb:{scheme}"),
                        r.bound,
                    );
                    m.p_thresh = None;
                    m.trial_count = None;
                    rows.push(m);
                }
            }
        }
        return Ok(rows);
    }

    let schemes: Vec<Scheme> = if kind == ExperimentKind::CodebookCompare {
        vec![Scheme::Adaptive, Scheme::AdaptiveHierarchical]
    } else {
        cfg.schemes.clone()
    };
    let scales: Vec<Option<f64>> = if kind == ExperimentKind::NoiseMismatch {
        cfg.noise_scale.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };

    for &snr in &cfg.snr_db {
        for &n_v in &cfg.n_v {
            for &p in &cfg.p_thresh {
                for &x in &scales {
                    for &scheme in &schemes {
                        let recs =
                            run_trials(cfg, scheme, n_v, p, x.unwrap_or(1.0), snr, cfg.trials)?;
                        match kind {
                            ExperimentKind::RmseVsSnr | ExperimentKind::NoiseMismatch => {
                                rows.push(row(
                                    snr,
                                    n_v,
                                    p,
                                    x,
                                    None,
                                    metric_name("rmse", scheme),
                                    records_rmse(&recs)?,
                                ));
                            }
                            ExperimentKind::CodebookCompare => {
                                let se: Vec<f64> =
                                    recs.iter().map(TrialRecord::squared_error).collect();
                                let (lo, hi) = bootstrap_rmse_ci(
                                    &se,
                                    cfg.bootstrap_resamples,
                                    0.95,
                                    cfg.seed,
                                )?;
                                rows.push(row(
                                    snr,
                                    n_v,
                                    p,
                                    x,
                                    None,
                                    metric_name("rmse", scheme),
                                    records_rmse(&recs)?,
                                ));
                                rows.push(row(
                                    snr,
                                    n_v,
                                    p,
                                    x,
                                    None,
                                    metric_name("rmse_ci_low", scheme),
                                    lo,
                                ));
                                rows.push(row(
                                    snr,
                                    n_v,
                                    p,
                                    x,
                                    None,
                                    metric_name("rmse_ci_high", scheme),
                                    hi,
                                ));
                            }
                            ExperimentKind::RmseVsSnapshots => {
                                let grid = AngularGrid::new(cfg.roi()?, cfg.grid_size)?;
                                for t in 0..cfg.l / n_v {
                                    let mse = recs
                                        .iter()
                                        .map(|r| {
                                            (grid.points()[r.segments[t].mode_index]
                                                - r.truth.value())
                                            .powi(2)
                                        })
                                        .sum::<f64>()
                                        / recs.len() as f64;
                                    rows.push(row(
                                        snr,
                                        n_v,
                                        p,
                                        x,
                                        Some(t),
                                        metric_name("rmse", scheme),
                                        mse.sqrt(),
                                    ));
                                }
                            }
                            ExperimentKind::GainOverTime => {
                                for t in 0..cfg.l / n_v {
                                    let gains: Vec<f64> =
                                        recs.iter().map(|r| r.segments[t].gain_at_truth).collect();
                                    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
                                    let min = gains.iter().copied().fold(f64::INFINITY, f64::min);
                                    let max =
                                        gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                                    for (name, v) in [
                                        ("mean_gain_db", mean),
                                        ("min_gain_db", min),
                                        ("max_gain_db", max),
                                    ] {
                                        rows.push(row(
                                            snr,
                                            n_v,
                                            p,
                                            x,
                                            Some(t),
                                            metric_name(name, scheme),
                                            to_db(v),
                                        ));
                                    }
                                }
                            }
                            ExperimentKind::CrbSweep => unreachable!(),
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Bounds for a static training burst that keeps the initial wide beam for
/// every segment.
fn crb_sweep_point(
    cfg: &ExperimentConfig,
    n_v: usize,
    snr: f64,
) -> Result<Vec<(&'static str, CrbResult)>> {
    let roi = cfg.roi()?;
    let u = AngleU::new(cfg.crb_u)?;
    let budget = LinkBudget::unit(noise_variance(snr));
    let segments = SvamConfig::ula(cfg.n, n_v)?.segments(cfg.l)?;
    let bw = cfg.bw_initial.unwrap_or(roi.width());
    let mut out = Vec::new();
    for scheme in ["general", "benchmark", "svam", "unknown_alpha"] {
        let (r, _) = crb_for_scheme(
            scheme,
            cfg.n,
            n_v,
            segments,
            roi.center(),
            bw,
            u,
            &budget,
            &cfg.fir(),
        )?;
        out.push((scheme, r));
    }
    Ok(out)
}

/// CRB at `u` for a burst of `segments` identical beams centred at
/// `center` with width `bw`.
///
/// `general` and `unknown_alpha` use the per-snapshot sliding combiners;
/// `benchmark` repeats a full-aperture beam. Returns the bound and, for
/// `svam`, whether the nonnegativity condition on the extra term holds.
#[allow(clippy::too_many_arguments)]
pub fn crb_for_scheme(
    scheme: &str,
    n: usize,
    n_v: usize,
    segments: usize,
    center: f64,
    bw: f64,
    u: AngleU,
    budget: &LinkBudget,
    fir: &FirDesignParams,
) -> Result<(CrbResult, Option<bool>)> {
    let svam = SvamConfig::ula(n, n_v)?;
    let spec = BeamSpec::new(AngleU::new(center)?, bw)?;
    let columns = |len: usize| -> Result<DMatrix<C64>> {
        let f = design_beamformer(spec, len, fir)?;
        Ok(DMatrix::from_fn(len, segments, |r, _| f.weights()[r]))
    };
    Ok(match scheme {
        "general" => (
            crb_general(&expand_svam(&columns(svam.m())?, &svam)?, u, budget)?,
            None,
        ),
        "benchmark" => (crb_benchmark(&columns(n)?, n_v, u, budget)?, None),
        "svam" => {
            let fp = columns(svam.m())?;
            let holds = if svam.m() >= 2 {
                Some(g_sufficient_condition(&fp, u)?.holds)
            } else {
                None
            };
            (crb_svam(&fp, n_v, u, budget)?, holds)
        }
        "unknown_alpha" | "unknown-alpha" => (
            crb_unknown_alpha(&expand_svam(&columns(svam.m())?, &svam)?, u, budget)?,
            None,
        ),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown CRB scheme {other:?}"
            )))
        }
    })
}

/// Decimal text with 12 significant digits; infinities as `inf`.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return format!("{:.11}", 0.0);
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // Rounding can carry into a new leading digit (9.99.. -> 10.0..).
    let digits = s
        .chars()
        .filter(char::is_ascii_digit)
        .skip_while(|&c| c == '0')
        .count();
    if digits > 12 && decimals > 0 {
        format!("{v:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_f(v: Option<f64>) -> String {
    v.map(format_value).unwrap_or_default()
}

pub const METRIC_HEADER: &str =
    "experiment,snr_db,n_v,p_thresh,noise_scale,t,trial_count,metric_name,value";

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from(METRIC_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.experiment,
            opt_f(r.snr_db),
            opt(r.n_v),
            opt_f(r.p_thresh),
            opt_f(r.noise_scale),
            opt(r.t),
            opt(r.trial_count),
            r.metric_name,
            format_value(r.value)
        );
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)
}

pub fn emit_csv(rows: &[MetricRow], path: &Path) -> Result<()> {
    write_text(path, &metrics_csv(rows))
}

pub const TRAJECTORY_HEADER: &str =
    "trial,t,beam_dir,beamwidth,gain_db_at_true_u,peak_prob,mode_index,final";

pub fn trajectory_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for (q, rec) in records.iter().enumerate() {
        let last = rec.segments.len().saturating_sub(1);
        for s in &rec.segments {
            let _ = writeln!(
                out,
                "{q},{},{},{},{},{},{},{}",
                s.t,
                format_value(s.spec.direction().value()),
                format_value(s.spec.beamwidth()),
                format_value(to_db(s.gain_at_truth)),
                format_value(s.peak_prob),
                s.mode_index,
                u8::from(s.t == last)
            );
        }
    }
    out
}

pub fn emit_trajectory_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    write_text(path, &trajectory_csv(records))
}

pub const POSTERIOR_HEADER: &str = "t,i,u_i,p,gamma,alpha_mean_abs";

/// Appends the per-grid posterior after segment `t`.
pub fn posterior_rows(out: &mut String, t: usize, grid: &AngularGrid, state: &PosteriorState) {
    for (i, &u) in grid.points().iter().enumerate() {
        let _ = writeln!(
            out,
            "{t},{i},{},{},{},{}",
            format_value(u),
            format_value(state.pmf.probs()[i]),
            format_value(state.gamma.0[i]),
            format_value(state.alpha.mean[i].norm())
        );
    }
}

pub const CRB_HEADER: &str = "u,N,N_v,L,scheme,bound,g_term,condition_holds";

#[derive(Debug, Clone, PartialEq)]
pub struct CrbRow {
    pub u: f64,
    pub n: usize,
    pub n_v: usize,
    pub l: usize,
    pub scheme: String,
    pub result: CrbResult,
    pub condition_holds: Option<bool>,
}

pub fn crb_csv(rows: &[CrbRow]) -> String {
    let mut out = String::from(CRB_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            format_value(r.u),
            r.n,
            r.n_v,
            r.l,
            r.scheme,
            format_value(r.result.bound),
            opt_f(r.result.g_term),
            opt(r.condition_holds)
        );
    }
    out
}

pub fn emit_crb_csv(rows: &[CrbRow], path: &Path) -> Result<()> {
    write_text(path, &crb_csv(rows))
}

pub const CODEBOOK_HEADER: &str = "level,index,span_lo,span_hi,tap,re,im";

/// One row per tap of every codeword, root first.
pub fn codebook_csv(codebook: &HierarchicalCodebook) -> String {
    let mut out = String::from(CODEBOOK_HEADER);
    out.push('\n');
    for level in 0..=codebook.depth() {
        for (index, f) in codebook.level(level).iter().enumerate() {
            let (lo, hi) = codebook.span(NodeId { level, index });
            for (tap, w) in f.weights().iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{level},{index},{},{},{tap},{},{}",
                    format_value(lo),
                    format_value(hi),
                    format_value(w.re),
                    format_value(w.im)
                );
            }
        }
    }
    out
}
