//! Command-line front end for the alignment simulator.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use svam::adaptive::{Aligner, CodebookMode};
use svam::array::{AngleU, RegionOfInterest};
use svam::crb::LinkBudget;
use svam::filter::HierarchicalCodebook;
use svam::harness::{
    codebook_csv, crb_csv, crb_for_scheme, draw_channel, metrics_csv, noise_variance,
    posterior_rows, records_rmse, run_experiment, run_trials, trajectory_csv, trial_streams,
    CrbRow, ExperimentConfig, ExperimentKind, Scheme, POSTERIOR_HEADER,
};
use svam::inference::AngularGrid;
use svam::svam::SvamConfig;

#[derive(Parser)]
#[command(
    name = "svam",
    version,
    about = "Sliding virtual array beam alignment simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte Carlo alignment trials and write per-segment trajectories.
    Align {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        snr_db: Option<f64>,
        #[arg(long)]
        p_thresh: Option<f64>,
        #[arg(long)]
        nv: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the first trial's per-segment posterior.
        #[arg(long)]
        posterior: Option<PathBuf>,
    },
    /// Run a named experiment sweep and write its metric table.
    Sweep {
        #[arg(long)]
        experiment: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate a Cramér-Rao bound over the angular grid for a static beam burst.
    Crb {
        /// general | benchmark | svam | unknown-alpha
        #[arg(long)]
        scheme: String,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        nv: usize,
        #[arg(long, default_value_t = 120)]
        l: usize,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long, default_value_t = 0.0)]
        snr_db: f64,
        #[arg(long, default_value_t = 0.0)]
        roi_left: f64,
        #[arg(long, default_value_t = 1.0)]
        roi_right: f64,
        /// Beamwidth of the training beam; defaults to the RoI width.
        #[arg(long)]
        beamwidth: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the taps of a hierarchical FIR codebook.
    Codebook {
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        roi_left: f64,
        #[arg(long, default_value_t = 1.0)]
        roi_right: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn align(
    config: &Path,
    snr_db: Option<f64>,
    p_thresh: Option<f64>,
    nv: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    posterior: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = snr_db {
        cfg.snr_db = vec![s];
    }
    if let Some(p) = p_thresh {
        cfg.p_thresh = vec![p];
    }
    if let Some(v) = nv {
        cfg.n_v = vec![v];
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let (snr, p, n_v, scheme) = (cfg.snr_db[0], cfg.p_thresh[0], cfg.n_v[0], cfg.schemes[0]);
    let scale = cfg.noise_scale[0];
    let records = run_trials(&cfg, scheme, n_v, p, scale, snr, cfg.trials)?;
    write_out(
        out.as_deref().or(cfg.output.as_deref()),
        &trajectory_csv(&records),
    )?;
    eprintln!(
        "{} trials, rmse {:.6}",
        records.len(),
        records_rmse(&records)?
    );

    if let Some(path) = posterior {
        let mode = match scheme {
            Scheme::Adaptive => CodebookMode::Flexible,
            Scheme::AdaptiveHierarchical => CodebookMode::Hierarchical,
            _ => bail!("posterior snapshots need an adaptive scheme"),
        };
        let aligner = Aligner::new(cfg.adapt_config(n_v, p, scale, mode)?)?;
        let (mut truth_rng, mut noise_rng) = trial_streams(cfg.seed, 0);
        let channel = draw_channel(aligner.grid(), noise_variance(snr), &mut truth_rng)?;
        let mut text = format!("{POSTERIOR_HEADER}\n");
        aligner.run_with(&channel, &mut noise_rng, |t, state| {
            posterior_rows(&mut text, t, aligner.grid(), state)
        })?;
        write_out(Some(&path), &text)?;
    }
    Ok(())
}

fn sweep(
    experiment: &str,
    config: Option<PathBuf>,
    trials: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = match &config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.experiment = ExperimentKind::parse(experiment)?;
    if let Some(q) = trials {
        cfg.trials = q;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let rows = run_experiment(&cfg)?;
    write_out(
        out.as_deref().or(cfg.output.as_deref()),
        &metrics_csv(&rows),
    )
}

#[allow(clippy::too_many_arguments)]
fn crb(
    scheme: &str,
    n: usize,
    nv: usize,
    l: usize,
    grid: usize,
    snr_db: f64,
    roi: RegionOfInterest,
    beamwidth: Option<f64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let segments = SvamConfig::ula(n, nv)?.segments(l)?;
    let grid = AngularGrid::new(roi, grid)?;
    let budget = LinkBudget::unit(noise_variance(snr_db));
    let fir = Default::default();
    let bw = beamwidth.unwrap_or(roi.width());
    let rows = grid
        .points()
        .iter()
        .map(|&u| {
            let (result, condition_holds) = crb_for_scheme(
                scheme,
                n,
                nv,
                segments,
                roi.center(),
                bw,
                AngleU::new(u)?,
                &budget,
                &fir,
            )?;
            Ok(CrbRow {
                u,
                n,
                n_v: nv,
                l,
                scheme: scheme.to_string(),
                result,
                condition_holds,
            })
        })
        .collect::<svam::error::Result<Vec<_>>>()?;
    write_out(out.as_deref(), &crb_csv(&rows))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Align {
            config,
            snr_db,
            p_thresh,
            nv,
            seed,
            out,
            posterior,
        } => align(&config, snr_db, p_thresh, nv, seed, out, posterior),
        Command::Sweep {
            experiment,
            config,
            trials,
            seed,
            out,
        } => sweep(&experiment, config, trials, seed, out),
        Command::Crb {
            scheme,
            n,
            nv,
            l,
            grid,
            snr_db,
            roi_left,
            roi_right,
            beamwidth,
            out,
        } => crb(
            &scheme,
            n,
            nv,
            l,
            grid,
            snr_db,
            RegionOfInterest::new(roi_left, roi_right)?,
            beamwidth,
            out,
        ),
        Command::Codebook {
            depth,
            n,
            roi_left,
            roi_right,
            out,
        } => {
            let roi = RegionOfInterest::new(roi_left, roi_right)?;
            let grid = 1usize
                .checked_shl(depth as u32)
                .context("codebook depth too large")?;
            let cb = HierarchicalCodebook::build(roi, depth, n, &Default::default(), grid)?;
            write_out(Some(&out), &codebook_csv(&cb))
        }
    }
}
