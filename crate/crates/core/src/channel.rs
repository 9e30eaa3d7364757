//! Flat-fading multipath snapshots at the antenna ports.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::array::{manifold_unchecked, AngleU, C64};
use crate::error::{Error, Result};

/// One propagation path: complex gain and arrival angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub gain: C64,
    pub angle: AngleU,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    power: f64,
    paths: Vec<Path>,
    noise_variance: f64,
}

impl ChannelParams {
    pub fn new(power: f64, paths: Vec<Path>, noise_variance: f64) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidChannel("at least one path required".into()));
        }
        if !(power >= 0.0 && power.is_finite()) {
            return Err(Error::InvalidChannel(format!("power {power}")));
        }
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(Error::InvalidChannel(format!(
                "noise variance {noise_variance}"
            )));
        }
        Ok(Self {
            power,
            paths,
            noise_variance,
        })
    }

    pub fn single_path(power: f64, gain: C64, angle: AngleU, noise_variance: f64) -> Result<Self> {
        Self::new(power, vec![Path { gain, angle }], noise_variance)
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Noise-free received vector `sqrt(P_s) * sum_k alpha_k phi_N(u_k)`.
    pub fn noiseless_response(&self, n: usize) -> DVector<C64> {
        let amp = self.power.sqrt();
        let mut x = DVector::zeros(n);
        for p in &self.paths {
            x.axpy(
                p.gain * amp,
                &manifold_unchecked(n, p.angle.value()),
                C64::new(1.0, 0.0),
            );
        }
        x
    }
}

/// Received vector at snapshot `index`.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaSnapshot {
    pub x: DVector<C64>,
    pub index: usize,
}

/// Draws a circular complex Gaussian sample of variance `variance`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

pub fn antenna_snapshot<R: Rng + ?Sized>(
    params: &ChannelParams,
    n: usize,
    index: usize,
    rng: &mut R,
) -> AntennaSnapshot {
    let mut x = params.noiseless_response(n);
    if params.noise_variance > 0.0 {
        for v in x.iter_mut() {
            *v += complex_normal(rng, params.noise_variance);
        }
    }
    AntennaSnapshot { x, index }
}

/// Scalar combiner output `w^H x`.
pub fn combine(w: &DVector<C64>, x: &AntennaSnapshot) -> Result<C64> {
    if w.len() != x.x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.x.len(),
            got: w.len(),
        });
    }
    Ok(w.dotc(&x.x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn u(v: f64) -> AngleU {
        AngleU::new(v).unwrap()
    }

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    #[test]
    fn noiseless_broadside_is_all_ones() {
        let p = ChannelParams::single_path(1.0, one(), u(0.0), 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = antenna_snapshot(&p, 8, 0, &mut rng);
        assert!(s.x.iter().all(|v| (v - one()).norm() < 1e-15));
    }

    #[test]
    fn opposite_paths_cancel() {
        let paths = vec![
            Path {
                gain: one(),
                angle: u(0.3),
            },
            Path {
                gain: -one(),
                angle: u(0.3),
            },
        ];
        let p = ChannelParams::new(1.0, paths, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(antenna_snapshot(&p, 8, 0, &mut rng).x.norm() < 1e-15);
    }

    #[test]
    fn noise_only_power() {
        let p = ChannelParams::single_path(0.0, one(), u(0.1), 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 4;
        let draws = 100_000 / n;
        let total: f64 = (0..draws)
            .map(|l| antenna_snapshot(&p, n, l, &mut rng).x.norm_squared() / n as f64)
            .sum();
        let mean = total / draws as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn combine_selects_and_matches() {
        let p = ChannelParams::single_path(2.0, C64::new(0.6, -0.8), u(0.4), 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = antenna_snapshot(&p, 16, 0, &mut rng);
        let mut e0 = DVector::zeros(16);
        e0[0] = one();
        assert_eq!(combine(&e0, &s).unwrap(), s.x[0]);

        let w = manifold_unchecked(16, 0.4) / C64::from(4.0);
        let y = combine(&w, &s).unwrap();
        let want = C64::new(0.6, -0.8) * 2f64.sqrt() * 4.0;
        assert!((y - want).norm() < 1e-12);

        assert!(combine(&DVector::zeros(3), &s).is_err());
    }

    #[test]
    fn combined_noise_variance_is_preserved() {
        let p = ChannelParams::single_path(0.0, one(), u(0.0), 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 8;
        let w = DVector::from_fn(n, |_, _| complex_normal(&mut rng, 1.0));
        let w = &w / C64::from(w.norm());
        let draws = 100_000;
        let samples: Vec<C64> = (0..draws)
            .map(|l| combine(&w, &antenna_snapshot(&p, n, l, &mut rng)).unwrap())
            .collect();
        let mean: C64 = samples.iter().sum::<C64>() / draws as f64;
        let var = samples.iter().map(|y| (y - mean).norm_sqr()).sum::<f64>() / draws as f64;
        assert!((var / 0.7 - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn same_seed_same_snapshots() {
        let p = ChannelParams::single_path(1.0, one(), u(0.2), 0.5).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..5)
                .map(|l| antenna_snapshot(&p, 6, l, &mut rng).x)
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(ChannelParams::new(1.0, vec![], 0.0).is_err());
        assert!(ChannelParams::single_path(-1.0, one(), u(0.0), 0.0).is_err());
        assert!(ChannelParams::single_path(1.0, one(), u(0.0), -0.1).is_err());
    }
}
