//! Test signals, SNR scaling and seeded Gaussian noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LaserError, Result};

/// One polynomial piece of a [`SignalKind::PiecewisePoly`]: on `[start, next start)`
/// the value is `sum_k coeffs[k] * (x - start)^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyPiece {
    pub start: f64,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalKind {
    Blocks,
    Bumps,
    Heavisine,
    Doppler,
    Check,
    PiecewisePoly { pieces: Vec<PolyPiece> },
}

impl std::str::FromStr for SignalKind {
    type Err = LaserError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blocks" => Ok(SignalKind::Blocks),
            "bumps" => Ok(SignalKind::Bumps),
            "heavisine" => Ok(SignalKind::Heavisine),
            "doppler" => Ok(SignalKind::Doppler),
            "check" => Ok(SignalKind::Check),
            other => Err(LaserError::domain(format!(
                "unknown signal `{other}` (expected blocks, bumps, heavisine, doppler or check)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDistribution {
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub distribution: NoiseDistribution,
}

// Donoho & Johnstone (1994), "Ideal spatial adaptation by wavelet shrinkage".
const BLOCKS_POS: [f64; 11] = [0.1, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81];
const BLOCKS_HGT: [f64; 11] = [4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2];
const BUMPS_HGT: [f64; 11] = [4.0, 5.0, 3.0, 4.0, 5.0, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2];
const BUMPS_WTH: [f64; 11] = [0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005];

fn sign(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Value of the signal at abscissa `x`.
pub fn evaluate(kind: &SignalKind, x: f64) -> f64 {
    match kind {
        SignalKind::Blocks => BLOCKS_POS
            .iter()
            .zip(BLOCKS_HGT)
            .map(|(&p, h)| h * (1.0 + sign(x - p)) / 2.0)
            .sum(),
        SignalKind::Bumps => BLOCKS_POS
            .iter()
            .zip(BUMPS_HGT.iter().zip(BUMPS_WTH))
            .map(|(&p, (&h, w))| h * (1.0 + ((x - p) / w).abs()).powi(-4))
            .sum(),
        SignalKind::Heavisine => {
            4.0 * (4.0 * std::f64::consts::PI * x).sin() - sign(x - 0.3) - sign(0.72 - x)
        }
        SignalKind::Doppler => {
            (x * (1.0 - x)).sqrt() * (2.0 * std::f64::consts::PI * 1.05 / (x + 0.05)).sin()
        }
        SignalKind::Check => {
            if x >= 0.5 {
                x - 0.5
            } else {
                0.0
            }
        }
        SignalKind::PiecewisePoly { pieces } => {
            let piece = pieces.iter().rev().find(|p| p.start <= x).or(pieces.first());
            piece.map_or(0.0, |p| {
                let t = x - p.start;
                p.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
            })
        }
    }
}

/// Samples `f(i / n)` for `i = 1..=n`.
pub fn generate(spec: &SignalSpec) -> Result<Vec<f64>> {
    if spec.n < 2 {
        return Err(LaserError::domain(format!("signal length must be at least 2, got {}", spec.n)));
    }
    if let SignalKind::PiecewisePoly { pieces } = &spec.kind {
        if pieces.is_empty() {
            return Err(LaserError::domain("piecewise polynomial needs at least one piece"));
        }
        if pieces.windows(2).any(|w| !(w[0].start < w[1].start)) {
            return Err(LaserError::domain("piece starts must be strictly increasing"));
        }
    }
    let n = spec.n as f64;
    Ok((1..=spec.n).map(|i| evaluate(&spec.kind, i as f64 / n)).collect())
}

/// Population standard deviation.
pub fn population_sd(v: &[f64]) -> f64 {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m).sqrt()
}

/// Rescales so that `sd(theta) = snr * sigma`.
pub fn scale_to_snr(template: &[f64], snr: f64, sigma: f64) -> Result<Vec<f64>> {
    if template.is_empty() {
        return Err(LaserError::domain("empty signal"));
    }
    let sd = population_sd(template);
    if !(sd > 0.0) {
        return Err(LaserError::domain("cannot scale a constant signal to a target SNR"));
    }
    let factor = snr * sigma / sd;
    Ok(template.iter().map(|v| v * factor).collect())
}

/// Standard Gaussian draws from a ChaCha8 stream seeded with `seed`.
pub fn standard_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// `theta + sigma * z`.
pub fn add_noise(theta: &[f64], noise: &NoiseSpec) -> Result<Vec<f64>> {
    if !(noise.sigma > 0.0) || !noise.sigma.is_finite() {
        return Err(LaserError::domain(format!("noise scale must be finite and positive, got {}", noise.sigma)));
    }
    let z = match noise.distribution {
        NoiseDistribution::Gaussian => standard_noise(theta.len(), noise.seed),
    };
    Ok(theta.iter().zip(z).map(|(t, z)| t + noise.sigma * z).collect())
}
