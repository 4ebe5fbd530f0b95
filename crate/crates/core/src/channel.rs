//! Time-varying Rayleigh fading with the classical Doppler spectrum,
//! multipath propagation of time signals, interferer power scaling, and
//! calibrated AWGN.
//!
//! Fading taps are generated by a sum of sinusoids whose Doppler frequencies
//! sit at equal-probability-mass quantiles of the classical (Jakes) spectrum,
//! `f_n = f_d cos(pi (n + u) / N)` with a random offset `u` and independent
//! random phases per oscillator. Each path's tap trajectory is normalized to
//! its profile weight over the generated window, so configured SIR and Eb/N0
//! are met by construction. Taps are quasi-static: one value per OFDM symbol
//! (f_d * T_sym < 1e-3 for every speed of interest).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::modem::{
    FrequencyGrid, TimeSignal, GI_SAMPLES, N_SUBCARRIERS, N_SYMBOLS, SYMBOL_SAMPLES,
};
use crate::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Oscillators per sum-of-sinusoids tap process.
const N_OSCILLATORS: usize = 64;

/// Operating point of one receiver: average Eb/N0 and average SIR against a
/// single interferer, both in dB. The SIR is a long-term average, not a
/// per-subcarrier quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub ebn0_db: f64,
    pub sir_db: f64,
}

/// Maximum Doppler shift for a mobile at `speed_kmh` and carrier `carrier_hz`.
pub fn doppler_frequency(speed_kmh: f64, carrier_hz: f64) -> f64 {
    (speed_kmh / 3.6) / SPEED_OF_LIGHT * carrier_hz
}

/// One propagation path: integer sample delay, average power (linear,
/// normalized across paths), and one complex tap per OFDM symbol.
#[derive(Debug, Clone)]
pub struct PathRealization {
    pub delay: usize,
    pub avg_power: f64,
    pub taps: Vec<Complex64>,
}

/// Fading realization of one BS-to-MS link over a span of OFDM symbols.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub paths: Vec<PathRealization>,
    pub speed_kmh: f64,
    pub carrier_hz: f64,
}

impl ChannelRealization {
    /// Number of OFDM symbols covered by this realization.
    pub fn n_symbols(&self) -> usize {
        self.paths.first().map_or(0, |p| p.taps.len())
    }

    /// View of symbols `[start, start + len)` as a standalone realization.
    ///
    /// Slicing a per-trial realization frame by frame keeps the tap processes
    /// continuous across frame boundaries.
    pub fn slice(&self, start: usize, len: usize) -> ChannelRealization {
        ChannelRealization {
            paths: self
                .paths
                .iter()
                .map(|p| PathRealization {
                    delay: p.delay,
                    avg_power: p.avg_power,
                    taps: p.taps[start..start + len].to_vec(),
                })
                .collect(),
            speed_kmh: self.speed_kmh,
            carrier_hz: self.carrier_hz,
        }
    }

    /// Per-subcarrier transfer function at `symbol_index`:
    /// `H_l = sum_p tap_p * exp(-j 2 pi l delay_p / 64)`.
    pub fn transfer_function(&self, symbol_index: usize) -> [Complex64; N_SUBCARRIERS] {
        let mut h = [Complex64::new(0.0, 0.0); N_SUBCARRIERS];
        for path in &self.paths {
            let tap = path.taps[symbol_index];
            let step =
                Complex64::from_polar(1.0, -2.0 * PI * path.delay as f64 / N_SUBCARRIERS as f64);
            let mut rot = Complex64::new(1.0, 0.0);
            for h_l in h.iter_mut() {
                *h_l += tap * rot;
                rot *= step;
            }
        }
        h
    }

    /// Propagates a time signal through this realization.
    ///
    /// Per OFDM symbol, each path contributes the symbol's samples delayed by
    /// its integer delay and scaled by its (symbol-constant) tap. The trailing
    /// spill of a delayed symbol lands in the next symbol's guard interval,
    /// which the receiver discards, so contributions past the end of the span
    /// are dropped.
    pub fn propagate(&self, signal: &TimeSignal) -> Result<TimeSignal> {
        let n_symbols = self.n_symbols();
        if signal.len() != n_symbols * SYMBOL_SAMPLES {
            return Err(Error::Size(format!(
                "signal has {} samples, realization covers {} symbols ({} samples)",
                signal.len(),
                n_symbols,
                n_symbols * SYMBOL_SAMPLES
            )));
        }
        let mut out = TimeSignal::zeroed(signal.len());
        for sym in 0..n_symbols {
            let start = sym * SYMBOL_SAMPLES;
            let block = &signal.samples[start..start + SYMBOL_SAMPLES];
            for path in &self.paths {
                let tap = path.taps[sym];
                let first = start + path.delay;
                let last = (first + SYMBOL_SAMPLES).min(out.samples.len());
                for (o, x) in out.samples[first..last].iter_mut().zip(block) {
                    *o += tap * x;
                }
            }
        }
        Ok(out)
    }
}

/// Generates one link's fading realization.
///
/// `profile` lists the power-delay profile as `(delay_samples, power_db)`
/// pairs; powers are normalized so the path weights sum to one. All delays
/// must stay within the guard interval, otherwise per-subcarrier flat fading
/// would not hold. Deterministic for a given seed.
pub fn generate_fading(
    seed: u64,
    speed_kmh: f64,
    carrier_hz: f64,
    symbol_duration_s: f64,
    n_symbols: usize,
    profile: &[(usize, f64)],
) -> Result<ChannelRealization> {
    if profile.is_empty() {
        return Err(Error::Config("channel profile must contain at least one path".into()));
    }
    if n_symbols == 0 {
        return Err(Error::Config("fading realization needs at least one symbol".into()));
    }
    for &(delay, _) in profile {
        if delay >= GI_SAMPLES {
            return Err(Error::Config(format!(
                "path delay {delay} samples reaches the {GI_SAMPLES}-sample guard interval"
            )));
        }
    }

    let total: f64 = profile.iter().map(|&(_, db)| 10f64.powf(db / 10.0)).sum();
    let doppler_hz = doppler_frequency(speed_kmh, carrier_hz);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let paths = profile
        .iter()
        .map(|&(delay, power_db)| {
            let weight = 10f64.powf(power_db / 10.0) / total;
            let taps = generate_tap_process(&mut rng, doppler_hz, symbol_duration_s, n_symbols, weight);
            PathRealization { delay, avg_power: weight, taps }
        })
        .collect();

    Ok(ChannelRealization { paths, speed_kmh, carrier_hz })
}

/// One Rayleigh tap process with mean power normalized to `weight` over the
/// generated window.
fn generate_tap_process(
    rng: &mut ChaCha8Rng,
    doppler_hz: f64,
    symbol_duration_s: f64,
    n_symbols: usize,
    weight: f64,
) -> Vec<Complex64> {
    // Equal-mass quantiles of the Jakes spectrum; the offset `u` randomizes
    // the oscillator grid between paths and trials.
    let u: f64 = rng.gen();
    let mut phasors = [Complex64::new(0.0, 0.0); N_OSCILLATORS];
    let mut steps = [Complex64::new(0.0, 0.0); N_OSCILLATORS];
    for n in 0..N_OSCILLATORS {
        let angle = PI * (n as f64 + u) / N_OSCILLATORS as f64;
        let f_n = doppler_hz * angle.cos();
        let phase: f64 = rng.gen_range(0.0..2.0 * PI);
        phasors[n] = Complex64::from_polar(1.0, phase);
        steps[n] = Complex64::from_polar(1.0, 2.0 * PI * f_n * symbol_duration_s);
    }

    let mut taps = Vec::with_capacity(n_symbols);
    let mut energy = 0.0;
    for _ in 0..n_symbols {
        let mut sum = Complex64::new(0.0, 0.0);
        for (p, s) in phasors.iter_mut().zip(&steps) {
            sum += *p;
            *p *= s;
        }
        energy += sum.norm_sqr();
        taps.push(sum);
    }
    let scale = (weight * n_symbols as f64 / energy).sqrt();
    for t in &mut taps {
        *t *= scale;
    }
    taps
}

/// Scales an interferer's transmit signal so its average received power sits
/// `sir_db` below the (unboosted) desired signal, both links having unit
/// average channel power.
pub fn scale_interferer(signal: &TimeSignal, sir_db: f64) -> TimeSignal {
    let amp = 10f64.powf(-sir_db / 20.0);
    TimeSignal {
        samples: signal.samples.iter().map(|s| s * amp).collect(),
    }
}

/// Adds i.i.d. circular complex Gaussian noise to every cell of the grid.
///
/// The per-cell variance is `1 / (log2(M) * 10^(ebn0_db/10))` with M = 4,
/// relative to unit data-symbol energy at the FFT output. Guard-interval
/// energy overhead is not counted against Eb/N0. Deterministic for a given
/// seed; an infinite Eb/N0 leaves the grid untouched.
pub fn add_awgn(grid: &FrequencyGrid, ebn0_db: f64, seed: u64) -> FrequencyGrid {
    let mut noisy = grid.clone();
    if ebn0_db.is_infinite() && ebn0_db > 0.0 {
        return noisy;
    }
    let sigma2 = noise_variance(ebn0_db);
    let component_sigma = (sigma2 / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for row in 0..N_SYMBOLS {
        for sc in 0..N_SUBCARRIERS {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *noisy.cell_mut(row, sc) += Complex64::new(re, im) * component_sigma;
        }
    }
    noisy
}

/// Complex noise variance per frequency-domain cell for QPSK at `ebn0_db`.
pub fn noise_variance(ebn0_db: f64) -> f64 {
    1.0 / (2.0 * 10f64.powf(ebn0_db / 10.0))
}
