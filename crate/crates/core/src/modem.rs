//! Bit/QPSK mapping, frame assembly with the interleaved two-BS pilot
//! pattern, OFDM modulation/demodulation, and per-frame power boosting.
//!
//! Frame geometry is fixed: 4 pilot OFDM symbols followed by 51 data symbols,
//! 64 subcarriers, 16-sample guard interval, 20 MHz sample rate. Both DFT
//! directions are unitary (scaled by 1/sqrt(64)) so frequency- and time-domain
//! energies match and noise can be calibrated once in the frequency domain.

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use std::sync::{Arc, LazyLock};

use crate::{Error, Result};

/// Number of subcarriers (FFT size).
pub const N_SUBCARRIERS: usize = 64;
/// Guard-interval length in samples.
pub const GI_SAMPLES: usize = 16;
/// Samples per OFDM symbol including the guard interval.
pub const SYMBOL_SAMPLES: usize = N_SUBCARRIERS + GI_SAMPLES;
/// Pilot OFDM symbols at the start of each frame.
pub const N_PILOT_SYMBOLS: usize = 4;
/// Data OFDM symbols per frame.
pub const N_DATA_SYMBOLS: usize = 51;
/// OFDM symbols per frame.
pub const N_SYMBOLS: usize = N_PILOT_SYMBOLS + N_DATA_SYMBOLS;
/// Time samples per frame (55 x 80 = 4400).
pub const FRAME_SAMPLES: usize = N_SYMBOLS * SYMBOL_SAMPLES;
/// Data bits per frame (51 x 64 x 2).
pub const BITS_PER_FRAME: usize = N_DATA_SYMBOLS * N_SUBCARRIERS * 2;

/// Unit-energy Gray-mapped QPSK constellation, indexed by (b0 << 1) | b1.
///
/// Point for bits (b0, b1) is ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2), so the
/// real part carries b0 and the imaginary part carries b1.
pub const QPSK: [Complex64; 4] = {
    const A: f64 = std::f64::consts::FRAC_1_SQRT_2;
    [
        Complex64::new(A, A),
        Complex64::new(A, -A),
        Complex64::new(-A, A),
        Complex64::new(-A, -A),
    ]
};

/// Transmitting base station, desired (`Bs1`) or interferer (`Bs2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsIndex {
    Bs1,
    Bs2,
}

impl BsIndex {
    fn ordinal(self) -> usize {
        match self {
            BsIndex::Bs1 => 0,
            BsIndex::Bs2 => 1,
        }
    }
}

/// Role of an OFDM symbol row within a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolRole {
    Pilot,
    Data,
}

/// Maps two bits onto the unit-energy QPSK constellation.
pub fn map_bits_to_qpsk(b0: u8, b1: u8) -> Complex64 {
    debug_assert!(b0 <= 1 && b1 <= 1);
    QPSK[((b0 << 1) | b1) as usize]
}

/// Hard-decision inverse of [`map_bits_to_qpsk`].
///
/// Decides each bit from the sign of the corresponding component; a component
/// exactly on the axis decides bit 0 (the nonnegative half-plane).
pub fn demap_qpsk(symbol: Complex64) -> (u8, u8) {
    let b0 = u8::from(symbol.re < 0.0);
    let b1 = u8::from(symbol.im < 0.0);
    (b0, b1)
}

/// Constellation index of the nearest QPSK point, consistent with
/// [`demap_qpsk`].
pub fn qpsk_index(symbol: Complex64) -> usize {
    let (b0, b1) = demap_qpsk(symbol);
    ((b0 << 1) | b1) as usize
}

/// Pilot subcarrier allocation per base station and pilot symbol.
///
/// The two stations use complementary subcarrier sets on every pilot symbol:
/// the desired BS occupies the odd-indexed subcarriers of the odd-indexed
/// pilot symbols and the even-indexed subcarriers of the even-indexed ones
/// (1-based indices), the interferer the complement. Each station therefore
/// observes every subcarrier exactly twice per frame, interference-free.
#[derive(Debug, Clone)]
pub struct PilotPattern {
    support: [[Vec<usize>; N_PILOT_SYMBOLS]; 2],
}

impl PilotPattern {
    /// The interleaved pattern described above.
    pub fn interleaved() -> Self {
        let mut support: [[Vec<usize>; N_PILOT_SYMBOLS]; 2] = Default::default();
        for row in 0..N_PILOT_SYMBOLS {
            for sc in 0..N_SUBCARRIERS {
                // 0-based: BS1 holds subcarriers whose parity matches the row's.
                let bs = if (sc + row) % 2 == 0 { 0 } else { 1 };
                support[bs][row].push(sc);
            }
        }
        PilotPattern { support }
    }

    /// Subcarriers carrying pilots of `bs` on pilot symbol `row`.
    pub fn subcarriers(&self, bs: BsIndex, row: usize) -> &[usize] {
        &self.support[bs.ordinal()][row]
    }

    /// Whether `bs` transmits a pilot on (`row`, `sc`).
    pub fn is_supported(&self, bs: BsIndex, row: usize, sc: usize) -> bool {
        self.support[bs.ordinal()][row].binary_search(&sc).is_ok()
    }
}

impl Default for PilotPattern {
    fn default() -> Self {
        Self::interleaved()
    }
}

/// Known pilot symbol values of one base station, per pilot row and
/// subcarrier. Only the cells on the station's pattern support are
/// transmitted.
#[derive(Debug, Clone)]
pub struct PilotSequence {
    values: [[Complex64; N_SUBCARRIERS]; N_PILOT_SYMBOLS],
}

impl PilotSequence {
    pub fn from_values(values: [[Complex64; N_SUBCARRIERS]; N_PILOT_SYMBOLS]) -> Self {
        PilotSequence { values }
    }

    /// Pseudo-random unit-energy QPSK pilot values.
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let mut values = [[Complex64::new(0.0, 0.0); N_SUBCARRIERS]; N_PILOT_SYMBOLS];
        for row in values.iter_mut() {
            for cell in row.iter_mut() {
                *cell = QPSK[rng.gen_range(0..4)];
            }
        }
        PilotSequence { values }
    }

    pub fn value(&self, row: usize, sc: usize) -> Complex64 {
        self.values[row][sc]
    }
}

/// One OFDM frame in the frequency domain: 55 symbols x 64 subcarriers.
///
/// Rows 0..4 are pilot symbols, rows 4..55 data symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    cells: Vec<Complex64>,
}

impl FrequencyGrid {
    pub fn zeroed() -> Self {
        FrequencyGrid {
            cells: vec![Complex64::new(0.0, 0.0); N_SYMBOLS * N_SUBCARRIERS],
        }
    }

    pub fn role(row: usize) -> SymbolRole {
        if row < N_PILOT_SYMBOLS {
            SymbolRole::Pilot
        } else {
            SymbolRole::Data
        }
    }

    pub fn cell(&self, row: usize, sc: usize) -> Complex64 {
        self.cells[row * N_SUBCARRIERS + sc]
    }

    pub fn cell_mut(&mut self, row: usize, sc: usize) -> &mut Complex64 {
        &mut self.cells[row * N_SUBCARRIERS + sc]
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.cells[row * N_SUBCARRIERS..(row + 1) * N_SUBCARRIERS]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Complex64]> {
        self.cells.chunks_exact(N_SUBCARRIERS)
    }

    /// The four pilot rows as a fixed-size view.
    pub fn pilot_rows(&self) -> [&[Complex64]; N_PILOT_SYMBOLS] {
        [self.row(0), self.row(1), self.row(2), self.row(3)]
    }

    pub fn scale(&mut self, factor: f64) {
        for c in &mut self.cells {
            *c *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.cells.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Baseband time-domain signal at the 20 MHz sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    pub samples: Vec<Complex64>,
}

impl TimeSignal {
    pub fn zeroed(len: usize) -> Self {
        TimeSignal {
            samples: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Adds `other` sample-wise.
    pub fn add(&mut self, other: &TimeSignal) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Size(format!(
                "cannot sum signals of {} and {} samples",
                self.len(),
                other.len()
            )));
        }
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            *a += b;
        }
        Ok(())
    }
}

/// Builds one frequency-domain frame for `bs`.
///
/// Pilot rows carry this station's known pilot values on its pattern
/// subcarriers and zeros elsewhere (the other station's pilot subcarriers are
/// left silent). Data rows carry the QPSK-mapped `data_bits` on all 64
/// subcarriers, row-major, two bits per cell.
pub fn build_frame(
    data_bits: &[u8],
    pilot_seq: &PilotSequence,
    bs: BsIndex,
    pattern: &PilotPattern,
) -> Result<FrequencyGrid> {
    if data_bits.len() != BITS_PER_FRAME {
        return Err(Error::Size(format!(
            "expected {} data bits per frame, got {}",
            BITS_PER_FRAME,
            data_bits.len()
        )));
    }
    let mut grid = FrequencyGrid::zeroed();
    for row in 0..N_PILOT_SYMBOLS {
        for &sc in pattern.subcarriers(bs, row) {
            *grid.cell_mut(row, sc) = pilot_seq.value(row, sc);
        }
    }
    let mut bits = data_bits.chunks_exact(2);
    for row in N_PILOT_SYMBOLS..N_SYMBOLS {
        for sc in 0..N_SUBCARRIERS {
            let pair = bits.next().expect("bit count checked above");
            *grid.cell_mut(row, sc) = map_bits_to_qpsk(pair[0], pair[1]);
        }
    }
    Ok(grid)
}

/// Scales every cell of the frame (pilots included) by `boost_db`.
///
/// The power-control protocol only ever produces 0 or 3 dB and never
/// accumulates boosts across frames.
pub fn apply_power_boost(grid: &FrequencyGrid, boost_db: f64) -> FrequencyGrid {
    let mut boosted = grid.clone();
    if boost_db != 0.0 {
        boosted.scale(10f64.powf(boost_db / 20.0));
    }
    boosted
}

static FFT_FORWARD: LazyLock<Arc<dyn Fft<f64>>> =
    LazyLock::new(|| FftPlanner::new().plan_fft_forward(N_SUBCARRIERS));
static FFT_INVERSE: LazyLock<Arc<dyn Fft<f64>>> =
    LazyLock::new(|| FftPlanner::new().plan_fft_inverse(N_SUBCARRIERS));

const DFT_SCALE: f64 = 0.125; // 1/sqrt(64)

/// OFDM-modulates a frame: per row, unitary 64-point inverse DFT, then the
/// last 16 time samples are prepended as the guard interval.
pub fn ofdm_modulate(grid: &FrequencyGrid) -> TimeSignal {
    let mut samples = Vec::with_capacity(FRAME_SAMPLES);
    let mut buf = [Complex64::new(0.0, 0.0); N_SUBCARRIERS];
    for row in grid.rows() {
        buf.copy_from_slice(row);
        FFT_INVERSE.process(&mut buf);
        for c in &mut buf {
            *c *= DFT_SCALE;
        }
        samples.extend_from_slice(&buf[N_SUBCARRIERS - GI_SAMPLES..]);
        samples.extend_from_slice(&buf);
    }
    TimeSignal { samples }
}

/// Inverse of [`ofdm_modulate`]: per 80-sample block, drops the guard
/// interval and applies the unitary forward DFT.
pub fn ofdm_demodulate(signal: &TimeSignal) -> Result<FrequencyGrid> {
    if signal.len() != FRAME_SAMPLES {
        return Err(Error::Size(format!(
            "expected {} samples per frame, got {}",
            FRAME_SAMPLES,
            signal.len()
        )));
    }
    let mut grid = FrequencyGrid::zeroed();
    let mut buf = [Complex64::new(0.0, 0.0); N_SUBCARRIERS];
    for (row, block) in signal.samples.chunks_exact(SYMBOL_SAMPLES).enumerate() {
        buf.copy_from_slice(&block[GI_SAMPLES..]);
        FFT_FORWARD.process(&mut buf);
        for (sc, c) in buf.iter().enumerate() {
            *grid.cell_mut(row, sc) = c * DFT_SCALE;
        }
    }
    Ok(grid)
}
