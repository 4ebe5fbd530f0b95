//! Closed-loop power control driven by the estimated power ratio.
//!
//! Once per frame the mobile computes the power ratio (PR) between the
//! estimated desired and interferer channel transfer functions, summed over
//! all subcarriers. A PR below a threshold — looked up by average SIR and
//! mobile speed — indicates that the two received signals are near equal
//! power, the regime where joint ML detection turns ambiguous. The mobile
//! then sends a single feedback bit and the serving base station boosts the
//! next frame by 3 dB. Boosts never accumulate: each frame's boost is decided
//! solely by the previous frame's feedback.

use num_complex::Complex64;
use std::path::Path;

use crate::{Error, Result};

/// Boost applied to a frame after a feedback bit, in dB.
pub const BOOST_DB: f64 = 3.0;

/// SIR grid of the threshold table, in dB.
pub const TABLE_SIRS_DB: [f64; 12] = [
    -20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0,
];
/// Speed grid of the threshold table, in km/h.
pub const TABLE_SPEEDS_KMH: [f64; 3] = [10.0, 28.0, 120.0];

/// Compiled-in PR thresholds (dB), rows over [`TABLE_SIRS_DB`], columns over
/// [`TABLE_SPEEDS_KMH`]. Tuned for best cancellation gain at lowest power
/// loss.
const DEFAULT_THRESHOLDS_DB: [[f64; 3]; 12] = [
    [-20.0, -20.0, -15.0],
    [-15.0, -15.0, -10.0],
    [-10.0, -7.0, -7.0],
    [2.0, -4.0, -4.0],
    [2.0, 0.0, 0.0],
    [5.0, 5.0, 4.0],
    [10.0, 10.0, 10.0],
    [12.0, 15.0, 15.0],
    [14.0, 18.0, 18.0],
    [17.0, 20.0, 22.0],
    [20.0, 22.0, 24.0],
    [22.0, 24.0, 26.0],
];

/// PR threshold lookup table over the (average SIR, speed) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    thresholds_db: [[f64; 3]; 12],
}

impl Default for ThresholdTable {
    fn default() -> Self {
        ThresholdTable { thresholds_db: DEFAULT_THRESHOLDS_DB }
    }
}

impl ThresholdTable {
    /// Threshold for the nearest grid point.
    ///
    /// The SIR rows are spaced 5 dB apart; off-grid values snap to the
    /// nearest row, ties toward the lower SIR. Speeds snap to the nearest
    /// column the same way.
    pub fn lookup_threshold(&self, avg_sir_db: f64, speed_kmh: f64) -> f64 {
        let row = nearest_index(&TABLE_SIRS_DB, avg_sir_db);
        let col = nearest_index(&TABLE_SPEEDS_KMH, speed_kmh);
        self.thresholds_db[row][col]
    }

    /// Loads a table from a plain-text file.
    ///
    /// Format: `#` starts a comment; the first data line lists the three
    /// speeds in km/h, each following line an SIR value and its three
    /// thresholds. The 12 SIR rows must match the compiled-in grid.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split_whitespace()
                .map(|f| {
                    f.parse::<f64>().map_err(|_| {
                        Error::Config(format!(
                            "threshold table line {}: cannot parse '{f}'",
                            lineno + 1
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            rows.push(fields);
        }
        if rows.len() != 13 {
            return Err(Error::Config(format!(
                "threshold table needs a speed header and 12 SIR rows, found {} lines",
                rows.len()
            )));
        }
        let header = &rows[0];
        if header.len() != 3 || header.iter().zip(&TABLE_SPEEDS_KMH).any(|(a, b)| a != b) {
            return Err(Error::Config(format!(
                "threshold table speed header must be {TABLE_SPEEDS_KMH:?}, found {header:?}"
            )));
        }
        let mut thresholds_db = [[0.0; 3]; 12];
        for (i, row) in rows[1..].iter().enumerate() {
            if row.len() != 4 {
                return Err(Error::Config(format!(
                    "threshold table SIR row {} must have 4 fields, found {}",
                    i + 1,
                    row.len()
                )));
            }
            if row[0] != TABLE_SIRS_DB[i] {
                return Err(Error::Config(format!(
                    "threshold table row {} should start with SIR {}, found {}",
                    i + 1,
                    TABLE_SIRS_DB[i],
                    row[0]
                )));
            }
            thresholds_db[i].copy_from_slice(&row[1..]);
        }
        Ok(ThresholdTable { thresholds_db })
    }

    /// Renders the table in the [`ThresholdTable::parse`] format.
    pub fn render(&self) -> String {
        let mut out = String::from("# PR thresholds (dB); columns are speeds in km/h\n10 28 120\n");
        for (sir, row) in TABLE_SIRS_DB.iter().zip(&self.thresholds_db) {
            out.push_str(&format!("{sir} {} {} {}\n", row[0], row[1], row[2]));
        }
        out
    }
}

fn nearest_index(grid: &[f64], value: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &g) in grid.iter().enumerate() {
        let d = (value - g).abs();
        // Strict < keeps the lower grid point on ties.
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Threshold lookup against the compiled-in table.
pub fn lookup_threshold(avg_sir_db: f64, speed_kmh: f64) -> f64 {
    ThresholdTable::default().lookup_threshold(avg_sir_db, speed_kmh)
}

/// Power ratio between the two estimated links over all subcarriers:
/// `10 log10(sum |h1_l|^2 / sum |h2_l|^2)`.
///
/// Fails if the interferer estimate has no energy; callers treat that as
/// PR = +inf (no feedback).
pub fn compute_pr(h1_hat: &[Complex64], h2_hat: &[Complex64]) -> Result<f64> {
    let p1: f64 = h1_hat.iter().map(|h| h.norm_sqr()).sum();
    let p2: f64 = h2_hat.iter().map(|h| h.norm_sqr()).sum();
    if p2 == 0.0 {
        return Err(Error::UndefinedPowerRatio);
    }
    Ok(10.0 * (p1 / p2).log10())
}

/// Feedback decision: 1 if the PR fell strictly below the threshold.
/// Equality sends no feedback.
pub fn decide_feedback(pr_db: f64, threshold_db: f64) -> u8 {
    u8::from(pr_db < threshold_db)
}

/// Boost the power control unit applies to the next frame for a feedback
/// bit. Applies to exactly one frame; consecutive feedbacks re-arm the same
/// 3 dB, they never stack.
pub fn pcu_next_boost(feedback_bit: u8) -> f64 {
    debug_assert!(feedback_bit <= 1);
    if feedback_bit == 1 {
        BOOST_DB
    } else {
        0.0
    }
}

/// Receiver-side PR loop state for one link.
///
/// `update` consumes frame k's PR and arms the boost for frame k+1; the
/// feedback channel is ideal (error-free, one frame latency).
#[derive(Debug, Clone, Copy)]
pub struct PowerControlState {
    pub last_pr_db: f64,
    pub threshold_db: f64,
    pub feedback_bit: u8,
    pub pending_boost_db: f64,
}

impl PowerControlState {
    pub fn new(threshold_db: f64) -> Self {
        PowerControlState {
            last_pr_db: f64::INFINITY,
            threshold_db,
            feedback_bit: 0,
            pending_boost_db: 0.0,
        }
    }

    /// Boost to apply to the frame about to be transmitted.
    pub fn boost_for_this_frame(&self) -> f64 {
        self.pending_boost_db
    }

    /// Feeds the current frame's PR; the resulting feedback bit governs only
    /// the next frame's boost.
    pub fn update(&mut self, pr_db: f64) -> u8 {
        self.last_pr_db = pr_db;
        self.feedback_bit = decide_feedback(pr_db, self.threshold_db);
        self.pending_boost_db = pcu_next_boost(self.feedback_bit);
        self.feedback_bit
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Table I values frozen independently of the implementation constant.
    const EXPECTED: [(f64, [f64; 3]); 12] = [
        (-20.0, [-20.0, -20.0, -15.0]),
        (-15.0, [-15.0, -15.0, -10.0]),
        (-10.0, [-10.0, -7.0, -7.0]),
        (-5.0, [2.0, -4.0, -4.0]),
        (0.0, [2.0, 0.0, 0.0]),
        (5.0, [5.0, 5.0, 4.0]),
        (10.0, [10.0, 10.0, 10.0]),
        (15.0, [12.0, 15.0, 15.0]),
        (20.0, [14.0, 18.0, 18.0]),
        (25.0, [17.0, 20.0, 22.0]),
        (30.0, [20.0, 22.0, 24.0]),
        (35.0, [22.0, 24.0, 26.0]),
    ];

    #[test]
    fn all_36_threshold_entries() {
        for &(sir, row) in &EXPECTED {
            for (col, &speed) in TABLE_SPEEDS_KMH.iter().enumerate() {
                assert_eq!(
                    lookup_threshold(sir, speed),
                    row[col],
                    "entry at SIR {sir} dB, {speed} km/h"
                );
            }
        }
    }

    #[test]
    fn thresholds_monotone_in_sir() {
        for col in 0..3 {
            for w in EXPECTED.windows(2) {
                assert!(w[0].1[col] <= w[1].1[col]);
            }
        }
    }

    #[test]
    fn lookup_snaps_to_nearest_grid_point() {
        assert_eq!(lookup_threshold(0.0, 28.0), 0.0);
        assert_eq!(lookup_threshold(-5.0, 10.0), 2.0);
        assert_eq!(lookup_threshold(35.0, 120.0), 26.0);
        // Off-grid SIR, nearest row.
        assert_eq!(lookup_threshold(-4.0, 10.0), 2.0);
        assert_eq!(lookup_threshold(3.0, 28.0), 5.0);
        assert_eq!(lookup_threshold(100.0, 120.0), 26.0);
        assert_eq!(lookup_threshold(-33.0, 10.0), -20.0);
        // Row midpoint ties toward the lower SIR.
        assert_eq!(lookup_threshold(-2.5, 10.0), 2.0);
        assert_eq!(lookup_threshold(2.5, 10.0), 2.0);
        // Off-grid speed, nearest column; midpoint ties toward the lower.
        assert_eq!(lookup_threshold(-5.0, 15.0), 2.0);
        assert_eq!(lookup_threshold(-5.0, 19.0), 2.0);
        assert_eq!(lookup_threshold(-5.0, 20.0), -4.0);
        assert_eq!(lookup_threshold(-5.0, 80.0), -4.0);
        assert_eq!(lookup_threshold(-5.0, 300.0), -4.0);
    }

    #[test]
    fn table_file_round_trip() {
        let table = ThresholdTable::default();
        let parsed = ThresholdTable::parse(&table.render()).unwrap();
        assert_eq!(parsed, table);
    }

    #[test]
    fn table_parse_rejects_malformed_input() {
        assert!(ThresholdTable::parse("10 28 120\n-20 -20 -20").is_err());
        assert!(ThresholdTable::parse("").is_err());
        let mut wrong_sir = ThresholdTable::default().render();
        wrong_sir = wrong_sir.replace("\n-20 ", "\n-21 ");
        assert!(ThresholdTable::parse(&wrong_sir).is_err());
    }

    #[test]
    fn pr_reference_values() {
        let h1 = vec![Complex64::new(0.3, -0.4); 64];
        assert!(compute_pr(&h1, &h1).unwrap().abs() < 1e-12);

        let sqrt10 = 10f64.sqrt();
        let h2: Vec<Complex64> = h1.iter().map(|h| h / sqrt10).collect();
        assert!((compute_pr(&h1, &h2).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn pr_matches_arithmetic_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let h1: Vec<Complex64> = (0..64)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let h2: Vec<Complex64> = (0..64)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let mut p1 = 0.0;
            let mut p2 = 0.0;
            for i in 0..64 {
                p1 += h1[i].re * h1[i].re + h1[i].im * h1[i].im;
                p2 += h2[i].re * h2[i].re + h2[i].im * h2[i].im;
            }
            let oracle = 10.0 * (p1 / p2).log10();
            assert!((compute_pr(&h1, &h2).unwrap() - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn pr_undefined_for_zero_interferer() {
        let h1 = vec![Complex64::new(1.0, 0.0); 64];
        let h2 = vec![Complex64::new(0.0, 0.0); 64];
        assert!(matches!(compute_pr(&h1, &h2), Err(Error::UndefinedPowerRatio)));
    }

    #[test]
    fn feedback_is_strictly_below() {
        assert_eq!(decide_feedback(-3.0, 0.0), 1);
        assert_eq!(decide_feedback(0.0, 0.0), 0);
        assert_eq!(decide_feedback(5.0, 0.0), 0);
        assert_eq!(decide_feedback(f64::INFINITY, 0.0), 0);
    }

    #[test]
    fn boost_mapping_and_non_accumulation() {
        assert_eq!(pcu_next_boost(1), 3.0);
        assert_eq!(pcu_next_boost(0), 0.0);

        let mut state = PowerControlState::new(0.0);
        assert_eq!(state.boost_for_this_frame(), 0.0);
        // Two consecutive low-PR frames each arm a 3 dB boost, never 6.
        state.update(-5.0);
        assert_eq!(state.boost_for_this_frame(), 3.0);
        state.update(-5.0);
        assert_eq!(state.boost_for_this_frame(), 3.0);
        state.update(1.0);
        assert_eq!(state.boost_for_this_frame(), 0.0);
        assert_eq!(state.feedback_bit, 0);
    }

    #[test]
    fn state_invariants_hold() {
        let mut state = PowerControlState::new(2.0);
        for pr in [-10.0, 1.9, 2.0, 2.1, 30.0] {
            let bit = state.update(pr);
            assert_eq!(bit == 1, pr < 2.0);
            assert_eq!(state.pending_boost_db == 3.0, state.feedback_bit == 1);
        }
    }

    proptest! {
        #[test]
        fn pr_scale_law(
            scale_re in -3.0f64..3.0, scale_im in -3.0f64..3.0,
            seed in 0u64..1000,
        ) {
            let a = Complex64::new(scale_re, scale_im);
            prop_assume!(a.norm() > 1e-3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h1: Vec<Complex64> = (0..64)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let h2: Vec<Complex64> = (0..64)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let scaled: Vec<Complex64> = h1.iter().map(|h| h * a).collect();
            let shift = compute_pr(&scaled, &h2).unwrap() - compute_pr(&h1, &h2).unwrap();
            prop_assert!((shift - 20.0 * a.norm().log10()).abs() < 1e-9);
        }
    }
}
