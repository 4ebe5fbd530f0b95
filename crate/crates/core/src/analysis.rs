//! Closed-form BER reference, empirical BER accounting, the equal-SIR
//! subcarrier diagnostic, and power-control cost/gain bookkeeping.

use num_complex::Complex64;

use crate::{Error, Result};

/// Closed-form BER of square-QAM on a flat Rayleigh downlink with `K`
/// co-channel interferers and AWGN, all quantities linear:
///
/// ```text
/// P_e = 1/log2(sqrt(M)) * (1 - 1/sqrt(M))
///       * [1 - 1/sqrt((M-1)/3 * (sum_j 1/SIR_j + 2/(log2(M) Eb/N0)) + 1)]
/// ```
///
/// `sir_list` holds one linear ratio per interferer (empty for none, infinity
/// allowed); `ebn0` may be infinite. `m` must be a square power of two
/// (4, 16, 64, ...).
pub fn theoretical_ber(m: u32, sir_list: &[f64], ebn0: f64) -> Result<f64> {
    let sqrt_m = (m as f64).sqrt();
    if m < 4 || sqrt_m.fract() != 0.0 || !(m & (m - 1) == 0) {
        return Err(Error::Domain(format!(
            "modulation size {m} is not a square power of two"
        )));
    }
    for &sir in sir_list {
        if !(sir > 0.0) {
            return Err(Error::Domain(format!("SIR must be positive, got {sir}")));
        }
    }
    if !(ebn0 > 0.0) {
        return Err(Error::Domain(format!("Eb/N0 must be positive, got {ebn0}")));
    }
    let log2_m = (m as f64).log2();
    let interference: f64 = sir_list.iter().map(|sir| 1.0 / sir).sum();
    let inner = (m as f64 - 1.0) / 3.0 * (interference + 2.0 / (log2_m * ebn0)) + 1.0;
    let pe = 1.0 / sqrt_m.log2() * (1.0 - 1.0 / sqrt_m) * (1.0 - 1.0 / inner.sqrt());
    Ok(pe)
}

/// Converts dB to a linear power ratio; infinity passes through.
pub fn db_to_linear(db: f64) -> f64 {
    if db.is_infinite() && db > 0.0 {
        f64::INFINITY
    } else {
        10f64.powf(db / 10.0)
    }
}

/// Bit and error counts of one detected frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitErrors {
    pub bits: u64,
    pub errors: u64,
}

impl BitErrors {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }
}

/// Counts mismatching bits between a transmitted and a detected stream.
pub fn empirical_ber(tx_bits: &[u8], rx_bits: &[u8]) -> Result<BitErrors> {
    if tx_bits.len() != rx_bits.len() {
        return Err(Error::Size(format!(
            "bit streams differ in length: {} vs {}",
            tx_bits.len(),
            rx_bits.len()
        )));
    }
    let errors = tx_bits.iter().zip(rx_bits).filter(|(a, b)| a != b).count() as u64;
    Ok(BitErrors { bits: tx_bits.len() as u64, errors })
}

/// Per-frame observables recorded by a trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRecord {
    pub bits: u64,
    pub errors: u64,
    pub boost_db: f64,
    pub pr_db: f64,
    pub feedback_bit: u8,
}

/// Accumulated per-frame history and aggregates of one trial (or several
/// merged trials; merging is a plain concatenation, so it is associative and
/// order-independent for all aggregate counts).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BerRecord {
    pub frames: Vec<FrameRecord>,
}

impl BerRecord {
    pub fn push(&mut self, frame: FrameRecord) {
        debug_assert!(frame.errors <= frame.bits);
        self.frames.push(frame);
    }

    pub fn merge(&mut self, other: &BerRecord) {
        self.frames.extend_from_slice(&other.frames);
    }

    pub fn total_bits(&self) -> u64 {
        self.frames.iter().map(|f| f.bits).sum()
    }

    pub fn total_errors(&self) -> u64 {
        self.frames.iter().map(|f| f.errors).sum()
    }

    pub fn ber(&self) -> f64 {
        let bits = self.total_bits();
        if bits == 0 {
            0.0
        } else {
            self.total_errors() as f64 / bits as f64
        }
    }

    /// Fraction of frames transmitted with a boost.
    pub fn boost_fraction(&self) -> f64 {
        if self.frames.is_empty() {
            0.0
        } else {
            self.frames.iter().filter(|f| f.boost_db > 0.0).count() as f64
                / self.frames.len() as f64
        }
    }

    pub fn boost_history(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.boost_db).collect()
    }

    /// Average transmitted power relative to nominal, in dB.
    pub fn power_penalty_db(&self) -> f64 {
        if self.frames.is_empty() {
            0.0
        } else {
            power_penalty(&self.boost_history())
        }
    }
}

/// Average transmit power over a boost history, relative to nominal:
/// `10 log10(mean(10^(boost/10)))`.
pub fn power_penalty(boost_history_db: &[f64]) -> f64 {
    assert!(!boost_history_db.is_empty(), "power penalty of an empty history");
    let mean: f64 = boost_history_db
        .iter()
        .map(|&b| 10f64.powf(b / 10.0))
        .sum::<f64>()
        / boost_history_db.len() as f64;
    10.0 * mean.log10()
}

/// Fraction of subcarriers whose instantaneous desired-to-interferer power
/// ratio lies within `window_db` of 0 dB.
///
/// Subcarriers where the interferer response is exactly zero are excluded
/// from both numerator and denominator; an empty denominator yields 0.
pub fn prob_sir_zero(h1: &[Complex64], h2: &[Complex64], window_db: f64) -> f64 {
    debug_assert!(window_db > 0.0);
    let mut counted = 0u32;
    let mut matched = 0u32;
    for (a, b) in h1.iter().zip(h2) {
        let p2 = b.norm_sqr();
        if p2 == 0.0 {
            continue;
        }
        counted += 1;
        let ratio_db = 10.0 * (a.norm_sqr() / p2).log10();
        if ratio_db.abs() <= window_db {
            matched += 1;
        }
    }
    if counted == 0 {
        0.0
    } else {
        matched as f64 / counted as f64
    }
}

/// One point of a measured BER-versus-SIR curve.
pub type BerCurvePoint = (f64, f64);

/// Net power-control gain between two BER curves, in dB of SIR.
///
/// The raw gain is the horizontal displacement `sir_off(level) -
/// sir_on(level)` between the curves, log-linearly interpolated and averaged
/// over a geometric ladder of BER levels spanned by both curves; the power
/// penalty is then subtracted. Levels that only one curve reaches are
/// unmeasurable and skipped. Fails if the curves share no BER level at all.
pub fn effective_gain(
    ber_pc_on: &[BerCurvePoint],
    ber_pc_off: &[BerCurvePoint],
    penalty_db: f64,
) -> Result<f64> {
    let on = usable_curve(ber_pc_on)?;
    let off = usable_curve(ber_pc_off)?;

    let (lo_on, hi_on) = ber_range(&on);
    let (lo_off, hi_off) = ber_range(&off);
    let lo = lo_on.max(lo_off);
    let hi = hi_on.min(hi_off);
    if !(lo < hi) {
        return Err(Error::Numerical(
            "BER curves share no common level; gain is unmeasurable".into(),
        ));
    }

    const N_LEVELS: usize = 21;
    let (log_lo, log_hi) = (lo.ln(), hi.ln());
    let mut shifts = Vec::new();
    for i in 0..N_LEVELS {
        // Interior levels only; endpoints are degenerate for one curve.
        let t = (i as f64 + 1.0) / (N_LEVELS as f64 + 1.0);
        let level = (log_lo + t * (log_hi - log_lo)).exp();
        if let (Some(s_on), Some(s_off)) = (sir_at_level(&on, level), sir_at_level(&off, level)) {
            shifts.push(s_off - s_on);
        }
    }
    if shifts.is_empty() {
        return Err(Error::Numerical(
            "no BER level was measurable on both curves".into(),
        ));
    }
    Ok(shifts.iter().sum::<f64>() / shifts.len() as f64 - penalty_db)
}

/// Sorted copy of a curve with zero-BER points dropped (they have no
/// log-domain position).
fn usable_curve(curve: &[BerCurvePoint]) -> Result<Vec<BerCurvePoint>> {
    let mut pts: Vec<BerCurvePoint> = curve.iter().copied().filter(|&(_, b)| b > 0.0).collect();
    if pts.len() < 2 {
        return Err(Error::Numerical(
            "a BER curve needs at least two nonzero points".into(),
        ));
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(pts)
}

fn ber_range(curve: &[BerCurvePoint]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &(_, b) in curve {
        lo = lo.min(b);
        hi = hi.max(b);
    }
    (lo, hi)
}

/// SIR at which the curve crosses `level`, interpolating linearly in
/// (SIR, log BER); the first bracketing segment from the left wins.
fn sir_at_level(curve: &[BerCurvePoint], level: f64) -> Option<f64> {
    let log_level = level.ln();
    for w in curve.windows(2) {
        let (s0, b0) = w[0];
        let (s1, b1) = w[1];
        let (l0, l1) = (b0.ln(), b1.ln());
        if (l0 - log_level) * (l1 - log_level) <= 0.0 {
            if l0 == l1 {
                return Some(s0);
            }
            return Some(s0 + (log_level - l0) * (s1 - s0) / (l1 - l0));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn theoretical_ber_golden_points() {
        // No interference, infinite Eb/N0: error-free.
        assert_eq!(theoretical_ber(4, &[], f64::INFINITY).unwrap(), 0.0);

        // One equal-power interferer, no noise: 0.5 (1 - 1/sqrt(2)).
        let p = theoretical_ber(4, &[1.0], f64::INFINITY).unwrap();
        assert!((p - 0.14645).abs() < 1e-5);
        assert!((p - 0.5 * (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-15);

        // No interference at 18 dB.
        let p = theoretical_ber(4, &[f64::INFINITY], db_to_linear(18.0)).unwrap();
        assert!((p - 3.91e-3).abs() < 1e-5);
        // Cross-check against the classical flat-Rayleigh QPSK expression
        // 0.5 (1 - sqrt(g/(1+g))), an algebraic identity at M = 4.
        let g = db_to_linear(18.0);
        let classical = 0.5 * (1.0 - (g / (1.0 + g)).sqrt());
        assert!((p - classical).abs() < 1e-12);
    }

    #[test]
    fn theoretical_ber_rejects_bad_modulation() {
        for m in [0u32, 1, 2, 8, 32, 15] {
            assert!(theoretical_ber(m, &[], 10.0).is_err(), "M = {m}");
        }
        assert!(theoretical_ber(16, &[], 10.0).is_ok());
        assert!(theoretical_ber(64, &[], 10.0).is_ok());
        assert!(theoretical_ber(4, &[0.0], 10.0).is_err());
        assert!(theoretical_ber(4, &[], 0.0).is_err());
    }

    #[test]
    fn theoretical_ber_monotone_and_bounded() {
        let cap = 0.5; // 1/log2(2) * (1 - 1/2) for M = 4
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let ebn0_db = -10.0 + 0.4 * i as f64;
            let p = theoretical_ber(4, &[db_to_linear(0.0)], db_to_linear(ebn0_db)).unwrap();
            assert!(p <= prev + 1e-15, "not nonincreasing in Eb/N0 at {ebn0_db}");
            assert!((0.0..=cap).contains(&p));
            prev = p;
        }
        prev = f64::INFINITY;
        for i in 0..100 {
            let sir_db = -10.0 + 0.4 * i as f64;
            let p = theoretical_ber(4, &[db_to_linear(sir_db)], db_to_linear(18.0)).unwrap();
            assert!(p <= prev + 1e-15, "not nonincreasing in SIR at {sir_db}");
            prev = p;
        }
    }

    #[test]
    fn interference_never_helps() {
        let clean = theoretical_ber(4, &[], db_to_linear(18.0)).unwrap();
        for sir_db in [-5.0, 0.0, 10.0, 30.0] {
            let with = theoretical_ber(4, &[db_to_linear(sir_db)], db_to_linear(18.0)).unwrap();
            assert!(with >= clean);
        }
    }

    #[test]
    fn empirical_ber_counting() {
        let a = vec![0u8, 1, 1, 0];
        assert_eq!(empirical_ber(&a, &a).unwrap().errors, 0);
        let flipped: Vec<u8> = a.iter().map(|b| b ^ 1).collect();
        let all = empirical_ber(&a, &flipped).unwrap();
        assert_eq!(all.errors, 4);
        assert_eq!(all.ber(), 1.0);

        let mut one = vec![0u8; 6528];
        one[17] = 1;
        let r = empirical_ber(&vec![0u8; 6528], &one).unwrap();
        assert!((r.ber() - 1.0 / 6528.0).abs() < 1e-15);

        assert!(matches!(
            empirical_ber(&a, &a[..3]),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn prob_sir_zero_reference_cases() {
        let h1 = vec![Complex64::new(0.5, -0.5); 64];
        assert_eq!(prob_sir_zero(&h1, &h1, 1.0), 1.0);

        let h2: Vec<Complex64> = h1.iter().map(|h| h * 0.1).collect();
        assert_eq!(prob_sir_zero(&h1, &h2, 1.0), 0.0);

        let zeros = vec![Complex64::new(0.0, 0.0); 64];
        assert_eq!(prob_sir_zero(&h1, &zeros, 1.0), 0.0);
    }

    #[test]
    fn prob_sir_zero_matches_rayleigh_oracle() {
        // For i.i.d. Rayleigh links the power ratio is log-logistic:
        // P(|10 log10 R| <= 1) = 2 * 10^0.1/(1 + 10^0.1) - 1.
        let expected = 2.0 * db_to_linear(1.0) / (1.0 + db_to_linear(1.0)) - 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut gauss = || -> f64 { rng.sample(StandardNormal) };
        let n_draws = 5000;
        let mut total = 0.0;
        for _ in 0..n_draws {
            let h1: Vec<Complex64> = (0..64)
                .map(|_| Complex64::new(gauss(), gauss()) / 2f64.sqrt())
                .collect();
            let h2: Vec<Complex64> = (0..64)
                .map(|_| Complex64::new(gauss(), gauss()) / 2f64.sqrt())
                .collect();
            total += prob_sir_zero(&h1, &h2, 1.0);
        }
        let measured = total / n_draws as f64;
        assert!(
            (measured - expected).abs() < 0.02 * expected,
            "measured {measured}, expected {expected}"
        );
    }

    #[test]
    fn prob_sir_zero_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let h1: Vec<Complex64> = (0..64)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let h2: Vec<Complex64> = (0..64)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        assert_eq!(prob_sir_zero(&h1, &h2, 1.0), prob_sir_zero(&h2, &h1, 1.0));
    }

    #[test]
    fn power_penalty_reference_values() {
        assert_eq!(power_penalty(&[0.0, 0.0, 0.0]), 0.0);
        assert!((power_penalty(&[3.0, 3.0]) - 3.0).abs() < 1e-12);
        // Boost on half the frames: 10 log10((1 + 10^0.3)/2).
        let half = power_penalty(&[0.0, 3.0, 0.0, 3.0]);
        let expected = 10.0 * ((1.0 + 10f64.powf(0.3)) / 2.0).log10();
        assert!((half - expected).abs() < 1e-12);
        assert!((half - 1.76).abs() < 0.01);
        assert!((0.0..=3.0).contains(&half));
    }

    #[test]
    fn ber_record_aggregates() {
        let mut rec = BerRecord::default();
        rec.push(FrameRecord { bits: 100, errors: 2, boost_db: 0.0, pr_db: 5.0, feedback_bit: 0 });
        rec.push(FrameRecord { bits: 100, errors: 0, boost_db: 3.0, pr_db: -2.0, feedback_bit: 1 });
        assert_eq!(rec.total_bits(), 200);
        assert_eq!(rec.total_errors(), 2);
        assert!((rec.ber() - 0.01).abs() < 1e-15);
        assert!((rec.boost_fraction() - 0.5).abs() < 1e-15);

        // Merge order does not change aggregates.
        let mut ab = rec.clone();
        ab.merge(&rec);
        assert_eq!(ab.total_errors(), 4);
        assert_eq!(ab.ber(), rec.ber());
    }

    #[test]
    fn effective_gain_identical_curves_is_zero() {
        let curve: Vec<BerCurvePoint> = (-5..=10)
            .map(|s| (s as f64, 10f64.powf(-(s as f64 + 10.0) / 5.0)))
            .collect();
        let g = effective_gain(&curve, &curve, 0.0).unwrap();
        assert!(g.abs() < 1e-12);
    }

    #[test]
    fn effective_gain_constructed_shift() {
        // PC-on curve equals the PC-off curve shifted 5 dB left; with a 1 dB
        // penalty the net gain is 4 dB.
        let off: Vec<BerCurvePoint> = (-5..=10)
            .map(|s| (s as f64, 10f64.powf(-(s as f64 + 10.0) / 5.0)))
            .collect();
        let on: Vec<BerCurvePoint> = (-5..=10)
            .map(|s| (s as f64, 10f64.powf(-(s as f64 + 15.0) / 5.0)))
            .collect();
        let g = effective_gain(&on, &off, 1.0).unwrap();
        assert!((g - 4.0).abs() < 1e-9, "gain {g}");
    }

    #[test]
    fn effective_gain_unmeasurable_without_overlap() {
        let off: Vec<BerCurvePoint> = vec![(-5.0, 1e-1), (0.0, 1e-2), (5.0, 1e-3)];
        let on: Vec<BerCurvePoint> = vec![(-5.0, 1e-5), (0.0, 1e-6), (5.0, 1e-7)];
        assert!(effective_gain(&on, &off, 0.0).is_err());

        let flat_zero: Vec<BerCurvePoint> = vec![(-5.0, 0.0), (0.0, 0.0), (5.0, 0.0)];
        assert!(effective_gain(&flat_zero, &off, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn prob_sir_zero_in_unit_interval(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h1: Vec<Complex64> = (0..64)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let h2: Vec<Complex64> = (0..64)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let p = prob_sir_zero(&h1, &h2, 1.0);
            prop_assert!((0.0..=1.0).contains(&p));
        }

        #[test]
        fn theoretical_ber_dominated_by_extra_interferer(
            sir_db in -10.0f64..30.0, extra_db in -10.0f64..30.0, ebn0_db in 0.0f64..30.0,
        ) {
            let one = theoretical_ber(4, &[db_to_linear(sir_db)], db_to_linear(ebn0_db)).unwrap();
            let two = theoretical_ber(
                4,
                &[db_to_linear(sir_db), db_to_linear(extra_db)],
                db_to_linear(ebn0_db),
            ).unwrap();
            prop_assert!(two >= one);
        }
    }
}
