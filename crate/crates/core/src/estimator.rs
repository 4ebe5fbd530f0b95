//! Per-subcarrier least-squares channel estimation from the orthogonal pilot
//! pattern.
//!
//! Each base station's pilots cover every subcarrier exactly twice across the
//! four pilot symbols, on subcarriers the other station leaves silent. The
//! estimate for a subcarrier is the plain average of its (two) ratio-domain
//! observations `y / x`; no frequency smoothing is applied and nothing is
//! carried across frames.

use num_complex::Complex64;

use crate::modem::{BsIndex, PilotPattern, PilotSequence, N_PILOT_SYMBOLS, N_SUBCARRIERS};
use crate::{Error, Result};

/// Per-subcarrier transfer-function estimate for one BS link.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub bs: BsIndex,
    pub h_hat: [Complex64; N_SUBCARRIERS],
}

/// Least-squares estimate of one link from the received pilot rows.
///
/// `rx_pilot_rows` are the four demodulated pilot symbols; `pilot_seq` the
/// transmitted pilot values of `bs`. Every subcarrier must be observed at
/// least once on the station's pattern support, and pilot values on the
/// support must be nonzero.
pub fn estimate_channel(
    rx_pilot_rows: [&[Complex64]; N_PILOT_SYMBOLS],
    pilot_seq: &PilotSequence,
    pattern: &PilotPattern,
    bs: BsIndex,
) -> Result<ChannelEstimate> {
    let mut acc = [Complex64::new(0.0, 0.0); N_SUBCARRIERS];
    let mut count = [0u32; N_SUBCARRIERS];
    for (row, rx) in rx_pilot_rows.iter().enumerate() {
        for &sc in pattern.subcarriers(bs, row) {
            let x = pilot_seq.value(row, sc);
            if x.norm_sqr() == 0.0 {
                return Err(Error::Config(format!(
                    "zero pilot symbol at pilot row {row}, subcarrier {sc}"
                )));
            }
            acc[sc] += rx[sc] / x;
            count[sc] += 1;
        }
    }
    let mut h_hat = [Complex64::new(0.0, 0.0); N_SUBCARRIERS];
    for sc in 0..N_SUBCARRIERS {
        if count[sc] == 0 {
            return Err(Error::Config(format!(
                "pilot pattern leaves subcarrier {sc} unobserved for {bs:?}"
            )));
        }
        h_hat[sc] = acc[sc] / count[sc] as f64;
    }
    Ok(ChannelEstimate { bs, h_hat })
}
