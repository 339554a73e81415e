use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::otdr::trace::{OtdrTrace, TraceScale};
use crate::rng::stream_rng;

/// Noise standard deviation for a peak height and a PNR in dB (10·log10 convention).
pub fn noise_sigma(peak_height: f64, pnr_db: f64) -> f64 {
    peak_height / 10f64.powf(pnr_db / 10.0)
}

/// Add white Gaussian noise calibrated to the tallest annotated peak.
pub fn add_awgn(trace: &OtdrTrace, pnr_db: f64, seed: u64) -> Result<OtdrTrace> {
    add_awgn_with(trace, pnr_db, &mut stream_rng(seed, 0))
}

pub fn add_awgn_with<R: Rng + ?Sized>(trace: &OtdrTrace, pnr_db: f64, rng: &mut R) -> Result<OtdrTrace> {
    if trace.scale != TraceScale::Normalized {
        return Err(Error::Degenerate(format!("noise is added to normalized traces, got {:?}", trace.scale)));
    }
    if !pnr_db.is_finite() {
        return Err(Error::Degenerate(format!("PNR {pnr_db} dB is not finite")));
    }
    let mut notes = trace.notes.clone();
    let h_max = match trace.tallest_peak_excess() {
        Some(h) if h > 0.0 => h,
        _ => {
            notes.push("no annotated peak; noise calibrated to the trace maximum".into());
            trace.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        }
    };
    let sigma = noise_sigma(h_max, pnr_db);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Degenerate(format!("noise sigma {sigma}: {e}")))?;
    let samples = trace.samples.iter().map(|&v| v + normal.sample(rng)).collect();
    Ok(OtdrTrace { samples, pnr_db: Some(pnr_db), notes, ..trace.clone() })
}

/// Add noise of a fixed standard deviation in place.
pub fn add_noise_in_place<R: Rng + ?Sized>(values: &mut [f64], sigma: f64, rng: &mut R) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    for v in values {
        *v += normal.sample(rng);
    }
}
