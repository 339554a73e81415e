//! Linear-power OTDR trace synthesis and the decibel/normalized display pipeline.
//!
//! The backscatter baseline decays at twice the fiber attenuation, drops by the
//! round-trip splitter loss after the feeder, and is shared equally between the
//! `split_ratio` splitter ports. Each reflector adds a Gaussian pulse whose
//! FWHM equals the probe pulse width in samples.

use crate::error::{Error, Result};
use crate::otdr::topology::{FaultScenario, PonTopology};
use crate::otdr::trace::{DisplayMap, OtdrTrace, PeakTruth, TraceScale};

pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Gaussian pulses are cut off beyond this many FWHM from their center.
pub const PEAK_SUPPORT_FWHM: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub pulse_width_ns: f64,
    pub sample_interval_ns: f64,
    /// Carried as metadata; the model has no wavelength dependence.
    pub wavelength_nm: f64,
    pub group_index: f64,
    /// One-way fiber loss.
    pub attenuation_db_per_km: f64,
    /// One-way splitter loss; `None` means `10·log10(split_ratio)`.
    pub splitter_loss_db: Option<f64>,
    /// Reflector peak excess over the local backscatter level.
    pub reflector_return_db: f64,
    pub trace_len: usize,
    /// Display floor, in dB below the launch level.
    pub dynamic_range_db: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            pulse_width_ns: 10.0,
            sample_interval_ns: 2.0,
            wavelength_nm: 1650.0,
            group_index: 1.468,
            attenuation_db_per_km: 0.3,
            splitter_loss_db: None,
            reflector_return_db: 25.0,
            trace_len: 5600,
            dynamic_range_db: 60.0,
        }
    }
}

impl SimConfig {
    /// Meters of fiber per sample (two-way travel).
    pub fn sample_spacing_m(&self) -> f64 {
        SPEED_OF_LIGHT_M_S * self.sample_interval_ns * 1e-9 / (2.0 * self.group_index)
    }

    pub fn fwhm_samples(&self) -> f64 {
        self.pulse_width_ns / self.sample_interval_ns
    }

    /// Half-width of a reflector pulse's support in samples.
    pub fn peak_support(&self) -> f64 {
        PEAK_SUPPORT_FWHM * self.fwhm_samples()
    }

    pub fn splitter_loss_for(&self, topo: &PonTopology) -> f64 {
        self.splitter_loss_db.unwrap_or_else(|| 10.0 * (topo.split_ratio as f64).log10())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pulse_width_ns", self.pulse_width_ns),
            ("sample_interval_ns", self.sample_interval_ns),
            ("wavelength_nm", self.wavelength_nm),
            ("group_index", self.group_index),
            ("attenuation_db_per_km", self.attenuation_db_per_km),
            ("reflector_return_db", self.reflector_return_db),
            ("dynamic_range_db", self.dynamic_range_db),
        ];
        for (key, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(key, format!("must be positive and finite, got {v}")));
            }
        }
        if let Some(l) = self.splitter_loss_db {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::config("splitter_loss_db", format!("must be positive, got {l}")));
            }
        }
        if self.trace_len == 0 {
            return Err(Error::config("trace_len", "must be positive"));
        }
        Ok(())
    }
}

/// Nearest sample to a distance along the fiber.
pub fn distance_to_index(d: f64, cfg: &SimConfig) -> Result<usize> {
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::Degenerate(format!("distance {d} must be finite and >= 0")));
    }
    let idx = (d / cfg.sample_spacing_m()).round() as usize;
    if idx >= cfg.trace_len {
        return Err(Error::OutOfRange { index: idx, len: cfg.trace_len });
    }
    Ok(idx)
}

pub fn index_to_distance(index: usize, cfg: &SimConfig) -> f64 {
    index as f64 * cfg.sample_spacing_m()
}

/// First sample that lies behind the splitter.
pub fn splitter_index(topo: &PonTopology, cfg: &SimConfig) -> Result<usize> {
    distance_to_index(topo.feeder_length_m, cfg)
        .map_err(|_| Error::config("trace_len", "feeder end lies beyond the trace"))
}

fn db_to_lin(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

struct Geometry {
    splitter: usize,
    /// (branch id, end index, alive, reflector amplitude factor or None)
    branches: Vec<(usize, usize, bool, Option<f64>)>,
    ports: f64,
    post_factor: f64,
    alpha_db_per_sample: f64,
    sigma: f64,
    support: f64,
}

impl Geometry {
    fn new(topo: &PonTopology, scen: &FaultScenario, cfg: &SimConfig) -> Result<Self> {
        topo.validate()?;
        scen.validate(topo)?;
        cfg.validate()?;
        let splitter = splitter_index(topo, cfg)?;
        let mut branches = Vec::with_capacity(topo.branches.len());
        let mut last_peak: Option<usize> = None;
        for b in &topo.branches {
            let end = distance_to_index(topo.branch_end_m(b), cfg).map_err(|_| {
                Error::config("trace_len", format!("branch {} end lies beyond the trace", b.branch_id))
            })?;
            let att = scen.attenuation(b.branch_id);
            let alive = att.is_finite();
            let reflector = (b.has_reflector && alive).then(|| db_to_lin(2.0 * att));
            if b.has_reflector {
                if let Some(prev) = last_peak {
                    if end <= prev {
                        return Err(Error::Topology(format!(
                            "reflector of branch {} falls on sample {end}, not after the previous one",
                            b.branch_id
                        )));
                    }
                }
                last_peak = Some(end);
            }
            branches.push((b.branch_id, end, alive, reflector));
        }
        let fwhm = cfg.fwhm_samples();
        Ok(Geometry {
            splitter,
            branches,
            ports: topo.split_ratio as f64,
            post_factor: db_to_lin(2.0 * cfg.splitter_loss_for(topo)) * db_to_lin(2.0 * scen.feeder_extra_loss_db),
            alpha_db_per_sample: 2.0 * cfg.attenuation_db_per_km / 1000.0 * cfg.sample_spacing_m(),
            sigma: fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt()),
            support: PEAK_SUPPORT_FWHM * fwhm,
        })
    }

    /// Backscatter level with every port intact.
    fn nominal(&self, i: usize) -> f64 {
        let decay = db_to_lin(self.alpha_db_per_sample * i as f64);
        if i >= self.splitter {
            decay * self.post_factor
        } else {
            decay
        }
    }

    fn baseline(&self, i: usize) -> f64 {
        if i < self.splitter {
            return self.nominal(i);
        }
        let monitored = self.branches.len() as f64;
        let live = self.branches.iter().filter(|&&(_, end, alive, _)| alive && i <= end).count() as f64;
        self.nominal(i) * (self.ports - monitored + live) / self.ports
    }
}

/// Clean linear-power trace over `[start, start + len)` of the full acquisition.
pub fn synthesize_span(
    topo: &PonTopology,
    scen: &FaultScenario,
    cfg: &SimConfig,
    start: usize,
    len: usize,
) -> Result<OtdrTrace> {
    let geo = Geometry::new(topo, scen, cfg)?;
    if start + len > cfg.trace_len {
        return Err(Error::OutOfRange { index: start + len, len: cfg.trace_len });
    }
    let mut baseline: Vec<f64> = (start..start + len).map(|i| geo.baseline(i)).collect();
    let mut samples = baseline.clone();
    let return_gain = 10f64.powf(cfg.reflector_return_db / 10.0);
    let two_var = 2.0 * geo.sigma * geo.sigma;
    for &(_, center, _, reflector) in &geo.branches {
        let Some(scale) = reflector else { continue };
        let amp = geo.nominal(center) * return_gain * scale;
        let lo = (center as f64 - geo.support).ceil().max(start as f64) as usize;
        let hi = ((center as f64 + geo.support).floor() as usize).min(start + len);
        for i in lo..hi.max(lo) {
            let d = i as f64 - center as f64;
            if d.abs() < geo.support {
                samples[i - start] += amp * (-d * d / two_var).exp();
            }
        }
    }
    let mut ground_truth = Vec::new();
    let mut notes = Vec::new();
    for &(branch_id, center, _, reflector) in &geo.branches {
        if reflector.is_none() {
            continue;
        }
        if center < start || center >= start + len {
            notes.push(format!("peak of branch {branch_id} at index {center} outside synthesized span"));
            continue;
        }
        ground_truth.push(PeakTruth {
            branch_id,
            peak_index: center - start,
            peak_height: samples[center - start],
            baseline: baseline[center - start],
        });
    }
    baseline.clear();
    Ok(OtdrTrace {
        samples,
        sample_interval_ns: cfg.sample_interval_ns,
        start_index: start,
        scale: TraceScale::Linear,
        ground_truth,
        pnr_db: None,
        display: None,
        notes,
    })
}

/// Full-length clean trace in linear power.
pub fn synthesize_clean_trace(topo: &PonTopology, scen: &FaultScenario, cfg: &SimConfig) -> Result<OtdrTrace> {
    synthesize_span(topo, scen, cfg, 0, cfg.trace_len)
}

/// Launch level in dB (value of the first sample of the acquisition).
pub fn launch_level_db(topo: &PonTopology, scen: &FaultScenario, cfg: &SimConfig) -> Result<f64> {
    let first = synthesize_span(topo, scen, cfg, 0, 1)?;
    Ok(10.0 * first.samples[0].log10())
}

/// Convert a linear trace to 10·log10 dB, clipping below `floor_db`.
pub fn to_decibel(trace: &OtdrTrace, floor_db: f64) -> Result<OtdrTrace> {
    if trace.scale != TraceScale::Linear {
        return Err(Error::Degenerate(format!("expected a linear trace, got {:?}", trace.scale)));
    }
    let conv = |v: f64| {
        let db = if v > 0.0 { 10.0 * v.log10() } else { f64::NEG_INFINITY };
        db.max(floor_db)
    };
    Ok(OtdrTrace {
        samples: trace.samples.iter().map(|&v| conv(v)).collect(),
        ground_truth: trace
            .ground_truth
            .iter()
            .map(|p| PeakTruth { peak_height: conv(p.peak_height), baseline: conv(p.baseline), ..*p })
            .collect(),
        scale: TraceScale::Decibel,
        ..trace.clone()
    })
}

/// Decibel display trace of a region, floor-clipped relative to the launch level.
pub fn render_region_db(
    topo: &PonTopology,
    scen: &FaultScenario,
    cfg: &SimConfig,
    start: usize,
    len: usize,
) -> Result<OtdrTrace> {
    let floor = launch_level_db(topo, scen, cfg)? - cfg.dynamic_range_db;
    to_decibel(&synthesize_span(topo, scen, cfg, start, len)?, floor)
}

/// Clean normalized display trace of a region: linear → dB → floor clip → min-max.
pub fn render_region(
    topo: &PonTopology,
    scen: &FaultScenario,
    cfg: &SimConfig,
    start: usize,
    len: usize,
) -> Result<OtdrTrace> {
    render_region_db(topo, scen, cfg, start, len)?.normalized()
}

/// A single reflector's contribution to a normalized region.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakProfile {
    pub branch_id: usize,
    pub peak_index: usize,
    /// Normalized trace minus the same trace rendered without this reflector,
    /// both mapped through the full trace's display map.
    pub excess: Vec<f64>,
}

/// Normalized region plus the isolated contribution of every annotated reflector.
pub fn decompose_peaks(
    topo: &PonTopology,
    scen: &FaultScenario,
    cfg: &SimConfig,
    start: usize,
    len: usize,
) -> Result<(OtdrTrace, Vec<PeakProfile>)> {
    let full_db = render_region_db(topo, scen, cfg, start, len)?;
    let full = full_db.normalized()?;
    let map = full.display.expect("normalized trace carries its map");
    let mut profiles = Vec::with_capacity(full.ground_truth.len());
    for p in &full.ground_truth {
        let mut without = topo.clone();
        without.branches[p.branch_id - 1].has_reflector = false;
        let other = render_region_db(&without, scen, cfg, start, len)?;
        let excess = full_db
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(&a, &b)| map.apply(a) - map.apply(b))
            .collect();
        profiles.push(PeakProfile { branch_id: p.branch_id, peak_index: p.peak_index, excess });
    }
    Ok((full, profiles))
}

/// Normalize a decibel trace with a caller-supplied map (used to compare a
/// trace against a reference rendered under the same display scale).
pub fn normalize_with(trace: &OtdrTrace, map: DisplayMap) -> Result<OtdrTrace> {
    trace.normalized_with(map)
}
