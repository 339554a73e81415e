use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::GenericModelA;
use crate::otdr::{index_to_distance, OtdrTrace, PonTopology, SimConfig};
use crate::Scalar;

/// Windowing and decision parameters shared by reference building and monitoring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorConfig {
    /// Relative level drop above which a reflection is degraded.
    pub threshold: f64,
    /// Maximum distance in samples between a prediction and a reference peak.
    pub match_tolerance: f64,
    pub window_len: usize,
    pub stride: usize,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig { threshold: 0.2, match_tolerance: 3.0, window_len: 30, stride: 15 }
    }
}

impl MonitorConfig {
    pub fn from_config(cfg: &crate::config::KvConfig) -> Result<Self> {
        let d = MonitorConfig::default();
        let m = MonitorConfig {
            threshold: cfg.get_or("threshold", d.threshold)?,
            match_tolerance: cfg.get_or("match_tolerance", d.match_tolerance)?,
            window_len: cfg.get_or("window_len", d.window_len)?,
            stride: cfg.get_or("monitor_stride", d.stride)?,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config("threshold", format!("{} outside (0, 1)", self.threshold)));
        }
        if !(self.match_tolerance >= 0.0) {
            return Err(Error::config("match_tolerance", "must be non-negative"));
        }
        if self.window_len == 0 || self.stride == 0 {
            return Err(Error::config("window_len", "window length and stride must be positive"));
        }
        Ok(())
    }
}

/// Expected state of one reflector branch.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceEntry {
    pub branch_id: usize,
    /// Absolute peak index.
    pub index: f64,
    pub level: f64,
    /// Absolute start of the monitoring window that judges this branch: the
    /// covering window whose edges stay farthest from every reference peak.
    pub window_start: usize,
    pub distance_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceMap {
    pub entries: Vec<ReferenceEntry>,
    /// Absolute start and length of the monitored region.
    pub region_start: usize,
    pub region_len: usize,
    pub span_db: f64,
    pub config: MonitorConfig,
    pub source_digest: String,
}

/// A branch matched to a position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchMatch {
    pub branch_id: usize,
    pub distance: f64,
    /// Another reference peak also lies within tolerance.
    pub ambiguous: bool,
}

impl ReferenceMap {
    pub fn entry(&self, branch_id: usize) -> Option<&ReferenceEntry> {
        self.entries.iter().find(|e| e.branch_id == branch_id)
    }

    /// Absolute starts of the monitoring windows over the region.
    pub fn window_starts(&self) -> Vec<usize> {
        let w = self.config.window_len;
        if self.region_len < w {
            return Vec::new();
        }
        (0..=self.region_len - w).step_by(self.config.stride).map(|o| self.region_start + o).collect()
    }

    /// Reference entries whose peak lies inside the window starting at `start`.
    pub fn entries_in_window(&self, start: usize) -> Vec<&ReferenceEntry> {
        let end = (start + self.config.window_len) as f64;
        self.entries.iter().filter(|e| e.index >= start as f64 && e.index < end).collect()
    }

    pub(crate) fn check_trace(&self, trace: &OtdrTrace) -> Result<()> {
        if trace.start_index != self.region_start || trace.len() != self.region_len {
            return Err(Error::Monitor(format!(
                "trace covers [{}, {}) but the reference covers [{}, {})",
                trace.start_index,
                trace.start_index + trace.len(),
                self.region_start,
                self.region_start + self.region_len
            )));
        }
        Ok(())
    }
}

/// Nearest reference peak within `tol` samples of `position`.
pub fn map_position_to_branch(position: f64, reference: &ReferenceMap, tol: f64) -> Option<BranchMatch> {
    let mut close: Vec<(f64, usize)> = reference
        .entries
        .iter()
        .map(|e| ((position - e.index).abs(), e.branch_id))
        .filter(|&(d, _)| d <= tol)
        .collect();
    close.sort_by(|a, b| a.0.total_cmp(&b.0));
    close.first().map(|&(distance, branch_id)| BranchMatch { branch_id, distance, ambiguous: close.len() > 1 })
}

fn digest(trace: &OtdrTrace) -> String {
    let mut h = Sha256::new();
    for v in &trace.samples {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn assign_windows(entries: &mut [ReferenceEntry], region_start: usize, region_len: usize, cfg: &MonitorConfig) {
    let w = cfg.window_len;
    let starts: Vec<usize> = (0..=region_len.saturating_sub(w)).step_by(cfg.stride).map(|o| region_start + o).collect();
    let peaks: Vec<f64> = entries.iter().map(|e| e.index).collect();
    let center = (w as f64 - 1.0) / 2.0;
    // Distance from the closest reference peak, inside or outside, to a window edge.
    let margin = |s: usize| {
        let (lo, hi) = (s as f64 - 0.5, (s + w) as f64 - 0.5);
        peaks.iter().map(|&p| (p - lo).abs().min((p - hi).abs())).fold(f64::INFINITY, f64::min)
    };
    for e in entries.iter_mut() {
        let best = starts
            .iter()
            .filter(|&&s| e.index >= s as f64 && e.index < (s + w) as f64)
            .max_by(|&&a, &&b| {
                margin(a).total_cmp(&margin(b)).then_with(|| {
                    let da = (e.index - a as f64 - center).abs();
                    let db = (e.index - b as f64 - center).abs();
                    db.total_cmp(&da)
                })
            });
        e.window_start = best.copied().unwrap_or(region_start);
    }
}

fn finish(
    mut entries: Vec<ReferenceEntry>,
    trace: &OtdrTrace,
    topo: &PonTopology,
    cfg: &MonitorConfig,
) -> Result<ReferenceMap> {
    cfg.validate()?;
    let expected = topo.reflector_count();
    if entries.len() != expected {
        return Err(Error::Monitor(format!(
            "reference trace shows {} reflections, topology has {expected} reflector branches",
            entries.len()
        )));
    }
    if entries.windows(2).any(|w| w[0].index >= w[1].index) {
        return Err(Error::Monitor("reference peaks are not strictly increasing".into()));
    }
    assign_windows(&mut entries, trace.start_index, trace.len(), cfg);
    Ok(ReferenceMap {
        entries,
        region_start: trace.start_index,
        region_len: trace.len(),
        span_db: trace.display.map_or(f64::NAN, |d| d.span_db()),
        config: *cfg,
        source_digest: digest(trace),
    })
}

/// Reference from a clean simulated trace's ground truth.
pub fn build_reference(
    trace: &OtdrTrace,
    topo: &PonTopology,
    sim: &SimConfig,
    cfg: &MonitorConfig,
) -> Result<ReferenceMap> {
    let reflectors: Vec<usize> = topo.branches.iter().filter(|b| b.has_reflector).map(|b| b.branch_id).collect();
    let mut entries = Vec::with_capacity(trace.ground_truth.len());
    for p in &trace.ground_truth {
        if !reflectors.contains(&p.branch_id) {
            return Err(Error::Monitor(format!("peak of unknown branch {}", p.branch_id)));
        }
        let index = trace.start_index + p.peak_index;
        entries.push(ReferenceEntry {
            branch_id: p.branch_id,
            index: index as f64,
            level: p.peak_height,
            window_start: 0,
            distance_m: index_to_distance(index, sim),
        });
    }
    finish(entries, trace, topo, cfg)
}

/// Reference from model-A predictions on a healthy trace; detected peaks
/// are bound to reflector branches in order of distance.
pub fn build_reference_blind<T: Scalar>(
    trace: &OtdrTrace,
    topo: &PonTopology,
    sim: &SimConfig,
    model: &GenericModelA<T>,
    cfg: &MonitorConfig,
) -> Result<ReferenceMap> {
    cfg.validate()?;
    let events = crate::monitor::detect_events(trace, model, cfg)?;
    let ids: Vec<usize> = topo.branches.iter().filter(|b| b.has_reflector).map(|b| b.branch_id).collect();
    if events.len() != ids.len() {
        return Err(Error::Monitor(format!(
            "reference trace shows {} reflections, topology has {} reflector branches",
            events.len(),
            ids.len()
        )));
    }
    let entries = events
        .iter()
        .zip(ids)
        .map(|(ev, branch_id)| ReferenceEntry {
            branch_id,
            index: ev.position,
            level: ev.level,
            window_start: 0,
            distance_m: crate::monitor::location_m(ev.position, sim),
        })
        .collect();
    finish(entries, trace, topo, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::otdr::{distance_to_index, FaultScenario};

    fn setup() -> (PonTopology, SimConfig, OtdrTrace) {
        let topo = PonTopology::default();
        let sim = SimConfig::default();
        let trace = crate::monitor::render_monitor_region(&topo, &FaultScenario::healthy(), &sim, 280).unwrap();
        (topo, sim, trace)
    }

    #[test]
    fn default_topology_reference() {
        let (topo, sim, trace) = setup();
        let r = build_reference(&trace, &topo, &sim, &MonitorConfig::default()).unwrap();
        assert_eq!(r.entries.len(), 8);
        for (e, b) in r.entries.iter().zip(&topo.branches) {
            assert_eq!(e.branch_id, b.branch_id);
            let geo = distance_to_index(topo.branch_end_m(b), &sim).unwrap() as f64;
            assert!((e.index - geo).abs() <= 1.0, "branch {} at {} vs {geo}", b.branch_id, e.index);
            assert!(e.index >= e.window_start as f64 && e.index < (e.window_start + 30) as f64);
        }
        assert!(r.span_db > 0.0);
        assert_eq!(r, build_reference(&trace, &topo, &sim, &MonitorConfig::default()).unwrap());
    }

    #[test]
    fn missing_peak_is_rejected() {
        let (topo, sim, _) = setup();
        let broken = crate::monitor::render_monitor_region(&topo, &FaultScenario::single_break(3), &sim, 280).unwrap();
        assert!(matches!(
            build_reference(&broken, &topo, &sim, &MonitorConfig::default()),
            Err(Error::Monitor(_))
        ));
    }

    #[test]
    fn position_mapping() {
        let (topo, sim, trace) = setup();
        let r = build_reference(&trace, &topo, &sim, &MonitorConfig::default()).unwrap();
        let e = &r.entries[2];
        assert_eq!(map_position_to_branch(e.index, &r, 3.0).unwrap().branch_id, e.branch_id);
        assert_eq!(map_position_to_branch(e.index + 2.0, &r, 3.0).unwrap().branch_id, e.branch_id);
        assert!(map_position_to_branch(r.entries[7].index + 10.0, &r, 3.0).is_none());
    }

    #[test]
    fn ambiguity_is_flagged() {
        let (topo, sim, trace) = setup();
        let r = build_reference(&trace, &topo, &sim, &MonitorConfig::default()).unwrap();
        let (a, b) = (&r.entries[2], &r.entries[3]);
        let m = map_position_to_branch(a.index + 1.0, &r, 10.0).unwrap();
        assert!(m.ambiguous);
        assert_eq!(m.branch_id, a.branch_id);
        assert!(!map_position_to_branch(b.index, &r, 3.0).unwrap().ambiguous);
    }

    #[test]
    fn window_starts_follow_stride() {
        let (topo, sim, trace) = setup();
        let r = build_reference(&trace, &topo, &sim, &MonitorConfig::default()).unwrap();
        let s = r.window_starts();
        assert_eq!(s[0], r.region_start);
        assert!(s.windows(2).all(|w| w[1] - w[0] == 15));
        assert!(*s.last().unwrap() + 30 <= r.region_start + r.region_len);
    }
}
