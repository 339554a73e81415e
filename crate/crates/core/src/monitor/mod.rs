//! Reference-trace fault monitoring with the generic window models.

mod reference;
mod report;

use rand::Rng;
use rayon::prelude::*;

pub use reference::{
    build_reference, build_reference_blind, map_position_to_branch, BranchMatch, MonitorConfig, ReferenceEntry,
    ReferenceMap,
};
pub use report::{any_fault, write_reports_csv, write_reports_text, Evidence, FaultReport, Verdict};

use crate::dataset::EventClass;
use crate::error::{Error, Result};
use crate::models::{GenericModelA, GenericModelB};
use crate::otdr::{add_awgn_with, render_region, splitter_index, FaultScenario, OtdrTrace, PonTopology, SimConfig};
use crate::Scalar;

/// Default monitored region length in samples, measured from the splitter.
pub const DEFAULT_REGION_LEN: usize = 280;

/// Clean normalized trace of the monitored region, starting at the splitter.
pub fn render_monitor_region(
    topo: &PonTopology,
    scen: &FaultScenario,
    sim: &SimConfig,
    region_len: usize,
) -> Result<OtdrTrace> {
    render_region(topo, scen, sim, splitter_index(topo, sim)?, region_len)
}

/// Noisy measurement of the monitored region.
pub fn measure<R: Rng + ?Sized>(
    topo: &PonTopology,
    scen: &FaultScenario,
    sim: &SimConfig,
    region_len: usize,
    pnr_db: f64,
    rng: &mut R,
) -> Result<OtdrTrace> {
    add_awgn_with(&render_monitor_region(topo, scen, sim, region_len)?, pnr_db, rng)
}

/// One reflection detected by model A, in absolute samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectedEvent {
    pub position: f64,
    pub level: f64,
    /// Starts of the windows that reported this reflection.
    pub windows: Vec<usize>,
}

fn windows_of<'a>(trace: &'a OtdrTrace, cfg: &MonitorConfig) -> Result<Vec<(usize, &'a [f64])>> {
    let w = cfg.window_len;
    if trace.len() < w {
        return Err(Error::Monitor(format!("trace of {} samples is shorter than one window ({w})", trace.len())));
    }
    Ok((0..=trace.len() - w)
        .step_by(cfg.stride)
        .map(|o| (trace.start_index + o, &trace.samples[o..o + w]))
        .collect())
}

/// Run model A over monitoring windows and merge reflections reported by
/// overlapping windows.
pub fn detect_events<T: Scalar>(
    trace: &OtdrTrace,
    model: &GenericModelA<T>,
    cfg: &MonitorConfig,
) -> Result<Vec<DetectedEvent>> {
    let windows = windows_of(trace, cfg)?;
    let per_window: Vec<Vec<(f64, f64, usize)>> = windows
        .par_iter()
        .map(|&(start, values)| {
            let p = model.predict_reflections(values)?;
            Ok((0..p.count().min(2))
                .map(|k| {
                    let pos = start as f64 + p.positions[k].as_f64() * cfg.window_len as f64;
                    (pos, p.levels[k].as_f64(), start)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut raw: Vec<(f64, f64, usize)> = per_window.into_iter().flatten().collect();
    raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));

    let mut events: Vec<(Vec<f64>, Vec<f64>, Vec<usize>)> = Vec::new();
    for (pos, level, start) in raw {
        match events.last_mut() {
            Some((ps, ls, ws)) if pos - mean(ps) <= cfg.match_tolerance => {
                ps.push(pos);
                ls.push(level);
                ws.push(start);
            }
            _ => events.push((vec![pos], vec![level], vec![start])),
        }
    }
    Ok(events
        .into_iter()
        .map(|(ps, ls, windows)| DetectedEvent { position: mean(&ps), level: mean(&ls), windows })
        .collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub(crate) fn location_m(index: f64, sim: &SimConfig) -> f64 {
    index * sim.sample_spacing_m()
}

/// Branch verdicts from model-A reflection levels against the reference.
pub fn monitor_with_model_a<T: Scalar>(
    trace: &OtdrTrace,
    model: &GenericModelA<T>,
    reference: &ReferenceMap,
    threshold: f64,
    sim: &SimConfig,
) -> Result<Vec<FaultReport>> {
    reference.check_trace(trace)?;
    let cfg = MonitorConfig { threshold, ..reference.config };
    cfg.validate()?;
    let events = detect_events(trace, model, &cfg)?;

    let mut best: Vec<Option<(f64, usize)>> = vec![None; reference.entries.len()];
    let mut unmatched = Vec::new();
    for (k, ev) in events.iter().enumerate() {
        match map_position_to_branch(ev.position, reference, cfg.match_tolerance) {
            Some(m) => {
                let slot = reference.entries.iter().position(|e| e.branch_id == m.branch_id).expect("known branch");
                if best[slot].map_or(true, |(d, _)| m.distance < d) {
                    best[slot] = Some((m.distance, k));
                }
            }
            None => unmatched.push(k),
        }
    }

    let mut reports = Vec::with_capacity(reference.entries.len());
    for (entry, hit) in reference.entries.iter().zip(best) {
        let report = match hit {
            Some((_, k)) => {
                let ev = &events[k];
                let drop = (entry.level - ev.level) / entry.level;
                let verdict = if drop > cfg.threshold { Verdict::Degraded } else { Verdict::Healthy };
                FaultReport {
                    branch_id: entry.branch_id,
                    verdict,
                    measured_level: Some(ev.level),
                    drop,
                    drop_db: drop * reference.span_db,
                    location_index: Some(ev.position),
                    location_m: Some(location_m(ev.position, sim)),
                    evidence: ev
                        .windows
                        .iter()
                        .map(|&w| Evidence {
                            window_start: w,
                            detail: format!("reflection at {:.2} level {:.4}", ev.position, ev.level),
                        })
                        .collect(),
                }
            }
            None => FaultReport {
                branch_id: entry.branch_id,
                verdict: Verdict::Lost,
                measured_level: None,
                drop: 1.0,
                drop_db: reference.span_db,
                location_index: Some(entry.index),
                location_m: Some(entry.distance_m),
                evidence: reference
                    .window_starts()
                    .into_iter()
                    .filter(|&w| entry.index >= w as f64 && entry.index < (w + cfg.window_len) as f64)
                    .map(|w| Evidence { window_start: w, detail: "no reflection near reference".into() })
                    .collect(),
            },
        };
        reports.push(report);
    }
    if !unmatched.is_empty() {
        if let Some(first) = reports.first_mut() {
            for k in unmatched {
                let ev = &events[k];
                first.evidence.push(Evidence {
                    window_start: ev.windows[0],
                    detail: format!("unmatched reflection at {:.2}", ev.position),
                });
            }
        }
    }
    Ok(reports)
}

/// Expected class of a window holding `n` healthy reflections.
pub fn expected_class(n: usize) -> Result<EventClass> {
    match n {
        0 => Ok(EventClass::C6),
        1 => Ok(EventClass::C4),
        2 => Ok(EventClass::C0),
        _ => Err(Error::Monitor(format!("{n} reference reflections in one window"))),
    }
}

/// Verdict and location for the expected reflection `slot` of a window whose
/// expected reflections sit at `expected`, given model B's class and locations.
///
/// Predicted reflections pair with expected ones in order when the counts
/// agree and by nearest location otherwise. An expected reflection left
/// without a partner is lost.
pub fn class_verdict(expected: &[f64], slot: usize, class: EventClass, loc: [f64; 2]) -> (Verdict, f64) {
    let flags = class.faulty_flags();
    let target = expected[slot];
    let mine = if flags.len() == expected.len() {
        Some(slot)
    } else {
        (0..flags.len())
            .filter(|&k| {
                let nearest = (0..expected.len())
                    .min_by(|&a, &b| (loc[k] - expected[a]).abs().total_cmp(&(loc[k] - expected[b]).abs()));
                nearest == Some(slot)
            })
            .min_by(|&a, &b| (loc[a] - target).abs().total_cmp(&(loc[b] - target).abs()))
    };
    match mine {
        None => (Verdict::Lost, target),
        Some(k) if flags[k] => (Verdict::Degraded, loc[k]),
        Some(_) => (Verdict::Healthy, target),
    }
}

/// Branch verdicts from model-B event classes. Each branch is judged in the
/// window where its reference peak sits closest to the center.
pub fn monitor_with_model_b<T: Scalar>(
    trace: &OtdrTrace,
    model: &GenericModelB<T>,
    reference: &ReferenceMap,
    sim: &SimConfig,
) -> Result<Vec<FaultReport>> {
    reference.check_trace(trace)?;
    let cfg = reference.config;
    let mut starts: Vec<usize> = reference.entries.iter().map(|e| e.window_start).collect();
    starts.sort_unstable();
    starts.dedup();

    let predictions: Vec<(usize, EventClass, [f64; 2])> = starts
        .par_iter()
        .map(|&start| {
            let o = start - trace.start_index;
            let values = trace
                .samples
                .get(o..o + cfg.window_len)
                .ok_or(Error::OutOfRange { index: o + cfg.window_len, len: trace.len() })?;
            let p = model.predict_event(values)?;
            let loc = p.locations.map(|l| start as f64 + l.as_f64() * cfg.window_len as f64);
            Ok((start, p.event_class(), loc))
        })
        .collect::<Result<_>>()?;

    let mut reports = Vec::with_capacity(reference.entries.len());
    for entry in &reference.entries {
        let &(start, class, loc) = predictions.iter().find(|p| p.0 == entry.window_start).expect("window predicted");
        let expected: Vec<&ReferenceEntry> = reference.entries_in_window(start);
        let exp_class = expected_class(expected.len())?;
        let slot = expected.iter().position(|e| e.branch_id == entry.branch_id).expect("entry in its window");
        let indices: Vec<f64> = expected.iter().map(|e| e.index).collect();
        let (mut verdict, location) = class_verdict(&indices, slot, class, loc);
        let mut detail = format!("expected {exp_class} predicted {class} at {:.1}, {:.1}", loc[0], loc[1]);
        if verdict == Verdict::Degraded && (location - entry.index).abs() > cfg.match_tolerance {
            verdict = Verdict::Healthy;
            detail.push_str("; fault location outside tolerance, not attributed");
        }
        let location = if verdict == Verdict::Degraded { location } else { entry.index };
        let drop = match verdict {
            Verdict::Lost => 1.0,
            _ => 0.0,
        };
        reports.push(FaultReport {
            branch_id: entry.branch_id,
            verdict,
            measured_level: None,
            drop,
            drop_db: drop * reference.span_db,
            location_index: Some(location),
            location_m: Some(location_m(location, sim)),
            evidence: vec![Evidence { window_start: start, detail }],
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expected_classes() {
        assert_eq!(expected_class(0).unwrap(), EventClass::C6);
        assert_eq!(expected_class(1).unwrap(), EventClass::C4);
        assert_eq!(expected_class(2).unwrap(), EventClass::C0);
        assert!(expected_class(3).is_err());
    }

    #[test]
    fn second_reflection_faulty() {
        let exp = [110.0, 120.0];
        let loc = [110.3, 119.6];
        assert_eq!(class_verdict(&exp, 0, EventClass::C2, loc).0, Verdict::Healthy);
        assert_eq!(class_verdict(&exp, 1, EventClass::C2, loc), (Verdict::Degraded, 119.6));
    }

    #[test]
    fn single_reflection_vanished() {
        assert_eq!(class_verdict(&[40.0], 0, EventClass::C6, [0.0; 2]).0, Verdict::Lost);
    }

    #[test]
    fn one_of_two_vanished() {
        let exp = [110.0, 120.0];
        // Only the first reflection is seen, healthy.
        let loc = [110.2, 0.0];
        assert_eq!(class_verdict(&exp, 0, EventClass::C4, loc).0, Verdict::Healthy);
        assert_eq!(class_verdict(&exp, 1, EventClass::C4, loc).0, Verdict::Lost);
        // Only the second is seen, faulty.
        let loc = [119.8, 0.0];
        assert_eq!(class_verdict(&exp, 0, EventClass::C5, loc).0, Verdict::Lost);
        assert_eq!(class_verdict(&exp, 1, EventClass::C5, loc).0, Verdict::Degraded);
    }

    #[test]
    fn healthy_prediction_matches_expected() {
        for (exp, class) in [(vec![50.0], EventClass::C4), (vec![50.0, 60.0], EventClass::C0)] {
            for slot in 0..exp.len() {
                assert_eq!(class_verdict(&exp, slot, class, [50.0, 60.0]).0, Verdict::Healthy);
            }
        }
    }
}
