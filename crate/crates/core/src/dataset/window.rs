use crate::dataset::{EventClass, WindowSample};
use crate::error::{Error, Result};
use crate::otdr::OtdrTrace;

/// A reflection is faulty when its height falls below
/// `faulty_level_threshold × reference height`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultinessRule {
    pub faulty_level_threshold: f64,
}

impl Default for FaultinessRule {
    fn default() -> Self {
        FaultinessRule { faulty_level_threshold: 0.8 }
    }
}

impl FaultinessRule {
    pub fn new(faulty_level_threshold: f64) -> Result<Self> {
        if !(faulty_level_threshold > 0.0 && faulty_level_threshold < 1.0) {
            return Err(Error::config("faulty_level_threshold", format!("{faulty_level_threshold} is not in (0, 1)")));
        }
        Ok(FaultinessRule { faulty_level_threshold })
    }

    pub fn is_faulty(&self, level: f64, reference_level: f64) -> bool {
        level < self.faulty_level_threshold * reference_level
    }
}

/// Unlabeled window cut from a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowShell {
    /// Absolute index of the first sample.
    pub start: usize,
    pub values: Vec<f64>,
}

/// Ground truth for one reflection, in absolute sample indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowPeak {
    pub branch_id: usize,
    pub index: usize,
    /// Clean normalized height in the measured trace.
    pub level: f64,
    /// Clean normalized height of the same reflection in the healthy trace.
    pub reference_level: f64,
}

/// Cut fixed-length windows starting at absolute index `start`; an incomplete
/// tail is dropped.
pub fn window_trace(trace: &OtdrTrace, window_len: usize, stride: usize, start: usize) -> Result<Vec<WindowShell>> {
    if window_len == 0 || stride == 0 {
        return Err(Error::config("window_len", "window length and stride must be positive"));
    }
    let first = start
        .checked_sub(trace.start_index)
        .ok_or(Error::OutOfRange { index: start, len: trace.start_index + trace.len() })?;
    if first + window_len > trace.len() {
        return Err(Error::Dataset(format!(
            "trace of {} samples from index {start} is shorter than one {window_len}-sample window",
            trace.len().saturating_sub(first)
        )));
    }
    Ok((first..=trace.len() - window_len)
        .step_by(stride)
        .map(|o| WindowShell { start: trace.start_index + o, values: trace.samples[o..o + window_len].to_vec() })
        .collect())
}

/// Label a window from the reflections whose centers fall inside it.
/// Windows holding three or more reflections are rejected with an error.
pub fn label_window(
    shell: &WindowShell,
    peaks: &[WindowPeak],
    rule: &FaultinessRule,
    pnr_db: f64,
) -> Result<WindowSample> {
    let n = shell.values.len();
    let mut inside: Vec<&WindowPeak> =
        peaks.iter().filter(|p| p.index >= shell.start && p.index < shell.start + n).collect();
    inside.sort_by_key(|p| p.index);
    if inside.len() > 2 {
        return Err(Error::Dataset(format!("window at {} holds {} reflections", shell.start, inside.len())));
    }
    let flags: Vec<bool> = inside.iter().map(|p| rule.is_faulty(p.level, p.reference_level)).collect();
    let mut positions = [0.0; 2];
    let mut levels = [0.0; 2];
    let mut mask = [false; 2];
    for (k, p) in inside.iter().enumerate() {
        positions[k] = (p.index - shell.start) as f64 / n as f64;
        levels[k] = p.level;
        mask[k] = true;
    }
    Ok(WindowSample {
        values: shell.values.clone(),
        event_class: EventClass::from_faulty_flags(&flags)?,
        positions,
        levels,
        mask,
        pnr_db,
        start: shell.start,
    })
}
