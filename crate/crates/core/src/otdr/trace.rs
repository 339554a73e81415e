use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceScale {
    /// Linear backscatter power relative to the launch level.
    Linear,
    /// 10·log10 display trace, floor-clipped.
    Decibel,
    /// Min-max normalized display trace.
    Normalized,
}

/// Ground-truth annotation of one reflector peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakTruth {
    pub branch_id: usize,
    /// Peak center, relative to the first sample of the trace it belongs to.
    pub peak_index: usize,
    /// Trace value at the peak center, in the trace's scale.
    pub peak_height: f64,
    /// Value of the peak-free backscatter baseline at the peak center.
    pub baseline: f64,
}

impl PeakTruth {
    pub fn excess(&self) -> f64 {
        self.peak_height - self.baseline
    }
}

/// Affine map used to normalize a decibel trace: `v = (db - min_db) / (max_db - min_db)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplayMap {
    pub min_db: f64,
    pub max_db: f64,
}

impl DisplayMap {
    pub fn span_db(&self) -> f64 {
        self.max_db - self.min_db
    }

    pub fn apply(&self, db: f64) -> f64 {
        (db - self.min_db) / self.span_db()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OtdrTrace {
    pub samples: Vec<f64>,
    pub sample_interval_ns: f64,
    /// Absolute index of `samples[0]` within the full acquisition.
    pub start_index: usize,
    pub scale: TraceScale,
    pub ground_truth: Vec<PeakTruth>,
    /// Peak-to-noise ratio of the injected noise; `None` for a clean trace.
    pub pnr_db: Option<f64>,
    pub display: Option<DisplayMap>,
    pub notes: Vec<String>,
}

impl OtdrTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_clean(&self) -> bool {
        self.pnr_db.is_none()
    }

    /// Largest peak excess over its local baseline, if any peak is annotated.
    pub fn tallest_peak_excess(&self) -> Option<f64> {
        self.ground_truth.iter().map(PeakTruth::excess).fold(None, |acc, e| match acc {
            Some(m) if m >= e => Some(m),
            _ => Some(e),
        })
    }

    pub fn peak_for_branch(&self, branch_id: usize) -> Option<&PeakTruth> {
        self.ground_truth.iter().find(|p| p.branch_id == branch_id)
    }

    /// Contiguous sub-trace `[start, start + len)` with annotations re-based.
    ///
    /// Peaks whose center falls outside the region are dropped and noted.
    pub fn extract_region(&self, start: usize, len: usize) -> Result<OtdrTrace> {
        let end = start.checked_add(len).ok_or(Error::OutOfRange { index: usize::MAX, len: self.len() })?;
        if end > self.len() {
            return Err(Error::OutOfRange { index: end, len: self.len() });
        }
        let mut notes = self.notes.clone();
        let mut ground_truth = Vec::new();
        for p in &self.ground_truth {
            if p.peak_index >= start && p.peak_index < end {
                ground_truth.push(PeakTruth { peak_index: p.peak_index - start, ..*p });
            } else {
                notes.push(format!(
                    "peak of branch {} at index {} outside region [{start}, {end}); dropped",
                    p.branch_id, p.peak_index
                ));
            }
        }
        Ok(OtdrTrace {
            samples: self.samples[start..end].to_vec(),
            start_index: self.start_index + start,
            ground_truth,
            notes,
            ..self.clone_meta()
        })
    }

    fn clone_meta(&self) -> OtdrTrace {
        OtdrTrace {
            samples: Vec::new(),
            sample_interval_ns: self.sample_interval_ns,
            start_index: self.start_index,
            scale: self.scale,
            ground_truth: Vec::new(),
            pnr_db: self.pnr_db,
            display: self.display,
            notes: Vec::new(),
        }
    }

    /// Min-max normalize a decibel trace onto [0, 1], carrying the annotations along.
    pub fn normalized(&self) -> Result<OtdrTrace> {
        let (min, max) = min_max(&self.samples)?;
        self.normalized_with(DisplayMap { min_db: min, max_db: max })
    }

    /// Normalize with an externally chosen map (e.g. the map of a sibling trace).
    pub fn normalized_with(&self, map: DisplayMap) -> Result<OtdrTrace> {
        if self.scale != TraceScale::Decibel {
            return Err(Error::Degenerate(format!("normalization expects a decibel trace, got {:?}", self.scale)));
        }
        if !(map.span_db() > 0.0) {
            return Err(Error::Degenerate("normalization span is zero".into()));
        }
        Ok(OtdrTrace {
            samples: self.samples.iter().map(|&v| map.apply(v)).collect(),
            ground_truth: self
                .ground_truth
                .iter()
                .map(|p| PeakTruth { peak_height: map.apply(p.peak_height), baseline: map.apply(p.baseline), ..*p })
                .collect(),
            scale: TraceScale::Normalized,
            display: Some(map),
            notes: self.notes.clone(),
            ..self.clone_meta()
        })
    }

    /// Two-column CSV (`index,value`), indices absolute.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "value"])?;
        for (i, v) in self.samples.iter().enumerate() {
            w.write_record([(self.start_index + i).to_string(), format!("{v:.9}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl OtdrTrace {
    /// Read a normalized trace written by [`OtdrTrace::write_csv`]; lines
    /// starting with `#` are skipped. Indices must be consecutive.
    pub fn read_csv<R: std::io::Read>(input: R, sample_interval_ns: f64) -> Result<OtdrTrace> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let mut start = None;
        let mut samples = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |k: usize| rec.get(k).ok_or_else(|| Error::format("trace csv", format!("row {row}: missing column")));
            let index: usize =
                field(0)?.trim().parse().map_err(|e| Error::format("trace csv", format!("row {row}: {e}")))?;
            let value: f64 =
                field(1)?.trim().parse().map_err(|e| Error::format("trace csv", format!("row {row}: {e}")))?;
            let first = *start.get_or_insert(index);
            if index != first + samples.len() {
                return Err(Error::format("trace csv", format!("row {row}: index {index} is not consecutive")));
            }
            if !value.is_finite() {
                return Err(Error::NonFinite("trace sample".into()));
            }
            samples.push(value);
        }
        let start_index = start.ok_or_else(|| Error::format("trace csv", "no samples"))?;
        Ok(OtdrTrace {
            samples,
            sample_interval_ns,
            start_index,
            scale: TraceScale::Normalized,
            ground_truth: Vec::new(),
            pnr_db: None,
            display: None,
            notes: Vec::new(),
        })
    }
}

pub(crate) fn min_max(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Degenerate("empty input".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        if !v.is_finite() {
            return Err(Error::NonFinite("trace sample".into()));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi <= lo {
        return Err(Error::Degenerate(format!("constant input ({lo})")));
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> OtdrTrace {
        OtdrTrace {
            samples: (0..10).map(|i| i as f64).collect(),
            sample_interval_ns: 2.0,
            start_index: 100,
            scale: TraceScale::Decibel,
            ground_truth: vec![
                PeakTruth { branch_id: 1, peak_index: 2, peak_height: 2.0, baseline: 0.0 },
                PeakTruth { branch_id: 2, peak_index: 7, peak_height: 7.0, baseline: 1.0 },
            ],
            pnr_db: None,
            display: None,
            notes: Vec::new(),
        }
    }

    #[test]
    fn identity_slice() {
        let t = toy();
        assert_eq!(t.extract_region(0, t.len()).unwrap(), t);
    }

    #[test]
    fn region_rebases_and_drops() {
        let r = toy().extract_region(5, 5).unwrap();
        assert_eq!(r.start_index, 105);
        assert_eq!(r.ground_truth.len(), 1);
        assert_eq!(r.ground_truth[0].peak_index, 2);
        assert_eq!(r.notes.len(), 1);
        assert!(toy().extract_region(6, 5).is_err());
    }

    #[test]
    fn normalization_maps_annotations() {
        let n = toy().normalized().unwrap();
        assert_eq!(n.samples[0], 0.0);
        assert_eq!(n.samples[9], 1.0);
        assert!((n.ground_truth[1].peak_height - 7.0 / 9.0).abs() < 1e-15);
        assert_eq!(n.display.unwrap().span_db(), 9.0);
        assert!(n.normalized().is_err(), "normalized trace is not a decibel trace");
    }

    #[test]
    fn csv_round_trip() {
        let t = toy().extract_region(1, 3).unwrap();
        let mut out = b"# header\n".to_vec();
        t.write_csv(&mut out).unwrap();
        let back = OtdrTrace::read_csv(out.as_slice(), t.sample_interval_ns).unwrap();
        assert_eq!(back.start_index, t.start_index);
        assert_eq!(back.samples, t.samples);
        assert!(OtdrTrace::read_csv("index,value\n3,0.1\n5,0.2\n".as_bytes(), 1.0).is_err());
    }

    #[test]
    fn csv_has_absolute_indices() {
        let mut buf = Vec::new();
        toy().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("index,value\n100,0.000000000\n"));
    }
}
