use std::io::Write;

use rayon::prelude::*;

use crate::dataset::{EventClass, NetworkSample, WindowSample};
use crate::error::{Error, Result};
use crate::models::{BranchClassifier, GenericModelA, GenericModelB};
use crate::Scalar;

/// Signed position error bin edges, in samples.
pub const DEFAULT_POSITION_EDGES: [f64; 13] = [-3.0, -2.5, -2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
/// Signed level error bin edges, in normalized units.
pub const DEFAULT_LEVEL_EDGES: [f64; 11] = [-0.1, -0.08, -0.06, -0.04, -0.02, 0.0, 0.02, 0.04, 0.06, 0.08, 0.1];

/// Counts of true (rows) against predicted (columns) classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let k = labels.len();
        ConfusionMatrix { labels, counts: vec![vec![0; k]; k] }
    }

    pub fn from_pairs(labels: Vec<String>, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut m = Self::new(labels);
        for (t, p) in pairs {
            m.add(t, p)?;
        }
        Ok(m)
    }

    pub fn add(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let k = self.labels.len();
        if truth >= k || predicted >= k {
            return Err(Error::Shape(format!("class pair ({truth}, {predicted}) outside {k} classes")));
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..self.labels.len()).map(|i| self.counts[i][i]).sum();
        diag as f64 / self.total() as f64
    }

    /// Each row divided by its total; empty rows stay zero.
    pub fn row_rates(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let n: u64 = row.iter().sum();
                row.iter().map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 }).collect()
            })
            .collect()
    }

    pub fn row_rate(&self, class: usize) -> f64 {
        self.row_rates()[class][class]
    }

    /// Row-normalized matrix with one header row of predicted labels and one
    /// leading column of true labels.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in self.labels.iter().zip(self.row_rates()) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|r| format!("{r:.4}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_counts_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in self.labels.iter().zip(&self.counts) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Bin counts over fixed edges; values beyond the outer edges land in the
/// first or last bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(edges: &[f64], values: &[f64]) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config("histogram", "edges must be strictly increasing, at least two"));
        }
        let bins = edges.len() - 1;
        let mut counts = vec![0; bins];
        for &v in values {
            let i = edges[1..].partition_point(|&e| e <= v).min(bins - 1);
            counts[i] += 1;
        }
        Ok(Histogram { edges: edges.to_vec(), counts })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_low", "bin_high", "count"])?;
        for (i, c) in self.counts.iter().enumerate() {
            w.write_record([self.edges[i].to_string(), self.edges[i + 1].to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Signed errors (predicted − true) with summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStats {
    pub errors: Vec<f64>,
    pub mae: f64,
    pub rmse: f64,
    pub histogram: Histogram,
}

impl ErrorStats {
    pub fn new(errors: Vec<f64>, edges: &[f64]) -> Result<Self> {
        let n = errors.len().max(1) as f64;
        let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / n;
        let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
        let histogram = Histogram::new(edges, &errors)?;
        Ok(ErrorStats { errors, mae, rmse, histogram })
    }
}

/// Position errors in samples; level errors in normalized units (model A only).
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionReport {
    pub position: ErrorStats,
    pub level: Option<ErrorStats>,
}

pub fn branch_labels(classes: usize) -> Vec<String> {
    let mut v = vec!["Normal".to_string()];
    v.extend((1..classes).map(|i| format!("Faulty branch {i}")));
    v
}

fn nonempty<S>(records: &[&S]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Dataset("evaluation split is empty".into()));
    }
    Ok(())
}

pub fn evaluate_branch<T: Scalar>(model: &BranchClassifier<T>, records: &[&NetworkSample]) -> Result<ConfusionMatrix> {
    nonempty(records)?;
    let preds = records.par_iter().map(|r| Ok((r.label, model.predict(&r.values)?))).collect::<Result<Vec<_>>>()?;
    ConfusionMatrix::from_pairs(branch_labels(model.classes()), preds)
}

fn masked_errors(pred: [f64; 2], truth: [f64; 2], mask: [bool; 2], scale: f64, out: &mut Vec<f64>) {
    for k in 0..2 {
        if mask[k] {
            out.push((pred[k] - truth[k]) * scale);
        }
    }
}

pub fn evaluate_model_a<T: Scalar>(
    model: &GenericModelA<T>,
    records: &[&WindowSample],
    position_edges: &[f64],
    level_edges: &[f64],
) -> Result<(ConfusionMatrix, RegressionReport)> {
    nonempty(records)?;
    let preds = records.par_iter().map(|r| model.predict_reflections(&r.values)).collect::<Result<Vec<_>>>()?;
    let labels = ["no reflection", "one reflection", "two reflections"].map(String::from).to_vec();
    let cm = ConfusionMatrix::from_pairs(labels, records.iter().zip(&preds).map(|(r, p)| (r.type_class(), p.count())))?;
    let n = model.window_len as f64;
    let mut pos = Vec::new();
    let mut lvl = Vec::new();
    for (r, p) in records.iter().zip(&preds) {
        masked_errors(p.positions.map(|v| v.as_f64()), r.positions, r.mask, n, &mut pos);
        masked_errors(p.levels.map(|v| v.as_f64()), r.levels, r.mask, 1.0, &mut lvl);
    }
    Ok((
        cm,
        RegressionReport {
            position: ErrorStats::new(pos, position_edges)?,
            level: Some(ErrorStats::new(lvl, level_edges)?),
        },
    ))
}

pub fn evaluate_model_b<T: Scalar>(
    model: &GenericModelB<T>,
    records: &[&WindowSample],
    position_edges: &[f64],
) -> Result<(ConfusionMatrix, RegressionReport)> {
    nonempty(records)?;
    let preds = records.par_iter().map(|r| model.predict_event(&r.values)).collect::<Result<Vec<_>>>()?;
    let labels = EventClass::ALL.iter().map(|c| c.to_string()).collect();
    let cm = ConfusionMatrix::from_pairs(
        labels,
        records.iter().zip(&preds).map(|(r, p)| (r.event_class.index(), p.event_class().index())),
    )?;
    let n = model.window_len as f64;
    let mut pos = Vec::new();
    for (r, p) in records.iter().zip(&preds) {
        masked_errors(p.locations.map(|v| v.as_f64()), r.positions, r.mask, n, &mut pos);
    }
    Ok((cm, RegressionReport { position: ErrorStats::new(pos, position_edges)?, level: None }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictor() {
        let m = ConfusionMatrix::from_pairs(branch_labels(3), (0..3).flat_map(|c| [(c, c), (c, c)])).unwrap();
        assert_eq!(m.accuracy(), 1.0);
        assert_eq!(m.row_rates(), vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        assert_eq!(m.total(), 6);
        let mut out = Vec::new();
        m.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(1).unwrap().starts_with("Normal,1.0000"));
    }

    #[test]
    fn rates_and_errors() {
        let m = ConfusionMatrix::from_pairs(branch_labels(2), [(0, 0), (0, 1), (1, 1), (1, 1)]).unwrap();
        assert_eq!(m.accuracy(), 0.75);
        assert_eq!(m.row_rate(0), 0.5);
        assert!(m.clone().add(2, 0).is_err());
    }

    #[test]
    fn histogram_bins() {
        let h = Histogram::new(&[-1.0, 0.0, 1.0], &[-5.0, -0.5, 0.0, 0.5, 9.0]).unwrap();
        assert_eq!(h.counts, vec![2, 3]);
        assert!(Histogram::new(&[0.0], &[]).is_err());
        let s = ErrorStats::new(vec![0.0; 4], &DEFAULT_POSITION_EDGES).unwrap();
        assert_eq!((s.mae, s.rmse), (0.0, 0.0));
        let s = ErrorStats::new(vec![3.0, -4.0], &DEFAULT_POSITION_EDGES).unwrap();
        assert_eq!(s.mae, 3.5);
        assert!((s.rmse - 12.5f64.sqrt()).abs() < 1e-12);
    }
}
