use std::fmt;
use std::io::Write;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Healthy,
    Degraded,
    Lost,
}

impl Verdict {
    pub fn is_fault(self) -> bool {
        self != Verdict::Healthy
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Healthy => "healthy",
            Verdict::Degraded => "degraded",
            Verdict::Lost => "lost",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A window prediction that contributed to a verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    pub window_start: usize,
    pub detail: String,
}

/// Diagnosis of one reflector branch.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultReport {
    pub branch_id: usize,
    pub verdict: Verdict,
    pub measured_level: Option<f64>,
    /// Relative level drop against the reference.
    pub drop: f64,
    /// Drop expressed in displayed (round-trip) decibels.
    pub drop_db: f64,
    pub location_index: Option<f64>,
    pub location_m: Option<f64>,
    pub evidence: Vec<Evidence>,
}

pub fn any_fault(reports: &[FaultReport]) -> bool {
    reports.iter().any(|r| r.verdict.is_fault())
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.prec$}"))
}

/// One line per branch: id, verdict, drop in dB, location in meters.
pub fn write_reports_text<W: Write>(reports: &[FaultReport], mut out: W) -> Result<()> {
    for r in reports {
        writeln!(
            out,
            "branch {:>2}  {:<8}  drop {:>6.2} dB  location {} m",
            r.branch_id,
            r.verdict.name(),
            (r.drop_db * 100.0).round() / 100.0 + 0.0,
            opt(r.location_m, 2)
        )?;
        for e in &r.evidence {
            writeln!(out, "    window {}: {}", e.window_start, e.detail)?;
        }
    }
    Ok(())
}

pub fn write_reports_csv<W: Write>(reports: &[FaultReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "branch_id",
        "verdict",
        "measured_level",
        "drop",
        "drop_db",
        "location_index",
        "location_m",
        "evidence",
    ])?;
    for r in reports {
        let evidence: Vec<String> = r.evidence.iter().map(|e| format!("{}:{}", e.window_start, e.detail)).collect();
        w.write_record([
            r.branch_id.to_string(),
            r.verdict.name().to_string(),
            opt(r.measured_level, 6),
            format!("{:.6}", r.drop),
            format!("{:.4}", r.drop_db),
            opt(r.location_index, 3),
            opt(r.location_m, 4),
            evidence.join("; "),
        ])?;
    }
    w.flush()?;
    Ok(())
}
