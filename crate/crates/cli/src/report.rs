//! Summary tables over campaign CSVs and the perturbation histogram.

use std::fmt::Write as _;
use std::path::Path;

use crate::campaign::CampaignSummary;
use crate::formats::{FormatError, NoiseFile, QueryKind};

pub const SUMMARY_HEADER: &str = "campaign,images,successes,failures_at_budget,success_rate,\
avg_queries_successes,median_queries_successes,avg_queries_on_reference_success,query_kind";

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

fn kind(k: QueryKind) -> &'static str {
    match k {
        QueryKind::Oracle => "oracle",
        QueryKind::Gradient => "gradient-steps",
    }
}

pub fn summary_csv(rows: &[CampaignSummary]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for s in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.name,
            s.images,
            s.successes,
            s.failures,
            s.success_rate,
            opt(s.avg_queries),
            opt(s.median_queries),
            opt(s.avg_queries_on_reference_success),
            kind(s.query_kind)
        )
        .expect("writing to a string");
    }
    out
}

/// Aligned plain-text table for terminals.
pub fn summary_table(rows: &[CampaignSummary]) -> String {
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.1}"));
    let mut lines = vec![[
        "campaign".to_string(),
        "images".into(),
        "success".into(),
        "fail@budget".into(),
        "avg q".into(),
        "med q".into(),
        "avg q (ref ok)".into(),
        "queries".into(),
    ]];
    for s in rows {
        lines.push([
            s.name.clone(),
            s.images.to_string(),
            format!("{:.1}%", 100.0 * s.success_rate),
            s.failures.to_string(),
            fmt(s.avg_queries),
            fmt(s.median_queries),
            fmt(s.avg_queries_on_reference_success),
            kind(s.query_kind).into(),
        ]);
    }
    let widths: Vec<usize> = (0..8)
        .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::from("# query statistics are over successful images only\n");
    for l in &lines {
        let cells: Vec<String> = l
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (v, w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect();
        writeln!(out, "{}", cells.join("  ").trim_end()).expect("writing to a string");
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    /// Bounds in units of ε.
    pub lo: f64,
    pub hi: f64,
    pub vertex: bool,
    pub count: u64,
}

/// Distribution of `δ / ε` over every coordinate: one bin for each vertex
/// value `±1` (within `tol`) and `interior` equal bins in between.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseHistogram {
    pub epsilon: f64,
    pub bins: Vec<HistogramBin>,
    pub total: u64,
}

impl NoiseHistogram {
    pub fn vertex_fraction(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.bins.iter().filter(|b| b.vertex).map(|b| b.count).sum::<u64>() as f64 / self.total as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,lo,hi,count,fraction\n");
        for b in &self.bins {
            let frac = if self.total == 0 {
                0.0
            } else {
                b.count as f64 / self.total as f64
            };
            writeln!(
                out,
                "{},{},{},{},{}",
                if b.vertex { "vertex" } else { "interior" },
                b.lo,
                b.hi,
                b.count,
                frac
            )
            .expect("writing to a string");
        }
        out
    }
}

pub fn noise_histogram(noise: &NoiseFile, interior: usize, tol: f64) -> NoiseHistogram {
    let interior = interior.max(1);
    let mut bins = vec![HistogramBin {
        lo: -1.0,
        hi: -1.0,
        vertex: true,
        count: 0,
    }];
    for i in 0..interior {
        let w = 2.0 / interior as f64;
        bins.push(HistogramBin {
            lo: -1.0 + i as f64 * w,
            hi: -1.0 + (i + 1) as f64 * w,
            vertex: false,
            count: 0,
        });
    }
    bins.push(HistogramBin {
        lo: 1.0,
        hi: 1.0,
        vertex: true,
        count: 0,
    });
    let eps = noise.epsilon;
    let mut total = 0;
    for (_, delta) in &noise.rows {
        for &d in delta {
            total += 1;
            let slot = if (d + eps).abs() <= tol {
                0
            } else if (d - eps).abs() <= tol {
                interior + 1
            } else {
                let u = ((d / eps + 1.0) / 2.0).clamp(0.0, 1.0);
                1 + ((u * interior as f64) as usize).min(interior - 1)
            };
            bins[slot].count += 1;
        }
    }
    NoiseHistogram {
        epsilon: eps,
        bins,
        total,
    }
}

/// Campaign name for a CSV path: the parent directory for the canonical
/// `per_image.csv`, the file stem otherwise.
pub fn campaign_name(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if stem == "per_image" {
        if let Some(dir) = path.parent().and_then(|p| p.file_name()) {
            return dir.to_string_lossy().into_owned();
        }
    }
    stem
}

pub fn load_histogram(path: &Path, interior: usize) -> Result<NoiseHistogram, FormatError> {
    let noise = crate::formats::read_noise(path)?;
    let tol = 1e-9 * noise.epsilon.max(1.0);
    Ok(noise_histogram(&noise, interior, tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_bins() {
        let noise = NoiseFile {
            epsilon: 0.5,
            rows: vec![(0, vec![0.5, -0.5, 0.0, 0.49, -0.2]), (1, vec![0.5])],
        };
        let h = noise_histogram(&noise, 4, 1e-12);
        let counts: Vec<u64> = h.bins.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![1, 0, 1, 1, 1, 2]);
        assert_eq!(h.total, 6);
        assert!((h.vertex_fraction() - 0.5).abs() < 1e-12);
        assert!(h.to_csv().starts_with("kind,lo,hi,count,fraction\nvertex,-1,-1,1,"));
    }

    #[test]
    fn names() {
        assert_eq!(campaign_name(Path::new("out/lazy/per_image.csv")), "lazy");
        assert_eq!(campaign_name(Path::new("pgd.csv")), "pgd");
    }

    #[test]
    fn table_flags_successes_only() {
        let s = CampaignSummary {
            name: "a".into(),
            images: 2,
            successes: 1,
            failures: 1,
            success_rate: 0.5,
            avg_queries: Some(3.0),
            median_queries: Some(3.0),
            avg_queries_on_reference_success: None,
            query_kind: QueryKind::Oracle,
        };
        let t = summary_table(std::slice::from_ref(&s));
        assert!(t.starts_with("# query statistics are over successful images only"));
        assert!(t.contains("50.0%"));
        let csv = summary_csv(&[s]);
        assert_eq!(csv.lines().nth(1).unwrap(), "a,2,1,1,0.5,3,3,,oracle");
    }
}
