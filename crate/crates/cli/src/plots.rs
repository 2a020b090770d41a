//! Plot-data emission: plain columnar files plus a declarative description
//! of axes and series, consumable by any plotting tool. No rendering.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use entv_core::{Error, Result};

use crate::manifest::Manifest;

#[derive(Debug, Serialize)]
struct PlotSeries {
    column_x: String,
    column_y: String,
    label: String,
    group_by: Option<String>,
}

#[derive(Debug, Serialize)]
struct PlotDescription {
    file: String,
    title: String,
    x_label: String,
    y_label: String,
    series: Vec<PlotSeries>,
}

#[derive(Debug, Serialize)]
pub struct PlotExport {
    pub written: Vec<String>,
    pub skipped: Vec<(String, String)>,
}

fn parse_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::validation(format!("{} is empty", path.display())))?
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|s| s.to_string()).collect())
        .collect();
    Ok((header, rows))
}

fn col(header: &[String], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::validation(format!("column `{name}` missing")))
}

pub fn export_plots(out_dir: &Path) -> Result<PlotExport> {
    let manifest = Manifest::load(out_dir)?
        .ok_or_else(|| Error::validation("no manifest: run the pipeline first"))?;
    let plot_dir = out_dir.join("plots");
    std::fs::create_dir_all(&plot_dir)?;
    let mut written = Vec::new();
    let mut skipped = Vec::new();
    let mut descriptions = Vec::new();

    let stage_done = |name: &str| {
        manifest
            .stages
            .get(name)
            .map(|s| s.completed)
            .unwrap_or(false)
    };

    // Twin separation decay/growth.
    if stage_done("twin") {
        let (header, rows) = parse_csv(&out_dir.join("twin_separations.csv"))?;
        let (ti, gi, li) = (
            col(&header, "time")?,
            col(&header, "sup_grid")?,
            col(&header, "sup_lattice")?,
        );
        let rel = "plots/separation.dat";
        let mut f = std::fs::File::create(out_dir.join(rel))?;
        writeln!(f, "# time log10_sup_grid log10_sup_lattice")?;
        for r in rows {
            let t: f64 = r[ti].parse().unwrap_or(f64::NAN);
            let g: f64 = r[gi].parse().unwrap_or(f64::NAN);
            let l: f64 = r[li].parse().unwrap_or(f64::NAN);
            writeln!(f, "{} {} {}", t, g.max(1e-300).log10(), l.max(1e-300).log10())?;
        }
        written.push(rel.to_string());
        descriptions.push(PlotDescription {
            file: rel.to_string(),
            title: "Twin separation".to_string(),
            x_label: "t".to_string(),
            y_label: "log10 separation".to_string(),
            series: vec![
                PlotSeries {
                    column_x: "time".into(),
                    column_y: "log10_sup_grid".into(),
                    label: "grid sup".into(),
                    group_by: None,
                },
                PlotSeries {
                    column_x: "time".into(),
                    column_y: "log10_sup_lattice".into(),
                    label: "lattice sup".into(),
                    group_by: None,
                },
            ],
        });
    } else {
        skipped.push(("separation.dat".into(), "twin stage not complete".into()));
    }

    // Entropy slopes against radius.
    if stage_done("entropy") {
        let (header, rows) = parse_csv(&out_dir.join("correlation.csv"))?;
        let (ei, ni, ci) = (
            col(&header, "epsilon")?,
            col(&header, "n")?,
            col(&header, "log_C")?,
        );
        let rel = "plots/logc_vs_n.dat";
        let mut f = std::fs::File::create(out_dir.join(rel))?;
        writeln!(f, "# epsilon n log_C")?;
        for r in &rows {
            if r[ci] != "-inf" {
                writeln!(f, "{} {} {}", r[ei], r[ni], r[ci])?;
            }
        }
        written.push(rel.to_string());
        descriptions.push(PlotDescription {
            file: rel.to_string(),
            title: "Correlation decay".to_string(),
            x_label: "window length n".to_string(),
            y_label: "log C".to_string(),
            series: vec![PlotSeries {
                column_x: "n".into(),
                column_y: "log_C".into(),
                label: "log C(eps, n)".into(),
                group_by: Some("epsilon".into()),
            }],
        });

        let report_text = std::fs::read_to_string(out_dir.join("entropy_report.json"))?;
        let report: serde_json::Value = serde_json::from_str(&report_text)
            .map_err(|e| Error::validation(format!("corrupt entropy report: {e}")))?;
        let rel = "plots/k2_slopes.dat";
        let mut f = std::fs::File::create(out_dir.join(rel))?;
        writeln!(f, "# log10_epsilon slope k2")?;
        if let Some(fits) = report.get("fits").and_then(|v| v.as_array()) {
            for fit in fits {
                let eps = fit.get("epsilon").and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
                let slope = fit.get("slope").and_then(|v| v.as_f64());
                let k2 = fit.get("k2").and_then(|v| v.as_f64());
                if let (Some(slope), Some(k2)) = (slope, k2) {
                    writeln!(f, "{} {} {}", eps.log10(), slope, k2)?;
                }
            }
        }
        written.push(rel.to_string());
        descriptions.push(PlotDescription {
            file: rel.to_string(),
            title: "Entropy slope by radius".to_string(),
            x_label: "log10 eps".to_string(),
            y_label: "K2".to_string(),
            series: vec![PlotSeries {
                column_x: "log10_epsilon".into(),
                column_y: "k2".into(),
                label: "K2(eps)".into(),
                group_by: None,
            }],
        });
    } else {
        skipped.push(("logc_vs_n.dat".into(), "entropy stage not complete".into()));
    }

    // Kernel envelope audit.
    if stage_done("verify-kernels") {
        let (header, rows) = parse_csv(&out_dir.join("kernels.csv"))?;
        let (vi, di, pi, ri, gi) = (
            col(&header, "lemma")?,
            col(&header, "d")?,
            col(&header, "p")?,
            col(&header, "ratio")?,
            col(&header, "regime")?,
        );
        // Maximum ratio per (variant, d, p, regime).
        let mut agg: std::collections::BTreeMap<(String, String, String, String), f64> =
            std::collections::BTreeMap::new();
        for r in &rows {
            let key = (r[vi].clone(), r[di].clone(), r[pi].clone(), r[gi].clone());
            let ratio: f64 = r[ri].parse().unwrap_or(f64::NAN);
            let e = agg.entry(key).or_insert(0.0);
            if ratio > *e {
                *e = ratio;
            }
        }
        let rel = "plots/envelope_ratios.dat";
        let mut f = std::fs::File::create(out_dir.join(rel))?;
        writeln!(f, "# variant d p regime max_ratio")?;
        for ((v, d, p, g), ratio) in agg {
            writeln!(f, "{v} {d} {p} {g} {ratio}")?;
        }
        written.push(rel.to_string());
        descriptions.push(PlotDescription {
            file: rel.to_string(),
            title: "Envelope constants".to_string(),
            x_label: "regime".to_string(),
            y_label: "max kernel/envelope ratio".to_string(),
            series: vec![PlotSeries {
                column_x: "regime".into(),
                column_y: "max_ratio".into(),
                label: "empirical constant".into(),
                group_by: Some("variant".into()),
            }],
        });
    } else {
        skipped.push(("envelope_ratios.dat".into(), "verify-kernels stage not complete".into()));
    }

    let desc_rel = PathBuf::from("plots/plots.json");
    let text = serde_json::to_string_pretty(&descriptions)
        .map_err(|e| Error::numerical(format!("plot description: {e}")))?;
    std::fs::write(out_dir.join(&desc_rel), text)?;
    written.push(desc_rel.to_string_lossy().into_owned());
    Ok(PlotExport { written, skipped })
}
