use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::comparison_label;
use super::run::{RstaResult, RunResult, Sample};
use super::HarnessError;
use crate::solver::{percentile_report, DEFAULT_PERCENTILES};

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    rsta_label: String,
    repetition: usize,
    aoa_error_deg: f64,
    position_error_cm: f64,
    distance_error_cm: f64,
    los_likelihood: f64,
}

pub fn write_csv<W: std::io::Write>(result: &RunResult, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    // Written explicitly so an empty result still gets its header.
    w.write_record([
        "rsta_label",
        "repetition",
        "aoa_error_deg",
        "position_error_cm",
        "distance_error_cm",
        "los_likelihood",
    ])?;
    for r in &result.per_rsta {
        for (repetition, s) in r.samples.iter().enumerate() {
            w.write_record(&[
                r.label.clone(),
                repetition.to_string(),
                s.aoa_error_deg.to_string(),
                s.position_error_cm.to_string(),
                s.distance_error_cm.to_string(),
                s.los_likelihood.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(result: &RunResult, path: &Path) -> Result<(), HarnessError> {
    write_csv(result, std::fs::File::create(path)?)
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<RunResult, HarnessError> {
    let mut result = RunResult::default();
    for row in csv::Reader::from_reader(input).deserialize() {
        let row: Row = row?;
        if result.per_rsta.last().map(|r| &r.label) != Some(&row.rsta_label) {
            result.per_rsta.push(RstaResult {
                label: row.rsta_label.clone(),
                samples: Vec::new(),
            });
        }
        let last = result.per_rsta.last_mut().expect("pushed above");
        if row.repetition != last.samples.len() {
            return Err(HarnessError::Csv(format!(
                "{}: repetition {} out of order",
                row.rsta_label, row.repetition
            )));
        }
        last.samples.push(Sample {
            aoa_error_deg: row.aoa_error_deg,
            position_error_cm: row.position_error_cm,
            distance_error_cm: row.distance_error_cm,
            los_likelihood: row.los_likelihood,
        });
    }
    Ok(result)
}

pub fn parse_csv(path: &Path) -> Result<RunResult, HarnessError> {
    read_csv(std::fs::File::open(path)?)
}

/// Percentiles (25/50/75/100) of position error per RSTA.
pub fn summary_table(result: &RunResult) -> Result<String, HarnessError> {
    let mut out = String::new();
    writeln!(
        out,
        "{:<12} {:>8} {:>8} {:>8} {:>8} {:>10} {:>8}",
        "rsta", "p25_cm", "p50_cm", "p75_cm", "max_cm", "aoa_p50", "los_p"
    )
    .expect("writing to a String");
    for r in &result.per_rsta {
        let pos: Vec<f64> = r.samples.iter().map(|s| s.position_error_cm).collect();
        let aoa: Vec<f64> = r.samples.iter().map(|s| s.aoa_error_deg).collect();
        let p = percentile_report(&pos, &DEFAULT_PERCENTILES)?;
        let a = percentile_report(&aoa, &[50.0])?;
        let los = r.samples.iter().map(|s| s.los_likelihood).sum::<f64>() / r.samples.len() as f64;
        writeln!(
            out,
            "{:<12} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>10.3} {:>8.3}",
            r.label, p[0], p[1], p[2], p[3], a[0], los
        )
        .expect("writing to a String");
    }
    Ok(out)
}

/// Published percentile rows (25/50/75/100, cm) for each comparison
/// distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baseline {
    pub distance_m: f64,
    pub technology: &'static str,
    pub percentiles_cm: [f64; 4],
}

pub const BASELINES: [Baseline; 5] = [
    Baseline {
        distance_m: 7.0,
        technology: "3GPP Sub-6 GHz",
        percentiles_cm: [2.00, 8.25, 15.50, 30.00],
    },
    Baseline {
        distance_m: 7.07,
        technology: "Bluetooth 5.1",
        percentiles_cm: [30.00, 37.50, 46.50, 80.00],
    },
    Baseline {
        distance_m: 9.0,
        technology: "3GPP Sub-6 GHz",
        percentiles_cm: [3.00, 8.00, 16.00, 56.00],
    },
    Baseline {
        distance_m: 11.2,
        technology: "3GPP mmWave",
        percentiles_cm: [6.50, 7.80, 15.00, 80.00],
    },
    Baseline {
        distance_m: 14.2,
        technology: "3GPP mmWave",
        percentiles_cm: [7.50, 10.50, 18.75, 85.50],
    },
];

/// Measured 802.11az reference at the same distances.
pub const MEASURED_80211AZ: [Baseline; 5] = [
    Baseline {
        distance_m: 7.0,
        technology: "802.11az (measured)",
        percentiles_cm: [1.76, 3.13, 5.02, 33.15],
    },
    Baseline {
        distance_m: 7.07,
        technology: "802.11az (measured)",
        percentiles_cm: [4.99, 5.85, 11.46, 36.49],
    },
    Baseline {
        distance_m: 9.0,
        technology: "802.11az (measured)",
        percentiles_cm: [6.19, 7.72, 15.65, 33.67],
    },
    Baseline {
        distance_m: 11.2,
        technology: "802.11az (measured)",
        percentiles_cm: [5.67, 7.91, 20.35, 52.75],
    },
    Baseline {
        distance_m: 14.2,
        technology: "802.11az (measured)",
        percentiles_cm: [4.39, 9.78, 22.34, 56.30],
    },
];

fn row(out: &mut String, distance: f64, tech: &str, p: &[f64]) {
    writeln!(
        out,
        "{:<8} {:<22} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
        format!("{distance}"),
        tech,
        p[0],
        p[1],
        p[2],
        p[3]
    )
    .expect("writing to a String");
}

/// Position error percentiles of the simulated runs next to the stored
/// references. `results` pairs each comparison distance with its run.
pub fn compare_report(results: &[(f64, RunResult)]) -> Result<String, HarnessError> {
    let mut out = String::new();
    writeln!(
        out,
        "{:<8} {:<22} {:>8} {:>8} {:>8} {:>8}",
        "dist_m", "technology", "p25_cm", "p50_cm", "p75_cm", "p100_cm"
    )
    .expect("writing to a String");
    for (baseline, measured) in BASELINES.iter().zip(&MEASURED_80211AZ) {
        let d = baseline.distance_m;
        let errors = results
            .iter()
            .find(|(rd, _)| *rd == d)
            .and_then(|(_, r)| r.position_errors_cm(&comparison_label(d)))
            .filter(|e| !e.is_empty())
            .ok_or(HarnessError::MissingScenario(d))?;
        let simulated = percentile_report(&errors, &DEFAULT_PERCENTILES)?;
        row(&mut out, d, baseline.technology, &baseline.percentiles_cm);
        row(&mut out, d, measured.technology, &measured.percentiles_cm);
        row(&mut out, d, "802.11az (simulated)", &simulated);
    }
    Ok(out)
}
