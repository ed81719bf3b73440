//! Improvement of a proposed simulation over an existing one against ground truth:
//! `(E_existing - E_proposed) / E_existing * 100` with `E = |SR - GT|`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::CoverageError;

/// One fixture row: `site,quantity,measured,existing_6m,existing_4m,proposed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRow {
    pub site: String,
    pub quantity: String,
    pub measured: Option<f64>,
    pub existing_6m: Option<f64>,
    pub existing_4m: Option<f64>,
    pub proposed: Option<f64>,
}

/// One simulated output: `site,quantity,value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedValue {
    pub site: String,
    pub quantity: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    #[serde(rename = "existing_6m")]
    Existing6m,
    #[serde(rename = "existing_4m")]
    Existing4m,
}

impl Baseline {
    pub fn as_str(&self) -> &'static str {
        match self {
            Baseline::Existing6m => "existing_6m",
            Baseline::Existing4m => "existing_4m",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub site: String,
    pub quantity: String,
    pub baseline: Baseline,
    pub ground_truth: f64,
    pub sr_existing: f64,
    pub sr_proposed: f64,
    pub e_existing: f64,
    pub e_proposed: f64,
    /// Undefined when the existing simulation already matches ground truth.
    pub improvement_pct: Option<f64>,
}

pub fn improvement_metric(
    site: &str,
    quantity: &str,
    baseline: Baseline,
    ground_truth: Option<f64>,
    sr_existing: f64,
    sr_proposed: f64,
) -> Result<ComparisonRecord, CoverageError> {
    let gt = ground_truth
        .filter(|v| v.is_finite())
        .ok_or_else(|| CoverageError::Comparison(format!("{site}/{quantity}: ground truth missing")))?;
    let e_existing = (sr_existing - gt).abs();
    let e_proposed = (sr_proposed - gt).abs();
    let improvement_pct = (e_existing > 0.0).then(|| (e_existing - e_proposed) / e_existing * 100.0);
    Ok(ComparisonRecord {
        site: site.to_string(),
        quantity: quantity.to_string(),
        baseline,
        ground_truth: gt,
        sr_existing,
        sr_proposed,
        e_existing,
        e_proposed,
        improvement_pct,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementSummary {
    pub baseline: Baseline,
    pub n: usize,
    pub min_pct: f64,
    pub max_pct: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub records: Vec<ComparisonRecord>,
    /// Simulated `site/quantity` keys with no fixture row.
    pub unmatched_simulated: Vec<String>,
    /// Fixture `site/quantity` keys with no simulated value.
    pub unmatched_fixture: Vec<String>,
    /// Rows rejected by the metric (e.g. missing ground truth).
    pub rejected: Vec<String>,
    pub summaries: Vec<ImprovementSummary>,
}

fn summarize(records: &[ComparisonRecord]) -> Vec<ImprovementSummary> {
    let mut by: BTreeMap<Baseline, Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(p) = r.improvement_pct {
            by.entry(r.baseline).or_default().push(p);
        }
    }
    by.into_iter()
        .map(|(baseline, v)| ImprovementSummary {
            baseline,
            n: v.len(),
            min_pct: v.iter().copied().fold(f64::INFINITY, f64::min),
            max_pct: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect()
}

fn records_for(row: &FixtureRow, proposed: f64, report: &mut ComparisonReport) {
    for (baseline, existing) in [(Baseline::Existing6m, row.existing_6m), (Baseline::Existing4m, row.existing_4m)] {
        let Some(existing) = existing else { continue };
        match improvement_metric(&row.site, &row.quantity, baseline, row.measured, existing, proposed) {
            Ok(r) => report.records.push(r),
            Err(e) => report.rejected.push(e.to_string()),
        }
    }
}

/// Metric over fixtures that carry all three values per row.
pub fn compare_fixture(rows: &[FixtureRow]) -> ComparisonReport {
    let mut report = ComparisonReport::default();
    for row in rows {
        match row.proposed {
            Some(p) => records_for(row, p, &mut report),
            None => report.unmatched_fixture.push(format!("{}/{}", row.site, row.quantity)),
        }
    }
    report.summaries = summarize(&report.records);
    report
}

/// Joins fixtures with simulated values on `(site, quantity)`; the simulated
/// value takes the place of the proposed column.
pub fn compare_sites(rows: &[FixtureRow], simulated: &[SimulatedValue]) -> ComparisonReport {
    let mut report = ComparisonReport::default();
    let sim: BTreeMap<(&str, &str), f64> = simulated
        .iter()
        .map(|s| ((s.site.as_str(), s.quantity.as_str()), s.value))
        .collect();
    for row in rows {
        match sim.get(&(row.site.as_str(), row.quantity.as_str())) {
            Some(&v) => records_for(row, v, &mut report),
            None => report.unmatched_fixture.push(format!("{}/{}", row.site, row.quantity)),
        }
    }
    for s in simulated {
        if !rows.iter().any(|r| r.site == s.site && r.quantity == s.quantity) {
            report.unmatched_simulated.push(format!("{}/{}", s.site, s.quantity));
        }
    }
    report.summaries = summarize(&report.records);
    report
}

fn read_csv<T: for<'de> Deserialize<'de>, R: Read>(reader: R) -> Result<Vec<T>, CoverageError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| CoverageError::Comparison(format!("row {}: {e}", i + 2))))
        .collect()
}

pub fn read_fixture<R: Read>(reader: R) -> Result<Vec<FixtureRow>, CoverageError> {
    read_csv(reader)
}

pub fn read_simulated<R: Read>(reader: R) -> Result<Vec<SimulatedValue>, CoverageError> {
    read_csv(reader)
}

fn fmt_value(v: f64) -> String {
    // enough digits for both dB values and 1e-4 us^2 variances
    format!("{v:.6e}")
}

pub fn write_comparison_csv(report: &ComparisonReport) -> String {
    let mut out = String::from(
        "site,quantity,baseline,ground_truth,sr_existing,sr_proposed,e_existing,e_proposed,improvement_pct\n",
    );
    for r in &report.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.site,
            r.quantity,
            r.baseline.as_str(),
            fmt_value(r.ground_truth),
            fmt_value(r.sr_existing),
            fmt_value(r.sr_proposed),
            fmt_value(r.e_existing),
            fmt_value(r.e_proposed),
            r.improvement_pct.map(|p| format!("{p:.4}")).unwrap_or_default()
        );
    }
    for s in &report.summaries {
        let _ = writeln!(
            out,
            "# summary {}: n={} min={:.4} max={:.4}",
            s.baseline.as_str(),
            s.n,
            s.min_pct,
            s.max_pct
        );
    }
    for k in &report.unmatched_fixture {
        let _ = writeln!(out, "# unmatched fixture {k}");
    }
    for k in &report.unmatched_simulated {
        let _ = writeln!(out, "# unmatched simulated {k}");
    }
    for k in &report.rejected {
        let _ = writeln!(out, "# rejected {k}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_examples() {
        let r = improvement_metric("Incheon", "ss_pohang", Baseline::Existing6m, Some(56.25), 67.62, 65.19).unwrap();
        assert!((r.improvement_pct.unwrap() - 21.37).abs() < 0.01);
        let a = improvement_metric("Incheon", "acc", Baseline::Existing6m, Some(10.16), 20.83, 12.10).unwrap();
        assert!((a.improvement_pct.unwrap() - 81.82).abs() < 0.01);
        let perfect = improvement_metric("x", "q", Baseline::Existing4m, Some(5.0), 9.0, 5.0).unwrap();
        assert_eq!(perfect.improvement_pct, Some(100.0));
        let worse = improvement_metric("x", "q", Baseline::Existing4m, Some(5.0), 6.0, 8.0).unwrap();
        assert_eq!(worse.improvement_pct, Some(-200.0));
        let undefined = improvement_metric("x", "q", Baseline::Existing4m, Some(5.0), 5.0, 8.0).unwrap();
        assert_eq!(undefined.improvement_pct, None);
        assert!(improvement_metric("x", "q", Baseline::Existing4m, None, 5.0, 8.0).is_err());
    }

    const FIX: &str = "site,quantity,measured,existing_6m,existing_4m,proposed\n\
        # comment\n\
        Incheon,accuracy_95_m,10.16,20.83,14.04,12.10\n\
        Gumi,accuracy_95_m,8.87,20.94,14.28,9.86\n\
        Nowhere,accuracy_95_m,,20.0,,1.0\n";

    #[test]
    fn fixture_comparison() {
        let rows = read_fixture(FIX.as_bytes()).unwrap();
        let rep = compare_fixture(&rows);
        assert_eq!(rep.records.len(), 4);
        assert_eq!(rep.rejected.len(), 1);
        let s6 = rep.summaries.iter().find(|s| s.baseline == Baseline::Existing6m).unwrap();
        assert_eq!(s6.n, 2);
        let csv = write_comparison_csv(&rep);
        assert!(csv.lines().nth(1).unwrap().starts_with("Incheon,accuracy_95_m,existing_6m,"));
    }

    #[test]
    fn join_with_simulated() {
        let rows = read_fixture(FIX.as_bytes()).unwrap();
        assert!(compare_sites(&rows, &[]).records.is_empty());
        let sim = vec![
            SimulatedValue { site: "Incheon".into(), quantity: "accuracy_95_m".into(), value: 10.16 },
            SimulatedValue { site: "Mars".into(), quantity: "accuracy_95_m".into(), value: 1.0 },
        ];
        let rep = compare_sites(&rows, &sim);
        assert_eq!(rep.records.len(), 2);
        assert!(rep.records.iter().all(|r| r.improvement_pct == Some(100.0)));
        assert_eq!(rep.unmatched_simulated, vec!["Mars/accuracy_95_m".to_string()]);
    }
}
