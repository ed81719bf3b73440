//! TOR log and jitter report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{JitterError, JitterEstimate, StationAverage, TorRecord, TorSeries};

/// One row of a TOR log: `utc_time_iso8601,site_id,station_id,gri,tor_us,snr_db`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorLogRow {
    pub utc_time_iso8601: String,
    pub site_id: String,
    pub station_id: String,
    pub gri: u32,
    pub tor_us: f64,
    pub snr_db: f64,
}

fn parse_time(s: &str) -> Option<f64> {
    let dt = DateTime::parse_from_rfc3339(s)
        .map(|d| d.with_timezone(&Utc))
        .ok()
        .or_else(|| {
            NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f")
                .ok()
                .map(|n| n.and_utc())
        })?;
    Some(dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9)
}

pub fn format_time(timestamp_s: f64) -> String {
    let secs = timestamp_s.floor();
    let nanos = ((timestamp_s - secs) * 1e9).round().min(999_999_999.0) as u32;
    DateTime::<Utc>::from_timestamp(secs as i64, nanos)
        .map(|d| d.to_rfc3339_opts(SecondsFormat::Millis, true))
        .unwrap_or_else(|| timestamp_s.to_string())
}

pub fn read_tor_log<R: std::io::Read>(reader: R) -> Result<Vec<TorLogRow>, JitterError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| JitterError::Log(format!("row {}: {e}", i + 2))))
        .collect()
}

pub fn write_tor_log<W: Write>(writer: W, series: &[TorSeries]) -> Result<(), JitterError> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| JitterError::Log(e.to_string());
    for s in series {
        for r in s.records() {
            w.serialize(TorLogRow {
                utc_time_iso8601: format_time(r.timestamp_s),
                site_id: s.site_id.clone(),
                station_id: s.station_id.clone(),
                gri: s.gri_designator,
                tor_us: r.tor_us,
                snr_db: r.snr_db,
            })
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| JitterError::Log(e.to_string()))
}

/// Splits log rows into per (site, station, GRI) series, sorted by time.
pub fn group_tor_log(rows: &[TorLogRow]) -> Result<Vec<TorSeries>, JitterError> {
    let mut groups: BTreeMap<(String, String, u32), Vec<TorRecord>> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        let t = parse_time(&row.utc_time_iso8601).ok_or_else(|| {
            JitterError::Log(format!("row {}: bad timestamp `{}`", i + 2, row.utc_time_iso8601))
        })?;
        groups
            .entry((row.site_id.clone(), row.station_id.clone(), row.gri))
            .or_default()
            .push(TorRecord {
                timestamp_s: t,
                tor_us: row.tor_us,
                snr_db: row.snr_db,
            });
    }
    groups
        .into_iter()
        .map(|((site, station, gri), mut recs)| {
            recs.sort_by(|a, b| a.timestamp_s.total_cmp(&b.timestamp_s));
            TorSeries::new(station, site, gri, recs)
        })
        .collect()
}

/// Groups series into same-site, same-GRI pairs (stations in id order).
/// Every (site, GRI) group must contain exactly two stations.
pub fn pair_series(series: &[TorSeries]) -> Result<Vec<(TorSeries, TorSeries)>, JitterError> {
    let mut groups: BTreeMap<(&str, u32), Vec<&TorSeries>> = BTreeMap::new();
    for s in series {
        groups.entry((&s.site_id, s.gri_designator)).or_default().push(s);
    }
    if groups.is_empty() {
        return Err(JitterError::Pairing("no TOR series".into()));
    }
    groups
        .into_iter()
        .map(|((site, gri), mut members)| {
            if members.len() != 2 {
                return Err(JitterError::Pairing(format!(
                    "site {site}, GRI {gri}: expected 2 stations, found {} ({})",
                    members.len(),
                    members.iter().map(|s| s.station_id.as_str()).collect::<Vec<_>>().join(", ")
                )));
            }
            members.sort_by(|a, b| a.station_id.cmp(&b.station_id));
            Ok((members[0].clone(), members[1].clone()))
        })
        .collect()
}

#[derive(Debug, Error)]
#[error("bandwidth grid spec `{0}`: expected `lo:hi:n` with 0 < lo <= hi and n >= 1")]
pub struct ReportError(pub String);

/// Parses `lo:hi:n` into `n` log-spaced bandwidths.
pub fn parse_bandwidth_grid(spec: &str) -> Result<Vec<f64>, ReportError> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let bad = || ReportError(spec.to_string());
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi >= lo && hi.is_finite() && n >= 1) || (n > 1 && hi == lo) {
        return Err(bad());
    }
    Ok(super::log_grid(lo, hi, n))
}

/// Per-site jitter estimates with per-station averages.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JitterReport {
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<JitterEstimate>,
    /// (site, station, message) of rows whose estimate failed.
    pub errors: Vec<(String, String, String)>,
    pub averages: Vec<StationAverage>,
}

const REPORT_HEADER: &str = "station_id,site_id,jitter_m,sigma_i_us2,bandwidth_s,e_us2";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `#`-prefixed metadata and error lines, the per-site table, then an
/// averages section.
pub fn write_jitter_report(report: &JitterReport) -> String {
    let mut out = String::new();
    for (k, v) in &report.metadata {
        let _ = writeln!(out, "# {k}={v}");
    }
    let _ = writeln!(out, "{REPORT_HEADER}");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{:.4},{:.6e},{:.4},{:.6e}",
            csv_field(&r.station_id),
            csv_field(&r.site_id),
            r.jitter_m,
            r.sigma_i_us2,
            r.optimal_bandwidth_s,
            r.bias_elimination_error_us2
        );
    }
    for (site, station, msg) in &report.errors {
        let _ = writeln!(out, "# error site={site} station={station}: {}", msg.replace('\n', " "));
    }
    let _ = writeln!(out, "# averages");
    let _ = writeln!(out, "station_id,mean_jitter_m,n_sites");
    for a in &report.averages {
        let _ = writeln!(out, "{},{:.4},{}", csv_field(&a.station_id), a.mean_jitter_m, a.n_sites);
    }
    out
}

#[derive(Debug, Deserialize)]
struct ReportRow {
    station_id: String,
    site_id: String,
    jitter_m: f64,
    #[serde(default)]
    sigma_i_us2: Option<f64>,
    #[serde(default)]
    bandwidth_s: Option<f64>,
    #[serde(default)]
    e_us2: Option<f64>,
}

/// Reads the per-site rows of a jitter report (comment lines and the averages
/// section are skipped; absent numeric columns read as NaN).
pub fn read_jitter_report<R: BufRead>(reader: R) -> Result<Vec<JitterEstimate>, JitterError> {
    let mut body = String::new();
    for line in reader.lines() {
        let line = line.map_err(|e| JitterError::Log(e.to_string()))?;
        let t = line.trim();
        if t.starts_with("# averages") {
            break;
        }
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        body.push_str(&line);
        body.push('\n');
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    rdr.deserialize::<ReportRow>()
        .map(|r| {
            let r = r.map_err(|e| JitterError::Log(e.to_string()))?;
            Ok(JitterEstimate {
                station_id: r.station_id,
                site_id: r.site_id,
                jitter_m: r.jitter_m,
                sigma_i_us2: r.sigma_i_us2.unwrap_or(f64::NAN),
                snr_linear: f64::NAN,
                n_pulses: f64::NAN,
                optimal_bandwidth_s: r.bandwidth_s.unwrap_or(f64::NAN),
                bias_elimination_error_us2: r.e_us2.unwrap_or(f64::NAN),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOG: &str = "utc_time_iso8601,site_id,station_id,gri,tor_us,snr_db\n\
        2020-05-01T00:00:01Z,OC,PH,9930,100.5,20.1\n\
        2020-05-01T00:00:00Z,OC,PH,9930,100.4,20.0\n\
        2020-05-01T00:00:00.000Z,OC,GJ,9930,200.1,18.0\n\
        2020-05-01T00:00:01,OC,GJ,9930,200.2,18.2\n";

    #[test]
    fn log_parse_group_pair() {
        let rows = read_tor_log(LOG.as_bytes()).unwrap();
        let series = group_tor_log(&rows).unwrap();
        assert_eq!(series.len(), 2);
        let ph = series.iter().find(|s| s.station_id == "PH").unwrap();
        assert_eq!(ph.tor(), vec![100.4, 100.5]);
        assert_eq!(ph.times()[1] - ph.times()[0], 1.0);
        let pairs = pair_series(&series).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!((pairs[0].0.station_id.as_str(), pairs[0].1.station_id.as_str()), ("GJ", "PH"));
    }

    #[test]
    fn single_station_is_pairing_error() {
        let rows = read_tor_log(LOG.as_bytes()).unwrap();
        let only: Vec<_> = rows.into_iter().filter(|r| r.station_id == "PH").collect();
        let series = group_tor_log(&only).unwrap();
        assert!(matches!(pair_series(&series), Err(JitterError::Pairing(_))));
    }

    #[test]
    fn log_round_trip() {
        let rows = read_tor_log(LOG.as_bytes()).unwrap();
        let series = group_tor_log(&rows).unwrap();
        let mut buf = Vec::new();
        write_tor_log(&mut buf, &series).unwrap();
        let back = group_tor_log(&read_tor_log(buf.as_slice()).unwrap()).unwrap();
        assert_eq!(back, series);
    }

    #[test]
    fn grid_spec() {
        let g = parse_bandwidth_grid("0.1:1000:60").unwrap();
        assert_eq!(g.len(), 60);
        assert!(parse_bandwidth_grid("1:0.5:3").is_err());
        assert!(parse_bandwidth_grid("x").is_err());
        assert_eq!(parse_bandwidth_grid("2:2:1").unwrap(), vec![2.0]);
    }

    #[test]
    fn report_round_trip() {
        let est = JitterEstimate {
            station_id: "PH".into(),
            site_id: "Okcheon".into(),
            jitter_m: 2.67,
            sigma_i_us2: 1e-4,
            snr_linear: 100.0,
            n_pulses: 402.8,
            optimal_bandwidth_s: 1.3,
            bias_elimination_error_us2: 2e-6,
        };
        let report = JitterReport {
            metadata: vec![("bandwidth_grid".into(), "0.1:1000:60".into())],
            rows: vec![est.clone()],
            errors: vec![("Daegu".into(), "PH".into(), "inversion: infeasible".into())],
            averages: vec![StationAverage {
                station_id: "PH".into(),
                mean_jitter_m: 2.67,
                n_sites: 1,
            }],
        };
        let text = write_jitter_report(&report);
        assert!(text.starts_with("# bandwidth_grid=0.1:1000:60\n"));
        assert!(text.contains("# error site=Daegu station=PH"));
        let back = read_jitter_report(text.as_bytes()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].jitter_m, 2.67);
        assert_eq!(back[0].optimal_bandwidth_s, 1.3);
    }
}
