use super::{TorRecord, TorSeries};

pub const DEFAULT_OUTLIER_WINDOW: usize = 100;
pub const DEFAULT_OUTLIER_K: f64 = 3.0;
/// Floor on the MAD so a constant window does not flag every deviation.
pub const MAD_FLOOR: f64 = 1e-9;
/// Records needed in the look-back window before a record can be tested.
const MIN_HISTORY: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierFiltered {
    pub series: TorSeries,
    /// Indices (into the input) of dropped records.
    pub removed: Vec<usize>,
    /// Set when the input was too short to test and was passed through.
    pub passthrough: bool,
}

/// Median of a scratch buffer (reordered in place).
fn median(buf: &mut [f64]) -> f64 {
    let n = buf.len();
    let mid = n / 2;
    let (_, &mut hi, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        hi
    } else {
        let lo = buf[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Whether `x` lies beyond `k` MADs of the window median.
fn is_outlier(window: &[f64], x: f64, k: f64, scratch: &mut Vec<f64>) -> bool {
    scratch.clear();
    scratch.extend_from_slice(window);
    let med = median(scratch);
    for v in scratch.iter_mut() {
        *v = (*v - med).abs();
    }
    let mad = median(scratch).max(MAD_FLOOR);
    (x - med).abs() > k * mad
}

/// Drops records whose TOR or SNR deviates from the median of the preceding
/// `window` raw records by more than `k` MADs.
///
/// Each record is compared against the raw history (including records that
/// were themselves flagged), so an isolated spike does not shift later gates.
pub fn remove_outliers(series: &TorSeries, window: usize, k: f64) -> OutlierFiltered {
    assert!(window >= MIN_HISTORY, "outlier window must be at least {MIN_HISTORY}");
    let recs = series.records();
    if recs.len() < MIN_HISTORY {
        return OutlierFiltered {
            series: series.clone(),
            removed: Vec::new(),
            passthrough: true,
        };
    }
    let tor: Vec<f64> = recs.iter().map(|r| r.tor_us).collect();
    let snr: Vec<f64> = recs.iter().map(|r| r.snr_db).collect();
    let mut scratch = Vec::with_capacity(window);
    let mut kept: Vec<TorRecord> = Vec::with_capacity(recs.len());
    let mut removed = Vec::new();
    for (i, rec) in recs.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let drop = i - lo >= MIN_HISTORY
            && (is_outlier(&tor[lo..i], rec.tor_us, k, &mut scratch)
                || is_outlier(&snr[lo..i], rec.snr_db, k, &mut scratch));
        if drop {
            removed.push(i);
        } else {
            kept.push(*rec);
        }
    }
    OutlierFiltered {
        series: series.with_records(kept),
        removed,
        passthrough: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64]) -> TorSeries {
        let recs = values
            .iter()
            .enumerate()
            .map(|(i, &v)| TorRecord {
                timestamp_s: i as f64,
                tor_us: v,
                snr_db: 20.0,
            })
            .collect();
        TorSeries::new("PH", "site", 9930, recs).unwrap()
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn spike_removed() {
        let mut v = vec![10.0; 100];
        v.push(50.0);
        let f = remove_outliers(&series(&v), 100, 3.0);
        assert_eq!(f.removed, vec![100]);
    }

    #[test]
    fn constant_series_untouched() {
        let f = remove_outliers(&series(&[4.0; 300]), 100, 3.0);
        assert!(f.removed.is_empty());
        assert_eq!(f.series.len(), 300);
    }

    #[test]
    fn short_series_passthrough() {
        let f = remove_outliers(&series(&[1.0, 100.0]), 100, 3.0);
        assert!(f.passthrough);
        assert_eq!(f.series.len(), 2);
    }

    #[test]
    fn snr_outlier_drops_record() {
        let mut s = series(&[5.0; 50]);
        let mut recs = s.records().to_vec();
        recs[40].snr_db = -30.0;
        s = s.with_records(recs);
        assert_eq!(remove_outliers(&s, 100, 3.0).removed, vec![40]);
    }
}
