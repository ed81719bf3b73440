//! Plain-text lat/lon rasters.
//!
//! Header lines `ncols`, `nrows`, `xllcorner`, `yllcorner`, `cellsize` and
//! (optionally, required for land cover) `nodata_value`, followed by `nrows`
//! lines of `ncols` whitespace-separated tokens. Row 0 is the northernmost row.
//! Cells are square in degrees; `xllcorner`/`yllcorner` locate the lower-left
//! corner of the raster.

use std::fmt::{Display, Write as _};
use std::io::BufRead;

use super::{GeoPoint, GeodataError};

/// Georeferencing of a north-up lat/lon raster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterFrame {
    pub origin: GeoPoint,
    pub cell_size_deg: f64,
    pub n_cols: usize,
    pub n_rows: usize,
}

impl RasterFrame {
    pub fn new(
        origin: GeoPoint,
        cell_size_deg: f64,
        n_cols: usize,
        n_rows: usize,
    ) -> Result<Self, GeodataError> {
        if !(cell_size_deg.is_finite() && cell_size_deg > 0.0) {
            return Err(GeodataError::InvalidFrame(format!(
                "cell size must be positive, got {cell_size_deg}"
            )));
        }
        if n_cols == 0 || n_rows == 0 {
            return Err(GeodataError::InvalidFrame(
                "raster must have at least one row and column".into(),
            ));
        }
        Ok(Self {
            origin,
            cell_size_deg,
            n_cols,
            n_rows,
        })
    }

    pub fn len(&self) -> usize {
        self.n_cols * self.n_rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lat_min(&self) -> f64 {
        self.origin.lat_deg()
    }

    pub fn lon_min(&self) -> f64 {
        self.origin.lon_deg()
    }

    pub fn lat_max(&self) -> f64 {
        self.lat_min() + self.n_rows as f64 * self.cell_size_deg
    }

    pub fn lon_max(&self) -> f64 {
        self.lon_min() + self.n_cols as f64 * self.cell_size_deg
    }

    /// Row-major index of the cell containing `p`, or `None` outside the extent.
    pub fn index_of(&self, p: &GeoPoint) -> Option<usize> {
        let fx = (p.lon_deg() - self.lon_min()) / self.cell_size_deg;
        let fy = (p.lat_deg() - self.lat_min()) / self.cell_size_deg;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (col, row_from_south) = (fx.floor() as usize, fy.floor() as usize);
        if col >= self.n_cols || row_from_south >= self.n_rows {
            return None;
        }
        Some((self.n_rows - 1 - row_from_south) * self.n_cols + col)
    }

    /// Center of the cell at (`row`, `col`), row 0 north.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let lat = self.lat_min() + (self.n_rows - row) as f64 * self.cell_size_deg
            - 0.5 * self.cell_size_deg;
        let lon = self.lon_min() + (col as f64 + 0.5) * self.cell_size_deg;
        (lat, lon)
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        self.index_of(p).is_some()
    }
}

/// A north-up raster of arbitrary cell values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    pub frame: RasterFrame,
    pub cells: Vec<T>,
}

impl<T> Grid<T> {
    pub fn new(frame: RasterFrame, cells: Vec<T>) -> Result<Self, GeodataError> {
        if cells.len() != frame.len() {
            return Err(GeodataError::InvalidFrame(format!(
                "expected {} cells ({}x{}), got {}",
                frame.len(),
                frame.n_cols,
                frame.n_rows,
                cells.len()
            )));
        }
        Ok(Self { frame, cells })
    }

    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.cells[row * self.frame.n_cols + col]
    }

    pub fn at(&self, p: &GeoPoint) -> Option<&T> {
        self.frame.index_of(p).map(|i| &self.cells[i])
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            frame: self.frame,
            cells: self.cells.iter().map(f).collect(),
        }
    }
}

/// Parsed header of a plain-text raster.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterHeader {
    pub frame: RasterFrame,
    pub nodata_value: Option<i64>,
}

/// Parse a plain-text raster, converting each cell token with `parse_token`.
///
/// `parse_token` receives the raw token and the header's nodata value and
/// returns an error message on failure; the parser attaches the line number.
pub fn read_raster<T, R: BufRead>(
    reader: R,
    mut parse_token: impl FnMut(&str, Option<i64>) -> Result<T, String>,
) -> Result<(RasterHeader, Vec<T>), GeodataError> {
    let mut ncols = None;
    let mut nrows = None;
    let mut xll = None;
    let mut yll = None;
    let mut cellsize = None;
    let mut nodata = None;
    let mut header: Option<RasterHeader> = None;
    let mut cells = Vec::new();
    let mut rows_seen = 0usize;

    let perr = |line: usize, message: String| GeodataError::Parse { line, message };

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| perr(lineno, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if header.is_none() {
            let mut parts = trimmed.split_whitespace();
            let key = parts.next().unwrap_or_default().to_ascii_lowercase();
            let is_key = matches!(
                key.as_str(),
                "ncols" | "nrows" | "xllcorner" | "yllcorner" | "cellsize" | "nodata_value"
            );
            if is_key {
                let value = parts
                    .next()
                    .ok_or_else(|| perr(lineno, format!("header `{key}` has no value")))?;
                if parts.next().is_some() {
                    return Err(perr(lineno, format!("header `{key}` has extra tokens")));
                }
                let bad = |e: &dyn Display| perr(lineno, format!("bad `{key}` value `{value}`: {e}"));
                match key.as_str() {
                    "ncols" => ncols = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                    "nrows" => nrows = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                    "xllcorner" => xll = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
                    "yllcorner" => yll = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
                    "cellsize" => cellsize = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
                    _ => nodata = Some(value.parse::<i64>().map_err(|e| bad(&e))?),
                }
                continue;
            }
            let missing = |name: &str| perr(lineno, format!("missing header `{name}`"));
            let n_cols = ncols.ok_or_else(|| missing("ncols"))?;
            let n_rows = nrows.ok_or_else(|| missing("nrows"))?;
            let x0 = xll.ok_or_else(|| missing("xllcorner"))?;
            let y0 = yll.ok_or_else(|| missing("yllcorner"))?;
            let c = cellsize.ok_or_else(|| missing("cellsize"))?;
            let origin = GeoPoint::new(y0, x0).map_err(|e| perr(lineno, e.to_string()))?;
            let frame = RasterFrame::new(origin, c, n_cols, n_rows)
                .map_err(|e| perr(lineno, e.to_string()))?;
            cells.reserve(frame.len());
            header = Some(RasterHeader {
                frame,
                nodata_value: nodata,
            });
        }
        let h = header.as_ref().expect("header parsed above");
        if rows_seen == h.frame.n_rows {
            return Err(perr(
                lineno,
                format!("more than the declared {} rows", h.frame.n_rows),
            ));
        }
        let before = cells.len();
        for token in trimmed.split_whitespace() {
            let v = parse_token(token, h.nodata_value)
                .map_err(|m| perr(lineno, format!("bad token `{token}`: {m}")))?;
            cells.push(v);
        }
        let got = cells.len() - before;
        if got != h.frame.n_cols {
            return Err(perr(
                lineno,
                format!("expected {} values, found {got}", h.frame.n_cols),
            ));
        }
        rows_seen += 1;
    }

    let header = header.ok_or_else(|| perr(0, "no raster data after header".into()))?;
    if rows_seen != header.frame.n_rows {
        return Err(perr(
            0,
            format!(
                "expected {} rows, found {rows_seen}",
                header.frame.n_rows
            ),
        ));
    }
    Ok((header, cells))
}

/// Serialize a raster; `format_token` renders each cell.
pub fn write_raster<T>(
    frame: &RasterFrame,
    nodata_value: Option<i64>,
    cells: &[T],
    mut format_token: impl FnMut(&T) -> String,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ncols {}", frame.n_cols);
    let _ = writeln!(out, "nrows {}", frame.n_rows);
    let _ = writeln!(out, "xllcorner {}", frame.lon_min());
    let _ = writeln!(out, "yllcorner {}", frame.lat_min());
    let _ = writeln!(out, "cellsize {}", frame.cell_size_deg);
    if let Some(nd) = nodata_value {
        let _ = writeln!(out, "nodata_value {nd}");
    }
    for row in cells.chunks(frame.n_cols) {
        let line: Vec<String> = row.iter().map(&mut format_token).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_i(s: &str) -> Result<(RasterHeader, Vec<i32>), GeodataError> {
        read_raster(s.as_bytes(), |t, _| t.parse::<i32>().map_err(|e| e.to_string()))
    }

    #[test]
    fn frame_indexing_north_up() {
        let f = RasterFrame::new(GeoPoint::new(10.0, 20.0).unwrap(), 1.0, 3, 2).unwrap();
        // row 0 is north: lat in [11, 12)
        assert_eq!(f.index_of(&GeoPoint::new(11.5, 20.5).unwrap()), Some(0));
        assert_eq!(f.index_of(&GeoPoint::new(10.5, 22.5).unwrap()), Some(5));
        assert_eq!(f.index_of(&GeoPoint::new(12.0, 20.5).unwrap()), None);
        assert_eq!(f.cell_center(0, 0), (11.5, 20.5));
        assert_eq!(f.cell_center(1, 2), (10.5, 22.5));
    }

    #[test]
    fn missing_header_reports_line() {
        let err = parse_i("ncols 2\nnrows 1\n1 2\n").unwrap_err();
        match err {
            GeodataError::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("xllcorner"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_many_rows() {
        let src = "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1\n2\n";
        assert!(matches!(parse_i(src), Err(GeodataError::Parse { line: 7, .. })));
    }

    #[test]
    fn write_then_read() {
        let f = RasterFrame::new(GeoPoint::new(-1.5, 3.25).unwrap(), 0.25, 2, 2).unwrap();
        let text = write_raster(&f, Some(-9999), &[1, 2, 3, -9999], |v| v.to_string());
        let (h, cells) = parse_i(&text).unwrap();
        assert_eq!(h.frame, f);
        assert_eq!(h.nodata_value, Some(-9999));
        assert_eq!(cells, vec![1, 2, 3, -9999]);
    }
}
