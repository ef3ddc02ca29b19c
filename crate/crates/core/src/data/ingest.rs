use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDateTime;

use crate::linalg::Matrix;

use super::{zone_index, DataError, LoadSeries, TIMESTAMP_FORMAT, ZONES};

const FORMATS: [&str; 6] = [
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%m/%d/%Y %I:%M:%S %p",
    "%m/%d/%Y %H:%M",
];

fn parse_time(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

fn find(header: &[String], names: &[&str]) -> Option<usize> {
    header.iter().position(|h| names.iter().any(|n| h.eq_ignore_ascii_case(n)))
}

struct Rows {
    /// (timestamp, file order, zone index, MW)
    cells: Vec<(NaiveDateTime, usize, usize, f64)>,
}

fn read_one(path: &Path, rows: &mut Rows, order: &mut usize) -> Result<(), DataError> {
    let perr = |line: u64, message: String| DataError::Parse { path: path.to_path_buf(), line, message };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DataError::Io { path: path.to_path_buf(), source: std::io::Error::other(e.to_string()) })?;
    let header: Vec<String> =
        rdr.headers().map_err(|e| perr(1, e.to_string()))?.iter().map(|h| h.to_string()).collect();

    let zone_col = find(&header, &["zone"]);
    let time_col = find(&header, &["datetime_beginning_ept", "datetime", "timestamp", "time", "date"])
        .ok_or_else(|| perr(1, "no timestamp column".into()))?;

    if let Some(zc) = zone_col {
        // long format, optionally with a UTC column separating repeated wall-clock hours
        let value_col = find(&header, &["mw", "load", "value"]).ok_or_else(|| perr(1, "no MW column".into()))?;
        let utc_col = find(&header, &["datetime_beginning_utc", "utc"]);
        let mut sums: BTreeMap<(NaiveDateTime, NaiveDateTime, usize), f64> = BTreeMap::new();
        for (k, rec) in rdr.records().enumerate() {
            let line = k as u64 + 2;
            let rec = rec.map_err(|e| perr(line, e.to_string()))?;
            let ts_raw = rec.get(time_col).unwrap_or("");
            let t = parse_time(ts_raw).ok_or_else(|| perr(line, format!("malformed timestamp {ts_raw:?}")))?;
            let zone = rec.get(zc).unwrap_or("");
            let z = zone_index(zone).ok_or_else(|| DataError::UnknownZone {
                path: path.to_path_buf(),
                line,
                zone: zone.to_string(),
            })?;
            let raw = rec.get(value_col).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| perr(line, format!("bad MW value {raw:?}")))?;
            if !(v >= 0.0) {
                return Err(DataError::NegativeLoad { path: path.to_path_buf(), line, zone: zone.to_string(), value: v });
            }
            match utc_col {
                Some(uc) => {
                    let u_raw = rec.get(uc).unwrap_or("");
                    let u = parse_time(u_raw).ok_or_else(|| perr(line, format!("malformed timestamp {u_raw:?}")))?;
                    // sub-areas of one zone-hour are summed
                    *sums.entry((u, t, z)).or_insert(0.0) += v;
                }
                None => {
                    rows.cells.push((t, *order, z, v));
                    *order += 1;
                }
            }
        }
        // UTC order decides which reading of a repeated hour comes first
        for ((_, t, z), v) in sums {
            rows.cells.push((t, *order, z, v));
            *order += 1;
        }
    } else {
        let zones: Vec<(usize, usize)> = header
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != time_col)
            .map(|(j, h)| {
                zone_index(h).map(|z| (j, z)).ok_or_else(|| DataError::UnknownZone {
                    path: path.to_path_buf(),
                    line: 1,
                    zone: h.clone(),
                })
            })
            .collect::<Result<_, _>>()?;
        for (k, rec) in rdr.records().enumerate() {
            let line = k as u64 + 2;
            let rec = rec.map_err(|e| perr(line, e.to_string()))?;
            let ts_raw = rec.get(time_col).unwrap_or("");
            let t = parse_time(ts_raw).ok_or_else(|| perr(line, format!("malformed timestamp {ts_raw:?}")))?;
            for &(j, z) in &zones {
                let raw = rec.get(j).unwrap_or("");
                let v: f64 = raw.parse().map_err(|_| perr(line, format!("bad MW value {raw:?} in {}", header[j])))?;
                if !(v >= 0.0) {
                    return Err(DataError::NegativeLoad {
                        path: path.to_path_buf(),
                        line,
                        zone: header[j].clone(),
                        value: v,
                    });
                }
                rows.cells.push((t, *order, z, v));
            }
            *order += 1;
        }
    }
    Ok(())
}

/// Reads wide (`datetime, ZONE1, …`) or long (`timestamp, zone, mw`) CSV files into one
/// zone-hour table. Repeated wall-clock hours stay as separate rows, in file order.
pub fn ingest_csv<P: AsRef<Path>>(paths: &[P]) -> Result<LoadSeries, DataError> {
    let mut rows = Rows { cells: Vec::new() };
    let mut order = 0usize;
    for p in paths {
        read_one(p.as_ref(), &mut rows, &mut order)?;
    }
    if rows.cells.is_empty() {
        return Err(DataError::Invalid("no load rows".into()));
    }
    let mut present = [false; 20];
    for c in &rows.cells {
        present[c.2] = true;
    }
    let cols: Vec<usize> = (0..ZONES.len()).filter(|&z| present[z]).collect();
    let col_of: Vec<Option<usize>> = (0..ZONES.len()).map(|z| cols.iter().position(|&c| c == z)).collect();

    // occurrence k of a wall-clock hour for a zone lands in row k of that hour
    rows.cells.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut timestamps = Vec::new();
    let mut values = Matrix::zeros(0, cols.len());
    let mut i = 0;
    while i < rows.cells.len() {
        let t = rows.cells[i].0;
        let mut j = i;
        while j < rows.cells.len() && rows.cells[j].0 == t {
            j += 1;
        }
        let mut block: Vec<Vec<f64>> = Vec::new();
        let mut seen = vec![0usize; cols.len()];
        for c in &rows.cells[i..j] {
            let col = col_of[c.2].expect("present zone");
            let k = seen[col];
            seen[col] += 1;
            if block.len() <= k {
                block.push(vec![f64::NAN; cols.len()]);
            }
            block[k][col] = c.3;
        }
        for r in block {
            if let Some(z) = r.iter().position(|v| v.is_nan()) {
                return Err(DataError::Invalid(format!(
                    "{t}: zone {} has fewer readings than the others",
                    ZONES[cols[z]].0
                )));
            }
            timestamps.push(t);
            values.push_row(&r);
        }
        i = j;
    }
    LoadSeries::new(timestamps, cols.iter().map(|&z| ZONES[z].0.to_string()).collect(), values)
}

/// Wide CSV with a `datetime` column.
pub fn write_wide_csv(series: &LoadSeries, path: &Path) -> Result<(), DataError> {
    let io = |e: csv::Error| DataError::Io { path: path.to_path_buf(), source: std::io::Error::other(e.to_string()) };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = vec!["datetime".to_string()];
    header.extend(series.columns.iter().cloned());
    w.write_record(&header).map_err(io)?;
    for i in 0..series.len() {
        let mut rec = vec![series.timestamps[i].format(TIMESTAMP_FORMAT).to_string()];
        rec.extend(series.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| DataError::Io { path: path.to_path_buf(), source: e })
}
