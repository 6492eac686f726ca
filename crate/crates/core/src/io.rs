//! Plain-text CSV exchange: matrices one row per line without a header,
//! signals as `time, v1, .., vk` with an optional header line.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matspace::{Mat, Vector};
use crate::simulate::TrajectoryGrid;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        file: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// 17 significant digits: parsing the output recovers the exact `f64`.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_row(path: &Path, line: usize, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .enumerate()
        .map(|(col, field)| {
            let field = field.trim();
            field.parse::<f64>().map_err(|_| {
                parse_err(path, line, format!("column {}: cannot parse {field:?} as a number", col + 1))
            })
        })
        .collect()
}

/// Data lines with their 1-based line numbers; blank lines are skipped.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn parse_matrix(path: &Path, text: &str) -> Result<Mat> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, l) in data_lines(text) {
        let row = parse_row(path, line, l)?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    path,
                    line,
                    format!("row has {} entries, expected {}", row.len(), first.len()),
                ));
            }
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(parse_err(path, line, "non-finite entry"));
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn read_matrix(path: &Path) -> Result<Mat> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_matrix(path, &text)
}

pub fn matrix_to_string(m: &Mat) -> String {
    let mut out = String::new();
    if m.ncols() == 0 {
        return out;
    }
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|&x| format_value(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, m: &Mat) -> Result<()> {
    fs::write(path, matrix_to_string(m)).map_err(|e| io_err(path, e))
}

/// Reads `time, v1, .., vk` rows on a uniform grid. A first line that does
/// not parse as numbers is treated as a header.
pub fn read_signal(path: &Path) -> Result<TrajectoryGrid> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = data_lines(&text).peekable();
    if let Some((line, l)) = lines.peek().copied() {
        if parse_row(path, line, l).is_err() {
            lines.next();
        }
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut width = None;
    for (line, l) in lines {
        let row = parse_row(path, line, l)?;
        if row.len() < 2 {
            return Err(parse_err(path, line, "expected time followed by at least one value"));
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(path, line, format!("row has {} entries, expected {w}", row.len())));
            }
            _ => {}
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(parse_err(path, line, "non-finite entry"));
        }
        times.push((line, row[0]));
        values.push(Vector::from_column_slice(&row[1..]));
    }
    if times.len() < 2 {
        return Err(parse_err(path, 0, "signal needs at least two samples"));
    }
    let t0 = times[0].1;
    let dt = (times[times.len() - 1].1 - t0) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(parse_err(path, times[1].0, "time column must increase"));
    }
    for (k, &(line, t)) in times.iter().enumerate() {
        if (t - (t0 + k as f64 * dt)).abs() > 1e-6 * dt {
            return Err(parse_err(path, line, format!("time {t} is off the uniform grid (dt = {dt})")));
        }
    }
    TrajectoryGrid::new(t0, dt, values)
}

/// Writes `time, columns..` with a header line.
pub fn write_columns(path: &Path, header: &[String], time: &[f64], columns: &[Vec<f64>]) -> Result<()> {
    if columns.len() + 1 != header.len() || columns.iter().any(|c| c.len() != time.len()) {
        return Err(Error::Dimension(format!(
            "trace file {} has inconsistent column lengths",
            path.display()
        )));
    }
    let mut out = header.join(",");
    out.push('\n');
    for (k, t) in time.iter().enumerate() {
        out.push_str(&format_value(*t));
        for c in columns {
            out.push(',');
            out.push_str(&format_value(c[k]));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Writes a grid as `time, <prefix>1, .., <prefix>k`.
pub fn write_signal(path: &Path, prefix: &str, g: &TrajectoryGrid) -> Result<()> {
    let mut header = vec!["time".to_string()];
    header.extend((1..=g.dim()).map(|i| format!("{prefix}{i}")));
    let time: Vec<f64> = (0..g.len()).map(|k| g.time(k)).collect();
    let columns: Vec<Vec<f64>> = (0..g.dim()).map(|i| g.component(i)).collect();
    write_columns(path, &header, &time, &columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        let m = Mat::from_row_slice(2, 3, &[0.1, -1.0 / 3.0, 1e-300, 6.02e23, f64::MIN_POSITIVE, -0.0]);
        write_matrix(&path, &m).unwrap();
        let back = read_matrix(&path).unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn ragged_row_names_the_line() {
        let err = parse_matrix(Path::new("F_matrix.txt"), "1,2\n3,4\n5\n").unwrap_err();
        match err {
            Error::Parse { file, line, .. } => {
                assert_eq!(file, "F_matrix.txt");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other}"),
        }
        assert!(parse_matrix(Path::new("x"), "1,abc\n").is_err());
    }

    #[test]
    fn signal_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("y.csv");
        fs::write(&path, "time,y1,y2\n0,1,2\n0.5,3,4\n1.0,5,6\n").unwrap();
        let g = read_signal(&path).unwrap();
        assert_eq!((g.len(), g.dim()), (3, 2));
        assert_eq!(g.sample(2)[1], 6.0);
        fs::write(&path, "0,1\n0.1,2\n0.2,3\n").unwrap();
        let g = read_signal(&path).unwrap();
        assert!((g.dt() - 0.1).abs() < 1e-15);
        fs::write(&path, "0,1\n0.1,2\n0.5,3\n").unwrap();
        assert!(read_signal(&path).is_err());
    }

    #[test]
    fn signal_writer_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let g = TrajectoryGrid::new(0.0, 0.25, (0..5).map(|k| Vector::from_vec(vec![k as f64, 1.0 / 7.0])).collect()).unwrap();
        write_signal(&path, "y", &g).unwrap();
        let back = read_signal(&path).unwrap();
        assert_eq!(back.sample(4), g.sample(4));
        assert_eq!(back.dt(), 0.25);
    }
}
