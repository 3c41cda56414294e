//! File formats: JSON spectra, CSV point data and tabulated kernels, with
//! atomic writes.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::TabulatedKernel;
use crate::nystrom::PsqwsBasis;
use crate::quaternion::{format_f64, Quaternion};
use crate::sampling::SampledSignal;

/// One entry of the JSON spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub lambda: [f64; 4],
    pub mu: f64,
    pub residual: f64,
}

pub fn spectrum_records(basis: &PsqwsBasis) -> Vec<SpectrumRecord> {
    (0..basis.len())
        .map(|n| SpectrumRecord {
            lambda: basis.lambda()[n].to_array(),
            mu: basis.mu()[n],
            residual: basis.residuals()[n],
        })
        .collect()
}

pub fn spectrum_json(basis: &PsqwsBasis) -> Result<String> {
    to_json(&spectrum_records(basis))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn coordinate_headers(dim: usize) -> Vec<String> {
    (1..=dim).map(|a| format!("x{a}")).collect()
}

const VALUE_HEADERS: [&str; 4] = ["w", "x", "y", "z"];

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// `node_index,x1[,x2],n,w,x,y,z` rows of `phi_n(w_k) = lambda_n Phi_n(w_k)`.
pub fn eigenfunctions_csv(basis: &PsqwsBasis) -> Result<String> {
    let grid = basis.grid();
    let mut w = csv_writer();
    let mut header = vec!["node_index".to_string()];
    header.extend(coordinate_headers(grid.dim()));
    header.push("n".into());
    header.extend(VALUE_HEADERS.iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for n in 0..basis.len() {
        let values = basis.grid_values(n)?;
        for k in 0..grid.len() {
            let mut row = vec![k.to_string()];
            row.extend(grid.node(k).iter().map(|&c| format_f64(c)));
            row.push(n.to_string());
            row.extend(values[k].csv_fields());
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    finish_csv(w)
}

/// `x1[,x2],w,x,y,z` rows.
pub fn points_csv(points: &[Vec<f64>], values: &[Quaternion]) -> Result<String> {
    if points.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: values.len(),
        });
    }
    let dim = points.first().map_or(1, Vec::len);
    let mut w = csv_writer();
    let mut header = coordinate_headers(dim);
    header.extend(VALUE_HEADERS.iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for (p, v) in points.iter().zip(values) {
        let mut row: Vec<String> = p.iter().map(|&c| format_f64(c)).collect();
        row.extend(v.csv_fields());
        w.write_record(&row).map_err(csv_err)?;
    }
    finish_csv(w)
}

pub fn samples_csv(s: &SampledSignal) -> Result<String> {
    points_csv(s.points(), s.values())
}

/// Parsed numeric CSV: header names and rows with their file line numbers.
struct NumericTable {
    headers: Vec<String>,
    rows: Vec<(usize, Vec<f64>)>,
}

fn read_numeric<R: Read>(reader: R) -> Result<NumericTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            column: String::new(),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            column: String::new(),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row: line,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let values = record
            .iter()
            .zip(&headers)
            .map(|(field, name)| {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    row: line,
                    column: name.clone(),
                    message: format!("cannot parse {field:?} as a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row: line,
                        column: name.clone(),
                        message: format!("non-finite value {field:?}"),
                    });
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, values));
    }
    Ok(NumericTable { headers, rows })
}

/// Positions of `names` in the header, as an error naming the first missing one.
fn locate(headers: &[String], names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|name| {
            headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
                row: 1,
                column: name.clone(),
                message: format!("missing column {name:?}"),
            })
        })
        .collect()
}

fn point_dim(headers: &[String]) -> Result<usize> {
    match (headers.iter().any(|h| h == "x1"), headers.iter().any(|h| h == "x2")) {
        (true, true) => Ok(2),
        (true, false) => Ok(1),
        _ => Err(Error::Parse {
            row: 1,
            column: "x1".into(),
            message: "missing column \"x1\"".into(),
        }),
    }
}

/// Points from a CSV with columns `x1[,x2]`; other columns are ignored.
pub fn read_points<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let table = read_numeric(reader)?;
    let dim = point_dim(&table.headers)?;
    let idx = locate(&table.headers, &coordinate_headers(dim))?;
    Ok(table
        .rows
        .iter()
        .map(|(_, r)| idx.iter().map(|&i| r[i]).collect())
        .collect())
}

/// Samples from a CSV with columns `x1[,x2],w,x,y,z`.
pub fn read_samples<R: Read>(reader: R) -> Result<SampledSignal> {
    let table = read_numeric(reader)?;
    let dim = point_dim(&table.headers)?;
    let idx = locate(&table.headers, &coordinate_headers(dim))?;
    let value_names: Vec<String> = VALUE_HEADERS.iter().map(|s| s.to_string()).collect();
    let vidx = locate(&table.headers, &value_names)?;
    let mut points = Vec::with_capacity(table.rows.len());
    let mut values = Vec::with_capacity(table.rows.len());
    for (_, r) in &table.rows {
        points.push(idx.iter().map(|&i| r[i]).collect());
        values.push(Quaternion::new(r[vidx[0]], r[vidx[1]], r[vidx[2]], r[vidx[3]]));
    }
    SampledSignal::new(points, values)
}

/// Tabulated kernel from a CSV with columns `w1[,w2],x1[,x2],w,x,y,z`.
pub fn read_table<R: Read>(reader: R) -> Result<TabulatedKernel> {
    let table = read_numeric(reader)?;
    let dim = if table.headers.iter().any(|h| h == "w2") { 2 } else { 1 };
    let mut coord_names: Vec<String> = (1..=dim).map(|a| format!("w{a}")).collect();
    coord_names.extend(coordinate_headers(dim));
    let cidx = locate(&table.headers, &coord_names)?;
    let value_names: Vec<String> = VALUE_HEADERS.iter().map(|s| s.to_string()).collect();
    let vidx = locate(&table.headers, &value_names)?;
    let rows: Vec<(Vec<f64>, Quaternion)> = table
        .rows
        .iter()
        .map(|(_, r)| {
            (
                cidx.iter().map(|&i| r[i]).collect(),
                Quaternion::new(r[vidx[0]], r[vidx[1]], r[vidx[2]], r[vidx[3]]),
            )
        })
        .collect();
    TabulatedKernel::from_rows(dim, &rows)
}

/// Tabulated kernel as CSV, the inverse of [`read_table`].
pub fn table_csv(table: &TabulatedKernel) -> Result<String> {
    let dim = table.dim();
    let mut w = csv_writer();
    let mut header: Vec<String> = (1..=dim).map(|a| format!("w{a}")).collect();
    header.extend(coordinate_headers(dim));
    header.extend(VALUE_HEADERS.iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    let axes = table.axes();
    let total: usize = axes.iter().map(Vec::len).product();
    for (flat, value) in table.values().iter().enumerate().take(total) {
        let mut rem = flat;
        let mut coords = vec![0.0; axes.len()];
        for (a, axis) in axes.iter().enumerate().rev() {
            coords[a] = axis[rem % axis.len()];
            rem /= axis.len();
        }
        let mut row: Vec<String> = coords.iter().map(|&c| format_f64(c)).collect();
        row.extend(value.csv_fields());
        w.write_record(&row).map_err(csv_err)?;
    }
    finish_csv(w)
}

/// Writes `contents` to a temporary sibling of `path` and renames it into
/// place, so `path` is either absent, the old file or the complete new file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("invalid output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::Io(format!("{}: {e}", path.display())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::nystrom::{eigensystem, NystromOperator};

    #[test]
    fn spectrum_json_shape() {
        let spec = KernelSpec::sinc1d(2.0, 1.0).unwrap();
        let op = NystromOperator::build(&spec, &spec.grid(16).unwrap()).unwrap();
        let b = eigensystem(&op, 1e-6).unwrap();
        let json = spectrum_json(&b).unwrap();
        let parsed: Vec<SpectrumRecord> = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.len(), b.len());
        assert_eq!(parsed[0].mu, b.mu()[0]);
        assert_eq!(parsed[0].lambda, b.lambda()[0].to_array());
    }

    #[test]
    fn eigenfunction_csv_columns() {
        let spec = KernelSpec::qft2d(1.0, 1.0).unwrap();
        let op = NystromOperator::build(&spec, &spec.grid(3).unwrap()).unwrap();
        let b = eigensystem(&op, 0.5).unwrap();
        let csv = eigenfunctions_csv(&b).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "node_index,x1,x2,n,w,x,y,z");
        assert_eq!(lines.count(), 9 * b.len());
    }

    #[test]
    fn samples_round_trip_exactly() {
        let points = vec![vec![0.1, -2.0], vec![1.0 / 3.0, 7.5]];
        let values = vec![Quaternion::new(1.0 / 7.0, -2.0, 1e-300, 3.0), Quaternion::new(0.1, 0.2, 0.3, 0.4)];
        let text = points_csv(&points, &values).unwrap();
        let s = read_samples(text.as_bytes()).unwrap();
        assert_eq!(s.points(), &points[..]);
        assert_eq!(s.values(), &values[..]);
        assert_eq!(read_points(text.as_bytes()).unwrap(), points);
    }

    #[test]
    fn parse_errors_name_row_and_column() {
        let text = "x1,w,x,y,z\n0.0,1,0,0,0\n1.0,1,abc,0,0\n";
        match read_samples(text.as_bytes()).unwrap_err() {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "x");
            }
            e => panic!("{e}"),
        }
        let text = "x1,w,x,y,z\n0.0,1,0,0\n";
        assert!(matches!(read_samples(text.as_bytes()), Err(Error::Parse { row: 2, .. })));
        let text = "x1,w,x,y\n0.0,1,0,0\n";
        match read_samples(text.as_bytes()).unwrap_err() {
            Error::Parse { column, .. } => assert_eq!(column, "z"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn table_round_trip() {
        let axis = vec![-1.0, 0.0, 1.0];
        let values: Vec<Quaternion> = (0..9).map(|k| Quaternion::new(k as f64, 0.5, 0.0, -1.0)).collect();
        let t = TabulatedKernel::new(1, vec![axis.clone(), axis], values).unwrap();
        let text = table_csv(&t).unwrap();
        let back = read_table(text.as_bytes()).unwrap();
        assert_eq!(back.axes(), t.axes());
        assert_eq!(back.values(), t.values());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = std::env::temp_dir().join(format!("qsample-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("out.json");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
        let leftovers = std::fs::read_dir(&dir).unwrap().count();
        assert_eq!(leftovers, 1);
        std::fs::remove_dir_all(&dir).unwrap();
        assert!(write_atomic(&dir.join("missing/out.json"), b"x").is_err());
    }
}
