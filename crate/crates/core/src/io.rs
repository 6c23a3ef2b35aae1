//! CSV ingestion and emission. All floats are written as {:.16e} decimal
//! literals (17 significant digits), which round-trip exactly: write → read
//! → write is byte-identical. Holes are written as the literal "NA".

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, StringRecord, Trim, Writer, WriterBuilder};

use crate::error::{Error, Result};
use crate::estimator::{CovarianceSurface, SampleMatrix, StdCurve};
use crate::experiments::{ExperimentReport, ReportRow};
use crate::grid::{DesignGrid, TriangleGrid};

/// Where the design grid of a samples file comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GridPolicy {
    /// First row of the file holds the p design points.
    Header,
    /// No header row; points are (j − 1/2)/p.
    Equidistant,
    /// No header row; points come from a single-column file.
    GridFile(PathBuf),
}

/// Canonical float formatting: 17 significant digits, exact round-trip.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

fn create(path: &Path) -> Result<Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(WriterBuilder::new().from_writer(BufWriter::new(file)))
}

fn csv_error(path: &Path, row_hint: usize, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => {
            // ragged rows land here; csv reports the record's position
            let row = match &kind {
                csv::ErrorKind::UnequalLengths { pos, .. } => {
                    pos.as_ref().map_or(row_hint, |p| p.line() as usize)
                }
                _ => row_hint,
            };
            Error::Parse { row, col: 0, msg: format!("{kind:?}") }
        }
    }
}

fn parse_cell(field: &str, row: usize, col: usize) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::Parse { row, col, msg: format!("not a number: {field:?}") })?;
    if !v.is_finite() {
        return Err(Error::Parse { row, col, msg: format!("not finite: {field:?}") });
    }
    Ok(v)
}

fn parse_row(rec: &StringRecord, row: usize) -> Result<Vec<f64>> {
    rec.iter().enumerate().map(|(c, field)| parse_cell(field, row, c + 1)).collect()
}

fn read_records(path: &Path) -> Result<Vec<(usize, StringRecord)>> {
    let mut rdr = ReaderBuilder::new().has_headers(false).trim(Trim::All).from_reader(open(path)?);
    let mut out = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, idx + 1, e))?;
        // a lone empty field is a blank line; skip it (trailing newlines)
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        out.push((idx + 1, rec));
    }
    Ok(out)
}

/// Single-column grid file: one design point per line.
pub fn read_grid_file(path: &Path) -> Result<DesignGrid> {
    let mut pts = Vec::new();
    for (row, rec) in read_records(path)? {
        if rec.len() != 1 {
            return Err(Error::Parse {
                row,
                col: 2,
                msg: format!("grid file must have one column, found {}", rec.len()),
            });
        }
        pts.push(parse_cell(&rec[0], row, 1)?);
    }
    DesignGrid::new(pts)
}

fn header_grid(rec: &StringRecord, row: usize) -> Result<DesignGrid> {
    let pts = parse_row(rec, row)?;
    for (c, &x) in pts.iter().enumerate() {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Parse { row, col: c + 1, msg: format!("design point {x} outside [0, 1]") });
        }
        if c > 0 && x <= pts[c - 1] {
            return Err(Error::Parse {
                row,
                col: c + 1,
                msg: format!("header not strictly increasing at {x}"),
            });
        }
    }
    DesignGrid::new(pts)
}

/// Read an n×p curves file. Rows are curves; the grid comes from the header
/// row, the equidistant rule, or an explicit grid file, per `policy`.
pub fn read_samples(path: &Path, policy: &GridPolicy) -> Result<(SampleMatrix, DesignGrid)> {
    let records = read_records(path)?;
    let mut rows = Vec::new();
    let mut grid_from_header = None;
    for (pos, (row, rec)) in records.iter().enumerate() {
        if pos == 0 && *policy == GridPolicy::Header {
            grid_from_header = Some(header_grid(rec, *row)?);
            continue;
        }
        rows.push(parse_row(rec, *row)?);
    }
    let samples = SampleMatrix::from_rows(rows)?;
    let grid = match policy {
        GridPolicy::Header => grid_from_header.expect("header parsed above"),
        GridPolicy::Equidistant => DesignGrid::equidistant(samples.p())?,
        GridPolicy::GridFile(gp) => read_grid_file(gp)?,
    };
    if grid.len() != samples.p() {
        return Err(Error::invalid(format!(
            "grid has {} points but the samples have p = {}",
            grid.len(),
            samples.p()
        )));
    }
    Ok((samples, grid))
}

/// Write curves, optionally preceded by a header row of design points.
pub fn write_samples(path: &Path, samples: &SampleMatrix, grid: Option<&DesignGrid>) -> Result<()> {
    let mut wtr = create(path)?;
    if let Some(g) = grid {
        wtr.write_record(g.points().iter().map(|&x| fmt_float(x)))
            .map_err(|e| csv_error(path, 1, e))?;
    }
    for i in 0..samples.n() {
        wtr.write_record(samples.row(i).iter().map(|&v| fmt_float(v)))
            .map_err(|e| csv_error(path, i + 2, e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

/// Long-format surface: header "x,y,value", one row per eval point (x ≤ y),
/// holes as "NA".
pub fn write_surface(path: &Path, surface: &CovarianceSurface) -> Result<()> {
    let mut wtr = create(path)?;
    wtr.write_record(["x", "y", "value"]).map_err(|e| csv_error(path, 1, e))?;
    for (&(x, y), v) in surface.evals().pairs().iter().zip(surface.values()) {
        let val = match v {
            Some(v) => fmt_float(*v),
            None => "NA".to_string(),
        };
        wtr.write_record([fmt_float(x), fmt_float(y), val]).map_err(|e| csv_error(path, 0, e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

pub fn read_surface(path: &Path) -> Result<CovarianceSurface> {
    let records = read_records(path)?;
    if records.is_empty() {
        return Err(Error::Parse { row: 1, col: 1, msg: "empty surface file".to_string() });
    }
    let (hrow, header) = &records[0];
    if header.len() != 3 || &header[0] != "x" || &header[1] != "y" || &header[2] != "value" {
        return Err(Error::Parse {
            row: *hrow,
            col: 1,
            msg: "surface header must be exactly \"x,y,value\"".to_string(),
        });
    }
    let mut pairs = Vec::with_capacity(records.len() - 1);
    let mut values = Vec::with_capacity(records.len() - 1);
    for (row, rec) in &records[1..] {
        if rec.len() != 3 {
            return Err(Error::Parse {
                row: *row,
                col: rec.len().min(3) + 1,
                msg: format!("expected 3 columns, found {}", rec.len()),
            });
        }
        let x = parse_cell(&rec[0], *row, 1)?;
        let y = parse_cell(&rec[1], *row, 2)?;
        pairs.push((x, y));
        values.push(if &rec[2] == "NA" { None } else { Some(parse_cell(&rec[2], *row, 3)?) });
    }
    let evals = TriangleGrid::from_pairs(pairs)?;
    CovarianceSurface::from_parts(evals, values, None)
}

/// Header "x,sd", one row per diagonal point.
pub fn write_std_curve(path: &Path, curve: &StdCurve) -> Result<()> {
    let mut wtr = create(path)?;
    wtr.write_record(["x", "sd"]).map_err(|e| csv_error(path, 1, e))?;
    for &(x, sd) in &curve.points {
        wtr.write_record([fmt_float(x), fmt_float(sd)]).map_err(|e| csv_error(path, 0, e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

pub fn read_std_curve(path: &Path) -> Result<StdCurve> {
    let records = read_records(path)?;
    if records.is_empty() {
        return Err(Error::Parse { row: 1, col: 1, msg: "empty std-curve file".to_string() });
    }
    let (hrow, header) = &records[0];
    if header.len() != 2 || &header[0] != "x" || &header[1] != "sd" {
        return Err(Error::Parse {
            row: *hrow,
            col: 1,
            msg: "std-curve header must be exactly \"x,sd\"".to_string(),
        });
    }
    let mut points = Vec::with_capacity(records.len() - 1);
    for (row, rec) in &records[1..] {
        if rec.len() != 2 {
            return Err(Error::Parse {
                row: *row,
                col: rec.len().min(2) + 1,
                msg: format!("expected 2 columns, found {}", rec.len()),
            });
        }
        points.push((parse_cell(&rec[0], *row, 1)?, parse_cell(&rec[1], *row, 2)?));
    }
    Ok(StdCurve { points, clamped: 0 })
}

/// Long-format report: "experiment,n,p,h,m,rep,metric,value"; summary rows
/// leave rep empty.
pub fn write_report(path: &Path, report: &ExperimentReport) -> Result<()> {
    let mut wtr = create(path)?;
    wtr.write_record(["experiment", "n", "p", "h", "m", "rep", "metric", "value"])
        .map_err(|e| csv_error(path, 1, e))?;
    for row in report.rows() {
        let rep = row.rep.map_or(String::new(), |r| r.to_string());
        wtr.write_record([
            row.experiment.clone(),
            row.n.to_string(),
            row.p.to_string(),
            fmt_float(row.h),
            row.m.to_string(),
            rep,
            row.metric.clone(),
            fmt_float(row.value),
        ])
        .map_err(|e| csv_error(path, 0, e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<ExperimentReport> {
    let records = read_records(path)?;
    if records.is_empty() {
        return Err(Error::Parse { row: 1, col: 1, msg: "empty report file".to_string() });
    }
    let expect = ["experiment", "n", "p", "h", "m", "rep", "metric", "value"];
    let (hrow, header) = &records[0];
    if header.len() != 8 || header.iter().zip(expect).any(|(a, b)| a != b) {
        return Err(Error::Parse {
            row: *hrow,
            col: 1,
            msg: format!("report header must be exactly {:?}", expect.join(",")),
        });
    }
    let parse_usize = |field: &str, row: usize, col: usize| -> Result<usize> {
        field
            .parse()
            .map_err(|_| Error::Parse { row, col, msg: format!("not an integer: {field:?}") })
    };
    let mut report = ExperimentReport::new();
    for (row, rec) in &records[1..] {
        if rec.len() != 8 {
            return Err(Error::Parse {
                row: *row,
                col: rec.len().min(8) + 1,
                msg: format!("expected 8 columns, found {}", rec.len()),
            });
        }
        let rep = if rec[5].is_empty() { None } else { Some(parse_usize(&rec[5], *row, 6)?) };
        report.push(ReportRow {
            experiment: rec[0].to_string(),
            n: parse_usize(&rec[1], *row, 2)?,
            p: parse_usize(&rec[2], *row, 3)?,
            h: parse_cell(&rec[3], *row, 4)?,
            m: parse_usize(&rec[4], *row, 5)?,
            rep,
            metric: rec[6].to_string(),
            value: parse_cell(&rec[7], *row, 8)?,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::estimate;
    use crate::grid::TriangleGrid;
    use crate::kernels::{KernelKind, PolyOrder};
    use crate::rng::RngSpec;
    use crate::sim::ProcessSpec;
    use crate::weights::{PairDomain, SmootherConfig};
    use std::fs;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -0.0, 1.0 / 3.0, 2.5e-17, -123.456, f64::MIN_POSITIVE, 1e300] {
            let s = fmt_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{v} → {s}");
            assert_eq!(fmt_float(back), s);
        }
    }

    #[test]
    fn equidistant_policy_small_file() {
        let dir = tmp();
        let path = dir.path().join("d.csv");
        fs::write(&path, "1.0,2.0\n3.0,4.0\n5.0,6.0\n").unwrap();
        let (samples, grid) = read_samples(&path, &GridPolicy::Equidistant).unwrap();
        assert_eq!((samples.n(), samples.p()), (3, 2));
        assert_eq!(grid.points(), &[0.25, 0.75]);
        assert_eq!(samples.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn header_policy_reads_grid() {
        let dir = tmp();
        let path = dir.path().join("d.csv");
        fs::write(&path, "0.1,0.9\n1.0,2.0\n3.0,4.0\n").unwrap();
        let (samples, grid) = read_samples(&path, &GridPolicy::Header).unwrap();
        assert_eq!(samples.n(), 2);
        assert_eq!(grid.points(), &[0.1, 0.9]);
    }

    #[test]
    fn non_increasing_header_is_parse_error_with_position() {
        let dir = tmp();
        let path = dir.path().join("d.csv");
        fs::write(&path, "0.9,0.1\n1.0,2.0\n").unwrap();
        match read_samples(&path, &GridPolicy::Header) {
            Err(Error::Parse { row, col, .. }) => assert_eq!((row, col), (1, 2)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_cell_reports_row_and_column() {
        let dir = tmp();
        let path = dir.path().join("d.csv");
        fs::write(&path, "1.0,2.0\n3.0,oops\n").unwrap();
        match read_samples(&path, &GridPolicy::Equidistant) {
            Err(Error::Parse { row, col, .. }) => assert_eq!((row, col), (2, 2)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_row_is_parse_error() {
        let dir = tmp();
        let path = dir.path().join("d.csv");
        fs::write(&path, "1.0,2.0\n3.0\n").unwrap();
        assert!(matches!(read_samples(&path, &GridPolicy::Equidistant), Err(Error::Parse { .. })));
    }

    #[test]
    fn grid_file_policy() {
        let dir = tmp();
        let gpath = dir.path().join("g.csv");
        let dpath = dir.path().join("d.csv");
        fs::write(&gpath, "0.2\n0.7\n").unwrap();
        fs::write(&dpath, "1.0,2.0\n3.0,4.0\n").unwrap();
        let (_, grid) = read_samples(&dpath, &GridPolicy::GridFile(gpath.clone())).unwrap();
        assert_eq!(grid.points(), &[0.2, 0.7]);

        let gbad = dir.path().join("g3.csv");
        fs::write(&gbad, "0.2\n0.5\n0.7\n").unwrap();
        assert!(read_samples(&dpath, &GridPolicy::GridFile(gbad)).is_err());
    }

    #[test]
    fn samples_round_trip_is_exact_and_byte_identical() {
        let dir = tmp();
        let path = dir.path().join("d.csv");
        let path2 = dir.path().join("d2.csv");
        let grid = DesignGrid::equidistant(4).unwrap();
        let samples = ProcessSpec::Ou { theta: 3.0, sigma: 2.0 }.simulate(5, &grid, RngSpec::new(2)).unwrap();
        write_samples(&path, &samples, Some(&grid)).unwrap();
        let (back, bgrid) = read_samples(&path, &GridPolicy::Header).unwrap();
        assert_eq!(back, samples);
        assert_eq!(bgrid.points(), grid.points());
        write_samples(&path2, &back, Some(&bgrid)).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn surface_round_trip_with_hole() {
        let dir = tmp();
        let p1 = dir.path().join("s.csv");
        let p2 = dir.path().join("s2.csv");
        let evals = TriangleGrid::from_pairs(vec![(0.1, 0.4), (0.25, 0.25), (0.3, 0.9)]).unwrap();
        let surface =
            CovarianceSurface::from_parts(evals, vec![Some(1.5), None, Some(-2.0 / 3.0)], None).unwrap();
        write_surface(&p1, &surface).unwrap();
        let text = fs::read_to_string(&p1).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().filter(|l| l.ends_with(",NA")).count(), 1);
        let back = read_surface(&p1).unwrap();
        assert_eq!(back.values(), surface.values());
        write_surface(&p2, &back).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn design_pair_surface_has_expected_line_count() {
        let dir = tmp();
        let path = dir.path().join("s.csv");
        let grid = DesignGrid::equidistant(50).unwrap();
        let samples = ProcessSpec::TwoTerm.simulate(6, &grid, RngSpec::new(5)).unwrap();
        let cfg =
            SmootherConfig::new(PolyOrder::new(1), 0.3, KernelKind::EpanechnikovProduct, PairDomain::UpperTriangle)
                .unwrap();
        let surface = estimate(&samples, &grid, &cfg, &TriangleGrid::design_pairs(&grid)).unwrap();
        write_surface(&path, &surface).unwrap();
        // p(p+1)/2 pairs plus the header line
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 1276);
    }

    #[test]
    fn std_curve_round_trip() {
        let dir = tmp();
        let p1 = dir.path().join("c.csv");
        let p2 = dir.path().join("c2.csv");
        let curve = StdCurve { points: vec![(0.25, 1.5), (0.75, 0.1)], clamped: 0 };
        write_std_curve(&p1, &curve).unwrap();
        let back = read_std_curve(&p1).unwrap();
        assert_eq!(back.points, curve.points);
        write_std_curve(&p2, &back).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn report_round_trip() {
        let dir = tmp();
        let p1 = dir.path().join("r.csv");
        let p2 = dir.path().join("r2.csv");
        let mut report = ExperimentReport::new();
        report.add("sweep", 100, 50, 0.3, 1, Some(0), "sup_error", 0.123456789123456789);
        report.add("sweep", 100, 50, 0.3, 1, None, "mean_sup_error", 1.0 / 7.0);
        write_report(&p1, &report).unwrap();
        let back = read_report(&p1).unwrap();
        assert_eq!(back, report);
        write_report(&p2, &back).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn missing_file_is_io_error_with_path() {
        let err = read_samples(Path::new("/nonexistent/x.csv"), &GridPolicy::Equidistant).unwrap_err();
        match err {
            Error::Io { path, .. } => assert!(path.to_string_lossy().contains("nonexistent")),
            other => panic!("expected io error, got {other:?}"),
        }
    }
}
