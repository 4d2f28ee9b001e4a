//! CSV and JSON formats shared by the CLI and the harness.
//!
//! Paths use the header `t,x` with one row per grid point, written with 17
//! significant digits so that a round trip is bit-exact.

use std::io::{Read, Write};

use serde::Serialize;

use crate::approx_error::ErrorCurvePoint;
use crate::error::{Error, Result};
use crate::simulate::SamplePath;
use crate::variation::RrvPath;

/// Relative tolerance on the spacing of input time stamps.
pub const EQUIDISTANCE_TOL: f64 = 1e-9;

pub fn write_path_csv<W: Write>(path: &SamplePath, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x"])?;
    for (i, x) in path.values().iter().enumerate() {
        w.write_record([format!("{:.16e}", path.time(i)), format!("{x:.16e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `t,x` CSV and checks that the time stamps are equidistant.
///
/// The step is taken as `(t_last - t_first) / (n - 1)`; every spacing must
/// agree with it to [`EQUIDISTANCE_TOL`] relative.
pub fn read_path_csv<R: Read>(input: R) -> Result<SamplePath> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Data(format!("missing column '{name}' (expected header t,x)")))
    };
    let (ti, xi) = (col("t")?, col("x")?);
    let mut t = Vec::new();
    let mut x = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            let s = rec.get(i).unwrap_or("").trim();
            s.parse::<f64>()
                .map_err(|_| Error::Data(format!("row {}: cannot parse '{s}' as a number", line + 2)))
        };
        t.push(parse(ti)?);
        x.push(parse(xi)?);
    }
    if t.len() < 3 {
        return Err(Error::Data(format!("a path needs at least 3 rows, got {}", t.len())));
    }
    let n = t.len() - 1;
    let step = (t[n] - t[0]) / n as f64;
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Data("time stamps must be strictly increasing".into()));
    }
    for (i, w) in t.windows(2).enumerate() {
        let d = w[1] - w[0];
        if (d - step).abs() > EQUIDISTANCE_TOL * step {
            return Err(Error::Data(format!(
                "grid is not equidistant at row {}: spacing {d:e} vs step {step:e}",
                i + 3
            )));
        }
    }
    SamplePath::new(step, x).map_err(|e| Error::Data(e.to_string()))
}

pub fn write_rrv_csv<W: Write>(rrv: &RrvPath, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "rrv"])?;
    for (t, v) in rrv.times.iter().zip(&rrv.values) {
        w.write_record([format!("{t:.16e}"), format!("{v:.16e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Header `N,alpha,lambda,c1,c2,c3,mse,rmse`.
pub fn write_error_curve_csv<W: Write>(points: &[ErrorCurvePoint], out: W) -> Result<()> {
    write_records(points, out)
}

/// Serializes rows with their field names as the header.
pub fn write_records<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize, W: Write>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_round_trip_is_exact() {
        let values = vec![0.1, -1.0 / 3.0, std::f64::consts::PI, 1e-300, -2.5e12];
        let path = SamplePath::new(0.1, values.clone()).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&path, &mut buf).unwrap();
        let back = read_path_csv(buf.as_slice()).unwrap();
        assert_eq!(back.values(), values.as_slice());
        assert!((back.step() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_uneven_grid() {
        let csv = "t,x\n0,1\n0.1,2\n0.25,3\n0.3,4\n";
        assert!(matches!(read_path_csv(csv.as_bytes()), Err(Error::Data(_))));
    }

    #[test]
    fn accepts_tiny_jitter_and_column_order() {
        let csv = "x,t\n1,0\n2,0.1000000000001\n3,0.2\n";
        let p = read_path_csv(csv.as_bytes()).unwrap();
        assert_eq!(p.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn rejects_short_and_malformed_input() {
        assert!(matches!(
            read_path_csv("t,x\n0,1\n1,2\n".as_bytes()),
            Err(Error::Data(_))
        ));
        assert!(matches!(
            read_path_csv("t,y\n0,1\n1,2\n2,3\n".as_bytes()),
            Err(Error::Data(_))
        ));
        assert!(matches!(
            read_path_csv("t,x\n0,1\n1,abc\n2,3\n".as_bytes()),
            Err(Error::Data(_))
        ));
    }
}
