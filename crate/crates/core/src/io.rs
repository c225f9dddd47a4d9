//! File formats: dataset CSV in, CSV and JSON out.
//!
//! Every float written by this module uses 17 significant digits, so output
//! files are byte-identical across reruns and parse back to the same `f64`.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::onedim::{CobwebSegment, SegmentKind};

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Parses dataset CSV: one example per row, an optional header (detected by a
/// non-numeric first row), and an optional final `label` column with values in
/// `{-1, +1}` that is folded into the row. Lines starting with `#` are skipped.
/// A label column is only recognized through the header.
pub fn parse_dataset_csv(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut labeled = false;
    let mut first = true;
    for record in reader.records() {
        let record = record
            .map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line() as usize), msg: e.to_string() })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) => {
                if labeled {
                    let (x, y) = values.split_at(values.len().saturating_sub(1));
                    if x.is_empty() {
                        return Err(Error::Parse { line, msg: "row has only a label".into() });
                    }
                    rows.push(x.to_vec());
                    labels.push(y[0]);
                } else {
                    rows.push(values);
                }
            }
            Err(_) if first => {
                labeled = record.iter().next_back().is_some_and(|h| h.eq_ignore_ascii_case("label"));
            }
            Err(e) => return Err(Error::Parse { line, msg: e.to_string() }),
        }
        first = false;
    }
    if rows.is_empty() {
        return Err(Error::InvalidDataset("no examples found".into()));
    }
    if labeled {
        Dataset::from_labeled_rows(&rows, &labels)
    } else {
        Dataset::from_rows(&rows)
    }
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset_csv(&std::fs::read_to_string(path)?)
}

/// Label-folded rows with an `x0,x1,..` header.
pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut out = (0..data.dim()).map(|j| format!("x{j}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for row in data.rows() {
        out.push_str(&row.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

/// Serde adapter storing a [`Dataset`] as inline CSV text.
pub mod dataset_csv {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(data: &Dataset, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&dataset_to_csv(data))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Dataset, D::Error> {
        let text = String::deserialize(d)?;
        parse_dataset_csv(&text).map_err(serde::de::Error::custom)
    }
}

/// JSON formatter that prints floats with 17 significant digits.
pub struct Fixed17<F>(pub F);

macro_rules! delegate {
    ($($name:ident),*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> { self.0.$name(w) })*
    };
}

impl<F: Formatter> Formatter for Fixed17<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    delegate!(begin_array, end_array, begin_object, end_object, end_array_value, end_object_value, begin_object_value);

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
}

/// Indented JSON with fixed float formatting.
pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Single-line JSON with fixed float formatting.
pub fn to_json_line<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed17(serde_json::ser::CompactFormatter));
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Columns `step, norm`, one per sampled coordinate, and `loss` when recorded.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string(), "norm".to_string()];
    header.extend(traj.sampled_coords.keys().map(|j| format!("w{j}")));
    if traj.loss_series.is_some() {
        header.push("loss".into());
    }
    w.write_record(&header).map_err(csv_err)?;
    for t in 0..traj.norm_series.len() {
        let mut rec = vec![t.to_string(), fmt_f64(traj.norm_series[t])];
        rec.extend(traj.sampled_coords.values().map(|s| fmt_f64(s[t])));
        if let Some(l) = &traj.loss_series {
            rec.push(fmt_f64(l[t]));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `w_from, w_to, segment_kind`.
pub fn write_cobweb_csv<W: Write>(segments: &[CobwebSegment], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["w_from", "w_to", "segment_kind"]).map_err(csv_err)?;
    for s in segments {
        let kind = match s.segment_kind {
            SegmentKind::Vertical => "vertical",
            SegmentKind::Diagonal => "diagonal",
        };
        w.write_record([fmt_f64(s.w_from), fmt_f64(s.w_to), kind.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `frequency, power`.
pub fn write_spectrum_csv<W: Write>(spectrum: &[(f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frequency", "power"]).map_err(csv_err)?;
    for (f, p) in spectrum {
        w.write_record([fmt_f64(*f), fmt_f64(*p)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line: 0, msg: format!("{other:?}") },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plain_and_labeled() {
        let d = parse_dataset_csv("1,2\n3,4\n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.row(1), &[3.0, 4.0]);
        let d = parse_dataset_csv("# comment\nx,y,label\n1,2,1\n3,4,-1\n").unwrap();
        assert_eq!(d.dim(), 2);
        assert_eq!(d.row(1), &[-3.0, -4.0]);
        let d = parse_dataset_csv("a,b\n 1.5 , -2e-1\n").unwrap();
        assert_eq!(d.row(0), &[1.5, -0.2]);
    }

    #[test]
    fn parse_errors_name_the_line() {
        match parse_dataset_csv("1,2\n3,oops\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_dataset_csv("x,label\n1,0.5\n").is_err());
        assert!(parse_dataset_csv("1,2\n3\n").is_err());
        assert!(parse_dataset_csv("x,y\n").is_err());
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let d = Dataset::from_rows(&[[0.1, 1.0 / 3.0], [-2.5e-300, 7.0]]).unwrap();
        assert_eq!(parse_dataset_csv(&dataset_to_csv(&d)).unwrap(), d);
    }

    #[test]
    fn json_floats_have_seventeen_digits() {
        let s = to_json_line(&serde_json::json!({"a": 0.1, "b": [1.0, f64::NAN], "n": 3})).unwrap();
        assert_eq!(s, r#"{"a":1.0000000000000001e-1,"b":[1.0000000000000000e0,null],"n":3}"#);
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
        let pretty = to_json_pretty(&vec![0.5]).unwrap();
        assert_eq!(pretty, "[\n  5.0000000000000000e-1\n]");
    }
}
