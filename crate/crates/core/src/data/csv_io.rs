use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::stl::Trace;

use super::{DataError, Dataset};

/// Reads `trace_id,time,f0,...,f{d-1},label`.
///
/// Rows of a trace need not be contiguous or ordered; traces keep the order
/// of their first row. Within a trace the sorted times must be exactly
/// `0, 1, 2, ...` and the label must not change.
pub fn read_csv(reader: impl Read, provenance: &str) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| DataError::MissingColumn(name.into()));
    let (id_col, time_col, label_col) = (col("trace_id")?, col("time")?, col("label")?);
    let features: Vec<(usize, String)> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| ![id_col, time_col, label_col].contains(i))
        .map(|(i, h)| (i, h.clone()))
        .collect();
    if features.is_empty() {
        return Err(DataError::Invalid("no feature columns".into()));
    }

    struct Pending {
        id: String,
        label: f64,
        rows: Vec<(f64, Vec<f64>)>,
    }
    let mut pending: Vec<Pending> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64, DataError> {
            let s = rec.get(i).unwrap_or("");
            s.parse::<f64>().map_err(|_| DataError::Parse {
                line,
                msg: format!("column {:?}: {s:?} is not a number", header[i]),
            })
        };
        let id = rec.get(id_col).unwrap_or("").to_owned();
        let time = num(time_col)?;
        let label = num(label_col)?;
        let values = features.iter().map(|(i, _)| num(*i)).collect::<Result<Vec<_>, _>>()?;
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            pending.push(Pending {
                id: id.clone(),
                label,
                rows: Vec::new(),
            });
            pending.len() - 1
        });
        let p = &mut pending[slot];
        if p.label != label {
            return Err(DataError::LabelDisagreement { trace: id });
        }
        p.rows.push((time, values));
    }
    if pending.is_empty() {
        return Err(DataError::Empty);
    }

    let mut traces = Vec::with_capacity(pending.len());
    for mut p in pending {
        p.rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        if p.rows.iter().enumerate().any(|(i, (t, _))| *t != i as f64) {
            return Err(DataError::NonUniformTime { trace: p.id });
        }
        let rows = p.rows.into_iter().map(|(_, v)| v).collect();
        traces.push(Trace::new(p.id, rows, p.label)?);
    }
    Dataset::new(traces, features.into_iter().map(|(_, h)| h).collect(), provenance)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    read_csv(File::open(path)?, &path.display().to_string())
}

/// Writes one row per (trace, step). Floats use the shortest representation
/// that parses back to the same value.
pub fn write_csv(ds: &Dataset, writer: impl Write) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["trace_id".to_owned(), "time".to_owned()];
    header.extend(ds.feature_names.iter().cloned());
    header.push("label".into());
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(header.len());
    for t in &ds.traces {
        for (step, row) in t.rows().enumerate() {
            rec.clear();
            rec.push(t.id.clone());
            rec.push(step.to_string());
            rec.extend(row.iter().map(f64::to_string));
            rec.push(t.label.to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    write_csv(ds, File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_traces() {
        let text = "trace_id,time,v,label\na,0,1.5,1\nb,0,2,-1\na,1,2.5,1\nb,1,3,-1\n";
        let ds = read_csv(text.as_bytes(), "mem").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.feature_names, vec!["v"]);
        assert_eq!(ds.traces[0].values(), &[1.5, 2.5]);
        assert_eq!(ds.traces[1].label, -1.0);
    }

    #[test]
    fn missing_label_column() {
        let text = "trace_id,time,v\na,0,1\n";
        assert!(matches!(read_csv(text.as_bytes(), ""), Err(DataError::MissingColumn(c)) if c == "label"));
    }

    #[test]
    fn non_uniform_time_names_the_trace() {
        let text = "trace_id,time,v,label\nok,0,1,1\nok,1,1,1\nbad,0,1,1\nbad,2,1,1\n";
        match read_csv(text.as_bytes(), "") {
            Err(DataError::NonUniformTime { trace }) => assert_eq!(trace, "bad"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn label_disagreement() {
        let text = "trace_id,time,v,label\na,0,1,1\na,1,1,-1\n";
        assert!(matches!(read_csv(text.as_bytes(), ""), Err(DataError::LabelDisagreement { .. })));
    }

    #[test]
    fn round_trip() {
        let text = "trace_id,time,x,y,label\nt0,0,0.1,-3,0.25\nt0,1,1e-7,4.5,0.25\nt1,0,2,2,-1.5\n";
        let ds = read_csv(text.as_bytes(), "").unwrap();
        let mut out = Vec::new();
        write_csv(&ds, &mut out).unwrap();
        let back = read_csv(out.as_slice(), "").unwrap();
        assert_eq!(back, ds);
    }
}
