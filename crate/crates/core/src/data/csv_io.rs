use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::sources::{SourceEnsemble, SourceHypothesis};
use super::Dataset;
use crate::error::{Error, Result};

const LABEL: &str = "label";

fn parse_cell(cell: &str, line: u64, column: &str) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| {
        Error::Parse(format!(
            "line {line}, column '{column}': '{cell}' is not a number"
        ))
    })?;
    if !v.is_finite() {
        return Err(Error::Validation(format!(
            "line {line}, column '{column}': non-finite value '{cell}'"
        )));
    }
    Ok(v)
}

fn line_of(record: &csv::StringRecord, fallback: u64) -> u64 {
    record.position().map_or(fallback, |p| p.line())
}

/// Reads a labeled dataset: header row required, a `label` column with
/// values `-1`/`1`, every other column a numeric feature.
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Parse("empty file: missing header row".into()));
    }
    let label_at = headers
        .iter()
        .position(|h| h.trim() == LABEL)
        .ok_or_else(|| Error::Validation("missing 'label' column".into()))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label_at)
        .map(|(_, h)| h.trim().to_string())
        .collect();

    let d = feature_names.len();
    let mut values = Vec::new();
    let mut y = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = line_of(&record, row as u64 + 2);
        if record.len() != headers.len() {
            return Err(Error::Parse(format!(
                "line {line}: {} fields, header has {}",
                record.len(),
                headers.len()
            )));
        }
        for (j, cell) in record.iter().enumerate() {
            let v = parse_cell(cell, line, &headers[j])?;
            if j == label_at {
                if v != 1.0 && v != -1.0 {
                    return Err(Error::Validation(format!(
                        "line {line}: label {cell} is not -1 or 1"
                    )));
                }
                y.push(v);
            } else {
                values.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    let x = DMatrix::from_row_slice(y.len(), d, &values);
    Dataset::new(x, y, feature_names)
}

pub fn load_dataset_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(std::fs::File::open(path)?)
}

/// Canonical form: feature columns in order, then `label`.
pub fn write_dataset<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = data.feature_names.iter().map(String::as_str).collect();
    header.push(LABEL);
    w.write_record(&header)?;
    for i in 0..data.m() {
        let mut rec: Vec<String> = data.x.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(data.y[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    write_dataset(std::fs::File::create(path)?, data)
}

/// Reads source hypotheses: header row, optional leading `name` column,
/// then `bias`, then one weight per input feature.
pub fn read_sources<R: Read>(reader: R) -> Result<SourceEnsemble> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Parse(
            "empty sources file: missing header row".into(),
        ));
    }
    let named = headers[0].trim() == "name";
    let bias_at = usize::from(named);
    if headers.get(bias_at).map(str::trim) != Some("bias") {
        return Err(Error::Parse(format!(
            "sources header must start with [name,] bias; got '{}'",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let dim = headers.len() - bias_at - 1;
    let mut hypotheses = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = line_of(&record, row as u64 + 2);
        if record.len() != headers.len() {
            return Err(Error::Dimension(format!(
                "line {line}: source has {} fields, header has {}",
                record.len(),
                headers.len()
            )));
        }
        let name = if named {
            record[0].to_string()
        } else {
            format!("src{row}")
        };
        let bias = parse_cell(&record[bias_at], line, "bias")?;
        let weights = (bias_at + 1..record.len())
            .map(|j| parse_cell(&record[j], line, &headers[j]))
            .collect::<Result<Vec<_>>>()?;
        hypotheses.push(SourceHypothesis {
            name,
            bias,
            weights,
        });
    }
    SourceEnsemble::new(dim, hypotheses)
}

pub fn load_sources_csv(path: impl AsRef<Path>) -> Result<SourceEnsemble> {
    read_sources(std::fs::File::open(path)?)
}

/// Canonical form: `name,bias,w1..wd`.
pub fn write_sources<W: Write>(writer: W, sources: &SourceEnsemble) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["name".to_string(), "bias".to_string()];
    header.extend((1..=sources.dim()).map(|j| format!("w{j}")));
    w.write_record(&header)?;
    for h in sources.hypotheses() {
        let mut rec = vec![h.name.clone(), h.bias.to_string()];
        rec.extend(h.weights.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_sources_csv(path: impl AsRef<Path>, sources: &SourceEnsemble) -> Result<()> {
    write_sources(std::fs::File::create(path)?, sources)
}

/// Precomputed source predictions: `m` rows, one column per source plus
/// `label`. Returned as a dataset whose "features" are the predictions.
pub fn load_predictions_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    load_dataset_csv(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_shape() {
        let d = read_dataset("a,b,label\n1,2,1\n3,4,-1\n5,6.5,1\n".as_bytes()).unwrap();
        assert_eq!((d.m(), d.d()), (3, 2));
        assert_eq!(d.x[(2, 1)], 6.5);
        assert_eq!(d.y, vec![1.0, -1.0, 1.0]);
    }

    #[test]
    fn label_column_anywhere() {
        let d = read_dataset("label,a,b\n1,2,3\n-1,4,5\n".as_bytes()).unwrap();
        assert_eq!(d.feature_names, vec!["a", "b"]);
        assert_eq!(d.x[(1, 0)], 4.0);
    }

    #[test]
    fn bad_label_names_line() {
        let err = read_dataset("a,label\n1,1\n2,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn non_numeric_cell() {
        let err = read_dataset("a,label\n1,1\nx,-1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        assert!(err.to_string().contains("column 'a'"), "{err}");
    }

    #[test]
    fn empty_and_missing_label() {
        assert!(matches!(read_dataset("".as_bytes()), Err(Error::Parse(_))));
        assert!(matches!(
            read_dataset("a,b\n1,2\n".as_bytes()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn sources_with_and_without_names() {
        let s = read_sources("name,bias,w1,w2\nfoo,0.5,1,2\nbar,-1,0,3\n".as_bytes()).unwrap();
        assert_eq!((s.len(), s.dim()), (2, 2));
        assert_eq!(s.hypotheses()[1].name, "bar");
        let s = read_sources("bias,w1\n0.5,1\n".as_bytes()).unwrap();
        assert_eq!((s.len(), s.dim()), (1, 1));
        assert_eq!(s.hypotheses()[0].name, "src0");
    }

    #[test]
    fn sources_inconsistent_width() {
        let err = read_sources("bias,w1,w2\n0.5,1,2\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)), "{err}");
        assert!(read_sources("w1,bias\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn canonical_round_trip() {
        let text = "f1,f2,label\n0.25,-3,1\n1e-7,2.5,-1\n";
        let d = read_dataset(text.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_dataset(&mut out, &d).unwrap();
        let again = read_dataset(out.as_slice()).unwrap();
        assert_eq!(again, d);

        let mut out2 = Vec::new();
        write_dataset(&mut out2, &again).unwrap();
        assert_eq!(out, out2);

        let src = "name,bias,w1,w2\na,0.5,1,-2\nb,0,0.125,3\n";
        let s = read_sources(src.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_sources(&mut out, &s).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), src);
    }
}
