use std::io::Read;

use crate::error::{Error, Result};
use crate::model::{Dataset, Input};

/// Reads a dataset from CSV. The header is either `label,y` (cell labels)
/// or `x1,...,xd,y` (points).
pub fn parse_dataset_csv<R: Read>(r: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let labelled = match cols.as_slice() {
        ["label", "y"] => true,
        [xs @ .., "y"] if !xs.is_empty() && xs.iter().enumerate().all(|(j, c)| *c == format!("x{}", j + 1)) => false,
        _ => return Err(Error::Parse(format!("dataset header must be `label,y` or `x1,...,xd,y`, got {cols:?}"))),
    };
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let field = |j: usize| -> Result<f64> {
            let raw = rec.get(j).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse(format!("row {}: bad number {raw:?}", line + 1)))
        };
        let y = field(cols.len() - 1)?;
        let x = if labelled {
            let raw = rec.get(0).unwrap_or("");
            Input::Label(raw.parse().map_err(|_| Error::Parse(format!("row {}: bad label {raw:?}", line + 1)))?)
        } else {
            Input::Point((0..cols.len() - 1).map(field).collect::<Result<_>>()?)
        };
        inputs.push(x);
        outputs.push(y);
    }
    Dataset::new(inputs, outputs)
}

pub fn write_dataset_csv<W: std::io::Write>(w: W, data: &Dataset) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Parse(e.to_string());
    let header: Vec<String> = match data.inputs().first() {
        Some(Input::Point(p)) => (1..=p.len()).map(|j| format!("x{j}")).chain(["y".into()]).collect(),
        _ => vec!["label".into(), "y".into()],
    };
    out.write_record(&header).map_err(err)?;
    for (x, y) in data.inputs().iter().zip(data.outputs()) {
        let mut row: Vec<String> = match x {
            Input::Label(k) => vec![k.to_string()],
            Input::Point(p) => p.iter().map(|v| format!("{v:?}")).collect(),
        };
        row.push(format!("{y:?}"));
        out.write_record(&row).map_err(err)?;
    }
    out.flush().map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labelled_and_point_datasets() {
        let d = parse_dataset_csv("label,y\n0,1.5\n2, -3\n".as_bytes()).unwrap();
        assert_eq!(d.inputs(), &[Input::Label(0), Input::Label(2)]);
        assert_eq!(d.outputs(), &[1.5, -3.0]);
        let d = parse_dataset_csv("x1,x2,y\n1,2,3\n4,5,6\n".as_bytes()).unwrap();
        assert_eq!(d.inputs()[1], Input::Point(vec![4.0, 5.0]));
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &d).unwrap();
        assert_eq!(parse_dataset_csv(&buf[..]).unwrap(), d);
    }

    #[test]
    fn rejects_malformed_rows() {
        for text in ["a,y\n1,2\n", "x2,y\n1,2\n", "label,y\n-1,2\n", "x1,y\n1,inf\n", "x1,y\n1\n", "y\n1\n"] {
            assert!(parse_dataset_csv(text.as_bytes()).is_err(), "{text:?}");
        }
        assert!(parse_dataset_csv("label,y\n".as_bytes()).unwrap().is_empty());
    }
}
