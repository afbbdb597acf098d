//! Tabular datasets: numeric feature columns, a binary `y` column and an
//! optional `group_id` column.

use std::io::{Read, Write};

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};

pub const LABEL_COLUMN: &str = "y";
pub const GROUP_COLUMN: &str = "group_id";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub group_ids: Option<Vec<String>>,
}

/// Validate 0/1 labels given as reals.
pub fn binary_labels(values: &[f64]) -> Result<Vec<u8>> {
    values
        .iter()
        .enumerate()
        .map(|(row, &value)| {
            if value == 0.0 {
                Ok(0)
            } else if value == 1.0 {
                Ok(1)
            } else {
                Err(Error::NonBinaryLabel { row, value })
            }
        })
        .collect()
}

pub(crate) fn check_labels(y: &[u8]) -> Result<()> {
    match y.iter().position(|&v| v > 1) {
        Some(row) => Err(Error::NonBinaryLabel {
            row,
            value: f64::from(y[row]),
        }),
        None => Ok(()),
    }
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, x: Array2<f64>, y: Vec<u8>) -> Result<Self> {
        if feature_names.len() != x.ncols() {
            return Err(Error::Dimension {
                context: "feature names",
                expected: x.ncols(),
                got: feature_names.len(),
            });
        }
        if y.len() != x.nrows() {
            return Err(Error::Dimension {
                context: "labels",
                expected: x.nrows(),
                got: y.len(),
            });
        }
        check_labels(&y)?;
        Ok(Dataset {
            feature_names,
            x,
            y,
            group_ids: None,
        })
    }

    pub fn with_groups(mut self, group_ids: Vec<String>) -> Result<Self> {
        if group_ids.len() != self.len() {
            return Err(Error::Dimension {
                context: "group ids",
                expected: self.len(),
                got: group_ids.len(),
            });
        }
        self.group_ids = Some(group_ids);
        Ok(self)
    }

    /// Default names `x0, x1, ...`.
    pub fn unnamed(x: Array2<f64>, y: Vec<u8>) -> Result<Self> {
        let names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        Dataset::new(names, x, y)
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            x: self.x.select(Axis(0), indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            group_ids: self
                .group_ids
                .as_ref()
                .map(|g| indices.iter().map(|&i| g[i].clone()).collect()),
        }
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let label_col = headers
            .iter()
            .position(|h| h == LABEL_COLUMN)
            .ok_or_else(|| Error::MissingColumn(LABEL_COLUMN.into()))?;
        let group_col = headers.iter().position(|h| h == GROUP_COLUMN);
        let feature_cols: Vec<usize> = (0..headers.len())
            .filter(|&c| c != label_col && Some(c) != group_col)
            .collect();
        if feature_cols.is_empty() {
            return Err(Error::Input("dataset has no feature columns".into()));
        }

        let mut values = Vec::new();
        let mut y = Vec::new();
        let mut groups = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            // Header is line 1.
            let row = i + 2;
            let record = record?;
            if record.len() != headers.len() {
                return Err(Error::Csv {
                    row,
                    column: String::new(),
                    message: format!("expected {} fields, found {}", headers.len(), record.len()),
                });
            }
            for &c in &feature_cols {
                let v: f64 = record[c].parse().map_err(|_| Error::Csv {
                    row,
                    column: headers[c].clone(),
                    message: format!("`{}` is not a number", &record[c]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Csv {
                        row,
                        column: headers[c].clone(),
                        message: "value is not finite".into(),
                    });
                }
                values.push(v);
            }
            let label = match &record[label_col] {
                "0" | "0.0" => 0,
                "1" | "1.0" => 1,
                other => {
                    return Err(Error::Csv {
                        row,
                        column: LABEL_COLUMN.into(),
                        message: format!("label `{other}` is not 0 or 1"),
                    })
                }
            };
            y.push(label);
            if let Some(g) = group_col {
                groups.push(record[g].to_owned());
            }
        }
        if y.is_empty() {
            return Err(Error::Input("dataset has no rows".into()));
        }
        let x = Array2::from_shape_vec((y.len(), feature_cols.len()), values)
            .expect("row-major feature buffer");
        let names = feature_cols.iter().map(|&c| headers[c].clone()).collect();
        let ds = Dataset::new(names, x, y)?;
        match group_col {
            Some(_) => ds.with_groups(groups),
            None => Ok(ds),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(LABEL_COLUMN);
        if self.group_ids.is_some() {
            header.push(GROUP_COLUMN);
        }
        wtr.write_record(&header)?;
        for (i, row) in self.x.outer_iter().enumerate() {
            let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            record.push(self.y[i].to_string());
            if let Some(g) = &self.group_ids {
                record.push(g[i].clone());
            }
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn csv_round_trip_with_groups() {
        let ds = Dataset::unnamed(array![[0.5, -1.25], [3.0, 1e-7]], vec![1, 0])
            .unwrap()
            .with_groups(vec!["a".into(), "b".into()])
            .unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(&buf[..]).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn missing_label_column_is_named() {
        let err = Dataset::read_csv("a,b\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "y"));
    }

    #[test]
    fn bad_cell_reports_row_and_column() {
        let err = Dataset::read_csv("a,y\n1,0\nfoo,1\n".as_bytes()).unwrap_err();
        match err {
            Error::Csv { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "a");
            }
            other => panic!("unexpected {other}"),
        }
        assert!(Dataset::read_csv("a,y\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn binary_label_validation() {
        assert_eq!(binary_labels(&[0.0, 1.0]).unwrap(), vec![0, 1]);
        assert!(matches!(
            binary_labels(&[0.0, 0.5]),
            Err(Error::NonBinaryLabel { row: 1, .. })
        ));
    }
}
