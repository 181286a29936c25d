//! Utility/loss tables on disk: header `id,y0,...,y{k-1}`, one row per individual.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Individual, ValueModel};

/// Parsed table: ids in file order and the `n x k` value matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    pub ids: Vec<u64>,
    pub values: Vec<Vec<f64>>,
}

impl ValueTable {
    pub fn num_outcomes(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn individuals(&self) -> Vec<Individual> {
        self.ids.iter().map(|&id| Individual::opaque(id)).collect()
    }

    pub fn into_model<Role>(self) -> Result<ValueModel<Role>> {
        ValueModel::table(&self.ids, self.values)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(file).map_err(|e| match e {
            Error::Parse { msg, .. } => Error::Parse {
                path: path.to_path_buf(),
                msg,
            },
            Error::Csv(e) => Error::Parse {
                path: path.to_path_buf(),
                msg: e.to_string(),
            },
            other => Error::Parse {
                path: path.to_path_buf(),
                msg: other.to_string(),
            },
        })
    }

    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let parse_err = |msg: String| Error::Parse {
            path: "<reader>".into(),
            msg,
        };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("id") || header.len() < 2 {
            return Err(parse_err("header must start with `id` and name at least one outcome".into()));
        }
        for (y, name) in header.iter().skip(1).enumerate() {
            if name != format!("y{y}") {
                return Err(parse_err(format!("expected column y{y}, found `{name}`")));
            }
        }
        let k = header.len() - 1;
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let id: u64 = rec[0]
                .parse()
                .map_err(|_| parse_err(format!("row {}: bad id `{}`", line + 1, &rec[0])))?;
            let row = rec
                .iter()
                .skip(1)
                .map(|v| {
                    let x: f64 = v
                        .parse()
                        .map_err(|_| parse_err(format!("row {}: bad value `{v}`", line + 1)))?;
                    if (0.0..=1.0).contains(&x) {
                        Ok(x)
                    } else {
                        Err(parse_err(format!("row {}: value {x} outside [0, 1]", line + 1)))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != k {
                return Err(parse_err(format!("row {}: expected {k} values", line + 1)));
            }
            ids.push(id);
            values.push(row);
        }
        if ids.is_empty() {
            return Err(parse_err("no individuals".into()));
        }
        Ok(Self { ids, values })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["id".to_string()];
        header.extend((0..self.num_outcomes()).map(|y| format!("y{y}")));
        w.write_record(&header)?;
        for (id, row) in self.ids.iter().zip(&self.values) {
            let mut rec = vec![id.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UtilityModel;

    #[test]
    fn parses_table() {
        let t = ValueTable::from_reader("id,y0,y1\n4,0.5,1\n2,0,0.25\n".as_bytes()).unwrap();
        assert_eq!(t.ids, vec![4, 2]);
        assert_eq!(t.values[1], vec![0.0, 0.25]);
        let u: UtilityModel = t.into_model().unwrap();
        assert_eq!(u.value(&Individual::opaque(4), 1).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_tables() {
        for bad in [
            "idx,y0\n1,0\n",
            "id,y1\n1,0\n",
            "id,y0\n1,1.5\n",
            "id,y0\nx,0.5\n",
            "id,y0,y1\n1,0.5\n",
            "id,y0\n",
        ] {
            assert!(ValueTable::from_reader(bad.as_bytes()).is_err(), "{bad}");
        }
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        let t = ValueTable {
            ids: vec![0, 1],
            values: vec![vec![0.1, 0.9], vec![1.0, 0.0]],
        };
        t.write(&path).unwrap();
        assert_eq!(ValueTable::read(&path).unwrap(), t);
    }
}
