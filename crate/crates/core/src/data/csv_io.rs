use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, FeatureKind, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskHint {
    Regression,
    Binary,
    Multiclass,
}

/// Optional sidecar describing how to read a CSV file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schema {
    /// Target column; the last column when absent.
    pub target: Option<String>,
    /// Columns forced to one-hot encoding.
    pub categorical: Vec<String>,
    /// Columns that must parse as numbers.
    pub numeric: Vec<String>,
    /// Label mapped to `+1`; every other label becomes `-1`.
    pub positive_label: Option<String>,
    pub task: Option<TaskHint>,
}

impl Schema {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset, DataError> {
    parse_csv(std::fs::File::open(path)?, schema)
}

fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a headered CSV. Columns whose cells do not all parse as numbers are
/// one-hot encoded over their sorted distinct values.
pub fn parse_csv(reader: impl Read, schema: &Schema) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let width = header.len();
    let mut cells: Vec<Vec<String>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        // line 1 is the header
        let row = i + 2;
        if rec.len() != width {
            return Err(DataError::Ragged {
                row,
                expected: width,
                found: rec.len(),
            });
        }
        cells.push(rec.iter().map(str::to_string).collect());
    }
    if cells.is_empty() || width == 0 {
        return Err(DataError::Empty);
    }
    let col_index = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let target_col = match &schema.target {
        Some(name) => col_index(name)?,
        None => width - 1,
    };
    let forced_cat: BTreeSet<usize> = schema.categorical.iter().map(|c| col_index(c)).collect::<Result<_, _>>()?;
    let forced_num: BTreeSet<usize> = schema.numeric.iter().map(|c| col_index(c)).collect::<Result<_, _>>()?;

    let column_numeric = |j: usize| -> Result<bool, DataError> {
        if forced_cat.contains(&j) {
            return Ok(false);
        }
        let first_bad = cells.iter().position(|r| parse_number(&r[j]).is_none());
        match first_bad {
            None => Ok(true),
            Some(i) if forced_num.contains(&j) => Err(DataError::Unparseable {
                row: i + 2,
                column: header[j].clone(),
                value: cells[i][j].clone(),
            }),
            Some(_) => Ok(false),
        }
    };

    let mut names = Vec::new();
    let mut kinds = Vec::new();
    // per input column: None for numeric, Some(categories) for one-hot
    let mut encoders: Vec<Option<Vec<String>>> = Vec::new();
    let mut feature_cols = Vec::new();
    for j in (0..width).filter(|&j| j != target_col) {
        feature_cols.push(j);
        if column_numeric(j)? {
            names.push(header[j].clone());
            kinds.push(FeatureKind::Continuous);
            encoders.push(None);
        } else {
            let cats: BTreeSet<String> = cells.iter().map(|r| r[j].trim().to_string()).collect();
            for c in &cats {
                names.push(format!("{}={}", header[j], c));
                kinds.push(FeatureKind::OneHot);
            }
            encoders.push(Some(cats.into_iter().collect()));
        }
    }
    let dim = names.len();
    let mut features = Vec::with_capacity(cells.len() * dim);
    for r in &cells {
        for (&j, enc) in feature_cols.iter().zip(&encoders) {
            match enc {
                None => features.push(parse_number(&r[j]).expect("column checked numeric")),
                Some(cats) => {
                    let v = r[j].trim();
                    features.extend(cats.iter().map(|c| if c == v { 1.0 } else { 0.0 }));
                }
            }
        }
    }

    let raw: Vec<&str> = cells.iter().map(|r| r[target_col].trim()).collect();
    let (targets, task) = encode_targets(&raw, schema, &header[target_col])?;
    Dataset::new(features, targets, dim, names, kinds, task)
}

fn encode_targets(raw: &[&str], schema: &Schema, column: &str) -> Result<(Vec<f64>, Task), DataError> {
    let numeric: Option<Vec<f64>> = raw.iter().map(|s| parse_number(s)).collect();
    if let Some(pos) = &schema.positive_label {
        let t = raw.iter().map(|s| if s == pos { 1.0 } else { -1.0 }).collect();
        return Ok((t, Task::Binary));
    }
    let hint = schema.task.unwrap_or_else(|| match &numeric {
        Some(v) if v.iter().all(|y| *y == 1.0 || *y == -1.0 || *y == 0.0) => TaskHint::Binary,
        Some(_) => TaskHint::Regression,
        None => {
            let distinct: BTreeSet<&str> = raw.iter().copied().collect();
            if distinct.len() == 2 {
                TaskHint::Binary
            } else {
                TaskHint::Multiclass
            }
        }
    });
    let unparseable = |i: usize| DataError::Unparseable {
        row: i + 2,
        column: column.to_string(),
        value: raw[i].to_string(),
    };
    match hint {
        TaskHint::Regression => match numeric {
            Some(v) => Ok((v, Task::Regression)),
            None => Err(unparseable(raw.iter().position(|s| parse_number(s).is_none()).unwrap_or(0))),
        },
        TaskHint::Binary => {
            let labels: BTreeSet<&str> = raw.iter().copied().collect();
            if labels.len() > 2 {
                return Err(DataError::BadLabel {
                    row: 2,
                    value: format!("{} distinct labels for a binary task", labels.len()),
                });
            }
            let t = match numeric {
                // numeric binary labels: positive values are the positive class
                Some(v) => v.iter().map(|y| if *y > 0.0 { 1.0 } else { -1.0 }).collect(),
                // the lexicographically larger label is positive
                None => {
                    let positive = *labels.iter().next_back().expect("nonempty");
                    raw.iter().map(|s| if *s == positive { 1.0 } else { -1.0 }).collect()
                }
            };
            Ok((t, Task::Binary))
        }
        TaskHint::Multiclass => {
            let labels: BTreeMap<&str, usize> = raw
                .iter()
                .copied()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .enumerate()
                .map(|(i, s)| (s, i))
                .collect();
            let t = raw.iter().map(|s| labels[s] as f64).collect();
            Ok((t, Task::Multiclass { classes: labels.len() }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, schema: &Schema) -> Result<Dataset, DataError> {
        parse_csv(text.as_bytes(), schema)
    }

    #[test]
    fn numeric_two_rows() {
        let d = parse("a,b,y\n1,2,0.5\n3,4,1.5\n", &Schema::default()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dim(), 2);
        assert_eq!(d.task(), Task::Regression);
        assert_eq!(d.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn categorical_one_hot() {
        let d = parse("c,x,y\nred,1,1\nblue,2,-1\ngreen,3,1\nred,4,-1\n", &Schema::default()).unwrap();
        assert_eq!(d.dim(), 4);
        assert_eq!(d.feature_names(), &["c=blue", "c=green", "c=red", "x"]);
        assert_eq!(d.row(0), &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(d.task(), Task::Binary);
        assert_eq!(&d.feature_kinds()[..3], &[FeatureKind::OneHot; 3]);
    }

    #[test]
    fn errors_are_located() {
        assert!(matches!(parse("a,y\n", &Schema::default()), Err(DataError::Empty)));
        assert!(matches!(parse("", &Schema::default()), Err(DataError::Empty)));
        assert!(matches!(
            parse("a,y\n1,2\n3\n", &Schema::default()),
            Err(DataError::Ragged { row: 3, expected: 2, found: 1 })
        ));
        let schema = Schema {
            numeric: vec!["a".into()],
            ..Schema::default()
        };
        match parse("a,y\n1,2\nx,3\n", &schema) {
            Err(DataError::Unparseable { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (3, "a", "x"));
            }
            other => panic!("{other:?}"),
        }
        let schema = Schema {
            target: Some("nope".into()),
            ..Schema::default()
        };
        assert!(matches!(parse("a,y\n1,2\n", &schema), Err(DataError::MissingColumn(_))));
    }

    #[test]
    fn schema_overrides() {
        let schema = Schema {
            target: Some("label".into()),
            positive_label: Some("yes".into()),
            ..Schema::default()
        };
        let d = parse("label,x\nyes,1\nno,2\nmaybe,3\n", &schema).unwrap();
        assert_eq!(d.targets(), &[1.0, -1.0, -1.0]);
        let d = parse("x,k\n1,a\n2,b\n3,c\n", &Schema::default()).unwrap();
        assert_eq!(d.task(), Task::Multiclass { classes: 3 });
        let schema: Schema = serde_json::from_str(r#"{"categorical": ["x"], "task": "regression"}"#).unwrap();
        let d = parse("x,y\n1,2\n2,3\n", &schema).unwrap();
        assert_eq!(d.dim(), 2);
    }
}
