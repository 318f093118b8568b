//! Feature tables: header `f1..f24,label`, one row per specimen in manifest
//! order. Unsuccessful scans keep their row with all feature cells empty.

use crate::classifier::Label;
use crate::features::{csv_header, FeatureVector, FEATURE_COUNT};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub features: Option<FeatureVector>,
    pub label: Label,
}

/// Serialises rows. Floats use the shortest representation that parses
/// back to the same value, so a table round-trips exactly.
pub fn write_table(rows: &[FeatureRow]) -> String {
    let mut out = csv_header();
    out.push('\n');
    for row in rows {
        match &row.features {
            Some(fv) => {
                let cells: Vec<String> = fv.0.iter().map(|v| v.to_string()).collect();
                out.push_str(&cells.join(","));
            }
            None => out.push_str(&",".repeat(FEATURE_COUNT - 1)),
        }
        out.push_str(&format!(",{}\n", row.label));
    }
    out
}

pub fn read_table(text: &str) -> Result<Vec<FeatureRow>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(csv_header().as_str()) {
        return Err("feature table header does not match".into());
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != FEATURE_COUNT + 1 {
                return Err(format!("row {}: expected {} cells, got {}", i + 1, FEATURE_COUNT + 1, cells.len()));
            }
            let label: Label = cells[FEATURE_COUNT].parse()?;
            let values = &cells[..FEATURE_COUNT];
            let features = if values.iter().all(|c| c.is_empty()) {
                None
            } else {
                let parsed = values
                    .iter()
                    .map(|c| c.parse::<f64>().map_err(|e| format!("row {}: {e}", i + 1)))
                    .collect::<Result<Vec<_>, _>>()?;
                Some(FeatureVector::from_slice(&parsed).expect("width checked"))
            };
            Ok(FeatureRow { features, label })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_exact_values() {
        let mut values = [0.0; FEATURE_COUNT];
        for (i, v) in values.iter_mut().enumerate() {
            *v = (i as f64 + 0.1) / 3.0;
        }
        let rows = vec![
            FeatureRow {
                features: Some(FeatureVector(values)),
                label: Label::Phishing,
            },
            FeatureRow {
                features: None,
                label: Label::Legitimate,
            },
        ];
        let text = write_table(&rows);
        assert!(text.starts_with("f1_version,"));
        assert_eq!(text.lines().nth(2).unwrap(), format!("{},legitimate", ",".repeat(23)));
        assert_eq!(read_table(&text).unwrap(), rows);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(read_table("nope\n").is_err());
        let bad = format!("{}\n1,2,phishing\n", csv_header());
        assert!(read_table(&bad).is_err());
        let partial = format!("{}\nx{},phishing\n", csv_header(), ",".repeat(23));
        assert!(read_table(&partial).is_err());
    }
}
