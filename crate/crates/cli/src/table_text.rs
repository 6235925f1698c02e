//! The `r1c1,r1c2;r2c1,r2c2` table notation.

use std::fmt;

use mtest::TableCounts;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// 1-based row of the offending token, when there is one.
    pub row: Option<usize>,
    /// 1-based entry within the row.
    pub entry: Option<usize>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.row, self.entry) {
            (Some(r), Some(e)) => write!(f, "row {r}, entry {e}: {}", self.message),
            (Some(r), None) => write!(f, "row {r}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ParseError {}

/// Rows are separated by `;`, counts by `,`. Whitespace around tokens is
/// ignored. For two-row tables the first row holds successes.
pub fn parse_table(text: &str) -> Result<TableCounts, ParseError> {
    let err = |row, entry, message: String| ParseError { row, entry, message };
    if text.trim().is_empty() {
        return Err(err(None, None, "empty table".into()));
    }
    let mut rows: Vec<Vec<usize>> = Vec::new();
    for (r, row_text) in text.split(';').enumerate() {
        let mut row = Vec::new();
        for (c, token) in row_text.split(',').enumerate() {
            let token = token.trim();
            let value = if token.is_empty() {
                Err("missing count".to_string())
            } else if token.starts_with('-') {
                Err(format!("negative count '{token}'"))
            } else {
                token
                    .parse::<usize>()
                    .map_err(|_| format!("'{token}' is not a nonnegative integer"))
            };
            row.push(value.map_err(|m| err(Some(r + 1), Some(c + 1), m))?);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(err(
                    Some(r + 1),
                    None,
                    format!("ragged row: {} entries, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(err(None, None, "a table needs at least two rows".into()));
    }
    TableCounts::new(rows).map_err(|e| err(None, None, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_examples() {
        let t = parse_table("3,1;1,3").unwrap();
        assert_eq!(t, TableCounts::new(vec![vec![3, 1], vec![1, 3]]).unwrap());
        let t = parse_table("0,0;10,7").unwrap();
        assert_eq!(t.column_sums(), vec![10, 7]);
        assert_eq!(parse_table(" 1 , 2 ; 3 , 4 ").unwrap().to_string(), "1,2;3,4");
    }

    #[test]
    fn ragged_row_reported() {
        let e = parse_table("1,2;3").unwrap_err();
        assert_eq!(e.row, Some(2));
        assert!(e.to_string().contains("ragged"));
    }

    #[test]
    fn bad_tokens_reported_with_position() {
        let e = parse_table("1,-2;3,4").unwrap_err();
        assert_eq!((e.row, e.entry), (Some(1), Some(2)));
        let e = parse_table("1,2;3,1.5").unwrap_err();
        assert_eq!((e.row, e.entry), (Some(2), Some(2)));
        assert!(e.to_string().contains("1.5"));
        let e = parse_table("1,,2;3,4,5").unwrap_err();
        assert_eq!((e.row, e.entry), (Some(1), Some(2)));
        assert!(parse_table("").is_err());
        assert!(parse_table("   ").is_err());
        assert!(parse_table("1,2").is_err());
    }
}
