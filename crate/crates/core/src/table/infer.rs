// SPDX-License-Identifier: Apache-2.0

use std::collections::HashSet;

use chrono::{NaiveDate, NaiveDateTime};

use super::{CellValue, ColType, ColumnRef, Table};

/// Minimum fraction of parseable non-Null values for a Text column to count
/// as temporal.
pub const TEMPORAL_TEXT_THRESHOLD: f64 = 0.95;

fn is_integer_literal(s: &str) -> bool {
    let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

fn parse_integer(s: &str) -> Option<i64> {
    if is_integer_literal(s) {
        s.parse().ok()
    } else {
        None
    }
}

fn parse_real(s: &str) -> Option<f64> {
    // Overflowing integer literals never become reals.
    if is_integer_literal(s) {
        return parse_integer(s).map(|v| v as f64);
    }
    let plausible = s
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.' | b'e' | b'E'));
    if !plausible || !s.bytes().any(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn shaped(s: &str, sep: u8) -> bool {
    let b = s.as_bytes();
    b.len() == 10
        && b[4] == sep
        && b[7] == sep
        && b.iter()
            .enumerate()
            .all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit())
}

/// Parses `YYYY-MM-DD`, `YYYY/MM/DD` or `YYYY-MM-DDTHH:MM:SS[Z]` into UTC
/// seconds.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let midnight = |d: NaiveDate| d.and_hms_opt(0, 0, 0).map(|dt| dt.and_utc().timestamp());
    if shaped(s, b'-') {
        return NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().and_then(midnight);
    }
    if shaped(s, b'/') {
        return NaiveDate::parse_from_str(s, "%Y/%m/%d").ok().and_then(midnight);
    }
    let body = s.strip_suffix('Z').unwrap_or(s);
    let b = body.as_bytes();
    if b.len() == 19
        && body.get(..10).is_some_and(|d| shaped(d, b'-'))
        && b[10] == b'T'
        && b[13] == b':'
        && b[16] == b':'
    {
        let time_digits = [11, 12, 14, 15, 17, 18].iter().all(|&i| b[i].is_ascii_digit());
        if time_digits {
            return NaiveDateTime::parse_from_str(body, "%Y-%m-%dT%H:%M:%S")
                .ok()
                .map(|dt| dt.and_utc().timestamp());
        }
    }
    None
}

/// Infers each column's type from its raw text. Empty strings are ignored;
/// all-empty columns are Text.
pub fn infer_types(columns: &[Vec<String>]) -> Vec<ColType> {
    columns
        .iter()
        .map(|col| {
            let values: Vec<&str> = col.iter().map(String::as_str).filter(|s| !s.is_empty()).collect();
            if values.is_empty() {
                ColType::Text
            } else if values.iter().all(|s| parse_integer(s).is_some()) {
                ColType::Integer
            } else if values.iter().all(|s| parse_real(s).is_some()) {
                ColType::Real
            } else if values.iter().all(|s| parse_timestamp(s).is_some()) {
                ColType::Timestamp
            } else {
                ColType::Text
            }
        })
        .collect()
}

pub(super) fn parse_cell(raw: &str, ty: ColType) -> CellValue {
    if raw.is_empty() {
        return CellValue::Null;
    }
    let parsed = match ty {
        ColType::Integer => parse_integer(raw).map(CellValue::Integer),
        ColType::Real => parse_real(raw).map(CellValue::Real),
        ColType::Timestamp => parse_timestamp(raw).map(CellValue::Timestamp),
        ColType::Text => None,
    };
    parsed.unwrap_or_else(|| CellValue::Text(raw.to_string()))
}

/// Timestamp columns, plus Text columns whose non-Null values parse as
/// timestamps at least [`TEMPORAL_TEXT_THRESHOLD`] of the time.
pub fn detect_temporal_columns(t: &Table) -> Vec<ColumnRef> {
    (0..t.arity())
        .filter(|&j| match t.col_types()[j] {
            ColType::Timestamp => true,
            ColType::Text => {
                let mut total = 0usize;
                let mut hits = 0usize;
                for cell in t.column(j) {
                    if let CellValue::Text(s) = cell {
                        total += 1;
                        hits += parse_timestamp(s).is_some() as usize;
                    }
                }
                total > 0 && hits as f64 >= TEMPORAL_TEXT_THRESHOLD * total as f64
            }
            _ => false,
        })
        .map(|j| t.column_ref(j))
        .collect()
}

/// Leftmost column with no Nulls and all-distinct values.
pub fn infer_entity_key(t: &Table) -> Option<ColumnRef> {
    if t.row_count() == 0 {
        return None;
    }
    (0..t.arity())
        .find(|&j| {
            let mut seen = HashSet::with_capacity(t.row_count());
            t.column(j).all(|c| !c.is_null() && seen.insert(c))
        })
        .map(|j| t.column_ref(j))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multibyte_text_is_not_a_timestamp() {
        assert_eq!(parse_timestamp("2020-0mo\u{f3}\u{89}sion:12"), None);
        assert_eq!(parse_timestamp("2020-01-0\u{e9}T00:00:00"), None);
    }

    fn col(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rule_order() {
        let types = infer_types(&[
            col(&["1", "2", "3"]),
            col(&["27.3", "25.1"]),
            col(&["2018-04-11", "2018-04-12"]),
            col(&["", ""]),
            col(&["1", "x"]),
            col(&["1", "2.5", ""]),
            col(&["99999999999999999999", "1"]),
            col(&["inf", "1.0"]),
            col(&["2018/04/11", "2018-04-11T08:30:00Z", "2018-04-11T08:30:00"]),
        ]);
        use ColType::*;
        assert_eq!(
            types,
            [Integer, Real, Timestamp, Text, Text, Real, Text, Text, Timestamp]
        );
    }

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp("1970-01-02"), Some(86_400));
        assert_eq!(parse_timestamp("1970/01/01"), Some(0));
        assert_eq!(parse_timestamp("1970-01-01T00:01:00Z"), Some(60));
        assert_eq!(parse_timestamp("2018-02-30"), None);
        assert_eq!(parse_timestamp("2018-4-11"), None);
        assert_eq!(parse_timestamp("2018-04-11 10:00:00"), None);
    }

    #[test]
    fn permutation_invariant() {
        let a = col(&["1", "2.5", "", "3"]);
        let mut b = a.clone();
        b.reverse();
        assert_eq!(infer_types(&[a]), infer_types(&[b]));
    }

    fn table(src: &str) -> Table {
        Table::from_csv("t", src.as_bytes()).unwrap()
    }

    #[test]
    fn temporal_detection() {
        let t = table("player,date\nx,2018-01-01\n");
        let cols = detect_temporal_columns(&t);
        assert_eq!(cols.len(), 1);
        assert_eq!(cols[0].column_name, "date");
        assert!(detect_temporal_columns(&table("player,pts\nx,1\n")).is_empty());
    }

    #[test]
    fn temporal_text_threshold() {
        let build = |junk: usize| {
            let mut s = String::from("when\n");
            for i in 0..100 {
                if i < junk {
                    s.push_str(&format!("junk{i}\n"));
                } else {
                    s.push_str(&format!("2018-01-{:02}\n", 1 + i % 28));
                }
            }
            table(&s)
        };
        let t = build(4);
        assert_eq!(t.col_types(), [ColType::Text]);
        assert_eq!(detect_temporal_columns(&t).len(), 1);
        assert!(detect_temporal_columns(&build(6)).is_empty());
    }

    #[test]
    fn entity_key() {
        assert_eq!(
            infer_entity_key(&table("id,player\n1,a\n2,b\n")).unwrap().column_name,
            "id"
        );
        assert!(infer_entity_key(&table("a,b\n1,x\n1,x\n")).is_none());
        assert_eq!(
            infer_entity_key(&table("team,player\nA,x\nA,y\n")).unwrap().column_name,
            "player"
        );
        assert!(infer_entity_key(&table("a,b\n1,\n2,\n")).unwrap().column_name == "a");
        assert!(infer_entity_key(&table("a\n")).is_none());
    }
}
