// SPDX-License-Identifier: Apache-2.0

//! Strict RFC 4180 reader and writer.
//!
//! Rejects ragged records, stray quotes inside unquoted fields, text after a
//! closing quote, unterminated quoted fields and bare CR. Accepts LF or CRLF
//! record terminators and an optional UTF-8 byte-order mark.

use super::TableError;

#[derive(Clone, Copy, PartialEq)]
enum State {
    FieldStart,
    Unquoted,
    Quoted,
    QuoteInQuoted,
}

/// Splits `source` into records. Row numbers in errors are 1-based record
/// numbers, so the header is row 1.
pub fn parse_records(source: &[u8]) -> Result<Vec<Vec<String>>, TableError> {
    let text = std::str::from_utf8(source).map_err(|e| {
        let row = 1 + source[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count();
        TableError::Ingest {
            row,
            message: "invalid UTF-8".into(),
        }
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);

    let mut records: Vec<Vec<String>> = Vec::new();
    let mut record: Vec<String> = Vec::new();
    let mut field = String::new();
    let mut state = State::FieldStart;
    let mut arity: Option<usize> = None;
    let mut chars = text.chars().peekable();

    let err = |row: usize, message: &str| TableError::Ingest {
        row,
        message: message.to_string(),
    };

    let finish_record = |records: &mut Vec<Vec<String>>,
                         record: &mut Vec<String>,
                         arity: &mut Option<usize>|
     -> Result<(), TableError> {
        let row = records.len() + 1;
        let fields = std::mem::take(record);
        match *arity {
            None => *arity = Some(fields.len()),
            Some(n) if n != fields.len() => {
                return Err(TableError::Ingest {
                    row,
                    message: format!("expected {n} fields, found {}", fields.len()),
                })
            }
            Some(_) => {}
        }
        records.push(fields);
        Ok(())
    };

    while let Some(c) = chars.next() {
        let row = records.len() + 1;
        match state {
            State::FieldStart | State::Unquoted => match c {
                '"' if state == State::FieldStart => state = State::Quoted,
                '"' => return Err(err(row, "quote inside unquoted field")),
                ',' => {
                    record.push(std::mem::take(&mut field));
                    state = State::FieldStart;
                }
                '\n' => {
                    record.push(std::mem::take(&mut field));
                    finish_record(&mut records, &mut record, &mut arity)?;
                    state = State::FieldStart;
                }
                '\r' => {
                    if chars.next_if_eq(&'\n').is_none() {
                        return Err(err(row, "bare carriage return"));
                    }
                    record.push(std::mem::take(&mut field));
                    finish_record(&mut records, &mut record, &mut arity)?;
                    state = State::FieldStart;
                }
                _ => {
                    field.push(c);
                    state = State::Unquoted;
                }
            },
            State::Quoted => match c {
                '"' => state = State::QuoteInQuoted,
                _ => field.push(c),
            },
            State::QuoteInQuoted => match c {
                '"' => {
                    field.push('"');
                    state = State::Quoted;
                }
                ',' => {
                    record.push(std::mem::take(&mut field));
                    state = State::FieldStart;
                }
                '\n' => {
                    record.push(std::mem::take(&mut field));
                    finish_record(&mut records, &mut record, &mut arity)?;
                    state = State::FieldStart;
                }
                '\r' if chars.next_if_eq(&'\n').is_some() => {
                    record.push(std::mem::take(&mut field));
                    finish_record(&mut records, &mut record, &mut arity)?;
                    state = State::FieldStart;
                }
                _ => return Err(err(row, "text after closing quote")),
            },
        }
    }

    match state {
        State::Quoted => return Err(err(records.len() + 1, "unterminated quoted field")),
        State::FieldStart if record.is_empty() => {}
        _ => {
            record.push(field);
            finish_record(&mut records, &mut record, &mut arity)?;
        }
    }
    Ok(records)
}

fn needs_quotes(field: &str) -> bool {
    // A leading BOM would be stripped on read.
    field.contains([',', '"', '\n', '\r']) || field.starts_with('\u{feff}')
}

/// Renders records as CSV with LF terminators, quoting only when needed.
pub fn write_records(records: &[Vec<String>]) -> String {
    let mut out = String::new();
    for record in records {
        for (i, field) in record.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            if needs_quotes(field) {
                out.push('"');
                out.push_str(&field.replace('"', "\"\""));
                out.push('"');
            } else {
                out.push_str(field);
            }
        }
        // A lone empty field would otherwise read back as a blank line.
        if record.len() == 1 && record[0].is_empty() {
            out.push_str("\"\"");
        }
        out.push('\n');
    }
    out
}
