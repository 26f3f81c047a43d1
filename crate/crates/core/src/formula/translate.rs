//! Copy/paste simulation working on the formula text itself.
//!
//! This deliberately does not go through the parser: it rewrites A1 reference
//! tokens in place, the way a spreadsheet adjusts a pasted formula. It serves as
//! an independent check of the parser's reference normalization.

use thiserror::Error;

use crate::grid::{column_name, parse_column, MAX_COL, MAX_ROW};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslateError {
    #[error("reference `{reference}` moves outside the grid")]
    OutOfGrid { reference: String },
    #[error("formula text must start with `=`")]
    NotAFormula,
    #[error("unterminated quoted literal")]
    Unterminated,
}

fn shift(idx: u32, delta: i64, max: u32) -> Option<u32> {
    let v = i64::from(idx) + delta;
    (1..=i64::from(max)).contains(&v).then_some(v as u32)
}

/// Shifts one `[$]letters[$]digits` token, or returns `None` if the word is not
/// a reference.
fn shift_word(word: &str, dcol: i64, drow: i64) -> Option<Result<String, TranslateError>> {
    let col_abs = word.starts_with('$');
    let rest = if col_abs { &word[1..] } else { word };
    let letters_end = rest.find(|c: char| !c.is_ascii_alphabetic()).unwrap_or(rest.len());
    let (letters, rest) = rest.split_at(letters_end);
    let row_abs = rest.starts_with('$');
    let digits = if row_abs { &rest[1..] } else { rest };
    if letters.is_empty() || digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let col = parse_column(letters)?;
    let row: u32 = digits.parse().ok()?;
    let out_of_grid = || TranslateError::OutOfGrid {
        reference: word.to_string(),
    };
    let new_col = if col_abs { Some(col) } else { shift(col, dcol, MAX_COL) };
    let new_row = if row_abs { Some(row) } else { shift(row, drow, MAX_ROW) };
    Some(match (new_col, new_row) {
        (Some(c), Some(r)) => Ok(format!(
            "{}{}{}{}",
            if col_abs { "$" } else { "" },
            column_name(c),
            if row_abs { "$" } else { "" },
            r
        )),
        _ => Err(out_of_grid()),
    })
}

/// The text a spreadsheet would place in `to` after copying the formula from
/// `from`: relative axes move by `to - from`, absolute axes stay put.
/// Coordinates are `(col, row)`.
pub fn translate_a1(text: &str, from: (u32, u32), to: (u32, u32)) -> Result<String, TranslateError> {
    if !text.starts_with('=') {
        return Err(TranslateError::NotAFormula);
    }
    let dcol = i64::from(to.0) - i64::from(from.0);
    let drow = i64::from(to.1) - i64::from(from.1);
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '"' || c == '\'' {
            // string literal or quoted sheet name: copy verbatim
            let start = i;
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(TranslateError::Unterminated),
                    Some(&q) if q == c && chars.get(i + 1) == Some(&c) => i += 2,
                    Some(&q) if q == c => {
                        i += 1;
                        break;
                    }
                    Some(_) => i += 1,
                }
            }
            out.extend(&chars[start..i]);
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && matches!(chars[i], 'e' | 'E') {
                let mut j = i + 1;
                if j < chars.len() && matches!(chars[j], '+' | '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            out.extend(&chars[start..i]);
        } else if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || matches!(chars[i], '_' | '.' | '$')) {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let next = chars[i..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('(') | Some('!')) {
                out.push_str(&word);
            } else {
                match shift_word(&word, dcol, drow) {
                    Some(shifted) => out.push_str(&shifted?),
                    None => out.push_str(&word),
                }
            }
        } else {
            out.push(c);
            i += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_row_moves() {
        // B1 -> B2
        assert_eq!(translate_a1("=A1*2", (2, 1), (2, 2)).unwrap(), "=A2*2");
    }

    #[test]
    fn absolute_is_immune() {
        // B1 -> E9
        assert_eq!(translate_a1("=$A$1*2", (2, 1), (5, 9)).unwrap(), "=$A$1*2");
    }

    #[test]
    fn per_axis_rule() {
        // C3 -> D4
        assert_eq!(translate_a1("=A$1+B2", (3, 3), (4, 4)).unwrap(), "=B$1+C3");
    }

    #[test]
    fn leaves_names_strings_and_sheets_alone() {
        let t = "=SUM(Sheet2!A1:B2)&\"A1\"&'A1'!C3+LOG10(A1)";
        assert_eq!(
            translate_a1(t, (1, 1), (2, 3)).unwrap(),
            "=SUM(Sheet2!B3:C4)&\"A1\"&'A1'!D5+LOG10(B3)"
        );
        assert_eq!(translate_a1("=1.5E3+TRUE", (1, 1), (9, 9)).unwrap(), "=1.5E3+TRUE");
    }

    #[test]
    fn moving_off_the_grid_fails() {
        assert!(matches!(
            translate_a1("=A1", (2, 2), (1, 1)),
            Err(TranslateError::OutOfGrid { .. })
        ));
        assert_eq!(translate_a1("=$A1", (2, 2), (1, 2)).unwrap(), "=$A1");
        assert!(matches!(
            translate_a1("=A1", (2, 2), (1, 2)),
            Err(TranslateError::OutOfGrid { .. })
        ));
    }
}
