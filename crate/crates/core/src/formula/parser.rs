use std::fmt;

use thiserror::Error;

use super::{Axis, BinaryOp, Expr, RangeRef, Reference, UnaryOp};
use crate::grid::{parse_column, MAX_COL, MAX_ROW};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    /// Unexpected token; `expected` names what the grammar allows here.
    Syntax { expected: String, found: String },
    /// A reference beyond `ZZZ` or row 1,048,576 (or row 0).
    OutOfRange { reference: String },
    /// Mixed sheet qualifiers on the two ends of a range.
    RangeSheetMismatch,
}

/// A positioned parse diagnostic. `position` is a 0-based character offset
/// into the full formula text, including the leading `=`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub position: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::Syntax { expected, found } => {
                write!(f, "syntax error at position {}: expected {expected}, found {found}", self.position)
            }
            ParseErrorKind::OutOfRange { reference } => {
                write!(f, "reference `{reference}` at position {} is outside the grid", self.position)
            }
            ParseErrorKind::RangeSheetMismatch => {
                write!(f, "range at position {} mixes sheet qualifiers", self.position)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Str(String),
    Word(String),
    QuotedSheet(String),
    Op(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Number(n) => write!(f, "number {n}"),
            Tok::Str(_) => f.write_str("string literal"),
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::QuotedSheet(s) => write!(f, "sheet '{s}'"),
            Tok::Op(o) => write!(f, "`{o}`"),
            Tok::Eof => f.write_str("end of formula"),
        }
    }
}

fn syntax(position: usize, expected: impl Into<String>, found: impl Into<String>) -> ParseError {
    ParseError {
        position,
        kind: ParseErrorKind::Syntax {
            expected: expected.into(),
            found: found.into(),
        },
    }
}

fn is_word_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '$'
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '$'
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
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
            let lit: String = chars[start..i].iter().collect();
            let value: f64 = lit
                .parse()
                .map_err(|_| syntax(start, "number", format!("`{lit}`")))?;
            if !value.is_finite() {
                return Err(syntax(start, "finite number", format!("`{lit}`")));
            }
            toks.push((start, Tok::Number(value)));
            continue;
        }
        if is_word_start(c) {
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
            toks.push((start, Tok::Word(chars[start..i].iter().collect())));
            continue;
        }
        if c == '"' || c == '\'' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => {
                        let what = if c == '"' { "closing `\"`" } else { "closing `'`" };
                        return Err(syntax(i, what, "end of formula"));
                    }
                    Some(&q) if q == c => {
                        if chars.get(i + 1) == Some(&c) {
                            s.push(c);
                            i += 2;
                        } else {
                            i += 1;
                            break;
                        }
                    }
                    Some(&other) => {
                        s.push(other);
                        i += 1;
                    }
                }
            }
            toks.push((start, if c == '"' { Tok::Str(s) } else { Tok::QuotedSheet(s) }));
            continue;
        }
        let two: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let op = match two.as_str() {
            "<>" => Some("<>"),
            "<=" => Some("<="),
            ">=" => Some(">="),
            _ => None,
        };
        if let Some(op) = op {
            toks.push((start, Tok::Op(op)));
            i += 2;
            continue;
        }
        let op = match c {
            '(' => "(",
            ')' => ")",
            ',' => ",",
            ':' => ":",
            '!' => "!",
            '+' => "+",
            '-' => "-",
            '*' => "*",
            '/' => "/",
            '^' => "^",
            '&' => "&",
            '%' => "%",
            '=' => "=",
            '<' => "<",
            '>' => ">",
            other => return Err(syntax(start, "operator or operand", format!("`{other}`"))),
        };
        toks.push((start, Tok::Op(op)));
        i += 1;
    }
    toks.push((chars.len(), Tok::Eof));
    Ok(toks)
}

/// Recognized reference word: `[$]letters[$]digits`.
enum RefWord {
    NotRef,
    Ref { col: (bool, u32), row: (bool, u32) },
    OutOfRange,
}

fn classify_ref_word(word: &str) -> RefWord {
    let b = word.as_bytes();
    let mut i = 0;
    let col_abs = b.first() == Some(&b'$');
    if col_abs {
        i += 1;
    }
    let letters_start = i;
    while i < b.len() && b[i].is_ascii_alphabetic() {
        i += 1;
    }
    let letters = &word[letters_start..i];
    let row_abs = b.get(i) == Some(&b'$');
    if row_abs {
        i += 1;
    }
    let digits = &word[i..];
    if letters.is_empty() || digits.is_empty() || !digits.bytes().all(|d| d.is_ascii_digit()) {
        return RefWord::NotRef;
    }
    let col = parse_column(letters);
    let row = digits.parse::<u64>().ok().filter(|r| (1..=u64::from(MAX_ROW)).contains(r));
    match (col, row) {
        (Some(c), Some(r)) if c <= MAX_COL => RefWord::Ref {
            col: (col_abs, c),
            row: (row_abs, r as u32),
        },
        _ => RefWord::OutOfRange,
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    origin_col: u32,
    origin_row: u32,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> (usize, Tok) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if matches!(self.peek(), Tok::Op(o) if *o == op) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &'static str) -> Result<(), ParseError> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(syntax(self.offset(), format!("`{op}`"), self.peek().to_string()))
        }
    }

    fn binary_level(
        &mut self,
        ops: &[(&'static str, BinaryOp)],
        next: fn(&mut Self) -> Result<Expr, ParseError>,
    ) -> Result<Expr, ParseError> {
        let mut lhs = next(self)?;
        'outer: loop {
            for &(sym, op) in ops {
                if self.eat_op(sym) {
                    let rhs = next(self)?;
                    lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary_level(
            &[
                ("=", BinaryOp::Eq),
                ("<>", BinaryOp::Ne),
                ("<=", BinaryOp::Le),
                (">=", BinaryOp::Ge),
                ("<", BinaryOp::Lt),
                (">", BinaryOp::Gt),
            ],
            Self::concat,
        )
    }

    fn concat(&mut self) -> Result<Expr, ParseError> {
        self.binary_level(&[("&", BinaryOp::Concat)], Self::additive)
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        self.binary_level(&[("+", BinaryOp::Add), ("-", BinaryOp::Sub)], Self::multiplicative)
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        self.binary_level(&[("*", BinaryOp::Mul), ("/", BinaryOp::Div)], Self::unary)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_op("-") {
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.postfix()?;
        if self.eat_op("^") {
            let exp = self.unary()?;
            return Ok(Expr::Binary(BinaryOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let atom = self.atom()?;
        if self.eat_op("%") {
            return Ok(Expr::Unary(UnaryOp::Percent, Box::new(atom)));
        }
        Ok(atom)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                Ok(Expr::Number(n))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Text(s))
            }
            Tok::QuotedSheet(sheet) => {
                self.bump();
                self.expect_op("!")?;
                self.reference_expr(Some(sheet))
            }
            Tok::Op("(") => {
                self.bump();
                let inner = self.expr()?;
                self.expect_op(")")?;
                Ok(inner)
            }
            Tok::Word(word) => {
                if *self.peek_at(1) == Tok::Op("(") {
                    if !is_function_name(&word) {
                        return Err(syntax(at, "function name", format!("`{word}`")));
                    }
                    self.bump();
                    self.bump();
                    return self.call(word.to_ascii_uppercase());
                }
                if *self.peek_at(1) == Tok::Op("!") {
                    if word.contains('$') {
                        return Err(syntax(at, "sheet name", format!("`{word}`")));
                    }
                    self.bump();
                    self.bump();
                    return self.reference_expr(Some(word));
                }
                if word.eq_ignore_ascii_case("TRUE") || word.eq_ignore_ascii_case("FALSE") {
                    self.bump();
                    return Ok(Expr::Bool(word.eq_ignore_ascii_case("TRUE")));
                }
                self.reference_expr(None)
            }
            other => Err(syntax(at, "operand", other.to_string())),
        }
    }

    fn call(&mut self, name: String) -> Result<Expr, ParseError> {
        let mut args = Vec::new();
        if self.eat_op(")") {
            return Ok(Expr::Call { name, args });
        }
        loop {
            args.push(self.expr()?);
            if self.eat_op(",") {
                continue;
            }
            if self.eat_op(")") {
                return Ok(Expr::Call { name, args });
            }
            return Err(syntax(self.offset(), "`,` or `)`", self.peek().to_string()));
        }
    }

    fn single_ref(&mut self, sheet: Option<String>) -> Result<Reference, ParseError> {
        let at = self.offset();
        let word = match self.peek() {
            Tok::Word(w) => w.clone(),
            other => return Err(syntax(at, "cell reference", other.to_string())),
        };
        match classify_ref_word(&word) {
            RefWord::NotRef => Err(syntax(at, "cell reference, function call or literal", format!("`{word}`"))),
            RefWord::OutOfRange => Err(ParseError {
                position: at,
                kind: ParseErrorKind::OutOfRange { reference: word },
            }),
            RefWord::Ref {
                col: (col_abs, col),
                row: (row_abs, row),
            } => {
                self.bump();
                let axis = |abs: bool, idx: u32, origin: u32| {
                    if abs {
                        Axis::Absolute(idx)
                    } else {
                        Axis::Relative(i64::from(idx) - i64::from(origin))
                    }
                };
                Ok(Reference {
                    sheet,
                    col: axis(col_abs, col, self.origin_col),
                    row: axis(row_abs, row, self.origin_row),
                })
            }
        }
    }

    fn reference_expr(&mut self, sheet: Option<String>) -> Result<Expr, ParseError> {
        let at = self.offset();
        let start = self.single_ref(sheet.clone())?;
        if !self.eat_op(":") {
            return Ok(Expr::Cell(start));
        }
        let end_sheet = match (self.peek().clone(), self.peek_at(1).clone()) {
            (Tok::QuotedSheet(s), Tok::Op("!")) | (Tok::Word(s), Tok::Op("!")) => {
                self.bump();
                self.bump();
                Some(s)
            }
            _ => None,
        };
        if end_sheet.is_some() && end_sheet != sheet {
            return Err(ParseError {
                position: at,
                kind: ParseErrorKind::RangeSheetMismatch,
            });
        }
        let end = self.single_ref(sheet)?;
        Ok(Expr::Range(RangeRef { start, end }))
    }
}

fn is_function_name(word: &str) -> bool {
    word.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') && !word.contains('$')
}

/// Parses `text` (which must start with `=`) as the formula of the cell at
/// `(origin_col, origin_row)`.
pub fn parse(text: &str, origin_col: u32, origin_row: u32) -> Result<Expr, ParseError> {
    let body = match text.strip_prefix('=') {
        Some(b) => b,
        None => {
            let found = text.chars().next().map_or("end of formula".to_string(), |c| format!("`{c}`"));
            return Err(syntax(0, "`=`", found));
        }
    };
    let toks = lex(body)?
        .into_iter()
        .map(|(p, t)| (p + 1, t))
        .collect();
    let mut p = Parser {
        toks,
        pos: 0,
        origin_col,
        origin_row,
    };
    let expr = p.expr()?;
    match p.peek() {
        Tok::Eof => Ok(expr),
        other => Err(syntax(p.offset(), "operator or end of formula", other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(col: Axis, row: Axis) -> Expr {
        Expr::Cell(Reference { sheet: None, col, row })
    }

    #[test]
    fn relative_offsets() {
        // origin C1
        let ast = parse("=A1+B1", 3, 1).unwrap();
        assert_eq!(
            ast,
            Expr::Binary(
                BinaryOp::Add,
                Box::new(cell(Axis::Relative(-2), Axis::Relative(0))),
                Box::new(cell(Axis::Relative(-1), Axis::Relative(0))),
            )
        );
    }

    #[test]
    fn absolute_axes() {
        // origin B5
        let ast = parse("=$A$1*2", 2, 5).unwrap();
        assert_eq!(
            ast,
            Expr::Binary(
                BinaryOp::Mul,
                Box::new(cell(Axis::Absolute(1), Axis::Absolute(1))),
                Box::new(Expr::Number(2.0)),
            )
        );
    }

    #[test]
    fn mixed_axes() {
        let ast = parse("=$A1+A$1", 3, 4).unwrap();
        assert_eq!(
            ast,
            Expr::Binary(
                BinaryOp::Add,
                Box::new(cell(Axis::Absolute(1), Axis::Relative(-3))),
                Box::new(cell(Axis::Relative(-2), Axis::Absolute(1))),
            )
        );
    }

    #[test]
    fn sum_range() {
        // origin B1
        let ast = parse("=SUM(A1:A10)", 2, 1).unwrap();
        let start = Reference {
            sheet: None,
            col: Axis::Relative(-1),
            row: Axis::Relative(0),
        };
        let end = Reference {
            sheet: None,
            col: Axis::Relative(-1),
            row: Axis::Relative(9),
        };
        assert_eq!(
            ast,
            Expr::Call {
                name: "SUM".into(),
                args: vec![Expr::Range(RangeRef { start, end })],
            }
        );
    }

    #[test]
    fn incomplete_expression() {
        let err = parse("=1+", 1, 1).unwrap_err();
        assert_eq!(err.position, 3);
        assert!(matches!(err.kind, ParseErrorKind::Syntax { .. }));
    }

    #[test]
    fn case_and_whitespace_are_not_significant() {
        let a = parse("=sum( a1 : a3 ) * 2", 2, 1).unwrap();
        let b = parse("=SUM(A1:A3)*2", 2, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn precedence_follows_grammar() {
        let ast = parse("=1+2*3^2%", 1, 1).unwrap();
        let expected = Expr::Binary(
            BinaryOp::Add,
            Box::new(Expr::Number(1.0)),
            Box::new(Expr::Binary(
                BinaryOp::Mul,
                Box::new(Expr::Number(2.0)),
                Box::new(Expr::Binary(
                    BinaryOp::Pow,
                    Box::new(Expr::Number(3.0)),
                    Box::new(Expr::Unary(UnaryOp::Percent, Box::new(Expr::Number(2.0)))),
                )),
            )),
        );
        assert_eq!(ast, expected);
        // right-associative ^
        let pow = parse("=2^3^4", 1, 1).unwrap();
        assert!(matches!(pow, Expr::Binary(BinaryOp::Pow, ref l, _) if **l == Expr::Number(2.0)));
        // unary minus applies to the whole power
        let neg = parse("=-2^2", 1, 1).unwrap();
        assert!(matches!(neg, Expr::Unary(UnaryOp::Neg, ref inner) if matches!(**inner, Expr::Binary(BinaryOp::Pow, ..))));
        // comparisons are lowest and left-assoc
        let cmp = parse("=1<2=TRUE", 1, 1).unwrap();
        assert!(matches!(cmp, Expr::Binary(BinaryOp::Eq, ref l, _) if matches!(**l, Expr::Binary(BinaryOp::Lt, ..))));
        let cat = parse("=\"a\"&1+2", 1, 1).unwrap();
        assert!(matches!(cat, Expr::Binary(BinaryOp::Concat, ..)));
    }

    #[test]
    fn sheet_qualifiers() {
        let ast = parse("=Sheet2!A1+'My Sheet'!$B$2", 2, 2).unwrap();
        let refs = ast.references();
        match (refs[0], refs[1]) {
            (super::super::RefNode::Cell(a), super::super::RefNode::Cell(b)) => {
                assert_eq!(a.sheet.as_deref(), Some("Sheet2"));
                assert_eq!(b.sheet.as_deref(), Some("My Sheet"));
            }
            _ => panic!("expected two cell refs"),
        }
        let range = parse("=SUM(Data!A1:Data!A3)", 2, 1).unwrap();
        assert_eq!(range, parse("=SUM(Data!A1:A3)", 2, 1).unwrap());
        let err = parse("=SUM(Data!A1:Other!A3)", 2, 1).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::RangeSheetMismatch);
    }

    #[test]
    fn string_and_bool_literals() {
        let ast = parse("=IF(A1=\"say \"\"hi\"\"\",true,FALSE)", 2, 1).unwrap();
        match ast {
            Expr::Call { name, args } => {
                assert_eq!(name, "IF");
                assert_eq!(args.len(), 3);
                assert!(matches!(&args[0], Expr::Binary(BinaryOp::Eq, _, r) if **r == Expr::Text("say \"hi\"".into())));
                assert_eq!(args[1], Expr::Bool(true));
                assert_eq!(args[2], Expr::Bool(false));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("=NOW()", 1, 1).unwrap(), Expr::Call { ref args, .. } if args.is_empty()));
    }

    #[test]
    fn range_diagnostics() {
        let err = parse("=AAAA1", 1, 1).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::OutOfRange { .. }));
        assert_eq!(err.position, 1);
        let err = parse("=A1048577", 1, 1).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::OutOfRange { .. }));
        let err = parse("=1+A0", 1, 1).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::OutOfRange { .. }));
        assert!(parse("=ZZZ1048576", 1, 1).is_ok());
    }

    #[test]
    fn unsupported_syntax_is_rejected() {
        for text in ["={1,2}", "=[Book]Sheet!A1", "=A1 B1", "=(A1,B1)", "=#REF!", "=+A1", "=A1:", "=1e999", "=FOO", "=SUM(A1", "=\"open", "1+1", "="] {
            assert!(parse(text, 1, 1).is_err(), "{text} should not parse");
        }
    }
}
