use super::{is_ident_char, Bound, BoundValue, Interval, Predicate, SpecFormula};
use crate::condition::CmpOp;
use crate::time::{DaySet, Recurrence, DAY_NAMES};

/// A parse failure at a character position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at position {position}: {message}")]
pub struct SyntaxError {
    pub position: usize,
    pub message: String,
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(SyntaxError { position: self.pos, message: message.into() })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, s: &str) -> bool {
        let n = s.chars().count();
        if self.chars.len() >= self.pos + n && self.chars[self.pos..self.pos + n].iter().copied().eq(s.chars()) {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> PResult<()> {
        if self.eat(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn nat(&mut self) -> PResult<u64> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected a natural number");
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse().or_else(|_| {
            self.pos = start;
            self.err("number out of range")
        })
    }

    fn ident(&mut self) -> PResult<String> {
        let start = self.pos;
        while self.peek().is_some_and(is_ident_char) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected an identifier");
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn formula(&mut self) -> PResult<SpecFormula> {
        self.expect("G")?;
        let interval = if self.eat("[") {
            let at = self.pos;
            let lo = self.nat()?;
            self.expect(",")?;
            let hi = self.nat()?;
            self.expect("]")?;
            if lo > hi {
                return Err(SyntaxError { position: at, message: format!("interval [{lo},{hi}] has lo > hi") });
            }
            Some(Interval { lo, hi })
        } else {
            None
        };
        self.expect(" (")?;
        let guarded = self.chars[self.pos..].iter().take(10).copied().eq("in_window(".chars());
        let body = if guarded { self.guard()? } else { self.npred()? };
        self.expect(")")?;
        if self.pos != self.chars.len() {
            return self.err("trailing input");
        }
        Ok(SpecFormula::Globally { interval, body: Box::new(body) })
    }

    fn guard(&mut self) -> PResult<SpecFormula> {
        self.expect("in_window(")?;
        let at = self.pos;
        let days = self.days()?;
        self.expect(",")?;
        let start = self.nat()?;
        self.expect(",")?;
        let end = self.nat()?;
        self.expect(")")?;
        let recurrence = u32::try_from(start)
            .ok()
            .zip(u32::try_from(end).ok())
            .and_then(|(s, e)| Recurrence::new(days, s, e))
            .ok_or_else(|| SyntaxError {
                position: at,
                message: format!("window {start}..{end} must satisfy start < end < 86400"),
            })?;
        self.expect(" -> (")?;
        let body = self.npred()?;
        self.expect(")")?;
        Ok(SpecFormula::Guard { recurrence, body: Box::new(body) })
    }

    fn day(&mut self) -> PResult<usize> {
        for (i, name) in DAY_NAMES.iter().enumerate() {
            if self.eat(name) {
                return Ok(i);
            }
        }
        self.err("expected a day name")
    }

    fn days(&mut self) -> PResult<DaySet> {
        let mut set = DaySet::EMPTY;
        loop {
            let a = self.day()?;
            let b = if self.eat("-") { self.day()? } else { a };
            set = set.union(DaySet::range(a, b));
            if !self.eat("+") {
                return Ok(set);
            }
        }
    }

    fn npred(&mut self) -> PResult<SpecFormula> {
        if self.eat("!(") {
            let p = self.pred()?;
            self.expect(")")?;
            Ok(SpecFormula::Not(Box::new(p)))
        } else {
            self.pred()
        }
    }

    fn pred(&mut self) -> PResult<SpecFormula> {
        let entity = self.ident()?;
        let quantifier = if self.eat("{") {
            let q = self.ident()?;
            self.expect("}")?;
            Some(q)
        } else {
            None
        };
        self.expect("@")?;
        let location = self.ident()?;
        self.expect(" ")?;
        let op = if self.eat("<=") {
            CmpOp::Le
        } else if self.eat(">=") {
            CmpOp::Ge
        } else if self.eat("==") {
            CmpOp::Eq
        } else if self.eat("<") {
            CmpOp::Lt
        } else if self.eat(">") {
            CmpOp::Gt
        } else {
            return self.err("expected a comparison operator");
        };
        self.expect(" ")?;
        let value = self.value()?;
        Ok(SpecFormula::Predicate(Predicate { entity, quantifier, location, bound: Bound { op, value } }))
    }

    fn value(&mut self) -> PResult<BoundValue> {
        if self.eat("level(") {
            let scale = self.ident()?;
            self.expect(",")?;
            let index = self.nat()?;
            self.expect(")")?;
            let index = usize::try_from(index).or_else(|_| self.err("level index out of range"))?;
            return Ok(BoundValue::Level { scale, index });
        }
        let start = self.pos;
        self.eat("-");
        let int_start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if int_start == self.pos {
            return self.err("expected a number or level(...)");
        }
        if self.eat(".") {
            let frac = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            if frac == self.pos {
                return self.err("expected digits after the decimal point");
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let magnitude: f64 = text.parse().or_else(|_| self.err("bad number"))?;
        if !magnitude.is_finite() {
            return self.err("number out of range");
        }
        let unit = if self.eat(" ") {
            let u = self.pos;
            while self.peek().is_some_and(|c| c != ')' && c != '(') {
                self.pos += 1;
            }
            if u == self.pos {
                return self.err("expected a unit");
            }
            self.chars[u..self.pos].iter().collect()
        } else {
            String::new()
        };
        Ok(BoundValue::Number { magnitude, unit })
    }
}

/// Parses the canonical text produced by [`super::render_formal`].
pub fn parse_formula(text: &str) -> Result<SpecFormula, SyntaxError> {
    let mut p = Parser { chars: text.chars().collect(), pos: 0 };
    if p.chars.is_empty() {
        return p.err("empty input");
    }
    p.formula()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::render_formal;

    #[test]
    fn round_trips() {
        for s in [
            "G[0,86400] (indoor_concentrations{carbon_monoxide}@buildings <= 7 mg/m3)",
            "G (in_window(Mon-Fri,50400,61200) -> (average_concentration{tetrachloroethylene}@all_the_buildings <= 0.25 mg/m3))",
            "G (x@y == 2)",
            "G (!(x@y == -2.5 parts per million))",
            "G[0,7200] (air_quality@school > level(air-quality,4))",
            "G (in_window(Mon+Wed-Thu+Sun,0,1) -> (!(a{b}@c < 0)))",
        ] {
            let f = parse_formula(s).unwrap_or_else(|e| panic!("{s}: {e}"));
            assert_eq!(render_formal(&f), s);
        }
    }

    #[test]
    fn interval_order() {
        let e = parse_formula("G[5,1] (x@y <= 2)").unwrap_err();
        assert_eq!(e.position, 2);
    }

    #[test]
    fn empty() {
        assert_eq!(parse_formula("").unwrap_err().position, 0);
    }

    #[test]
    fn rejects_outside_grammar() {
        for s in [
            "F (x@y <= 2)",
            "G (x@y <= 2",
            "G (x@y <= 2) extra",
            "G (x@y <=2)",
            "G (x{}@y <= 2)",
            "G (in_window(Mon-Fri,61200,50400) -> (x@y <= 2))",
            "G (in_window(Fun,0,1) -> (x@y <= 2))",
            "G (x@y <= level(s,))",
            "G  (x@y <= 2)",
        ] {
            assert!(parse_formula(s).is_err(), "{s}");
        }
    }

    #[test]
    fn guard_name_is_not_an_identifier_prefix() {
        assert!(parse_formula("G (in_door{x}@y <= 2)").is_ok());
    }
}
