//! Regular-expression subset for value generation.
//!
//! Literals, escapes, `.`, character classes, groups, alternation, the
//! quantifiers `* + ? {n} {n,} {n,m}` and edge anchors. Anything else
//! (backreferences, lookaround, inline flags, word boundaries, unicode
//! classes) is reported as unsupported.

use std::fmt;

use rand::Rng;

/// Upper repetition used when a quantifier is unbounded.
const OPEN_REPEAT_EXTRA: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegexError {
    unsupported: bool,
    message: String,
}

impl RegexError {
    fn syntax(msg: impl Into<String>) -> Self {
        RegexError {
            unsupported: false,
            message: msg.into(),
        }
    }

    fn unsupported(msg: impl Into<String>) -> Self {
        RegexError {
            unsupported: true,
            message: msg.into(),
        }
    }

    pub fn is_unsupported(&self) -> bool {
        self.unsupported
    }
}

impl fmt::Display for RegexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for RegexError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegexAst {
    Empty,
    Literal(char),
    /// Inclusive character ranges; never empty.
    Class(Vec<(char, char)>),
    Concat(Vec<RegexAst>),
    Alt(Vec<RegexAst>),
    Repeat {
        inner: Box<RegexAst>,
        min: u32,
        max: Option<u32>,
    },
}

const PRINTABLE: (char, char) = (' ', '~');

impl RegexAst {
    pub fn parse(pattern: &str) -> Result<RegexAst, RegexError> {
        let chars: Vec<char> = pattern.chars().collect();
        let mut p = RegexParser { chars, pos: 0 };
        if p.peek() == Some('^') {
            p.pos += 1;
        }
        let ast = p.alternation()?;
        if p.peek() == Some('$') && p.pos + 1 == p.chars.len() {
            p.pos += 1;
        }
        if p.pos != p.chars.len() {
            return match p.peek() {
                Some(')') => Err(RegexError::syntax("unbalanced ')'")),
                Some('^') | Some('$') => Err(RegexError::unsupported("anchor in the middle of a pattern")),
                Some(c) => Err(RegexError::syntax(format!("unexpected '{c}'"))),
                None => Err(RegexError::syntax("unexpected end")),
            };
        }
        Ok(ast)
    }

    /// Top-level items that can be regenerated independently.
    pub fn items(&self) -> Vec<&RegexAst> {
        match self {
            RegexAst::Concat(v) => v.iter().collect(),
            other => vec![other],
        }
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut String) {
        match self {
            RegexAst::Empty => {}
            RegexAst::Literal(c) => out.push(*c),
            RegexAst::Class(ranges) => out.push(pick_from_ranges(ranges, rng)),
            RegexAst::Concat(items) => items.iter().for_each(|i| i.generate(rng, out)),
            RegexAst::Alt(alts) => alts[rng.gen_range(0..alts.len())].generate(rng, out),
            RegexAst::Repeat { inner, min, max } => {
                let hi = max.unwrap_or(min + OPEN_REPEAT_EXTRA);
                let n = rng.gen_range(*min..=hi);
                for _ in 0..n {
                    inner.generate(rng, out);
                }
            }
        }
    }
}

fn pick_from_ranges<R: Rng + ?Sized>(ranges: &[(char, char)], rng: &mut R) -> char {
    let total: u32 = ranges.iter().map(|(a, b)| *b as u32 - *a as u32 + 1).sum();
    let mut k = rng.gen_range(0..total);
    for (a, b) in ranges {
        let width = *b as u32 - *a as u32 + 1;
        if k < width {
            return char::from_u32(*a as u32 + k).unwrap_or(*a);
        }
        k -= width;
    }
    ranges[0].0
}

struct RegexParser {
    chars: Vec<char>,
    pos: usize,
}

impl RegexParser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<char> {
        let c = self.peek();
        self.pos += 1;
        c
    }

    fn alternation(&mut self) -> Result<RegexAst, RegexError> {
        let mut alts = vec![self.concat()?];
        while self.peek() == Some('|') {
            self.pos += 1;
            alts.push(self.concat()?);
        }
        Ok(if alts.len() == 1 { alts.pop().unwrap() } else { RegexAst::Alt(alts) })
    }

    fn concat(&mut self) -> Result<RegexAst, RegexError> {
        let mut items = Vec::new();
        while let Some(c) = self.peek() {
            if c == '|' || c == ')' {
                break;
            }
            if c == '$' && self.pos + 1 == self.chars.len() {
                break;
            }
            let atom = self.atom()?;
            items.push(self.quantified(atom)?);
        }
        Ok(match items.len() {
            0 => RegexAst::Empty,
            1 => items.pop().unwrap(),
            _ => RegexAst::Concat(items),
        })
    }

    fn quantified(&mut self, atom: RegexAst) -> Result<RegexAst, RegexError> {
        let (min, max) = match self.peek() {
            Some('*') => (0, None),
            Some('+') => (1, None),
            Some('?') => (0, Some(1)),
            Some('{') => {
                let save = self.pos;
                match self.braces()? {
                    Some(b) => {
                        self.pos -= 1;
                        b
                    }
                    None => {
                        self.pos = save;
                        return Ok(atom);
                    }
                }
            }
            _ => return Ok(atom),
        };
        self.pos += 1;
        match self.peek() {
            Some('?') => self.pos += 1,
            Some('+') => return Err(RegexError::unsupported("possessive quantifier")),
            Some('*') | Some('{') => return Err(RegexError::syntax("nested quantifier")),
            _ => {}
        }
        if matches!(atom, RegexAst::Empty) {
            return Err(RegexError::syntax("quantifier without operand"));
        }
        Ok(RegexAst::Repeat {
            inner: Box::new(atom),
            min,
            max,
        })
    }

    /// Parses `{n}`, `{n,}` or `{n,m}`; leaves `pos` after the closing brace.
    fn braces(&mut self) -> Result<Option<(u32, Option<u32>)>, RegexError> {
        self.pos += 1;
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == ',') {
            self.pos += 1;
        }
        if self.peek() != Some('}') {
            return Ok(None);
        }
        let body: String = self.chars[start..self.pos].iter().collect();
        self.pos += 1;
        let parse = |s: &str| s.parse::<u32>().map_err(|_| RegexError::syntax(format!("bad repetition '{{{body}}}'")));
        let (min, max) = match body.split_once(',') {
            None => {
                let n = parse(&body)?;
                (n, Some(n))
            }
            Some((a, "")) => (parse(a)?, None),
            Some((a, b)) => (parse(a)?, Some(parse(b)?)),
        };
        if let Some(m) = max {
            if m < min {
                return Err(RegexError::syntax(format!("bad repetition '{{{body}}}'")));
            }
        }
        Ok(Some((min, max)))
    }

    fn atom(&mut self) -> Result<RegexAst, RegexError> {
        match self.next() {
            None => Err(RegexError::syntax("unexpected end")),
            Some('(') => {
                if self.peek() == Some('?') {
                    self.pos += 1;
                    if self.peek() == Some(':') {
                        self.pos += 1;
                    } else {
                        return Err(RegexError::unsupported("group modifiers (lookaround, flags, named groups)"));
                    }
                }
                let inner = self.alternation()?;
                if self.next() != Some(')') {
                    return Err(RegexError::syntax("unclosed group"));
                }
                Ok(inner)
            }
            Some('[') => self.class(),
            Some('.') => Ok(RegexAst::Class(vec![PRINTABLE])),
            Some('\\') => self.escape(false).map(|r| match r {
                Escaped::Char(c) => RegexAst::Literal(c),
                Escaped::Ranges(v) => RegexAst::Class(v),
            }),
            Some(c @ ('*' | '+' | '?')) => Err(RegexError::syntax(format!("dangling '{c}'"))),
            Some('^') | Some('$') => Err(RegexError::unsupported("anchor in the middle of a pattern")),
            Some(c) => Ok(RegexAst::Literal(c)),
        }
    }

    fn escape(&mut self, in_class: bool) -> Result<Escaped, RegexError> {
        let c = self.next().ok_or_else(|| RegexError::syntax("trailing backslash"))?;
        Ok(match c {
            'd' => Escaped::Ranges(vec![('0', '9')]),
            'w' => Escaped::Ranges(vec![('0', '9'), ('A', 'Z'), ('_', '_'), ('a', 'z')]),
            's' => Escaped::Ranges(vec![('\t', '\n'), ('\r', '\r'), (' ', ' ')]),
            'D' => Escaped::Ranges(complement(&[('0', '9')])),
            'W' => Escaped::Ranges(complement(&[('0', '9'), ('A', 'Z'), ('_', '_'), ('a', 'z')])),
            'S' => Escaped::Ranges(complement(&[(' ', ' ')])),
            'n' => Escaped::Char('\n'),
            't' => Escaped::Char('\t'),
            'r' => Escaped::Char('\r'),
            'b' if in_class => Escaped::Char('\u{8}'),
            '1'..='9' => return Err(RegexError::unsupported("backreference")),
            'b' | 'B' | 'A' | 'z' | 'Z' | 'G' => return Err(RegexError::unsupported(format!("assertion \\{c}"))),
            'p' | 'P' | 'u' | 'x' | 'Q' | 'E' | 'k' => {
                return Err(RegexError::unsupported(format!("escape \\{c}")))
            }
            c if c.is_ascii_alphanumeric() => return Err(RegexError::syntax(format!("unknown escape \\{c}"))),
            c => Escaped::Char(c),
        })
    }

    fn class(&mut self) -> Result<RegexAst, RegexError> {
        let negated = if self.peek() == Some('^') {
            self.pos += 1;
            true
        } else {
            false
        };
        let mut ranges: Vec<(char, char)> = Vec::new();
        let mut first = true;
        loop {
            let c = self.next().ok_or_else(|| RegexError::syntax("unclosed character class"))?;
            if c == ']' && !first {
                break;
            }
            first = false;
            if c == '[' && self.peek() == Some(':') {
                return Err(RegexError::unsupported("POSIX character class"));
            }
            let lo = if c == '\\' {
                match self.escape(true)? {
                    Escaped::Char(c) => c,
                    Escaped::Ranges(v) => {
                        ranges.extend(v);
                        continue;
                    }
                }
            } else {
                c
            };
            if self.peek() == Some('-') && self.chars.get(self.pos + 1).is_some_and(|c| *c != ']') {
                self.pos += 1;
                let hi = match self.next() {
                    Some('\\') => match self.escape(true)? {
                        Escaped::Char(c) => c,
                        Escaped::Ranges(_) => return Err(RegexError::syntax("class shorthand as range bound")),
                    },
                    Some(c) => c,
                    None => return Err(RegexError::syntax("unclosed character class")),
                };
                if hi < lo {
                    return Err(RegexError::syntax(format!("invalid range {lo}-{hi}")));
                }
                ranges.push((lo, hi));
            } else {
                ranges.push((lo, lo));
            }
        }
        let ranges = if negated { complement(&ranges) } else { normalize(ranges) };
        if ranges.is_empty() {
            return Err(RegexError::unsupported("character class matches no printable character"));
        }
        Ok(RegexAst::Class(ranges))
    }
}

enum Escaped {
    Char(char),
    Ranges(Vec<(char, char)>),
}

fn normalize(mut v: Vec<(char, char)>) -> Vec<(char, char)> {
    v.sort();
    let mut out: Vec<(char, char)> = Vec::new();
    for (a, b) in v {
        match out.last_mut() {
            Some(last) if (a as u32) <= last.1 as u32 + 1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Printable ASCII characters outside `v`.
fn complement(v: &[(char, char)]) -> Vec<(char, char)> {
    let v = normalize(v.to_vec());
    let mut out = Vec::new();
    let mut next = PRINTABLE.0 as u32;
    for (a, b) in v {
        let (a, b) = (a as u32, b as u32);
        if b < next {
            continue;
        }
        if a > next {
            let hi = (a - 1).min(PRINTABLE.1 as u32);
            if hi >= next {
                out.push((char::from_u32(next).unwrap(), char::from_u32(hi).unwrap()));
            }
        }
        next = next.max(b + 1);
    }
    if next <= PRINTABLE.1 as u32 {
        out.push((char::from_u32(next).unwrap(), PRINTABLE.1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn sample(pattern: &str, seed: u64) -> String {
        let ast = RegexAst::parse(pattern).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut s = String::new();
        ast.generate(&mut rng, &mut s);
        s
    }

    #[test]
    fn generates_fixed_shapes() {
        for seed in 0..50 {
            let s = sample("^[A-Z]{3}-\\d{2,4}$", seed);
            let (head, tail) = s.split_once('-').unwrap();
            assert!(head.len() == 3 && head.chars().all(|c| c.is_ascii_uppercase()), "{s}");
            assert!((2..=4).contains(&tail.len()) && tail.chars().all(|c| c.is_ascii_digit()), "{s}");
        }
    }

    #[test]
    fn alternation_and_groups() {
        for seed in 0..50 {
            let s = sample("(?:jan|feb)(-x)?", seed);
            assert!(["jan", "feb", "jan-x", "feb-x"].contains(&s.as_str()), "{s}");
        }
    }

    #[test]
    fn negated_class_stays_printable() {
        for seed in 0..50 {
            let s = sample("[^a-z]+", seed);
            assert!(s.chars().all(|c| (' '..='~').contains(&c) && !c.is_ascii_lowercase()), "{s}");
        }
    }

    #[test]
    fn unsupported_vs_syntax() {
        for p in ["(a)\\1", "(?=a)b", "\\bword", "(?i)abc", "a*+", "\\p{L}"] {
            let e = RegexAst::parse(p).unwrap_err();
            assert!(e.is_unsupported(), "{p}: {e}");
        }
        for p in ["(ab", "a{3,1}", "*a", "[z-a]", "ab)"] {
            let e = RegexAst::parse(p).unwrap_err();
            assert!(!e.is_unsupported(), "{p}: {e}");
        }
    }

    #[test]
    fn literal_brace_is_not_a_quantifier() {
        assert_eq!(sample("a{x}", 1), "a{x}");
    }
}
