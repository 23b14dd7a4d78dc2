use rand::Rng;
use serde_json::Value;

use super::regex::RegexAst;
use super::Mutation;

/// Printable, non-blank character range used by string genes.
pub const CHAR_LO: u32 = 0x21;
pub const CHAR_HI: u32 = 0x7E;

/// Probability that a numeric mutation resamples uniformly instead of stepping.
const P_NUMERIC_RESET: f64 = 0.1;

/// `value ± 2^k`, with small `k` more likely, clamped to `[min, max]`.
fn int_step<R: Rng + ?Sized>(rng: &mut R, value: i128, min: i128, max: i128) -> i128 {
    if min == max {
        return value;
    }
    if rng.gen_bool(P_NUMERIC_RESET) {
        let v = rng.gen_range(min..=max);
        if v != value {
            return v;
        }
    }
    let width = max.abs_diff(min);
    let bits = 128 - width.leading_zeros();
    let hi = rng.gen_range(0..bits);
    let k = rng.gen_range(0..=hi);
    let delta = 1i128 << k;
    let up = rng.gen_bool(0.5);
    let stepped = |up: bool| {
        if up {
            value.saturating_add(delta).min(max)
        } else {
            value.saturating_sub(delta).max(min)
        }
    };
    let v = stepped(up);
    if v != value {
        v
    } else {
        stepped(!up)
    }
}

/// INT, LONG, SHORT and BYTE values, optionally rendered as a numeric string.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegerGene {
    pub min: i64,
    pub max: i64,
    pub value: i64,
    pub as_string: bool,
}

impl IntegerGene {
    pub fn new(min: i64, max: i64) -> Self {
        IntegerGene {
            min,
            max,
            value: min.max(0).min(max),
            as_string: false,
        }
    }

    pub fn randomize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.value = rng.gen_range(self.min..=self.max);
    }

    pub fn mutate<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Mutation {
        let v = int_step(rng, self.value as i128, self.min as i128, self.max as i128) as i64;
        Mutation::of(std::mem::replace(&mut self.value, v) != v)
    }

    pub fn render(&self) -> Value {
        if self.as_string {
            Value::String(self.value.to_string())
        } else {
            Value::from(self.value)
        }
    }
}

/// FLOAT and DOUBLE values, optionally limited to `scale` fractional digits.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatGene {
    pub min: f64,
    pub max: f64,
    pub value: f64,
    pub scale: Option<u32>,
    /// Values must be representable as 32-bit floats.
    pub single: bool,
    pub as_string: bool,
}

impl FloatGene {
    pub fn new(min: f64, max: f64, scale: Option<u32>, single: bool) -> Self {
        let mut g = FloatGene {
            min,
            max,
            value: 0.0,
            scale,
            single,
            as_string: false,
        };
        g.value = g.fit(0.0);
        g
    }

    /// Nearest admissible value.
    pub fn fit(&self, v: f64) -> f64 {
        let mut v = if v.is_nan() { self.min } else { v.clamp(self.min, self.max) };
        if let Some(s) = self.scale {
            let f = 10f64.powi(s.min(22) as i32);
            let mut r = (v * f).round() / f;
            if r < self.min {
                r = (v * f).ceil() / f;
            } else if r > self.max {
                r = (v * f).floor() / f;
            }
            if r >= self.min && r <= self.max {
                v = r;
            }
        }
        if self.single {
            let mut f = v as f32;
            if (f as f64) < self.min {
                f = f32::from_bits(if f >= 0.0 { f.to_bits() + 1 } else { f.to_bits() - 1 });
            } else if (f as f64) > self.max {
                f = f32::from_bits(if f > 0.0 { f.to_bits() - 1 } else { f.to_bits() + 1 });
            }
            if (f as f64) >= self.min && (f as f64) <= self.max {
                v = f as f64;
            }
        }
        v
    }

    pub fn randomize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let t: f64 = rng.gen();
        self.value = self.fit(self.min * (1.0 - t) + self.max * t);
    }

    pub fn mutate<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Mutation {
        if self.min == self.max {
            return Mutation::NoOp;
        }
        let old = self.value;
        for _ in 0..8 {
            let roll: f64 = rng.gen();
            let candidate = if roll < P_NUMERIC_RESET {
                let t: f64 = rng.gen();
                self.min * (1.0 - t) + self.max * t
            } else if roll < 2.0 * P_NUMERIC_RESET {
                old.round()
            } else {
                let unit = self.scale.map_or(1.0, |s| 10f64.powi(-(s.min(22) as i32)));
                let hi = rng.gen_range(-20..=40);
                let e = rng.gen_range(-20..=hi);
                let e = if self.scale.is_some() { e.max(0) } else { e };
                let delta = unit * 2f64.powi(e);
                if rng.gen_bool(0.5) {
                    old + delta
                } else {
                    old - delta
                }
            };
            let v = self.fit(candidate);
            if v != old {
                self.value = v;
                return Mutation::Changed;
            }
        }
        Mutation::NoOp
    }

    pub fn render(&self) -> Value {
        if self.as_string {
            return Value::String(format_float(self.value, self.single));
        }
        // Single-precision values go out in their shortest f32 spelling.
        let v = if self.single { format_float(self.value, true).parse().unwrap_or(self.value) } else { self.value };
        serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
    }
}

fn format_float(v: f64, single: bool) -> String {
    if single {
        format!("{}", v as f32)
    } else {
        format!("{v}")
    }
}

/// Arbitrary-size integers, rendered as decimal strings.
#[derive(Debug, Clone, PartialEq)]
pub struct BigIntegerGene {
    pub min: i128,
    pub max: i128,
    pub value: i128,
}

impl BigIntegerGene {
    pub fn randomize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.value = rng.gen_range(self.min..=self.max);
    }

    pub fn mutate<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Mutation {
        let v = int_step(rng, self.value, self.min, self.max);
        Mutation::of(std::mem::replace(&mut self.value, v) != v)
    }

    pub fn render(&self) -> Value {
        Value::String(self.value.to_string())
    }
}

/// Fixed-point decimal `unscaled × 10^-scale`, rendered as a plain string.
#[derive(Debug, Clone, PartialEq)]
pub struct BigDecimalGene {
    pub precision: u32,
    pub scale: u32,
    pub min_unscaled: i128,
    pub max_unscaled: i128,
    pub unscaled: i128,
}

impl BigDecimalGene {
    pub fn randomize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.unscaled = rng.gen_range(self.min_unscaled..=self.max_unscaled);
    }

    pub fn mutate<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Mutation {
        let v = int_step(rng, self.unscaled, self.min_unscaled, self.max_unscaled);
        Mutation::of(std::mem::replace(&mut self.unscaled, v) != v)
    }

    pub fn render(&self) -> Value {
        Value::String(format_decimal(self.unscaled, self.scale))
    }
}

pub fn format_decimal(unscaled: i128, scale: u32) -> String {
    let digits = unscaled.unsigned_abs().to_string();
    let sign = if unscaled < 0 { "-" } else { "" };
    if scale == 0 {
        return format!("{sign}{digits}");
    }
    let scale = scale as usize;
    let padded = format!("{digits:0>width$}", width = scale + 1);
    let (int, frac) = padded.split_at(padded.len() - scale);
    format!("{sign}{int}.{frac}")
}

/// Free-form strings over printable ASCII.
#[derive(Debug, Clone, PartialEq)]
pub struct StringGene {
    pub min_len: usize,
    pub max_len: usize,
    pub value: String,
}

fn random_char<R: Rng + ?Sized>(rng: &mut R) -> char {
    char::from_u32(rng.gen_range(CHAR_LO..=CHAR_HI)).unwrap()
}

impl StringGene {
    pub fn new(min_len: usize, max_len: usize) -> Self {
        StringGene {
            min_len,
            max_len,
            value: "a".repeat(min_len),
        }
    }

    pub fn randomize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = rng.gen_range(self.min_len..=self.max_len);
        self.value = (0..n).map(|_| random_char(rng)).collect();
    }

    pub fn mutate<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Mutation {
        let mut chars: Vec<char> = self.value.chars().collect();
        let len = chars.len();
        let mut ops = Vec::with_capacity(4);
        if len > 0 {
            ops.extend([0, 1]);
        }
        if len < self.max_len {
            ops.push(2);
        }
        if len > self.min_len {
            ops.push(3);
        }
        if ops.is_empty() {
            return Mutation::NoOp;
        }
        match ops[rng.gen_range(0..ops.len())] {
            0 => {
                let i = rng.gen_range(0..len);
                let c = chars[i] as u32;
                let hi = rng.gen_range(0..=5u32);
                let delta = 1u32 << rng.gen_range(0..=hi);
                let up = if c <= CHAR_LO {
                    true
                } else if c >= CHAR_HI {
                    false
                } else {
                    rng.gen_bool(0.5)
                };
                let n = if up { (c + delta).min(CHAR_HI) } else { c.saturating_sub(delta).max(CHAR_LO) };
                chars[i] = char::from_u32(n).unwrap();
            }
            1 => {
                let i = rng.gen_range(0..len);
                let mut c = random_char(rng);
                while c == chars[i] {
                    c = random_char(rng);
                }
                chars[i] = c;
            }
            2 => {
                let i = rng.gen_range(0..=len);
                chars.insert(i, random_char(rng));
            }
            _ => {
                let i = rng.gen_range(0..len);
                chars.remove(i);
            }
        }
        self.value = chars.into_iter().collect();
        Mutation::Changed
    }

    pub fn render(&self) -> Value {
        Value::String(self.value.clone())
    }
}

/// Strings drawn from a regular expression, kept as independently
/// regenerable top-level fragments.
#[derive(Debug, Clone, PartialEq)]
pub struct RegexGene {
    pub pattern: String,
    ast: RegexAst,
    fragments: Vec<String>,
    min_len: usize,
    max_len: usize,
}

/// Attempts to land inside optional length bounds before giving up.
const REGEX_RETRIES: usize = 32;

impl RegexGene {
    pub fn new(pattern: &str, ast: RegexAst, min_len: usize, max_len: usize) -> Self {
        let n = ast.items().len();
        RegexGene {
            pattern: pattern.to_string(),
            ast,
            fragments: vec![String::new(); n],
            min_len,
            max_len,
        }
    }

    pub fn value(&self) -> String {
        self.fragments.concat()
    }

    fn len_ok(&self) -> bool {
        let n = self.fragments.iter().map(|f| f.chars().count()).sum::<usize>();
        (self.min_len..=self.max_len).contains(&n)
    }

    pub fn randomize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for _ in 0..REGEX_RETRIES {
            let items = self.ast.items();
            self.fragments = items
                .iter()
                .map(|item| {
                    let mut s = String::new();
                    item.generate(rng, &mut s);
                    s
                })
                .collect();
            if self.len_ok() {
                return;
            }
        }
    }

    pub fn mutate<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Mutation {
        let n = self.fragments.len();
        for _ in 0..REGEX_RETRIES {
            let i = rng.gen_range(0..n);
            let mut s = String::new();
            self.ast.items()[i].generate(rng, &mut s);
            if s == self.fragments[i] {
                continue;
            }
            let old = std::mem::replace(&mut self.fragments[i], s);
            if self.len_ok() {
                return Mutation::Changed;
            }
            self.fragments[i] = old;
        }
        Mutation::NoOp
    }

    pub fn render(&self) -> Value {
        Value::String(self.value())
    }
}

/// Choice among a fixed list of candidate values.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumGene {
    pub candidates: Vec<Value>,
    pub index: usize,
}

impl EnumGene {
    pub fn new(candidates: Vec<Value>) -> Self {
        EnumGene { candidates, index: 0 }
    }

    pub fn randomize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if !self.candidates.is_empty() {
            self.index = rng.gen_range(0..self.candidates.len());
        }
    }

    pub fn mutate<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Mutation {
        let n = self.candidates.len();
        if n < 2 {
            return Mutation::NoOp;
        }
        let step = rng.gen_range(1..n);
        self.index = (self.index + step) % n;
        Mutation::Changed
    }

    pub fn render(&self) -> Value {
        self.candidates.get(self.index).cloned().unwrap_or(Value::Null)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DateFormat {
    Date,
    Time,
    DateTime,
}

pub const YEAR_RANGE: (i32, i32) = (1900, 2100);

/// Calendar dates and times of day, rendered in ISO-8601 form.
#[derive(Debug, Clone, PartialEq)]
pub struct DateGene {
    pub format: DateFormat,
    pub year: i32,
    pub month: u32,
    pub day: u32,
    pub hour: u32,
    pub minute: u32,
    pub second: u32,
}

pub fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        2 if (year % 4 == 0 && year % 100 != 0) || year % 400 == 0 => 29,
        2 => 28,
        4 | 6 | 9 | 11 => 30,
        _ => 31,
    }
}

impl DateGene {
    pub fn new(format: DateFormat) -> Self {
        DateGene {
            format,
            year: 2000,
            month: 1,
            day: 1,
            hour: 0,
            minute: 0,
            second: 0,
        }
    }

    fn has_date(&self) -> bool {
        self.format != DateFormat::Time
    }

    fn has_time(&self) -> bool {
        self.format != DateFormat::Date
    }

    pub fn randomize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if self.has_date() {
            self.year = rng.gen_range(YEAR_RANGE.0..=YEAR_RANGE.1);
            self.month = rng.gen_range(1..=12);
            self.day = rng.gen_range(1..=days_in_month(self.year, self.month));
        }
        if self.has_time() {
            self.hour = rng.gen_range(0..24);
            self.minute = rng.gen_range(0..60);
            self.second = rng.gen_range(0..60);
        }
    }

    pub fn mutate<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Mutation {
        let mut parts: Vec<usize> = Vec::new();
        if self.has_date() {
            parts.extend([0, 1, 2]);
        }
        if self.has_time() {
            parts.extend([3, 4, 5]);
        }
        let part = parts[rng.gen_range(0..parts.len())];
        let up = rng.gen_bool(0.5);
        let shift = |v: u32, lo: u32, hi: u32| -> u32 {
            if up {
                if v >= hi { lo } else { v + 1 }
            } else if v <= lo {
                hi
            } else {
                v - 1
            }
        };
        match part {
            0 => {
                let y = self.year + if up { 1 } else { -1 };
                self.year = if y > YEAR_RANGE.1 { YEAR_RANGE.0 } else if y < YEAR_RANGE.0 { YEAR_RANGE.1 } else { y };
            }
            1 => self.month = shift(self.month, 1, 12),
            2 => self.day = shift(self.day, 1, days_in_month(self.year, self.month)),
            3 => self.hour = shift(self.hour, 0, 23),
            4 => self.minute = shift(self.minute, 0, 59),
            _ => self.second = shift(self.second, 0, 59),
        }
        self.day = self.day.min(days_in_month(self.year, self.month));
        Mutation::Changed
    }

    pub fn render(&self) -> Value {
        let date = format!("{:04}-{:02}-{:02}", self.year, self.month, self.day);
        let time = format!("{:02}:{:02}:{:02}", self.hour, self.minute, self.second);
        Value::String(match self.format {
            DateFormat::Date => date,
            DateFormat::Time => time,
            DateFormat::DateTime => format!("{date}T{time}"),
        })
    }
}
