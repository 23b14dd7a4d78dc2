//! String branching service: keyword matching, ordering and parsing.

use serde_json::Value;

use super::CmpOp::{Eq, Gt, Lt, Ne};
use super::{int_arg, num_arg, str_arg, thrown, FunctionBody, HarnessCtx, SimTableStore, SimulatedService};
use crate::executor::RawException;

const IDL: &str = include_str!("../../harness/scs.thrift");

pub(super) fn build() -> SimulatedService {
    let bodies: [(&str, FunctionBody); 11] = [
        ("calc", calc),
        ("cookie", cookie),
        ("costfuns", costfuns),
        ("dateParse", date_parse),
        ("fileSuffix", file_suffix),
        ("notyPevar", noty_pevar),
        ("ordered4", ordered4),
        ("pat", pat),
        ("regex", regex),
        ("text2txt", text2txt),
        ("title", title),
    ];
    SimulatedService::new("scs", "string branching (11 functions)", IDL, &bodies, SimTableStore::new())
}

fn text(s: impl Into<String>) -> Result<Value, RawException> {
    Ok(Value::String(s.into()))
}

/// Index of the first keyword equal to `s`, probing each comparison.
fn keyword(c: &mut HarnessCtx<'_>, prefix: &str, s: &str, words: &[&str]) -> Option<usize> {
    words.iter().position(|w| c.str_eq(&format!("{prefix}_{w}"), s, w))
}

fn calc(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let op = str_arg(args, 0)?.to_ascii_lowercase();
    let (x, y) = (num_arg(args, 1)?, num_arg(args, 2)?);
    let r = match keyword(c, "op", &op, &["pi", "e", "sqrt", "log", "sine", "cosine", "tangent"]) {
        Some(0) => std::f64::consts::PI,
        Some(1) => std::f64::consts::E,
        Some(2) => {
            if c.num("sqrt_neg", x, Lt, 0.0) {
                return text("NaN");
            }
            x.sqrt()
        }
        Some(3) => {
            if c.num("log_nonpos", x, Lt, f64::MIN_POSITIVE) {
                return text("NaN");
            }
            x.ln()
        }
        Some(4) => x.sin(),
        Some(5) => x.cos(),
        Some(6) => x.tan(),
        _ => match keyword(c, "bin", &op, &["plus", "subtract", "multiply", "divide"]) {
            Some(0) => x + y,
            Some(1) => x - y,
            Some(2) => x * y,
            Some(3) => {
                if c.num("div_zero", y, Eq, 0.0) {
                    return Err(thrown("ArithmeticException", "division by zero", "ScsServiceImpl.calc:38"));
                }
                x / y
            }
            _ => return text(""),
        },
    };
    text(r.to_string())
}

fn cookie(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let (name, val, site) = (str_arg(args, 0)?, str_arg(args, 1)?, str_arg(args, 2)?);
    let mut out = String::new();
    match keyword(c, "name", name, &["user", "session", "pref"]) {
        Some(0) => {
            if c.int("user_len", val.chars().count() as i64, Gt, 5) {
                out.push_str("user-long;");
            } else {
                out.push_str("user;");
            }
        }
        Some(1) => {
            if c.str_eq("session_val", val, "expired") {
                return text("session expired");
            }
            out.push_str("session;");
        }
        Some(2) => out.push_str("pref;"),
        _ => return text("unknown cookie"),
    }
    let tail: String = site.chars().rev().take(4).collect::<Vec<_>>().into_iter().rev().collect();
    if c.str_eq("site_com", &tail, ".com") {
        out.push_str("domain=com");
    } else if c.str_eq("site_org", &tail, ".org") {
        out.push_str("domain=org");
    }
    text(out)
}

fn costfuns(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let (i, s) = (int_arg(args, 0)?, str_arg(args, 1)?);
    if c.int("i_eq_5", i, Eq, 5) {
        if c.str_eq("s_ok", s, "ok") {
            return text("five-ok");
        }
        return text("five");
    }
    if c.int("i_lt", i, Lt, -100) || c.int("i_gt", i, Gt, 100) {
        return text("out of range");
    }
    if c.str_ord("s_after_xyz", s, Gt, "xyz") {
        return text("late");
    }
    if c.int("len_eq_i", s.chars().count() as i64, Eq, i) {
        return text("len");
    }
    text("default")
}

const DAYS: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];
const MONTHS: [&str; 12] = ["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"];

fn date_parse(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let (day, month) = (str_arg(args, 0)?.to_ascii_lowercase(), str_arg(args, 1)?.to_ascii_lowercase());
    let d = keyword(c, "day", &day, &DAYS);
    let m = keyword(c, "month", &month, &MONTHS);
    match (d, m) {
        (Some(d), Some(m)) => text(format!("{} {}", d + 1, m + 1)),
        (None, _) => text("bad day"),
        (_, None) => text("bad month"),
    }
}

fn file_suffix(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let (dir, file) = (str_arg(args, 0)?, str_arg(args, 1)?);
    let Some(dot) = file.rfind('.') else {
        c.flag("has_dot", false);
        return text("no suffix");
    };
    c.flag("has_dot", true);
    let suffix = &file[dot + 1..];
    let kind = match keyword(c, "suffix", suffix, &["txt", "java", "c", "rs"]) {
        Some(0) => "text",
        Some(1) | Some(2) | Some(3) => "source",
        _ => "other",
    };
    if c.str_eq("dir_src", dir, "src") && kind == "source" {
        return text("source in src");
    }
    if c.str_eq("dir_test", dir, "test") {
        return text(format!("{kind} in test"));
    }
    text(kind)
}

fn noty_pevar(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let (i, s) = (int_arg(args, 0)?, str_arg(args, 1)?);
    let mut score = 0;
    if c.int("i_zero", i, Eq, 0) {
        score += 1;
    } else if c.int("i_big", i, Gt, 1000) {
        score += 2;
    }
    if c.int("i_even", i.rem_euclid(2), Eq, 0) {
        score += 4;
    }
    if c.str_eq("s_abc", s, "abc") {
        score += 8;
    } else if c.str_ord("s_before_m", s, Lt, "m") {
        score += 16;
    }
    if c.int("len_ne", s.chars().count() as i64, Ne, i) {
        score += 32;
    }
    text(score.to_string())
}

fn ordered4(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let (w, x, z, y) = (str_arg(args, 0)?, str_arg(args, 1)?, str_arg(args, 2)?, str_arg(args, 3)?);
    if c.str_ord("wx_inc", w, Lt, x) && c.str_ord("xz_inc", x, Lt, z) && c.str_ord("zy_inc", z, Lt, y) {
        return text("increasing");
    }
    if c.str_ord("wx_dec", w, Gt, x) && c.str_ord("xz_dec", x, Gt, z) && c.str_ord("zy_dec", z, Gt, y) {
        return text("decreasing");
    }
    text("unordered")
}

fn pat(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let (txt, p) = (str_arg(args, 0)?, str_arg(args, 1)?);
    let (tl, pl) = (txt.chars().count() as i64, p.chars().count() as i64);
    if c.int("p_empty", pl, Eq, 0) {
        return text("empty pattern");
    }
    if c.int("p_longer", pl, Gt, tl) {
        return text("pattern longer than text");
    }
    let chars: Vec<char> = txt.chars().collect();
    let mut best = f64::MAX;
    let mut found = None;
    for start in 0..=(tl - pl) as usize {
        let window: String = chars[start..start + pl as usize].iter().collect();
        let d = super::string_distance(&window, p);
        if d < best {
            best = d;
        }
        if d == 0.0 {
            found = Some(start);
            break;
        }
    }
    c.num("found", best, Eq, 0.0);
    let Some(at) = found else {
        return text("not found");
    };
    let rev: String = p.chars().rev().collect();
    if c.str_eq("palindrome", p, &rev) && c.int("long_pal", pl, Gt, 2) {
        return text(format!("palindrome at {at}"));
    }
    text(format!("found at {at}"))
}

fn regex(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let txt = str_arg(args, 0)?;
    let head: String = txt.chars().take(7).collect();
    if c.str_eq("http", &head, "http://") {
        let host = &txt[7..];
        if c.flag("host_dot", host.contains('.')) {
            return text("url");
        }
        return text("bad host");
    }
    let digits = txt.chars().filter(char::is_ascii_digit).count() as i64;
    if c.int("all_digits", digits, Eq, txt.chars().count() as i64) && c.int("nonempty", digits, Gt, 0) {
        if c.int("phone_len", digits, Eq, 10) {
            return text("phone");
        }
        return text("number");
    }
    let at = txt.find('@');
    if c.flag("has_at", at.is_some()) {
        let domain = &txt[at.unwrap_or(0) + 1..];
        if c.flag("domain_dot", domain.contains('.')) {
            return text("email");
        }
    }
    text("text")
}

fn text2txt(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let (a, b, z) = (str_arg(args, 0)?, str_arg(args, 1)?, str_arg(args, 2)?);
    if c.str_eq("w1", a, "welcome") {
        if c.str_eq("w2", b, "to") {
            if c.str_eq("w3", z, "fuzzing") {
                return text("welcome to fuzzing");
            }
            return text("welcome to");
        }
        return text("welcome");
    }
    if c.str_ord("sorted", a, Lt, b) {
        return text(format!("{a} {b} {z}"));
    }
    text(format!("{z} {b} {a}"))
}

fn title(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let (sex, t) = (str_arg(args, 0)?.to_ascii_lowercase(), str_arg(args, 1)?.to_ascii_lowercase());
    let s = keyword(c, "sex", &sex, &["male", "female", "none"]);
    let tt = keyword(c, "title", &t, &["mr", "mrs", "miss", "ms", "dr", "sir", "dame"]);
    let ok = match (s, tt) {
        (Some(0), Some(0 | 4 | 5)) => true,
        (Some(1), Some(1 | 2 | 3 | 4 | 6)) => true,
        (Some(2), Some(4)) => true,
        (Some(_), None) => return text("unknown title"),
        (None, _) => return text("unknown sex"),
        _ => false,
    };
    text(if ok { "consistent" } else { "inconsistent" })
}
