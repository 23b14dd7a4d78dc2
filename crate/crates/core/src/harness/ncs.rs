//! Numeric branching service: classic numerical-recipe style routines.

use serde_json::{json, Value};

use super::CmpOp::{Eq, Ge, Gt, Le, Lt};
use super::{int_arg, num_arg, thrown, FunctionBody, HarnessCtx, SimTableStore, SimulatedService};
use crate::executor::RawException;

const IDL: &str = include_str!("../../harness/ncs.thrift");
const EPS: f64 = 1e-10;
const MAX_ITER: usize = 100;

pub(super) fn build() -> SimulatedService {
    let bodies: [(&str, FunctionBody); 6] = [
        ("triangleClassification", triangle),
        ("bessj", bessj),
        ("expint", expint),
        ("fisher", fisher),
        ("gammq", gammq),
        ("remainder", remainder),
    ];
    SimulatedService::new("ncs", "numeric branching (6 functions)", IDL, &bodies, SimTableStore::new())
}

fn dto(i: i64, d: f64) -> Value {
    json!({"resultAsInt": i, "resultAsDouble": if d.is_finite() { d } else { 0.0 }})
}

fn illegal(message: &str, frame: &str) -> RawException {
    thrown("IllegalArgumentException", message, frame)
}

fn triangle(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let (a, b, z) = (int_arg(args, 0)?, int_arg(args, 1)?, int_arg(args, 2)?);
    let non_positive = c.int("a_pos", a, Le, 0) || c.int("b_pos", b, Le, 0) || c.int("c_pos", z, Le, 0);
    let kind = if non_positive
        || c.int("ab_c", a + b, Le, z)
        || c.int("ac_b", a + z, Le, b)
        || c.int("bc_a", b + z, Le, a)
    {
        0
    } else if c.int("a_eq_b", a, Eq, b) {
        if c.int("b_eq_c", b, Eq, z) {
            3
        } else {
            2
        }
    } else if c.int("b_eq_c2", b, Eq, z) || c.int("a_eq_c", a, Eq, z) {
        2
    } else {
        1
    };
    Ok(dto(kind, (a + b + z) as f64))
}

/// Bessel function of the first kind for order 0 or 1.
fn bessel01(n: i64, x: f64) -> f64 {
    if x.abs() > 8.0 {
        let phase = x.abs() - n as f64 * std::f64::consts::FRAC_PI_2 - std::f64::consts::FRAC_PI_4;
        let v = (2.0 / (std::f64::consts::PI * x.abs())).sqrt() * phase.cos();
        return if n == 1 && x < 0.0 { -v } else { v };
    }
    let half = x / 2.0;
    let mut term = if n == 0 { 1.0 } else { half };
    let mut sum = term;
    for k in 1..40 {
        term *= -half * half / (k as f64 * (k as f64 + n as f64));
        sum += term;
    }
    sum
}

fn bessj(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let (n, x) = (int_arg(args, 0)?, num_arg(args, 1)?);
    if c.int("n_lt_2", n, Lt, 2) {
        if c.int("n_neg", n, Lt, 0) {
            return Err(illegal("negative order", "NcsServiceImpl.bessj:41"));
        }
        let large = c.num("small_large", x.abs(), Gt, 8.0);
        return Ok(dto(n + large as i64, bessel01(n, x)));
    }
    let ax = x.abs();
    if c.num("x_zero", ax, Eq, 0.0) {
        return Ok(dto(0, 0.0));
    }
    if c.int("n_huge", n, Gt, 200) {
        return Err(illegal("order too large", "NcsServiceImpl.bessj:52"));
    }
    let tox = 2.0 / ax;
    let mut ans;
    if c.num("upward", ax, Gt, n as f64) {
        let (mut bjm, mut bj) = (bessel01(0, ax), bessel01(1, ax));
        for j in 1..n {
            let bjp = j as f64 * tox * bj - bjm;
            bjm = bj;
            bj = bjp;
        }
        ans = bj;
    } else {
        let m = 2 * ((n + (40.0 * n as f64).sqrt() as i64) / 2);
        let (mut jsum, mut bjp, mut sum) = (false, 0.0, 0.0);
        let mut bj = 1.0;
        ans = 0.0;
        for j in (1..=m).rev() {
            let bjm = j as f64 * tox * bj - bjp;
            bjp = bj;
            bj = bjm;
            if c.num("renorm", bj.abs(), Gt, 1e10) {
                bj *= 1e-10;
                bjp *= 1e-10;
                ans *= 1e-10;
                sum *= 1e-10;
            }
            if jsum {
                sum += bj;
            }
            jsum = !jsum;
            if j == n {
                ans = bjp;
            }
        }
        sum = 2.0 * sum - bj;
        ans /= sum;
    }
    if c.num("x_neg", x, Lt, 0.0) && c.flag("n_odd", n % 2 == 1) {
        ans = -ans;
    }
    Ok(dto(n, ans))
}

fn expint(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    const EULER: f64 = 0.577_215_664_901_532_9;
    let (n, x) = (int_arg(args, 0)?, num_arg(args, 1)?);
    let bad = c.int("n_neg", n, Lt, 0)
        || c.num("x_neg", x, Lt, 0.0)
        || (c.num("x_zero", x, Eq, 0.0) && (c.int("n_zero", n, Eq, 0) || c.int("n_one", n, Eq, 1)));
    if bad {
        return Err(illegal("bad arguments in expint", "NcsServiceImpl.expint:17"));
    }
    if c.int("n_huge", n, Gt, 500) {
        return Err(illegal("order too large", "NcsServiceImpl.expint:20"));
    }
    let nm1 = n - 1;
    if c.int("n_is_zero", n, Eq, 0) {
        return Ok(dto(0, (-x).exp() / x));
    }
    if c.num("x_is_zero", x, Eq, 0.0) {
        return Ok(dto(1, 1.0 / nm1 as f64));
    }
    if c.num("x_gt_1", x, Gt, 1.0) {
        let mut b = x + n as f64;
        let mut cc = 1.0 / f64::MIN_POSITIVE;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (nm1 + i as i64) as f64;
            b += 2.0;
            d = 1.0 / (an * d + b);
            cc = b + an / cc;
            let del = cc * d;
            h *= del;
            if c.num("cf_conv", (del - 1.0).abs(), Lt, EPS) {
                return Ok(dto(2, h * (-x).exp()));
            }
        }
        return Err(illegal("continued fraction failed", "NcsServiceImpl.expint:44"));
    }
    let mut ans = if nm1 != 0 { 1.0 / nm1 as f64 } else { -x.ln() - EULER };
    let mut fact = 1.0;
    for i in 1..=MAX_ITER as i64 {
        fact *= -x / i as f64;
        let del = if c.int("i_ne_nm1", i, super::CmpOp::Ne, nm1) {
            -fact / (i - nm1) as f64
        } else {
            let psi = -EULER + (1..=nm1).map(|k| 1.0 / k as f64).sum::<f64>();
            fact * (-x.ln() + psi)
        };
        ans += del;
        if c.num("series_conv", del.abs(), Lt, ans.abs() * EPS) {
            return Ok(dto(3, ans));
        }
    }
    Err(illegal("series failed", "NcsServiceImpl.expint:63"))
}

fn fisher(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let (m, n, x) = (int_arg(args, 0)?, int_arg(args, 1)?, num_arg(args, 2)?);
    if c.int("m_pos", m, Le, 0) || c.int("n_pos", n, Le, 0) {
        return Err(illegal("degrees of freedom must be positive", "NcsServiceImpl.fisher:12"));
    }
    if c.int("m_big", m, Gt, 1000) || c.int("n_big", n, Gt, 1000) {
        return Err(illegal("degrees of freedom too large", "NcsServiceImpl.fisher:15"));
    }
    if c.num("x_nonpos", x, Le, 0.0) {
        return Ok(dto(0, 0.0));
    }
    let a = if c.int("m_even", m % 2, Eq, 0) { 2 } else { 1 };
    let b = if c.int("n_even", n % 2, Eq, 0) { 2 } else { 1 };
    let w = x * m as f64 / n as f64;
    let z = 1.0 / (1.0 + w);
    let mut p;
    let mut y;
    let mut d;
    if c.int("a_one", a, Eq, 1) {
        if c.int("b_one", b, Eq, 1) {
            p = w.sqrt();
            y = std::f64::consts::FRAC_1_PI;
            d = y * z / p;
            p = 2.0 * y * p.atan();
        } else {
            p = (w * z).sqrt();
            d = 0.5 * p * z / w;
            y = 0.0;
        }
    } else if c.int("b_one2", b, Eq, 1) {
        p = z.sqrt();
        d = 0.5 * z * p;
        p = 1.0 - p;
        y = 0.0;
    } else {
        d = z * z;
        p = w * z;
        y = 0.0;
    }
    let yv = 2.0 * w / z;
    let mut j = b + 2;
    while j <= n {
        d *= (1.0 + a as f64 / (j - 2) as f64) * z;
        p = if c.int("a_one_loop", a, Eq, 1) { p + d * yv / (j - 1) as f64 } else { (p + w) * z };
        j += 2;
    }
    let yv = w * z;
    let zz = 2.0 / z;
    let bb = n - 2;
    let mut i = a + 2;
    while i <= m {
        let jj = i + bb;
        d *= yv * jj as f64 / (i - 2) as f64;
        p -= zz * d / jj as f64;
        i += 2;
    }
    if c.num("p_neg", p, Lt, 0.0) {
        p = 0.0;
    } else if c.num("p_gt1", p, Gt, 1.0) {
        p = 1.0;
    }
    y += p;
    Ok(dto(if c.num("significant", 1.0 - p, Lt, 0.05) { 1 } else { 0 }, y))
}

fn ln_gamma(xx: f64) -> f64 {
    const COF: [f64; 6] = [
        76.180_091_729_471_46,
        -86.505_320_329_416_77,
        24.014_098_240_830_91,
        -1.231_739_572_450_155,
        0.120_865_097_386_617_9e-2,
        -0.539_523_938_495_3e-5,
    ];
    let mut y = xx;
    let tmp = xx + 5.5;
    let tmp = tmp - (xx + 0.5) * tmp.ln();
    let mut ser = 1.000_000_000_190_015;
    for c in COF {
        y += 1.0;
        ser += c / y;
    }
    -tmp + (2.506_628_274_631_000_5 * ser / xx).ln()
}

fn gammq(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let (a, x) = (num_arg(args, 0)?, num_arg(args, 1)?);
    if c.num("x_neg", x, Lt, 0.0) || c.num("a_nonpos", a, Le, 0.0) {
        return Err(illegal("invalid arguments in gammq", "NcsServiceImpl.gammq:9"));
    }
    let gln = ln_gamma(a);
    if c.num("series", x, Lt, a + 1.0) {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if c.num("ser_conv", del.abs(), Lt, sum.abs() * EPS) {
                let gamser = sum * (-x + a * x.ln() - gln).exp();
                return Ok(dto(0, 1.0 - gamser));
            }
        }
        return Err(illegal("a too large, too few iterations", "NcsServiceImpl.gammq:31"));
    }
    let mut b = x + 1.0 - a;
    let mut cc = 1.0 / f64::MIN_POSITIVE;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if c.num("d_tiny", d.abs(), Lt, f64::MIN_POSITIVE) {
            d = f64::MIN_POSITIVE;
        }
        cc = b + an / cc;
        if cc.abs() < f64::MIN_POSITIVE {
            cc = f64::MIN_POSITIVE;
        }
        d = 1.0 / d;
        let del = d * cc;
        h *= del;
        if c.num("cf_conv", (del - 1.0).abs(), Lt, EPS) {
            return Ok(dto(1, (-x + a * x.ln() - gln).exp() * h));
        }
    }
    Err(illegal("a too large, too few iterations", "NcsServiceImpl.gammq:55"))
}

fn remainder(c: &mut HarnessCtx<'_>, args: &[Value]) -> Result<Value, RawException> {
    let (a, b) = (int_arg(args, 0)?, int_arg(args, 1)?);
    if c.int("a_zero", a, Eq, 0) {
        return Ok(dto(0, 0.0));
    }
    if c.int("b_zero", b, Eq, 0) {
        return Err(thrown("ArithmeticException", "/ by zero", "NcsServiceImpl.remainder:8"));
    }
    let (ma, mb) = (a.abs(), b.abs());
    let quadrant = match (c.int("a_pos", a, Gt, 0), c.int("b_pos", b, Gt, 0)) {
        (true, true) => 0,
        (true, false) => 1,
        (false, true) => 2,
        (false, false) => 3,
    };
    let r = if c.int("a_lt_b", ma, Lt, mb) {
        ma
    } else if c.int("a_eq_b", ma, Eq, mb) {
        0
    } else if c.int("a_ge_2b", ma, Ge, 2 * mb) {
        ma % mb
    } else {
        ma - mb
    };
    let r = if a < 0 { -r } else { r };
    Ok(dto(r, quadrant as f64))
}
