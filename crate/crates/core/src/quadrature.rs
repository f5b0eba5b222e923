//! Globally adaptive Gauss-Kronrod (7/15) quadrature.

#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// Gauss weights for the odd-indexed Kronrod nodes (and the centre).
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Segment> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kron * h;
    if !value.is_finite() {
        return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
    }
    Ok(Segment { a, b, value, err: ((kron - gauss) * h).abs() })
}

/// Integrate `f` over `[a, b]` until the summed error estimate drops below
/// `max(abs_tol, rel_tol * |value|)`; at most `max_intervals` subintervals.
pub fn integrate<F>(mut f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64, max_intervals: usize) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("integration bounds must be finite, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, abs_err: 0.0, intervals: 0 });
    }
    let mut segs = vec![gk15(&mut f, a, b)?];
    loop {
        let value: f64 = segs.iter().map(|s| s.value).sum();
        let err: f64 = segs.iter().map(|s| s.err).sum();
        if err <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(QuadResult { value, abs_err: err, intervals: segs.len() });
        }
        if segs.len() >= max_intervals {
            return Err(Error::Quadrature(format!(
                "no convergence on [{a}, {b}] after {} intervals: value {value}, error estimate {err}",
                segs.len()
            )));
        }
        let (i, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("non-empty");
        let s = segs.swap_remove(i);
        let m = 0.5 * (s.a + s.b);
        if m <= s.a || m >= s.b {
            return Err(Error::Quadrature(format!("interval [{}, {}] cannot be bisected further", s.a, s.b)));
        }
        segs.push(gk15(&mut f, s.a, m)?);
        segs.push(gk15(&mut f, m, s.b)?);
    }
}
