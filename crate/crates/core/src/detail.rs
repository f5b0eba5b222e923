//! Details, sheets and the gap parameter.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetailKind {
    /// `R_n`: a `1/n x 1/(n+1)` rectangle.
    Rect,
    /// `S_n`: a `1/n x 1/n` square.
    Square,
}

impl DetailKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DetailKind::Rect => "rect",
            DetailKind::Square => "square",
        }
    }
}

impl fmt::Display for DetailKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetailKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rect" | "rectangle" | "r" => Ok(DetailKind::Rect),
            "square" | "s" => Ok(DetailKind::Square),
            other => Err(Error::Config(format!("unknown detail kind `{other}`"))),
        }
    }
}

/// One detail `D_n`. The greater side is always `1/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Detail {
    pub kind: DetailKind,
    pub n: u64,
}

impl Detail {
    pub fn new(kind: DetailKind, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("detail index must be >= 1".into()));
        }
        Ok(Detail { kind, n })
    }

    /// `(width, height)` with `width <= height`.
    pub fn dims(&self) -> (f64, f64) {
        dims_unchecked(self.kind, self.n)
    }

    pub fn area(&self) -> f64 {
        let (w, h) = self.dims();
        w * h
    }
}

#[inline]
pub(crate) fn dims_unchecked(kind: DetailKind, n: u64) -> (f64, f64) {
    let nf = n as f64;
    match kind {
        DetailKind::Rect => (1.0 / (nf + 1.0), 1.0 / nf),
        DetailKind::Square => (1.0 / nf, 1.0 / nf),
    }
}

/// Side lengths of `D_n` as `(width, height)`, width being the lesser side.
pub fn detail_dims(kind: DetailKind, n: i64) -> Result<(f64, f64)> {
    if n < 1 {
        return Err(Error::Domain(format!("detail index {n} must be >= 1")));
    }
    Ok(dims_unchecked(kind, n as u64))
}

/// Partial sums of `1/k^2` are formed directly up to this index; beyond it
/// the tail uses an Euler-Maclaurin expansion.
const SQUARE_DIRECT_LIMIT: u64 = 10_000;

/// Total area of all details with index `>= n0`.
///
/// Rectangles telescope to `1/n0`. Squares use `pi^2/6` minus a partial sum
/// for small `n0` and a Euler-Maclaurin tail otherwise.
pub fn sheet_area(kind: DetailKind, n0: u64) -> Result<f64> {
    if n0 == 0 {
        return Err(Error::Domain("n0 must be >= 1".into()));
    }
    Ok(match kind {
        DetailKind::Rect => 1.0 / n0 as f64,
        DetailKind::Square => square_tail(n0),
    })
}

/// `sum_{k >= n} 1/k^2`.
pub(crate) fn square_tail(n: u64) -> f64 {
    if n <= SQUARE_DIRECT_LIMIT {
        // Summing the smallest terms first keeps the partial sum exact to a
        // few ulps; the difference is then formed against the tail value at
        // the direct limit instead of pi^2/6 to avoid cancellation.
        let mut acc = crate::numeric::Neumaier::new();
        acc.add(euler_maclaurin_tail(SQUARE_DIRECT_LIMIT + 1));
        for k in (n..=SQUARE_DIRECT_LIMIT).rev() {
            let kf = k as f64;
            acc.add(1.0 / (kf * kf));
        }
        acc.value()
    } else {
        euler_maclaurin_tail(n)
    }
}

/// Euler-Maclaurin tail `1/n + 1/(2n^2) + 1/(6n^3) - 1/(30n^5)` for
/// `sum_{k >= n} 1/k^2`.
fn euler_maclaurin_tail(n: u64) -> f64 {
    let x = 1.0 / n as f64;
    // The x^5 term is below 1e-20 relative for n > 1e4 but costs nothing.
    x + x * x * (0.5 + x * (1.0 / 6.0 - x * x / 30.0))
}

/// `pi^2/6 - 1`, the area packed by all squares `S_n` with `n >= 2`.
pub const BASEL_MINUS_ONE: f64 = PI * PI / 6.0 - 1.0;

/// The square sheet for a detail family starting at `n0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SheetSpec {
    pub kind: DetailKind,
    pub n0: u64,
    pub side: f64,
    pub area: f64,
}

impl SheetSpec {
    pub fn new(kind: DetailKind, n0: u64) -> Result<Self> {
        let area = sheet_area(kind, n0)?;
        Ok(SheetSpec { kind, n0, side: area.sqrt(), area })
    }

    pub fn half_perimeter(&self) -> f64 {
        2.0 * self.side
    }
}

/// The gap exponent, carried as the rational `num/den` it was given as.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gamma {
    pub num: u32,
    pub den: u32,
    value: f64,
}

impl Gamma {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if den == 0 || num == 0 {
            return Err(Error::Config(format!("gamma {num}/{den} must be a positive rational")));
        }
        Ok(Gamma { num, den, value: num as f64 / den as f64 })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// True when `sqrt(3/2) < gamma < 3/2`, the range the gap analysis needs.
    pub fn in_admissible_range(&self) -> bool {
        // gamma^2 > 3/2  <=>  2 num^2 > 3 den^2, and gamma < 3/2 <=> 2 num < 3 den.
        let (n, d) = (self.num as u128, self.den as u128);
        2 * n * n > 3 * d * d && 2 * n < 3 * d
    }

    /// `k^gamma` as `exp(gamma ln k)`.
    #[inline]
    pub fn pow(&self, k: f64) -> f64 {
        (self.value * k.ln()).exp()
    }

    /// `1/k^gamma`, the gap reserved when packing around index `k`.
    #[inline]
    pub fn gap(&self, k: u64) -> f64 {
        (-self.value * (k as f64).ln()).exp()
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Gamma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (num, den) = match s.split_once('/') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (s, "1"),
        };
        let parse = |x: &str| {
            x.parse::<u32>()
                .map_err(|_| Error::Config(format!("gamma `{s}` is not a rational p/q of positive integers")))
        };
        Gamma::new(parse(num)?, parse(den)?)
    }
}
