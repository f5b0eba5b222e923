//! Compensated accumulation for long area aggregates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neumaier's variant of Kahan summation. Handles mixed-sign streams, which
/// the box aggregates produce on every insert/remove pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub const fn new() -> Self {
        Neumaier { sum: 0.0, comp: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn sub(&mut self, x: f64) {
        self.add(-x);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// Raw `(sum, compensation)` pair, for bit-exact checkpointing.
    pub fn parts(&self) -> (f64, f64) {
        (self.sum, self.comp)
    }

    pub fn from_parts(sum: f64, comp: f64) -> Self {
        Neumaier { sum, comp }
    }
}

/// Compensated sum of a stream of finite reals.
pub fn compensated_sum<I>(values: I) -> Result<f64>
where
    I: IntoIterator<Item = f64>,
{
    let mut acc = Neumaier::new();
    for (i, x) in values.into_iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::Domain(format!("non-finite input {x} at position {i}")));
        }
        acc.add(x);
        if !acc.sum.is_finite() {
            return Err(Error::Overflow(format!("running sum overflowed at position {i}")));
        }
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_is_visible() {
        assert_eq!(compensated_sum([1.0, 1e-16, -1.0]).unwrap(), 1e-16);
        let naive: f64 = [1.0, 1e-16, -1.0].iter().sum();
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn empty_stream_is_zero() {
        assert_eq!(compensated_sum(std::iter::empty()).unwrap(), 0.0);
    }

    #[test]
    fn telescoping_million_terms() {
        let n = 1_000_000u64;
        let s = compensated_sum((1..=n).map(|k| {
            let k = k as f64;
            1.0 / (k * (k + 1.0))
        }))
        .unwrap();
        let exact = 1.0 - 1.0 / (n as f64 + 1.0);
        assert!(((s - exact) / exact).abs() <= 1e-15, "{s} vs {exact}");
    }

    #[test]
    fn overflow_and_non_finite_are_errors() {
        assert!(matches!(compensated_sum([f64::MAX, f64::MAX]), Err(Error::Overflow(_))));
        assert!(matches!(compensated_sum([1.0, f64::NAN]), Err(Error::Domain(_))));
    }

    #[test]
    fn parts_round_trip() {
        let mut a = Neumaier::new();
        for k in 1..1000 {
            a.add(1.0 / k as f64);
            a.sub(1e-3 / k as f64);
        }
        let (s, c) = a.parts();
        assert_eq!(Neumaier::from_parts(s, c), a);
    }
}
