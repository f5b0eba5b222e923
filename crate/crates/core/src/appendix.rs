//! Probabilistic model of second-kind endpoints.
//!
//! At time `t` an endpoint created at `n` (with `t^(1/gamma) < n < t`) has
//! been cut down to a width `xi` uniform on `[1/n^gamma, 1/t]` and height
//! about `1/n`, so its aspect ratio is `eta = 1/(n xi)`. Creation times are
//! distributed with the density `g`, and `e(t)` is the mean of `eta` under
//! that mixture. Three estimators are provided: adaptive quadrature,
//! the explicit integral `I`, and Monte Carlo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::quadrature;

/// Below this `|n^gamma/t - 1|` the ratio `ln(x)/(x-1)` uses its series.
const SERIES_CUTOFF: f64 = 1e-6;
const BISECTION_STEPS: usize = 60;
pub const MC_SHARDS: usize = 64;
pub const MIN_MC_SAMPLES: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixtureModel {
    pub gamma: f64,
    pub t: f64,
    ln_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub ci95: f64,
    pub samples: u64,
    pub seed: u64,
}

/// `ln(1+u)/u`, continuous at 0.
#[inline]
fn log_ratio(u: f64) -> f64 {
    if u.abs() < SERIES_CUTOFF {
        1.0 - u / 2.0 + u * u / 3.0 - u * u * u / 4.0
    } else {
        u.ln_1p() / u
    }
}

impl MixtureModel {
    pub fn new(gamma: f64, t: f64) -> Result<Self> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("gamma must exceed 1, got {gamma}")));
        }
        if !(t > 1.0 && t.is_finite()) {
            return Err(Error::Domain(format!("t must exceed 1, got {t}")));
        }
        Ok(MixtureModel { gamma, t, ln_t: t.ln() })
    }

    /// Lower edge `t^(1/gamma)` of the creation-time range.
    pub fn n_min(&self) -> f64 {
        (self.ln_t / self.gamma).exp()
    }

    pub fn n_max(&self) -> f64 {
        self.t
    }

    fn check_range(&self, n: f64) -> Result<f64> {
        let s = n.ln();
        let (lo, hi) = (self.ln_t / self.gamma, self.ln_t);
        let slack = 1e-12 * hi;
        if n.is_nan() || n <= 0.0 || s < lo - slack || s > hi + slack {
            return Err(Error::Domain(format!("n = {n} is outside [t^(1/gamma), t] = [{}, {}]", self.n_min(), self.t)));
        }
        Ok(s.clamp(lo, hi))
    }

    /// `u = n^gamma/t - 1` for `n = e^s`.
    #[inline]
    fn u_of(&self, s: f64) -> f64 {
        (self.gamma * s - self.ln_t).exp_m1()
    }

    #[inline]
    fn eta_s(&self, s: f64) -> f64 {
        ((self.gamma - 1.0) * s).exp() * log_ratio(self.u_of(s))
    }

    /// `E eta_n = t n^(gamma-1) (ln n^gamma - ln t)/(n^gamma - t)`.
    pub fn expected_eta(&self, n: f64) -> Result<f64> {
        if n.is_nan() || n <= 0.0 {
            return Err(Error::Domain(format!("n must be positive, got {n}")));
        }
        let u = self.u_of(n.ln());
        if u.is_nan() || u <= 0.0 {
            return Err(Error::Domain(format!("expected_eta needs n^gamma > t (n = {n}, t = {})", self.t)));
        }
        Ok(self.eta_s(n.ln()))
    }

    #[inline]
    fn g_s(&self, s: f64) -> f64 {
        let u = self.u_of(s);
        let q = ((self.gamma - 1.0) * s).exp_m1();
        if q == 0.0 {
            return 1.0;
        }
        u / q
    }

    /// `G(n,t) = (1/t - 1/n^gamma)/(1/n - 1/n^gamma)`: the fraction of boxes created at `n` still uncut.
    pub fn survival_fraction(&self, n: f64) -> Result<f64> {
        let s = self.check_range(n)?;
        Ok(self.g_s(s).clamp(0.0, 1.0))
    }

    #[inline]
    fn cdf_s(&self, s: f64) -> f64 {
        ((s - self.ln_t) / self.gamma).exp() * self.g_s(s)
    }

    /// `G(n,t) n^(1/gamma) / t^(1/gamma)`.
    pub fn cdf(&self, n: f64) -> Result<f64> {
        let s = self.check_range(n)?;
        Ok(self.cdf_s(s).clamp(0.0, 1.0))
    }

    #[inline]
    fn density_s(&self, s: f64) -> f64 {
        let g = self.gamma;
        let a = 1.0 / g;
        let n = s.exp();
        let p = self.u_of(s);
        let q = ((g - 1.0) * s).exp_m1();
        let ng = (g * s).exp();
        let t_a = (self.ln_t * a).exp();
        let d1 = a * ((a - 1.0) * s).exp() * p / q;
        let d2 = ((a + g - 2.0) * s).exp() * ((ng - g * n) / self.t + g - 1.0) / (q * q);
        (d1 + d2) / t_a
    }

    /// `g(n) = d/dn [G(n,t) n^(1/gamma)] / t^(1/gamma)`.
    pub fn density(&self, n: f64) -> Result<f64> {
        let s = self.check_range(n)?;
        Ok(self.density_s(s))
    }

    /// Integrate `f(n) g(n)` over the creation range in `s = ln n`.
    fn integrate_weighted<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let (lo, hi) = (self.ln_t / self.gamma, self.ln_t);
        let r = quadrature::integrate(|s| self.density_s(s) * s.exp() * f(s), lo, hi, 1e-10, 0.0, 4000)?;
        Ok(r.value)
    }

    /// `int g(n) dn`; 1 for a valid model.
    pub fn density_mass(&self) -> Result<f64> {
        self.integrate_weighted(|_| 1.0)
    }

    /// `e(t) = int g(n) E eta_n dn` by adaptive quadrature.
    pub fn mixture_mean_numeric(&self) -> Result<f64> {
        self.integrate_weighted(|s| self.eta_s(s))
    }

    /// The explicit integral
    /// `I = (g+1) t^(-1/g) (t^g+t)^(1/g^2) (g^2((t/(t^g+t))^(1/g^2) - 1) + ln(t^(g-1)+1))`.
    pub fn mixture_mean_closed(&self) -> Result<f64> {
        let g = self.gamma;
        let g2 = g * g;
        let tail = ((1.0 - g) * self.ln_t).exp().ln_1p();
        let ln_sum = g * self.ln_t + tail;
        let ln_big = (g - 1.0) * self.ln_t + tail;
        let prefactor = (g + 1.0) * (ln_sum / g2 - self.ln_t / g).exp();
        // (t/(t^g+t))^(1/g^2) = exp(-ln(t^(g-1)+1)/g^2).
        let inner = g2 * (-ln_big / g2).exp_m1() + ln_big;
        let v = prefactor * inner;
        if !v.is_finite() {
            return Err(Error::Overflow(format!("closed-form integral overflows at t = {}", self.t)));
        }
        Ok(v)
    }

    /// Draw a creation time from `g` by bisection on the CDF in log space.
    fn sample_n<R: Rng>(&self, rng: &mut R) -> f64 {
        let target: f64 = rng.gen();
        let (mut lo, mut hi) = (self.ln_t / self.gamma, self.ln_t);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if self.cdf_s(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).exp()
    }

    fn sample_eta<R: Rng>(&self, rng: &mut R) -> f64 {
        let n = self.sample_n(rng);
        let a = (-self.gamma * n.ln()).exp();
        let b = 1.0 / self.t;
        let xi = a + (b - a) * rng.gen::<f64>();
        1.0 / (n * xi)
    }

    /// Monte Carlo estimate of `e(t)` with a 95% normal-approximation half-width.
    /// Results depend only on `(samples, seed)`, not on `exec`.
    pub fn monte_carlo(&self, samples: u64, seed: u64, exec: Execution) -> Result<McEstimate> {
        if samples < MIN_MC_SAMPLES {
            return Err(Error::Config(format!("monte carlo needs at least {MIN_MC_SAMPLES} samples, got {samples}")));
        }
        let shards = MC_SHARDS as u64;
        let parts = exec.map_range(MC_SHARDS, |i| {
            let i = i as u64;
            let count = samples / shards + u64::from(i < samples % shards);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let (mut mean, mut m2) = (0.0f64, 0.0f64);
            for k in 1..=count {
                let x = self.sample_eta(&mut rng);
                let d = x - mean;
                mean += d / k as f64;
                m2 += d * (x - mean);
            }
            (count, mean, m2)
        });
        let (mut n, mut mean, mut m2) = (0u64, 0.0f64, 0.0f64);
        for (c, m, q) in parts {
            if c == 0 {
                continue;
            }
            let tot = n + c;
            let d = m - mean;
            mean += d * c as f64 / tot as f64;
            m2 += q + d * d * (n as f64) * (c as f64) / tot as f64;
            n = tot;
        }
        let sd = (m2 / (n - 1) as f64).sqrt();
        Ok(McEstimate { mean, ci95: 1.96 * sd / (n as f64).sqrt(), samples, seed })
    }
}

/// Predicted number of live second-kind endpoints created at `n`, up to a constant: `n^(1/gamma+1)/t`.
pub fn survival_prediction(gamma: f64, n: f64, t: f64) -> f64 {
    ((1.0 / gamma + 1.0) * n.ln() - t.ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(g: f64, t: f64) -> MixtureModel {
        MixtureModel::new(g, t).unwrap()
    }

    #[test]
    fn model_domain() {
        assert!(MixtureModel::new(1.0, 10.0).is_err());
        assert!(MixtureModel::new(1.3, 1.0).is_err());
        assert!(MixtureModel::new(f64::NAN, 10.0).is_err());
        let x = m(4.0 / 3.0, 1e6);
        assert!((x.n_min() - 1e6f64.powf(0.75)).abs() < 1e-9);
    }

    #[test]
    fn expected_eta_matches_direct_formula() {
        let x = m(4.0 / 3.0, 100.0);
        let n: f64 = 80.0;
        let ng = n.powf(4.0 / 3.0);
        let direct = 100.0 * n.powf(1.0 / 3.0) * (ng.ln() - 100f64.ln()) / (ng - 100.0);
        assert!((x.expected_eta(n).unwrap() - direct).abs() < 1e-13 * direct);
        assert!(x.expected_eta(10.0).is_err());
        assert!(x.expected_eta(100f64.powf(0.75)).is_err());
    }

    #[test]
    fn expected_eta_series_branch_is_continuous() {
        let x = m(4.0 / 3.0, 1e6);
        let lo = x.n_min();
        let limit = lo.powf(1.0 / 3.0);
        let near = x.expected_eta(lo * (1.0 + 1e-9)).unwrap();
        assert!((near - limit).abs() < 1e-8 * limit);
        for u in [0.99e-6f64, 1.01e-6, -0.99e-6, 1e-12] {
            let exact = u.ln_1p() / u;
            assert!((log_ratio(u) - exact).abs() < 1e-15, "u = {u}");
        }
    }

    #[test]
    fn eta_strictly_inside_support() {
        let x = m(10.0 / 7.0, 1e6);
        for k in 1..50 {
            let n = x.n_min() * (x.t / x.n_min()).powf(k as f64 / 50.0);
            let e = x.expected_eta(n).unwrap();
            assert!(e > x.t / n && e < n.powf(x.gamma - 1.0), "n = {n}");
        }
    }

    #[test]
    fn survival_fraction_edges() {
        let x = m(4.0 / 3.0, 1e6);
        assert!((x.survival_fraction(1e6).unwrap() - 1.0).abs() < 1e-12);
        assert!(x.survival_fraction(x.n_min()).unwrap().abs() < 1e-12);
        assert!(x.survival_fraction(10.0).is_err());
        assert!(x.survival_fraction(2e6).is_err());
        let direct = |n: f64| (1.0 / 1e6 - n.powf(-4.0 / 3.0)) / (1.0 / n - n.powf(-4.0 / 3.0));
        let n = 1e5;
        assert!((x.survival_fraction(n).unwrap() - direct(n)).abs() < 1e-12);
    }

    #[test]
    fn density_is_derivative_of_cdf() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(g, t) in &[(4.0 / 3.0, 1e6), (10.0 / 7.0, 1e4), (1.3, 1e8)] {
            let x = m(g, t);
            let (lo, hi) = (x.n_min(), x.t);
            for _ in 0..100 {
                let n = lo + (hi - lo) * rng.gen_range(0.01..0.99);
                let h = 1e-5 * n;
                let fd = (x.cdf(n + h).unwrap() - x.cdf(n - h).unwrap()) / (2.0 * h);
                let d = x.density(n).unwrap();
                assert!(d >= 0.0);
                assert!((fd - d).abs() <= 1e-8 * d.abs().max(1e-300) + 1e-14 / hi, "g={g} t={t} n={n}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn density_integrates_to_one() {
        for &(g, t) in &[(4.0 / 3.0, 1e4), (4.0 / 3.0, 1e10), (10.0 / 7.0, 1e6)] {
            let mass = m(g, t).density_mass().unwrap();
            assert!((mass - 1.0).abs() < 1e-8, "g={g} t={t}: {mass}");
        }
    }

    #[test]
    fn numeric_mean_matches_oracle() {
        // Independent high-precision evaluation of e(t).
        let cases = [
            (4.0 / 3.0, 1e4, 4.505639923603771),
            (4.0 / 3.0, 1e10, 13.896105391471266),
            (10.0 / 7.0, 1e6, 9.947970389075271),
            (10.0 / 7.0, 1e12, 23.831973756289855),
        ];
        for (g, t, want) in cases {
            let got = m(g, t).mixture_mean_numeric().unwrap();
            assert!((got - want).abs() < 1e-8 * want, "g={g} t={t}: {got} vs {want}");
        }
    }

    #[test]
    fn closed_form_matches_oracle() {
        let cases = [
            (4.0 / 3.0, 1e4, 3.9396566371607236),
            (4.0 / 3.0, 1e12, 17.367181641690195),
            (10.0 / 7.0, 1e6, 9.714401318825734),
            (10.0 / 7.0, 1e10, 19.049390625243873),
        ];
        for (g, t, want) in cases {
            let got = m(g, t).mixture_mean_closed().unwrap();
            assert!((got - want).abs() < 1e-11 * want, "g={g} t={t}: {got} vs {want}");
        }
        for k in 3..16 {
            assert!(m(4.0 / 3.0, 10f64.powi(k)).mixture_mean_closed().unwrap() > 0.0);
        }
    }

    #[test]
    fn numeric_ratio_increases_with_t() {
        for g in [4.0 / 3.0, 10.0 / 7.0] {
            let r: Vec<f64> = [1e4, 1e6, 1e8, 1e10]
                .iter()
                .map(|&t| m(g, t).mixture_mean_numeric().unwrap() / t.ln())
                .collect();
            assert!(r.windows(2).all(|w| w[1] > w[0]), "{r:?}");
            assert!(r.iter().all(|&v| v < g * g - 1.0));
        }
    }

    #[test]
    fn monte_carlo_agrees_and_is_execution_independent() {
        let x = m(4.0 / 3.0, 1e6);
        let a = x.monte_carlo(200_000, 42, Execution::Sequential).unwrap();
        let b = x.monte_carlo(200_000, 42, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        let e = x.mixture_mean_numeric().unwrap();
        assert!((a.mean - e).abs() < 3.0 * a.ci95, "{} +- {} vs {e}", a.mean, a.ci95);
        assert!(x.monte_carlo(999, 1, Execution::Sequential).is_err());
    }

    #[test]
    fn monte_carlo_ci_scales_with_sqrt_samples() {
        let x = m(4.0 / 3.0, 1e4);
        let small = x.monte_carlo(1_000, 3, Execution::Sequential).unwrap();
        let big = x.monte_carlo(100_000, 3, Execution::Sequential).unwrap();
        let ratio = small.ci95 / big.ci95;
        assert!((ratio / 10.0 - 1.0).abs() < 0.35, "ratio {ratio}");
    }

    #[test]
    fn survival_prediction_increasing() {
        let t: f64 = 1e7;
        let mut prev = 0.0;
        for k in 1..20 {
            let n = t.powf(0.75) + (t - t.powf(0.75)) * k as f64 / 20.0;
            let p = survival_prediction(4.0 / 3.0, n, t);
            assert!(p > prev);
            prev = p;
        }
    }
}
