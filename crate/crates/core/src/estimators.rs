//! Path functionals: the mollified DSLT, kernel local time, the forward
//! Itô sum and the Tanaka residual, plus the Monte Carlo driver.
//!
//! The double integral over `0 <= r <= s <= t` is written in lag form,
//! `int_0^t u^{2H-1} g(u) du` with `g(u) = int_u^t f'(B_s - B_{s-u} - y) ds`.
//! `g` is sampled at grid lags with the trapezoid rule and the singular
//! weight `u^{2H-1}` is integrated exactly against piecewise-linear hats.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::covariance::HurstParams;
use crate::error::{domain, DsltError, Result};
use crate::mollifier::Mollifier;
use crate::pathgen::{FbmPath, PathSampler, Sampler, SamplerMethod, TimeGrid};
use crate::stats::{McSummary, Moments};

/// Kernel values are skipped beyond this many standard deviations.
const CUTOFF_SIGMAS: f64 = 8.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub eps: f64,
    pub bandwidth: f64,
    pub y: f64,
    pub t: f64,
    pub n: usize,
    pub reps: u64,
    pub seed: u64,
    pub method: SamplerMethod,
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return domain("mollifier scale must be positive");
        }
        if !(self.bandwidth > 0.0) {
            return domain("bandwidth must be positive");
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return domain("horizon must be positive");
        }
        if !self.y.is_finite() {
            return domain("offset y must be finite");
        }
        if self.n < 2 {
            return domain("grid needs at least 2 steps");
        }
        if self.reps < 1 {
            return domain("need at least one path");
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t, self.n)
    }
}

/// Index of `t` on the path grid, or a domain error.
fn horizon_index(path: &FbmPath, t: f64) -> Result<usize> {
    if t > path.grid.t_max() * (1.0 + 1e-12) {
        return domain(format!(
            "horizon {t} exceeds path length {}",
            path.grid.t_max()
        ));
    }
    path.grid
        .index_of(t)
        .ok_or_else(|| DsltError::Domain(format!("time {t} is not a grid point")))
}

/// Second difference `(k+1)^p - 2k^p + (k-1)^p` without cancellation for large `k`.
fn second_difference(k: usize, p: f64) -> f64 {
    let kf = k as f64;
    if k < 16 {
        return (kf + 1.0).powf(p) - 2.0 * kf.powf(p) + (kf - 1.0).powf(p);
    }
    // k^p * 2 * sum_j C(p, 2j) k^{-2j}
    let x2 = 1.0 / (kf * kf);
    let mut coef = p * (p - 1.0) / 2.0;
    let mut xp = x2;
    let mut sum = 0.0;
    let mut j = 1.0;
    loop {
        let term = coef * xp;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() || j > 30.0 {
            break;
        }
        coef *= (p - 2.0 * j) * (p - 2.0 * j - 1.0) / ((2.0 * j + 1.0) * (2.0 * j + 2.0));
        xp *= x2;
        j += 1.0;
    }
    2.0 * kf.powf(p) * sum
}

/// Product-integration weights `W_k = int u^{2H-1} phi_k(u) du` for the hat
/// functions `phi_k` centred on lags `k dt`, `k = 0..=m`.
pub fn lag_weights(hurst: HurstParams, dt: f64, m: usize) -> Vec<f64> {
    let two_h = hurst.two_h();
    let p = two_h + 1.0;
    let scale = dt.powf(two_h) / (two_h * p);
    let mut w = Vec::with_capacity(m + 1);
    w.push(scale);
    for k in 1..m {
        w.push(scale * second_difference(k, p));
    }
    if m >= 1 {
        // right half-hat at the last lag
        let mf = m as f64;
        w.push(scale * ((mf - 1.0).powf(p) - mf.powf(p) + p * mf.powf(p - 1.0)));
    }
    w
}

/// `alpha'_{t,eps}(y)` on a path, discretized in lag form.
pub fn alpha_prime_estimate(path: &FbmPath, t: f64, eps: f64, y: f64) -> Result<f64> {
    Ok(alpha_prime_batch(path, t, &[(eps, y)])?[0])
}

/// The estimator for several `(eps, y)` pairs sharing one pass over the path.
pub fn alpha_prime_batch(path: &FbmPath, t: f64, pairs: &[(f64, f64)]) -> Result<Vec<f64>> {
    let m = horizon_index(path, t)?;
    let molls = pairs
        .iter()
        .map(|&(eps, _)| Mollifier::new(eps))
        .collect::<Result<Vec<_>>>()?;
    let dt = path.grid.dt();
    let weights = lag_weights(path.hurst, dt, m);
    let b = &path.values[..=m];
    let cut: Vec<f64> = molls
        .iter()
        .map(|mo| CUTOFF_SIGMAS * mo.eps().sqrt())
        .collect();
    let mut acc = vec![0.0; pairs.len()];
    let mut g = vec![0.0; pairs.len()];
    // diagonal lag: the integrand is the constant f'(-y)
    for (q, &(_, y)) in pairs.iter().enumerate() {
        acc[q] += weights[0] * t * molls[q].f_prime(-y);
    }
    for k in 1..m {
        g.iter_mut().for_each(|v| *v = 0.0);
        let last = m - k;
        for j in 0..=last {
            let d = b[j + k] - b[j];
            let half = j == 0 || j == last;
            for (q, &(_, y)) in pairs.iter().enumerate() {
                let x = d - y;
                if x.abs() < cut[q] {
                    let v = molls[q].f_prime(x);
                    g[q] += if half { 0.5 * v } else { v };
                }
            }
        }
        for q in 0..pairs.len() {
            acc[q] += weights[k] * dt * g[q];
        }
    }
    Ok(acc.into_iter().map(|v| -v).collect())
}

/// Exact expectation of [`alpha_prime_estimate`] over fBm paths on the grid.
pub fn expected_alpha_discrete(hurst: HurstParams, t: f64, n: usize, eps: f64, y: f64) -> Result<f64> {
    Mollifier::new(eps)?;
    let grid = TimeGrid::new(t, n)?;
    let dt = grid.dt();
    let w = lag_weights(hurst, dt, n);
    let mut s = 0.0;
    for k in 0..n {
        let v = eps + hurst.pow2h(k as f64 * dt);
        let fp = Mollifier::new(v)?.f_prime(y);
        s += w[k] * (n - k) as f64 * dt * fp;
    }
    Ok(s)
}

/// Kernel occupation density `int_0^s f_h(B_u - x) du`, left Riemann sum.
pub fn local_time_estimate(path: &FbmPath, s: f64, x: f64, bandwidth: f64) -> Result<f64> {
    let kern = Mollifier::new(bandwidth)?;
    let i = horizon_index(path, s)?;
    let dt = path.grid.dt();
    Ok(dt * path.values[..i].iter().map(|&b| kern.f(b - x)).sum::<f64>())
}

/// Forward sum `sum_i integrand[i] (B_{i+1} - B_i)`; Brownian paths only.
pub fn ito_forward_integral(path: &FbmPath, integrand: &[f64]) -> Result<f64> {
    if !path.hurst.is_brownian() {
        return Err(DsltError::Contract(format!(
            "forward Ito sum requires H = 0.5, got {}",
            path.hurst.h()
        )));
    }
    let n = path.grid.steps();
    if integrand.len() < n {
        return domain(format!(
            "integrand has {} values, need at least {n}",
            integrand.len()
        ));
    }
    Ok((0..n)
        .map(|i| integrand[i] * (path.values[i + 1] - path.values[i]))
        .sum())
}

#[inline]
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `int_0^t sgn(B_t - B_r - y) dr`, left Riemann sum with `sgn(0) = 0`.
pub fn sgn_occupation(path: &FbmPath, t: f64, y: f64) -> Result<f64> {
    let m = horizon_index(path, t)?;
    let dt = path.grid.dt();
    let bt = path.values[m];
    Ok(dt * path.values[..m].iter().map(|&b| sgn(bt - b - y)).sum::<f64>())
}

/// The pieces of the Tanaka identity on one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TanakaParts {
    pub alpha: f64,
    pub ito: f64,
    pub sgn_occ: f64,
    pub residual: f64,
}

/// `1/2 alpha' + 1/2 sgn(y) t - (int L dB - 1/2 int sgn(B_t - B_r - y) dr)` for Brownian paths.
pub fn tanaka_residual_bm(path: &FbmPath, config: &EstimatorConfig) -> Result<f64> {
    Ok(tanaka_parts(path, config)?.residual)
}

pub fn tanaka_parts(path: &FbmPath, config: &EstimatorConfig) -> Result<TanakaParts> {
    if !path.hurst.is_brownian() {
        return Err(DsltError::Contract(format!(
            "Tanaka residual is defined for H = 0.5 only, got {}",
            path.hurst.h()
        )));
    }
    let (t, y) = (config.t, config.y);
    let m = horizon_index(path, t)?;
    let molf = Mollifier::new(config.eps)?;
    let kern = Mollifier::new(config.bandwidth)?;
    let shared = config.eps == config.bandwidth;
    let cut_f = CUTOFF_SIGMAS * config.eps.sqrt();
    let cut_l = CUTOFF_SIGMAS * config.bandwidth.sqrt();
    let cut = cut_f.max(cut_l);
    let dt = path.grid.dt();
    let b = &path.values[..=m];

    // At H = 1/2 the lag weights reduce to the 2-D trapezoid rule:
    // interior pairs weigh dt^2, pairs touching j = 0 or i = m half that.
    let mut alpha_sum = 0.0;
    let mut ito = 0.0;
    for i in 1..=m {
        let bi = b[i];
        let mut fsum = 0.0;
        let mut fpsum = 0.0;
        for (j, &bj) in b[..i].iter().enumerate() {
            let d = bi - bj - y;
            if d.abs() >= cut {
                continue;
            }
            let (f, fp) = if shared {
                let f = molf.f(d);
                (f, -d / config.eps * f)
            } else {
                (kern.f(d), molf.f_prime(d))
            };
            fsum += f;
            let w = if j == 0 || i == m { 0.5 } else { 1.0 };
            // j == 0 and i == m together is the full-lag corner, which the
            // hat weight at lag m does not reach
            let w = if j == 0 && i == m { 0.0 } else { w };
            fpsum += w * fp;
        }
        alpha_sum += fpsum;
        if i < m {
            ito += dt * fsum * (b[i + 1] - bi);
        }
    }
    // diagonal cells: half-width trapezoid strip along r = s
    let alpha = -(dt * dt * alpha_sum + 0.5 * dt * t * molf.f_prime(-y));
    let sgn_occ = sgn_occupation(path, t, y)?;
    let residual = 0.5 * alpha + 0.5 * sgn(y) * t - (ito - 0.5 * sgn_occ);
    Ok(TanakaParts {
        alpha,
        ito,
        sgn_occ,
        residual,
    })
}

/// Number of worker threads: `DSLT_THREADS` if set, else the available parallelism.
pub fn worker_count() -> usize {
    let avail = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var("DSLT_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        Some(k) if k >= 1 => k,
        _ => avail,
    }
}

/// Apply `f` to paths `0..reps` of the stream; results are returned in path
/// order, so the output does not depend on the number of workers.
pub fn map_paths<T, F>(sampler: &Sampler, seed: u64, reps: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&FbmPath) -> T + Sync,
{
    let reps = reps as usize;
    let workers = worker_count().min(reps.max(1));
    if workers <= 1 {
        return (0..reps)
            .map(|k| f(&sampler.sample_stream(seed, k as u64)))
            .collect();
    }
    let next = AtomicUsize::new(0);
    let mut chunks: Vec<Vec<(usize, T)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let k = next.fetch_add(1, Ordering::Relaxed);
                        if k >= reps {
                            break;
                        }
                        out.push((k, f(&sampler.sample_stream(seed, k as u64))));
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut all: Vec<(usize, T)> = chunks.drain(..).flatten().collect();
    all.sort_by_key(|(k, _)| *k);
    all.into_iter().map(|(_, v)| v).collect()
}

/// Mean, variance and standard error of `functional` over `config.reps` paths.
pub fn mc_summary<F>(hurst: HurstParams, config: &EstimatorConfig, functional: F) -> Result<McSummary>
where
    F: Fn(&FbmPath) -> f64 + Sync,
{
    let cols = mc_collect(hurst, config, |p| vec![functional(p)])?;
    Ok(cols[0].summary())
}

/// Moments of each component of a vector-valued functional.
pub fn mc_collect<F>(hurst: HurstParams, config: &EstimatorConfig, functional: F) -> Result<Vec<Moments>>
where
    F: Fn(&FbmPath) -> Vec<f64> + Sync,
{
    let samples = mc_samples(hurst, config, functional)?;
    let d = samples.first().map_or(0, Vec::len);
    let mut out = vec![Moments::new(); d];
    for row in &samples {
        for (m, &v) in out.iter_mut().zip(row) {
            m.push(v);
        }
    }
    Ok(out)
}

/// Raw per-path values of a vector-valued functional, in path order.
pub fn mc_samples<F>(hurst: HurstParams, config: &EstimatorConfig, functional: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&FbmPath) -> Vec<f64> + Sync,
{
    if config.reps < 2 {
        return domain("Monte Carlo summary needs at least 2 paths");
    }
    let grid = config.grid()?;
    let sampler = Sampler::new(hurst, grid, config.method)?;
    Ok(map_paths(&sampler, config.seed, config.reps, functional))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mollifier::f_eps;
    use crate::quadrature::gauss::adaptive_gk15;

    fn hp(h: f64) -> HurstParams {
        HurstParams::new(h).unwrap()
    }

    fn det_path(h: f64, n: usize, f: impl Fn(f64) -> f64) -> FbmPath {
        let g = TimeGrid::new(1.0, n).unwrap();
        let v = g.points().into_iter().map(f).collect();
        FbmPath::from_values(hp(h), g, v, SamplerMethod::Cholesky).unwrap()
    }

    #[test]
    fn lag_weights_integrate_the_power_exactly() {
        for h in [0.2, 0.5, 0.8] {
            let n = 50;
            let dt = 1.0 / n as f64;
            let w = lag_weights(hp(h), dt, n);
            let total: f64 = w.iter().sum();
            // hats form a partition of unity on [0, 1]
            let exact = 1.0 / (2.0 * h);
            assert!((total - exact).abs() < 1e-12, "H={h}: {total} vs {exact}");
            let first: f64 = w.iter().enumerate().map(|(k, wk)| wk * k as f64 * dt).sum();
            assert!((first - 1.0 / (2.0 * h + 1.0)).abs() < 1e-12);
        }
        let w = lag_weights(hp(0.5), 0.1, 10);
        assert!((w[0] - 0.05).abs() < 1e-15 && (w[5] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn second_difference_series_matches_direct() {
        for p in [1.2, 1.6, 2.0, 2.6] {
            for k in [16usize, 40, 200] {
                let kf = k as f64;
                let direct = (kf + 1.0).powf(p) - 2.0 * kf.powf(p) + (kf - 1.0).powf(p);
                let s = second_difference(k, p);
                assert!((s - direct).abs() < 1e-8 * direct.abs(), "p={p} k={k}");
            }
        }
    }

    #[test]
    fn zero_path_gives_zero() {
        let p = det_path(0.4, 64, |_| 0.0);
        assert_eq!(alpha_prime_estimate(&p, 1.0, 0.1, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn linear_path_matches_quadrature() {
        let n = 1 << 12;
        let p = det_path(0.5, n, |s| s);
        let got = alpha_prime_estimate(&p, 1.0, 0.1, 0.0).unwrap();
        // -int_0^1 int_0^s f'(s - r) dr ds = int_0^1 (f(0) - f(s)) ds
        let m = Mollifier::new(0.1).unwrap();
        let exact = adaptive_gk15(|s| m.f(0.0) - m.f(s), 0.0, 1.0, 1e-14, 0.0, 200).value;
        assert!((got - exact).abs() < 1e-3, "{got} vs {exact}");
    }

    #[test]
    fn discrete_expectation_tracks_continuum_mean() {
        let h = hp(0.5);
        let d = expected_alpha_discrete(h, 1.0, 1024, 0.01, 0.5).unwrap();
        let c = crate::mollifier::mean_alpha_eps(h, 1.0, 0.01, 0.5).unwrap();
        assert!((d - c).abs() < 1e-3 * c.abs(), "{d} vs {c}");
    }

    #[test]
    fn local_time_examples() {
        let z = det_path(0.5, 100, |_| 0.0);
        let l = local_time_estimate(&z, 1.0, 0.0, 1.0).unwrap();
        assert!((l - f_eps(1.0, 0.0).unwrap()).abs() < 1e-12);
        let p = crate::pathgen::sample_circulant(hp(0.5), TimeGrid::new(1.0, 256).unwrap(), 3).unwrap();
        let max = p.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(local_time_estimate(&p, 1.0, max + 10.0 * 0.1, 0.01).unwrap() < 1e-20);
        let lo = -max - 2.0;
        let mass = adaptive_gk15(
            |x| local_time_estimate(&p, 0.5, x, 0.01).unwrap(),
            lo,
            -lo,
            1e-10,
            0.0,
            5000,
        );
        assert!((mass.value - 0.5).abs() < 1e-6, "{}", mass.value);
    }

    #[test]
    fn ito_sum_examples() {
        let p = crate::pathgen::sample_circulant(hp(0.5), TimeGrid::new(1.0, 128).unwrap(), 9).unwrap();
        let ones = vec![1.0; 129];
        let bt = *p.values.last().unwrap();
        assert!((ito_forward_integral(&p, &ones).unwrap() - bt).abs() < 1e-12);
        assert_eq!(ito_forward_integral(&p, &[0.0; 129]).unwrap(), 0.0);
        let q = crate::pathgen::sample_circulant(hp(0.7), TimeGrid::new(1.0, 128).unwrap(), 9).unwrap();
        assert!(matches!(
            ito_forward_integral(&q, &ones),
            Err(DsltError::Contract(_))
        ));
    }

    #[test]
    fn ito_sum_converges_to_ito_formula() {
        let n = 1 << 14;
        let p = crate::pathgen::sample_circulant(hp(0.5), TimeGrid::new(1.0, n).unwrap(), 4).unwrap();
        let got = ito_forward_integral(&p, &p.values).unwrap();
        let bt = p.values[n];
        assert!((got - 0.5 * (bt * bt - 1.0)).abs() < 0.05);
    }

    #[test]
    fn sgn_occupation_examples() {
        let z = det_path(0.5, 10, |_| 0.0);
        assert!((sgn_occupation(&z, 1.0, 1.0).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(sgn_occupation(&z, 1.0, 0.0).unwrap(), 0.0);
        let l = det_path(0.5, 10, |s| s);
        assert!((sgn_occupation(&l, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tanaka_alpha_agrees_with_general_estimator() {
        let p = crate::pathgen::sample_circulant(hp(0.5), TimeGrid::new(1.0, 512).unwrap(), 2).unwrap();
        for y in [0.0, 0.3] {
            let cfg = EstimatorConfig {
                eps: 0.02,
                bandwidth: 0.02,
                y,
                t: 1.0,
                n: 512,
                reps: 1,
                seed: 0,
                method: SamplerMethod::Circulant,
            };
            let parts = tanaka_parts(&p, &cfg).unwrap();
            let a = alpha_prime_estimate(&p, 1.0, 0.02, y).unwrap();
            assert!((parts.alpha - a).abs() < 1e-10 * a.abs().max(1.0), "{} vs {a}", parts.alpha);
        }
    }

    #[test]
    fn tanaka_requires_brownian_path() {
        let p = det_path(0.3, 16, |_| 0.0);
        let cfg = EstimatorConfig {
            eps: 0.1,
            bandwidth: 0.1,
            y: 0.0,
            t: 1.0,
            n: 16,
            reps: 1,
            seed: 0,
            method: SamplerMethod::Cholesky,
        };
        assert!(matches!(tanaka_residual_bm(&p, &cfg), Err(DsltError::Contract(_))));
    }

    #[test]
    fn mc_summary_of_constant_and_determinism() {
        let cfg = EstimatorConfig {
            eps: 0.1,
            bandwidth: 0.1,
            y: 0.0,
            t: 1.0,
            n: 16,
            reps: 20,
            seed: 5,
            method: SamplerMethod::Circulant,
        };
        let s = mc_summary(hp(0.5), &cfg, |_| 3.0).unwrap();
        assert_eq!((s.mean, s.variance, s.reps), (3.0, 0.0, 20));
        let a = mc_summary(hp(0.5), &cfg, |p| p.values[16]).unwrap();
        let b = mc_summary(hp(0.5), &cfg, |p| p.values[16]).unwrap();
        assert_eq!(a, b);
    }
}
