//! Covariance structure of fractional Brownian motion and its increments.
//!
//! Every second-moment computation in the crate is expressed through the
//! triple `(lambda, rho, mu)`: the variances of two increments
//! `B_s - B_r` and `B_{s'} - B_{r'}` and their covariance.

use crate::error::{domain, Result};

/// Validated Hurst exponent `0 < h < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstParams {
    h: f64,
    two_h: f64,
}

impl HurstParams {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return domain(format!("hurst must lie strictly in (0,1), got {h}"));
        }
        Ok(Self { h, two_h: 2.0 * h })
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn two_h(&self) -> f64 {
        self.two_h
    }

    /// True when the process is standard Brownian motion.
    pub fn is_brownian(&self) -> bool {
        self.h == 0.5
    }

    /// `|x|^{2H}` with an explicit zero branch; exact at `H = 1/2`.
    #[inline]
    pub fn pow2h(&self, x: f64) -> f64 {
        if self.two_h == 1.0 {
            x.abs()
        } else {
            pow_abs(x, self.two_h)
        }
    }
}

/// `|x|^p` evaluated as `exp(p ln|x|)`, returning 0 at `x = 0` for `p > 0`.
#[inline]
pub fn pow_abs(x: f64, p: f64) -> f64 {
    let ax = x.abs();
    if ax == 0.0 {
        0.0
    } else {
        (p * ax.ln()).exp()
    }
}

/// Two intervals `[r, s]` and `[r', s']` of the time simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalPair {
    pub r: f64,
    pub s: f64,
    pub r_prime: f64,
    pub s_prime: f64,
}

impl IntervalPair {
    pub fn new(r: f64, s: f64, r_prime: f64, s_prime: f64) -> Result<Self> {
        let times = [r, s, r_prime, s_prime];
        if times.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return domain("interval endpoints must be finite and nonnegative");
        }
        if r > s || r_prime > s_prime {
            return domain(format!(
                "intervals must be ordered: got [{r}, {s}] and [{r_prime}, {s_prime}]"
            ));
        }
        Ok(Self {
            r,
            s,
            r_prime,
            s_prime,
        })
    }

    /// The same pair with the two intervals exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            r: self.r_prime,
            s: self.s_prime,
            r_prime: self.r,
            s_prime: self.s,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            r: c * self.r,
            s: c * self.s,
            r_prime: c * self.r_prime,
            s_prime: c * self.s_prime,
        }
    }
}

/// Variances `lambda`, `rho` of two increments and their covariance `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovTriple {
    pub lambda: f64,
    pub rho: f64,
    pub mu: f64,
}

impl CovTriple {
    /// `lambda * rho - mu^2`, evaluated directly.
    pub fn det(&self) -> f64 {
        self.lambda * self.rho - self.mu * self.mu
    }

    /// Squared correlation `mu^2 / (lambda rho)`.
    pub fn gamma(&self) -> f64 {
        self.mu * self.mu / (self.lambda * self.rho)
    }
}

fn check_time(x: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return domain(format!("time must be finite and nonnegative, got {x}"));
    }
    Ok(())
}

/// `E[B_s B_t] = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2`.
pub fn fbm_cov(hurst: HurstParams, s: f64, t: f64) -> Result<f64> {
    check_time(s)?;
    check_time(t)?;
    Ok(fbm_cov_unchecked(hurst, s, t))
}

#[inline]
pub(crate) fn fbm_cov_unchecked(hurst: HurstParams, s: f64, t: f64) -> f64 {
    if hurst.is_brownian() {
        return s.min(t);
    }
    0.5 * (hurst.pow2h(s) + hurst.pow2h(t) - hurst.pow2h(t - s))
}

/// `Var(B_s - B_r) = |s - r|^{2H}`.
pub fn increment_var(hurst: HurstParams, r: f64, s: f64) -> f64 {
    hurst.pow2h(s - r)
}

/// Covariance triple of the increments over the two intervals of `p`.
pub fn increment_cov(hurst: HurstParams, p: &IntervalPair) -> CovTriple {
    let IntervalPair {
        r,
        s,
        r_prime,
        s_prime,
    } = *p;
    if hurst.is_brownian() {
        // independent increments: the covariance is the overlap length
        return CovTriple {
            lambda: s - r,
            rho: s_prime - r_prime,
            mu: (s.min(s_prime) - r.max(r_prime)).max(0.0),
        };
    }
    CovTriple {
        lambda: hurst.pow2h(s - r),
        rho: hurst.pow2h(s_prime - r_prime),
        mu: 0.5
            * (hurst.pow2h(s_prime - r) + hurst.pow2h(s - r_prime)
                - hurst.pow2h(s_prime - s)
                - hurst.pow2h(r_prime - r)),
    }
}

/// Dense covariance matrix `M[i][j] = Cov(B_{t_i}, B_{t_j})` in row-major order.
pub fn increment_cov_matrix(hurst: HurstParams, times: &[f64]) -> Result<Vec<f64>> {
    if times.is_empty() {
        return domain("time grid is empty");
    }
    for &t in times {
        check_time(t)?;
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return domain("time grid must be strictly increasing");
    }
    let n = times.len();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = fbm_cov_unchecked(hurst, times[i], times[j]);
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
    Ok(m)
}
