//! Wiener-chaos norms of the derivative of self-intersection local time.
//!
//! Order `2m - 1` contributes
//! `c_m int w mu^{2m-1} / (lambda rho)^{m+1/2}` with
//! `c_m = m (2m)! / (pi (m!)^2 4^m)`. Writing `gamma = mu^2/(lambda rho)`
//! the integrand is `w mu (lambda rho)^{-3/2} gamma^{m-1}`, and the odd
//! generating series collapses the sum over `m` to
//! `(1/2pi) w mu / (lambda rho - mu^2)^{3/2}`, the direct second-moment
//! integrand. This fixes the combinatorial constant.
//!
//! Terms decay like `m^{-(1/H - 1/2)}` because `gamma -> 1` at the collapsing
//! vertex, so a geometric tail bound in `sup gamma` is useless
//! (`sup gamma = 1`). The tail is instead extrapolated from a power-law fit
//! of the computed terms.

use serde::{Deserialize, Serialize};

use crate::covariance::HurstParams;
use crate::error::{domain, DsltError, Result};
use crate::quadrature::simplex::SimplexRule;

/// `sum_{m>=1} m (2m)! gamma^m / ((m!)^2 4^m) = gamma / (2 (1-gamma)^{3/2})`.
pub fn odd_series_closed(gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(gamma / (2.0 * (1.0 - gamma).powf(1.5)))
}

/// `sum_{m>=1} (m!)^2 4^m gamma^m / (2m)!
///  = (gamma sqrt(1-gamma) + sqrt(gamma) asin(sqrt(gamma))) / (1-gamma)^{3/2}`.
pub fn even_series_closed(gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let s = gamma.sqrt();
    Ok((gamma * (1.0 - gamma).sqrt() + s * s.asin()) / (1.0 - gamma).powf(1.5))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return domain(format!("series argument must lie in [0, 1), got {gamma}"));
    }
    Ok(())
}

/// `max even(gamma) (1-gamma)^{3/2} / sqrt(gamma)` over the positive grid points.
pub fn even_series_bound_constant(gammas: &[f64]) -> Result<f64> {
    let mut k: f64 = 0.0;
    for &g in gammas {
        let v = even_series_closed(g)?;
        if g > 0.0 {
            k = k.max(v * (1.0 - g).powf(1.5) / g.sqrt());
        }
    }
    Ok(k)
}

/// `(2m)! / ((m!)^2 4^m)` for `m = 0..=m_max`, by the ratio recursion.
pub fn central_binomial_ratios(m_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(m_max + 1);
    let mut c = 1.0;
    for m in 0..=m_max {
        out.push(c);
        c *= (2 * m + 1) as f64 / (2 * m + 2) as f64;
    }
    out
}

/// `m (2m)! / (pi (m!)^2 4^m)`.
pub fn chaos_prefactor(m: usize) -> f64 {
    m as f64 * central_binomial_ratios(m)[m] / std::f64::consts::PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosTerm {
    /// The term covers chaos order `2m - 1`.
    pub m: usize,
    pub norm_sq: f64,
    pub abs_err: f64,
    pub gamma_form: String,
}

const GAMMA_FORM: &str = "c_m t^2 int w mu (lambda rho)^(-3/2) gamma^(m-1), gamma = mu^2/(lambda rho)";

/// Simplex integrals `sum_cases int w mu (lambda rho)^{-3/2} gamma^{m-1}` for
/// `m = 1..=m_max` on one rule.
fn raw_terms(rule: &SimplexRule, m_max: usize) -> Vec<f64> {
    let mut acc = vec![0.0; m_max];
    for nodes in &rule.nodes {
        for nd in nodes {
            let lr = nd.lambda * nd.rho;
            // 1 - gamma from the cancellation-free determinant
            let gamma = (1.0 - nd.det / lr).clamp(0.0, 1.0);
            let mut v = nd.weight * nd.mu / (lr * lr.sqrt());
            for a in acc.iter_mut() {
                *a += v;
                v *= gamma;
            }
        }
    }
    acc
}

fn check_h(h: &HurstParams, t: f64) -> Result<()> {
    if h.h() >= 2.0 / 3.0 {
        return domain(format!("chaos norms are finite only for H < 2/3, got {}", h.h()));
    }
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("horizon must be positive, got {t}"));
    }
    Ok(())
}

/// Terms `m = 1..=m_max` from one pair of rules (8- and 6-point Gauss).
pub fn chaos_terms(h: HurstParams, t: f64, m_max: usize, tol: f64) -> Result<Vec<ChaosTerm>> {
    check_h(&h, t)?;
    if m_max < 1 {
        return domain("m_max must be at least 1");
    }
    if !(tol > 0.0) {
        return domain(format!("tolerance must be positive, got {tol}"));
    }
    let fine = raw_terms(&SimplexRule::new(&h, 8, 60, 30), m_max);
    let coarse = raw_terms(&SimplexRule::new(&h, 6, 60, 30), m_max);
    let cm = central_binomial_ratios(m_max);
    let mut out = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        let pre = t * t * m as f64 * cm[m] / std::f64::consts::PI;
        let norm_sq = pre * fine[m - 1];
        let abs_err = pre * (fine[m - 1] - coarse[m - 1]).abs();
        if abs_err > tol {
            return Err(DsltError::Numerical(format!(
                "chaos term m = {m}: error estimate {abs_err:e} exceeds {tol:e}"
            )));
        }
        if norm_sq < -abs_err.max(tol) {
            return Err(DsltError::Numerical(format!("chaos term m = {m} came out negative: {norm_sq:e}")));
        }
        out.push(ChaosTerm {
            m,
            norm_sq,
            abs_err,
            gamma_form: GAMMA_FORM.to_string(),
        });
    }
    Ok(out)
}

/// Squared norm of the order `2m - 1` chaos component over `[0, t]`.
pub fn chaos_term_norm(h: HurstParams, t: f64, m: usize, tol: f64) -> Result<ChaosTerm> {
    if m < 1 {
        return domain("chaos index m must be at least 1");
    }
    let mut terms = chaos_terms(h, t, m, tol)?;
    Ok(terms.pop().expect("m >= 1 terms"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosTotal {
    pub terms: Vec<ChaosTerm>,
    pub partial_sum: f64,
    /// Extrapolated `sum_{m > m_max}`.
    pub tail: f64,
    pub tail_err: f64,
    pub total: f64,
    /// Quadrature error of the partial sum plus the tail uncertainty.
    pub abs_err: f64,
}

/// Hurwitz zeta `sum_{m >= a} m^{-s}` for `s > 1`, `a >= 1`, by Euler-Maclaurin.
pub fn hurwitz_zeta(s: f64, a: usize) -> f64 {
    let n = a + 16;
    let nf = n as f64;
    let mut sum: f64 = (a..n).map(|m| (m as f64).powf(-s)).sum();
    sum += nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    // B_2k / (2k)!
    const B: [f64; 4] = [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0];
    let mut rising = s;
    let mut pw = nf.powf(-s - 1.0);
    for (k, b) in B.iter().enumerate() {
        sum += b * rising * pw;
        let j = 2 * k as u32;
        rising *= (s + j as f64 + 1.0) * (s + j as f64 + 2.0);
        pw /= nf * nf;
    }
    sum
}

/// Least-squares fit `T_m ~ sum_j A_j m^{-p_j}` over the given terms.
fn fit_power_law(terms: &[ChaosTerm], powers: &[f64]) -> Option<Vec<f64>> {
    let k = powers.len();
    let mut ata = vec![vec![0.0; k]; k];
    let mut atb = vec![0.0; k];
    for term in terms {
        let m = term.m as f64;
        // scale rows by m^q so the leading behaviour has unit size
        let sc = m.powf(powers[0]);
        let row: Vec<f64> = powers.iter().map(|&p| m.powf(-p) * sc).collect();
        for i in 0..k {
            atb[i] += row[i] * term.norm_sq * sc;
            for j in 0..k {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    solve(ata, atb)
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Power-law tail of the chaos series after the last computed term, with
/// the spread between a one- and a two-correction fit as its uncertainty.
pub fn power_law_tail(h: &HurstParams, terms: &[ChaosTerm]) -> (f64, f64) {
    let q = 1.0 / h.h() - 0.5;
    let m_max = terms.len();
    if m_max < 8 {
        return (0.0, f64::INFINITY);
    }
    let k1 = (1.0 / (2.0 * h.h())).min(1.0);
    let k2 = (1.0 / (2.0 * h.h())).max(1.0);
    let k2 = if (k2 - k1).abs() < 1e-9 { 2.0 * k1 } else { k2 };
    let fit_from = &terms[m_max / 3..];
    let sum_with = |powers: &[f64]| -> Option<f64> {
        let coef = fit_power_law(fit_from, powers)?;
        Some(powers.iter().zip(&coef).map(|(&p, &c)| c * hurwitz_zeta(p, m_max + 1)).sum())
    };
    let p1 = [q, q + k1];
    let p2 = [q, q + k1, q + k2];
    match (sum_with(&p1), sum_with(&p2)) {
        (Some(a), Some(b)) => (b, (a - b).abs()),
        (Some(a), None) => (a, a.abs()),
        _ => (0.0, f64::INFINITY),
    }
}

/// Partial chaos sum to `m_max` plus the extrapolated tail.
pub fn chaos_total_norm(h: HurstParams, t: f64, m_max: usize, tol: f64) -> Result<ChaosTotal> {
    let terms = chaos_terms(h, t, m_max, tol)?;
    let partial_sum: f64 = terms.iter().map(|c| c.norm_sq).sum();
    let quad_err: f64 = terms.iter().map(|c| c.abs_err).sum();
    let (tail, tail_err) = power_law_tail(&h, &terms);
    Ok(ChaosTotal {
        partial_sum,
        tail,
        tail_err,
        total: partial_sum + tail,
        abs_err: quad_err + tail_err,
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(h: f64) -> HurstParams {
        HurstParams::new(h).unwrap()
    }

    fn odd_partial(g: f64, n: usize) -> f64 {
        let c = central_binomial_ratios(n);
        (1..=n).map(|m| m as f64 * c[m] * g.powi(m as i32)).sum()
    }

    #[test]
    fn series_closed_forms() {
        assert_eq!(odd_series_closed(0.0).unwrap(), 0.0);
        assert_eq!(even_series_closed(0.0).unwrap(), 0.0);
        assert!((odd_series_closed(0.5).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((odd_partial(0.5, 200) - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((even_series_closed(0.5).unwrap() - 2.570796).abs() < 1e-6);
        assert!(odd_series_closed(1.0).is_err() && even_series_closed(-0.1).is_err());
    }

    #[test]
    fn odd_partial_sum_within_tail() {
        // terms are increasing-then-geometric; tail after 50 at 0.9 is bounded by
        // the next term over (1 - 0.9 * ratio)
        let g = 0.9;
        let closed = odd_series_closed(g).unwrap();
        let p = odd_partial(g, 50);
        let next = odd_partial(g, 51) - p;
        assert!(closed - p > 0.0 && closed - p < next / (1.0 - g) * 1.1);
    }

    #[test]
    fn even_bound_constant_is_finite() {
        let gs: Vec<f64> = (0..=99).map(|k| k as f64 / 100.0).collect();
        let k = even_series_bound_constant(&gs).unwrap();
        assert!(k > 1.0 && k < 3.0, "{k}");
    }

    #[test]
    fn zeta_matches_direct_sum() {
        let direct: f64 = (5..2_000_000).map(|m| (m as f64).powf(-2.5)).sum::<f64>();
        let tail_est = 2_000_000f64.powf(-1.5) / 1.5;
        assert!((hurwitz_zeta(2.5, 5) - direct - tail_est).abs() < 1e-12);
        assert!((hurwitz_zeta(2.0, 1) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-13);
    }

    #[test]
    fn brownian_chaos_sum_reaches_five_sixths() {
        let tot = chaos_total_norm(hp(0.5), 1.0, 30, 1e-6).unwrap();
        assert!(tot.terms.iter().all(|c| c.norm_sq > 0.0));
        assert!(tot.terms.windows(2).all(|w| w[1].norm_sq < w[0].norm_sq));
        assert!(tot.partial_sum < 5.0 / 6.0);
        assert!((tot.total - 5.0 / 6.0).abs() < 1e-3 + tot.abs_err, "{tot:?}");
    }

    #[test]
    fn term_norm_scales_as_t_squared() {
        let h = hp(0.35);
        let a = chaos_term_norm(h, 1.0, 3, 1e-4).unwrap().norm_sq;
        let b = chaos_term_norm(h, 2.0, 3, 1e-4).unwrap().norm_sq;
        assert!((b / a - 4.0).abs() < 1e-12);
        assert!(chaos_term_norm(hp(0.7), 1.0, 1, 1e-4).is_err());
    }
}
