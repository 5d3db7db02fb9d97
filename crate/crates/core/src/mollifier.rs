//! Gaussian approximate identity `f_eps` and the moments it induces.

use statrs::function::erf::erfc;

use crate::covariance::HurstParams;
use crate::error::{domain, DsltError, Result};
use crate::quadrature::gauss::adaptive_gk15;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Gaussian density of variance `eps`, used as a smooth delta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mollifier {
    eps: f64,
    inv_eps: f64,
    norm: f64,
}

impl Mollifier {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return domain(format!("mollifier scale must be positive, got {eps}"));
        }
        Ok(Self {
            eps,
            inv_eps: 1.0 / eps,
            norm: FRAC_1_SQRT_2PI / eps.sqrt(),
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    #[inline]
    pub fn f(&self, x: f64) -> f64 {
        self.norm * (-0.5 * x * x * self.inv_eps).exp()
    }

    #[inline]
    pub fn f_prime(&self, x: f64) -> f64 {
        -x * self.inv_eps * self.f(x)
    }

    /// `int_0^x f_eps(u) du = Phi(x / sqrt(eps)) - 1/2`.
    pub fn antiderivative(&self, x: f64) -> f64 {
        let z = x / (2.0 * self.eps).sqrt();
        // erfc keeps full relative accuracy in the far tail
        if z >= 0.0 {
            0.5 - 0.5 * erfc(z)
        } else {
            0.5 * erfc(-z) - 0.5
        }
    }
}

pub fn f_eps(eps: f64, x: f64) -> Result<f64> {
    Ok(Mollifier::new(eps)?.f(x))
}

pub fn f_eps_prime(eps: f64, x: f64) -> Result<f64> {
    Ok(Mollifier::new(eps)?.f_prime(x))
}

#[allow(non_snake_case)]
pub fn F_eps(eps: f64, x: f64) -> Result<f64> {
    Ok(Mollifier::new(eps)?.antiderivative(x))
}

/// Probabilists' Hermite polynomial `He_k(x)`.
pub fn hermite_he(k: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, x);
    if k == 0 {
        return 1.0;
    }
    for j in 1..k {
        let h2 = x * h1 - j as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// `k`-th derivative of the centered Gaussian density of variance `var` at `x`.
pub fn gaussian_density_deriv(k: usize, var: f64, x: f64) -> f64 {
    let sd = var.sqrt();
    let z = x / sd;
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    sign * hermite_he(k, z) * (-0.5 * z * z).exp() * FRAC_1_SQRT_2PI / sd.powi(k as i32 + 1)
}

/// `E[f_eps^{(n+1)}(X)]` for `X ~ N(0, sigma2)`; vanishes when `n+1` is odd.
pub fn gaussian_deriv_moment(n: u32, sigma2: f64, eps: f64) -> Result<f64> {
    if !(sigma2 >= 0.0 && eps >= 0.0) || !(sigma2 + eps > 0.0) {
        return domain(format!(
            "need sigma2 >= 0, eps >= 0 and sigma2 + eps > 0, got {sigma2}, {eps}"
        ));
    }
    let k = n + 1;
    if k % 2 == 1 {
        return Ok(0.0);
    }
    let half = k / 2;
    // (2h)! / (2^h h!) = (2h-1)!!
    let double_fact: f64 = (1..=half).map(|j| (2 * j - 1) as f64).product();
    let sign = if half % 2 == 0 { 1.0 } else { -1.0 };
    let v = sigma2 + eps;
    Ok(sign * FRAC_1_SQRT_2PI * v.powf(-(n as f64) / 2.0 - 1.0) * double_fact)
}

/// Exact mean of the mollified estimator,
/// `int_0^t (t-u) u^{2H-1} f'_{eps+u^{2H}}(y) du`.
///
/// With `v = u^{2H}` the weight `u^{2H-1} du` becomes `dv / 2H` and the
/// integrand is bounded, so one adaptive 1-D rule suffices.
pub fn mean_alpha_eps(hurst: HurstParams, t: f64, eps: f64, y: f64) -> Result<f64> {
    Mollifier::new(eps)?;
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("horizon must be positive, got {t}"));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let two_h = hurst.two_h();
    let inv = 1.0 / two_h;
    let vmax = hurst.pow2h(t);
    let integrand = |v: f64| {
        let s = eps + v;
        let dens = FRAC_1_SQRT_2PI / s.sqrt() * (-0.5 * y * y / s).exp();
        let fp = -y / s * dens;
        (t - v.powf(inv)) * fp
    };
    let scale = (y.abs() / (eps.sqrt() * eps)).max(1.0);
    let r = adaptive_gk15(integrand, 0.0, vmax, 1e-13 * scale, 1e-12, 4000);
    if !r.converged {
        return Err(DsltError::Numerical(format!(
            "mean integral did not converge (err {:e})",
            r.abs_err
        )));
    }
    Ok(r.value * inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn density_examples() {
        assert!((f_eps(1.0, 0.0).unwrap() - 0.3989422804).abs() < 1e-10);
        assert_eq!(f_eps(0.3, 1.7).unwrap(), f_eps(0.3, -1.7).unwrap());
        let v = f_eps(0.25, 0.5).unwrap();
        assert!((v - (-0.5f64).exp() / (2.0 * PI * 0.25).sqrt()).abs() < 1e-15);
        assert!((v - 0.483941).abs() < 1e-6);
        assert!(f_eps(0.0, 1.0).is_err());
        assert!(f_eps(-1.0, 1.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(f_eps_prime(0.7, 0.0).unwrap(), 0.0);
        let v = f_eps_prime(1.0, 1.0).unwrap();
        assert!((v + 0.241971).abs() < 1e-6);
        let h = 1e-6;
        let fd = (f_eps(1.0, 1.0 + h).unwrap() - f_eps(1.0, 1.0 - h).unwrap()) / (2.0 * h);
        assert!(((fd - v) / v).abs() < 1e-6);
        assert_eq!(f_eps_prime(0.2, -0.3).unwrap(), -f_eps_prime(0.2, 0.3).unwrap());
    }

    #[test]
    fn antiderivative_examples() {
        assert_eq!(F_eps(0.4, 0.0).unwrap(), 0.0);
        assert!((F_eps(1.0, 40.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((F_eps(1.0, 1.0).unwrap() - 0.341345).abs() < 1e-6);
        assert!((F_eps(1e-6, 0.5).unwrap() - 0.5).abs() < 1e-12);
        assert!((F_eps(1e-6, -0.5).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn normalization_over_scales() {
        for eps in [1e-4, 1e-3, 1e-2, 0.1, 1.0] {
            let m = Mollifier::new(eps).unwrap();
            let s = 12.0 * eps.sqrt();
            let r = adaptive_gk15(|x| m.f(x), -s, s, 1e-13, 0.0, 1000);
            assert!((r.value - 1.0).abs() < 1e-10, "eps={eps}");
        }
    }

    #[test]
    fn hermite_derivative_matches_closed_forms() {
        let v: f64 = 0.7;
        for x in [-1.3, 0.0, 0.4, 2.1] {
            let f = FRAC_1_SQRT_2PI / v.sqrt() * (-0.5 * x * x / v).exp();
            assert!((gaussian_density_deriv(0, v, x) - f).abs() < 1e-15);
            assert!((gaussian_density_deriv(1, v, x) + x / v * f).abs() < 1e-14);
            let f2 = (x * x / (v * v) - 1.0 / v) * f;
            assert!((gaussian_density_deriv(2, v, x) - f2).abs() < 1e-14);
        }
    }

    #[test]
    fn moment_examples() {
        assert_eq!(gaussian_deriv_moment(0, 0.4, 0.1).unwrap(), 0.0);
        let m1 = gaussian_deriv_moment(1, 1.0, 0.0).unwrap();
        assert!((m1 + 0.398942).abs() < 1e-6);
        let m3 = gaussian_deriv_moment(3, 1.0, 0.0).unwrap();
        assert!((m3 - 1.196827).abs() < 1e-6);
        assert!(gaussian_deriv_moment(1, 0.0, 0.0).is_err());
        for n in 0..8 {
            assert_eq!(
                gaussian_deriv_moment(n, 0.3, 0.2).unwrap(),
                gaussian_deriv_moment(n, 0.5, 0.0).unwrap()
            );
        }
    }

    #[test]
    fn mean_is_odd_in_y() {
        let h = HurstParams::new(0.35).unwrap();
        assert_eq!(mean_alpha_eps(h, 1.0, 0.01, 0.0).unwrap(), 0.0);
        let a = mean_alpha_eps(h, 1.0, 0.01, 0.4).unwrap();
        let b = mean_alpha_eps(h, 1.0, 0.01, -0.4).unwrap();
        assert!((a + b).abs() < 1e-14 * a.abs().max(1.0));
    }

    #[test]
    fn mean_matches_direct_two_dimensional_integral() {
        // nested 1-D rules in (s, u) without the substitution
        for (hv, eps, y) in [(0.5, 0.1, 0.5), (0.3, 0.05, 0.25), (0.6, 0.2, 1.0)] {
            let h = HurstParams::new(hv).unwrap();
            let t = 1.0;
            let direct = adaptive_gk15(
                |s| {
                    adaptive_gk15(
                        |u| {
                            let v = eps + h.pow2h(u);
                            -y / v * (-0.5 * y * y / v).exp() / (2.0 * PI * v).sqrt()
                                * u.powf(h.two_h() - 1.0)
                        },
                        0.0,
                        s,
                        1e-12,
                        1e-11,
                        500,
                    )
                    .value
                },
                0.0,
                t,
                1e-11,
                1e-10,
                500,
            )
            .value;
            let fast = mean_alpha_eps(h, t, eps, y).unwrap();
            assert!((fast - direct).abs() < 1e-8 * direct.abs().max(1.0), "{fast} vs {direct}");
        }
    }
}
