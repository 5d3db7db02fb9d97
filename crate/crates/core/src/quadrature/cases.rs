//! Gap coordinates of the three interleavings of two intervals and a
//! cancellation-free evaluation of `lambda rho - mu^2` in those coordinates.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::covariance::{HurstParams, IntervalPair};
use crate::error::{domain, DsltError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseId {
    /// `r < r' < s < s'`: `a = r'-r`, `b = s-r'`, `c = s'-s`.
    Case1,
    /// `r < r' < s' < s`: `a = r'-r`, `b = s'-r'`, `c = s-s'`.
    Case2,
    /// `r < s < r' < s'`: `a = s-r`, `b = r'-s`, `c = s'-r'`.
    Case3,
}

impl CaseId {
    pub const ALL: [CaseId; 3] = [CaseId::Case1, CaseId::Case2, CaseId::Case3];

    pub fn index(self) -> usize {
        match self {
            CaseId::Case1 => 0,
            CaseId::Case2 => 1,
            CaseId::Case3 => 2,
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseId::Case1 => "case1",
            CaseId::Case2 => "case2",
            CaseId::Case3 => "case3",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseGeometry {
    pub case_id: CaseId,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl CaseGeometry {
    pub fn new(case_id: CaseId, a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && c > 0.0) || !(a + b + c).is_finite() {
            return domain(format!("gaps must be positive and finite, got ({a}, {b}, {c})"));
        }
        Ok(Self { case_id, a, b, c })
    }

    /// The interval pair with `r = offset`.
    pub fn interval_pair(&self, offset: f64) -> IntervalPair {
        let (a, b, c) = (self.a, self.b, self.c);
        let r = offset;
        let (s, rp, sp) = match self.case_id {
            CaseId::Case1 => (r + a + b, r + a, r + a + b + c),
            CaseId::Case2 => (r + a + b + c, r + a, r + a + b),
            CaseId::Case3 => (r + a, r + a + b, r + a + b + c),
        };
        IntervalPair {
            r,
            s,
            r_prime: rp,
            s_prime: sp,
        }
    }

    /// Classify an interval pair, swapping the intervals if `r' < r`.
    /// Returns `None` on the measure-zero boundaries between cases.
    pub fn from_pair(p: &IntervalPair) -> Option<Self> {
        let p = if p.r_prime < p.r { p.swapped() } else { *p };
        let IntervalPair {
            r,
            s,
            r_prime,
            s_prime,
        } = p;
        let g = if s < r_prime {
            (CaseId::Case3, s - r, r_prime - s, s_prime - r_prime)
        } else if s < s_prime {
            (CaseId::Case1, r_prime - r, s - r_prime, s_prime - s)
        } else {
            (CaseId::Case2, r_prime - r, s_prime - r_prime, s - s_prime)
        };
        CaseGeometry::new(g.0, g.1, g.2, g.3).ok()
    }
}

/// Covariance data of a case geometry, with `det = lambda rho - mu^2`
/// evaluated without cancellation and `weight = (s-r)^{2H-1}(s'-r')^{2H-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableCov {
    pub lambda: f64,
    pub rho: f64,
    pub mu: f64,
    pub det: f64,
    pub weight: f64,
}

/// `(b + x)^{2H} - b^{2H}` accurate for `x << b`.
#[inline]
fn incr(h: &HurstParams, b: f64, x: f64) -> f64 {
    if h.is_brownian() {
        return x;
    }
    if b == 0.0 {
        return h.pow2h(x);
    }
    h.pow2h(b) * (h.two_h() * (x / b).ln_1p()).exp_m1()
}

#[inline]
fn pow_p(x: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else {
        x.powf(p)
    }
}

/// The triple and determinant for gaps `(a, b, c)` of the given case.
///
/// In cases 1 and 2 the long increment is split as `X = Y + Z` with `Y` the
/// short one, so `det = rho Var(Z) - Cov(Y, Z)^2` involves only small terms
/// near the collapsing vertex `a, c -> 0`.
pub fn stable_cov(h: &HurstParams, case_id: CaseId, a: f64, b: f64, c: f64) -> StableCov {
    let e = h.two_h() - 1.0;
    let pa = h.pow2h(a);
    let pc = h.pow2h(c);
    // Cov of the increments over the outer gaps a and c separated by b
    let cov_ac = 0.5 * (incr(h, b + a, c) - incr(h, b, c));
    match case_id {
        CaseId::Case1 => {
            let rho = h.pow2h(b + c);
            let var_z = pa + pc - 2.0 * cov_ac;
            let c_yz = 0.5 * (incr(h, b + c, a) - pa) - 0.5 * (incr(h, b, c) + pc);
            StableCov {
                lambda: h.pow2h(a + b),
                rho,
                mu: rho + c_yz,
                det: rho * var_z - c_yz * c_yz,
                weight: pow_p(a + b, e) * pow_p(b + c, e),
            }
        }
        CaseId::Case2 => {
            let rho = h.pow2h(b);
            let var_z = pa + pc + 2.0 * cov_ac;
            let c_yz = 0.5 * (incr(h, b, a) - pa) + 0.5 * (incr(h, b, c) - pc);
            StableCov {
                lambda: h.pow2h(a + b + c),
                rho,
                mu: rho + c_yz,
                det: rho * var_z - c_yz * c_yz,
                weight: pow_p(a + b + c, e) * pow_p(b, e),
            }
        }
        CaseId::Case3 => StableCov {
            lambda: pa,
            rho: pc,
            mu: cov_ac,
            det: pa * pc - cov_ac * cov_ac,
            weight: pow_p(a, e) * pow_p(c, e),
        },
    }
}

impl CaseGeometry {
    pub fn stable_cov(&self, h: &HurstParams) -> StableCov {
        stable_cov(h, self.case_id, self.a, self.b, self.c)
    }
}

/// `mu (s-r)^{2H-1} (s'-r')^{2H-1} / (lambda rho - mu^2)^{3/2}`.
pub fn lab_integrand(h: HurstParams, p: &IntervalPair) -> Result<f64> {
    let g = CaseGeometry::from_pair(p).ok_or_else(|| {
        DsltError::Singular(format!("interval pair {p:?} lies on a case boundary"))
    })?;
    let sc = g.stable_cov(&h);
    if !(sc.det > 1e-14 * sc.lambda * sc.rho) {
        return Err(DsltError::Singular(format!(
            "lambda rho - mu^2 = {:e} is not positive",
            sc.det
        )));
    }
    Ok(sc.weight * sc.mu / (sc.det * sc.det.sqrt()))
}
