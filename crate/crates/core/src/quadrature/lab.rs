//! The four-dimensional second-moment integral
//! `(1/2pi) int mu (s-r)^{2H-1}(s'-r')^{2H-1} / (lambda rho - mu^2)^{3/2}`
//! over pairs of intervals in `[0, t]`.
//!
//! The integrand is homogeneous of degree `-2` in the gaps `(a, b, c)`, so
//! the offset of the first interval and the gap scale `a + b + c` integrate
//! out exactly, leaving `t^2/(2pi) sum_cases J_case` with `J_case` an
//! integral over the gap simplex. The only non-integrable-looking point is
//! the vertex `b = 1` of cases 1 and 2, where the integrand behaves like
//! `(a^{2H} + c^{2H})^{-3/2}`; in collapsed coordinates that is
//! `xi^{1-3H} ((1-eta)^{2H} + eta^{2H})^{-3/2}`, integrable iff `H < 2/3`.
//!
//! Refinement levels push the graded mesh toward the vertex, doubling the
//! number of geometric layers each time. Below the current depth `delta`
//! the leading-order vertex term is integrated in closed form when it is
//! finite; otherwise the partial values are reported as they are.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::cases::{stable_cov, CaseId};
use super::gauss::{adaptive_gk15, GaussLegendre};
use super::simplex::{adaptive_cells, collapsed_point, graded_edges, tensor_rects, CellSum, Rect, SimplexRule};
use super::QuadResult;
use crate::covariance::HurstParams;
use crate::error::{domain, DsltError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormOptions {
    /// Gauss–Legendre points per direction in each cell.
    pub gl_points: usize,
    /// Geometric layers toward the edges `eta = 0, 1` and `xi = 1`.
    pub edge_depth: usize,
    /// Vertex layers at level 0; level `l` uses `base_depth * 2^l`.
    pub base_depth: usize,
    pub max_levels: usize,
    /// Case 3 has no vertex singularity and is always integrated this deep.
    pub min_depth: usize,
    pub max_cells_per_strip: usize,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            gl_points: 8,
            edge_depth: 30,
            base_depth: 8,
            max_levels: 6,
            min_depth: 64,
            max_cells_per_strip: 20_000,
        }
    }
}

/// One refinement level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelValue {
    /// Vertex layers resolved by the mesh (`delta = 2^-depth`).
    pub depth: usize,
    /// Closed-form vertex remainder, absent when it diverges.
    pub tail: Option<f64>,
    pub value: f64,
    pub quad_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormIntegral {
    pub quad: QuadResult,
    pub levels: Vec<LevelValue>,
    /// Contribution of each case at the final level (vertex remainder split evenly over cases 1, 2).
    pub per_case: [f64; 3],
    pub positive: f64,
    pub negative: f64,
    /// Four successive levels each increased the value by more than `tol`.
    pub diverging: bool,
}

/// `int_0^1 ((1-eta)^{2H} + eta^{2H})^{-3/2} d eta`.
pub fn vertex_profile_integral(h: &HurstParams) -> f64 {
    adaptive_gk15(
        |e| {
            let s = h.pow2h(1.0 - e) + h.pow2h(e);
            1.0 / (s * s.sqrt())
        },
        0.0,
        1.0,
        1e-14,
        1e-13,
        2000,
    )
    .value
}

/// Leading-order vertex contribution of cases 1 and 2 (together) over
/// `xi < delta`, or `None` when it is infinite (`H >= 2/3`).
pub fn vertex_tail(h: &HurstParams, delta: f64) -> Option<f64> {
    let p = 2.0 - 3.0 * h.h();
    if p <= 0.0 {
        return None;
    }
    Some(2.0 * vertex_profile_integral(h) * delta.powf(p) / p)
}

/// Per-case simplex integrand in collapsed coordinates, Jacobian included.
pub fn simplex_integrand(h: &HurstParams, xi: f64, eta: f64) -> [f64; 3] {
    let (a, b, c) = collapsed_point(xi, eta);
    let mut out = [0.0; 3];
    for case in CaseId::ALL {
        let sc = stable_cov(h, case, a, b, c);
        if sc.det > 0.0 {
            out[case.index()] = xi * sc.weight * sc.mu / (sc.det * sc.det.sqrt());
        }
    }
    out
}

struct Strips<'a> {
    h: HurstParams,
    gl: GaussLegendre,
    etas: Vec<f64>,
    opts: &'a NormOptions,
    tol: f64,
    /// `strips[k-1]` covers `xi in [2^{-k-1}, 2^{-k}]`.
    strips: Vec<CellSum>,
}

impl Strips<'_> {
    fn ensure(&mut self, depth: usize) {
        while self.strips.len() + 1 < depth {
            let k = self.strips.len() + 1;
            let rect = Rect {
                x0: 0.5f64.powi(k as i32 + 1),
                x1: 0.5f64.powi(k as i32),
                y0: 0.0,
                y1: 1.0,
            };
            let rects = tensor_rects(&[rect.x0, rect.x1], &self.etas);
            let h = self.h;
            let f = |x: f64, y: f64| simplex_integrand(&h, x, y);
            self.strips.push(adaptive_cells(
                &f,
                &self.gl,
                &rects,
                self.tol,
                1e-9,
                self.opts.max_cells_per_strip,
            ));
        }
    }
}

pub fn chaos_norm_integral(h: HurstParams, t: f64, tol: f64) -> Result<NormIntegral> {
    chaos_norm_integral_with(h, t, tol, &NormOptions::default())
}

/// `(1/2pi) int lab_integrand` over pairs of intervals in `[0, t]`.
pub fn chaos_norm_integral_with(h: HurstParams, t: f64, tol: f64, opts: &NormOptions) -> Result<NormIntegral> {
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("horizon must be positive, got {t}"));
    }
    if !(tol > 0.0) {
        return domain(format!("tolerance must be positive, got {tol}"));
    }
    if opts.base_depth < 2 || opts.max_levels < 1 {
        return domain("need base_depth >= 2 and at least one level");
    }
    let scale = t * t / (2.0 * PI);
    let raw_tol = tol / scale;
    let gl = GaussLegendre::new(opts.gl_points);
    let etas = graded_edges(opts.edge_depth, opts.edge_depth);

    // xi in [1/2, 1], graded toward b = 0
    let mut xs = vec![0.5];
    xs.extend(graded_edges(1, opts.edge_depth).into_iter().filter(|&x| x > 0.5));
    let top_rects = tensor_rects(&xs, &etas);
    let f = |x: f64, y: f64| simplex_integrand(&h, x, y);
    let top = adaptive_cells(&f, &gl, &top_rects, 1e-2 * raw_tol, 1e-10, 50 * opts.max_cells_per_strip);

    let mut strips = Strips {
        h,
        gl,
        etas,
        opts,
        tol: 1e-3 * raw_tol,
        strips: Vec::new(),
    };

    let mut levels: Vec<LevelValue> = Vec::new();
    let mut diverging = false;
    let mut converged = false;
    let mut last_sum = CellSum::default();
    let mut last_tail = 0.0;
    for level in 0..opts.max_levels {
        let depth = opts.base_depth << level;
        let deep = depth.max(opts.min_depth);
        strips.ensure(deep);
        let mut sum = top;
        for (i, s) in strips.strips.iter().enumerate() {
            let k = i + 1;
            if k < depth {
                sum.add(s);
            } else {
                // below the vertex cut only case 3 is integrated directly
                sum.per_case[2] += s.per_case[2];
                sum.err += s.err;
            }
        }
        let tail = vertex_tail(&h, 0.5f64.powi(depth as i32));
        let raw = sum.total() + tail.unwrap_or(0.0);
        levels.push(LevelValue {
            depth,
            tail: tail.map(|v| v * scale),
            value: raw * scale,
            quad_err: sum.err * scale,
        });
        last_sum = sum;
        last_tail = tail.unwrap_or(0.0);

        let n = levels.len();
        let diffs: Vec<f64> = levels.windows(2).map(|w| w[1].value - w[0].value).collect();
        if n >= 3
            && diffs[n - 2].abs() <= tol
            && diffs[n - 3].abs() <= tol
            && levels[n - 1].quad_err <= tol
        {
            converged = true;
            break;
        }
        if n >= 5 && diffs[n - 5..].iter().all(|&d| d > tol) {
            diverging = true;
            break;
        }
    }
    let last = *levels.last().ok_or_else(|| DsltError::Numerical("no levels computed".into()))?;
    let step = if levels.len() >= 2 {
        (levels[levels.len() - 1].value - levels[levels.len() - 2].value).abs()
    } else {
        f64::INFINITY
    };
    let cells = top.cells + strips.strips.iter().map(|s| s.cells).sum::<usize>();
    let mut per_case = last_sum.per_case;
    per_case[0] += 0.5 * last_tail;
    per_case[1] += 0.5 * last_tail;
    Ok(NormIntegral {
        quad: QuadResult {
            value: last.value,
            abs_err: last.quad_err + step,
            cells,
            converged,
        },
        levels,
        per_case: per_case.map(|v| v * scale),
        positive: (last_sum.positive + last_tail.max(0.0)) * scale,
        negative: last_sum.negative * scale,
        diverging,
    })
}

/// `E[alpha'_{t,eps}(0)^2] = (1/2pi) int w mu / ((lambda+eps)(rho+eps) - mu^2)^{3/2}`.
///
/// For `eps > 0` the gap scale no longer factors out; it is integrated with
/// a geometric rule in `sigma = a + b + c` over fixed simplex rules. The error
/// estimate compares two simplex rules of different order.
pub fn second_moment_integral(h: HurstParams, t: f64, eps: f64) -> Result<QuadResult> {
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("horizon must be positive, got {t}"));
    }
    if eps == 0.0 {
        return Ok(chaos_norm_integral(h, t, 1e-6)?.quad);
    }
    if !(eps > 0.0) {
        return domain(format!("mollifier scale must be positive, got {eps}"));
    }
    let fine = SimplexRule::new(&h, 8, 40, 30);
    let coarse = SimplexRule::new(&h, 6, 40, 30);
    let v1 = sigma_integral(&h, t, eps, &fine);
    let v0 = sigma_integral(&h, t, eps, &coarse);
    let err = (v1 - v0).abs();
    Ok(QuadResult {
        value: v1,
        abs_err: err,
        cells: fine.len(),
        converged: err <= 1e-6 * v1.abs().max(1e-12),
    })
}

fn sigma_integral(h: &HurstParams, t: f64, eps: f64, rule: &SimplexRule) -> f64 {
    let gl = GaussLegendre::new(8);
    let two_h = h.two_h();
    let mut total = 0.0;
    for k in 0..48 {
        let hi = t * 0.5f64.powi(k);
        let lo = 0.5 * hi;
        for (sigma, ws) in gl.mapped(lo, hi) {
            let s2h = sigma.powf(two_h);
            let s4h = s2h * s2h;
            let e2 = eps * eps;
            let mut inner = 0.0;
            for nodes in &rule.nodes {
                for nd in nodes {
                    let d = nd.det * s4h + eps * s2h * (nd.lambda + nd.rho) + e2;
                    inner += nd.weight * nd.mu / (d * d.sqrt());
                }
            }
            // (t - sigma) sigma^2 from the offset and the radial Jacobian,
            // sigma^{4H-2} from the weight and sigma^{2H} from mu
            total += ws * (t - sigma) * s4h * s2h * inner;
        }
    }
    total / PI
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(h: f64) -> HurstParams {
        HurstParams::new(h).unwrap()
    }

    #[test]
    fn brownian_value_is_five_sixths() {
        let r = chaos_norm_integral(hp(0.5), 1.0, 1e-6).unwrap();
        assert!(r.quad.converged, "{:?}", r.levels);
        assert!((r.quad.value - 5.0 / 6.0).abs() < 1e-6, "{}", r.quad.value);
        // closed forms of the three case integrals
        assert!((r.per_case[0] - 1.0 / 3.0).abs() < 1e-6);
        assert!((r.per_case[1] - 0.5).abs() < 1e-6);
        assert!(r.per_case[2].abs() < 1e-10);
    }

    #[test]
    fn value_scales_as_t_squared() {
        let v1 = chaos_norm_integral(hp(0.4), 1.0, 1e-5).unwrap().quad.value;
        let v2 = chaos_norm_integral(hp(0.4), 2.0, 1e-5).unwrap().quad.value;
        assert!((v2 / v1 - 4.0).abs() < 1e-6);
    }

    #[test]
    fn vertex_profile_at_half() {
        // int_0^1 d eta = 1 at H = 1/2 since (1-eta) + eta = 1
        assert!((vertex_profile_integral(&hp(0.5)) - 1.0).abs() < 1e-13);
        assert!(vertex_tail(&hp(0.7), 0.01).is_none());
    }

    #[test]
    fn mollified_moment_increases_toward_the_limit() {
        let h = hp(0.5);
        let q1 = second_moment_integral(h, 1.0, 0.05).unwrap();
        let q2 = second_moment_integral(h, 1.0, 0.01).unwrap();
        assert!(q1.value < q2.value && q2.value < 5.0 / 6.0);
        assert!(q1.abs_err < 1e-5 && q2.abs_err < 1e-5);
    }
}
