//! Cubature on the gap simplex `a + b + c = 1`.
//!
//! Collapsed coordinates `a = xi (1 - eta)`, `c = xi eta`, `b = 1 - xi`
//! (Jacobian `xi`) send the vertex `b = 1` to the edge `xi = 0`. All
//! singular behaviour then sits on the edges of the unit square, where
//! meshes are graded geometrically.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::cases::{stable_cov, CaseId};
use super::gauss::GaussLegendre;
use crate::covariance::HurstParams;

/// Per-case values.
pub type Triple = [f64; 3];

/// `[0, 2^-lo, ..., 1/4, 1/2, 3/4, ..., 1 - 2^-hi, 1]`.
pub fn graded_edges(lo: usize, hi: usize) -> Vec<f64> {
    let mut e = vec![0.0];
    for k in (1..=lo.max(1)).rev() {
        e.push(0.5f64.powi(k as i32));
    }
    for k in 2..=hi.max(1) {
        e.push(1.0 - 0.5f64.powi(k as i32));
    }
    e.push(1.0);
    e.dedup();
    e
}

/// Gaps `(a, b, c)` at collapsed coordinates `(xi, eta)`.
#[inline]
pub fn collapsed_point(xi: f64, eta: f64) -> (f64, f64, f64) {
    (xi * (1.0 - eta), 1.0 - xi, xi * eta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    fn quarters(&self) -> [Rect; 4] {
        let xm = 0.5 * (self.x0 + self.x1);
        let ym = 0.5 * (self.y0 + self.y1);
        [
            Rect { x0: self.x0, x1: xm, y0: self.y0, y1: ym },
            Rect { x0: xm, x1: self.x1, y0: self.y0, y1: ym },
            Rect { x0: self.x0, x1: xm, y0: ym, y1: self.y1 },
            Rect { x0: xm, x1: self.x1, y0: ym, y1: self.y1 },
        ]
    }
}

/// Tensor-product rule value of `f` on a rectangle, with the integrals of
/// the positive and negative parts.
fn eval_rect<F: Fn(f64, f64) -> Triple>(f: &F, gl: &GaussLegendre, r: &Rect) -> (Triple, f64, f64) {
    let mut v = [0.0; 3];
    let (mut pos, mut neg) = (0.0, 0.0);
    for (x, wx) in gl.mapped(r.x0, r.x1) {
        for (y, wy) in gl.mapped(r.y0, r.y1) {
            let w = wx * wy;
            let p = f(x, y);
            for (acc, val) in v.iter_mut().zip(p) {
                let q = w * val;
                *acc += q;
                if q >= 0.0 {
                    pos += q;
                } else {
                    neg += q;
                }
            }
        }
    }
    (v, pos, neg)
}

struct Cell {
    rect: Rect,
    children: [Triple; 4],
    child_pos: [f64; 4],
    child_neg: [f64; 4],
    err: f64,
    seq: u64,
}

impl Cell {
    fn new<F: Fn(f64, f64) -> Triple>(f: &F, gl: &GaussLegendre, rect: Rect, coarse: Triple, seq: u64) -> Self {
        let mut children = [[0.0; 3]; 4];
        let mut child_pos = [0.0; 4];
        let mut child_neg = [0.0; 4];
        for (i, q) in rect.quarters().iter().enumerate() {
            let (v, p, n) = eval_rect(f, gl, q);
            children[i] = v;
            child_pos[i] = p;
            child_neg[i] = n;
        }
        let err = (0..3)
            .map(|c| (children.iter().map(|ch| ch[c]).sum::<f64>() - coarse[c]).abs())
            .sum();
        Cell {
            rect,
            children,
            child_pos,
            child_neg,
            err,
            seq,
        }
    }

    fn value(&self) -> Triple {
        let mut v = [0.0; 3];
        for ch in &self.children {
            for c in 0..3 {
                v[c] += ch[c];
            }
        }
        v
    }
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Outcome of an adaptive cell integration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellSum {
    pub per_case: Triple,
    pub err: f64,
    pub cells: usize,
    pub positive: f64,
    pub negative: f64,
}

impl CellSum {
    pub fn total(&self) -> f64 {
        self.per_case.iter().sum()
    }

    pub fn add(&mut self, o: &CellSum) {
        for c in 0..3 {
            self.per_case[c] += o.per_case[c];
        }
        self.err += o.err;
        self.cells += o.cells;
        self.positive += o.positive;
        self.negative += o.negative;
    }
}

/// Adaptive integration over a union of rectangles. Each cell is estimated
/// by its four quarters and the error by the difference to the whole-cell
/// rule; the worst cell is split until the summed error meets
/// `max(tol, rel_tol * |value|)` or the cell budget runs out. Processing order is fixed, so results are
/// reproducible bit for bit.
pub fn adaptive_cells<F: Fn(f64, f64) -> Triple>(
    f: &F,
    gl: &GaussLegendre,
    rects: &[Rect],
    tol: f64,
    rel_tol: f64,
    max_cells: usize,
) -> CellSum {
    let mut seq = 0u64;
    let mut heap = BinaryHeap::with_capacity(rects.len() * 2);
    let mut total_err = 0.0;
    let mut total = 0.0;
    for r in rects {
        let (coarse, _, _) = eval_rect(f, gl, r);
        let cell = Cell::new(f, gl, *r, coarse, seq);
        seq += 1;
        total_err += cell.err;
        total += cell.value().iter().sum::<f64>();
        heap.push(cell);
    }
    while total_err > tol.max(rel_tol * total.abs()) && heap.len() + 3 <= max_cells {
        let worst = match heap.pop() {
            Some(c) => c,
            None => break,
        };
        total_err -= worst.err;
        total -= worst.value().iter().sum::<f64>();
        for (i, q) in worst.rect.quarters().iter().enumerate() {
            let cell = Cell::new(f, gl, *q, worst.children[i], seq);
            seq += 1;
            total_err += cell.err;
            total += cell.value().iter().sum::<f64>();
            heap.push(cell);
        }
    }
    let mut cells = heap.into_vec();
    cells.sort_by_key(|c| c.seq);
    let mut out = CellSum {
        cells: cells.len(),
        ..CellSum::default()
    };
    for c in &cells {
        let v = c.value();
        for k in 0..3 {
            out.per_case[k] += v[k];
        }
        out.err += c.err;
        out.positive += c.child_pos.iter().sum::<f64>();
        out.negative += c.child_neg.iter().sum::<f64>();
    }
    out
}

/// Tensor cells `[x-edges] x [y-edges]`.
pub fn tensor_rects(xs: &[f64], ys: &[f64]) -> Vec<Rect> {
    let mut out = Vec::with_capacity((xs.len() - 1) * (ys.len() - 1));
    for xw in xs.windows(2) {
        for yw in ys.windows(2) {
            out.push(Rect {
                x0: xw[0],
                x1: xw[1],
                y0: yw[0],
                y1: yw[1],
            });
        }
    }
    out
}

/// Covariance data of one node of a fixed simplex rule, per case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeCov {
    pub lambda: f64,
    pub rho: f64,
    pub mu: f64,
    pub det: f64,
    /// quadrature weight times Jacobian times `(s-r)^{2H-1}(s'-r')^{2H-1}`
    pub weight: f64,
}

/// A fixed graded tensor rule on the collapsed square with the covariance
/// data precomputed at every node (for `a + b + c = 1`).
#[derive(Debug, Clone)]
pub struct SimplexRule {
    pub nodes: [Vec<NodeCov>; 3],
}

impl SimplexRule {
    /// `gl_points` nodes per cell; `xi` graded to `2^-xi_depth` at the vertex.
    pub fn new(h: &HurstParams, gl_points: usize, xi_depth: usize, edge_depth: usize) -> Self {
        let gl = GaussLegendre::new(gl_points);
        let xs = graded_edges(xi_depth, edge_depth);
        let ys = graded_edges(edge_depth, edge_depth);
        let mut nodes: [Vec<NodeCov>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for xw in xs.windows(2) {
            for (xi, wx) in gl.mapped(xw[0], xw[1]) {
                for yw in ys.windows(2) {
                    for (eta, wy) in gl.mapped(yw[0], yw[1]) {
                        let (a, b, c) = collapsed_point(xi, eta);
                        let w = wx * wy * xi;
                        for case in CaseId::ALL {
                            let sc = stable_cov(h, case, a, b, c);
                            if sc.det > 0.0 && sc.lambda > 0.0 && sc.rho > 0.0 {
                                nodes[case.index()].push(NodeCov {
                                    lambda: sc.lambda,
                                    rho: sc.rho,
                                    mu: sc.mu,
                                    det: sc.det,
                                    weight: w * sc.weight,
                                });
                            }
                        }
                    }
                }
            }
        }
        Self { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
