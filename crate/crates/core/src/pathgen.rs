//! Exact simulation of fBm on uniform grids.
//!
//! Two samplers share one distributional contract: a dense Cholesky factor of
//! the covariance matrix (reference, small `n`) and Davies–Harte circulant
//! embedding of fractional Gaussian noise (fast, large `n`).

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::covariance::{increment_cov_matrix, HurstParams};
use crate::error::{domain, DsltError, Result};
use crate::rng::substream;

/// Largest step count accepted by the Cholesky sampler.
pub const CHOLESKY_MAX_STEPS: usize = 4096;

/// Relative tolerance below which negative circulant eigenvalues are clamped to zero.
pub const CIRCULANT_CLAMP_TOL: f64 = 1e-10;

/// Uniform grid `t_i = i * t_max / n`, `i = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_max: f64,
    n: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, n: usize) -> Result<Self> {
        if n < 1 {
            return domain("grid needs at least one step");
        }
        if !(t_max.is_finite() && t_max > 0.0) {
            return domain(format!("grid horizon must be positive, got {t_max}"));
        }
        Ok(Self { t_max, n })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n as f64
    }

    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        self.t_max * i as f64 / self.n as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.point(i)).collect()
    }

    /// Index of grid point `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.dt();
        let k = x.round();
        if k < 0.0 || k > self.n as f64 || (x - k).abs() > 1e-9 * (1.0 + k) {
            None
        } else {
            Some(k as usize)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMethod {
    Cholesky,
    Circulant,
}

impl fmt::Display for SamplerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerMethod::Cholesky => f.write_str("cholesky"),
            SamplerMethod::Circulant => f.write_str("circulant"),
        }
    }
}

impl std::str::FromStr for SamplerMethod {
    type Err = DsltError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cholesky" => Ok(SamplerMethod::Cholesky),
            "circulant" => Ok(SamplerMethod::Circulant),
            other => Err(DsltError::Parse(format!("unknown sampler method '{other}'"))),
        }
    }
}

/// A sampled fBm path with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub hurst: HurstParams,
    pub seed: u64,
    pub stream: u64,
    pub method: SamplerMethod,
}

impl FbmPath {
    /// Wrap externally supplied values (e.g. a deterministic test path).
    pub fn from_values(
        hurst: HurstParams,
        grid: TimeGrid,
        values: Vec<f64>,
        method: SamplerMethod,
    ) -> Result<Self> {
        if values.len() != grid.steps() + 1 {
            return domain(format!(
                "path has {} values but grid has {} points",
                values.len(),
                grid.steps() + 1
            ));
        }
        if values[0] != 0.0 || values.iter().any(|v| !v.is_finite()) {
            return domain("path must start at 0 and be finite");
        }
        Ok(Self {
            grid,
            values,
            hurst,
            seed: 0,
            stream: 0,
            method,
        })
    }

    /// Value at time `t`, which must be a grid point.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.grid.index_of(t).map(|i| self.values[i])
    }

    /// Keep every `factor`-th point. For H = 1/2 this is an exact coarser path.
    pub fn decimate(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.grid.steps() % factor != 0 {
            return domain(format!(
                "decimation factor {factor} must divide {}",
                self.grid.steps()
            ));
        }
        Ok(Self {
            grid: TimeGrid::new(self.grid.t_max(), self.grid.steps() / factor)?,
            values: self.values.iter().step_by(factor).copied().collect(),
            ..self.clone()
        })
    }

    /// Write the path as CSV with header `t,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.grid.point(i), v)?;
        }
        Ok(())
    }
}

/// Reusable sampler for one `(hurst, grid, method)` triple.
pub trait PathSampler: Send + Sync {
    fn hurst(&self) -> HurstParams;
    fn grid(&self) -> TimeGrid;
    fn method(&self) -> SamplerMethod;

    /// Fill `out[1..=n]` with path values drawn from `rng`; `out[0] = 0`.
    fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64])
    where
        Self: Sized;

    /// Path from substream `stream` of `seed`.
    fn sample_stream(&self, seed: u64, stream: u64) -> FbmPath
    where
        Self: Sized,
    {
        let grid = self.grid();
        let mut values = vec![0.0; grid.steps() + 1];
        let mut rng = substream(seed, stream);
        self.fill(&mut rng, &mut values);
        FbmPath {
            grid,
            values,
            hurst: self.hurst(),
            seed,
            stream,
            method: self.method(),
        }
    }
}

/// Lower-triangular Cholesky factor of the covariance at `t_1..t_n`.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    hurst: HurstParams,
    grid: TimeGrid,
    factor: Vec<f64>,
}

/// In-place Cholesky factorization of a dense SPD matrix (row-major).
/// Returns the lower factor; the failing pivot index is reported on error.
pub fn cholesky(mut a: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) {
            return Err(DsltError::Factorization { pivot: j, value: d });
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / d;
        }
        for k in (j + 1)..n {
            a[j * n + k] = 0.0;
        }
    }
    Ok(a)
}

impl CholeskySampler {
    pub fn new(hurst: HurstParams, grid: TimeGrid) -> Result<Self> {
        Self::with_cap(hurst, grid, CHOLESKY_MAX_STEPS)
    }

    pub fn with_cap(hurst: HurstParams, grid: TimeGrid, cap: usize) -> Result<Self> {
        let n = grid.steps();
        if n > cap {
            return domain(format!("cholesky sampler capped at {cap} steps, got {n}"));
        }
        let times: Vec<f64> = (1..=n).map(|i| grid.point(i)).collect();
        let cov = increment_cov_matrix(hurst, &times)?;
        let factor = cholesky(cov, n)?;
        Ok(Self {
            hurst,
            grid,
            factor,
        })
    }
}

impl PathSampler for CholeskySampler {
    fn hurst(&self) -> HurstParams {
        self.hurst
    }

    fn grid(&self) -> TimeGrid {
        self.grid
    }

    fn method(&self) -> SamplerMethod {
        SamplerMethod::Cholesky
    }

    fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.grid.steps();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        out[0] = 0.0;
        for i in 0..n {
            let row = &self.factor[i * n..i * n + i + 1];
            out[i + 1] = row.iter().zip(&z).map(|(l, z)| l * z).sum();
        }
    }
}

/// Davies–Harte sampler: fGn via a circulant embedding of size `2n`.
#[derive(Clone)]
pub struct CirculantSampler {
    hurst: HurstParams,
    grid: TimeGrid,
    sqrt_eig: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("hurst", &self.hurst)
            .field("grid", &self.grid)
            .finish()
    }
}

/// Autocovariance of unit-spacing fractional Gaussian noise at lag `k`.
pub fn fgn_autocov(hurst: HurstParams, k: usize) -> f64 {
    let k = k as f64;
    0.5 * (hurst.pow2h(k + 1.0) - 2.0 * hurst.pow2h(k) + hurst.pow2h(k - 1.0))
}

impl CirculantSampler {
    pub fn new(hurst: HurstParams, grid: TimeGrid) -> Result<Self> {
        let n = grid.steps();
        if n < 2 {
            return domain("circulant sampler needs at least 2 steps");
        }
        let m = 2 * n;
        let scale = hurst.pow2h(grid.dt());
        let mut row = vec![Complex::new(0.0, 0.0); m];
        for k in 0..=n {
            row[k].re = scale * fgn_autocov(hurst, k);
        }
        for k in 1..n {
            row[m - k].re = row[k].re;
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut row);
        let max = row.iter().map(|c| c.re).fold(f64::MIN, f64::max);
        let mut sqrt_eig = Vec::with_capacity(m);
        for (index, c) in row.iter().enumerate() {
            let mut e = c.re;
            if e < 0.0 {
                if -e > CIRCULANT_CLAMP_TOL * max {
                    return Err(DsltError::Embedding {
                        index,
                        eigenvalue: e,
                    });
                }
                e = 0.0;
            }
            sqrt_eig.push((e / m as f64).sqrt());
        }
        Ok(Self {
            hurst,
            grid,
            sqrt_eig,
            fft,
        })
    }
}

impl PathSampler for CirculantSampler {
    fn hurst(&self) -> HurstParams {
        self.hurst
    }

    fn grid(&self) -> TimeGrid {
        self.grid
    }

    fn method(&self) -> SamplerMethod {
        SamplerMethod::Circulant
    }

    fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.grid.steps();
        let mut w: Vec<Complex<f64>> = self
            .sqrt_eig
            .iter()
            .map(|s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(s * re, s * im)
            })
            .collect();
        self.fft.process(&mut w);
        out[0] = 0.0;
        let mut acc = 0.0;
        for i in 0..n {
            acc += w[i].re;
            out[i + 1] = acc;
        }
    }
}

/// Either sampler behind one type, selected at run time.
#[derive(Debug, Clone)]
pub enum Sampler {
    Cholesky(CholeskySampler),
    Circulant(CirculantSampler),
}

impl Sampler {
    pub fn new(hurst: HurstParams, grid: TimeGrid, method: SamplerMethod) -> Result<Self> {
        Ok(match method {
            SamplerMethod::Cholesky => Sampler::Cholesky(CholeskySampler::new(hurst, grid)?),
            SamplerMethod::Circulant => Sampler::Circulant(CirculantSampler::new(hurst, grid)?),
        })
    }
}

impl PathSampler for Sampler {
    fn hurst(&self) -> HurstParams {
        match self {
            Sampler::Cholesky(s) => s.hurst(),
            Sampler::Circulant(s) => s.hurst(),
        }
    }

    fn grid(&self) -> TimeGrid {
        match self {
            Sampler::Cholesky(s) => s.grid(),
            Sampler::Circulant(s) => s.grid(),
        }
    }

    fn method(&self) -> SamplerMethod {
        match self {
            Sampler::Cholesky(_) => SamplerMethod::Cholesky,
            Sampler::Circulant(_) => SamplerMethod::Circulant,
        }
    }

    fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Sampler::Cholesky(s) => s.fill(rng, out),
            Sampler::Circulant(s) => s.fill(rng, out),
        }
    }
}

/// One exact Cholesky path from substream 0 of `seed`.
pub fn sample_cholesky(hurst: HurstParams, grid: TimeGrid, seed: u64) -> Result<FbmPath> {
    Ok(CholeskySampler::new(hurst, grid)?.sample_stream(seed, 0))
}

/// One circulant-embedding path from substream 0 of `seed`.
pub fn sample_circulant(hurst: HurstParams, grid: TimeGrid, seed: u64) -> Result<FbmPath> {
    Ok(CirculantSampler::new(hurst, grid)?.sample_stream(seed, 0))
}

/// Deterministic stream of `count` paths; path `k` uses substream `k` of `base_seed`.
pub struct PathStream<S: PathSampler> {
    sampler: S,
    base_seed: u64,
    next: u64,
    count: u64,
}

impl<S: PathSampler> PathStream<S> {
    /// Random access to path `k` regardless of iteration state.
    pub fn path(&self, k: u64) -> FbmPath {
        self.sampler.sample_stream(self.base_seed, k)
    }

    pub fn sampler(&self) -> &S {
        &self.sampler
    }
}

impl<S: PathSampler> Iterator for PathStream<S> {
    type Item = FbmPath;

    fn next(&mut self) -> Option<FbmPath> {
        if self.next >= self.count {
            return None;
        }
        let p = self.path(self.next);
        self.next += 1;
        Some(p)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.count - self.next) as usize;
        (left, Some(left))
    }
}

pub fn path_stream(
    hurst: HurstParams,
    grid: TimeGrid,
    base_seed: u64,
    count: u64,
    method: SamplerMethod,
) -> Result<PathStream<Sampler>> {
    if count < 1 {
        return domain("path stream needs count >= 1");
    }
    Ok(PathStream {
        sampler: Sampler::new(hurst, grid, method)?,
        base_seed,
        next: 0,
        count,
    })
}
