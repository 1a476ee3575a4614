//! Coverage-boundary detection with a soft-margin kernel SVM.
//!
//! Grids are first labeled by thresholding the recovered matrix. A
//! subsample of labeled grid centers then trains a C-SVM whose dual is
//! solved by sequential minimal optimization with maximal-violating-pair
//! selection. Locations are mapped into the unit square before any
//! kernel evaluation and the model keeps that mapping.

use std::fmt;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Coverage, CoverageLabelGrid, GridSpec};
use crate::matrix::SpectrumMatrix;
use crate::radio::Location;

pub const DEFAULT_C: f64 = 10.0;
pub const DEFAULT_SUBSAMPLE: usize = 2000;
pub const DEFAULT_TOL: f64 = 1e-3;
/// Chebyshev radius, in cells, of the band around label transitions
/// that the training subsample keeps preferentially.
pub const TRANSITION_BAND: usize = 3;

const MODEL_MAGIC: &str = "tvws-svm";
const MODEL_VERSION: u32 = 1;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    /// `(⟨a, b⟩ + c)^degree`
    Polynomial { c: f64, degree: u32 },
    /// `exp(−‖a − b‖² / 2σ²)`; `sigma = 0` asks for the median
    /// pairwise distance of the training set.
    Rbf { sigma: f64 },
}

impl KernelSpec {
    pub fn quadratic() -> Self {
        KernelSpec::Polynomial { c: 1.0, degree: 2 }
    }

    pub fn rbf_auto() -> Self {
        KernelSpec::Rbf { sigma: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            KernelSpec::Linear => true,
            KernelSpec::Polynomial { c, degree } => c >= 0.0 && c.is_finite() && degree >= 1,
            KernelSpec::Rbf { sigma } => sigma >= 0.0 && sigma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid kernel {self:?}")))
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => f.write_str("linear"),
            KernelSpec::Polynomial { c, degree } => write!(f, "poly {c} {degree}"),
            KernelSpec::Rbf { sigma } => write!(f, "rbf {sigma}"),
        }
    }
}

impl std::str::FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let bad = || Error::Format(format!("bad kernel spec {s:?}"));
        let k = match parts.as_slice() {
            ["linear"] => KernelSpec::Linear,
            ["poly"] | ["quadratic"] => KernelSpec::quadratic(),
            ["rbf"] => KernelSpec::rbf_auto(),
            ["poly", c, d] => KernelSpec::Polynomial {
                c: c.parse().map_err(|_| bad())?,
                degree: d.parse().map_err(|_| bad())?,
            },
            ["rbf", sigma] => KernelSpec::Rbf {
                sigma: sigma.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        k.validate()?;
        Ok(k)
    }
}

pub fn kernel_eval(a: &Location, b: &Location, k: &KernelSpec) -> f64 {
    match *k {
        KernelSpec::Linear => a.x * b.x + a.y * b.y,
        KernelSpec::Polynomial { c, degree } => (a.x * b.x + a.y * b.y + c).powi(degree as i32),
        KernelSpec::Rbf { sigma } => {
            let d2 = (a.x - b.x).powi(2) + (a.y - b.y).powi(2);
            (-d2 / (2.0 * sigma * sigma)).exp()
        }
    }
}

/// Affine map `loc ↦ (loc − origin) / scale` into the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub origin: Location,
    pub scale: f64,
}

impl Normalization {
    pub fn identity() -> Self {
        Normalization {
            origin: Location::new(0.0, 0.0),
            scale: 1.0,
        }
    }

    pub fn for_grid(grid: &GridSpec) -> Self {
        Normalization {
            origin: grid.origin,
            scale: grid.width_km().max(grid.height_km()),
        }
    }

    /// Bounding box of `points`, scaled by its longer side.
    pub fn for_points(points: &[Location]) -> Self {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        let scale = (x1 - x0).max(y1 - y0);
        if points.is_empty() || !(scale > 0.0) {
            return Normalization::identity();
        }
        Normalization {
            origin: Location::new(x0, y0),
            scale,
        }
    }

    pub fn apply(&self, loc: &Location) -> Location {
        Location::new((loc.x - self.origin.x) / self.scale, (loc.y - self.origin.y) / self.scale)
    }
}

/// Trained decision function `f(l) = Σ αᵢhᵢk(l, lᵢ) + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryModel {
    pub support_locs: Vec<Location>,
    pub alphas: Vec<f64>,
    pub labels: Vec<f64>,
    pub bias: f64,
    /// Kernel with any data-driven parameter resolved.
    pub kernel: KernelSpec,
    pub c_reg: f64,
    pub norm: Normalization,
    pub converged: bool,
    /// `m(α) − M(α)` at termination.
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl BoundaryModel {
    /// Model that declares every location the same class.
    pub fn constant(class: Coverage) -> Self {
        BoundaryModel {
            support_locs: Vec::new(),
            alphas: Vec::new(),
            labels: Vec::new(),
            bias: class.sign(),
            kernel: KernelSpec::Linear,
            c_reg: DEFAULT_C,
            norm: Normalization::identity(),
            converged: true,
            kkt_residual: 0.0,
            iterations: 0,
        }
    }

    pub fn raw_score(&self, loc: &Location) -> f64 {
        let q = self.norm.apply(loc);
        let mut s = self.bias;
        for ((sv, a), h) in self.support_locs.iter().zip(&self.alphas).zip(&self.labels) {
            s += a * h * kernel_eval(&q, &self.norm.apply(sv), &self.kernel);
        }
        s
    }

    pub fn classify(&self, loc: &Location) -> Coverage {
        Coverage::from_score(self.raw_score(loc))
    }

    /// `Σ αᵢhᵢ`, zero for a solution of the dual.
    pub fn dual_equality_residual(&self) -> f64 {
        self.alphas.iter().zip(&self.labels).map(|(a, h)| a * h).sum()
    }

    /// Dual objective `Σα − ½ΣΣ αᵢαⱼhᵢhⱼk(lᵢ, lⱼ)` over the support vectors.
    pub fn dual_objective(&self) -> f64 {
        let pts: Vec<Location> = self.support_locs.iter().map(|l| self.norm.apply(l)).collect();
        let mut quad = 0.0;
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                quad += self.alphas[i]
                    * self.alphas[j]
                    * self.labels[i]
                    * self.labels[j]
                    * kernel_eval(&pts[i], &pts[j], &self.kernel);
            }
        }
        self.alphas.iter().sum::<f64>() - 0.5 * quad
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{MODEL_MAGIC} {MODEL_VERSION}")?;
        writeln!(out, "c {}", self.c_reg)?;
        writeln!(out, "kernel {}", self.kernel)?;
        writeln!(out, "norm {} {} {}", self.norm.origin.x, self.norm.origin.y, self.norm.scale)?;
        writeln!(out, "sv {}", self.support_locs.len())?;
        for ((l, a), h) in self.support_locs.iter().zip(&self.alphas).zip(&self.labels) {
            writeln!(out, "{} {} {} {}", l.x, l.y, h, a)?;
        }
        writeln!(out, "bias {}", self.bias)?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, l)) => Ok((i + 1, l?)),
                None => Err(Error::Format(format!("model ends before {what}"))),
            }
        };
        let nums = |line: usize, s: &str, n: usize| -> Result<Vec<f64>> {
            let v = s
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::parse(line, format!("{t:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if v.len() != n {
                return Err(Error::parse(line, format!("expected {n} numbers")));
            }
            Ok(v)
        };
        let field = |line: usize, l: &str, key: &str| -> Result<String> {
            l.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| Error::parse(line, format!("expected {key:?}")))
        };

        let (i, l) = next("header")?;
        if field(i, &l, MODEL_MAGIC)? != MODEL_VERSION.to_string() {
            return Err(Error::parse(i, format!("unsupported model header {l:?}")));
        }
        let (i, l) = next("c")?;
        let c_reg = nums(i, &field(i, &l, "c")?, 1)?[0];
        let (i, l) = next("kernel")?;
        let kernel: KernelSpec = field(i, &l, "kernel")?.parse()?;
        let (i, l) = next("norm")?;
        let n = nums(i, &field(i, &l, "norm")?, 3)?;
        let norm = Normalization {
            origin: Location::new(n[0], n[1]),
            scale: n[2],
        };
        let (i, l) = next("sv")?;
        let count: usize = field(i, &l, "sv")?
            .trim()
            .parse()
            .map_err(|e| Error::parse(i, format!("sv count: {e}")))?;
        let mut model = BoundaryModel {
            support_locs: Vec::with_capacity(count),
            alphas: Vec::with_capacity(count),
            labels: Vec::with_capacity(count),
            bias: 0.0,
            kernel,
            c_reg,
            norm,
            converged: true,
            kkt_residual: 0.0,
            iterations: 0,
        };
        for _ in 0..count {
            let (i, l) = next("support vector")?;
            let v = nums(i, &l, 4)?;
            model.support_locs.push(Location::new(v[0], v[1]));
            model.labels.push(v[2]);
            model.alphas.push(v[3]);
        }
        let (i, l) = next("bias")?;
        model.bias = nums(i, &field(i, &l, "bias")?, 1)?[0];
        Ok(model)
    }
}

/// Covered where the recovered entry reaches `p_bar_min − delta_p`.
pub fn hypothesis_labels(recovered: &SpectrumMatrix, p_bar_min: f64, delta_p: f64) -> CoverageLabelGrid {
    let threshold = p_bar_min - delta_p;
    let (rows, cols) = recovered.shape();
    CoverageLabelGrid::from_fn(rows, cols, |r, c| {
        if recovered.get(r, c) >= threshold {
            Coverage::Covered
        } else {
            Coverage::Uncovered
        }
    })
}

/// Fraction of grids whose predicted label equals the truth.
pub fn detection_probability(predicted: &CoverageLabelGrid, truth: &CoverageLabelGrid) -> Result<f64> {
    if predicted.shape() != truth.shape() {
        return Err(Error::Dimension {
            expected: truth.shape(),
            got: predicted.shape(),
        });
    }
    let total = truth.labels.len();
    if total == 0 {
        return Err(Error::domain("empty label grid"));
    }
    let hits = predicted.labels.iter().zip(truth.labels.iter()).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmOptions {
    /// KKT tolerance on the maximal violating pair.
    pub tol: f64,
    pub max_iter: usize,
    /// Seed of the training subsample.
    pub seed: u64,
}

impl Default for SvmOptions {
    fn default() -> Self {
        SvmOptions {
            tol: DEFAULT_TOL,
            max_iter: 10_000_000,
            seed: 0x5356_4d00,
        }
    }
}

/// Trains on a subsample of at most `subsample` grid centers.
pub fn train_svm(
    labels: &CoverageLabelGrid,
    grid: &GridSpec,
    kernel: KernelSpec,
    c_reg: f64,
    subsample: usize,
) -> Result<BoundaryModel> {
    train_svm_with(labels, grid, kernel, c_reg, subsample, &SvmOptions::default())
}

pub fn train_svm_with(
    labels: &CoverageLabelGrid,
    grid: &GridSpec,
    kernel: KernelSpec,
    c_reg: f64,
    subsample: usize,
    opts: &SvmOptions,
) -> Result<BoundaryModel> {
    if labels.shape() != grid.shape() {
        return Err(Error::Dimension {
            expected: grid.shape(),
            got: labels.shape(),
        });
    }
    let covered = labels.covered_count();
    if covered == 0 || covered == labels.labels.len() {
        return Err(Error::SingleClass);
    }
    let picks = stratified_subsample(labels, subsample, opts.seed);
    let points: Vec<Location> = picks.iter().map(|&(r, c)| grid.center(r, c)).collect();
    let ys: Vec<Coverage> = picks.iter().map(|&(r, c)| labels.get(r, c)).collect();
    fit(&points, &ys, kernel, c_reg, Normalization::for_grid(grid), opts)
}

/// Trains on explicit points, normalizing by their bounding box.
pub fn train_points(
    points: &[Location],
    labels: &[Coverage],
    kernel: KernelSpec,
    c_reg: f64,
    opts: &SvmOptions,
) -> Result<BoundaryModel> {
    if points.len() != labels.len() {
        return Err(Error::Dimension {
            expected: (points.len(), 1),
            got: (labels.len(), 1),
        });
    }
    fit(points, labels, kernel, c_reg, Normalization::for_points(points), opts)
}

/// Grid cells for training: every cell within [`TRANSITION_BAND`] cells
/// of a label change plus a uniform fill from the rest, returned in
/// row-major order. The fill keeps at least a fifth of the budget so the
/// far field stays represented.
pub fn stratified_subsample(labels: &CoverageLabelGrid, budget: usize, seed: u64) -> Vec<(usize, usize)> {
    let (rows, cols) = labels.shape();
    let all: Vec<(usize, usize)> = (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).collect();
    if all.len() <= budget {
        return all;
    }
    let mixed = transition_band(labels, TRANSITION_BAND);
    let (near, far): (Vec<_>, Vec<_>) = all.into_iter().partition(|&(r, c)| mixed[(r, c)]);
    let fill = (budget / 5).max(budget.saturating_sub(near.len())).min(far.len());
    let near_take = (budget - fill).min(near.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<(usize, usize)> = index::sample(&mut rng, near.len(), near_take)
        .into_iter()
        .map(|k| near[k])
        .chain(index::sample(&mut rng, far.len(), fill).into_iter().map(|k| far[k]))
        .collect();
    out.sort_unstable();
    out
}

// Marks cells whose (2w+1)² Chebyshev neighborhood holds both labels.
fn transition_band(labels: &CoverageLabelGrid, w: usize) -> DMatrix<bool> {
    let (rows, cols) = labels.shape();
    // prefix[(r, c)] counts covered cells in [0, r) × [0, c)
    let mut prefix = DMatrix::<usize>::zeros(rows + 1, cols + 1);
    for r in 0..rows {
        for c in 0..cols {
            prefix[(r + 1, c + 1)] =
                usize::from(labels.get(r, c).is_covered()) + prefix[(r, c + 1)] + prefix[(r + 1, c)] - prefix[(r, c)];
        }
    }
    DMatrix::from_fn(rows, cols, |r, c| {
        let (r0, r1) = (r.saturating_sub(w), (r + w + 1).min(rows));
        let (c0, c1) = (c.saturating_sub(w), (c + w + 1).min(cols));
        let n = (r1 - r0) * (c1 - c0);
        let k = prefix[(r1, c1)] + prefix[(r0, c0)] - prefix[(r0, c1)] - prefix[(r1, c0)];
        k > 0 && k < n
    })
}

fn median_pairwise_distance(points: &[Location]) -> f64 {
    let mut d = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            d.push(a.distance_to(b));
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    if *m > 0.0 {
        *m
    } else {
        1.0
    }
}

fn fit(
    raw: &[Location],
    classes: &[Coverage],
    kernel: KernelSpec,
    c_reg: f64,
    norm: Normalization,
    opts: &SvmOptions,
) -> Result<BoundaryModel> {
    kernel.validate()?;
    if !(c_reg > 0.0 && c_reg.is_finite()) {
        return Err(Error::domain(format!("C must be positive, got {c_reg}")));
    }
    let has = |cls| classes.iter().any(|c| *c == cls);
    if !has(Coverage::Covered) || !has(Coverage::Uncovered) {
        return Err(Error::SingleClass);
    }
    let pts: Vec<Location> = raw.iter().map(|p| norm.apply(p)).collect();
    let kernel = match kernel {
        KernelSpec::Rbf { sigma } if sigma == 0.0 => KernelSpec::Rbf {
            sigma: median_pairwise_distance(&pts),
        },
        k => k,
    };
    let y: Vec<f64> = classes.iter().map(|c| c.sign()).collect();
    let n = pts.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel_eval(&pts[i], &pts[j], &kernel);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    let sol = smo(&k, &y, c_reg, opts);
    if !sol.converged {
        log::warn!("SVM dual stopped at {} iterations, KKT residual {:.3e}", sol.iterations, sol.kkt_residual);
    }
    let mut model = BoundaryModel {
        support_locs: Vec::new(),
        alphas: Vec::new(),
        labels: Vec::new(),
        bias: sol.bias,
        kernel,
        c_reg,
        norm,
        converged: sol.converged,
        kkt_residual: sol.kkt_residual,
        iterations: sol.iterations,
    };
    for i in 0..n {
        if sol.alpha[i] > 0.0 {
            model.support_locs.push(raw[i]);
            model.alphas.push(sol.alpha[i]);
            model.labels.push(y[i]);
        }
    }
    Ok(model)
}

struct DualSolution {
    alpha: Vec<f64>,
    bias: f64,
    converged: bool,
    kkt_residual: f64,
    iterations: usize,
}

// Minimizes ½αᵀQα − eᵀα with Q = yyᵀ∘K, 0 ≤ α ≤ C, yᵀα = 0.
fn smo(k: &DMatrix<f64>, y: &[f64], c: f64, opts: &SvmOptions) -> DualSolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);
    let mut iterations = 0;
    let mut residual;
    loop {
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        let mut g_min = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if up(alpha[t], y[t]) && v > g_max {
                g_max = v;
                i_sel = t;
            }
            if low(alpha[t], y[t]) && v < g_min {
                g_min = v;
            }
        }
        residual = g_max - g_min;
        if residual < opts.tol || i_sel == usize::MAX {
            break;
        }
        if iterations >= opts.max_iter {
            return finish(alpha, grad, y, c, false, residual, iterations);
        }
        let i = i_sel;
        // second-order choice of j among violators in I_low
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let b = g_max + y[t] * grad[t];
            if b > 0.0 {
                let mut a = k[(i, i)] + k[(t, t)] - 2.0 * k[(i, t)];
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -b * b / a;
                if obj < best {
                    best = obj;
                    j_sel = t;
                }
            }
        }
        if j_sel == usize::MAX {
            break;
        }
        let j = j_sel;
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)];
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k[(t, i)] * di + y[j] * k[(t, j)] * dj);
        }
        iterations += 1;
    }
    finish(alpha, grad, y, c, true, residual.max(0.0), iterations)
}

fn finish(alpha: Vec<f64>, grad: Vec<f64>, y: &[f64], c: f64, converged: bool, kkt: f64, iterations: usize) -> DualSolution {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut free_sum) = (0usize, 0.0);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { 0.5 * (ub + lb) };
    DualSolution {
        alpha,
        bias: -rho,
        converged,
        kkt_residual: kkt,
        iterations,
    }
}
