//! Least-squares fit of `amplitude * G2(tau; omega_c, gamma, alpha) + baseline`
//! to a coincidence histogram by a deterministic Nelder-Mead simplex.

use alloc::vec;
use alloc::vec::Vec;

use crate::analysis::exposure_corrected;
use crate::error::{ensure, Error, Result};
use crate::math;
use crate::model::{DriveParams, MediumParams, PhysicalConstants};
use crate::sim::CoincidenceHistogram;
use crate::wavepacket::{self, GridSpec, MAX_POINTS, MIN_WINDOW_POINTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FitParam {
    OmegaC,
    Gamma,
    Alpha,
    Amplitude,
    Baseline,
}

impl FitParam {
    pub const ALL: [FitParam; 5] = [
        FitParam::OmegaC,
        FitParam::Gamma,
        FitParam::Alpha,
        FitParam::Amplitude,
        FitParam::Baseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FitParam::OmegaC => "omega_c",
            FitParam::Gamma => "gamma",
            FitParam::Alpha => "alpha",
            FitParam::Amplitude => "amplitude",
            FitParam::Baseline => "baseline",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }
}

/// One value per [`FitParam`]. `amplitude` scales the dimensionless model
/// `G2` to counts per bin; `baseline` is in counts per bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitParams {
    pub omega_c: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub amplitude: f64,
    pub baseline: f64,
}

impl FitParams {
    pub fn get(&self, p: FitParam) -> f64 {
        match p {
            FitParam::OmegaC => self.omega_c,
            FitParam::Gamma => self.gamma,
            FitParam::Alpha => self.alpha,
            FitParam::Amplitude => self.amplitude,
            FitParam::Baseline => self.baseline,
        }
    }

    pub fn set(&mut self, p: FitParam, v: f64) {
        match p {
            FitParam::OmegaC => self.omega_c = v,
            FitParam::Gamma => self.gamma = v,
            FitParam::Alpha => self.alpha = v,
            FitParam::Amplitude => self.amplitude = v,
            FitParam::Baseline => self.baseline = v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: FitParams,
    pub upper: FitParams,
}

impl Bounds {
    /// Box around a starting point: `omega_c` and `alpha` within a factor
    /// 0.75..1.5, `gamma` in `[1e-5, max(4 gamma, 1e-3)]`, amplitude and
    /// baseline from zero to 1000 times their start.
    pub fn around(x: &FitParams) -> Self {
        Self {
            lower: FitParams {
                omega_c: 0.75 * x.omega_c,
                gamma: 1e-5_f64.min(x.gamma),
                alpha: 0.75 * x.alpha,
                amplitude: 0.0,
                baseline: 0.0,
            },
            upper: FitParams {
                omega_c: 1.5 * x.omega_c,
                gamma: (4.0 * x.gamma).max(1e-3),
                alpha: 1.5 * x.alpha,
                amplitude: 1e3 * x.amplitude.abs().max(1.0),
                baseline: 1e3 * x.baseline.abs().max(1.0),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in FitParam::ALL {
            let (lo, hi) = (self.lower.get(p), self.upper.get(p));
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::BoundViolation(p.name()));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &FitParams) -> Result<()> {
        for p in FitParam::ALL {
            let v = x.get(p);
            if !(v >= self.lower.get(p) && v <= self.upper.get(p)) {
                return Err(Error::BoundViolation(p.name()));
            }
        }
        Ok(())
    }

    fn clamp(&self, p: FitParam, v: f64) -> f64 {
        v.clamp(self.lower.get(p), self.upper.get(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    #[default]
    Unweighted,
    /// Residuals divided by `sqrt(max(counts, 1))`.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub weighting: Weighting,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-8,
            weighting: Weighting::Unweighted,
        }
    }
}

/// Fixed model context: everything not in [`FitParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelContext {
    pub medium: MediumParams,
    pub drive: DriveParams,
    pub consts: PhysicalConstants,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: FitParams,
    pub free: Vec<FitParam>,
    /// Standard errors of the free parameters from the Jacobian at the
    /// optimum, in the order of `free`; `None` if it is singular.
    pub sigma: Option<Vec<f64>>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grid: GridSpec,
}

/// One detuning grid good for every reachable parameter set: the corners of
/// `bounds` along the free model parameters, `initial` along the rest.
pub fn grid_for_bounds(
    ctx: &ModelContext,
    initial: &FitParams,
    free: &[FitParam],
    bounds: &Bounds,
) -> Result<GridSpec> {
    let axis = |p: FitParam| {
        if free.contains(&p) {
            [bounds.lower.get(p), bounds.upper.get(p)]
        } else {
            [initial.get(p); 2]
        }
    };
    let mut span: f64 = 0.0;
    let mut n = wavepacket::DEFAULT_POINTS;
    let mut min_window = f64::INFINITY;
    for oc in axis(FitParam::OmegaC) {
        for alpha in axis(FitParam::Alpha) {
            for gamma in axis(FitParam::Gamma) {
                let m = MediumParams {
                    alpha,
                    gamma,
                    ..ctx.medium
                };
                let d = ctx.drive.with_omega_c(oc);
                let g = GridSpec::auto(&m, &d)?;
                span = span.max(g.delta_span);
                n = n.max(g.n_points);
                min_window = min_window.min(wavepacket::eit_window(&m, &d));
            }
        }
    }
    while min_window / (2.0 * span / n as f64) < MIN_WINDOW_POINTS && n < MAX_POINTS {
        n *= 2;
    }
    Ok(GridSpec::new(n, span))
}

struct Problem<'a> {
    data: &'a [f64],
    weights: Vec<f64>,
    bin_width: f64,
    ctx: &'a ModelContext,
    grid: GridSpec,
    base: FitParams,
    free: &'a [FitParam],
}

impl Problem<'_> {
    fn params(&self, x: &[f64]) -> FitParams {
        let mut p = self.base;
        for (&f, &v) in self.free.iter().zip(x) {
            p.set(f, v);
        }
        p
    }

    fn model(&self, p: &FitParams) -> Result<Vec<f64>> {
        let m = MediumParams {
            alpha: p.alpha,
            gamma: p.gamma,
            ..self.ctx.medium
        };
        let d = self.ctx.drive.with_omega_c(p.omega_c);
        let wp = wavepacket::compute_wavepacket(&m, &d, &self.grid, &self.ctx.consts)?;
        let t = wp.rebin_range(self.bin_width, 0, self.data.len()).values;
        Ok(t.iter().map(|v| p.amplitude * v + p.baseline).collect())
    }

    fn objective(&self, p: &FitParams) -> Result<f64> {
        let m = self.model(p)?;
        Ok(self
            .data
            .iter()
            .zip(&m)
            .zip(&self.weights)
            .map(|((y, f), w)| w * (y - f) * (y - f))
            .sum())
    }
}

/// Fit the model to exposure-corrected histogram counts.
///
/// Parameters outside `free` stay at their `initial` values. The simplex
/// starts at `initial` with a step of 5% of each free value (0.00025 for a
/// zero value), trial points are clamped into `bounds`, and the search stops
/// when the spread of objective values falls below `tolerance` relative to
/// the best one, or after `max_iterations`.
pub fn fit_wavepacket(
    hist: &CoincidenceHistogram,
    ctx: &ModelContext,
    initial: FitParams,
    free: &[FitParam],
    bounds: &Bounds,
    opts: &FitOptions,
) -> Result<FitResult> {
    hist.validate()?;
    fit_series(
        &exposure_corrected(hist),
        hist.bin_width,
        ctx,
        initial,
        free,
        bounds,
        opts,
    )
}

/// [`fit_wavepacket`] on an already corrected series; bin `k` covers delays
/// `[k w, (k+1) w)`.
pub fn fit_series(
    data: &[f64],
    bin_width: f64,
    ctx: &ModelContext,
    initial: FitParams,
    free: &[FitParam],
    bounds: &Bounds,
    opts: &FitOptions,
) -> Result<FitResult> {
    ensure(!data.is_empty(), "data", "must not be empty")?;
    ensure(
        bin_width.is_finite() && bin_width > 0.0,
        "bin_width",
        "must be finite and > 0",
    )?;
    bounds.validate()?;
    bounds.contains(&initial)?;
    ensure(opts.tolerance > 0.0, "tolerance", "must be > 0")?;
    let mut free_sorted: Vec<FitParam> = free.to_vec();
    free_sorted.sort();
    free_sorted.dedup();
    let free = &free_sorted[..];

    let weights = match opts.weighting {
        Weighting::Unweighted => vec![1.0; data.len()],
        Weighting::Poisson => data.iter().map(|&y| 1.0 / y.max(1.0)).collect(),
    };
    let grid = grid_for_bounds(ctx, &initial, free, bounds)?;
    let pr = Problem {
        data,
        weights,
        bin_width,
        ctx,
        grid,
        base: initial,
        free,
    };

    let x0: Vec<f64> = free.iter().map(|&f| initial.get(f)).collect();
    let (x, residual, iterations, converged) = if free.is_empty() {
        (x0, pr.objective(&initial)?, 0, true)
    } else {
        nelder_mead(&pr, bounds, x0, opts)?
    };
    let params = pr.params(&x);
    let sigma = if free.is_empty() {
        Some(Vec::new())
    } else {
        standard_errors(&pr, bounds, &x, residual)
    };
    Ok(FitResult {
        params,
        free: free.to_vec(),
        sigma,
        residual,
        iterations,
        converged,
        grid,
    })
}

fn nelder_mead(
    pr: &Problem,
    bounds: &Bounds,
    x0: Vec<f64>,
    opts: &FitOptions,
) -> Result<(Vec<f64>, f64, usize, bool)> {
    let dim = x0.len();
    let clamp = |x: &mut Vec<f64>| {
        for (v, &f) in x.iter_mut().zip(pr.free) {
            *v = bounds.clamp(f, *v);
        }
    };
    let eval = |x: &[f64]| -> Result<f64> {
        match pr.objective(&pr.params(x)) {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) | Err(Error::NonFinite(_)) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };
    let mut simplex: Vec<Vec<f64>> = vec![x0.clone()];
    for i in 0..dim {
        let mut v = x0.clone();
        let step = if v[i] != 0.0 { 0.05 * v[i] } else { 0.00025 };
        v[i] += step;
        clamp(&mut v);
        if v[i] == x0[i] {
            // pinned at the upper bound: step inward
            v[i] = bounds.clamp(pr.free[i], x0[i] - step);
        }
        simplex.push(v);
    }
    let mut f: Vec<f64> = simplex.iter().map(|x| eval(x)).collect::<Result<_>>()?;
    let floor = 1e-12 * pr.data.iter().map(|y| y * y).sum::<f64>();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| f[a].total_cmp(&f[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        f = order.iter().map(|&i| f[i]).collect();
        if f[dim] - f[0] <= opts.tolerance * f[0].abs() + floor {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|x| x[j]).sum::<f64>() / dim as f64)
            .collect();
        let toward = |t: f64| -> Vec<f64> {
            let mut v: Vec<f64> = (0..dim)
                .map(|j| centroid[j] + t * (simplex[dim][j] - centroid[j]))
                .collect();
            clamp(&mut v);
            v
        };
        let xr = toward(-1.0);
        let fr = eval(&xr)?;
        if fr < f[0] {
            let xe = toward(-2.0);
            let fe = eval(&xe)?;
            if fe < fr {
                simplex[dim] = xe;
                f[dim] = fe;
            } else {
                simplex[dim] = xr;
                f[dim] = fr;
            }
            continue;
        }
        if fr < f[dim - 1] {
            simplex[dim] = xr;
            f[dim] = fr;
            continue;
        }
        let (xc, fc) = if fr < f[dim] {
            let xc = toward(-0.5);
            let fc = eval(&xc)?;
            (xc, fc)
        } else {
            let xc = toward(0.5);
            let fc = eval(&xc)?;
            (xc, fc)
        };
        if fc < f[dim].min(fr) {
            simplex[dim] = xc;
            f[dim] = fc;
            continue;
        }
        for i in 1..=dim {
            let mut v: Vec<f64> = (0..dim)
                .map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]))
                .collect();
            clamp(&mut v);
            f[i] = eval(&v)?;
            simplex[i] = v;
        }
    }
    let best = (0..=dim)
        .min_by(|&a, &b| f[a].total_cmp(&f[b]))
        .unwrap_or(0);
    Ok((simplex[best].clone(), f[best], iterations, converged))
}

/// `sqrt(diag((J^T W J)^-1) * RSS / (n - p))` with a central-difference
/// Jacobian of the model.
fn standard_errors(pr: &Problem, bounds: &Bounds, x: &[f64], rss: f64) -> Option<Vec<f64>> {
    let dim = x.len();
    let n = pr.data.len();
    if n <= dim {
        return None;
    }
    let mut jac: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for i in 0..dim {
        let h = if x[i] != 0.0 { 1e-4 * x[i].abs() } else { 1e-6 };
        let mut up = x.to_vec();
        let mut dn = x.to_vec();
        up[i] = bounds.clamp(pr.free[i], x[i] + h);
        dn[i] = bounds.clamp(pr.free[i], x[i] - h);
        let width = up[i] - dn[i];
        if width <= 0.0 {
            return None;
        }
        let mu = pr.model(&pr.params(&up)).ok()?;
        let md = pr.model(&pr.params(&dn)).ok()?;
        jac.push(mu.iter().zip(&md).map(|(a, b)| (a - b) / width).collect());
    }
    let mut a = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            a[i][j] = (0..n).map(|k| pr.weights[k] * jac[i][k] * jac[j][k]).sum();
        }
    }
    let inv = invert(a)?;
    let s2 = rss / (n - dim) as f64;
    (0..dim)
        .map(|i| {
            let v = inv[i][i] * s2;
            (v >= 0.0).then(|| math::sqrt(v))
        })
        .collect()
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(mut a: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if !(a[piv][col].abs() > 0.0) {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for r in 0..n {
            if r != col {
                let k = a[r][col];
                if k != 0.0 {
                    for j in 0..n {
                        a[r][j] -= k * a[col][j];
                        inv[r][j] -= k * inv[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}
