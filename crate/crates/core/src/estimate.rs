//! Likelihood maximization and inference.
//!
//! A dense BFGS quasi-Newton ascent with a strong-Wolfe line search drives
//! any supplied objective. Positivity-constrained parameters (the random
//! coefficient spreads and the SP scale) are optimized on the log scale and
//! reported untransformed with delta-method standard errors. Covariance is
//! the person-clustered sandwich around a finite-difference Hessian of the
//! analytic gradient.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::choice_data::Dataset;
use crate::error::{CoreError, Result};
use crate::mnl::{self, build_designs, free_params, PersonDesign};
use crate::model_spec::{ModelKind, ModelSpec, Param, ParameterVector};
use crate::mxl::{self, cap_dataset, DrawMatrix, DEFAULT_DISCARD};

/// Optimizer stopping rules.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Converged when the gradient max-norm falls below this.
    pub gradient_tol: f64,
    /// ... or when the relative objective improvement falls below this.
    pub rel_improvement_tol: f64,
    pub max_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { gradient_tol: 1e-5, rel_improvement_tol: 1e-9, max_iterations: 500 }
    }
}

/// Outcome of [`maximize`].
#[derive(Debug, Clone)]
pub struct Maximized {
    pub theta: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// Maximize `objective` over the coordinates not masked by `frozen`.
///
/// The objective receives the full coordinate vector and returns the value
/// and full-length gradient; frozen coordinates never move and their gradient
/// entries are ignored. BFGS with a strong-Wolfe line search; deterministic
/// given inputs.
pub fn maximize<F>(
    mut objective: F,
    start: &[f64],
    frozen: &[bool],
    tol: &Tolerances,
) -> Result<Maximized>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    assert_eq!(start.len(), frozen.len(), "start and frozen mask must align");
    let free_idx: Vec<usize> =
        (0..start.len()).filter(|&i| !frozen[i]).collect();
    let n = free_idx.len();
    let mut x_full = start.to_vec();

    // Evaluate on the free subspace; minimize the negated objective.
    let mut eval = |free_x: &[f64], x_full: &mut Vec<f64>| -> Result<(f64, Vec<f64>)> {
        for (j, &i) in free_idx.iter().enumerate() {
            x_full[i] = free_x[j];
        }
        let (value, grad) = objective(x_full)?;
        if !value.is_finite() {
            return Ok((f64::INFINITY, vec![0.0; n]));
        }
        let g: Vec<f64> = free_idx.iter().map(|&i| -grad[i]).collect();
        Ok((-value, g))
    };

    let mut x: Vec<f64> = free_idx.iter().map(|&i| start[i]).collect();
    let (mut fx, mut g) = eval(&x, &mut x_full)?;
    if !fx.is_finite() {
        return Err(CoreError::NonFiniteObjective { context: format!("start point {start:?}") });
    }

    if n == 0 {
        return Ok(Maximized {
            theta: x_full,
            value: -fx,
            gradient: vec![],
            iterations: 0,
            converged: true,
            gradient_norm: 0.0,
        });
    }

    let mut h = DMatrix::<f64>::identity(n, n);
    let mut converged = inf_norm(&g) < tol.gradient_tol;
    let mut iterations = 0;
    // The improvement rule needs two consecutive stalled iterations so one
    // conservative line-search step cannot stop the run early.
    let mut stalled = 0;

    while !converged {
        if iterations >= tol.max_iterations {
            return Err(CoreError::IterationCap(tol.max_iterations));
        }
        iterations += 1;

        let g_vec = DVector::from_column_slice(&g);
        let mut d = -(&h * &g_vec);
        if d.dot(&g_vec) >= 0.0 {
            // Curvature lost; restart from steepest descent.
            h = DMatrix::identity(n, n);
            d = -g_vec.clone();
        }
        let dir: Vec<f64> = d.iter().cloned().collect();

        let (alpha, fx_new, g_new) =
            line_search(&mut eval, &mut x_full, &x, &dir, fx, &g, tol)?;

        let x_new: Vec<f64> =
            x.iter().zip(&dir).map(|(xi, di)| xi + alpha * di).collect();
        let improvement = (fx - fx_new) / fx.abs().max(1.0);

        // BFGS inverse-Hessian update.
        let s = DVector::from_iterator(n, x_new.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(n, g_new.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        if iterations == 1 && sy > 0.0 {
            let yy = y.dot(&y);
            if yy > 0.0 {
                h = DMatrix::identity(n, n) * (sy / yy);
            }
        }
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H += (sy + yHy) rho^2 s s' - rho (H y s' + s y' H)
            let ss = &s * s.transpose();
            let hys = &hy * s.transpose();
            h += ss * (rho * rho * (sy + yhy));
            h -= &hys * rho;
            h -= hys.transpose() * rho;
        }

        x = x_new;
        fx = fx_new;
        g = g_new;

        if improvement.abs() < tol.rel_improvement_tol {
            stalled += 1;
        } else {
            stalled = 0;
        }
        if inf_norm(&g) < tol.gradient_tol || stalled >= 2 {
            converged = true;
        }
    }

    for (j, &i) in free_idx.iter().enumerate() {
        x_full[i] = x[j];
    }
    Ok(Maximized {
        theta: x_full,
        value: -fx,
        gradient: g.iter().map(|v| -v).collect(),
        iterations,
        converged,
        gradient_norm: inf_norm(&g),
    })
}

/// Strong-Wolfe line search (c1 = 1e-4, c2 = 0.9) on the minimization
/// problem. Returns (alpha, f(x + alpha d), grad at the accepted point).
fn line_search<E>(
    eval: &mut E,
    x_full: &mut Vec<f64>,
    x: &[f64],
    d: &[f64],
    f0: f64,
    g0: &[f64],
    _tol: &Tolerances,
) -> Result<(f64, f64, Vec<f64>)>
where
    E: FnMut(&[f64], &mut Vec<f64>) -> Result<(f64, Vec<f64>)>,
{
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let dphi0: f64 = g0.iter().zip(d).map(|(g, d)| g * d).sum();
    if dphi0 >= 0.0 {
        return Err(CoreError::NonFiniteObjective {
            context: "line search started without a descent direction".to_string(),
        });
    }
    let probe = |alpha: f64, eval: &mut E, x_full: &mut Vec<f64>| -> Result<(f64, Vec<f64>, f64)> {
        let xt: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
        let (f, g) = eval(&xt, x_full)?;
        let dphi: f64 = g.iter().zip(d).map(|(g, d)| g * d).sum();
        Ok((f, g, dphi))
    };

    let mut alpha_prev = 0.0;
    let mut f_prev = f0;
    let mut alpha = 1.0;
    let mut dphi_prev = dphi0;

    for iter in 0..30 {
        let (f, g, dphi) = probe(alpha, eval, x_full)?;
        if !f.is_finite() {
            // Too far; pull back and keep bracketing.
            alpha = alpha_prev + 0.3 * (alpha - alpha_prev);
            if alpha < 1e-20 {
                return Err(CoreError::NonFiniteObjective {
                    context: format!("line search collapsed at step {alpha:e}"),
                });
            }
            continue;
        }
        if f > f0 + C1 * alpha * dphi0 || (iter > 0 && f >= f_prev) {
            return zoom(eval, x_full, x, d, f0, dphi0, alpha_prev, f_prev, dphi_prev, alpha, f);
        }
        if dphi.abs() <= -C2 * dphi0 {
            return Ok((alpha, f, g));
        }
        if dphi >= 0.0 {
            return zoom(eval, x_full, x, d, f0, dphi0, alpha, f, dphi, alpha_prev, f_prev);
        }
        alpha_prev = alpha;
        f_prev = f;
        dphi_prev = dphi;
        alpha *= 2.0;
    }
    // Wolfe bracketing exhausted; fall back to plain Armijo backtracking.
    let mut alpha = 1.0;
    for _ in 0..50 {
        let (f, g, _) = probe(alpha, eval, x_full)?;
        if f.is_finite() && f <= f0 + C1 * alpha * dphi0 {
            return Ok((alpha, f, g));
        }
        alpha *= 0.5;
    }
    Err(CoreError::NonFiniteObjective {
        context: "line search failed to find an acceptable step".to_string(),
    })
}

#[allow(clippy::too_many_arguments)]
fn zoom<E>(
    eval: &mut E,
    x_full: &mut Vec<f64>,
    x: &[f64],
    d: &[f64],
    f0: f64,
    dphi0: f64,
    mut alpha_lo: f64,
    mut f_lo: f64,
    mut dphi_lo: f64,
    mut alpha_hi: f64,
    mut f_hi: f64,
) -> Result<(f64, f64, Vec<f64>)>
where
    E: FnMut(&[f64], &mut Vec<f64>) -> Result<(f64, Vec<f64>)>,
{
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for _ in 0..40 {
        // Minimizer of the quadratic through (alpha_lo, f_lo, dphi_lo) and
        // (alpha_hi, f_hi), guarded into the central 80% of the bracket.
        let span = alpha_hi - alpha_lo;
        let curvature = f_hi - f_lo - dphi_lo * span;
        let mut alpha = if f_hi.is_finite() && curvature.abs() > f64::EPSILON {
            alpha_lo - 0.5 * dphi_lo * span * span / curvature
        } else {
            f64::NAN
        };
        let lo = alpha_lo.min(alpha_hi);
        let hi = alpha_lo.max(alpha_hi);
        if !alpha.is_finite() || alpha <= lo + 0.1 * (hi - lo) || alpha >= hi - 0.1 * (hi - lo) {
            alpha = 0.5 * (alpha_lo + alpha_hi);
        }
        let xt: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
        let (f, g) = eval(&xt, x_full)?;
        let dphi: f64 = g.iter().zip(d).map(|(g, d)| g * d).sum();
        if f.is_finite() && f <= f0 + C1 * alpha * dphi0 {
            if best.as_ref().map(|(bf, _, _)| f < *bf).unwrap_or(true) {
                best = Some((f, alpha, g.clone()));
            }
        }
        if !f.is_finite() || f > f0 + C1 * alpha * dphi0 || f >= f_lo {
            alpha_hi = alpha;
            f_hi = f;
        } else {
            if dphi.abs() <= -C2 * dphi0 {
                return Ok((alpha, f, g));
            }
            if dphi * (alpha_hi - alpha_lo) >= 0.0 {
                alpha_hi = alpha_lo;
                f_hi = f_lo;
            }
            alpha_lo = alpha;
            f_lo = f;
            dphi_lo = dphi;
        }
        if (alpha_hi - alpha_lo).abs() < 1e-14 {
            break;
        }
    }
    if let Some((f, alpha, g)) = best {
        return Ok((alpha, f, g));
    }
    Err(CoreError::NonFiniteObjective { context: "zoom failed to satisfy Wolfe conditions".into() })
}

/// Person-clustered sandwich covariance.
///
/// `hessian_inverse` is the inverse Hessian of the log-likelihood at the
/// optimum and `per_cluster_scores` the per-person score vectors. Applies
/// the finite-sample factor G/(G-1).
pub fn robust_covariance(
    per_cluster_scores: &[Vec<f64>],
    hessian_inverse: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let g_count = per_cluster_scores.len();
    if g_count == 0 {
        return Err(CoreError::EmptyInput("per-cluster scores"));
    }
    let k = hessian_inverse.nrows();
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for s in per_cluster_scores {
        if s.len() != k {
            return Err(CoreError::LengthMismatch {
                what: "score length vs Hessian dimension",
                left: s.len(),
                right: k,
            });
        }
        let sv = DVector::from_column_slice(s);
        meat += &sv * sv.transpose();
    }
    let factor = if g_count > 1 { g_count as f64 / (g_count - 1) as f64 } else { 1.0 };
    Ok(hessian_inverse * meat * hessian_inverse * factor)
}

/// Adjusted rho-squared against the zero-parameter reference, and AIC.
pub fn fit_statistics(ll0: f64, ll_final: f64, n_params: usize, _n_obs: usize) -> (f64, f64) {
    let adj_rho2 = 1.0 - (ll_final - n_params as f64) / ll0;
    let aic = 2.0 * n_params as f64 - 2.0 * ll_final;
    (adj_rho2, aic)
}

/// One estimated coefficient with its inference columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub name: String,
    pub estimate: f64,
    pub robust_se: f64,
    pub robust_t: f64,
    pub classical_se: f64,
    pub frozen: bool,
}

/// Full estimation output.
#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub kind: ModelKind,
    /// Point estimates embedded in a full parameter vector (frozen values
    /// included), ready for downstream prediction and analysis.
    pub params: ParameterVector,
    /// Per-free-parameter inference rows, in canonical order.
    pub estimates: Vec<ParamEstimate>,
    pub ll0: f64,
    pub ll_final: f64,
    pub adj_rho2: f64,
    pub aic: f64,
    pub n_obs: usize,
    pub n_params: usize,
    pub n_persons: usize,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub warnings: Vec<String>,
}

impl EstimationResult {
    /// Invariant check: the stored fit statistics always recompute from the
    /// stored log-likelihoods.
    pub fn fit_stats_consistent(&self) -> bool {
        let (rho, aic) = fit_statistics(self.ll0, self.ll_final, self.n_params, self.n_obs);
        (rho - self.adj_rho2).abs() < 1e-9 && (aic - self.aic).abs() < 1e-9
    }

    pub fn estimate_for(&self, param: Param) -> Option<&ParamEstimate> {
        self.estimates.iter().find(|e| e.name == param.name())
    }
}

/// Estimation options.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub tolerances: Tolerances,
    /// Seed driving trip capping and recorded alongside draw metadata.
    pub seed: u64,
    /// Override the model specification's draw count (mixed models).
    pub draws: Option<usize>,
    /// Override the model specification's trip cap (mixed models).
    pub trip_cap: Option<usize>,
    /// Start from these values instead of the conventional defaults.
    pub start: Option<ParameterVector>,
    /// Use central finite differences instead of the analytic score for the
    /// simulated likelihood's gradient during optimization.
    pub fd_gradient: bool,
    /// Compute the Hessian and clustered covariance at the optimum. Turned
    /// off where only point estimates are needed (fold re-estimation).
    pub compute_inference: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tolerances: Tolerances::default(),
            seed: 1,
            draws: None,
            trip_cap: None,
            start: None,
            fd_gradient: false,
            compute_inference: true,
        }
    }
}

/// Conventional start values: zero for coefficients, -1 for the cost
/// log-mean, 0.1 for the spreads, 1.0 for the SP scale.
pub fn default_start(spec: &ModelSpec) -> ParameterVector {
    let mut start = ParameterVector::new();
    if spec.includes(Param::MuCost) {
        start.set(Param::MuCost, -1.0);
    }
    if spec.includes(Param::SigmaIvtt) {
        start.set(Param::SigmaIvtt, 0.1);
    }
    if spec.includes(Param::SigmaCost) {
        start.set(Param::SigmaCost, 0.1);
    }
    start
}

struct Problem<'a> {
    designs: Vec<PersonDesign>,
    spec: &'a ModelSpec,
    free: Vec<Param>,
    base: ParameterVector,
    draws: Option<&'a DrawMatrix>,
}

impl<'a> Problem<'a> {
    fn params_from_theta(&self, theta: &[f64]) -> ParameterVector {
        let mut params = self.base.clone();
        for (&p, &t) in self.free.iter().zip(theta) {
            params.set(p, if p.is_log_transformed() { t.exp() } else { t });
        }
        params
    }

    fn theta_from_params(&self, params: &ParameterVector) -> Vec<f64> {
        self.free
            .iter()
            .map(|&p| {
                let v = params.get(p);
                if p.is_log_transformed() {
                    v.ln()
                } else {
                    v
                }
            })
            .collect()
    }

    /// Chain external-space gradients/scores into transformed space.
    fn to_theta_space(&self, params: &ParameterVector, grad: &mut [f64]) {
        for (j, &p) in self.free.iter().enumerate() {
            if p.is_log_transformed() {
                grad[j] *= params.get(p);
            }
        }
    }

    /// Underflow of a chosen-alternative probability at an exploratory point
    /// is a likelihood of zero, not a caller error: surface it as -inf so
    /// the line search backtracks.
    fn soften(
        out: Result<(f64, Vec<f64>, Vec<Vec<f64>>)>,
        k: usize,
    ) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
        match out {
            Err(CoreError::ZeroProbability { .. }) | Err(CoreError::SimulatedUnderflow { .. }) => {
                Ok((f64::NEG_INFINITY, vec![0.0; k], Vec::new()))
            }
            other => other,
        }
    }

    fn eval(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let params = self.params_from_theta(theta);
        let out = match self.draws {
            None => mnl::ll_grad_scores(&self.designs, &params, self.spec, &self.free, false),
            Some(draws) => {
                mxl::sll_grad_scores(&self.designs, &params, draws, self.spec, &self.free, true)
            }
        };
        let (ll, mut grad, _) = Self::soften(out, theta.len())?;
        self.to_theta_space(&params, &mut grad);
        Ok((ll, grad))
    }

    fn eval_value(&self, theta: &[f64]) -> Result<f64> {
        let params = self.params_from_theta(theta);
        let out = match self.draws {
            None => mnl::ll_grad_scores(&self.designs, &params, self.spec, &self.free, false),
            Some(draws) => {
                mxl::sll_grad_scores(&self.designs, &params, draws, self.spec, &self.free, false)
            }
        };
        Self::soften(out, theta.len()).map(|(ll, _, _)| ll)
    }

    fn eval_fd(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let value = self.eval_value(theta)?;
        let mut grad = vec![0.0; theta.len()];
        let mut probe = theta.to_vec();
        for j in 0..theta.len() {
            let h = 1e-6 * theta[j].abs().max(1.0);
            probe[j] = theta[j] + h;
            let up = self.eval_value(&probe)?;
            probe[j] = theta[j] - h;
            let down = self.eval_value(&probe)?;
            probe[j] = theta[j];
            grad[j] = (up - down) / (2.0 * h);
        }
        Ok((value, grad))
    }

    fn scores(&self, theta: &[f64]) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
        let params = self.params_from_theta(theta);
        let (ll, mut grad, mut scores) = match self.draws {
            None => mnl::ll_grad_scores(&self.designs, &params, self.spec, &self.free, true)?,
            Some(draws) => {
                mxl::sll_grad_scores(&self.designs, &params, draws, self.spec, &self.free, true)?
            }
        };
        self.to_theta_space(&params, &mut grad);
        for s in &mut scores {
            self.to_theta_space(&params, s);
        }
        Ok((ll, grad, scores))
    }
}

/// Newton refinement with finite-difference Hessians, run when the BFGS
/// loop stopped on the improvement rule before the gradient criterion.
fn newton_polish(problem: &Problem, start: Maximized, tol: &Tolerances) -> Result<Maximized> {
    let k = start.theta.len();
    if k == 0 || start.gradient_norm < tol.gradient_tol {
        return Ok(start);
    }
    debug_assert_eq!(problem.free.len(), k);
    let mut theta = start.theta.clone();
    let mut iterations = start.iterations;
    let (mut value, mut grad) = problem.eval(&theta)?;
    let mut grad_norm = inf_norm(&grad);

    for _ in 0..15 {
        if grad_norm < tol.gradient_tol {
            break;
        }
        let hess = fd_hessian(problem, &theta)?;
        let g_vec = DVector::from_column_slice(&grad);
        // Ascent direction: solve H d = -g; regularize toward steepest
        // ascent until the direction points uphill.
        let mut tau = 0.0;
        let mut direction: Option<DVector<f64>> = None;
        for _ in 0..8 {
            let reg = &hess - DMatrix::identity(k, k) * tau;
            if let Some(solved) = reg.lu().solve(&(-&g_vec)) {
                if solved.dot(&g_vec) > 0.0 && solved.iter().all(|v| v.is_finite()) {
                    direction = Some(solved);
                    break;
                }
            }
            tau = if tau == 0.0 { 1e-4 } else { tau * 100.0 };
        }
        let Some(d) = direction else { break };

        // Backtracking Armijo on the ascent.
        let slope = d.dot(&g_vec);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> =
                theta.iter().zip(d.iter()).map(|(t, di)| t + alpha * di).collect();
            let (v_new, g_new) = problem.eval(&trial)?;
            if v_new.is_finite() && v_new >= value + 1e-4 * alpha * slope {
                theta = trial;
                value = v_new;
                grad = g_new;
                grad_norm = inf_norm(&grad);
                iterations += 1;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(Maximized {
        theta,
        value,
        gradient: grad.clone(),
        iterations,
        converged: true,
        gradient_norm: grad_norm,
    })
}

/// Central-difference Hessian of the (analytic) gradient.
fn fd_hessian(problem: &Problem, theta: &[f64]) -> Result<DMatrix<f64>> {
    let k = theta.len();
    let mut hess = DMatrix::<f64>::zeros(k, k);
    let mut probe = theta.to_vec();
    for j in 0..k {
        let h = 1e-5 * theta[j].abs().max(1.0);
        probe[j] = theta[j] + h;
        let (_, up) = problem.eval(&probe)?;
        probe[j] = theta[j] - h;
        let (_, down) = problem.eval(&probe)?;
        probe[j] = theta[j];
        for i in 0..k {
            hess[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    // Symmetrize.
    let ht = hess.transpose();
    Ok((hess + ht) * 0.5)
}

fn invert_hessian(hess: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    hess.clone().try_inverse().ok_or_else(|| {
        let norm = hess.norm();
        CoreError::SingularHessian { rcond: if norm > 0.0 { 0.0 } else { f64::NAN } }
    })
}

/// Estimate a model on a dataset.
///
/// RP-only specifications are estimated on the RP observations; joint
/// specifications use the pooled data as supplied. Mixed specifications cap
/// RP trips per person and simulate the mixing integral with Halton draws.
pub fn fit(dataset: &Dataset, spec: &ModelSpec, options: &FitOptions) -> Result<EstimationResult> {
    let working = if spec.kind.uses_sp() {
        dataset.clone()
    } else {
        dataset.rp_only()?
    };
    let working = if spec.kind.is_mixed() {
        let cap = options.trip_cap.or(spec.trip_cap);
        match cap {
            Some(c) => cap_dataset(&working, c, options.seed)?,
            None => working,
        }
    } else {
        working
    };

    let draws = if spec.kind.is_mixed() {
        let n_draws = options.draws.unwrap_or(spec.draws);
        Some(DrawMatrix::halton(working.n_persons(), 2, n_draws, DEFAULT_DISCARD, options.seed)?)
    } else {
        None
    };
    fit_prepared(&working, spec, draws.as_ref(), options)
}

/// Estimate on an already-prepared dataset (no source filtering or capping),
/// reusing a caller-supplied draw matrix. Used by cross-validation.
pub fn fit_prepared(
    dataset: &Dataset,
    spec: &ModelSpec,
    draws: Option<&DrawMatrix>,
    options: &FitOptions,
) -> Result<EstimationResult> {
    let start_params = match &options.start {
        Some(p) => p.clone(),
        None => default_start(spec),
    };
    spec.validate_params(&start_params)?;
    if spec.kind.is_mixed() && draws.is_none() {
        return Err(CoreError::NoDraws);
    }

    let designs = build_designs(dataset, spec)?;
    let free = free_params(spec, &start_params);
    let problem = Problem { designs, spec, free: free.clone(), base: start_params.clone(), draws };

    let theta0 = problem.theta_from_params(&start_params);
    let frozen = vec![false; theta0.len()];
    let use_fd = options.fd_gradient && spec.kind.is_mixed();
    let maximized = if use_fd {
        maximize(|t| problem.eval_fd(t), &theta0, &frozen, &options.tolerances)?
    } else {
        maximize(|t| problem.eval(t), &theta0, &frozen, &options.tolerances)?
    };

    // Quasi-Newton ascent can stall on a narrow ridge with the gradient
    // still visible; exact-Hessian Newton steps finish the climb.
    let polished = newton_polish(&problem, maximized, &options.tolerances)?;

    let theta_hat = polished.theta.clone();
    let params_hat = problem.params_from_theta(&theta_hat);
    let (ll_final, _, scores) = problem.scores(&theta_hat)?;
    let maximized = polished;

    let mut warnings = Vec::new();
    let k = free.len();
    let (robust_se, classical_se) = if k > 0 && options.compute_inference {
        let hess = fd_hessian(&problem, &theta_hat)?;
        let hinv = invert_hessian(&hess)?;
        let all_zero = scores.iter().all(|s| s.iter().all(|&v| v == 0.0));
        if all_zero {
            warnings.push(
                "all per-person scores are zero at the optimum; covariance degenerate".to_string(),
            );
        }
        let cov = robust_covariance(&scores, &hinv)?;
        let mut robust = Vec::with_capacity(k);
        let mut classical = Vec::with_capacity(k);
        for (j, &p) in free.iter().enumerate() {
            let var_r = cov[(j, j)].max(0.0);
            // Classical: inverse observed information, -H^-1.
            let var_c = (-hinv[(j, j)]).max(0.0);
            let chain = if p.is_log_transformed() { params_hat.get(p).abs() } else { 1.0 };
            robust.push(var_r.sqrt() * chain);
            classical.push(var_c.sqrt() * chain);
        }
        (robust, classical)
    } else {
        if k > 0 {
            warnings.push("inference skipped: standard errors not computed".to_string());
        }
        (vec![0.0; k], vec![0.0; k])
    };

    let ll0 = mnl::null_loglikelihood(dataset);
    let (adj_rho2, aic) = fit_statistics(ll0, ll_final, k, dataset.n_observations());

    let mut estimates = Vec::with_capacity(k);
    for (j, &p) in free.iter().enumerate() {
        let est = params_hat.get(p);
        let se = robust_se[j];
        estimates.push(ParamEstimate {
            name: p.name().to_string(),
            estimate: est,
            robust_se: se,
            robust_t: if se > 0.0 { est / se } else { f64::NAN },
            classical_se: classical_se[j],
            frozen: false,
        });
    }
    for p in spec.params() {
        if start_params.is_frozen(p) {
            estimates.push(ParamEstimate {
                name: p.name().to_string(),
                estimate: params_hat.get(p),
                robust_se: 0.0,
                robust_t: f64::NAN,
                classical_se: 0.0,
                frozen: true,
            });
        }
    }

    Ok(EstimationResult {
        kind: spec.kind,
        params: params_hat,
        estimates,
        ll0,
        ll_final,
        adj_rho2,
        aic,
        n_obs: dataset.n_observations(),
        n_params: k,
        n_persons: dataset.n_persons(),
        converged: maximized.converged,
        iterations: maximized.iterations,
        gradient_norm: maximized.gradient_norm,
        warnings,
    })
}
