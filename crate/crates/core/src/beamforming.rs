//! Max-min multicast beamforming for a fixed antenna placement.
//!
//! The objective is the worst-user SNR `min_k σ_k⁻²·|h_kᴴw|²` under the
//! power budget `‖w‖² ≤ P`. The per-user power terms are non-convex in `w`,
//! so the solver runs successive convex approximation (SCA): each iteration
//! replaces `|h_kᴴw|²` with its first-order lower bound tight at the current
//! iterate `w_q`, which turns the feasible region into an intersection of
//! half-spaces with a Euclidean ball.
//!
//! The convex subproblem is solved without an external solver: bisection on
//! the worst-user level `r`, with each feasibility test run as projected
//! subgradient descent with Polyak steps on the maximum constraint
//! violation over the ball, warm-started at `w_q`. A short dual refinement
//! over the probability simplex pins down the final digits and keeps the
//! returned point stationarity-certified.
//!
//! Because the optimal beamformer lies in the span of the user channels,
//! the same machinery also runs over the `K` subspace coefficients
//! (`w = Σ_k η_k·h_k`), which is cheaper when `N ≫ K`.

use num_complex::Complex64;

use crate::math::{axpy, cdot, cholesky_lower, norm_sqr, project_simplex, scaled, solve_upper_from_lower};
use crate::{Error, Result};

/// Relative slack allowed on the power budget.
pub const POWER_TOLERANCE: f64 = 1e-9;

/// Complex transmit weight vector with its power budget.
#[derive(Debug, Clone)]
pub struct Beamformer {
    weights: Vec<Complex64>,
    budget: f64,
}

impl Beamformer {
    /// Validates `‖w‖² ≤ P·(1 + 1e-9)`.
    pub fn new(weights: Vec<Complex64>, budget: f64) -> Result<Self> {
        if !(budget > 0.0) {
            return Err(Error::InvalidArgument("power budget must be positive".into()));
        }
        let power = norm_sqr(&weights);
        if power > budget * (1.0 + POWER_TOLERANCE) {
            return Err(Error::InvalidArgument(format!(
                "weights exceed the power budget: {power} > {budget}"
            )));
        }
        Ok(Self { weights, budget })
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn power(&self) -> f64 {
        norm_sqr(&self.weights)
    }
}

/// Stopping rule for the SCA loop.
#[derive(Debug, Clone, Copy)]
pub struct ScaOptions {
    /// Stop when the fractional objective increase drops below this.
    pub eps: f64,
    /// Hard cap on SCA iterations.
    pub max_iters: usize,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self { eps: 1e-4, max_iters: 50 }
    }
}

impl ScaOptions {
    /// Tight settings for cross-validation against closed forms.
    pub fn tight() -> Self {
        Self { eps: 1e-10, max_iters: 300 }
    }
}

/// Converged beamformer plus the worst-user SNR at every iterate
/// (including the initial point).
#[derive(Debug, Clone)]
pub struct ScaResult {
    pub beamformer: Beamformer,
    pub trace: Vec<f64>,
}

impl ScaResult {
    /// Worst-user SNR at the final iterate.
    pub fn objective(&self) -> f64 {
        *self.trace.last().unwrap()
    }

    /// Multicast rate at the final iterate, bits/s/Hz.
    pub fn rate(&self) -> f64 {
        snr_to_rate(self.objective())
    }

    /// Solver trace as CSV rows `(iteration, min_snr, rate)`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,min_snr,rate\n");
        for (q, &snr) in self.trace.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", q, snr, snr_to_rate(snr)));
        }
        out
    }
}

/// Subspace expansion coefficients: `w = Σ_k η_k · h_k`.
#[derive(Debug, Clone)]
pub struct SubspaceCoefficients {
    pub eta: Vec<Complex64>,
}

/// Result of the subspace-parametrized SCA run.
#[derive(Debug, Clone)]
pub struct SubspaceResult {
    pub beamformer: Beamformer,
    pub coefficients: SubspaceCoefficients,
    pub trace: Vec<f64>,
}

fn check_dims(channels: &[Vec<Complex64>], noise_powers: &[f64], dim: usize) -> Result<()> {
    if channels.is_empty() {
        return Err(Error::DimensionMismatch("no channel vectors".into()));
    }
    if channels.len() != noise_powers.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} channels vs {} noise powers",
            channels.len(),
            noise_powers.len()
        )));
    }
    for (k, h) in channels.iter().enumerate() {
        if h.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "channel {k} has length {} but expected {dim}",
                h.len()
            )));
        }
    }
    if noise_powers.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidArgument("noise powers must be positive".into()));
    }
    Ok(())
}

/// Worst-user SNR `min_k σ_k⁻²·|h_kᴴw|²`.
pub fn min_snr(
    channels: &[Vec<Complex64>],
    noise_powers: &[f64],
    weights: &[Complex64],
) -> Result<f64> {
    check_dims(channels, noise_powers, weights.len())?;
    Ok(channels
        .iter()
        .zip(noise_powers)
        .map(|(h, &s)| cdot(h, weights).norm_sqr() / s)
        .fold(f64::INFINITY, f64::min))
}

/// `log₂(1 + x)` for a worst-user SNR `x`.
pub fn snr_to_rate(snr: f64) -> f64 {
    (1.0 + snr).log2()
}

/// Multicast rate `log₂(1 + min_k σ_k⁻²·|h_kᴴw|²)`, bits/s/Hz.
pub fn multicast_rate(
    channels: &[Vec<Complex64>],
    noise_powers: &[f64],
    weights: &[Complex64],
) -> Result<f64> {
    Ok(snr_to_rate(min_snr(channels, noise_powers, weights)?))
}

/// Matched filter to the weakest user, scaled to the full budget. The
/// standard feasible, nonzero SCA starting point.
pub fn matched_filter_weakest(
    channels: &[Vec<Complex64>],
    noise_powers: &[f64],
    budget: f64,
) -> Result<Vec<Complex64>> {
    if channels.is_empty() {
        return Err(Error::DimensionMismatch("no channel vectors".into()));
    }
    check_dims(channels, noise_powers, channels[0].len())?;
    let mut weakest: Option<(usize, f64)> = None;
    for (k, h) in channels.iter().enumerate() {
        let gain = norm_sqr(h) / noise_powers[k];
        if gain > 0.0 {
            match weakest {
                Some((_, g)) if g <= gain => {}
                _ => weakest = Some((k, gain)),
            }
        }
    }
    let (k, _) = weakest.ok_or(Error::ZeroChannel)?;
    let norm = norm_sqr(&channels[k]).sqrt();
    Ok(scaled(&channels[k], budget.sqrt() / norm))
}

/// First-order surrogate of the per-user SNR constraints at a local point.
///
/// Constraint `k` reads `⟨grad_k, w⟩_ℝ − offset_k ≥ r`, with the real inner
/// product `⟨u, v⟩_ℝ = Re{uᴴv}`; the offset equals the per-user SNR at the
/// local point.
struct Surrogate {
    grads: Vec<Vec<Complex64>>,
    grad_norm2: Vec<f64>,
    offsets: Vec<f64>,
    budget: f64,
}

impl Surrogate {
    fn at_local_point(
        channels: &[Vec<Complex64>],
        noise_powers: &[f64],
        local: &[Complex64],
        budget: f64,
    ) -> Self {
        let mut grads = Vec::with_capacity(channels.len());
        let mut offsets = Vec::with_capacity(channels.len());
        let mut grad_norm2 = Vec::with_capacity(channels.len());
        for (h, &noise) in channels.iter().zip(noise_powers) {
            let beta = cdot(h, local);
            let grad: Vec<Complex64> = h.iter().map(|&x| 2.0 * beta * x / noise).collect();
            grad_norm2.push(norm_sqr(&grad));
            grads.push(grad);
            offsets.push(beta.norm_sqr() / noise);
        }
        Self { grads, grad_norm2, offsets, budget }
    }

    fn constraint_value(&self, k: usize, weights: &[Complex64]) -> f64 {
        cdot(&self.grads[k], weights).re - self.offsets[k]
    }

    /// Smallest constraint value and its index.
    fn min_value(&self, weights: &[Complex64]) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for k in 0..self.grads.len() {
            let v = self.constraint_value(k, weights);
            if v < best.0 {
                best = (v, k);
            }
        }
        best
    }

    /// Tries to find a point in the ball with all constraints at level `r`,
    /// by Polyak-stepped projected subgradient descent on the maximum
    /// violation. Returns whether a feasible point was reached; `weights`
    /// holds the last iterate either way.
    fn search_level(&self, level: f64, weights: &mut [Complex64], max_iters: usize) -> bool {
        for _ in 0..max_iters {
            let (min_val, k) = self.min_value(weights);
            if min_val >= level {
                return true;
            }
            let violation = level - min_val;
            if self.grad_norm2[k] <= 0.0 {
                return false; // flat violated constraint can never be fixed
            }
            let step = violation / self.grad_norm2[k];
            axpy(weights, Complex64::new(step, 0.0), &self.grads[k]);
            let power = norm_sqr(weights);
            if power > self.budget {
                let shrink = (self.budget / power).sqrt();
                for w in weights.iter_mut() {
                    *w *= shrink;
                }
            }
        }
        false
    }

    /// Minimizes the dual `√P·‖Σ μ_k·grad_k‖ − Σ μ_k·offset_k` over the
    /// probability simplex by projected gradient with backtracking. The
    /// minimum equals the subproblem optimum; the minimizer yields the
    /// primal candidate `√P·u/‖u‖`.
    fn dual_refine(&self, max_iters: usize) -> (Vec<f64>, f64, Option<Vec<Complex64>>) {
        let num = self.grads.len();
        let dim = self.grads[0].len();
        let mut mu = vec![1.0 / num as f64; num];
        let combine = |mu: &[f64]| {
            let mut u = vec![Complex64::new(0.0, 0.0); dim];
            for (k, &m) in mu.iter().enumerate() {
                if m != 0.0 {
                    axpy(&mut u, Complex64::new(m, 0.0), &self.grads[k]);
                }
            }
            u
        };
        let value = |mu: &[f64], u: &[Complex64]| {
            self.budget.sqrt() * norm_sqr(u).sqrt()
                - mu.iter().zip(&self.offsets).map(|(m, c)| m * c).sum::<f64>()
        };
        let mut u = combine(&mu);
        let mut best_val = value(&mu, &u);
        let mut step = 1.0 / (1.0 + self.grad_norm2.iter().cloned().fold(0.0, f64::max)).sqrt();
        for _ in 0..max_iters {
            let u_norm = norm_sqr(&u).sqrt();
            let grad: Vec<f64> = (0..num)
                .map(|k| {
                    let radial = if u_norm > 1e-300 {
                        self.budget.sqrt() * cdot(&self.grads[k], &u).re / u_norm
                    } else {
                        0.0
                    };
                    radial - self.offsets[k]
                })
                .collect();
            let mut improved = false;
            for _ in 0..40 {
                let trial: Vec<f64> = mu.iter().zip(&grad).map(|(m, g)| m - step * g).collect();
                let trial = project_simplex(&trial);
                let u_trial = combine(&trial);
                let val = value(&trial, &u_trial);
                if val < best_val {
                    mu = trial;
                    u = u_trial;
                    best_val = val;
                    improved = true;
                    step *= 1.6;
                    break;
                }
                step *= 0.5;
                if step < 1e-240 {
                    break;
                }
            }
            if !improved {
                break;
            }
        }
        let u_norm = norm_sqr(&u).sqrt();
        let candidate = if u_norm > 1e-300 {
            Some(scaled(&u, self.budget.sqrt() / u_norm))
        } else {
            None
        };
        (mu, best_val, candidate)
    }
}

/// Projects `weights` onto the complex span of the channel vectors
/// (modified Gram-Schmidt). Leaves every `h_kᴴw` unchanged.
fn project_onto_span(channels: &[Vec<Complex64>], weights: &[Complex64]) -> Vec<Complex64> {
    let dim = weights.len();
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for h in channels {
        let mut v = h.clone();
        for q in &basis {
            let coeff = cdot(q, &v);
            axpy(&mut v, -coeff, q);
        }
        let norm = norm_sqr(&v).sqrt();
        let scale = norm_sqr(h).sqrt();
        if norm > 1e-12 * (scale + 1e-300) {
            v = scaled(&v, 1.0 / norm);
            basis.push(v);
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    for q in &basis {
        let coeff = cdot(q, weights);
        axpy(&mut out, coeff, q);
    }
    out
}

const BISECTION_MAX: usize = 60;
const BISECTION_REL_TOL: f64 = 1e-8;
const SEARCH_MAX_ITERS: usize = 400;
const DUAL_MAX_ITERS: usize = 400;

/// Solves one SCA subproblem: maximize `r` subject to the surrogate
/// constraints at `local` and the power ball.
///
/// Returns the maximizing weights and the attained level; the weights are
/// feasible, lie in the span of the channels, and sit on the power boundary
/// whenever that does not hurt the objective.
pub fn solve_sca_subproblem(
    channels: &[Vec<Complex64>],
    noise_powers: &[f64],
    local: &[Complex64],
    budget: f64,
) -> Result<(Vec<Complex64>, f64)> {
    check_dims(channels, noise_powers, local.len())?;
    if !(budget > 0.0) {
        return Err(Error::InvalidArgument("power budget must be positive".into()));
    }
    let local_power = norm_sqr(local);
    if local_power > budget * (1.0 + POWER_TOLERANCE) {
        return Err(Error::InvalidArgument(
            "local point violates the power budget".into(),
        ));
    }
    let surrogate = Surrogate::at_local_point(channels, noise_powers, local, budget);
    // The local point satisfies its own surrogate with value equal to its
    // per-user SNRs; a zero SNR means a flat constraint nothing can lift.
    if surrogate.offsets.contains(&0.0) {
        return Ok((local.to_vec(), 0.0));
    }

    let mut best = local.to_vec();
    let (mut best_val, _) = surrogate.min_value(&best);
    // Per-constraint maxima over the ball bound the optimum from above.
    let mut upper = surrogate
        .grads
        .iter()
        .zip(&surrogate.offsets)
        .map(|(g, c)| budget.sqrt() * norm_sqr(g).sqrt() - c)
        .fold(f64::INFINITY, f64::min);

    let mut work = best.clone();
    for _ in 0..BISECTION_MAX {
        let scale = best_val.abs().max(upper.abs()).max(1e-300);
        if upper - best_val <= BISECTION_REL_TOL * scale {
            break;
        }
        let mid = 0.5 * (best_val + upper);
        if surrogate.search_level(mid, &mut work, SEARCH_MAX_ITERS) {
            let (val, _) = surrogate.min_value(&work);
            if val > best_val {
                best_val = val;
                best.copy_from_slice(&work);
            }
        } else {
            upper = mid;
            work.copy_from_slice(&best);
        }
    }

    // Dual refinement: the simplex minimizer gives both a near-exact primal
    // candidate and an upper-bound certificate.
    let (_mu, _dual_bound, candidate) = surrogate.dual_refine(DUAL_MAX_ITERS);
    if let Some(cand) = candidate {
        let (val, _) = surrogate.min_value(&cand);
        if val > best_val {
            best_val = val;
            best = cand;
        }
    }

    // Restrict to the channel span and push to the power boundary when that
    // helps; both leave feasibility intact.
    let in_span = project_onto_span(channels, &best);
    let (span_val, _) = surrogate.min_value(&in_span);
    if span_val >= best_val - 1e-12 * best_val.abs().max(1e-300) {
        best = in_span;
        best_val = span_val;
    }
    let power = norm_sqr(&best);
    if power > 0.0 && power < budget {
        let boosted = scaled(&best, (budget / power).sqrt());
        let (val, _) = surrogate.min_value(&boosted);
        if val >= best_val {
            best = boosted;
            best_val = val;
        }
    }
    Ok((best, best_val))
}

/// SCA loop for the fixed-placement beamforming problem.
///
/// Iterates [`solve_sca_subproblem`] from `initial` until the fractional
/// increase of the true worst-user SNR drops below `opts.eps`. The trace
/// holds the worst-user SNR at every iterate, never decreasing.
pub fn sca_beamform(
    channels: &[Vec<Complex64>],
    noise_powers: &[f64],
    budget: f64,
    initial: &[Complex64],
    opts: &ScaOptions,
) -> Result<ScaResult> {
    check_dims(channels, noise_powers, initial.len())?;
    if norm_sqr(initial) == 0.0 {
        return Err(Error::InvalidArgument("initial beamformer must be nonzero".into()));
    }
    if norm_sqr(initial) > budget * (1.0 + POWER_TOLERANCE) {
        return Err(Error::InvalidArgument("initial beamformer exceeds the budget".into()));
    }
    let mut weights = initial.to_vec();
    let mut trace = vec![min_snr(channels, noise_powers, &weights)?];
    for _ in 0..opts.max_iters {
        let (next, _level) = solve_sca_subproblem(channels, noise_powers, &weights, budget)?;
        let objective = min_snr(channels, noise_powers, &next)?;
        let previous = *trace.last().unwrap();
        if objective >= previous {
            weights = next;
            trace.push(objective);
        } else {
            // The surrogate is tight at the local point, so the true
            // objective cannot drop; stop if numerics say otherwise.
            trace.push(previous);
            break;
        }
        let gain = objective - previous;
        if gain <= opts.eps * previous.max(1e-300) {
            break;
        }
    }
    Ok(ScaResult { beamformer: Beamformer::new(weights, budget)?, trace })
}

/// SCA over the subspace coefficients `η` of `w = Σ_k η_k·h_k`.
///
/// The power ball becomes an ellipsoid through the channel Gram matrix; a
/// Cholesky factor (with a `1e-12·trace` ridge for near-collinear channels)
/// maps it back to a Euclidean ball so the same subproblem solver applies.
pub fn sca_beamform_subspace(
    channels: &[Vec<Complex64>],
    noise_powers: &[f64],
    budget: f64,
    opts: &ScaOptions,
) -> Result<SubspaceResult> {
    if channels.is_empty() {
        return Err(Error::DimensionMismatch("no channel vectors".into()));
    }
    let dim = channels[0].len();
    check_dims(channels, noise_powers, dim)?;
    let num = channels.len();

    // Gram matrix G[k][j] = h_k^H h_j.
    let mut gram = vec![Complex64::new(0.0, 0.0); num * num];
    for k in 0..num {
        for j in 0..num {
            gram[k * num + j] = cdot(&channels[k], &channels[j]);
        }
    }
    let trace_g: f64 = (0..num).map(|k| gram[k * num + k].re).sum();
    if trace_g <= 0.0 {
        return Err(Error::ZeroChannel);
    }
    let ridge = 1e-12 * trace_g;
    let mut regularized = gram.clone();
    for k in 0..num {
        regularized[k * num + k] += ridge;
    }
    let lower = cholesky_lower(&regularized, num).ok_or_else(|| {
        Error::InvalidArgument("channel Gram matrix is not positive definite".into())
    })?;

    // Effective channels d_k = L^{-1}·(column k of G): with ζ = L^H·η the
    // constraint value h_k^H w equals d_k^H ζ and the power proxy is ‖ζ‖².
    let mut effective: Vec<Vec<Complex64>> = Vec::with_capacity(num);
    for k in 0..num {
        let col: Vec<Complex64> = (0..num).map(|j| gram[j * num + k]).collect();
        // forward substitution L y = col
        let mut y = vec![Complex64::new(0.0, 0.0); num];
        for i in 0..num {
            let mut sum = col[i];
            for j in 0..i {
                sum -= lower[i * num + j] * y[j];
            }
            y[i] = sum / lower[i * num + i];
        }
        effective.push(y);
    }

    // Start from the matched filter to the weakest user, expressed in ζ.
    let mut weakest: Option<(usize, f64)> = None;
    for k in 0..num {
        let gain = gram[k * num + k].re / noise_powers[k];
        if gain > 0.0 {
            match weakest {
                Some((_, g)) if g <= gain => {}
                _ => weakest = Some((k, gain)),
            }
        }
    }
    let (weak, _) = weakest.ok_or(Error::ZeroChannel)?;
    let eta_scale = budget.sqrt() / gram[weak * num + weak].re.sqrt();
    let mut zeta0 = vec![Complex64::new(0.0, 0.0); num];
    for i in 0..num {
        // (L^H η0)_i = conj(L[weak][i]) · η0_weak for i ≤ weak.
        if i <= weak {
            zeta0[i] = lower[weak * num + i].conj() * eta_scale;
        }
    }
    // Guard against the ridge nudging the start outside the ball.
    let z_power = norm_sqr(&zeta0);
    if z_power > budget {
        let shrink = (budget / z_power).sqrt() * (1.0 - 1e-12);
        for z in zeta0.iter_mut() {
            *z *= shrink;
        }
    }

    let inner = sca_beamform(&effective, noise_powers, budget, &zeta0, opts)?;
    let zeta = inner.beamformer.weights();
    let eta = solve_upper_from_lower(&lower, num, zeta);

    let mut weights = vec![Complex64::new(0.0, 0.0); dim];
    for (k, &coeff) in eta.iter().enumerate() {
        axpy(&mut weights, coeff, &channels[k]);
    }
    // The ridge makes ‖ζ‖² a slight over-estimate of the true power, so the
    // reconstruction is feasible; rescale defensively all the same.
    let power = norm_sqr(&weights);
    let (weights, eta) = if power > budget {
        let shrink = (budget / power).sqrt();
        (scaled(&weights, shrink), scaled(&eta, shrink))
    } else {
        (weights, eta)
    };
    Ok(SubspaceResult {
        beamformer: Beamformer::new(weights, budget)?,
        coefficients: SubspaceCoefficients { eta },
        trace: inner.trace,
    })
}
