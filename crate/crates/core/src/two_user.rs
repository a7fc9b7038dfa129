//! Closed-form optimal beamforming for two users, and greedy placement
//! built on it.
//!
//! With two users the max-min beamforming problem has an explicit solution.
//! Writing `ĥ_i = (√P/σ_i)·h_i` and `α₁ = ‖ĥ₁‖²`, `α₂ = ‖ĥ₂‖²`,
//! `α₁₂ = ĥ₁ᴴĥ₂`:
//!
//! - if `α_i ≤ |α₁₂|` the weaker-coupled user dominates and the optimum is
//!   maximum ratio transmission to user `i`;
//! - otherwise both SNR constraints are active and the KKT system yields
//!   multipliers `μ₁ = (α₂−|α₁₂|)/(α₁+α₂−2|α₁₂|)`, `μ₂ = 1−μ₁`, the
//!   worst-user SNR `(α₁α₂−|α₁₂|²)/(α₁+α₂−2|α₁₂|)`, and a unit-norm
//!   direction mixing the two scaled channels with the phase of `α₁₂`
//!   compensated.
//!
//! Because the resulting rate is a cheap function of a placement, antenna
//! positions can be picked greedily: grow the selected set one candidate at
//! a time, always taking the position with the largest rate increment.

use num_complex::Complex64;

use crate::beamforming::Beamformer;
use crate::channel::{channel_gain, PlacementSet, PositionGrid, UserChannelModel};
use crate::math::{axpy, cdot, norm_sqr, scaled};
use crate::{Error, Result};

/// Relative slack when testing the `α_i ≤ |α₁₂|` branch condition; at the
/// exact boundary both branches agree analytically.
const BRANCH_SLACK: f64 = 1e-12;

/// Scaled two-user channel geometry: `ĥ_i = (√P/σ_i)·h_i` plus the three
/// quantities `α₁`, `α₂`, `α₁₂` the closed form depends on.
#[derive(Debug, Clone)]
pub struct TwoUserGeometry {
    pub h1_hat: Vec<Complex64>,
    pub h2_hat: Vec<Complex64>,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha12: Complex64,
    pub budget: f64,
}

/// Solution of the two-user KKT system.
#[derive(Debug, Clone)]
pub struct KktSolution {
    pub mu1: f64,
    pub mu2: f64,
    /// Lagrangian eigenvalue (distinct from the carrier wavelength).
    pub lambda_lag: f64,
    /// Unit-norm beamforming direction; the beamformer is `√P·p`.
    pub p: Vec<Complex64>,
    /// Achieved worst-user SNR.
    pub x: f64,
    /// True when both SNR constraints are active.
    pub interior: bool,
}

/// Builds the scaled geometry from raw channels and noise powers.
pub fn two_user_geometry(
    h1: &[Complex64],
    h2: &[Complex64],
    noise1: f64,
    noise2: f64,
    budget: f64,
) -> Result<TwoUserGeometry> {
    if h1.len() != h2.len() {
        return Err(Error::DimensionMismatch(format!(
            "channel lengths {} vs {}",
            h1.len(),
            h2.len()
        )));
    }
    if !(noise1 > 0.0 && noise2 > 0.0) {
        return Err(Error::InvalidArgument("noise powers must be positive".into()));
    }
    if !(budget > 0.0) {
        return Err(Error::InvalidArgument("power budget must be positive".into()));
    }
    let s1 = budget.sqrt() / noise1.sqrt();
    let s2 = budget.sqrt() / noise2.sqrt();
    let h1_hat = scaled(h1, s1);
    let h2_hat = scaled(h2, s2);
    let alpha1 = norm_sqr(&h1_hat);
    let alpha2 = norm_sqr(&h2_hat);
    let alpha12 = cdot(&h1_hat, &h2_hat);
    Ok(TwoUserGeometry { h1_hat, h2_hat, alpha1, alpha2, alpha12, budget })
}

fn first_branch(alpha: f64, cross: f64) -> bool {
    alpha <= cross + BRANCH_SLACK * alpha.max(cross)
}

/// Worst-user SNR of the optimal beamformer, as a function of the three α
/// quantities. Shared by the rate function and the greedy increments.
fn optimal_snr(alpha1: f64, alpha2: f64, cross: f64) -> f64 {
    if first_branch(alpha1, cross) {
        alpha1
    } else if first_branch(alpha2, cross) {
        alpha2
    } else {
        let denom = alpha1 + alpha2 - 2.0 * cross;
        debug_assert!(denom > 0.0, "interior branch requires a positive denominator");
        (alpha1 * alpha2 - cross * cross) / denom
    }
}

/// Maximum multicast rate for the geometry, bits/s/Hz.
pub fn two_user_rate(geometry: &TwoUserGeometry) -> f64 {
    let snr = optimal_snr(geometry.alpha1, geometry.alpha2, geometry.alpha12.norm());
    (1.0 + snr).log2()
}

/// Solves the KKT system for the geometry.
pub fn kkt_solution(geometry: &TwoUserGeometry) -> Result<KktSolution> {
    let TwoUserGeometry { h1_hat, h2_hat, alpha1, alpha2, alpha12, .. } = geometry;
    let (alpha1, alpha2) = (*alpha1, *alpha2);
    let cross = alpha12.norm();
    if alpha1 == 0.0 && alpha2 == 0.0 {
        return Err(Error::ZeroChannel);
    }
    let mrt = |h: &[Complex64], other: &[Complex64]| -> Vec<Complex64> {
        let norm = norm_sqr(h).sqrt();
        if norm > 0.0 {
            scaled(h, 1.0 / norm)
        } else {
            scaled(other, 1.0 / norm_sqr(other).sqrt())
        }
    };
    if first_branch(alpha1, cross) {
        return Ok(KktSolution {
            mu1: 1.0,
            mu2: 0.0,
            lambda_lag: alpha1,
            p: mrt(h1_hat, h2_hat),
            x: alpha1,
            interior: false,
        });
    }
    if first_branch(alpha2, cross) {
        return Ok(KktSolution {
            mu1: 0.0,
            mu2: 1.0,
            lambda_lag: alpha2,
            p: mrt(h2_hat, h1_hat),
            x: alpha2,
            interior: false,
        });
    }
    let denom = alpha1 + alpha2 - 2.0 * cross;
    let mu1 = (alpha2 - cross) / denom;
    let mu2 = 1.0 - mu1;
    let lambda_lag = (alpha1 * alpha2 - cross * cross) / denom;
    let phase = Complex64::from_polar(1.0, -alpha12.arg());
    let inv_sqrt = 1.0 / lambda_lag.sqrt();
    let mut p = scaled(h1_hat, mu1 * inv_sqrt);
    axpy(&mut p, phase * mu2 * inv_sqrt, h2_hat);
    // The normalization is exact analytically, but near the branch seam the
    // multiplier cancellation can leave a small drift; rescale it away.
    let norm = norm_sqr(&p).sqrt();
    if norm > 0.0 {
        for z in p.iter_mut() {
            *z /= norm;
        }
    }
    Ok(KktSolution { mu1, mu2, lambda_lag, p, x: lambda_lag, interior: true })
}

/// Optimal beamformer and rate for the geometry: `w = √P·p`.
pub fn optimal_beamformer_two_user(geometry: &TwoUserGeometry) -> Result<(Beamformer, f64)> {
    let kkt = kkt_solution(geometry)?;
    let weights = scaled(&kkt.p, geometry.budget.sqrt());
    let rate = (1.0 + kkt.x).log2();
    Ok((Beamformer::new(weights, geometry.budget)?, rate))
}

/// Outcome of the greedy placement pass.
#[derive(Debug, Clone)]
pub struct GreedyOutcome {
    pub placement: PlacementSet,
    pub beamformer: Beamformer,
    pub rate: f64,
}

/// Greedy antenna placement for exactly two users.
///
/// Starting from the empty set (rate 0), each of the `N` steps adds the
/// candidate position with the largest rate increment, ties going to the
/// lowest grid index; selected candidates leave the pool. The final
/// beamformer comes from the closed form on the selected set.
pub fn greedy_placement(
    users: &[UserChannelModel],
    grid: &PositionGrid,
    num_antennas: usize,
    budget: f64,
) -> Result<GreedyOutcome> {
    if users.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "greedy placement needs exactly two users, got {}",
            users.len()
        )));
    }
    if num_antennas == 0 || num_antennas > grid.len() {
        return Err(Error::InvalidPlacement(format!(
            "cannot place {num_antennas} antennas on {} candidates",
            grid.len()
        )));
    }
    let noise1 = users[0].noise_power;
    let noise2 = users[1].noise_power;
    // Per-candidate scaled gains so every increment is O(1).
    let s1 = budget / noise1;
    let s2 = budget / noise2;
    let s12 = budget / (noise1 * noise2).sqrt();
    let gains: Vec<(f64, f64, Complex64)> = (0..grid.len())
        .map(|m| {
            let g1 = channel_gain(&users[0], grid.position(m), grid.wavelength());
            let g2 = channel_gain(&users[1], grid.position(m), grid.wavelength());
            (s1 * g1.norm_sqr(), s2 * g2.norm_sqr(), s12 * g1.conj() * g2)
        })
        .collect();

    let mut selected: Vec<usize> = Vec::with_capacity(num_antennas);
    let mut alpha1 = 0.0;
    let mut alpha2 = 0.0;
    let mut alpha12 = Complex64::new(0.0, 0.0);
    for _ in 0..num_antennas {
        let mut best: Option<(usize, f64)> = None;
        for (m, g) in gains.iter().enumerate() {
            if selected.contains(&m) {
                continue;
            }
            let snr = optimal_snr(alpha1 + g.0, alpha2 + g.1, (alpha12 + g.2).norm());
            match best {
                Some((_, s)) if s >= snr => {}
                _ => best = Some((m, snr)),
            }
        }
        let (chosen, _) = best.expect("candidate pool cannot be empty");
        alpha1 += gains[chosen].0;
        alpha2 += gains[chosen].1;
        alpha12 += gains[chosen].2;
        selected.push(chosen);
    }

    let placement = PlacementSet::new(selected, grid.len())?;
    let h1 = crate::channel::channel_vector(&users[0], &placement, grid)?;
    let h2 = crate::channel::channel_vector(&users[1], &placement, grid)?;
    let geometry = two_user_geometry(&h1, &h2, noise1, noise2, budget)?;
    let (beamformer, rate) = optimal_beamformer_two_user(&geometry)?;
    Ok(GreedyOutcome { placement, beamformer, rate })
}
