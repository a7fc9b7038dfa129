//! Antenna position optimization and the outer alternating loop.
//!
//! For a fixed beamformer, each antenna position is optimized in turn by an
//! exhaustive scan over the free grid points (the single-variable problem is
//! discrete and tiny), sweeping antennas `1..N` until the objective stalls.
//! The joint problem alternates this sweep with the SCA beamforming solver;
//! both halves never decrease the worst-user SNR, so the rate trace is
//! monotone and the loop terminates.
//!
//! All searches run off a precomputed `M × K` table of channel gains, built
//! once per scenario, so a candidate evaluation costs `O(N·K)` regardless of
//! how many paths the channel model carries.

use num_complex::Complex64;
use rand::Rng;

use crate::beamforming::{
    matched_filter_weakest, sca_beamform, snr_to_rate, Beamformer, ScaOptions,
};
use crate::channel::{channel_gain, PlacementSet, PositionGrid, UserChannelModel};
use crate::{Error, Result};

/// Channel gains of every user at every candidate position, plus noise
/// powers. Immutable once built; shared freely across searches.
#[derive(Debug, Clone)]
pub struct GainTable {
    /// Row-major `[candidate][user]`.
    gains: Vec<Complex64>,
    noise_powers: Vec<f64>,
    num_candidates: usize,
    num_users: usize,
}

impl GainTable {
    pub fn new(users: &[UserChannelModel], grid: &PositionGrid) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::InvalidArgument("need at least one user".into()));
        }
        let num_candidates = grid.len();
        let num_users = users.len();
        let mut gains = Vec::with_capacity(num_candidates * num_users);
        for m in 0..num_candidates {
            let position = grid.position(m);
            for user in users {
                gains.push(channel_gain(user, position, grid.wavelength()));
            }
        }
        Ok(Self {
            gains,
            noise_powers: users.iter().map(|u| u.noise_power).collect(),
            num_candidates,
            num_users,
        })
    }

    pub fn num_candidates(&self) -> usize {
        self.num_candidates
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn noise_powers(&self) -> &[f64] {
        &self.noise_powers
    }

    /// Gain of `user` at grid point `candidate`.
    pub fn gain(&self, candidate: usize, user: usize) -> Complex64 {
        self.gains[candidate * self.num_users + user]
    }

    /// Channel vectors for a placement, entry order following the placement.
    pub fn channels_for(&self, placement: &PlacementSet) -> Vec<Vec<Complex64>> {
        (0..self.num_users)
            .map(|k| {
                placement.indices().iter().map(|&m| self.gain(m, k)).collect()
            })
            .collect()
    }

    /// Worst-user SNR of `weights` on the placement given by `indices`.
    fn min_snr_at(&self, indices: &[usize], weights: &[Complex64]) -> f64 {
        let mut worst = f64::INFINITY;
        for k in 0..self.num_users {
            let mut inner = Complex64::new(0.0, 0.0);
            for (n, &m) in indices.iter().enumerate() {
                inner += self.gain(m, k).conj() * weights[n];
            }
            let snr = inner.norm_sqr() / self.noise_powers[k];
            if snr < worst {
                worst = snr;
            }
        }
        worst
    }

    /// Upper bound on any achievable worst-user SNR: each user cannot beat
    /// the matched filter on the full grid.
    pub fn snr_upper_bound(&self, budget: f64) -> f64 {
        (0..self.num_users)
            .map(|k| {
                let energy: f64 =
                    (0..self.num_candidates).map(|m| self.gain(m, k).norm_sqr()).sum();
                budget * energy / self.noise_powers[k]
            })
            .fold(0.0, f64::max)
    }
}

/// Best grid point for one antenna with every other antenna fixed.
///
/// Scans every admissible candidate (all grid points not taken by the other
/// antennas, including the antenna's current spot) and returns the index
/// maximizing the worst-user SNR; ties go to the lowest grid index.
pub fn best_single_position(
    table: &GainTable,
    placement: &PlacementSet,
    weights: &[Complex64],
    antenna: usize,
) -> Result<usize> {
    if antenna >= placement.len() {
        return Err(Error::InvalidArgument(format!(
            "antenna {antenna} out of range for {} antennas",
            placement.len()
        )));
    }
    if weights.len() != placement.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights vs {} antennas",
            weights.len(),
            placement.len()
        )));
    }
    let mut scratch: Vec<usize> = placement.indices().to_vec();
    let mut best_index = scratch[antenna];
    let mut best_value = f64::NEG_INFINITY;
    for candidate in 0..table.num_candidates() {
        let occupied = scratch
            .iter()
            .enumerate()
            .any(|(i, &m)| i != antenna && m == candidate);
        if occupied {
            continue;
        }
        scratch[antenna] = candidate;
        let value = table.min_snr_at(&scratch, weights);
        if value > best_value {
            best_value = value;
            best_index = candidate;
        }
    }
    Ok(best_index)
}

const MAX_SWEEPS: usize = 100;

/// Element-wise placement optimization for a fixed beamformer.
///
/// Sweeps antennas in ascending order, replacing each with its best single
/// position, until a sweep's fractional objective increase drops below
/// `eps` (or nothing moves). The objective never decreases.
pub fn optimize_positions(
    table: &GainTable,
    placement: &PlacementSet,
    weights: &[Complex64],
    eps: f64,
) -> Result<PlacementSet> {
    let mut current = placement.clone();
    let mut objective = table.min_snr_at(current.indices(), weights);
    for _ in 0..MAX_SWEEPS {
        let mut moved = false;
        for antenna in 0..current.len() {
            let best = best_single_position(table, &current, weights, antenna)?;
            if best != current.indices()[antenna] {
                current.set_index(antenna, best);
                moved = true;
            }
        }
        let updated = table.min_snr_at(current.indices(), weights);
        debug_assert!(updated >= objective, "element-wise sweep decreased the objective");
        let gain = updated - objective;
        objective = updated;
        if !moved || gain <= eps * objective.max(1e-300) {
            break;
        }
    }
    Ok(current)
}

/// Stopping rule for the alternating optimization.
#[derive(Debug, Clone, Copy)]
pub struct AoOptions {
    /// Stop when the fractional rate increase of a full round drops below
    /// this.
    pub eps: f64,
    /// Hard cap on outer rounds.
    pub max_rounds: usize,
    /// Settings for the inner SCA solver.
    pub sca: ScaOptions,
}

impl Default for AoOptions {
    fn default() -> Self {
        Self { eps: 1e-4, max_rounds: 30, sca: ScaOptions::default() }
    }
}

/// Final state of the alternating optimization.
#[derive(Debug, Clone)]
pub struct AoState {
    pub placement: PlacementSet,
    pub beamformer: Beamformer,
    /// Outer rounds executed.
    pub rounds: usize,
    /// Multicast rate before any round and after each round; non-decreasing.
    pub trace: Vec<f64>,
}

impl AoState {
    pub fn rate(&self) -> f64 {
        *self.trace.last().unwrap()
    }

    /// First round index whose fractional rate increase fell below `eps`,
    /// if any.
    pub fn converged_round(&self, eps: f64) -> Option<usize> {
        self.trace.windows(2).position(|pair| {
            pair[1] - pair[0] <= eps * pair[0].max(1e-300)
        }).map(|i| i + 1)
    }
}

/// Alternating optimization over (beamformer, placement).
///
/// Each round solves the fixed-placement beamforming problem by SCA warm-
/// started at the previous beamformer, then re-optimizes positions
/// element-wise under the new beamformer.
pub fn ao_joint(
    table: &GainTable,
    budget: f64,
    placement0: &PlacementSet,
    initial_weights: &[Complex64],
    opts: &AoOptions,
) -> Result<AoState> {
    if placement0.indices().iter().any(|&m| m >= table.num_candidates()) {
        return Err(Error::InvalidPlacement("placement index outside the gain table".into()));
    }
    let mut placement = placement0.clone();
    let mut weights = initial_weights.to_vec();
    let mut trace = vec![snr_to_rate(table.min_snr_at(placement.indices(), &weights))];
    let mut rounds = 0;
    let rate_cap = snr_to_rate(table.snr_upper_bound(budget));
    for _ in 0..opts.max_rounds {
        let channels = table.channels_for(&placement);
        let sca = sca_beamform(&channels, table.noise_powers(), budget, &weights, &opts.sca)?;
        weights = sca.beamformer.weights().to_vec();
        placement = optimize_positions(table, &placement, &weights, opts.eps)?;
        let rate = snr_to_rate(table.min_snr_at(placement.indices(), &weights));
        debug_assert!(rate <= rate_cap + 1e-9, "rate {rate} exceeds the matched-filter cap {rate_cap}");
        let previous = *trace.last().unwrap();
        trace.push(rate.max(previous));
        rounds += 1;
        if rate - previous <= opts.eps * previous.max(1e-300) {
            break;
        }
    }
    Ok(AoState {
        placement,
        beamformer: Beamformer::new(weights, budget)?,
        rounds,
        trace,
    })
}

/// Runs [`ao_joint`] from the default initialization: the given placement
/// with the matched filter to the weakest user at full power.
pub fn ao_joint_from_placement(
    table: &GainTable,
    budget: f64,
    placement0: &PlacementSet,
    opts: &AoOptions,
) -> Result<AoState> {
    let channels = table.channels_for(placement0);
    let initial = matched_filter_weakest(&channels, table.noise_powers(), budget)?;
    ao_joint(table, budget, placement0, &initial, opts)
}

/// Draws `n` distinct grid indices uniformly at random.
pub fn random_distinct_placement(
    rng: &mut impl Rng,
    grid_len: usize,
    n: usize,
) -> Result<PlacementSet> {
    if n == 0 || n > grid_len {
        return Err(Error::InvalidPlacement(format!(
            "cannot place {n} antennas on {grid_len} candidates"
        )));
    }
    // Partial Fisher-Yates over the index pool.
    let mut pool: Vec<usize> = (0..grid_len).collect();
    for i in 0..n {
        let j = rng.gen_range(i..grid_len);
        pool.swap(i, j);
    }
    PlacementSet::new(pool[..n].to_vec(), grid_len)
}
