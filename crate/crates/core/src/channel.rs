//! Field-response channels over a quantized transmit region.
//!
//! The transmit region is a grid of `M` candidate antenna positions spaced
//! `d` wavelengths apart. A user's channel at position `x` is the sum of
//! per-path complex gains with position-dependent phases,
//! `h(x) = Σ_ℓ σ_ℓ · exp(j·(2π/λ)·xᵀρ_ℓ)`, where `ρ_ℓ` is the unit-less
//! direction vector `[sinθ cosφ, cosθ]` of path `ℓ`. Placing `N` antennas
//! on distinct grid points yields the length-`N` channel vector used by the
//! beamforming and placement solvers.
//!
//! Scenario sampling follows a free-space path-loss model over a hexagonal
//! cell with the transmitter at the cell center; every draw is a pure
//! function of a `(seed, stream)` pair so parallel trials use disjoint,
//! reproducible streams.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Discrete candidate positions for the movable antennas.
///
/// Positions are stored in meters; `spacing_wl` is the motion step size in
/// wavelength units. Square grids enumerate row-major (row = y, column = x)
/// and are centered at the origin.
#[derive(Debug, Clone)]
pub struct PositionGrid {
    positions: Vec<[f64; 2]>,
    spacing_wl: f64,
    wavelength: f64,
}

impl PositionGrid {
    /// Builds a `side × side` grid with the given step size (in wavelengths),
    /// centered at the origin.
    pub fn square(side: usize, spacing_wl: f64, wavelength: f64) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidArgument("grid side must be positive".into()));
        }
        if spacing_wl <= 0.0 || wavelength <= 0.0 {
            return Err(Error::InvalidArgument(
                "grid spacing and wavelength must be positive".into(),
            ));
        }
        let step = spacing_wl * wavelength;
        let offset = 0.5 * (side as f64 - 1.0) * step;
        let mut positions = Vec::with_capacity(side * side);
        for row in 0..side {
            for col in 0..side {
                positions.push([col as f64 * step - offset, row as f64 * step - offset]);
            }
        }
        Ok(Self { positions, spacing_wl, wavelength })
    }

    /// Builds a grid from explicit positions, validating distinctness and
    /// that coordinate differences are integer multiples of the step.
    pub fn from_positions(
        positions: Vec<[f64; 2]>,
        spacing_wl: f64,
        wavelength: f64,
    ) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidArgument("grid must be nonempty".into()));
        }
        if spacing_wl <= 0.0 || wavelength <= 0.0 {
            return Err(Error::InvalidArgument(
                "grid spacing and wavelength must be positive".into(),
            ));
        }
        let step = spacing_wl * wavelength;
        for (i, a) in positions.iter().enumerate() {
            for b in positions.iter().skip(i + 1) {
                if a == b {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate grid position ({}, {})",
                        a[0], a[1]
                    )));
                }
            }
            for axis in 0..2 {
                let multiples = (a[axis] - positions[0][axis]) / step;
                if (multiples - multiples.round()).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "grid coordinate {} is not a multiple of the step {}",
                        a[axis], step
                    )));
                }
            }
        }
        Ok(Self { positions, spacing_wl, wavelength })
    }

    /// Number of candidate positions `M`.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Coordinates of candidate `index` in meters.
    pub fn position(&self, index: usize) -> [f64; 2] {
        self.positions[index]
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    /// Motion step size in wavelength units.
    pub fn spacing_wl(&self) -> f64 {
        self.spacing_wl
    }

    /// Carrier wavelength in meters.
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Index of the grid point nearest to `coord`, skipping `taken` indices.
    /// Ties resolve to the lowest index.
    pub fn nearest_free_index(&self, coord: [f64; 2], taken: &[usize]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (m, p) in self.positions.iter().enumerate() {
            if taken.contains(&m) {
                continue;
            }
            let d2 = (p[0] - coord[0]).powi(2) + (p[1] - coord[1]).powi(2);
            match best {
                Some((_, bd)) if d2 >= bd => {}
                _ => best = Some((m, d2)),
            }
        }
        best.map(|(m, _)| m)
    }
}

/// Ordered set of `N` distinct grid indices occupied by the antennas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementSet {
    indices: Vec<usize>,
}

impl PlacementSet {
    /// Validates distinctness and range against a grid of `grid_len` points.
    pub fn new(indices: Vec<usize>, grid_len: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidPlacement("placement must be nonempty".into()));
        }
        if indices.len() > grid_len {
            return Err(Error::InvalidPlacement(format!(
                "placement of {} antennas exceeds {} candidates",
                indices.len(),
                grid_len
            )));
        }
        for (i, &a) in indices.iter().enumerate() {
            if a >= grid_len {
                return Err(Error::InvalidPlacement(format!(
                    "index {a} out of range for {grid_len} candidates"
                )));
            }
            if indices[i + 1..].contains(&a) {
                return Err(Error::InvalidPlacement(format!("duplicate index {a}")));
            }
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Number of antennas `N`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub(crate) fn set_index(&mut self, antenna: usize, grid_index: usize) {
        self.indices[antenna] = grid_index;
    }
}

/// One resolvable propagation path: complex gain plus elevation/azimuth.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PathComponent {
    #[serde(with = "complex_parts")]
    pub gain: Complex64,
    /// Elevation angle in radians, in `[0, π)`.
    pub elevation: f64,
    /// Azimuth angle in radians, in `[0, π)`.
    pub azimuth: f64,
}

/// Serializes a complex gain as `{ gain_re, gain_im }` so scenario files are
/// plain JSON numbers.
mod complex_parts {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Parts {
        gain_re: f64,
        gain_im: f64,
    }

    pub fn serialize<S: Serializer>(value: &Complex64, ser: S) -> Result<S::Ok, S::Error> {
        Parts { gain_re: value.re, gain_im: value.im }.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Complex64, D::Error> {
        let parts = Parts::deserialize(de)?;
        Ok(Complex64::new(parts.gain_re, parts.gain_im))
    }
}

impl PathComponent {
    pub fn new(gain: Complex64, elevation: f64, azimuth: f64) -> Self {
        Self { gain, elevation, azimuth }
    }

    /// Direction vector `[sinθ cosφ, cosθ]` derived from the angles.
    pub fn direction(&self) -> [f64; 2] {
        [
            self.elevation.sin() * self.azimuth.cos(),
            self.elevation.cos(),
        ]
    }
}

/// Multipath description of one user's channel plus its noise power.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserChannelModel {
    pub paths: Vec<PathComponent>,
    /// Receiver noise power in watts.
    pub noise_power: f64,
}

impl UserChannelModel {
    pub fn new(paths: Vec<PathComponent>, noise_power: f64) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidArgument("a user needs at least one path".into()));
        }
        if !(noise_power > 0.0) {
            return Err(Error::InvalidArgument("noise power must be positive".into()));
        }
        Ok(Self { paths, noise_power })
    }

    /// True when the channel has a single path (line-of-sight).
    pub fn is_los(&self) -> bool {
        self.paths.len() == 1
    }
}

/// Seeded, stream-addressable random source.
///
/// The same `(seed, stream)` pair reproduces identical draws bit for bit;
/// distinct streams under one seed are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioRng {
    pub seed: u64,
    pub stream: u64,
}

impl ScenarioRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Channel gain `h(x) = Σ_ℓ σ_ℓ · exp(j·(2π/λ)·xᵀρ_ℓ)` at a position.
pub fn channel_gain(model: &UserChannelModel, position: [f64; 2], wavelength: f64) -> Complex64 {
    debug_assert!(wavelength > 0.0);
    let wave_number = 2.0 * PI / wavelength;
    let mut sum = Complex64::new(0.0, 0.0);
    for path in &model.paths {
        let dir = path.direction();
        let phase = wave_number * (position[0] * dir[0] + position[1] * dir[1]);
        sum += path.gain * Complex64::from_polar(1.0, phase);
    }
    sum
}

/// Channel vector over a placement: entry `n` is the gain at the `n`th
/// occupied grid point, in placement order.
pub fn channel_vector(
    model: &UserChannelModel,
    placement: &PlacementSet,
    grid: &PositionGrid,
) -> Result<Vec<Complex64>> {
    placement
        .indices()
        .iter()
        .map(|&m| {
            if m >= grid.len() {
                return Err(Error::InvalidPlacement(format!(
                    "index {m} out of range for {} candidates",
                    grid.len()
                )));
            }
            Ok(channel_gain(model, grid.position(m), grid.wavelength()))
        })
        .collect()
}

/// Channel vector at arbitrary (possibly off-grid) coordinates.
pub fn channel_vector_at(
    model: &UserChannelModel,
    coords: &[[f64; 2]],
    wavelength: f64,
) -> Vec<Complex64> {
    coords.iter().map(|&c| channel_gain(model, c, wavelength)).collect()
}

/// Unit-modulus steering vector for a single propagation direction: entry
/// `n` is `exp(j·(2π/λ)·t_nᵀρ)`.
pub fn steering_vector(
    direction: [f64; 2],
    placement: &PlacementSet,
    grid: &PositionGrid,
    wavelength: f64,
) -> Result<Vec<Complex64>> {
    let wave_number = 2.0 * PI / wavelength;
    placement
        .indices()
        .iter()
        .map(|&m| {
            if m >= grid.len() {
                return Err(Error::InvalidPlacement(format!(
                    "index {m} out of range for {} candidates",
                    grid.len()
                )));
            }
            let p = grid.position(m);
            Ok(Complex64::from_polar(
                1.0,
                wave_number * (p[0] * direction[0] + p[1] * direction[1]),
            ))
        })
        .collect()
}

/// Linear-scale mean path gain from the free-space path-loss model
/// `-10·log10(μ) = 92.5 + 20·log10(f₀ GHz) + 20·log10(d km)`.
pub fn path_loss_mu(carrier_ghz: f64, distance_km: f64) -> f64 {
    let loss_db = 92.5 + 20.0 * carrier_ghz.log10() + 20.0 * distance_km.log10();
    10f64.powf(-loss_db / 10.0)
}

/// Draws `num_paths` complex gains with total mean energy `mu`
/// (each path `~ CN(0, mu / num_paths)`).
pub fn sample_path_gains(rng: &mut impl Rng, mu: f64, num_paths: usize) -> Vec<Complex64> {
    let per_component = Normal::new(0.0, (mu / (2.0 * num_paths as f64)).sqrt()).unwrap();
    (0..num_paths)
        .map(|_| Complex64::new(per_component.sample(rng), per_component.sample(rng)))
        .collect()
}

/// Uniform sample from a regular hexagon of circumradius `radius` centered
/// at the origin (vertices on the x-axis), by rejection from the bounding
/// box.
pub fn sample_hexagon_point(rng: &mut impl Rng, radius: f64) -> [f64; 2] {
    let half_height = radius * 3f64.sqrt() / 2.0;
    loop {
        let x = rng.gen_range(-radius..radius);
        let y = rng.gen_range(-half_height..half_height);
        if 3f64.sqrt() * x.abs() + y.abs() <= 3f64.sqrt() * radius {
            return [x, y];
        }
    }
}

/// Minimum transmitter-to-user distance in meters, to keep the path-loss
/// model away from its singularity at zero range.
pub const MIN_USER_DISTANCE_M: f64 = 1.0;

/// Samples `num_users` multipath channel models.
///
/// Users fall uniformly in a hexagonal cell of the given radius with the
/// transmitter at the center; per-path gains are complex Gaussian with
/// total mean energy set by the free-space path loss at the user's
/// distance; elevation and azimuth are uniform on `[0, π)`.
pub fn sample_scenario(
    rng: &ScenarioRng,
    num_users: usize,
    paths_per_user: usize,
    cell_radius_m: f64,
    carrier_ghz: f64,
    noise_power: f64,
) -> Result<Vec<UserChannelModel>> {
    if num_users == 0 || paths_per_user == 0 {
        return Err(Error::InvalidArgument("need at least one user and one path".into()));
    }
    if cell_radius_m <= 0.0 {
        return Err(Error::InvalidArgument("cell radius must be positive".into()));
    }
    let mut rng = rng.rng();
    let mut users = Vec::with_capacity(num_users);
    for _ in 0..num_users {
        let point = sample_hexagon_point(&mut rng, cell_radius_m);
        let distance_m = (point[0].powi(2) + point[1].powi(2)).sqrt().max(MIN_USER_DISTANCE_M);
        let mu = path_loss_mu(carrier_ghz, distance_m / 1000.0);
        let gains = sample_path_gains(&mut rng, mu, paths_per_user);
        let paths = gains
            .into_iter()
            .map(|gain| {
                PathComponent::new(gain, rng.gen_range(0.0..PI), rng.gen_range(0.0..PI))
            })
            .collect();
        users.push(UserChannelModel::new(paths, noise_power)?);
    }
    Ok(users)
}

/// Samples a two-user line-of-sight pair with equal path energy.
///
/// Both users sit at the same distance from the transmitter (one distance
/// drawn from the hexagonal cell), so the single-path energies match; each
/// path carries an independent uniform phase, and directions are uniform on
/// `[0, π)` per angle.
pub fn sample_los_pair(
    rng: &ScenarioRng,
    cell_radius_m: f64,
    carrier_ghz: f64,
    noise_power: f64,
) -> Result<Vec<UserChannelModel>> {
    if cell_radius_m <= 0.0 {
        return Err(Error::InvalidArgument("cell radius must be positive".into()));
    }
    let mut rng = rng.rng();
    let point = sample_hexagon_point(&mut rng, cell_radius_m);
    let distance_m = (point[0].powi(2) + point[1].powi(2)).sqrt().max(MIN_USER_DISTANCE_M);
    let kappa = path_loss_mu(carrier_ghz, distance_m / 1000.0);
    let amplitude = kappa.sqrt();
    let mut users = Vec::with_capacity(2);
    for _ in 0..2 {
        let phase = rng.gen_range(0.0..(2.0 * PI));
        let path = PathComponent::new(
            Complex64::from_polar(amplitude, phase),
            rng.gen_range(0.0..PI),
            rng.gen_range(0.0..PI),
        );
        users.push(UserChannelModel::new(vec![path], noise_power)?);
    }
    Ok(users)
}

/// Saves a scenario as JSON so a realization can be replayed exactly.
pub fn write_scenario(path: &std::path::Path, users: &[UserChannelModel]) -> Result<()> {
    let text = serde_json::to_string_pretty(users)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Loads a scenario previously written by [`write_scenario`].
pub fn read_scenario(path: &std::path::Path) -> Result<Vec<UserChannelModel>> {
    let text = std::fs::read_to_string(path)?;
    let users: Vec<UserChannelModel> = serde_json::from_str(&text)?;
    for user in &users {
        if user.paths.is_empty() || !(user.noise_power > 0.0) {
            return Err(Error::InvalidArgument("malformed scenario record".into()));
        }
    }
    Ok(users)
}
