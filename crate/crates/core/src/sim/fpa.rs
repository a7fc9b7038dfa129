//! Fixed-position antenna baseline: a half-wavelength uniform linear array
//! centered at the origin along the x-axis.

use num_complex::Complex64;

use crate::beamforming::{
    matched_filter_weakest, multicast_rate, sca_beamform, Beamformer, ScaOptions,
};
use crate::channel::{channel_vector_at, PlacementSet, PositionGrid, UserChannelModel};
use crate::placement::GainTable;
use crate::two_user::{optimal_beamformer_two_user, two_user_geometry};
use crate::Result;

/// Coordinates of the `n`-element reference array (meters).
pub fn ula_coordinates(num_antennas: usize, wavelength: f64) -> Vec<[f64; 2]> {
    let center = 0.5 * (num_antennas as f64 - 1.0);
    (0..num_antennas)
        .map(|i| [(i as f64 - center) * wavelength / 2.0, 0.0])
        .collect()
}

/// Beamforms over the true (possibly off-grid) array coordinates.
///
/// Two users get the closed form; more users run the SCA solver from the
/// matched filter to the weakest user.
pub fn fpa_baseline(
    users: &[UserChannelModel],
    num_antennas: usize,
    wavelength: f64,
    budget: f64,
) -> Result<(Beamformer, f64)> {
    let coords = ula_coordinates(num_antennas, wavelength);
    let channels: Vec<Vec<Complex64>> = users
        .iter()
        .map(|u| channel_vector_at(u, &coords, wavelength))
        .collect();
    let noise: Vec<f64> = users.iter().map(|u| u.noise_power).collect();
    if users.len() == 2 {
        let geometry = two_user_geometry(&channels[0], &channels[1], noise[0], noise[1], budget)?;
        let (beamformer, rate) = optimal_beamformer_two_user(&geometry)?;
        return Ok((beamformer, rate));
    }
    let start = matched_filter_weakest(&channels, &noise, budget)?;
    let result = sca_beamform(&channels, &noise, budget, &start, &ScaOptions::default())?;
    let rate = multicast_rate(&channels, &noise, result.beamformer.weights())?;
    Ok((result.beamformer, rate))
}

/// Distinct grid indices nearest (in order) to the reference array
/// coordinates; ties go to the lowest index, collisions to the next-nearest
/// free point.
pub fn snap_ula_to_grid(grid: &PositionGrid, num_antennas: usize) -> Result<PlacementSet> {
    let coords = ula_coordinates(num_antennas, grid.wavelength());
    let mut taken: Vec<usize> = Vec::with_capacity(num_antennas);
    for coord in coords {
        let index = grid.nearest_free_index(coord, &taken).ok_or_else(|| {
            crate::Error::InvalidPlacement("grid has fewer points than antennas".into())
        })?;
        taken.push(index);
    }
    PlacementSet::new(taken, grid.len())
}

/// Rate of the baseline restricted to its nearest grid points, computed
/// with the same SCA solver and initialization the joint optimizer uses, so
/// the dominance comparison is apples to apples.
pub fn fpa_on_grid_rate(
    table: &GainTable,
    grid: &PositionGrid,
    num_antennas: usize,
    budget: f64,
    opts: &ScaOptions,
) -> Result<(PlacementSet, f64)> {
    let placement = snap_ula_to_grid(grid, num_antennas)?;
    let channels = table.channels_for(&placement);
    let start = matched_filter_weakest(&channels, table.noise_powers(), budget)?;
    let result = sca_beamform(&channels, table.noise_powers(), budget, &start, opts)?;
    let rate = multicast_rate(&channels, table.noise_powers(), result.beamformer.weights())?;
    Ok((placement, rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::snr_to_rate;
    use crate::channel::{sample_scenario, ScenarioRng};
    use crate::math::norm_sqr;

    #[test]
    fn ula_is_centered_and_half_wavelength() {
        let coords = ula_coordinates(4, 0.06);
        assert_eq!(coords.len(), 4);
        let sum_x: f64 = coords.iter().map(|c| c[0]).sum();
        assert!(sum_x.abs() < 1e-15);
        for pair in coords.windows(2) {
            assert!((pair[1][0] - pair[0][0] - 0.03).abs() < 1e-15);
            assert_eq!(pair[0][1], 0.0);
        }
    }

    #[test]
    fn single_user_baseline_is_matched_filter() {
        let users =
            sample_scenario(&ScenarioRng::new(1, 0), 1, 4, 150.0, 5.0, 3.16e-13).unwrap();
        let wavelength = 0.06;
        let budget = 0.01;
        let (_bf, rate) = fpa_baseline(&users, 4, wavelength, budget).unwrap();
        let coords = ula_coordinates(4, wavelength);
        let h = channel_vector_at(&users[0], &coords, wavelength);
        let expected = snr_to_rate(budget * norm_sqr(&h) / users[0].noise_power);
        assert!((rate - expected).abs() < 1e-9 * (1.0 + expected));
    }

    #[test]
    fn two_user_closed_form_agrees_with_sca() {
        let users =
            sample_scenario(&ScenarioRng::new(2, 0), 2, 4, 150.0, 5.0, 3.16e-13).unwrap();
        let wavelength = 0.06;
        let budget = 0.01;
        let (_bf, closed) = fpa_baseline(&users, 4, wavelength, budget).unwrap();
        let coords = ula_coordinates(4, wavelength);
        let channels: Vec<Vec<Complex64>> = users
            .iter()
            .map(|u| channel_vector_at(u, &coords, wavelength))
            .collect();
        let noise: Vec<f64> = users.iter().map(|u| u.noise_power).collect();
        let start = matched_filter_weakest(&channels, &noise, budget).unwrap();
        let sca = sca_beamform(&channels, &noise, budget, &start, &ScaOptions::tight()).unwrap();
        assert!((closed - sca.rate()).abs() <= 1e-3);
    }

    #[test]
    fn snapping_points_are_distinct_and_near() {
        let grid = PositionGrid::square(5, 0.5, 0.06).unwrap();
        let placement = snap_ula_to_grid(&grid, 4).unwrap();
        assert_eq!(placement.len(), 4);
        // The y = 0 row of the 5x5 grid is row 2 (indices 10..15); every ULA
        // x-coordinate sits a quarter wavelength from two grid columns, and
        // the tie resolves to the lower index.
        assert_eq!(placement.indices(), &[10, 11, 12, 13]);
    }
}
