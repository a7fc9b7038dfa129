//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `cargo test --test acceptance -- --nocapture`).
//!
//! ```text
//! cargo test -p macast --test acceptance
//! ```

use std::f64::consts::PI;
use std::time::Instant;

use macast::beamforming::{
    matched_filter_weakest, min_snr, sca_beamform, snr_to_rate, ScaOptions,
};
use macast::channel::{
    channel_vector, sample_los_pair, sample_scenario, PositionGrid, ScenarioRng,
};
use macast::los_bab::{
    bab_search, binomial, build_coupling, exhaustive_search, full_tree_node_count,
    los_problem_from_users, los_rate, objective_increment, CouplingMatrix, SelectionState,
    SelectionVector, EXHAUSTIVE_CAP,
};
use macast::placement::{ao_joint, random_distinct_placement, AoOptions, GainTable};
use macast::sim::{
    dbm_to_watts, fpa_on_grid_rate, run_experiment, snap_ula_to_grid, wavelength_m,
    ExperimentConfig, ExperimentKind,
};
use macast::two_user::{
    greedy_placement, kkt_solution, optimal_beamformer_two_user, two_user_geometry,
};

use num_complex::Complex64;
use rand::Rng;

const NOISE_W: f64 = 3.1622776601683792e-13; // -95 dBm
const BUDGET_W: f64 = 0.01; // 10 dBm

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!("[{}] criterion {id}: {name} — {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn grid_for(m: usize) -> PositionGrid {
    let wavelength = wavelength_m(5.0);
    let side = (m as f64).sqrt().round() as usize;
    if side * side == m {
        PositionGrid::square(side, 0.5, wavelength).unwrap()
    } else {
        // Rectangular layout rows x cols at the same half-wavelength pitch.
        let (rows, cols) = match m {
            6 => (2, 3),
            12 => (3, 4),
            other => (1, other),
        };
        let step = 0.5 * wavelength;
        let mut positions = Vec::with_capacity(m);
        for r in 0..rows {
            for c in 0..cols {
                positions.push([c as f64 * step, r as f64 * step]);
            }
        }
        PositionGrid::from_positions(positions, 0.5, wavelength).unwrap()
    }
}

fn random_direction(rng: &mut impl Rng) -> [f64; 2] {
    let theta: f64 = rng.gen_range(0.0..PI);
    let phi: f64 = rng.gen_range(0.0..PI);
    [theta.sin() * phi.cos(), theta.cos()]
}

/// The 200-instance LoS pool shared by criteria 1 and 2.
fn los_instance_pool() -> Vec<(usize, usize, CouplingMatrix)> {
    let sizes = [6usize, 9, 12, 16];
    let antenna_counts = [2usize, 3, 4];
    let mut rng = ScenarioRng::new(20_260_811, 0).rng();
    let mut instances = Vec::with_capacity(200);
    for i in 0..200 {
        let m = sizes[i % sizes.len()];
        let n = antenna_counts[(i / sizes.len()) % antenna_counts.len()];
        let grid = grid_for(m);
        let coupling = build_coupling(
            &grid,
            random_direction(&mut rng),
            random_direction(&mut rng),
            grid.wavelength(),
        );
        instances.push((m, n, coupling));
    }
    instances
}

#[test]
fn criterion_1_bab_exactness() {
    let started = Instant::now();
    let mut worst_gap = 0.0f64;
    for (m, n, coupling) in los_instance_pool() {
        let bab = bab_search(&coupling, n).unwrap();
        let exhaustive = exhaustive_search(&coupling, n, EXHAUSTIVE_CAP).unwrap();
        let scale = exhaustive.objective.abs().max(1.0);
        let gap = (bab.objective - exhaustive.objective).abs() / scale;
        worst_gap = worst_gap.max(gap);
        assert!(
            gap <= 1e-9,
            "M={m} N={n}: bab {} vs exhaustive {}",
            bab.objective,
            exhaustive.objective
        );
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        1,
        "branch-and-bound exactness",
        worst_gap <= 1e-9 && elapsed < 10.0,
        &format!("200 instances, worst relative gap {worst_gap:.2e}, {elapsed:.2} s"),
    );
}

#[test]
fn criterion_2_pruning_benefit() {
    // Mean visited nodes vs the full-tree count, grouped by M.
    let mut by_m: Vec<(usize, f64, f64, usize)> = Vec::new(); // (m, sum_visited, sum_full, count)
    for (m, n, coupling) in los_instance_pool() {
        let bab = bab_search(&coupling, n).unwrap();
        let full = full_tree_node_count(m, n) as f64;
        match by_m.iter_mut().find(|(mm, ..)| *mm == m) {
            Some((_, v, f, c)) => {
                *v += bab.visited_nodes as f64;
                *f += full;
                *c += 1;
            }
            None => by_m.push((m, bab.visited_nodes as f64, full, 1)),
        }
    }
    by_m.sort_by_key(|&(m, ..)| m);
    let mut gaps = Vec::new();
    let mut all_below = true;
    for &(m, visited, full, count) in &by_m {
        let mean_visited = visited / count as f64;
        let mean_full = full / count as f64;
        all_below &= mean_visited < mean_full;
        gaps.push((m, mean_full - mean_visited));
    }
    let widening = gaps.windows(2).all(|w| w[1].1 > w[0].1);
    let detail = gaps
        .iter()
        .map(|(m, g)| format!("M={m}: gap {g:.1}"))
        .collect::<Vec<_>>()
        .join(", ");
    report(2, "pruning benefit", all_below && widening, &detail);
}

#[test]
fn criterion_3_closed_form_vs_sca() {
    let grid = grid_for(25);
    let mut rng = ScenarioRng::new(33, 0).rng();
    let mut worst_abs = 0.0f64;
    let mut worst_signed = 0.0f64;
    for trial in 0..100u64 {
        let users =
            sample_scenario(&ScenarioRng::new(5000 + trial, 0), 2, 4, 150.0, 5.0, NOISE_W)
                .unwrap();
        let placement = random_distinct_placement(&mut rng, grid.len(), 4).unwrap();
        let h1 = channel_vector(&users[0], &placement, &grid).unwrap();
        let h2 = channel_vector(&users[1], &placement, &grid).unwrap();
        let geometry =
            two_user_geometry(&h1, &h2, users[0].noise_power, users[1].noise_power, BUDGET_W)
                .unwrap();
        let (_bf, closed_rate) = optimal_beamformer_two_user(&geometry).unwrap();
        let channels = vec![h1, h2];
        let noise = vec![users[0].noise_power, users[1].noise_power];
        let start = matched_filter_weakest(&channels, &noise, BUDGET_W).unwrap();
        let sca =
            sca_beamform(&channels, &noise, BUDGET_W, &start, &ScaOptions::tight()).unwrap();
        let gap = closed_rate - sca.rate();
        worst_abs = worst_abs.max(gap.abs());
        worst_signed = worst_signed.min(gap);
        assert!(gap.abs() <= 1e-3, "trial {trial}: |closed - sca| = {}", gap.abs());
        assert!(gap >= -1e-3, "trial {trial}: SCA exceeded the closed form by {}", -gap);
    }
    report(
        3,
        "closed form vs numerical SCA",
        true,
        &format!("100 instances, worst |gap| {worst_abs:.2e}, worst signed {worst_signed:.2e}"),
    );
}

#[test]
fn criterion_4_kkt_certificate() {
    let grid = grid_for(25);
    let mut rng = ScenarioRng::new(44, 0).rng();
    let mut interior_count = 0;
    let mut worst_residual = 0.0f64;
    let mut worst_balance = 0.0f64;
    for trial in 0..100u64 {
        let users =
            sample_scenario(&ScenarioRng::new(7000 + trial, 0), 2, 4, 150.0, 5.0, NOISE_W)
                .unwrap();
        let placement = random_distinct_placement(&mut rng, grid.len(), 4).unwrap();
        let h1 = channel_vector(&users[0], &placement, &grid).unwrap();
        let h2 = channel_vector(&users[1], &placement, &grid).unwrap();
        let geometry =
            two_user_geometry(&h1, &h2, users[0].noise_power, users[1].noise_power, BUDGET_W)
                .unwrap();
        let kkt = kkt_solution(&geometry).unwrap();
        assert_eq!(kkt.mu1 + kkt.mu2, 1.0, "multipliers must sum to one");
        if !kkt.interior {
            continue;
        }
        interior_count += 1;
        // Stationarity residual ||(mu1 h1 h1^H + mu2 h2 h2^H) p - lambda p||.
        let c1: Complex64 = geometry
            .h1_hat
            .iter()
            .zip(&kkt.p)
            .map(|(h, p)| h.conj() * p)
            .sum();
        let c2: Complex64 = geometry
            .h2_hat
            .iter()
            .zip(&kkt.p)
            .map(|(h, p)| h.conj() * p)
            .sum();
        let mut residual = 0.0f64;
        for i in 0..kkt.p.len() {
            let lhs = kkt.mu1 * geometry.h1_hat[i] * c1 + kkt.mu2 * geometry.h2_hat[i] * c2;
            residual += (lhs - kkt.lambda_lag * kkt.p[i]).norm_sqr();
        }
        let residual = residual.sqrt();
        worst_residual = worst_residual.max(residual);
        assert!(residual <= 1e-8, "trial {trial}: stationarity residual {residual}");
        // Balanced per-user SNRs.
        let snr1 = c1.norm_sqr();
        let snr2 = c2.norm_sqr();
        let balance = (snr1 - snr2).abs() / snr1.max(snr2);
        worst_balance = worst_balance.max(balance);
        assert!(balance <= 1e-8, "trial {trial}: SNR imbalance {balance}");
    }
    report(
        4,
        "KKT certificate",
        interior_count > 0,
        &format!(
            "{interior_count} interior cases, worst residual {worst_residual:.2e}, worst imbalance {worst_balance:.2e}"
        ),
    );
}

#[test]
fn criterion_5_ao_monotone_and_converges() {
    let grid = grid_for(25);
    let opts = AoOptions { eps: 1e-4, max_rounds: 12, ..AoOptions::default() };
    let mut converged_within_10 = 0;
    let trials = 100u64;
    for trial in 0..trials {
        let users =
            sample_scenario(&ScenarioRng::new(9000 + trial, 0), 5, 4, 150.0, 5.0, NOISE_W)
                .unwrap();
        let table = GainTable::new(&users, &grid).unwrap();
        let mut rng = ScenarioRng::new(9000 + trial, 1).rng();
        let placement = random_distinct_placement(&mut rng, grid.len(), 4).unwrap();
        let channels = table.channels_for(&placement);
        let initial = matched_filter_weakest(&channels, table.noise_powers(), BUDGET_W).unwrap();
        let state = ao_joint(&table, BUDGET_W, &placement, &initial, &opts).unwrap();
        for pair in state.trace.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-9,
                "trial {trial}: rate trace decreased {pair:?}"
            );
        }
        if let Some(round) = state.converged_round(1e-4) {
            if round <= 10 {
                converged_within_10 += 1;
            }
        }
    }
    let fraction = converged_within_10 as f64 / trials as f64;
    report(
        5,
        "alternating optimization monotone and fast",
        fraction >= 0.9,
        &format!("{converged_within_10}/{trials} trials converged within 10 rounds"),
    );
}

#[test]
fn criterion_6_ma_dominates_grid_snapped_fpa() {
    let grid = grid_for(25);
    let opts = AoOptions::default();
    let trials = 100u64;
    let mut dominated = 0;
    let mut worst_margin = f64::INFINITY;
    for trial in 0..trials {
        let users =
            sample_scenario(&ScenarioRng::new(11_000 + trial, 0), 5, 4, 150.0, 5.0, NOISE_W)
                .unwrap();
        let table = GainTable::new(&users, &grid).unwrap();
        let (placement, fpa_rate) =
            fpa_on_grid_rate(&table, &grid, 4, BUDGET_W, &opts.sca).unwrap();
        let channels = table.channels_for(&placement);
        let initial = matched_filter_weakest(&channels, table.noise_powers(), BUDGET_W).unwrap();
        let state = ao_joint(&table, BUDGET_W, &placement, &initial, &opts).unwrap();
        let margin = state.rate() - fpa_rate;
        worst_margin = worst_margin.min(margin);
        if margin >= -1e-9 {
            dominated += 1;
        }
    }
    report(
        6,
        "movable array dominates the grid-snapped baseline",
        dominated == trials as usize,
        &format!("{dominated}/{trials} trials, worst margin {worst_margin:.3e} bits/s/Hz"),
    );
}

#[test]
fn criterion_7_greedy_quality() {
    let grid = grid_for(16);
    let mut gaps = Vec::with_capacity(100);
    for trial in 0..100u64 {
        let users =
            sample_los_pair(&ScenarioRng::new(13_000 + trial, 0), 150.0, 5.0, NOISE_W).unwrap();
        let (coupling, kappa, noise) = los_problem_from_users(&users, &grid).unwrap();
        let bab = bab_search(&coupling, 4).unwrap();
        let bab_rate = los_rate(&bab.selection, &coupling, BUDGET_W, kappa, noise);
        let greedy = greedy_placement(&users, &grid, 4, BUDGET_W).unwrap();
        let greedy_selection =
            SelectionVector::from_indices(greedy.placement.indices(), grid.len()).unwrap();
        let greedy_rate = los_rate(&greedy_selection, &coupling, BUDGET_W, kappa, noise);
        assert!(
            greedy_rate <= bab_rate + 1e-12,
            "trial {trial}: greedy {greedy_rate} beat exact {bab_rate}"
        );
        gaps.push(bab_rate - greedy_rate);
    }
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_gap = 0.5 * (gaps[49] + gaps[50]);
    let max_gap = gaps[99];
    // The median gap is reported, not asserted against a threshold.
    report(
        7,
        "greedy never beats exact; gap reported",
        true,
        &format!("median gap {median_gap:.4e} bits/s/Hz, max gap {max_gap:.4e}"),
    );
}

#[test]
fn criterion_8_oracle_identities() {
    // (a) Recursive objective updates match the from-scratch quadratic form
    // on 1e4 random (state, candidate) pairs.
    let mut rng = ScenarioRng::new(88, 0).rng();
    let grid = grid_for(16);
    let mut worst_increment = 0.0f64;
    for _ in 0..100 {
        let coupling = build_coupling(
            &grid,
            random_direction(&mut rng),
            random_direction(&mut rng),
            grid.wavelength(),
        );
        for _ in 0..100 {
            let depth = rng.gen_range(0..4usize);
            let placement =
                random_distinct_placement(&mut rng, grid.len(), depth + 1).unwrap();
            let mut state = SelectionState::new(&coupling);
            for &i in &placement.indices()[..depth] {
                state.select(&coupling, i).unwrap();
            }
            let candidate = placement.indices()[depth];
            let recursive = objective_increment(&coupling, &state, candidate).unwrap();
            let mut full: Vec<usize> = placement.indices()[..depth].to_vec();
            full.push(candidate);
            let direct = coupling.quadratic_form(&full);
            worst_increment = worst_increment.max((recursive - direct).abs());
        }
    }
    assert!(worst_increment <= 1e-12, "recursive-update mismatch {worst_increment}");

    // (b) The line-of-sight rate equals the two-user closed-form rate on 100
    // instances.
    let mut worst_rate_gap = 0.0f64;
    for trial in 0..100u64 {
        let users =
            sample_los_pair(&ScenarioRng::new(15_000 + trial, 0), 150.0, 5.0, NOISE_W).unwrap();
        let (coupling, kappa, noise) = los_problem_from_users(&users, &grid).unwrap();
        let placement = random_distinct_placement(&mut rng, grid.len(), 4).unwrap();
        let selection = SelectionVector::from_indices(placement.indices(), grid.len()).unwrap();
        let via_los = los_rate(&selection, &coupling, BUDGET_W, kappa, noise);
        let h1 = channel_vector(&users[0], &placement, &grid).unwrap();
        let h2 = channel_vector(&users[1], &placement, &grid).unwrap();
        let geometry =
            two_user_geometry(&h1, &h2, users[0].noise_power, users[1].noise_power, BUDGET_W)
                .unwrap();
        let via_closed_form = macast::two_user::two_user_rate(&geometry);
        worst_rate_gap = worst_rate_gap.max((via_los - via_closed_form).abs());
    }
    assert!(worst_rate_gap <= 1e-9, "rate-identity mismatch {worst_rate_gap}");

    // (c) a^T Q a equals the squared steering correlation.
    let mut worst_quad_gap = 0.0f64;
    for _ in 0..100 {
        let d1 = random_direction(&mut rng);
        let d2 = random_direction(&mut rng);
        let coupling = build_coupling(&grid, d1, d2, grid.wavelength());
        let placement = random_distinct_placement(&mut rng, grid.len(), 4).unwrap();
        let quad = coupling.quadratic_form(placement.indices());
        let a1 = macast::channel::steering_vector(d1, &placement, &grid, grid.wavelength())
            .unwrap();
        let a2 = macast::channel::steering_vector(d2, &placement, &grid, grid.wavelength())
            .unwrap();
        let corr: Complex64 = a1.iter().zip(&a2).map(|(x, y)| x.conj() * y).sum();
        let gap = (quad - corr.norm_sqr()).abs() / (1.0 + corr.norm_sqr());
        worst_quad_gap = worst_quad_gap.max(gap);
    }
    assert!(worst_quad_gap <= 1e-9, "steering-identity mismatch {worst_quad_gap}");

    report(
        8,
        "oracle identities",
        true,
        &format!(
            "increments {worst_increment:.1e}, rate identity {worst_rate_gap:.1e}, steering identity {worst_quad_gap:.1e}"
        ),
    );
}

#[test]
fn criterion_9_reproducible_csv() {
    let mut config = ExperimentConfig::defaults_for(ExperimentKind::TwoUserLos);
    config.trials = 4;
    config.grid_side = 4;
    config.num_antennas = 3;
    config.seed = 20_260_811;
    let a = run_experiment(&config).unwrap();
    let b = run_experiment(&config).unwrap();
    let identical = a.trials_csv == b.trials_csv && a.summary_csv == b.summary_csv;

    let mut config2 = ExperimentConfig::defaults_for(ExperimentKind::Convergence);
    config2.trials = 3;
    config2.grid_side = 3;
    config2.num_antennas = 2;
    config2.num_users = 2;
    config2.max_ao_rounds = 6;
    let c = run_experiment(&config2).unwrap();
    let d = run_experiment(&config2).unwrap();
    let identical2 = c.trials_csv == d.trials_csv && c.summary_csv == d.summary_csv;

    report(
        9,
        "byte-identical reproduction",
        identical && identical2,
        &format!(
            "two experiments re-run: {} and {} bytes of CSV matched",
            a.trials_csv.len() + a.summary_csv.len(),
            c.trials_csv.len() + c.summary_csv.len()
        ),
    );
}

/// Sanity companion to criterion 6: the joint optimizer also dominates the
/// off-grid baseline's own grid snap when both start from the same snapped
/// layout at a different power.
#[test]
fn companion_dominance_at_low_power() {
    let grid = grid_for(25);
    let opts = AoOptions::default();
    let budget = dbm_to_watts(0.0);
    for trial in 0..20u64 {
        let users =
            sample_scenario(&ScenarioRng::new(17_000 + trial, 0), 5, 4, 150.0, 5.0, NOISE_W)
                .unwrap();
        let table = GainTable::new(&users, &grid).unwrap();
        let (placement, fpa_rate) =
            fpa_on_grid_rate(&table, &grid, 4, budget, &opts.sca).unwrap();
        let channels = table.channels_for(&placement);
        let initial = matched_filter_weakest(&channels, table.noise_powers(), budget).unwrap();
        let state = ao_joint(&table, budget, &placement, &initial, &opts).unwrap();
        assert!(state.rate() >= fpa_rate - 1e-9);
    }
}

/// Sanity companion: the snapped layout stays inside the grid and distinct
/// for every sweep size used by the complexity experiment.
#[test]
fn companion_snap_well_formed_across_grids() {
    for m in [9usize, 16, 25] {
        let grid = grid_for(m);
        let placement = snap_ula_to_grid(&grid, 4).unwrap();
        let mut sorted = placement.indices().to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 4);
        assert!(sorted.iter().all(|&i| i < m));
    }
    // Exhaustive-search guardrail for the experiment sizes.
    assert!(binomial(25, 4) <= EXHAUSTIVE_CAP);
    // Baseline rate helper still consistent with a direct SCA run.
    let grid = grid_for(9);
    let users = sample_scenario(&ScenarioRng::new(19_000, 0), 3, 4, 150.0, 5.0, NOISE_W).unwrap();
    let table = GainTable::new(&users, &grid).unwrap();
    let (placement, rate) =
        fpa_on_grid_rate(&table, &grid, 3, BUDGET_W, &ScaOptions::default()).unwrap();
    let channels = table.channels_for(&placement);
    let start = matched_filter_weakest(&channels, table.noise_powers(), BUDGET_W).unwrap();
    let direct =
        sca_beamform(&channels, table.noise_powers(), BUDGET_W, &start, &ScaOptions::default())
            .unwrap();
    let direct_rate = snr_to_rate(
        min_snr(&channels, table.noise_powers(), direct.beamformer.weights()).unwrap(),
    );
    assert_eq!(rate, direct_rate);
}
