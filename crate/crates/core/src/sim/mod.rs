//! Monte Carlo experiment driver.
//!
//! Five experiments cover the simulation study at desk scale:
//!
//! - `convergence` — multicast rate per alternating-optimization round;
//! - `rate-vs-power` — joint optimization vs the fixed-array baseline over
//!   a transmit-power sweep;
//! - `rate-vs-users` — the same comparison over the number of users;
//! - `two-user-los` — branch-and-bound, greedy, exhaustive, and baseline
//!   rates for the two-user line-of-sight case;
//! - `bab-complexity` — visited-node counts of branch-and-bound vs
//!   exhaustive enumeration over the grid size.
//!
//! Every experiment is a pure function of its config: trial `t` draws its
//! scenario from stream `t` of the seeded generator, trials run in parallel,
//! and records aggregate in trial order, so re-running a config reproduces
//! the CSV output byte for byte. Wall-clock times are reported to the
//! console only, never written into the CSVs.

mod fpa;
mod svg;

pub use fpa::{fpa_baseline, fpa_on_grid_rate, snap_ula_to_grid, ula_coordinates};
pub use svg::{line_chart, Series};

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamforming::matched_filter_weakest;
use crate::channel::{
    sample_los_pair, sample_scenario, PositionGrid, ScenarioRng, UserChannelModel,
};
use crate::los_bab::{
    bab_search, binomial, exhaustive_search, los_problem_from_users, los_rate, SelectionVector,
    EXHAUSTIVE_CAP,
};
use crate::placement::{ao_joint, random_distinct_placement, AoOptions, GainTable};
use crate::two_user::greedy_placement;
use crate::{Error, Result};

/// `P_watts = 10^((P_dBm − 30)/10)`.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Carrier wavelength in meters from the frequency in GHz.
pub fn wavelength_m(carrier_ghz: f64) -> f64 {
    299_792_458.0 / (carrier_ghz * 1e9)
}

/// Which experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Convergence,
    RateVsPower,
    RateVsUsers,
    TwoUserLos,
    BabComplexity,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::RateVsPower => "rate_vs_power",
            ExperimentKind::RateVsUsers => "rate_vs_users",
            ExperimentKind::TwoUserLos => "two_user_los",
            ExperimentKind::BabComplexity => "bab_complexity",
        };
        f.write_str(name)
    }
}

/// Optimization method attached to a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    AoSca,
    Greedy,
    Bab,
    Exhaustive,
    Fpa,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Method::AoSca => "ao_sca",
            Method::Greedy => "greedy",
            Method::Bab => "bab",
            Method::Exhaustive => "exhaustive",
            Method::Fpa => "fpa",
        };
        f.write_str(name)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ao_sca" | "ao-sca" => Ok(Method::AoSca),
            "greedy" => Ok(Method::Greedy),
            "bab" => Ok(Method::Bab),
            "exhaustive" => Ok(Method::Exhaustive),
            "fpa" => Ok(Method::Fpa),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

/// How the joint optimizer is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Start at the grid points nearest the reference array with the
    /// matched filter to the weakest user. Guarantees the joint optimizer
    /// dominates the grid-snapped baseline trial by trial.
    UlaAnchored,
    /// Random distinct placement and a random full-power beamformer.
    Random,
}

/// Full description of one experiment run. Defaults reproduce the
/// simulation setup: a 5×5 half-wavelength grid (`M = 25`), `N = 4`
/// antennas, `K = 5` users with `L = 4` paths each, 10 dBm power,
/// −95 dBm noise, 5 GHz carrier, a 150 m hexagonal cell, 100 trials.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Side of the square position grid; `M` = side².
    pub grid_side: usize,
    /// Grid step in wavelength units.
    pub spacing_wl: f64,
    /// Antennas `N`.
    pub num_antennas: usize,
    /// Users `K`.
    pub num_users: usize,
    /// Paths per user `L`.
    pub paths_per_user: usize,
    pub power_dbm: f64,
    /// Sweep for the power experiments; ignored elsewhere.
    pub power_dbm_sweep: Vec<f64>,
    /// Sweep for `rate_vs_users`; ignored elsewhere.
    pub users_sweep: Vec<usize>,
    /// Sweep of `M` values (perfect squares) for `bab_complexity`.
    pub m_sweep: Vec<usize>,
    pub noise_dbm: f64,
    pub carrier_ghz: f64,
    pub cell_radius_m: f64,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub init: InitMode,
    /// Cap on alternating-optimization rounds.
    pub max_ao_rounds: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Convergence,
            grid_side: 5,
            spacing_wl: 0.5,
            num_antennas: 4,
            num_users: 5,
            paths_per_user: 4,
            power_dbm: 10.0,
            power_dbm_sweep: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            users_sweep: vec![2, 3, 4, 5, 6, 7, 8],
            m_sweep: vec![9, 16, 25],
            noise_dbm: -95.0,
            carrier_ghz: 5.0,
            cell_radius_m: 150.0,
            trials: 100,
            seed: 1,
            methods: vec![Method::AoSca, Method::Fpa],
            init: InitMode::UlaAnchored,
            max_ao_rounds: 30,
        }
    }
}

impl ExperimentConfig {
    /// Defaults tailored to one experiment (method list, init mode, user
    /// count, round cap).
    pub fn defaults_for(kind: ExperimentKind) -> Self {
        let mut config = Self { experiment: kind, ..Self::default() };
        match kind {
            ExperimentKind::Convergence => {
                config.methods = vec![Method::AoSca];
                config.init = InitMode::Random;
                config.max_ao_rounds = 10;
            }
            ExperimentKind::RateVsPower | ExperimentKind::RateVsUsers => {
                config.methods = vec![Method::AoSca, Method::Fpa];
            }
            ExperimentKind::TwoUserLos => {
                config.methods =
                    vec![Method::Bab, Method::Greedy, Method::Exhaustive, Method::Fpa];
                config.num_users = 2;
                config.paths_per_user = 1;
            }
            ExperimentKind::BabComplexity => {
                config.methods = vec![Method::Bab, Method::Exhaustive];
                config.num_users = 2;
                config.paths_per_user = 1;
            }
        }
        config
    }

    /// Loads a config from a JSON file; missing fields take defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: Self = serde_json::from_str(&text)?;
        Ok(config)
    }

    pub fn grid(&self) -> Result<PositionGrid> {
        PositionGrid::square(self.grid_side, self.spacing_wl, wavelength_m(self.carrier_ghz))
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    /// Checks internal consistency; the CLI exits nonzero on any error.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.grid_side == 0 || self.spacing_wl <= 0.0 {
            return Err(Error::InvalidConfig("grid side and spacing must be positive".into()));
        }
        if self.num_antennas == 0 || self.num_antennas > self.grid_side * self.grid_side {
            return Err(Error::InvalidConfig(format!(
                "cannot place {} antennas on a {}x{} grid",
                self.num_antennas, self.grid_side, self.grid_side
            )));
        }
        if self.num_users == 0 || self.paths_per_user == 0 {
            return Err(Error::InvalidConfig("need at least one user and one path".into()));
        }
        if self.carrier_ghz <= 0.0 || self.cell_radius_m <= 0.0 {
            return Err(Error::InvalidConfig("carrier and cell radius must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("method list is empty".into()));
        }
        let los_only = [Method::Greedy, Method::Bab, Method::Exhaustive];
        let has_los_method = self.methods.iter().any(|m| los_only.contains(m));
        match self.experiment {
            ExperimentKind::TwoUserLos | ExperimentKind::BabComplexity => {
                if self.num_users != 2 || self.paths_per_user != 1 {
                    return Err(Error::InvalidConfig(
                        "line-of-sight experiments require K = 2 and L = 1".into(),
                    ));
                }
            }
            _ => {
                if has_los_method {
                    return Err(Error::InvalidConfig(format!(
                        "{} only supports ao_sca and fpa",
                        self.experiment
                    )));
                }
            }
        }
        if matches!(
            self.experiment,
            ExperimentKind::RateVsPower | ExperimentKind::TwoUserLos
        ) && self.power_dbm_sweep.is_empty()
        {
            return Err(Error::InvalidConfig("power sweep is empty".into()));
        }
        if self.experiment == ExperimentKind::RateVsUsers && self.users_sweep.is_empty() {
            return Err(Error::InvalidConfig("user sweep is empty".into()));
        }
        if self.experiment == ExperimentKind::BabComplexity {
            if self.m_sweep.is_empty() {
                return Err(Error::InvalidConfig("grid-size sweep is empty".into()));
            }
            for &m in &self.m_sweep {
                let side = (m as f64).sqrt().round() as usize;
                if side * side != m {
                    return Err(Error::InvalidConfig(format!(
                        "grid-size sweep entry {m} is not a perfect square"
                    )));
                }
                if self.num_antennas > m {
                    return Err(Error::InvalidConfig(format!(
                        "cannot place {} antennas on {m} candidates",
                        self.num_antennas
                    )));
                }
            }
        }
        if self.methods.contains(&Method::Exhaustive) {
            let m = self.grid_side * self.grid_side;
            let worst_m = self.m_sweep.iter().copied().max().unwrap_or(m).max(m);
            let count = binomial(worst_m, self.num_antennas);
            if count > EXHAUSTIVE_CAP {
                return Err(Error::InvalidConfig(format!(
                    "exhaustive search over C({worst_m}, {}) = {count} subsets exceeds the cap",
                    self.num_antennas
                )));
            }
        }
        Ok(())
    }
}

/// One method's result at one sweep point of one trial.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: usize,
    pub method: Method,
    /// Sweep coordinate: iteration, power in dBm, user count, or `M`.
    pub sweep: f64,
    pub rate: f64,
    /// Outer rounds (joint optimization) or SCA iterations, when relevant.
    pub iterations: usize,
    /// Search-tree nodes or subsets evaluated, when relevant.
    pub visited_nodes: u64,
    /// Wall-clock seconds; reported to the console, never to the CSVs.
    pub wall_time_s: f64,
}

/// Records plus the CSV renderings of an experiment.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub trials_csv: String,
    pub summary_csv: String,
}

fn random_unit_weights(rng: &mut impl Rng, dim: usize) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        v[0] = Complex64::new(1.0, 0.0);
        return v;
    }
    for z in v.iter_mut() {
        *z /= norm;
    }
    v
}

struct AoSetup {
    placement: crate::channel::PlacementSet,
    /// Unit-norm initial direction; scaled to the budget per sweep point.
    direction: Option<Vec<Complex64>>,
}

/// Initialization for one trial, drawn after the scenario from the same
/// stream so it is reproducible.
fn ao_setup(
    config: &ExperimentConfig,
    grid: &PositionGrid,
    rng: &mut impl Rng,
) -> Result<AoSetup> {
    match config.init {
        InitMode::UlaAnchored => Ok(AoSetup {
            placement: snap_ula_to_grid(grid, config.num_antennas)?,
            direction: None,
        }),
        InitMode::Random => Ok(AoSetup {
            placement: random_distinct_placement(rng, grid.len(), config.num_antennas)?,
            direction: Some(random_unit_weights(rng, config.num_antennas)),
        }),
    }
}

fn ao_options(config: &ExperimentConfig) -> AoOptions {
    AoOptions { max_rounds: config.max_ao_rounds, ..AoOptions::default() }
}

fn run_ao_once(
    config: &ExperimentConfig,
    table: &GainTable,
    setup: &AoSetup,
    budget: f64,
) -> Result<crate::placement::AoState> {
    let initial = match &setup.direction {
        Some(direction) => direction.iter().map(|&z| z * budget.sqrt()).collect(),
        None => {
            let channels = table.channels_for(&setup.placement);
            matched_filter_weakest(&channels, table.noise_powers(), budget)?
        }
    };
    ao_joint(table, budget, &setup.placement, &initial, &ao_options(config))
}

fn convergence_trial(config: &ExperimentConfig, trial: usize) -> Result<Vec<TrialRecord>> {
    let grid = config.grid()?;
    let rng_source = ScenarioRng::new(config.seed, trial as u64);
    let users = sample_scenario(
        &rng_source,
        config.num_users,
        config.paths_per_user,
        config.cell_radius_m,
        config.carrier_ghz,
        config.noise_watts(),
    )?;
    // Initialization draws come from a derived stream so they stay aligned
    // no matter how many draws the scenario consumed.
    let mut rng = ScenarioRng::new(config.seed ^ 0x9e37_79b9_7f4a_7c15, trial as u64).rng();
    let table = GainTable::new(&users, &grid)?;
    let setup = ao_setup(config, &grid, &mut rng)?;
    let budget = dbm_to_watts(config.power_dbm);
    let started = Instant::now();
    let state = run_ao_once(config, &table, &setup, budget)?;
    let elapsed = started.elapsed().as_secs_f64();
    // Pad the trace to the round cap so every iteration averages over the
    // same number of trials.
    let mut records = Vec::with_capacity(config.max_ao_rounds + 1);
    let last = *state.trace.last().unwrap();
    for iteration in 0..=config.max_ao_rounds {
        let rate = state.trace.get(iteration).copied().unwrap_or(last);
        records.push(TrialRecord {
            trial,
            method: Method::AoSca,
            sweep: iteration as f64,
            rate,
            iterations: state.rounds,
            visited_nodes: 0,
            // Charge the trial's time once, on the first row.
            wall_time_s: if iteration == 0 { elapsed } else { 0.0 },
        });
    }
    Ok(records)
}

fn rate_sweep_trial(config: &ExperimentConfig, trial: usize) -> Result<Vec<TrialRecord>> {
    let grid = config.grid()?;
    let rng_source = ScenarioRng::new(config.seed, trial as u64);
    let users_all = sample_scenario(
        &rng_source,
        match config.experiment {
            ExperimentKind::RateVsUsers => {
                *config.users_sweep.iter().max().expect("validated nonempty")
            }
            _ => config.num_users,
        },
        config.paths_per_user,
        config.cell_radius_m,
        config.carrier_ghz,
        config.noise_watts(),
    )?;
    let mut init_rng = ScenarioRng::new(config.seed ^ 0x9e37_79b9_7f4a_7c15, trial as u64).rng();
    let wavelength = wavelength_m(config.carrier_ghz);
    let mut records = Vec::new();

    let sweep_points: Vec<(f64, usize, f64)> = match config.experiment {
        // (sweep value, user count, power budget)
        ExperimentKind::RateVsPower => config
            .power_dbm_sweep
            .iter()
            .map(|&dbm| (dbm, config.num_users, dbm_to_watts(dbm)))
            .collect(),
        ExperimentKind::RateVsUsers => config
            .users_sweep
            .iter()
            .map(|&k| (k as f64, k, dbm_to_watts(config.power_dbm)))
            .collect(),
        _ => unreachable!("rate_sweep_trial only serves power and user sweeps"),
    };

    // One table and setup per distinct user count (users are nested, so the
    // first K of the sampled set serve every sweep point).
    let mut cached: Option<(usize, GainTable, AoSetup)> = None;
    for (sweep, num_users, budget) in sweep_points {
        let rebuild = match &cached {
            Some((k, _, _)) => *k != num_users,
            None => true,
        };
        if rebuild {
            let users = &users_all[..num_users];
            let table = GainTable::new(users, &grid)?;
            let setup = ao_setup(config, &grid, &mut init_rng)?;
            cached = Some((num_users, table, setup));
        }
        let (_, table, setup) = cached.as_ref().unwrap();
        let users = &users_all[..num_users];
        for &method in &config.methods {
            let started = Instant::now();
            let record = match method {
                Method::AoSca => {
                    let state = run_ao_once(config, table, setup, budget)?;
                    TrialRecord {
                        trial,
                        method,
                        sweep,
                        rate: state.rate(),
                        iterations: state.rounds,
                        visited_nodes: 0,
                        wall_time_s: started.elapsed().as_secs_f64(),
                    }
                }
                Method::Fpa => {
                    let (_bf, rate) =
                        fpa_baseline(users, config.num_antennas, wavelength, budget)?;
                    TrialRecord {
                        trial,
                        method,
                        sweep,
                        rate,
                        iterations: 0,
                        visited_nodes: 0,
                        wall_time_s: started.elapsed().as_secs_f64(),
                    }
                }
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "{other} is not available in {}",
                        config.experiment
                    )))
                }
            };
            records.push(record);
        }
    }
    Ok(records)
}

fn two_user_los_trial(config: &ExperimentConfig, trial: usize) -> Result<Vec<TrialRecord>> {
    let grid = config.grid()?;
    let rng_source = ScenarioRng::new(config.seed, trial as u64);
    let users = sample_los_pair(
        &rng_source,
        config.cell_radius_m,
        config.carrier_ghz,
        config.noise_watts(),
    )?;
    let (coupling, kappa, noise) = los_problem_from_users(&users, &grid)?;
    let n = config.num_antennas;
    let wavelength = wavelength_m(config.carrier_ghz);
    let mut records = Vec::new();

    // The optimal selection does not depend on the power budget (the rate is
    // monotone in the steering correlation), so search once per trial.
    let mut bab_cache: Option<(SelectionVector, u64, f64)> = None;
    let mut exhaustive_cache: Option<(SelectionVector, u64, f64)> = None;
    for &method in &config.methods {
        match method {
            Method::Bab => {
                let started = Instant::now();
                let outcome = bab_search(&coupling, n)?;
                bab_cache =
                    Some((outcome.selection, outcome.visited_nodes, started.elapsed().as_secs_f64()));
            }
            Method::Exhaustive => {
                let started = Instant::now();
                let outcome = exhaustive_search(&coupling, n, EXHAUSTIVE_CAP)?;
                exhaustive_cache =
                    Some((outcome.selection, outcome.visited_nodes, started.elapsed().as_secs_f64()));
            }
            _ => {}
        }
    }

    for &power_dbm in &config.power_dbm_sweep {
        let budget = dbm_to_watts(power_dbm);
        for &method in &config.methods {
            let record = match method {
                Method::Bab | Method::Exhaustive => {
                    let (selection, visited, wall) = match method {
                        Method::Bab => bab_cache.as_ref().unwrap(),
                        _ => exhaustive_cache.as_ref().unwrap(),
                    };
                    TrialRecord {
                        trial,
                        method,
                        sweep: power_dbm,
                        rate: los_rate(selection, &coupling, budget, kappa, noise),
                        iterations: 0,
                        visited_nodes: *visited,
                        wall_time_s: *wall,
                    }
                }
                Method::Greedy => {
                    let started = Instant::now();
                    let outcome = greedy_placement(&users, &grid, n, budget)?;
                    TrialRecord {
                        trial,
                        method,
                        sweep: power_dbm,
                        rate: outcome.rate,
                        iterations: 0,
                        visited_nodes: 0,
                        wall_time_s: started.elapsed().as_secs_f64(),
                    }
                }
                Method::Fpa => {
                    let started = Instant::now();
                    let (_bf, rate) = fpa_baseline(&users, n, wavelength, budget)?;
                    TrialRecord {
                        trial,
                        method,
                        sweep: power_dbm,
                        rate,
                        iterations: 0,
                        visited_nodes: 0,
                        wall_time_s: started.elapsed().as_secs_f64(),
                    }
                }
                Method::AoSca => {
                    return Err(Error::InvalidConfig(
                        "ao_sca is not part of the line-of-sight comparison".into(),
                    ))
                }
            };
            records.push(record);
        }
    }
    Ok(records)
}

fn bab_complexity_trial(config: &ExperimentConfig, trial: usize) -> Result<Vec<TrialRecord>> {
    let wavelength = wavelength_m(config.carrier_ghz);
    let budget = dbm_to_watts(config.power_dbm);
    let rng_source = ScenarioRng::new(config.seed, trial as u64);
    let users = sample_los_pair(
        &rng_source,
        config.cell_radius_m,
        config.carrier_ghz,
        config.noise_watts(),
    )?;
    let mut records = Vec::new();
    for &m in &config.m_sweep {
        let side = (m as f64).sqrt().round() as usize;
        let grid = PositionGrid::square(side, config.spacing_wl, wavelength)?;
        let (coupling, kappa, noise) = los_problem_from_users(&users, &grid)?;
        for &method in &config.methods {
            let started = Instant::now();
            let (selection, visited) = match method {
                Method::Bab => {
                    let outcome = bab_search(&coupling, config.num_antennas)?;
                    (outcome.selection, outcome.visited_nodes)
                }
                Method::Exhaustive => {
                    let outcome =
                        exhaustive_search(&coupling, config.num_antennas, EXHAUSTIVE_CAP)?;
                    (outcome.selection, outcome.visited_nodes)
                }
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "{other} has no node count to compare in {}",
                        config.experiment
                    )))
                }
            };
            records.push(TrialRecord {
                trial,
                method,
                sweep: m as f64,
                rate: los_rate(&selection, &coupling, budget, kappa, noise),
                iterations: 0,
                visited_nodes: visited,
                wall_time_s: started.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(records)
}

/// Runs every trial of the configured experiment (in parallel) and renders
/// the CSV outputs. Deterministic given the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRun> {
    config.validate()?;
    let per_trial: Vec<Result<Vec<TrialRecord>>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| match config.experiment {
            ExperimentKind::Convergence => convergence_trial(config, trial),
            ExperimentKind::RateVsPower | ExperimentKind::RateVsUsers => {
                rate_sweep_trial(config, trial)
            }
            ExperimentKind::TwoUserLos => two_user_los_trial(config, trial),
            ExperimentKind::BabComplexity => bab_complexity_trial(config, trial),
        })
        .collect();
    let mut records = Vec::new();
    for trial_records in per_trial {
        records.extend(trial_records?);
    }
    let trials_csv = render_trials_csv(&records);
    let summary_csv = render_summary_csv(config, &records);
    Ok(ExperimentRun { config: config.clone(), records, trials_csv, summary_csv })
}

/// Raw per-record CSV (no wall-clock column, so re-runs are byte-identical).
pub fn render_trials_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from("trial,method,sweep,rate,iterations,visited_nodes\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.trial, r.method, r.sweep, r.rate, r.iterations, r.visited_nodes
        ));
    }
    out
}

fn sweep_values_in_order(records: &[TrialRecord]) -> Vec<f64> {
    let mut values: Vec<f64> = Vec::new();
    for r in records {
        if !values.contains(&r.sweep) {
            values.push(r.sweep);
        }
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values
}

fn mean_over(records: &[TrialRecord], method: Method, sweep: f64, field: impl Fn(&TrialRecord) -> f64) -> f64 {
    let selected: Vec<f64> = records
        .iter()
        .filter(|r| r.method == method && r.sweep == sweep)
        .map(&field)
        .collect();
    selected.iter().sum::<f64>() / selected.len() as f64
}

/// Aggregated CSV; the schema depends on the experiment (see the README).
pub fn render_summary_csv(config: &ExperimentConfig, records: &[TrialRecord]) -> String {
    let mut out = String::new();
    match config.experiment {
        ExperimentKind::Convergence => {
            out.push_str("iteration,mean_rate,n\n");
            for sweep in sweep_values_in_order(records) {
                let mean = mean_over(records, Method::AoSca, sweep, |r| r.rate);
                out.push_str(&format!("{},{},{}\n", sweep, mean, config.num_antennas));
            }
        }
        ExperimentKind::RateVsPower | ExperimentKind::TwoUserLos => {
            out.push_str("power_dbm,method,mean_rate\n");
            for sweep in sweep_values_in_order(records) {
                for &method in &config.methods {
                    let mean = mean_over(records, method, sweep, |r| r.rate);
                    out.push_str(&format!("{},{},{}\n", sweep, method, mean));
                }
            }
        }
        ExperimentKind::RateVsUsers => {
            out.push_str("users,method,mean_rate\n");
            for sweep in sweep_values_in_order(records) {
                for &method in &config.methods {
                    let mean = mean_over(records, method, sweep, |r| r.rate);
                    out.push_str(&format!("{},{},{}\n", sweep, method, mean));
                }
            }
        }
        ExperimentKind::BabComplexity => {
            out.push_str("m,method,mean_visited_nodes\n");
            for sweep in sweep_values_in_order(records) {
                for &method in &config.methods {
                    let mean = mean_over(records, method, sweep, |r| r.visited_nodes as f64);
                    out.push_str(&format!("{},{},{}\n", sweep, method, mean));
                }
            }
        }
    }
    out
}

/// SVG line chart of the summary: one series per method (or one series
/// total for the convergence trace).
pub fn render_summary_svg(config: &ExperimentConfig, records: &[TrialRecord]) -> String {
    let (title, x_label, y_label) = match config.experiment {
        ExperimentKind::Convergence => {
            ("Multicast rate vs outer iterations", "iteration", "rate (bits/s/Hz)")
        }
        ExperimentKind::RateVsPower => {
            ("Multicast rate vs power budget", "power (dBm)", "rate (bits/s/Hz)")
        }
        ExperimentKind::RateVsUsers => {
            ("Multicast rate vs users", "users", "rate (bits/s/Hz)")
        }
        ExperimentKind::TwoUserLos => {
            ("Two-user line-of-sight rate", "power (dBm)", "rate (bits/s/Hz)")
        }
        ExperimentKind::BabComplexity => {
            ("Search complexity vs grid size", "candidate positions", "mean visited nodes")
        }
    };
    let value = |r: &TrialRecord| match config.experiment {
        ExperimentKind::BabComplexity => r.visited_nodes as f64,
        _ => r.rate,
    };
    let series: Vec<Series> = config
        .methods
        .iter()
        .map(|&method| Series {
            name: method.to_string(),
            points: sweep_values_in_order(records)
                .into_iter()
                .map(|sweep| (sweep, mean_over(records, method, sweep, value)))
                .collect(),
        })
        .collect();
    line_chart(title, x_label, y_label, &series)
}

/// Writes `<experiment>_trials.csv`, `<experiment>_summary.csv`, and
/// optionally `<experiment>.svg` under `out_dir`. Returns the file paths.
pub fn emit_figure_data(
    run: &ExperimentRun,
    out_dir: &Path,
    with_svg: bool,
) -> Result<Vec<std::path::PathBuf>> {
    if run.records.is_empty() {
        return Err(Error::InvalidArgument("no records to emit".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let stem = run.config.experiment.to_string();
    let mut written = Vec::new();
    let trials_path = out_dir.join(format!("{stem}_trials.csv"));
    std::fs::write(&trials_path, &run.trials_csv)?;
    written.push(trials_path);
    let summary_path = out_dir.join(format!("{stem}_summary.csv"));
    std::fs::write(&summary_path, &run.summary_csv)?;
    written.push(summary_path);
    if with_svg {
        let svg_path = out_dir.join(format!("{stem}.svg"));
        std::fs::write(&svg_path, render_summary_svg(&run.config, &run.records))?;
        written.push(svg_path);
    }
    Ok(written)
}

/// Per-method wall-clock totals, for console reporting only.
pub fn timing_summary(records: &[TrialRecord]) -> Vec<(Method, f64)> {
    let mut totals: Vec<(Method, f64)> = Vec::new();
    for r in records {
        match totals.iter_mut().find(|(m, _)| *m == r.method) {
            Some((_, t)) => *t += r.wall_time_s,
            None => totals.push((r.method, r.wall_time_s)),
        }
    }
    totals
}

/// Re-evaluates a saved scenario with each requested method at the config's
/// power budget. Methods must fit the scenario shape (two single-path users
/// for the search methods).
pub fn replay_scenario(
    users: &[UserChannelModel],
    config: &ExperimentConfig,
) -> Result<Vec<(Method, f64)>> {
    let grid = config.grid()?;
    let budget = dbm_to_watts(config.power_dbm);
    let wavelength = wavelength_m(config.carrier_ghz);
    let mut results = Vec::new();
    for &method in &config.methods {
        let rate = match method {
            Method::AoSca => {
                let table = GainTable::new(users, &grid)?;
                let placement = snap_ula_to_grid(&grid, config.num_antennas)?;
                let channels = table.channels_for(&placement);
                let initial =
                    matched_filter_weakest(&channels, table.noise_powers(), budget)?;
                let state = ao_joint(
                    &table,
                    budget,
                    &placement,
                    &initial,
                    &ao_options(config),
                )?;
                state.rate()
            }
            Method::Fpa => fpa_baseline(users, config.num_antennas, wavelength, budget)?.1,
            Method::Greedy => greedy_placement(users, &grid, config.num_antennas, budget)?.rate,
            Method::Bab => {
                let (coupling, kappa, noise) = los_problem_from_users(users, &grid)?;
                let outcome = bab_search(&coupling, config.num_antennas)?;
                los_rate(&outcome.selection, &coupling, budget, kappa, noise)
            }
            Method::Exhaustive => {
                let (coupling, kappa, noise) = los_problem_from_users(users, &grid)?;
                let outcome = exhaustive_search(&coupling, config.num_antennas, EXHAUSTIVE_CAP)?;
                los_rate(&outcome.selection, &coupling, budget, kappa, noise)
            }
        };
        results.push((method, rate));
    }
    Ok(results)
}
