//! Exact and heuristic placement solvers for the two-user line-of-sight
//! case.
//!
//! With one path per user and equal path energy, the optimal rate depends
//! on the placement only through the steering-vector correlation
//! `|a₁ᴴa₂|`, and maximizing it is a binary quadratic program: pick a
//! cardinality-`N` selection vector `a` maximizing `aᵀQa`, where the
//! coupling matrix `Q = Re{g}Re{g}ᵀ + Im{g}Im{g}ᵀ` (rank ≤ 2, unit
//! diagonal) comes from the per-candidate phase products
//! `g = conj(g₁) ⊙ g₂`.
//!
//! The exact solver is a best-first branch-and-bound over the tree of
//! increasing-index selections. The raw objective grows along a path, so it
//! is shifted by per-level constants `X` (max row sum of |Q|) and `Y` (max
//! diagonal) to decrease strictly with depth; a subtree whose shifted score
//! cannot beat the incumbent is pruned without affecting optimality. The
//! shifted-score test alone rarely fires at useful sizes (one level of
//! shift exceeds the largest possible objective), so the search also prunes
//! on a completion bound from the positive-semidefiniteness of `Q`: a node
//! at objective `f` with `r` positions left to pick cannot complete beyond
//! `(√f + r·√Z)²`, `Z` being the largest `|Q|` entry. Both tests discard
//! only subtrees whose best completion is at most the incumbent.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{PositionGrid, UserChannelModel};
use crate::{Error, Result};

/// Coupling matrix of the selection problem, with the phase products it was
/// built from.
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    entries: Vec<f64>,
    phase_products: Vec<Complex64>,
    size: usize,
    max_abs_entry: f64,
}

impl CouplingMatrix {
    /// Number of candidate positions `M`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.size + col]
    }

    /// Per-candidate phase products `g_m = conj(g₁_m)·g₂_m`.
    pub fn phase_products(&self) -> &[Complex64] {
        &self.phase_products
    }

    /// From-scratch quadratic form `aᵀQa` over the selected indices.
    pub fn quadratic_form(&self, indices: &[usize]) -> f64 {
        let mut sum = 0.0;
        for &i in indices {
            for &j in indices {
                sum += self.entry(i, j);
            }
        }
        sum
    }

    /// Builds a coupling matrix directly from `Q` entries (row-major).
    /// Used by instance files; phase products are not recoverable.
    pub fn from_entries(entries: Vec<f64>, size: usize) -> Result<Self> {
        if entries.len() != size * size {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {size}x{size} matrix",
                entries.len()
            )));
        }
        let max_abs_entry = entries.iter().fold(0.0f64, |acc, &e| acc.max(e.abs()));
        Ok(Self { entries, phase_products: Vec::new(), size, max_abs_entry })
    }
}

/// Builds the coupling matrix for two propagation directions over a grid.
pub fn build_coupling(
    grid: &PositionGrid,
    dir1: [f64; 2],
    dir2: [f64; 2],
    wavelength: f64,
) -> CouplingMatrix {
    let size = grid.len();
    let wave_number = 2.0 * std::f64::consts::PI / wavelength;
    let phase_products: Vec<Complex64> = (0..size)
        .map(|m| {
            let p = grid.position(m);
            let g1 = Complex64::from_polar(1.0, wave_number * (p[0] * dir1[0] + p[1] * dir1[1]));
            let g2 = Complex64::from_polar(1.0, wave_number * (p[0] * dir2[0] + p[1] * dir2[1]));
            g1.conj() * g2
        })
        .collect();
    let mut entries = vec![0.0; size * size];
    for i in 0..size {
        for j in 0..size {
            entries[i * size + j] = phase_products[i].re * phase_products[j].re
                + phase_products[i].im * phase_products[j].im;
        }
    }
    let max_abs_entry = entries.iter().fold(0.0f64, |acc, &e| acc.max(e.abs()));
    CouplingMatrix { entries, phase_products, size, max_abs_entry }
}

/// Binary selection over the `M` candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionVector {
    mask: Vec<bool>,
}

impl SelectionVector {
    pub fn from_indices(indices: &[usize], size: usize) -> Result<Self> {
        let mut mask = vec![false; size];
        for &i in indices {
            if i >= size {
                return Err(Error::InvalidPlacement(format!(
                    "index {i} out of range for {size} candidates"
                )));
            }
            if mask[i] {
                return Err(Error::InvalidPlacement(format!("duplicate index {i}")));
            }
            mask[i] = true;
        }
        Ok(Self { mask })
    }

    pub fn indices(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &set)| set.then_some(i))
            .collect()
    }

    pub fn cardinality(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.mask[index]
    }
}

/// Partial selection with the running objective and coupled sums, so a
/// candidate's increment costs O(1).
#[derive(Debug, Clone)]
pub struct SelectionState {
    selected: Vec<usize>,
    /// `coupled[m] = [Q·a]_m` for the current selection.
    coupled: Vec<f64>,
    objective: f64,
}

impl SelectionState {
    pub fn new(coupling: &CouplingMatrix) -> Self {
        Self {
            selected: Vec::new(),
            coupled: vec![0.0; coupling.size()],
            objective: 0.0,
        }
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// Adds a candidate and updates the objective recursively.
    pub fn select(&mut self, coupling: &CouplingMatrix, candidate: usize) -> Result<()> {
        let increment = objective_increment(coupling, self, candidate)?;
        self.objective = increment;
        self.selected.push(candidate);
        for m in 0..coupling.size() {
            self.coupled[m] += coupling.entry(m, candidate);
        }
        Ok(())
    }

    fn unselect(&mut self, coupling: &CouplingMatrix, previous_objective: f64) {
        let candidate = self.selected.pop().expect("unselect on empty state");
        for m in 0..coupling.size() {
            self.coupled[m] -= coupling.entry(m, candidate);
        }
        self.objective = previous_objective;
    }
}

/// Objective after adding `candidate`: `f + 2·[Q·a]_candidate + Q_cc`.
pub fn objective_increment(
    coupling: &CouplingMatrix,
    state: &SelectionState,
    candidate: usize,
) -> Result<f64> {
    if candidate >= coupling.size() {
        return Err(Error::InvalidPlacement(format!(
            "candidate {candidate} out of range for {} positions",
            coupling.size()
        )));
    }
    if state.selected.contains(&candidate) {
        return Err(Error::InvalidPlacement(format!("candidate {candidate} already selected")));
    }
    Ok(state.objective + 2.0 * state.coupled[candidate] + coupling.entry(candidate, candidate))
}

/// Per-level shift constants: `X` is the largest row sum of element-wise
/// `|Q|`, `Y` the largest diagonal entry.
pub fn shift_constants(coupling: &CouplingMatrix) -> (f64, f64) {
    let size = coupling.size();
    let mut x = f64::NEG_INFINITY;
    let mut y = f64::NEG_INFINITY;
    for i in 0..size {
        let row_sum: f64 = (0..size).map(|j| coupling.entry(i, j).abs()).sum();
        x = x.max(row_sum);
        y = y.max(coupling.entry(i, i));
    }
    (x, y)
}

/// Number of subsets `C(m, n)`.
pub fn binomial(m: usize, n: usize) -> u128 {
    if n > m {
        return 0;
    }
    let n = n.min(m - n);
    let mut result: u128 = 1;
    for i in 0..n {
        result = result * (m - i) as u128 / (i + 1) as u128;
    }
    result
}

/// Node count of the unpruned search tree (root excluded): at depth `d`
/// the valid prefixes are the `d`-subsets leaving room for the rest,
/// `C(m - n + d, d)` of them.
pub fn full_tree_node_count(m: usize, n: usize) -> u128 {
    (1..=n).map(|d| binomial(m - n + d, d)).sum()
}

/// Result of a search over cardinality-`n` selections.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub selection: SelectionVector,
    pub objective: f64,
    /// Candidate scores evaluated during the search.
    pub visited_nodes: u64,
}

/// One pruning decision recorded by the audited search.
#[derive(Debug, Clone)]
pub struct PruneEvent {
    /// Indices selected when the prune happened.
    pub prefix: Vec<usize>,
    /// Child whose subtree was discarded.
    pub child: usize,
    /// Shifted score of that child.
    pub shifted_score: f64,
    /// Incumbent bound at prune time.
    pub incumbent: f64,
}

struct BabSearch<'a> {
    coupling: &'a CouplingMatrix,
    target: usize,
    x_shift: f64,
    y_shift: f64,
    max_abs_entry: f64,
    incumbent: f64,
    best_selection: Vec<usize>,
    best_objective: f64,
    visited: u64,
    prunes: Option<Vec<PruneEvent>>,
}

impl BabSearch<'_> {
    /// Explores all children of the node holding `state` at depth
    /// `state.selected.len()`, with shifted score `shifted`.
    fn explore(&mut self, state: &mut SelectionState, shifted: f64, last: Option<usize>) {
        let depth = state.selected.len();
        let size = self.coupling.size();
        let first = last.map_or(0, |l| l + 1);
        let last_child = size - self.target + depth;
        // Shifted scores of every child; each evaluation is one visited node.
        let mut scores: Vec<(usize, f64, f64)> = Vec::with_capacity(last_child + 1 - first);
        for child in first..=last_child {
            let raw = objective_increment(self.coupling, state, child)
                .expect("children are unselected by construction");
            let score =
                shifted + 2.0 * state.coupled[child] - 2.0 * self.x_shift
                    + self.coupling.entry(child, child)
                    - self.y_shift;
            debug_assert!(
                score <= shifted + 1e-12 * shifted.abs().max(1.0),
                "shifted score must decrease with depth"
            );
            self.visited += 1;
            scores.push((child, score, raw));
        }
        if depth + 1 == self.target {
            // Leaf level: only the best feasible child can move the bound.
            let mut best: Option<&(usize, f64, f64)> = None;
            for entry in &scores {
                match best {
                    Some(b) if b.1 >= entry.1 => {}
                    _ => best = Some(entry),
                }
            }
            if let Some(&(child, score, raw)) = best {
                if score > self.incumbent {
                    self.incumbent = score;
                    self.best_objective = raw;
                    self.best_selection = state.selected.clone();
                    self.best_selection.push(child);
                }
            }
            return;
        }
        // Deeper levels: visit children best-first. A child is entered only
        // if its shifted score beats the incumbent and its completion bound
        // beats the best raw objective; descending scores mean the first
        // failure prunes the rest of the siblings too.
        scores.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let remaining = (self.target - depth - 1) as f64;
        for i in 0..scores.len() {
            let (child, score, raw) = scores[i];
            // Q is PSD, so a completion adding r positions gains at most
            // 2·sqrt(f·r²Z) + r²Z (Cauchy-Schwarz on the cross term).
            let reach = raw.max(0.0).sqrt() + remaining * self.max_abs_entry.sqrt();
            let completion_bound = reach * reach;
            if score > self.incumbent && completion_bound > self.best_objective {
                let before = state.objective();
                state.select(self.coupling, child).expect("child is admissible");
                self.explore(state, score, Some(child));
                state.unselect(self.coupling, before);
            } else {
                if let Some(prunes) = &mut self.prunes {
                    for &(pruned, pruned_score, _) in &scores[i..] {
                        prunes.push(PruneEvent {
                            prefix: state.selected.clone(),
                            child: pruned,
                            shifted_score: pruned_score,
                            incumbent: self.incumbent,
                        });
                    }
                }
                break;
            }
        }
    }
}

fn run_bab(
    coupling: &CouplingMatrix,
    n: usize,
    audited: bool,
) -> Result<(SearchOutcome, Vec<PruneEvent>)> {
    let size = coupling.size();
    if n == 0 || n > size {
        return Err(Error::InvalidPlacement(format!(
            "cannot select {n} of {size} candidates"
        )));
    }
    let (x_shift, y_shift) = shift_constants(coupling);
    let mut search = BabSearch {
        coupling,
        target: n,
        x_shift,
        y_shift,
        max_abs_entry: coupling.max_abs_entry,
        incumbent: f64::NEG_INFINITY,
        best_selection: Vec::new(),
        best_objective: f64::NEG_INFINITY,
        visited: 0,
        prunes: audited.then(Vec::new),
    };
    let mut state = SelectionState::new(coupling);
    search.explore(&mut state, 0.0, None);
    let selection = SelectionVector::from_indices(&search.best_selection, size)?;
    let outcome = SearchOutcome {
        selection,
        objective: search.best_objective,
        visited_nodes: search.visited,
    };
    Ok((outcome, search.prunes.unwrap_or_default()))
}

/// Globally optimal cardinality-`n` selection by best-first branch-and-
/// bound with incumbent pruning.
pub fn bab_search(coupling: &CouplingMatrix, n: usize) -> Result<SearchOutcome> {
    run_bab(coupling, n, false).map(|(outcome, _)| outcome)
}

/// [`bab_search`] that also records every pruning decision, so small
/// instances can verify that no discarded subtree could have beaten the
/// incumbent.
pub fn bab_search_audited(
    coupling: &CouplingMatrix,
    n: usize,
) -> Result<(SearchOutcome, Vec<PruneEvent>)> {
    run_bab(coupling, n, true)
}

/// Default cap on exhaustive enumeration.
pub const EXHAUSTIVE_CAP: u128 = 1_000_000;

/// Exact optimum by lexicographic enumeration of all `C(m, n)` subsets.
/// Ties resolve to the lexicographically smallest subset.
pub fn exhaustive_search(coupling: &CouplingMatrix, n: usize, cap: u128) -> Result<SearchOutcome> {
    let size = coupling.size();
    if n == 0 || n > size {
        return Err(Error::InvalidPlacement(format!(
            "cannot select {n} of {size} candidates"
        )));
    }
    let count = binomial(size, n);
    if count > cap {
        return Err(Error::CapExceeded { m: size, n, count, cap });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut best_indices = indices.clone();
    let mut best_objective = f64::NEG_INFINITY;
    let mut evaluated: u64 = 0;
    loop {
        let objective = coupling.quadratic_form(&indices);
        evaluated += 1;
        if objective > best_objective {
            best_objective = objective;
            best_indices = indices.clone();
        }
        // Advance to the next combination in lexicographic order.
        let mut pos = n;
        while pos > 0 {
            pos -= 1;
            if indices[pos] != pos + size - n {
                indices[pos] += 1;
                for later in (pos + 1)..n {
                    indices[later] = indices[later - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return Ok(SearchOutcome {
                    selection: SelectionVector::from_indices(&best_indices, size)?,
                    objective: best_objective,
                    visited_nodes: evaluated,
                });
            }
        }
    }
}

/// Multicast rate of a line-of-sight placement with equal path energy
/// `kappa` and equal noise power.
///
/// `log₂(1 + P·N·κ/σ²)` when the steering vectors align (`|a₁ᴴa₂| = N`),
/// otherwise `log₂(1 + P·κ·(N + |a₁ᴴa₂|)/(2σ²))`, with
/// `|a₁ᴴa₂| = √(aᵀQa)`.
pub fn los_rate(
    selection: &SelectionVector,
    coupling: &CouplingMatrix,
    budget: f64,
    kappa: f64,
    noise_power: f64,
) -> f64 {
    let n = selection.cardinality() as f64;
    let quad = coupling.quadratic_form(&selection.indices());
    let correlation = quad.max(0.0).sqrt();
    if correlation >= n * (1.0 - 1e-9) {
        (1.0 + budget * n * kappa / noise_power).log2()
    } else {
        (1.0 + budget * kappa * (n + correlation) / (2.0 * noise_power)).log2()
    }
}

/// Coupling matrix plus `(κ, σ²)` extracted from a two-user equal-energy
/// line-of-sight scenario. Errors on anything else.
pub fn los_problem_from_users(
    users: &[UserChannelModel],
    grid: &PositionGrid,
) -> Result<(CouplingMatrix, f64, f64)> {
    if users.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "line-of-sight problem needs exactly two users, got {}",
            users.len()
        )));
    }
    for user in users {
        if !user.is_los() {
            return Err(Error::InvalidArgument(
                "line-of-sight problem requires single-path users".into(),
            ));
        }
    }
    let kappa1 = users[0].paths[0].gain.norm_sqr();
    let kappa2 = users[1].paths[0].gain.norm_sqr();
    if (kappa1 - kappa2).abs() > 1e-9 * kappa1.max(kappa2) {
        return Err(Error::InvalidArgument("path energies must match".into()));
    }
    if (users[0].noise_power - users[1].noise_power).abs()
        > 1e-12 * users[0].noise_power.max(users[1].noise_power)
    {
        return Err(Error::InvalidArgument("noise powers must match".into()));
    }
    let coupling = build_coupling(
        grid,
        users[0].paths[0].direction(),
        users[1].paths[0].direction(),
        grid.wavelength(),
    );
    Ok((coupling, kappa1, users[0].noise_power))
}

/// One solver result on one instance, in the shape the result CSVs use.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub m: usize,
    pub n: usize,
    pub method: String,
    pub objective: f64,
    pub rate: f64,
    pub visited_nodes: u64,
    pub wall_time_s: f64,
}

impl ResultRow {
    pub const CSV_HEADER: &'static str = "m,n,method,objective,rate,visited_nodes,wall_time_s";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.m, self.n, self.method, self.objective, self.rate, self.visited_nodes,
            self.wall_time_s
        )
    }
}

/// Runs one solver on an instance and fills a [`ResultRow`]; the rate needs
/// the scenario constants `(P, κ, σ²)`.
pub fn solve_instance(
    coupling: &CouplingMatrix,
    n: usize,
    exact: bool,
    budget: f64,
    kappa: f64,
    noise_power: f64,
) -> Result<ResultRow> {
    let started = std::time::Instant::now();
    let outcome = if exact {
        bab_search(coupling, n)?
    } else {
        exhaustive_search(coupling, n, EXHAUSTIVE_CAP)?
    };
    let wall_time_s = started.elapsed().as_secs_f64();
    Ok(ResultRow {
        m: coupling.size(),
        n,
        method: if exact { "bab".into() } else { "exhaustive".into() },
        objective: outcome.objective,
        rate: los_rate(&outcome.selection, coupling, budget, kappa, noise_power),
        visited_nodes: outcome.visited_nodes,
        wall_time_s,
    })
}

/// On-disk form of a selection-problem instance: the matrix plus `N`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub m: usize,
    pub n: usize,
    /// Row-major `Q` entries.
    pub q: Vec<f64>,
}

pub fn write_instance(path: &std::path::Path, coupling: &CouplingMatrix, n: usize) -> Result<()> {
    let record = InstanceFile {
        m: coupling.size(),
        n,
        q: coupling.entries.clone(),
    };
    std::fs::write(path, serde_json::to_string(&record)?)?;
    Ok(())
}

pub fn read_instance(path: &std::path::Path) -> Result<(CouplingMatrix, usize)> {
    let text = std::fs::read_to_string(path)?;
    let record: InstanceFile = serde_json::from_str(&text)?;
    let coupling = CouplingMatrix::from_entries(record.q, record.m)?;
    if record.n == 0 || record.n > record.m {
        return Err(Error::InvalidPlacement(format!(
            "instance selects {} of {} candidates",
            record.n, record.m
        )));
    }
    Ok((coupling, record.n))
}
