//! The search MDP: drone state, action execution, reward computation and
//! episode lifecycle.
//!
//! The drone is an `N x N` field-of-view center that moves one cell per
//! action over an `M x M` field, taking a noisy observation after every
//! move. Rewards encourage discovering ground-truth objects and punish
//! wasted motion; the episode ends on landing or when the battery runs
//! out.

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::field::{observe_detailed, Field, NoiseConfig, Observation};
use crate::geo::{detections_to_obsmap, DetectionRecord, GridSpec};
use crate::grid::{Cell, Fov, GridMask};
use crate::rng::{derive_seed, rng_from_seed, tag};
use crate::{Error, Result};

/// The five drone actions. North decreases the row index, East
/// increases the column index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    North,
    South,
    West,
    East,
    Land,
}

impl Action {
    pub const ALL: [Action; 5] = [
        Action::North,
        Action::South,
        Action::West,
        Action::East,
        Action::Land,
    ];

    pub fn index(self) -> usize {
        match self {
            Action::North => 0,
            Action::South => 1,
            Action::West => 2,
            Action::East => 3,
            Action::Land => 4,
        }
    }

    pub fn from_index(i: usize) -> Result<Action> {
        Action::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Contract(format!("action index {i} out of range")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::North => "north",
            Action::South => "south",
            Action::West => "west",
            Action::East => "east",
            Action::Land => "land",
        }
    }
}

/// Battery, reward and field-of-view parameters of the MDP.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// FOV side length `N` in cells.
    pub fov_size: usize,
    /// Battery charge at takeoff.
    pub b_init: f64,
    /// Battery drained per flight step.
    pub b_step: f64,
    /// Reward for each correctly discovered object.
    pub r_dt: f64,
    /// Reward added on every step.
    pub r_step: f64,
    /// Penalty for trying to fly outside the field.
    pub r_nfz: f64,
    /// Penalty when a step observes no previously-unseen cell.
    pub r_nocov: f64,
    /// Penalty for running out of battery mid-air.
    pub r_crash: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            fov_size: 12,
            b_init: 1000.0,
            b_step: 1.0,
            r_dt: 1.0,
            r_step: -0.01,
            r_nfz: -0.5,
            r_nocov: -0.05,
            r_crash: -10.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fov_size < 1 {
            return Err(Error::Config("fov_size must be >= 1".into()));
        }
        if !(self.b_init > 0.0) {
            return Err(Error::Config("b_init must be > 0".into()));
        }
        if !(self.b_step > 0.0) {
            return Err(Error::Config("b_step must be > 0".into()));
        }
        if !(self.r_dt > 0.0) {
            return Err(Error::Config("r_dt must be > 0".into()));
        }
        for (name, v) in [
            ("r_step", self.r_step),
            ("r_nfz", self.r_nfz),
            ("r_nocov", self.r_nocov),
            ("r_crash", self.r_crash),
        ] {
            if !(v <= 0.0) {
                return Err(Error::Config(format!("{name} must be <= 0")));
            }
        }
        Ok(())
    }

    /// Hard cap on episode length implied by the battery.
    pub fn max_steps(&self) -> usize {
        (self.b_init / self.b_step).ceil() as usize
    }
}

/// Network-ready view of the environment: a drone-centered global map,
/// a local FOV crop, and the battery fraction.
///
/// Global layers: field-border, found objects, coverage, prior
/// knowledge, each `(2M-1) x (2M-1)` with the drone at index
/// `(M-1, M-1)`. Local layers: field-border, found objects, coverage,
/// current observation, each `N x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTensor {
    pub global: Array3<f32>,
    pub local: Array3<f32>,
    pub battery_frac: f32,
}

/// Per-step bookkeeping alongside the reward.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepInfo {
    /// Ground-truth objects first discovered by a true detection this
    /// step; each pays `r_dt` exactly once.
    pub newly_found_true_positives: usize,
    /// Ground-truth cells newly marked in the found map this step, by
    /// any detection. Drives the recall-over-steps curves.
    pub new_ground_truth_cells: usize,
    pub new_cells_covered: usize,
    pub attempted_out_of_field: bool,
    pub crashed: bool,
}

/// Outcome of one action.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub state: StateTensor,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Where observations come from: the simulated sensor, or recorded
/// detections replayed by position.
pub enum ObservationSource {
    Simulated {
        noise: NoiseConfig,
        rng: rand_chacha::ChaCha8Rng,
    },
    Replay {
        records: Vec<DetectionRecord>,
        gridspec: GridSpec,
        confidence_threshold: f64,
    },
}

impl ObservationSource {
    pub fn simulated(noise: NoiseConfig, seed: u64) -> Self {
        ObservationSource::Simulated {
            noise,
            rng: rng_from_seed(derive_seed(seed, tag::OBSERVE)),
        }
    }

    pub fn replay(records: Vec<DetectionRecord>, gridspec: GridSpec, threshold: f64) -> Self {
        ObservationSource::Replay {
            records,
            gridspec,
            confidence_threshold: threshold,
        }
    }

    fn take(&mut self, field: &Field, fov: &Fov, drone: Cell) -> Result<Observation> {
        match self {
            ObservationSource::Simulated { noise, rng } => {
                observe_detailed(field, fov.origin(drone), fov.size(), noise, rng)
            }
            ObservationSource::Replay {
                records,
                gridspec,
                confidence_threshold,
            } => {
                let map =
                    detections_to_obsmap(records, drone, gridspec, fov.size(), *confidence_threshold);
                // Replayed detections are true positives exactly when
                // they land on an object cell.
                let origin = fov.origin(drone);
                let occupancy = field.occupancy();
                let mut true_det = GridMask::new(fov.size());
                for c in map.iter_true() {
                    if occupancy.get(Cell::new(origin.x + c.x, origin.y + c.y)) {
                        true_det.set(c, true);
                    }
                }
                Ok(Observation {
                    map,
                    true_detections: true_det,
                })
            }
        }
    }
}

/// One episode of the search MDP.
pub struct SearchEnv {
    config: EnvConfig,
    field: Field,
    occupancy: GridMask,
    prior: GridMask,
    source: ObservationSource,
    fov: Fov,
    drone: Cell,
    battery: f64,
    steps: usize,
    found: GridMask,
    coverage: GridMask,
    last_observation: GridMask,
    done: bool,
    initial_gt_found: usize,
    cum_gt_found: usize,
    paid_objects: usize,
}

impl SearchEnv {
    /// Start an episode: the drone is placed uniformly at random among
    /// FOV-center positions whose footprint touches the field border,
    /// with full battery, and takes an initial observation.
    pub fn reset(
        field: Field,
        prior: GridMask,
        config: &EnvConfig,
        source: ObservationSource,
        seed: u64,
    ) -> Result<SearchEnv> {
        config.validate()?;
        let m = field.size();
        if config.fov_size > m {
            return Err(Error::Config(format!(
                "FOV {} exceeds field size {m}",
                config.fov_size
            )));
        }
        let fov = Fov::new(config.fov_size);
        let ring = border_ring(m, &fov);
        let mut reset_rng = rng_from_seed(derive_seed(seed, tag::RESET));
        let drone = ring[rand::Rng::random_range(&mut reset_rng, 0..ring.len())];
        Self::reset_at(field, prior, config, source, drone)
    }

    /// Start an episode with the drone at a chosen FOV center instead of
    /// a random border position. Used by the coverage baseline, whose
    /// path begins at its plan's first waypoint.
    pub fn reset_at(
        field: Field,
        prior: GridMask,
        config: &EnvConfig,
        mut source: ObservationSource,
        drone: Cell,
    ) -> Result<SearchEnv> {
        config.validate()?;
        let m = field.size();
        if config.fov_size > m {
            return Err(Error::Config(format!(
                "FOV {} exceeds field size {m}",
                config.fov_size
            )));
        }
        if prior.size() != m {
            return Err(Error::Contract(format!(
                "prior map is {}x{0} but the field is {m}x{m}",
                prior.size()
            )));
        }
        let fov = Fov::new(config.fov_size);
        if !fov.center_valid(drone, m) {
            return Err(Error::Contract(format!(
                "start {drone} puts the FOV outside the {m}x{m} field"
            )));
        }

        let obs = source.take(&field, &fov, drone)?;
        let occupancy = field.occupancy();
        let mut env = SearchEnv {
            config: config.clone(),
            occupancy,
            prior,
            source,
            fov,
            drone,
            battery: config.b_init,
            steps: 0,
            found: GridMask::new(m),
            coverage: GridMask::new(m),
            last_observation: GridMask::new(config.fov_size),
            done: false,
            initial_gt_found: 0,
            cum_gt_found: 0,
            paid_objects: 0,
            field,
        };
        let (_, new_gt) = env.fold_observation(&obs);
        env.initial_gt_found = new_gt;
        for c in env.fov.cells(env.drone) {
            env.coverage.set(c, true);
        }
        env.last_observation = obs.map;
        Ok(env)
    }

    /// Write an observation into the found map. Returns how many
    /// objects were discovered by a true detection (these pay reward)
    /// and how many ground-truth cells were newly marked by anything.
    fn fold_observation(&mut self, obs: &Observation) -> (usize, usize) {
        let origin = self.fov.origin(self.drone);
        let mut paid = 0;
        let mut new_gt = 0;
        for c in obs.map.iter_true() {
            let abs = Cell::new(origin.x + c.x, origin.y + c.y);
            if self.found.get(abs) {
                continue;
            }
            self.found.set(abs, true);
            if self.occupancy.get(abs) {
                new_gt += 1;
                if obs.true_detections.get(c) {
                    paid += 1;
                }
            }
        }
        self.cum_gt_found += new_gt;
        self.paid_objects += paid;
        (paid, new_gt)
    }

    /// Execute one action. Errors if the episode is already over.
    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::Contract("step after episode end".into()));
        }
        self.steps += 1;
        self.battery -= self.config.b_step;
        let mut reward = self.config.r_step;
        let mut info = StepInfo::default();

        if action == Action::Land {
            self.done = true;
            return Ok(StepResult {
                state: self.state_tensor(),
                reward,
                done: true,
                info,
            });
        }

        let m = self.field.size();
        let (dx, dy) = match action {
            Action::North => (-1i64, 0i64),
            Action::South => (1, 0),
            Action::West => (0, -1),
            Action::East => (0, 1),
            Action::Land => unreachable!(),
        };
        let tx = self.drone.x as i64 + dx;
        let ty = self.drone.y as i64 + dy;
        let target = if tx >= 0 && ty >= 0 {
            Some(Cell::new(tx as usize, ty as usize))
        } else {
            None
        };
        match target.filter(|&t| self.fov.center_valid(t, m)) {
            Some(t) => self.drone = t,
            None => {
                reward += self.config.r_nfz;
                info.attempted_out_of_field = true;
            }
        }

        let obs = self.source.take(&self.field, &self.fov, self.drone)?;
        let (paid, new_gt) = self.fold_observation(&obs);
        info.newly_found_true_positives = paid;
        info.new_ground_truth_cells = new_gt;
        reward += self.config.r_dt * paid as f64;

        let mut new_cov = 0;
        for c in self.fov.cells(self.drone) {
            if !self.coverage.get(c) {
                new_cov += 1;
                self.coverage.set(c, true);
            }
        }
        info.new_cells_covered = new_cov;
        if new_cov == 0 {
            reward += self.config.r_nocov;
        }
        self.last_observation = obs.map;

        if self.battery <= 0.0 {
            reward += self.config.r_crash;
            info.crashed = true;
            self.done = true;
        }

        Ok(StepResult {
            state: self.state_tensor(),
            reward,
            done: self.done,
            info,
        })
    }

    pub fn state_tensor(&self) -> StateTensor {
        build_state_tensor(
            self.field.size(),
            self.drone,
            self.battery_frac(),
            &self.found,
            &self.coverage,
            &self.prior,
            &self.last_observation,
            &self.fov,
        )
    }

    pub fn battery_frac(&self) -> f32 {
        (self.battery / self.config.b_init).clamp(0.0, 1.0) as f32
    }

    pub fn drone(&self) -> Cell {
        self.drone
    }

    pub fn done(&self) -> bool {
        self.done
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn found_map(&self) -> &GridMask {
        &self.found
    }

    pub fn coverage_map(&self) -> &GridMask {
        &self.coverage
    }

    pub fn prior_map(&self) -> &GridMask {
        &self.prior
    }

    /// FOV-sized detection map from the most recent observation.
    pub fn last_observation(&self) -> &GridMask {
        &self.last_observation
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn fov(&self) -> &Fov {
        &self.fov
    }

    /// Ground-truth cells found during reset's initial observation.
    pub fn initial_gt_found(&self) -> usize {
        self.initial_gt_found
    }

    /// Ground-truth cells in the found map so far.
    pub fn cum_gt_found(&self) -> usize {
        self.cum_gt_found
    }

    /// Objects that have paid `r_dt`.
    pub fn paid_objects(&self) -> usize {
        self.paid_objects
    }
}

/// FOV-center positions whose footprint touches the field border, in
/// row-major order.
pub fn border_ring(field_size: usize, fov: &Fov) -> Vec<Cell> {
    let min = fov.min_center();
    let max = fov.max_center(field_size);
    let mut ring = Vec::new();
    for x in min..=max {
        for y in min..=max {
            if x == min || x == max || y == min || y == max {
                ring.push(Cell::new(x, y));
            }
        }
    }
    ring
}

/// Assemble the network input from environment layers.
///
/// The global canvas is `(2M-1)` square; the field block sits at offset
/// `(M-1) - drone`, putting the drone cell at the canvas center.
/// Out-of-field padding is 1 in the border layer and 0 elsewhere.
#[allow(clippy::too_many_arguments)]
pub fn build_state_tensor(
    field_size: usize,
    drone: Cell,
    battery_frac: f32,
    found: &GridMask,
    coverage: &GridMask,
    prior: &GridMask,
    observation: &GridMask,
    fov: &Fov,
) -> StateTensor {
    let m = field_size;
    let canvas = 2 * m - 1;
    let mut global = Array3::<f32>::zeros((4, canvas, canvas));
    global.index_axis_mut(ndarray::Axis(0), 0).fill(1.0);
    let off_x = m - 1 - drone.x;
    let off_y = m - 1 - drone.y;
    let plane = canvas * canvas;
    let gs = global
        .as_slice_mut()
        .expect("freshly allocated canvas is contiguous");
    for x in 0..m {
        let row = (x + off_x) * canvas + off_y;
        gs[row..row + m].fill(0.0);
        for y in 0..m {
            let c = Cell::new(x, y);
            gs[plane + row + y] = found.get(c) as u8 as f32;
            gs[2 * plane + row + y] = coverage.get(c) as u8 as f32;
            gs[3 * plane + row + y] = prior.get(c) as u8 as f32;
        }
    }

    let n = fov.size();
    let origin = fov.origin(drone);
    let mut local = Array3::<f32>::zeros((4, n, n));
    for x in 0..n {
        for y in 0..n {
            let abs = Cell::new(origin.x + x, origin.y + y);
            local[[1, x, y]] = found.get(abs) as u8 as f32;
            local[[2, x, y]] = coverage.get(abs) as u8 as f32;
            local[[3, x, y]] = observation.get(Cell::new(x, y)) as u8 as f32;
        }
    }

    StateTensor {
        global,
        local,
        battery_frac,
    }
}
