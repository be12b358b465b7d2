//! Synthetic field generation and the noisy sensing model.
//!
//! Objects are laid out in Gaussian clusters on an `M x M` grid. Two
//! noisy views of the ground truth exist: a prior-knowledge map sampled
//! once per episode, and per-step observations inside the drone's
//! field-of-view with fresh detection noise on every call.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::grid::{Cell, GridMask};
use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// 2x2 covariance matrix in cells^2, row-major.
pub type Covariance = [[f64; 2]; 2];

/// Layout parameters for synthetic fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    /// Cells per side (`M`).
    pub grid_size: usize,
    /// Mean and std of the object-count distribution.
    pub n_obj_mean: f64,
    pub n_obj_std: f64,
    /// Mean and std of the cluster-count distribution.
    pub k_mean: f64,
    pub k_std: f64,
    /// Candidate cluster covariances; one is drawn uniformly per cluster.
    pub cov_choices: Vec<Covariance>,
}

impl FieldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 1 {
            return Err(Error::Config("grid_size must be >= 1".into()));
        }
        if !(self.n_obj_mean >= 0.0) || !self.n_obj_std.is_finite() || self.n_obj_std < 0.0 {
            return Err(Error::Config(
                "object count distribution must have mean >= 0 and std >= 0".into(),
            ));
        }
        if !(self.k_mean >= 0.0) || !self.k_std.is_finite() || self.k_std < 0.0 {
            return Err(Error::Config(
                "cluster count distribution must have mean >= 0 and std >= 0".into(),
            ));
        }
        if self.cov_choices.is_empty() {
            return Err(Error::Config("cov_choices must not be empty".into()));
        }
        for (i, c) in self.cov_choices.iter().enumerate() {
            cholesky_2x2(c).ok_or_else(|| {
                Error::Config(format!(
                    "cov_choices[{i}] is not symmetric positive definite"
                ))
            })?;
        }
        Ok(())
    }
}

impl Default for FieldConfig {
    /// Grid size 96 matches a 2x2 tiling of 48-cell prior-flight
    /// footprints; the distribution parameters are placeholder defaults,
    /// expected to be overridden from a run config.
    fn default() -> Self {
        FieldConfig {
            grid_size: 96,
            n_obj_mean: 60.0,
            n_obj_std: 10.0,
            k_mean: 5.0,
            k_std: 1.0,
            cov_choices: vec![[[8.0, 0.0], [0.0, 8.0]], [[16.0, 6.0], [6.0, 16.0]]],
        }
    }
}

/// Error probabilities of the sensing model.
///
/// `p_dt_*` apply per observation call, `p_pk_*` once per episode when
/// the prior map is drawn. `p_shift`/`shift_radius` displace surviving
/// detections by up to `shift_radius` cells per axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub p_dt_fp: f64,
    pub p_dt_fn: f64,
    pub p_pk_fp: f64,
    pub p_pk_fn: f64,
    pub p_shift: f64,
    pub shift_radius: u32,
}

impl NoiseConfig {
    /// All probabilities zero: observations and prior equal the ground truth.
    pub fn noiseless() -> Self {
        NoiseConfig {
            p_dt_fp: 0.0,
            p_dt_fn: 0.0,
            p_pk_fp: 0.0,
            p_pk_fn: 0.0,
            p_shift: 0.0,
            shift_radius: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_dt_fp", self.p_dt_fp),
            ("p_dt_fn", self.p_dt_fn),
            ("p_pk_fp", self.p_pk_fp),
            ("p_pk_fn", self.p_pk_fn),
            ("p_shift", self.p_shift),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.shift_radius < 1 {
            return Err(Error::Config("shift_radius must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for NoiseConfig {
    /// Placeholder error rates; override from a run config.
    fn default() -> Self {
        NoiseConfig {
            p_dt_fp: 0.005,
            p_dt_fn: 0.1,
            p_pk_fp: 0.02,
            p_pk_fn: 0.3,
            p_shift: 0.2,
            shift_radius: 2,
        }
    }
}

/// Ground-truth object layout. Objects landing on the same cell collapse
/// to a single occupied cell; maps and scoring are cell-level throughout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    size: usize,
    objects: Vec<Cell>,
}

impl Field {
    /// Build a field from explicit object cells (deduplicated, sorted).
    pub fn from_cells(size: usize, cells: impl IntoIterator<Item = Cell>) -> Result<Self> {
        let set: BTreeSet<Cell> = cells.into_iter().collect();
        for c in &set {
            if c.x >= size || c.y >= size {
                return Err(Error::Config(format!("object {c} outside {size}x{size} grid")));
            }
        }
        Ok(Field {
            size,
            objects: set.into_iter().collect(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Occupied cells, sorted row-major.
    pub fn objects(&self) -> &[Cell] {
        &self.objects
    }

    pub fn occupancy(&self) -> GridMask {
        let mut m = GridMask::new(self.size);
        for &c in &self.objects {
            m.set(c, true);
        }
        m
    }
}

fn cholesky_2x2(cov: &Covariance) -> Option<[[f64; 2]; 2]> {
    let [[a, b], [b2, c]] = *cov;
    if (b - b2).abs() > 1e-12 * (1.0 + b.abs().max(b2.abs())) {
        return None;
    }
    if !(a > 0.0) {
        return None;
    }
    let l00 = a.sqrt();
    let l10 = b / l00;
    let d = c - l10 * l10;
    if !(d > 0.0) {
        return None;
    }
    Some([[l00, 0.0], [l10, d.sqrt()]])
}

/// Round a continuous in-plane sample to its grid cell, or `None` when it
/// falls outside `[0, size)` on either axis.
fn round_to_cell(x: f64, y: f64, size: usize) -> Option<Cell> {
    let rx = x.round();
    let ry = y.round();
    if rx < 0.0 || ry < 0.0 || rx >= size as f64 || ry >= size as f64 {
        return None;
    }
    Some(Cell::new(rx as usize, ry as usize))
}

/// Sample a clustered object layout.
///
/// The object count and cluster count are drawn from their normal
/// distributions (rounded, clamped to >=0 and >=1 respectively), cluster
/// means are uniform over the field, each object picks a cluster
/// uniformly and samples its position from that cluster's Gaussian.
/// Samples that round outside the field are rejected and redrawn.
pub fn generate_field(config: &FieldConfig, seed: u64) -> Result<Field> {
    config.validate()?;
    let mut rng = rng_from_seed(seed);
    let m = config.grid_size;

    let n_obj_dist = Normal::new(config.n_obj_mean, config.n_obj_std)
        .map_err(|e| Error::Config(format!("object count distribution: {e}")))?;
    let k_dist = Normal::new(config.k_mean, config.k_std)
        .map_err(|e| Error::Config(format!("cluster count distribution: {e}")))?;

    let n_obj = n_obj_dist.sample(&mut rng).round().max(0.0) as usize;
    let k = k_dist.sample(&mut rng).round().max(1.0) as usize;

    let clusters: Vec<([f64; 2], [[f64; 2]; 2])> = (0..k)
        .map(|_| {
            let mu = [
                rng.random_range(0.0..m as f64),
                rng.random_range(0.0..m as f64),
            ];
            let cov = config.cov_choices[rng.random_range(0..config.cov_choices.len())];
            let chol = cholesky_2x2(&cov).expect("validated SPD");
            (mu, chol)
        })
        .collect();

    let mut cells = BTreeSet::new();
    for _ in 0..n_obj {
        let (mu, l) = clusters[rng.random_range(0..k)];
        // Rejection-resample out-of-field draws; the attempt cap only
        // matters for covariances vastly wider than the field.
        let mut placed = None;
        for _ in 0..10_000 {
            let z0: f64 = StandardNormal.sample(&mut rng);
            let z1: f64 = StandardNormal.sample(&mut rng);
            let x = mu[0] + l[0][0] * z0;
            let y = mu[1] + l[1][0] * z0 + l[1][1] * z1;
            if let Some(c) = round_to_cell(x, y, m) {
                placed = Some(c);
                break;
            }
        }
        let cell = placed.unwrap_or_else(|| {
            Cell::new(
                (mu[0].round().max(0.0) as usize).min(m - 1),
                (mu[1].round().max(0.0) as usize).min(m - 1),
            )
        });
        cells.insert(cell);
    }

    Field::from_cells(m, cells)
}

/// Draw one offset uniformly from the nonzero square
/// `[-r, r]^2 \ {(0,0)}`.
fn shift_offset(rng: &mut impl Rng, radius: u32) -> (i64, i64) {
    let r = radius as i64;
    loop {
        let dx = rng.random_range(-r..=r);
        let dy = rng.random_range(-r..=r);
        if (dx, dy) != (0, 0) {
            return (dx, dy);
        }
    }
}

fn shifted_clamped(cell: Cell, offset: (i64, i64), size: usize) -> Cell {
    let x = (cell.x as i64 + offset.0).clamp(0, size as i64 - 1);
    let y = (cell.y as i64 + offset.1).clamp(0, size as i64 - 1);
    Cell::new(x as usize, y as usize)
}

/// Sample the episode-fixed prior-knowledge map.
///
/// Pipeline per occupied cell: dropped with `p_pk_fn`, else possibly
/// shifted; afterwards every grid cell lights up as a false positive
/// with `p_pk_fp` (OR-ed into the map).
pub fn generate_prior_map(field: &Field, noise: &NoiseConfig, seed: u64) -> Result<GridMask> {
    noise.validate()?;
    let mut rng = rng_from_seed(seed);
    let m = field.size();
    let mut mask = GridMask::new(m);

    for &obj in field.objects() {
        if rng.random::<f64>() < noise.p_pk_fn {
            continue;
        }
        let cell = if rng.random::<f64>() < noise.p_shift {
            shifted_clamped(obj, shift_offset(&mut rng, noise.shift_radius), m)
        } else {
            obj
        };
        mask.set(cell, true);
    }

    for x in 0..m {
        for y in 0..m {
            if rng.random::<f64>() < noise.p_pk_fp {
                mask.set(Cell::new(x, y), true);
            }
        }
    }
    Ok(mask)
}

/// One noisy observation: the full detection map plus the subset of
/// cells lit by real (surviving, possibly shifted) objects. The reward
/// logic needs the latter; agents only ever see the former.
#[derive(Debug, Clone)]
pub struct Observation {
    pub map: GridMask,
    pub true_detections: GridMask,
}

/// Take one noisy observation of the `n x n` window at `fov_origin`
/// (north-west corner). Detection noise is drawn fresh from `rng` on
/// every call. Errors when the window leaves the field.
pub fn observe(
    field: &Field,
    fov_origin: Cell,
    fov_size: usize,
    noise: &NoiseConfig,
    rng: &mut impl Rng,
) -> Result<GridMask> {
    observe_detailed(field, fov_origin, fov_size, noise, rng).map(|o| o.map)
}

/// As [`observe`], additionally reporting which cells stem from real objects.
pub fn observe_detailed(
    field: &Field,
    fov_origin: Cell,
    fov_size: usize,
    noise: &NoiseConfig,
    rng: &mut impl Rng,
) -> Result<Observation> {
    let m = field.size();
    if fov_origin.x + fov_size > m || fov_origin.y + fov_size > m {
        return Err(Error::Contract(format!(
            "FOV {fov_size}x{fov_size} at origin {fov_origin} leaves the {m}x{m} field"
        )));
    }

    let mut true_det = GridMask::new(fov_size);
    for &obj in field.objects() {
        let in_fov = obj.x >= fov_origin.x
            && obj.x < fov_origin.x + fov_size
            && obj.y >= fov_origin.y
            && obj.y < fov_origin.y + fov_size;
        if !in_fov {
            continue;
        }
        if rng.random::<f64>() < noise.p_dt_fn {
            continue;
        }
        let local = Cell::new(obj.x - fov_origin.x, obj.y - fov_origin.y);
        let cell = if rng.random::<f64>() < noise.p_shift {
            shifted_clamped(local, shift_offset(rng, noise.shift_radius), fov_size)
        } else {
            local
        };
        true_det.set(cell, true);
    }

    let mut map = true_det.clone();
    for x in 0..fov_size {
        for y in 0..fov_size {
            if rng.random::<f64>() < noise.p_dt_fp {
                map.set(Cell::new(x, y), true);
            }
        }
    }
    Ok(Observation {
        map,
        true_detections: true_det,
    })
}
