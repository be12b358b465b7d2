//! Mapping between UTM coordinates, image pixels and the simulation grid.
//!
//! A georeferenced grid is described by its UTM center, a counter-clockwise
//! rotation against North, the cell size in meters and the side length in
//! cells. Grid row `x` grows flying south, column `y` grows flying east
//! (at zero rotation), matching the map convention in [`crate::grid`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::grid::{Cell, Fov, GridMask};
use crate::{Error, Result};

/// Georeference of a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Grid center, meters Easting/Northing.
    pub center_utm: [f64; 2],
    /// Counter-clockwise rotation of the grid against North, radians.
    pub psi_rad: f64,
    /// Size of one grid cell in meters.
    pub s_grid: f64,
    /// Cells per side (`M`).
    pub grid_size: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_grid > 0.0) {
            return Err(Error::Config("s_grid must be > 0".into()));
        }
        if self.grid_size < 1 {
            return Err(Error::Config("grid_size must be >= 1".into()));
        }
        Ok(())
    }

    /// Same grid, rotated by an extra `delta` radians.
    pub fn rotated(&self, delta: f64) -> GridSpec {
        GridSpec {
            psi_rad: self.psi_rad + delta,
            ..self.clone()
        }
    }
}

/// One georeferenced detection.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub utm_x: f64,
    pub utm_y: f64,
    pub confidence: f64,
}

/// Camera image dimensions in pixels.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ImageSpec {
    pub width: u32,
    pub height: u32,
}

impl Default for ImageSpec {
    fn default() -> Self {
        ImageSpec {
            width: 2048,
            height: 2048,
        }
    }
}

/// Continuous grid coordinates of a UTM point: the scaled easting/northing
/// offsets are swapped and negated into the row/column frame, rotated by
/// `psi`, and shifted so the grid center lands at `(M-1)/2`.
pub fn utm_to_grid_f64(utm_x: f64, utm_y: f64, spec: &GridSpec) -> (f64, f64) {
    let dx = (utm_x - spec.center_utm[0]) / spec.s_grid;
    let dy = (utm_y - spec.center_utm[1]) / spec.s_grid;
    let (sin, cos) = spec.psi_rad.sin_cos();
    // Pre-rotation vector: (-northing offset, easting offset).
    let (vx, vy) = (-dy, dx);
    let x_local = cos * vx - sin * vy;
    let y_local = sin * vx + cos * vy;
    let half = (spec.grid_size as f64 - 1.0) / 2.0;
    (x_local + half, y_local + half)
}

/// Grid cell of a UTM point, rounded to the nearest integer. May land
/// outside `[0, M)` on either axis; callers filter.
pub fn utm_to_grid(utm_x: f64, utm_y: f64, spec: &GridSpec) -> (i64, i64) {
    let (x, y) = utm_to_grid_f64(utm_x, utm_y, spec);
    (x.round() as i64, y.round() as i64)
}

/// UTM coordinates of a cell center; exact algebraic inverse of
/// [`utm_to_grid`] before rounding.
pub fn grid_to_utm(grid_x: i64, grid_y: i64, spec: &GridSpec) -> (f64, f64) {
    let half = (spec.grid_size as f64 - 1.0) / 2.0;
    let x_local = grid_x as f64 - half;
    let y_local = grid_y as f64 - half;
    let (sin, cos) = spec.psi_rad.sin_cos();
    // Inverse rotation, then undo the swap/negate and scaling.
    let vx = cos * x_local + sin * y_local;
    let vy = -sin * x_local + cos * y_local;
    let dx = vy;
    let dy = -vx;
    (
        spec.center_utm[0] + dx * spec.s_grid,
        spec.center_utm[1] + dy * spec.s_grid,
    )
}

/// In-field cell of a UTM point, or `None` when it falls off the grid.
pub fn utm_to_cell(utm_x: f64, utm_y: f64, spec: &GridSpec) -> Option<Cell> {
    let (x, y) = utm_to_grid(utm_x, utm_y, spec);
    let m = spec.grid_size as i64;
    if x < 0 || y < 0 || x >= m || y >= m {
        return None;
    }
    Some(Cell::new(x as usize, y as usize))
}

/// Observation-map cell of an image pixel: row scales with the pixel's
/// vertical coordinate, column with the horizontal one; results are
/// rounded and clamped into `[0, N-1]`.
pub fn pixel_to_obs(x_img: f64, y_img: f64, image: &ImageSpec, fov_size: usize) -> Cell {
    let n = fov_size as f64;
    let x_obs = (n / image.height as f64 * y_img).round();
    let y_obs = (n / image.width as f64 * x_img).round();
    let clamp = |v: f64| (v.max(0.0) as usize).min(fov_size - 1);
    Cell::new(clamp(x_obs), clamp(y_obs))
}

/// Build the `N x N` observation map around `drone` from georeferenced
/// detections: records below `threshold` confidence are discarded, the
/// rest are converted to grid cells, restricted to the drone's footprint
/// and re-expressed footprint-relative.
pub fn detections_to_obsmap(
    records: &[DetectionRecord],
    drone: Cell,
    spec: &GridSpec,
    fov_size: usize,
    threshold: f64,
) -> GridMask {
    let fov = Fov::new(fov_size);
    let origin_x = drone.x as i64 - fov.lo() as i64;
    let origin_y = drone.y as i64 - fov.lo() as i64;
    let mut mask = GridMask::new(fov_size);
    for r in records {
        if r.confidence < threshold {
            continue;
        }
        let (gx, gy) = utm_to_grid(r.utm_x, r.utm_y, spec);
        let (rx, ry) = (gx - origin_x, gy - origin_y);
        if rx < 0 || ry < 0 || rx >= fov_size as i64 || ry >= fov_size as i64 {
            continue;
        }
        mask.set(Cell::new(rx as usize, ry as usize), true);
    }
    mask
}

/// Default confidence cutoff for in-flight observations.
pub const OBS_CONFIDENCE_THRESHOLD: f64 = 0.5;
/// Default confidence cutoff when building prior knowledge.
pub const PRIOR_CONFIDENCE_THRESHOLD: f64 = 0.05;

/// Build the `M x M` prior-knowledge map from georeferenced detections.
/// Records below `threshold` confidence or outside the grid are dropped;
/// duplicates collapse.
pub fn build_prior_from_detections(
    records: &[DetectionRecord],
    spec: &GridSpec,
    threshold: f64,
) -> GridMask {
    let mut mask = GridMask::new(spec.grid_size);
    for r in records {
        if r.confidence < threshold {
            continue;
        }
        if let Some(cell) = utm_to_cell(r.utm_x, r.utm_y, spec) {
            mask.set(cell, true);
        }
    }
    mask
}

/// Waypoints (footprint centers) of the high-altitude prior-knowledge
/// flight: a lawnmower sweep of `N_pk`-sized tiles covering the field
/// without overlap, the last row/column shifted inward when `M` is not a
/// multiple of `N_pk`.
pub fn plan_prior_flight(grid_size: usize, footprint: usize) -> Result<Vec<Cell>> {
    if footprint < 1 || footprint > grid_size {
        return Err(Error::Config(format!(
            "prior-flight footprint {footprint} must be in [1, {grid_size}]"
        )));
    }
    let tiles = grid_size.div_ceil(footprint);
    let lo = footprint / 2;
    let centers: Vec<usize> = (0..tiles)
        .map(|t| {
            let origin = if t + 1 == tiles {
                grid_size - footprint
            } else {
                t * footprint
            };
            origin + lo
        })
        .collect();
    let mut waypoints = Vec::with_capacity(tiles * tiles);
    for (row, &cx) in centers.iter().enumerate() {
        if row % 2 == 0 {
            waypoints.extend(centers.iter().map(|&cy| Cell::new(cx, cy)));
        } else {
            waypoints.extend(centers.iter().rev().map(|&cy| Cell::new(cx, cy)));
        }
    }
    Ok(waypoints)
}

/// A real-world dataset directory: georeference, ground-truth object
/// positions, and (optionally) prior-flight and in-flight detections.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub name: String,
    pub gridspec: GridSpec,
    pub ground_truth: Vec<[f64; 2]>,
    pub prior_detections: Option<Vec<DetectionRecord>>,
    pub flight_detections: Option<Vec<DetectionRecord>>,
    dir: PathBuf,
}

#[derive(Deserialize)]
struct GroundTruthRow {
    utm_x: f64,
    utm_y: f64,
}

fn read_detections(path: &Path) -> Result<Vec<DetectionRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let rec: DetectionRecord = row?;
        out.push(rec);
    }
    Ok(out)
}

impl DatasetBundle {
    /// Assemble a bundle from already-loaded parts (used by generators
    /// and tests; `name` stands in for the directory in error messages).
    pub fn from_parts(
        name: &str,
        gridspec: GridSpec,
        ground_truth: Vec<[f64; 2]>,
        prior_detections: Option<Vec<DetectionRecord>>,
        flight_detections: Option<Vec<DetectionRecord>>,
    ) -> Self {
        DatasetBundle {
            name: name.to_string(),
            gridspec,
            ground_truth,
            prior_detections,
            flight_detections,
            dir: PathBuf::from(name),
        }
    }

    /// Load a bundle directory. `gridspec.json` and `ground_truth.csv`
    /// are required; the detection CSVs are optional and checked per
    /// realism level by [`DatasetBundle::require_prior`] /
    /// [`DatasetBundle::require_flight`].
    pub fn load(dir: &Path) -> Result<Self> {
        let gridspec_path = dir.join("gridspec.json");
        if !gridspec_path.is_file() {
            return Err(Error::MissingFile(gridspec_path));
        }
        let gridspec: GridSpec = serde_json::from_reader(std::fs::File::open(&gridspec_path)?)?;
        gridspec.validate()?;

        let gt_path = dir.join("ground_truth.csv");
        if !gt_path.is_file() {
            return Err(Error::MissingFile(gt_path));
        }
        let mut reader = csv::Reader::from_path(&gt_path)?;
        let mut ground_truth = Vec::new();
        for row in reader.deserialize() {
            let rec: GroundTruthRow = row?;
            ground_truth.push([rec.utm_x, rec.utm_y]);
        }

        let prior_path = dir.join("prior_detections.csv");
        let prior_detections = if prior_path.is_file() {
            Some(read_detections(&prior_path)?)
        } else {
            None
        };
        let flight_path = dir.join("flight_detections.csv");
        let flight_detections = if flight_path.is_file() {
            Some(read_detections(&flight_path)?)
        } else {
            None
        };

        let name = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        Ok(DatasetBundle {
            name,
            gridspec,
            ground_truth,
            prior_detections,
            flight_detections,
            dir: dir.to_path_buf(),
        })
    }

    pub fn require_prior(&self) -> Result<&[DetectionRecord]> {
        self.prior_detections
            .as_deref()
            .ok_or_else(|| Error::MissingFile(self.dir.join("prior_detections.csv")))
    }

    pub fn require_flight(&self) -> Result<&[DetectionRecord]> {
        self.flight_detections
            .as_deref()
            .ok_or_else(|| Error::MissingFile(self.dir.join("flight_detections.csv")))
    }

    /// Ground-truth objects as a [`crate::field::Field`] on the (possibly
    /// rotated) grid. Positions falling off the grid are dropped.
    pub fn field(&self, spec: &GridSpec) -> Result<crate::field::Field> {
        let cells = self
            .ground_truth
            .iter()
            .filter_map(|&[x, y]| utm_to_cell(x, y, spec));
        crate::field::Field::from_cells(spec.grid_size, cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn spec(psi: f64, m: usize, s: f64) -> GridSpec {
        GridSpec {
            center_utm: [683_421.7, 5_762_514.3],
            psi_rad: psi,
            s_grid: s,
            grid_size: m,
        }
    }

    /// Independent oracle: rotate a UTM point about the grid center by
    /// `angle` using the plain rotation matrix.
    fn rotate_about_center(p: (f64, f64), angle: f64, spec: &GridSpec) -> (f64, f64) {
        let (dx, dy) = (p.0 - spec.center_utm[0], p.1 - spec.center_utm[1]);
        let (sin, cos) = angle.sin_cos();
        (
            spec.center_utm[0] + cos * dx - sin * dy,
            spec.center_utm[1] + sin * dx + cos * dy,
        )
    }

    #[test]
    fn center_maps_to_grid_center_for_any_rotation() {
        for psi in [0.0, 0.3, std::f64::consts::FRAC_PI_2, 2.1] {
            let s = spec(psi, 97, 0.5);
            let (x, y) = utm_to_grid(s.center_utm[0], s.center_utm[1], &s);
            assert_eq!((x, y), (48, 48));
            // Even grid: (M-1)/2 = 47.5 rounds to 48.
            let s = spec(psi, 96, 0.5);
            let (x, y) = utm_to_grid(s.center_utm[0], s.center_utm[1], &s);
            assert_eq!((x, y), (48, 48));
        }
    }

    #[test]
    fn one_meter_east_moves_one_column() {
        // psi=0, M=97, s=1: pre-rotation vector (0, 1), shift by 48.
        let s = spec(0.0, 97, 1.0);
        let (x, y) = utm_to_grid(s.center_utm[0] + 1.0, s.center_utm[1], &s);
        assert_eq!((x, y), (48, 49));
        // One meter north decreases the row.
        let (x, y) = utm_to_grid(s.center_utm[0], s.center_utm[1] + 1.0, &s);
        assert_eq!((x, y), (47, 48));
    }

    #[test]
    fn grid_center_cell_maps_back_to_utm_center() {
        let s = spec(0.7, 97, 0.25);
        let (x, y) = grid_to_utm(48, 48, &s);
        assert_abs_diff_eq!(x, s.center_utm[0], epsilon = 1e-9);
        assert_abs_diff_eq!(y, s.center_utm[1], epsilon = 1e-9);
    }

    #[test]
    fn quarter_turn_matches_rotation_matrix_oracle() {
        // psi = pi/2 collapses to x_local = -dx/s, y_local = -dy/s.
        let s = spec(std::f64::consts::FRAC_PI_2, 49, 2.0);
        let half = 24.0;
        for (gx, gy) in [(0i64, 0i64), (10, 40), (48, 3)] {
            let (ux, uy) = grid_to_utm(gx, gy, &s);
            let expect_x = s.center_utm[0] - s.s_grid * (gx as f64 - half);
            let expect_y = s.center_utm[1] - s.s_grid * (gy as f64 - half);
            assert_abs_diff_eq!(ux, expect_x, epsilon = 1e-9);
            assert_abs_diff_eq!(uy, expect_y, epsilon = 1e-9);
        }
    }

    #[test]
    fn inverse_composition_is_identity_on_cells() {
        let mut rng = crate::rng::rng_from_seed(42);
        for _ in 0..200 {
            let s = spec(
                rng.random_range(-3.2..3.2),
                rng.random_range(5..120),
                rng.random_range(0.05..3.0),
            );
            let m = s.grid_size as i64;
            let c = (rng.random_range(0..m), rng.random_range(0..m));
            let (ux, uy) = grid_to_utm(c.0, c.1, &s);
            assert_eq!(utm_to_grid(ux, uy, &s), c);
        }
    }

    #[test]
    fn round_trip_error_within_half_cell_per_grid_axis() {
        let mut rng = crate::rng::rng_from_seed(7);
        for _ in 0..1000 {
            let s = spec(
                rng.random_range(-3.2..3.2),
                rng.random_range(5..120),
                rng.random_range(0.05..3.0),
            );
            let extent = s.grid_size as f64 * s.s_grid;
            let p = (
                s.center_utm[0] + rng.random_range(-extent..extent),
                s.center_utm[1] + rng.random_range(-extent..extent),
            );
            let (gx, gy) = utm_to_grid(p.0, p.1, &s);
            let (qx, qy) = grid_to_utm(gx, gy, &s);
            // Compare in the grid frame, where rounding acts per axis.
            let (lx, ly) = utm_to_grid_f64(p.0, p.1, &s);
            let (mx, my) = utm_to_grid_f64(qx, qy, &s);
            assert!((lx - mx).abs() <= 0.5 + 1e-9, "x error {}", lx - mx);
            assert!((ly - my).abs() <= 0.5 + 1e-9, "y error {}", ly - my);
        }
    }

    #[test]
    fn rotation_equivariance_at_cardinal_angles() {
        let base = spec(0.0, 61, 0.4);
        let mut rng = crate::rng::rng_from_seed(13);
        for k in 0..4u32 {
            let theta = k as f64 * std::f64::consts::FRAC_PI_2;
            let rotated = base.rotated(theta);
            for _ in 0..200 {
                let extent = base.grid_size as f64 * base.s_grid / 2.0;
                let p = (
                    base.center_utm[0] + rng.random_range(-extent..extent),
                    base.center_utm[1] + rng.random_range(-extent..extent),
                );
                let counter = rotate_about_center(p, -theta, &base);
                assert_eq!(
                    utm_to_grid(p.0, p.1, &base),
                    utm_to_grid(counter.0, counter.1, &rotated),
                    "theta={theta}"
                );
            }
        }
    }

    #[test]
    fn pixel_origin_maps_to_cell_origin() {
        let img = ImageSpec::default();
        assert_eq!(pixel_to_obs(0.0, 0.0, &img, 12), Cell::new(0, 0));
    }

    #[test]
    fn pixel_center_maps_to_obs_center() {
        // 12/2048 * 1024 = 6 exactly.
        let img = ImageSpec::default();
        assert_eq!(pixel_to_obs(1024.0, 1024.0, &img, 12), Cell::new(6, 6));
    }

    #[test]
    fn pixel_boundary_rounds_then_clamps() {
        // x_img=2047 -> column 12/2048*2047 = 11.994 -> rounds to 12 -> clamped 11.
        let img = ImageSpec::default();
        assert_eq!(pixel_to_obs(2047.0, 0.0, &img, 12), Cell::new(0, 11));
    }

    #[test]
    fn pixel_to_obs_is_monotone() {
        let img = ImageSpec::default();
        let mut prev = 0;
        for px in 0..2048 {
            let c = pixel_to_obs(px as f64, 0.0, &img, 12);
            assert!(c.y >= prev);
            prev = c.y;
        }
    }

    #[test]
    fn obsmap_empty_records_all_false() {
        let s = spec(0.0, 49, 1.0);
        let m = detections_to_obsmap(&[], Cell::new(24, 24), &s, 12, 0.5);
        assert_eq!(m.count(), 0);
    }

    #[test]
    fn obsmap_record_at_drone_center() {
        let s = spec(0.3, 49, 1.0);
        let drone = Cell::new(24, 24);
        let (ux, uy) = grid_to_utm(24, 24, &s);
        let rec = DetectionRecord {
            utm_x: ux,
            utm_y: uy,
            confidence: 0.9,
        };
        let m = detections_to_obsmap(&[rec], drone, &s, 12, 0.5);
        let fov = Fov::new(12);
        assert_eq!(m.true_cells(), vec![Cell::new(fov.lo(), fov.lo())]);
    }

    #[test]
    fn obsmap_threshold_is_inclusive_at_half() {
        let s = spec(0.0, 49, 1.0);
        let drone = Cell::new(24, 24);
        let (ux, uy) = grid_to_utm(24, 24, &s);
        let at = |confidence| DetectionRecord {
            utm_x: ux,
            utm_y: uy,
            confidence,
        };
        let below = detections_to_obsmap(&[at(0.49)], drone, &s, 12, OBS_CONFIDENCE_THRESHOLD);
        assert_eq!(below.count(), 0);
        let kept = detections_to_obsmap(&[at(0.50)], drone, &s, 12, OBS_CONFIDENCE_THRESHOLD);
        assert_eq!(kept.count(), 1);
    }

    #[test]
    fn obsmap_is_order_independent() {
        let s = spec(1.1, 49, 0.5);
        let drone = Cell::new(24, 24);
        let mut rng = crate::rng::rng_from_seed(3);
        let mut records: Vec<DetectionRecord> = (0..40)
            .map(|_| DetectionRecord {
                utm_x: s.center_utm[0] + rng.random_range(-12.0..12.0),
                utm_y: s.center_utm[1] + rng.random_range(-12.0..12.0),
                confidence: rng.random_range(0.0..1.0),
            })
            .collect();
        let forward = detections_to_obsmap(&records, drone, &s, 12, 0.5);
        records.reverse();
        let backward = detections_to_obsmap(&records, drone, &s, 12, 0.5);
        assert_eq!(forward, backward);
    }

    #[test]
    fn prior_threshold_is_inclusive_at_nominal() {
        let s = spec(0.0, 49, 1.0);
        let (ux, uy) = grid_to_utm(10, 20, &s);
        let at = |confidence| DetectionRecord {
            utm_x: ux,
            utm_y: uy,
            confidence,
        };
        let below = build_prior_from_detections(&[at(0.049)], &s, PRIOR_CONFIDENCE_THRESHOLD);
        assert_eq!(below.count(), 0);
        let kept = build_prior_from_detections(&[at(0.05)], &s, PRIOR_CONFIDENCE_THRESHOLD);
        assert_eq!(kept.true_cells(), vec![Cell::new(10, 20)]);
    }

    #[test]
    fn prior_drops_out_of_field_records() {
        let s = spec(0.0, 49, 1.0);
        let far = DetectionRecord {
            utm_x: s.center_utm[0] + 1e5,
            utm_y: s.center_utm[1],
            confidence: 0.9,
        };
        let m = build_prior_from_detections(&[far], &s, 0.05);
        assert_eq!(m.count(), 0);
    }

    #[test]
    fn prior_flight_tiling_2x2() {
        let wps = plan_prior_flight(96, 48).unwrap();
        assert_eq!(wps.len(), 4);
        // Lawnmower: the second row is traversed in reverse.
        assert_eq!(
            wps,
            vec![
                Cell::new(24, 24),
                Cell::new(24, 72),
                Cell::new(72, 72),
                Cell::new(72, 24)
            ]
        );
    }

    #[test]
    fn prior_flight_single_tile_at_center() {
        let wps = plan_prior_flight(48, 48).unwrap();
        assert_eq!(wps, vec![Cell::new(24, 24)]);
    }

    #[test]
    fn prior_flight_union_covers_field() {
        let wps = plan_prior_flight(96, 32).unwrap();
        assert_eq!(wps.len(), 9);
        let fov = Fov::new(32);
        let mut covered = GridMask::new(96);
        for wp in wps {
            for c in fov.cells(wp) {
                covered.set(c, true);
            }
        }
        assert_eq!(covered.count(), 96 * 96);

        // Non-divisible case: last row/column shifts inward.
        let wps = plan_prior_flight(100, 48).unwrap();
        assert_eq!(wps.len(), 9);
        let fov = Fov::new(48);
        let mut covered = GridMask::new(100);
        for wp in wps {
            for c in fov.cells(wp) {
                covered.set(c, true);
            }
        }
        assert_eq!(covered.count(), 100 * 100);
    }

    #[test]
    fn bundle_load_reports_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let err = DatasetBundle::load(dir.path()).unwrap_err();
        assert!(matches!(err, Error::MissingFile(p) if p.ends_with("gridspec.json")));
    }

    #[test]
    fn bundle_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = spec(0.0, 49, 1.0);
        std::fs::write(
            dir.path().join("gridspec.json"),
            serde_json::to_string(&s).unwrap(),
        )
        .unwrap();
        let (ux, uy) = grid_to_utm(5, 7, &s);
        std::fs::write(
            dir.path().join("ground_truth.csv"),
            format!("utm_x,utm_y\n{ux},{uy}\n"),
        )
        .unwrap();
        let bundle = DatasetBundle::load(dir.path()).unwrap();
        assert_eq!(bundle.ground_truth.len(), 1);
        assert!(bundle.prior_detections.is_none());
        assert!(matches!(
            bundle.require_prior(),
            Err(Error::MissingFile(p)) if p.ends_with("prior_detections.csv")
        ));
        let field = bundle.field(&bundle.gridspec).unwrap();
        assert_eq!(field.objects(), &[Cell::new(5, 7)]);
    }
}
