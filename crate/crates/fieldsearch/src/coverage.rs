//! Boustrophedon full-coverage planning, the baseline the learned policy
//! is compared against.
//!
//! The planner lays FOV-center rows across the field, spaced one FOV
//! width apart so footprints do not overlap, and connects them into a
//! single serpentine path. Every waypoint is one move from the previous
//! one, so the plan doubles as the action sequence of the baseline
//! flight.

use serde::{Deserialize, Serialize};

use crate::grid::{Cell, Fov, GridMask};
use crate::{Error, Result};

/// Corner of the field the sweep starts in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Corner {
    #[default]
    NorthWest,
    NorthEast,
    SouthWest,
    SouthEast,
}

/// A full-coverage flight path: FOV-center cells, consecutive entries
/// 4-adjacent, whose footprints jointly cover the field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoveragePlan {
    pub grid_size: usize,
    pub fov_size: usize,
    pub waypoints: Vec<Cell>,
}

impl CoveragePlan {
    /// Move actions needed to fly the plan.
    pub fn move_count(&self) -> usize {
        self.waypoints.len().saturating_sub(1)
    }

    /// Union of all FOV footprints along the path.
    pub fn covered(&self) -> GridMask {
        let fov = Fov::new(self.fov_size);
        let mut mask = GridMask::new(self.grid_size);
        for &wp in &self.waypoints {
            for c in fov.cells(wp) {
                mask.set(c, true);
            }
        }
        mask
    }
}

/// Plan a boustrophedon sweep of an `M x M` field with an `N x N` FOV.
///
/// Rows of FOV centers sit at offset `floor(N/2)` inside each `N`-wide
/// band; the last band shifts inward when `M` is not a multiple of `N`.
/// Rows are traversed cell-by-cell, alternating direction, with a
/// straight transit between rows.
pub fn plan_coverage(grid_size: usize, fov_size: usize, start: Corner) -> Result<CoveragePlan> {
    if fov_size < 1 || fov_size > grid_size {
        return Err(Error::Config(format!(
            "coverage FOV {fov_size} must be in [1, {grid_size}]"
        )));
    }
    let m = grid_size;
    let n = fov_size;
    let fov = Fov::new(n);
    let lo = fov.lo();
    let bands = m.div_ceil(n);
    let row_centers: Vec<usize> = (0..bands)
        .map(|b| {
            let origin = if b + 1 == bands { m - n } else { b * n };
            origin + lo
        })
        .collect();
    let y_min = fov.min_center();
    let y_max = fov.max_center(m);

    let mut waypoints = Vec::new();
    for (i, &x) in row_centers.iter().enumerate() {
        let sweep: Vec<usize> = if i % 2 == 0 {
            (y_min..=y_max).collect()
        } else {
            (y_min..=y_max).rev().collect()
        };
        if i > 0 {
            // Transit: step the row coordinate down to the next band,
            // holding the column reached at the end of the last sweep.
            let y = *sweep.first().unwrap();
            let prev = row_centers[i - 1];
            for x_t in prev + 1..=x {
                waypoints.push(Cell::new(x_t, y));
            }
            waypoints.extend(sweep.iter().skip(1).map(|&y| Cell::new(x, y)));
        } else {
            waypoints.extend(sweep.iter().map(|&y| Cell::new(x, y)));
        }
    }

    // Mirror the FOV window, not the raw coordinate: [o, o+n) maps to
    // [m-n-o, m-o), so centers flip as v -> m - n + 2*lo - v. This keeps
    // every footprint inside the field for even n, where the valid
    // center range is asymmetric.
    let reflect = |c: Cell| {
        let flip = |v: usize| m - n + 2 * lo - v;
        match start {
            Corner::NorthWest => c,
            Corner::NorthEast => Cell::new(c.x, flip(c.y)),
            Corner::SouthWest => Cell::new(flip(c.x), c.y),
            Corner::SouthEast => Cell::new(flip(c.x), flip(c.y)),
        }
    };
    let waypoints = waypoints.into_iter().map(reflect).collect();
    Ok(CoveragePlan {
        grid_size: m,
        fov_size: n,
        waypoints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_adjacent(plan: &CoveragePlan) {
        for w in plan.waypoints.windows(2) {
            let dx = w[0].x.abs_diff(w[1].x);
            let dy = w[0].y.abs_diff(w[1].y);
            assert_eq!(dx + dy, 1, "{:?} -> {:?} not one move", w[0], w[1]);
        }
    }

    #[test]
    fn fov_equal_to_field_is_a_single_waypoint() {
        let plan = plan_coverage(12, 12, Corner::NorthWest).unwrap();
        assert_eq!(plan.waypoints, vec![Cell::new(6, 6)]);
        assert_eq!(plan.move_count(), 0);
        assert_eq!(plan.covered().count(), 144);
    }

    #[test]
    fn reference_field_plan_has_756_moves() {
        // 8 bands of 84 in-row moves plus 7 transits of 12.
        let plan = plan_coverage(96, 12, Corner::NorthWest).unwrap();
        assert_eq!(plan.move_count(), 8 * (96 - 12) + 7 * 12);
        assert_eq!(plan.waypoints[0], Cell::new(6, 6));
        assert_adjacent(&plan);
        assert_eq!(plan.covered().count(), 96 * 96);
    }

    #[test]
    fn tiny_field_plan_move_count() {
        // M=24, N=6: 4 bands, 4*(24-6) + 3*6 = 90 moves.
        let plan = plan_coverage(24, 6, Corner::NorthWest).unwrap();
        assert_eq!(plan.move_count(), 90);
        assert_adjacent(&plan);
        assert_eq!(plan.covered().count(), 24 * 24);
    }

    #[test]
    fn non_divisible_field_still_covers_everything() {
        let plan = plan_coverage(30, 7, Corner::NorthWest).unwrap();
        assert_adjacent(&plan);
        assert_eq!(plan.covered().count(), 30 * 30);
        // Full sweeps (24 waypoints per row) sit at the five band
        // centers; transit cells only touch an x value once or twice.
        let mut counts = [0usize; 30];
        for wp in &plan.waypoints {
            counts[wp.x] += 1;
        }
        let sweep_rows: Vec<usize> = (0..30).filter(|&x| counts[x] >= 24).collect();
        assert_eq!(sweep_rows, vec![3, 10, 17, 24, 26]);
    }

    #[test]
    fn every_start_corner_covers_and_stays_adjacent() {
        for corner in [
            Corner::NorthWest,
            Corner::NorthEast,
            Corner::SouthWest,
            Corner::SouthEast,
        ] {
            let plan = plan_coverage(25, 6, corner).unwrap();
            assert_adjacent(&plan);
            assert_eq!(plan.covered().count(), 25 * 25, "{corner:?}");
            let fov = Fov::new(6);
            for &wp in &plan.waypoints {
                assert!(fov.center_valid(wp, 25), "{corner:?} {wp:?}");
            }
        }
    }

    #[test]
    fn corner_reflection_moves_first_waypoint() {
        let nw = plan_coverage(96, 12, Corner::NorthWest).unwrap();
        let se = plan_coverage(96, 12, Corner::SouthEast).unwrap();
        // flip(6) = 96 - 12 + 12 - 6 = 90, the last valid center.
        assert_eq!(se.waypoints[0], Cell::new(90, 90));
        assert_eq!(se.move_count(), nw.move_count());
    }

    #[test]
    fn oversized_fov_is_a_config_error() {
        assert!(plan_coverage(10, 11, Corner::NorthWest).is_err());
    }

    #[test]
    fn move_count_matches_closed_form_when_divisible() {
        for (m, n) in [(96usize, 12usize), (24, 6), (48, 12), (36, 6), (20, 5)] {
            let plan = plan_coverage(m, n, Corner::NorthWest).unwrap();
            let bands = m / n;
            assert_eq!(plan.move_count(), bands * (m - n) + (bands - 1) * n);
        }
    }
}
