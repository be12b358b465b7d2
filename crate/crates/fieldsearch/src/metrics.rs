//! Cell-level detection scoring.
//!
//! A detection counts as a true positive when it falls in the same grid
//! cell as a ground-truth object; object cells without a detection are
//! false negatives. Precision and recall follow, with the convention
//! that an empty denominator scores 1.0 (nothing claimed, nothing
//! missed).

use serde::{Deserialize, Serialize};

use crate::field::Field;
use crate::grid::{Cell, GridMask};
use crate::{Error, Result};

/// Confusion counts and derived rates for one flight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub precision: f64,
    pub recall: f64,
    /// Number of move actions flown (landing and placement cost none).
    pub path_length: usize,
}

impl Metrics {
    pub fn from_counts(true_pos: usize, false_pos: usize, false_neg: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                1.0
            } else {
                num as f64 / den as f64
            }
        };
        Metrics {
            true_pos,
            false_pos,
            false_neg,
            precision: ratio(true_pos, true_pos + false_pos),
            recall: ratio(true_pos, true_pos + false_neg),
            path_length: 0,
        }
    }

    pub fn with_path_length(mut self, path_length: usize) -> Self {
        self.path_length = path_length;
        self
    }
}

/// Score a found-objects map against the ground truth, cell by cell.
pub fn score(found: &GridMask, ground_truth: &Field) -> Result<Metrics> {
    if found.size() != ground_truth.size() {
        return Err(Error::Contract(format!(
            "found map is {f}x{f} but the field is {g}x{g}",
            f = found.size(),
            g = ground_truth.size()
        )));
    }
    let occupancy = ground_truth.occupancy();
    let mut tp = 0;
    let mut fp = 0;
    let mut fneg = 0;
    for x in 0..found.size() {
        for y in 0..found.size() {
            let c = Cell::new(x, y);
            match (found.get(c), occupancy.get(c)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                (false, false) => {}
            }
        }
    }
    Ok(Metrics::from_counts(tp, fp, fneg))
}

/// Recall after each checkpoint, from the cumulative true-positive count
/// per step. Index 0 of `cum_tp` is the state after the initial
/// observation; checkpoints beyond the trace carry the final value.
pub fn recall_at_steps(cum_tp: &[usize], total_objects: usize, checkpoints: &[usize]) -> Vec<f64> {
    let last = cum_tp.last().copied().unwrap_or(0);
    checkpoints
        .iter()
        .map(|&step| {
            let tp = cum_tp.get(step).copied().unwrap_or(last);
            if total_objects == 0 {
                1.0
            } else {
                tp as f64 / total_objects as f64
            }
        })
        .collect()
}

/// Step counts the recall tables report at.
pub const REPORT_CHECKPOINTS: [usize; 4] = [200, 400, 600, 800];

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::collections::BTreeSet;

    fn random_mask(size: usize, fill: f64, rng: &mut impl Rng) -> GridMask {
        let mut m = GridMask::new(size);
        for x in 0..size {
            for y in 0..size {
                if rng.random_range(0.0..1.0) < fill {
                    m.set(Cell::new(x, y), true);
                }
            }
        }
        m
    }

    #[test]
    fn exact_match_scores_perfectly() {
        let field = Field::from_cells(10, [Cell::new(1, 2), Cell::new(7, 7)]).unwrap();
        let m = score(&field.occupancy(), &field).unwrap();
        assert_eq!((m.true_pos, m.false_pos, m.false_neg), (2, 0, 0));
        assert_eq!((m.precision, m.recall), (1.0, 1.0));
    }

    #[test]
    fn empty_found_map_scores_zero_recall_vacuous_precision() {
        let field = Field::from_cells(10, [Cell::new(3, 3)]).unwrap();
        let m = score(&GridMask::new(10), &field).unwrap();
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.false_neg, 1);
    }

    #[test]
    fn size_mismatch_is_a_contract_error() {
        let field = Field::from_cells(10, []).unwrap();
        assert!(score(&GridMask::new(9), &field).is_err());
    }

    #[test]
    fn score_matches_set_intersection_oracle() {
        let mut rng = crate::rng::rng_from_seed(101);
        for _ in 0..300 {
            let found = random_mask(20, rng.random_range(0.0..0.4), &mut rng);
            let truth = random_mask(20, rng.random_range(0.0..0.4), &mut rng);
            let field = Field::from_cells(20, truth.iter_true()).unwrap();
            let m = score(&found, &field).unwrap();

            let f: BTreeSet<Cell> = found.iter_true().collect();
            let t: BTreeSet<Cell> = truth.iter_true().collect();
            assert_eq!(m.true_pos, f.intersection(&t).count());
            assert_eq!(m.false_pos, f.difference(&t).count());
            assert_eq!(m.false_neg, t.difference(&f).count());
        }
    }

    #[test]
    fn score_is_permutation_symmetric() {
        // Relabeling cells the same way in both masks preserves counts.
        let mut rng = crate::rng::rng_from_seed(55);
        let size = 12;
        let found = random_mask(size, 0.3, &mut rng);
        let truth = random_mask(size, 0.2, &mut rng);
        let mut perm: Vec<usize> = (0..size * size).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let apply = |m: &GridMask| {
            let mut out = GridMask::new(size);
            for c in m.iter_true() {
                let idx = perm[c.x * size + c.y];
                out.set(Cell::new(idx / size, idx % size), true);
            }
            out
        };
        let base = score(&found, &Field::from_cells(size, truth.iter_true()).unwrap()).unwrap();
        let permuted = score(
            &apply(&found),
            &Field::from_cells(size, apply(&truth).iter_true()).unwrap(),
        )
        .unwrap();
        assert_eq!(
            (base.true_pos, base.false_pos, base.false_neg),
            (permuted.true_pos, permuted.false_pos, permuted.false_neg)
        );
    }

    #[test]
    fn recall_staircase_matches_hand_computation() {
        // 4 objects; discoveries after steps 0, 2, 2, 5.
        let cum_tp = [1, 1, 3, 3, 3, 4, 4];
        let got = recall_at_steps(&cum_tp, 4, &[0, 1, 2, 3, 5, 6, 100]);
        assert_eq!(got, vec![0.25, 0.25, 0.75, 0.75, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn recall_at_steps_is_monotone() {
        let mut rng = crate::rng::rng_from_seed(9);
        for _ in 0..50 {
            let mut cum = vec![0usize];
            for _ in 0..rng.random_range(1..200) {
                let next = cum.last().unwrap() + rng.random_range(0..2);
                cum.push(next);
            }
            let total = cum.last().unwrap() + rng.random_range(0..3);
            let checkpoints: Vec<usize> = (0..cum.len() + 10).collect();
            let vals = recall_at_steps(&cum, total, &checkpoints);
            for w in vals.windows(2) {
                assert!(w[0] <= w[1] + 1e-12);
            }
        }
    }

    #[test]
    fn recall_with_no_objects_is_one() {
        assert_eq!(recall_at_steps(&[0, 0], 0, &[0, 1]), vec![1.0, 1.0]);
    }
}
