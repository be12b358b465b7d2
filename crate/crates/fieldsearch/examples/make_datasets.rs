//! Regenerates the synthetic dataset bundles under `datasets/`.
//!
//! Each bundle mimics one surveyed field: a rotated, UTM-anchored grid,
//! ground-truth object positions with sub-cell jitter, a sparse noisy
//! prior flight and a denser search flight. Detection confidences
//! straddle both decision thresholds (0.05 for priors, 0.5 for
//! observations) so threshold behavior is exercised end to end.
//!
//! Run from the workspace root:
//!     cargo run --example make_datasets

use std::fs;
use std::path::Path;

use rand::Rng;

use fieldsearch::field::{generate_field, FieldConfig};
use fieldsearch::geo::{grid_to_utm, GridSpec};
use fieldsearch::rng::rng_from_seed;

struct BundleSpec {
    name: &'static str,
    center_utm: [f64; 2],
    psi_rad: f64,
    seed: u64,
}

const GRID_SIZE: usize = 24;

const BUNDLES: [BundleSpec; 4] = [
    BundleSpec {
        name: "north_orchard",
        center_utm: [435012.5, 4532708.0],
        psi_rad: 0.0,
        seed: 101,
    },
    BundleSpec {
        name: "south_orchard",
        center_utm: [435190.0, 4532410.5],
        psi_rad: 0.38,
        seed: 202,
    },
    BundleSpec {
        name: "east_meadow",
        center_utm: [436055.25, 4532995.0],
        psi_rad: -0.61,
        seed: 303,
    },
    BundleSpec {
        name: "west_meadow",
        center_utm: [434401.0, 4533120.75],
        psi_rad: 1.17,
        seed: 404,
    },
];

fn main() -> anyhow::Result<()> {
    let root = Path::new("datasets");
    for b in &BUNDLES {
        write_bundle(root, b)?;
    }
    println!("wrote {} bundles under {}", BUNDLES.len(), root.display());
    Ok(())
}

fn write_bundle(root: &Path, b: &BundleSpec) -> anyhow::Result<()> {
    let dir = root.join(b.name);
    fs::create_dir_all(&dir)?;

    let spec = GridSpec {
        center_utm: b.center_utm,
        psi_rad: b.psi_rad,
        s_grid: 1.0,
        grid_size: GRID_SIZE,
    };
    fs::write(dir.join("gridspec.json"), serde_json::to_string_pretty(&spec)?)?;

    let field_config = FieldConfig {
        grid_size: GRID_SIZE,
        n_obj_mean: 15.0,
        n_obj_std: 2.0,
        k_mean: 2.5,
        k_std: 0.5,
        cov_choices: vec![[[3.0, 0.0], [0.0, 3.0]], [[5.0, 1.5], [1.5, 5.0]]],
    };
    let field = generate_field(&field_config, b.seed)?;
    let mut rng = rng_from_seed(b.seed ^ 0x5eed);

    // Ground truth: cell centers plus sub-cell jitter, so positions are
    // realistic but still round back to their cells.
    let mut gt = String::from("utm_x,utm_y\n");
    let objects = field.objects();
    for c in objects {
        let (x, y) = grid_to_utm(c.x as i64, c.y as i64, &spec);
        let jx = rng.random_range(-0.3f64..0.3) * spec.s_grid;
        let jy = rng.random_range(-0.3f64..0.3) * spec.s_grid;
        gt.push_str(&format!("{},{}\n", x + jx, y + jy));
    }
    fs::write(dir.join("ground_truth.csv"), gt)?;

    // Prior flight: misses ~25% of objects, shifts some survivors a
    // cell, adds false positives, and includes one record at exactly the
    // 0.05 keep threshold plus one just below it.
    let mut prior = String::from("utm_x,utm_y,confidence\n");
    for c in objects {
        if rng.random::<f64>() < 0.25 {
            continue;
        }
        let (mut gx, mut gy) = (c.x as i64, c.y as i64);
        if rng.random::<f64>() < 0.25 {
            gx += rng.random_range(-1..=1);
            gy += rng.random_range(-1..=1);
        }
        let (x, y) = grid_to_utm(gx, gy, &spec);
        let conf = (rng.random_range(0.08f64..0.6) * 1000.0).round() / 1000.0;
        prior.push_str(&format!("{x},{y},{conf}\n"));
    }
    for _ in 0..2 {
        let (x, y) = grid_to_utm(
            rng.random_range(0..GRID_SIZE as i64),
            rng.random_range(0..GRID_SIZE as i64),
            &spec,
        );
        let conf = (rng.random_range(0.06f64..0.3) * 1000.0).round() / 1000.0;
        prior.push_str(&format!("{x},{y},{conf}\n"));
    }
    let (x, y) = grid_to_utm(1, 1, &spec);
    prior.push_str(&format!("{x},{y},0.05\n"));
    let (x, y) = grid_to_utm(1, 2, &spec);
    prior.push_str(&format!("{x},{y},0.049\n"));
    fs::write(dir.join("prior_detections.csv"), prior)?;

    // Search flight: finds ~90% of objects at high confidence, one
    // object at exactly the 0.5 keep threshold, one sub-threshold record
    // and one confident false positive.
    let mut flight = String::from("utm_x,utm_y,confidence\n");
    for (i, c) in objects.iter().enumerate() {
        if rng.random::<f64>() < 0.1 {
            continue;
        }
        let (x, y) = grid_to_utm(c.x as i64, c.y as i64, &spec);
        let conf = if i == 0 {
            0.5
        } else {
            (rng.random_range(0.55f64..0.95) * 1000.0).round() / 1000.0
        };
        flight.push_str(&format!("{x},{y},{conf}\n"));
    }
    let (x, y) = grid_to_utm(2, 1, &spec);
    flight.push_str(&format!("{x},{y},0.49\n"));
    let (x, y) = grid_to_utm(
        rng.random_range(0..GRID_SIZE as i64),
        rng.random_range(0..GRID_SIZE as i64),
        &spec,
    );
    flight.push_str(&format!("{x},{y},0.8\n"));
    fs::write(dir.join("flight_detections.csv"), flight)?;

    println!("{}: {} objects", b.name, objects.len());
    Ok(())
}
