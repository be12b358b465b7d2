//! End-to-end tests of the `fieldsearch` binary: every subcommand, the
//! artifacts it writes, and its failure behavior.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fieldsearch::coverage::CoveragePlan;
use fieldsearch::dqn::Checkpoint;
use fieldsearch::field::Field;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fieldsearch")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr_line(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr).trim_end().to_string();
    assert_eq!(text.lines().count(), 1, "expected one diagnostic line, got: {text}");
    text
}

/// 8x8 grid, 4x4 FOV, a deliberately small network and a 40-step
/// training run sized so the replay warmup (15 of 30) is passed early.
const TINY_CONFIG: &str = r#"{
  "version": 1,
  "field": {"grid_size": 8, "n_obj_mean": 4, "n_obj_std": 1, "k_mean": 1, "k_std": 0,
            "cov_choices": [[[2.0, 0.0], [0.0, 2.0]]]},
  "env": {"fov_size": 4, "b_init": 10},
  "network": {"global_channels": 4, "global_size": 15, "local_channels": 4, "local_size": 4,
              "global_pool_kernel": 3,
              "global_conv": [{"kernels": 4, "kernel_size": 3, "stride": 1}],
              "local_conv": [{"kernels": 4, "kernel_size": 3, "stride": 1}],
              "fc_sizes": [16, 5]},
  "train": {"n_steps": 40, "n_buffer": 30, "n_batch": 4, "n_eval": 1,
            "eval_period": 20, "target_sync_period": 10,
            "epsilon": {"start": 1.0, "end": 0.1, "decay_steps": 20}},
  "eval": {"n_fields": 3, "rotations_deg": [0, 90, 180, 270]}
}"#;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

fn dataset_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../datasets")
        .join(name)
}

fn data_rows(csv: &Path) -> Vec<String> {
    let text = fs::read_to_string(csv).unwrap();
    text.lines().skip(1).map(str::to_string).collect()
}

#[test]
fn gen_field_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), TINY_CONFIG);
    let config = config.to_str().unwrap();

    for (out, seed) in [("a", "7"), ("b", "7"), ("c", "8")] {
        let out_dir = tmp.path().join(out);
        assert_ok(&run(&[
            "gen-field",
            "--config",
            config,
            "--seed",
            seed,
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]));
    }

    for name in ["field.json", "field.pgm", "prior.json", "prior.pgm"] {
        let a = fs::read(tmp.path().join("a").join(name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs across identical seeds");
    }
    let a = fs::read(tmp.path().join("a/field.json")).unwrap();
    let c = fs::read(tmp.path().join("c/field.json")).unwrap();
    assert_ne!(a, c, "different seeds produced the same field");

    let field: Field = serde_json::from_slice(&a).unwrap();
    assert_eq!(field.size(), 8);
}

#[test]
fn train_zero_steps_saves_initial_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let zero = TINY_CONFIG.replace("\"n_steps\": 40", "\"n_steps\": 0");
    let config = write_config(tmp.path(), &zero);
    let out_dir = tmp.path().join("out");

    assert_ok(&run(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]));

    for name in ["best.ckpt", "last.ckpt"] {
        let ckpt = Checkpoint::load(&out_dir.join(name)).unwrap();
        assert_eq!(ckpt.train_step, 0);
        assert_eq!(ckpt.eval_mean_reward, None, "no evaluation ran");
    }
    let log = fs::read_to_string(out_dir.join("reward_log.csv")).unwrap();
    assert_eq!(log, "step,mean_eval_reward\n");
}

#[test]
fn train_resume_extends_reward_log() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), TINY_CONFIG);
    let config = config.to_str().unwrap();
    let out_dir = tmp.path().join("out");
    let out = out_dir.to_str().unwrap();

    assert_ok(&run(&["train", "--config", config, "--out-dir", out]));
    let last = out_dir.join("last.ckpt");
    assert_eq!(Checkpoint::load(&last).unwrap().train_step, 40);

    assert_ok(&run(&[
        "train",
        "--config",
        config,
        "--out-dir",
        out,
        "--resume",
        last.to_str().unwrap(),
    ]));
    assert_eq!(Checkpoint::load(&last).unwrap().train_step, 80);

    let log = fs::read_to_string(out_dir.join("reward_log.csv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "step,mean_eval_reward");
    let steps: Vec<u64> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(steps, [20, 40, 60, 80], "resume must continue the step axis");
}

#[test]
fn eval_level1_writes_report_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), TINY_CONFIG);
    let config = config.to_str().unwrap();
    let train_dir = tmp.path().join("train");
    let zero = TINY_CONFIG.replace("\"n_steps\": 40", "\"n_steps\": 0");
    let zero_config = write_config(&tmp.path().join("."), &zero);
    assert_ok(&run(&[
        "train",
        "--config",
        zero_config.to_str().unwrap(),
        "--out-dir",
        train_dir.to_str().unwrap(),
    ]));

    let eval_dir = tmp.path().join("eval");
    assert_ok(&run(&[
        "eval",
        "--config",
        config,
        "--level",
        "L1",
        "--checkpoint",
        train_dir.join("best.ckpt").to_str().unwrap(),
        "--n-fields",
        "2",
        "--out-dir",
        eval_dir.to_str().unwrap(),
    ]));

    let runs = fs::read_to_string(eval_dir.join("runs.csv")).unwrap();
    let lines: Vec<&str> = runs.lines().collect();
    assert_eq!(lines[0], "run_id,level,planner,precision,recall,path_length");
    assert_eq!(lines.len(), 5, "2 fields x 2 planners plus header");
    assert_eq!(lines.iter().filter(|l| l.contains(",dqn,")).count(), 2);
    assert_eq!(lines.iter().filter(|l| l.contains(",coverage,")).count(), 2);

    for name in ["summary.csv", "table_recall_at_steps.csv", "curves.csv"] {
        assert!(eval_dir.join(name).is_file(), "{name} missing");
    }
    let svg = fs::read_to_string(eval_dir.join("curves.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(fs::read_dir(eval_dir.join("traces")).unwrap().count(), 4);
}

#[test]
fn eval_level4_covers_every_dataset_rotation_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), TINY_CONFIG);
    let eval_dir = tmp.path().join("eval");

    let mut args: Vec<String> = vec![
        "eval".into(),
        "--config".into(),
        config.to_str().unwrap().into(),
        "--level".into(),
        "L4".into(),
        "--coverage-only".into(),
        "--out-dir".into(),
        eval_dir.to_str().unwrap().into(),
    ];
    for name in ["north_orchard", "south_orchard", "east_meadow", "west_meadow"] {
        args.push("--dataset".into());
        args.push(dataset_dir(name).to_str().unwrap().into());
    }
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_ok(&run(&args));

    let rows = data_rows(&eval_dir.join("runs.csv"));
    assert_eq!(rows.len(), 16, "4 datasets x 4 rotations");
    assert!(rows.iter().all(|r| r.contains(",L4,coverage,")));
    for rot in ["rot000", "rot090", "rot180", "rot270"] {
        assert_eq!(rows.iter().filter(|r| r.contains(rot)).count(), 4);
    }
    assert_eq!(data_rows(&eval_dir.join("prior_quality.csv")).len(), 16);
    assert_eq!(fs::read_dir(eval_dir.join("traces")).unwrap().count(), 16);
}

#[test]
fn eval_parallel_jobs_match_sequential_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), TINY_CONFIG);
    let config = config.to_str().unwrap();

    let mut outputs = Vec::new();
    for (dir, jobs_flag) in [("seq", "--deterministic"), ("par", "--jobs")] {
        let eval_dir = tmp.path().join(dir);
        let mut args = vec![
            "eval",
            "--config",
            config,
            "--level",
            "L1",
            "--coverage-only",
            "--n-fields",
            "4",
            "--seed",
            "11",
            "--out-dir",
            eval_dir.to_str().unwrap(),
            jobs_flag,
        ];
        if jobs_flag == "--jobs" {
            args.push("3");
        }
        assert_ok(&run(&args));
        outputs.push(fs::read(eval_dir.join("runs.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "jobs=3 must reproduce sequential output");
}

#[test]
fn eval_without_checkpoint_or_coverage_only_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), TINY_CONFIG);

    let out = run(&[
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--level",
        "L1",
        "--out-dir",
        tmp.path().join("eval").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(stderr_line(&out).starts_with("error:"));
}

#[test]
fn coverage_emits_loadable_plan() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), TINY_CONFIG);
    let out_dir = tmp.path().join("out");

    let out = run(&[
        "coverage",
        "--config",
        config.to_str().unwrap(),
        "--corner",
        "south-east",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("covers 64 cells"));

    let plan: CoveragePlan =
        serde_json::from_str(&fs::read_to_string(out_dir.join("coverage_plan.json")).unwrap())
            .unwrap();
    assert!(!plan.waypoints.is_empty());
}

#[test]
fn plot_renders_one_polyline_per_series() {
    let tmp = tempfile::tempdir().unwrap();
    let curves = tmp.path().join("curves.csv");
    fs::write(
        &curves,
        "level,planner,step,mean_recall\n\
         L1,dqn,0,0\nL1,dqn,1,0.25\nL1,dqn,2,0.5\n\
         L1,coverage,0,0\nL1,coverage,1,0.1\nL1,coverage,2,0.2\n",
    )
    .unwrap();
    let svg_path = tmp.path().join("curves.svg");

    assert_ok(&run(&[
        "plot",
        "--input",
        curves.to_str().unwrap(),
        "--out",
        svg_path.to_str().unwrap(),
    ]));
    let svg = fs::read_to_string(&svg_path).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "step,recall\n0,0\n").unwrap();
    let out = run(&[
        "plot",
        "--input",
        bad.to_str().unwrap(),
        "--out",
        svg_path.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(stderr_line(&out).starts_with("error:"));
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = TINY_CONFIG.replace("\"version\": 1", "\"version\": 1, \"learning_rate\": 0.1");
    let config = write_config(tmp.path(), &bad);

    let out = run(&[
        "gen-field",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let line = stderr_line(&out);
    assert!(line.starts_with("error:"), "diagnostic was: {line}");
}
