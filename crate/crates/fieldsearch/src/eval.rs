//! Evaluation harness: runs the learned policy and the coverage
//! baseline across the four realism levels, then aggregates the runs
//! into report tables, curves and an SVG plot.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coverage::{plan_coverage, Corner, CoveragePlan};
use crate::dqn::run_greedy_episode;
use crate::env::{Action, EnvConfig, ObservationSource, SearchEnv};
use crate::field::{generate_field, generate_prior_map, FieldConfig, NoiseConfig};
use crate::geo::{
    build_prior_from_detections, DatasetBundle, OBS_CONFIDENCE_THRESHOLD,
    PRIOR_CONFIDENCE_THRESHOLD,
};
use crate::grid::{Cell, GridMask};
use crate::metrics::{recall_at_steps, score, Metrics, REPORT_CHECKPOINTS};
use crate::nn::QNetwork;
use crate::rng::{derive_seed, tag};
use crate::trace::EpisodeTrace;
use crate::{Error, Result};

/// Which parts of an evaluation come from real-world data.
///
/// L1 simulates everything; L2 takes object positions from a dataset;
/// L3 additionally replays the prior-flight detections; L4 additionally
/// replays the search-flight detections instead of simulating the
/// detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RealismLevel {
    L1,
    L2,
    L3,
    L4,
}

impl RealismLevel {
    pub const ALL: [RealismLevel; 4] = [
        RealismLevel::L1,
        RealismLevel::L2,
        RealismLevel::L3,
        RealismLevel::L4,
    ];

    pub fn uses_real_prior(self) -> bool {
        matches!(self, RealismLevel::L3 | RealismLevel::L4)
    }

    pub fn replays_observations(self) -> bool {
        self == RealismLevel::L4
    }
}

impl fmt::Display for RealismLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RealismLevel::L1 => "L1",
            RealismLevel::L2 => "L2",
            RealismLevel::L3 => "L3",
            RealismLevel::L4 => "L4",
        })
    }
}

impl FromStr for RealismLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" | "1" => Ok(RealismLevel::L1),
            "l2" | "2" => Ok(RealismLevel::L2),
            "l3" | "3" => Ok(RealismLevel::L3),
            "l4" | "4" => Ok(RealismLevel::L4),
            other => Err(Error::Parse(format!(
                "unknown realism level {other:?} (expected L1..L4)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Planner {
    Dqn,
    Coverage,
}

impl fmt::Display for Planner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Planner::Dqn => "dqn",
            Planner::Coverage => "coverage",
        })
    }
}

impl FromStr for Planner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dqn" => Ok(Planner::Dqn),
            "coverage" => Ok(Planner::Coverage),
            other => Err(Error::Parse(format!("unknown planner {other:?}"))),
        }
    }
}

/// One scored episode.
#[derive(Debug, Clone)]
pub struct EvalRun {
    pub run_id: String,
    pub level: RealismLevel,
    pub planner: Planner,
    /// Dataset name for L2..L4 runs.
    pub dataset: Option<String>,
    /// Episode seed for L1 runs.
    pub seed: Option<u64>,
    /// Grid rotation for L2..L4 runs, degrees counter-clockwise.
    pub rotation_deg: Option<u32>,
    pub metrics: Metrics,
    pub trace: EpisodeTrace,
}

impl EvalRun {
    /// Per-step recall series implied by the trace: index k is the
    /// recall after k actions (index 0 after the initial observation).
    pub fn recall_series(&self) -> Vec<f64> {
        let cum = self.trace.cum_gt_found();
        let steps: Vec<usize> = (0..cum.len()).collect();
        recall_at_steps(&cum, self.trace.meta.total_objects, &steps)
    }
}

/// Execute a coverage plan: the drone walks the waypoints and lands,
/// stopping early only on battery exhaustion. The environment must have
/// been reset at the plan's first waypoint.
pub fn run_coverage_episode(
    env: &mut SearchEnv,
    plan: &CoveragePlan,
) -> Result<(f64, EpisodeTrace)> {
    let first = *plan.waypoints.first().ok_or_else(|| {
        Error::Contract("coverage plan has no waypoints".into())
    })?;
    if env.drone() != first {
        return Err(Error::Contract(format!(
            "environment starts at {} but the plan starts at {first}",
            env.drone()
        )));
    }
    let mut trace = EpisodeTrace::start(env);
    let mut total = 0.0;
    for pair in plan.waypoints.windows(2) {
        if env.done() {
            break;
        }
        let action = step_between(pair[0], pair[1])?;
        let result = env.step(action)?;
        total += result.reward;
        trace.record(action, &result, env);
    }
    if !env.done() {
        let result = env.step(Action::Land)?;
        total += result.reward;
        trace.record(Action::Land, &result, env);
    }
    Ok((total, trace))
}

fn step_between(from: Cell, to: Cell) -> Result<Action> {
    let dx = to.x as i64 - from.x as i64;
    let dy = to.y as i64 - from.y as i64;
    match (dx, dy) {
        (-1, 0) => Ok(Action::North),
        (1, 0) => Ok(Action::South),
        (0, -1) => Ok(Action::West),
        (0, 1) => Ok(Action::East),
        _ => Err(Error::Contract(format!(
            "waypoints {from} -> {to} are not one step apart"
        ))),
    }
}

fn finish_run(
    run_id: String,
    level: RealismLevel,
    planner: Planner,
    dataset: Option<String>,
    seed: Option<u64>,
    rotation_deg: Option<u32>,
    env: &SearchEnv,
    trace: EpisodeTrace,
) -> Result<EvalRun> {
    let metrics =
        score(env.found_map(), env.field())?.with_path_length(trace.path_length());
    Ok(EvalRun {
        run_id,
        level,
        planner,
        dataset,
        seed,
        rotation_deg,
        metrics,
        trace,
    })
}

/// Level 1: everything simulated. Each index generates a fresh field
/// and prior; the policy (when given) and the coverage baseline fly the
/// same field with the same noise streams. `policy = None` runs the
/// baseline only. Episodes are seeded per index, so the result is
/// identical for any `jobs` count.
pub fn run_level1(
    policy: Option<&QNetwork<f32>>,
    field_config: &FieldConfig,
    noise: &NoiseConfig,
    env_config: &EnvConfig,
    n_fields: usize,
    master_seed: u64,
    jobs: usize,
) -> Result<Vec<EvalRun>> {
    field_config.validate()?;
    let plan = plan_coverage(field_config.grid_size, env_config.fov_size, Corner::NorthWest)?;

    let one = |i: usize| -> Result<Vec<EvalRun>> {
        let mut runs = Vec::with_capacity(2);
        let base = derive_seed(master_seed, i as u64);
        let field = generate_field(field_config, derive_seed(base, tag::FIELD))?;
        let prior = generate_prior_map(&field, noise, derive_seed(base, tag::PRIOR))?;

        if let Some(net) = policy {
            let mut env = SearchEnv::reset(
                field.clone(),
                prior.clone(),
                env_config,
                ObservationSource::simulated(noise.clone(), base),
                base,
            )?;
            let (_, trace) = run_greedy_episode(net, &mut env)?;
            runs.push(finish_run(
                format!("l1-{i:04}-dqn"),
                RealismLevel::L1,
                Planner::Dqn,
                None,
                Some(base),
                None,
                &env,
                trace,
            )?);
        }

        let mut env = SearchEnv::reset_at(
            field,
            prior,
            env_config,
            ObservationSource::simulated(noise.clone(), base),
            plan.waypoints[0],
        )?;
        let (_, trace) = run_coverage_episode(&mut env, &plan)?;
        runs.push(finish_run(
            format!("l1-{i:04}-coverage"),
            RealismLevel::L1,
            Planner::Coverage,
            None,
            Some(base),
            None,
            &env,
            trace,
        )?);
        Ok(runs)
    };

    let mut per_field: Vec<Option<Result<Vec<EvalRun>>>> = (0..n_fields).map(|_| None).collect();
    if jobs <= 1 {
        for (i, slot) in per_field.iter_mut().enumerate() {
            *slot = Some(one(i));
        }
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots = std::sync::Mutex::new(&mut per_field);
        std::thread::scope(|scope| {
            for _ in 0..jobs.min(n_fields.max(1)) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if i >= n_fields {
                        break;
                    }
                    let result = one(i);
                    slots.lock().unwrap()[i] = Some(result);
                });
            }
        });
    }

    let mut runs = Vec::with_capacity(2 * n_fields);
    for slot in per_field {
        runs.extend(slot.expect("every index visited")?);
    }
    Ok(runs)
}

/// Precision/recall of a real prior map against a dataset's ground
/// truth, reported once per dataset and rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorQualityRow {
    pub dataset: String,
    pub rotation_deg: u32,
    pub precision: f64,
    pub recall: f64,
}

pub struct LevelRuns {
    pub runs: Vec<EvalRun>,
    /// Nonempty only for levels that use a real prior.
    pub prior_quality: Vec<PriorQualityRow>,
}

/// Levels 2..4: object positions come from dataset bundles, each
/// evaluated once per grid rotation. L3 swaps the simulated prior for
/// the prior-flight detections; L4 also replays the search-flight
/// detections. Missing detection files error only when something would
/// consume them, so the baseline (which ignores the prior) still runs.
pub fn run_level(
    level: RealismLevel,
    policy: Option<&QNetwork<f32>>,
    bundles: &[DatasetBundle],
    rotations_deg: &[u32],
    noise: &NoiseConfig,
    env_config: &EnvConfig,
    master_seed: u64,
) -> Result<LevelRuns> {
    if level == RealismLevel::L1 {
        return Err(Error::Config(
            "level L1 is simulated; use run_level1".into(),
        ));
    }
    let mut runs = Vec::new();
    let mut prior_quality = Vec::new();
    for (di, bundle) in bundles.iter().enumerate() {
        for (ri, &rot) in rotations_deg.iter().enumerate() {
            let spec = bundle.gridspec.rotated((rot as f64).to_radians());
            let field = bundle.field(&spec)?;
            let base = derive_seed(master_seed, ((di as u64) << 32) | ri as u64);

            let prior = if level.uses_real_prior() {
                match bundle.require_prior() {
                    Ok(records) => {
                        let p =
                            build_prior_from_detections(records, &spec, PRIOR_CONFIDENCE_THRESHOLD);
                        let q = score(&p, &field)?;
                        prior_quality.push(PriorQualityRow {
                            dataset: bundle.name.clone(),
                            rotation_deg: rot,
                            precision: q.precision,
                            recall: q.recall,
                        });
                        p
                    }
                    // The baseline never reads the prior; only a policy
                    // run needs the file.
                    Err(e) if policy.is_some() => return Err(e),
                    Err(_) => GridMask::new(spec.grid_size),
                }
            } else {
                generate_prior_map(&field, noise, derive_seed(base, tag::PRIOR))?
            };

            let make_source = || -> Result<ObservationSource> {
                if level.replays_observations() {
                    Ok(ObservationSource::replay(
                        bundle.require_flight()?.to_vec(),
                        spec.clone(),
                        OBS_CONFIDENCE_THRESHOLD,
                    ))
                } else {
                    Ok(ObservationSource::simulated(noise.clone(), base))
                }
            };

            let tag_base = format!("{}-{}-rot{rot:03}", level.to_string().to_lowercase(), bundle.name);
            if let Some(net) = policy {
                let mut env = SearchEnv::reset(
                    field.clone(),
                    prior.clone(),
                    env_config,
                    make_source()?,
                    base,
                )?;
                let (_, trace) = run_greedy_episode(net, &mut env)?;
                runs.push(finish_run(
                    format!("{tag_base}-dqn"),
                    level,
                    Planner::Dqn,
                    Some(bundle.name.clone()),
                    None,
                    Some(rot),
                    &env,
                    trace,
                )?);
            }

            let plan = plan_coverage(spec.grid_size, env_config.fov_size, Corner::NorthWest)?;
            let mut env = SearchEnv::reset_at(
                field,
                prior,
                env_config,
                make_source()?,
                plan.waypoints[0],
            )?;
            let (_, trace) = run_coverage_episode(&mut env, &plan)?;
            runs.push(finish_run(
                format!("{tag_base}-coverage"),
                level,
                Planner::Coverage,
                Some(bundle.name.clone()),
                None,
                Some(rot),
                &env,
                trace,
            )?);
        }
    }
    Ok(LevelRuns {
        runs,
        prior_quality,
    })
}

/// Aggregated view over a set of runs, grouped by (level, planner).
#[derive(Debug, Clone)]
pub struct Report {
    pub recall_table: Vec<RecallTableRow>,
    pub summary: Vec<SummaryRow>,
    pub curves: Vec<CurveSeries>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecallTableRow {
    pub level: RealismLevel,
    pub planner: Planner,
    /// Mean recall at each of [`REPORT_CHECKPOINTS`].
    pub recall: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub level: RealismLevel,
    pub planner: Planner,
    pub n_runs: usize,
    pub precision_mean: f64,
    pub precision_std: f64,
    pub recall_mean: f64,
    pub recall_std: f64,
    pub path_length_mean: f64,
    pub path_length_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    pub level: RealismLevel,
    pub planner: Planner,
    /// Mean recall after k actions; traces shorter than the longest in
    /// the group carry their final value forward.
    pub mean_recall: Vec<f64>,
}

/// Mean and population standard deviation (Welford's recurrence).
fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut n = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for v in values {
        n += 1;
        let d = v - mean;
        mean += d / n as f64;
        m2 += d * (v - mean);
    }
    if n == 0 {
        (0.0, 0.0)
    } else {
        (mean, (m2 / n as f64).sqrt())
    }
}

pub fn report(runs: &[EvalRun]) -> Result<Report> {
    if runs.is_empty() {
        return Err(Error::Contract("no runs to report".into()));
    }
    let mut groups: BTreeMap<(RealismLevel, Planner), Vec<&EvalRun>> = BTreeMap::new();
    for run in runs {
        groups.entry((run.level, run.planner)).or_default().push(run);
    }

    let mut recall_table = Vec::new();
    let mut summary = Vec::new();
    let mut curves = Vec::new();
    for (&(level, planner), group) in &groups {
        let per_run: Vec<Vec<f64>> = group
            .iter()
            .map(|r| {
                recall_at_steps(
                    &r.trace.cum_gt_found(),
                    r.trace.meta.total_objects,
                    &REPORT_CHECKPOINTS,
                )
            })
            .collect();
        let recall = (0..REPORT_CHECKPOINTS.len())
            .map(|k| per_run.iter().map(|v| v[k]).sum::<f64>() / group.len() as f64)
            .collect();
        recall_table.push(RecallTableRow {
            level,
            planner,
            recall,
        });

        let (precision_mean, precision_std) =
            mean_std(group.iter().map(|r| r.metrics.precision));
        let (recall_mean, recall_std) = mean_std(group.iter().map(|r| r.metrics.recall));
        let (path_length_mean, path_length_std) =
            mean_std(group.iter().map(|r| r.metrics.path_length as f64));
        summary.push(SummaryRow {
            level,
            planner,
            n_runs: group.len(),
            precision_mean,
            precision_std,
            recall_mean,
            recall_std,
            path_length_mean,
            path_length_std,
        });

        let series: Vec<Vec<f64>> = group.iter().map(|r| r.recall_series()).collect();
        let max_len = series.iter().map(Vec::len).max().unwrap_or(0);
        let mean_recall = (0..max_len)
            .map(|k| {
                series
                    .iter()
                    // A finished episode keeps its final recall.
                    .map(|s| s.get(k).copied().unwrap_or(*s.last().unwrap_or(&0.0)))
                    .sum::<f64>()
                    / series.len() as f64
            })
            .collect();
        curves.push(CurveSeries {
            level,
            planner,
            mean_recall,
        });
    }
    Ok(Report {
        recall_table,
        summary,
        curves,
    })
}

/// `runs.csv`: one row per episode.
pub fn write_runs_csv<W: Write>(runs: &[EvalRun], mut w: W) -> Result<()> {
    writeln!(w, "run_id,level,planner,precision,recall,path_length")?;
    for r in runs {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.run_id, r.level, r.planner, r.metrics.precision, r.metrics.recall,
            r.metrics.path_length
        )?;
    }
    Ok(())
}

pub fn write_recall_table_csv<W: Write>(report: &Report, mut w: W) -> Result<()> {
    write!(w, "level,planner")?;
    for c in REPORT_CHECKPOINTS {
        write!(w, ",recall_at_{c}")?;
    }
    writeln!(w)?;
    for row in &report.recall_table {
        write!(w, "{},{}", row.level, row.planner)?;
        for v in &row.recall {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(report: &Report, mut w: W) -> Result<()> {
    writeln!(
        w,
        "level,planner,n_runs,precision_mean,precision_std,recall_mean,recall_std,\
         path_length_mean,path_length_std"
    )?;
    for s in &report.summary {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            s.level,
            s.planner,
            s.n_runs,
            s.precision_mean,
            s.precision_std,
            s.recall_mean,
            s.recall_std,
            s.path_length_mean,
            s.path_length_std
        )?;
    }
    Ok(())
}

/// Long-format curve points, one row per (series, step).
pub fn write_curves_csv<W: Write>(report: &Report, mut w: W) -> Result<()> {
    writeln!(w, "level,planner,step,mean_recall")?;
    for c in &report.curves {
        for (step, v) in c.mean_recall.iter().enumerate() {
            writeln!(w, "{},{},{step},{v}", c.level, c.planner)?;
        }
    }
    Ok(())
}

/// Parse a curves CSV back into series (the plot command's input).
/// Rows of one series must be consecutive with steps counting up from 0.
pub fn read_curves_csv<R: std::io::BufRead>(r: R) -> Result<Vec<CurveSeries>> {
    let mut lines = r.lines();
    match lines.next().transpose()? {
        Some(h) if h.trim() == "level,planner,step,mean_recall" => {}
        Some(h) => {
            return Err(Error::Parse(format!(
                "bad curves header {h:?} (expected level,planner,step,mean_recall)"
            )))
        }
        None => return Err(Error::Parse("empty curves file".into())),
    }
    let mut series: Vec<CurveSeries> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let bad = |what: &str| Error::Parse(format!("curves row {}: {what}", lineno + 2));
        if fields.len() != 4 {
            return Err(bad("expected 4 columns"));
        }
        let level: RealismLevel = fields[0].parse()?;
        let planner: Planner = fields[1].parse()?;
        let step: usize = fields[2].parse().map_err(|_| bad("bad step"))?;
        let recall: f64 = fields[3].parse().map_err(|_| bad("bad mean_recall"))?;
        let fresh = series
            .last()
            .map(|s| (s.level, s.planner) != (level, planner))
            .unwrap_or(true);
        if fresh {
            series.push(CurveSeries {
                level,
                planner,
                mean_recall: Vec::new(),
            });
        }
        let current = series.last_mut().unwrap();
        if step != current.mean_recall.len() {
            return Err(bad("steps must count up from 0 per series"));
        }
        current.mean_recall.push(recall);
    }
    if series.is_empty() {
        return Err(Error::Parse("curves file has no data rows".into()));
    }
    Ok(series)
}

pub fn write_prior_quality_csv<W: Write>(rows: &[PriorQualityRow], mut w: W) -> Result<()> {
    writeln!(w, "dataset,rotation_deg,precision,recall")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.dataset, r.rotation_deg, r.precision, r.recall
        )?;
    }
    Ok(())
}

const SVG_PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f",
];

/// Recall-vs-steps curves as a standalone SVG document.
pub fn render_curves_svg(curves: &[CurveSeries]) -> String {
    let (w, h) = (720.0, 440.0);
    let (left, right, top, bottom) = (64.0, 170.0, 24.0, 48.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let max_step = curves
        .iter()
        .map(|c| c.mean_recall.len().saturating_sub(1))
        .max()
        .unwrap_or(1)
        .max(1);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));

    // Axes with ticks at recall quartiles and step quarters.
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let y = top + plot_h * (1.0 - frac);
        svg.push_str(&format!(
            "<line x1=\"{left}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
             stroke=\"#ddd\"/>\n",
            left + plot_w
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{frac:.2}</text>\n",
            left - 8.0,
            y + 4.0
        ));
        let x = left + plot_w * frac;
        let step = (max_step as f64 * frac).round() as usize;
        svg.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{step}</text>\n",
            top + plot_h + 18.0
        ));
    }
    svg.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        top + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{0:.2}\" stroke=\"black\"/>\n",
        top + plot_h,
        left + plot_w
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">path length (steps)</text>\n",
        left + plot_w / 2.0,
        h - 10.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {0:.2})\">recall</text>\n",
        top + plot_h / 2.0
    ));

    for (i, c) in curves.iter().enumerate() {
        let color = SVG_PALETTE[i % SVG_PALETTE.len()];
        let points: Vec<String> = c
            .mean_recall
            .iter()
            .enumerate()
            .map(|(step, &r)| {
                let x = left + plot_w * step as f64 / max_step as f64;
                let y = top + plot_h * (1.0 - r.clamp(0.0, 1.0));
                format!("{x:.2},{y:.2}")
            })
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" \
             points=\"{}\"/>\n",
            points.join(" ")
        ));
        let ly = top + 16.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" \
             stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            left + plot_w + 12.0,
            left + plot_w + 36.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\">{} {}</text>\n",
            left + plot_w + 42.0,
            ly + 4.0,
            c.level,
            c.planner
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Write every report artifact for a set of runs into `out_dir`:
/// `runs.csv`, `table_recall_at_steps.csv`, `summary.csv`, `curves.csv`,
/// `curves.svg`, per-run traces under `traces/`, and
/// `prior_quality.csv` when applicable.
pub fn write_report_dir(
    runs: &[EvalRun],
    prior_quality: &[PriorQualityRow],
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let rep = report(runs)?;

    let mut buf = Vec::new();
    write_runs_csv(runs, &mut buf)?;
    std::fs::write(out_dir.join("runs.csv"), &buf)?;

    buf.clear();
    write_recall_table_csv(&rep, &mut buf)?;
    std::fs::write(out_dir.join("table_recall_at_steps.csv"), &buf)?;

    buf.clear();
    write_summary_csv(&rep, &mut buf)?;
    std::fs::write(out_dir.join("summary.csv"), &buf)?;

    buf.clear();
    write_curves_csv(&rep, &mut buf)?;
    std::fs::write(out_dir.join("curves.csv"), &buf)?;

    std::fs::write(out_dir.join("curves.svg"), render_curves_svg(&rep.curves))?;

    if !prior_quality.is_empty() {
        buf.clear();
        write_prior_quality_csv(prior_quality, &mut buf)?;
        std::fs::write(out_dir.join("prior_quality.csv"), &buf)?;
    }

    let trace_dir = out_dir.join("traces");
    std::fs::create_dir_all(&trace_dir)?;
    for r in runs {
        let mut buf = Vec::new();
        r.trace.write_jsonl(&mut buf)?;
        std::fs::write(trace_dir.join(format!("{}.jsonl", r.run_id)), &buf)?;
    }
    Ok(())
}
