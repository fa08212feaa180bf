//! File outputs: RSS map CSV and PGM, trajectories, training logs, Q-tables
//! and the run manifest. Every writer is byte-deterministic.

use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Hyperparams, QTable, StateId};
use crate::episode::{EpisodeResult, TrainingLog};
use crate::geometry::{Action, Position};
use crate::metrics::{ComparisonReport, MetricsError};
use crate::propagation::RssMap;
use crate::scenario::ScenarioConfig;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const RSS_CSV: &str = "rss_map.csv";
pub const RSS_PGM: &str = "rss_map.pgm";
pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const TRAINING_LOG_CSV: &str = "training_log.csv";
pub const QTABLE_CSV: &str = "qtable.csv";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const SCENARIO_JSON: &str = "scenario.json";
pub const COMPARISON_CSV: &str = "comparison.csv";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}, line {line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("Q-table has {found} states but the scenario has {expected}")]
    StateCountMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.to_owned(),
        source,
    }
}

/// `x,y,rss_dbm`, free cells in row-major order, initial-heading values.
pub fn write_rss_csv<W: Write>(w: &mut W, map: &RssMap) -> io::Result<()> {
    writeln!(w, "x,y,rss_dbm")?;
    for (p, v) in map.iter() {
        writeln!(w, "{},{},{:.2}", p.x, p.y, v)?;
    }
    Ok(())
}

/// Binary greyscale image, north up. Blocked cells are 0; free cells scale
/// linearly from 1 (weakest) to 255 (strongest).
pub fn write_rss_pgm<W: Write>(w: &mut W, map: &RssMap) -> io::Result<()> {
    let (lo, hi) = map
        .iter()
        .fold(None, |acc: Option<(f64, f64)>, (_, v)| match acc {
            None => Some((v, v)),
            Some((a, b)) => Some((a.min(v), b.max(v))),
        })
        .unwrap_or((0.0, 0.0));
    let span = hi - lo;
    write!(w, "P5\n{} {}\n255\n", map.width(), map.height())?;
    let mut row = Vec::with_capacity(map.width() as usize);
    for y in (0..map.height() as i32).rev() {
        row.clear();
        for x in 0..map.width() as i32 {
            let px = match map.rss(Position::new(x, y)) {
                None => 0u8,
                Some(_) if span <= 0.0 => 255,
                Some(v) => (1.0 + (v - lo) / span * 254.0).round() as u8,
            };
            row.push(px);
        }
        w.write_all(&row)?;
    }
    Ok(())
}

/// `step,x,y,rss_dbm,action,reward`; the action and reward on row `i` are
/// the move that arrived at that row's cell, so row 0 leaves them empty.
pub fn write_trajectory_csv<W: Write>(w: &mut W, result: Option<&EpisodeResult>) -> io::Result<()> {
    writeln!(w, "step,x,y,rss_dbm,action,reward")?;
    let Some(r) = result else { return Ok(()) };
    for (i, (p, rss)) in r.trajectory.iter().zip(&r.rss_dbm).enumerate() {
        if i == 0 {
            writeln!(w, "0,{},{},{:.2},,", p.x, p.y, rss)?;
        } else {
            writeln!(
                w,
                "{},{},{},{:.2},{},{:.2}",
                i,
                p.x,
                p.y,
                rss,
                r.actions[i - 1].label(),
                r.rewards[i - 1]
            )?;
        }
    }
    Ok(())
}

pub fn write_training_log_csv<W: Write>(w: &mut W, log: &TrainingLog) -> io::Result<()> {
    writeln!(w, "episode,steps,cum_reward,outcome,epsilon")?;
    for r in &log.records {
        writeln!(
            w,
            "{},{},{:.2},{},{:.6}",
            r.episode, r.steps, r.cum_reward, r.outcome, r.epsilon
        )?;
    }
    Ok(())
}

/// `state_id,action,value` with values in shortest round-trip form.
pub fn write_qtable_csv<W: Write>(w: &mut W, q: &QTable) -> io::Result<()> {
    writeln!(w, "state_id,action,value")?;
    for (s, row) in q.rows().iter().enumerate() {
        for a in Action::ALL {
            writeln!(w, "{},{},{}", s, a.label(), row[a.index()])?;
        }
    }
    Ok(())
}

/// Reads a Q-table export, checking it covers exactly `expected_states`.
pub fn read_qtable(
    path: &Path,
    expected_states: usize,
    hyperparams: Hyperparams,
    seed: u64,
) -> Result<QTable, ExportError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let bad = |line: usize, message: String| ExportError::Malformed {
        path: path.to_owned(),
        line,
        message,
    };
    let mut rows: Vec<[Option<f64>; 8]> = Vec::new();
    for (i, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let n = i + 1;
        if i == 0 {
            if line.trim() != "state_id,action,value" {
                return Err(bad(n, format!("unexpected header `{line}`")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let [s, a, v] = fields[..] else {
            return Err(bad(n, "expected 3 fields".into()));
        };
        let s: usize = s.parse().map_err(|e| bad(n, format!("state_id: {e}")))?;
        let a = Action::from_label(a).ok_or_else(|| bad(n, format!("unknown action `{a}`")))?;
        let v: f64 = v.parse().map_err(|e| bad(n, format!("value: {e}")))?;
        if s >= rows.len() {
            rows.resize(s + 1, [None; 8]);
        }
        if rows[s][a.index()].replace(v).is_some() {
            return Err(bad(n, format!("duplicate entry for state {s}, action {a}")));
        }
    }
    if rows.len() != expected_states {
        return Err(ExportError::StateCountMismatch {
            expected: expected_states,
            found: rows.len(),
        });
    }
    let mut table = QTable::new(rows.len(), hyperparams, seed);
    for (s, row) in rows.iter().enumerate() {
        for a in Action::ALL {
            let v = row[a.index()]
                .ok_or_else(|| bad(0, format!("missing entry for state {s}, action {a}")))?;
            table.set(StateId(s as u32), a, v);
        }
    }
    Ok(table)
}

/// Run manifest: enough to re-run from `scenario.json` and check the result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub tool_version: String,
    pub scenario: String,
    pub scenario_hash: String,
    pub master_seed: u64,
    pub iterations: usize,
    pub config_file: String,
}

impl Manifest {
    pub fn for_config(config: &ScenarioConfig) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            tool_version: TOOL_VERSION.into(),
            scenario: config.name.clone(),
            scenario_hash: config.hash(),
            master_seed: config.master_seed,
            iterations: config.iterations,
            config_file: SCENARIO_JSON.into(),
        }
    }

    pub fn read(path: &Path) -> Result<Self, ExportError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| ExportError::Malformed {
            path: path.to_owned(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

pub fn comparison_header() -> &'static str {
    "antenna,frequency_hz,iterations,seed,scenario_hash,episodes_to_first_rescue,\
     median_final_steps,eval_rescued,eval_steps,eval_length_m,eval_flight_time_s,eval_sensing_time_s"
}

pub fn write_comparison_csv<W: Write>(w: &mut W, report: &ComparisonReport) -> io::Result<()> {
    writeln!(w, "{}", comparison_header())?;
    for r in &report.rows {
        let first = r
            .episodes_to_first_rescue
            .map_or(String::new(), |e| e.to_string());
        let median = r
            .median_final_steps
            .map_or(String::new(), |m| format!("{m:.1}"));
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{:.2},{:.2},{:.2}",
            r.antenna,
            r.frequency_hz,
            r.iterations,
            r.seed,
            r.scenario_hash,
            first,
            median,
            r.eval.rescued,
            r.eval.steps,
            r.eval.length_m,
            r.eval.flight_time_s,
            r.eval.sensing_time_s
        )?;
    }
    Ok(())
}

/// Writes `render` into `dir/name`, creating `dir` if needed.
pub fn write_file<F>(dir: &Path, name: &str, render: F) -> Result<PathBuf, ExportError>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>,
{
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    let mut w = BufWriter::new(file);
    render(&mut w)
        .and_then(|_| w.flush())
        .map_err(io_err(&path))?;
    Ok(path)
}

pub fn write_heatmap(dir: &Path, map: &RssMap) -> Result<(), ExportError> {
    write_file(dir, RSS_CSV, |w| write_rss_csv(w, map))?;
    write_file(dir, RSS_PGM, |w| write_rss_pgm(w, map))?;
    Ok(())
}

/// Artefacts of a complete training run.
pub struct RunArtifacts<'a> {
    pub config: &'a ScenarioConfig,
    pub map: &'a RssMap,
    pub log: &'a TrainingLog,
    pub qtable: &'a QTable,
    /// Greedy evaluation from the configured start, if there is one.
    pub trajectory: Option<&'a EpisodeResult>,
}

pub fn write_outputs(out_dir: &Path, run: &RunArtifacts<'_>) -> Result<Vec<PathBuf>, ExportError> {
    write_heatmap(out_dir, run.map)?;
    let mut paths = vec![out_dir.join(RSS_CSV), out_dir.join(RSS_PGM)];
    paths.push(write_file(out_dir, TRAJECTORY_CSV, |w| {
        write_trajectory_csv(w, run.trajectory)
    })?);
    paths.push(write_file(out_dir, TRAINING_LOG_CSV, |w| {
        write_training_log_csv(w, run.log)
    })?);
    paths.push(write_file(out_dir, QTABLE_CSV, |w| {
        write_qtable_csv(w, run.qtable)
    })?);
    paths.push(write_file(out_dir, SCENARIO_JSON, |w| {
        w.write_all(run.config.to_canonical_json().as_bytes())
    })?);
    let manifest = Manifest::for_config(run.config);
    paths.push(write_file(out_dir, MANIFEST_JSON, |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        w.write_all(b"\n")
    })?);
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::{Outcome, TrainingRecord};
    use crate::geometry::{FloorPlan, Point, Wall};
    use crate::propagation::{build_rss_map, PropagationParams};

    fn small_map() -> RssMap {
        let plan = FloorPlan::new(6, 4, vec![Wall::solid(3.0, 0.0, 3.0, 1.0, 5.0)], 0.5).unwrap();
        build_rss_map(&plan, Point::new(5.2, 3.1), &PropagationParams::default()).unwrap()
    }

    fn render<F: FnOnce(&mut Vec<u8>) -> io::Result<()>>(f: F) -> Vec<u8> {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        buf
    }

    #[test]
    fn rss_csv_round_trips_at_two_decimals() {
        let map = small_map();
        let text = String::from_utf8(render(|w| write_rss_csv(w, &map))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,y,rss_dbm"));
        let mut count = 0;
        let mut last: Option<(i32, i32)> = None;
        for line in lines {
            let f: Vec<&str> = line.split(',').collect();
            let (x, y): (i32, i32) = (f[0].parse().unwrap(), f[1].parse().unwrap());
            let v: f64 = f[2].parse().unwrap();
            let truth = map.rss(Position::new(x, y)).unwrap();
            assert!((v - truth).abs() <= 0.005 + 1e-12);
            if let Some((lx, ly)) = last {
                assert!((ly, lx) < (y, x), "row-major order");
            }
            last = Some((x, y));
            count += 1;
        }
        assert_eq!(count, map.iter().count());
    }

    #[test]
    fn pgm_layout() {
        let map = small_map();
        let bytes = render(|w| write_rss_pgm(w, &map));
        let header = b"P5\n6 4\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        let px = &bytes[header.len()..];
        assert_eq!(px.len(), 24);
        for y in 0..4 {
            for x in 0..6 {
                let v = px[(3 - y) * 6 + x];
                match map.rss(Position::new(x as i32, y as i32)) {
                    None => assert_eq!(v, 0),
                    Some(_) => assert!(v >= 1),
                }
            }
        }
        assert_eq!(*px.iter().max().unwrap(), 255);
        assert!(px.contains(&1));
    }

    #[test]
    fn empty_trajectory_is_header_only() {
        let text = String::from_utf8(render(|w| write_trajectory_csv(w, None))).unwrap();
        assert_eq!(text, "step,x,y,rss_dbm,action,reward\n");
    }

    #[test]
    fn trajectory_rows() {
        let r = EpisodeResult {
            episode_index: 0,
            trajectory: vec![Position::new(0, 0), Position::new(1, 1)],
            actions: vec![Action::NE],
            rss_dbm: vec![-40.0, -37.456],
            rewards: vec![2.544],
            outcome: Outcome::Rescued,
            steps: 1,
        };
        let text = String::from_utf8(render(|w| write_trajectory_csv(w, Some(&r)))).unwrap();
        assert_eq!(
            text,
            "step,x,y,rss_dbm,action,reward\n0,0,0,-40.00,,\n1,1,1,-37.46,NE,2.54\n"
        );
    }

    #[test]
    fn training_log_rows() {
        let log = TrainingLog {
            scenario: "t".into(),
            master_seed: 1,
            records: vec![TrainingRecord {
                episode: 0,
                steps: 12,
                cum_reward: 3.14667,
                outcome: Outcome::StepLimit,
                epsilon: 0.999,
            }],
        };
        let text = String::from_utf8(render(|w| write_training_log_csv(w, &log))).unwrap();
        assert_eq!(
            text,
            "episode,steps,cum_reward,outcome,epsilon\n0,12,3.15,StepLimit,0.999000\n"
        );
    }

    #[test]
    fn qtable_round_trip_is_exact() {
        let mut q = QTable::new(3, Hyperparams::default(), 0);
        let vals = [
            0.1 + 0.2,
            -1.0 / 3.0,
            1e-300,
            -0.0,
            123456.78901234567,
            f64::MIN_POSITIVE,
        ];
        for (i, v) in vals.iter().enumerate() {
            q.set(StateId((i % 3) as u32), Action::ALL[i % 8], *v);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(dir.path(), QTABLE_CSV, |w| write_qtable_csv(w, &q)).unwrap();
        let back = read_qtable(&path, 3, Hyperparams::default(), 0).unwrap();
        for (a, b) in q.rows().iter().zip(back.rows()) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        match read_qtable(&path, 4, Hyperparams::default(), 0) {
            Err(ExportError::StateCountMismatch {
                expected: 4,
                found: 3,
            }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_qtable_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(dir.path(), "q.csv", |w| {
            w.write_all(b"state_id,action,value\n0,UP,1.0\n")
        })
        .unwrap();
        assert!(matches!(
            read_qtable(&path, 1, Hyperparams::default(), 0),
            Err(ExportError::Malformed { line: 2, .. })
        ));
        let missing = dir.path().join("absent.csv");
        match read_qtable(&missing, 1, Hyperparams::default(), 0) {
            Err(e @ ExportError::Io { .. }) => assert!(e.to_string().contains("absent.csv")),
            other => panic!("{other:?}"),
        }
    }
}
