//! Run artifacts: tick trace, summary, planning log and field dumps.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Scenario, SnapRecord};
use crate::flowfield::{sample_field, FieldGrid, StreamField};
use crate::plot;
use crate::simulator::{colregs_metrics, EncounterReport, PlanningRecord, RunTrace, SegmentRecord, Summary};
use crate::Vec2;

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const LOG_FILE: &str = "run_log.jsonl";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OutputOptions {
    pub plots: bool,
    pub field: bool,
}

pub fn trace_header(obstacles: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "t", "s", "k", "theta", "x", "y", "psi", "u", "v", "r", "x_d", "y_d", "psi_d", "z_p_x", "z_p_y", "z_psi",
        "z_nu_u", "z_nu_v", "z_nu_r", "omega", "tau_x", "tau_y", "tau_n",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for i in 1..=obstacles {
        h.push(format!("o{i}_x"));
        h.push(format!("o{i}_y"));
    }
    h
}

/// One row per tick, comma separated, shortest round-trip float formatting.
pub fn write_trace<W: Write>(trace: &RunTrace, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(trace.obstacle_radii.len()))?;
    let mut rec: Vec<String> = Vec::new();
    for r in &trace.rows {
        rec.clear();
        rec.push(r.t.to_string());
        rec.push(r.s.to_string());
        rec.push(r.k.to_string());
        let floats = [r.theta, r.position[0], r.position[1], r.psi]
            .into_iter()
            .chain(r.nu)
            .chain(r.p_d)
            .chain([r.psi_d])
            .chain(r.z_p)
            .chain([r.z_psi])
            .chain(r.z_nu)
            .chain([r.omega])
            .chain(r.tau)
            .chain(r.obstacles.iter().flatten().copied());
        rec.extend(floats.map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    scenario: &'a str,
    description: &'a str,
    #[serde(flatten)]
    summary: &'a Summary,
    target: [f64; 2],
    sink_strength: f64,
    encounters: Vec<EncounterReport>,
    snaps: &'a [SnapRecord],
}

pub fn write_summary<W: Write>(sc: &Scenario, trace: &RunTrace, out: W) -> serde_json::Result<()> {
    let file = SummaryFile {
        scenario: &sc.name,
        description: &sc.description,
        summary: &trace.summary,
        target: [trace.target.x, trace.target.y],
        sink_strength: trace.sink_strength,
        encounters: colregs_metrics(trace),
        snaps: &sc.snaps,
    };
    serde_json::to_writer_pretty(out, &file)
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LogLine<'a> {
    Snap(&'a SnapRecord),
    Planning(&'a PlanningRecord),
    Segment(&'a SegmentRecord),
}

/// Snaps, then planning and segment records interleaved in build order.
pub fn write_run_log<W: Write>(sc: &Scenario, trace: &RunTrace, mut out: W) -> io::Result<()> {
    let mut line = |l: LogLine<'_>| -> io::Result<()> {
        serde_json::to_writer(&mut out, &l)?;
        out.write_all(b"\n")
    };
    for s in &sc.snaps {
        line(LogLine::Snap(s))?;
    }
    for (p, s) in trace.planning.iter().zip(&trace.segment_records) {
        line(LogLine::Planning(p))?;
        line(LogLine::Segment(s))?;
    }
    Ok(())
}

/// The stream function the planner saw at a planning step.
pub fn planning_field(record: &PlanningRecord, sink_strength: f64) -> FieldGrid {
    let from = Vec2::new(record.from[0], record.from[1]);
    let mut field = StreamField::new(&record.snapshot, from).with_sink_strength(sink_strength);
    if record.uniform_spin {
        field = field.with_uniform_spin();
    }
    sample_field(&field)
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Write every artifact of a run into `dir`; returns the files written.
pub fn write_all(sc: &Scenario, trace: &RunTrace, dir: &Path, opts: OutputOptions) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let path = dir.join(TRACE_FILE);
    write_trace(trace, create(&path)?).map_err(io::Error::other)?;
    written.push(path);

    let path = dir.join(SUMMARY_FILE);
    let mut f = create(&path)?;
    write_summary(sc, trace, &mut f)?;
    f.write_all(b"\n")?;
    f.flush()?;
    written.push(path);

    let path = dir.join(LOG_FILE);
    let mut f = create(&path)?;
    write_run_log(sc, trace, &mut f)?;
    f.flush()?;
    written.push(path);

    if opts.field || opts.plots {
        for record in &trace.planning {
            let grid = planning_field(record, trace.sink_strength);
            if opts.field {
                let path = dir.join(format!("field_step_{:03}.tsv", record.step));
                let mut f = create(&path)?;
                grid.write_tsv(&mut f)?;
                f.flush()?;
                written.push(path);
            }
            if opts.plots {
                let path = dir.join(format!("plot_step_{:03}.svg", record.step));
                fs::write(&path, plot::snapshot_svg(trace, record, &grid))?;
                written.push(path);
            }
        }
    }
    if opts.plots {
        let path = dir.join("plot_summary.svg");
        fs::write(&path, plot::summary_svg(trace))?;
        written.push(path);
    }
    Ok(written)
}
