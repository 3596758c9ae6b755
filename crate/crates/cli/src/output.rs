//! Files written by a run: `report.json`, `report.csv`, `rollouts/*.csv`, `plots/*.svg`.

use std::fs;
use std::path::Path;

use esds::metrics::write_reports_csv;
use log::warn;

use crate::plot::plot_motion;
use crate::protocol::{CorpusSummary, MotionFailure, MotionOutcome, SweepTable};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

pub fn write_run(out: &Path, outcomes: &[Result<MotionOutcome, MotionFailure>], plots: bool) -> esds::Result<CorpusSummary> {
    fs::create_dir_all(out.join("rollouts"))?;
    let summary = CorpusSummary::from_outcomes(outcomes);
    fs::write(out.join(REPORT_JSON), serde_json::to_string_pretty(&summary)? + "\n")?;
    write_reports_csv(&summary.motions, fs::File::create(out.join(REPORT_CSV))?)?;

    for o in outcomes.iter().flatten() {
        for (d, r) in o.rollouts.iter().enumerate() {
            r.save_csv(&out.join("rollouts").join(format!("{}_demo{}.csv", o.motion.name, d + 1)))?;
        }
        if plots {
            write_plot(out, o)?;
        }
    }
    Ok(summary)
}

pub fn write_plot(out: &Path, o: &MotionOutcome) -> esds::Result<()> {
    let title = format!("{} (K={}, SEA={:.1})", o.motion.name, o.report.k_selected, o.report.sea);
    match plot_motion(&title, &o.motion.absolute_demos(), &o.rollouts, Some(&o.trained.ds))? {
        Some(svg) => {
            fs::create_dir_all(out.join("plots"))?;
            fs::write(out.join("plots").join(format!("{}.svg", o.motion.name)), svg)?;
        }
        None => warn!("{}: plot skipped, only 2-D motions are drawn", o.motion.name),
    }
    Ok(())
}

pub fn write_sweep(out: &Path, tables: &[SweepTable]) -> esds::Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("sweep.json"), serde_json::to_string_pretty(tables)? + "\n")?;
    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    w.write_record(["motion", "k", "s_bar", "sea", "converged"])?;
    for t in tables {
        for r in &t.rows {
            w.write_record([t.motion.clone(), t.k.to_string(), r.s_bar.to_string(), r.sea.to_string(), r.converged.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
