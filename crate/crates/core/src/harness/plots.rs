//! Plot artifacts: one data file and one matplotlib script per measurement.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{read_results, HarnessError, MetricsRecord, RunStatus};

/// (file stem, CSV column, axis label, log scale)
pub const PLOT_METRICS: [(&str, &str, &str, bool); 5] = [
    ("replan_time", "time_ms", "Time taken to replan (ms)", true),
    ("plan_size", "plan_len", "Plan size (number of actions)", false),
    ("set_difference", "set_diff", "Set difference (actions) vs. original plan", false),
    ("symmetric_difference", "sym_diff", "Symmetric difference (actions)", false),
    ("commitments_violated", "violations", "Number of commitments violated", false),
];

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("{0} has no result rows")]
    Empty(PathBuf),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

fn value(r: &MetricsRecord, column: &str) -> Option<f64> {
    match column {
        "time_ms" => r.time_ms.map(|v| v as f64),
        "plan_len" => r.plan_len.map(|v| v as f64),
        "set_diff" => r.set_diff.map(|v| v as f64),
        "sym_diff" => r.sym_diff.map(|v| v as f64),
        "violations" => r.violations.map(|v| v as f64),
        _ => None,
    }
}

/// Writes `<stem>.dat` and `<stem>.py` for every measurement into
/// `out_dir`. Timed-out and unsolvable rows have no data points. Returns
/// the files written.
pub fn emit_plots(csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, PlotError> {
    let records = read_results(csv)?;
    if records.is_empty() {
        return Err(PlotError::Empty(csv.to_path_buf()));
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for (stem, column, label, log) in PLOT_METRICS {
        let mut data = String::from("instance\tpackages\tseed\tstrategy\tvalue\n");
        let mut series = BTreeSet::new();
        for r in records.iter().filter(|r| r.status == RunStatus::Ok) {
            if let Some(v) = value(r, column) {
                writeln!(data, "{}\t{}\t{}\t{}\t{}", r.instance, r.packages, r.seed, r.strategy, v).unwrap();
                series.insert(r.strategy.to_string());
            }
        }
        let dat = out_dir.join(format!("{stem}.dat"));
        fs::write(&dat, data)?;
        let py = out_dir.join(format!("{stem}.py"));
        fs::write(&py, script(stem, label, log))?;
        written.push(dat);
        written.push(py);
    }
    Ok(written)
}

fn script(stem: &str, label: &str, log: bool) -> String {
    let scale = if log { "ax.set_yscale('log')\n" } else { "" };
    format!(
        r#"# Renders {stem}.dat to {stem}.png: one series per strategy, instances
# ordered by size then seed.
import csv
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "{stem}.dat")) as f:
    rows = list(csv.DictReader(f, delimiter="\t"))

instances = sorted({{(int(r["packages"]), int(r["seed"])) for r in rows}})
x_of = {{key: i for i, key in enumerate(instances)}}
fig, ax = plt.subplots(figsize=(8, 4.5))
for strategy in sorted({{r["strategy"] for r in rows}}):
    pts = sorted((x_of[(int(r["packages"]), int(r["seed"]))], float(r["value"]))
                 for r in rows if r["strategy"] == strategy)
    ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=strategy)
{scale}ax.set_xlabel("instance (packages-seed)")
ax.set_xticks(range(len(instances)))
ax.set_xticklabels([f"{{n}}-{{s}}" for n, s in instances], rotation=90, fontsize=6)
ax.set_ylabel("{label}")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(here, "{stem}.png"), dpi=150)
"#
    )
}
