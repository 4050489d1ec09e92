//! Post-hoc rendering: reads the CSV artifacts of a finished run and writes
//! SVG plots plus a console summary. Never recomputes a simulation.

use std::path::Path;

use crate::experiments::{write_atomic, RunError};
use crate::svg::{error_bar_chart, line_chart, SeriesPlot};

struct Table {
    header: Vec<String>,
    columns: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> Result<Table, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Runtime(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| RunError::Runtime(format!("{}: empty", path.display())))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut columns = vec![Vec::new(); header.len()];
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        for (i, field) in line.split(',').enumerate() {
            if i < columns.len() {
                columns[i].push(field.trim().parse().unwrap_or(f64::NAN));
            }
        }
    }
    Ok(Table { header, columns })
}

/// Renders every recognized artifact in `dir`; returns the produced plot
/// names. Errors when the directory holds nothing renderable.
pub fn render(dir: &Path) -> Result<Vec<String>, RunError> {
    if !dir.is_dir() {
        return Err(RunError::Config(format!(
            "{} is not a run directory",
            dir.display()
        )));
    }
    let plots_dir = dir.join("plots");
    std::fs::create_dir_all(&plots_dir)
        .map_err(|e| RunError::Runtime(format!("{}: {e}", plots_dir.display())))?;
    let mut produced = Vec::new();

    let master = dir.join("master_formula.csv");
    if master.is_file() {
        let t = read_table(&master)?;
        let svg = line_chart(
            "master formula: log relative wealth, both sides",
            &[
                SeriesPlot {
                    label: "lhs",
                    color: "steelblue",
                    x: &t.columns[0],
                    y: &t.columns[1],
                },
                SeriesPlot {
                    label: "rhs",
                    color: "crimson",
                    x: &t.columns[0],
                    y: &t.columns[2],
                },
                SeriesPlot {
                    label: "gap",
                    color: "gray",
                    x: &t.columns[0],
                    y: &t.columns[3],
                },
            ],
        );
        write_atomic(&plots_dir.join("master_formula.svg"), svg.as_bytes())?;
        produced.push("plots/master_formula.svg".into());
    }

    let leakage = dir.join("leakage.csv");
    if leakage.is_file() {
        let t = read_table(&leakage)?;
        let svg = line_chart(
            "top-n market wealth: direct vs leakage representation",
            &[
                SeriesPlot {
                    label: "direct",
                    color: "steelblue",
                    x: &t.columns[0],
                    y: &t.columns[1],
                },
                SeriesPlot {
                    label: "via leakage",
                    color: "crimson",
                    x: &t.columns[0],
                    y: &t.columns[2],
                },
            ],
        );
        write_atomic(&plots_dir.join("leakage.svg"), svg.as_bytes())?;
        produced.push("plots/leakage.svg".into());
    }

    let universal = dir.join("universal.csv");
    if universal.is_file() {
        let t = read_table(&universal)?;
        let svg = error_bar_chart(
            "universal portfolio: growth gap per horizon",
            &t.columns[0],
            &t.columns[1],
            &t.columns[2],
        );
        write_atomic(&plots_dir.join("universal_gap.svg"), svg.as_bytes())?;
        produced.push("plots/universal_gap.svg".into());
    }

    let growth = dir.join("growth.csv");
    if growth.is_file() {
        let t = read_table(&growth)?;
        let svg = line_chart(
            "aggregate maximal growth: whole market vs top n",
            &[
                SeriesPlot {
                    label: "G",
                    color: "steelblue",
                    x: &t.columns[0],
                    y: &t.columns[4],
                },
                SeriesPlot {
                    label: "G top-n",
                    color: "crimson",
                    x: &t.columns[0],
                    y: &t.columns[3],
                },
                SeriesPlot {
                    label: "gap",
                    color: "gray",
                    x: &t.columns[0],
                    y: &t.columns[5],
                },
            ],
        );
        write_atomic(&plots_dir.join("growth.svg"), svg.as_bytes())?;
        produced.push("plots/growth.svg".into());
    }

    let sm = dir.join("supermartingale.csv");
    if sm.is_file() {
        let t = read_table(&sm)?;
        // first column holds portfolio ids; plot means against the index
        let x: Vec<f64> = (0..t.columns[1].len()).map(|i| i as f64).collect();
        let three_se: Vec<f64> = t.columns[2].iter().map(|v| 3.0 * v).collect();
        let svg = error_bar_chart(
            "terminal wealth ratio vs the numeraire (3 se bars)",
            &x,
            &t.columns[1],
            &three_se,
        );
        write_atomic(&plots_dir.join("supermartingale.svg"), svg.as_bytes())?;
        produced.push("plots/supermartingale.svg".into());
    }

    let capm = dir.join("capm.csv");
    if capm.is_file() {
        let t = read_table(&capm)?;
        let colors = ["steelblue", "crimson", "seagreen", "goldenrod", "purple", "teal", "maroon"];
        let series: Vec<SeriesPlot> = t.columns[1..]
            .iter()
            .enumerate()
            .map(|(i, col)| SeriesPlot {
                label: &t.header[i + 1],
                color: colors[i % colors.len()],
                x: &t.columns[0],
                y: col,
            })
            .collect();
        let svg = line_chart("fitted leverage and betas", &series);
        write_atomic(&plots_dir.join("capm.svg"), svg.as_bytes())?;
        produced.push("plots/capm.svg".into());
    }

    let refinement = dir.join("refinement.csv");
    if refinement.is_file() {
        let t = read_table(&refinement)?;
        let lx: Vec<f64> = t.columns[0].iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = t.columns[1].iter().map(|v| v.ln()).collect();
        let svg = line_chart(
            "refinement: ln(gap) vs ln(dt)",
            &[SeriesPlot {
                label: &t.header[1],
                color: "steelblue",
                x: &lx,
                y: &ly,
            }],
        );
        write_atomic(&plots_dir.join("refinement.svg"), svg.as_bytes())?;
        produced.push("plots/refinement.svg".into());
    }

    for entry in std::fs::read_dir(dir)
        .map_err(|e| RunError::Runtime(format!("{}: {e}", dir.display())))?
    {
        let entry = entry.map_err(|e| RunError::Runtime(e.to_string()))?;
        let name = entry.file_name().to_string_lossy().to_string();
        if name.starts_with("path_") && name.ends_with(".csv") && name == "path_0.csv" {
            let t = read_table(&entry.path())?;
            let colors = ["steelblue", "crimson", "seagreen", "goldenrod", "purple", "teal", "maroon", "navy"];
            let series: Vec<SeriesPlot> = t.columns[1..]
                .iter()
                .enumerate()
                .map(|(i, col)| SeriesPlot {
                    label: &t.header[i + 1],
                    color: colors[i % colors.len()],
                    x: &t.columns[0],
                    y: col,
                })
                .collect();
            let svg = line_chart("simulated prices", &series);
            write_atomic(&plots_dir.join("prices.svg"), svg.as_bytes())?;
            produced.push("plots/prices.svg".into());
        }
    }

    if produced.is_empty() {
        return Err(RunError::Config(format!(
            "{}: no renderable artifacts found (expected one of master_formula.csv, leakage.csv, universal.csv, growth.csv, capm.csv, supermartingale.csv, refinement.csv, path_0.csv)",
            dir.display()
        )));
    }
    Ok(produced)
}
