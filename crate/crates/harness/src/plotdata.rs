//! Gnuplot-friendly column files: `#`-prefixed header, whitespace-separated
//! values in shortest round-trip notation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use jkoflow::jko::Trajectory;

use crate::convergence::ConvergenceTable;
use crate::pipeline::ComparisonResult;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotData {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn render(&self, title: &str) -> String {
        let mut s = format!("# {title}\n# {}\n", self.columns.join(" "));
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let comments: Vec<&str> = text.lines().filter_map(|l| l.strip_prefix('#')).collect();
        let columns: Vec<String> = comments
            .last()
            .ok_or_else(|| anyhow!("plot data has no header"))?
            .split_whitespace()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .with_context(|| format!("line {}", i + 1))?;
            if row.len() != columns.len() {
                return Err(anyhow!("line {}: {} values for {} columns", i + 1, row.len(), columns.len()));
            }
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn read(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }
}

fn write(dir: &Path, name: &str, title: &str, data: &PlotData) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, data.render(title)).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn trajectory_data(traj: &Trajectory) -> PlotData {
    let columns = ["step", "time", "potential", "entropy", "second_moment", "w2_to_prev", "h1_seminorm_sq", "norm_m"];
    PlotData {
        columns: columns.iter().map(|c| c.to_string()).collect(),
        rows: traj
            .per_step
            .iter()
            .enumerate()
            .map(|(i, r)| {
                vec![
                    i as f64,
                    traj.time(i),
                    r.potential,
                    r.entropy,
                    r.second_moment,
                    r.w2_to_prev,
                    r.h1_seminorm_sq,
                    r.norm_m,
                ]
            })
            .collect(),
    }
}

/// `trajectory.dat`: one row per snapshot.
pub fn emit_trajectory(traj: &Trajectory, dir: impl AsRef<Path>) -> anyhow::Result<PathBuf> {
    let title = format!("jko trajectory tau={:e} t0={:e}", traj.tau, traj.t0);
    write(dir.as_ref(), "trajectory.dat", &title, &trajectory_data(traj))
}

pub fn comparison_data(cmp: &ComparisonResult) -> PlotData {
    PlotData {
        columns: vec!["time".into(), "l1_jko_vs_fv".into(), "w2_jko_vs_fv".into()],
        rows: (0..cmp.times.len())
            .map(|i| vec![cmp.times[i], cmp.l1_jko_vs_fv[i], cmp.w2_jko_vs_fv[i]])
            .collect(),
    }
}

/// `comparison.dat`.
pub fn emit_comparison(cmp: &ComparisonResult, dir: impl AsRef<Path>) -> anyhow::Result<PathBuf> {
    write(dir.as_ref(), "comparison.dat", "jko vs fv", &comparison_data(cmp))
}

/// `convergence.dat`.
pub fn emit_convergence(table: &ConvergenceTable, dir: impl AsRef<Path>) -> anyhow::Result<PathBuf> {
    let data = PlotData {
        columns: ["tau", "n", "l1", "lm", "w2"].iter().map(|c| c.to_string()).collect(),
        rows: table.rows.iter().map(|r| vec![r.tau, r.n as f64, r.l1, r.lm, r.w2]).collect(),
    };
    write(dir.as_ref(), "convergence.dat", &format!("convergence against {}", table.reference), &data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trajectory_is_header_only() {
        let traj = Trajectory {
            tau: 1e-3,
            t0: 0.0,
            states: Vec::new(),
            per_step: Vec::new(),
        };
        let text = trajectory_data(&traj).render("t");
        assert_eq!(text.lines().count(), 2);
        let back = PlotData::parse(&text).unwrap();
        assert_eq!(back.columns.len(), 8);
        assert!(back.rows.is_empty());
    }

    #[test]
    fn values_round_trip_exactly() {
        let data = PlotData {
            columns: vec!["a".into(), "b".into()],
            rows: vec![vec![0.1, 1.0 / 3.0], vec![-2.5e-300, f64::MAX], vec![f64::MIN_POSITIVE, 123456789.12345679]],
        };
        assert_eq!(PlotData::parse(&data.render("x")).unwrap(), data);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(PlotData::parse("# a b\n1 2\n3\n").is_err());
        assert!(PlotData::parse("1 2\n").is_err());
    }
}
