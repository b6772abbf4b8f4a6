use std::fmt::Write as _;
use std::path::Path;

use crate::data::{split_counts, Dataset};
use crate::diagnostics::{accuracy, SmoothnessReport};
use crate::error::Result;
use crate::graph::GraphMode;
use crate::model::Timings;
use crate::solver::{JdaOutcome, Setting, SolverConfig};

use super::{write_text, SettingSource};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(u64),
    Num(f64),
}

impl Cell {
    fn display(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => format!("{v:.4}"),
        }
    }

    fn csv(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => v.to_string(),
        }
    }
}

/// A named table, rendered aligned in the text report and at full
/// precision in `<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn accuracy(per_mode: &[(GraphMode, f64)]) -> Table {
        Table {
            name: "accuracy".into(),
            header: vec!["mode".into(), "target_accuracy".into()],
            rows: per_mode
                .iter()
                .map(|(m, a)| vec![Cell::Text(m.to_string()), Cell::Num(*a)])
                .collect(),
        }
    }

    /// One row per seed plus a mean row; columns np, t, st, cst.
    pub fn ablation(rows: &[(u64, Vec<(GraphMode, f64)>)]) -> Table {
        let mut header = vec!["seed".to_string()];
        header.extend(GraphMode::ALL.iter().map(|m| m.to_string()));
        let mut out: Vec<Vec<Cell>> = rows
            .iter()
            .map(|(seed, accs)| {
                let mut r = vec![Cell::Int(*seed)];
                r.extend(accs.iter().map(|(_, a)| Cell::Num(*a)));
                r
            })
            .collect();
        if rows.len() > 1 {
            let mut mean = vec![Cell::Text("mean".into())];
            for k in 0..GraphMode::ALL.len() {
                let sum: f64 = rows.iter().map(|(_, a)| a[k].1).sum();
                mean.push(Cell::Num(sum / rows.len() as f64));
            }
            out.push(mean);
        }
        Table {
            name: "ablation".into(),
            header,
            rows: out,
        }
    }

    pub fn jda_history(jda: &JdaOutcome, truth: Option<&[usize]>) -> Result<Table> {
        let mut header = vec!["iteration".to_string(), "changed".to_string()];
        if truth.is_some() {
            header.push("target_accuracy".into());
        }
        let mut rows = Vec::new();
        for (it, labels) in jda.history.iter().enumerate() {
            let changed = match it {
                0 => labels.len(),
                _ => labels
                    .iter()
                    .zip(&jda.history[it - 1])
                    .filter(|(a, b)| a != b)
                    .count(),
            };
            let mut row = vec![Cell::Int(it as u64), Cell::Int(changed as u64)];
            if let Some(t) = truth {
                row.push(Cell::Num(accuracy(labels, t)?));
            }
            rows.push(row);
        }
        Ok(Table {
            name: "jda_history".into(),
            header,
            rows,
        })
    }

    pub fn smoothness(probes: &[SmoothnessReport]) -> Table {
        Table {
            name: "smoothness".into(),
            header: ["r", "epsilon_hat", "samples_per_point", "points_used"]
                .map(String::from)
                .to_vec(),
            rows: probes
                .iter()
                .map(|p| {
                    vec![
                        Cell::Num(p.r),
                        Cell::Num(p.epsilon_hat),
                        Cell::Int(p.samples_per_point as u64),
                        Cell::Int(p.points_used as u64),
                    ]
                })
                .collect(),
        }
    }

    pub fn render(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(Cell::display).collect())
            .collect();
        let widths: Vec<usize> = (0..self.header.len())
            .map(|k| {
                cells
                    .iter()
                    .filter_map(|r| r.get(k).map(String::len))
                    .chain(std::iter::once(self.header[k].len()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |items: &[String]| {
            items
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let mut out = format!("[{}]\n{}\n", self.name, line(&self.header));
        for r in &cells {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

/// Everything a command reports: the fully resolved configuration, the
/// dataset summary, result tables and notes.
///
/// [`render`](Self::render) excludes `timings`, so reports of identical runs
/// are byte-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub command: String,
    pub config_echo: Vec<(String, String)>,
    pub dataset_echo: Vec<(String, String)>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
    pub timings: Option<Timings>,
}

impl RunReport {
    pub fn new(
        command: &str,
        input: &str,
        config: &SolverConfig,
        setting: Setting,
        source: SettingSource,
        ds: &Dataset,
    ) -> Self {
        let setting = format!(
            "{} ({})",
            match setting {
                Setting::Pda => "pda",
                Setting::Uda => "uda",
            },
            match source {
                SettingSource::Flag => "from flag",
                SettingSource::DetectedFromTruth => "detected from target labels",
                SettingSource::Assumed => "assumed; pass --pda or --uda",
            }
        );
        let config_echo = [
            ("input", input.to_string()),
            ("setting", setting),
            ("lambda", config.lambda.to_string()),
            ("gamma", config.gamma.to_string()),
            ("eta", config.eta.to_string()),
            ("p", config.p.to_string()),
            ("mode", config.mode.to_string()),
            ("kernel", config.kernel.to_string()),
            ("max_iter", config.max_iter.to_string()),
            ("stop_on_stable_labels", config.stop_on_stable_labels.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();

        let s = split_counts(ds);
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        let mut dataset_echo = vec![
            ("n".to_string(), s.n.to_string()),
            ("m".to_string(), s.m.to_string()),
            ("d".to_string(), ds.dim().to_string()),
            ("classes".to_string(), s.class_count.to_string()),
            ("source_per_class".to_string(), join(&s.source_per_class)),
        ];
        if let Some(t) = &s.target_per_class {
            dataset_echo.push(("target_per_class".into(), join(t)));
        }
        dataset_echo.push((
            "pda".into(),
            s.is_pda.map_or("unknown (no target labels)".into(), |b| b.to_string()),
        ));

        RunReport {
            command: command.into(),
            config_echo,
            dataset_echo,
            tables: Vec::new(),
            notes: Vec::new(),
            timings: None,
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "idsp {}", self.command);
        let _ = writeln!(out, "[config]");
        for (k, v) in &self.config_echo {
            let _ = writeln!(out, "{k} = {v}");
        }
        let _ = writeln!(out, "[dataset]");
        for (k, v) in &self.dataset_echo {
            let _ = writeln!(out, "{k} = {v}");
        }
        for t in &self.tables {
            out.push_str(&t.render());
        }
        for n in &self.notes {
            let _ = writeln!(out, "{n}");
        }
        out
    }

    /// Writes `report.txt`, one CSV per table and `timings.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join("report.txt"), &self.render())?;
        for t in &self.tables {
            write_text(&dir.join(format!("{}.csv", t.name)), &t.to_csv())?;
        }
        if let Some(t) = &self.timings {
            let csv = format!(
                "phase,seconds\ngraph,{}\nkernel,{}\nsolve,{}\ntotal,{}\n",
                t.graph.as_secs_f64(),
                t.kernel.as_secs_f64(),
                t.solve.as_secs_f64(),
                t.total().as_secs_f64()
            );
            write_text(&dir.join("timings.csv"), &csv)?;
        }
        Ok(())
    }
}
