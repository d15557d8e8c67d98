//! Writes suite reports as JSON and CSV.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::suite::SuiteReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Serialize)]
struct RunRow<'a> {
    problem: &'a str,
    strategy: &'a str,
    solved: bool,
    plan_len: usize,
    queries: usize,
    prefs: usize,
    wall_ms: u64,
    nodes: u64,
}

#[derive(Serialize)]
struct AggregateRow<'a> {
    domain: &'a str,
    strategy: &'a str,
    percent_solved: String,
    mean_plan_len: String,
    plan_len_ratio: String,
    mean_queries: String,
    influence_percent: String,
    uses_per_run: String,
}

fn fixed(x: f64) -> String {
    format!("{x:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fixed).unwrap_or_default()
}

fn table<R: Serialize>(rows: impl IntoIterator<Item = R>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("row serialises");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

/// One row per run, a blank line, then one aggregate row per
/// (domain, strategy).
pub fn to_csv(report: &SuiteReport) -> String {
    let runs = table(report.cells.iter().map(|c| RunRow {
        problem: &c.problem,
        strategy: &c.strategy,
        solved: c.solved,
        plan_len: c.plan_len,
        queries: c.queries,
        prefs: c.prefs,
        wall_ms: c.wall_ms,
        nodes: c.nodes,
    }));
    let aggregates = table(report.domains.iter().flat_map(|d| {
        d.strategies.iter().map(move |s| AggregateRow {
            domain: &d.domain,
            strategy: &s.strategy,
            percent_solved: fixed(s.percent_solved),
            mean_plan_len: opt(s.mean_plan_len),
            plan_len_ratio: opt(s.plan_len_ratio),
            mean_queries: fixed(s.mean_queries),
            influence_percent: opt(s.influence_percent),
            uses_per_run: fixed(s.uses_per_run),
        })
    }));
    format!("{runs}\n{aggregates}")
}

pub fn to_json(report: &SuiteReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serialises");
    s.push('\n');
    s
}

/// Writes `report.json` / `report.csv` into `dir`, creating it if needed.
pub fn emit(
    report: &SuiteReport,
    formats: &[Format],
    dir: impl AsRef<Path>,
) -> io::Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for f in formats {
        let (name, body) = match f {
            Format::Json => ("report.json", to_json(report)),
            Format::Csv => ("report.csv", to_csv(report)),
        };
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::suite::{CellResult, DomainSummary, StrategySummary};

    fn report() -> SuiteReport {
        let cell = CellResult {
            domain: "d".into(),
            problem: "odd,name".into(),
            strategy: "active".into(),
            seed: 0,
            solved: true,
            reason: None,
            plan_len: 4,
            queries: 1,
            prefs: 1,
            wall_ms: 7,
            nodes: 9,
            valid: Some(true),
            uses: 2,
            influenced: 1,
            plan: vec![],
        };
        let summary = StrategySummary {
            strategy: "active".into(),
            runs: 1,
            percent_solved: 100.0,
            mean_plan_len: Some(4.0),
            plan_len_ratio: None,
            mean_queries: 1.0,
            influence_percent: Some(50.0),
            uses_per_run: 2.0,
            depth_profile: None,
            notice: None,
        };
        SuiteReport {
            name: "t".into(),
            budget_note: String::new(),
            cells: vec![cell],
            domains: vec![DomainSummary {
                domain: "d".into(),
                problems: 1,
                commonly_solved: 1,
                strategies: vec![summary],
                learning_curve: vec![],
                replay: None,
            }],
            suite_profiles: BTreeMap::new(),
        }
    }

    #[test]
    fn csv_has_run_and_aggregate_sections() {
        let text = to_csv(&report());
        let expected = "problem,strategy,solved,plan_len,queries,prefs,wall_ms,nodes\n\
                        \"odd,name\",active,true,4,1,1,7,9\n\
                        \n\
                        domain,strategy,percent_solved,mean_plan_len,plan_len_ratio,mean_queries,influence_percent,uses_per_run\n\
                        d,active,100.000000,4.000000,,1.000000,50.000000,2.000000\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn csv_reads_back_with_a_standard_reader() {
        let text = to_csv(&report());
        let runs = text.split("\n\n").next().unwrap();
        let mut r = csv::Reader::from_reader(runs.as_bytes());
        let rows: Vec<csv::StringRecord> = r.records().collect::<Result<_, _>>().unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(&rows[0][0], "odd,name");
    }

    #[test]
    fn emit_writes_requested_formats() {
        let dir = tempfile::tempdir().unwrap();
        let paths = emit(&report(), &[Format::Json, Format::Csv], dir.path()).unwrap();
        assert_eq!(paths.len(), 2);
        let json: SuiteReport =
            serde_json::from_str(&fs::read_to_string(&paths[0]).unwrap()).unwrap();
        assert_eq!(json, report());
    }
}
