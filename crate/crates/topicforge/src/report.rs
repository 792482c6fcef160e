//! Rendering of reports and the files written by `topicforge run`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use topicforge_core::evaluation::{self, Comparison, Delta};
use topicforge_core::runner::CellResult;
use topicforge_core::{Corpus, RunReport, Scheme, SweepResult, TopicResult};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    Json,
    Csv,
    #[default]
    Table,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "table" => Ok(ReportFormat::Table),
            other => Err(format!(
                "unknown format `{other}` (expected json, csv or table)"
            )),
        }
    }
}

fn f4(x: f64) -> String {
    format!("{x:.4}")
}

/// Aligned text table. The first column is left-aligned, the rest right-aligned.
fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut parts = Vec::new();
        for (i, (cell, w)) in cells.zip(&widths).enumerate() {
            let pad = " ".repeat(w - cell.chars().count());
            parts.push(if i == 0 {
                format!("{cell}{pad}")
            } else {
                format!("{pad}{cell}")
            });
        }
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut headers.iter().copied());
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&mut rule.iter().map(String::as_str));
    for row in rows {
        line(&mut row.iter().map(String::as_str));
    }
    out
}

fn csv_text(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    // Writing to a Vec cannot fail.
    let _ = w.write_record(headers);
    for row in rows {
        let _ = w.write_record(row);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

/// Per-topic rows followed by a summary row labelled `MAP`.
///
/// CSV columns are `topic_id,avep,n_test,n_relevant`.
pub fn render_results(per_topic: &[TopicResult], map: f64, format: ReportFormat) -> String {
    if format == ReportFormat::Json {
        #[derive(Serialize)]
        struct Results<'a> {
            per_topic: &'a [TopicResult],
            map: f64,
        }
        return json(&Results { per_topic, map });
    }
    let mut rows: Vec<Vec<String>> = per_topic
        .iter()
        .map(|r| {
            vec![
                r.topic_id.clone(),
                f4(r.avep),
                r.n_test.to_string(),
                r.n_relevant.to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        "MAP".into(),
        f4(map),
        per_topic
            .iter()
            .map(|r| r.n_test)
            .sum::<usize>()
            .to_string(),
        per_topic
            .iter()
            .map(|r| r.n_relevant)
            .sum::<usize>()
            .to_string(),
    ]);
    let headers = ["topic_id", "avep", "n_test", "n_relevant"];
    match format {
        ReportFormat::Csv => csv_text(&headers, &rows),
        _ => table(&headers, &rows),
    }
}

pub fn emit_report(report: &RunReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => json(report),
        _ => render_results(&report.per_topic, report.map, format),
    }
}

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).unwrap_or_default();
    s.push('\n');
    s
}

/// Reads per-topic results from a report file: either a JSON [`RunReport`]
/// or a CSV with `topic_id` and `avep` columns (`n_test`, `n_relevant`
/// optional). A `MAP` summary row is skipped.
pub fn parse_results(text: &str) -> Result<Vec<TopicResult>, String> {
    if text.trim_start().starts_with('{') {
        let report: RunReport = serde_json::from_str(text).map_err(|e| e.to_string())?;
        return Ok(report.per_topic);
    }
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let topic = col("topic_id").ok_or("missing column `topic_id`")?;
    let avep = col("avep").ok_or("missing column `avep`")?;
    let (n_test, n_relevant) = (col("n_test"), col("n_relevant"));
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| e.to_string())?;
        let get = |k: usize| row.get(k).unwrap_or("").trim();
        if get(topic) == "MAP" {
            continue;
        }
        let count = |k: Option<usize>| k.and_then(|k| get(k).parse().ok()).unwrap_or(0);
        out.push(TopicResult {
            topic_id: get(topic).into(),
            avep: get(avep)
                .parse()
                .map_err(|e| format!("bad avep `{}`: {e}", get(avep)))?,
            n_test: count(n_test),
            n_relevant: count(n_relevant),
        });
    }
    Ok(out)
}

/// Baseline versus candidate per topic plus the average row, with the
/// improvement in percentage points.
pub fn render_comparison(cmp: &Comparison, format: ReportFormat) -> String {
    if format == ReportFormat::Json {
        return json(cmp);
    }
    let row = |d: &Delta| match format {
        ReportFormat::Csv => vec![
            d.topic_id.clone(),
            f4(d.baseline),
            f4(d.candidate),
            f4(d.delta),
            d.points.to_string(),
        ],
        _ => vec![
            d.topic_id.clone(),
            f4(d.baseline),
            f4(d.candidate),
            format!("{}%", d.points),
        ],
    };
    let rows: Vec<Vec<String>> = cmp.rows.iter().chain([&cmp.average]).map(row).collect();
    match format {
        ReportFormat::Csv => csv_text(
            &["topic_id", "baseline", "candidate", "delta", "improvement"],
            &rows,
        ),
        _ => table(&["Topic", "Baseline", "Candidate", "Imp."], &rows),
    }
}

fn opt4(x: Option<f64>) -> String {
    x.map(f4).unwrap_or_default()
}

/// Scheme rows against stage-count columns, each with its standard deviation.
/// When the baseline was run, its mean fills the `baseline` columns of every row.
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut stage_counts: Vec<usize> = Vec::new();
    let mut schemes: Vec<Scheme> = Vec::new();
    for c in result.cells.iter().filter(|c| c.scheme != Scheme::Baseline) {
        if !stage_counts.contains(&c.stages) {
            stage_counts.push(c.stages);
        }
        if !schemes.contains(&c.scheme) {
            schemes.push(c.scheme);
        }
    }
    let baseline = result.cell(Scheme::Baseline, 1);
    if schemes.is_empty() && baseline.is_some() {
        schemes.push(Scheme::Baseline);
    }
    let mut headers = vec![
        "scheme".to_string(),
        "baseline".into(),
        "baseline_sd".into(),
    ];
    for s in &stage_counts {
        headers.push(format!("s{s}"));
        headers.push(format!("s{s}_sd"));
    }
    let rows: Vec<Vec<String>> = schemes
        .iter()
        .map(|&scheme| {
            let mut row = vec![
                scheme.as_str().to_string(),
                opt4(baseline.and_then(|b| b.mean_map)),
                opt4(baseline.and_then(|b| b.std_map)),
            ];
            for &s in &stage_counts {
                let cell = result.cell(scheme, s);
                row.push(opt4(cell.and_then(|c| c.mean_map)));
                row.push(opt4(cell.and_then(|c| c.std_map)));
            }
            row
        })
        .collect();
    let headers: Vec<&str> = headers.iter().map(String::as_str).collect();
    csv_text(&headers, &rows)
}

/// Per-topic AveP of one cell (averaged over seeds) followed by an `Average`
/// row. When a baseline with the same topics is available, its AveP and the
/// improvement in points are added.
pub fn per_topic_csv(cell: &CellResult, baseline: Option<&CellResult>) -> String {
    let headers = [
        "topic_id",
        "n_test",
        "n_relevant",
        "avep",
        "baseline",
        "improvement",
    ];
    let cmp = baseline
        .filter(|b| b.scheme != cell.scheme)
        .and_then(|b| evaluation::compare(&b.per_topic, &cell.per_topic).ok());
    let mut rows = Vec::new();
    for r in &cell.per_topic {
        let delta = cmp
            .as_ref()
            .and_then(|c| c.rows.iter().find(|d| d.topic_id == r.topic_id));
        rows.push(vec![
            r.topic_id.clone(),
            r.n_test.to_string(),
            r.n_relevant.to_string(),
            f4(r.avep),
            delta.map(|d| f4(d.baseline)).unwrap_or_default(),
            delta.map(|d| d.points.to_string()).unwrap_or_default(),
        ]);
    }
    if let Ok(mean) = evaluation::mean_average_precision(&cell.per_topic) {
        let avg = cmp.as_ref().map(|c| &c.average);
        rows.push(vec![
            "Average".into(),
            String::new(),
            String::new(),
            f4(mean),
            avg.map(|d| f4(d.baseline)).unwrap_or_default(),
            avg.map(|d| d.points.to_string()).unwrap_or_default(),
        ]);
    }
    csv_text(&headers, &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub id: String,
    pub size: usize,
    pub check_worthy: usize,
}

/// Contents of `run.json`: the resolved configuration, the corpus topics and
/// the full sweep result including per-stage allocation sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub topics: Vec<TopicSummary>,
    pub result: SweepResult,
}

impl RunManifest {
    /// The output directory is left out so that runs into different
    /// directories produce identical manifests.
    pub fn new(
        cfg: &ExperimentConfig,
        seeds: Vec<u64>,
        corpus: &Corpus,
        result: SweepResult,
    ) -> Self {
        let mut config = cfg.clone();
        config.output_dir = None;
        let topics = corpus
            .topic_ids()
            .map(|t| {
                let claims = corpus.topic_claims(t);
                TopicSummary {
                    id: t.into(),
                    size: claims.len(),
                    check_worthy: claims.iter().filter(|c| c.label.is_check_worthy()).count(),
                }
            })
            .collect();
        RunManifest {
            config,
            seeds,
            topics,
            result,
        }
    }
}

/// Writes `sweep.csv`, one `per_topic_<scheme>_<S>.csv` per cell and
/// `run.json` into `dir`, creating it if needed. Returns the written paths.
pub fn write_outputs(dir: &Path, manifest: &RunManifest) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> io::Result<()> {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    let result = &manifest.result;
    put("sweep.csv".into(), sweep_csv(result))?;
    let baseline = result.cell(Scheme::Baseline, 1);
    for cell in &result.cells {
        put(
            format!("per_topic_{}_{}.csv", cell.scheme.as_str(), cell.stages),
            per_topic_csv(cell, baseline),
        )?;
    }
    put("run.json".into(), json(manifest))?;
    Ok(written)
}
