use super::MetricsSummary;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Json,
}

pub fn emit_report(summary: &MetricsSummary, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(summary).expect("summary serializes");
            s.push('\n');
            s
        }
        ReportFormat::Table => table(summary),
    }
}

fn percent(rate: f64) -> String {
    let pct = rate * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{}%", pct.round())
    } else {
        format!("{pct:.1}%")
    }
}

fn seconds(value: Option<f64>, basis: &str) -> String {
    match value {
        Some(s) if basis == "wall" => format!("{s:.2} s"),
        Some(s) => format!("{s:.2} s ({basis})"),
        None => "n/a".into(),
    }
}

fn table(s: &MetricsSummary) -> String {
    let rows: Vec<(&str, String)> = vec![
        ("Trials", s.trials.to_string()),
        ("Successful Reassignments", s.successes.to_string()),
        ("Success Rate", percent(s.success_rate)),
        (
            "Successful Reassignments (1st attempt)",
            s.first_attempt_successes.to_string(),
        ),
        ("Success Rate from the (1st attempt)", percent(s.first_attempt_rate)),
        (
            "Avg. Adaptation Time (success)",
            seconds(s.mean_adaptation_time_s, &s.time_basis),
        ),
        ("Max Adaptation Time", seconds(s.max_adaptation_time_s, &s.time_basis)),
        ("Min Adaptation Time", seconds(s.min_adaptation_time_s, &s.time_basis)),
        (
            "Avg. LLM Retries (success)",
            s.mean_retries.map_or_else(|| "n/a".into(), |r| format!("{r:.2}")),
        ),
        ("Max LLM Retries", s.max_retries_observed.to_string()),
    ];
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0).max("Metric".len());
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$} | Value", "Metric");
    let _ = writeln!(out, "{}-+-{}", "-".repeat(width), "-".repeat(16));
    for (label, value) in rows {
        let _ = writeln!(out, "{label:<width$} | {value}");
    }
    out
}
