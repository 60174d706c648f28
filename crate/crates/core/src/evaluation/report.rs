//! Aligned plain-text tables.

use super::odd::OddEvalResult;
use super::preference::{HumanAgreementReport, PreferenceReport, Reason};
use crate::embedding::ReprCondition;

/// Left-aligns the first column, right-aligns the rest.
pub fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(cols) {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        let mut out = String::new();
        for (i, cell) in cells.iter().enumerate().take(cols) {
            if i > 0 {
                out.push_str("  ");
            }
            let pad = widths[i] - cell.chars().count();
            if i == 0 {
                out.push_str(cell);
                out.push_str(&" ".repeat(pad));
            } else {
                out.push_str(&" ".repeat(pad));
                out.push_str(cell);
            }
        }
        out.trim_end().to_string() + "\n"
    };
    let total: usize = widths.iter().sum::<usize>() + 2 * cols.saturating_sub(1);
    let mut out = line(header);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
    }
    out
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{:.2}%", 100.0 * v))
}

fn fixed(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.digits$}"))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Accuracy per condition, one row each.
pub fn odd_eval_table(results: &[OddEvalResult]) -> String {
    let header = strings(&["Condition", "Scene feature", "Trials", "Acc."]);
    let rows = results
        .iter()
        .map(|r| {
            let feature = match r.condition {
                ReprCondition::Text => "-",
                ReprCondition::TextEvent => "Event only",
                ReprCondition::TextProperty => "Property only",
                ReprCondition::TextEmotion => "Emotion only",
                ReprCondition::TextScene | ReprCondition::SceneOnly => "All (Event+Prop+Emo)",
            };
            vec![
                r.condition.title().to_string(),
                feature.to_string(),
                r.records.len().to_string(),
                format!("{:.3}", r.accuracy),
            ]
        })
        .collect::<Vec<_>>();
    render_table(&header, &rows)
}

/// Accuracy, full agreement and AC1 with one column per group and a mean.
pub fn human_agreement_table(report: &HumanAgreementReport) -> String {
    let mut header = vec!["Metric".to_string()];
    header.extend(report.groups.iter().map(|g| g.group.clone()));
    header.push("Mean".into());
    let row = |name: &str, cells: Vec<String>, mean: String| {
        let mut r = vec![name.to_string()];
        r.extend(cells);
        r.push(mean);
        r
    };
    let rows = vec![
        row(
            "Human Accuracy",
            report.groups.iter().map(|g| pct(g.accuracy)).collect(),
            pct(report.mean_accuracy),
        ),
        row(
            "Full Agreement",
            report.groups.iter().map(|g| pct(g.full_agreement)).collect(),
            pct(report.mean_full_agreement),
        ),
        row(
            "Gwet's AC1",
            report.groups.iter().map(|g| fixed(g.ac1, 3)).collect(),
            fixed(report.mean_ac1, 3),
        ),
    ];
    render_table(&header, &rows)
}

fn rating_cell(s: Option<super::preference::RatingSummary>) -> String {
    s.map_or_else(|| "-".into(), |s| format!("{:.2} ± {:.2}", s.mean, s.sd))
}

/// Preference rate and conditional ratings per dimension (SD with divisor n).
pub fn preference_table(report: &PreferenceReport) -> String {
    let header = strings(&["Dimension", "N", "Pref. %", "Scene rating", "ATOMIC rating", "Binom. p", "MWU p"]);
    let mut rows: Vec<Vec<String>> = report
        .dimensions
        .iter()
        .map(|d| {
            vec![
                d.dimension.title().to_string(),
                d.n.to_string(),
                format!("{:.1}%", 100.0 * d.preference_rate),
                rating_cell(d.scene_rating),
                rating_cell(d.atomic_rating),
                format!("{:.3e}", d.binomial_p),
                d.mann_whitney
                    .map_or_else(|| "-".into(), |m| format!("{:.3e}", m.p_two_sided)),
            ]
        })
        .collect();
    if let Some(o) = &report.overall {
        rows.push(vec![
            "Overall".into(),
            o.n.to_string(),
            format!("{:.1}%", 100.0 * o.preference_rate),
            "-".into(),
            "-".into(),
            format!("{:.3e}", o.binomial_p),
            "-".into(),
        ]);
    }
    render_table(&header, &rows)
}

/// Reasons cited among atomic-preferred judgments; rows may exceed 100%.
pub fn failure_table(report: &PreferenceReport) -> String {
    let mut header = strings(&["Dimension", "% ATOMIC preferred"]);
    header.extend(Reason::ALL.iter().map(|r| r.title().to_string()));
    let rows = report
        .dimensions
        .iter()
        .map(|d| {
            let mut row = vec![
                d.dimension.title().to_string(),
                format!("{:.1}%", 100.0 * d.atomic_rate),
            ];
            for r in Reason::ALL {
                row.push(match d.failure_breakdown.get(&r) {
                    Some(v) => format!("{v:.0}%"),
                    None if !r.allowed_for(d.dimension) => "n/a".into(),
                    None => "-".into(),
                });
            }
            row
        })
        .collect::<Vec<_>>();
    render_table(&header, &rows)
}

/// Full agreement and AC1 per dimension and group.
pub fn preference_agreement_table(report: &PreferenceReport) -> String {
    let header = strings(&["Dimension", "Group", "Items", "Full Agr.", "Gwet's AC1"]);
    let mut rows = Vec::new();
    for d in &report.dimensions {
        for g in &d.groups {
            rows.push(vec![
                d.dimension.title().to_string(),
                g.group.clone(),
                g.items.to_string(),
                pct(g.full_agreement),
                fixed(g.ac1, 3),
            ]);
        }
    }
    render_table(&header, &rows)
}
