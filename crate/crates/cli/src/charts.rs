//! Figure layouts built from aggregated study results.

use spfa::study::{AggregateRow, Metric, SimCondition, Summary};
use spfa::{Method, ModelError};

use crate::svg::{Chart, Point, Series};

pub type Cell = (SimCondition, Vec<AggregateRow>);

fn summary(rows: &[AggregateRow], method: Method, metric: Metric) -> Option<Summary> {
    rows.iter().find(|r| r.method == method).map(|r| *r.summary(metric))
}

/// The curves of the SRMR_ND panels: MFA loadings plus the three
/// score-implied models.
pub const SRMR_SERIES: [(&str, Method, Metric); 4] = [
    ("MFA model", Method::Mfa, Metric::SrmrNdLoadings),
    ("MFA scores", Method::Mfa, Metric::SrmrNdScores),
    ("PCA scores", Method::Pca, Metric::SrmrNdScores),
    ("SPFA scores", Method::Spfa, Metric::SrmrNdScores),
];

pub const RHO_SERIES: [(&str, Method, Metric); 3] = [
    ("MFA scores", Method::Mfa, Metric::Rho),
    ("PCA scores", Method::Pca, Metric::Rho),
    ("SPFA scores", Method::Spfa, Metric::Rho),
];

/// One point per population, x = the leading loading.
pub fn population_chart(cells: &[Cell], series: &[(&str, Method, Metric)], title: &str, y_label: &str) -> Chart {
    let mut sorted: Vec<&Cell> = cells.iter().collect();
    sorted.sort_by(|a, b| a.0.max_loading.total_cmp(&b.0.max_loading));
    Chart {
        title: title.to_string(),
        x_label: "maximal loading".into(),
        y_label: y_label.into(),
        series: series
            .iter()
            .map(|(name, method, metric)| Series {
                name: name.to_string(),
                points: sorted
                    .iter()
                    .map(|(c, rows)| Point {
                        x: c.max_loading,
                        y: summary(rows, *method, *metric).and_then(|s| s.mean),
                        err: None,
                    })
                    .collect(),
            })
            .collect(),
        x_ticks: None,
    }
}

fn short(v: f64) -> String {
    let s = format!("{v:.2}");
    s.strip_prefix('0').map(str::to_string).unwrap_or(s)
}

/// Sample-study panel for one `(q, n, model error)` cell of the grid:
/// blocks of Λ_m values, one block per Λ_i level, means with SD bars.
pub fn grid_chart(
    cells: &[Cell],
    q: usize,
    n: usize,
    model_error: ModelError,
    series: &[(&str, Method, Metric)],
    title: &str,
    y_label: &str,
) -> Option<Chart> {
    let mut chosen: Vec<&Cell> =
        cells.iter().filter(|(c, _)| c.q == q && c.n == Some(n) && c.model_error == model_error).collect();
    if chosen.is_empty() {
        return None;
    }
    chosen.sort_by(|a, b| {
        a.0.base_loading.total_cmp(&b.0.base_loading).then(a.0.max_loading.total_cmp(&b.0.max_loading))
    });
    let mut xs = Vec::new();
    let mut ticks = Vec::new();
    let mut block = 0usize;
    let mut within = 0usize;
    let mut last_base = None;
    for (c, _) in &chosen {
        if let Some(b) = last_base {
            if b != c.base_loading {
                block += 1;
                within = 0;
            }
        }
        last_base = Some(c.base_loading);
        let x = (block * 5 + within) as f64;
        within += 1;
        xs.push(x);
        ticks.push((x, short(c.max_loading)));
    }
    let series = series
        .iter()
        .map(|(name, method, metric)| {
            let mut points = Vec::new();
            for (i, (c, rows)) in chosen.iter().enumerate() {
                if i > 0 && chosen[i - 1].0.base_loading != c.base_loading {
                    points.push(Point { x: xs[i] - 0.5, y: None, err: None });
                }
                let s = summary(rows, *method, *metric);
                points.push(Point { x: xs[i], y: s.and_then(|s| s.mean), err: s.and_then(|s| s.sd) });
            }
            Series { name: name.to_string(), points }
        })
        .collect();
    let mut bases: Vec<String> = chosen.iter().map(|(c, _)| short(c.base_loading)).collect();
    bases.dedup();
    Some(Chart {
        title: title.to_string(),
        x_label: format!("Λm, grouped by Λi = {}", bases.join(" | ")),
        y_label: y_label.into(),
        series,
        x_ticks: Some(ticks),
    })
}
