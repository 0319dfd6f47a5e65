//! Report emission shared by the command-line front end: canonical number
//! formatting, CSV writing, and the SVG charts. CSV and SVG always carry
//! the same formatted values; the annotated SVG texts can be parsed back
//! for verification.

use std::io::Write;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::eval::KSelectionRun;
use crate::lda::DocTopics;

/// Canonical decimal rendering used in every CSV cell and SVG
/// annotation: twelve fractional digits with trailing zeros removed, and
/// no negative zero.
pub fn format_value(value: f64) -> String {
    if !value.is_finite() {
        return value.to_string();
    }
    let mut text = format!("{value:.12}");
    if text.contains('.') {
        while text.ends_with('0') {
            text.pop();
        }
        if text.ends_with('.') {
            text.pop();
        }
    }
    if text == "-0" {
        "0".to_string()
    } else {
        text
    }
}

/// Writes a CSV with one header row; cells are written verbatim, so
/// numbers should already be passed through [`format_value`].
pub fn write_csv<W: Write>(writer: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::precondition(format!(
                "CSV row has {} cells but the header has {}",
                row.len(),
                header.len()
            )));
        }
        csv.write_record(row)?;
    }
    csv.flush()?;
    Ok(())
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// White-to-blue ramp over the normalized value.
fn ramp_color(value: f64, min: f64, max: f64) -> String {
    let t = if max > min {
        ((value - min) / (max - min)).clamp(0.0, 1.0)
    } else {
        0.5
    };
    let blend = |from: f64, to: f64| (from + t * (to - from)).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        blend(255.0, 8.0),
        blend(255.0, 48.0),
        blend(255.0, 107.0)
    )
}

fn value_text(x: f64, y: f64, value: f64, anchor: &str, fill: &str) -> String {
    format!(
        "  <text class=\"v\" x=\"{x:.1}\" y=\"{y:.1}\" font-size=\"10\" \
         text-anchor=\"{anchor}\" fill=\"{fill}\" font-family=\"monospace\">{}</text>\n",
        format_value(value)
    )
}

fn label_text(x: f64, y: f64, label: &str, anchor: &str) -> String {
    format!(
        "  <text x=\"{x:.1}\" y=\"{y:.1}\" font-size=\"11\" text-anchor=\"{anchor}\" \
         fill=\"#222222\" font-family=\"sans-serif\">{}</text>\n",
        xml_escape(label)
    )
}

fn svg_open(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\">\n  <rect width=\"{width:.0}\" \
         height=\"{height:.0}\" fill=\"#ffffff\"/>\n"
    )
}

fn dimensions_valid(rows: usize, cols: usize, values: &Array2<f64>) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::precondition(
            "chart needs at least one row and column",
        ));
    }
    if values.dim() != (rows, cols) {
        return Err(Error::precondition(format!(
            "value grid is {:?} but labels imply ({rows}, {cols})",
            values.dim()
        )));
    }
    Ok(())
}

/// Fixed-cell heatmap with every cell annotated. Row-major annotation
/// order matches the CSV row order.
pub fn heatmap_svg(
    title: &str,
    row_labels: &[String],
    col_labels: &[String],
    values: &Array2<f64>,
) -> Result<String> {
    dimensions_valid(row_labels.len(), col_labels.len(), values)?;
    let cell_w = 74.0;
    let cell_h = 26.0;
    let left = 210.0;
    let top = 72.0;
    let width = left + cell_w * col_labels.len() as f64 + 20.0;
    let height = top + cell_h * row_labels.len() as f64 + 20.0;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut svg = svg_open(width, height);
    svg.push_str(&label_text(left, 24.0, title, "start"));
    for (c, label) in col_labels.iter().enumerate() {
        svg.push_str(&label_text(
            left + cell_w * (c as f64 + 0.5),
            top - 10.0,
            label,
            "middle",
        ));
    }
    for (r, label) in row_labels.iter().enumerate() {
        svg.push_str(&label_text(
            left - 8.0,
            top + cell_h * (r as f64 + 0.65),
            label,
            "end",
        ));
    }
    for r in 0..row_labels.len() {
        for c in 0..col_labels.len() {
            let value = values[[r, c]];
            let x = left + cell_w * c as f64;
            let y = top + cell_h * r as f64;
            svg.push_str(&format!(
                "  <rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell_w:.1}\" height=\"{cell_h:.1}\" \
                 fill=\"{}\" stroke=\"#dddddd\"/>\n",
                ramp_color(value, min, max)
            ));
            let fill = if max > min && (value - min) / (max - min) > 0.55 {
                "#ffffff"
            } else {
                "#222222"
            };
            svg.push_str(&value_text(
                x + cell_w / 2.0,
                y + cell_h * 0.65,
                value,
                "middle",
                fill,
            ));
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Bubble grid: circle area and color encode the value; every cell is
/// also annotated. Row-major annotation order matches the CSV.
pub fn bubble_grid_svg(
    title: &str,
    row_labels: &[String],
    col_labels: &[String],
    values: &Array2<f64>,
) -> Result<String> {
    dimensions_valid(row_labels.len(), col_labels.len(), values)?;
    let cell = 64.0;
    let left = 210.0;
    let top = 84.0;
    let width = left + cell * col_labels.len() as f64 + 20.0;
    let height = top + cell * row_labels.len() as f64 + 20.0;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = (max - min).max(f64::MIN_POSITIVE);

    let mut svg = svg_open(width, height);
    svg.push_str(&label_text(left, 24.0, title, "start"));
    for (c, label) in col_labels.iter().enumerate() {
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"start\" \
             fill=\"#222222\" font-family=\"sans-serif\" transform=\"rotate(-45 {:.1} {:.1})\">{}</text>\n",
            left + cell * (c as f64 + 0.5),
            top - 12.0,
            left + cell * (c as f64 + 0.5),
            top - 12.0,
            xml_escape(label)
        ));
    }
    for (r, label) in row_labels.iter().enumerate() {
        svg.push_str(&label_text(
            left - 8.0,
            top + cell * (r as f64 + 0.55),
            label,
            "end",
        ));
    }
    for r in 0..row_labels.len() {
        for c in 0..col_labels.len() {
            let value = values[[r, c]];
            let cx = left + cell * (c as f64 + 0.5);
            let cy = top + cell * (r as f64 + 0.45);
            let radius = 3.0 + 22.0 * ((value - min) / spread).clamp(0.0, 1.0);
            svg.push_str(&format!(
                "  <circle cx=\"{cx:.1}\" cy=\"{cy:.1}\" r=\"{radius:.1}\" fill=\"{}\" \
                 fill-opacity=\"0.85\" stroke=\"#666666\"/>\n",
                ramp_color(value, min, max)
            ));
            svg.push_str(&value_text(
                cx,
                cy + cell * 0.42,
                value,
                "middle",
                "#222222",
            ));
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Two-panel line chart of the K sweep: coherence on the left panel,
/// similarity on the right, both annotated per point. Annotation order is
/// all coherence values in K order, then all similarity values.
pub fn sweep_chart_svg(runs: &[KSelectionRun], chosen_k: usize) -> Result<String> {
    if runs.is_empty() {
        return Err(Error::precondition(
            "sweep chart needs at least one candidate",
        ));
    }
    let panel_w = 320.0;
    let panel_h = 240.0;
    let margin = 56.0;
    let gap = 60.0;
    let width = margin * 2.0 + panel_w * 2.0 + gap;
    let height = margin * 2.0 + panel_h;

    let ks: Vec<f64> = runs.iter().map(|r| r.k as f64).collect();
    let k_min = ks.iter().copied().fold(f64::INFINITY, f64::min);
    let k_max = ks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k_span = (k_max - k_min).max(1.0);

    let mut svg = svg_open(width, height);
    let panel = |offset_x: f64, title: &str, values: Vec<f64>, svg: &mut String| {
        let v_min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let v_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let v_span = (v_max - v_min).max(1e-12);
        let x_of = |k: f64| offset_x + (k - k_min) / k_span * panel_w;
        let y_of = |v: f64| margin + panel_h - (v - v_min) / v_span * (panel_h - 40.0) - 20.0;

        svg.push_str(&label_text(
            offset_x + panel_w / 2.0,
            margin - 16.0,
            title,
            "middle",
        ));
        svg.push_str(&format!(
            "  <rect x=\"{offset_x:.1}\" y=\"{margin:.1}\" width=\"{panel_w:.1}\" \
             height=\"{panel_h:.1}\" fill=\"none\" stroke=\"#999999\"/>\n"
        ));
        let points: Vec<String> = runs
            .iter()
            .zip(&values)
            .map(|(run, &v)| format!("{:.1},{:.1}", x_of(run.k as f64), y_of(v)))
            .collect();
        svg.push_str(&format!(
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"#08306b\" stroke-width=\"1.5\"/>\n",
            points.join(" ")
        ));
        for (run, &v) in runs.iter().zip(&values) {
            let x = x_of(run.k as f64);
            let y = y_of(v);
            let fill = if run.k == chosen_k {
                "#d62728"
            } else {
                "#08306b"
            };
            svg.push_str(&format!(
                "  <circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"3.5\" fill=\"{fill}\"/>\n"
            ));
            svg.push_str(&value_text(x, y - 8.0, v, "middle", "#222222"));
            svg.push_str(&label_text(
                x,
                margin + panel_h + 16.0,
                &run.k.to_string(),
                "middle",
            ));
        }
    };

    let coherence: Vec<f64> = runs.iter().map(|r| r.coherence).collect();
    let similarity: Vec<f64> = runs.iter().map(|r| r.similarity).collect();
    panel(margin, "Topic coherence", coherence, &mut svg);
    panel(
        margin + panel_w + gap,
        "Topic similarity",
        similarity,
        &mut svg,
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Parses back every `<text class="v">` annotation in document order.
pub fn extract_annotated_values(svg: &str) -> Vec<f64> {
    let mut values = Vec::new();
    let mut rest = svg;
    while let Some(start) = rest.find("class=\"v\"") {
        rest = &rest[start..];
        let Some(open) = rest.find('>') else { break };
        rest = &rest[open + 1..];
        let Some(close) = rest.find('<') else { break };
        if let Ok(value) = rest[..close].trim().parse::<f64>() {
            values.push(value);
        }
        rest = &rest[close..];
    }
    values
}

/// Mean inferred topic proportion per named document group. Rows follow
/// the subset order; empty subsets are dropped with a warning. Each kept
/// row is a probability vector.
pub fn subset_mean_proportions(
    doc_topics: &[DocTopics],
    subsets: &[(String, Vec<usize>)],
) -> Result<(Vec<String>, Array2<f64>)> {
    subset_proportions(doc_topics, subsets, false)
}

/// Fraction of documents per group whose strongest topic is each topic.
pub fn subset_dominant_proportions(
    doc_topics: &[DocTopics],
    subsets: &[(String, Vec<usize>)],
) -> Result<(Vec<String>, Array2<f64>)> {
    subset_proportions(doc_topics, subsets, true)
}

fn subset_proportions(
    doc_topics: &[DocTopics],
    subsets: &[(String, Vec<usize>)],
    dominant: bool,
) -> Result<(Vec<String>, Array2<f64>)> {
    if subsets.is_empty() {
        return Err(Error::precondition("no subsets to report"));
    }
    let num_topics = doc_topics
        .first()
        .map(|d| d.theta.len())
        .ok_or_else(|| Error::precondition("no inferred documents"))?;

    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for (name, docs) in subsets {
        if docs.is_empty() {
            log::warn!("subset {name:?} has no documents; omitting its row");
            continue;
        }
        let mut row = vec![0.0f64; num_topics];
        for &doc in docs {
            let topics = doc_topics.get(doc).ok_or_else(|| {
                Error::precondition(format!(
                    "subset {name:?} references document {doc} but only {} were inferred",
                    doc_topics.len()
                ))
            })?;
            if dominant {
                // Ties go to the smallest topic index.
                let mut best = 0;
                for (k, &t) in topics.theta.iter().enumerate().skip(1) {
                    if t > topics.theta[best] {
                        best = k;
                    }
                }
                row[best] += 1.0;
            } else {
                for (slot, &t) in row.iter_mut().zip(&topics.theta) {
                    *slot += t;
                }
            }
        }
        let scale = 1.0 / docs.len() as f64;
        row.iter_mut().for_each(|x| *x *= scale);
        labels.push(name.clone());
        rows.push(row);
    }
    if labels.is_empty() {
        return Err(Error::precondition("every subset was empty"));
    }

    let mut grid = Array2::zeros((labels.len(), num_topics));
    for (r, row) in rows.iter().enumerate() {
        for (c, &value) in row.iter().enumerate() {
            grid[[r, c]] = value;
        }
    }
    Ok((labels, grid))
}
