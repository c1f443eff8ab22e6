//! Output writers: stationarity report, solver traces, grid tables, and the
//! per-class network exports (DOT, JSON, statistics tables).

use std::path::Path;

use mcvar::adf::AdfResult;
use mcvar::estimator::GridRow;
use mcvar::network::{connectedness, EffectNetwork, TypeEffects};
use mcvar::panel::Scaling;
use serde::Serialize;

use crate::error::CliResult;

fn write_table(path: &Path, header_comment: &str, body: &str) -> CliResult<()> {
    std::fs::write(path, format!("{header_comment}\n{body}"))?;
    Ok(())
}

fn na_or<T: std::fmt::Display>(value: Option<T>, fmt: impl Fn(T) -> String) -> String {
    match value {
        Some(v) => fmt(v),
        None => "NA".to_string(),
    }
}

pub struct AdfRow {
    pub class: String,
    pub series: String,
    pub scaling: Scaling,
    pub result: AdfResult,
}

/// Per-series stationarity table plus a pooled rejection-count summary
/// comment. Returns the pooled summary line for logging.
pub fn write_adf_report(rows: &[AdfRow], path: &Path, header_comment: &str) -> CliResult<String> {
    let rejected = rows.iter().filter(|r| r.result.reject_5pct).count();
    let summary = format!(
        "pooled: unit root rejected at 5% for {rejected} of {} series",
        rows.len()
    );
    let mut body = format!("# {summary}\n");
    body.push_str("class,series,mean,sd,adf_statistic,p_value,lags,nobs,reject_1pct,reject_5pct,reject_10pct\n");
    for row in rows {
        body.push_str(&format!(
            "{},{},{},{},{:.4},{:.4},{},{},{},{},{}\n",
            row.class,
            row.series,
            row.scaling.mean,
            row.scaling.sd,
            row.result.statistic,
            row.result.p_value,
            row.result.lags,
            row.result.nobs,
            row.result.reject_1pct,
            row.result.reject_5pct,
            row.result.reject_10pct,
        ));
    }
    write_table(path, header_comment, &body)?;
    Ok(summary)
}

/// Outer-iteration objective trace.
pub fn write_convergence(
    trace: &[f64],
    converged: bool,
    path: &Path,
    header_comment: &str,
) -> CliResult<()> {
    let mut body = String::from("outer_iteration,objective\n");
    for (i, obj) in trace.iter().enumerate() {
        body.push_str(&format!("{},{}\n", i + 1, obj));
    }
    body.push_str(&format!("# converged: {converged}\n"));
    write_table(path, header_comment, &body)
}

/// Penalty-grid search table.
pub fn write_grid(table: &[GridRow], path: &Path, header_comment: &str) -> CliResult<()> {
    let mut body = String::from(
        "lambda1,lambda2,lambda3,lambda4,bic,df,nonzero_b,nonzero_omega_offdiag,converged\n",
    );
    for row in table {
        body.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.penalty.lambda1,
            row.penalty.lambda2,
            row.penalty.lambda3,
            row.penalty.lambda4,
            row.bic,
            row.df,
            row.nonzero_b,
            row.nonzero_omega_offdiag,
            row.converged,
        ));
    }
    write_table(path, header_comment, &body)
}

/// Coefficient-step solver trace (iteration, smoothed objective, step).
pub fn write_spg_trace(
    trace: &[mcvar::spg::SpgTraceRow],
    path: &Path,
    header_comment: &str,
) -> CliResult<()> {
    let mut body = String::from("iteration,objective,step\n");
    for row in trace {
        body.push_str(&format!(
            "{},{},{}\n",
            row.iteration, row.objective, row.step
        ));
    }
    write_table(path, header_comment, &body)
}

/// Graphviz export: one digraph per class, positive effects in blue,
/// negative in red, edge width a linear map of |weight| onto [0.5, 4.0].
pub fn render_dot(net: &EffectNetwork) -> String {
    let mut out = format!("digraph \"{}\" {{\n", net.class_id);
    out.push_str("  rankdir=LR;\n  node [shape=ellipse];\n");
    for node in &net.nodes {
        out.push_str(&format!("  \"{}\" [tooltip=\"{}\"];\n", node.id, node.kind));
    }
    let w_max = net.edges.iter().fold(0.0f64, |m, e| m.max(e.weight.abs()));
    for e in &net.edges {
        let color = if e.weight > 0.0 { "blue" } else { "red" };
        let penwidth = if w_max > 0.0 {
            0.5 + 3.5 * e.weight.abs() / w_max
        } else {
            0.5
        };
        out.push_str(&format!(
            "  \"{}\" -> \"{}\" [color={color}, penwidth={penwidth:.3}, tooltip=\"{}\"];\n",
            net.nodes[e.source].id, net.nodes[e.target].id, e.weight
        ));
    }
    out.push_str("}\n");
    out
}

#[derive(Serialize)]
struct NetworkDoc<'a> {
    class: &'a str,
    nodes: Vec<NodeDoc<'a>>,
    edges: Vec<EdgeDoc<'a>>,
}

#[derive(Serialize)]
struct NodeDoc<'a> {
    id: &'a str,
    #[serde(rename = "type")]
    kind: &'a str,
}

#[derive(Serialize)]
struct EdgeDoc<'a> {
    source: &'a str,
    target: &'a str,
    weight: f64,
    sign: i8,
}

pub fn render_network_json(net: &EffectNetwork) -> CliResult<String> {
    let doc = NetworkDoc {
        class: &net.class_id,
        nodes: net
            .nodes
            .iter()
            .map(|n| NodeDoc {
                id: &n.id,
                kind: &n.kind,
            })
            .collect(),
        edges: net
            .edges
            .iter()
            .map(|e| EdgeDoc {
                source: &net.nodes[e.source].id,
                target: &net.nodes[e.target].id,
                weight: e.weight,
                sign: e.sign(),
            })
            .collect(),
    };
    let mut json = serde_json::to_string_pretty(&doc)?;
    json.push('\n');
    Ok(json)
}

/// Connectedness tables: one file per measure, rows = commodities,
/// columns = classes.
pub fn write_connectedness(
    networks: &[EffectNetwork],
    dir: &Path,
    header_comment: &str,
) -> CliResult<()> {
    let scores: Vec<_> = networks.iter().map(connectedness).collect();
    let nodes = &networks[0].nodes;
    for (name, pick) in [("in", 0usize), ("out", 1), ("total", 2)] {
        let mut body = String::from("series");
        for net in networks {
            body.push_str(&format!(",{}", net.class_id));
        }
        body.push('\n');
        for (j, node) in nodes.iter().enumerate() {
            body.push_str(&node.id);
            for s in &scores {
                let v = match pick {
                    0 => s.in_score[j],
                    1 => s.out_score[j],
                    _ => s.total_score[j],
                };
                body.push_str(&format!(",{v:.4}"));
            }
            body.push('\n');
        }
        write_table(
            &dir.join(format!("connectedness_{name}.csv")),
            header_comment,
            &body,
        )?;
    }
    Ok(())
}

/// Shared-effects matrix, row class shares with column class. Empty-network
/// rows print NA.
pub fn write_shared_effects(
    networks: &[EffectNetwork],
    matrix: &[Vec<Option<f64>>],
    path: &Path,
    header_comment: &str,
) -> CliResult<()> {
    let mut body = String::from("class");
    for net in networks {
        body.push_str(&format!(",{}", net.class_id));
    }
    body.push('\n');
    for (i, net) in networks.iter().enumerate() {
        body.push_str(&net.class_id);
        for cell in &matrix[i] {
            body.push_str(&format!(",{}", na_or(*cell, |v| format!("{v:.2}"))));
        }
        body.push('\n');
    }
    write_table(path, header_comment, &body)
}

/// Within/spillover proportions of one class, `from` rows by `to` columns.
pub fn write_type_effects(
    effects: &TypeEffects,
    path: &Path,
    header_comment: &str,
) -> CliResult<()> {
    let mut body = String::from("from");
    for t in &effects.types {
        body.push_str(&format!(",{t}"));
    }
    body.push('\n');
    for (a, row) in effects.matrix.iter().enumerate() {
        body.push_str(&effects.types[a]);
        for cell in row {
            body.push_str(&format!(",{}", na_or(*cell, |v| format!("{v:.2}"))));
        }
        body.push('\n');
    }
    write_table(path, header_comment, &body)
}

/// File-system-safe version of a class identifier.
pub fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
