//! Long-format CSV input and output.
//!
//! Input schema (header required): `date,class,series,type,price` with
//! ISO-8601 dates. Preprocessed returns use the same schema with `price`
//! replaced by `return`. Lines starting with `#` are comments.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use mcvar::panel::{PricePanel, ReturnPanel, Scaling, SeriesInfo};

use crate::dates::parse_date;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadStats {
    pub filled_cells: usize,
    /// Dates dropped because not every class trades on them.
    pub dropped_dates: usize,
}

struct ParsedRows {
    classes: Vec<String>,
    series: Vec<SeriesInfo>,
    /// (class idx, series idx, date) -> value
    cells: BTreeMap<(usize, usize, String), f64>,
    dates: Vec<String>,
}

fn parse_long_csv(path: &Path, value_column: &str) -> CliResult<ParsedRows> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));

    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::Data(format!("{}: empty file", path.display())))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let want = ["date", "class", "series", "type", value_column];
    if columns != want {
        return Err(CliError::Data(format!(
            "{}: expected header {:?}, found {:?}",
            path.display(),
            want.join(","),
            header
        )));
    }

    let mut classes: Vec<String> = Vec::new();
    let mut series: Vec<SeriesInfo> = Vec::new();
    let mut cells: BTreeMap<(usize, usize, String), f64> = BTreeMap::new();
    let mut date_set: BTreeSet<String> = BTreeSet::new();
    let mut class_series: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();

    for (lineno, line) in lines {
        let loc = || format!("{} line {}", path.display(), lineno + 1);
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(CliError::Data(format!(
                "{}: expected 5 fields, found {}",
                loc(),
                fields.len()
            )));
        }
        let (date, class, series_id, kind, value_str) =
            (fields[0], fields[1], fields[2], fields[3], fields[4]);
        parse_date(date).map_err(|e| CliError::Data(format!("{}: {e}", loc())))?;
        if kind.is_empty() {
            return Err(CliError::Data(format!(
                "{}: series {series_id} has an empty type",
                loc()
            )));
        }
        let value: f64 = value_str.parse().map_err(|_| {
            CliError::Data(format!(
                "{}: unparseable {value_column} {value_str:?}",
                loc()
            ))
        })?;

        let class_idx = match classes.iter().position(|c| c == class) {
            Some(i) => i,
            None => {
                classes.push(class.to_string());
                classes.len() - 1
            }
        };
        let series_idx = match series.iter().position(|s| s.id == series_id) {
            Some(i) => {
                if series[i].kind != kind {
                    return Err(CliError::Data(format!(
                        "{}: series {series_id} tagged {kind:?} but previously {:?}",
                        loc(),
                        series[i].kind
                    )));
                }
                i
            }
            None => {
                series.push(SeriesInfo {
                    id: series_id.to_string(),
                    kind: kind.to_string(),
                });
                series.len() - 1
            }
        };

        let key = (class_idx, series_idx, date.to_string());
        if cells.insert(key, value).is_some() {
            return Err(CliError::Data(format!(
                "{}: duplicate observation for ({class}, {series_id}, {date})",
                loc()
            )));
        }
        date_set.insert(date.to_string());
        class_series
            .entry(class_idx)
            .or_default()
            .insert(series_idx);
    }

    if classes.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }

    // every class must carry the same series set
    for (class_idx, seen) in &class_series {
        for (series_idx, info) in series.iter().enumerate() {
            if !seen.contains(&series_idx) {
                return Err(CliError::Data(format!(
                    "inconsistent series: class {} lacks series {}",
                    classes[*class_idx], info.id
                )));
            }
        }
    }

    Ok(ParsedRows {
        classes,
        series,
        cells,
        dates: date_set.into_iter().collect(),
    })
}

/// Loads a price panel. Dates not covered by every class are dropped
/// (shared-calendar intersection); within kept dates a missing
/// (class, series) cell is an error unless `forward_fill` carries the last
/// observation forward.
pub fn load_panel(path: &Path, forward_fill: bool) -> CliResult<(PricePanel, LoadStats)> {
    let rows = parse_long_csv(path, "price")?;
    let (k_n, j_n) = (rows.classes.len(), rows.series.len());

    // a class covers a date when at least one of its series has a value
    let kept: Vec<String> = rows
        .dates
        .iter()
        .filter(|date| {
            (0..k_n).all(|k| (0..j_n).any(|j| rows.cells.contains_key(&(k, j, (*date).clone()))))
        })
        .cloned()
        .collect();
    let dropped_dates = rows.dates.len() - kept.len();
    if kept.len() < 2 {
        return Err(CliError::Data(format!(
            "{}: fewer than two dates shared by all classes",
            path.display()
        )));
    }

    let mut filled_cells = 0usize;
    let mut values = vec![0.0f64; k_n * j_n * kept.len()];
    for k in 0..k_n {
        for j in 0..j_n {
            let mut last: Option<f64> = None;
            for (t, date) in kept.iter().enumerate() {
                let cell = rows.cells.get(&(k, j, date.clone())).copied();
                let value = match (cell, last, forward_fill) {
                    (Some(v), _, _) => v,
                    (None, Some(prev), true) => {
                        filled_cells += 1;
                        prev
                    }
                    (None, _, _) => {
                        return Err(CliError::Data(format!(
                            "missing {} for ({}, {}, {date}){}",
                            "price",
                            rows.classes[k],
                            rows.series[j].id,
                            if forward_fill {
                                " and nothing to carry forward"
                            } else {
                                ""
                            }
                        )))
                    }
                };
                values[(k * j_n + j) * kept.len() + t] = value;
                last = Some(value);
            }
        }
    }

    let panel = PricePanel::new(rows.classes, rows.series, kept, values)
        .map_err(|e| CliError::Data(e.to_string()))?;
    Ok((
        panel,
        LoadStats {
            filled_cells,
            dropped_dates,
        },
    ))
}

/// Writes a standardized return panel in the long schema, full precision.
pub fn write_returns(panel: &ReturnPanel, path: &Path, header_comment: &str) -> CliResult<()> {
    let mut out = String::new();
    out.push_str(header_comment);
    out.push('\n');
    out.push_str("date,class,series,type,return\n");
    for (t, date) in panel.dates.iter().enumerate() {
        for (k, class) in panel.classes.iter().enumerate() {
            for (j, info) in panel.series.iter().enumerate() {
                let value = panel.value(k, j, t);
                out.push_str(&format!(
                    "{date},{class},{},{},{value}\n",
                    info.id, info.kind
                ));
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a returns file written by `preprocess` (or any file in the same
/// schema). The stored per-series scaling is the identity; the panel is
/// expected to already be standardized.
pub fn read_returns(path: &Path) -> CliResult<ReturnPanel> {
    let rows = parse_long_csv(path, "return")?;
    let (k_n, j_n, t_n) = (rows.classes.len(), rows.series.len(), rows.dates.len());
    let mut values = vec![0.0f64; k_n * j_n * t_n];
    for k in 0..k_n {
        for j in 0..j_n {
            for (t, date) in rows.dates.iter().enumerate() {
                let v = rows
                    .cells
                    .get(&(k, j, date.clone()))
                    .copied()
                    .ok_or_else(|| {
                        CliError::Data(format!(
                            "missing return for ({}, {}, {date})",
                            rows.classes[k], rows.series[j].id
                        ))
                    })?;
                values[(k * j_n + j) * t_n + t] = v;
            }
        }
    }
    ReturnPanel::from_values(
        rows.classes,
        rows.series,
        rows.dates,
        values,
        vec![Scaling { mean: 0.0, sd: 1.0 }; k_n * j_n],
    )
    .map_err(|e| CliError::Data(e.to_string()))
}
