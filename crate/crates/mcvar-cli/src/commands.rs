//! Subcommand implementations. Each command writes its artifacts under the
//! configured output directory and reports progress on stdout.

use std::path::PathBuf;

use mcvar::estimator::{fit, select_order, select_penalties, FitOptions, PenaltyGrid};
use mcvar::mat::Mat;
use mcvar::network::{build_network, shared_effects, type_effects, EffectNetwork};
use mcvar::panel::{log_diff, standardize};
use mcvar::rng::Rng;
use mcvar::sim::{simulate_panel, spectral_radius};

use crate::config::RunConfig;
use crate::csv_io::{load_panel, read_returns, write_returns};
use crate::dates::{date_sequence, parse_date};
use crate::error::{CliError, CliResult};
use crate::fit_doc::{read_fit, write_fit};
use crate::report::{
    render_dot, render_network_json, sanitize, write_adf_report, write_connectedness,
    write_convergence, write_grid, write_shared_effects, write_type_effects, AdfRow,
};

fn ensure_out_dir(config: &RunConfig) -> CliResult<()> {
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", config.out_dir.display())))
}

fn out_path(config: &RunConfig, name: &str) -> PathBuf {
    config.out_dir.join(name)
}

/// Load prices, transform to standardized log returns, run per-series
/// stationarity tests, write `returns.csv` and `adf_report.csv`.
pub fn cmd_preprocess(config: &RunConfig) -> CliResult<()> {
    ensure_out_dir(config)?;
    let input = config.input.as_ref().expect("validated");
    let (panel, stats) = load_panel(input, config.forward_fill)?;
    if stats.dropped_dates > 0 {
        println!(
            "dropped {} dates not shared by every class",
            stats.dropped_dates
        );
    }
    if stats.filled_cells > 0 {
        println!("forward-filled {} missing cells", stats.filled_cells);
    }
    let raw = log_diff(&panel)?;
    let standardized = standardize(&raw)?;

    let mut adf_rows = Vec::new();
    for k in 0..standardized.n_classes() {
        for j in 0..standardized.n_series() {
            let series = standardized.series_values(k, j);
            let result = mcvar::adf::adf_test(series, config.adf_max_lag).map_err(|e| {
                CliError::Data(format!(
                    "ADF on {}/{}: {e}",
                    standardized.classes[k], standardized.series[j].id
                ))
            })?;
            adf_rows.push(AdfRow {
                class: standardized.classes[k].clone(),
                series: standardized.series[j].id.clone(),
                scaling: standardized.scaling[k * standardized.n_series() + j],
                result,
            });
        }
    }

    let header = config.header_comment();
    write_returns(&standardized, &out_path(config, "returns.csv"), &header)?;
    let summary = write_adf_report(&adf_rows, &out_path(config, "adf_report.csv"), &header)?;
    println!("{summary}");
    println!(
        "wrote returns.csv ({} classes x {} series x {} observations) and adf_report.csv",
        standardized.n_classes(),
        standardized.n_series(),
        standardized.n_obs()
    );
    Ok(())
}

/// Fit the model: order selection if `--p` is unset, then either a direct
/// fit at explicit penalties or a BIC grid search. Writes `fit.json`,
/// `convergence.csv` and (for grid runs) `grid.csv`.
pub fn cmd_fit(config: &RunConfig) -> CliResult<()> {
    ensure_out_dir(config)?;
    let input = config.input.as_ref().expect("validated");
    let panel = read_returns(input)?;
    panel
        .verify_standardized(1e-6)
        .map_err(|e| CliError::Data(format!("{e}; run preprocess first")))?;

    let p = match config.p {
        Some(p) => p,
        None => {
            let chosen = select_order(&panel, config.p_max)?;
            println!("selected P={chosen} by BIC over 1..={}", config.p_max);
            chosen
        }
    };

    let opts: FitOptions = config.fit_options();
    let header = config.header_comment();

    let fitted = if config.grid {
        let grid = PenaltyGrid::default_for(&panel, p)?;
        let selection = select_penalties(&panel, p, &grid, &opts)?;
        write_grid(&selection.table, &out_path(config, "grid.csv"), &header)?;
        println!(
            "grid search over {} configurations; selected lambda=({}, {}, {}, {})",
            selection.table.len(),
            selection.penalty.lambda1,
            selection.penalty.lambda2,
            selection.penalty.lambda3,
            selection.penalty.lambda4
        );
        selection.fit
    } else {
        let penalty = config
            .penalties()
            .map_err(|e| CliError::Config(e.to_string()))?;
        fit(&panel, p, &penalty, &opts)?
    };

    write_fit(&fitted, &out_path(config, "fit.json"))?;
    write_convergence(
        &fitted.diagnostics.objective_trace,
        fitted.diagnostics.converged,
        &out_path(config, "convergence.csv"),
        &header,
    )?;
    println!(
        "wrote fit.json ({} outer iterations, converged: {})",
        fitted.diagnostics.outer_iterations, fitted.diagnostics.converged
    );
    if !fitted.diagnostics.converged {
        return Err(CliError::NonConvergence(format!(
            "outer loop stopped at the iteration cap ({}); artifacts were written",
            fitted.diagnostics.outer_iterations
        )));
    }
    Ok(())
}

/// Derive per-class networks and statistics tables from a fit document.
pub fn cmd_network(config: &RunConfig) -> CliResult<()> {
    ensure_out_dir(config)?;
    let input = config.input.as_ref().expect("validated");
    let fit = read_fit(input)?;
    let header = config.header_comment();

    let mut networks: Vec<EffectNetwork> = Vec::with_capacity(fit.n_classes());
    for k in 0..fit.n_classes() {
        let net = build_network(&fit, k)?;
        for (source, target) in &net.cancelled {
            println!(
                "warning: {}: lag effects of {} on {} cancel to exactly zero; no edge drawn",
                net.class_id, net.nodes[*source].id, net.nodes[*target].id
            );
        }
        networks.push(net);
    }

    for net in &networks {
        let stem = sanitize(&net.class_id);
        if config.formats.dot {
            std::fs::write(
                out_path(config, &format!("network_{stem}.dot")),
                render_dot(net),
            )?;
        }
        if config.formats.json {
            std::fs::write(
                out_path(config, &format!("network_{stem}.json")),
                render_network_json(net)?,
            )?;
        }
        if config.formats.csv {
            let effects = type_effects(net)?;
            write_type_effects(
                &effects,
                &out_path(config, &format!("type_effects_{stem}.csv")),
                &header,
            )?;
        }
    }
    if config.formats.csv {
        write_connectedness(&networks, &config.out_dir, &header)?;
        let shared = shared_effects(&networks)?;
        write_shared_effects(
            &networks,
            &shared,
            &out_path(config, "shared_effects.csv"),
            &header,
        )?;
    }
    println!(
        "wrote network exports for {} classes ({} total edges)",
        networks.len(),
        networks.iter().map(|n| n.edges.len()).sum::<usize>()
    );
    Ok(())
}

/// Draw a sparse shared-support multi-class VAR, convert the simulated
/// returns to a synthetic price history, and write `prices.csv` plus the
/// ground truth (`truth.json`).
pub fn cmd_simulate(config: &RunConfig) -> CliResult<()> {
    ensure_out_dir(config)?;
    let (k_n, j, t) = (config.sim_classes, config.sim_series, config.sim_obs);

    let b = shared_support_coefficients(j, config.sim_density, config.seed);
    let b_all = vec![b; k_n];
    let sigma = vec![Mat::eye(j); k_n];
    let sim = simulate_panel(&b_all, &sigma, t, config.seed)?;

    // returns -> prices: p_0 = 100, p_t = p_{t-1} * exp(r_t)
    let dates = date_sequence(parse_date("2015-01-01").expect("valid anchor"), t + 1);
    let mut body = String::from("date,class,series,type,price\n");
    let mut prices = vec![vec![100.0f64; k_n * j]; t + 1];
    for step in 1..=t {
        for k in 0..k_n {
            for s in 0..j {
                let r = sim.panel.value(k, s, step - 1);
                prices[step][k * j + s] = prices[step - 1][k * j + s] * r.exp();
            }
        }
    }
    for (step, date) in dates.iter().enumerate() {
        for k in 0..k_n {
            for s in 0..j {
                body.push_str(&format!(
                    "{date},{},{},{},{}\n",
                    sim.panel.classes[k],
                    sim.panel.series[s].id,
                    sim.panel.series[s].kind,
                    prices[step][k * j + s]
                ));
            }
        }
    }
    std::fs::write(out_path(config, "prices.csv"), body)?;

    let truth = serde_json::json!({
        "seed": config.seed,
        "classes": sim.panel.classes,
        "series": sim.panel.series.iter().map(|s| s.id.clone()).collect::<Vec<_>>(),
        "lags": 1,
        "coefficients": (0..k_n).map(|k| {
            (0..j).map(|r| b_all[k].row(r).to_vec()).collect::<Vec<_>>()
        }).collect::<Vec<_>>(),
        "support": sim.support,
    });
    std::fs::write(
        out_path(config, "truth.json"),
        format!("{}\n", serde_json::to_string_pretty(&truth)?),
    )?;
    println!(
        "simulated {} classes x {} series x {} observations (seed {}); wrote prices.csv, truth.json",
        k_n, j, t, config.seed
    );
    Ok(())
}

/// Random stable coefficient matrix with the requested support density,
/// shared by all classes.
fn shared_support_coefficients(j: usize, density: f64, seed: u64) -> Mat {
    let mut rng = Rng::new(seed ^ 0x5eed_c0de);
    let mut b = Mat::zeros(j, j);
    let want = ((j * j) as f64 * density).round() as usize;
    let mut placed = 0;
    let mut attempts = 0;
    while placed < want && attempts < 100 * j * j {
        attempts += 1;
        let r = (rng.next_u64() % j as u64) as usize;
        let c = (rng.next_u64() % j as u64) as usize;
        if b[(r, c)] == 0.0 {
            let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
            b[(r, c)] = sign * (0.25 + 0.2 * rng.uniform());
            placed += 1;
        }
    }
    let rho = spectral_radius(&b);
    if rho > 0.85 {
        b.scale(0.85 / rho);
    }
    b
}
