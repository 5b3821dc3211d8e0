//! One function per subcommand. Each returns the full text of its output.

use serde_json::json;

use qgpart::decision::{argmin, cost_densities};
use qgpart::estimation::{polar_independence_test, recovery_experiment};
use qgpart::model_json::ModelDoc;
use qgpart::transport::{default_bounds, discretize, integer_assignment, objective, solve_assignment_lp};
use qgpart::{
    fit, optimal_rule, risk_monte_carlo, risk_quadrature, DecisionRule, FitConfig, HypothesisFamily,
    QuadratureSpec, WeightMatrix,
};

use crate::io::{coordinate_header, csv_table, read_models, read_points, read_weights};
use crate::options::{Flags, Format, Method, Reproduction};
use crate::CliError;

/// Dense LP tableaux above this many entries are refused.
const MAX_LP_ENTRIES: usize = 20_000_000;

fn pretty(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
    s.push('\n');
    s
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn models_and_weights(flags: &Flags, repro: &mut Reproduction) -> Result<(HypothesisFamily, WeightMatrix), CliError> {
    let models = read_models(&flags.model)?;
    for m in &flags.model {
        repro.path("model", m);
    }
    let weights = read_weights(flags.weights.as_deref(), models.len())?;
    if let Some(w) = &flags.weights {
        repro.path("weights", w);
    }
    Ok((HypothesisFamily::new(models)?, weights))
}

pub fn fit_cmd(flags: &Flags) -> Result<String, CliError> {
    let input = flags.input()?;
    let data = read_points(input)?;
    let defaults = FitConfig::default();
    let config = FitConfig {
        n_min: flags.n_min.unwrap_or(defaults.n_min),
        n_max: flags.n_max.unwrap_or(defaults.n_max),
        max_iterations: flags.max_iterations.unwrap_or(defaults.max_iterations),
        log_lik_tolerance: flags.tolerance.unwrap_or(defaults.log_lik_tolerance),
        restarts: flags.restarts.unwrap_or(defaults.restarts),
        seed: flags.seed(),
        atom_detection: !flags.no_atom_detection,
    };
    let mut repro = Reproduction::new("fit");
    repro
        .path("input", input)
        .flag("n-min", config.n_min)
        .flag("n-max", config.n_max)
        .flag("restarts", config.restarts)
        .flag("max-iterations", config.max_iterations)
        .flag("tolerance", config.log_lik_tolerance)
        .flag("seed", config.seed);
    if !config.atom_detection {
        repro.switch("no-atom-detection");
    }
    let result = fit(&data, &config)?;
    Ok(pretty(&json!({
        "command": repro.line(),
        "model": ModelDoc::from(&result.model),
        "log_likelihood": result.log_likelihood,
        "n_selected": result.n_selected,
        "converged": result.converged,
        "iterations_used": result.iterations_used,
        "per_candidate_scores": result.per_candidate_scores,
        "warnings": result.warnings,
    })))
}

pub fn classify_cmd(flags: &Flags) -> Result<String, CliError> {
    let mut repro = Reproduction::new("classify");
    let input = flags.input()?;
    repro.path("input", input);
    let (family, weights) = models_and_weights(flags, &mut repro)?;
    let points = read_points(input)?;
    let rule = optimal_rule(&weights, &family)?;
    let mut header = coordinate_header(family.dim());
    header.push("label".into());
    header.extend((0..family.len()).map(|j| format!("g{j}")));
    let mut rows = Vec::with_capacity(points.len());
    for x in &points {
        let g = cost_densities(&weights, &family, x)?;
        let label = rule.classify(x).ok_or_else(|| CliError::usage("optimal rule returned no label"))?;
        let mut row: Vec<String> = x.iter().map(|&v| num(v)).collect();
        row.push(label.to_string());
        row.extend(g.iter().map(|&v| num(v)));
        rows.push(row);
    }
    Ok(csv_table(&[repro.line()], &header, rows))
}

fn parse_rule(spec: &str, family: &HypothesisFamily, weights: &WeightMatrix) -> Result<DecisionRule, CliError> {
    if spec == "optimal" {
        return Ok(optimal_rule(weights, family)?);
    }
    if let Some(label) = spec.strip_prefix("constant:") {
        let j: usize = label
            .parse()
            .map_err(|_| CliError::usage(format!("--rule: '{label}' is not a label")))?;
        if j >= family.len() {
            return Err(CliError::usage(format!("--rule: label {j} out of range for {} hypotheses", family.len())));
        }
        return Ok(DecisionRule::constant(family.len(), j));
    }
    Err(CliError::usage(format!("--rule: expected 'optimal' or 'constant:<label>', got '{spec}'")))
}

pub fn risk_cmd(flags: &Flags) -> Result<String, CliError> {
    let mut repro = Reproduction::new("risk");
    let (family, weights) = models_and_weights(flags, &mut repro)?;
    let rule_spec = flags.rule.clone().unwrap_or_else(|| "optimal".into());
    let rule = parse_rule(&rule_spec, &family, &weights)?;
    let method = flags.method.unwrap_or(Method::Quadrature);
    let format = flags.format.unwrap_or(Format::Json);
    repro.flag("rule", &rule_spec);
    let report = match method {
        Method::Quadrature => {
            repro.flag("method", "quadrature");
            let spec = if family.dim() == 1 {
                QuadratureSpec::default()
            } else {
                QuadratureSpec::coarse()
            };
            risk_quadrature(&weights, &family, &rule, &spec)?
        }
        Method::MonteCarlo => {
            let n = flags.n.unwrap_or(100_000);
            repro.flag("method", "monte-carlo").flag("n", n).flag("seed", flags.seed());
            risk_monte_carlo(&weights, &family, &rule, n, flags.seed())?
        }
    };
    match format {
        Format::Json => {
            repro.flag("format", "json");
            Ok(pretty(&json!({ "command": repro.line(), "report": report })))
        }
        Format::Csv => {
            repro.flag("format", "csv");
            let comments = [
                repro.line(),
                format!(
                    "z={} z_stderr={} q_fa={} q_nd={} quadrature_error={} truncation_bound={}",
                    report.z, report.z_stderr, report.q_fa, report.q_nd, report.quadrature_error, report.truncation_bound
                ),
            ];
            let mut out = String::new();
            for c in comments {
                out.push_str(&format!("# {c}\n"));
            }
            out.push_str(&report.to_csv());
            Ok(out)
        }
    }
}

fn parse_bounds(text: &str, d: usize) -> Result<Vec<(f64, f64)>, CliError> {
    let bounds = text
        .split(',')
        .map(|part| {
            let (lo, hi) = part
                .split_once(':')
                .ok_or_else(|| CliError::usage(format!("--bounds: expected lo:hi, got '{part}'")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::usage(format!("--bounds: '{s}' is not a finite number")))
            };
            Ok((parse(lo)?, parse(hi)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    if bounds.len() != d {
        return Err(CliError::usage(format!("--bounds: {} intervals for dimension {d}", bounds.len())));
    }
    Ok(bounds)
}

pub fn grid_lp_cmd(flags: &Flags) -> Result<String, CliError> {
    let mut repro = Reproduction::new("grid-lp");
    let (family, weights) = models_and_weights(flags, &mut repro)?;
    let d = family.dim();
    let bounds = match &flags.bounds {
        Some(text) => parse_bounds(text, d)?,
        None => default_bounds(&family),
    };
    let resolution = flags.grid_resolution.unwrap_or(match d {
        1 => 200,
        2 => 30,
        _ => 10,
    });
    let bounds_text: Vec<String> = bounds.iter().map(|(lo, hi)| format!("{lo}:{hi}")).collect();
    repro.flag("bounds", bounds_text.join(",")).flag("grid-resolution", resolution);

    let (grid, costs) = discretize(&weights, &family, &bounds, resolution)?;
    let rows = grid.len();
    if rows.saturating_mul(rows.saturating_mul(family.len())) > MAX_LP_ENTRIES {
        return Err(CliError::usage(format!(
            "--grid-resolution: {rows} grid points make the LP tableau too large; lower the resolution"
        )));
    }
    let lp = solve_assignment_lp(&grid, &costs)?;
    let pointwise = integer_assignment(&grid, &costs)?;
    let z_lp = objective(&grid, &costs, &lp);
    let z_min = objective(&grid, &costs, &pointwise);
    let lp_labels = lp.labels();
    let min_labels = pointwise.labels();
    let mismatches = lp_labels.iter().zip(&min_labels).filter(|(a, b)| a != b).count();

    let mut header = coordinate_header(d);
    header.extend(["cell_weight".into(), "label_lp".into(), "label_argmin".into()]);
    header.extend((0..family.len()).map(|j| format!("g{j}")));
    let table = (0..rows).map(|r| {
        let mut row: Vec<String> = grid.points[r].iter().map(|&v| num(v)).collect();
        row.push(num(grid.cell_weights[r]));
        row.push(lp_labels[r].to_string());
        row.push(min_labels[r].to_string());
        row.extend(costs[r].iter().map(|&v| num(v)));
        row
    });
    let comments = [
        repro.line(),
        format!(
            "z_lp={z_lp} z_argmin={z_min} relative_gap={} label_mismatches={mismatches}",
            if z_min != 0.0 { (z_lp - z_min).abs() / z_min.abs() } else { (z_lp - z_min).abs() }
        ),
    ];
    debug_assert!(min_labels.iter().zip(&costs).all(|(&l, c)| l == argmin(c)));
    Ok(csv_table(&comments, &header, table))
}

pub fn simulate_cmd(flags: &Flags) -> Result<String, CliError> {
    if flags.model.len() != 1 {
        return Err(CliError::usage("--model: simulate takes exactly one model"));
    }
    let model = read_models(&flags.model)?.remove(0);
    let n = flags.n.ok_or_else(|| CliError::usage("--n: required"))?;
    let mut repro = Reproduction::new("simulate");
    repro.path("model", &flags.model[0]).flag("n", n).flag("seed", flags.seed());
    let sample = model.sample(n, flags.seed());
    let rows = sample.into_iter().map(|x| x.into_iter().map(num).collect());
    Ok(csv_table(&[repro.line()], &coordinate_header(model.dim()), rows))
}

fn parse_sizes(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| CliError::usage(format!("--n-grid: '{s}' is not a positive integer")))
        })
        .collect()
}

pub fn recovery_cmd(flags: &Flags) -> Result<String, CliError> {
    if flags.model.len() != 1 {
        return Err(CliError::usage("--model: recovery takes exactly one model"));
    }
    let truth = read_models(&flags.model)?.remove(0);
    let n_grid_text = flags.n_grid.clone().unwrap_or_else(|| "200,1000,5000".into());
    let n_grid = parse_sizes(&n_grid_text)?;
    let trials = flags.trials.unwrap_or(20);
    let defaults = FitConfig::default();
    let config = FitConfig {
        n_min: flags.n_min.unwrap_or(defaults.n_min),
        n_max: flags.n_max.unwrap_or(defaults.n_max),
        max_iterations: flags.max_iterations.unwrap_or(defaults.max_iterations),
        log_lik_tolerance: flags.tolerance.unwrap_or(defaults.log_lik_tolerance),
        restarts: flags.restarts.unwrap_or(defaults.restarts),
        seed: flags.seed(),
        atom_detection: !flags.no_atom_detection,
    };
    let mut repro = Reproduction::new("recovery");
    repro
        .path("model", &flags.model[0])
        .flag("n-grid", &n_grid_text)
        .flag("trials", trials)
        .flag("n-min", config.n_min)
        .flag("n-max", config.n_max)
        .flag("restarts", config.restarts)
        .flag("max-iterations", config.max_iterations)
        .flag("tolerance", config.log_lik_tolerance)
        .flag("seed", config.seed);
    if !config.atom_detection {
        repro.switch("no-atom-detection");
    }
    let table = recovery_experiment(&truth, &n_grid, trials, config.seed, &config)?;
    Ok(format!("# {}\n{}", repro.line(), table.to_csv()))
}

pub fn polar_test_cmd(flags: &Flags) -> Result<String, CliError> {
    let input = flags.input()?;
    let sample = read_points(input)?;
    let bins = flags.bins.unwrap_or(10);
    let significance = flags.significance.unwrap_or(0.01);
    let mut repro = Reproduction::new("polar-test");
    repro.path("input", input).flag("bins", bins).flag("significance", significance);
    let verdict = polar_independence_test(&sample, bins, significance)?;
    Ok(pretty(&json!({ "command": repro.line(), "verdict": verdict })))
}
