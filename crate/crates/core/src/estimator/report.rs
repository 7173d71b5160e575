use std::fmt::Write;

use statrs::distribution::{ContinuousCDF, Normal};

use super::{ConvergenceReport, EstimationResult};

/// `***` for p < 0.01, `**` for p < 0.05, `*` for p < 0.1 (two-sided normal).
pub fn significance_stars(estimate: f64, se: f64) -> &'static str {
    if !(se > 0.0) {
        return "";
    }
    let z = (estimate / se).abs();
    let p = 2.0 * (1.0 - Normal::standard().cdf(z));
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

fn cell(estimate: f64, se: Option<f64>, fixed: bool) -> String {
    match se {
        _ if fixed => format!("{estimate:.3} (fixed)"),
        Some(se) => format!("{estimate:.3}{} ({se:.3})", significance_stars(estimate, se)),
        None => format!("{estimate:.3} (n/a)"),
    }
}

/// Two-panel table: network dynamics, then behavior dynamics, one
/// "estimate (SE)" row per parameter.
pub fn render_estimate_table(result: &EstimationResult) -> String {
    let theta = result.theta_vec();
    let n_net = result.theta_hat.rho_net.len() + result.theta_hat.beta_net.len();
    let width = result.parameter_names.iter().map(|n| n.len()).max().unwrap_or(0).max(9);
    let mut out = String::new();
    for (title, range) in [
        ("(a) Network dynamics", 0..n_net),
        ("(b) Behavior dynamics", n_net..theta.len()),
    ] {
        writeln!(out, "{title}").unwrap();
        writeln!(out, "{:<width$}  Estimate (SE)", "Parameter").unwrap();
        for k in range {
            let se = result.standard_errors.as_ref().and_then(|s| s[k]);
            writeln!(
                out,
                "{:<width$}  {}",
                result.parameter_names[k],
                cell(theta[k], se, result.inestimable[k])
            )
            .unwrap();
        }
        writeln!(out).unwrap();
    }
    writeln!(out, "*** p<0.01, ** p<0.05, * p<0.1").unwrap();
    if let Some(why) = &result.standard_error_failure {
        writeln!(out, "standard errors unavailable: {why}").unwrap();
    }
    writeln!(
        out,
        "convergence: max |t-ratio| = {:.3} ({})",
        result.convergence.max_abs_t,
        if result.converged { "converged" } else { "NOT converged" }
    )
    .unwrap();
    out
}

/// Target value, mean deviation (SD) and t-ratio per statistic.
pub fn render_convergence_table(report: &ConvergenceReport) -> String {
    let width = report.statistics.iter().map(|s| s.name.len()).max().unwrap_or(0).max(9);
    let mut out = String::new();
    writeln!(
        out,
        "{:<width$}  {:>14}  {:>28}  {:>8}",
        "Statistic", "Target", "Av. deviation (SD)", "t-ratio"
    )
    .unwrap();
    for s in &report.statistics {
        let t = match s.t_ratio {
            Some(t) => format!("{t:.3}"),
            None => "n/s".to_string(),
        };
        writeln!(
            out,
            "{:<width$}  {:>14.3}  {:>28}  {:>8}",
            s.name,
            s.target,
            format!("{:.3} ({:.3})", s.mean_deviation, s.sd_deviation),
            t
        )
        .unwrap();
    }
    writeln!(
        out,
        "max |t-ratio| = {:.3}; {}",
        report.max_abs_t,
        if report.converged { "converged" } else { "NOT converged" }
    )
    .unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_thresholds() {
        assert_eq!(significance_stars(7.767, 0.100), "***");
        assert_eq!(significance_stars(2.0, 1.0), "**");
        assert_eq!(significance_stars(1.7, 1.0), "*");
        assert_eq!(significance_stars(1.0, 1.0), "");
        assert_eq!(significance_stars(-3.0, 1.0), "***");
        assert_eq!(significance_stars(1.0, 0.0), "");
    }
}
