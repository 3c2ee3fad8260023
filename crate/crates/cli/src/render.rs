//! Human-readable tables.
//!
//! Table cells are display-rounded to four significant digits and rendered
//! probabilities are clamped into [0, 1]; the JSON result document always
//! carries the raw full-precision values.

use prioloss::{AnalyticReport, ComparisonReport, Estimate, SimulationReport, SystemModel};

/// Formats to four significant digits, in fixed notation for moderate
/// magnitudes and scientific notation otherwise.
pub fn sig4(x: f64) -> String {
    if x == 0.0 {
        return "0.000".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.3e}")
        .parse()
        .expect("scientific rendering of a finite f64 parses back");
    let magnitude = rounded.abs().log10().floor() as i32;
    if (-4..=5).contains(&magnitude) {
        let decimals = (3 - magnitude).max(0) as usize;
        format!("{rounded:.decimals$}")
    } else {
        format!("{x:.3e}")
    }
}

/// Formats a probability for display: clamped into [0, 1], then rounded to
/// four significant digits. Raw out-of-range values stay in the data and are
/// surfaced through report warnings instead.
pub fn prob4(x: f64) -> String {
    sig4(x.clamp(0.0, 1.0))
}

fn estimate_cell(e: &Estimate) -> String {
    format!("{} ± {}", sig4(e.mean), sig4(e.half_width))
}

/// Renders right-aligned columns separated by two spaces.
fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let header_row: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    let mut widths: Vec<usize> = header_row.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (width, cell) in widths.iter_mut().zip(row) {
            *width = (*width).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in std::iter::once(&header_row).chain(rows.iter()) {
        for (i, (cell, width)) in row.iter().zip(&widths).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            for _ in cell.chars().count()..*width {
                out.push(' ');
            }
            out.push_str(cell);
        }
        out.push('\n');
    }
    out
}

/// Per-class analytic table: model quantities (rates, means, aggregates)
/// alongside the chain values and probabilities from the report.
pub fn render_analytic(model: &SystemModel<f64>, report: &AnalyticReport<f64>) -> String {
    let headers = [
        "i", "λ_i", "b_i", "Λ_i", "R_i", "g_i", "c_i", "q_i", "r_i", "γ_i",
    ];
    let rates = model.rates();
    let means = model.mean_services();
    let aggregates = model.cumulative_rates();
    let loads = model.cumulative_loads();
    let rows: Vec<Vec<String>> = (0..model.classes.len())
        .map(|i| {
            vec![
                (i + 1).to_string(),
                sig4(rates[i]),
                sig4(means[i]),
                sig4(aggregates[i]),
                sig4(loads[i]),
                sig4(report.chain.g[i]),
                prob4(report.blocking[i]),
                prob4(report.arrival_loss[i]),
                prob4(report.preemption[i]),
                prob4(report.loss[i]),
            ]
        })
        .collect();
    format!(
        "protocol {}   servers {}   classes {}   loss mode {}\n\n{}",
        model.protocol,
        model.servers,
        model.classes.len(),
        report.gamma_mode,
        table(&headers, &rows)
    )
}

/// Per-class simulation estimates, mean ± confidence half-width.
pub fn render_simulation(report: &SimulationReport) -> String {
    let headers = ["i", "q_i", "r_i", "γ_i"];
    let rows: Vec<Vec<String>> = report
        .classes
        .iter()
        .map(|c| {
            vec![
                c.class.to_string(),
                estimate_cell(&c.arrival_loss),
                estimate_cell(&c.preemption),
                estimate_cell(&c.loss),
            ]
        })
        .collect();
    format!(
        "protocol {}   replications {} x {} arrivals (warmup {})   seed {}   rng {}   confidence {}\n\n{}",
        report.protocol,
        report.replications,
        report.arrivals_per_replication,
        report.warmup_arrivals,
        report.base_seed,
        report.rng_algorithm,
        report.confidence_level,
        table(&headers, &rows)
    )
}

/// Side-by-side table, one row per class and metric, with deltas and
/// coverage flags, followed by a one-line coverage summary.
pub fn render_comparison(report: &ComparisonReport) -> String {
    let headers = [
        "i",
        "metric",
        "analytic",
        "simulated",
        "half_width",
        "delta",
        "covered",
    ];
    let mut rows = Vec::new();
    for class in &report.classes {
        for (label, m) in [
            ("q arrival loss", &class.arrival_loss),
            ("r preemption", &class.preemption),
            ("γ total loss", &class.loss),
        ] {
            rows.push(vec![
                class.class.to_string(),
                label.to_string(),
                sig4(m.analytic),
                sig4(m.simulated),
                sig4(m.half_width),
                sig4(m.absolute_delta),
                if m.covered { "yes" } else { "no" }.to_string(),
            ]);
        }
    }
    format!(
        "{}\nanalytic total loss inside simulation CI for all classes: {}\n",
        table(&headers, &rows),
        if report.loss_covered() { "yes" } else { "no" }
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig4_keeps_four_significant_digits_across_magnitudes() {
        assert_eq!(sig4(0.0), "0.000");
        assert_eq!(sig4(0.325206), "0.3252");
        assert_eq!(sig4(0.060428), "0.06043");
        assert_eq!(sig4(0.004525), "0.004525");
        assert_eq!(sig4(1.0), "1.000");
        assert_eq!(sig4(12.345), "12.35");
        assert_eq!(sig4(123456.0), "123500");
        assert_eq!(sig4(1234567.0), "1.235e6");
        assert_eq!(sig4(0.0001234), "0.0001234");
        assert_eq!(sig4(0.00001234), "1.234e-5");
        assert_eq!(sig4(-0.06043), "-0.06043");
        assert_eq!(sig4(0.99999), "1.000");
    }

    #[test]
    fn probabilities_are_clamped_for_display_only() {
        assert_eq!(prob4(1.0000000001), "1.000");
        assert_eq!(prob4(-0.0000000001), "0.000");
        assert_eq!(prob4(0.5), "0.5000");
    }

    #[test]
    fn table_columns_are_aligned() {
        let rendered = table(
            &["i", "value"],
            &[
                vec!["1".to_string(), "0.3252".to_string()],
                vec!["10".to_string(), "7.000".to_string()],
            ],
        );
        assert_eq!(rendered, " i   value\n 1  0.3252\n10   7.000\n");
    }
}
