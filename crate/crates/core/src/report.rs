//! Report emission: country exposure tables, CDF data files and the
//! identification-attack cost estimate.
//!
//! All emitted percentages round half-up to two decimals; raw values are
//! preserved in the structures so CSV consumers can re-derive anything.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::cdf::CdfTable;
use crate::exposure::ExposureResult;
use crate::{Error, Result};

/// The 28 member-state codes used to label the aggregate row.
pub const EU28: [&str; 28] = [
    "AT", "BE", "BG", "CY", "CZ", "DE", "DK", "EE", "ES", "FI", "FR", "GB", "GR", "HR", "HU",
    "IE", "IT", "LT", "LU", "LV", "MT", "NL", "PL", "PT", "RO", "SE", "SI", "SK",
];

/// Rounds half-up (half away from zero for the negatives that never occur
/// here) to `decimals` places.
pub fn round_half_up(value: f64, decimals: u32) -> f64 {
    let factor = 10f64.powi(decimals as i32);
    (value * factor).round() / factor
}

/// Two-decimal percentage string, half-up.
pub fn format_percent(value: f64) -> String {
    format!("{:.2}", round_half_up(value, 2))
}

// ---------------------------------------------------------------------------
// Cost estimate

/// Cost of identifying one user through a targeted ad campaign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostEstimate {
    pub budget: f64,
    pub reached_users: u64,
    pub success_rate: f64,
    /// budget / (reached_users * success_rate); rounding happens only at
    /// display.
    pub cost_per_identified_user: f64,
}

impl CostEstimate {
    /// Display form: euro sign plus the cost at two significant figures,
    /// half-up.
    pub fn display(&self) -> String {
        format!("€{}", format_two_significant(self.cost_per_identified_user))
    }
}

/// Formats a positive amount at two significant figures, half-up.
fn format_two_significant(value: f64) -> String {
    if value == 0.0 {
        return "0.0".into();
    }
    let decimals_for = |v: f64| (1 - v.abs().log10().floor() as i32).max(0);
    let mut decimals = decimals_for(value);
    let mut factor = 10f64.powi(decimals);
    let mut rounded = (value * factor).round() / factor;
    // rounding can carry into a new leading digit (0.0995 -> 0.10)
    let after = decimals_for(rounded);
    if after != decimals {
        decimals = after;
        factor = 10f64.powi(decimals);
        rounded = (value * factor).round() / factor;
    }
    format!("{rounded:.*}", decimals as usize)
}

pub fn cost_per_identified_user(
    budget: f64,
    reached_users: u64,
    success_rate: f64,
) -> Result<CostEstimate> {
    if budget < 0.0 || !budget.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "budget {budget} must be nonnegative"
        )));
    }
    if reached_users == 0 {
        return Err(Error::InvalidParameter(
            "reached_users must be at least 1".into(),
        ));
    }
    if !(success_rate > 0.0 && success_rate <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "success_rate {success_rate} outside (0, 1]"
        )));
    }
    Ok(CostEstimate {
        budget,
        reached_users,
        success_rate,
        cost_per_identified_user: budget / (reached_users as f64 * success_rate),
    })
}

// ---------------------------------------------------------------------------
// Country exposure table

/// Per-country FFB/FC rows plus one aggregate row.
#[derive(Debug, Clone, Serialize)]
pub struct CountryTable {
    pub rows: Vec<(String, ExposureResult)>,
    pub aggregate_label: String,
    pub aggregate: ExposureResult,
}

/// Builds the table; the aggregate row is labeled `EU28` when the country
/// set is exactly the 28 member-state codes, `ALL` otherwise.
pub fn country_table(
    rows: Vec<(String, ExposureResult)>,
    aggregate: ExposureResult,
) -> Result<CountryTable> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("country table needs at least one row".into()));
    }
    let mut codes: Vec<&str> = rows.iter().map(|(c, _)| c.as_str()).collect();
    codes.sort_unstable();
    let aggregate_label = if codes == EU28 { "EU28" } else { "ALL" };
    Ok(CountryTable {
        rows,
        aggregate_label: aggregate_label.into(),
        aggregate,
    })
}

/// CSV rendering: `country,ffb,fc` with two-decimal half-up percentages,
/// aggregate last.
pub fn render_country_csv(table: &CountryTable) -> String {
    let mut out = String::from("country,ffb,fc\n");
    for (code, r) in &table.rows {
        let _ = writeln!(out, "{code},{},{}", format_percent(r.ffb), format_percent(r.fc));
    }
    let _ = writeln!(
        out,
        "{},{},{}",
        table.aggregate_label,
        format_percent(table.aggregate.ffb),
        format_percent(table.aggregate.fc)
    );
    out
}

/// Aligned text rendering of the same table.
pub fn render_country_text(table: &CountryTable) -> String {
    let width = table
        .rows
        .iter()
        .map(|(c, _)| c.len())
        .chain(std::iter::once(table.aggregate_label.len()))
        .chain(std::iter::once("Country".len()))
        .max()
        .unwrap_or(7);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>7}  {:>7}", "Country", "FFB", "FC");
    for (code, r) in &table.rows {
        let _ = writeln!(
            out,
            "{code:<width$}  {:>7}  {:>7}",
            format_percent(r.ffb),
            format_percent(r.fc)
        );
    }
    let _ = writeln!(
        out,
        "{:<width$}  {:>7}  {:>7}",
        table.aggregate_label,
        format_percent(table.aggregate.ffb),
        format_percent(table.aggregate.fc)
    );
    out
}

/// Writes the CSV and aligned-text renderings of a country table.
pub fn emit_country_table(
    table: &CountryTable,
    csv_path: impl AsRef<Path>,
    text_path: impl AsRef<Path>,
) -> Result<()> {
    let csv_display = csv_path.as_ref().display().to_string();
    std::fs::write(csv_path.as_ref(), render_country_csv(table))
        .map_err(|e| Error::io(csv_display, e))?;
    let text_display = text_path.as_ref().display().to_string();
    std::fs::write(text_path.as_ref(), render_country_text(table))
        .map_err(|e| Error::io(text_display, e))
}

// ---------------------------------------------------------------------------
// CDF data files

/// Renders a CDF as a `value,cumulative_fraction` CSV. Empty distributions
/// produce a header-only file with a marker comment.
pub fn render_cdf(cdf: &CdfTable) -> Result<String> {
    cdf.validate()?;
    let mut out = String::from("value,cumulative_fraction\n");
    if cdf.is_empty() {
        out.push_str("# empty distribution\n");
        return Ok(out);
    }
    for &(value, fraction) in &cdf.steps {
        let _ = writeln!(out, "{value},{fraction}");
    }
    Ok(out)
}

/// Writes a CDF data file for plotting.
pub fn emit_cdf(cdf: &CdfTable, path: impl AsRef<Path>) -> Result<()> {
    let rendered = render_cdf(cdf)?;
    let display = path.as_ref().display().to_string();
    std::fs::write(path.as_ref(), rendered).map_err(|e| Error::io(display, e))
}
