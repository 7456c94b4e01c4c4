//! Gas-cost table and scenario metric tables.
//!
//! Ether totals are rounded half-up to 6 decimals first and the USD figure
//! is computed from that rounded amount, then rounded half-up to 3
//! decimals. All arithmetic is on integers.

use serde::Serialize;

use crate::adversary::ScenarioMetrics;
use crate::ledger::{GasOp, GasSchedule};
use crate::wei::{Wei, WEI_PER_GWEI};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GasReportRow {
    pub caller: String,
    pub function_name: String,
    pub gas_limit: u64,
    pub gas_used: u64,
    pub gas_price_gwei: String,
    pub total_ether: String,
    pub total_usd: String,
}

const ROWS: [(GasOp, &str, &str); 3] = [
    (GasOp::AddService, "Drone Service Provider", "Add Service"),
    (GasOp::RequestService, "Consumer", "Request Service"),
    (GasOp::EndorseReview, "Endorser", "Endorse Review"),
];

/// Whole Gwei plus trimmed fraction, e.g. `2.9`.
pub fn format_gwei(price: Wei) -> String {
    let whole = price.value() / WEI_PER_GWEI;
    let frac = price.value() % WEI_PER_GWEI;
    if frac == 0 {
        return whole.to_string();
    }
    format!("{whole}.{}", format!("{frac:09}").trim_end_matches('0'))
}

/// `micro_ether × usd_per_ether`, in thousandths of a dollar, rounded
/// half-up. The rate is taken to 4 decimal places.
pub fn usd_milli(micro_ether: u128, usd_per_ether: f64) -> u128 {
    let rate_e4 = (usd_per_ether * 1e4).round() as u128;
    // micro-Ether × 1e-6 × rate_e4 × 1e-4 dollars, expressed in 1e-3 dollars
    (micro_ether * rate_e4 + 5_000_000) / 10_000_000
}

pub fn gas_table(gas: &GasSchedule, usd_per_ether: f64) -> Vec<GasReportRow> {
    ROWS.iter()
        .map(|&(op, caller, function_name)| {
            let entry = gas.entry(op);
            let micro = gas.cost(op).ether_units_rounded(6);
            let usd = usd_milli(micro, usd_per_ether);
            GasReportRow {
                caller: caller.into(),
                function_name: function_name.into(),
                gas_limit: entry.limit,
                gas_used: entry.used,
                gas_price_gwei: format_gwei(gas.gas_price),
                total_ether: format!("{}.{:06}", micro / 1_000_000, micro % 1_000_000),
                total_usd: format!("{}.{:03}", usd / 1_000, usd % 1_000),
            }
        })
        .collect()
}

/// Left-aligns text columns and right-aligns the rest.
fn render(header: &[&str], rows: &[Vec<String>], numeric_from: usize) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut out = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            if i < numeric_from {
                out.push_str(&format!("{cell:<w$}"));
            } else {
                out.push_str(&format!("{cell:>w$}"));
            }
        }
        out.trim_end().to_string() + "\n"
    };
    let mut out = line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    for row in rows {
        out.push_str(&line(row));
    }
    out
}

pub fn render_gas_table(rows: &[GasReportRow]) -> String {
    let header = ["Function Caller", "Function Name", "Gas Limit", "Gas Used", "Gas Price (Gwei)", "Total (Ether)", "Total (USD)"];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.caller.clone(),
                r.function_name.clone(),
                r.gas_limit.to_string(),
                r.gas_used.to_string(),
                r.gas_price_gwei.clone(),
                r.total_ether.clone(),
                format!("${}", r.total_usd),
            ]
        })
        .collect();
    render(&header, &body, 2)
}

fn ether6(w: Wei) -> String {
    let micro = w.ether_units_rounded(6);
    format!("{}.{:06}", micro / 1_000_000, micro % 1_000_000)
}

/// One row per scenario, in the order given.
pub fn render_metrics_table(runs: &[(String, ScenarioMetrics)]) -> String {
    let header = [
        "scenario",
        "badged",
        "accuracy",
        "atk_spend_eth",
        "atk_reg",
        "whitewash",
        "atk_reviews",
        "atk_branded",
        "neg_good_branded",
        "honest_misbadged",
        "excluded(atk)",
        "refund_fraud",
        "dret",
        "peak_dishonest",
        "breached",
    ];
    let body: Vec<Vec<String>> = runs
        .iter()
        .map(|(name, m)| {
            vec![
                name.clone(),
                m.badged_reviews.to_string(),
                format!("{:.3}", m.badge_accuracy),
                ether6(m.attacker_spend),
                format!("{}/{}", m.attacker_registrations_succeeded, m.attacker_registrations_attempted),
                format!("{}/{}", m.whitewash_successes, m.whitewash_attempts),
                format!("{}/{}", m.attacker_reviews_accepted, m.attacker_reviews_attempted),
                m.attacker_reviews_branded.to_string(),
                format!("{}/{}", m.dishonest_negative_good_branded, m.dishonest_negative_good_quorum),
                m.honest_reviews_misbadged.to_string(),
                format!("{}({})", m.exclusions, m.attacker_exclusions),
                m.refund_fraud_approved.to_string(),
                m.provider_dret_delta.to_string(),
                format!("{:.3}", m.peak_dishonest_roster_share),
                if m.defense_breached { "yes" } else { "no" }.to_string(),
            ]
        })
        .collect();
    render(&header, &body, 1)
}
