//! Plain-text tables for the terminal.

use mpat_core::estimators::SubsetSelection;
use mpat_core::simulator::CampaignResult;
use mpat_core::vsh::RmseDb;

fn rmse(v: Option<RmseDb>) -> String {
    v.map_or_else(|| "-".to_string(), |r| match r {
        RmseDb::NegInfinity => "-inf".to_string(),
        RmseDb::Db(x) => format!("{x:.4}"),
    })
}

fn ohms(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

fn angle(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x}"))
}

pub fn corr(v: Option<f64>) -> String {
    v.map_or_else(|| "null (undefined)".to_string(), |x| format!("{x:.4}"))
}

/// One row per AUT, RMSE (dB) and R_r (Ω) per method, then the means.
pub fn print_table(result: &CampaignResult) {
    let mut header = format!("{:>6} {:>7} {:>7}", "label", "theta", "phi");
    for m in &result.methods {
        header.push_str(&format!(" {:>12} {:>10}", format!("{} dB", m.name()), format!("{} R_r", m.name())));
    }
    println!("{header}");
    for row in &result.rows {
        let mut line = format!("{:>6} {:>7} {:>7}", row.label, angle(row.theta_deg), angle(row.phi_deg));
        for m in &result.methods {
            match row.estimate(*m) {
                Some(e) if e.error.is_none() => {
                    line.push_str(&format!(" {:>12} {:>10}", rmse(e.rmse_db), ohms(e.r_r_ohms)))
                }
                _ => line.push_str(&format!(" {:>12} {:>10}", "failed", "-")),
            }
        }
        println!("{line}");
    }
    let mut line = format!("{:>6} {:>7} {:>7}", "mean", "", "");
    for s in &result.summary {
        line.push_str(&format!(" {:>12} {:>10}", rmse(s.mean_rmse_db), ohms(s.mean_r_r_ohms)));
    }
    println!("{line}");
    if let Some(sel) = &result.selection {
        println!("matrix-inversion sensors: {} (H1 = {:.4} bits)", sel.sense_ids.join(", "), sel.h1_bits);
    }
    if let Some(e) = &result.selection_error {
        println!("subset selection failed: {e}");
    }
    for row in &result.rows {
        for e in row.estimates.iter().filter(|e| e.error.is_some()) {
            println!("{} {}: {}", row.label, e.method.name(), e.error.as_deref().unwrap_or_default());
        }
    }
}

pub fn print_ranking(ranked: &[SubsetSelection], sense_ids: &[String]) {
    println!("{:>5}  {:<20} {:>12} {:>14}", "rank", "sensors", "H1 (bits)", "condition");
    for (i, sel) in ranked.iter().enumerate() {
        let ids: Vec<&str> = sel.indices.iter().map(|&j| sense_ids[j].as_str()).collect();
        println!("{:>5}  {:<20} {:>12.6} {:>14.6e}", i + 1, ids.join(","), sel.h1_bits, sel.condition);
    }
}
