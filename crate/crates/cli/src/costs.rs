use std::fmt::Write as _;

use chainid_core::economics::{cost_table, CostTable, EconomicsError, FeeSchedule, SizeModel, REFERENCE_USD_CENTS};

/// Identity sizes listed under the template rows.
pub const IDENTITY_USES: [u32; 3] = [1, 5, 10];

pub fn table(schedule: &FeeSchedule) -> Result<CostTable, EconomicsError> {
    cost_table(schedule, &SizeModel::standard(), &IDENTITY_USES)
}

pub fn render(table: &CostTable) -> String {
    let s = &table.schedule;
    let mut out = String::new();
    let _ = writeln!(out, "fee rate {} sat/byte, dust {} sat, {} USD/BTC", s.rate, s.dust, s.usd_per_btc);
    let _ = writeln!(out, "{:<16} {:>6} {:>10} {:>9}", "transaction", "bytes", "fee (sat)", "USD");
    for row in &table.rows {
        let _ = write!(out, "{:<16} {:>6} {:>10} {:>9}", row.template.name(), row.bytes, row.fee_satoshi, row.usd.to_string());
        if let Some(cents) = row.reference_mismatch_cents {
            let _ = write!(out, "  (published figure {}.{:02} differs)", cents / 100, cents % 100);
        }
        out.push('\n');
    }
    for id in &table.identities {
        let _ = writeln!(out, "identity with {:>2} use(s): {:>10} sat {:>9} USD", id.uses, id.satoshi, id.usd.to_string());
    }
    out
}

/// Published USD figure for a template, in cents.
pub fn reference_cents(name: &str) -> Option<u64> {
    REFERENCE_USD_CENTS.iter().find(|(t, _)| t.name() == name).map(|(_, c)| *c)
}
