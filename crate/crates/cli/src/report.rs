//! CSV and run-manifest output.

use std::io;
use std::path::Path;

use driftrelax::filter::FilterRecord;
use sha2::{Digest, Sha256};

use crate::config::BenchmarkConfig;

/// Decimal rendering with 17 significant digits, enough for the parsed
/// value to recover the original `f64` bit for bit.
pub fn format_g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// The fixed record schema; `ess_pct` is `100 * ess / N` and
/// `accept_rate` stays empty for filters without a rejuvenation pass.
pub const CSV_HEADER: &str = "k,t,z,post_mean,ess,ess_pct,accept_rate";

/// Renders records as CSV text, header included, one row per observation.
pub fn csv_string(records: &[FilterRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let accept = r.accept_rate.map(format_g17).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.k,
            format_g17(r.t),
            format_g17(r.z),
            format_g17(r.post_mean),
            format_g17(r.ess),
            format_g17(r.ess_pct()),
            accept
        ));
    }
    out
}

pub fn write_csv(records: &[FilterRecord], path: &Path) -> io::Result<()> {
    std::fs::write(path, csv_string(records))
}

/// Run manifest: the effective configuration, the master seed actually
/// used, and a content hash of the raw config file so outputs can be
/// traced back to their exact inputs.
pub fn manifest_string(cfg: &BenchmarkConfig, config_source: &[u8]) -> String {
    let digest = Sha256::digest(config_source);
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    format!(
        "# run manifest\nseed = {}\nconfig_sha256 = {}\n\n# effective configuration\n{}",
        cfg.seed,
        hex,
        cfg.to_key_values()
    )
}

pub fn write_manifest(cfg: &BenchmarkConfig, config_source: &[u8], path: &Path) -> io::Result<()> {
    std::fs::write(path, manifest_string(cfg, config_source))
}
