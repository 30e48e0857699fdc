//! Experiment results: per-cell counts, proportions and timings, plus
//! JSON/CSV/plain-table serialization.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;

/// One (n, sigma, scheme, parameter) measurement.
///
/// `proportion` is `numerator / denominator` and is absent when the
/// denominator is zero or the cell was skipped (see `note`).
/// `wall_seconds` is the summed wall time of the scheme's decode calls
/// only; channel generation, SVD precomputation and neighbor-list
/// construction are excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n: usize,
    pub sigma: f64,
    pub scheme: String,
    pub params: String,
    pub numerator: u64,
    pub denominator: u64,
    pub proportion: Option<f64>,
    pub wall_seconds: f64,
    pub messages_processed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CellResult {
    pub fn skipped(n: usize, sigma: f64, scheme: &str, params: String, reason: String) -> Self {
        CellResult {
            n,
            sigma,
            scheme: scheme.to_string(),
            params,
            numerator: 0,
            denominator: 0,
            proportion: None,
            wall_seconds: 0.0,
            messages_processed: 0,
            note: Some(reason),
        }
    }

    /// Wall time normalized to 1000 messages, the conventional unit for
    /// comparing schemes.
    pub fn wall_per_1000(&self) -> Option<f64> {
        (self.messages_processed > 0)
            .then(|| self.wall_seconds * 1000.0 / self.messages_processed as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub build: String,
    pub timestamp_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    pub fn new(experiment: &str, config: &ExperimentConfig, cells: Vec<CellResult>) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            config: config.clone(),
            cells,
            provenance: Provenance {
                master_seed: config.master_seed,
                build: format!("mimo-rade {}", env!("CARGO_PKG_VERSION")),
                timestamp_unix: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
            },
        }
    }

    /// Canonical JSON: object keys sorted, stable field layout.
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut out = serde_json::to_string_pretty(&value).expect("value serializes");
        out.push('\n');
        out
    }

    /// One row per cell.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "n",
            "sigma",
            "scheme",
            "params",
            "numerator",
            "denominator",
            "proportion",
            "wall_seconds",
            "messages_processed",
            "note",
        ])
        .expect("header");
        for cell in &self.cells {
            w.write_record([
                cell.n.to_string(),
                format!("{}", cell.sigma),
                cell.scheme.clone(),
                cell.params.clone(),
                cell.numerator.to_string(),
                cell.denominator.to_string(),
                cell.proportion.map(|p| format!("{p:.6}")).unwrap_or_default(),
                format!("{:.6}", cell.wall_seconds),
                cell.messages_processed.to_string(),
                cell.note.clone().unwrap_or_default(),
            ])
            .expect("record");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    /// Zeroes timing fields and the timestamp; two runs of the same
    /// configuration agree byte-for-byte after this.
    pub fn strip_volatile(&mut self) {
        self.provenance.timestamp_unix = 0;
        for cell in &mut self.cells {
            cell.wall_seconds = 0.0;
        }
    }

    /// Plain-text tables laid out like the conventional presentation of
    /// each experiment (rows over sigma or iteration count, columns over
    /// the swept parameter).
    pub fn to_text_table(&self) -> String {
        match self.experiment.as_str() {
            "experiment1" => self.table_n_by_sigma(),
            "experiment2" => self.table_sigma_by_params(),
            "experiment3" | "experiment4" => self.table_iters_by_sigma(),
            "experiment5" => self.table_comparison_blocks(),
            _ => self.table_flat(),
        }
    }

    fn ns(&self) -> Vec<usize> {
        let mut ns: Vec<usize> = self.cells.iter().map(|c| c.n).collect();
        ns.sort_unstable();
        ns.dedup();
        ns
    }

    fn sigmas(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.sigma) {
                out.push(c.sigma);
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    fn fmt_prop(p: Option<f64>) -> String {
        p.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
    }

    fn table_n_by_sigma(&self) -> String {
        let sigmas = self.sigmas();
        let mut out = String::new();
        let _ = writeln!(out, "proportion of x_best = x_true");
        let _ = write!(out, "{:>4}", "n");
        for s in &sigmas {
            let _ = write!(out, " {s:>9}");
        }
        out.push('\n');
        for n in self.ns() {
            let _ = write!(out, "{n:>4}");
            for s in &sigmas {
                let cell = self.cells.iter().find(|c| c.n == n && &c.sigma == s);
                let _ = write!(out, " {:>9}", Self::fmt_prop(cell.and_then(|c| c.proportion)));
            }
            out.push('\n');
        }
        out
    }

    fn table_sigma_by_params(&self) -> String {
        let mut out = String::new();
        for n in self.ns() {
            let mut params: Vec<&str> = Vec::new();
            for c in self.cells.iter().filter(|c| c.n == n) {
                if !params.contains(&c.params.as_str()) {
                    params.push(&c.params);
                }
            }
            let _ = writeln!(out, "n = {n}: success rate by neighbor count");
            let _ = write!(out, "{:>7}", "sigma");
            for p in &params {
                let _ = write!(out, " {p:>10}");
            }
            out.push('\n');
            for s in self.sigmas() {
                let _ = write!(out, "{s:>7}");
                for p in &params {
                    let cell = self
                        .cells
                        .iter()
                        .find(|c| c.n == n && c.sigma == s && c.params == *p);
                    let _ =
                        write!(out, " {:>10}", Self::fmt_prop(cell.and_then(|c| c.proportion)));
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }

    fn table_iters_by_sigma(&self) -> String {
        let sigmas = self.sigmas();
        let mut out = String::new();
        let _ = writeln!(out, "success rate, bare (upper) and supercharged (lower)");
        let _ = write!(out, "{:>4} {:>10}", "n", "iters");
        for s in &sigmas {
            let _ = write!(out, " {s:>9}");
        }
        out.push('\n');
        for n in self.ns() {
            let mut iters: Vec<&str> = Vec::new();
            for c in self.cells.iter().filter(|c| c.n == n) {
                let t = c.params.as_str();
                if !iters.contains(&t) {
                    iters.push(t);
                }
            }
            for t in iters {
                for (label, schemes) in
                    [("", vec!["rade1", "rade2"]), ("+super", vec!["rade1_super", "rade2_super"])]
                {
                    let row: Vec<String> = sigmas
                        .iter()
                        .map(|s| {
                            let cell = self.cells.iter().find(|c| {
                                c.n == n
                                    && &c.sigma == s
                                    && c.params == t
                                    && schemes.contains(&c.scheme.as_str())
                            });
                            Self::fmt_prop(cell.and_then(|c| c.proportion))
                        })
                        .collect();
                    if row.iter().all(|v| v == "-") {
                        continue;
                    }
                    let _ = write!(out, "{n:>4} {:>10}", format!("{t}{label}"));
                    for v in row {
                        let _ = write!(out, " {v:>9}");
                    }
                    out.push('\n');
                }
            }
        }
        out
    }

    fn table_comparison_blocks(&self) -> String {
        let mut out = String::new();
        let mut blocks: Vec<(usize, f64)> = Vec::new();
        for c in &self.cells {
            if !blocks.contains(&(c.n, c.sigma)) {
                blocks.push((c.n, c.sigma));
            }
        }
        for (n, sigma) in blocks {
            let _ = writeln!(out, "n = {n}, sigma = {sigma}");
            let cells: Vec<&CellResult> =
                self.cells.iter().filter(|c| c.n == n && c.sigma == sigma).collect();
            let _ = write!(out, "{:>12}", "");
            for c in &cells {
                let _ = write!(out, " {:>18}", c.scheme);
            }
            out.push('\n');
            let _ = write!(out, "{:>12}", "parameters");
            for c in &cells {
                let _ = write!(out, " {:>18}", c.params);
            }
            out.push('\n');
            let _ = write!(out, "{:>12}", "proportion");
            for c in &cells {
                let _ = write!(out, " {:>18}", Self::fmt_prop(c.proportion));
            }
            out.push('\n');
            let _ = write!(out, "{:>12}", "sec/1000");
            for c in &cells {
                let t = c
                    .wall_per_1000()
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_else(|| "-".into());
                let _ = write!(out, " {t:>18}");
            }
            out.push('\n');
            out.push('\n');
        }
        out
    }

    fn table_flat(&self) -> String {
        let mut out = String::new();
        for c in &self.cells {
            let _ = writeln!(
                out,
                "n={} sigma={} {} {} -> {} ({}/{}) in {:.4}s",
                c.n,
                c.sigma,
                c.scheme,
                c.params,
                Self::fmt_prop(c.proportion),
                c.numerator,
                c.denominator,
                c.wall_seconds
            );
        }
        out
    }
}
