//! Experiment configuration: dimensions, noise levels, trial counts,
//! per-scheme parameters and the master seed.

use std::fmt;
use std::path::PathBuf;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Documented default master seed; every run embeds the effective seed in
/// its report.
pub const DEFAULT_SEED: u64 = 20101;

/// A trial count that may depend on the channel dimension, written as
/// `c`, `n`, `a*n^b` or `a*n^b+c` (e.g. `"1"`, `"2n+1"`, `"n^5+1"`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeFormula {
    Literal(u64),
    Poly { coef: u64, pow: u32, offset: u64 },
}

impl SizeFormula {
    pub fn eval(&self, n: usize) -> u64 {
        match *self {
            SizeFormula::Literal(v) => v,
            SizeFormula::Poly { coef, pow, offset } => {
                coef.saturating_mul((n as u64).saturating_pow(pow)).saturating_add(offset)
            }
        }
    }

    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.is_empty() {
            return Err("empty size formula".into());
        }
        if !s.contains('n') {
            return s
                .parse::<u64>()
                .map(SizeFormula::Literal)
                .map_err(|_| format!("invalid size formula {s:?}"));
        }
        let (head, offset) = match s.split_once('+') {
            Some((h, o)) => {
                let off = o
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| format!("invalid offset in size formula {s:?}"))?;
                (h.trim(), off)
            }
            None => (s, 0),
        };
        let (coef_str, pow_str) = head
            .split_once('n')
            .ok_or_else(|| format!("invalid size formula {s:?}"))?;
        let coef = if coef_str.is_empty() {
            1
        } else {
            coef_str
                .parse::<u64>()
                .map_err(|_| format!("invalid coefficient in size formula {s:?}"))?
        };
        let pow = if pow_str.is_empty() {
            1
        } else {
            let p = pow_str
                .strip_prefix('^')
                .ok_or_else(|| format!("invalid size formula {s:?}"))?;
            p.parse::<u32>().map_err(|_| format!("invalid power in size formula {s:?}"))?
        };
        Ok(SizeFormula::Poly { coef, pow, offset })
    }
}

impl fmt::Display for SizeFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SizeFormula::Literal(v) => write!(f, "{v}"),
            SizeFormula::Poly { coef, pow, offset } => {
                if coef != 1 {
                    write!(f, "{coef}")?;
                }
                write!(f, "n")?;
                if pow != 1 {
                    write!(f, "^{pow}")?;
                }
                if offset != 0 {
                    write!(f, "+{offset}")?;
                }
                Ok(())
            }
        }
    }
}

impl Serialize for SizeFormula {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SizeFormula {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct FormulaVisitor;
        impl Visitor<'_> for FormulaVisitor {
            type Value = SizeFormula;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer or a string like \"2n^2+1\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<SizeFormula, E> {
                Ok(SizeFormula::Literal(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<SizeFormula, E> {
                u64::try_from(v)
                    .map(SizeFormula::Literal)
                    .map_err(|_| E::custom("size formula must be non-negative"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<SizeFormula, E> {
                SizeFormula::parse(v).map_err(E::custom)
            }
        }
        deserializer.deserialize_any(FormulaVisitor)
    }
}

/// How the exact maximum-likelihood reference is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BruteForceMode {
    /// Always run (subject only to the hard enumeration limit).
    Full,
    /// Never run; conditional proportions come out undefined.
    Skip,
    /// Run only when `m^n` fits the configured per-message budget.
    Budgeted,
}

/// Matched-success-rate parameter choices for one scheme-comparison block.
/// `k1 = 0` disables supercharging for that scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exp5Block {
    pub n: usize,
    pub sigma: f64,
    pub nnx_k: SizeFormula,
    pub rade1_iters: u32,
    pub rade1_k1: SizeFormula,
    pub rade2_iters: u32,
    pub rade2_k1: SizeFormula,
}

/// Full experiment configuration. Unknown keys in a config file are
/// rejected; omitted keys take the documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Channel dimensions to sweep.
    pub n_list: Vec<usize>,
    /// Component-wise noise deviations to sweep.
    pub sigma_list: Vec<f64>,
    /// Constellation size (equispaced PSK).
    pub m: usize,
    /// Fresh channel matrices per dimension.
    pub matrices_per_n: usize,
    /// Messages per matrix (`L`).
    pub messages_per_matrix: usize,
    /// Dimensions at or above this use `reduced_l` messages per matrix.
    pub reduced_l_at_n: usize,
    /// Reduced message count for large dimensions.
    pub reduced_l: usize,
    pub master_seed: u64,
    /// Neighbor counts for the nearest-neighbor scheme.
    pub k_list: Vec<SizeFormula>,
    /// Iteration counts for the randomized decoders.
    pub t_list: Vec<u32>,
    /// Supercharging neighborhood size.
    pub k1: SizeFormula,
    /// Whether to also report supercharged estimates.
    pub supercharge: bool,
    /// Reuse the bare search outcome as the supercharge seed instead of an
    /// independent second search.
    pub paired_supercharge: bool,
    /// Early-exit confidence of the iterated decoders (1.0 never stops
    /// early).
    pub chi_thresh: f64,
    /// Per-pair rejection threshold of the two-coordinate decoder.
    pub chi_stop: f64,
    pub brute_force_mode: BruteForceMode,
    /// Candidate budget per message for `brute_force_mode = "budgeted"`.
    pub brute_budget: u64,
    /// Worker threads (0 = all available execution units).
    pub workers: usize,
    /// Scheme-comparison blocks; when absent, built-in parameter choices
    /// cover (n, sigma) in {6,7,8} x {0.25, 0.75, 1.25}.
    pub exp5_blocks: Option<Vec<Exp5Block>>,
    /// Directory of prebuilt neighbor-list caches.
    pub neighbors_cache_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_list: vec![6],
            sigma_list: vec![0.25, 0.5, 0.75, 1.0, 1.25],
            m: 8,
            matrices_per_n: 5,
            messages_per_matrix: 1000,
            reduced_l_at_n: 8,
            reduced_l: 200,
            master_seed: DEFAULT_SEED,
            k_list: vec![
                SizeFormula::Literal(1),
                SizeFormula::parse("2n+1").unwrap(),
                SizeFormula::parse("2n^2+1").unwrap(),
                SizeFormula::parse("n^3").unwrap(),
                SizeFormula::parse("n^4").unwrap(),
                SizeFormula::parse("n^5+1").unwrap(),
            ],
            t_list: (1..=7).collect(),
            k1: SizeFormula::parse("2n^2").unwrap(),
            supercharge: true,
            paired_supercharge: false,
            chi_thresh: 1.0,
            chi_stop: 1e-3,
            brute_force_mode: BruteForceMode::Budgeted,
            brute_budget: 20_000_000,
            workers: 0,
            exp5_blocks: None,
            neighbors_cache_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// Validates field invariants; the error message names the offending
    /// key.
    pub fn validate(&self) -> Result<(), String> {
        if self.n_list.is_empty() {
            return Err("n_list must not be empty".into());
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| !(2..=32).contains(&n)) {
            return Err(format!("n_list entry {n} outside the supported range 2..=32"));
        }
        if self.sigma_list.is_empty() {
            return Err("sigma_list must not be empty".into());
        }
        if self.sigma_list.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err("sigma_list entries must be finite and non-negative".into());
        }
        if self.m == 0 {
            return Err("m must be at least 1".into());
        }
        if self.matrices_per_n == 0 {
            return Err("matrices_per_n must be at least 1".into());
        }
        if self.messages_per_matrix == 0 {
            return Err("messages_per_matrix must be at least 1".into());
        }
        if self.reduced_l == 0 {
            return Err("reduced_l must be at least 1".into());
        }
        if self.t_list.is_empty() || self.t_list.contains(&0) {
            return Err("t_list entries must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.chi_thresh) {
            return Err("chi_thresh must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.chi_stop) {
            return Err("chi_stop must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// Messages per matrix for dimension `n`, honoring the large-`n`
    /// reduction.
    pub fn cell_messages(&self, n: usize) -> usize {
        if n >= self.reduced_l_at_n {
            self.reduced_l.min(self.messages_per_matrix)
        } else {
            self.messages_per_matrix
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_parse_eval_display() {
        let cases = [
            ("1", 8, 1u64, "1"),
            ("2n+1", 8, 17, "2n+1"),
            ("2n^2+1", 6, 73, "2n^2+1"),
            ("n^3", 6, 216, "n^3"),
            ("n^5+1", 8, 32769, "n^5+1"),
            ("2n^2", 8, 128, "2n^2"),
            ("n", 5, 5, "n"),
            ("0", 3, 0, "0"),
        ];
        for (input, n, value, display) in cases {
            let f = SizeFormula::parse(input).unwrap();
            assert_eq!(f.eval(n), value, "{input}");
            assert_eq!(f.to_string(), display);
            assert_eq!(SizeFormula::parse(&f.to_string()).unwrap(), f);
        }
        assert!(SizeFormula::parse("n^").is_err());
        assert!(SizeFormula::parse("2x+1").is_err());
        assert!(SizeFormula::parse("").is_err());
    }

    #[test]
    fn formula_serde_accepts_strings_and_integers() {
        let f: SizeFormula = serde_json::from_str("\"2n^2+1\"").unwrap();
        assert_eq!(f, SizeFormula::parse("2n^2+1").unwrap());
        let f: SizeFormula = serde_json::from_str("128").unwrap();
        assert_eq!(f, SizeFormula::Literal(128));
        assert_eq!(serde_json::to_string(&f).unwrap(), "\"128\"");
    }

    #[test]
    fn minimal_config_defaults() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"n_list": [6], "sigma_list": [0.25]}"#).unwrap();
        assert_eq!(cfg.n_list, vec![6]);
        assert_eq!(cfg.m, 8);
        assert_eq!(cfg.matrices_per_n, 5);
        assert_eq!(cfg.messages_per_matrix, 1000);
        assert_eq!(cfg.master_seed, DEFAULT_SEED);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<ExperimentConfig>(r#"{"n_lst": [6]}"#).unwrap_err();
        assert!(err.to_string().contains("n_lst"), "{err}");
    }

    #[test]
    fn invariant_violations_name_the_key() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"messages_per_matrix": 0}"#).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.contains("messages_per_matrix"), "{err}");
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = ExperimentConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn reduced_l_applies_at_threshold() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.cell_messages(6), 1000);
        assert_eq!(cfg.cell_messages(8), 200);
    }
}
