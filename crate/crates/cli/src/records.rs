//! CSV row types. Reals are written with nine significant digits; absent
//! values are empty cells.

use serde::{Deserialize, Serialize, Serializer};

use crate::fmt_sig9;

fn sig9<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_sig9(*x))
}

fn opt_sig9<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_str(&fmt_sig9(*v)),
        None => s.serialize_str(""),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRecord {
    pub model: String,
    #[serde(serialize_with = "sig9")]
    pub pi: f64,
    #[serde(serialize_with = "sig9")]
    pub delta: f64,
    #[serde(rename = "D01", serialize_with = "sig9")]
    pub d01: f64,
    #[serde(rename = "D10", serialize_with = "sig9")]
    pub d10: f64,
    #[serde(rename = "gamma_L", serialize_with = "opt_sig9")]
    pub gamma_l: Option<f64>,
    pub overshoot: String,
    #[serde(serialize_with = "sig9")]
    pub lb_any: f64,
    #[serde(serialize_with = "opt_sig9")]
    pub lb_any_simplified: Option<f64>,
    #[serde(serialize_with = "sig9")]
    pub lb_rare_coeff: f64,
    #[serde(serialize_with = "opt_sig9")]
    pub ub_ssprt: Option<f64>,
    #[serde(rename = "C1", serialize_with = "opt_sig9")]
    pub c1: Option<f64>,
    #[serde(rename = "C1prime", serialize_with = "opt_sig9")]
    pub c1_prime: Option<f64>,
    #[serde(rename = "C2", serialize_with = "opt_sig9")]
    pub c2: Option<f64>,
    #[serde(rename = "C2prime", serialize_with = "opt_sig9")]
    pub c2_prime: Option<f64>,
    #[serde(serialize_with = "sig9")]
    pub lb_nonadaptive: f64,
    #[serde(serialize_with = "opt_sig9")]
    pub coin_ub: Option<f64>,
    #[serde(rename = "coin_C1_refined", serialize_with = "opt_sig9")]
    pub coin_c1_refined: Option<f64>,
    pub k_max: u32,
    #[serde(serialize_with = "sig9")]
    pub alpha_seqthresh: f64,
    /// Semicolon-separated names of negative lower bounds.
    pub vacuous: String,
}

/// One experiment with the bounds at the same parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRecord {
    pub model: String,
    pub procedure: String,
    /// Resolved thresholds, e.g. `log_gamma_L=-0.69;log_gamma_U=11.5`.
    pub config: String,
    #[serde(serialize_with = "sig9")]
    pub pi: f64,
    #[serde(serialize_with = "sig9")]
    pub delta: f64,
    pub trials: u64,
    pub seed: u64,
    #[serde(rename = "mean_N", serialize_with = "sig9")]
    pub mean_n: f64,
    #[serde(rename = "stderr_N", serialize_with = "sig9")]
    pub stderr_n: f64,
    #[serde(rename = "pi_mean_N", serialize_with = "sig9")]
    pub pi_mean_n: f64,
    pub errors: u64,
    #[serde(serialize_with = "sig9")]
    pub pe_hat: f64,
    #[serde(serialize_with = "sig9")]
    pub pe_lo: f64,
    #[serde(serialize_with = "sig9")]
    pub pe_hi: f64,
    #[serde(serialize_with = "opt_sig9")]
    pub alpha_hat: Option<f64>,
    #[serde(serialize_with = "opt_sig9")]
    pub beta_hat: Option<f64>,
    #[serde(rename = "mean_N1", serialize_with = "opt_sig9")]
    pub mean_n1: Option<f64>,
    pub typical_visits: Option<u64>,
    pub atypical_visits: Option<u64>,
    #[serde(rename = "mean_N_typical", serialize_with = "opt_sig9")]
    pub mean_n_typical: Option<f64>,
    #[serde(rename = "stderr_N_typical", serialize_with = "opt_sig9")]
    pub stderr_n_typical: Option<f64>,
    #[serde(rename = "mean_N_atypical", serialize_with = "opt_sig9")]
    pub mean_n_atypical: Option<f64>,
    #[serde(serialize_with = "sig9")]
    pub lb_any: f64,
    #[serde(serialize_with = "sig9")]
    pub lb_rare_coeff: f64,
    #[serde(serialize_with = "opt_sig9")]
    pub ub_ssprt: Option<f64>,
    #[serde(rename = "C1", serialize_with = "opt_sig9")]
    pub c1: Option<f64>,
    #[serde(serialize_with = "sig9")]
    pub lb_nonadaptive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub axis: String,
    #[serde(serialize_with = "sig9")]
    pub value: f64,
    #[serde(serialize_with = "sig9")]
    pub pi: f64,
    #[serde(serialize_with = "sig9")]
    pub delta: f64,
    pub procedure: String,
    pub trials: u64,
    pub seed: u64,
    #[serde(rename = "mean_N", serialize_with = "opt_sig9")]
    pub mean_n: Option<f64>,
    #[serde(rename = "stderr_N", serialize_with = "opt_sig9")]
    pub stderr_n: Option<f64>,
    #[serde(rename = "pi_mean_N", serialize_with = "opt_sig9")]
    pub pi_mean_n: Option<f64>,
    #[serde(serialize_with = "opt_sig9")]
    pub pe_hat: Option<f64>,
    #[serde(serialize_with = "opt_sig9")]
    pub pe_lo: Option<f64>,
    #[serde(serialize_with = "opt_sig9")]
    pub pe_hi: Option<f64>,
    #[serde(serialize_with = "opt_sig9")]
    pub alpha_hat: Option<f64>,
    #[serde(serialize_with = "opt_sig9")]
    pub beta_hat: Option<f64>,
    #[serde(rename = "mean_N1", serialize_with = "opt_sig9")]
    pub mean_n1: Option<f64>,
    #[serde(serialize_with = "opt_sig9")]
    pub lb_any: Option<f64>,
    #[serde(serialize_with = "opt_sig9")]
    pub lb_rare_coeff: Option<f64>,
    #[serde(serialize_with = "opt_sig9")]
    pub ub_ssprt: Option<f64>,
    #[serde(rename = "C1", serialize_with = "opt_sig9")]
    pub c1: Option<f64>,
    #[serde(serialize_with = "opt_sig9")]
    pub lb_nonadaptive: Option<f64>,
    /// Empty unless the point failed.
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityRecord {
    pub identity: String,
    #[serde(serialize_with = "sig9")]
    pub observed: f64,
    #[serde(serialize_with = "opt_sig9")]
    pub predicted: Option<f64>,
    #[serde(serialize_with = "opt_sig9")]
    pub residual: Option<f64>,
    #[serde(serialize_with = "opt_sig9")]
    pub stderr: Option<f64>,
    #[serde(serialize_with = "sig9")]
    pub n_sigma: f64,
    pub status: String,
}

/// Serialises rows (with header) to a CSV string.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Parses rows written by [`to_csv`].
pub fn from_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect()
}
