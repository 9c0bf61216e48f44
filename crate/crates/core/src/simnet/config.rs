//! Scenario configuration: TOML schema, parsing, and field-level validation.
//!
//! Token quantities are written in decimal tokens (exact to six places),
//! scores and probabilities in decimal (exact to eight places), and exact
//! rationals as `[numerator, denominator]` pairs.

use crate::amount::{Ratio, TokenAmount};
use crate::inference::MAX_SEQUENCE_LEN;
use crate::tiqe::QualityScore;
use serde::{Deserialize, Serialize};

/// Current config schema version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    /// Free-form scenario name, used in report summaries and file naming.
    pub name: String,
    pub seed: u64,
    pub epochs: u64,
    pub pricing: PricingConfig,
    pub models: Vec<ModelConfig>,
    pub workers: Vec<WorkerConfig>,
    pub validators: Vec<ValidatorConfig>,
    pub committee: CommitteeSection,
    pub judge: JudgeConfig,
    pub traffic: TrafficConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PricingConfig {
    /// Market scaling coefficient as [num, den].
    pub delta: [u64; 2],
    /// Base cost per prompt token, in decimal tokens.
    pub c_in_tokens: f64,
    /// Base cost per response token, in decimal tokens.
    pub c_out_tokens: f64,
    /// Reward parameter as [num, den]; task reward = theta * cost.
    pub theta: [u64; 2],
    /// Validator base reward fraction as [num, den], in [0, 1].
    pub beta: [u64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub id: String,
    /// Normalized model scale factor as [num, den].
    pub scale: [u64; 2],
    pub n_shards: u32,
    pub seed: u64,
    /// Per-batch usage fee owed to the provider, in decimal tokens.
    pub usage_fee_tokens: f64,
    /// Initial free balance of the dedicated provider account.
    #[serde(default)]
    pub provider_balance_tokens: f64,
    /// When set, the given worker (by index) acts as the model provider and
    /// no dedicated provider account is created.
    #[serde(default)]
    pub provider_worker: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkerConfig {
    #[serde(default)]
    pub name: Option<String>,
    /// Id of the model this worker serves.
    pub model: String,
    pub honesty: HonestyConfig,
    #[serde(default)]
    pub balance_tokens: f64,
}

/// Worker behavior across the run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum HonestyConfig {
    Honest,
    /// Corrupt every batch at the given level in (0, 1].
    Degraded(f64),
    /// Honest until the given epoch (1-based), degraded from it onward.
    LazyAfterEpoch { epoch: u64, level: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidatorConfig {
    #[serde(default)]
    pub name: Option<String>,
    /// Total initial holdings in decimal tokens; the stake is locked out of
    /// this amount at bootstrap.
    pub balance_tokens: f64,
    pub stake_tokens: f64,
    pub behavior: BehaviorConfig,
}

/// Validator scoring behavior.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorConfig {
    /// Evaluate and submit the genuine final score.
    Honest,
    /// Submit a constant score without evaluating (reward-mechanism studies).
    FixedScore(f64),
    /// Evaluate, then add a bias and clamp to [0, 1].
    OverScore(f64),
    /// Evaluate, then subtract a bias and clamp to [0, 1].
    UnderScore(f64),
    /// Submit a uniform random score from the behavior stream.
    RandomScore,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommitteeSection {
    pub target_size: u32,
    /// Median deviation threshold, decimal in [0, 1].
    pub threshold: f64,
    /// Slash rate gamma as [num, den], in (0, 1].
    pub slash_rate: [u64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeConfig {
    pub kind: JudgeKindConfig,
    /// Weight of the heavyweight judge in the final score, as [num, den].
    pub lambda: [u64; 2],
    #[serde(default = "default_cross_tp")]
    pub cross_tp: f64,
    #[serde(default = "default_cross_fp")]
    pub cross_fp: f64,
    #[serde(default = "default_llm_tp")]
    pub llm_tp: f64,
    #[serde(default = "default_llm_fp")]
    pub llm_fp: f64,
    /// Dump per-verdict JSONL traces next to the epoch reports.
    #[serde(default)]
    pub trace: bool,
}

fn default_cross_tp() -> f64 {
    0.66
}
fn default_cross_fp() -> f64 {
    0.02
}
fn default_llm_tp() -> f64 {
    0.98
}
fn default_llm_fp() -> f64 {
    0.12
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeKindConfig {
    /// Deterministic reference-oracle judges (exact match fractions).
    Reference,
    /// Stochastic judges calibrated to configured confusion rates.
    Stochastic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficConfig {
    pub users: u32,
    pub user_balance_tokens: f64,
    /// Requests generated per epoch; the same request list is submitted to
    /// every model so identically configured workers see identical load.
    pub requests_per_epoch: u32,
    /// Inclusive [min, max] prompt length range.
    pub prompt_len: [u32; 2],
    /// Inclusive [min, max] response length range.
    pub response_len: [u32; 2],
    pub batch_capacity: u32,
    pub flush_timeout_ticks: u64,
    /// When present, task costs are drawn uniformly from this range
    /// (quantized to 0.001 tokens) instead of the pricing formula.
    #[serde(default)]
    pub direct_reward: Option<DirectRewardConfig>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectRewardConfig {
    pub min_tokens: f64,
    pub max_tokens: f64,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Validate every field, returning the full list of diagnostics.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut issues = Vec::new();

        check(
            &mut issues,
            self.schema_version == SCHEMA_VERSION,
            &format!("schema_version: expected {SCHEMA_VERSION}"),
        );
        check(&mut issues, !self.name.is_empty(), "name: must be non-empty");

        check(&mut issues, ratio(self.pricing.delta).is_some(), "pricing.delta: zero denominator");
        check(&mut issues, ratio(self.pricing.theta).is_some(), "pricing.theta: zero denominator");
        match ratio(self.pricing.beta) {
            Some(beta) => check(&mut issues, beta.is_fraction(), "pricing.beta: must be in [0, 1]"),
            None => issues.push("pricing.beta: zero denominator".into()),
        }
        check(
            &mut issues,
            tokens(self.pricing.c_in_tokens).is_some(),
            "pricing.c_in_tokens: must be a finite non-negative token amount",
        );
        check(
            &mut issues,
            tokens(self.pricing.c_out_tokens).is_some(),
            "pricing.c_out_tokens: must be a finite non-negative token amount",
        );

        check(&mut issues, !self.models.is_empty(), "models: at least one model required");
        for (i, m) in self.models.iter().enumerate() {
            check(&mut issues, !m.id.is_empty(), &format!("models[{i}].id: must be non-empty"));
            check(
            &mut issues,
                self.models.iter().filter(|o| o.id == m.id).count() == 1,
                &format!("models[{i}].id: duplicate id {:?}", m.id),
            );
            match ratio(m.scale) {
                Some(s) => check(&mut issues, !s.is_zero(), &format!("models[{i}].scale: must be positive")),
                None => issues.push(format!("models[{i}].scale: zero denominator")),
            }
            check(
            &mut issues,
                (1..=64).contains(&m.n_shards),
                &format!("models[{i}].n_shards: must be in 1..=64"),
            );
            check(
            &mut issues,
                tokens(m.usage_fee_tokens).is_some(),
                &format!("models[{i}].usage_fee_tokens: invalid token amount"),
            );
            check(
            &mut issues,
                tokens(m.provider_balance_tokens).is_some(),
                &format!("models[{i}].provider_balance_tokens: invalid token amount"),
            );
            if let Some(w) = m.provider_worker {
                check(
            &mut issues,
                    w < self.workers.len(),
                    &format!("models[{i}].provider_worker: no worker at index {w}"),
                );
            }
            check(
            &mut issues,
                self.workers.iter().any(|w| w.model == m.id),
                &format!("models[{i}]: no worker serves model {:?}", m.id),
            );
        }

        check(&mut issues, !self.workers.is_empty(), "workers: at least one worker required");
        for (i, w) in self.workers.iter().enumerate() {
            check(
            &mut issues,
                self.models.iter().any(|m| m.id == w.model),
                &format!("workers[{i}].model: unknown model {:?}", w.model),
            );
            check(
            &mut issues,
                tokens(w.balance_tokens).is_some(),
                &format!("workers[{i}].balance_tokens: invalid token amount"),
            );
            match w.honesty {
                HonestyConfig::Honest => {}
                HonestyConfig::Degraded(level) | HonestyConfig::LazyAfterEpoch { level, .. } => {
                    check(
            &mut issues,
                        level > 0.0 && level <= 1.0,
                        &format!("workers[{i}].honesty: degradation level must be in (0, 1]"),
                    );
                }
            }
        }

        check(
            &mut issues,
            !self.validators.is_empty(),
            "validators: at least one validator required",
        );
        for (i, v) in self.validators.iter().enumerate() {
            let balance = tokens(v.balance_tokens);
            let stake = tokens(v.stake_tokens);
            check(
            &mut issues,
                balance.is_some(),
                &format!("validators[{i}].balance_tokens: invalid token amount"),
            );
            check(
            &mut issues,
                stake.is_some(),
                &format!("validators[{i}].stake_tokens: invalid token amount"),
            );
            if let (Some(balance), Some(stake)) = (balance, stake) {
                check(
            &mut issues,
                    !stake.is_zero(),
                    &format!("validators[{i}].stake_tokens: must be positive"),
                );
                check(
            &mut issues,
                    stake <= balance,
                    &format!("validators[{i}].stake_tokens: exceeds balance_tokens"),
                );
            }
            match v.behavior {
                BehaviorConfig::FixedScore(s) => check(
            &mut issues,
                    QualityScore::from_decimal_f64(s).is_some(),
                    &format!("validators[{i}].behavior.fixed_score: must be in [0, 1]"),
                ),
                BehaviorConfig::OverScore(b) | BehaviorConfig::UnderScore(b) => check(
            &mut issues,
                    QualityScore::from_decimal_f64(b).is_some(),
                    &format!("validators[{i}].behavior: bias must be in [0, 1]"),
                ),
                BehaviorConfig::Honest | BehaviorConfig::RandomScore => {}
            }
        }

        check(
            &mut issues,
            self.committee.target_size >= 1,
            "committee.target_size: must be at least 1",
        );
        check(
            &mut issues,
            (self.committee.target_size as usize) <= self.validators.len(),
            "committee.target_size: exceeds validator count",
        );
        check(
            &mut issues,
            QualityScore::from_decimal_f64(self.committee.threshold).is_some(),
            "committee.threshold: must be in [0, 1]",
        );
        match ratio(self.committee.slash_rate) {
            Some(g) => check(
            &mut issues,
                !g.is_zero() && g.is_fraction(),
                "committee.slash_rate: must be in (0, 1]",
            ),
            None => issues.push("committee.slash_rate: zero denominator".into()),
        }

        match ratio(self.judge.lambda) {
            Some(l) => check(&mut issues, l.is_fraction(), "judge.lambda: must be in [0, 1]"),
            None => issues.push("judge.lambda: zero denominator".into()),
        }
        for (field, value) in [
            ("cross_tp", self.judge.cross_tp),
            ("cross_fp", self.judge.cross_fp),
            ("llm_tp", self.judge.llm_tp),
            ("llm_fp", self.judge.llm_fp),
        ] {
            check(
            &mut issues,
                QualityScore::from_decimal_f64(value).is_some(),
                &format!("judge.{field}: must be in [0, 1]"),
            );
        }

        check(&mut issues, self.traffic.users >= 1, "traffic.users: must be at least 1");
        check(
            &mut issues,
            tokens(self.traffic.user_balance_tokens).is_some(),
            "traffic.user_balance_tokens: invalid token amount",
        );
        check(
            &mut issues,
            self.traffic.batch_capacity >= 1,
            "traffic.batch_capacity: must be at least 1",
        );
        let [pmin, pmax] = self.traffic.prompt_len;
        let [rmin, rmax] = self.traffic.response_len;
        check(
            &mut issues,
            pmin >= 1 && pmin <= pmax,
            "traffic.prompt_len: need 1 <= min <= max",
        );
        check(
            &mut issues,
            rmin >= 1 && rmin <= rmax,
            "traffic.response_len: need 1 <= min <= max",
        );
        check(
            &mut issues,
            (pmax + rmax) as usize <= MAX_SEQUENCE_LEN,
            "traffic: prompt_len.max + response_len.max exceeds the sequence limit",
        );
        if let Some(d) = &self.traffic.direct_reward {
            let lo = tokens(d.min_tokens);
            let hi = tokens(d.max_tokens);
            check(
            &mut issues,
                lo.is_some() && hi.is_some(),
                "traffic.direct_reward: invalid token amounts",
            );
            if let (Some(lo), Some(hi)) = (lo, hi) {
                check(&mut issues, lo <= hi, "traffic.direct_reward: min exceeds max");
            }
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }
}

fn check(issues: &mut Vec<String>, ok: bool, msg: &str) {
    if !ok {
        issues.push(msg.to_string());
    }
}

pub(crate) fn ratio(pair: [u64; 2]) -> Option<Ratio> {
    Ratio::new(pair[0], pair[1])
}

pub(crate) fn tokens(value: f64) -> Option<TokenAmount> {
    TokenAmount::from_decimal_tokens(value).ok()
}
