//! Canonical scenario configurations. The CLI's `gen-acceptance` command
//! writes these to disk; the acceptance suite loads the same definitions, so
//! test configs never live in test code.

use crate::simnet::config::{
    BehaviorConfig, CommitteeSection, DirectRewardConfig, HonestyConfig, JudgeConfig,
    JudgeKindConfig, ModelConfig, PricingConfig, ScenarioConfig, TrafficConfig, ValidatorConfig,
    WorkerConfig, SCHEMA_VERSION,
};

fn base_pricing() -> PricingConfig {
    PricingConfig {
        delta: [1, 1],
        c_in_tokens: 0.002,
        c_out_tokens: 0.004,
        theta: [1, 1],
        beta: [3, 10],
    }
}

fn reference_judge() -> JudgeConfig {
    JudgeConfig {
        kind: JudgeKindConfig::Reference,
        lambda: [7, 10],
        cross_tp: 0.66,
        cross_fp: 0.02,
        llm_tp: 0.98,
        llm_fp: 0.12,
        trace: false,
    }
}

fn committee(target_size: u32) -> CommitteeSection {
    CommitteeSection {
        target_size,
        threshold: 0.2,
        slash_rate: [1, 10],
    }
}

fn model(id: &str, n_shards: u32, seed: u64, usage_fee_tokens: f64) -> ModelConfig {
    ModelConfig {
        id: id.to_string(),
        scale: [1, 1],
        n_shards,
        seed,
        usage_fee_tokens,
        provider_balance_tokens: 0.0,
        provider_worker: None,
    }
}

fn honest_worker(name: &str, model: &str) -> WorkerConfig {
    WorkerConfig {
        name: Some(name.to_string()),
        model: model.to_string(),
        honesty: HonestyConfig::Honest,
        balance_tokens: 0.0,
    }
}

fn validator(name: &str, stake: f64, behavior: BehaviorConfig) -> ValidatorConfig {
    ValidatorConfig {
        name: Some(name.to_string()),
        balance_tokens: stake,
        stake_tokens: stake,
        behavior,
    }
}

fn traffic(requests_per_epoch: u32, batch_capacity: u32) -> TrafficConfig {
    TrafficConfig {
        users: 4,
        user_balance_tokens: 10_000.0,
        requests_per_epoch,
        prompt_len: [4, 16],
        response_len: [8, 32],
        batch_capacity,
        flush_timeout_ticks: 10,
        direct_reward: None,
    }
}

/// Reward-mechanism scenario: one full batch of direct-drawn task rewards in
/// [0.1, 0.5] settled at a fixed alpha against the given stake vector.
fn reward_case(name: &str, stakes: &[f64], alpha: f64) -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        seed: 2001,
        epochs: 1,
        pricing: base_pricing(),
        models: vec![model("m1", 1, 101, 0.0)],
        workers: vec![honest_worker("worker-a", "m1")],
        validators: stakes
            .iter()
            .enumerate()
            .map(|(i, &s)| validator(&format!("v{i}"), s, BehaviorConfig::FixedScore(alpha)))
            .collect(),
        committee: committee(stakes.len() as u32),
        judge: reference_judge(),
        traffic: TrafficConfig {
            direct_reward: Some(DirectRewardConfig {
                min_tokens: 0.1,
                max_tokens: 0.5,
            }),
            ..traffic(32, 32)
        },
    }
}

pub fn table3_case1() -> ScenarioConfig {
    reward_case("table3_case1", &[100.0, 100.0, 100.0], 0.8)
}

pub fn table3_case2() -> ScenarioConfig {
    reward_case("table3_case2", &[100.0, 300.0, 600.0], 0.8)
}

/// Case-1 stakes settled at each of the studied alpha values.
pub fn alpha_sweep() -> Vec<(String, ScenarioConfig)> {
    [0.2, 0.5, 0.8, 1.0]
        .into_iter()
        .map(|alpha| {
            let tag = format!("alpha_sweep_{:03}", (alpha * 100.0) as u32);
            let mut config = reward_case(&tag, &[100.0, 100.0, 100.0], alpha);
            config.name = tag.clone();
            (tag, config)
        })
        .collect()
}

/// One honest and one fully degraded worker under identical traffic: the
/// degraded worker's rewards collapse to ~0 under reference judges.
pub fn theorem1() -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: "theorem1".to_string(),
        seed: 31,
        epochs: 20,
        pricing: base_pricing(),
        models: vec![model("m-honest", 1, 71, 0.05), model("m-degraded", 1, 71, 0.05)],
        workers: vec![
            honest_worker("worker-honest", "m-honest"),
            WorkerConfig {
                name: Some("worker-degraded".to_string()),
                model: "m-degraded".to_string(),
                honesty: HonestyConfig::Degraded(1.0),
                balance_tokens: 0.0,
            },
        ],
        validators: (0..3)
            .map(|i| validator(&format!("v{i}"), 100.0, BehaviorConfig::Honest))
            .collect(),
        committee: committee(3),
        judge: reference_judge(),
        traffic: traffic(8, 32),
    }
}

/// A persistent under-scorer on a rigged (full) committee: slashed every
/// epoch, stake decays geometrically through 44 epochs.
pub fn theorem2() -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: "theorem2".to_string(),
        seed: 47,
        epochs: 44,
        pricing: base_pricing(),
        models: vec![model("m1", 1, 53, 0.0)],
        workers: vec![honest_worker("worker-a", "m1")],
        validators: vec![
            validator("v-honest-0", 100.0, BehaviorConfig::Honest),
            validator("v-honest-1", 100.0, BehaviorConfig::Honest),
            validator("v-corrupt", 100.0, BehaviorConfig::UnderScore(0.6)),
        ],
        committee: committee(3),
        judge: reference_judge(),
        traffic: traffic(4, 32),
    }
}

/// Seven-member committee with two over-scorers against a half-degraded
/// worker: the median tracks the honest score, the corrupt pair is slashed.
pub fn byzantine() -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: "byzantine".to_string(),
        seed: 59,
        epochs: 200,
        pricing: base_pricing(),
        models: vec![model("m1", 1, 83, 0.0)],
        workers: vec![WorkerConfig {
            name: Some("worker-degraded".to_string()),
            model: "m1".to_string(),
            honesty: HonestyConfig::Degraded(0.5),
            balance_tokens: 0.0,
        }],
        validators: (0..7)
            .map(|i| {
                let behavior = if i < 5 {
                    BehaviorConfig::Honest
                } else {
                    BehaviorConfig::OverScore(0.5)
                };
                validator(&format!("v{i}"), 100.0, behavior)
            })
            .collect(),
        committee: committee(7),
        judge: reference_judge(),
        traffic: traffic(4, 32),
    }
}

/// Four-shard model served honestly: the consensus score stays at 1.0, which
/// holds only if sharded execution is bit-identical to single-device.
pub fn sharding_equivalence() -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: "sharding_equivalence".to_string(),
        seed: 67,
        epochs: 3,
        pricing: base_pricing(),
        models: vec![model("m-sharded", 4, 97, 0.05)],
        workers: vec![honest_worker("worker-a", "m-sharded")],
        validators: (0..3)
            .map(|i| validator(&format!("v{i}"), 100.0, BehaviorConfig::Honest))
            .collect(),
        committee: committee(3),
        judge: reference_judge(),
        traffic: traffic(6, 32),
    }
}

/// Ten validators, committee target three: exercises the probabilistic
/// election rule, re-draws, and seed sensitivity of the committee schedule.
pub fn vrf_election() -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: "vrf_election".to_string(),
        seed: 73,
        epochs: 30,
        pricing: base_pricing(),
        models: vec![model("m1", 2, 89, 0.0)],
        workers: vec![honest_worker("worker-a", "m1")],
        validators: (0..10)
            .map(|i| validator(&format!("v{i}"), 100.0, BehaviorConfig::Honest))
            .collect(),
        committee: committee(3),
        judge: reference_judge(),
        traffic: traffic(4, 32),
    }
}

/// Stochastic judges against one honest and one degraded worker, with a
/// random-scoring validator in the committee.
pub fn stochastic_judges() -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: "stochastic_judges".to_string(),
        seed: 79,
        epochs: 10,
        pricing: base_pricing(),
        models: vec![model("m-honest", 1, 11, 0.0), model("m-degraded", 1, 11, 0.0)],
        workers: vec![
            honest_worker("worker-honest", "m-honest"),
            WorkerConfig {
                name: Some("worker-degraded".to_string()),
                model: "m-degraded".to_string(),
                honesty: HonestyConfig::Degraded(1.0),
                balance_tokens: 0.0,
            },
        ],
        validators: vec![
            validator("v0", 100.0, BehaviorConfig::Honest),
            validator("v1", 100.0, BehaviorConfig::Honest),
            validator("v2", 100.0, BehaviorConfig::Honest),
            validator("v3", 100.0, BehaviorConfig::Honest),
            validator("v-random", 100.0, BehaviorConfig::RandomScore),
        ],
        committee: committee(5),
        judge: JudgeConfig {
            kind: JudgeKindConfig::Stochastic,
            ..reference_judge()
        },
        traffic: traffic(6, 32),
    }
}

/// Every shipped scenario, keyed by file stem.
pub fn builtin() -> Vec<(String, ScenarioConfig)> {
    let mut all = vec![
        ("table3_case1".to_string(), table3_case1()),
        ("table3_case2".to_string(), table3_case2()),
        ("theorem1".to_string(), theorem1()),
        ("theorem2".to_string(), theorem2()),
        ("byzantine".to_string(), byzantine()),
        ("sharding_equivalence".to_string(), sharding_equivalence()),
        ("vrf_election".to_string(), vrf_election()),
        ("stochastic_judges".to_string(), stochastic_judges()),
    ];
    all.extend(alpha_sweep());
    all
}
