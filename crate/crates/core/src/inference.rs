//! Deterministic toy inference model with single-device and sharded
//! cross-device execution.
//!
//! The model is a keyed ARX permutation over a 4x64-bit carry. One emission
//! round applies `n_shards * STEPS_PER_SHARD` mixing steps and emits one
//! 16-bit token; shard `i` owns the i-th contiguous block of steps, so the
//! sharded pipeline is exact function composition of the single-device run:
//! shard 1 of round k consumes the carry that shard n produced in round k-1,
//! and the two execution paths are bit-identical by construction.

use crate::amount::{Ratio, TokenAmount};
use crate::rng::mix64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mixing steps executed by each shard per round.
pub const STEPS_PER_SHARD: u32 = 6;

/// Hard cap on prompt + response length.
pub const MAX_SEQUENCE_LEN: usize = 4096;

/// Number of 64-bit words in the inter-shard carry.
pub const CARRY_WORDS: usize = 4;

pub type Carry = [u64; CARRY_WORDS];

const DEGRADATION_DOMAIN: u64 = 0x6465_6772_6164_6531;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InferenceError {
    #[error("sequence of {len} tokens exceeds the {max} token limit")]
    SequenceTooLong { len: usize, max: usize },
    #[error("response length must be at least 1")]
    EmptyResponse,
    #[error("degradation level must be in (0, 1]")]
    DegradationOutOfRange,
}

/// Opaque model identifier, declared in scenario configs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelId(pub String);

impl std::fmt::Display for ModelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Model parameters: identity, pricing scale factor, shard count, keyed seed,
/// and the per-batch usage fee owed to the model provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub model_id: ModelId,
    pub scale_factor: Ratio,
    pub n_shards: u32,
    pub seed: u64,
    pub usage_fee: TokenAmount,
}

/// Token sequence bounded by [`MAX_SEQUENCE_LEN`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence {
    tokens: Vec<u16>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<u16>) -> Result<Self, InferenceError> {
        if tokens.len() > MAX_SEQUENCE_LEN {
            return Err(InferenceError::SequenceTooLong {
                len: tokens.len(),
                max: MAX_SEQUENCE_LEN,
            });
        }
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[u16] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Carry handed from one shard to the next, tagged with the shard that
/// produced it (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShardState {
    pub shard_index: u32,
    pub carry: Carry,
}

fn key_words(seed: u64) -> [u64; 2] {
    [
        mix64(seed ^ 0x494d_5f4b_4559_5f30),
        mix64(seed ^ 0x494d_5f4b_4559_5f31),
    ]
}

#[inline]
fn step_key(key: [u64; 2], round: u32, step: u32) -> u64 {
    mix64(key[0] ^ ((round as u64) << 32) ^ step as u64).wrapping_add(key[1])
}

#[inline]
fn mix_step(carry: &mut Carry, k: u64) {
    carry[0] = carry[0].wrapping_add(carry[1]).wrapping_add(k);
    carry[3] = (carry[3] ^ carry[0]).rotate_left(16);
    carry[2] = carry[2].wrapping_add(carry[3]);
    carry[1] = (carry[1] ^ carry[2]).rotate_left(21);
    carry[0] = carry[0].rotate_left(32);
}

fn check_lengths(prompt: &TokenSequence, response_len: usize) -> Result<(), InferenceError> {
    if response_len == 0 {
        return Err(InferenceError::EmptyResponse);
    }
    let total = prompt.len() + response_len;
    if total > MAX_SEQUENCE_LEN {
        return Err(InferenceError::SequenceTooLong {
            len: total,
            max: MAX_SEQUENCE_LEN,
        });
    }
    Ok(())
}

/// Absorb the prompt into the initial carry. Round index 0 is reserved for
/// absorption; emission rounds are 1-based.
fn absorb_prompt(model: &ModelDescriptor, prompt: &TokenSequence) -> Carry {
    let key = key_words(model.seed);
    let mut carry = [
        mix64(model.seed ^ 0xa076_1d64_78bd_642f),
        mix64(model.seed ^ 0xe703_7ed1_a0b4_28db),
        mix64(model.seed ^ 0x8ebc_6af0_9c88_c6e3),
        mix64(model.seed ^ 0x5899_65cc_7537_4cc3),
    ];
    for (pos, &tok) in prompt.tokens().iter().enumerate() {
        carry[pos % CARRY_WORDS] ^= mix64(((pos as u64) << 16) | tok as u64);
        mix_step(&mut carry, step_key(key, 0, pos as u32));
    }
    carry
}

fn steps_per_round(model: &ModelDescriptor) -> u32 {
    model.n_shards * STEPS_PER_SHARD
}

#[inline]
fn emit(carry: &Carry) -> u16 {
    (carry[0] & 0xffff) as u16
}

/// Apply shard `shard_index` (1-based) for emission round `round` (1-based):
/// the shard's contiguous block of mixing steps.
pub fn run_shard(
    model: &ModelDescriptor,
    shard_index: u32,
    state: ShardState,
    round: u32,
) -> ShardState {
    debug_assert!(shard_index >= 1 && shard_index <= model.n_shards);
    let key = key_words(model.seed);
    let mut carry = state.carry;
    let first = (shard_index - 1) * STEPS_PER_SHARD;
    for step in first..first + STEPS_PER_SHARD {
        mix_step(&mut carry, step_key(key, round, step));
    }
    ShardState { shard_index, carry }
}

/// Single-device inference: run every mixing step of every round locally.
pub fn infer_single(
    model: &ModelDescriptor,
    prompt: &TokenSequence,
    response_len: usize,
) -> Result<TokenSequence, InferenceError> {
    check_lengths(prompt, response_len)?;
    let key = key_words(model.seed);
    let total_steps = steps_per_round(model);
    let mut carry = absorb_prompt(model, prompt);
    let mut out = Vec::with_capacity(response_len);
    for round in 1..=response_len as u32 {
        for step in 0..total_steps {
            mix_step(&mut carry, step_key(key, round, step));
        }
        out.push(emit(&carry));
    }
    Ok(TokenSequence { tokens: out })
}

/// Cross-device inference: chain the model's shards per round, concatenating
/// per-round emissions. Bit-identical to [`infer_single`] for every input.
pub fn infer_sharded(
    model: &ModelDescriptor,
    prompt: &TokenSequence,
    response_len: usize,
) -> Result<TokenSequence, InferenceError> {
    check_lengths(prompt, response_len)?;
    let mut state = ShardState {
        shard_index: 0,
        carry: absorb_prompt(model, prompt),
    };
    let mut out = Vec::with_capacity(response_len);
    for round in 1..=response_len as u32 {
        for shard_index in 1..=model.n_shards {
            state = run_shard(model, shard_index, state, round);
        }
        out.push(emit(&state.carry));
    }
    Ok(TokenSequence { tokens: out })
}

/// Dishonest inference: each honest output token is replaced, with
/// probability `degradation` under a seeded per-position hash, by a token
/// drawn from that hash. Deterministic for fixed inputs.
pub fn infer_degraded(
    model: &ModelDescriptor,
    prompt: &TokenSequence,
    response_len: usize,
    degradation: f64,
) -> Result<TokenSequence, InferenceError> {
    if !(degradation > 0.0 && degradation <= 1.0) {
        return Err(InferenceError::DegradationOutOfRange);
    }
    let honest = infer_single(model, prompt, response_len)?;
    let threshold = (degradation * (1u64 << 32) as f64).round() as u64;
    let mut prompt_digest = mix64(model.seed ^ DEGRADATION_DOMAIN);
    for &tok in prompt.tokens() {
        prompt_digest = mix64(prompt_digest ^ tok as u64);
    }
    let tokens = honest
        .tokens()
        .iter()
        .enumerate()
        .map(|(pos, &tok)| {
            let h = mix64(prompt_digest ^ (pos as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            if h >> 32 < threshold {
                (h & 0xffff) as u16
            } else {
                tok
            }
        })
        .collect();
    Ok(TokenSequence { tokens })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::DetRng;
    use proptest::prelude::*;

    fn model(seed: u64, n_shards: u32) -> ModelDescriptor {
        ModelDescriptor {
            model_id: ModelId(format!("m{n_shards}")),
            scale_factor: Ratio::ONE,
            n_shards,
            seed,
            usage_fee: TokenAmount::ZERO,
        }
    }

    fn seq(tokens: &[u16]) -> TokenSequence {
        TokenSequence::new(tokens.to_vec()).unwrap()
    }

    fn random_prompt(rng: &mut DetRng) -> TokenSequence {
        let len = rng.range_inclusive(1, 24) as usize;
        seq(&(0..len).map(|_| rng.token()).collect::<Vec<_>>())
    }

    #[test]
    fn single_token_inference_is_deterministic() {
        let m = model(7, 1);
        let p = seq(&[0]);
        let a = infer_single(&m, &p, 1).unwrap();
        let b = infer_single(&m, &p, 1).unwrap();
        assert_eq!(a.tokens().len(), 1);
        assert_eq!(a, b);
    }

    #[test]
    fn eight_tokens_stable_across_calls() {
        let m = model(99, 2);
        let p = seq(&[1, 2, 3]);
        let a = infer_single(&m, &p, 8).unwrap();
        let b = infer_single(&m, &p, 8).unwrap();
        assert_eq!(a.tokens().len(), 8);
        assert_eq!(a, b);
    }

    #[test]
    fn adjacent_seeds_produce_different_outputs() {
        // brute-force both seeds and compare
        let p = seq(&[5, 6, 7, 8]);
        let a = infer_single(&model(1000, 1), &p, 8).unwrap();
        let b = infer_single(&model(1001, 1), &p, 8).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn n_shards_one_is_degenerate_identity() {
        let m = model(3, 1);
        let p = seq(&[9, 9]);
        assert_eq!(
            infer_sharded(&m, &p, 16).unwrap(),
            infer_single(&m, &p, 16).unwrap()
        );
    }

    #[test]
    fn sharded_matches_single_for_hundred_prompts() {
        // oracle: infer_single
        let mut rng = DetRng::new(0x5eed);
        for n in [1u32, 2, 3, 4, 8] {
            let m = model(0xabc ^ n as u64, n);
            for _ in 0..100 {
                let p = random_prompt(&mut rng);
                assert_eq!(
                    infer_sharded(&m, &p, 16).unwrap(),
                    infer_single(&m, &p, 16).unwrap()
                );
            }
        }
    }

    #[test]
    fn eight_shards_partition_rounds_not_carry_words() {
        // carry has 4 words; 8 shards still compose exactly because shards
        // split the round's mixing steps
        let m = model(77, 8);
        let p = seq(&[1]);
        assert_eq!(
            infer_sharded(&m, &p, 8).unwrap(),
            infer_single(&m, &p, 8).unwrap()
        );
    }

    #[test]
    fn length_guards() {
        let m = model(1, 1);
        let p = seq(&[0; 100]);
        assert_eq!(
            infer_single(&m, &p, MAX_SEQUENCE_LEN - 99),
            Err(InferenceError::SequenceTooLong {
                len: MAX_SEQUENCE_LEN + 1,
                max: MAX_SEQUENCE_LEN
            })
        );
        assert_eq!(infer_single(&m, &p, 0), Err(InferenceError::EmptyResponse));
        assert!(TokenSequence::new(vec![0; MAX_SEQUENCE_LEN + 1]).is_err());
    }

    #[test]
    fn vanishing_degradation_equals_honest_output() {
        let m = model(11, 2);
        let p = seq(&[4, 2]);
        let honest = infer_single(&m, &p, 32).unwrap();
        // threshold rounds to zero below 2^-33
        let corrupted = infer_degraded(&m, &p, 32, 1e-12).unwrap();
        assert_eq!(honest, corrupted);
    }

    #[test]
    fn degraded_output_is_deterministic() {
        let m = model(11, 2);
        let p = seq(&[4, 2]);
        let a = infer_degraded(&m, &p, 32, 0.5).unwrap();
        let b = infer_degraded(&m, &p, 32, 0.5).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            infer_degraded(&m, &p, 32, 0.0),
            Err(InferenceError::DegradationOutOfRange)
        );
        assert_eq!(
            infer_degraded(&m, &p, 32, 1.1),
            Err(InferenceError::DegradationOutOfRange)
        );
    }

    #[test]
    fn full_degradation_matches_at_alphabet_rate() {
        // Monte Carlo over 1000 prompts: expected match fraction ~ 1/65536
        let m = model(21, 1);
        let mut rng = DetRng::new(0xd00d);
        let mut matches = 0u64;
        let mut total = 0u64;
        for _ in 0..1000 {
            let p = random_prompt(&mut rng);
            let honest = infer_single(&m, &p, 32).unwrap();
            let bad = infer_degraded(&m, &p, 32, 1.0).unwrap();
            matches += honest
                .tokens()
                .iter()
                .zip(bad.tokens())
                .filter(|(a, b)| a == b)
                .count() as u64;
            total += 32;
        }
        // expectation ~0.5 matches in 32k trials; allow a generous margin
        assert!(matches <= 8, "match count {matches} of {total} too high for d=1");
    }

    #[test]
    fn half_degradation_matches_expected_rate() {
        // expected match rate (1-d) + d/65536 for d = 0.5, binomial 3-sigma
        let m = model(22, 1);
        let mut rng = DetRng::new(0xcafe);
        let mut matches = 0u64;
        let mut total = 0u64;
        for _ in 0..1000 {
            let p = random_prompt(&mut rng);
            let honest = infer_single(&m, &p, 32).unwrap();
            let bad = infer_degraded(&m, &p, 32, 0.5).unwrap();
            matches += honest
                .tokens()
                .iter()
                .zip(bad.tokens())
                .filter(|(a, b)| a == b)
                .count() as u64;
            total += 32;
        }
        let rate = matches as f64 / total as f64;
        let expected = 0.5 + 0.5 / 65536.0;
        let sigma = (expected * (1.0 - expected) / total as f64).sqrt();
        assert!(
            (rate - expected).abs() < 3.0 * sigma,
            "rate {rate} vs expected {expected}"
        );
    }

    proptest! {
        #[test]
        fn shard_composition_identity(
            seed in any::<u64>(),
            n in prop::sample::select(vec![1u32, 2, 3, 4, 8]),
            prompt in prop::collection::vec(any::<u16>(), 1..32),
            r in 1usize..24,
        ) {
            let m = model(seed, n);
            let p = TokenSequence::new(prompt).unwrap();
            prop_assert_eq!(
                infer_sharded(&m, &p, r).unwrap(),
                infer_single(&m, &p, r).unwrap()
            );
        }
    }
}
