//! Pricing of inference requests and distribution of batch rewards among the
//! worker, the validator committee, and the model provider.
//!
//! The batch reward splits into a worker share `alpha * (1 - beta) * R_batch`
//! (rounded half-down in base units) and a validator share computed as the
//! exact complement, so no base unit is ever lost to rounding. Validator
//! shares are stake-proportional by floor division; leftover units go one
//! each to validators in descending stake order (ties by ascending account
//! id), keeping every share within one unit of exact proportionality.

use crate::amount::{AmountError, Ratio, TokenAmount};
use crate::inference::{ModelDescriptor, ModelId, TokenSequence};
use crate::ledger::{AccountId, Ledger, LedgerError};
use crate::tiqe::{QualityScore, SCORE_SCALE};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EconomyError {
    #[error("arithmetic overflow in fixed-point pricing")]
    Overflow,
    #[error("validator stake set is empty or sums to zero")]
    EmptyStakes,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

impl From<AmountError> for EconomyError {
    fn from(_: AmountError) -> Self {
        EconomyError::Overflow
    }
}

/// Market-wide pricing and reward parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PricingParams {
    /// Market scaling coefficient applied on top of the model scale factor.
    pub delta: Ratio,
    /// Base cost per prompt token.
    pub c_in: TokenAmount,
    /// Base cost per response token.
    pub c_out: TokenAmount,
    /// Reward parameter: task reward = theta * task cost.
    pub theta: Ratio,
    /// Fixed fraction of each batch reward reserved for validators.
    pub beta: Ratio,
}

/// One priced inference task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceTask {
    pub task_id: u64,
    pub model_id: ModelId,
    pub prompt_len: u32,
    pub response_len: u32,
    pub cost: TokenAmount,
    pub reward: TokenAmount,
    pub prompt: TokenSequence,
    pub response: TokenSequence,
}

/// A worker's batch of tasks for one model, settled as a unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub batch_id: u64,
    pub model_id: ModelId,
    pub worker: AccountId,
    pub tasks: Vec<InferenceTask>,
    pub epoch: u64,
}

impl Batch {
    pub fn total_reward(&self) -> Result<TokenAmount, EconomyError> {
        let sum: u128 = self.tasks.iter().map(|t| t.reward).sum();
        u64::try_from(sum)
            .map(TokenAmount::from_units)
            .map_err(|_| EconomyError::Overflow)
    }
}

/// Settlement record for one batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardStatement {
    pub batch_id: u64,
    pub r_batch: TokenAmount,
    pub r_worker: TokenAmount,
    pub r_validators_total: TokenAmount,
    pub per_validator: Vec<(AccountId, TokenAmount)>,
    pub muf_paid: TokenAmount,
    pub muf_deficit: bool,
    pub alpha_used: QualityScore,
}

/// Model usage fee transfer outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MufSettlement {
    pub fee: TokenAmount,
    pub paid: TokenAmount,
    pub deficit: bool,
}

/// Price one request: `delta * scale * (c_in * p + c_out * r)`, evaluated as
/// one numerator product and one half-down division.
pub fn price_task(
    params: &PricingParams,
    model: &ModelDescriptor,
    prompt_len: u32,
    response_len: u32,
) -> Result<TokenAmount, EconomyError> {
    debug_assert!(prompt_len >= 1 && response_len >= 1);
    let base = (params.c_in.units() as u128)
        .checked_mul(prompt_len as u128)
        .and_then(|a| {
            (params.c_out.units() as u128)
                .checked_mul(response_len as u128)
                .and_then(|b| a.checked_add(b))
        })
        .ok_or(EconomyError::Overflow)?;
    let num = (params.delta.num as u128)
        .checked_mul(model.scale_factor.num as u128)
        .ok_or(EconomyError::Overflow)?;
    let den = (params.delta.den as u128)
        .checked_mul(model.scale_factor.den as u128)
        .ok_or(EconomyError::Overflow)?;
    TokenAmount::from_units(u64::try_from(base).map_err(|_| EconomyError::Overflow)?)
        .mul_div_half_down(num, den)
        .map_err(EconomyError::from)
}

/// Reward for one task: `theta * cost`, rounded half-down.
pub fn task_reward(params: &PricingParams, cost: TokenAmount) -> Result<TokenAmount, EconomyError> {
    cost.mul_div_half_down(params.theta.num as u128, params.theta.den as u128)
        .map_err(EconomyError::from)
}

/// Worker share of a batch reward: `alpha * (1 - beta) * r_batch` in a
/// single half-down division.
pub fn worker_share(
    r_batch: TokenAmount,
    alpha: QualityScore,
    beta: Ratio,
) -> Result<TokenAmount, EconomyError> {
    debug_assert!(beta.is_fraction());
    let num = (alpha.raw() as u128)
        .checked_mul(beta.complement_num() as u128)
        .ok_or(EconomyError::Overflow)?;
    let den = (SCORE_SCALE as u128)
        .checked_mul(beta.den as u128)
        .ok_or(EconomyError::Overflow)?;
    r_batch.mul_div_half_down(num, den).map_err(EconomyError::from)
}

/// Split a batch reward between the worker and the validator committee.
pub fn distribute_batch_reward(
    batch: &Batch,
    alpha: QualityScore,
    beta: Ratio,
    stakes: &[(AccountId, TokenAmount)],
) -> Result<RewardStatement, EconomyError> {
    let r_batch = batch.total_reward()?;
    let total_stake: u128 = stakes.iter().map(|(_, s)| *s).sum();
    if stakes.is_empty() || total_stake == 0 {
        return Err(EconomyError::EmptyStakes);
    }

    let r_worker = worker_share(r_batch, alpha, beta)?;

    // validators get the exact complement so the split never loses a unit
    let r_validators = r_batch.checked_sub(r_worker)?;

    let per_validator = split_by_stake(r_validators, stakes, total_stake)?;
    debug_assert_eq!(
        per_validator.iter().map(|(_, a)| *a).sum::<u128>(),
        r_validators.units() as u128
    );

    Ok(RewardStatement {
        batch_id: batch.batch_id,
        r_batch,
        r_worker,
        r_validators_total: r_validators,
        per_validator,
        muf_paid: TokenAmount::ZERO,
        muf_deficit: false,
        alpha_used: alpha,
    })
}

/// Floor-proportional stake split; residue units are handed out one each in
/// descending stake order (ties broken by ascending account id).
fn split_by_stake(
    total: TokenAmount,
    stakes: &[(AccountId, TokenAmount)],
    total_stake: u128,
) -> Result<Vec<(AccountId, TokenAmount)>, EconomyError> {
    let mut shares: Vec<(AccountId, TokenAmount)> = stakes
        .iter()
        .map(|(id, stake)| {
            total
                .mul_div_floor(stake.units() as u128, total_stake)
                .map(|share| (*id, share))
                .map_err(EconomyError::from)
        })
        .collect::<Result<_, _>>()?;
    let assigned: u128 = shares.iter().map(|(_, a)| *a).sum();
    let mut residue = total.units() as u128 - assigned;

    let mut order: Vec<usize> = (0..stakes.len()).collect();
    order.sort_by(|&a, &b| stakes[b].1.cmp(&stakes[a].1).then(stakes[a].0.cmp(&stakes[b].0)));
    for idx in order {
        if residue == 0 {
            break;
        }
        shares[idx].1 = shares[idx].1.checked_add(TokenAmount::from_units(1))?;
        residue -= 1;
    }
    debug_assert_eq!(residue, 0, "residue exceeds validator count");
    Ok(shares)
}

/// Pay the model usage fee from the worker to the provider. Self-provided
/// models skip the transfer; a fee the worker cannot cover is capped at the
/// available balance and flagged as a deficit rather than creating debt.
pub fn settle_muf(
    ledger: &mut Ledger,
    model: &ModelDescriptor,
    worker: &AccountId,
    provider: &AccountId,
) -> Result<MufSettlement, EconomyError> {
    let fee = model.usage_fee;
    if worker == provider || fee.is_zero() {
        return Ok(MufSettlement {
            fee,
            paid: TokenAmount::ZERO,
            deficit: false,
        });
    }
    let available = ledger.free_balance(worker)?;
    let paid = fee.min(available);
    ledger.transfer(worker, provider, paid)?;
    Ok(MufSettlement {
        fee,
        paid,
        deficit: paid < fee,
    })
}
