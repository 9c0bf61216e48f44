//! Per-epoch validator committee election and median score consensus with
//! deviation slashing.
//!
//! The VRF is a keyed-hash surrogate, not an elliptic-curve VRF: adversaries
//! in the simulator cannot forge keys by assumption, and the surrogate keeps
//! every property downstream code consumes — determinism per (sk, input),
//! verification against (pk, input) alone, and tamper evidence on any byte
//! of the ticket. A real VRF can replace it behind the same interface.

use crate::amount::{Ratio, TokenAmount};
use crate::ledger::AccountId;
use crate::tiqe::QualityScore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConsensusError {
    #[error("no eligible validators to elect from")]
    NoEligibleValidators,
    #[error("no scores were submitted")]
    EmptySubmissions,
    #[error("submission from account outside the committee: {0}")]
    UnknownSubmitter(AccountId),
}

/// Secret/public key pair for the keyed-hash VRF surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VrfKeypair {
    sk: [u8; 32],
    pub pk: [u8; 32],
}

impl VrfKeypair {
    /// Deterministic keypair from seed material; pk commits to sk.
    pub fn from_seed_material(material: &[u8]) -> Self {
        let sk: [u8; 32] = tagged_hash(b"infermesh-vrf-sk", &[material]);
        let pk = tagged_hash(b"infermesh-vrf-pk", &[&sk]);
        Self { sk, pk }
    }
}

/// Pseudorandom output plus proof tag for one election input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VrfTicket {
    pub r: u64,
    #[serde(with = "hex_tag")]
    pub proof: [u8; 32],
    #[serde(with = "hex_vec")]
    pub input: Vec<u8>,
}

mod hex_tag {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let text = String::deserialize(d)?;
        hex::decode(&text)
            .map_err(serde::de::Error::custom)?
            .try_into()
            .map_err(|_| serde::de::Error::custom("expected 32 hex bytes"))
    }
}

mod hex_vec {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &Vec<u8>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        hex::decode(&text).map_err(serde::de::Error::custom)
    }
}

fn tagged_hash(tag: &[u8], parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(tag);
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

/// Evaluate the VRF surrogate: `r` is keyed by the secret, the proof binds
/// (pk, input, r) so any tamper is detectable from public data.
pub fn vrf_evaluate(kp: &VrfKeypair, input: &[u8]) -> VrfTicket {
    let r_bytes = tagged_hash(b"infermesh-vrf-r", &[&kp.sk, input]);
    let r = u64::from_le_bytes(r_bytes[..8].try_into().expect("8 bytes"));
    let proof = tagged_hash(b"infermesh-vrf-proof", &[&kp.pk, input, &r.to_le_bytes()]);
    VrfTicket {
        r,
        proof,
        input: input.to_vec(),
    }
}

/// Check a ticket against a public key and the expected input. Returns false
/// on any mismatch, never errors.
pub fn vrf_verify(pk: &[u8; 32], input: &[u8], ticket: &VrfTicket) -> bool {
    if ticket.input != input {
        return false;
    }
    let expected = tagged_hash(b"infermesh-vrf-proof", &[pk, input, &ticket.r.to_le_bytes()]);
    expected == ticket.proof
}

/// Committee election parameters for one epoch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitteeConfig {
    pub eligible: Vec<AccountId>,
    pub target_size: u32,
    pub threshold: QualityScore,
    pub slash_rate: Ratio,
}

/// Bound on re-draws before falling back to lowest-ticket selection.
pub const MAX_ELECTION_ATTEMPTS: u32 = 16;

/// Public election rule: elected iff `r mod |eligible| < target_size`.
pub fn election_rule(r: u64, eligible_count: u64, target_size: u32) -> bool {
    debug_assert!(eligible_count > 0);
    r % eligible_count < target_size as u64
}

/// Everything needed to re-verify an election offline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionRecord {
    #[serde(with = "hex_vec")]
    pub base_input: Vec<u8>,
    /// Attempt index that produced a non-empty committee (0 = base input).
    pub nonce: u32,
    /// True when every attempt came up empty and the lowest-ticket fallback
    /// filled the committee from the base-input tickets.
    pub fallback: bool,
    pub eligible_count: u32,
    pub target_size: u32,
    pub tickets: Vec<TicketEntry>,
    pub committee: Vec<AccountId>,
    /// Claimants whose tickets failed verification, excluded from the draw.
    pub invalid: Vec<AccountId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TicketEntry {
    pub account: AccountId,
    #[serde(with = "hex_tag")]
    pub pk: [u8; 32],
    pub ticket: VrfTicket,
}

/// Input for election attempt `nonce`: the base input, suffixed with the
/// nonce for re-draws.
pub fn attempt_input(base_input: &[u8], nonce: u32) -> Vec<u8> {
    if nonce == 0 {
        base_input.to_vec()
    } else {
        let mut v = base_input.to_vec();
        v.extend_from_slice(&nonce.to_le_bytes());
        v
    }
}

/// Elect the epoch committee. `draw` produces each eligible validator's
/// (pk, ticket) for a given input; invalid tickets are excluded and reported.
/// An empty committee re-draws with a nonce-extended input up to
/// [`MAX_ELECTION_ATTEMPTS`] times, then the lowest base-input tickets fill
/// `target_size` seats.
pub fn elect_committee<F>(
    config: &CommitteeConfig,
    mut draw: F,
    base_input: &[u8],
) -> Result<ElectionRecord, ConsensusError>
where
    F: FnMut(&AccountId, &[u8]) -> ([u8; 32], VrfTicket),
{
    if config.eligible.is_empty() {
        return Err(ConsensusError::NoEligibleValidators);
    }
    let eligible_count = config.eligible.len() as u64;

    let mut base_round: Option<(Vec<TicketEntry>, Vec<AccountId>)> = None;
    for nonce in 0..MAX_ELECTION_ATTEMPTS {
        let input = attempt_input(base_input, nonce);
        let mut tickets = Vec::with_capacity(config.eligible.len());
        let mut invalid = Vec::new();
        let mut committee = Vec::new();
        for account in &config.eligible {
            let (pk, ticket) = draw(account, &input);
            if !vrf_verify(&pk, &input, &ticket) {
                invalid.push(*account);
                continue;
            }
            if election_rule(ticket.r, eligible_count, config.target_size) {
                committee.push(*account);
            }
            tickets.push(TicketEntry {
                account: *account,
                pk,
                ticket,
            });
        }
        if nonce == 0 {
            base_round = Some((tickets.clone(), invalid.clone()));
        }
        if !committee.is_empty() {
            committee.sort();
            return Ok(ElectionRecord {
                base_input: base_input.to_vec(),
                nonce,
                fallback: false,
                eligible_count: config.eligible.len() as u32,
                target_size: config.target_size,
                tickets,
                committee,
                invalid,
            });
        }
    }

    // fallback: lowest ticket values from the base input fill the seats
    let (tickets, invalid) = base_round.expect("at least one attempt ran");
    let mut ranked: Vec<&TicketEntry> = tickets.iter().collect();
    ranked.sort_by(|a, b| a.ticket.r.cmp(&b.ticket.r).then(a.account.cmp(&b.account)));
    let mut committee: Vec<AccountId> = ranked
        .iter()
        .take(config.target_size as usize)
        .map(|t| t.account)
        .collect();
    if committee.is_empty() {
        // every ticket was invalid
        return Err(ConsensusError::NoEligibleValidators);
    }
    committee.sort();
    Ok(ElectionRecord {
        base_input: base_input.to_vec(),
        nonce: 0,
        fallback: true,
        eligible_count: config.eligible.len() as u32,
        target_size: config.target_size,
        tickets,
        committee,
        invalid,
    })
}

/// Median consensus outcome for one (worker, model, epoch).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusOutcome {
    pub epoch: u64,
    pub committee: Vec<AccountId>,
    pub submitted: Vec<(AccountId, QualityScore)>,
    /// Stakes at consensus time, the basis for slash amounts.
    pub stakes: Vec<(AccountId, TokenAmount)>,
    pub median: QualityScore,
    pub slashed: Vec<(AccountId, TokenAmount)>,
    /// Committee members that never submitted, slashed as deviants.
    pub non_submitters: Vec<AccountId>,
}

/// Median of sorted scores; an even count takes the half-down mean of the
/// central pair.
pub fn median_score(sorted: &[QualityScore]) -> QualityScore {
    debug_assert!(!sorted.is_empty());
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        sorted[m / 2 - 1].midpoint(sorted[m / 2])
    }
}

/// Run score consensus: sort submissions, take the median, and mark for
/// slashing every submitter deviating from it by strictly more than the
/// threshold plus every committee member that withheld its score. Slash
/// amounts are `floor(slash_rate * stake)` against the supplied stakes; the
/// ledger applies them.
pub fn consensus_on_score(
    epoch: u64,
    committee: &[AccountId],
    submitted: &[(AccountId, QualityScore)],
    stakes: &[(AccountId, TokenAmount)],
    config: &CommitteeConfig,
) -> Result<ConsensusOutcome, ConsensusError> {
    if submitted.is_empty() {
        return Err(ConsensusError::EmptySubmissions);
    }
    for (account, _) in submitted {
        if !committee.contains(account) {
            return Err(ConsensusError::UnknownSubmitter(*account));
        }
    }

    let mut scores: Vec<QualityScore> = submitted.iter().map(|(_, s)| *s).collect();
    scores.sort();
    let median = median_score(&scores);

    let stake_of = |account: &AccountId| {
        stakes
            .iter()
            .find(|(id, _)| id == account)
            .map(|(_, s)| *s)
            .unwrap_or(TokenAmount::ZERO)
    };
    let gamma = config.slash_rate;
    let slash_amount = |stake: TokenAmount| {
        stake
            .mul_div_floor(gamma.num as u128, gamma.den as u128)
            .expect("slash fits in u64")
    };

    let mut slashed = Vec::new();
    for (account, score) in submitted {
        if score.abs_diff(median) > config.threshold {
            slashed.push((*account, slash_amount(stake_of(account))));
        }
    }
    let mut non_submitters = Vec::new();
    for member in committee {
        if !submitted.iter().any(|(id, _)| id == member) {
            non_submitters.push(*member);
            slashed.push((*member, slash_amount(stake_of(member))));
        }
    }
    slashed.sort_by_key(|(account, _)| *account);

    let mut sorted_submissions = submitted.to_vec();
    sorted_submissions.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));

    Ok(ConsensusOutcome {
        epoch,
        committee: committee.to_vec(),
        submitted: sorted_submissions,
        stakes: stakes.to_vec(),
        median,
        slashed,
        non_submitters,
    })
}
