//! Trustless inference quality evaluation: judge interfaces, the shipped
//! reference-oracle and calibrated stochastic judges, and the per-epoch
//! score accumulator that blends the cheap per-task cross score with one
//! heavyweight sampled verdict.

mod score;

pub use score::{QualityScore, SCORE_SCALE};

use crate::amount::{round_half_down, Ratio};
use crate::inference::TokenSequence;
use crate::rng::DetRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TiqeError {
    #[error("verdict kind {actual:?} does not match expected {expected:?}")]
    WrongKind { expected: JudgeKind, actual: JudgeKind },
    #[error("response and reference must be non-empty")]
    LengthMismatch,
    #[error("no verdicts recorded for this epoch")]
    NoData,
    #[error("heavyweight sample already recorded for this epoch")]
    AlreadySampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeKind {
    CrossEncoder,
    LlmJudge,
}

/// A single judge's score for one task. LLM verdicts carry the raw 1-5
/// rubric score; `score` is always its normalized [0, 1] form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub score: QualityScore,
    pub judge_kind: JudgeKind,
    pub raw: Option<u8>,
}

/// Everything a judge may look at for one task. `reference` is the honest
/// model's output for the same prompt; `degraded` is the ground-truth label
/// consumed only by the calibrated stochastic judges.
#[derive(Debug, Clone, Copy)]
pub struct EvalSample<'a> {
    pub prompt: &'a TokenSequence,
    pub response: &'a TokenSequence,
    pub reference: &'a TokenSequence,
    pub degraded: bool,
}

/// Adapter seam for scorers. The four shipped implementations are
/// [`ReferenceCrossJudge`], [`ReferenceLlmJudge`], [`StochasticCrossJudge`],
/// and [`StochasticLlmJudge`]; external scorers plug in behind this trait.
pub trait Judge {
    fn kind(&self) -> JudgeKind;
    fn evaluate(&self, sample: &EvalSample<'_>, rng: &mut DetRng)
        -> Result<JudgeVerdict, TiqeError>;
}

/// Match fraction between response and reference. Compared over the shorter
/// length with a proportional penalty for the missing tail, which reduces to
/// `matches / max_len`; short outputs can never outscore full-length ones.
fn reference_match_fraction(
    response: &TokenSequence,
    reference: &TokenSequence,
) -> Result<(u64, u64), TiqeError> {
    if response.is_empty() || reference.is_empty() {
        return Err(TiqeError::LengthMismatch);
    }
    let matches = response
        .tokens()
        .iter()
        .zip(reference.tokens())
        .filter(|(a, b)| a == b)
        .count() as u64;
    let max_len = response.len().max(reference.len()) as u64;
    Ok((matches, max_len))
}

/// Lightweight per-task scorer: similarity of the response to the honest
/// reference output, as a token-match fraction in [0, 1].
pub fn judge_cross(
    prompt: &TokenSequence,
    response: &TokenSequence,
    reference: &TokenSequence,
) -> Result<JudgeVerdict, TiqeError> {
    let _ = prompt;
    let (matches, max_len) = reference_match_fraction(response, reference)?;
    Ok(JudgeVerdict {
        score: QualityScore::from_fraction(matches, max_len),
        judge_kind: JudgeKind::CrossEncoder,
        raw: None,
    })
}

/// Heavyweight scorer mock: maps the reference match fraction m onto the
/// 1-5 rubric via `raw = 1 + round(4m)` and normalizes to `(raw - 1) / 4`.
pub fn judge_llm(
    prompt: &TokenSequence,
    response: &TokenSequence,
    reference: &TokenSequence,
) -> Result<JudgeVerdict, TiqeError> {
    let _ = prompt;
    let (matches, max_len) = reference_match_fraction(response, reference)?;
    let raw = 1 + round_half_down(4 * matches as u128, max_len as u128) as u8;
    Ok(JudgeVerdict {
        score: QualityScore::from_fraction((raw - 1) as u64, 4),
        judge_kind: JudgeKind::LlmJudge,
        raw: Some(raw),
    })
}

/// Calibrated binary detector: a degraded sample is flagged (score 0) with
/// probability `tp`, an honest one with probability `fp`; otherwise score 1.
pub fn judge_stochastic(
    kind: JudgeKind,
    is_degraded: bool,
    tp: QualityScore,
    fp: QualityScore,
    rng: &mut DetRng,
) -> JudgeVerdict {
    let flag_prob = if is_degraded { tp } else { fp };
    let flagged = rng.chance(flag_prob.raw(), SCORE_SCALE);
    let (score, raw) = if flagged {
        (QualityScore::ZERO, 1)
    } else {
        (QualityScore::ONE, 5)
    };
    JudgeVerdict {
        score,
        judge_kind: kind,
        raw: matches!(kind, JudgeKind::LlmJudge).then_some(raw),
    }
}

pub struct ReferenceCrossJudge;

impl Judge for ReferenceCrossJudge {
    fn kind(&self) -> JudgeKind {
        JudgeKind::CrossEncoder
    }

    fn evaluate(
        &self,
        sample: &EvalSample<'_>,
        _rng: &mut DetRng,
    ) -> Result<JudgeVerdict, TiqeError> {
        judge_cross(sample.prompt, sample.response, sample.reference)
    }
}

pub struct ReferenceLlmJudge;

impl Judge for ReferenceLlmJudge {
    fn kind(&self) -> JudgeKind {
        JudgeKind::LlmJudge
    }

    fn evaluate(
        &self,
        sample: &EvalSample<'_>,
        _rng: &mut DetRng,
    ) -> Result<JudgeVerdict, TiqeError> {
        judge_llm(sample.prompt, sample.response, sample.reference)
    }
}

/// Detector calibrated to the measured cross-encoder confusion matrix
/// (defaults: TP 0.66, FP 0.02).
pub struct StochasticCrossJudge {
    pub tp: QualityScore,
    pub fp: QualityScore,
}

impl Default for StochasticCrossJudge {
    fn default() -> Self {
        Self {
            tp: QualityScore::from_fraction(66, 100),
            fp: QualityScore::from_fraction(2, 100),
        }
    }
}

impl Judge for StochasticCrossJudge {
    fn kind(&self) -> JudgeKind {
        JudgeKind::CrossEncoder
    }

    fn evaluate(
        &self,
        sample: &EvalSample<'_>,
        rng: &mut DetRng,
    ) -> Result<JudgeVerdict, TiqeError> {
        Ok(judge_stochastic(
            JudgeKind::CrossEncoder,
            sample.degraded,
            self.tp,
            self.fp,
            rng,
        ))
    }
}

/// Detector calibrated to the measured LLM-judge confusion matrix
/// (defaults: TP 0.98, FP 0.12).
pub struct StochasticLlmJudge {
    pub tp: QualityScore,
    pub fp: QualityScore,
}

impl Default for StochasticLlmJudge {
    fn default() -> Self {
        Self {
            tp: QualityScore::from_fraction(98, 100),
            fp: QualityScore::from_fraction(12, 100),
        }
    }
}

impl Judge for StochasticLlmJudge {
    fn kind(&self) -> JudgeKind {
        JudgeKind::LlmJudge
    }

    fn evaluate(
        &self,
        sample: &EvalSample<'_>,
        rng: &mut DetRng,
    ) -> Result<JudgeVerdict, TiqeError> {
        Ok(judge_stochastic(
            JudgeKind::LlmJudge,
            sample.degraded,
            self.tp,
            self.fp,
            rng,
        ))
    }
}

/// Per-epoch score state for one (validator, worker, model) triple: a running
/// mean over every task's cross verdict plus at most one heavyweight sample.
#[derive(Debug, Clone)]
pub struct EpochScoreAccumulator {
    cross_sum: u128,
    cross_count: u64,
    llm_sample: Option<JudgeVerdict>,
    lambda: Ratio,
}

impl EpochScoreAccumulator {
    pub fn new(lambda: Ratio) -> Self {
        debug_assert!(lambda.is_fraction());
        Self {
            cross_sum: 0,
            cross_count: 0,
            llm_sample: None,
            lambda,
        }
    }

    pub fn cross_count(&self) -> u64 {
        self.cross_count
    }

    pub fn has_data(&self) -> bool {
        self.cross_count > 0 || self.llm_sample.is_some()
    }

    /// Fold cross-encoder verdicts into the epoch mean.
    pub fn accumulate_cross(&mut self, verdicts: &[JudgeVerdict]) -> Result<(), TiqeError> {
        for v in verdicts {
            if v.judge_kind != JudgeKind::CrossEncoder {
                return Err(TiqeError::WrongKind {
                    expected: JudgeKind::CrossEncoder,
                    actual: v.judge_kind,
                });
            }
        }
        for v in verdicts {
            self.cross_sum += v.score.raw() as u128;
            self.cross_count += 1;
        }
        Ok(())
    }

    /// Record the epoch's single heavyweight verdict.
    pub fn record_llm(&mut self, verdict: JudgeVerdict) -> Result<(), TiqeError> {
        if verdict.judge_kind != JudgeKind::LlmJudge {
            return Err(TiqeError::WrongKind {
                expected: JudgeKind::LlmJudge,
                actual: verdict.judge_kind,
            });
        }
        if self.llm_sample.is_some() {
            return Err(TiqeError::AlreadySampled);
        }
        self.llm_sample = Some(verdict);
        Ok(())
    }

    /// Mean cross score over every task seen this epoch.
    pub fn cross_score(&self) -> Result<QualityScore, TiqeError> {
        if self.cross_count == 0 {
            return Err(TiqeError::NoData);
        }
        Ok(QualityScore::from_raw(round_half_down(
            self.cross_sum,
            self.cross_count as u128,
        ) as u64))
    }

    pub fn llm_score(&self) -> Option<QualityScore> {
        self.llm_sample.map(|v| v.score)
    }

    /// Final epoch score: `lambda * llm + (1 - lambda) * cross`, degrading to
    /// whichever component exists when the other is absent.
    pub fn finalize(&self) -> Result<QualityScore, TiqeError> {
        match (self.cross_count > 0, self.llm_sample) {
            (true, Some(llm)) => Ok(llm.score.blend(self.lambda, self.cross_score()?)),
            (true, None) => self.cross_score(),
            (false, Some(llm)) => Ok(llm.score),
            (false, None) => Err(TiqeError::NoData),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::TokenSequence;
    use proptest::prelude::*;

    fn seq(tokens: &[u16]) -> TokenSequence {
        TokenSequence::new(tokens.to_vec()).unwrap()
    }

    fn cross(num: u64, den: u64) -> JudgeVerdict {
        JudgeVerdict {
            score: QualityScore::from_fraction(num, den),
            judge_kind: JudgeKind::CrossEncoder,
            raw: None,
        }
    }

    #[test]
    fn identical_response_scores_one() {
        let p = seq(&[1, 2]);
        let r = seq(&[10, 20, 30]);
        let v = judge_cross(&p, &r, &r).unwrap();
        assert_eq!(v.score, QualityScore::ONE);
        assert_eq!(v.judge_kind, JudgeKind::CrossEncoder);
    }

    #[test]
    fn short_response_is_penalized_proportionally() {
        let p = seq(&[1]);
        let reference = seq(&[7, 7, 7, 7]);
        let response = seq(&[7, 7]); // 2 matches over max len 4
        let v = judge_cross(&p, &response, &reference).unwrap();
        assert_eq!(v.score, QualityScore::from_fraction(2, 4));
    }

    #[test]
    fn zero_length_inputs_error() {
        let p = seq(&[1]);
        let empty = seq(&[]);
        let full = seq(&[1, 2]);
        assert_eq!(judge_cross(&p, &empty, &full), Err(TiqeError::LengthMismatch));
        assert_eq!(judge_llm(&p, &full, &empty), Err(TiqeError::LengthMismatch));
    }

    #[test]
    fn degraded_responses_score_near_zero_and_half() {
        // Monte Carlo over 1000 prompts against the reference-oracle judge:
        // full degradation scores ~1/65536, half degradation ~0.5 + 0.5/65536
        use crate::amount::TokenAmount;
        use crate::inference::{infer_degraded, infer_single, ModelDescriptor, ModelId};
        use crate::rng::DetRng;
        let model = ModelDescriptor {
            model_id: ModelId("judge-mc".into()),
            scale_factor: Ratio::ONE,
            n_shards: 1,
            seed: 0x7e57,
            usage_fee: TokenAmount::ZERO,
        };
        let mut rng = DetRng::new(0x3c0);
        let mut sum_full = 0u64;
        let mut sum_half = 0u64;
        let trials = 1000;
        for _ in 0..trials {
            let len = rng.range_inclusive(1, 16) as usize;
            let prompt =
                TokenSequence::new((0..len).map(|_| rng.token()).collect()).unwrap();
            let reference = infer_single(&model, &prompt, 32).unwrap();
            let full = infer_degraded(&model, &prompt, 32, 1.0).unwrap();
            let half = infer_degraded(&model, &prompt, 32, 0.5).unwrap();
            sum_full += judge_cross(&prompt, &full, &reference).unwrap().score.raw();
            sum_half += judge_cross(&prompt, &half, &reference).unwrap().score.raw();
        }
        let mean_full = sum_full as f64 / trials as f64 / SCORE_SCALE as f64;
        let mean_half = sum_half as f64 / trials as f64 / SCORE_SCALE as f64;
        assert!(mean_full < 0.01, "full-degradation mean score {mean_full}");
        let expected = 0.5 + 0.5 / 65536.0;
        // 3-sigma over 32000 token comparisons
        let sigma = (expected * (1.0 - expected) / (trials as f64 * 32.0)).sqrt();
        assert!(
            (mean_half - expected).abs() < 3.0 * sigma,
            "half-degradation mean {mean_half} vs {expected}"
        );
    }

    #[test]
    fn rubric_mapping() {
        let p = seq(&[1]);
        let reference = seq(&[1, 2, 3, 4]);
        // m = 1 -> raw 5, score 1
        let v = judge_llm(&p, &reference, &reference).unwrap();
        assert_eq!((v.raw, v.score), (Some(5), QualityScore::ONE));
        // m = 0 -> raw 1, score 0
        let v = judge_llm(&p, &seq(&[9, 9, 9, 9]), &reference).unwrap();
        assert_eq!((v.raw, v.score), (Some(1), QualityScore::ZERO));
        // m = 0.5 -> raw 3, score 0.5
        let v = judge_llm(&p, &seq(&[1, 2, 9, 9]), &reference).unwrap();
        assert_eq!((v.raw, v.score), (Some(3), QualityScore::from_fraction(1, 2)));
    }

    #[test]
    fn rubric_is_bijective_on_quarter_steps() {
        for (raw, frac) in [(1u8, 0u64), (2, 25), (3, 50), (4, 75), (5, 100)] {
            let score = QualityScore::from_fraction((raw - 1) as u64, 4);
            assert_eq!(score, QualityScore::from_fraction(frac, 100));
        }
    }

    #[test]
    fn accumulator_means_over_tasks() {
        let lambda = Ratio::new(7, 10).unwrap();
        let mut acc = EpochScoreAccumulator::new(lambda);
        acc.accumulate_cross(&[cross(1, 1), cross(0, 1)]).unwrap();
        assert_eq!(acc.cross_score().unwrap(), QualityScore::from_fraction(1, 2));

        // three batches of scores {1,1}, {0,1}, {1,0} -> mean 4/6
        let mut acc = EpochScoreAccumulator::new(lambda);
        acc.accumulate_cross(&[cross(1, 1), cross(1, 1)]).unwrap();
        acc.accumulate_cross(&[cross(0, 1), cross(1, 1)]).unwrap();
        acc.accumulate_cross(&[cross(1, 1), cross(0, 1)]).unwrap();
        assert_eq!(acc.cross_score().unwrap(), QualityScore::from_fraction(4, 6));
    }

    #[test]
    fn empty_epoch_reports_no_data() {
        let acc = EpochScoreAccumulator::new(Ratio::new(7, 10).unwrap());
        assert!(!acc.has_data());
        assert_eq!(acc.cross_score(), Err(TiqeError::NoData));
        assert_eq!(acc.finalize(), Err(TiqeError::NoData));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let mut acc = EpochScoreAccumulator::new(Ratio::new(7, 10).unwrap());
        let llm = JudgeVerdict {
            score: QualityScore::ONE,
            judge_kind: JudgeKind::LlmJudge,
            raw: Some(5),
        };
        assert!(matches!(
            acc.accumulate_cross(&[llm]),
            Err(TiqeError::WrongKind { .. })
        ));
        assert!(matches!(
            acc.record_llm(cross(1, 1)),
            Err(TiqeError::WrongKind { .. })
        ));
        acc.record_llm(llm).unwrap();
        assert_eq!(acc.record_llm(llm), Err(TiqeError::AlreadySampled));
    }

    #[test]
    fn finalize_blends_and_falls_back() {
        let lambda = Ratio::new(7, 10).unwrap();
        let llm = JudgeVerdict {
            score: QualityScore::ONE,
            judge_kind: JudgeKind::LlmJudge,
            raw: Some(5),
        };

        // lambda = 0.7, llm = 1.0, cross = 0.5 -> 0.85
        let mut acc = EpochScoreAccumulator::new(lambda);
        acc.accumulate_cross(&[cross(1, 2)]).unwrap();
        acc.record_llm(llm).unwrap();
        assert_eq!(acc.finalize().unwrap().raw(), 85_000_000);

        // lambda boundaries
        let mut acc = EpochScoreAccumulator::new(Ratio::ZERO);
        acc.accumulate_cross(&[cross(1, 2)]).unwrap();
        acc.record_llm(llm).unwrap();
        assert_eq!(acc.finalize().unwrap(), QualityScore::from_fraction(1, 2));

        let mut acc = EpochScoreAccumulator::new(Ratio::ONE);
        acc.accumulate_cross(&[cross(1, 2)]).unwrap();
        acc.record_llm(llm).unwrap();
        assert_eq!(acc.finalize().unwrap(), QualityScore::ONE);

        // no llm sample -> cross only
        let mut acc = EpochScoreAccumulator::new(lambda);
        acc.accumulate_cross(&[cross(1, 2)]).unwrap();
        assert_eq!(acc.finalize().unwrap(), QualityScore::from_fraction(1, 2));
    }

    #[test]
    fn stochastic_judges_track_configured_rates() {
        let mut rng = DetRng::new(0xfeed);
        let judge = StochasticCrossJudge::default();
        let p = seq(&[1]);
        let r = seq(&[2]);
        let mut degraded_flags = 0u64;
        let mut honest_flags = 0u64;
        let n = 2000u64;
        for _ in 0..n {
            let sample = EvalSample { prompt: &p, response: &r, reference: &r, degraded: true };
            if judge.evaluate(&sample, &mut rng).unwrap().score == QualityScore::ZERO {
                degraded_flags += 1;
            }
            let sample = EvalSample { prompt: &p, response: &r, reference: &r, degraded: false };
            if judge.evaluate(&sample, &mut rng).unwrap().score == QualityScore::ZERO {
                honest_flags += 1;
            }
        }
        let tp_rate = degraded_flags as f64 / n as f64;
        let fp_rate = honest_flags as f64 / n as f64;
        assert!((tp_rate - 0.66).abs() < 0.03, "tp rate {tp_rate}");
        assert!((fp_rate - 0.02).abs() < 0.01, "fp rate {fp_rate}");
    }

    #[test]
    fn stochastic_boundary_rates() {
        let mut rng = DetRng::new(1);
        let judge = StochasticCrossJudge {
            tp: QualityScore::ONE,
            fp: QualityScore::ZERO,
        };
        let p = seq(&[1]);
        for _ in 0..200 {
            let sample = EvalSample { prompt: &p, response: &p, reference: &p, degraded: true };
            assert_eq!(judge.evaluate(&sample, &mut rng).unwrap().score, QualityScore::ZERO);
            let sample = EvalSample { prompt: &p, response: &p, reference: &p, degraded: false };
            assert_eq!(judge.evaluate(&sample, &mut rng).unwrap().score, QualityScore::ONE);
        }
    }

    proptest! {
        // final score is a convex combination of its components
        #[test]
        fn finalize_stays_between_components(
            cross_raws in prop::collection::vec(0u64..=SCORE_SCALE, 1..20),
            llm_raw in 0u64..=SCORE_SCALE,
            lambda_num in 0u64..=10,
        ) {
            let lambda = Ratio::new(lambda_num, 10).unwrap();
            let mut acc = EpochScoreAccumulator::new(lambda);
            let verdicts: Vec<_> = cross_raws
                .iter()
                .map(|&r| JudgeVerdict {
                    score: QualityScore::from_raw(r),
                    judge_kind: JudgeKind::CrossEncoder,
                    raw: None,
                })
                .collect();
            acc.accumulate_cross(&verdicts).unwrap();
            acc.record_llm(JudgeVerdict {
                score: QualityScore::from_raw(llm_raw),
                judge_kind: JudgeKind::LlmJudge,
                raw: Some(1),
            })
            .unwrap();
            let cross = acc.cross_score().unwrap();
            let llm = acc.llm_score().unwrap();
            let fin = acc.finalize().unwrap();
            prop_assert!(fin >= cross.min(llm));
            prop_assert!(fin <= cross.max(llm));
        }
    }
}
