//! Synthetic ASR-side observations: a token-level error injector that builds
//! word confusion networks, the five scalar features derived from them, and
//! the error-case analyzer comparing rejection decisions with and without
//! those features.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlugateError};
use crate::reject::{Decision, DecisionRecord};

/// The empty-token arc in a confusion-network slot.
pub const EPS: &str = "<eps>";

/// One arc of a confusion-network slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfArc {
    /// Token string, or `"<eps>"` for the empty arc.
    pub tok: String,
    pub conf: f64,
    pub post: f64,
}

impl ConfArc {
    pub fn is_eps(&self) -> bool {
        self.tok == EPS
    }
}

/// ASR-side observation of an utterance: the decoded 1-best token sequence,
/// the confusion network it was read off, and decoder effort statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrObservation {
    pub onebest: Vec<String>,
    /// One slot per confusion-network position; each slot holds alternative
    /// arcs. The 1-best path takes the highest-posterior arc of every slot.
    pub confnet: Vec<Vec<ConfArc>>,
    pub frames: usize,
    /// Arcs explored at each frame; length equals `frames`.
    pub arcs: Vec<usize>,
}

impl AsrObservation {
    /// Highest-posterior arc of each slot, ties broken by slot order.
    pub fn onebest_path(&self) -> Vec<&ConfArc> {
        self.confnet
            .iter()
            .map(|slot| {
                slot.iter()
                    .max_by(|a, b| a.post.total_cmp(&b.post))
                    .expect("confusion-network slots are non-empty")
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(SlugateError::validation("asr.frames", "must be positive"));
        }
        if self.arcs.len() != self.frames {
            return Err(SlugateError::validation(
                "asr.arcs",
                format!("length {} does not match frames {}", self.arcs.len(), self.frames),
            ));
        }
        if self.arcs.iter().any(|&a| a == 0) {
            return Err(SlugateError::validation("asr.arcs", "arc counts must be positive"));
        }
        for (i, slot) in self.confnet.iter().enumerate() {
            if slot.is_empty() {
                return Err(SlugateError::validation(
                    "asr.confnet",
                    format!("slot {i} is empty"),
                ));
            }
            let post_sum: f64 = slot.iter().map(|a| a.post).sum();
            if post_sum > 1.0 + 1e-6 {
                return Err(SlugateError::validation(
                    "asr.confnet",
                    format!("slot {i} posteriors sum to {post_sum} > 1"),
                ));
            }
            for arc in slot {
                if !(arc.conf > 0.0 && arc.conf <= 1.0 && arc.post > 0.0 && arc.post <= 1.0) {
                    return Err(SlugateError::validation(
                        "asr.confnet",
                        format!("slot {i} has arc scores outside (0,1]"),
                    ));
                }
            }
        }
        let expected: Vec<String> = self
            .onebest_path()
            .iter()
            .filter(|a| !a.is_eps())
            .map(|a| a.tok.clone())
            .collect();
        if expected != self.onebest {
            return Err(SlugateError::validation(
                "asr.onebest",
                "onebest does not equal the argmax-posterior path with eps removed",
            ));
        }
        Ok(())
    }
}

/// Per-token corruption probabilities.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CorruptionRates {
    pub sub: f64,
    pub ins: f64,
    pub del: f64,
}

impl CorruptionRates {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("sub", self.sub), ("ins", self.ins), ("del", self.del)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SlugateError::validation(
                    format!("asr.rates.{name}"),
                    format!("must lie in [0,1], got {value}"),
                ));
            }
        }
        if self.sub + self.del > 1.0 {
            return Err(SlugateError::validation(
                "asr.rates",
                format!("sub + del must not exceed 1, got {}", self.sub + self.del),
            ));
        }
        Ok(())
    }
}

const FILLERS: &[&str] = &["he", "a", "the", "uh", "to", "on", "it"];
const FRAMES_PER_TOKEN: (u32, u32) = (24, 36);

/// Misspell a token: drop a character, replace one, or transpose neighbours.
fn typo(token: &str, rng: &mut ChaCha8Rng) -> String {
    let chars: Vec<char> = token.chars().collect();
    let mut out = chars.clone();
    match rng.gen_range(0..3u8) {
        0 if chars.len() >= 3 => {
            out.remove(rng.gen_range(0..chars.len()));
        }
        1 if chars.len() >= 2 => {
            let i = rng.gen_range(0..chars.len() - 1);
            out.swap(i, i + 1);
        }
        _ => {
            let i = rng.gen_range(0..chars.len());
            let replacement = (b'a' + rng.gen_range(0..26u8)) as char;
            out[i] = replacement;
        }
    }
    let candidate: String = out.into_iter().collect();
    if candidate == token {
        format!("{token}s")
    } else {
        candidate
    }
}

fn clean_slot(token: &str, rng: &mut ChaCha8Rng) -> Vec<ConfArc> {
    let post = rng.gen_range(0.85..0.98);
    let conf = rng.gen_range(0.90..0.99);
    let alt_post = (1.0 - post) * rng.gen_range(0.3..0.9);
    vec![
        ConfArc { tok: token.to_string(), conf, post },
        ConfArc { tok: EPS.to_string(), conf: rng.gen_range(0.05..0.3), post: alt_post.max(1e-4) },
    ]
}

fn substituted_slot(original: &str, rng: &mut ChaCha8Rng) -> Vec<ConfArc> {
    let wrong = typo(original, rng);
    let post = rng.gen_range(0.40..0.70);
    let conf = rng.gen_range(0.25..0.65);
    let orig_post = (1.0 - post) * rng.gen_range(0.5..0.95);
    vec![
        ConfArc { tok: wrong, conf, post },
        ConfArc {
            tok: original.to_string(),
            conf: rng.gen_range(0.2..0.6),
            post: orig_post.max(1e-4),
        },
    ]
}

fn deleted_slot(original: &str, rng: &mut ChaCha8Rng) -> Vec<ConfArc> {
    let post = rng.gen_range(0.50..0.75);
    let conf = rng.gen_range(0.40..0.80);
    let orig_post = (1.0 - post) * rng.gen_range(0.4..0.9);
    vec![
        ConfArc { tok: EPS.to_string(), conf, post },
        ConfArc {
            tok: original.to_string(),
            conf: rng.gen_range(0.2..0.6),
            post: orig_post.max(1e-4),
        },
    ]
}

fn inserted_slot(previous: Option<&str>, rng: &mut ChaCha8Rng) -> Vec<ConfArc> {
    let word = if rng.gen_bool(0.5) {
        previous.unwrap_or(FILLERS[0]).to_string()
    } else {
        FILLERS[rng.gen_range(0..FILLERS.len())].to_string()
    };
    let post = rng.gen_range(0.40..0.70);
    let conf = rng.gen_range(0.30..0.60);
    let eps_post = (1.0 - post) * rng.gen_range(0.5..0.95);
    vec![
        ConfArc { tok: word, conf, post },
        ConfArc { tok: EPS.to_string(), conf: rng.gen_range(0.2..0.6), post: eps_post.max(1e-4) },
    ]
}

/// Corrupt a token sequence into a synthetic ASR observation.
///
/// Substitutions and deletions are drawn independently per token, insertions
/// at each gap. Corrupted slots carry visibly lower confidences and the
/// decoder statistics (frames, arcs explored) inflate with the corruption
/// level, so the extracted features carry real signal about ASR errors.
pub fn corrupt(tokens: &[String], rates: CorruptionRates, seed: u64) -> Result<AsrObservation> {
    rates.validate()?;
    if tokens.is_empty() {
        return Err(SlugateError::validation("tokens", "cannot corrupt an empty utterance"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut confnet: Vec<Vec<ConfArc>> = Vec::new();
    let mut onebest: Vec<String> = Vec::new();
    let mut corrupted_slots = 0usize;

    for (i, token) in tokens.iter().enumerate() {
        if rates.ins > 0.0 && rng.gen_bool(rates.ins) {
            let slot = inserted_slot(onebest.last().map(String::as_str), &mut rng);
            onebest.push(slot[0].tok.clone());
            confnet.push(slot);
            corrupted_slots += 1;
        }
        let draw: f64 = rng.gen();
        let is_last = i + 1 == tokens.len();
        // never let the whole 1-best collapse to eps
        let force_keep = is_last && onebest.is_empty();
        if draw < rates.sub || (force_keep && draw < rates.sub + rates.del) {
            let slot = substituted_slot(token, &mut rng);
            onebest.push(slot[0].tok.clone());
            confnet.push(slot);
            corrupted_slots += 1;
        } else if draw < rates.sub + rates.del {
            confnet.push(deleted_slot(token, &mut rng));
            corrupted_slots += 1;
        } else {
            let slot = clean_slot(token, &mut rng);
            onebest.push(slot[0].tok.clone());
            confnet.push(slot);
        }
    }
    if rates.ins > 0.0 && rng.gen_bool(rates.ins) {
        let slot = inserted_slot(onebest.last().map(String::as_str), &mut rng);
        onebest.push(slot[0].tok.clone());
        confnet.push(slot);
        corrupted_slots += 1;
    }

    let frames: usize = confnet
        .iter()
        .map(|_| rng.gen_range(FRAMES_PER_TOKEN.0..=FRAMES_PER_TOKEN.1) as usize)
        .sum();
    let corrupted_fraction = corrupted_slots as f64 / confnet.len() as f64;
    let extra = (6.0 * corrupted_fraction).round() as usize;
    let arcs: Vec<usize> = (0..frames).map(|_| rng.gen_range(2..=3 + extra)).collect();

    let obs = AsrObservation { onebest, confnet, frames, arcs };
    debug_assert!(obs.validate().is_ok());
    Ok(obs)
}

/// The five scalar features read off a confusion network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsrFeatures {
    /// Product of confidence scores over the 1-best path, eps arcs included.
    pub conf_product: f64,
    /// Product of posteriors over the 1-best path, eps arcs included.
    pub post_product: f64,
    /// ln(number of frames).
    pub log_frames: f64,
    /// ln(word count of the 1-best hypothesis), eps arcs excluded.
    pub log_words: f64,
    /// ln(mean arcs explored per frame).
    pub log_mean_arcs: f64,
}

impl AsrFeatures {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.conf_product,
            self.post_product,
            self.log_frames,
            self.log_words,
            self.log_mean_arcs,
        ]
    }
}

/// Extract the five features from an observation.
pub fn extract_asr_features(obs: &AsrObservation) -> Result<AsrFeatures> {
    obs.validate()?;
    let path = obs.onebest_path();
    let conf_product = path.iter().map(|a| a.conf).product();
    let post_product = path.iter().map(|a| a.post).product();
    let words = path.iter().filter(|a| !a.is_eps()).count();
    if words == 0 {
        return Err(SlugateError::validation(
            "asr.onebest",
            "1-best path contains no words; log word count is undefined",
        ));
    }
    let mean_arcs = obs.arcs.iter().sum::<usize>() as f64 / obs.frames as f64;
    Ok(AsrFeatures {
        conf_product,
        post_product,
        log_frames: (obs.frames as f64).ln(),
        log_words: (words as f64).ln(),
        log_mean_arcs: mean_arcs.ln(),
    })
}

/// Project per-token gold tags from the clean transcript onto the 1-best.
///
/// Tokens are aligned by edit distance (match preferred over substitution,
/// then deletion, then insertion). A substituted position keeps the clean
/// token's tag, inserted tokens get `"O"`, deleted tokens drop their tag.
pub fn project_gold_tags(clean_tags: &[String], clean_tokens: &[String], onebest: &[String]) -> Vec<String> {
    assert_eq!(clean_tags.len(), clean_tokens.len());
    let n = clean_tokens.len();
    let m = onebest.len();
    let mut cost = vec![vec![0u32; m + 1]; n + 1];
    for i in 0..=n {
        cost[i][0] = i as u32;
    }
    for j in 0..=m {
        cost[0][j] = j as u32;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub_cost = if clean_tokens[i - 1] == onebest[j - 1] { 0 } else { 1 };
            cost[i][j] = (cost[i - 1][j - 1] + sub_cost)
                .min(cost[i - 1][j] + 1)
                .min(cost[i][j - 1] + 1);
        }
    }
    let mut tags = vec![String::from("O"); m];
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let sub_cost = if clean_tokens[i - 1] == onebest[j - 1] { 0 } else { 1 };
            if cost[i][j] == cost[i - 1][j - 1] + sub_cost {
                tags[j - 1] = clean_tags[i - 1].clone();
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && cost[i][j] == cost[i - 1][j] + 1 {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    tags
}

/// The four error cells of the taxonomy, defined by the decisions of the
/// model trained without ASR features:
/// A = clean transcript, correct hypothesis, rejected;
/// B = errorful transcript, correct hypothesis, rejected;
/// C = errorful transcript, incorrect hypothesis, accepted;
/// D = clean transcript, incorrect hypothesis, accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseLabel {
    A,
    B,
    C,
    D,
}

/// One paired decision falling into an error cell.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorCase {
    pub utterance_id: String,
    pub case: CaseLabel,
    pub asr_errorful: bool,
    pub hypothesis_correct: bool,
    pub decision_without: Decision,
    pub decision_with: Decision,
}

/// Aggregate view of the paired decisions.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CaseSummary {
    pub case_a: usize,
    pub case_b: usize,
    pub case_c: usize,
    pub case_d: usize,
    /// Size of the errorful-transcript + incorrect-hypothesis population.
    pub errorful_incorrect: usize,
    /// Correct rejections over that population, per configuration.
    pub errorful_incorrect_rejected_with: usize,
    pub errorful_incorrect_rejected_without: usize,
    /// Case-C instances the ASR-feature model flips to Reject.
    pub case_c_corrected: usize,
}

/// Pair per-utterance decisions made with and without ASR features and bin
/// the errors of the feature-less configuration into cases A-D.
pub fn classify_error_cases(
    without: &[DecisionRecord],
    with: &[DecisionRecord],
    errorful: &BTreeMap<String, bool>,
) -> Result<(Vec<ErrorCase>, CaseSummary)> {
    if without.len() != with.len() {
        return Err(SlugateError::IdMismatch {
            message: format!(
                "{} records without ASR features vs {} with",
                without.len(),
                with.len()
            ),
        });
    }
    let by_id: BTreeMap<&str, &DecisionRecord> =
        with.iter().map(|r| (r.utterance_id.as_str(), r)).collect();
    let mut cases = Vec::new();
    let mut summary = CaseSummary::default();
    for base in without {
        let paired = by_id.get(base.utterance_id.as_str()).ok_or_else(|| SlugateError::IdMismatch {
            message: format!("utterance {} has no paired record with ASR features", base.utterance_id),
        })?;
        if paired.hypothesis_correct != base.hypothesis_correct {
            return Err(SlugateError::IdMismatch {
                message: format!(
                    "utterance {} disagrees on hypothesis correctness between configurations",
                    base.utterance_id
                ),
            });
        }
        let is_errorful = *errorful.get(&base.utterance_id).ok_or_else(|| SlugateError::IdMismatch {
            message: format!("utterance {} has no transcript-error flag", base.utterance_id),
        })?;
        let correct = base.hypothesis_correct;

        if is_errorful && !correct {
            summary.errorful_incorrect += 1;
            if base.decision == Decision::Reject {
                summary.errorful_incorrect_rejected_without += 1;
            }
            if paired.decision == Decision::Reject {
                summary.errorful_incorrect_rejected_with += 1;
            }
        }

        let case = match (is_errorful, correct, base.decision) {
            (false, true, Decision::Reject) => Some(CaseLabel::A),
            (true, true, Decision::Reject) => Some(CaseLabel::B),
            (true, false, Decision::Accept) => Some(CaseLabel::C),
            (false, false, Decision::Accept) => Some(CaseLabel::D),
            _ => None,
        };
        if let Some(case) = case {
            match case {
                CaseLabel::A => summary.case_a += 1,
                CaseLabel::B => summary.case_b += 1,
                CaseLabel::C => {
                    summary.case_c += 1;
                    if paired.decision == Decision::Reject {
                        summary.case_c_corrected += 1;
                    }
                }
                CaseLabel::D => summary.case_d += 1,
            }
            cases.push(ErrorCase {
                utterance_id: base.utterance_id.clone(),
                case,
                asr_errorful: is_errorful,
                hypothesis_correct: correct,
                decision_without: base.decision,
                decision_with: paired.decision,
            });
        }
    }
    Ok((cases, summary))
}
