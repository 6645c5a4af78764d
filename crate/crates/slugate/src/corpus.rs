//! Synthetic corpus generation, persistence, and splitting.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::asr::AsrObservation;
use crate::catalog::{placeholder_label, CatalogSpec, DomainSpec};
use crate::error::{Result, SlugateError};

/// A labelled token span, `[start, end)` in token indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

/// Gold interpretation of an utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub domain: String,
    pub intent: String,
    pub slots: Vec<SlotSpan>,
}

impl Annotation {
    /// Per-token tag sequence ("O" outside every slot span).
    pub fn tags(&self, token_count: usize) -> Vec<String> {
        let mut tags = vec![String::from("O"); token_count];
        for span in &self.slots {
            for tag in tags.iter_mut().take(span.end).skip(span.start) {
                *tag = span.label.clone();
            }
        }
        tags
    }

    /// Convert a per-token tag sequence into spans (maximal runs of a label).
    pub fn spans_from_tags(tags: &[String]) -> Vec<SlotSpan> {
        let mut spans = Vec::new();
        let mut i = 0;
        while i < tags.len() {
            if tags[i] == "O" {
                i += 1;
                continue;
            }
            let start = i;
            let label = tags[i].clone();
            while i < tags.len() && tags[i] == label {
                i += 1;
            }
            spans.push(SlotSpan { start, end: i, label });
        }
        spans
    }
}

/// One utterance flowing through the pipeline. `tokens` is the human
/// transcript; `asr` carries decoder-side observations when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub tokens: Vec<String>,
    pub annotation: Annotation,
    pub asr: Option<AsrObservation>,
}

impl Utterance {
    /// The token sequence the SLU system decodes: the ASR 1-best if an
    /// observation is attached, the transcript otherwise.
    pub fn decoded_tokens(&self) -> &[String] {
        match &self.asr {
            Some(obs) => &obs.onebest,
            None => &self.tokens,
        }
    }

    /// Gold per-token tags on [`decoded_tokens`](Self::decoded_tokens),
    /// projected across ASR errors when an observation is attached.
    pub fn gold_tags(&self) -> Vec<String> {
        let clean_tags = self.annotation.tags(self.tokens.len());
        match &self.asr {
            Some(obs) if obs.onebest != self.tokens => {
                crate::asr::project_gold_tags(&clean_tags, &self.tokens, &obs.onebest)
            }
            _ => clean_tags,
        }
    }

    /// Whether the attached ASR observation differs from the transcript.
    pub fn asr_errorful(&self) -> bool {
        matches!(&self.asr, Some(obs) if obs.onebest != self.tokens)
    }
}

/// The four disjoint sections of a generated corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub slu_train: Vec<Utterance>,
    pub reject_train: Vec<Utterance>,
    pub dev: Vec<Utterance>,
    pub test: Vec<Utterance>,
}

/// Sample `n` utterances from the catalog grammar.
///
/// Each draw picks a domain by prior, an intent and template uniformly, and
/// fills slot placeholders from the lexicons. With probability
/// `catalog.confusability` one slot value is borrowed from another domain's
/// vocabulary while the annotation keeps the intended label, which is what
/// makes part of the corpus genuinely ambiguous.
pub fn generate_corpus(catalog: &CatalogSpec, n: usize) -> Result<Vec<Utterance>> {
    catalog.validate()?;
    if n == 0 {
        return Err(SlugateError::validation("n", "must generate at least one utterance"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(catalog.seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let domain = sample_domain(catalog, &mut rng);
        let intent = &domain.intents[rng.gen_range(0..domain.intents.len())];
        let templates = &domain.templates[intent];
        let template = &templates[rng.gen_range(0..templates.len())];
        let template_tokens = DomainSpec::template_tokens(template);

        let placeholder_positions: Vec<usize> = template_tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| placeholder_label(t).is_some())
            .map(|(p, _)| p)
            .collect();
        let borrow_position = if catalog.domains.len() > 1
            && !placeholder_positions.is_empty()
            && catalog.confusability > 0.0
            && rng.gen_bool(catalog.confusability)
        {
            Some(placeholder_positions[rng.gen_range(0..placeholder_positions.len())])
        } else {
            None
        };

        let mut tokens: Vec<String> = Vec::new();
        let mut slots: Vec<SlotSpan> = Vec::new();
        for (pos, raw) in template_tokens.iter().enumerate() {
            match placeholder_label(raw) {
                Some(label) => {
                    let value = if borrow_position == Some(pos) {
                        borrow_value(catalog, &domain.name, &mut rng)
                    } else {
                        let lexicon = &domain.lexicons[label];
                        lexicon[rng.gen_range(0..lexicon.len())].clone()
                    };
                    let start = tokens.len();
                    for word in value.split_whitespace() {
                        tokens.push(word.to_lowercase());
                    }
                    slots.push(SlotSpan { start, end: tokens.len(), label: label.to_string() });
                }
                None => tokens.push(raw.to_lowercase()),
            }
        }

        out.push(Utterance {
            id: format!("u{i:06}"),
            tokens,
            annotation: Annotation {
                domain: domain.name.clone(),
                intent: intent.clone(),
                slots,
            },
            asr: None,
        });
    }
    Ok(out)
}

fn sample_domain<'c>(catalog: &'c CatalogSpec, rng: &mut ChaCha8Rng) -> &'c DomainSpec {
    let draw: f64 = rng.gen();
    let mut acc = 0.0;
    for domain in &catalog.domains {
        acc += domain.prior;
        if draw < acc {
            return domain;
        }
    }
    catalog.domains.last().expect("catalog has at least one domain")
}

fn borrow_value(catalog: &CatalogSpec, own_domain: &str, rng: &mut ChaCha8Rng) -> String {
    let others: Vec<&DomainSpec> = catalog
        .domains
        .iter()
        .filter(|d| d.name != own_domain && !d.slot_labels.is_empty())
        .collect();
    if others.is_empty() {
        // nothing to borrow from; fall back to own vocabulary
        let own = catalog.domain(own_domain).expect("domain exists");
        let label = &own.slot_labels[rng.gen_range(0..own.slot_labels.len())];
        let lexicon = &own.lexicons[label];
        return lexicon[rng.gen_range(0..lexicon.len())].clone();
    }
    let other = others[rng.gen_range(0..others.len())];
    let label = &other.slot_labels[rng.gen_range(0..other.slot_labels.len())];
    let lexicon = &other.lexicons[label];
    lexicon[rng.gen_range(0..lexicon.len())].clone()
}

/// Shuffle deterministically and partition into the four sections.
pub fn split_dataset(data: &[Utterance], fractions: [f64; 4], seed: u64) -> Result<DatasetSplit> {
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(SlugateError::validation(
            "fractions",
            format!("must sum to 1 within 1e-9, got {sum}"),
        ));
    }
    if fractions.iter().any(|&f| f < 0.0) {
        return Err(SlugateError::validation("fractions", "must be non-negative"));
    }
    let mut shuffled: Vec<Utterance> = data.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let n = shuffled.len();
    let mut bounds = [0usize; 4];
    let mut cum = 0.0;
    for (i, f) in fractions.iter().enumerate() {
        cum += f;
        bounds[i] = (n as f64 * cum).round() as usize;
    }
    bounds[3] = n;
    let mut iter = shuffled.into_iter();
    let mut take = |count: usize| iter.by_ref().take(count).collect::<Vec<_>>();
    let slu_train = take(bounds[0]);
    let reject_train = take(bounds[1] - bounds[0]);
    let dev = take(bounds[2] - bounds[1]);
    let test = take(bounds[3] - bounds[2]);
    Ok(DatasetSplit { slu_train, reject_train, dev, test })
}

#[derive(Serialize, Deserialize)]
struct UtteranceLine {
    id: String,
    text: String,
    annotation: Annotation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    asr: Option<AsrObservation>,
}

/// Write a dataset as JSONL, one utterance per line.
pub fn save_dataset(data: &[Utterance], path: &Path) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    for u in data {
        let line = UtteranceLine {
            id: u.id.clone(),
            text: u.tokens.join(" "),
            annotation: u.annotation.clone(),
            asr: u.asr.clone(),
        };
        serde_json::to_writer(&mut writer, &line).map_err(|e| SlugateError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Load a JSONL dataset, reporting the line number of any malformed record.
pub fn load_dataset(path: &Path) -> Result<Vec<Utterance>> {
    if !path.exists() {
        return Err(SlugateError::MissingArtifact { path: path.to_path_buf() });
    }
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: UtteranceLine =
            serde_json::from_str(&line).map_err(|e| SlugateError::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: e.to_string(),
            })?;
        let tokens: Vec<String> = parsed.text.split_whitespace().map(str::to_string).collect();
        let utterance = Utterance {
            id: parsed.id,
            tokens,
            annotation: parsed.annotation,
            asr: parsed.asr,
        };
        validate_utterance(&utterance).map_err(|e| SlugateError::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        if !ids.insert(utterance.id.clone()) {
            return Err(SlugateError::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("duplicate utterance id {}", utterance.id),
            });
        }
        out.push(utterance);
    }
    Ok(out)
}

/// Schema-level checks on a single utterance.
pub fn validate_utterance(u: &Utterance) -> Result<()> {
    if u.tokens.is_empty() {
        return Err(SlugateError::validation("tokens", "must be non-empty"));
    }
    let mut spans: Vec<&SlotSpan> = u.annotation.slots.iter().collect();
    spans.sort_by_key(|s| (s.start, s.end));
    let mut prev_end = 0usize;
    for span in spans {
        if span.start >= span.end || span.end > u.tokens.len() {
            return Err(SlugateError::validation(
                "annotation.slots",
                format!("span {}..{} out of range for {} tokens", span.start, span.end, u.tokens.len()),
            ));
        }
        if span.start < prev_end {
            return Err(SlugateError::validation(
                "annotation.slots",
                format!("span {}..{} overlaps a previous span", span.start, span.end),
            ));
        }
        prev_end = span.end;
    }
    if let Some(obs) = &u.asr {
        obs.validate()?;
    }
    Ok(())
}

/// Catalog-level checks over a whole corpus: every annotation's domain,
/// intent, and slot labels must exist in the catalog and spans must be valid.
pub fn validate_corpus(data: &[Utterance], catalog: &CatalogSpec) -> Result<()> {
    let mut ids = BTreeSet::new();
    for u in data {
        validate_utterance(u)?;
        if !ids.insert(u.id.as_str()) {
            return Err(SlugateError::validation("id", format!("duplicate id {}", u.id)));
        }
        let domain = catalog.domain(&u.annotation.domain).ok_or_else(|| {
            SlugateError::validation(
                "annotation.domain",
                format!("{} not in catalog (utterance {})", u.annotation.domain, u.id),
            )
        })?;
        if !domain.intents.iter().any(|i| *i == u.annotation.intent) {
            return Err(SlugateError::validation(
                "annotation.intent",
                format!("{} not an intent of {} (utterance {})", u.annotation.intent, domain.name, u.id),
            ));
        }
        for span in &u.annotation.slots {
            if !domain.slot_labels.iter().any(|l| *l == span.label) {
                return Err(SlugateError::validation(
                    "annotation.slots",
                    format!("label {} not in domain {} (utterance {})", span.label, domain.name, u.id),
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn books_catalog() -> CatalogSpec {
        CatalogSpec {
            domains: vec![DomainSpec {
                name: "Books".into(),
                prior: 1.0,
                intents: vec!["ReadBookIntent".into()],
                slot_labels: vec!["BookName".into()],
                lexicons: BTreeMap::from([("BookName".into(), vec!["moana".into()])]),
                templates: BTreeMap::from([(
                    "ReadBookIntent".into(),
                    vec!["read [BookName]".into()],
                )]),
            }],
            confusability: 0.0,
            seed: 11,
        }
    }

    fn two_domain_catalog(seed: u64, confusability: f64) -> CatalogSpec {
        CatalogSpec {
            domains: vec![
                DomainSpec {
                    name: "Books".into(),
                    prior: 0.5,
                    intents: vec!["ReadBookIntent".into()],
                    slot_labels: vec!["BookName".into()],
                    lexicons: BTreeMap::from([(
                        "BookName".into(),
                        vec!["dune".into(), "emma".into(), "dracula".into()],
                    )]),
                    templates: BTreeMap::from([(
                        "ReadBookIntent".into(),
                        vec!["read [BookName]".into(), "open the book [BookName]".into()],
                    )]),
                },
                DomainSpec {
                    name: "Music".into(),
                    prior: 0.5,
                    intents: vec!["PlaySongIntent".into()],
                    slot_labels: vec!["SongName".into()],
                    lexicons: BTreeMap::from([(
                        "SongName".into(),
                        vec!["thriller".into(), "yesterday".into(), "heroes".into()],
                    )]),
                    templates: BTreeMap::from([(
                        "PlaySongIntent".into(),
                        vec!["play [SongName]".into(), "put on [SongName]".into()],
                    )]),
                },
            ],
            confusability,
            seed,
        }
    }

    #[test]
    fn single_path_catalog_generates_the_only_sample() {
        let corpus = generate_corpus(&books_catalog(), 1).unwrap();
        assert_eq!(corpus.len(), 1);
        let u = &corpus[0];
        assert_eq!(u.tokens, vec!["read", "moana"]);
        assert_eq!(u.annotation.domain, "Books");
        assert_eq!(u.annotation.intent, "ReadBookIntent");
        assert_eq!(
            u.annotation.slots,
            vec![SlotSpan { start: 1, end: 2, label: "BookName".into() }]
        );
    }

    #[test]
    fn zero_count_is_rejected() {
        let err = generate_corpus(&books_catalog(), 0).unwrap_err();
        assert!(matches!(err, SlugateError::Validation { .. }));
    }

    #[test]
    fn priors_respected_within_binomial_bounds() {
        let catalog = two_domain_catalog(99, 0.0);
        let corpus = generate_corpus(&catalog, 10_000).unwrap();
        let books = corpus.iter().filter(|u| u.annotation.domain == "Books").count();
        assert!((4500..=5500).contains(&books), "books count {books}");
    }

    #[test]
    fn generation_is_deterministic() {
        let catalog = two_domain_catalog(5, 0.3);
        let a = generate_corpus(&catalog, 200).unwrap();
        let b = generate_corpus(&catalog, 200).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generated_corpus_validates_against_catalog() {
        let catalog = two_domain_catalog(17, 0.5);
        let corpus = generate_corpus(&catalog, 500).unwrap();
        validate_corpus(&corpus, &catalog).unwrap();
    }

    #[test]
    fn zero_confusability_keeps_slot_vocabulary_in_domain() {
        let catalog = two_domain_catalog(23, 0.0);
        let corpus = generate_corpus(&catalog, 400).unwrap();
        for u in &corpus {
            let domain = catalog.domain(&u.annotation.domain).unwrap();
            for span in &u.annotation.slots {
                let value = u.tokens[span.start..span.end].join(" ");
                let lexicon = &domain.lexicons[&span.label];
                assert!(
                    lexicon.iter().any(|v| v.to_lowercase() == value),
                    "value {value} escaped the {} lexicon",
                    span.label
                );
            }
        }
    }

    #[test]
    fn split_sizes_exact_on_divisible_counts() {
        let corpus = generate_corpus(&two_domain_catalog(3, 0.0), 100).unwrap();
        let split = split_dataset(&corpus, [0.7, 0.2, 0.05, 0.05], 1).unwrap();
        assert_eq!(split.slu_train.len(), 70);
        assert_eq!(split.reject_train.len(), 20);
        assert_eq!(split.dev.len(), 5);
        assert_eq!(split.test.len(), 5);
    }

    #[test]
    fn bad_fractions_rejected() {
        let corpus = generate_corpus(&books_catalog(), 4).unwrap();
        assert!(split_dataset(&corpus, [0.5, 0.5, 0.5, 0.5], 1).is_err());
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let corpus = generate_corpus(&two_domain_catalog(8, 0.2), 101).unwrap();
        let a = split_dataset(&corpus, [0.6, 0.2, 0.1, 0.1], 9).unwrap();
        let b = split_dataset(&corpus, [0.6, 0.2, 0.1, 0.1], 9).unwrap();
        assert_eq!(a.slu_train, b.slu_train);
        assert_eq!(a.test, b.test);
        let mut ids = BTreeSet::new();
        for section in [&a.slu_train, &a.reject_train, &a.dev, &a.test] {
            for u in section {
                assert!(ids.insert(u.id.clone()), "id {} appears in two sections", u.id);
            }
        }
        assert_eq!(ids.len(), 101);
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        let mut corpus = generate_corpus(&two_domain_catalog(2, 0.1), 3).unwrap();
        corpus[1].asr = Some(
            crate::asr::corrupt(
                &corpus[1].tokens,
                crate::asr::CorruptionRates { sub: 0.5, ins: 0.1, del: 0.1 },
                7,
            )
            .unwrap(),
        );
        save_dataset(&corpus, &path).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(corpus, loaded);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"a\",\"text\":\"hi there\",\"annotation\":{\"domain\":\"D\",\"intent\":\"I\",\"slots\":[]}}\n{\"id\":\"b\",\"text\":\"oops\"}\n",
        )
        .unwrap();
        let err = load_dataset(&path).unwrap_err();
        match err {
            SlugateError::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("annotation"), "{message}");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn empty_file_loads_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(load_dataset(&path).unwrap().is_empty());
    }

    #[test]
    fn annotation_tag_round_trip() {
        let ann = Annotation {
            domain: "Books".into(),
            intent: "ReadBookIntent".into(),
            slots: vec![
                SlotSpan { start: 1, end: 3, label: "BookName".into() },
                SlotSpan { start: 4, end: 5, label: "PageNumber".into() },
            ],
        };
        let tags = ann.tags(5);
        assert_eq!(tags, vec!["O", "BookName", "BookName", "O", "PageNumber"]);
        assert_eq!(Annotation::spans_from_tags(&tags), ann.slots);
    }
}
