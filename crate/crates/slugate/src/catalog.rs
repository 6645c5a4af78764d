//! Catalog describing the synthetic multi-domain grammar: domains, intents,
//! slot lexicons, utterance templates, and sampling priors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SlugateError};

/// One domain's grammar: intents, slot lexicons, and token templates.
///
/// Template tokens are plain lowercase words except for `[SlotLabel]`
/// placeholders, which are filled from the matching lexicon at generation
/// time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainSpec {
    pub name: String,
    pub prior: f64,
    pub intents: Vec<String>,
    pub slot_labels: Vec<String>,
    /// slot label -> surface word values
    pub lexicons: BTreeMap<String, Vec<String>>,
    /// intent -> token templates
    pub templates: BTreeMap<String, Vec<String>>,
}

/// The full generation catalog.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogSpec {
    pub domains: Vec<DomainSpec>,
    /// Probability that a generated utterance borrows a slot value from
    /// another domain's vocabulary, making it genuinely ambiguous.
    pub confusability: f64,
    pub seed: u64,
}

/// A template placeholder is a single token of the form `[Label]`.
pub fn placeholder_label(token: &str) -> Option<&str> {
    token
        .strip_prefix('[')
        .and_then(|rest| rest.strip_suffix(']'))
}

impl DomainSpec {
    /// All tokens of a template, split on whitespace.
    pub fn template_tokens(template: &str) -> Vec<&str> {
        template.split_whitespace().collect()
    }
}

impl CatalogSpec {
    pub fn domain(&self, name: &str) -> Option<&DomainSpec> {
        self.domains.iter().find(|d| d.name == name)
    }

    /// Domain names in catalog order. This order is the canonical domain
    /// ordering everywhere else in the crate.
    pub fn domain_names(&self) -> Vec<String> {
        self.domains.iter().map(|d| d.name.clone()).collect()
    }

    /// Validate the catalog, naming the offending field on failure.
    pub fn validate(&self) -> Result<()> {
        if self.domains.is_empty() {
            return Err(SlugateError::validation("domains", "at least one domain is required"));
        }
        if !(0.0..=1.0).contains(&self.confusability) {
            return Err(SlugateError::validation(
                "confusability",
                format!("must lie in [0,1], got {}", self.confusability),
            ));
        }
        let prior_sum: f64 = self.domains.iter().map(|d| d.prior).sum();
        if (prior_sum - 1.0).abs() > 1e-9 {
            return Err(SlugateError::validation(
                "domains[].prior",
                format!("priors must sum to 1 within 1e-9, got {prior_sum}"),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for dom in &self.domains {
            let field = |f: &str| format!("domains[{}].{}", dom.name, f);
            if !seen.insert(dom.name.clone()) {
                return Err(SlugateError::validation(
                    "domains[].name",
                    format!("duplicate domain name {}", dom.name),
                ));
            }
            if dom.prior <= 0.0 {
                return Err(SlugateError::validation(
                    field("prior"),
                    format!("must be positive, got {}", dom.prior),
                ));
            }
            if dom.intents.is_empty() {
                return Err(SlugateError::validation(field("intents"), "at least one intent is required"));
            }
            for intent in &dom.intents {
                let templates = dom.templates.get(intent).map(Vec::as_slice).unwrap_or(&[]);
                if templates.is_empty() {
                    return Err(SlugateError::validation(
                        field(&format!("templates.{intent}")),
                        "every intent needs at least one template",
                    ));
                }
                for template in templates {
                    if template.split_whitespace().next().is_none() {
                        return Err(SlugateError::validation(
                            field(&format!("templates.{intent}")),
                            "templates must contain at least one token",
                        ));
                    }
                    for token in DomainSpec::template_tokens(template) {
                        if let Some(label) = placeholder_label(token) {
                            if !dom.slot_labels.iter().any(|l| l == label) {
                                return Err(SlugateError::validation(
                                    field(&format!("templates.{intent}")),
                                    format!("placeholder [{label}] names no slot label of this domain"),
                                ));
                            }
                        }
                    }
                }
            }
            for intent in dom.templates.keys() {
                if !dom.intents.iter().any(|i| i == intent) {
                    return Err(SlugateError::validation(
                        field("templates"),
                        format!("templates keyed by unknown intent {intent}"),
                    ));
                }
            }
            for label in &dom.slot_labels {
                match dom.lexicons.get(label) {
                    Some(values) if !values.is_empty() => {}
                    _ => {
                        return Err(SlugateError::validation(
                            field(&format!("lexicons.{label}")),
                            "every slot label needs a non-empty lexicon",
                        ))
                    }
                }
            }
            for label in dom.lexicons.keys() {
                if !dom.slot_labels.iter().any(|l| l == label) {
                    return Err(SlugateError::validation(
                        field("lexicons"),
                        format!("lexicon keyed by unknown slot label {label}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_catalog() -> CatalogSpec {
        CatalogSpec {
            domains: vec![DomainSpec {
                name: "Books".into(),
                prior: 1.0,
                intents: vec!["ReadBookIntent".into()],
                slot_labels: vec!["BookName".into()],
                lexicons: BTreeMap::from([("BookName".into(), vec!["moana".into()])]),
                templates: BTreeMap::from([("ReadBookIntent".into(), vec!["read [BookName]".into()])]),
            }],
            confusability: 0.0,
            seed: 1,
        }
    }

    #[test]
    fn valid_catalog_passes() {
        tiny_catalog().validate().unwrap();
    }

    #[test]
    fn bad_prior_sum_rejected() {
        let mut cat = tiny_catalog();
        cat.domains[0].prior = 0.5;
        let err = cat.validate().unwrap_err();
        assert!(err.to_string().contains("prior"));
    }

    #[test]
    fn unknown_placeholder_rejected() {
        let mut cat = tiny_catalog();
        cat.domains[0]
            .templates
            .insert("ReadBookIntent".into(), vec!["read [PageNumber]".into()]);
        let err = cat.validate().unwrap_err();
        assert!(err.to_string().contains("PageNumber"), "{err}");
    }

    #[test]
    fn empty_intents_rejected() {
        let mut cat = tiny_catalog();
        cat.domains[0].intents.clear();
        cat.domains[0].templates.clear();
        assert!(cat.validate().is_err());
    }

    #[test]
    fn confusability_range_checked() {
        let mut cat = tiny_catalog();
        cat.confusability = 1.5;
        let err = cat.validate().unwrap_err();
        assert!(err.to_string().contains("confusability"));
    }
}
