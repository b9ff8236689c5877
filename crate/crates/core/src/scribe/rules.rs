//! Deterministic rule-table translator.

use std::collections::BTreeSet;

use super::{
    render_xr_script, Capability, ParseRequest, ScribeError, SituationGraph, TranslatorBackend,
    UNKNOWN_INTENT,
};
use crate::embedding::tokenize;
use crate::scene::RuntimeEvent;
use crate::synthesizer::MediaObject;

/// Entity assumed by spending requests that name no account.
pub const DEFAULT_ENTITY: &str = "credit_card";

struct IntentRule {
    keywords: &'static [&'static str],
    intent: &'static str,
    /// Whether a target entity is extracted (with the default as fallback).
    entity: bool,
}

/// Ordered; the first rule with a keyword present wins.
const INTENT_RULES: &[IntentRule] = &[
    IntentRule {
        keywords: &["spending", "spend", "spent", "expenses", "expense", "transactions"],
        intent: "visualize_spending_profile",
        entity: true,
    },
    IntentRule {
        keywords: &["memory", "memories", "photo", "photos", "picture", "pictures"],
        intent: "retrieve_memory",
        entity: false,
    },
    IntentRule {
        keywords: &["describe", "summarize", "summary"],
        intent: "describe",
        entity: false,
    },
];

/// Multi-word account phrases, longest first.
const ENTITY_LEXICON: &[(&[&str], &str)] = &[
    (&["credit", "card"], "credit_card"),
    (&["debit", "card"], "debit_card"),
    (&["bank", "account"], "bank_account"),
    (&["checking", "account"], "checking_account"),
    (&["savings", "account"], "savings_account"),
];

const LOCATION_NOUNS: &[&str] = &[
    "table", "desk", "wall", "shelf", "floor", "window", "couch", "sofa", "chair", "counter",
    "board", "whiteboard", "frame",
];

const PREPOSITIONS: &[&str] = &["on", "at", "near", "onto", "above", "beside", "by"];
const DETERMINERS: &[&str] = &["the", "my", "a", "this", "that"];

/// Words never treated as location nouns even if they occur in anchor
/// descriptions.
const FUNCTION_WORDS: &[&str] = &[
    "a", "an", "the", "for", "of", "on", "in", "at", "to", "and", "or", "with", "my", "me",
];

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBasedTranslator;

impl TranslatorBackend for RuleBasedTranslator {
    fn capability(&self) -> Capability {
        Capability::RuleBased
    }

    fn parse(&self, request: &ParseRequest) -> Result<SituationGraph, ScribeError> {
        Ok(parse_user_request(request))
    }

    fn render(&self, media: &MediaObject, anchor: &str) -> Result<RuntimeEvent, ScribeError> {
        render_xr_script(media, anchor)
    }
}

fn location_nouns(request: &ParseRequest) -> BTreeSet<String> {
    let mut nouns: BTreeSet<String> = LOCATION_NOUNS.iter().map(|s| s.to_string()).collect();
    if let Some(spatial) = &request.spatial {
        for a in &spatial.anchors {
            nouns.extend(
                tokenize(&a.description)
                    .into_iter()
                    .filter(|t| !FUNCTION_WORDS.contains(&t.as_str()) && t.chars().all(char::is_alphabetic)),
            );
        }
    }
    nouns
}

fn find_entity(tokens: &[String]) -> Option<&'static str> {
    for i in 0..tokens.len() {
        for (phrase, entity) in ENTITY_LEXICON {
            let end = i + phrase.len();
            if end <= tokens.len() && tokens[i..end].iter().zip(phrase.iter()).all(|(a, b)| a == b) {
                return Some(entity);
            }
        }
    }
    None
}

/// `<prep> [det] NOUN [in front [of me]]` → `NOUN` or `NOUN_in_front`.
/// The result is a symbolic reference, never an anchor id.
fn find_location(tokens: &[String], nouns: &BTreeSet<String>) -> Option<String> {
    for (i, tok) in tokens.iter().enumerate() {
        if !PREPOSITIONS.contains(&tok.as_str()) {
            continue;
        }
        let mut j = i + 1;
        if tokens.get(j).is_some_and(|t| DETERMINERS.contains(&t.as_str())) {
            j += 1;
        }
        let Some(noun) = tokens.get(j).filter(|t| nouns.contains(t.as_str())) else {
            continue;
        };
        let rest: Vec<&str> = tokens[j + 1..].iter().map(String::as_str).take(2).collect();
        return Some(if rest == ["in", "front"] {
            format!("{noun}_in_front")
        } else {
            noun.clone()
        });
    }
    None
}

/// Total and deterministic: anything unrecognized becomes `has_intent unknown`.
pub fn parse_user_request(request: &ParseRequest) -> SituationGraph {
    let sid = request.situation_id.as_str();
    let tokens = tokenize(&request.text);
    let mut rows: Vec<(&str, String)> = Vec::new();
    if tokens.is_empty() {
        rows.push(("has_intent", UNKNOWN_INTENT.to_string()));
    } else {
        rows.push(("has_participant", "user".to_string()));
        let rule = INTENT_RULES
            .iter()
            .find(|r| tokens.iter().any(|t| r.keywords.contains(&t.as_str())));
        match rule {
            Some(rule) => {
                rows.push(("has_intent", rule.intent.to_string()));
                if rule.entity {
                    let entity = find_entity(&tokens).unwrap_or(DEFAULT_ENTITY);
                    rows.push(("has_target_entity", entity.to_string()));
                }
                if let Some(loc) = find_location(&tokens, &location_nouns(request)) {
                    rows.push(("has_target_location", loc));
                }
            }
            None => rows.push(("has_intent", UNKNOWN_INTENT.to_string())),
        }
    }
    let borrowed: Vec<(&str, &str)> = rows.iter().map(|(p, o)| (*p, o.as_str())).collect();
    match SituationGraph::from_rows(sid, &borrowed) {
        Ok(g) => g,
        // Only an empty situation id can make the rows invalid.
        Err(_) => SituationGraph::from_rows("situation", &[("has_intent", UNKNOWN_INTENT)])
            .expect("fixed fallback situation is valid"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{AnchorPoint, SpatialData, UserPose};
    use crate::scribe::SITUATION_VOCABULARY;
    use proptest::prelude::*;

    fn parse(text: &str) -> SituationGraph {
        parse_user_request(&ParseRequest::new("situation_1", text))
    }

    fn rows(g: &SituationGraph) -> Vec<(String, String)> {
        g.triples()
            .iter()
            .map(|t| (t.predicate().to_string(), t.object().to_string()))
            .collect()
    }

    fn r(p: &str, o: &str) -> (String, String) {
        (p.to_string(), o.to_string())
    }

    #[test]
    fn financial_prompt() {
        let g = parse("Show me my credit card spending on the table in front of me.");
        assert_eq!(
            rows(&g),
            vec![
                r("has_participant", "user"),
                r("has_intent", "visualize_spending_profile"),
                r("has_target_entity", "credit_card"),
                r("has_target_location", "table_in_front"),
            ]
        );
        assert!(g.triples().iter().all(|t| t.subject() == "situation_1"));
    }

    #[test]
    fn no_location() {
        assert_eq!(
            rows(&parse("show my spending")),
            vec![
                r("has_participant", "user"),
                r("has_intent", "visualize_spending_profile"),
                r("has_target_entity", "credit_card"),
            ]
        );
    }

    #[test]
    fn empty_and_unknown() {
        assert_eq!(rows(&parse("")), vec![r("has_intent", "unknown")]);
        assert_eq!(
            rows(&parse("what's the weather")),
            vec![r("has_participant", "user"), r("has_intent", "unknown")]
        );
    }

    #[test]
    fn entity_lexicon_and_plain_location() {
        assert_eq!(
            rows(&parse("debit card spending on my desk")),
            vec![
                r("has_participant", "user"),
                r("has_intent", "visualize_spending_profile"),
                r("has_target_entity", "debit_card"),
                r("has_target_location", "desk"),
            ]
        );
    }

    #[test]
    fn anchor_description_words_become_location_nouns() {
        let spatial = SpatialData::new(
            vec![AnchorPoint::new("a", [0.0, 0.0, 1.0], "easel for presenting data")],
            UserPose::new([0.0; 3], [0.0, 0.0, 1.0]),
        );
        let req = ParseRequest::new("s", "show spending on the easel").with_spatial(spatial);
        assert_eq!(parse_user_request(&req).first("has_target_location"), Some("easel"));
        assert_eq!(parse("show spending on the easel").first("has_target_location"), None);
    }

    #[test]
    fn first_rule_wins() {
        // both spending and photo keywords: spending comes first in the table
        assert_eq!(
            parse("photo of my spending").first("has_intent"),
            Some("visualize_spending_profile")
        );
        assert_eq!(parse("show a memory").first("has_intent"), Some("retrieve_memory"));
    }

    proptest! {
        #[test]
        fn total_deterministic_and_in_vocabulary(text in "\\PC{0,80}") {
            let a = parse(&text);
            prop_assert_eq!(&a, &parse(&text));
            prop_assert!(!a.triples().is_empty());
            for t in a.triples() {
                prop_assert!(SITUATION_VOCABULARY.contains(&t.predicate()));
            }
        }

        #[test]
        fn word_salad_in_vocabulary(words in prop::collection::vec(
            prop::sample::select(vec!["show", "me", "my", "credit", "card", "spending", "on", "the",
                                      "table", "in", "front", "of", "photo", "desk", "describe"]), 0..14)) {
            let g = parse(&words.join(" "));
            for t in g.triples() {
                prop_assert!(SITUATION_VOCABULARY.contains(&t.predicate()));
            }
        }
    }
}
