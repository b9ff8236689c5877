//! Adapter for an out-of-process translator (e.g. a language model) that
//! speaks a small JSON protocol:
//!
//! ```text
//! {"task": "parse",  "payload": ParseRequest}            -> SituationGraph
//! {"task": "render", "payload": {"media": .., "anchor": ..}} -> RuntimeEvent
//! ```
//!
//! Responses are validated exactly like rule-based outputs.

use serde_json::json;

use super::{Capability, ParseRequest, ScribeError, SituationGraph, TranslatorBackend};
use crate::scene::RuntimeEvent;
use crate::synthesizer::MediaObject;

/// Sends one request document and returns the response document.
pub type Exchange = Box<dyn Fn(&str) -> Result<String, String> + Send + Sync>;

pub struct ExternalTranslator {
    exchange: Exchange,
}

impl ExternalTranslator {
    pub fn new(exchange: Exchange) -> Self {
        ExternalTranslator { exchange }
    }

    fn call(&self, task: &str, payload: serde_json::Value) -> Result<String, ScribeError> {
        let request = json!({ "task": task, "payload": payload }).to_string();
        (self.exchange)(&request).map_err(ScribeError::Backend)
    }
}

impl std::fmt::Debug for ExternalTranslator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalTranslator").finish_non_exhaustive()
    }
}

impl TranslatorBackend for ExternalTranslator {
    fn capability(&self) -> Capability {
        Capability::External
    }

    fn parse(&self, request: &ParseRequest) -> Result<SituationGraph, ScribeError> {
        let payload = serde_json::to_value(request).map_err(|e| ScribeError::Backend(e.to_string()))?;
        let response = self.call("parse", payload)?;
        let graph: SituationGraph =
            serde_json::from_str(&response).map_err(|e| ScribeError::Backend(e.to_string()))?;
        if graph.situation_id() != request.situation_id {
            return Err(ScribeError::Backend(format!(
                "response is for situation `{}`, expected `{}`",
                graph.situation_id(),
                request.situation_id
            )));
        }
        Ok(graph)
    }

    fn render(&self, media: &MediaObject, anchor: &str) -> Result<RuntimeEvent, ScribeError> {
        if anchor.is_empty() {
            return Err(ScribeError::EmptyAnchor);
        }
        let response = self.call("render", json!({ "media": media, "anchor": anchor }))?;
        let event: RuntimeEvent =
            serde_json::from_str(&response).map_err(|e| ScribeError::Backend(e.to_string()))?;
        event
            .validate_shape()
            .map_err(|e| ScribeError::MalformedEvent(e.to_string()))?;
        Ok(event)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scribe::{render_xr_script, RuleBasedTranslator};
    use crate::synthesizer::{synthesize_pie, SpendingRecord};
    use serde_json::Value;

    /// An "external" service that is really the rule-based backend behind JSON.
    fn loopback() -> ExternalTranslator {
        ExternalTranslator::new(Box::new(|req: &str| {
            let req: Value = serde_json::from_str(req).map_err(|e| e.to_string())?;
            match req["task"].as_str() {
                Some("parse") => {
                    let p: ParseRequest = serde_json::from_value(req["payload"].clone()).map_err(|e| e.to_string())?;
                    Ok(serde_json::to_string(&RuleBasedTranslator.parse(&p).unwrap()).unwrap())
                }
                Some("render") => Ok(json!({
                    "event": "instantiate_visualization",
                    "visualization_type": req["payload"]["media"]["payload"]["kind"],
                    "data": [],
                    "position": req["payload"]["anchor"],
                    "interaction": "enabled"
                })
                .to_string()),
                _ => Err("unknown task".into()),
            }
        }))
    }

    #[test]
    fn parse_through_protocol_matches_rule_based() {
        let req = ParseRequest::new("situation_1", "show my credit card spending on the table in front of me");
        assert_eq!(loopback().parse(&req).unwrap(), RuleBasedTranslator.parse(&req).unwrap());
        assert_eq!(loopback().capability(), Capability::External);
    }

    #[test]
    fn render_through_protocol() {
        let pie = synthesize_pie(&[SpendingRecord::new("A", 1.0).unwrap()]).unwrap();
        let ev = loopback().render(&pie, "anchor_12").unwrap();
        let local = render_xr_script(&pie, "anchor_12").unwrap();
        assert_eq!(ev.visualization_type, local.visualization_type);
        assert_eq!(ev.position, local.position);
    }

    #[test]
    fn invalid_responses_are_rejected() {
        let bad_vocab = ExternalTranslator::new(Box::new(|_: &str| {
            Ok(r#"{"situation_id":"s","triples":[["s","likes","x"]]}"#.to_string())
        }));
        assert!(bad_vocab.parse(&ParseRequest::new("s", "x")).is_err());

        let wrong_id = ExternalTranslator::new(Box::new(|_: &str| {
            Ok(r#"{"situation_id":"t","triples":[["t","has_intent","x"]]}"#.to_string())
        }));
        assert!(wrong_id.parse(&ParseRequest::new("s", "x")).is_err());

        let failing = ExternalTranslator::new(Box::new(|_: &str| Err("offline".to_string())));
        assert_eq!(
            failing.parse(&ParseRequest::new("s", "x")),
            Err(ScribeError::Backend("offline".into()))
        );
    }
}
