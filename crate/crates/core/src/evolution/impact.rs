use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::generator::{fragment_from_partial, generate_for, GenConfig, GenError};
use crate::json::{parse_json, JsonPath, JsonValue};
use crate::registry::{Registry, SchemaDoc, SchemaId};

use super::EvolutionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    /// Data shaped like the sample must still be producible.
    MustStayValid,
    /// Data shaped like the sample must still be rejected.
    MustStayInvalid,
}

impl Polarity {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "must-stay-valid" => Some(Polarity::MustStayValid),
            "must-stay-invalid" => Some(Polarity::MustStayInvalid),
            _ => None,
        }
    }
}

/// A consumer's expectation about one title, stored as
/// `{"consumer", "schema": <title>, "polarity", "sample": <partial event>}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsumerSample {
    pub consumer: String,
    pub schema: String,
    pub polarity: Polarity,
    pub fragment: Vec<(JsonPath, JsonValue)>,
}

impl ConsumerSample {
    pub fn from_json(value: &JsonValue) -> Result<Self, String> {
        let obj = value.as_object().ok_or("a consumer sample must be an object")?;
        if let Some(k) = obj
            .keys()
            .find(|k| !["consumer", "schema", "polarity", "sample"].contains(&k.as_str()))
        {
            return Err(format!("unknown key '{k}'"));
        }
        let text = |key: &str| {
            obj.get(key)
                .and_then(JsonValue::as_str)
                .map(str::to_string)
                .ok_or_else(|| format!("'{key}' must be a string"))
        };
        let polarity = text("polarity")?;
        let sample = obj.get("sample").ok_or("'sample' is missing")?;
        if sample.as_object().is_none() {
            return Err("'sample' must be an object".into());
        }
        Ok(ConsumerSample {
            consumer: text("consumer")?,
            schema: text("schema")?,
            polarity: Polarity::parse(&polarity)
                .ok_or_else(|| format!("polarity '{polarity}' is not must-stay-valid or must-stay-invalid"))?,
            fragment: fragment_from_partial(sample),
        })
    }

    /// Every `*.json` file under `dir`, recursively, in path order.
    pub fn load_dir(dir: &Path) -> Result<Vec<Self>, EvolutionError> {
        let mut files = Vec::new();
        collect_json(dir, &mut files)?;
        files.sort();
        files
            .into_iter()
            .map(|path| {
                let text = fs::read_to_string(&path).map_err(|e| EvolutionError::io(&path, e))?;
                parse_json(&text)
                    .map_err(|e| e.to_string())
                    .and_then(|v| ConsumerSample::from_json(&v))
                    .map_err(|reason| EvolutionError::BadSample { path, reason })
            })
            .collect()
    }
}

fn collect_json(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), EvolutionError> {
    for entry in fs::read_dir(dir).map_err(|e| EvolutionError::io(dir, e))? {
        let path = entry.map_err(|e| EvolutionError::io(dir, e))?.path();
        if path.is_dir() {
            collect_json(&path, out)?;
        } else if path.extension().and_then(|e| e.to_str()) == Some("json") {
            out.push(path);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ImpactOutcome {
    pub consumer: String,
    pub polarity: Polarity,
    pub passed: bool,
    pub diagnostic: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImpactReport {
    pub proposal: SchemaId,
    pub outcomes: Vec<ImpactOutcome>,
}

impl ImpactReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failing_consumers(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .outcomes
            .iter()
            .filter(|o| !o.passed)
            .map(|o| o.consumer.as_str())
            .collect();
        out.dedup();
        out
    }
}

/// Registers `proposal` in a scratch copy of `registry` and checks every
/// sample for the proposal's title against it. Samples for other titles are
/// ignored. The real registry is never touched.
pub fn change_impact_test(
    registry: &Registry,
    proposal: SchemaDoc,
    samples: &[ConsumerSample],
    cfg: &GenConfig,
) -> Result<ImpactReport, EvolutionError> {
    let mut scratch = registry.detached();
    let id = proposal.id.clone();
    let title = proposal.title.clone();
    scratch.register_doc(proposal).map_err(EvolutionError::Proposal)?;
    let schema = scratch.resolve_id(&id)?;
    let mut outcomes = Vec::new();
    for sample in samples.iter().filter(|s| s.schema == title) {
        let cfg = GenConfig {
            fragment: sample.fragment.clone(),
            ..cfg.clone()
        };
        let embedded = match generate_for(&scratch, &schema, &cfg) {
            Ok(_) => Ok(()),
            Err(GenError::Unsatisfiable(m)) => Err(m.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")),
            Err(GenError::Registry(e)) => return Err(e.into()),
            Err(other) => Err(other.to_string()),
        };
        let (passed, diagnostic) = match (sample.polarity, embedded) {
            (Polarity::MustStayValid, Ok(())) => (true, "sample is still accepted".to_string()),
            (Polarity::MustStayValid, Err(why)) => (false, format!("sample is no longer accepted: {why}")),
            (Polarity::MustStayInvalid, Ok(())) => (false, "too loose: sample is now accepted".to_string()),
            (Polarity::MustStayInvalid, Err(why)) => (true, format!("sample is still rejected: {why}")),
        };
        outcomes.push(ImpactOutcome {
            consumer: sample.consumer.clone(),
            polarity: sample.polarity,
            passed,
            diagnostic,
        });
    }
    Ok(ImpactReport { proposal: id, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::json;

    fn fixtures() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
    }

    fn proposal(name: &str) -> SchemaDoc {
        let text = fs::read_to_string(fixtures().join(format!("proposals/{name}.json"))).unwrap();
        SchemaDoc::parse(&text).unwrap()
    }

    #[test]
    fn tightening_fails_only_the_old_format_consumer() {
        let r = Registry::load_repo(&fixtures().join("repo")).unwrap();
        let samples = ConsumerSample::load_dir(&fixtures().join("consumers")).unwrap();
        let report = change_impact_test(&r, proposal("send-message-tightened"), &samples, &GenConfig::default()).unwrap();
        assert_eq!(report.outcomes.len(), 4);
        assert_eq!(report.failing_consumers(), ["legacy-export"]);
        let loose = change_impact_test(&r, proposal("send-message-loosened"), &samples, &GenConfig::default()).unwrap();
        assert_eq!(loose.failing_consumers(), ["fraud-model"]);
        let fraud = loose.outcomes.iter().find(|o| o.consumer == "fraud-model").unwrap();
        assert!(fraud.diagnostic.starts_with("too loose"));
        // the real registry is untouched
        assert_eq!(r.latest_version("Send Message").unwrap(), 2);
    }

    #[test]
    fn removed_properties_fail_their_consumers() {
        let r = Registry::load_repo(&fixtures().join("repo")).unwrap();
        let mut doc = proposal("send-message-tightened");
        doc.properties.shift_remove("conversationId");
        let doc = SchemaDoc::new(doc.id, doc.title, None, doc.parent, doc.properties, doc.required);
        let samples = ConsumerSample::load_dir(&fixtures().join("consumers")).unwrap();
        let report = change_impact_test(&r, doc, &samples, &GenConfig::default()).unwrap();
        assert_eq!(report.failing_consumers(), ["inbox", "legacy-export"]);
    }

    #[test]
    fn invalid_proposals_and_samples_are_errors() {
        let r = Registry::load_repo(&fixtures().join("repo")).unwrap();
        let doc = r.latest("Send Message").unwrap().as_ref().clone();
        assert!(matches!(
            change_impact_test(&r, doc, &[], &GenConfig::default()),
            Err(EvolutionError::Proposal(_))
        ));
        assert!(ConsumerSample::from_json(&json!({"consumer": "c", "schema": "s", "polarity": "maybe", "sample": {}})).is_err());
        assert!(ConsumerSample::from_json(&json!({"consumer": "c", "schema": "s", "polarity": "must-stay-valid", "sample": 1})).is_err());
    }
}
