use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{LlmError, Prompt, Provider, ProviderConfig, RoleTag, RuleBasedProvider};

/// Fixture file for [`ScriptedProvider`].
///
/// ```json
/// {
///   "fallback": "rule_based",
///   "entries": [
///     {"role": "extract", "sample_id": "s1", "responses": [{"values": []}, "prose"]}
///   ]
/// }
/// ```
///
/// The first entry matching a prompt answers it. An entry matches on role, on
/// `sample_id` when given and on `contains` (a substring of the prompt text)
/// when given. Successive matches walk `responses` in order and repeat the
/// last one. String responses are returned verbatim, anything else is
/// serialized as compact JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Script {
    #[serde(default)]
    pub fallback: Option<Fallback>,
    pub entries: Vec<ScriptEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    RuleBased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub role: RoleTag,
    #[serde(default)]
    pub sample_id: Option<String>,
    #[serde(default)]
    pub contains: Option<String>,
    pub responses: Vec<Value>,
}

impl ScriptEntry {
    pub fn new(role: RoleTag, sample_id: Option<&str>, responses: Vec<Value>) -> Self {
        Self { role, sample_id: sample_id.map(str::to_string), contains: None, responses }
    }

    fn matches(&self, prompt: &Prompt) -> bool {
        self.role == prompt.role_tag
            && self.sample_id.as_ref().is_none_or(|id| prompt.sample_id.as_ref() == Some(id))
            && self.contains.as_ref().is_none_or(|s| prompt.text.contains(s.as_str()))
    }
}

#[derive(Debug)]
pub struct ScriptedProvider {
    script: Script,
    cursors: Mutex<Vec<usize>>,
    fallback: Option<RuleBasedProvider>,
}

impl ScriptedProvider {
    pub fn new(script: Script) -> Self {
        let cursors = Mutex::new(vec![0; script.entries.len()]);
        let fallback = script.fallback.map(|Fallback::RuleBased| RuleBasedProvider::new());
        Self { script, cursors, fallback }
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Config(format!("reading script {}: {e}", path.display())))?;
        let script: Script = serde_json::from_str(&raw)
            .map_err(|e| LlmError::Config(format!("parsing script {}: {e}", path.display())))?;
        Ok(Self::new(script))
    }
}

impl Provider for ScriptedProvider {
    fn generate(&self, prompt: &Prompt, config: &ProviderConfig) -> Result<String, LlmError> {
        let found = self.script.entries.iter().position(|e| e.matches(prompt) && !e.responses.is_empty());
        let Some(index) = found else {
            return match &self.fallback {
                Some(rules) => rules.generate(prompt, config),
                None => Err(LlmError::ProviderRefusal(format!(
                    "no scripted response for role {} sample {:?}",
                    prompt.role_tag, prompt.sample_id
                ))),
            };
        };
        let entry = &self.script.entries[index];
        let position = {
            let mut cursors = self.cursors.lock().expect("script cursor lock");
            let at = cursors[index];
            cursors[index] += 1;
            at.min(entry.responses.len() - 1)
        };
        Ok(match &entry.responses[position] {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        })
    }
}
