//! Offline backend answering from regular-expression heuristics. Each
//! answer cites the first matching line of the prompt payload, so its
//! references always verify.

use std::sync::OnceLock;

use regex::Regex;

use crate::extract::{BackendError, BackendIdentity, CompletionBackend, CompletionRequest};
use crate::schema::{LabelField, ValueKind};

#[derive(Debug, Default, Clone, Copy)]
pub struct StubBackend;

struct Rule {
    field: LabelField,
    pattern: Regex,
}

fn rules() -> &'static [Rule] {
    static RULES: OnceLock<Vec<Rule>> = OnceLock::new();
    RULES.get_or_init(|| {
        let table: [(LabelField, &str); 13] = [
            (
                LabelField::BaseModel,
                r"(?i)\b(gpt-4o(?:-mini)?|gpt-4(?:-turbo)?|gpt-3\.5-turbo(?:-\d+)?|text-davinci-\d+|text-embedding-[a-z0-9-]+|claude-[a-z0-9.-]+|llama-?\d[a-z0-9.-]*|stable-diffusion-[a-z0-9.-]+|dall-e-\d|whisper-\d|gemini-[a-z0-9.-]+)\b",
            ),
            (LabelField::ToolModality, r"(?i)\b(text-to-image|image-to-image|text-to-speech|speech-to-text|text-to-video)\b"),
            (LabelField::TargetUsers, r"(?i)\bfor (developers|researchers|students|businesses|artists|designers)\b"),
            (LabelField::ControllerContact, r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}"),
            (LabelField::DataRetention, r"(?i)\b(data retention|retain(?:ed|s)? (?:for|until)|retention period)\b"),
            (LabelField::RightToAccess, r"(?i)\b(export your data|access your (?:personal )?data|download your data)\b"),
            (LabelField::RightToBeForgotten, r"(?i)(delete (?:your |the )?(?:account|conversation|history|data)|right to be forgotten|clear(?:ed)? (?:chat )?history)"),
            (LabelField::RightToLodgeComplaints, r"(?i)\b(complaint|lodge a complaint|report abuse)\b"),
            (LabelField::AIGeneratedWatermarking, r"(?i)watermark"),
            (LabelField::PromptGuardrail, r"(?i)\b(guardrail|moderation|safety_checker|nsfw)"),
            (LabelField::RiskNotification, r"(?i)\b(disclaimer|may produce (?:inaccurate|harmful|offensive)|use at your own risk)"),
            (LabelField::DataEncryption, r"(?i)\b(encrypt|fernet|bcrypt|cipher)"),
            (LabelField::ProtectionOfMinors, r"(?i)\b(minors?|under the age of|children under)\b"),
        ];
        table
            .into_iter()
            .map(|(field, p)| Rule { field, pattern: Regex::new(p).expect("stub rule compiles") })
            .collect()
    })
}

fn answer(field: LabelField, payload: &str) -> String {
    let name = field.display_name();
    let rule = rules().iter().find(|r| r.field == field);
    let hit = rule.and_then(|rule| {
        payload.lines().find_map(|line| {
            let caps: Vec<String> = rule
                .pattern
                .captures_iter(line)
                .map(|c| c.get(1).unwrap_or_else(|| c.get(0).unwrap()).as_str().to_string())
                .collect();
            (!caps.is_empty()).then(|| (line.trim().to_string(), caps))
        })
    });
    match hit {
        None => format!("FIELD: {name}\nVALUE: N/A\nREFERENCE: N/A"),
        Some((line, values)) => {
            let value = match field.value_kind() {
                ValueKind::Binary => "Yes".to_string(),
                ValueKind::FreeText => {
                    let mut seen = Vec::<String>::new();
                    for v in values {
                        if !seen.iter().any(|s| s.eq_ignore_ascii_case(&v)) {
                            seen.push(v);
                        }
                    }
                    seen.join("; ")
                }
            };
            format!("FIELD: {name}\nVALUE: {value}\nREFERENCE: {line}")
        }
    }
}

impl CompletionBackend for StubBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let payload = &request.prompt.file_payload;
        let fields: Vec<LabelField> = match request.focus {
            Some(f) => vec![f],
            None => request.prompt.section.fields().to_vec(),
        };
        Ok(fields.into_iter().map(|f| answer(f, payload)).collect::<Vec<_>>().join("\n\n"))
    }

    fn identity(&self) -> BackendIdentity {
        BackendIdentity { backend: "stub".into(), model: "regex-heuristics".into() }
    }
}
