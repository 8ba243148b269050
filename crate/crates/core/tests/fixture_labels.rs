mod common;

use std::time::{Duration, Instant};

use common::*;
use repo2label::merge::{EvidenceTriple, RepositoryLabel};
use repo2label::schema::LabelField;
use repo2label::value::{Answer, FieldValue};

const LLM_LINE: &str =
    "LLM_MODEL = os.getenv('LLM_MODEL',os.getenv('OPENAI_API_MODEL', 'gpt-3.5-turbo')).lower()";

const WATERMARK_EXCERPT: &str = r#"print("Creating invisible watermark encoder (see https://github.com/ShieldMnt/invisible-watermark)...")
    wm = "StableDiffusionV1"
    wm_encoder = WatermarkEncoder()
    wm_encoder.set_watermark('bytes', wm.encode('utf-8'))"#;

const DELETE_CONVERSATION: &str = r#"async function deleteConversation(conversationId) {
  const accessToken = await getAccessToken();
  const resp = await fetch(
    `https://chat.openai.com/backend-api/conversation/${conversationId}`,
    {
      method: "PATCH",
      headers: {
        "Content-Type": "application/json",
        Authorization: `Bearer ${accessToken}`,
      },
      body: JSON.stringify({ is_visible: false }),
    }
  )
    .then((r) => r.json())
    .catch(() => ({}));
  if (resp?.success) {
    return true;
  }
  return false;
}"#;

const SAFETY_SETTING: &str = r#"def from_defaults(
    cls,
    temperature: float = 0.7,
    answer_style: int = 1,
    safety_setting: List["genai.SafetySetting"] = [],
) -> "GoogleTextSynthesizer":
    """Create a new Google AQA.

    Example:
      responder = GoogleTextSynthesizer.create(
          temperature=0.7,
          answer_style=AnswerStyle.ABSTRACTIVE,
          safety_setting=[
              SafetySetting(
                  category=HARM_CATEGORY_SEXUALLY_EXPLICIT,
                  threshold=HarmBlockThreshold.BLOCK_LOW_AND_ABOVE,
              ),
          ]
      )"#;

const FLAG_BUTTON: &str = r#"Please click the "Flag" button if you get any inappropriate answers! We will collect those to keep improving our moderator."#;

const DISCLAIMER: &str = "## Disclaimer

As a model capable of generating free form text, the output of the model is not guaranteed to be free of
offensive material, so appropriate caution is advised when using the model.";

const ENCRYPT_TEST: &str = r#"def test_encrypt_decrypt():
    key = Fernet.generate_key()
    service = EncryptionService(key)

    original_text = "Hello, world!"
    encrypted = service.encrypt(original_text)
    decrypted = service.decrypt(encrypted)

    assert original_text == decrypted"#;

const TAXONOMY: &str = "Llama Guard safety taxonomy:

- Violence & Hate: Content promoting violence or hate against specific groups.
- Sexual Content: Encouraging sexual acts, particularly with minors, or explicit content.";

fn triple(path: &str, field: LabelField, value: &str, reference: &str) -> EvidenceTriple {
    EvidenceTriple {
        file_path: path.to_string(),
        field,
        value: value.to_string(),
        reference: reference.to_string(),
    }
}

fn assert_yes_with(label: &RepositoryLabel, expected: EvidenceTriple) {
    let entry = label.field(expected.field);
    assert_eq!(entry.value, FieldValue::Binary(Answer::Yes), "{:?}", expected.field);
    assert!(entry.evidence.contains(&expected), "{:?} evidence: {:#?}", expected.field, entry.evidence);
}

#[test]
fn base_model_triple_for_task_agent() {
    let label = run_replay("babyagi", true).label;
    let entry = label.field(LabelField::BaseModel);
    assert_eq!(entry.value, FieldValue::FreeText(vec!["gpt-3.5-turbo".into()]));
    assert_eq!(
        entry.evidence,
        vec![triple("codeRepos/babyagi/babyagi.py", LabelField::BaseModel, "gpt-3.5-turbo", LLM_LINE)]
    );
}

#[test]
fn watermarking_from_sampling_script() {
    let label = run_replay("stable-diffusion", true).label;
    assert_yes_with(
        &label,
        triple("scripts/txt2img.py", LabelField::AIGeneratedWatermarking, "Yes", WATERMARK_EXCERPT),
    );
}

#[test]
fn one_field_per_single_file_fixture() {
    let cases = [
        ("chat-history", "src/background.js", LabelField::RightToBeForgotten, DELETE_CONVERSATION),
        (
            "rag-guardrail",
            "llama_index/response_synthesizers/google/base.py",
            LabelField::PromptGuardrail,
            SAFETY_SETTING,
        ),
        ("vision-chat", "llava/serve/gradio_web_server.py", LabelField::RightToLodgeComplaints, FLAG_BUTTON),
        ("text-model-card", "README.md", LabelField::RiskNotification, DISCLAIMER),
        ("secure-platform", "platform/tests/test_security.py", LabelField::DataEncryption, ENCRYPT_TEST),
        (
            "moderation-pack",
            "llama_index/packs/llama_guard_moderator/base.py",
            LabelField::ProtectionOfMinors,
            TAXONOMY,
        ),
    ];
    for (repo, path, field, excerpt) in cases {
        let label = run_replay(repo, true).label;
        assert_yes_with(&label, triple(path, field, "Yes", excerpt));
        // nothing else is claimed by these single-file fixtures
        let claimed: Vec<LabelField> = label.fields().filter(|e| !e.evidence.is_empty()).map(|e| e.field).collect();
        assert_eq!(claimed, vec![field], "{repo}");
    }
}

#[test]
fn fixture_examples_run_quickly() {
    let start = Instant::now();
    for repo in REPOS {
        run_replay(repo, true);
    }
    assert!(start.elapsed() < Duration::from_secs(5), "{:?}", start.elapsed());
}

#[test]
fn planted_hallucinations_are_demoted() {
    let sd = run_replay("stable-diffusion", true).label;
    assert_eq!(sd.field(LabelField::ProtectionOfMinors).value, FieldValue::Binary(Answer::No));
    let chat = run_replay("chat-app", true).label;
    assert_eq!(chat.field(LabelField::RightToLodgeComplaints).value, FieldValue::Binary(Answer::No));
    assert_yes_with(
        &chat,
        triple("server/storage.py", LabelField::DataEncryption, "Yes", "cipher = Fernet(settings.ENCRYPTION_KEY)"),
    );

    // without verification the invented citations survive
    let chat_unchecked = run_replay("chat-app", false).label;
    assert_yes_with(
        &chat_unchecked,
        triple(
            "README.md",
            LabelField::RightToLodgeComplaints,
            "Yes",
            "To lodge a complaint, write to complaints@summarize.example.",
        ),
    );
}
