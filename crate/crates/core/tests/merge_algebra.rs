use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::sample::subsequence;
use repo2label::extract::BackendIdentity;
use repo2label::merge::{assemble_repository_label, join, merge_field, FileSheet, LabelMetadata, MergedField, RepoInfo};
use repo2label::render::render_machine;
use repo2label::schema::LabelField;
use repo2label::value::{Answer, FieldValue};
use repo2label::verify::{VerificationStatus, VerifiedField};

const PATHS: [&str; 6] = ["README.md", "a.py", "b/c.py", "docs/x.md", "src/main.rs", "z.js"];
const FIELDS: [LabelField; 4] =
    [LabelField::BaseModel, LabelField::ToolModality, LabelField::DataRetention, LabelField::DataEncryption];

fn value_for(field: LabelField) -> BoxedStrategy<FieldValue> {
    match field {
        LabelField::BaseModel | LabelField::ToolModality => prop_oneof![
            Just(FieldValue::NotApplicable),
            proptest::collection::vec(prop::sample::select(vec!["gpt-4", "GPT-4", "llama-2", "text", "Image"]), 1..3)
                .prop_map(|v| FieldValue::FreeText(v.into_iter().map(String::from).collect())),
        ]
        .boxed(),
        _ => prop_oneof![
            Just(FieldValue::NotApplicable),
            Just(FieldValue::Binary(Answer::Yes)),
            Just(FieldValue::Binary(Answer::No)),
        ]
        .boxed(),
    }
}

fn verified(field: LabelField) -> impl Strategy<Value = VerifiedField> {
    (value_for(field), prop::sample::select(vec!["line one", "x = 1", "see README"])).prop_map(move |(value, r)| {
        VerifiedField {
            field,
            reference: (!value.is_na()).then(|| r.to_string()),
            value,
            status: VerificationStatus::VerifiedFirstTry,
            attempts: 1,
        }
    })
}

/// One sheet per path; the same path always carries the same fields.
fn pool() -> impl Strategy<Value = Vec<FileSheet>> {
    let sheet = |path: &'static str| {
        (verified(FIELDS[0]), verified(FIELDS[1]), verified(FIELDS[2]), verified(FIELDS[3])).prop_map(
            move |(a, b, c, d)| FileSheet { file_path: path.to_string(), fields: vec![a, b, c, d] },
        )
    };
    PATHS.iter().map(|p| sheet(p)).collect::<Vec<_>>()
}

fn pairs(sheets: &[FileSheet], field: LabelField) -> Vec<(String, VerifiedField)> {
    sheets
        .iter()
        .flat_map(|s| s.fields.iter().filter(|f| f.field == field).map(|f| (s.file_path.clone(), f.clone())))
        .collect()
}

fn merged(sheets: &[FileSheet], field: LabelField) -> MergedField {
    merge_field(field, &pairs(sheets, field))
}

fn meta() -> LabelMetadata {
    LabelMetadata {
        repo: RepoInfo { source: "fixture".into(), repo_id: "fixture".into(), resolved_commit: None },
        generated_at: "1970-01-01T00:00:00Z".into(),
        backend: BackendIdentity { backend: "test".into(), model: "none".into() },
        mode: "zero-shot".into(),
        verification_enabled: true,
    }
}

fn three_subsets() -> impl Strategy<Value = (Vec<FileSheet>, Vec<FileSheet>, Vec<FileSheet>)> {
    pool().prop_flat_map(|p| {
        let n = p.len();
        (subsequence(p.clone(), 0..=n), subsequence(p.clone(), 0..=n), subsequence(p, 0..=n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn join_is_associative_commutative_idempotent((a, b, c) in three_subsets(), fi in 0usize..4) {
        let field = FIELDS[fi];
        let (ma, mb, mc) = (merged(&a, field), merged(&b, field), merged(&c, field));
        prop_assert_eq!(join(&join(&ma, &mb), &mc), join(&ma, &join(&mb, &mc)));
        prop_assert_eq!(join(&ma, &mb), join(&mb, &ma));
        prop_assert_eq!(join(&ma, &ma), ma.clone());
        // merging the concatenation equals joining the parts
        let mut ab = a.clone();
        ab.extend(b.iter().cloned());
        prop_assert_eq!(merged(&ab, field), join(&ma, &mb));
    }

    #[test]
    fn label_ignores_sheet_order(p in pool(), seed in any::<u64>()) {
        let mut shuffled = p.clone();
        // Fisher-Yates with a tiny LCG; the order only needs to vary
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let a = render_machine(&assemble_repository_label(&p, meta()));
        let b = render_machine(&assemble_repository_label(&shuffled, meta()));
        prop_assert_eq!(a, b);
    }
}

#[test]
fn binary_merge_is_any_yes() {
    let sheets: Vec<FileSheet> = [("a.py", Answer::No), ("b.py", Answer::Yes), ("c.py", Answer::No)]
        .into_iter()
        .map(|(p, a)| FileSheet {
            file_path: p.into(),
            fields: vec![VerifiedField {
                field: LabelField::DataEncryption,
                value: FieldValue::Binary(a),
                reference: Some(format!("ref {p}")),
                status: VerificationStatus::VerifiedFirstTry,
                attempts: 1,
            }],
        })
        .collect();
    let m = merged(&sheets, LabelField::DataEncryption);
    assert_eq!(m.value, FieldValue::Binary(Answer::Yes));
    let paths: BTreeMap<&str, &str> = m.evidence.iter().map(|t| (t.file_path.as_str(), t.value.as_str())).collect();
    assert_eq!(paths, BTreeMap::from([("a.py", "No"), ("b.py", "Yes"), ("c.py", "No")]));
}
