//! The label format: fifteen fields in four sections, their explanations,
//! value kinds, and the regulations each field is drawn from.
//!
//! Everything here is compiled-in static data. The provenance tallies are
//! checked at compile time by [`EXPECTED_TALLIES`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Version tag written into every machine-readable label and catalog export.
pub const SCHEMA_VERSION: &str = "gai-privacy-label/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LabelSection {
    BasicInfo,
    DataRights,
    RiskRelated,
    AdditionalInfo,
}

impl LabelSection {
    pub const ALL: [LabelSection; 4] = [
        LabelSection::BasicInfo,
        LabelSection::DataRights,
        LabelSection::RiskRelated,
        LabelSection::AdditionalInfo,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            LabelSection::BasicInfo => "Basic Info",
            LabelSection::DataRights => "Data Rights",
            LabelSection::RiskRelated => "Risk Related",
            LabelSection::AdditionalInfo => "Additional Info",
        }
    }

    /// Name of the extraction unit that covers this section.
    pub fn unit_name(self) -> &'static str {
        match self {
            LabelSection::BasicInfo => "Basic Info Extractor",
            LabelSection::DataRights => "Data Rights Info Extractor",
            LabelSection::RiskRelated => "Risk Related Info Extractor",
            LabelSection::AdditionalInfo => "Additional Info Extractor",
        }
    }

    pub fn fields(self) -> &'static [LabelField] {
        use LabelField::*;
        match self {
            LabelSection::BasicInfo => &[
                BaseModel,
                ToolModality,
                ToolFunctionality,
                WorkingDetails,
                ControllerContact,
                TargetUsers,
            ],
            LabelSection::DataRights => &[
                DataRetention,
                RightToAccess,
                RightToBeForgotten,
                RightToLodgeComplaints,
            ],
            LabelSection::RiskRelated => &[AIGeneratedWatermarking, PromptGuardrail, RiskNotification],
            LabelSection::AdditionalInfo => &[DataEncryption, ProtectionOfMinors],
        }
    }

    pub fn value_kind(self) -> ValueKind {
        match self {
            LabelSection::BasicInfo => ValueKind::FreeText,
            _ => ValueKind::Binary,
        }
    }

    pub fn parse_name(name: &str) -> Option<LabelSection> {
        let key = name_key(name);
        LabelSection::ALL
            .into_iter()
            .find(|s| name_key(s.display_name()) == key || name_key(&format!("{s:?}")) == key)
    }
}

impl fmt::Display for LabelSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LabelField {
    BaseModel,
    ToolModality,
    ToolFunctionality,
    WorkingDetails,
    ControllerContact,
    TargetUsers,
    DataRetention,
    RightToAccess,
    RightToBeForgotten,
    RightToLodgeComplaints,
    AIGeneratedWatermarking,
    PromptGuardrail,
    RiskNotification,
    DataEncryption,
    ProtectionOfMinors,
}

impl LabelField {
    /// All fields in catalog order (sections in order, fields in table order).
    pub const ALL: [LabelField; 15] = [
        LabelField::BaseModel,
        LabelField::ToolModality,
        LabelField::ToolFunctionality,
        LabelField::WorkingDetails,
        LabelField::ControllerContact,
        LabelField::TargetUsers,
        LabelField::DataRetention,
        LabelField::RightToAccess,
        LabelField::RightToBeForgotten,
        LabelField::RightToLodgeComplaints,
        LabelField::AIGeneratedWatermarking,
        LabelField::PromptGuardrail,
        LabelField::RiskNotification,
        LabelField::DataEncryption,
        LabelField::ProtectionOfMinors,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            LabelField::BaseModel => "Base Model",
            LabelField::ToolModality => "Tool Modality",
            LabelField::ToolFunctionality => "Tool Functionality",
            LabelField::WorkingDetails => "Working Details",
            LabelField::ControllerContact => "Controller Contact",
            LabelField::TargetUsers => "Target Users",
            LabelField::DataRetention => "Data Retention",
            LabelField::RightToAccess => "Right to Access",
            LabelField::RightToBeForgotten => "Right to be Forgotten",
            LabelField::RightToLodgeComplaints => "Right to Lodge Complaints",
            LabelField::AIGeneratedWatermarking => "AI-generated Watermarking",
            LabelField::PromptGuardrail => "Prompt Guardrail",
            LabelField::RiskNotification => "Risk Notification",
            LabelField::DataEncryption => "Data Encryption",
            LabelField::ProtectionOfMinors => "Protection of Minors",
        }
    }

    pub fn section(self) -> LabelSection {
        use LabelField::*;
        match self {
            BaseModel | ToolModality | ToolFunctionality | WorkingDetails | ControllerContact
            | TargetUsers => LabelSection::BasicInfo,
            DataRetention | RightToAccess | RightToBeForgotten | RightToLodgeComplaints => {
                LabelSection::DataRights
            }
            AIGeneratedWatermarking | PromptGuardrail | RiskNotification => {
                LabelSection::RiskRelated
            }
            DataEncryption | ProtectionOfMinors => LabelSection::AdditionalInfo,
        }
    }

    pub fn value_kind(self) -> ValueKind {
        self.section().value_kind()
    }

    pub fn explanation(self) -> &'static str {
        spec_entry(self).explanation
    }

    pub fn example_answer(self) -> &'static str {
        spec_entry(self).example_answer
    }

    /// Position in [`LabelField::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    /// Resolves a display name or identifier, ignoring case, spacing,
    /// hyphens and apostrophes ("Right to be forgotten", "RightToBeForgotten").
    pub fn parse_name(name: &str) -> Option<LabelField> {
        let key = name_key(name);
        if key.is_empty() {
            return None;
        }
        LabelField::ALL.into_iter().find(|f| {
            name_key(f.display_name()) == key || name_key(&format!("{f:?}")) == key
        })
    }
}

impl fmt::Display for LabelField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownField(pub String);

impl fmt::Display for UnknownField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown label field {:?}", self.0)
    }
}

impl std::error::Error for UnknownField {}

impl FromStr for LabelField {
    type Err = UnknownField;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LabelField::parse_name(s).ok_or_else(|| UnknownField(s.to_string()))
    }
}

fn name_key(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValueKind {
    FreeText,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Regulation {
    #[serde(rename = "GDPR")]
    Gdpr,
    #[serde(rename = "CCPA")]
    Ccpa,
    #[serde(rename = "PIPL")]
    Pipl,
    MeasGAI,
    ReqGAI,
    PrinGAI,
    MAIFGAI,
    AIAct,
}

impl Regulation {
    pub fn short_name(self) -> &'static str {
        match self {
            Regulation::Gdpr => "GDPR",
            Regulation::Ccpa => "CCPA",
            Regulation::Pipl => "PIPL",
            Regulation::MeasGAI => "Meas-GAI",
            Regulation::ReqGAI => "Req-GAI",
            Regulation::PrinGAI => "Prin-GAI",
            Regulation::MAIFGAI => "MAIF-GAI",
            Regulation::AIAct => "AI Act",
        }
    }

    pub fn full_name(self) -> &'static str {
        match self {
            Regulation::Gdpr => "General Data Protection Regulation",
            Regulation::Ccpa => "California Consumer Privacy Act",
            Regulation::Pipl => "Personal Information Protection Law",
            Regulation::MeasGAI => "Administrative Measures for Generative Artificial Intelligence Services",
            Regulation::ReqGAI => "Basic Security Requirements for Generative Artificial Intelligence Service",
            Regulation::PrinGAI => {
                "Principles for Responsible, Trustworthy and Privacy-Protective Generative AI Technologies"
            }
            Regulation::MAIFGAI => "Model AI Governance Framework for Generative AI",
            Regulation::AIAct => "Artificial Intelligence Act",
        }
    }

    pub fn region(self) -> &'static str {
        match self {
            Regulation::Gdpr | Regulation::AIAct => "EU",
            Regulation::Ccpa => "California",
            Regulation::Pipl | Regulation::MeasGAI | Regulation::ReqGAI => "China",
            Regulation::PrinGAI => "Canada",
            Regulation::MAIFGAI => "Singapore",
        }
    }

    pub fn is_gai_specific(self) -> bool {
        !matches!(self, Regulation::Gdpr | Regulation::Ccpa | Regulation::Pipl)
    }
}

/// One regulation backing a field, with its article references verbatim.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegulationCitation {
    pub regulation: Regulation,
    pub articles: &'static [&'static str],
}

impl RegulationCitation {
    pub fn region(&self) -> &'static str {
        self.regulation.region()
    }
}

/// Static description of one field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldSpec {
    pub field: LabelField,
    pub explanation: &'static str,
    pub example_answer: &'static str,
    pub provenance: &'static [RegulationCitation],
}

impl FieldSpec {
    pub fn section(&self) -> LabelSection {
        self.field.section()
    }

    pub fn value_kind(&self) -> ValueKind {
        self.field.value_kind()
    }
}

const fn cite(regulation: Regulation, articles: &'static [&'static str]) -> RegulationCitation {
    RegulationCitation { regulation, articles }
}

use Regulation::*;

// Tool Type is tallied once in the regulations; Tool Modality and Tool
// Functionality both carry its citations.
const TOOL_TYPE: &[RegulationCitation] = &[
    cite(MeasGAI, &["Art.10"]),
    cite(ReqGAI, &["Art.6.(c).1"]),
    cite(PrinGAI, &["Art.4"]),
    cite(MAIFGAI, &["Art.3.(f)"]),
];

/// Catalog rows, in [`LabelField::ALL`] order.
static CATALOG: [FieldSpec; 15] = [
    FieldSpec {
        field: LabelField::BaseModel,
        explanation: "The names of foundation models that are embedded in this tool. (e.g., GPT-4, GPT-3.5, Ernie, etc)",
        example_answer: "GPT-3.5/GPT-4/...",
        provenance: &[
            cite(MeasGAI, &["Art.7"]),
            cite(ReqGAI, &["Art.6.(a)", "Art.6.(c).1", "Art.6.(c).2"]),
            cite(MAIFGAI, &["Art.3.(b)"]),
        ],
    },
    FieldSpec {
        field: LabelField::ToolModality,
        explanation: "The Modalities of information processed by the reception and response of the tool, respectively. (e.g., text-to-text, image to text)",
        example_answer: "Text to Image",
        provenance: TOOL_TYPE,
    },
    FieldSpec {
        field: LabelField::ToolFunctionality,
        explanation: "The major capabilities and services provided to users to meet their needs and solve specific problems.",
        example_answer: "Image Generation",
        provenance: TOOL_TYPE,
    },
    FieldSpec {
        field: LabelField::WorkingDetails,
        explanation: "Comprehensive details provided to users about this tool. (e.g., documents about how the system works, data processing process)",
        example_answer: "A link to the GAI app documentation",
        provenance: &[cite(PrinGAI, &["Art.5"]), cite(MAIFGAI, &["Art.3.(d)", "Art.3.(g)"])],
    },
    FieldSpec {
        field: LabelField::ControllerContact,
        explanation: "The publicly available contact of the GAI app developers*. (e.g., an email address)",
        example_answer: "abc@company.com",
        provenance: &[cite(Gdpr, &["Art.13.1.(a)"]), cite(Pipl, &["Art.17.(1)", "Art.52"])],
    },
    FieldSpec {
        field: LabelField::TargetUsers,
        explanation: "The intended audience or primary user base for this service.",
        example_answer: "Researchers",
        provenance: &[cite(MeasGAI, &["Art.10"]), cite(ReqGAI, &["Art.6.(c).1"])],
    },
    FieldSpec {
        field: LabelField::DataRetention,
        explanation: "The practice of storing data for a specific period of time.",
        example_answer: "Yes/No",
        provenance: &[
            cite(Gdpr, &["Art.13.2.(a)", "Art.14.2.(a)"]),
            cite(Ccpa, &["§1798.100.a.(3)"]),
            cite(Pipl, &["Art.17.(2)", "Art.19"]),
            cite(MeasGAI, &["Art.11"]),
            cite(PrinGAI, &["Art.7"]),
        ],
    },
    FieldSpec {
        field: LabelField::RightToAccess,
        explanation: "The right of users to request to access their collected personal information.",
        example_answer: "Yes/No",
        provenance: &[
            cite(Gdpr, &["Art.13.2.(b)", "14.2.(c)"]),
            cite(Ccpa, &["§1798.110"]),
            cite(Pipl, &["Art.45"]),
            cite(PrinGAI, &["Art.6"]),
        ],
    },
    FieldSpec {
        field: LabelField::RightToBeForgotten,
        explanation: "The right of users to request to erasure or deletion of their personal information.",
        example_answer: "Yes/No",
        provenance: &[
            cite(Gdpr, &["Art.13.2.(c)", "14.2.(d)"]),
            cite(Ccpa, &["§1798.120"]),
            cite(Pipl, &["Art.15"]),
            cite(ReqGAI, &["Art.7.(c)"]),
        ],
    },
    FieldSpec {
        field: LabelField::RightToLodgeComplaints,
        explanation: "The right of users to lodge a complaint with a supervisory authority.",
        example_answer: "Yes/No",
        provenance: &[
            cite(Gdpr, &["Art.13.2.(d)", "14.2.(e)", "Art.13.2.(e)"]),
            cite(Pipl, &["Art.50"]),
            cite(MeasGAI, &["Art.15", "Art.18"]),
            cite(ReqGAI, &["Art.5.2.(b).3", "Art.7.(e)"]),
        ],
    },
    FieldSpec {
        field: LabelField::AIGeneratedWatermarking,
        explanation: "A machine-readable and detectable mark embedded in content generated or modified by GAI systems.",
        example_answer: "Yes/No",
        provenance: &[
            cite(MeasGAI, &["Art.12"]),
            cite(ReqGAI, &["Art.7.(d)"]),
            cite(PrinGAI, &["Art.4"]),
            cite(MAIFGAI, &["Art.7"]),
            cite(AIAct, &["Art. 52"]),
        ],
    },
    FieldSpec {
        field: LabelField::PromptGuardrail,
        explanation: "Comprehensive security protocols implemented to scrutinize both user inputs and system outputs for potential malicious activities. (e.g., employing stringent input/output filtering mechanisms)",
        example_answer: "Yes/No",
        provenance: &[
            cite(ReqGAI, &["Art.6.(b).1", "Art.7.(f).1", "Art.6.(b).2"]),
            cite(PrinGAI, &["Art.8"]),
            cite(MAIFGAI, &["Art.3.(d)", "Art.3"]),
        ],
    },
    FieldSpec {
        field: LabelField::RiskNotification,
        explanation: "A notification that informs users of the relevant risks they may face when using GAI tools. (e.g. copyright disputes)",
        example_answer: "Yes/No",
        provenance: &[
            cite(Pipl, &["Art.51"]),
            cite(MeasGAI, &["Art.14"]),
            cite(ReqGAI, &["Art.5.2.(b).4", "Art.6.(b).2"]),
            cite(PrinGAI, &["Art.4"]),
            cite(MAIFGAI, &["Art.3.(e)", "Art.6.(a)"]),
        ],
    },
    FieldSpec {
        field: LabelField::DataEncryption,
        explanation: "Data are encrypted and transferred over a secure connection.",
        example_answer: "Yes/No",
        provenance: &[cite(Pipl, &["Art.51.(3)"]), cite(PrinGAI, &["Art.3"])],
    },
    FieldSpec {
        field: LabelField::ProtectionOfMinors,
        explanation: "Special treatment made for the protection and convenience of children.",
        example_answer: "Yes/No",
        provenance: &[
            cite(Pipl, &["Art.31"]),
            cite(MeasGAI, &["Art.10"]),
            cite(ReqGAI, &["Art.7.(a).3", "Art.7.(a).4"]),
        ],
    },
];

/// Number of regulations behind each field, in [`LabelField::ALL`] order.
pub const EXPECTED_TALLIES: [usize; 15] = [3, 4, 4, 2, 2, 2, 5, 4, 4, 4, 5, 3, 5, 2, 3];

const _: () = {
    let mut i = 0;
    while i < 15 {
        assert!(CATALOG[i].field as usize == i, "catalog out of order");
        assert!(CATALOG[i].provenance.len() == EXPECTED_TALLIES[i], "provenance tally mismatch");
        assert!(!CATALOG[i].explanation.is_empty());
        let mut j = 0;
        while j < CATALOG[i].provenance.len() {
            assert!(!CATALOG[i].provenance[j].articles.is_empty());
            j += 1;
        }
        i += 1;
    }
};

fn spec_entry(field: LabelField) -> &'static FieldSpec {
    &CATALOG[field.index()]
}

/// All fifteen field specs in section order.
pub fn field_catalog() -> &'static [FieldSpec] {
    &CATALOG
}

pub fn field_spec(field: LabelField) -> &'static FieldSpec {
    spec_entry(field)
}

pub fn provenance_for(field: LabelField) -> &'static [RegulationCitation] {
    spec_entry(field).provenance
}

/// The fields and explanations one extraction unit asks about.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitDefinition {
    pub section: LabelSection,
    pub fields: Vec<(LabelField, &'static str)>,
}

impl UnitDefinition {
    pub fn name(&self) -> &'static str {
        self.section.unit_name()
    }

    pub fn contains(&self, field: LabelField) -> bool {
        self.fields.iter().any(|(f, _)| *f == field)
    }

    pub fn field_ids(&self) -> impl Iterator<Item = LabelField> + '_ {
        self.fields.iter().map(|(f, _)| *f)
    }
}

pub fn unit_for_section(section: LabelSection) -> UnitDefinition {
    UnitDefinition {
        section,
        fields: section
            .fields()
            .iter()
            .map(|&f| (f, f.explanation()))
            .collect(),
    }
}

pub fn all_units() -> Vec<UnitDefinition> {
    LabelSection::ALL.into_iter().map(unit_for_section).collect()
}

/// Serializable form of the catalog for `catalog export`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogDocument {
    pub schema_version: String,
    pub sections: Vec<CatalogSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogSection {
    pub id: LabelSection,
    pub name: String,
    pub unit: String,
    pub value_kind: ValueKind,
    pub fields: Vec<CatalogField>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogField {
    pub id: LabelField,
    pub name: String,
    pub value_kind: ValueKind,
    pub explanation: String,
    pub example_answer: String,
    pub provenance: Vec<CatalogCitation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogCitation {
    pub regulation: Regulation,
    pub name: String,
    pub region: String,
    pub articles: Vec<String>,
}

pub fn catalog_document() -> CatalogDocument {
    CatalogDocument {
        schema_version: SCHEMA_VERSION.to_string(),
        sections: LabelSection::ALL
            .into_iter()
            .map(|section| CatalogSection {
                id: section,
                name: section.display_name().to_string(),
                unit: section.unit_name().to_string(),
                value_kind: section.value_kind(),
                fields: section.fields().iter().map(|&f| catalog_field(f)).collect(),
            })
            .collect(),
    }
}

fn catalog_field(field: LabelField) -> CatalogField {
    let spec = field_spec(field);
    CatalogField {
        id: field,
        name: field.display_name().to_string(),
        value_kind: field.value_kind(),
        explanation: spec.explanation.to_string(),
        example_answer: spec.example_answer.to_string(),
        provenance: spec
            .provenance
            .iter()
            .map(|c| CatalogCitation {
                regulation: c.regulation,
                name: c.regulation.short_name().to_string(),
                region: c.region().to_string(),
                articles: c.articles.iter().map(|a| a.to_string()).collect(),
            })
            .collect(),
    }
}
