//! Paper and table classification.
//!
//! Labels serialize as the exact taxonomy strings the tree offers the model.
//! A reply that cannot be read as one of them is a failed attempt; once the
//! attempts run out the subject is `Unclassified`.

use serde::{Deserialize, Serialize};

use crate::corpus::{ParsedPaper, TableBlock};
use crate::digest::prompt_digest;
use crate::extract::MeasurementType;
use crate::gateway::OutputShape;
use crate::stage::{StageContext, StageError};
use crate::validate::{execute_with_rollback, PipelineState, RollbackError, StepFailure};

pub const PAPER_NODE: &str = "paper_classification";
pub const TABLE_NODE: &str = "table_classification";

const LABEL_TOKENS: usize = 256;

pub trait Label: Copy + Eq + Serialize + Sized + 'static {
    const ALL: &'static [Self];
    const UNCLASSIFIED: Self;
    fn label(self) -> &'static str;

    fn from_label(text: &str) -> Option<Self> {
        let text = text.trim();
        Self::ALL.iter().copied().find(|l| l.label() == text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PaperCategory {
    #[serde(rename = "Marine Pb conc.")]
    MarinePbConc,
    #[serde(rename = "Marine 210Pb")]
    Marine210Pb,
    #[serde(rename = "Marine Pb isotopes ratios")]
    MarinePbIsotopeRatios,
    #[serde(rename = "Marine Pb (non-target)")]
    MarinePbNonTarget,
    #[serde(rename = "Atmospheric Pb")]
    AtmosphericPb,
    #[serde(rename = "Terrestrial Pb")]
    TerrestrialPb,
    #[serde(rename = "Analytical Pb")]
    AnalyticalPb,
    #[serde(rename = "Irrelevant \"Pb\"")]
    IrrelevantPb,
    #[serde(rename = "Other marine elements")]
    OtherMarineElements,
    #[serde(rename = "Unrelated topics")]
    UnrelatedTopics,
    Unclassified,
}

/// Coarse grouping used for the three-compartment view of paper labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compartment {
    MarinePb,
    Atmospheric,
    Terrestrial,
    Other,
}

impl PaperCategory {
    pub const TARGETS: [PaperCategory; 3] =
        [PaperCategory::MarinePbConc, PaperCategory::Marine210Pb, PaperCategory::MarinePbIsotopeRatios];

    pub fn is_target(self) -> bool {
        Self::TARGETS.contains(&self)
    }

    pub fn compartment(self) -> Compartment {
        match self {
            PaperCategory::MarinePbConc
            | PaperCategory::Marine210Pb
            | PaperCategory::MarinePbIsotopeRatios
            | PaperCategory::MarinePbNonTarget => Compartment::MarinePb,
            PaperCategory::AtmosphericPb => Compartment::Atmospheric,
            PaperCategory::TerrestrialPb => Compartment::Terrestrial,
            _ => Compartment::Other,
        }
    }
}

impl Label for PaperCategory {
    const ALL: &'static [Self] = &[
        PaperCategory::MarinePbConc,
        PaperCategory::Marine210Pb,
        PaperCategory::MarinePbIsotopeRatios,
        PaperCategory::MarinePbNonTarget,
        PaperCategory::AtmosphericPb,
        PaperCategory::TerrestrialPb,
        PaperCategory::AnalyticalPb,
        PaperCategory::IrrelevantPb,
        PaperCategory::OtherMarineElements,
        PaperCategory::UnrelatedTopics,
    ];
    const UNCLASSIFIED: Self = PaperCategory::Unclassified;

    fn label(self) -> &'static str {
        match self {
            PaperCategory::MarinePbConc => "Marine Pb conc.",
            PaperCategory::Marine210Pb => "Marine 210Pb",
            PaperCategory::MarinePbIsotopeRatios => "Marine Pb isotopes ratios",
            PaperCategory::MarinePbNonTarget => "Marine Pb (non-target)",
            PaperCategory::AtmosphericPb => "Atmospheric Pb",
            PaperCategory::TerrestrialPb => "Terrestrial Pb",
            PaperCategory::AnalyticalPb => "Analytical Pb",
            PaperCategory::IrrelevantPb => "Irrelevant \"Pb\"",
            PaperCategory::OtherMarineElements => "Other marine elements",
            PaperCategory::UnrelatedTopics => "Unrelated topics",
            PaperCategory::Unclassified => "Unclassified",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TableCategory {
    #[serde(rename = "Target Pb conc.")]
    TargetPbConc,
    #[serde(rename = "Target 210Pb")]
    Target210Pb,
    #[serde(rename = "Target Pb isotope ratios")]
    TargetIsotopeRatios,
    #[serde(rename = "Non-target")]
    NonTarget,
    Unclassified,
}

impl TableCategory {
    pub const TARGETS: [TableCategory; 3] =
        [TableCategory::TargetPbConc, TableCategory::Target210Pb, TableCategory::TargetIsotopeRatios];

    pub fn is_target(self) -> bool {
        Self::TARGETS.contains(&self)
    }

    /// Measurement types a table of this category may yield.
    pub fn admits(self, mtype: MeasurementType) -> bool {
        match self {
            TableCategory::TargetPbConc => mtype == MeasurementType::PbConc,
            TableCategory::Target210Pb => mtype == MeasurementType::Pb210Conc,
            TableCategory::TargetIsotopeRatios => mtype.is_ratio(),
            TableCategory::NonTarget | TableCategory::Unclassified => false,
        }
    }
}

impl Label for TableCategory {
    const ALL: &'static [Self] = &[
        TableCategory::TargetPbConc,
        TableCategory::Target210Pb,
        TableCategory::TargetIsotopeRatios,
        TableCategory::NonTarget,
    ];
    const UNCLASSIFIED: Self = TableCategory::Unclassified;

    fn label(self) -> &'static str {
        match self {
            TableCategory::TargetPbConc => "Target Pb conc.",
            TableCategory::Target210Pb => "Target 210Pb",
            TableCategory::TargetIsotopeRatios => "Target Pb isotope ratios",
            TableCategory::NonTarget => "Non-target",
            TableCategory::Unclassified => "Unclassified",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationResult<L> {
    pub subject_id: String,
    pub label: L,
    pub rationale: String,
    /// Empty when no prompt was sent.
    pub bundle_digest: String,
}

pub fn table_subject(paper_id: &str, table_id: &str) -> String {
    format!("{paper_id}/{table_id}")
}

fn classify<L: Label>(
    ctx: &StageContext<'_>,
    state: &mut PipelineState,
    node_id: &str,
    step_id: &str,
    subject_id: &str,
    context: &str,
) -> Result<ClassificationResult<L>, StageError> {
    let bundle = ctx.prompt(node_id, context)?;
    let digest = prompt_digest(&bundle.system_text, &bundle.user_text);
    let tag = format!("{step_id}|{subject_id}");
    let outcome = execute_with_rollback(state, step_id, subject_id, &digest, ctx.max_attempts, |attempt| {
        let reply = ctx.ask::<(L, String)>(&bundle, &tag, attempt, LABEL_TOKENS, &OutputShape::Label)?;
        let raw = reply["label"].as_str().unwrap_or_default();
        let label = L::from_label(raw).ok_or_else(|| StepFailure::Unparseable(format!("label `{raw}` is not in the taxonomy")))?;
        let rationale = reply.get("rationale").and_then(|r| r.as_str()).unwrap_or_default().to_string();
        Ok((label, rationale))
    });
    let (label, rationale) = match outcome {
        Ok(found) => found,
        Err(RollbackError::QuarantinedSubject { reason, .. }) => (L::UNCLASSIFIED, reason),
        Err(RollbackError::Backend(e)) => return Err(e.into()),
    };
    Ok(ClassificationResult { subject_id: subject_id.to_string(), label, rationale, bundle_digest: digest })
}

/// Labels a paper from its title and abstract, plus section text when
/// `full_text` is set.
pub fn classify_paper(
    paper: &ParsedPaper,
    full_text: bool,
    ctx: &StageContext<'_>,
    state: &mut PipelineState,
) -> Result<ClassificationResult<PaperCategory>, StageError> {
    if paper.title.trim().is_empty() && paper.abstract_text.trim().is_empty() {
        return Ok(ClassificationResult {
            subject_id: paper.paper_id.clone(),
            label: PaperCategory::Unclassified,
            rationale: "no title or abstract".into(),
            bundle_digest: String::new(),
        });
    }
    classify(ctx, state, PAPER_NODE, "classify_paper", &paper.paper_id, &paper.classification_text(full_text))
}

/// Labels one table of a target paper. Tables without data rows, and tables
/// of non-target papers, are `NonTarget` without a backend call.
pub fn classify_table(
    paper: &ParsedPaper,
    table: &TableBlock,
    host_category: PaperCategory,
    ctx: &StageContext<'_>,
    state: &mut PipelineState,
) -> Result<ClassificationResult<TableCategory>, StageError> {
    let subject = table_subject(&paper.paper_id, &table.table_id);
    let short_circuit = if table.data_rows.is_empty() {
        Some("table has no data rows")
    } else if !host_category.is_target() {
        Some("host paper is not a target paper")
    } else {
        None
    };
    if let Some(reason) = short_circuit {
        return Ok(ClassificationResult {
            subject_id: subject,
            label: TableCategory::NonTarget,
            rationale: reason.into(),
            bundle_digest: String::new(),
        });
    }
    let context = format!(
        "Paper: {}\nPaper category: {}\n{}",
        paper.title,
        host_category.label(),
        table.render()
    );
    classify(ctx, state, TABLE_NODE, "classify_table", &subject, &context)
}
