use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::KnowledgeNode;
use crate::digest::sha256_hex;

pub const DEFAULT_TOKEN_BUDGET: usize = 16_384;

pub const SECTION_HEADINGS: [&str; 4] = [
    "## Background Knowledge (BK)",
    "## Logical Constraints (LC)",
    "## Operational Guidelines (OG)",
    "## Validation Criteria (VC)",
];

const PAYLOAD_MARKER: &str = "=== TASK INPUT ===";

const SYSTEM_TEXT: &str = "You are a scientific data integration agent. Apply the knowledge sections in the user \
message and answer with JSON only, in the requested output format.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub output_schema_hint: String,
    pub source_node_id: String,
    pub context_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("empty task context for node `{0}`")]
    EmptyContext(String),
    #[error("prompt for node `{node}` needs ~{tokens} tokens, budget is {budget}")]
    ContextTooLarge { node: String, tokens: usize, budget: usize },
}

/// Rough token count: one token per four bytes, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

fn push_list(out: &mut String, heading: &str, items: impl ExactSizeIterator<Item = String>) {
    out.push_str(heading);
    out.push('\n');
    if items.len() == 0 {
        out.push_str("none\n");
    }
    for item in items {
        let _ = writeln!(out, "- {item}");
    }
    out.push('\n');
}

fn schema_hint(node: &KnowledgeNode) -> String {
    let formats: Vec<&str> = node
        .dimensions
        .operational_guidelines
        .iter()
        .filter_map(|g| g.output_format.as_deref())
        .collect();
    if !formats.is_empty() {
        return formats.join("\n");
    }
    match &node.category_labels {
        Some(labels) => format!(
            "{{\"label\": one of [{}], \"rationale\": string}}",
            labels.iter().map(|l| format!("{l:?}")).collect::<Vec<_>>().join(", ")
        ),
        None => "{}".to_string(),
    }
}

/// Renders a node's knowledge plus a task payload into a prompt. Sections are
/// always emitted in BK, LC, OG, VC order; empty dimensions read "none".
pub fn assemble_prompt(node: &KnowledgeNode, task_context: &str, token_budget: usize) -> Result<PromptBundle, PromptError> {
    if task_context.trim().is_empty() {
        return Err(PromptError::EmptyContext(node.id.clone()));
    }
    let dims = &node.dimensions;
    let mut user = String::new();
    let _ = writeln!(user, "Task: {}\n{}\n", node.label, node.task_description);
    push_list(&mut user, SECTION_HEADINGS[0], dims.background_knowledge.iter().cloned());
    push_list(&mut user, SECTION_HEADINGS[1], dims.logical_constraints.iter().cloned());

    user.push_str(SECTION_HEADINGS[2]);
    user.push('\n');
    if dims.operational_guidelines.is_empty() {
        user.push_str("none\n");
    }
    for (i, g) in dims.operational_guidelines.iter().enumerate() {
        let _ = writeln!(user, "{}. {}", i + 1, g.step);
        if let Some(fmt) = &g.output_format {
            let _ = writeln!(user, "   Output format: {fmt}");
        }
    }
    user.push('\n');

    push_list(&mut user, SECTION_HEADINGS[3], dims.validation_criteria.iter().map(|c| c.text.clone()));

    if let Some(labels) = &node.category_labels {
        let _ = writeln!(user, "Allowed labels: {}\n", labels.join(" | "));
    }
    user.push_str(PAYLOAD_MARKER);
    user.push('\n');
    user.push_str(task_context.trim_end());
    user.push('\n');

    let bundle = PromptBundle {
        system_text: SYSTEM_TEXT.to_string(),
        user_text: user,
        output_schema_hint: schema_hint(node),
        source_node_id: node.id.clone(),
        context_digest: sha256_hex(task_context.as_bytes()),
    };
    let tokens = estimate_tokens(&bundle.system_text) + estimate_tokens(&bundle.user_text);
    if tokens > token_budget {
        return Err(PromptError::ContextTooLarge { node: node.id.clone(), tokens, budget: token_budget });
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge_tree::{marine_pb_tree, Guideline, KnowledgeDimensions};
    use proptest::prelude::*;

    fn node(bk: &[&str]) -> KnowledgeNode {
        KnowledgeNode {
            id: "n".into(),
            label: "Node".into(),
            task_description: "do the thing".into(),
            parent_id: None,
            child_ids: vec![],
            dimensions: KnowledgeDimensions {
                background_knowledge: bk.iter().map(|s| s.to_string()).collect(),
                ..Default::default()
            },
            category_labels: None,
        }
    }

    #[test]
    fn four_sections_in_order() {
        let b = assemble_prompt(&node(&["Pb is a trace metal"]), "classify this abstract", DEFAULT_TOKEN_BUDGET).unwrap();
        let positions: Vec<usize> = SECTION_HEADINGS.iter().map(|h| b.user_text.find(h).expect("heading present")).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        for h in SECTION_HEADINGS {
            assert_eq!(b.user_text.matches(h).count(), 1);
        }
        assert_eq!(b.user_text.matches("## ").count(), 4);
        assert_eq!(b.user_text.matches("\nnone\n").count(), 3);
        assert!(b.user_text.trim_end().ends_with("classify this abstract"));
    }

    #[test]
    fn deterministic_digest() {
        let n = node(&["x"]);
        let a = assemble_prompt(&n, "ctx", DEFAULT_TOKEN_BUDGET).unwrap();
        let b = assemble_prompt(&n, "ctx", DEFAULT_TOKEN_BUDGET).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.context_digest, b.context_digest);
    }

    #[test]
    fn budget_and_empty_context() {
        let n = node(&[]);
        assert!(matches!(assemble_prompt(&n, "  ", 1000), Err(PromptError::EmptyContext(_))));
        assert!(matches!(assemble_prompt(&n, &"x".repeat(10_000), 100), Err(PromptError::ContextTooLarge { .. })));
    }

    #[test]
    fn output_format_fragment_is_verbatim() {
        let tree = marine_pb_tree();
        let n = tree.resolve_node("table_classification").unwrap();
        let fragment = n
            .dimensions
            .operational_guidelines
            .iter()
            .find_map(|g: &Guideline| g.output_format.clone())
            .expect("table classification node pins an output format");
        let b = assemble_prompt(n, "Caption: Dissolved Pb (pmol/kg) at station K1", DEFAULT_TOKEN_BUDGET).unwrap();
        assert!(b.user_text.contains(&fragment));
        assert!(b.output_schema_hint.contains(&fragment));
    }

    proptest! {
        #[test]
        fn pure_in_node_and_context(ctx in "[a-zA-Z0-9 ,.]{1,200}") {
            prop_assume!(!ctx.trim().is_empty());
            let n = node(&["Pb"]);
            let a = assemble_prompt(&n, &ctx, DEFAULT_TOKEN_BUDGET).unwrap();
            let b = assemble_prompt(&n.clone(), &ctx.clone(), DEFAULT_TOKEN_BUDGET).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
