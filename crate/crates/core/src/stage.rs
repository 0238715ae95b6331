//! Shared plumbing for backend-driven steps: prompt assembly from a tree
//! node and one structured completion per attempt.

use serde_json::Value;
use thiserror::Error;

use crate::gateway::{parse_structured, CompletionRequest, Gateway, GatewayError, OutputShape};
use crate::knowledge_tree::{assemble_prompt, KnowledgeTree, PromptBundle, PromptError, TreeError};
use crate::validate::{attempt_tag, StepFailure, DEFAULT_MAX_ATTEMPTS};

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Backend(#[from] GatewayError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// What every backend step needs: the tree, the gateway and the limits.
#[derive(Clone, Copy)]
pub struct StageContext<'a> {
    pub tree: &'a KnowledgeTree,
    pub gateway: &'a Gateway,
    pub max_attempts: u32,
    pub token_budget: usize,
}

impl<'a> StageContext<'a> {
    pub fn new(tree: &'a KnowledgeTree, gateway: &'a Gateway) -> Self {
        StageContext {
            tree,
            gateway,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            token_budget: crate::knowledge_tree::DEFAULT_TOKEN_BUDGET,
        }
    }

    pub fn prompt(&self, node_id: &str, context: &str) -> Result<PromptBundle, StageError> {
        let node = self.tree.resolve_node(node_id)?;
        Ok(assemble_prompt(node, context, self.token_budget)?)
    }

    /// One attempt: complete `bundle` under `base_tag` and parse the reply.
    pub fn ask<T>(
        &self,
        bundle: &PromptBundle,
        base_tag: &str,
        attempt: u32,
        max_output_tokens: usize,
        shape: &OutputShape,
    ) -> Result<Value, StepFailure<T>> {
        let request = CompletionRequest::new(bundle.clone(), max_output_tokens, attempt_tag(base_tag, attempt));
        let completion = self.gateway.complete(&request).map_err(StepFailure::Backend)?;
        parse_structured(&completion.text, shape).map_err(|e| StepFailure::Unparseable(e.to_string()))
    }
}
