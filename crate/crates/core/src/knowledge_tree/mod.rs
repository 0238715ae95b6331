//! The expert knowledge tree: a rooted task decomposition whose nodes carry
//! background knowledge, logical constraints, operational guidelines and
//! validation criteria.

mod prompt;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::validate::CheckSpec;

pub use prompt::{assemble_prompt, estimate_tokens, PromptBundle, PromptError, DEFAULT_TOKEN_BUDGET, SECTION_HEADINGS};

static BUNDLED_MARINE_PB: &str = include_str!("../../data/trees/marine_pb.json");

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("tree document is not valid JSON: {0}")]
    Parse(String),
    #[error("cannot read tree file: {0}")]
    Io(String),
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("node `{node}` names missing parent `{parent}`")]
    DanglingParent { node: String, parent: String },
    #[error("node `{node}` lists missing child `{child}`")]
    DanglingChild { node: String, child: String },
    #[error("cycle through node `{0}`")]
    CycleDetected(String),
    #[error("multiple roots: {0:?}")]
    MultipleRoots(Vec<String>),
    #[error("declared root `{declared}` does not match parentless node `{actual}`")]
    RootMismatch { declared: String, actual: String },
    #[error("parent/child links of `{node}` and `{other}` disagree")]
    InconsistentLink { node: String, other: String },
    #[error("node `{node}` has malformed check: {reason}")]
    MalformedCheckSpec { node: String, reason: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
}

/// One procedure step, optionally pinning the shape of the expected output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guideline {
    pub step: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_format: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub text: String,
    pub check: Option<CheckSpec>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KnowledgeDimensions {
    pub background_knowledge: Vec<String>,
    pub logical_constraints: Vec<String>,
    pub operational_guidelines: Vec<Guideline>,
    pub validation_criteria: Vec<Criterion>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeNode {
    pub id: String,
    pub label: String,
    pub task_description: String,
    pub parent_id: Option<String>,
    pub child_ids: Vec<String>,
    pub dimensions: KnowledgeDimensions,
    pub category_labels: Option<Vec<String>>,
}

impl KnowledgeNode {
    pub fn is_leaf(&self) -> bool {
        self.child_ids.is_empty()
    }

    pub fn checks(&self) -> impl Iterator<Item = &CheckSpec> {
        self.dimensions.validation_criteria.iter().filter_map(|c| c.check.as_ref())
    }
}

/// Immutable after load; share it freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeTree {
    pub root_id: String,
    pub nodes: BTreeMap<String, KnowledgeNode>,
    pub version: String,
    pub domain: String,
    order: Vec<String>,
}

// ---- file form ----

#[derive(Debug, Serialize, Deserialize)]
struct TreeDocument {
    version: String,
    domain: String,
    root: String,
    nodes: Vec<NodeDocument>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum GuidelineDocument {
    Plain(String),
    Structured(Guideline),
}

#[derive(Debug, Serialize, Deserialize)]
struct CriterionDocument {
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    check: Option<Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeDocument {
    id: String,
    label: String,
    task: String,
    #[serde(default)]
    parent: Option<String>,
    #[serde(default)]
    children: Vec<String>,
    #[serde(default)]
    bk: Vec<String>,
    #[serde(default)]
    lc: Vec<String>,
    #[serde(default)]
    og: Vec<GuidelineDocument>,
    #[serde(default)]
    vc: Vec<CriterionDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    categories: Option<Vec<String>>,
}

/// Loads and validates a tree document.
pub fn load_tree(source: &str) -> Result<KnowledgeTree, TreeError> {
    let doc: TreeDocument = serde_json::from_str(source).map_err(|e| TreeError::Parse(e.to_string()))?;
    build_tree(doc)
}

pub fn load_tree_file(path: &Path) -> Result<KnowledgeTree, TreeError> {
    let text = std::fs::read_to_string(path).map_err(|e| TreeError::Io(format!("{}: {e}", path.display())))?;
    load_tree(&text)
}

/// The bundled marine Pb tree.
pub fn marine_pb_tree() -> KnowledgeTree {
    load_tree(BUNDLED_MARINE_PB).expect("bundled marine Pb tree is valid")
}

pub fn marine_pb_tree_source() -> &'static str {
    BUNDLED_MARINE_PB
}

fn build_tree(doc: TreeDocument) -> Result<KnowledgeTree, TreeError> {
    let mut nodes: BTreeMap<String, KnowledgeNode> = BTreeMap::new();
    let mut order = Vec::with_capacity(doc.nodes.len());
    for nd in doc.nodes {
        if nodes.contains_key(&nd.id) {
            return Err(TreeError::DuplicateId(nd.id));
        }
        let mut criteria = Vec::with_capacity(nd.vc.len());
        for vc in nd.vc {
            let check = match vc.check {
                None | Some(Value::Null) => None,
                Some(raw) => Some(
                    CheckSpec::from_document(&raw)
                        .map_err(|reason| TreeError::MalformedCheckSpec { node: nd.id.clone(), reason })?,
                ),
            };
            criteria.push(Criterion { text: vc.text, check });
        }
        let guidelines = nd
            .og
            .into_iter()
            .map(|g| match g {
                GuidelineDocument::Plain(step) => Guideline { step, output_format: None },
                GuidelineDocument::Structured(g) => g,
            })
            .collect();
        order.push(nd.id.clone());
        nodes.insert(
            nd.id.clone(),
            KnowledgeNode {
                id: nd.id,
                label: nd.label,
                task_description: nd.task,
                parent_id: nd.parent,
                child_ids: nd.children,
                dimensions: KnowledgeDimensions {
                    background_knowledge: nd.bk,
                    logical_constraints: nd.lc,
                    operational_guidelines: guidelines,
                    validation_criteria: criteria,
                },
                category_labels: nd.categories,
            },
        );
    }

    for id in &order {
        let node = &nodes[id];
        if let Some(parent) = &node.parent_id {
            if !nodes.contains_key(parent) {
                return Err(TreeError::DanglingParent { node: id.clone(), parent: parent.clone() });
            }
        }
        if let Some(child) = node.child_ids.iter().find(|c| !nodes.contains_key(*c)) {
            return Err(TreeError::DanglingChild { node: id.clone(), child: child.clone() });
        }
    }

    // Parent chains must terminate.
    let mut terminates: HashMap<&str, bool> = HashMap::new();
    for id in &order {
        let mut seen = BTreeSet::new();
        let mut cur = id.as_str();
        loop {
            if terminates.contains_key(cur) {
                break;
            }
            if !seen.insert(cur) {
                return Err(TreeError::CycleDetected(cur.to_string()));
            }
            match nodes[cur].parent_id.as_deref() {
                Some(p) => cur = p,
                None => break,
            }
        }
        for s in seen {
            terminates.insert(s, true);
        }
    }

    let roots: Vec<String> = order.iter().filter(|id| nodes[*id].parent_id.is_none()).cloned().collect();
    if roots.len() > 1 {
        return Err(TreeError::MultipleRoots(roots));
    }
    let actual_root = roots.into_iter().next().ok_or_else(|| TreeError::CycleDetected(doc.root.clone()))?;
    if actual_root != doc.root {
        return Err(TreeError::RootMismatch { declared: doc.root, actual: actual_root });
    }

    for id in &order {
        let node = &nodes[id];
        if let Some(parent) = &node.parent_id {
            let listed = nodes[parent].child_ids.iter().filter(|c| *c == id).count();
            if listed != 1 {
                return Err(TreeError::InconsistentLink { node: id.clone(), other: parent.clone() });
            }
        }
        for child in &node.child_ids {
            if nodes[child].parent_id.as_deref() != Some(id.as_str()) {
                return Err(TreeError::InconsistentLink { node: id.clone(), other: child.clone() });
            }
        }
    }

    Ok(KnowledgeTree { root_id: doc.root, nodes, version: doc.version, domain: doc.domain, order })
}

impl KnowledgeTree {
    pub fn resolve_node(&self, node_id: &str) -> Result<&KnowledgeNode, TreeError> {
        self.nodes.get(node_id).ok_or_else(|| TreeError::UnknownNode(node_id.to_string()))
    }

    pub fn root(&self) -> &KnowledgeNode {
        &self.nodes[&self.root_id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &KnowledgeNode> {
        self.order.iter().map(|id| &self.nodes[id]).filter(|n| n.is_leaf())
    }

    /// Nodes in document order.
    pub fn iter(&self) -> impl Iterator<Item = &KnowledgeNode> {
        self.order.iter().map(|id| &self.nodes[id])
    }

    /// Root-first path to `node_id`, inclusive.
    pub fn path_to(&self, node_id: &str) -> Result<Vec<&KnowledgeNode>, TreeError> {
        let mut path = vec![self.resolve_node(node_id)?];
        while let Some(parent) = path.last().and_then(|n| n.parent_id.as_deref()) {
            path.push(&self.nodes[parent]);
        }
        path.reverse();
        Ok(path)
    }

    /// Executable checks along the root→node path, root first. Prose-only
    /// criteria are left out.
    pub fn collect_checks(&self, node_id: &str) -> Result<Vec<CheckSpec>, TreeError> {
        Ok(self.path_to(node_id)?.into_iter().flat_map(|n| n.checks().cloned()).collect())
    }

    pub fn to_json(&self) -> String {
        let doc = TreeDocument {
            version: self.version.clone(),
            domain: self.domain.clone(),
            root: self.root_id.clone(),
            nodes: self
                .iter()
                .map(|n| NodeDocument {
                    id: n.id.clone(),
                    label: n.label.clone(),
                    task: n.task_description.clone(),
                    parent: n.parent_id.clone(),
                    children: n.child_ids.clone(),
                    bk: n.dimensions.background_knowledge.clone(),
                    lc: n.dimensions.logical_constraints.clone(),
                    og: n
                        .dimensions
                        .operational_guidelines
                        .iter()
                        .map(|g| GuidelineDocument::Structured(g.clone()))
                        .collect(),
                    vc: n
                        .dimensions
                        .validation_criteria
                        .iter()
                        .map(|c| CriterionDocument { text: c.text.clone(), check: c.check.as_ref().map(CheckSpec::to_document) })
                        .collect(),
                    categories: n.category_labels.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("tree serializes")
    }
}
