//! Labelled code trees under the recursive, homogeneous and V-variable models.
//!
//! Labels are never stored. Each node's label is a pure function of the master
//! seed and the node's position (its address for the recursive model, its depth
//! for the homogeneous model, its depth and subtree type for the V-variable
//! model), so sampling is independent of traversal order and deepening a
//! realisation never changes shallower labels.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::hash::{combine, mix64, tag, unit_f64};
use crate::rifs::{Label, Rifs};

/// Node address: branch indices, each in `1..=N`.
pub type Address = SmallVec<[u8; 24]>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Recursive,
    Homogeneous,
    VVariable(u32),
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::Recursive => write!(f, "recursive"),
            Model::Homogeneous => write!(f, "homogeneous"),
            Model::VVariable(v) => write!(f, "v_variable({v})"),
        }
    }
}

/// Handle to a node of the full N-ary tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeRef {
    pub depth: usize,
    key: u64,
}

/// A sampled labelled code tree of finite depth.
#[derive(Clone, Debug)]
pub struct Realisation {
    rifs: Arc<Rifs>,
    model: Model,
    depth: usize,
    seed: u64,
    node_base: u64,
    level_base: u64,
    pointer_base: u64,
}

impl Realisation {
    pub fn sample(rifs: Arc<Rifs>, model: Model, depth: usize, seed: u64) -> Result<Self> {
        if depth < 1 {
            return Err(Error::Argument("realisation depth must be at least 1".into()));
        }
        if let Model::VVariable(v) = model {
            if v < 1 {
                return Err(Error::config("model.v", format!("V must be at least 1, got {v}")));
            }
        }
        let m = mix64(seed);
        Ok(Self {
            rifs,
            model,
            depth,
            seed,
            node_base: combine(m, tag("node")),
            level_base: combine(m, tag("level")),
            pointer_base: combine(m, tag("pointer")),
        })
    }

    pub fn rifs(&self) -> &Rifs {
        &self.rifs
    }

    pub fn rifs_arc(&self) -> &Arc<Rifs> {
        &self.rifs
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn root(&self) -> NodeRef {
        let key = match self.model {
            Model::Recursive => self.node_base,
            Model::Homogeneous | Model::VVariable(_) => 0,
        };
        NodeRef { depth: 0, key }
    }

    /// Child along branch `branch` (0-based).
    #[inline]
    pub fn child(&self, node: NodeRef, branch: usize) -> NodeRef {
        let key = match self.model {
            Model::Recursive => combine(node.key, branch as u64 + 1),
            Model::Homogeneous => 0,
            Model::VVariable(v) => {
                let slot = node.key * self.rifs.max_arity() as u64 + branch as u64;
                combine(combine(self.pointer_base, node.depth as u64), slot) % v as u64
            }
        };
        NodeRef { depth: node.depth + 1, key }
    }

    pub fn node_at(&self, address: &[u8]) -> NodeRef {
        address
            .iter()
            .fold(self.root(), |n, &b| self.child(n, b as usize - 1))
    }

    #[inline]
    fn label_key(&self, node: NodeRef) -> u64 {
        match self.model {
            Model::Recursive => node.key,
            Model::Homogeneous => combine(self.level_base, node.depth as u64),
            Model::VVariable(_) => combine(combine(self.level_base, node.depth as u64), node.key),
        }
    }

    #[inline]
    pub fn label(&self, node: NodeRef) -> Label {
        let key = self.label_key(node);
        let mut i = 0u64;
        self.rifs.sample_label(|| {
            i += 1;
            unit_f64(combine(key, i))
        })
    }

    pub fn label_at(&self, address: &[u8]) -> Label {
        self.label(self.node_at(address))
    }

    /// Subtree type of a node in the V-variable model (`None` otherwise).
    pub fn subtree_type(&self, node: NodeRef) -> Option<u64> {
        matches!(self.model, Model::VVariable(_)).then_some(node.key)
    }

    /// Labels of every node of the full N-ary tree down to `depth`, keyed by address.
    /// Exponential in `depth`; meant for inspection of shallow trees.
    pub fn labels(&self, depth: usize) -> Result<BTreeMap<Address, Label>> {
        if depth > self.depth {
            return Err(Error::InsufficientDepth {
                required: depth,
                available: self.depth,
            });
        }
        let mut out = BTreeMap::new();
        let mut frontier = vec![(Address::new(), self.root())];
        for level in 0..=depth {
            let mut next = Vec::new();
            for (addr, node) in frontier {
                out.insert(addr.clone(), self.label(node));
                if level < depth {
                    for b in 0..self.rifs.max_arity() {
                        let mut a = addr.clone();
                        a.push(b as u8 + 1);
                        next.push((a, self.child(node, b)));
                    }
                }
            }
            frontier = next;
        }
        Ok(out)
    }
}
