//! Search-tree store: node statistics, topology, the expanded-action sets and
//! the two statistics updates.
//!
//! The tree is single-owner. Every mutation takes `&mut self`; parallel
//! planners keep it on the master thread or behind one lock.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::ActionId;

/// Shadow counters are kept whenever debug assertions are on, or in any build
/// with the `shadow-stats` feature.
pub const SHADOW_STATS: bool = cfg!(any(debug_assertions, feature = "shadow-stats"));

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Structural limits on the tree: traversal depth and search width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeLimits {
    /// Traversal stops at nodes deeper than this.
    pub max_depth: u32,
    /// Maximum number of children per node.
    pub max_children: usize,
}

impl Default for TreeLimits {
    fn default() -> Self {
        Self { max_depth: 100, max_children: 20 }
    }
}

/// Per-node statistics read by the selection scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    /// Mean discounted return over completed visits.
    pub value: f64,
    /// Completed visits.
    pub visits: u64,
    /// Visits dispatched but not yet completed.
    pub in_flight: u64,
    /// Reward of the transition into this node (0 at the root).
    pub edge_reward: f64,
    pub terminal: bool,
    pub depth: u32,
}

impl NodeStats {
    pub fn fresh(edge_reward: f64, terminal: bool, depth: u32) -> Self {
        Self { value: 0.0, visits: 0, in_flight: 0, edge_reward, terminal, depth }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Shadow {
    return_sum: f64,
    ended_here: u64,
}

#[derive(Clone, Debug)]
struct Node {
    stats: NodeStats,
    parent: Option<NodeId>,
    action: Option<ActionId>,
    /// Sorted by action.
    children: Vec<(ActionId, NodeId)>,
    /// Actions claimed for expansion, attached or still pending. Sorted.
    expanded: Vec<ActionId>,
    shadow: Shadow,
}

/// Root-to-node path and the task it belongs to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathRecord {
    pub nodes: Vec<NodeId>,
    pub task: u64,
}

impl PathRecord {
    pub fn new(nodes: Vec<NodeId>, task: u64) -> Self {
        Self { nodes, task }
    }

    pub fn leaf(&self) -> NodeId {
        *self.nodes.last().expect("path is never empty")
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("action {action} already expanded at node {node:?}")]
    DuplicateAction { node: NodeId, action: usize },
    #[error("node {node:?} already has the maximum of {cap} children")]
    WidthCap { node: NodeId, cap: usize },
    #[error("action {action} out of range (action count {count})")]
    InvalidAction { action: usize, count: usize },
    #[error("in-flight count underflow at node {node:?}")]
    InFlightUnderflow { node: NodeId },
    #[error("malformed path: {0}")]
    BadPath(String),
}

#[derive(Clone, Debug)]
pub struct SearchTree {
    nodes: Vec<Node>,
    action_count: usize,
    limits: TreeLimits,
}

impl SearchTree {
    /// Tree holding only a root with zero edge reward at depth 0.
    pub fn new(action_count: usize, limits: TreeLimits, root_terminal: bool) -> Self {
        Self::with_root(action_count, limits, NodeStats::fresh(0.0, root_terminal, 0))
    }

    /// Tree whose root carries the given statistics; used for subtrees that
    /// stand in for a node of a larger tree.
    pub fn with_root(action_count: usize, limits: TreeLimits, root: NodeStats) -> Self {
        let node = Node {
            stats: root,
            parent: None,
            action: None,
            children: Vec::new(),
            expanded: Vec::new(),
            shadow: Shadow::default(),
        };
        Self { nodes: vec![node], action_count, limits }
    }

    pub fn root(&self) -> NodeId {
        NodeId::ROOT
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn limits(&self) -> TreeLimits {
        self.limits
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn stats(&self, id: NodeId) -> &NodeStats {
        &self.nodes[id.idx()].stats
    }

    pub fn stats_mut(&mut self, id: NodeId) -> &mut NodeStats {
        &mut self.nodes[id.idx()].stats
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.idx()].parent
    }

    /// Action on the edge into `id` (`None` for the root).
    pub fn action_into(&self, id: NodeId) -> Option<ActionId> {
        self.nodes[id.idx()].action
    }

    /// Children in ascending action order.
    pub fn children(&self, id: NodeId) -> &[(ActionId, NodeId)] {
        &self.nodes[id.idx()].children
    }

    pub fn child(&self, id: NodeId, action: ActionId) -> Option<NodeId> {
        let children = &self.nodes[id.idx()].children;
        children.binary_search_by_key(&action, |&(a, _)| a).ok().map(|i| children[i].1)
    }

    /// Maximum number of children a node may get.
    pub fn width(&self) -> usize {
        self.action_count.min(self.limits.max_children)
    }

    /// True while some action may still be claimed for expansion.
    pub fn can_expand(&self, id: NodeId) -> bool {
        self.nodes[id.idx()].expanded.len() < self.width()
    }

    /// Actions not yet claimed at `id`, ascending.
    pub fn unexpanded_actions(&self, id: NodeId) -> Vec<ActionId> {
        let expanded = &self.nodes[id.idx()].expanded;
        (0..self.action_count)
            .map(ActionId)
            .filter(|a| expanded.binary_search(a).is_err())
            .collect()
    }

    /// Claims `action` at `id` ahead of its expansion so no other selection
    /// picks it while the expansion is in flight.
    pub fn reserve(&mut self, id: NodeId, action: ActionId) -> Result<(), TreeError> {
        if action.0 >= self.action_count {
            return Err(TreeError::InvalidAction { action: action.0, count: self.action_count });
        }
        let width = self.width();
        let node = &mut self.nodes[id.idx()];
        match node.expanded.binary_search(&action) {
            Ok(_) => Err(TreeError::DuplicateAction { node: id, action: action.0 }),
            Err(_) if node.expanded.len() >= width => Err(TreeError::WidthCap { node: id, cap: width }),
            Err(pos) => {
                node.expanded.insert(pos, action);
                Ok(())
            }
        }
    }

    /// Links a new child reached from `parent` by `action`.
    ///
    /// The action may have been [`reserve`](Self::reserve)d beforehand; it is
    /// claimed here otherwise.
    pub fn expand_attach(
        &mut self,
        parent: NodeId,
        action: ActionId,
        reward: f64,
        terminal: bool,
    ) -> Result<NodeId, TreeError> {
        if self.child(parent, action).is_some() {
            return Err(TreeError::DuplicateAction { node: parent, action: action.0 });
        }
        let width = self.width();
        if self.nodes[parent.idx()].children.len() >= width {
            return Err(TreeError::WidthCap { node: parent, cap: width });
        }
        if self.nodes[parent.idx()].expanded.binary_search(&action).is_err() {
            self.reserve(parent, action)?;
        }
        let id = NodeId(self.nodes.len() as u32);
        let depth = self.nodes[parent.idx()].stats.depth + 1;
        self.nodes.push(Node {
            stats: NodeStats::fresh(reward, terminal, depth),
            parent: Some(parent),
            action: Some(action),
            children: Vec::new(),
            expanded: Vec::new(),
            shadow: Shadow::default(),
        });
        let children = &mut self.nodes[parent.idx()].children;
        let pos = children.binary_search_by_key(&action, |&(a, _)| a).unwrap_err();
        children.insert(pos, (action, id));
        Ok(id)
    }

    /// `O += 1` on every node of the path.
    pub fn incomplete_update(&mut self, path: &PathRecord) {
        for &id in &path.nodes {
            self.nodes[id.idx()].stats.in_flight += 1;
        }
    }

    /// Folds a finished simulation into the path: `O -= 1`, `N += 1` and the
    /// running mean of the discounted return at every node, leaf first.
    ///
    /// Fails without touching anything if some node has no visit in flight.
    pub fn complete_update(&mut self, path: &PathRecord, simulation_return: f64, gamma: f64) -> Result<(), TreeError> {
        if let Some(&node) = path.nodes.iter().find(|id| self.nodes[id.idx()].stats.in_flight == 0) {
            return Err(TreeError::InFlightUnderflow { node });
        }
        for &id in &path.nodes {
            self.nodes[id.idx()].stats.in_flight -= 1;
        }
        self.backpropagate(path, simulation_return, gamma);
        Ok(())
    }

    /// Sequential backpropagation: `N += 1` and the running mean along the
    /// path, leaf first. `O` is left alone.
    pub fn backpropagate(&mut self, path: &PathRecord, simulation_return: f64, gamma: f64) {
        let mut ret = simulation_return;
        for (i, &id) in path.nodes.iter().enumerate().rev() {
            let node = &mut self.nodes[id.idx()];
            let s = &mut node.stats;
            s.visits += 1;
            ret = s.edge_reward + gamma * ret;
            s.value = ((s.visits - 1) as f64 * s.value + ret) / s.visits as f64;
            if SHADOW_STATS {
                node.shadow.return_sum += ret;
                if i + 1 == path.nodes.len() {
                    node.shadow.ended_here += 1;
                }
            }
        }
    }

    /// Checks that `nodes` is a root-first chain of parent/child links.
    pub fn validate_path(&self, nodes: &[NodeId]) -> Result<(), TreeError> {
        match nodes.first() {
            Some(&NodeId::ROOT) => {}
            _ => return Err(TreeError::BadPath("path must start at the root".into())),
        }
        for w in nodes.windows(2) {
            if w[1].idx() >= self.nodes.len() || self.parent(w[1]) != Some(w[0]) {
                return Err(TreeError::BadPath(format!("{:?} is not a child of {:?}", w[1], w[0])));
            }
        }
        Ok(())
    }

    /// Quiescent bookkeeping check: every `O` is zero and each node's visit
    /// count is at least the sum of its children's. With shadow counters the
    /// surplus must equal the number of rollouts whose path ended at the node.
    pub fn visit_conservation_check(&self) -> bool {
        self.nodes.iter().all(|n| {
            let child_sum: u64 = n.children.iter().map(|&(_, c)| self.nodes[c.idx()].stats.visits).sum();
            n.stats.in_flight == 0
                && n.stats.visits >= child_sum
                && (!SHADOW_STATS || n.stats.visits - child_sum == n.shadow.ended_here)
        })
    }

    /// Largest `|V - shadow_sum / N|` over visited nodes; 0 without shadow counters.
    pub fn mean_consistency_error(&self) -> f64 {
        if !SHADOW_STATS {
            return 0.0;
        }
        self.nodes
            .iter()
            .filter(|n| n.stats.visits > 0)
            .map(|n| (n.stats.value - n.shadow.return_sum / n.stats.visits as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Root child with the highest value, ties to the lowest action.
    pub fn best_root_action(&self) -> Option<ActionId> {
        let mut best: Option<(f64, ActionId)> = None;
        for &(a, c) in self.children(self.root()) {
            let v = self.stats(c).value;
            if best.is_none_or(|(bv, _)| v > bv) {
                best = Some((v, a));
            }
        }
        best.map(|(_, a)| a)
    }

    /// Same topology with all statistics except edge rewards, terminal flags
    /// and depths reset.
    pub fn cleared(&self) -> SearchTree {
        let mut t = self.clone();
        for n in &mut t.nodes {
            n.stats = NodeStats::fresh(n.stats.edge_reward, n.stats.terminal, n.stats.depth);
            n.shadow = Shadow::default();
        }
        t
    }

    /// Merges `other`, a tree rooted at a node equivalent to `target`, into
    /// this one: visit counts and shadow counters add, values combine as
    /// visit-weighted means, and missing children are created while there is
    /// room under the width cap. Subtrees that do not fit are dropped; their
    /// visits remain counted at the node above.
    pub(crate) fn merge_subtree(&mut self, target: NodeId, other: &SearchTree, from: NodeId) -> Result<(), TreeError> {
        let src = &other.nodes[from.idx()];
        let dst = &mut self.nodes[target.idx()];
        let n = dst.stats.visits + src.stats.visits;
        if n > 0 {
            dst.stats.value = (dst.stats.visits as f64 * dst.stats.value
                + src.stats.visits as f64 * src.stats.value)
                / n as f64;
        }
        dst.stats.visits = n;
        dst.stats.in_flight += src.stats.in_flight;
        dst.shadow.return_sum += src.shadow.return_sum;
        dst.shadow.ended_here += src.shadow.ended_here;
        for &(a, c) in &other.nodes[from.idx()].children {
            let child = match self.child(target, a) {
                Some(id) => id,
                None => {
                    let s = other.stats(c);
                    match self.expand_attach(target, a, s.edge_reward, s.terminal) {
                        Ok(id) => id,
                        // Full node: the subtree's rollouts stay counted here.
                        Err(TreeError::WidthCap { .. }) => {
                            self.nodes[target.idx()].shadow.ended_here += s.visits;
                            continue;
                        }
                        Err(e) => return Err(e),
                    }
                }
            };
            self.merge_subtree(child, other, c)?;
        }
        Ok(())
    }

    /// Sets `id`'s statistics to what backpropagating every rollout recorded
    /// in its children would have produced: `N = Σ N_c` and
    /// `V = r + γ·Σ N_c V_c / Σ N_c`.
    pub(crate) fn aggregate_from_children(&mut self, id: NodeId, gamma: f64) {
        let (mut n, mut weighted, mut shadow_sum) = (0u64, 0.0, 0.0);
        for &(_, c) in &self.nodes[id.idx()].children {
            let child = &self.nodes[c.idx()];
            n += child.stats.visits;
            weighted += child.stats.visits as f64 * child.stats.value;
            shadow_sum += child.shadow.return_sum;
        }
        let node = &mut self.nodes[id.idx()];
        let r = node.stats.edge_reward;
        node.stats.visits = n;
        node.stats.value = if n > 0 { r + gamma * weighted / n as f64 } else { 0.0 };
        node.shadow = Shadow { return_sum: n as f64 * r + gamma * shadow_sum, ended_here: 0 };
    }

    /// One line per node: `id parent action N O V edge_reward terminal`, with
    /// `-` for the root's parent and action. Floats use the shortest
    /// round-trip representation.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let parent = n.parent.map_or("-".to_string(), |p| p.0.to_string());
            let action = n.action.map_or("-".to_string(), |a| a.0.to_string());
            let s = &n.stats;
            let _ = writeln!(
                out,
                "{i} {parent} {action} {} {} {:?} {:?} {}",
                s.visits, s.in_flight, s.value, s.edge_reward, s.terminal as u8
            );
        }
        out
    }
}

/// Master-owned game states, indexed by node.
#[derive(Clone, Debug)]
pub struct StateBuffer<S> {
    states: Vec<Option<S>>,
}

impl<S: Clone> StateBuffer<S> {
    pub fn new(root: S) -> Self {
        Self { states: vec![Some(root)] }
    }

    pub fn insert(&mut self, id: NodeId, state: S) {
        if self.states.len() <= id.idx() {
            self.states.resize_with(id.idx() + 1, || None);
        }
        self.states[id.idx()] = Some(state);
    }

    pub fn get(&self, id: NodeId) -> Option<&S> {
        self.states.get(id.idx()).and_then(Option::as_ref)
    }

    /// Independent copy of the state stored for `id`.
    pub fn duplicate(&self, id: NodeId) -> Option<S> {
        self.get(id).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tree(actions: usize) -> SearchTree {
        SearchTree::new(actions, TreeLimits::default(), false)
    }

    #[test]
    fn first_visit_sets_mean() {
        let mut t = tree(2);
        let p = PathRecord::new(vec![t.root()], 0);
        t.incomplete_update(&p);
        t.complete_update(&p, 1.0, 0.99).unwrap();
        let s = t.stats(t.root());
        // The first visit's mean is the discounted return the node received.
        assert_eq!((s.visits, s.in_flight, s.value), (1, 0, 0.0 + 0.99 * 1.0));
    }

    /// Scripted single-step replay of the leaf-to-root recursion.
    fn oracle_complete(nodes: &mut [(f64, u64, f64)], ret: f64, gamma: f64) {
        let mut r = ret;
        for (edge, n, v) in nodes.iter_mut().rev() {
            *n += 1;
            r = *edge + gamma * r;
            *v = ((*n - 1) as f64 * *v + r) / *n as f64;
        }
    }

    #[test]
    fn two_node_path_matches_hand_execution() {
        let mut t = tree(2);
        let c = t.expand_attach(t.root(), ActionId(0), 1.0, false).unwrap();
        *t.stats_mut(t.root()) = NodeStats { value: 0.3, visits: 1, ..*t.stats(t.root()) };
        *t.stats_mut(c) = NodeStats { value: 0.4, visits: 1, ..*t.stats(c) };
        let p = PathRecord::new(vec![t.root(), c], 0);
        t.incomplete_update(&p);
        t.complete_update(&p, 2.0, 0.5).unwrap();

        assert_eq!(t.stats(c).visits, 2);
        assert!((t.stats(c).value - 1.2).abs() < 1e-15);
        assert_eq!(t.stats(t.root()).visits, 2);
        assert!((t.stats(t.root()).value - 0.65).abs() < 1e-15);

        let mut oracle = [(0.0, 1, 0.3), (1.0, 1, 0.4)];
        oracle_complete(&mut oracle, 2.0, 0.5);
        assert_eq!(t.stats(c).value, oracle[1].2);
        assert_eq!(t.stats(t.root()).value, oracle[0].2);
    }

    #[test]
    fn terminal_leaf_receives_its_edge_reward() {
        let mut t = tree(2);
        let c = t.expand_attach(t.root(), ActionId(1), 5.0, true).unwrap();
        let p = PathRecord::new(vec![t.root(), c], 3);
        t.incomplete_update(&p);
        t.complete_update(&p, 0.0, 1.0).unwrap();
        assert_eq!(t.stats(c).value, 5.0);
        assert_eq!(t.stats(t.root()).value, 5.0);
    }

    #[test]
    fn underflow_is_reported_and_leaves_tree_untouched() {
        let mut t = tree(2);
        let c = t.expand_attach(t.root(), ActionId(0), 0.0, false).unwrap();
        t.incomplete_update(&PathRecord::new(vec![t.root()], 0));
        let before = t.snapshot();
        let err = t.complete_update(&PathRecord::new(vec![t.root(), c], 0), 1.0, 1.0).unwrap_err();
        assert_eq!(err, TreeError::InFlightUnderflow { node: c });
        assert_eq!(t.snapshot(), before);
    }

    #[test]
    fn incomplete_update_is_additive_and_inverted_by_complete() {
        let mut t = tree(3);
        let c = t.expand_attach(t.root(), ActionId(2), 0.0, false).unwrap();
        let other = t.expand_attach(t.root(), ActionId(0), 0.0, false).unwrap();
        let p = PathRecord::new(vec![t.root(), c], 0);
        t.incomplete_update(&p);
        assert_eq!(t.stats(c).in_flight, 1);
        t.incomplete_update(&p);
        assert_eq!((t.stats(t.root()).in_flight, t.stats(c).in_flight, t.stats(other).in_flight), (2, 2, 0));
        t.complete_update(&p, 0.5, 1.0).unwrap();
        t.complete_update(&p, 0.5, 1.0).unwrap();
        assert_eq!((t.stats(t.root()).in_flight, t.stats(c).in_flight), (0, 0));
        assert_eq!((t.stats(t.root()).visits, t.stats(c).visits), (2, 2));
    }

    #[test]
    fn attach_initializes_child() {
        let mut t = tree(4);
        let c = t.expand_attach(t.root(), ActionId(3), 1.0, false).unwrap();
        assert_eq!(*t.stats(c), NodeStats::fresh(1.0, false, 1));
        assert_eq!(t.parent(c), Some(t.root()));
        assert_eq!(t.action_into(c), Some(ActionId(3)));
        assert_eq!(
            t.expand_attach(t.root(), ActionId(3), 1.0, false).unwrap_err(),
            TreeError::DuplicateAction { node: t.root(), action: 3 }
        );
    }

    #[test]
    fn width_cap_of_twenty() {
        let mut t = SearchTree::new(30, TreeLimits { max_depth: 100, max_children: 20 }, false);
        for a in 0..20 {
            t.expand_attach(t.root(), ActionId(a), 0.0, false).unwrap();
        }
        assert!(!t.can_expand(t.root()));
        assert_eq!(
            t.expand_attach(t.root(), ActionId(25), 0.0, false).unwrap_err(),
            TreeError::WidthCap { node: t.root(), cap: 20 }
        );
    }

    #[test]
    fn reservations_count_toward_width() {
        let mut t = SearchTree::new(5, TreeLimits { max_depth: 10, max_children: 2 }, false);
        t.reserve(t.root(), ActionId(4)).unwrap();
        assert_eq!(t.unexpanded_actions(t.root()), vec![ActionId(0), ActionId(1), ActionId(2), ActionId(3)]);
        t.reserve(t.root(), ActionId(1)).unwrap();
        assert!(matches!(t.reserve(t.root(), ActionId(0)), Err(TreeError::WidthCap { .. })));
        // reserved actions can still be attached
        t.expand_attach(t.root(), ActionId(4), 0.0, false).unwrap();
        t.expand_attach(t.root(), ActionId(1), 0.0, false).unwrap();
        assert_eq!(t.children(t.root()).iter().map(|c| c.0 .0).collect::<Vec<_>>(), vec![1, 4]);
    }

    #[test]
    fn conservation_check() {
        let t = tree(2);
        assert!(t.visit_conservation_check());
        let mut t = tree(2);
        t.stats_mut(t.root()).in_flight = 1;
        assert!(!t.visit_conservation_check());
    }

    #[test]
    fn snapshot_golden() {
        let mut t = tree(2);
        let c = t.expand_attach(t.root(), ActionId(1), 0.25, true).unwrap();
        let p = PathRecord::new(vec![t.root(), c], 0);
        t.incomplete_update(&p);
        t.complete_update(&p, 0.0, 1.0).unwrap();
        assert_eq!(t.snapshot(), "0 - - 1 0 0.25 0.0 0\n1 0 1 1 0 0.25 0.25 1\n");
    }

    #[test]
    fn validate_path_rejects_broken_chains() {
        let mut t = tree(2);
        let a = t.expand_attach(t.root(), ActionId(0), 0.0, false).unwrap();
        let b = t.expand_attach(a, ActionId(0), 0.0, false).unwrap();
        assert!(t.validate_path(&[t.root(), a, b]).is_ok());
        assert!(t.validate_path(&[t.root(), b]).is_err());
        assert!(t.validate_path(&[a, b]).is_err());
    }

    proptest! {
        /// Mean consistency and (N, O) bookkeeping over random update sequences.
        #[test]
        fn random_updates_keep_invariants(ops in prop::collection::vec((0usize..3, 0usize..3, -2.0f64..2.0), 1..60)) {
            let mut t = tree(3);
            let mut paths = Vec::new();
            for &(a, b, _) in &ops {
                let c = t.child(t.root(), ActionId(a)).unwrap_or_else(|| t.expand_attach(t.root(), ActionId(a), 0.1 * a as f64, false).unwrap());
                let g = t.child(c, ActionId(b)).unwrap_or_else(|| t.expand_attach(c, ActionId(b), -0.2, false).unwrap());
                paths.push(PathRecord::new(vec![t.root(), c, g], 0));
            }
            for p in &paths {
                t.incomplete_update(p);
            }
            let root_o = t.stats(t.root()).in_flight;
            prop_assert_eq!(root_o, paths.len() as u64);
            for (p, &(_, _, r)) in paths.iter().zip(&ops) {
                t.complete_update(p, r, 0.9).unwrap();
            }
            prop_assert!(t.visit_conservation_check());
            prop_assert!(t.mean_consistency_error() <= 1e-9);
            prop_assert_eq!(t.stats(t.root()).visits, paths.len() as u64);
        }
    }
}
