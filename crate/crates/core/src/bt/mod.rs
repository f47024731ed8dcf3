//! Behavior-tree runtime: nodes, blackboard, memoryless ticks, the tactical
//! template, structural validation and a small tree description format.

mod blackboard;
mod parse;
mod template;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use blackboard::{BbValue, Blackboard};
pub use parse::parse_tree;
pub use template::{build_template, validate, Violation, AVOIDANCE, IDLE, NEEDS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TickStatus {
    Success,
    Failure,
    Running,
}

impl TickStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TickStatus::Success => "success",
            TickStatus::Failure => "failure",
            TickStatus::Running => "running",
        }
    }
}

impl fmt::Display for TickStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Declarative predicate over the blackboard.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Predicate {
    FlagSet(String),
    FlagClear(String),
    Below(String, f64),
    AtLeast(String, f64),
}

impl Predicate {
    pub fn eval(&self, bb: &Blackboard) -> bool {
        match self {
            Predicate::FlagSet(k) => bb.flag(k),
            Predicate::FlagClear(k) => !bb.flag(k),
            Predicate::Below(k, v) => bb.num(k) < *v,
            Predicate::AtLeast(k, v) => bb.num(k) >= *v,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::FlagSet(k) => write!(f, "flag {k}"),
            Predicate::FlagClear(k) => write!(f, "not {k}"),
            Predicate::Below(k, v) => write!(f, "below {k} {v}"),
            Predicate::AtLeast(k, v) => write!(f, "atleast {k} {v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    Root,
    Sequence,
    Fallback,
    /// Succeeds once `threshold` children succeed, fails once that is impossible.
    Parallel {
        threshold: usize,
    },
    Condition(Predicate),
    /// Bound to a handler id in the [`Handlers`] registry.
    Action(String),
}

impl NodeKind {
    fn name(&self) -> &'static str {
        match self {
            NodeKind::Root => "root",
            NodeKind::Sequence => "sequence",
            NodeKind::Fallback => "fallback",
            NodeKind::Parallel { .. } => "parallel",
            NodeKind::Condition(_) => "condition",
            NodeKind::Action(_) => "action",
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, NodeKind::Condition(_) | NodeKind::Action(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BtNode {
    pub kind: NodeKind,
    pub label: String,
    pub children: Vec<BtNode>,
}

impl BtNode {
    pub fn root(child: BtNode) -> Self {
        BtNode {
            kind: NodeKind::Root,
            label: "root".into(),
            children: vec![child],
        }
    }

    pub fn sequence(label: &str, children: Vec<BtNode>) -> Self {
        BtNode {
            kind: NodeKind::Sequence,
            label: label.into(),
            children,
        }
    }

    pub fn fallback(label: &str, children: Vec<BtNode>) -> Self {
        BtNode {
            kind: NodeKind::Fallback,
            label: label.into(),
            children,
        }
    }

    pub fn parallel(label: &str, threshold: usize, children: Vec<BtNode>) -> Self {
        BtNode {
            kind: NodeKind::Parallel { threshold },
            label: label.into(),
            children,
        }
    }

    pub fn condition(label: &str, p: Predicate) -> Self {
        BtNode {
            kind: NodeKind::Condition(p),
            label: label.into(),
            children: Vec::new(),
        }
    }

    pub fn action(label: &str, handler: &str) -> Self {
        BtNode {
            kind: NodeKind::Action(handler.into()),
            label: label.into(),
            children: Vec::new(),
        }
    }

    /// Labels of all leaves, left to right.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |n| {
            if n.kind.is_leaf() {
                out.push(n.label.as_str());
            }
        });
        out
    }

    fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a BtNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        let pad = "  ".repeat(depth);
        match &self.kind {
            NodeKind::Root => writeln!(f, "{pad}root")?,
            NodeKind::Parallel { threshold } => writeln!(f, "{pad}parallel {} {threshold}", self.label)?,
            NodeKind::Condition(p) => writeln!(f, "{pad}condition {} {p}", self.label)?,
            NodeKind::Action(h) if h == &self.label => writeln!(f, "{pad}action {}", self.label)?,
            NodeKind::Action(h) => writeln!(f, "{pad}action {} {h}", self.label)?,
            k => writeln!(f, "{pad}{} {}", k.name(), self.label)?,
        }
        for c in &self.children {
            c.write(f, depth + 1)?;
        }
        Ok(())
    }
}

/// Renders the tree description format accepted by [`parse_tree`].
impl fmt::Display for BtNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, 0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BtError {
    #[error("leaf {leaf} is bound to unknown handler {handler}")]
    UnboundLeaf { leaf: String, handler: String },
    #[error("duplicate handler id {0}")]
    DuplicateHandler(String),
    #[error("tree line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Handler<C> = Box<dyn FnMut(&mut C, &mut Blackboard) -> TickStatus>;

/// Action handlers by id, generic over the context they act on.
pub struct Handlers<C> {
    map: BTreeMap<String, Handler<C>>,
}

impl<C> Default for Handlers<C> {
    fn default() -> Self {
        Handlers { map: BTreeMap::new() }
    }
}

impl<C> Handlers<C> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        id: &str,
        f: impl FnMut(&mut C, &mut Blackboard) -> TickStatus + 'static,
    ) -> Result<(), BtError> {
        if self.map.contains_key(id) {
            return Err(BtError::DuplicateHandler(id.to_string()));
        }
        self.map.insert(id.to_string(), Box::new(f));
        Ok(())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.map.contains_key(id)
    }
}

/// One leaf evaluation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafVisit {
    pub leaf: String,
    pub action: bool,
    pub status: TickStatus,
}

/// Ticks the tree once from the root, returning the status and the leaf visits
/// in evaluation order.
pub fn tick<C>(
    tree: &BtNode,
    bb: &mut Blackboard,
    handlers: &mut Handlers<C>,
    ctx: &mut C,
) -> Result<(TickStatus, Vec<LeafVisit>), BtError> {
    let mut trace = Vec::new();
    let s = tick_node(tree, bb, handlers, ctx, &mut trace)?;
    Ok((s, trace))
}

fn tick_node<C>(
    node: &BtNode,
    bb: &mut Blackboard,
    handlers: &mut Handlers<C>,
    ctx: &mut C,
    trace: &mut Vec<LeafVisit>,
) -> Result<TickStatus, BtError> {
    use TickStatus::*;
    let status = match &node.kind {
        NodeKind::Root => match node.children.first() {
            Some(c) => tick_node(c, bb, handlers, ctx, trace)?,
            None => Failure,
        },
        NodeKind::Sequence => {
            let mut s = Success;
            for c in &node.children {
                s = tick_node(c, bb, handlers, ctx, trace)?;
                if s != Success {
                    break;
                }
            }
            s
        }
        NodeKind::Fallback => {
            let mut s = Failure;
            for c in &node.children {
                s = tick_node(c, bb, handlers, ctx, trace)?;
                if s != Failure {
                    break;
                }
            }
            s
        }
        NodeKind::Parallel { threshold } => {
            let (mut ok, mut bad) = (0, 0);
            for c in &node.children {
                match tick_node(c, bb, handlers, ctx, trace)? {
                    Success => ok += 1,
                    Failure => bad += 1,
                    Running => {}
                }
            }
            if ok >= *threshold {
                Success
            } else if node.children.len() - bad < *threshold {
                Failure
            } else {
                Running
            }
        }
        NodeKind::Condition(p) => {
            let s = if p.eval(bb) { Success } else { Failure };
            trace.push(LeafVisit {
                leaf: node.label.clone(),
                action: false,
                status: s,
            });
            s
        }
        NodeKind::Action(id) => {
            let h = handlers.map.get_mut(id).ok_or_else(|| BtError::UnboundLeaf {
                leaf: node.label.clone(),
                handler: id.clone(),
            })?;
            let s = h(ctx, bb);
            trace.push(LeafVisit {
                leaf: node.label.clone(),
                action: true,
                status: s,
            });
            s
        }
    };
    Ok(status)
}

/// BT trace line: `tick,robot,leaf,status`.
pub fn trace_line(tick: u64, robot: &str, visit: &LeafVisit) -> String {
    format!("{tick},{robot},{},{}", visit.leaf, visit.status)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn handlers() -> Handlers<Vec<String>> {
        let mut h = Handlers::new();
        h.register("ok", |log: &mut Vec<String>, _: &mut Blackboard| {
            log.push("ok".into());
            TickStatus::Success
        })
        .unwrap();
        h.register("busy", |log: &mut Vec<String>, _: &mut Blackboard| {
            log.push("busy".into());
            TickStatus::Running
        })
        .unwrap();
        h
    }

    #[test]
    fn fallback_runs_action_once_after_false_condition() {
        let tree = BtNode::root(BtNode::fallback(
            "f",
            vec![
                BtNode::condition("c", Predicate::FlagSet("x".into())),
                BtNode::action("a", "ok"),
            ],
        ));
        let mut log = Vec::new();
        let mut bb = Blackboard::new();
        let (s, trace) = tick(&tree, &mut bb, &mut handlers(), &mut log).unwrap();
        assert_eq!(s, TickStatus::Success);
        assert_eq!(log, ["ok"]);
        assert_eq!(trace.len(), 2);
    }

    #[test]
    fn sequence_returns_running_and_reenters_next_tick() {
        let tree = BtNode::root(BtNode::sequence(
            "s",
            vec![BtNode::action("first", "ok"), BtNode::action("second", "busy")],
        ));
        let mut log = Vec::new();
        let mut bb = Blackboard::new();
        let mut h = handlers();
        assert_eq!(
            tick(&tree, &mut bb, &mut h, &mut log).unwrap().0,
            TickStatus::Running
        );
        assert_eq!(
            tick(&tree, &mut bb, &mut h, &mut log).unwrap().0,
            TickStatus::Running
        );
        // memoryless: the first child is re-evaluated every tick
        assert_eq!(log, ["ok", "busy", "ok", "busy"]);
    }

    #[test]
    fn parallel_threshold() {
        let tree = BtNode::parallel(
            "p",
            2,
            vec![
                BtNode::action("a", "ok"),
                BtNode::action("b", "busy"),
                BtNode::action("c", "ok"),
            ],
        );
        let mut log = Vec::new();
        let (s, _) = tick(&tree, &mut Blackboard::new(), &mut handlers(), &mut log).unwrap();
        assert_eq!(s, TickStatus::Success);
    }

    #[test]
    fn unbound_leaf_names_the_leaf() {
        let tree = BtNode::root(BtNode::action("fly", "wings"));
        let err = tick(&tree, &mut Blackboard::new(), &mut handlers(), &mut Vec::new()).unwrap_err();
        assert_eq!(
            err,
            BtError::UnboundLeaf {
                leaf: "fly".into(),
                handler: "wings".into()
            }
        );
    }

    #[test]
    fn duplicate_handler_rejected() {
        let mut h = handlers();
        assert_eq!(
            h.register("ok", |_: &mut Vec<String>, _: &mut Blackboard| {
                TickStatus::Success
            }),
            Err(BtError::DuplicateHandler("ok".into()))
        );
    }

    #[test]
    fn pure_tick_leaves_version() {
        let tree = BtNode::root(BtNode::condition("c", Predicate::Below("battery".into(), 20.0)));
        let mut bb = Blackboard::new();
        bb.set("battery", BbValue::Num(50.0));
        let v = bb.version();
        tick(&tree, &mut bb, &mut handlers(), &mut Vec::new()).unwrap();
        assert_eq!(bb.version(), v);
    }

    #[test]
    fn trace_line_format() {
        let v = LeafVisit {
            leaf: "collision?".into(),
            action: false,
            status: TickStatus::Failure,
        };
        assert_eq!(trace_line(4, "UGV-1", &v), "4,UGV-1,collision?,failure");
    }
}
