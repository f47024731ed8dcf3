use std::fmt;

use super::{BtNode, NodeKind, Predicate};

pub const AVOIDANCE: &str = "avoidance";
pub const NEEDS: &str = "needs";
pub const IDLE: &str = "idle";
const CMD_PREFIX: &str = "cmd:";

/// Builds the tactical tree for a robot supporting the given command handlers.
///
/// Subtree order under the top fallback: avoidance, needs, one gated subtree
/// per handler in the order given, idle.
pub fn build_template(handlers: &[&str]) -> BtNode {
    let mut subtrees = vec![
        BtNode::sequence(
            AVOIDANCE,
            vec![
                BtNode::condition("collision?", Predicate::FlagSet("collision".into())),
                BtNode::action("avoid", "avoid"),
            ],
        ),
        BtNode::sequence(
            NEEDS,
            vec![
                BtNode::condition("needs-enabled?", Predicate::FlagSet("needs-enabled".into())),
                BtNode::condition(
                    "battery-low?",
                    Predicate::Below("battery".into(), crate::tactical::BATTERY_LOW),
                ),
                BtNode::action("recharge", "recharge"),
            ],
        ),
    ];
    for h in handlers {
        let label = format!("{CMD_PREFIX}{h}");
        subtrees.push(BtNode::sequence(
            &label,
            vec![
                BtNode::condition(
                    &format!("pending-{h}?"),
                    Predicate::FlagSet(format!("pending-{h}")),
                ),
                BtNode::action(h, h),
            ],
        ));
    }
    subtrees.push(BtNode::fallback(
        IDLE,
        vec![
            BtNode::sequence(
                "wander",
                vec![
                    BtNode::condition("random-walk?", Predicate::FlagSet("random-walk".into())),
                    BtNode::action("random-walk", "random-walk"),
                ],
            ),
            BtNode::action("wait-at-base", "wait-at-base"),
        ],
    ));
    BtNode::root(BtNode::fallback("tactical", subtrees))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// Slash-separated labels from the root.
    pub path: String,
    pub msg: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.msg)
    }
}

/// Structural and ordering checks. An empty result means the tree is valid.
pub fn validate(tree: &BtNode) -> Vec<Violation> {
    let mut out = Vec::new();
    if tree.kind != NodeKind::Root {
        out.push(Violation {
            path: tree.label.clone(),
            msg: "top node must be root".into(),
        });
    }
    arity(tree, &tree.label, true, &mut out);

    let Some(top) = tree.children.first() else {
        return out;
    };
    if top.kind != NodeKind::Fallback {
        out.push(Violation {
            path: format!("{}/{}", tree.label, top.label),
            msg: "root child must be a fallback".into(),
        });
        return out;
    }
    let rank = |label: &str| -> Option<u8> {
        match label {
            AVOIDANCE => Some(0),
            NEEDS => Some(1),
            IDLE => Some(3),
            l if l.starts_with(CMD_PREFIX) => Some(2),
            _ => None,
        }
    };
    let path = format!("{}/{}", tree.label, top.label);
    let labels: Vec<&str> = top.children.iter().map(|c| c.label.as_str()).collect();
    if labels.first() != Some(&AVOIDANCE) {
        out.push(Violation {
            path: path.clone(),
            msg: "avoidance must be the first subtree".into(),
        });
    }
    if labels.last() != Some(&IDLE) {
        out.push(Violation {
            path: path.clone(),
            msg: "idle must be the last subtree".into(),
        });
    }
    let mut prev = 0u8;
    for l in &labels {
        match rank(l) {
            None => out.push(Violation {
                path: format!("{path}/{l}"),
                msg: "unknown subtree".into(),
            }),
            Some(r) if r < prev => out.push(Violation {
                path: format!("{path}/{l}"),
                msg: "subtree out of order".into(),
            }),
            Some(r) => prev = r,
        }
    }
    for c in &top.children {
        if let Some(verb) = c.label.strip_prefix(CMD_PREFIX) {
            let gated = matches!(
                c.children.first().map(|n| &n.kind),
                Some(NodeKind::Condition(Predicate::FlagSet(k))) if *k == format!("pending-{verb}")
            );
            if c.kind != NodeKind::Sequence || !gated {
                out.push(Violation {
                    path: format!("{path}/{}", c.label),
                    msg: format!("command subtree must be a sequence gated on pending-{verb}"),
                });
            }
        }
    }
    out
}

fn arity(node: &BtNode, path: &str, top: bool, out: &mut Vec<Violation>) {
    let n = node.children.len();
    let bad = match &node.kind {
        NodeKind::Root if !top => Some("root may only appear at the top".to_string()),
        NodeKind::Root if n != 1 => Some(format!("root needs exactly one child, has {n}")),
        NodeKind::Sequence | NodeKind::Fallback if n == 0 => Some("composite without children".into()),
        NodeKind::Parallel { threshold } if n == 0 || *threshold == 0 || *threshold > n => {
            Some(format!("parallel threshold {threshold} invalid for {n} children"))
        }
        k if k.is_leaf() && n > 0 => Some("leaf with children".into()),
        _ => None,
    };
    if let Some(msg) = bad {
        out.push(Violation {
            path: path.to_string(),
            msg,
        });
    }
    for c in &node.children {
        arity(c, &format!("{path}/{}", c.label), false, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_is_valid_for_both_classes() {
        assert!(validate(&build_template(&["goto", "search", "pick"])).is_empty());
        assert!(validate(&build_template(&["goto", "search", "scan"])).is_empty());
        assert!(validate(&build_template(&[])).is_empty());
    }

    #[test]
    fn misordered_subtrees_reported() {
        let mut t = build_template(&["goto"]);
        t.children[0].children.swap(0, 2);
        let v = validate(&t);
        assert!(v.iter().any(|x| x.msg.contains("avoidance must be the first")));
        assert!(v.iter().any(|x| x.msg.contains("out of order")));
    }

    #[test]
    fn arity_violations_reported() {
        let mut t = build_template(&["goto"]);
        t.children[0].children[2].children.clear();
        t.children.push(BtNode::action("x", "x"));
        let v = validate(&t);
        assert!(v.iter().any(|x| x.msg.contains("exactly one child")));
        assert!(v
            .iter()
            .any(|x| x.path.ends_with("cmd:goto") && x.msg.contains("without children")));
    }
}
