use super::{BtError, BtNode, NodeKind, Predicate};

/// Parses the indented tree description format (two spaces per level, `#`
/// comments). Inverse of `BtNode`'s `Display`.
pub fn parse_tree(src: &str) -> Result<BtNode, BtError> {
    let mut lines = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim_end();
        if body.trim().is_empty() {
            continue;
        }
        let indent = body.len() - body.trim_start().len();
        if indent % 2 != 0 {
            return Err(err(line, "indentation must be a multiple of two spaces"));
        }
        lines.push((line, indent / 2, node_from(line, body.trim())?));
    }
    let mut iter = lines.into_iter().peekable();
    let Some((line, depth, root)) = iter.next() else {
        return Err(err(1, "empty tree"));
    };
    if depth != 0 {
        return Err(err(line, "first node must not be indented"));
    }
    let root = build(root, 0, &mut iter)?;
    if let Some((line, _, _)) = iter.next() {
        return Err(err(line, "more than one top-level node"));
    }
    Ok(root)
}

type Lines = std::iter::Peekable<std::vec::IntoIter<(usize, usize, BtNode)>>;

fn build(mut node: BtNode, depth: usize, rest: &mut Lines) -> Result<BtNode, BtError> {
    while let Some(&(line, d, _)) = rest.peek() {
        if d <= depth {
            break;
        }
        if d != depth + 1 {
            return Err(err(line, "indented more than one level"));
        }
        let (_, _, child) = rest.next().expect("peeked");
        node.children.push(build(child, d, rest)?);
    }
    Ok(node)
}

fn node_from(line: usize, text: &str) -> Result<BtNode, BtError> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    let label = |i: usize| -> Result<&str, BtError> {
        toks.get(i).copied().ok_or_else(|| err(line, "missing label"))
    };
    let num = |s: Option<&&str>| -> Result<f64, BtError> {
        s.and_then(|v| v.parse().ok())
            .ok_or_else(|| err(line, "expected a number"))
    };
    let node = match toks[0] {
        "root" => BtNode {
            kind: NodeKind::Root,
            label: "root".into(),
            children: Vec::new(),
        },
        "sequence" => BtNode::sequence(label(1)?, Vec::new()),
        "fallback" => BtNode::fallback(label(1)?, Vec::new()),
        "parallel" => {
            let t = num(toks.get(2))?;
            BtNode::parallel(label(1)?, t as usize, Vec::new())
        }
        "condition" => {
            let key = toks.get(3).ok_or_else(|| err(line, "missing predicate key"))?;
            let p = match toks.get(2).copied() {
                Some("flag") => Predicate::FlagSet(key.to_string()),
                Some("not") => Predicate::FlagClear(key.to_string()),
                Some("below") => Predicate::Below(key.to_string(), num(toks.get(4))?),
                Some("atleast") => Predicate::AtLeast(key.to_string(), num(toks.get(4))?),
                other => return Err(err(line, &format!("unknown predicate {}", other.unwrap_or("")))),
            };
            BtNode::condition(label(1)?, p)
        }
        "action" => {
            let l = label(1)?;
            BtNode::action(l, toks.get(2).copied().unwrap_or(l))
        }
        other => return Err(err(line, &format!("unknown node kind {other}"))),
    };
    Ok(node)
}

fn err(line: usize, msg: &str) -> BtError {
    BtError::Parse {
        line,
        msg: msg.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bt::build_template;

    #[test]
    fn template_round_trips() {
        let t = build_template(&["goto", "search", "scan"]);
        let text = t.to_string();
        assert_eq!(parse_tree(&text).unwrap(), t);
    }

    #[test]
    fn errors_carry_line() {
        let src = "root\n  fallback top\n      action a\n";
        assert!(matches!(parse_tree(src), Err(BtError::Parse { line: 3, .. })));
        assert!(matches!(
            parse_tree("root\n  condition c maybe x\n"),
            Err(BtError::Parse { line: 2, .. })
        ));
    }
}
