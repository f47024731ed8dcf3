use super::{KnowledgeError, Result, Value};

/// One declared concept: `NAME < PARENT[, PARENT] [; prop=value ...]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OntologyEntry {
    pub name: String,
    pub parents: Vec<String>,
    pub properties: Vec<(String, Value)>,
    pub line: usize,
}

/// Parses the declarative ontology format. Blank lines and `#` comments are ignored.
pub fn parse_ontology(src: &str) -> Result<Vec<OntologyEntry>> {
    let mut out: Vec<OntologyEntry> = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let (decl, props) = match text.split_once(';') {
            Some((d, p)) => (d.trim(), p.trim()),
            None => (text, ""),
        };
        let (name, parents) = match decl.split_once('<') {
            Some((n, p)) => (
                n.trim(),
                p.split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect::<Vec<_>>(),
            ),
            None => (decl, Vec::new()),
        };
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(KnowledgeError::Ontology {
                line,
                msg: format!("bad concept name {name:?}"),
            });
        }
        if parents.is_empty() && !out.is_empty() {
            return Err(KnowledgeError::Ontology {
                line,
                msg: format!("{name} has no parent; only the first concept may be the root"),
            });
        }
        let mut properties = Vec::new();
        for p in props.split_whitespace() {
            let (k, v) = p.split_once('=').ok_or_else(|| KnowledgeError::Ontology {
                line,
                msg: format!("expected prop=value, got {p:?}"),
            })?;
            let value = match v.parse::<i64>() {
                Ok(n) => Value::Num(n),
                Err(_) => match v.strip_prefix('#') {
                    Some(r) => Value::reference(r),
                    None => Value::sym(v),
                },
            };
            properties.push((k.to_string(), value));
        }
        for p in &parents {
            if !out.iter().any(|e| &e.name == p) {
                return Err(KnowledgeError::Ontology {
                    line,
                    msg: format!("parent {p} of {name} is not declared above"),
                });
            }
        }
        if out.iter().any(|e| e.name == name) {
            return Err(KnowledgeError::Ontology {
                line,
                msg: format!("{name} declared twice"),
            });
        }
        out.push(OntologyEntry {
            name: name.to_string(),
            parents,
            properties,
            line,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_entries_with_properties() {
        let e = parse_ontology("ALL\nKEY < ALL ; plural=keys\n# comment\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[1].parents, vec!["ALL".to_string()]);
        assert_eq!(e[1].properties, vec![("plural".into(), Value::sym("keys"))]);
    }

    #[test]
    fn undeclared_parent_cites_line() {
        let err = parse_ontology("ALL\n\nKEY < THING\n").unwrap_err();
        assert_eq!(
            err,
            KnowledgeError::Ontology {
                line: 3,
                msg: "parent THING of KEY is not declared above".into()
            }
        );
    }

    #[test]
    fn second_root_rejected() {
        assert!(parse_ontology("ALL\nOTHER\n").is_err());
    }
}
