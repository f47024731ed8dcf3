use std::collections::BTreeMap;

use super::{AddresseeClass, LanguageError, SpeechAct};

/// Filler type of a template slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotKind {
    /// Object noun phrase: pronoun, or optional determiner/possessive plus noun.
    Np,
    /// A single place label, optionally preceded by `the`.
    Zone,
    /// One or more place labels joined by `and`.
    Zones,
    Color,
    /// Vocative participant name; not part of the proposition.
    Name,
    /// A noun naming a concept.
    Noun,
}

impl SlotKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "np" => SlotKind::Np,
            "zone" => SlotKind::Zone,
            "zones" => SlotKind::Zones,
            "color" => SlotKind::Color,
            "name" => SlotKind::Name,
            "noun" => SlotKind::Noun,
            _ => return None,
        })
    }

    fn default_for(name: &str) -> Option<Self> {
        Some(match name {
            "object" => SlotKind::Np,
            "location" | "zone" => SlotKind::Zone,
            "zones" => SlotKind::Zones,
            "addressee" | "speaker" => SlotKind::Name,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PatternItem {
    Word(String),
    Optional(String),
    Choice(Vec<String>),
    Slot { name: String, kind: SlotKind },
}

/// A token template with typed slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    pub items: Vec<PatternItem>,
    /// Slot values fixed by the pattern itself (`| prop=value`).
    pub fixed: Vec<(String, String)>,
    pub source: String,
}

impl Pattern {
    pub fn literal_count(&self) -> usize {
        self.items
            .iter()
            .filter(|i| matches!(i, PatternItem::Word(_) | PatternItem::Choice(_)))
            .count()
    }

    /// Proposition slot names this pattern fills (vocatives excluded).
    pub fn slot_names(&self) -> impl Iterator<Item = &str> {
        self.items.iter().filter_map(|i| match i {
            PatternItem::Slot { name, kind } if *kind != SlotKind::Name => Some(name.as_str()),
            _ => None,
        })
    }
}

/// Surface template for generation: literal text interleaved with slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    pub parts: Vec<TemplatePart>,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TemplatePart {
    Text(String),
    Slot { name: String, kind: SlotKind },
}

#[derive(Clone, Debug)]
pub struct LexEntry {
    pub speech_act: SpeechAct,
    pub concept: String,
    pub patterns: Vec<Pattern>,
    pub templates: BTreeMap<AddresseeClass, Template>,
    pub line: usize,
}

/// Noun lexeme: surfaces (first is the display form) mapped to a concept.
#[derive(Clone, Debug)]
pub struct Noun {
    pub surfaces: Vec<String>,
    pub concept: String,
}

#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    pub entries: Vec<LexEntry>,
    pub nouns: Vec<Noun>,
    pub colors: Vec<String>,
    pub pronouns: Vec<String>,
    /// Tokens accepted as a vocative addressing the whole team.
    pub team_words: Vec<String>,
}

impl Lexicon {
    pub fn parse(src: &str) -> Result<Self, LanguageError> {
        parse(src)
    }

    pub fn noun_concept(&self, token: &str) -> Option<&str> {
        self.nouns
            .iter()
            .find(|n| n.surfaces.iter().any(|s| s == token))
            .map(|n| n.concept.as_str())
    }

    /// Display noun for a concept, walking up to the nearest concept with a lexeme.
    pub fn noun_for(&self, concept: &str) -> Option<&str> {
        self.nouns
            .iter()
            .find(|n| n.concept == concept)
            .and_then(|n| n.surfaces.first())
            .map(String::as_str)
    }

    pub fn is_color(&self, token: &str) -> bool {
        self.colors.iter().any(|c| c == token)
    }

    pub fn is_pronoun(&self, token: &str) -> bool {
        self.pronouns.iter().any(|c| c == token)
    }

    pub fn template(&self, act: SpeechAct, concept: &str, class: AddresseeClass) -> Option<&Template> {
        self.entries
            .iter()
            .find(|e| e.speech_act == act && e.concept == concept)
            .and_then(|e| e.templates.get(&class))
    }

    /// Every analysis pattern, with explicit `=>` patterns first and
    /// generation templates after, tagged with their entry index.
    pub fn all_patterns(&self) -> Vec<(usize, &Pattern)> {
        let mut out = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            for p in &e.patterns {
                out.push((i, p));
            }
        }
        out
    }
}

fn err(line: usize, msg: impl Into<String>) -> LanguageError {
    LanguageError::Lexicon {
        line,
        msg: msg.into(),
    }
}

fn parse(src: &str) -> Result<Lexicon, LanguageError> {
    let mut lex = Lexicon::default();
    let mut current: Option<LexEntry> = None;
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let indented = raw.starts_with(' ') || raw.starts_with('\t');
        if !indented {
            if let Some(e) = current.take() {
                lex.entries.push(e);
            }
            let mut words = text.split_whitespace();
            let head = words.next().unwrap_or("");
            let rest: Vec<String> = words.map(str::to_string).collect();
            match head {
                "noun" => {
                    let arrow = rest
                        .iter()
                        .position(|w| w == "=>")
                        .ok_or_else(|| err(line, "noun line needs `=> CONCEPT`"))?;
                    let concept = rest
                        .get(arrow + 1)
                        .ok_or_else(|| err(line, "missing concept after =>"))?;
                    if arrow == 0 {
                        return Err(err(line, "noun line lists no surfaces"));
                    }
                    lex.nouns.push(Noun {
                        surfaces: rest[..arrow].to_vec(),
                        concept: concept.clone(),
                    });
                }
                "color" => lex.colors.extend(rest),
                "pronoun" => lex.pronouns.extend(rest),
                "team" => lex.team_words.extend(rest),
                "entry" => {
                    if rest.len() != 2 {
                        return Err(err(line, "entry needs SPEECH-ACT CONCEPT"));
                    }
                    let act = SpeechAct::parse(&rest[0])
                        .ok_or_else(|| err(line, format!("unknown speech act {}", rest[0])))?;
                    current = Some(LexEntry {
                        speech_act: act,
                        concept: rest[1].clone(),
                        patterns: Vec::new(),
                        templates: BTreeMap::new(),
                        line,
                    });
                }
                other => return Err(err(line, format!("unknown directive {other:?}"))),
            }
            continue;
        }
        let entry = current
            .as_mut()
            .ok_or_else(|| err(line, "indented line outside an entry"))?;
        if let Some(p) = text.strip_prefix("=>") {
            entry.patterns.push(parse_pattern(p.trim(), line)?);
        } else if let Some((tag, body)) = text.split_once(':').filter(|(t, _)| t.starts_with('@')) {
            let class = match tag {
                "@human" => AddresseeClass::Human,
                "@robot" => AddresseeClass::Robot,
                _ => return Err(err(line, format!("unknown register {tag}"))),
            };
            let body = body.trim();
            let surface = body.split(" | ").next().unwrap_or(body).trim();
            let template = parse_template(surface, line)?;
            entry.patterns.push(parse_pattern(body, line)?);
            if entry.templates.insert(class, template).is_some() {
                return Err(err(line, format!("duplicate {tag} template")));
            }
        } else {
            return Err(err(
                line,
                format!("expected `=>` or `@human:`/`@robot:`, got {text:?}"),
            ));
        }
    }
    if let Some(e) = current.take() {
        lex.entries.push(e);
    }
    Ok(lex)
}

fn parse_slot(inner: &str, line: usize) -> Result<(String, SlotKind), LanguageError> {
    let (name, kind) = match inner.split_once(':') {
        Some((n, k)) => (
            n,
            SlotKind::parse(k).ok_or_else(|| err(line, format!("unknown slot kind {k}")))?,
        ),
        None => (
            inner,
            SlotKind::default_for(inner)
                .ok_or_else(|| err(line, format!("slot {inner} needs an explicit kind")))?,
        ),
    };
    Ok((name.to_string(), kind))
}

fn parse_template(body: &str, line: usize) -> Result<Template, LanguageError> {
    let mut parts = Vec::new();
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            parts.push(TemplatePart::Text(rest[..open].to_string()));
        }
        let close = rest[open..].find('}').ok_or_else(|| err(line, "unclosed slot"))? + open;
        let (name, kind) = parse_slot(&rest[open + 1..close], line)?;
        parts.push(TemplatePart::Slot { name, kind });
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        parts.push(TemplatePart::Text(rest.to_string()));
    }
    Ok(Template {
        parts,
        source: body.to_string(),
    })
}

/// Parses an analysis pattern. Punctuation is dropped like in [`super::tokenize`].
fn parse_pattern(body: &str, line: usize) -> Result<Pattern, LanguageError> {
    let (main, fixed_part) = match body.split_once(" | ") {
        Some((m, f)) => (m.trim(), f.trim()),
        None => (body, ""),
    };
    let mut fixed = Vec::new();
    for kv in fixed_part.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected prop=value, got {kv}")))?;
        fixed.push((k.to_string(), v.to_string()));
    }
    let mut items = Vec::new();
    let mut rest = main;
    while !rest.is_empty() {
        rest = rest.trim_start();
        if rest.is_empty() {
            break;
        }
        if let Some(r) = rest.strip_prefix('{') {
            let close = r.find('}').ok_or_else(|| err(line, "unclosed slot"))?;
            let (name, kind) = parse_slot(&r[..close], line)?;
            items.push(PatternItem::Slot { name, kind });
            rest = &r[close + 1..];
        } else if let Some(r) = rest.strip_prefix('[') {
            let close = r.find(']').ok_or_else(|| err(line, "unclosed [optional]"))?;
            for w in super::tokenize(&r[..close]) {
                items.push(PatternItem::Optional(w));
            }
            rest = &r[close + 1..];
        } else if let Some(r) = rest.strip_prefix('(') {
            let close = r.find(')').ok_or_else(|| err(line, "unclosed (choice)"))?;
            let alts: Vec<String> = r[..close].split('|').flat_map(super::tokenize).collect();
            items.push(PatternItem::Choice(alts));
            rest = &r[close + 1..];
        } else {
            let end = rest
                .find(|c: char| c.is_whitespace() || c == '{' || c == '[' || c == '(')
                .unwrap_or(rest.len());
            for w in super::tokenize(&rest[..end]) {
                items.push(PatternItem::Word(w));
            }
            rest = &rest[end..];
        }
    }
    if items.is_empty() {
        return Err(err(line, "empty pattern"));
    }
    Ok(Pattern {
        items,
        fixed,
        source: body.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_entry_with_registers() {
        let src = "\
noun keys key => KEY
color red blue
entry REQUEST-INFO OBJECT-FEATURES
  => describe {object}
  @human: {addressee}, what do {object} look like?
  @robot: {addressee}: report features of {object}.
";
        let lex = Lexicon::parse(src).unwrap();
        assert_eq!(lex.entries.len(), 1);
        let e = &lex.entries[0];
        assert_eq!(e.patterns.len(), 3);
        assert_eq!(e.templates.len(), 2);
        assert_eq!(lex.noun_concept("key"), Some("KEY"));
        assert_eq!(lex.noun_for("KEY"), Some("keys"));
        assert_eq!(
            e.patterns[1].items[..3],
            [
                PatternItem::Slot {
                    name: "addressee".into(),
                    kind: SlotKind::Name
                },
                PatternItem::Word("what".into()),
                PatternItem::Word("do".into()),
            ]
        );
    }

    #[test]
    fn optional_and_choice_items() {
        let p = parse_pattern("[robots please] find (my|the) {object}", 1).unwrap();
        assert_eq!(p.items.len(), 5);
        assert_eq!(p.literal_count(), 2);
    }

    #[test]
    fn errors_cite_lines() {
        let err = Lexicon::parse("color red\nentry INFORM X\n  => {thing}\n").unwrap_err();
        assert_eq!(
            err,
            LanguageError::Lexicon {
                line: 3,
                msg: "slot thing needs an explicit kind".into()
            }
        );
    }
}
