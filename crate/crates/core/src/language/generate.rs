use super::{
    capitalize, display_name, AddresseeClass, LanguageError, Lexicon, Meaning, SlotKind, TemplatePart,
};
use crate::knowledge::{FrameId, KnowledgeBase, Value};

const HUMAN: &str = "HUMAN";

/// Register of an addressee: human participants get the human register,
/// everyone else (robots and the team broadcast) the robot register.
pub fn addressee_class(kb: &KnowledgeBase, addressee: &FrameId) -> AddresseeClass {
    match kb.get(addressee) {
        Some(f) if kb.is_a(&f.concept, HUMAN) => AddresseeClass::Human,
        _ => AddresseeClass::Robot,
    }
}

/// Realizes `mr` for `addressee`. Deterministic.
pub fn generate(
    lex: &Lexicon,
    kb: &KnowledgeBase,
    mr: &Meaning,
    speaker: &FrameId,
    addressee: &FrameId,
) -> Result<String, LanguageError> {
    let class = addressee_class(kb, addressee);
    let template =
        lex.template(mr.speech_act, &mr.concept, class)
            .ok_or_else(|| LanguageError::MissingTemplate {
                act: mr.speech_act,
                concept: mr.concept.clone(),
                class,
            })?;
    let mut out = String::new();
    for part in &template.parts {
        match part {
            TemplatePart::Text(t) => out.push_str(t),
            TemplatePart::Slot { name, kind } => {
                let rendered = match kind {
                    SlotKind::Name => match name.as_str() {
                        "speaker" => display_name(kb, speaker),
                        _ => display_name(kb, addressee),
                    },
                    _ => {
                        let values = mr.slots.get(name).filter(|v| !v.is_empty()).ok_or_else(|| {
                            LanguageError::MissingSlot {
                                act: mr.speech_act,
                                concept: mr.concept.clone(),
                                slot: name.clone(),
                            }
                        })?;
                        render_slot(lex, kb, *kind, values, class, speaker, addressee)
                    }
                };
                out.push_str(&rendered);
            }
        }
    }
    Ok(capitalize(&out))
}

fn render_slot(
    lex: &Lexicon,
    kb: &KnowledgeBase,
    kind: SlotKind,
    values: &[Value],
    class: AddresseeClass,
    speaker: &FrameId,
    addressee: &FrameId,
) -> String {
    match kind {
        SlotKind::Np => match &values[0] {
            Value::Ref(id) => render_np(lex, kb, id, speaker, addressee),
            v => plain(v),
        },
        SlotKind::Zone => render_zone(kb, &values[0], class),
        SlotKind::Zones => {
            let zones: Vec<String> = values.iter().map(|v| render_zone(kb, v, class)).collect();
            match class {
                AddresseeClass::Robot => zones.join(", "),
                AddresseeClass::Human => match zones.split_last() {
                    Some((last, rest)) if !rest.is_empty() => {
                        format!("{} and {last}", rest.join(", "))
                    }
                    _ => zones.join(""),
                },
            }
        }
        SlotKind::Noun => {
            let c = plain(&values[0]);
            noun_for(lex, kb, &c).unwrap_or(c)
        }
        SlotKind::Color | SlotKind::Name => plain(&values[0]),
    }
}

fn plain(v: &Value) -> String {
    match v {
        Value::Sym(s) => s.clone(),
        Value::Num(n) => n.to_string(),
        Value::Ref(id) => id.to_string(),
    }
}

fn render_zone(kb: &KnowledgeBase, v: &Value, class: AddresseeClass) -> String {
    let label = match v {
        Value::Ref(id) => kb
            .get(id)
            .and_then(|f| f.first_sym("label"))
            .map(str::to_string)
            .unwrap_or_else(|| id.to_string()),
        other => plain(other),
    };
    match class {
        AddresseeClass::Human => format!("the {label}"),
        AddresseeClass::Robot => label,
    }
}

/// Display noun of a concept, inherited from the nearest ancestor with a lexeme.
fn noun_for(lex: &Lexicon, kb: &KnowledgeBase, concept: &str) -> Option<String> {
    let mut frontier = vec![concept.to_string()];
    while let Some(c) = frontier.pop() {
        if let Some(n) = lex.noun_for(&c) {
            return Some(n.to_string());
        }
        if let Some(f) = kb.get_str(&c) {
            frontier.extend(f.parents().map(|p| p.to_string()));
        }
    }
    None
}

/// Noun phrase for an object frame, from the speaker's point of view.
pub fn render_np(
    lex: &Lexicon,
    kb: &KnowledgeBase,
    id: &FrameId,
    speaker: &FrameId,
    addressee: &FrameId,
) -> String {
    let Some(f) = kb.get(id) else {
        return id.to_string();
    };
    let noun = noun_for(lex, kb, &f.concept).unwrap_or_else(|| f.concept.to_lowercase());
    match f.first_ref("owned-by") {
        Some(o) if o == addressee => format!("your {noun}"),
        Some(o) if o == speaker => format!("my {noun}"),
        Some(o) if kb.get(o).is_some_and(|p| p.has("name")) => {
            format!("{}'s {noun}", display_name(kb, o))
        }
        _ => format!("the {noun}"),
    }
}
