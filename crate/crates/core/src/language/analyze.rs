use std::collections::BTreeMap;

use super::{tokenize, Filler, Lexicon, Pattern, PatternItem, SlotKind, SpeechAct, Tmr, UNRESOLVED};
use crate::knowledge::{FrameId, FrameKind, KnowledgeBase, Value};

const PHYSICAL_OBJECT: &str = "PHYSICAL-OBJECT";
const PLACE: &str = "PLACE";
const DETERMINERS: &[&str] = &["the", "a", "an", "those", "these"];

struct Ctx<'a> {
    lex: &'a Lexicon,
    kb: &'a KnowledgeBase,
    speaker: &'a FrameId,
    addressee: &'a FrameId,
}

/// Interprets an utterance. Never fails: unmatched text yields an INFORM
/// flagged unresolved.
type Slots = Vec<(String, Vec<Filler>)>;

pub fn analyze(
    lex: &Lexicon,
    kb: &KnowledgeBase,
    utterance: &str,
    speaker: &FrameId,
    addressee: &FrameId,
) -> Tmr {
    let ctx = Ctx {
        lex,
        kb,
        speaker,
        addressee,
    };
    let tokens = tokenize(utterance);
    // (score, lexicon entry, slot fillers)
    let mut best: Option<(usize, usize, Slots)> = None;
    for (entry, pattern) in lex.all_patterns() {
        let mut acc = Vec::new();
        if match_items(&ctx, &pattern.items, &tokens, &mut acc) {
            let score = pattern.literal_count();
            if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
                let mut slots = acc;
                add_fixed(&ctx, pattern, &mut slots);
                best = Some((score, entry, slots));
            }
        }
    }
    match best {
        Some((_, entry, slots)) => {
            let e = &lex.entries[entry];
            let mut map: BTreeMap<String, Vec<Filler>> = BTreeMap::new();
            for (k, v) in slots {
                map.entry(k).or_default().extend(v);
            }
            Tmr {
                speech_act: e.speech_act,
                concept: e.concept.clone(),
                slots: map,
                speaker: speaker.clone(),
                addressee: addressee.clone(),
                source: utterance.to_string(),
                unresolved: false,
            }
        }
        None => Tmr {
            speech_act: SpeechAct::Inform,
            concept: UNRESOLVED.to_string(),
            slots: BTreeMap::new(),
            speaker: speaker.clone(),
            addressee: addressee.clone(),
            source: utterance.to_string(),
            unresolved: true,
        },
    }
}

fn add_fixed(ctx: &Ctx<'_>, pattern: &Pattern, slots: &mut Vec<(String, Vec<Filler>)>) {
    for (k, v) in &pattern.fixed {
        let value = if ctx.kb.contains(&FrameId::from(v.as_str())) {
            Value::reference(v.as_str())
        } else {
            Value::sym(v.as_str())
        };
        slots.push((k.clone(), vec![Filler::Value(value)]));
    }
}

fn match_items(
    ctx: &Ctx<'_>,
    items: &[PatternItem],
    toks: &[String],
    acc: &mut Vec<(String, Vec<Filler>)>,
) -> bool {
    let Some((first, rest)) = items.split_first() else {
        return toks.is_empty();
    };
    match first {
        PatternItem::Word(w) => toks.first() == Some(w) && match_items(ctx, rest, &toks[1..], acc),
        PatternItem::Choice(alts) => {
            toks.first().is_some_and(|t| alts.contains(t)) && match_items(ctx, rest, &toks[1..], acc)
        }
        PatternItem::Optional(w) => {
            (toks.first() == Some(w) && match_items(ctx, rest, &toks[1..], acc))
                || match_items(ctx, rest, toks, acc)
        }
        PatternItem::Slot { name, kind } => {
            let max = match kind {
                SlotKind::Np => 3,
                SlotKind::Zone => 2,
                SlotKind::Zones => toks.len(),
                _ => 1,
            };
            for len in 1..=max.min(toks.len()) {
                if let Some(fillers) = resolve(ctx, *kind, &toks[..len]) {
                    let mark = acc.len();
                    if *kind != SlotKind::Name {
                        acc.push((name.clone(), fillers));
                    }
                    if match_items(ctx, rest, &toks[len..], acc) {
                        return true;
                    }
                    acc.truncate(mark);
                }
            }
            false
        }
    }
}

fn resolve(ctx: &Ctx<'_>, kind: SlotKind, toks: &[String]) -> Option<Vec<Filler>> {
    match kind {
        SlotKind::Np => resolve_np(ctx, toks).map(|f| vec![f]),
        SlotKind::Zone => resolve_place(ctx, toks).map(|id| vec![Filler::Value(Value::Ref(id))]),
        SlotKind::Zones => {
            // "the a and the b" or "a, b": articles and conjunctions are separators
            let mut out = Vec::new();
            let mut expect_label = true;
            for t in toks {
                match t.as_str() {
                    "and" if !expect_label => expect_label = true,
                    "the" if expect_label => {}
                    label => {
                        let id = resolve_place(ctx, std::slice::from_ref(&label.to_string()))?;
                        out.push(Filler::Value(Value::Ref(id)));
                        expect_label = false;
                    }
                }
            }
            (!out.is_empty() && !expect_label).then_some(out)
        }
        SlotKind::Color => match toks {
            [t] if ctx.lex.is_color(t) => Some(vec![Filler::Value(Value::sym(t.as_str()))]),
            _ => None,
        },
        SlotKind::Name => match toks {
            [t] if ctx.lex.team_words.contains(t) || participant_named(ctx.kb, t).is_some() => {
                Some(Vec::new())
            }
            _ => None,
        },
        SlotKind::Noun => match toks {
            [t] => ctx
                .lex
                .noun_concept(t)
                .map(|c| vec![Filler::Value(Value::sym(c))]),
            _ => None,
        },
    }
}

fn participant_named(kb: &KnowledgeBase, name: &str) -> Option<FrameId> {
    kb.frames_in(&kb.sm())
        .ok()?
        .find(|f| {
            f.kind == FrameKind::Instance && f.first_sym("name").is_some_and(|n| n.eq_ignore_ascii_case(name))
        })
        .map(|f| f.id.clone())
}

fn resolve_place(ctx: &Ctx<'_>, toks: &[String]) -> Option<FrameId> {
    let label = match toks {
        [l] => l,
        [the, l] if the == "the" => l,
        _ => return None,
    };
    ctx.kb
        .frames_in(&ctx.kb.sm())
        .ok()?
        .find(|f| {
            f.kind == FrameKind::Instance
                && ctx.kb.is_a(&f.concept, PLACE)
                && f.first_sym("label") == Some(label.as_str())
        })
        .map(|f| f.id.clone())
}

fn resolve_np(ctx: &Ctx<'_>, toks: &[String]) -> Option<Filler> {
    match toks {
        [p] if ctx.lex.is_pronoun(p) => most_recent_object(ctx.kb).map(|id| Filler::Value(Value::Ref(id))),
        [noun] => lookup(ctx, noun, None),
        [det, noun] => {
            let owner = match det.as_str() {
                "my" => Some(ctx.speaker.clone()),
                "your" => Some(ctx.addressee.clone()),
                d if DETERMINERS.contains(&d) => None,
                d => {
                    let name = d.strip_suffix("'s")?;
                    Some(participant_named(ctx.kb, name)?)
                }
            };
            lookup(ctx, noun, Some(owner))
        }
        _ => None,
    }
}

/// `owner`: `None` = no determiner, `Some(None)` = article, `Some(Some(x))` = possessive.
/// The newest matching instance in the situation model wins, then episodic memory.
fn lookup(ctx: &Ctx<'_>, noun: &str, owner: Option<Option<FrameId>>) -> Option<Filler> {
    let concept = ctx.lex.noun_concept(noun)?;
    let owner = owner.flatten();
    for space in [ctx.kb.sm(), ctx.kb.episodic()] {
        let Ok(frames) = ctx.kb.frames_in(&space) else {
            continue;
        };
        let hit = frames
            .filter(|f| f.kind == FrameKind::Instance && ctx.kb.is_a(&f.concept, concept))
            .filter(|f| owner.as_ref().is_none_or(|o| f.first_ref("owned-by") == Some(o)))
            .last();
        if let Some(f) = hit {
            return Some(Filler::Value(Value::Ref(f.id.clone())));
        }
    }
    Some(Filler::New {
        concept: concept.to_string(),
        owner,
    })
}

/// Most recently mentioned physical object in the situation model.
fn most_recent_object(kb: &KnowledgeBase) -> Option<FrameId> {
    let frames: Vec<_> = kb.frames_in(&kb.sm()).ok()?.collect();
    for f in frames.iter().rev() {
        if f.kind == FrameKind::Instance && kb.is_a(&f.concept, PHYSICAL_OBJECT) {
            return Some(f.id.clone());
        }
        for vs in f.properties.values() {
            for v in vs {
                if let Value::Ref(r) = v {
                    if kb.get(r).is_some_and(|t| {
                        t.kind == FrameKind::Instance && kb.is_a(&t.concept, PHYSICAL_OBJECT)
                    }) {
                        return Some(r.clone());
                    }
                }
            }
        }
    }
    None
}
