use serde::{Deserialize, Serialize};

/// A decision worth explaining in an agent's thought transcript.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ThoughtEvent {
    LeaderSelected {
        leader: String,
    },
    Adopted {
        script: String,
        role: String,
    },
    Spawned {
        script: String,
        plan: String,
    },
    Completed {
        plan: String,
    },
    Failed {
        plan: String,
        reason: String,
    },
    PreconditionResolved {
        object: String,
        property: String,
    },
    Interpreted {
        speaker: String,
        act: String,
        concept: String,
    },
    Said {
        addressee: String,
        act: String,
        concept: String,
    },
    Commanded {
        verb: String,
        args: Vec<String>,
    },
    ActionStatus {
        verb: String,
        status: String,
    },
    Interrupted {
        step: String,
        object: String,
        property: String,
    },
    GroundingMatch {
        percept: String,
        target: String,
    },
    GroundingMiss {
        percept: String,
        target: String,
    },
    Warning {
        text: String,
    },
}

/// One line, prefixed by the tick.
pub fn render_thought(tick: u64, event: &ThoughtEvent) -> String {
    use ThoughtEvent::*;
    let body = match event {
        LeaderSelected { leader } => format!("{leader} selected as team leader"),
        Adopted { script, role } => format!("adopted {script} ({role})"),
        Spawned { script, plan } => format!("started {script} as {plan}"),
        Completed { plan } => format!("{plan} done"),
        Failed { plan, reason } => format!("{plan} failed: {reason}"),
        PreconditionResolved { object, property } => {
            format!("precondition resolved: {object} {property} known")
        }
        Interpreted {
            speaker,
            act,
            concept,
        } => format!("understood {act} {concept} from {speaker}"),
        Said {
            addressee,
            act,
            concept,
        } => format!("said {act} {concept} to {addressee}"),
        Commanded { verb, args } if args.is_empty() => format!("command {verb}"),
        Commanded { verb, args } => format!("command {verb} {}", args.join(" ")),
        ActionStatus { verb, status } => format!("{verb} {status}"),
        Interrupted {
            step,
            object,
            property,
        } => format!("{step} interrupted: {object} {property} known"),
        GroundingMatch { percept, target } => format!("VMR {percept} matches {target}"),
        GroundingMiss { percept, target } => format!("VMR {percept} does not match {target}"),
        Warning { text } => format!("warning: {text}"),
    };
    format!("tick {tick}: {body}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_formats() {
        let e = ThoughtEvent::Interrupted {
            step: "SEARCH".into(),
            object: "KEY-1".into(),
            property: "location".into(),
        };
        assert_eq!(
            render_thought(214, &e),
            "tick 214: SEARCH interrupted: KEY-1 location known"
        );
        let e = ThoughtEvent::Adopted {
            script: "COLLABORATIVE-ACTIVITY".into(),
            role: "leader".into(),
        };
        assert_eq!(
            render_thought(3, &e),
            "tick 3: adopted COLLABORATIVE-ACTIVITY (leader)"
        );
        let e = ThoughtEvent::GroundingMiss {
            percept: "MUG-7".into(),
            target: "KEY-1".into(),
        };
        assert_eq!(
            render_thought(120, &e),
            "tick 120: VMR MUG-7 does not match KEY-1"
        );
    }
}
