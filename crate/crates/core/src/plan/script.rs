use std::fmt;

use serde::{Deserialize, Serialize};

use super::PlanError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Leader,
    Subordinate,
    Any,
}

impl Role {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "leader" => Role::Leader,
            "subordinate" => Role::Subordinate,
            "any" => Role::Any,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Leader => "leader",
            Role::Subordinate => "subordinate",
            Role::Any => "any",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A step argument: a plan variable (`#ZONE-1`) or a literal symbol.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arg {
    Var(String),
    Lit(String),
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Var(v) => write!(f, "#{v}"),
            Arg::Lit(l) => f.write_str(l),
        }
    }
}

/// `#VAR.PROP`: the values of a property of a bound frame.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetExpr {
    pub var: String,
    pub prop: String,
}

impl fmt::Display for SetExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}.{}", self.var, self.prop)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// `#VAR.PROP KNOWN`
    Known { var: String, prop: String },
    /// `$.CONCEPT ISA @PARENT`: some instance of CONCEPT is in the situation model.
    Exists { concept: String, parent: String },
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Known { var, prop } => write!(f, "#{var}.{prop} KNOWN"),
            Condition::Exists { concept, parent } => write!(f, "$.{concept} ISA @{parent}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    Run,
    RunNew,
    RunAsyncAwait,
    AwaitCondition,
    ForEach,
    InterruptWhen,
    Primitive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Step {
    /// `*name args` or `RUN *name args`; `explicit` records the `RUN` keyword.
    Run {
        prim: String,
        args: Vec<Arg>,
        explicit: bool,
        line: usize,
    },
    RunNew {
        script: String,
        unless: Option<Condition>,
        line: usize,
    },
    RunAsync {
        prim: String,
        args: Vec<Arg>,
        line: usize,
    },
    Await {
        cond: Condition,
        line: usize,
    },
    ForEach {
        var: String,
        set: SetExpr,
        body: Vec<Step>,
        line: usize,
    },
    InterruptWhen {
        cond: Condition,
        line: usize,
    },
}

impl Step {
    pub fn kind(&self) -> StepKind {
        match self {
            Step::Run { explicit: true, .. } => StepKind::Run,
            Step::Run { .. } => StepKind::Primitive,
            Step::RunNew { .. } => StepKind::RunNew,
            Step::RunAsync { .. } => StepKind::RunAsyncAwait,
            Step::Await { .. } => StepKind::AwaitCondition,
            Step::ForEach { .. } => StepKind::ForEach,
            Step::InterruptWhen { .. } => StepKind::InterruptWhen,
        }
    }

    pub fn line(&self) -> usize {
        match self {
            Step::Run { line, .. }
            | Step::RunNew { line, .. }
            | Step::RunAsync { line, .. }
            | Step::Await { line, .. }
            | Step::ForEach { line, .. }
            | Step::InterruptWhen { line, .. } => *line,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, indent: usize) -> fmt::Result {
        let pad = " ".repeat(indent);
        let args = |a: &[Arg]| a.iter().map(|x| format!(" {x}")).collect::<String>();
        match self {
            Step::Run {
                prim,
                args: a,
                explicit,
                ..
            } => {
                let kw = if *explicit { "RUN " } else { "" };
                writeln!(f, "{pad}{kw}*{prim}{}", args(a))
            }
            Step::RunNew { script, unless, .. } => match unless {
                Some(c) => writeln!(f, "{pad}RUN NEW @{script} UNLESS {c}"),
                None => writeln!(f, "{pad}RUN NEW @{script}"),
            },
            Step::RunAsync { prim, args: a, .. } => {
                writeln!(f, "{pad}RUN ASYNC AWAIT *{prim}{}", args(a))
            }
            Step::Await { cond, .. } => writeln!(f, "{pad}AWAIT {cond}"),
            Step::InterruptWhen { cond, .. } => writeln!(f, "{pad}INTERRUPT WHEN {cond}"),
            Step::ForEach { var, set, body, .. } => {
                writeln!(f, "{pad}FOR #{var} IN {set}")?;
                for s in body {
                    s.write(f, indent + 2)?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub steps: Vec<Step>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptDef {
    pub name: String,
    pub role: Role,
    pub params: Vec<String>,
    /// Goal concept this script achieves, for domain scripts.
    pub goal: Option<String>,
    pub sections: Vec<Section>,
    pub line: usize,
}

impl ScriptDef {
    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// Every script named by a RUN NEW anywhere in the body.
    pub fn references(&self) -> Vec<(&str, usize)> {
        fn walk<'a>(steps: &'a [Step], out: &mut Vec<(&'a str, usize)>) {
            for s in steps {
                match s {
                    Step::RunNew { script, line, .. } => out.push((script, *line)),
                    Step::ForEach { body, .. } => walk(body, out),
                    _ => {}
                }
            }
        }
        let mut out = Vec::new();
        for s in &self.sections {
            walk(&s.steps, &mut out);
        }
        out
    }
}

/// Renders back into the file format.
impl fmt::Display for ScriptDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "@{} ({})", self.name, self.role)?;
        if let Some(g) = &self.goal {
            writeln!(f, "GOAL {g}")?;
        }
        if !self.params.is_empty() {
            let ps: Vec<String> = self.params.iter().map(|p| format!("#{p}")).collect();
            writeln!(f, "PARAMS {}", ps.join(" "))?;
        }
        for s in &self.sections {
            writeln!(f, "[{}]", s.name)?;
            for st in &s.steps {
                st.write(f, 2)?;
            }
        }
        Ok(())
    }
}

fn err(line: usize, msg: impl Into<String>) -> PlanError {
    PlanError::Parse {
        line,
        msg: msg.into(),
    }
}

struct Line<'a> {
    no: usize,
    indent: usize,
    text: &'a str,
}

/// Parses a script library file.
///
/// ```text
/// @NAME (leader|subordinate|any)
/// GOAL CONCEPT
/// PARAMS #A #B
/// [SECTION]
///   *primitive
///   RUN NEW @SCRIPT UNLESS #A.PROP KNOWN
///   FOR #X IN #A.PROP
///     RUN ASYNC AWAIT *prim #X
///     INTERRUPT WHEN #A.PROP KNOWN
/// ```
/// `//` starts a comment. A FOR body is the run of lines indented deeper than the FOR.
pub fn parse_scripts(src: &str) -> Result<Vec<ScriptDef>, PlanError> {
    let lines: Vec<Line<'_>> = src
        .lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let text = raw.split("//").next().unwrap_or("").trim_end();
            let trimmed = text.trim_start();
            (!trimmed.is_empty()).then(|| Line {
                no: i + 1,
                indent: text.len() - trimmed.len(),
                text: trimmed,
            })
        })
        .collect();

    let mut scripts: Vec<ScriptDef> = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let l = &lines[i];
        if let Some(head) = l.text.strip_prefix('@') {
            scripts.push(parse_header(head, l.no)?);
            i += 1;
            continue;
        }
        let script = scripts
            .last_mut()
            .ok_or_else(|| err(l.no, "expected @SCRIPT header"))?;
        if let Some(g) = l.text.strip_prefix("GOAL ") {
            script.goal = Some(g.trim().to_string());
            i += 1;
        } else if let Some(ps) = l.text.strip_prefix("PARAMS ") {
            for p in ps.split_whitespace() {
                let v = p
                    .strip_prefix('#')
                    .ok_or_else(|| err(l.no, format!("parameter {p} must start with #")))?;
                script.params.push(v.to_string());
            }
            i += 1;
        } else if let Some(name) = l.text.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(l.no, "unclosed section header"))?
                .trim();
            if script.sections.iter().any(|s| s.name == name) {
                return Err(err(
                    l.no,
                    format!("duplicate section [{name}] in @{}", script.name),
                ));
            }
            script.sections.push(Section {
                name: name.to_string(),
                steps: Vec::new(),
            });
            i += 1;
        } else {
            let section = script
                .sections
                .last_mut()
                .ok_or_else(|| err(l.no, "step outside a [SECTION]"))?;
            let (step, next) = parse_step(&lines, i)?;
            section.steps.push(step);
            i = next;
        }
    }
    for s in &scripts {
        check_script(s)?;
    }
    Ok(scripts)
}

fn parse_header(head: &str, line: usize) -> Result<ScriptDef, PlanError> {
    let (name, role) = match head.split_once('(') {
        Some((n, r)) => {
            let r = r
                .trim()
                .strip_suffix(')')
                .ok_or_else(|| err(line, "unclosed role"))?;
            let role = Role::parse(r.trim()).ok_or_else(|| err(line, format!("unknown role {r:?}")))?;
            (n.trim(), role)
        }
        None => (head.trim(), Role::Any),
    };
    if name.is_empty() || name.contains(char::is_whitespace) {
        return Err(err(line, format!("bad script name {name:?}")));
    }
    Ok(ScriptDef {
        name: name.to_string(),
        role,
        params: Vec::new(),
        goal: None,
        sections: Vec::new(),
        line,
    })
}

fn parse_step(lines: &[Line<'_>], i: usize) -> Result<(Step, usize), PlanError> {
    let l = &lines[i];
    let no = l.no;
    let t = l.text;
    if let Some(rest) = t.strip_prefix("FOR ") {
        let (var, set) = rest
            .split_once(" IN ")
            .ok_or_else(|| err(no, "FOR needs `#VAR IN #X.PROP`"))?;
        let var = parse_var(var.trim(), no)?;
        let set = parse_set(set.trim(), no)?;
        let mut body = Vec::new();
        let mut j = i + 1;
        while j < lines.len() && lines[j].indent > l.indent && !is_structural(lines[j].text) {
            let (s, next) = parse_step(lines, j)?;
            body.push(s);
            j = next;
        }
        return Ok((
            Step::ForEach {
                var,
                set,
                body,
                line: no,
            },
            j,
        ));
    }
    let step = if let Some(rest) = t.strip_prefix("RUN NEW ") {
        let (target, unless) = match rest.split_once(" UNLESS ") {
            Some((a, c)) => (a.trim(), Some(parse_condition(c.trim(), no)?)),
            None => (rest.trim(), None),
        };
        let script = target
            .strip_prefix('@')
            .ok_or_else(|| err(no, format!("RUN NEW target {target} must start with @")))?;
        Step::RunNew {
            script: script.to_string(),
            unless,
            line: no,
        }
    } else if let Some(rest) = t.strip_prefix("RUN ASYNC AWAIT ") {
        let (prim, args) = parse_call(rest, no)?;
        Step::RunAsync { prim, args, line: no }
    } else if let Some(rest) = t.strip_prefix("RUN ") {
        let (prim, args) = parse_call(rest, no)?;
        Step::Run {
            prim,
            args,
            explicit: true,
            line: no,
        }
    } else if let Some(rest) = t.strip_prefix("INTERRUPT WHEN ") {
        Step::InterruptWhen {
            cond: parse_condition(rest.trim(), no)?,
            line: no,
        }
    } else if let Some(rest) = t.strip_prefix("AWAIT ") {
        Step::Await {
            cond: parse_condition(rest.trim(), no)?,
            line: no,
        }
    } else if t.starts_with('*') {
        let (prim, args) = parse_call(t, no)?;
        Step::Run {
            prim,
            args,
            explicit: false,
            line: no,
        }
    } else {
        return Err(err(no, format!("unknown step {t:?}")));
    };
    Ok((step, i + 1))
}

fn is_structural(t: &str) -> bool {
    t.starts_with('@') || t.starts_with('[') || t.starts_with("GOAL ") || t.starts_with("PARAMS ")
}

fn parse_call(s: &str, line: usize) -> Result<(String, Vec<Arg>), PlanError> {
    let mut words = s.split_whitespace();
    let head = words.next().unwrap_or("");
    let prim = head
        .strip_prefix('*')
        .filter(|p| !p.is_empty())
        .ok_or_else(|| err(line, format!("expected *primitive, got {head:?}")))?;
    let args = words
        .map(|w| match w.strip_prefix('#') {
            Some(v) => Arg::Var(v.to_string()),
            None => Arg::Lit(w.to_string()),
        })
        .collect();
    Ok((prim.to_string(), args))
}

fn parse_var(s: &str, line: usize) -> Result<String, PlanError> {
    s.strip_prefix('#')
        .filter(|v| !v.is_empty() && !v.contains('.'))
        .map(str::to_string)
        .ok_or_else(|| err(line, format!("expected #VARIABLE, got {s:?}")))
}

fn parse_set(s: &str, line: usize) -> Result<SetExpr, PlanError> {
    let (var, prop) = s
        .split_once('.')
        .ok_or_else(|| err(line, format!("expected #VAR.PROP, got {s:?}")))?;
    Ok(SetExpr {
        var: parse_var(var, line)?,
        prop: prop.to_string(),
    })
}

fn parse_condition(s: &str, line: usize) -> Result<Condition, PlanError> {
    if let Some(rest) = s.strip_prefix("$.") {
        let (concept, parent) = rest
            .split_once(" ISA ")
            .ok_or_else(|| err(line, format!("expected `$.CONCEPT ISA @PARENT`, got {s:?}")))?;
        let parent = parent
            .trim()
            .strip_prefix('@')
            .ok_or_else(|| err(line, "ISA target must start with @"))?;
        return Ok(Condition::Exists {
            concept: concept.trim().to_string(),
            parent: parent.to_string(),
        });
    }
    let expr = s
        .strip_suffix(" KNOWN")
        .ok_or_else(|| err(line, format!("unsupported condition {s:?}")))?;
    let set = parse_set(expr.trim(), line)?;
    Ok(Condition::Known {
        var: set.var,
        prop: set.prop,
    })
}

/// Variables a step may use: declared parameters, FOR variables in scope, and `#SELF`.
fn check_script(s: &ScriptDef) -> Result<(), PlanError> {
    fn check(steps: &[Step], scope: &mut Vec<String>, in_for: bool, name: &str) -> Result<(), PlanError> {
        let var_ok = |v: &str, scope: &[String]| v == "SELF" || v == "GOAL" || scope.iter().any(|x| x == v);
        let cond_vars = |c: &Condition| match c {
            Condition::Known { var, .. } => Some(var.clone()),
            Condition::Exists { .. } => None,
        };
        for (idx, st) in steps.iter().enumerate() {
            let mut used: Vec<String> = Vec::new();
            match st {
                Step::Run { args, .. } | Step::RunAsync { args, .. } => {
                    used.extend(args.iter().filter_map(|a| match a {
                        Arg::Var(v) => Some(v.clone()),
                        Arg::Lit(_) => None,
                    }))
                }
                Step::RunNew { unless, .. } => used.extend(unless.as_ref().and_then(cond_vars)),
                Step::Await { cond, .. } => used.extend(cond_vars(cond)),
                Step::InterruptWhen { cond, line } => {
                    let after_async = idx > 0 && matches!(steps[idx - 1], Step::RunAsync { .. });
                    if !in_for && !after_async {
                        return Err(err(
                            *line,
                            "INTERRUPT WHEN must follow RUN ASYNC AWAIT or sit inside a FOR body",
                        ));
                    }
                    used.extend(cond_vars(cond));
                }
                Step::ForEach { var, set, body, .. } => {
                    if !var_ok(&set.var, scope) {
                        return Err(err(st.line(), format!("@{name} uses undeclared #{}", set.var)));
                    }
                    scope.push(var.clone());
                    check(body, scope, true, name)?;
                    scope.pop();
                }
            }
            for v in used {
                if !var_ok(&v, scope) {
                    return Err(err(st.line(), format!("@{name} uses undeclared #{v}")));
                }
            }
        }
        Ok(())
    }
    let mut scope = s.params.clone();
    for sec in &s.sections {
        check(&sec.steps, &mut scope, false, &s.name)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SEARCH: &str = "\
@SEARCH-FOR-LOST-OBJECT (any)
GOAL SEARCH-FOR-LOST-OBJECT
PARAMS #OBJECT-1 #LOCATION-1
[SEARCH-ZONES]
  // Stop when found.
  FOR #ZONE-1 IN #LOCATION-1.SEARCHABLE-ZONE
    RUN ASYNC AWAIT *search #ZONE-1
    INTERRUPT WHEN #OBJECT-1.LOCATION KNOWN
    RUN *consider-reporting #ZONE-1
";

    #[test]
    fn parses_nested_for_body() {
        let s = parse_scripts(SEARCH).unwrap();
        assert_eq!(s.len(), 1);
        let Step::ForEach { var, set, body, .. } = &s[0].sections[0].steps[0] else {
            panic!("expected FOR");
        };
        assert_eq!(var, "ZONE-1");
        assert_eq!(set.prop, "SEARCHABLE-ZONE");
        let kinds: Vec<StepKind> = body.iter().map(Step::kind).collect();
        assert_eq!(
            kinds,
            [StepKind::RunAsyncAwait, StepKind::InterruptWhen, StepKind::Run]
        );
    }

    #[test]
    fn display_round_trips() {
        let s = parse_scripts(SEARCH).unwrap();
        let again = parse_scripts(&s[0].to_string()).unwrap();
        let strip = |d: &ScriptDef| d.to_string();
        assert_eq!(strip(&s[0]), strip(&again[0]));
    }

    #[test]
    fn conditions() {
        assert_eq!(
            parse_condition("$.HAS-COLLABORATIVE-PLAN ISA @EVENT", 1).unwrap(),
            Condition::Exists {
                concept: "HAS-COLLABORATIVE-PLAN".into(),
                parent: "EVENT".into()
            }
        );
        assert!(parse_condition("#A.B MAYBE", 4).is_err());
    }

    #[test]
    fn undeclared_variable_cites_line() {
        let src = "@X (any)\n[A]\n  RUN *f #NOPE\n";
        assert_eq!(
            parse_scripts(src).unwrap_err(),
            PlanError::Parse {
                line: 3,
                msg: "@X uses undeclared #NOPE".into()
            }
        );
    }

    #[test]
    fn stray_interrupt_rejected() {
        let src = "@X (any)\n[A]\n  *f\n  INTERRUPT WHEN #SELF.DONE KNOWN\n";
        assert!(matches!(
            parse_scripts(src),
            Err(PlanError::Parse { line: 4, .. })
        ));
    }

    #[test]
    fn duplicate_section_rejected() {
        let src = "@X (any)\n[A]\n[A]\n";
        assert!(matches!(
            parse_scripts(src),
            Err(PlanError::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn step_outside_section() {
        let src = "@X (any)\n  *f\n";
        assert!(matches!(
            parse_scripts(src),
            Err(PlanError::Parse { line: 2, .. })
        ));
    }
}
