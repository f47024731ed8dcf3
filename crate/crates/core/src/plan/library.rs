use super::{parse_scripts, PlanError, Role, ScriptDef};

/// Scripts addressable by (name, role variant).
#[derive(Clone, Debug, Default)]
pub struct ScriptLibrary {
    scripts: Vec<ScriptDef>,
}

/// Checks for duplicate (name, role) pairs and RUN NEW targets that name no script.
pub fn load_library(defs: Vec<ScriptDef>) -> Result<ScriptLibrary, PlanError> {
    for (i, d) in defs.iter().enumerate() {
        if defs[..i].iter().any(|e| e.name == d.name && e.role == d.role) {
            return Err(PlanError::Duplicate {
                name: d.name.clone(),
                role: d.role,
            });
        }
    }
    for d in &defs {
        for (target, line) in d.references() {
            if !defs.iter().any(|e| e.name == target) {
                return Err(PlanError::Dangling {
                    script: d.name.clone(),
                    target: target.to_string(),
                    line,
                });
            }
        }
    }
    Ok(ScriptLibrary { scripts: defs })
}

impl ScriptLibrary {
    pub fn parse(src: &str) -> Result<Self, PlanError> {
        load_library(parse_scripts(src)?)
    }

    /// The variant for `role`, falling back to the `any` variant.
    pub fn get(&self, name: &str, role: Role) -> Option<&ScriptDef> {
        self.scripts
            .iter()
            .find(|s| s.name == name && s.role == role)
            .or_else(|| {
                self.scripts
                    .iter()
                    .find(|s| s.name == name && s.role == Role::Any)
            })
    }

    /// Domain scripts achieving `goal`, by name.
    pub fn candidates(&self, goal: &str) -> Vec<&ScriptDef> {
        let mut v: Vec<&ScriptDef> = self
            .scripts
            .iter()
            .filter(|s| s.goal.as_deref() == Some(goal))
            .collect();
        v.sort_by(|a, b| a.name.cmp(&b.name));
        v.dedup_by(|a, b| a.name == b.name);
        v
    }

    pub fn len(&self) -> usize {
        self.scripts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scripts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ScriptDef> {
        self.scripts.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;

    #[test]
    fn shipped_library_has_eight_scripts() {
        let lib = ScriptLibrary::parse(assets::SCRIPTS).unwrap();
        assert_eq!(lib.len(), 8);
        assert_eq!(
            lib.get("COLLABORATIVE-ACTIVITY", Role::Leader).unwrap().role,
            Role::Leader
        );
        assert_eq!(
            lib.get("SEARCH-FOR-LOST-OBJECT", Role::Subordinate).unwrap().role,
            Role::Any
        );
        assert_eq!(lib.candidates("SEARCH-FOR-LOST-OBJECT").len(), 1);
    }

    #[test]
    fn duplicate_variant_rejected() {
        let src = "@CA (leader)\n[A]\n  *f\n@CA (leader)\n[A]\n  *g\n";
        assert_eq!(
            ScriptLibrary::parse(src).unwrap_err(),
            PlanError::Duplicate {
                name: "CA".into(),
                role: Role::Leader
            }
        );
    }

    #[test]
    fn dangling_reference_rejected() {
        let src = "@CA (leader)\n[A]\n  RUN NEW @MISSING\n";
        assert_eq!(
            ScriptLibrary::parse(src).unwrap_err(),
            PlanError::Dangling {
                script: "CA".into(),
                target: "MISSING".into(),
                line: 3
            }
        );
    }
}
