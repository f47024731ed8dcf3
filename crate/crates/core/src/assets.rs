//! Shipped domain data: ontology, lexicon, script library, default scenario.

pub const ONTOLOGY: &str = include_str!("../assets/ontology.txt");
pub const LEXICON: &str = include_str!("../assets/lexicon.txt");
pub const SCRIPTS: &str = include_str!("../assets/scripts.txt");
pub const SCENARIO: &str = include_str!("../assets/scenario.toml");
pub const HUMAN_SCRIPT: &str = include_str!("../assets/human.script");
pub const SCENARIO_NO_KEYS: &str = include_str!("../assets/scenario_no_keys.toml");
