//! Prompt construction for zero-shot, few-shot and few-shot-with-history
//! requests.
//!
//! Every prompt is assembled from editable text templates (see
//! [`PromptTemplates`]). The defaults ship in `assets/prompts/` and can be
//! replaced wholesale with [`PromptTemplates::load_dir`].

mod examples;
mod template;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{LibraryCoordinate, ProjectRecord};

pub use examples::{select_examples, ExampleSelection};
pub use template::{render as render_template, Vars};

pub const DEFAULT_EXAMPLE_COUNT: usize = 3;
pub const DEFAULT_MAX_PROMPT_CHARS: usize = 8000;
pub const INSTRUCTION_COUNT: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PromptError {
    #[error("strategy asks for {wanted} example(s) but only {available} are available")]
    NotEnoughExamples { wanted: usize, available: usize },
    #[error("invalid prompt strategy: {0}")]
    InvalidStrategy(String),
    #[error("prompt needs {len} characters even without examples (budget {max})")]
    OverBudget { len: usize, max: usize },
    #[error("conversation history must alternate Human/AI starting with Human (turn {0})")]
    MalformedHistory(usize),
    #[error("template {name}: {message}")]
    Template { name: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    ZeroShot,
    FewShot,
    FewShotHistory,
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero-shot" => Ok(StrategyKind::ZeroShot),
            "few-shot" => Ok(StrategyKind::FewShot),
            "few-shot-history" => Ok(StrategyKind::FewShotHistory),
            other => Err(format!(
                "unknown strategy {other:?} (expected zero-shot, few-shot or few-shot-history)"
            )),
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyKind::ZeroShot => "zero-shot",
            StrategyKind::FewShot => "few-shot",
            StrategyKind::FewShotHistory => "few-shot-history",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptStrategy {
    pub kind: StrategyKind,
    #[serde(default)]
    pub example_count: usize,
    #[serde(default = "default_true")]
    pub include_instructions: bool,
}

fn default_true() -> bool {
    true
}

impl PromptStrategy {
    pub fn zero_shot() -> Self {
        PromptStrategy {
            kind: StrategyKind::ZeroShot,
            example_count: 0,
            include_instructions: true,
        }
    }

    pub fn few_shot(example_count: usize) -> Self {
        PromptStrategy {
            kind: StrategyKind::FewShot,
            example_count,
            include_instructions: true,
        }
    }

    pub fn few_shot_history(example_count: usize) -> Self {
        PromptStrategy {
            kind: StrategyKind::FewShotHistory,
            example_count,
            include_instructions: false,
        }
    }

    /// Canonical strategy for a kind: zero-shot never has examples and the
    /// history variant never carries the instruction list.
    pub fn of_kind(kind: StrategyKind, example_count: usize) -> Self {
        match kind {
            StrategyKind::ZeroShot => Self::zero_shot(),
            StrategyKind::FewShot => Self::few_shot(example_count),
            StrategyKind::FewShotHistory => Self::few_shot_history(example_count),
        }
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        match self.kind {
            StrategyKind::ZeroShot if self.example_count != 0 => Err(PromptError::InvalidStrategy(
                "zero-shot prompts take no examples".into(),
            )),
            StrategyKind::FewShotHistory if self.include_instructions => {
                Err(PromptError::InvalidStrategy(
                    "few-shot-history prompts carry no instruction list".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

/// The six instruction lines plus the avoid-list substituted into them.
#[derive(Debug, Clone, PartialEq)]
pub struct InstructionSet {
    pub items: [String; INSTRUCTION_COUNT],
    pub popular_libraries: Vec<LibraryCoordinate>,
}

impl InstructionSet {
    pub fn new(templates: &PromptTemplates, popular_libraries: Vec<LibraryCoordinate>) -> Self {
        InstructionSet {
            items: templates.instructions.clone(),
            popular_libraries,
        }
    }

    pub fn popular_list(&self) -> String {
        if self.popular_libraries.is_empty() {
            "no specific libraries".to_string()
        } else {
            self.popular_libraries
                .iter()
                .map(LibraryCoordinate::as_str)
                .collect::<Vec<_>>()
                .join(", ")
        }
    }

    /// Instruction texts with the avoid-list filled in.
    pub fn rendered_items(&self) -> Vec<String> {
        let vars: Vars<'_> = [("popular_libraries", self.popular_list())].into();
        self.items.iter().map(|t| render_template(t, &vars)).collect()
    }

    pub fn render(&self) -> String {
        self.rendered_items()
            .iter()
            .enumerate()
            .map(|(i, t)| format!("{}. {}", i + 1, t))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub project_name: String,
    pub description: String,
    pub dependencies: Vec<LibraryCoordinate>,
}

impl FewShotExample {
    pub fn from_project(p: &ProjectRecord) -> Self {
        FewShotExample {
            project_name: p.name.clone(),
            description: p.description.clone(),
            dependencies: p.dependencies.iter().cloned().collect(),
        }
    }

    fn render(&self, index: usize) -> String {
        format!(
            "Example {index}:\nProject: {}\nDescription: {}\nExisting Dependencies: {}",
            self.project_name,
            self.description,
            join_coordinates(&self.dependencies)
        )
    }
}

fn join_coordinates<'a>(coords: impl IntoIterator<Item = &'a LibraryCoordinate>) -> String {
    let joined = coords
        .into_iter()
        .map(LibraryCoordinate::as_str)
        .collect::<Vec<_>>()
        .join(", ");
    if joined.is_empty() {
        "none".to_string()
    } else {
        joined
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Speaker {
    Human,
    AI,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationHistory {
    pub turns: Vec<Turn>,
}

impl ConversationHistory {
    pub fn push_exchange(&mut self, human: impl Into<String>, ai: impl Into<String>) {
        self.turns.push(Turn {
            speaker: Speaker::Human,
            text: human.into(),
        });
        self.turns.push(Turn {
            speaker: Speaker::AI,
            text: ai.into(),
        });
    }

    /// Keeps only the last `exchanges` Human/AI pairs.
    pub fn truncate_to_last(&mut self, exchanges: usize) {
        let keep = exchanges * 2;
        if self.turns.len() > keep {
            self.turns.drain(..self.turns.len() - keep);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        for (i, turn) in self.turns.iter().enumerate() {
            let expected = if i % 2 == 0 { Speaker::Human } else { Speaker::AI };
            if turn.speaker != expected {
                return Err(PromptError::MalformedHistory(i));
            }
        }
        Ok(())
    }

    /// Llama-2 chat markers: `<s>[INST] Human: .. [/INST] AI: .. </s>`.
    pub fn render(&self) -> String {
        let mut lines = Vec::new();
        for turn in &self.turns {
            match turn.speaker {
                Speaker::Human => lines.push(format!("<s>[INST] Human: {} [/INST]", turn.text)),
                Speaker::AI => {
                    let ai = format!(" AI: {} </s>", turn.text);
                    match lines.last_mut() {
                        Some(last) => last.push_str(&ai),
                        None => lines.push(ai.trim_start().to_string()),
                    }
                }
            }
        }
        lines.join("\n")
    }
}

/// The block describing the project recommendations are requested for.
pub fn render_target(target: &ProjectRecord) -> String {
    let mut out = format!("Project to extend: {}\n", target.name);
    if !target.description.is_empty() {
        out.push_str(&format!("Description: {}\n", target.description));
    }
    if !target.readme_context.is_empty() {
        out.push_str(&format!("README: {}\n", target.readme_context));
    }
    out.push_str(&format!(
        "Current Dependencies: {}\n",
        join_coordinates(&target.dependencies)
    ));
    out.push_str("Recommend additional libraries for this project.");
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplates {
    pub role: String,
    pub instructions: [String; INSTRUCTION_COUNT],
    pub zero_shot: String,
    pub few_shot: String,
    pub few_shot_history: String,
}

const ROLE: &str = include_str!("../../assets/prompts/role.txt");
const INSTRUCTIONS: &str = include_str!("../../assets/prompts/instructions.txt");
const ZERO_SHOT: &str = include_str!("../../assets/prompts/zero_shot.txt");
const FEW_SHOT: &str = include_str!("../../assets/prompts/few_shot.txt");
const FEW_SHOT_HISTORY: &str = include_str!("../../assets/prompts/few_shot_history.txt");

fn parse_instructions(text: &str) -> Result<[String; INSTRUCTION_COUNT], PromptError> {
    let lines: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    lines.try_into().map_err(|v: Vec<String>| PromptError::Template {
        name: "instructions.txt".into(),
        message: format!("expected {INSTRUCTION_COUNT} non-empty lines, found {}", v.len()),
    })
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            role: ROLE.trim().to_string(),
            instructions: parse_instructions(INSTRUCTIONS).expect("bundled instructions"),
            zero_shot: ZERO_SHOT.to_string(),
            few_shot: FEW_SHOT.to_string(),
            few_shot_history: FEW_SHOT_HISTORY.to_string(),
        }
    }
}

impl PromptTemplates {
    /// Loads templates from a directory laid out like `assets/prompts/`.
    /// Missing files fall back to the bundled defaults.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let read = |name: &str| -> Result<Option<String>, PromptError> {
            let path = dir.join(name);
            if !path.exists() {
                return Ok(None);
            }
            fs::read_to_string(&path)
                .map(Some)
                .map_err(|e| PromptError::Template {
                    name: name.into(),
                    message: e.to_string(),
                })
        };
        let mut t = PromptTemplates::default();
        if let Some(s) = read("role.txt")? {
            t.role = s.trim().to_string();
        }
        if let Some(s) = read("instructions.txt")? {
            t.instructions = parse_instructions(&s)?;
        }
        if let Some(s) = read("zero_shot.txt")? {
            t.zero_shot = s;
        }
        if let Some(s) = read("few_shot.txt")? {
            t.few_shot = s;
        }
        if let Some(s) = read("few_shot_history.txt")? {
            t.few_shot_history = s;
        }
        Ok(t)
    }
}

fn tidy(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut blank_run = 0;
    for line in text.trim().lines() {
        let line = line.trim_end();
        if line.is_empty() {
            blank_run += 1;
            if blank_run > 1 {
                continue;
            }
        } else {
            blank_run = 0;
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptRenderer {
    pub templates: PromptTemplates,
    pub max_chars: usize,
}

impl Default for PromptRenderer {
    fn default() -> Self {
        PromptRenderer {
            templates: PromptTemplates::default(),
            max_chars: DEFAULT_MAX_PROMPT_CHARS,
        }
    }
}

impl PromptRenderer {
    pub fn new(templates: PromptTemplates, max_chars: usize) -> Self {
        PromptRenderer {
            templates,
            max_chars,
        }
    }

    fn render_with(
        &self,
        strategy: &PromptStrategy,
        target: &ProjectRecord,
        examples: &[FewShotExample],
        history: &ConversationHistory,
        instructions: &InstructionSet,
    ) -> String {
        let examples_block = examples
            .iter()
            .enumerate()
            .map(|(i, e)| e.render(i + 1))
            .collect::<Vec<_>>()
            .join("\n\n");
        let target_block = render_target(target);
        let instructions_block = if strategy.include_instructions {
            instructions.render()
        } else {
            String::new()
        };
        let input = if examples_block.is_empty() {
            target_block.clone()
        } else {
            format!("{examples_block}\n\n{target_block}")
        };
        let vars: Vars<'_> = [
            ("role", self.templates.role.clone()),
            ("instructions", instructions_block),
            ("examples", examples_block),
            ("history", history.render()),
            ("target", target_block),
            ("input", input),
            ("popular_libraries", instructions.popular_list()),
        ]
        .into();
        let template = match strategy.kind {
            StrategyKind::ZeroShot => &self.templates.zero_shot,
            StrategyKind::FewShot => &self.templates.few_shot,
            StrategyKind::FewShotHistory => &self.templates.few_shot_history,
        };
        tidy(&render_template(template, &vars))
    }

    /// Renders a prompt, dropping trailing examples until it fits the
    /// character budget. Instructions and the target block are never cut.
    pub fn render(
        &self,
        strategy: &PromptStrategy,
        target: &ProjectRecord,
        examples: &[FewShotExample],
        history: &ConversationHistory,
        instructions: &InstructionSet,
    ) -> Result<String, PromptError> {
        strategy.validate()?;
        history.validate()?;
        if strategy.example_count > examples.len() {
            return Err(PromptError::NotEnoughExamples {
                wanted: strategy.example_count,
                available: examples.len(),
            });
        }
        let mut used = strategy.example_count;
        loop {
            let text = self.render_with(strategy, target, &examples[..used], history, instructions);
            let len = text.chars().count();
            if len <= self.max_chars {
                return Ok(text);
            }
            if used == 0 {
                return Err(PromptError::OverBudget {
                    len,
                    max: self.max_chars,
                });
            }
            used -= 1;
        }
    }
}

/// [`PromptRenderer::render`] with the bundled templates and default budget.
pub fn render_prompt(
    strategy: &PromptStrategy,
    target: &ProjectRecord,
    examples: &[FewShotExample],
    history: &ConversationHistory,
    instructions: &InstructionSet,
) -> Result<String, PromptError> {
    PromptRenderer::default().render(strategy, target, examples, history, instructions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(s: &str) -> LibraryCoordinate {
        LibraryCoordinate::parse(s).unwrap()
    }

    fn target() -> ProjectRecord {
        ProjectRecord::new("web-app", [c("org.springframework:spring-core"), c("com.fasterxml.jackson.core:jackson-core")])
            .with_description("A small web application")
    }

    fn examples(n: usize) -> Vec<FewShotExample> {
        (0..n)
            .map(|i| FewShotExample {
                project_name: format!("ex{i}"),
                description: format!("example project {i}"),
                dependencies: vec![c(&format!("g{i}:a{i}"))],
            })
            .collect()
    }

    fn instructions() -> InstructionSet {
        InstructionSet::new(&PromptTemplates::default(), vec![c("junit:junit"), c("log4j:log4j")])
    }

    #[test]
    fn zero_shot_has_role_and_all_instructions() {
        let out = render_prompt(
            &PromptStrategy::zero_shot(),
            &target(),
            &[],
            &ConversationHistory::default(),
            &instructions(),
        )
        .unwrap();
        assert!(out.contains("As an AI specializing in software library recommendations"));
        for item in instructions().rendered_items() {
            assert!(out.contains(&item), "missing {item}");
        }
        assert!(out.contains("Avoid junit:junit, log4j:log4j."));
        assert_eq!(out.matches("Project:").count(), 0);
        assert!(!out.contains("popular_libraries"));
    }

    #[test]
    fn few_shot_places_examples_before_instructions() {
        let out = render_prompt(
            &PromptStrategy::few_shot(2),
            &target(),
            &examples(3),
            &ConversationHistory::default(),
            &instructions(),
        )
        .unwrap();
        assert_eq!(out.matches("Existing Dependencies:").count(), 2);
        let last_example = out.rfind("Existing Dependencies:").unwrap();
        let first_instruction = out.find("1. Ensure").unwrap();
        let target_at = out.find("Project to extend:").unwrap();
        assert!(last_example < first_instruction && first_instruction < target_at);
    }

    #[test]
    fn history_prompt_with_empty_history() {
        let out = render_prompt(
            &PromptStrategy::few_shot_history(0),
            &target(),
            &[],
            &ConversationHistory::default(),
            &instructions(),
        )
        .unwrap();
        assert!(out.contains("Project to extend: web-app"));
        assert!(out.contains("Human: Project to extend"));
        assert!(!out.contains("<s>[INST] Human:"));
        for item in instructions().rendered_items() {
            assert!(!out.contains(&item));
        }
    }

    #[test]
    fn history_prompt_serializes_turns() {
        let mut h = ConversationHistory::default();
        h.push_exchange("earlier project", "1: a:a");
        let out = render_prompt(
            &PromptStrategy::few_shot_history(1),
            &target(),
            &examples(1),
            &h,
            &instructions(),
        )
        .unwrap();
        assert!(out.starts_with("<s>[INST] <<SYS>> As an AI"));
        assert!(out.contains("<s>[INST] Human: earlier project [/INST] AI: 1: a:a </s>"));
        assert!(out.contains("<s>[INST] Human: Example 1:"));
        assert!(out.trim_end().ends_with("[/INST] AI: </s>"));
    }

    #[test]
    fn invalid_inputs() {
        let h = ConversationHistory::default();
        let err = render_prompt(&PromptStrategy::few_shot(4), &target(), &examples(2), &h, &instructions());
        assert_eq!(err.unwrap_err(), PromptError::NotEnoughExamples { wanted: 4, available: 2 });
        let bad = PromptStrategy { example_count: 1, ..PromptStrategy::zero_shot() };
        assert!(matches!(
            render_prompt(&bad, &target(), &examples(1), &h, &instructions()),
            Err(PromptError::InvalidStrategy(_))
        ));
        let backwards = ConversationHistory {
            turns: vec![Turn { speaker: Speaker::AI, text: "hi".into() }],
        };
        assert_eq!(
            render_prompt(&PromptStrategy::few_shot_history(0), &target(), &[], &backwards, &instructions()),
            Err(PromptError::MalformedHistory(0))
        );
    }

    #[test]
    fn budget_drops_examples_from_the_end() {
        let base = render_prompt(
            &PromptStrategy::few_shot(0),
            &target(),
            &[],
            &ConversationHistory::default(),
            &instructions(),
        )
        .unwrap();
        let renderer = PromptRenderer::new(PromptTemplates::default(), base.chars().count() + 120);
        let out = renderer
            .render(&PromptStrategy::few_shot(3), &target(), &examples(3), &ConversationHistory::default(), &instructions())
            .unwrap();
        assert!(out.chars().count() <= renderer.max_chars);
        assert!(out.contains("Project: ex0"));
        assert!(!out.contains("Project: ex2"));
        assert!(out.contains("6. Provide"));

        let tiny = PromptRenderer::new(PromptTemplates::default(), 10);
        assert!(matches!(
            tiny.render(&PromptStrategy::zero_shot(), &target(), &[], &ConversationHistory::default(), &instructions()),
            Err(PromptError::OverBudget { .. })
        ));
    }

    #[test]
    fn loads_template_overrides() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("role.txt"), "You recommend libraries.\n").unwrap();
        let t = PromptTemplates::load_dir(dir.path()).unwrap();
        assert_eq!(t.role, "You recommend libraries.");
        assert_eq!(t.instructions, PromptTemplates::default().instructions);
        fs::write(dir.path().join("instructions.txt"), "only one\n").unwrap();
        assert!(PromptTemplates::load_dir(dir.path()).is_err());
    }

    proptest! {
        #[test]
        fn rendering_is_pure_and_keeps_target_dependencies(
            deps in prop::collection::btree_set("[a-z]{1,5}:[a-z]{1,5}", 0..6),
            desc in "[A-Za-z ]{0,40}",
            kind in prop::sample::select(vec![StrategyKind::ZeroShot, StrategyKind::FewShot, StrategyKind::FewShotHistory]),
        ) {
            let t = ProjectRecord::new("p", deps.iter().map(|d| c(d))).with_description(desc);
            let strategy = PromptStrategy::of_kind(kind, 2);
            let h = ConversationHistory::default();
            let a = render_prompt(&strategy, &t, &examples(2), &h, &instructions()).unwrap();
            let b = render_prompt(&strategy, &t, &examples(2), &h, &instructions()).unwrap();
            prop_assert_eq!(&a, &b);
            let dep_line = format!("Current Dependencies: {}", join_coordinates(&t.dependencies));
            prop_assert!(a.contains(&dep_line));
            prop_assert!(!a.contains("popular_libraries"));
            prop_assert!(a.chars().count() <= DEFAULT_MAX_PROMPT_CHARS);
        }
    }
}
