//! Prompt construction for model-backed hops and the inverse view used by
//! mock backends to recover what they were asked.

use crate::diagnostic::Diagnostic;

pub const SOURCE_OPEN: &str = "--- source ---";
pub const SOURCE_CLOSE: &str = "--- end source ---";
pub const PREVIOUS_OPEN: &str = "--- previous attempt ---";
pub const PREVIOUS_CLOSE: &str = "--- end previous attempt ---";
pub const DIAGNOSTICS_OPEN: &str = "--- diagnostics ---";

/// Placeholders: `{source-formalism}`, `{target-formalism}`,
/// `{target-grammar}`, `{source-content}`, `{diagnostics}`.
pub const DEFAULT_TEMPLATE: &str = "translate {source-formalism} -> {target-formalism}\n\
Reply with one artifact in the target formalism that keeps every element of the source.\n\
--- target grammar ---\n\
{target-grammar}\n\
--- source ---\n\
{source-content}\n\
--- end source ---\n\
{diagnostics}";

pub const SCRIPT_TEMPLATE: &str = "script {source-formalism} -> {target-formalism}\n\
Reply with a conversion script in the mapping language, one statement per line:\n\
  rename OLD NEW | drop NAME | synthesize key NAME TYPE | synthesize field NAME VALUE\n\
  cast NAME TYPE | map-field FROM TO | map-field * *\n\
--- target grammar ---\n\
{target-grammar}\n\
--- source ---\n\
{source-content}\n\
--- end source ---\n\
{diagnostics}";

/// Output of the previous attempt, fed back on retries.
#[derive(Debug, Clone, Copy)]
pub struct Feedback<'a> {
    pub candidate: &'a str,
    pub diagnostics: &'a [Diagnostic],
}

#[derive(Debug, Clone, Copy)]
pub struct PromptInputs<'a> {
    pub source_formalism: &'a str,
    pub target_formalism: &'a str,
    pub target_grammar: &'a str,
    pub source_content: &'a str,
    pub feedback: Option<Feedback<'a>>,
}

fn feedback_section(feedback: &Feedback<'_>) -> String {
    let mut out = String::new();
    out.push_str(PREVIOUS_OPEN);
    out.push('\n');
    out.push_str(feedback.candidate);
    if !feedback.candidate.ends_with('\n') {
        out.push('\n');
    }
    out.push_str(PREVIOUS_CLOSE);
    out.push('\n');
    out.push_str(DIAGNOSTICS_OPEN);
    out.push('\n');
    for d in feedback.diagnostics {
        out.push_str(&d.feedback_line());
        out.push('\n');
    }
    out.push_str("Fix every diagnostic above and reply with the corrected artifact only.\n");
    out
}

pub fn render_prompt(template: &str, inputs: &PromptInputs<'_>) -> String {
    let diagnostics = inputs.feedback.as_ref().map(feedback_section).unwrap_or_default();
    let content = inputs.source_content.strip_suffix('\n').unwrap_or(inputs.source_content);
    template
        .replace("{source-formalism}", inputs.source_formalism)
        .replace("{target-formalism}", inputs.target_formalism)
        .replace("{target-grammar}", inputs.target_grammar)
        .replace("{source-content}", content)
        .replace("{diagnostics}", &diagnostics)
}

/// What a prompt built from one of the default templates asks for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptView {
    pub script: bool,
    pub source_formalism: String,
    pub target_formalism: String,
    pub source_content: String,
    pub previous: Option<String>,
}

impl PromptView {
    pub fn parse(prompt: &str) -> Option<Self> {
        let first = prompt.lines().next()?;
        let (script, rest) = if let Some(rest) = first.strip_prefix("translate ") {
            (false, rest)
        } else {
            (true, first.strip_prefix("script ")?)
        };
        let (source, target) = rest.split_once(" -> ")?;
        let source_content = between(prompt, SOURCE_OPEN, SOURCE_CLOSE)?;
        let previous = between(prompt, PREVIOUS_OPEN, PREVIOUS_CLOSE);
        Some(Self {
            script,
            source_formalism: source.trim().to_string(),
            target_formalism: target.trim().to_string(),
            source_content,
            previous,
        })
    }
}

fn between(text: &str, open: &str, close: &str) -> Option<String> {
    let open_line = format!("{open}\n");
    let start = text.find(&open_line)? + open_line.len();
    let rest = &text[start..];
    let close_line = format!("{close}\n");
    let end = if rest.starts_with(&close_line) {
        0
    } else {
        rest.find(&format!("\n{close_line}"))? + 1
    };
    let inner = &rest[..end];
    // an empty source renders as one blank line
    Some(if inner == "\n" { String::new() } else { inner.to_string() })
}
