mod html;
mod markdown;

pub use html::render_html;
pub use markdown::render_markdown;

use serde::{Deserialize, Serialize};

use crate::merge::RepositoryLabel;

pub const DEFAULT_EVIDENCE_CAP: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    MachineReadable,
    HtmlPage,
    MarkdownSummary,
}

impl OutputFormat {
    pub const ALL: [OutputFormat; 3] = [OutputFormat::MachineReadable, OutputFormat::HtmlPage, OutputFormat::MarkdownSummary];

    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::MachineReadable => "label.json",
            OutputFormat::HtmlPage => "label.html",
            OutputFormat::MarkdownSummary => "label.md",
        }
    }

    pub fn parse(s: &str) -> Option<OutputFormat> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" | "machine" | "machine_readable" => Some(OutputFormat::MachineReadable),
            "html" | "html_page" => Some(OutputFormat::HtmlPage),
            "md" | "markdown" | "markdown_summary" => Some(OutputFormat::MarkdownSummary),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderOptions {
    pub format: OutputFormat,
    pub include_provenance_bubbles: bool,
    pub evidence_cap: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            format: OutputFormat::HtmlPage,
            include_provenance_bubbles: true,
            evidence_cap: DEFAULT_EVIDENCE_CAP,
        }
    }
}

/// Pretty JSON in declaration key order with a trailing newline.
pub fn render_machine(label: &RepositoryLabel) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(label).expect("label serializes");
    out.push(b'\n');
    out
}

pub fn parse_machine(bytes: &[u8]) -> Result<RepositoryLabel, serde_json::Error> {
    serde_json::from_slice(bytes)
}

pub fn render(label: &RepositoryLabel, options: &RenderOptions) -> Vec<u8> {
    match options.format {
        OutputFormat::MachineReadable => render_machine(label),
        OutputFormat::HtmlPage => render_html(label, options).into_bytes(),
        OutputFormat::MarkdownSummary => render_markdown(label).into_bytes(),
    }
}
