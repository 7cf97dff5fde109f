//! Deterministic README cleaning for prompt context.

use std::sync::OnceLock;

use regex::Regex;

/// Default character budget for a cleaned README in a prompt.
pub const DEFAULT_MAX_CONTEXT_CHARS: usize = 1500;

struct Patterns {
    fenced: Regex,
    inline: Regex,
    url: Regex,
    space: Regex,
}

fn patterns() -> &'static Patterns {
    static PATTERNS: OnceLock<Patterns> = OnceLock::new();
    PATTERNS.get_or_init(|| Patterns {
        fenced: Regex::new(r"(?s)```.*?```").unwrap(),
        inline: Regex::new(r"`[^`]*`").unwrap(),
        url: Regex::new(r"(?i)https?://\S*").unwrap(),
        space: Regex::new(r"\s+").unwrap(),
    })
}

fn keep_char(c: char) -> bool {
    if (c as u32) > 0xFFFF {
        return false;
    }
    c.is_alphanumeric()
        || c.is_whitespace()
        || c.is_ascii_punctuation()
        // general punctuation block: dashes, quotes, ellipsis, daggers
        || matches!(c, '\u{2010}'..='\u{2027}' | '\u{2030}'..='\u{205E}')
}

/// Strips code, URLs, emoji and symbols from README text and collapses all
/// whitespace (including newlines) to single spaces.
///
/// Removed spans are replaced by a space so that neighbouring words never
/// fuse. The function is idempotent.
pub fn clean_readme(raw: &str) -> String {
    let p = patterns();
    let filtered: String = raw.chars().filter(|&c| keep_char(c)).collect();
    let text = p.fenced.replace_all(&filtered, " ");
    let text = p.inline.replace_all(&text, " ");
    let text = p.url.replace_all(&text, " ");
    p.space.replace_all(&text, " ").trim().to_string()
}

/// Cuts `text` to at most `max_chars` characters, backing off to the last
/// word boundary when the cut lands inside a word.
pub fn truncate_words(text: &str, max_chars: usize) -> String {
    if text.chars().count() <= max_chars {
        return text.to_string();
    }
    let cut = text
        .char_indices()
        .nth(max_chars)
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let head = &text[..cut];
    let next_is_space = text[cut..].starts_with(char::is_whitespace);
    let trimmed = if next_is_space {
        head
    } else {
        match head.rfind(char::is_whitespace) {
            Some(i) => &head[..i],
            None => head,
        }
    };
    trimmed.trim_end().to_string()
}

/// `clean_readme` followed by `truncate_words`.
pub fn readme_context(raw: &str, max_chars: usize) -> String {
    truncate_words(&clean_readme(raw), max_chars)
}
