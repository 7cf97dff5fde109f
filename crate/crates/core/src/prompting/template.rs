//! Minimal placeholder engine: `{{name}}` substitution plus line-level
//! `{ if name }` / `{ else }` / `{ endif }` blocks (one level, no nesting).

use std::collections::BTreeMap;

pub type Vars<'a> = BTreeMap<&'a str, String>;

fn directive(line: &str) -> Option<(&str, Option<&str>)> {
    let inner = line.trim().strip_prefix('{')?.strip_suffix('}')?.trim();
    if inner.starts_with('{') {
        return None;
    }
    let mut words = inner.split_whitespace();
    let head = words.next()?;
    match head {
        "if" => Some(("if", words.next())),
        "else" | "endif" => Some((head, None)),
        _ => None,
    }
}

fn resolve_conditionals(template: &str, vars: &Vars<'_>) -> String {
    let mut out = Vec::new();
    // (condition, in_else)
    let mut block: Option<(bool, bool)> = None;
    for line in template.lines() {
        match (directive(line), block) {
            (Some(("if", name)), _) => {
                let truthy = name.and_then(|n| vars.get(n)).is_some_and(|v| !v.trim().is_empty());
                block = Some((truthy, false));
            }
            (Some(("else", _)), Some((cond, _))) => block = Some((cond, true)),
            (Some(("endif", _)), _) => block = None,
            (_, Some((cond, in_else))) => {
                if cond != in_else {
                    out.push(line);
                }
            }
            (_, None) => out.push(line),
        }
    }
    let mut s = out.join("\n");
    if template.ends_with('\n') {
        s.push('\n');
    }
    s
}

/// Substitutes placeholders in one pass, so substituted values are never
/// re-expanded. Unknown placeholders are left as they are.
pub fn render(template: &str, vars: &Vars<'_>) -> String {
    let text = resolve_conditionals(template, vars);
    let mut out = String::with_capacity(text.len());
    let mut rest = text.as_str();
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                let name = after[..end].trim();
                match vars.get(name) {
                    Some(v) => out.push_str(v),
                    None => out.push_str(&rest[start..start + 2 + end + 2]),
                }
                rest = &after[end + 2..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}
