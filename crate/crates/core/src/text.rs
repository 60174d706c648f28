//! Line-level helpers shared by the completion parsers.

/// Returns the inside of the first fenced block, if any, and its byte offset.
pub(crate) fn strip_code_fence(raw: &str) -> (&str, usize) {
    if let Some(open) = raw.find("```") {
        let after = open + 3;
        let Some(nl) = raw[after..].find('\n') else {
            return (raw, 0);
        };
        let content_start = after + nl + 1;
        if let Some(close) = raw[content_start..].find("```") {
            return (&raw[content_start..content_start + close], content_start);
        }
    }
    (raw, 0)
}

pub(crate) fn norm_key(key: &str) -> String {
    let mut out = String::new();
    for c in key.trim().chars() {
        if c.is_alphanumeric() {
            out.extend(c.to_lowercase());
        } else if (c == ' ' || c == '_' || c == '-') && !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

/// Splits at the first `:` that is outside parentheses.
pub(crate) fn split_key(line: &str) -> Option<(&str, &str)> {
    let mut depth = 0i32;
    for (i, c) in line.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ':' if depth == 0 => return Some((&line[..i], &line[i + 1..])),
            _ => {}
        }
    }
    None
}

pub(crate) fn split_outside_parens(text: &str, sep: char) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut current = String::new();
    for c in text.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if c == sep && depth <= 0 {
            out.push(std::mem::take(&mut current));
        } else {
            current.push(c);
        }
    }
    out.push(current);
    out
}

pub(crate) fn strip_parenthetical(text: &str) -> String {
    match text.find('(') {
        Some(i) => text[..i].to_string(),
        None => text.to_string(),
    }
}

/// Strips bullets, numbering, headings and markdown emphasis from a line.
pub(crate) fn clean_line(raw: &str) -> String {
    let mut s = raw.trim().replace("**", "").replace("__", "");
    loop {
        let t = s.trim_start();
        let stripped = if let Some(r) = t
            .strip_prefix(['-', '*', '•', '·', '+', '–', '—', '#', '◦', '○', '∘'])
        {
            r
        } else {
            let digits = t.chars().take_while(char::is_ascii_digit).count();
            if digits > 0 && t[digits..].starts_with(['.', ')']) {
                &t[digits + 1..]
            } else {
                break;
            }
        };
        s = stripped.to_string();
    }
    s.replace('*', "").trim().to_string()
}

pub(crate) fn clean_item(text: &str) -> String {
    text.trim()
        .trim_end_matches([';', ','])
        .trim_end_matches('.')
        .trim()
        .trim_matches('"')
        .trim()
        .to_string()
}

