//! Claim text normalization.
//!
//! Passes run in a fixed order: HTML, URL, email, mention, digits, emoji,
//! punctuation, whitespace. Replacement tokens are emitted as protected
//! segments surrounded by spaces, and literal tokens already present in the
//! input are protected before the first pass, which makes the whole
//! transformation idempotent.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizationConfig {
    pub url_token: String,
    pub email_token: String,
    pub user_token: String,
    pub digit_token: String,
    pub strip_punctuation: bool,
    pub strip_emoji: bool,
    pub strip_html: bool,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        NormalizationConfig {
            url_token: "[رابط]".into(),
            email_token: "[بريد]".into(),
            user_token: "[مستخدم]".into(),
            digit_token: "[رقم]".into(),
            strip_punctuation: true,
            strip_emoji: true,
            strip_html: true,
        }
    }
}

impl NormalizationConfig {
    /// Replacement tokens must be non-empty and free of whitespace.
    pub fn validate(&self) -> Result<(), String> {
        for (name, tok) in self.tokens() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(alloc::format!(
                    "{name} must be non-empty and contain no whitespace"
                ));
            }
        }
        Ok(())
    }

    fn tokens(&self) -> [(&'static str, &str); 4] {
        [
            ("url_token", &self.url_token),
            ("email_token", &self.email_token),
            ("user_token", &self.user_token),
            ("digit_token", &self.digit_token),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Url,
    Email,
    User,
    Digit,
}

#[derive(Debug)]
enum Seg {
    Text(Vec<char>),
    Token(Kind),
}

/// Normalizes `raw` according to `cfg`. Never fails; the result may be empty.
pub fn normalize_text(raw: &str, cfg: &NormalizationConfig) -> String {
    let mut segs = protect(raw, cfg);
    if cfg.strip_html {
        segs = pass(segs, strip_html);
    }
    segs = pass(segs, |t, out| replace_spans(t, out, Kind::Url, url_span));
    segs = pass(segs, |t, out| {
        replace_spans(t, out, Kind::Email, email_span)
    });
    segs = pass(segs, |t, out| {
        replace_spans(t, out, Kind::User, mention_span)
    });
    segs = pass(segs, |t, out| {
        replace_spans(t, out, Kind::Digit, digit_span)
    });
    if cfg.strip_emoji {
        segs = pass(segs, |t, out| {
            out.push(Seg::Text(
                t.iter()
                    .map(|&c| if is_emoji(c) { ' ' } else { c })
                    .collect(),
            ))
        });
    }
    if cfg.strip_punctuation {
        segs = pass(segs, |t, out| {
            out.push(Seg::Text(
                t.iter()
                    .filter_map(|&c| match c {
                        '_' => Some(' '),
                        c if is_punctuation(c) => None,
                        c => Some(c),
                    })
                    .collect(),
            ))
        });
    }
    render(&segs, cfg)
}

fn token_str(kind: Kind, cfg: &NormalizationConfig) -> &str {
    match kind {
        Kind::Url => &cfg.url_token,
        Kind::Email => &cfg.email_token,
        Kind::User => &cfg.user_token,
        Kind::Digit => &cfg.digit_token,
    }
}

/// Splits out literal occurrences of the replacement tokens.
fn protect(raw: &str, cfg: &NormalizationConfig) -> Vec<Seg> {
    let kinds = [Kind::Url, Kind::Email, Kind::User, Kind::Digit];
    let mut out = Vec::new();
    let mut rest = raw;
    loop {
        let next = kinds
            .iter()
            .filter_map(|&k| {
                let tok = token_str(k, cfg);
                (!tok.is_empty())
                    .then(|| rest.find(tok).map(|pos| (pos, k, tok.len())))
                    .flatten()
            })
            .min_by_key(|&(pos, _, len)| (pos, usize::MAX - len));
        match next {
            Some((pos, kind, len)) => {
                if pos > 0 {
                    out.push(Seg::Text(rest[..pos].chars().collect()));
                }
                out.push(Seg::Token(kind));
                rest = &rest[pos + len..];
            }
            None => {
                if !rest.is_empty() {
                    out.push(Seg::Text(rest.chars().collect()));
                }
                return out;
            }
        }
    }
}

fn pass(segs: Vec<Seg>, mut f: impl FnMut(&[char], &mut Vec<Seg>)) -> Vec<Seg> {
    let mut out = Vec::with_capacity(segs.len());
    for s in segs {
        match s {
            Seg::Text(t) => f(&t, &mut out),
            tok => out.push(tok),
        }
    }
    out
}

fn render(segs: &[Seg], cfg: &NormalizationConfig) -> String {
    let mut flat = String::new();
    for s in segs {
        match s {
            Seg::Text(t) => flat.extend(t.iter().map(|&c| if c.is_control() { ' ' } else { c })),
            Seg::Token(k) => {
                flat.push(' ');
                flat.push_str(token_str(*k, cfg));
                flat.push(' ');
            }
        }
    }
    let mut out = String::with_capacity(flat.len());
    for word in flat.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Replaces every span found by `find` (given a start index, returns the end
/// of a match starting there) with a token segment.
fn replace_spans(
    t: &[char],
    out: &mut Vec<Seg>,
    kind: Kind,
    find: impl Fn(&[char], usize) -> Option<(usize, usize)>,
) {
    let mut start = 0;
    let mut i = 0;
    while i < t.len() {
        match find(t, i) {
            Some((from, to)) => {
                if from > start {
                    out.push(Seg::Text(t[start..from].to_vec()));
                }
                out.push(Seg::Token(kind));
                start = to;
                i = to;
            }
            None => i += 1,
        }
    }
    if start < t.len() {
        out.push(Seg::Text(t[start..].to_vec()));
    }
}

fn starts_with_ci(t: &[char], i: usize, pat: &str) -> bool {
    let mut k = i;
    for p in pat.chars() {
        match t.get(k) {
            Some(c) if c.to_ascii_lowercase() == p => k += 1,
            _ => return false,
        }
    }
    true
}

fn url_span(t: &[char], i: usize) -> Option<(usize, usize)> {
    let prefix = ["https://", "http://", "www."]
        .into_iter()
        .find(|p| starts_with_ci(t, i, p))?;
    let mut end = i + prefix.chars().count();
    while end < t.len() && !t[end].is_whitespace() && !t[end].is_control() {
        end += 1;
    }
    Some((i, end))
}

fn is_email_local(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '%' | '+' | '-')
}

fn is_email_domain(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '.' | '-')
}

/// Matches when `t[i]` is the `@` of `local@domain.tld`; the span starts at
/// the beginning of the local part.
fn email_span(t: &[char], i: usize) -> Option<(usize, usize)> {
    if t[i] != '@' {
        return None;
    }
    let mut from = i;
    while from > 0 && is_email_local(t[from - 1]) {
        from -= 1;
    }
    if from == i {
        return None;
    }
    let mut end = i + 1;
    while end < t.len() && is_email_domain(t[end]) {
        end += 1;
    }
    while end > i + 1 && matches!(t[end - 1], '.' | '-') {
        end -= 1;
    }
    let domain = &t[i + 1..end];
    let dot = domain.iter().rposition(|&c| c == '.')?;
    let tld = &domain[dot + 1..];
    if dot == 0 || tld.len() < 2 || !tld.iter().all(char::is_ascii_alphabetic) {
        return None;
    }
    Some((from, end))
}

fn is_handle_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn mention_span(t: &[char], i: usize) -> Option<(usize, usize)> {
    if t[i] != '@' || !t.get(i + 1).copied().is_some_and(is_handle_char) {
        return None;
    }
    let mut end = i + 1;
    while end < t.len() && is_handle_char(t[end]) {
        end += 1;
    }
    Some((i, end))
}

fn is_digit(c: char) -> bool {
    c.is_ascii_digit()
        || ('\u{0660}'..='\u{0669}').contains(&c)
        || ('\u{06F0}'..='\u{06F9}').contains(&c)
}

/// A digit run, allowing single decimal/thousands separators between digits.
fn digit_span(t: &[char], i: usize) -> Option<(usize, usize)> {
    if !is_digit(t[i]) {
        return None;
    }
    let mut end = i + 1;
    loop {
        if end < t.len() && is_digit(t[end]) {
            end += 1;
        } else if end + 1 < t.len()
            && matches!(t[end], '.' | ',' | '\u{066B}' | '\u{066C}')
            && is_digit(t[end + 1])
        {
            end += 2;
        } else {
            return Some((i, end));
        }
    }
}

fn strip_html(t: &[char], out: &mut Vec<Seg>) {
    let mut text = Vec::with_capacity(t.len());
    let mut i = 0;
    while i < t.len() {
        let c = t[i];
        if c == '<'
            && t.get(i + 1)
                .is_some_and(|&n| n.is_ascii_alphabetic() || n == '/' || n == '!')
        {
            if let Some(close) = t[i + 1..].iter().position(|&x| x == '>' || x == '<') {
                if t[i + 1 + close] == '>' {
                    text.push(' ');
                    i += close + 2;
                    continue;
                }
            }
        }
        if c == '&' {
            if let Some(len) = entity_len(&t[i..]) {
                text.push(' ');
                i += len;
                continue;
            }
        }
        text.push(c);
        i += 1;
    }
    out.push(Seg::Text(text));
}

/// Length of `&name;` or `&#123;` at the start of `t`, if any.
fn entity_len(t: &[char]) -> Option<usize> {
    let body = t.iter().skip(1).take(10).position(|&c| c == ';')?;
    if body == 0 {
        return None;
    }
    let name = &t[1..1 + body];
    let ok = if name[0] == '#' {
        name.len() > 1 && name[1..].iter().all(|c| c.is_ascii_alphanumeric())
    } else {
        name.iter().all(char::is_ascii_alphanumeric)
    };
    ok.then_some(body + 2)
}

fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF
        | 0x2300..=0x23FF
        | 0x2600..=0x27BF
        | 0x2B00..=0x2BFF
        | 0xFE00..=0xFE0F
        | 0x200D
        | 0x20E3
        | 0x3030
        | 0x303D
        | 0x3297
        | 0x3299
        | 0xE0020..=0xE007F)
}

/// Combining marks that must survive punctuation stripping (Arabic harakat
/// and the generic combining blocks).
fn is_mark(c: char) -> bool {
    matches!(c as u32,
        0x0300..=0x036F
        | 0x0483..=0x0489
        | 0x0591..=0x05C7
        | 0x0610..=0x061A
        | 0x064B..=0x065F
        | 0x0670
        | 0x06D6..=0x06DC
        | 0x06DF..=0x06E4
        | 0x06E7..=0x06E8
        | 0x06EA..=0x06ED
        | 0x200C
        | 0xFE20..=0xFE2F)
}

/// Anything that is neither a letter/number, whitespace, control, nor a
/// combining mark: ASCII and Unicode punctuation plus symbols.
fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || !(c.is_alphanumeric() || c.is_whitespace() || c.is_control() || is_mark(c))
}
