//! Tokenizer shared by the model and query parsers.

use super::IngestError;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Word(String),
    Str(String),
    Punct(&'static str),
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

impl Token {
    pub fn describe(&self) -> String {
        match &self.tok {
            Tok::Word(w) => format!("'{w}'"),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::Punct(p) => format!("'{p}'"),
        }
    }
}

const PUNCT: [&str; 14] = [">=", "<=", ">", "<", ":", ";", ",", "[", "]", "{", "}", "(", ")", "|"];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '.' | '-' | '+' | '!' | '@' | '\'' | '/' | '$' | '%' | '&' | '*' | '?' | '~')
}

/// Splits `text` into tokens; `#` starts a comment running to the end of the line.
pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, IngestError> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            let at = |tok| Token { tok, line: li + 1, col };
            if c.is_whitespace() {
                i += 1;
            } else if c == '#' {
                break;
            } else if c == '"' {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => {
                            return Err(IngestError::Syntax { line: li + 1, col, message: "unterminated string".into() });
                        }
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            match chars.get(i + 1) {
                                Some(&e @ ('"' | '\\')) => s.push(e),
                                Some('n') => s.push('\n'),
                                _ => return Err(IngestError::Syntax { line: li + 1, col: i + 1, message: "bad escape".into() }),
                            }
                            i += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                out.push(at(Tok::Str(s)));
            } else if let Some(p) = PUNCT.iter().find(|p| {
                let pc: Vec<char> = p.chars().collect();
                chars[i..].starts_with(&pc)
            }) {
                i += p.chars().count();
                out.push(at(Tok::Punct(p)));
            } else if is_word_char(c) {
                let start = i;
                while i < chars.len() && is_word_char(chars[i]) {
                    i += 1;
                }
                out.push(at(Tok::Word(chars[start..i].iter().collect())));
            } else {
                return Err(IngestError::Syntax { line: li + 1, col, message: format!("unexpected character '{c}'") });
            }
        }
    }
    Ok(out)
}

/// Renders a name bare when it lexes back as a single word, quoted otherwise.
pub(crate) fn quote_if_needed(name: &str) -> String {
    let bare = !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !name.starts_with(|c: char| c.is_ascii_digit());
    if bare {
        name.to_string()
    } else {
        let mut s = String::from("\"");
        for c in name.chars() {
            match c {
                '"' => s.push_str("\\\""),
                '\\' => s.push_str("\\\\"),
                '\n' => s.push_str("\\n"),
                c => s.push(c),
            }
        }
        s.push('"');
        s
    }
}
