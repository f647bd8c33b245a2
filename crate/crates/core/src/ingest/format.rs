//! Line-oriented text format for Markov automata.
//!
//! ```text
//! @type: ma
//! @states: 2
//! @initial: 0
//! state 0 init
//!   action go
//!     1 : 1.0
//! state 1 goal
//!   rate 2.5
//!     0 : 0.5
//!     1 : 0.5
//! @rewards cost
//!   state 1 : 1.0
//!   action 0 go : 3.0
//! @end
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::lexer::{quote_if_needed, tokenize, Tok, Token};
use super::IngestError;
use crate::model::{Distribution, MarkovAutomaton, RewardFunction, StateId, MARKOVIAN_ACTION, MARKOVIAN_ACTION_NAME};

fn syntax(t: &Token, message: impl Into<String>) -> IngestError {
    IngestError::Syntax { line: t.line, col: t.col, message: message.into() }
}

fn dup(t: &Token, what: impl Into<String>) -> IngestError {
    IngestError::DuplicateDeclaration { line: t.line, col: t.col, what: what.into() }
}

struct Line<'a> {
    toks: &'a [Token],
    pos: usize,
    /// Position reported when the line ends early.
    end: (usize, usize),
}

impl<'a> Line<'a> {
    fn next(&mut self, what: &str) -> Result<&'a Token, IngestError> {
        let t = self.toks.get(self.pos).ok_or_else(|| IngestError::Syntax {
            line: self.end.0,
            col: self.end.1,
            message: format!("expected {what}"),
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn name(&mut self, what: &str) -> Result<(&'a Token, String), IngestError> {
        let t = self.next(what)?;
        match &t.tok {
            Tok::Word(w) | Tok::Str(w) => Ok((t, w.clone())),
            Tok::Punct(_) => Err(syntax(t, format!("expected {what}, found {}", t.describe()))),
        }
    }

    fn colon(&mut self) -> Result<(), IngestError> {
        let t = self.next("':'")?;
        if t.tok != Tok::Punct(":") {
            return Err(syntax(t, format!("expected ':', found {}", t.describe())));
        }
        Ok(())
    }

    fn number(&mut self, what: &str) -> Result<(&'a Token, f64), IngestError> {
        let t = self.next(what)?;
        match &t.tok {
            Tok::Word(w) => w.parse::<f64>().map(|v| (t, v)).map_err(|_| syntax(t, format!("expected {what}, found {}", t.describe()))),
            _ => Err(syntax(t, format!("expected {what}, found {}", t.describe()))),
        }
    }

    fn index(&mut self, what: &str) -> Result<(&'a Token, usize), IngestError> {
        let t = self.next(what)?;
        match &t.tok {
            Tok::Word(w) => w.parse::<usize>().map(|v| (t, v)).map_err(|_| syntax(t, format!("expected {what}, found {}", t.describe()))),
            _ => Err(syntax(t, format!("expected {what}, found {}", t.describe()))),
        }
    }

    fn finish(&self) -> Result<(), IngestError> {
        match self.toks.get(self.pos) {
            Some(t) => Err(syntax(t, format!("unexpected {}", t.describe()))),
            None => Ok(()),
        }
    }
}

enum RowKind {
    Action(String),
    Rate(f64),
}

struct Row {
    state: StateId,
    kind: RowKind,
    entries: Vec<(StateId, f64)>,
    at: Token,
}

enum Section {
    Header,
    State(StateId),
    Rewards(usize),
    End,
}

struct Builder {
    ma: Option<MarkovAutomaton>,
    declared: Vec<bool>,
    initial: Option<(usize, Token)>,
    row: Option<Row>,
    section: Section,
    actions_seen: Vec<BTreeSet<String>>,
}

impl Builder {
    fn ma(&mut self, t: &Token) -> Result<&mut MarkovAutomaton, IngestError> {
        self.ma.as_mut().ok_or_else(|| syntax(t, "@states must precede state declarations"))
    }

    fn flush(&mut self) -> Result<(), IngestError> {
        let Some(row) = self.row.take() else { return Ok(()) };
        if row.entries.is_empty() {
            return Err(syntax(&row.at, "transition has no targets"));
        }
        let ma = self.ma.as_mut().expect("rows only exist after @states");
        let dist = Distribution::new(row.entries);
        match row.kind {
            RowKind::Action(name) => {
                ma.add_probabilistic(row.state, &name, dist);
            }
            RowKind::Rate(rate) => ma.set_markovian(row.state, rate, dist),
        }
        Ok(())
    }

    fn state_index(&self, t: &Token, s: usize) -> Result<StateId, IngestError> {
        let n = self.declared.len();
        if s >= n {
            return Err(IngestError::UnknownState { line: t.line, col: t.col, state: s.to_string() });
        }
        Ok(s)
    }
}

/// Parses the text format. The result is exactly what the file says; call
/// [`MarkovAutomaton::normalize`] before analysis.
pub fn parse_model(text: &str) -> Result<MarkovAutomaton, IngestError> {
    let tokens = tokenize(text)?;
    let mut b = Builder { ma: None, declared: Vec::new(), initial: None, row: None, section: Section::Header, actions_seen: Vec::new() };
    let mut type_seen = false;
    let mut start = 0;
    while start < tokens.len() {
        let line_no = tokens[start].line;
        let mut stop = start;
        while stop < tokens.len() && tokens[stop].line == line_no {
            stop += 1;
        }
        let last = &tokens[stop - 1];
        let end_col = last.col + match &last.tok {
            Tok::Word(w) => w.chars().count(),
            Tok::Str(s) => s.chars().count() + 2,
            Tok::Punct(p) => p.len(),
        };
        let mut line = Line { toks: &tokens[start..stop], pos: 0, end: (line_no, end_col) };
        start = stop;
        let head = line.next("declaration")?;
        if matches!(b.section, Section::End) {
            return Err(syntax(head, "content after @end"));
        }
        let word = match &head.tok {
            Tok::Word(w) => w.as_str(),
            _ => return Err(syntax(head, format!("unexpected {}", head.describe()))),
        };
        match word {
            "@type" => {
                line.colon()?;
                let (t, ty) = line.name("model type")?;
                if ty != "ma" {
                    return Err(syntax(t, format!("unsupported model type '{ty}'")));
                }
                if type_seen {
                    return Err(dup(head, "@type"));
                }
                type_seen = true;
            }
            "@states" => {
                line.colon()?;
                let (_, n) = line.index("state count")?;
                if b.ma.is_some() {
                    return Err(dup(head, "@states"));
                }
                b.ma = Some(MarkovAutomaton::new(n, 0));
                b.declared = vec![false; n];
                b.actions_seen = vec![BTreeSet::new(); n];
            }
            "@initial" => {
                line.colon()?;
                let (t, s) = line.index("initial state")?;
                if b.initial.is_some() {
                    return Err(dup(head, "@initial"));
                }
                b.initial = Some((s, t.clone()));
            }
            "@rewards" => {
                b.flush()?;
                let (t, name) = line.name("reward name")?;
                let ma = b.ma(head)?;
                if ma.reward_index(&name).is_some() {
                    return Err(dup(t, format!("reward function {name}")));
                }
                ma.rewards.push(RewardFunction::new(name));
                b.section = Section::Rewards(ma.rewards.len() - 1);
            }
            "@end" => {
                b.flush()?;
                b.section = Section::End;
            }
            "state" if !matches!(b.section, Section::Rewards(_)) => {
                b.flush()?;
                if !type_seen {
                    return Err(syntax(head, "missing @type header"));
                }
                let (t, s) = line.index("state id")?;
                b.ma(head)?;
                let s = b.state_index(t, s)?;
                if b.declared[s] {
                    return Err(dup(t, format!("state {s}")));
                }
                b.declared[s] = true;
                while line.pos < line.toks.len() {
                    let (_, label) = line.name("label")?;
                    b.ma.as_mut().unwrap().add_label(s, &label);
                }
                b.section = Section::State(s);
            }
            "action" if matches!(b.section, Section::State(_)) => {
                b.flush()?;
                let Section::State(s) = b.section else { unreachable!() };
                let (t, name) = line.name("action name")?;
                if name == MARKOVIAN_ACTION_NAME {
                    return Err(syntax(t, "reserved action name"));
                }
                if !b.actions_seen[s].insert(name.clone()) {
                    return Err(dup(t, format!("action {name} of state {s}")));
                }
                b.row = Some(Row { state: s, kind: RowKind::Action(name), entries: Vec::new(), at: head.clone() });
            }
            "rate" if matches!(b.section, Section::State(_)) => {
                b.flush()?;
                let Section::State(s) = b.section else { unreachable!() };
                let (_, rate) = line.number("rate")?;
                if b.ma.as_ref().unwrap().markovian[s].is_some() {
                    return Err(dup(head, format!("rate of state {s}")));
                }
                b.row = Some(Row { state: s, kind: RowKind::Rate(rate), entries: Vec::new(), at: head.clone() });
            }
            "state" => {
                let Section::Rewards(j) = b.section else { unreachable!() };
                let (t, s) = line.index("state id")?;
                let s = b.state_index(t, s)?;
                line.colon()?;
                let (_, v) = line.number("reward value")?;
                let ma = b.ma.as_mut().unwrap();
                if ma.rewards[j].state_rewards.insert(s, v).is_some() {
                    return Err(dup(t, format!("state reward of {s}")));
                }
            }
            "action" if matches!(b.section, Section::Rewards(_)) => {
                let Section::Rewards(j) = b.section else { unreachable!() };
                let (t, s) = line.index("state id")?;
                let s = b.state_index(t, s)?;
                let (at, name) = line.name("action name")?;
                line.colon()?;
                let (_, v) = line.number("reward value")?;
                let ma = b.ma.as_mut().unwrap();
                let a = if name == MARKOVIAN_ACTION_NAME {
                    MARKOVIAN_ACTION
                } else {
                    ma.find_action(&name).ok_or_else(|| syntax(at, format!("unknown action '{name}'")))?
                };
                if ma.rewards[j].action_rewards.insert((s, a), v).is_some() {
                    return Err(dup(t, format!("reward of action {name} at state {s}")));
                }
            }
            _ if b.row.is_some() => {
                let (t, target) = match &head.tok {
                    Tok::Word(w) => (head, w.parse::<usize>().map_err(|_| syntax(head, format!("unexpected {}", head.describe())))?),
                    _ => unreachable!(),
                };
                let target = b.state_index(t, target)?;
                line.colon()?;
                let (_, p) = line.number("probability")?;
                let row = b.row.as_mut().unwrap();
                if row.entries.iter().any(|e| e.0 == target) {
                    return Err(dup(t, format!("target {target}")));
                }
                row.entries.push((target, p));
            }
            _ => return Err(syntax(head, format!("unexpected {}", head.describe()))),
        }
        line.finish()?;
    }
    b.flush()?;
    let eof = |message: &str| IngestError::Syntax { line: text.lines().count().max(1), col: 1, message: message.into() };
    if !type_seen {
        return Err(eof("missing @type header"));
    }
    let mut ma = b.ma.ok_or_else(|| eof("missing @states header"))?;
    let (init, t) = b.initial.ok_or_else(|| eof("missing @initial header"))?;
    if init >= ma.num_states {
        return Err(IngestError::UnknownState { line: t.line, col: t.col, state: init.to_string() });
    }
    ma.initial = init;
    Ok(ma)
}

/// Renders `ma` in the text format; floats use the shortest round-trip form.
pub fn serialize_model(ma: &MarkovAutomaton) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "@type: ma");
    let _ = writeln!(out, "@states: {}", ma.num_states);
    let _ = writeln!(out, "@initial: {}", ma.initial);
    for s in 0..ma.num_states {
        let _ = write!(out, "state {s}");
        for l in &ma.labels[s] {
            let _ = write!(out, " {}", quote_if_needed(l));
        }
        out.push('\n');
        for (a, dist) in &ma.prob_transitions[s] {
            let _ = writeln!(out, "  action {}", quote_if_needed(&ma.action_names[*a]));
            for (t, p) in dist.entries() {
                let _ = writeln!(out, "    {t} : {p:?}");
            }
        }
        if let Some(m) = &ma.markovian[s] {
            let _ = writeln!(out, "  rate {:?}", m.rate);
            for (t, p) in m.distribution.entries() {
                let _ = writeln!(out, "    {t} : {p:?}");
            }
        }
    }
    for rf in &ma.rewards {
        let _ = writeln!(out, "@rewards {}", quote_if_needed(&rf.name));
        for (s, v) in &rf.state_rewards {
            let _ = writeln!(out, "  state {s} : {v:?}");
        }
        for ((s, a), v) in &rf.action_rewards {
            let name = if *a == MARKOVIAN_ACTION { MARKOVIAN_ACTION_NAME.to_string() } else { quote_if_needed(&ma.action_names[*a]) };
            let _ = writeln!(out, "  action {s} {name} : {v:?}");
        }
    }
    let _ = writeln!(out, "@end");
    out
}
