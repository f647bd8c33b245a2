//! Query strings such as `pareto: Pmax[F "a"]; Rmin{"cost"}[F "b"]`.
//!
//! A label may be a union `"a" | "b"`. `R{"time"}` means expected time when the
//! model has no reward function of that name.

use serde::{Deserialize, Serialize};

use super::lexer::{quote_if_needed, tokenize, Tok, Token};
use super::IngestError;
use crate::engine::objective::{Direction, Objective, Relation};
use crate::model::{MarkovAutomaton, StateSet};
use crate::transform::TimeInterval;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryKind {
    Achievability,
    Numerical,
    Pareto,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuerySpec {
    pub kind: QueryKind,
    pub objectives: Vec<Objective>,
    /// The optimized objective of a numerical query.
    pub optimize: Option<usize>,
}

impl QuerySpec {
    /// Checks the shape rules of the query kind and fills in `optimize`.
    pub fn new(kind: QueryKind, objectives: Vec<Objective>) -> Result<Self, IngestError> {
        if objectives.is_empty() {
            return Err(IngestError::MixedQueryShape("query has no objectives".into()));
        }
        let open: Vec<usize> = (0..objectives.len()).filter(|&i| objectives[i].threshold.is_none()).collect();
        let optimize = match kind {
            QueryKind::Achievability if !open.is_empty() => {
                return Err(IngestError::MixedQueryShape(format!("achievability objective {} has no threshold", open[0] + 1)));
            }
            QueryKind::Pareto if open.len() != objectives.len() => {
                return Err(IngestError::MixedQueryShape("pareto objectives must not carry thresholds".into()));
            }
            QueryKind::Numerical if open.len() != 1 => {
                return Err(IngestError::MixedQueryShape(format!(
                    "numerical query needs exactly one objective without threshold, found {}",
                    open.len()
                )));
            }
            QueryKind::Numerical => Some(open[0]),
            _ => None,
        };
        Ok(QuerySpec { kind, objectives, optimize })
    }
}

struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    end: (usize, usize),
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn err_here(&self, message: String) -> IngestError {
        let (line, col) = self.peek().map(|t| (t.line, t.col)).unwrap_or(self.end);
        IngestError::Syntax { line, col, message }
    }

    fn next(&mut self, what: &str) -> Result<&'a Token, IngestError> {
        let t = self.peek().ok_or_else(|| self.err_here(format!("expected {what}, found end of query")))?;
        self.pos += 1;
        Ok(t)
    }

    fn punct(&mut self, p: &'static str) -> Result<(), IngestError> {
        let t = self.next(&format!("'{p}'"))?;
        if t.tok != Tok::Punct(p) {
            self.pos -= 1;
            return Err(self.err_here(format!("expected '{p}', found {}", t.describe())));
        }
        Ok(())
    }

    fn eat(&mut self, p: &'static str) -> bool {
        if self.peek().is_some_and(|t| t.tok == Tok::Punct(p)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn word(&mut self, what: &str) -> Result<String, IngestError> {
        let t = self.next(what)?;
        match &t.tok {
            Tok::Word(w) => Ok(w.clone()),
            _ => {
                self.pos -= 1;
                Err(self.err_here(format!("expected {what}, found {}", t.describe())))
            }
        }
    }

    fn string(&mut self, what: &str) -> Result<String, IngestError> {
        let t = self.next(what)?;
        match &t.tok {
            Tok::Str(s) => Ok(s.clone()),
            _ => {
                self.pos -= 1;
                Err(self.err_here(format!("expected {what}, found {}", t.describe())))
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<f64, IngestError> {
        let at = self.pos;
        let w = self.word(what)?;
        match w.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => {
                self.pos = at;
                Err(self.err_here(format!("expected {what}, found '{w}'")))
            }
        }
    }
}

enum Dir {
    Open(Direction),
    Bound(Relation, f64),
}

impl Dir {
    fn text(&self) -> String {
        match self {
            Dir::Open(Direction::Maximize) => "max".into(),
            Dir::Open(Direction::Minimize) => "min".into(),
            Dir::Bound(r, v) => format!("{}{v}", r.symbol()),
        }
    }
}

fn parse_dir(c: &mut Cursor, rest: &str) -> Result<Dir, IngestError> {
    match rest {
        "max" => return Ok(Dir::Open(Direction::Maximize)),
        "min" => return Ok(Dir::Open(Direction::Minimize)),
        "" => {}
        _ => {
            c.pos -= 1;
            return Err(c.err_here(format!("expected max, min or a comparison after the operator, found '{rest}'")));
        }
    }
    let rel = match c.peek().map(|t| &t.tok) {
        Some(Tok::Punct(">=")) => Relation::GreaterEq,
        Some(Tok::Punct(">")) => Relation::Greater,
        Some(Tok::Punct("<=")) => Relation::LessEq,
        Some(Tok::Punct("<")) => Relation::Less,
        _ => return Err(c.err_here("expected max, min or a comparison".into())),
    };
    c.pos += 1;
    let v = c.number("threshold value")?;
    Ok(Dir::Bound(rel, v))
}

fn parse_goal(c: &mut Cursor, ma: &MarkovAutomaton) -> Result<(StateSet, String), IngestError> {
    let mut goal = StateSet::empty(ma.num_states);
    let mut names = Vec::new();
    loop {
        let label = c.string("quoted label")?;
        if !ma.has_label(&label) {
            return Err(IngestError::UnknownLabel(label));
        }
        goal = goal.union(&ma.states_with_label(&label));
        names.push(format!("\"{label}\""));
        if !c.eat("|") {
            break;
        }
    }
    Ok((goal, names.join(" | ")))
}

fn parse_bound(c: &mut Cursor) -> Result<Option<TimeInterval>, IngestError> {
    if !c.eat("[") {
        return Ok(None);
    }
    let at = c.pos;
    let lo = c.number("lower time bound")?;
    c.punct(",")?;
    let hi = match c.peek().map(|t| &t.tok) {
        Some(Tok::Word(w)) if w == "inf" => {
            c.pos += 1;
            None
        }
        _ => Some(c.number("upper time bound")?),
    };
    c.punct("]")?;
    let interval = TimeInterval::new(lo, hi).map_err(|e| {
        let t = &c.toks[at];
        IngestError::Syntax { line: t.line, col: t.col, message: e.to_string() }
    })?;
    Ok(Some(interval))
}

fn apply_dir(obj: Objective, dir: &Dir) -> Objective {
    match *dir {
        Dir::Open(d) => Objective { direction: d, ..obj },
        Dir::Bound(r, v) => obj.with_threshold(r, v),
    }
}

fn parse_objective(c: &mut Cursor, ma: &MarkovAutomaton) -> Result<Objective, IngestError> {
    let head = c.word("objective")?;
    let (op, rest) = head.split_at(head.chars().next().map_or(0, |ch| ch.len_utf8()));
    let dir = match op {
        "P" | "R" | "T" => parse_dir(c, rest)?,
        _ => {
            c.pos -= 1;
            return Err(c.err_here(format!("expected an objective starting with P, R or T, found '{head}'")));
        }
    };
    let dummy = Direction::Maximize;
    let obj = match op {
        "P" => {
            c.punct("[")?;
            let f = c.word("'F'")?;
            if f != "F" {
                c.pos -= 1;
                return Err(c.err_here(format!("expected 'F', found '{f}'")));
            }
            let bound = parse_bound(c)?;
            let (goal, gtext) = parse_goal(c, ma)?;
            c.punct("]")?;
            match bound {
                Some(i) if !i.is_trivial() => {
                    let btext = match i.upper {
                        Some(b) => format!("[{},{}]", i.lower, b),
                        None => format!("[{},inf]", i.lower),
                    };
                    Objective::timed_reach(goal, i, dummy).with_text(format!("P{}[F{btext} {gtext}]", dir.text()))
                }
                _ => Objective::reach(goal, dummy).with_text(format!("P{}[F {gtext}]", dir.text())),
            }
        }
        "R" => {
            c.punct("{")?;
            let name = c.string("quoted reward name")?;
            c.punct("}")?;
            c.punct("[")?;
            let f = c.word("'F'")?;
            if f != "F" {
                c.pos -= 1;
                return Err(c.err_here(format!("expected 'F', found '{f}'")));
            }
            let (goal, gtext) = parse_goal(c, ma)?;
            c.punct("]")?;
            let text = format!("R{}{{{}}}[F {gtext}]", dir.text(), quote_name(&name));
            match ma.reward_index(&name) {
                Some(j) => Objective::reward(j, goal, dummy).with_text(text),
                None if name == "time" => Objective::time(goal, dummy).with_text(text),
                None => return Err(IngestError::UnknownRewardName(name)),
            }
        }
        _ => {
            c.punct("[")?;
            let f = c.word("'F'")?;
            if f != "F" {
                c.pos -= 1;
                return Err(c.err_here(format!("expected 'F', found '{f}'")));
            }
            let (goal, gtext) = parse_goal(c, ma)?;
            c.punct("]")?;
            Objective::time(goal, dummy).with_text(format!("T{}[F {gtext}]", dir.text()))
        }
    };
    Ok(apply_dir(obj, &dir))
}

fn quote_name(name: &str) -> String {
    let q = quote_if_needed(name);
    if q.starts_with('"') {
        q
    } else {
        format!("\"{q}\"")
    }
}

/// Parses a query against the labels and reward names of `ma`.
pub fn parse_query(text: &str, ma: &MarkovAutomaton) -> Result<QuerySpec, IngestError> {
    let toks = tokenize(text)?;
    let end = toks.last().map(|t| (t.line, t.col + 1)).unwrap_or((1, 1));
    let mut c = Cursor { toks: &toks, pos: 0, end };
    let kind_word = c.word("query kind")?;
    let kind = match kind_word.as_str() {
        "pareto" => QueryKind::Pareto,
        "achieve" => QueryKind::Achievability,
        "numerical" => QueryKind::Numerical,
        other => {
            c.pos -= 1;
            return Err(c.err_here(format!("expected pareto, achieve or numerical, found '{other}'")));
        }
    };
    c.punct(":")?;
    let mut objectives = vec![parse_objective(&mut c, ma)?];
    while c.eat(";") {
        if c.peek().is_none() {
            break;
        }
        objectives.push(parse_objective(&mut c, ma)?);
    }
    if let Some(t) = c.peek() {
        return Err(IngestError::Syntax { line: t.line, col: t.col, message: format!("unexpected {}", t.describe()) });
    }
    QuerySpec::new(kind, objectives)
}
