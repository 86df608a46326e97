//! JSON constraint files.
//!
//! A file is an array whose entries are either the core shorthand
//! `{"relation": "R", "key": ["id"], "pred": "iintersects"}` or a general denial
//! `{"atoms": [{"relation": "R", "vars": ["x", "s"]}, ...], "where": ["x != y"],
//! "topo": [{"pred": "OV", "args": ["s", "t"]}]}`. In `vars` the last entry is the
//! spatial variable.

use std::path::Path;

use serde::Deserialize;
use serde_json::Value as Json;

use super::{CmpOp, Comparison, ConstraintError, CoreSIC, DenialSIC, RelAtom, Term, TopoAtom};
use crate::geometry::Predicate;
use crate::model::{Schema, Value};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAtom {
    relation: String,
    vars: Vec<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawTopo {
    Obj { pred: String, args: [String; 2] },
    Text(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDenial {
    #[serde(default)]
    id: Option<Json>,
    atoms: Vec<RawAtom>,
    #[serde(default, rename = "where")]
    condition: Vec<String>,
    topo: Vec<RawTopo>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCore {
    #[serde(default)]
    id: Option<Json>,
    relation: String,
    #[serde(default)]
    key: Option<Vec<String>>,
    pred: String,
}

fn perr(m: impl Into<String>) -> ConstraintError {
    ConstraintError::Parse(m.into())
}

fn pred(s: &str) -> Result<Predicate, ConstraintError> {
    s.parse::<Predicate>().map_err(|e| perr(e.to_string()))
}

fn label(id: &Option<Json>, fallback: String) -> String {
    match id {
        Some(Json::String(s)) => s.clone(),
        Some(v) => v.to_string(),
        None => fallback,
    }
}

/// Parses one array entry; `id` is its position.
pub fn parse_sic_json(v: &Json, id: usize, schema: &Schema) -> Result<DenialSIC, ConstraintError> {
    let sic = if v.get("atoms").is_some() {
        let raw: RawDenial = serde_json::from_value(v.clone())?;
        let mut atoms = Vec::new();
        for a in raw.atoms {
            let mut vars = a.vars;
            let spatial = vars.pop().ok_or_else(|| perr(format!("atom over `{}` has no variables", a.relation)))?;
            atoms.push(RelAtom { relation: a.relation, vars, spatial });
        }
        let topo = raw
            .topo
            .iter()
            .map(|t| match t {
                RawTopo::Obj { pred: p, args } => {
                    Ok(TopoAtom { pred: pred(p)?, left: args[0].clone(), right: args[1].clone() })
                }
                RawTopo::Text(s) => parse_topo(s),
            })
            .collect::<Result<_, _>>()?;
        let condition = raw.condition.iter().map(|c| parse_comparison(c)).collect::<Result<_, _>>()?;
        DenialSIC { id, label: label(&raw.id, format!("sic{id}")), atoms, condition, topo }
    } else {
        let raw: RawCore = serde_json::from_value(v.clone())?;
        let rel = schema.relation(&raw.relation)?;
        if let Some(k) = &raw.key {
            if k != &rel.key {
                return Err(perr(format!("key {:?} does not match the key of `{}`", k, raw.relation)));
            }
        }
        let mut core = CoreSIC::new(id, &raw.relation, pred(&raw.pred)?)?;
        core.label = label(&raw.id, core.label);
        core.to_denial(schema)?
    };
    sic.validate(schema)?;
    Ok(sic)
}

pub fn parse_sics(text: &str, schema: &Schema) -> Result<Vec<DenialSIC>, ConstraintError> {
    let v: Json = serde_json::from_str(text)?;
    let arr = match v {
        Json::Array(a) => a,
        other => vec![other],
    };
    arr.iter().enumerate().map(|(i, e)| parse_sic_json(e, i, schema)).collect()
}

pub fn read_sics(path: &Path, schema: &Schema) -> Result<Vec<DenialSIC>, ConstraintError> {
    parse_sics(&std::fs::read_to_string(path)?, schema)
}

/// `Pred(a, b)`
fn parse_topo(s: &str) -> Result<TopoAtom, ConstraintError> {
    let s = s.trim();
    let (name, rest) = s.split_once('(').ok_or_else(|| perr(format!("bad topological atom `{s}`")))?;
    let args = rest.strip_suffix(')').ok_or_else(|| perr(format!("bad topological atom `{s}`")))?;
    let args: Vec<&str> = args.split(',').map(str::trim).collect();
    if args.len() != 2 || args.iter().any(|a| a.is_empty()) {
        return Err(perr(format!("topological atom `{s}` needs two arguments")));
    }
    Ok(TopoAtom { pred: pred(name)?, left: args[0].into(), right: args[1].into() })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Str(String),
    Op(CmpOp),
    LParen,
    RParen,
    Comma,
}

fn tokenize(s: &str) -> Result<Vec<Tok>, ConstraintError> {
    let cs: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        let next = cs.get(i + 1).copied();
        match c {
            _ if c.is_whitespace() => i += 1,
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            ',' => {
                out.push(Tok::Comma);
                i += 1;
            }
            '!' | '<' | '>' | '=' => {
                let (op, len) = match (c, next) {
                    ('!', Some('=')) | ('<', Some('>')) => (CmpOp::Ne, 2),
                    ('<', Some('=')) => (CmpOp::Le, 2),
                    ('>', Some('=')) => (CmpOp::Ge, 2),
                    ('=', Some('=')) => (CmpOp::Eq, 2),
                    ('<', _) => (CmpOp::Lt, 1),
                    ('>', _) => (CmpOp::Gt, 1),
                    ('=', _) => (CmpOp::Eq, 1),
                    _ => return Err(perr(format!("unexpected `{c}` in `{s}`"))),
                };
                out.push(Tok::Op(op));
                i += len;
            }
            '\'' | '"' => {
                let end = cs[i + 1..]
                    .iter()
                    .position(|&d| d == c)
                    .ok_or_else(|| perr(format!("unterminated string in `{s}`")))?;
                out.push(Tok::Str(cs[i + 1..i + 1 + end].iter().collect()));
                i += end + 2;
            }
            _ if c.is_ascii_digit() || c == '-' || c == '.' => {
                let start = i;
                i += 1;
                while i < cs.len() && (cs[i].is_ascii_alphanumeric() || matches!(cs[i], '.' | '-' | '+')) {
                    i += 1;
                }
                out.push(Tok::Num(cs[start..i].iter().collect()));
            }
            _ if c.is_alphanumeric() || c == '_' => {
                let start = i;
                while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_') {
                    i += 1;
                }
                out.push(Tok::Ident(cs[start..i].iter().collect()));
            }
            _ => return Err(perr(format!("unexpected `{c}` in `{s}`"))),
        }
    }
    Ok(out)
}

fn term(t: &Tok) -> Result<Term, ConstraintError> {
    Ok(match t {
        Tok::Ident(v) => Term::Var(v.clone()),
        Tok::Str(s) => Term::Const(Value::Str(s.clone())),
        Tok::Num(n) => Term::Const(match n.parse::<i64>() {
            Ok(i) => Value::Int(i),
            Err(_) => Value::Real(n.parse().map_err(|_| perr(format!("bad number `{n}`")))?),
        }),
        other => return Err(perr(format!("expected a term, got {other:?}"))),
    })
}

fn side(toks: &[Tok]) -> Result<Vec<Term>, ConstraintError> {
    match toks {
        [t] => Ok(vec![term(t)?]),
        [Tok::LParen, inner @ .., Tok::RParen] if !inner.is_empty() => {
            let mut out = Vec::new();
            for (k, t) in inner.iter().enumerate() {
                if k % 2 == 0 {
                    out.push(term(t)?);
                } else if *t != Tok::Comma {
                    return Err(perr("expected `,` between terms"));
                }
            }
            if inner.len() % 2 == 0 {
                return Err(perr("dangling `,`"));
            }
            Ok(out)
        }
        _ => Err(perr("malformed comparison side")),
    }
}

/// `x != y`, `(a, b) != (c, d)`, `n >= 3`, `name = 'park'`.
pub(crate) fn parse_comparison(s: &str) -> Result<Comparison, ConstraintError> {
    let toks = tokenize(s)?;
    let at = toks
        .iter()
        .position(|t| matches!(t, Tok::Op(_)))
        .ok_or_else(|| perr(format!("no comparison operator in `{s}`")))?;
    let Tok::Op(op) = toks[at] else { unreachable!() };
    let lhs = side(&toks[..at]).map_err(|e| perr(format!("{e} in `{s}`")))?;
    let rhs = side(&toks[at + 1..]).map_err(|e| perr(format!("{e} in `{s}`")))?;
    Ok(Comparison { lhs, op, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparisons() {
        let c = parse_comparison("(a, b) != (c,d)").unwrap();
        assert_eq!(c.op, CmpOp::Ne);
        assert_eq!(c.lhs.len(), 2);
        assert_eq!(c.to_string(), "(a, b) != (c, d)");
        let c = parse_comparison("n >= -3.5").unwrap();
        assert_eq!(c.rhs, vec![Term::Const(Value::Real(-3.5))]);
        let c = parse_comparison("name = 'x y'").unwrap();
        assert_eq!(c.rhs, vec![Term::Const(Value::Str("x y".into()))]);
        assert!(parse_comparison("a b").is_err());
        assert!(parse_comparison("(a,) = (b,)").is_err());
        assert!(parse_comparison("a != 'open").is_err());
    }

    #[test]
    fn topo_text_form() {
        let t = parse_topo("IIntersects(s1, s2)").unwrap();
        assert_eq!(t.pred, Predicate::II);
        assert!(parse_topo("OV(s1)").is_err());
    }
}
