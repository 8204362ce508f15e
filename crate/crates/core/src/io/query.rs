use crate::error::{Result, Span};
use crate::model::{GroundRv, Model};
use crate::dsep::DsepQuery;
use crate::query::{DoAssignment, Query, RvPattern};

use super::lexer::Cursor;

/// Parses `P(t1, t2 | ev=val; do(rv=val, ...))` against `model`.
///
/// Targets and do-targets may leave parameters free by naming the logvar
/// (`Comp(E)`); evidence must be ground. Items after `|` are separated by
/// `;` or `,`.
pub fn parse_query(model: &Model, text: &str) -> Result<Query> {
    let mut p = QueryParser {
        cur: Cursor::new(text)?,
        model,
    };
    let (w, s) = p.cur.word("`P`")?;
    if w != "P" {
        return p.cur.error(s, format!("expected `P`, found `{w}`"));
    }
    p.cur.expect_punct('(')?;
    let mut q = Query::default();
    loop {
        q.targets.push(p.atom()?.0);
        if !p.cur.eat_punct(',') {
            break;
        }
    }
    if p.cur.eat_punct('|') {
        loop {
            if p.cur.is_word("do") && model.prv_by_name("do").is_none() {
                p.cur.next();
                p.cur.expect_punct('(')?;
                loop {
                    let (target, value, _) = p.assignment()?;
                    q.dos.push(DoAssignment { target, value });
                    if p.cur.eat_punct(')') {
                        break;
                    }
                    p.cur.expect_punct(',')?;
                }
            } else {
                let (target, value, s) = p.assignment()?;
                if !target.is_ground() {
                    return p.cur.error(s, "evidence must be ground");
                }
                let args = target.args.iter().map(|a| a.unwrap()).collect();
                q.evidence.push((GroundRv::new(target.prv, args), value));
            }
            if !(p.cur.eat_punct(';') || p.cur.eat_punct(',')) {
                break;
            }
        }
    }
    p.cur.expect_punct(')')?;
    if !p.cur.at_eof() {
        let s = p.cur.span();
        return p.cur.error(s, "unexpected input after the query");
    }
    q.check(model)?;
    Ok(q)
}

/// Parses `X ; Y | Z`, each a comma-separated list of random variables.
/// Lifted entries such as `Comp(E)` stand for all their instances that occur
/// in the model; `| Z` may be omitted or left empty.
pub fn parse_dsep_query(model: &Model, text: &str) -> Result<DsepQuery> {
    let mut p = QueryParser {
        cur: Cursor::new(text)?,
        model,
    };
    let x = p.atoms()?;
    p.cur.expect_punct(';')?;
    let y = p.atoms()?;
    let mut z = Vec::new();
    if p.cur.eat_punct('|') && !p.cur.at_eof() {
        z = p.atoms()?;
    }
    if !p.cur.at_eof() {
        let s = p.cur.span();
        return p.cur.error(s, "expected `|` or end of input");
    }
    let expand = |ps: &[RvPattern]| {
        let mut out: Vec<GroundRv> = ps
            .iter()
            .flat_map(|p| p.expand(model))
            .filter(|rv| model.occurs(rv))
            .collect();
        out.sort();
        out.dedup();
        out
    };
    Ok(DsepQuery {
        x: expand(&x),
        y: expand(&y),
        z: expand(&z),
    })
}

struct QueryParser<'m> {
    cur: Cursor,
    model: &'m Model,
}

impl QueryParser<'_> {
    fn atoms(&mut self) -> Result<Vec<RvPattern>> {
        let mut out = vec![self.atom()?.0];
        while self.cur.eat_punct(',') {
            out.push(self.atom()?.0);
        }
        Ok(out)
    }

    /// `Name`, `Name(c1, L2, ...)`; an argument equal to the parameter's
    /// logvar name stays free.
    fn atom(&mut self) -> Result<(RvPattern, Span)> {
        let (name, span) = self.cur.word("a random variable")?;
        let Some(prv) = self.model.prv_by_name(&name) else {
            return self.cur.error(span, format!("unknown PRV `{name}`"));
        };
        let params = self.model.prv(prv).params.clone();
        let given = if self.cur.is_punct('(') {
            self.cur.word_list('(', ')', "an argument")?
        } else {
            Vec::new()
        };
        if given.len() != params.len() {
            return self.cur.error(
                span,
                format!("`{name}` expects {} argument(s), found {}", params.len(), given.len()),
            );
        }
        let mut args = Vec::with_capacity(params.len());
        for ((w, s), lv) in given.iter().zip(&params) {
            let d = self.model.domain(*lv);
            if *w == d.name {
                args.push(None);
            } else if let Some(c) = d.index_of(w) {
                args.push(Some(c));
            } else {
                return self.cur.error(*s, format!("`{w}` is neither logvar `{}` nor one of its constants", d.name));
            }
        }
        Ok((RvPattern { prv, args }, span))
    }

    fn assignment(&mut self) -> Result<(RvPattern, usize, Span)> {
        let (target, span) = self.atom()?;
        self.cur.expect_punct('=')?;
        let (v, vs) = self.cur.word("a value")?;
        let range = self.model.prv_range(target.prv);
        match range.index_of(&v) {
            Some(i) => Ok((target, i, span)),
            None => self.cur.error(vs, format!("`{v}` is not in range `{}`", range.name)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::fixtures;

    #[test]
    fn running_query() {
        let m = fixtures::employee_model(4, 2);
        let q = parse_query(&m, "P(Rev | do(Train(bob,t1)=true))").unwrap();
        assert_eq!(q.targets.len(), 1);
        assert_eq!(q.dos.len(), 1);
        assert_eq!(q.dos[0].target.args, vec![Some(1), Some(0)]);
        assert_eq!(q.dos[0].value, 1);
    }

    #[test]
    fn marginal_and_group_do() {
        let m = fixtures::employee_model(4, 2);
        let q = parse_query(&m, "P(Rev)").unwrap();
        assert!(q.dos.is_empty() && q.evidence.is_empty());
        let q = parse_query(&m, "P(Rev | do(Train(E,t1)=true))").unwrap();
        assert_eq!(q.dos[0].target.args, vec![None, Some(0)]);
    }

    #[test]
    fn evidence_and_lifted_targets() {
        let m = fixtures::employee_model(4, 2);
        let q = parse_query(&m, "P(Comp(E), Qual(t2) | Rev=high; do(Train(bob,t1)=true, Train(eve,T)=false))").unwrap();
        assert_eq!(q.targets.len(), 2);
        assert_eq!(q.evidence.len(), 1);
        assert_eq!(q.dos.len(), 2);
    }

    #[test]
    fn diagnostics() {
        let m = fixtures::employee_model(4, 2);
        let Err(Error::Parse(d)) = parse_query(&m, "P(Rev | do(Train(bob,t1)=maybe))") else { panic!() };
        assert_eq!(d.span.col, 26);
        let Err(Error::Parse(d)) = parse_query(&m, "P(Salary)") else { panic!() };
        assert!(d.message.contains("unknown PRV"));
        assert!(matches!(parse_query(&m, "P(Rev | Comp(E)=low)"), Err(Error::Parse(_))));
        assert!(matches!(parse_query(&m, "P(Rev"), Err(Error::Parse(_))));
        assert!(matches!(
            parse_query(&m, "P(Rev | do(Train(E,t1)=true, Train(bob,T)=false))"),
            Err(Error::Query(_))
        ));
    }

    #[test]
    fn dsep_sets() {
        let m = fixtures::employee_model(4, 2);
        let q = parse_dsep_query(&m, "Qual(t1) ; Comp(bob) | Train(bob,t1)").unwrap();
        assert_eq!((q.x.len(), q.y.len(), q.z.len()), (1, 1, 1));
        let q = parse_dsep_query(&m, "Qual(T) ; Rev").unwrap();
        assert_eq!((q.x.len(), q.y.len(), q.z.len()), (2, 1, 0));
    }
}
