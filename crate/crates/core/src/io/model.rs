use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Diagnostic, Error, Result, Span};
use crate::model::{Constraint, Model, ModelBuilder, Parfactor, PrvId, TupleSet};

use super::lexer::Cursor;

/// Parser settings. `params` binds template placeholders such as `@d`.
#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub params: BTreeMap<String, i64>,
    /// Upper bound on the number of constants one template item may expand to.
    pub max_template_items: usize,
    /// Upper bound on the size of a single parfactor table.
    pub max_table: usize,
    pub validate: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            params: BTreeMap::new(),
            max_template_items: 1 << 20,
            max_table: 1 << 20,
            validate: true,
        }
    }
}

impl ParseOptions {
    pub fn with_param(mut self, name: &str, value: i64) -> Self {
        self.params.insert(name.into(), value);
        self
    }
}

/// A parsed model together with the source positions of its declarations.
#[derive(Debug, Clone)]
pub struct ModelDocument {
    pub source: String,
    pub model: Model,
    /// Declaration spans keyed by item name (domains, ranges, PRVs, parfactors).
    pub spans: HashMap<String, Span>,
}

impl ModelDocument {
    pub fn span_of(&self, item: &str) -> Option<Span> {
        self.spans.get(item).copied()
    }
}

pub fn parse_model(text: &str) -> Result<Model> {
    parse_model_with(text, &ParseOptions::default())
}

pub fn parse_model_with(text: &str, opts: &ParseOptions) -> Result<Model> {
    parse_document(text, opts).map(|d| d.model)
}

pub fn parse_document(text: &str, opts: &ParseOptions) -> Result<ModelDocument> {
    let mut p = Parser {
        cur: Cursor::new(text)?,
        b: ModelBuilder::new(),
        spans: HashMap::new(),
        opts,
    };
    while !p.cur.at_eof() {
        p.item()?;
    }
    let spans = p.spans;
    let model = p.b.build_unchecked();
    if model.parfactors().is_empty() {
        return Err(Error::Parse(Diagnostic {
            span: p.cur.span(),
            message: "no parfactors".into(),
        }));
    }
    if opts.validate {
        if let Err(Error::Invalid(violations)) = model.ensure_valid() {
            let first = &violations[0];
            let span = spans.get(&first.item).copied().unwrap_or(Span { line: 1, col: 1 });
            let message = violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            return Err(Error::Parse(Diagnostic { span, message }));
        }
    }
    Ok(ModelDocument {
        source: text.to_string(),
        model,
        spans,
    })
}

struct Parser<'o> {
    cur: Cursor,
    b: ModelBuilder,
    spans: HashMap<String, Span>,
    opts: &'o ParseOptions,
}

impl Parser<'_> {
    fn err<T>(&self, span: Span, msg: impl Into<String>) -> Result<T> {
        self.cur.error(span, msg)
    }

    /// Re-attach a span to builder errors.
    fn at<T>(&self, span: Span, r: Result<T>) -> Result<T> {
        r.or_else(|e| self.err(span, e.to_string()))
    }

    fn declare(&mut self, name: &str, span: Span) -> Result<()> {
        self.spans.entry(name.to_string()).or_insert(span);
        Ok(())
    }

    fn item(&mut self) -> Result<()> {
        let (kw, span) = self.cur.word("a declaration")?;
        match kw.as_str() {
            "domain" => self.domain(),
            "range" => self.range(),
            "prv" => self.prv(),
            "parfactor" => self.parfactor(),
            _ => self.err(
                span,
                format!("expected `domain`, `range`, `prv` or `parfactor`, found `{kw}`"),
            ),
        }
    }

    fn domain(&mut self) -> Result<()> {
        let (name, span) = self.cur.word("a domain name")?;
        self.cur.expect_punct('=')?;
        let mut constants = Vec::new();
        for (w, s) in self.cur.word_list('{', '}', "a constant")? {
            self.expand_item(&w, s, &mut constants)?;
        }
        let r = self.b.domain(&name, constants).map(drop);
        self.at(span, r)?;
        self.declare(&name, span)
    }

    fn param(&self, w: &str, span: Span) -> Result<i64> {
        if let Some(p) = w.strip_prefix('@') {
            if let Ok(n) = p.parse() {
                return Ok(n);
            }
            return match self.opts.params.get(p) {
                Some(v) => Ok(*v),
                None => self.err(span, format!("unbound template parameter `{p}`")),
            };
        }
        w.parse()
            .or_else(|_| self.err(span, format!("expected an integer or `@param`, found `{w}`")))
    }

    /// `prefix@a..@b` expands to prefix{a}, ..., prefix{b}; other words are
    /// taken literally.
    fn expand_item(&self, w: &str, span: Span, out: &mut Vec<String>) -> Result<()> {
        let Some(at) = w.find('@') else {
            out.push(w.to_string());
            return Ok(());
        };
        let (prefix, rest) = w.split_at(at);
        let Some((lo, hi)) = rest.split_once("..") else {
            return self.err(span, format!("malformed template item `{w}`"));
        };
        let lo = self.param(lo, span)?;
        let hi = self.param(hi, span)?;
        if hi < lo {
            return Ok(());
        }
        let n = (hi as i128 - lo as i128 + 1) as u128;
        if n > self.opts.max_template_items as u128 {
            return self.err(
                span,
                format!("template item `{w}` expands to {n} constants (limit {})", self.opts.max_template_items),
            );
        }
        out.extend((lo..=hi).map(|i| format!("{prefix}{i}")));
        Ok(())
    }

    fn range(&mut self) -> Result<()> {
        let (name, span) = self.cur.word("a range name")?;
        self.cur.expect_punct('=')?;
        let values: Vec<String> = self
            .cur
            .word_list('{', '}', "a range value")?
            .into_iter()
            .map(|(w, _)| w)
            .collect();
        let r = self.b.range(&name, values).map(drop);
        self.at(span, r)?;
        self.declare(&name, span)
    }

    fn prv(&mut self) -> Result<()> {
        let (name, span) = self.cur.word("a PRV name")?;
        let params: Vec<String> = if self.cur.is_punct('(') {
            self.cur
                .word_list('(', ')', "a logvar")?
                .into_iter()
                .map(|(w, _)| w)
                .collect()
        } else {
            Vec::new()
        };
        self.cur.expect_punct(':')?;
        let (range, _) = self.cur.word("a range name")?;
        let params: Vec<&str> = params.iter().map(String::as_str).collect();
        let r = self.b.prv(&name, &params, &range).map(drop);
        self.at(span, r)?;
        self.declare(&name, span)
    }

    /// `Name` or `Name(L1,...,Ln)`; the logvars must repeat the declaration.
    fn atom(&mut self) -> Result<(PrvId, Span)> {
        let (name, span) = self.cur.word("a PRV")?;
        let id = self.at(span, self.b.prv_id(&name))?;
        let params = self.b.model().prv(id).params.clone();
        let given = if self.cur.is_punct('(') {
            self.cur.word_list('(', ')', "a logvar")?
        } else {
            Vec::new()
        };
        if given.len() != params.len() {
            return self.err(
                span,
                format!("`{name}` expects {} argument(s), found {}", params.len(), given.len()),
            );
        }
        for ((w, s), lv) in given.iter().zip(&params) {
            let expect = &self.b.model().domain(*lv).name;
            if w != expect {
                return self.err(*s, format!("argument of `{name}` must be logvar `{expect}`, found `{w}`"));
            }
        }
        Ok((id, span))
    }

    fn parfactor(&mut self) -> Result<()> {
        let (name, span) = self.cur.word("a parfactor name")?;
        if self.b.model().parfactor_by_name(&name).is_some() {
            return self.err(span, format!("duplicate parfactor `{name}`"));
        }
        self.cur.expect_punct('(')?;
        let mut args = Vec::new();
        loop {
            let (id, s) = self.atom()?;
            if args.contains(&id) {
                return self.err(s, format!("PRV `{}` listed twice", self.b.model().prv(id).name));
            }
            args.push(id);
            if self.cur.eat_punct(')') {
                break;
            }
            self.cur.expect_punct(',')?;
        }
        let mut child = None;
        if self.cur.eat_word("child") {
            let (id, s) = self.atom()?;
            if !args.contains(&id) {
                return self.err(
                    s,
                    format!("child `{}` is not an argument of `{name}`", self.b.model().prv(id).name),
                );
            }
            child = Some(id);
        }
        let mut constraint = None;
        if self.cur.eat_word("constraint") {
            constraint = Some(self.constraint(&args)?);
        }
        let mutilated = self.cur.eat_word("@mutilated");
        let constraint = match constraint {
            Some(c) => c,
            None => Constraint::top(self.b.model().logvars_of(&args)),
        };
        let table = self.table(&args)?;
        self.b
            .push_parfactor(Parfactor {
                name: name.clone(),
                args,
                child,
                constraint,
                table,
                mutilated,
            })
            .or_else(|e| self.err(span, e.to_string()))?;
        self.declare(&name, span)
    }

    fn constraint(&mut self, args: &[PrvId]) -> Result<Constraint> {
        let lvs = self.b.model().logvars_of(args);
        if self.cur.eat_word("TOP") {
            return Ok(Constraint::top(lvs));
        }
        let open = self.cur.expect_punct('{')?;
        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        if !self.cur.eat_punct('}') {
            loop {
                let s = self.cur.span();
                let tuple = self.cur.word_list('(', ')', "a constant")?;
                if tuple.len() != lvs.len() {
                    return self.err(
                        s,
                        format!("constraint tuples have {} element(s), found {}", lvs.len(), tuple.len()),
                    );
                }
                let mut row = Vec::with_capacity(tuple.len());
                for ((c, cs), lv) in tuple.iter().zip(&lvs) {
                    let d = self.b.model().domain(*lv);
                    match d.index_of(c) {
                        Some(i) => row.push(i),
                        None => return self.err(*cs, format!("`{c}` is not in domain `{}`", d.name)),
                    }
                }
                if !seen.insert(row.clone()) {
                    return self.err(s, "duplicate constraint tuple");
                }
                rows.push(row);
                if self.cur.eat_punct('}') {
                    break;
                }
                self.cur.expect_punct(',')?;
            }
        }
        if rows.is_empty() && lvs.is_empty() {
            return self.err(open, "empty constraint on a parfactor without logvars");
        }
        Ok(Constraint::tuples(lvs.clone(), TupleSet::from_tuples(lvs.len(), rows)))
    }

    fn table(&mut self, args: &[PrvId]) -> Result<Vec<f64>> {
        let open = self.cur.expect_punct('{')?;
        let m = self.b.model();
        let ranges: Vec<_> = args.iter().map(|a| m.prv_range(*a).clone()).collect();
        let cards: Vec<usize> = ranges.iter().map(|r| r.size()).collect();
        let size = cards.iter().try_fold(1usize, |a, c| a.checked_mul(*c));
        let size = match size {
            Some(s) if s <= self.opts.max_table => s,
            _ => return self.err(open, "parfactor table exceeds the size limit"),
        };
        let mut table = vec![f64::NAN; size];
        let mut filled = 0usize;
        while !self.cur.eat_punct('}') {
            let s = self.cur.span();
            let vals = self.cur.word_list('(', ')', "a range value")?;
            if vals.len() != args.len() {
                return self.err(s, format!("expected {} value(s), found {}", args.len(), vals.len()));
            }
            let mut idx = 0usize;
            for ((v, vs), (r, c)) in vals.iter().zip(ranges.iter().zip(&cards)) {
                match r.index_of(v) {
                    Some(i) => idx = idx * c + i,
                    None => return self.err(*vs, format!("`{v}` is not in range `{}`", r.name)),
                }
            }
            self.cur.expect_punct('=')?;
            let (num, ns) = self.cur.word("a number")?;
            let x: f64 = match num.parse() {
                Ok(x) => x,
                Err(_) => return self.err(ns, format!("invalid number `{num}`")),
            };
            if !x.is_finite() {
                return self.err(ns, format!("potential `{num}` is not finite"));
            }
            if !table[idx].is_nan() {
                return self.err(s, "entry listed twice");
            }
            table[idx] = x;
            filled += 1;
            if !self.cur.eat_punct(';') && !self.cur.is_punct('}') {
                self.cur.expect_punct(';')?;
            }
        }
        if filled != size {
            let missing = table.iter().position(|v| v.is_nan()).unwrap_or(0);
            let mut rest = missing;
            let mut labels = vec![""; args.len()];
            for k in (0..args.len()).rev() {
                labels[k] = &ranges[k].values[rest % cards[k]];
                rest /= cards[k];
            }
            return self.err(open, format!("table has no entry for ({})", labels.join(", ")));
        }
        Ok(table)
    }
}
