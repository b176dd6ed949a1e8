//! Run configuration: a small sectioned key-value format with polynomials as
//! lists of (exponent-vector, integer) pairs. Integers are decimal digit
//! strings of any size; parse errors carry line and column.
//!
//! ```text
//! [ring]
//! p = 2
//! a = 1
//! N = 6
//!
//! [sigma]
//! n = 1
//! f1 = [(1, 1)]          # sigma(X) = X^q + p X
//!
//! [module.M2]
//! rank = 2
//! entry 1 1 = [(0, 1), (1, 2)]
//! entry 2 1 = [(1, 2)]
//! entry 1 2 = [(0, 2)]
//! entry 2 2 = [(0, 2), (1, 2)]
//!
//! [task.zeta]
//! kind = euler
//! module = M2
//! ```
//!
//! Exponent vectors are a single integer for n = 1 and a parenthesized
//! comma-separated list like ((1,0), 3) for n >= 2.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use urzeta_core::error::{Error, Result};

pub type Terms = Vec<(Vec<u32>, BigInt)>;

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleDef {
    pub rank: usize,
    /// row-major entries, entry[(i-1) * rank + (j-1)] for "entry i j"
    pub entries: Vec<Terms>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Euler,
    Trace,
    Verify,
    UnitRoot,
    Limiting,
    Polygon,
    GmScan,
}

impl TaskKind {
    pub fn parse(s: &str) -> Option<TaskKind> {
        Some(match s {
            "euler" => TaskKind::Euler,
            "trace" => TaskKind::Trace,
            "verify" => TaskKind::Verify,
            "unit-root" => TaskKind::UnitRoot,
            "limiting" => TaskKind::Limiting,
            "polygon" => TaskKind::Polygon,
            "gm-scan" => TaskKind::GmScan,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Euler => "euler",
            TaskKind::Trace => "trace",
            TaskKind::Verify => "verify",
            TaskKind::UnitRoot => "unit-root",
            TaskKind::Limiting => "limiting",
            TaskKind::Polygon => "polygon",
            TaskKind::GmScan => "gm-scan",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskDef {
    pub name: String,
    pub kind: TaskKind,
    pub module: Option<String>,
    pub aux: Option<String>,
    pub k: Option<i64>,
    pub k_list: Vec<i64>,
    pub j: Option<u32>,
    pub m: Option<u32>,
    pub s_max: Option<i64>,
    pub suite: Vec<usize>,
}

impl TaskDef {
    fn new(name: &str) -> Self {
        TaskDef {
            name: name.to_string(),
            kind: TaskKind::Euler,
            module: None,
            aux: None,
            k: None,
            k_list: Vec::new(),
            j: None,
            m: None,
            s_max: None,
            suite: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub p: u64,
    pub a: u32,
    pub n_target: u32,
    pub buffer: u32,
    pub dx: u32,
    pub dt: usize,
    pub df: u32,
    pub u_override: Option<u32>,
    pub laurent_floor: Option<i64>,
    pub budget: u64,
    pub nvars: usize,
    pub sigma_terms: Vec<Terms>,
    pub modules: BTreeMap<String, ModuleDef>,
    pub tasks: Vec<TaskDef>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            p: 2,
            a: 1,
            n_target: 6,
            buffer: 0, // 0 = derive n + 4
            dx: 8,
            dt: 10,
            df: 0, // 0 = derive N
            u_override: None,
            laurent_floor: None,
            budget: 1 << 22,
            nvars: 1,
            sigma_terms: vec![Vec::new()],
            modules: BTreeMap::new(),
            tasks: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn working_prec(&self) -> u32 {
        let buf = if self.buffer == 0 { self.nvars as u32 + 4 } else { self.buffer };
        self.n_target + buf
    }

    pub fn d_f(&self) -> u32 {
        if self.df == 0 {
            self.n_target
        } else {
            self.df
        }
    }
}

struct Cursor<'a> {
    text: &'a str,
    line: usize,
    col: usize,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::ParseError { line: self.line, col: self.col, msg: msg.into() }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn bump(&mut self, n: usize) {
        for ch in self.text[self.pos..self.pos + n].chars() {
            if ch == '\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
        self.pos += n;
    }

    fn skip_ws(&mut self) {
        loop {
            let r = self.rest();
            let mut adv = 0;
            for ch in r.chars() {
                if ch == ' ' || ch == '\t' || ch == ',' {
                    adv += ch.len_utf8();
                } else {
                    break;
                }
            }
            if adv > 0 {
                self.bump(adv);
                continue;
            }
            break;
        }
    }

    fn expect(&mut self, ch: char) -> Result<()> {
        self.skip_ws();
        if self.rest().starts_with(ch) {
            self.bump(1);
            Ok(())
        } else {
            Err(self.err(format!("expected '{ch}'")))
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn integer(&mut self) -> Result<BigInt> {
        self.skip_ws();
        let r = self.rest();
        let mut len = 0;
        for (i, ch) in r.char_indices() {
            if (i == 0 && (ch == '-' || ch == '+')) || ch.is_ascii_digit() {
                len = i + ch.len_utf8();
            } else {
                break;
            }
        }
        if len == 0 || (len == 1 && !r[..1].chars().next().unwrap().is_ascii_digit()) {
            return Err(self.err("expected an integer"));
        }
        let s = &r[..len];
        self.bump(len);
        s.parse::<BigInt>().map_err(|_| self.err("malformed integer"))
    }
}

/// Parse `[(exp, coeff), ...]` where exp is an integer (one variable) or a
/// parenthesized list.
fn parse_terms(cur: &mut Cursor, nvars: usize) -> Result<Terms> {
    cur.expect('[')?;
    let mut out = Vec::new();
    loop {
        match cur.peek() {
            Some(']') => {
                cur.bump(1);
                break;
            }
            Some('(') => {
                cur.bump(1);
                let exps: Vec<u32> = if cur.peek() == Some('(') {
                    cur.bump(1);
                    let mut v = Vec::new();
                    loop {
                        if cur.peek() == Some(')') {
                            cur.bump(1);
                            break;
                        }
                        let e = cur.integer()?;
                        let e: u32 = e
                            .try_into()
                            .map_err(|_| cur.err("exponents must be non-negative integers"))?;
                        v.push(e);
                    }
                    v
                } else {
                    let e = cur.integer()?;
                    let e: u32 =
                        e.try_into().map_err(|_| cur.err("exponents must be non-negative"))?;
                    vec![e]
                };
                if exps.len() != nvars {
                    return Err(cur.err(format!(
                        "exponent vector has {} entries, sigma has {} variables",
                        exps.len(),
                        nvars
                    )));
                }
                let coeff = cur.integer()?;
                cur.expect(')')?;
                out.push((exps, coeff));
            }
            _ => return Err(cur.err("expected '(' or ']' in a term list")),
        }
    }
    Ok(out)
}

fn parse_int_list(cur: &mut Cursor) -> Result<Vec<BigInt>> {
    cur.expect('[')?;
    let mut out = Vec::new();
    loop {
        match cur.peek() {
            Some(']') => {
                cur.bump(1);
                break;
            }
            Some(_) => out.push(cur.integer()?),
            None => return Err(cur.err("unterminated list")),
        }
    }
    Ok(out)
}

enum Section {
    Ring,
    Caps,
    Sigma,
    Module(String),
    Task(String),
    None,
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut section = Section::None;
    let mut sigma_seen: BTreeMap<usize, Terms> = BTreeMap::new();
    let mut module_entries: BTreeMap<String, BTreeMap<(usize, usize), Terms>> = BTreeMap::new();
    let mut module_ranks: BTreeMap<String, usize> = BTreeMap::new();
    let mut module_order: Vec<String> = Vec::new();
    let mut declared_q: Option<BigInt> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let col0 = line.len() - line.trim_start().len() + 1;
        let mk_err = |col: usize, msg: String| Error::ParseError { line: lineno + 1, col, msg };
        if let Some(h) = trimmed.strip_prefix('[') {
            let h = h
                .strip_suffix(']')
                .ok_or_else(|| mk_err(col0, "unterminated section header".into()))?;
            section = match h {
                "ring" => Section::Ring,
                "caps" => Section::Caps,
                "sigma" => Section::Sigma,
                _ => {
                    if let Some(name) = h.strip_prefix("module.") {
                        if !module_entries.contains_key(name) {
                            module_entries.insert(name.to_string(), BTreeMap::new());
                            module_order.push(name.to_string());
                        }
                        Section::Module(name.to_string())
                    } else if let Some(name) = h.strip_prefix("task.") {
                        cfg.tasks.push(TaskDef::new(name));
                        Section::Task(name.to_string())
                    } else {
                        return Err(mk_err(col0, format!("unknown section [{h}]")));
                    }
                }
            };
            continue;
        }
        let eq = trimmed
            .find('=')
            .ok_or_else(|| mk_err(col0, "expected 'key = value'".into()))?;
        let key = trimmed[..eq].trim();
        let val_text = trimmed[eq + 1..].trim();
        let mut cur = Cursor {
            text: val_text,
            line: lineno + 1,
            col: col0 + eq + 1,
            pos: 0,
        };
        let int_of = |cur: &mut Cursor| -> Result<BigInt> { cur.integer() };
        match &mut section {
            Section::Ring => match key {
                "p" => cfg.p = small(&int_of(&mut cur)?, "p")?,
                "a" => cfg.a = small(&int_of(&mut cur)?, "a")? as u32,
                "N" => cfg.n_target = small(&int_of(&mut cur)?, "N")? as u32,
                "buffer" => cfg.buffer = small(&int_of(&mut cur)?, "buffer")? as u32,
                _ => return Err(mk_err(col0, format!("unknown ring key `{key}`"))),
            },
            Section::Caps => match key {
                "DX" => cfg.dx = small(&int_of(&mut cur)?, "DX")? as u32,
                "DT" => cfg.dt = small(&int_of(&mut cur)?, "DT")? as usize,
                "Df" => cfg.df = small(&int_of(&mut cur)?, "Df")? as u32,
                "U" => cfg.u_override = Some(small(&int_of(&mut cur)?, "U")? as u32),
                "L" => cfg.laurent_floor = Some(small(&int_of(&mut cur)?, "L")? as i64),
                "budget" => cfg.budget = small(&int_of(&mut cur)?, "budget")?,
                _ => return Err(mk_err(col0, format!("unknown caps key `{key}`"))),
            },
            Section::Sigma => match key {
                "n" => {
                    cfg.nvars = small(&int_of(&mut cur)?, "n")? as usize;
                    if cfg.nvars == 0 {
                        return Err(Error::ValidationError {
                            field: "sigma.n".into(),
                            msg: "at least one variable".into(),
                        });
                    }
                }
                "q" => declared_q = Some(int_of(&mut cur)?),
                _ => {
                    if let Some(ix) = key.strip_prefix('f') {
                        let i: usize = ix
                            .parse()
                            .map_err(|_| mk_err(col0, format!("unknown sigma key `{key}`")))?;
                        let terms = parse_terms(&mut cur, cfg.nvars)?;
                        sigma_seen.insert(i, terms);
                    } else {
                        return Err(mk_err(col0, format!("unknown sigma key `{key}`")));
                    }
                }
            },
            Section::Module(name) => match key {
                "rank" => {
                    module_ranks.insert(name.clone(), small(&int_of(&mut cur)?, "rank")? as usize);
                }
                _ => {
                    if let Some(rc) = key.strip_prefix("entry ") {
                        let parts: Vec<&str> = rc.split_whitespace().collect();
                        if parts.len() != 2 {
                            return Err(mk_err(col0, "expected `entry <row> <col>`".into()));
                        }
                        let i: usize = parts[0]
                            .parse()
                            .map_err(|_| mk_err(col0, "bad row index".into()))?;
                        let j: usize = parts[1]
                            .parse()
                            .map_err(|_| mk_err(col0, "bad column index".into()))?;
                        let terms = parse_terms(&mut cur, cfg.nvars)?;
                        module_entries.get_mut(name).unwrap().insert((i, j), terms);
                    } else {
                        return Err(mk_err(col0, format!("unknown module key `{key}`")));
                    }
                }
            },
            Section::Task(_name) => {
                let task = cfg.tasks.last_mut().unwrap();
                match key {
                    "kind" => {
                        task.kind = TaskKind::parse(val_text).ok_or_else(|| {
                            mk_err(col0, format!("unknown task kind `{val_text}`"))
                        })?;
                    }
                    "module" => task.module = Some(val_text.to_string()),
                    "aux" => task.aux = Some(val_text.to_string()),
                    "k" => task.k = Some(small_i(&int_of(&mut cur)?, "k")?),
                    "m" => task.m = Some(small(&int_of(&mut cur)?, "m")? as u32),
                    "j" => task.j = Some(small(&int_of(&mut cur)?, "j")? as u32),
                    "s_max" => task.s_max = Some(small_i(&int_of(&mut cur)?, "s_max")?),
                    "k_list" => {
                        task.k_list = parse_int_list(&mut cur)?
                            .iter()
                            .map(|v| small_i(v, "k_list"))
                            .collect::<Result<_>>()?;
                    }
                    "suite" => {
                        if val_text == "all" {
                            task.suite = (1..=urzeta_core::suite::criterion_count()).collect();
                        } else {
                            task.suite = parse_int_list(&mut cur)?
                                .iter()
                                .map(|v| small(v, "suite").map(|x| x as usize))
                                .collect::<Result<_>>()?;
                        }
                    }
                    _ => return Err(mk_err(col0, format!("unknown task key `{key}`"))),
                }
            }
            Section::None => {
                return Err(mk_err(col0, "key outside any section".into()));
            }
        }
    }

    // assemble sigma
    let mut sigma = Vec::with_capacity(cfg.nvars);
    for i in 1..=cfg.nvars {
        sigma.push(sigma_seen.remove(&i).unwrap_or_default());
    }
    if let Some(extra) = sigma_seen.keys().next() {
        return Err(Error::ValidationError {
            field: format!("sigma.f{extra}"),
            msg: format!("sigma has only {} variables", cfg.nvars),
        });
    }
    cfg.sigma_terms = sigma;

    // assemble modules
    for name in module_order {
        let rank = *module_ranks.get(&name).ok_or_else(|| Error::ValidationError {
            field: format!("module.{name}.rank"),
            msg: "missing rank".into(),
        })?;
        let mut entries = vec![Vec::new(); rank * rank];
        for ((i, j), terms) in module_entries.remove(&name).unwrap() {
            if i == 0 || j == 0 || i > rank || j > rank {
                return Err(Error::ValidationError {
                    field: format!("module.{name}.entry {i} {j}"),
                    msg: format!("indices must lie in 1..={rank}"),
                });
            }
            entries[(i - 1) * rank + (j - 1)] = terms;
        }
        cfg.modules.insert(name, ModuleDef { rank, entries });
    }

    validate(&cfg, declared_q)?;
    Ok(cfg)
}

fn small(v: &BigInt, field: &str) -> Result<u64> {
    u64::try_from(v.clone()).map_err(|_| Error::ValidationError {
        field: field.into(),
        msg: "expected a small non-negative integer".into(),
    })
}

fn small_i(v: &BigInt, field: &str) -> Result<i64> {
    i64::try_from(v.clone()).map_err(|_| Error::ValidationError {
        field: field.into(),
        msg: "expected a small integer".into(),
    })
}

fn validate(cfg: &RunConfig, declared_q: Option<BigInt>) -> Result<()> {
    if cfg.n_target == 0 {
        return Err(Error::ValidationError { field: "N".into(), msg: "N must be positive".into() });
    }
    if cfg.dt == 0 {
        return Err(Error::ValidationError { field: "DT".into(), msg: "DT must be positive".into() });
    }
    if cfg.a != 1 {
        // base-ring coefficients are rational integers; see the module docs
        return Err(Error::ValidationError {
            field: "a".into(),
            msg: "the L-function pipelines require a = 1 (q = p)".into(),
        });
    }
    if let Some(q) = declared_q {
        let expect = BigInt::from(cfg.p).pow(cfg.a);
        if q != expect {
            return Err(Error::ValidationError {
                field: "sigma.q".into(),
                msg: format!("q = {q} does not match p^a = {expect}"),
            });
        }
    }
    for task in &cfg.tasks {
        if matches!(
            task.kind,
            TaskKind::Euler
                | TaskKind::Trace
                | TaskKind::UnitRoot
                | TaskKind::Limiting
                | TaskKind::Polygon
                | TaskKind::GmScan
        ) {
            let m = task.module.as_deref().ok_or_else(|| Error::ValidationError {
                field: format!("task.{}.module", task.name),
                msg: "task needs a module".into(),
            })?;
            if !cfg.modules.contains_key(m) {
                return Err(Error::ValidationError {
                    field: format!("task.{}.module", task.name),
                    msg: format!("module `{m}` is not defined"),
                });
            }
            if let Some(aux) = &task.aux {
                if !cfg.modules.contains_key(aux) {
                    return Err(Error::ValidationError {
                        field: format!("task.{}.aux", task.name),
                        msg: format!("module `{aux}` is not defined"),
                    });
                }
            }
        }
    }
    Ok(())
}

fn fmt_terms(terms: &Terms) -> String {
    let mut out = String::from("[");
    for (i, (e, c)) in terms.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        if e.len() == 1 {
            out.push_str(&format!("({} {c})", e[0]));
        } else {
            let es: Vec<String> = e.iter().map(|x| x.to_string()).collect();
            out.push_str(&format!("(({}) {c})", es.join(" ")));
        }
    }
    out.push(']');
    out
}

/// Canonical text form; parse(serialize(cfg)) == cfg.
pub fn serialize_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    s.push_str("[ring]\n");
    s.push_str(&format!("p = {}\na = {}\nN = {}\n", cfg.p, cfg.a, cfg.n_target));
    if cfg.buffer != 0 {
        s.push_str(&format!("buffer = {}\n", cfg.buffer));
    }
    s.push_str("\n[caps]\n");
    s.push_str(&format!("DX = {}\nDT = {}\n", cfg.dx, cfg.dt));
    if cfg.df != 0 {
        s.push_str(&format!("Df = {}\n", cfg.df));
    }
    if let Some(u) = cfg.u_override {
        s.push_str(&format!("U = {u}\n"));
    }
    if let Some(l) = cfg.laurent_floor {
        s.push_str(&format!("L = {l}\n"));
    }
    if cfg.budget != (1 << 22) {
        s.push_str(&format!("budget = {}\n", cfg.budget));
    }
    s.push_str("\n[sigma]\n");
    s.push_str(&format!("n = {}\n", cfg.nvars));
    for (i, f) in cfg.sigma_terms.iter().enumerate() {
        if !f.is_empty() {
            s.push_str(&format!("f{} = {}\n", i + 1, fmt_terms(f)));
        }
    }
    for (name, m) in &cfg.modules {
        s.push_str(&format!("\n[module.{name}]\nrank = {}\n", m.rank));
        for i in 1..=m.rank {
            for j in 1..=m.rank {
                let t = &m.entries[(i - 1) * m.rank + (j - 1)];
                if !t.is_empty() {
                    s.push_str(&format!("entry {i} {j} = {}\n", fmt_terms(t)));
                }
            }
        }
    }
    for task in &cfg.tasks {
        s.push_str(&format!("\n[task.{}]\nkind = {}\n", task.name, task.kind.name()));
        if let Some(m) = &task.module {
            s.push_str(&format!("module = {m}\n"));
        }
        if let Some(a) = &task.aux {
            s.push_str(&format!("aux = {a}\n"));
        }
        if let Some(k) = task.k {
            s.push_str(&format!("k = {k}\n"));
        }
        if let Some(m) = task.m {
            s.push_str(&format!("m = {m}\n"));
        }
        if let Some(j) = task.j {
            s.push_str(&format!("j = {j}\n"));
        }
        if let Some(sm) = task.s_max {
            s.push_str(&format!("s_max = {sm}\n"));
        }
        if !task.k_list.is_empty() {
            let ks: Vec<String> = task.k_list.iter().map(|k| k.to_string()).collect();
            s.push_str(&format!("k_list = [{}]\n", ks.join(", ")));
        }
        if !task.suite.is_empty() {
            let ids: Vec<String> = task.suite.iter().map(|k| k.to_string()).collect();
            s.push_str(&format!("suite = [{}]\n", ids.join(", ")));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[ring]
p = 2
a = 1
N = 6

[sigma]
n = 1

[module.triv]
rank = 1
entry 1 1 = [(0, 1)]

[task.zeta]
kind = euler
module = triv
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.p, 2);
        assert_eq!(cfg.modules["triv"].rank, 1);
        assert_eq!(cfg.tasks.len(), 1);
        assert_eq!(cfg.tasks[0].kind, TaskKind::Euler);
    }

    #[test]
    fn q_mismatch_rejected() {
        let text = MINIMAL.replace("n = 1", "n = 1\nq = 4");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, Error::ValidationError { .. }), "{err}");
    }

    #[test]
    fn missing_module_rejected() {
        let text = MINIMAL.replace("module = triv", "module = nope");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn parse_error_carries_position() {
        let text = "[ring]\np = abc\n";
        match parse_config(text) {
            Err(Error::ParseError { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let cfg = parse_config(MINIMAL).unwrap();
        let text = serialize_config(&cfg);
        let cfg2 = parse_config(&text).unwrap();
        assert_eq!(cfg, cfg2);
    }
}
