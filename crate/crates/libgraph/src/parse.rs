//! Kconfig subset parser.
//!
//! Supported: `mainmenu`, `config`, `menuconfig`, `menu`/`endmenu`,
//! `choice`/`endchoice`, `if`/`endif`, `source`, the five value types,
//! `prompt`, `depends on`, `select [if]`, `default [if]` and
//! indentation-delimited `help`. `comment`, `imply` and `range` are skipped
//! with a diagnostic.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::expr::{lex, Expr, ExprParser, Token};
use crate::graph::{Default, Item, KconfigNode, LibGraph, NodeId, NodeType, Relation, Select, ValueType};
use crate::GraphError;

/// Resolves `source` paths, relative to the tree root.
pub trait SourceLoader {
    fn load(&self, path: &str) -> Option<String>;
}

#[derive(Debug, Clone)]
pub struct FsLoader {
    root: PathBuf,
}

impl FsLoader {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FsLoader { root: root.into() }
    }
}

impl SourceLoader for FsLoader {
    fn load(&self, path: &str) -> Option<String> {
        std::fs::read_to_string(self.root.join(path)).ok()
    }
}

#[derive(Debug, Clone, Default)]
pub struct MemLoader {
    files: BTreeMap<String, String>,
}

impl MemLoader {
    pub fn new() -> Self {
        MemLoader::default()
    }

    pub fn with(mut self, path: impl Into<String>, text: impl Into<String>) -> Self {
        self.files.insert(path.into(), text.into());
        self
    }

    pub fn insert(&mut self, path: impl Into<String>, text: impl Into<String>) {
        self.files.insert(path.into(), text.into());
    }
}

impl SourceLoader for MemLoader {
    fn load(&self, path: &str) -> Option<String> {
        self.files.get(path).cloned()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub file: String,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Parsed {
    pub graph: LibGraph,
    pub diagnostics: Vec<Diagnostic>,
}

/// Parses the tree rooted at `path`: a directory holding `Kconfig`, or a file.
pub fn parse_kconfig(path: &Path) -> Result<Parsed, GraphError> {
    let (dir, file) = if path.is_dir() {
        (path.to_path_buf(), "Kconfig".to_string())
    } else {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let file = path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .ok_or_else(|| GraphError::UnresolvedSource(path.display().to_string()))?;
        (dir, file)
    };
    parse_tree(&FsLoader::new(dir), &file).map_err(|e| match e {
        GraphError::UnresolvedSource(p) if p == file => GraphError::UnresolvedSource(path.display().to_string()),
        other => other,
    })
}

pub fn parse_str(text: &str) -> Result<Parsed, GraphError> {
    parse_tree(&MemLoader::new().with("Kconfig", text), "Kconfig")
}

pub fn parse_tree(loader: &dyn SourceLoader, root: &str) -> Result<Parsed, GraphError> {
    let mut p = Parser::new(loader);
    p.push_file(root)?;
    p.run()?;
    Ok(p.finish())
}

struct Cursor {
    name: String,
    lines: Vec<String>,
    pos: usize,
}

enum BlockKind {
    Root,
    Menu(NodeId),
    Choice(NodeId),
    If(Expr),
}

struct Block {
    kind: BlockKind,
    cond: Option<Expr>,
    items: Vec<Item>,
    /// Open `menuconfig` entries for display nesting.
    menuconfigs: Vec<NodeId>,
    parent: Option<NodeId>,
    opened_at: (String, usize),
}

struct Reference {
    file: String,
    line: usize,
    owner: String,
    symbols: Vec<String>,
}

struct Parser<'a> {
    loader: &'a dyn SourceLoader,
    files: Vec<Cursor>,
    blocks: Vec<Block>,
    graph: LibGraph,
    diagnostics: Vec<Diagnostic>,
    references: Vec<Reference>,
    menus: usize,
    choices: usize,
    line: (String, usize),
}

const ATTRIBUTES: &[&str] = &[
    "bool", "tristate", "int", "hex", "string", "prompt", "depends", "select", "default", "help", "---help---",
    "imply", "range",
];

impl<'a> Parser<'a> {
    fn new(loader: &'a dyn SourceLoader) -> Self {
        Parser {
            loader,
            files: Vec::new(),
            blocks: vec![Block {
                kind: BlockKind::Root,
                cond: None,
                items: Vec::new(),
                menuconfigs: Vec::new(),
                parent: None,
                opened_at: (String::new(), 0),
            }],
            graph: LibGraph::new(),
            diagnostics: Vec::new(),
            references: Vec::new(),
            menus: 0,
            choices: 0,
            line: (String::new(), 0),
        }
    }

    fn push_file(&mut self, path: &str) -> Result<(), GraphError> {
        if self.files.iter().any(|c| c.name == path) {
            return Err(GraphError::CircularSource(path.to_string()));
        }
        let text = self.loader.load(path).ok_or_else(|| GraphError::UnresolvedSource(path.to_string()))?;
        self.files.push(Cursor { name: path.to_string(), lines: text.lines().map(str::to_string).collect(), pos: 0 });
        Ok(())
    }

    fn syntax(&self, expected: impl Into<String>) -> GraphError {
        GraphError::Syntax { file: self.line.0.clone(), line: self.line.1, expected: expected.into() }
    }

    fn diag(&mut self, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic { file: self.line.0.clone(), line: self.line.1, message: message.into() });
    }

    /// Next line across files, popping finished ones.
    fn next_line(&mut self) -> Option<String> {
        loop {
            let cur = self.files.last_mut()?;
            if cur.pos < cur.lines.len() {
                cur.pos += 1;
                self.line = (cur.name.clone(), cur.pos);
                return Some(cur.lines[cur.pos - 1].clone());
            }
            self.files.pop();
        }
    }

    /// Peeks within the current file only.
    fn peek_line(&self) -> Option<&str> {
        let cur = self.files.last()?;
        cur.lines.get(cur.pos).map(String::as_str)
    }

    fn skip_line(&mut self) {
        if let Some(cur) = self.files.last_mut() {
            cur.pos += 1;
            self.line = (cur.name.clone(), cur.pos);
        }
    }

    fn lex(&self, line: &str) -> Result<Vec<Token>, GraphError> {
        lex(line).map_err(|e| self.syntax(e))
    }

    fn run(&mut self) -> Result<(), GraphError> {
        while let Some(line) = self.next_line() {
            let toks = self.lex(&line)?;
            let Some(first) = toks.first() else { continue };
            let Token::Word(kw) = first else { return Err(self.syntax("a statement keyword")) };
            let rest = &toks[1..];
            match kw.as_str() {
                "mainmenu" => self.graph.title = Some(self.single_string(rest)?),
                "config" | "menuconfig" => {
                    let name = self.single_symbol(rest)?;
                    let ty = if kw == "config" { NodeType::Config } else { NodeType::Menuconfig };
                    self.entry(name, ty)?;
                }
                "choice" => self.choice(rest)?,
                "endchoice" => self.close(|k| matches!(k, BlockKind::Choice(_)), "endchoice")?,
                "menu" => self.menu(rest)?,
                "endmenu" => self.close(|k| matches!(k, BlockKind::Menu(_)), "endmenu")?,
                "if" => {
                    let cond = self.expr_only(rest)?;
                    self.record_refs("if", &cond);
                    let top = self.blocks.last().unwrap();
                    let block = Block {
                        kind: BlockKind::If(cond.clone()),
                        cond: Some(cond),
                        items: Vec::new(),
                        menuconfigs: top.menuconfigs.clone(),
                        parent: top.parent,
                        opened_at: self.line.clone(),
                    };
                    self.blocks.push(block);
                }
                "endif" => self.close(|k| matches!(k, BlockKind::If(_)), "endif")?,
                "source" => {
                    let path = self.single_string(rest)?;
                    self.push_file(&path)?;
                }
                "comment" => {
                    self.diag("`comment` is not supported; skipped");
                    self.blocks.last_mut().unwrap().menuconfigs.clear();
                    while self.peek_first_word().is_some_and(|w| w == "depends") {
                        self.skip_line();
                    }
                }
                _ => return Err(self.syntax("a statement keyword")),
            }
        }
        if self.blocks.len() > 1 {
            let b = self.blocks.last().unwrap();
            let expected = match b.kind {
                BlockKind::Menu(_) => "endmenu",
                BlockKind::Choice(_) => "endchoice",
                BlockKind::If(_) => "endif",
                BlockKind::Root => unreachable!(),
            };
            self.line = b.opened_at.clone();
            return Err(self.syntax(format!("`{expected}` before end of input")));
        }
        Ok(())
    }

    fn peek_first_word(&self) -> Option<String> {
        let toks = lex(self.peek_line()?).ok()?;
        match toks.first() {
            Some(Token::Word(w)) => Some(w.clone()),
            _ => None,
        }
    }

    fn single_string(&self, rest: &[Token]) -> Result<String, GraphError> {
        match rest {
            [Token::Str(s)] => Ok(s.clone()),
            _ => Err(self.syntax("a quoted string")),
        }
    }

    fn single_symbol(&self, rest: &[Token]) -> Result<String, GraphError> {
        match rest {
            [Token::Word(w)] if crate::expr::is_symbol(w) => Ok(w.clone()),
            _ => Err(self.syntax("a symbol name")),
        }
    }

    fn expr_only(&self, toks: &[Token]) -> Result<Expr, GraphError> {
        let mut p = ExprParser::new(toks);
        let e = p.parse_expr().map_err(|e| self.syntax(e))?;
        if !p.at_end() {
            return Err(self.syntax("end of line"));
        }
        Ok(e)
    }

    /// `<expr> [if <expr>]`
    fn expr_with_cond(&self, toks: &[Token]) -> Result<(Expr, Option<Expr>), GraphError> {
        let mut p = ExprParser::new(toks);
        let e = p.parse_expr().map_err(|e| self.syntax(e))?;
        Ok((e, self.trailing_cond(p.rest())?))
    }

    fn trailing_cond(&self, rest: &[Token]) -> Result<Option<Expr>, GraphError> {
        match rest {
            [] => Ok(None),
            [Token::Word(w), tail @ ..] if w == "if" => Ok(Some(self.expr_only(tail)?)),
            _ => Err(self.syntax("`if` or end of line")),
        }
    }

    fn inherited(&self) -> Option<Expr> {
        Expr::conjunction(self.blocks.iter().filter_map(|b| b.cond.clone()))
    }

    fn record_refs(&mut self, owner: &str, e: &Expr) {
        let symbols = e.symbols().into_iter().map(str::to_string).collect();
        self.references.push(Reference { file: self.line.0.clone(), line: self.line.1, owner: owner.to_string(), symbols });
    }

    fn entry(&mut self, name: String, ty: NodeType) -> Result<(), GraphError> {
        let mut node = KconfigNode::new(name.clone(), ty);
        node.inherited = self.inherited();
        self.attributes(&mut node, ty)?;
        if self.graph.lookup(&name).is_some() {
            self.diag(format!("symbol {name} declared again; later declaration ignored"));
            return Ok(());
        }
        let id = self.add_with_help(node);

        let deps = self.graph.node(id).effective_deps();
        let top = self.blocks.last_mut().unwrap();
        let mut parent = top.parent;
        while let Some(&m) = top.menuconfigs.last() {
            if deps.as_ref().is_some_and(|d| d.requires_symbol(&self.graph.node(m).name)) {
                parent = Some(m);
                break;
            }
            top.menuconfigs.pop();
        }
        if ty == NodeType::Menuconfig {
            top.menuconfigs.push(id);
        }
        top.items.push(Item::Entry(id));
        if let Some(p) = parent {
            self.graph.add_edge(p, id, Relation::ParentOf);
        }
        Ok(())
    }

    fn add_with_help(&mut self, node: KconfigNode) -> NodeId {
        let help = node.help.clone();
        let name = node.name.clone();
        let id = self.graph.add_node(node);
        if let Some(text) = help {
            let mut h = KconfigNode::new(format!("{name}.help"), NodeType::HelpText);
            h.help = Some(text);
            h.anonymous = true;
            let hid = self.graph.add_node(h);
            self.graph.add_edge(id, hid, Relation::Describes);
        }
        id
    }

    fn menu(&mut self, rest: &[Token]) -> Result<(), GraphError> {
        let prompt = self.single_string(rest)?;
        self.menus += 1;
        let mut node = KconfigNode::new(format!("MENU_{}", self.menus), NodeType::Menu);
        node.anonymous = true;
        node.prompt = Some(prompt);
        node.inherited = self.inherited();
        self.attributes(&mut node, NodeType::Menu)?;
        let cond = node.depends_on.clone();
        let id = self.graph.add_node(node);
        self.open(id, BlockKind::Menu(id), cond);
        Ok(())
    }

    fn choice(&mut self, rest: &[Token]) -> Result<(), GraphError> {
        self.choices += 1;
        let mut node = match rest {
            [] => {
                let mut n = KconfigNode::new(format!("CHOICE_{}", self.choices), NodeType::Choice);
                n.anonymous = true;
                n
            }
            _ => KconfigNode::new(self.single_symbol(rest)?, NodeType::Choice),
        };
        node.inherited = self.inherited();
        self.attributes(&mut node, NodeType::Choice)?;
        if self.graph.lookup(&node.name).is_some() {
            return Err(self.syntax(format!("a fresh choice name, `{}` is taken", node.name)));
        }
        let cond = node.depends_on.clone();
        let id = self.add_with_help(node);
        self.open(id, BlockKind::Choice(id), cond);
        Ok(())
    }

    fn open(&mut self, id: NodeId, kind: BlockKind, cond: Option<Expr>) {
        let top = self.blocks.last_mut().unwrap();
        top.menuconfigs.clear();
        if let Some(p) = top.parent {
            self.graph.add_edge(p, id, Relation::ParentOf);
        }
        self.blocks.push(Block {
            kind,
            cond,
            items: Vec::new(),
            menuconfigs: Vec::new(),
            parent: Some(id),
            opened_at: self.line.clone(),
        });
    }

    fn close(&mut self, is: impl Fn(&BlockKind) -> bool, kw: &str) -> Result<(), GraphError> {
        if self.blocks.len() < 2 || !is(&self.blocks.last().unwrap().kind) {
            return Err(self.syntax(format!("a matching opener for `{kw}`")));
        }
        let block = self.blocks.pop().unwrap();
        let top = self.blocks.last_mut().unwrap();
        let item = match block.kind {
            BlockKind::Menu(id) => Item::Menu(id, block.items),
            BlockKind::Choice(id) => Item::Choice(id, block.items),
            BlockKind::If(cond) => {
                top.menuconfigs = block.menuconfigs;
                Item::If(cond, block.items)
            }
            BlockKind::Root => unreachable!(),
        };
        top.items.push(item);
        Ok(())
    }

    fn attributes(&mut self, node: &mut KconfigNode, ty: NodeType) -> Result<(), GraphError> {
        let mut deps: Vec<Expr> = Vec::new();
        while let Some(word) = self.peek_first_word() {
            if !ATTRIBUTES.contains(&word.as_str()) {
                break;
            }
            let line = self.next_line().unwrap();
            let toks = self.lex(&line)?;
            let rest = &toks[1..];
            let allowed = match ty {
                NodeType::Menu => word == "depends",
                NodeType::Choice => !matches!(word.as_str(), "select" | "int" | "hex" | "string"),
                _ => true,
            };
            if !allowed {
                return Err(self.syntax(format!("an attribute valid here, found `{word}`")));
            }
            match word.as_str() {
                "imply" | "range" => self.diag(format!("`{word}` is not supported; skipped")),
                "help" | "---help---" => {
                    if !rest.is_empty() {
                        return Err(self.syntax("end of line after `help`"));
                    }
                    node.help = Some(self.help_body());
                }
                "depends" => {
                    let tail = match rest {
                        [Token::Word(on), tail @ ..] if on == "on" => tail,
                        _ => return Err(self.syntax("`on`")),
                    };
                    let e = self.expr_only(tail)?;
                    self.record_refs(&node.name, &e);
                    deps.push(e);
                }
                "select" => {
                    let (target, tail) = match rest {
                        [Token::Word(t), tail @ ..] if crate::expr::is_symbol(t) => (t.clone(), tail),
                        _ => return Err(self.syntax("a symbol name")),
                    };
                    let cond = self.trailing_cond(tail)?;
                    let mut syms = vec![target.clone()];
                    if let Some(c) = &cond {
                        syms.extend(c.symbols().into_iter().map(str::to_string));
                    }
                    self.references.push(Reference {
                        file: self.line.0.clone(),
                        line: self.line.1,
                        owner: node.name.clone(),
                        symbols: syms,
                    });
                    node.selects.push(Select { target, cond });
                }
                "default" => {
                    let (value, cond) = self.expr_with_cond(rest)?;
                    self.record_refs(&node.name, &value);
                    if let Some(c) = &cond {
                        self.record_refs(&node.name, c);
                    }
                    node.defaults.push(Default { value, cond });
                }
                "prompt" => {
                    let tail = match rest {
                        [Token::Str(s), tail @ ..] => {
                            node.prompt = Some(s.clone());
                            tail
                        }
                        _ => return Err(self.syntax("a quoted prompt")),
                    };
                    self.trailing_cond(tail)?;
                }
                kw => {
                    let vt = ValueType::from_keyword(kw).expect("type keyword");
                    if ty == NodeType::Choice && !vt.is_tri() {
                        return Err(self.syntax("`bool` or `tristate` for a choice"));
                    }
                    if node.value_type.is_some_and(|t| t != vt) {
                        self.diag(format!("{} redeclares its type", node.name));
                    }
                    node.value_type = Some(vt);
                    match rest {
                        [] => {}
                        [Token::Str(s), tail @ ..] => {
                            node.prompt = Some(s.clone());
                            self.trailing_cond(tail)?;
                        }
                        _ => return Err(self.syntax("a quoted prompt or end of line")),
                    }
                }
            }
        }
        if ty.is_assignable() && node.value_type.is_none() {
            return Err(self.syntax(format!("a type for {}", node.name)));
        }
        node.depends_on = Expr::conjunction(deps);
        Ok(())
    }

    fn help_body(&mut self) -> String {
        let mut lines: Vec<String> = Vec::new();
        let mut indent: Option<usize> = None;
        while let Some(raw) = self.peek_line() {
            if raw.trim().is_empty() {
                lines.push(String::new());
                self.skip_line();
                continue;
            }
            let (width, content) = measure(raw);
            match indent {
                None if width == 0 => break,
                None => indent = Some(width),
                Some(i) if width < i => break,
                Some(_) => {}
            }
            let extra = width - indent.unwrap();
            lines.push(format!("{}{}", " ".repeat(extra), content.trim_end()));
            self.skip_line();
        }
        while lines.last().is_some_and(String::is_empty) {
            lines.pop();
        }
        let first = lines.iter().position(|l| !l.is_empty()).unwrap_or(lines.len());
        lines[first..].join("\n")
    }

    fn finish(mut self) -> Parsed {
        let root = self.blocks.pop().unwrap();
        self.graph.layout = root.items;

        let declared: BTreeSet<&str> = self.graph.nodes.iter().map(|n| n.name.as_str()).collect();
        for r in &self.references {
            for s in &r.symbols {
                if !declared.contains(s.as_str()) {
                    self.diagnostics.push(Diagnostic {
                        file: r.file.clone(),
                        line: r.line,
                        message: format!("{} references undeclared symbol {s}", r.owner),
                    });
                }
            }
        }

        let mut edges = Vec::new();
        for id in self.graph.ids() {
            let n = self.graph.node(id);
            if !n.node_type.is_config_like() {
                continue;
            }
            if let Some(d) = n.effective_deps() {
                for s in d.symbols() {
                    if let Some(dst) = self.graph.lookup(s).filter(|d| *d != id) {
                        edges.push((id, dst, Relation::DependsOn));
                    }
                }
            }
            for sel in &n.selects {
                if let Some(dst) = self.graph.lookup(&sel.target) {
                    edges.push((id, dst, Relation::Selects));
                }
            }
        }
        for (s, d, r) in edges {
            self.graph.add_edge(s, d, r);
        }
        self.graph.reindex();
        Parsed { graph: self.graph, diagnostics: self.diagnostics }
    }
}

/// Indentation width (tabs to multiples of 8) and the remaining text.
fn measure(line: &str) -> (usize, &str) {
    let mut width = 0;
    for (i, c) in line.char_indices() {
        match c {
            ' ' => width += 1,
            '\t' => width = (width / 8 + 1) * 8,
            _ => return (width, &line[i..]),
        }
    }
    (width, "")
}
