//! A small expression language for 1-arrow and 2-arrow words.
//!
//! Terms denote 2-arrows. Sequencing is written in dataflow order, so
//! `a ; b` runs `a` first and denotes the vertical composite b ∘ a; `*` is
//! the horizontal tensor and binds tighter than `;`. Arrow expressions name
//! generators, units and duals and appear inside `id(..)`, `R(..)` and
//! `Rbar(..)`. `R` and `Rbar` resolve through a table of conjugation
//! solutions that defaults to the canonical solution of the named arrow,
//! and `proj(g)` is the left Jones projection of generator `g`. Every term
//! is typechecked before evaluation; inferred source and target arrows are
//! attached to each node so mismatches are reported with both sides
//! printed.

use crate::conjugation::{canonical_solution, ConjError, SolutionPair};
use crate::homcalc::{compose_horizontal, compose_vertical, CalcError, TwoArrow};
use crate::model::{Arrow, CategoryPresentation, ModelError};
use crate::numerics::Scalar;
use crate::qfrobenius::{jones_projections, QfError};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DslError {
    #[error("parse error at {position}: found {found}, expected {expected}")]
    Parse {
        position: Position,
        found: String,
        expected: String,
    },
    #[error("unbound name '{name}' at {position}")]
    UnboundName { name: String, position: Position },
    #[error("type mismatch in {context} at {position}: {left} does not match {right}")]
    TypeMismatch {
        context: &'static str,
        position: Position,
        left: String,
        right: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error(transparent)]
    Conj(#[from] ConjError),
    #[error(transparent)]
    Qf(#[from] QfError),
}

pub type DslResult<V> = Result<V, DslError>;

// ---------------------------------------------------------------------------
// Tokens
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Id,
    Adj,
    Dual,
    Unit,
    R,
    Rbar,
    Proj,
}

impl Keyword {
    fn from_ident(s: &str) -> Option<Self> {
        match s {
            "id" => Some(Keyword::Id),
            "adj" => Some(Keyword::Adj),
            "dual" => Some(Keyword::Dual),
            "unit" => Some(Keyword::Unit),
            "R" => Some(Keyword::R),
            "Rbar" => Some(Keyword::Rbar),
            "proj" => Some(Keyword::Proj),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Keyword(Keyword),
    LParen,
    RParen,
    Star,
    Semi,
    Comma,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub position: Position,
}

fn lex(text: &str) -> DslResult<(Vec<Token>, Position)> {
    let mut tokens = Vec::new();
    let mut line = 1;
    let mut column = 1;
    let mut chars = text.chars().peekable();
    while let Some(&ch) = chars.peek() {
        let position = Position { line, column };
        match ch {
            '\n' => {
                chars.next();
                line += 1;
                column = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                column += 1;
            }
            '(' | ')' | '*' | ';' | ',' => {
                chars.next();
                column += 1;
                let kind = match ch {
                    '(' => TokenKind::LParen,
                    ')' => TokenKind::RParen,
                    '*' => TokenKind::Star,
                    ';' => TokenKind::Semi,
                    _ => TokenKind::Comma,
                };
                tokens.push(Token {
                    kind,
                    lexeme: ch.to_string(),
                    position,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut lexeme = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        lexeme.push(c);
                        chars.next();
                        column += 1;
                    } else {
                        break;
                    }
                }
                let kind = match Keyword::from_ident(&lexeme) {
                    Some(k) => TokenKind::Keyword(k),
                    None => TokenKind::Ident,
                };
                tokens.push(Token {
                    kind,
                    lexeme,
                    position,
                });
            }
            c => {
                return Err(DslError::Parse {
                    position,
                    found: format!("'{c}'"),
                    expected: "an identifier, keyword or punctuation".into(),
                });
            }
        }
    }
    Ok((tokens, Position { line, column }))
}

// ---------------------------------------------------------------------------
// Syntax trees
// ---------------------------------------------------------------------------

/// Arrow expression. Equality ignores source positions.
#[derive(Debug, Clone)]
pub struct ArrowExpr {
    pub position: Position,
    pub node: ArrowNode,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrowNode {
    Gen(String),
    Unit(String),
    Dual(Box<ArrowExpr>),
    Tensor(Box<ArrowExpr>, Box<ArrowExpr>),
}

impl PartialEq for ArrowExpr {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

/// 2-arrow term. Equality ignores source positions.
#[derive(Debug, Clone)]
pub struct Term {
    pub position: Position,
    pub node: TermNode,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TermNode {
    Ref(String),
    Id(ArrowExpr),
    GenR(ArrowExpr),
    GenRbar(ArrowExpr),
    Proj(String),
    Adj(Box<Term>),
    Tensor(Box<Term>, Box<Term>),
    Seq(Box<Term>, Box<Term>),
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    tokens: Vec<Token>,
    index: usize,
    end: Position,
}

const ATOM_EXPECTED: &str = "an identifier, 'id(', 'R(', 'Rbar(', 'adj(', 'proj(' or '('";
const AATOM_EXPECTED: &str = "a generator name, 'unit(', 'dual(' or '('";

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.index)
    }

    fn advance(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.index).cloned();
        if t.is_some() {
            self.index += 1;
        }
        t
    }

    fn here(&self) -> Position {
        self.peek().map_or(self.end, |t| t.position)
    }

    fn found(&self) -> String {
        self.peek()
            .map_or("end of input".into(), |t| format!("'{}'", t.lexeme))
    }

    fn error(&self, expected: impl Into<String>) -> DslError {
        DslError::Parse {
            position: self.here(),
            found: self.found(),
            expected: expected.into(),
        }
    }

    fn expect(&mut self, kind: TokenKind, expected: &str) -> DslResult<Token> {
        match self.peek() {
            Some(t) if t.kind == kind => Ok(self.advance().unwrap()),
            _ => Err(self.error(expected)),
        }
    }

    fn expect_ident(&mut self, expected: &str) -> DslResult<Token> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => Ok(self.advance().unwrap()),
            _ => Err(self.error(expected)),
        }
    }

    fn parse_seq(&mut self) -> DslResult<Term> {
        let mut term = self.parse_tens()?;
        while matches!(self.peek(), Some(t) if t.kind == TokenKind::Semi) {
            self.advance();
            let rhs = self.parse_tens()?;
            let position = term.position;
            term = Term {
                position,
                node: TermNode::Seq(Box::new(term), Box::new(rhs)),
            };
        }
        Ok(term)
    }

    fn parse_tens(&mut self) -> DslResult<Term> {
        let mut term = self.parse_atom()?;
        while matches!(self.peek(), Some(t) if t.kind == TokenKind::Star) {
            self.advance();
            let rhs = self.parse_atom()?;
            let position = term.position;
            term = Term {
                position,
                node: TermNode::Tensor(Box::new(term), Box::new(rhs)),
            };
        }
        Ok(term)
    }

    fn parse_atom(&mut self) -> DslResult<Term> {
        let position = self.here();
        let token = match self.peek() {
            Some(t) => t.clone(),
            None => return Err(self.error(ATOM_EXPECTED)),
        };
        let node = match token.kind {
            TokenKind::Ident => {
                self.advance();
                TermNode::Ref(token.lexeme)
            }
            TokenKind::Keyword(kw @ (Keyword::Id | Keyword::R | Keyword::Rbar)) => {
                self.advance();
                self.expect(TokenKind::LParen, "'('")?;
                let arrow = self.parse_arrow()?;
                self.expect(TokenKind::RParen, "')'")?;
                match kw {
                    Keyword::Id => TermNode::Id(arrow),
                    Keyword::R => TermNode::GenR(arrow),
                    _ => TermNode::GenRbar(arrow),
                }
            }
            TokenKind::Keyword(Keyword::Adj) => {
                self.advance();
                self.expect(TokenKind::LParen, "'('")?;
                let inner = self.parse_seq()?;
                self.expect(TokenKind::RParen, "')'")?;
                TermNode::Adj(Box::new(inner))
            }
            TokenKind::Keyword(Keyword::Proj) => {
                self.advance();
                self.expect(TokenKind::LParen, "'('")?;
                let name = self.expect_ident("a generator name")?;
                self.expect(TokenKind::RParen, "')'")?;
                TermNode::Proj(name.lexeme)
            }
            TokenKind::LParen => {
                self.advance();
                let inner = self.parse_seq()?;
                self.expect(TokenKind::RParen, "')'")?;
                return Ok(inner);
            }
            _ => return Err(self.error(ATOM_EXPECTED)),
        };
        Ok(Term { position, node })
    }

    fn parse_arrow(&mut self) -> DslResult<ArrowExpr> {
        let mut expr = self.parse_aatom()?;
        while matches!(self.peek(), Some(t) if t.kind == TokenKind::Star) {
            self.advance();
            let rhs = self.parse_aatom()?;
            let position = expr.position;
            expr = ArrowExpr {
                position,
                node: ArrowNode::Tensor(Box::new(expr), Box::new(rhs)),
            };
        }
        Ok(expr)
    }

    fn parse_aatom(&mut self) -> DslResult<ArrowExpr> {
        let position = self.here();
        let token = match self.peek() {
            Some(t) => t.clone(),
            None => return Err(self.error(AATOM_EXPECTED)),
        };
        let node = match token.kind {
            TokenKind::Ident => {
                self.advance();
                ArrowNode::Gen(token.lexeme)
            }
            TokenKind::Keyword(Keyword::Unit) => {
                self.advance();
                self.expect(TokenKind::LParen, "'('")?;
                let name = self.expect_ident("an object name")?;
                self.expect(TokenKind::RParen, "')'")?;
                ArrowNode::Unit(name.lexeme)
            }
            TokenKind::Keyword(Keyword::Dual) => {
                self.advance();
                self.expect(TokenKind::LParen, "'('")?;
                let inner = self.parse_aatom()?;
                self.expect(TokenKind::RParen, "')'")?;
                ArrowNode::Dual(Box::new(inner))
            }
            TokenKind::LParen => {
                self.advance();
                let inner = self.parse_arrow()?;
                self.expect(TokenKind::RParen, "')'")?;
                return Ok(inner);
            }
            _ => return Err(self.error(AATOM_EXPECTED)),
        };
        Ok(ArrowExpr { position, node })
    }
}

/// Parse one term; the whole input must be consumed.
pub fn parse(text: &str) -> DslResult<Term> {
    let (tokens, end) = lex(text)?;
    let mut p = Parser {
        tokens,
        index: 0,
        end,
    };
    let term = p.parse_seq()?;
    if p.peek().is_some() {
        return Err(p.error("';', '*' or end of input"));
    }
    Ok(term)
}

// ---------------------------------------------------------------------------
// Pretty-printer
// ---------------------------------------------------------------------------

/// Canonical text form; `parse(print_term(t))` reproduces `t` up to
/// positions.
pub fn print_term(t: &Term) -> String {
    print_seq(t)
}

fn print_seq(t: &Term) -> String {
    match &t.node {
        TermNode::Seq(a, b) => format!("{} ; {}", print_seq(a), print_tens(b)),
        _ => print_tens(t),
    }
}

fn print_tens(t: &Term) -> String {
    match &t.node {
        TermNode::Tensor(a, b) => format!("{} * {}", print_tens(a), print_atom(b)),
        TermNode::Seq(_, _) => format!("({})", print_seq(t)),
        _ => print_atom(t),
    }
}

fn print_atom(t: &Term) -> String {
    match &t.node {
        TermNode::Ref(name) => name.clone(),
        TermNode::Id(a) => format!("id({})", print_arrow_expr(a)),
        TermNode::GenR(a) => format!("R({})", print_arrow_expr(a)),
        TermNode::GenRbar(a) => format!("Rbar({})", print_arrow_expr(a)),
        TermNode::Proj(name) => format!("proj({name})"),
        TermNode::Adj(inner) => format!("adj({})", print_seq(inner)),
        TermNode::Tensor(_, _) | TermNode::Seq(_, _) => format!("({})", print_seq(t)),
    }
}

pub fn print_arrow_expr(a: &ArrowExpr) -> String {
    match &a.node {
        ArrowNode::Tensor(l, r) => {
            format!("{} * {}", print_arrow_expr(l), print_arrow_aatom(r))
        }
        _ => print_arrow_aatom(a),
    }
}

fn print_arrow_aatom(a: &ArrowExpr) -> String {
    match &a.node {
        ArrowNode::Gen(name) => name.clone(),
        ArrowNode::Unit(name) => format!("unit({name})"),
        ArrowNode::Dual(inner) => format!("dual({})", print_arrow_aatom(inner)),
        ArrowNode::Tensor(_, _) => format!("({})", print_arrow_expr(a)),
    }
}

// ---------------------------------------------------------------------------
// Typechecking
// ---------------------------------------------------------------------------

/// Term with inferred source and target arrows on every node.
#[derive(Debug, Clone)]
pub struct TypedTerm<T: Scalar> {
    pub source: Arrow<T>,
    pub target: Arrow<T>,
    pub node: TypedNode<T>,
}

#[derive(Debug, Clone)]
pub enum TypedNode<T: Scalar> {
    Ref(String, TwoArrow<T>),
    Id(Arrow<T>),
    GenR(Arrow<T>),
    GenRbar(Arrow<T>),
    Proj(Arrow<T>),
    Adj(Box<TypedTerm<T>>),
    Tensor(Box<TypedTerm<T>>, Box<TypedTerm<T>>),
    Seq(Box<TypedTerm<T>>, Box<TypedTerm<T>>),
}

fn resolve_arrow<T: Scalar>(
    cat: &CategoryPresentation<T>,
    expr: &ArrowExpr,
) -> DslResult<Arrow<T>> {
    match &expr.node {
        ArrowNode::Gen(name) => Ok(Arrow::generator(cat, cat.gen_id(name)?)),
        ArrowNode::Unit(name) => Ok(Arrow::unit(cat.object_id(name)?)),
        ArrowNode::Dual(inner) => Ok(resolve_arrow(cat, inner)?.dual()),
        ArrowNode::Tensor(l, r) => {
            let left = resolve_arrow(cat, l)?;
            let right = resolve_arrow(cat, r)?;
            left.tensor(cat, &right).map_err(|e| match e {
                ModelError::TypeMismatch { .. } => DslError::TypeMismatch {
                    context: "arrow tensor",
                    position: r.position,
                    left: left.display(cat),
                    right: right.display(cat),
                },
                other => DslError::Model(other),
            })
        }
    }
}

fn hom_display<T: Scalar>(cat: &CategoryPresentation<T>, t: &TypedTerm<T>) -> String {
    format!(
        "Hom({}, {})",
        t.source.display(cat),
        t.target.display(cat)
    )
}

/// Infer source and target arrows for every node. Free names resolve
/// through `bindings`.
pub fn typecheck<T: Scalar>(
    cat: &CategoryPresentation<T>,
    term: &Term,
    bindings: &BTreeMap<String, TwoArrow<T>>,
) -> DslResult<TypedTerm<T>> {
    match &term.node {
        TermNode::Ref(name) => {
            let value = bindings.get(name).ok_or_else(|| DslError::UnboundName {
                name: name.clone(),
                position: term.position,
            })?;
            Ok(TypedTerm {
                source: value.source().clone(),
                target: value.target().clone(),
                node: TypedNode::Ref(name.clone(), value.clone()),
            })
        }
        TermNode::Id(expr) => {
            let arrow = resolve_arrow(cat, expr)?;
            Ok(TypedTerm {
                source: arrow.clone(),
                target: arrow.clone(),
                node: TypedNode::Id(arrow),
            })
        }
        TermNode::GenR(expr) => {
            let arrow = resolve_arrow(cat, expr)?;
            Ok(TypedTerm {
                source: Arrow::unit(arrow.source()),
                target: arrow.dual().tensor(cat, &arrow)?,
                node: TypedNode::GenR(arrow),
            })
        }
        TermNode::GenRbar(expr) => {
            let arrow = resolve_arrow(cat, expr)?;
            Ok(TypedTerm {
                source: Arrow::unit(arrow.target()),
                target: arrow.tensor(cat, &arrow.dual())?,
                node: TypedNode::GenRbar(arrow),
            })
        }
        TermNode::Proj(name) => {
            let arrow = Arrow::generator(cat, cat.gen_id(name)?);
            let carrier = arrow.dual().tensor(cat, &arrow)?;
            Ok(TypedTerm {
                source: carrier.clone(),
                target: carrier,
                node: TypedNode::Proj(arrow),
            })
        }
        TermNode::Adj(inner) => {
            let typed = typecheck(cat, inner, bindings)?;
            Ok(TypedTerm {
                source: typed.target.clone(),
                target: typed.source.clone(),
                node: TypedNode::Adj(Box::new(typed)),
            })
        }
        TermNode::Tensor(a, b) => {
            let ta = typecheck(cat, a, bindings)?;
            let tb = typecheck(cat, b, bindings)?;
            let mismatch = |_| DslError::TypeMismatch {
                context: "tensor",
                position: b.position,
                left: hom_display(cat, &ta),
                right: hom_display(cat, &tb),
            };
            let source = ta.source.tensor(cat, &tb.source).map_err(mismatch)?;
            let target = ta.target.tensor(cat, &tb.target).map_err(mismatch)?;
            Ok(TypedTerm {
                source,
                target,
                node: TypedNode::Tensor(Box::new(ta), Box::new(tb)),
            })
        }
        TermNode::Seq(a, b) => {
            let ta = typecheck(cat, a, bindings)?;
            let tb = typecheck(cat, b, bindings)?;
            if ta.target != tb.source {
                return Err(DslError::TypeMismatch {
                    context: "sequential composition",
                    position: b.position,
                    left: ta.target.display(cat),
                    right: tb.source.display(cat),
                });
            }
            Ok(TypedTerm {
                source: ta.source.clone(),
                target: tb.target.clone(),
                node: TypedNode::Seq(Box::new(ta), Box::new(tb)),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Conjugation solutions keyed by arrow, filled with canonical solutions on
/// demand.
#[derive(Debug, Default)]
pub struct SolutionTable<T: Scalar> {
    map: BTreeMap<String, SolutionPair<T>>,
}

impl<T: Scalar> SolutionTable<T> {
    pub fn new() -> Self {
        SolutionTable {
            map: BTreeMap::new(),
        }
    }

    /// Register a solution for its own arrow, overriding the canonical one.
    pub fn insert(&mut self, cat: &CategoryPresentation<T>, sol: SolutionPair<T>) {
        self.map.insert(sol.rho.display(cat), sol);
    }

    pub fn solution(
        &mut self,
        cat: &CategoryPresentation<T>,
        arrow: &Arrow<T>,
    ) -> DslResult<&SolutionPair<T>> {
        let key = arrow.display(cat);
        if !self.map.contains_key(&key) {
            let sol = canonical_solution(cat, arrow)?;
            self.map.insert(key.clone(), sol);
        }
        Ok(self.map.get(&key).expect("just inserted"))
    }
}

/// Evaluate a typechecked term to a 2-arrow.
pub fn evaluate<T: Scalar>(
    cat: &CategoryPresentation<T>,
    term: &TypedTerm<T>,
    solutions: &mut SolutionTable<T>,
) -> DslResult<TwoArrow<T>> {
    match &term.node {
        TypedNode::Ref(_, value) => Ok(value.clone()),
        TypedNode::Id(arrow) => Ok(TwoArrow::identity(cat, arrow)),
        TypedNode::GenR(arrow) => Ok(solutions.solution(cat, arrow)?.r.clone()),
        TypedNode::GenRbar(arrow) => Ok(solutions.solution(cat, arrow)?.r_bar.clone()),
        TypedNode::Proj(arrow) => {
            let sol = solutions.solution(cat, arrow)?.clone();
            let (e, _) = jones_projections(cat, &sol)?;
            Ok(e)
        }
        TypedNode::Adj(inner) => Ok(evaluate(cat, inner, solutions)?.adjoint()),
        TypedNode::Tensor(a, b) => {
            let ea = evaluate(cat, a, solutions)?;
            let eb = evaluate(cat, b, solutions)?;
            Ok(compose_horizontal(cat, &ea, &eb)?)
        }
        TypedNode::Seq(a, b) => {
            let ea = evaluate(cat, a, solutions)?;
            let eb = evaluate(cat, b, solutions)?;
            Ok(compose_vertical(cat, &eb, &ea)?)
        }
    }
}

/// Parse, typecheck and evaluate in one step.
pub fn run_expression<T: Scalar>(
    cat: &CategoryPresentation<T>,
    text: &str,
    bindings: &BTreeMap<String, TwoArrow<T>>,
    solutions: &mut SolutionTable<T>,
) -> DslResult<TwoArrow<T>> {
    let term = parse(text)?;
    let typed = typecheck(cat, &term, bindings)?;
    evaluate(cat, &typed, solutions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjugation::bullet;
    use crate::homcalc::hom_basis;
    use crate::model::{load_presentation, PresentationBuilder, RawFibre};
    use crate::numerics::{SplitMix64, Tolerance};

    type P = CategoryPresentation<f64>;

    fn tol() -> Tolerance<f64> {
        Tolerance::default()
    }

    fn load(name: &str) -> P {
        let path = format!("{}/../../data/{}", env!("CARGO_MANIFEST_DIR"), name);
        let text = std::fs::read_to_string(path).unwrap();
        load_presentation(&text, tol()).unwrap()
    }

    fn single_fibre(d: usize) -> P {
        let mut b = PresentationBuilder::new(tol());
        b.object("A", &["pt"]);
        b.arrow("rho", "A", "A", vec![RawFibre::plain("pt", "pt", d)]);
        b.build().unwrap()
    }

    fn rho_of(cat: &P) -> Arrow<f64> {
        Arrow::generator(cat, cat.gen_id("rho").unwrap())
    }

    fn random_end(cat: &P, arrow: &Arrow<f64>, seed: u64) -> TwoArrow<f64> {
        let basis = hom_basis(cat, arrow, arrow).unwrap();
        let mut rng = SplitMix64::new(seed);
        let mut acc = TwoArrow::zero(arrow.clone(), arrow.clone());
        for e in &basis.elements {
            acc = acc.add(&e.scaled(rng.next_complex_gaussian()));
        }
        acc
    }

    fn no_bindings() -> BTreeMap<String, TwoArrow<f64>> {
        BTreeMap::new()
    }

    #[test]
    fn parses_an_identity_atom() {
        let t = parse("id(rho)").unwrap();
        match &t.node {
            TermNode::Id(a) => assert_eq!(a.node, ArrowNode::Gen("rho".into())),
            other => panic!("unexpected shape {other:?}"),
        }
    }

    #[test]
    fn parses_a_conjugation_word_into_a_sequenced_pair_of_tensors() {
        let t = parse("adj(Rbar(rho)) * id(rho) ; id(rho) * R(rho)").unwrap();
        let TermNode::Seq(first, second) = &t.node else {
            panic!("expected a sequence");
        };
        assert!(matches!(first.node, TermNode::Tensor(_, _)));
        let TermNode::Tensor(l, r) = &second.node else {
            panic!("expected a tensor");
        };
        assert!(matches!(l.node, TermNode::Id(_)));
        assert!(matches!(r.node, TermNode::GenR(_)));
    }

    #[test]
    fn reports_the_position_of_an_unclosed_paren() {
        match parse("id(rho ;") {
            Err(DslError::Parse {
                position,
                found,
                expected,
            }) => {
                assert_eq!(position.line, 1);
                assert_eq!(position.column, 8);
                assert_eq!(found, "';'");
                assert!(expected.contains("')'"), "expected set was {expected}");
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_trailing_input_and_arrow_keywords_in_term_position() {
        assert!(matches!(parse("id(rho))"), Err(DslError::Parse { .. })));
        assert!(matches!(parse("dual(rho)"), Err(DslError::Parse { .. })));
        assert!(matches!(parse(""), Err(DslError::Parse { .. })));
    }

    #[test]
    fn conjugation_word_types_as_an_endomorphism_of_rho() {
        let cat = load("twopoint.json");
        let rho = rho_of(&cat);
        let t = parse("id(rho) * R(rho) ; adj(Rbar(rho)) * id(rho)").unwrap();
        let typed = typecheck(&cat, &t, &no_bindings()).unwrap();
        assert_eq!(typed.source, rho);
        assert_eq!(typed.target, rho);
    }

    #[test]
    fn sequencing_two_unit_heads_is_a_type_error() {
        let cat = load("twopoint.json");
        let t = parse("R(rho) ; R(rho)").unwrap();
        match typecheck(&cat, &t, &no_bindings()) {
            Err(DslError::TypeMismatch { left, right, .. }) => {
                // target of the first R is the chain, source of the second
                // is the unit; both sides must be printed.
                assert!(left.contains("dual(rho)"), "left was {left}");
                assert!(right.contains("unit("), "right was {right}");
            }
            other => panic!("expected a type mismatch, got {other:?}"),
        }
    }

    #[test]
    fn signature_chase_through_a_one_sided_tensor() {
        let cat = load("twopoint.json");
        let t = parse("id(dual(rho)) * Rbar(rho)").unwrap();
        let typed = typecheck(&cat, &t, &no_bindings()).unwrap();
        let rho = rho_of(&cat);
        let expected_target = rho
            .dual()
            .tensor(&cat, &rho)
            .unwrap()
            .tensor(&cat, &rho.dual())
            .unwrap();
        assert_eq!(typed.source, rho.dual());
        assert_eq!(typed.target, expected_target);
    }

    #[test]
    fn unbound_names_are_reported_with_their_position() {
        let cat = single_fibre(2);
        let t = parse("id(rho) ; X").unwrap();
        match typecheck(&cat, &t, &no_bindings()) {
            Err(DslError::UnboundName { name, position }) => {
                assert_eq!(name, "X");
                assert_eq!(position.column, 11);
            }
            other => panic!("expected an unbound name error, got {other:?}"),
        }
    }

    #[test]
    fn conjugation_words_evaluate_to_identities() {
        for cat in [load("twopoint.json"), load("heisenberg3.json")] {
            let rho = rho_of(&cat);
            let mut solutions = SolutionTable::new();
            let left = run_expression(
                &cat,
                "id(rho) * R(rho) ; adj(Rbar(rho)) * id(rho)",
                &no_bindings(),
                &mut solutions,
            )
            .unwrap();
            assert!(left.sub(&TwoArrow::identity(&cat, &rho)).max_abs() < 1e-9);
            let right = run_expression(
                &cat,
                "R(rho) * id(dual(rho)) ; id(dual(rho)) * adj(Rbar(rho))",
                &no_bindings(),
                &mut solutions,
            )
            .unwrap();
            let id_bar = TwoArrow::identity(&cat, &rho.dual());
            assert!(right.sub(&id_bar).max_abs() < 1e-9);
        }
    }

    #[test]
    fn double_adjoint_returns_the_binding() {
        let cat = single_fibre(2);
        let x = random_end(&cat, &rho_of(&cat), 3);
        let mut bindings = no_bindings();
        bindings.insert("X".into(), x.clone());
        let mut solutions = SolutionTable::new();
        let back = run_expression(&cat, "adj(adj(X))", &bindings, &mut solutions).unwrap();
        assert!(back.sub(&x).max_abs() < 1e-14);
    }

    #[test]
    fn bullet_word_matches_the_library_route() {
        let cat = single_fibre(2);
        let rho = rho_of(&cat);
        let s = random_end(&cat, &rho, 17);
        let sol = canonical_solution(&cat, &rho).unwrap();
        let expected = bullet(&cat, &sol, &sol, &s).unwrap();
        let mut bindings = no_bindings();
        bindings.insert("S".into(), s);
        let mut solutions = SolutionTable::new();
        let word = "R(rho) * id(dual(rho)) ; id(dual(rho)) * adj(S) * id(dual(rho)) ; \
                    id(dual(rho)) * adj(Rbar(rho))";
        let got = run_expression(&cat, word, &bindings, &mut solutions).unwrap();
        assert!(got.sub(&expected).max_abs() < 1e-10);
    }

    #[test]
    fn jones_projection_atom_is_idempotent_and_self_adjoint() {
        let cat = load("heisenberg3.json");
        let mut solutions = SolutionTable::new();
        let e = run_expression(&cat, "proj(rho)", &no_bindings(), &mut solutions).unwrap();
        let squared = run_expression(
            &cat,
            "proj(rho) ; proj(rho)",
            &no_bindings(),
            &mut solutions,
        )
        .unwrap();
        assert!(squared.sub(&e).max_abs() < 1e-10);
        assert!(e.adjoint().sub(&e).max_abs() < 1e-12);
    }

    #[test]
    fn evaluation_is_invariant_under_reassociation() {
        let cat = single_fibre(2);
        let rho = rho_of(&cat);
        let mut bindings = no_bindings();
        for (name, seed) in [("X", 5), ("Y", 6), ("Z", 7)] {
            bindings.insert(name.into(), random_end(&cat, &rho, seed));
        }
        let mut solutions = SolutionTable::new();
        let pairs = [
            ("X ; Y ; Z", "X ; (Y ; Z)"),
            ("X * Y * Z", "X * (Y * Z)"),
            ("(X ; Y) * Z", "(X ; Y) * Z"),
        ];
        for (a, b) in pairs {
            let va = run_expression(&cat, a, &bindings, &mut solutions).unwrap();
            let vb = run_expression(&cat, b, &bindings, &mut solutions).unwrap();
            assert!(va.sub(&vb).max_abs() < 1e-12, "{a} vs {b}");
        }
    }

    fn random_arrow_expr(rng: &mut SplitMix64, depth: usize) -> ArrowExpr {
        let pos = Position { line: 1, column: 1 };
        let pick = rng.next_u64() % if depth == 0 { 2 } else { 4 };
        let node = match pick {
            0 => ArrowNode::Gen("rho".into()),
            1 => ArrowNode::Unit("A".into()),
            2 => ArrowNode::Dual(Box::new(random_arrow_expr(rng, depth - 1))),
            _ => ArrowNode::Tensor(
                Box::new(random_arrow_expr(rng, depth - 1)),
                Box::new(random_arrow_expr(rng, depth - 1)),
            ),
        };
        ArrowExpr { position: pos, node }
    }

    fn random_term(rng: &mut SplitMix64, depth: usize) -> Term {
        let pos = Position { line: 1, column: 1 };
        let pick = rng.next_u64() % if depth == 0 { 5 } else { 8 };
        let node = match pick {
            0 => TermNode::Ref("X".into()),
            1 => TermNode::Id(random_arrow_expr(rng, 1)),
            2 => TermNode::GenR(random_arrow_expr(rng, 1)),
            3 => TermNode::GenRbar(random_arrow_expr(rng, 1)),
            4 => TermNode::Proj("rho".into()),
            5 => TermNode::Adj(Box::new(random_term(rng, depth - 1))),
            6 => TermNode::Tensor(
                Box::new(random_term(rng, depth - 1)),
                Box::new(random_term(rng, depth - 1)),
            ),
            _ => TermNode::Seq(
                Box::new(random_term(rng, depth - 1)),
                Box::new(random_term(rng, depth - 1)),
            ),
        };
        Term { position: pos, node }
    }

    #[test]
    fn printing_and_parsing_round_trip_200_random_well_typed_terms() {
        let cat = single_fibre(2);
        let rho = rho_of(&cat);
        let mut bindings = no_bindings();
        bindings.insert("X".into(), random_end(&cat, &rho, 9));
        let mut rng = SplitMix64::new(2024);
        let mut accepted = 0;
        let mut attempts = 0;
        while accepted < 200 {
            attempts += 1;
            assert!(attempts < 40_000, "rejection sampling stalled");
            let t = random_term(&mut rng, 3);
            if typecheck(&cat, &t, &bindings).is_err() {
                continue;
            }
            accepted += 1;
            let text = print_term(&t);
            let back = parse(&text).unwrap_or_else(|e| panic!("reparse of '{text}': {e}"));
            assert_eq!(back, t, "round trip of '{text}'");
        }
    }
}
