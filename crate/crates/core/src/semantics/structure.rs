//! Meta-path / meta-graph specifications.
//!
//! Grammar:
//!
//! ```text
//! chain := item ('-' item)*
//! item  := TYPE | '(' chain ('|' chain)+ ')'
//! ```
//!
//! Groups hold at least two branches, each a plain chain of types, and must
//! sit between two plain steps. `A-P-(A|C)-P-A` reads: two papers that share
//! both a co-author and a venue, each written by one of the end authors.

use std::fmt;

use crate::hin::MetaSchema;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StructureError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown node type `{0}`")]
    UnknownType(String),
    #[error("parallel group at byte {0} has a single branch")]
    SingleBranch(usize),
    #[error("parallel groups must not be nested")]
    NestedGroup,
    #[error("a parallel group cannot start or end a structure")]
    GroupAtEnd,
    #[error("parallel groups must be separated by a plain step")]
    AdjacentGroups,
    #[error("structure starts at `{0}` but ends at `{1}`")]
    EndpointMismatch(String, String),
    #[error("structure needs at least one edge")]
    TooShort,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Element {
    Step(String),
    /// Parallel branches between the neighbouring steps.
    Group(Vec<Vec<String>>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SemanticStructure {
    elements: Vec<Element>,
}

#[derive(Debug)]
enum Item {
    Type(String),
    Group(Vec<Vec<Item>>, usize),
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, StructureError> {
        Err(StructureError::Syntax {
            pos: self.pos,
            message: message.into(),
        })
    }

    fn chain(&mut self) -> Result<Vec<Item>, StructureError> {
        let mut items = vec![self.item()?];
        while self.peek() == Some(b'-') {
            self.pos += 1;
            items.push(self.item()?);
        }
        Ok(items)
    }

    fn item(&mut self) -> Result<Item, StructureError> {
        match self.peek() {
            Some(b'(') => {
                let start = self.pos;
                self.pos += 1;
                let mut branches = vec![self.chain()?];
                while self.peek() == Some(b'|') {
                    self.pos += 1;
                    branches.push(self.chain()?);
                }
                if self.peek() != Some(b')') {
                    return self.err("expected `|` or `)`");
                }
                self.pos += 1;
                Ok(Item::Group(branches, start))
            }
            Some(c) if c.is_ascii_alphanumeric() || c == b'_' => {
                let start = self.pos;
                while self
                    .src
                    .get(self.pos)
                    .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                Ok(Item::Type(name.to_string()))
            }
            Some(c) => self.err(format!("unexpected `{}`", c as char)),
            None => self.err("unexpected end of input"),
        }
    }
}

impl SemanticStructure {
    /// Parses and checks the structural rules; type names are not checked.
    pub fn parse(spec: &str) -> Result<Self, StructureError> {
        let mut p = Parser {
            src: spec.as_bytes(),
            pos: 0,
        };
        let items = p.chain()?;
        if p.peek().is_some() {
            return p.err("trailing input");
        }
        let mut elements = Vec::with_capacity(items.len());
        for item in items {
            match item {
                Item::Type(name) => elements.push(Element::Step(name)),
                Item::Group(branches, pos) => {
                    if branches.len() < 2 {
                        return Err(StructureError::SingleBranch(pos));
                    }
                    let mut out = Vec::with_capacity(branches.len());
                    for branch in branches {
                        let mut types = Vec::with_capacity(branch.len());
                        for it in branch {
                            match it {
                                Item::Type(name) => types.push(name),
                                Item::Group(..) => return Err(StructureError::NestedGroup),
                            }
                        }
                        out.push(types);
                    }
                    elements.push(Element::Group(out));
                }
            }
        }
        Self::from_elements(elements)
    }

    pub fn from_elements(elements: Vec<Element>) -> Result<Self, StructureError> {
        if elements.len() < 2 {
            return Err(StructureError::TooShort);
        }
        let (first, last) = match (&elements[0], &elements[elements.len() - 1]) {
            (Element::Step(a), Element::Step(b)) => (a, b),
            _ => return Err(StructureError::GroupAtEnd),
        };
        if first != last {
            return Err(StructureError::EndpointMismatch(first.clone(), last.clone()));
        }
        for w in elements.windows(2) {
            if matches!(w, [Element::Group(_), Element::Group(_)]) {
                return Err(StructureError::AdjacentGroups);
            }
        }
        for e in &elements {
            if let Element::Group(b) = e {
                if b.len() < 2 || b.iter().any(Vec::is_empty) {
                    return Err(StructureError::SingleBranch(0));
                }
            }
        }
        if elements.len() < 3 && elements.iter().any(|e| matches!(e, Element::Group(_))) {
            return Err(StructureError::GroupAtEnd);
        }
        Ok(Self { elements })
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn source_type(&self) -> &str {
        match &self.elements[0] {
            Element::Step(t) => t,
            Element::Group(_) => unreachable!("validated on construction"),
        }
    }

    pub fn sink_type(&self) -> &str {
        match &self.elements[self.elements.len() - 1] {
            Element::Step(t) => t,
            Element::Group(_) => unreachable!("validated on construction"),
        }
    }

    pub fn is_meta_graph(&self) -> bool {
        self.elements.iter().any(|e| matches!(e, Element::Group(_)))
    }

    /// All type names mentioned, in order of appearance.
    pub fn type_names(&self) -> impl Iterator<Item = &str> {
        self.elements.iter().flat_map(|e| -> Box<dyn Iterator<Item = &str>> {
            match e {
                Element::Step(t) => Box::new(std::iter::once(t.as_str())),
                Element::Group(b) => Box::new(b.iter().flatten().map(String::as_str)),
            }
        })
    }

    /// Ordered type pairs that must exist as relations for this structure.
    pub fn required_relations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let els = &self.elements;
        for i in 0..els.len() - 1 {
            match (&els[i], &els[i + 1]) {
                (Element::Step(a), Element::Step(b)) => out.push((a.clone(), b.clone())),
                (Element::Step(l), Element::Group(branches)) => {
                    let Element::Step(r) = &els[i + 2] else { unreachable!() };
                    for br in branches {
                        let mut prev = l;
                        for t in br.iter().chain(std::iter::once(r)) {
                            out.push((prev.clone(), t.clone()));
                            prev = t;
                        }
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// The same structure read from sink to source.
    pub fn reversed(&self) -> Self {
        let elements = self
            .elements
            .iter()
            .rev()
            .map(|e| match e {
                Element::Step(t) => Element::Step(t.clone()),
                Element::Group(b) => {
                    Element::Group(b.iter().map(|br| br.iter().rev().cloned().collect()).collect())
                }
            })
            .collect();
        Self { elements }
    }

    /// Equal to its reversal up to branch order.
    pub fn is_palindromic(&self) -> bool {
        let canon = |s: &SemanticStructure| {
            s.elements
                .iter()
                .map(|e| match e {
                    Element::Group(b) => {
                        let mut b = b.clone();
                        b.sort();
                        Element::Group(b)
                    }
                    other => other.clone(),
                })
                .collect::<Vec<_>>()
        };
        canon(self) == canon(&self.reversed())
    }

    pub fn check_types(&self, schema: &MetaSchema) -> Result<(), StructureError> {
        match self.type_names().find(|t| !schema.has_type(t)) {
            Some(t) => Err(StructureError::UnknownType(t.to_string())),
            None => Ok(()),
        }
    }
}

/// Parses `spec` and checks every type name against `schema`.
pub fn parse_structure(spec: &str, schema: &MetaSchema) -> Result<SemanticStructure, StructureError> {
    let s = SemanticStructure::parse(spec)?;
    s.check_types(schema)?;
    Ok(s)
}

impl fmt::Display for SemanticStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.elements.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            match e {
                Element::Step(t) => f.write_str(t)?,
                Element::Group(branches) => {
                    f.write_str("(")?;
                    for (k, b) in branches.iter().enumerate() {
                        if k > 0 {
                            f.write_str("|")?;
                        }
                        f.write_str(&b.join("-"))?;
                    }
                    f.write_str(")")?;
                }
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for SemanticStructure {
    type Err = StructureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}
