//! Operation specifications and the variable context shared by every
//! checker.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::normal::Sizes;
use crate::predicate::Predicate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    In,
    Out,
    Index,
    Aux,
    /// The implicit length variable of a vector.
    Size,
    /// The operation counter `C` of a cost annotation.
    Counter,
    /// An unknown expression `ℰ` in a worksheet obligation.
    Hole,
}

impl Role {
    pub fn keyword(self) -> &'static str {
        match self {
            Role::In => "in",
            Role::Out => "out",
            Role::Index => "index",
            Role::Aux => "aux",
            Role::Size => "size",
            Role::Counter => "counter",
            Role::Hole => "hole",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Role> {
        Some(match s {
            "in" => Role::In,
            "out" => Role::Out,
            "index" => Role::Index,
            "aux" => Role::Aux,
            "size" => Role::Size,
            "counter" => Role::Counter,
            "hole" => Role::Hole,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Kind {
    Scalar,
    Vector { size: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarDecl {
    pub name: String,
    pub kind: Kind,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("undeclared name `{0}`")]
    Undeclared(String),
    #[error("`{0}` is declared twice")]
    Duplicate(String),
    #[error("expected exactly one output scalar, found {0}")]
    Outputs(usize),
    #[error("expected exactly one traversed vector, found {0}")]
    Vectors(usize),
    #[error("missing postcondition")]
    MissingPost,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperationSpec {
    pub name: String,
    pub vars: Vec<VarDecl>,
    pub pre: Predicate,
    pub post: Predicate,
}

impl OperationSpec {
    pub fn output(&self) -> &str {
        self.vars
            .iter()
            .find(|v| v.role == Role::Out)
            .map(|v| v.name.as_str())
            .expect("validated spec has an output")
    }

    /// The traversed vector and its size variable.
    pub fn vector(&self) -> (&str, &str) {
        self.vars
            .iter()
            .find_map(|v| match &v.kind {
                Kind::Vector { size } => Some((v.name.as_str(), size.as_str())),
                Kind::Scalar => None,
            })
            .expect("validated spec has a vector")
    }

    pub fn index(&self) -> Option<&str> {
        self.vars.iter().find(|v| v.role == Role::Index).map(|v| v.name.as_str())
    }

    pub fn context(&self) -> Context {
        let mut ctx = Context::default();
        for v in &self.vars {
            if let Kind::Vector { size } = &v.kind {
                ctx.entries.insert(size.clone(), (Role::Size, Kind::Scalar));
            }
        }
        for v in &self.vars {
            ctx.entries.insert(v.name.clone(), (v.role, v.kind.clone()));
        }
        ctx
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let mut seen = BTreeMap::new();
        for v in &self.vars {
            if seen.insert(v.name.as_str(), ()).is_some() {
                return Err(SpecError::Duplicate(v.name.clone()));
            }
        }
        let ctx = self.context();
        for name in self.pre.free_vars().into_iter().chain(self.post.free_vars()) {
            if !ctx.contains(&name) {
                return Err(SpecError::Undeclared(name));
            }
        }
        let outputs = self
            .vars
            .iter()
            .filter(|v| v.role == Role::Out && v.kind == Kind::Scalar)
            .count();
        if outputs != 1 {
            return Err(SpecError::Outputs(outputs));
        }
        let vectors = self.vars.iter().filter(|v| matches!(v.kind, Kind::Vector { .. })).count();
        if vectors != 1 {
            return Err(SpecError::Vectors(vectors));
        }
        if self.post.conjuncts.is_empty() {
            return Err(SpecError::MissingPost);
        }
        Ok(())
    }
}

/// Roles and kinds of every name a predicate may mention.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Context {
    entries: BTreeMap<String, (Role, Kind)>,
}

impl Context {
    pub fn with(mut self, name: &str, role: Role) -> Self {
        self.entries.insert(name.to_string(), (role, Kind::Scalar));
        self
    }

    pub fn with_vector(mut self, name: &str, size: &str) -> Self {
        self.entries.insert(size.to_string(), (Role::Size, Kind::Scalar));
        self.entries
            .insert(name.to_string(), (Role::In, Kind::Vector { size: size.to_string() }));
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn role(&self, name: &str) -> Option<Role> {
        self.entries.get(name).map(|(r, _)| *r)
    }

    /// Names that only ever hold integers.
    pub fn is_integer(&self, name: &str) -> bool {
        matches!(self.role(name), Some(Role::Index | Role::Size | Role::Counter))
    }

    /// Names whose value a program computes rather than receives.
    pub fn is_dependent(&self, name: &str) -> bool {
        matches!(self.role(name), Some(Role::Out | Role::Aux | Role::Counter | Role::Hole))
    }

    pub fn vectors(&self) -> Vec<(String, String)> {
        self.entries
            .iter()
            .filter_map(|(n, (_, k))| match k {
                Kind::Vector { size } => Some((n.clone(), size.clone())),
                Kind::Scalar => None,
            })
            .collect()
    }

    pub fn scalars(&self) -> impl Iterator<Item = (&str, Role)> {
        self.entries.iter().filter_map(|(n, (r, k))| match k {
            Kind::Scalar => Some((n.as_str(), *r)),
            Kind::Vector { .. } => None,
        })
    }

    pub fn sizes(&self) -> Sizes {
        Sizes(self.vectors().into_iter().collect())
    }
}
