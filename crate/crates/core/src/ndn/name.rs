use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NameError {
    #[error("name must start with '/': {0:?}")]
    NotAbsolute(String),
    #[error("empty name component in {0:?}")]
    EmptyComponent(String),
    #[error("name component contains '/': {0:?}")]
    SlashInComponent(String),
}

/// Hierarchical name; canonical text form `/c1/c2/.../ck`.
///
/// Cloning is cheap (shared storage).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name(Arc<[Arc<str>]>);

impl Name {
    pub fn root() -> Self {
        Name(Arc::from(Vec::<Arc<str>>::new()))
    }

    pub fn parse(text: &str) -> Result<Self, NameError> {
        if text == "/" {
            return Ok(Self::root());
        }
        let rest = text
            .strip_prefix('/')
            .ok_or_else(|| NameError::NotAbsolute(text.to_string()))?;
        let rest = rest.strip_suffix('/').unwrap_or(rest);
        let mut comps = Vec::new();
        for c in rest.split('/') {
            if c.is_empty() {
                return Err(NameError::EmptyComponent(text.to_string()));
            }
            comps.push(Arc::<str>::from(c));
        }
        Ok(Name(Arc::from(comps)))
    }

    pub fn from_components<I, S>(comps: I) -> Result<Self, NameError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = Vec::new();
        for c in comps {
            let c = c.as_ref();
            if c.is_empty() {
                return Err(NameError::EmptyComponent(c.to_string()));
            }
            if c.contains('/') {
                return Err(NameError::SlashInComponent(c.to_string()));
            }
            out.push(Arc::<str>::from(c));
        }
        Ok(Name(Arc::from(out)))
    }

    /// Append one component. Panics on an invalid component.
    pub fn child(&self, comp: &str) -> Name {
        assert!(
            !comp.is_empty() && !comp.contains('/'),
            "invalid name component {comp:?}"
        );
        let mut v: Vec<Arc<str>> = self.0.to_vec();
        v.push(Arc::from(comp));
        Name(Arc::from(v))
    }

    /// Concatenate another name's components after this one.
    pub fn join(&self, other: &Name) -> Name {
        let mut v: Vec<Arc<str>> = self.0.to_vec();
        v.extend(other.0.iter().cloned());
        Name(Arc::from(v))
    }

    pub fn components(&self) -> &[Arc<str>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&str> {
        self.0.get(i).map(|c| c.as_ref())
    }

    pub fn prefix(&self, len: usize) -> Name {
        Name(Arc::from(&self.0[..len.min(self.0.len())]))
    }

    pub fn is_prefix_of(&self, other: &Name) -> bool {
        self.0.len() <= other.0.len() && self.0.iter().zip(other.0.iter()).all(|(a, b)| a == b)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "/");
        }
        for c in self.0.iter() {
            write!(f, "/{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Name({self})")
    }
}

impl FromStr for Name {
    type Err = NameError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Name::parse(s)
    }
}
