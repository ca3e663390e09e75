//! Dotted ENE identifiers such as `1.7.19.3`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// Deepest level of the category tree.
pub const MAX_DEPTH: usize = 4;

/// One node of the category tree, identified by its dotted path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EneLabel {
    id: String,
    path: Vec<u32>,
    name: Option<String>,
}

impl EneLabel {
    pub fn parse(id: &str) -> Result<Self> {
        let err = |reason| Error::ParseLabel { id: id.to_string(), reason };
        if id.is_empty() {
            return Err(err("empty identifier"));
        }
        let mut path = Vec::with_capacity(MAX_DEPTH);
        for component in id.split('.') {
            if component.is_empty() {
                return Err(err("empty component"));
            }
            if !component.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err("non-numeric component"));
            }
            // Leading zeros would not survive a format round trip.
            if component.len() > 1 && component.starts_with('0') {
                return Err(err("leading zero in component"));
            }
            let value = component.parse::<u32>().map_err(|_| err("component out of range"))?;
            path.push(value);
            if path.len() > MAX_DEPTH {
                return Err(err("more than four components"));
            }
        }
        Ok(EneLabel { id: id.to_string(), path, name: None })
    }

    pub fn from_path(path: &[u32]) -> Result<Self> {
        if path.is_empty() || path.len() > MAX_DEPTH {
            return Err(Error::ParseLabel {
                id: format_path(path),
                reason: "path must have 1 to 4 components",
            });
        }
        Ok(EneLabel { id: format_path(path), path: path.to_vec(), name: None })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn path(&self) -> &[u32] {
        &self.path
    }

    /// Depth in the tree, 1 through 4.
    pub fn level(&self) -> usize {
        self.path.len()
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// Identifier of the immediate parent, if any.
    pub fn parent_id(&self) -> Option<String> {
        (self.path.len() > 1).then(|| format_path(&self.path[..self.path.len() - 1]))
    }

    /// Identifiers of all strict prefixes, shallow to deep.
    pub fn prefix_ids(&self) -> Vec<String> {
        (1..self.path.len()).map(|n| format_path(&self.path[..n])).collect()
    }
}

impl fmt::Display for EneLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

impl FromStr for EneLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EneLabel::parse(s)
    }
}

pub(crate) fn format_path(path: &[u32]) -> String {
    let mut out = String::new();
    for (i, c) in path.iter().enumerate() {
        if i > 0 {
            out.push('.');
        }
        out.push_str(&c.to_string());
    }
    out
}
