use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{OnceLock, RwLock};

use crate::error::ParseError;

#[derive(Default)]
struct Interner {
    ids: HashMap<&'static str, u32>,
    names: Vec<&'static str>,
}

fn interner() -> &'static RwLock<Interner> {
    static INTERNER: OnceLock<RwLock<Interner>> = OnceLock::new();
    INTERNER.get_or_init(Default::default)
}

/// Interned module name. Cheap to copy and compare.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name(u32);

impl Name {
    pub fn new(name: &str) -> Name {
        if let Some(&id) = interner().read().unwrap().ids.get(name) {
            return Name(id);
        }
        let mut table = interner().write().unwrap();
        if let Some(&id) = table.ids.get(name) {
            return Name(id);
        }
        // The alphabet of all loaded models is small and lives for the process.
        let leaked: &'static str = Box::leak(name.to_owned().into_boxed_str());
        let id = table.names.len() as u32;
        table.names.push(leaked);
        table.ids.insert(leaked, id);
        Name(id)
    }

    pub fn as_str(self) -> &'static str {
        interner().read().unwrap().names[self.0 as usize]
    }

    pub fn is_push(self) -> bool {
        self == *PUSH
    }

    pub fn is_pop(self) -> bool {
        self == *POP
    }
}

struct LazyName(OnceLock<Name>, &'static str);

impl std::ops::Deref for LazyName {
    type Target = Name;
    fn deref(&self) -> &Name {
        self.0.get_or_init(|| Name::new(self.1))
    }
}

static PUSH: LazyName = LazyName(OnceLock::new(), "[");
static POP: LazyName = LazyName(OnceLock::new(), "]");

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.as_str())
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One parametric module of a derived string.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleSymbol {
    pub name: Name,
    pub params: Vec<f64>,
}

impl ModuleSymbol {
    pub fn new(name: &str, params: Vec<f64>) -> Self {
        Self {
            name: Name::new(name),
            params,
        }
    }

    pub fn push() -> Self {
        Self {
            name: *PUSH,
            params: Vec::new(),
        }
    }

    pub fn pop() -> Self {
        Self {
            name: *POP,
            params: Vec::new(),
        }
    }

    pub fn param(&self, i: usize) -> Option<f64> {
        self.params.get(i).copied()
    }
}

impl fmt::Display for ModuleSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name.as_str())?;
        if !self.params.is_empty() {
            f.write_str("(")?;
            for (i, p) in self.params.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{p:?}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// The derivation state: an ordered, bracket-balanced list of modules.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SymbolString {
    pub modules: Vec<ModuleSymbol>,
}

impl SymbolString {
    pub fn new(modules: Vec<ModuleSymbol>) -> Self {
        Self { modules }
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ModuleSymbol> {
        self.modules.iter()
    }

    pub fn is_balanced(&self) -> bool {
        let mut depth = 0usize;
        for m in &self.modules {
            if m.name.is_push() {
                depth += 1;
            } else if m.name.is_pop() {
                if depth == 0 {
                    return false;
                }
                depth -= 1;
            }
        }
        depth == 0
    }

    pub fn count(&self, name: &str) -> usize {
        let name = Name::new(name);
        self.modules.iter().filter(|m| m.name == name).count()
    }
}

impl fmt::Display for SymbolString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.modules {
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

/// Parses the debug text form, e.g. `A(1.0)[+(45)B]`. Parameters must be
/// numeric literals or constant arithmetic.
impl FromStr for SymbolString {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let scope = super::expr::Scope::default();
        let templates = super::parse::parse_module_list(s, 1, 1, &scope)?;
        let modules = templates
            .iter()
            .map(|t| {
                let params = t
                    .args
                    .iter()
                    .map(|e| e.eval(&super::expr::Env::constants_only(&[], &[])))
                    .collect();
                ModuleSymbol {
                    name: t.name,
                    params,
                }
            })
            .collect();
        let out = SymbolString { modules };
        if !out.is_balanced() {
            return Err(ParseError::new(1, 1, "unbalanced brackets"));
        }
        Ok(out)
    }
}
