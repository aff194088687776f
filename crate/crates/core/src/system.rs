//! JSON system files: a subshift plus named potentials.
//!
//! ```json
//! {
//!   "alphabet": ["0", "1"],
//!   "transitions": [[1, 1], [1, 0]],
//!   "potentials": { "ind1": { "memory": 1, "table": { "0": 0.0, "1": 1.0 } } }
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sft::{Potential, SubshiftSpec, Symbol};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    alphabet: Vec<String>,
    transitions: Vec<Vec<i64>>,
    #[serde(default)]
    potentials: BTreeMap<String, PotentialFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialFile {
    memory: usize,
    table: BTreeMap<String, f64>,
}

/// A validated subshift with its named potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct System {
    pub spec: SubshiftSpec,
    pub potentials: BTreeMap<String, Potential>,
}

fn invalid(context: impl Into<String>, source: Error) -> Error {
    Error::Validation { context: context.into(), source: Box::new(source) }
}

impl System {
    pub fn new(spec: SubshiftSpec) -> Self {
        System { spec, potentials: BTreeMap::new() }
    }

    pub fn with_potential(mut self, name: &str, phi: Potential) -> Self {
        self.potentials.insert(name.to_string(), phi);
        self
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SystemFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let mut matrix = Vec::with_capacity(file.transitions.len());
        for (i, row) in file.transitions.iter().enumerate() {
            let mut r = Vec::with_capacity(row.len());
            for (j, &v) in row.iter().enumerate() {
                if v != 0 && v != 1 {
                    return Err(invalid("transitions", Error::NotBinary { row: i, col: j, value: v }));
                }
                r.push(v as u8);
            }
            matrix.push(r);
        }
        let spec = SubshiftSpec::with_alphabet(file.alphabet, &matrix).map_err(|e| invalid("transitions", e))?;
        let mut potentials = BTreeMap::new();
        for (name, pf) in file.potentials {
            let context = format!("potential {name:?}");
            let mut table: BTreeMap<Vec<Symbol>, f64> = BTreeMap::new();
            for (key, value) in &pf.table {
                let word = spec.parse_word(key).map_err(|e| invalid(&context, e))?;
                if word.len() != pf.memory {
                    return Err(invalid(&context, Error::WordTooShort { got: word.len(), need: pf.memory }));
                }
                table.insert(word, *value);
            }
            let phi = Potential::from_table(&spec, pf.memory, &table).map_err(|e| invalid(&context, e))?;
            potentials.insert(name, phi);
        }
        Ok(System { spec, potentials })
    }

    pub fn to_json(&self) -> String {
        let file = SystemFile {
            alphabet: self.spec.alphabet().to_vec(),
            transitions: self.spec.matrix().iter().map(|r| r.iter().map(|&v| v as i64).collect()).collect(),
            potentials: self
                .potentials
                .iter()
                .map(|(name, phi)| {
                    let table = phi.entries(&self.spec).into_iter().map(|(w, v)| (self.spec.format_word(&w), v)).collect();
                    (name.clone(), PotentialFile { memory: phi.memory(), table })
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("system files serialize")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn potential(&self, name: &str) -> Result<&Potential> {
        self.potentials.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.potentials.keys().map(String::as_str).collect();
            Error::InvalidArgument(format!("unknown potential {name:?} (known: {})", known.join(", ")))
        })
    }
}

/// Loads a system file and returns the subshift and its potentials.
pub fn load_spec(path: impl AsRef<Path>) -> Result<(SubshiftSpec, BTreeMap<String, Potential>)> {
    let s = System::load(path)?;
    Ok((s.spec, s.potentials))
}
