use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EncodingError;

/// Bits per symbol.
pub const CODE_WIDTH: usize = 6;

/// Number of symbols a codebook must hold.
pub const CODEBOOK_SIZE: usize = 1 << CODE_WIDTH;

/// Largest Hamming distance allowed between a designated confusable pair.
pub const MAX_CONFUSABLE_DISTANCE: u32 = 2;

const DEFAULT_TABLE: &str = include_str!("../../data/codebook.tsv");

/// A bijection between 64 ASCII symbols and 6-bit codes, plus the list of
/// visually confusable symbol pairs whose codes must stay close.
///
/// The text format is one entry per line, `symbol<TAB>code` with the code
/// written as six ASCII binary digits. Directive lines start with `!`, which
/// is never a symbol:
///
/// ```text
/// !version<TAB>1
/// a<TAB>000001
/// !confusable<TAB>0<TAB>o
/// ```
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codebook {
    version: u32,
    /// `symbols[code]` is the symbol carrying that code.
    symbols: Vec<char>,
    confusable: Vec<(char, char)>,
}

impl Codebook {
    /// The table shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_TABLE).expect("shipped codebook is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EncodingError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| EncodingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, EncodingError> {
        let mut version = None;
        let mut slots: Vec<Option<char>> = vec![None; CODEBOOK_SIZE];
        let mut confusable = Vec::new();
        let mut seen = std::collections::BTreeSet::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let bad = |reason: String| EncodingError::InvalidCodebook {
                line: line_no,
                reason,
            };
            if raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            if let Some(directive) = fields[0].strip_prefix('!') {
                match (directive, &fields[1..]) {
                    ("version", [v]) => {
                        version = Some(v.parse().map_err(|_| bad(format!("bad version {v:?}")))?)
                    }
                    ("confusable", [a, b]) => {
                        let a = single_char(a).ok_or_else(|| bad(format!("bad symbol {a:?}")))?;
                        let b = single_char(b).ok_or_else(|| bad(format!("bad symbol {b:?}")))?;
                        confusable.push((a, b));
                    }
                    _ => return Err(bad(format!("unknown directive {raw:?}"))),
                }
                continue;
            }
            let [sym, code] = fields[..] else {
                return Err(bad("expected symbol<TAB>code".into()));
            };
            let sym = single_char(sym).ok_or_else(|| bad(format!("bad symbol {sym:?}")))?;
            if !sym.is_ascii_graphic() || sym.is_ascii_uppercase() {
                return Err(bad(format!(
                    "symbol {sym:?} must be printable lowercase ASCII"
                )));
            }
            if code.len() != CODE_WIDTH || !code.bytes().all(|b| b == b'0' || b == b'1') {
                return Err(bad(format!(
                    "code {code:?} is not {CODE_WIDTH} binary digits"
                )));
            }
            let value = usize::from_str_radix(code, 2).expect("validated binary");
            if !seen.insert(sym) {
                return Err(bad(format!("symbol {sym:?} listed twice")));
            }
            if let Some(prev) = slots[value] {
                return Err(bad(format!("code {code} already used by {prev:?}")));
            }
            slots[value] = Some(sym);
        }

        let version = version.ok_or(EncodingError::InvalidCodebook {
            line: 0,
            reason: "missing !version directive".into(),
        })?;
        let symbols: Vec<char> = slots.iter().flatten().copied().collect();
        if symbols.len() != CODEBOOK_SIZE {
            return Err(EncodingError::InvalidCodebook {
                line: 0,
                reason: format!("expected {CODEBOOK_SIZE} entries, found {}", symbols.len()),
            });
        }
        let book = Self {
            version,
            symbols,
            confusable,
        };
        for &(a, b) in &book.confusable {
            let (Some(ca), Some(cb)) = (book.code(a), book.code(b)) else {
                return Err(EncodingError::InvalidCodebook {
                    line: 0,
                    reason: format!("confusable pair {a:?}/{b:?} not in table"),
                });
            };
            let distance = (ca ^ cb).count_ones();
            if distance > MAX_CONFUSABLE_DISTANCE {
                return Err(EncodingError::InvalidCodebook {
                    line: 0,
                    reason: format!("confusable pair {a:?}/{b:?} differs in {distance} bits"),
                });
            }
        }
        Ok(book)
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn code(&self, symbol: char) -> Option<u8> {
        self.symbols
            .iter()
            .position(|&s| s == symbol)
            .map(|p| p as u8)
    }

    pub fn symbol(&self, code: u8) -> Option<char> {
        self.symbols.get(code as usize).copied()
    }

    pub fn contains(&self, symbol: char) -> bool {
        self.symbols.contains(&symbol)
    }

    pub fn confusable_pairs(&self) -> &[(char, char)] {
        &self.confusable
    }

    /// Symbols designated as visually confusable with `symbol`.
    pub fn confusable_with(&self, symbol: char) -> Vec<char> {
        let mut out: Vec<char> = self
            .confusable
            .iter()
            .filter_map(|&(a, b)| match (a == symbol, b == symbol) {
                (true, _) => Some(b),
                (_, true) => Some(a),
                _ => None,
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Serializes back to the tab-separated text format.
    pub fn to_table(&self) -> String {
        let mut out = format!("!version\t{}\n", self.version);
        for (code, sym) in self.symbols.iter().enumerate() {
            out.push_str(&format!("{sym}\t{code:06b}\n"));
        }
        for (a, b) in &self.confusable {
            out.push_str(&format!("!confusable\t{a}\t{b}\n"));
        }
        out
    }
}

impl Default for Codebook {
    fn default() -> Self {
        Self::builtin()
    }
}

impl fmt::Debug for Codebook {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Codebook")
            .field("version", &self.version)
            .field("confusable", &self.confusable.len())
            .finish()
    }
}

fn single_char(s: &str) -> Option<char> {
    let mut chars = s.chars();
    let c = chars.next()?;
    chars.next().is_none().then_some(c)
}
