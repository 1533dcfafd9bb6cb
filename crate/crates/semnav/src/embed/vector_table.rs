//! Loader for the word-vector text format: a `<vocab_size> <dimension>`
//! header line followed by one `<word> <v1> … <v_dim>` line per word.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use crate::scalar::Scalar;

use super::EmbedError;

/// In-memory static word-vector table with a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTable<T> {
    dimension: usize,
    entries: HashMap<String, Vec<T>>,
}

impl<T: Scalar> VectorTable<T> {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            entries: HashMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[T]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    /// Inserts a word vector; returns false (without replacing) when the
    /// word is already present or the dimension is wrong.
    pub fn insert(&mut self, word: String, vector: Vec<T>) -> bool {
        if vector.len() != self.dimension || self.entries.contains_key(&word) {
            return false;
        }
        self.entries.insert(word, vector);
        true
    }
}

/// Non-fatal observations made while loading a table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableWarning {
    /// Header vocab size does not match the number of parsed lines.
    CountMismatch { declared: usize, parsed: usize },
    /// Word seen twice; the first occurrence is kept.
    DuplicateWord { word: String, line: u64 },
}

impl std::fmt::Display for TableWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TableWarning::CountMismatch { declared, parsed } => {
                write!(f, "header declares {declared} words, parsed {parsed}")
            }
            TableWarning::DuplicateWord { word, line } => {
                write!(f, "duplicate word `{word}` at line {line} (first kept)")
            }
        }
    }
}

/// A parsed table plus the warnings collected on the way.
#[derive(Debug, Clone)]
pub struct VectorTableLoad<T> {
    pub table: VectorTable<T>,
    pub warnings: Vec<TableWarning>,
}

/// Parse the text vector format. Wrong-arity or non-numeric lines are
/// hard errors; a vocab-count mismatch against the header is a warning.
pub fn parse_vector_table<T, R>(source: R) -> Result<VectorTableLoad<T>, EmbedError>
where
    T: Scalar + FromStr,
    R: Read,
{
    let reader = BufReader::new(source);
    let mut lines = reader.lines();

    let header = lines.next().transpose()?.unwrap_or_default();
    let mut parts = header.split_whitespace();
    let (declared, dimension) = match (
        parts.next().and_then(|p| p.parse::<usize>().ok()),
        parts.next().and_then(|p| p.parse::<usize>().ok()),
        parts.next(),
    ) {
        (Some(v), Some(d), None) if d > 0 => (v, d),
        _ => {
            return Err(EmbedError::BadHeader {
                line: 1,
                content: header,
            })
        }
    };

    let mut table = VectorTable::new(dimension);
    let mut warnings = Vec::new();
    let mut parsed = 0usize;

    for (idx, line) in lines.enumerate() {
        let line = line?;
        let line_no = idx as u64 + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-empty line has a first field");
        let components: Vec<&str> = fields.collect();
        if components.len() != dimension {
            return Err(EmbedError::BadVectorArity {
                line: line_no,
                expected: dimension,
                found: components.len(),
            });
        }
        let mut vector = Vec::with_capacity(dimension);
        for token in components {
            let value: T = token.parse().map_err(|_| EmbedError::NonNumericComponent {
                line: line_no,
                token: token.to_string(),
            })?;
            vector.push(value);
        }
        parsed += 1;
        if !table.insert(word.to_string(), vector) {
            warnings.push(TableWarning::DuplicateWord {
                word: word.to_string(),
                line: line_no,
            });
        }
    }

    if declared != parsed {
        warnings.push(TableWarning::CountMismatch { declared, parsed });
    }

    Ok(VectorTableLoad { table, warnings })
}

/// Map a text to one vector: whitespace-tokenize and average the vectors
/// of in-vocabulary tokens, skipping out-of-vocabulary ones. Errors only
/// when no token is in vocabulary.
pub fn lookup_static<T: Scalar>(table: &VectorTable<T>, text: &str) -> Result<Vec<T>, EmbedError> {
    if text.trim().is_empty() {
        return Err(EmbedError::EmptyText);
    }
    let mut sum = vec![T::zero(); table.dimension()];
    let mut hits = 0usize;
    for token in text.split_whitespace() {
        if let Some(vector) = table.get(token) {
            for (acc, component) in sum.iter_mut().zip(vector) {
                *acc = *acc + *component;
            }
            hits += 1;
        }
    }
    if hits == 0 {
        return Err(EmbedError::AllTokensOutOfVocabulary {
            text: text.to_string(),
        });
    }
    let count = T::from_count(hits);
    Ok(sum.into_iter().map(|c| c / count).collect())
}
