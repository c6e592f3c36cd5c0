//! Word-vector loading and phrase similarity.
//!
//! Phrases are embedded as the arithmetic mean of the vectors of their known
//! tokens and compared with cosine similarity clamped to [0, 1]. Tokens the
//! store does not know are skipped; a phrase with no known token gets the
//! zero vector and a vocabulary-missing flag instead of a made-up score.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::{Error, Result};

/// Immutable store of token vectors sharing one dimension.
#[derive(Debug, Clone)]
pub struct WordVectorStore {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
    /// Tokens that appeared more than once in the input (last occurrence won).
    pub duplicate_count: usize,
}

impl WordVectorStore {
    pub fn from_entries(entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let dimension = entries
            .first()
            .map(|(_, v)| v.len())
            .ok_or_else(|| Error::EmptyVectorFile {
                path: "<memory>".into(),
            })?;
        let mut vectors = HashMap::with_capacity(entries.len());
        let mut duplicate_count = 0;
        for (i, (token, vector)) in entries.into_iter().enumerate() {
            if vector.len() != dimension {
                return Err(Error::DimensionMismatch {
                    path: "<memory>".into(),
                    line: i as u64 + 1,
                    got: vector.len(),
                    expected: dimension,
                });
            }
            if vectors.insert(token, vector).is_some() {
                duplicate_count += 1;
            }
        }
        Ok(WordVectorStore {
            dimension,
            vectors,
            duplicate_count,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(|v| v.as_slice())
    }
}

/// Loads vectors in GloVe text format: `token v1 v2 ... vD`, one per line,
/// no header. The dimension is inferred from the first line.
pub fn load_vectors(path: impl AsRef<Path>) -> Result<WordVectorStore> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(display.clone(), e))?;
    let reader = BufReader::new(file);

    let mut dimension: Option<usize> = None;
    let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
    let mut duplicate_count = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(display.clone(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i as u64 + 1;
        let mut parts = line.split(' ');
        let token = parts.next().expect("split yields at least one part");
        let components: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>().map_err(|e| Error::MalformedRow {
                    path: display.clone(),
                    line: line_no,
                    message: format!("bad float {p:?}: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        match dimension {
            None => dimension = Some(components.len()),
            Some(d) if d != components.len() => {
                return Err(Error::DimensionMismatch {
                    path: display,
                    line: line_no,
                    got: components.len(),
                    expected: d,
                });
            }
            Some(_) => {}
        }
        if vectors.insert(token.to_string(), components).is_some() {
            duplicate_count += 1;
        }
    }
    let dimension = dimension.ok_or(Error::EmptyVectorFile { path: display })?;
    Ok(WordVectorStore {
        dimension,
        vectors,
        duplicate_count,
    })
}

/// Lowercases, strips non-alphanumeric characters and splits on whitespace.
pub fn tokenize(phrase: &str) -> Vec<String> {
    phrase
        .to_lowercase()
        .split_whitespace()
        .map(|w| w.chars().filter(|c| c.is_alphanumeric()).collect::<String>())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Mean vector of a phrase over the tokens present in the store.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseVector {
    pub vector: Vec<f64>,
    pub known_token_count: usize,
    pub total_token_count: usize,
}

impl PhraseVector {
    pub fn is_vocabulary_missing(&self) -> bool {
        self.known_token_count == 0
    }

    pub fn norm(&self) -> f64 {
        self.vector.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub fn phrase_vector(store: &WordVectorStore, phrase: &str) -> Result<PhraseVector> {
    let tokens = tokenize(phrase);
    if tokens.is_empty() {
        return Err(Error::EmptyPhrase {
            phrase: phrase.to_string(),
        });
    }
    let mut vector = vec![0.0; store.dimension()];
    let mut known = 0usize;
    for token in &tokens {
        if let Some(v) = store.get(token) {
            known += 1;
            for (acc, x) in vector.iter_mut().zip(v) {
                *acc += x;
            }
        }
    }
    if known > 0 {
        for x in &mut vector {
            *x /= known as f64;
        }
    }
    Ok(PhraseVector {
        vector,
        known_token_count: known,
        total_token_count: tokens.len(),
    })
}

/// A similarity score in [0, 1] plus a flag marking degenerate comparisons
/// where one side had no in-vocabulary token.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub score: f64,
    pub vocabulary_missing: bool,
}

/// Cosine of two precomputed phrase vectors, clamped below at 0.
pub fn cosine(a: &PhraseVector, b: &PhraseVector) -> Similarity {
    if a.is_vocabulary_missing() || b.is_vocabulary_missing() {
        return Similarity {
            score: 0.0,
            vocabulary_missing: true,
        };
    }
    let dot: f64 = a.vector.iter().zip(&b.vector).map(|(x, y)| x * y).sum();
    let denom = a.norm() * b.norm();
    let score = if denom == 0.0 { 0.0 } else { dot / denom };
    Similarity {
        score: score.clamp(0.0, 1.0),
        vocabulary_missing: false,
    }
}

/// Semantic similarity of two phrases.
pub fn similarity(store: &WordVectorStore, a: &str, b: &str) -> Result<Similarity> {
    let va = phrase_vector(store, a)?;
    let vb = phrase_vector(store, b)?;
    Ok(cosine(&va, &vb))
}
