//! TF-IDF ranking of operating-procedure documents.
//!
//! Weights are raw term count times smoothed idf `ln((1 + N) / (1 + df)) + 1`;
//! document and query vectors are L2-normalized and scored by cosine. Synonyms
//! are folded to their canonical term on both the index and the query side.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("duplicate document id {0}")]
    DuplicateDocument(String),
    #[error("document {0} has an empty body")]
    EmptyBody(String),
    #[error("{path}: {reason}")]
    Malformed { path: String, reason: String },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub body: String,
    pub tags: Vec<String>,
}

impl Document {
    /// Parses the on-disk format: `doc_id`, title and comma-separated tags on
    /// the first three lines, body after.
    pub fn parse(text: &str) -> Result<Document, String> {
        let mut lines = text.splitn(4, '\n');
        let mut header = |name: &str| {
            lines
                .next()
                .map(|l| l.trim_end_matches('\r').trim().to_owned())
                .ok_or_else(|| format!("missing {name} line"))
        };
        let doc_id = header("doc_id")?;
        let title = header("title")?;
        let tags = header("tags")?
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(String::from)
            .collect();
        let body = lines.next().unwrap_or("").trim().to_owned();
        if doc_id.is_empty() {
            return Err("empty doc_id".into());
        }
        if body.is_empty() {
            return Err("empty body".into());
        }
        Ok(Document { doc_id, title, body, tags })
    }
}

/// Lowercasing tokenizer with stopword removal and synonym folding.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Analyzer {
    pub synonyms: BTreeMap<String, String>,
    pub stopwords: BTreeSet<String>,
}

impl Analyzer {
    pub fn new(synonyms: BTreeMap<String, String>, stopwords: BTreeSet<String>) -> Self {
        let synonyms = synonyms
            .into_iter()
            .map(|(k, v)| (k.to_lowercase(), v.to_lowercase()))
            .collect();
        let stopwords = stopwords.into_iter().map(|w| w.to_lowercase()).collect();
        Self { synonyms, stopwords }
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        text.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| t.chars().count() >= 2 && !self.stopwords.contains(*t))
            .map(|t| self.canonical(t).to_owned())
            .collect()
    }

    pub fn canonical<'a>(&'a self, term: &'a str) -> &'a str {
        self.synonyms.get(term).map_or(term, String::as_str)
    }
}

/// Parses `surface -> canonical` lines. Blank lines and `#` comments are skipped.
pub fn parse_synonyms(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (surface, canonical) = line
            .split_once("->")
            .ok_or_else(|| format!("line {}: expected `surface -> canonical`", n + 1))?;
        let (surface, canonical) = (surface.trim(), canonical.trim());
        if surface.is_empty() || canonical.is_empty() {
            return Err(format!("line {}: empty term", n + 1));
        }
        map.insert(surface.to_lowercase(), canonical.to_lowercase());
    }
    Ok(map)
}

pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Sparse vector keyed by term id.
pub type SparseVector = BTreeMap<usize, f64>;

#[derive(Debug, Clone)]
pub struct Index {
    analyzer: Analyzer,
    vocabulary: BTreeMap<String, usize>,
    df: Vec<usize>,
    idf: Vec<f64>,
    doc_vectors: BTreeMap<String, SparseVector>,
    documents: BTreeMap<String, Document>,
    n_docs: usize,
}

pub fn build_index(corpus: &[Document], analyzer: Analyzer) -> Result<Index, RetrievalError> {
    if corpus.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    let mut vocabulary = BTreeMap::new();
    let mut df: Vec<usize> = Vec::new();
    let mut counts: Vec<(String, BTreeMap<usize, usize>)> = Vec::with_capacity(corpus.len());
    let mut documents = BTreeMap::new();

    for doc in corpus {
        if doc.body.trim().is_empty() {
            return Err(RetrievalError::EmptyBody(doc.doc_id.clone()));
        }
        if documents.insert(doc.doc_id.clone(), doc.clone()).is_some() {
            return Err(RetrievalError::DuplicateDocument(doc.doc_id.clone()));
        }
        let mut tf = BTreeMap::new();
        for term in analyzer.tokenize(&doc.body) {
            let next_id = vocabulary.len();
            let id = *vocabulary.entry(term).or_insert(next_id);
            if id == df.len() {
                df.push(0);
            }
            *tf.entry(id).or_insert(0) += 1;
        }
        for &id in tf.keys() {
            df[id] += 1;
        }
        counts.push((doc.doc_id.clone(), tf));
    }

    let n = corpus.len() as f64;
    let idf: Vec<f64> = df.iter().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();
    let doc_vectors = counts
        .into_iter()
        .map(|(id, tf)| {
            let v = tf.into_iter().map(|(t, c)| (t, c as f64 * idf[t])).collect();
            (id, normalize(v))
        })
        .collect();

    Ok(Index {
        analyzer,
        vocabulary,
        df,
        idf,
        doc_vectors,
        documents,
        n_docs: corpus.len(),
    })
}

fn normalize(mut v: SparseVector) -> SparseVector {
    let norm = v.values().map(|w| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.values_mut().for_each(|w| *w /= norm);
    }
    v
}

impl Index {
    /// Loads `dir/docs/*.txt`, `dir/synonyms.txt` and `dir/stopwords.txt`
    /// (the latter two optional). Documents are read in file-name order.
    pub fn load_dir(dir: &Path) -> Result<Index, RetrievalError> {
        let read = |p: &Path| {
            fs::read_to_string(p).map_err(|source| RetrievalError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        let optional = |name: &str| {
            let p = dir.join(name);
            if p.exists() {
                read(&p).map(Some)
            } else {
                Ok(None)
            }
        };
        let synonyms = match optional("synonyms.txt")? {
            Some(text) => parse_synonyms(&text).map_err(|reason| RetrievalError::Malformed {
                path: dir.join("synonyms.txt").display().to_string(),
                reason,
            })?,
            None => BTreeMap::new(),
        };
        let stopwords = optional("stopwords.txt")?.map(|t| parse_stopwords(&t)).unwrap_or_default();

        let docs_dir = dir.join("docs");
        let entries = fs::read_dir(&docs_dir).map_err(|source| RetrievalError::Io {
            path: docs_dir.display().to_string(),
            source,
        })?;
        let mut paths: Vec<_> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "txt"))
            .collect();
        paths.sort();
        let mut corpus = Vec::with_capacity(paths.len());
        for p in paths {
            let doc = Document::parse(&read(&p)?).map_err(|reason| RetrievalError::Malformed {
                path: p.display().to_string(),
                reason,
            })?;
            corpus.push(doc);
        }
        build_index(&corpus, Analyzer::new(synonyms, stopwords))
    }

    pub fn analyzer(&self) -> &Analyzer {
        &self.analyzer
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn term_id(&self, term: &str) -> Option<usize> {
        self.vocabulary.get(term).copied()
    }

    pub fn df(&self, term: &str) -> Option<usize> {
        self.term_id(term).map(|id| self.df[id])
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.term_id(term).map(|id| self.idf[id])
    }

    /// Normalized weight of `term` in `doc_id`; 0 when absent.
    pub fn weight(&self, doc_id: &str, term: &str) -> f64 {
        match (self.doc_vectors.get(doc_id), self.term_id(term)) {
            (Some(v), Some(t)) => v.get(&t).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    pub fn doc_vector(&self, doc_id: &str) -> Option<&SparseVector> {
        self.doc_vectors.get(doc_id)
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.get(doc_id)
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.documents.values()
    }

    /// Unit query vector for a multiset of canonical terms. Unknown terms drop out.
    pub fn query_vector(&self, terms: &BTreeMap<String, u32>) -> SparseVector {
        let v = terms
            .iter()
            .filter_map(|(t, &c)| self.term_id(t).map(|id| (id, c as f64 * self.idf[id])))
            .collect();
        normalize(v)
    }

    pub fn rank(&self, query: &QueryState, limit: usize) -> Vec<RankedDocument> {
        self.rank_terms(&query.keywords, limit)
    }

    pub fn rank_terms(&self, terms: &BTreeMap<String, u32>, limit: usize) -> Vec<RankedDocument> {
        let q = self.query_vector(terms);
        let mut ranked: Vec<RankedDocument> = self
            .doc_vectors
            .iter()
            .map(|(id, d)| {
                let dot: f64 = q.iter().filter_map(|(t, w)| d.get(t).map(|dw| w * dw)).sum();
                RankedDocument {
                    doc_id: id.clone(),
                    title: self.documents[id].title.clone(),
                    score: dot.clamp(0.0, 1.0),
                }
            })
            .collect();
        ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
        ranked.truncate(limit);
        ranked
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankedDocument {
    pub doc_id: String,
    pub title: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeywordSource {
    Detector,
    Fusion,
    Commander,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Contribution {
    pub source: KeywordSource,
    pub step: u64,
    pub count: u32,
}

/// The mission's accumulated keyword multiset with provenance.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryState {
    pub keywords: BTreeMap<String, u32>,
    /// keyword → every contribution that added to its count.
    pub contributions: BTreeMap<String, Vec<Contribution>>,
}

impl QueryState {
    /// Merges canonicalized `new_keywords` into the multiset. A term already
    /// contributed by the same `(source, step)` is skipped, so replaying an
    /// identical call is a no-op. Returns the number of terms added.
    pub fn add_keywords<S: AsRef<str>>(
        &mut self,
        analyzer: &Analyzer,
        new_keywords: &[S],
        source: KeywordSource,
        step: u64,
    ) -> u32 {
        let mut batch: BTreeMap<String, u32> = BTreeMap::new();
        for kw in new_keywords {
            for term in analyzer.tokenize(kw.as_ref()) {
                *batch.entry(term).or_insert(0) += 1;
            }
        }
        let mut added = 0;
        for (term, count) in batch {
            let history = self.contributions.entry(term.clone()).or_default();
            if history.iter().any(|c| c.source == source && c.step == step) {
                continue;
            }
            history.push(Contribution { source, step, count });
            *self.keywords.entry(term).or_insert(0) += count;
            added += count;
        }
        added
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }
}

/// Adds keywords and returns the fresh ranking.
pub fn add_keywords<S: AsRef<str>>(
    index: &Index,
    query: &mut QueryState,
    new_keywords: &[S],
    source: KeywordSource,
    step: u64,
    limit: usize,
) -> Vec<RankedDocument> {
    query.add_keywords(index.analyzer(), new_keywords, source, step);
    index.rank(query, limit)
}
