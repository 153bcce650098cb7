//! Dataset model: documents, search cases, domains, splits, and a synthetic
//! domain generator.
//!
//! A *domain* bundles a document collection with search cases over it. Cases
//! carry the user's hidden intent and a list of *facets* — token lists the
//! simulated user reveals one at a time when asked a clarifying question.
//!
//! On-disk format is line-delimited JSON with two record kinds:
//!
//! ```text
//! {"kind":"doc","doc_id":"d0001","text":"..."}
//! {"kind":"case","user_id":"u0001","target_doc_id":"d0001","intent_text":"...",
//!  "initial_query":"...","facets":[["tok"]],"ambiguous":true,"split":"train"}
//! ```
//!
//! Unknown fields are ignored so files can carry extra annotations. Split
//! tags are all-or-none: either every case names its split or none does.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, uniform_index};

/// Lowercase a string and split it into maximal alphanumeric runs.
///
/// This is the single tokenization used everywhere: documents, queries,
/// history text, and hashed embeddings all agree on it. Punctuation-only
/// input tokenizes to nothing.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// One retrievable document.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    tokens: Vec<String>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Document {
            doc_id: doc_id.into(),
            text,
            tokens,
        }
    }

    /// Token list derived from `text` at construction.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// One search task: a user with a hidden intent looking for one target
/// document, plus the facets they can reveal when asked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchCase {
    pub user_id: String,
    pub target_doc_id: String,
    /// Full statement of the need; simulators may use it, retrieval never does.
    pub intent_text: String,
    pub initial_query: String,
    /// Facet token lists, revealed in order, one per clarifying question.
    pub facets: Vec<Vec<String>>,
    /// Whether the initial query underspecifies the intent.
    pub ambiguous: bool,
}

impl SearchCase {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.user_id.is_empty() {
            return Err("empty user_id".into());
        }
        if self.target_doc_id.is_empty() {
            return Err("empty target_doc_id".into());
        }
        for (i, facet) in self.facets.iter().enumerate() {
            if facet.is_empty() {
                return Err(format!("facet {i} is empty"));
            }
            if facet.iter().any(|t| t.is_empty()) {
                return Err(format!("facet {i} contains an empty token"));
            }
        }
        Ok(())
    }
}

/// Named split: disjoint index sets into a domain's case list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn is_empty(&self) -> bool {
        self.train.is_empty() && self.valid.is_empty() && self.test.is_empty()
    }

    /// Check disjointness, bounds, and (when any set is non-empty) that the
    /// three sets partition `0..n_cases`.
    pub fn validate(&self, n_cases: usize) -> std::result::Result<(), String> {
        if self.is_empty() {
            return Ok(());
        }
        let mut seen = vec![false; n_cases];
        for (name, set) in [
            ("train", &self.train),
            ("valid", &self.valid),
            ("test", &self.test),
        ] {
            for &i in set {
                if i >= n_cases {
                    return Err(format!("{name} split index {i} out of range"));
                }
                if seen[i] {
                    return Err(format!("case {i} assigned to more than one split"));
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(format!("case {missing} assigned to no split"));
        }
        Ok(())
    }
}

/// A document collection plus the search cases defined over it.
#[derive(Debug, Clone)]
pub struct DomainDataset {
    pub name: String,
    documents: Vec<Document>,
    cases: Vec<SearchCase>,
    pub splits: Splits,
    index_by_id: HashMap<String, usize>,
}

impl DomainDataset {
    /// Build and validate a dataset: non-empty on both sides, unique doc ids,
    /// no case targeting an unknown document.
    pub fn new(
        name: impl Into<String>,
        documents: Vec<Document>,
        cases: Vec<SearchCase>,
    ) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::EmptyCollection);
        }
        if cases.is_empty() {
            return Err(Error::NoCases);
        }
        let mut index_by_id = HashMap::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            if index_by_id.insert(doc.doc_id.clone(), i).is_some() {
                return Err(Error::DuplicateDocId(doc.doc_id.clone()));
            }
        }
        for case in &cases {
            if !index_by_id.contains_key(&case.target_doc_id) {
                return Err(Error::DanglingTarget {
                    user_id: case.user_id.clone(),
                    doc_id: case.target_doc_id.clone(),
                });
            }
        }
        Ok(DomainDataset {
            name: name.into(),
            documents,
            cases,
            splits: Splits::default(),
            index_by_id,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn cases(&self) -> &[SearchCase] {
        &self.cases
    }

    pub fn doc_index(&self, doc_id: &str) -> Option<usize> {
        self.index_by_id.get(doc_id).copied()
    }

    pub fn doc_by_id(&self, doc_id: &str) -> Option<&Document> {
        self.doc_index(doc_id).map(|i| &self.documents[i])
    }

    /// Cases belonging to one split, in case order.
    pub fn split_cases(&self, split: Split) -> Vec<&SearchCase> {
        let idx = match split {
            Split::Train => &self.splits.train,
            Split::Valid => &self.splits.valid,
            Split::Test => &self.splits.test,
        };
        idx.iter().map(|&i| &self.cases[i]).collect()
    }

    /// Fraction of cases flagged ambiguous.
    pub fn ambiguity_proportion(&self) -> Result<f64> {
        if self.cases.is_empty() {
            return Err(Error::NoCases);
        }
        let ambiguous = self.cases.iter().filter(|c| c.ambiguous).count();
        Ok(ambiguous as f64 / self.cases.len() as f64)
    }
}

/// Identifier for one of the three named splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "valid" => Some(Split::Valid),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

/// On-disk record; `kind` selects the variant.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind")]
enum Record {
    #[serde(rename = "doc")]
    Doc { doc_id: String, text: String },
    #[serde(rename = "case")]
    Case {
        user_id: String,
        target_doc_id: String,
        intent_text: String,
        initial_query: String,
        #[serde(default)]
        facets: Vec<Vec<String>>,
        #[serde(default)]
        ambiguous: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        split: Option<String>,
    },
}

/// Load a domain from a line-delimited record file. The domain takes its
/// name from the file stem. Split tags, when present, must cover every case.
pub fn load_domain(path: impl AsRef<Path>) -> Result<DomainDataset> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
    let reader = BufReader::new(file);

    let mut documents = Vec::new();
    let mut cases = Vec::new();
    let mut case_splits: Vec<(usize, Option<Split>)> = Vec::new(); // (line, split)

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(&display, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                path: display.clone(),
                line: lineno,
                msg: e.to_string(),
            })?;
        match record {
            Record::Doc { doc_id, text } => documents.push(Document::new(doc_id, text)),
            Record::Case {
                user_id,
                target_doc_id,
                intent_text,
                initial_query,
                facets,
                ambiguous,
                split,
            } => {
                let parsed_split = match split {
                    None => None,
                    Some(s) => Some(Split::parse(&s).ok_or_else(|| {
                        Error::MalformedRecord {
                            path: display.clone(),
                            line: lineno,
                            msg: format!("unknown split {s:?}"),
                        }
                    })?),
                };
                let case = SearchCase {
                    user_id,
                    target_doc_id,
                    intent_text,
                    initial_query,
                    facets,
                    ambiguous,
                };
                if let Err(msg) = case.validate() {
                    return Err(Error::MalformedRecord {
                        path: display.clone(),
                        line: lineno,
                        msg,
                    });
                }
                case_splits.push((lineno, parsed_split));
                cases.push(case);
            }
        }
    }

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| display.clone());
    let mut dataset = DomainDataset::new(name, documents, cases)?;

    let tagged = case_splits.iter().filter(|(_, s)| s.is_some()).count();
    if tagged > 0 {
        if let Some((line, _)) = case_splits.iter().find(|(_, s)| s.is_none()) {
            return Err(Error::MalformedRecord {
                path: display,
                line: *line,
                msg: "case lacks a split tag while other cases have one".into(),
            });
        }
        let mut splits = Splits::default();
        for (i, (_, split)) in case_splits.iter().enumerate() {
            match split.unwrap() {
                Split::Train => splits.train.push(i),
                Split::Valid => splits.valid.push(i),
                Split::Test => splits.test.push(i),
            }
        }
        dataset.splits = splits;
    }
    Ok(dataset)
}

/// Write a domain as a line-delimited record file (documents first, then
/// cases, both in stored order). Split tags are emitted when splits are set.
pub fn save_domain(dataset: &DomainDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut split_of: HashMap<usize, Split> = HashMap::new();
    for &i in &dataset.splits.train {
        split_of.insert(i, Split::Train);
    }
    for &i in &dataset.splits.valid {
        split_of.insert(i, Split::Valid);
    }
    for &i in &dataset.splits.test {
        split_of.insert(i, Split::Test);
    }

    let mut out = Vec::new();
    for doc in dataset.documents() {
        let record = Record::Doc {
            doc_id: doc.doc_id.clone(),
            text: doc.text.clone(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.push(b'\n');
    }
    for (i, case) in dataset.cases().iter().enumerate() {
        let record = Record::Case {
            user_id: case.user_id.clone(),
            target_doc_id: case.target_doc_id.clone(),
            intent_text: case.intent_text.clone(),
            initial_query: case.initial_query.clone(),
            facets: case.facets.clone(),
            ambiguous: case.ambiguous,
            split: split_of.get(&i).map(|s| s.to_string()),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(&display, e))?;
    file.write_all(&out).map_err(|e| Error::io(&display, e))?;
    Ok(())
}

/// Assign every case to train/valid/test in 6:1:1 proportion with a seeded
/// shuffle. `valid` and `test` each get `n/8` cases (rounded down); the
/// remainder goes to train, so all three splits are non-empty for `n >= 8`.
pub fn split_dataset(dataset: &mut DomainDataset, seed: u64) -> Result<()> {
    let n = dataset.cases.len();
    if n < 8 {
        return Err(Error::TooFewCases(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng::stream(seed, "corpus.split");
    rng::shuffle(&mut rng, &mut order);

    let n_valid = n / 8;
    let n_test = n / 8;
    let n_train = n - n_valid - n_test;

    let mut splits = Splits {
        train: order[..n_train].to_vec(),
        valid: order[n_train..n_train + n_valid].to_vec(),
        test: order[n_train + n_valid..].to_vec(),
    };
    splits.train.sort_unstable();
    splits.valid.sort_unstable();
    splits.test.sort_unstable();
    dataset.splits = splits;
    Ok(())
}

/// How clarifying questions pay off in a synthetic domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Helpfulness {
    /// Initial queries are underspecified; revealed facets are decisive.
    AskHelps,
    /// Initial queries already pin the target; asking only wastes turns.
    AskHurts,
    /// A per-case blend of the two above.
    Mixed,
}

impl Helpfulness {
    pub fn parse(s: &str) -> Option<Helpfulness> {
        match s {
            "ask-helps" => Some(Helpfulness::AskHelps),
            "ask-hurts" => Some(Helpfulness::AskHurts),
            "mixed" => Some(Helpfulness::Mixed),
            _ => None,
        }
    }
}

impl fmt::Display for Helpfulness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Helpfulness::AskHelps => "ask-helps",
            Helpfulness::AskHurts => "ask-hurts",
            Helpfulness::Mixed => "mixed",
        })
    }
}

/// Recipe for one synthetic domain.
///
/// `vocabulary` selects a token block; all tokens of a domain embed it, so
/// profiles with different vocabulary values share no tokens at all.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub name: String,
    pub vocabulary: u64,
    pub n_docs: usize,
    pub n_cases: usize,
    /// Facets per ambiguous case; must be >= 1 unless the profile is ask-hurts.
    pub facet_count: usize,
    pub helpfulness: Helpfulness,
}

/// Documents per lexical group in synthetic domains. Each group shares one
/// group token; the first half of a group carries it twice (those documents
/// outscore the rest on a group-token query), the second half once. Ambiguous
/// cases target second-half members of full groups, which pins their
/// first-turn rank past the half-group of stronger matches.
const GROUP_SIZE: usize = 10;

/// Size of the per-domain pool of common filler tokens.
const COMMON_POOL: usize = 20;

/// Number of chatter documents appended to every synthetic domain.
const CHATTER_DOCS: usize = 6;

/// Text of the chatter documents: exactly the tokens of the two fixed
/// simulator utterances (the dry "nothing to add" reply and the rejection
/// after a failed presentation).
///
/// These decoys are what makes wasted turns costly in *retrieval* terms
/// rather than only in reward terms. A question asked past the last facet
/// appends "I have nothing to add" to the conversation, and a rejected
/// presentation appends "none of these match"; either way the reformulated
/// query suddenly matches all six chatter documents on five (or four)
/// rare tokens at once, which outscores any single-document match and
/// buries the true target below the presentation cutoff. On clean queries
/// the chatter documents score zero, so first-turn ranks are unaffected.
pub const CHATTER_TEXT: &str = "i have nothing to add none of these match";

/// Generate a synthetic domain, deterministically in `(profile, seed)`.
///
/// Construction guarantees, relied on by evaluation baselines and tests:
///
/// * ask-hurts cases: the initial query contains the target's two exclusive
///   tokens, so first-turn retrieval ranks the target 1st.
/// * ask-helps cases: the initial query is the target's group token alone;
///   at least half the group outscores the target (rank > `GROUP_SIZE / 2`),
///   and appending the first facet's token lifts the target to rank 1.
/// * the last [`CHATTER_DOCS`] documents carry [`CHATTER_TEXT`]; they score
///   zero against every initial query and every facet, are never case
///   targets, and dominate any query that absorbed a fixed simulator
///   utterance (see [`CHATTER_TEXT`]).
pub fn synth_domain(profile: &SynthProfile, seed: u64) -> Result<DomainDataset> {
    if profile.n_docs < GROUP_SIZE {
        return Err(Error::InvalidParam(format!(
            "n_docs must be at least {GROUP_SIZE}, got {}",
            profile.n_docs
        )));
    }
    let content_docs = profile.n_docs - CHATTER_DOCS; // n_docs >= GROUP_SIZE > CHATTER_DOCS
    if profile.helpfulness != Helpfulness::AskHurts && content_docs < GROUP_SIZE {
        return Err(Error::InvalidParam(format!(
            "profiles with ambiguous cases need n_docs >= {} \
             (one full lexical group plus {CHATTER_DOCS} chatter documents), got {}",
            GROUP_SIZE + CHATTER_DOCS,
            profile.n_docs
        )));
    }
    if profile.n_cases < 10 {
        return Err(Error::InvalidParam(format!(
            "n_cases must be at least 10, got {}",
            profile.n_cases
        )));
    }
    if profile.helpfulness != Helpfulness::AskHurts && profile.facet_count == 0 {
        return Err(Error::InvalidParam(
            "facet_count must be >= 1 for profiles with ambiguous cases".into(),
        ));
    }

    let v = profile.vocabulary;
    let group_token = |g: usize| format!("v{v}g{g}");
    let common_token = |c: usize| format!("v{v}c{c}");
    let exclusive_token = |d: usize, tag: char| format!("v{v}x{d}{tag}");

    let mut rng = rng::stream(seed, &format!("corpus.synth.{}.{v}", profile.name));

    // Content documents: group token (once or twice), two common tokens,
    // two exclusive tokens. Ids are zero-padded so lexicographic order is
    // numeric order.
    let n_groups = content_docs / GROUP_SIZE; // full groups only
    let mut documents = Vec::with_capacity(profile.n_docs);
    for d in 0..content_docs {
        let group = d / GROUP_SIZE;
        let pos = d % GROUP_SIZE;
        let double_group_token = pos < GROUP_SIZE / 2;
        let c1 = common_token(uniform_index(&mut rng, COMMON_POOL));
        let c2 = common_token(uniform_index(&mut rng, COMMON_POOL));
        let g = group_token(group);
        let xa = exclusive_token(d, 'a');
        let xb = exclusive_token(d, 'b');
        let text = if double_group_token {
            format!("{g} {c1} {xa} {g} {c2} {xb}")
        } else {
            format!("{g} {c1} {xa} {c2} {xb}")
        };
        documents.push(Document::new(format!("d{d:04}"), text));
    }
    // Chatter documents close out the id range. Identical texts tie on
    // score, so presentation order among them is the id order.
    for d in content_docs..profile.n_docs {
        documents.push(Document::new(format!("d{d:04}"), CHATTER_TEXT));
    }

    // Cases. Ambiguous cases target the weaker half of a full group; their
    // query is the group token alone and their facets reveal the exclusive
    // tokens one at a time (the first reveal is already decisive).
    // Unambiguous cases target any content document and embed the exclusive
    // tokens in the query directly. Chatter documents are never targets.
    let mut cases = Vec::with_capacity(profile.n_cases);
    for u in 0..profile.n_cases {
        let ambiguous = match profile.helpfulness {
            Helpfulness::AskHelps => true,
            Helpfulness::AskHurts => false,
            Helpfulness::Mixed => uniform_index(&mut rng, 2) == 0,
        };
        let (target, initial_query, facets) = if ambiguous {
            let group = uniform_index(&mut rng, n_groups);
            let pos = GROUP_SIZE / 2 + uniform_index(&mut rng, GROUP_SIZE - GROUP_SIZE / 2);
            let d = group * GROUP_SIZE + pos;
            let mut facets = vec![vec![exclusive_token(d, 'a')]];
            if profile.facet_count >= 2 {
                facets.push(vec![exclusive_token(d, 'b')]);
            }
            // Later facets cycle through the target's remaining tokens; they
            // keep the target on top without being decisive on their own.
            let doc_tokens = documents[d].tokens().to_vec();
            let extras: Vec<&String> = doc_tokens
                .iter()
                .filter(|t| !t.starts_with(&format!("v{v}x")))
                .collect();
            let mut k = 0;
            while facets.len() < profile.facet_count {
                facets.push(vec![extras[k % extras.len()].clone()]);
                k += 1;
            }
            (d, group_token(group), facets)
        } else {
            let d = uniform_index(&mut rng, content_docs);
            let query = format!(
                "{} {} {}",
                group_token(d / GROUP_SIZE),
                exclusive_token(d, 'a'),
                exclusive_token(d, 'b')
            );
            (d, query, Vec::new())
        };
        let intent_text = documents[target].text.clone();
        cases.push(SearchCase {
            user_id: format!("u{u:04}"),
            target_doc_id: documents[target].doc_id.clone(),
            intent_text,
            initial_query,
            facets,
            ambiguous,
        });
    }

    DomainDataset::new(profile.name.clone(), documents, cases)
}
