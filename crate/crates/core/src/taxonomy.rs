//! Concept trees, Wu–Palmer similarity and interest classification.
//!
//! A [`ConceptTree`] is a rooted tree of interest concepts. Similarity between
//! two concepts is `2·depth(lca) / (depth(a) + depth(b))`, with depth counted
//! in arcs from the root. Similarity between two concept sets is the symmetric
//! best-match average of the pairwise concept similarities.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaxonomyError {
    #[error("unknown concept `{0}`")]
    InvalidConcept(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("history time {t} is earlier than last recorded time {last}")]
    InvalidTime { t: u64, last: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Index of a concept inside one [`ConceptTree`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConceptId(u32);

impl ConceptId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
pub struct ConceptTree {
    names: Vec<String>,
    index: HashMap<String, ConceptId>,
    parent: Vec<Option<ConceptId>>,
    depth: Vec<u32>,
    root: ConceptId,
}

pub(crate) fn valid_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl ConceptTree {
    /// Builds a tree from `(parent, child)` edges. The parent of the first
    /// edge is the root and must never appear as a child.
    pub fn from_edges<I, S>(edges: I) -> Result<Self, TaxonomyError>
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, ConceptId> = HashMap::new();
        let mut parent: Vec<Option<ConceptId>> = Vec::new();
        let mut intern = |name: &str, line: usize| -> Result<ConceptId, TaxonomyError> {
            if !valid_identifier(name) {
                return Err(TaxonomyError::Parse {
                    line,
                    message: format!("invalid concept identifier `{name}`"),
                });
            }
            if let Some(&id) = index.get(name) {
                return Ok(id);
            }
            let id = ConceptId(names.len() as u32);
            names.push(name.to_string());
            index.insert(name.to_string(), id);
            parent.push(None);
            Ok(id)
        };

        let mut root = None;
        let mut edge_count = 0usize;
        let mut pending: Vec<(ConceptId, ConceptId, usize)> = Vec::new();
        for (i, (p, c)) in edges.into_iter().enumerate() {
            let line = i + 1;
            let p = intern(p.as_ref(), line)?;
            let c = intern(c.as_ref(), line)?;
            if root.is_none() {
                root = Some(p);
            }
            pending.push((p, c, line));
            edge_count += 1;
        }
        let root = match root {
            Some(r) if edge_count > 0 => r,
            _ => {
                return Err(TaxonomyError::Parse {
                    line: 0,
                    message: "taxonomy has no edges".into(),
                })
            }
        };
        for (p, c, line) in pending {
            if c == root {
                return Err(TaxonomyError::Parse {
                    line,
                    message: format!("root `{}` appears as a child", names[c.index()]),
                });
            }
            if p == c {
                return Err(TaxonomyError::Parse {
                    line,
                    message: format!("self loop on `{}`", names[c.index()]),
                });
            }
            if parent[c.index()].is_some() {
                return Err(TaxonomyError::Parse {
                    line,
                    message: format!("concept `{}` has more than one parent", names[c.index()]),
                });
            }
            parent[c.index()] = Some(p);
        }

        // every non-root concept must have a parent and reach the root
        let n = names.len();
        let mut depth = vec![u32::MAX; n];
        depth[root.index()] = 0;
        for start in 0..n {
            let mut chain = Vec::new();
            let mut cur = start;
            while depth[cur] == u32::MAX {
                if chain.len() > n {
                    return Err(TaxonomyError::Parse {
                        line: 0,
                        message: format!("cycle through concept `{}`", names[start]),
                    });
                }
                chain.push(cur);
                match parent[cur] {
                    Some(p) => cur = p.index(),
                    None => {
                        return Err(TaxonomyError::Parse {
                            line: 0,
                            message: format!(
                                "concept `{}` does not descend from root `{}`",
                                names[cur],
                                names[root.index()]
                            ),
                        })
                    }
                }
            }
            let mut d = depth[cur];
            for &c in chain.iter().rev() {
                d += 1;
                depth[c] = d;
            }
        }

        Ok(Self {
            names,
            index,
            parent,
            depth,
            root,
        })
    }

    /// Parses the `parent<TAB>child` edge format. Empty lines are skipped.
    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.is_empty() {
                continue;
            }
            let mut parts = raw.split('\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(p), Some(c), None) => edges.push((p.to_string(), c.to_string())),
                _ => {
                    return Err(TaxonomyError::Parse {
                        line: i + 1,
                        message: "expected `parent<TAB>child`".into(),
                    })
                }
            }
        }
        Self::from_edges(edges)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn root(&self) -> &str {
        &self.names[self.root.index()]
    }

    pub fn contains(&self, concept: &str) -> bool {
        self.index.contains_key(concept)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn id(&self, concept: &str) -> Result<ConceptId, TaxonomyError> {
        self.index
            .get(concept)
            .copied()
            .ok_or_else(|| TaxonomyError::InvalidConcept(concept.to_string()))
    }

    pub fn name(&self, id: ConceptId) -> &str {
        &self.names[id.index()]
    }

    pub fn parent_of(&self, concept: &str) -> Result<Option<&str>, TaxonomyError> {
        let id = self.id(concept)?;
        Ok(self.parent[id.index()].map(|p| self.name(p)))
    }

    /// Number of arcs between `concept` and the root.
    pub fn depth(&self, concept: &str) -> Result<u32, TaxonomyError> {
        Ok(self.depth[self.id(concept)?.index()])
    }

    /// Deepest common ancestor; a concept is its own ancestor.
    pub fn lca(&self, c1: &str, c2: &str) -> Result<&str, TaxonomyError> {
        let a = self.id(c1)?;
        let b = self.id(c2)?;
        Ok(self.name(self.lca_id(a, b)))
    }

    fn lca_id(&self, mut a: ConceptId, mut b: ConceptId) -> ConceptId {
        while self.depth[a.index()] > self.depth[b.index()] {
            a = self.parent[a.index()].expect("non-root has parent");
        }
        while self.depth[b.index()] > self.depth[a.index()] {
            b = self.parent[b.index()].expect("non-root has parent");
        }
        while a != b {
            a = self.parent[a.index()].expect("non-root has parent");
            b = self.parent[b.index()].expect("non-root has parent");
        }
        a
    }

    fn con_sim_id(&self, a: ConceptId, b: ConceptId) -> f64 {
        if a == b {
            return 1.0;
        }
        let c = self.lca_id(a, b);
        let num = 2.0 * f64::from(self.depth[c.index()]);
        let den = f64::from(self.depth[a.index()] + self.depth[b.index()]);
        num / den
    }

    /// Wu–Palmer similarity of two concepts. Identical concepts score 1.
    pub fn con_sim(&self, c1: &str, c2: &str) -> Result<f64, TaxonomyError> {
        let a = self.id(c1)?;
        let b = self.id(c2)?;
        Ok(self.con_sim_id(a, b))
    }

    /// Symmetric best-match average of concept similarities between two sets.
    pub fn set_sim(&self, a: &ConceptSet, b: &ConceptSet) -> Result<f64, TaxonomyError> {
        if a.is_empty() || b.is_empty() {
            return Err(TaxonomyError::InvalidArgument(
                "concept sets must be non-empty".into(),
            ));
        }
        let a_ids = a
            .iter()
            .map(|c| self.id(c))
            .collect::<Result<Vec<_>, _>>()?;
        let b_ids = b
            .iter()
            .map(|c| self.id(c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.set_sim_ids(&a_ids, &b_ids))
    }

    fn set_sim_ids(&self, a: &[ConceptId], b: &[ConceptId]) -> f64 {
        let best = |from: &[ConceptId], to: &[ConceptId]| -> f64 {
            let total: f64 = from
                .iter()
                .map(|&x| {
                    to.iter()
                        .map(|&y| self.con_sim_id(x, y))
                        .fold(0.0_f64, f64::max)
                })
                .sum();
            total / from.len() as f64
        };
        0.5 * (best(a, b) + best(b, a))
    }
}

/// Non-empty set of concept identifiers, ordered lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConceptSet {
    members: BTreeSet<String>,
}

impl ConceptSet {
    /// Builds a set whose members are all present in `tree`.
    pub fn new<I, S>(tree: &ConceptTree, members: I) -> Result<Self, TaxonomyError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let members: BTreeSet<String> = members.into_iter().map(Into::into).collect();
        if members.is_empty() {
            return Err(TaxonomyError::InvalidArgument(
                "concept set must be non-empty".into(),
            ));
        }
        for m in &members {
            tree.id(m)?;
        }
        Ok(Self { members })
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.members.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, concept: &str) -> bool {
        self.members.contains(concept)
    }

    fn insert(&mut self, concept: &str) -> bool {
        self.members.insert(concept.to_string())
    }
}

impl fmt::Display for ConceptSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let joined: Vec<&str> = self.iter().collect();
        write!(f, "{}", joined.join(","))
    }
}

/// A user's context profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub node: u32,
    pub interests: ConceptSet,
    pub history: Vec<(u64, String)>,
    pub occupation: String,
}

impl Profile {
    pub fn new(node: u32, interests: ConceptSet) -> Self {
        Self {
            node,
            interests,
            history: Vec::new(),
            occupation: String::new(),
        }
    }

    /// Records an observed interaction and folds the concept into the
    /// declared interests. Reclassification is left to the caller.
    pub fn refine(
        &mut self,
        tree: &ConceptTree,
        observed: &str,
        t: u64,
    ) -> Result<(), TaxonomyError> {
        tree.id(observed)?;
        if let Some(&(last, _)) = self.history.last() {
            if t < last {
                return Err(TaxonomyError::InvalidTime { t, last });
            }
        }
        self.history.push((t, observed.to_string()));
        self.interests.insert(observed);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topic {
    pub id: String,
    pub concepts: ConceptSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    pub concepts: ConceptSet,
    pub topics: Vec<Topic>,
}

/// Predefined Subjects of Interest and their Topics of Interest.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubjectCatalog {
    subjects: Vec<Subject>,
}

impl SubjectCatalog {
    pub fn new(tree: &ConceptTree, subjects: Vec<Subject>) -> Result<Self, TaxonomyError> {
        let mut seen_subjects = BTreeSet::new();
        let mut seen_topics = BTreeSet::new();
        for s in &subjects {
            if !valid_identifier(&s.id) {
                return Err(TaxonomyError::InvalidArgument(format!(
                    "invalid subject id `{}`",
                    s.id
                )));
            }
            if !seen_subjects.insert(s.id.as_str()) {
                return Err(TaxonomyError::InvalidArgument(format!(
                    "duplicate subject id `{}`",
                    s.id
                )));
            }
            for c in s.concepts.iter() {
                tree.id(c)?;
            }
            for t in &s.topics {
                if !valid_identifier(&t.id) {
                    return Err(TaxonomyError::InvalidArgument(format!(
                        "invalid topic id `{}`",
                        t.id
                    )));
                }
                if !seen_topics.insert(t.id.as_str()) {
                    return Err(TaxonomyError::InvalidArgument(format!(
                        "duplicate topic id `{}`",
                        t.id
                    )));
                }
                for c in t.concepts.iter() {
                    tree.id(c)?;
                }
            }
        }
        Ok(Self { subjects })
    }

    /// Parses `subject <id>: c1,c2,...` and `topic <subject>/<id>: c1,...`
    /// records, one per line. Topics must follow their subject's record.
    pub fn parse(tree: &ConceptTree, text: &str) -> Result<Self, TaxonomyError> {
        let mut subjects: Vec<Subject> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let perr = |message: String| TaxonomyError::Parse { line, message };
            let (head, body) = raw
                .split_once(':')
                .ok_or_else(|| perr("missing `:`".into()))?;
            let concepts: Vec<&str> = body.split(',').map(str::trim).collect();
            if concepts.iter().any(|c| c.is_empty()) {
                return Err(perr("empty concept in list".into()));
            }
            let set = ConceptSet::new(tree, concepts.iter().copied()).map_err(|e| match e {
                TaxonomyError::InvalidConcept(c) => perr(format!("unknown concept `{c}`")),
                other => perr(other.to_string()),
            })?;
            let mut words = head.split(' ');
            match (words.next(), words.next(), words.next()) {
                (Some("subject"), Some(id), None) => subjects.push(Subject {
                    id: id.to_string(),
                    concepts: set,
                    topics: Vec::new(),
                }),
                (Some("topic"), Some(path), None) => {
                    let (sid, tid) = path
                        .split_once('/')
                        .ok_or_else(|| perr("topic path must be `<subject>/<topic>`".into()))?;
                    let subject = subjects
                        .iter_mut()
                        .find(|s| s.id == sid)
                        .ok_or_else(|| perr(format!("topic for undeclared subject `{sid}`")))?;
                    subject.topics.push(Topic {
                        id: tid.to_string(),
                        concepts: set,
                    });
                }
                _ => return Err(perr(format!("unrecognised record `{head}`"))),
            }
        }
        Self::new(tree, subjects)
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn subject(&self, id: &str) -> Option<&Subject> {
        self.subjects.iter().find(|s| s.id == id)
    }

    pub fn subject_index(&self, id: &str) -> Option<usize> {
        self.subjects.iter().position(|s| s.id == id)
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    /// All topics in catalog order, paired with the index of their subject.
    pub fn topics(&self) -> impl Iterator<Item = (usize, &Topic)> {
        self.subjects
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.topics.iter().map(move |t| (i, t)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedTopic {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub subject: String,
    /// Expertise weight in `[0, 1]`.
    pub expertise: f64,
    /// Topics of the winning subject, best first. Never empty when the
    /// subject declares at least one topic.
    pub topics: Vec<RankedTopic>,
}

impl Classification {
    pub fn top_topic(&self) -> Option<&RankedTopic> {
        self.topics.first()
    }
}

/// Orders by score descending, then id ascending.
fn rank(a: (&str, f64), b: (&str, f64)) -> std::cmp::Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then_with(|| a.0.cmp(b.0))
}

/// Picks the catalog subject most similar to the profile's interests, ranks
/// that subject's topics and derives the expertise weight.
pub fn classify(
    tree: &ConceptTree,
    catalog: &SubjectCatalog,
    profile: &Profile,
) -> Result<Classification, TaxonomyError> {
    if catalog.is_empty() {
        return Err(TaxonomyError::InvalidArgument(
            "empty subject catalog".into(),
        ));
    }
    let mut best: Option<(&Subject, f64)> = None;
    for subject in catalog.subjects() {
        let score = tree.set_sim(&profile.interests, &subject.concepts)?;
        best = match best {
            Some((b, bs)) if rank((&b.id, bs), (&subject.id, score)).is_le() => Some((b, bs)),
            _ => Some((subject, score)),
        };
    }
    let (subject, score) = best.expect("catalog is non-empty");

    let mut topics = subject
        .topics
        .iter()
        .map(|t| {
            tree.set_sim(&profile.interests, &t.concepts)
                .map(|score| RankedTopic {
                    id: t.id.clone(),
                    score,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    topics.sort_by(|a, b| rank((&a.id, a.score), (&b.id, b.score)));
    if topics.iter().any(|t| t.score > 0.0) {
        topics.retain(|t| t.score > 0.0);
    } else if !topics.is_empty() {
        let first = topics
            .iter()
            .min_by(|a, b| a.id.cmp(&b.id))
            .cloned()
            .expect("non-empty");
        topics = vec![first];
    }

    Ok(Classification {
        subject: subject.id.clone(),
        expertise: score.clamp(0.0, 1.0),
        topics,
    })
}
