//! Seeded placement and synthetic profiles.

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::{ConfigError, SimConfig, SimNode};
use crate::protocol::{Location, NodeId, NodeState, SubjectId, TopicId};
use crate::taxonomy::{classify, ConceptSet, ConceptTree, Profile, Subject, SubjectCatalog};

const PROFILE_ATTEMPTS: usize = 12;

pub(super) fn populate(
    config: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<SimNode>, ConfigError> {
    let catalog = &config.catalog;
    let tree = &config.taxonomy;

    let placed = config.placements.len();
    let free = config.population as usize - placed;
    let mut assigned: Vec<usize> = Vec::with_capacity(free);
    for (name, &n) in &config.subject_counts {
        let idx = catalog.subject_index(name).expect("validated");
        assigned.extend(std::iter::repeat_n(idx, n as usize));
    }
    let fill = free - assigned.len();
    if fill > 0 {
        let weights: Vec<f64> = if config.subject_weights.is_empty() {
            let uncounted = |s: &Subject| !config.subject_counts.contains_key(&s.id);
            let any_uncounted = catalog.subjects().iter().any(uncounted);
            catalog
                .subjects()
                .iter()
                .map(|s| {
                    if !any_uncounted || uncounted(s) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        } else {
            catalog
                .subjects()
                .iter()
                .map(|s| config.subject_weights.get(&s.id).copied().unwrap_or(0.0))
                .collect()
        };
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| ConfigError::invalid("subjects.weights", e.to_string()))?;
        assigned.extend((0..fill).map(|_| dist.sample(rng)));
    }
    assigned.shuffle(rng);

    let mut nodes = Vec::with_capacity(config.population as usize);
    let placements = config.placements.iter().map(|p| {
        (
            Location::new(p.x, p.y),
            catalog.subject_index(&p.subject).expect("validated"),
        )
    });
    let mut specs: Vec<(Location, usize)> = placements.collect();
    for subject in assigned {
        let loc = Location::new(
            rng.gen_range(0.0..=config.hall_width),
            rng.gen_range(0.0..=config.hall_height),
        );
        specs.push((loc, subject));
    }

    for (i, (location, subject)) in specs.into_iter().enumerate() {
        let id = i as NodeId;
        let profile = synthesize_profile(id, subject, tree, catalog, rng);
        let classification =
            classify(tree, catalog, &profile).expect("profile concepts come from the tree");
        let subject_id = catalog
            .subject_index(&classification.subject)
            .expect("classifier returns catalog subjects");
        let subject_topics = &catalog.subjects()[subject_id].topics;
        let first_topic = topic_offset(catalog, subject_id);
        let topics = classification
            .topics
            .iter()
            .map(|rt| {
                let local = subject_topics
                    .iter()
                    .position(|t| t.id == rt.id)
                    .expect("ranked topics belong to the subject");
                (TopicId((first_topic + local) as u16), rt.score)
            })
            .collect();
        let state = NodeState::new(
            id,
            location,
            SubjectId(subject_id as u16),
            classification.expertise,
            topics,
        );
        nodes.push(SimNode {
            state,
            profile,
            classification,
        });
    }
    Ok(nodes)
}

fn topic_offset(catalog: &SubjectCatalog, subject: usize) -> usize {
    catalog.subjects()[..subject]
        .iter()
        .map(|s| s.topics.len())
        .sum()
}

/// Builds a profile whose interests sit under `subject`: one to three of
/// its topics, a random part of each topic's concepts, sometimes the
/// subject's own concepts and sometimes an unrelated concept. Retries until
/// the classifier agrees with the intended subject.
fn synthesize_profile(
    node: NodeId,
    subject: usize,
    tree: &ConceptTree,
    catalog: &SubjectCatalog,
    rng: &mut ChaCha8Rng,
) -> Profile {
    let s = &catalog.subjects()[subject];
    let all: Vec<&str> = tree.concepts().collect();
    for _ in 0..PROFILE_ATTEMPTS {
        let mut interests: Vec<&str> = Vec::new();
        if s.topics.is_empty() {
            interests.extend(s.concepts.iter());
        } else {
            let k = rng.gen_range(1..=s.topics.len().min(3));
            for t in s.topics.choose_multiple(rng, k) {
                let concepts: Vec<&str> = t.concepts.iter().collect();
                let take = rng.gen_range(1..=concepts.len());
                interests.extend(concepts.choose_multiple(rng, take).copied());
            }
        }
        if rng.gen_bool(0.3) {
            interests.extend(s.concepts.iter());
        }
        if rng.gen_bool(0.25) {
            interests.push(all.choose(rng).expect("non-empty tree"));
        }
        let profile = Profile {
            node,
            interests: ConceptSet::new(tree, interests).expect("tree concepts"),
            history: Vec::new(),
            occupation: "attendee".into(),
        };
        let c = classify(tree, catalog, &profile).expect("valid profile");
        if c.subject == s.id {
            return profile;
        }
    }
    let mut interests: Vec<&str> = s.concepts.iter().collect();
    if let Some(t) = s.topics.first() {
        interests.extend(t.concepts.iter());
    }
    Profile {
        node,
        interests: ConceptSet::new(tree, interests).expect("tree concepts"),
        history: Vec::new(),
        occupation: "attendee".into(),
    }
}
