//! Knowledge tree records and the pairs fed to contrastive knowledge
//! injection: concept-definition, relation, and image-mask-concept pairs.
//!
//! Files are JSONL, one record per line, so they can be streamed and sharded.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::MaskSet;
use crate::sampler::Split;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConceptSource {
    #[serde(rename = "umls")]
    Umls,
    #[serde(rename = "search_engine")]
    SearchEngine,
    #[serde(rename = "catalog")]
    Catalog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<String>,
    pub source: ConceptSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationTriplet {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    /// `(name; definition)`
    ConceptDefinition,
    /// `(head + relation; tail)`
    HeadRelTail,
    /// `(head; relation + tail)`
    HeadRelTailAlt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextPair {
    pub left: String,
    pub right: String,
    pub kind: PairKind,
}

/// An annotated structure in a scan linked to its concept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualConceptPair {
    pub scan_id: String,
    pub mask_ref: String,
    pub concept_id: String,
    pub voxels: usize,
}

fn concat(a: &str, b: &str) -> String {
    format!("{a} {b}")
}

/// Text pairs in input order: all concept-definition pairs first, then both
/// relation variants for each triplet. Triplets whose head or tail is not a
/// known concept are rejected.
pub fn build_text_pairs(concepts: &[Concept], triplets: &[RelationTriplet]) -> Result<Vec<TextPair>> {
    let names: BTreeMap<&str, &str> = concepts
        .iter()
        .map(|c| (c.id.as_str(), c.name.as_str()))
        .collect();
    let mut out = Vec::with_capacity(concepts.len() + 2 * triplets.len());
    for c in concepts {
        if c.name.trim().is_empty() {
            return Err(Error::InvalidInput(format!("concept {:?} has an empty name", c.id)));
        }
        if let Some(def) = c.definition.as_deref().filter(|d| !d.trim().is_empty()) {
            out.push(TextPair {
                left: c.name.clone(),
                right: def.to_string(),
                kind: PairKind::ConceptDefinition,
            });
        }
    }
    for t in triplets {
        if t.head == t.tail || t.relation.trim().is_empty() {
            return Err(Error::InvalidInput(format!("malformed triplet {t:?}")));
        }
        let lookup = |id: &str| {
            names
                .get(id)
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("triplet references unknown concept {id:?}")))
        };
        let head = lookup(&t.head)?;
        let tail = lookup(&t.tail)?;
        out.push(TextPair {
            left: concat(head, &t.relation),
            right: tail.to_string(),
            kind: PairKind::HeadRelTail,
        });
        out.push(TextPair {
            left: head.to_string(),
            right: concat(&t.relation, tail),
            kind: PairKind::HeadRelTailAlt,
        });
    }
    Ok(out)
}

/// One pair per nonempty mask of a training scan; test scans yield nothing.
pub fn extract_visual_pairs(scan_id: &str, split: Split, masks: &MaskSet) -> Vec<VisualConceptPair> {
    if split != Split::Train {
        return Vec::new();
    }
    masks
        .iter()
        .filter_map(|(term, mask)| {
            let voxels = mask.count();
            (voxels > 0).then(|| VisualConceptPair {
                scan_id: scan_id.to_string(),
                mask_ref: format!("{scan_id}/{term}"),
                concept_id: term.clone(),
                voxels,
            })
        })
        .collect()
}

/// Keeps at most `max_units` whitespace-separated units. Longer text is cut
/// to a contiguous window whose start is uniform over all valid starts.
pub fn truncate_text(s: &str, max_units: usize, seed: u64) -> String {
    assert!(max_units >= 1, "max_units must be at least 1");
    let units: Vec<&str> = s.split_whitespace().collect();
    if units.len() <= max_units {
        return s.to_string();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.random_range(0..=units.len() - max_units);
    units[start..start + max_units].join(" ")
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::json(format!("{}:{}", path.display(), n + 1), e))?,
        );
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| Error::json(path.display().to_string(), e))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Deterministic synthetic knowledge base: `n` anatomy-like concepts, about
/// two thirds of them defined, linked by simple relations.
pub fn synthetic_knowledge(n: usize, seed: u64) -> (Vec<Concept>, Vec<RelationTriplet>) {
    const PARTS: &[&str] = &[
        "hepatic", "renal", "splenic", "pulmonary", "cardiac", "gastric", "pancreatic", "vertebral",
        "cerebral", "pelvic",
    ];
    const KINDS: &[&str] = &["lobe", "segment", "vessel", "duct", "gland"];
    const RELATIONS: &[&str] = &["is part of", "is adjacent to", "is supplied by", "drains into"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let concepts: Vec<Concept> = (0..n)
        .map(|i| {
            let name = format!(
                "{} {} {}",
                PARTS[i % PARTS.len()],
                KINDS[(i / PARTS.len()) % KINDS.len()],
                i / (PARTS.len() * KINDS.len()) + 1
            );
            let definition = (i % 3 != 2).then(|| {
                format!(
                    "The {name} is a structure of the {} system observed in {} imaging.",
                    PARTS[rng.random_range(0..PARTS.len())],
                    ["CT", "MRI", "PET"][rng.random_range(0..3)]
                )
            });
            Concept {
                id: format!("C{i:04}"),
                name,
                definition,
                source: if i % 2 == 0 { ConceptSource::Umls } else { ConceptSource::SearchEngine },
            }
        })
        .collect();
    let mut triplets = Vec::new();
    for i in 0..n {
        let j = (i + 1 + rng.random_range(0..n.saturating_sub(1).max(1))) % n;
        if i != j {
            triplets.push(RelationTriplet {
                head: concepts[i].id.clone(),
                relation: RELATIONS[rng.random_range(0..RELATIONS.len())].to_string(),
                tail: concepts[j].id.clone(),
            });
        }
    }
    (concepts, triplets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::BinaryMask;

    fn concept(id: &str, name: &str, def: Option<&str>) -> Concept {
        Concept {
            id: id.into(),
            name: name.into(),
            definition: def.map(Into::into),
            source: ConceptSource::Umls,
        }
    }

    fn triplet(h: &str, r: &str, t: &str) -> RelationTriplet {
        RelationTriplet {
            head: h.into(),
            relation: r.into(),
            tail: t.into(),
        }
    }

    #[test]
    fn single_definition_gives_one_pair() {
        let pairs = build_text_pairs(&[concept("a", "liver", Some("largest gland"))], &[]).unwrap();
        assert_eq!(
            pairs,
            vec![TextPair {
                left: "liver".into(),
                right: "largest gland".into(),
                kind: PairKind::ConceptDefinition
            }]
        );
    }

    #[test]
    fn triplet_gives_both_concatenations() {
        let c = [concept("a", "caudate lobe", None), concept("b", "liver", None)];
        let pairs = build_text_pairs(&c, &[triplet("a", "is part of", "b")]).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!((pairs[0].left.as_str(), pairs[0].right.as_str()), ("caudate lobe is part of", "liver"));
        assert_eq!((pairs[1].left.as_str(), pairs[1].right.as_str()), ("caudate lobe", "is part of liver"));
    }

    #[test]
    fn pair_count_arithmetic() {
        let c = [
            concept("a", "liver", Some("d1")),
            concept("b", "spleen", Some("d2")),
            concept("c", "kidney", None),
        ];
        let t = [triplet("a", "near", "b"), triplet("c", "near", "b")];
        assert_eq!(build_text_pairs(&c, &t).unwrap().len(), 6);
    }

    #[test]
    fn visual_pairs_skip_empty_masks_and_test_scans() {
        let mut masks = MaskSet::new();
        for (i, name) in ["a", "b", "c"].iter().enumerate() {
            let mut m = BinaryMask::empty([3, 3, 3], [1.0; 3]);
            if i != 1 {
                m.data[[i, 0, 0]] = true;
            }
            masks.insert(name.to_string(), m);
        }
        assert_eq!(extract_visual_pairs("s1", Split::Train, &masks).len(), 2);
        masks.get_mut("b").unwrap().data[[0, 0, 0]] = true;
        assert_eq!(extract_visual_pairs("s1", Split::Train, &masks).len(), 3);
        assert!(extract_visual_pairs("s1", Split::Test, &masks).is_empty());
    }

    #[test]
    fn truncation_windows() {
        let short: String = (0..10).map(|i| format!("w{i} ")).collect();
        assert_eq!(truncate_text(&short, 256, 1), short);
        let long: Vec<String> = (0..300).map(|i| format!("w{i}")).collect();
        let text = long.join(" ");
        let out = truncate_text(&text, 256, 7);
        let units: Vec<&str> = out.split(' ').collect();
        assert_eq!(units.len(), 256);
        let start: usize = units[0][1..].parse().unwrap();
        assert!(start <= 44);
        assert_eq!(units, long[start..start + 256].iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(truncate_text(&text, 256, 7), out);
    }

    #[test]
    fn truncation_covers_every_start() {
        let text: Vec<String> = (0..300).map(|i| format!("w{i}")).collect();
        let text = text.join(" ");
        let mut seen = [false; 45];
        for seed in 0..5000 {
            let out = truncate_text(&text, 256, seed);
            let start: usize = out.split(' ').next().unwrap()[1..].parse().unwrap();
            seen[start] = true;
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn synthetic_fixture_counts() {
        let (c, t) = synthetic_knowledge(50, 0);
        assert_eq!(c.len(), 50);
        let defined = c.iter().filter(|x| x.definition.is_some()).count();
        let pairs = build_text_pairs(&c, &t).unwrap();
        assert_eq!(pairs.len(), defined + 2 * t.len());
        assert!(pairs.iter().all(|p| !p.left.is_empty() && !p.right.is_empty()));
    }
}
