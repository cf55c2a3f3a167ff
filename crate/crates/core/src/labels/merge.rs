use std::collections::{BTreeMap, BTreeSet, VecDeque};

use ndarray::Array3;

use super::{Catalog, ClassMap, MergeRule};
use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::volume::LabelVolume;

/// Binary masks keyed by terminology id.
pub type MaskSet = BTreeMap<String, BinaryMask>;

/// Expands a label volume into one binary mask per terminology. Codes that
/// share a terminology (declared synonyms) are unioned.
pub fn map_labels(l: &LabelVolume, m: &ClassMap, catalog: &Catalog) -> Result<MaskSet> {
    let codes = l.codes();
    if let Some(code) = codes.iter().find(|c| !m.entries.contains_key(c)) {
        return Err(Error::UnmappedCode(*code));
    }
    let mut term_of: BTreeMap<u16, &str> = BTreeMap::new();
    for code in &codes {
        let term = m.entries[code].as_str();
        if !catalog.contains(term) {
            return Err(Error::UnknownTerminology(term.to_string()));
        }
        term_of.insert(*code, term);
    }
    let spacing = l.spacing();
    let shape = l.data.raw_dim();
    let mut out = MaskSet::new();
    for term in term_of.values() {
        out.entry((*term).to_string()).or_insert_with(|| BinaryMask {
            data: Array3::from_elem(shape, false),
            spacing,
        });
    }
    for (idx, code) in l.data.indexed_iter() {
        if let Some(term) = term_of.get(code) {
            out.get_mut(*term).expect("inserted above").data[idx] = true;
        }
    }
    Ok(out)
}

/// Rule indices in dependency order: a rule runs after every rule that
/// produces one of its children.
pub fn merge_order(rules: &[MergeRule]) -> Result<Vec<usize>> {
    for r in rules {
        if r.children.contains(&r.parent) {
            return Err(Error::CycleDetected(r.parent.clone()));
        }
    }
    let mut producers: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in rules.iter().enumerate() {
        producers.entry(r.parent.as_str()).or_default().push(i);
    }
    // Edge p -> i when rule p produces a child of rule i.
    let mut indegree = vec![0usize; rules.len()];
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); rules.len()];
    for (i, r) in rules.iter().enumerate() {
        for child in &r.children {
            for &p in producers.get(child.as_str()).into_iter().flatten() {
                if succ[p].insert(i) {
                    indegree[i] += 1;
                }
            }
        }
    }
    let mut ready: VecDeque<usize> = (0..rules.len()).filter(|i| indegree[*i] == 0).collect();
    let mut order = Vec::with_capacity(rules.len());
    while let Some(i) = ready.pop_front() {
        order.push(i);
        for &j in &succ[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.push_back(j);
            }
        }
    }
    if order.len() != rules.len() {
        let stuck = (0..rules.len())
            .find(|i| indegree[*i] > 0)
            .expect("some rule is left over");
        return Err(Error::CycleDetected(rules[stuck].parent.clone()));
    }
    Ok(order)
}

/// Adds parent classes as unions of their children. A rule fires only when
/// all its children are present; an existing parent mask is unioned in and
/// children are kept.
pub fn apply_merges(mut masks: MaskSet, rules: &[MergeRule]) -> Result<MaskSet> {
    for i in merge_order(rules)? {
        let rule = &rules[i];
        if rule.children.is_empty() || !rule.children.iter().all(|c| masks.contains_key(c)) {
            continue;
        }
        let mut parent = masks
            .get(&rule.parent)
            .cloned()
            .unwrap_or_else(|| {
                let first = &masks[&rule.children[0]];
                BinaryMask::empty(first.shape(), first.spacing)
            });
        for child in &rule.children {
            parent.union_with(&masks[child])?;
        }
        masks.insert(rule.parent.clone(), parent);
    }
    Ok(masks)
}
