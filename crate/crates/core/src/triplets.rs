//! Enumeration of (query, relevant item, irrelevant item) index triples.
//! Each triple carries one dual multiplier in the training problem.

use std::ops::Range;

use crate::domain::RetrievalDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triplet {
    pub query: usize,
    pub relevant: usize,
    pub irrelevant: usize,
}

/// Triplets sharing one (query, relevant item) pair. Their multipliers live
/// on a common capped simplex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletGroup {
    pub query: usize,
    pub relevant: usize,
    pub range: Range<usize>,
}

/// Triplets in lexicographic `(query, relevant, irrelevant)` order, with the
/// contiguous ranges of each `(query, relevant)` pair.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TripletSet {
    triplets: Vec<Triplet>,
    groups: Vec<TripletGroup>,
}

impl TripletSet {
    /// Builds a set from triplets that are already in lexicographic order
    /// with no duplicates.
    pub(crate) fn from_sorted(triplets: Vec<Triplet>) -> Self {
        debug_assert!(triplets.windows(2).all(|w| w[0] < w[1]));
        let mut groups: Vec<TripletGroup> = Vec::new();
        for (pos, t) in triplets.iter().enumerate() {
            match groups.last_mut() {
                Some(g) if g.query == t.query && g.relevant == t.relevant => g.range.end = pos + 1,
                _ => groups.push(TripletGroup {
                    query: t.query,
                    relevant: t.relevant,
                    range: pos..pos + 1,
                }),
            }
        }
        TripletSet { triplets, groups }
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn groups(&self) -> &[TripletGroup] {
        &self.groups
    }

    pub fn get(&self, pos: usize) -> Triplet {
        self.triplets[pos]
    }

    /// Range of triplet positions for the pair `(query, relevant)`.
    pub fn group_range(&self, query: usize, relevant: usize) -> Option<Range<usize>> {
        self.groups
            .binary_search_by(|g| (g.query, g.relevant).cmp(&(query, relevant)))
            .ok()
            .map(|idx| self.groups[idx].range.clone())
    }

    pub fn position(&self, t: &Triplet) -> Option<usize> {
        self.triplets.binary_search(t).ok()
    }

    /// Distinct query indices, ascending.
    pub fn queries(&self) -> Vec<usize> {
        let mut qs: Vec<usize> = self.groups.iter().map(|g| g.query).collect();
        qs.dedup();
        qs
    }
}

/// Every triple with `y_ij = 1` and `y_ik = 0` over all queries.
pub fn enumerate_triplets(ds: &RetrievalDataset, cap_per_pair: Option<usize>) -> TripletSet {
    let all: Vec<usize> = (0..ds.n_queries()).collect();
    enumerate_triplets_for(ds, &all, cap_per_pair)
}

/// Triplets restricted to the given queries (duplicates ignored). With a cap,
/// only the first `cap` irrelevant items in index order are kept per pair.
///
/// Panics if a query index is out of range.
pub fn enumerate_triplets_for(
    ds: &RetrievalDataset,
    queries: &[usize],
    cap_per_pair: Option<usize>,
) -> TripletSet {
    let mut qs = queries.to_vec();
    qs.sort_unstable();
    qs.dedup();

    let mut triplets = Vec::new();
    for &i in &qs {
        let row = ds.relevance_row(i);
        let irrelevant: Vec<usize> = (0..row.len()).filter(|&k| !row[k]).collect();
        let take = cap_per_pair.map_or(irrelevant.len(), |c| c.min(irrelevant.len()));
        for j in (0..row.len()).filter(|&j| row[j]) {
            for &k in &irrelevant[..take] {
                triplets.push(Triplet {
                    query: i,
                    relevant: j,
                    irrelevant: k,
                });
            }
        }
    }
    TripletSet::from_sorted(triplets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dataset(relevance: Vec<Vec<i64>>) -> RetrievalDataset {
        let n = relevance.len();
        let m = relevance[0].len();
        RetrievalDataset::new(vec![vec![1.0]; n], vec![vec![1.0]; m], relevance).unwrap()
    }

    fn t(query: usize, relevant: usize, irrelevant: usize) -> Triplet {
        Triplet {
            query,
            relevant,
            irrelevant,
        }
    }

    #[test]
    fn single_valid_triple() {
        let set = enumerate_triplets(&dataset(vec![vec![1, 0]]), None);
        assert_eq!(set.triplets(), &[t(0, 0, 1)]);
    }

    #[test]
    fn no_irrelevant_items_gives_empty_set() {
        let set = enumerate_triplets(&dataset(vec![vec![1, 1]]), None);
        assert!(set.is_empty());
        assert!(set.groups().is_empty());
    }

    #[test]
    fn one_group_of_two() {
        let set = enumerate_triplets(&dataset(vec![vec![1, 0, 0]]), None);
        assert_eq!(set.triplets(), &[t(0, 0, 1), t(0, 0, 2)]);
        assert_eq!(set.groups().len(), 1);
        assert_eq!(set.group_range(0, 0), Some(0..2));
        assert_eq!(set.group_range(0, 1), None);
    }

    #[test]
    fn cap_keeps_first_in_index_order() {
        let ds = dataset(vec![vec![0, 1, 0, 0, 1]]);
        let set = enumerate_triplets(&ds, Some(2));
        assert_eq!(
            set.triplets(),
            &[t(0, 1, 0), t(0, 1, 2), t(0, 4, 0), t(0, 4, 2)]
        );
        assert_eq!(set.groups().len(), 2);
    }

    #[test]
    fn subset_is_sorted_and_deduplicated() {
        let ds = dataset(vec![vec![1, 0], vec![0, 1], vec![1, 0]]);
        let set = enumerate_triplets_for(&ds, &[2, 0, 2], None);
        assert_eq!(set.triplets(), &[t(0, 0, 1), t(2, 0, 1)]);
        assert_eq!(set.queries(), vec![0, 2]);
    }

    fn relevance_strategy() -> impl Strategy<Value = Vec<Vec<i64>>> {
        (1usize..5, 1usize..7).prop_flat_map(|(n, m)| {
            proptest::collection::vec(proptest::collection::vec(0i64..2, m), n)
        })
    }

    proptest! {
        #[test]
        fn count_matches_direct_formula(rel in relevance_strategy()) {
            let ds = dataset(rel.clone());
            let set = enumerate_triplets(&ds, None);
            let expected: usize = rel
                .iter()
                .map(|row| {
                    let r = row.iter().filter(|&&v| v == 1).count();
                    r * (row.len() - r)
                })
                .sum();
            prop_assert_eq!(set.len(), expected);
            for tr in set.triplets() {
                prop_assert_eq!(rel[tr.query][tr.relevant], 1);
                prop_assert_eq!(rel[tr.query][tr.irrelevant], 0);
            }
            prop_assert!(set.triplets().windows(2).all(|w| w[0] < w[1]));
            for g in set.groups() {
                for p in g.range.clone() {
                    prop_assert_eq!(set.get(p).query, g.query);
                    prop_assert_eq!(set.get(p).relevant, g.relevant);
                }
            }
            prop_assert_eq!(enumerate_triplets(&ds, None), set);
        }
    }
}
