use std::collections::BTreeSet;

use crate::corpus::{Corpus, Dim, Document};

use super::DpmmError;

/// Sufficient statistics of one table.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// m_z, passengers seated.
    pub(crate) members: usize,
    /// n_z, words seated.
    pub(crate) words: usize,
    /// n_z^w per dimension, dense over the vocabulary.
    pub(crate) word_counts: [Vec<u32>; 3],
}

impl Cluster {
    fn empty(vocab_sizes: [usize; 3]) -> Self {
        Cluster {
            members: 0,
            words: 0,
            word_counts: vocab_sizes.map(|v| vec![0; v]),
        }
    }

    pub fn members(&self) -> usize {
        self.members
    }

    pub fn words(&self) -> usize {
        self.words
    }

    pub fn word_count(&self, dim: Dim, word: u32) -> u32 {
        self.word_counts[dim.index()][word as usize]
    }

    pub fn word_counts(&self, dim: Dim) -> &[u32] {
        &self.word_counts[dim.index()]
    }
}

/// Where a passenger is (re)seated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TableChoice {
    Existing(usize),
    New,
}

/// Collapsed sampler state: the assignment vector and per-table counts.
///
/// Tables live in slots addressed by a stable id. Emptied tables are
/// deleted immediately and their id becomes reusable; a new table takes
/// the smallest free id.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    slots: Vec<Option<Cluster>>,
    live: BTreeSet<usize>,
    free: BTreeSet<usize>,
    assignments: Vec<Option<usize>>,
    vocab_sizes: [usize; 3],
}

impl ClusterState {
    /// A state with every passenger unseated and no tables.
    pub fn unseated(corpus: &Corpus) -> Self {
        ClusterState {
            slots: Vec::new(),
            live: BTreeSet::new(),
            free: BTreeSet::new(),
            assignments: vec![None; corpus.len()],
            vocab_sizes: corpus.vocab_sizes(),
        }
    }

    /// Builds a state from explicit table ids (any `usize`, compacted to live ids as given).
    pub fn from_assignments(corpus: &Corpus, labels: &[usize]) -> Result<Self, DpmmError> {
        if labels.len() != corpus.len() {
            return Err(DpmmError::LengthMismatch {
                expected: corpus.len(),
                found: labels.len(),
            });
        }
        let mut state = ClusterState::unseated(corpus);
        let max = labels.iter().copied().max().unwrap_or(0);
        state.slots = vec![None; max + 1];
        state.free = (0..=max).collect();
        for (u, &z) in labels.iter().enumerate() {
            if state.slots[z].is_none() {
                state.slots[z] = Some(Cluster::empty(state.vocab_sizes));
                state.live.insert(z);
                state.free.remove(&z);
            }
            state.merge(corpus, u, TableChoice::Existing(z))?;
        }
        Ok(state)
    }

    /// K, the number of non-empty tables.
    pub fn n_clusters(&self) -> usize {
        self.live.len()
    }

    /// M.
    pub fn n_docs(&self) -> usize {
        self.assignments.len()
    }

    pub fn vocab_sizes(&self) -> [usize; 3] {
        self.vocab_sizes
    }

    /// Live table ids in ascending order.
    pub fn cluster_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.live.iter().copied()
    }

    pub fn cluster(&self, id: usize) -> Option<&Cluster> {
        self.slots.get(id).and_then(Option::as_ref)
    }

    pub fn assignment(&self, u: usize) -> Option<usize> {
        self.assignments[u]
    }

    pub fn assignments(&self) -> &[Option<usize>] {
        &self.assignments
    }

    /// Assignments with table ids renumbered 0..K in ascending id order.
    ///
    /// Panics if any passenger is unseated.
    pub fn compact_assignments(&self) -> Vec<usize> {
        let rank: std::collections::HashMap<usize, usize> =
            self.live.iter().enumerate().map(|(i, &z)| (z, i)).collect();
        self.assignments
            .iter()
            .map(|z| rank[&z.expect("every passenger is seated")])
            .collect()
    }

    /// Removes passenger `u`'s counts from its table, deleting the table if it
    /// empties. Returns the id of the deleted table, if any.
    pub fn kick_out(&mut self, corpus: &Corpus, u: usize) -> Result<Option<usize>, DpmmError> {
        let z = self.assignments[u].ok_or(DpmmError::NotSeated(u))?;
        let doc = &corpus.documents()[u];
        let cluster = self.slots[z].as_mut().ok_or(DpmmError::UnknownCluster(z))?;
        cluster.members -= 1;
        cluster.words -= doc.len();
        for dim in Dim::ALL {
            let counts = &mut cluster.word_counts[dim.index()];
            for &(w, c) in doc.counts(dim) {
                counts[w as usize] -= c;
            }
        }
        self.assignments[u] = None;
        if cluster.members == 0 {
            self.delete(z);
            return Ok(Some(z));
        }
        Ok(None)
    }

    /// Seats unseated passenger `u` at `choice`, opening a table if new.
    /// Returns the table id.
    pub fn merge(&mut self, corpus: &Corpus, u: usize, choice: TableChoice) -> Result<usize, DpmmError> {
        if self.assignments[u].is_some() {
            return Err(DpmmError::NotKickedOut(u));
        }
        let z = match choice {
            TableChoice::Existing(z) => {
                if !self.live.contains(&z) {
                    return Err(DpmmError::UnknownCluster(z));
                }
                z
            }
            TableChoice::New => self.open_table(),
        };
        let doc: &Document = &corpus.documents()[u];
        let cluster = self.slots[z].as_mut().expect("live table");
        cluster.members += 1;
        cluster.words += doc.len();
        for dim in Dim::ALL {
            let counts = &mut cluster.word_counts[dim.index()];
            for &(w, c) in doc.counts(dim) {
                counts[w as usize] += c;
            }
        }
        self.assignments[u] = Some(z);
        Ok(z)
    }

    fn open_table(&mut self) -> usize {
        let z = match self.free.pop_first() {
            Some(z) => z,
            None => {
                self.slots.push(None);
                self.slots.len() - 1
            }
        };
        self.slots[z] = Some(Cluster::empty(self.vocab_sizes));
        self.live.insert(z);
        z
    }

    fn delete(&mut self, z: usize) {
        self.slots[z] = None;
        self.live.remove(&z);
        self.free.insert(z);
    }

    /// Deletes table `z` and unseats all its members, returning them in
    /// ascending passenger order.
    pub fn disband(&mut self, z: usize) -> Result<Vec<usize>, DpmmError> {
        if !self.live.contains(&z) {
            return Err(DpmmError::UnknownCluster(z));
        }
        let members: Vec<usize> = (0..self.assignments.len())
            .filter(|&u| self.assignments[u] == Some(z))
            .collect();
        for &u in &members {
            self.assignments[u] = None;
        }
        self.delete(z);
        Ok(members)
    }

    /// Recounts every statistic from the assignments and compares. Every
    /// passenger must be seated.
    pub fn audit(&self, corpus: &Corpus) -> Result<(), DpmmError> {
        let fail = |msg: String| Err(DpmmError::Consistency(msg));
        let mut expected: std::collections::BTreeMap<usize, Cluster> = Default::default();
        for (u, z) in self.assignments.iter().enumerate() {
            let Some(z) = z else {
                return fail(format!("passenger {u} is not seated"));
            };
            let c = expected.entry(*z).or_insert_with(|| Cluster::empty(self.vocab_sizes));
            let doc = &corpus.documents()[u];
            c.members += 1;
            c.words += doc.len();
            for dim in Dim::ALL {
                for &(w, n) in doc.counts(dim) {
                    c.word_counts[dim.index()][w as usize] += n;
                }
            }
        }
        for (id, slot) in self.slots.iter().enumerate() {
            let is_live = self.live.contains(&id);
            match (slot, is_live) {
                (Some(_), false) | (None, true) => return fail(format!("table {id} liveness mismatch")),
                _ => {}
            }
            if is_live == self.free.contains(&id) {
                return fail(format!("table {id} is both live and free, or neither"));
            }
        }
        for &z in &self.live {
            let actual = self.slots[z].as_ref().expect("live");
            if actual.members == 0 {
                return fail(format!("table {z} is empty but live"));
            }
            for dim in Dim::ALL {
                let s: u64 = actual.word_counts[dim.index()].iter().map(|&c| c as u64).sum();
                if s != actual.words as u64 {
                    return fail(format!("table {z} {} counts sum to {s}, n_z = {}", dim.name(), actual.words));
                }
            }
            match expected.get(&z) {
                Some(e) if e == actual => {}
                _ => return fail(format!("table {z} statistics disagree with assignments")),
            }
        }
        if expected.keys().any(|z| !self.live.contains(z)) {
            return fail("a passenger is seated at a dead table".into());
        }
        Ok(())
    }
}
