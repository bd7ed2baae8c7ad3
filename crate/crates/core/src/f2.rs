//! Dense linear algebra over the two-element field.
//!
//! Used only for verification: Betti numbers by rank and span-membership
//! certificates. Vectors are packed 64 entries per word.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitVec {
    words: Vec<u64>,
    len: usize,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_indices(len: usize, ones: impl IntoIterator<Item = usize>) -> Self {
        let mut v = Self::zeros(len);
        for i in ones {
            v.flip(i);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Index of the highest set bit.
    pub fn leading(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .rev()
            .find(|(_, &w)| w != 0)
            .map(|(i, &w)| i * 64 + 63 - w.leading_zeros() as usize)
    }
}

/// Row echelon basis built incrementally, keyed by leading bit.
#[derive(Debug, Clone, Default)]
pub struct EchelonBasis {
    by_lead: std::collections::HashMap<usize, BitVec>,
}

impl EchelonBasis {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reduces `v` against the basis; returns the remainder.
    pub fn reduce(&self, mut v: BitVec) -> BitVec {
        while let Some(lead) = v.leading() {
            match self.by_lead.get(&lead) {
                Some(b) => v.xor_assign(b),
                None => break,
            }
        }
        v
    }

    /// Adds `v` to the span; returns whether the rank grew.
    pub fn insert(&mut self, v: BitVec) -> bool {
        let r = self.reduce(v);
        match r.leading() {
            Some(lead) => {
                self.by_lead.insert(lead, r);
                true
            }
            None => false,
        }
    }

    pub fn contains(&self, v: BitVec) -> bool {
        self.reduce(v).is_zero()
    }

    pub fn rank(&self) -> usize {
        self.by_lead.len()
    }
}

pub fn rank(vectors: impl IntoIterator<Item = BitVec>) -> usize {
    let mut basis = EchelonBasis::new();
    for v in vectors {
        basis.insert(v);
    }
    basis.rank()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_small_sets() {
        let v = |ones: &[usize]| BitVec::from_indices(70, ones.iter().copied());
        assert_eq!(rank(vec![v(&[0, 1]), v(&[1, 2]), v(&[0, 2])]), 2);
        assert_eq!(rank(vec![v(&[69]), v(&[0, 69]), v(&[0])]), 2);
        assert_eq!(rank(vec![v(&[]), v(&[])]), 0);
    }

    #[test]
    fn span_membership() {
        let mut b = EchelonBasis::new();
        b.insert(BitVec::from_indices(5, [0, 1]));
        b.insert(BitVec::from_indices(5, [1, 2]));
        assert!(b.contains(BitVec::from_indices(5, [0, 2])));
        assert!(!b.contains(BitVec::from_indices(5, [0, 3])));
    }
}
