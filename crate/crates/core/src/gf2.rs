//! Binary symplectic vectors and an incremental echelon basis.

use crate::pauli::PauliString;

/// Dense bit vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitVec {
    words: Vec<u64>,
    len: usize,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        Self { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        let m = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= m;
        } else {
            self.words[i / 64] &= !m;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn first_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.get(i))
    }
}

/// Symplectic encoding of a Pauli string on `n` qubits: bits `[0, n)` are X, `[n, 2n)` are Z.
pub fn symplectic(p: &PauliString, n: usize) -> BitVec {
    let mut v = BitVec::zeros(2 * n);
    for &(q, l) in p.terms() {
        if l.has_x() {
            v.set(q, true);
        }
        if l.has_z() {
            v.set(n + q, true);
        }
    }
    v
}

/// Echelon basis that remembers which inserted generators make up each row.
#[derive(Clone, Debug)]
pub struct EchelonBasis {
    rows: Vec<(usize, BitVec, BitVec)>,
    cols: usize,
    max_gens: usize,
    inserted: usize,
}

impl EchelonBasis {
    pub fn new(cols: usize, max_gens: usize) -> Self {
        Self { rows: Vec::new(), cols, max_gens, inserted: 0 }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Insert the next generator. Returns `false` if it was dependent on earlier ones.
    pub fn insert(&mut self, v: &BitVec) -> bool {
        assert!(self.inserted < self.max_gens, "generator capacity exceeded");
        let mut combo = BitVec::zeros(self.max_gens);
        combo.set(self.inserted, true);
        self.inserted += 1;
        let (res, combo) = self.reduce_with(v.clone(), combo);
        match res.first_one() {
            Some(p) => {
                self.rows.push((p, res, combo));
                true
            }
            None => false,
        }
    }

    fn reduce_with(&self, mut v: BitVec, mut combo: BitVec) -> (BitVec, BitVec) {
        debug_assert_eq!(v.len(), self.cols);
        for (p, row, c) in &self.rows {
            if v.get(*p) {
                v.xor_assign(row);
                combo.xor_assign(c);
            }
        }
        (v, combo)
    }

    /// Express `v` in terms of inserted generators, if it lies in their span.
    pub fn decompose(&self, v: &BitVec) -> Option<Vec<usize>> {
        let (res, combo) = self.reduce_with(v.clone(), BitVec::zeros(self.max_gens));
        res.is_zero().then(|| combo.ones().collect())
    }

    pub fn contains(&self, v: &BitVec) -> bool {
        self.reduce_with(v.clone(), BitVec::zeros(self.max_gens)).0.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn from_bits(bits: &[bool]) -> BitVec {
        let mut v = BitVec::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    proptest! {
        #[test]
        fn decomposition_reproduces_vector(
            gens in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 10), 1..8),
            pick in proptest::collection::vec(any::<bool>(), 8),
        ) {
            let mut b = EchelonBasis::new(10, gens.len());
            for g in &gens {
                b.insert(&from_bits(g));
            }
            let mut target = BitVec::zeros(10);
            for (g, &on) in gens.iter().zip(&pick) {
                if on {
                    target.xor_assign(&from_bits(g));
                }
            }
            let combo = b.decompose(&target).expect("in span");
            let mut rebuilt = BitVec::zeros(10);
            for i in combo {
                rebuilt.xor_assign(&from_bits(&gens[i]));
            }
            prop_assert_eq!(rebuilt, target);
        }
    }

    #[test]
    fn dependent_generator_detected() {
        let mut b = EchelonBasis::new(4, 3);
        assert!(b.insert(&from_bits(&[true, true, false, false])));
        assert!(b.insert(&from_bits(&[false, true, true, false])));
        assert!(!b.insert(&from_bits(&[true, false, true, false])));
        assert_eq!(b.rank(), 2);
        assert!(!b.contains(&from_bits(&[false, false, false, true])));
    }
}
