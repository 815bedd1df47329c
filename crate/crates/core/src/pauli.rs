//! Single-qubit Pauli letters and sparse Pauli strings.

use std::fmt;
use std::ops::Mul;

/// A single-qubit Pauli, packed as `x | z << 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[repr(u8)]
pub enum Pauli {
    #[default]
    I = 0,
    X = 1,
    Z = 2,
    Y = 3,
}

/// Product up to phase.
impl Mul for Pauli {
    type Output = Pauli;

    // Symplectic bits add modulo two.
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, other: Pauli) -> Pauli {
        Pauli::from_bits(self.bits() ^ other.bits())
    }
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    #[inline]
    pub fn from_bits(bits: u8) -> Self {
        match bits & 3 {
            0 => Pauli::I,
            1 => Pauli::X,
            2 => Pauli::Z,
            _ => Pauli::Y,
        }
    }

    #[inline]
    pub fn bits(self) -> u8 {
        self as u8
    }

    #[inline]
    pub fn has_x(self) -> bool {
        self as u8 & 1 != 0
    }

    #[inline]
    pub fn has_z(self) -> bool {
        self as u8 & 2 != 0
    }

    #[inline]
    pub fn anticommutes(self, other: Pauli) -> bool {
        let (a, b) = (self.bits(), other.bits());
        let s = (a & 1) & (b >> 1) ^ (a >> 1) & (b & 1);
        s & 1 == 1
    }

    pub fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Sparse Pauli string: sorted `(qubit, letter)` pairs with no identities.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct PauliString {
    terms: Vec<(usize, Pauli)>,
}

impl PauliString {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn from_terms<I: IntoIterator<Item = (usize, Pauli)>>(terms: I) -> Self {
        let mut s = Self::identity();
        for (q, p) in terms {
            s.mul_assign_single(q, p);
        }
        s
    }

    pub fn uniform<I: IntoIterator<Item = usize>>(qubits: I, p: Pauli) -> Self {
        Self::from_terms(qubits.into_iter().map(|q| (q, p)))
    }

    pub fn terms(&self) -> &[(usize, Pauli)] {
        &self.terms
    }

    pub fn weight(&self) -> usize {
        self.terms.len()
    }

    pub fn is_identity(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, q: usize) -> Pauli {
        match self.terms.binary_search_by_key(&q, |t| t.0) {
            Ok(i) => self.terms[i].1,
            Err(_) => Pauli::I,
        }
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.iter().map(|t| t.0)
    }

    pub fn mul_assign_single(&mut self, q: usize, p: Pauli) {
        if p == Pauli::I {
            return;
        }
        match self.terms.binary_search_by_key(&q, |t| t.0) {
            Ok(i) => {
                let r = self.terms[i].1 * p;
                if r == Pauli::I {
                    self.terms.remove(i);
                } else {
                    self.terms[i].1 = r;
                }
            }
            Err(i) => self.terms.insert(i, (q, p)),
        }
    }

    pub fn mul(&self, other: &PauliString) -> PauliString {
        let mut out = self.clone();
        for &(q, p) in &other.terms {
            out.mul_assign_single(q, p);
        }
        out
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let (mut i, mut j, mut odd) = (0, 0, false);
        while i < self.terms.len() && j < other.terms.len() {
            let (qa, pa) = self.terms[i];
            let (qb, pb) = other.terms[j];
            if qa < qb {
                i += 1;
            } else if qb < qa {
                j += 1;
            } else {
                odd ^= pa.anticommutes(pb);
                i += 1;
                j += 1;
            }
        }
        !odd
    }

    /// Apply a relabelling of qubit indices.
    pub fn remap(&self, f: impl Fn(usize) -> usize) -> PauliString {
        PauliString::from_terms(self.terms.iter().map(|&(q, p)| (f(q), p)))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "I");
        }
        for (k, (q, p)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{p}{q}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_string(n: usize) -> impl Strategy<Value = PauliString> {
        proptest::collection::vec(0u8..4, n).prop_map(|v| {
            PauliString::from_terms(v.into_iter().enumerate().map(|(q, b)| (q, Pauli::from_bits(b))))
        })
    }

    #[test]
    fn letter_table() {
        assert!(Pauli::X.anticommutes(Pauli::Z));
        assert!(Pauli::X.anticommutes(Pauli::Y));
        assert!(!Pauli::Y.anticommutes(Pauli::Y));
        assert!(!Pauli::I.anticommutes(Pauli::Z));
        assert_eq!(Pauli::X * Pauli::Z, Pauli::Y);
    }

    #[test]
    fn display_round_trip_letters() {
        let s = PauliString::from_terms([(3, Pauli::Z), (0, Pauli::X)]);
        assert_eq!(s.to_string(), "X0 Z3");
    }

    proptest! {
        #[test]
        fn product_is_involutive(a in arb_string(6), b in arb_string(6)) {
            prop_assert_eq!(a.mul(&b).mul(&b), a);
        }

        #[test]
        fn commutation_is_symmetric(a in arb_string(6), b in arb_string(6)) {
            prop_assert_eq!(a.commutes_with(&b), b.commutes_with(&a));
        }

        #[test]
        fn commutation_counts_letterwise(a in arb_string(5), b in arb_string(5)) {
            let odd = (0..5).filter(|&q| a.get(q).anticommutes(b.get(q))).count() % 2 == 1;
            prop_assert_eq!(a.commutes_with(&b), !odd);
        }
    }
}
