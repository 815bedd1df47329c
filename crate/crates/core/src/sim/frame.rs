//! Dense Pauli frames and their propagation through circuit locations.

use rand::Rng;

use crate::code::CodeLayout;
use crate::noise::Fault;
use crate::pauli::{Pauli, PauliString};
use crate::protocol::Location;

use super::SimError;

/// One Pauli per qubit, stored as `x | z << 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PauliFrame {
    bits: Vec<u8>,
}

impl PauliFrame {
    pub fn new(n: usize) -> Self {
        Self { bits: vec![0; n] }
    }

    pub fn from_pauli_string(n: usize, p: &PauliString) -> Self {
        let mut f = Self::new(n);
        for &(q, l) in p.terms() {
            f.apply(q, l);
        }
        f
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, q: usize) -> Pauli {
        Pauli::from_bits(self.bits[q])
    }

    #[inline]
    pub fn apply(&mut self, q: usize, p: Pauli) {
        self.bits[q] ^= p.bits();
    }

    #[inline]
    pub fn reset(&mut self, q: usize) {
        self.bits[q] = 0;
    }

    pub fn clear(&mut self) {
        self.bits.iter_mut().for_each(|b| *b = 0);
    }

    pub fn is_identity(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    /// Conjugation by CNOT: X spreads control → target, Z spreads target → control.
    #[inline]
    pub fn cx(&mut self, c: usize, t: usize) {
        let xc = self.bits[c] & 1;
        let zt = self.bits[t] & 2;
        self.bits[t] ^= xc;
        self.bits[c] ^= zt;
    }

    /// Conjugation by CZ: an X on either side picks up a Z on the other.
    #[inline]
    pub fn cz(&mut self, a: usize, b: usize) {
        let xa = self.bits[a] & 1;
        let xb = self.bits[b] & 1;
        self.bits[a] ^= xb << 1;
        self.bits[b] ^= xa << 1;
    }

    /// Parity of X components over `qs`, i.e. anticommutation with `Z^{⊗|qs|}`.
    pub fn x_parity(&self, qs: &[usize]) -> bool {
        qs.iter().fold(0, |acc, &q| acc ^ (self.bits[q] & 1)) == 1
    }

    pub fn to_pauli_string(&self) -> PauliString {
        PauliString::from_terms(self.bits.iter().enumerate().filter(|(_, &b)| b != 0).map(|(q, &b)| (q, Pauli::from_bits(b))))
    }

    pub fn apply_fault(&mut self, qubits: &[usize], fault: Fault) {
        if let Fault::Pauli(t) = fault {
            for (i, &q) in qubits.iter().enumerate() {
                self.apply(q, t[i]);
            }
        }
    }

    /// Does the frame anticommute with `p`?
    pub fn anticommutes_with(&self, p: &PauliString) -> bool {
        p.terms().iter().filter(|&&(q, l)| self.get(q).anticommutes(l)).count() % 2 == 1
    }
}

/// Conjugate the frame through one location. The rotation is handled by twirling:
/// when the frame anticommutes with its Z string, that string is multiplied in with
/// probability `sin²(2θ)`. Randomness is drawn only in that case.
pub fn propagate<R: Rng + ?Sized>(frame: &mut PauliFrame, loc: &Location, theta: f64, rng: &mut R) {
    apply_location(frame, loc, || {
        let s = (2.0 * theta).sin();
        rng.random::<f64>() < s * s
    });
}

/// Same as [`propagate`] with a caller-chosen twirl outcome.
pub(crate) fn apply_location(frame: &mut PauliFrame, loc: &Location, twirl: impl FnOnce() -> bool) {
    match loc {
        Location::PrepZ(q) | Location::PrepX(q) => frame.reset(*q),
        Location::Cx { control, target } => frame.cx(*control, *target),
        Location::Cz { a, b } => frame.cz(*a, *b),
        Location::Rot { qubits } => {
            if frame.x_parity(qubits) && twirl() {
                for &q in qubits {
                    frame.apply(q, Pauli::Z);
                }
            }
        }
        Location::Idle { .. } | Location::MeasX { .. } => {}
    }
}

/// Residual logical class of an accepted, corrected shot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LogicalClass {
    I = 0,
    XL = 1,
    ZL = 2,
    YL = 3,
}

impl LogicalClass {
    pub const ALL: [LogicalClass; 4] = [LogicalClass::I, LogicalClass::XL, LogicalClass::ZL, LogicalClass::YL];

    /// Bit 0: anticommutes with `Z_L`; bit 1: anticommutes with `X_L`.
    pub fn from_bits(b: u8) -> Self {
        match b & 3 {
            0 => LogicalClass::I,
            1 => LogicalClass::XL,
            2 => LogicalClass::ZL,
            _ => LogicalClass::YL,
        }
    }

    pub fn bits(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            LogicalClass::I => "I",
            LogicalClass::XL => "XL",
            LogicalClass::ZL => "ZL",
            LogicalClass::YL => "YL",
        }
    }
}

/// Logical flip bits of a data frame against the layout's logical representatives.
pub fn logical_bits(frame: &PauliFrame, layout: &CodeLayout) -> u8 {
    u8::from(frame.anticommutes_with(&layout.logical_z)) | u8::from(frame.anticommutes_with(&layout.logical_x)) << 1
}

/// Class of a residual that must commute with every stabilizer.
pub fn classify_residual(frame: &PauliFrame, layout: &CodeLayout) -> Result<LogicalClass, SimError> {
    if let Some(s) = layout.stabilizers.iter().position(|s| frame.anticommutes_with(&s.support)) {
        return Err(SimError::InconsistentResidual { stabilizer: s });
    }
    Ok(LogicalClass::from_bits(logical_bits(frame, layout)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_8;

    #[test]
    fn cx_copies_z_from_target_to_control() {
        let mut f = PauliFrame::new(2);
        f.apply(1, Pauli::Z);
        f.cx(0, 1);
        assert_eq!((f.get(0), f.get(1)), (Pauli::Z, Pauli::Z));
        let mut g = PauliFrame::new(2);
        g.apply(0, Pauli::X);
        g.cx(0, 1);
        assert_eq!((g.get(0), g.get(1)), (Pauli::X, Pauli::X));
    }

    #[test]
    fn cz_maps_x_to_xz() {
        let mut f = PauliFrame::new(2);
        f.apply(0, Pauli::X);
        f.cz(0, 1);
        assert_eq!((f.get(0), f.get(1)), (Pauli::X, Pauli::Z));
    }

    struct Counting<R>(R, usize);
    impl<R: rand::RngCore> rand::RngCore for Counting<R> {
        fn next_u32(&mut self) -> u32 {
            self.1 += 1;
            self.0.next_u32()
        }
        fn next_u64(&mut self) -> u64 {
            self.1 += 1;
            self.0.next_u64()
        }
        fn fill_bytes(&mut self, d: &mut [u8]) {
            self.1 += 1;
            self.0.fill_bytes(d)
        }
    }

    #[test]
    fn commuting_frame_passes_rotation_without_draws() {
        let rot = Location::Rot { qubits: vec![0, 1] };
        let mut f = PauliFrame::new(2);
        f.apply(0, Pauli::Z);
        let mut rng = Counting(ChaCha8Rng::seed_from_u64(1), 0);
        propagate(&mut f, &rot, FRAC_PI_8, &mut rng);
        assert_eq!(rng.1, 0);
        assert_eq!(f.get(0), Pauli::Z);
        assert_eq!(f.get(1), Pauli::I);
    }

    #[test]
    fn anticommuting_frame_twirls_half_the_time() {
        let rot = Location::Rot { qubits: vec![0, 1] };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut hits = 0;
        for _ in 0..n {
            let mut f = PauliFrame::new(2);
            f.apply(0, Pauli::X);
            propagate(&mut f, &rot, FRAC_PI_8, &mut rng);
            match (f.get(0), f.get(1)) {
                (Pauli::Y, Pauli::Z) => hits += 1,
                (Pauli::X, Pauli::I) => {}
                other => panic!("unexpected {other:?}"),
            }
        }
        let frac = hits as f64 / n as f64;
        let sd = (0.25 / n as f64).sqrt();
        assert!((frac - 0.5).abs() < 4.0 * sd, "{frac}");
    }

    #[test]
    fn residual_classes() {
        let l = CodeLayout::build(3, 3).unwrap();
        let n = l.num_data();
        assert_eq!(classify_residual(&PauliFrame::new(n), &l).unwrap(), LogicalClass::I);
        let xl = PauliFrame::from_pauli_string(n, &l.logical_x);
        assert_eq!(classify_residual(&xl, &l).unwrap(), LogicalClass::XL);
        let zl = PauliFrame::from_pauli_string(n, &l.logical_z);
        assert_eq!(classify_residual(&zl, &l).unwrap(), LogicalClass::ZL);
        let yl = PauliFrame::from_pauli_string(n, &l.logical_x.mul(&l.logical_z));
        assert_eq!(classify_residual(&yl, &l).unwrap(), LogicalClass::YL);
        let mut bad = PauliFrame::new(n);
        bad.apply(4, Pauli::Z);
        assert!(matches!(classify_residual(&bad, &l), Err(SimError::InconsistentResidual { .. })));
    }

    proptest! {
        #[test]
        fn class_invariant_under_stabilizers(pick in proptest::collection::vec(any::<bool>(), 8), base in 0u8..4) {
            let l = CodeLayout::build(3, 3).unwrap();
            let n = l.num_data();
            let mut p = PauliString::identity();
            if base & 1 == 1 { p = p.mul(&l.logical_x); }
            if base & 2 == 2 { p = p.mul(&l.logical_z); }
            for (s, &on) in l.stabilizers.iter().zip(&pick) {
                if on { p = p.mul(&s.support); }
            }
            let f = PauliFrame::from_pauli_string(n, &p);
            prop_assert_eq!(classify_residual(&f, &l).unwrap(), LogicalClass::from_bits(base));
        }

        #[test]
        fn cx_and_cz_are_involutions(bits in proptest::collection::vec(0u8..4, 2)) {
            let mut f = PauliFrame::new(2);
            f.apply(0, Pauli::from_bits(bits[0]));
            f.apply(1, Pauli::from_bits(bits[1]));
            let orig = f.clone();
            f.cx(0, 1);
            f.cx(0, 1);
            prop_assert_eq!(&f, &orig);
            f.cz(0, 1);
            f.cz(0, 1);
            prop_assert_eq!(&f, &orig);
        }
    }
}
