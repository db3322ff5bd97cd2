//! Small GF(2) linear algebra over bitsets.

use fixedbitset::FixedBitSet;

/// Incrementally built basis of a subspace of GF(2)^n.
///
/// Keeps the inserted vectors themselves (not their reduced forms) so callers can
/// use geometrically meaningful generators, e.g. `d` of single-edge forms.
#[derive(Clone, Debug, Default)]
pub struct Gf2Basis {
    pivots: Vec<usize>,
    reduced: Vec<FixedBitSet>,
    originals: Vec<FixedBitSet>,
}

impl Gf2Basis {
    pub fn new() -> Self {
        Self::default()
    }

    fn reduce(&self, v: &mut FixedBitSet) {
        for (p, r) in self.pivots.iter().zip(&self.reduced) {
            if v.contains(*p) {
                v.symmetric_difference_with(r);
            }
        }
    }

    /// Adds `v` if it is independent of the current span. Returns whether it was added.
    pub fn insert(&mut self, v: FixedBitSet) -> bool {
        let mut r = v.clone();
        self.reduce(&mut r);
        match r.minimum() {
            Some(p) => {
                self.pivots.push(p);
                self.reduced.push(r);
                self.originals.push(v);
                true
            }
            None => false,
        }
    }

    pub fn contains(&self, v: &FixedBitSet) -> bool {
        let mut r = v.clone();
        self.reduce(&mut r);
        r.is_clear()
    }

    pub fn dim(&self) -> usize {
        self.originals.len()
    }

    pub fn vectors(&self) -> &[FixedBitSet] {
        &self.originals
    }
}

/// Index of the bit flipped between Gray codes `i - 1` and `i` (for `i >= 1`).
#[inline]
pub fn gray_flip(i: u64) -> usize {
    i.trailing_zeros() as usize
}

/// In-place Walsh-Hadamard transform: `out[v] = sum_a w[a] (-1)^{a.v}`.
pub fn walsh_hadamard(w: &mut [f64]) {
    let n = w.len();
    assert!(n.is_power_of_two(), "length must be a power of two");
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (w[j], w[j + h]);
                w[j] = a + b;
                w[j + h] = a - b;
            }
        }
        h *= 2;
    }
}
