//! Sobol' sequence generator (Gray-code order, 32-bit words).
//!
//! Direction numbers follow the Joe–Kuo "new-joe-kuo-6" tables; the first
//! eight dimensions are embedded below and cross-checked in tests against an
//! independent implementation. Randomization is a per-dimension digital
//! shift XORed onto the raw words.

pub(crate) const MAX_DIM: usize = 8;
const BITS: usize = 32;

/// (degree s, coefficient bits a, initial odd m values) per dimension ≥ 2.
/// Dimension 1 is the van der Corput sequence (all m_k = 1).
const POLYS: [(usize, u32, &[u32]); 7] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
];

fn direction_words(dim_index: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim_index == 0 {
        for (k, word) in v.iter_mut().enumerate() {
            *word = 1 << (31 - k);
        }
        return v;
    }
    let (s, a, m) = POLYS[dim_index - 1];
    for (k, &mk) in m.iter().enumerate() {
        v[k] = mk << (31 - k);
    }
    for k in s..BITS {
        let j = k - s;
        let mut word = v[j] ^ (v[j] >> s);
        for bit in 0..(s - 1) {
            if (a >> bit) & 1 != 0 {
                word ^= v[j + 1 + bit];
            }
        }
        v[k] = word;
    }
    v
}

/// Streaming generator; the zero point (index 0) is never emitted.
pub(crate) struct SobolSequence {
    directions: Vec<[u32; BITS]>,
    shift: Vec<u32>,
    state: Vec<u32>,
    index: u64,
}

impl SobolSequence {
    /// `shift` holds one digital-shift word per dimension; all zeros means
    /// the plain (unscrambled) sequence.
    pub fn new(dim: usize, shift: Vec<u32>) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} outside table");
        assert_eq!(shift.len(), dim);
        Self {
            directions: (0..dim).map(direction_words).collect(),
            shift,
            state: vec![0; dim],
            index: 0,
        }
    }

    /// Write the next point of the (shifted) sequence into `out`, in [0, 1).
    pub fn next_point(&mut self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.state.len());
        self.index += 1;
        let c = self.index.trailing_zeros() as usize;
        assert!(c < BITS, "Sobol index space exhausted");
        for (j, x) in self.state.iter_mut().enumerate() {
            *x ^= self.directions[j][c];
            out[j] = (*x ^ self.shift[j]) as f64 / (1u64 << 32) as f64;
        }
    }
}
