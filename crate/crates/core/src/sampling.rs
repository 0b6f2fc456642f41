//! Parameter sample generation: i.i.d. pseudorandom, randomized Sobol',
//! and the nominal (expected-value) point.
//!
//! Every point set is fully determined by its provenance (generator kind,
//! seed, count) together with the box, so sample sets can be regenerated
//! exactly.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::param::ParamBox;
use crate::sobol::{SobolSequence, MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    Iid,
    Sobol,
    Nominal,
}

impl GeneratorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GeneratorKind::Iid => "iid",
            GeneratorKind::Sobol => "sobol",
            GeneratorKind::Nominal => "nominal",
        }
    }
}

/// How a sample set was produced. Regenerating from equal provenance and an
/// equal box yields identical points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub generator: GeneratorKind,
    pub seed: u64,
    pub count: usize,
}

/// An ordered list of parameter vectors ξ¹ … ξᴺ inside a box.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    points: Vec<f64>,
    provenance: Provenance,
}

impl SampleSet {
    /// Assemble a sample set from raw points (row-major). The caller is
    /// responsible for box membership; generator constructors guarantee it.
    pub fn from_points(dim: usize, points: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if dim == 0 || points.len() != dim * provenance.count {
            return Err(Error::invalid(
                "sample set",
                format!("{} values do not form {} points of dimension {dim}", points.len(), provenance.count),
            ));
        }
        Ok(Self { dim, points, provenance })
    }

    /// Regenerate the set described by `provenance` over `domain`.
    pub fn generate(domain: &ParamBox, provenance: Provenance) -> Result<Self> {
        match provenance.generator {
            GeneratorKind::Iid => sample_iid(domain, provenance.count, provenance.seed),
            GeneratorKind::Sobol => sample_sobol(domain, provenance.count, provenance.seed),
            GeneratorKind::Nominal => {
                if provenance.count != 1 {
                    return Err(Error::invalid("sample set", "nominal sets hold exactly one point"));
                }
                Ok(nominal_sample(domain))
            }
        }
    }

    pub fn len(&self) -> usize {
        self.provenance.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Concatenate two sets over the same space. The result carries the
    /// left set's generator tag and the combined count.
    pub fn concat(&self, other: &SampleSet) -> Result<SampleSet> {
        if self.dim != other.dim {
            return Err(Error::invalid("sample set", "dimension mismatch in concat"));
        }
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let provenance = Provenance {
            generator: self.provenance.generator,
            seed: self.provenance.seed,
            count: self.len() + other.len(),
        };
        SampleSet::from_points(self.dim, points, provenance)
    }

    /// One row per point, plain CSV with a coordinate header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|j| format!("xi{j}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for p in self.iter_points() {
            let row: Vec<String> = p.iter().map(|x| format!("{x}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Deterministic subseed derivation (SplitMix64-style mixing), used to give
/// each (sample size, replication) pair its own independent stream.
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e3779b97f4a7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }
    mix(master ^ mix(a) ^ mix(b.wrapping_mul(0xd1342543de82ef95)))
}

/// `n` points with independent uniform coordinates on the box intervals.
pub fn sample_iid(domain: &ParamBox, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::invalid("sample count", "n must be at least 1"));
    }
    let dim = domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = vec![0.0; dim];
    let mut points = vec![0.0; n * dim];
    for chunk in points.chunks_exact_mut(dim) {
        for u in unit.iter_mut() {
            *u = rng.random::<f64>();
        }
        domain.map_from_unit(&unit, chunk);
    }
    let provenance = Provenance { generator: GeneratorKind::Iid, seed, count: n };
    SampleSet::from_points(dim, points, provenance)
}

/// First `n` points (the zero point excluded) of a digitally shifted Sobol'
/// sequence, mapped onto the box. `seed = 0` disables the shift and yields
/// the plain sequence.
pub fn sample_sobol(domain: &ParamBox, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::invalid("sample count", "n must be at least 1"));
    }
    let dim = domain.dim();
    if dim > MAX_DIM {
        return Err(Error::SobolDimension { dim, max: MAX_DIM });
    }
    let shift: Vec<u32> = if seed == 0 {
        vec![0; dim]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x50b01, 0));
        (0..dim).map(|_| rng.random::<u32>()).collect()
    };
    let mut seq = SobolSequence::new(dim, shift);
    let mut unit = vec![0.0; dim];
    let mut points = vec![0.0; n * dim];
    for chunk in points.chunks_exact_mut(dim) {
        seq.next_point(&mut unit);
        domain.map_from_unit(&unit, chunk);
    }
    let provenance = Provenance { generator: GeneratorKind::Sobol, seed, count: n };
    SampleSet::from_points(dim, points, provenance)
}

/// E[ξ]: the coordinate-wise interval midpoint.
pub fn nominal_point(domain: &ParamBox) -> Vec<f64> {
    domain.midpoint()
}

/// Single-point sample set at the nominal parameter.
pub fn nominal_sample(domain: &ParamBox) -> SampleSet {
    let point = nominal_point(domain);
    let provenance = Provenance { generator: GeneratorKind::Nominal, seed: 0, count: 1 };
    SampleSet::from_points(domain.dim(), point, provenance).expect("midpoint is a valid point")
}
