//! Separable 1D dictionaries for the block pursuit.
//!
//! The mixed dictionary is the union of a redundant cosine family, a
//! redundant sine family and shifted copies of a few localized prototypes.
//! Both axes use the same 1D dictionary.

use crate::error::{Error, Result};

/// Origin of a dictionary column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomTag {
    Cos(usize),
    Sin(usize),
    Prototype { id: usize, shift: usize },
}

/// Unit-norm columns of length `len`, stored contiguously per atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Atoms {
    len: usize,
    data: Vec<f64>,
    tags: Vec<AtomTag>,
}

impl Atoms {
    fn with_len(len: usize) -> Self {
        Self {
            len,
            data: Vec::new(),
            tags: Vec::new(),
        }
    }

    fn push_normalized(&mut self, column: &[f64], tag: AtomTag) {
        debug_assert_eq!(column.len(), self.len);
        let norm = column.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.data.extend(column.iter().map(|v| v / norm));
        self.tags.push(tag);
    }

    /// Signal length of every atom (the block side).
    #[inline]
    pub fn atom_len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.tags.len()
    }

    #[inline]
    pub fn atom(&self, n: usize) -> &[f64] {
        &self.data[n * self.len..(n + 1) * self.len]
    }

    #[inline]
    pub fn tag(&self, n: usize) -> AtomTag {
        self.tags[n]
    }

    /// Atom-major storage: `as_slice()[n * atom_len() + i]` is entry `i` of atom `n`.
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn extend(&mut self, other: Atoms) {
        assert_eq!(self.len, other.len);
        self.data.extend(other.data);
        self.tags.extend(other.tags);
    }

    /// Drops columns that repeat an earlier one up to sign.
    fn dedup(&mut self) {
        let mut kept = Atoms::with_len(self.len);
        for n in 0..self.count() {
            let atom = self.atom(n);
            let duplicate = (0..kept.count()).any(|m| {
                let dot: f64 = kept.atom(m).iter().zip(atom).map(|(a, b)| a * b).sum();
                dot.abs() >= 1.0 - 1e-10
            });
            if !duplicate {
                kept.data.extend_from_slice(atom);
                kept.tags.push(self.tags[n]);
            }
        }
        *self = kept;
    }
}

/// `{ w_c(n)·cos(π(2i−1)(n−1)/2M) }`, n = 1..M, each column normalised.
pub fn build_trig_cos(block_side: usize, m: usize) -> Atoms {
    let mut atoms = Atoms::with_len(block_side);
    let mut col = vec![0.0; block_side];
    for n in 1..=m {
        for (i, v) in col.iter_mut().enumerate() {
            let i = (i + 1) as f64;
            *v = (std::f64::consts::PI * (2.0 * i - 1.0) * (n - 1) as f64 / (2.0 * m as f64)).cos();
        }
        atoms.push_normalized(&col, AtomTag::Cos(n));
    }
    atoms
}

/// `{ w_s(n)·sin(π(2i−1)n/2M) }`, n = 1..M, each column normalised.
pub fn build_trig_sin(block_side: usize, m: usize) -> Atoms {
    let mut atoms = Atoms::with_len(block_side);
    let mut col = vec![0.0; block_side];
    for n in 1..=m {
        for (i, v) in col.iter_mut().enumerate() {
            let i = (i + 1) as f64;
            *v = (std::f64::consts::PI * (2.0 * i - 1.0) * n as f64 / (2.0 * m as f64)).sin();
        }
        atoms.push_normalized(&col, AtomTag::Sin(n));
    }
    atoms
}

/// Every one-sample shift of each prototype that fits inside the block.
pub fn build_prototype_dict(block_side: usize, prototypes: &[Vec<f64>]) -> Result<Atoms> {
    let mut atoms = Atoms::with_len(block_side);
    let mut col = vec![0.0; block_side];
    for (id, proto) in prototypes.iter().enumerate() {
        if proto.is_empty() || proto.iter().all(|&v| v == 0.0) {
            return Err(Error::EmptyPrototype);
        }
        if proto.len() > block_side {
            return Err(Error::Config(format!(
                "prototype {id} has support {} > block side {block_side}",
                proto.len()
            )));
        }
        for shift in 0..=block_side - proto.len() {
            col.fill(0.0);
            col[shift..shift + proto.len()].copy_from_slice(proto);
            atoms.push_normalized(&col, AtomTag::Prototype { id, shift });
        }
    }
    Ok(atoms)
}

/// Named prototype families; the id travels in the bitstream header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrototypeSet {
    /// Delta, 5-tap hat, 7-tap raised cosine.
    Standard,
    /// Trigonometric atoms only.
    None,
}

impl PrototypeSet {
    pub fn id(self) -> u8 {
        match self {
            PrototypeSet::Standard => 0,
            PrototypeSet::None => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(PrototypeSet::Standard),
            1 => Some(PrototypeSet::None),
            _ => None,
        }
    }

    pub fn prototypes(self) -> Vec<Vec<f64>> {
        match self {
            PrototypeSet::Standard => vec![
                vec![1.0],
                vec![1.0, 2.0, 3.0, 2.0, 1.0],
                (1..=7)
                    .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / 8.0).cos()))
                    .collect(),
            ],
            PrototypeSet::None => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DictParams {
    pub block_side: usize,
    /// Each trig family has `redundancy · block_side` atoms.
    pub redundancy: usize,
    pub prototypes: PrototypeSet,
}

impl Default for DictParams {
    fn default() -> Self {
        Self {
            block_side: 16,
            redundancy: 2,
            prototypes: PrototypeSet::Standard,
        }
    }
}

/// Pair of 1D dictionaries whose outer products form the 2D atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableDictionary {
    pub x: Atoms,
    pub y: Atoms,
    pub params: DictParams,
}

impl SeparableDictionary {
    /// Both axes share one explicit atom set (mainly for tests).
    pub fn from_atoms(atoms: Atoms) -> Self {
        let params = DictParams {
            block_side: atoms.atom_len(),
            redundancy: 0,
            prototypes: PrototypeSet::None,
        };
        Self {
            x: atoms.clone(),
            y: atoms,
            params,
        }
    }

    #[inline]
    pub fn block_side(&self) -> usize {
        self.x.atom_len()
    }

    /// Number of 2D atoms, `M_x · M_y`.
    pub fn size(&self) -> usize {
        self.x.count() * self.y.count()
    }
}

/// `D = D_C ∪ D_S ∪ D_L` on both axes, duplicates removed (first occurrence wins).
pub fn build_mixed(params: DictParams) -> Result<SeparableDictionary> {
    if params.block_side < 2 {
        return Err(Error::Config("block side must be at least 2".to_string()));
    }
    if params.redundancy == 0 {
        return Err(Error::Config(
            "trig redundancy must be at least 1".to_string(),
        ));
    }
    let m = params.redundancy * params.block_side;
    let mut atoms = build_trig_cos(params.block_side, m);
    atoms.extend(build_trig_sin(params.block_side, m));
    atoms.extend(build_prototype_dict(
        params.block_side,
        &params.prototypes.prototypes(),
    )?);
    atoms.dedup();
    Ok(SeparableDictionary {
        x: atoms.clone(),
        y: atoms,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn norms_ok(a: &Atoms) -> bool {
        (0..a.count()).all(|n| {
            let s: f64 = a.atom(n).iter().map(|v| v * v).sum();
            (s.sqrt() - 1.0).abs() < 1e-12
        })
    }

    fn gram(a: &Atoms) -> DMatrix<f64> {
        DMatrix::from_fn(a.count(), a.count(), |i, j| {
            a.atom(i).iter().zip(a.atom(j)).map(|(x, y)| x * y).sum()
        })
    }

    #[test]
    fn cosine_family() {
        let a = build_trig_cos(16, 32);
        assert_eq!(a.count(), 32);
        assert!(a.atom(0).iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert!(norms_ok(&a));
        let basis = build_trig_cos(8, 8);
        let g = gram(&basis);
        assert!((g - DMatrix::identity(8, 8)).abs().max() < 1e-10);
    }

    #[test]
    fn sine_family() {
        let a = build_trig_sin(16, 16);
        assert!(norms_ok(&a));
        let last = a.atom(15);
        for (i, &v) in last.iter().enumerate() {
            let expected = if i % 2 == 0 { 0.25 } else { -0.25 };
            assert!((v - expected).abs() < 1e-12);
        }
        let wide = build_trig_sin(16, 40);
        for n in 0..wide.count() {
            assert!(wide.atom(n).iter().any(|v| v.abs() > 1e-3));
        }
    }

    #[test]
    fn prototype_shifts() {
        let deltas = build_prototype_dict(6, &[vec![1.0]]).unwrap();
        assert_eq!(deltas.count(), 6);
        for n in 0..6 {
            for i in 0..6 {
                assert_eq!(deltas.atom(n)[i], if i == n { 1.0 } else { 0.0 });
            }
        }
        let s = 1.0 / 3f64.sqrt();
        let flat = build_prototype_dict(6, &[vec![s, s, s]]).unwrap();
        assert_eq!(flat.count(), 4);
        assert!(flat.atom(0)[..3].iter().all(|&v| (v - s).abs() < 1e-15));
        assert!(flat.atom(0)[3..].iter().all(|&v| v == 0.0));

        let protos = PrototypeSet::Standard.prototypes();
        let all = build_prototype_dict(16, &protos).unwrap();
        let expected: usize = protos.iter().map(|p| 16 - p.len() + 1).sum();
        assert_eq!(all.count(), expected);
        assert!(norms_ok(&all));

        assert!(matches!(
            build_prototype_dict(4, &[vec![]]),
            Err(Error::EmptyPrototype)
        ));
    }

    #[test]
    fn mixed_dictionary_properties() {
        let d = build_mixed(DictParams::default()).unwrap();
        // 32 cos + 32 sin + (16 + 12 + 10) shifted prototypes, none coincide
        assert_eq!(d.x.count(), 102);
        assert_eq!(d.x.count(), d.y.count());
        assert!(norms_ok(&d.x));
        let g = gram(&d.x);
        for i in 0..g.nrows() {
            for j in 0..i {
                assert!(g[(i, j)].abs() < 1.0 - 1e-10, "{i} {j}");
            }
        }
        let m = DMatrix::from_column_slice(16, d.x.count(), d.x.as_slice());
        assert_eq!(m.rank(1e-9), 16);
        assert_eq!(build_mixed(DictParams::default()).unwrap(), d);
    }
}
