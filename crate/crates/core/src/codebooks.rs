//! Codebook generation and assembly of the system matrix `A`.
//!
//! Under the silence convention the index-0 codeword of every codebook is the
//! all-zero vector, so only the `R` active codewords are stored and each
//! codebook contributes `R` columns to `A`.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{complex_normal, Coding, ScenarioConfig};

/// Owner of a codebook: a single device (SSC) or the whole group (JSC).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockKey {
    /// `None` for a shared JSC codebook.
    pub device: Option<usize>,
    pub event: usize,
}

/// The `R` active codewords of one codebook, as an `N x R` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    pub key: BlockKey,
    pub words: DMatrix<Complex64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodebookSet {
    pub coding: Coding,
    pub codeword_len: usize,
    pub energy: f64,
    pub values: usize,
    /// JSC: one per event in event order. SSC: one per `(k, m in gamma(k))`,
    /// device-major, events ascending.
    pub books: Vec<Codebook>,
    index: HashMap<BlockKey, usize>,
}

impl CodebookSet {
    fn new(config: &ScenarioConfig, books: Vec<Codebook>) -> Self {
        let index = books.iter().enumerate().map(|(i, b)| (b.key, i)).collect();
        CodebookSet {
            coding: config.coding,
            codeword_len: config.codeword_len,
            energy: config.energy,
            values: config.values,
            books,
            index,
        }
    }

    /// Codebook used by `device` for `event`, if the device has one.
    pub fn book(&self, device: usize, event: usize) -> Option<&Codebook> {
        let key = match self.coding {
            Coding::Jsc => BlockKey { device: None, event },
            Coding::Ssc => BlockKey { device: Some(device), event },
        };
        self.index.get(&key).map(|&i| &self.books[i])
    }

    /// Codeword `s^m_{k,r}` for `r >= 1`; `None` for the silent index 0.
    pub fn codeword(&self, device: usize, event: usize, value: usize) -> Option<&[Complex64]> {
        if value == 0 {
            return None;
        }
        let book = self.book(device, event)?;
        let n = self.codeword_len;
        Some(&book.words.as_slice()[(value - 1) * n..value * n])
    }

    /// Rescales every codeword to energy exactly `E`.
    pub fn normalize_columns(&mut self) {
        let target = self.energy.sqrt();
        for book in &mut self.books {
            for mut col in book.words.column_iter_mut() {
                let norm = col.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                if norm > 0.0 {
                    col.scale_mut(target / norm);
                }
            }
        }
    }

    fn consistent_with(&self, config: &ScenarioConfig) -> Result<()> {
        if self.coding != config.coding
            || self.codeword_len != config.codeword_len
            || self.values != config.values
        {
            return Err(Error::Dimension(
                "codebook set does not match the scenario (coding, N or R)".into(),
            ));
        }
        let expected = block_keys(config);
        if expected.len() != self.books.len()
            || expected.iter().zip(&self.books).any(|(k, b)| *k != b.key)
        {
            return Err(Error::Dimension(
                "codebook set does not match the group assignment".into(),
            ));
        }
        Ok(())
    }
}

/// Codebook owners in column order.
fn block_keys(config: &ScenarioConfig) -> Vec<BlockKey> {
    match config.coding {
        Coding::Jsc => (0..config.events)
            .map(|event| BlockKey { device: None, event })
            .collect(),
        Coding::Ssc => config
            .group_assignment
            .iter()
            .enumerate()
            .flat_map(|(k, set)| {
                set.iter().map(move |&event| BlockKey {
                    device: Some(k),
                    event,
                })
            })
            .collect(),
    }
}

/// I.i.d. CN(0, E/N) codeword entries; one shared matrix per event for JSC,
/// an independent matrix per (device, event) for SSC.
pub fn gen_gaussian_codebooks<G: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut G) -> CodebookSet {
    let n = config.codeword_len;
    let var = config.energy / n as f64;
    let books = block_keys(config)
        .into_iter()
        .map(|key| Codebook {
            key,
            words: DMatrix::from_fn(n, config.values, |_, _| complex_normal(rng, var)),
        })
        .collect();
    CodebookSet::new(config, books)
}

/// Orthogonal JSC codebooks built from DFT columns, each with energy `E`.
pub fn gen_orthogonal_codebooks(config: &ScenarioConfig) -> Result<CodebookSet> {
    if config.coding != Coding::Jsc {
        return Err(Error::config("coding", "orthogonal codebooks are JSC-only"));
    }
    let (n, r) = (config.codeword_len, config.values);
    let columns = config.events * r;
    if columns > n {
        return Err(Error::Dimension(format!(
            "M*R = {columns} orthogonal codewords do not fit in N = {n}"
        )));
    }
    let scale = (config.energy / n as f64).sqrt();
    let books = (0..config.events)
        .map(|event| Codebook {
            key: BlockKey { device: None, event },
            words: DMatrix::from_fn(n, r, |i, j| {
                let col = event * r + j;
                let phase = -TAU * (i * col % n) as f64 / n as f64;
                Complex64::from_polar(scale, phase)
            }),
        })
        .collect();
    Ok(CodebookSet::new(config, books))
}

/// Identity of one column of `A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ColumnKey {
    pub block: BlockKey,
    /// Active value `r` in `1..=R`.
    pub value: usize,
}

/// A contiguous run of `R` columns belonging to one codebook.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub key: BlockKey,
    pub start: usize,
}

/// The `N x D` matrix `A` plus its column bookkeeping.
#[derive(Clone, Debug)]
pub struct SystemMatrix {
    pub coding: Coding,
    pub values: usize,
    pub a: DMatrix<Complex64>,
    pub column_map: Vec<ColumnKey>,
    blocks: Vec<Block>,
    block_index: HashMap<BlockKey, usize>,
    /// Block ids per event (JSC: one, SSC: one per observing device).
    event_blocks: Vec<Vec<usize>>,
}

impl SystemMatrix {
    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn event_blocks(&self, event: usize) -> impl Iterator<Item = &Block> + '_ {
        self.event_blocks[event].iter().map(|&b| &self.blocks[b])
    }

    pub fn events(&self) -> usize {
        self.event_blocks.len()
    }

    /// Column carrying value `r >= 1` of `event` as sent by `device`.
    pub fn column_of(&self, device: usize, event: usize, value: usize) -> Option<usize> {
        if value == 0 || value > self.values {
            return None;
        }
        let key = match self.coding {
            Coding::Jsc => BlockKey { device: None, event },
            Coding::Ssc => BlockKey { device: Some(device), event },
        };
        self.block_index
            .get(&key)
            .map(|&b| self.blocks[b].start + value - 1)
    }

    pub fn column(&self, col: usize) -> &[Complex64] {
        let n = self.rows();
        &self.a.as_slice()[col * n..(col + 1) * n]
    }

    /// `A * u`.
    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows()];
        for (d, &coef) in u.iter().enumerate() {
            if coef == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.column(d)) {
                *o += a * coef;
            }
        }
        out
    }

    /// Writes `A` as CSV, two real columns (`re_d`, `im_d`) per complex column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<String> = (0..self.cols())
            .flat_map(|d| [format!("re_{d}"), format!("im_{d}")])
            .collect();
        w.write_record(&header)?;
        for i in 0..self.rows() {
            let row: Vec<String> = (0..self.cols())
                .flat_map(|d| {
                    let c = self.a[(i, d)];
                    [c.re.to_string(), c.im.to_string()]
                })
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Concatenates the codebooks into `A` (JSC: `M*R` columns, SSC: `sum_k |gamma(k)| * R`).
pub fn assemble_system_matrix(codebooks: &CodebookSet, config: &ScenarioConfig) -> Result<SystemMatrix> {
    codebooks.consistent_with(config)?;
    let (n, r) = (config.codeword_len, config.values);
    let d = codebooks.books.len() * r;
    let mut data = Vec::with_capacity(n * d);
    let mut column_map = Vec::with_capacity(d);
    let mut blocks = Vec::with_capacity(codebooks.books.len());
    let mut event_blocks = vec![Vec::new(); config.events];
    for (b, book) in codebooks.books.iter().enumerate() {
        blocks.push(Block {
            key: book.key,
            start: b * r,
        });
        event_blocks[book.key.event].push(b);
        data.extend_from_slice(book.words.as_slice());
        column_map.extend((1..=r).map(|value| ColumnKey {
            block: book.key,
            value,
        }));
    }
    let block_index = blocks.iter().enumerate().map(|(i, b)| (b.key, i)).collect();
    Ok(SystemMatrix {
        coding: config.coding,
        values: r,
        a: DMatrix::from_vec(n, d, data),
        column_map,
        blocks,
        block_index,
        event_blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    #[test]
    fn gaussian_entry_variance() {
        // 24 * 1 * 6 entries per draw; repeat to exceed 1e5 entries.
        let config = ScenarioConfig::disjoint(24, 1, 1, 6, 0.1, 12.0, Coding::Jsc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut sum = 0.0;
        let mut count = 0usize;
        while count < 100_000 {
            let set = gen_gaussian_codebooks(&config, &mut rng);
            for book in &set.books {
                for c in book.words.iter() {
                    sum += c.norm_sqr();
                    count += 1;
                }
            }
        }
        let var = sum / count as f64;
        assert!((var - 1.0 / 6.0).abs() < 0.05 / 6.0, "var {var}");
    }

    #[test]
    fn jsc_devices_share_codewords() {
        let config = ScenarioConfig::disjoint(3, 2, 2, 6, 0.1, 12.0, Coding::Jsc).unwrap();
        let set = gen_gaussian_codebooks(&config, &mut ChaCha8Rng::seed_from_u64(1));
        // devices 2 and 3 both observe event 1
        assert_eq!(set.codeword(2, 1, 2), set.codeword(3, 1, 2));
        assert!(set.codeword(2, 1, 0).is_none());
    }

    #[test]
    fn gaussian_codebooks_are_deterministic() {
        let config = ScenarioConfig::disjoint(3, 2, 2, 6, 0.1, 12.0, Coding::Ssc).unwrap();
        let a = gen_gaussian_codebooks(&config, &mut ChaCha8Rng::seed_from_u64(5));
        let b = gen_gaussian_codebooks(&config, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn normalization_enforces_energy() {
        let mut config = ScenarioConfig::disjoint(3, 2, 2, 6, 0.1, 12.0, Coding::Ssc).unwrap();
        config.energy = 2.5;
        let mut set = gen_gaussian_codebooks(&config, &mut ChaCha8Rng::seed_from_u64(5));
        set.normalize_columns();
        for book in &set.books {
            for col in book.words.column_iter() {
                let e: f64 = col.iter().map(|c| c.norm_sqr()).sum();
                assert!(e <= 2.5 * (1.0 + 1e-9) && e >= 2.5 * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn orthogonal_gram_is_scaled_identity() {
        let config = ScenarioConfig::disjoint(1, 2, 1, 4, 0.1, 12.0, Coding::Jsc).unwrap();
        let set = gen_orthogonal_codebooks(&config).unwrap();
        let sys = assemble_system_matrix(&set, &config).unwrap();
        let gram = sys.a.adjoint() * &sys.a;
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - Complex64::new(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn orthogonal_dimension_error() {
        let config = ScenarioConfig::disjoint(2, 2, 1, 3, 0.1, 12.0, Coding::Jsc).unwrap();
        assert!(matches!(gen_orthogonal_codebooks(&config), Err(Error::Dimension(_))));
    }

    #[test]
    fn orthogonal_single_column() {
        let config = ScenarioConfig::disjoint(1, 1, 1, 1, 0.1, 12.0, Coding::Jsc).unwrap();
        let set = gen_orthogonal_codebooks(&config).unwrap();
        let word = set.codeword(0, 0, 1).unwrap();
        assert_eq!(word.len(), 1);
        assert!((word[0].norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn system_matrix_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let jsc = ScenarioConfig::disjoint(24, 1, 8, 6, 0.1, 12.0, Coding::Jsc).unwrap();
        let sys = assemble_system_matrix(&gen_gaussian_codebooks(&jsc, &mut rng), &jsc).unwrap();
        assert_eq!((sys.rows(), sys.cols()), (6, 24));

        let ssc = ScenarioConfig::disjoint(24, 1, 8, 6, 0.1, 12.0, Coding::Ssc).unwrap();
        let sys = assemble_system_matrix(&gen_gaussian_codebooks(&ssc, &mut rng), &ssc).unwrap();
        assert_eq!((sys.rows(), sys.cols()), (6, 192));
        let unique: HashSet<_> = sys.column_map.iter().collect();
        assert_eq!(unique.len(), 192);
        assert_eq!(sys.column_of(17, 2, 1), Some(17));
    }

    #[test]
    fn jsc_columns_do_not_grow_with_devices() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for g in [1, 4, 32] {
            let jsc = ScenarioConfig::disjoint(5, 3, g, 6, 0.1, 12.0, Coding::Jsc).unwrap();
            let ssc = ScenarioConfig::disjoint(5, 3, g, 6, 0.1, 12.0, Coding::Ssc).unwrap();
            let a = assemble_system_matrix(&gen_gaussian_codebooks(&jsc, &mut rng), &jsc).unwrap();
            let b = assemble_system_matrix(&gen_gaussian_codebooks(&ssc, &mut rng), &ssc).unwrap();
            assert_eq!(a.cols(), 15);
            assert_eq!(b.cols(), 15 * g);
        }
    }

    #[test]
    fn mismatched_codebooks_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = ScenarioConfig::disjoint(3, 1, 2, 6, 0.1, 12.0, Coding::Ssc).unwrap();
        let b = ScenarioConfig::disjoint(3, 1, 3, 6, 0.1, 12.0, Coding::Ssc).unwrap();
        let set = gen_gaussian_codebooks(&a, &mut rng);
        assert!(assemble_system_matrix(&set, &b).is_err());
    }

    #[test]
    fn csv_export_has_two_columns_per_entry() {
        let config = ScenarioConfig::disjoint(2, 1, 1, 3, 0.1, 12.0, Coding::Jsc).unwrap();
        let set = gen_orthogonal_codebooks(&config).unwrap();
        let sys = assemble_system_matrix(&set, &config).unwrap();
        let mut buf = Vec::new();
        sys.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "re_0,im_0,re_1,im_1");
    }
}
