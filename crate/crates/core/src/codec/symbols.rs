//! Mapping decompositions to the three symbol streams and back.
//!
//! Per block the atom pairs become single indices `o = ℓy·M_x + ℓx + 1`
//! (one-based, column-major over the atom grid), sorted ascending and
//! written as the first index, successive differences and a closing 0. The
//! sort order carries over to the magnitudes and signs.

use super::quant::{dequantize, quantize, QuantParams};
use crate::error::{Error, Result};
use crate::pursuit::{AtomEntry, BlockDecomposition};

/// Zero-based `(lx, ly)` to the one-based single index.
pub fn map_index_pair(lx: usize, ly: usize, mx: usize, my: usize) -> Result<u32> {
    if lx >= mx || ly >= my {
        return Err(Error::IndexOutOfRange {
            index: ly * mx + lx,
            limit: mx * my,
        });
    }
    u32::try_from(ly * mx + lx + 1).map_err(|_| Error::IndexOutOfRange {
        index: ly * mx + lx,
        limit: u32::MAX as usize,
    })
}

pub fn unmap_index(o: u32, mx: usize, my: usize) -> Result<(usize, usize)> {
    let o = o as usize;
    if o == 0 || o > mx * my {
        return Err(Error::IndexOutOfRange {
            index: o,
            limit: mx * my,
        });
    }
    Ok(((o - 1) % mx, (o - 1) / mx))
}

/// One stored atom after quantisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantEntry {
    pub index: u32,
    pub magnitude: u32,
    pub negative: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BlockSymbolStream {
    pub indices: Vec<u32>,
    pub magnitudes: Vec<u32>,
    pub signs: Vec<bool>,
}

impl BlockSymbolStream {
    pub fn entry_count(&self) -> usize {
        self.magnitudes.len()
    }
}

/// Quantises one block, dropping zero magnitudes, sorted by index.
pub fn quantize_block(
    decomp: &BlockDecomposition,
    p: QuantParams,
    mx: usize,
    my: usize,
) -> Result<Vec<QuantEntry>> {
    let mut entries = Vec::with_capacity(decomp.entries.len());
    for e in &decomp.entries {
        let (magnitude, negative) = quantize(e.coeff, p);
        if magnitude == 0 {
            continue;
        }
        entries.push(QuantEntry {
            index: map_index_pair(e.lx, e.ly, mx, my)?,
            magnitude,
            negative,
        });
    }
    entries.sort_unstable_by_key(|e| e.index);
    Ok(entries)
}

/// Frames already-quantised blocks (each sorted by strictly ascending index).
pub fn frame_blocks(blocks: &[Vec<QuantEntry>]) -> BlockSymbolStream {
    let mut out = BlockSymbolStream::default();
    for block in blocks {
        let mut prev = 0u32;
        for e in block {
            debug_assert!(e.index > prev, "indices must be unique and ascending");
            out.indices.push(e.index - prev);
            out.magnitudes.push(e.magnitude);
            out.signs.push(e.negative);
            prev = e.index;
        }
        out.indices.push(0);
    }
    out
}

/// Quantise and frame all blocks, in block order.
pub fn serialize_blocks(
    decomps: &[BlockDecomposition],
    p: QuantParams,
    mx: usize,
    my: usize,
) -> Result<BlockSymbolStream> {
    let blocks = decomps
        .iter()
        .map(|d| quantize_block(d, p, mx, my))
        .collect::<Result<Vec<_>>>()?;
    Ok(frame_blocks(&blocks))
}

/// Splits a framed stream back into `block_count` quantised blocks.
pub fn unframe_blocks(
    stream: &BlockSymbolStream,
    block_count: usize,
) -> Result<Vec<Vec<QuantEntry>>> {
    if stream.magnitudes.len() != stream.signs.len() {
        return Err(Error::Format(
            "magnitude and sign counts differ".to_string(),
        ));
    }
    let mut blocks = Vec::with_capacity(block_count);
    let mut current = Vec::new();
    let mut prev = 0u32;
    let mut k = 0usize;
    for &sym in &stream.indices {
        if sym == 0 {
            blocks.push(std::mem::take(&mut current));
            prev = 0;
            continue;
        }
        let index = prev
            .checked_add(sym)
            .ok_or_else(|| Error::Format("index overflow".to_string()))?;
        let (&magnitude, &negative) = stream
            .magnitudes
            .get(k)
            .zip(stream.signs.get(k))
            .ok_or_else(|| Error::Format("fewer coefficients than indices".to_string()))?;
        current.push(QuantEntry {
            index,
            magnitude,
            negative,
        });
        prev = index;
        k += 1;
    }
    if !current.is_empty() || blocks.len() != block_count {
        return Err(Error::Format(format!(
            "expected {block_count} terminated blocks, found {}",
            blocks.len()
        )));
    }
    if k != stream.magnitudes.len() {
        return Err(Error::Format("more coefficients than indices".to_string()));
    }
    Ok(blocks)
}

/// Dequantised decompositions, entries in ascending index order.
pub fn deserialize_blocks(
    stream: &BlockSymbolStream,
    block_count: usize,
    p: QuantParams,
    mx: usize,
    my: usize,
) -> Result<Vec<BlockDecomposition>> {
    unframe_blocks(stream, block_count)?
        .into_iter()
        .enumerate()
        .map(|(q, entries)| {
            let entries = entries
                .into_iter()
                .map(|e| {
                    let (lx, ly) = unmap_index(e.index, mx, my)?;
                    Ok(AtomEntry {
                        lx,
                        ly,
                        coeff: dequantize(e.magnitude, e.negative, p)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(BlockDecomposition { block: q, entries })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_mapping() {
        // one-based (2, 3) with M_x = 10
        assert_eq!(map_index_pair(1, 2, 10, 10).unwrap(), 22);
        assert_eq!(map_index_pair(0, 0, 17, 3).unwrap(), 1);
        for ly in 0..5 {
            for lx in 0..7 {
                let o = map_index_pair(lx, ly, 7, 5).unwrap();
                assert_eq!(unmap_index(o, 7, 5).unwrap(), (lx, ly));
            }
        }
        assert!(map_index_pair(7, 0, 7, 5).is_err());
        assert!(unmap_index(0, 7, 5).is_err());
        assert!(unmap_index(36, 7, 5).is_err());
    }

    #[test]
    fn sorts_and_differences() {
        let mk = |index| QuantEntry {
            index,
            magnitude: index,
            negative: index % 2 == 0,
        };
        let mut block = vec![mk(22), mk(5), mk(9)];
        block.sort_unstable_by_key(|e| e.index);
        let s = frame_blocks(&[block, vec![]]);
        assert_eq!(s.indices, vec![5, 4, 13, 0, 0]);
        assert_eq!(s.magnitudes, vec![5, 9, 22]);
        assert_eq!(s.signs, vec![false, false, true]);
        let back = unframe_blocks(&s, 2).unwrap();
        assert_eq!(
            back[0].iter().map(|e| e.index).collect::<Vec<_>>(),
            vec![5, 9, 22]
        );
        assert!(back[1].is_empty());
        assert!(unframe_blocks(&s, 3).is_err());
    }

    #[test]
    fn empty_block_is_lone_terminator() {
        let p = QuantParams::with_step(1.0).unwrap();
        let s = serialize_blocks(&[BlockDecomposition::default()], p, 4, 4).unwrap();
        assert_eq!(s.indices, vec![0]);
        assert!(s.magnitudes.is_empty());
    }

    #[test]
    fn drops_entries_below_threshold() {
        let p = QuantParams::new(1.0, 2.0).unwrap();
        let d = BlockDecomposition {
            block: 0,
            entries: vec![
                AtomEntry {
                    lx: 1,
                    ly: 0,
                    coeff: 1.5,
                },
                AtomEntry {
                    lx: 0,
                    ly: 1,
                    coeff: -3.2,
                },
            ],
        };
        let s = serialize_blocks(&[d], p, 3, 3).unwrap();
        assert_eq!(s.indices, vec![4, 0]);
        assert_eq!(s.magnitudes, vec![2]);
        assert_eq!(s.signs, vec![true]);
        let back = deserialize_blocks(&s, 1, p, 3, 3).unwrap();
        assert_eq!((back[0].entries[0].lx, back[0].entries[0].ly), (0, 1));
        assert_eq!(back[0].entries[0].coeff, -(2.0 + 2.0 - 0.5));
    }
}
