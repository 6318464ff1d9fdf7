//! Binary corrector cache.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic      8 bytes  "TSCORR01"
//! d          u32      1 or 2
//! n          u32      grid points per axis
//! fields     u32      must equal 2d + d² + d³
//! tol        f64
//! a_hat      d² × f64 row-major
//! fields     (2d + d² + d³) × n^d × f64, each row-major (x fastest)
//! ```
//!
//! Field order: χ_j (j < d), Υ_ij (i·d + j), b_ijk ((i·d + j)·d + k), B_l (l < d).
//! Gradients and residuals are not stored; gradients are recomputed on load.

use thiserror::Error;

use super::{CellResiduals, CorrectorSet, SpectralGrid};

const MAGIC: &[u8; 8] = b"TSCORR01";
const MAX_N: usize = 4096;

#[derive(Debug, Error, PartialEq)]
pub enum DumpError {
    #[error("bad magic bytes")]
    Magic,
    #[error("truncated input: needed {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("unsupported dimension {0}")]
    Dimension(u32),
    #[error("grid size {0} out of range")]
    GridSize(u32),
    #[error("field count {got} does not match {expected} for this dimension")]
    FieldCount { expected: u32, got: u32 },
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("non-finite value at offset {0}")]
    NonFinite(usize),
}

fn field_count(d: usize) -> usize {
    2 * d + d * d + d * d * d
}

pub fn encode_correctors(set: &CorrectorSet) -> Vec<u8> {
    let d = set.dim;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(set.n as u32).to_le_bytes());
    out.extend_from_slice(&(field_count(d) as u32).to_le_bytes());
    out.extend_from_slice(&set.tol.to_le_bytes());
    for i in 0..d {
        for j in 0..d {
            out.extend_from_slice(&set.a_hat[i][j].to_le_bytes());
        }
    }
    for f in set.chi.iter().chain(&set.upsilon).chain(&set.b).chain(&set.big_b) {
        for v in f {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8], DumpError> {
        let end = self.pos.checked_add(k).filter(|&e| e <= self.data.len());
        match end {
            Some(e) => {
                let s = &self.data[self.pos..e];
                self.pos = e;
                Ok(s)
            }
            None => Err(DumpError::Truncated {
                needed: self.pos.saturating_add(k),
                have: self.data.len(),
            }),
        }
    }

    fn u32(&mut self) -> Result<u32, DumpError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, DumpError> {
        let at = self.pos;
        let v = f64::from_le_bytes(self.take(8)?.try_into().unwrap());
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DumpError::NonFinite(at))
        }
    }
}

pub fn decode_correctors(data: &[u8]) -> Result<CorrectorSet, DumpError> {
    let mut r = Reader { data, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(DumpError::Magic);
    }
    let d = r.u32()?;
    if d != 1 && d != 2 {
        return Err(DumpError::Dimension(d));
    }
    let n = r.u32()?;
    if n < 2 || n as usize > MAX_N || !n.is_power_of_two() || (d == 2 && n as usize > 1024) {
        return Err(DumpError::GridSize(n));
    }
    let (d, n_us) = (d as usize, n as usize);
    let count = r.u32()?;
    if count as usize != field_count(d) {
        return Err(DumpError::FieldCount {
            expected: field_count(d) as u32,
            got: count,
        });
    }
    let len = n_us.pow(d as u32);
    let needed = 8 + 12 + 8 + 8 * (d * d + field_count(d) * len);
    if data.len() < needed {
        return Err(DumpError::Truncated {
            needed,
            have: data.len(),
        });
    }
    if data.len() > needed {
        return Err(DumpError::Trailing(data.len() - needed));
    }
    let tol = r.f64()?;
    let mut a_hat = [[0.0; 2]; 2];
    for row in a_hat.iter_mut().take(d) {
        for v in row.iter_mut().take(d) {
            *v = r.f64()?;
        }
    }
    let mut read_fields = |k: usize| -> Result<Vec<Vec<f64>>, DumpError> {
        (0..k).map(|_| (0..len).map(|_| r.f64()).collect()).collect()
    };
    let chi = read_fields(d)?;
    let upsilon = read_fields(d * d)?;
    let b = read_fields(d * d * d)?;
    let big_b = read_fields(d)?;
    Ok(CorrectorSet::assemble(
        SpectralGrid::new(d, n_us),
        tol,
        chi,
        upsilon,
        b,
        big_b,
        a_hat,
        CellResiduals::default(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::make_family;
    use proptest::prelude::*;

    #[test]
    fn round_trip() {
        let f = make_family("trig2d", &[0.7]).unwrap();
        let set = CorrectorSet::compute(&f, 16, 1e-10).unwrap();
        let bytes = encode_correctors(&set);
        let back = decode_correctors(&bytes).unwrap();
        assert_eq!(back.chi, set.chi);
        assert_eq!(back.b, set.b);
        assert_eq!(back.a_hat, set.a_hat);
        assert_eq!(back.grad_chi, set.grad_chi);
        assert_eq!(encode_correctors(&back), bytes);
    }

    #[test]
    fn rejects_malformed() {
        assert_eq!(decode_correctors(b"nope").unwrap_err(), DumpError::Truncated { needed: 8, have: 4 });
        let f = make_family("trig1d", &[0.2]).unwrap();
        let mut bytes = encode_correctors(&CorrectorSet::compute(&f, 8, 1e-10).unwrap());
        bytes.push(0);
        assert_eq!(decode_correctors(&bytes).unwrap_err(), DumpError::Trailing(1));
        bytes.pop();
        bytes[0] = b'X';
        assert_eq!(decode_correctors(&bytes).unwrap_err(), DumpError::Magic);
    }

    proptest! {
        #[test]
        fn arbitrary_bytes_never_panic(data in proptest::collection::vec(any::<u8>(), 0..256)) {
            let _ = decode_correctors(&data);
        }

        #[test]
        fn header_prefixed_garbage_never_panics(tail in proptest::collection::vec(any::<u8>(), 0..128), d in 0u32..4, n in 0u32..64) {
            let mut data = MAGIC.to_vec();
            data.extend_from_slice(&d.to_le_bytes());
            data.extend_from_slice(&n.to_le_bytes());
            data.extend_from_slice(&tail);
            let _ = decode_correctors(&data);
        }
    }
}
