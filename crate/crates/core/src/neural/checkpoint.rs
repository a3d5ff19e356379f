//! Binary checkpoint format.
//!
//! ```text
//! bytes 0..7   magic "AIRPPO1"
//! u32 LE       number of layer dimensions (5)
//! u32 LE x 5   obs, hidden1, hidden2, action, value dims = 3, 64, 64, 3, 1
//! f64 LE x N   W1, b1, W2, b2, Wp, bp, log_std, Wv, bv   (matrices [out][in])
//! ```

use std::io::{self, Read, Write};

use thiserror::Error;

use super::{NetworkParams, ACT_DIM, HIDDEN, OBS_DIM, PARAM_COUNT};

pub const CHECKPOINT_MAGIC: &[u8; 7] = b"AIRPPO1";
const DIMS: [u32; 5] = [OBS_DIM as u32, HIDDEN as u32, HIDDEN as u32, ACT_DIM as u32, 1];

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] io::Error),
    #[error("bad checkpoint magic {0:?}")]
    BadMagic(Vec<u8>),
    #[error("checkpoint layer dims {got:?} do not match network {expected:?}")]
    BadDims { got: Vec<u32>, expected: Vec<u32> },
    #[error("checkpoint has trailing bytes after parameters")]
    TrailingBytes,
    #[error("checkpoint holds non-finite parameter at index {0}")]
    NonFinite(usize),
}

pub fn write_checkpoint<W: Write>(params: &NetworkParams, mut w: W) -> io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(DIMS.len() as u32).to_le_bytes())?;
    for d in DIMS {
        w.write_all(&d.to_le_bytes())?;
    }
    for v in params.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<NetworkParams, CheckpointError> {
    let mut magic = [0u8; 7];
    r.read_exact(&mut magic).map_err(|_| CheckpointError::BadMagic(Vec::new()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic(magic.to_vec()));
    }
    let n = read_u32(&mut r)?;
    if n as usize != DIMS.len() {
        return Err(CheckpointError::BadDims { got: vec![n], expected: DIMS.to_vec() });
    }
    let dims = (0..n).map(|_| read_u32(&mut r)).collect::<io::Result<Vec<_>>>()?;
    if dims != DIMS {
        return Err(CheckpointError::BadDims { got: dims, expected: DIMS.to_vec() });
    }
    let mut data = Vec::with_capacity(PARAM_COUNT);
    let mut b = [0u8; 8];
    for i in 0..PARAM_COUNT {
        r.read_exact(&mut b)?;
        let v = f64::from_le_bytes(b);
        if !v.is_finite() {
            return Err(CheckpointError::NonFinite(i));
        }
        data.push(v);
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(CheckpointError::TrailingBytes);
    }
    Ok(NetworkParams::from_flat(data).expect("length checked above"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let p = NetworkParams::init(&mut seeded_rng(11));
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        assert_eq!(buf.len(), 7 + 4 + 5 * 4 + PARAM_COUNT * 8);
        assert_eq!(&buf[..7], b"AIRPPO1");
        let q = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn rejects_corruption() {
        let p = NetworkParams::zeros();
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(&bad[..]), Err(CheckpointError::BadMagic(_))));

        let mut bad = buf.clone();
        bad[11] = 32; // first dim 3 -> 32
        assert!(matches!(read_checkpoint(&bad[..]), Err(CheckpointError::BadDims { .. })));

        let short = &buf[..buf.len() - 3];
        assert!(matches!(read_checkpoint(short), Err(CheckpointError::Io(_))));

        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(read_checkpoint(&long[..]), Err(CheckpointError::TrailingBytes)));

        assert!(matches!(read_checkpoint(&b"AIR"[..]), Err(CheckpointError::BadMagic(_))));
    }
}
