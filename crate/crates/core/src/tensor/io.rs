//! Binary tensor files and CSV factor matrices.
//!
//! Tensor layout: `b"NTEN"`, version byte `0x01`, `u32` order, `order` x `u64`
//! extents, then the row-major values as little-endian `f64`. All integers are
//! little-endian.

use std::io::{Read, Write};

use super::{DenseTensor, Matrix};
use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 4] = b"NTEN";
const TENSOR_VERSION: u8 = 0x01;

pub fn write_tensor<W: Write>(mut w: W, t: &DenseTensor) -> Result<()> {
    w.write_all(TENSOR_MAGIC)?;
    w.write_all(&[TENSOR_VERSION])?;
    w.write_all(&(t.order() as u32).to_le_bytes())?;
    for &d in t.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in t.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<DenseTensor> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != TENSOR_MAGIC {
        return Err(Error::Parse("bad tensor magic".into()));
    }
    let mut version = [0u8; 1];
    r.read_exact(&mut version)?;
    if version[0] != TENSOR_VERSION {
        return Err(Error::Parse(format!(
            "unsupported tensor version {:#04x}",
            version[0]
        )));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let order = u32::from_le_bytes(b4) as usize;
    if order < 2 {
        return Err(Error::Parse(format!("tensor order {order} < 2")));
    }
    let mut dims = Vec::with_capacity(order);
    let mut b8 = [0u8; 8];
    for _ in 0..order {
        r.read_exact(&mut b8)?;
        dims.push(
            usize::try_from(u64::from_le_bytes(b8))
                .map_err(|_| Error::Parse("extent overflows usize".into()))?,
        );
    }
    let total = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Parse("element count overflows".into()))?;
    let mut values = Vec::with_capacity(total);
    for _ in 0..total {
        r.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    DenseTensor::new(dims, values)
}

/// Write a matrix as CSV with header `c1,...,cR`.
pub fn write_matrix_csv<W: Write>(w: W, m: &Matrix) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record((1..=m.ncols()).map(|c| format!("c{c}")))?;
    for i in 0..m.nrows() {
        out.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: Read>(r: R) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let cols = rdr.headers()?.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != cols {
            return Err(Error::Parse(format!(
                "row {} has {} fields, header has {cols}",
                rows + 1,
                rec.len()
            )));
        }
        for field in rec.iter() {
            data.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{field:?}: {e}")))?,
            );
        }
        rows += 1;
    }
    Ok(Matrix::from_row_slice(rows, cols, &data))
}
