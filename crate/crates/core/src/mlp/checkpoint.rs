//! Flat binary checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `ACTNORM1` |
//! | 4×4 | `u32` depth, width, input_dim, classes |
//! | 4 + n | `u32` activation-name length, then UTF-8 name |
//! | 1 + 8 | init tag (`0` orthogonal, `1` gaussian) and `f64` σ_w (0 for orthogonal) |
//! | … | `f64` values, each matrix row-major: projection, then per layer `W_l` and `b_l`, then head and head bias |

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use super::model::{InitScheme, MlpModel};
use crate::error::{Error, Result};
use crate::normalizer;

pub const MAGIC: &[u8; 8] = b"ACTNORM1";
const MAX_NAME: usize = 256;
const MAX_DIM: u32 = 1 << 16;

fn io_error(e: std::io::Error) -> Error {
    Error::invalid(format!("checkpoint I/O: {e}"))
}

fn write_matrix<W: Write>(out: &mut W, m: &DMatrix<f64>) -> Result<()> {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.write_all(&m[(r, c)].to_le_bytes()).map_err(io_error)?;
        }
    }
    Ok(())
}

pub fn save<W: Write>(model: &MlpModel, mut out: W) -> Result<()> {
    let mut header = Vec::with_capacity(64);
    header.extend_from_slice(MAGIC);
    for dim in [model.depth(), model.width(), model.input_dim(), model.classes()] {
        header.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    let name = model.activation.name().as_bytes();
    header.extend_from_slice(&(name.len() as u32).to_le_bytes());
    header.extend_from_slice(name);
    let (tag, sigma) = match model.init {
        InitScheme::Orthogonal => (0u8, 0.0),
        InitScheme::Gaussian { sigma_w } => (1u8, sigma_w),
    };
    header.push(tag);
    header.extend_from_slice(&f64::to_le_bytes(sigma));
    out.write_all(&header).map_err(io_error)?;

    write_matrix(&mut out, &model.projection)?;
    for (w, b) in model.weights.iter().zip(&model.biases) {
        write_matrix(&mut out, w)?;
        write_matrix(&mut out, &DMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
    }
    write_matrix(&mut out, &model.head)?;
    write_matrix(&mut out, &DMatrix::from_column_slice(model.head_bias.len(), 1, model.head_bias.as_slice()))?;
    out.flush().map_err(io_error)
}

struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn bytes(&mut self, n: usize, what: &str) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf).map_err(|_| Error::Format {
            offset: self.offset,
            detail: format!("truncated while reading {what}"),
        })?;
        self.offset += n as u64;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.bytes(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let b = self.bytes(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    }

    fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<DMatrix<f64>> {
        let start = self.offset;
        let raw = self.bytes(rows * cols * 8, what)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format {
                offset: start + 8 * i as u64,
                detail: format!("non-finite value in {what}"),
            });
        }
        Ok(DMatrix::from_row_slice(rows, cols, &values))
    }

    fn fail(&self, at: u64, detail: impl Into<String>) -> Error {
        Error::Format {
            offset: at,
            detail: detail.into(),
        }
    }
}

pub fn load<R: Read>(input: R) -> Result<MlpModel> {
    let mut cur = Cursor {
        inner: input,
        offset: 0,
    };
    if cur.bytes(8, "magic")? != MAGIC {
        return Err(cur.fail(0, "bad magic bytes"));
    }
    let mut dims = [0usize; 4];
    for (i, (d, what)) in dims.iter_mut().zip(["depth", "width", "input_dim", "classes"]).enumerate() {
        let v = cur.u32(what)?;
        if v == 0 || v > MAX_DIM {
            return Err(cur.fail(8 + 4 * i as u64, format!("{what} {v} out of range")));
        }
        *d = v as usize;
    }
    let [depth, width, input_dim, classes] = dims;

    let name_at = cur.offset;
    let len = cur.u32("name length")? as usize;
    if len > MAX_NAME {
        return Err(cur.fail(name_at, format!("activation name length {len} too large")));
    }
    let name = String::from_utf8(cur.bytes(len, "activation name")?)
        .map_err(|_| cur.fail(name_at + 4, "activation name is not UTF-8"))?;
    let activation = normalizer::resolve_activation(&name).map_err(|e| cur.fail(name_at + 4, e.to_string()))?;

    let tag_at = cur.offset;
    let tag = cur.bytes(1, "init tag")?[0];
    let sigma = cur.f64("sigma_w")?;
    let init = match tag {
        0 => InitScheme::Orthogonal,
        1 if sigma.is_finite() && sigma > 0.0 => InitScheme::Gaussian { sigma_w: sigma },
        _ => return Err(cur.fail(tag_at, format!("invalid init tag {tag} / sigma_w {sigma}"))),
    };

    let projection = cur.matrix(width, input_dim, "projection")?;
    let mut weights = Vec::with_capacity(depth);
    let mut biases = Vec::with_capacity(depth);
    for l in 1..=depth {
        weights.push(cur.matrix(width, width, &format!("W_{l}"))?);
        biases.push(DVector::from_column_slice(cur.matrix(width, 1, &format!("b_{l}"))?.as_slice()));
    }
    let head = cur.matrix(classes, width, "head")?;
    let head_bias = DVector::from_column_slice(cur.matrix(classes, 1, "head bias")?.as_slice());

    let mut probe = [0u8; 1];
    if cur.inner.read(&mut probe).map_err(io_error)? != 0 {
        return Err(cur.fail(cur.offset, "trailing bytes after checkpoint"));
    }

    Ok(MlpModel {
        activation,
        init,
        projection,
        weights,
        biases,
        head,
        head_bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MlpModel {
        let mut m = MlpModel::init_named(2, 4, 3, 2, "normalized_tanh", InitScheme::Gaussian { sigma_w: 1.5 }, 9)
            .unwrap();
        m.biases[1][2] = 0.25;
        m
    }

    #[test]
    fn round_trip() {
        let m = sample();
        let mut buf = Vec::new();
        save(&m, &mut buf).unwrap();
        let back = load(buf.as_slice()).unwrap();
        assert_eq!(back.activation.name(), "normalized_tanh");
        assert_eq!(back.init, m.init);
        assert_eq!(back.projection, m.projection);
        assert_eq!(back.weights, m.weights);
        assert_eq!(back.biases, m.biases);
        assert_eq!(back.head, m.head);
        assert_eq!(back.head_bias, m.head_bias);
    }

    #[test]
    fn truncation_reports_offset() {
        let mut buf = Vec::new();
        save(&sample(), &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        match load(buf.as_slice()).unwrap_err() {
            Error::Format { offset, .. } => assert!(offset > 30),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_magic() {
        let err = load(&b"NOTAMODEL..........."[..]).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, .. }));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut buf = Vec::new();
        save(&sample(), &mut buf).unwrap();
        buf.push(0);
        assert!(matches!(load(buf.as_slice()).unwrap_err(), Error::Format { .. }));
    }
}
