//! Binary weights format.
//!
//! `"TFDQ"`, a little-endian `u16` version, then one record per layer until
//! end of file. A record is a `u8` kind tag, a `u32` dimension count, that
//! many `u32` dimensions, and the layer's values as little-endian `f32`.
//! The first record (tag 0) carries the input shape and no data.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{BatchNorm, Conv2d, Dense, Layer, QNetwork};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const WEIGHTS_MAGIC: [u8; 4] = *b"TFDQ";
pub const WEIGHTS_VERSION: u16 = 1;

const TAG_INPUT: u8 = 0;
const TAG_DENSE: u8 = 1;
const TAG_CONV: u8 = 2;
const TAG_RELU: u8 = 3;
const TAG_BN: u8 = 4;
const TAG_FLATTEN: u8 = 5;

fn put_record<T: Scalar>(out: &mut Vec<u8>, tag: u8, dims: &[usize], values: &[&[T]]) {
    out.push(tag);
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in values.iter().flat_map(|s| s.iter()) {
        out.extend_from_slice(&v.to_le_f32_bytes());
    }
}

/// Serialise to bytes. Values are stored as `f32` whatever `T` is.
pub fn write_weights<T: Scalar>(net: &QNetwork<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&WEIGHTS_MAGIC);
    out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    put_record::<T>(&mut out, TAG_INPUT, net.input_shape(), &[]);
    for layer in net.layers() {
        match layer {
            Layer::Dense(d) => put_record(&mut out, TAG_DENSE, &[d.n_out, d.n_in], &[&d.params]),
            Layer::Conv2d(c) => {
                put_record(&mut out, TAG_CONV, &[c.c_out, c.c_in, c.kernel, c.kernel, c.stride, c.pad], &[&c.params])
            }
            Layer::BatchNorm(b) => {
                put_record(&mut out, TAG_BN, &[b.channels], &[&b.params, &b.running_mean, &b.running_var])
            }
            Layer::Relu => put_record::<T>(&mut out, TAG_RELU, &[], &[]),
            Layer::Flatten => put_record::<T>(&mut out, TAG_FLATTEN, &[], &[]),
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated(format!("{what} at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn values<T: Scalar>(&mut self, n: usize, what: &str) -> Result<Vec<T>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::Format("size overflow".into()))?, what)?;
        let vals: Vec<T> = bytes.chunks_exact(4).map(|c| T::from_le_f32_bytes([c[0], c[1], c[2], c[3]])).collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite value in {what}")));
        }
        Ok(vals)
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn expect_dims(kind: &str, dims: &[usize], n: usize) -> Result<()> {
    if dims.len() != n {
        return Err(Error::Format(format!("{kind} record has {} dims, expected {n}", dims.len())));
    }
    Ok(())
}

/// Parse bytes produced by [`write_weights`].
pub fn read_weights<T: Scalar>(bytes: &[u8]) -> Result<QNetwork<T>> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != WEIGHTS_MAGIC {
        return Err(Error::BadMagic([magic[0], magic[1], magic[2], magic[3]]));
    }
    let v = cur.take(2, "version")?;
    let version = u16::from_le_bytes([v[0], v[1]]);
    if version != WEIGHTS_VERSION {
        return Err(Error::Version(version));
    }

    let mut input_shape = None;
    let mut layers = Vec::new();
    while !cur.done() {
        let tag = cur.take(1, "layer tag")?[0];
        let ndims = cur.u32("dimension count")?;
        if ndims > 16 {
            return Err(Error::Format(format!("implausible dimension count {ndims}")));
        }
        let dims = (0..ndims).map(|_| cur.u32("dimension")).collect::<Result<Vec<_>>>()?;
        if input_shape.is_none() && tag != TAG_INPUT {
            return Err(Error::Format("missing input record".into()));
        }
        match tag {
            TAG_INPUT if input_shape.is_none() => input_shape = Some(dims),
            TAG_DENSE => {
                expect_dims("dense", &dims, 2)?;
                let (n_out, n_in) = (dims[0], dims[1]);
                let params = cur.values(n_out * n_in + n_out, "dense values")?;
                layers.push(Layer::Dense(Dense { n_in, n_out, params }));
            }
            TAG_CONV => {
                expect_dims("conv2d", &dims, 6)?;
                if dims[2] != dims[3] {
                    return Err(Error::Format("non-square kernels are not supported".into()));
                }
                let (c_out, c_in, k) = (dims[0], dims[1], dims[2]);
                let params = cur.values(c_out * c_in * k * k + c_out, "conv2d values")?;
                layers.push(Layer::Conv2d(Conv2d { c_in, c_out, kernel: k, stride: dims[4], pad: dims[5], params }));
            }
            TAG_BN => {
                expect_dims("batchnorm", &dims, 1)?;
                let c = dims[0];
                let mut bn = BatchNorm::new(c);
                bn.params = cur.values(2 * c, "batchnorm affine")?;
                bn.running_mean = cur.values(c, "batchnorm mean")?;
                bn.running_var = cur.values(c, "batchnorm variance")?;
                layers.push(Layer::BatchNorm(bn));
            }
            TAG_RELU => layers.push(Layer::Relu),
            TAG_FLATTEN => layers.push(Layer::Flatten),
            other => return Err(Error::Format(format!("unknown layer tag {other}"))),
        }
    }
    let input_shape = input_shape.ok_or_else(|| Error::Truncated("no layer records".into()))?;
    QNetwork::from_layers(input_shape, layers)
}

pub fn save_weights<T: Scalar>(net: &QNetwork<T>, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&write_weights(net)).map_err(|e| Error::io(path, e))
}

pub fn load_weights<T: Scalar>(path: &Path) -> Result<QNetwork<T>> {
    let mut bytes = Vec::new();
    fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(path, e))?;
    read_weights(&bytes).map_err(|e| e.context(path.display().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = stream_rng(9, "t", 0);
        let net = QNetwork::<f32>::conv([2, 6, 6], &[3, 3], true, 8, 6, &mut rng);
        let back: QNetwork<f32> = read_weights(&write_weights(&net)).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn bad_magic_and_version() {
        let mut rng = stream_rng(9, "t", 0);
        let net = QNetwork::<f32>::mlp(2, &[3], 6, &mut rng);
        let mut bytes = write_weights(&net);
        bytes[4] = 9;
        assert!(matches!(read_weights::<f32>(&bytes), Err(Error::Version(9))));
        bytes[0..4].copy_from_slice(b"XXXX");
        let err = read_weights::<f32>(&bytes).unwrap_err();
        assert!(err.to_string().contains("bad magic"));
    }

    #[test]
    fn truncated_and_mismatched() {
        let mut rng = stream_rng(9, "t", 0);
        let net = QNetwork::<f32>::mlp(2, &[3], 6, &mut rng);
        let bytes = write_weights(&net);
        assert!(matches!(read_weights::<f32>(&bytes[..bytes.len() - 3]), Err(Error::Truncated(_))));

        // Second dense layer expects 4 inputs but receives 3.
        let mut out = Vec::new();
        out.extend_from_slice(b"TFDQ");
        out.extend_from_slice(&1u16.to_le_bytes());
        put_record::<f32>(&mut out, TAG_INPUT, &[2], &[]);
        put_record::<f32>(&mut out, TAG_DENSE, &[3, 2], &[&[0.0; 9]]);
        put_record::<f32>(&mut out, TAG_DENSE, &[6, 4], &[&[0.0; 30]]);
        assert!(read_weights::<f32>(&out).is_err());
    }
}
