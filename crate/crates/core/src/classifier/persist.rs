//! `SVM2` model files.
//!
//! Layout, all little-endian: magic `SVM2`, version u16, dim u32, class count
//! u32, then gamma, coef0 and c as f64, the standardization mean and stddev
//! vectors, and per class: support-vector count u32, the flattened support
//! vectors, the dual coefficients and the bias.

use std::io::{Read, Write};

use ndarray::Array2;

use super::{BinaryMachine, QuadraticKernel, Standardizer, SvmModel};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SVM2";
const VERSION: u16 = 1;

fn put_f64s<W: Write>(out: &mut W, values: impl IntoIterator<Item = f64>) -> std::io::Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_model<W: Write>(model: &SvmModel, mut out: W) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(model.dim() as u32).to_le_bytes())?;
    out.write_all(&(model.machines.len() as u32).to_le_bytes())?;
    put_f64s(&mut out, [model.kernel.gamma, model.kernel.coef0, model.c])?;
    put_f64s(&mut out, model.standardizer.mean.iter().copied())?;
    put_f64s(&mut out, model.standardizer.std.iter().copied())?;
    for m in &model.machines {
        out.write_all(&(m.n_support() as u32).to_le_bytes())?;
        put_f64s(&mut out, m.support.iter().copied())?;
        put_f64s(&mut out, m.coef.iter().copied())?;
        put_f64s(&mut out, [m.bias])?;
    }
    out.flush()
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::Data(format!("truncated model file reading {what}: {e}")))?;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.bytes(what)?) as usize)
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(what)?))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64(what)).collect()
    }
}

pub fn read_model<R: Read>(input: R) -> Result<SvmModel> {
    let mut r = Reader { inner: input };
    if &r.bytes::<4>("magic")? != MAGIC {
        return Err(Error::Data("not an SVM model file (bad magic)".into()));
    }
    let version = u16::from_le_bytes(r.bytes("version")?);
    if version != VERSION {
        return Err(Error::Data(format!("unsupported model version {version}")));
    }
    let dim = r.u32("dim")?;
    let classes = r.u32("class count")?;
    if classes != 3 {
        return Err(Error::Data(format!(
            "model has {classes} classes, expected 3"
        )));
    }
    let kernel = QuadraticKernel {
        gamma: r.f64("gamma")?,
        coef0: r.f64("coef0")?,
    };
    let c = r.f64("c")?;
    let standardizer = Standardizer {
        mean: r.f64s(dim, "mean")?,
        std: r.f64s(dim, "stddev")?,
    };
    let mut machines = Vec::with_capacity(classes);
    for k in 0..classes {
        let n_sv = r.u32("support count")?;
        let flat = r.f64s(n_sv * dim, "support vectors")?;
        let support = Array2::from_shape_vec((n_sv, dim), flat)
            .map_err(|e| Error::Data(format!("class {k} support vectors: {e}")))?;
        let coef = r.f64s(n_sv, "dual coefficients")?;
        let bias = r.f64("bias")?;
        machines.push(BinaryMachine {
            support,
            coef,
            bias,
        });
    }
    Ok(SvmModel {
        kernel,
        c,
        standardizer,
        machines,
    })
}
