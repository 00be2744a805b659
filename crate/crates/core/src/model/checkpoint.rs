//! Binary checkpoint container.
//!
//! Layout (all integers and reals little-endian):
//!
//! ```text
//! magic      8 bytes  "HOPNETCK"
//! version    u32      = CHECKPOINT_VERSION
//! config     u32 length + UTF-8 JSON of ModelConfig
//! tensors    u64 count, then per tensor:
//!              u32 length + UTF-8 name, u64 rows, u64 cols, rows*cols f64 (row-major)
//! normalizers u64 count (= 7: five feature ranks, node target, object target), then per normalizer:
//!              f64 count, u64 dim, dim f64 mean, dim f64 m2
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::network::{HopNet, ModelConfig};
use crate::binio::{BinReader, BinWriter, FormatError};
use crate::features::Normalizer;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HOPNETCK";
pub const CHECKPOINT_VERSION: u32 = 1;

fn write_normalizer<W: Write>(w: &mut BinWriter<W>, n: &Normalizer) -> std::io::Result<()> {
    w.f64(n.count)?;
    w.u64(n.dim() as u64)?;
    w.f64s(&n.mean)?;
    w.f64s(&n.m2)
}

fn read_normalizer<R: Read>(r: &mut BinReader<R>) -> Result<Normalizer, FormatError> {
    let count = r.f64()?;
    let dim = r.len("normalizer")?;
    let mean = r.f64s(dim)?;
    let m2 = r.f64s(dim)?;
    Ok(Normalizer { count, mean, m2 })
}

impl HopNet {
    pub fn write_checkpoint<W: Write>(&self, out: W) -> Result<(), FormatError> {
        let mut w = BinWriter::new(out);
        w.bytes(CHECKPOINT_MAGIC)?;
        w.u32(CHECKPOINT_VERSION)?;
        let cfg = serde_json::to_string(&self.config).map_err(|e| FormatError::Corrupt(e.to_string()))?;
        w.string(&cfg)?;
        w.u64(self.params.tensors.len() as u64)?;
        for (name, t) in self.params.names.iter().zip(&self.params.tensors) {
            w.string(name)?;
            w.u64(t.nrows() as u64)?;
            w.u64(t.ncols() as u64)?;
            t.iter().try_for_each(|&v| w.f64(v))?;
        }
        let norms = &self.normalizers;
        let all: Vec<&Normalizer> = norms
            .features
            .ranks
            .iter()
            .chain([&norms.node_target, &norms.object_target])
            .collect();
        w.u64(all.len() as u64)?;
        for n in all {
            write_normalizer(&mut w, n)?;
        }
        w.into_inner().flush()?;
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(input: R) -> Result<Self, FormatError> {
        let mut r = BinReader::new(input);
        r.header(CHECKPOINT_MAGIC, "checkpoint", CHECKPOINT_VERSION)?;
        let cfg = r.string()?;
        let config: ModelConfig =
            serde_json::from_str(&cfg).map_err(|e| FormatError::Corrupt(format!("config block: {e}")))?;
        if config.hidden == 0 || config.blocks == 0 || config.hidden > 1 << 16 || config.blocks > 1 << 10 {
            return Err(FormatError::Corrupt("config block: implausible sizes".into()));
        }
        let mut net = HopNet::new(config, 0);
        let count = r.len("tensor table")?;
        if count != net.params.tensors.len() {
            return Err(FormatError::Corrupt(format!(
                "expected {} tensors for this config, found {count}",
                net.params.tensors.len()
            )));
        }
        for i in 0..count {
            let name = r.string()?;
            let rows = r.len("tensor")?;
            let cols = r.len("tensor")?;
            let expected = &net.params.tensors[i];
            if name != net.params.names[i] || (rows, cols) != expected.dim() {
                return Err(FormatError::Corrupt(format!(
                    "tensor {i}: found {name} {rows}x{cols}, expected {} {:?}",
                    net.params.names[i],
                    expected.dim()
                )));
            }
            let data = r.f64s(rows * cols)?;
            net.params.tensors[i] = Array2::from_shape_vec((rows, cols), data).expect("shape checked");
        }
        let n = r.len("normalizer table")?;
        let ranks = net.normalizers.features.ranks.len();
        if n != ranks + 2 {
            return Err(FormatError::Corrupt(format!("expected {} normalizers, found {n}", ranks + 2)));
        }
        let mut loaded: Vec<Normalizer> = (0..n).map(|_| read_normalizer(&mut r)).collect::<Result<_, _>>()?;
        let object_target = loaded.pop().expect("len checked");
        let node_target = loaded.pop().expect("len checked");
        for (slot, l) in net.normalizers.features.ranks.iter().zip(&loaded) {
            if slot.dim() != l.dim() {
                return Err(FormatError::Corrupt("normalizer width does not match config".into()));
            }
        }
        if node_target.dim() != 3 || object_target.dim() != 3 {
            return Err(FormatError::Corrupt("target normalizers must be 3-wide".into()));
        }
        net.normalizers.features.ranks = loaded;
        net.normalizers.node_target = node_target;
        net.normalizers.object_target = object_target;
        r.finish()?;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<(), FormatError> {
        self.write_checkpoint(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        Self::read_checkpoint(BufReader::new(File::open(path)?))
    }
}
