//! Binary model checkpoints.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic        8 bytes   "JCASCKPT"
//! version      u32       1
//! messages     u32
//! antennas     u32
//! max_targets  u32
//! encoding     u8        0 counting, 1 one-hot
//! labeling     u8        0 natural binary
//! spacing      f64       element spacing in wavelengths
//! radar_gain   f64
//! offset       f64       counting logit offset
//! shift_len    u32
//! shift        f64 * shift_len   one-hot probability shift
//! 5 x net, in the order encoder, beamformer, decoder, detector, angle:
//!   kind       u8
//!   hidden     u8        hidden activation tag
//!   output     u8        output transform tag
//!   layers     u32       number of widths
//!   widths     u32 * layers
//!   params     u64       parameter count
//!   values     f64 * params, layer by layer, weights row-major then biases
//! ```

use std::path::Path;

use jcas_core::channel::ArrayConfig;
use jcas_core::detection::{DetectionEncoding, LogitOffset};
use jcas_core::model::{JcasModel, ModelShape, NetKind};
use jcas_core::nn::{Activation, MlpNet, OutputTransform};

use crate::error::CliError;

pub const MAGIC: &[u8; 8] = b"JCASCKPT";
pub const VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Checkpoint(msg.into())
}

pub fn encode(model: &JcasModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [model.shape.messages, model.shape.antennas, model.shape.max_targets] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.push(model.shape.encoding.tag());
    out.push(model.labeling.tag());
    for v in [model.array.spacing, model.radar_gain, model.offset.0] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(model.onehot_shift.len() as u32).to_le_bytes());
    for v in &model.onehot_shift {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for kind in NetKind::ALL {
        let net = model.net(kind);
        out.push(kind.tag());
        out.push(net.hidden_activation().tag());
        out.push(net.output_transform().tag());
        out.extend_from_slice(&(net.widths().len() as u32).to_le_bytes());
        for &w in net.widths() {
            out.extend_from_slice(&(w as u32).to_le_bytes());
        }
        out.extend_from_slice(&(net.param_count() as u64).to_le_bytes());
        for p in net.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| bad("truncated file"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CliError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CliError> {
        if n > self.buf.len() / 8 {
            return Err(bad("truncated file"));
        }
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn decode(bytes: &[u8]) -> Result<JcasModel, CliError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let messages = r.u32()? as usize;
    let antennas = r.u32()? as usize;
    let max_targets = r.u32()? as usize;
    let encoding = DetectionEncoding::from_tag(r.u8()?).ok_or_else(|| bad("unknown encoding tag"))?;
    if r.u8()? != 0 {
        return Err(bad("unknown bit labeling tag"));
    }
    let spacing = r.f64()?;
    let radar_gain = r.f64()?;
    let offset = r.f64()?;
    let shift_len = r.u32()? as usize;
    let shift = r.f64s(shift_len)?;
    let shape = ModelShape {
        messages,
        antennas,
        max_targets,
        encoding,
    };
    let mut nets = Vec::with_capacity(5);
    for expected in NetKind::ALL {
        let kind = NetKind::from_tag(r.u8()?).ok_or_else(|| bad("unknown net tag"))?;
        if kind != expected {
            return Err(bad(format!("expected {} net, found {}", expected.name(), kind.name())));
        }
        let hidden = Activation::from_tag(r.u8()?).ok_or_else(|| bad("unknown activation tag"))?;
        let output = OutputTransform::from_tag(r.u8()?).ok_or_else(|| bad("unknown output transform tag"))?;
        let layers = r.u32()? as usize;
        if layers > 64 {
            return Err(bad(format!("implausible layer count {layers}")));
        }
        let widths = (0..layers).map(|_| r.u32().map(|w| w as usize)).collect::<Result<Vec<_>, _>>()?;
        let count = usize::try_from(r.u64()?).map_err(|_| bad("parameter count overflow"))?;
        let params = r.f64s(count)?;
        nets.push(MlpNet::from_params(&widths, hidden, output, params)?);
    }
    if r.pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let nets: [MlpNet; 5] = nets.try_into().expect("five nets");
    let mut model = JcasModel::from_nets(shape, ArrayConfig::new(antennas, spacing)?, nets)?;
    if shift.len() != max_targets + 1 {
        return Err(bad(format!("one-hot shift has {} entries, expected {}", shift.len(), max_targets + 1)));
    }
    model.onehot_shift = shift;
    model.offset = LogitOffset(offset);
    model.radar_gain = radar_gain;
    Ok(model)
}

pub fn save(model: &JcasModel, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, encode(model)).map_err(|e| CliError::io(path, e))
}

pub fn load(path: &Path) -> Result<JcasModel, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        CliError::Checkpoint(msg) => CliError::Checkpoint(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use jcas_core::numerics::{SimRng, Stream};

    fn model(encoding: DetectionEncoding) -> JcasModel {
        let shape = ModelShape {
            messages: 8,
            antennas: 16,
            max_targets: 3,
            encoding,
        };
        let mut rng = SimRng::new(3, Stream::Init);
        let mut m = JcasModel::new(shape, ArrayConfig::default(), &mut rng).unwrap();
        m.offset = LogitOffset(1.25);
        m.radar_gain = 0.7;
        m.onehot_shift = vec![-0.1, 0.05, 0.03, 0.02];
        m
    }

    #[test]
    fn round_trip_is_exact() {
        for enc in [DetectionEncoding::Counting, DetectionEncoding::OneHot] {
            let m = model(enc);
            let back = decode(&encode(&m)).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&model(DetectionEncoding::Counting));
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(bytes[42..50].try_into().unwrap()), 1.25);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = encode(&model(DetectionEncoding::Counting));
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(decode(&magic).is_err());
        let mut version = bytes;
        version[8] = 2;
        assert!(decode(&version).unwrap_err().to_string().contains("version"));
        assert!(decode(&[]).is_err());
    }
}
