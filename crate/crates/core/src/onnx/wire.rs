//! Protocol-buffers wire format: just enough to walk ONNX messages.

use super::OnnxError;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Field<'a> {
    Varint(u64),
    Fixed64(u64),
    Bytes(&'a [u8]),
    Fixed32(u32),
}

impl<'a> Field<'a> {
    pub(crate) fn as_u64(self) -> Result<u64, OnnxError> {
        match self {
            Field::Varint(v) | Field::Fixed64(v) => Ok(v),
            Field::Fixed32(v) => Ok(u64::from(v)),
            Field::Bytes(_) => Err(OnnxError::Decode("expected scalar field".into())),
        }
    }

    pub(crate) fn as_i64(self) -> Result<i64, OnnxError> {
        self.as_u64().map(|v| v as i64)
    }

    pub(crate) fn as_f32(self) -> Result<f32, OnnxError> {
        match self {
            Field::Fixed32(v) => Ok(f32::from_bits(v)),
            _ => Err(OnnxError::Decode("expected fixed32 float".into())),
        }
    }

    pub(crate) fn as_bytes(self) -> Result<&'a [u8], OnnxError> {
        match self {
            Field::Bytes(b) => Ok(b),
            _ => Err(OnnxError::Decode("expected length-delimited field".into())),
        }
    }

    pub(crate) fn as_string(self) -> Result<String, OnnxError> {
        Ok(String::from_utf8_lossy(self.as_bytes()?).into_owned())
    }

    /// Repeated int64 fields may arrive packed or one element per field.
    pub(crate) fn push_i64s(self, out: &mut Vec<i64>) -> Result<(), OnnxError> {
        match self {
            Field::Bytes(b) => {
                let mut r = Reader::new(b);
                while !r.is_empty() {
                    out.push(r.varint()? as i64);
                }
                Ok(())
            }
            other => {
                out.push(other.as_i64()?);
                Ok(())
            }
        }
    }

    pub(crate) fn push_f32s(self, out: &mut Vec<f32>) -> Result<(), OnnxError> {
        match self {
            Field::Bytes(b) => {
                if b.len() % 4 != 0 {
                    return Err(OnnxError::Decode("packed float length not a multiple of 4".into()));
                }
                out.extend(b.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])));
                Ok(())
            }
            other => {
                out.push(other.as_f32()?);
                Ok(())
            }
        }
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    fn truncated() -> OnnxError {
        OnnxError::Decode("truncated protobuf message".into())
    }

    pub(crate) fn varint(&mut self) -> Result<u64, OnnxError> {
        let mut value = 0u64;
        for shift in (0..64).step_by(7) {
            let byte = *self.buf.get(self.pos).ok_or_else(Self::truncated)?;
            self.pos += 1;
            value |= u64::from(byte & 0x7F) << shift;
            if byte & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(OnnxError::Decode("varint longer than 10 bytes".into()))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], OnnxError> {
        let end = self.pos.checked_add(n).ok_or_else(Self::truncated)?;
        let s = self.buf.get(self.pos..end).ok_or_else(Self::truncated)?;
        self.pos = end;
        Ok(s)
    }

    /// Next `(field number, value)` pair, or `None` at end of buffer.
    pub(crate) fn next_field(&mut self) -> Result<Option<(u32, Field<'a>)>, OnnxError> {
        if self.is_empty() {
            return Ok(None);
        }
        let key = self.varint()?;
        let number = (key >> 3) as u32;
        let field = match key & 7 {
            0 => Field::Varint(self.varint()?),
            1 => {
                let b = self.take(8)?;
                Field::Fixed64(u64::from_le_bytes(b.try_into().expect("8 bytes")))
            }
            2 => {
                let len = self.varint()? as usize;
                Field::Bytes(self.take(len)?)
            }
            5 => {
                let b = self.take(4)?;
                Field::Fixed32(u32::from_le_bytes(b.try_into().expect("4 bytes")))
            }
            wt => return Err(OnnxError::Decode(format!("unsupported wire type {wt}"))),
        };
        Ok(Some((number, field)))
    }
}

/// Append-only protobuf encoder.
#[derive(Default)]
pub(crate) struct Writer {
    pub(crate) buf: Vec<u8>,
}

impl Writer {
    fn varint(&mut self, mut v: u64) {
        while v >= 0x80 {
            self.buf.push((v as u8) | 0x80);
            v >>= 7;
        }
        self.buf.push(v as u8);
    }

    fn key(&mut self, number: u32, wire_type: u8) {
        self.varint((u64::from(number) << 3) | u64::from(wire_type));
    }

    pub(crate) fn int(&mut self, number: u32, v: i64) {
        self.key(number, 0);
        self.varint(v as u64);
    }

    pub(crate) fn float(&mut self, number: u32, v: f32) {
        self.key(number, 5);
        self.buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }

    pub(crate) fn bytes(&mut self, number: u32, b: &[u8]) {
        self.key(number, 2);
        self.varint(b.len() as u64);
        self.buf.extend_from_slice(b);
    }

    pub(crate) fn string(&mut self, number: u32, s: &str) {
        self.bytes(number, s.as_bytes());
    }

    pub(crate) fn message(&mut self, number: u32, m: Writer) {
        self.bytes(number, &m.buf);
    }

    pub(crate) fn packed_ints(&mut self, number: u32, vs: &[i64]) {
        let mut inner = Writer::default();
        for &v in vs {
            inner.varint(v as u64);
        }
        self.bytes(number, &inner.buf);
    }
}
