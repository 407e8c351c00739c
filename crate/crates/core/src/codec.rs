//! Compact serde encodings for the on-disk record format.
//!
//! Binary payloads and descriptor matrices are stored as base64 so that the
//! log files stay line-oriented JSON while floats round-trip bit-exactly.

pub(crate) mod bytes {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text).map_err(serde::de::Error::custom)
    }
}

/// A list of f64 vectors as `{"dims": [n, ...], "data": base64(le f64...)}`.
pub(crate) mod vectors {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Packed {
        dims: Vec<u32>,
        data: String,
    }

    pub fn serialize<S: Serializer>(vectors: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let mut raw = Vec::with_capacity(vectors.iter().map(|v| v.len() * 8).sum());
        for v in vectors {
            for x in v {
                raw.extend_from_slice(&x.to_le_bytes());
            }
        }
        Packed {
            dims: vectors.iter().map(|v| v.len() as u32).collect(),
            data: STANDARD.encode(raw),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let packed = Packed::deserialize(d)?;
        let raw = STANDARD.decode(packed.data).map_err(serde::de::Error::custom)?;
        let total: usize = packed.dims.iter().map(|&n| n as usize).sum();
        if raw.len() != total * 8 {
            return Err(serde::de::Error::custom("vector payload length mismatch"));
        }
        let mut values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
        Ok(packed
            .dims
            .iter()
            .map(|&n| values.by_ref().take(n as usize).collect())
            .collect())
    }
}
