//! Flat little-endian parameter files.
//!
//! Layout: `u32` count of layer sizes, then each size as `u32`, then every
//! weight of every layer (row-major, layer order), then every bias (layer
//! order), all as `f64`.

use std::io::{Read, Write};

use super::NetworkParams;
use crate::error::{Error, Result};

pub fn write_params<W: Write>(params: &NetworkParams, mut out: W) -> std::io::Result<()> {
    let sizes = params.layer_sizes();
    out.write_all(&(sizes.len() as u32).to_le_bytes())?;
    for s in sizes {
        out.write_all(&(s as u32).to_le_bytes())?;
    }
    for layer in params.layers() {
        for w in &layer.weights {
            out.write_all(&w.to_le_bytes())?;
        }
    }
    for layer in params.layers() {
        for b in &layer.biases {
            out.write_all(&b.to_le_bytes())?;
        }
    }
    Ok(())
}

fn corrupt(message: impl Into<String>) -> Error {
    Error::Checkpoint {
        path: Default::default(),
        message: message.into(),
    }
}

/// Parses a parameter file, rejecting truncated or trailing data.
pub fn read_params<R: Read>(mut input: R) -> Result<NetworkParams> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| corrupt(e.to_string()))?;
    let mut cursor = bytes.as_slice();
    let mut take = |n: usize| -> Result<&[u8]> {
        if cursor.len() < n {
            return Err(corrupt("unexpected end of data"));
        }
        let (head, tail) = cursor.split_at(n);
        cursor = tail;
        Ok(head)
    };
    let read_u32 = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap()) as usize;
    let read_f64 = |b: &[u8]| f64::from_le_bytes(b.try_into().unwrap());

    let count = read_u32(take(4)?);
    if !(2..=64).contains(&count) {
        return Err(corrupt(format!("implausible layer count {count}")));
    }
    let sizes = (0..count)
        .map(|_| take(4).map(read_u32))
        .collect::<Result<Vec<_>>>()?;
    let mut params = NetworkParams::zeros(&sizes).map_err(|e| corrupt(e.to_string()))?;
    for layer in params.layers_mut() {
        for w in &mut layer.weights {
            *w = read_f64(take(8)?);
        }
    }
    for layer in params.layers_mut() {
        for b in &mut layer.biases {
            *b = read_f64(take(8)?);
        }
    }
    if !cursor.is_empty() {
        return Err(corrupt(format!("{} trailing bytes", cursor.len())));
    }
    NetworkParams::from_layers(params.layers().to_vec()).map_err(|e| corrupt(e.to_string()))
}

impl NetworkParams {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut buf = Vec::new();
        write_params(self, &mut buf).expect("writing to a Vec cannot fail");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        read_params(std::io::BufReader::new(file)).map_err(|e| match e {
            Error::Checkpoint { message, .. } => Error::Checkpoint {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let mut net = NetworkParams::zeros(&[2, 1]).unwrap();
        net.set(0, 1.5);
        net.set(2, -2.0);
        let mut buf = Vec::new();
        write_params(&net, &mut buf).unwrap();
        assert_eq!(&buf[..12], &[2, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(buf.len(), 12 + 3 * 8);
        assert_eq!(&buf[12..20], &1.5f64.to_le_bytes());
        assert_eq!(&buf[28..36], &(-2.0f64).to_le_bytes());
    }

    #[test]
    fn weights_precede_all_biases() {
        let mut net = NetworkParams::zeros(&[1, 1, 1]).unwrap();
        // flat order: w0, b0, w1, b1
        for (i, v) in [1.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
            net.set(i, v);
        }
        let mut buf = Vec::new();
        write_params(&net, &mut buf).unwrap();
        let floats: Vec<f64> = buf[16..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(floats, vec![1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn truncated_and_trailing_data_rejected() {
        let net = NetworkParams::init(&[3, 4, 2], 1).unwrap();
        let mut buf = Vec::new();
        write_params(&net, &mut buf).unwrap();
        assert!(read_params(&buf[..buf.len() - 1]).is_err());
        let mut longer = buf.clone();
        longer.push(0);
        assert!(read_params(longer.as_slice()).is_err());
        assert!(read_params(&[][..]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            sizes in prop::collection::vec(1usize..6, 2..5),
            seed in any::<u64>(),
        ) {
            let net = NetworkParams::init(&sizes, seed).unwrap();
            let mut buf = Vec::new();
            write_params(&net, &mut buf).unwrap();
            let back = read_params(buf.as_slice()).unwrap();
            prop_assert_eq!(back.layer_sizes(), sizes);
            for i in 0..net.num_params() {
                prop_assert_eq!(back.get(i).to_bits(), net.get(i).to_bits());
            }
        }
    }
}
