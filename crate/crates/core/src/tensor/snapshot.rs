//! Binary parameter snapshots.
//!
//! Layout (all little-endian):
//! `u32` tensor count, then per tensor `u32` rows and `u32` cols, then every
//! tensor's values as `f64` in header order. A network contributes two
//! tensors per layer: the weight matrix and its bias as a 1×n row.

use std::io::{Read, Write};

use super::matrix::Matrix;
use super::network::Network;
use crate::error::{input_err, PrismError, Result};

pub fn write_tensors<W: Write>(mut w: W, tensors: &[&Matrix]) -> Result<()> {
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for t in tensors {
        w.write_all(&(t.rows() as u32).to_le_bytes())?;
        w.write_all(&(t.cols() as u32).to_le_bytes())?;
    }
    for t in tensors {
        for v in t.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_tensors<R: Read>(mut r: R) -> Result<Vec<Matrix>> {
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let count = u32::from_le_bytes(u32buf) as usize;
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut u32buf)?;
        let rows = u32::from_le_bytes(u32buf) as usize;
        r.read_exact(&mut u32buf)?;
        let cols = u32::from_le_bytes(u32buf) as usize;
        shapes.push((rows, cols));
    }
    let mut f64buf = [0u8; 8];
    let mut out = Vec::with_capacity(count);
    for (rows, cols) in shapes {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            r.read_exact(&mut f64buf)?;
            data.push(f64::from_le_bytes(f64buf));
        }
        out.push(Matrix::from_vec(rows, cols, data)?);
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return input_err("trailing bytes after snapshot");
    }
    Ok(out)
}

fn network_tensors(net: &Network) -> Vec<Matrix> {
    net.layers()
        .iter()
        .flat_map(|l| {
            [
                l.weights.clone(),
                Matrix::row_vector(&l.bias).expect("finite bias"),
            ]
        })
        .collect()
}

pub fn encode_network(net: &Network) -> Vec<u8> {
    let tensors = network_tensors(net);
    let refs: Vec<&Matrix> = tensors.iter().collect();
    let mut buf = Vec::new();
    write_tensors(&mut buf, &refs).expect("writing to a Vec cannot fail");
    buf
}

/// Loads parameters into a network whose spec matches the snapshot.
pub fn decode_into(net: &mut Network, bytes: &[u8]) -> Result<()> {
    let tensors = read_tensors(bytes)?;
    let expected = network_tensors(net);
    if tensors.len() != expected.len()
        || tensors.iter().zip(&expected).any(|(a, b)| a.shape() != b.shape())
    {
        return Err(PrismError::Input(
            "snapshot shapes do not match network spec".into(),
        ));
    }
    let flat: Vec<f64> = tensors.iter().flat_map(|t| t.as_slice().to_vec()).collect();
    net.set_parameters_flat(&flat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::NetSpec;

    #[test]
    fn golden_bytes_for_tiny_network() {
        let spec = NetSpec {
            input_dim: 1,
            hidden_dim: 1,
            num_plain_layers: 0,
            num_residual_blocks: 0,
            output_dim: 1,
            dropout_rate: 0.0,
        };
        let mut net = Network::zeros(spec).unwrap();
        net.set_parameters_flat(&[2.0, 1.0, -0.5, 0.25]).unwrap();
        let bytes = encode_network(&net);
        let mut expected = vec![4, 0, 0, 0];
        for _ in 0..4 {
            expected.extend_from_slice(&[1, 0, 0, 0, 1, 0, 0, 0]);
        }
        for v in [2.0f64, 1.0, -0.5, 0.25] {
            expected.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(bytes, expected);
        assert_eq!(&bytes[36..44], &[0, 0, 0, 0, 0, 0, 0, 0x40]);

        let mut other = Network::zeros(net.spec().clone()).unwrap();
        decode_into(&mut other, &bytes).unwrap();
        assert_eq!(other.parameters_flat(), net.parameters_flat());
    }

    #[test]
    fn truncated_snapshot_is_rejected() {
        let spec = NetSpec::new(2, 1);
        let net = Network::zeros(NetSpec { hidden_dim: 3, ..spec }).unwrap();
        let bytes = encode_network(&net);
        let mut other = net.clone();
        assert!(decode_into(&mut other, &bytes[..bytes.len() - 1]).is_err());
    }
}
