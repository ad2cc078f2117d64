//! Weight checkpoints: a UTF-8 header (format tag, spec, spec hash, block
//! sizes) terminated by a `data` line, followed by every parameter block as
//! little-endian f64 values.

use std::path::Path;

use super::network::Network;
use super::spec::NetworkSpec;
use crate::error::{Error, Result};

const MAGIC: &str = "fbg-skin-checkpoint 1";

pub fn write_checkpoint(net: &Network) -> Vec<u8> {
    let blocks = net.params();
    let mut header = format!("{MAGIC}\nspec={}\nspec_hash={}\nblocks=", net.spec(), net.spec().hash());
    header.push_str(&blocks.iter().map(|b| b.len().to_string()).collect::<Vec<_>>().join(","));
    header.push_str("\ndata\n");
    let mut out = header.into_bytes();
    for block in blocks {
        for v in block {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Rebuilds a network for `spec` from checkpoint bytes; the stored spec hash
/// must match.
pub fn read_checkpoint(bytes: &[u8], spec: &NetworkSpec) -> Result<Network> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    let marker = b"\ndata\n";
    let pos = bytes.windows(marker.len()).position(|w| w == marker).ok_or_else(|| bad("missing data marker"))?;
    let header = std::str::from_utf8(&bytes[..pos]).map_err(|_| bad("header is not UTF-8"))?;
    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad("unrecognized format tag"));
    }
    let mut hash = None;
    let mut sizes = None;
    for line in lines {
        match line.split_once('=') {
            Some(("spec_hash", v)) => hash = Some(v.to_string()),
            Some(("blocks", v)) => {
                sizes = Some(
                    v.split(',')
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse::<usize>().map_err(|_| bad("bad block size")))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            Some(("spec", _)) => {}
            _ => return Err(bad(&format!("unexpected header line {line:?}"))),
        }
    }
    let hash = hash.ok_or_else(|| bad("missing spec_hash"))?;
    if hash != spec.hash() {
        return Err(Error::Checkpoint(format!("spec hash mismatch: checkpoint {hash}, expected {}", spec.hash())));
    }
    let sizes = sizes.ok_or_else(|| bad("missing blocks"))?;
    let data = &bytes[pos + marker.len()..];
    if data.len() != sizes.iter().sum::<usize>() * 8 {
        return Err(bad("parameter data length does not match header"));
    }
    let mut values = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let blocks = sizes.iter().map(|&n| values.by_ref().take(n).collect()).collect();
    let mut net = Network::new(spec.clone(), 0)?;
    net.set_params(blocks)?;
    Ok(net)
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<()> {
    std::fs::write(path, write_checkpoint(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path, spec: &NetworkSpec) -> Result<Network> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::spec::{Activation, LayerSpec};

    fn spec(units: usize) -> NetworkSpec {
        NetworkSpec {
            input_shape: vec![4],
            layers: vec![
                LayerSpec::Dense { units, activation: Activation::Relu },
                LayerSpec::Dense { units: 2, activation: Activation::Softmax },
            ],
        }
    }

    #[test]
    fn round_trip_preserves_weights() {
        let net = Network::new(spec(5), 42).unwrap();
        let back = read_checkpoint(&write_checkpoint(&net), &spec(5)).unwrap();
        assert_eq!(net.params(), back.params());
    }

    #[test]
    fn mismatched_spec_is_rejected() {
        let net = Network::new(spec(5), 42).unwrap();
        let err = read_checkpoint(&write_checkpoint(&net), &spec(6));
        assert!(matches!(err, Err(Error::Checkpoint(m)) if m.contains("hash")));
    }

    #[test]
    fn truncated_data_is_rejected() {
        let net = Network::new(spec(5), 42).unwrap();
        let mut bytes = write_checkpoint(&net);
        bytes.truncate(bytes.len() - 3);
        assert!(read_checkpoint(&bytes, &spec(5)).is_err());
    }
}
