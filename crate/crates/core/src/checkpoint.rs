//! Parameter checkpoint format: a JSON header describing named groups and
//! their lengths, followed by the concatenated little-endian f64 data.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"CERMICK1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    groups: Vec<GroupInfo>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GroupInfo {
    name: String,
    len: usize,
}

pub fn save_groups(path: &Path, groups: &[(String, Vec<f64>)]) -> Result<()> {
    let header = Header {
        groups: groups
            .iter()
            .map(|(name, data)| GroupInfo { name: name.clone(), len: data.len() })
            .collect(),
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| Error::Io(format!("header encode: {e}")))?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&(header_json.len() as u64).to_le_bytes())?;
    file.write_all(&header_json)?;
    for (_, data) in groups {
        for v in data {
            file.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_groups(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let mut file = std::fs::File::open(path)?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Io("not a checkpoint file".into()));
    }
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes)?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_json = vec![0u8; header_len];
    file.read_exact(&mut header_json)?;
    let header: Header = serde_json::from_slice(&header_json)
        .map_err(|e| Error::Io(format!("header decode: {e}")))?;
    let mut out = Vec::with_capacity(header.groups.len());
    for info in header.groups {
        let mut data = Vec::with_capacity(info.len);
        let mut buf = [0u8; 8];
        for _ in 0..info.len {
            file.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        out.push((info.name, data));
    }
    Ok(out)
}
