//! Checkpoint files.
//!
//! ```text
//! RLXKIT-CKPT v1
//! entries <count>
//! <name> [<d0>,<d1>,...] <byte offset>      (one line per entry)
//! payload <byte count>
//! <little-endian f32 payload in entry order>
//! ```

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{NnError, ParamSet};

pub const CHECKPOINT_HEADER: &str = "RLXKIT-CKPT v1";

pub fn write_checkpoint<W: Write>(params: &ParamSet<f32>, mut out: W) -> Result<(), NnError> {
    let mut text = format!("{CHECKPOINT_HEADER}\nentries {}\n", params.len());
    let mut offset = 0usize;
    for e in params.entries() {
        let dims: Vec<String> = e.shape.iter().map(|d| d.to_string()).collect();
        text.push_str(&format!("{} [{}] {offset}\n", e.name, dims.join(",")));
        offset += 4 * e.values.len();
    }
    text.push_str(&format!("payload {offset}\n"));
    out.write_all(text.as_bytes())?;
    let mut payload = Vec::with_capacity(offset);
    for v in params.flat_iter() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&payload)?;
    out.flush()?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

fn read_line<R: BufRead>(reader: &mut R) -> Result<String, NnError> {
    let mut line = String::new();
    if reader.read_line(&mut line)? == 0 {
        return Err(bad("unexpected end of manifest"));
    }
    if !line.ends_with('\n') {
        return Err(bad("unterminated manifest line"));
    }
    line.pop();
    Ok(line)
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<ParamSet<f32>, NnError> {
    let mut reader = BufReader::new(input);
    if read_line(&mut reader)? != CHECKPOINT_HEADER {
        return Err(bad("missing RLXKIT-CKPT v1 header"));
    }
    let count: usize = read_line(&mut reader)?
        .strip_prefix("entries ")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| bad("malformed entries line"))?;

    let mut manifest = Vec::with_capacity(count);
    let mut expected_offset = 0usize;
    for _ in 0..count {
        let line = read_line(&mut reader)?;
        let fields: Vec<&str> = line.split(' ').collect();
        let [name, shape, offset] = fields[..] else {
            return Err(bad(format!("malformed manifest line {line:?}")));
        };
        let dims = shape
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| bad(format!("malformed shape {shape:?}")))?;
        let shape: Vec<usize> = if dims.is_empty() {
            Vec::new()
        } else {
            dims.split(',')
                .map(|d| d.parse().map_err(|_| bad(format!("bad dimension {d:?}"))))
                .collect::<Result<_, _>>()?
        };
        let offset: usize = offset
            .parse()
            .map_err(|_| bad(format!("bad offset {offset:?}")))?;
        if offset != expected_offset {
            return Err(bad(format!("entry {name} at offset {offset}, expected {expected_offset}")));
        }
        let len: usize = shape.iter().product();
        expected_offset += 4 * len;
        manifest.push((name.to_string(), shape, len));
    }
    let payload_len: usize = read_line(&mut reader)?
        .strip_prefix("payload ")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| bad("malformed payload line"))?;
    if payload_len != expected_offset {
        return Err(bad(format!(
            "payload declares {payload_len} bytes, manifest needs {expected_offset}"
        )));
    }
    let mut payload = vec![0u8; payload_len];
    reader
        .read_exact(&mut payload)
        .map_err(|_| bad("payload truncated"))?;
    let mut extra = [0u8; 1];
    if reader.read(&mut extra)? != 0 {
        return Err(bad("trailing bytes after payload"));
    }

    let mut params = ParamSet::new();
    let mut chunks = payload.chunks_exact(4);
    for (name, shape, len) in manifest {
        let values = chunks
            .by_ref()
            .take(len)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        params.push(name, shape, values)?;
    }
    Ok(params)
}

pub fn save_checkpoint(params: &ParamSet<f32>, path: &Path) -> Result<(), NnError> {
    let file = fs::File::create(path)?;
    write_checkpoint(params, std::io::BufWriter::new(file))
}

pub fn load_checkpoint(path: &Path) -> Result<ParamSet<f32>, NnError> {
    read_checkpoint(fs::File::open(path)?)
}
