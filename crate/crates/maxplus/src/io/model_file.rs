//! `MXPL1` model files.
//!
//! ```text
//! MXPL1
//! arch=maxplus-mlp
//! head=maxplus
//! meta.<key>=<value>        architecture details
//! config.<key>=<value>      training configuration echo
//! tensor <name> <d0>,<d1>,...
//! end
//! <payload>
//! ```
//!
//! The payload holds every tensor, in header order, as row-major
//! little-endian `f64`. Its length must equal the sum of the declared shape
//! products times 8.

use std::path::Path;

use maxplus_core::model::ModelParts;
use maxplus_core::{Model, Tensor};

use super::{read_file, write_file, IoError, IoResult};

pub const MODEL_MAGIC: &str = "MXPL1";

/// A decoded model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: Model,
    pub head: String,
    pub config: Vec<(String, String)>,
}

fn check_text(s: &str, what: &str) -> IoResult<()> {
    if s.is_empty() || s.contains(['\n', '\r']) || (what == "key" && s.contains(['=', ' '])) {
        return Err(IoError::Format(format!("{what} `{s}` cannot be stored in a model header")));
    }
    Ok(())
}

pub fn encode_model(model: &Model, config: &[(String, String)]) -> IoResult<Vec<u8>> {
    let parts = model.to_parts();
    let mut header = format!("{MODEL_MAGIC}\narch={}\nhead={}\n", parts.arch, parts.head);
    for (prefix, entries) in [("meta", &parts.meta), ("config", &config.to_vec())] {
        for (k, v) in entries {
            check_text(k, "key")?;
            check_text(v, "value")?;
            header.push_str(&format!("{prefix}.{k}={v}\n"));
        }
    }
    for (name, t) in &parts.tensors {
        check_text(name, "key")?;
        let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        header.push_str(&format!("tensor {name} {}\n", dims.join(",")));
    }
    header.push_str("end\n");
    let mut bytes = header.into_bytes();
    for (_, t) in &parts.tensors {
        for v in t.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(bytes)
}

pub fn decode_model(bytes: &[u8]) -> IoResult<ModelFile> {
    let mut lines = Vec::new();
    let mut at = 0;
    loop {
        let end = bytes[at..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| IoError::Format("header is not terminated by `end`".into()))?;
        let line = std::str::from_utf8(&bytes[at..at + end])
            .map_err(|_| IoError::Format(format!("header line {} is not UTF-8", lines.len() + 1)))?;
        at += end + 1;
        if lines.is_empty() && line != MODEL_MAGIC {
            return Err(IoError::Format(format!("magic `{line}`, expected `{MODEL_MAGIC}`")));
        }
        if line == "end" {
            break;
        }
        lines.push(line);
    }
    let (mut arch, mut head) = (None, None);
    let mut meta = Vec::new();
    let mut config = Vec::new();
    let mut shapes: Vec<(String, Vec<usize>)> = Vec::new();
    for line in &lines[1..] {
        if let Some(rest) = line.strip_prefix("tensor ") {
            let (name, dims) = rest
                .split_once(' ')
                .ok_or_else(|| IoError::Format(format!("malformed tensor line `{line}`")))?;
            let dims = dims
                .split(',')
                .map(|d| d.parse::<usize>().ok().filter(|&d| d > 0))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| IoError::Format(format!("malformed shape in `{line}`")))?;
            shapes.push((name.to_string(), dims));
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| IoError::Format(format!("unrecognized header line `{line}`")))?;
        match k {
            "arch" => arch = Some(v.to_string()),
            "head" => head = Some(v.to_string()),
            _ => {
                if let Some(k) = k.strip_prefix("meta.") {
                    meta.push((k.to_string(), v.to_string()));
                } else if let Some(k) = k.strip_prefix("config.") {
                    config.push((k.to_string(), v.to_string()));
                } else {
                    return Err(IoError::Format(format!("unrecognized header key `{k}`")));
                }
            }
        }
    }
    let arch = arch.ok_or_else(|| IoError::Format("header lacks `arch`".into()))?;
    let head = head.ok_or_else(|| IoError::Format("header lacks `head`".into()))?;
    let counts: Vec<usize> = shapes.iter().map(|(_, s)| s.iter().product()).collect();
    let expected = counts.iter().try_fold(0usize, |acc, &c| acc.checked_add(c.checked_mul(8)?));
    let payload = &bytes[at..];
    if expected != Some(payload.len()) {
        return Err(IoError::Consistency(format!(
            "payload has {} bytes, header declares {}",
            payload.len(),
            expected.map_or_else(|| "an overflowing size".into(), |e| e.to_string())
        )));
    }
    let mut tensors = Vec::with_capacity(shapes.len());
    let mut values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    for ((name, shape), n) in shapes.into_iter().zip(counts) {
        let data: Vec<f64> = values.by_ref().take(n).collect();
        let t = Tensor::new(shape, data)
            .map_err(|e| IoError::Format(format!("tensor `{name}`: {e}")))?;
        tensors.push((name, t));
    }
    let parts = ModelParts { arch, head: head.clone(), meta, tensors };
    let model = Model::from_parts(&parts).map_err(|e| IoError::Consistency(e.to_string()))?;
    if model.to_parts().head != head {
        return Err(IoError::Consistency(format!("head `{head}` does not match architecture `{}`", parts.arch)));
    }
    Ok(ModelFile { model, head, config })
}

pub fn save_model(model: &Model, config: &[(String, String)], path: &Path) -> IoResult<()> {
    write_file(path, &encode_model(model, config)?)
}

pub fn load_model(path: &Path) -> IoResult<ModelFile> {
    decode_model(&read_file(path)?)
}
