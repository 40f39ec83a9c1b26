use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::ModelConfig;
use super::optim::AdamState;
use super::params::{Parameters, Tensor};
use super::ModelError;

const FORMAT: &str = "player-form-checkpoint 1";

/// Weights, optimizer state and the config they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub step: u64,
    pub params: Parameters<f32>,
    pub adam: Option<AdamState<f32>>,
}

fn write_blob(path: &Path, data: &[f32]) -> Result<(), ModelError> {
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn read_blob(path: &Path, n: usize) -> Result<Vec<f32>, ModelError> {
    let bytes = fs::read(path)?;
    if bytes.len() != n * 4 {
        return Err(ModelError::Checkpoint(format!(
            "{} holds {} bytes, expected {}",
            path.display(),
            bytes.len(),
            n * 4
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Write `ckpt` to `root/step_NNNNNNN` through a temporary directory and
/// point `root/latest` at it. Returns the checkpoint directory.
pub fn save_checkpoint(root: &Path, ckpt: &Checkpoint) -> Result<PathBuf, ModelError> {
    fs::create_dir_all(root)?;
    let name = format!("step_{:07}", ckpt.step);
    let tmp = root.join(format!(".{name}.tmp"));
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir_all(&tmp)?;
    let mut manifest = format!(
        "format={FORMAT}\nstep={}\nconfig_hash={}\n",
        ckpt.step,
        ckpt.config.hash()
    );
    for (k, v) in ckpt.config.to_map() {
        manifest.push_str(&format!("config.{k}={v}\n"));
    }
    let mut groups: Vec<(&str, &Parameters<f32>)> = vec![("params", &ckpt.params)];
    if let Some(a) = &ckpt.adam {
        manifest.push_str(&format!("adam_step={}\n", a.step));
        groups.push(("adam_m", &a.m));
        groups.push(("adam_v", &a.v));
    }
    for (group, p) in groups {
        fs::create_dir_all(tmp.join(group))?;
        for t in &p.tensors {
            let file = format!("{group}/{}.f32", t.name);
            write_blob(&tmp.join(&file), &t.data)?;
            let shape: Vec<String> = t.shape.iter().map(|s| s.to_string()).collect();
            manifest.push_str(&format!(
                "tensor={group}:{} shape={} dtype=f32le file={file}\n",
                t.name,
                shape.join("x")
            ));
        }
    }
    fs::write(tmp.join("manifest.txt"), manifest)?;
    let dest = root.join(&name);
    if dest.exists() {
        fs::remove_dir_all(&dest)?;
    }
    fs::rename(&tmp, &dest)?;
    let latest_tmp = root.join(".latest.tmp");
    fs::write(&latest_tmp, format!("{name}\n"))?;
    fs::rename(latest_tmp, root.join("latest"))?;
    Ok(dest)
}

/// Load a checkpoint directory, or the latest checkpoint under a root
/// written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ModelError> {
    let dir = if path.join("manifest.txt").exists() {
        path.to_path_buf()
    } else {
        let latest = fs::read_to_string(path.join("latest"))
            .map_err(|_| ModelError::Checkpoint(format!("no checkpoint under {}", path.display())))?;
        path.join(latest.trim())
    };
    let text = fs::read_to_string(dir.join("manifest.txt"))?;
    let mut kv = BTreeMap::new();
    let mut config_map = BTreeMap::new();
    let mut tensors: Vec<(String, String, Vec<usize>, String)> = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("tensor=") {
            let mut parts = rest.split(' ');
            let id = parts.next().unwrap_or_default();
            let (group, name) = id
                .split_once(':')
                .ok_or_else(|| ModelError::Checkpoint(format!("bad tensor line {line:?}")))?;
            let mut shape = Vec::new();
            let mut file = String::new();
            for p in parts {
                if let Some(s) = p.strip_prefix("shape=") {
                    shape = s
                        .split('x')
                        .map(|d| d.parse::<usize>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| ModelError::Checkpoint(format!("bad shape in {line:?}")))?;
                } else if let Some(f) = p.strip_prefix("file=") {
                    file = f.to_string();
                }
            }
            tensors.push((group.to_string(), name.to_string(), shape, file));
        } else if let Some((k, v)) = line.split_once('=') {
            if let Some(ck) = k.strip_prefix("config.") {
                config_map.insert(ck.to_string(), v.to_string());
            } else {
                kv.insert(k.to_string(), v.to_string());
            }
        }
    }
    if kv.get("format").map(String::as_str) != Some(FORMAT) {
        return Err(ModelError::Checkpoint("unknown checkpoint format".into()));
    }
    let config = ModelConfig::from_map(&config_map)?;
    if kv.get("config_hash") != Some(&config.hash()) {
        return Err(ModelError::Checkpoint("config hash does not match the stored config".into()));
    }
    let step = kv
        .get("step")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ModelError::Checkpoint("missing step".into()))?;
    let mut groups: BTreeMap<String, Vec<Tensor<f32>>> = BTreeMap::new();
    for (group, name, shape, file) in tensors {
        let data = read_blob(&dir.join(&file), shape.iter().product())?;
        groups.entry(group).or_default().push(Tensor { name, shape, data });
    }
    let params = Parameters {
        tensors: groups.remove("params").unwrap_or_default(),
    };
    if !params.matches(&config) {
        return Err(ModelError::Checkpoint("tensors do not match the config".into()));
    }
    let adam = match (groups.remove("adam_m"), groups.remove("adam_v")) {
        (Some(m), Some(v)) => Some(AdamState {
            m: Parameters { tensors: m },
            v: Parameters { tensors: v },
            step: kv.get("adam_step").and_then(|s| s.parse().ok()).unwrap_or(step),
        }),
        _ => None,
    };
    Ok(Checkpoint {
        config,
        step,
        params,
        adam,
    })
}
