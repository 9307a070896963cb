//! Directory of raw little-endian `f32` tensors described by `manifest.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PatchGrid, PatchLocation};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::Shape(format!(
                "{name}: shape {shape:?} does not hold {} values",
                data.len()
            )));
        }
        if name.is_empty()
            || !name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(Error::InvalidArgument(format!(
                "tensor name {name:?} is not a plain identifier"
            )));
        }
        Ok(Self { name, shape, data })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerManifest {
    pub dtype: String,
    pub byte_order: String,
    pub text: String,
    pub grid: PatchGrid,
    pub provenance: Vec<PatchLocation>,
    pub tensors: Vec<TensorEntry>,
}

pub fn write_container(
    dir: &Path,
    text: &str,
    grid: PatchGrid,
    tensors: &[NamedTensor],
) -> Result<ContainerManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(tensors.len());
    for t in tensors {
        let file = format!("{}.bin", t.name);
        let bytes: Vec<u8> = t.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        let path = dir.join(&file);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        entries.push(TensorEntry {
            name: t.name.clone(),
            shape: t.shape.clone(),
            file,
        });
    }
    let manifest = ContainerManifest {
        dtype: "f32".into(),
        byte_order: "little".into(),
        text: text.into(),
        grid,
        provenance: grid.table(),
        tensors: entries,
    };
    let path = dir.join(MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_container(dir: &Path) -> Result<(ContainerManifest, Vec<NamedTensor>)> {
    let path = dir.join(MANIFEST);
    let manifest: ContainerManifest =
        serde_json::from_str(&fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?)?;
    if manifest.dtype != "f32" || manifest.byte_order != "little" {
        return Err(Error::InvalidArgument(format!(
            "unsupported container encoding {} / {}",
            manifest.dtype, manifest.byte_order
        )));
    }
    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    for e in &manifest.tensors {
        let p = dir.join(&e.file);
        let bytes = fs::read(&p).map_err(|err| Error::io(&p, err))?;
        if bytes.len() % 4 != 0 {
            return Err(Error::Shape(format!(
                "{} is not a whole number of f32 values",
                p.display()
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.push(NamedTensor::new(e.name.clone(), e.shape.clone(), data)?);
    }
    Ok((manifest, tensors))
}
