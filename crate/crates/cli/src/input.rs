//! Loading schema, data and constraints from the command line.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use spatial_cqa::constraints::{read_sics, DenialSIC};
use spatial_cqa::geometry::GeometryConfig;
use spatial_cqa::model::{read_instance_files, read_schema, Instance, Schema};

use crate::Inputs;

pub struct Loaded {
    pub instance: Instance,
    pub sics: Vec<DenialSIC>,
    pub cfg: GeometryConfig,
}

/// `REL=PATH`, or a bare path whose stem names the relation (or the only one).
fn data_spec(raw: &str, schema: &Schema) -> Result<(String, PathBuf)> {
    if let Some((rel, path)) = raw.split_once('=') {
        return Ok((rel.to_string(), PathBuf::from(path)));
    }
    let path = PathBuf::from(raw);
    if schema.relations.len() == 1 {
        return Ok((schema.relations[0].name.clone(), path));
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
    if schema.relation(&stem).is_err() {
        bail!("cannot tell which relation `{raw}` holds; pass it as RELATION=PATH");
    }
    Ok((stem, path))
}

pub fn schema(path: &Path) -> Result<Arc<Schema>> {
    Ok(Arc::new(read_schema(path).with_context(|| format!("reading schema {}", path.display()))?))
}

pub fn load(inputs: &Inputs) -> Result<Loaded> {
    let schema = schema(&inputs.schema)?;
    let files = inputs.data.iter().map(|s| data_spec(s, &schema)).collect::<Result<Vec<_>>>()?;
    let instance = read_instance_files(schema.clone(), &files, None).context("reading data")?;
    let sics = match &inputs.sics {
        Some(p) => read_sics(p, &schema).with_context(|| format!("reading constraints {}", p.display()))?,
        None => Vec::new(),
    };
    let base = instance.default_config();
    let cfg = GeometryConfig::new(inputs.d.unwrap_or(base.d), inputs.epsilon.unwrap_or(base.area_epsilon))?;
    Ok(Loaded { instance, sics, cfg })
}
