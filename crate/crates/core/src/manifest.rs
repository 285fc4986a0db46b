//! Per-sample manifests and the dataset index.
//!
//! A manifest is a JSON object whose relative paths resolve against the
//! manifest's own directory. A dataset is a directory holding `dataset.json`
//! (`{"manifests": ["a/manifest.json", ...]}`) plus the manifests it lists.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attnmap::AttentionStack;
use crate::config::Mode;
use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::refexpr::Direction;
use crate::tensor::{load_tensor, read_header, DType, Tensor, TensorHeader};

pub const DATASET_INDEX: &str = "dataset.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPaths {
    /// Text representation `r`, shape `[d]`.
    pub text_vec_path: String,
    /// Masked-attention encoder output per proposal, shape `[P, d]`.
    pub attn_vec_path: String,
    /// Cropped-image encoder output per proposal, shape `[P, d]`.
    pub crop_vec_path: String,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub image_width: usize,
    pub image_height: usize,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<Vec<Direction>>,
    pub attention_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposals_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<EmbeddingPaths>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_mask_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
    #[serde(skip)]
    base_dir: PathBuf,
}

/// Embedding vectors for one sample, as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleEmbeddings {
    pub text: Vec<f64>,
    pub attn: Vec<Vec<f64>>,
    pub crop: Vec<Vec<f64>>,
}

const REQUIRED_FIELDS: [&str; 4] = ["image_width", "image_height", "tokens", "attention_path"];

fn json_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

impl SampleManifest {
    /// Build a manifest in memory; paths resolve against `base_dir`.
    pub fn new(
        image_width: usize,
        image_height: usize,
        tokens: Vec<String>,
        attention_path: impl Into<String>,
        base_dir: impl Into<PathBuf>,
    ) -> Self {
        SampleManifest {
            image_width,
            image_height,
            tokens,
            root_index: None,
            directions: None,
            attention_path: attention_path.into(),
            proposals_path: None,
            embeddings: None,
            gt_mask_path: None,
            image_path: None,
            base_dir: base_dir.into(),
        }
    }

    /// Parse and check the manifest's own fields, without touching any
    /// referenced tensor file.
    pub fn parse(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| json_err(path, e))?;
        let obj = value
            .as_object()
            .ok_or_else(|| json_err(path, "manifest must be a JSON object"))?;
        for field in REQUIRED_FIELDS {
            if !obj.contains_key(field) {
                return Err(Error::MissingField(field));
            }
        }
        let mut manifest: SampleManifest =
            serde_json::from_value(value).map_err(|e| json_err(path, e))?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        manifest.check_fields()?;
        Ok(manifest)
    }

    fn check_fields(&self) -> Result<()> {
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::DimMismatch(format!(
                "image dims must be positive, got {}x{}",
                self.image_width, self.image_height
            )));
        }
        if self.tokens.is_empty() {
            return Err(Error::EmptyExpression);
        }
        if let Some(k) = self.root_index {
            if k >= self.tokens.len() {
                return Err(Error::RootIndexOutOfRange {
                    index: k,
                    len: self.tokens.len(),
                });
            }
        }
        if let Some(e) = &self.embeddings {
            if e.dim == 0 {
                return Err(Error::DimMismatch("embedding dim must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn set_base_dir(&mut self, dir: impl Into<PathBuf>) {
        self.base_dir = dir.into();
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.base_dir.join(rel)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.image_width, self.image_height)
    }

    /// Validate every referenced file: existence, headers, and (for masks)
    /// binary values.
    pub fn validate_files(&self) -> Result<()> {
        self.check_attention_header()?;
        let proposal_count = match &self.proposals_path {
            Some(_) => Some(self.load_proposals()?.len()),
            None => None,
        };
        if self.embeddings.is_some() {
            self.check_embedding_headers(proposal_count)?;
        }
        if self.gt_mask_path.is_some() {
            self.load_gt()?;
        }
        if self.image_path.is_some() {
            self.load_image()?;
        }
        Ok(())
    }

    /// Validate only the inputs `mode` consumes, failing with
    /// [`Error::MissingInput`] when the manifest lacks one.
    pub fn validate_for(&self, mode: Mode) -> Result<()> {
        if mode.needs_attention() {
            self.check_attention_header()?;
        }
        let mut proposal_count = None;
        if mode.needs_external_proposals() {
            let path = self.proposals_path.as_deref().ok_or(Error::MissingInput {
                mode,
                field: "proposals_path",
            })?;
            let header = self.header(path)?;
            self.check_proposal_header(&header)?;
            proposal_count = Some(header.dims[0]);
        }
        if mode.needs_embeddings() {
            if self.embeddings.is_none() {
                return Err(Error::MissingInput {
                    mode,
                    field: "embeddings",
                });
            }
            self.check_embedding_headers(proposal_count)?;
        }
        Ok(())
    }

    fn header(&self, rel: &str) -> Result<TensorHeader> {
        read_header(self.resolve(rel))
    }

    fn check_attention_header(&self) -> Result<TensorHeader> {
        let header = self.header(&self.attention_path)?;
        if header.dtype != DType::F32 || header.dims.len() != 4 {
            return Err(Error::DimMismatch(format!(
                "attention must be a 4-D f32 tensor (w,h,l,N), got {:?} {:?}",
                header.dims, header.dtype
            )));
        }
        if header.dims[2] != self.tokens.len() {
            return Err(Error::DimMismatch(format!(
                "attention token dim {} != {} tokens",
                header.dims[2],
                self.tokens.len()
            )));
        }
        Ok(header)
    }

    fn check_proposal_header(&self, header: &TensorHeader) -> Result<()> {
        if header.dtype != DType::U8
            || header.dims.len() != 3
            || header.dims[1] != self.image_width
            || header.dims[2] != self.image_height
        {
            return Err(Error::DimMismatch(format!(
                "proposals {:?} ({:?}) do not match u8 Px{}x{}",
                header.dims, header.dtype, self.image_width, self.image_height
            )));
        }
        Ok(())
    }

    fn check_embedding_headers(&self, proposal_count: Option<usize>) -> Result<()> {
        let e = self
            .embeddings
            .as_ref()
            .ok_or(Error::MissingField("embeddings"))?;
        let text = self.header(&e.text_vec_path)?;
        let text_ok = text.dtype == DType::F32
            && match text.dims.as_slice() {
                [d] => *d == e.dim,
                [1, d] => *d == e.dim,
                _ => false,
            };
        if !text_ok {
            return Err(Error::DimMismatch(format!(
                "text vector {:?} does not match dim {}",
                text.dims, e.dim
            )));
        }
        let mut rows = None;
        for rel in [&e.attn_vec_path, &e.crop_vec_path] {
            let h = self.header(rel)?;
            if h.dtype != DType::F32 || h.dims.len() != 2 || h.dims[1] != e.dim {
                return Err(Error::DimMismatch(format!(
                    "{rel}: expected f32 [P, {}], got {:?}",
                    e.dim, h.dims
                )));
            }
            if let Some(r) = rows {
                if r != h.dims[0] {
                    return Err(Error::DimMismatch(format!(
                        "attn/crop embedding rows differ: {r} vs {}",
                        h.dims[0]
                    )));
                }
            }
            rows = Some(h.dims[0]);
        }
        if let (Some(p), Some(r)) = (proposal_count, rows) {
            if p != r {
                return Err(Error::DimMismatch(format!(
                    "{p} proposals but {r} embedding rows"
                )));
            }
        }
        Ok(())
    }

    pub fn load_attention(&self) -> Result<AttentionStack> {
        self.check_attention_header()?;
        let tensor = load_tensor(self.resolve(&self.attention_path))?;
        AttentionStack::from_tensor(&tensor)
    }

    pub fn load_proposals(&self) -> Result<Vec<Mask>> {
        let rel = self
            .proposals_path
            .as_deref()
            .ok_or(Error::MissingField("proposals_path"))?;
        let tensor = load_tensor(self.resolve(rel))?;
        self.check_proposal_header(&TensorHeader {
            dims: tensor.dims().to_vec(),
            dtype: tensor.dtype(),
        })?;
        tensor.to_mask_stack()
    }

    pub fn load_embeddings(&self) -> Result<SampleEmbeddings> {
        let e = self
            .embeddings
            .as_ref()
            .ok_or(Error::MissingField("embeddings"))?;
        self.check_embedding_headers(None)?;
        let text = load_tensor(self.resolve(&e.text_vec_path))?
            .to_rows()?
            .into_iter()
            .next()
            .ok_or(Error::MissingField("text_vec_path"))?;
        let attn = load_tensor(self.resolve(&e.attn_vec_path))?.to_rows()?;
        let crop = load_tensor(self.resolve(&e.crop_vec_path))?.to_rows()?;
        Ok(SampleEmbeddings { text, attn, crop })
    }

    pub fn load_gt(&self) -> Result<Mask> {
        let rel = self
            .gt_mask_path
            .as_deref()
            .ok_or(Error::MissingField("gt_mask_path"))?;
        let mask = load_tensor(self.resolve(rel))?.to_mask()?;
        if mask.dims() != self.dims() {
            return Err(Error::DimMismatch(format!(
                "gt mask {}x{} vs image {}x{}",
                mask.width(),
                mask.height(),
                self.image_width,
                self.image_height
            )));
        }
        Ok(mask)
    }

    /// Optional RGB image, `W × H × 3` u8.
    pub fn load_image(&self) -> Result<Tensor> {
        let rel = self
            .image_path
            .as_deref()
            .ok_or(Error::MissingField("image_path"))?;
        let tensor = load_tensor(self.resolve(rel))?;
        if tensor.dtype() != DType::U8 || tensor.dims() != [self.image_width, self.image_height, 3]
        {
            return Err(Error::DimMismatch(format!(
                "image must be u8 {}x{}x3, got {:?}",
                self.image_width,
                self.image_height,
                tensor.dims()
            )));
        }
        Ok(tensor)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).map_err(|e| json_err(path, e))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Load a manifest and eagerly validate every field and referenced file.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<SampleManifest> {
    let manifest = SampleManifest::parse(path)?;
    manifest.validate_files()?;
    Ok(manifest)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct DatasetIndex {
    manifests: Vec<String>,
}

/// A dataset index: manifest paths as listed, plus their resolved locations.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub root: PathBuf,
    pub entries: Vec<String>,
}

impl Dataset {
    /// Accepts either the `dataset.json` file or the directory holding it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let index_path = if path.is_dir() {
            path.join(DATASET_INDEX)
        } else {
            path.to_path_buf()
        };
        let text = fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
        let index: DatasetIndex =
            serde_json::from_str(&text).map_err(|e| json_err(&index_path, e))?;
        Ok(Dataset {
            root: index_path
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default(),
            entries: index.manifests,
        })
    }

    pub fn resolve(&self, entry: &str) -> PathBuf {
        self.root.join(entry)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn write_dataset_index(dir: impl AsRef<Path>, manifests: &[String]) -> Result<PathBuf> {
    let path = dir.as_ref().join(DATASET_INDEX);
    let index = DatasetIndex {
        manifests: manifests.to_vec(),
    };
    let mut text = serde_json::to_string_pretty(&index).map_err(|e| json_err(&path, e))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::save_tensor;

    struct Fx {
        dir: tempfile::TempDir,
    }

    impl Fx {
        fn new() -> Self {
            Fx {
                dir: tempfile::tempdir().unwrap(),
            }
        }

        fn put(&self, name: &str, t: &Tensor) {
            save_tensor(t, self.dir.path().join(name)).unwrap();
        }

        fn manifest(&self, json: serde_json::Value) -> PathBuf {
            let p = self.dir.path().join("manifest.json");
            fs::write(&p, json.to_string()).unwrap();
            p
        }
    }

    fn attention(l: usize) -> Tensor {
        Tensor::from_f32(vec![2, 2, l, 1], vec![0.25; 4 * l]).unwrap()
    }

    #[test]
    fn three_tokens_matching_attention_ok() {
        let fx = Fx::new();
        fx.put("a.rdtf", &attention(3));
        let p = fx.manifest(serde_json::json!({
            "image_width": 4, "image_height": 4,
            "tokens": ["the", "black", "horse"],
            "attention_path": "a.rdtf"
        }));
        let m = load_manifest(&p).unwrap();
        assert_eq!(m.tokens.len(), 3);
        assert_eq!(m.load_attention().unwrap().tokens(), 3);
    }

    #[test]
    fn root_index_out_of_range() {
        let fx = Fx::new();
        fx.put("a.rdtf", &attention(3));
        let p = fx.manifest(serde_json::json!({
            "image_width": 4, "image_height": 4,
            "tokens": ["a", "b", "c"], "root_index": 5,
            "attention_path": "a.rdtf"
        }));
        assert!(matches!(
            load_manifest(&p),
            Err(Error::RootIndexOutOfRange { index: 5, len: 3 })
        ));
    }

    #[test]
    fn proposal_dims_mismatch() {
        let fx = Fx::new();
        fx.put("a.rdtf", &attention(1));
        let mut masks = vec![0u8; 4 * 10 * 10];
        masks[0] = 1;
        fx.put("p.rdtf", &Tensor::from_u8(vec![4, 10, 10], masks).unwrap());
        let p = fx.manifest(serde_json::json!({
            "image_width": 12, "image_height": 12,
            "tokens": ["x"], "attention_path": "a.rdtf",
            "proposals_path": "p.rdtf"
        }));
        assert!(matches!(load_manifest(&p), Err(Error::DimMismatch(_))));
    }

    #[test]
    fn missing_field() {
        let fx = Fx::new();
        let p = fx.manifest(serde_json::json!({
            "image_width": 4, "tokens": ["x"], "attention_path": "a.rdtf"
        }));
        assert!(matches!(
            load_manifest(&p),
            Err(Error::MissingField("image_height"))
        ));
    }

    #[test]
    fn token_count_mismatch() {
        let fx = Fx::new();
        fx.put("a.rdtf", &attention(2));
        let p = fx.manifest(serde_json::json!({
            "image_width": 4, "image_height": 4,
            "tokens": ["a", "b", "c"], "attention_path": "a.rdtf"
        }));
        assert!(matches!(load_manifest(&p), Err(Error::DimMismatch(_))));
    }

    #[test]
    fn non_binary_gt_rejected() {
        let fx = Fx::new();
        fx.put("a.rdtf", &attention(1));
        fx.put(
            "g.rdtf",
            &Tensor::from_u8(vec![2, 2], vec![0, 1, 2, 0]).unwrap(),
        );
        let p = fx.manifest(serde_json::json!({
            "image_width": 2, "image_height": 2,
            "tokens": ["x"], "attention_path": "a.rdtf", "gt_mask_path": "g.rdtf"
        }));
        assert!(matches!(load_manifest(&p), Err(Error::NonBinaryMask(_))));
    }

    #[test]
    fn missing_file_is_io_failure() {
        let fx = Fx::new();
        let p = fx.manifest(serde_json::json!({
            "image_width": 2, "image_height": 2,
            "tokens": ["x"], "attention_path": "nope.rdtf"
        }));
        assert!(matches!(load_manifest(&p), Err(Error::Io { .. })));
    }

    #[test]
    fn mode_requirements() {
        let fx = Fx::new();
        fx.put("a.rdtf", &attention(1));
        let p = fx.manifest(serde_json::json!({
            "image_width": 2, "image_height": 2,
            "tokens": ["x"], "attention_path": "a.rdtf"
        }));
        let m = SampleManifest::parse(&p).unwrap();
        m.validate_for(Mode::G).unwrap();
        assert!(matches!(
            m.validate_for(Mode::GS),
            Err(Error::MissingInput {
                mode: Mode::GS,
                field: "proposals_path"
            })
        ));
    }

    #[test]
    fn dataset_index_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let entries = vec![
            "s0/manifest.json".to_string(),
            "s1/manifest.json".to_string(),
        ];
        let idx = write_dataset_index(dir.path(), &entries).unwrap();
        let ds = Dataset::load(&idx).unwrap();
        assert_eq!(ds.entries, entries);
        assert_eq!(Dataset::load(dir.path()).unwrap(), ds);
        assert_eq!(
            ds.resolve("s0/manifest.json"),
            dir.path().join("s0/manifest.json")
        );
    }
}
