//! Model file encoding. Little-endian throughout:
//!
//! ```text
//! magic        4 bytes  "FLF1"
//! version      u16      1
//! arity        u32      feature vector length
//! class_count  u32
//! classes      class_count × (u32 byte length, UTF-8 bytes)
//! k            u32
//! selected     k × u32  feature indices, ranked
//! scores       arity × f64
//! tree_count   u32
//! trees        tree_count × (u32 node_count, node_count × node)
//! node         u8 tag
//!              tag 0 (split): u32 feature, f64 threshold, u32 left, u32 right
//!              tag 1 (leaf):  class_count × u32 counts
//! ```
//!
//! Children must point forward in the node list, so decoding never builds a
//! cyclic tree.

use crate::error::{Error, Result};
use crate::features::FeatureSelection;

use super::{ForestModel, Node, Tree};

pub const MAGIC: &[u8; 4] = b"FLF1";
pub const VERSION: u16 = 1;

const TAG_SPLIT: u8 = 0;
const TAG_LEAF: u8 = 1;

pub fn serialize(model: &ForestModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(&mut out, model.arity);
    put_u32(&mut out, model.classes.len());
    for class in &model.classes {
        put_u32(&mut out, class.len());
        out.extend_from_slice(class.as_bytes());
    }
    put_u32(&mut out, model.selection.selected.len());
    for &f in &model.selection.selected {
        put_u32(&mut out, f);
    }
    for score in &model.selection.scores {
        out.extend_from_slice(&score.to_le_bytes());
    }
    put_u32(&mut out, model.trees.len());
    for tree in &model.trees {
        put_u32(&mut out, tree.nodes.len());
        for node in &tree.nodes {
            match node {
                Node::Split { feature, threshold, left, right } => {
                    out.push(TAG_SPLIT);
                    out.extend_from_slice(&feature.to_le_bytes());
                    out.extend_from_slice(&threshold.to_le_bytes());
                    out.extend_from_slice(&left.to_le_bytes());
                    out.extend_from_slice(&right.to_le_bytes());
                }
                Node::Leaf { counts } => {
                    out.push(TAG_LEAF);
                    for c in counts {
                        out.extend_from_slice(&c.to_le_bytes());
                    }
                }
            }
        }
    }
    out
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Decode { offset: self.pos, message: message.into() })
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        match self.bytes.get(self.pos..self.pos.saturating_add(n)) {
            Some(slice) => {
                self.pos += n;
                Ok(slice)
            }
            None => self.fail(format!("truncated while reading {what}")),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    /// A count whose items take at least `min_item_bytes` each; rejects
    /// counts that cannot fit in the remaining input.
    fn count(&mut self, what: &str, min_item_bytes: usize) -> Result<usize> {
        let at = self.pos;
        let n = self.u32(what)? as usize;
        if n.saturating_mul(min_item_bytes) > self.bytes.len() - self.pos {
            return Err(Error::Decode { offset: at, message: format!("{what} = {n} exceeds payload") });
        }
        Ok(n)
    }
}

pub fn deserialize(bytes: &[u8]) -> Result<ForestModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Decode { offset: 0, message: "bad magic, expected FLF1".into() });
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::Decode { offset: 4, message: format!("unsupported version {version}") });
    }
    let arity = r.count("arity", 8)?;
    let class_count = r.count("class count", 4)?;
    if class_count < 2 {
        return r.fail("model needs at least two classes");
    }
    let mut classes = Vec::with_capacity(class_count);
    for _ in 0..class_count {
        let len = r.count("class name length", 1)?;
        let at = r.pos;
        let raw = r.take(len, "class name")?;
        let name = std::str::from_utf8(raw)
            .map_err(|_| Error::Decode { offset: at, message: "class name is not UTF-8".into() })?;
        classes.push(name.to_string());
    }
    let k = r.count("selected feature count", 4)?;
    let mut selected = Vec::with_capacity(k);
    for _ in 0..k {
        let at = r.pos;
        let f = r.u32("selected feature")? as usize;
        if f >= arity {
            return Err(Error::Decode { offset: at, message: format!("selected feature {f} >= arity {arity}") });
        }
        selected.push(f);
    }
    if selected.is_empty() {
        return r.fail("empty feature selection");
    }
    let mut scores = Vec::with_capacity(arity);
    for _ in 0..arity {
        scores.push(r.f64("score")?);
    }
    let tree_count = r.count("tree count", 4)?;
    if tree_count == 0 {
        return r.fail("model has no trees");
    }
    let mut trees = Vec::with_capacity(tree_count);
    for _ in 0..tree_count {
        let node_count = r.count("node count", 1)?;
        if node_count == 0 {
            return r.fail("empty tree");
        }
        let mut nodes = Vec::with_capacity(node_count);
        for index in 0..node_count {
            let at = r.pos;
            match r.u8("node tag")? {
                TAG_SPLIT => {
                    let feature = r.u32("split feature")?;
                    let threshold = r.f64("threshold")?;
                    let left = r.u32("left child")?;
                    let right = r.u32("right child")?;
                    let forward = |c: u32| (c as usize) > index && (c as usize) < node_count;
                    if !selected.contains(&(feature as usize)) {
                        return Err(Error::Decode { offset: at, message: format!("split on unselected feature {feature}") });
                    }
                    if !forward(left) || !forward(right) || threshold.is_nan() {
                        return Err(Error::Decode { offset: at, message: "malformed split node".into() });
                    }
                    nodes.push(Node::Split { feature, threshold, left, right });
                }
                TAG_LEAF => {
                    let mut counts = Vec::with_capacity(class_count);
                    for _ in 0..class_count {
                        counts.push(r.u32("leaf count")?);
                    }
                    if counts.iter().all(|&c| c == 0) {
                        return Err(Error::Decode { offset: at, message: "empty leaf histogram".into() });
                    }
                    nodes.push(Node::Leaf { counts });
                }
                tag => return Err(Error::Decode { offset: at, message: format!("unknown node tag {tag}") }),
            }
        }
        trees.push(Tree { nodes });
    }
    if r.pos != bytes.len() {
        return r.fail("trailing bytes after model");
    }
    Ok(ForestModel { trees, classes, selection: FeatureSelection { scores, selected }, arity })
}
