//! A small ONNX interpreter for segmentation models.
//!
//! Covers the float32 operator subset that encoder/decoder segmentation networks are
//! typically exported with: convolutions (plain and transposed), pooling, nearest
//! upsampling, concatenation, batch normalization and elementwise arithmetic and
//! activations. Graphs using anything else fail to load with
//! [`OnnxError::UnsupportedOperator`].

pub mod build;
mod ops;
mod wire;

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use wire::{Field, Reader};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OnnxError {
    #[error("cannot read model file {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed model: {0}")]
    Decode(String),
    #[error("unsupported operator {0}")]
    UnsupportedOperator(String),
    #[error("unsupported tensor element type {0}")]
    UnsupportedType(i64),
    #[error("evaluation failed in node {node}: {message}")]
    Eval { node: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TensorData {
    F32(Vec<f32>),
    I64(Vec<i64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub(crate) shape: Vec<usize>,
    pub(crate) data: TensorData,
}

impl Tensor {
    pub fn from_f32(shape: Vec<usize>, data: Vec<f32>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "tensor shape/data mismatch");
        Self { shape, data: TensorData::F32(data) }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Float view; integer tensors are converted.
    pub fn to_f32(&self) -> Vec<f32> {
        match &self.data {
            TensorData::F32(v) => v.clone(),
            TensorData::I64(v) => v.iter().map(|&x| x as f32).collect(),
        }
    }

    pub(crate) fn f32s(&self) -> Result<&[f32], String> {
        match &self.data {
            TensorData::F32(v) => Ok(v),
            TensorData::I64(_) => Err("expected float tensor".into()),
        }
    }

    pub(crate) fn i64s(&self) -> Vec<i64> {
        match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| x as i64).collect(),
            TensorData::I64(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Attr {
    Float(f32),
    Int(i64),
    Str(String),
    Tensor(Tensor),
    Floats(Vec<f32>),
    Ints(Vec<i64>),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Node {
    pub(crate) name: String,
    pub(crate) op_type: String,
    pub(crate) inputs: Vec<String>,
    pub(crate) outputs: Vec<String>,
    pub(crate) attrs: HashMap<String, Attr>,
}

impl Node {
    pub(crate) fn ints(&self, name: &str) -> Option<Vec<i64>> {
        match self.attrs.get(name) {
            Some(Attr::Ints(v)) => Some(v.clone()),
            Some(Attr::Int(v)) => Some(vec![*v]),
            _ => None,
        }
    }

    pub(crate) fn int(&self, name: &str) -> Option<i64> {
        match self.attrs.get(name) {
            Some(Attr::Int(v)) => Some(*v),
            _ => None,
        }
    }

    pub(crate) fn float(&self, name: &str) -> Option<f32> {
        match self.attrs.get(name) {
            Some(Attr::Float(v)) => Some(*v),
            _ => None,
        }
    }

    pub(crate) fn string(&self, name: &str) -> Option<&str> {
        match self.attrs.get(name) {
            Some(Attr::Str(v)) => Some(v),
            _ => None,
        }
    }
}

/// Declared dimension of a graph input or output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dim {
    Fixed(usize),
    Symbolic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueInfo {
    pub name: String,
    pub dims: Vec<Dim>,
}

/// A decoded, validated model ready for evaluation. Evaluation takes `&self`, so one
/// instance can be shared read-only across worker threads.
#[derive(Debug, Clone, PartialEq)]
pub struct OnnxModel {
    nodes: Vec<Node>,
    initializers: HashMap<String, Tensor>,
    inputs: Vec<ValueInfo>,
    outputs: Vec<ValueInfo>,
}

impl OnnxModel {
    pub fn load(path: &Path) -> Result<Self, OnnxError> {
        let bytes = std::fs::read(path).map_err(|e| OnnxError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, OnnxError> {
        let mut graph = None;
        let mut r = Reader::new(bytes);
        while let Some((n, f)) = r.next_field()? {
            if n == 7 {
                graph = Some(f.as_bytes()?);
            }
        }
        let graph = graph.ok_or_else(|| OnnxError::Decode("model has no graph".into()))?;
        let model = decode_graph(graph)?;
        for node in &model.nodes {
            if !ops::is_supported(&node.op_type) {
                return Err(OnnxError::UnsupportedOperator(node.op_type.clone()));
            }
        }
        if model.outputs.is_empty() {
            return Err(OnnxError::Decode("graph declares no outputs".into()));
        }
        Ok(model)
    }

    /// Graph inputs that are not satisfied by an initializer.
    pub fn inputs(&self) -> impl Iterator<Item = &ValueInfo> {
        self.inputs.iter().filter(|v| !self.initializers.contains_key(&v.name))
    }

    pub fn outputs(&self) -> &[ValueInfo] {
        &self.outputs
    }

    /// Runs the graph with a single bound input and returns the first graph output.
    pub fn run(&self, input: Tensor) -> Result<Tensor, OnnxError> {
        let input_name = self
            .inputs()
            .next()
            .map(|v| v.name.clone())
            .ok_or_else(|| OnnxError::Decode("graph has no runtime input".into()))?;
        let mut values: HashMap<&str, Tensor> = HashMap::new();
        values.insert(input_name.as_str(), input);
        for node in &self.nodes {
            let args: Vec<Option<&Tensor>> = node
                .inputs
                .iter()
                .map(|name| {
                    if name.is_empty() {
                        Ok(None)
                    } else {
                        values
                            .get(name.as_str())
                            .or_else(|| self.initializers.get(name))
                            .map(Some)
                            .ok_or_else(|| OnnxError::Eval {
                                node: node.name.clone(),
                                message: format!("input {name:?} is not available"),
                            })
                    }
                })
                .collect::<Result<_, _>>()?;
            let results = ops::eval(node, &args).map_err(|message| OnnxError::Eval {
                node: if node.name.is_empty() { node.op_type.clone() } else { node.name.clone() },
                message,
            })?;
            for (name, t) in node.outputs.iter().zip(results) {
                values.insert(name.as_str(), t);
            }
        }
        let out = &self.outputs[0].name;
        values
            .remove(out.as_str())
            .or_else(|| self.initializers.get(out).cloned())
            .ok_or_else(|| OnnxError::Decode(format!("output {out:?} was never produced")))
    }
}

fn decode_graph(bytes: &[u8]) -> Result<OnnxModel, OnnxError> {
    let mut model = OnnxModel { nodes: vec![], initializers: HashMap::new(), inputs: vec![], outputs: vec![] };
    let mut r = Reader::new(bytes);
    while let Some((n, f)) = r.next_field()? {
        match n {
            1 => model.nodes.push(decode_node(f.as_bytes()?)?),
            5 => {
                let (name, t) = decode_tensor(f.as_bytes()?)?;
                model.initializers.insert(name, t);
            }
            11 => model.inputs.push(decode_value_info(f.as_bytes()?)?),
            12 => model.outputs.push(decode_value_info(f.as_bytes()?)?),
            _ => {}
        }
    }
    Ok(model)
}

fn decode_node(bytes: &[u8]) -> Result<Node, OnnxError> {
    let mut node = Node {
        name: String::new(),
        op_type: String::new(),
        inputs: vec![],
        outputs: vec![],
        attrs: HashMap::new(),
    };
    let mut r = Reader::new(bytes);
    while let Some((n, f)) = r.next_field()? {
        match n {
            1 => node.inputs.push(f.as_string()?),
            2 => node.outputs.push(f.as_string()?),
            3 => node.name = f.as_string()?,
            4 => node.op_type = f.as_string()?,
            5 => {
                let (name, attr) = decode_attr(f.as_bytes()?)?;
                node.attrs.insert(name, attr);
            }
            7 => {
                let domain = f.as_string()?;
                if !domain.is_empty() && domain != "ai.onnx" {
                    return Err(OnnxError::UnsupportedOperator(format!("domain {domain}")));
                }
            }
            _ => {}
        }
    }
    Ok(node)
}

fn decode_attr(bytes: &[u8]) -> Result<(String, Attr), OnnxError> {
    const FLOAT: u64 = 1;
    const INT: u64 = 2;
    const STRING: u64 = 3;
    const TENSOR: u64 = 4;
    const FLOATS: u64 = 6;
    const INTS: u64 = 7;
    let mut name = String::new();
    let mut kind = None;
    let (mut f_val, mut i_val, mut s_val, mut t_val) = (None, None, None, None);
    let (mut floats, mut ints) = (vec![], vec![]);
    let mut r = Reader::new(bytes);
    while let Some((n, f)) = r.next_field()? {
        match n {
            1 => name = f.as_string()?,
            2 => f_val = Some(f.as_f32()?),
            3 => i_val = Some(f.as_i64()?),
            4 => s_val = Some(f.as_string()?),
            5 => t_val = Some(decode_tensor(f.as_bytes()?)?.1),
            7 => f.push_f32s(&mut floats)?,
            8 => f.push_i64s(&mut ints)?,
            20 => kind = Some(f.as_u64()?),
            _ => {}
        }
    }
    let attr = match kind {
        Some(FLOAT) => Attr::Float(f_val.unwrap_or(0.0)),
        Some(INT) => Attr::Int(i_val.unwrap_or(0)),
        Some(STRING) => Attr::Str(s_val.unwrap_or_default()),
        Some(TENSOR) => Attr::Tensor(t_val.ok_or_else(|| OnnxError::Decode(format!("attribute {name} lacks a tensor")))?),
        Some(FLOATS) => Attr::Floats(floats),
        Some(INTS) => Attr::Ints(ints),
        // Pre-IR-3 files omit the type; infer it from what was set.
        None => {
            if let Some(t) = t_val {
                Attr::Tensor(t)
            } else if !ints.is_empty() {
                Attr::Ints(ints)
            } else if !floats.is_empty() {
                Attr::Floats(floats)
            } else if let Some(v) = f_val {
                Attr::Float(v)
            } else if let Some(v) = i_val {
                Attr::Int(v)
            } else {
                Attr::Str(s_val.unwrap_or_default())
            }
        }
        Some(other) => return Err(OnnxError::Decode(format!("attribute {name} has unsupported type {other}"))),
    };
    Ok((name, attr))
}

pub(crate) const ELEM_FLOAT: i64 = 1;
pub(crate) const ELEM_INT64: i64 = 7;

fn decode_tensor(bytes: &[u8]) -> Result<(String, Tensor), OnnxError> {
    let mut dims = vec![];
    let mut elem = ELEM_FLOAT;
    let mut name = String::new();
    let mut floats = vec![];
    let mut int64s = vec![];
    let mut raw: Option<&[u8]> = None;
    let mut r = Reader::new(bytes);
    while let Some((n, f)) = r.next_field()? {
        match n {
            1 => f.push_i64s(&mut dims)?,
            2 => elem = f.as_i64()?,
            4 => f.push_f32s(&mut floats)?,
            7 => f.push_i64s(&mut int64s)?,
            8 => name = f.as_string()?,
            9 => raw = Some(f.as_bytes()?),
            _ => {}
        }
    }
    if dims.iter().any(|&d| d < 0) {
        return Err(OnnxError::Decode(format!("tensor {name} has negative dims")));
    }
    let shape: Vec<usize> = dims.iter().map(|&d| d as usize).collect();
    let count: usize = shape.iter().product();
    let data = match elem {
        ELEM_FLOAT => {
            let v = match raw {
                Some(b) => {
                    let mut v = vec![];
                    Field::Bytes(b).push_f32s(&mut v)?;
                    v
                }
                None => floats,
            };
            TensorData::F32(v)
        }
        ELEM_INT64 => {
            let v = match raw {
                Some(b) => b
                    .chunks_exact(8)
                    .map(|c| i64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect(),
                None => int64s,
            };
            TensorData::I64(v)
        }
        other => return Err(OnnxError::UnsupportedType(other)),
    };
    let len = match &data {
        TensorData::F32(v) => v.len(),
        TensorData::I64(v) => v.len(),
    };
    if len != count {
        return Err(OnnxError::Decode(format!("tensor {name} declares {count} elements but holds {len}")));
    }
    Ok((name, Tensor { shape, data }))
}

fn decode_value_info(bytes: &[u8]) -> Result<ValueInfo, OnnxError> {
    let mut info = ValueInfo { name: String::new(), dims: vec![] };
    let mut r = Reader::new(bytes);
    while let Some((n, f)) = r.next_field()? {
        match n {
            1 => info.name = f.as_string()?,
            // TypeProto -> tensor_type(1) -> shape(2) -> dim(1) -> dim_value(1) | dim_param(2)
            2 => {
                let mut tr = Reader::new(f.as_bytes()?);
                while let Some((tn, tf)) = tr.next_field()? {
                    if tn != 1 {
                        continue;
                    }
                    let mut sr = Reader::new(tf.as_bytes()?);
                    while let Some((sn, sf)) = sr.next_field()? {
                        if sn != 2 {
                            continue;
                        }
                        let mut dr = Reader::new(sf.as_bytes()?);
                        while let Some((dn, df)) = dr.next_field()? {
                            if dn != 1 {
                                continue;
                            }
                            let mut dim = Dim::Symbolic;
                            let mut vr = Reader::new(df.as_bytes()?);
                            while let Some((vn, vf)) = vr.next_field()? {
                                if vn == 1 {
                                    let v = vf.as_i64()?;
                                    if v > 0 {
                                        dim = Dim::Fixed(v as usize);
                                    }
                                }
                            }
                            info.dims.push(dim);
                        }
                    }
                }
            }
            _ => {}
        }
    }
    Ok(info)
}
