//! Serializer for small ONNX graphs, used to produce test models and fixtures.

use super::wire::Writer;
use super::{ELEM_FLOAT, ELEM_INT64};

#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    Int(i64),
    Ints(Vec<i64>),
    Float(f32),
    Str(String),
    Tensor { dims: Vec<i64>, data: Vec<f32> },
}

struct NodeDef {
    op: String,
    inputs: Vec<String>,
    outputs: Vec<String>,
    attrs: Vec<(String, AttrValue)>,
}

enum InitData {
    F32(Vec<f32>),
    I64(Vec<i64>),
}

/// Builds a single-input, single-output graph. Negative dims in the declared
/// signature are written as symbolic dimensions.
pub struct GraphBuilder {
    input: (String, Vec<i64>),
    output: (String, Vec<i64>),
    initializers: Vec<(String, Vec<i64>, InitData)>,
    nodes: Vec<NodeDef>,
}

impl GraphBuilder {
    pub fn new(input: &str, input_dims: &[i64], output: &str, output_dims: &[i64]) -> Self {
        Self {
            input: (input.into(), input_dims.to_vec()),
            output: (output.into(), output_dims.to_vec()),
            initializers: vec![],
            nodes: vec![],
        }
    }

    pub fn initializer(&mut self, name: &str, dims: &[i64], data: Vec<f32>) -> &mut Self {
        self.initializers.push((name.into(), dims.to_vec(), InitData::F32(data)));
        self
    }

    pub fn initializer_i64(&mut self, name: &str, dims: &[i64], data: Vec<i64>) -> &mut Self {
        self.initializers.push((name.into(), dims.to_vec(), InitData::I64(data)));
        self
    }

    pub fn node(&mut self, op: &str, inputs: &[&str], outputs: &[&str], attrs: Vec<(&str, AttrValue)>) -> &mut Self {
        self.nodes.push(NodeDef {
            op: op.into(),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            attrs: attrs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        });
        self
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut graph = Writer::default();
        for (i, n) in self.nodes.iter().enumerate() {
            let mut w = Writer::default();
            for s in &n.inputs {
                w.string(1, s);
            }
            for s in &n.outputs {
                w.string(2, s);
            }
            w.string(3, &format!("{}_{i}", n.op));
            w.string(4, &n.op);
            for (name, value) in &n.attrs {
                w.message(5, attribute(name, value));
            }
            graph.message(1, w);
        }
        graph.string(2, "graph");
        for (name, dims, data) in &self.initializers {
            graph.message(5, tensor(name, dims, data));
        }
        graph.message(11, value_info(&self.input.0, &self.input.1));
        graph.message(12, value_info(&self.output.0, &self.output.1));

        let mut model = Writer::default();
        model.int(1, 8);
        model.string(2, "cxr-curate");
        model.message(7, graph);
        let mut opset = Writer::default();
        opset.int(2, 13);
        model.message(8, opset);
        model.buf
    }
}

fn tensor(name: &str, dims: &[i64], data: &InitData) -> Writer {
    let mut t = Writer::default();
    t.packed_ints(1, dims);
    match data {
        InitData::F32(v) => {
            t.int(2, ELEM_FLOAT);
            t.string(8, name);
            let raw: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
            t.bytes(9, &raw);
        }
        InitData::I64(v) => {
            t.int(2, ELEM_INT64);
            t.packed_ints(7, v);
            t.string(8, name);
        }
    }
    t
}

fn attribute(name: &str, value: &AttrValue) -> Writer {
    let mut a = Writer::default();
    a.string(1, name);
    match value {
        AttrValue::Float(f) => {
            a.float(2, *f);
            a.int(20, 1);
        }
        AttrValue::Int(i) => {
            a.int(3, *i);
            a.int(20, 2);
        }
        AttrValue::Str(s) => {
            a.string(4, s);
            a.int(20, 3);
        }
        AttrValue::Tensor { dims, data } => {
            a.message(5, tensor("", dims, &InitData::F32(data.clone())));
            a.int(20, 4);
        }
        AttrValue::Ints(v) => {
            a.packed_ints(8, v);
            a.int(20, 7);
        }
    }
    a
}

fn value_info(name: &str, dims: &[i64]) -> Writer {
    let mut shape = Writer::default();
    for &d in dims {
        let mut dim = Writer::default();
        if d >= 0 {
            dim.int(1, d);
        } else {
            dim.string(2, "N");
        }
        shape.message(1, dim);
    }
    let mut tensor_type = Writer::default();
    tensor_type.int(1, ELEM_FLOAT);
    tensor_type.message(2, shape);
    let mut ty = Writer::default();
    ty.message(1, tensor_type);
    let mut vi = Writer::default();
    vi.string(1, name);
    vi.message(2, ty);
    vi
}

/// Model mapping a `1x1xHxW` input to a same-shaped output filled with `value`.
pub fn constant_probability_model(value: f32) -> Vec<u8> {
    let mut g = GraphBuilder::new("image", &[1, 1, -1, -1], "prob", &[1, 1, -1, -1]);
    g.initializer("zero", &[], vec![0.0])
        .initializer("level", &[], vec![value])
        .node("Mul", &["image", "zero"], &["blank"], vec![])
        .node("Add", &["blank", "level"], &["prob"], vec![]);
    g.encode()
}

/// Model returning `sigmoid(gain * (threshold - x))`: bright pixels map toward 0 and
/// dark ones toward 1, optionally evaluated at a downsampled resolution.
pub fn dark_region_model(gain: f32, threshold: f32, downsample: usize) -> Vec<u8> {
    let mut g = GraphBuilder::new("image", &[1, 1, -1, -1], "prob", &[1, 1, -1, -1]);
    g.initializer("gain", &[], vec![-gain]).initializer("offset", &[], vec![gain * threshold]);
    let src = if downsample > 1 {
        let k = downsample as i64;
        g.node(
            "AveragePool",
            &["image"],
            &["small"],
            vec![("kernel_shape", AttrValue::Ints(vec![k, k])), ("strides", AttrValue::Ints(vec![k, k]))],
        );
        "small"
    } else {
        "image"
    };
    g.node("Mul", &[src, "gain"], &["scaled"], vec![])
        .node("Add", &["scaled", "offset"], &["logit"], vec![])
        .node("Sigmoid", &["logit"], &["prob"], vec![]);
    g.encode()
}
