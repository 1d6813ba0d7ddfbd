//! Plain-text model checkpoints.
//!
//! Every file starts with `wavemat-checkpoint 1`, then `model rf` or
//! `model tcn`, then the class table (`classes <n>` followed by one
//! `class <id> <name>` line each). Floats are written in shortest
//! round-trip form, so reading a checkpoint back yields the identical
//! model. The file ends with `end`.
//!
//! Forest body:
//!
//! ```text
//! n_features 256
//! param <name> <value>        (n_trees, max_depth, features_per_node,
//!                              min_samples_leaf, bootstrap, seed)
//! trees <count>
//! tree <node count>
//! split <feature> <threshold> <left> <right>
//! leaf <votes per class...>
//! ```
//!
//! TCN body:
//!
//! ```text
//! layout channels|sequence
//! readout last|mean
//! input_len <n>
//! input_scale <x>
//! dropout <p>
//! blocks <count>
//! conv1 <in> <out> <kernel> <dilation>    followed by `w ...` and `b ...`
//! conv2 ... | conv2 none
//! projection ... | projection none
//! head <in> <out>                          followed by `w ...` and `b ...`
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use wavemat_core::experiment::TrainedModel;
use wavemat_core::forest::{Forest, ForestParams, Tree, TreeNode};
use wavemat_core::tcn::layers::{Conv1d, Linear};
use wavemat_core::tcn::{InputLayout, Readout, TcnModel, TemporalBlock};
use wavemat_core::MaterialClass;

use crate::dataset_io::write_text;
use crate::{Error, Result};

pub const MAGIC: &str = "wavemat-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: TrainedModel,
    pub class_table: Vec<MaterialClass>,
}

impl Checkpoint {
    pub fn forest(f: Forest) -> Self {
        Checkpoint {
            class_table: f.class_table().to_vec(),
            model: TrainedModel::Forest(f),
        }
    }

    pub fn tcn(m: TcnModel, class_table: Vec<MaterialClass>) -> Self {
        Checkpoint {
            model: TrainedModel::Tcn(m),
            class_table,
        }
    }
}

fn floats(out: &mut String, tag: &str, v: &[f64]) {
    out.push_str(tag);
    for x in v {
        write!(out, " {x}").unwrap();
    }
    out.push('\n');
}

fn conv(out: &mut String, tag: &str, c: Option<&Conv1d>) {
    match c {
        None => writeln!(out, "{tag} none").unwrap(),
        Some(c) => {
            writeln!(out, "{tag} {} {} {} {}", c.in_channels, c.out_channels, c.kernel_size, c.dilation).unwrap();
            floats(out, "w", &c.weight);
            floats(out, "b", &c.bias);
        }
    }
}

pub fn format_checkpoint(ck: &Checkpoint) -> String {
    let mut out = format!("{MAGIC} {VERSION}\n");
    let kind = ck.model.kind().as_str();
    writeln!(out, "model {kind}").unwrap();
    writeln!(out, "classes {}", ck.class_table.len()).unwrap();
    for c in &ck.class_table {
        writeln!(out, "class {} {}", c.id.0, c.name).unwrap();
    }
    match &ck.model {
        TrainedModel::Forest(f) => {
            let p = f.params();
            writeln!(out, "n_features {}", f.n_features()).unwrap();
            writeln!(out, "param n_trees {}", p.n_trees).unwrap();
            writeln!(out, "param max_depth {}", p.max_depth).unwrap();
            writeln!(out, "param features_per_node {}", p.features_per_node).unwrap();
            writeln!(out, "param min_samples_leaf {}", p.min_samples_leaf).unwrap();
            writeln!(out, "param bootstrap {}", p.bootstrap).unwrap();
            writeln!(out, "param seed {}", p.seed).unwrap();
            writeln!(out, "trees {}", f.trees().len()).unwrap();
            for t in f.trees() {
                writeln!(out, "tree {}", t.nodes().len()).unwrap();
                for n in t.nodes() {
                    match n {
                        TreeNode::Internal {
                            feature,
                            threshold,
                            left,
                            right,
                        } => writeln!(out, "split {feature} {threshold} {left} {right}").unwrap(),
                        TreeNode::Leaf { votes } => {
                            out.push_str("leaf");
                            for v in votes {
                                write!(out, " {v}").unwrap();
                            }
                            out.push('\n');
                        }
                    }
                }
            }
        }
        TrainedModel::Tcn(m) => {
            writeln!(out, "layout {}", m.layout.as_str()).unwrap();
            writeln!(out, "readout {}", m.readout.as_str()).unwrap();
            writeln!(out, "input_len {}", m.input_len).unwrap();
            writeln!(out, "input_scale {}", m.input_scale).unwrap();
            writeln!(out, "dropout {}", m.dropout).unwrap();
            writeln!(out, "blocks {}", m.blocks.len()).unwrap();
            for b in &m.blocks {
                conv(&mut out, "conv1", Some(&b.conv1));
                conv(&mut out, "conv2", b.conv2.as_ref());
                conv(&mut out, "projection", b.projection.as_ref());
            }
            writeln!(out, "head {} {}", m.head.in_features, m.head.out_features).unwrap();
            floats(&mut out, "w", &m.head.weight);
            floats(&mut out, "b", &m.head.bias);
        }
    }
    out.push_str("end\n");
    out
}

pub fn write_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    write_text(path, &format_checkpoint(ck))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text, path)
}

struct Lines<'a> {
    path: &'a Path,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, m: impl Into<String>) -> Error {
        Error::format(self.path, self.line, m)
    }

    /// Next line split as `(tag, rest)`.
    fn next(&mut self) -> Result<(&'a str, &'a str)> {
        let (i, l) = self.iter.next().ok_or_else(|| Error::format(self.path, self.line + 1, "unexpected end of file"))?;
        self.line = i + 1;
        Ok(l.split_once(' ').unwrap_or((l, "")))
    }

    fn tagged(&mut self, tag: &str) -> Result<&'a str> {
        let (t, rest) = self.next()?;
        if t != tag {
            return Err(self.err(format!("expected {tag:?}, found {t:?}")));
        }
        Ok(rest)
    }

    fn value<T: FromStr>(&mut self, tag: &str) -> Result<T> {
        let rest = self.tagged(tag)?;
        self.parse(rest)
    }

    fn parse<T: FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("cannot parse {s:?}")))
    }

    fn list<T: FromStr>(&mut self, tag: &str, len: usize) -> Result<Vec<T>> {
        let rest = self.tagged(tag)?;
        let v = rest
            .split_ascii_whitespace()
            .map(|s| self.parse(s))
            .collect::<Result<Vec<T>>>()?;
        if v.len() != len {
            return Err(self.err(format!("{tag}: expected {len} values, found {}", v.len())));
        }
        Ok(v)
    }

    fn dims(&mut self, tag: &str, n: usize) -> Result<Option<Vec<usize>>> {
        let rest = self.tagged(tag)?;
        if rest == "none" {
            return Ok(None);
        }
        let v = rest
            .split_ascii_whitespace()
            .map(|s| self.parse(s))
            .collect::<Result<Vec<usize>>>()?;
        if v.len() != n {
            return Err(self.err(format!("{tag}: expected {n} dimensions")));
        }
        Ok(Some(v))
    }

    fn conv(&mut self, tag: &str) -> Result<Option<Conv1d>> {
        let Some(d) = self.dims(tag, 4)? else {
            return Ok(None);
        };
        if d.contains(&0) || d[0].checked_mul(d[1]).and_then(|x| x.checked_mul(d[2])).is_none() {
            return Err(self.err(format!("{tag}: invalid dimensions")));
        }
        let mut c = Conv1d::zeros(d[0], d[1], d[2], d[3]);
        c.weight = self.list("w", c.weight.len())?;
        c.bias = self.list("b", c.bias.len())?;
        Ok(Some(c))
    }
}

pub fn parse_checkpoint(text: &str, path: &Path) -> Result<Checkpoint> {
    let mut r = Lines {
        path,
        iter: text.lines().enumerate(),
        line: 0,
    };
    let version: u32 = r.value(MAGIC)?;
    if version != VERSION {
        return Err(r.err(format!("unsupported checkpoint version {version}")));
    }
    let kind = r.tagged("model")?;
    let n: usize = r.value("classes")?;
    let mut class_table = Vec::with_capacity(n);
    for _ in 0..n {
        let rest = r.tagged("class")?;
        let (id, name) = rest.split_once(' ').ok_or_else(|| r.err("expected class <id> <name>"))?;
        class_table.push(MaterialClass::new(r.parse(id)?, name));
    }
    let model = match kind {
        "rf" => TrainedModel::Forest(parse_forest(&mut r, &class_table)?),
        "tcn" => TrainedModel::Tcn(parse_tcn(&mut r, class_table.len())?),
        other => return Err(r.err(format!("unknown model kind {other:?}"))),
    };
    r.tagged("end")?;
    Ok(Checkpoint { model, class_table })
}

fn parse_forest(r: &mut Lines, class_table: &[MaterialClass]) -> Result<Forest> {
    let n_features: usize = r.value("n_features")?;
    let mut param = |name: &str| -> Result<&str> {
        let rest = r.tagged("param")?;
        match rest.split_once(' ') {
            Some((k, v)) if k == name => Ok(v),
            _ => Err(r.err(format!("expected param {name}"))),
        }
    };
    let (a, b, c, d, e, f) = (
        param("n_trees")?.to_string(),
        param("max_depth")?.to_string(),
        param("features_per_node")?.to_string(),
        param("min_samples_leaf")?.to_string(),
        param("bootstrap")?.to_string(),
        param("seed")?.to_string(),
    );
    let params = ForestParams {
        n_trees: r.parse(&a)?,
        max_depth: r.parse(&b)?,
        features_per_node: r.parse(&c)?,
        min_samples_leaf: r.parse(&d)?,
        bootstrap: r.parse(&e)?,
        seed: r.parse(&f)?,
    };
    let n_trees: usize = r.value("trees")?;
    let mut trees = Vec::with_capacity(n_trees);
    let mut split_counts = vec![0u64; n_features];
    for _ in 0..n_trees {
        let n_nodes: usize = r.value("tree")?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (tag, rest) = r.next()?;
            let toks: Vec<&str> = rest.split_ascii_whitespace().collect();
            nodes.push(match tag {
                "split" if toks.len() == 4 => {
                    let feature: usize = r.parse(toks[0])?;
                    if feature >= n_features {
                        return Err(r.err(format!("split feature {feature} out of range")));
                    }
                    split_counts[feature] += 1;
                    TreeNode::Internal {
                        feature,
                        threshold: r.parse(toks[1])?,
                        left: r.parse(toks[2])?,
                        right: r.parse(toks[3])?,
                    }
                }
                "leaf" => TreeNode::Leaf {
                    votes: toks.iter().map(|t| r.parse(t)).collect::<Result<_>>()?,
                },
                _ => return Err(r.err(format!("expected split or leaf, found {tag:?}"))),
            });
        }
        trees.push(Tree::from_nodes(nodes));
    }
    Forest::from_parts(trees, class_table.to_vec(), n_features, params, split_counts)
        .map_err(|e| r.err(e.to_string()))
}

fn parse_tcn(r: &mut Lines, n_classes: usize) -> Result<TcnModel> {
    let layout: InputLayout = r.value("layout")?;
    let readout: Readout = r.value("readout")?;
    let input_len: usize = r.value("input_len")?;
    let input_scale: f64 = r.value("input_scale")?;
    let dropout: f64 = r.value("dropout")?;
    let n_blocks: usize = r.value("blocks")?;
    let mut c_in = match layout {
        InputLayout::Channels => input_len,
        InputLayout::Sequence => 1,
    };
    let mut blocks = Vec::with_capacity(n_blocks);
    for i in 0..n_blocks {
        let conv1 = r.conv("conv1")?.ok_or_else(|| r.err("conv1 cannot be none"))?;
        let conv2 = r.conv("conv2")?;
        let projection = r.conv("projection")?;
        let c_out = conv2.as_ref().unwrap_or(&conv1).out_channels;
        let chained = conv1.in_channels == c_in
            && conv2.as_ref().is_none_or(|c| c.in_channels == conv1.out_channels)
            && match (&conv2, &projection) {
                (None, None) => true,
                (None, Some(_)) => false,
                (Some(_), None) => c_in == c_out,
                (Some(_), Some(p)) => p.in_channels == c_in && p.out_channels == c_out && p.kernel_size == 1,
            };
        if !chained {
            return Err(r.err(format!("block {i}: channel counts do not chain")));
        }
        c_in = c_out;
        blocks.push(TemporalBlock { conv1, conv2, projection });
    }
    let d = r.dims("head", 2)?.ok_or_else(|| r.err("head cannot be none"))?;
    if d[0] != c_in || d[1] != n_classes {
        return Err(r.err("head shape does not match the last block and class table"));
    }
    let mut head = Linear::zeros(d[0], d[1]);
    head.weight = r.list("w", head.weight.len())?;
    head.bias = r.list("b", head.bias.len())?;
    if !(input_scale.is_finite() && input_scale > 0.0) || !(0.0..1.0).contains(&dropout) || input_len == 0 {
        return Err(r.err("invalid input_scale, dropout or input_len"));
    }
    Ok(TcnModel {
        layout,
        readout,
        input_len,
        input_scale,
        dropout,
        blocks,
        head,
    })
}
