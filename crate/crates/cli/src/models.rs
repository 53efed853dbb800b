// SPDX-License-Identifier: Apache-2.0

//! Conversions between trained models and container sections.

use std::path::Path;

use sand_core::encoder::{EncoderDims, EncoderModel, PARAM_NAMES};
use sand_core::nas::{CellKind, NasShape, PrunePolicy, SubNet, SuperNet};
use sand_core::tensor::{Matrix, Param};

use crate::container::{Container, Section};
use crate::error::CliError;

pub const ENCODER: &str = "encoder";
pub const SUPERNET: &str = "supernet";
pub const SUBNET: &str = "subnet";
pub const META: &str = "meta";

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Container(msg.into())
}

fn parse_num<T: std::str::FromStr>(field: &str, s: &str) -> Result<T, CliError> {
    s.trim().parse().map_err(|_| bad(format!("field `{field}` holds `{s}`")))
}

fn parse_list<T: std::str::FromStr>(field: &str, s: &str) -> Result<Vec<T>, CliError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| parse_num(field, x)).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn load_param(section: &Section, name: &str, into: &mut Param) -> Result<(), CliError> {
    let m = section.tensor(name)?;
    if m.shape() != into.value.shape() {
        return Err(bad(format!("tensor `{name}` has shape {:?}, expected {:?}", m.shape(), into.value.shape())));
    }
    into.value = m.clone();
    Ok(())
}

/// Provenance stored alongside every model.
pub fn meta_section(config_hash: &str, seed: u64, config_toml: &str) -> Section {
    let mut s = Section::default();
    s.push_text("config_hash", config_hash);
    s.push_text("seed", seed.to_string());
    s.push_text("config", config_toml);
    s
}

pub fn encoder_section(model: &EncoderModel) -> Section {
    let d = model.dims;
    let mut s = Section::default();
    s.push_text("dims", join(&[d.f0, d.d1, d.d2, d.d3, d.dz]));
    for (name, p) in PARAM_NAMES.iter().zip(&model.params) {
        s.push_tensor(name, &p.value);
    }
    s
}

pub fn encoder_from(section: &Section) -> Result<EncoderModel, CliError> {
    let d: Vec<usize> = parse_list("dims", section.text("dims")?)?;
    let [f0, d1, d2, d3, dz] = d[..] else {
        return Err(bad("encoder dims need five entries"));
    };
    let mut model = EncoderModel::zeros(EncoderDims { f0, d1, d2, d3, dz });
    for (name, p) in PARAM_NAMES.iter().zip(model.params.iter_mut()) {
        load_param(section, name, p)?;
    }
    Ok(model)
}

pub fn supernet_section(net: &SuperNet) -> Section {
    let mut s = Section::default();
    s.push_text("input_len", net.input_len.to_string());
    s.push_text("layers", net.shape.layers.to_string());
    s.push_text("kinds", net.shape.kinds.iter().map(|k| k.name()).collect::<Vec<_>>().join(","));
    s.push_text("pool_layers", join(&net.shape.pool_layers));
    s.push_text("mask", net.mask_grid());
    for (l, cells) in net.layers.iter().enumerate() {
        for (c, cell) in cells.iter().enumerate() {
            for (k, p) in cell.params.iter().enumerate() {
                s.push_tensor(&format!("l{l}.c{c}.p{k}"), &p.value);
            }
        }
    }
    s.push_tensor("head_w", &net.head_w.value);
    s.push_tensor("head_b", &net.head_b.value);
    s
}

pub fn supernet_from(section: &Section) -> Result<SuperNet, CliError> {
    let kinds = section
        .text("kinds")?
        .split(',')
        .map(|k| k.parse::<CellKind>().map_err(|_| bad(format!("unknown cell kind `{k}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let shape = NasShape {
        layers: parse_num("layers", section.text("layers")?)?,
        kinds,
        pool_layers: parse_list("pool_layers", section.text("pool_layers")?)?,
    };
    let input_len = parse_num("input_len", section.text("input_len")?)?;
    let mut net = SuperNet::new(input_len, shape, 0).map_err(|e| bad(e.to_string()))?;
    for (l, cells) in net.layers.iter_mut().enumerate() {
        for (c, cell) in cells.iter_mut().enumerate() {
            for (k, p) in cell.params.iter_mut().enumerate() {
                load_param(section, &format!("l{l}.c{c}.p{k}"), p)?;
            }
        }
    }
    load_param(section, "head_w", &mut net.head_w)?;
    load_param(section, "head_b", &mut net.head_b)?;
    let mask = SuperNet::parse_mask_grid(section.text("mask")?).map_err(|e| bad(e.to_string()))?;
    net.set_mask(mask).map_err(|e| bad(e.to_string()))?;
    Ok(net)
}

pub fn parse_policy(s: &str) -> Result<PrunePolicy, CliError> {
    if let Some(t) = s.strip_prefix("tau=") {
        return Ok(PrunePolicy::Threshold(parse_num("policy", t)?));
    }
    if let Some(k) = s.strip_prefix("top") {
        return Ok(PrunePolicy::TopK(parse_num("policy", k)?));
    }
    Err(bad(format!("unknown prune policy `{s}`")))
}

pub fn subnet_section(sub: &SubNet) -> Section {
    let mut s = supernet_section(sub.net());
    s.push_text("policy", sub.policy.to_string());
    s.push_text("report_seed", sub.report_seed.to_string());
    s.push_text("report_permutations", sub.report_permutations.to_string());
    s
}

pub fn subnet_from(section: &Section) -> Result<SubNet, CliError> {
    Ok(SubNet::from_parts(
        supernet_from(section)?,
        parse_policy(section.text("policy")?)?,
        parse_num("report_seed", section.text("report_seed")?)?,
        parse_num("report_permutations", section.text("report_permutations")?)?,
    ))
}

/// Writes a one-model container with its provenance section.
pub fn save(path: &Path, name: &str, section: &Section, meta: &Section) -> Result<(), CliError> {
    let mut c = Container::new();
    c.insert(META, meta);
    c.insert(name, section);
    c.write(path)
}

pub fn load_section(path: &Path, name: &str) -> Result<Section, CliError> {
    Container::read(path)?.section(name)
}

/// Embedding rows as a matrix, for tests and tools that want one tensor.
pub fn stack(rows: &[Vec<f64>]) -> Result<Matrix, CliError> {
    let cols = rows.first().map_or(0, Vec::len);
    let data: Vec<f64> = rows.iter().flatten().copied().collect();
    Matrix::from_vec(rows.len(), cols, data).map_err(|e| bad(e.to_string()))
}
