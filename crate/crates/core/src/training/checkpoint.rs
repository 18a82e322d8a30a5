//! Binary checkpoint: magic, version, then named length-prefixed sections.

use std::collections::HashMap;
use std::path::Path;

use super::config::TrainConfig;
use crate::denoiser::{DenoiserParams, Schema};
use crate::diffusion::{Component, NoiseSchedule};
use crate::error::{Error, Result};
use crate::graphdata::Marginals;
use crate::numerics::{AmsGrad, OptimizerConfig};
use crate::{ParamSet, Tensor};

pub const MAGIC: &[u8; 5] = b"GMKR1";
pub const VERSION: u16 = 1;

/// Facts about the training graph that generation needs.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelMeta {
    pub name: String,
    pub num_nodes: usize,
    /// Class count when labels are modeled as the last attribute column.
    pub label_column: Option<usize>,
    /// Empirical label distribution of the training graph, if it had labels.
    pub label_distribution: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub schedule: NoiseSchedule,
    pub params: DenoiserParams,
    pub optim_attr: AmsGrad<f64>,
    pub optim_edge: AmsGrad<f64>,
    pub step: u64,
    pub best_score: f64,
    pub meta: ModelMeta,
}

pub(crate) fn optimizer_config(cfg: &TrainConfig, which: Component) -> OptimizerConfig {
    let lr = match which {
        Component::Attr => cfg.lr_attr,
        Component::Edge => cfg.lr_edge,
    };
    OptimizerConfig {
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        eps: cfg.eps,
        ..OptimizerConfig::amsgrad(lr)
    }
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }

    fn f64(&mut self, x: f64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }

    fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.0.extend_from_slice(b);
    }

    fn f64s(&mut self, xs: &[f64]) {
        self.u64(xs.len() as u64);
        xs.iter().for_each(|&x| self.f64(x));
    }

    fn usizes(&mut self, xs: &[usize]) {
        self.u64(xs.len() as u64);
        xs.iter().for_each(|&x| self.u64(x as u64));
    }

    fn tensor(&mut self, t: &Tensor) {
        self.usizes(t.shape());
        t.data().iter().for_each(|&x| self.f64(x));
    }

    fn tensors(&mut self, ts: &[Tensor]) {
        self.u64(ts.len() as u64);
        ts.iter().for_each(|t| self.tensor(t));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.buf.len() < k {
            return Err(Error::Format(format!("truncated {} section", self.what)));
        }
        let (head, rest) = self.buf.split_at(k);
        self.buf = rest;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize> {
        let k = self.u64()?;
        // every element takes at least one byte, so larger counts are corrupt
        if k > self.buf.len() as u64 {
            return Err(Error::Format(format!("truncated {} section", self.what)));
        }
        Ok(k as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bytes(&mut self) -> Result<&'a [u8]> {
        let k = self.len()?;
        self.take(k)
    }

    fn string(&mut self) -> Result<String> {
        String::from_utf8(self.bytes()?.to_vec())
            .map_err(|_| Error::Format(format!("bad text in {}", self.what)))
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let k = self.len()?;
        (0..k).map(|_| self.f64()).collect()
    }

    fn usizes(&mut self) -> Result<Vec<usize>> {
        let k = self.len()?;
        (0..k).map(|_| self.u64().map(|x| x as usize)).collect()
    }

    fn tensor(&mut self) -> Result<Tensor> {
        let shape = self.usizes()?;
        let count = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|&c| c <= self.buf.len() / 8)
            .ok_or_else(|| Error::Format(format!("truncated {} section", self.what)))?;
        let data = (0..count).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Ok(Tensor::from_vec(shape, data)?)
    }

    fn tensors(&mut self) -> Result<Vec<Tensor>> {
        let k = self.len()?;
        (0..k).map(|_| self.tensor()).collect()
    }

    fn finish(&self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(Error::Format(format!(
                "trailing bytes in {} section",
                self.what
            )))
        }
    }
}

fn write_params(p: &ParamSet) -> Vec<u8> {
    let mut w = Writer::default();
    w.u64(p.len() as u64);
    for (name, t) in p.iter() {
        w.bytes(name.as_bytes());
        w.tensor(t);
    }
    w.0
}

fn read_params(buf: &[u8], what: &'static str, into: &mut ParamSet) -> Result<()> {
    let mut r = Reader { buf, what };
    let k = r.len()?;
    let named = (0..k)
        .map(|_| Ok((r.string()?, r.tensor()?)))
        .collect::<Result<Vec<_>>>()?;
    r.finish()?;
    into.load(named)
        .map_err(|e| Error::Format(format!("{what} do not match the configured network: {e}")))
}

fn write_optim(o: &AmsGrad<f64>) -> Vec<u8> {
    let mut w = Writer::default();
    w.u64(o.step);
    w.tensors(&o.m);
    w.tensors(&o.v);
    w.tensors(&o.v_max);
    w.0
}

fn read_optim(
    buf: &[u8],
    what: &'static str,
    config: OptimizerConfig,
    params: &ParamSet,
) -> Result<AmsGrad<f64>> {
    let mut r = Reader { buf, what };
    let mut o = AmsGrad::new(config, params);
    o.step = r.u64()?;
    let (m, v, v_max) = (r.tensors()?, r.tensors()?, r.tensors()?);
    r.finish()?;
    for state in [&m, &v, &v_max] {
        let shapes_match = state.len() == params.len()
            && state
                .iter()
                .zip(params.tensors())
                .all(|(a, b)| a.shape() == b.shape());
        if !shapes_match {
            return Err(Error::Format(format!("{what} do not match the parameters")));
        }
    }
    (o.m, o.v, o.v_max) = (m, v, v_max);
    Ok(o)
}

fn write_schedule(s: &NoiseSchedule) -> Vec<u8> {
    let mut w = Writer::default();
    w.u64(s.total() as u64);
    w.f64(s.offset());
    w.usizes(s.steps(Component::Attr));
    w.usizes(s.steps(Component::Edge));
    let m = s.marginals();
    w.u64(m.attr.len() as u64);
    m.attr.iter().for_each(|p| w.f64s(p));
    w.f64(m.edge[0]);
    w.f64(m.edge[1]);
    w.f64s(s.alpha_bars(Component::Attr));
    w.f64s(s.alpha_bars(Component::Edge));
    w.0
}

fn read_schedule(buf: &[u8]) -> Result<NoiseSchedule> {
    let mut r = Reader {
        buf,
        what: "schedule",
    };
    let total = r.u64()? as usize;
    let s = r.f64()?;
    let steps_attr = r.usizes()?;
    let steps_edge = r.usizes()?;
    let f = r.len()?;
    let attr = (0..f).map(|_| r.f64s()).collect::<Result<Vec<_>>>()?;
    let edge = [r.f64()?, r.f64()?];
    let (bars_attr, bars_edge) = (r.f64s()?, r.f64s()?);
    r.finish()?;
    let sched = NoiseSchedule::general(total, steps_attr, steps_edge, s, Marginals { attr, edge })
        .map_err(|e| Error::Format(format!("schedule: {e}")))?;
    if sched.alpha_bars(Component::Attr) != bars_attr.as_slice()
        || sched.alpha_bars(Component::Edge) != bars_edge.as_slice()
    {
        return Err(Error::Format(
            "schedule arrays disagree with their parameters".into(),
        ));
    }
    Ok(sched)
}

fn write_meta(c: &Checkpoint) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(c.meta.name.as_bytes());
    w.u64(c.meta.num_nodes as u64);
    w.u64(c.meta.label_column.map_or(0, |k| k as u64 + 1));
    match &c.meta.label_distribution {
        Some(p) => {
            w.u64(1);
            w.f64s(p);
        }
        None => w.u64(0),
    }
    w.usizes(&c.params.schema.cardinalities);
    w.u64(c.params.schema.num_labels as u64);
    w.u64(c.step);
    w.f64(c.best_score);
    w.0
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let sections: [(&str, Vec<u8>); 7] = [
            ("config", self.config.to_text().into_bytes()),
            ("meta", write_meta(self)),
            ("schedule", write_schedule(&self.schedule)),
            ("attr_params", write_params(&self.params.attr_params)),
            ("edge_params", write_params(&self.params.edge_params)),
            ("attr_optim", write_optim(&self.optim_attr)),
            ("edge_optim", write_optim(&self.optim_edge)),
        ];
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&VERSION.to_le_bytes());
        for (name, body) in sections {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(body.len() as u64).to_le_bytes());
            out.extend_from_slice(&body);
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        if buf.len() < MAGIC.len() || &buf[..MAGIC.len()] != MAGIC {
            return Err(Error::Format("bad magic bytes, expected \"GMKR1\"".into()));
        }
        let mut r = Reader {
            buf: &buf[MAGIC.len()..],
            what: "header",
        };
        let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported version {version}, expected {VERSION}"
            )));
        }
        let mut sections = HashMap::new();
        while !r.buf.is_empty() {
            let k = u16::from_le_bytes(r.take(2)?.try_into().unwrap()) as usize;
            let name = String::from_utf8_lossy(r.take(k)?).into_owned();
            let body = r.bytes()?;
            sections.insert(name, body);
        }
        let section = |name: &str| {
            sections
                .get(name)
                .copied()
                .ok_or_else(|| Error::Format(format!("missing {name} section")))
        };

        let text = std::str::from_utf8(section("config")?)
            .map_err(|_| Error::Format("bad config text".into()))?;
        let mut config = TrainConfig::defaults(
            crate::denoiser::Variant::Sync,
            false,
            super::Scale::Citation,
        );
        config
            .apply_text(text)
            .map_err(|e| Error::Format(e.to_string()))?;

        let mut m = Reader {
            buf: section("meta")?,
            what: "meta",
        };
        let name = m.string()?;
        let num_nodes = m.u64()? as usize;
        let label_column = m.u64()?.checked_sub(1).map(|k| k as usize);
        let label_distribution = match m.u64()? {
            0 => None,
            _ => Some(m.f64s()?),
        };
        let schema = Schema {
            cardinalities: m.usizes()?,
            num_labels: m.u64()? as usize,
        };
        let step = m.u64()?;
        let best_score = m.f64()?;
        m.finish()?;

        let schedule = read_schedule(section("schedule")?)?;
        let mut params = DenoiserParams::new(config.model.clone(), schema, 0)
            .map_err(|e| Error::Format(e.to_string()))?;
        read_params(
            section("attr_params")?,
            "attribute parameters",
            &mut params.attr_params,
        )?;
        read_params(
            section("edge_params")?,
            "edge parameters",
            &mut params.edge_params,
        )?;
        let optim_attr = read_optim(
            section("attr_optim")?,
            "attribute optimizer state",
            optimizer_config(&config, Component::Attr),
            &params.attr_params,
        )?;
        let optim_edge = read_optim(
            section("edge_optim")?,
            "edge optimizer state",
            optimizer_config(&config, Component::Edge),
            &params.edge_params,
        )?;
        Ok(Self {
            config,
            schedule,
            params,
            optim_attr,
            optim_edge,
            step,
            best_score,
            meta: ModelMeta {
                name,
                num_nodes,
                label_column,
                label_distribution,
            },
        })
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, ckpt.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&buf)
}
