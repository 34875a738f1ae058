//! Text serialization of trained models. Floats are written as the hex form
//! of their IEEE-754 bits so a save/load round trip is exact.

use std::io::Write;
use std::path::Path;

use crate::data::{Standardizer, WindowConfig};
use crate::encoder::{Encoder, EncoderDims, EncoderKind};
use crate::error::{Result, SpamsError};
use crate::io_util;
use crate::mil::{AggregationConfig, ContextTable, Objective, RegularizerScope};
use crate::training::{EpochRecord, TrainedModel, Variant};

pub const MAGIC: &str = "SPAMS-MODEL 1";

fn hex(v: f64) -> String {
    format!("0x{:016x}", v.to_bits())
}

fn hex_list(values: &[f64]) -> String {
    values.iter().map(|&v| hex(v)).collect::<Vec<_>>().join(" ")
}

pub fn to_text(model: &TrainedModel) -> String {
    let dims = model.encoder.dims();
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(MAGIC.to_string());
    line(format!("kind {}", model.encoder.kind().name()));
    line(format!("variant {}", model.variant.name()));
    line(format!("D {}", model.input_features()));
    line(format!("w {}", model.window.width));
    line(format!("s {}", model.window.stride));
    line(format!("H {}", dims.hidden));
    line(format!("K {}", dims.classes));
    line(format!(
        "lengths {}",
        model.aggregation.lengths.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ")
    ));
    line(format!("percentile {}", hex(model.aggregation.percentile)));
    line(format!("lambda {}", hex(model.objective.lambda)));
    line(format!("scope {}", model.objective.scope.name()));
    line(format!("unscaled {}", u8::from(model.objective.unscaled_block_gradient)));
    line(format!("positive {}", model.positive_class));
    line(format!("best_epoch {}", model.best_epoch));
    for (name, m) in model.encoder.tensors() {
        line(format!("tensor {name} {} {}", m.rows(), m.cols()));
        for r in 0..m.rows() {
            line(hex_list(m.row(r)));
        }
    }
    let ctx = &model.context;
    line(format!("context {} {}", ctx.num_contexts(), ctx.num_windows()));
    for m in 1..=ctx.num_contexts() {
        for k in 1..=ctx.num_classes() {
            match ctx.cell(m, k) {
                Some(v) => line(format!("cell {m} {k} {}", hex_list(v))),
                None => line(format!("cell {m} {k} none")),
            }
        }
    }
    match &model.standardizer {
        Some(st) => {
            line(format!("standardizer {}", hex_list(&st.mean)));
            line(format!("scales {}", hex_list(&st.std)));
        }
        None => line("standardizer none".into()),
    }
    line(format!("history {}", model.history.len()));
    for r in &model.history {
        line(format!(
            "{} {} {} {} {}",
            r.epoch,
            hex(r.train_cost),
            hex(r.val_cost),
            hex(r.val_auc),
            r.lengths.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ")
        ));
    }
    line("end".into());
    out
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    let text = to_text(model);
    io_util::write_atomic(path, |w: &mut dyn Write| w.write_all(text.as_bytes()))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = io_util::read_to_string(path)?;
    from_text(&path.display().to_string(), &text)
}

struct Reader<'a> {
    source: &'a str,
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line_no: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, message: impl Into<String>) -> SpamsError {
        SpamsError::Model {
            path: self.source.to_string(),
            message: format!("line {}: {}", self.line_no, message.into()),
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        match self.lines.next() {
            Some((i, l)) => {
                self.line_no = i + 1;
                Ok(l)
            }
            None => {
                self.line_no += 1;
                Err(self.err("unexpected end of file"))
            }
        }
    }

    /// Next line split into words, checking the leading keyword.
    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let line = self.next_line()?;
        let mut words = line.split_whitespace();
        match words.next() {
            Some(k) if k == key => Ok(words.collect()),
            other => Err(self.err(format!("expected {key:?}, found {:?}", other.unwrap_or("")))),
        }
    }

    fn single(&mut self, key: &str) -> Result<&'a str> {
        let w = self.keyed(key)?;
        match w.as_slice() {
            [v] => Ok(v),
            _ => Err(self.err(format!("{key} takes exactly one value"))),
        }
    }

    fn usize_of(&self, s: &str) -> Result<usize> {
        s.parse().map_err(|_| self.err(format!("bad integer {s:?}")))
    }

    fn float_of(&self, s: &str) -> Result<f64> {
        s.strip_prefix("0x")
            .and_then(|h| u64::from_str_radix(h, 16).ok())
            .map(f64::from_bits)
            .ok_or_else(|| self.err(format!("bad hex float {s:?}")))
    }

    fn floats(&self, words: &[&str], expected: usize) -> Result<Vec<f64>> {
        if words.len() != expected {
            return Err(self.err(format!("expected {expected} values, found {}", words.len())));
        }
        words.iter().map(|w| self.float_of(w)).collect()
    }

    fn usizes(&self, words: &[&str], expected: usize) -> Result<Vec<usize>> {
        if words.len() != expected {
            return Err(self.err(format!("expected {expected} values, found {}", words.len())));
        }
        words.iter().map(|w| self.usize_of(w)).collect()
    }
}

pub fn from_text(source: &str, text: &str) -> Result<TrainedModel> {
    let mut r = Reader {
        source,
        lines: text.lines().enumerate(),
        line_no: 0,
    };
    let first = r.next_line()?;
    if first != MAGIC {
        return Err(r.err(format!("not a model file (expected header {MAGIC:?})")));
    }
    let kind = EncoderKind::parse(r.single("kind")?).map_err(|e| r.err(e.to_string()))?;
    let variant = Variant::parse(r.single("variant")?).map_err(|e| r.err(e.to_string()))?;
    let d = r.single("D")?;
    let d = r.usize_of(d)?;
    let w = r.single("w")?;
    let w = r.usize_of(w)?;
    let s = r.single("s")?;
    let s = r.usize_of(s)?;
    let h = r.single("H")?;
    let h = r.usize_of(h)?;
    let k = r.single("K")?;
    let k = r.usize_of(k)?;
    let words = r.keyed("lengths")?;
    let lengths = r.usizes(&words, k)?;
    let q = r.single("percentile")?;
    let percentile = r.float_of(q)?;
    let l = r.single("lambda")?;
    let lambda = r.float_of(l)?;
    let scope = RegularizerScope::parse(r.single("scope")?).map_err(|e| r.err(e.to_string()))?;
    let unscaled = match r.single("unscaled")? {
        "0" => false,
        "1" => true,
        other => return Err(r.err(format!("unscaled must be 0 or 1, got {other:?}"))),
    };
    let p = r.single("positive")?;
    let positive_class = r.usize_of(p)?;
    let b = r.single("best_epoch")?;
    let best_epoch = r.usize_of(b)?;

    let window = WindowConfig::new(w, s).map_err(|e| r.err(e.to_string()))?;
    let dims = EncoderDims {
        input_dim: window.input_dim(d),
        hidden: h,
        classes: k,
    };
    dims.validate().map_err(|e| r.err(e.to_string()))?;
    let mut encoder = Encoder::zeros(kind, dims);
    let names: Vec<&'static str> = encoder.tensors().iter().map(|(n, _)| *n).collect();
    for (i, name) in names.iter().enumerate() {
        let words = r.keyed("tensor")?;
        let (rows, cols) = match words.as_slice() {
            [n, rr, cc] if n == name => (r.usize_of(rr)?, r.usize_of(cc)?),
            _ => return Err(r.err(format!("expected tensor {name}"))),
        };
        let shape = encoder.tensors()[i].1.shape();
        if (rows, cols) != shape {
            return Err(r.err(format!("tensor {name} is {rows}x{cols}, expected {}x{}", shape.0, shape.1)));
        }
        for row in 0..rows {
            let line = r.next_line()?;
            let words: Vec<&str> = line.split_whitespace().collect();
            let vals = r.floats(&words, cols)?;
            encoder.tensors_mut()[i].1.as_mut_slice()[row * cols..(row + 1) * cols].copy_from_slice(&vals);
        }
    }

    let words = r.keyed("context")?;
    let cv = r.usizes(&words, 2)?;
    let mut context = ContextTable::empty(cv[0], k, cv[1]);
    for m in 1..=cv[0] {
        for kk in 1..=k {
            let words = r.keyed("cell")?;
            if words.len() < 3 || r.usize_of(words[0])? != m || r.usize_of(words[1])? != kk {
                return Err(r.err(format!("expected cell {m} {kk}")));
            }
            let cell = if words[2..] == ["none"] {
                None
            } else {
                Some(r.floats(&words[2..], cv[1] * k)?)
            };
            context.set_cell(m, kk, cell).map_err(|e| r.err(e.to_string()))?;
        }
    }

    let words = r.keyed("standardizer")?;
    let standardizer = if words == ["none"] {
        None
    } else {
        let mean = r.floats(&words, d)?;
        let words = r.keyed("scales")?;
        let std = r.floats(&words, d)?;
        Some(Standardizer { mean, std })
    };

    let n = r.single("history")?;
    let n = r.usize_of(n)?;
    let mut history = Vec::with_capacity(n);
    for _ in 0..n {
        let line = r.next_line()?;
        let words: Vec<&str> = line.split_whitespace().collect();
        if words.len() != 4 + k {
            return Err(r.err(format!("history row needs {} fields", 4 + k)));
        }
        history.push(EpochRecord {
            epoch: r.usize_of(words[0])?,
            train_cost: r.float_of(words[1])?,
            val_cost: r.float_of(words[2])?,
            val_auc: r.float_of(words[3])?,
            lengths: r.usizes(&words[4..], k)?,
        });
    }
    if r.next_line()? != "end" {
        return Err(r.err("expected end"));
    }

    Ok(TrainedModel {
        encoder,
        window,
        aggregation: AggregationConfig::new(lengths, percentile),
        context,
        variant,
        objective: Objective {
            lambda,
            scope,
            unscaled_block_gradient: unscaled,
        },
        positive_class,
        standardizer,
        history,
        best_epoch,
    })
}
