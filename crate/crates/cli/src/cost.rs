use std::io::Write;

use clap::{Args, ValueEnum};
use propeval_core::cost_model::{
    batch_capacity_ratio, dlm_latency_orders, memory_terms, CostError, CostModel, DenoiseSchedule,
    FlopsReport, ModelKind, SequenceProfile, TransformerShape,
};
use propeval_core::harness::HarnessError;
use propeval_core::Flops;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// D = E = 4096, H = 32, N = 32, V = 126,464 at L = 4096.
    #[value(alias = "paper-appendix-a")]
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// Start from a named shape; explicit flags override its fields.
    #[arg(long)]
    preset: Option<Preset>,
    /// Model width D.
    #[arg(long)]
    model_dim: Option<u64>,
    /// Embedding width E.
    #[arg(long)]
    embed_dim: Option<u64>,
    /// Attention heads H.
    #[arg(long)]
    heads: Option<u64>,
    /// Transformer blocks N.
    #[arg(long)]
    blocks: Option<u64>,
    /// Vocabulary size V.
    #[arg(long)]
    vocab: Option<u64>,
    /// Prompt length L_in. The preset splits L evenly.
    #[arg(long)]
    len_in: Option<u64>,
    /// Generated length L_out.
    #[arg(long)]
    len_out: Option<u64>,
    /// Denoising steps T (defaults to L_out).
    #[arg(long)]
    steps: Option<u64>,
    /// Parallel samples K.
    #[arg(long, default_value_t = 1)]
    samples: u64,
    /// Parallel efficiency β in [0, 1]; latency rows are printed only when given.
    #[arg(long)]
    beta: Option<f64>,
    /// Output-projection multiplier m in 2·L·(D + m·E)·V.
    #[arg(long, default_value_t = propeval_core::cost_model::DEFAULT_OTHERS_VOCAB_MULTIPLIER)]
    others_multiplier: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

fn usage(e: CostError) -> HarnessError {
    HarnessError::Usage(e.to_string())
}

fn missing(flag: &str) -> HarnessError {
    HarnessError::Usage(format!("--{flag} is required without --preset"))
}

struct Table {
    columns: Vec<&'static str>,
    rows: Vec<(String, Vec<String>)>,
}

impl Table {
    fn row(&mut self, name: &str, cells: Vec<String>) {
        self.rows.push((name.to_string(), cells));
    }

    fn render(&self, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Csv => {
                out.push_str(&format!("metric,{}\n", self.columns.join(",")));
                for (name, cells) in &self.rows {
                    out.push_str(&format!("{name},{}\n", cells.join(",")));
                }
            }
            Format::Text => {
                let mut widths = vec![6usize];
                widths.extend(self.columns.iter().map(|c| c.len()));
                for (name, cells) in &self.rows {
                    widths[0] = widths[0].max(name.len());
                    for (k, c) in cells.iter().enumerate() {
                        widths[k + 1] = widths[k + 1].max(c.len());
                    }
                }
                let line = |first: &str, rest: &[String]| {
                    let mut s = format!("{first:<w$}", w = widths[0]);
                    for (k, c) in rest.iter().enumerate() {
                        s.push_str(&format!("  {c:>w$}", w = widths[k + 1]));
                    }
                    s.trim_end().to_string() + "\n"
                };
                let header: Vec<String> = self.columns.iter().map(|c| c.to_string()).collect();
                out.push_str(&line("metric", &header));
                for (name, cells) in &self.rows {
                    out.push_str(&line(name, cells));
                }
            }
        }
        out
    }
}

pub fn run(args: &CostArgs, out: &mut dyn Write) -> Result<(), HarnessError> {
    let base = args.preset.map(|_| TransformerShape::REFERENCE);
    let pick = |v: Option<u64>, field: fn(&TransformerShape) -> u64, flag: &str| {
        v.or(base.as_ref().map(field)).ok_or_else(|| missing(flag))
    };
    let shape = TransformerShape::new(
        pick(args.model_dim, |s| s.model_dim, "model-dim")?,
        pick(args.embed_dim, |s| s.embed_dim, "embed-dim")?,
        pick(args.heads, |s| s.num_heads, "heads")?,
        pick(args.blocks, |s| s.num_blocks, "blocks")?,
        pick(args.vocab, |s| s.vocab_size, "vocab")?,
    )
    .map_err(usage)?;
    let half = base.map(|_| TransformerShape::REFERENCE_LEN / 2);
    let len_in = args.len_in.or(half).ok_or_else(|| missing("len-in"))?;
    let len_out = args.len_out.or(half).ok_or_else(|| missing("len-out"))?;
    let seq = SequenceProfile::new(len_in, len_out).map_err(usage)?;
    let steps = args.steps.unwrap_or(len_out);
    let schedule = DenoiseSchedule::new(steps, args.samples, args.beta.unwrap_or(1.0)).map_err(usage)?;
    let model = CostModel {
        others_vocab_multiplier: args.others_multiplier,
    };
    let domain = |e: CostError| HarnessError::Domain(e.to_string());

    let l = seq.total();
    let dlm: FlopsReport<Flops> = model.dlm_step_flops(&shape, l).map_err(domain)?;
    let dlm_total: Flops = model.dlm_total_flops(&shape, l, &schedule).map_err(domain)?;
    let cached: FlopsReport<Flops> = model.llm_total_flops(&shape, &seq, true).map_err(domain)?;
    let plain: FlopsReport<Flops> = model.llm_total_flops(&shape, &seq, false).map_err(domain)?;
    let mem_dlm = memory_terms::<Flops>(&shape, &seq, args.samples, ModelKind::Dlm).map_err(domain)?;
    let mem_llm = memory_terms::<Flops>(&shape, &seq, args.samples, ModelKind::Llm).map_err(domain)?;

    let mut t = Table {
        columns: vec!["dlm", "llm_kv_cache", "llm_no_cache"],
        rows: Vec::new(),
    };
    let three = |a: &Flops, b: &Flops, c: &Flops| vec![a.to_string(), b.to_string(), c.to_string()];
    t.row("f_sa", three(&dlm.f_sa, &cached.f_sa, &plain.f_sa));
    t.row("f_mlp", three(&dlm.f_mlp, &cached.f_mlp, &plain.f_mlp));
    t.row("f_block", three(&dlm.f_block, &cached.f_block, &plain.f_block));
    t.row("f_blocks", three(&dlm.f_blocks, &cached.f_blocks, &plain.f_blocks));
    t.row("f_others", three(&dlm.f_others, &cached.f_others, &plain.f_others));
    t.row("f_total_per_pass", three(&dlm.f_total, &cached.f_total, &plain.f_total));
    // LLM totals already cover the whole generation; the DLM column scales by T·K.
    t.row("f_total_generation", three(&dlm_total, &cached.f_total, &plain.f_total));
    t.row(
        "growth",
        vec![
            dlm.asymptotic.to_string(),
            cached.asymptotic.to_string(),
            plain.asymptotic.to_string(),
        ],
    );
    t.row("mem_kv_cache", three(&mem_dlm.kv_cache, &mem_llm.kv_cache, &mem_llm.kv_cache));
    t.row("mem_act_mhsa", three(&mem_dlm.act_mhsa, &mem_llm.act_mhsa, &mem_llm.act_mhsa));
    t.row("mem_act_ffn", three(&mem_dlm.act_ffn, &mem_llm.act_ffn, &mem_llm.act_ffn));
    t.row("mem_total", three(&mem_dlm.total, &mem_llm.total, &mem_llm.total));

    let mut extra = Table {
        columns: vec!["value"],
        rows: Vec::new(),
    };
    let one = |s: String| vec![s];
    extra.row("D,E,H,N,V", one(format!(
        "{} {} {} {} {}",
        shape.model_dim, shape.embed_dim, shape.num_heads, shape.num_blocks, shape.vocab_size
    )));
    extra.row("L_in,L_out,T,K", one(format!("{len_in} {len_out} {steps} {}", args.samples)));
    match batch_capacity_ratio::<Flops>(&shape, &seq) {
        Ok(r) => {
            extra.row("regime", one(r.regime.number().to_string()));
            extra.row("batch_ratio", one(format!("{}", r.ratio)));
            extra.row("batch_ratio_real", one(format!("{:.6}", r.ratio_f64())));
            extra.row("batch_ratio_lower_bound", one(format!("{:.6}", r.lower_bound_f64())));
        }
        Err(e) => extra.row("batch_ratio", one(format!("unavailable ({e})"))),
    }
    match args.beta {
        Some(_) => {
            let lat = dlm_latency_orders::<f64>(l, &schedule).map_err(domain)?;
            extra.row("dlm_flops_order", one(format!("{:.6e}", lat.flops_order)));
            extra.row("dlm_parallel_latency_order", one(format!("{:.6e}", lat.parallel_latency_order)));
        }
        None => extra.row("dlm_latency_orders", one("pass --beta".into())),
    }

    let sep = if args.format == Format::Text { "\n" } else { "" };
    let text = format!("{}{sep}{}", t.render(args.format), extra.render(args.format));
    out.write_all(text.as_bytes()).map_err(|e| HarnessError::Io {
        path: "<stdout>".into(),
        source: e,
    })
}
