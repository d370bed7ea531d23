use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use rayon::prelude::*;

use speechprobe_core::der::{self, read_uem};
use speechprobe_core::diarize::{self, EmbeddingProvider, FileEmbeddings, MeanPoolEmbeddings};
use speechprobe_core::fusion::{self, FeatureMatrix, LayerWeights};
use speechprobe_core::media_io::{emit_rttm, read_feature_stack, read_rttm, read_wav, write_feature_stack, write_wav, Annotation, AudioBuffer, FeatureStack};
use speechprobe_core::resampler::{self, design_kaiser_sinc};
use speechprobe_core::sep::{score_separation, si_sdr, Metric};
use speechprobe_core::tasnet::{self, EncoderBasis, Nonlinearity};
use speechprobe_core::{ChunkSegmentation, DiarizeConfig, PowersetSpace};

use crate::{Command, DiarizeArgs, Format, FuseArgs, MetricArg, PowersetArgs, ResampleArgs, ScoreDerArgs, ScoreSdrArgs, SeparateArgs};

pub(crate) fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Resample(a) => resample(&a, out),
        Command::Powerset(a) => powerset(&a, out),
        Command::Fuse(a) => fuse(&a, out),
        Command::SeparateOracle(a) => separate_oracle(&a, out),
        Command::Diarize(a) => diarize(&a, out),
        Command::ScoreDer(a) => score_der(&a, out),
        Command::ScoreSdr(a) => score_sdr(&a, out),
        Command::Version => {
            writeln!(out, "speechprobe {}", env!("CARGO_PKG_VERSION"))?;
            Ok(())
        }
    }
}

fn load_wav(path: &Path) -> Result<AudioBuffer> {
    read_wav(path).with_context(|| format!("reading {}", path.display()))
}

fn load_stack(path: &Path) -> Result<FeatureStack> {
    read_feature_stack(path).with_context(|| format!("reading {}", path.display()))
}

fn load_weights(path: &Path) -> Result<LayerWeights> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(LayerWeights::parse(&text)?)
}

/// Fixed 3-decimal rendering with explicit `+inf` / `-inf`.
fn fmt_db(v: f64, cap: Option<f64>) -> String {
    let v = match cap {
        Some(c) => v.clamp(-c, c),
        None => v,
    };
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        // avoid printing "-0.000"
        let s = format!("{v:.3}");
        if s == "-0.000" {
            "0.000".into()
        } else {
            s
        }
    }
}

fn resample(a: &ResampleArgs, out: &mut dyn Write) -> Result<()> {
    let audio = load_wav(&a.input)?;
    let filter = if audio.sample_rate() == a.rate {
        None
    } else {
        Some(design_kaiser_sinc(audio.sample_rate(), a.rate, a.stopband_db, a.transition)?)
    };
    let result = resampler::resample(&audio, a.rate, filter.as_ref())?;
    write_wav(&result, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    writeln!(
        out,
        "{} Hz -> {} Hz, {} -> {} samples, {} taps",
        audio.sample_rate(),
        a.rate,
        audio.len(),
        result.len(),
        filter.as_ref().map_or(0, |f| f.taps().len())
    )?;
    Ok(())
}

fn powerset(a: &PowersetArgs, out: &mut dyn Write) -> Result<()> {
    let space = PowersetSpace::new(a.speakers)?;
    let Some(path) = &a.scores else {
        match a.format {
            Format::Text => write!(out, "{space}")?,
            Format::Csv => {
                writeln!(out, "class,speakers")?;
                for (i, c) in space.classes().iter().enumerate() {
                    let names: Vec<String> = c.iter().map(|s| (s + 1).to_string()).collect();
                    writeln!(out, "{i},{}", names.join(" "))?;
                }
            }
        }
        return Ok(());
    };
    let stack = load_stack(path)?;
    ensure!(
        stack.dim() == space.len(),
        "scores have {} classes, K = {} needs {}",
        stack.dim(),
        a.speakers,
        space.len()
    );
    if a.format == Format::Csv {
        let cols: Vec<String> = (1..=a.speakers).map(|s| format!("s{s}")).collect();
        writeln!(out, "chunk,frame,class,{}", cols.join(","))?;
    }
    for c in 0..stack.n_layers() {
        let rows = FeatureMatrix::from_layer(&stack, c);
        let rows: Vec<&[f32]> = rows.rows().collect();
        for (t, active) in space.decode_frames(&rows)?.iter().enumerate() {
            let class = space.encode(active)?;
            match a.format {
                Format::Text => {
                    let bits: String = active.iter().map(|&b| if b { '1' } else { '0' }).collect();
                    writeln!(out, "{c}\t{t}\t{class}\t{bits}")?;
                }
                Format::Csv => {
                    let bits: Vec<&str> = active.iter().map(|&b| if b { "1" } else { "0" }).collect();
                    writeln!(out, "{c},{t},{class},{}", bits.join(","))?;
                }
            }
        }
    }
    Ok(())
}

fn fused(stack: &FeatureStack, weights: &LayerWeights) -> Result<(Vec<f64>, FeatureMatrix)> {
    let alpha = fusion::normalize_weights(weights)?;
    let matrix = fusion::weighted_sum(stack, &alpha)?;
    Ok((alpha, matrix))
}

fn fuse(a: &FuseArgs, out: &mut dyn Write) -> Result<()> {
    let stack = load_stack(&a.stack)?;
    let (alpha, mut matrix) = fused(&stack, &load_weights(&a.weights)?)?;
    if let Some(t) = a.target_frames {
        matrix = fusion::align_frames(&matrix, t)?;
    }
    let fused = matrix.to_stack().ok_or_else(|| anyhow!("fused features are empty"))?;
    write_feature_stack(&fused, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    for (i, w) in alpha.iter().enumerate() {
        writeln!(out, "layer {i}\talpha {w:.6}")?;
    }
    writeln!(out, "frames {}\tdim {}", matrix.n_frames(), matrix.dim())?;
    Ok(())
}

fn separate_oracle(a: &SeparateArgs, out: &mut dyn Write) -> Result<()> {
    let sources = a.sources.iter().map(|p| load_wav(p)).collect::<Result<Vec<_>>>()?;
    let rate = sources[0].sample_rate();
    let len = sources[0].len();
    for (p, s) in a.sources.iter().zip(&sources) {
        ensure!(
            s.sample_rate() == rate && s.len() == len,
            "{} differs in rate or length from the first source",
            p.display()
        );
    }
    let mixture = match &a.mixture {
        Some(p) => {
            let m = load_wav(p)?;
            ensure!(m.sample_rate() == rate && m.len() == len, "mixture differs in rate or length from the sources");
            m
        }
        None => {
            let mut sum = vec![0.0f32; len];
            for s in &sources {
                for (acc, v) in sum.iter_mut().zip(s.samples()) {
                    *acc += v;
                }
            }
            AudioBuffer::new(sum, rate).ok_or_else(|| anyhow!("invalid mixture"))?
        }
    };
    let basis = match (&a.basis, a.seed) {
        (Some(p), _) => EncoderBasis::from_stack(&load_stack(p)?, a.stride, Nonlinearity::Relu)?,
        (None, Some(seed)) if a.orthonormal => EncoderBasis::signed_orthonormal(a.kernel, seed)?,
        (None, Some(seed)) => EncoderBasis::seeded(a.filters, a.kernel, a.stride, Nonlinearity::Relu, seed)?,
        (None, None) => bail!("either --basis or --seed is required"),
    };
    let masks = tasnet::oracle_masks(&sources, &basis, a.epsilon)?;
    let latent_rate = tasnet::latent_frame_rate(rate, basis.stride());
    if let Some(p) = &a.masks_out {
        let stack = masks.to_stack(latent_rate).ok_or_else(|| anyhow!("masks are empty"))?;
        write_feature_stack(&stack, p).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &a.latent_out {
        let mut latent = tasnet::encode(&mixture, &basis)?;
        if let (Some(ssl), Some(w)) = (&a.ssl, &a.ssl_weights) {
            let (_, features) = fused(&load_stack(ssl)?, &load_weights(w)?)?;
            let aligned = fusion::align_frames(&features, latent.n_frames())?;
            latent = fusion::concat_features(&latent, &aligned)?;
        }
        let stack = latent.to_stack().ok_or_else(|| anyhow!("latent is empty"))?;
        write_feature_stack(&stack, p).with_context(|| format!("writing {}", p.display()))?;
    }
    let estimates = tasnet::separate_with_masks(&mixture, &basis, &masks)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    if a.format == Format::Csv {
        writeln!(out, "source,file,si_sdr_db")?;
    }
    for (i, (est, src)) in estimates.into_iter().zip(&sources).enumerate() {
        let mut samples = est.into_samples();
        samples.resize(len, 0.0);
        let score = si_sdr(src.samples(), &samples)?;
        let path = a.out_dir.join(format!("est_{i}.wav"));
        let buffer = AudioBuffer::new(samples, rate).ok_or_else(|| anyhow!("non-finite estimate"))?;
        write_wav(&buffer, &path).with_context(|| format!("writing {}", path.display()))?;
        let name = format!("est_{i}.wav");
        match a.format {
            Format::Text => writeln!(out, "source {i}\t{name}\tSI-SDR {} dB", fmt_db(score, None))?,
            Format::Csv => writeln!(out, "{i},{name},{}", fmt_db(score, None))?,
        }
    }
    Ok(())
}

fn chunks_from_stack(a: &DiarizeArgs, stack: &FeatureStack, onsets: &[(f64, f64)]) -> Result<Vec<ChunkSegmentation>> {
    let rate = f64::from(stack.frame_rate());
    let space = if a.scores.is_some() { Some(PowersetSpace::new(a.speakers)?) } else { None };
    (0..stack.n_layers())
        .map(|c| {
            let layer = FeatureMatrix::from_layer(stack, c);
            let rows: Vec<&[f32]> = layer.rows().collect();
            let chunk = match &space {
                Some(space) => ChunkSegmentation::from_powerset_scores(space, &rows, onsets[c].0, rate)?,
                None => ChunkSegmentation::new(
                    onsets[c].0,
                    rate,
                    rows.iter().map(|r| r.iter().map(|&v| v > 0.5).collect()).collect(),
                )?,
            };
            Ok(chunk)
        })
        .collect()
}

fn diarize(a: &DiarizeArgs, out: &mut dyn Write) -> Result<()> {
    let path = a.scores.as_ref().or(a.activity.as_ref()).ok_or_else(|| anyhow!("--scores or --activity is required"))?;
    let stack = load_stack(path)?;
    let rate = f64::from(stack.frame_rate());
    let duration = a
        .duration
        .unwrap_or((stack.n_layers() - 1) as f64 * a.hop + stack.n_frames() as f64 / rate);
    let windows = diarize::slide_chunks(duration, a.window, a.hop)?;
    ensure!(
        windows.len() == stack.n_layers(),
        "{} chunks in {} but {duration} s with window {} / hop {} gives {}",
        stack.n_layers(),
        path.display(),
        a.window,
        a.hop,
        windows.len()
    );
    let chunks = chunks_from_stack(a, &stack, &windows)?;
    let provider: Box<dyn EmbeddingProvider> = match (&a.embeddings, &a.features) {
        (Some(p), _) => Box::new(FileEmbeddings::from_stack(&load_stack(p)?)),
        (None, Some(p)) => {
            let feats = load_stack(p)?;
            ensure!(
                feats.n_layers() == chunks.len(),
                "{} has {} layers for {} chunks",
                p.display(),
                feats.n_layers(),
                chunks.len()
            );
            Box::new(MeanPoolEmbeddings::from_stack(&feats))
        }
        (None, None) => bail!("--embeddings or --features is required"),
    };
    let config = DiarizeConfig {
        window: a.window,
        hop: a.hop,
        min_segment: a.min_seg,
        ahc_threshold: a.threshold,
    };
    let result = diarize::diarize_file(&chunks, provider.as_ref(), &config, duration, &a.uri)?;
    let rttm = emit_rttm(&result.annotation);
    match &a.output {
        Some(p) => {
            fs::write(p, &rttm).with_context(|| format!("writing {}", p.display()))?;
            writeln!(out, "{} speakers, {} segments", result.n_speakers, result.annotation.segments().len())?;
        }
        None => out.write_all(rttm.as_bytes())?,
    }
    Ok(())
}

const DER_CSV_HEADER: &str = "uri,total_speech_s,false_alarm_s,missed_s,confusion_s,fa_pct,md_pct,sc_pct,der_pct";

fn der_row(uri: &str, r: &der::DerReport, format: Format) -> String {
    match format {
        Format::Text => format!("{uri}\t{r}"),
        Format::Csv => format!(
            "{uri},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3}",
            r.total_speech, r.false_alarm, r.missed, r.confusion, r.fa_pct, r.md_pct, r.sc_pct, r.der_pct
        ),
    }
}

fn score_der(a: &ScoreDerArgs, out: &mut dyn Write) -> Result<()> {
    let refs = read_rttm(&a.reference).with_context(|| format!("reading {}", a.reference.display()))?;
    let hyps = read_rttm(&a.hypothesis).with_context(|| format!("reading {}", a.hypothesis.display()))?;
    let uem = match &a.uem {
        Some(p) => Some(read_uem(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let uris: Vec<&String> = {
        let mut u: Vec<&String> = refs.keys().chain(hyps.keys()).collect();
        u.sort();
        u.dedup();
        u
    };
    let score = |uri: &String| -> Result<der::DerReport> {
        let empty = Annotation::new(uri.as_str());
        let r = refs.get(uri).unwrap_or(&empty);
        let h = hyps.get(uri).unwrap_or(&empty);
        let regions: Option<&[(f64, f64)]> = uem.as_ref().map(|m| m.get(uri).map_or(&[][..], Vec::as_slice));
        der::compute_der(r, h, a.collar, regions).with_context(|| format!("scoring {uri}"))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .context("starting worker pool")?;
    // indexed collect keeps rows in uri order
    let reports: Vec<der::DerReport> = pool.install(|| uris.par_iter().map(|u| score(u)).collect::<Result<Vec<_>>>())?;

    if a.format == Format::Csv {
        writeln!(out, "{DER_CSV_HEADER}")?;
    }
    if !a.aggregate {
        for (uri, r) in uris.iter().zip(&reports) {
            writeln!(out, "{}", der_row(uri, r, a.format))?;
        }
    }
    if !a.per_file {
        writeln!(out, "{}", der_row("*TOTAL*", &der::DerReport::aggregate(&reports), a.format))?;
    }
    Ok(())
}

fn score_sdr(a: &ScoreSdrArgs, out: &mut dyn Write) -> Result<()> {
    ensure!(
        a.refs.len() == a.ests.len(),
        "{} references but {} estimates",
        a.refs.len(),
        a.ests.len()
    );
    if let Some(c) = a.cap_db {
        ensure!(c > 0.0 && c.is_finite(), "--cap-db must be positive, got {c}");
    }
    let load_all = |paths: &[std::path::PathBuf]| -> Result<Vec<Vec<f32>>> {
        paths.iter().map(|p| Ok(load_wav(p)?.into_samples())).collect()
    };
    let refs = load_all(&a.refs)?;
    let ests = load_all(&a.ests)?;
    let mixture = a.mixture.as_ref().map(|p| load_wav(p)).transpose()?;
    let metric = match a.metric {
        MetricArg::Sdr => Metric::Sdr,
        MetricArg::SiSdr => Metric::SiSdr,
    };
    let report = score_separation(&refs, &ests, mixture.as_ref().map(|m| m.samples()), metric, !a.no_pit)?;
    let cap = a.cap_db;
    let name = metric.name();
    let imp = |i: Option<f64>| i.map_or(String::new(), |v| fmt_db(v, cap));
    match a.format {
        Format::Text => {
            let perm: Vec<String> = report.permutation.iter().map(usize::to_string).collect();
            writeln!(out, "metric {name}")?;
            writeln!(out, "permutation {}", perm.join(" "))?;
            for (i, (&e, &s)) in report.permutation.iter().zip(&report.per_source_sdr).enumerate() {
                let mut line = format!("ref {i}\test {e}\t{name} {} dB", fmt_db(s, cap));
                if let Some(v) = &report.per_source_sdri {
                    line.push_str(&format!("\t{name}i {} dB", fmt_db(v[i], cap)));
                }
                writeln!(out, "{line}")?;
            }
            let mut line = format!("mean\t{name} {} dB", fmt_db(report.mean_sdr, cap));
            if let Some(m) = report.mean_sdri {
                line.push_str(&format!("\t{name}i {} dB", fmt_db(m, cap)));
            }
            writeln!(out, "{line}")?;
        }
        Format::Csv => {
            writeln!(out, "reference,estimate,metric,score_db,improvement_db")?;
            for (i, (&e, &s)) in report.permutation.iter().zip(&report.per_source_sdr).enumerate() {
                let sdri = report.per_source_sdri.as_ref().map(|v| v[i]);
                writeln!(out, "{i},{e},{name},{},{}", fmt_db(s, cap), imp(sdri))?;
            }
            writeln!(out, "mean,,{name},{},{}", fmt_db(report.mean_sdr, cap), imp(report.mean_sdri))?;
        }
    }
    Ok(())
}
