//! Acceptance criteria AC1-AC9. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use scriptgen::corpus::{
    generate_synthetic_corpus, sample_style_set, CharsetTokenizer, WordSample,
};
use scriptgen::critics::{
    ctc_loss, hinge_discriminator_loss, hinge_generator_loss, writer_ce_loss,
};
use scriptgen::metrics::{
    cer, fid, frechet_distance, kid, levenshtein, CtcRecognizer, GaussianStats, KidConfig,
    TextRecognizer,
};
use scriptgen::model::{
    style_tensor, AttentionRecord, DecoderLayer, Generator, ModelConfig, PatchGrid, StyleEncoder,
};
use scriptgen::nn::{log_softmax_last_dim, Ctx, ParamStore};
use scriptgen::ssaa::{
    average_attention, connected_components, otsu_threshold, reconstruct_maps, run_ssaa, save_ssaa,
    SsaaConfig, WordAttentionVector,
};
use scriptgen::trainer::{word_batch_tensor, TrainConfig, Trainer};
use scriptgen::{Array2, Array3, ChaCha8Rng, DMatrix, DType, Device, Tensor};

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const AC1_TIME_LIMIT: Duration = Duration::from_secs(30);
const ROW_SUM_TOL: f64 = 1e-5;
const AVERAGE_TOL: f64 = 1e-7;
const CTC_TOL: f64 = 1e-6;
const CE_TOL: f64 = 1e-7;
const FD_REL_TOL: f64 = 1e-3;
const AC6_MAX_ITERATIONS: u64 = 500;
const AC6_TIME_LIMIT: Duration = Duration::from_secs(20 * 60);
const AC6_MAX_CER: f64 = 0.1;
const FID_SELF_TOL: f64 = 1e-6;
const FID_SCALAR_TOL: f64 = 1e-10;
const FID_2D_TOL: f64 = 0.15;

const DESK_WORDS: [&str; 8] = [
    "the", "and", "scholar", "ink", "writer", "style", "hand", "pen",
];

fn cpu() -> Device {
    Device::Cpu
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::from_vec(v, shape, &cpu()).unwrap()
}

fn desk_corpus(seed: u64) -> Vec<WordSample> {
    let words: Vec<String> = DESK_WORDS.iter().map(|s| s.to_string()).collect();
    generate_synthetic_corpus(2, &words, seed, &CharsetTokenizer::ascii()).unwrap()
}

fn ac1() -> Outcome {
    let cfg = ModelConfig {
        vit_depth: 1,
        decoder_layers: 1,
        synth_res_blocks: 1,
        dropout: 0.0,
        ..ModelConfig::full()
    };
    let start = Instant::now();
    let g = Generator::new(&cfg, DType::F32, 0).map_err(|e| e.to_string())?;
    let corpus = desk_corpus(1);
    let refs: Vec<&WordSample> = corpus.iter().filter(|s| s.writer.0 == 0).collect();
    let sets: Vec<_> = (0..2)
        .map(|i| sample_style_set(&refs, 5, i).unwrap())
        .collect();
    let styles = style_tensor(&sets, DType::F32).unwrap();
    check!(
        styles.dims() == [2, 5, 3, 224, 224],
        "style batch {:?}",
        styles.dims()
    );
    let ctx = Ctx::eval();
    let tok = CharsetTokenizer::ascii();
    let memory = g.style_encoder().encode(&styles, &ctx).unwrap();
    check!(
        memory.dims() == (980, 2, 512),
        "style memory {:?}",
        memory.dims()
    );
    let query = g
        .content_encoder()
        .encode(&["ab", "ab"], &tok, &ctx)
        .unwrap();
    check!(
        query.tensor.dims() == [2, 2, 512],
        "content query {:?}",
        query.tensor.dims()
    );
    let fusion = g.fusion_core().fuse(&query, &memory, true, &ctx).unwrap();
    check!(
        fusion.fused.tensor.dims() == [2, 2, 512],
        "fused {:?}",
        fusion.fused.tensor.dims()
    );
    let record = fusion.final_record(0, "ab").unwrap();
    check!(
        record.weights.dim() == (8, 2, 980),
        "attention record {:?}",
        record.weights.dim()
    );
    let images = g.synthesis_head().synthesize(&fusion.fused, &ctx).unwrap();
    check!(
        images.dims() == [2, 1, 32, 32],
        "images {:?}",
        images.dims()
    );
    let elapsed = start.elapsed();
    check!(elapsed < AC1_TIME_LIMIT, "took {elapsed:?}");
    Ok(format!(
        "memory (980, 2, 512), record (8, 2, 980), images 32x32 in {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn stochastic(rng: &mut ChaCha8Rng, h: usize, k: usize, l: usize) -> Array3<f32> {
    let mut w = Array3::from_shape_fn((h, k, l), |_| rng.random_range(0.0f32..1.0));
    for mut row in w.rows_mut() {
        let s: f32 = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    w
}

fn ac2() -> Outcome {
    let cfg = ModelConfig {
        patch_size: 32,
        decoder_layers: 2,
        dropout: 0.0,
        ..ModelConfig::desk()
    };
    let g = Generator::new(&cfg, DType::F32, 3).unwrap();
    let corpus = desk_corpus(2);
    let refs: Vec<&WordSample> = corpus.iter().filter(|s| s.writer.0 == 1).collect();
    let sets: Vec<_> = (0..3)
        .map(|i| sample_style_set(&refs, 5, i).unwrap())
        .collect();
    let styles = style_tensor(&sets, DType::F32).unwrap();
    let texts = ["ink", "scholar", "a"];
    let out = g
        .forward(
            &styles,
            &texts,
            &CharsetTokenizer::ascii(),
            true,
            &Ctx::eval(),
        )
        .unwrap();
    let mut worst = 0f64;
    let mut rows = 0;
    for layer in 0..cfg.decoder_layers {
        for (i, t) in texts.iter().enumerate() {
            let rec = out.fusion.attention_record(layer, i, t).unwrap();
            for row in rec.weights.rows() {
                worst = worst.max((row.iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs());
                rows += 1;
            }
        }
    }
    check!(worst <= ROW_SUM_TOL, "row sum off by {worst:e}");
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst_avg = 0f64;
    for _ in 0..50 {
        let (h, k, images, side) = (
            rng.random_range(1..9),
            rng.random_range(1..8),
            rng.random_range(1..6),
            rng.random_range(1..6),
        );
        let grid = PatchGrid { images, side };
        let weights = stochastic(&mut rng, h, k, grid.len());
        let want: Vec<f64> = (0..grid.len())
            .map(|l| {
                let mut s = 0.0;
                for hh in 0..h {
                    for kk in 0..k {
                        s += weights[[hh, kk, l]] as f64;
                    }
                }
                s / (h * k) as f64
            })
            .collect();
        let rec = AttentionRecord {
            weights,
            text: "x".repeat(k),
            grid,
            layer: 0,
        };
        let got = average_attention(&rec).map_err(|e| e.to_string())?;
        for (a, b) in got.values.iter().zip(&want) {
            worst_avg = worst_avg.max((a - b).abs());
        }
    }
    check!(
        worst_avg <= AVERAGE_TOL,
        "average_attention off by {worst_avg:e}"
    );
    Ok(format!(
        "{rows} rows, max |sum-1| {worst:.1e}; average vs loop {worst_avg:.1e} over 50 tensors"
    ))
}

fn scalar(t: Tensor) -> f64 {
    t.to_dtype(DType::F64).unwrap().to_scalar().unwrap()
}

fn t1(v: &[f64]) -> Tensor {
    Tensor::new(v, &cpu()).unwrap()
}

fn brute_force_ctc(lp: &[f64], classes: usize, frames: usize, target: &[u32]) -> f64 {
    let mut total = 0.0;
    for code in 0..classes.pow(frames as u32) {
        let mut rest = code;
        let path: Vec<u32> = (0..frames)
            .map(|_| {
                let p = (rest % classes) as u32;
                rest /= classes;
                p
            })
            .collect();
        let mut collapsed = Vec::new();
        let mut prev = None;
        for &p in &path {
            if Some(p) != prev && p != 0 {
                collapsed.push(p);
            }
            prev = Some(p);
        }
        if collapsed == target {
            total += path
                .iter()
                .enumerate()
                .map(|(t, &p)| lp[t * classes + p as usize])
                .sum::<f64>()
                .exp();
        }
    }
    -total.ln()
}

fn ac3() -> Outcome {
    let g = scalar(hinge_generator_loss(&t1(&[0.3, 0.5, -0.2])).unwrap());
    check!(g == -0.2, "G loss {g} vs -0.2");
    let d0 = scalar(hinge_discriminator_loss(&t1(&[2.0]), &t1(&[-3.0])).unwrap());
    check!(d0 == 0.0, "D loss {d0} vs 0");
    let d1 = scalar(hinge_discriminator_loss(&t1(&[0.5, 1.5]), &t1(&[-0.5])).unwrap());
    check!(d1 == 0.75, "D loss {d1} vs 0.75");

    let classes = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_ctc = 0f64;
    let mut cases = 0;
    let targets: Vec<Vec<u32>> = vec![
        vec![],
        vec![1],
        vec![2],
        vec![1, 2],
        vec![2, 2],
        vec![1, 1],
        vec![1, 2, 1],
        vec![2, 2, 2],
        vec![1, 2, 2],
    ];
    for frames in 1..=5 {
        for target in &targets {
            let repeats = target.windows(2).filter(|w| w[0] == w[1]).count();
            if target.len() + repeats > frames {
                continue;
            }
            let logits = rand_tensor(&mut rng, &[frames, 1, classes])
                .affine(3.0, 0.0)
                .unwrap();
            let lp = log_softmax_last_dim(&logits).unwrap();
            let flat: Vec<f64> = lp.flatten_all().unwrap().to_vec1().unwrap();
            let got = scalar(ctc_loss(&lp, std::slice::from_ref(target), &[frames], 0).unwrap());
            let want = brute_force_ctc(&flat, classes, frames, target);
            worst_ctc = worst_ctc.max((got - want).abs());
            cases += 1;
        }
    }
    check!(worst_ctc <= CTC_TOL, "CTC off by {worst_ctc:e}");

    let mut worst_ce = 0f64;
    for trial in 0..20 {
        let (b, c) = (1 + trial % 4, 2 + trial % 5);
        let logits = rand_tensor(&mut rng, &[b, c]).affine(4.0, 0.0).unwrap();
        let labels: Vec<u32> = (0..b).map(|_| rng.random_range(0..c as u32)).collect();
        let got = scalar(writer_ce_loss(&logits, &labels).unwrap());
        let rows: Vec<Vec<f64>> = logits.to_vec2().unwrap();
        let want = rows
            .iter()
            .zip(&labels)
            .map(|(row, &l)| {
                let m = row.iter().cloned().fold(f64::MIN, f64::max);
                let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                lse - row[l as usize]
            })
            .sum::<f64>()
            / b as f64;
        worst_ce = worst_ce.max((got - want).abs());
    }
    check!(worst_ce <= CE_TOL, "cross-entropy off by {worst_ce:e}");
    Ok(format!(
        "hinge exact; CTC {cases} cases max err {worst_ctc:.1e}; CE max err {worst_ce:.1e}"
    ))
}

/// Central differences at three entries of every parameter.
fn fd_check(
    store: &ParamStore,
    eps: f64,
    objective: &dyn Fn() -> Tensor,
) -> Result<(usize, f64), String> {
    let grads = objective().backward().unwrap();
    let mut checked = 0;
    let mut worst = 0f64;
    for (name, var) in store.iter() {
        let g: Vec<f64> = grads
            .get(var.as_tensor())
            .unwrap()
            .flatten_all()
            .unwrap()
            .to_vec1()
            .unwrap();
        let base: Vec<f64> = var.as_tensor().flatten_all().unwrap().to_vec1().unwrap();
        for idx in [0, base.len() / 2, base.len() - 1] {
            let at = |delta: f64| {
                let mut v = base.clone();
                v[idx] += delta;
                var.set(&Tensor::from_vec(v, var.shape(), &cpu()).unwrap())
                    .unwrap();
                scalar(objective())
            };
            let numeric = (at(eps) - at(-eps)) / (2.0 * eps);
            var.set(&Tensor::from_vec(base.clone(), var.shape(), &cpu()).unwrap())
                .unwrap();
            let rel = (numeric - g[idx]).abs() / numeric.abs().max(g[idx].abs()).max(1e-6);
            if rel >= FD_REL_TOL {
                return Err(format!(
                    "{name}[{idx}]: numeric {numeric} analytic {}",
                    g[idx]
                ));
            }
            worst = worst.max(rel);
            checked += 1;
        }
    }
    Ok((checked, worst))
}

fn ac4() -> Outcome {
    let dec_cfg = ModelConfig {
        d_model: 8,
        decoder_heads: 2,
        decoder_ffn_dim: 16,
        decoder_layers: 1,
        dropout: 0.0,
        ..ModelConfig::desk()
    };
    let mut store = ParamStore::new(DType::F64);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let layer = DecoderLayer::new(&mut store.builder(&mut rng), &dec_cfg).unwrap();
    let x = rand_tensor(&mut rng, &[2, 3, 8]);
    let mem = rand_tensor(&mut rng, &[2, 5, 8]);
    let target = rand_tensor(&mut rng, &[2, 3, 8]);
    let ctx = Ctx::eval();
    let (n_dec, w_dec) = fd_check(&store, 1e-6, &|| {
        let (y, _) = layer.forward(&x, &mem, None, &ctx).unwrap();
        (y * &target).unwrap().sum_all().unwrap()
    })?;

    let enc_cfg = ModelConfig {
        patch_size: 56,
        vit_embed_dim: 8,
        vit_depth: 1,
        vit_heads: 2,
        num_style_images: 2,
        d_model: 8,
        dropout: 0.0,
        ..ModelConfig::desk()
    };
    let mut store = ParamStore::new(DType::F64);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let enc = StyleEncoder::new(&mut store.builder(&mut rng), &enc_cfg).unwrap();
    let images = rand_tensor(&mut rng, &[1, 2, 3, 224, 224]);
    let target = rand_tensor(&mut rng, &[32, 1, 8]);
    let (n_enc, w_enc) = fd_check(&store, 1e-5, &|| {
        (enc.encode(&images, &ctx).unwrap().tensor * &target)
            .unwrap()
            .sum_all()
            .unwrap()
    })?;
    Ok(format!(
        "decoder layer {n_dec} entries (max rel {w_dec:.1e}), style encoder {n_enc} entries (max rel {w_enc:.1e})"
    ))
}

fn tiny_train_config(seed: u64) -> TrainConfig {
    let model = ModelConfig {
        patch_size: 56,
        vit_embed_dim: 8,
        vit_heads: 2,
        d_model: 16,
        decoder_heads: 2,
        decoder_ffn_dim: 16,
        decoder_layers: 1,
        synth_channels: 8,
        critic_channels: 4,
        recognizer_hidden: 8,
        max_text_len: 8,
        num_writers: 2,
        ..ModelConfig::desk()
    };
    TrainConfig {
        model,
        batch_size: 2,
        epochs: 100,
        max_iterations: 10,
        seed,
        ..TrainConfig::desk()
    }
}

fn ac5() -> Outcome {
    let corpus = desk_corpus(5);
    let mut t = Trainer::new(
        tiny_train_config(11),
        CharsetTokenizer::ascii(),
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut leaks = Vec::new();
    let mut g_iters = Vec::new();
    t.fit(&corpus, dir.path(), |r| {
        if r.g_updated {
            g_iters.push(r.iteration);
            leaks.push(r.critic_grad_from_fake.unwrap_or(f64::NAN));
        }
    })
    .map_err(|e| e.to_string())?;
    let c = t.update_counts();
    check!(t.iteration() == 10, "ran {} iterations", t.iteration());
    check!(c.generator == 5, "G updated {} times", c.generator);
    check!(
        c.discriminator == 10 && c.recognizer == 10 && c.writer_classifier == 10,
        "critic updates {c:?}"
    );
    check!(
        leaks.iter().all(|&l| l == 0.0),
        "critic gradient from fake losses {leaks:?}"
    );
    Ok(format!(
        "G at iterations {g_iters:?}; D/TR/WCN 10 each; critic grad from fake 0 on all {} G steps",
        leaks.len()
    ))
}

fn ac6() -> Outcome {
    let corpus = desk_corpus(7);
    let cfg = TrainConfig {
        epochs: 100_000,
        max_iterations: AC6_MAX_ITERATIONS,
        seed: 7,
        ..TrainConfig::desk()
    };
    let tok = CharsetTokenizer::ascii();
    let mut t = Trainer::new(cfg, tok.clone(), vec!["writer_0".into(), "writer_1".into()]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let mut g_total = Vec::new();
    t.fit(&corpus, dir.path(), |r| {
        if let Some(g) = r.g_total {
            g_total.push(g);
        }
    })
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let images: Vec<_> = corpus.iter().map(|s| s.image.clone()).collect();
    let decoded = CtcRecognizer {
        net: &t.recognizer,
        tokenizer: &tok,
    }
    .decode(&images)
    .unwrap();
    let pairs: Vec<(String, String)> = decoded
        .into_iter()
        .zip(corpus.iter().map(|s| s.transcription.clone()))
        .collect();
    let tr_cer = cer(&pairs).unwrap();
    let refs: Vec<_> = images.iter().collect();
    let (x, widths) = word_batch_tensor(&refs, 16, DType::F32).unwrap();
    let logits = t
        .writer_classifier
        .forward(&x, &widths, &Ctx::eval())
        .unwrap();
    let pred: Vec<u32> = logits.argmax(1).unwrap().to_vec1().unwrap();
    let correct = pred
        .iter()
        .zip(&corpus)
        .filter(|(p, s)| **p == s.writer.0)
        .count();
    let acc = correct as f64 / corpus.len() as f64;
    let n = g_total.len() / 10;
    check!(n > 0, "only {} generator updates", g_total.len());
    let first = g_total[..n].iter().sum::<f64>() / n as f64;
    let last = g_total[g_total.len() - n..].iter().sum::<f64>() / n as f64;
    let detail = format!(
        "{} iterations in {:.0}s; TR CER {tr_cer:.3}; WCN acc {acc:.3}; G total first decile {first:.3}, last decile {last:.3}",
        t.iteration(),
        elapsed.as_secs_f64()
    );
    check!(t.iteration() <= AC6_MAX_ITERATIONS, "{detail}");
    check!(elapsed <= AC6_TIME_LIMIT, "over time: {detail}");
    check!(tr_cer < AC6_MAX_CER, "{detail}");
    check!(acc == 1.0, "{detail}");
    check!(first > last, "{detail}");
    Ok(detail)
}

fn flood_fill_oracle(on: &Array2<bool>) -> Vec<Vec<(usize, usize)>> {
    let (h, w) = on.dim();
    let mut label = Array2::<usize>::zeros((h, w));
    let mut next = 0;
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !on[[y, x]] || label[[y, x]] != 0 {
                continue;
            }
            next += 1;
            let mut stack = vec![(y, x)];
            let mut comp = Vec::new();
            label[[y, x]] = next;
            while let Some((cy, cx)) = stack.pop() {
                comp.push((cy, cx));
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (ny, nx) = (cy as i64 + dy, cx as i64 + dx);
                        if ny < 0 || nx < 0 || ny >= h as i64 || nx >= w as i64 {
                            continue;
                        }
                        let (ny, nx) = (ny as usize, nx as usize);
                        if on[[ny, nx]] && label[[ny, nx]] == 0 {
                            label[[ny, nx]] = next;
                            stack.push((ny, nx));
                        }
                    }
                }
            }
            comp.sort();
            out.push(comp);
        }
    }
    out
}

fn variance_oracle(hist: &[u64; 256], t: usize) -> f64 {
    let total: f64 = hist.iter().map(|&c| c as f64).sum();
    let (lo, hi) = hist.split_at(t + 1);
    let stats = |part: &[u64], offset: usize| {
        let n: f64 = part.iter().map(|&c| c as f64).sum();
        let s: f64 = part
            .iter()
            .enumerate()
            .map(|(i, &c)| (i + offset) as f64 * c as f64)
            .sum();
        (n / total, if n > 0.0 { s / n } else { 0.0 })
    };
    let (w0, m0) = stats(lo, 0);
    let (w1, m1) = stats(hi, t + 1);
    w0 * w1 * (m0 - m1).powi(2)
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn ac7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..20 {
        let mut hist = [0u64; 256];
        for c in hist.iter_mut() {
            *c = rng.random_range(0..500);
        }
        let t = otsu_threshold(&hist).ok_or("no threshold")? as usize;
        let scores: Vec<f64> = (0..256).map(|i| variance_oracle(&hist, i)).collect();
        let best = scores.iter().copied().fold(f64::MIN, f64::max);
        let arg = scores.iter().position(|&v| v == best).unwrap_or(256);
        check!(
            (scores[t] - best).abs() <= 1e-9 * best && t == arg,
            "histogram {trial}: threshold {t}, exhaustive argmax {arg}"
        );
    }
    for trial in 0..30 {
        let (h, w) = (rng.random_range(1..30), rng.random_range(1..30));
        let density = rng.random_range(0.1..0.7);
        let on = Array2::from_shape_fn((h, w), |_| rng.random_bool(density));
        let mut got: Vec<Vec<(usize, usize)>> = connected_components(&on)
            .into_iter()
            .map(|mut c| {
                c.sort();
                c
            })
            .collect();
        got.sort();
        let mut want = flood_fill_oracle(&on);
        want.sort();
        check!(
            got == want,
            "mask {trial}: components differ from flood fill"
        );
    }
    let grid = PatchGrid {
        images: 5,
        side: 14,
    };
    let mut values = vec![0.0; grid.len()];
    values[0] = 1.0;
    let maps = reconstruct_maps(
        &WordAttentionVector {
            values,
            text: "w".into(),
            grid,
        },
        224,
    )
    .map_err(|e| e.to_string())?;
    let (mut best, mut at) = (f64::MIN, (0, 0));
    for ((y, x), &v) in maps[0].indexed_iter() {
        if v > best {
            best = v;
            at = (y, x);
        }
    }
    check!(at.0 < 16 && at.1 < 16, "delta peak at {at:?}");
    check!(
        maps[1..].iter().all(|m| m.iter().all(|&v| v == 0.0)),
        "other images not blank"
    );

    let cfg = ModelConfig {
        dropout: 0.0,
        ..ModelConfig::desk()
    };
    let g = Generator::new(&cfg, DType::F32, 5).unwrap();
    let corpus = desk_corpus(3);
    let refs: Vec<&WordSample> = corpus.iter().filter(|s| s.writer.0 == 0).collect();
    let set = sample_style_set(&refs, cfg.num_style_images, 1).unwrap();
    let run = |dir: &Path| {
        let (_, records) = g
            .generate(
                std::slice::from_ref(&set),
                &["hand"],
                &CharsetTokenizer::ascii(),
                true,
                0,
            )
            .unwrap();
        let out = run_ssaa(&records[0], &set.images, &SsaaConfig::default()).unwrap();
        save_ssaa(dir, &records[0], &out).unwrap();
        out.grid
    };
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ga, gb): (RgbImage, RgbImage) = (run(da.path()), run(db.path()));
    check!(ga.as_raw() == gb.as_raw(), "grids differ");
    let (fa, fb) = (dir_bytes(da.path()), dir_bytes(db.path()));
    check!(fa == fb, "saved artifacts differ");
    check!(
        ga.get_pixel(0, 0) == &Rgb([255, 255, 255]),
        "grid margin is not white"
    );
    Ok(format!(
        "Otsu 20/20, components 30/30, delta peak at {at:?}, {} SSAA files byte-identical",
        fa.len()
    ))
}

fn gaussian(n: usize, mean: &[f64], sd: &[f64], rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, mean.len(), |_, j| {
        let z: f64 = rng.sample(StandardNormal);
        mean[j] + sd[j] * z
    })
}

fn levenshtein_oracle(a: &[char], b: &[char]) -> usize {
    match (a.split_last(), b.split_last()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let sub = levenshtein_oracle(ra, rb) + usize::from(x != y);
            sub.min(levenshtein_oracle(ra, b) + 1)
                .min(levenshtein_oracle(a, rb) + 1)
        }
    }
}

fn ac8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = gaussian(200, &[0.0, 1.0, -2.0, 0.5], &[1.0, 0.5, 2.0, 1.5], &mut rng);
    let self_fid = fid(&a, &a).map_err(|e| e.to_string())?;
    check!(self_fid.abs() <= FID_SELF_TOL, "FID(a, a) = {self_fid:e}");

    let mut worst = 0f64;
    for _ in 0..200 {
        let (ma, mb) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let (sa, sb): (f64, f64) = (rng.random_range(0.01..4.0), rng.random_range(0.01..4.0));
        let stats = |m: f64, s: f64| GaussianStats {
            mean: scriptgen::DMatrix::from_element(1, 1, m)
                .column(0)
                .into_owned(),
            cov: DMatrix::from_element(1, 1, s * s),
        };
        let got = frechet_distance(&stats(ma, sa), &stats(mb, sb)).unwrap();
        let want = (ma - mb).powi(2) + sa * sa + sb * sb - 2.0 * sa * sb;
        worst = worst.max((got - want).abs());
    }
    check!(worst < FID_SCALAR_TOL, "scalar FID off by {worst:e}");

    let sa = gaussian(50_000, &[0.0, 0.0], &[1.0, 1.0], &mut rng);
    let sb = gaussian(50_000, &[1.0, 0.0], &[2.0, 2.0], &mut rng);
    let two_d = fid(&sa, &sb).unwrap();
    check!((two_d - 3.0).abs() <= FID_2D_TOL, "2-D FID {two_d}");

    let cfg = KidConfig {
        subset_size: 20,
        num_subsets: 5,
        seed: 0,
    };
    let trials: Vec<f64> = (0..100u64)
        .map(|t| {
            let x = gaussian(40, &[0.0; 3], &[1.0; 3], &mut rng);
            let y = gaussian(40, &[0.0; 3], &[1.0; 3], &mut rng);
            kid(&x, &y, &KidConfig { seed: t, ..cfg }).unwrap()
        })
        .collect();
    let mean = trials.iter().sum::<f64>() / 100.0;
    let se = (trials.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 99.0).sqrt() / 10.0;
    check!(
        mean.abs() <= 3.0 * se,
        "KID mean {mean:e} vs 3 SE {:e}",
        3.0 * se
    );

    let alphabet = ['a', 'b', 'c'];
    let mut strings = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..4 {
        frontier = frontier
            .iter()
            .flat_map(|s| alphabet.iter().map(move |c| format!("{s}{c}")))
            .collect();
        strings.extend(frontier.iter().cloned());
    }
    let chars: Vec<Vec<char>> = strings.iter().map(|s| s.chars().collect()).collect();
    let mut pairs = 0;
    for (i, a) in strings.iter().enumerate() {
        for (j, b) in strings.iter().enumerate() {
            let want = levenshtein_oracle(&chars[i], &chars[j]);
            check!(levenshtein(a, b) == want, "levenshtein({a:?}, {b:?})");
            pairs += 1;
        }
    }
    Ok(format!(
        "FID(a,a) {self_fid:.1e}; scalar max err {worst:.1e}; 2-D {two_d:.3}; KID mean {mean:.2e} (SE {se:.1e}); Levenshtein {pairs} pairs"
    ))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_scriptgen"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`scriptgen {}` exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(())
}

/// Every file of one pipeline run, minus run manifests (they hold wall-clock times).
fn pipeline(root: &Path, seed: &str) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let p = |rel: &str| root.join(rel).to_string_lossy().into_owned();
    fs::write(root.join("train_words.txt"), DESK_WORDS.join("\n")).unwrap();
    fs::write(root.join("test_words.txt"), "quill\nnote\nink\npage\n").unwrap();
    run_cli(&[
        "synth-data",
        "--writers",
        "2",
        "--words",
        &p("train_words.txt"),
        "--test-words",
        &p("test_words.txt"),
        "--seed",
        seed,
        "--out",
        &p("data"),
    ])?;
    run_cli(&[
        "train",
        "--data",
        &p("data"),
        "--desk",
        "--max-iterations",
        "4",
        "--seed",
        seed,
        "--out",
        &p("run"),
    ])?;
    let ckpt = p("run/final.ckpt");
    let style_dir = root.join("style");
    fs::create_dir_all(&style_dir).unwrap();
    let mut writer0: Vec<_> = fs::read_dir(root.join("data/images"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            p.file_name()
                .unwrap()
                .to_string_lossy()
                .starts_with("train_0000")
        })
        .collect();
    writer0.sort();
    for f in &writer0 {
        fs::copy(f, style_dir.join(f.file_name().unwrap())).unwrap();
    }
    run_cli(&[
        "generate",
        "--checkpoint",
        &ckpt,
        "--style-dir",
        &p("style"),
        "--text",
        "ink pen hand",
        "--attention",
        "--seed",
        seed,
        "--out",
        &p("gen"),
    ])?;
    run_cli(&[
        "ssaa",
        "--checkpoint",
        &ckpt,
        "--style-dir",
        &p("style"),
        "--text",
        "scholar",
        "--seed",
        seed,
        "--out",
        &p("ssaa"),
    ])?;
    run_cli(&[
        "evaluate",
        "--checkpoint",
        &ckpt,
        "--data",
        &p("data"),
        "--split",
        "test",
        "--seed",
        seed,
        "--out",
        &p("eval/report.json"),
    ])?;
    let files = dir_bytes(root);
    for required in [
        "run/final.ckpt",
        "gen/word_000.png",
        "ssaa/ssaa_grid.png",
        "eval/report.json",
    ] {
        if !files.contains_key(required) {
            return Err(format!("missing {required}"));
        }
    }
    Ok(files
        .into_iter()
        .filter(|(k, _)| !k.ends_with("run_manifest.json") && !k.ends_with(".manifest.json"))
        .collect())
}

fn ac9() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = pipeline(a.path(), "5")?;
    let fb = pipeline(b.path(), "5")?;
    let keys_a: Vec<_> = fa.keys().collect();
    let keys_b: Vec<_> = fb.keys().collect();
    check!(keys_a == keys_b, "file sets differ");
    let differing: Vec<_> = fa
        .iter()
        .filter(|(k, v)| fb[*k] != **v)
        .map(|(k, _)| k.clone())
        .collect();
    check!(differing.is_empty(), "files differ: {differing:?}");
    Ok(format!(
        "5 commands exit 0 twice; {} artifacts byte-identical",
        fa.len()
    ))
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome); 9] = [
        ("AC1", "shape pipeline", ac1),
        ("AC2", "attention invariants", ac2),
        ("AC3", "loss oracles", ac3),
        ("AC4", "gradient checks", ac4),
        ("AC5", "training schedule", ac5),
        ("AC6", "desk-scale overfit", ac6),
        ("AC7", "attention analysis oracles", ac7),
        ("AC8", "metric oracles", ac8),
        ("AC9", "end-to-end CLI replay", ac9),
    ];
    let only: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| a.starts_with("AC"))
        .collect();
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !only.is_empty() && !only.iter().any(|o| o == id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {id} {name} ({secs:.1}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id} {name} ({secs:.1}s): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
