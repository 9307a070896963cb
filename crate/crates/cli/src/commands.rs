use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use image::GrayImage;
use serde_json::json;

use scriptgen::corpus::{
    generate_with_styles, load_iam_words, preprocess_style_image, sample_writer_styles,
    write_dataset, CharsetTokenizer, Split, StyleSampleSet, WriterId, STYLE_CANVAS,
};
use scriptgen::metrics::{evaluate, features_from_container, fid, kid, EvalConfig, KidConfig};
use scriptgen::model::{AttentionRecord, GeneratedWordImage};
use scriptgen::ssaa::{
    run_ssaa, save_ssaa, write_container, NamedTensor, SsaaConfig, StrokeParams,
};
use scriptgen::trainer::{TrainConfig, Trainer};

use crate::manifest::{RunManifest, RUN_MANIFEST};

/// Copy of the newest checkpoint a `train` run wrote.
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
use crate::{Cli, Command, EvaluateArgs, GenerateArgs, SsaaArgs, SynthDataArgs, TrainArgs};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::SynthData(a) => synth_data(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Generate(a) => generate(cli, a),
        Command::Ssaa(a) => ssaa(cli, a),
        Command::Evaluate(a) => evaluate_cmd(cli, a),
    }
}

fn out_dir(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn seed(cli: &Cli) -> u64 {
    cli.seed.unwrap_or(0)
}

fn read_words(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading word list {}", path.display()))?;
    let words: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    ensure!(!words.is_empty(), "word list {} is empty", path.display());
    Ok(words)
}

fn synth_data(cli: &Cli, a: &SynthDataArgs) -> Result<()> {
    ensure!(a.writers > 0, "--writers must be at least 1");
    let seed = seed(cli);
    let tok = CharsetTokenizer::ascii();
    let styles = sample_writer_styles(a.writers, seed);
    let train_words = read_words(&a.words)?;
    let mut entries: Vec<_> = generate_with_styles(&styles, &train_words, seed, &tok)?
        .into_iter()
        .map(|s| (s, Split::Train))
        .collect();
    let mut test_words = Vec::new();
    if let Some(path) = &a.test_words {
        test_words = read_words(path)?;
        let test = generate_with_styles(&styles, &test_words, seed.wrapping_add(1), &tok)?;
        entries.extend(test.into_iter().map(|s| (s, Split::Test)));
    }
    let out = out_dir(cli, "data");
    write_dataset(&out, &entries)?;
    let mut m = RunManifest::new(
        "synth-data",
        seed,
        json!({ "writers": a.writers, "train_words": train_words, "test_words": test_words }),
    );
    m.artifact(&out, &out.join(scriptgen::corpus::MANIFEST_FILE))?;
    m.write(&out.join(RUN_MANIFEST))?;
    println!("wrote {} word images to {}", entries.len(), out.display());
    Ok(())
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let out = out_dir(cli, "run");
    let split: Split = a.split.parse()?;
    let mut trainer = match &a.resume {
        Some(ckpt) => {
            ensure!(
                cli.config.is_none() && !a.desk,
                "--resume takes its settings from the checkpoint"
            );
            let t = Trainer::from_checkpoint(ckpt)
                .with_context(|| format!("loading {}", ckpt.display()))?;
            log::info!("resuming at iteration {}", t.iteration());
            t
        }
        None => {
            let mut cfg = match (&cli.config, a.desk) {
                (Some(path), _) => TrainConfig::load(path)?,
                (None, true) => TrainConfig::desk(),
                (None, false) => TrainConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let tok = CharsetTokenizer::ascii();
            let data = load_iam_words(&a.data, split, &tok)?;
            cfg.model.num_writers = data.writer_keys.len();
            let t = Trainer::new(cfg, tok, data.writer_keys)?;
            if let Some(w) = &a.style_weights {
                let n = t.generator.load_style_encoder_weights(w)?;
                log::info!("loaded {n} style encoder tensors from {}", w.display());
            }
            t
        }
    };
    trainer.set_limits(a.epochs, a.max_iterations)?;
    let data = load_iam_words(&a.data, split, trainer.tokenizer())?;
    ensure!(
        data.writer_keys == trainer.writer_keys(),
        "writers in {} do not match the checkpoint",
        a.data.display()
    );
    fs::create_dir_all(&out)?;
    fs::write(out.join("config.toml"), trainer.config().to_toml_string()?)?;
    let summary = trainer.fit(&data.samples, &out, |r| {
        if r.iteration % 50 == 0 {
            log::info!(
                "iteration {} d {:.4} tr {:.4} wcn {:.4} g {:?}",
                r.iteration,
                r.d_loss,
                r.tr_real,
                r.wcn_real,
                r.g_total
            );
        }
    })?;
    let mut m = RunManifest::new(
        "train",
        trainer.config().seed,
        serde_json::to_value(trainer.config())?,
    );
    let last = match summary.checkpoints.last() {
        Some(ckpt) => {
            let fin = out.join(FINAL_CHECKPOINT);
            fs::copy(ckpt, &fin)?;
            m.checkpoint(&fin)?;
            m.artifact(&out, &fin)?;
            Some(fin)
        }
        None => None,
    };
    m.artifact(&out, &out.join("config.toml"))?;
    m.artifact(&out, &summary.loss_log)?;
    for c in &summary.checkpoints {
        m.artifact(&out, c)?;
    }
    m.write(&out.join(RUN_MANIFEST))?;
    match last {
        Some(ckpt) => println!(
            "{} iterations, checkpoint {}",
            summary.iterations,
            ckpt.display()
        ),
        None => println!("{} iterations, nothing new to train", summary.iterations),
    }
    Ok(())
}

/// Reference images of one writer: image files in `dir` sorted by name,
/// the first `n` that fit the style canvas, repeated when there are fewer.
fn style_set_from_dir(dir: &Path, n: usize) -> Result<StyleSampleSet> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading style directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        })
        .collect();
    paths.sort();
    let mut images = Vec::new();
    for p in &paths {
        let gray: GrayImage = image::open(p)
            .with_context(|| format!("reading {}", p.display()))?
            .to_luma8();
        match preprocess_style_image(&gray, STYLE_CANVAS) {
            Ok(im) => images.push(im),
            Err(e) => log::warn!("skipping {}: {e}", p.display()),
        }
        if images.len() == n {
            break;
        }
    }
    ensure!(
        !images.is_empty(),
        "no usable style images in {}",
        dir.display()
    );
    let found = images.len();
    let picks: Vec<usize> = (0..n).map(|i| i % found).collect();
    let images = picks.iter().map(|&i| images[i].clone()).collect();
    Ok(StyleSampleSet {
        images,
        writer: WriterId(0),
        picks,
    })
}

fn load_trainer(path: &Path) -> Result<Trainer> {
    Trainer::from_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn attention_tensor(record: &AttentionRecord) -> Result<NamedTensor> {
    let (h, k, l) = record.weights.dim();
    Ok(NamedTensor::new(
        "attention",
        vec![h, k, l],
        record.weights.iter().copied().collect(),
    )?)
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let words: Vec<&str> = a.text.split_whitespace().collect();
    ensure!(!words.is_empty(), "--text has no words");
    let trainer = load_trainer(&a.checkpoint)?;
    let seed = seed(cli);
    let set = style_set_from_dir(&a.style_dir, trainer.config().model.num_style_images)?;
    let sets = vec![set; words.len()];
    let (images, records) =
        trainer
            .generator
            .generate(&sets, &words, trainer.tokenizer(), a.attention, seed)?;
    let out = out_dir(cli, "generated");
    fs::create_dir_all(&out)?;
    let mut m = RunManifest::new(
        "generate",
        seed,
        json!({ "text": a.text, "attention": a.attention }),
    );
    m.checkpoint(&a.checkpoint)?;
    for (i, g) in images.iter().enumerate() {
        let path = out.join(format!("word_{i:03}.png"));
        g.image.save(&path)?;
        m.artifact(&out, &path)?;
    }
    let listing: Vec<&GeneratedWordImage> = images.iter().collect();
    let words_path = out.join("words.json");
    fs::write(&words_path, serde_json::to_string_pretty(&listing)?)?;
    m.artifact(&out, &words_path)?;
    for (i, r) in records.iter().enumerate() {
        let dir = out.join(format!("attention_{i:03}"));
        write_container(&dir, &r.text, r.grid, &[attention_tensor(r)?])?;
        m.artifact(&out, &dir.join(scriptgen::ssaa::MANIFEST))?;
        m.artifact(&out, &dir.join("attention.bin"))?;
    }
    m.write(&out.join(RUN_MANIFEST))?;
    println!("wrote {} images to {}", images.len(), out.display());
    Ok(())
}

fn ssaa(cli: &Cli, a: &SsaaArgs) -> Result<()> {
    let text = a.text.trim();
    ensure!(!text.is_empty(), "--text is empty");
    ensure!(
        (0.0..=100.0).contains(&a.percentile),
        "--percentile must lie in [0, 100], got {}",
        a.percentile
    );
    let trainer = load_trainer(&a.checkpoint)?;
    let seed = seed(cli);
    let set = style_set_from_dir(&a.style_dir, trainer.config().model.num_style_images)?;
    let (images, records) = trainer.generator.generate(
        std::slice::from_ref(&set),
        &[text],
        trainer.tokenizer(),
        true,
        seed,
    )?;
    let cfg = SsaaConfig {
        strokes: StrokeParams {
            percentile: a.percentile,
            min_area: a.min_area,
            top_k: a.top_k,
        },
        ..SsaaConfig::default()
    };
    let result = run_ssaa(&records[0], &set.images, &cfg)?;
    let out = out_dir(cli, "ssaa");
    save_ssaa(&out, &records[0], &result)?;
    let word_path = out.join("word.png");
    images[0].image.save(&word_path)?;
    let mut m = RunManifest::new("ssaa", seed, json!({ "text": text, "ssaa": cfg }));
    m.checkpoint(&a.checkpoint)?;
    for p in [
        out.join(scriptgen::ssaa::GRID_FILE),
        out.join("strokes.json"),
        word_path,
        out.join(scriptgen::ssaa::CONTAINER_DIR)
            .join(scriptgen::ssaa::MANIFEST),
    ] {
        m.artifact(&out, &p)?;
    }
    m.write(&out.join(RUN_MANIFEST))?;
    println!("wrote {}", out.join(scriptgen::ssaa::GRID_FILE).display());
    Ok(())
}

fn evaluate_cmd(cli: &Cli, a: &EvaluateArgs) -> Result<()> {
    let trainer = load_trainer(&a.checkpoint)?;
    let seed = seed(cli);
    let split: Split = a.split.parse()?;
    let data = load_iam_words(&a.data, split, trainer.tokenizer())?;
    if data.samples.is_empty() {
        bail!(
            "split {split} of {} has no usable samples",
            a.data.display()
        );
    }
    let kid_cfg = KidConfig {
        subset_size: a.kid_subset_size,
        num_subsets: a.kid_subsets,
        seed,
    };
    let cfg = EvalConfig {
        extractor: a.extractor.clone(),
        kid: kid_cfg,
        seed,
        ..EvalConfig::default()
    };
    let mut report = evaluate(&trainer, &data.samples, &cfg)?.report;
    if let (Some(real), Some(generated)) = (&a.real_features, &a.generated_features) {
        let fr = features_from_container(real)?;
        let fg = features_from_container(generated)?;
        ensure!(
            fr.ncols() == fg.ncols(),
            "feature widths differ: {} real, {} generated",
            fr.ncols(),
            fg.ncols()
        );
        report.fid = fid(&fg, &fr)?;
        report.kid = kid(&fg, &fr, &kid_cfg)? * 1e3;
        report.extractor = "external".into();
        report.feature_dim = fr.ncols();
        report.num_generated = fg.nrows();
        report.num_reference = fr.nrows();
    }
    let path = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("report.json"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    let root = path.parent().unwrap_or(Path::new(""));
    let mut m = RunManifest::new("evaluate", seed, json!({ "split": a.split, "eval": cfg }));
    m.checkpoint(&a.checkpoint)?;
    m.artifact(root, &path)?;
    m.write(&path.with_extension("manifest.json"))?;
    println!(
        "fid {:.4} kid(x1e3) {:.4} delta_cer {:.4}",
        report.fid, report.kid, report.delta_cer
    );
    Ok(())
}
