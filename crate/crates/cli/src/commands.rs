//! The six subcommands. Each is a thin wrapper over the library: parse and
//! resolve inputs, call the core operation, write artifacts plus a manifest.

use std::path::{Path, PathBuf};

use noisenet_core::idx;
use noisenet_core::pdf::{self, GaussianInput, Histogram};
use noisenet_core::stream::{rng_from, tag};
use noisenet_core::{
    evaluate_accuracy, gradient_check, noise_sweep, read_checkpoint, run_config_from_text, train,
    write_checkpoint, CheckpointMeta, Dataset, Error, LossKind, NoiseKind, NoiseSpec, Result,
    RunConfig, SweepResult,
};

use crate::archive;
use crate::manifest::Manifest;

/// Environment variable naming the base directory for relative data paths.
pub const DATA_DIR_ENV: &str = "NOISENET_DATA_DIR";

/// Resolve a data path: absolute paths pass through, relative paths are
/// taken against `$NOISENET_DATA_DIR` when set, else the working directory.
pub fn resolve_data_path(path: &str) -> PathBuf {
    let p = PathBuf::from(path);
    if p.is_absolute() {
        return p;
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(base) => PathBuf::from(base).join(p),
        None => p,
    }
}

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut text = String::with_capacity(rows.len() * 32 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string())
}

fn manifest_path(artifact: &Path) -> PathBuf {
    artifact.with_file_name(format!("{}_manifest.txt", file_stem(artifact)))
}

pub fn cmd_ingest(
    images: &Path,
    labels: &Path,
    out: &Path,
    name: Option<String>,
    classes: usize,
) -> Result<()> {
    let image_bytes = archive::read_maybe_gzip(images)?;
    let label_bytes = archive::read_maybe_gzip(labels)?;
    let raw = idx::parse_idx_images(&image_bytes)?;
    let parsed_labels = idx::parse_idx_labels(&label_bytes, classes)?;
    let name = name.unwrap_or_else(|| file_stem(out));
    // Converting validates counts and finiteness before anything is written.
    let dataset = idx::to_dataset(&raw, &parsed_labels, &name)?;
    let bytes = archive::archive_bytes(&name, &raw, &parsed_labels)?;
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(out, &bytes)?;
    let checksum = archive::sha256_hex(&bytes);

    let mut m = Manifest::new("ingest");
    m.config("name", &name)
        .config("classes", classes)
        .config("samples", dataset.len())
        .config("image_dims", format!("{}x{}", raw.rows, raw.cols));
    m.input(images)?;
    m.input(labels)?;
    m.artifact(out)?;
    m.write(&manifest_path(out))?;

    println!(
        "ingested {name}: {} samples of {}x{}, sha256={checksum}",
        dataset.len(),
        raw.rows,
        raw.cols
    );
    Ok(())
}

fn load_archive(path: &Path) -> Result<Dataset> {
    archive::load_dataset(path)
}

pub fn parse_override(raw: &str) -> Result<(String, String)> {
    match raw.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.to_string())),
        _ => Err(Error::ConfigParse {
            line: 0,
            msg: format!("--set expects key=value, got `{raw}`"),
        }),
    }
}

fn load_run_config(config_path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(config_path)?;
    let pairs: Result<Vec<(String, String)>> =
        overrides.iter().map(|s| parse_override(s)).collect();
    run_config_from_text(&text, &pairs?)
}

pub fn cmd_train(config_path: &Path, overrides: &[String], out_dir: &Path) -> Result<()> {
    let cfg = load_run_config(config_path, overrides)?;
    let train_path = cfg
        .train_data
        .as_deref()
        .ok_or_else(|| Error::ConfigMismatch("config does not set data.train".into()))?;
    let train_path = resolve_data_path(train_path);
    let full_train = load_archive(&train_path)?;
    if cfg.val_split >= full_train.len() {
        return Err(Error::ConfigMismatch(format!(
            "data.val_split {} leaves no training data from {} samples",
            cfg.val_split,
            full_train.len()
        )));
    }
    let (train_set, val_set) = full_train.split_tail(cfg.val_split)?;
    let test_path = cfg.test_data.as_deref().map(resolve_data_path);
    let test_set = test_path.as_deref().map(load_archive).transpose()?;

    println!(
        "training {} ({} mode, {} epochs, seed {})",
        file_stem(config_path),
        cfg.train.mode.as_str(),
        cfg.train.epochs,
        cfg.train.seed
    );
    let (params, history) = train(&cfg.train, &train_set, &val_set)?;
    for e in 0..history.train_loss.len() {
        println!(
            "epoch {}/{}: loss={:.6} penalty={:.6} val={:.2}% ({:.1}s)",
            e + 1,
            cfg.train.epochs,
            history.train_loss[e],
            history.penalty[e],
            history.val_accuracy[e],
            history.wall_time_s[e],
        );
    }

    std::fs::create_dir_all(out_dir)?;
    let stem = file_stem(config_path);
    let ckpt_path = out_dir.join(format!("{stem}.ckpt"));
    let meta = CheckpointMeta {
        init_seed: cfg.train.seed,
        mode: cfg.train.mode.as_str().to_string(),
        loss: cfg.train.loss.as_str().to_string(),
        optimizer: cfg.train.optimizer.name().to_string(),
    };
    write_checkpoint(&ckpt_path, &params, &meta)?;

    let history_path = out_dir.join(format!("{stem}_history.csv"));
    let rows: Vec<Vec<String>> = (0..history.train_loss.len())
        .map(|e| {
            vec![
                (e + 1).to_string(),
                fmt6(history.train_loss[e]),
                fmt6(history.penalty[e]),
                fmt6(history.val_accuracy[e]),
            ]
        })
        .collect();
    write_csv(
        &history_path,
        "epoch,train_loss,penalty,val_accuracy",
        &rows,
    )?;

    let mut summary = format!(
        "final: val={:.2}%",
        history.val_accuracy.last().copied().unwrap_or(f64::NAN)
    );
    if let Some(test) = &test_set {
        let (noiseless, _) = evaluate_accuracy(&params, test, &NoiseSpec::none(), 1, 0)?;
        summary.push_str(&format!(" test={noiseless:.2}% (noiseless)"));
        if cfg.train.noise.is_active() {
            let (noisy, _) = evaluate_accuracy(&params, test, &cfg.train.noise, 3, 0)?;
            summary.push_str(&format!(
                " test={noisy:.2}% ({} variance {})",
                cfg.train.noise.kind.as_str(),
                cfg.train.noise.variance()
            ));
        }
    }
    println!("{summary}");

    let mut m = Manifest::new("train");
    m.config_all(&cfg.to_key_values());
    m.input(config_path)?;
    m.input(&train_path)?;
    if let Some(p) = &test_path {
        m.input(p)?;
    }
    m.artifact(&ckpt_path)?;
    m.artifact(&history_path)?;
    m.write(&manifest_path(&ckpt_path))?;
    println!("wrote {}", ckpt_path.display());
    Ok(())
}

fn variance_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite()) || min <= 0.0 || max <= min || points < 2 {
        return Err(Error::ConfigMismatch(format!(
            "sweep grid needs 0 < min < max and at least 2 points, got min={min} max={max} points={points}"
        )));
    }
    let ratio = max / min;
    Ok((0..points)
        .map(|i| {
            if i == points - 1 {
                max
            } else {
                min * ratio.powf(i as f64 / (points - 1) as f64)
            }
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_sweep(
    ckpt_path: &Path,
    data_path: &Path,
    kind: NoiseKind,
    min: f64,
    max: f64,
    points: usize,
    repeats: usize,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<()> {
    let ckpt = read_checkpoint(ckpt_path)?;
    let data = load_archive(data_path)?;
    let grid = variance_grid(min, max, points)?;
    let model_tag = file_stem(ckpt_path);
    let sweep = noise_sweep(&ckpt.params, &data, kind, &grid, repeats, seed, &model_tag)?;

    let out_path = out
        .unwrap_or_else(|| ckpt_path.with_file_name(format!("{model_tag}_{}.csv", kind.as_str())));
    if let Some(dir) = out_path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    write_sweep_csv(&out_path, &sweep)?;

    let (noiseless, _) = evaluate_accuracy(&ckpt.params, &data, &NoiseSpec::none(), 1, 0)?;
    let first = sweep.points.first().expect("nonempty grid");
    let last = sweep.points.last().expect("nonempty grid");
    println!(
        "sweep {} {}: noiseless={:.2}% acc@{:.0e}={:.2}% acc@{:.0e}={:.2}%",
        model_tag,
        kind.as_str(),
        noiseless,
        first.variance,
        first.mean_acc,
        last.variance,
        last.mean_acc
    );

    let mut m = Manifest::new("sweep");
    m.config("kind", kind.as_str())
        .config("min", min)
        .config("max", max)
        .config("points", points)
        .config("repeats", repeats)
        .config("seed", seed);
    m.input(ckpt_path)?;
    m.input(data_path)?;
    m.artifact(&out_path)?;
    m.write(&manifest_path(&out_path))?;
    println!("wrote {}", out_path.display());
    Ok(())
}

fn write_sweep_csv(path: &Path, sweep: &SweepResult) -> Result<()> {
    let rows: Vec<Vec<String>> = sweep
        .points
        .iter()
        .map(|p| vec![fmt6(p.variance), fmt6(p.mean_acc), fmt6(p.std_acc)])
        .collect();
    write_csv(path, "variance,mean_acc,std_acc", &rows)
}

pub fn cmd_pdf(
    mus: &[f64],
    variance: f64,
    samples: usize,
    bins: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<()> {
    if mus.is_empty() {
        return Err(Error::ConfigMismatch("pdf needs at least one mu".into()));
    }
    if bins == 0 {
        return Err(Error::ConfigMismatch("pdf needs at least one bin".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut analytic_rows = Vec::new();
    let mut empirical_rows = Vec::new();
    for (i, &mu) in mus.iter().enumerate() {
        let g = GaussianInput::new(mu, variance)?;
        for j in 1..bins {
            let a = j as f64 / bins as f64;
            let density = pdf::analytic_activation_pdf(g, a)?;
            analytic_rows.push(vec![fmt6(mu), fmt6(a), fmt6(density)]);
        }
        let mut rng = rng_from(seed, &[tag::PDF_SAMPLE, i as u64]);
        let hist = pdf::empirical_activation_pdf(g, samples, bins, &mut rng)?;
        for (center, density) in hist.bin_centers().iter().zip(&hist.densities) {
            empirical_rows.push(vec![fmt6(mu), fmt6(*center), fmt6(*density)]);
        }
        let l1 = pdf::l1_distance_to_analytic(g, &hist)?;
        let (mass, mean, std) = pdf::analytic_moments(g);
        println!(
            "mu={mu}: analytic mass={mass:.8} mean={mean:.4} std={std:.4} | empirical L1={l1:.5}"
        );
    }
    let analytic_path = out_dir.join("pdf_analytic.csv");
    let empirical_path = out_dir.join("pdf_empirical.csv");
    write_csv(&analytic_path, "mu,a,density", &analytic_rows)?;
    write_csv(&empirical_path, "mu,bin_center,density", &empirical_rows)?;

    let mut m = Manifest::new("pdf");
    m.config(
        "mu",
        mus.iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(","),
    )
    .config("variance", variance)
    .config("samples", samples)
    .config("bins", bins)
    .config("seed", seed);
    m.artifact(&analytic_path)?;
    m.artifact(&empirical_path)?;
    m.write(&out_dir.join("pdf_manifest.txt"))?;
    println!(
        "wrote {} and {}",
        analytic_path.display(),
        empirical_path.display()
    );
    Ok(())
}

fn write_histogram_csv(path: &Path, hist: &Histogram) -> Result<()> {
    let rows: Vec<Vec<String>> = hist
        .densities
        .iter()
        .enumerate()
        .map(|(i, d)| {
            vec![
                fmt6(hist.bin_edges[i]),
                fmt6(hist.bin_edges[i + 1]),
                fmt6(*d),
            ]
        })
        .collect();
    write_csv(path, "bin_lo,bin_hi,density", &rows)
}

pub fn cmd_inspect(
    ckpt_path: &Path,
    data_path: Option<&Path>,
    sample_cap: usize,
    out_dir: Option<PathBuf>,
) -> Result<()> {
    let ckpt = read_checkpoint(ckpt_path)?;
    let out_dir = out_dir.unwrap_or_else(|| {
        ckpt_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default()
    });
    std::fs::create_dir_all(&out_dir)?;
    let stem = file_stem(ckpt_path);
    println!(
        "{stem}: layers {:?}, mode={}, loss={}, optimizer={}, init_seed={}",
        ckpt.params.layer_sizes,
        ckpt.meta.mode,
        ckpt.meta.loss,
        ckpt.meta.optimizer,
        ckpt.meta.init_seed
    );

    let mut m = Manifest::new("inspect");
    m.config("sample_cap", sample_cap);
    m.input(ckpt_path)?;

    for (l, w) in ckpt.params.weights.iter().enumerate() {
        let stats = pdf::row_stats(w);
        let rows: Vec<Vec<String>> = stats
            .iter()
            .enumerate()
            .map(|(rank, (mean, std))| vec![rank.to_string(), fmt6(*mean), fmt6(*std)])
            .collect();
        let path = out_dir.join(format!("{stem}_rows_w{}.csv", l + 1));
        write_csv(&path, "rank,mean,std", &rows)?;
        m.artifact(&path)?;
        println!(
            "w{}: {}x{} rows sorted by mean [{:.4}, {:.4}]",
            l + 1,
            w.nrows(),
            w.ncols(),
            stats.first().map(|s| s.0).unwrap_or(f64::NAN),
            stats.last().map(|s| s.0).unwrap_or(f64::NAN)
        );
    }

    if let Some(data_path) = data_path {
        let data = load_archive(data_path)?;
        m.input(data_path)?;
        let dists = pdf::collect_network_distributions(&ckpt.params, &data, sample_cap)?;
        for (i, hist) in dists.pre_activations.iter().enumerate() {
            let path = out_dir.join(format!("{stem}_dist_pre{}.csv", i + 1));
            write_histogram_csv(&path, hist)?;
            m.artifact(&path)?;
        }
        for (i, hist) in dists.post_activations.iter().enumerate() {
            let path = out_dir.join(format!("{stem}_dist_post{}.csv", i + 1));
            write_histogram_csv(&path, hist)?;
            m.artifact(&path)?;
        }
        let path = out_dir.join(format!("{stem}_dist_wout.csv"));
        write_histogram_csv(&path, &dists.output_weights)?;
        m.artifact(&path)?;
        println!(
            "distributions over {} samples: {} hidden layers + output weights",
            data.len().min(sample_cap),
            dists.pre_activations.len()
        );
    }

    m.write(&out_dir.join(format!("{stem}_inspect_manifest.txt")))?;
    Ok(())
}

pub fn cmd_gradcheck(probes: usize, tolerance: f64, seed: u64) -> Result<()> {
    let report = gradient_check(
        &[10, 8, 8, 4],
        LossKind::SoftmaxCrossEntropy,
        probes,
        tolerance,
        seed,
    )?;
    for entry in &report.entries {
        println!(
            "{}: probes={} max_rel_err={:.3e}",
            entry.mode.as_str(),
            entry.probes,
            entry.max_rel_err
        );
    }
    println!(
        "gradcheck PASS: max rel err {:.3e} < {:.0e}",
        report.max_rel_err(),
        report.tolerance
    );
    Ok(())
}
