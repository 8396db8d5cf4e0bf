use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::anyhow;
use serde_json::{json, Value};

use gscodec::codec::{container_size_report, IndexAccounting, SizeReport};
use gscodec::metrics::{codebook_stats, memory_breakdown, quality_report};
use gscodec::ply_io::{read_ply, write_ply, BYTES_PER_VERTEX};
use gscodec::splat2d::{
    render, sigmoid, train, write_scene, write_trace_csv, LearningRates, Optimizer, QatSchedule,
    Scene2D, TrainConfig, Vq2dConfig,
};
use gscodec::vq::{assign_frozen, build_codebooks, Init};
use gscodec::{
    decode, encode, BitWidth, EncodeOptions, GaussianCloud, Image, ParamGroup, ResidualPolicy,
    VqConfig,
};

use crate::failure::{Failure, OrExit, EXIT_INVALID, EXIT_IO, EXIT_MALFORMED};
use crate::{
    Accounting, CompressArgs, EncodeArgs, Global, Group, InitArg, OptimizerArg, Train2dArgs,
};

fn emit(g: &Global, json: Value, text: impl FnOnce() -> String) {
    if g.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json).expect("JSON values serialize")
        );
    } else if !g.quiet {
        print!("{}", text());
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).or_exit(EXIT_IO, format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).or_exit(EXIT_IO, format!("writing {}", path.display()))
}

fn read_cloud(path: &Path) -> Result<(GaussianCloud, usize), Failure> {
    let bytes = read(path)?;
    let cloud =
        read_ply(&bytes[..]).or_exit(EXIT_MALFORMED, format!("parsing {}", path.display()))?;
    Ok((cloud, bytes.len()))
}

fn residual_bits(flag: &str, bits: u32) -> Result<Option<BitWidth>, Failure> {
    if bits == 32 {
        return Ok(None);
    }
    BitWidth::from_bits(bits)
        .map(Some)
        .ok_or_else(|| Failure::invalid(anyhow!("{flag} must be 4, 8, 16 or 32, got {bits}")))
}

fn param_group(g: Group) -> ParamGroup {
    match g {
        Group::Dc => ParamGroup::ColorDc,
        Group::Sh => ParamGroup::Sh,
        Group::Scale => ParamGroup::Scale,
        Group::Rotation => ParamGroup::Rotation,
    }
}

fn encode_options(a: &EncodeArgs, drop_sh: bool) -> Result<EncodeOptions, Failure> {
    Ok(EncodeOptions {
        residuals: ResidualPolicy {
            position: residual_bits("--position-bits", a.position_bits)?,
            opacity: residual_bits("--opacity-bits", a.opacity_bits)?,
        },
        drop_sh,
        rle_group: param_group(a.rle_group),
    })
}

fn size_summary(payload: usize, file: usize, out: &[u8], report: &SizeReport) -> (Value, String) {
    let ratio = payload as f64 / out.len() as f64;
    let json = json!({
        "input_bytes": file,
        "input_payload_bytes": payload,
        "output_bytes": out.len(),
        "ratio": ratio,
        "size_report": report,
    });
    let text = format!(
        "{} Gaussians: {} -> {} bytes (ratio {:.2}x)\n{}",
        report.count,
        payload,
        out.len(),
        ratio,
        memory_breakdown(report)
    );
    (json, text)
}

pub fn compress(g: &Global, a: &CompressArgs) -> Result<(), Failure> {
    let (mut cloud, file_bytes) = read_cloud(&a.input)?;
    let payload = cloud.len() * BYTES_PER_VERTEX;
    if let Some(t) = a.prune_min_opacity {
        if !(t > 0.0 && t < 1.0) {
            return Err(Failure::invalid(anyhow!(
                "--prune-min-opacity must be in (0, 1), got {t}"
            )));
        }
        let keep: Vec<usize> = (0..cloud.len())
            .filter(|&i| sigmoid(f64::from(cloud.logit_opacity[i])) >= t)
            .collect();
        log::info!(
            "pruned {} of {} Gaussians",
            cloud.len() - keep.len(),
            cloud.len()
        );
        cloud = cloud.select_rows(&keep);
    }
    if cloud.is_empty() {
        return Err(Failure::invalid(anyhow!("no Gaussians left to compress")));
    }
    let mut config = VqConfig {
        k_dc: a.k_dc,
        k_sh: a.k_sh,
        k_scale: a.k_scale,
        k_rot: a.k_rot,
        lloyd_iters: a.lloyd_iters,
        init: match a.init {
            InitArg::Kmeanspp => Init::KMeansPlusPlus,
            InitArg::Random => Init::RandomSample,
        },
        seed: g.seed,
        ..VqConfig::default()
    };
    if let Some(k) = a.k_all {
        (config.k_dc, config.k_sh, config.k_scale, config.k_rot) = (k, k, k, k);
    }
    if a.drop_sh {
        config.k_sh = 0;
    }
    let options = encode_options(&a.encode, a.drop_sh)?;
    if a.drop_sh && options.rle_group == ParamGroup::Sh {
        return Err(Failure::invalid(anyhow!(
            "--rle-group sh conflicts with --drop-sh"
        )));
    }
    let books = build_codebooks(&cloud, &config).or_exit(EXIT_INVALID, "building codebooks")?;
    let out = encode(&cloud, &books, &options).or_exit(EXIT_INVALID, "encoding")?;
    write(&a.output, &out)?;
    let report = container_size_report(&out, IndexAccounting::Packed)
        .or_exit(EXIT_INVALID, "size report")?;
    let (json, text) = size_summary(payload, file_bytes, &out, &report);
    emit(g, json, || text);
    Ok(())
}

pub fn decompress(g: &Global, input: &Path, output: &Path) -> Result<(), Failure> {
    let bytes = read(input)?;
    let decoded =
        decode(&bytes).or_exit(EXIT_MALFORMED, format!("decoding {}", input.display()))?;
    let file = File::create(output).or_exit(EXIT_IO, format!("creating {}", output.display()))?;
    write_ply(&decoded.cloud, BufWriter::new(file))
        .or_exit(EXIT_IO, format!("writing {}", output.display()))?;
    let n = decoded.cloud.len();
    emit(
        g,
        json!({ "count": n, "output_bytes": fs::metadata(output).map(|m| m.len()).ok() }),
        || format!("wrote {n} Gaussians to {}\n", output.display()),
    );
    Ok(())
}

pub fn inspect(g: &Global, input: &Path, accounting: Accounting) -> Result<(), Failure> {
    let bytes = read(input)?;
    let decoded =
        decode(&bytes).or_exit(EXIT_MALFORMED, format!("decoding {}", input.display()))?;
    let accounting = match accounting {
        Accounting::Packed => IndexAccounting::Packed,
        Accounting::Unpacked32 => IndexAccounting::Unpacked32,
    };
    let report =
        container_size_report(&bytes, accounting).or_exit(EXIT_MALFORMED, "size report")?;
    let mut stats = serde_json::Map::new();
    let mut text = memory_breakdown(&report);
    text.push_str("\ngroup        k  used  max share  entropy  entropy-coded B  packed B\n");
    for group in ParamGroup::ALL {
        let Some(book) = decoded.codebooks.get(group) else {
            continue;
        };
        let s = codebook_stats(&book.assignments, book.k());
        text.push_str(&format!(
            "{:<9} {:>5} {:>5} {:>9.4} {:>8.3} {:>16.0} {:>9}\n",
            group.name(),
            s.k,
            s.used_codes,
            s.max_share,
            s.entropy_bits,
            s.estimated_entropy_coded_bytes,
            s.packed_bytes
        ));
        stats.insert(
            group.name().to_string(),
            serde_json::to_value(&s).expect("stats serialize"),
        );
    }
    emit(
        g,
        json!({ "size_report": report, "codebooks": stats }),
        || text,
    );
    Ok(())
}

fn png_names(dir: &Path) -> Result<BTreeSet<String>, Failure> {
    let entries = fs::read_dir(dir).or_exit(EXIT_IO, format!("listing {}", dir.display()))?;
    let mut names = BTreeSet::new();
    for entry in entries {
        let entry = entry.or_exit(EXIT_IO, format!("listing {}", dir.display()))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.to_ascii_lowercase().ends_with(".png") {
            names.insert(name);
        }
    }
    Ok(names)
}

fn read_image(path: &Path) -> Result<Image, Failure> {
    Image::read_png(&read(path)?).or_exit(EXIT_MALFORMED, format!("decoding {}", path.display()))
}

pub fn eval(g: &Global, reference: &Path, test: &Path) -> Result<(), Failure> {
    let (a, b) = (png_names(reference)?, png_names(test)?);
    if a != b {
        let only: Vec<_> = a.symmetric_difference(&b).cloned().collect();
        return Err(Failure::invalid(anyhow!(
            "image sets differ: {}",
            only.join(", ")
        )));
    }
    if a.is_empty() {
        return Err(Failure::invalid(anyhow!(
            "no PNG images in {}",
            reference.display()
        )));
    }
    let mut images = Vec::with_capacity(a.len());
    for name in &a {
        images.push((
            name.clone(),
            read_image(&test.join(name))?,
            read_image(&reference.join(name))?,
        ));
    }
    let pairs: Vec<(String, &Image, &Image)> =
        images.iter().map(|(n, t, r)| (n.clone(), t, r)).collect();
    let report = quality_report(&pairs, 1.0).or_exit(EXIT_INVALID, "comparing images")?;
    emit(
        g,
        serde_json::to_value(&report).expect("report serializes"),
        || {
            let mut s = String::from("image                          PSNR      SSIM\n");
            for i in 0..report.names.len() {
                s.push_str(&format!(
                    "{:<26} {:>9.3} {:>9.5}\n",
                    report.names[i], report.psnr_per_image[i], report.ssim_per_image[i]
                ));
            }
            s.push_str(&format!(
                "mean PSNR {:.3}  PSNR-AM {:.3}  mean SSIM {:.5}\n",
                report.psnr_mean, report.psnr_am, report.ssim_mean
            ));
            s
        },
    );
    Ok(())
}

fn schedule(a: &Train2dArgs) -> Result<QatSchedule, Failure> {
    let mut s = if a.full_schedule {
        QatSchedule::full()
    } else {
        QatSchedule::toy(a.iters.unwrap_or(2000))
    };
    if let Some(n) = a.iters {
        s.total_iters = n;
    }
    s.qat_start = a.qat_start.unwrap_or(s.qat_start);
    s.assign_every = a.assign_every.unwrap_or(s.assign_every);
    s.assign_until = a.assign_until.unwrap_or(s.assign_until);
    s.reg_lambda = a.reg_lambda.unwrap_or(s.reg_lambda);
    s.reg_start = a.reg_start.unwrap_or(s.reg_start);
    s.reg_end = a.reg_end.unwrap_or(s.reg_end);
    s.prune_every = a.prune_every.unwrap_or(s.prune_every);
    s.min_opacity = a.min_opacity.unwrap_or(s.min_opacity);
    if a.no_qat {
        s.qat_start = 1.0;
        s.assign_until = 1.0;
    }
    s.validate().map_err(|e| Failure::invalid(e.into()))?;
    Ok(s)
}

pub fn train2d(g: &Global, a: &Train2dArgs) -> Result<(), Failure> {
    let target = match (&a.target, a.synthetic) {
        (Some(path), _) => read_image(path)?,
        (None, Some(n)) => {
            let scale = (a.width.min(a.height) as f64 / 10.0).max(1.5);
            render(
                &Scene2D::random(n, a.width, a.height, 1.0, scale, g.seed),
                a.width,
                a.height,
            )
        }
        (None, None) => unreachable!("clap requires a target source"),
    };
    if let Some(path) = &a.save_target {
        write(path, &target.to_png_bytes())?;
    }
    let (w, h) = (target.width, target.height);
    let defaults = LearningRates::default();
    let config = TrainConfig {
        schedule: schedule(a)?,
        vq: Vq2dConfig {
            k_color: a.k_color,
            k_scale: a.k_scale,
            k_angle: a.k_angle,
            init: Init::KMeansPlusPlus,
            seed: g.seed,
            lloyd_iters: a.lloyd_iters,
        },
        lr: LearningRates {
            position: a.lr_position.unwrap_or(defaults.position),
            log_scale: a.lr_scale.unwrap_or(defaults.log_scale),
            angle: a.lr_angle.unwrap_or(defaults.angle),
            logit_opacity: a.lr_opacity.unwrap_or(defaults.logit_opacity),
            color: a.lr_color.unwrap_or(defaults.color),
        },
        optimizer: match a.optimizer {
            OptimizerArg::Adam => Optimizer::default(),
            OptimizerArg::Sgd => Optimizer::Sgd,
        },
        trace_every: a.trace_every,
    };
    let init = Scene2D::grid_init(a.gaussians, w, h, g.seed);
    let result = train(&[target], init, &config).or_exit(EXIT_INVALID, "training")?;
    let scene = result.rendered_scene();
    let mut ckpt = Vec::new();
    write_scene(&scene, &mut ckpt).or_exit(EXIT_IO, "serializing scene")?;
    write(&a.output, &ckpt)?;
    if let Some(path) = &a.trace {
        let mut csv = Vec::new();
        write_trace_csv(&result.trace, &mut csv).or_exit(EXIT_IO, "serializing trace")?;
        write(path, &csv)?;
    }
    if let Some(path) = &a.render {
        write(path, &render(&scene, w, h).to_png_bytes())?;
    }
    let json = json!({
        "iterations": config.schedule.total_iters,
        "initial_count": a.gaussians,
        "count": scene.len(),
        "quantized": result.codebooks.is_some(),
        "final_psnr": result.final_psnr,
    });
    emit(g, json, || {
        format!(
            "{} iterations: {} -> {} Gaussians, PSNR {:.2} dB{}\n",
            config.schedule.total_iters,
            a.gaussians,
            scene.len(),
            result.final_psnr,
            if result.codebooks.is_some() {
                " (quantized)"
            } else {
                ""
            }
        )
    });
    Ok(())
}

pub fn assign(
    g: &Global,
    input: &Path,
    frozen: &Path,
    output: &Path,
    a: &EncodeArgs,
) -> Result<(), Failure> {
    let (cloud, file_bytes) = read_cloud(input)?;
    let frozen_bytes = read(frozen)?;
    let books = decode(&frozen_bytes)
        .or_exit(EXIT_MALFORMED, format!("decoding {}", frozen.display()))?
        .codebooks;
    let quantized = assign_frozen(&cloud, &books)
        .or_exit(EXIT_INVALID, "assigning against frozen codebooks")?;
    let options = encode_options(a, quantized.codebooks.sh.is_none())?;
    let out = encode(&cloud, &quantized.codebooks, &options).or_exit(EXIT_INVALID, "encoding")?;
    write(output, &out)?;
    let report = container_size_report(&out, IndexAccounting::Packed)
        .or_exit(EXIT_INVALID, "size report")?;
    let (json, text) = size_summary(cloud.len() * BYTES_PER_VERTEX, file_bytes, &out, &report);
    emit(g, json, || text);
    Ok(())
}
