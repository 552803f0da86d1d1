use std::path::{Path, PathBuf};
use std::time::Instant;

use pgru_core::config::{Configurable, SynthConfig, UnmixConfig};
use pgru_core::eval::{metrics_csv, parse_methods, run_eval};
use pgru_core::features::{compute_features, compute_prior, FEATURE_NAMES};
use pgru_core::io::{
    find_raw_path, read_endmembers_csv, read_envi_cube, write_endmembers_csv, write_envi_cube,
    write_map, write_table_csv, MapFormat,
};
use pgru_core::manifest::{InputDigest, RunManifest};
use pgru_core::models::MECHANISM_NAMES;
use pgru_core::regime::{predict, prepare_scene, train_scene, Variant};
use pgru_core::synth::generate_scene;
use pgru_core::{Cube, EndmemberSet, Error, MapF64, Result};
use sha2::{Digest, Sha256};

use crate::args::{EvalArgs, FeaturesArgs, Format, InputArgs, SynthArgs, UnmixArgs};

const MANIFEST: &str = "manifest.txt";

fn digest(role: &str, path: &Path) -> Result<InputDigest> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(InputDigest {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn timestamp() -> Option<String> {
    std::env::var("SOURCE_DATE_EPOCH").ok()
}

/// Writes `map` as `<stem>.csv` and/or `<stem>.pgm`, recording file names.
fn write_named(
    dir: &Path,
    stem: &str,
    map: &MapF64,
    format: Format,
    outputs: &mut Vec<String>,
) -> Result<()> {
    let formats: &[MapFormat] = match format {
        Format::Csv => &[MapFormat::Csv],
        Format::Pgm => &[MapFormat::Pgm],
        Format::Both => &[MapFormat::Csv, MapFormat::Pgm],
    };
    for &f in formats {
        let name = format!("{stem}.{}", f.extension());
        write_map(map, dir.join(&name), f)?;
        outputs.push(name);
    }
    Ok(())
}

struct Inputs {
    cube: Cube,
    endmembers: EndmemberSet,
    digests: Vec<InputDigest>,
}

fn cube_digests(header: &Path) -> Result<Vec<InputDigest>> {
    Ok(vec![
        digest("cube_header", header)?,
        digest("cube_data", &find_raw_path(header)?)?,
    ])
}

fn load_inputs(args: &InputArgs) -> Result<Inputs> {
    let (cube_path, em_path): (PathBuf, PathBuf) = match (&args.scene, &args.cube, &args.endmembers)
    {
        (Some(dir), None, None) => (dir.join("scene.hdr"), dir.join("endmembers.csv")),
        (None, Some(c), Some(e)) => (c.clone(), e.clone()),
        _ => {
            return Err(Error::Config(
                "give either --scene DIR or both --cube and --endmembers".into(),
            ))
        }
    };
    let cube = read_envi_cube(&cube_path)?;
    let endmembers = read_endmembers_csv(&em_path)?;
    let mut digests = cube_digests(&cube_path)?;
    digests.push(digest("endmembers", &em_path)?);
    Ok(Inputs {
        cube,
        endmembers,
        digests,
    })
}

fn overrides(parts: &[Vec<(String, String)>]) -> Vec<(String, String)> {
    parts.concat()
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig::resolve(args.config.as_deref(), &args.overrides())?;
    let scene = generate_scene(&cfg.spec)?;
    create_dir(&args.out)?;
    let mut manifest = RunManifest::new("synth", cfg.entries());
    manifest.timestamp = timestamp();

    write_envi_cube(&scene.cube, args.out.join("scene.hdr"))?;
    write_endmembers_csv(&scene.endmembers, args.out.join("endmembers.csv"))?;
    let (rows, cols) = (scene.cube.rows(), scene.cube.cols());
    let labels = MapF64::new(
        rows,
        cols,
        scene.labels.iter().map(|&l| f64::from(l)).collect(),
    )?;
    write_map(&labels, args.out.join("labels.pgm"), MapFormat::Pgm)?;

    let m = scene.endmembers.count();
    let mut header = vec!["row", "col"];
    header.extend(scene.endmembers.names().iter().map(String::as_str));
    let table: Vec<Vec<String>> = (0..rows * cols)
        .map(|p| {
            let mut row = vec![(p / cols).to_string(), (p % cols).to_string()];
            row.extend(
                scene.abundances[p * m..(p + 1) * m]
                    .iter()
                    .map(|v| v.to_string()),
            );
            row
        })
        .collect();
    write_table_csv(args.out.join("abundances.csv"), &header, &table)?;

    manifest.outputs = [
        "scene.hdr",
        "scene.img",
        "endmembers.csv",
        "labels.pgm",
        "abundances.csv",
    ]
    .map(String::from)
    .to_vec();
    manifest.write(&args.out.join(MANIFEST))
}

pub fn features(args: &FeaturesArgs) -> Result<()> {
    let cfg = UnmixConfig::resolve(args.config.as_deref(), &args.features.overrides())?;
    let cube = read_envi_cube(&args.cube)?;
    let raw = compute_features(&cube, &cfg.features)?;
    let prior = compute_prior(&raw);
    create_dir(&args.out)?;
    let mut manifest = RunManifest::new("features", cfg.entries());
    manifest.timestamp = timestamp();
    manifest.inputs = cube_digests(&args.cube)?;
    for (k, name) in FEATURE_NAMES.iter().enumerate() {
        write_named(
            &args.out,
            name,
            &raw.plane_map(k),
            args.format,
            &mut manifest.outputs,
        )?;
    }
    write_named(
        &args.out,
        "prior",
        prior.map(),
        args.format,
        &mut manifest.outputs,
    )?;
    manifest.write(&args.out.join(MANIFEST))
}

pub fn unmix(args: &UnmixArgs) -> Result<()> {
    let cfg = UnmixConfig::resolve(
        args.config.as_deref(),
        &overrides(&[args.features.overrides(), args.train.overrides()]),
    )?;
    let inputs = load_inputs(&args.input)?;
    let start = Instant::now();
    let state = prepare_scene(&inputs.cube, &inputs.endmembers, &cfg.scene())?;
    let model = train_scene(&state, &cfg.train, Variant::LEARNED)?;
    let result = predict(&state, &model.params, &model.variant);
    eprintln!(
        "trained {} epochs in {:.2?}",
        cfg.train.epochs,
        start.elapsed()
    );

    create_dir(&args.out)?;
    let mut manifest = RunManifest::new("unmix", cfg.entries());
    manifest.timestamp = timestamp();
    manifest.inputs = inputs.digests;
    let out = &args.out;
    let files = &mut manifest.outputs;
    write_named(out, "xi", &result.xi, args.format, files)?;
    for (k, name) in MECHANISM_NAMES.iter().enumerate() {
        write_named(
            out,
            &format!("alpha_{name}"),
            &result.alpha[k],
            args.format,
            files,
        )?;
    }
    write_named(out, "delta_res", &result.delta_res, args.format, files)?;
    write_named(
        out,
        "dominant_feature",
        &result.dominant_feature_map(),
        args.format,
        files,
    )?;
    for m in 0..result.abundances.endmembers() {
        write_named(
            out,
            &format!("abundance_{m}"),
            &result.abundances.plane(m),
            args.format,
            files,
        )?;
    }

    let trace: Vec<Vec<String>> = model
        .loss_trace
        .iter()
        .enumerate()
        .map(|(e, l)| vec![e.to_string(), l.to_string()])
        .collect();
    write_table_csv(out.join("loss_trace.csv"), &["epoch", "loss"], &trace)?;
    files.push("loss_trace.csv".into());

    let regime = &model.params.regime;
    let mut weights: Vec<Vec<String>> = FEATURE_NAMES
        .iter()
        .zip(regime.w)
        .map(|(n, w)| vec![n.to_string(), w.to_string()])
        .collect();
    weights.push(vec!["offset".into(), regime.b.to_string()]);
    write_table_csv(out.join("weights.csv"), &["feature", "weight"], &weights)?;
    files.push("weights.csv".into());

    manifest.write(&out.join(MANIFEST))
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let cfg = UnmixConfig::resolve(
        args.config.as_deref(),
        &overrides(&[args.features.overrides(), args.train.overrides()]),
    )?;
    let methods = parse_methods(&args.methods)?;
    let inputs = load_inputs(&args.input)?;
    let state = prepare_scene(&inputs.cube, &inputs.endmembers, &cfg.scene())?;
    let results = run_eval(&state, &cfg.train, &methods)?;

    create_dir(&args.out)?;
    let path = args.out.join("metrics.csv");
    std::fs::write(&path, metrics_csv(&results)).map_err(|e| Error::Io { path, source: e })?;
    let mut entries = cfg.entries();
    let names: Vec<&str> = methods.iter().map(|m| m.name()).collect();
    entries.push(("methods", names.join(",")));
    let mut manifest = RunManifest::new("eval", entries);
    manifest.timestamp = timestamp();
    manifest.inputs = inputs.digests;
    manifest.outputs.push("metrics.csv".into());
    manifest.write(&args.out.join(MANIFEST))
}
