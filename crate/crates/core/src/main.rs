use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use cellfacet::contact::detect_contacts;
use cellfacet::dataio::{self, generate_dataset, DatasetManifest, OracleConfig, Split};
use cellfacet::fixtures::{generic_params, scene_from_mesh};
use cellfacet::fsutil::{read_json, write_atomic, write_json};
use cellfacet::mesh::{extract_facets, Mesh};
use cellfacet::model::{GeoAgg, GeoFeats, Model, ModelConfig, Topology};
use cellfacet::simulate::{evaluate, rollout, EvalReport, Learned, Persistence, Trajectory};
use cellfacet::training::{
    fit_normalizers, gradient_check, load_checkpoint, loss_csv, save_checkpoint, train,
    CheckpointMeta, Dataset, TrainingConfig,
};
use cellfacet::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cellfacet",
    version,
    about = "Cell-facet message passing for solid deformation on tet/hex meshes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate press-on-beam trajectories with the mass-spring oracle.
    GenData {
        /// Output directory; receives one JSON file per trajectory, beam.json and manifest.json.
        #[arg(long)]
        out: PathBuf,
        /// Oracle configuration JSON; missing fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        train: usize,
        #[arg(long, default_value_t = 0)]
        valid: usize,
        #[arg(long, default_value_t = 5)]
        test: usize,
        /// Output frames per trajectory (overrides the config).
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print vertex, cell and facet counts of a mesh or trajectory file.
    InspectMesh { path: PathBuf },
    /// List facet contact pairs as CSV.
    Contacts {
        /// Mesh or trajectory file.
        path: PathBuf,
        #[arg(long)]
        radius: f64,
        /// Frame of a trajectory file to use.
        #[arg(long, default_value_t = 0)]
        frame: usize,
        /// Allow pairs between non-adjacent facets of one body.
        #[arg(long)]
        self_contact: bool,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model on one-step transitions.
    Train {
        /// Dataset manifest (train split is used) or a single trajectory file.
        #[arg(long)]
        data: PathBuf,
        /// Output directory for losses.csv and checkpoints.
        #[arg(long)]
        out: PathBuf,
        /// Model preset: desk, large-128 or large-96.
        #[arg(long, default_value = "desk")]
        preset: String,
        /// Model configuration JSON; overrides the preset.
        #[arg(long)]
        model_config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Ablation::Full)]
        ablation: Ablation,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr_start: Option<f64>,
        #[arg(long)]
        lr_end: Option<f64>,
        /// Position noise std on free vertices.
        #[arg(long)]
        noise_std: Option<f64>,
        #[arg(long)]
        noise_quantities: bool,
        #[arg(long)]
        checkpoint_every: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Roll a trained model out from the first frame of a trajectory.
    Rollout {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
        /// Predicted trajectory JSON.
        #[arg(long)]
        out: PathBuf,
        /// Number of steps; defaults to the full script length.
        #[arg(long)]
        steps: Option<usize>,
        /// Accepted for interface uniformity; rollouts are deterministic.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score full rollouts of a model and of the persistence baseline.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset manifest or a single trajectory file.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        /// JSON report with both error aggregates.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Per-frame RMSE table of the model.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Accepted for interface uniformity; evaluation is deterministic.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Finite-difference check of every parameter gradient on one frame.
    Gradcheck {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        #[arg(long, default_value_t = 8)]
        latent: usize,
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Ablation {
    /// Learned coefficients and geometric features.
    Full,
    /// Uniform aggregation coefficients.
    A,
    /// Geometric element features zeroed.
    B,
    /// Vertex-only message passing.
    C,
}

impl Ablation {
    fn apply(self, config: &mut ModelConfig) {
        match self {
            Ablation::Full => {}
            Ablation::A => config.geo_agg = GeoAgg::Uniform,
            Ablation::B => config.geo_feats = GeoFeats::Zero,
            Ablation::C => config.explicit_elements = false,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// A file holding a bare mesh, a whole trajectory, or a dataset manifest.
enum DataFile {
    Mesh(Mesh),
    Trajectory(Trajectory),
    Manifest(PathBuf),
}

impl DataFile {
    fn load(path: &Path) -> Result<Self> {
        let value: serde_json::Value = read_json(path)?;
        if value.get("mesh").is_some() {
            dataio::load_trajectory(path).map(DataFile::Trajectory)
        } else if value.get("trajectories").is_some() {
            Ok(DataFile::Manifest(path.to_path_buf()))
        } else {
            dataio::load_mesh(path).map(DataFile::Mesh)
        }
    }

    fn load_mesh(path: &Path) -> Result<(Mesh, Option<Trajectory>)> {
        match DataFile::load(path)? {
            DataFile::Mesh(m) => Ok((m, None)),
            DataFile::Trajectory(t) => Ok((t.mesh.clone(), Some(t))),
            DataFile::Manifest(_) => Err(Error::Data(format!(
                "{} is a dataset manifest, not a mesh",
                path.display()
            ))),
        }
    }
}

/// Named trajectories of a manifest split, or the single trajectory file.
fn load_trajectories(path: &Path, split: Split) -> Result<Vec<(String, Trajectory)>> {
    let manifest = match DataFile::load(path)? {
        DataFile::Trajectory(t) => return Ok(vec![(file_name(path), t)]),
        DataFile::Mesh(_) => {
            return Err(Error::Data(format!(
                "{} holds a mesh, not trajectories",
                path.display()
            )))
        }
        DataFile::Manifest(p) => p,
    };
    let (manifest, base) = DatasetManifest::load(&manifest)?;
    let paths = manifest.paths(&base, split);
    if paths.is_empty() {
        return Err(Error::Data(format!(
            "{} has no {split:?} trajectories",
            path.display()
        )));
    }
    paths
        .iter()
        .map(|p| Ok((file_name(p), dataio::load_trajectory(p)?)))
        .collect()
}

fn file_name(path: &Path) -> String {
    path.file_stem().map_or_else(
        || path.display().to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData {
            out,
            config,
            train,
            valid,
            test,
            frames,
            seed,
        } => {
            let mut config: OracleConfig = match config {
                Some(p) => read_json(&p)?,
                None => OracleConfig::default(),
            };
            if let Some(f) = frames {
                config.frames = f;
            }
            config.validate()?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let start = Instant::now();
            let manifest = generate_dataset(&config, [train, valid, test], seed, &out)?;
            dataio::save_mesh(&out.join("beam.json"), &config.scene(0.0))?;
            eprintln!(
                "{} trajectories of {} frames in {:.1} s",
                manifest.trajectories.len(),
                config.frames,
                start.elapsed().as_secs_f64()
            );
            println!("{}", out.join(dataio::MANIFEST_FILE).display());
        }
        Command::InspectMesh { path } => {
            let (mesh, traj) = DataFile::load_mesh(&path)?;
            let facets = extract_facets(&mesh)?;
            println!("cell_type {:?}", mesh.cell_type);
            println!("vertices {}", mesh.num_vertices());
            println!("cells {}", mesh.num_cells());
            println!("facets {}", facets.len());
            println!("boundary_facets {}", facets.num_boundary());
            if let Some(t) = &traj {
                println!("frames {}", t.num_frames());
                println!("quantities {}", t.quantities());
            }
        }
        Command::Contacts {
            path,
            radius,
            frame,
            self_contact,
            out,
        } => {
            let (mesh, traj) = DataFile::load_mesh(&path)?;
            let positions = match &traj {
                None => &mesh.vertices,
                Some(t) => {
                    &t.frames
                        .get(frame)
                        .ok_or_else(|| {
                            Error::Parameter(format!("frame {frame} of {}", t.num_frames()))
                        })?
                        .x
                }
            };
            let facets = extract_facets(&mesh)?;
            let pairs = detect_contacts(&mesh, &facets, positions, radius, self_contact)?;
            let mut csv = String::from("f_s,f_r,distance\n");
            for p in &pairs {
                csv.push_str(&format!("{},{},{:e}\n", p.sender, p.receiver, p.distance));
            }
            match out {
                Some(p) => write_atomic(&p, csv.as_bytes())?,
                None => print!("{csv}"),
            }
        }
        Command::Train {
            data,
            out,
            preset,
            model_config,
            ablation,
            steps,
            batch_size,
            lr_start,
            lr_end,
            noise_std,
            noise_quantities,
            checkpoint_every,
            seed,
        } => {
            let trajectories: Vec<Trajectory> = load_trajectories(&data, Split::Train)?
                .into_iter()
                .map(|(_, t)| t)
                .collect();
            let mut config = match model_config {
                Some(p) => read_json(&p)?,
                None => ModelConfig::preset(&preset)?,
            };
            ablation.apply(&mut config);
            config.quantities = trajectories[0].quantities();
            config.cell_type = trajectories[0].mesh.cell_type;
            let model = Model::new(config)?;
            let defaults = TrainingConfig::default();
            let tc = TrainingConfig {
                steps: steps.unwrap_or(defaults.steps),
                batch_size: batch_size.unwrap_or(defaults.batch_size),
                lr_start: lr_start.unwrap_or(defaults.lr_start),
                lr_end: lr_end.unwrap_or(defaults.lr_end),
                noise_std: noise_std.unwrap_or(defaults.noise_std),
                noise_quantities,
                seed: seed.wrapping_add(1),
                checkpoint_every: checkpoint_every.unwrap_or(defaults.checkpoint_every),
            };
            tc.validate()?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let dataset = Dataset::new(trajectories)?;
            let norms = fit_normalizers(&dataset, &model.config)?;
            let meta = CheckpointMeta {
                model: model.config.clone(),
                normalizers: norms.clone(),
                training: Some(tc.clone()),
            };
            let params = model.init_params(seed);
            eprintln!(
                "{} parameters, {} transitions, {} steps",
                params.num_scalars(),
                dataset.transitions().len(),
                tc.steps
            );
            let start = Instant::now();
            let result = train(&model, &dataset, &tc, params, norms, |step, p| {
                let path = if step == tc.steps {
                    out.join("checkpoint.bin")
                } else {
                    out.join(format!("checkpoint_{step}.bin"))
                };
                eprintln!("step {step}: {:.1} s", start.elapsed().as_secs_f64());
                save_checkpoint(&path, p, &meta)
            })?;
            write_atomic(&out.join("losses.csv"), loss_csv(&result.losses).as_bytes())?;
            if let Some(last) = result.losses.last() {
                println!("final loss {:e}", last.loss);
            }
        }
        Command::Rollout {
            checkpoint,
            trajectory,
            out,
            steps,
            seed: _,
        } => {
            let (model, params, meta) = load_checkpoint(&checkpoint)?;
            let traj = dataio::load_trajectory(&trajectory)?;
            let steps = steps.unwrap_or(traj.num_frames() - 1);
            let topo = Topology::new(&traj.mesh)?;
            let mut stepper = Learned {
                model: &model,
                params: &params,
                norms: &meta.normalizers,
                topo: &topo,
            };
            let start = Instant::now();
            let frames = rollout(&mut stepper, &traj, steps)?;
            let elapsed = start.elapsed().as_secs_f64();
            eprintln!(
                "{steps} steps in {elapsed:.2} s ({:.1} ms/step)",
                1e3 * elapsed / steps.max(1) as f64
            );
            let scripts = traj
                .scripts
                .iter()
                .map(|(&v, p)| (v, p[..=steps].to_vec()))
                .collect();
            let pred = Trajectory {
                mesh: traj.mesh.clone(),
                frames,
                scripts,
            };
            write_json(&out, &pred)?;
        }
        Command::Eval {
            checkpoint,
            data,
            split,
            json,
            csv,
            seed: _,
        } => {
            let (model, params, meta) = load_checkpoint(&checkpoint)?;
            let trajectories = load_trajectories(&data, split)?;
            let q = trajectories[0].1.quantities();
            let start = Instant::now();
            let learned = evaluate(&trajectories, |topo, traj| {
                let mut stepper = Learned {
                    model: &model,
                    params: &params,
                    norms: &meta.normalizers,
                    topo,
                };
                rollout(&mut stepper, traj, traj.num_frames() - 1)
            })?;
            eprintln!(
                "{} rollouts in {:.1} s",
                trajectories.len(),
                start.elapsed().as_secs_f64()
            );
            let baseline = evaluate(&trajectories, |topo, traj| {
                rollout(&mut Persistence::new(topo, q), traj, traj.num_frames() - 1)
            })?;
            for (name, report) in [("model", &learned), ("persistence", &baseline)] {
                for (quantity, e) in &report.error_full {
                    println!(
                        "{name} {quantity} error_50 {:e} error_all {:e}",
                        report.error_50[quantity], e
                    );
                }
            }
            if let Some(p) = json {
                #[derive(serde::Serialize)]
                struct Report<'a> {
                    model: &'a EvalReport,
                    persistence: &'a EvalReport,
                }
                write_json(
                    &p,
                    &Report {
                        model: &learned,
                        persistence: &baseline,
                    },
                )?;
            }
            if let Some(p) = csv {
                write_atomic(&p, learned.to_csv().as_bytes())?;
            }
        }
        Command::Gradcheck {
            mesh,
            h,
            latent,
            layers,
            radius,
            tolerance,
            seed,
        } => {
            let mesh = dataio::load_mesh(&mesh)?;
            let config = ModelConfig {
                latent,
                layers,
                hidden: vec![latent],
                quantities: 1,
                cell_type: mesh.cell_type,
                contact_radius: radius,
                world_radius: radius,
                ..ModelConfig::desk()
            };
            let model = Model::new(config)?;
            let scene = scene_from_mesh(mesh, 1, seed);
            let topo = Arc::new(Topology::new(&scene.mesh)?);
            let norms = scene.normalizers(&topo, &model.config)?;
            let sample = scene.sample(topo, &norms, &model.config)?;
            eprintln!("{} contact edges", sample.inputs.contact_receiver.len());
            let params = generic_params(&model, seed);
            let start = Instant::now();
            let report = gradient_check(&model, &params, &sample, h)?;
            eprintln!(
                "{} parameters in {:.1} s",
                report.checked,
                start.elapsed().as_secs_f64()
            );
            println!("max relative gradient error {:e}", report.max_rel_error);
            if let Some((name, i)) = &report.worst {
                println!("worst {name}[{i}]");
            }
            if !(report.max_rel_error <= tolerance) {
                return Err(Error::GradCheck(report.max_rel_error));
            }
        }
    }
    Ok(())
}
