use super::*;
use crate::mesh::NodeType;
use crate::simulate::rollout;

fn small() -> OracleConfig {
    OracleConfig {
        beam_cells: [6, 1, 1],
        support_cells: [1, 1, 1],
        press_cells: [1, 1, 1],
        frames: 12,
        descent: [0.04, 0.06],
        offset: [-0.1, 0.1],
        ..OracleConfig::default()
    }
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cellfacet-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn zero_descent_is_static() {
    let traj = simulate_press(
        &small(),
        PressPath {
            descent: 0.0,
            offset: 0.0,
        },
    )
    .unwrap();
    for f in &traj.frames {
        assert_eq!(f.x, traj.frames[0].x);
        assert_eq!(f.q, traj.frames[0].q);
    }
    assert!(traj.frames[0].q.iter().all(|q| q == &[0.0]));
}

#[test]
fn press_bends_the_beam() {
    let config = small();
    let traj = simulate_press(
        &config,
        PressPath {
            descent: 0.06,
            offset: 0.0,
        },
    )
    .unwrap();
    let last = traj.frames.last().unwrap();
    let mesh = &traj.mesh;
    let sag = (0..mesh.num_vertices())
        .filter(|&v| mesh.node_type[v] == NodeType::Normal)
        .map(|v| mesh.vertices[v][2] - last.x[v][2])
        .fold(0.0, f64::max);
    assert!(sag > 0.01, "sag {sag}");
    assert!(sag < 0.06, "sag {sag}");
    assert!(last.q.iter().any(|q| q[0] > 0.0));
}

#[test]
fn undamped_energy_is_conserved() {
    let material = Material {
        damping: 0.0,
        contact_stiffness: 0.0,
        ..Material::default()
    };
    let config = OracleConfig {
        material,
        ..small()
    };
    let mesh = config.scene(0.0);
    let mut state = MassSpring::new(&mesh, config.material.clone()).unwrap();
    // Kick the beam with a smooth velocity field.
    for v in 0..mesh.num_vertices() {
        if mesh.node_type[v] == NodeType::Normal {
            let x = mesh.vertices[v][0];
            state.v[v] = [0.0, 0.02 * x.sin(), 0.05 * (3.0 * x).cos()];
        }
    }
    let e0 = state.kinetic_energy() + state.elastic_energy();
    let targets = vec![None; mesh.num_vertices()];
    let mut worst: f64 = 0.0;
    for _ in 0..config.frames {
        state.advance(&targets).unwrap();
        let e = state.kinetic_energy() + state.elastic_energy();
        worst = worst.max((e - e0).abs() / e0);
    }
    assert!(worst < 0.01, "energy drift {worst}");
}

#[test]
fn oracle_substitution_reproduces_trajectory() {
    let config = small();
    let traj = simulate_press(
        &config,
        PressPath {
            descent: 0.05,
            offset: 0.05,
        },
    )
    .unwrap();
    let mut oracle = oracle_stepper(&config, &traj).unwrap();
    let frames = rollout(&mut oracle, &traj, traj.num_frames() - 1).unwrap();
    for (a, b) in frames.iter().zip(&traj.frames) {
        for (p, q) in a.x.iter().zip(&b.x) {
            for k in 0..3 {
                assert!((p[k] - q[k]).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn blow_up_is_reported() {
    let material = Material {
        substeps: 1,
        k_edge: 4000.0,
        ..Material::default()
    };
    let config = OracleConfig {
        material,
        ..small()
    };
    let err = simulate_press(
        &config,
        PressPath {
            descent: 0.06,
            offset: 0.0,
        },
    )
    .unwrap_err();
    assert!(matches!(err, Error::Unstable { .. }), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn dataset_is_deterministic() {
    let config = small();
    let (a, b) = (temp_dir("gen-a"), temp_dir("gen-b"));
    let ma = generate_dataset(&config, [2, 1, 1], 7, &a).unwrap();
    let mb = generate_dataset(&config, [2, 1, 1], 7, &b).unwrap();
    assert_eq!(ma, mb);
    assert_eq!(ma.trajectories.len(), 4);
    for e in &ma.trajectories {
        assert_eq!(
            std::fs::read(a.join(&e.path)).unwrap(),
            std::fs::read(b.join(&e.path)).unwrap()
        );
    }
    assert_eq!(
        std::fs::read(a.join(MANIFEST_FILE)).unwrap(),
        std::fs::read(b.join(MANIFEST_FILE)).unwrap()
    );
    let params: std::collections::BTreeSet<_> = ma
        .trajectories
        .iter()
        .map(|e| e.path_params.descent.to_bits())
        .collect();
    assert_eq!(params.len(), 4);

    let (loaded, base) = DatasetManifest::load(&a.join(MANIFEST_FILE)).unwrap();
    assert_eq!(loaded, ma);
    assert_eq!(loaded.paths(&base, Split::Train).len(), 2);
    let traj = load_trajectory(&loaded.paths(&base, Split::Test)[0]).unwrap();
    assert_eq!(traj.num_frames(), config.frames);

    std::fs::remove_file(a.join(&ma.trajectories[0].path)).unwrap();
    assert!(matches!(
        DatasetManifest::load(&a.join(MANIFEST_FILE)),
        Err(Error::Data(_))
    ));
    let _ = std::fs::remove_dir_all(&a);
    let _ = std::fs::remove_dir_all(&b);
}

#[test]
fn mesh_round_trip_and_schema_errors() {
    let dir = temp_dir("mesh");
    let mesh = small().scene(0.013);
    let path = dir.join("m.json");
    save_mesh(&path, &mesh).unwrap();
    assert_eq!(load_mesh(&path).unwrap(), mesh);

    std::fs::write(
        &path,
        r#"{"cell_type":"hex","vertices":[[0,0,0]],"node_type":[0],"body_id":[0]}"#,
    )
    .unwrap();
    let err = load_mesh(&path).unwrap_err().to_string();
    assert!(err.contains("cells"), "{err}");
    assert!(err.contains("m.json"), "{err}");

    std::fs::write(
        &path,
        r#"{"cell_type":"hex","vertices":[[0,0,0],[1,0,0],[0,1,0],[0,0,1]],"cells":[[0,1,2,3]],"node_type":[0,0,0,0],"body_id":[0,0,0,0]}"#,
    )
    .unwrap();
    let err = load_mesh(&path).unwrap_err();
    assert!(err.to_string().contains("arity"), "{err}");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn trajectory_round_trip_is_lossless() {
    let dir = temp_dir("traj");
    let traj = simulate_press(
        &small(),
        PressPath {
            descent: 0.045,
            offset: -0.03,
        },
    )
    .unwrap();
    let path = dir.join("t.json");
    save_trajectory(&path, &traj).unwrap();
    let back = load_trajectory(&path).unwrap();
    assert_eq!(back, traj);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn split_names() {
    assert_eq!("valid".parse::<Split>().unwrap(), Split::Valid);
    assert!("dev".parse::<Split>().is_err());
}
