use std::sync::Arc;

use cellfacet::fixtures::{
    generic_params, scene_from_mesh, two_hex_contact_mesh, TWO_HEX_CONTACT_RADIUS,
};
use cellfacet::mesh::CellType;
use cellfacet::model::{GeoAgg, Model, ModelConfig, Topology};
use cellfacet::simulate::Trajectory;
use cellfacet::training::{fit_normalizers, gradient_check, make_sample, Dataset};

fn small(cell_type: CellType) -> ModelConfig {
    ModelConfig {
        latent: 8,
        layers: 2,
        hidden: vec![8],
        cell_type,
        contact_radius: TWO_HEX_CONTACT_RADIUS,
        world_radius: TWO_HEX_CONTACT_RADIUS,
        ..ModelConfig::desk()
    }
}

fn check(config: ModelConfig, seed: u64) -> f64 {
    let scene = scene_from_mesh(two_hex_contact_mesh(), 1, seed);
    let topo = Arc::new(Topology::new(&scene.mesh).unwrap());
    let norms = scene.normalizers(&topo, &config).unwrap();
    let sample = scene.sample(topo, &norms, &config).unwrap();
    let model = Model::new(config).unwrap();
    let params = generic_params(&model, seed);
    let report = gradient_check(&model, &params, &sample, 1e-5).unwrap();
    assert_eq!(report.checked, params.num_scalars());
    report.max_rel_error
}

#[test]
fn two_hex_scene_gradients_over_seeds() {
    for seed in 0..6 {
        let err = check(small(CellType::Hex), seed);
        assert!(err < 1e-4, "seed {seed}: {err:e}");
    }
}

#[test]
fn ablation_gradients() {
    let uniform = ModelConfig {
        geo_agg: GeoAgg::Uniform,
        ..small(CellType::Hex)
    };
    assert!(check(uniform, 3) < 1e-4);
    let nodes = ModelConfig {
        explicit_elements: false,
        ..small(CellType::Hex)
    };
    assert!(check(nodes, 4) < 1e-4);
}

#[test]
fn training_path_sample_gradients() {
    // Normalizers fitted on a dataset, previous frame from history.
    let scene = scene_from_mesh(two_hex_contact_mesh(), 1, 9);
    let traj = Trajectory {
        mesh: scene.mesh.clone(),
        frames: vec![
            cellfacet::simulate::Frame {
                x: scene.prev.clone(),
                q: scene.quantities.clone(),
            },
            cellfacet::simulate::Frame {
                x: scene.cur.clone(),
                q: scene.quantities.clone(),
            },
            cellfacet::simulate::Frame {
                x: scene.next.clone(),
                q: scene.next_quantities.clone(),
            },
        ],
        scripts: (0..scene.mesh.num_vertices())
            .filter(|&v| scene.mesh.node_type[v].is_kinematic())
            .map(|v| (v, vec![scene.prev[v], scene.cur[v], scene.next[v]]))
            .collect(),
    };
    let config = small(CellType::Hex);
    let dataset = Dataset::new(vec![traj]).unwrap();
    let norms = fit_normalizers(&dataset, &config).unwrap();
    let sample = make_sample(&dataset, (0, 1), &norms, &config, None).unwrap();
    let model = Model::new(config).unwrap();
    let params = generic_params(&model, 9);
    let report = gradient_check(&model, &params, &sample, 1e-5).unwrap();
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}
