use jsplat::fit::{make_synthetic_scene};
use jsplat::raster::*;

#[test]
fn explore_artifact_metric() {
    let (gauss_scene, cams) = make_synthetic_scene(1234, 60, SplatKind::Gaussian, 64, 64);
    let jinc_scene: Vec<Primitive> = gauss_scene.iter().map(|p| { let mut q = *p; q.kind = SplatKind::Jinc; q }).collect();
    for mode in [NegativeLobes::Clamp, NegativeLobes::Signed] {
        let cfg_g = RenderConfig { negative_lobes: mode, ..RenderConfig::default() };
        let cfg_j5 = RenderConfig { alpha_cutoff_q: 5.0, negative_lobes: mode, ..RenderConfig::default() };
        let cfg_j30 = RenderConfig { negative_lobes: mode, ..RenderConfig::default() };
        let mut mg = 0.0; let mut mj5 = 0.0; let mut mj30 = 0.0;
        for cam in &cams[..4] {
            mg += tile_artifact_metric(&render(&gauss_scene, cam, &cfg_g), 16) / 4.0;
            mj5 += tile_artifact_metric(&render(&jinc_scene, cam, &cfg_j5), 16) / 4.0;
            mj30 += tile_artifact_metric(&render(&jinc_scene, cam, &cfg_j30), 16) / 4.0;
        }
        println!("{:?}: gaussian(3sigma) {:+.6e}  jinc(q=5) {:+.6e}  jinc(q=30) {:+.6e}", mode, mg, mj5, mj30);
    }
}
