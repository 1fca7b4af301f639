use jsplat::kernels::{KernelKind, RadialKernel};
use jsplat::spectral::*;
use std::f64::consts::PI;

#[test]
fn explore_fts() {
    // Gaussian 1D round trip
    let g = RadialKernel::new(KernelKind::Gaussian, 0.8).unwrap();
    let grid: Vec<f64> = (0..30).map(|i| i as f64 * 0.05).collect();
    let p = numerical_radial_ft(&g, 1, &grid).unwrap();
    let f0 = p.magnitudes[0];
    let mut worst = 0.0f64;
    for (f, m) in p.radii.iter().zip(p.magnitudes.iter()) {
        let analytic = g.eval_frequency(2.0 * PI * f).unwrap();
        worst = worst.max((m / f0 - analytic).abs());
    }
    println!("gaussian 1d worst abs dev: {worst:.3e}");

    // Exponential 1D
    let e = RadialKernel::new(KernelKind::Exponential, 1.0).unwrap();
    let p = numerical_radial_ft(&e, 1, &grid).unwrap();
    let f0 = p.magnitudes[0];
    let mut worst = 0.0f64;
    for (f, m) in p.radii.iter().zip(p.magnitudes.iter()) {
        let analytic = e.eval_frequency(2.0 * PI * f).unwrap();
        worst = worst.max((m / f0 - analytic).abs());
    }
    println!("exponential 1d worst abs dev: {worst:.3e}  F(0)={:.6} (expect 2)", p.magnitudes[0]);

    // StudentT 3D
    let t = RadialKernel::new(KernelKind::student_t(), 1.0).unwrap();
    let grid3: Vec<f64> = (1..40).map(|i| i as f64 * 0.02).collect();
    let p = numerical_radial_ft(&t, 3, &grid3).unwrap();
    let mut worst = 0.0f64;
    // DC normalize against analytic pi^2 (4π∫r²(1+r²)^{−2} = π²·… let's use ratio to eval_frequency with measured F(0))
    let p0v = numerical_radial_ft(&t, 3, &[0.0, 1.0]).unwrap().magnitudes[0];
    println!("studentT 3d F(0) = {:.8} (expect pi^2 = {:.8})", p0v, PI * PI);
    for (f, m) in p.radii.iter().zip(p.magnitudes.iter()) {
        let analytic = t.eval_frequency(2.0 * PI * f).unwrap();
        let rel = (m / p0v - analytic).abs() / analytic;
        worst = worst.max(rel);
    }
    println!("studentT 3d worst rel dev: {worst:.3e}");

    // Jinc 3D: passband flat at 1, zero above 1.5x cutoff (cutoff f = 1/(2πσ))
    let j = RadialKernel::new(KernelKind::Jinc, 1.0).unwrap();
    let fc = 1.0 / (2.0 * PI);
    let inband: Vec<f64> = (1..=8).map(|i| fc * 0.1 * i as f64).collect();
    let p = numerical_radial_ft(&j, 3, &inband).unwrap();
    // theoretical const inside passband: F = (2π)³/(4π/3·…) — for indicator amplitude A the spatial profile is A·3 j1(x)/x with A=1 ⇒ F should be 3·(2π²)·… just print
    let first = p.magnitudes[0];
    for (f, m) in p.radii.iter().zip(p.magnitudes.iter()) {
        println!("  jinc band f/fc={:.2}: F={:.8} ratio {:.6}", f / fc, m, m / first);
    }
    let out = numerical_radial_ft(&j, 3, &[1.5 * fc, 2.0 * fc]).unwrap();
    println!("  jinc out-of-band: {:+.3e} {:+.3e} (relative to band {:.3e})", out.magnitudes[0], out.magnitudes[1], out.magnitudes[0]/first);

    // Modulated gaussian 1D vs exact blend
    let m = RadialKernel::new(KernelKind::modulated_gaussian(0.4), 1.0).unwrap();
    let p = numerical_radial_ft(&m, 1, &grid).unwrap();
    let f0v = p.magnitudes[0];
    let dc = m.eval_frequency(0.0).unwrap();
    let mut worst = 0.0f64;
    for (f, mm) in p.radii.iter().zip(p.magnitudes.iter()) {
        let analytic = m.eval_frequency(2.0 * PI * f).unwrap() / dc;
        let rel = (mm / f0v - analytic).abs() / analytic.abs().max(1e-3);
        worst = worst.max(rel);
    }
    println!("mod-gaussian 1d worst rel dev: {worst:.3e}");

    // decay fits
    for kind in [KernelKind::Gaussian, KernelKind::student_t(), KernelKind::Jinc, KernelKind::Exponential] {
        let k = RadialKernel::new(kind, 1.0).unwrap();
        let d = decay_fit(&k).unwrap();
        println!("decay {:12}: quadratic R2 {:.6}, envelope slope {:+.4}", kind.name(), d.quadratic_log_r2, d.envelope_slope);
    }
}
