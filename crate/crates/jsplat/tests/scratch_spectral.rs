//! Temporary exploration of energy radii (deleted before finalizing).
use jsplat::kernels::KernelKind;
use jsplat::spectral::*;

#[test]
fn explore_energy_values() {
    for weighting in [Weighting::Amplitude, Weighting::AmplitudeSquared] {
        println!("== {:?}", weighting);
        for kind in [
            KernelKind::Gaussian,
            KernelKind::student_t(),
            KernelKind::Jinc,
            KernelKind::Exponential,
            KernelKind::modulated_gaussian(0.5),
            KernelKind::modulated_student_t(0.5),
        ] {
            let k = jsplat::kernels::RadialKernel::new(kind, 1.0).unwrap();
            let sp = energy_radius_95(&k, Domain::Spatial, weighting);
            let fr = energy_radius_95(&k, Domain::Frequency, weighting);
            println!("  {:24} spatial {:?}  freq {:?}", kind.name(), sp.map(|v| format!("{v:.5}")).map_err(|e| e.to_string()), fr.map(|v| format!("{v:.5}")).map_err(|e| e.to_string()));
        }
    }
    let cal = calibrate_convention();
    for (i, c) in cal.candidates.iter().enumerate() {
        println!(
        "cand {}{} {:18}{:14} sp [{:9.4} {:9.4} {:9.4}] fr [{:8.4} {:8.4} {:8.4}] dev {:9.3} ord(sp {} fr {}) anchor {}",
            i, if i == cal.chosen {"*"} else {" "},
            c.weighting.name(), c.scale_norm.name(),
            c.values[0][0], c.values[0][1], c.values[0][2],
            c.values[1][0], c.values[1][1], c.values[1][2],
            c.max_rel_dev, c.spatial_ordering_holds, c.frequency_ordering_holds, c.gaussian_anchor_ok);
    }
}
