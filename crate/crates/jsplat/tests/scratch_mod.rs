use jsplat::kernels::{KernelKind, RadialKernel};
use jsplat::spectral::*;

#[test]
fn explore_modulation_margins() {
    for weighting in [Weighting::Amplitude, Weighting::AmplitudeSquared] {
        let base = RadialKernel::new(KernelKind::Gaussian, 1.0).unwrap();
        let base_fwhm = base.fwhm().unwrap();
        let bsp = energy_radius_95(&base, Domain::Spatial, weighting).unwrap() / base_fwhm;
        let bfr = energy_radius_95(&base, Domain::Frequency, weighting).unwrap() * base_fwhm;
        println!("== {:?}: base unit-fwhm spatial {:.5} freq {:.5}", weighting, bsp, bfr);
        for omega in [0.35, 0.45, 0.5, 0.55, 0.65, 0.8] {
            let m = RadialKernel::new(KernelKind::modulated_gaussian(omega), 1.0).unwrap();
            let fw = m.fwhm().unwrap();
            let msp = energy_radius_95(&m, Domain::Spatial, weighting).unwrap() / fw;
            let mfr = energy_radius_95(&m, Domain::Frequency, weighting).unwrap() * fw;
            println!(
                "  omega {:.2}: fwhm {:.4}  spatial {:.5} (ratio {:+.3}%)  freq {:.5} (margin {:+.3}%)",
                omega, fw, msp, (msp / bsp - 1.0) * 100.0, mfr, (mfr / bfr - 1.0) * 100.0
            );
        }
    }
}
