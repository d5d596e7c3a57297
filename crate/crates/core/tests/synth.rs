mod oracles;

use ppgstress::signal::{
    check_separable, segment_windows, synth_ppg, Class, PpgRecord, SynthParams,
};
use proptest::prelude::*;

#[test]
fn peak_rate_lies_in_band() {
    for (class, (lo, hi)) in [(Class::NonStress, (1.0, 1.3)), (Class::Stress, (1.6, 2.0))] {
        for seed in 0..5 {
            let p = SynthParams::preset(class, 60.0, seed).noiseless();
            let r = synth_ppg(&p).unwrap();
            let rate = oracles::crossing_rate_hz(&r.samples, 64.0);
            assert!(rate >= lo && rate <= hi, "{class:?} seed {seed}: {rate}");
        }
    }
}

#[test]
fn spectra_separate_by_class() {
    let band_power = |x: &[f64], (lo, hi): (f64, f64)| {
        let mut f = lo;
        let mut s = 0.0;
        while f <= hi {
            s += oracles::dft_power(x, 64.0, f);
            f += 0.02;
        }
        s
    };
    for seed in 0..3 {
        let ns = synth_ppg(&SynthParams::preset(Class::NonStress, 60.0, seed)).unwrap();
        let st = synth_ppg(&SynthParams::preset(Class::Stress, 60.0, seed)).unwrap();
        assert!(band_power(&ns.samples, (1.0, 1.3)) > band_power(&ns.samples, (1.6, 2.0)));
        assert!(band_power(&st.samples, (1.6, 2.0)) > band_power(&st.samples, (1.0, 1.3)));
    }
}

#[test]
fn overlapping_bands_rejected() {
    let a = SynthParams::preset(Class::NonStress, 60.0, 0);
    let mut b = SynthParams::preset(Class::Stress, 60.0, 0);
    assert!(check_separable(&a, &b).is_ok());
    b.hr_band_hz = (1.2, 2.0);
    assert!(check_separable(&a, &b).is_err());
}

#[test]
fn same_seed_same_bits() {
    let p = SynthParams::preset(Class::Stress, 20.0, 42);
    assert_eq!(synth_ppg(&p).unwrap(), synth_ppg(&p).unwrap());
}

proptest! {
    #[test]
    fn window_count(n in 1usize..3000, w in 1usize..400, s in 1usize..200) {
        let r = PpgRecord::new(vec![0.0; n], 64.0, None).unwrap();
        let got = segment_windows(&r, w as f64 / 64.0, s as f64 / 64.0);
        if n < w {
            prop_assert!(got.is_err());
        } else {
            let windows = got.unwrap();
            prop_assert_eq!(windows.len(), (n - w) / s + 1);
            for (k, win) in windows.iter().enumerate() {
                prop_assert_eq!(win.start_index, k * s);
                prop_assert_eq!(win.samples.len(), w);
            }
        }
    }
}
