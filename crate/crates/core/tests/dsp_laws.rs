use pronunciation_core::exaggeration::{
    apply_plan, estimate_f0, scale_energy, shift_pitch, stretch_duration, ExaggerationPlan,
};
use pronunciation_core::synth::{self, SynthOptions};
use pronunciation_core::{AudioBuffer, PhonemeClassTable, PhonemeSegment, RatioTriple};

const RATE: u32 = 16_000;
const HOP_SAMPLES: usize = 160;

fn vowel(f0: f64, ms: f64) -> AudioBuffer {
    AudioBuffer::from_f64(&synth::pulse_train_vowel(f0, ms, 0.5, RATE), RATE).unwrap()
}

fn mean_f0(a: &AudioBuffer) -> f64 {
    estimate_f0(a)
        .unwrap()
        .mean_voiced()
        .expect("voiced material")
}

#[test]
fn duration_law() {
    let input = vowel(120.0, 200.0);
    let f0_in = mean_f0(&input);
    for ratio in [0.5, 0.8, 1.0, 1.26, 1.5, 2.0, 3.0] {
        let out = stretch_duration(&input, ratio).unwrap();
        let expected = input.len() as f64 * ratio;
        assert!(
            (out.len() as f64 - expected).abs() <= HOP_SAMPLES as f64,
            "ratio {ratio}"
        );
        let drift = (mean_f0(&out) / f0_in - 1.0).abs();
        eprintln!("stretch {ratio}: f0 drift {:.4}", drift);
        assert!(drift <= 0.03, "ratio {ratio}: drift {drift}");
    }
    let out = stretch_duration(&input, 1.5).unwrap();
    assert!((out.duration_ms() - 300.0).abs() <= 10.0);
}

#[test]
fn pitch_law() {
    for f0 in [100.0, 120.0, 180.0] {
        let input = vowel(f0, 200.0);
        let f0_in = mean_f0(&input);
        for ratio in [0.8, 1.0, 1.26, 1.5, 2.0] {
            let out = shift_pitch(&input, ratio).unwrap();
            assert!(out.warnings.is_empty());
            assert!(out.audio.len().abs_diff(input.len()) <= HOP_SAMPLES);
            let measured = mean_f0(&out.audio) / f0_in;
            eprintln!("f0 {f0} pitch {ratio}: measured {measured:.4}");
            assert!(
                (measured / ratio - 1.0).abs() <= 0.03,
                "f0 {f0} ratio {ratio}: {measured}"
            );
        }
    }
    let out = shift_pitch(&vowel(120.0, 200.0), 1.26).unwrap();
    let target = 120.0 * 1.26;
    assert!((mean_f0(&out.audio) - target).abs() <= 0.03 * target);
}

#[test]
fn energy_law() {
    // -20 dBFS RMS tone.
    let amp = 0.1 * 2f64.sqrt();
    let input = AudioBuffer::from_f64(&synth::tone(220.0, 200.0, amp, RATE), RATE).unwrap();
    assert!((input.rms() - 0.1).abs() < 1e-3);
    for ratio in [0.5, 0.8, 1.0, 1.4, 2.0, 3.0] {
        let out = scale_energy(&input, ratio).unwrap();
        let measured = out.audio.rms() / input.rms();
        assert!(
            (measured / ratio - 1.0).abs() <= 0.05,
            "{ratio}: {measured}"
        );
    }
}

fn two_second_reference() -> (AudioBuffer, Vec<PhonemeSegment>) {
    let classes = PhonemeClassTable::default();
    let mut timed = vec![("AA", 500.0), ("M", 300.0), ("IY", 200.0)];
    timed.extend([("S", 300.0), ("OW", 500.0)]);
    let opts = SynthOptions {
        lead_silence_ms: 100.0,
        tail_silence_ms: 100.0,
        ..SynthOptions::default()
    };
    let utt = synth::synthesize_timed(&timed, &classes, &opts).unwrap();
    (utt.audio, utt.segments)
}

#[test]
fn splice_length_and_locality() {
    let (reference, segments) = two_second_reference();
    assert!((reference.duration_ms() - 2000.0).abs() < 0.1);
    let target = segments[2].clone();
    assert_eq!(target.duration_ms(), 200.0);
    let plan = ExaggerationPlan {
        target: target.clone(),
        ratios: RatioTriple::new(1.26, 1.5, 1.4).unwrap(),
        crossfade_ms: 10.0,
    };
    let out = apply_plan(&reference, &plan).unwrap();
    assert!((out.audio.duration_ms() - 2100.0).abs() <= 20.0);

    let s = reference.ms_to_index(target.start_ms);
    let e = reference.ms_to_index(target.end_ms);
    let new_e = reference.ms_to_index(out.target_end_ms);
    assert_eq!(&out.audio.samples()[..s], &reference.samples()[..s]);
    assert_eq!(&out.audio.samples()[new_e..], &reference.samples()[e..]);
    assert_ne!(&out.audio.samples()[s..new_e], &reference.samples()[s..e]);
}

#[test]
fn identity_plan_is_bit_exact() {
    let (reference, segments) = two_second_reference();
    for seg in &segments {
        let plan = ExaggerationPlan {
            target: seg.clone(),
            ratios: RatioTriple::IDENTITY,
            crossfade_ms: 10.0,
        };
        assert_eq!(apply_plan(&reference, &plan).unwrap().audio, reference);
    }
}

#[test]
fn duration_law_holds_for_every_triple_on_50ms_targets() {
    let classes = PhonemeClassTable::default();
    let utt = synth::synthesize_timed(
        &[("AA", 200.0), ("IY", 50.0), ("UW", 200.0)],
        &classes,
        &SynthOptions::default(),
    )
    .unwrap();
    let target = utt.segments[1].clone();
    for d in [0.5, 1.0, 1.5, 3.0] {
        for p in [0.8, 1.26, 2.0] {
            let plan = ExaggerationPlan {
                target: target.clone(),
                ratios: RatioTriple::new(p, d, 1.2).unwrap(),
                crossfade_ms: 10.0,
            };
            let out = apply_plan(&utt.audio, &plan).unwrap();
            let expected = utt.audio.duration_ms() + target.duration_ms() * (d - 1.0);
            assert!((out.audio.duration_ms() - expected).abs() <= 20.0);
        }
    }
}
