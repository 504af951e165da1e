use std::fs;

use corpca::io::video::min_max_normalize;
use corpca::io::{
    gen_video_sequence, load_masks, load_pgm_sequence, read_data_rows, separate_sequence, write_pgm,
    write_separation, write_video_sequence, FrameSequence, PgmImage, RunMeta, SeparateConfig, VideoConfig,
};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_video(seed: u64) -> VideoConfig {
    VideoConfig {
        height: 24,
        width: 32,
        r: 1,
        train: 20,
        test: 10,
        block: 12,
        seed,
    }
}

#[test]
fn empty_directory_is_an_explicit_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_pgm_sequence(dir.path(), "*.pgm").unwrap_err();
    assert_eq!(err.kind(), "empty-sequence");
}

#[test]
fn eight_bit_files_round_trip_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (w, h) = (7, 5);
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend((0..w * h).map(|_| rng.random::<u8>()));
    fs::write(dir.path().join("a.pgm"), &bytes).unwrap();
    let seq = load_pgm_sequence(dir.path(), "*.pgm").unwrap();
    let img = PgmImage::from_vector(&seq.frames[0], w, h, 255).unwrap();
    assert_eq!(img.encode(), bytes);
}

#[test]
fn mismatched_frame_sizes_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let a = PgmImage::from_vector(&DVector::zeros(4), 2, 2, 255).unwrap();
    let b = PgmImage::from_vector(&DVector::zeros(6), 3, 2, 255).unwrap();
    write_pgm(&dir.path().join("f0.pgm"), &a).unwrap();
    write_pgm(&dir.path().join("f1.pgm"), &b).unwrap();
    let err = load_pgm_sequence(dir.path(), "*.pgm").unwrap_err();
    assert_eq!(err.kind(), "format");
    assert!(err.to_string().contains("f1.pgm"));
}

proptest! {
    #[test]
    fn reload_is_within_quantisation(w in 1usize..20, h in 1usize..20, wide in any::<bool>(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let maxval = if wide { 65535 } else { 255 };
        let v = DVector::from_fn(w * h, |_, _| rng.random::<f64>());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        write_pgm(&path, &PgmImage::from_vector(&v, w, h, maxval).unwrap()).unwrap();
        let back = load_pgm_sequence(dir.path(), "*.pgm").unwrap();
        prop_assert!((&back.frames[0] - &v).amax() <= 1.0 / maxval as f64);
    }
}

#[test]
fn normalised_foreground_spans_unit_range() {
    let x = DVector::from_vec(vec![0.5, -2.0, 1.0, 0.0]);
    assert_eq!(min_max_normalize(&x), DVector::from_vec(vec![0.25, 1.0, 0.5, 0.0]));
    assert_eq!(min_max_normalize(&DVector::from_element(3, 0.7)), DVector::zeros(3));
}

#[test]
fn generated_video_reloads_from_disk() {
    let cfg = small_video(3);
    let video = gen_video_sequence(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_video_sequence(dir.path(), &video, cfg.train, &RunMeta::new(3, &[])).unwrap();
    let mut seq = load_pgm_sequence(&dir.path().join("frames"), "*.pgm").unwrap();
    seq.masks = Some(load_masks(&dir.path().join("masks"), "*.pgm", &seq).unwrap());
    assert_eq!((seq.width, seq.height, seq.len()), (32, 24, 30));
    assert_eq!(seq.masks, video.seq.masks);
    for (a, b) in seq.frames.iter().zip(&video.seq.frames) {
        assert!((a - b).amax() <= 1.0 / 65535.0);
    }
    assert_eq!(read_data_rows(&dir.path().join("truth.csv")).unwrap().len(), 30);
}

fn mean_f1(seq: &FrameSequence, rate: f64) -> f64 {
    let run = separate_sequence(seq, &SeparateConfig::new(rate, 20, 2, 9)).unwrap();
    run.detection.unwrap().mean_f1
}

#[test]
fn separation_finds_the_moving_block() {
    let video = gen_video_sequence(&small_video(5)).unwrap();
    let full = mean_f1(&video.seq, 1.0);
    assert!(full >= 0.95, "rate 1 F1 {full}");
    let partial = mean_f1(&video.seq, 0.4);
    assert!(partial >= full - 0.1, "rate 0.4 F1 {partial} vs {full}");
}

#[test]
fn separation_outputs_and_errors() {
    let video = gen_video_sequence(&small_video(6)).unwrap();
    let run = separate_sequence(&video.seq, &SeparateConfig::new(1.0, 20, 2, 1)).unwrap();
    assert_eq!(run.frames.len(), 10);
    assert!(run.frames[5..].iter().all(|f| f.residual <= 1e-2));
    let dir = tempfile::tempdir().unwrap();
    write_separation(dir.path(), &run, 32, 24, &RunMeta::new(1, &[("rate", "1".into())])).unwrap();
    assert_eq!(read_data_rows(&dir.path().join("summary.csv")).unwrap().len(), 10);
    assert!(dir.path().join("roc.csv").exists());
    assert!(dir.path().join("foreground_0020.pgm").exists());
    assert!(dir.path().join("background_0029.pgm").exists());

    let err = separate_sequence(&video.seq, &SeparateConfig::new(1.0, 30, 2, 1)).unwrap_err();
    assert_eq!(err.kind(), "invalid-input");
    let err = separate_sequence(&video.seq, &SeparateConfig::new(0.5 / 768.0, 20, 2, 1)).unwrap_err();
    assert_eq!(err.kind(), "invalid-input");
}
