use percscan::pgm::{read_pgm, PgmImage};
use percscan::pipeline::{run, PipelineOptions};
use percscan::{Decision, Mask, NoiseModel, SceneSpec};

fn micrograph() -> PgmImage {
    // 64x64, two bright blocks on a dim background with a deterministic ripple.
    let samples = (0..64 * 64)
        .map(|k| {
            let (r, c) = (k / 64, k % 64);
            let bright = (8..24).contains(&r) && (8..24).contains(&c) || (40..56).contains(&r) && (30..50).contains(&c);
            let ripple = ((r * 7 + c * 13) % 11) as u16 * 3;
            if bright {
                170 + ripple
            } else {
                60 + ripple
            }
        })
        .collect();
    PgmImage::new(64, 64, 255, samples).unwrap()
}

#[test]
fn ascii_and_binary_pgm_give_same_report() {
    let img = micrograph();
    assert_eq!(read_pgm(&img.to_p2()).unwrap(), read_pgm(&img.to_p5()).unwrap());
    let opts = PipelineOptions { phi0: Some(6), phi1: Some(6), min_cluster: Some(30), ..Default::default() };
    let a = run(&img.to_p2(), &opts).unwrap();
    let b = run(&img.to_p5(), &opts).unwrap();
    assert_eq!(a.report_json, b.report_json);
    assert_eq!(a.report.decision, Decision::ParticlesFound(2));
}

#[test]
fn downsampling_preserves_detection() {
    let opts =
        PipelineOptions { phi0: Some(3), phi1: Some(3), min_cluster: Some(8), downsample: 2, ..Default::default() };
    let out = run(&micrograph().to_p5(), &opts).unwrap();
    assert_eq!(out.report.n, 16);
    assert_eq!(out.report.decision, Decision::ParticlesFound(2));
    assert!(out.filtered_pgm.starts_with(b"P5\n16 16\n255\n"));
}

#[test]
fn scene_file_round_trip_through_pipeline() {
    let scene = SceneSpec::new(
        48,
        0.1,
        0.9,
        vec![Mask::disc(12, 12, 6.0), Mask::rect(30, 20, 10, 20)],
        NoiseModel::TwoPointSymmetric { m: 0.2 },
    )
    .unwrap();
    let text = scene.to_json();
    assert_eq!(SceneSpec::from_json(&text).unwrap(), scene);
    let opts = PipelineOptions { phi0: Some(6), phi1: Some(6), min_cluster: Some(20), seed: 3, ..Default::default() };
    let out = run(text.as_bytes(), &opts).unwrap();
    assert_eq!(out.report.decision, Decision::ParticlesFound(2));
    // Window means stay within 0.2 of a and b.
    assert!((0.3..=0.7).contains(&out.report.theta));
}
