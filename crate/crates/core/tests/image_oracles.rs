use persona_signal::imgfeat::{
    colorfulness, image_feature_vector, luminance_stats, naturalness, sharpness_blur, PixelBuffer,
};
use persona_signal::seed::rng_for;
use rand::Rng;

fn random_image(seed: u64, w: u32, h: u32) -> PixelBuffer {
    let mut rng = rng_for(seed, 200, 0);
    PixelBuffer::from_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap()
}

fn two_pass_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt())
}

fn colorfulness_oracle(img: &PixelBuffer) -> f64 {
    let px = img.pixels();
    let rg: Vec<f64> = px.iter().map(|p| f64::from(p[0]) - f64::from(p[1])).collect();
    let yb: Vec<f64> = px.iter().map(|p| (f64::from(p[0]) + f64::from(p[1])) / 2.0 - f64::from(p[2])).collect();
    let (mrg, srg) = two_pass_sd(&rg);
    let (myb, syb) = two_pass_sd(&yb);
    (srg * srg + syb * syb).sqrt() + 0.3 * (mrg * mrg + myb * myb).sqrt()
}

fn lum(p: [u8; 3]) -> f64 {
    (0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])) / 255.0
}

fn laplacian_var_oracle(img: &PixelBuffer) -> f64 {
    let mut laps = Vec::new();
    for y in 1..img.height() - 1 {
        for x in 1..img.width() - 1 {
            let c = lum(img.get(x, y));
            let s = lum(img.get(x - 1, y)) + lum(img.get(x + 1, y)) + lum(img.get(x, y - 1)) + lum(img.get(x, y + 1));
            laps.push(s - 4.0 * c);
        }
    }
    let (_, sd) = two_pass_sd(&laps);
    sd * sd
}

#[test]
fn colorfulness_matches_two_pass_oracle() {
    for seed in 0..50 {
        let img = random_image(seed, 7 + (seed % 5) as u32, 5 + (seed % 3) as u32);
        assert!((colorfulness(&img).unwrap() - colorfulness_oracle(&img)).abs() < 1e-9);
    }
}

#[test]
fn luminance_and_sharpness_match_oracles() {
    for seed in 0..50 {
        let img = random_image(seed, 9, 6);
        let l: Vec<f64> = img.pixels().iter().map(|&p| lum(p)).collect();
        let (m, sd) = two_pass_sd(&l);
        let s = luminance_stats(&img).unwrap();
        assert!((s.brightness - m).abs() < 1e-9);
        assert!((s.contrast - sd).abs() < 1e-9);
        let sh = sharpness_blur(&img).unwrap();
        assert!((sh.sharpness - laplacian_var_oracle(&img)).abs() < 1e-9);
        assert!((sh.blurriness - 1.0 / (1.0 + sh.sharpness)).abs() < 1e-12);
    }
}

#[test]
fn analytic_cases() {
    let half = PixelBuffer::from_fn(10, 10, |x, _| if x < 5 { [255, 0, 0] } else { [0, 255, 0] }).unwrap();
    assert!((colorfulness(&half).unwrap() - 293.25).abs() < 1e-9);
    let gray = PixelBuffer::filled(8, 8, [90, 90, 90]).unwrap();
    assert_eq!(colorfulness(&gray).unwrap(), 0.0);
    let f = image_feature_vector(&PixelBuffer::filled(4, 4, [255, 255, 255]).unwrap()).unwrap();
    assert_eq!(f.brightness, 1.0);
    let blue = image_feature_vector(&PixelBuffer::filled(4, 4, [20, 40, 200]).unwrap()).unwrap();
    assert_eq!(blue.hue_var, 0.0);
    for seed in 0..200 {
        let n = naturalness(&random_image(seed, 6, 6)).unwrap();
        assert!((0.0..=1.0).contains(&n));
    }
}
