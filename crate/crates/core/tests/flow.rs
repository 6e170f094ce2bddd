use flowmend_core::flow::{
    decode_flo, encode_flo, estimate_flow, flow_to_hsv, read_flo, resize_flow, write_flo, FlowField, FlowParams,
    GrayImage, ResizeSpec,
};
use proptest::prelude::*;

/// Smooth band-limited pattern in [0.2, 0.8].
fn texture(x: f64, y: f64) -> f64 {
    0.5 + 0.1 * (0.37 * x + 0.11 * y).sin()
        + 0.1 * (0.23 * y - 0.19 * x + 1.0).sin()
        + 0.1 * (0.29 * x + 0.31 * y + 2.0).cos()
}

fn render(size: usize, f: impl Fn(f64, f64) -> f64) -> GrayImage {
    GrayImage::from_fn(size, size, |x, y| f(x as f64, y as f64))
}

fn interior_mean(values: &[f64], size: usize, border: usize) -> f64 {
    let mut s = 0.0;
    let mut n = 0;
    for y in border..size - border {
        for x in border..size - border {
            s += values[y * size + x];
            n += 1;
        }
    }
    s / n as f64
}

#[test]
fn wrapped_two_pixel_shift() {
    let n = 64;
    // Texture sampled on a periodic grid so that wrap padding is seamless.
    let periodic = |x: f64, y: f64| {
        let t = std::f64::consts::TAU / n as f64;
        0.5 + 0.15 * (3.0 * t * x + t * y).sin() + 0.12 * (2.0 * t * y - 5.0 * t * x).cos() + 0.1 * (7.0 * t * x + 4.0 * t * y).sin()
    };
    let a = render(n, periodic);
    let b = GrayImage::from_fn(n, n, |x, y| a.get((x + n - 2) % n, y));
    let flow = estimate_flow(&a, &b, &FlowParams::default()).unwrap();
    let mu = interior_mean(flow.u(), n, 8);
    let mv = interior_mean(flow.v(), n, 8);
    assert!((mu - 2.0).abs() < 0.5, "mean u {}", mu);
    assert!(mv.abs() < 0.5, "mean v {}", mv);
}

#[test]
fn five_degree_rotation_matches_analytic_field() {
    let n = 64;
    let c = (n as f64 - 1.0) / 2.0;
    let th = 5f64.to_radians();
    let (s, co) = th.sin_cos();
    let a = render(n, texture);
    // Content at q moves to R(q - c) + c, so the new frame samples R^-1(p - c) + c.
    let b = render(n, |x, y| {
        let (dx, dy) = (x - c, y - c);
        texture(co * dx + s * dy + c, -s * dx + co * dy + c)
    });
    let truth = FlowField::from_fn(n, n, |x, y| {
        let (dx, dy) = (x as f64 - c, y as f64 - c);
        (co * dx - s * dy - dx, s * dx + co * dy - dy)
    });
    let est = estimate_flow(&a, &b, &FlowParams::default()).unwrap();
    let epe = est.mean_epe_interior(&truth, 8).unwrap();
    assert!(epe < 0.5, "rotation EPE {}", epe);
}

#[test]
fn integer_translations_up_to_four_pixels() {
    let n = 64;
    for (dx, dy) in [(1i32, 0i32), (0, 2), (-3, 1), (4, -4), (2, 3), (-4, 0)] {
        let a = render(n, texture);
        let b = render(n, |x, y| texture(x - dx as f64, y - dy as f64));
        let est = estimate_flow(&a, &b, &FlowParams::default()).unwrap();
        let truth = FlowField::constant(n, n, dx as f64, dy as f64);
        let epe = est.mean_epe_interior(&truth, 8).unwrap();
        assert!(epe < 0.5, "shift ({}, {}) EPE {}", dx, dy, epe);
    }
}

#[test]
fn zero_motion() {
    let a = render(48, texture);
    let est = estimate_flow(&a, &a, &FlowParams::default()).unwrap();
    assert!(est.mean_epe(&FlowField::zeros(48, 48)).unwrap() < 0.05);
}

#[test]
fn estimate_is_deterministic() {
    let a = render(40, texture);
    let b = render(40, |x, y| texture(x - 1.0, y));
    let p = FlowParams::default();
    assert_eq!(estimate_flow(&a, &b, &p).unwrap(), estimate_flow(&a, &b, &p).unwrap());
}

/// Window of output cell `i` found by search: the largest start with
/// `start * fin <= orig * i` and the smallest end with `end * fin >= orig * (i + 1)`.
fn oracle_window(orig: usize, fin: usize, i: usize) -> (usize, usize) {
    let start = (0..=orig).rev().find(|s| s * fin <= orig * i).unwrap();
    let end = (0..=orig).find(|e| e * fin >= orig * (i + 1)).unwrap();
    (start, end - 1)
}

fn oracle_resize(flow: &FlowField, fw: usize, fh: usize) -> FlowField {
    let (w, h) = (flow.width(), flow.height());
    FlowField::from_fn(fw, fh, |j, i| {
        let (r0, r1) = oracle_window(h, fh, i);
        let (c0, c1) = oracle_window(w, fw, j);
        let (mut su, mut sv, mut n) = (0.0, 0.0, 0.0);
        for r in r0..=r1 {
            for c in c0..=c1 {
                let (u, v) = flow.at(c, r);
                su += u;
                sv += v;
                n += 1.0;
            }
        }
        (su / n, sv / n)
    })
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-300)).fold(0.0, f64::max)
}

#[test]
fn eight_by_eight_to_two_by_two() {
    let flow = FlowField::from_fn(8, 8, |x, y| ((x * 3 + y) as f64 * 0.37 - 4.0, (y * 5) as f64 * -0.21 + x as f64));
    let got = resize_flow(&flow, &ResizeSpec::new(8, 8, 2, 2).unwrap()).unwrap();
    let want = oracle_resize(&flow, 2, 2);
    assert!(rel_err(got.u(), want.u()) < 1e-12 && rel_err(got.v(), want.v()) < 1e-12);
    // Top-left cell is the mean of the 4x4 block.
    let mut s = 0.0;
    for y in 0..4 {
        for x in 0..4 {
            s += flow.at(x, y).0;
        }
    }
    assert!((got.at(0, 0).0 - s / 16.0).abs() < 1e-12);
}

fn arb_flow() -> impl Strategy<Value = FlowField> {
    (1usize..=32, 1usize..=32).prop_flat_map(|(w, h)| {
        prop::collection::vec(-50.0f64..50.0, 2 * w * h).prop_map(move |d| {
            FlowField::new(w, h, d[..w * h].to_vec(), d[w * h..].to_vec()).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn resize_matches_window_mean_oracle(flow in arb_flow(), fx in 0.0f64..1.0, fy in 0.0f64..1.0) {
        let fw = 1 + (fx * (flow.width() - 1) as f64) as usize;
        let fh = 1 + (fy * (flow.height() - 1) as f64) as usize;
        let got = resize_flow(&flow, &ResizeSpec::new(flow.width(), flow.height(), fw, fh).unwrap()).unwrap();
        let want = oracle_resize(&flow, fw, fh);
        prop_assert!(rel_err(got.u(), want.u()) < 1e-12);
        prop_assert!(rel_err(got.v(), want.v()) < 1e-12);
    }

    #[test]
    fn resize_preserves_constants(w in 1usize..=40, h in 1usize..=40, fx in 0.0f64..1.0, fy in 0.0f64..1.0, u in -10.0f64..10.0, v in -10.0f64..10.0) {
        let fw = 1 + (fx * (w - 1) as f64) as usize;
        let fh = 1 + (fy * (h - 1) as f64) as usize;
        let got = resize_flow(&FlowField::constant(w, h, u, v), &ResizeSpec::new(w, h, fw, fh).unwrap()).unwrap();
        prop_assert!(got.u().iter().all(|x| (x - u).abs() <= 1e-12 * u.abs().max(1.0)));
        prop_assert!(got.v().iter().all(|x| (x - v).abs() <= 1e-12 * v.abs().max(1.0)));
    }

    #[test]
    fn flo_round_trip_is_bit_exact(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
        let vals: Vec<f32> = (0..2 * w * h).map(|i| {
            let k = seed.wrapping_mul(6364136223846793005).wrapping_add((i as u64).wrapping_mul(1442695040888963407));
            ((k >> 11) as f64 / (1u64 << 53) as f64 * 200.0 - 100.0) as f32
        }).collect();
        let flow = FlowField::new(w, h, vals[..w * h].iter().map(|&x| x as f64).collect(), vals[w * h..].iter().map(|&x| x as f64).collect()).unwrap();
        let back = decode_flo(&encode_flo(&flow).unwrap()).unwrap();
        prop_assert!(back.u().iter().zip(flow.u()).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert!(back.v().iter().zip(flow.v()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn one_pixel_flo_layout() {
    let flow = FlowField::new(1, 1, vec![0.5], vec![-0.25]).unwrap();
    let bytes = encode_flo(&flow).unwrap();
    assert_eq!(bytes.len(), 12 + 8);
    assert_eq!(&bytes[0..4], &202021.25f32.to_le_bytes());
    assert_eq!(&bytes[4..8], &1i32.to_le_bytes());
    assert_eq!(&bytes[12..16], &0.5f32.to_le_bytes());
    assert_eq!(&bytes[16..20], &(-0.25f32).to_le_bytes());
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.flo");
    write_flo(&flow, &p).unwrap();
    assert_eq!(read_flo(&p).unwrap(), flow);
    let mut bad = bytes.clone();
    bad[0] ^= 0xFF;
    std::fs::write(&p, bad).unwrap();
    assert!(read_flo(&p).unwrap_err().to_string().contains("bad magic"));
}

#[test]
fn hsv_conventions() {
    let h = flow_to_hsv(&FlowField::constant(3, 2, 0.0, 1.0));
    assert!(h.hue.iter().all(|x| (x - 90.0).abs() < 1e-12));
    assert!(h.value.iter().all(|x| (x - 1.0).abs() < 1e-12));
    let h = flow_to_hsv(&FlowField::constant(3, 2, 1.0, 0.0));
    assert!(h.hue.iter().all(|x| x.abs() < 1e-12));
    let h = flow_to_hsv(&FlowField::zeros(3, 2));
    assert!(h.value.iter().all(|x| *x == 0.0));
    let h = flow_to_hsv(&FlowField::constant(1, 1, 0.0, -1.0));
    assert!((h.hue[0] - 270.0).abs() < 1e-12);
}
