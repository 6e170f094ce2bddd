use flowmend_core::flow::GrayImage;
use flowmend_core::occlusion::{apply_occlusion, crop_box_exact, crop_face, mask_on_flow, CropGeometry, EyeAnchors, MaskKind, OcclusionMask};
use proptest::prelude::*;

fn arb_image() -> impl Strategy<Value = GrayImage> {
    (1usize..40, 1usize..40).prop_flat_map(|(w, h)| {
        prop::collection::vec(0.0f64..=1.0, w * h).prop_map(move |d| GrayImage::new(w, h, d).unwrap())
    })
}

fn arb_mask() -> impl Strategy<Value = OcclusionMask> {
    prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 1..4).prop_flat_map(|rs| {
        let rects: Vec<[f64; 4]> =
            rs.into_iter().map(|(a, b, c, d)| [a.min(c), b.min(d), a.max(c), b.max(d)]).collect();
        (0.0f64..=1.0).prop_map(move |fill| OcclusionMask::new(MaskKind::Custom, rects.clone(), fill).unwrap())
    })
}

proptest! {
    #[test]
    fn occlusion_is_idempotent(img in arb_image(), mask in arb_mask()) {
        let once = apply_occlusion(&img, &mask);
        prop_assert_eq!(apply_occlusion(&once, &mask), once);
    }

    #[test]
    fn pixels_outside_the_mask_are_untouched(img in arb_image(), mask in arb_mask()) {
        let out = apply_occlusion(&img, &mask);
        let grid = mask_on_flow(&mask, img.width(), img.height());
        for y in 0..img.height() {
            for x in 0..img.width() {
                if grid.cells[y * img.width() + x] {
                    prop_assert_eq!(out.get(x, y), mask.fill());
                } else {
                    prop_assert_eq!(out.get(x, y).to_bits(), img.get(x, y).to_bits());
                }
            }
        }
    }

    #[test]
    fn crop_side_is_linear_in_ipd(lx in 10.0f64..100.0, ly in 10.0f64..100.0, ipd in 1.0f64..50.0) {
        let g = CropGeometry::default();
        let a = EyeAnchors::new((lx, ly), (lx + ipd, ly)).unwrap();
        let b = EyeAnchors::new((lx, ly), (lx + 2.0 * ipd, ly)).unwrap();
        let (_, _, s1) = crop_box_exact(&a, &g).unwrap();
        let (_, _, s2) = crop_box_exact(&b, &g).unwrap();
        prop_assert!((s2 - 2.0 * s1).abs() < 1e-9);
    }
}

#[test]
fn crops_are_square() {
    let img = GrayImage::filled(200, 160, 0.3).unwrap();
    for (l, r) in [((60.0, 70.0), (100.0, 70.0)), ((80.0, 50.0), (130.0, 55.0)), ((5.0, 5.0), (40.0, 5.0))] {
        let c = crop_face(&img, &EyeAnchors::new(l, r).unwrap(), &CropGeometry::default()).unwrap();
        assert_eq!(c.image.width(), c.image.height());
    }
}

#[test]
fn anchors_outside_image_error() {
    let img = GrayImage::filled(50, 50, 0.3).unwrap();
    let a = EyeAnchors::new((10.0, 10.0), (60.0, 10.0)).unwrap();
    assert!(crop_face(&img, &a, &CropGeometry::default()).is_err());
}

#[test]
fn preset_masks_have_documented_extents() {
    assert_eq!(OcclusionMask::preset(MaskKind::Eyes).unwrap().rects(), &[[0.05, 0.18, 0.95, 0.42]]);
    assert_eq!(OcclusionMask::preset(MaskKind::Mouth).unwrap().rects(), &[[0.15, 0.62, 0.85, 0.92]]);
    assert_eq!(OcclusionMask::preset(MaskKind::LowerPart).unwrap().rects(), &[[0.0, 0.52, 1.0, 1.0]]);
    assert_eq!(OcclusionMask::preset(MaskKind::LowerPart).unwrap().fill(), 0.0);
}
