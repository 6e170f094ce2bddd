use crate::flow::FlowField;

/// HSV rendering of a flow: hue = direction in degrees `[0, 360)`, saturation 1,
/// value = magnitude over the field's maximum magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct HsvImage {
    pub width: usize,
    pub height: usize,
    pub hue: Vec<f64>,
    pub saturation: Vec<f64>,
    pub value: Vec<f64>,
}

pub fn flow_to_hsv(flow: &FlowField) -> HsvImage {
    let mags: Vec<f64> = flow.u().iter().zip(flow.v()).map(|(u, v)| u.hypot(*v)).collect();
    let max = mags.iter().cloned().fold(0.0, f64::max);
    let hue = flow
        .u()
        .iter()
        .zip(flow.v())
        .map(|(u, v)| {
            let deg = v.atan2(*u).to_degrees();
            let h = if deg < 0.0 { deg + 360.0 } else { deg };
            if h >= 360.0 { 0.0 } else { h }
        })
        .collect();
    let value = mags.iter().map(|m| if max > 0.0 { m / max } else { 0.0 }).collect();
    HsvImage {
        width: flow.width(),
        height: flow.height(),
        hue,
        saturation: vec![1.0; mags.len()],
        value,
    }
}

impl HsvImage {
    pub fn to_rgb(&self) -> image::RgbImage {
        let mut img = image::RgbImage::new(self.width as u32, self.height as u32);
        for (i, px) in img.pixels_mut().enumerate() {
            let (r, g, b) = hsv_to_rgb(self.hue[i], self.saturation[i], self.value[i]);
            *px = image::Rgb([to_u8(r), to_u8(g), to_u8(b)]);
        }
        img
    }
}

fn to_u8(x: f64) -> u8 {
    (x * 255.0).round().clamp(0.0, 255.0) as u8
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    (r + m, g + m, b + m)
}
