/// Direct 2-D Gaussian convolution with a normalized square kernel of
/// radius `ceil(3 sigma)` and clamp-to-edge sampling. `sigma == 0` copies.
pub fn dense_gaussian(values: &[f64], width: u32, height: u32, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return values.to_vec();
    }
    let r = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::new();
    let mut total = 0.0;
    for j in -r..=r {
        for i in -r..=r {
            let w = (-((i * i + j * j) as f64) / (2.0 * sigma * sigma)).exp();
            kernel.push((i, j, w));
            total += w;
        }
    }
    let (w, h) = (width as i64, height as i64);
    let mut out = vec![0.0; values.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for &(i, j, k) in &kernel {
                let sx = (x + i).clamp(0, w - 1);
                let sy = (y + j).clamp(0, h - 1);
                acc += k * values[(sy * w + sx) as usize];
            }
            out[(y * w + x) as usize] = acc / total;
        }
    }
    out
}
