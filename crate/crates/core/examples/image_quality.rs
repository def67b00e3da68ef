//! MSE and PSNR between a reference frame and a degraded copy.

use netadapt::qoe::{mse, psnr, ImageMatrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reference: ImageMatrix = "# 3x4 grey ramp\n0,40,80,120\n20,60,100,140\n40,80,120,160\n".parse()?;
    println!("reference {:?}, psnr vs itself = {}", reference.dims(), psnr(&reference, &reference)?);

    let (rows, cols) = reference.dims();
    for noise in [2.0, 8.0, 32.0] {
        let data: Vec<Vec<f64>> = (0..rows)
            .map(|r| {
                (0..cols)
                    .map(|c| {
                        let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
                        (reference.get(r, c) + sign * noise).clamp(0.0, 255.0)
                    })
                    .collect()
            })
            .collect();
        let degraded = ImageMatrix::new(data)?;
        println!(
            "noise ±{noise:>4}: mse={:.2} psnr={} dB",
            mse(&reference, &degraded)?,
            psnr(&reference, &degraded)?
        );
    }
    Ok(())
}
