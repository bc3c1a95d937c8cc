//! Exposure-times-kernel convolution: an exact direct-summation oracle and
//! an FFT path for production grids.

use super::DoseGrid;
use crate::error::{EblError, Result};
use crate::layout::ExposureGrid;
use crate::psf::PsfKernel;
use ndarray::Array2;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

fn check_pitch(exposure: &ExposureGrid, kernel: &PsfKernel) -> Result<()> {
    if (exposure.pitch_nm - kernel.pitch_nm).abs() > 1e-9 * exposure.pitch_nm.max(1.0) {
        return Err(EblError::validation(
            "pitch",
            format!(
                "exposure pitch {} nm != kernel pitch {} nm",
                exposure.pitch_nm, kernel.pitch_nm
            ),
        ));
    }
    Ok(())
}

/// Exact "same"-size convolution by direct summation; the correctness oracle
/// for the FFT path. Zero padding outside the exposure.
pub fn convolve_direct(exposure: &ExposureGrid, kernel: &PsfKernel) -> Result<DoseGrid> {
    check_pitch(exposure, kernel)?;
    let incident = direct_channel(&exposure.values, &kernel.incident);
    let backscattered = direct_channel(&exposure.values, &kernel.backscattered);
    Ok(DoseGrid::from_channels(
        exposure.pitch_nm,
        incident,
        backscattered,
    ))
}

fn direct_channel(exposure: &Array2<f64>, kernel: &Array2<f64>) -> Array2<f64> {
    let (h, w) = exposure.dim();
    let (kh, kw) = kernel.dim();
    let (ch, cw) = (kh as i64 / 2, kw as i64 / 2);
    let mut out = Array2::zeros((h, w));
    let rows: Vec<(usize, Vec<f64>)> = (0..h)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0f64; w];
            for (j, slot) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for ki in 0..kh {
                    let src_i = i as i64 + ch - ki as i64;
                    if src_i < 0 || src_i >= h as i64 {
                        continue;
                    }
                    for kj in 0..kw {
                        let src_j = j as i64 + cw - kj as i64;
                        if src_j < 0 || src_j >= w as i64 {
                            continue;
                        }
                        acc += exposure[(src_i as usize, src_j as usize)] * kernel[(ki, kj)];
                    }
                }
                *slot = acc;
            }
            (i, row)
        })
        .collect();
    for (i, row) in rows {
        for (j, v) in row.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    out
}

/// FFT-based convolution; matches `convolve_direct` within 1e-5 relative.
pub fn convolve_fast(exposure: &ExposureGrid, kernel: &PsfKernel) -> Result<DoseGrid> {
    check_pitch(exposure, kernel)?;
    let mut plan = ConvolutionPlan::new(exposure.values.dim(), kernel.incident.dim());
    let exposure_hat = plan.forward(&exposure.values);
    let incident = plan.convolve_with(&exposure_hat, &kernel.incident);
    let backscattered = plan.convolve_with(&exposure_hat, &kernel.backscattered);
    Ok(DoseGrid::from_channels(
        exposure.pitch_nm,
        incident,
        backscattered,
    ))
}

/// Shared padded-FFT workspace; the exposure transform is computed once and
/// reused for every kernel channel.
pub struct ConvolutionPlan {
    exposure_dim: (usize, usize),
    kernel_dim: (usize, usize),
    padded: (usize, usize),
    planner: FftPlanner<f64>,
}

impl ConvolutionPlan {
    pub fn new(exposure_dim: (usize, usize), kernel_dim: (usize, usize)) -> ConvolutionPlan {
        let ph = next_fast_len(exposure_dim.0 + kernel_dim.0 - 1);
        let pw = next_fast_len(exposure_dim.1 + kernel_dim.1 - 1);
        ConvolutionPlan {
            exposure_dim,
            kernel_dim,
            padded: (ph, pw),
            planner: FftPlanner::new(),
        }
    }

    /// Forward transform of the zero-padded exposure.
    pub fn forward(&mut self, values: &Array2<f64>) -> Vec<Complex<f64>> {
        let (ph, pw) = self.padded;
        let mut buf = vec![Complex::new(0.0, 0.0); ph * pw];
        for i in 0..values.nrows() {
            for j in 0..values.ncols() {
                buf[i * pw + j].re = values[(i, j)];
            }
        }
        self.fft2(&mut buf, false);
        buf
    }

    /// Convolve a pre-transformed exposure with one kernel channel.
    pub fn convolve_with(
        &mut self,
        exposure_hat: &[Complex<f64>],
        kernel: &Array2<f64>,
    ) -> Array2<f64> {
        let (ph, pw) = self.padded;
        let mut buf = vec![Complex::new(0.0, 0.0); ph * pw];
        for i in 0..kernel.nrows() {
            for j in 0..kernel.ncols() {
                buf[i * pw + j].re = kernel[(i, j)];
            }
        }
        self.fft2(&mut buf, false);
        let scale = 1.0 / (ph * pw) as f64;
        for (b, e) in buf.iter_mut().zip(exposure_hat) {
            *b = *b * *e * scale;
        }
        self.fft2(&mut buf, true);

        // "Same" extraction: full convolution index offset by the kernel
        // center. Tiny negative FFT residue (|v| ~ 1e-16 of the peak) is
        // clamped so dose stays nonnegative.
        let (eh, ew) = self.exposure_dim;
        let (kh, kw) = self.kernel_dim;
        let (oh, ow) = (kh / 2, kw / 2);
        let mut out = Array2::zeros((eh, ew));
        for i in 0..eh {
            for j in 0..ew {
                out[(i, j)] = buf[(i + oh) * pw + (j + ow)].re.max(0.0);
            }
        }
        out
    }

    /// In-place 2D FFT over a row-major padded buffer, rows then columns.
    fn fft2(&mut self, buf: &mut [Complex<f64>], inverse: bool) {
        let (ph, pw) = self.padded;
        let row_fft = if inverse {
            self.planner.plan_fft_inverse(pw)
        } else {
            self.planner.plan_fft_forward(pw)
        };
        let col_fft = if inverse {
            self.planner.plan_fft_inverse(ph)
        } else {
            self.planner.plan_fft_forward(ph)
        };
        buf.par_chunks_mut(pw).for_each(|row| {
            row_fft.process(row);
        });
        // Transpose, transform rows (former columns), transpose back.
        let mut t = vec![Complex::new(0.0, 0.0); ph * pw];
        transpose(buf, &mut t, ph, pw);
        t.par_chunks_mut(ph).for_each(|col| {
            col_fft.process(col);
        });
        transpose(&t, buf, pw, ph);
    }
}

fn transpose(src: &[Complex<f64>], dst: &mut [Complex<f64>], rows: usize, cols: usize) {
    const BLOCK: usize = 32;
    for bi in (0..rows).step_by(BLOCK) {
        for bj in (0..cols).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(rows) {
                for j in bj..(bj + BLOCK).min(cols) {
                    dst[j * rows + i] = src[i * cols + j];
                }
            }
        }
    }
}

/// Smallest 2^a * 3^b * 5^c >= n; keeps rustfft on fast mixed-radix paths.
fn next_fast_len(n: usize) -> usize {
    if n <= 1 {
        return 1;
    }
    let mut best = n.next_power_of_two();
    let mut p5 = 1usize;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut candidate = p35;
            while candidate < n {
                candidate *= 2;
            }
            best = best.min(candidate);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}
