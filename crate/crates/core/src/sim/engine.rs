//! Rendering through HRIRs and the filter-and-sum engine.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::design::FirBeamformer;
use crate::error::{Error, Result};
use crate::spatial::SourcePosition;
use crate::steering::HrtfSet;

/// Sum of linear convolutions `sum_i a_i * b_i`, computed with one FFT size.
pub fn convolve_sum(pairs: &[(&[f64], &[f64])]) -> Vec<f64> {
    let len = pairs
        .iter()
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .map(|(a, b)| a.len() + b.len() - 1)
        .max()
        .unwrap_or(0);
    if len == 0 {
        return Vec::new();
    }
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let spectrum = |x: &[f64]| {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        buf.resize(size, Complex64::new(0.0, 0.0));
        fwd.process(&mut buf);
        buf
    };
    let mut acc = vec![Complex64::new(0.0, 0.0); size];
    for (a, b) in pairs {
        if a.is_empty() || b.is_empty() {
            continue;
        }
        let (fa, fb) = (spectrum(a), spectrum(b));
        for ((s, x), y) in acc.iter_mut().zip(&fa).zip(&fb) {
            *s += x * y;
        }
    }
    inv.process(&mut acc);
    acc[..len].iter().map(|v| v.re / size as f64).collect()
}

pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    convolve_sum(&[(a, b)])
}

/// Microphone signals of a source at `src`: one convolution with the stored
/// HRIR per channel, each of length `len(signal) + T - 1`.
pub fn render_source(set: &HrtfSet, src: &SourcePosition, signal: &[f64]) -> Result<Vec<Vec<f64>>> {
    if signal.is_empty() {
        return Err(Error::Signal("cannot render an empty signal".into()));
    }
    Ok(set.hrirs_for(src)?.iter().map(|h| convolve(signal, h)).collect())
}

/// `y[k] = sum_n (w_n * x_n)[k]`.
pub fn fsb_process(bf: &FirBeamformer, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    if x.len() != bf.channels() {
        return Err(Error::ChannelMismatch {
            expected: bf.channels(),
            got: x.len(),
        });
    }
    let len = x[0].len();
    if len == 0 || x.iter().any(|c| c.len() != len) {
        return Err(Error::Signal("input channels must be non-empty and of equal length".into()));
    }
    let pairs: Vec<(&[f64], &[f64])> = bf.taps.iter().zip(x).map(|(w, c)| (w.as_slice(), c.as_slice())).collect();
    Ok(convolve_sum(&pairs))
}

/// Beamformer outputs for the target-only and interferer-only inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Shadow {
    pub target_out: Vec<f64>,
    pub interferer_out: Vec<f64>,
}

impl Shadow {
    /// What processing the mixture would give.
    pub fn mixture(&self) -> Vec<f64> {
        self.target_out.iter().zip(&self.interferer_out).map(|(a, b)| a + b).collect()
    }
}

/// Processes both components separately through the same filters.
pub fn shadow_decompose(bf: &FirBeamformer, target: &[Vec<f64>], interferer: &[Vec<f64>]) -> Result<Shadow> {
    if target.first().map(Vec::len) != interferer.first().map(Vec::len) {
        return Err(Error::Signal("target and interferer inputs differ in length".into()));
    }
    Ok(Shadow {
        target_out: fsb_process(bf, target)?,
        interferer_out: fsb_process(bf, interferer)?,
    })
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// `10 log10(E_target / E_interferer)`.
pub fn sir_db(target: &[f64], interferer: &[f64]) -> Result<f64> {
    let (et, ei) = (energy(target), energy(interferer));
    if !(et > 0.0) || !(ei > 0.0) {
        return Err(Error::Signal("SIR needs non-zero target and interferer energy".into()));
    }
    Ok(10.0 * (et / ei).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::Direction;

    fn direct(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, h) in b.iter().enumerate() {
                y[i + j] += x * h;
            }
        }
        y
    }

    #[test]
    fn fft_convolution_matches_direct() {
        let a: Vec<f64> = (0..37).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let b: Vec<f64> = (0..13).map(|i| ((i * 5 % 7) as f64 - 3.0) / 2.0).collect();
        for (x, y) in convolve(&a, &b).iter().zip(direct(&a, &b)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_filter_passes_input() {
        let bf = FirBeamformer::new(16000.0, vec![vec![1.0]], String::new()).unwrap();
        let x = vec![vec![0.5, -1.0, 2.0, 0.25]];
        let y = fsb_process(&bf, &x).unwrap();
        for (a, b) in y.iter().zip(&x[0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn delayed_identical_channels_sum() {
        let taps = vec![vec![0.0, 0.0, 1.0]; 3];
        let bf = FirBeamformer::new(16000.0, taps, String::new()).unwrap();
        let s = vec![1.0, -2.0, 0.5, 3.0];
        let y = fsb_process(&bf, &vec![s.clone(); 3]).unwrap();
        assert_eq!(y.len(), 6);
        assert!(y[0].abs() < 1e-15 && y[1].abs() < 1e-15);
        for (i, v) in s.iter().enumerate() {
            assert!((y[i + 2] - 3.0 * v).abs() < 1e-14);
        }
    }

    #[test]
    fn impulse_renders_the_hrirs() {
        let dir = Direction::new(10.0, 90.0).unwrap();
        let hrirs = vec![vec![0.1, 0.2, -0.3], vec![1.0, 0.0, 0.5]];
        let set = HrtfSet::new(16000.0, 1.0, 2, vec![dir], vec![hrirs.clone()], None).unwrap();
        let out = render_source(&set, &SourcePosition::new(dir, 1.0).unwrap(), &[1.0]).unwrap();
        for (o, h) in out.iter().zip(&hrirs) {
            for (a, b) in o.iter().zip(h) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let bf = FirBeamformer::new(16000.0, vec![vec![1.0]; 2], String::new()).unwrap();
        assert!(matches!(
            fsb_process(&bf, &[vec![1.0]]),
            Err(Error::ChannelMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn silent_interferer_gives_silent_output() {
        let bf = FirBeamformer::new(16000.0, vec![vec![0.3, -0.2]; 2], String::new()).unwrap();
        let t = vec![vec![1.0, 2.0, 3.0], vec![-1.0, 0.0, 1.0]];
        let i = vec![vec![0.0; 3]; 2];
        let sh = shadow_decompose(&bf, &t, &i).unwrap();
        assert_eq!(energy(&sh.interferer_out), 0.0);
    }
}
