//! Physical read-out from evolved states.
//!
//! Units for thermodynamics are ħ = k_B = 1.

use std::ops::Range;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SpringMassSystem;

/// Peaks must exceed this multiple of the spectral median.
pub const PEAK_THRESHOLD: f64 = 5.0;
/// Minimum number of samples for a spectrum.
pub const MIN_SAMPLES: usize = 64;

/// `E = T·Σ_{i<N} |ψ_i|²`.
pub fn kinetic_energy(psi: &[Complex64], total_energy: f64, n_osc: usize) -> f64 {
    total_energy * psi[..n_osc].iter().map(|a| a.norm_sqr()).sum::<f64>()
}

/// A uniformly sampled kinetic-energy series.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergySeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub total: f64,
}

impl EnergySeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, total: f64) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Dimension { expected: times.len(), got: values.len() });
        }
        Ok(EnergySeries { times, values, total })
    }

    /// Uniform time step, or an error if the grid is not uniform.
    pub fn step(&self) -> Result<f64> {
        if self.times.len() < 2 {
            return Err(Error::InvalidInput("need at least two samples".into()));
        }
        let dt = self.times[1] - self.times[0];
        if !(dt > 0.0) {
            return Err(Error::InvalidInput("times must increase".into()));
        }
        for (k, t) in self.times.iter().enumerate() {
            let want = self.times[0] + k as f64 * dt;
            if (t - want).abs() > 1e-9 * dt.max(want.abs()) {
                return Err(Error::InvalidInput(format!("non-uniform sampling at index {k}")));
            }
        }
        Ok(dt)
    }
}

/// `Ẽ'(ω)` on the non-negative half of the DFT grid `ω_m = 2πm/(nΔt)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub values: Vec<Complex64>,
    pub bin_width: f64,
}

impl Spectrum {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }
}

/// DFT of `E'(t) = E(t) − T/2` with a rectangular window.
pub fn frequency_spectrum(series: &EnergySeries) -> Result<Spectrum> {
    let n = series.times.len();
    if n < MIN_SAMPLES {
        return Err(Error::InvalidInput(format!("spectrum needs ≥ {MIN_SAMPLES} samples, got {n}")));
    }
    let dt = series.step()?;
    let mut buf: Vec<Complex64> =
        series.values.iter().map(|e| Complex64::new(e - series.total / 2.0, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bin_width = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    let t0 = series.times[0];
    let half = n / 2 + 1;
    let omega: Vec<f64> = (0..half).map(|m| m as f64 * bin_width).collect();
    let values = buf[..half]
        .iter()
        .zip(&omega)
        .map(|(x, w)| x * dt * Complex64::from_polar(1.0, -w * t0))
        .collect();
    Ok(Spectrum { omega, values, bin_width })
}

/// Normal frequencies from spectral peaks at `2ω_α`.
///
/// Takes interior local maxima of `|Ẽ'|` above [`PEAK_THRESHOLD`] times the
/// median, refines each by a parabola through its neighbours, halves, and
/// merges peaks closer than one bin. Modes with no energy in the initial
/// condition produce no peak and are absent from the result.
pub fn extract_normal_frequencies(spectrum: &Spectrum) -> Result<Vec<f64>> {
    let mag = spectrum.magnitudes();
    if mag.len() < 3 {
        return Err(Error::NoPeaks);
    }
    let mut sorted = mag.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let floor = (PEAK_THRESHOLD * median).max(1e-12 * sorted[sorted.len() - 1]).max(1e-300);
    let mut peaks: Vec<f64> = Vec::new();
    for m in 1..mag.len() - 1 {
        if mag[m] > floor && mag[m] >= mag[m - 1] && mag[m] > mag[m + 1] {
            let (a, b, c) = (mag[m - 1], mag[m], mag[m + 1]);
            let denom = a - 2.0 * b + c;
            let shift = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            let w = spectrum.omega[m] + shift.clamp(-0.5, 0.5) * spectrum.bin_width;
            peaks.push(w / 2.0);
        }
    }
    if peaks.is_empty() {
        return Err(Error::NoPeaks);
    }
    peaks.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for w in peaks {
        match out.last() {
            Some(&prev) if w - prev < spectrum.bin_width => {}
            _ => out.push(w),
        }
    }
    Ok(out)
}

/// Vibrational thermodynamics of a set of modes at one temperature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thermo {
    pub temperature: f64,
    pub ln_z: f64,
    pub z: f64,
    pub f: f64,
    pub u: f64,
    pub s: f64,
    pub c_v: f64,
}

/// Frequencies at or below this are rigid modes and are skipped.
const RIGID: f64 = 1e-9;

pub fn vibrational_thermo(frequencies: &[f64], temperature: f64) -> Result<Thermo> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidInput("temperature must be positive".into()));
    }
    let modes: Vec<f64> = frequencies.iter().copied().filter(|&w| w > RIGID).collect();
    if modes.is_empty() {
        return Err(Error::InvalidInput("no nonzero frequencies".into()));
    }
    let beta = 1.0 / temperature;
    let (mut ln_z, mut f, mut u, mut s, mut c_v) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for w in modes {
        let x = beta * w;
        let n = 1.0 / x.exp_m1();
        let log1m = (-(-x).exp()).ln_1p();
        ln_z += -x / 2.0 - log1m;
        f += w / 2.0 + temperature * log1m;
        u += w * (0.5 + n);
        s += if n > 0.0 { (n + 1.0) * n.ln_1p() - n * n.ln() } else { 0.0 };
        c_v += x * x * n * (n + 1.0);
    }
    Ok(Thermo { temperature, ln_z, z: ln_z.exp(), f, u, s, c_v })
}

/// Contiguous regions covering `0..N`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionPartition {
    regions: Vec<Range<usize>>,
    spacing: f64,
}

impl RegionPartition {
    pub fn new(regions: Vec<Range<usize>>, spacing: f64, n_osc: usize) -> Result<Self> {
        let mut next = 0;
        for r in &regions {
            if r.start != next || r.end <= r.start {
                return Err(Error::InvalidInput(format!("regions must be contiguous and non-empty, got {r:?}")));
            }
            next = r.end;
        }
        if next != n_osc {
            return Err(Error::InvalidInput(format!("regions cover 0..{next}, expected 0..{n_osc}")));
        }
        Ok(RegionPartition { regions, spacing })
    }

    /// `m` equal regions.
    pub fn uniform(n_osc: usize, m: usize, spacing: f64) -> Result<Self> {
        if m == 0 || !n_osc.is_multiple_of(m) {
            return Err(Error::InvalidInput(format!("{n_osc} oscillators do not split into {m} equal regions")));
        }
        let l = n_osc / m;
        Self::new((0..m).map(|i| i * l..(i + 1) * l).collect(), spacing, n_osc)
    }

    pub fn regions(&self) -> &[Range<usize>] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Oscillator counts `N_R`.
    pub fn counts(&self) -> Vec<usize> {
        self.regions.iter().map(|r| r.len()).collect()
    }

    fn region_of(&self, i: usize) -> usize {
        self.regions.iter().position(|r| r.contains(&i)).expect("partition covers all oscillators")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegionEnergy {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
}

/// Kinetic and potential energy per region. A spring joining two regions
/// gives half its energy to each.
pub fn region_energies(
    psi: &[Complex64],
    total_energy: f64,
    partition: &RegionPartition,
    sys: &SpringMassSystem,
) -> Result<Vec<RegionEnergy>> {
    let n = sys.n_osc();
    let nn = n * n;
    if psi.len() != 2 * nn {
        return Err(Error::Dimension { expected: 2 * nn, got: psi.len() });
    }
    if partition.regions.last().map(|r| r.end) != Some(n) {
        return Err(Error::InvalidInput("partition does not match the system size".into()));
    }
    let mut kin = vec![0.0; partition.len()];
    let mut pot = vec![0.0; partition.len()];
    for i in 0..n {
        kin[partition.region_of(i)] += total_energy * psi[i].norm_sqr();
    }
    for (j, &w) in sys.walls().iter().enumerate() {
        if w != 0.0 {
            pot[partition.region_of(j)] += total_energy * psi[nn + j * n + j].norm_sqr();
        }
    }
    for &(j, k) in sys.couplings().keys() {
        let e = total_energy * psi[nn + j * n + k].norm_sqr();
        let (rj, rk) = (partition.region_of(j), partition.region_of(k));
        if rj == rk {
            pot[rj] += e;
        } else {
            pot[rj] += e / 2.0;
            pot[rk] += e / 2.0;
        }
    }
    Ok(kin
        .into_iter()
        .zip(pot)
        .map(|(kinetic, potential)| RegionEnergy { kinetic, potential, total: kinetic + potential })
        .collect())
}

/// Effective wave speeds `v[t][I]`; `None` marks boundary samples, a spatial
/// second difference below the floor, or a negative ratio under the root.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveSpeeds {
    pub values: Vec<Vec<Option<f64>>>,
}

impl WaveSpeeds {
    pub fn defined(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().filter_map(|v| *v)
    }
}

/// Wave speeds from a coarse energy profile `profile[t][I]` sampled every `dt`.
pub fn wave_speed(profile: &[Vec<f64>], partition: &RegionPartition, dt: f64, floor: f64) -> Result<WaveSpeeds> {
    let m = partition.len();
    if m < 3 || profile.len() < 3 {
        return Err(Error::InvalidInput("wave speed needs ≥ 3 regions and ≥ 3 time samples".into()));
    }
    if profile.iter().any(|row| row.len() != m) {
        return Err(Error::Dimension { expected: m, got: profile.iter().map(Vec::len).find(|&l| l != m).unwrap_or(m) });
    }
    let counts = partition.counts();
    let mut values = vec![vec![None; m]; profile.len()];
    for t in 1..profile.len() - 1 {
        for i in 1..m - 1 {
            let spatial = profile[t][i + 1] - 2.0 * profile[t][i] + profile[t][i - 1];
            let temporal = profile[t + 1][i] - 2.0 * profile[t][i] + profile[t - 1][i];
            if spatial.abs() < floor {
                continue;
            }
            let ratio = temporal / spatial;
            if ratio >= 0.0 {
                values[t][i] = Some(partition.spacing() * counts[i] as f64 / dt * ratio.sqrt());
            }
        }
    }
    let out = WaveSpeeds { values };
    if out.defined().next().is_none() {
        return Err(Error::InvalidInput("every wave-speed entry is undefined".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinetic_energy_ignores_pair_block() {
        let mut psi = vec![Complex64::new(0.0, 0.0); 8];
        psi[5] = Complex64::new(1.0, 0.0);
        assert_eq!(kinetic_energy(&psi, 2.0, 2), 0.0);
    }

    #[test]
    fn constant_series_has_flat_spectrum() {
        let times: Vec<f64> = (0..128).map(|k| k as f64 * 0.1).collect();
        let s = EnergySeries::new(times, vec![0.75; 128], 1.5).unwrap();
        let spec = frequency_spectrum(&s).unwrap();
        assert!(spec.magnitudes().iter().all(|&m| m < 1e-12));
        assert!(matches!(extract_normal_frequencies(&spec), Err(Error::NoPeaks)));
    }

    #[test]
    fn irregular_grid_is_rejected() {
        let mut times: Vec<f64> = (0..100).map(|k| k as f64 * 0.1).collect();
        times[50] += 0.01;
        let s = EnergySeries::new(times, vec![0.0; 100], 1.0).unwrap();
        assert!(frequency_spectrum(&s).is_err());
    }

    #[test]
    fn thermo_limits() {
        let w = 1.3;
        let cold = vibrational_thermo(&[w], 1e-3).unwrap();
        assert!((cold.u - w / 2.0).abs() < 1e-12);
        assert!(cold.c_v < 1e-12 && cold.s < 1e-12);
        let hot = vibrational_thermo(&[w], 1e4).unwrap();
        assert!((hot.c_v - 1.0).abs() < 1e-6);
        assert!(vibrational_thermo(&[0.0], 1.0).is_err());
    }

    #[test]
    fn partitions_validate() {
        assert!(RegionPartition::new(vec![0..2, 3..4], 1.0, 4).is_err());
        assert!(RegionPartition::uniform(6, 4, 1.0).is_err());
        assert_eq!(RegionPartition::uniform(8, 2, 1.0).unwrap().counts(), vec![4, 4]);
    }

    #[test]
    fn static_profile_has_no_speed() {
        let p = RegionPartition::uniform(4, 4, 1.0).unwrap();
        assert!(wave_speed(&vec![vec![1.0; 4]; 5], &p, 0.1, 1e-9).is_err());
    }
}
