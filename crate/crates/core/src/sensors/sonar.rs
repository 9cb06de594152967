//! Echo sounder, multibeam and sidescan.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{intensity, CastContext, EchoReturn, MultibeamScan, SensorError, SensorPose, SidescanLine};
use crate::accel::Hit;
use crate::geom::Vec3;
use crate::rng::SimRng;
use crate::world::SemanticLabel;

/// Single beam along the sensor +x axis.
pub fn echo_sounder(
    ctx: &CastContext,
    pose: &SensorPose,
    max_range: f64,
    semantic: bool,
    speckle: Option<&mut SimRng>,
) -> Result<EchoReturn, SensorError> {
    let dir = pose.world_dir(&Vec3::x());
    Ok(match ctx.cast(pose.origin, dir, max_range)? {
        Some(hit) => {
            let mut i = intensity(&hit, &dir);
            if let Some(r) = speckle {
                i = (i * r.rayleigh_unit_mean()).clamp(0.0, 1.0);
            }
            EchoReturn { range: hit.range, intensity: i, label: semantic.then_some(hit.label) }
        }
        None => EchoReturn { range: f64::INFINITY, intensity: 0.0, label: None },
    })
}

/// Beam angles spread evenly over `aperture`, ends included.
pub fn fan_angles(n: usize, centre: f64, aperture: f64) -> Vec<f64> {
    if n == 1 {
        return vec![centre];
    }
    (0..n).map(|i| centre - 0.5 * aperture + aperture * i as f64 / (n - 1) as f64).collect()
}

/// Fan in the sensor x-y plane; mount pitched down for a bathymetric swath.
pub fn multibeam_scan(
    ctx: &CastContext,
    pose: &SensorPose,
    n_beams: usize,
    aperture: f64,
    max_range: f64,
    semantic: bool,
    speckle: Option<&mut SimRng>,
) -> Result<MultibeamScan, SensorError> {
    let angles = fan_angles(n_beams, 0.0, aperture);
    let hits: Vec<(Option<Hit>, Vec3)> = angles
        .par_iter()
        .map(|b| {
            let dir = pose.world_dir(&Vec3::new(b.cos(), b.sin(), 0.0));
            ctx.cast(pose.origin, dir, max_range).map(|h| (h, dir))
        })
        .collect::<Result<_, _>>()?;
    let mut ranges = Vec::with_capacity(n_beams);
    let mut intensities = Vec::with_capacity(n_beams);
    let mut labels = Vec::with_capacity(n_beams);
    for (h, dir) in &hits {
        match h {
            Some(h) => {
                ranges.push(h.range);
                intensities.push(intensity(h, dir));
                labels.push(Some(h.label));
            }
            None => {
                ranges.push(f64::INFINITY);
                intensities.push(0.0);
                labels.push(None);
            }
        }
    }
    if let Some(r) = speckle {
        for i in intensities.iter_mut() {
            *i = (*i * r.rayleigh_unit_mean()).clamp(0.0, 1.0);
        }
    }
    Ok(MultibeamScan { beam_angles: angles, ranges, intensities, labels: semantic.then_some(labels) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidescanGeometry {
    pub n_bins: usize,
    pub tilt: f64,
    pub vertical_aperture: f64,
    pub max_range: f64,
    pub rays_per_bin: usize,
}

impl SidescanGeometry {
    pub fn bin_size(&self) -> f64 {
        self.max_range / self.n_bins as f64
    }
}

struct Echo {
    range: f64,
    energy: f64,
    label: SemanticLabel,
}

struct SideBins {
    energy: Vec<f64>,
    labels: Vec<BTreeMap<SemanticLabel, f64>>,
}

impl SideBins {
    fn new(n: usize) -> Self {
        Self { energy: vec![0.0; n], labels: vec![BTreeMap::new(); n] }
    }

    fn deposit(&mut self, bin: usize, e: f64, label: SemanticLabel) {
        if bin < self.energy.len() && e > 0.0 {
            self.energy[bin] += e;
            *self.labels[bin].entry(label).or_insert(0.0) += e;
        }
    }

    /// Spread `e` uniformly over the range interval `[a, b]`.
    fn spread(&mut self, a: f64, b: f64, e: f64, label: SemanticLabel, bin_size: f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let first = (lo / bin_size) as usize;
        let last = (hi / bin_size) as usize;
        if first == last || hi - lo < 1e-12 {
            self.deposit(first, e, label);
            return;
        }
        for bin in first..=last {
            let s = (bin as f64 * bin_size).max(lo);
            let t = ((bin + 1) as f64 * bin_size).min(hi);
            if t > s {
                self.deposit(bin, e * (t - s) / (hi - lo), label);
            }
        }
    }

    fn majority_labels(&self) -> Vec<Option<SemanticLabel>> {
        self.labels
            .iter()
            .map(|m| {
                m.iter()
                    .fold(None, |best: Option<(SemanticLabel, f64)>, (l, e)| match best {
                        Some((_, be)) if be >= *e => best,
                        _ => Some((*l, *e)),
                    })
                    .map(|(l, _)| l)
            })
            .collect()
    }
}

/// Accumulate one side. Rays are ordered by depression angle; each carries
/// its intensity as energy, half towards each neighbour. Across a
/// continuous surface that half is smeared over the range interval up to the
/// midpoint between the two hits. At the edge of a continuous run the
/// interval is mirrored from the linked side; an isolated hit keeps its
/// energy in its own bin.
fn accumulate(echoes: &[Option<Echo>], n_bins: usize, bin_size: f64) -> SideBins {
    let mut bins = SideBins::new(n_bins);
    let linked = |a: &Echo, b: &Echo| a.label == b.label && (a.range - b.range).abs() <= 2.0 * bin_size;
    for (i, e) in echoes.iter().enumerate() {
        let Some(e) = e else { continue };
        let own = (e.range / bin_size) as usize;
        let prev = i.checked_sub(1).and_then(|j| echoes[j].as_ref());
        let next = echoes.get(i + 1).and_then(|x| x.as_ref());
        let prev = prev.filter(|nb| linked(e, nb));
        let next = next.filter(|nb| linked(e, nb));
        for (nb, other) in [(prev, next), (next, prev)] {
            match (nb, other) {
                (Some(nb), _) => bins.spread(e.range, 0.5 * (e.range + nb.range), 0.5 * e.energy, e.label, bin_size),
                // Edge of a continuous run: mirror the half-interval of the linked side.
                (None, Some(o)) => bins.spread(e.range, 1.5 * e.range - 0.5 * o.range, 0.5 * e.energy, e.label, bin_size),
                (None, None) => bins.deposit(own, 0.5 * e.energy, e.label),
            }
        }
    }
    bins
}

/// One sidescan ping: port and starboard intensity bins, normalised by the
/// brightest bin of the ping.
pub fn sidescan_line(
    ctx: &CastContext,
    pose: &SensorPose,
    geom: &SidescanGeometry,
    semantic: bool,
    speckle: Option<&mut SimRng>,
) -> Result<SidescanLine, SensorError> {
    let n_rays = geom.n_bins * geom.rays_per_bin;
    // Rays at the centres of equal angular cells, so the fan covers the
    // aperture exactly whatever the ray count.
    let cell = geom.vertical_aperture / n_rays as f64;
    let lo = geom.tilt - 0.5 * geom.vertical_aperture;
    let angles: Vec<f64> = (0..n_rays).map(|i| lo + (i as f64 + 0.5) * cell).collect();
    let bin_size = geom.bin_size();
    let mut sides = Vec::with_capacity(2);
    for side in [-1.0, 1.0] {
        let echoes: Vec<Option<Echo>> = angles
            .par_iter()
            .map(|phi| {
                let dir = pose.world_dir(&Vec3::new(0.0, side * phi.cos(), phi.sin()));
                Ok(ctx.cast(pose.origin, dir, geom.max_range)?.map(|h| Echo {
                    range: h.range,
                    energy: intensity(&h, &dir),
                    label: h.label,
                }))
            })
            .collect::<Result<_, SensorError>>()?;
        sides.push(accumulate(&echoes, geom.n_bins, bin_size));
    }
    let starboard = sides.pop().expect("two sides");
    let port = sides.pop().expect("two sides");
    let mut p = port.energy.clone();
    let mut s = starboard.energy.clone();
    if let Some(r) = speckle {
        for v in p.iter_mut().chain(s.iter_mut()) {
            *v *= r.rayleigh_unit_mean();
        }
    }
    let peak = p.iter().chain(&s).cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        for v in p.iter_mut().chain(s.iter_mut()) {
            *v /= peak;
        }
    }
    Ok(SidescanLine {
        bin_size,
        port: p,
        starboard: s,
        port_labels: semantic.then(|| port.majority_labels()),
        starboard_labels: semantic.then(|| starboard.majority_labels()),
    })
}

/// Binary PGM waterfall, newest ping last. Port is mirrored so range grows
/// outwards from the centre column.
pub fn waterfall_pgm(lines: &[SidescanLine]) -> Vec<u8> {
    let width = lines.iter().map(|l| l.port.len() + l.starboard.len()).max().unwrap_or(0);
    let mut out = format!("P5\n{} {}\n255\n", width, lines.len()).into_bytes();
    for l in lines {
        let row: Vec<u8> = l
            .port
            .iter()
            .rev()
            .chain(&l.starboard)
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .chain(std::iter::repeat(0))
            .take(width)
            .collect();
        out.extend(row);
    }
    out
}
