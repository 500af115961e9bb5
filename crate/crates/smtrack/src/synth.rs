//! Seeded synthetic tracking scenes with exact ground truth: scripted
//! motion, occlusion events, a detector-noise model, and optional rendered
//! frames so the spiking detector can run end to end on images.

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::mot::{Sequence, SequenceRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::path::Path;

/// Per-object motion script; positions are analytic in the frame index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionScript {
    Linear { vx: f64, vy: f64 },
    /// Linear drift along x with a sine sweep on y.
    Sinusoidal { vx: f64, amp: f64, period: f64 },
    /// Alternating movement and standstill.
    StopGo { vx: f64, vy: f64, move_frames: u32, stop_frames: u32 },
}

impl MotionScript {
    /// Displacement after `t` frames (t = 0 at the first frame).
    pub fn displacement(&self, t: u32) -> (f64, f64) {
        match *self {
            MotionScript::Linear { vx, vy } => (vx * t as f64, vy * t as f64),
            MotionScript::Sinusoidal { vx, amp, period } => (
                vx * t as f64,
                amp * (2.0 * std::f64::consts::PI * t as f64 / period).sin(),
            ),
            MotionScript::StopGo {
                vx,
                vy,
                move_frames,
                stop_frames,
            } => {
                let cycle = move_frames + stop_frames;
                let full = (t / cycle) as f64 * move_frames as f64;
                let rem = (t % cycle).min(move_frames) as f64;
                let moved = full + rem;
                (vx * moved, vy * moved)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectSpec {
    pub start: (f64, f64),
    pub size: (f64, f64),
    pub motion: MotionScript,
}

impl ObjectSpec {
    pub fn bbox_at(&self, t: u32) -> BBox {
        let (dx, dy) = self.motion.displacement(t);
        BBox {
            cx: self.start.0 + dx,
            cy: self.start.1 + dy,
            w: self.size.0,
            h: self.size.1,
        }
    }
}

/// What the simulated detector does while one object occludes another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcclusionMode {
    /// The occluded object's detection disappears.
    Suppress,
    /// One merged detection covering both replaces the pair.
    Merge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusionEvent {
    pub occluder: usize,
    pub occluded: usize,
    /// Inclusive 1-based frame range.
    pub frames: (u32, u32),
    pub mode: OcclusionMode,
}

/// Detector simulation parameters. With everything zero and a score mean
/// of 1 the detection file equals the ground truth with id -1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorNoise {
    /// Std-dev of the additive center jitter, pixels.
    pub jitter_sigma: f64,
    /// Per-box drop probability.
    pub drop_rate: f64,
    /// Per-object per-frame probability of an overlapping duplicate.
    pub fp_rate: f64,
    pub score_mean: f64,
    pub score_sigma: f64,
}

impl DetectorNoise {
    pub fn none() -> Self {
        DetectorNoise {
            jitter_sigma: 0.0,
            drop_rate: 0.0,
            fp_rate: 0.0,
            score_mean: 1.0,
            score_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub width: u32,
    pub height: u32,
    pub num_frames: u32,
    pub objects: Vec<ObjectSpec>,
    pub occlusions: Vec<OcclusionEvent>,
    pub noise: DetectorNoise,
    pub seed: u64,
}

impl SyntheticScene {
    /// A reproducible scene with mixed motion kinds, auto-fitted so no
    /// object ever leaves the canvas.
    pub fn random(seed: u64, num_objects: usize, num_frames: u32, width: u32, height: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut objects = Vec::with_capacity(num_objects);
        for k in 0..num_objects {
            let w = rng.random_range(14.0..30.0);
            let h = rng.random_range(14.0..30.0);
            let margin_x = w / 2.0 + 2.0;
            let margin_y = h / 2.0 + 2.0;
            let x0 = rng.random_range(margin_x..(width as f64 - margin_x));
            let y0 = rng.random_range(margin_y..(height as f64 - margin_y));
            let fit = |v: f64, p0: f64, lo: f64, hi: f64, frames: f64| -> f64 {
                let mut v = v;
                if p0 + v * frames > hi {
                    v = (hi - p0) / frames;
                }
                if p0 + v * frames < lo {
                    v = (lo - p0) / frames;
                }
                v
            };
            let t = num_frames.max(2) as f64 - 1.0;
            let vx = fit(
                rng.random_range(-2.0..2.0),
                x0,
                margin_x,
                width as f64 - margin_x,
                t,
            );
            let vy = fit(
                rng.random_range(-1.0..1.0),
                y0,
                margin_y,
                height as f64 - margin_y,
                t,
            );
            let motion = match k % 3 {
                0 => MotionScript::Linear { vx, vy },
                1 => {
                    let head_room = (y0 - margin_y).min(height as f64 - margin_y - y0);
                    MotionScript::Sinusoidal {
                        vx,
                        amp: head_room.clamp(0.0, 8.0),
                        period: rng.random_range(16.0..40.0),
                    }
                }
                _ => MotionScript::StopGo {
                    vx,
                    vy,
                    move_frames: rng.random_range(4..10),
                    stop_frames: rng.random_range(2..8),
                },
            };
            objects.push(ObjectSpec {
                start: (x0, y0),
                size: (w, h),
                motion,
            });
        }
        SyntheticScene {
            width,
            height,
            num_frames,
            objects,
            occlusions: vec![],
            noise: DetectorNoise::none(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.objects.is_empty() || self.num_frames == 0 {
            return Err(Error::Validation("scene needs objects and frames".into()));
        }
        for rate in [self.noise.drop_rate, self.noise.fp_rate] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Validation(format!("rate {rate} outside [0, 1]")));
            }
        }
        for occ in &self.occlusions {
            if occ.occluder >= self.objects.len() || occ.occluded >= self.objects.len() {
                return Err(Error::Validation("occlusion references unknown object".into()));
            }
        }
        for (k, obj) in self.objects.iter().enumerate() {
            for t in 0..self.num_frames {
                let b = obj.bbox_at(t);
                let (x1, y1, x2, y2) = b.corners();
                if x1 < 0.0 || y1 < 0.0 || x2 > self.width as f64 || y2 > self.height as f64 {
                    return Err(Error::Validation(format!(
                        "object {k} leaves the canvas at frame {} ({b:?})",
                        t + 1
                    )));
                }
            }
        }
        Ok(())
    }

    fn occlusion_hiding(&self, frame: u32, object: usize) -> Option<&OcclusionEvent> {
        self.occlusions
            .iter()
            .find(|o| o.occluded == object && frame >= o.frames.0 && frame <= o.frames.1)
    }
}

/// Generate ground truth and simulated detections. Deterministic per seed;
/// identical scenes produce byte-identical files.
pub fn gen_synthetic(scene: &SyntheticScene) -> Result<(Sequence, Sequence)> {
    scene.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed ^ 0x5eed_de7e_c70a_11ed);
    let jitter = Normal::new(0.0, scene.noise.jitter_sigma.max(1e-12)).unwrap();
    let score_noise = Normal::new(0.0, scene.noise.score_sigma.max(1e-12)).unwrap();

    let mut gt = Vec::new();
    let mut det = Vec::new();
    for f in 1..=scene.num_frames {
        let t = f - 1;
        for (k, obj) in scene.objects.iter().enumerate() {
            let b = obj.bbox_at(t);
            gt.push(SequenceRecord::from_parts(f, k as i64 + 1, &b, 1.0));
        }
        for (k, obj) in scene.objects.iter().enumerate() {
            let b = obj.bbox_at(t);
            if scene.occlusion_hiding(f, k).is_some() {
                continue;
            }
            let merged_with = scene.occlusions.iter().find(|o| {
                o.occluder == k
                    && o.mode == OcclusionMode::Merge
                    && f >= o.frames.0
                    && f <= o.frames.1
            });
            let b = match merged_with {
                Some(o) => union_box(&b, &scene.objects[o.occluded].bbox_at(t)),
                None => b,
            };
            if scene.noise.drop_rate > 0.0 && rng.random_bool(scene.noise.drop_rate) {
                continue;
            }
            let noisy = if scene.noise.jitter_sigma > 0.0 {
                BBox {
                    cx: b.cx + jitter.sample(&mut rng),
                    cy: b.cy + jitter.sample(&mut rng),
                    w: (b.w + 0.5 * jitter.sample(&mut rng)).max(2.0),
                    h: (b.h + 0.5 * jitter.sample(&mut rng)).max(2.0),
                }
            } else {
                b
            };
            let score = if scene.noise.score_sigma > 0.0 {
                (scene.noise.score_mean + score_noise.sample(&mut rng)).clamp(0.05, 1.0)
            } else {
                scene.noise.score_mean
            };
            det.push(SequenceRecord::from_parts(f, -1, &noisy, score));

            if scene.noise.fp_rate > 0.0 && rng.random_bool(scene.noise.fp_rate) {
                // overlapping duplicate: the offset keeps IoU with the true
                // box around 0.55, below the NMS threshold but above the
                // spawn-overlap gate
                let sx = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let sy = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let dup = BBox {
                    cx: noisy.cx + sx * 0.15 * noisy.w,
                    cy: noisy.cy + sy * 0.15 * noisy.h,
                    w: noisy.w,
                    h: noisy.h,
                };
                let dup_score = (0.9 * score).clamp(0.05, 1.0);
                det.push(SequenceRecord::from_parts(f, -1, &dup, dup_score));
            }
        }
    }
    Ok((Sequence::new(gt), Sequence::new(det)))
}

fn union_box(a: &BBox, b: &BBox) -> BBox {
    let (ax1, ay1, ax2, ay2) = a.corners();
    let (bx1, by1, bx2, by2) = b.corners();
    let x1 = ax1.min(bx1);
    let y1 = ay1.min(by1);
    let x2 = ax2.max(bx2);
    let y2 = ay2.max(by2);
    BBox {
        cx: (x1 + x2) / 2.0,
        cy: (y1 + y2) / 2.0,
        w: x2 - x1,
        h: y2 - y1,
    }
}

/// Two same-size objects crossing paths. Mid-crossing the weaker object's
/// detection overlaps the stronger one hard enough that NMS at 0.7
/// suppresses it, so its only evidence there is the suppressed detection.
/// Outside the window both are clean high-confidence detections.
pub fn crossing_occlusion_scene() -> (Sequence, Sequence) {
    let frames = 60u32;
    let size = 12.0;
    let a = ObjectSpec {
        start: (20.0, 40.0),
        size: (size, size),
        motion: MotionScript::Linear { vx: 1.0, vy: 0.0 },
    };
    let b = ObjectSpec {
        start: (80.0, 40.0),
        size: (size, size),
        motion: MotionScript::Linear { vx: -1.0, vy: 0.0 },
    };
    let mut gt = Vec::new();
    let mut det = Vec::new();
    for f in 1..=frames {
        let t = f - 1;
        let ba = a.bbox_at(t);
        let bb = b.bbox_at(t);
        gt.push(SequenceRecord::from_parts(f, 1, &ba, 1.0));
        gt.push(SequenceRecord::from_parts(f, 2, &bb, 1.0));
        det.push(SequenceRecord::from_parts(f, -1, &ba, 0.9));
        det.push(SequenceRecord::from_parts(f, -1, &bb, 0.8));
    }
    (Sequence::new(gt), Sequence::new(det))
}

/// Color palette for rendered identities.
fn tint(id: usize) -> [f32; 3] {
    const PALETTE: [[f32; 3]; 6] = [
        [1.0, 0.55, 0.2],
        [0.3, 0.9, 0.4],
        [0.35, 0.55, 1.0],
        [1.0, 0.35, 0.6],
        [0.9, 0.9, 0.3],
        [0.4, 0.9, 0.9],
    ];
    PALETTE[id % PALETTE.len()]
}

/// Rasterize the scene as soft elliptic blobs, one PNG per frame named
/// `000001.png`, `000002.png`, ...
pub fn render_frames(scene: &SyntheticScene, dir: impl AsRef<Path>) -> Result<()> {
    scene.validate()?;
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let (w, h) = (scene.width, scene.height);
    for f in 1..=scene.num_frames {
        let mut img = image::RgbImage::from_pixel(w, h, image::Rgb([16, 16, 20]));
        for (k, obj) in scene.objects.iter().enumerate() {
            let b = obj.bbox_at(f - 1);
            let color = tint(k);
            let (x1, y1, x2, y2) = b.corners();
            for py in (y1.floor().max(0.0) as u32)..(y2.ceil().min(h as f64) as u32) {
                for px in (x1.floor().max(0.0) as u32)..(x2.ceil().min(w as f64) as u32) {
                    let nx = (px as f64 + 0.5 - b.cx) / (b.w / 2.0);
                    let ny = (py as f64 + 0.5 - b.cy) / (b.h / 2.0);
                    let d2 = nx * nx + ny * ny;
                    if d2 >= 1.0 {
                        continue;
                    }
                    let intensity = (1.0 - d2) as f32;
                    let px_ref = img.get_pixel_mut(px, py);
                    for c in 0..3 {
                        let base = px_ref.0[c] as f32 / 255.0;
                        let v = (base + intensity * color[c]).min(1.0);
                        px_ref.0[c] = (v * 255.0) as u8;
                    }
                }
            }
        }
        img.save(dir.join(format!("{f:06}.png")))?;
    }
    Ok(())
}
