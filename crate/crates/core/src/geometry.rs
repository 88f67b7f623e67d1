//! Waveguide geometry and exact complex channel gains.
//!
//! The transmit waveguide runs along `y = 0`, the receive waveguide along
//! `y = d`, both at height `a` and both centred on the origin. An element at
//! `ℓ` on either line radiates a spherical wave whose phase also carries the
//! in-waveguide propagation term `κ · i_ref · ℓ`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Relative slack on the minimum-spacing check. Template pitches can equal
/// `Δ` exactly and the subtraction of neighbouring locations rounds.
const SPACING_SLACK: f64 = 1e-9;
/// Absolute slack (m) on the waveguide span check.
const SPAN_SLACK: f64 = 1e-9;
const SINGULAR_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Vec3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// One Monte-Carlo drop: a ground user and a target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub user: Vec3,
    pub target: Vec3,
}

impl Scene {
    pub fn new(user: Vec3, target: Vec3) -> Self {
        debug_assert!(user.z == 0.0, "users stand on the ground plane");
        Self { user, target }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveguideRole {
    Transmit,
    Receive,
}

impl fmt::Display for WaveguideRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WaveguideRole::Transmit => "transmit",
            WaveguideRole::Receive => "receive",
        })
    }
}

/// Ordered pinching locations on one waveguide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinchingLayout {
    pub role: WaveguideRole,
    pub locations: Vec<f64>,
}

impl PinchingLayout {
    pub fn new(role: WaveguideRole, locations: Vec<f64>) -> Self {
        Self { role, locations }
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    /// Checks ordering, minimum spacing and span containment.
    pub fn check_feasible(&self, cfg: &SystemConfig) -> std::result::Result<(), String> {
        let (lo, hi) = cfg.span(self.role);
        for (i, &l) in self.locations.iter().enumerate() {
            if !l.is_finite() {
                return Err(format!("location {i} is not finite"));
            }
            if l < lo - SPAN_SLACK || l > hi + SPAN_SLACK {
                return Err(format!("location {i} = {l} outside [{lo}, {hi}]"));
            }
        }
        let min_gap = cfg.min_spacing * (1.0 - SPACING_SLACK);
        for (i, pair) in self.locations.windows(2).enumerate() {
            let gap = pair[1] - pair[0];
            if gap < min_gap {
                return Err(format!(
                    "gap {gap:.6e} between elements {i} and {} is below {:.6e}",
                    i + 1,
                    cfg.min_spacing
                ));
            }
        }
        Ok(())
    }

    pub fn is_feasible(&self, cfg: &SystemConfig) -> bool {
        self.check_feasible(cfg).is_ok()
    }
}

/// 3-D coordinate of an element at `location` on the given waveguide.
pub fn element_position(role: WaveguideRole, location: f64, cfg: &SystemConfig) -> Vec3 {
    Vec3::new(location, cfg.waveguide_y(role), cfg.altitude)
}

pub fn distance_to_element(
    role: WaveguideRole,
    location: f64,
    point: &Vec3,
    cfg: &SystemConfig,
) -> Result<f64> {
    let distance = element_position(role, location, cfg).distance(point);
    if distance < SINGULAR_DISTANCE {
        return Err(Error::SingularGeometry { role, location });
    }
    Ok(distance)
}

/// Gain through one element, `β e^{-jκ(D + i_ref ℓ)} / (s · D)` where `s` is
/// `√N` on the transmit side (equal power split) and 1 on the receive side.
pub fn element_gain(
    role: WaveguideRole,
    location: f64,
    point: &Vec3,
    cfg: &SystemConfig,
) -> Result<Complex64> {
    let distance = distance_to_element(role, location, point, cfg)?;
    let scale = match role {
        WaveguideRole::Transmit => (cfg.n_tx as f64).sqrt(),
        WaveguideRole::Receive => 1.0,
    };
    let phase = -cfg.wavenumber() * (distance + cfg.refractive_index * location);
    Ok(Complex64::from_polar(cfg.beta() / (scale * distance), phase))
}

pub fn element_gain_tx(location: f64, point: &Vec3, cfg: &SystemConfig) -> Result<Complex64> {
    element_gain(WaveguideRole::Transmit, location, point, cfg)
}

pub fn element_gain_rx(location: f64, point: &Vec3, cfg: &SystemConfig) -> Result<Complex64> {
    element_gain(WaveguideRole::Receive, location, point, cfg)
}

/// Coherent sum of the element gains of a layout toward `point`.
pub fn aggregate_gain(layout: &PinchingLayout, point: &Vec3, cfg: &SystemConfig) -> Result<Complex64> {
    if layout.is_empty() {
        return Err(Error::EmptyLayout { role: layout.role });
    }
    layout
        .locations
        .iter()
        .try_fold(Complex64::new(0.0, 0.0), |acc, &l| {
            Ok(acc + element_gain(layout.role, l, point, cfg)?)
        })
}

/// Transmit-target-receive gain `G_tx · G_rx`.
pub fn cascade_gain(
    tx: &PinchingLayout,
    rx: &PinchingLayout,
    point: &Vec3,
    cfg: &SystemConfig,
) -> Result<Complex64> {
    debug_assert_eq!(tx.role, WaveguideRole::Transmit);
    debug_assert_eq!(rx.role, WaveguideRole::Receive);
    Ok(aggregate_gain(tx, point, cfg)? * aggregate_gain(rx, point, cfg)?)
}

/// Positions of a symmetric cluster, `center + (m - (count+1)/2) · pitch` for
/// `m = 1..=count`.
pub fn cluster_positions(center: f64, count: usize, pitch: f64) -> Vec<f64> {
    let mid = (count as f64 + 1.0) / 2.0;
    (1..=count)
        .map(|m| center + (m as f64 - mid) * pitch)
        .collect()
}

#[derive(Debug, Clone)]
struct Group {
    positions: Vec<f64>,
}

impl Group {
    fn first(&self) -> f64 {
        self.positions[0]
    }

    fn last(&self) -> f64 {
        *self.positions.last().unwrap()
    }

    fn center(&self) -> f64 {
        self.positions.iter().sum::<f64>() / self.positions.len() as f64
    }

    fn chain(center: f64, count: usize, pitch: f64) -> Self {
        Self {
            positions: cluster_positions(center, count, pitch),
        }
    }

    fn min_gap(&self) -> f64 {
        self.positions
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Rigid shift into `[lo, hi]`; the caller guarantees the extent fits.
    fn shift_into(&mut self, lo: f64, hi: f64) {
        let shift = if self.first() < lo {
            lo - self.first()
        } else if self.last() > hi {
            hi - self.last()
        } else {
            return;
        };
        for p in &mut self.positions {
            *p += shift;
        }
        // Pin the touching edge exactly to the span boundary.
        if shift > 0.0 {
            self.positions[0] = lo;
        } else {
            *self.positions.last_mut().unwrap() = hi;
        }
    }
}

/// Maps an ordered candidate list onto the feasible set.
///
/// Rules, applied in order until the layout is feasible:
/// 1. a feasible input is returned unchanged;
/// 2. elements closer than one cluster pitch form a group; a group whose
///    internal gaps violate `Δ` is rebuilt as a pitch-spaced chain around its
///    mean;
/// 3. each group is rigidly shifted into the span;
/// 4. neighbouring groups closer than `Δ` merge into one pitch-spaced chain at
///    their size-weighted mass center, then go back to 3.
pub fn project_feasible(layout: &PinchingLayout, cfg: &SystemConfig) -> Result<PinchingLayout> {
    let role = layout.role;
    if layout.is_empty() {
        return Err(Error::EmptyLayout { role });
    }
    let mut sorted = layout.locations.clone();
    sorted.sort_by(f64::total_cmp);
    let candidate = PinchingLayout::new(role, sorted);
    if candidate.is_feasible(cfg) {
        return Ok(candidate);
    }

    let (lo, hi) = cfg.span(role);
    let length = hi - lo;
    let count = candidate.len();
    let min_required = (count as f64 - 1.0) * cfg.min_spacing;
    if min_required > length * (1.0 + SPACING_SLACK) {
        return Err(Error::WaveguideTooShort {
            role,
            count,
            required: min_required,
            length,
        });
    }
    let min_gap = cfg.min_spacing * (1.0 - SPACING_SLACK);
    // A chain of n elements must fit in the span; squeeze toward Δ if needed.
    let chain_pitch = |n: usize| {
        if n < 2 {
            cfg.cluster_pitch()
        } else {
            cfg.cluster_pitch()
                .min(length / (n as f64 - 1.0))
                .max(cfg.min_spacing)
        }
    };

    let join_gap = cfg.cluster_pitch().max(cfg.min_spacing) * (1.0 + 1e-6);
    let mut groups: Vec<Group> = Vec::new();
    for &p in &candidate.locations {
        match groups.last_mut() {
            Some(g) if p - g.last() <= join_gap => g.positions.push(p),
            _ => groups.push(Group { positions: vec![p] }),
        }
    }
    for g in &mut groups {
        if g.min_gap() < min_gap || g.last() - g.first() > length {
            let n = g.positions.len();
            *g = Group::chain(g.center(), n, chain_pitch(n));
        }
    }

    loop {
        for g in &mut groups {
            g.shift_into(lo, hi);
        }
        let clash = groups
            .windows(2)
            .position(|w| w[1].first() - w[0].last() < min_gap);
        let Some(i) = clash else { break };
        let right = groups.remove(i + 1);
        let left = &groups[i];
        let (nl, nr) = (left.positions.len(), right.positions.len());
        let center = (left.center() * nl as f64 + right.center() * nr as f64) / (nl + nr) as f64;
        groups[i] = Group::chain(center, nl + nr, chain_pitch(nl + nr));
    }

    let projected = PinchingLayout::new(
        role,
        groups.into_iter().flat_map(|g| g.positions).collect(),
    );
    debug_assert!(
        projected.is_feasible(cfg),
        "{:?}",
        projected.check_feasible(cfg)
    );
    Ok(projected)
}
