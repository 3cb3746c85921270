//! Receive-array layouts, imaging grids, steering and delay laws.
//!
//! All arrays lie in the `z = 0` plane and are centred so that the URA
//! footprint of an `M x N` layout spans `±(M-1)s/2` by `±(N-1)s/2`.
//! Angles are radians inside the library; degree conversion happens at the
//! I/O boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ArrayKind {
    /// Full `M x N` uniform rectangular array.
    Ura,
    /// The four edge rows/columns of the URA footprint.
    RectPerimeter,
    /// L at the edges: top row plus right column.
    Elsa,
    /// L with its corner at the origin.
    Clsa,
    /// Cross with arms of `M` and `N` elements.
    Csa,
    /// Cross with arms of `2M` and `2N` elements.
    Dcsa,
}

impl ArrayKind {
    pub const ALL: [ArrayKind; 6] = [
        ArrayKind::Ura,
        ArrayKind::RectPerimeter,
        ArrayKind::Elsa,
        ArrayKind::Clsa,
        ArrayKind::Csa,
        ArrayKind::Dcsa,
    ];

    pub fn code(self) -> u8 {
        match self {
            ArrayKind::Ura => 0,
            ArrayKind::RectPerimeter => 1,
            ArrayKind::Elsa => 2,
            ArrayKind::Clsa => 3,
            ArrayKind::Csa => 4,
            ArrayKind::Dcsa => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            ArrayKind::Ura => "URA",
            ArrayKind::RectPerimeter => "RECT_PERIMETER",
            ArrayKind::Elsa => "ELSA",
            ArrayKind::Clsa => "CLSA",
            ArrayKind::Csa => "CSA",
            ArrayKind::Dcsa => "DCSA",
        }
    }

    /// Number of distinct sensors [`build_array`] produces.
    pub fn element_count(self, m: usize, n: usize) -> usize {
        match self {
            ArrayKind::Ura => m * n,
            ArrayKind::RectPerimeter => 2 * m + 2 * n - 4,
            ArrayKind::Elsa | ArrayKind::Clsa | ArrayKind::Csa => m + n - 1,
            ArrayKind::Dcsa => 2 * m + 2 * n - 1,
        }
    }
}

impl std::fmt::Display for ArrayKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ArrayKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.to_ascii_uppercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == upper || (upper == "RECT" && *k == ArrayKind::RectPerimeter))
            .ok_or_else(|| Error::InvalidGeometry(format!("unknown array kind {s:?}")))
    }
}

/// One receive sensor at `(x, y, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorElement<T> {
    /// Column index, 1-based.
    pub index_m: u32,
    /// Row index, 1-based.
    pub index_n: u32,
    pub x: T,
    pub y: T,
}

/// Named linear sub-array of a geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Edge {
    /// Bottom row (`y = y_min`).
    H1,
    /// Top row (`y = y_max`).
    H2,
    /// Left column (`x = x_min`).
    V1,
    /// Right column (`x = x_max`).
    V2,
    /// Horizontal arm of a cross or centred L.
    HArm,
    /// Vertical arm of a cross or centred L.
    VArm,
}

impl Edge {
    pub fn is_horizontal(self) -> bool {
        matches!(self, Edge::H1 | Edge::H2 | Edge::HArm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subarray {
    pub edge: Edge,
    /// Indices into [`ArrayGeometry::elements`], ordered by position along the line.
    pub members: Vec<usize>,
}

/// Horizontal and vertical line arrays combined by the product beamformer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthogonalPair<'a> {
    pub horizontal: &'a [usize],
    pub vertical: &'a [usize],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry<T> {
    kind: ArrayKind,
    m: usize,
    n: usize,
    spacing: T,
    elements: Vec<SensorElement<T>>,
    subarrays: Vec<Subarray>,
}

fn check_dims<T: Real>(m: usize, n: usize, spacing: T) -> Result<()> {
    if m < 2 || n < 2 {
        return Err(Error::InvalidGeometry(format!(
            "array needs at least 2 x 2 elements, got {m} x {n}"
        )));
    }
    if !(spacing > T::zero()) || !spacing.is_finite() {
        return Err(Error::InvalidGeometry(format!(
            "element spacing must be positive, got {spacing}"
        )));
    }
    Ok(())
}

/// Builds one of the supported array layouts.
pub fn build_array<T: Real>(kind: ArrayKind, m: usize, n: usize, spacing: T) -> Result<ArrayGeometry<T>> {
    check_dims(m, n, spacing)?;
    let half_m = T::lit((m - 1) as f64 / 2.0);
    let half_n = T::lit((n - 1) as f64 / 2.0);
    let at = |i: u32, j: u32, x: T, y: T| SensorElement {
        index_m: i,
        index_n: j,
        x,
        y,
    };
    let (mu, nu) = (m as u32, n as u32);
    let mut elements = Vec::with_capacity(kind.element_count(m, n));

    match kind {
        ArrayKind::Ura | ArrayKind::RectPerimeter | ArrayKind::Elsa => {
            for j in 1..=nu {
                for i in 1..=mu {
                    let keep = match kind {
                        ArrayKind::Ura => true,
                        ArrayKind::RectPerimeter => i == 1 || i == mu || j == 1 || j == nu,
                        _ => i == mu || j == nu,
                    };
                    if keep {
                        let x = (T::lit((i - 1) as f64) - half_m) * spacing;
                        let y = (T::lit((j - 1) as f64) - half_n) * spacing;
                        elements.push(at(i, j, x, y));
                    }
                }
            }
        }
        ArrayKind::Clsa => {
            // ELSA translated so the shared corner sits on the origin.
            for j in 1..=nu {
                for i in 1..=mu {
                    if i == mu || j == nu {
                        let x = T::lit(i as f64 - m as f64) * spacing;
                        let y = T::lit(j as f64 - n as f64) * spacing;
                        elements.push(at(i, j, x, y));
                    }
                }
            }
        }
        ArrayKind::Csa | ArrayKind::Dcsa => {
            let (arm_m, arm_n) = if kind == ArrayKind::Csa { (mu, nu) } else { (2 * mu, 2 * nu) };
            let (mc, nc) = (arm_m / 2 + 1, arm_n / 2 + 1);
            for j in 1..=arm_n {
                for i in 1..=arm_m {
                    if i == mc || j == nc {
                        let x = T::lit(i as f64 - mc as f64) * spacing;
                        let y = T::lit(j as f64 - nc as f64) * spacing;
                        elements.push(at(i, j, x, y));
                    }
                }
            }
        }
    }
    ArrayGeometry::from_elements(kind, m, n, spacing, elements)
}

impl<T: Real> ArrayGeometry<T> {
    /// Assembles a geometry from an explicit element list, deriving the
    /// line sub-arrays from the element indices.
    pub fn from_elements(
        kind: ArrayKind,
        m: usize,
        n: usize,
        spacing: T,
        elements: Vec<SensorElement<T>>,
    ) -> Result<Self> {
        check_dims(m, n, spacing)?;
        if elements.is_empty() {
            return Err(Error::InvalidGeometry("geometry has no elements".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &elements {
            if !seen.insert((e.index_m, e.index_n)) {
                return Err(Error::InvalidGeometry(format!(
                    "duplicate element index ({}, {})",
                    e.index_m, e.index_n
                )));
            }
            if !e.x.is_finite() || !e.y.is_finite() {
                return Err(Error::InvalidGeometry("non-finite element position".into()));
            }
        }
        let mut by_pos: Vec<(T, T)> = elements.iter().map(|e| (e.x, e.y)).collect();
        by_pos.sort_by(|a, b| a.partial_cmp(b).expect("finite positions"));
        if by_pos.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidGeometry("two elements share a position".into()));
        }

        let select = |pred: &dyn Fn(&SensorElement<T>) -> bool, horizontal: bool| -> Vec<usize> {
            let mut idx: Vec<usize> = (0..elements.len()).filter(|&i| pred(&elements[i])).collect();
            idx.sort_by(|&a, &b| {
                let (ka, kb) = if horizontal {
                    (elements[a].x, elements[b].x)
                } else {
                    (elements[a].y, elements[b].y)
                };
                ka.partial_cmp(&kb).expect("finite positions")
            });
            idx
        };
        let (mu, nu) = (m as u32, n as u32);
        let mut subarrays = Vec::new();
        let mut push = |edge: Edge, members: Vec<usize>| {
            if members.len() >= 2 {
                subarrays.push(Subarray { edge, members });
            }
        };
        match kind {
            ArrayKind::Ura | ArrayKind::RectPerimeter => {
                push(Edge::H1, select(&|e| e.index_n == 1, true));
                push(Edge::H2, select(&|e| e.index_n == nu, true));
                push(Edge::V1, select(&|e| e.index_m == 1, false));
                push(Edge::V2, select(&|e| e.index_m == mu, false));
            }
            ArrayKind::Elsa => {
                push(Edge::H2, select(&|e| e.index_n == nu, true));
                push(Edge::V2, select(&|e| e.index_m == mu, false));
            }
            ArrayKind::Clsa | ArrayKind::Csa | ArrayKind::Dcsa => {
                let mode = |f: &dyn Fn(&SensorElement<T>) -> u32| {
                    let mut counts = std::collections::BTreeMap::new();
                    for e in &elements {
                        *counts.entry(f(e)).or_insert(0usize) += 1;
                    }
                    counts.into_iter().max_by_key(|&(k, c)| (c, std::cmp::Reverse(k))).map(|(k, _)| k)
                };
                let nc = mode(&|e| e.index_n).unwrap_or(0);
                let mc = mode(&|e| e.index_m).unwrap_or(0);
                push(Edge::HArm, select(&|e| e.index_n == nc, true));
                push(Edge::VArm, select(&|e| e.index_m == mc, false));
            }
        }
        Ok(Self {
            kind,
            m,
            n,
            spacing,
            elements,
            subarrays,
        })
    }

    pub fn kind(&self) -> ArrayKind {
        self.kind
    }

    /// Elements along x of the reference URA footprint.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Elements along y of the reference URA footprint.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn elements(&self) -> &[SensorElement<T>] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Sensor budget quoted for the layout; for the perimeter this counts
    /// every edge separately (`2M + 2N`) even though corners are shared.
    pub fn nominal_sensor_count(&self) -> usize {
        match self.kind {
            ArrayKind::RectPerimeter => 2 * (self.m + self.n),
            _ => self.elements.len(),
        }
    }

    /// Maximum extent of the array including one element pitch.
    pub fn aperture(&self) -> T {
        let (mut x0, mut x1, mut y0, mut y1) = (T::infinity(), T::neg_infinity(), T::infinity(), T::neg_infinity());
        for e in &self.elements {
            x0 = x0.min(e.x);
            x1 = x1.max(e.x);
            y0 = y0.min(e.y);
            y1 = y1.max(e.y);
        }
        (x1 - x0).max(y1 - y0) + self.spacing
    }

    pub fn subarrays(&self) -> &[Subarray] {
        &self.subarrays
    }

    pub fn subarray(&self, edge: Edge) -> Option<&[usize]> {
        self.subarrays
            .iter()
            .find(|s| s.edge == edge)
            .map(|s| s.members.as_slice())
    }

    /// Index of the element with grid indices `(m, n)`.
    pub fn position_of(&self, index_m: u32, index_n: u32) -> Option<usize> {
        self.elements
            .iter()
            .position(|e| e.index_m == index_m && e.index_n == index_n)
    }

    /// Whether every element of `other` coincides with an element of `self`.
    pub fn contains_positions(&self, other: &ArrayGeometry<T>) -> bool {
        let tol = self.spacing * T::lit(1e-9);
        other.elements.iter().all(|o| {
            self.elements
                .iter()
                .any(|e| (e.x - o.x).abs() <= tol && (e.y - o.y).abs() <= tol)
        })
    }

    /// The L-pair used to reconstruct voxels of `quadrant`.
    ///
    /// Four-edge layouts pick the edges whose coordinate signs match the
    /// quadrant (quadrant I uses H2 + V2). Layouts with a single horizontal
    /// and vertical line use that pair everywhere.
    pub fn orthogonal_pair(&self, quadrant: Quadrant) -> Result<OrthogonalPair<'_>> {
        let need = |edge: Edge| {
            self.subarray(edge).ok_or_else(|| {
                Error::InvalidGeometry(format!("{} geometry has no {edge:?} line array", self.kind))
            })
        };
        match self.kind {
            ArrayKind::Ura | ArrayKind::RectPerimeter => {
                let (h, v) = match quadrant {
                    Quadrant::I => (Edge::H2, Edge::V2),
                    Quadrant::II => (Edge::H2, Edge::V1),
                    Quadrant::III => (Edge::H1, Edge::V1),
                    Quadrant::IV => (Edge::H1, Edge::V2),
                };
                Ok(OrthogonalPair {
                    horizontal: need(h)?,
                    vertical: need(v)?,
                })
            }
            ArrayKind::Elsa => Ok(OrthogonalPair {
                horizontal: need(Edge::H2)?,
                vertical: need(Edge::V2)?,
            }),
            ArrayKind::Clsa | ArrayKind::Csa | ArrayKind::Dcsa => Ok(OrthogonalPair {
                horizontal: need(Edge::HArm)?,
                vertical: need(Edge::VArm)?,
            }),
        }
    }

    pub fn descriptor(&self) -> GeometryDescriptor {
        GeometryDescriptor {
            kind: self.kind,
            m: self.m,
            n: self.n,
            spacing_m: self.spacing.as_f64(),
            elements: self
                .elements
                .iter()
                .map(|e| ElementDescriptor {
                    index_m: e.index_m,
                    index_n: e.index_n,
                    x_m: e.x.as_f64(),
                    y_m: e.y.as_f64(),
                })
                .collect(),
        }
    }

    /// Same layout in another scalar type.
    pub fn cast<U: Real>(&self) -> ArrayGeometry<U> {
        ArrayGeometry {
            kind: self.kind,
            m: self.m,
            n: self.n,
            spacing: U::lit(self.spacing.as_f64()),
            elements: self
                .elements
                .iter()
                .map(|e| SensorElement {
                    index_m: e.index_m,
                    index_n: e.index_n,
                    x: U::lit(e.x.as_f64()),
                    y: U::lit(e.y.as_f64()),
                })
                .collect(),
            subarrays: self.subarrays.clone(),
        }
    }
}

/// Text form of a geometry: kind, dimensions, spacing and explicit element list in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryDescriptor {
    pub kind: ArrayKind,
    pub m: usize,
    pub n: usize,
    pub spacing_m: f64,
    pub elements: Vec<ElementDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementDescriptor {
    pub index_m: u32,
    pub index_n: u32,
    pub x_m: f64,
    pub y_m: f64,
}

impl GeometryDescriptor {
    pub fn to_geometry<T: Real>(&self) -> Result<ArrayGeometry<T>> {
        let elements = self
            .elements
            .iter()
            .map(|e| SensorElement {
                index_m: e.index_m,
                index_n: e.index_n,
                x: T::lit(e.x_m),
                y: T::lit(e.y_m),
            })
            .collect();
        ArrayGeometry::from_elements(self.kind, self.m, self.n, T::lit(self.spacing_m), elements)
    }
}

fn direction_error(alpha: f64, beta: f64) -> Error {
    Error::InvalidDirection {
        azimuth_deg: alpha.to_degrees(),
        elevation_deg: beta.to_degrees(),
        sum_sq: alpha.sin().powi(2) + beta.sin().powi(2),
    }
}

/// Checks `sin²α + sin²β <= 1`.
pub fn check_direction<T: Real>(alpha: T, beta: T) -> Result<()> {
    let (sa, sb) = (alpha.sin(), beta.sin());
    if !(sa * sa + sb * sb <= T::one()) {
        return Err(direction_error(alpha.as_f64(), beta.as_f64()));
    }
    Ok(())
}

/// Unit vector `(sin α, sin β, sqrt(cos²α - sin²β))` towards `(α, β)`.
pub fn steering_unit_vector<T: Real>(alpha: T, beta: T) -> Result<[T; 3]> {
    check_direction(alpha, beta)?;
    let (sa, sb) = (alpha.sin(), beta.sin());
    let ca = alpha.cos();
    let z = (ca * ca - sb * sb).max(T::zero()).sqrt();
    Ok([sa, sb, z])
}

/// Focused (near-field) steering delay of one sensor, seconds.
///
/// Positive when the sensor is closer to the focus than the array centre.
pub fn delay_nearfield<T: Real>(sensor: &SensorElement<T>, r0: T, alpha: T, beta: T, c: T) -> Result<T> {
    if !(r0 > T::zero()) || !(c > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "focus range and sound speed must be positive (r0 = {r0}, c = {c})"
        )));
    }
    check_direction(alpha, beta)?;
    let two = T::lit(2.0);
    let radicand = r0 * r0 + sensor.x * sensor.x + sensor.y * sensor.y
        - two * sensor.x * r0 * alpha.sin()
        - two * sensor.y * r0 * beta.sin();
    if radicand < T::zero() {
        return Err(Error::NumericDomain(format!(
            "negative distance radicand {radicand} for sensor ({}, {})",
            sensor.x, sensor.y
        )));
    }
    // r0 - sqrt(X) rewritten as (r0² - X) / (r0 + sqrt(X)) to avoid cancellation at large r0.
    let numer = two * r0 * (sensor.x * alpha.sin() + sensor.y * beta.sin()) - sensor.x * sensor.x - sensor.y * sensor.y;
    Ok(numer / (r0 + radicand.sqrt()) / c)
}

/// Plane-wave (far-field) steering delay `(x sin α + y sin β) / c`.
pub fn delay_farfield<T: Real>(sensor: &SensorElement<T>, alpha: T, beta: T, c: T) -> Result<T> {
    if !(c > T::zero()) {
        return Err(Error::InvalidArgument(format!("sound speed must be positive, got {c}")));
    }
    check_direction(alpha, beta)?;
    Ok((sensor.x * alpha.sin() + sensor.y * beta.sin()) / c)
}

/// `r0 > D² / (2λ)`.
pub fn farfield_valid<T: Real>(r0: T, aperture: T, wavelength: T) -> bool {
    r0 > aperture * aperture / (T::lit(2.0) * wavelength)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    I,
    II,
    III,
    IV,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::I, Quadrant::II, Quadrant::III, Quadrant::IV];

    /// Whether an open-quadrant direction `(α, β)` lies strictly inside `self`.
    pub fn contains<T: Real>(self, alpha: T, beta: T) -> bool {
        let z = T::zero();
        match self {
            Quadrant::I => alpha > z && beta > z,
            Quadrant::II => alpha < z && beta > z,
            Quadrant::III => alpha < z && beta < z,
            Quadrant::IV => alpha > z && beta < z,
        }
    }
}

/// Location of a direction relative to the quadrant partition of a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum QuadrantId {
    I,
    II,
    III,
    IV,
    /// On the horizontal axis (`β = 0`, `α != 0`).
    AxisH,
    /// On the vertical axis (`α = 0`, `β != 0`).
    AxisV,
    Center,
}

impl From<Quadrant> for QuadrantId {
    fn from(q: Quadrant) -> Self {
        match q {
            Quadrant::I => QuadrantId::I,
            Quadrant::II => QuadrantId::II,
            Quadrant::III => QuadrantId::III,
            Quadrant::IV => QuadrantId::IV,
        }
    }
}

pub fn quadrant_of<T: Real>(alpha: T, beta: T) -> QuadrantId {
    let z = T::zero();
    match (alpha.partial_cmp(&z), beta.partial_cmp(&z)) {
        (Some(std::cmp::Ordering::Equal), Some(std::cmp::Ordering::Equal)) => QuadrantId::Center,
        (_, Some(std::cmp::Ordering::Equal)) => QuadrantId::AxisH,
        (Some(std::cmp::Ordering::Equal), _) => QuadrantId::AxisV,
        _ if alpha > z && beta > z => QuadrantId::I,
        _ if alpha < z && beta > z => QuadrantId::II,
        _ if alpha < z && beta < z => QuadrantId::III,
        _ => QuadrantId::IV,
    }
}

/// Open quadrants whose L-pairs reconstruct the direction `(α, β)`:
/// one inside a quadrant, two on an axis, four at the centre.
pub fn adjacent_quadrants<T: Real>(alpha: T, beta: T) -> Vec<Quadrant> {
    let z = T::zero();
    match quadrant_of(alpha, beta) {
        QuadrantId::I => vec![Quadrant::I],
        QuadrantId::II => vec![Quadrant::II],
        QuadrantId::III => vec![Quadrant::III],
        QuadrantId::IV => vec![Quadrant::IV],
        QuadrantId::AxisH if alpha > z => vec![Quadrant::I, Quadrant::IV],
        QuadrantId::AxisH => vec![Quadrant::II, Quadrant::III],
        QuadrantId::AxisV if beta > z => vec![Quadrant::I, Quadrant::II],
        QuadrantId::AxisV => vec![Quadrant::III, Quadrant::IV],
        QuadrantId::Center => Quadrant::ALL.to_vec(),
    }
}

/// Polar reconstruction volume: beam directions times focus ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagingGrid<T> {
    azimuths_deg: Vec<f64>,
    elevations_deg: Vec<f64>,
    azimuths: Vec<T>,
    elevations: Vec<T>,
    ranges: Vec<T>,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl<T: Real> ImagingGrid<T> {
    /// Grid from explicit angle lists in degrees and ranges in metres.
    pub fn from_degrees(azimuths_deg: Vec<f64>, elevations_deg: Vec<f64>, ranges: Vec<T>) -> Result<Self> {
        if azimuths_deg.is_empty() || elevations_deg.is_empty() || ranges.is_empty() {
            return Err(Error::InvalidGrid("grid axes must be non-empty".into()));
        }
        if !strictly_increasing(&azimuths_deg) || !strictly_increasing(&elevations_deg) {
            return Err(Error::InvalidGrid("angles must be strictly increasing".into()));
        }
        let rf: Vec<f64> = ranges.iter().map(|r| r.as_f64()).collect();
        if !(rf[0] > 0.0) || !strictly_increasing(&rf) {
            return Err(Error::InvalidGrid(
                "ranges must be strictly positive and increasing".into(),
            ));
        }
        for &a in &azimuths_deg {
            for &b in &elevations_deg {
                let (sa, sb) = (a.to_radians().sin(), b.to_radians().sin());
                if sa * sa + sb * sb > 1.0 {
                    return Err(Error::InvalidGrid(format!(
                        "direction ({a}°, {b}°) has sin²α + sin²β = {:.4} > 1",
                        sa * sa + sb * sb
                    )));
                }
            }
        }
        let azimuths = azimuths_deg.iter().map(|a| T::lit(a.to_radians())).collect();
        let elevations = elevations_deg.iter().map(|b| T::lit(b.to_radians())).collect();
        Ok(Self {
            azimuths_deg,
            elevations_deg,
            azimuths,
            elevations,
            ranges,
        })
    }

    pub fn azimuths(&self) -> &[T] {
        &self.azimuths
    }

    pub fn elevations(&self) -> &[T] {
        &self.elevations
    }

    pub fn azimuths_deg(&self) -> &[f64] {
        &self.azimuths_deg
    }

    pub fn elevations_deg(&self) -> &[f64] {
        &self.elevations_deg
    }

    pub fn ranges(&self) -> &[T] {
        &self.ranges
    }

    /// Beams along azimuth (`Mb`).
    pub fn mb(&self) -> usize {
        self.azimuths.len()
    }

    /// Beams along elevation (`Nb`).
    pub fn nb(&self) -> usize {
        self.elevations.len()
    }

    pub fn voxel_count(&self) -> usize {
        self.ranges.len() * self.mb() * self.nb()
    }

    /// Same grid restricted to one range.
    pub fn with_ranges(&self, ranges: Vec<T>) -> Result<Self> {
        Self::from_degrees(self.azimuths_deg.clone(), self.elevations_deg.clone(), ranges)
    }

    pub fn cast<U: Real>(&self) -> ImagingGrid<U> {
        ImagingGrid {
            azimuths_deg: self.azimuths_deg.clone(),
            elevations_deg: self.elevations_deg.clone(),
            azimuths: self.azimuths_deg.iter().map(|a| U::lit(a.to_radians())).collect(),
            elevations: self.elevations_deg.iter().map(|b| U::lit(b.to_radians())).collect(),
            ranges: self.ranges.iter().map(|r| U::lit(r.as_f64())).collect(),
        }
    }
}

/// Degrees spaced uniformly over `[-span/2, +span/2]`, endpoints included.
pub fn uniform_angles(span_deg: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.0];
    }
    let step = span_deg / (count - 1) as f64;
    (0..count).map(|i| -span_deg / 2.0 + i as f64 * step).collect()
}

/// Uniform grid symmetric about broadside.
pub fn build_imaging_grid<T: Real>(
    az_span_deg: f64,
    el_span_deg: f64,
    mb: usize,
    nb: usize,
    ranges: Vec<T>,
) -> Result<ImagingGrid<T>> {
    if mb == 0 || nb == 0 {
        return Err(Error::InvalidGrid("beam counts must be at least 1".into()));
    }
    if !(az_span_deg >= 0.0) || !(el_span_deg >= 0.0) {
        return Err(Error::InvalidGrid("angular spans must be non-negative".into()));
    }
    ImagingGrid::from_degrees(uniform_angles(az_span_deg, mb), uniform_angles(el_span_deg, nb), ranges)
}
