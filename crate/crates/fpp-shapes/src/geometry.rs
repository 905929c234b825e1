//! Shape transformations: convex hulls, dihedral folding into the first
//! octant, the mean transformation, and unfolding back to a full polygon.
//!
//! The lattice model is symmetric under the dihedral group of the square
//! (sign flips and the x/y swap), so one octant `0 <= x <= y` carries all the
//! information of a sampled shape. [`fold_to_octant`] maps a full convex hull
//! onto that wedge and returns its outer arc; [`unfold_to_full`] reverses the
//! trip by applying all 8 symmetries and re-hulling.
//!
//! Folding vertices alone would lose the points where the hull boundary
//! crosses the wedge's bounding lines (the axes and the diagonals), so every
//! edge/line crossing is added before folding; that pins the arc's endpoints
//! to the y-axis and to y = x. For the L1 unit ball, the hull vertices all
//! fold onto (0, 1) and only the crossing with y = x contributes the diagonal
//! anchor (0.5, 0.5).

use crate::error::{Error, Result};

/// Collinearity epsilon for hull orientation tests. Inputs here are
/// well-scaled (coordinates within ~[0, 50]), so a fixed absolute epsilon is
/// adequate.
pub const GEOM_EPS: f64 = 1e-12;

pub type Point = (f64, f64);

/// Cross product of (a - o) and (b - o); positive for a counter-clockwise
/// turn o -> a -> b.
fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn check_finite(points: &[Point]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::usage("geometry input must contain at least one point"));
    }
    for &(x, y) in points {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::usage(format!("non-finite point ({x}, {y})")));
        }
    }
    Ok(())
}

/// Convex hull by monotone chain, counter-clockwise, starting from the
/// lexicographically smallest vertex. Collinear vertices are dropped; a
/// single point hulls to itself and a collinear set to its two extremes.
pub fn convex_hull(points: &[Point]) -> Result<Vec<Point>> {
    check_finite(points)?;
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() <= 2 {
        return Ok(pts);
    }

    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= GEOM_EPS
        {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= GEOM_EPS
        {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    Ok(lower)
}

/// The folded boundary arc: vertices in the wedge `y >= x >= 0`, strictly
/// increasing in x.
///
/// Arcs produced by [`fold_to_octant`] and [`octant_arc`] are additionally
/// convex with non-increasing y (the outer arc of a hull); that is asserted
/// by their tests rather than by this constructor, because predicted arcs
/// (see the predictor module) follow a learned curve that is not forced to be
/// convex.
#[derive(Debug, Clone, PartialEq)]
pub struct OctantBoundary {
    vertices: Vec<Point>,
}

impl OctantBoundary {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        check_finite(&vertices)?;
        for &(x, y) in &vertices {
            if !(x >= 0.0 && y >= x - GEOM_EPS) {
                return Err(Error::usage(format!(
                    "octant vertex ({x}, {y}) violates y >= x >= 0"
                )));
            }
        }
        for w in vertices.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::usage(format!(
                    "octant vertices must strictly increase in x: {:?} then {:?}",
                    w[0], w[1]
                )));
            }
        }
        Ok(OctantBoundary { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Point> {
        self.vertices
    }
}

/// Folds one point into the wedge: absolute values, then reflect across
/// y = x if needed.
pub fn fold_point(p: Point) -> Point {
    let (a, b) = (p.0.abs(), p.1.abs());
    if b < a {
        (b, a)
    } else {
        (a, b)
    }
}

/// Vertices of `polygon` plus every crossing of its edges with the lines
/// x = 0, y = 0, y = x and y = -x. Those crossings are where the boundary
/// enters and leaves each octant; without them the folded arc has no anchor
/// on the axes or the diagonal.
fn with_wedge_crossings(polygon: &[Point]) -> Vec<Point> {
    let mut out = polygon.to_vec();
    if polygon.len() < 2 {
        return out;
    }
    // Linear functionals whose zero sets are the four lines.
    let lines: [fn(Point) -> f64; 4] = [
        |p| p.0,
        |p| p.1,
        |p| p.1 - p.0,
        |p| p.1 + p.0,
    ];
    let n = polygon.len();
    for i in 0..n {
        let p = polygon[i];
        let q = polygon[(i + 1) % n];
        if p == q {
            continue;
        }
        for line in lines {
            let sp = line(p);
            let sq = line(q);
            // Strict sign change only: an endpoint on the line is already in
            // the vertex list.
            if (sp > 0.0 && sq < 0.0) || (sp < 0.0 && sq > 0.0) {
                let t = sp / (sp - sq);
                out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
            }
        }
    }
    out
}

/// Outer arc of a point set already lying in the wedge: keep the highest
/// point per x, build the upper hull left to right, and trim anything before
/// the peak so y is non-increasing.
fn arc_from_wedge_points(mut pts: Vec<Point>) -> Result<OctantBoundary> {
    if pts.is_empty() {
        return Err(Error::usage("no points fall in the octant wedge"));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    // Highest y per distinct x; lower points cannot sit on the upper arc.
    let mut columns: Vec<Point> = Vec::with_capacity(pts.len());
    for p in pts {
        match columns.last_mut() {
            Some(last) if last.0 == p.0 => last.1 = p.1,
            _ => columns.push(p),
        }
    }
    let mut chain: Vec<Point> = Vec::with_capacity(columns.len());
    for p in columns {
        while chain.len() >= 2 && cross(chain[chain.len() - 2], chain[chain.len() - 1], p) >= -GEOM_EPS
        {
            chain.pop();
        }
        chain.push(p);
    }
    // For noisy, only approximately symmetric input the highest folded point
    // can sit slightly off the y-axis; start the arc at the peak (first one on
    // ties) so y is non-increasing.
    let mut peak = 0;
    for (i, p) in chain.iter().enumerate() {
        if p.1 > chain[peak].1 {
            peak = i;
        }
    }
    OctantBoundary::new(chain.split_off(peak))
}

/// Folds a convex polygon into the first octant and returns its outer arc.
///
/// The input should be the vertex list of a convex hull of an approximately
/// symmetric shape. Its vertices and wedge-line crossings are folded by
/// [`fold_point`], deduplicated, and re-hulled from above.
pub fn fold_to_octant(polygon: &[Point]) -> Result<OctantBoundary> {
    check_finite(polygon)?;
    let folded = with_wedge_crossings(polygon)
        .into_iter()
        .map(fold_point)
        .collect();
    arc_from_wedge_points(folded)
}

/// The arc of `polygon` inside the wedge `y >= x >= 0`, without folding.
///
/// Where [`fold_to_octant`] overlays all eight symmetric slices of the
/// boundary, this keeps just the one that already lies in the wedge, which is
/// what a per-octant symmetry comparison needs.
pub fn octant_arc(polygon: &[Point]) -> Result<OctantBoundary> {
    check_finite(polygon)?;
    // Crossing points are computed with rounding, so admit a GEOM_EPS band
    // around the wedge boundary and snap onto it.
    let in_wedge = with_wedge_crossings(polygon)
        .into_iter()
        .filter(|&(x, y)| x >= -GEOM_EPS && y >= x - GEOM_EPS)
        .map(|(x, y)| {
            let x = x.max(0.0);
            (x, y.max(x))
        })
        .collect();
    arc_from_wedge_points(in_wedge)
}

/// Scales every vertex by `mu_e > 0`.
pub fn mean_transform(boundary: &OctantBoundary, mu_e: f64) -> Result<OctantBoundary> {
    if !(mu_e.is_finite() && mu_e > 0.0) {
        return Err(Error::usage(format!(
            "mean transform requires mu_e > 0, got {mu_e}"
        )));
    }
    OctantBoundary::new(
        boundary
            .vertices()
            .iter()
            .map(|&(x, y)| (mu_e * x, mu_e * y))
            .collect(),
    )
}

/// The eight dihedral images of a point: sign flips and the x/y swap.
fn dihedral_images(p: Point) -> [Point; 8] {
    let (x, y) = p;
    [
        (x, y),
        (-x, y),
        (x, -y),
        (-x, -y),
        (y, x),
        (-y, x),
        (y, -x),
        (-y, -x),
    ]
}

/// Reconstructs the full symmetric polygon from an octant arc: apply all 8
/// symmetries, deduplicate, convex-hull. Counter-clockwise output.
pub fn unfold_to_full(boundary: &OctantBoundary) -> Vec<Point> {
    let mut all = Vec::with_capacity(boundary.vertices().len() * 8);
    for &p in boundary.vertices() {
        all.extend_from_slice(&dihedral_images(p));
    }
    // Non-empty wedge input cannot fail the hull's validation.
    convex_hull(&all).expect("unfolded point set is non-empty and finite")
}

/// CSV serialization of a polygon: header then one `x,y` row per vertex.
pub fn polygon_csv(points: &[Point]) -> String {
    let mut out = String::from("x,y\n");
    for &(x, y) in points {
        out.push_str(&format!("{x},{y}\n"));
    }
    out
}

/// Minimal SVG writer: one closed path per layer, auto-fit viewBox,
/// y axis pointing up. `layers` pairs a polygon with a stroke color.
pub fn polygons_svg(layers: &[(&[Point], &str)]) -> String {
    let mut min_x = f64::INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for (points, _) in layers {
        for &(x, y) in *points {
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(-y);
            max_y = max_y.max(-y);
        }
    }
    if !(min_x.is_finite() && min_y.is_finite() && max_x.is_finite() && max_y.is_finite()) {
        min_x = 0.0;
        min_y = 0.0;
        max_x = 1.0;
        max_y = 1.0;
    }
    let pad = 0.05 * (max_x - min_x).max(max_y - min_y).max(1e-9);
    let (w, h) = (max_x - min_x + 2.0 * pad, max_y - min_y + 2.0 * pad);
    let stroke_width = 0.004 * w.max(h);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" \
         viewBox=\"{} {} {} {}\">\n",
        min_x - pad,
        min_y - pad,
        w,
        h
    );
    for (points, color) in layers {
        if points.is_empty() {
            continue;
        }
        let mut d = String::new();
        for (i, &(x, y)) in points.iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            d.push_str(&format!("{cmd}{x} {}", -y));
            d.push(' ');
        }
        d.push('Z');
        svg.push_str(&format!(
            "  <path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{stroke_width}\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
