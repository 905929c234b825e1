//! Lazy first-passage percolation growth on Z².
//!
//! The infected cluster grows from the origin by Dijkstra-style expansion: a
//! min-priority queue holds frontier events keyed by tentative arrival time
//! `T(0,u) + tau_e`, and every pop consumes one unit of the edge budget
//! whether it infects a new site or lands on an already-infected one. Edge
//! weights are sampled lazily on first touch and memoized, so only the
//! explored neighborhood of the cluster is ever materialized.
//!
//! "Edges traversed" therefore means queue pops: an exact, deterministic
//! stopping rule. Ties in event time are broken lexicographically on
//! `(time, x, y)` so runs are bit-reproducible.
//!
//! The scaling time of a finished run is the last *accepted* infection time
//! (not the last pop time, which may belong to a discarded event).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::distributions::DistributionSpec;
use crate::error::Result;
use crate::geometry::Point;
use crate::rng::{sim_rng, ShapeRng, STREAM_WEIGHTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeSite {
    pub x: i32,
    pub y: i32,
}

/// Canonical name for a lattice edge: the site at its lower-left end plus an
/// orientation. Both endpoints of an edge resolve to the same key, which is
/// what makes memoized weights consistent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeKey {
    pub x: i32,
    pub y: i32,
    pub horizontal: bool,
}

impl EdgeKey {
    fn from_step(site: LatticeSite, dx: i32, dy: i32) -> EdgeKey {
        match (dx, dy) {
            (1, 0) => EdgeKey { x: site.x, y: site.y, horizontal: true },
            (-1, 0) => EdgeKey { x: site.x - 1, y: site.y, horizontal: true },
            (0, 1) => EdgeKey { x: site.x, y: site.y, horizontal: false },
            _ => EdgeKey { x: site.x, y: site.y - 1, horizontal: false },
        }
    }
}

/// Source of edge weights for [`grow`].
///
/// The production implementation is [`LazyWeights`]; tests inject degenerate
/// or pre-assigned weights through [`FnWeights`].
pub trait EdgeWeights {
    fn weight(&mut self, edge: EdgeKey) -> Result<f64>;
}

/// Samples each edge's weight from a distribution spec on first touch and
/// memoizes it in a hash map keyed by the canonical edge name.
pub struct LazyWeights<'a> {
    spec: &'a DistributionSpec,
    rng: ShapeRng,
    memo: FxHashMap<EdgeKey, f64>,
}

impl<'a> LazyWeights<'a> {
    pub fn new(spec: &'a DistributionSpec, seed: u64) -> Self {
        LazyWeights {
            spec,
            rng: sim_rng(seed, STREAM_WEIGHTS),
            memo: FxHashMap::default(),
        }
    }
}

impl EdgeWeights for LazyWeights<'_> {
    fn weight(&mut self, edge: EdgeKey) -> Result<f64> {
        if let Some(&w) = self.memo.get(&edge) {
            return Ok(w);
        }
        let w = self.spec.sample(&mut self.rng)?;
        self.memo.insert(edge, w);
        Ok(w)
    }
}

/// Deterministic weights from a plain function; the test-injection hook.
pub struct FnWeights<F: FnMut(EdgeKey) -> f64>(pub F);

impl<F: FnMut(EdgeKey) -> f64> EdgeWeights for FnWeights<F> {
    fn weight(&mut self, edge: EdgeKey) -> Result<f64> {
        Ok((self.0)(edge))
    }
}

/// Inclusive coordinate bounds for truncated-lattice runs.
#[derive(Debug, Clone, Copy)]
pub struct Bounds {
    pub min_x: i32,
    pub max_x: i32,
    pub min_y: i32,
    pub max_y: i32,
}

impl Bounds {
    pub fn square(radius: i32) -> Bounds {
        Bounds {
            min_x: -radius,
            max_x: radius,
            min_y: -radius,
            max_y: radius,
        }
    }

    fn contains(&self, site: LatticeSite) -> bool {
        (self.min_x..=self.max_x).contains(&site.x) && (self.min_y..=self.max_y).contains(&site.y)
    }
}

/// A frontier event: `site` becomes reachable at `time`. Ordered descending
/// so that `BinaryHeap` pops the smallest `(time, x, y)` first.
struct Event {
    time: f64,
    site: LatticeSite,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.site.x.cmp(&self.site.x))
            .then_with(|| other.site.y.cmp(&self.site.y))
    }
}

/// Raw result of a growth run: infected sites with their infection times, in
/// infection order, plus the number of queue pops consumed.
#[derive(Debug, Clone)]
pub struct Growth {
    pub sites: Vec<(LatticeSite, f64)>,
    pub pops: u64,
}

/// Grows the cluster until `edge_budget` pops are consumed, the heap runs dry
/// (possible only on a bounded lattice), or the weight source fails.
pub fn grow(
    weights: &mut impl EdgeWeights,
    edge_budget: u64,
    bounds: Option<Bounds>,
) -> Result<Growth> {
    let origin = LatticeSite { x: 0, y: 0 };
    let mut infected: FxHashSet<LatticeSite> = FxHashSet::default();
    let mut sites: Vec<(LatticeSite, f64)> = Vec::new();
    let mut heap: BinaryHeap<Event> = BinaryHeap::new();

    let in_bounds = |site: LatticeSite| bounds.map_or(true, |b| b.contains(site));

    let infect = |site: LatticeSite,
                      time: f64,
                      infected: &mut FxHashSet<LatticeSite>,
                      sites: &mut Vec<(LatticeSite, f64)>,
                      heap: &mut BinaryHeap<Event>,
                      weights: &mut dyn FnMut(EdgeKey) -> Result<f64>|
     -> Result<()> {
        infected.insert(site);
        sites.push((site, time));
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let neighbor = LatticeSite { x: site.x + dx, y: site.y + dy };
            if !in_bounds(neighbor) {
                continue;
            }
            let w = weights(EdgeKey::from_step(site, dx, dy))?;
            heap.push(Event { time: time + w, site: neighbor });
        }
        Ok(())
    };

    let mut sample = |edge: EdgeKey| weights.weight(edge);
    infect(origin, 0.0, &mut infected, &mut sites, &mut heap, &mut sample)?;

    let mut pops: u64 = 0;
    while pops < edge_budget {
        let Some(event) = heap.pop() else { break };
        pops += 1;
        if infected.contains(&event.site) {
            continue;
        }
        infect(event.site, event.time, &mut infected, &mut sites, &mut heap, &mut sample)?;
    }

    Ok(Growth { sites, pops })
}

/// The time-scaled infected set of one finished run.
#[derive(Debug, Clone)]
pub struct ScaledPointCloud {
    /// Infected sites divided by `final_time`, in infection order; always
    /// contains the origin.
    pub points: Vec<Point>,
    /// Largest accepted infection time; defined as 1 when nothing beyond the
    /// origin was infected (zero budget), so scaling stays harmless.
    pub final_time: f64,
    pub edges_traversed: u64,
    pub spec: DistributionSpec,
    pub seed: u64,
}

impl ScaledPointCloud {
    pub fn from_growth(growth: &Growth, spec: DistributionSpec, seed: u64) -> Self {
        let final_time = match growth.sites.last() {
            Some(&(_, t)) if t > 0.0 => t,
            _ => 1.0,
        };
        let points = growth
            .sites
            .iter()
            .map(|&(s, _)| (f64::from(s.x) / final_time, f64::from(s.y) / final_time))
            .collect();
        ScaledPointCloud {
            points,
            final_time,
            edges_traversed: growth.pops,
            spec,
            seed,
        }
    }
}

/// Runs one simulation: lazily sampled weights from `spec` under `seed`,
/// grown for `edge_budget` pops, returned as a scaled cloud.
pub fn run_fpp(spec: &DistributionSpec, edge_budget: u64, seed: u64) -> Result<ScaledPointCloud> {
    Ok(run_fpp_recording(spec, edge_budget, seed)?.0)
}

/// Like [`run_fpp`] but also keeps the raw growth record (site infection
/// times), which the CLI's raw-cloud dump and several oracles need.
pub fn run_fpp_recording(
    spec: &DistributionSpec,
    edge_budget: u64,
    seed: u64,
) -> Result<(ScaledPointCloud, Growth)> {
    let mut weights = LazyWeights::new(spec, seed);
    let growth = grow(&mut weights, edge_budget, None)?;
    let cloud = ScaledPointCloud::from_growth(&growth, spec.clone(), seed);
    Ok((cloud, growth))
}

/// The point list handed to the hull: site centers, unchanged. Site
/// footprints are not fattened to unit squares; at the scales simulated here
/// the difference to the hull is O(1/t).
pub fn hull_input(cloud: &ScaledPointCloud) -> Vec<Point> {
    cloud.points.clone()
}
