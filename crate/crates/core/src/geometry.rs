//! Occupied/vacant decomposition of a window.
//!
//! A left-to-right sweep keeps the running reach `max(u + ρ)` of the current
//! occupied component; a germ beyond the reach closes it and the gap between
//! them is a vacant component. Grains are closed, so touching grains merge
//! and boundary points belong to the occupied set.

use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Result, TabpError};
use crate::process::{Domain, Germ, Realization};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn is_empty(&self) -> bool {
        self.b <= self.a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Occupied,
    Vacant,
}

impl ComponentKind {
    fn tag(self) -> &'static str {
        match self {
            ComponentKind::Occupied => "occ",
            ComponentKind::Vacant => "vac",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentDecomposition {
    pub window: f64,
    pub domain: Domain,
    /// Disjoint, sorted, clipped to `[0, window]`.
    pub occupied: Vec<Interval>,
    /// Disjoint, sorted, interleaving `occupied`.
    pub vacant: Vec<Interval>,
    /// The final component is cut by the window edge.
    pub right_censored: bool,
    pub final_kind: ComponentKind,
    /// Full line only: the vacant component at 0 began before the window.
    pub left_censored: bool,
    pub covered_length: f64,
    /// Vacant components with both ends observed.
    pub n_vacant_complete: usize,
    /// Lengths of those components, in order.
    pub vacant_gap_lengths: Vec<f64>,
}

/// JSON summary of a decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionSummary {
    #[serde(rename = "T")]
    pub window: f64,
    pub covered_length: f64,
    pub n_vacant_complete: usize,
    pub right_censored: bool,
}

impl ComponentDecomposition {
    /// Builds the decomposition from the (unclipped-start, clipped-end)
    /// occupied intervals of a sweep.
    fn from_occupied(window: f64, domain: Domain, occupied: Vec<Interval>) -> Self {
        let mut vacant = Vec::with_capacity(occupied.len() + 1);
        let mut cursor = 0.0;
        for occ in &occupied {
            if occ.a > cursor {
                vacant.push(Interval { a: cursor, b: occ.a });
            }
            cursor = occ.b;
        }
        if cursor < window {
            vacant.push(Interval { a: cursor, b: window });
        }

        let final_kind = match (occupied.last(), vacant.last()) {
            (Some(o), Some(v)) if v.a >= o.b => ComponentKind::Vacant,
            (Some(_), _) => ComponentKind::Occupied,
            (None, _) => ComponentKind::Vacant,
        };
        let last_end = occupied
            .last()
            .map_or(0.0, |o| o.b)
            .max(vacant.last().map_or(0.0, |v| v.b));
        let left_censored = domain == Domain::FullLine && vacant.first().is_some_and(|v| v.a == 0.0);

        let vacant_gap_lengths: Vec<f64> = vacant
            .iter()
            .enumerate()
            .filter(|&(i, v)| v.b < window && !(i == 0 && left_censored))
            .map(|(_, v)| v.len())
            .collect();

        ComponentDecomposition {
            window,
            domain,
            covered_length: occupied.iter().map(Interval::len).sum(),
            right_censored: last_end >= window,
            final_kind,
            left_censored,
            n_vacant_complete: vacant_gap_lengths.len(),
            vacant_gap_lengths,
            occupied,
            vacant,
        }
    }

    pub fn vacant_length(&self) -> f64 {
        self.vacant.iter().map(Interval::len).sum()
    }

    /// Components in left-to-right order.
    pub fn components(&self) -> Vec<(ComponentKind, Interval)> {
        let mut all: Vec<(ComponentKind, Interval)> = self
            .occupied
            .iter()
            .map(|&i| (ComponentKind::Occupied, i))
            .chain(self.vacant.iter().map(|&i| (ComponentKind::Vacant, i)))
            .collect();
        all.sort_by(|x, y| x.1.a.total_cmp(&y.1.a).then(x.1.b.total_cmp(&y.1.b)));
        all
    }

    /// Vacant lengths; censored components are included only on request.
    pub fn vacant_lengths(&self, include_censored: bool) -> Vec<f64> {
        if include_censored {
            self.vacant.iter().map(Interval::len).collect()
        } else {
            self.vacant_gap_lengths.clone()
        }
    }

    /// Occupied lengths; a component cut by the window edge (or, on the full
    /// line, starting at 0) is included only on request.
    pub fn occupied_lengths(&self, include_censored: bool) -> Vec<f64> {
        self.occupied
            .iter()
            .filter(|o| include_censored || (o.b < self.window && !(self.domain == Domain::FullLine && o.a <= 0.0)))
            .map(Interval::len)
            .collect()
    }

    /// Covered length inside `[a, b]`.
    pub fn covered_length_in(&self, a: f64, b: f64) -> f64 {
        let start = self.occupied.partition_point(|o| o.b <= a);
        self.occupied[start..]
            .iter()
            .take_while(|o| o.a < b)
            .map(|o| (o.b.min(b) - o.a.max(a)).max(0.0))
            .sum()
    }

    /// Covered fraction of `[burn_in, window]`.
    pub fn covered_fraction(&self, burn_in: f64) -> Result<f64> {
        if !(burn_in >= 0.0 && burn_in < self.window) {
            return Err(invalid(format!(
                "burn-in must lie in [0, {}), got {burn_in}",
                self.window
            )));
        }
        Ok(self.covered_length_in(burn_in, self.window) / (self.window - burn_in))
    }

    /// Whether `t` is vacant. Occupied intervals are closed.
    pub fn is_vacant_at(&self, t: f64) -> Result<bool> {
        if !(0.0..=self.window).contains(&t) {
            return Err(TabpError::OutsideWindow { t, window: self.window });
        }
        let i = self.occupied.partition_point(|o| o.a <= t);
        Ok(i == 0 || self.occupied[i - 1].b < t)
    }

    /// The decomposition of the sub-window `[0, window]`. Equal to
    /// decomposing the germs with `u <= window`.
    pub fn restrict(&self, window: f64) -> Result<Self> {
        if !(window > 0.0 && window <= self.window) {
            return Err(invalid(format!(
                "restriction window must lie in (0, {}], got {window}",
                self.window
            )));
        }
        let occupied = self
            .occupied
            .iter()
            .take_while(|o| o.a <= window)
            .map(|o| Interval {
                a: o.a,
                b: o.b.min(window),
            })
            .collect();
        Ok(Self::from_occupied(window, self.domain, occupied))
    }

    pub fn summary(&self) -> DecompositionSummary {
        DecompositionSummary {
            window: self.window,
            covered_length: self.covered_length,
            n_vacant_complete: self.n_vacant_complete,
            right_censored: self.right_censored,
        }
    }

    /// Writes `kind,a,b` rows, `kind` being `occ` or `vac`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "kind,a,b")?;
        for (kind, iv) in self.components() {
            writeln!(out, "{},{},{}", kind.tag(), iv.a, iv.b)?;
        }
        out.flush()
    }
}

/// Incremental sweep over germs in increasing `u`.
#[derive(Debug, Clone)]
pub struct Sweep {
    window: f64,
    domain: Domain,
    occupied: Vec<Interval>,
    current: Option<(f64, f64)>,
    last_u: f64,
    seen: usize,
}

impl Sweep {
    pub fn new(window: f64, domain: Domain) -> Self {
        Self {
            window,
            domain,
            occupied: Vec::new(),
            current: None,
            last_u: f64::NEG_INFINITY,
            seen: 0,
        }
    }

    /// Whether the rest of the window is already covered, so that later
    /// germs cannot change the decomposition.
    pub fn saturated(&self) -> bool {
        self.current.is_some_and(|(_, reach)| reach >= self.window)
    }

    pub fn push(&mut self, g: Germ) -> Result<()> {
        if g.u < self.last_u {
            return Err(TabpError::UnsortedGerms { index: self.seen });
        }
        self.last_u = g.u;
        self.seen += 1;
        let reach = g.reach();
        if g.u < 0.0 {
            // Buffer germs only matter through how far into the window they reach.
            if reach >= 0.0 {
                let prev = self.current.map_or(reach, |c| c.1);
                self.current = Some((0.0, prev.max(reach)));
            }
            return Ok(());
        }
        self.current = match self.current {
            Some((start, r)) if g.u <= r => Some((start, r.max(reach))),
            Some((start, r)) => {
                self.occupied.push(Interval { a: start, b: r });
                Some((g.u, reach))
            }
            None => Some((g.u, reach)),
        };
        Ok(())
    }

    pub fn finish(mut self) -> ComponentDecomposition {
        if let Some((start, r)) = self.current.take() {
            self.occupied.push(Interval { a: start, b: r });
        }
        let window = self.window;
        for o in &mut self.occupied {
            o.b = o.b.min(window);
        }
        ComponentDecomposition::from_occupied(window, self.domain, self.occupied)
    }
}

/// Decomposes `[0, window]` for a realization.
pub fn decompose(real: &Realization) -> Result<ComponentDecomposition> {
    let mut sweep = Sweep::new(real.window, real.domain);
    for &g in &real.germs {
        sweep.push(g)?;
    }
    Ok(sweep.finish())
}

/// Decomposes a germ stream, stopping as soon as the window is covered to
/// its right edge. The result equals [`decompose`] on the full stream.
pub fn decompose_stream<I>(germs: I, window: f64, domain: Domain) -> Result<ComponentDecomposition>
where
    I: IntoIterator<Item = Germ>,
{
    let mut sweep = Sweep::new(window, domain);
    for g in germs {
        sweep.push(g)?;
        if sweep.saturated() {
            break;
        }
    }
    Ok(sweep.finish())
}

/// Direct scan: `t` is vacant iff no germ `u <= t` has `u + ρ >= t`.
pub fn point_vacant(real: &Realization, t: f64) -> Result<bool> {
    if !(0.0..=real.window).contains(&t) {
        return Err(TabpError::OutsideWindow { t, window: real.window });
    }
    Ok(!real.germs.iter().take_while(|g| g.u <= t).any(|g| g.reach() >= t))
}
