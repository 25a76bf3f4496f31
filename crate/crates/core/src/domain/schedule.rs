use std::collections::BTreeMap;

use nalgebra::DVector;

use super::{CrackedMesh, SegmentId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReleaseTime {
    At(f64),
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleEvent {
    Open { segment: SegmentId, time: f64 },
    Close { segment: SegmentId, time: f64 },
}

impl ScheduleEvent {
    fn segment(&self) -> SegmentId {
        match *self {
            ScheduleEvent::Open { segment, .. } | ScheduleEvent::Close { segment, .. } => segment,
        }
    }

    fn time(&self) -> f64 {
        match *self {
            ScheduleEvent::Open { time, .. } | ScheduleEvent::Close { time, .. } => time,
        }
    }
}

/// Release times of crack segments. Segments without an event never open.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CrackSchedule {
    events: Vec<ScheduleEvent>,
}

impl CrackSchedule {
    pub fn never() -> Self {
        Self::default()
    }

    pub fn from_thresholds(release: &BTreeMap<SegmentId, ReleaseTime>) -> Result<Self> {
        let mut events = Vec::new();
        for (&segment, &r) in release {
            if let ReleaseTime::At(time) = r {
                events.push(ScheduleEvent::Open { segment, time });
            }
        }
        Self::from_events(events)
    }

    /// Accepts any event list; use [`check_h3`] to test monotonicity.
    pub fn from_events(mut events: Vec<ScheduleEvent>) -> Result<Self> {
        for e in &events {
            let t = e.time();
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::Domain(format!(
                    "segment {} has invalid event time {t}",
                    e.segment()
                )));
            }
        }
        events.sort_by(|a, b| {
            (a.segment(), a.time())
                .partial_cmp(&(b.segment(), b.time()))
                .expect("finite times")
        });
        Ok(Self { events })
    }

    pub fn events(&self) -> &[ScheduleEvent] {
        &self.events
    }

    /// First opening time of a segment.
    pub fn release_time(&self, segment: SegmentId) -> ReleaseTime {
        self.events
            .iter()
            .find_map(|e| match *e {
                ScheduleEvent::Open { segment: s, time } if s == segment => {
                    Some(ReleaseTime::At(time))
                }
                _ => None,
            })
            .unwrap_or(ReleaseTime::Never)
    }

    /// Whether a segment is open at `t`; an event at `t` already applies.
    pub fn is_released(&self, segment: SegmentId, t: f64) -> bool {
        let mut open = false;
        for e in self.events.iter().filter(|e| e.segment() == segment) {
            if e.time() <= t {
                open = matches!(e, ScheduleEvent::Open { .. });
            }
        }
        open
    }

    /// True when the crack does not move on `[0, t_final]`.
    pub fn is_fixed(&self, t_final: f64) -> bool {
        self.events
            .iter()
            .all(|e| e.time() == 0.0 || e.time() > t_final)
            && self
                .events
                .iter()
                .all(|e| matches!(e, ScheduleEvent::Open { .. }))
    }
}

/// Monotonicity of the crack family: once open, a segment never closes.
pub fn check_h3(schedule: &CrackSchedule) -> bool {
    let mut opened: BTreeMap<SegmentId, bool> = BTreeMap::new();
    for e in schedule.events() {
        match e {
            ScheduleEvent::Open { segment, .. } => {
                opened.insert(*segment, true);
            }
            ScheduleEvent::Close { segment, .. } => {
                if opened.get(segment).copied().unwrap_or(false) {
                    return false;
                }
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Free(usize),
    Dirichlet,
}

/// Admissible displacements at one time level, as a map from the full
/// (unglued) degrees of freedom to reduced unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedSpace {
    pub time_index: usize,
    /// Indices into `mesh.crack_pairs` of the pairs still glued.
    pub tie_constraints: Vec<usize>,
    pub dirichlet_dofs: Vec<usize>,
    /// Representative full dof of each reduced unknown.
    pub free_dofs: Vec<usize>,
    slots: Vec<Slot>,
}

pub fn space_at(
    mesh: &CrackedMesh,
    schedule: &CrackSchedule,
    j: usize,
    tau: f64,
) -> ConstrainedSpace {
    let t = j as f64 * tau + 1e-12 * tau;
    let tie_constraints: Vec<usize> = mesh
        .crack_pairs
        .iter()
        .enumerate()
        .filter(|(_, p)| p.segments.iter().any(|&s| !schedule.is_released(s, t)))
        .map(|(i, _)| i)
        .collect();
    ConstrainedSpace::new(mesh, j, tie_constraints)
}

impl ConstrainedSpace {
    pub fn new(mesh: &CrackedMesh, time_index: usize, tie_constraints: Vec<usize>) -> Self {
        let nc = mesh.ncomp();
        let ndof = mesh.n_dofs();
        let dirichlet_dofs = mesh.dirichlet_dofs();
        let mut slots = vec![Slot::Free(usize::MAX); ndof];
        for &d in &dirichlet_dofs {
            slots[d] = Slot::Dirichlet;
        }
        // minus copies of glued pairs follow their plus node
        let mut follows: Vec<Option<usize>> = vec![None; ndof];
        for &i in &tie_constraints {
            let p = &mesh.crack_pairs[i];
            for c in 0..nc {
                follows[p.minus * nc + c] = Some(p.plus * nc + c);
            }
        }
        let mut free_dofs = Vec::new();
        for d in 0..ndof {
            if slots[d] == Slot::Dirichlet || follows[d].is_some() {
                continue;
            }
            slots[d] = Slot::Free(free_dofs.len());
            free_dofs.push(d);
        }
        for d in 0..ndof {
            if let Some(rep) = follows[d] {
                slots[d] = slots[rep];
            }
        }
        Self {
            time_index,
            tie_constraints,
            dirichlet_dofs,
            free_dofs,
            slots,
        }
    }

    pub fn n_full(&self) -> usize {
        self.slots.len()
    }

    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    /// Reduced index of a full dof, `None` on the Dirichlet boundary.
    pub fn slot(&self, dof: usize) -> Option<usize> {
        match self.slots[dof] {
            Slot::Free(r) => Some(r),
            Slot::Dirichlet => None,
        }
    }

    pub fn same_constraints(&self, other: &Self) -> bool {
        self.tie_constraints == other.tie_constraints && self.dirichlet_dofs == other.dirichlet_dofs
    }

    /// `P w`
    pub fn expand(&self, w: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.n_full(),
            self.slots.iter().map(|s| match s {
                Slot::Free(r) => w[*r],
                Slot::Dirichlet => 0.0,
            }),
        )
    }

    /// `P^T b`
    pub fn reduce(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_free());
        for (d, s) in self.slots.iter().enumerate() {
            if let Slot::Free(r) = s {
                out[*r] += b[d];
            }
        }
        out
    }

    /// Reduced coordinates of a member of the space (left inverse of `expand`).
    pub fn coordinates(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.n_free(), self.free_dofs.iter().map(|&d| v[d]))
    }

    /// Whether `v` vanishes on the Dirichlet dofs and agrees across glued pairs.
    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        let scale = v.amax().max(1.0);
        let back = self.expand(&self.coordinates(v));
        (&back - v).amax() <= tol * scale
    }
}

#[cfg(test)]
mod tests {
    use super::super::{build_mesh, CrackPath, GeometrySpec, Side};
    use super::*;

    fn two_segment_mesh() -> CrackedMesh {
        build_mesh(&GeometrySpec::Rectangle {
            width: 1.0,
            height: 1.0,
            nx: 10,
            ny: 10,
            dirichlet: vec![Side::Left, Side::Right],
            cracks: vec![
                CrackPath {
                    segment: 0,
                    points: vec![[0.2, 0.5], [0.5, 0.5]],
                },
                CrackPath {
                    segment: 1,
                    points: vec![[0.5, 0.5], [0.8, 0.5]],
                },
            ],
        })
        .unwrap()
    }

    fn schedule(r0: ReleaseTime, r1: ReleaseTime) -> CrackSchedule {
        CrackSchedule::from_thresholds(&BTreeMap::from([(0, r0), (1, r1)])).unwrap()
    }

    #[test]
    fn never_schedule_gives_constant_constraints() {
        let m = two_segment_mesh();
        let s = CrackSchedule::never();
        let first = space_at(&m, &s, 0, 0.1);
        for j in 1..=10 {
            assert!(space_at(&m, &s, j, 0.1).same_constraints(&first));
        }
        assert_eq!(first.tie_constraints.len(), m.crack_pairs.len());
        assert!(check_h3(&s));
    }

    #[test]
    fn release_threshold_is_closed_on_the_left() {
        let m = two_segment_mesh();
        let s = schedule(ReleaseTime::At(0.5), ReleaseTime::At(0.5));
        for j in 0..=10 {
            let sp = space_at(&m, &s, j, 0.1);
            if j <= 4 {
                assert_eq!(sp.tie_constraints.len(), m.crack_pairs.len(), "j = {j}");
            } else {
                assert!(sp.tie_constraints.is_empty(), "j = {j}");
            }
        }
    }

    #[test]
    fn constraint_sets_shrink_monotonically() {
        let m = two_segment_mesh();
        let s = schedule(ReleaseTime::At(0.3), ReleaseTime::At(0.6));
        let mut prev = space_at(&m, &s, 0, 0.05);
        let mut sizes = vec![prev.tie_constraints.len()];
        for j in 1..=20 {
            let sp = space_at(&m, &s, j, 0.05);
            assert!(sp
                .tie_constraints
                .iter()
                .all(|p| prev.tie_constraints.contains(p)));
            assert!(sp.n_free() >= prev.n_free());
            assert_eq!(sp.dirichlet_dofs, prev.dirichlet_dofs);
            sizes.push(sp.tie_constraints.len());
            prev = sp;
        }
        assert!(sizes.windows(2).all(|w| w[1] <= w[0]));
        // junction pair waits for both segments
        assert!(sizes[6] > 0 && sizes[12] == 0);
        assert!(sizes[6] < sizes[0]);
    }

    #[test]
    fn h3_detects_regluing() {
        assert!(check_h3(&CrackSchedule::never()));
        assert!(check_h3(&schedule(
            ReleaseTime::At(0.1),
            ReleaseTime::Never
        )));
        let bad = CrackSchedule::from_events(vec![
            ScheduleEvent::Open {
                segment: 0,
                time: 0.2,
            },
            ScheduleEvent::Close {
                segment: 0,
                time: 0.4,
            },
        ])
        .unwrap();
        assert!(!check_h3(&bad));
        assert!(!bad.is_released(0, 0.5));
        assert!(bad.is_released(0, 0.3));
        assert!(CrackSchedule::from_events(vec![ScheduleEvent::Open {
            segment: 0,
            time: -1.0
        }])
        .is_err());
    }

    #[test]
    fn fixed_crack_detection() {
        assert!(CrackSchedule::never().is_fixed(1.0));
        assert!(schedule(ReleaseTime::At(0.0), ReleaseTime::At(2.0)).is_fixed(1.0));
        assert!(!schedule(ReleaseTime::At(0.5), ReleaseTime::Never).is_fixed(1.0));
    }

    #[test]
    fn expand_reduce_are_adjoint_and_membership_works() {
        let m = two_segment_mesh();
        let sp = space_at(&m, &CrackSchedule::never(), 0, 0.1);
        let w = DVector::from_fn(sp.n_free(), |i, _| (i as f64 * 0.37).sin());
        let b = DVector::from_fn(sp.n_full(), |i, _| (i as f64 * 0.11).cos());
        let v = sp.expand(&w);
        assert!((v.dot(&b) - w.dot(&sp.reduce(&b))).abs() < 1e-12);
        assert!(sp.contains(&v, 1e-14));
        assert_eq!(sp.coordinates(&v), w);
        let mut broken = v.clone();
        let pair = &m.crack_pairs[0];
        broken[pair.minus * 2] += 1.0;
        assert!(!sp.contains(&broken, 1e-12));
        let mut on_boundary = v;
        on_boundary[sp.dirichlet_dofs[0]] = 1.0;
        assert!(!sp.contains(&on_boundary, 1e-12));
    }
}
