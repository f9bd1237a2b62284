//! Component-subset algebra and parameter containers.
//!
//! Each group's precision matrix is the sum of the components whose subset
//! contains that group. Off-diagonal parameters are stored per edge with at
//! most one active component; diagonals live in the singleton components and
//! are stored separately.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{BjnsError, Result};

/// Largest group count accepted for the full model (2^12 - 1 components per edge).
pub const MAX_FULL_GROUPS: usize = 12;

/// Largest group count representable by a component bitmask.
pub const MAX_GROUPS: usize = 64;

/// A nonempty subset of groups, stored as a bitmask over 0-based group indices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Component(u64);

impl Component {
    pub fn from_mask(mask: u64) -> Self {
        debug_assert!(mask != 0);
        Component(mask)
    }

    /// Builds a component from 0-based group indices.
    pub fn from_groups(groups: &[usize]) -> Self {
        let mut mask = 0u64;
        for &g in groups {
            assert!(g < MAX_GROUPS, "group index {g} out of range");
            mask |= 1 << g;
        }
        Component(mask)
    }

    pub fn singleton(group: usize) -> Self {
        Component::from_groups(&[group])
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn contains(self, group: usize) -> bool {
        self.0 >> group & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_singleton(self) -> bool {
        self.len() == 1
    }

    pub fn is_subset_of(self, other: Component) -> bool {
        self.0 & !other.0 == 0
    }

    /// Members as ascending 0-based indices.
    pub fn members(self) -> Vec<usize> {
        (0..MAX_GROUPS).filter(|&g| self.contains(g)).collect()
    }

    /// Members as ascending 1-based labels, the form used in files.
    pub fn labels(self) -> Vec<usize> {
        self.members().into_iter().map(|g| g + 1).collect()
    }

    /// Compact label such as `123` (or `1-10-12` when any label has two digits).
    pub fn tag(self) -> String {
        let labels = self.labels();
        if labels.iter().all(|&l| l < 10) {
            labels.iter().map(|l| l.to_string()).collect()
        } else {
            labels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("-")
        }
    }

    /// Canonical ordering: larger subsets first, then reverse-lexicographic on
    /// the sorted member lists. For three groups this yields
    /// {1,2,3},{2,3},{1,3},{1,2},{3},{2},{1}.
    pub fn canonical_cmp(&self, other: &Component) -> Ordering {
        other
            .len()
            .cmp(&self.len())
            .then_with(|| other.members().cmp(&self.members()))
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.labels().iter().map(|l| l.to_string()).collect();
        write!(f, "{{{}}}", labels.join(","))
    }
}

/// All nonempty subsets of `groups` groups in canonical order.
pub fn enumerate_full_components(groups: usize) -> Result<Vec<Component>> {
    if groups == 0 || groups > MAX_FULL_GROUPS {
        return Err(BjnsError::invalid(format!(
            "full model needs 1 <= K <= {MAX_FULL_GROUPS}, got {groups}"
        )));
    }
    let mut all: Vec<Component> = (1u64..(1 << groups)).map(Component).collect();
    all.sort_by(Component::canonical_cmp);
    Ok(all)
}

/// Checks a raw component family given as 1-based label lists.
///
/// Every violation is reported with the offending subset.
pub fn validate_components(groups: usize, components: &[Vec<usize>]) -> std::result::Result<(), Vec<String>> {
    let mut problems = Vec::new();
    if groups == 0 || groups > MAX_GROUPS {
        problems.push(format!("group count {groups} out of range 1..={MAX_GROUPS}"));
        return Err(problems);
    }
    let mut seen: Vec<Component> = Vec::new();
    for raw in components {
        if raw.is_empty() {
            problems.push("empty component []".to_string());
            continue;
        }
        if let Some(bad) = raw.iter().find(|&&g| g == 0 || g > groups) {
            problems.push(format!("component {raw:?} has group {bad} outside 1..={groups}"));
            continue;
        }
        let mut sorted = raw.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            problems.push(format!("component {raw:?} repeats a group"));
            continue;
        }
        let comp = Component::from_groups(&sorted.iter().map(|g| g - 1).collect::<Vec<_>>());
        if seen.contains(&comp) {
            problems.push(format!("duplicate component {comp}"));
            continue;
        }
        seen.push(comp);
    }
    for g in 0..groups {
        if !seen.contains(&Component::singleton(g)) {
            problems.push(format!("missing singleton {{{}}}", g + 1));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems)
    }
}

/// The family of active components defining the decomposition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SpecJson", into = "SpecJson")]
pub struct ModelSpec {
    groups: usize,
    components: Vec<Component>,
    by_group: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct SpecJson {
    #[serde(rename = "K")]
    groups: usize,
    components: Vec<Vec<usize>>,
}

impl TryFrom<SpecJson> for ModelSpec {
    type Error = BjnsError;

    fn try_from(raw: SpecJson) -> Result<Self> {
        ModelSpec::from_labels(raw.groups, &raw.components)
    }
}

impl From<ModelSpec> for SpecJson {
    fn from(spec: ModelSpec) -> Self {
        SpecJson {
            groups: spec.groups,
            components: spec.components.iter().map(|c| c.labels()).collect(),
        }
    }
}

impl ModelSpec {
    /// Builds a spec from components, sorting them into canonical order.
    pub fn new(groups: usize, components: Vec<Component>) -> Result<Self> {
        let labels: Vec<Vec<usize>> = components.iter().map(|c| c.labels()).collect();
        Self::from_labels(groups, &labels)
    }

    /// Builds a spec from 1-based label lists.
    pub fn from_labels(groups: usize, components: &[Vec<usize>]) -> Result<Self> {
        validate_components(groups, components).map_err(BjnsError::InvalidSpec)?;
        let mut comps: Vec<Component> = components
            .iter()
            .map(|raw| Component::from_groups(&raw.iter().map(|g| g - 1).collect::<Vec<_>>()))
            .collect();
        comps.sort_by(Component::canonical_cmp);
        let by_group = (0..groups)
            .map(|g| {
                comps
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.contains(g))
                    .map(|(idx, _)| idx)
                    .collect()
            })
            .collect();
        Ok(ModelSpec {
            groups,
            components: comps,
            by_group,
        })
    }

    /// The full decomposition with all 2^K - 1 components.
    pub fn full(groups: usize) -> Result<Self> {
        Self::new(groups, enumerate_full_components(groups)?)
    }

    /// Singletons plus the pair {a, b} (0-based), the two-group screening model
    /// embedded in a K-group index space.
    pub fn singletons_with(groups: usize, extra: &[Component]) -> Result<Self> {
        let mut comps: Vec<Component> = (0..groups).map(Component::singleton).collect();
        comps.extend_from_slice(extra);
        Self::new(groups, comps)
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn component(&self, idx: usize) -> Component {
        self.components[idx]
    }

    pub fn index_of(&self, comp: Component) -> Option<usize> {
        self.components.iter().position(|&c| c == comp)
    }

    pub fn singleton_index(&self, group: usize) -> usize {
        self.index_of(Component::singleton(group))
            .expect("validated spec always holds every singleton")
    }

    /// Indices of the components containing 0-based `group`.
    pub fn components_containing(&self, group: usize) -> Result<&[usize]> {
        self.by_group
            .get(group)
            .map(Vec::as_slice)
            .ok_or_else(|| BjnsError::invalid(format!("group index {group} outside 0..{}", self.groups)))
    }

    /// Re-checks the structural invariants.
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let labels: Vec<Vec<usize>> = self.components.iter().map(|c| c.labels()).collect();
        validate_components(self.groups, &labels)?;
        if self
            .components
            .windows(2)
            .any(|w| w[0].canonical_cmp(&w[1]) != Ordering::Less)
        {
            return Err(vec!["components are not in canonical order".to_string()]);
        }
        Ok(())
    }
}

/// Number of off-diagonal edges for `p` variables.
#[inline]
pub fn edge_count(p: usize) -> usize {
    p * (p - 1) / 2
}

/// Row-major position of edge (i, j), i < j, among the upper-triangle edges.
#[inline]
pub fn edge_index(p: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < p);
    i * p - i * (i + 1) / 2 + (j - i - 1)
}

/// All edges (i, j), i < j, in row-major order.
pub fn edges(p: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..p).flat_map(move |i| (i + 1..p).map(move |j| (i, j)))
}

/// The coefficient vector of one edge: at most one active component.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct EdgeCoefficient {
    pub component: Option<usize>,
    pub value: f64,
}

impl EdgeCoefficient {
    pub const ABSENT: EdgeCoefficient = EdgeCoefficient {
        component: None,
        value: 0.0,
    };

    pub fn active(component: usize, value: f64) -> Self {
        EdgeCoefficient {
            component: Some(component),
            value,
        }
    }

    pub fn is_present(&self) -> bool {
        self.component.is_some()
    }

    /// Contribution of this edge to group `group`'s precision entry.
    #[inline]
    pub fn omega_entry(&self, spec: &ModelSpec, group: usize) -> f64 {
        match self.component {
            Some(c) if spec.components[c].contains(group) => self.value,
            _ => 0.0,
        }
    }
}

/// All off-diagonal parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaState {
    p: usize,
    edges: Vec<EdgeCoefficient>,
    density: usize,
    version: u64,
}

impl ThetaState {
    pub fn empty(p: usize) -> Self {
        ThetaState {
            p,
            edges: vec![EdgeCoefficient::ABSENT; edge_count(p)],
            density: 0,
            version: 0,
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> EdgeCoefficient {
        self.edges[edge_index(self.p, i, j)]
    }

    #[inline]
    pub fn get_by_index(&self, e: usize) -> EdgeCoefficient {
        self.edges[e]
    }

    pub fn as_slice(&self) -> &[EdgeCoefficient] {
        &self.edges
    }

    /// Number of present edges.
    pub fn density(&self) -> usize {
        self.density
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Overwrites edge (i, j). A present edge must carry a finite nonzero value.
    pub fn set(&mut self, i: usize, j: usize, coef: EdgeCoefficient) {
        debug_assert!(
            coef.component.is_none() || (coef.value.is_finite() && coef.value != 0.0),
            "present edge needs a finite nonzero value"
        );
        let e = edge_index(self.p, i, j);
        let old = self.edges[e];
        self.density = self.density + coef.is_present() as usize - old.is_present() as usize;
        self.edges[e] = if coef.is_present() { coef } else { EdgeCoefficient::ABSENT };
        self.version += 1;
    }
}

/// All diagonal entries, one vector per group.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagState {
    p: usize,
    values: Vec<f64>,
    version: u64,
}

impl DiagState {
    pub fn filled(groups: usize, p: usize, value: f64) -> Self {
        assert!(value > 0.0, "diagonals must be positive");
        DiagState {
            p,
            values: vec![value; groups * p],
            version: 0,
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(BjnsError::invalid("diagonal rows differ in length"));
        }
        if rows.iter().flatten().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(BjnsError::invalid("diagonal entries must be finite and positive"));
        }
        Ok(DiagState {
            p,
            values: rows.into_iter().flatten().collect(),
            version: 0,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn groups(&self) -> usize {
        if self.p == 0 {
            0
        } else {
            self.values.len() / self.p
        }
    }

    #[inline]
    pub fn get(&self, group: usize, i: usize) -> f64 {
        self.values[group * self.p + i]
    }

    pub fn group(&self, group: usize) -> &[f64] {
        &self.values[group * self.p..(group + 1) * self.p]
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn set(&mut self, group: usize, i: usize, value: f64) {
        debug_assert!(value > 0.0 && value.is_finite(), "diagonal must stay positive");
        self.values[group * self.p + i] = value;
        self.version += 1;
    }
}

/// Precision matrix of 0-based group `group` assembled from its components.
pub fn assemble_omega(theta: &ThetaState, delta: &DiagState, spec: &ModelSpec, group: usize) -> Result<DMatrix<f64>> {
    let p = theta.p();
    if delta.p() != p || delta.groups() != spec.groups() {
        return Err(BjnsError::invalid(format!(
            "state shapes disagree: theta p={p}, diag {}x{}, spec K={}",
            delta.groups(),
            delta.p(),
            spec.groups()
        )));
    }
    if group >= spec.groups() {
        return Err(BjnsError::invalid(format!("group index {group} outside 0..{}", spec.groups())));
    }
    let mut omega = DMatrix::zeros(p, p);
    for i in 0..p {
        omega[(i, i)] = delta.get(group, i);
    }
    for (i, j) in edges(p) {
        let w = theta.get(i, j).omega_entry(spec, group);
        omega[(i, j)] = w;
        omega[(j, i)] = w;
    }
    Ok(omega)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(comps: &[Component]) -> Vec<Vec<usize>> {
        comps.iter().map(|c| c.labels()).collect()
    }

    #[test]
    fn full_components_follow_canonical_order() {
        assert_eq!(labels(&enumerate_full_components(1).unwrap()), vec![vec![1]]);
        assert_eq!(
            labels(&enumerate_full_components(2).unwrap()),
            vec![vec![1, 2], vec![2], vec![1]]
        );
        assert_eq!(
            labels(&enumerate_full_components(3).unwrap()),
            vec![vec![1, 2, 3], vec![2, 3], vec![1, 3], vec![1, 2], vec![3], vec![2], vec![1]]
        );
        assert!(enumerate_full_components(0).is_err());
        assert!(enumerate_full_components(13).is_err());
    }

    #[test]
    fn full_family_size_and_singletons() {
        for k in 1..=8 {
            let comps = enumerate_full_components(k).unwrap();
            assert_eq!(comps.len(), (1 << k) - 1);
            for g in 0..k {
                assert_eq!(comps.iter().filter(|&&c| c == Component::singleton(g)).count(), 1);
            }
        }
    }

    #[test]
    fn components_containing_group() {
        let spec = ModelSpec::full(3).unwrap();
        let idx = spec.components_containing(0).unwrap();
        let got: Vec<Vec<usize>> = idx.iter().map(|&i| spec.component(i).labels()).collect();
        assert_eq!(got, vec![vec![1, 2, 3], vec![1, 3], vec![1, 2], vec![1]]);

        for k in 1..=5 {
            let spec = ModelSpec::full(k).unwrap();
            for g in 0..k {
                assert_eq!(spec.components_containing(g).unwrap().len(), 1 << (k - 1));
            }
        }

        let one = ModelSpec::full(1).unwrap();
        assert_eq!(one.components_containing(0).unwrap(), &[0]);

        let reduced = ModelSpec::from_labels(2, &[vec![1, 2], vec![1], vec![2]]).unwrap();
        let idx = reduced.components_containing(1).unwrap();
        let got: Vec<Vec<usize>> = idx.iter().map(|&i| reduced.component(i).labels()).collect();
        assert_eq!(got, vec![vec![1, 2], vec![2]]);
        assert!(reduced.components_containing(2).is_err());
    }

    #[test]
    fn validation_reports_each_violation() {
        assert!(ModelSpec::full(3).unwrap().validate().is_ok());

        let err = validate_components(3, &[vec![1, 2, 3], vec![1], vec![3]]).unwrap_err();
        assert_eq!(err, vec!["missing singleton {2}".to_string()]);

        let err = validate_components(2, &[vec![1, 2], vec![2, 1], vec![1], vec![2]]).unwrap_err();
        assert!(err[0].contains("duplicate component {1,2}"), "{err:?}");

        let err = validate_components(2, &[vec![1, 3], vec![], vec![1], vec![2]]).unwrap_err();
        assert_eq!(err.len(), 2);
    }

    #[test]
    fn spec_json_uses_canonical_label_lists() {
        let spec = ModelSpec::from_labels(3, &[vec![1], vec![2], vec![3], vec![1, 2, 3]]).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"K":3,"components":[[1,2,3],[3],[2],[1]]}"#);
        let back: ModelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<ModelSpec>(r#"{"K":2,"components":[[1]]}"#).is_err());
    }

    #[test]
    fn edge_indexing_is_row_major() {
        let p = 5;
        for (e, (i, j)) in edges(p).enumerate() {
            assert_eq!(edge_index(p, i, j), e);
        }
        assert_eq!(edges(p).count(), edge_count(p));
    }

    #[test]
    fn assemble_identity_and_shared_edges() {
        let spec = ModelSpec::full(2).unwrap();
        let mut theta = ThetaState::empty(3);
        let delta = DiagState::filled(2, 3, 1.0);
        for k in 0..2 {
            assert_eq!(assemble_omega(&theta, &delta, &spec, k).unwrap(), DMatrix::identity(3, 3));
        }

        let shared = spec.index_of(Component::from_groups(&[0, 1])).unwrap();
        theta.set(0, 1, EdgeCoefficient::active(shared, 0.5));
        let o1 = assemble_omega(&theta, &delta, &spec, 0).unwrap();
        let o2 = assemble_omega(&theta, &delta, &spec, 1).unwrap();
        assert_eq!((o1[(0, 1)], o1[(1, 0)], o2[(0, 1)]), (0.5, 0.5, 0.5));

        let only2 = spec.singleton_index(1);
        theta.set(0, 1, EdgeCoefficient::active(only2, 0.5));
        let o1 = assemble_omega(&theta, &delta, &spec, 0).unwrap();
        let o2 = assemble_omega(&theta, &delta, &spec, 1).unwrap();
        assert_eq!(o1[(0, 1)], 0.0);
        assert_eq!(o2[(0, 1)], 0.5);
        assert_eq!(theta.density(), 1);
    }

    #[test]
    fn setting_one_component_touches_only_member_groups() {
        let spec = ModelSpec::full(3).unwrap();
        let delta = DiagState::filled(3, 4, 2.0);
        let before = ThetaState::empty(4);
        for c in 0..spec.len() {
            let mut after = before.clone();
            after.set(1, 3, EdgeCoefficient::active(c, -0.7));
            for k in 0..3 {
                let diff = assemble_omega(&after, &delta, &spec, k).unwrap()
                    - assemble_omega(&before, &delta, &spec, k).unwrap();
                let expected = if spec.component(c).contains(k) { -0.7 } else { 0.0 };
                for r in 0..4 {
                    for s in 0..4 {
                        let want = if (r, s) == (1, 3) || (r, s) == (3, 1) { expected } else { 0.0 };
                        assert_eq!(diff[(r, s)], want);
                    }
                }
            }
        }
    }
}
