//! Penalty evaluation and closed-form proximal operators for the lasso,
//! group lasso and sparse-group-lasso families, including their adaptive
//! variants.
//!
//! Every supported penalty reduces to
//!
//! ```text
//! penalty(β) = Σ_j l1[j]·|β_j|  +  Σ_l grp[l]·‖β^l‖₂
//! ```
//!
//! for per-coordinate levels `l1` and per-group levels `grp` (which carry the
//! √p_l group-size factor). The proximal operator of that sum is the exact
//! composition: elementwise soft-thresholding first, block soft-thresholding
//! second.

use ndarray::Array1;

use crate::error::{Error, Result};

/// Partition of the predictors into groups, built from arbitrary integer
/// labels. Labels are remapped to dense ids 0..K−1 in first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStructure {
    membership: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl GroupStructure {
    pub fn from_labels(labels: &[i64]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidParameter(
                "group labels must cover at least one predictor".into(),
            ));
        }
        let mut seen: Vec<i64> = Vec::new();
        let mut membership = Vec::with_capacity(labels.len());
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (j, &label) in labels.iter().enumerate() {
            let id = match seen.iter().position(|&s| s == label) {
                Some(id) => id,
                None => {
                    seen.push(label);
                    members.push(Vec::new());
                    seen.len() - 1
                }
            };
            membership.push(id);
            members[id].push(j);
        }
        Ok(GroupStructure {
            membership,
            members,
        })
    }

    pub fn num_groups(&self) -> usize {
        self.members.len()
    }

    pub fn num_predictors(&self) -> usize {
        self.membership.len()
    }

    /// Dense group id of each predictor.
    pub fn membership(&self) -> &[usize] {
        &self.membership
    }

    /// Predictor indices of group `g`.
    pub fn members(&self, g: usize) -> &[usize] {
        &self.members[g]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    pub fn block_norm(&self, beta: &[f64], g: usize) -> f64 {
        self.members[g]
            .iter()
            .map(|&j| beta[j] * beta[j])
            .sum::<f64>()
            .sqrt()
    }
}

/// Penalty family. The string names accepted by [`PenaltyKind::from_name`]
/// mirror the command-line vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyKind {
    None,
    Lasso,
    GroupLasso,
    SparseGroupLasso,
    AdaptiveLasso,
    AdaptiveGroupLasso,
    AdaptiveSparseGroupLasso,
    /// Sparse group lasso with adaptive weights on the ℓ1 part only.
    AdaptiveSglLassoPart,
    /// Sparse group lasso with adaptive weights on the group part only.
    AdaptiveSglGroupPart,
}

impl PenaltyKind {
    pub const ALL_NAMES: [&'static str; 9] = [
        "none",
        "lasso",
        "gl",
        "sgl",
        "alasso",
        "agl",
        "asgl",
        "asgl_lasso",
        "asgl_gl",
    ];

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "none" => PenaltyKind::None,
            "lasso" => PenaltyKind::Lasso,
            "gl" => PenaltyKind::GroupLasso,
            "sgl" => PenaltyKind::SparseGroupLasso,
            "alasso" => PenaltyKind::AdaptiveLasso,
            "agl" => PenaltyKind::AdaptiveGroupLasso,
            "asgl" => PenaltyKind::AdaptiveSparseGroupLasso,
            "asgl_lasso" => PenaltyKind::AdaptiveSglLassoPart,
            "asgl_gl" => PenaltyKind::AdaptiveSglGroupPart,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown penalization {other:?}; valid values are {}",
                    Self::ALL_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::None => "none",
            PenaltyKind::Lasso => "lasso",
            PenaltyKind::GroupLasso => "gl",
            PenaltyKind::SparseGroupLasso => "sgl",
            PenaltyKind::AdaptiveLasso => "alasso",
            PenaltyKind::AdaptiveGroupLasso => "agl",
            PenaltyKind::AdaptiveSparseGroupLasso => "asgl",
            PenaltyKind::AdaptiveSglLassoPart => "asgl_lasso",
            PenaltyKind::AdaptiveSglGroupPart => "asgl_gl",
        }
    }

    /// α balances the ℓ1 and group parts; only the SGL family carries both.
    pub fn uses_alpha(self) -> bool {
        matches!(
            self,
            PenaltyKind::SparseGroupLasso
                | PenaltyKind::AdaptiveSparseGroupLasso
                | PenaltyKind::AdaptiveSglLassoPart
                | PenaltyKind::AdaptiveSglGroupPart
        )
    }

    pub fn has_l1_part(self) -> bool {
        !matches!(
            self,
            PenaltyKind::None | PenaltyKind::GroupLasso | PenaltyKind::AdaptiveGroupLasso
        )
    }

    pub fn has_group_part(self) -> bool {
        !matches!(
            self,
            PenaltyKind::None | PenaltyKind::Lasso | PenaltyKind::AdaptiveLasso
        )
    }

    pub fn uses_lasso_weights(self) -> bool {
        matches!(
            self,
            PenaltyKind::AdaptiveLasso
                | PenaltyKind::AdaptiveSparseGroupLasso
                | PenaltyKind::AdaptiveSglLassoPart
        )
    }

    pub fn uses_gl_weights(self) -> bool {
        matches!(
            self,
            PenaltyKind::AdaptiveGroupLasso
                | PenaltyKind::AdaptiveSparseGroupLasso
                | PenaltyKind::AdaptiveSglGroupPart
        )
    }

    pub fn is_adaptive(self) -> bool {
        self.uses_lasso_weights() || self.uses_gl_weights()
    }
}

/// A fully specified penalty: family, λ, α (SGL family only) and adaptive
/// weight vectors where the family calls for them.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub lambda1: f64,
    pub alpha: Option<f64>,
    /// Per-predictor weights w̃, length p.
    pub lasso_weights: Option<Array1<f64>>,
    /// Per-group weights ṽ, length K.
    pub gl_weights: Option<Array1<f64>>,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, lambda1: f64) -> Self {
        PenaltySpec {
            kind,
            lambda1,
            alpha: None,
            lasso_weights: None,
            gl_weights: None,
        }
    }

    pub fn none() -> Self {
        PenaltySpec::new(PenaltyKind::None, 0.0)
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        PenaltySpec {
            alpha: Some(alpha),
            ..self
        }
    }

    pub fn with_lasso_weights(self, w: Array1<f64>) -> Self {
        PenaltySpec {
            lasso_weights: Some(w),
            ..self
        }
    }

    pub fn with_gl_weights(self, v: Array1<f64>) -> Self {
        PenaltySpec {
            gl_weights: Some(v),
            ..self
        }
    }

    /// Check internal consistency against a problem with `p` predictors and
    /// the given group structure.
    pub fn validate(&self, p: usize, groups: Option<&GroupStructure>) -> Result<()> {
        if !(self.lambda1.is_finite() && self.lambda1 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda1 must be finite and nonnegative, got {}",
                self.lambda1
            )));
        }
        if self.kind.uses_alpha() {
            match self.alpha {
                Some(a) if a.is_finite() && (0.0..=1.0).contains(&a) => {}
                Some(a) => {
                    return Err(Error::InvalidParameter(format!(
                        "alpha must lie in [0, 1], got {a}"
                    )))
                }
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "penalization {:?} requires alpha",
                        self.kind.name()
                    )))
                }
            }
        } else if self.alpha.is_some() {
            return Err(Error::InvalidParameter(format!(
                "penalization {:?} does not use alpha",
                self.kind.name()
            )));
        }
        if self.kind.has_group_part() {
            let groups = groups.ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "penalization {:?} requires a group index",
                    self.kind.name()
                ))
            })?;
            if groups.num_predictors() != p {
                return Err(Error::DimensionMismatch(format!(
                    "group structure covers {} predictors but the data has {p}",
                    groups.num_predictors()
                )));
            }
        }
        match (&self.lasso_weights, self.kind.uses_lasso_weights()) {
            (Some(w), true) => {
                if w.len() != p {
                    return Err(Error::DimensionMismatch(format!(
                        "lasso_weights has {} entries but the data has {p} predictors",
                        w.len()
                    )));
                }
                if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::InvalidParameter(
                        "lasso_weights must be finite and nonnegative".into(),
                    ));
                }
            }
            (None, true) => {
                return Err(Error::InvalidParameter(format!(
                    "penalization {:?} requires lasso_weights",
                    self.kind.name()
                )))
            }
            (Some(_), false) => {
                return Err(Error::InvalidParameter(format!(
                    "penalization {:?} does not use lasso_weights",
                    self.kind.name()
                )))
            }
            (None, false) => {}
        }
        match (&self.gl_weights, self.kind.uses_gl_weights()) {
            (Some(v), true) => {
                let k = groups.map(GroupStructure::num_groups).unwrap_or(0);
                if v.len() != k {
                    return Err(Error::DimensionMismatch(format!(
                        "gl_weights has {} entries but the data has {k} groups",
                        v.len()
                    )));
                }
                if v.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(Error::InvalidParameter(
                        "gl_weights must be finite and nonnegative".into(),
                    ));
                }
            }
            (None, true) => {
                return Err(Error::InvalidParameter(format!(
                    "penalization {:?} requires gl_weights",
                    self.kind.name()
                )))
            }
            (Some(_), false) => {
                return Err(Error::InvalidParameter(format!(
                    "penalization {:?} does not use gl_weights",
                    self.kind.name()
                )))
            }
            (None, false) => {}
        }
        Ok(())
    }
}

/// A penalty resolved to concrete per-coordinate and per-group levels.
/// All solver arithmetic goes through this form.
#[derive(Debug, Clone)]
pub struct PenaltyLevels {
    l1: Vec<f64>,
    grp: Vec<f64>,
    groups: Option<GroupStructure>,
}

impl PenaltyLevels {
    pub fn from_spec(
        spec: &PenaltySpec,
        p: usize,
        groups: Option<&GroupStructure>,
    ) -> Result<Self> {
        spec.validate(p, groups)?;
        let lambda = spec.lambda1;
        let kind = spec.kind;
        // α weights the ℓ1 part, 1−α the group part; outside the SGL family
        // each part present carries the full λ.
        let (l1_scale, grp_scale) = if kind.uses_alpha() {
            let a = spec.alpha.expect("validated");
            (lambda * a, lambda * (1.0 - a))
        } else {
            (lambda, lambda)
        };
        let l1 = if kind.has_l1_part() {
            match &spec.lasso_weights {
                Some(w) => w.iter().map(|wj| l1_scale * wj).collect(),
                None => vec![l1_scale; p],
            }
        } else {
            vec![0.0; p]
        };
        let (grp, groups_owned) = if kind.has_group_part() {
            let gs = groups.expect("validated").clone();
            let levels = (0..gs.num_groups())
                .map(|g| {
                    let size_factor = (gs.members(g).len() as f64).sqrt();
                    let v = spec.gl_weights.as_ref().map(|v| v[g]).unwrap_or(1.0);
                    grp_scale * size_factor * v
                })
                .collect();
            (levels, Some(gs))
        } else {
            (Vec::new(), None)
        };
        Ok(PenaltyLevels {
            l1,
            grp,
            groups: groups_owned,
        })
    }

    pub fn num_predictors(&self) -> usize {
        self.l1.len()
    }

    pub fn value_slice(&self, beta: &[f64]) -> f64 {
        let mut total = 0.0;
        for (b, l) in beta.iter().zip(&self.l1) {
            total += l * b.abs();
        }
        if let Some(gs) = &self.groups {
            for (g, level) in self.grp.iter().enumerate() {
                total += level * gs.block_norm(beta, g);
            }
        }
        total
    }

    pub fn value(&self, beta: &Array1<f64>) -> f64 {
        self.value_slice(beta.as_slice().expect("contiguous"))
    }

    /// Exact proximal point of `step·penalty` at `v`: soft-threshold each
    /// coordinate at `step·l1[j]`, then shrink each group block at
    /// `step·grp[l]`.
    pub fn prox_into(&self, v: &[f64], step: f64, out: &mut [f64]) {
        debug_assert_eq!(v.len(), out.len());
        for j in 0..v.len() {
            out[j] = soft_threshold(v[j], step * self.l1[j]);
        }
        if let Some(gs) = &self.groups {
            for (g, level) in self.grp.iter().enumerate() {
                let t = step * level;
                if t == 0.0 {
                    continue;
                }
                let norm = gs.block_norm(out, g);
                let factor = if norm > t { 1.0 - t / norm } else { 0.0 };
                for &j in gs.members(g) {
                    out[j] *= factor;
                }
            }
        }
    }

    pub fn prox(&self, v: &Array1<f64>, step: f64) -> Array1<f64> {
        let mut out = Array1::zeros(v.len());
        self.prox_into(
            v.as_slice().expect("contiguous"),
            step,
            out.as_slice_mut().expect("contiguous"),
        );
        out
    }

    /// Upper bound on the ∞-norm distance from `r` to the subdifferential of
    /// the penalty at `beta`. Zero (within tolerance) certifies that `r` is a
    /// subgradient, which is the stationarity condition when `r` is the
    /// negative smooth gradient.
    pub fn subgradient_gap(&self, beta: &[f64], r: &[f64]) -> f64 {
        let p = beta.len();
        let mut res: Vec<f64> = r.to_vec();
        // Fixed ℓ1 part at nonzero coordinates; interval shrink at zeros.
        for j in 0..p {
            if beta[j] != 0.0 {
                res[j] -= self.l1[j] * beta[j].signum();
            } else {
                res[j] = soft_threshold(res[j], self.l1[j]);
            }
        }
        let mut gap = 0.0f64;
        match &self.groups {
            None => {
                for v in &res {
                    gap = gap.max(v.abs());
                }
            }
            Some(gs) => {
                for (g, level) in self.grp.iter().enumerate() {
                    let norm = gs.block_norm(beta, g);
                    if norm > 0.0 {
                        for &j in gs.members(g) {
                            let fixed = level * beta[j] / norm;
                            gap = gap.max((res[j] - fixed).abs());
                        }
                    } else {
                        // Zero block: any subgradient inside the radius-level
                        // ball is admissible.
                        let mut block_norm = 0.0;
                        for &j in gs.members(g) {
                            block_norm += res[j] * res[j];
                        }
                        block_norm = block_norm.sqrt();
                        if block_norm > *level {
                            let scale = level / block_norm;
                            for &j in gs.members(g) {
                                gap = gap.max((res[j] * (1.0 - scale)).abs());
                            }
                        }
                    }
                }
            }
        }
        gap
    }
}

#[inline]
pub(crate) fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Penalty value at `beta`: λ‖β‖₁, λΣ√p_l‖β^l‖₂, or their α-mixed and
/// weighted combinations, depending on the kind.
pub fn penalty_value(
    spec: &PenaltySpec,
    beta: &Array1<f64>,
    groups: Option<&GroupStructure>,
) -> Result<f64> {
    let levels = PenaltyLevels::from_spec(spec, beta.len(), groups)?;
    Ok(levels.value(beta))
}

/// Componentwise soft-thresholding sign(v_j)·max(|v_j| − threshold_j, 0).
pub fn prox_l1(v: &Array1<f64>, threshold: &Array1<f64>) -> Result<Array1<f64>> {
    if v.len() != threshold.len() {
        return Err(Error::DimensionMismatch(format!(
            "v has {} entries but threshold has {}",
            v.len(),
            threshold.len()
        )));
    }
    if threshold.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidParameter(
            "thresholds must be finite and nonnegative".into(),
        ));
    }
    Ok(Array1::from_iter(
        v.iter()
            .zip(threshold.iter())
            .map(|(&vj, &tj)| soft_threshold(vj, tj)),
    ))
}

/// Blockwise shrinkage v^l·max(1 − t_l/‖v^l‖₂, 0); a zero block stays zero.
pub fn prox_group(
    v: &Array1<f64>,
    groups: &GroupStructure,
    group_threshold: &Array1<f64>,
) -> Result<Array1<f64>> {
    if v.len() != groups.num_predictors() {
        return Err(Error::DimensionMismatch(format!(
            "v has {} entries but the group structure covers {}",
            v.len(),
            groups.num_predictors()
        )));
    }
    if group_threshold.len() != groups.num_groups() {
        return Err(Error::DimensionMismatch(format!(
            "group_threshold has {} entries but there are {} groups",
            group_threshold.len(),
            groups.num_groups()
        )));
    }
    if group_threshold.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidParameter(
            "thresholds must be finite and nonnegative".into(),
        ));
    }
    let mut out = v.clone();
    let slice = out.as_slice_mut().expect("contiguous");
    for g in 0..groups.num_groups() {
        let t = group_threshold[g];
        if t == 0.0 {
            continue;
        }
        let norm = groups.block_norm(slice, g);
        let factor = if norm > t { 1.0 - t / norm } else { 0.0 };
        for &j in groups.members(g) {
            slice[j] *= factor;
        }
    }
    Ok(out)
}

/// Proximal operator of `step·penalty` for any supported penalty spec.
pub fn prox_penalty(
    spec: &PenaltySpec,
    v: &Array1<f64>,
    step: f64,
    groups: Option<&GroupStructure>,
) -> Result<Array1<f64>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "prox step must be positive, got {step}"
        )));
    }
    let levels = PenaltyLevels::from_spec(spec, v.len(), groups)?;
    Ok(levels.prox(v, step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn single_group(p: usize) -> GroupStructure {
        GroupStructure::from_labels(&vec![0; p]).unwrap()
    }

    #[test]
    fn group_labels_remap_by_first_appearance() {
        let gs = GroupStructure::from_labels(&[7, 7, -2, 7, 3]).unwrap();
        assert_eq!(gs.num_groups(), 3);
        assert_eq!(gs.membership(), &[0, 0, 1, 0, 2]);
        assert_eq!(gs.sizes(), vec![3, 1, 1]);
        assert_eq!(gs.members(0), &[0, 1, 3]);
    }

    #[test]
    fn lasso_value() {
        let spec = PenaltySpec::new(PenaltyKind::Lasso, 0.1);
        let v = penalty_value(&spec, &array![1.0, -2.0, 0.0], None).unwrap();
        assert_abs_diff_eq!(v, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn group_lasso_value_single_group() {
        // λ·√p·‖β‖₂ = 2·√2·√5
        let spec = PenaltySpec::new(PenaltyKind::GroupLasso, 2.0);
        let gs = single_group(2);
        let v = penalty_value(&spec, &array![1.0, -2.0], Some(&gs)).unwrap();
        assert_abs_diff_eq!(v, 2.0 * 2.0f64.sqrt() * 5.0f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn zero_beta_gives_zero_for_every_kind() {
        let gs = GroupStructure::from_labels(&[0, 0, 1]).unwrap();
        let beta = Array1::zeros(3);
        for kind in [
            PenaltyKind::None,
            PenaltyKind::Lasso,
            PenaltyKind::GroupLasso,
            PenaltyKind::SparseGroupLasso,
            PenaltyKind::AdaptiveLasso,
            PenaltyKind::AdaptiveGroupLasso,
            PenaltyKind::AdaptiveSparseGroupLasso,
            PenaltyKind::AdaptiveSglLassoPart,
            PenaltyKind::AdaptiveSglGroupPart,
        ] {
            let mut spec = PenaltySpec::new(kind, 1.5);
            if kind.uses_alpha() {
                spec = spec.with_alpha(0.4);
            }
            if kind.uses_lasso_weights() {
                spec = spec.with_lasso_weights(array![1.0, 2.0, 3.0]);
            }
            if kind.uses_gl_weights() {
                spec = spec.with_gl_weights(array![1.0, 2.0]);
            }
            assert_eq!(penalty_value(&spec, &beta, Some(&gs)).unwrap(), 0.0);
        }
    }

    #[test]
    fn sgl_at_alpha_one_equals_lasso() {
        let gs = GroupStructure::from_labels(&[0, 1, 1]).unwrap();
        let beta = array![0.5, -1.5, 2.0];
        let sgl = PenaltySpec::new(PenaltyKind::SparseGroupLasso, 0.8).with_alpha(1.0);
        let lasso = PenaltySpec::new(PenaltyKind::Lasso, 0.8);
        assert_abs_diff_eq!(
            penalty_value(&sgl, &beta, Some(&gs)).unwrap(),
            penalty_value(&lasso, &beta, None).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn adaptive_with_unit_weights_matches_non_adaptive() {
        let gs = GroupStructure::from_labels(&[0, 0, 1]).unwrap();
        let beta = array![0.3, -2.0, 1.2];
        let plain = PenaltySpec::new(PenaltyKind::SparseGroupLasso, 0.7).with_alpha(0.35);
        let adaptive = PenaltySpec::new(PenaltyKind::AdaptiveSparseGroupLasso, 0.7)
            .with_alpha(0.35)
            .with_lasso_weights(Array1::ones(3))
            .with_gl_weights(Array1::ones(2));
        assert_eq!(
            penalty_value(&plain, &beta, Some(&gs)).unwrap(),
            penalty_value(&adaptive, &beta, Some(&gs)).unwrap()
        );
    }

    #[test]
    fn prox_l1_examples() {
        let out = prox_l1(&array![3.0, -3.0], &array![1.0, 1.0]).unwrap();
        assert_eq!(out, array![2.0, -2.0]);
        let out = prox_l1(&array![0.5], &array![1.0]).unwrap();
        assert_eq!(out, array![0.0]);
        let v = array![1.25, -0.75];
        assert_eq!(prox_l1(&v, &Array1::zeros(2)).unwrap(), v);
        assert!(prox_l1(&v, &array![-0.1, 0.0]).is_err());
    }

    #[test]
    fn prox_l1_matches_one_dimensional_grid_search() {
        // Oracle: minimize ½(z−v)² + t|z| over a fine grid.
        for &(v, t) in &[(3.0, 1.0), (-2.5, 0.7), (0.4, 0.9), (-0.1, 0.05)] {
            let mut best = f64::INFINITY;
            let mut best_z = 0.0;
            let mut z = -5.0f64;
            while z <= 5.0 {
                let obj = 0.5 * (z - v) * (z - v) + t * z.abs();
                if obj < best {
                    best = obj;
                    best_z = z;
                }
                z += 1e-4;
            }
            let got = prox_l1(&array![v], &array![t]).unwrap()[0];
            assert_abs_diff_eq!(got, best_z, epsilon = 2e-4);
        }
    }

    #[test]
    fn prox_group_examples() {
        let gs = single_group(2);
        let out = prox_group(&array![3.0, 4.0], &gs, &array![2.5]).unwrap();
        assert_eq!(out, array![1.5, 2.0]);
        // Shrink-to-zero regime.
        let out = prox_group(&array![0.3, 0.4], &gs, &array![2.5]).unwrap();
        assert_eq!(out, array![0.0, 0.0]);
        // Zero threshold is the identity.
        let v = array![3.0, 4.0];
        assert_eq!(prox_group(&v, &gs, &array![0.0]).unwrap(), v);
    }

    #[test]
    fn prox_penalty_none_is_identity() {
        let v = array![1.0, -2.0, 3.0];
        let out = prox_penalty(&PenaltySpec::none(), &v, 0.5, None).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn sgl_prox_at_alpha_one_is_soft_thresholding() {
        let gs = single_group(3);
        let v = array![2.0, -0.3, 1.1];
        let spec = PenaltySpec::new(PenaltyKind::SparseGroupLasso, 0.9).with_alpha(1.0);
        let got = prox_penalty(&spec, &v, 0.6, Some(&gs)).unwrap();
        let want = prox_l1(&v, &Array1::from_elem(3, 0.6 * 0.9)).unwrap();
        assert_eq!(got, want);
    }

    /// Coarse-to-fine grid minimizer of ½‖z−v‖² + step·penalty(z) for small p.
    /// Two stages reach an effective 1e-3 resolution near the optimum.
    fn grid_oracle(v: &[f64], levels: &PenaltyLevels, step: f64) -> (Vec<f64>, f64) {
        let objective = |z: &[f64]| -> f64 {
            let mut q = 0.0;
            for i in 0..z.len() {
                q += 0.5 * (z[i] - v[i]) * (z[i] - v[i]);
            }
            q + step * levels.value_slice(z)
        };
        let search = |center: &[f64], half_width: f64, step_size: f64| -> (Vec<f64>, f64) {
            let p = center.len();
            let steps = (2.0 * half_width / step_size).round() as usize + 1;
            let mut idx = vec![0usize; p];
            let mut best = f64::INFINITY;
            let mut best_z = center.to_vec();
            let mut z = vec![0.0; p];
            loop {
                for i in 0..p {
                    z[i] = center[i] - half_width + idx[i] as f64 * step_size;
                }
                let obj = objective(&z);
                if obj < best {
                    best = obj;
                    best_z = z.clone();
                }
                // Odometer increment over the p-dimensional grid.
                let mut carry = 0;
                while carry < p {
                    idx[carry] += 1;
                    if idx[carry] < steps {
                        break;
                    }
                    idx[carry] = 0;
                    carry += 1;
                }
                if carry == p {
                    break;
                }
            }
            (best_z, best)
        };
        let (coarse, _) = search(&vec![0.0; v.len()], 4.0, 0.05);
        search(&coarse, 0.1, 1e-3)
    }

    #[test]
    fn sgl_prox_matches_grid_minimizer() {
        let gs = single_group(3);
        let spec = PenaltySpec::new(PenaltyKind::SparseGroupLasso, 1.0).with_alpha(0.5);
        let levels = PenaltyLevels::from_spec(&spec, 3, Some(&gs)).unwrap();
        let step = 0.7;
        for v in [[2.1, -1.3, 0.4], [0.2, 0.1, -0.3], [-3.0, 2.5, 1.9]] {
            let got = levels.prox(&Array1::from_vec(v.to_vec()), step);
            let (oracle_z, oracle_obj) = grid_oracle(&v, &levels, step);
            let got_obj = {
                let z = got.as_slice().unwrap();
                let mut q = 0.0;
                for i in 0..3 {
                    q += 0.5 * (z[i] - v[i]) * (z[i] - v[i]);
                }
                q + step * levels.value_slice(z)
            };
            assert!(
                got_obj <= oracle_obj + 1e-4,
                "prox objective {got_obj} worse than grid oracle {oracle_obj}"
            );
            for i in 0..3 {
                assert_abs_diff_eq!(got[i], oracle_z[i], epsilon = 5e-3);
            }
        }
    }

    #[test]
    fn missing_groups_or_weights_are_rejected() {
        let beta = array![1.0, 2.0];
        let spec = PenaltySpec::new(PenaltyKind::GroupLasso, 1.0);
        assert!(penalty_value(&spec, &beta, None).is_err());
        let spec = PenaltySpec::new(PenaltyKind::AdaptiveLasso, 1.0);
        assert!(penalty_value(&spec, &beta, None).is_err());
        let spec = PenaltySpec::new(PenaltyKind::Lasso, 1.0).with_alpha(0.5);
        assert!(penalty_value(&spec, &beta, None).is_err());
    }

    fn arbitrary_spec() -> impl Strategy<Value = (PenaltySpec, GroupStructure, usize)> {
        let kinds = prop_oneof![
            Just(PenaltyKind::None),
            Just(PenaltyKind::Lasso),
            Just(PenaltyKind::GroupLasso),
            Just(PenaltyKind::SparseGroupLasso),
            Just(PenaltyKind::AdaptiveLasso),
            Just(PenaltyKind::AdaptiveGroupLasso),
            Just(PenaltyKind::AdaptiveSparseGroupLasso),
            Just(PenaltyKind::AdaptiveSglLassoPart),
            Just(PenaltyKind::AdaptiveSglGroupPart),
        ];
        (kinds, 1usize..6, 0.0f64..2.0, 0.0f64..=1.0).prop_flat_map(|(kind, p, lambda, alpha)| {
            (
                Just(kind),
                Just(p),
                Just(lambda),
                Just(alpha),
                proptest::collection::vec(0i64..3, p),
                proptest::collection::vec(0.01f64..3.0, p),
                proptest::collection::vec(0.01f64..3.0, p),
            )
                .prop_map(|(kind, p, lambda, alpha, labels, lw, vw)| {
                    let gs = GroupStructure::from_labels(&labels).unwrap();
                    let mut spec = PenaltySpec::new(kind, lambda);
                    if kind.uses_alpha() {
                        spec = spec.with_alpha(alpha);
                    }
                    if kind.uses_lasso_weights() {
                        spec = spec.with_lasso_weights(Array1::from_vec(lw));
                    }
                    if kind.uses_gl_weights() {
                        spec = spec.with_gl_weights(Array1::from_vec(
                            vw[..gs.num_groups()].to_vec(),
                        ));
                    }
                    (spec, gs, p)
                })
        })
    }

    proptest! {
        #[test]
        fn prox_satisfies_subgradient_inclusion(
            (spec, gs, p) in arbitrary_spec(),
            raw in proptest::collection::vec(-5.0f64..5.0, 6),
            step in 0.001f64..2.0,
        ) {
            let v = Array1::from_vec(raw[..p].to_vec());
            let levels = PenaltyLevels::from_spec(&spec, p, Some(&gs)).unwrap();
            let z = levels.prox(&v, step);
            // Optimality: (v − z)/step must be a subgradient of the penalty at z.
            let r: Vec<f64> = v.iter().zip(z.iter()).map(|(a, b)| (a - b) / step).collect();
            let gap = levels.subgradient_gap(z.as_slice().unwrap(), &r);
            prop_assert!(gap <= 1e-8, "subgradient gap {gap}");
        }

        #[test]
        fn prox_is_nonexpansive(
            (spec, gs, p) in arbitrary_spec(),
            raw_u in proptest::collection::vec(-5.0f64..5.0, 6),
            raw_v in proptest::collection::vec(-5.0f64..5.0, 6),
            step in 0.001f64..2.0,
        ) {
            let u = Array1::from_vec(raw_u[..p].to_vec());
            let v = Array1::from_vec(raw_v[..p].to_vec());
            let levels = PenaltyLevels::from_spec(&spec, p, Some(&gs)).unwrap();
            let pu = levels.prox(&u, step);
            let pv = levels.prox(&v, step);
            let out: f64 = pu.iter().zip(pv.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            let inp: f64 = u.iter().zip(v.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            prop_assert!(out.sqrt() <= inp.sqrt() + 1e-12);
        }

        #[test]
        fn penalty_value_is_positively_homogeneous_in_lambda(
            (spec, gs, p) in arbitrary_spec(),
            raw in proptest::collection::vec(-5.0f64..5.0, 6),
            c in 0.1f64..10.0,
        ) {
            let beta = Array1::from_vec(raw[..p].to_vec());
            let base = penalty_value(&spec, &beta, Some(&gs)).unwrap();
            let mut scaled_spec = spec.clone();
            scaled_spec.lambda1 *= c;
            let scaled = penalty_value(&scaled_spec, &beta, Some(&gs)).unwrap();
            prop_assert!((scaled - c * base).abs() <= 1e-10 * (1.0 + scaled.abs()));
        }

        #[test]
        fn prox_at_vanishing_step_is_identity(
            (spec, gs, p) in arbitrary_spec(),
            raw in proptest::collection::vec(-5.0f64..5.0, 6),
        ) {
            let v = Array1::from_vec(raw[..p].to_vec());
            let levels = PenaltyLevels::from_spec(&spec, p, Some(&gs)).unwrap();
            let z = levels.prox(&v, 1e-12);
            for i in 0..p {
                prop_assert!((z[i] - v[i]).abs() <= 1e-9);
            }
        }
    }
}
