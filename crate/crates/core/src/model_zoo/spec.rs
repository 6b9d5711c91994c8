use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Rolling windows of the univariate groups.
pub const UNIVARIATE_WINDOWS: [usize; 4] = [12, 24, 48, 96];
/// Rolling windows of the multivariate groups.
pub const MULTIVARIATE_WINDOWS: [usize; 2] = [48, 96];
pub const MAX_GROUP: u8 = 12;

/// Feature columns (indices into [`crate::FeatureVector::as_array`]) used by
/// each model group.
const GROUP_FEATURES: [&[usize]; 13] = [
    &[],
    &[0],
    &[1],
    &[0, 1],
    &[2],
    &[3],
    &[2, 3],
    &[0],
    &[1],
    &[0, 1],
    &[2],
    &[3],
    &[2, 3],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Univariate,
    Multivariate,
}

/// One fixed model `h(group, w, p, d, q)`. The derived order is the grid
/// order: group, then window, then `p`, `d`, `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelSpec {
    pub group: u8,
    pub w: usize,
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ModelSpec {
    /// Checks the structural constraints of the group. Any window long enough
    /// to fit is accepted; [`ModelSpec::in_grid`] tells whether it is a grid
    /// window.
    pub fn new(group: u8, w: usize, p: usize, d: usize, q: usize) -> Result<Self> {
        let spec = ModelSpec { group, w, p, d, q };
        if group > MAX_GROUP {
            return Err(Error::InvalidInput(format!("model group {group} out of range")));
        }
        if !(1..=2).contains(&d) {
            return Err(Error::InvalidInput(format!("{spec}: d must be 1 or 2")));
        }
        match spec.kind() {
            ModelKind::Univariate if p > 2 || q > 2 => {
                return Err(Error::InvalidInput(format!("{spec}: p and q must be at most 2")));
            }
            ModelKind::Multivariate if p != 1 || q > 1 => {
                return Err(Error::InvalidInput(format!("{spec}: vector models need p = 1 and q <= 1")));
            }
            _ => {}
        }
        if w < d + p + 2 {
            return Err(Error::InvalidInput(format!("{spec}: window too short")));
        }
        Ok(spec)
    }

    pub fn kind(&self) -> ModelKind {
        if self.group <= 6 {
            ModelKind::Univariate
        } else {
            ModelKind::Multivariate
        }
    }

    /// Feature columns entering the model.
    pub fn features(&self) -> &'static [usize] {
        GROUP_FEATURES[self.group as usize]
    }

    /// Dimension of the stacked vector of a multivariate model; 1 otherwise.
    pub fn dim(&self) -> usize {
        match self.kind() {
            ModelKind::Univariate => 1,
            ModelKind::Multivariate => 1 + self.features().len(),
        }
    }

    /// Count of VARMA parameters `n + n^2 p + n^2 q + n^2` (constant, AR, MA,
    /// covariance). For univariate models: constant, loadings, AR, MA and
    /// variance.
    pub fn param_dim(&self) -> usize {
        match self.kind() {
            ModelKind::Univariate => 2 + self.features().len() + self.p + self.q,
            ModelKind::Multivariate => {
                let n = self.dim();
                n + n * n * self.p + n * n * self.q + n * n
            }
        }
    }

    pub fn in_grid(&self) -> bool {
        match self.kind() {
            ModelKind::Univariate => UNIVARIATE_WINDOWS.contains(&self.w),
            ModelKind::Multivariate => MULTIVARIATE_WINDOWS.contains(&self.w),
        }
    }

    /// `M{group}_{w}_PDQ{p}{d}{q}`.
    pub fn code(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}_{}_PDQ{}{}{}", self.group, self.w, self.p, self.d, self.q)
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("bad model code {s:?}"));
        let rest = s.strip_prefix('M').ok_or_else(bad)?;
        let mut parts = rest.split('_');
        let group = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let w = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let pdq = parts.next().and_then(|v| v.strip_prefix("PDQ")).ok_or_else(bad)?;
        if parts.next().is_some() || pdq.len() != 3 || !pdq.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digit = |i: usize| (pdq.as_bytes()[i] - b'0') as usize;
        ModelSpec::new(group, w, digit(0), digit(1), digit(2))
    }
}

/// The full fixed-model grid, 504 univariate and 48 multivariate specs, in
/// ascending order.
pub fn enumerate_models() -> Vec<ModelSpec> {
    let mut out = Vec::with_capacity(552);
    for group in 0..=MAX_GROUP {
        let multi = group > 6;
        let windows: &[usize] = if multi { &MULTIVARIATE_WINDOWS } else { &UNIVARIATE_WINDOWS };
        let ps: &[usize] = if multi { &[1] } else { &[0, 1, 2] };
        let qs: &[usize] = if multi { &[0, 1] } else { &[0, 1, 2] };
        for &w in windows {
            for &p in ps {
                for d in 1..=2 {
                    for &q in qs {
                        out.push(ModelSpec { group, w, p, d, q });
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts() {
        let all = enumerate_models();
        assert_eq!(all.len(), 552);
        assert_eq!(all.iter().filter(|s| s.kind() == ModelKind::Univariate).count(), 504);
        assert_eq!(all.iter().filter(|s| s.kind() == ModelKind::Multivariate).count(), 48);
        assert_eq!(all.iter().filter(|s| s.w == 96).count(), 150);
        assert!(all.windows(2).all(|p| p[0] < p[1]));
        for s in &all {
            assert!(s.in_grid());
            assert_eq!(ModelSpec::new(s.group, s.w, s.p, s.d, s.q).unwrap(), *s);
        }
    }

    #[test]
    fn group_features() {
        let groups_with = |c: usize| -> Vec<u8> { (0..=12).filter(|&g| GROUP_FEATURES[g as usize].contains(&c)).collect() };
        assert_eq!(groups_with(0), vec![1, 3, 7, 9]);
        assert_eq!(groups_with(1), vec![2, 3, 8, 9]);
        assert_eq!(groups_with(2), vec![4, 6, 10, 12]);
        assert_eq!(groups_with(3), vec![5, 6, 11, 12]);
        assert!(GROUP_FEATURES[0].is_empty());
    }

    #[test]
    fn varma_parameter_dimension() {
        assert_eq!(ModelSpec::new(7, 96, 1, 1, 1).unwrap().param_dim(), 14);
        assert_eq!(ModelSpec::new(9, 96, 1, 1, 0).unwrap().dim(), 3);
    }

    #[test]
    fn code_round_trip() {
        let s = ModelSpec::new(3, 48, 1, 1, 1).unwrap();
        assert_eq!(s.code(), "M3_48_PDQ111");
        assert_eq!("M3_48_PDQ111".parse::<ModelSpec>().unwrap(), s);
        for bad in ["M3_48_PDQ11", "X3_48_PDQ111", "M13_48_PDQ111", "M7_48_PDQ211", "M0_48_PDQ101"] {
            assert!(bad.parse::<ModelSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn validation() {
        assert!(ModelSpec::new(0, 500, 1, 1, 0).is_ok());
        assert!(!ModelSpec::new(0, 500, 1, 1, 0).unwrap().in_grid());
        assert!(ModelSpec::new(0, 12, 3, 1, 0).is_err());
        assert!(ModelSpec::new(8, 48, 1, 1, 2).is_err());
        assert!(ModelSpec::new(0, 3, 2, 2, 0).is_err());
    }
}
