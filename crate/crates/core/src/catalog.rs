//! Built-in ODE families by name, each with its closed form.
//!
//! | name           | parameters (default)  | equation          |
//! |----------------|-----------------------|-------------------|
//! | `free_fall`    | `g` (-9.8)            | `x'' = g`         |
//! | `conic`        | `k` (1), `g` (0)      | `x'' = k^2 x + g` |
//! | `linear_basis` | basis `cos_sin`       | `x'' = -x`        |
//! | `linear_zero`  |                       | `x'' = 0`         |
//! | `oscillator`   |                       | `x'' = -x`        |

use std::collections::BTreeMap;

use thiserror::Error;

use crate::closed_forms::{ClosedForm, ConicParams};
use crate::ode::SecondOrderOde;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("unknown catalog entry '{name}' (available: {})", NAMES.join(", "))]
    UnknownEntry { name: String },
    #[error("'{entry}' has no parameter '{name}' (allowed: {})", if allowed.is_empty() { "none".to_string() } else { allowed.join(", ") })]
    UnknownParameter {
        entry: String,
        name: String,
        allowed: Vec<String>,
    },
    #[error("parameter '{name}' must be finite")]
    NonFiniteParameter { name: String },
}

pub const NAMES: [&str; 5] = ["free_fall", "conic", "linear_basis", "linear_zero", "oscillator"];

/// A resolved catalog entry.
#[derive(Debug, Clone)]
pub struct CatalogOde<T> {
    pub name: String,
    /// Effective parameter values, defaults filled in.
    pub params: BTreeMap<String, T>,
    pub ode: SecondOrderOde<T>,
    pub closed_form: ClosedForm<T>,
}

fn defaults<T: Real>(name: &str) -> Option<Vec<(&'static str, T)>> {
    Some(match name {
        "free_fall" => vec![("g", T::lit(-9.8))],
        "conic" => vec![("k", T::one()), ("g", T::zero())],
        "linear_basis" | "linear_zero" | "oscillator" => vec![],
        _ => return None,
    })
}

/// Resolves `name` with `overrides` applied on top of the defaults.
pub fn lookup<T: Real>(name: &str, overrides: &BTreeMap<String, T>) -> Result<CatalogOde<T>, CatalogError> {
    let defaults = defaults::<T>(name).ok_or_else(|| CatalogError::UnknownEntry { name: name.into() })?;
    let allowed: Vec<String> = defaults.iter().map(|(k, _)| k.to_string()).collect();
    let mut params: BTreeMap<String, T> = defaults.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    for (k, v) in overrides {
        if !params.contains_key(k) {
            return Err(CatalogError::UnknownParameter {
                entry: name.into(),
                name: k.clone(),
                allowed,
            });
        }
        if !v.is_finite() {
            return Err(CatalogError::NonFiniteParameter { name: k.clone() });
        }
        params.insert(k.clone(), *v);
    }
    let (ode, closed_form) = match name {
        "free_fall" => {
            let g = params["g"];
            (
                SecondOrderOde::new(1, name, move |_, _, _, out: &mut [T]| out[0] = g),
                ClosedForm::FreeFall { g },
            )
        }
        "conic" => {
            let p = ConicParams::new(params["k"], params["g"]);
            (
                SecondOrderOde::new(1, name, move |_, x: &[T], _, out: &mut [T]| out[0] = p.rhs(x[0])),
                ClosedForm::Conic(p),
            )
        }
        "linear_zero" => (
            SecondOrderOde::new(1, name, |_, _, _, out: &mut [T]| out[0] = T::zero()),
            ClosedForm::FreeFall { g: T::zero() },
        ),
        _ => (
            SecondOrderOde::new(1, name, |_, x: &[T], _, out: &mut [T]| out[0] = -x[0]),
            ClosedForm::CosSin,
        ),
    };
    Ok(CatalogOde {
        name: name.into(),
        params,
        ode,
        closed_form,
    })
}
