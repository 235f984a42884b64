//! Nonadaptive information operators: standard point evaluations of field
//! components (or their partials), finite-rank linear functionals, and the
//! mixed class with a budget split between the two.

use crate::bump::ParallelepipedBump;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::{integer_root_floor, ProblemSpec};
use serde::{Deserialize, Serialize};

/// One standard functional: `D^orders f^component (point)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardAtom {
    pub point: Vec<f64>,
    /// 0-based component index.
    pub component: usize,
    /// Derivative multi-index per axis; all zeros for a plain value query.
    #[serde(rename = "order_multi_index")]
    pub orders: Vec<usize>,
}

impl StandardAtom {
    pub fn value_at(point: Vec<f64>, component: usize) -> Self {
        let d = point.len();
        StandardAtom {
            point,
            component,
            orders: vec![0; d],
        }
    }

    pub fn total_order(&self) -> usize {
        self.orders.iter().sum()
    }

    pub fn apply(&self, f: &dyn Field) -> Result<f64> {
        f.partial(&self.point, self.component, &self.orders)
    }

    /// The atom applied to a scalar bump embedded as the first component of a
    /// field (all other components vanish identically).
    pub fn apply_to_bump(&self, bump: &ParallelepipedBump) -> Result<f64> {
        if self.component != 0 {
            return Ok(0.0);
        }
        bump.partial(&self.point, &self.orders)
    }
}

/// Finite-rank linear functional: a weighted combination of standard atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFunctional {
    pub terms: Vec<(f64, StandardAtom)>,
}

impl LinearFunctional {
    pub fn new(terms: Vec<(f64, StandardAtom)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Information("linear functional must be nonempty".into()));
        }
        Ok(LinearFunctional { terms })
    }

    pub fn apply(&self, f: &dyn Field) -> Result<f64> {
        let mut acc = 0.0;
        for (w, atom) in &self.terms {
            acc += w * atom.apply(f)?;
        }
        Ok(acc)
    }

    pub fn apply_to_bump(&self, bump: &ParallelepipedBump) -> Result<f64> {
        let mut acc = 0.0;
        for (w, atom) in &self.terms {
            acc += w * atom.apply_to_bump(bump)?;
        }
        Ok(acc)
    }
}

/// Ordered nonadaptive operator: the first `n - k` entries are standard
/// atoms, the trailing `k` are general linear functionals.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoOperator {
    standard: Vec<StandardAtom>,
    linear: Vec<LinearFunctional>,
    alpha_info: Option<f64>,
}

impl InfoOperator {
    pub fn standard_only(atoms: Vec<StandardAtom>) -> Self {
        InfoOperator {
            standard: atoms,
            linear: vec![],
            alpha_info: None,
        }
    }

    pub fn linear_only(functionals: Vec<LinearFunctional>) -> Self {
        InfoOperator {
            standard: vec![],
            linear: functionals,
            alpha_info: None,
        }
    }

    /// The mixed class: enforces `n >= k + 1` and `k <= alpha_info * n^{1-1/d}`.
    pub fn mixed(
        atoms: Vec<StandardAtom>,
        functionals: Vec<LinearFunctional>,
        alpha_info: f64,
        dim: usize,
    ) -> Result<Self> {
        let k = functionals.len();
        let n = atoms.len() + k;
        if k > 0 && n < k + 1 {
            return Err(Error::Information(format!(
                "mixed operator needs n >= k + 1, got n = {n}, k = {k}"
            )));
        }
        let cap = alpha_info * (n as f64).powf(1.0 - 1.0 / dim as f64);
        if k as f64 > cap {
            return Err(Error::Information(format!(
                "linear budget k = {k} exceeds alpha * n^(1 - 1/d) = {cap}"
            )));
        }
        Ok(InfoOperator {
            standard: atoms,
            linear: functionals,
            alpha_info: Some(alpha_info),
        })
    }

    pub fn len(&self) -> usize {
        self.standard.len() + self.linear.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// (number of standard atoms, number of linear functionals).
    pub fn split(&self) -> (usize, usize) {
        (self.standard.len(), self.linear.len())
    }

    pub fn standard_atoms(&self) -> &[StandardAtom] {
        &self.standard
    }

    pub fn linear_functionals(&self) -> &[LinearFunctional] {
        &self.linear
    }

    pub fn alpha_info(&self) -> Option<f64> {
        self.alpha_info
    }

    pub fn validate(&self, dim: usize, max_order: usize) -> Result<()> {
        let check = |atom: &StandardAtom| -> Result<()> {
            if atom.point.len() != dim || atom.orders.len() != dim {
                return Err(Error::Information("atom dimension mismatch".into()));
            }
            if atom.component >= dim {
                return Err(Error::Information(format!(
                    "component {} out of range for dimension {dim}",
                    atom.component
                )));
            }
            if atom.total_order() > max_order {
                return Err(Error::Information(format!(
                    "atom derivative order {} exceeds the class smoothness {max_order}",
                    atom.total_order()
                )));
            }
            Ok(())
        };
        for atom in &self.standard {
            check(atom)?;
        }
        for f in &self.linear {
            for (_, atom) in &f.terms {
                check(atom)?;
            }
        }
        Ok(())
    }

    /// Apply every functional in order: standard atoms first, then linear.
    pub fn evaluate(&self, f: &dyn Field) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len());
        for atom in &self.standard {
            out.push(atom.apply(f)?);
        }
        for functional in &self.linear {
            out.push(functional.apply(f)?);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        let doc = OperatorDoc {
            alpha_info: self.alpha_info,
            standard: self
                .standard
                .iter()
                .map(|a| AtomRecord::from_atom(a, 1.0))
                .collect(),
            linear: self
                .linear
                .iter()
                .map(|f| {
                    f.terms
                        .iter()
                        .map(|(w, a)| AtomRecord::from_atom(a, *w))
                        .collect()
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("operator serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: OperatorDoc = serde_json::from_str(text)
            .map_err(|e| Error::Information(format!("operator parse error: {e}")))?;
        let standard = doc.standard.into_iter().map(AtomRecord::into_atom).collect();
        let linear = doc
            .linear
            .into_iter()
            .map(|records| {
                LinearFunctional::new(
                    records
                        .into_iter()
                        .map(|r| {
                            let w = r.weight;
                            (w, r.into_atom())
                        })
                        .collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(InfoOperator {
            standard,
            linear,
            alpha_info: doc.alpha_info,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct AtomRecord {
    point: Vec<f64>,
    component: usize,
    order_multi_index: Vec<usize>,
    weight: f64,
}

impl AtomRecord {
    fn from_atom(atom: &StandardAtom, weight: f64) -> Self {
        AtomRecord {
            point: atom.point.clone(),
            component: atom.component,
            order_multi_index: atom.orders.clone(),
            weight,
        }
    }

    fn into_atom(self) -> StandardAtom {
        StandardAtom {
            point: self.point,
            component: self.component,
            orders: self.order_multi_index,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct OperatorDoc {
    alpha_info: Option<f64>,
    standard: Vec<AtomRecord>,
    linear: Vec<Vec<AtomRecord>>,
}

/// How `uniform_grid` assigns components to grid atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridComponents {
    /// Every atom queries component 0.
    First,
    /// Components cycle round-robin across the flattened grid order.
    RoundRobin,
}

/// Canonical nonadaptive standard information: `floor(n^{1/d})^d` order-0
/// atoms on the cell-centered uniform tensor grid over the inner box.
pub fn uniform_grid(spec: &ProblemSpec, n: usize, components: GridComponents) -> InfoOperator {
    let d = spec.dim;
    let g = integer_root_floor(n as u64, d as u32).max(1) as usize;
    let mut atoms = Vec::with_capacity(g.pow(d as u32));
    let mut idx = vec![0usize; d];
    let mut flat = 0usize;
    loop {
        let point: Vec<f64> = (0..d)
            .map(|j| {
                let [lo, hi] = spec.inner[j];
                lo + (hi - lo) * (idx[j] as f64 + 0.5) / g as f64
            })
            .collect();
        let component = match components {
            GridComponents::First => 0,
            GridComponents::RoundRobin => flat % d,
        };
        atoms.push(StandardAtom::value_at(point, component));
        flat += 1;
        let mut a = 0;
        loop {
            if a == d {
                return InfoOperator::standard_only(atoms);
            }
            idx[a] += 1;
            if idx[a] < g {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}

/// Constraint matrix of the homogeneous system "all functionals vanish on the
/// bump sum": entry (i, j) is functional i applied to bump j embedded as the
/// first component of a field.
pub fn constraint_matrix(
    functionals: &[LinearFunctional],
    bumps: &[ParallelepipedBump],
) -> Result<Vec<Vec<f64>>> {
    functionals
        .iter()
        .map(|f| bumps.iter().map(|b| f.apply_to_bump(b)).collect())
        .collect()
}
