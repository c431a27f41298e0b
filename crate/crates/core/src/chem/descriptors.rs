use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BondOrder, Element, Molecule};
use crate::error::{Error, Result};
use crate::io::data_lines;

/// Physicochemical descriptors used by the fragment filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorSet {
    pub mw: f64,
    pub hbd: usize,
    pub hba: usize,
    pub rotatable_bonds: usize,
    pub logp: Option<f64>,
    pub tpsa: Option<f64>,
}

/// LogP / TPSA supplied from outside; there is no built-in estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExternalDescriptors {
    pub logp: Option<f64>,
    pub tpsa: Option<f64>,
}

/// `id<TAB>logp<TAB>tpsa` table. Empty or `NA` cells mean "not provided".
#[derive(Debug, Clone, Default)]
pub struct DescriptorTable {
    rows: HashMap<String, ExternalDescriptors>,
}

impl DescriptorTable {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file), path)
    }

    pub fn from_reader(reader: impl BufRead, path: &Path) -> Result<Self> {
        let mut rows = HashMap::new();
        for line in data_lines(reader) {
            let (lineno, line) = line?;
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::parse(path, lineno, "expected id<TAB>logp<TAB>tpsa"));
            }
            let num = |s: &str| -> Result<Option<f64>> {
                let s = s.trim();
                if s.is_empty() || s.eq_ignore_ascii_case("na") {
                    return Ok(None);
                }
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::parse(path, lineno, format!("not a number: {s:?}")))
            };
            rows.insert(
                cols[0].to_string(),
                ExternalDescriptors {
                    logp: num(cols[1])?,
                    tpsa: num(cols[2])?,
                },
            );
        }
        Ok(DescriptorTable { rows })
    }

    pub fn get(&self, id: &str) -> Option<&ExternalDescriptors> {
        self.rows.get(id)
    }
}

pub fn descriptors(m: &Molecule, provided: Option<&ExternalDescriptors>) -> DescriptorSet {
    let mw = m
        .atoms()
        .iter()
        .map(|a| a.element.mass() + f64::from(a.hydrogens) * Element::H.mass())
        .sum();
    let is_no = |e: Element| e == Element::N || e == Element::O;
    let hbd = m.atoms().iter().filter(|a| is_no(a.element) && a.hydrogens > 0).count();
    let hba = m
        .atoms()
        .iter()
        .filter(|a| is_no(a.element) && !(a.element == Element::N && a.aromatic && a.hydrogens > 0))
        .count();
    let ring = m.ring_bonds();
    let rotatable_bonds = m
        .bonds()
        .iter()
        .enumerate()
        .filter(|&(i, b)| {
            b.order == BondOrder::Single && !ring[i] && m.degree(b.a) > 1 && m.degree(b.b) > 1 && !m.is_amide_cn(i)
        })
        .count();
    DescriptorSet {
        mw,
        hbd,
        hba,
        rotatable_bonds,
        logp: provided.and_then(|p| p.logp),
        tpsa: provided.and_then(|p| p.tpsa),
    }
}

/// Fragment-likeness filter with inclusive bounds. Missing LogP / TPSA pass.
pub fn rule_of_three(d: &DescriptorSet) -> bool {
    d.mw <= 300.0
        && d.hbd <= 3
        && d.hba <= 3
        && d.rotatable_bonds <= 3
        && d.logp.is_none_or(|v| v <= 3.0)
        && d.tpsa.is_none_or(|v| v <= 60.0)
}
