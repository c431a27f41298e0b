//! SMILES reader.
//!
//! Supported: the organic subset (B C N O P S F Cl Br I and aromatic
//! b c n o p s), bracket atoms with isotope / H-count / charge / class,
//! branches, ring closures (`1`..`9`, `%nn`), explicit bond symbols and `.`
//! component separators. Stereo marks are accepted and ignored.

use std::collections::BTreeMap;

use log::warn;

use super::{Atom, Bond, BondOrder, Element, Molecule};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSym {
    Single,
    Double,
    Triple,
    Aromatic,
    /// `/` or `\`: stereo-flavoured single bond.
    Directional,
}

impl BondSym {
    fn order(self) -> BondOrder {
        match self {
            BondSym::Single | BondSym::Directional => BondOrder::Single,
            BondSym::Double => BondOrder::Double,
            BondSym::Triple => BondOrder::Triple,
            BondSym::Aromatic => BondOrder::Aromatic,
        }
    }
}

struct ParsedAtom {
    atom: Atom,
    bracket: bool,
}

struct RingOpen {
    atom: usize,
    sym: Option<BondSym>,
    pos: usize,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    atoms: Vec<ParsedAtom>,
    bonds: Vec<(usize, usize, Option<BondSym>, usize)>,
    stereo_seen: bool,
}

/// Parses a SMILES string into a hydrogen-suppressed [`Molecule`].
///
/// Parsing stops at the first whitespace, so `"CCO ethanol"` reads as `CCO`.
pub fn parse_smiles(text: &str) -> Result<Molecule> {
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        return Err(Error::syntax(0, "empty SMILES"));
    }
    if !trimmed.is_ascii() {
        return Err(Error::syntax(0, "SMILES must be ASCII"));
    }
    let end = trimmed.find(|c: char| c.is_ascii_whitespace()).unwrap_or(trimmed.len());
    let body = &trimmed[..end];
    let mut parser = Parser {
        text: body.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        stereo_seen: false,
    };
    parser.run()?;
    if parser.stereo_seen {
        warn!("stereo annotations ignored in {body:?}");
    }
    parser.finish(body)
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn run(&mut self) -> Result<()> {
        let mut prev: Option<usize> = None;
        let mut branches: Vec<Option<usize>> = Vec::new();
        let mut pending: Option<(BondSym, usize)> = None;
        let mut rings: BTreeMap<u32, RingOpen> = BTreeMap::new();

        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    if prev.is_none() {
                        return Err(Error::syntax(start, "branch opened before any atom"));
                    }
                    if pending.is_some() {
                        return Err(Error::syntax(start, "bond symbol before '('"));
                    }
                    branches.push(prev);
                    self.pos += 1;
                }
                b')' => {
                    let Some(p) = branches.pop() else {
                        return Err(Error::syntax(start, "unbalanced ')'"));
                    };
                    if pending.is_some() {
                        return Err(Error::syntax(start, "dangling bond symbol before ')'"));
                    }
                    prev = p;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' | b'$' => {
                    if pending.is_some() {
                        return Err(Error::syntax(start, "two consecutive bond symbols"));
                    }
                    let sym = match c {
                        b'-' => BondSym::Single,
                        b'=' => BondSym::Double,
                        b'#' => BondSym::Triple,
                        b':' => BondSym::Aromatic,
                        b'$' => return Err(Error::syntax(start, "quadruple bonds are not supported")),
                        _ => {
                            self.stereo_seen = true;
                            BondSym::Directional
                        }
                    };
                    pending = Some((sym, start));
                    self.pos += 1;
                }
                b'.' => {
                    if pending.is_some() {
                        return Err(Error::syntax(start, "bond symbol before '.'"));
                    }
                    prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let label = self.ring_label()?;
                    let Some(atom) = prev else {
                        return Err(Error::syntax(start, "ring closure before any atom"));
                    };
                    let sym = pending.take().map(|(s, _)| s);
                    if let Some(open) = rings.remove(&label) {
                        let sym = match (open.sym, sym) {
                            (Some(a), Some(b)) if a.order() != b.order() => {
                                return Err(Error::syntax(start, "conflicting ring-closure bond symbols"))
                            }
                            (a, b) => a.or(b),
                        };
                        if open.atom == atom {
                            return Err(Error::syntax(start, "ring closure onto the same atom"));
                        }
                        self.bonds.push((open.atom, atom, sym, open.pos));
                    } else {
                        rings.insert(label, RingOpen { atom, sym, pos: start });
                    }
                }
                _ => {
                    let atom = self.atom()?;
                    let idx = self.atoms.len();
                    self.atoms.push(atom);
                    if let Some(p) = prev {
                        self.bonds.push((p, idx, pending.take().map(|(s, _)| s), start));
                    } else if let Some((_, at)) = pending {
                        return Err(Error::syntax(at, "bond symbol without a preceding atom"));
                    }
                    prev = Some(idx);
                }
            }
        }
        if let Some((_, at)) = pending {
            return Err(Error::syntax(at, "dangling bond symbol at end of input"));
        }
        if !branches.is_empty() {
            return Err(Error::syntax(self.text.len(), "unbalanced '('"));
        }
        if let Some((label, open)) = rings.into_iter().next() {
            return Err(Error::syntax(open.pos, format!("unclosed ring bond {label}")));
        }
        Ok(())
    }

    fn ring_label(&mut self) -> Result<u32> {
        let start = self.pos;
        if self.peek() == Some(b'%') {
            self.pos += 1;
            let digits = self.text.get(self.pos..self.pos + 2);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 2;
                    Ok(u32::from(d[0] - b'0') * 10 + u32::from(d[1] - b'0'))
                }
                _ => Err(Error::syntax(start, "'%' must be followed by two digits")),
            }
        } else {
            let d = self.text[self.pos] - b'0';
            self.pos += 1;
            Ok(u32::from(d))
        }
    }

    fn atom(&mut self) -> Result<ParsedAtom> {
        let start = self.pos;
        let c = self.text[self.pos];
        if c == b'[' {
            return self.bracket_atom();
        }
        let next = self.text.get(self.pos + 1).copied();
        let (element, aromatic, len) = match (c, next) {
            (b'C', Some(b'l')) => (Element::CL, false, 2),
            (b'B', Some(b'r')) => (Element::BR, false, 2),
            (b'B', _) => (Element::B, false, 1),
            (b'C', _) => (Element::C, false, 1),
            (b'N', _) => (Element::N, false, 1),
            (b'O', _) => (Element::O, false, 1),
            (b'P', _) => (Element::P, false, 1),
            (b'S', _) => (Element::S, false, 1),
            (b'F', _) => (Element::F, false, 1),
            (b'I', _) => (Element::I, false, 1),
            (b'b', _) => (Element::B, true, 1),
            (b'c', _) => (Element::C, true, 1),
            (b'n', _) => (Element::N, true, 1),
            (b'o', _) => (Element::O, true, 1),
            (b'p', _) => (Element::P, true, 1),
            (b's', _) => (Element::S, true, 1),
            (b'*', _) => (Element::ANY, false, 1),
            _ => return Err(Error::syntax(start, format!("unexpected character {:?}", c as char))),
        };
        self.pos += len;
        Ok(ParsedAtom {
            atom: Atom {
                element,
                charge: 0,
                aromatic,
                hydrogens: 0,
            },
            bracket: false,
        })
    }

    fn bracket_atom(&mut self) -> Result<ParsedAtom> {
        let open = self.pos;
        self.pos += 1;
        let Some(close_rel) = self.text[self.pos..].iter().position(|&b| b == b']') else {
            return Err(Error::syntax(open, "unterminated bracket atom"));
        };
        let close = self.pos + close_rel;
        let inner = &self.text[self.pos..close];
        let mut i = 0;
        // isotope
        while i < inner.len() && inner[i].is_ascii_digit() {
            i += 1;
        }
        // symbol
        let (element, aromatic) = {
            let rest = &inner[i..];
            let two = rest.get(..2).and_then(|s| std::str::from_utf8(s).ok());
            let one = rest.get(..1).and_then(|s| std::str::from_utf8(s).ok());
            let pick = |s: &str| -> Option<(Element, bool, usize)> {
                if s == "*" {
                    return Some((Element::ANY, false, 1));
                }
                let first = s.as_bytes()[0];
                if first.is_ascii_lowercase() {
                    let mut upper = s.to_string();
                    upper[..1].make_ascii_uppercase();
                    let e = Element::from_symbol(&upper)?;
                    e.can_be_aromatic().then_some((e, true, s.len()))
                } else {
                    Element::from_symbol(s).map(|e| (e, false, s.len()))
                }
            };
            let chosen = two
                .filter(|s| s.as_bytes()[1].is_ascii_lowercase())
                .and_then(pick)
                .or_else(|| one.and_then(pick));
            let Some((e, arom, len)) = chosen else {
                return Err(Error::syntax(open + 1 + i, "unknown element in bracket atom"));
            };
            i += len;
            (e, arom)
        };
        // chirality
        if i < inner.len() && inner[i] == b'@' {
            self.stereo_seen = true;
            while i < inner.len() && inner[i] == b'@' {
                i += 1;
            }
            if let Some(cls) = inner.get(i..i + 2) {
                if matches!(cls, b"TH" | b"AL" | b"SP" | b"TB" | b"OH") {
                    i += 2;
                    while i < inner.len() && inner[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
        }
        // hydrogen count
        let mut hydrogens = 0u8;
        if i < inner.len() && inner[i] == b'H' {
            i += 1;
            hydrogens = 1;
            if i < inner.len() && inner[i].is_ascii_digit() {
                hydrogens = inner[i] - b'0';
                i += 1;
            }
        }
        // charge
        let mut charge: i8 = 0;
        if i < inner.len() && (inner[i] == b'+' || inner[i] == b'-') {
            let sign = inner[i];
            let unit: i8 = if sign == b'+' { 1 } else { -1 };
            i += 1;
            if i < inner.len() && inner[i].is_ascii_digit() {
                let mut mag: i8 = 0;
                while i < inner.len() && inner[i].is_ascii_digit() {
                    mag = mag
                        .checked_mul(10)
                        .and_then(|m| m.checked_add((inner[i] - b'0') as i8))
                        .ok_or_else(|| Error::syntax(open + 1 + i, "charge out of range"))?;
                    i += 1;
                }
                charge = unit * mag;
            } else {
                charge = unit;
                while i < inner.len() && inner[i] == sign {
                    charge += unit;
                    i += 1;
                }
            }
        }
        // atom class
        if i < inner.len() && inner[i] == b':' {
            i += 1;
            while i < inner.len() && inner[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i != inner.len() {
            return Err(Error::syntax(open + 1 + i, "unexpected text in bracket atom"));
        }
        self.pos = close + 1;
        Ok(ParsedAtom {
            atom: Atom {
                element,
                charge,
                aromatic,
                hydrogens,
            },
            bracket: true,
        })
    }

    fn finish(self, body: &str) -> Result<Molecule> {
        let Parser { atoms, bonds, .. } = self;
        let mut resolved = Vec::with_capacity(bonds.len());
        for &(a, b, sym, pos) in &bonds {
            let order = match sym {
                Some(s) => s.order(),
                None if atoms[a].atom.aromatic && atoms[b].atom.aromatic => BondOrder::Aromatic,
                None => BondOrder::Single,
            };
            if order == BondOrder::Aromatic && !(atoms[a].atom.aromatic && atoms[b].atom.aromatic) {
                return Err(Error::syntax(pos, "aromatic bond between non-aromatic atoms"));
            }
            resolved.push(Bond { a, b, order });
        }
        let bracket: Vec<bool> = atoms.iter().map(|a| a.bracket).collect();
        let atoms: Vec<Atom> = atoms.into_iter().map(|a| a.atom).collect();
        let mut mol = Molecule::new(atoms, resolved, body).map_err(|e| match e {
            Error::InvalidMolecule(msg) => Error::syntax(0, msg),
            other => other,
        })?;
        // an unmarked bond between aromatic atoms of different rings, as in
        // biphenyl, is single
        let ring = mol.ring_bonds();
        for (k, &(_, _, sym, _)) in bonds.iter().enumerate() {
            if sym.is_none() && !ring[k] && mol.bonds[k].order == BondOrder::Aromatic {
                mol.bonds[k].order = BondOrder::Single;
            }
        }

        // Implicit hydrogens / valence check, counting explicit [H] neighbours.
        for (i, &in_brackets) in bracket.iter().enumerate() {
            let valence = mol.bond_valence(i);
            let atom = &mol.atoms[i];
            if in_brackets {
                check_bracket_valence(i, atom, valence)?;
            } else if !atom.is_wildcard() {
                let h = implicit_hydrogens(atom.element, atom.aromatic, valence).ok_or_else(|| Error::Valence {
                    atom: i,
                    symbol: atom.element.symbol().to_string(),
                    msg: format!("bond order sum {valence} exceeds standard valence"),
                })?;
                mol.atoms[i].hydrogens = h;
            }
        }
        Ok(fold_explicit_hydrogens(mol))
    }
}

/// Implicit hydrogen count for an unbracketed atom with the given bond
/// valence sum. `None` when the sum exceeds every allowed valence.
pub(crate) fn implicit_hydrogens(element: Element, aromatic: bool, valence: u32) -> Option<u8> {
    let allowed = element.valences();
    if allowed.is_empty() {
        return Some(0);
    }
    if aromatic {
        let used = valence + 1;
        if used > allowed[allowed.len() - 1] + 1 {
            return None;
        }
        return Some(allowed[0].saturating_sub(used) as u8);
    }
    allowed.iter().find(|&&v| v >= valence).map(|&v| (v - valence) as u8)
}

fn check_bracket_valence(i: usize, atom: &Atom, valence: u32) -> Result<()> {
    let Some(allowed) = atom.element.charged_valences(atom.charge) else {
        return Ok(());
    };
    let extra = u32::from(atom.aromatic);
    let total = valence + u32::from(atom.hydrogens) + extra;
    let max = allowed[allowed.len() - 1] + extra;
    if total > max {
        return Err(Error::Valence {
            atom: i,
            symbol: atom.element.symbol().to_string(),
            msg: format!("total valence {total} exceeds {max}"),
        });
    }
    Ok(())
}

/// Removes explicit hydrogen atoms bonded to exactly one heavy atom, adding
/// them to that atom's hydrogen count.
fn fold_explicit_hydrogens(mol: Molecule) -> Molecule {
    let n = mol.atoms.len();
    let removable: Vec<bool> = (0..n)
        .map(|i| {
            let a = &mol.atoms[i];
            a.element == Element::H
                && a.charge == 0
                && a.hydrogens == 0
                && mol.degree(i) == 1
                && mol.atoms[mol.neighbors(i)[0].0].element != Element::H
                && mol.bonds[mol.neighbors(i)[0].1].order == BondOrder::Single
        })
        .collect();
    if !removable.iter().any(|&r| r) {
        return mol;
    }
    let source = mol.source.clone();
    let mut atoms = mol.atoms.clone();
    for i in (0..n).filter(|&i| removable[i]) {
        let heavy = mol.neighbors(i)[0].0;
        atoms[heavy].hydrogens += 1;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| !removable[i]).collect();
    let mut remap = vec![usize::MAX; n];
    for (new, &old) in keep.iter().enumerate() {
        remap[old] = new;
    }
    let new_atoms = keep.iter().map(|&i| atoms[i].clone()).collect();
    let new_bonds = mol
        .bonds
        .iter()
        .filter(|b| !removable[b.a] && !removable[b.b])
        .map(|b| Bond {
            a: remap[b.a],
            b: remap[b.b],
            order: b.order,
        })
        .collect();
    Molecule::new(new_atoms, new_bonds, source).expect("folding hydrogens keeps the graph valid")
}
