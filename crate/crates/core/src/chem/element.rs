use std::fmt;

/// Chemical element by atomic number; `0` is the `*` wildcard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element(u8);

struct ElementData {
    number: u8,
    symbol: &'static str,
    mass: f64,
    valences: &'static [u32],
}

// Standard atomic weights (IUPAC, abridged to conventional values).
const TABLE: &[ElementData] = &[
    ElementData {
        number: 0,
        symbol: "*",
        mass: 0.0,
        valences: &[],
    },
    ElementData {
        number: 1,
        symbol: "H",
        mass: 1.008,
        valences: &[1],
    },
    ElementData {
        number: 2,
        symbol: "He",
        mass: 4.0026,
        valences: &[0],
    },
    ElementData {
        number: 3,
        symbol: "Li",
        mass: 6.94,
        valences: &[1],
    },
    ElementData {
        number: 4,
        symbol: "Be",
        mass: 9.0122,
        valences: &[2],
    },
    ElementData {
        number: 5,
        symbol: "B",
        mass: 10.81,
        valences: &[3],
    },
    ElementData {
        number: 6,
        symbol: "C",
        mass: 12.011,
        valences: &[4],
    },
    ElementData {
        number: 7,
        symbol: "N",
        mass: 14.007,
        valences: &[3, 5],
    },
    ElementData {
        number: 8,
        symbol: "O",
        mass: 15.999,
        valences: &[2],
    },
    ElementData {
        number: 9,
        symbol: "F",
        mass: 18.998,
        valences: &[1],
    },
    ElementData {
        number: 10,
        symbol: "Ne",
        mass: 20.180,
        valences: &[0],
    },
    ElementData {
        number: 11,
        symbol: "Na",
        mass: 22.990,
        valences: &[],
    },
    ElementData {
        number: 12,
        symbol: "Mg",
        mass: 24.305,
        valences: &[],
    },
    ElementData {
        number: 13,
        symbol: "Al",
        mass: 26.982,
        valences: &[],
    },
    ElementData {
        number: 14,
        symbol: "Si",
        mass: 28.085,
        valences: &[4],
    },
    ElementData {
        number: 15,
        symbol: "P",
        mass: 30.974,
        valences: &[3, 5],
    },
    ElementData {
        number: 16,
        symbol: "S",
        mass: 32.06,
        valences: &[2, 4, 6],
    },
    ElementData {
        number: 17,
        symbol: "Cl",
        mass: 35.45,
        valences: &[1],
    },
    ElementData {
        number: 18,
        symbol: "Ar",
        mass: 39.95,
        valences: &[0],
    },
    ElementData {
        number: 19,
        symbol: "K",
        mass: 39.098,
        valences: &[],
    },
    ElementData {
        number: 20,
        symbol: "Ca",
        mass: 40.078,
        valences: &[],
    },
    ElementData {
        number: 25,
        symbol: "Mn",
        mass: 54.938,
        valences: &[],
    },
    ElementData {
        number: 26,
        symbol: "Fe",
        mass: 55.845,
        valences: &[],
    },
    ElementData {
        number: 27,
        symbol: "Co",
        mass: 58.933,
        valences: &[],
    },
    ElementData {
        number: 28,
        symbol: "Ni",
        mass: 58.693,
        valences: &[],
    },
    ElementData {
        number: 29,
        symbol: "Cu",
        mass: 63.546,
        valences: &[],
    },
    ElementData {
        number: 30,
        symbol: "Zn",
        mass: 65.38,
        valences: &[],
    },
    ElementData {
        number: 33,
        symbol: "As",
        mass: 74.922,
        valences: &[3, 5],
    },
    ElementData {
        number: 34,
        symbol: "Se",
        mass: 78.971,
        valences: &[2, 4, 6],
    },
    ElementData {
        number: 35,
        symbol: "Br",
        mass: 79.904,
        valences: &[1],
    },
    ElementData {
        number: 50,
        symbol: "Sn",
        mass: 118.71,
        valences: &[],
    },
    ElementData {
        number: 53,
        symbol: "I",
        mass: 126.90,
        valences: &[1],
    },
    ElementData {
        number: 78,
        symbol: "Pt",
        mass: 195.08,
        valences: &[],
    },
    ElementData {
        number: 80,
        symbol: "Hg",
        mass: 200.59,
        valences: &[],
    },
];

impl Element {
    pub const ANY: Element = Element(0);
    pub const H: Element = Element(1);
    pub const B: Element = Element(5);
    pub const C: Element = Element(6);
    pub const N: Element = Element(7);
    pub const O: Element = Element(8);
    pub const F: Element = Element(9);
    pub const P: Element = Element(15);
    pub const S: Element = Element(16);
    pub const CL: Element = Element(17);
    pub const BR: Element = Element(35);
    pub const I: Element = Element(53);

    fn data(self) -> &'static ElementData {
        TABLE
            .iter()
            .find(|d| d.number == self.0)
            .expect("Element values are only constructed from the table")
    }

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        TABLE.iter().find(|d| d.symbol == symbol).map(|d| Element(d.number))
    }

    pub fn from_atomic_number(z: u8) -> Option<Element> {
        TABLE.iter().find(|d| d.number == z).map(|d| Element(d.number))
    }

    pub fn atomic_number(self) -> u8 {
        self.0
    }

    pub fn symbol(self) -> &'static str {
        self.data().symbol
    }

    /// Standard atomic mass in g/mol.
    pub fn mass(self) -> f64 {
        self.data().mass
    }

    /// Allowed valences, lowest first; empty when no default applies.
    pub fn valences(self) -> &'static [u32] {
        self.data().valences
    }

    pub fn is_wildcard(self) -> bool {
        self.0 == 0
    }

    /// Elements that may appear unbracketed in SMILES.
    pub fn is_organic_subset(self) -> bool {
        matches!(self.0, 5 | 6 | 7 | 8 | 9 | 15 | 16 | 17 | 35 | 53)
    }

    /// Elements that may be written lowercase (aromatic).
    pub fn can_be_aromatic(self) -> bool {
        matches!(self.0, 5 | 6 | 7 | 8 | 15 | 16 | 33 | 34)
    }

    /// Valences of a charged atom, taken from its isoelectronic neighbour
    /// (N+ behaves like C, O- like F, ...). `None` when no rule applies.
    pub(crate) fn charged_valences(self, charge: i8) -> Option<&'static [u32]> {
        if charge == 0 {
            let v = self.valences();
            return (!v.is_empty()).then_some(v);
        }
        if !matches!(self.0, 5..=9 | 14..=17 | 33..=35) {
            return None;
        }
        let shifted = i16::from(self.0) - i16::from(charge);
        let same_row = match self.0 {
            5..=9 => (5..=9).contains(&shifted),
            14..=17 => (14..=17).contains(&shifted),
            _ => (33..=35).contains(&shifted),
        };
        if !same_row {
            return None;
        }
        let v = Element(shifted as u8).valences();
        (!v.is_empty()).then_some(v)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}
