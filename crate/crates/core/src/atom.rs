//! Graded field atoms and coordinate charts.

use std::fmt;
use std::sync::Arc;

/// Grassmann grading of an atom or expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn is_odd(self) -> bool {
        self == Parity::Odd
    }

    /// Parity of a product.
    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parity::Even => write!(f, "even"),
            Parity::Odd => write!(f, "odd"),
        }
    }
}

/// Coordinate chart of the worldsheet: `(t, x)` or light-cone `(p, m)` = `(+, -)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Chart {
    Tx,
    LightCone,
}

impl Chart {
    /// Names of the derivative directions, in multi-index order.
    pub fn coords(self) -> [&'static str; 2] {
        match self {
            Chart::Tx => ["t", "x"],
            Chart::LightCone => ["p", "m"],
        }
    }

    /// Names of the explicit coordinate atoms.
    pub fn coord_atoms(self) -> [&'static str; 2] {
        match self {
            Chart::Tx => ["t", "x"],
            Chart::LightCone => ["xp", "xm"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Chart::Tx => "tx",
            Chart::LightCone => "lc",
        }
    }

    pub fn from_name(name: &str) -> Option<Chart> {
        match name {
            "tx" => Some(Chart::Tx),
            "lc" | "lightcone" => Some(Chart::LightCone),
            _ => None,
        }
    }

    pub fn other(self) -> Chart {
        match self {
            Chart::Tx => Chart::LightCone,
            Chart::LightCone => Chart::Tx,
        }
    }

    /// Index of a derivative direction name.
    pub fn coord_index(self, name: &str) -> Option<usize> {
        self.coords().iter().position(|c| *c == name)
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AtomKind {
    /// A field on a chart; may carry derivatives.
    Field,
    /// An explicit coordinate (`t`, `x`, `xp`, `xm`).
    Coordinate,
    /// A chart-free constant symbol such as a global transformation parameter.
    Constant,
}

/// A generator of the expression ring.
///
/// The derived order (name, chart, derivative multi-index, ...) is the global
/// atom order used to sort odd factors.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    name: Arc<str>,
    chart: Option<Chart>,
    deriv: [u8; 2],
    kind: AtomKind,
    parity: Parity,
}

impl Atom {
    pub fn field(name: &str, chart: Chart, parity: Parity) -> Atom {
        Atom {
            name: Arc::from(name),
            chart: Some(chart),
            deriv: [0, 0],
            kind: AtomKind::Field,
            parity,
        }
    }

    pub fn coordinate(chart: Chart, index: usize) -> Atom {
        Atom {
            name: Arc::from(chart.coord_atoms()[index]),
            chart: Some(chart),
            deriv: [0, 0],
            kind: AtomKind::Coordinate,
            parity: Parity::Even,
        }
    }

    pub fn constant(name: &str, parity: Parity) -> Atom {
        Atom {
            name: Arc::from(name),
            chart: None,
            deriv: [0, 0],
            kind: AtomKind::Constant,
            parity,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chart(&self) -> Option<Chart> {
        self.chart
    }

    pub fn deriv(&self) -> [u8; 2] {
        self.deriv
    }

    pub fn kind(&self) -> AtomKind {
        self.kind
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn is_odd(&self) -> bool {
        self.parity.is_odd()
    }

    pub fn order(&self) -> u32 {
        self.deriv.iter().map(|&d| d as u32).sum()
    }

    /// The same field with the given derivative multi-index.
    pub fn with_deriv(&self, deriv: [u8; 2]) -> Atom {
        debug_assert_eq!(self.kind, AtomKind::Field);
        Atom {
            deriv,
            ..self.clone()
        }
    }

    /// The underived field this atom belongs to.
    pub fn base_field(&self) -> Atom {
        self.with_deriv([0, 0])
    }

    /// One more derivative along direction `index`, for field atoms.
    pub fn derived(&self, index: usize) -> Atom {
        let mut deriv = self.deriv;
        deriv[index] += 1;
        self.with_deriv(deriv)
    }

    /// The same field transplanted to another chart, underived.
    pub fn on_chart(&self, chart: Chart) -> Atom {
        Atom {
            chart: Some(chart),
            deriv: [0, 0],
            ..self.clone()
        }
    }

    pub fn same_field(&self, other: &Atom) -> bool {
        self.kind == AtomKind::Field
            && other.kind == AtomKind::Field
            && self.name == other.name
            && self.chart == other.chart
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.order() == 0 {
            return f.write_str(&self.name);
        }
        let chart = self.chart.expect("derived atoms live on a chart");
        write!(f, "D[{}", self.name)?;
        for (i, coord) in chart.coords().iter().enumerate() {
            for _ in 0..self.deriv[i] {
                write!(f, ",{coord}")?;
            }
        }
        f.write_str("]")
    }
}
