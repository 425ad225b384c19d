//! Source specifications understood by the command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kit::{ghz, phi_plus, random_density, singlet, w_state, werner_state};
use crate::tensor::{LabeledOperator, C64, VALIDATION_TOL};

/// `singlet | phi+ | werner:<v> | ghz:<n> | w:<n> | random:<dims>:<seed> |
/// file:<path> | product:|<digits>> | maximally-mixed[:<n>]`.
#[derive(Clone, Debug, PartialEq)]
pub enum SourceSpec {
    Singlet,
    PhiPlus,
    Werner(f64),
    Ghz(usize),
    W(usize),
    /// Full-rank random density.
    Random {
        dims: Vec<usize>,
        seed: u64,
    },
    File(PathBuf),
    /// Computational basis product of qubits.
    Product(Vec<usize>),
    MaximallyMixed(usize),
}

fn parse_num<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("invalid {what} '{s}'")))
}

fn parse_dims(s: &str) -> Result<Vec<usize>> {
    let dims = s
        .split(['x', ','])
        .map(|d| parse_num::<usize>(d, "dimension"))
        .collect::<Result<Vec<_>>>()?;
    if dims.iter().any(|&d| d < 2) {
        return Err(Error::Parse(format!(
            "dimensions must be at least 2 in '{s}'"
        )));
    }
    Ok(dims)
}

impl FromStr for SourceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let need = |what: &str| rest.ok_or_else(|| Error::Parse(format!("'{head}' needs {what}")));
        Ok(match head {
            "singlet" if rest.is_none() => Self::Singlet,
            "phi+" if rest.is_none() => Self::PhiPlus,
            "werner" => Self::Werner(parse_num(need("a visibility")?, "visibility")?),
            "ghz" => Self::Ghz(parse_num(need("a party count")?, "party count")?),
            "w" => Self::W(parse_num(need("a party count")?, "party count")?),
            "random" => {
                let (dims, seed) = need("dims and seed")?
                    .split_once(':')
                    .ok_or_else(|| Error::Parse("random needs '<dims>:<seed>'".into()))?;
                Self::Random {
                    dims: parse_dims(dims)?,
                    seed: parse_num(seed, "seed")?,
                }
            }
            "file" => Self::File(PathBuf::from(need("a path")?)),
            "product" => {
                let ket = need("a ket")?;
                let digits = ket
                    .strip_prefix('|')
                    .and_then(|k| k.strip_suffix('>'))
                    .ok_or_else(|| {
                        Error::Parse(format!("product ket '{ket}' must look like |01>"))
                    })?;
                let digits = digits
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(0),
                        '1' => Ok(1),
                        _ => Err(Error::Parse(format!("qubit digit '{c}' in '{ket}'"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                if digits.is_empty() {
                    return Err(Error::Parse("empty product ket".into()));
                }
                Self::Product(digits)
            }
            "maximally-mixed" => Self::MaximallyMixed(match rest {
                Some(n) => parse_num(n, "party count")?,
                None => 2,
            }),
            _ => return Err(Error::Parse(format!("unknown source '{s}'"))),
        })
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Singlet => write!(f, "singlet"),
            Self::PhiPlus => write!(f, "phi+"),
            Self::Werner(v) => write!(f, "werner:{v}"),
            Self::Ghz(n) => write!(f, "ghz:{n}"),
            Self::W(n) => write!(f, "w:{n}"),
            Self::Random { dims, seed } => {
                let dims: Vec<String> = dims.iter().map(ToString::to_string).collect();
                write!(f, "random:{}:{seed}", dims.join("x"))
            }
            Self::File(p) => write!(f, "file:{}", p.display()),
            Self::Product(d) => {
                let d: String = d.iter().map(ToString::to_string).collect();
                write!(f, "product:|{d}>")
            }
            Self::MaximallyMixed(n) => write!(f, "maximally-mixed:{n}"),
        }
    }
}

impl SourceSpec {
    /// Density operator of the source.
    pub fn load(&self) -> Result<LabeledOperator> {
        match self {
            Self::Singlet => singlet().projector(),
            Self::PhiPlus => phi_plus().projector(),
            Self::Werner(v) => werner_state(*v),
            Self::Ghz(n) => ghz(*n)?.projector(),
            Self::W(n) => w_state(*n)?.projector(),
            Self::Random { dims, seed } => random_density(dims, dims.iter().product(), *seed),
            Self::File(path) => load_state_file(path),
            Self::Product(digits) => {
                LabeledOperator::basis_ket(digits, &vec![2; digits.len()])?.projector()
            }
            Self::MaximallyMixed(n) => {
                if *n == 0 {
                    return Err(Error::InvalidParameter(
                        "maximally mixed state needs a party".into(),
                    ));
                }
                Ok(LabeledOperator::identity(&vec![2; *n]).scale(0.5f64.powi(*n as i32)))
            }
        }
    }

    /// Pure target ket when the source is a known pure state.
    pub fn pure_ket(&self) -> Result<Option<LabeledOperator>> {
        Ok(match self {
            Self::Singlet => Some(singlet()),
            Self::PhiPlus => Some(phi_plus()),
            Self::Ghz(n) => Some(ghz(*n)?),
            Self::W(n) => Some(w_state(*n)?),
            Self::Product(d) => Some(LabeledOperator::basis_ket(d, &vec![2; d.len()])?),
            _ => None,
        })
    }
}

/// On-disk density matrix: row-major real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub dims: Vec<usize>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl StateFile {
    pub fn from_operator(op: &LabeledOperator) -> Self {
        let d = op.dim_out();
        let row = |i: usize, f: fn(C64) -> f64| (0..d).map(|j| f(op.get(i, j))).collect();
        Self {
            dims: op.dims().to_vec(),
            re: (0..d).map(|i| row(i, |z| z.re)).collect(),
            im: (0..d).map(|i| row(i, |z| z.im)).collect(),
        }
    }

    /// Builds the operator and validates it as a density matrix.
    pub fn to_density(&self) -> Result<LabeledOperator> {
        let d: usize = self.dims.iter().product();
        let shape_ok = |m: &Vec<Vec<f64>>| m.len() == d && m.iter().all(|r| r.len() == d);
        if self.dims.is_empty() || !shape_ok(&self.re) || !shape_ok(&self.im) {
            return Err(Error::DimensionMismatch(format!(
                "state file matrices must be {d} x {d} for dims {:?}",
                self.dims
            )));
        }
        let data = nalgebra::DMatrix::from_fn(d, d, |i, j| C64::new(self.re[i][j], self.im[i][j]));
        let op = LabeledOperator::square(data, self.dims.clone())?;
        op.validate_density(VALIDATION_TOL)?;
        Ok(op)
    }
}

pub fn load_state_file(path: &Path) -> Result<LabeledOperator> {
    let file: StateFile =
        serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
    file.to_density()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_round_trip() {
        for s in [
            "singlet",
            "phi+",
            "werner:0.5",
            "ghz:3",
            "w:3",
            "random:2x2:7",
            "product:|01>",
            "maximally-mixed:2",
            "file:/tmp/x.json",
        ] {
            let spec: SourceSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert_eq!(
            "random:2,3:1".parse::<SourceSpec>().unwrap().to_string(),
            "random:2x3:1"
        );
        assert_eq!(
            "maximally-mixed".parse::<SourceSpec>().unwrap(),
            SourceSpec::MaximallyMixed(2)
        );
    }

    #[test]
    fn rejects_garbage() {
        for s in [
            "",
            "bell",
            "werner",
            "werner:x",
            "ghz:",
            "random:2x2",
            "product:00",
            "product:|02>",
            "singlet:1",
        ] {
            assert!(s.parse::<SourceSpec>().is_err(), "{s}");
        }
        assert!("werner:1.5".parse::<SourceSpec>().unwrap().load().is_err());
    }

    #[test]
    fn loads() {
        let rho = "product:|01>"
            .parse::<SourceSpec>()
            .unwrap()
            .load()
            .unwrap();
        assert_eq!(rho.get(1, 1).re, 1.0);
        let mm = "maximally-mixed"
            .parse::<SourceSpec>()
            .unwrap()
            .load()
            .unwrap();
        assert!((mm.trace().re - 1.0).abs() < 1e-15);
        let r = "random:2x2:3"
            .parse::<SourceSpec>()
            .unwrap()
            .load()
            .unwrap();
        assert!(r.validate_density(1e-10).is_ok());
    }

    #[test]
    fn state_file_round_trip() {
        let rho = werner_state(0.3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rho.json");
        std::fs::write(
            &path,
            serde_json::to_string(&StateFile::from_operator(&rho)).unwrap(),
        )
        .unwrap();
        let spec: SourceSpec = format!("file:{}", path.display()).parse().unwrap();
        assert!(spec.load().unwrap().max_abs_diff(&rho) < 1e-15);

        let bad = StateFile {
            dims: vec![2],
            re: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            im: vec![vec![0.0; 2]; 2],
        };
        assert!(bad.to_density().is_err());
    }
}
