//! Voxel-to-world affines and anatomical orientation codes.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Homogeneous 4×4 voxel-to-world transform in millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine(pub Matrix4<f64>);

impl Affine {
    pub fn identity() -> Self {
        Affine(Matrix4::identity())
    }

    /// Axis-aligned affine with the given spacing and origin.
    pub fn from_spacing(spacing: [f64; 3], origin: [f64; 3]) -> Self {
        let mut m = Matrix4::identity();
        for a in 0..3 {
            m[(a, a)] = spacing[a];
            m[(a, 3)] = origin[a];
        }
        Affine(m)
    }

    pub fn from_rows(rows: [[f64; 4]; 4]) -> Self {
        Affine(Matrix4::from_fn(|r, c| rows[r][c]))
    }

    pub fn rows(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.0[(r, c)];
            }
        }
        out
    }

    /// Checks the homogeneous last row and strictly positive spacing.
    pub fn validate(&self) -> Result<()> {
        let m = &self.0;
        if m[(3, 0)] != 0.0 || m[(3, 1)] != 0.0 || m[(3, 2)] != 0.0 || m[(3, 3)] != 1.0 {
            return Err(Error::InvalidInput(
                "affine last row must be (0, 0, 0, 1)".into(),
            ));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("affine has non-finite entries".into()));
        }
        if self.spacing().iter().any(|s| *s <= 0.0) {
            return Err(Error::InvalidInput("voxel spacing must be positive".into()));
        }
        Ok(())
    }

    /// Voxel size per axis: the Euclidean norm of each of the first three columns.
    pub fn spacing(&self) -> [f64; 3] {
        let m = &self.0;
        let mut s = [0.0; 3];
        for (c, out) in s.iter_mut().enumerate() {
            *out = (m[(0, c)].powi(2) + m[(1, c)].powi(2) + m[(2, c)].powi(2)).sqrt();
        }
        s
    }

    pub fn column(&self, c: usize) -> [f64; 3] {
        [self.0[(0, c)], self.0[(1, c)], self.0[(2, c)]]
    }

    pub fn translation(&self) -> [f64; 3] {
        self.column(3)
    }

    /// World coordinate of a (possibly fractional) voxel index.
    pub fn apply(&self, ijk: [f64; 3]) -> [f64; 3] {
        let v = self.0 * Vector4::new(ijk[0], ijk[1], ijk[2], 1.0);
        [v[0], v[1], v[2]]
    }

    pub fn inverse(&self) -> Result<Affine> {
        let det = self.0.fixed_view::<3, 3>(0, 0).determinant();
        if det.abs() < 1e-12 {
            return Err(Error::SingularAffine);
        }
        self.0
            .try_inverse()
            .map(Affine)
            .ok_or(Error::SingularAffine)
    }

    /// Affine of the sub-grid starting at voxel `offset`.
    pub fn shifted(&self, offset: [usize; 3]) -> Affine {
        let mut m = self.0;
        let t = self.apply([offset[0] as f64, offset[1] as f64, offset[2] as f64]);
        for (r, v) in t.iter().enumerate() {
            m[(r, 3)] = *v;
        }
        Affine(m)
    }

    /// Orientation of the voxel axes: for each voxel axis, the world axis it
    /// runs closest to and the direction along it.
    pub fn orientation(&self) -> Result<[(usize, bool); 3]> {
        self.inverse()?;
        let m = &self.0;
        let mut assigned: [Option<(usize, bool)>; 3] = [None; 3];
        let mut world_used = [false; 3];
        for _ in 0..3 {
            let mut best: Option<(usize, usize, f64)> = None;
            for (vox, slot) in assigned.iter().enumerate() {
                if slot.is_some() {
                    continue;
                }
                for (w, used) in world_used.iter().enumerate() {
                    if *used {
                        continue;
                    }
                    let mag = m[(w, vox)].abs();
                    if best.is_none_or(|(_, _, b)| mag > b) {
                        best = Some((vox, w, mag));
                    }
                }
            }
            let (vox, w, _) = best.expect("three axes to assign");
            assigned[vox] = Some((w, m[(w, vox)] >= 0.0));
            world_used[w] = true;
        }
        Ok(assigned.map(|a| a.expect("all axes assigned")))
    }

    pub fn axcodes(&self) -> Result<Axcodes> {
        let ornt = self.orientation()?;
        Ok(Axcodes(ornt.map(|(w, pos)| Axcodes::letter(w, pos))))
    }
}

impl Serialize for Affine {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Affine {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = <[[f64; 4]; 4]>::deserialize(d)?;
        Ok(Affine::from_rows(rows))
    }
}

/// Three-letter anatomical orientation code, e.g. `RAS`: voxel axis `i`
/// increases towards the anatomical direction named by letter `i`.
///
/// World coordinates follow the RAS+ convention of NIfTI: world x increases
/// towards Right, y towards Anterior, z towards Superior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Axcodes(pub [char; 3]);

impl Axcodes {
    pub const RAS: Axcodes = Axcodes(['R', 'A', 'S']);
    pub const LPS: Axcodes = Axcodes(['L', 'P', 'S']);

    fn letter(world_axis: usize, positive: bool) -> char {
        match (world_axis, positive) {
            (0, true) => 'R',
            (0, false) => 'L',
            (1, true) => 'A',
            (1, false) => 'P',
            (2, true) => 'S',
            _ => 'I',
        }
    }

    fn decode(c: char) -> Option<(usize, bool)> {
        match c.to_ascii_uppercase() {
            'R' => Some((0, true)),
            'L' => Some((0, false)),
            'A' => Some((1, true)),
            'P' => Some((1, false)),
            'S' => Some((2, true)),
            'I' => Some((2, false)),
            _ => None,
        }
    }

    /// (world axis, positive direction) for each voxel axis.
    pub fn world_axes(&self) -> [(usize, bool); 3] {
        self.0
            .map(|c| Self::decode(c).expect("validated at construction"))
    }
}

impl FromStr for Axcodes {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != 3 {
            return Err(Error::InvalidAxcodes(s.to_string()));
        }
        let mut seen = [false; 3];
        let mut out = ['?'; 3];
        for (i, c) in chars.iter().enumerate() {
            let (w, _) = Self::decode(*c).ok_or_else(|| Error::InvalidAxcodes(s.to_string()))?;
            if seen[w] {
                return Err(Error::InvalidAxcodes(s.to_string()));
            }
            seen[w] = true;
            out[i] = c.to_ascii_uppercase();
        }
        Ok(Axcodes(out))
    }
}

impl fmt::Display for Axcodes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.0[0], self.0[1], self.0[2])
    }
}

impl Serialize for Axcodes {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Axcodes {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
