//! Geometric aggregation regions and symmetric pooling.
//!
//! The default layout has ten regions: the whole object, three two-sided
//! cones around the x/y/z axes with apex at the origin, and six inverted
//! cones whose vertex sits on an axis at distance `delta` and which open
//! back toward the object, cut off at the coordinate plane through the
//! origin.

use std::fmt;
use std::str::FromStr;

use crate::cloud::{norm, Point, PointCloud};
use crate::descriptor::{SpectralDescriptor, DIM};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            _ => Err(Error::Config(format!("unknown axis '{s}'"))),
        }
    }
}

/// One aggregation region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionSpec {
    Global,
    /// Points within `half_angle_deg` of either direction of `axis`.
    SymmetricCone { axis: Axis, half_angle_deg: f64 },
    /// Cone with vertex at `±delta` on `axis`, opening toward the origin.
    InvertedCone {
        axis: Axis,
        positive: bool,
        half_angle_deg: f64,
        delta: f64,
    },
}

fn check_angle(deg: f64) -> Result<()> {
    if !(deg > 0.0 && deg < 90.0) {
        return Err(Error::Config(format!(
            "cone half angle must lie in (0, 90) degrees, got {deg}"
        )));
    }
    Ok(())
}

impl RegionSpec {
    pub fn symmetric_cone(axis: Axis, half_angle_deg: f64) -> Result<Self> {
        check_angle(half_angle_deg)?;
        Ok(RegionSpec::SymmetricCone {
            axis,
            half_angle_deg,
        })
    }

    pub fn inverted_cone(axis: Axis, positive: bool, half_angle_deg: f64, delta: f64) -> Result<Self> {
        check_angle(half_angle_deg)?;
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!("inverted cone delta must be > 0, got {delta}")));
        }
        Ok(RegionSpec::InvertedCone {
            axis,
            positive,
            half_angle_deg,
            delta,
        })
    }

    pub fn contains(&self, p: Point) -> bool {
        match *self {
            RegionSpec::Global => true,
            RegionSpec::SymmetricCone {
                axis,
                half_angle_deg,
            } => {
                let along = p[axis.index()].abs();
                along >= norm(p) * half_angle_deg.to_radians().cos()
            }
            RegionSpec::InvertedCone {
                axis,
                positive,
                half_angle_deg,
                delta,
            } => {
                let a = axis.index();
                let s = if positive { 1.0 } else { -1.0 };
                if s * p[a] < 0.0 {
                    return false;
                }
                let mut v = [0.0; 3];
                v[a] = s * delta;
                let to_vertex = [v[0] - p[0], v[1] - p[1], v[2] - p[2]];
                s * to_vertex[a] >= norm(to_vertex) * half_angle_deg.to_radians().cos()
            }
        }
    }

    /// Indices of member points, ascending.
    pub fn members(&self, cloud: &PointCloud) -> Vec<usize> {
        cloud
            .points()
            .iter()
            .enumerate()
            .filter(|(_, p)| self.contains(**p))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn group(&self) -> RegionGroup {
        match self {
            RegionSpec::Global => RegionGroup::Global,
            RegionSpec::SymmetricCone { .. } => RegionGroup::Cone,
            RegionSpec::InvertedCone { .. } => RegionGroup::InvertedCone,
        }
    }
}

impl fmt::Display for RegionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionSpec::Global => write!(f, "global"),
            RegionSpec::SymmetricCone {
                axis,
                half_angle_deg,
            } => write!(f, "cone {axis} {half_angle_deg}"),
            RegionSpec::InvertedCone {
                axis,
                positive,
                half_angle_deg,
                delta,
            } => write!(
                f,
                "inverted {}{axis} {half_angle_deg} {delta}",
                if *positive { '+' } else { '-' }
            ),
        }
    }
}

impl FromStr for RegionSpec {
    type Err = Error;

    /// Parses the [`Display`](fmt::Display) form.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number '{t}' in region '{s}'")))
        };
        match parts.as_slice() {
            ["global"] => Ok(RegionSpec::Global),
            ["cone", axis, angle] => RegionSpec::symmetric_cone(axis.parse()?, num(angle)?),
            ["inverted", dir, angle, delta] => {
                let (sign, axis) = dir.split_at(1.min(dir.len()));
                let positive = match sign {
                    "+" => true,
                    "-" => false,
                    _ => return Err(Error::Config(format!("bad direction in region '{s}'"))),
                };
                RegionSpec::inverted_cone(axis.parse()?, positive, num(angle)?, num(delta)?)
            }
            _ => Err(Error::Config(format!("unrecognized region '{s}'"))),
        }
    }
}

/// Coarse region families, used to switch whole groups on or off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegionGroup {
    Global,
    Cone,
    InvertedCone,
}

impl RegionGroup {
    pub const ALL: [RegionGroup; 3] = [RegionGroup::Global, RegionGroup::Cone, RegionGroup::InvertedCone];

    pub fn name(self) -> &'static str {
        match self {
            RegionGroup::Global => "global",
            RegionGroup::Cone => "cone",
            RegionGroup::InvertedCone => "inverted",
        }
    }

    pub fn region_count(self) -> usize {
        match self {
            RegionGroup::Global => 1,
            RegionGroup::Cone => 3,
            RegionGroup::InvertedCone => 6,
        }
    }

    /// The seven non-empty group combinations in ablation-table order:
    /// single groups first, then pairs, then all three.
    pub fn combinations() -> Vec<Vec<RegionGroup>> {
        use RegionGroup::*;
        vec![
            vec![Global],
            vec![Cone],
            vec![InvertedCone],
            vec![Global, Cone],
            vec![Global, InvertedCone],
            vec![Cone, InvertedCone],
            vec![Global, Cone, InvertedCone],
        ]
    }
}

impl FromStr for RegionGroup {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(RegionGroup::Global),
            "cone" | "cones" => Ok(RegionGroup::Cone),
            "inverted" | "inverted_cone" | "inverted-cone" => Ok(RegionGroup::InvertedCone),
            _ => Err(Error::Config(format!("unknown region group '{s}'"))),
        }
    }
}

/// Ordered list of regions.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSet(pub Vec<RegionSpec>);

impl RegionSet {
    /// Regions for the selected groups, always in the order global, cones
    /// x/y/z, inverted +x/−x/+y/−y/+z/−z.
    pub fn from_groups(groups: &[RegionGroup], theta1_deg: f64, theta2_deg: f64, delta: f64) -> Result<Self> {
        let mut out = Vec::new();
        if groups.contains(&RegionGroup::Global) {
            out.push(RegionSpec::Global);
        }
        if groups.contains(&RegionGroup::Cone) {
            for axis in Axis::ALL {
                out.push(RegionSpec::symmetric_cone(axis, theta1_deg)?);
            }
        }
        if groups.contains(&RegionGroup::InvertedCone) {
            for axis in Axis::ALL {
                for positive in [true, false] {
                    out.push(RegionSpec::inverted_cone(axis, positive, theta2_deg, delta)?);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::Config("region set is empty".into()));
        }
        Ok(RegionSet(out))
    }

    /// Ten-region layout.
    pub fn standard(theta1_deg: f64, theta2_deg: f64, delta: f64) -> Result<Self> {
        Self::from_groups(&RegionGroup::ALL, theta1_deg, theta2_deg, delta)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, RegionSpec> {
        self.0.iter()
    }
}

/// Symmetric per-channel reductions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregator {
    Max,
    Mean,
    L1,
    L2,
    Std,
    Var,
    Min,
}

impl Aggregator {
    pub const ALL: [Aggregator; 7] = [
        Aggregator::Max,
        Aggregator::Mean,
        Aggregator::L1,
        Aggregator::L2,
        Aggregator::Std,
        Aggregator::Var,
        Aggregator::Min,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Aggregator::Max => "max",
            Aggregator::Mean => "mean",
            Aggregator::L1 => "l1",
            Aggregator::L2 => "l2",
            Aggregator::Std => "std",
            Aggregator::Var => "var",
            Aggregator::Min => "min",
        }
    }

    /// Parses a comma-separated list such as `max,mean,l1`.
    pub fn parse_list(s: &str) -> Result<Vec<Aggregator>> {
        let list = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse::<Aggregator>)
            .collect::<Result<Vec<_>>>()?;
        if list.is_empty() {
            return Err(Error::Config("aggregator list is empty".into()));
        }
        for (i, a) in list.iter().enumerate() {
            if list[..i].contains(a) {
                return Err(Error::Config(format!("aggregator '{}' listed twice", a.name())));
            }
        }
        Ok(list)
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aggregator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "max" => Ok(Aggregator::Max),
            "mean" => Ok(Aggregator::Mean),
            "l1" => Ok(Aggregator::L1),
            "l2" => Ok(Aggregator::L2),
            "std" => Ok(Aggregator::Std),
            "var" => Ok(Aggregator::Var),
            "min" => Ok(Aggregator::Min),
            _ => Err(Error::Config(format!("unknown aggregator '{s}'"))),
        }
    }
}

/// Reduces the descriptors of `members` (ascending indices) into
/// `aggregators.len() × 24` values, aggregator-major. An empty member set
/// yields all zeros.
pub fn aggregate(descriptors: &[SpectralDescriptor], members: &[usize], aggregators: &[Aggregator]) -> Vec<f64> {
    let mut out = vec![0.0; aggregators.len() * DIM];
    if members.is_empty() {
        return out;
    }
    let n = members.len() as f64;
    for c in 0..DIM {
        let mut sum = 0.0;
        let mut abs_sum = 0.0;
        let mut sq_sum = 0.0;
        let mut max = f64::NEG_INFINITY;
        let mut min = f64::INFINITY;
        for &i in members {
            let v = descriptors[i].0[c];
            sum += v;
            abs_sum += v.abs();
            sq_sum += v * v;
            max = max.max(v);
            min = min.min(v);
        }
        let mean = sum / n;
        let var = members
            .iter()
            .map(|&i| {
                let d = descriptors[i].0[c] - mean;
                d * d
            })
            .sum::<f64>()
            / n;
        for (slot, agg) in aggregators.iter().enumerate() {
            out[slot * DIM + c] = match agg {
                Aggregator::Max => max,
                Aggregator::Mean => mean,
                Aggregator::L1 => abs_sum,
                Aggregator::L2 => sq_sum.sqrt(),
                Aggregator::Std => var.sqrt(),
                Aggregator::Var => var,
                Aggregator::Min => min,
            };
        }
    }
    out
}

/// Length of the feature vector for a region/aggregator configuration.
pub fn feature_len(regions: usize, aggregators: usize) -> usize {
    regions * aggregators * DIM
}

/// Concatenated region blocks, region-major, then aggregator, then channel.
pub fn build_feature(
    cloud: &PointCloud,
    descriptors: &[SpectralDescriptor],
    regions: &RegionSet,
    aggregators: &[Aggregator],
) -> Vec<f64> {
    assert_eq!(cloud.len(), descriptors.len(), "one descriptor per point");
    let mut out = Vec::with_capacity(feature_len(regions.len(), aggregators.len()));
    for region in regions.iter() {
        let members = region.members(cloud);
        out.extend(aggregate(descriptors, &members, aggregators));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn channel(values: &[f64]) -> Vec<SpectralDescriptor> {
        values
            .iter()
            .map(|&v| {
                let mut d = [0.0; DIM];
                d[0] = v;
                SpectralDescriptor(d)
            })
            .collect()
    }

    #[test]
    fn symmetric_cone_membership() {
        let cone = RegionSpec::symmetric_cone(Axis::X, 75.0).unwrap();
        assert!(cone.contains([0.9, 0.0, 0.0]));
        assert!(cone.contains([-0.9, 0.0, 0.0]));
        assert!(!cone.contains([0.0, 0.9, 0.0]));
        assert!(cone.contains([0.0, 0.0, 0.0]));
    }

    #[test]
    fn inverted_cone_membership() {
        let cone = RegionSpec::inverted_cone(Axis::X, true, 45.0, 1.0).unwrap();
        assert!(cone.contains([0.5, 0.0, 0.0]));
        // atan(0.6 / 0.5) = 50.19 degrees from the -x direction at the vertex
        assert!(!cone.contains([0.5, 0.6, 0.0]));
        assert!(cone.contains([0.5, 0.45, 0.0]));
        assert!(cone.contains([1.0, 0.0, 0.0]));
        // beyond the base plane
        assert!(!cone.contains([-0.1, 0.0, 0.0]));
        let neg = RegionSpec::inverted_cone(Axis::X, false, 45.0, 1.0).unwrap();
        assert!(neg.contains([-0.5, 0.0, 0.0]));
        assert!(!neg.contains([0.5, 0.0, 0.0]));
    }

    #[test]
    fn invalid_region_params() {
        assert!(RegionSpec::symmetric_cone(Axis::Y, 90.0).is_err());
        assert!(RegionSpec::symmetric_cone(Axis::Y, 0.0).is_err());
        assert!(RegionSpec::inverted_cone(Axis::Z, true, 45.0, 0.0).is_err());
    }

    #[test]
    fn region_text_round_trip() {
        for r in RegionSet::standard(75.0, 45.0, 1.0).unwrap().iter() {
            let back: RegionSpec = r.to_string().parse().unwrap();
            assert_eq!(*r, back);
        }
        assert!("cone w 30".parse::<RegionSpec>().is_err());
        assert!("inverted x 30 1".parse::<RegionSpec>().is_err());
    }

    #[test]
    fn standard_layout_order() {
        let set = RegionSet::standard(75.0, 45.0, 1.0).unwrap();
        assert_eq!(set.len(), 10);
        let names: Vec<String> = set.iter().map(|r| r.to_string()).collect();
        assert_eq!(names[0], "global");
        assert_eq!(names[1], "cone x 75");
        assert_eq!(names[3], "cone z 75");
        assert_eq!(names[4], "inverted +x 45 1");
        assert_eq!(names[5], "inverted -x 45 1");
        assert_eq!(names[9], "inverted -z 45 1");
    }

    #[test]
    fn reductions_on_one_two_three() {
        let ds = channel(&[1.0, 2.0, 3.0]);
        let out = aggregate(&ds, &[0, 1, 2], &Aggregator::ALL);
        let at = |a: usize| out[a * DIM];
        assert_eq!(at(0), 3.0);
        assert_eq!(at(1), 2.0);
        assert_eq!(at(2), 6.0);
        assert!((at(3) - 14f64.sqrt()).abs() < 1e-15);
        assert!((at(4) - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((at(5) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(at(6), 1.0);
    }

    #[test]
    fn constant_channel() {
        let ds = channel(&[4.5, 4.5, 4.5]);
        let out = aggregate(&ds, &[0, 1, 2], &[Aggregator::Std, Aggregator::Var, Aggregator::Max, Aggregator::Min, Aggregator::Mean]);
        assert_eq!(out[0], 0.0);
        assert_eq!(out[DIM], 0.0);
        assert_eq!(out[2 * DIM], 4.5);
        assert_eq!(out[3 * DIM], 4.5);
        assert_eq!(out[4 * DIM], 4.5);
    }

    #[test]
    fn empty_region_is_zero_block() {
        let ds = channel(&[1.0]);
        assert_eq!(aggregate(&ds, &[], &Aggregator::ALL), vec![0.0; 7 * DIM]);
    }

    #[test]
    fn aggregator_parsing() {
        assert_eq!(Aggregator::parse_list("max, Mean,l1").unwrap(), vec![Aggregator::Max, Aggregator::Mean, Aggregator::L1]);
        assert!(matches!(Aggregator::parse_list("max,median"), Err(Error::Config(_))));
        assert!(Aggregator::parse_list("max,max").is_err());
        assert!(Aggregator::parse_list("").is_err());
    }

    #[test]
    fn feature_lengths_per_combination() {
        let lens: Vec<usize> = RegionGroup::combinations()
            .iter()
            .map(|g| RegionSet::from_groups(g, 75.0, 45.0, 1.0).unwrap().len() * 7 * DIM)
            .collect();
        assert_eq!(lens, vec![168, 504, 1008, 672, 1176, 1512, 1680]);
    }

    #[test]
    fn block_identities_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ds: Vec<_> = (0..50)
            .map(|_| SpectralDescriptor([0.0; DIM].map(|_: f64| rng.random_range(-2.0..2.0))))
            .collect();
        let members: Vec<usize> = (0..50).filter(|i| i % 3 != 0).collect();
        let out = aggregate(&ds, &members, &Aggregator::ALL);
        let n = members.len() as f64;
        for c in 0..DIM {
            let std = out[4 * DIM + c];
            let var = out[5 * DIM + c];
            assert!((std * std - var).abs() < 1e-12);
            assert!(out[3 * DIM + c] >= out[2 * DIM + c] / n.sqrt() - 1e-12);
            assert!(out[c] >= out[DIM + c] && out[DIM + c] >= out[6 * DIM + c]);
        }
    }

    #[test]
    fn cone_membership_grows_with_angle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cloud = PointCloud::new(
            (0..300)
                .map(|_| [0.0; 3].map(|_: f64| rng.random_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap();
        for axis in Axis::ALL {
            let mut prev: Vec<usize> = Vec::new();
            for deg in [10.0, 30.0, 45.0, 60.0, 75.0, 89.0] {
                let m = RegionSpec::symmetric_cone(axis, deg).unwrap().members(&cloud);
                assert!(prev.iter().all(|i| m.contains(i)));
                prev = m;
                let inv = RegionSpec::inverted_cone(axis, true, deg, 1.0).unwrap();
                let _ = inv.members(&cloud);
            }
            // mirror symmetry of the two-sided cone
            let cone = RegionSpec::symmetric_cone(axis, 60.0).unwrap();
            for p in cloud.points() {
                assert_eq!(cone.contains(*p), cone.contains(p.map(|v| -v)));
                let mut flipped = *p;
                flipped[axis.index()] = -flipped[axis.index()];
                assert_eq!(cone.contains(*p), cone.contains(flipped));
            }
        }
    }
}
