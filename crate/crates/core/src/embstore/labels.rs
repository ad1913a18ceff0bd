//! Label rules applied when building task datasets.

use super::{LabelSchema, StoreError};

/// Authors strictly younger than this are `Young`.
pub const AGE_YOUNG_BELOW: i64 = 35;
/// Authors strictly older than this are `Old`.
pub const AGE_OLD_ABOVE: i64 = 45;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgeBin {
    Young,
    Old,
    /// Ages 35 through 45 inclusive; such records are dropped.
    Excluded,
}

impl AgeBin {
    /// Class index under [`age_schema`], `None` for excluded ages.
    pub fn class_index(self) -> Option<usize> {
        match self {
            AgeBin::Young => Some(0),
            AgeBin::Old => Some(1),
            AgeBin::Excluded => None,
        }
    }
}

pub fn bin_age(age: i64) -> Result<AgeBin, StoreError> {
    match age {
        a if a < 0 => Err(StoreError::NegativeAge(a)),
        a if a < AGE_YOUNG_BELOW => Ok(AgeBin::Young),
        a if a > AGE_OLD_ABOVE => Ok(AgeBin::Old),
        _ => Ok(AgeBin::Excluded),
    }
}

pub fn age_schema() -> LabelSchema {
    LabelSchema::new(["Young", "Old"]).expect("static schema is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundaries() {
        assert_eq!(bin_age(34).unwrap(), AgeBin::Young);
        assert_eq!(bin_age(35).unwrap(), AgeBin::Excluded);
        assert_eq!(bin_age(40).unwrap(), AgeBin::Excluded);
        assert_eq!(bin_age(45).unwrap(), AgeBin::Excluded);
        assert_eq!(bin_age(46).unwrap(), AgeBin::Old);
        assert!(bin_age(-1).is_err());
    }

    #[test]
    fn total_partition_of_plausible_ages() {
        let mut counts = [0; 3];
        for age in 0..=120 {
            match bin_age(age).unwrap() {
                AgeBin::Young => counts[0] += 1,
                AgeBin::Excluded => counts[1] += 1,
                AgeBin::Old => counts[2] += 1,
            }
        }
        assert_eq!(counts, [35, 11, 75]);
        assert_eq!(age_schema().name(AgeBin::Old.class_index().unwrap()), Some("Old"));
    }
}
