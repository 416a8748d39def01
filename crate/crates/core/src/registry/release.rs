use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use semver::Version;
use serde::{Deserialize, Serialize};

/// A semantic version tagged on the whole repository.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReleaseTag {
    pub version: Version,
    /// Latest linear version of every title at tagging time.
    pub snapshot: BTreeMap<String, u32>,
    pub timestamp: DateTime<Utc>,
}

/// PATCH by default, MINOR after breaking changes, MAJOR on override.
pub fn bump(previous: &Version, breaking_since_last: bool, major_override: bool) -> Version {
    if major_override {
        Version::new(previous.major + 1, 0, 0)
    } else if breaking_since_last {
        Version::new(previous.major, previous.minor + 1, 0)
    } else {
        Version::new(previous.major, previous.minor, previous.patch + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_rules() {
        let v = Version::new(1, 2, 3);
        assert_eq!(bump(&v, false, false), Version::new(1, 2, 4));
        assert_eq!(bump(&v, true, false), Version::new(1, 3, 0));
        assert_eq!(bump(&v, false, true), Version::new(2, 0, 0));
        assert_eq!(bump(&v, true, true), Version::new(2, 0, 0));
    }
}
