//! Furniture catalog shared by every room type.
//!
//! Category ids are dense `1..=N_CATEGORIES`; id 0 is reserved for the empty
//! background channel of rasterized layouts.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::LayoutError;

/// The four room kinds in the dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoomType {
    Bedroom,
    Bathroom,
    Study,
    Tatami,
}

impl RoomType {
    pub const ALL: [RoomType; 4] = [RoomType::Bedroom, RoomType::Bathroom, RoomType::Study, RoomType::Tatami];

    pub fn name(self) -> &'static str {
        match self {
            RoomType::Bedroom => "bedroom",
            RoomType::Bathroom => "bathroom",
            RoomType::Study => "study",
            RoomType::Tatami => "tatami",
        }
    }

    pub fn parse(s: &str) -> Result<Self, LayoutError> {
        RoomType::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| LayoutError::UnknownRoomType(s.to_string()))
    }

    /// Categories that the templates for this room may place.
    pub fn categories(self) -> &'static [CategoryId] {
        use CategoryId as C;
        match self {
            RoomType::Bedroom => &[C::BED, C::WARDROBE, C::NIGHTSTAND, C::DESK],
            RoomType::Bathroom => &[C::TOILET, C::SINK, C::SHOWER, C::WASHING_MACHINE],
            RoomType::Study => &[C::DESK, C::CHAIR, C::BOOKSHELF, C::SOFA],
            RoomType::Tatami => &[C::TATAMI_PLATFORM, C::DESK, C::CABINET, C::CHAIR],
        }
    }
}

impl fmt::Display for RoomType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Number of furniture categories (excluding the empty id 0).
pub const N_CATEGORIES: usize = 13;

const NAMES: [&str; N_CATEGORIES] = [
    "bed",
    "wardrobe",
    "nightstand",
    "desk",
    "toilet",
    "sink",
    "shower",
    "washing_machine",
    "chair",
    "bookshelf",
    "sofa",
    "tatami_platform",
    "cabinet",
];

/// Dense furniture category id in `1..=N_CATEGORIES`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CategoryId(u8);

impl CategoryId {
    pub const BED: CategoryId = CategoryId(1);
    pub const WARDROBE: CategoryId = CategoryId(2);
    pub const NIGHTSTAND: CategoryId = CategoryId(3);
    pub const DESK: CategoryId = CategoryId(4);
    pub const TOILET: CategoryId = CategoryId(5);
    pub const SINK: CategoryId = CategoryId(6);
    pub const SHOWER: CategoryId = CategoryId(7);
    pub const WASHING_MACHINE: CategoryId = CategoryId(8);
    pub const CHAIR: CategoryId = CategoryId(9);
    pub const BOOKSHELF: CategoryId = CategoryId(10);
    pub const SOFA: CategoryId = CategoryId(11);
    pub const TATAMI_PLATFORM: CategoryId = CategoryId(12);
    pub const CABINET: CategoryId = CategoryId(13);

    pub fn new(id: u8) -> Result<Self, LayoutError> {
        if (1..=N_CATEGORIES as u8).contains(&id) {
            Ok(CategoryId(id))
        } else {
            Err(LayoutError::UnknownCategory(id.to_string()))
        }
    }

    pub fn from_name(name: &str) -> Result<Self, LayoutError> {
        NAMES.iter().position(|n| *n == name).map(|i| CategoryId(i as u8 + 1)).ok_or_else(|| LayoutError::UnknownCategory(name.to_string()))
    }

    pub fn all() -> impl Iterator<Item = CategoryId> {
        (1..=N_CATEGORIES as u8).map(CategoryId)
    }

    pub fn id(self) -> u8 {
        self.0
    }

    /// Channel index in a one-hot category map (0 is empty).
    pub fn channel(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        NAMES[self.0 as usize - 1]
    }

    /// Room types whose templates may contain this category.
    pub fn room_types(self) -> Vec<RoomType> {
        RoomType::ALL.into_iter().filter(|t| t.categories().contains(&self)).collect()
    }
}

impl fmt::Display for CategoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_dense_and_named_uniquely() {
        let ids: Vec<u8> = CategoryId::all().map(|c| c.id()).collect();
        assert_eq!(ids, (1..=13).collect::<Vec<u8>>());
        for c in CategoryId::all() {
            assert_eq!(CategoryId::from_name(c.name()).unwrap(), c);
        }
        assert!(CategoryId::new(0).is_err());
        assert!(CategoryId::new(14).is_err());
    }

    #[test]
    fn every_category_belongs_to_some_room() {
        for c in CategoryId::all() {
            assert!(!c.room_types().is_empty(), "{c} unused");
        }
        assert_eq!(CategoryId::DESK.room_types().len(), 3);
    }

    #[test]
    fn room_type_names_round_trip() {
        for t in RoomType::ALL {
            assert_eq!(RoomType::parse(t.name()).unwrap(), t);
        }
        assert!(RoomType::parse("kitchen").is_err());
    }
}
