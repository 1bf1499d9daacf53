//! Fixed object-class catalog and the behavior/environment tables.

use serde::{Deserialize, Serialize};

/// Number of object classes.
pub const NUM_CLASSES: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectClass {
    Table,
    Microwave,
    Fridge,
    Sink,
    Lamp,
    Shelf,
    Dresser,
    Sofa,
    Box,
    Apple,
    Mug,
    Book,
    Cd,
    SoapBar,
    Cloth,
}

pub const ALL_CLASSES: [ObjectClass; NUM_CLASSES] = [
    ObjectClass::Table,
    ObjectClass::Microwave,
    ObjectClass::Fridge,
    ObjectClass::Sink,
    ObjectClass::Lamp,
    ObjectClass::Shelf,
    ObjectClass::Dresser,
    ObjectClass::Sofa,
    ObjectClass::Box,
    ObjectClass::Apple,
    ObjectClass::Mug,
    ObjectClass::Book,
    ObjectClass::Cd,
    ObjectClass::SoapBar,
    ObjectClass::Cloth,
];

impl ObjectClass {
    pub fn index(self) -> usize {
        ALL_CLASSES.iter().position(|&c| c == self).unwrap()
    }

    pub fn from_index(i: usize) -> Option<Self> {
        ALL_CLASSES.get(i).copied()
    }

    pub fn portable(self) -> bool {
        use ObjectClass::*;
        matches!(self, Box | Apple | Mug | Book | Cd | SoapBar | Cloth)
    }

    pub fn openable(self) -> bool {
        matches!(self, ObjectClass::Microwave | ObjectClass::Fridge)
    }

    pub fn toggleable(self) -> bool {
        use ObjectClass::*;
        matches!(self, Microwave | Sink | Lamp)
    }

    /// Can other objects be placed on/in it. The box is the movable container.
    pub fn receptacle(self) -> bool {
        use ObjectClass::*;
        matches!(
            self,
            Table | Microwave | Fridge | Sink | Shelf | Dresser | Sofa | Box
        )
    }

    pub fn token(self) -> &'static str {
        use ObjectClass::*;
        match self {
            Table => "table",
            Microwave => "microwave",
            Fridge => "fridge",
            Sink => "sink",
            Lamp => "lamp",
            Shelf => "shelf",
            Dresser => "dresser",
            Sofa => "sofa",
            Box => "box",
            Apple => "apple",
            Mug => "mug",
            Book => "book",
            Cd => "cd",
            SoapBar => "soapbar",
            Cloth => "cloth",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EnvType {
    Kitchen,
    Livingroom,
    Bedroom,
    Bathroom,
}

pub const ALL_ENV_TYPES: [EnvType; 4] = [
    EnvType::Kitchen,
    EnvType::Livingroom,
    EnvType::Bedroom,
    EnvType::Bathroom,
];

impl EnvType {
    /// Fixed receptacles/fixtures present exactly once per layout.
    pub fn fixtures(self) -> &'static [ObjectClass] {
        use ObjectClass::*;
        match self {
            EnvType::Kitchen => &[Table, Microwave, Fridge, Sink, Shelf],
            EnvType::Livingroom => &[Table, Sofa, Shelf, Lamp],
            EnvType::Bedroom => &[Table, Dresser, Shelf, Lamp],
            EnvType::Bathroom => &[Table, Sink, Shelf],
        }
    }

    /// Portable object classes spawned in this environment (one instance each).
    pub fn portables(self) -> &'static [ObjectClass] {
        use ObjectClass::*;
        match self {
            EnvType::Kitchen => &[Apple, Mug, Box],
            EnvType::Livingroom => &[Mug, Book, Box],
            EnvType::Bedroom => &[Book, Cd, Box],
            EnvType::Bathroom => &[SoapBar, Cloth, Box],
        }
    }

    /// Plain placement receptacles (non-openable, not the sink/box).
    pub fn plain_receptacles(self) -> &'static [ObjectClass] {
        use ObjectClass::*;
        match self {
            EnvType::Kitchen => &[Table, Shelf],
            EnvType::Livingroom => &[Table, Sofa, Shelf],
            EnvType::Bedroom => &[Table, Dresser, Shelf],
            EnvType::Bathroom => &[Table, Shelf],
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            EnvType::Kitchen => "kitchen",
            EnvType::Livingroom => "livingroom",
            EnvType::Bedroom => "bedroom",
            EnvType::Bathroom => "bathroom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Behavior {
    Examine,
    PickPlace,
    Heat,
    Cool,
    Clean,
    Pick2Place,
    Movable,
}

pub const ALL_BEHAVIORS: [Behavior; 7] = [
    Behavior::Examine,
    Behavior::PickPlace,
    Behavior::Heat,
    Behavior::Cool,
    Behavior::Clean,
    Behavior::Pick2Place,
    Behavior::Movable,
];

impl Behavior {
    pub fn token(self) -> &'static str {
        match self {
            Behavior::Examine => "examine",
            Behavior::PickPlace => "pick_and_place",
            Behavior::Heat => "heat",
            Behavior::Cool => "cool",
            Behavior::Clean => "clean",
            Behavior::Pick2Place => "pick_two_and_place",
            Behavior::Movable => "movable",
        }
    }
}
