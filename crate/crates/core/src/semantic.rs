//! Material assumed for each indoor semantic class.

use alloc::string::ToString;

use crate::types::MaterialClass;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SurfaceMaterial {
    Drywall,
    VinylLaminate,
    Granite,
    Glass,
    Paper,
    Enamel,
    Fabric,
    Wood,
}

impl SurfaceMaterial {
    pub const ALL: [SurfaceMaterial; 8] = [
        SurfaceMaterial::Drywall,
        SurfaceMaterial::VinylLaminate,
        SurfaceMaterial::Granite,
        SurfaceMaterial::Glass,
        SurfaceMaterial::Paper,
        SurfaceMaterial::Enamel,
        SurfaceMaterial::Fabric,
        SurfaceMaterial::Wood,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SurfaceMaterial::Drywall => "Drywall",
            SurfaceMaterial::VinylLaminate => "Vinyl Laminate",
            SurfaceMaterial::Granite => "Granite",
            SurfaceMaterial::Glass => "Glass",
            SurfaceMaterial::Paper => "Paper",
            SurfaceMaterial::Enamel => "Enamel",
            SurfaceMaterial::Fabric => "Fabric",
            SurfaceMaterial::Wood => "Wood",
        }
    }

    pub fn class(self) -> MaterialClass {
        MaterialClass::new(self as u16, self.name())
    }
}

/// The twenty semantic classes and their materials.
pub const SEMANTIC_MATERIALS: [(&str, SurfaceMaterial); 20] = [
    ("Wall", SurfaceMaterial::Drywall),
    ("Floor", SurfaceMaterial::VinylLaminate),
    ("Counter", SurfaceMaterial::Granite),
    ("Window", SurfaceMaterial::Glass),
    ("Picture", SurfaceMaterial::Paper),
    ("Bathtub", SurfaceMaterial::Enamel),
    ("Toilet", SurfaceMaterial::Enamel),
    ("Sink", SurfaceMaterial::Enamel),
    ("Refrigerator", SurfaceMaterial::Enamel),
    ("Bed", SurfaceMaterial::Fabric),
    ("Sofa", SurfaceMaterial::Fabric),
    ("Curtain", SurfaceMaterial::Fabric),
    ("Shower Curtain", SurfaceMaterial::Fabric),
    ("Cabinet", SurfaceMaterial::Wood),
    ("Chair", SurfaceMaterial::Wood),
    ("Table", SurfaceMaterial::Wood),
    ("Door", SurfaceMaterial::Wood),
    ("Bookshelf", SurfaceMaterial::Wood),
    ("Desk", SurfaceMaterial::Wood),
    ("Other Furniture", SurfaceMaterial::Wood),
];

fn normalise(label: &str) -> impl Iterator<Item = char> + '_ {
    label
        .chars()
        .filter(|c| !matches!(c, ' ' | '_' | '-'))
        .map(|c| c.to_ascii_lowercase())
}

/// Looks up a semantic label; case, spaces, underscores and hyphens are
/// ignored (`"shower_curtain"` matches `"Shower Curtain"`).
pub fn surface_material(label: &str) -> Result<SurfaceMaterial> {
    SEMANTIC_MATERIALS
        .iter()
        .find(|(name, _)| normalise(name).eq(normalise(label)))
        .map(|(_, m)| *m)
        .ok_or_else(|| Error::UnknownSemanticLabel(label.to_string()))
}

pub fn map_semantic_to_material(label: &str) -> Result<MaterialClass> {
    surface_material(label).map(SurfaceMaterial::class)
}
