//! Per-pixel class ids.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const BACKGROUND: u8 = 0;
pub const INTERGRANULAR: u8 = 1;
pub const TRANSGRANULAR: u8 = 2;
/// Pixels covered by no annotation.
pub const VOID: u8 = 255;

/// Number of trainable classes (background, intergranular, transgranular).
pub const NUM_CLASSES: usize = 3;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum FractureClass {
    Background,
    Intergranular,
    Transgranular,
}

impl FractureClass {
    pub const ALL: [FractureClass; 3] = [
        FractureClass::Background,
        FractureClass::Intergranular,
        FractureClass::Transgranular,
    ];

    pub fn id(self) -> u8 {
        match self {
            FractureClass::Background => BACKGROUND,
            FractureClass::Intergranular => INTERGRANULAR,
            FractureClass::Transgranular => TRANSGRANULAR,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.id() == id)
    }

    pub fn label(self) -> &'static str {
        match self {
            FractureClass::Background => "background",
            FractureClass::Intergranular => "intergranular",
            FractureClass::Transgranular => "transgranular",
        }
    }

    /// Case-insensitive label lookup, surrounding whitespace ignored.
    pub fn from_label(label: &str) -> Option<Self> {
        let l = label.trim();
        Self::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(l))
    }
}

/// `H × W` raster of class ids in `{0, 1, 2, 255}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMask {
    pub height: usize,
    pub width: usize,
    pub ids: Vec<u8>,
}

impl ClassMask {
    pub fn filled(height: usize, width: usize, id: u8) -> Self {
        ClassMask {
            height,
            width,
            ids: vec![id; height * width],
        }
    }

    /// Validates length and that every id is one of 0, 1, 2, 255.
    pub fn new(height: usize, width: usize, ids: Vec<u8>) -> Result<Self> {
        if ids.len() != height * width {
            return Err(Error::shape(
                "ClassMask::new",
                "pixel count",
                height * width,
                ids.len(),
            ));
        }
        if let Some(&bad) = ids.iter().find(|&&v| !is_valid_id(v)) {
            return Err(Error::invalid(
                "ClassMask::new",
                alloc::format!("invalid class id {bad}"),
            ));
        }
        Ok(ClassMask { height, width, ids })
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.ids[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, id: u8) {
        self.ids[y * self.width + x] = id;
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn void_fraction(&self) -> f64 {
        if self.ids.is_empty() {
            return 0.0;
        }
        self.ids.iter().filter(|&&v| v == VOID).count() as f64 / self.ids.len() as f64
    }

    pub fn crop(&self, y: usize, x: usize, height: usize, width: usize) -> Result<Self> {
        if y + height > self.height || x + width > self.width {
            return Err(Error::invalid(
                "ClassMask::crop",
                "window exceeds mask bounds",
            ));
        }
        let mut ids = Vec::with_capacity(height * width);
        for row in y..y + height {
            ids.extend_from_slice(&self.ids[row * self.width + x..row * self.width + x + width]);
        }
        Ok(ClassMask { height, width, ids })
    }

    /// Training targets: `VOID` becomes `BACKGROUND` unless `keep_void`.
    pub fn training_targets(&self, keep_void: bool) -> Vec<u8> {
        if keep_void {
            self.ids.clone()
        } else {
            self.ids
                .iter()
                .map(|&v| if v == VOID { BACKGROUND } else { v })
                .collect()
        }
    }
}

pub fn is_valid_id(id: u8) -> bool {
    matches!(id, BACKGROUND | INTERGRANULAR | TRANSGRANULAR | VOID)
}
