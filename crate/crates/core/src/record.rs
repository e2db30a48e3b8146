use std::path::Path;

use crate::error::Result;
use crate::imaging::{self, BBox, BinaryImage, GrayImage};

/// One signature with its derived forms, all cropped to the ink bounding box.
#[derive(Clone, Debug)]
pub struct SignatureRecord {
    pub id: String,
    pub writer: Option<String>,
    pub genuine: Option<bool>,
    /// Gray intensities inside the bounding box.
    pub gray: GrayImage,
    pub binary: BinaryImage,
    pub skeleton: BinaryImage,
    /// Bounding box in the source image.
    pub bbox: BBox,
}

impl SignatureRecord {
    pub fn from_gray(id: impl Into<String>, img: &GrayImage) -> Result<Self> {
        let full = imaging::binarize(img)?;
        let (binary, bbox) = imaging::crop_bbox(&full)?;
        let skeleton = imaging::thin(&binary);
        Ok(Self {
            id: id.into(),
            writer: None,
            genuine: None,
            gray: img.crop(bbox),
            binary,
            skeleton,
            bbox,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = imaging::load_signature(path)?;
        Self::from_gray(path.to_string_lossy(), &img)
    }

    pub fn with_label(mut self, writer: impl Into<String>, genuine: bool) -> Self {
        self.writer = Some(writer.into());
        self.genuine = Some(genuine);
        self
    }
}
