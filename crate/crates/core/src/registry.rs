//! Named strategies selectable at run time.

use crate::mesh::{DerivedField, Freudenthal, SujudiHaimes, Tessellation};

pub fn derived_fields() -> Vec<Box<dyn DerivedField>> {
    vec![Box::new(SujudiHaimes)]
}

pub fn tessellations() -> Vec<Box<dyn Tessellation>> {
    vec![Box::new(Freudenthal)]
}

pub fn derived_field(name: &str) -> Option<Box<dyn DerivedField>> {
    derived_fields().into_iter().find(|d| d.name() == name)
}

pub fn tessellation(name: &str) -> Option<Box<dyn Tessellation>> {
    tessellations().into_iter().find(|t| t.name() == name)
}
