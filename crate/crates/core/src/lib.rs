//! Headless marine robotics simulation core.
//!
//! The crate is organised by subsystem:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`scenario`] | JSON scenario configuration, defaults and validation |
//! | [`world`] | bathymetry heightfield, semantically labelled props, procedural generation, archives |
//! | [`accel`] | ray query backends (cached octree, direct ray caster) and their benchmark |
//! | [`dynamics`] | torpedo AUV 6-DOF model, autopilots and the per-tick dynamics manager |
//! | [`envfx`] | volumetric current fields, Gerstner waves and slice buoyancy |
//! | [`sensors`] | echo sounder, multibeam, sidescan, LiDAR and navigation sensors |
//!
//! Conventions: world frame is North-East-Down with z positive down and the
//! mean sea surface at z = 0. Body frame is forward-starboard-down. Angles are
//! radians everywhere.

pub mod accel;
pub mod dynamics;
pub mod envfx;
pub mod geom;
pub mod rng;
pub mod scenario;
pub mod sensors;
pub mod sim;
pub mod world;

pub use nalgebra;
