//! Mesh, quaternion, and camera-model foundations shared by all modules.

mod camera;
mod mesh;
mod quat;
mod vec3;

pub use camera::{look_at_quaternion, project, CameraPose};
pub use mesh::Mesh;
pub use quat::{geodesic_distance, quat_rotate, UnitQuaternion};
pub use vec3::Vec3;
