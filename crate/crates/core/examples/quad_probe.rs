use silfit::geom::{look_at_quaternion, CameraPose, Vec3};
use silfit::remesh::SphereGrid;
use silfit::render::{render_silhouette, silhouette_fit_grad, RenderConfig};
use std::time::Instant;

fn main() {
    let grid = SphereGrid::unit_sphere(10, 10, Vec3::ZERO, 1.0);
    let mesh = grid.to_mesh();
    let pose = CameraPose::new(look_at_quaternion(0.7, 0.3), 0.62, [0.02, -0.03], 0.0);
    // simulate the real optimization loop mix: 30 iters at 128, 30 at 192, 40 at 256
    let t0 = Instant::now();
    let reps = 20; // hypotheses
    for _ in 0..reps {
        for (n, res) in [(30, 128usize), (30, 192), (40, 256)] {
            let cfg = RenderConfig { resolution: res, sigma: 1.0 };
            let target = render_silhouette(&mesh, &pose, &cfg).unwrap();
            for _ in 0..n {
                let _ = silhouette_fit_grad(&mesh, &pose, &cfg, &target).unwrap();
            }
        }
    }
    let total = t0.elapsed().as_secs_f64();
    println!("per-hypothesis 100-iter cost: {:.1} ms -> 50 img x 40 hyp = {:.0} s",
        total * 1000.0 / reps as f64, total / reps as f64 * 2000.0);
}
