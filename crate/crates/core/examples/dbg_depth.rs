use planesplat::io::{cameras, ply};
use planesplat::render::render;

fn main() {
    let scene = ply::read_splats(std::path::Path::new("/tmp/fixfull/out/scene.ply")).unwrap();
    let cams = cameras::read_cameras(std::path::Path::new("/tmp/fixfull/cameras.json")).unwrap();
    println!("{} gaussians", scene.len());
    // opacity / scale stats
    let mut op: Vec<f64> = scene.opacity_logit.iter().map(|&l| 1.0/(1.0+(-l).exp())).collect();
    op.sort_by(f64::total_cmp);
    println!("opacity p10/p50/p90: {:.3} {:.3} {:.3}", op[op.len()/10], op[op.len()/2], op[op.len()*9/10]);
    let cam = &cams[0];
    let out = render(&scene, cam);
    let mut worst = vec![];
    let (mut n_huge, mut n_valid) = (0, 0);
    for v in 0..cam.height {
        for u in 0..cam.width {
            let d = out.depth.get(u, v);
            if !d.is_finite() { continue; }
            n_valid += 1;
            if d.abs() > 10.0 || d < 0.0 {
                n_huge += 1;
                let ray = cam.ray_dir(u as f64, v as f64);
                let denom = out.gs_normal.get(u, v).dot(&ray);
                worst.push((d.abs(), u, v, denom, out.acc.get(u, v), out.plane_dist.get(u, v)));
            }
        }
    }
    worst.sort_by(|a, b| b.0.total_cmp(&a.0));
    println!("valid {} huge/neg {}", n_valid, n_huge);
    for (d, u, v, denom, acc, pd) in worst.iter().take(8) {
        println!("  ({u},{v}) depth {:.1} denom {:.5} acc {:.3} delta {:.3}", d, denom, acc, pd);
    }
}
