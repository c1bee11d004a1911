use planesplat::fixture::{generate, FixtureKind, FixtureParams, WallLayout};
use planesplat::geometry::{normal_from_depth, plane_distance_map};
use planesplat::priors::{align_scale_shift, apply_alignment};
use planesplat::lp3;
use nalgebra::Vector3;

fn main() {
    for noise in [0.0, 0.01] {
        let params = FixtureParams {
            kind: FixtureKind::TwoWalls,
            layout: WallLayout::Both,
            width: 128, height: 96, n_views: 3,
            noise_sigma: noise, affine_s: 1.0, affine_t: 0.0,
            merged_masks: true,
            ..Default::default()
        };
        let data = generate(&params).unwrap();
        let vid = 1;
        let cam = &data.cams[vid];
        // GT face histogram
        let mut hist = std::collections::HashMap::new();
        for &f in &data.gt_face_ids[vid] { *hist.entry(f).or_insert(0usize) += 1; }
        println!("noise {noise}: gt {:?} cam center {:?}", hist, cam.center());
        let dref: Vec<_> = data.prior_depth.iter().collect();
        let sref: Vec<_> = data.sparse.iter().collect();
        let ap = align_scale_shift(&dref, &sref, 10, 0).unwrap();
        let aligned = apply_alignment(&data.prior_depth[vid], &ap);
        let cfg = lp3::Lp3Config::default();
        let normals = normal_from_depth(&aligned, cam, cfg.normal_offset_px);
        let dist = plane_distance_map(&aligned, &normals, cam);
        // stats of normals/dist per GT face
        for face in 1..=3u32 {
            let mut n_sum = Vector3::zeros();
            let mut count = 0;
            let mut ds = vec![];
            for (i, &f) in data.gt_face_ids[vid].iter().enumerate() {
                if f != face { continue; }
                let (u, v) = (i % 128, i / 128);
                if normals.is_valid(u, v) && dist.is_valid(u, v) {
                    n_sum += normals.get(u, v);
                    count += 1;
                    ds.push(dist.get(u, v));
                }
            }
            ds.sort_by(f64::total_cmp);
            let med = if ds.is_empty() { f64::NAN } else { ds[(ds.len()-1)/2] };
            println!("  face {face}: {} valid px, mean n {:?}, delta med {med:.3}", count,
                (n_sum / count.max(1) as f64).map(|x| (x*100.0).round()/100.0));
        }
        let mut regions = Vec::new();
        for m in &data.masks[vid] {
            regions.extend(lp3::inspect_and_split(m, &normals, &dist, &cfg));
        }
        let merged = lp3::merge_coplanar_regions(regions, &dist, &cfg);
        println!("  -> {} merged regions", merged.len());
        for (i, r) in merged.iter().enumerate() {
            println!("     {} : {} px n {:?}", i, r.pixels.len(), r.mean_normal.map(|x|(x*100.0).round()/100.0));
        }
    }
}
