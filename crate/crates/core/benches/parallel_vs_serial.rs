//! Parallel vs sequential throughput of the data-parallel kernels.
//!
//! The sequential baseline runs the same chunked code in a one-thread rayon
//! pool; results are bit-identical by construction (chunk partial results
//! combine in a fixed order), which the setup asserts before timing.
//! Building the crate without the `parallel` feature swaps in the plain
//! iterator fallback with the same output.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use levelset_metrics::curvature::mean_curvature;
use levelset_metrics::field::{builtin_field, BoundingBox, Interval, ScalarField};
use levelset_metrics::meshing::{extract_level_set, GridSpec};
use levelset_metrics::morse::survey_critical_points;
use levelset_metrics::quadrature::{nu_profile, region_integral, QuadratureConfig};

struct Pools {
    single: rayon::ThreadPool,
    full: rayon::ThreadPool,
}

impl Pools {
    fn new() -> Self {
        Self {
            single: rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .expect("single-thread pool"),
            full: rayon::ThreadPoolBuilder::new().build().expect("default pool"),
        }
    }

    fn bench_pair<T: Send + PartialEq + std::fmt::Debug>(
        &self,
        c: &mut Criterion,
        group: &str,
        work: impl Fn() -> T + Sync,
    ) {
        let serial = self.single.install(&work);
        let parallel = self.full.install(&work);
        assert_eq!(serial, parallel, "parallel result must be bit-identical");
        let mut g = c.benchmark_group(group);
        g.sample_size(10);
        g.bench_with_input(BenchmarkId::new("serial", 1), &(), |b, ()| {
            b.iter(|| self.single.install(&work))
        });
        let threads = self.full.current_num_threads();
        g.bench_with_input(BenchmarkId::new("parallel", threads), &(), |b, ()| {
            b.iter(|| self.full.install(&work))
        });
        g.finish();
    }
}

fn sphere() -> ScalarField {
    builtin_field("sphere", 3).unwrap()
}

fn bench_region_integral(c: &mut Criterion, pools: &Pools) {
    let field = sphere();
    let interval = Interval::new(1.0, 4.0).unwrap();
    let box_ = BoundingBox::centered_cube(3, 2.5);
    let cfg = QuadratureConfig::new(500_000, 42).unwrap();
    pools.bench_pair(c, "region_integral_mean_curvature", || {
        let est = region_integral(
            &field,
            |jet| mean_curvature(jet, 2).unwrap_or(0.0),
            &interval,
            &box_,
            &cfg,
        )
        .unwrap();
        est.value.to_bits()
    });
}

fn bench_nu_profile(c: &mut Criterion, pools: &Pools) {
    let field = sphere();
    let interval = Interval::new(1.0, 4.0).unwrap();
    let box_ = BoundingBox::centered_cube(3, 2.5);
    let cfg = QuadratureConfig::new(500_000, 7).unwrap();
    pools.bench_pair(c, "nu_profile_30_bins", || {
        let profile = nu_profile(&field, &interval, 30, &box_, &cfg).unwrap();
        profile
            .values
            .iter()
            .map(|v| v.to_bits())
            .collect::<Vec<_>>()
    });
}

fn bench_extract_level_set(c: &mut Criterion, pools: &Pools) {
    let field = sphere();
    let grid = GridSpec::new(BoundingBox::centered_cube(3, 1.5), 96).unwrap();
    pools.bench_pair(c, "extract_level_set_res96", || {
        let mesh = extract_level_set(&field, 1.0, &grid).unwrap();
        (mesh.vertices().len(), mesh.triangles().len())
    });
}

fn bench_critical_search(c: &mut Criterion, pools: &Pools) {
    let field = builtin_field("double_well", 3).unwrap();
    let box_ = BoundingBox::centered_cube(3, 2.5);
    pools.bench_pair(c, "critical_point_search_grid12", || {
        let survey = survey_critical_points(&field, &box_, 12).unwrap();
        survey.points.len()
    });
}

fn benches(c: &mut Criterion) {
    let pools = Pools::new();
    bench_region_integral(c, &pools);
    bench_nu_profile(c, &pools);
    bench_extract_level_set(c, &pools);
    bench_critical_search(c, &pools);
}

criterion_group!(benches_group, benches);
criterion_main!(benches_group);
