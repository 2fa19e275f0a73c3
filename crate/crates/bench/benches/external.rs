use criterion::{criterion_group, criterion_main, Criterion};

use prismdg_core::external2d::{subcycle_serial, External2D};
use prismdg_core::internal3d::Model;
use prismdg_core::partition::SerialExchange;
use prismdg_core::scenario::{build, default_scenario, BasinConfig, ScenarioKind};

fn external_mode(c: &mut Criterion) {
    let s = default_scenario(ScenarioKind::LakeAtRest).unwrap();
    let ctx = External2D::new(&s.mesh, &s.params, &s.forcing);
    let dt2d = s.stable_dt(1, 0.1);
    c.bench_function("external_subcycle_8x8_m20", |b| {
        b.iter(|| subcycle_serial(&ctx, &s.init.eta, &s.init.q2d, None, 0.0, 20, dt2d).unwrap())
    });
}

fn coupled_step(c: &mut Criterion) {
    let kind = ScenarioKind::LockExchange;
    let basin = BasinConfig { nx: 8, ny: 8, lx: 8000.0, ly: 8000.0, ..kind.default_basin() };
    let s = build(kind, &basin, kind.default_params()).unwrap();
    let model = Model::new(&s.mesh, &s.params, &s.forcing, s.default_config(), &s.init.grid).unwrap();
    c.bench_function("coupled_step_lock_exchange_8x8x5", |b| {
        b.iter(|| {
            let mut st = s.init.clone();
            let mut ex = SerialExchange::new(s.mesh.num_triangles());
            model.step(&mut st, &mut ex).unwrap()
        })
    });
}

criterion_group!(benches, external_mode, coupled_step);
criterion_main!(benches);
