use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use freelie::assoc::phi;
use freelie::density::{density_check, Mode};
use freelie::endo::degree_five_identity;
use freelie::lie::basis_table;
use freelie::obstruct::{certify, v_kappa, Algebra};
use freelie::quotient::QuotientContext;
use freelie::ratlin::{RowSpace, SparseVec};
use freelie::schur::{lr_tensor, Partition};
use freelie::Rat;

fn rref(c: &mut Criterion) {
    // Deterministic dense-ish 60x60 system with small entries.
    let rows: Vec<SparseVec> = (0..60)
        .map(|i| SparseVec::from_pairs(60, (0..60).filter(|j| (i * 7 + j * 3) % 5 != 0).map(|j| (j, Rat::from_int(((i * j) % 11) as i64 - 5)))))
        .collect();
    c.bench_function("rref_60x60", |b| {
        b.iter(|| {
            let mut s = RowSpace::new(60);
            for r in &rows {
                s.rref_insert(r).unwrap();
            }
            black_box(s.rank())
        })
    });
}

fn lie(c: &mut Criterion) {
    // Both are memoized, so these measure the warm lookup path.
    c.bench_function("hall_basis_n4_d7", |b| b.iter(|| black_box(basis_table(4, 7).len())));
    c.bench_function("r_n_context_n4_d6", |b| b.iter(|| black_box(QuotientContext::r_n(4, 6).unwrap().dim(6).unwrap())));
}

fn representation(c: &mut Criterion) {
    let w = v_kappa(4, 3).unwrap().expand().partial(1).unwrap();
    c.bench_function("phi_of_derivative", |b| b.iter(|| black_box(phi(&w).unwrap())));
    c.bench_function("certify_det_kappa4", |b| b.iter(|| black_box(certify(Algebra::Cn, 4).unwrap())));
}

fn identities(c: &mut Criterion) {
    let id = degree_five_identity(4);
    c.bench_function("degree_five_identity", |b| b.iter(|| black_box(id.verify().unwrap().holds)));
    c.bench_function("density_n4_k4", |b| b.iter(|| black_box(density_check(4, 4, Mode::Both).unwrap().closure_dim)));
}

fn schur(c: &mut Criterion) {
    let (l, m) = (Partition::new(vec![4, 2, 1]).unwrap(), Partition::new(vec![3, 2, 1]).unwrap());
    c.bench_function("lr_421_321", |b| b.iter(|| black_box(lr_tensor(&l, &m, 6).dim(6))));
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(10).warm_up_time(Duration::from_millis(500)).measurement_time(Duration::from_secs(3));
    targets = rref, lie, representation, identities, schur
}
criterion_main!(kernels);
