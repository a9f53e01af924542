//! Independent reference computations and property checks shared by the
//! integration, property and acceptance tests.
#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use lapdiff::estimator::{
    exact_delta, penalized_objective, solve_dtrace, AdmmSolver, AdmmState, SolverConfig,
};
use lapdiff::experiment::{run_sweep_with, BaseSpec, Estimator, Execution, ExperimentConfig, SampleAxis};
use lapdiff::io::{format_sig9, read_matrix_csv, write_matrix_csv};
use lapdiff::linalg::{eig_sym, inv_sqrt_pd, soft_threshold, solve_g, sqrt_psd, unvec, vec};
use lapdiff::matpower::{case_laplacian, parse_case, BranchRecord, BusRecord, BusType, PowerCase, WeightMode};
use lapdiff::network::{
    assemble_scenario, grid_delta, lattice_edges, laplacian_from_graph, random_base_matrix, random_pd_matrix,
    reduce_ground_node, ReductionMode, SignMode, WeightRange, WeightedGraph,
};
use lapdiff::rng::rng_from_seed;
use lapdiff::sampling::{population_covariance, psi_from_covariance, psi_hat, sample_covariance, sample_potentials, PotentialSamples};
use lapdiff::SymmetricMatrix;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

pub fn frob(a: &DMatrix<f64>) -> f64 {
    a.norm()
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Random symmetric PD matrix with eigenvalues spread over `[1, condition]`
/// times `scale`.
pub fn pd(p: usize, condition: f64, scale: f64, seed: u64) -> SymmetricMatrix {
    random_pd_matrix(p, condition, seed).unwrap().scale(scale)
}

pub fn random_dense(p: usize, q: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    DMatrix::from_fn(p, q, |_, _| rng.random_range(-1.0..1.0))
}

// ------------------------------------------------------------ oracles

/// `(A ⊗ B)` for column-stacked vectors, written as an explicit loop:
/// entry `(i + p·j, k + p·l)` of `½(Ψ₂ᵀ⊗Ψ₁ + Ψ₁ᵀ⊗Ψ₂)` is
/// `½(Ψ₂[l,j]·Ψ₁[i,k] + Ψ₁[l,j]·Ψ₂[i,k])`.
pub fn hessian_by_loops(psi1: &DMatrix<f64>, psi2: &DMatrix<f64>) -> DMatrix<f64> {
    let p = psi1.nrows();
    let mut h = DMatrix::zeros(p * p, p * p);
    for j in 0..p {
        for i in 0..p {
            for l in 0..p {
                for k in 0..p {
                    h[(i + p * j, k + p * l)] = 0.5 * (psi2[(l, j)] * psi1[(i, k)] + psi1[(l, j)] * psi2[(i, k)]);
                }
            }
        }
    }
    h
}

/// Unpenalised minimiser: solves `½(Ψ₁ΔΨ₂ + Ψ₂ΔΨ₁) = Ψ₁ − Ψ₂` as a dense
/// `p² × p²` system.
pub fn kronecker_stationary(psi1: &DMatrix<f64>, psi2: &DMatrix<f64>) -> DMatrix<f64> {
    let p = psi1.nrows();
    let h = hessian_by_loops(psi1, psi2);
    let rhs = vec(&(psi1 - psi2));
    let z = h.lu().solve(&rhs).expect("nonsingular Kronecker system");
    DMatrix::from_column_slice(p, p, z.as_slice())
}

/// Number of eigenvalues of the explicitly assembled Hessian at or below
/// `tol · λ_max`.
pub fn kronecker_kernel_count(psi1: &DMatrix<f64>, psi2: &DMatrix<f64>, tol: f64) -> usize {
    let h = hessian_by_loops(psi1, psi2);
    let values = h.symmetric_eigenvalues();
    let top = values.iter().fold(0.0f64, |m, v| m.max(*v));
    values.iter().filter(|v| **v <= tol * top).count()
}

fn loss_and_grad(delta: &DMatrix<f64>, psi1: &DMatrix<f64>, psi2: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let a = psi1 * delta * psi2;
    let b = psi2 * delta * psi1;
    let target = psi1 - psi2;
    let quad = 0.25 * (delta.dot(&a) + delta.dot(&b));
    let loss = quad - delta.dot(&target);
    let grad = (a + b) * 0.5 - target;
    (loss, grad)
}

fn off_l1(a: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if i != j {
                s += a[(i, j)].abs();
            }
        }
    }
    s
}

fn prox(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
        let v = a[(i, j)];
        if i == j {
            v
        } else {
            v.signum() * (v.abs() - t).max(0.0)
        }
    })
}

/// Accelerated proximal gradient with adaptive restart, run until two
/// successive objective values agree to `gap` and the iterate has stopped
/// moving, or until a momentum-free step stops descending.
pub fn proximal_gradient(psi1: &DMatrix<f64>, psi2: &DMatrix<f64>, lambda: f64, gap: f64) -> DMatrix<f64> {
    let p = psi1.nrows();
    let l1 = psi1.symmetric_eigenvalues().max();
    let l2 = psi2.symmetric_eigenvalues().max();
    let step = 1.0 / (l1 * l2);
    let objective = |d: &DMatrix<f64>| loss_and_grad(d, psi1, psi2).0 + lambda * off_l1(d);

    let mut x = DMatrix::zeros(p, p);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut f_prev = objective(&x);
    for _ in 0..2_000_000 {
        let (_, g) = loss_and_grad(&y, psi1, psi2);
        let x_next = prox(&(&y - g * step), lambda * step);
        let f_next = objective(&x_next);
        if f_next > f_prev {
            if t == 1.0 {
                // a plain step from x no longer descends
                break;
            }
            // restart momentum
            y = x.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &x_next + (&x_next - &x) * ((t - 1.0) / t_next);
        let moved = max_abs(&(&x_next - &x));
        x = x_next;
        t = t_next;
        if (f_prev - f_next).abs() <= gap && moved <= 1e-12 {
            break;
        }
        f_prev = f_next;
    }
    x
}

// ------------------------------------------------------------ checks: linalg

pub fn check_sqrt_roundtrip(p: usize, log_cond: f64, seed: u64) -> Check {
    let c = pd(p, 10f64.powf(log_cond), 1.0, seed);
    let r = sqrt_psd(&c).map_err(|e| e.to_string())?;
    let back = r.as_matrix() * r.as_matrix();
    let rel = frob(&(back - c.as_matrix())) / frob(c.as_matrix());
    ensure!(rel <= 1e-8, "sqrt² relative error {rel:e} (p={p}, cond=1e{log_cond:.1})");
    Ok(())
}

pub fn check_inv_sqrt(p: usize, log_cond: f64, seed: u64) -> Check {
    let c = pd(p, 10f64.powf(log_cond), 1.0, seed);
    let r = sqrt_psd(&c).map_err(|e| e.to_string())?;
    let ri = inv_sqrt_pd(&c).map_err(|e| e.to_string())?;
    let err = max_abs(&(ri.as_matrix() * r.as_matrix() - DMatrix::identity(p, p)));
    ensure!(err <= 1e-7, "inv_sqrt·sqrt deviates from I by {err:e}");
    Ok(())
}

pub fn check_solve_g(p: usize, seed: u64) -> Check {
    let mut rng = rng_from_seed(seed);
    let cond_p = 10f64.powf(rng.random_range(0.0..3.0));
    let cond_q = 10f64.powf(rng.random_range(0.0..3.0));
    let pm = pd(p, cond_p, rng.random_range(0.1..5.0), seed ^ 1);
    let qm = pd(p, cond_q, rng.random_range(0.1..5.0), seed ^ 2);
    let r = random_dense(p, p, seed ^ 3) * rng.random_range(0.1..10.0);
    let gamma = 10f64.powf(rng.random_range(-3.0..1.0));
    let x = solve_g(&pm, &qm, &r, gamma).map_err(|e| e.to_string())?;
    let resid = frob(&(pm.as_matrix() * &x * qm.as_matrix() + &x * gamma - &r));
    let bound = 1e-9 * frob(&r).max(1.0);
    ensure!(resid <= bound, "G residual {resid:e} > {bound:e} (p={p}, γ={gamma:e})");
    Ok(())
}

pub fn check_shrink_contraction(p: usize, lambda: f64, seed: u64) -> Check {
    let a = random_dense(p, p, seed) * 3.0;
    for off_only in [false, true] {
        let s = soft_threshold(&a, lambda, off_only).map_err(|e| e.to_string())?;
        for (x, y) in s.iter().zip(a.iter()) {
            ensure!(x.abs() <= y.abs(), "|S(a)| = {} > |a| = {}", x.abs(), y.abs());
            ensure!(*x == 0.0 || x.signum() == y.signum(), "shrink flipped a sign");
        }
    }
    Ok(())
}

pub fn check_vec_roundtrip(rows: usize, cols: usize, seed: u64) -> Check {
    let a = random_dense(rows, cols, seed) * 1e3;
    let back = unvec(vec(&a).as_slice(), rows, cols).map_err(|e| e.to_string())?;
    ensure!(
        back.iter().zip(a.iter()).all(|(x, y)| x.to_bits() == y.to_bits()),
        "unvec(vec(a)) differs from a"
    );
    Ok(())
}

// ------------------------------------------------------------ checks: network

fn random_connected_graph(nodes: usize, extra: usize, seed: u64) -> WeightedGraph {
    let mut rng = rng_from_seed(seed);
    let mut edges = Vec::new();
    for v in 1..nodes {
        let u = rng.random_range(0..v);
        edges.push((u, v, rng.random_range(0.1..5.0)));
    }
    for _ in 0..extra {
        let a = rng.random_range(0..nodes);
        let b = rng.random_range(0..nodes);
        if a != b {
            edges.push((a, b, rng.random_range(0.0..5.0)));
        }
    }
    WeightedGraph::new(nodes, edges).unwrap()
}

pub fn check_laplacian(nodes: usize, extra: usize, seed: u64) -> Check {
    let l = laplacian_from_graph(&random_connected_graph(nodes, extra, seed));
    for row in l.row_iter() {
        ensure!(row.sum().abs() <= 1e-12 * row.amax().max(1.0), "row sum {}", row.sum());
    }
    let min = eig_sym(&l).map_err(|e| e.to_string())?.min_value();
    ensure!(min >= -1e-10 * l.amax().max(1.0), "Laplacian eigenvalue {min:e}");
    let ground = (seed as usize) % nodes;
    let reduced = reduce_ground_node(&l, ground, ReductionMode::Delete).map_err(|e| e.to_string())?;
    let min = eig_sym(&reduced).map_err(|e| e.to_string())?.min_value();
    ensure!(min > 0.0, "reduced Laplacian not PD: {min:e}");
    Ok(())
}

pub fn check_grid_support(k: usize, seed: u64) -> Check {
    let p = k * k;
    let d = grid_delta(p, WeightRange::new(0.2, 1.0).unwrap(), SignMode::Mixed, seed).map_err(|e| e.to_string())?;
    let mut adj = DMatrix::from_element(p, p, false);
    for (i, j) in lattice_edges(k, k) {
        adj[(i, j)] = true;
        adj[(j, i)] = true;
    }
    for i in 0..p {
        for j in 0..p {
            if i != j {
                ensure!((d[(i, j)] != 0.0) == adj[(i, j)], "support mismatch at ({i},{j})");
            }
        }
    }
    Ok(())
}

pub fn check_scenario(k: usize, density: f64, margin: f64, seed: u64) -> Check {
    let p = k * k;
    let b1 = random_base_matrix(p, density, margin, seed).unwrap();
    let delta = grid_delta(p, WeightRange::default(), SignMode::Mixed, seed ^ 9).unwrap();
    let sigma = pd(p, 10.0, 1.0, seed ^ 5);
    match assemble_scenario(b1.clone(), delta.clone(), sigma.clone(), sigma, seed) {
        Ok(s) => {
            ensure!(
                s.b2().as_matrix() == &(b1.as_matrix() + delta.as_matrix()),
                "b2 != b1 + delta"
            );
            for b in [s.b1(), s.b2()] {
                let eig = eig_sym(b).unwrap();
                let smallest = eig.values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
                ensure!(smallest >= 1e-6, "scenario with |eigenvalue| {smallest:e}");
            }
            Ok(())
        }
        Err(lapdiff::Error::NearSingularScenario { .. }) => Ok(()),
        Err(e) => Err(e.to_string()),
    }
}

// ------------------------------------------------------------ checks: sampling

pub fn check_psi_psd(p: usize, n: usize, seed: u64) -> Check {
    let b = pd(p, 20.0, 1.0, seed);
    let sigma = pd(p, 5.0, 1.0, seed ^ 7);
    let samples = sample_potentials(&b, &sigma, n, seed ^ 11).map_err(|e| e.to_string())?;
    let psi = psi_hat(&samples, &sigma).map_err(|e| e.to_string())?.psi;
    let eig = eig_sym(&psi).unwrap();
    let floor = -1e-9 * eig.max_value().abs().max(1.0);
    ensure!(eig.min_value() >= floor, "Ψ̂ eigenvalue {:e} (n={n}, p={p})", eig.min_value());
    Ok(())
}

pub fn check_population_psi(p: usize, seed: u64) -> Check {
    let b = pd(p, 20.0, 1.0, seed);
    let id = SymmetricMatrix::identity(p);
    let cov = population_covariance(&b, &id).map_err(|e| e.to_string())?;
    let psi = psi_from_covariance(&cov, &id, 0).map_err(|e| e.to_string())?.psi;
    let b_inv = b.as_matrix().clone().try_inverse().unwrap();
    let rel = frob(&(psi.as_matrix() - &b_inv)) / frob(&b_inv);
    ensure!(rel <= 1e-8, "Ψ from population covariance vs B⁻¹: {rel:e}");
    Ok(())
}

pub fn check_covariance_scaling(n: usize, p: usize, exponent: i32, seed: u64) -> Check {
    let c = 2f64.powi(exponent);
    let y = random_dense(n, p, seed);
    let a = sample_covariance(&PotentialSamples::new(y.clone()).unwrap(), false).unwrap();
    let b = sample_covariance(&PotentialSamples::new(y * c).unwrap(), false).unwrap();
    ensure!(b.as_matrix() == &(a.as_matrix() * (c * c)), "cov(cY) != c²cov(Y) for c = {c}");
    Ok(())
}

// ------------------------------------------------------------ checks: estimator

fn psi_pair(p: usize, seed: u64) -> (SymmetricMatrix, SymmetricMatrix) {
    (pd(p, 8.0, 1.0, seed), pd(p, 8.0, 1.0, seed ^ 0xABCD))
}

pub fn check_converged_feasible(p: usize, lambda: f64, seed: u64) -> Check {
    let (a, b) = psi_pair(p, seed);
    let cfg = SolverConfig {
        lambda,
        rho: 0.2,
        ..Default::default()
    };
    let mut solver = AdmmSolver::new(&a, &b, &cfg).map_err(|e| e.to_string())?;
    let (est, state) = solver.solve_from(AdmmState::zeros(p)).map_err(|e| e.to_string())?;
    if est.converged {
        ensure!(
            state.consensus_residual() <= cfg.tol_consensus,
            "converged with consensus residual {:e}",
            state.consensus_residual()
        );
    }
    let zero = penalized_objective(&DMatrix::zeros(p, p), &a, &b, lambda, false).unwrap();
    ensure!(est.objective <= zero + 1e-8, "objective {} worse than zero matrix {}", est.objective, zero);
    Ok(())
}

pub fn check_lambda_monotone(p: usize, seed: u64) -> Check {
    let (a, b) = psi_pair(p, seed);
    let top = max_abs(&(a.as_matrix() - b.as_matrix()));
    let mut last = usize::MAX;
    for k in 0..10 {
        let lambda = top * k as f64 / 9.0;
        let cfg = SolverConfig {
            lambda,
            rho: 0.2,
            tol_consensus: 1e-10,
            max_iter: 200_000,
            ..Default::default()
        };
        let est = solve_dtrace(&a, &b, &cfg).map_err(|e| e.to_string())?;
        let count = (0..p)
            .flat_map(|i| (0..p).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && est.delta[(i, j)].abs() > 1e-8)
            .count();
        ensure!(count <= last, "nonzeros rose from {last} to {count} at λ = {lambda:e}");
        last = count;
    }
    Ok(())
}

pub fn check_sign_flip(p: usize, lambda: f64, seed: u64) -> Check {
    let (a, b) = psi_pair(p, seed);
    let cfg = SolverConfig {
        lambda,
        rho: 0.2,
        tol_consensus: 1e-9,
        max_iter: 200_000,
        ..Default::default()
    };
    let fwd = solve_dtrace(&a, &b, &cfg).map_err(|e| e.to_string())?;
    let rev = solve_dtrace(&b, &a, &cfg).map_err(|e| e.to_string())?;
    let err = max_abs(&(fwd.delta.as_matrix() + rev.delta.as_matrix()));
    ensure!(err <= 1e-6, "swapping inputs did not negate the estimate: {err:e}");
    Ok(())
}

pub fn check_exact_delta(p: usize, seed: u64) -> Check {
    let mut rng = rng_from_seed(seed);
    let b1 = pd(p, 10f64.powf(rng.random_range(0.0..2.0)), rng.random_range(0.5..3.0), seed ^ 1);
    let b2 = pd(p, 10f64.powf(rng.random_range(0.0..2.0)), rng.random_range(0.5..3.0), seed ^ 2);
    let s1 = pd(p, 10f64.powf(rng.random_range(0.0..2.0)), 1.0, seed ^ 3);
    let s2 = pd(p, 10f64.powf(rng.random_range(0.0..2.0)), 1.0, seed ^ 4);
    let got = exact_delta(&b1, &b2, &s1, &s2).map_err(|e| e.to_string())?;
    let want = b2.as_matrix() - b1.as_matrix();
    let rel = frob(&(got.as_matrix() - &want)) / frob(&want);
    ensure!(rel <= 1e-8, "exact_delta relative error {rel:e} (p={p})");
    Ok(())
}

/// ADMM against the dense Kronecker solve (λ = 0) or proximal gradient.
pub fn check_admm_oracle(p: usize, lambda: f64, seed: u64) -> Check {
    let (a, b) = psi_pair(p, seed);
    let cfg = SolverConfig {
        lambda,
        rho: 0.5,
        tol_consensus: 1e-10,
        max_iter: 500_000,
        ..Default::default()
    };
    let est = solve_dtrace(&a, &b, &cfg).map_err(|e| e.to_string())?;
    ensure!(est.converged, "ADMM did not converge");
    let reference = if lambda == 0.0 {
        kronecker_stationary(a.as_matrix(), b.as_matrix())
    } else {
        proximal_gradient(a.as_matrix(), b.as_matrix(), lambda, 1e-10)
    };
    let err = max_abs(&(est.delta.as_matrix() - &reference));
    ensure!(err <= 1e-4, "ADMM vs reference: {err:e} (λ = {lambda})");
    Ok(())
}

// ------------------------------------------------------------ checks: matpower

pub fn random_case(buses: usize, extra: usize, seed: u64) -> PowerCase {
    let mut rng = rng_from_seed(seed);
    // scattered, shuffled ids
    let mut ids: Vec<i64> = (0..buses as i64).map(|i| 3 * i + 1 + (i % 2)).collect();
    for i in (1..ids.len()).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    let slack = rng.random_range(0..buses);
    let bus_records = ids
        .iter()
        .enumerate()
        .map(|(k, &id)| BusRecord {
            id,
            bus_type: if k == slack {
                BusType::Slack
            } else if rng.random_bool(0.3) {
                BusType::Pv
            } else {
                BusType::Pq
            },
        })
        .collect();
    let mut branches = Vec::new();
    let mut push = |rng: &mut rand_chacha::ChaCha8Rng, a: usize, b: usize, in_service: bool| {
        branches.push(BranchRecord {
            from: ids[a],
            to: ids[b],
            r: (rng.random_range(0.0..0.1f64) * 1e4).round() / 1e4,
            x: rng.random_range(0.01..0.5),
            in_service,
        });
    };
    for v in 1..buses {
        let u = rng.random_range(0..v);
        push(&mut rng, u, v, true);
    }
    for _ in 0..extra {
        let a = rng.random_range(0..buses);
        let b = rng.random_range(0..buses);
        if a != b {
            let on = rng.random_bool(0.7);
            push(&mut rng, a, b, on);
        }
    }
    PowerCase {
        name: format!("case{seed}"),
        buses: bus_records,
        branches,
    }
}

pub fn check_case_roundtrip(buses: usize, extra: usize, seed: u64) -> Check {
    let case = random_case(buses, extra, seed);
    let back = parse_case(&case.to_case_text()).map_err(|e| e.to_string())?;
    ensure!(back == case, "parse(serialize(case)) != case");
    Ok(())
}

pub fn check_case_laplacian(buses: usize, extra: usize, seed: u64) -> Check {
    let case = random_case(buses, extra, seed);
    for mode in [WeightMode::Dc, WeightMode::MagnitudeY] {
        let lap = case_laplacian(&case, mode, None).map_err(|e| e.to_string())?;
        let l = lap.laplacian.as_matrix();
        for row in l.row_iter() {
            ensure!(row.sum().abs() <= 1e-10 * row.amax().max(1.0), "row sum {}", row.sum());
        }
        let min = eig_sym(&lap.laplacian).unwrap().min_value();
        ensure!(min >= -1e-10 * l.amax().max(1.0), "min eigenvalue {min:e}");
        ensure!(lap.bus_ids.windows(2).all(|w| w[0] < w[1]), "bus ids not ascending");

        // dropping every out-of-service branch changes nothing
        let mut on_only = case.clone();
        on_only.branches.retain(|b| b.in_service);
        let again = case_laplacian(&on_only, mode, None).map_err(|e| e.to_string())?;
        ensure!(again.laplacian.as_matrix() == l, "out-of-service branch contributed weight");
    }
    Ok(())
}

// ------------------------------------------------------------ checks: io, experiment

pub fn check_csv_roundtrip(values: &[f64], cols: usize) -> Check {
    let rows = values.len() / cols;
    let m = DMatrix::from_row_slice(rows, cols, &values[..rows * cols]);
    let mut buf = Vec::new();
    write_matrix_csv(&mut buf, &m).map_err(|e| e.to_string())?;
    let back = read_matrix_csv(buf.as_slice()).map_err(|e| e.to_string())?;
    for (x, y) in back.iter().zip(m.iter()) {
        ensure!(format_sig9(*x) == format_sig9(*y), "{x} printed differently from {y}");
        ensure!((x - y).abs() <= 5e-9 * y.abs(), "{x} too far from {y}");
    }
    let mut again = Vec::new();
    write_matrix_csv(&mut again, &back).unwrap();
    ensure!(again == buf, "second write differs");
    Ok(())
}

pub fn tiny_sweep(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        dims: vec![9, 16],
        samples: SampleAxis::Ratios(vec![0.3, 2.0]),
        instances: 2,
        lambda_scale: 0.8,
        base: BaseSpec::Random {
            density: 0.1,
            margin: 0.7,
        },
        solver: SolverConfig {
            rho: 0.05,
            max_iter: 2000,
            tol_consensus: 1e-5,
            ..Default::default()
        },
        estimators: vec![Estimator::Dtrace, Estimator::Plugin, Estimator::Sqrt],
        seed,
        ..Default::default()
    }
}

pub fn check_sweep_determinism(seed: u64) -> Check {
    let cfg = tiny_sweep(seed);
    let a = run_sweep_with(&cfg, Execution::Sequential, None).map_err(|e| e.to_string())?;
    let b = run_sweep_with(&cfg, Execution::Sequential, None).map_err(|e| e.to_string())?;
    let c = run_sweep_with(&cfg, Execution::Parallel, None).map_err(|e| e.to_string())?;
    let (a, b, c) = (a.to_csv_string(), b.to_csv_string(), c.to_csv_string());
    ensure!(a == b, "repeated sweep produced different CSV bytes");
    ensure!(a == c, "parallel sweep produced different CSV bytes");
    ensure!(a.lines().count() == 1 + 2 * 2 * 2 * 3, "unexpected row count");
    Ok(())
}

/// Convenience for DVector-heavy oracles.
pub fn dvec(values: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(values)
}
