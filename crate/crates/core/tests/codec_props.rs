use bats_core::codec::*;
use bats_core::degree::DegreeDistribution;
use bats_core::matrix::row_reduce;
use bats_core::{Field, FieldMatrix, RandomStream};

struct Instance {
    field: Field,
    k: usize,
    t: usize,
    inputs: Vec<Vec<u8>>,
    batches: Vec<ReceivedBatch>,
}

/// Passes the batch through `h`: received packet `j` is `Σ_i h[i][j]·packet_i`.
fn receive(field: Field, batch: &Batch, h: &FieldMatrix) -> Vec<Packet> {
    (0..h.cols())
        .map(|j| {
            let m = batch.packets.len();
            let t = batch.packets[0].payload.len();
            let mut p = Packet { batch_id: batch.header.id, coding_vector: vec![0; m], payload: vec![0; t] };
            for (i, src) in batch.packets.iter().enumerate() {
                let c = h.get(i, j);
                field.axpy(&mut p.coding_vector, c, &src.coding_vector);
                field.axpy(&mut p.payload, c, &src.payload);
            }
            p
        })
        .collect()
}

fn random_instance(seed: u64) -> Instance {
    let mut s = RandomStream::new(seed, 0xC0DE);
    let field = Field::gf2();
    let k = 2 + s.below(29);
    let m = 1 + s.below(4);
    let t = 3;
    let dmax = k.min(8);
    let w: Vec<f64> = (0..dmax).map(|_| s.unit()).collect();
    let psi = DegreeDistribution::from_weights(w).unwrap();
    let code = BatchCode::new(field, k, m, seed, psi).unwrap();
    let inputs: Vec<Vec<u8>> = (0..k).map(|_| (0..t).map(|_| s.element(field)).collect()).collect();
    let n = 1 + s.below(k + 4);
    let mut batches = Vec::new();
    for id in 0..n as u32 {
        let batch = code.batch(id, &inputs).unwrap();
        let c = s.below(m + 1);
        let h = FieldMatrix::random(field, m, c, &mut s);
        let pk = receive(field, &batch, &h);
        batches.push(ReceivedBatch::from_packets(&code, t, id, &pk).unwrap());
    }
    Instance { field, k, t, inputs, batches }
}

/// Variables fixed by the global linear system (Gaussian-elimination oracle).
fn ge_determined(inst: &Instance) -> Vec<bool> {
    let k = inst.k;
    let mut rows = Vec::new();
    let mut n = 0;
    for b in &inst.batches {
        let gh = b.header.generator.mul(&b.h).unwrap();
        for col in 0..gh.cols() {
            let mut r = vec![0u8; k];
            for (i, &v) in b.header.contributors.iter().enumerate() {
                r[v as usize] = gh.get(i, col);
            }
            rows.extend(r);
            n += 1;
        }
    }
    let piv = row_reduce(inst.field, &mut rows, n, k, k);
    let mut det = vec![false; k];
    for (p, &c) in piv.iter().enumerate() {
        if rows[p * k..(p + 1) * k].iter().enumerate().all(|(j, &x)| (j == c) == (x != 0)) {
            det[c] = true;
        }
    }
    det
}

fn decoded_set(d: &Decoder) -> Vec<bool> {
    (0..d.num_vars()).map(|v| d.state(v) == VarState::Decoded).collect()
}

#[test]
fn bp_is_order_invariant_sound_and_within_elimination() {
    for seed in 0..200 {
        let inst = random_instance(seed);
        let mut sets = Vec::new();
        for sel in [Selection::LowestIndex, Selection::RandomCheck(seed), Selection::RandomEdge(seed ^ 0xff)] {
            let mut d = build_decoder(inst.field, inst.k, inst.t, &inst.batches, &[], sel).unwrap();
            // residual degree = initial degree − decoded neighbours, rows match
            loop {
                for c in 0..d.num_checks() {
                    let decoded = d.check_contributors(c).iter().filter(|&&v| d.state(v as usize) == VarState::Decoded).count();
                    assert_eq!(d.check_degree(c), d.check_contributors(c).len() - decoded);
                    assert_eq!(d.check_rows(c), d.check_degree(c));
                }
                if d.step().is_none() {
                    break;
                }
            }
            for v in 0..inst.k {
                if let Some(p) = d.payload(v) {
                    assert_eq!(p, &inst.inputs[v][..], "seed {seed} var {v}");
                }
            }
            sets.push(decoded_set(&d));
        }
        assert_eq!(sets[0], sets[1], "seed {seed}");
        assert_eq!(sets[0], sets[2], "seed {seed}");
        let ge = ge_determined(&inst);
        for v in 0..inst.k {
            assert!(!sets[0][v] || ge[v], "seed {seed}: BP decoded {v} beyond elimination");
        }
    }
}

#[test]
fn inactivation_matches_global_rank() {
    for seed in 1000..1200 {
        let inst = random_instance(seed);
        let ge = ge_determined(&inst);
        let mut d = build_decoder(inst.field, inst.k, inst.t, &inst.batches, &[], Selection::LowestIndex).unwrap();
        match inactivation_decode(&mut d) {
            Ok(_) => {
                assert!(ge.iter().all(|&x| x), "seed {seed}");
                for v in 0..inst.k {
                    assert_eq!(d.payload(v).unwrap(), &inst.inputs[v][..]);
                }
            }
            Err(f) => {
                assert!(!ge.iter().all(|&x| x), "seed {seed}");
                assert!(f.deficit > 0);
            }
        }
    }
}

#[test]
fn rank_deficient_check_never_fires() {
    let f = Field::gf256();
    let mut d = Decoder::new(f, 4, 1, Selection::LowestIndex);
    // two contributors but rank one
    let gh = FieldMatrix::from_rows(f, &[&[1, 2], &[2, 4]]).unwrap();
    d.add_check(vec![0, 1], gh, FieldMatrix::zeros(f, 1, 2)).unwrap();
    assert!(!d.is_decodable(0));
    assert_eq!(bp_decode(&mut d), 0);
}

#[test]
fn crafted_stall_resolved_by_inactivation() {
    // b0+b1, b1+b2, b2+b3, b0+b1+b2+b3·2: no check of degree ≤ its rank,
    // yet the 4×4 system is invertible over GF(256)
    let f = Field::gf256();
    let inputs: [[u8; 2]; 4] = [[1, 2], [3, 4], [5, 6], [7, 8]];
    let mut d = Decoder::new(f, 4, 2, Selection::LowestIndex);
    let eqs: [(&[u32], &[u8]); 4] = [(&[0, 1], &[1, 1]), (&[1, 2], &[1, 1]), (&[2, 3], &[1, 1]), (&[0, 1, 2, 3], &[1, 1, 1, 2])];
    for (vars, coeffs) in eqs {
        let gh = FieldMatrix::from_vec(f, vars.len(), 1, coeffs.to_vec()).unwrap();
        let mut y = FieldMatrix::zeros(f, 2, 1);
        for (&v, &c) in vars.iter().zip(coeffs) {
            for i in 0..2 {
                y.set(i, 0, f.add(y.get(i, 0), f.mul(c, inputs[v as usize][i])));
            }
        }
        d.add_check(vars.to_vec(), gh, y).unwrap();
    }
    assert_eq!(bp_decode(&mut d), 0);
    let n = inactivation_decode(&mut d).unwrap();
    assert!(n >= 1);
    for v in 0..4 {
        assert_eq!(d.payload(v).unwrap(), &inputs[v]);
    }
}

#[test]
fn plain_bp_success_needs_no_inactivation() {
    let f = Field::gf256();
    let k = 50;
    let psi = DegreeDistribution::from_weights(vec![0.3, 0.4, 0.3]).unwrap();
    let mut complete = 0;
    for seed in 0..40 {
        let code = BatchCode::new(f, k, 4, seed, psi.clone()).unwrap();
        let mut s = RandomStream::new(seed, 5);
        let inputs: Vec<Vec<u8>> = (0..k).map(|_| (0..4).map(|_| s.element(f)).collect()).collect();
        let batches: Vec<ReceivedBatch> = (0..150)
            .map(|id| {
                let b = code.batch(id, &inputs).unwrap();
                ReceivedBatch::from_packets(&code, 4, id, &b.packets).unwrap()
            })
            .collect();
        let mut d = build_decoder(f, k, 4, &batches, &[], Selection::LowestIndex).unwrap();
        if bp_decode(&mut d) < k {
            continue;
        }
        complete += 1;
        let mut d = build_decoder(f, k, 4, &batches, &[], Selection::LowestIndex).unwrap();
        assert_eq!(inactivation_decode(&mut d).unwrap(), 0);
        assert_eq!(d.inactive_count(), 0);
    }
    assert!(complete > 0);
}

#[test]
fn batch_generation() {
    let f = Field::gf256();
    let psi = DegreeDistribution::from_weights(vec![0.1, 0.0, 0.5, 0.2, 0.2]).unwrap();
    let code = BatchCode::new(f, 200, 4, 42, psi.clone()).unwrap();
    assert_eq!(code.header(17), code.header(17));
    assert_ne!(code.header(17), code.header(18));
    let inputs: Vec<Vec<u8>> = (0..200).map(|i| vec![i as u8; 3]).collect();
    let b = code.batch(3, &inputs).unwrap();
    assert_eq!(b, generate_batch(3, 42, &psi, &inputs, 4, f).unwrap());
    for (j, p) in b.packets.iter().enumerate() {
        assert_eq!(p.coding_vector.iter().filter(|&&x| x != 0).count(), 1);
        assert_eq!(p.coding_vector[j], 1);
    }
    let c = &b.header.contributors;
    assert!(c.windows(2).all(|w| w[0] < w[1]) && c.iter().all(|&v| v < 200));

    let fixed = BatchCode::new(f, 200, 4, 1, DegreeDistribution::point_mass(3, 9).unwrap()).unwrap();
    assert!((0..500).all(|id| fixed.header(id).degree() == 3));

    let n = 100_000u32;
    let mut hist = [0f64; 6];
    for id in 0..n {
        hist[code.header(id).degree()] += 1.0 / n as f64;
    }
    let tv: f64 = 0.5 * (1..=5).map(|d| (hist[d] - psi.get(d)).abs()).sum::<f64>();
    assert!(tv < 0.01, "{tv}");
}

#[test]
fn precode_arithmetic_and_identity() {
    let f = Field::gf256();
    let spec = PrecodeSpec::default();
    assert_eq!(spec.intermediate_count(980), 1000);
    let inputs: Vec<Vec<u8>> = (0..10).map(|i| vec![i; 2]).collect();
    assert_eq!(precode_encode(f, &inputs, &PrecodeSpec::none()).unwrap(), inputs);
    let known: Vec<Option<Vec<u8>>> = inputs.iter().cloned().map(Some).collect();
    assert_eq!(precode_complete(f, &known, 10, &PrecodeSpec::none()).unwrap().unwrap(), inputs);
    let mut missing = known.clone();
    missing[4] = None;
    assert!(precode_complete(f, &missing, 10, &PrecodeSpec::none()).unwrap().is_none());
}

fn erase_and_complete(trials: u64, erasures: usize) -> usize {
    let f = Field::gf256();
    let mut ok = 0;
    for trial in 0..trials {
        let spec = PrecodeSpec { seed: trial, ..PrecodeSpec::default() };
        let mut s = RandomStream::new(trial, 77);
        let inputs: Vec<Vec<u8>> = (0..980).map(|_| (0..4).map(|_| s.element(f)).collect()).collect();
        let inter = precode_encode(f, &inputs, &spec).unwrap();
        assert_eq!(inter.len(), 1000);
        let mut known: Vec<Option<Vec<u8>>> = inter.into_iter().map(Some).collect();
        for i in s.subset(1000, erasures) {
            known[i as usize] = None;
        }
        if precode_complete(f, &known, 980, &spec).unwrap().as_deref() == Some(&inputs[..]) {
            ok += 1;
        }
    }
    ok
}

#[test]
fn precode_recovers_erasures() {
    // (1 − rate)·K/2 = 10 erasures
    assert!(erase_and_complete(100, 10) >= 99);
    // 99% of the intermediate packets known
    assert!(erase_and_complete(100, 10) >= 95);
    let f = Field::gf256();
    let spec = PrecodeSpec::default();
    let inputs: Vec<Vec<u8>> = (0..980).map(|i| vec![(i % 251) as u8]).collect();
    let inter = precode_encode(f, &inputs, &spec).unwrap();
    let all: Vec<Option<Vec<u8>>> = inter.into_iter().map(Some).collect();
    assert_eq!(precode_complete(f, &all, 980, &spec).unwrap().unwrap(), inputs);
}

#[test]
fn shortest_prefix_with_precode() {
    let f = Field::gf256();
    let spec = PrecodeSpec { seed: 9, ..PrecodeSpec::default() };
    let k_prime = 200;
    let k = spec.intermediate_count(k_prime);
    let mut s = RandomStream::new(3, 3);
    let inputs: Vec<Vec<u8>> = (0..k_prime).map(|_| (0..2).map(|_| s.element(f)).collect()).collect();
    let inter = precode_encode(f, &inputs, &spec).unwrap();
    let psi = DegreeDistribution::from_weights(vec![0.05, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.15]).unwrap();
    let code = BatchCode::new(f, k, 4, 11, psi).unwrap();
    let batches: Vec<ReceivedBatch> = (0..200)
        .map(|id| {
            let b = code.batch(id, &inter).unwrap();
            let h = FieldMatrix::random(f, 4, 3, &mut s);
            ReceivedBatch::from_packets(&code, 2, id, &receive(f, &b, &h)).unwrap()
        })
        .collect();
    let checks = spec.checks(f, k_prime);
    let out = decode_shortest_prefix(f, k, k_prime, 2, &batches, &checks).unwrap().unwrap();
    for v in 0..k_prime {
        assert_eq!(out.decoder.payload(v).unwrap(), &inputs[v][..]);
    }
    assert!(out.report.coding_overhead >= 0);
    assert_eq!(out.report.received_columns(), out.packets);
    // one packet fewer does not decode
    let shorter = prefix(&batches, out.packets - 1);
    let mut d = build_decoder(f, k, 2, &shorter, &checks, Selection::LowestIndex).unwrap();
    assert!(inactivation_decode(&mut d).is_err());
}
