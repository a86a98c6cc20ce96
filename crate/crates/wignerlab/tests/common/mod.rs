//! Shared generators for the property and acceptance suites.

use wignerlab::measure::MeasurementSpec;
use wignerlab::qcore::{
    OrthonormalBasis, SpaceLayout, StateVector, SubspaceDecomposition,
};
use wignerlab::random::{random_basis, random_state, rng, unit_f64};
use wignerlab::scenario::{RegisterDecl, Scenario, SpecDecl, Step};

use rand_chacha::ChaCha12Rng;

pub fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!((got - want).abs() <= tol, "{what}: got {got}, want {want} (tol {tol})");
}

/// A random complete basis split into 2-3 labeled blocks.
pub fn random_decomposition(
    layout: &SpaceLayout,
    rng: &mut ChaCha12Rng,
) -> (OrthonormalBasis, SubspaceDecomposition) {
    let basis = random_basis(layout, rng);
    let dim = layout.total_dim();
    let block_count = 2 + (unit_f64(rng) * 2.0) as usize; // 2 or 3
    let block_count = block_count.min(dim);
    let mut blocks: Vec<(String, Vec<StateVector>)> =
        (0..block_count).map(|i| (format!("b{i}"), Vec::new())).collect();
    for (i, v) in basis.vectors().iter().enumerate() {
        let slot = if i < block_count { i } else { (unit_f64(rng) * block_count as f64) as usize };
        blocks[slot.min(block_count - 1)].1.push(v.clone());
    }
    let decomposition = SubspaceDecomposition::new(blocks).expect("blocks from one basis");
    (basis, decomposition)
}

/// A later measurement aligned with the decomposition (a regrouping of the
/// same underlying basis): collapse-safe by construction.
pub fn aligned_later(
    basis: &OrthonormalBasis,
    rng: &mut ChaCha12Rng,
) -> MeasurementSpec {
    let dim = basis.len();
    let groups = 2 + (unit_f64(rng) * 2.0) as usize;
    let groups = groups.min(dim);
    let mut blocks: Vec<(String, Vec<StateVector>)> =
        (0..groups).map(|i| (format!("g{i}"), Vec::new())).collect();
    for (i, v) in basis.vectors().iter().enumerate() {
        let slot = if i < groups { i } else { (unit_f64(rng) * groups as f64) as usize };
        blocks[slot.min(groups - 1)].1.push(v.clone());
    }
    MeasurementSpec::Decomposition(
        SubspaceDecomposition::new(blocks).expect("blocks from one basis"),
    )
}

/// Whether a generated random scenario aligns its external measurement with
/// the agent's basis (safe) or rotates it (generically unsafe).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alignment {
    RecordReadout,
    SameBasis,
    Rotated,
}

/// One-lab random scenario: prepare a random state, let an agent measure it
/// in a random basis, then measure externally in an aligned or rotated way.
pub fn random_scenario(seed: u64) -> (Scenario, Alignment) {
    let mut r = rng(seed);
    let dim = 2 + (unit_f64(&mut r) * 2.0) as usize; // 2 or 3
    let labels: Vec<String> = (0..dim).map(|i| format!("l{i}")).collect();
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();

    let sys_layout = SpaceLayout::single("sys", labels.clone()).expect("valid layout");
    let psi = random_state(&sys_layout, &mut r);
    let agent_basis = random_basis(&sys_layout, &mut r);

    let choice = unit_f64(&mut r);
    let alignment = if choice < 0.4 {
        Alignment::RecordReadout
    } else if choice < 0.7 {
        Alignment::SameBasis
    } else {
        Alignment::Rotated
    };

    let agent_spec = SpecDecl::basis(
        labels
            .iter()
            .zip(agent_basis.vectors())
            .map(|(l, v)| (l.clone(), v.amps().to_vec()))
            .collect(),
    );

    let external = match alignment {
        Alignment::RecordReadout => Step::ExternalMeasure {
            targets: vec!["agent".into()],
            spec: SpecDecl::basis(
                labels
                    .iter()
                    .enumerate()
                    .map(|(i, l)| {
                        let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); dim];
                        amps[i] = num_complex::Complex64::new(1.0, 0.0);
                        (format!("saw_{l}"), amps)
                    })
                    .collect(),
            ),
            record: "m".into(),
        },
        Alignment::SameBasis => Step::ExternalMeasure {
            targets: vec!["sys".into()],
            spec: SpecDecl::basis(
                labels
                    .iter()
                    .zip(agent_basis.vectors())
                    .map(|(l, v)| (format!("got_{l}"), v.amps().to_vec()))
                    .collect(),
            ),
            record: "m".into(),
        },
        Alignment::Rotated => {
            // Measuring system and record jointly in a random entangled basis
            // interferes with the agent's record decomposition; measuring the
            // system alone never does, because the record register keeps the
            // which-way information.
            let joint_labels: Vec<String> =
                (0..dim * dim).map(|i| format!("rot{i}")).collect();
            let joint_layout = SpaceLayout::new(vec![
                wignerlab::qcore::Factor::new("sys", labels.clone()),
                wignerlab::qcore::Factor::new("agent", labels.clone()),
            ])
            .expect("valid layout");
            let other = random_basis(&joint_layout, &mut r);
            Step::ExternalMeasure {
                targets: vec!["sys".into(), "agent".into()],
                spec: SpecDecl::basis(
                    joint_labels
                        .iter()
                        .zip(other.vectors())
                        .map(|(l, v)| (l.clone(), v.amps().to_vec()))
                        .collect(),
                ),
                record: "m".into(),
            }
        }
    };

    let scenario = Scenario::new(
        vec![
            RegisterDecl::system("sys", &label_refs),
            RegisterDecl::agent("agent", &labels[0], &label_refs),
        ],
        vec![
            Step::Prepare { register: "sys".into(), amplitudes: psi.amps().to_vec() },
            Step::AgentMeasure {
                agent: "agent".into(),
                targets: vec!["sys".into()],
                spec: agent_spec,
                record: "r".into(),
            },
            external,
        ],
    );
    (scenario, alignment)
}
