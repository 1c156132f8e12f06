// Amplitude trajectories for the two-KPO network: the closed-form per-oscillator
// estimate against the variational one (joint maximization of the projected
// Hamiltonian's top eigenvalue), plus CSV export of both paths.
//
//   cargo run --release --example alpha_trajectory

use std::f64::consts::TAU;

use kpo_sim::model::{CouplingKind, CouplingSpec, KpoSpec, NetworkSpec, ScheduleSpec};
use kpo_sim::spin::{build_alpha_trajectory, estimate_alpha_max, AlphaMethod};

fn network() -> NetworkSpec {
    NetworkSpec {
        kpos: vec![
            KpoSpec {
                kerr: -12.6 * TAU,
                pump_final: 148.0 * TAU,
                drive_final_rescaled: 9.0 * TAU,
                photon_loss: 1.1 * TAU,
            },
            KpoSpec {
                kerr: -12.6 * TAU,
                pump_final: 169.0 * TAU,
                drive_final_rescaled: -6.9 * TAU,
                photon_loss: 1.3 * TAU,
            },
        ],
        couplings: vec![CouplingSpec {
            kind: CouplingKind::TwoBody,
            sites: vec![0, 1],
            strength: 6.9 * TAU,
        }],
        dephasing: 7.7e-3 * TAU,
        schedule: ScheduleSpec {
            t_s: 0.4,
            t_sp: 0.1,
            t_rd: 0.6,
            t_r: 0.4,
            delta_initial: -20.0 * TAU,
            pump_exponent: 2.5,
            drive_exponent: 1.0,
            grid_points: 200,
        },
    }
}

fn main() -> kpo_sim::Result<()> {
    let network = network();

    let analytic = build_alpha_trajectory(&network, AlphaMethod::Analytic)?;
    let variational = build_alpha_trajectory(&network, AlphaMethod::Variational)?;

    println!(
        "{:>6}  {:>10} {:>10}  {:>10} {:>10}",
        "t_us", "a0_closed", "a1_closed", "a0_eig", "a1_eig"
    );
    for &t in &[0.0, 0.05, 0.10, 0.15, 0.20, 0.30, 0.40, 0.60, 1.00, 1.40] {
        let a = analytic.at(t);
        let v = variational.at(t);
        println!(
            "{:>6.2}  {:>10.4} {:>10.4}  {:>10.4} {:>10.4}",
            t, a[0], a[1], v[0], v[1]
        );
    }

    // where and by how much the two estimates differ the most, per oscillator
    for j in 0..network.n_kpos() {
        let (mut dev, mut at) = (0.0f64, 0.0f64);
        for (t, row) in variational.times().iter().zip(variational.rows()) {
            let d = (row[j] - analytic.at(*t)[j]).abs();
            if d > dev {
                dev = d;
                at = *t;
            }
        }
        println!("KPO {j}: largest gap {dev:.4} at t = {at:.3} us");
    }

    // a single point evaluation, warm-started from the closed form
    let t_end_of_ramp = network.schedule.t_s;
    let seed: Vec<f64> = (0..network.n_kpos())
        .map(|j| network.alpha_analytic_at(j, t_end_of_ramp))
        .collect::<kpo_sim::Result<_>>()?;
    let joint = estimate_alpha_max(&network, t_end_of_ramp, Some(&seed))?;
    println!(
        "at t = {t_end_of_ramp} us: closed form ({:.4}, {:.4}), joint optimum ({:.4}, {:.4})",
        seed[0], seed[1], joint[0], joint[1]
    );

    let dir = std::env::temp_dir();
    for (name, traj) in [("alpha_analytic.csv", &analytic), ("alpha_variational.csv", &variational)] {
        let path = dir.join(name);
        std::fs::write(&path, traj.to_csv())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
