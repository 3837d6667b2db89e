use super::{conjugate_by, DensityMatrix, LabHamiltonian, Propagator, Stage, StepGenerator};
use crate::error::{Error, Result};
use crate::model::{Mat4, C64};

const MINUS_I: C64 = C64::new(0.0, -1.0);
const HERMITICITY_TOLERANCE: f64 = 1e-10;
const POSITIVITY_TOLERANCE: f64 = 1e-6;

/// `-i[H, rho] + sum_k gamma_k (O_k rho O_k^+ - {O_k^+ O_k, rho}/2)`.
pub fn lindblad_rhs(h: &Mat4, jumps: &[(Mat4, f64)], rho: &Mat4) -> Mat4 {
    let mut out = (h * rho - rho * h) * MINUS_I;
    for (op, rate) in jumps {
        let a = op.adjoint() * op;
        out += (op * rho * op.adjoint() - (a * rho + rho * a) * C64::new(0.5, 0.0))
            * C64::new(*rate, 0.0);
    }
    out
}

type M4 = [[C64; 4]; 4];

#[inline(always)]
fn mul(a: &M4, b: &M4) -> M4 {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j] + a[i][3] * b[3][j]
        })
    })
}

/// `a b^+`.
#[inline(always)]
fn mul_adj(a: &M4, b: &M4) -> M4 {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            a[i][0] * b[j][0].conj()
                + a[i][1] * b[j][1].conj()
                + a[i][2] * b[j][2].conj()
                + a[i][3] * b[j][3].conj()
        })
    })
}

#[inline(always)]
fn axpy(a: &M4, x: &M4, s: f64) -> M4 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] + x[i][j] * s))
}

fn to_array(m: &Mat4) -> M4 {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn from_array(a: &M4) -> Mat4 {
    Mat4::from_fn(|i, j| a[i][j])
}

/// Generator at one point, written as `-i (K rho - rho K^+) + sum L rho L^+`
/// with `K = H - (i/2) sum gamma O^+ O` and `L = sqrt(gamma) O`.
struct Generator {
    k: M4,
    jumps: Vec<M4>,
}

impl Generator {
    fn new(n: usize) -> Self {
        Self {
            k: [[C64::new(0.0, 0.0); 4]; 4],
            jumps: vec![[[C64::new(0.0, 0.0); 4]; 4]; n],
        }
    }

    /// Valid for any `rho`, so roundoff in the anti-Hermitian part decays
    /// with the dissipator instead of being fed only by the jump terms.
    #[inline]
    fn rhs(&self, rho: &M4) -> M4 {
        let x = mul(&self.k, rho);
        let y = mul_adj(rho, &self.k);
        let mut out: M4 = std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let d = x[i][j] - y[i][j];
                C64::new(d.im, -d.re)
            })
        });
        for l in &self.jumps {
            let z = mul_adj(&mul(l, rho), l);
            for i in 0..4 {
                for j in 0..4 {
                    out[i][j] += z[i][j];
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct LindbladRun {
    /// Lab-frame density matrix at the end of the window.
    pub rho: DensityMatrix,
    pub trace_drift: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl Propagator {
    /// Integrates the Lindblad equation with time-independent (lab-frame)
    /// jump operators `(O_k, gamma_k)`.
    pub fn propagate_lindblad<F>(
        &self,
        hamiltonian_at: F,
        jumps: &[(Mat4, f64)],
        initial: &DensityMatrix,
    ) -> Result<LindbladRun>
    where
        F: Fn(f64) -> Mat4,
    {
        let generator = LabHamiltonian {
            hamiltonian_at,
            grid: &self.grid,
            frame: &self.frame,
        };
        self.evolve_lindblad(&generator, jumps, initial)
    }

    /// Lindblad evolution for a generator already in the integration frame.
    /// Jump operators are given in the lab frame and moved with the frame
    /// phases.
    pub fn evolve_lindblad<G: StepGenerator>(
        &self,
        generator: &G,
        jumps: &[(Mat4, f64)],
        initial: &DensityMatrix,
    ) -> Result<LindbladRun> {
        if let Some((_, rate)) = jumps.iter().find(|(_, r)| !(*r >= 0.0)) {
            return Err(Error::Config(format!(
                "jump rates must be non-negative (got {rate})"
            )));
        }
        let grid = &self.grid;
        let lab_jumps: Vec<Mat4> = jumps
            .iter()
            .map(|(o, rate)| o * C64::new(rate.sqrt(), 0.0))
            .collect();
        let lab_decay: Mat4 = lab_jumps
            .iter()
            .fold(Mat4::zeros(), |acc, l| acc + l.adjoint() * l)
            * C64::new(0.0, -0.5);
        let fill = |g: &mut Generator, step: usize, stage: Stage| {
            let p = generator.phases(step, stage);
            g.k = to_array(
                &(generator.hamiltonian(step, stage).to_matrix() + conjugate_by(&lab_decay, &p)),
            );
            for (slot, l) in g.jumps.iter_mut().zip(&lab_jumps) {
                *slot = to_array(&conjugate_by(l, &p));
            }
        };

        let mut start = Generator::new(jumps.len());
        let mut mid = Generator::new(jumps.len());
        let mut end = Generator::new(jumps.len());

        let dt = grid.dt;
        let p0 = generator.phases(0, Stage::Start);
        let mut rho = to_array(&conjugate_by(&initial.entries, &p0));
        for step in 0..grid.steps {
            fill(&mut start, step, Stage::Start);
            fill(&mut mid, step, Stage::Mid);
            fill(&mut end, step, Stage::End);
            let k1 = start.rhs(&rho);
            let k2 = mid.rhs(&axpy(&rho, &k1, 0.5 * dt));
            let k3 = mid.rhs(&axpy(&rho, &k2, 0.5 * dt));
            let k4 = end.rhs(&axpy(&rho, &k3, dt));
            for i in 0..4 {
                for j in 0..4 {
                    rho[i][j] += (k1[i][j] + (k2[i][j] + k3[i][j]) * 2.0 + k4[i][j]) * (dt / 6.0);
                }
            }
        }

        let p_end = generator.phases(grid.steps, Stage::Start).map(|z| z.conj());
        let rho = DensityMatrix {
            entries: conjugate_by(&from_array(&rho), &p_end),
        };
        let run = LindbladRun {
            trace_drift: (rho.trace() - 1.0).abs(),
            hermiticity_error: rho.hermiticity_error(),
            min_eigenvalue: rho.min_eigenvalue(),
            rho,
        };
        check(run.trace_drift, self.norm_tolerance, "density-matrix trace")?;
        check(
            run.hermiticity_error,
            HERMITICITY_TOLERANCE,
            "density-matrix hermiticity",
        )?;
        check(
            -run.min_eigenvalue,
            POSITIVITY_TOLERANCE,
            "density-matrix positivity",
        )?;
        Ok(run)
    }
}

fn check(drift: f64, tolerance: f64, quantity: &'static str) -> Result<()> {
    if drift <= tolerance {
        Ok(())
    } else {
        Err(Error::IntegrationQuality {
            quantity,
            drift,
            tolerance,
        })
    }
}
