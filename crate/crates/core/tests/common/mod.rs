//! Shared test oracles.

/// Double-double arithmetic for a finite-difference oracle free of f64
/// cancellation.
pub mod dd {
    use std::ops::{Add, Div, Mul, Neg, Sub};

    use noisesense_core::classifier::{Activation, Mlp};

    #[derive(Clone, Copy, Debug, PartialEq)]
    pub struct Dd {
        pub hi: f64,
        pub lo: f64,
    }

    impl From<f64> for Dd {
        fn from(hi: f64) -> Self {
            Dd { hi, lo: 0.0 }
        }
    }

    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    fn quick(a: f64, b: f64) -> Dd {
        let s = a + b;
        Dd {
            hi: s,
            lo: b - (s - a),
        }
    }

    impl Add for Dd {
        type Output = Dd;
        fn add(self, o: Dd) -> Dd {
            let (s, e) = two_sum(self.hi, o.hi);
            let (t, f) = two_sum(self.lo, o.lo);
            let r = quick(s, e + t);
            quick(r.hi, r.lo + f)
        }
    }

    impl Neg for Dd {
        type Output = Dd;
        fn neg(self) -> Dd {
            Dd {
                hi: -self.hi,
                lo: -self.lo,
            }
        }
    }

    impl Sub for Dd {
        type Output = Dd;
        fn sub(self, o: Dd) -> Dd {
            self + -o
        }
    }

    impl Mul for Dd {
        type Output = Dd;
        fn mul(self, o: Dd) -> Dd {
            let p = self.hi * o.hi;
            let e = self.hi.mul_add(o.hi, -p);
            quick(p, e + (self.hi * o.lo + self.lo * o.hi))
        }
    }

    impl Div for Dd {
        type Output = Dd;
        fn div(self, o: Dd) -> Dd {
            let q1 = self.hi / o.hi;
            let r = self - o * Dd::from(q1);
            let q2 = r.hi / o.hi;
            let r = r - o * Dd::from(q2);
            let q3 = r.hi / o.hi;
            quick(q1, q2) + Dd::from(q3)
        }
    }

    const LN2: Dd = Dd {
        hi: std::f64::consts::LN_2,
        lo: 2.319046813846299558e-17,
    };

    fn ldexp(x: Dd, k: i32) -> Dd {
        let s = 2f64.powi(k);
        Dd {
            hi: x.hi * s,
            lo: x.lo * s,
        }
    }

    pub fn exp(x: Dd) -> Dd {
        let k = (x.hi / LN2.hi).round();
        let r = ldexp(x - LN2 * Dd::from(k), -10);
        // Taylor series of exp(r) - 1 for |r| < 4e-4.
        let mut term = r;
        let mut sum = r;
        for n in 2..=12 {
            term = term * r / Dd::from(n as f64);
            sum = sum + term;
        }
        // exp(2r) - 1 = (exp(r) - 1)(exp(r) + 1)
        for _ in 0..10 {
            sum = sum * (sum + Dd::from(2.0));
        }
        ldexp(sum + Dd::from(1.0), k as i32)
    }

    pub fn ln(x: Dd) -> Dd {
        let mut y = Dd::from(x.hi.ln());
        for _ in 0..2 {
            y = y + x * exp(-y) - Dd::from(1.0);
        }
        y
    }

    pub fn self_check() {
        let e = exp(Dd::from(1.0));
        assert_eq!(e.hi, std::f64::consts::E);
        assert!((e.lo - 1.445646891729250158e-16).abs() < 1e-30, "{e:?}");
        let x = Dd::from(0.3) / Dd::from(7.0);
        let back = ln(exp(x)) - x;
        assert!(back.hi.abs() < 1e-30, "{back:?}");
    }

    /// Mean cross-entropy of the network with flattened parameters `p`.
    pub fn loss(net: &Mlp, p: &[Dd], xs: &[Vec<f64>], labels: &[usize]) -> Dd {
        let mut total = Dd::from(0.0);
        for (x, &label) in xs.iter().zip(labels) {
            let mut y: Vec<Dd> = x.iter().map(|&v| Dd::from(v)).collect();
            let mut offset = 0;
            for (layer, &act) in net.layers.iter().zip(&net.arch.activations) {
                let w = &p[offset..offset + layer.inputs * layer.outputs];
                let b = &p[offset + layer.inputs * layer.outputs
                    ..offset + layer.inputs * layer.outputs + layer.outputs];
                offset += layer.inputs * layer.outputs + layer.outputs;
                let z: Vec<Dd> = (0..layer.outputs)
                    .map(|o| {
                        (0..layer.inputs).fold(b[o], |acc, i| acc + w[o * layer.inputs + i] * y[i])
                    })
                    .collect();
                y = match act {
                    Activation::Relu => z
                        .iter()
                        .map(|&v| if v.hi > 0.0 { v } else { Dd::from(0.0) })
                        .collect(),
                    Activation::LeakyRelu => z
                        .iter()
                        .map(|&v| {
                            if v.hi > 0.0 {
                                v
                            } else {
                                v * Dd::from(net.arch.leak_slope)
                            }
                        })
                        .collect(),
                    Activation::Softmax => {
                        // Keep the logits; the loss is logsumexp(z) - z[label].
                        z
                    }
                };
            }
            let m = y.iter().map(|v| v.hi).fold(f64::NEG_INFINITY, f64::max);
            let sum = y
                .iter()
                .fold(Dd::from(0.0), |acc, &v| acc + exp(v - Dd::from(m)));
            total = total + Dd::from(m) + ln(sum) - y[label];
        }
        total / Dd::from(xs.len() as f64)
    }
}
