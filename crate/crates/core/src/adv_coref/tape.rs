//! Minimal reverse-mode autodiff tape over scalars.
//!
//! Every operation appends a node holding its value and the local partial
//! derivatives with respect to at most two parents. `grad` runs one
//! backward sweep and returns the adjoint of every node, so gradients of
//! intermediate quantities (like span representations) are as accessible
//! as gradients of leaves.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub u32);

#[derive(Default)]
pub struct Tape {
    values: Vec<f64>,
    parents: Vec<[u32; 2]>,
    partials: Vec<[f64; 2]>,
    arity: Vec<u8>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn push(&mut self, value: f64, arity: u8, parents: [u32; 2], partials: [f64; 2]) -> Var {
        let idx = self.values.len() as u32;
        self.values.push(value);
        self.parents.push(parents);
        self.partials.push(partials);
        self.arity.push(arity);
        Var(idx)
    }

    pub fn leaf(&mut self, value: f64) -> Var {
        self.push(value, 0, [0, 0], [0.0, 0.0])
    }

    pub fn value(&self, v: Var) -> f64 {
        self.values[v.0 as usize]
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, 2, [a.0, b.0], [1.0, 1.0])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, 2, [a.0, b.0], [1.0, -1.0])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        self.push(va * vb, 2, [a.0, b.0], [vb, va])
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        self.push(va / vb, 2, [a.0, b.0], [1.0 / vb, -va / (vb * vb)])
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) + c;
        self.push(v, 1, [a.0, 0], [1.0, 0.0])
    }

    pub fn mul_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.push(v, 1, [a.0, 0], [c, 0.0])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).tanh();
        self.push(t, 1, [a.0, 0], [1.0 - t * t, 0.0])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let e = self.value(a).exp();
        self.push(e, 1, [a.0, 0], [e, 0.0])
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.value(a);
        self.push(v.ln(), 1, [a.0, 0], [1.0 / v, 0.0])
    }

    pub fn sum(&mut self, vars: &[Var]) -> Var {
        let mut acc = match vars.first() {
            Some(&v) => v,
            None => return self.leaf(0.0),
        };
        for &v in &vars[1..] {
            acc = self.add(acc, v);
        }
        acc
    }

    pub fn dot(&mut self, a: &[Var], b: &[Var]) -> Var {
        debug_assert_eq!(a.len(), b.len());
        let products: Vec<Var> = a.iter().zip(b.iter()).map(|(&x, &y)| self.mul(x, y)).collect();
        self.sum(&products)
    }

    /// log(sum exp(x_i)) with a constant max shift for stability.
    pub fn logsumexp(&mut self, vars: &[Var]) -> Var {
        debug_assert!(!vars.is_empty());
        let m = vars
            .iter()
            .map(|&v| self.value(v))
            .fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<Var> = vars
            .iter()
            .map(|&v| {
                let shifted = self.add_const(v, -m);
                self.exp(shifted)
            })
            .collect();
        let total = self.sum(&exps);
        let log = self.ln(total);
        self.add_const(log, m)
    }

    /// Adjoints of every node with respect to `output`.
    pub fn grad(&self, output: Var) -> Vec<f64> {
        let mut adjoint = vec![0.0f64; self.values.len()];
        adjoint[output.0 as usize] = 1.0;
        for i in (0..=output.0 as usize).rev() {
            let a = adjoint[i];
            if a == 0.0 {
                continue;
            }
            let arity = self.arity[i] as usize;
            for k in 0..arity {
                adjoint[self.parents[i][k] as usize] += a * self.partials[i][k];
            }
        }
        adjoint
    }
}
