//! Constraint recipes for each formulation kind.

use super::expr::{realify, ComplexExpr, Constraint, QuadExpr};
use super::instance::{FormulationKind, ProblemInstance, PsdBlock, PsdEntry, SwrFeatures};
use super::registry::{Symbol, VariableRegistry};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::netmodel::{validate_network, Network};

/// Compile `net` into the real-valued problem of the given kind.
pub fn build_formulation(net: &Network, kind: FormulationKind) -> Result<ProblemInstance> {
    let features = match kind {
        FormulationKind::Swr1 => Some(SwrFeatures::SWR1),
        FormulationKind::Swr2 => Some(SwrFeatures::SWR2),
        _ => None,
    };
    Builder::new(net, kind, features)?.build()
}

/// Lifted formulation with an explicit choice of device strengthening. The
/// resulting instance reports kind SWR-2 when both features are on and SWR-1 otherwise.
pub fn build_swr_variant(net: &Network, features: SwrFeatures) -> Result<ProblemInstance> {
    let kind = if features == SwrFeatures::SWR2 { FormulationKind::Swr2 } else { FormulationKind::Swr1 };
    Builder::new(net, kind, Some(features))?.build()
}

struct Builder<'a> {
    net: &'a Network,
    kind: FormulationKind,
    features: Option<SwrFeatures>,
    reg: VariableRegistry,
    linear: Vec<Constraint>,
    quadratic: Vec<Constraint>,
    psd: Vec<PsdBlock>,
    z: Vec<ComplexMatrix>,
    y: Vec<ComplexMatrix>,
    from: Vec<usize>,
    to: Vec<usize>,
    load_bus: Vec<usize>,
    gen_bus: Vec<usize>,
}

impl<'a> Builder<'a> {
    fn new(net: &'a Network, kind: FormulationKind, features: Option<SwrFeatures>) -> Result<Self> {
        let report = validate_network(net);
        if !report.is_empty() {
            return Err(Error::Contract(format!("network is invalid: {report}")));
        }
        if !net.generators.iter().any(|g| g.in_objective) {
            return Err(Error::Model("no generator participates in the objective".into()));
        }
        let z: Vec<ComplexMatrix> = net.branches.iter().map(|b| b.impedance()).collect();
        let y = net.branches.iter().map(|b| b.admittance()).collect::<Result<_>>()?;
        Ok(Builder {
            net,
            kind,
            features,
            reg: VariableRegistry::default(),
            linear: Vec::new(),
            quadratic: Vec::new(),
            psd: Vec::new(),
            z,
            y,
            from: net.branches.iter().map(|b| net.bus_idx(&b.from_bus)).collect(),
            to: net.branches.iter().map(|b| net.bus_idx(&b.to_bus)).collect(),
            load_bus: net.loads.iter().map(|d| net.bus_idx(&d.bus)).collect(),
            gen_bus: net.generators.iter().map(|g| net.bus_idx(&g.bus)).collect(),
        })
    }

    fn build(mut self) -> Result<ProblemInstance> {
        match self.kind {
            FormulationKind::Ivr => self.ivr()?,
            FormulationKind::Svr1 | FormulationKind::Svr2 => self.svr()?,
            FormulationKind::Swr1 | FormulationKind::Swr2 => self.swr()?,
        }
        let mut objective_p = QuadExpr::default();
        let mut objective_q = QuadExpr::default();
        for (g, gen) in self.net.generators.iter().enumerate() {
            if gen.in_objective {
                let s = self.reg.scalar(Symbol::Dispatch, g);
                objective_p = objective_p.add_scaled(&s.re, 1.0);
                objective_q = objective_q.add_scaled(&s.im, 1.0);
            }
        }
        Ok(ProblemInstance {
            kind: self.kind,
            swr_features: self.features,
            registry: self.reg,
            linear: self.linear,
            quadratic: self.quadratic,
            psd: self.psd,
            objective_p,
            objective_q,
        })
    }

    fn push(&mut self, c: Constraint) {
        if c.is_removable() {
            return;
        }
        if c.expr.degree() == 2 {
            self.quadratic.push(c);
        } else {
            self.linear.push(c);
        }
    }

    fn equal(&mut self, label: String, expr: ComplexExpr) -> Result<()> {
        for c in realify(&expr, &label)? {
            self.push(c);
        }
        Ok(())
    }

    /// Real part only, for expressions whose imaginary part is structurally zero.
    fn equal_real(&mut self, label: String, expr: ComplexExpr) {
        self.push(Constraint::eq(format!("{label}.re"), expr.re));
    }

    fn bus_id(&self, b: usize) -> &str {
        &self.net.buses[b].id
    }

    fn register_dispatch(&mut self) {
        for g in 0..self.net.generators.len() {
            self.reg.add_scalar(Symbol::Dispatch, g);
        }
    }

    // ---- shared pieces of the vector (non-lifted) kinds ----

    fn register_voltages(&mut self) {
        for (b, bus) in self.net.buses.iter().enumerate() {
            if !bus.is_slack() {
                self.reg.add_vector(Symbol::Voltage, b, bus.n_conductors);
            }
        }
    }

    /// `U_b[k]`, a constant on the voltage-source bus.
    fn u(&self, b: usize, k: usize) -> ComplexExpr {
        match &self.net.buses[b].fixed_voltage {
            Some(v) => ComplexExpr::constant(v[k]),
            None => self.reg.entry(Symbol::Voltage, b, k),
        }
    }

    fn magnitude_bounds(&mut self) -> Result<()> {
        for (b, bus) in self.net.buses.iter().enumerate() {
            if bus.is_slack() {
                continue;
            }
            for k in 0..bus.n_conductors {
                let u = self.u(b, k);
                let sq = u.mul(&u.conj())?.re;
                let label = format!("vmag[{}][{k}]", bus.id);
                self.push(Constraint::le(
                    format!("{label}.max"),
                    sq.add_scaled(&QuadExpr::constant(bus.u_max[k].powi(2)), -1.0),
                ));
                if bus.u_min[k] > 0.0 {
                    self.push(Constraint::le(
                        format!("{label}.min"),
                        QuadExpr::constant(bus.u_min[k].powi(2)).add_scaled(&sq, -1.0),
                    ));
                }
            }
        }
        Ok(())
    }

    fn dispatch_definition(&mut self, gen_power: impl Fn(&Self, usize, usize) -> ComplexExpr) -> Result<()> {
        for (g, gen) in self.net.generators.iter().enumerate() {
            let total: ComplexExpr = (0..gen.conductors.len()).map(|t| gen_power(self, g, t)).sum();
            let expr = self.reg.scalar(Symbol::Dispatch, g) - &total;
            self.equal(format!("dispatch[{}]", gen.id), expr)?;
        }
        Ok(())
    }

    fn load_set_points(&mut self, load_power: impl Fn(&Self, usize, usize) -> ComplexExpr) -> Result<()> {
        for (d, load) in self.net.loads.iter().enumerate() {
            let total: ComplexExpr = (0..2).map(|t| load_power(self, d, t)).sum();
            self.equal(format!("setpoint[{}]", load.id), total - &ComplexExpr::constant(load.s_ref))?;
        }
        Ok(())
    }

    fn current_conservation(&mut self) -> Result<()> {
        for (d, load) in self.net.loads.iter().enumerate() {
            let sum: ComplexExpr = (0..2).map(|t| self.reg.entry(Symbol::LoadCurrent, d, t)).sum();
            self.equal(format!("load_current[{}]", load.id), sum)?;
        }
        for (g, gen) in self.net.generators.iter().enumerate() {
            let sum: ComplexExpr = (0..gen.conductors.len()).map(|t| self.reg.entry(Symbol::GenCurrent, g, t)).sum();
            self.equal(format!("gen_current[{}]", gen.id), sum)?;
        }
        Ok(())
    }

    /// Per-terminal device powers `S = U o conj(I)`.
    fn device_power_definitions(&mut self) -> Result<()> {
        for (d, load) in self.net.loads.iter().enumerate() {
            for (t, &c) in load.terminals.iter().enumerate() {
                let def = self.u(self.load_bus[d], c).mul(&self.reg.entry(Symbol::LoadCurrent, d, t).conj())?;
                let expr = self.reg.entry(Symbol::LoadPower, d, t) - &def;
                self.equal(format!("load_power[{}][{t}]", load.id), expr)?;
            }
        }
        for (g, gen) in self.net.generators.iter().enumerate() {
            for (t, &c) in gen.conductors.iter().enumerate() {
                let def = self.u(self.gen_bus[g], c).mul(&self.reg.entry(Symbol::GenCurrent, g, t).conj())?;
                let expr = self.reg.entry(Symbol::GenPower, g, t) - &def;
                self.equal(format!("gen_power[{}][{t}]", gen.id), expr)?;
            }
        }
        Ok(())
    }

    /// Bus KCL per conductor with a caller-supplied flow quantity
    /// (branch from/to terms, load terms, generator terms).
    fn vector_kcl(
        &mut self,
        branch_from: impl Fn(&Self, usize, usize) -> ComplexExpr,
        branch_to: impl Fn(&Self, usize, usize) -> ComplexExpr,
        load: impl Fn(&Self, usize, usize) -> ComplexExpr,
        gen: impl Fn(&Self, usize, usize) -> ComplexExpr,
    ) -> Result<()> {
        for (b, bus) in self.net.buses.iter().enumerate() {
            for k in 0..bus.n_conductors {
                let mut sum = ComplexExpr::zero();
                for l in 0..self.net.branches.len() {
                    if self.from[l] == b {
                        sum = sum + &branch_from(self, l, k);
                    }
                    if self.to[l] == b {
                        sum = sum + &branch_to(self, l, k);
                    }
                }
                for (d, ld) in self.net.loads.iter().enumerate() {
                    if self.load_bus[d] == b {
                        for (t, _) in ld.terminals.iter().enumerate().filter(|(_, &c)| c == k) {
                            sum = sum + &load(self, d, t);
                        }
                    }
                }
                for (g, gn) in self.net.generators.iter().enumerate() {
                    if self.gen_bus[g] == b {
                        for (t, _) in gn.conductors.iter().enumerate().filter(|(_, &c)| c == k) {
                            sum = sum - &gen(self, g, t);
                        }
                    }
                }
                self.equal(format!("kcl[{}][{k}]", bus.id), sum)?;
            }
        }
        Ok(())
    }

    // ---- current-voltage ----

    fn ivr(&mut self) -> Result<()> {
        self.register_voltages();
        for (l, br) in self.net.branches.iter().enumerate() {
            self.reg.add_vector(Symbol::BranchCurrent, l, br.n_conductors());
        }
        for d in 0..self.net.loads.len() {
            self.reg.add_vector(Symbol::LoadCurrent, d, 2);
        }
        for (g, gen) in self.net.generators.iter().enumerate() {
            self.reg.add_vector(Symbol::GenCurrent, g, gen.conductors.len());
            self.reg.add_vector(Symbol::GenPower, g, gen.conductors.len());
        }
        self.register_dispatch();

        // U_j = U_i - Z I_lij
        for (l, br) in self.net.branches.iter().enumerate() {
            let n = br.n_conductors();
            for k in 0..n {
                let drop: ComplexExpr =
                    (0..n).map(|m| self.reg.entry(Symbol::BranchCurrent, l, m).scale(self.z[l][(k, m)])).sum();
                let expr = self.u(self.to[l], k) - &self.u(self.from[l], k) + &drop;
                self.equal(format!("ohm[{}][{k}]", br.id), expr)?;
            }
        }

        self.vector_kcl(
            |s, l, k| s.reg.entry(Symbol::BranchCurrent, l, k),
            |s, l, k| -s.reg.entry(Symbol::BranchCurrent, l, k),
            |s, d, t| s.reg.entry(Symbol::LoadCurrent, d, t),
            |s, g, t| s.reg.entry(Symbol::GenCurrent, g, t),
        )?;

        // (U_a - U_n) conj(I_d,a) = S_ref
        for (d, load) in self.net.loads.iter().enumerate() {
            let [a, n] = load.terminals;
            let b = self.load_bus[d];
            let drop = self.u(b, a) - &self.u(b, n);
            let power = drop.mul(&self.reg.entry(Symbol::LoadCurrent, d, 0).conj())?;
            self.equal(format!("setpoint[{}]", load.id), power - &ComplexExpr::constant(load.s_ref))?;
        }

        self.current_conservation()?;
        for (g, gen) in self.net.generators.iter().enumerate() {
            for (t, &c) in gen.conductors.iter().enumerate() {
                let def = self.u(self.gen_bus[g], c).mul(&self.reg.entry(Symbol::GenCurrent, g, t).conj())?;
                let expr = self.reg.entry(Symbol::GenPower, g, t) - &def;
                self.equal(format!("gen_power[{}][{t}]", gen.id), expr)?;
            }
        }
        self.dispatch_definition(|s, g, t| s.reg.entry(Symbol::GenPower, g, t))?;
        self.magnitude_bounds()
    }

    // ---- power-voltage ----

    fn svr(&mut self) -> Result<()> {
        let extended = self.kind == FormulationKind::Svr2;
        self.register_voltages();
        for (l, br) in self.net.branches.iter().enumerate() {
            self.reg.add_vector(Symbol::BranchPowerFrom, l, br.n_conductors());
            self.reg.add_vector(Symbol::BranchPowerTo, l, br.n_conductors());
        }
        for d in 0..self.net.loads.len() {
            self.reg.add_vector(Symbol::LoadPower, d, 2);
            if extended {
                self.reg.add_vector(Symbol::LoadCurrent, d, 2);
            }
        }
        for (g, gen) in self.net.generators.iter().enumerate() {
            self.reg.add_vector(Symbol::GenPower, g, gen.conductors.len());
            if extended {
                self.reg.add_vector(Symbol::GenCurrent, g, gen.conductors.len());
            }
        }
        self.register_dispatch();

        // S_lij = U_i o conj(Y (U_i - U_j)), and the mirror at the to end
        for (l, br) in self.net.branches.iter().enumerate() {
            let n = br.n_conductors();
            for (end, (here, there), symbol) in [
                ("from", (self.from[l], self.to[l]), Symbol::BranchPowerFrom),
                ("to", (self.to[l], self.from[l]), Symbol::BranchPowerTo),
            ] {
                for k in 0..n {
                    let current: ComplexExpr =
                        (0..n).map(|m| (self.u(here, m) - &self.u(there, m)).scale(self.y[l][(k, m)])).sum();
                    let flow = self.u(here, k).mul(&current.conj())?;
                    let expr = self.reg.entry(symbol, l, k) - &flow;
                    self.equal(format!("ohm_{end}[{}][{k}]", br.id), expr)?;
                }
            }
        }

        self.vector_kcl(
            |s, l, k| s.reg.entry(Symbol::BranchPowerFrom, l, k),
            |s, l, k| s.reg.entry(Symbol::BranchPowerTo, l, k),
            |s, d, t| s.reg.entry(Symbol::LoadPower, d, t),
            |s, g, t| s.reg.entry(Symbol::GenPower, g, t),
        )?;
        self.load_set_points(|s, d, t| s.reg.entry(Symbol::LoadPower, d, t))?;
        self.dispatch_definition(|s, g, t| s.reg.entry(Symbol::GenPower, g, t))?;
        if extended {
            self.current_conservation()?;
            self.device_power_definitions()?;
        }
        self.magnitude_bounds()
    }

    // ---- lifted power-voltage ----

    fn w(&self, b: usize, r: usize, c: usize) -> ComplexExpr {
        self.reg.hermitian(Symbol::VoltageProduct, b, r, c)
    }

    fn lmat(&self, l: usize, r: usize, c: usize) -> ComplexExpr {
        self.reg.hermitian(Symbol::CurrentProduct, l, r, c)
    }

    fn sbar(&self, symbol: Symbol, l: usize, r: usize, c: usize) -> ComplexExpr {
        self.reg.matrix(symbol, l, r, c)
    }

    /// Per-terminal load power: a vector variable, or the generalized diagonal of the matrix variable.
    fn swr_load_power(&self, d: usize, t: usize) -> ComplexExpr {
        if self.features.is_some_and(SwrFeatures::matrix_devices) {
            self.reg.matrix(Symbol::LoadMatrix, d, self.net.loads[d].terminals[t], t)
        } else {
            self.reg.entry(Symbol::LoadPower, d, t)
        }
    }

    fn swr_gen_power(&self, g: usize, t: usize) -> ComplexExpr {
        if self.features.is_some_and(SwrFeatures::matrix_devices) {
            self.reg.matrix(Symbol::GenMatrix, g, self.net.generators[g].conductors[t], t)
        } else {
            self.reg.entry(Symbol::GenPower, g, t)
        }
    }

    fn swr(&mut self) -> Result<()> {
        let features = self.features.expect("lifted kinds carry features");
        for (b, bus) in self.net.buses.iter().enumerate() {
            self.reg.add_hermitian(Symbol::VoltageProduct, b, bus.n_conductors);
        }
        for (l, br) in self.net.branches.iter().enumerate() {
            let n = br.n_conductors();
            self.reg.add_hermitian(Symbol::CurrentProduct, l, n);
            self.reg.add_matrix(Symbol::BranchMatrixFrom, l, n, n);
            self.reg.add_matrix(Symbol::BranchMatrixTo, l, n, n);
        }
        for (d, _) in self.net.loads.iter().enumerate() {
            if features.matrix_devices() {
                let rows = self.net.buses[self.load_bus[d]].n_conductors;
                self.reg.add_matrix(Symbol::LoadMatrix, d, rows, 2);
            } else {
                self.reg.add_vector(Symbol::LoadPower, d, 2);
            }
        }
        for (g, gen) in self.net.generators.iter().enumerate() {
            if features.matrix_devices() {
                let rows = self.net.buses[self.gen_bus[g]].n_conductors;
                self.reg.add_matrix(Symbol::GenMatrix, g, rows, gen.conductors.len());
            } else {
                self.reg.add_vector(Symbol::GenPower, g, gen.conductors.len());
            }
        }
        self.register_dispatch();

        // W fixed to U U^H at the voltage source
        for (b, bus) in self.net.buses.iter().enumerate() {
            if let Some(u) = &bus.fixed_voltage {
                for r in 0..bus.n_conductors {
                    for c in r..bus.n_conductors {
                        let expr = self.w(b, r, c) - &ComplexExpr::constant(u[r] * u[c].conj());
                        let label = format!("source_w[{}][{r},{c}]", bus.id);
                        if r == c {
                            self.equal_real(label, expr);
                        } else {
                            self.equal(label, expr)?;
                        }
                    }
                }
            }
        }

        for (l, br) in self.net.branches.iter().enumerate() {
            let n = br.n_conductors();
            let z = self.z[l].clone();
            let (i, j) = (self.from[l], self.to[l]);

            // W_j = W_i - Sbar Z^H - Z Sbar^H + Z L Z^H on the upper triangle
            for r in 0..n {
                for c in r..n {
                    let mut expr = self.w(j, r, c) - &self.w(i, r, c);
                    for m in 0..n {
                        expr = expr + &self.sbar(Symbol::BranchMatrixFrom, l, r, m).scale(z[(c, m)].conj());
                        expr = expr + &self.sbar(Symbol::BranchMatrixFrom, l, c, m).conj().scale(z[(r, m)]);
                        for p in 0..n {
                            expr = expr - &self.lmat(l, m, p).scale(z[(r, m)] * z[(c, p)].conj());
                        }
                    }
                    let label = format!("ohm_lifted[{}][{r},{c}]", br.id);
                    if r == c {
                        self.equal_real(label, expr);
                    } else {
                        self.equal(label, expr)?;
                    }
                }
            }

            // Sbar_lij + Sbar_lji = Z L
            for r in 0..n {
                for c in 0..n {
                    let zl: ComplexExpr = (0..n).map(|m| self.lmat(l, m, c).scale(z[(r, m)])).sum();
                    let expr = self.sbar(Symbol::BranchMatrixFrom, l, r, c)
                        + &self.sbar(Symbol::BranchMatrixTo, l, r, c)
                        - &zl;
                    self.equal(format!("flow_loss[{}][{r},{c}]", br.id), expr)?;
                }
            }

            let block = self.branch_psd_block(l, i, n)?;
            self.psd.push(block);
        }

        if features.matrix_kcl {
            self.matrix_kcl()?;
        } else {
            self.vector_kcl(
                |s, l, k| s.sbar(Symbol::BranchMatrixFrom, l, k, k),
                |s, l, k| s.sbar(Symbol::BranchMatrixTo, l, k, k),
                |s, d, t| s.swr_load_power(d, t),
                |s, g, t| s.swr_gen_power(g, t),
            )?;
        }

        if features.row_sums {
            for (d, load) in self.net.loads.iter().enumerate() {
                for r in 0..self.net.buses[self.load_bus[d]].n_conductors {
                    let sum: ComplexExpr = (0..2).map(|t| self.reg.matrix(Symbol::LoadMatrix, d, r, t)).sum();
                    self.equal(format!("load_rowsum[{}][{r}]", load.id), sum)?;
                }
            }
            for (g, gen) in self.net.generators.iter().enumerate() {
                for r in 0..self.net.buses[self.gen_bus[g]].n_conductors {
                    let sum: ComplexExpr =
                        (0..gen.conductors.len()).map(|t| self.reg.matrix(Symbol::GenMatrix, g, r, t)).sum();
                    self.equal(format!("gen_rowsum[{}][{r}]", gen.id), sum)?;
                }
            }
        }

        self.load_set_points(|s, d, t| s.swr_load_power(d, t))?;
        self.dispatch_definition(|s, g, t| s.swr_gen_power(g, t))?;

        for (b, bus) in self.net.buses.iter().enumerate() {
            if bus.is_slack() {
                continue;
            }
            for k in 0..bus.n_conductors {
                let wkk = self.w(b, k, k).re;
                let label = format!("vmag[{}][{k}]", bus.id);
                self.push(Constraint::le(
                    format!("{label}.max"),
                    wkk.add_scaled(&QuadExpr::constant(bus.u_max[k].powi(2)), -1.0),
                ));
                if bus.u_min[k] > 0.0 {
                    self.push(Constraint::le(
                        format!("{label}.min"),
                        QuadExpr::constant(bus.u_min[k].powi(2)).add_scaled(&wkk, -1.0),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `sum Sbar_lij + sum Sbar_d - sum Sbar_g = 0` as a full matrix equality per bus.
    fn matrix_kcl(&mut self) -> Result<()> {
        for (b, bus) in self.net.buses.iter().enumerate() {
            let n = bus.n_conductors;
            for r in 0..n {
                for c in 0..n {
                    let mut sum = ComplexExpr::zero();
                    for l in 0..self.net.branches.len() {
                        if self.from[l] == b {
                            sum = sum + &self.sbar(Symbol::BranchMatrixFrom, l, r, c);
                        }
                        if self.to[l] == b {
                            sum = sum + &self.sbar(Symbol::BranchMatrixTo, l, r, c);
                        }
                    }
                    for (d, load) in self.net.loads.iter().enumerate() {
                        if self.load_bus[d] == b {
                            for (t, _) in load.terminals.iter().enumerate().filter(|(_, &k)| k == c) {
                                sum = sum + &self.reg.matrix(Symbol::LoadMatrix, d, r, t);
                            }
                        }
                    }
                    for (g, gen) in self.net.generators.iter().enumerate() {
                        if self.gen_bus[g] == b {
                            for (t, _) in gen.conductors.iter().enumerate().filter(|(_, &k)| k == c) {
                                sum = sum - &self.reg.matrix(Symbol::GenMatrix, g, r, t);
                            }
                        }
                    }
                    self.equal(format!("kcl_matrix[{}][{r},{c}]", self.bus_id(b)), sum)?;
                }
            }
        }
        Ok(())
    }

    /// Real embedding `[[Re M, -Im M], [Im M, Re M]]` of `M = [[W_i, Sbar], [Sbar^H, L]]`.
    fn branch_psd_block(&self, l: usize, from: usize, n: usize) -> Result<PsdBlock> {
        let m = 2 * n;
        let entry = |r: usize, c: usize| -> ComplexExpr {
            match (r < n, c < n) {
                (true, true) => self.w(from, r, c),
                (true, false) => self.sbar(Symbol::BranchMatrixFrom, l, r, c - n),
                (false, true) => self.sbar(Symbol::BranchMatrixFrom, l, c, r - n).conj(),
                (false, false) => self.lmat(l, r - n, c - n),
            }
        };
        let side = 2 * m;
        let mut entries = Vec::new();
        for col in 0..side {
            for row in col..side {
                let (br, r) = (row / m, row % m);
                let (bc, c) = (col / m, col % m);
                let z = entry(r, c);
                let part = match (br, bc) {
                    (0, 0) | (1, 1) => z.re,
                    (1, 0) => z.im,
                    _ => z.im.scale(-1.0),
                };
                match part.lin.as_slice() {
                    [] => {}
                    [(var, coeff)] => entries.push(PsdEntry { row, col, var: *var, coeff: *coeff }),
                    _ => return Err(Error::Model("psd entry is not a single variable".into())),
                }
            }
        }
        Ok(PsdBlock { label: format!("branch_psd[{}]", self.net.branches[l].id), side, entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulations::expr::Relation;
    use crate::netmodel::two_bus_two_wire;

    fn count(inst: &ProblemInstance, prefix: &str) -> usize {
        inst.constraints().filter(|c| c.label.starts_with(prefix)).count()
    }

    #[test]
    fn ivr_audit() {
        let inst = build_formulation(&two_bus_two_wire(), FormulationKind::Ivr).unwrap();
        assert!(inst.psd.is_empty());
        // U_j (4) + I_lij (4) + I_d (4) + I_g (4) + S_g (4) + dispatch (2)
        assert_eq!(inst.n_vars(), 22);
        let setpoints: Vec<_> = inst.constraints().filter(|c| c.label.starts_with("setpoint")).collect();
        assert_eq!(setpoints.len(), 2);
        assert!(setpoints.iter().all(|c| c.expr.degree() == 2));
        assert_eq!(count(&inst, "ohm"), 4);
        assert_eq!(count(&inst, "kcl"), 8);
        assert_eq!(count(&inst, "load_current"), 2);
        assert_eq!(count(&inst, "gen_current"), 2);
        assert_eq!(count(&inst, "gen_power"), 4);
        assert_eq!(count(&inst, "dispatch"), 2);
        // two upper bounds and one lower bound (the neutral lower bound is zero)
        assert_eq!(count(&inst, "vmag"), 3);
        assert!(inst.constraints().filter(|c| c.label.starts_with("vmag")).all(|c| c.relation == Relation::Le));
    }

    #[test]
    fn swr1_has_one_eight_by_eight_block() {
        let inst = build_formulation(&two_bus_two_wire(), FormulationKind::Swr1).unwrap();
        assert_eq!(inst.psd.len(), 1);
        assert_eq!(inst.psd[0].side, 8);
        assert!(inst.quadratic.is_empty());
    }

    #[test]
    fn svr2_adds_device_currents() {
        let net = two_bus_two_wire();
        let a = build_formulation(&net, FormulationKind::Svr1).unwrap();
        let b = build_formulation(&net, FormulationKind::Svr2).unwrap();
        assert_eq!(b.n_vars() - a.n_vars(), 8);
        assert!(a.registry.tags().iter().all(|t| b.registry.get(t).is_some()));
        assert_eq!(b.registry.count_symbol(Symbol::LoadCurrent), 4);
        assert_eq!(b.registry.count_symbol(Symbol::GenCurrent), 4);
        assert!(!a.registry.contains_symbol(Symbol::LoadCurrent));
    }

    #[test]
    fn psd_index_map_is_injective_and_complete() {
        let net = two_bus_two_wire();
        for kind in [FormulationKind::Swr1, FormulationKind::Swr2] {
            let inst = build_formulation(&net, kind).unwrap();
            let block = &inst.psd[0];
            // each (row, col) appears once
            let mut cells: Vec<(usize, usize)> = block.entries.iter().map(|e| (e.row, e.col)).collect();
            cells.sort_unstable();
            cells.dedup();
            assert_eq!(cells.len(), block.entries.len());
            // within the upper-left Hermitian quadrant (Re M, lower triangle incl. diagonal)
            // every variable appears at most once
            let mut vars: Vec<usize> = block.entries.iter().filter(|e| e.row < 4 && e.col < 4).map(|e| e.var).collect();
            let before = vars.len();
            vars.sort_unstable();
            vars.dedup();
            assert_eq!(before, vars.len());
            let mut covered: Vec<usize> = block.entries.iter().map(|e| e.var).collect();
            covered.sort_unstable();
            covered.dedup();
            let mut expected: Vec<usize> = inst
                .registry
                .tags()
                .iter()
                .enumerate()
                .filter(|(_, t)| {
                    (t.symbol == Symbol::VoltageProduct && t.owner == 0)
                        || t.symbol == Symbol::CurrentProduct
                        || t.symbol == Symbol::BranchMatrixFrom
                })
                .map(|(i, _)| i)
                .collect();
            expected.sort_unstable();
            assert_eq!(covered, expected);
        }
    }

    #[test]
    fn no_objective_generator_is_model_error() {
        let mut net = two_bus_two_wire();
        net.generators[0].in_objective = false;
        assert!(matches!(build_formulation(&net, FormulationKind::Ivr), Err(Error::Model(_))));
    }

    #[test]
    fn invalid_network_is_contract_error() {
        let mut net = two_bus_two_wire();
        net.branches[0].r[(0, 1)] = 1.0;
        assert!(matches!(build_formulation(&net, FormulationKind::Svr1), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_point_violates_ivr_set_point_by_load_magnitude() {
        let net = two_bus_two_wire();
        let inst = build_formulation(&net, FormulationKind::Ivr).unwrap();
        let rep = inst.residuals(&vec![0.0; inst.n_vars()]).unwrap();
        let re = rep.entries.iter().find(|e| e.label == "setpoint[d].re").unwrap().value;
        let im = rep.entries.iter().find(|e| e.label == "setpoint[d].im").unwrap().value;
        assert!(((re * re + im * im).sqrt() - (1.25f64).sqrt()).abs() < 1e-15);
        assert!(!rep.feasible(1e-6));
    }

    #[test]
    fn residual_length_mismatch() {
        let inst = build_formulation(&two_bus_two_wire(), FormulationKind::Svr1).unwrap();
        assert!(matches!(inst.residuals(&[0.0; 3]), Err(Error::Contract(_))));
    }
}
