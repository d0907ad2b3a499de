//! Candidate gate-level compressor implementations and their macro
//! timing models: per (input port, output port) worst-case delay/slew
//! tables, input capacitances, and area.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liberty::{worst_case_arcs, LibraryCell, TimingLibrary};
use crate::lut::Lut2D;
use crate::tree::CompKind;

/// One cell instance of an implementation netlist (pin -> net).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImplCellInst {
    pub id: String,
    pub cell: String,
    pub pins: IndexMap<String, String>,
}

/// A small gate-level netlist realizing a 3:2 or 2:2 compressor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImplNetlist {
    pub name: String,
    pub kind: CompKind,
    /// Compressor port -> net.
    pub ports: IndexMap<String, String>,
    pub cells: Vec<ImplCellInst>,
}

#[derive(Debug, Deserialize)]
struct CatalogFile {
    impls: Vec<CatalogImpl>,
}

#[derive(Debug, Deserialize)]
struct CatalogImpl {
    name: String,
    kind: String,
    ports: IndexMap<String, String>,
    cells: Vec<ImplCellInst>,
}

/// Parse an implementation catalog (TOML).
pub fn load_catalog(text: &str) -> Result<Vec<ImplNetlist>> {
    let file: CatalogFile = toml::from_str(text)?;
    let mut out = Vec::new();
    for entry in file.impls {
        let kind = match entry.kind.as_str() {
            "c32" => CompKind::C32,
            "c22" => CompKind::C22,
            other => return Err(Error::Argument(format!("unknown compressor kind `{other}`"))),
        };
        for port in kind.inputs().iter().chain(kind.outputs()) {
            if !entry.ports.contains_key(*port) {
                return Err(Error::Structure(format!(
                    "implementation `{}` is missing port `{port}`",
                    entry.name
                )));
            }
        }
        out.push(ImplNetlist { name: entry.name, kind, ports: entry.ports, cells: entry.cells });
    }
    Ok(out)
}

impl ImplNetlist {
    pub fn port_net(&self, port: &str) -> &str {
        &self.ports[port]
    }

    /// Cells in topological order (driver before consumer), with the
    /// compressor input ports as primaries.
    fn topo_order(&self, lib: &TimingLibrary) -> Result<Vec<usize>> {
        let mut driver_of: IndexMap<&str, usize> = IndexMap::new();
        for (ci, inst) in self.cells.iter().enumerate() {
            let cell = lib.cell(&inst.cell)?;
            for (pin, net) in &inst.pins {
                if !cell.is_input(pin) && !cell.is_output(pin) {
                    return Err(Error::Structure(format!(
                        "instance `{}`: pin `{pin}` not declared on `{}`",
                        inst.id, inst.cell
                    )));
                }
                if cell.is_output(pin) {
                    if driver_of.insert(net.as_str(), ci).is_some() {
                        return Err(Error::Structure(format!("net `{net}` has multiple drivers")));
                    }
                }
            }
        }
        let primary: Vec<&str> =
            self.kind.inputs().iter().map(|p| self.port_net(p)).collect();
        // Kahn over cell nodes
        let mut indeg = vec![0usize; self.cells.len()];
        let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); self.cells.len()];
        for (ci, inst) in self.cells.iter().enumerate() {
            let cell = lib.cell(&inst.cell)?;
            for (pin, net) in &inst.pins {
                if cell.is_input(pin) {
                    if primary.contains(&net.as_str()) {
                        continue;
                    }
                    match driver_of.get(net.as_str()) {
                        Some(&d) => {
                            consumers[d].push(ci);
                            indeg[ci] += 1;
                        }
                        None => {
                            return Err(Error::Structure(format!(
                                "net `{net}` consumed by `{}` has no driver",
                                inst.id
                            )))
                        }
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..self.cells.len()).filter(|&c| indeg[c] == 0).collect();
        let mut head = 0;
        while head < order.len() {
            let c = order[head];
            head += 1;
            for &n in &consumers[c] {
                indeg[n] -= 1;
                if indeg[n] == 0 {
                    order.push(n);
                }
            }
        }
        if order.len() != self.cells.len() {
            let stuck = (0..self.cells.len()).find(|&c| indeg[c] > 0).unwrap();
            return Err(Error::Cycle(self.cells[stuck].id.clone()));
        }
        Ok(order)
    }

    /// Structural invariants that need the library: declared pins,
    /// single-driver outputs, driven input ports, acyclic graph.
    pub fn check_structure(&self, lib: &TimingLibrary) -> Result<()> {
        let order = self.topo_order(lib)?;
        let _ = order;
        for port in self.kind.outputs() {
            let net = self.port_net(port);
            let drivers = self
                .cells
                .iter()
                .flat_map(|inst| inst.pins.iter().map(move |(p, n)| (inst, p, n)))
                .filter(|(inst, p, n)| {
                    n.as_str() == net
                        && lib.cells.get(&inst.cell).map(|c| c.is_output(p)).unwrap_or(false)
                })
                .count();
            if drivers != 1 {
                return Err(Error::Structure(format!(
                    "output port `{port}` must be driven by exactly one cell output (found {drivers})"
                )));
            }
        }
        for port in self.kind.inputs() {
            let net = self.port_net(port);
            let sinks = self
                .cells
                .iter()
                .flat_map(|inst| inst.pins.iter().map(move |(p, n)| (inst, p, n)))
                .filter(|(inst, p, n)| {
                    n.as_str() == net
                        && lib.cells.get(&inst.cell).map(|c| c.is_input(p)).unwrap_or(false)
                })
                .count();
            if sinks == 0 {
                return Err(Error::Structure(format!(
                    "input port `{port}` drives no cell input"
                )));
            }
        }
        Ok(())
    }

    /// Evaluate the netlist for one input assignment.
    fn eval(&self, lib: &TimingLibrary, order: &[usize], inputs: &[bool]) -> Result<(bool, bool)> {
        let mut net_vals: IndexMap<&str, bool> = IndexMap::new();
        for (k, port) in self.kind.inputs().iter().enumerate() {
            net_vals.insert(self.port_net(port), inputs[k]);
        }
        for &ci in order {
            let inst = &self.cells[ci];
            let cell = lib.cell(&inst.cell)?;
            for out_pin in &cell.output_pins {
                let Some(net) = inst.pins.get(out_pin) else {
                    return Err(Error::Structure(format!(
                        "instance `{}` leaves output `{out_pin}` unconnected",
                        inst.id
                    )));
                };
                let f = &cell.functions[out_pin];
                let v = f.eval(&|pin| {
                    inst.pins.get(pin).and_then(|n| net_vals.get(n.as_str()).copied())
                })?;
                net_vals.insert(net, v);
            }
        }
        let get = |port: &str| -> Result<bool> {
            net_vals
                .get(self.port_net(port))
                .copied()
                .ok_or_else(|| Error::Structure(format!("output port `{port}` undriven")))
        };
        Ok((get("sum")?, get("carry")?))
    }
}

/// Exhaustive truth-table check against the kind's arithmetic function.
pub fn verify_function(nl: &ImplNetlist, lib: &TimingLibrary) -> Result<bool> {
    let order = nl.topo_order(lib)?;
    let n = nl.kind.inputs().len();
    for bits in 0..(1u32 << n) {
        let inputs: Vec<bool> = (0..n).map(|k| bits >> k & 1 == 1).collect();
        let ones = inputs.iter().filter(|&&b| b).count();
        let (sum, carry) = nl.eval(lib, &order, &inputs)?;
        if sum != (ones % 2 == 1) || carry != (ones >= 2) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Characterization sample grid (ascending slew ns / load fF axes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharGrid {
    pub slew: Vec<f64>,
    pub load: Vec<f64>,
}

impl Default for CharGrid {
    fn default() -> Self {
        CharGrid {
            slew: vec![0.002, 0.01, 0.03, 0.08, 0.2],
            load: vec![0.5, 2.0, 4.0, 8.0, 16.0],
        }
    }
}

/// A characterized implementation: macro-level worst-case timing plus
/// area and per-port input capacitance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressorImpl {
    pub name: String,
    pub kind: CompKind,
    /// Sum of instance cell areas.
    pub area: f64,
    /// Port -> summed capacitance of the cell pins it drives.
    pub input_cap: IndexMap<String, f64>,
    /// (input port, output port) -> (delay, slew) macro tables.
    pub macro_luts: IndexMap<(String, String), (Lut2D, Lut2D)>,
    pub source: ImplNetlist,
}

impl CompressorImpl {
    pub fn cap_of(&self, port: &str) -> f64 {
        self.input_cap[port]
    }

    pub fn luts(&self, input: &str, output: &str) -> &(Lut2D, Lut2D) {
        &self.macro_luts[&(input.to_string(), output.to_string())]
    }
}

/// Characterize a verified netlist into macro LUTs on the given grid:
/// inject a slew at one input port with the other inputs idle, apply a
/// load at one output port, run an exact internal STA over worst-case
/// cell arcs, and record the max path delay and its endpoint slew.
pub fn characterize(nl: &ImplNetlist, lib: &TimingLibrary, grid: &CharGrid) -> Result<CompressorImpl> {
    nl.check_structure(lib)?;
    if !verify_function(nl, lib)? {
        return Err(Error::Structure(format!(
            "implementation `{}` does not realize its arithmetic function",
            nl.name
        )));
    }
    if !grid.slew.windows(2).all(|w| w[0] < w[1]) || !grid.load.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Argument("characterization grid axes must ascend".into()));
    }

    let order = nl.topo_order(lib)?;
    let mut wc: IndexMap<&str, IndexMap<(String, String), (Lut2D, Lut2D)>> = IndexMap::new();
    let mut area = 0.0;
    for inst in &nl.cells {
        let cell = lib.cell(&inst.cell)?;
        if !wc.contains_key(inst.cell.as_str()) {
            wc.insert(inst.cell.as_str(), worst_case_arcs(cell));
        }
        area += cell.area;
    }

    // capacitance attached to each net from cell input pins
    let mut net_cap: IndexMap<&str, f64> = IndexMap::new();
    for inst in &nl.cells {
        let cell = lib.cell(&inst.cell)?;
        for (pin, cap) in &cell.input_pins {
            if let Some(net) = inst.pins.get(pin) {
                *net_cap.entry(net.as_str()).or_insert(0.0) += cap;
            }
        }
    }
    let mut input_cap = IndexMap::new();
    for port in nl.kind.inputs() {
        input_cap.insert(
            port.to_string(),
            net_cap.get(nl.port_net(port)).copied().unwrap_or(0.0),
        );
    }

    let mut macro_luts = IndexMap::new();
    for in_port in nl.kind.inputs() {
        for out_port in nl.kind.outputs() {
            let mut delay_rows = Vec::with_capacity(grid.slew.len());
            let mut slew_rows = Vec::with_capacity(grid.slew.len());
            let mut reachable = true;
            for &s in &grid.slew {
                let mut drow = Vec::with_capacity(grid.load.len());
                let mut srow = Vec::with_capacity(grid.load.len());
                for &load in &grid.load {
                    match internal_sta(nl, lib, &wc, &order, &net_cap, in_port, out_port, s, load)? {
                        Some((d, sl)) => {
                            drow.push(d);
                            srow.push(sl);
                        }
                        None => {
                            reachable = false;
                        }
                    }
                }
                delay_rows.push(drow);
                slew_rows.push(srow);
            }
            if !reachable {
                // truth-table dependence makes every input->output pair
                // required for these kinds
                return Err(Error::Structure(format!(
                    "implementation `{}` has no combinational path {in_port}->{out_port}",
                    nl.name
                )));
            }
            let delay = Lut2D::new(grid.slew.clone(), grid.load.clone(), delay_rows)?;
            let slew = Lut2D::new(grid.slew.clone(), grid.load.clone(), slew_rows)?;
            macro_luts.insert((in_port.to_string(), out_port.to_string()), (delay, slew));
        }
    }

    Ok(CompressorImpl {
        name: nl.name.clone(),
        kind: nl.kind,
        area,
        input_cap,
        macro_luts,
        source: nl.clone(),
    })
}

/// Max path delay and endpoint slew from `in_port` to `out_port` with
/// injected slew `s` and load `load` at the output port. Internal net
/// delay is zero; internal loads come from the attached pin caps.
#[allow(clippy::too_many_arguments)]
fn internal_sta(
    nl: &ImplNetlist,
    lib: &TimingLibrary,
    wc: &IndexMap<&str, IndexMap<(String, String), (Lut2D, Lut2D)>>,
    order: &[usize],
    net_cap: &IndexMap<&str, f64>,
    in_port: &str,
    out_port: &str,
    s: f64,
    load: f64,
) -> Result<Option<(f64, f64)>> {
    let out_net = nl.port_net(out_port);
    let net_load = |net: &str| -> f64 {
        net_cap.get(net).copied().unwrap_or(0.0) + if net == out_net { load } else { 0.0 }
    };
    // (arrival, slew) per net reachable from in_port; idle inputs are absent
    let mut state: IndexMap<&str, (f64, f64)> = IndexMap::new();
    state.insert(nl.port_net(in_port), (0.0, s));
    for &ci in order {
        let inst = &nl.cells[ci];
        let cell = lib.cell(&inst.cell)?;
        let tables = &wc[inst.cell.as_str()];
        for o in &cell.output_pins {
            let Some(onet) = inst.pins.get(o) else { continue };
            let l = net_load(onet);
            let mut best: Option<(f64, f64)> = None;
            for (p, _) in &cell.input_pins {
                let Some(pnet) = inst.pins.get(p) else { continue };
                let Some(&(at, sl)) = state.get(pnet.as_str()) else { continue };
                let Some((dt, st)) = tables.get(&(p.clone(), o.clone())) else { continue };
                let cand_at = at + dt.eval(sl, l);
                let cand_slew = st.eval(sl, l);
                best = Some(match best {
                    None => (cand_at, cand_slew),
                    Some((ba, bs)) => (ba.max(cand_at), bs.max(cand_slew)),
                });
            }
            if let Some(v) = best {
                state.insert(onet.as_str(), v);
            }
        }
    }
    Ok(state.get(out_net).copied())
}

/// The characterized implementation sets available per compressor kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplSet {
    pub c32: Vec<CompressorImpl>,
    pub c22: Vec<CompressorImpl>,
}

impl ImplSet {
    pub fn for_kind(&self, kind: CompKind) -> &[CompressorImpl] {
        match kind {
            CompKind::C32 => &self.c32,
            CompKind::C22 => &self.c22,
        }
    }

    pub fn from_catalog(catalog: &str, lib: &TimingLibrary, grid: &CharGrid) -> Result<ImplSet> {
        let netlists = load_catalog(catalog)?;
        let mut set = ImplSet { c32: Vec::new(), c22: Vec::new() };
        for nl in &netlists {
            let ci = characterize(nl, lib, grid)?;
            match ci.kind {
                CompKind::C32 => set.c32.push(ci),
                CompKind::C22 => set.c22.push(ci),
            }
        }
        if set.c32.is_empty() || set.c22.is_empty() {
            return Err(Error::Structure(
                "catalog must provide at least one 3:2 and one 2:2 implementation".into(),
            ));
        }
        Ok(set)
    }
}
