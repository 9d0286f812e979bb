//! Bounded approximation of the universal semimeasure over a toy monotone
//! machine, and its normalization to a proper measure.
//!
//! `mass(s)` is the total weight `2^-l(p)` of the minimal programs `p`
//! (length at most `cap`) whose output within `fuel` steps starts with `s`.
//! Weights are dyadic, so the table keeps them as exact integers in units of
//! `2^-cap`; the result is identical whatever order the enumeration runs in.

mod machines;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{render, BinaryString, GenericCursor, MeasureCursor, SequenceMeasure};

pub use machines::{
    EchoMachine, MachineRun, MachineStatus, MonotoneMachine, Opcode, RegisterMachine,
};

pub const MAX_CAP: usize = 40;
pub const MAX_DEPTH: usize = 24;

// Programs at this length are enumerated as independent parallel subtrees.
const SPLIT_LENGTH: usize = 6;

/// Masses of every string up to `depth`, stored in tree order:
/// index `(1 << l) - 1 + value` for a string of length `l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemimeasureTable {
    machine: String,
    cap: usize,
    fuel: u64,
    depth: usize,
    units: Vec<u64>,
}

fn tree_index(bits: &[bool]) -> usize {
    let value = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
    (1 << bits.len()) - 1 + value
}

struct Enumeration<'m> {
    machine: &'m dyn MonotoneMachine,
    cap: usize,
    fuel: u64,
    depth: usize,
}

impl Enumeration<'_> {
    /// Credits `program` to every output prefix it is minimal for. Returns
    /// the output length if the program's extensions can still add
    /// anything, i.e. the machine stopped for lack of input.
    fn credit(
        &self,
        program: &[bool],
        parent_output: Option<usize>,
        units: &mut [u64],
    ) -> Option<usize> {
        let run = self.machine.run(program, self.fuel);
        let weight = 1u64 << (self.cap - program.len());
        let first = parent_output.map_or(0, |n| n + 1);
        let last = run.output.len().min(self.depth);
        for len in first..=last {
            units[tree_index(&run.output[..len])] += weight;
        }
        (run.status == MachineStatus::NeedsInput && program.len() < self.cap)
            .then_some(run.output.len())
    }

    fn descend(&self, program: &mut Vec<bool>, parent_output: Option<usize>, units: &mut [u64]) {
        if let Some(out) = self.credit(program, parent_output, units) {
            for bit in [false, true] {
                program.push(bit);
                self.descend(program, Some(out), units);
                program.pop();
            }
        }
    }

    /// Walks programs shorter than `SPLIT_LENGTH` directly and returns the
    /// frontier of live programs at that length.
    fn frontier(&self, units: &mut [u64]) -> Vec<(Vec<bool>, usize)> {
        let mut level = Vec::new();
        if let Some(out) = self.credit(&[], None, units) {
            level.push((Vec::new(), out));
        }
        while let Some((p, _)) = level.first() {
            if p.len() >= SPLIT_LENGTH {
                break;
            }
            let mut next = Vec::new();
            for (p, out) in level {
                for bit in [false, true] {
                    let mut q = p.clone();
                    q.push(bit);
                    if let Some(o) = self.credit(&q, Some(out), units) {
                        next.push((q, o));
                    }
                }
            }
            level = next;
        }
        level
    }
}

/// Enumerates programs by length up to `cap` and accumulates the minimal
/// program weights for every output prefix of length at most `depth`.
///
/// Programs still running when `fuel` is spent only count for the bits they
/// already emitted, so every mass is a lower bound on its unbounded value.
pub fn approximate_m(
    machine: &dyn MonotoneMachine,
    cap: usize,
    fuel: u64,
    depth: usize,
) -> Result<SemimeasureTable> {
    if cap == 0 || cap > MAX_CAP {
        return Err(Error::InvalidParameter(format!(
            "cap must be in 1..={MAX_CAP}, got {cap}"
        )));
    }
    if fuel == 0 {
        return Err(Error::InvalidParameter("fuel must be at least 1".into()));
    }
    if depth == 0 || depth > MAX_DEPTH {
        return Err(Error::InvalidParameter(format!(
            "depth must be in 1..={MAX_DEPTH}, got {depth}"
        )));
    }
    let size = (1usize << (depth + 1)) - 1;
    let job = Enumeration {
        machine,
        cap,
        fuel,
        depth,
    };
    let mut units = vec![0u64; size];
    let frontier = job.frontier(&mut units);

    // Frontier nodes were credited already; enumerate their children.
    let partial = frontier
        .par_iter()
        .fold(
            || vec![0u64; size],
            |mut acc, (p, out)| {
                let mut program = p.clone();
                for bit in [false, true] {
                    program.push(bit);
                    job.descend(&mut program, Some(*out), &mut acc);
                    program.pop();
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; size],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    units.iter_mut().zip(partial).for_each(|(x, y)| *x += y);

    Ok(SemimeasureTable {
        machine: machine.name().to_string(),
        cap,
        fuel,
        depth,
        units,
    })
}

impl SemimeasureTable {
    pub fn machine(&self) -> &str {
        &self.machine
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn fuel(&self) -> u64 {
        self.fuel
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len > self.depth {
            return Err(Error::BeyondDepth {
                len,
                depth: self.depth,
            });
        }
        Ok(())
    }

    /// Exact mass in units of `2^-cap`.
    pub fn mass_units(&self, s: &[bool]) -> Result<u64> {
        self.check_len(s.len())?;
        Ok(self.units[tree_index(s)])
    }

    pub fn mass(&self, s: &[bool]) -> Result<f64> {
        Ok(self.mass_units(s)? as f64 / (self.cap as f64).exp2())
    }

    /// Conditional of `bit` after `s`: `mass(s·bit) / (mass(s0) + mass(s1))`.
    pub fn normalize(&self, s: &[bool], bit: bool) -> Result<f64> {
        self.check_len(s.len() + 1)?;
        let mut child = s.to_vec();
        child.push(false);
        let zero = self.units[tree_index(&child)];
        *child.last_mut().unwrap() = true;
        let one = self.units[tree_index(&child)];
        let total = zero + one;
        if total == 0 {
            return Err(Error::NoContinuationMass { prefix: render(s) });
        }
        Ok(if bit { one } else { zero } as f64 / total as f64)
    }

    /// Every string with its mass, shortest first then lexicographic.
    pub fn entries(&self) -> impl Iterator<Item = (BinaryString, u64)> + '_ {
        (0..=self.depth)
            .flat_map(BinaryString::all_of_length)
            .map(|s| {
                let u = self.units[tree_index(&s)];
                (s, u)
            })
    }

    pub fn to_json(&self) -> Result<String> {
        let scale = (self.cap as f64).exp2();
        let file = TableFile {
            format: TABLE_FORMAT.into(),
            version: TABLE_VERSION,
            machine: self.machine.clone(),
            cap: self.cap,
            fuel: self.fuel,
            depth: self.depth,
            mass: self
                .entries()
                .map(|(s, u)| (s.to_string(), u as f64 / scale))
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TableFile = serde_json::from_str(text)?;
        if file.format != TABLE_FORMAT || file.version != TABLE_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported table format {} v{}",
                file.format, file.version
            )));
        }
        if file.cap == 0 || file.cap > MAX_CAP || file.depth == 0 || file.depth > MAX_DEPTH {
            return Err(Error::Serialization("cap or depth out of range".into()));
        }
        let scale = (file.cap as f64).exp2();
        let mut units = vec![0u64; (1usize << (file.depth + 1)) - 1];
        for (key, mass) in &file.mass {
            let s: BinaryString = key.parse()?;
            if s.len() > file.depth {
                return Err(Error::Serialization(format!(
                    "entry {key:?} deeper than depth"
                )));
            }
            let u = mass * scale;
            if !(u >= 0.0 && u.fract() == 0.0 && u <= scale) {
                return Err(Error::Serialization(format!(
                    "mass {mass} of {key:?} is not a multiple of 2^-{}",
                    file.cap
                )));
            }
            units[tree_index(&s)] = u as u64;
        }
        Ok(Self {
            machine: file.machine,
            cap: file.cap,
            fuel: file.fuel,
            depth: file.depth,
            units,
        })
    }
}

const TABLE_FORMAT: &str = "unipred.semimeasure";
const TABLE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TableFile {
    format: String,
    version: u32,
    machine: String,
    cap: usize,
    fuel: u64,
    depth: usize,
    mass: BTreeMap<String, f64>,
}

/// The measure obtained by chaining [`SemimeasureTable::normalize`]; defined
/// on strings up to the table depth.
#[derive(Debug, Clone)]
pub struct NormalizedSemimeasure {
    table: SemimeasureTable,
}

impl NormalizedSemimeasure {
    pub fn new(table: SemimeasureTable) -> Self {
        Self { table }
    }

    pub fn table(&self) -> &SemimeasureTable {
        &self.table
    }
}

impl SequenceMeasure for NormalizedSemimeasure {
    fn name(&self) -> String {
        format!(
            "xi[{} cap={} fuel={}]",
            self.table.machine, self.table.cap, self.table.fuel
        )
    }

    fn prob_one(&self, context: &[bool]) -> Result<f64> {
        self.table.normalize(context, true)
    }

    fn cursor(&self) -> Box<dyn MeasureCursor<'_> + '_> {
        GenericCursor::boxed(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> BinaryString {
        x.parse().unwrap()
    }

    /// Oracle: brute-force over every program of length <= cap, computing
    /// minimality by re-running each proper prefix.
    fn brute_force_mass(
        machine: &dyn MonotoneMachine,
        cap: usize,
        fuel: u64,
        target: &[bool],
    ) -> f64 {
        let mut total = 0.0;
        for len in 0..=cap {
            for p in BinaryString::all_of_length(len) {
                let out = machine.run(&p, fuel).output;
                if !out.starts_with(target) {
                    continue;
                }
                let minimal =
                    (0..len).all(|k| !machine.run(&p[..k], fuel).output.starts_with(target));
                if minimal {
                    total += (-(len as f64)).exp2();
                }
            }
        }
        total
    }

    #[test]
    fn echo_hand_enumeration() {
        let table = approximate_m(&EchoMachine, 2, 100, 1).unwrap();
        assert_eq!(table.mass(&s("0")).unwrap(), 0.5);
        assert_eq!(table.mass(&s("1")).unwrap(), 0.5);
        assert_eq!(table.mass(&[]).unwrap(), 1.0);
        assert_eq!(table.normalize(&[], false).unwrap(), 0.5);
    }

    #[test]
    fn matches_brute_force_oracle() {
        for (machine, cap, fuel, depth) in [
            (
                &RegisterMachine as &dyn MonotoneMachine,
                10usize,
                30u64,
                4usize,
            ),
            (&RegisterMachine, 9, 7, 3),
            (&EchoMachine, 6, 4, 5),
        ] {
            let table = approximate_m(machine, cap, fuel, depth).unwrap();
            for (x, units) in table.entries() {
                let expected = brute_force_mass(machine, cap, fuel, &x);
                assert_eq!(
                    units as f64 / (cap as f64).exp2(),
                    expected,
                    "{} {x:?}",
                    machine.name()
                );
            }
        }
    }

    #[test]
    fn semimeasure_defect_and_total_mass() {
        let table = approximate_m(&RegisterMachine, 14, 40, 6).unwrap();
        assert!(table.mass(&[]).unwrap() <= 1.0);
        for (x, units) in table.entries() {
            if x.len() < table.depth() {
                let u0 = table.mass_units(&x.extended(false)).unwrap();
                let u1 = table.mass_units(&x.extended(true)).unwrap();
                assert!(u0 + u1 <= units, "defect violated at {x:?}");
            }
        }
        // The register machine halts on some programs: strict defect at ε.
        let u0 = table.mass_units(&s("0")).unwrap();
        let u1 = table.mass_units(&s("1")).unwrap();
        assert!(u0 + u1 < table.mass_units(&[]).unwrap());
    }

    #[test]
    fn normalize_arithmetic_and_errors() {
        let mut table = approximate_m(&EchoMachine, 3, 10, 2).unwrap();
        // Overwrite the children of ε to exercise the ratio directly.
        table.units[tree_index(&s("0"))] = 3;
        table.units[tree_index(&s("1"))] = 1;
        assert_eq!(table.normalize(&[], false).unwrap(), 0.75);

        table.units[tree_index(&s("10"))] = 0;
        table.units[tree_index(&s("11"))] = 0;
        assert!(matches!(
            table.normalize(&s("1"), true),
            Err(Error::NoContinuationMass { .. })
        ));
        assert!(matches!(
            table.normalize(&s("10"), true),
            Err(Error::BeyondDepth { .. })
        ));
    }

    #[test]
    fn echo_normalizes_to_uniform() {
        let table = approximate_m(&EchoMachine, 12, 64, 10).unwrap();
        let xi = NormalizedSemimeasure::new(table);
        for len in 0..10 {
            for x in BinaryString::all_of_length(len) {
                assert!((xi.prob_one(&x).unwrap() - 0.5).abs() <= 1e-12);
                let ln = xi.ln_prefix_probability(&x).unwrap();
                assert!((ln.exp() - (-(len as f64)).exp2()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn normalized_table_is_a_measure() {
        let table = approximate_m(&RegisterMachine, 15, 60, 5).unwrap();
        let xi = NormalizedSemimeasure::new(table);
        assert_eq!(xi.ln_prefix_probability(&[]).unwrap(), 0.0);
        for len in 0..5 {
            for x in BinaryString::all_of_length(len) {
                let parent = xi.ln_prefix_probability(&x);
                let Ok(parent) = parent else { continue };
                let parent = parent.exp();
                if parent == 0.0 {
                    continue;
                }
                let c0 = xi.ln_prefix_probability(&x.extended(false)).unwrap().exp();
                let c1 = xi.ln_prefix_probability(&x.extended(true)).unwrap().exp();
                assert!((c0 + c1 - parent).abs() <= 1e-12, "{x:?}");
            }
        }
    }

    #[test]
    fn mass_is_monotone_in_cap_and_fuel() {
        let base = approximate_m(&RegisterMachine, 10, 20, 4).unwrap();
        let more_cap = approximate_m(&RegisterMachine, 11, 20, 4).unwrap();
        let more_fuel = approximate_m(&RegisterMachine, 10, 35, 4).unwrap();
        for ((x, u), (_, u_cap)) in base.entries().zip(more_cap.entries()) {
            let scale = 2.0;
            assert!(
                u_cap as f64 >= u as f64 * scale,
                "cap monotonicity at {x:?}"
            );
        }
        for ((x, u), (_, u_fuel)) in base.entries().zip(more_fuel.entries()) {
            assert!(u_fuel >= u, "fuel monotonicity at {x:?}");
        }
    }

    #[test]
    fn parallel_enumeration_is_reproducible() {
        let a = approximate_m(&RegisterMachine, 16, 48, 6).unwrap();
        let b = approximate_m(&RegisterMachine, 16, 48, 6).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn json_round_trip() {
        let table = approximate_m(&RegisterMachine, 12, 30, 4).unwrap();
        let text = table.to_json().unwrap();
        assert!(text.contains("\"cap\": 12"));
        let back = SemimeasureTable::from_json(&text).unwrap();
        assert_eq!(back, table);
        assert!(
            SemimeasureTable::from_json(&text.replace("\"version\": 1", "\"version\": 9")).is_err()
        );
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(approximate_m(&EchoMachine, 0, 1, 1).is_err());
        assert!(approximate_m(&EchoMachine, 1, 0, 1).is_err());
        assert!(approximate_m(&EchoMachine, 1, 1, 0).is_err());
    }
}
