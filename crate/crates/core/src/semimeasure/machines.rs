//! Toy monotone machines: a unidirectional input tape (the program), a
//! unidirectional output tape, and a fuel budget counted in machine steps.

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MachineStatus {
    /// Tried to read past the end of the program.
    NeedsInput,
    /// Fuel ran out while the machine was still going.
    Running,
    Halted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineRun {
    pub output: Vec<bool>,
    pub status: MachineStatus,
}

/// A deterministic machine that reads its program left to right.
///
/// Implementations must be monotone: if `p` is a prefix of `q`, the output
/// of `run(p, fuel)` is a prefix of the output of `run(q, fuel)`. This holds
/// automatically when the machine only ever reads the program sequentially
/// and stops with [`MachineStatus::NeedsInput`] as soon as it runs dry.
pub trait MonotoneMachine: Send + Sync {
    fn name(&self) -> &str;

    fn run(&self, program: &[bool], fuel: u64) -> MachineRun;
}

/// Copies every input bit to the output. Under fair coin flips its output
/// distribution is the uniform measure.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoMachine;

impl MonotoneMachine for EchoMachine {
    fn name(&self) -> &str {
        "echo"
    }

    fn run(&self, program: &[bool], fuel: u64) -> MachineRun {
        let steps = usize::try_from(fuel).unwrap_or(usize::MAX);
        if steps >= program.len() {
            MachineRun {
                output: program.to_vec(),
                status: MachineStatus::NeedsInput,
            }
        } else {
            MachineRun {
                output: program[..steps].to_vec(),
                status: MachineStatus::Running,
            }
        }
    }
}

/// Opcodes of [`RegisterMachine`], three bits each, most significant first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Opcode {
    /// `000` emit 0
    Out0 = 0,
    /// `001` emit 1
    Out1 = 1,
    /// `010` emit the accumulator
    OutA = 2,
    /// `011` load the next raw input bit into the accumulator
    Read = 3,
    /// `100` negate the accumulator
    Flip = 4,
    /// `101` skip the next instruction when the accumulator is 0
    SkipZ = 5,
    /// `110` jump to the first instruction
    Loop = 6,
    /// `111` stop
    Halt = 7,
}

impl Opcode {
    fn decode(bits: &[bool]) -> Self {
        match (bits[0] as u8) << 2 | (bits[1] as u8) << 1 | bits[2] as u8 {
            0 => Self::Out0,
            1 => Self::Out1,
            2 => Self::OutA,
            3 => Self::Read,
            4 => Self::Flip,
            5 => Self::SkipZ,
            6 => Self::Loop,
            _ => Self::Halt,
        }
    }

    pub fn bits(self) -> [bool; 3] {
        let v = self as u8;
        [v & 4 != 0, v & 2 != 0, v & 1 != 0]
    }
}

/// One-bit accumulator machine with an 8-instruction code.
///
/// Instructions are fetched from the input tape on demand and kept in an
/// instruction memory, so `Loop` can replay everything read so far. `Read`
/// consumes a raw data bit from the same tape. Each executed instruction
/// costs one unit of fuel.
#[derive(Debug, Clone, Copy, Default)]
pub struct RegisterMachine;

impl RegisterMachine {
    /// Assembles opcodes into program bits.
    pub fn assemble(code: &[Opcode]) -> Vec<bool> {
        code.iter().flat_map(|op| op.bits()).collect()
    }
}

struct Tape<'a> {
    input: &'a [bool],
    pos: usize,
    memory: Vec<Opcode>,
}

impl Tape<'_> {
    /// Makes instruction `pc` available, reading it from input if needed.
    fn fetch(&mut self, pc: usize) -> Option<Opcode> {
        while self.memory.len() <= pc {
            if self.pos + 3 > self.input.len() {
                return None;
            }
            self.memory
                .push(Opcode::decode(&self.input[self.pos..self.pos + 3]));
            self.pos += 3;
        }
        Some(self.memory[pc])
    }
}

impl MonotoneMachine for RegisterMachine {
    fn name(&self) -> &str {
        "register"
    }

    fn run(&self, program: &[bool], fuel: u64) -> MachineRun {
        let mut tape = Tape {
            input: program,
            pos: 0,
            memory: Vec::new(),
        };
        let mut output = Vec::new();
        let mut acc = false;
        let mut pc = 0usize;
        let mut fuel = fuel;
        let status = loop {
            if fuel == 0 {
                break MachineStatus::Running;
            }
            let Some(op) = tape.fetch(pc) else {
                break MachineStatus::NeedsInput;
            };
            fuel -= 1;
            match op {
                Opcode::Out0 => output.push(false),
                Opcode::Out1 => output.push(true),
                Opcode::OutA => output.push(acc),
                Opcode::Read => {
                    if tape.pos >= tape.input.len() {
                        break MachineStatus::NeedsInput;
                    }
                    acc = tape.input[tape.pos];
                    tape.pos += 1;
                }
                Opcode::Flip => acc = !acc,
                Opcode::SkipZ => {
                    if !acc {
                        if tape.fetch(pc + 1).is_none() {
                            break MachineStatus::NeedsInput;
                        }
                        pc += 1;
                    }
                }
                Opcode::Loop => {
                    pc = 0;
                    continue;
                }
                Opcode::Halt => break MachineStatus::Halted,
            }
            pc += 1;
        };
        MachineRun { output, status }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Opcode::*;

    #[test]
    fn echo_copies_input() {
        let run = EchoMachine.run(&[true, false, true], 10);
        assert_eq!(run.output, [true, false, true]);
        assert_eq!(run.status, MachineStatus::NeedsInput);
        let short = EchoMachine.run(&[true, false, true], 2);
        assert_eq!(short.output, [true, false]);
        assert_eq!(short.status, MachineStatus::Running);
    }

    #[test]
    fn register_machine_programs() {
        let p = RegisterMachine::assemble(&[Out1, Out0, Halt]);
        let run = RegisterMachine.run(&p, 100);
        assert_eq!(run.output, [true, false]);
        assert_eq!(run.status, MachineStatus::Halted);

        // READ consumes the tape bit right after its own opcode.
        let mut p = RegisterMachine::assemble(&[Read]);
        p.push(true);
        p.extend(RegisterMachine::assemble(&[OutA, Flip, OutA, Halt]));
        let run = RegisterMachine.run(&p, 100);
        assert_eq!(run.output, [true, false]);

        // SKIPZ with acc = 0 skips OUT1.
        let p = RegisterMachine::assemble(&[SkipZ, Out1, Out0, Halt]);
        assert_eq!(RegisterMachine.run(&p, 100).output, [false]);

        let p = RegisterMachine::assemble(&[Out1, Loop]);
        let run = RegisterMachine.run(&p, 9);
        assert_eq!(run.status, MachineStatus::Running);
        assert_eq!(run.output, vec![true; 5]);
    }

    #[test]
    fn register_machine_is_monotone_in_program() {
        for len in 0..=12usize {
            for v in 0u32..(1 << len) {
                let p: Vec<bool> = (0..len).map(|i| (v >> (len - 1 - i)) & 1 == 1).collect();
                let short = RegisterMachine.run(&p, 40);
                for bit in [false, true] {
                    let mut q = p.clone();
                    q.push(bit);
                    let long = RegisterMachine.run(&q, 40);
                    assert!(long.output.starts_with(&short.output), "{p:?} -> {q:?}");
                    if short.status != MachineStatus::NeedsInput {
                        assert_eq!(short, long);
                    }
                }
            }
        }
    }
}
