use std::fmt;

/// One instruction of an L_p program.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Instr {
    New(String),
    Set(String),
    Get(String),
    /// Spawn `body` as a new task, moving the listed promises to it.
    Async { moved: Vec<String>, body: Vec<Instr> },
}

/// The body of the root task.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Program {
    pub body: Vec<Instr>,
}

impl Program {
    pub fn new(body: Vec<Instr>) -> Self {
        Program { body }
    }

    /// Number of tasks the program can create, the root included.
    pub fn task_count(&self) -> usize {
        1 + count(&self.body, &|i| matches!(i, Instr::Async { .. }))
    }

    /// Number of `new` instructions.
    pub fn promise_count(&self) -> usize {
        count(&self.body, &|i| matches!(i, Instr::New(_)))
    }
}

fn count(body: &[Instr], pred: &dyn Fn(&Instr) -> bool) -> usize {
    body.iter()
        .map(|i| {
            let nested = match i {
                Instr::Async { body, .. } => count(body, pred),
                _ => 0,
            };
            usize::from(pred(i)) + nested
        })
        .sum()
}

impl Instr {
    /// The instruction on one line, with an async body elided.
    pub fn head(&self) -> String {
        match self {
            Instr::New(p) => format!("new {p}"),
            Instr::Set(p) => format!("set {p}"),
            Instr::Get(p) => format!("get {p}"),
            Instr::Async { moved, .. } => format!("async [{}] {{..}}", moved.join(", ")),
        }
    }

    fn render(&self, depth: usize, out: &mut String) {
        let pad = "    ".repeat(depth);
        match self {
            Instr::Async { moved, body } if body.is_empty() => {
                out.push_str(&format!("{pad}async [{}] {{}}\n", moved.join(", ")));
            }
            Instr::Async { moved, body } => {
                out.push_str(&format!("{pad}async [{}] {{\n", moved.join(", ")));
                for i in body {
                    i.render(depth + 1, out);
                }
                out.push_str(&format!("{pad}}}\n"));
            }
            other => {
                out.push_str(&pad);
                out.push_str(&other.head());
                out.push('\n');
            }
        }
    }
}

/// Renders in the textual grammar accepted by [`parse_program`](super::parse_program).
impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for i in &self.body {
            i.render(0, &mut out);
        }
        f.write_str(&out)
    }
}
