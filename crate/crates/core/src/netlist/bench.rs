//! ISCAS-85 BENCH reader and writer.

use std::collections::HashSet;
use std::fmt::Write as _;

use super::{Circuit, CircuitBuilder, GateKind, NetlistError};

enum Statement<'a> {
    Input(&'a str),
    Output(&'a str),
    Gate {
        line: usize,
        out: &'a str,
        kind: &'a str,
        args: Vec<&'a str>,
    },
}

fn is_name(s: &str) -> bool {
    !s.is_empty()
        && !s
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '(' | ')' | ',' | '=' | '#'))
}

/// Splits `HEAD(a, b, ...)` into the head and its argument list.
fn call(line: usize, text: &str) -> Result<(&str, Vec<&str>), NetlistError> {
    let syntax = |message: &str| NetlistError::Syntax {
        line,
        message: message.to_string(),
    };
    let open = text.find('(').ok_or_else(|| syntax("expected `(`"))?;
    let body = text[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| syntax("expected `)` at end of line"))?;
    let head = text[..open].trim();
    let args: Vec<&str> = body.split(',').map(str::trim).collect();
    if args.iter().any(|a| !is_name(a)) {
        return Err(syntax("malformed argument list"));
    }
    Ok((head, args))
}

fn statement(line: usize, text: &str) -> Result<Statement<'_>, NetlistError> {
    if let Some((lhs, rhs)) = text.split_once('=') {
        let out = lhs.trim();
        if !is_name(out) {
            return Err(NetlistError::Syntax {
                line,
                message: format!("bad wire name `{out}`"),
            });
        }
        let (kind, args) = call(line, rhs.trim())?;
        return Ok(Statement::Gate {
            line,
            out,
            kind,
            args,
        });
    }
    let (head, args) = call(line, text)?;
    if args.len() != 1 {
        return Err(NetlistError::Syntax {
            line,
            message: format!("{head} takes exactly one wire"),
        });
    }
    match head.to_ascii_uppercase().as_str() {
        "INPUT" => Ok(Statement::Input(args[0])),
        "OUTPUT" => Ok(Statement::Output(args[0])),
        _ => Err(NetlistError::Syntax {
            line,
            message: format!("unknown declaration `{head}`"),
        }),
    }
}

/// Parses ISCAS-85 BENCH text. Every `INPUT` becomes an evaluator input; use
/// [`Circuit::with_garbler_inputs`] to hand some to the garbler.
///
/// Gates with fan-in above two become a left-to-right chain: `AND(a,b,c)` is
/// `AND(AND(a,b),c)`. Inverting kinds chain through their base kind and invert only at the last
/// link, so `NAND(a,b,c)` is `NAND(AND(a,b),c)`.
pub fn parse_bench(text: &str) -> Result<Circuit, NetlistError> {
    let mut statements = Vec::new();
    let mut names = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let st = statement(i + 1, body)?;
        match &st {
            Statement::Input(w) | Statement::Output(w) => {
                names.insert(*w);
            }
            Statement::Gate { out, args, .. } => {
                names.insert(*out);
                names.extend(args.iter().copied());
            }
        }
        statements.push(st);
    }

    let mut b = CircuitBuilder::new("circuit");
    let mut fresh = 0usize;
    let mut temp = |base: &str| loop {
        fresh += 1;
        let candidate = format!("{base}.{fresh}");
        if !names.contains(candidate.as_str()) {
            return candidate;
        }
    };

    for st in &statements {
        match st {
            Statement::Input(w) => {
                b.evaluator_input(w);
            }
            Statement::Output(w) => {
                b.output(w);
            }
            Statement::Gate {
                line,
                out,
                kind,
                args,
            } => {
                let kind = GateKind::from_bench_name(kind).ok_or_else(|| NetlistError::UnknownGate {
                    line: *line,
                    kind: kind.to_string(),
                })?;
                if args.len() <= 2 || kind.arity() == 1 {
                    b.gate(kind, args, out);
                    continue;
                }
                let link = match kind {
                    GateKind::Nand => GateKind::And,
                    GateKind::Nor => GateKind::Or,
                    GateKind::Xnor => GateKind::Xor,
                    k => k,
                };
                let mut acc = args[0].to_string();
                for (j, arg) in args[1..].iter().enumerate() {
                    if j + 2 == args.len() {
                        b.gate(kind, &[&acc, arg], out);
                    } else {
                        let t = temp(out);
                        b.gate(link, &[&acc, arg], &t);
                        acc = t;
                    }
                }
            }
        }
    }
    b.build()
}

/// Writes a circuit as BENCH text. Every input is emitted as `INPUT`, garbler inputs first, so
/// re-parsing yields the same circuit with all inputs on the evaluator side.
pub fn emit_bench(c: &Circuit) -> String {
    let mut s = String::new();
    let st = c.stats();
    let _ = writeln!(s, "# {}", c.name());
    let _ = writeln!(
        s,
        "# {} inputs, {} outputs, {} gates ({} free, {} non-free)",
        st.input_size, st.output_size, st.gate_count, st.xor_count, st.nonfree_count
    );
    for w in c.inputs() {
        let _ = writeln!(s, "INPUT({})", c.wire_name(w));
    }
    for &w in c.outputs() {
        let _ = writeln!(s, "OUTPUT({})", c.wire_name(w));
    }
    for g in c.gates() {
        let args: Vec<&str> = g.inputs().map(|w| c.wire_name(w)).collect();
        let _ = writeln!(
            s,
            "{} = {}({})",
            c.wire_name(g.out),
            g.kind.bench_name(),
            args.join(", ")
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::bits_of;

    const C17: &str = include_str!("../../benchmarks/c17.bench");

    #[test]
    fn single_and() {
        let c = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(c)\nc = AND(a,b)").unwrap();
        let s = c.stats();
        assert_eq!(s.gate_count, 1);
        assert_eq!((s.xor_count, s.nonfree_count), (0, 1));
    }

    #[test]
    fn c17_shape() {
        let c = parse_bench(C17).unwrap();
        let s = c.stats();
        assert_eq!(s.gate_count, 6);
        assert_eq!(s.histogram[&GateKind::Nand], 6);
        assert_eq!(s.input_size, 5);
        assert_eq!(s.output_size, 2);
    }

    #[test]
    fn wide_and_becomes_chain() {
        let c = parse_bench("INPUT(a)\nINPUT(b)\nINPUT(d)\nOUTPUT(c)\nc = AND(a,b,d)").unwrap();
        assert_eq!(c.gates().len(), 2);
        assert!(c.gates().iter().all(|g| g.kind == GateKind::And));
        for v in 0..8 {
            let x = bits_of(v, 3);
            assert_eq!(c.eval_plain(&x).unwrap(), vec![x[0] & x[1] & x[2]]);
        }
    }

    #[test]
    fn wide_inverting_gates_keep_semantics() {
        for kind in [GateKind::Nand, GateKind::Nor, GateKind::Xnor] {
            for fan_in in 3..=5usize {
                let names: Vec<String> = (0..fan_in).map(|i| format!("i{i}")).collect();
                let mut text = String::new();
                for n in &names {
                    text += &format!("INPUT({n})\n");
                }
                text += &format!("OUTPUT(y)\ny = {}({})\n", kind, names.join(","));
                let c = parse_bench(&text).unwrap();
                assert_eq!(c.gates().len(), fan_in - 1);
                for v in 0..(1u64 << fan_in) {
                    let x = bits_of(v, fan_in);
                    let expected = match kind {
                        GateKind::Nand => !x.iter().all(|&b| b),
                        GateKind::Nor => !x.iter().any(|&b| b),
                        _ => x.iter().filter(|&&b| b).count() % 2 == 0,
                    };
                    assert_eq!(
                        c.eval_plain(&x).unwrap(),
                        vec![expected],
                        "{kind} fan-in {fan_in}"
                    );
                }
            }
        }
    }

    #[test]
    fn buff_alias_and_comments() {
        let c = parse_bench("# header\nINPUT(a) # trailing\nOUTPUT(y)\ny = BUFF(a)\n").unwrap();
        assert_eq!(c.gates()[0].kind, GateKind::Buf);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_bench("INPUT(a)\nOUTPUT(y)\ny = DFF(a)"),
            Err(NetlistError::UnknownGate { line: 3, .. })
        ));
        assert_eq!(
            parse_bench("INPUT(a)\nOUTPUT(y)\ny = AND(a,z)"),
            Err(NetlistError::UndeclaredWire("z".into()))
        );
        assert_eq!(
            parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\ny = BUF(a)"),
            Err(NetlistError::DuplicateDriver("y".into()))
        );
        assert!(matches!(
            parse_bench("INPUT(a)\nOUTPUT(y)\nx = AND(a,y)\ny = OR(a,x)"),
            Err(NetlistError::Cycle(_))
        ));
        assert!(matches!(
            parse_bench("INPUT(a\n"),
            Err(NetlistError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn emit_then_parse_round_trips() {
        let c = parse_bench(C17).unwrap().with_name("circuit");
        assert_eq!(parse_bench(&emit_bench(&c)).unwrap(), c);
    }
}
