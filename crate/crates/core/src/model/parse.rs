use std::fmt::Write;

use super::{FactorGraph, Literal, ModelBuilder};
use crate::error::{Error, Result};

/// Parses the line-oriented model format:
///
/// ```text
/// # comment
/// var <name> <cardinality>
/// feature <weight> [!]<name>=<value> ...
/// table <name1> [<name2>] <potential> ...
/// evidence <name> <value>
/// ```
///
/// Variables must be declared before use; ids follow declaration order.
pub fn parse_model(text: &str) -> Result<FactorGraph> {
    let mut builder = ModelBuilder::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        parse_line(&mut builder, &tokens).map_err(|e| at_line(line, e))?;
    }
    builder.build()
}

fn at_line(line: usize, err: Error) -> Error {
    match err {
        Error::Parse { message, .. } => Error::Parse { line, message },
        other => Error::Parse {
            line,
            message: other.to_string(),
        },
    }
}

fn syntax(message: impl Into<String>) -> Error {
    Error::Parse {
        line: 0,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(token: &str, what: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| syntax(format!("invalid {what} `{token}`")))
}

fn parse_line(builder: &mut ModelBuilder, tokens: &[&str]) -> Result<()> {
    match tokens[0] {
        "var" => {
            if tokens.len() != 3 {
                return Err(syntax("expected `var <name> <cardinality>`"));
            }
            builder.add_variable(tokens[1], parse_num(tokens[2], "cardinality")?)?;
        }
        "feature" => {
            if tokens.len() < 3 {
                return Err(syntax("expected `feature <weight> <literal> ...`"));
            }
            let weight: f64 = parse_num(tokens[1], "weight")?;
            let literals = tokens[2..]
                .iter()
                .map(|t| parse_literal(builder, t))
                .collect::<Result<Vec<_>>>()?;
            builder.add_feature(weight, literals)?;
        }
        "table" => {
            if tokens.len() < 3 {
                return Err(syntax("expected `table <name> [<name>] <potentials>`"));
            }
            let first = builder.variable_id(tokens[1])?;
            let card_first = builder.variables[first].cardinality;
            let mut scope = vec![first];
            if let Ok(second) = builder.variable_id(tokens[2]) {
                let card_second = builder.variables[second].cardinality;
                if tokens.len() - 3 == card_first * card_second {
                    scope.push(second);
                }
            }
            let potentials = tokens[1 + scope.len()..]
                .iter()
                .map(|t| parse_num(t, "potential"))
                .collect::<Result<Vec<f64>>>()?;
            builder.add_table(scope, potentials)?;
        }
        "evidence" => {
            if tokens.len() != 3 {
                return Err(syntax("expected `evidence <name> <value>`"));
            }
            let var = builder.variable_id(tokens[1])?;
            builder.set_evidence(var, parse_num(tokens[2], "value")?)?;
        }
        other => return Err(syntax(format!("unknown directive `{other}`"))),
    }
    Ok(())
}

fn parse_literal(builder: &ModelBuilder, token: &str) -> Result<Literal> {
    let (positive, body) = match token.as_bytes().first() {
        Some(b'!') => (false, &token[1..]),
        Some(b'+') => (true, &token[1..]),
        _ => (true, token),
    };
    let (name, value) = body
        .rsplit_once('=')
        .ok_or_else(|| syntax(format!("literal `{token}` is not of the form name=value")))?;
    let var = builder.variable_id(name)?;
    Ok(Literal::new(var, parse_num(value, "value")?, positive))
}

pub(super) fn write_model(model: &FactorGraph) -> String {
    let mut out = String::new();
    for v in model.variables() {
        writeln!(out, "var {} {}", v.name, v.cardinality).unwrap();
    }
    for f in model.features() {
        write!(out, "feature {}", f.weight).unwrap();
        for l in &f.literals {
            let neg = if l.positive { "" } else { "!" };
            write!(out, " {neg}{}={}", model.variable(l.var).name, l.value).unwrap();
        }
        out.push('\n');
    }
    for t in model.tables() {
        out.push_str("table");
        for &v in t.scope() {
            write!(out, " {}", model.variable(v).name).unwrap();
        }
        for p in t.potentials() {
            write!(out, " {p}").unwrap();
        }
        out.push('\n');
    }
    for (v, e) in model.evidence().iter().enumerate() {
        if let Some(value) = e {
            writeln!(out, "evidence {} {}", model.variable(v).name, value).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_variables_one_feature() {
        let m = parse_model("var a 2\nvar b 2\nfeature 0.5 a=1 !b=0\n").unwrap();
        assert_eq!(m.num_variables(), 2);
        assert_eq!(m.features().len(), 1);
        assert_eq!(
            m.features()[0].literals,
            vec![Literal::new(0, 1, true), Literal::new(1, 0, false)]
        );
    }

    #[test]
    fn undeclared_variable_is_reported_with_line() {
        let err = parse_model("var a 2\n\nfeature 1.0 b=1\n").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("unknown variable"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_model("var a 2\nevidence a 2\n").is_err());
        assert!(parse_model("var a 2\nfeature inf a=1\n").is_err());
        assert!(parse_model("var a 2\nfeature NaN a=1\n").is_err());
        assert!(parse_model("var a 2\nbogus\n").is_err());
        assert!(parse_model("var a 2\nfeature 1.0 a\n").is_err());
        assert!(parse_model("var a 2\nvar b 2\ntable a b 1 1 1\n").is_err());
    }

    #[test]
    fn tables_evidence_and_comments() {
        let text = "# header\nvar x 2\nvar y 3 # trailing\ntable x y 1 2 3 4 5 6\ntable y 0 1 1\nevidence y 2\n";
        let m = parse_model(text).unwrap();
        assert_eq!(m.tables().len(), 2);
        assert_eq!(m.tables()[0].scope(), &[0, 1]);
        assert_eq!(m.tables()[1].scope(), &[1]);
        assert_eq!(m.evidence(), &[None, Some(2)]);
        assert!((m.log_weight(&[1, 2]).unwrap() - 6f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn write_then_parse_is_identity_on_text() {
        let text = "var s(A) 2\nvar c(A) 2\nfeature 1.5 !s(A)=1 c(A)=1\ntable s(A) c(A) 1 0.2 0 3\nevidence c(A) 1\n";
        let m = parse_model(text).unwrap();
        assert_eq!(m.to_text(), text);
        assert_eq!(parse_model(&m.to_text()).unwrap().to_text(), text);
    }
}
