use super::{Predicate, SpecAst};

// Binding strength; a child printed in a context stronger than its own gets
// parenthesized. Left operands reuse the parent's level (left associativity).
const SPEC_OR: u8 = 0;
const SPEC_SEQ: u8 = 1;
const SPEC_ENS: u8 = 2;
const SPEC_ATOM: u8 = 3;

const PRED_OR: u8 = 0;
const PRED_AND: u8 = 1;
const PRED_LIT: u8 = 2;

pub fn print_spec(phi: &SpecAst) -> String {
    let mut out = String::new();
    write_spec(phi, SPEC_OR, &mut out);
    out
}

pub fn print_predicate(b: &Predicate) -> String {
    let mut out = String::new();
    write_pred(b, PRED_OR, &mut out);
    out
}

fn write_spec(phi: &SpecAst, ctx: u8, out: &mut String) {
    let own = match phi {
        SpecAst::Achieve(_) => SPEC_ATOM,
        SpecAst::Ensuring(..) => SPEC_ENS,
        SpecAst::Seq(..) => SPEC_SEQ,
        SpecAst::Or(..) => SPEC_OR,
    };
    let wrap = own < ctx;
    if wrap {
        out.push('(');
    }
    match phi {
        SpecAst::Achieve(b) => {
            out.push_str("achieve ");
            write_pred(b, PRED_OR, out);
        }
        SpecAst::Ensuring(inner, b) => {
            write_spec(inner, SPEC_ENS, out);
            out.push_str(" ensuring ");
            write_pred(b, PRED_OR, out);
        }
        SpecAst::Seq(a, b) => {
            write_spec(a, SPEC_SEQ, out);
            out.push_str(" ; ");
            write_spec(b, SPEC_ENS, out);
        }
        SpecAst::Or(a, b) => {
            write_spec(a, SPEC_OR, out);
            out.push_str(" or ");
            write_spec(b, SPEC_SEQ, out);
        }
    }
    if wrap {
        out.push(')');
    }
}

fn write_pred(b: &Predicate, ctx: u8, out: &mut String) {
    let own = match b {
        Predicate::Literal(_) => PRED_LIT,
        Predicate::And(..) => PRED_AND,
        Predicate::Or(..) => PRED_OR,
    };
    let wrap = own < ctx;
    if wrap {
        out.push('(');
    }
    match b {
        Predicate::Literal(lit) => {
            if lit.negated {
                out.push('!');
            }
            out.push_str(&lit.name);
        }
        Predicate::And(l, r) => {
            write_pred(l, PRED_AND, out);
            out.push_str(" & ");
            write_pred(r, PRED_LIT, out);
        }
        Predicate::Or(l, r) => {
            write_pred(l, PRED_OR, out);
            out.push_str(" | ");
            write_pred(r, PRED_AND, out);
        }
    }
    if wrap {
        out.push(')');
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_spec;
    use super::*;

    #[test]
    fn renders_atoms() {
        assert_eq!(print_spec(&SpecAst::Achieve(Predicate::atom("g"))), "achieve g");
    }

    #[test]
    fn right_nested_sequences_keep_parens() {
        let a = || SpecAst::achieve(Predicate::atom("a"));
        let right = a().then(a().then(a()));
        assert_eq!(print_spec(&right), "achieve a ; (achieve a ; achieve a)");
        assert_eq!(parse_spec(&print_spec(&right)).unwrap(), right);
    }

    #[test]
    fn running_example_round_trip() {
        let src = "((achieve k1 or achieve k2) ; achieve d ; achieve g) ensuring !l";
        let ast = parse_spec(src).unwrap();
        let printed = print_spec(&ast);
        assert_eq!(printed, src);
        assert_eq!(parse_spec(&printed).unwrap(), ast);
    }
}
